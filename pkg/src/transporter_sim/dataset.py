"""Lifetime-regression dataset generation and line-delimited serialization.

Each sample is one exposure: a ground-truth lifetime drawn uniformly from the
configured range and a binary spike train built from a fixed number of
detected photon phases, routed through either the reference encoder
(histogram + binarize) or the full ring encoder (ideal clock, readout rotated
into phase-bin order; both routes produce identical bits by construction).

Splits draw from disjoint, tagged seed streams of one master seed, so any
split can be regenerated alone, bit for bit, and samples are independent
(generation parallelizes across samples).
"""

from __future__ import annotations

import json
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import oracle, ring_encoder
from .photon_sim import DetectionEvent, LaserConfig, SpadModel, sample_truncated_exp
from .spike_train import SpikeTrain, rotate

__all__ = [
    "FlimSample",
    "SampleMeta",
    "DatasetSpec",
    "Dataset",
    "DatasetFormatError",
    "generate",
    "generate_split",
    "sample_phases",
    "save",
    "load",
]

_FORMAT = "flim-dataset"
_VERSION = 1
_SPLIT_TAGS = {"train": 0, "val": 1, "test": 2}


class DatasetFormatError(ValueError):
    """A dataset file that cannot be parsed; the message names the record."""


@dataclass(frozen=True)
class SampleMeta:
    photons: int
    background_fraction: float
    seed: int


@dataclass(frozen=True)
class FlimSample:
    spikes: SpikeTrain
    lifetime: float
    meta: SampleMeta


@dataclass(frozen=True)
class DatasetSpec:
    n_train: int = 20000
    n_val: int = 2000
    n_test: int = 2000
    photons_per_sample: int = 256
    background_fraction: float = 0.0
    lifetime_range: tuple[float, float] = (5.0, 20.0)
    encoder_path: str = "oracle"  # or "ring"
    seed: int = 0
    n_bins: int = 128
    laser_period_ns: float = 128.0
    detector: SpadModel | None = None  # route photons through pdp/dead time
    detector_rate: float = 4.0  # emitted photons per period on the detector route

    def __post_init__(self):
        for name in ("n_train", "n_val", "n_test"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")
        if self.photons_per_sample < 0:
            raise ValueError("photons_per_sample must be >= 0")
        if not 0.0 <= self.background_fraction <= 1.0:
            raise ValueError("background_fraction must be in [0,1]")
        lo, hi = self.lifetime_range
        if not 0.0 < lo < hi:
            raise ValueError(f"lifetime_range must satisfy 0 < lo < hi, got {lo}, {hi}")
        if self.encoder_path not in ("oracle", "ring"):
            raise ValueError(f"encoder_path must be 'oracle' or 'ring', got {self.encoder_path!r}")
        if self.n_bins < 1 or self.laser_period_ns <= 0:
            raise ValueError("n_bins must be >= 1 and laser_period_ns > 0")
        if self.detector_rate <= 0:
            raise ValueError("detector_rate must be > 0")

    @property
    def bin_width(self) -> float:
        return self.laser_period_ns / self.n_bins

    def header(self, split: str, n_samples: int) -> dict:
        return {
            "format": _FORMAT,
            "version": _VERSION,
            "split": split,
            "n_samples": n_samples,
            "photons_per_sample": self.photons_per_sample,
            "background_fraction": self.background_fraction,
            "lifetime_range": list(self.lifetime_range),
            "encoder_path": self.encoder_path,
            "seed": self.seed,
            "n_bins": self.n_bins,
            "laser_period_ns": self.laser_period_ns,
            "detector": None
            if self.detector is None
            else {
                "pdp": self.detector.pdp,
                "dead_time": self.detector.dead_time,
                "rate": self.detector_rate,
            },
        }


@dataclass
class Dataset:
    samples: list[FlimSample]
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.samples)

    def to_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """(X, y): binary train matrix (N, n_bins) uint8 and lifetimes (N,)."""
        X = np.stack([s.spikes.bits for s in self.samples])
        y = np.array([s.lifetime for s in self.samples], dtype=np.float64)
        return X, y


def _draw_phases(rng: np.random.Generator, spec: DatasetSpec, tau: float) -> np.ndarray:
    n = spec.photons_per_sample
    is_bg = rng.random(n) < spec.background_fraction
    phases = np.empty(n)
    n_bg = int(is_bg.sum())
    phases[is_bg] = rng.random(n_bg) * spec.laser_period_ns
    phases[~is_bg] = sample_truncated_exp(rng, tau, spec.laser_period_ns, n - n_bg)
    return phases


def _draw_detected_phases(
    rng: np.random.Generator, spec: DatasetSpec, tau: float
) -> np.ndarray:
    """Ablation route: emit Poisson(detector_rate) photons per period and run
    them through pdp thinning plus greedy dead time until the count is reached."""
    spad = spec.detector
    T = spec.laser_period_ns
    out: list[float] = []
    t_last = -np.inf
    period = 0
    while len(out) < spec.photons_per_sample:
        n_p = int(rng.poisson(spec.detector_rate))
        is_bg = rng.random(n_p) < spec.background_fraction
        phases = np.empty(n_p)
        n_bg = int(is_bg.sum())
        phases[is_bg] = rng.random(n_bg) * T
        phases[~is_bg] = sample_truncated_exp(rng, tau, T, n_p - n_bg)
        phases.sort()
        u = rng.random(n_p)
        for ph, ui in zip(phases, u):
            t = period * T + float(ph)
            if ui < spad.pdp and t - t_last >= spad.dead_time:
                out.append(float(ph))
                t_last = t
                if len(out) == spec.photons_per_sample:
                    break
        period += 1
    return np.array(out)


def _encode_ring(spec: DatasetSpec, phases: np.ndarray) -> SpikeTrain:
    # one photon per laser period keeps detections sorted without reordering
    n = len(phases)
    laser = LaserConfig(period=spec.laser_period_ns, n_periods=max(n, 1))
    cfg = ring_encoder.EncoderConfig(laser=laser, n_stages=spec.n_bins)
    dets = [
        DetectionEvent(i * spec.laser_period_ns + float(p), float(p))
        for i, p in enumerate(phases)
    ]
    state = ring_encoder.encode(dets, cfg)
    train = ring_encoder.readout(state, readout_clock_hz=200e6)
    return rotate(train, ring_encoder.phase_offset(state, cfg))


def sample_phases(spec: DatasetSpec, tag: int, index: int) -> tuple[float, np.ndarray]:
    """Reproduce one sample's (lifetime, detected phases) from its seed stream.

    The stream depends only on (spec.seed, tag, index), which is what makes
    splits independently regenerable and samples parallelizable.
    """
    rng = np.random.default_rng(
        np.random.SeedSequence(entropy=spec.seed, spawn_key=(tag, index))
    )
    lo, hi = spec.lifetime_range
    tau = float(rng.uniform(lo, hi))
    if spec.detector is None:
        phases = _draw_phases(rng, spec, tau)
    else:
        phases = _draw_detected_phases(rng, spec, tau)
    return tau, phases


def _make_sample(spec: DatasetSpec, tag: int, index: int) -> FlimSample:
    tau, phases = sample_phases(spec, tag, index)
    if spec.encoder_path == "oracle":
        spikes = oracle.binarize(oracle.histogram(phases, spec.n_bins, spec.bin_width))
    else:
        spikes = _encode_ring(spec, phases)
    return FlimSample(
        spikes=spikes,
        lifetime=tau,
        meta=SampleMeta(spec.photons_per_sample, spec.background_fraction, spec.seed),
    )


def _make_samples_chunk(spec: DatasetSpec, tag: int, indices: list[int]):
    return [_make_sample(spec, tag, i) for i in indices]


def generate_split(spec: DatasetSpec, split: str, workers: int = 1) -> Dataset:
    """Generate one split from its tagged seed stream."""
    tag = _SPLIT_TAGS[split]
    n = {"train": spec.n_train, "val": spec.n_val, "test": spec.n_test}[split]
    if spec.photons_per_sample == 0:
        warnings.warn(
            "photons_per_sample=0: generating degenerate all-zero spike trains",
            stacklevel=2,
        )
    if workers <= 1:
        samples = _make_samples_chunk(spec, tag, list(range(n)))
    else:
        chunks = [list(range(i, n, workers)) for i in range(workers)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(
                pool.map(_make_samples_chunk, [spec] * workers, [tag] * workers, chunks)
            )
        by_index: dict[int, FlimSample] = {}
        for chunk, res in zip(chunks, results):
            by_index.update(zip(chunk, res))
        samples = [by_index[i] for i in range(n)]
    return Dataset(samples=samples, meta=spec.header(split, n))


def generate(spec: DatasetSpec, workers: int = 1):
    """Generate (train, val, test) datasets; each split is independently
    reproducible from the master seed."""
    return tuple(generate_split(spec, s, workers) for s in ("train", "val", "test"))


def save(dataset: Dataset, path) -> None:
    """Line-delimited text: JSON header, then 'lifetime<TAB>bits' per record."""
    lines = [json.dumps(dataset.meta)]
    for s in dataset.samples:
        lines.append(f"{repr(s.lifetime)}\t{s.spikes.to01()}")
    Path(path).write_text("\n".join(lines) + "\n")


def load(path) -> Dataset:
    text = Path(path).read_text()
    lines = text.splitlines()
    if not lines:
        raise DatasetFormatError(f"{path}: empty file")
    try:
        meta = json.loads(lines[0])
    except json.JSONDecodeError as e:
        raise DatasetFormatError(f"{path}: bad header: {e}") from e
    if meta.get("format") != _FORMAT:
        raise DatasetFormatError(f"{path}: not a {_FORMAT} file")
    if meta.get("version") != _VERSION:
        raise DatasetFormatError(f"{path}: unsupported version {meta.get('version')}")
    n = int(meta["n_samples"])
    n_bins = int(meta["n_bins"])
    records = lines[1:]
    if len(records) < n:
        raise DatasetFormatError(
            f"{path}: truncated at record {len(records)} (header promises {n})"
        )
    if len(records) > n:
        raise DatasetFormatError(
            f"{path}: {len(records)} records but header promises {n}"
        )
    sample_meta = SampleMeta(
        photons=int(meta["photons_per_sample"]),
        background_fraction=float(meta["background_fraction"]),
        seed=int(meta["seed"]),
    )
    samples = []
    for i in range(n):
        parts = records[i].split("\t")
        if len(parts) != 2:
            raise DatasetFormatError(f"{path}: record {i}: expected 'lifetime<TAB>bits'")
        try:
            lifetime = float(parts[0])
        except ValueError as e:
            raise DatasetFormatError(f"{path}: record {i}: bad lifetime {parts[0]!r}") from e
        try:
            spikes = SpikeTrain.from01(parts[1])
        except ValueError as e:
            raise DatasetFormatError(f"{path}: record {i}: {e}") from e
        if len(spikes) != n_bins:
            raise DatasetFormatError(
                f"{path}: record {i}: train length {len(spikes)} != n_bins {n_bins}"
            )
        samples.append(FlimSample(spikes=spikes, lifetime=lifetime, meta=sample_meta))
    return Dataset(samples=samples, meta=meta)
