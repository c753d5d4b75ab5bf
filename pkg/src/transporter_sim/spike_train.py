"""Binary spike trains: the fixed-width bit sequences exchanged between the
ring encoder, the reference encoder, and the network.

Wire format is two text lines: a JSON header and an ASCII '0'/'1' string of
length n_stages, so trains are human-diffable and parseable anywhere.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

__all__ = ["SpikeTrain", "rotate", "format_spike_train", "parse_spike_train"]

_FORMAT = "spike-train"
_VERSION = 1


@dataclass(frozen=True, eq=False)
class SpikeTrain:
    """Bit sequence plus optional serial-readout duration annotation (ns)."""

    bits: np.ndarray
    readout_duration_ns: float | None = None

    def __post_init__(self):
        b = np.asarray(self.bits, dtype=np.uint8)
        if b.ndim != 1:
            raise ValueError("spike train bits must be one-dimensional")
        if np.any(b > 1):
            raise ValueError("spike train bits must be 0 or 1")
        object.__setattr__(self, "bits", b)

    def __len__(self) -> int:
        return int(self.bits.size)

    def __eq__(self, other) -> bool:
        if not isinstance(other, SpikeTrain):
            return NotImplemented
        return np.array_equal(self.bits, other.bits)

    def to01(self) -> str:
        return "".join("1" if b else "0" for b in self.bits)

    @classmethod
    def from01(cls, s: str) -> "SpikeTrain":
        if set(s) - {"0", "1"}:
            raise ValueError(f"bit string contains non-binary characters: {s!r}")
        return cls(np.frombuffer(s.encode("ascii"), dtype=np.uint8) - ord("0"))


def rotate(train: SpikeTrain, offset: int) -> SpikeTrain:
    """Rotate so aligned[i] = bits[(i - offset) mod n].

    Rotating a serial readout by the encoder's phase offset puts it in
    laser-phase-bin order.
    """
    return SpikeTrain(np.roll(train.bits, offset % len(train)))


def format_spike_train(
    train: SpikeTrain,
    *,
    laser_period_ns: float,
    ring_clock_hz: float,
    stopper: str,
    photon_count: int,
    phase_offset: int,
) -> str:
    header = {
        "format": _FORMAT,
        "version": _VERSION,
        "n_stages": len(train),
        "laser_period_ns": laser_period_ns,
        "ring_clock_hz": ring_clock_hz,
        "stopper": stopper,
        "photon_count": photon_count,
        "phase_offset": phase_offset,
    }
    return json.dumps(header) + "\n" + train.to01() + "\n"


def parse_spike_train(text: str) -> tuple[SpikeTrain, dict]:
    lines = text.splitlines()
    if len(lines) < 2:
        raise ValueError("spike-train text needs a header line and a bit line")
    header = json.loads(lines[0])
    if header.get("format") != _FORMAT:
        raise ValueError(f"not a spike-train header: {lines[0]!r}")
    if header.get("version") != _VERSION:
        raise ValueError(f"unsupported spike-train version {header.get('version')}")
    train = SpikeTrain.from01(lines[1])
    if len(train) != header["n_stages"]:
        raise ValueError(
            f"bit string length {len(train)} != header n_stages {header['n_stages']}"
        )
    return train, header
