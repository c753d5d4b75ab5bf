"""Photon arrival generation and SPAD detector model.

Arrival times are laser-synchronous: a fluorescent source emits photons whose
phase within each repetition period follows a truncated exponential decay,
optionally mixed with uniform background. The detector applies a detection
probability and a non-paralyzable (greedy) dead time.

All times are in nanoseconds. Every function is pure and owns its RNG, seeded
explicitly, so identical inputs and seed give byte-identical output.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "LaserConfig",
    "DecaySource",
    "PhotonEvent",
    "SpadModel",
    "DetectionEvent",
    "gen_arrivals",
    "gen_periodic_arrivals",
    "detect",
    "truncated_exp_mean",
    "sample_truncated_exp",
]


@dataclass(frozen=True)
class LaserConfig:
    """Pulsed-laser timing: repetition period (ns) and exposure length in periods."""

    period: float
    n_periods: int = 1

    def __post_init__(self):
        if self.period <= 0:
            raise ValueError(f"laser period must be > 0, got {self.period}")
        if self.n_periods < 1:
            raise ValueError(f"n_periods must be >= 1, got {self.n_periods}")

    @property
    def exposure(self) -> float:
        return self.period * self.n_periods


@dataclass(frozen=True)
class DecaySource:
    """Fluorescent emitter: lifetime tau (ns), background fraction, intensity.

    background_fraction is the probability that any given photon is uniform
    background rather than decay signal (0.1 == "10% noise").
    """

    lifetime: float
    background_fraction: float = 0.0
    mean_photons_per_period: float = 1.0

    def __post_init__(self):
        if self.lifetime <= 0:
            raise ValueError(f"lifetime must be > 0, got {self.lifetime}")
        if not 0.0 <= self.background_fraction <= 1.0:
            raise ValueError(
                f"background_fraction must be in [0,1], got {self.background_fraction}"
            )
        if self.mean_photons_per_period < 0:
            raise ValueError("mean_photons_per_period must be >= 0")


@dataclass(frozen=True, slots=True)
class PhotonEvent:
    """A photon arriving at absolute time t_abs (ns) from exposure start."""

    t_abs: float
    origin: str  # "signal" or "background"


@dataclass(frozen=True)
class SpadModel:
    """Detector: photon detection probability and dead time (ns)."""

    pdp: float = 1.0
    dead_time: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.pdp <= 1.0:
            raise ValueError(f"pdp must be in [0,1], got {self.pdp}")
        if self.dead_time < 0:
            raise ValueError(f"dead_time must be >= 0, got {self.dead_time}")


@dataclass(frozen=True, slots=True)
class DetectionEvent:
    """An accepted detection: absolute time and phase = t_abs mod laser period."""

    t_abs: float
    phase: float


def truncated_exp_mean(tau: float, period: float) -> float:
    """Mean of an exponential with scale tau truncated (by resampling) to [0, period).

    E[X | X < T] = tau - T * exp(-T/tau) / (1 - exp(-T/tau)).
    """
    z = math.exp(-period / tau)
    return tau - period * z / (1.0 - z)


def sample_truncated_exp(
    rng: np.random.Generator, tau: float, period: float, n: int
) -> np.ndarray:
    """Draw n exponential(tau) samples, resampling any draw >= period.

    Resampling rounds are vectorized; the accepted set is distributed as the
    exponential conditioned on [0, period).
    """
    out = rng.exponential(tau, size=n)
    bad = out >= period
    while bad.any():
        out[bad] = rng.exponential(tau, size=int(bad.sum()))
        bad = out >= period
    return out


def gen_arrivals(laser: LaserConfig, src: DecaySource, seed: int) -> list[PhotonEvent]:
    """Generate photon arrivals over the full exposure.

    Per period the photon count is Poisson(mean_photons_per_period). Each
    photon is background with probability background_fraction (phase uniform
    in [0, period)), otherwise signal (phase from the truncated exponential).
    Output is sorted by t_abs and fully determined by the seed.
    """
    rng = np.random.default_rng(seed)
    counts = rng.poisson(src.mean_photons_per_period, size=laser.n_periods)
    total = int(counts.sum())
    if total == 0:
        return []

    is_bg = rng.random(total) < src.background_fraction
    phases = np.empty(total)
    n_bg = int(is_bg.sum())
    phases[is_bg] = rng.random(n_bg) * laser.period
    phases[~is_bg] = sample_truncated_exp(rng, src.lifetime, laser.period, total - n_bg)

    period_idx = np.repeat(np.arange(laser.n_periods), counts)
    t_abs = period_idx * laser.period + phases

    order = np.argsort(t_abs, kind="stable")
    origins = np.where(is_bg, "background", "signal")
    return [
        PhotonEvent(float(t_abs[i]), str(origins[i])) for i in order
    ]


def gen_periodic_arrivals(
    period_src: float, laser: LaserConfig, duration: float | None = None
) -> list[PhotonEvent]:
    """Deterministic arrivals at t = 0, period_src, 2*period_src, ... < duration.

    duration defaults to the laser exposure window.
    """
    if period_src <= 0:
        raise ValueError(f"source period must be > 0, got {period_src}")
    if duration is None:
        duration = laser.exposure
    n = math.ceil(duration / period_src)
    events = []
    for k in range(max(n, 0)):
        t = k * period_src
        if t >= duration:
            break
        events.append(PhotonEvent(t, "signal"))
    return events


def detect(
    events: list[PhotonEvent],
    spad: SpadModel,
    laser: LaserConfig,
    seed: int,
) -> list[DetectionEvent]:
    """Apply the detector model: pdp thinning, then greedy dead-time rejection.

    Thinning uses one uniform draw per photon, in arrival order, so raising
    pdp (same seed) can only add detections. The dead-time filter is
    non-paralyzable: a kept photon is accepted iff it is at least dead_time
    after the previously accepted one.
    """
    t = np.array([e.t_abs for e in events])
    if len(t) > 1 and np.any(np.diff(t) < 0):
        raise ValueError("events must be sorted by t_abs")

    rng = np.random.default_rng(seed)
    u = rng.random(len(t))
    kept = t[u < spad.pdp]

    out: list[DetectionEvent] = []
    t_last = -math.inf
    for ti in kept:
        ti = float(ti)
        if ti - t_last >= spad.dead_time:
            out.append(DetectionEvent(ti, ti % laser.period))
            t_last = ti
    return out
