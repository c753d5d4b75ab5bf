"""Cycle-level model of the digital encoder core: gated ring clock, N-stage
D-flip-flop ring with OR injection, photon counter, saturation stopper, and
serial readout.

Conventions (fixed here, relied on by the reference-encoder comparison):

* Stage 0 is the DFF fed by the OR gate; stage i feeds stage i+1; stage N-1
  feeds back into the OR gate.
* Within a laser period of length T, the gated clock ticks at offsets
  k*T_clk for k = 1..n_ticks, where n_ticks = min(N, floor(T*f_clk)). When
  T*f_clk is an exact integer the last tick coincides with the period
  boundary and belongs to the period it closes, so an exact-ratio clock has
  zero suppressed time. Tick counting is done in exact rational arithmetic;
  no float comparisons decide cycle behavior.
* A detection at time t injects on the first tick strictly after t. If that
  tick does not exist in the detection's own period (the clock is gated off,
  or the period is deficient), the pulse is lost: the SPAD pulse is shorter
  than the gap to the next enabled edge.
* Serial readout taps the OR-gate output while the ring keeps shifting, so
  the stream emits stage N-1 first: readout[j] = stage (N-1-j). Rotating the
  readout by ticks_elapsed mod N (see phase_offset) puts it in
  laser-phase-bin order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Iterator

import numpy as np

from .photon_sim import DetectionEvent, LaserConfig
from .spike_train import SpikeTrain

__all__ = [
    "EncoderConfig",
    "RingState",
    "TickSchedule",
    "gated_clock",
    "step",
    "encode",
    "encode_trace",
    "readout",
    "phase_offset",
    "ideal_clock_hz",
]

STOPPER_CHOICES = (128, 256, None)


def ideal_clock_hz(n_stages: int, period_ns: float) -> float:
    """Ring clock that delivers exactly n_stages ticks per laser period."""
    return n_stages * 1e9 / period_ns


@dataclass(frozen=True)
class EncoderConfig:
    """Ring length, clock and laser timing, stopper threshold, counter width."""

    laser: LaserConfig
    n_stages: int = 128
    ring_clock_hz: float | None = None  # default: exact n_stages ticks/period
    stopper_threshold: int | None = None  # 128, 256, or None (disabled)
    counter_bits: int = 12

    def __post_init__(self):
        if self.n_stages < 2:
            raise ValueError(f"n_stages must be >= 2, got {self.n_stages}")
        if self.ring_clock_hz is None:
            object.__setattr__(
                self, "ring_clock_hz", ideal_clock_hz(self.n_stages, self.laser.period)
            )
        if self.ring_clock_hz <= 0:
            raise ValueError(f"ring_clock_hz must be > 0, got {self.ring_clock_hz}")
        if self.stopper_threshold not in STOPPER_CHOICES:
            raise ValueError(
                f"stopper_threshold must be one of {STOPPER_CHOICES}, "
                f"got {self.stopper_threshold}"
            )
        if self.counter_bits < 1:
            raise ValueError("counter_bits must be >= 1")

    @property
    def ticks_per_period(self) -> int:
        """Gated tick count per laser period (exact rational arithmetic)."""
        avail = Fraction(self.laser.period) * Fraction(self.ring_clock_hz) / 10**9
        return min(self.n_stages, math.floor(avail))

    @property
    def deficient(self) -> bool:
        """True when the ring clock cannot deliver n_stages ticks per period."""
        return self.ticks_per_period < self.n_stages

    @property
    def suppressed_ns_per_period(self) -> float:
        """Gate-off time at the end of each period (0 unless the gate engages)."""
        if self.deficient:
            return 0.0
        return max(0.0, self.laser.period - self.n_stages * 1e9 / self.ring_clock_hz)


@dataclass(frozen=True)
class RingState:
    """Value snapshot of the ring: stage bits (LSB = stage 0) and bookkeeping."""

    n_stages: int
    bits: int = 0
    ticks_elapsed: int = 0
    photon_count: int = 0
    injection_enabled: bool = True

    def __post_init__(self):
        if self.bits < 0 or self.bits >> self.n_stages:
            raise ValueError("bits outside the n_stages-wide ring")

    def bit_array(self) -> np.ndarray:
        """Stage bits as uint8, index = stage number."""
        return np.array(
            [(self.bits >> i) & 1 for i in range(self.n_stages)], dtype=np.uint8
        )

    @property
    def set_bit_count(self) -> int:
        return self.bits.bit_count()


@dataclass(frozen=True)
class TickSchedule:
    """Materialized gated-clock schedule over an exposure."""

    tick_times: np.ndarray  # absolute ns, sorted
    per_period_counts: tuple[int, ...]
    deficient: tuple[bool, ...]
    suppressed_ns: tuple[float, ...]


def gated_clock(cfg: EncoderConfig) -> TickSchedule:
    """Tick times over the full exposure under the 128-pulse gating rule.

    Within each period, ticks run at the ring-clock period from the period
    boundary; after n_stages ticks the clock is suppressed until the next
    boundary. A period that cannot fit n_stages ticks is marked deficient.
    """
    n_ticks = cfg.ticks_per_period
    t_clk = 1e9 / cfg.ring_clock_hz
    base = np.arange(cfg.laser.n_periods) * cfg.laser.period
    offsets = np.arange(1, n_ticks + 1) * t_clk
    times = (base[:, None] + offsets[None, :]).ravel()
    n_p = cfg.laser.n_periods
    return TickSchedule(
        tick_times=times,
        per_period_counts=(n_ticks,) * n_p,
        deficient=(cfg.deficient,) * n_p,
        suppressed_ns=(cfg.suppressed_ns_per_period,) * n_p,
    )


def step(state: RingState, inject: bool) -> RingState:
    """One clock edge: circular shift; stage 0 receives (stage N-1) OR inject.

    Injection is masked when the stopper has latched injection_enabled off.
    """
    n = state.n_stages
    mask = (1 << n) - 1
    bits = ((state.bits << 1) | (state.bits >> (n - 1))) & mask
    if inject and state.injection_enabled:
        bits |= 1
    return replace(state, bits=bits, ticks_elapsed=state.ticks_elapsed + 1)


def _rotate_bits(bits: int, steps: int, n: int) -> int:
    r = steps % n
    if r == 0:
        return bits
    mask = (1 << n) - 1
    return ((bits << r) | (bits >> (n - r))) & mask


def _plan_injections(
    detections: list[DetectionEvent], cfg: EncoderConfig
) -> tuple[list[int], int, bool]:
    """Map detections to global tick ordinals and fold the stopper rule.

    Returns (accepted_ticks, photon_count, injection_enabled): one entry in
    accepted_ticks per accepted detection (non-decreasing; duplicates mean
    same-tick OR merges). Ticks are 1-based ordinals into the exposure's
    gated schedule. photon_count wraps modulo 2^counter_bits.
    """
    period = Fraction(cfg.laser.period)
    ticks_per_ns = Fraction(cfg.ring_clock_hz) / 10**9
    n_ticks = cfg.ticks_per_period
    counter_mask = (1 << cfg.counter_bits) - 1

    accepted: list[int] = []
    count = 0
    enabled = True
    prev_t = -math.inf
    for det in detections:
        if det.t_abs < prev_t:
            raise ValueError("detections must be sorted by t_abs")
        prev_t = det.t_abs
        t = Fraction(det.t_abs)
        p = t // period
        if t < 0 or p >= cfg.laser.n_periods:
            raise ValueError(
                f"detection at {det.t_abs} ns outside exposure "
                f"[0, {cfg.laser.exposure}) ns"
            )
        k = math.floor((t - p * period) * ticks_per_ns) + 1
        if k > n_ticks:
            continue  # pulse falls in the gated-off tail: lost
        if not enabled:
            continue
        accepted.append(int(p) * n_ticks + k)
        count = (count + 1) & counter_mask
        if cfg.stopper_threshold is not None and count > cfg.stopper_threshold:
            enabled = False
    return accepted, count, enabled


def encode(detections: list[DetectionEvent], cfg: EncoderConfig) -> RingState:
    """Run the gated schedule over the exposure and fold detections in.

    Equivalent to stepping every tick (see encode_trace) but skips
    injection-free stretches with exact modular rotations.
    """
    accepted, count, enabled = _plan_injections(detections, cfg)
    total_ticks = cfg.laser.n_periods * cfg.ticks_per_period

    bits = 0
    done = 0
    for m in accepted:
        if m > done:
            bits = _rotate_bits(bits, m - done - 1, cfg.n_stages)
            bits = _rotate_bits(bits, 1, cfg.n_stages) | 1
            done = m
        # m == done: same tick as the previous injection, already ORed in
    bits = _rotate_bits(bits, total_ticks - done, cfg.n_stages)
    return RingState(
        n_stages=cfg.n_stages,
        bits=bits,
        ticks_elapsed=total_ticks,
        photon_count=count,
        injection_enabled=enabled,
    )


def encode_trace(
    detections: list[DetectionEvent], cfg: EncoderConfig
) -> Iterator[tuple[int, float, RingState]]:
    """Tick-by-tick version of encode: yields (tick ordinal, time ns, state).

    The final yielded state equals encode()'s result; use this for demos and
    cross-checking the rotation fast path.
    """
    accepted, _, _ = _plan_injections(detections, cfg)
    n_ticks = cfg.ticks_per_period
    t_clk = 1e9 / cfg.ring_clock_hz
    total_ticks = cfg.laser.n_periods * n_ticks
    threshold = cfg.stopper_threshold
    counter_mask = (1 << cfg.counter_bits) - 1

    state = RingState(n_stages=cfg.n_stages)
    idx = 0
    for m in range(1, total_ticks + 1):
        n_here = 0
        while idx < len(accepted) and accepted[idx] == m:
            n_here += 1
            idx += 1
        state = step(state, inject=n_here > 0)
        if n_here:
            count = state.photon_count
            enabled = state.injection_enabled
            for _ in range(n_here):
                count = (count + 1) & counter_mask
                if threshold is not None and count > threshold:
                    enabled = False
            state = replace(state, photon_count=count, injection_enabled=enabled)
        p, k = divmod(m - 1, n_ticks)
        t = p * cfg.laser.period + (k + 1) * t_clk
        yield m, t, state


def readout(state: RingState, readout_clock_hz: float) -> SpikeTrain:
    """Serial readout: stream the ring through the OR-gate tap.

    Emits stage N-1 first (readout[j] = stage N-1-j), lossless, annotated
    with the readout duration n_stages / readout_clock_hz.
    """
    if readout_clock_hz <= 0:
        raise ValueError("readout_clock_hz must be > 0")
    n = state.n_stages
    bits = np.array(
        [(state.bits >> (n - 1 - j)) & 1 for j in range(n)], dtype=np.uint8
    )
    return SpikeTrain(bits, readout_duration_ns=n * 1e9 / readout_clock_hz)


def phase_offset(state: RingState, cfg: EncoderConfig) -> int:
    """Rotation that maps the serial readout onto laser-phase-bin order.

    After a full exposure the offset is ticks_elapsed mod n_stages; apply it
    with spike_train.rotate.
    """
    return state.ticks_elapsed % cfg.n_stages
