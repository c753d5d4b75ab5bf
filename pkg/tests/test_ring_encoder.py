"""Cycle-level encoder tests: gating arithmetic, shift/OR semantics, stopper,
readout order, and the rotation fast path against literal tick stepping."""

import numpy as np
import pytest

from transporter_sim.photon_sim import DetectionEvent, LaserConfig
from transporter_sim.ring_encoder import (
    EncoderConfig,
    RingState,
    encode,
    encode_trace,
    gated_clock,
    ideal_clock_hz,
    phase_offset,
    readout,
    step,
)


def _cfg(period=100.0, n_periods=1, freq=1.28e9, n_stages=128, stopper=None):
    return EncoderConfig(
        laser=LaserConfig(period=period, n_periods=n_periods),
        n_stages=n_stages,
        ring_clock_hz=freq,
        stopper_threshold=stopper,
    )


# ------------------------------------------------------------- gated clock


def test_gated_clock_exact_ratio():
    cfg = _cfg(freq=1.28e9, n_periods=5)
    sched = gated_clock(cfg)
    assert sched.per_period_counts == (128,) * 5
    assert sched.deficient == (False,) * 5
    assert sched.suppressed_ns == (0.0,) * 5
    assert len(sched.tick_times) == 5 * 128
    assert np.all(np.diff(sched.tick_times) > 0)


def test_gated_clock_fast_corner_suppression():
    cfg = _cfg(freq=1.346e9)
    sched = gated_clock(cfg)
    assert sched.per_period_counts == (128,)
    expected_suppression = 100.0 - 128 * 1e9 / 1.346e9  # ~4.9 ns
    assert abs(sched.suppressed_ns[0] - expected_suppression) < 1e-9
    assert 4.8 < sched.suppressed_ns[0] < 5.0


def test_gated_clock_slow_corner_deficient():
    cfg = _cfg(freq=0.77e9)
    sched = gated_clock(cfg)
    assert sched.per_period_counts == (77,)
    assert sched.deficient == (True,)


def test_gated_clock_full_count_whenever_fast_enough():
    rng = np.random.default_rng(0)
    for _ in range(50):
        period = float(rng.uniform(50, 200))
        n_stages = int(rng.choice([8, 16, 128]))
        freq = float(rng.uniform(1.0, 3.0)) * n_stages / period * 1e9
        cfg = _cfg(period=period, freq=freq, n_stages=n_stages)
        assert gated_clock(cfg).per_period_counts == (n_stages,)


def test_ideal_clock_gives_zero_suppression():
    for n_stages, period in ((128, 128.0), (16, 100.0), (8, 64.0)):
        cfg = _cfg(period=period, freq=ideal_clock_hz(n_stages, period), n_stages=n_stages)
        assert cfg.ticks_per_period == n_stages
        assert cfg.suppressed_ns_per_period == 0.0


# ------------------------------------------------------------------- step


def test_step_injects_at_stage_zero():
    s = step(RingState(n_stages=8), inject=True)
    assert s.bits == 1
    assert s.ticks_elapsed == 1


def test_step_rotation_identity():
    s = RingState(n_stages=8, bits=0b1011_0010)
    t = s
    for _ in range(8):
        t = step(t, inject=False)
    assert t.bits == s.bits
    assert t.ticks_elapsed == 8


def test_step_or_merges_wrapping_spike_with_injection():
    s = RingState(n_stages=8, bits=1 << 7)
    t = step(s, inject=True)
    assert t.bits == 1  # circulating spike and injected spike merge
    assert t.bits.bit_count() == 1


def test_step_respects_injection_disable():
    s = RingState(n_stages=8, injection_enabled=False)
    t = step(s, inject=True)
    assert t.bits == 0


# ----------------------------------------------------------------- encode


def test_encode_empty():
    cfg = _cfg(period=128.0, freq=1e9, n_periods=4)
    state = encode([], cfg)
    assert state.bits == 0
    assert state.photon_count == 0
    assert state.ticks_elapsed == 4 * 128


def golden_detections(n_periods=16, source_period=130.0, laser_period=128.0):
    times = [k * source_period for k in range(200) if k * source_period < n_periods * laser_period]
    return [DetectionEvent(t, t % laser_period) for t in times]


def test_encode_golden_spacing():
    cfg = _cfg(period=128.0, freq=1e9, n_periods=16)
    state = encode(golden_detections(), cfg)
    train = readout(state, 200e6)
    idx = np.flatnonzero(train.bits)
    assert len(idx) == 16
    assert np.all(np.diff(idx) == 2)


def test_encode_zero_drift_folds_to_single_stage():
    cfg = _cfg(period=128.0, freq=1e9, n_periods=16)
    state = encode(golden_detections(source_period=128.0), cfg)
    assert state.bits.bit_count() == 1
    assert state.photon_count == 16


def test_encode_rejects_out_of_window():
    cfg = _cfg(period=128.0, freq=1e9, n_periods=2)
    with pytest.raises(ValueError):
        encode([DetectionEvent(256.0, 0.0)], cfg)
    with pytest.raises(ValueError):
        encode([DetectionEvent(-1.0, 127.0)], cfg)


def test_encode_rejects_unsorted():
    cfg = _cfg(period=128.0, freq=1e9, n_periods=2)
    dets = [DetectionEvent(5.0, 5.0), DetectionEvent(1.0, 1.0)]
    with pytest.raises(ValueError):
        encode(dets, cfg)


def test_encode_loses_pulses_during_suppression():
    # fast corner: last tick at 128/1.346 GHz = 95.1 ns, then the gate closes
    cfg = _cfg(period=100.0, freq=1.346e9, n_periods=1)
    lost = encode([DetectionEvent(97.0, 97.0)], cfg)
    assert lost.photon_count == 0 and lost.bits == 0
    kept = encode([DetectionEvent(94.0, 94.0)], cfg)
    assert kept.photon_count == 1 and kept.bits.bit_count() == 1


def test_encode_loses_pulses_in_deficient_tail():
    # 0.777 GHz on 100 ns: 77 ticks, last at 99.099 ns; later pulses are lost
    cfg = _cfg(period=100.0, freq=0.777e9, n_periods=1)
    assert cfg.ticks_per_period == 77
    lost = encode([DetectionEvent(99.5, 99.5)], cfg)
    assert lost.photon_count == 0
    kept = encode([DetectionEvent(99.0, 99.0)], cfg)
    assert kept.photon_count == 1


def test_encode_stopper_accepts_threshold_plus_one():
    period = 128.0
    n = 300
    rng = np.random.default_rng(5)
    phases = rng.random(n) * period
    dets = [DetectionEvent(i * period + float(p), float(p)) for i, p in enumerate(phases)]
    cfg = _cfg(period=period, freq=1e9, n_periods=n, stopper=256)
    state = encode(dets, cfg)
    assert state.photon_count == 257
    assert state.injection_enabled is False
    assert state.bits.bit_count() <= 257


def test_encode_stopper_disabled_counts_all():
    period = 128.0
    n = 300
    rng = np.random.default_rng(5)
    phases = rng.random(n) * period
    dets = [DetectionEvent(i * period + float(p), float(p)) for i, p in enumerate(phases)]
    state = encode(dets, _cfg(period=period, freq=1e9, n_periods=n))
    assert state.photon_count == 300
    assert state.injection_enabled is True


def test_counter_wraps_at_width():
    period = 128.0
    n = 5000  # > 2^12
    phases = np.linspace(0.25, 127.75, 64)
    dets = [
        DetectionEvent(i * period + float(phases[i % 64]), float(phases[i % 64]))
        for i in range(n)
    ]
    state = encode(dets, _cfg(period=period, freq=1e9, n_periods=n))
    assert state.photon_count == n % 4096


def test_encode_matches_tick_by_tick_trace():
    rng = np.random.default_rng(17)
    for _ in range(20):
        n_stages = int(rng.choice([8, 16, 32]))
        period = float(rng.choice([64.0, 100.0, 128.0]))
        n_periods = int(rng.integers(1, 12))
        freq = float(rng.choice([1.0, 0.777, 1.346])) * ideal_clock_hz(n_stages, period) / 1e9 * 1e9
        stopper = None
        n_det = int(rng.integers(0, 30))
        t = np.sort(rng.random(n_det) * period * n_periods)
        dets = [DetectionEvent(float(x), float(x % period)) for x in t]
        cfg = _cfg(period=period, n_periods=n_periods, freq=freq, n_stages=n_stages, stopper=stopper)
        fast = encode(dets, cfg)
        slow = None
        prev_bits = 0
        for _, _, slow in encode_trace(dets, cfg):
            now = slow.bits.bit_count()
            assert prev_bits <= now <= prev_bits + 1  # at most one new bit per tick
            prev_bits = now
        if slow is None:
            slow = RingState(n_stages=n_stages)
        assert fast == slow


def test_set_bits_bounded_by_injections():
    period = 128.0
    rng = np.random.default_rng(23)
    n = 50
    phases = rng.random(n) * period
    dets = [DetectionEvent(i * period + float(p), float(p)) for i, p in enumerate(phases)]
    state = encode(dets, _cfg(period=period, freq=1e9, n_periods=n))
    assert state.bits.bit_count() <= min(n, 128)


# ---------------------------------------------------------------- readout


def test_readout_lossless_multiset():
    state = RingState(n_stages=16, bits=0b1010_0110_0001_1000)
    train = readout(state, 200e6)
    assert int(train.bits.sum()) == state.bits.bit_count()
    assert len(train) == 16


def test_readout_duration():
    train = readout(RingState(n_stages=128), 200e6)
    assert train.readout_duration_ns == 640.0


def test_readout_serial_order_tap():
    # stream starts at stage N-1 (the OR-gate input side)
    state = RingState(n_stages=8, bits=0b1000_0001)  # stages 0 and 7
    train = readout(state, 1e6)
    assert train.to01() == "10000001"
    state = RingState(n_stages=8, bits=0b0000_0010)  # stage 1 only
    assert readout(state, 1e6).to01() == "00000010"  # emitted at index N-1-1


# ------------------------------------------------------------ phase offset


def test_phase_offset_full_rotations():
    cfg = _cfg(period=128.0, freq=1e9, n_periods=3)
    state = RingState(n_stages=128, ticks_elapsed=3 * 128)
    assert phase_offset(state, cfg) == 0


def test_phase_offset_partial():
    cfg = _cfg(period=128.0, freq=1e9, n_periods=3)
    state = RingState(n_stages=128, ticks_elapsed=5 * 128 + 5)
    assert phase_offset(state, cfg) == 5


def test_stopper_choices_validated():
    with pytest.raises(ValueError):
        _cfg(stopper=64)
    with pytest.raises(ValueError):
        EncoderConfig(laser=LaserConfig(period=100.0), n_stages=1)
