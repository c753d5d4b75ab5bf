"""Differential tests: ring encoder vs the independent histogram reference.

With an ideal clock ratio and the stopper disabled, rotating the serial
readout by the phase offset must reproduce the binarized phase histogram
exactly, for any detection list. The acceptance suite runs the full-size
version; this module keeps a faster randomized sweep plus the exhaustive
small-ring enumeration.
"""

from itertools import product

import numpy as np

from transporter_sim import oracle
from transporter_sim.photon_sim import DetectionEvent, LaserConfig, sample_truncated_exp
from transporter_sim.ring_encoder import EncoderConfig, encode, phase_offset, readout
from transporter_sim.spike_train import rotate


def ring_bits_for_phases(phases, period, n_stages, stopper=None):
    laser = LaserConfig(period=period, n_periods=max(len(phases), 1))
    cfg = EncoderConfig(laser=laser, n_stages=n_stages, stopper_threshold=stopper)
    dets = [
        DetectionEvent(i * period + float(p), float(p)) for i, p in enumerate(phases)
    ]
    state = encode(dets, cfg)
    return rotate(readout(state, 200e6), phase_offset(state, cfg))


def oracle_bits_for_phases(phases, period, n_stages):
    return oracle.binarize(
        oracle.histogram(phases, n_stages, period / n_stages)
    )


def random_phases(rng, n, period):
    tau = float(rng.uniform(1.0, 40.0))
    bf = float(rng.random())
    n_bg = int((rng.random(n) < bf).sum())
    phases = np.concatenate(
        [rng.random(n_bg) * period, sample_truncated_exp(rng, tau, period, n - n_bg)]
    )
    rng.shuffle(phases)
    return phases


def test_randomized_equivalence():
    rng = np.random.default_rng(101)
    for _ in range(200):
        n_stages = int(rng.choice([8, 16, 128]))
        period = float(rng.choice([64.0, 100.0, 128.0]))
        n = int(rng.integers(0, 401))
        phases = random_phases(rng, n, period)
        assert ring_bits_for_phases(phases, period, n_stages) == oracle_bits_for_phases(
            phases, period, n_stages
        ), f"mismatch at n_stages={n_stages} period={period} n={n}"


def test_exhaustive_small_ring():
    # every injection pattern of up to 3 photons over an 8-stage ring
    period, n_stages = 128.0, 8
    bw = period / n_stages
    for k in range(4):
        for bins in product(range(n_stages), repeat=k):
            phases = np.array([(b + 0.5) * bw for b in bins])
            assert ring_bits_for_phases(
                phases, period, n_stages
            ) == oracle_bits_for_phases(phases, period, n_stages), f"bins={bins}"


def test_equivalence_includes_exact_bin_edges():
    period, n_stages = 128.0, 16
    phases = np.array([0.0, 8.0, 16.0, 24.0, 120.0, 127.999])
    assert ring_bits_for_phases(phases, period, n_stages) == oracle_bits_for_phases(
        phases, period, n_stages
    )
