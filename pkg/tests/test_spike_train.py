"""Spike-train container and wire-format tests."""

import numpy as np
import pytest

from transporter_sim.spike_train import (
    SpikeTrain,
    format_spike_train,
    parse_spike_train,
    rotate,
)


def test_bitstring_round_trip():
    t = SpikeTrain.from01("10110001")
    assert t.to01() == "10110001"
    assert len(t) == 8


def test_rejects_bad_bits():
    with pytest.raises(ValueError):
        SpikeTrain.from01("10x1")
    with pytest.raises(ValueError):
        SpikeTrain(np.array([0, 2, 1], dtype=np.uint8))


def test_rotate_right_by_offset():
    t = SpikeTrain.from01("10000000")
    assert rotate(t, 3).to01() == "00010000"
    assert rotate(t, 8) == t
    assert rotate(t, 11).to01() == "00010000"


def test_wire_format_round_trip():
    t = SpikeTrain.from01("0101")
    text = format_spike_train(
        t,
        laser_period_ns=128.0,
        ring_clock_hz=1e9,
        stopper="off",
        photon_count=2,
        phase_offset=0,
    )
    parsed, header = parse_spike_train(text)
    assert parsed == t
    assert header["n_stages"] == 4
    assert header["laser_period_ns"] == 128.0
    assert header["stopper"] == "off"


def test_wire_format_length_mismatch():
    text = '{"format": "spike-train", "version": 1, "n_stages": 5}\n0101\n'
    with pytest.raises(ValueError):
        parse_spike_train(text)
