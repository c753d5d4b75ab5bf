"""Reference spike encoder: histogram photon phases over the laser period,
then binarize. This is the ground-truth semantics the flip-flop ring realizes
in hardware, kept deliberately independent of the ring model so the two can
be checked against each other bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spike_train import SpikeTrain

__all__ = ["PhaseHistogram", "histogram", "binarize"]


@dataclass(frozen=True)
class PhaseHistogram:
    counts: tuple[int, ...]
    bin_width: float

    @property
    def n_bins(self) -> int:
        return len(self.counts)


def histogram(phases, n_bins: int, bin_width: float) -> PhaseHistogram:
    """Bin phases into n_bins contiguous bins of bin_width starting at 0.

    counts[k] = |{p : k*bin_width <= p < (k+1)*bin_width}|. Out-of-range
    phases are an error, not clipped: the caller owns the fold into [0, T).
    Binning uses searchsorted on exact bin edges so a phase exactly on an
    edge always lands in the bin it opens.
    """
    p = np.asarray(phases, dtype=float)
    edges = np.arange(n_bins + 1) * bin_width
    if p.size and (p.min() < 0.0 or p.max() >= edges[-1]):
        bad = p[(p < 0.0) | (p >= edges[-1])][0]
        raise ValueError(f"phase {bad} outside [0, {edges[-1]})")
    idx = np.searchsorted(edges, p, side="right") - 1
    counts = np.bincount(idx, minlength=n_bins)
    return PhaseHistogram(tuple(int(c) for c in counts), bin_width)


def binarize(h: PhaseHistogram) -> SpikeTrain:
    """One bit per bin: 1 iff the bin saw at least one photon."""
    return SpikeTrain((np.asarray(h.counts) > 0).astype(np.uint8))
