"""Desk-scale simulator of a SPAD imaging pipeline with a flip-flop-ring
spike encoder and a LIF network for fluorescence-lifetime estimation."""

__version__ = "0.1.0"
