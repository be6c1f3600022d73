"""Broad-beam reflection design for dual-polarized reflective surfaces.

Complementary-pair constructions give exactly flat power-domain array
factors over a line-of-sight backhaul; a stochastic coordinate-refinement
optimizer produces practically flat ("epsilon-complementary") patterns for
arbitrary backhaul channels.  An evaluation harness turns configurations
into per-user SNR/spectral-efficiency statistics.
"""

from . import channel, evaluate, golay, optimizer, surface

__all__ = ["golay", "surface", "channel", "optimizer", "evaluate"]
__version__ = "0.1.0"
