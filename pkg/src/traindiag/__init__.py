"""Compound-fault diagnosis for train transmission systems.

Frequency-domain feature representation (hand-rolled FFT), per-speed
normalization, from-scratch 1-D CNN binary classifiers for each of the
17 fault codes, compound-label assembly, and the Z-metric evaluation
harness, exercised on a synthetic 21-channel vibration dataset.
"""

__version__ = "0.1.0"
