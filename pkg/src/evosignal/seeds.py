"""Deterministic seed derivation.

All randomness flows from one master seed through SeedSequence so
derived streams are reproducible across runs, platforms, and any
parallel evaluation schedule.
"""
from __future__ import annotations

import numpy as np


def derive_seed(*parts: int) -> int:
    """Mix integer parts into a 64-bit seed, stable across processes."""
    seq = np.random.SeedSequence([int(p) & 0xFFFFFFFFFFFFFFFF for p in parts])
    return int(seq.generate_state(1, np.uint64)[0])


def derive_rng(*parts: int) -> np.random.Generator:
    return np.random.default_rng(derive_seed(*parts))
