"""Radix-2 decimation-in-time FFT, vectorized over leading axes.

Windows are zero-padded to the next power of two before transforming, so
the O(N log N) butterfly structure always applies. The matching naive
O(N^2) summation lives in the test suite as an independent oracle.
"""
from __future__ import annotations

import numpy as np

from .errors import ShapeError


def next_pow2(n: int) -> int:
    if n < 1:
        raise ShapeError("length must be >= 1")
    return 1 << (n - 1).bit_length()


def _bit_reverse_indices(n: int) -> np.ndarray:
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.intp)
    for b in range(bits):
        rev = (rev << 1) | ((idx >> b) & 1)
    return rev


def fft_radix2(x: np.ndarray) -> np.ndarray:
    """Complex DFT of the last axis; its length must be a power of two."""
    x = np.asarray(x, dtype=np.complex128)
    n = x.shape[-1]
    if n < 1 or (n & (n - 1)) != 0:
        raise ShapeError(f"radix-2 FFT needs a power-of-two length, got {n}")
    y = x[..., _bit_reverse_indices(n)]
    size = 2
    while size <= n:
        half = size // 2
        twiddle = np.exp(-2j * np.pi * np.arange(half) / size)
        shaped = y.reshape(y.shape[:-1] + (n // size, size))
        even = shaped[..., :half]
        odd = shaped[..., half:] * twiddle
        y = np.concatenate((even + odd, even - odd), axis=-1).reshape(x.shape)
        size *= 2
    return y


def padded_fft(x: np.ndarray) -> np.ndarray:
    """FFT of the last axis after zero-padding it to the next power of two."""
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[-1]
    m = next_pow2(n)
    if m == n:
        return fft_radix2(x)
    padded = np.zeros(x.shape[:-1] + (m,), dtype=np.float64)
    padded[..., :n] = x
    return fft_radix2(padded)
