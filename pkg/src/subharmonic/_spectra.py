"""Centered Fourier spectra batched over initial phases.

A spectrum is a complex array of shape ``(n, 2w + 1)``; column ``j`` holds the
coefficient of ``exp(i * (j - w) * omega * t)`` for each of ``n`` phases.
Supports only ever grow under products, so nothing is truncated.
"""

from __future__ import annotations

import numpy as np


def width(a: np.ndarray) -> int:
    return (a.shape[-1] - 1) // 2


def zeros(n: int, w: int = 0) -> np.ndarray:
    return np.zeros((n, 2 * w + 1), dtype=complex)


def constant(values) -> np.ndarray:
    return np.asarray(values, dtype=complex).reshape(-1, 1)


def pad(a: np.ndarray, w: int) -> np.ndarray:
    extra = w - width(a)
    if extra <= 0:
        return a
    return np.pad(a, ((0, 0), (extra, extra)))


def add(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    w = max(width(a), width(b))
    return pad(a, w) + pad(b, w)


def conv(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Row-wise linear convolution (product of the two Fourier series)."""
    if a.shape[-1] < b.shape[-1]:
        a, b = b, a
    la, lb = a.shape[-1], b.shape[-1]
    out = np.zeros((max(a.shape[0], b.shape[0]), la + lb - 1), dtype=complex)
    for j in range(lb):
        out[:, j : j + la] += a * b[:, j : j + 1]
    return out


def axis(w: int) -> np.ndarray:
    return np.arange(-w, w + 1)


def zero_mode(a: np.ndarray) -> np.ndarray:
    return a[:, width(a)]


def trim(a: np.ndarray, atol: float = 0.0) -> np.ndarray:
    """Drop outer columns whose entries are all ``<= atol`` in modulus."""
    w = width(a)
    while w > 0 and np.all(np.abs(a[:, 0]) <= atol) and np.all(np.abs(a[:, -1]) <= atol):
        a = a[:, 1:-1]
        w -= 1
    return a


def evaluate(a: np.ndarray, omega: float, t) -> np.ndarray:
    """Sum the series at times ``t``; returns shape ``(n,) + shape(t)``."""
    t = np.asarray(t, dtype=float)
    phases = np.exp(1j * omega * np.multiply.outer(axis(width(a)), t))
    return np.tensordot(a, phases, axes=([1], [0]))


def derivative(a: np.ndarray, omega: float) -> np.ndarray:
    return a * (1j * omega * axis(width(a)))
