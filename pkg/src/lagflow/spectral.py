"""Fourier pseudospectral plumbing on a periodic interval [0, length).

The antiderivative ``dinv`` acts on the zero-mean part of its input and
returns a zero-mean output; the removed mean is available to callers so it
can be surfaced in diagnostics instead of silently dropped.  The Nyquist
mode is zeroed for odd-order derivatives and for the antiderivative.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["Grid1D", "ddx", "dinv", "translate", "random_band_limited"]


@dataclass(frozen=True)
class Grid1D:
    n_pts: int
    length: float

    def __post_init__(self):
        if self.n_pts < 16 or self.n_pts & (self.n_pts - 1):
            raise ValueError("grid size must be a power of two, at least 16")
        if self.length <= 0.0:
            raise ValueError("grid length must be positive")

    @property
    def spacing(self) -> float:
        return self.length / self.n_pts

    def nodes(self) -> np.ndarray:
        return np.arange(self.n_pts) * self.spacing

    def wavenumbers(self) -> np.ndarray:
        return 2.0 * np.pi * np.fft.rfftfreq(self.n_pts, d=self.spacing)


def _columns(values):
    v = np.asarray(values, dtype=float)
    if v.ndim == 1:
        return v[:, None], True
    return v, False


def ddx(values, length: float, order: int = 1) -> np.ndarray:
    """Spectral derivative, columnwise for (N, p) arrays."""
    v, squeeze = _columns(values)
    n = v.shape[0]
    k = 2.0 * np.pi * np.fft.rfftfreq(n, d=length / n)
    mult = (1j * k) ** order
    if order % 2 == 1 and n % 2 == 0:
        mult[-1] = 0.0
    out = np.fft.irfft(np.fft.rfft(v, axis=0) * mult[:, None], n=n, axis=0)
    return out[:, 0] if squeeze else out


def dinv(values, length: float, return_mean: bool = False):
    """Zero-mean spectral antiderivative of the zero-mean part of the input.

    ddx(dinv(f)) reproduces f minus its mean (and minus any Nyquist
    content).  With ``return_mean=True`` also returns the per-column mean
    that was projected out.
    """
    v, squeeze = _columns(values)
    n = v.shape[0]
    spec = np.fft.rfft(v, axis=0)
    mean = spec[0].real / n
    k = 2.0 * np.pi * np.fft.rfftfreq(n, d=length / n)
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = np.where(k[:, None] > 0.0, spec / (1j * k[:, None]), 0.0)
    if n % 2 == 0:
        inv[-1] = 0.0
    out = np.fft.irfft(inv, n=n, axis=0)
    if squeeze:
        out = out[:, 0]
        mean = float(mean[0])
    if return_mean:
        return out, mean
    return out


def translate(values, length: float, shift: float) -> np.ndarray:
    """Spectral translation f(l) -> f(l + shift)."""
    v, squeeze = _columns(values)
    n = v.shape[0]
    k = 2.0 * np.pi * np.fft.rfftfreq(n, d=length / n)
    out = np.fft.irfft(np.fft.rfft(v, axis=0) * np.exp(1j * k * shift)[:, None], n=n, axis=0)
    return out[:, 0] if squeeze else out


def random_band_limited(rng, grid: Grid1D, p: int, max_mode: int = 8, scale: float = 1.0) -> np.ndarray:
    """Random smooth field: modes 1..max_mode, amplitudes ~ scale / mode^2,
    zero mean, shape (n_pts, p)."""
    max_mode = min(max_mode, grid.n_pts // 2 - 1)
    l = grid.nodes()
    out = np.zeros((grid.n_pts, p))
    for comp in range(p):
        for mode in range(1, max_mode + 1):
            amp = scale / mode**2
            a = rng.normal(0.0, amp)
            b = rng.normal(0.0, amp)
            phase = 2.0 * np.pi * mode * l / grid.length
            out[:, comp] += a * np.cos(phase) + b * np.sin(phase)
    return out
