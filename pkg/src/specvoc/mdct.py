"""Lapped cosine transform: MDCT/IMDCT with time-domain alias cancellation.

A frame of 2n samples maps to n coefficients (critically sampled at 50%
overlap). Scaling convention: the forward transform carries sqrt(1/n) and
the inverse 2/sqrt(n), so overlap-added synthesis reproduces unit-scale
input on interior samples for any Princen-Bradley window.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .dsp import dft_forward

_PB_TOL = 1e-12


def sine_window(n: int) -> np.ndarray:
    """Length-2n sine window; satisfies w[i]^2 + w[i+n]^2 = 1 exactly."""
    i = np.arange(2 * n, dtype=np.float64)
    return np.sin(np.pi * (i + 0.5) / (2 * n))


@dataclass
class MdctConfig:
    """n coefficients per frame, frame length 2n, Princen-Bradley window."""

    n: int = 256
    window: np.ndarray = field(default_factory=lambda: sine_window(256))

    def __post_init__(self):
        if self.n < 2 or self.n % 2 != 0:
            raise ValueError(f"n must be a positive even integer, got {self.n}")
        self.window = np.asarray(self.window, dtype=np.float64)
        if self.window.shape != (2 * self.n,):
            raise ValueError(
                f"window length {self.window.shape} does not match frame length {2 * self.n}"
            )
        pb = self.window[: self.n] ** 2 + self.window[self.n:] ** 2
        if np.max(np.abs(pb - 1.0)) > _PB_TOL:
            raise ValueError("window violates the Princen-Bradley condition")


def _cos_basis(n: int) -> np.ndarray:
    # basis[m, k] = cos[(pi/n) (m + 1/2 + n/2) (k + 1/2)], m < 2n, k < n
    m = np.arange(2 * n)[:, None]
    k = np.arange(n)[None, :]
    return np.cos(np.pi / n * (m + 0.5 + n / 2.0) * (k + 0.5))


_BASIS_CACHE: dict = {}


def _basis(n: int) -> np.ndarray:
    b = _BASIS_CACHE.get(n)
    if b is None:
        b = _cos_basis(n)
        _BASIS_CACHE[n] = b
    return b


def mdct_naive(frame: np.ndarray, cfg: MdctConfig) -> np.ndarray:
    """Direct cosine-sum MDCT of one frame. Reference oracle for mdct_fast."""
    frame = np.asarray(frame, dtype=np.float64)
    if frame.shape != (2 * cfg.n,):
        raise ValueError(f"frame length {frame.shape} != 2n = {2 * cfg.n}")
    return np.sqrt(1.0 / cfg.n) * ((frame * cfg.window) @ _basis(cfg.n))


class FastMdctResult(NamedTuple):
    coeffs: np.ndarray
    used_fft: bool  # False when n is not a power of two and the naive path ran


def mdct_fast(frame: np.ndarray, cfg: MdctConfig) -> FastMdctResult:
    """MDCT via pre-twiddle, FFT of the full frame, post-twiddle.

    With frame length N = 2n: multiply by exp(-j*2*pi*m/(2N)), take the
    N-point FFT, multiply bin k by exp(-j*(2*pi/N)*n0*(k+1/2)) with
    n0 = (N/2+1)/2, keep the real part of the first n bins, and scale by
    sqrt(2/N) = sqrt(1/n). Falls back to the naive path (flagged) when n
    is not a power of two.
    """
    frame = np.asarray(frame, dtype=np.float64)
    if frame.shape != (2 * cfg.n,):
        raise ValueError(f"frame length {frame.shape} != 2n = {2 * cfg.n}")
    n = cfg.n
    if n & (n - 1) != 0:
        return FastMdctResult(mdct_naive(frame, cfg), used_fft=False)
    big_n = 2 * n
    m = np.arange(big_n)
    k = np.arange(n)
    n0 = (big_n / 2 + 1) / 2
    pre = np.exp(-1j * np.pi * m / big_n)
    spec = dft_forward(frame * cfg.window * pre)[:n]
    post = np.exp(-2j * np.pi * n0 * (k + 0.5) / big_n)
    coeffs = np.sqrt(2.0 / big_n) * (spec * post).real
    return FastMdctResult(coeffs, used_fft=True)


def imdct(coeffs: np.ndarray, cfg: MdctConfig) -> np.ndarray:
    """Inverse MDCT of one frame: (2/sqrt(n)) cosine sum, synthesis-windowed.

    The output is the aliased lapped frame, not the original samples;
    aliasing cancels only after 50%-overlap addition of neighbors.
    """
    coeffs = np.asarray(coeffs, dtype=np.float64)
    if coeffs.shape != (cfg.n,):
        raise ValueError(f"coefficient length {coeffs.shape} != n = {cfg.n}")
    return (2.0 / np.sqrt(cfg.n)) * (_basis(cfg.n) @ coeffs) * cfg.window


def mdct_analyze(x: np.ndarray, cfg: MdctConfig) -> np.ndarray:
    """Split a signal into 50%-overlapped frames and transform each.

    Requires len(x) to be a multiple of n and at least 2n; yields
    len(x)/n - 1 coefficient rows (critically sampled up to one frame).
    """
    x = np.asarray(x, dtype=np.float64)
    n = cfg.n
    if x.ndim != 1 or x.size < 2 * n or x.size % n != 0:
        raise ValueError(f"signal length must be a multiple of n={n} and >= {2 * n}")
    windowed = np.lib.stride_tricks.sliding_window_view(x, 2 * n)[::n] * cfg.window
    return np.sqrt(1.0 / n) * (windowed @ _basis(n))


def tdac_overlap_add(frames: np.ndarray, cfg: MdctConfig) -> np.ndarray:
    """Overlap-add windowed IMDCT frames; inverse of mdct_analyze.

    Aliasing cancels on interior samples; the first and last half-frames
    keep uncancelled aliasing terms.
    """
    frames = np.asarray(frames, dtype=np.float64)
    if frames.ndim != 2 or frames.shape[1] != cfg.n:
        raise ValueError(f"expected [frames, {cfg.n}] coefficients, got {frames.shape}")
    if frames.shape[0] < 2:
        raise ValueError("TDAC reconstruction needs at least 2 frames")
    n = cfg.n
    lapped = (2.0 / np.sqrt(n)) * (frames @ _basis(n).T) * cfg.window
    out = np.zeros((frames.shape[0] + 1) * n)
    for t in range(frames.shape[0]):
        out[t * n: t * n + 2 * n] += lapped[t]
    return out


def symlog(x):
    """sign(x) * ln(|x| + 1); odd, monotone, compresses large magnitudes."""
    x = np.asarray(x, dtype=np.float64)
    return np.sign(x) * np.log1p(np.abs(x))


def symexp(x):
    """Inverse of symlog: sign(x) * (exp(|x|) - 1)."""
    x = np.asarray(x, dtype=np.float64)
    return np.sign(x) * np.expm1(np.abs(x))
