"""Differentiable spectral primitives: real DFT pair, framing, overlap-add.

Single-sideband spectra travel as real tensors shaped [..., 2, K] with
axis -2 holding (real, imaginary) parts and K = n_fft/2 + 1 bins. The DFT
is linear, so each backward pass is one FFT of the output gradient.
"""

from __future__ import annotations

import numpy as np

from ..dsp import dft_forward
from .tensor import Tensor, _node


def _fft(x):
    return dft_forward(x)


def _ifft_scaled(x):
    # N * ifft(x), i.e. conj(fft(conj(x)))
    return np.conj(_fft(np.conj(x)))


def rdft(x: Tensor) -> Tensor:
    """Real-input DFT over the last axis -> [..., 2, n/2+1] (re, im) parts."""
    n = x.shape[-1]
    k = n // 2 + 1
    spec = _fft(x.data)[..., :k]
    out = np.stack([spec.real, spec.imag], axis=-2)

    def backward(g):
        gc = (g[..., 0, :] + 1j * g[..., 1, :]).astype(spec.dtype)
        gpad = np.zeros(x.shape, dtype=spec.dtype)
        gpad[..., :k] = gc
        x._accumulate(_ifft_scaled(gpad).real.astype(x.dtype))

    return _node(out.astype(x.dtype), (x,), backward)


def irdft(spec: Tensor) -> Tensor:
    """Inverse of rdft: [..., 2, K] -> real [..., 2*(K-1)].

    The spectrum is conjugate-extended to the full band; the imaginary
    parts of the DC and Nyquist bins do not influence the output (their
    gradients are exactly zero).
    """
    k = spec.shape[-1]
    n = 2 * (k - 1)
    cdtype = np.complex64 if spec.dtype == np.float32 else np.complex128
    half = (spec.data[..., 0, :] + 1j * spec.data[..., 1, :]).astype(cdtype)
    full = np.concatenate([half, np.conj(half[..., k - 2: 0: -1])], axis=-1)
    out = (_ifft_scaled(full) / n).real  # ifft(full) = conj(fft(conj(full)))/n

    def backward(g):
        gz = _fft(g.astype(cdtype)) / n  # conjugate-symmetric since g is real
        gre = gz[..., :k].real.copy()
        gim = gz[..., :k].imag.copy()
        gre[..., 1: k - 1] *= 2.0
        gim[..., 1: k - 1] *= 2.0
        gim[..., 0] = 0.0
        gim[..., k - 1] = 0.0
        spec._accumulate(np.stack([gre, gim], axis=-2).astype(spec.dtype))

    return _node(out.astype(spec.dtype), (spec,), backward)


def frame_signal(x: Tensor, n: int, hop: int) -> Tensor:
    """Gather overlapping windows: [..., L] -> [..., T, n]."""
    if x.shape[-1] < n:
        raise ValueError(f"signal of length {x.shape[-1]} shorter than frame {n}")
    frames = np.lib.stride_tricks.sliding_window_view(x.data, n, axis=-1)[..., ::hop, :]
    t = frames.shape[-2]

    def backward(g):
        buf = np.zeros(x.shape, dtype=x.dtype)
        for m in range(t):
            buf[..., m * hop: m * hop + n] += g[..., m, :]
        x._accumulate(buf)

    return _node(frames.copy(), (x,), backward)


def overlap_add(frames: Tensor, hop: int) -> Tensor:
    """Adjoint of frame_signal: [..., T, n] -> [..., (T-1)*hop + n]."""
    t, n = frames.shape[-2], frames.shape[-1]
    out_len = (t - 1) * hop + n
    out = np.zeros(frames.shape[:-2] + (out_len,), dtype=frames.dtype)
    for m in range(t):
        out[..., m * hop: m * hop + n] += frames.data[..., m, :]

    def backward(g):
        win = np.lib.stride_tricks.sliding_window_view(g, n, axis=-1)[..., ::hop, :]
        frames._accumulate(win[..., :t, :].copy())

    return _node(out, (frames,), backward)
