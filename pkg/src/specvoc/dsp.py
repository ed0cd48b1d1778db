"""Deterministic signal transforms: FFT, STFT/ISTFT, mel analysis, phase.

All functions are pure and operate on plain numpy arrays (mono signals as
1-D float arrays, spectrograms as [frames, bins] complex arrays). Nothing
here touches the autograd engine; the differentiable mirrors of these
transforms live in ``specvoc.autograd.spectral``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Floor applied under the log in mel spectrograms; keeps silence finite.
LOG_FLOOR = 1e-5

# Overlap-add envelope values below this are treated as zero coverage.
ENVELOPE_GUARD = 1e-11


# -----------------------------
# Windows
# -----------------------------
def hann_window(n: int) -> np.ndarray:
    """Periodic Hann window: w[i] = 0.5*(1 - cos(2*pi*i/n))."""
    if n < 2:
        raise ValueError(f"window length must be >= 2, got {n}")
    i = np.arange(n, dtype=np.float64)
    return 0.5 * (1.0 - np.cos(2.0 * np.pi * i / n))


# -----------------------------
# DFT (radix-2 + Bluestein, with a naive oracle)
# -----------------------------
_TWIDDLE_CACHE: dict = {}


def naive_dft(x: np.ndarray) -> np.ndarray:
    """O(N^2) DFT by direct summation. Reference oracle; do not use in hot paths."""
    x = np.asarray(x, dtype=np.complex128)
    n = x.shape[-1]
    k = np.arange(n)
    basis = np.exp(-2j * np.pi * np.outer(k, k) / n)
    return x @ basis.T


def _twiddles(n: int, dtype) -> np.ndarray:
    key = (n, np.dtype(dtype).name)
    tw = _TWIDDLE_CACHE.get(key)
    if tw is None:
        tw = np.exp(-2j * np.pi * np.arange(n // 2) / n).astype(dtype)
        _TWIDDLE_CACHE[key] = tw
    return tw


def _fft_pow2(x: np.ndarray) -> np.ndarray:
    """Iterative radix-2 FFT over the last axis; len must be a power of two."""
    n = x.shape[-1]
    lead = x.shape[:-1]
    full = _twiddles(n, x.dtype)
    # Decimation in time: rows double each stage, columns halve.
    out = x.reshape(-1, 1, n)
    rows = 1
    while rows < n:
        half = out.shape[2] // 2
        even = out[:, :, :half]
        odd = out[:, :, half:]
        factor = full[:: n // (2 * rows)].reshape(1, rows, 1)
        t = factor * odd
        out = np.concatenate([even + t, even - t], axis=1)
        rows *= 2
    return out.reshape(lead + (n,))


def _fft_bluestein(x: np.ndarray) -> np.ndarray:
    """Chirp-z FFT for arbitrary length, built on the power-of-two path."""
    n = x.shape[-1]
    # n^2 mod 2n keeps the chirp phase argument small and exact.
    idx = (np.arange(n, dtype=np.int64) ** 2) % (2 * n)
    w = np.exp(-1j * np.pi * idx / n).astype(x.dtype)
    m = 1 << (2 * n - 1).bit_length()
    a = np.zeros(x.shape[:-1] + (m,), dtype=x.dtype)
    a[..., :n] = x * w
    b = np.zeros(m, dtype=x.dtype)
    b[:n] = np.conj(w)
    b[m - n + 1:] = np.conj(w[1:][::-1])
    conv = _ifft(_fft_pow2(a) * _fft_pow2(b))
    return (conv[..., :n] * w).astype(x.dtype)


def _ifft(x: np.ndarray) -> np.ndarray:
    return np.conj(_fft_pow2(np.conj(x))) / x.shape[-1]


def dft_forward(x: np.ndarray) -> np.ndarray:
    """DFT over the last axis: X[k] = sum_n x[n] exp(-2j*pi*k*n/N).

    Power-of-two lengths use the radix-2 path, other lengths the Bluestein
    chirp-z path; both are O(N log N). float32/complex64 input stays in
    single precision, everything else is computed in complex128.
    """
    x = np.asarray(x)
    if x.dtype in (np.float32, np.complex64):
        x = x.astype(np.complex64)
    else:
        x = x.astype(np.complex128)
    n = x.shape[-1]
    if n < 1:
        raise ValueError("dft_forward requires at least one sample")
    if n == 1:
        return x.copy()
    if n & (n - 1) == 0:
        return _fft_pow2(x)
    return _fft_bluestein(x)


def dft_inverse(x: np.ndarray) -> np.ndarray:
    """Inverse DFT with 1/N normalization: dft_inverse(dft_forward(v)) == v."""
    x = np.asarray(x)
    return np.conj(dft_forward(np.conj(x))) / x.shape[-1]


# -----------------------------
# STFT / ISTFT
# -----------------------------
@dataclass
class StftConfig:
    """Frame geometry for analysis/synthesis. Defaults: n_fft=1024, hop=256."""

    n_fft: int = 1024
    hop: int = 256
    window: np.ndarray = field(default_factory=lambda: hann_window(1024))
    center_padded: bool = True

    def __post_init__(self):
        if self.n_fft < 2 or self.n_fft % 2 != 0:
            raise ValueError(f"n_fft must be a positive even integer, got {self.n_fft}")
        if not 1 <= self.hop <= self.n_fft:
            raise ValueError(f"hop must be in [1, n_fft], got {self.hop}")
        self.window = np.asarray(self.window, dtype=np.float64)
        if self.window.shape != (self.n_fft,):
            raise ValueError(
                f"window length {self.window.shape} does not match n_fft {self.n_fft}"
            )

    @property
    def bins(self) -> int:
        return self.n_fft // 2 + 1

    def nola_satisfied(self) -> bool:
        """Check sum_m window^2[n - m*hop] > 0 for every n in one hop period."""
        env = np.zeros(self.n_fft + self.hop)
        for off in range(0, self.n_fft + self.hop, self.hop):
            hi = min(off + self.n_fft, len(env))
            env[off:hi] += self.window[: hi - off] ** 2
        # Interior coverage is periodic with the hop; inspect one full period.
        return bool(np.all(env[self.n_fft - self.hop: self.n_fft] > 0))


def frame_count(n_samples: int, cfg: StftConfig) -> int:
    padded = n_samples + (cfg.n_fft if cfg.center_padded else 0)
    return (padded - cfg.n_fft) // cfg.hop + 1


def stft(x: np.ndarray, cfg: StftConfig) -> np.ndarray:
    """Windowed DFT of overlapping frames -> complex [frames, n_fft/2+1]."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.size == 0:
        raise ValueError("stft expects a non-empty 1-D signal")
    if cfg.center_padded:
        x = np.pad(x, cfg.n_fft // 2, mode="reflect")
    if x.size < cfg.n_fft:
        raise ValueError(
            f"signal of {x.size} samples is shorter than one {cfg.n_fft}-sample frame"
        )
    frames = np.lib.stride_tricks.sliding_window_view(x, cfg.n_fft)[:: cfg.hop]
    spec = dft_forward(frames * cfg.window)
    return spec[:, : cfg.bins]


def istft(spec: np.ndarray, cfg: StftConfig, out_len: int) -> np.ndarray:
    """Inverse STFT: per-frame inverse DFT, synthesis window, overlap-add.

    The single-sideband input is conjugate-extended to the full spectrum,
    frames are synthesis-windowed and overlap-added, and the result is
    divided by the squared-window envelope (zeros where coverage is below
    ENVELOPE_GUARD). Center padding is trimmed before the out_len cut.
    """
    spec = np.asarray(spec)
    if spec.ndim != 2 or spec.shape[1] != cfg.bins:
        raise ValueError(
            f"spectrogram shape {spec.shape} does not match n_fft {cfg.n_fft}"
        )
    if not cfg.nola_satisfied():
        raise ValueError("window/hop configuration violates the NOLA condition")
    n_frames = spec.shape[0]
    padded_len = (n_frames - 1) * cfg.hop + cfg.n_fft
    start = cfg.n_fft // 2 if cfg.center_padded else 0
    max_len = padded_len - start
    if not 1 <= out_len <= max_len:
        raise ValueError(f"out_len {out_len} exceeds synthesizable length {max_len}")

    full = np.concatenate([spec, np.conj(spec[:, cfg.n_fft // 2 - 1: 0: -1])], axis=1)
    frames = dft_inverse(full).real * cfg.window

    acc = np.zeros(padded_len)
    env = np.zeros(padded_len)
    wsq = cfg.window**2
    for m in range(n_frames):
        off = m * cfg.hop
        acc[off: off + cfg.n_fft] += frames[m]
        env[off: off + cfg.n_fft] += wsq
    covered = env > ENVELOPE_GUARD
    out = np.zeros(padded_len)
    out[covered] = acc[covered] / env[covered]
    return out[start: start + out_len]


# -----------------------------
# Mel analysis
# -----------------------------
def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


@dataclass
class MelFilterbank:
    """Triangular filters on the HTK mel scale, normalized to unit peak."""

    weights: np.ndarray  # [n_mels, n_fft/2 + 1]
    center_freqs: np.ndarray  # [n_mels], Hz
    f_min: float
    f_max: float
    sample_rate: int

    @property
    def n_mels(self) -> int:
        return self.weights.shape[0]


def mel_filterbank(
    n_fft: int,
    sample_rate: int,
    n_mels: int = 100,
    f_min: float = 0.0,
    f_max: float | None = None,
) -> MelFilterbank:
    if f_max is None:
        f_max = sample_rate / 2.0
    if not 0.0 <= f_min < f_max <= sample_rate / 2.0:
        raise ValueError(
            f"need 0 <= f_min < f_max <= sr/2, got f_min={f_min}, f_max={f_max}"
        )
    edges = mel_to_hz(np.linspace(hz_to_mel(f_min), hz_to_mel(f_max), n_mels + 2))
    bin_freqs = np.arange(n_fft // 2 + 1) * (sample_rate / n_fft)
    weights = np.zeros((n_mels, n_fft // 2 + 1))
    for i in range(n_mels):
        lo, center, hi = edges[i], edges[i + 1], edges[i + 2]
        rising = (bin_freqs - lo) / (center - lo)
        falling = (hi - bin_freqs) / (hi - center)
        weights[i] = np.clip(np.minimum(rising, falling), 0.0, None)
    return MelFilterbank(weights, edges[1:-1], float(f_min), float(f_max), sample_rate)


def log_mel_spectrogram(x: np.ndarray, cfg: StftConfig, fb: MelFilterbank) -> np.ndarray:
    """log(max(fb . |STFT|, LOG_FLOOR)) -> [frames, n_mels]."""
    mag = np.abs(stft(x, cfg))
    return np.log(np.maximum(mag @ fb.weights.T, LOG_FLOOR))


# -----------------------------
# Amplitude and phase utilities
# -----------------------------
def apply_random_gain(
    x: np.ndarray,
    rng: np.random.Generator,
    min_dbfs: float = -6.0,
    max_dbfs: float = -1.0,
) -> np.ndarray:
    """Rescale so the peak sits at a uniform random level in [min, max] dBFS.

    Silent input is returned unchanged. Deterministic given the generator state.
    """
    x = np.asarray(x)
    peak = np.max(np.abs(x)) if x.size else 0.0
    if peak <= 0.0:
        return x.copy()
    gain_db = rng.uniform(min_dbfs, max_dbfs)
    return x * (10.0 ** (gain_db / 20.0) / peak)


def instantaneous_phase(x: np.ndarray) -> np.ndarray:
    """Phase of the analytic signal, in (-pi, pi].

    The analytic signal is built in the frequency domain: negative
    frequencies zeroed, positive ones doubled, DC and Nyquist kept.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.size < 2:
        raise ValueError("instantaneous_phase expects a 1-D signal of >= 2 samples")
    n = x.size
    spec = dft_forward(x)
    h = np.zeros(n)
    h[0] = 1.0
    if n % 2 == 0:
        h[1: n // 2] = 2.0
        h[n // 2] = 1.0
    else:
        h[1: (n + 1) // 2] = 2.0
    analytic = dft_inverse(spec * h)
    return np.arctan2(analytic.imag, analytic.real)
