"""Generator (isotropic backbone + spectral head + inverse transform) and
the period/resolution discriminator families.

The generator never upsamples inside the network: the backbone runs at
feature frame rate and the head emits per-frame spectral coefficients
that an inverse FFT (or lapped cosine synthesis) turns into waveform.
Heads:

    istft-unit-circle    magnitude exp(m), phase on the unit circle via
                         (cos p, sin p) -- implicit wrapping into (-pi, pi]
    istft-absolute-phase phase = pi * tanh(p), no periodicity
    imdct-symexp         coefficients symexp(h)
    imdct-sign           coefficients exp(m) * cos(p)
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autograd as ag
from . import dsp
from .autograd import Tensor
from .nn import (
    ConvNeXtBlock,
    ConvNeXtBlockConfig,
    Module,
    ResBlockConfig,
    ResBlockDilated,
    UpsamplerBaseline,
    UpsamplerBaselineConfig,
    _param,
    _zeros,
    _ones,
    count_macs,
)

HEAD_KINDS = ("istft-unit-circle", "istft-absolute-phase", "imdct-symexp", "imdct-sign")
BACKBONES = ("convnext", "resblock")


def wrap_phase(p):
    """Principal phase value in (-pi, pi]; the unit-circle head's implicit map."""
    return np.arctan2(np.sin(p), np.cos(p))


@dataclass
class GeneratorConfig:
    input_dim: int = 100
    backbone: str = "convnext"
    dim: int = 512
    intermediate_dim: int = 1536
    num_blocks: int = 8
    kernel_size: int = 7
    layer_scale_init: float = -1.0  # negative -> use 1/num_blocks
    resblock_dilations: tuple = (1, 3, 5)
    head: str = "istft-unit-circle"
    n_fft: int = 1024
    hop: int = 256
    mdct_n: int = 256
    sample_rate: int = 24000
    exp_clamp: float = 11.0

    def __post_init__(self):
        if self.head not in HEAD_KINDS:
            raise ValueError(f"invalid config: unknown head {self.head!r}")
        if self.backbone not in BACKBONES:
            raise ValueError(f"invalid config: unknown backbone {self.backbone!r}")
        if self.head.startswith("istft"):
            if self.n_fft <= 0 or self.hop <= 0:
                raise ValueError("invalid config: ISTFT heads need n_fft and hop")
        else:
            if self.mdct_n <= 0 or self.mdct_n % 2:
                raise ValueError("invalid config: IMDCT heads need even mdct_n > 0")
        if self.layer_scale_init < 0:
            self.layer_scale_init = 1.0 / self.num_blocks

    @property
    def head_channels(self) -> int:
        if self.head in ("istft-unit-circle", "istft-absolute-phase"):
            return self.n_fft + 2
        if self.head == "imdct-symexp":
            return self.mdct_n
        return 2 * self.mdct_n

    @property
    def frame_advance(self) -> int:
        """Output samples per feature frame: hop (ISTFT) or mdct_n (IMDCT)."""
        return self.hop if self.head.startswith("istft") else self.mdct_n


class Generator(Module):
    def __init__(self, cfg: GeneratorConfig, rng=None, dtype=np.float32):
        rng = rng or np.random.default_rng(0)
        self.cfg = cfg
        self.dtype = np.dtype(dtype)
        d = cfg.dim
        self.embed_w = _param(rng, (d, cfg.input_dim, 1), dtype)
        self.embed_b = _zeros((d,), dtype)
        self.embed_norm_g = _ones((d, 1), dtype)
        self.embed_norm_b = _zeros((d, 1), dtype)
        if cfg.backbone == "convnext":
            block_cfg = ConvNeXtBlockConfig(
                dim=d,
                intermediate_dim=cfg.intermediate_dim,
                kernel_size=cfg.kernel_size,
                layer_scale_init=cfg.layer_scale_init,
            )
            self.blocks = [ConvNeXtBlock(block_cfg, rng, dtype) for _ in range(cfg.num_blocks)]
        else:
            block_cfg = ResBlockConfig(
                channels=d, kernel_size=3, dilations=tuple(cfg.resblock_dilations)
            )
            self.blocks = [ResBlockDilated(block_cfg, rng, dtype) for _ in range(cfg.num_blocks)]
        self.final_norm_g = _ones((d, 1), dtype)
        self.final_norm_b = _zeros((d, 1), dtype)
        self.head_w = _param(rng, (cfg.head_channels, d, 1), dtype)
        self.head_b = _zeros((cfg.head_channels,), dtype)

        # synthesis constants (not trainable)
        if cfg.head.startswith("istft"):
            self._window = dsp.hann_window(cfg.n_fft).astype(dtype)
        else:
            from .mdct import sine_window, _basis

            n = cfg.mdct_n
            self._window = sine_window(n).astype(dtype)
            self._basis_t = Tensor((_basis(n).T * (2.0 / np.sqrt(n))).astype(dtype))
        self._env_cache: dict = {}

    # -- forward ----------------------------------------------------------
    def __call__(self, mel: Tensor) -> Tensor:
        """[.., n_mels, T] -> waveform [.., T * frame_advance]."""
        if mel.shape[-2] != self.cfg.input_dim:
            raise ValueError(
                f"invalid config: features have {mel.shape[-2]} bands, "
                f"generator expects {self.cfg.input_dim}"
            )
        h = ag.conv1d(mel, self.embed_w, self.embed_b)
        h = ag.layer_norm(h, self.embed_norm_g, self.embed_norm_b)
        for block in self.blocks:
            h = block(h)
        h = ag.layer_norm(h, self.final_norm_g, self.final_norm_b)
        h = ag.conv1d(h, self.head_w, self.head_b)
        if self.cfg.head.startswith("istft"):
            return self._synthesize_istft(self.head_coefficients(h))
        return self._synthesize_imdct(self.head_coefficients(h))

    # -- heads --------------------------------------------------------------
    def head_coefficients(self, h: Tensor):
        """Map projected activations to spectral coefficients.

        ISTFT heads return [.., 2, K, T] (re, im); IMDCT heads [.., n, T].
        """
        cfg = self.cfg
        if cfg.head in ("istft-unit-circle", "istft-absolute-phase"):
            k = cfg.n_fft // 2 + 1
            m = h[..., :k, :]
            p = h[..., k:, :]
            mag = ag.exp(ag.clamp(m, hi=cfg.exp_clamp))
            if cfg.head == "istft-absolute-phase":
                p = ag.tanh(p) * float(np.pi)
            re = mag * ag.cos(p)
            im = mag * ag.sin(p)
            new = re.shape[:-2] + (1,) + re.shape[-2:]
            return ag.concat([re.reshape(new), im.reshape(new)], axis=-3)
        if cfg.head == "imdct-symexp":
            sign = Tensor(np.sign(h.data))  # constant; |h| carries the gradient
            mag = ag.exp(ag.clamp(ag.abs_(h), hi=cfg.exp_clamp)) - 1.0
            return mag * sign
        m = h[..., : cfg.mdct_n, :]
        p = h[..., cfg.mdct_n:, :]
        return ag.exp(ag.clamp(m, hi=cfg.exp_clamp)) * ag.cos(p)

    # -- inverse transforms -------------------------------------------------
    def _inv_envelope(self, t: int) -> np.ndarray:
        env = self._env_cache.get(t)
        if env is None:
            cfg = self.cfg
            wsq = self._window.astype(np.float64) ** 2
            acc = np.zeros((t - 1) * cfg.hop + cfg.n_fft)
            for m in range(t):
                acc[m * cfg.hop: m * cfg.hop + cfg.n_fft] += wsq
            start = cfg.n_fft // 2
            seg = acc[start: start + t * cfg.hop]
            env = np.where(seg > dsp.ENVELOPE_GUARD, 1.0 / seg, 0.0).astype(self.dtype)
            self._env_cache[t] = env
        return env

    def _synthesize_istft(self, spec: Tensor) -> Tensor:
        # spec [.., 2, K, T] -> frames [.., T, 2, K] -> waveform [.., T*hop]
        cfg = self.cfg
        t = spec.shape[-1]
        frames = ag.swapaxes(ag.swapaxes(spec, -1, -2), -2, -3)
        y = ag.irdft(frames) * self._window
        y = ag.overlap_add(y, cfg.hop)
        start = cfg.n_fft // 2
        y = y[..., start: start + t * cfg.hop]
        return y * self._inv_envelope(t)

    def _synthesize_imdct(self, coeffs: Tensor) -> Tensor:
        # coeffs [.., n, T] -> lapped frames [.., T, 2n] -> waveform [.., T*n]
        n = self.cfg.mdct_n
        t = coeffs.shape[-1]
        frames = (ag.swapaxes(coeffs, -1, -2) @ self._basis_t) * self._window
        y = ag.overlap_add(frames, n)
        return y[..., n // 2: n // 2 + t * n]

    # -- accounting -----------------------------------------------------------
    def mac_layers(self, t: int) -> list:
        cfg = self.cfg
        layers = [dict(kind="conv1d", c_in=cfg.input_dim, c_out=cfg.dim, k=1, t_out=t)]
        for block in self.blocks:
            layers.extend(block.mac_layers(t))
        layers.append(dict(kind="conv1d", c_in=cfg.dim, c_out=cfg.head_channels, k=1, t_out=t))
        return layers

    def macs_per_second(self) -> int:
        frames = self.cfg.sample_rate // self.cfg.frame_advance + 1
        return count_macs(self.mac_layers(frames))


class TimeDomainBaseline(Module):
    """Same embed + backbone, but a transposed-conv upsampler instead of the
    spectral head. Exists only for the MAC/speed comparison."""

    def __init__(self, cfg: GeneratorConfig, up_cfg: UpsamplerBaselineConfig = None,
                 rng=None, dtype=np.float32):
        rng = rng or np.random.default_rng(0)
        self.cfg = cfg
        self.up_cfg = up_cfg or UpsamplerBaselineConfig(in_channels=cfg.dim, hop=cfg.hop)
        if self.up_cfg.in_channels != cfg.dim:
            raise ValueError("invalid config: upsampler input width must match backbone dim")
        spectral = Generator(cfg, rng, dtype)
        self.embed_w = spectral.embed_w
        self.embed_b = spectral.embed_b
        self.embed_norm_g = spectral.embed_norm_g
        self.embed_norm_b = spectral.embed_norm_b
        self.blocks = spectral.blocks
        self.upsampler = UpsamplerBaseline(self.up_cfg, rng, dtype)

    def __call__(self, mel: Tensor) -> Tensor:
        h = ag.conv1d(mel, self.embed_w, self.embed_b)
        h = ag.layer_norm(h, self.embed_norm_g, self.embed_norm_b)
        for block in self.blocks:
            h = block(h)
        out = self.upsampler(h)  # [.., 1, T*hop]
        return out.reshape(out.shape[:-2] + (out.shape[-1],))

    def mac_layers(self, t: int) -> list:
        cfg = self.cfg
        layers = [dict(kind="conv1d", c_in=cfg.input_dim, c_out=cfg.dim, k=1, t_out=t)]
        for block in self.blocks:
            layers.extend(block.mac_layers(t))
        layers.extend(self.upsampler.mac_layers(t))
        return layers

    def macs_per_second(self) -> int:
        frames = self.cfg.sample_rate // self.cfg.hop + 1
        return count_macs(self.mac_layers(frames))


# ---------------------------------------------------------------------------
# Discriminators
# ---------------------------------------------------------------------------
@dataclass
class DiscriminatorConfig:
    """Periods are chosen pairwise coprime (preferred, not enforced)."""

    mpd_periods: tuple = (2, 3, 5, 7, 11)
    mpd_channels: tuple = (16, 32, 64, 128, 128)
    mrd_resolutions: tuple = ((512, 128, 512), (1024, 256, 1024), (2048, 512, 2048))
    mrd_channels: tuple = (8, 16, 32, 32)

    def __post_init__(self):
        if not self.mpd_periods or not self.mrd_resolutions:
            raise ValueError("need at least one sub-discriminator of each family")
        for n_fft, hop, win in self.mrd_resolutions:
            if win > n_fft or hop <= 0:
                raise ValueError(f"bad resolution triple {(n_fft, hop, win)}")


class PeriodDiscriminator(Module):
    """Reshapes audio [B, L] into a [L/p, p] map, then strided 2-D convs."""

    def __init__(self, period: int, channels, rng, dtype=np.float32):
        self.period = period
        self.ws = []
        self.bs = []
        self.strides = []
        c_in = 1
        for i, c_out in enumerate(channels):
            self.ws.append(_param(rng, (c_out, c_in, 5, 1), dtype))
            self.bs.append(_zeros((c_out,), dtype))
            self.strides.append((3, 1) if i + 1 < len(channels) else (1, 1))
            c_in = c_out
        self.post_w = _param(rng, (1, c_in, 3, 1), dtype)
        self.post_b = _zeros((1,), dtype)

    def __call__(self, x: Tensor):
        if x.ndim != 2:
            raise ValueError(f"expected [batch, samples], got {x.shape}")
        b, length = x.shape
        short = (-length) % self.period
        if short:
            x = ag.pad(x, ((0, 0), (0, short)))  # right-pad to a multiple of p
        h = x.reshape(b, 1, (length + short) // self.period, self.period)
        feats = []
        for w, bias, stride in zip(self.ws, self.bs, self.strides):
            h = ag.conv2d(h, w, bias, stride=stride, padding=(2, 0))
            h = ag.leaky_relu(h, 0.1)
            feats.append(h)
        score = ag.conv2d(h, self.post_w, self.post_b, padding=(1, 0))
        feats.append(score)
        return score, feats


class ResolutionDiscriminator(Module):
    """2-D convs over the linear-magnitude spectrogram at one resolution."""

    def __init__(self, resolution, channels, rng, dtype=np.float32):
        self.n_fft, self.hop, self.win = resolution
        window = dsp.hann_window(self.win)
        lead = (self.n_fft - self.win) // 2
        self.window = np.pad(window, (lead, self.n_fft - self.win - lead)).astype(dtype)
        self.ws = []
        self.bs = []
        c_in = 1
        for c_out in channels:
            self.ws.append(_param(rng, (c_out, c_in, 3, 5), dtype))
            self.bs.append(_zeros((c_out,), dtype))
            c_in = c_out
        self.post_w = _param(rng, (1, c_in, 3, 3), dtype)
        self.post_b = _zeros((1,), dtype)

    def __call__(self, x: Tensor):
        if x.ndim != 2:
            raise ValueError(f"expected [batch, samples], got {x.shape}")
        if x.shape[-1] < self.n_fft:
            raise ValueError(
                f"audio of {x.shape[-1]} samples is shorter than n_fft {self.n_fft}"
            )
        frames = ag.frame_signal(x, self.n_fft, self.hop) * self.window
        spec = ag.rdft(frames)  # [B, T, 2, K]
        power = (spec * spec).sum(axis=-2)
        mag = ag.sqrt(ag.clamp(power, lo=1e-12))  # linear magnitude, not log
        img = ag.swapaxes(mag, -1, -2)  # [B, K, T]
        h = img.reshape(img.shape[0], 1, img.shape[1], img.shape[2])
        feats = []
        for w, bias in zip(self.ws, self.bs):
            h = ag.conv2d(h, w, bias, stride=(2, 2), padding=(1, 2))
            h = ag.leaky_relu(h, 0.1)
            feats.append(h)
        score = ag.conv2d(h, self.post_w, self.post_b, padding=(1, 1))
        feats.append(score)
        return score, feats


class DiscriminatorSet(Module):
    """All sub-discriminators (periods then resolutions), one flat list."""

    def __init__(self, cfg: DiscriminatorConfig = None, rng=None, dtype=np.float32):
        rng = rng or np.random.default_rng(1)
        self.cfg = cfg or DiscriminatorConfig()
        self.mpd = [
            PeriodDiscriminator(p, self.cfg.mpd_channels, rng, dtype)
            for p in self.cfg.mpd_periods
        ]
        self.mrd = [
            ResolutionDiscriminator(r, self.cfg.mrd_channels, rng, dtype)
            for r in self.cfg.mrd_resolutions
        ]

    def __call__(self, x: Tensor):
        return [sub(x) for sub in self.mpd + self.mrd]
