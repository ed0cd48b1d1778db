"""Training objectives: hinge GAN losses, mel reconstruction, feature matching.

Score maps are reduced per sub-discriminator by elementwise mean before the
hinge (documented choice; the formulas leave the reduction open). Losses
accept autograd Tensors or plain arrays; arrays become constants.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autograd as ag
from . import dsp
from .autograd import Tensor


@dataclass
class LossWeights:
    lambda_mel: float = 45.0
    lambda_fm: float = 2.0
    lambda_adv: float = 1.0

    def __post_init__(self):
        if min(self.lambda_mel, self.lambda_fm, self.lambda_adv) < 0:
            raise ValueError("loss weights must be non-negative")
        if self.lambda_mel == self.lambda_fm == self.lambda_adv == 0:
            raise ValueError("at least one loss weight must be positive")


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float64))


def hinge_generator_loss(fake_scores) -> Tensor:
    """(1/K) sum_k mean(max(0, 1 - D_k(fake)))."""
    fake_scores = [_as_tensor(s) for s in fake_scores]
    if not fake_scores:
        raise ValueError("need at least one sub-discriminator score")
    total = None
    for s in fake_scores:
        term = ag.relu(1.0 - s).mean()
        total = term if total is None else total + term
    return total / float(len(fake_scores))


def hinge_discriminator_loss(real_scores, fake_scores) -> Tensor:
    """(1/K) sum_k [mean(max(0, 1 - D_k(real))) + mean(max(0, 1 + D_k(fake)))]."""
    real_scores = [_as_tensor(s) for s in real_scores]
    fake_scores = [_as_tensor(s) for s in fake_scores]
    if len(real_scores) != len(fake_scores) or not real_scores:
        raise ValueError(
            f"sub-discriminator count mismatch: {len(real_scores)} real vs "
            f"{len(fake_scores)} fake"
        )
    total = None
    for r, f in zip(real_scores, fake_scores):
        term = ag.relu(1.0 - r).mean() + ag.relu(1.0 + f).mean()
        total = term if total is None else total + term
    return total / float(len(real_scores))


def feature_matching_loss(real_features, fake_features, reduction="mean") -> Tensor:
    """(1/(K*L)) sum_k sum_l |D_k^l(real) - D_k^l(fake)|, reduced per map.

    reduction="mean" takes the elementwise mean of each map difference so
    the loss is resolution-independent; "sum" keeps the plain L1 norm.
    """
    if len(real_features) != len(fake_features) or not real_features:
        raise ValueError("sub-discriminator count mismatch in feature matching")
    k = len(real_features)
    total = None
    layers = None
    for real_maps, fake_maps in zip(real_features, fake_features):
        if len(real_maps) != len(fake_maps):
            raise ValueError("layer count mismatch in feature matching")
        if layers is None:
            layers = len(real_maps)
        for r, f in zip(real_maps, fake_maps):
            r, f = _as_tensor(r), _as_tensor(f)
            if r.shape != f.shape:
                raise ValueError(f"feature map shape mismatch: {r.shape} vs {f.shape}")
            diff = ag.abs_(r - f)
            term = diff.mean() if reduction == "mean" else diff.sum()
            total = term if total is None else total + term
    return total / float(k * layers)


# -----------------------------
# Mel reconstruction loss
# -----------------------------
class MelSpectrogramGraph:
    """Differentiable mirror of dsp.log_mel_spectrogram (same constants)."""

    def __init__(self, cfg: dsp.StftConfig = None, fb: dsp.MelFilterbank = None,
                 sample_rate: int = 24000, dtype=np.float32):
        self.cfg = cfg or dsp.StftConfig()
        self.fb = fb or dsp.mel_filterbank(self.cfg.n_fft, sample_rate)
        self.window = self.cfg.window.astype(dtype)
        self.weights_t = self.fb.weights.T.astype(dtype)  # lifted to operand dtype
        self.dtype = np.dtype(dtype)

    def __call__(self, x: Tensor) -> Tensor:
        """[.., samples] -> [.., frames, n_mels] log-compressed mel magnitudes."""
        x = _as_tensor(x) if not isinstance(x, Tensor) else x
        cfg = self.cfg
        if cfg.center_padded:
            x = ag.reflect_pad_last(x, cfg.n_fft // 2)
        frames = ag.frame_signal(x, cfg.n_fft, cfg.hop) * self.window
        spec = ag.rdft(frames)
        power = (spec * spec).sum(axis=-2)
        mag = ag.sqrt(ag.clamp(power, lo=1e-24))
        mel = ag.matmul(mag, self.weights_t)
        return ag.log(ag.clamp(mel, lo=dsp.LOG_FLOOR))


def mel_loss(x, x_hat, mel_graph: MelSpectrogramGraph) -> Tensor:
    """L1 distance between log-mel spectrograms of two equal-length signals."""
    x, x_hat = _as_tensor(x), _as_tensor(x_hat)
    if x.shape[-1] != x_hat.shape[-1]:
        raise ValueError(f"length mismatch: {x.shape[-1]} vs {x_hat.shape[-1]}")
    return ag.abs_(mel_graph(x) - mel_graph(x_hat)).mean()


def composite_generator_objective(adv, fm, mel, weights: LossWeights) -> Tensor:
    """lambda_adv * hinge + lambda_fm * L_feat + lambda_mel * L_mel."""
    total = _as_tensor(adv) * weights.lambda_adv
    total = total + _as_tensor(fm) * weights.lambda_fm
    return total + _as_tensor(mel) * weights.lambda_mel
