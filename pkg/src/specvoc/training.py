"""Desk-scale training loop: cropping, alternating GAN updates, AdamW,
cosine schedule, checkpointing, and the synthetic sinusoid dataset.

Determinism contract: given (seed, config, dataset) every run is
bit-identical, and resuming from any checkpoint continues the exact
uninterrupted trajectory. Randomness is drawn from per-step generators
seeded by (seed, stream, step), never from a long-lived stream, so a
resumed run rejoins the same sequence.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import autograd as ag
from . import dsp
from .autograd import Tensor
from .fileio import load_checkpoint, read_wav, save_checkpoint
from .losses import (
    LossWeights,
    MelSpectrogramGraph,
    composite_generator_objective,
    feature_matching_loss,
    hinge_discriminator_loss,
    hinge_generator_loss,
    mel_loss,
)
from .model import DiscriminatorConfig, DiscriminatorSet, Generator, GeneratorConfig

METRICS_HEADER = ["step", "lr", "loss_mel", "loss_gen", "loss_disc", "loss_fm"]


class NumericError(RuntimeError):
    """Raised when a loss or parameter goes non-finite; carries the dump path."""

    def __init__(self, message, dump_path=None):
        super().__init__(message)
        self.dump_path = dump_path


# -----------------------------
# Optimizer and schedule
# -----------------------------
def adamw_step(p, g, m, v, t, lr, betas=(0.9, 0.999), eps=1e-8, weight_decay=0.01):
    """One decoupled-weight-decay Adam update, in place on p/m/v.

    p <- p - lr * (m_hat / (sqrt(v_hat) + eps) + weight_decay * p)
    """
    if g.shape != p.shape or m.shape != p.shape or v.shape != p.shape:
        raise ValueError("parameter/gradient/moment shapes disagree")
    b1, b2 = betas
    m += (1.0 - b1) * (g - m)
    v += (1.0 - b2) * (g * g - v)
    m_hat = m / (1.0 - b1**t)
    v_hat = v / (1.0 - b2**t)
    p -= lr * (m_hat / (np.sqrt(v_hat) + eps) + weight_decay * p)


class AdamW:
    def __init__(self, params: dict, betas=(0.9, 0.999), eps=1e-8, weight_decay=0.01):
        self.params = params
        self.betas = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.step_count = 0
        self.m = {k: np.zeros_like(p.data) for k, p in params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in params.items()}

    def step(self, lr: float):
        self.step_count += 1
        for name, p in self.params.items():
            g = p.grad if p.grad is not None else np.zeros_like(p.data)
            adamw_step(
                p.data, g, self.m[name], self.v[name], self.step_count,
                lr, self.betas, self.eps, self.weight_decay,
            )

    def state_tensors(self, prefix: str) -> dict:
        out = {f"{prefix}.m.{k}": v for k, v in self.m.items()}
        out.update({f"{prefix}.v.{k}": v for k, v in self.v.items()})
        out[f"{prefix}.t"] = np.array(float(self.step_count), dtype=np.float32)
        return out

    def load_state_tensors(self, tensors: dict, prefix: str):
        self.step_count = int(tensors[f"{prefix}.t"])
        for k in self.m:
            self.m[k] = np.asarray(tensors[f"{prefix}.m.{k}"], dtype=self.m[k].dtype).reshape(self.m[k].shape)
            self.v[k] = np.asarray(tensors[f"{prefix}.v.{k}"], dtype=self.v[k].dtype).reshape(self.v[k].shape)


def cosine_lr(step: int, total_steps: int, lr_init: float, lr_min: float = 0.0) -> float:
    """lr_min + 0.5*(lr_init - lr_min)*(1 + cos(pi * step/total))."""
    if step < 0 or step > total_steps:
        warnings.warn(f"schedule step {step} outside [0, {total_steps}]; clamping")
        step = min(max(step, 0), total_steps)
    return lr_min + 0.5 * (lr_init - lr_min) * (1.0 + np.cos(np.pi * step / total_steps))


# -----------------------------
# Datasets and batching
# -----------------------------
@dataclass
class SyntheticDataset:
    """On-the-fly clips: 1-5 random sinusoids plus FIR-smoothed noise.

    Clip i is a pure function of (seed, i), so no corpus ships with the
    package and every run sees identical data.
    """

    n_clips: int = 64
    clip_len: int = 24000
    sample_rate: int = 24000
    seed: int = 0

    def __len__(self):
        return self.n_clips

    def clip(self, i: int) -> np.ndarray:
        rng = np.random.default_rng([self.seed, 7919, i])
        t = np.arange(self.clip_len) / self.sample_rate
        x = np.zeros(self.clip_len)
        for _ in range(rng.integers(1, 6)):
            freq = np.exp(rng.uniform(np.log(60.0), np.log(5000.0)))
            x += rng.uniform(0.2, 1.0) * np.sin(2 * np.pi * freq * t + rng.uniform(0, 2 * np.pi))
        kernel = dsp.hann_window(int(rng.integers(8, 65)))
        noise = np.convolve(rng.standard_normal(self.clip_len), kernel / kernel.sum(), mode="same")
        x += rng.uniform(0.02, 0.1) * noise / max(np.max(np.abs(noise)), 1e-9)
        return 0.9 * x / np.max(np.abs(x))


class WavDirectoryDataset:
    """Every .wav in a directory (sorted by name); rates must all match."""

    def __init__(self, directory):
        self.paths = sorted(Path(directory).glob("*.wav"))
        if not self.paths:
            raise ValueError(f"no .wav files in {directory}")
        self._cache: dict = {}
        self.sample_rate = read_wav(self.paths[0]).sample_rate

    def __len__(self):
        return len(self.paths)

    def clip(self, i: int) -> np.ndarray:
        if i not in self._cache:
            audio = read_wav(self.paths[i])
            if audio.sample_rate != self.sample_rate:
                raise ValueError(
                    f"{self.paths[i]}: sample rate {audio.sample_rate} != {self.sample_rate}"
                )
            self._cache[i] = audio.samples
        return self._cache[i]


def crop_batch(dataset, crop_len: int, batch_size: int, rng) -> np.ndarray:
    """Random crops with the random peak-gain augmentation -> [B, crop_len]."""
    if len(dataset) == 0:
        raise ValueError("dataset is empty")
    out = np.empty((batch_size, crop_len))
    for b in range(batch_size):
        clip = dataset.clip(int(rng.integers(0, len(dataset))))
        if clip.size < crop_len:
            warnings.warn(f"clip shorter than crop_len ({clip.size} < {crop_len}); zero-padding")
            clip = np.pad(clip, (0, crop_len - clip.size))
        off = int(rng.integers(0, clip.size - crop_len + 1))
        out[b] = dsp.apply_random_gain(clip[off: off + crop_len], rng)
    return out


# -----------------------------
# Config
# -----------------------------
@dataclass
class TrainConfig:
    crop_len: int = 16384
    batch_size: int = 16
    lr_init: float = 2e-4
    betas: tuple = (0.9, 0.999)
    weight_decay: float = 0.01
    total_steps: int = 2000
    seed: int = 0
    log_every: int = 10
    checkpoint_every: int = 500
    weights: LossWeights = field(default_factory=LossWeights)
    generator: GeneratorConfig = field(default_factory=GeneratorConfig)
    discriminator: DiscriminatorConfig = field(default_factory=DiscriminatorConfig)

    def __post_init__(self):
        n_fft = self.generator.n_fft if self.generator.head.startswith("istft") else self.generator.mdct_n
        if self.crop_len < n_fft:
            raise ValueError("crop_len must cover at least one analysis frame")
        if self.total_steps < 1:
            raise ValueError("total_steps must be >= 1")


def desk_config(total_steps: int = 2000, seed: int = 0) -> TrainConfig:
    """Tiny configuration that trains in minutes on one CPU core."""
    return TrainConfig(
        crop_len=8192,
        batch_size=4,
        total_steps=total_steps,
        seed=seed,
        generator=GeneratorConfig(dim=64, intermediate_dim=192, num_blocks=2),
        discriminator=DiscriminatorConfig(
            mpd_periods=(2, 3, 5),
            mpd_channels=(8, 16, 32, 32),
            mrd_resolutions=((512, 128, 512), (1024, 256, 1024)),
            mrd_channels=(4, 8, 16),
        ),
    )


def config_to_text(cfg: TrainConfig) -> str:
    g, d, w = cfg.generator, cfg.discriminator, cfg.weights
    lines = [
        f"crop_len = {cfg.crop_len}",
        f"batch_size = {cfg.batch_size}",
        f"lr_init = {cfg.lr_init!r}",
        f"betas = {cfg.betas[0]!r},{cfg.betas[1]!r}",
        f"weight_decay = {cfg.weight_decay!r}",
        f"total_steps = {cfg.total_steps}",
        f"seed = {cfg.seed}",
        f"log_every = {cfg.log_every}",
        f"checkpoint_every = {cfg.checkpoint_every}",
        f"loss.lambda_mel = {w.lambda_mel!r}",
        f"loss.lambda_fm = {w.lambda_fm!r}",
        f"loss.lambda_adv = {w.lambda_adv!r}",
        f"gen.input_dim = {g.input_dim}",
        f"gen.backbone = {g.backbone}",
        f"gen.dim = {g.dim}",
        f"gen.intermediate_dim = {g.intermediate_dim}",
        f"gen.num_blocks = {g.num_blocks}",
        f"gen.kernel_size = {g.kernel_size}",
        f"gen.layer_scale_init = {g.layer_scale_init!r}",
        f"gen.resblock_dilations = {','.join(str(x) for x in g.resblock_dilations)}",
        f"gen.head = {g.head}",
        f"gen.n_fft = {g.n_fft}",
        f"gen.hop = {g.hop}",
        f"gen.mdct_n = {g.mdct_n}",
        f"gen.sample_rate = {g.sample_rate}",
        f"gen.exp_clamp = {g.exp_clamp!r}",
        f"disc.mpd_periods = {','.join(str(x) for x in d.mpd_periods)}",
        f"disc.mpd_channels = {','.join(str(x) for x in d.mpd_channels)}",
        "disc.mrd_resolutions = "
        + ",".join(":".join(str(v) for v in triple) for triple in d.mrd_resolutions),
        f"disc.mrd_channels = {','.join(str(x) for x in d.mrd_channels)}",
    ]
    return "\n".join(lines) + "\n"


def config_from_text(text: str) -> TrainConfig:
    kv = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected 'key = value', got {line!r}")
        key, val = (part.strip() for part in line.split("=", 1))
        kv[key] = val

    def ints(s):
        return tuple(int(x) for x in s.split(","))

    gen = GeneratorConfig(
        input_dim=int(kv["gen.input_dim"]),
        backbone=kv["gen.backbone"],
        dim=int(kv["gen.dim"]),
        intermediate_dim=int(kv["gen.intermediate_dim"]),
        num_blocks=int(kv["gen.num_blocks"]),
        kernel_size=int(kv["gen.kernel_size"]),
        layer_scale_init=float(kv["gen.layer_scale_init"]),
        resblock_dilations=ints(kv["gen.resblock_dilations"]),
        head=kv["gen.head"],
        n_fft=int(kv["gen.n_fft"]),
        hop=int(kv["gen.hop"]),
        mdct_n=int(kv["gen.mdct_n"]),
        sample_rate=int(kv["gen.sample_rate"]),
        exp_clamp=float(kv["gen.exp_clamp"]),
    )
    disc = DiscriminatorConfig(
        mpd_periods=ints(kv["disc.mpd_periods"]),
        mpd_channels=ints(kv["disc.mpd_channels"]),
        mrd_resolutions=tuple(
            tuple(int(v) for v in triple.split(":"))
            for triple in kv["disc.mrd_resolutions"].split(",")
        ),
        mrd_channels=ints(kv["disc.mrd_channels"]),
    )
    weights = LossWeights(
        lambda_mel=float(kv["loss.lambda_mel"]),
        lambda_fm=float(kv["loss.lambda_fm"]),
        lambda_adv=float(kv["loss.lambda_adv"]),
    )
    b0, b1 = kv["betas"].split(",")
    return TrainConfig(
        crop_len=int(kv["crop_len"]),
        batch_size=int(kv["batch_size"]),
        lr_init=float(kv["lr_init"]),
        betas=(float(b0), float(b1)),
        weight_decay=float(kv["weight_decay"]),
        total_steps=int(kv["total_steps"]),
        seed=int(kv["seed"]),
        log_every=int(kv["log_every"]),
        checkpoint_every=int(kv["checkpoint_every"]),
        weights=weights,
        generator=gen,
        discriminator=disc,
    )


# -----------------------------
# Training
# -----------------------------
class Trainer:
    def __init__(self, cfg: TrainConfig):
        self.cfg = cfg
        self.generator = Generator(cfg.generator, np.random.default_rng([cfg.seed, 11]))
        self.discriminators = DiscriminatorSet(
            cfg.discriminator, np.random.default_rng([cfg.seed, 13])
        )
        stft_cfg = dsp.StftConfig(
            n_fft=cfg.generator.n_fft,
            hop=cfg.generator.frame_advance,
            window=dsp.hann_window(cfg.generator.n_fft),
        )
        fb = dsp.mel_filterbank(
            cfg.generator.n_fft, cfg.generator.sample_rate, cfg.generator.input_dim
        )
        self.mel_graph = MelSpectrogramGraph(stft_cfg, fb, dtype=np.float32)
        self.opt_g = AdamW(
            self.generator.named_parameters(), cfg.betas, weight_decay=cfg.weight_decay
        )
        self.opt_d = AdamW(
            self.discriminators.named_parameters(), cfg.betas, weight_decay=cfg.weight_decay
        )
        self.step = 0

    # -- one alternating update -------------------------------------------
    def train_step(self, batch: np.ndarray, lr: float) -> dict:
        cfg = self.cfg
        real = Tensor(batch.astype(np.float32))
        with ag.no_grad():
            feats = ag.swapaxes(self.mel_graph(real), -1, -2)  # [B, n_mels, T]
        fake = self.generator(Tensor(feats.data))
        fake = fake[..., : cfg.crop_len]  # trim the extra centered frame

        # discriminator update on detached audio
        fake_detached = fake.detach()
        out_real = self.discriminators(real)
        out_fake = self.discriminators(fake_detached)
        loss_d = hinge_discriminator_loss(
            [score for score, _ in out_real], [score for score, _ in out_fake]
        )
        self.discriminators.zero_grad()
        loss_d.backward()
        self.opt_d.step(lr)

        # generator update against the updated discriminators
        out_fake_g = self.discriminators(fake)
        with ag.no_grad():
            out_real_g = self.discriminators(real)
        l_adv = hinge_generator_loss([score for score, _ in out_fake_g])
        l_fm = feature_matching_loss(
            [f for _, f in out_real_g], [f for _, f in out_fake_g]
        )
        l_mel = mel_loss(real, fake, self.mel_graph)
        total = composite_generator_objective(l_adv, l_fm, l_mel, cfg.weights)
        self.generator.zero_grad()
        self.discriminators.zero_grad()  # G backward also reaches D weights
        total.backward()
        self.opt_g.step(lr)

        metrics = {
            "loss_mel": l_mel.item(),
            "loss_gen": l_adv.item(),
            "loss_disc": loss_d.item(),
            "loss_fm": l_fm.item(),
        }
        return metrics

    # -- checkpointing ------------------------------------------------------
    def checkpoint_tensors(self) -> dict:
        out = {f"gen.{k}": v for k, v in self.generator.state().items()}
        out.update({f"disc.{k}": v for k, v in self.discriminators.state().items()})
        out.update(self.opt_g.state_tensors("optg"))
        out.update(self.opt_d.state_tensors("optd"))
        out["meta.step"] = np.array(float(self.step), dtype=np.float32)
        return out

    def load_checkpoint_tensors(self, tensors: dict):
        self.generator.load_state(
            {k[len("gen."):]: v for k, v in tensors.items() if k.startswith("gen.")}
        )
        self.discriminators.load_state(
            {k[len("disc."):]: v for k, v in tensors.items() if k.startswith("disc.")}
        )
        self.opt_g.load_state_tensors(tensors, "optg")
        self.opt_d.load_state_tensors(tensors, "optd")
        self.step = int(tensors["meta.step"])


def _check_finite(metrics: dict, trainer: Trainer, out_dir: Path, step: int):
    bad = [k for k, v in metrics.items() if not np.isfinite(v)]
    for name, p in {**trainer.generator.named_parameters(),
                    **trainer.discriminators.named_parameters()}.items():
        if not np.all(np.isfinite(p.data)):
            bad.append(f"param:{name}")
    if bad:
        dump = out_dir / f"diagnostic_step{step:06d}.vcsk"
        save_checkpoint(dump, trainer.checkpoint_tensors())
        raise NumericError(
            f"non-finite values at step {step}: {', '.join(bad)} (state dumped)", dump
        )


def run_training(cfg: TrainConfig, dataset, out_dir, resume=None, progress=None):
    """Train to cfg.total_steps; returns the final checkpoint path.

    Writes config.txt, metrics.csv, and step_XXXXXX.vcsk checkpoints into
    out_dir. ``resume`` takes a checkpoint path and continues the exact
    run (per-step seeding makes the continuation bit-identical).
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "config.txt").write_text(config_to_text(cfg))

    trainer = Trainer(cfg)
    if resume is not None:
        trainer.load_checkpoint_tensors(load_checkpoint(resume))

    csv_path = out_dir / "metrics.csv"
    mode = "a" if (resume is not None and csv_path.exists()) else "w"
    with open(csv_path, mode, newline="") as fh:
        writer = csv.writer(fh)
        if mode == "w":
            writer.writerow(METRICS_HEADER)
        final = None
        for step in range(trainer.step, cfg.total_steps):
            lr = cosine_lr(step, cfg.total_steps, cfg.lr_init)
            batch = crop_batch(
                dataset, cfg.crop_len, cfg.batch_size, np.random.default_rng([cfg.seed, 17, step])
            )
            metrics = trainer.train_step(batch, lr)
            trainer.step = step + 1
            _check_finite(metrics, trainer, out_dir, step)
            if step % cfg.log_every == 0 or step == cfg.total_steps - 1:
                writer.writerow(
                    [step, repr(float(lr))]
                    + [repr(float(metrics[k])) for k in METRICS_HEADER[2:]]
                )
                fh.flush()
                if progress is not None:
                    progress(step, lr, metrics)
            if (step + 1) % cfg.checkpoint_every == 0 or step + 1 == cfg.total_steps:
                final = out_dir / f"step_{step + 1:06d}.vcsk"
                save_checkpoint(final, trainer.checkpoint_tensors())
    return final
