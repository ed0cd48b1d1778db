"""Command-line surface: features, train, infer, bench, phase-demo.

Exit codes: 0 ok, 2 input error, 3 numeric failure, 64 usage error.
Every subcommand echoes its resolved configuration before doing work and
writes only under the paths given by --out.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from . import autograd as ag
from . import dsp
from .autograd import Tensor
from .fileio import (
    AudioBuffer,
    FormatError,
    load_checkpoint,
    read_melf,
    read_wav,
    write_melf,
    write_wav,
)
from .model import Generator, GeneratorConfig, TimeDomainBaseline
from .nn import count_macs
from .training import (
    NumericError,
    SyntheticDataset,
    TrainConfig,
    WavDirectoryDataset,
    config_from_text,
    desk_config,
    run_training,
)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERIC = 3
EXIT_USAGE = 64


class CliParser(argparse.ArgumentParser):
    """argparse with usage failures (unknown flags etc.) exiting 64."""

    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        sys.exit(EXIT_USAGE)


def _echo(name: str, **resolved):
    print(f"[{name}] " + " ".join(f"{k}={v}" for k, v in resolved.items()))


# -----------------------------
# features
# -----------------------------
def cmd_features(args) -> int:
    _echo("features", infile=args.infile, out=args.out, n_fft=args.n_fft,
          hop=args.hop, n_mels=args.n_mels)
    try:
        audio = read_wav(args.infile)
        cfg = dsp.StftConfig(n_fft=args.n_fft, hop=args.hop, window=dsp.hann_window(args.n_fft))
        fb = dsp.mel_filterbank(args.n_fft, audio.sample_rate, args.n_mels)
        mel = dsp.log_mel_spectrogram(audio.samples, cfg, fb)
    except (OSError, FormatError, ValueError) as exc:
        print(f"features: {exc}", file=sys.stderr)
        return EXIT_INPUT
    write_melf(args.out, mel)
    print(f"wrote {mel.shape[0]} frames x {mel.shape[1]} mels to {args.out}")
    return EXIT_OK


# -----------------------------
# train
# -----------------------------
def _resolve_train_config(args) -> TrainConfig:
    if args.config:
        cfg = config_from_text(Path(args.config).read_text())
    elif args.synthetic:
        cfg = desk_config()  # synthetic runs default to the desk-scale preset
    else:
        cfg = TrainConfig()
    if args.steps is not None:
        cfg.total_steps = args.steps
    if args.seed is not None:
        cfg.seed = args.seed
    return cfg


def cmd_train(args) -> int:
    try:
        cfg = _resolve_train_config(args)
    except (OSError, KeyError, ValueError) as exc:
        print(f"train: bad config: {exc}", file=sys.stderr)
        return EXIT_INPUT
    _echo("train", out=args.out, synthetic=args.synthetic, data=args.data,
          steps=cfg.total_steps, batch=cfg.batch_size, crop=cfg.crop_len,
          seed=cfg.seed, dim=cfg.generator.dim, blocks=cfg.generator.num_blocks,
          head=cfg.generator.head, resume=args.resume)
    try:
        if args.synthetic:
            dataset = SyntheticDataset(seed=cfg.seed, sample_rate=cfg.generator.sample_rate)
        else:
            dataset = WavDirectoryDataset(args.data)
    except (OSError, FormatError, ValueError) as exc:
        print(f"train: {exc}", file=sys.stderr)
        return EXIT_INPUT

    def progress(step, lr, metrics):
        print(
            f"step {step:6d} lr={lr:.3e} "
            + " ".join(f"{k}={v:.4f}" for k, v in metrics.items())
        )

    try:
        final = run_training(cfg, dataset, args.out, resume=args.resume, progress=progress)
    except NumericError as exc:
        print(f"train: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (OSError, FormatError, ValueError) as exc:
        print(f"train: {exc}", file=sys.stderr)
        return EXIT_INPUT
    print(f"final checkpoint: {final}")
    return EXIT_OK


# -----------------------------
# infer
# -----------------------------
def _load_generator(ckpt_path, config_path=None, dtype=np.float32) -> Generator:
    tensors = load_checkpoint(ckpt_path)
    cfg_file = Path(config_path) if config_path else Path(ckpt_path).parent / "config.txt"
    if not cfg_file.exists():
        raise FormatError(f"no config found at {cfg_file}; pass --config")
    gen_cfg = config_from_text(cfg_file.read_text()).generator
    gen = Generator(gen_cfg, np.random.default_rng(0), dtype=dtype)
    gen.load_state({k[len("gen."):]: v for k, v in tensors.items() if k.startswith("gen.")})
    return gen


def cmd_infer(args) -> int:
    _echo("infer", ckpt=args.ckpt, infile=args.infile, out=args.out, config=args.config)
    try:
        gen = _load_generator(args.ckpt, args.config)
        mel = read_melf(args.infile)
    except (OSError, FormatError, KeyError, ValueError) as exc:
        print(f"infer: {exc}", file=sys.stderr)
        return EXIT_INPUT
    if mel.shape[1] != gen.cfg.input_dim:
        print(
            f"infer: feature geometry mismatch: file has {mel.shape} (frames x mels), "
            f"checkpoint expects {gen.cfg.input_dim} mels",
            file=sys.stderr,
        )
        return EXIT_INPUT
    with ag.no_grad():
        wave = gen(Tensor(mel.T.astype(np.float32)))
    write_wav(args.out, AudioBuffer(wave.data.astype(np.float64), gen.cfg.sample_rate))
    print(f"wrote {wave.shape[-1]} samples at {gen.cfg.sample_rate} Hz to {args.out}")
    return EXIT_OK


# -----------------------------
# bench
# -----------------------------
def _bench_model(model, feats_np, repeats: int, threads: int) -> float:
    """Median wall time over repeats (after one warmup) for a full batch."""

    def run_batch():
        if threads > 1:
            from concurrent.futures import ThreadPoolExecutor

            with ThreadPoolExecutor(max_workers=threads) as pool:
                list(pool.map(lambda f: model(Tensor(f)).data, feats_np))
        else:
            for f in feats_np:
                model(Tensor(f))

    with ag.no_grad():
        run_batch()  # warmup: first call pays allocation/cache effects
        times = []
        for _ in range(repeats):
            t0 = time.perf_counter()
            run_batch()
            times.append(time.perf_counter() - t0)
    return float(np.median(times))


def cmd_bench(args) -> int:
    _echo("bench", ckpt=args.ckpt, config=args.config, seconds=args.seconds,
          batch=args.batch, repeats=args.repeats, compare=args.compare,
          threads=args.threads)
    try:
        if args.ckpt:
            gen = _load_generator(args.ckpt, args.config)
        elif args.config:
            gen = Generator(config_from_text(Path(args.config).read_text()).generator,
                            np.random.default_rng(0))
        else:
            gen = Generator(GeneratorConfig(), np.random.default_rng(0))
    except (OSError, FormatError, KeyError, ValueError) as exc:
        print(f"bench: {exc}", file=sys.stderr)
        return EXIT_INPUT
    cfg = gen.cfg
    frames = int(args.seconds * cfg.sample_rate) // cfg.frame_advance + 1
    dataset = SyntheticDataset(n_clips=args.batch, clip_len=int(args.seconds * cfg.sample_rate) + cfg.n_fft, seed=1)
    mel_cfg = dsp.StftConfig(cfg.n_fft, cfg.frame_advance, dsp.hann_window(cfg.n_fft))
    fb = dsp.mel_filterbank(cfg.n_fft, cfg.sample_rate, cfg.input_dim)
    feats = [
        dsp.log_mel_spectrogram(dataset.clip(i)[: int(args.seconds * cfg.sample_rate)], mel_cfg, fb)
        .T[:, :frames].astype(np.float32)
        for i in range(args.batch)
    ]

    audio_seconds = args.batch * args.seconds
    wall = _bench_model(gen, feats, args.repeats, args.threads)
    macs = count_macs(gen.mac_layers(frames)) * args.batch
    print(f"spectral-head generator: params={gen.param_count():,} "
          f"macs={macs:,} xrt={audio_seconds / wall:.2f} "
          f"(batch {args.batch} x {args.seconds:.1f}s in {wall:.3f}s, threads={args.threads})")

    if args.compare:
        baseline = TimeDomainBaseline(cfg, rng=np.random.default_rng(0))
        wall_b = _bench_model(baseline, feats, args.repeats, args.threads)
        macs_b = count_macs(baseline.mac_layers(frames)) * args.batch
        print(f"transposed-conv baseline: params={baseline.param_count():,} "
              f"macs={macs_b:,} xrt={audio_seconds / wall_b:.2f} "
              f"(batch {args.batch} x {args.seconds:.1f}s in {wall_b:.3f}s)")
        print(f"compare: mac_ratio={macs_b / macs:.2f} speedup={wall_b / wall:.2f}x")
    return EXIT_OK


# -----------------------------
# phase-demo
# -----------------------------
def cmd_phase_demo(args) -> int:
    _echo("phase-demo", freq_start=args.freq_start, freq_end=args.freq_end,
          seconds=args.seconds, sample_rate=args.sample_rate, out=args.out)
    if args.seconds <= 0 or args.freq_start <= 0 or args.freq_end <= 0:
        print("phase-demo: duration and frequencies must be positive", file=sys.stderr)
        return EXIT_INPUT
    sr = args.sample_rate
    n = int(round(args.seconds * sr))
    t = np.arange(n) / sr
    # linear sweep: f(t) = f0 + (f1-f0) t/T, x = sin(2*pi * integral of f)
    sweep = args.freq_start * t + (args.freq_end - args.freq_start) * t**2 / (2 * args.seconds)
    x = np.sin(2 * np.pi * sweep)
    phi = dsp.instantaneous_phase(x)
    with open(args.out, "w") as fh:
        fh.write("t,x,phi\n")
        for ti, xi, pi in zip(t, x, phi):
            fh.write(f"{float(ti)!r},{float(xi)!r},{float(pi)!r}\n")
    cycles = 0.5 * (args.freq_start + args.freq_end) * args.seconds
    wraps = int(np.sum(np.diff(phi) < -np.pi))
    print(f"wrote {n} rows to {args.out} ({wraps} wraps, {cycles:.1f} cycles swept)")
    return EXIT_OK


# -----------------------------
# parser
# -----------------------------
def build_parser() -> CliParser:
    parser = CliParser(prog="specvoc", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=CliParser)

    p = sub.add_parser("features", help="extract log-mel features from a WAV into a MELF file")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--n-fft", type=int, default=1024)
    p.add_argument("--hop", type=int, default=256)
    p.add_argument("--n-mels", type=int, default=100)
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("train", help="train generator and discriminators")
    p.add_argument("--config", help="key=value config file (overrides presets)")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--data", help="directory of training WAVs")
    group.add_argument("--synthetic", action="store_true",
                       help="generate sinusoid-mixture clips (desk-scale preset)")
    p.add_argument("--out", required=True)
    p.add_argument("--steps", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--resume", help="checkpoint to continue from")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("infer", help="synthesize a WAV from a MELF feature file")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config", help="config.txt path (default: next to checkpoint)")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("bench", help="measure synthesis speed (xRT), MACs, parameters")
    p.add_argument("--ckpt")
    p.add_argument("--config")
    p.add_argument("--seconds", type=float, default=1.0)
    p.add_argument("--batch", type=int, default=16)
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--compare", action="store_true",
                   help="also run the transposed-conv baseline at matched backbone")
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("phase-demo", help="emit t,x,phi CSV for a frequency sweep")
    p.add_argument("--freq-start", type=float, default=200.0)
    p.add_argument("--freq-end", type=float, default=2000.0)
    p.add_argument("--seconds", type=float, default=1.0)
    p.add_argument("--sample-rate", type=int, default=24000)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_phase_demo)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
