"""Layer compositions and compute accounting.

Blocks are isotropic: every backbone block maps [.., C, T] -> [.., C, T].

MAC formula sheet (multiply-accumulates; biases and activations excluded):

    conv1d            T_out * C_out * (C_in / groups) * K
    conv_transpose1d  T_in  * C_in  * C_out * K
    conv2d            H_out * W_out * C_out * C_in * kh * kw
    pointwise/linear  conv1d with K = 1

Inverse-transform FFT cost (a few N log N multiplies per frame) is not a
learned layer and is excluded from MAC totals; it is negligible next to
any convolution stack at these sizes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autograd as ag
from .autograd import Tensor


class Module:
    """Lightweight container: tensors with requires_grad are parameters."""

    def named_parameters(self, prefix: str = "") -> dict:
        out = {}
        for key, val in vars(self).items():
            full = f"{prefix}{key}"
            if isinstance(val, Tensor) and val.requires_grad:
                out[full] = val
            elif isinstance(val, Module):
                out.update(val.named_parameters(f"{full}."))
            elif isinstance(val, (list, tuple)):
                for i, item in enumerate(val):
                    if isinstance(item, Module):
                        out.update(item.named_parameters(f"{full}.{i}."))
                    elif isinstance(item, Tensor) and item.requires_grad:
                        out[f"{full}.{i}"] = item
        return out

    def parameters(self):
        return list(self.named_parameters().values())

    def zero_grad(self):
        for p in self.parameters():
            p.zero_grad()

    def param_count(self) -> int:
        return sum(p.data.size for p in self.parameters())

    def state(self) -> dict:
        return {k: v.data.copy() for k, v in self.named_parameters().items()}

    def load_state(self, state: dict):
        params = self.named_parameters()
        missing = set(params) - set(state)
        if missing:
            raise ValueError(f"state is missing parameters: {sorted(missing)[:5]} ...")
        for name, p in params.items():
            arr = np.asarray(state[name], dtype=p.dtype)
            if arr.shape != p.shape:
                raise ValueError(f"{name}: shape {arr.shape} != expected {p.shape}")
            p.data = arr.copy()


def _param(rng, shape, dtype, scale=None):
    if scale is None:
        fan_in = int(np.prod(shape[1:]))  # conv weights are [out, in, *kernel]
        scale = 1.0 / np.sqrt(fan_in)
    return Tensor((rng.standard_normal(shape) * scale).astype(dtype), requires_grad=True)


def _zeros(shape, dtype):
    return Tensor(np.zeros(shape, dtype=dtype), requires_grad=True)


def _ones(shape, dtype):
    return Tensor(np.ones(shape, dtype=dtype), requires_grad=True)


# -----------------------------
# ConvNeXt block
# -----------------------------
@dataclass
class ConvNeXtBlockConfig:
    dim: int = 512
    intermediate_dim: int = 1536
    kernel_size: int = 7
    layer_scale_init: float = 0.125

    def __post_init__(self):
        if self.kernel_size % 2 != 1:
            raise ValueError(f"kernel_size must be odd, got {self.kernel_size}")
        if self.intermediate_dim < self.dim:
            raise ValueError("intermediate_dim must be >= dim")
        if self.layer_scale_init < 0:
            raise ValueError("layer_scale_init must be >= 0")


class ConvNeXtBlock(Module):
    """Depthwise conv -> layer norm -> pointwise expand -> GELU -> pointwise
    project, residual-added with a learned per-channel scale."""

    def __init__(self, cfg: ConvNeXtBlockConfig, rng, dtype=np.float32):
        self.cfg = cfg
        d, inter, k = cfg.dim, cfg.intermediate_dim, cfg.kernel_size
        self.dw_w = _param(rng, (d, 1, k), dtype)
        self.dw_b = _zeros((d,), dtype)
        self.norm_g = _ones((d, 1), dtype)
        self.norm_b = _zeros((d, 1), dtype)
        self.pw1_w = _param(rng, (inter, d, 1), dtype)
        self.pw1_b = _zeros((inter,), dtype)
        self.pw2_w = _param(rng, (d, inter, 1), dtype)
        self.pw2_b = _zeros((d,), dtype)
        self.scale = Tensor(
            np.full((d, 1), cfg.layer_scale_init, dtype=dtype), requires_grad=True
        )

    def __call__(self, x: Tensor) -> Tensor:
        k = self.cfg.kernel_size
        h = ag.conv1d(x, self.dw_w, self.dw_b, padding=(k - 1) // 2, groups=self.cfg.dim)
        h = ag.layer_norm(h, self.norm_g, self.norm_b)
        h = ag.conv1d(h, self.pw1_w, self.pw1_b)
        h = ag.gelu(h)
        h = ag.conv1d(h, self.pw2_w, self.pw2_b)
        return x + self.scale * h

    def mac_layers(self, t: int) -> list:
        d, inter, k = self.cfg.dim, self.cfg.intermediate_dim, self.cfg.kernel_size
        return [
            dict(kind="conv1d", c_in=d, c_out=d, k=k, t_out=t, groups=d),
            dict(kind="conv1d", c_in=d, c_out=inter, k=1, t_out=t),
            dict(kind="conv1d", c_in=inter, c_out=d, k=1, t_out=t),
        ]


# -----------------------------
# Dilated ResBlock (ablation backbone)
# -----------------------------
@dataclass
class ResBlockConfig:
    channels: int = 512
    kernel_size: int = 3
    dilations: tuple = (1, 3, 5)

    def __post_init__(self):
        if not self.dilations or any(d < 1 for d in self.dilations):
            raise ValueError("dilations must be a non-empty sequence of positive ints")
        if self.kernel_size % 2 != 1:
            raise ValueError("kernel_size must be odd")


class ResBlockDilated(Module):
    """Residual stack of leaky-relu + dilated-conv pairs, one per dilation."""

    def __init__(self, cfg: ResBlockConfig, rng, dtype=np.float32):
        self.cfg = cfg
        c, k = cfg.channels, cfg.kernel_size
        self.ws = [_param(rng, (c, c, k), dtype) for _ in cfg.dilations]
        self.bs = [_zeros((c,), dtype) for _ in cfg.dilations]

    def __call__(self, x: Tensor) -> Tensor:
        k = self.cfg.kernel_size
        for d, w, b in zip(self.cfg.dilations, self.ws, self.bs):
            h = ag.leaky_relu(x, 0.1)
            h = ag.conv1d(h, w, b, dilation=d, padding=d * (k - 1) // 2)
            x = x + h
        return x

    def receptive_field(self) -> int:
        return 1 + sum(d * (self.cfg.kernel_size - 1) for d in self.cfg.dilations)

    def mac_layers(self, t: int) -> list:
        c, k = self.cfg.channels, self.cfg.kernel_size
        return [
            dict(kind="conv1d", c_in=c, c_out=c, k=k, t_out=t) for _ in self.cfg.dilations
        ]


# -----------------------------
# Snake activation (ablation head-to-head)
# -----------------------------
def snake(x: Tensor, alpha: Tensor) -> Tensor:
    """x + sin^2(alpha*x)/alpha with per-channel positive alpha."""
    if np.any(alpha.data <= 0):
        raise ValueError("snake requires alpha > 0")
    s = ag.sin(alpha * x)
    return x + s * s / alpha


# -----------------------------
# Transposed-convolution upsampler baseline
# -----------------------------
@dataclass
class UpsamplerBaselineConfig:
    """Stages of (stride, kernel_size, out_channels); strides multiply to hop.

    Kernels are 2*stride with padding stride/2, so each stage scales length
    by exactly its stride. A final kernel-7 conv maps to one channel.
    """

    in_channels: int = 512
    stages: tuple = ()  # empty -> channel-halving stages via for_width
    hop: int = 256

    def __post_init__(self):
        if not self.stages:
            self.stages = self._halving_stages(self.in_channels, self.hop)
        prod = int(np.prod([s for s, _, _ in self.stages]))
        if prod != self.hop:
            raise ValueError(f"stage strides multiply to {prod}, expected hop {self.hop}")
        for s, k, _ in self.stages:
            if k != 2 * s:
                raise ValueError("baseline uses kernel_size = 2*stride per stage")

    @staticmethod
    def _halving_stages(in_channels: int, hop: int) -> tuple:
        if hop != 256:
            raise ValueError("default stage plan assumes hop 256; pass stages explicitly")
        chans = [max(in_channels // (2 ** (i + 1)), 8) for i in range(4)]
        return tuple(zip((8, 8, 2, 2), (16, 16, 4, 4), chans))


class UpsamplerBaseline(Module):
    """Sequential conv-transpose upsampling to waveform rate: [.., C, T] -> [.., 1, T*hop]."""

    def __init__(self, cfg: UpsamplerBaselineConfig, rng, dtype=np.float32):
        self.cfg = cfg
        self.ws = []
        self.bs = []
        c_in = cfg.in_channels
        for stride, k, c_out in cfg.stages:
            self.ws.append(_param(rng, (c_in, c_out, k), dtype))
            self.bs.append(_zeros((c_out,), dtype))
            c_in = c_out
        self.post_w = _param(rng, (1, c_in, 7), dtype)
        self.post_b = _zeros((1,), dtype)

    def __call__(self, x: Tensor) -> Tensor:
        h = x
        for (stride, k, _), w, b in zip(self.cfg.stages, self.ws, self.bs):
            h = ag.conv_transpose1d(h, w, b, stride=stride, padding=stride // 2)
            h = ag.leaky_relu(h, 0.1)
        return ag.conv1d(h, self.post_w, self.post_b, padding=3)

    def mac_layers(self, t: int) -> list:
        layers = []
        c_in = self.cfg.in_channels
        for stride, k, c_out in self.cfg.stages:
            layers.append(dict(kind="conv_transpose1d", c_in=c_in, c_out=c_out, k=k, t_in=t))
            t *= stride
            c_in = c_out
        layers.append(dict(kind="conv1d", c_in=c_in, c_out=1, k=7, t_out=t))
        return layers


# -----------------------------
# MAC counting
# -----------------------------
def count_macs(layers) -> int:
    """Sum multiply-accumulates over layer descriptors (see module docstring)."""
    total = 0
    for layer in layers:
        kind = layer["kind"]
        if kind == "conv1d":
            groups = layer.get("groups", 1)
            total += layer["t_out"] * layer["c_out"] * (layer["c_in"] // groups) * layer["k"]
        elif kind == "conv_transpose1d":
            total += layer["t_in"] * layer["c_in"] * layer["c_out"] * layer["k"]
        elif kind == "conv2d":
            total += (
                layer["h_out"] * layer["w_out"] * layer["c_out"] * layer["c_in"]
                * layer["kh"] * layer["kw"]
            )
        else:
            raise ValueError(f"unknown layer kind {kind!r}")
    return int(total)
