"""Differentiable 1-D and 2-D convolutions (im2col + BLAS matmul).

Cross-correlation convention throughout. Inputs are [C, T] / [C, H, W] or
batched with one leading axis. conv1d supports stride, dilation, zero
padding, and channel groups; conv2d supports stride and padding (all the
discriminators need). Transposed convolution is a composite: zero-insert
upsampling followed by a regular convolution with the flipped kernel, so
it runs at output temporal resolution and inherits its backward pass.
"""

from __future__ import annotations

import numpy as np

from .tensor import Tensor, _node, dilate, flip, swapaxes


def _patches1d(x: np.ndarray, k: int, stride: int, dilation: int) -> np.ndarray:
    # x: [B, C, T_pad] -> [B, C, T_out, K]
    span = dilation * (k - 1) + 1
    if x.shape[-1] < span:
        raise ValueError(
            f"input of length {x.shape[-1]} shorter than kernel span {span}"
        )
    win = np.lib.stride_tricks.sliding_window_view(x, span, axis=-1)
    return win[:, :, ::stride, ::dilation]


def conv1d(x: Tensor, w: Tensor, bias=None, stride=1, dilation=1, padding=0, groups=1):
    """x [.., C_in, T], w [C_out, C_in/groups, K] -> [.., C_out, T_out].

    T_out = floor((T + 2*padding - dilation*(K-1) - 1)/stride) + 1.
    """
    squeeze = x.ndim == 2
    xd = x.data[None] if squeeze else x.data
    bsz, c_in, t_in = xd.shape
    c_out, c_in_g, k = w.shape
    if c_in % groups or c_out % groups or c_in_g != c_in // groups:
        raise ValueError(
            f"channel geometry mismatch: x has {c_in} channels, "
            f"w is {w.shape} with groups={groups}"
        )
    xp = np.pad(xd, ((0, 0), (0, 0), (padding, padding))) if padding else xd
    cols = _patches1d(xp, k, stride, dilation)  # [B, C_in, T_out, K]
    t_out = cols.shape[2]
    if t_out < 1:
        raise ValueError("convolution geometry yields an empty output")
    # [B, G, Cg*K, T_out] @ [G, Cg_out, Cg*K] -> BLAS batch
    cols_m = (
        cols.reshape(bsz, groups, c_in_g, t_out, k)
        .transpose(0, 1, 2, 4, 3)
        .reshape(bsz, groups, c_in_g * k, t_out)
    )
    w_m = w.data.reshape(groups, c_out // groups, c_in_g * k)
    out = np.matmul(w_m, cols_m).reshape(bsz, c_out, t_out)
    if bias is not None:
        out = out + bias.data.reshape(-1, 1)

    def backward(g):
        gb = g[None] if squeeze else g  # [B, C_out, T_out]
        g_m = gb.reshape(bsz, groups, c_out // groups, t_out)
        # weight gradient: contract over batch and positions
        gw = np.einsum("bgot,bgct->goc", g_m, cols_m, optimize=True)
        w._accumulate(gw.reshape(w.shape))
        if bias is not None:
            bias._accumulate(gb.sum(axis=(0, 2)))
        # input gradient: col2im scatter of w^T @ g
        gcols = np.matmul(np.swapaxes(w_m, -1, -2), g_m)  # [B, G, Cg*K, T_out]
        gcols = gcols.reshape(bsz, groups, c_in_g, k, t_out).reshape(bsz, c_in, k, t_out)
        gxp = np.zeros_like(xp)
        valid = stride * (t_out - 1) + 1
        for kk in range(k):
            gxp[:, :, kk * dilation: kk * dilation + valid: stride] += gcols[:, :, kk]
        gx = gxp[:, :, padding: padding + t_in] if padding else gxp
        x._accumulate(gx[0] if squeeze else gx)

    return _node(out[0] if squeeze else out, (x, w) + (() if bias is None else (bias,)), backward)


def conv_transpose1d(x: Tensor, w: Tensor, bias=None, stride=1, padding=0):
    """x [.., C_in, T], w [C_in, C_out, K] -> [.., C_out, (T-1)*stride - 2*padding + K].

    Realized as a fractionally-strided convolution: stride-1 zeros are
    inserted between input steps, then a stride-1 convolution with the
    kernel flipped in time and swapped in channels runs over the result.
    """
    k = w.shape[-1]
    up = dilate(x, stride, axis=-1)
    w_conv = flip(swapaxes(w, 0, 1), axis=-1)
    return conv1d(up, w_conv, bias=bias, padding=k - 1 - padding)


def _patches2d(x: np.ndarray, kh: int, kw: int, sh: int, sw: int) -> np.ndarray:
    # x: [B, C, H_pad, W_pad] -> [B, C, H_out, W_out, kh, kw]
    win = np.lib.stride_tricks.sliding_window_view(x, (kh, kw), axis=(-2, -1))
    return win[:, :, ::sh, ::sw]


def conv2d(x: Tensor, w: Tensor, bias=None, stride=(1, 1), padding=(0, 0)):
    """x [.., C_in, H, W], w [C_out, C_in, kh, kw] -> [.., C_out, H_out, W_out]."""
    squeeze = x.ndim == 3
    xd = x.data[None] if squeeze else x.data
    bsz, c_in, h_in, w_in = xd.shape
    c_out, c_in_w, kh, kw = w.shape
    if c_in_w != c_in:
        raise ValueError(f"x has {c_in} channels but w expects {c_in_w}")
    sh, sw = stride
    ph, pw = padding
    xp = np.pad(xd, ((0, 0), (0, 0), (ph, ph), (pw, pw))) if ph or pw else xd
    if xp.shape[2] < kh or xp.shape[3] < kw:
        raise ValueError("input smaller than kernel after padding")
    cols = _patches2d(xp, kh, kw, sh, sw)  # [B, C, H_out, W_out, kh, kw]
    h_out, w_out = cols.shape[2], cols.shape[3]
    cols_m = cols.transpose(0, 1, 4, 5, 2, 3).reshape(bsz, c_in * kh * kw, h_out * w_out)
    w_m = w.data.reshape(c_out, c_in * kh * kw)
    out = (w_m @ cols_m).reshape(bsz, c_out, h_out, w_out)
    if bias is not None:
        out = out + bias.data.reshape(-1, 1, 1)

    def backward(g):
        gb = g[None] if squeeze else g
        g_m = gb.reshape(bsz, c_out, h_out * w_out)
        gw = np.einsum("bop,bcp->oc", g_m, cols_m, optimize=True)
        w._accumulate(gw.reshape(w.shape))
        if bias is not None:
            bias._accumulate(gb.sum(axis=(0, 2, 3)))
        gcols = np.matmul(w_m.T, g_m).reshape(bsz, c_in, kh, kw, h_out, w_out)
        gxp = np.zeros_like(xp)
        vh = sh * (h_out - 1) + 1
        vw = sw * (w_out - 1) + 1
        for i in range(kh):
            for j in range(kw):
                gxp[:, :, i: i + vh: sh, j: j + vw: sw] += gcols[:, :, i, j]
        gx = gxp[:, :, ph: ph + h_in, pw: pw + w_in] if ph or pw else gxp
        x._accumulate(gx[0] if squeeze else gx)

    return _node(out[0] if squeeze else out, (x, w) + (() if bias is None else (bias,)), backward)
