"""Central finite-difference verification of analytic gradients."""

from __future__ import annotations

import numpy as np

from .tensor import Tensor


def finite_difference_check(build, params, h=1e-5, max_coords=64, seed=0) -> float:
    """Compare analytic gradients of ``build(params) -> scalar Tensor`` with
    central differences.

    ``params`` is a dict of name -> Tensor; every tensor must be float64
    (float32 differences are too noisy at the 1e-4 tolerance this harness
    exists to enforce). Up to ``max_coords`` coordinates per parameter are
    sampled. Returns the max over checked coordinates of
    |analytic - numeric| / max(1e-8, |analytic| + |numeric|).
    """
    rng = np.random.default_rng(seed)
    for name, p in params.items():
        if p.dtype != np.float64:
            raise ValueError(f"gradcheck requires float64 parameters; {name} is {p.dtype}")
        p.zero_grad()
        p.requires_grad = True

    loss = build(params)
    if not isinstance(loss, Tensor) or loss.ndim != 0:
        raise ValueError("build must return a scalar Tensor")
    loss.backward()
    analytic = {
        name: (p.grad.copy() if p.grad is not None else np.zeros_like(p.data))
        for name, p in params.items()
    }

    worst = 0.0
    for name, p in params.items():
        flat = p.data.reshape(-1)
        size = flat.size
        coords = (
            np.arange(size)
            if size <= max_coords
            else rng.choice(size, size=max_coords, replace=False)
        )
        ref = analytic[name].reshape(-1)
        for idx in coords:
            keep = flat[idx]
            flat[idx] = keep + h
            f_plus = build(params).item()
            flat[idx] = keep - h
            f_minus = build(params).item()
            flat[idx] = keep
            numeric = (f_plus - f_minus) / (2.0 * h)
            a = ref[idx]
            worst = max(worst, abs(a - numeric) / max(1e-8, abs(a) + abs(numeric)))
    return worst
