"""Adam optimizer with bias-corrected moments."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .. import kernels
from .tensor import NonFinite, ShapeMismatch, Tensor


@dataclass
class AdamState:
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "lr": self.lr,
            "beta1": self.beta1,
            "beta2": self.beta2,
            "eps": self.eps,
            "step": self.step,
            "m": {k: v.ravel().tolist() for k, v in self.m.items()},
            "v": {k: v.ravel().tolist() for k, v in self.v.items()},
        }

    @classmethod
    def from_dict(cls, data: dict, shapes: dict[str, tuple[int, ...]]) -> "AdamState":
        state = cls(
            lr=data["lr"],
            beta1=data["beta1"],
            beta2=data["beta2"],
            eps=data["eps"],
            step=data["step"],
        )
        for key, flat in data["m"].items():
            state.m[key] = np.asarray(flat, dtype=np.float64).reshape(shapes[key])
        for key, flat in data["v"].items():
            state.v[key] = np.asarray(flat, dtype=np.float64).reshape(shapes[key])
        return state


def adam_step(params: list[Tensor], state: AdamState) -> None:
    """Apply one in-place Adam update; missing gradients count as zero.

    Every parameter must be named (moments are keyed by name). Raises
    NonFinite on NaN/Inf gradients, ShapeMismatch if a stored moment does
    not match its parameter.
    """
    state.step += 1
    t = state.step
    bc1 = 1.0 - state.beta1**t
    inv_sqrt_bc2 = 1.0 / np.sqrt(1.0 - state.beta2**t)
    step_scale = state.lr / bc1
    for p in params:
        if p.name is None:
            raise ValueError("adam_step requires named parameters")
        if not p.values.flags.c_contiguous:
            p.values = np.ascontiguousarray(p.values)
        grad = p.grad
        if grad is not None and grad.shape != p.values.shape:
            raise ShapeMismatch(f"gradient shape {grad.shape} vs parameter {p.values.shape}")
        m = state.m.get(p.name)
        if m is None:
            m = state.m[p.name] = np.zeros_like(p.values)
            state.v[p.name] = np.zeros_like(p.values)
        v = state.v[p.name]
        if m.shape != p.values.shape:
            raise ShapeMismatch(f"moment shape {m.shape} vs parameter {p.values.shape}")
        if grad is None:
            # moments still decay; the update uses the decayed momentum
            m *= state.beta1
            v *= state.beta2
            denom = np.sqrt(v)
            denom *= inv_sqrt_bc2
            denom += state.eps
            update = m / denom
            update *= step_scale
            p.values -= update
            continue
        gsum = kernels.adam_update(
            p.values.reshape(-1),
            np.ascontiguousarray(grad).reshape(-1),
            m.reshape(-1),
            v.reshape(-1),
            state.beta1,
            state.beta2,
            step_scale,
            inv_sqrt_bc2,
            state.eps,
        )
        if not math.isfinite(gsum):
            raise NonFinite(f"non-finite gradient for parameter {p.name!r}")
