"""Minimal reverse-mode autodiff: Tensor, tape Graph, ops, Adam."""

from . import ops
from .optim import AdamState, adam_step
from .tensor import (
    AllMasked,
    Graph,
    NonFinite,
    ShapeMismatch,
    Tensor,
    active_graph,
    parameter,
)

__all__ = [
    "ops",
    "AdamState",
    "adam_step",
    "AllMasked",
    "Graph",
    "NonFinite",
    "ShapeMismatch",
    "Tensor",
    "active_graph",
    "parameter",
]
