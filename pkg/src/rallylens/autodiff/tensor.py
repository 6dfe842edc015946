"""Reverse-mode tape: Tensor values and the recording Graph.

Ops (see `ops.py`) compute forward values eagerly with numpy. When a Graph
is active they also append a backward closure to its tape; `Graph.backward`
replays the tape in exact reverse execution order, accumulating gradients
into `Tensor.grad`. Everything is float64.
"""

from __future__ import annotations

import math

import numpy as np


class NonFinite(ArithmeticError):
    """A value or parameter gradient became NaN or infinite."""


def _all_finite(array: np.ndarray) -> bool:
    # summing propagates NaN/Inf and is cheaper than isfinite().all();
    # overflow of a finite sum would also (correctly) trip the error
    return math.isfinite(float(array.sum()))


class ShapeMismatch(ValueError):
    pass


class AllMasked(ValueError):
    pass


class Tensor:
    """An ndarray with an optional gradient slot.

    Parameters (leaves to be optimized) carry requires_grad=True and a
    name; intermediates produced by ops inherit requires_grad from their
    inputs while a Graph is recording.
    """

    __slots__ = ("values", "grad", "requires_grad", "name")

    def __init__(self, values, requires_grad: bool = False, name: str | None = None):
        array = np.asarray(values, dtype=np.float64)
        if not _all_finite(array):
            raise NonFinite(f"non-finite values in tensor {name or '<anonymous>'}")
        self.values = array
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.values.shape

    def accumulate(self, grad: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.array(grad, dtype=np.float64)
            if self.grad.shape != self.values.shape:
                self.grad = np.broadcast_to(self.grad, self.values.shape).copy()
        else:
            self.grad += grad

    def zero_grad(self) -> None:
        self.grad = None

    def copy(self) -> "Tensor":
        return Tensor(self.values.copy(), requires_grad=self.requires_grad, name=self.name)

    def __repr__(self) -> str:
        label = f" {self.name!r}" if self.name else ""
        return f"Tensor{label}(shape={self.values.shape}, requires_grad={self.requires_grad})"


def parameter(values, name: str) -> Tensor:
    return Tensor(values, requires_grad=True, name=name)


_STACK: list["Graph"] = []


def active_graph() -> "Graph | None":
    return _STACK[-1] if _STACK else None


class Graph:
    """Tape of recorded operations, replayed in reverse by backward()."""

    def __init__(self):
        self._tape: list[tuple[str, object]] = []
        self._params: set[Tensor] = set()

    def __enter__(self) -> "Graph":
        _STACK.append(self)
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        popped = _STACK.pop()
        assert popped is self, "graphs must be exited in LIFO order"

    def __len__(self) -> int:
        return len(self._tape)

    def record(self, name: str, backward_fn, inputs: tuple[Tensor, ...]) -> None:
        self._tape.append((name, backward_fn))
        for t in inputs:
            if t.requires_grad and t.name is not None:
                self._params.add(t)

    def backward(self, output: Tensor, seed: np.ndarray | float | None = None) -> None:
        """Seed the output gradient and replay the tape in reverse.

        Raises NonFinite if any parameter gradient comes out NaN/Inf.
        """
        if seed is None:
            seed = np.ones_like(output.values)
        output.accumulate(np.asarray(seed, dtype=np.float64))
        for _, fn in reversed(self._tape):
            fn()
        for t in self._params:
            if t.grad is not None and not _all_finite(t.grad):
                raise NonFinite(f"non-finite gradient for parameter {t.name!r}")
