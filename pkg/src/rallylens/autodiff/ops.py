"""Differentiable primitives used by the rally model.

Each op computes its value with numpy; with an active Graph it records a
closure implementing the exact vector-Jacobian product for its inputs.
The convolution and GRU recurrences dispatch to the selected kernel
backend (compiled extension or pure numpy).
"""

from __future__ import annotations

import numpy as np

from .. import kernels
from .tensor import AllMasked, Graph, ShapeMismatch, Tensor, active_graph

PROB_CLAMP = 1e-7  # probabilities are clipped to [PROB_CLAMP, 1 - PROB_CLAMP]


def _start(out: Tensor, inputs: tuple[Tensor, ...]) -> Graph | None:
    """Mark `out` as differentiable if recording and any input needs grad."""
    graph = active_graph()
    if graph is not None and any(t.requires_grad for t in inputs):
        out.requires_grad = True
        return graph
    return None


def constant(values) -> Tensor:
    return Tensor(values)


# ---------------------------------------------------------------------------
# Table lookups and structural ops
# ---------------------------------------------------------------------------


def embedding(table: Tensor, indices) -> Tensor:
    """Gather rows of an embedding table. indices: int array of shape (N,)."""
    idx = np.asarray(indices, dtype=np.intp)
    out = Tensor(table.values[idx])
    graph = _start(out, (table,))
    if graph is not None:

        def bwd():
            if out.grad is not None:
                g = np.zeros_like(table.values)
                np.add.at(g, idx, out.grad)
                table.accumulate(g)

        graph.record("embedding", bwd, (table,))
    return out


def concat(parts: list[Tensor], axis: int = -1) -> Tensor:
    arrays = [p.values for p in parts]
    out = Tensor(np.concatenate(arrays, axis=axis))
    graph = _start(out, tuple(parts))
    if graph is not None:
        sizes = [a.shape[axis] for a in arrays]
        offsets = np.cumsum([0] + sizes)

        def bwd():
            if out.grad is None:
                return
            for part, lo, hi in zip(parts, offsets[:-1], offsets[1:]):
                if part.requires_grad:
                    sl = [slice(None)] * out.grad.ndim
                    sl[axis] = slice(lo, hi)
                    part.accumulate(out.grad[tuple(sl)])

        graph.record("concat", bwd, tuple(parts))
    return out


def reshape(x: Tensor, shape: tuple[int, ...]) -> Tensor:
    out = Tensor(x.values.reshape(shape))
    graph = _start(out, (x,))
    if graph is not None:

        def bwd():
            if out.grad is not None:
                x.accumulate(out.grad.reshape(x.values.shape))

        graph.record("reshape", bwd, (x,))
    return out


def flip_rows(x: Tensor) -> Tensor:
    out = Tensor(x.values[::-1].copy())
    graph = _start(out, (x,))
    if graph is not None:

        def bwd():
            if out.grad is not None:
                x.accumulate(out.grad[::-1])

        graph.record("flip_rows", bwd, (x,))
    return out


def interleave_rows(a: Tensor, b: Tensor) -> Tensor:
    """Row-parity merge: 1-indexed odd rows from a, even rows from b."""
    if a.shape != b.shape:
        raise ShapeMismatch(f"interleave_rows: {a.shape} vs {b.shape}")
    merged = b.values.copy()
    merged[0::2] = a.values[0::2]
    out = Tensor(merged)
    graph = _start(out, (a, b))
    if graph is not None:

        def bwd():
            if out.grad is None:
                return
            if a.requires_grad:
                ga = np.zeros_like(a.values)
                ga[0::2] = out.grad[0::2]
                a.accumulate(ga)
            if b.requires_grad:
                gb = np.zeros_like(b.values)
                gb[1::2] = out.grad[1::2]
                b.accumulate(gb)

        graph.record("interleave_rows", bwd, (a, b))
    return out


# ---------------------------------------------------------------------------
# Elementwise activations and arithmetic
# ---------------------------------------------------------------------------


def relu(x: Tensor) -> Tensor:
    out = Tensor(np.maximum(x.values, 0.0))
    graph = _start(out, (x,))
    if graph is not None:
        mask = x.values > 0.0

        def bwd():
            if out.grad is not None:
                x.accumulate(out.grad * mask)

        graph.record("relu", bwd, (x,))
    return out


def sigmoid(x: Tensor) -> Tensor:
    values = 1.0 / (1.0 + np.exp(-x.values))
    out = Tensor(values)
    graph = _start(out, (x,))
    if graph is not None:

        def bwd():
            if out.grad is not None:
                x.accumulate(out.grad * values * (1.0 - values))

        graph.record("sigmoid", bwd, (x,))
    return out


def tanh(x: Tensor) -> Tensor:
    values = np.tanh(x.values)
    out = Tensor(values)
    graph = _start(out, (x,))
    if graph is not None:

        def bwd():
            if out.grad is not None:
                x.accumulate(out.grad * (1.0 - values * values))

        graph.record("tanh", bwd, (x,))
    return out


def add(x: Tensor, y: Tensor) -> Tensor:
    if x.shape != y.shape:
        raise ShapeMismatch(f"add: {x.shape} vs {y.shape}")
    out = Tensor(x.values + y.values)
    graph = _start(out, (x, y))
    if graph is not None:

        def bwd():
            if out.grad is None:
                return
            if x.requires_grad:
                x.accumulate(out.grad)
            if y.requires_grad:
                y.accumulate(out.grad)

        graph.record("add", bwd, (x, y))
    return out


def mul(x: Tensor, y: Tensor) -> Tensor:
    if x.shape != y.shape:
        raise ShapeMismatch(f"mul: {x.shape} vs {y.shape}")
    out = Tensor(x.values * y.values)
    graph = _start(out, (x, y))
    if graph is not None:

        def bwd():
            if out.grad is None:
                return
            if x.requires_grad:
                x.accumulate(out.grad * y.values)
            if y.requires_grad:
                y.accumulate(out.grad * x.values)

        graph.record("mul", bwd, (x, y))
    return out


def scale(x: Tensor, factor: float) -> Tensor:
    out = Tensor(x.values * factor)
    graph = _start(out, (x,))
    if graph is not None:

        def bwd():
            if out.grad is not None:
                x.accumulate(out.grad * factor)

        graph.record("scale", bwd, (x,))
    return out


def scale_rows(scales: Tensor, rows: Tensor) -> Tensor:
    """Multiply row n of `rows` by scalar scales[n]."""
    if scales.values.ndim != 1 or scales.shape[0] != rows.shape[0]:
        raise ShapeMismatch(f"scale_rows: {scales.shape} vs {rows.shape}")
    out = Tensor(rows.values * scales.values[:, None])
    graph = _start(out, (scales, rows))
    if graph is not None:

        def bwd():
            if out.grad is None:
                return
            if scales.requires_grad:
                scales.accumulate((out.grad * rows.values).sum(axis=1))
            if rows.requires_grad:
                rows.accumulate(out.grad * scales.values[:, None])

        graph.record("scale_rows", bwd, (scales, rows))
    return out


def sum_squares(x: Tensor) -> Tensor:
    out = Tensor(np.sum(x.values * x.values))
    graph = _start(out, (x,))
    if graph is not None:

        def bwd():
            if out.grad is not None:
                x.accumulate(2.0 * float(out.grad) * x.values)

        graph.record("sum_squares", bwd, (x,))
    return out


def sum_squares_total(parts: list[Tensor]) -> Tensor:
    """Sum of squared entries over several tensors, as one scalar node."""
    out = Tensor(sum(float(np.dot(p.values.ravel(), p.values.ravel())) for p in parts))
    graph = _start(out, tuple(parts))
    if graph is not None:

        def bwd():
            if out.grad is None:
                return
            g = 2.0 * float(out.grad)
            for p in parts:
                if p.requires_grad:
                    p.accumulate(g * p.values)

        graph.record("sum_squares_total", bwd, tuple(parts))
    return out


# ---------------------------------------------------------------------------
# Linear maps
# ---------------------------------------------------------------------------

_ACTIVATIONS = ("none", "relu", "sigmoid")


def dense(x: Tensor, w: Tensor, b: Tensor, activation: str = "none") -> Tensor:
    """activation(x @ w + b); x may be a vector (a,) or a matrix (N, a)."""
    if activation not in _ACTIVATIONS:
        raise ValueError(f"unknown activation {activation!r}")
    if x.values.shape[-1] != w.shape[0] or w.shape[1] != b.shape[0]:
        raise ShapeMismatch(f"dense: x {x.shape}, w {w.shape}, b {b.shape}")
    pre = x.values @ w.values + b.values
    if activation == "relu":
        values = np.maximum(pre, 0.0)
    elif activation == "sigmoid":
        values = 1.0 / (1.0 + np.exp(-pre))
    else:
        values = pre
    out = Tensor(values)
    graph = _start(out, (x, w, b))
    if graph is not None:

        def bwd():
            if out.grad is None:
                return
            g = out.grad
            if activation == "relu":
                g = g * (pre > 0.0)
            elif activation == "sigmoid":
                g = g * values * (1.0 - values)
            if x.requires_grad:
                x.accumulate(g @ w.values.T)
            if w.requires_grad:
                if x.values.ndim == 1:
                    w.accumulate(np.outer(x.values, g))
                else:
                    w.accumulate(x.values.T @ g)
            if b.requires_grad:
                b.accumulate(g if g.ndim == 1 else g.sum(axis=0))

        graph.record("dense", bwd, (x, w, b))
    return out


def conv1d_same(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """Same-padded 1-D convolution over rows. x: (N, Ci), w: (K, Ci, Co)."""
    if w.shape[0] % 2 != 1:
        raise ShapeMismatch(f"kernel size must be odd, got {w.shape[0]}")
    if x.values.ndim != 2 or x.shape[1] != w.shape[1] or w.shape[2] != b.shape[0]:
        raise ShapeMismatch(f"conv1d_same: x {x.shape}, w {w.shape}, b {b.shape}")
    xv = np.ascontiguousarray(x.values)
    out = Tensor(kernels.conv1d_same_forward(xv, w.values, b.values))
    graph = _start(out, (x, w, b))
    if graph is not None:

        def bwd():
            if out.grad is None:
                return
            dx, dw, db = kernels.conv1d_same_backward(
                xv, w.values, np.ascontiguousarray(out.grad)
            )
            if x.requires_grad:
                x.accumulate(dx)
            if w.requires_grad:
                w.accumulate(dw)
            if b.requires_grad:
                b.accumulate(db)

        graph.record("conv1d_same", bwd, (x, w, b))
    return out


# ---------------------------------------------------------------------------
# Recurrence
# ---------------------------------------------------------------------------


def _check_gru_shapes(c: int, d: int, wx: Tensor, wh: Tensor, b: Tensor) -> None:
    if wx.shape != (c, 3 * d) or wh.shape != (d, 3 * d) or b.shape != (3 * d,):
        raise ShapeMismatch(
            f"gru: input dim {c}, hidden dim {d}, wx {wx.shape}, wh {wh.shape}, b {b.shape}"
        )


def gru_sequence(x: Tensor, h0: Tensor, wx: Tensor, wh: Tensor, b: Tensor) -> Tensor:
    """Scan a GRU over the rows of x. Returns all hidden states (N, d).

    Gates: z = sigmoid(..), r = sigmoid(..), candidate = tanh(..);
    h_new = (1 - z) * h_prev + z * candidate.
    """
    d = h0.shape[0]
    _check_gru_shapes(x.values.shape[-1], d, wx, wh, b)
    xv = np.ascontiguousarray(x.values)
    xw = np.ascontiguousarray(xv @ wx.values)
    h, z, r, hc = kernels.gru_scan_forward(xw, h0.values, wh.values, b.values)
    out = Tensor(h)
    graph = _start(out, (x, h0, wx, wh, b))
    if graph is not None:

        def bwd():
            if out.grad is None:
                return
            dxw, dh0, dwh, db = kernels.gru_scan_backward(
                np.ascontiguousarray(out.grad), h, h0.values, z, r, hc, wh.values
            )
            if x.requires_grad:
                x.accumulate(dxw @ wx.values.T)
            if h0.requires_grad:
                h0.accumulate(dh0)
            if wx.requires_grad:
                wx.accumulate(xv.T @ dxw)
            if wh.requires_grad:
                wh.accumulate(dwh)
            if b.requires_grad:
                b.accumulate(db)

        graph.record("gru_sequence", bwd, (x, h0, wx, wh, b))
    return out


def gru_cell(h_prev: Tensor, x: Tensor, wx: Tensor, wh: Tensor, b: Tensor) -> Tensor:
    """One GRU step on a single input vector x: (c,) with state h_prev: (d,)."""
    if x.values.ndim != 1 or h_prev.values.ndim != 1:
        raise ShapeMismatch("gru_cell expects vector input and state")
    row = reshape(x, (1, x.shape[0]))
    h = gru_sequence(row, h_prev, wx, wh, b)
    return reshape(h, (h_prev.shape[0],))


# ---------------------------------------------------------------------------
# Attention pieces
# ---------------------------------------------------------------------------


def softmax(e: Tensor, mask: np.ndarray | None = None) -> Tensor:
    """Stable softmax over a vector; masked-out entries get weight 0."""
    if e.values.ndim != 1:
        raise ShapeMismatch(f"softmax expects a vector, got {e.shape}")
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != e.values.shape:
            raise ShapeMismatch(f"softmax mask {mask.shape} vs scores {e.shape}")
        if not mask.any():
            raise AllMasked("softmax: every entry is masked")
    scores = e.values if mask is None else e.values[mask]
    shifted = np.exp(scores - scores.max())
    probs = shifted / shifted.sum()
    if mask is None:
        values = probs
    else:
        values = np.zeros_like(e.values)
        values[mask] = probs
    out = Tensor(values)
    graph = _start(out, (e,))
    if graph is not None:

        def bwd():
            if out.grad is not None:
                g = out.grad
                inner = float(np.dot(g, values))
                e.accumulate(values * (g - inner))

        graph.record("softmax", bwd, (e,))
    return out


def normalize_sum(e: Tensor) -> Tensor:
    """Literal score normalization e_n / sum(e): no exponential, unstable by
    design; kept as an ablation of the softmax."""
    if e.values.ndim != 1:
        raise ShapeMismatch(f"normalize_sum expects a vector, got {e.shape}")
    total = float(e.values.sum())
    out = Tensor(e.values / total)
    graph = _start(out, (e,))
    if graph is not None:

        def bwd():
            if out.grad is not None:
                g = out.grad
                inner = float(np.dot(g, out.values))
                e.accumulate((g - inner) / total)

        graph.record("normalize_sum", bwd, (e,))
    return out


def weighted_sum(weights: Tensor, rows: Tensor) -> Tensor:
    """sum_n weights[n] * rows[n]; weights (N,), rows (N, d) -> (d,)."""
    if weights.values.ndim != 1 or weights.shape[0] != rows.shape[0]:
        raise ShapeMismatch(f"weighted_sum: {weights.shape} vs {rows.shape}")
    out = Tensor(weights.values @ rows.values)
    graph = _start(out, (weights, rows))
    if graph is not None:

        def bwd():
            if out.grad is None:
                return
            if weights.requires_grad:
                weights.accumulate(rows.values @ out.grad)
            if rows.requires_grad:
                rows.accumulate(np.outer(weights.values, out.grad))

        graph.record("weighted_sum", bwd, (weights, rows))
    return out


# ---------------------------------------------------------------------------
# Loss
# ---------------------------------------------------------------------------


def binary_cross_entropy(p: Tensor, y: int) -> Tensor:
    """-[y log p + (1-y) log(1-p)] with p clamped away from {0, 1}.

    Gradient is zero in the clamped region (the clip is part of the op).
    """
    pv = float(p.values)
    pc = min(max(pv, PROB_CLAMP), 1.0 - PROB_CLAMP)
    out = Tensor(-(y * np.log(pc) + (1 - y) * np.log(1.0 - pc)))
    graph = _start(out, (p,))
    if graph is not None:
        inside = PROB_CLAMP < pv < 1.0 - PROB_CLAMP

        def bwd():
            if out.grad is not None and inside:
                p.accumulate(float(out.grad) * (pc - y) / (pc * (1.0 - pc)))

        graph.record("binary_cross_entropy", bwd, (p,))
    return out
