"""The rally outcome model.

Pipeline: encode shots -> two parallel 1-D CNNs whose outputs are merged
by row parity (odd rows from the first net, even rows from the second, so
each net tracks one player's strokes) -> bidirectional GRU over the merged
patterns -> additive attention over [pattern | hidden] rows -> sigmoid win
probability from the pooled vector joined with the rally context.

Every structural component can be toggled off independently, mirroring
the ablation grid: single CNN, no CNN (dense projection), no BiGRU, no
temporal score, mean pooling instead of attention, no rally context, and
a plain sum normalization of attention scores instead of softmax.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .autodiff import AdamState, Tensor, parameter
from .autodiff import ops
from .blsr import Instance, PlayerId, Rally
from .encoder import EncodedRally, EncoderParams, RallyContext, encode_rally, rally_context

WIN_THRESHOLD = 0.5
CHECKPOINT_FORMAT_VERSION = 1


@dataclass(frozen=True)
class ModelConfig:
    d_loc: int = 10
    d_type: int = 15
    d_cnn: int = 32
    d_gru: int = 32
    kernel_size: int = 3
    d_rally: int = 2
    reg_lambda: float = 0.01
    target: PlayerId = PlayerId.B
    use_two_cnns: bool = True
    use_cnn: bool = True
    use_bigru: bool = True
    use_temporal_score: bool = True
    use_attention: bool = True
    use_rally_input: bool = True
    linear_attention_norm: bool = False  # plain e/sum(e) instead of softmax

    def __post_init__(self):
        if self.kernel_size % 2 != 1:
            raise ValueError("kernel_size must be odd")
        if min(self.d_loc, self.d_type, self.d_cnn, self.d_gru) <= 0:
            raise ValueError("dimensions must be positive")
        if self.use_bigru and self.d_gru % 2 != 0:
            raise ValueError("d_gru must be even (two directions)")

    @property
    def d_shot(self) -> int:
        return self.d_type + 3 * self.d_loc + 3

    @property
    def d_pooled(self) -> int:
        return self.d_cnn + self.d_gru

    def to_dict(self) -> dict:
        doc = {}
        for f in fields(self):
            value = getattr(self, f.name)
            key = "lambda" if f.name == "reg_lambda" else f.name
            doc[key] = value.value if isinstance(value, PlayerId) else value
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "ModelConfig":
        known = {f.name for f in fields(cls)}
        kwargs = {}
        for key, value in doc.items():
            name = "reg_lambda" if key == "lambda" else key
            if name not in known:
                raise ValueError(f"unknown config key {key!r}")
            if name == "target":
                value = PlayerId(value)
            kwargs[name] = value
        return cls(**kwargs)


def _glorot(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int, fan_out: int):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


@dataclass
class ModelParams:
    """All learnable tensors; which exist depends on the config toggles."""

    config: ModelConfig
    encoder: EncoderParams
    tensors: dict[str, Tensor] = field(default_factory=dict)
    _trainable: list[Tensor] | None = field(default=None, init=False, repr=False)
    _weights: list[Tensor] | None = field(default=None, init=False, repr=False)

    @classmethod
    def init(cls, config: ModelConfig, seed: int = 0) -> "ModelParams":
        rng = np.random.Generator(np.random.PCG64(seed))
        encoder = EncoderParams.init(rng, d_loc=config.d_loc, d_type=config.d_type)
        params = cls(config=config, encoder=encoder)
        t = params.tensors
        k, d_shot, d_cnn, d_gru = (
            config.kernel_size,
            config.d_shot,
            config.d_cnn,
            config.d_gru,
        )

        def conv_init(name):
            t[f"{name}_w"] = parameter(
                _glorot(rng, (k, d_shot, d_cnn), k * d_shot, k * d_cnn), f"{name}_w"
            )
            t[f"{name}_b"] = parameter(np.zeros(d_cnn), f"{name}_b")

        if config.use_cnn:
            conv_init("conv1")
            if config.use_two_cnns:
                conv_init("conv2")
        else:
            t["proj_w"] = parameter(_glorot(rng, (d_shot, d_cnn), d_shot, d_cnn), "proj_w")
            t["proj_b"] = parameter(np.zeros(d_cnn), "proj_b")

        if config.use_bigru:
            d_dir = d_gru // 2
            for name in ("gru_fw", "gru_bw"):
                t[f"{name}_wx"] = parameter(
                    _glorot(rng, (d_cnn, 3 * d_dir), d_cnn, d_dir), f"{name}_wx"
                )
                t[f"{name}_wh"] = parameter(
                    _glorot(rng, (d_dir, 3 * d_dir), d_dir, d_dir), f"{name}_wh"
                )
                t[f"{name}_b"] = parameter(np.zeros(3 * d_dir), f"{name}_b")
        else:
            t["gruproj_w"] = parameter(_glorot(rng, (d_cnn, d_gru), d_cnn, d_gru), "gruproj_w")
            t["gruproj_b"] = parameter(np.zeros(d_gru), "gruproj_b")

        if config.use_attention:
            t["attn_w"] = parameter(
                _glorot(rng, (config.d_pooled, 1), config.d_pooled, 1), "attn_w"
            )
            t["attn_b"] = parameter(np.zeros(1), "attn_b")

        d_out = config.d_pooled + (config.d_rally if config.use_rally_input else 0)
        t["out_w"] = parameter(_glorot(rng, (d_out, 1), d_out, 1), "out_w")
        t["out_b"] = parameter(np.zeros(1), "out_b")

        if not config.use_temporal_score:
            # theta/mu never receive gradients without the temporal score
            encoder.theta = None  # type: ignore[assignment]
            encoder.mu = None  # type: ignore[assignment]
        return params

    def named_tensors(self) -> dict[str, Tensor]:
        named = {k: v for k, v in self.encoder.named_tensors().items() if v is not None}
        named.update(self.tensors)
        return named

    def trainable(self) -> list[Tensor]:
        if self._trainable is None:
            self._trainable = list(self.named_tensors().values())
        return self._trainable

    def weight_matrices(self) -> list[Tensor]:
        """Tensors covered by L2 regularization: weight matrices only
        (no biases, no embedding tables)."""
        if self._weights is None:
            keys = (
                "conv1_w",
                "conv2_w",
                "proj_w",
                "gru_fw_wx",
                "gru_fw_wh",
                "gru_bw_wx",
                "gru_bw_wh",
                "gruproj_w",
                "attn_w",
                "out_w",
            )
            self._weights = [self.tensors[k] for k in keys if k in self.tensors]
        return self._weights

    def n_parameters(self) -> int:
        return sum(t.values.size for t in self.named_tensors().values())

    def zero_grads(self) -> None:
        for t in self.trainable():
            t.zero_grad()

    def copy(self) -> "ModelParams":
        enc = self.encoder
        return ModelParams(
            config=self.config,
            encoder=EncoderParams(
                location_table=enc.location_table.copy(),
                type_table=enc.type_table.copy(),
                theta=enc.theta.copy() if enc.theta is not None else None,
                mu=enc.mu.copy() if enc.mu is not None else None,
            ),
            tensors={k: v.copy() for k, v in self.tensors.items()},
        )


# ---------------------------------------------------------------------------
# Forward pieces
# ---------------------------------------------------------------------------


def alternate_merge(p_hat: Tensor, p_bar: Tensor) -> Tensor:
    """Merge two pattern sequences by row parity (1-indexed odd rows from
    the first)."""
    return ops.interleave_rows(p_hat, p_bar)


def extract_patterns(enc: EncodedRally | Tensor, params: ModelParams, cfg: ModelConfig) -> Tensor:
    """Short-term pattern rows, one per shot: conv+ReLU per net, merged."""
    x = enc.features if isinstance(enc, EncodedRally) else enc
    t = params.tensors
    if not cfg.use_cnn:
        return ops.dense(x, t["proj_w"], t["proj_b"])
    p_hat = ops.relu(ops.conv1d_same(x, t["conv1_w"], t["conv1_b"]))
    if not cfg.use_two_cnns:
        return p_hat
    p_bar = ops.relu(ops.conv1d_same(x, t["conv2_w"], t["conv2_b"]))
    return alternate_merge(p_hat, p_bar)


def encode_patterns(patterns: Tensor, params: ModelParams, cfg: ModelConfig) -> Tensor:
    """Long-term states: forward and backward GRU halves, concatenated."""
    t = params.tensors
    if not cfg.use_bigru:
        return ops.dense(patterns, t["gruproj_w"], t["gruproj_b"])
    d_dir = cfg.d_gru // 2
    h0 = ops.constant(np.zeros(d_dir))
    fw = ops.gru_sequence(patterns, h0, t["gru_fw_wx"], t["gru_fw_wh"], t["gru_fw_b"])
    bw = ops.flip_rows(
        ops.gru_sequence(
            ops.flip_rows(patterns), h0, t["gru_bw_wx"], t["gru_bw_wh"], t["gru_bw_b"]
        )
    )
    return ops.concat([fw, bw], axis=1)


def attend(
    patterns: Tensor, hidden: Tensor, params: ModelParams, cfg: ModelConfig
) -> tuple[Tensor, Tensor]:
    """Attention weights over steps and the pooled rally representation."""
    rows = ops.concat([patterns, hidden], axis=1)
    n = rows.shape[0]
    if not cfg.use_attention:
        alpha = ops.constant(np.full(n, 1.0 / n))
    else:
        t = params.tensors
        scores = ops.reshape(ops.dense(rows, t["attn_w"], t["attn_b"]), (n,))
        alpha = ops.normalize_sum(scores) if cfg.linear_attention_norm else ops.softmax(scores)
    pooled = ops.weighted_sum(alpha, rows)
    return alpha, pooled


def predict_win(
    pooled: Tensor, context: RallyContext, params: ModelParams, cfg: ModelConfig
) -> Tensor:
    """Win probability of the target player, in (0, 1)."""
    t = params.tensors
    if cfg.use_rally_input:
        joined = ops.concat([pooled, ops.constant(context.vector)], axis=0)
    else:
        joined = pooled
    return ops.reshape(ops.dense(joined, t["out_w"], t["out_b"], activation="sigmoid"), ())


def predict_label(p_win: float) -> int:
    return int(p_win > WIN_THRESHOLD)


@dataclass
class ForwardTrace:
    """Cached intermediates of one forward pass."""

    encoded: EncodedRally
    patterns: Tensor  # (N, d_cnn)
    hidden: Tensor  # (N, d_gru)
    alpha: Tensor  # (N,)
    pooled: Tensor  # (d_cnn + d_gru,)
    context: RallyContext
    p_win: Tensor  # scalar

    @property
    def attention(self) -> np.ndarray:
        return self.alpha.values

    @property
    def win_probability(self) -> float:
        return float(self.p_win.values)


def forward(
    instance: Instance | Rally,
    params: ModelParams,
    cfg: ModelConfig,
    context: RallyContext | None = None,
) -> ForwardTrace:
    """Full pipeline on one rally; records on the active graph if any."""
    if context is None:
        if isinstance(instance, Rally):
            scores = (instance.info.roundscore_a, instance.info.roundscore_b)
        else:
            scores = (instance.roundscore_a, instance.roundscore_b)
        context = rally_context(scores, None, cfg.target)
    encoded = encode_rally(instance, params.encoder, cfg.target, temporal=cfg.use_temporal_score)
    patterns = extract_patterns(encoded, params, cfg)
    hidden = encode_patterns(patterns, params, cfg)
    alpha, pooled = attend(patterns, hidden, params, cfg)
    p_win = predict_win(pooled, context, params, cfg)
    return ForwardTrace(
        encoded=encoded,
        patterns=patterns,
        hidden=hidden,
        alpha=alpha,
        pooled=pooled,
        context=context,
        p_win=p_win,
    )


def compute_loss(
    p_win: Tensor, y: int, params: ModelParams, cfg: ModelConfig, reg_scale: float = 1.0
) -> tuple[Tensor, Tensor, Tensor]:
    """(total, cross-entropy, regularization); total = ce + lambda * reg.

    Regularization sums squared entries of the weight matrices only.
    `reg_scale` lets a per-instance training step carry its share of the
    dataset-level penalty (the summed objective counts lambda * reg once,
    so each of n per-instance steps should apply lambda * reg / n).
    """
    ce = ops.binary_cross_entropy(p_win, y)
    reg = ops.sum_squares_total(params.weight_matrices())
    total = ops.add(ce, ops.scale(reg, cfg.reg_lambda * reg_scale))
    return total, ce, reg


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------


def checkpoint_document(
    params: ModelParams, adam: AdamState | None = None, meta: dict | None = None
) -> dict:
    return {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "config": params.config.to_dict(),
        "params": {
            name: {"shape": list(t.shape), "values": t.values.ravel().tolist()}
            for name, t in params.named_tensors().items()
        },
        "adam": adam.to_dict() if adam is not None else None,
        "meta": meta or {},
    }


def save_checkpoint(
    path: str | Path,
    params: ModelParams,
    adam: AdamState | None = None,
    meta: dict | None = None,
) -> None:
    doc = checkpoint_document(params, adam, meta)
    Path(path).write_text(json.dumps(doc, separators=(",", ":")) + "\n", encoding="utf-8")


def load_checkpoint(path: str | Path) -> tuple[ModelParams, AdamState | None, dict]:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    version = doc.get("format_version")
    if version != CHECKPOINT_FORMAT_VERSION:
        raise ValueError(f"unsupported checkpoint format_version {version!r}")
    config = ModelConfig.from_dict(doc["config"])
    params = ModelParams.init(config, seed=0)
    stored = doc["params"]
    expected = set(params.named_tensors())
    if set(stored) != expected:
        raise ValueError(
            f"checkpoint tensors {sorted(stored)} do not match config {sorted(expected)}"
        )
    for name, tensor in params.named_tensors().items():
        entry = stored[name]
        values = np.asarray(entry["values"], dtype=np.float64).reshape(entry["shape"])
        if values.shape != tensor.values.shape:
            raise ValueError(f"tensor {name!r} has shape {values.shape}, expected {tensor.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError(f"tensor {name!r} contains non-finite values")
        tensor.values = values
    adam = None
    if doc.get("adam") is not None:
        shapes = {name: t.values.shape for name, t in params.named_tensors().items()}
        adam = AdamState.from_dict(doc["adam"], shapes)
    return params, adam, doc.get("meta", {})


__all__ = [
    "ModelConfig",
    "ModelParams",
    "ForwardTrace",
    "WIN_THRESHOLD",
    "alternate_merge",
    "extract_patterns",
    "encode_patterns",
    "attend",
    "predict_win",
    "predict_label",
    "forward",
    "compute_loss",
    "checkpoint_document",
    "save_checkpoint",
    "load_checkpoint",
]
