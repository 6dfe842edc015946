"""Turn rallies into the model's numeric inputs.

Per shot: the shot-type embedding is scaled by a temporal score (a learned
sigmoid of the shot's relative position in rally time), then concatenated
with three location embeddings (hit / player / opponent area, one shared
table) and three binary flags (back hand, around head, is-target-player).
Per rally: a two-dimensional context vector holding the target's score
difference and the current run of consecutive points.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from .autodiff import Tensor, parameter
from .autodiff import ops
from .blsr import Instance, PlayerId, Rally, Shot, ShotType, N_AREAS, target_score_diff

N_SHOT_TYPES = len(ShotType)
TYPE_INDEX = {t: i for i, t in enumerate(ShotType)}

EMBED_INIT_SCALE = 0.05  # tables start uniform on [-scale, scale]


class DecreasingTimestamps(ValueError):
    pass


@dataclass
class EncoderParams:
    """Learnable lookup tables for shot encoding."""

    location_table: Tensor  # (16, d_loc), shared by all three area fields
    type_table: Tensor  # (18, d_type)
    theta: Tensor  # (18,) per-type intercept of the temporal score
    mu: Tensor  # (18,) per-type slope of the temporal score

    @classmethod
    def init(cls, rng: np.random.Generator, d_loc: int = 10, d_type: int = 15) -> "EncoderParams":
        return cls(
            location_table=parameter(
                rng.uniform(-EMBED_INIT_SCALE, EMBED_INIT_SCALE, size=(N_AREAS, d_loc)),
                "location_table",
            ),
            type_table=parameter(
                rng.uniform(-EMBED_INIT_SCALE, EMBED_INIT_SCALE, size=(N_SHOT_TYPES, d_type)),
                "type_table",
            ),
            theta=parameter(np.zeros(N_SHOT_TYPES), "theta"),
            mu=parameter(np.zeros(N_SHOT_TYPES), "mu"),
        )

    @property
    def d_loc(self) -> int:
        return self.location_table.shape[1]

    @property
    def d_type(self) -> int:
        return self.type_table.shape[1]

    @property
    def d_shot(self) -> int:
        return self.d_type + 3 * self.d_loc + 3

    def named_tensors(self) -> dict[str, Tensor]:
        return {
            "location_table": self.location_table,
            "type_table": self.type_table,
            "theta": self.theta,
            "mu": self.mu,
        }


@dataclass
class EncodedRally:
    features: Tensor  # (N, d_shot)
    time_proportions: np.ndarray  # (N,) in [0, 1]
    temporal_scores: Tensor  # (N,) in (0, 1)


@dataclass(frozen=True)
class RallyContext:
    score_diff: int
    consecutive_points: int

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.score_diff, self.consecutive_points], dtype=np.float64)


def time_proportions(timestamps: Sequence[float]) -> np.ndarray:
    """Map timestamps to [0, 1] positions within the rally.

    The first shot maps to 0 and the last to 1; a zero time span (including
    single-shot rallies) maps everything to 0.
    """
    t = np.asarray(timestamps, dtype=np.float64)
    if t.size == 0:
        raise ValueError("need at least one timestamp")
    if np.any(np.diff(t) < 0):
        raise DecreasingTimestamps(f"timestamps must be non-decreasing: {t.tolist()}")
    span = t[-1] - t[0]
    if span <= 0.0:
        return np.zeros_like(t)
    return (t - t[0]) / span


def temporal_scores(types: Sequence[ShotType], taus: np.ndarray, params: EncoderParams) -> Tensor:
    """delta_n = sigmoid(theta[type_n] + mu[type_n] * tau_n), in (0, 1)."""
    idx = np.array([TYPE_INDEX[t] for t in types], dtype=np.intp)
    return _temporal_scores_by_index(idx, taus, params)


def _temporal_scores_by_index(
    type_idx: np.ndarray, taus: np.ndarray, params: EncoderParams
) -> Tensor:
    theta_n = ops.embedding(params.theta, type_idx)
    mu_n = ops.embedding(params.mu, type_idx)
    tau = ops.constant(taus)
    return ops.sigmoid(ops.add(theta_n, ops.mul(mu_n, tau)))


@lru_cache(maxsize=16384)
def _shot_arrays(shots: tuple[Shot, ...], target: PlayerId):
    """Parameter-independent per-rally arrays; cached across epochs."""
    taus = time_proportions([s.timestamp for s in shots])
    type_idx = np.array([TYPE_INDEX[s.shot_type] for s in shots], dtype=np.intp)
    area_idx = tuple(
        np.array([getattr(s, field) - 1 for s in shots], dtype=np.intp)
        for field in ("hit_area", "player_area", "opponent_area")
    )
    flags = np.array(
        [
            [float(s.back_hand), float(s.around_head), float(s.player == target)]
            for s in shots
        ],
        dtype=np.float64,
    )
    return taus, type_idx, area_idx, flags


def encode_rally(
    rally: Rally | Instance,
    params: EncoderParams,
    target: PlayerId,
    temporal: bool = True,
) -> EncodedRally:
    """Build the (N, d_shot) feature matrix for one rally.

    Row layout: scaled type embedding | hit-area | player-area |
    opponent-area embeddings | back_hand, around_head, is_target flags.
    With `temporal` off the type embedding is used unscaled.
    """
    shots: tuple[Shot, ...] = rally.shots
    taus, type_idx, area_idx, flags = _shot_arrays(shots, target)
    if temporal:
        delta = _temporal_scores_by_index(type_idx, taus, params)
    else:
        delta = ops.constant(np.ones(len(shots)))

    type_emb = ops.embedding(params.type_table, type_idx)
    scaled_type = ops.scale_rows(delta, type_emb)

    blocks = [scaled_type]
    for idx in area_idx:
        blocks.append(ops.embedding(params.location_table, idx))
    blocks.append(ops.constant(flags))
    features = ops.concat(blocks, axis=1)
    return EncodedRally(features=features, time_proportions=taus, temporal_scores=delta)


def rally_context(
    scores: tuple[int, int],
    history: Sequence[PlayerId] | None,
    target: PlayerId,
) -> RallyContext:
    """Game-state context at rally start.

    `scores` is (roundscore_A, roundscore_B); `history` lists the winners of
    the preceding rallies in the same set, most recent last. The run length
    of the latest consecutive scorer is signed positive for the target.
    """
    roundscore_a, roundscore_b = scores
    if roundscore_a < 0 or roundscore_b < 0:
        raise ValueError("scores must be non-negative")
    diff = target_score_diff(roundscore_a, roundscore_b, target)

    run = 0
    if history:
        last_winner = history[-1]
        for winner in reversed(history):
            if winner != last_winner:
                break
            run += 1
        if last_winner != target:
            run = -run
    return RallyContext(score_diff=diff, consecutive_points=run)


__all__ = [
    "EncoderParams",
    "EncodedRally",
    "RallyContext",
    "DecreasingTimestamps",
    "TYPE_INDEX",
    "N_SHOT_TYPES",
    "time_proportions",
    "temporal_scores",
    "encode_rally",
    "rally_context",
]
