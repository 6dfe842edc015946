"""Per-shot influence reports from the model's attention weights.

The attention weight of pattern row n is attributed to shot n (patterns
are centered on their shot under same-padding). The optional spread mode
instead divides each weight evenly over the shots its convolution window
covers.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .blsr import Dataset, Instance, PlayerId, Rally, strip_outcome
from .encoder import RallyContext
from .model import ModelConfig, ModelParams, forward


@dataclass(frozen=True)
class ShotInfluence:
    shot_index: int  # 1-based
    player: PlayerId
    shot_type: str
    influence: float


@dataclass(frozen=True)
class InfluenceReport:
    rally_id: str
    entries: tuple[ShotInfluence, ...]
    p_win: float
    label: int | None

    def influences(self) -> np.ndarray:
        return np.array([e.influence for e in self.entries])

    def top_shot(self) -> ShotInfluence:
        return max(self.entries, key=lambda e: (e.influence, -e.shot_index))

    def to_dict(self) -> dict:
        return {
            "rally_id": self.rally_id,
            "p_win": self.p_win,
            "label": self.label,
            "shots": [
                {
                    "shot_index": e.shot_index,
                    "player": e.player.value,
                    "type": e.shot_type,
                    "influence": e.influence,
                }
                for e in self.entries
            ],
        }


class RallyRank(NamedTuple):
    rally_id: str
    peak_influence: float
    shot_index: int


def _spread_window(alpha: np.ndarray, kernel_size: int) -> np.ndarray:
    """Divide each weight evenly over the in-range shots of its window."""
    n = alpha.size
    half = (kernel_size - 1) // 2
    out = np.zeros(n)
    for i in range(n):
        lo = max(0, i - half)
        hi = min(n, i + half + 1)
        out[lo:hi] += alpha[i] / (hi - lo)
    return out


def score_shots(
    instance: Instance | Rally,
    params: ModelParams,
    cfg: ModelConfig,
    context: RallyContext | None = None,
    spread: bool = False,
) -> InfluenceReport:
    """Run the model on one rally and map attention weights onto shots."""
    trace = forward(instance, params, cfg, context)
    alpha = trace.attention.copy()
    if spread:
        alpha = _spread_window(alpha, cfg.kernel_size if cfg.use_cnn else 1)

    if isinstance(instance, Rally):
        label = int(instance.info.getpoint_player == cfg.target)
        rally_id = instance.rally_id
    else:
        label = instance.label
        rally_id = instance.rally_id
    entries = tuple(
        ShotInfluence(
            shot_index=i + 1,
            player=shot.player,
            shot_type=shot.shot_type.value,
            influence=float(alpha[i]),
        )
        for i, shot in enumerate(instance.shots)
    )
    return InfluenceReport(
        rally_id=rally_id, entries=entries, p_win=trace.win_probability, label=label
    )


def rank_rallies(
    dataset: Dataset, params: ModelParams, cfg: ModelConfig, top_k: int
) -> list[RallyRank]:
    """Rallies sorted by peak attention weight, descending; ties break on
    rally_id. top_k is clamped to the dataset size."""
    ranks = []
    for rally in dataset.rallies:
        report = score_shots(strip_outcome(rally, cfg.target), params, cfg)
        top = report.top_shot()
        ranks.append(RallyRank(rally.rally_id, top.influence, top.shot_index))
    ranks.sort(key=lambda r: (-r.peak_influence, r.rally_id))
    return ranks[: max(0, top_k)]


# ---------------------------------------------------------------------------
# Rendering
# ---------------------------------------------------------------------------


def format_text(report: InfluenceReport) -> str:
    """Aligned-column, human-readable view of one rally."""
    header = (
        f"rally {report.rally_id}  p_win={report.p_win:.4f}"
        + (f"  label={report.label}" if report.label is not None else "")
    )
    width = max(len(e.shot_type) for e in report.entries)
    lines = [header, f"{'shot':>4}  {'player':<6}  {'type':<{width}}  influence"]
    peak = report.top_shot().shot_index
    for e in report.entries:
        marker = " *" if e.shot_index == peak else ""
        lines.append(
            f"{e.shot_index:>4}  {e.player.value:<6}  {e.shot_type:<{width}}  "
            f"{e.influence:.4f}{marker}"
        )
    return "\n".join(lines)


def reports_to_json(reports: list[InfluenceReport]) -> str:
    return json.dumps([r.to_dict() for r in reports], indent=2) + "\n"


def chart_csv(report: InfluenceReport) -> str:
    """Per-rally bar chart data for external plotting."""
    lines = ["shot_index,influence"]
    for e in report.entries:
        lines.append(f"{e.shot_index},{e.influence!r}")
    return "\n".join(lines) + "\n"


__all__ = [
    "ShotInfluence",
    "InfluenceReport",
    "RallyRank",
    "score_shots",
    "rank_rallies",
    "format_text",
    "reports_to_json",
    "chart_csv",
]
