"""Dataset splitting, the training loop, and evaluation metrics.

Splits are by whole match so rallies from one match never straddle train
and test. Training runs one Adam step per rally in seeded shuffled order
and early-stops on validation AUC, restoring the best epoch's parameters.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .autodiff import AdamState, Graph, NonFinite, adam_step
from .blsr import Dataset, Instance, PlayerId, strip_outcome
from .encoder import RallyContext, rally_context
from .model import ModelConfig, ModelParams, compute_loss, forward


class TooFewMatches(ValueError):
    pass


class SingleClass(ValueError):
    pass


class TrainingDiverged(NonFinite):
    def __init__(self, epoch: int, message: str):
        super().__init__(f"training diverged in epoch {epoch}: {message}")
        self.epoch = epoch


@dataclass(frozen=True)
class SplitSpec:
    train_matches: tuple[str, ...]
    val_matches: tuple[str, ...]
    test_matches: tuple[str, ...]


@dataclass(frozen=True)
class Example:
    """One training example: outcome-stripped rally plus its game context."""

    instance: Instance
    context: RallyContext


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    val_auc: float
    val_bs: float


@dataclass
class TrainReport:
    seed: int
    history: list[EpochStats] = field(default_factory=list)
    best_epoch: int = 0
    best_val_auc: float = float("nan")
    test_auc: float | None = None
    test_bs: float | None = None
    wall_seconds: float = 0.0

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "history": [
                {
                    "epoch": h.epoch,
                    "train_loss": h.train_loss,
                    "val_auc": h.val_auc,
                    "val_bs": h.val_bs,
                }
                for h in self.history
            ],
            "best_epoch": self.best_epoch,
            "best_val_auc": self.best_val_auc,
            "test_auc": self.test_auc,
            "test_bs": self.test_bs,
            "wall_seconds": self.wall_seconds,
        }


def format_history(report: TrainReport) -> str:
    """Fixed-order metrics table: epoch, loss, val_auc, val_bs."""
    lines = [f"{'epoch':>5}  {'loss':>10}  {'val_auc':>8}  {'val_bs':>8}"]
    for h in report.history:
        lines.append(
            f"{h.epoch:>5}  {h.train_loss:>10.4f}  {h.val_auc:>8.4f}  {h.val_bs:>8.4f}"
        )
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# Splitting
# ---------------------------------------------------------------------------


def subset_by_matches(dataset: Dataset, match_ids) -> Dataset:
    wanted = set(match_ids)
    return Dataset(
        rallies=tuple(r for r in dataset.rallies if r.match_id in wanted),
        matches=tuple(m for m in dataset.matches if m in wanted),
    )


def split_by_match(
    dataset: Dataset,
    fractions: tuple[float, float, float] = (0.85, 0.05, 0.10),
    seed: int = 0,
    spec: SplitSpec | None = None,
) -> tuple[Dataset, Dataset, Dataset]:
    """Partition whole matches into train/val/test.

    With an explicit SplitSpec the partition is used as-is (after checking
    it is disjoint and covers the dataset). Otherwise val and test receive
    max(1, floor(fraction * n_matches)) matches each from a seeded shuffle
    and train takes the rest.
    """
    matches = list(dataset.matches)
    if spec is not None:
        groups = (spec.train_matches, spec.val_matches, spec.test_matches)
        listed = [m for g in groups for m in g]
        if len(listed) != len(set(listed)):
            raise ValueError("split spec assigns some match twice")
        if set(listed) != set(matches):
            raise ValueError("split spec does not cover the dataset's matches exactly")
        return tuple(subset_by_matches(dataset, g) for g in groups)  # type: ignore[return-value]

    if len(matches) < 3:
        raise TooFewMatches(f"need at least 3 matches, got {len(matches)}")
    f_train, f_val, f_test = fractions
    if not math.isclose(f_train + f_val + f_test, 1.0, abs_tol=1e-9):
        raise ValueError("fractions must sum to 1")
    n_val = max(1, int(f_val * len(matches)))
    n_test = max(1, int(f_test * len(matches)))
    n_train = len(matches) - n_val - n_test
    if n_train < 1:
        raise TooFewMatches("fractions leave no training matches")

    rng = np.random.Generator(np.random.PCG64(seed))
    shuffled = list(matches)
    rng.shuffle(shuffled)
    parts = (
        shuffled[:n_train],
        shuffled[n_train : n_train + n_val],
        shuffled[n_train + n_val :],
    )
    return tuple(subset_by_matches(dataset, p) for p in parts)  # type: ignore[return-value]


# ---------------------------------------------------------------------------
# Examples
# ---------------------------------------------------------------------------


def build_examples(dataset: Dataset, target: PlayerId) -> list[Example]:
    """Strip outcomes and attach per-rally contexts.

    The consecutive-points run for a rally is computed from the winners of
    preceding rallies of the same set (all legitimately known before the
    rally starts); a drop in the score total marks a new set.
    """
    examples: list[Example] = []
    for rallies in dataset.by_match().values():
        winners: list[PlayerId] = []
        prev_total = -1
        for rally in rallies:
            info = rally.info
            total = info.roundscore_a + info.roundscore_b
            if total < prev_total:
                winners = []
            prev_total = total
            context = rally_context(
                (info.roundscore_a, info.roundscore_b), winners, target
            )
            examples.append(Example(strip_outcome(rally, target), context))
            winners.append(info.getpoint_player)
    return examples


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------


def auc(scores, labels) -> float:
    """Pairwise-ranking AUC: P(score of a random positive > random negative),
    ties counted half."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    pos = y == 1
    n_pos = int(pos.sum())
    n_neg = s.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SingleClass("AUC needs at least one positive and one negative label")
    order = np.argsort(s, kind="mergesort")
    ranks = np.empty(s.size, dtype=np.float64)
    i = 0
    while i < s.size:
        j = i
        while j + 1 < s.size and s[order[j + 1]] == s[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0  # average 1-based rank
        i = j + 1
    pos_rank_sum = float(ranks[pos].sum())
    return (pos_rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def brier(scores, labels) -> float:
    """Mean squared difference between predicted probability and outcome."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    if s.size == 0:
        raise ValueError("brier needs at least one prediction")
    return float(np.mean((s - y) ** 2))


def predict_scores(examples: list[Example], params: ModelParams, cfg: ModelConfig) -> np.ndarray:
    return np.array(
        [forward(ex.instance, params, cfg, ex.context).win_probability for ex in examples]
    )


def evaluate(examples: list[Example], params: ModelParams, cfg: ModelConfig) -> tuple[float, float]:
    scores = predict_scores(examples, params, cfg)
    labels = np.array([ex.instance.label for ex in examples])
    return auc(scores, labels), brier(scores, labels)


# ---------------------------------------------------------------------------
# Training loop
# ---------------------------------------------------------------------------


def train(
    train_examples: list[Example],
    val_examples: list[Example],
    params: ModelParams,
    cfg: ModelConfig,
    epochs: int = 100,
    patience: int = 10,
    seed: int = 0,
) -> tuple[ModelParams, TrainReport]:
    """Fit with per-rally Adam steps; early-stop on validation AUC.

    Returns the parameters of the best-validation-AUC epoch (a copy; the
    passed-in params hold the last epoch's state) and the epoch history.
    """
    if epochs < 0:
        raise ValueError("epochs must be >= 0")
    report = TrainReport(seed=seed)
    start = time.perf_counter()
    if epochs == 0:
        report.wall_seconds = time.perf_counter() - start
        return params.copy(), report
    if not train_examples or not val_examples:
        raise ValueError("train and validation splits must be non-empty")

    rng = np.random.Generator(np.random.PCG64(seed))
    adam = AdamState()
    best_params = params.copy()
    best_auc = -np.inf
    stale = 0
    order = np.arange(len(train_examples))
    val_labels = np.array([ex.instance.label for ex in val_examples])
    # each per-instance step carries its share of the dataset-level penalty
    reg_scale = 1.0 / len(train_examples)

    for epoch in range(1, epochs + 1):
        rng.shuffle(order)
        loss_sum = 0.0
        try:
            for i in order:
                example = train_examples[i]
                params.zero_grads()
                with Graph() as graph:
                    trace = forward(example.instance, params, cfg, example.context)
                    total, _, _ = compute_loss(
                        trace.p_win, example.instance.label, params, cfg, reg_scale=reg_scale
                    )
                graph.backward(total)
                adam_step(params.trainable(), adam)
                loss_sum += float(total.values)
            val_scores = predict_scores(val_examples, params, cfg)
        except NonFinite as exc:
            raise TrainingDiverged(epoch, str(exc)) from exc

        val_auc = auc(val_scores, val_labels)
        val_bs = brier(val_scores, val_labels)
        report.history.append(
            EpochStats(epoch, loss_sum / len(train_examples), val_auc, val_bs)
        )
        if val_auc > best_auc:
            best_auc = val_auc
            report.best_epoch = epoch
            best_params = params.copy()
            stale = 0
        else:
            stale += 1
            if stale >= patience:
                break

    report.best_val_auc = best_auc
    report.wall_seconds = time.perf_counter() - start
    return best_params, report


__all__ = [
    "TooFewMatches",
    "SingleClass",
    "TrainingDiverged",
    "SplitSpec",
    "Example",
    "EpochStats",
    "TrainReport",
    "format_history",
    "subset_by_matches",
    "split_by_match",
    "build_examples",
    "auc",
    "brier",
    "predict_scores",
    "evaluate",
    "train",
]
