"""rallylens: badminton rally outcome modeling and shot influence analysis.

Parses and validates BLSR event streams, trains a CNN + BiGRU + attention
model on rally outcomes with a from-scratch reverse-mode tape, and turns
attention weights into per-shot influence reports.
"""

from .blsr import (
    Dataset,
    EndReason,
    Instance,
    PlayerId,
    Rally,
    RallyInfo,
    Shot,
    ShotType,
    parse_dataset,
    serialize_dataset,
    strip_outcome,
    validate_rally,
)
from .encoder import EncoderParams, RallyContext, encode_rally, rally_context
from .influence import InfluenceReport, rank_rallies, score_shots
from .model import (
    ModelConfig,
    ModelParams,
    ForwardTrace,
    forward,
    load_checkpoint,
    save_checkpoint,
)
from .synth import SynthConfig, generate
from .trainer import SplitSpec, TrainReport, auc, brier, build_examples, split_by_match, train

__version__ = "0.1.0"

__all__ = [
    "Dataset",
    "EndReason",
    "Instance",
    "PlayerId",
    "Rally",
    "RallyInfo",
    "Shot",
    "ShotType",
    "parse_dataset",
    "serialize_dataset",
    "strip_outcome",
    "validate_rally",
    "EncoderParams",
    "RallyContext",
    "encode_rally",
    "rally_context",
    "InfluenceReport",
    "rank_rallies",
    "score_shots",
    "ModelConfig",
    "ModelParams",
    "ForwardTrace",
    "forward",
    "load_checkpoint",
    "save_checkpoint",
    "SynthConfig",
    "generate",
    "SplitSpec",
    "TrainReport",
    "auc",
    "brier",
    "build_examples",
    "split_by_match",
    "train",
    "__version__",
]
