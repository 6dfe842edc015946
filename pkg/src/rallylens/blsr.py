"""BLSR (Badminton Language from Shot to Rally) data model and file formats.

A rally is an ordered sequence of shots plus rally-level bookkeeping. Each
shot carries eight attributes: the hitting player, a timestamp (seconds from
match start), one of 18 shot types, two hand flags, and three court areas
drawn from a 16-cell half-court grid. Rally info records the score at rally
start, the rally winner, and one of five end reasons.

Grid convention: the half court (including the outside ring) is a 4x4 grid
numbered row-major 1..16, row 1 nearest the net, column 1 leftmost when
facing the net. Both sides of the court map onto the same grid, mirrored
about the net.

Two on-disk encodings are supported:

* CSV - one row per shot, rally info repeated on every row. Header::

    rally_id,match_id,shot_index,player,timestamp,type,back_hand,
    around_head,hit_area,player_area,opponent_area,roundscore_A,
    roundscore_B,getpoint_player,end_reason

  Booleans are written as 0/1, encoding is UTF-8, line endings are "\\n".

* JSONL - one rally object per line with a ``shots`` array; shot objects
  use the same field names as the CSV columns (minus ``shot_index``, which
  is implied by array order), and rally info fields sit at the top level.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from enum import Enum


class PlayerId(str, Enum):
    """The two players of a singles match. B is the conventional target."""

    A = "A"
    B = "B"

    def opponent(self) -> "PlayerId":
        return PlayerId.B if self is PlayerId.A else PlayerId.A


class ShotType(str, Enum):
    """Closed vocabulary of 18 stroke categories."""

    NET_SHOT = "net shot"
    RETURN_NET = "return net"
    SMASH = "smash"
    WRIST_SMASH = "wrist smash"
    LOB = "lob"
    DEFENSIVE_RETURN_LOB = "defensive return lob"
    CLEAR = "clear"
    DRIVE = "drive"
    DRIVEN_FLIGHT = "driven flight"
    BACK_COURT_DRIVE = "back-court drive"
    DROP = "drop"
    PASSIVE_DROP = "passive drop"
    PUSH = "push"
    RUSH = "rush"
    DEFENSIVE_RETURN_DRIVE = "defensive return drive"
    CROSS_COURT_NET_SHOT = "cross-court net shot"
    SHORT_SERVICE = "short service"
    LONG_SERVICE = "long service"


SERVICE_TYPES = frozenset({ShotType.SHORT_SERVICE, ShotType.LONG_SERVICE})

N_AREAS = 16


class EndReason(str, Enum):
    """Closed vocabulary of 5 rally-ending outcomes."""

    IN = "in"
    OUT = "out"
    TOUCH_NET = "touch net"
    NOT_PASS_OVER_NET = "not pass over net"
    MISJUDGE = "misjudge"


@dataclass(frozen=True)
class Shot:
    """One labeled hit event (the atomic BLSR record)."""

    player: PlayerId
    timestamp: float
    shot_type: ShotType
    back_hand: bool
    around_head: bool
    hit_area: int
    player_area: int
    opponent_area: int


@dataclass(frozen=True)
class RallyInfo:
    """Rally-level bookkeeping; scores are the state at rally start."""

    roundscore_a: int
    roundscore_b: int
    getpoint_player: PlayerId
    end_reason: EndReason


@dataclass(frozen=True)
class Rally:
    rally_id: str
    match_id: str
    shots: tuple[Shot, ...]
    info: RallyInfo


@dataclass(frozen=True)
class Dataset:
    rallies: tuple[Rally, ...]
    matches: tuple[str, ...]

    def __len__(self) -> int:
        return len(self.rallies)

    def by_match(self) -> dict[str, list[Rally]]:
        """Rallies grouped by match, preserving dataset order."""
        groups: dict[str, list[Rally]] = {m: [] for m in self.matches}
        for rally in self.rallies:
            groups[rally.match_id].append(rally)
        return groups


@dataclass(frozen=True)
class Instance:
    """A learning instance: a rally with its outcome structurally removed.

    Only the pre-rally scores survive as context; the label is 1 iff the
    target player won the rally. There is deliberately no end-reason or
    winner field here, so outcome information cannot leak into a model.
    """

    rally_id: str
    match_id: str
    shots: tuple[Shot, ...]
    roundscore_a: int
    roundscore_b: int
    label: int


# ---------------------------------------------------------------------------
# Parse errors
# ---------------------------------------------------------------------------


class BlsrError(Exception):
    """Base for all BLSR parse failures; carries row number and field."""

    def __init__(self, message: str, row: int, field: str):
        super().__init__(f"row {row}, field '{field}': {message}")
        self.row = row
        self.field = field


class UnknownShotType(BlsrError):
    pass


class UnknownEndReason(BlsrError):
    pass


class AreaOutOfRange(BlsrError):
    pass


class MissingField(BlsrError):
    pass


class DuplicateShotIndex(BlsrError):
    pass


class InvalidFieldValue(BlsrError):
    """Malformed value outside the dedicated error classes above."""


# ---------------------------------------------------------------------------
# Violations (data quality findings, not exceptions)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Violation:
    """One broken rally invariant; shot_index is 1-based."""

    rule: str
    shot_index: int
    message: str


CSV_HEADER = [
    "rally_id",
    "match_id",
    "shot_index",
    "player",
    "timestamp",
    "type",
    "back_hand",
    "around_head",
    "hit_area",
    "player_area",
    "opponent_area",
    "roundscore_A",
    "roundscore_B",
    "getpoint_player",
    "end_reason",
]

_SHOT_JSON_FIELDS = [
    "player",
    "timestamp",
    "type",
    "back_hand",
    "around_head",
    "hit_area",
    "player_area",
    "opponent_area",
]


def _parse_player(raw: str, row: int, field: str) -> PlayerId:
    try:
        return PlayerId(raw)
    except ValueError:
        raise InvalidFieldValue(f"player must be 'A' or 'B', got {raw!r}", row, field) from None


def _parse_shot_type(raw: str, row: int) -> ShotType:
    try:
        return ShotType(raw)
    except ValueError:
        raise UnknownShotType(f"unknown shot type {raw!r}", row, "type") from None


def _parse_end_reason(raw: str, row: int) -> EndReason:
    try:
        return EndReason(raw)
    except ValueError:
        raise UnknownEndReason(f"unknown end reason {raw!r}", row, "end_reason") from None


def _parse_area(raw, row: int, field: str) -> int:
    try:
        value = int(raw)
    except (TypeError, ValueError):
        raise InvalidFieldValue(f"area must be an integer, got {raw!r}", row, field) from None
    if not 1 <= value <= N_AREAS:
        raise AreaOutOfRange(f"area {value} outside 1..{N_AREAS}", row, field)
    return value


def _parse_timestamp(raw, row: int) -> float:
    try:
        value = float(raw)
    except (TypeError, ValueError):
        raise InvalidFieldValue(f"timestamp must be a number, got {raw!r}", row, "timestamp") from None
    if not value >= 0.0:
        raise InvalidFieldValue(f"timestamp must be >= 0, got {value}", row, "timestamp")
    return value


def _parse_bool(raw, row: int, field: str) -> bool:
    if isinstance(raw, bool):
        return raw
    if raw in ("0", "1", 0, 1):
        return bool(int(raw))
    raise InvalidFieldValue(f"boolean must be 0 or 1, got {raw!r}", row, field)


def _parse_score(raw, row: int, field: str) -> int:
    try:
        value = int(raw)
    except (TypeError, ValueError):
        raise InvalidFieldValue(f"score must be an integer, got {raw!r}", row, field) from None
    if value < 0:
        raise InvalidFieldValue(f"score must be >= 0, got {value}", row, field)
    return value


class _RallyAccumulator:
    """Collects shots for one rally_id and checks cross-row consistency."""

    def __init__(self, rally_id: str, match_id: str, info: RallyInfo, first_row: int):
        self.rally_id = rally_id
        self.match_id = match_id
        self.info = info
        self.first_row = first_row
        self.shots: dict[int, Shot] = {}

    def add(self, index: int, shot: Shot, match_id: str, info: RallyInfo, row: int) -> None:
        if index in self.shots:
            raise DuplicateShotIndex(
                f"shot_index {index} repeated within rally {self.rally_id!r}", row, "shot_index"
            )
        if match_id != self.match_id:
            raise InvalidFieldValue(
                f"rally {self.rally_id!r} spans matches {self.match_id!r} and {match_id!r}",
                row,
                "match_id",
            )
        if info != self.info:
            raise InvalidFieldValue(
                f"rally info differs between rows of rally {self.rally_id!r}", row, "roundscore_A"
            )
        self.shots[index] = shot

    def build(self) -> Rally:
        ordered = tuple(self.shots[i] for i in sorted(self.shots))
        return Rally(self.rally_id, self.match_id, ordered, self.info)


def parse_dataset(text: str, format: str = "csv") -> Dataset:
    """Parse BLSR file content into a Dataset.

    Rows are grouped by rally_id; shots are ordered by shot index, rallies
    by first timestamp within each match (matches keep file appearance
    order). Raises a BlsrError subclass naming row and field on bad input.
    """
    if format == "csv":
        accs = _parse_csv(text)
    elif format == "jsonl":
        accs = _parse_jsonl(text)
    else:
        raise ValueError(f"unknown format {format!r} (expected 'csv' or 'jsonl')")

    matches: list[str] = []
    for acc in accs.values():
        if acc.match_id not in matches:
            matches.append(acc.match_id)

    match_rank = {m: i for i, m in enumerate(matches)}
    rallies = sorted(
        (acc.build() for acc in accs.values()),
        key=lambda r: (match_rank[r.match_id], r.shots[0].timestamp, r.rally_id),
    )
    return Dataset(rallies=tuple(rallies), matches=tuple(matches))


def _require(record: dict, field: str, row: int):
    value = record.get(field)
    if value is None or value == "":
        raise MissingField(f"missing value for {field!r}", row, field)
    return value


def _parse_csv(text: str) -> dict[str, _RallyAccumulator]:
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None:
        return {}
    missing_cols = [c for c in CSV_HEADER if c not in reader.fieldnames]
    if missing_cols:
        raise MissingField(f"header lacks column {missing_cols[0]!r}", 1, missing_cols[0])

    accs: dict[str, _RallyAccumulator] = {}
    for record in reader:
        row = reader.line_num
        if record.get(None):
            raise InvalidFieldValue("row has more cells than the header", row, "")
        rally_id = _require(record, "rally_id", row)
        match_id = _require(record, "match_id", row)
        try:
            index = int(_require(record, "shot_index", row))
        except ValueError:
            raise InvalidFieldValue(
                f"shot_index must be an integer, got {record['shot_index']!r}", row, "shot_index"
            ) from None
        shot = Shot(
            player=_parse_player(_require(record, "player", row), row, "player"),
            timestamp=_parse_timestamp(_require(record, "timestamp", row), row),
            shot_type=_parse_shot_type(_require(record, "type", row), row),
            back_hand=_parse_bool(_require(record, "back_hand", row), row, "back_hand"),
            around_head=_parse_bool(_require(record, "around_head", row), row, "around_head"),
            hit_area=_parse_area(_require(record, "hit_area", row), row, "hit_area"),
            player_area=_parse_area(_require(record, "player_area", row), row, "player_area"),
            opponent_area=_parse_area(_require(record, "opponent_area", row), row, "opponent_area"),
        )
        info = RallyInfo(
            roundscore_a=_parse_score(_require(record, "roundscore_A", row), row, "roundscore_A"),
            roundscore_b=_parse_score(_require(record, "roundscore_B", row), row, "roundscore_B"),
            getpoint_player=_parse_player(
                _require(record, "getpoint_player", row), row, "getpoint_player"
            ),
            end_reason=_parse_end_reason(_require(record, "end_reason", row), row),
        )
        if rally_id not in accs:
            accs[rally_id] = _RallyAccumulator(rally_id, match_id, info, row)
        accs[rally_id].add(index, shot, match_id, info, row)
    return accs


def _parse_jsonl(text: str) -> dict[str, _RallyAccumulator]:
    accs: dict[str, _RallyAccumulator] = {}
    for row, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise InvalidFieldValue(f"invalid JSON: {exc.msg}", row, "") from None
        rally_id = str(_require(obj, "rally_id", row))
        match_id = str(_require(obj, "match_id", row))
        info = RallyInfo(
            roundscore_a=_parse_score(_require(obj, "roundscore_A", row), row, "roundscore_A"),
            roundscore_b=_parse_score(_require(obj, "roundscore_B", row), row, "roundscore_B"),
            getpoint_player=_parse_player(str(_require(obj, "getpoint_player", row)), row, "getpoint_player"),
            end_reason=_parse_end_reason(str(_require(obj, "end_reason", row)), row),
        )
        shots = obj.get("shots")
        if not shots:
            raise MissingField("rally object has no shots", row, "shots")
        if rally_id in accs:
            raise DuplicateShotIndex(f"rally {rally_id!r} appears on multiple lines", row, "rally_id")
        acc = _RallyAccumulator(rally_id, match_id, info, row)
        for index, raw in enumerate(shots, start=1):
            shot = Shot(
                player=_parse_player(str(_require(raw, "player", row)), row, "player"),
                timestamp=_parse_timestamp(_require(raw, "timestamp", row), row),
                shot_type=_parse_shot_type(str(_require(raw, "type", row)), row),
                back_hand=_parse_bool(_require(raw, "back_hand", row), row, "back_hand"),
                around_head=_parse_bool(_require(raw, "around_head", row), row, "around_head"),
                hit_area=_parse_area(_require(raw, "hit_area", row), row, "hit_area"),
                player_area=_parse_area(_require(raw, "player_area", row), row, "player_area"),
                opponent_area=_parse_area(_require(raw, "opponent_area", row), row, "opponent_area"),
            )
            acc.add(index, shot, match_id, info, row)
        accs[rally_id] = acc
    return accs


def serialize_dataset(dataset: Dataset, format: str = "csv") -> str:
    """Serialize a Dataset to canonical CSV or JSONL text.

    Output is deterministic: fixed column/key order, shot indices renumbered
    1..N, shortest round-trip float formatting for timestamps.
    """
    if format == "csv":
        return _serialize_csv(dataset)
    if format == "jsonl":
        return _serialize_jsonl(dataset)
    raise ValueError(f"unknown format {format!r} (expected 'csv' or 'jsonl')")


def _format_number(value: float) -> str:
    # repr() gives the shortest string that round-trips a float
    return repr(float(value))


def _serialize_csv(dataset: Dataset) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for rally in dataset.rallies:
        info = rally.info
        for index, shot in enumerate(rally.shots, start=1):
            writer.writerow(
                [
                    rally.rally_id,
                    rally.match_id,
                    index,
                    shot.player.value,
                    _format_number(shot.timestamp),
                    shot.shot_type.value,
                    int(shot.back_hand),
                    int(shot.around_head),
                    shot.hit_area,
                    shot.player_area,
                    shot.opponent_area,
                    info.roundscore_a,
                    info.roundscore_b,
                    info.getpoint_player.value,
                    info.end_reason.value,
                ]
            )
    return out.getvalue()


def _serialize_jsonl(dataset: Dataset) -> str:
    lines = []
    for rally in dataset.rallies:
        info = rally.info
        obj = {
            "rally_id": rally.rally_id,
            "match_id": rally.match_id,
            "roundscore_A": info.roundscore_a,
            "roundscore_B": info.roundscore_b,
            "getpoint_player": info.getpoint_player.value,
            "end_reason": info.end_reason.value,
            "shots": [
                {
                    "player": s.player.value,
                    "timestamp": s.timestamp,
                    "type": s.shot_type.value,
                    "back_hand": s.back_hand,
                    "around_head": s.around_head,
                    "hit_area": s.hit_area,
                    "player_area": s.player_area,
                    "opponent_area": s.opponent_area,
                }
                for s in rally.shots
            ],
        }
        lines.append(json.dumps(obj))
    return "".join(line + "\n" for line in lines)


def validate_rally(rally: Rally) -> list[Violation]:
    """Check rally invariants; an empty return means the rally is clean.

    Rules checked (shot indices 1-based):

    * empty_rally - a rally must contain at least one shot
    * service_type - shot 1 must be a short or long service
    * timestamp_order - timestamps must be non-decreasing
    * alternation - consecutive shots must come from different players
    * negative_timestamp / area_range - per-shot field bounds
    """
    violations: list[Violation] = []
    shots = rally.shots
    if not shots:
        return [Violation("empty_rally", 0, "rally has no shots")]

    if shots[0].shot_type not in SERVICE_TYPES:
        violations.append(
            Violation(
                "service_type",
                1,
                f"first shot must be a service, got {shots[0].shot_type.value!r}",
            )
        )
    for i, shot in enumerate(shots, start=1):
        if shot.timestamp < 0:
            violations.append(
                Violation("negative_timestamp", i, f"timestamp {shot.timestamp} < 0")
            )
        for field in ("hit_area", "player_area", "opponent_area"):
            area = getattr(shot, field)
            if not 1 <= area <= N_AREAS:
                violations.append(
                    Violation("area_range", i, f"{field} {area} outside 1..{N_AREAS}")
                )
    for i in range(1, len(shots)):
        if shots[i].timestamp < shots[i - 1].timestamp:
            violations.append(
                Violation(
                    "timestamp_order",
                    i + 1,
                    f"timestamp {shots[i].timestamp} precedes {shots[i - 1].timestamp}",
                )
            )
        if shots[i].player == shots[i - 1].player:
            violations.append(
                Violation(
                    "alternation",
                    i + 1,
                    f"player {shots[i].player.value} hit twice in a row",
                )
            )
    return violations


def validate_dataset(dataset: Dataset) -> dict[str, list[Violation]]:
    """Map of rally_id -> violations, only for rallies with findings."""
    result = {}
    for rally in dataset.rallies:
        violations = validate_rally(rally)
        if violations:
            result[rally.rally_id] = violations
    return result


def filter_valid(dataset: Dataset, drop_misjudge: bool = False) -> Dataset:
    """Drop rallies with violations (and optionally misjudge endings)."""
    kept = []
    for rally in dataset.rallies:
        if validate_rally(rally):
            continue
        if drop_misjudge and rally.info.end_reason is EndReason.MISJUDGE:
            continue
        kept.append(rally)
    return Dataset(rallies=tuple(kept), matches=dataset.matches)


def strip_outcome(rally: Rally, target: PlayerId) -> Instance:
    """Produce the learning instance for a rally.

    The winner and end reason are removed; label is 1 iff the target player
    took the point. Shots are passed through untouched.
    """
    return Instance(
        rally_id=rally.rally_id,
        match_id=rally.match_id,
        shots=rally.shots,
        roundscore_a=rally.info.roundscore_a,
        roundscore_b=rally.info.roundscore_b,
        label=int(rally.info.getpoint_player == target),
    )


def target_score_diff(roundscore_a: int, roundscore_b: int, target: PlayerId) -> int:
    """Target player's score minus the opponent's, at rally start."""
    if target is PlayerId.B:
        return roundscore_b - roundscore_a
    return roundscore_a - roundscore_b


__all__ = [
    "PlayerId",
    "ShotType",
    "SERVICE_TYPES",
    "N_AREAS",
    "EndReason",
    "Shot",
    "RallyInfo",
    "Rally",
    "Dataset",
    "Instance",
    "BlsrError",
    "UnknownShotType",
    "UnknownEndReason",
    "AreaOutOfRange",
    "MissingField",
    "DuplicateShotIndex",
    "InvalidFieldValue",
    "Violation",
    "CSV_HEADER",
    "parse_dataset",
    "serialize_dataset",
    "validate_rally",
    "validate_dataset",
    "filter_valid",
    "strip_outcome",
    "target_score_diff",
]
