"""Synthetic BLSR dataset generator with a controllable planted signal.

Every generated rally is structurally valid: it opens with a service,
players strictly alternate, timestamps increase by 0.5-3.0 s steps, and
rally length follows a geometric distribution clipped to [1, 40]. Shot
types and court areas are drawn from the hand-authored plausibility tables
below (service pulls a lift or net reply, a smash pulls a defensive
return, and so on). This file is the source of truth for those tables.

The rally winner is planted: with probability ``signal_strength`` it is
decided by a fixed local rule over the final three shots, otherwise it is
uniform random. The rule (see :func:`planted_winner`):

* if exactly one player smashed (smash or wrist smash) within the final
  three shots, that player wins;
* otherwise the last hitter wins when the end reason is ``in`` and loses
  on any other reason.

Because every reply to a smash is a defensive stroke, the two players can
never both smash inside one three-shot window, so the first branch fires
whenever any smash lands there.

End reasons are sampled conditioned on the closing shot pair: a class
table (attack / control / lift) sets the base tendency and a list of
exception pairings flips it. That keeps the ``in``/``out`` split inferable
from the shot sequence itself, which is what makes high signal strengths
learnable at all, while remaining a joint property of the closing pair
rather than of any single shot. ``getpoint_player`` and ``end_reason``
are always mutually consistent with the winner.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .blsr import (
    Dataset,
    EndReason,
    PlayerId,
    Rally,
    RallyInfo,
    Shot,
    ShotType,
)

SMASH_TYPES = frozenset({ShotType.SMASH, ShotType.WRIST_SMASH})

SET_POINTS = 21  # a set ends when either player reaches this score
MAX_RALLY_LENGTH = 40


class InvalidConfig(ValueError):
    pass


@dataclass(frozen=True)
class SynthConfig:
    n_matches: int = 19
    rallies_per_match: int = 74
    mean_rally_length: float = 11.0
    signal_strength: float = 1.0
    seed: int = 0

    def validate(self) -> None:
        if self.n_matches < 1:
            raise InvalidConfig("n_matches must be >= 1")
        if self.rallies_per_match < 1:
            raise InvalidConfig("rallies_per_match must be >= 1")
        if self.mean_rally_length < 1:
            raise InvalidConfig("mean_rally_length must be >= 1")
        if not 0.0 <= self.signal_strength <= 1.0:
            raise InvalidConfig("signal_strength must lie in [0, 1]")


# ---------------------------------------------------------------------------
# Stroke plausibility tables
# ---------------------------------------------------------------------------

# Reply distribution given the previous shot's type. Weights need not be
# normalized. Replies to smashes are always defensive strokes; that single
# constraint is what keeps the planted rule's first branch unambiguous.
TRANSITIONS: dict[ShotType, list[tuple[ShotType, float]]] = {
    ShotType.SHORT_SERVICE: [
        (ShotType.PUSH, 0.25),
        (ShotType.NET_SHOT, 0.30),
        (ShotType.LOB, 0.25),
        (ShotType.RUSH, 0.20),
    ],
    ShotType.LONG_SERVICE: [
        (ShotType.CLEAR, 0.20),
        (ShotType.DROP, 0.20),
        (ShotType.SMASH, 0.60),
    ],
    ShotType.NET_SHOT: [
        (ShotType.RETURN_NET, 0.22),
        (ShotType.LOB, 0.50),
        (ShotType.PUSH, 0.10),
        (ShotType.RUSH, 0.08),
        (ShotType.CROSS_COURT_NET_SHOT, 0.10),
    ],
    ShotType.RETURN_NET: [
        (ShotType.LOB, 0.45),
        (ShotType.NET_SHOT, 0.27),
        (ShotType.PUSH, 0.18),
        (ShotType.RUSH, 0.10),
    ],
    ShotType.SMASH: [
        (ShotType.DEFENSIVE_RETURN_DRIVE, 0.55),
        (ShotType.DEFENSIVE_RETURN_LOB, 0.45),
    ],
    ShotType.WRIST_SMASH: [
        (ShotType.DEFENSIVE_RETURN_DRIVE, 0.55),
        (ShotType.DEFENSIVE_RETURN_LOB, 0.45),
    ],
    ShotType.LOB: [
        (ShotType.SMASH, 0.66),
        (ShotType.WRIST_SMASH, 0.16),
        (ShotType.CLEAR, 0.09),
        (ShotType.DROP, 0.09),
    ],
    ShotType.DEFENSIVE_RETURN_LOB: [
        (ShotType.SMASH, 0.66),
        (ShotType.WRIST_SMASH, 0.16),
        (ShotType.CLEAR, 0.07),
        (ShotType.DROP, 0.11),
    ],
    ShotType.CLEAR: [
        (ShotType.CLEAR, 0.10),
        (ShotType.SMASH, 0.55),
        (ShotType.WRIST_SMASH, 0.10),
        (ShotType.DROP, 0.13),
        (ShotType.BACK_COURT_DRIVE, 0.12),
    ],
    ShotType.DRIVE: [
        (ShotType.DRIVE, 0.30),
        (ShotType.DRIVEN_FLIGHT, 0.20),
        (ShotType.DEFENSIVE_RETURN_DRIVE, 0.25),
        (ShotType.PUSH, 0.25),
    ],
    ShotType.DRIVEN_FLIGHT: [
        (ShotType.DRIVE, 0.35),
        (ShotType.BACK_COURT_DRIVE, 0.30),
        (ShotType.DEFENSIVE_RETURN_DRIVE, 0.35),
    ],
    ShotType.BACK_COURT_DRIVE: [
        (ShotType.DRIVE, 0.35),
        (ShotType.DEFENSIVE_RETURN_DRIVE, 0.30),
        (ShotType.CLEAR, 0.35),
    ],
    ShotType.DROP: [
        (ShotType.NET_SHOT, 0.30),
        (ShotType.RETURN_NET, 0.20),
        (ShotType.LOB, 0.40),
        (ShotType.CROSS_COURT_NET_SHOT, 0.10),
    ],
    ShotType.PASSIVE_DROP: [
        (ShotType.NET_SHOT, 0.35),
        (ShotType.LOB, 0.45),
        (ShotType.RUSH, 0.20),
    ],
    ShotType.PUSH: [
        (ShotType.DRIVE, 0.30),
        (ShotType.DEFENSIVE_RETURN_DRIVE, 0.25),
        (ShotType.LOB, 0.25),
        (ShotType.BACK_COURT_DRIVE, 0.20),
    ],
    ShotType.RUSH: [
        (ShotType.DEFENSIVE_RETURN_DRIVE, 0.45),
        (ShotType.DEFENSIVE_RETURN_LOB, 0.35),
        (ShotType.DRIVE, 0.20),
    ],
    ShotType.DEFENSIVE_RETURN_DRIVE: [
        (ShotType.DRIVE, 0.30),
        (ShotType.PUSH, 0.25),
        (ShotType.NET_SHOT, 0.20),
        (ShotType.DROP, 0.25),
    ],
    ShotType.CROSS_COURT_NET_SHOT: [
        (ShotType.NET_SHOT, 0.35),
        (ShotType.LOB, 0.35),
        (ShotType.RUSH, 0.15),
        (ShotType.PUSH, 0.15),
    ],
}

# Where each stroke is typically hit from: candidate hit areas on the
# 4x4 row-major grid (row 1 = net). Player stands at the hit area or a
# lateral neighbour; the opponent waits around mid-court.
_FRONT = (1, 2, 3, 4, 5, 6, 7, 8)
_MID = (5, 6, 7, 8, 9, 10, 11, 12)
_BACK = (9, 10, 11, 12, 13, 14, 15, 16)
HIT_AREAS: dict[ShotType, tuple[int, ...]] = {
    ShotType.NET_SHOT: _FRONT,
    ShotType.RETURN_NET: _FRONT,
    ShotType.CROSS_COURT_NET_SHOT: _FRONT,
    ShotType.RUSH: _FRONT,
    ShotType.PUSH: _FRONT,
    ShotType.LOB: _FRONT,
    ShotType.SHORT_SERVICE: (5, 6, 7, 8),
    ShotType.LONG_SERVICE: (5, 6, 7, 8),
    ShotType.DRIVE: _MID,
    ShotType.DRIVEN_FLIGHT: _MID,
    ShotType.DEFENSIVE_RETURN_DRIVE: _MID,
    ShotType.DEFENSIVE_RETURN_LOB: _MID,
    ShotType.PASSIVE_DROP: _BACK,
    ShotType.DROP: _BACK,
    ShotType.SMASH: _BACK,
    ShotType.WRIST_SMASH: _BACK,
    ShotType.CLEAR: _BACK,
    ShotType.BACK_COURT_DRIVE: _BACK,
}
_READY_AREAS = (6, 7, 10, 11)

# Stroke classes used by the rally-ending model.
_ATTACK = frozenset(
    {
        ShotType.SMASH,
        ShotType.WRIST_SMASH,
        ShotType.RUSH,
        ShotType.DRIVE,
        ShotType.DRIVEN_FLIGHT,
        ShotType.BACK_COURT_DRIVE,
        ShotType.PUSH,
    }
)
_CONTROL = frozenset(
    {
        ShotType.NET_SHOT,
        ShotType.RETURN_NET,
        ShotType.DROP,
        ShotType.PASSIVE_DROP,
        ShotType.CROSS_COURT_NET_SHOT,
        ShotType.SHORT_SERVICE,
    }
)
# everything else (lobs, clears, defensive strokes, long service) is a lift

P_MISJUDGE = 0.02
P_IN_SHORT_SERVICE_ACE = 0.92  # single-shot rallies: ace vs service fault
P_IN_LONG_SERVICE_ACE = 0.08
_OUT_FAMILY = (EndReason.OUT, EndReason.TOUCH_NET, EndReason.NOT_PASS_OVER_NET)
_OUT_WEIGHTS = (0.60, 0.25, 0.15)

# P(rally ends "in" | stroke classes of the last two shots), rows indexed by
# the second-to-last shot's class and columns by the last shot's class
# (attack, control, lift). The table is deliberately non-factorizable: no
# per-shot scoring reproduces it, only the joint closing pattern does.
# P(rally ends "in" | stroke classes of the last two shots), rows indexed by
# the second-to-last shot's class and columns by the last shot's class
# (attack, control, lift). Deliberately non-factorizable: no per-shot score
# reproduces it, only the joint closing pair does.
P_IN_PAIR_CLASS = (
    (0.04, 0.96, 0.04),  # attack answered by: counter-attack error / kill block / long lift
    (0.96, 0.04, 0.96),  # control answered by: clean rush / net battle error / safe lift
    (0.04, 0.96, 0.96),  # lift answered by: rushed attack error / touch drop / lift exchange
)

# Specific stroke pairings whose ending runs against their class tendency,
# mimicking matchup idiosyncrasies (e.g. a lift off a tight net shot tends
# to fail even though lifts are usually safe). Ordered (second-to-last,
# last); pairings involving smashes are omitted because a smash inside the
# closing window already decides the rally by the first branch.
PAIR_RULE_EXCEPTIONS = frozenset(
    {
        (ShotType.PUSH, ShotType.DEFENSIVE_RETURN_DRIVE),
        (ShotType.DROP, ShotType.LOB),
        (ShotType.PUSH, ShotType.DRIVE),
        (ShotType.DRIVE, ShotType.DRIVE),
        (ShotType.DRIVE, ShotType.DEFENSIVE_RETURN_DRIVE),
        (ShotType.DEFENSIVE_RETURN_DRIVE, ShotType.DROP),
        (ShotType.SHORT_SERVICE, ShotType.LOB),
        (ShotType.PUSH, ShotType.LOB),
        (ShotType.DROP, ShotType.NET_SHOT),
        (ShotType.PUSH, ShotType.BACK_COURT_DRIVE),
        (ShotType.BACK_COURT_DRIVE, ShotType.CLEAR),
        (ShotType.LOB, ShotType.CLEAR),
        (ShotType.CLEAR, ShotType.BACK_COURT_DRIVE),
        (ShotType.LOB, ShotType.DROP),
        (ShotType.NET_SHOT, ShotType.RUSH),
        (ShotType.LONG_SERVICE, ShotType.CLEAR),
        (ShotType.DRIVEN_FLIGHT, ShotType.DRIVE),
        (ShotType.LONG_SERVICE, ShotType.DROP),
        (ShotType.BACK_COURT_DRIVE, ShotType.DRIVE),
        (ShotType.RETURN_NET, ShotType.LOB),
    }
)


def _stroke_class(shot_type: ShotType) -> int:
    if shot_type in _ATTACK:
        return 0
    if shot_type in _CONTROL:
        return 1
    return 2


def _p_in(types: list[ShotType]) -> float:
    """Probability the closing shot lands in, given the final stroke types."""
    if len(types) == 1:
        if types[0] is ShotType.SHORT_SERVICE:
            return P_IN_SHORT_SERVICE_ACE
        return P_IN_LONG_SERVICE_ACE
    prev, last = types[-2], types[-1]
    p = P_IN_PAIR_CLASS[_stroke_class(prev)][_stroke_class(last)]
    if (prev, last) in PAIR_RULE_EXCEPTIONS:
        p = 1.0 - p
    return p


def planted_winner(shots: tuple[Shot, ...], end_reason: EndReason) -> PlayerId:
    """The planted decision rule over a finished rally.

    Re-applying this to a generated rally reproduces its label exactly
    whenever signal_strength is 1.0.
    """
    window = shots[-3:]
    smashers = {s.player for s in window if s.shot_type in SMASH_TYPES}
    if len(smashers) == 1:
        return next(iter(smashers))
    last = shots[-1].player
    return last if end_reason is EndReason.IN else last.opponent()


def _weighted_choice(rng: np.random.Generator, options: list[tuple[ShotType, float]]) -> ShotType:
    types, weights = zip(*options)
    w = np.asarray(weights, dtype=float)
    return types[rng.choice(len(types), p=w / w.sum())]


def _draw_end_reason(rng: np.random.Generator, types: list[ShotType]) -> EndReason:
    if rng.random() < P_MISJUDGE:
        return EndReason.MISJUDGE
    if rng.random() < _p_in(types):
        return EndReason.IN
    return _OUT_FAMILY[rng.choice(len(_OUT_FAMILY), p=np.asarray(_OUT_WEIGHTS))]


def _make_consistent(
    rng: np.random.Generator, winner: PlayerId, last_hitter: PlayerId, reason: EndReason
) -> EndReason:
    # misjudge is compatible with either winner; otherwise "in" must mean
    # the last hitter scored and any error reason must mean they did not.
    if reason is EndReason.MISJUDGE:
        return reason
    if winner == last_hitter:
        return EndReason.IN
    if reason is EndReason.IN:
        return _OUT_FAMILY[rng.choice(len(_OUT_FAMILY), p=np.asarray(_OUT_WEIGHTS))]
    return reason


def _generate_rally_shots(
    rng: np.random.Generator, server: PlayerId, start_time: float, mean_length: float
) -> list[Shot]:
    length = int(rng.geometric(1.0 / mean_length))
    length = max(1, min(MAX_RALLY_LENGTH, length))

    shots: list[Shot] = []
    player = server
    t = start_time
    shot_type = (
        ShotType.SHORT_SERVICE if rng.random() < 0.7 else ShotType.LONG_SERVICE
    )
    for _ in range(length):
        hit_candidates = HIT_AREAS[shot_type]
        hit_area = int(hit_candidates[rng.choice(len(hit_candidates))])
        # player stands at the hit cell or slides one column sideways
        col = (hit_area - 1) % 4
        drift = int(rng.choice((-1, 0, 0, 1)))
        player_area = hit_area + drift if 0 <= col + drift <= 3 else hit_area
        shots.append(
            Shot(
                player=player,
                timestamp=round(t, 3),
                shot_type=shot_type,
                back_hand=bool(rng.random() < 0.25),
                around_head=bool(rng.random() < 0.08),
                hit_area=hit_area,
                player_area=player_area,
                opponent_area=int(_READY_AREAS[rng.choice(len(_READY_AREAS))]),
            )
        )
        player = player.opponent()
        t += float(rng.uniform(0.5, 3.0))
        shot_type = _weighted_choice(rng, TRANSITIONS[shot_type])
    return shots


def _generate_match(
    rng: np.random.Generator, match_id: str, cfg: SynthConfig
) -> list[Rally]:
    rallies: list[Rally] = []
    clock = 0.0
    score = {PlayerId.A: 0, PlayerId.B: 0}
    server = PlayerId.A if rng.random() < 0.5 else PlayerId.B

    for idx in range(cfg.rallies_per_match):
        shots = _generate_rally_shots(rng, server, clock, cfg.mean_rally_length)
        types = [s.shot_type for s in shots]
        reason = _draw_end_reason(rng, types)
        rule_winner = planted_winner(tuple(shots), reason)
        if rng.random() < cfg.signal_strength:
            winner = rule_winner
        else:
            winner = PlayerId.A if rng.random() < 0.5 else PlayerId.B
        reason = _make_consistent(rng, winner, shots[-1].player, reason)

        rallies.append(
            Rally(
                rally_id=f"{match_id}-r{idx:03d}",
                match_id=match_id,
                shots=tuple(shots),
                info=RallyInfo(
                    roundscore_a=score[PlayerId.A],
                    roundscore_b=score[PlayerId.B],
                    getpoint_player=winner,
                    end_reason=reason,
                ),
            )
        )

        score[winner] += 1
        if score[winner] >= SET_POINTS:
            score = {PlayerId.A: 0, PlayerId.B: 0}
        server = winner  # rally winner serves next
        clock = shots[-1].timestamp + float(rng.uniform(10.0, 25.0))
    return rallies


def generate(cfg: SynthConfig) -> Dataset:
    """Generate a deterministic synthetic Dataset for the given config."""
    cfg.validate()
    seed_seq = np.random.SeedSequence(cfg.seed)
    rallies: list[Rally] = []
    matches: list[str] = []
    for m, child in enumerate(seed_seq.spawn(cfg.n_matches)):
        match_id = f"m{m:03d}"
        matches.append(match_id)
        rallies.extend(_generate_match(np.random.Generator(np.random.PCG64(child)), match_id, cfg))
    return Dataset(rallies=tuple(rallies), matches=tuple(matches))


__all__ = [
    "SynthConfig",
    "InvalidConfig",
    "SMASH_TYPES",
    "TRANSITIONS",
    "planted_winner",
    "generate",
]
