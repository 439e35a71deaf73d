"""Percentile arithmetic, trimming, strategy space and the one-shot stage game.

Percentile positions are fractions ``q`` in [0, 1] unless a name ends in
``_pp`` (percentage points, 0..100). Every percentile lookup uses the
nearest-rank convention so a trimming or injection position is always an
attainable data value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

# slack for q * n products such as 0.91 * 100 = 91.00000000000001
_RANK_EPS = 1e-9


class DomainError(ValueError):
    """Raised when an input falls outside an operation's domain."""


@dataclass(frozen=True)
class Batch:
    """Values collected in one round, with ground-truth poison flags.

    The flags never leave the engine; collectors and attackers only see
    ``values``.
    """

    values: np.ndarray
    is_poison: np.ndarray = field(default=None)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        flags = self.is_poison
        if flags is None:
            flags = np.zeros(values.shape[0], dtype=bool)
        flags = np.asarray(flags, dtype=bool)
        if flags.shape[0] != values.shape[0]:
            raise DomainError(
                f"values and is_poison differ in length ({values.shape[0]} != {flags.shape[0]})"
            )
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "is_poison", flags)

    def __len__(self) -> int:
        return int(self.values.shape[0])

    @classmethod
    def benign(cls, values) -> "Batch":
        return cls(np.asarray(values, dtype=float))

    @classmethod
    def concat(cls, *batches: "Batch") -> "Batch":
        if not batches:
            return cls(np.empty(0))
        return cls(
            np.concatenate([b.values for b in batches]),
            np.concatenate([b.is_poison for b in batches]),
        )

    @property
    def n_poison(self) -> int:
        return int(self.is_poison.sum())

    @property
    def n_benign(self) -> int:
        return len(self) - self.n_poison


def _check_q(q: float) -> float:
    q = float(q)
    if not 0.0 <= q <= 1.0 or math.isnan(q):
        raise DomainError(f"percentile point must lie in [0, 1], got {q}")
    return q


def nearest_rank(n: int, q: float) -> int:
    """1-based nearest rank ``ceil(q * n)`` clamped to [1, n]."""
    q = _check_q(q)
    if n < 1:
        raise DomainError("percentile of an empty batch")
    return min(n, max(1, math.ceil(q * n - _RANK_EPS)))


def nearest_rank_percentile(batch, q: float) -> float:
    """Value at sorted rank ``ceil(q * n)``; ``q = 1`` gives the maximum."""
    values = batch.values if isinstance(batch, Batch) else np.asarray(batch, dtype=float)
    if values.size == 0:
        raise DomainError("percentile of an empty batch")
    rank = nearest_rank(values.size, q)
    return float(np.partition(values, rank - 1)[rank - 1])


def sorted_percentile(sorted_values: np.ndarray, q) -> np.ndarray | float:
    """Nearest-rank lookup on an already sorted array; ``q`` may be an array."""
    n = sorted_values.size
    if n == 0:
        raise DomainError("percentile of an empty reference")
    q_arr = np.asarray(q, dtype=float)
    if np.any((q_arr < 0) | (q_arr > 1)):
        raise DomainError("percentile point must lie in [0, 1]")
    ranks = np.clip(np.ceil(q_arr * n - _RANK_EPS).astype(int), 1, n)
    out = sorted_values[ranks - 1]
    return float(out) if out.ndim == 0 else out


def trim_above(batch: Batch, cutoff: float) -> tuple[Batch, Batch]:
    """Split ``batch`` into values ``<= cutoff`` (kept) and ``> cutoff`` (removed)."""
    keep = batch.values <= cutoff
    kept = Batch(batch.values[keep], batch.is_poison[keep])
    removed = Batch(batch.values[~keep], batch.is_poison[~keep])
    return kept, removed


# --- strategy space -------------------------------------------------------


@dataclass(frozen=True)
class StrategySpace:
    """Poison domain ``[x_lo, x_hi]``; soft play sits near ``x_lo``, hard near ``x_hi``."""

    x_lo: float
    x_hi: float

    def __post_init__(self):
        if self.x_lo > self.x_hi:
            raise DomainError(f"x_lo={self.x_lo} exceeds x_hi={self.x_hi}")

    def contains(self, x: float) -> bool:
        return self.x_lo <= x <= self.x_hi


@dataclass(frozen=True)
class MixedStrategy:
    p_lo: float
    p_hi: float

    def __post_init__(self):
        for p in (self.p_lo, self.p_hi):
            if not 0.0 <= p <= 1.0:
                raise DomainError(f"probability outside [0, 1]: {p}")
        if abs(self.p_lo + self.p_hi - 1.0) > 1e-12:
            raise DomainError(f"p_lo + p_hi must equal 1, got {self.p_lo + self.p_hi}")

    @classmethod
    def from_p_lo(cls, p_lo: float) -> "MixedStrategy":
        return cls(p_lo, 1.0 - p_lo)


def mixed_strategy_point(space: StrategySpace, mix: MixedStrategy) -> float:
    """Single point equivalent to playing ``x_lo`` w.p. ``p_lo`` and ``x_hi`` w.p. ``p_hi``."""
    return mix.p_lo * space.x_lo + mix.p_hi * space.x_hi


def decompose_point(space: StrategySpace, x: float) -> MixedStrategy:
    """Inverse of :func:`mixed_strategy_point`; unique when ``x_lo < x_hi``."""
    if not space.contains(x):
        raise DomainError(f"{x} lies outside [{space.x_lo}, {space.x_hi}]")
    if space.x_lo == space.x_hi:
        # every mix maps to the same point; report the soft end
        return MixedStrategy(1.0, 0.0)
    p_hi = (x - space.x_lo) / (space.x_hi - space.x_lo)
    p_hi = min(1.0, max(0.0, p_hi))
    return MixedStrategy(1.0 - p_hi, p_hi)


# --- one-shot stage game --------------------------------------------------


class Move(str, Enum):
    SOFT = "soft"
    HARD = "hard"


@dataclass(frozen=True)
class PayoffMatrix:
    """Poisoning payoffs ``P_hi > P_lo`` and trimming losses ``T_hi > T_lo``.

    Ordering required: ``P_hi > T_hi > P_lo > T_lo > 0``.
    """

    P_hi: float
    T_hi: float
    P_lo: float
    T_lo: float

    def __post_init__(self):
        if not (self.P_hi > self.T_hi > self.P_lo > self.T_lo > 0):
            raise DomainError(
                "payoffs must satisfy P_hi > T_hi > P_lo > T_lo > 0, got "
                f"{self.P_hi}, {self.T_hi}, {self.P_lo}, {self.T_lo}"
            )

    def poison_gain(self, collector: Move, adversary: Move) -> float:
        if collector is Move.HARD:
            return 0.0
        return self.P_hi if adversary is Move.HARD else self.P_lo

    def trim_loss(self, collector: Move) -> float:
        return self.T_hi if collector is Move.HARD else self.T_lo

    def payoffs(self, collector: Move, adversary: Move) -> tuple[float, float]:
        """(collector, adversary) payoff; the collector always receives ``-P - T``."""
        gain = self.poison_gain(collector, adversary)
        return -gain - self.trim_loss(collector), gain

    def table(self) -> dict[tuple[Move, Move], tuple[float, float]]:
        return {(c, a): self.payoffs(c, a) for c in Move for a in Move}


def _adversary_best_response(m: PayoffMatrix, collector: Move) -> Move:
    soft = m.payoffs(collector, Move.SOFT)[1]
    hard = m.payoffs(collector, Move.HARD)[1]
    # indifference breaks toward HARD
    return Move.SOFT if soft > hard else Move.HARD


def _collector_best_responses(m: PayoffMatrix, adversary: Move) -> set[Move]:
    vals = {c: m.payoffs(c, adversary)[0] for c in Move}
    best = max(vals.values())
    return {c for c, v in vals.items() if v == best}


def stage_game_equilibrium(m: PayoffMatrix) -> tuple[Move, Move]:
    """Pure-strategy equilibrium of the single-round game as (collector, adversary)."""
    found = [
        (c, a)
        for c in Move
        for a in Move
        if a is _adversary_best_response(m, c) and c in _collector_best_responses(m, a)
    ]
    if not found:
        raise DomainError("no pure-strategy equilibrium")
    # prefer HARD for the collector if several survive
    found.sort(key=lambda ca: (ca[0] is not Move.HARD, ca[1] is not Move.HARD))
    return found[0]
