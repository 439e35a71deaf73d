"""The round-by-round trimming game.

Each round follows the same order: the attacker reads the public board and
injects poison, the collector gathers the round's batch, trims it at the
current threshold, scores its quality and picks the next threshold, and
the board records the round's untrimmed benign data.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .core import Batch, DomainError, nearest_rank_percentile, sorted_percentile, trim_above
from .data import BenignSource, make_source
from .strategies import AttackerScheme, DefenderScheme

TRACE_COLUMNS = (
    "round",
    "threshold_pp",
    "injection_pp",
    "qe",
    "kept_benign",
    "kept_poison",
    "removed_benign",
    "removed_poison",
    "u_a",
    "u_c",
)

BASES = ("board_reference", "combined_batch")


class PublicBoard:
    """Shared record of untrimmed benign reference data and its percentile table."""

    def __init__(self, reference_values):
        values = np.sort(np.asarray(reference_values, dtype=float))
        if values.size == 0:
            raise DomainError("public board needs at least one reference value")
        self._sorted = values

    @property
    def reference_values(self) -> np.ndarray:
        return self._sorted

    def __len__(self):
        return self._sorted.size

    def value_at(self, q):
        """Nearest-rank percentile(s) of the reference; ``q`` is a fraction."""
        return sorted_percentile(self._sorted, q)

    def record(self, values) -> None:
        values = np.asarray(values, dtype=float)
        if values.size:
            self._sorted = np.sort(np.concatenate([self._sorted, values]))


def quality_evaluation(batch, board: PublicBoard, monitor_from: float = 0.9) -> float:
    """``1 - excess mass`` of ``batch`` above the board's ``monitor_from`` percentile.

    The excess mass is how much the observed share strictly above the
    monitored value exceeds the ``1 - monitor_from`` a reference-like batch
    would put there. QE lies in ``[1 - monitor_from, 1]``.
    """
    if board is None or len(board) == 0:
        raise DomainError("quality evaluation needs a non-empty board")
    values = batch.values if isinstance(batch, Batch) else np.asarray(batch, dtype=float)
    if values.size == 0:
        return 1.0
    mark = board.value_at(monitor_from)
    observed = float(np.count_nonzero(values > mark)) / values.size
    excess = max(0.0, observed - (1.0 - monitor_from))
    return 1.0 - excess


def poison_count(ratio: float, n: int) -> int:
    """Nearest integer to ``ratio * n``, halves rounded up."""
    return int(math.floor(ratio * n + 0.5 + 1e-12))


@dataclass(frozen=True)
class GameConfig:
    """Everything that determines one game.

    ``attack_ratio`` is a fixed fraction or an interval ``(lo, hi)`` drawn
    uniformly per round. ``quality_on`` selects whether the collected or the
    kept batch is scored.
    """

    defender: DefenderScheme
    attacker: AttackerScheme
    round_no: int = 20
    samples_per_round: int = 1000
    attack_ratio: Union[float, tuple] = 0.2
    seed: int = 0
    benign_source: object = "uniform"
    percentile_basis: str = "board_reference"
    reference_size: Optional[int] = None
    board_accumulates: bool = True
    monitor_from: float = 0.9
    quality_on: str = "collected"
    keep_values: bool = False

    def __post_init__(self):
        if self.round_no < 1:
            raise DomainError(f"round_no must be >= 1, got {self.round_no}")
        if self.samples_per_round < 1:
            raise DomainError(f"samples_per_round must be >= 1, got {self.samples_per_round}")
        lo, hi = self.ratio_bounds
        if not (0.0 <= lo <= hi < 1.0):
            raise DomainError(f"attack ratio interval must satisfy 0 <= lo <= hi < 1, got {(lo, hi)}")
        if self.percentile_basis not in BASES:
            raise DomainError(f"percentile_basis must be one of {BASES}")
        if self.quality_on not in ("collected", "kept"):
            raise DomainError("quality_on must be 'collected' or 'kept'")
        if not 0.0 < self.monitor_from < 1.0:
            raise DomainError("monitor_from must lie in (0, 1)")

    @property
    def ratio_bounds(self) -> tuple[float, float]:
        r = self.attack_ratio
        if isinstance(r, (tuple, list)):
            return float(r[0]), float(r[1])
        return float(r), float(r)


@dataclass(frozen=True)
class RoundRecord:
    round: int
    threshold_pp: Optional[float]
    injection_pp: float
    qe: float
    kept_benign: int
    kept_poison: int
    removed_benign: int
    removed_poison: int
    u_a_increment: float
    u_c_increment: float
    attack_ratio: float = 0.0
    cutoff: float = math.inf

    @property
    def total(self) -> int:
        return self.kept_benign + self.kept_poison + self.removed_benign + self.removed_poison


@dataclass
class GameTrace:
    rounds: list = field(default_factory=list)
    termination_round: Optional[int] = None
    triggered: bool = False
    kept_values: list = field(default_factory=list)
    benign_values: list = field(default_factory=list)

    @property
    def u_a(self) -> np.ndarray:
        return np.cumsum([r.u_a_increment for r in self.rounds])

    @property
    def u_c(self) -> np.ndarray:
        return np.cumsum([r.u_c_increment for r in self.rounds])

    def counts(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rounds])

    def to_csv(self, path=None) -> str:
        """Write the trace with the fixed ``TRACE_COLUMNS`` header; returns the text."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for rec, ua, uc in zip(self.rounds, self.u_a, self.u_c):
            w.writerow([
                rec.round,
                "" if rec.threshold_pp is None else repr(float(rec.threshold_pp)),
                repr(float(rec.injection_pp)),
                repr(float(rec.qe)),
                rec.kept_benign,
                rec.kept_poison,
                rec.removed_benign,
                rec.removed_poison,
                repr(float(ua)),
                repr(float(uc)),
            ])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text


class GameState:
    """Mutable state of one running game; owned by a single game instance."""

    def __init__(self, config: GameConfig):
        self.config = config
        ss = np.random.SeedSequence(int(config.seed) & 0xFFFFFFFFFFFFFFFF)
        # separate streams keep benign draws identical across scheme pairings
        board_ss, benign_ss, ratio_ss, attack_ss = ss.spawn(4)
        self.benign_rng = np.random.default_rng(benign_ss)
        self.ratio_rng = np.random.default_rng(ratio_ss)
        self.attack_rng = np.random.default_rng(attack_ss)
        self.source: BenignSource = make_source(config.benign_source)
        ref_n = config.reference_size or config.samples_per_round
        self.board = PublicBoard(self.source.draw(ref_n, np.random.default_rng(board_ss)))
        self.defender = config.defender.start()
        self.attacker = config.attacker.start()
        self.round = 0

    def round_ratio(self) -> float:
        lo, hi = self.config.ratio_bounds
        return lo if lo == hi else float(self.ratio_rng.uniform(lo, hi))


def play_round(state: GameState, config: Optional[GameConfig] = None) -> tuple[RoundRecord, Batch, Batch]:
    """Play one round; returns the record, the kept batch and the benign draw."""
    cfg = config or state.config
    state.round += 1
    n = cfg.samples_per_round
    board = state.board

    threshold_pp = state.defender.threshold_pp()
    ratio = state.round_ratio()
    n_poison = poison_count(ratio, n)
    n_benign = n - n_poison

    injection_pp = state.attacker.planned_pp(threshold_pp)
    pp = state.attacker.injection_pp(n_poison, threshold_pp, state.attack_rng)
    poison_values = board.value_at(np.clip(np.asarray(pp, dtype=float) / 100.0, 0.0, 1.0)) if n_poison else np.empty(0)
    poison_values = np.atleast_1d(poison_values)
    if n_poison:
        injection_pp = float(np.mean(pp))

    benign = state.source.draw(n_benign, state.benign_rng)
    collected = Batch(
        np.concatenate([benign, poison_values]),
        np.concatenate([np.zeros(n_benign, bool), np.ones(n_poison, bool)]),
    )

    if threshold_pp is None:
        cutoff = math.inf
    elif cfg.percentile_basis == "board_reference":
        cutoff = board.value_at(threshold_pp / 100.0)
    else:
        cutoff = nearest_rank_percentile(collected, threshold_pp / 100.0)
    kept, removed = trim_above(collected, cutoff)

    scored = collected if cfg.quality_on == "collected" else kept
    qe = quality_evaluation(scored, board, cfg.monitor_from)

    rec = RoundRecord(
        round=state.round,
        threshold_pp=threshold_pp,
        injection_pp=float(injection_pp),
        qe=qe,
        kept_benign=kept.n_benign,
        kept_poison=kept.n_poison,
        removed_benign=removed.n_benign,
        removed_poison=removed.n_poison,
        u_a_increment=kept.n_poison / n,
        u_c_increment=-(kept.n_poison + removed.n_benign) / n,
        attack_ratio=ratio,
        cutoff=float(cutoff),
    )

    state.defender.observe(state.round, qe, rec.injection_pp)
    state.attacker.observe(threshold_pp)
    if cfg.board_accumulates:
        board.record(benign)
    return rec, kept, Batch.benign(benign)


def run_game(config: GameConfig) -> GameTrace:
    """Play ``round_no`` rounds; a pure function of ``config`` (seed included)."""
    state = GameState(config)
    trace = GameTrace()
    for _ in range(config.round_no):
        rec, kept, benign = play_round(state)
        trace.rounds.append(rec)
        if config.keep_values:
            trace.kept_values.append(kept.values)
            trace.benign_values.append(benign.values)
    trig = state.defender.trigger
    trace.triggered = trig.triggered
    trace.termination_round = trig.trigger_round if trig.triggered else config.round_no
    return trace
