"""Defender threshold policies and attacker injection policies.

Schemes are frozen dataclasses. ``scheme.start()`` returns a small policy
object holding the per-game state (trigger flag, last threshold/injection),
so one scheme can drive any number of concurrent games.

Units: ``tth`` is a fraction in (0, 1); offsets, thresholds and injection
positions handed between the two sides are percentage points (pp).
"""

from __future__ import annotations

from dataclasses import dataclass, fields, replace
from typing import Optional, Union

import numpy as np

from .core import DomainError

PP_MIN, PP_MAX = 0.0, 100.0


def clamp_pp(x):
    return np.clip(x, PP_MIN, PP_MAX)


# --- pure update rules ----------------------------------------------------


@dataclass(frozen=True)
class TriggerState:
    triggered: bool = False
    trigger_round: Optional[int] = None

    def __post_init__(self):
        if self.triggered != (self.trigger_round is not None):
            raise DomainError("trigger_round must be set iff triggered")


def trigger_fired(qe_current: float, qe_baseline: float, red: float, sign: str = "minus") -> bool:
    """Quality violation test. ``sign="plus"`` is the literal ``QE < QE0 + Red`` reading."""
    if sign == "minus":
        return qe_current < qe_baseline - red
    if sign == "plus":
        return qe_current < qe_baseline + red
    raise DomainError(f"unknown trigger sign {sign!r}")


def titfortat_step(
    state: TriggerState,
    qe_current: float,
    qe_baseline: float,
    red: float,
    scheme: "Titfortat",
    round_index: int = 1,
) -> tuple[float, TriggerState]:
    """Threshold (fraction) for the next round and the updated trigger state.

    The trigger is absorbing: once it fires, the hard threshold is kept forever.
    """
    if not state.triggered and not scheme.no_trigger:
        if trigger_fired(qe_current, qe_baseline, red, scheme.trigger_sign):
            state = TriggerState(True, round_index)
    pp = scheme.hard_threshold_pp if state.triggered else scheme.soft_threshold_pp
    return pp / 100.0, state


def elastic_threshold(qe_i: float, k: float, T_lo: float, T_hi: float) -> float:
    """Convex combination ``(1 - k*qe) * T_lo + k*qe * T_hi``."""
    w = k * qe_i
    if w > 1.0 + 1e-12 or w < -1e-12:
        raise DomainError(f"k * qe must lie in [0, 1], got {w}")
    w = min(1.0, max(0.0, w))
    return (1.0 - w) * T_lo + w * T_hi


def elastic_defender_update(tth_pp: float, k: float, a_prev_pp: float) -> float:
    """Next trimming position: ``Tth + k (A_prev - Tth - 1)``."""
    return tth_pp + k * (a_prev_pp - tth_pp - 1.0)


def elastic_attacker_update(tth_pp: float, k: float, t_prev_pp: float) -> float:
    """Next injection position: ``Tth - 3 + k (T_prev - Tth)``."""
    return tth_pp - 3.0 + k * (t_prev_pp - tth_pp)


def elastic_fixed_point(tth_pp: float, k: float) -> tuple[float, float]:
    """Closed-form fixed point (T*, A*) of the two elastic recurrences."""
    if not 0.0 <= k < 1.0:
        raise DomainError(f"elastic recurrences contract only for 0 <= k < 1, got k={k}")
    den = 1.0 - k * k
    return tth_pp - 4.0 * k / den, tth_pp - (3.0 + k * k) / den


def elastic_path(tth_pp: float, k: float, n_rounds: int, t1: float | None = None, a1: float | None = None):
    """Iterate both recurrences from ``T(1) = Tth-3``, ``A(1) = Tth+1``.

    Returns arrays ``T[0..n-1]``, ``A[0..n-1]`` (round i at index i-1).
    """
    T = np.empty(n_rounds)
    A = np.empty(n_rounds)
    T[0] = tth_pp - 3.0 if t1 is None else t1
    A[0] = tth_pp + 1.0 if a1 is None else a1
    for i in range(1, n_rounds):
        T[i] = elastic_defender_update(tth_pp, k, A[i - 1])
        A[i] = elastic_attacker_update(tth_pp, k, T[i - 1])
    return T, A


def mixed_evasive_injection(p: float, rng: np.random.Generator, size=None, hi_pp: float = 99.0, lo_pp: float = 90.0):
    """``hi_pp`` with probability ``p``, else ``lo_pp``; one draw, or ``size`` draws."""
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"p must lie in [0, 1], got {p}")
    u = rng.random(size)
    out = np.where(u < p, hi_pp, lo_pp)
    return float(out) if size is None else out


# --- defender schemes -----------------------------------------------------


class DefenderPolicy:
    """Per-game defender state. ``threshold_pp`` is ``None`` for no trimming."""

    def threshold_pp(self) -> Optional[float]:
        raise NotImplementedError

    def observe(self, round_index: int, qe: float, injection_pp: float) -> None:
        pass

    @property
    def trigger(self) -> TriggerState:
        return TriggerState()


@dataclass(frozen=True)
class Ostrich:
    """Accepts every value."""

    name = "ostrich"

    def start(self) -> DefenderPolicy:
        return _OstrichPolicy()


class _OstrichPolicy(DefenderPolicy):
    def threshold_pp(self):
        return None


@dataclass(frozen=True)
class StaticBaseline:
    """Trims at the fixed percentile ``q`` every round."""

    q: float
    name = "baseline"

    def __post_init__(self):
        if not 0.0 < self.q <= 1.0:
            raise DomainError(f"baseline percentile must lie in (0, 1], got {self.q}")

    def start(self) -> DefenderPolicy:
        return _StaticPolicy(100.0 * self.q)


class _StaticPolicy(DefenderPolicy):
    def __init__(self, pp):
        self._pp = pp

    def threshold_pp(self):
        return self._pp


@dataclass(frozen=True)
class Titfortat:
    """Soft trim at ``Tth + soft_offset`` until a quality violation, then hard forever.

    ``hard_pp`` pins the punishment position to an absolute percentile instead of
    ``Tth + hard_offset``. ``no_trigger`` keeps the soft trim for the whole game.
    """

    tth: float
    red: float = 0.05
    soft_offset: float = 1.0
    hard_offset: float = -3.0
    hard_pp: Optional[float] = None
    qe_baseline: float = 1.0
    trigger_sign: str = "minus"
    no_trigger: bool = False
    name = "titfortat"

    def __post_init__(self):
        if not 0.0 < self.tth < 1.0:
            raise DomainError(f"Tth must lie in (0, 1), got {self.tth}")
        if self.red < 0:
            raise DomainError(f"redundancy must be >= 0, got {self.red}")
        if self.trigger_sign not in ("minus", "plus"):
            raise DomainError(f"unknown trigger sign {self.trigger_sign!r}")

    @property
    def soft_threshold_pp(self) -> float:
        return float(clamp_pp(100.0 * self.tth + self.soft_offset))

    @property
    def hard_threshold_pp(self) -> float:
        if self.hard_pp is not None:
            return float(self.hard_pp)
        return float(clamp_pp(100.0 * self.tth + self.hard_offset))

    def start(self) -> DefenderPolicy:
        return _TitfortatPolicy(self)


class _TitfortatPolicy(DefenderPolicy):
    def __init__(self, scheme: Titfortat):
        self.scheme = scheme
        self.state = TriggerState()
        self._pp = scheme.soft_threshold_pp

    def threshold_pp(self):
        return self._pp

    def observe(self, round_index, qe, injection_pp):
        s = self.scheme
        q, self.state = titfortat_step(self.state, qe, s.qe_baseline, s.red, s, round_index)
        self._pp = 100.0 * q

    @property
    def trigger(self):
        return self.state


@dataclass(frozen=True)
class Elastic:
    """Elastic trigger with forgiveness.

    ``rule="recurrence"`` answers the attacker's last injection position with
    ``T(i+1) = Tth + k (A(i) - Tth - 1)`` starting from ``Tth - 3``.
    ``rule="quality"`` maps the normalised quality of the last round onto
    ``[hard, soft]`` positions via :func:`elastic_threshold`.
    """

    tth: float
    k: float
    rule: str = "recurrence"
    soft_offset: float = 1.0
    hard_offset: float = -3.0
    name = "elastic"

    def __post_init__(self):
        if not 0.0 < self.tth < 1.0:
            raise DomainError(f"Tth must lie in (0, 1), got {self.tth}")
        if not 0.0 <= self.k < 1.0:
            raise DomainError(f"k must lie in [0, 1), got {self.k}")
        if self.rule not in ("recurrence", "quality"):
            raise DomainError(f"unknown elastic rule {self.rule!r}")

    def start(self) -> DefenderPolicy:
        return _ElasticPolicy(self)


class _ElasticPolicy(DefenderPolicy):
    def __init__(self, scheme: Elastic):
        self.scheme = scheme
        self.tth_pp = 100.0 * scheme.tth
        self._pp = self.tth_pp + scheme.hard_offset
        self._qe_max = 0.0

    def threshold_pp(self):
        return float(clamp_pp(self._pp))

    def observe(self, round_index, qe, injection_pp):
        s = self.scheme
        if s.rule == "recurrence":
            self._pp = elastic_defender_update(self.tth_pp, s.k, injection_pp)
        else:
            self._qe_max = max(self._qe_max, qe)
            qe_norm = qe / self._qe_max if self._qe_max > 0 else 0.0
            self._pp = elastic_threshold(
                qe_norm, s.k, self.tth_pp + s.hard_offset, self.tth_pp + s.soft_offset
            )


# --- attacker schemes -----------------------------------------------------


class AttackerPolicy:
    def injection_pp(self, n: int, threshold_pp: Optional[float], rng: np.random.Generator) -> np.ndarray:
        """Injection positions (pp) for ``n`` poison values this round."""
        raise NotImplementedError

    def planned_pp(self, threshold_pp: Optional[float]) -> float:
        """Position the attacker commits to this round, visible on the public board."""
        raise NotImplementedError

    def observe(self, threshold_pp: Optional[float]) -> None:
        pass


@dataclass(frozen=True)
class StaticPercentile:
    """Fixed injection percentile ``q``, or uniform over ``[q, q_hi]`` per value."""

    q: float
    q_hi: Optional[float] = None
    name = "static_attacker"

    def __post_init__(self):
        hi = self.q if self.q_hi is None else self.q_hi
        if not (0.0 < self.q <= 1.0 and 0.0 < hi <= 1.0 and self.q <= hi):
            raise DomainError(f"invalid injection percentile range [{self.q}, {hi}]")

    def start(self) -> AttackerPolicy:
        return _StaticAttack(self)


class _StaticAttack(AttackerPolicy):
    def __init__(self, s: StaticPercentile):
        self.lo = 100.0 * s.q
        self.hi = 100.0 * (s.q if s.q_hi is None else s.q_hi)

    def injection_pp(self, n, threshold_pp, rng):
        if self.hi == self.lo:
            return np.full(n, self.lo)
        return rng.uniform(self.lo, self.hi, size=n)

    def planned_pp(self, threshold_pp):
        return 0.5 * (self.lo + self.hi)


@dataclass(frozen=True)
class IdealStatic:
    """White-box attacker: ``offset`` pp relative to the collector's current threshold."""

    offset: float = -1.0
    name = "ideal_static"

    def start(self) -> AttackerPolicy:
        return _IdealStaticAttack(self.offset)


class _IdealStaticAttack(AttackerPolicy):
    def __init__(self, offset):
        self.offset = offset

    def planned_pp(self, threshold_pp):
        base = PP_MAX if threshold_pp is None else threshold_pp
        return float(clamp_pp(base + self.offset))

    def injection_pp(self, n, threshold_pp, rng):
        return np.full(n, self.planned_pp(threshold_pp))


@dataclass(frozen=True)
class MixedEvasive:
    """Each poison value goes to ``hi_pp`` with probability ``p``, else ``lo_pp``."""

    p: float
    hi_pp: float = 99.0
    lo_pp: float = 90.0
    name = "mixed_evasive"

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise DomainError(f"p must lie in [0, 1], got {self.p}")
        if not (0.0 < self.lo_pp <= 100.0 and 0.0 < self.hi_pp <= 100.0):
            raise DomainError("injection percentiles must lie in (0, 100]")

    def start(self) -> AttackerPolicy:
        return _MixedAttack(self)


class _MixedAttack(AttackerPolicy):
    def __init__(self, s: MixedEvasive):
        self.s = s

    def planned_pp(self, threshold_pp):
        s = self.s
        return s.p * s.hi_pp + (1.0 - s.p) * s.lo_pp

    def injection_pp(self, n, threshold_pp, rng):
        s = self.s
        return mixed_evasive_injection(s.p, rng, size=n, hi_pp=s.hi_pp, lo_pp=s.lo_pp)


@dataclass(frozen=True)
class ElasticAdversary:
    """Starts at ``Tth + 1`` and answers the collector with ``A(i+1) = Tth - 3 + k (T(i) - Tth)``."""

    tth: float
    k: float
    name = "elastic_adversary"

    def __post_init__(self):
        if not 0.0 < self.tth < 1.0:
            raise DomainError(f"Tth must lie in (0, 1), got {self.tth}")
        if not 0.0 <= self.k < 1.0:
            raise DomainError(f"k must lie in [0, 1), got {self.k}")

    def start(self) -> AttackerPolicy:
        return _ElasticAttack(self)


class _ElasticAttack(AttackerPolicy):
    def __init__(self, s: ElasticAdversary):
        self.s = s
        self.tth_pp = 100.0 * s.tth
        self._pp = self.tth_pp + 1.0

    def planned_pp(self, threshold_pp):
        return float(clamp_pp(self._pp))

    def injection_pp(self, n, threshold_pp, rng):
        return np.full(n, self.planned_pp(threshold_pp))

    def observe(self, threshold_pp):
        t = PP_MAX if threshold_pp is None else threshold_pp
        self._pp = elastic_attacker_update(self.tth_pp, self.s.k, t)


DefenderScheme = Union[Ostrich, StaticBaseline, Titfortat, Elastic]
AttackerScheme = Union[StaticPercentile, IdealStatic, MixedEvasive, ElasticAdversary]

DEFENDERS = {
    "ostrich": Ostrich,
    "baseline": StaticBaseline,
    "titfortat": Titfortat,
    "elastic": Elastic,
}
ATTACKERS = {
    "static_attacker": StaticPercentile,
    "ideal_static": IdealStatic,
    "mixed_evasive": MixedEvasive,
    "elastic_adversary": ElasticAdversary,
}


def build_defender(name: str, **params) -> DefenderScheme:
    try:
        cls = DEFENDERS[name]
    except KeyError:
        raise DomainError(f"unknown defender scheme {name!r}; expected one of {sorted(DEFENDERS)}") from None
    return _construct(cls, name, params)


def build_attacker(name: str, **params) -> AttackerScheme:
    try:
        cls = ATTACKERS[name]
    except KeyError:
        raise DomainError(f"unknown attacker scheme {name!r}; expected one of {sorted(ATTACKERS)}") from None
    return _construct(cls, name, params)


def _construct(cls, name, params):
    try:
        return cls(**params)
    except TypeError as exc:
        raise DomainError(f"bad parameters for {name!r}: {exc}") from None


def scheme_fields(name: str) -> set[str]:
    cls = DEFENDERS.get(name) or ATTACKERS.get(name)
    if cls is None:
        raise DomainError(f"unknown scheme {name!r}")
    return {f.name for f in fields(cls)}


def with_params(scheme, **changes):
    return replace(scheme, **changes)
