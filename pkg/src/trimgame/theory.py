"""Discounted-gain compliance calculus and the Lagrangian dynamics of the game.

Round index ``r`` plays the role of time and the cumulative utilities
``u_a`` (adversary) and ``u_c`` (collector) play the role of positions.
With interaction strength ``k`` the system is a pair of coupled oscillators:

    m_a u_a'' = -k (u_a - u_c),    m_c u_c'' = +k (u_a - u_c)

derived from ``L = 1/2 m_a u_a'^2 + 1/2 m_c u_c'^2 - 1/2 k (u_a - u_c)^2``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.integrate import simpson

from .core import DomainError, PayoffMatrix

# --- compliance ---------------------------------------------------------------


@dataclass(frozen=True)
class ComplianceParams:
    d: float
    p: float
    g_ac: float
    delta: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.d < 1.0:
            raise DomainError(f"discount rate d must lie in (0, 1), got {self.d}")
        if not 0.0 <= self.p <= 1.0:
            raise DomainError(f"p must lie in [0, 1], got {self.p}")
        if self.delta < 0:
            raise DomainError(f"delta must be >= 0, got {self.delta}")

    @property
    def g_0(self) -> float:
        return self.g_ac - self.delta

    @classmethod
    def from_payoff_matrix(cls, m: PayoffMatrix, d: float, p: float, delta: float = 0.0) -> "ComplianceParams":
        """Cooperation gains ``g_c = T_hi - P_lo - T_lo`` and ``g_a = P_hi``, averaged."""
        g_c = m.T_hi - m.P_lo - m.T_lo
        g_a = m.P_hi
        return cls(d=d, p=p, g_ac=0.5 * (g_a + g_c), delta=delta)


def discounted_gains(params: ComplianceParams) -> tuple[float, float]:
    """``(g_com, g_def)``: long-run value of complying vs defecting.

    Complying earns ``g_0`` every round. Defecting earns ``g_ac`` per round
    for as long as the defection keeps passing as compliant (probability
    ``p`` per round).
    """
    d, p = params.d, params.p
    if d >= 1:
        raise DomainError("discount rate must be < 1")
    g_com = params.g_0 / (1.0 - d)
    g_def = params.g_ac / (1.0 - d * p)
    return g_com, g_def


def compliance_threshold(d: float, p: float, g_ac: float) -> float:
    """Largest compromise ``delta`` under which complying beats defecting."""
    if not 0.0 < d < 1.0:
        raise DomainError(f"discount rate d must lie in (0, 1), got {d}")
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"p must lie in [0, 1], got {p}")
    if d * p == 1.0:
        raise DomainError("d * p = 1 leaves the defection value unbounded")
    return g_ac * (d - d * p) / (1.0 - d * p)


def complies(params: ComplianceParams) -> bool:
    g_com, g_def = discounted_gains(params)
    return g_com > g_def


def truncated_discounted_sum(gain: float, rate: float, tol: float = 1e-15) -> float:
    """``sum_i rate^i * gain`` summed term by term until terms drop below ``tol``."""
    if not 0.0 <= rate < 1.0:
        raise DomainError(f"rate must lie in [0, 1), got {rate}")
    total, term = 0.0, gain
    while abs(term) > tol * max(1.0, abs(total)):
        total += term
        term *= rate
    return total


def compliance_threshold_bisection(d: float, p: float, g_ac: float, tol: float = 1e-13) -> float:
    """Independent route to the compliance threshold.

    Finds the ``delta`` at which the truncated discounted sums of complying
    and defecting are equal, by bisection on ``delta`` in ``[0, g_ac]``.
    """
    g_def = truncated_discounted_sum(g_ac, d * p)
    # the complying stream is linear in its per-round gain, so one sum serves every delta
    unit_com = truncated_discounted_sum(1.0, d)

    def margin(delta):
        return (g_ac - delta) * unit_com - g_def

    lo, hi = 0.0, g_ac
    if margin(lo) <= 0:
        return 0.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if margin(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# --- dynamics -------------------------------------------------------------------


@dataclass(frozen=True)
class DynamicsParams:
    m_a: float = 1.0
    m_c: float = 1.0
    k: float = 0.0

    def __post_init__(self):
        if self.m_a <= 0 or self.m_c <= 0:
            raise DomainError("inertia factors must be positive")
        if self.k < 0:
            raise DomainError("interaction strength k must be >= 0")

    @property
    def omega(self) -> float:
        return math.sqrt(self.k * (1.0 / self.m_a + 1.0 / self.m_c))

    @property
    def period(self) -> float:
        if self.k == 0:
            return math.inf
        return 2.0 * math.pi / self.omega


def lagrangian(u_a, u_c, du_a, du_c, params: DynamicsParams, mode: str = "interaction"):
    """Lagrangian in ``equilibrium`` form (``m_a u_a'^2 + m_c u_c'^2``) or with interaction.

    Works elementwise on arrays.
    """
    if mode == "equilibrium":
        return params.m_a * np.square(du_a) + params.m_c * np.square(du_c)
    if mode == "interaction":
        if params.k <= 0:
            raise DomainError("interaction mode needs k > 0")
        kinetic = 0.5 * params.m_a * np.square(du_a) + 0.5 * params.m_c * np.square(du_c)
        return kinetic - 0.5 * params.k * np.square(np.subtract(u_a, u_c))
    raise DomainError(f"unknown Lagrangian mode {mode!r}")


def energy(u_a, u_c, du_a, du_c, params: DynamicsParams):
    kinetic = 0.5 * params.m_a * np.square(du_a) + 0.5 * params.m_c * np.square(du_c)
    return kinetic + 0.5 * params.k * np.square(np.subtract(u_a, u_c))


@dataclass(frozen=True, eq=False)
class Trajectory:
    r: np.ndarray
    u_a: np.ndarray
    u_c: np.ndarray
    du_a: np.ndarray
    du_c: np.ndarray

    def __post_init__(self):
        arrays = [np.asarray(getattr(self, f), dtype=float) for f in ("r", "u_a", "u_c", "du_a", "du_c")]
        if len({a.shape for a in arrays}) != 1 or arrays[0].ndim != 1:
            raise DomainError("trajectory arrays must be 1-D and of equal length")
        for name, a in zip(("r", "u_a", "u_c", "du_a", "du_c"), arrays):
            object.__setattr__(self, name, a)

    def __len__(self):
        return self.r.size

    @property
    def step(self) -> float:
        """Grid spacing; raises if the grid is not uniform."""
        if self.r.size < 2:
            raise DomainError("a trajectory needs at least two samples for a step")
        diffs = np.diff(self.r)
        h = diffs.mean()
        if h <= 0 or np.max(np.abs(diffs - h)) > 1e-9 * max(1.0, abs(h)):
            raise DomainError("trajectory grid is not uniform")
        return float(h)

    def energy(self, params: DynamicsParams) -> np.ndarray:
        return energy(self.u_a, self.u_c, self.du_a, self.du_c, params)

    def to_csv(self, params: DynamicsParams, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("r", "u_a", "u_c", "du_a", "du_c", "energy"))
        e = self.energy(params)
        for row in zip(self.r, self.u_a, self.u_c, self.du_a, self.du_c, e):
            w.writerow([repr(float(x)) for x in row])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text


def action_integral(traj: Trajectory, params: DynamicsParams, mode: str = "interaction") -> float:
    """Composite Simpson estimate of the action along ``traj``."""
    if len(traj) < 3:
        raise DomainError("action integral needs at least 3 grid points")
    h = traj.step
    L = lagrangian(traj.u_a, traj.u_c, traj.du_a, traj.du_c, params, mode)
    return float(simpson(L, dx=h))


def _accel(state: np.ndarray, params: DynamicsParams) -> np.ndarray:
    u_a, u_c, v_a, v_c = state
    w = u_a - u_c
    return np.array([v_a, v_c, -params.k * w / params.m_a, params.k * w / params.m_c])


def integrate_dynamics(params: DynamicsParams, init, span, h: float) -> Trajectory:
    """Fixed-step classic RK4 from ``init = (u_a, u_c, du_a, du_c)`` over ``span``.

    The step is adjusted so an integer number of steps covers the span exactly.
    """
    r0, r1 = map(float, span)
    if h <= 0:
        raise DomainError("step h must be positive")
    if not r1 > r0:
        raise DomainError("span must satisfy r1 > r0")
    n = max(1, int(round((r1 - r0) / h)))
    h = (r1 - r0) / n
    out = np.empty((n + 1, 4))
    y = np.asarray(init, dtype=float).copy()
    if y.shape != (4,):
        raise DomainError("init must be (u_a, u_c, du_a, du_c)")
    out[0] = y
    for i in range(n):
        k1 = _accel(y, params)
        k2 = _accel(y + 0.5 * h * k1, params)
        k3 = _accel(y + 0.5 * h * k2, params)
        k4 = _accel(y + h * k3, params)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        out[i + 1] = y
    r = r0 + h * np.arange(n + 1)
    return Trajectory(r, out[:, 0], out[:, 1], out[:, 2], out[:, 3])


@dataclass(frozen=True)
class AnalyticSolution:
    """Normal-mode solution: relative coordinate oscillates, weighted center drifts.

    ``w(r) = amplitude * cos(omega * (r - r0) + phase)`` and the center of
    inertia moves as ``center0 + center_velocity * (r - r0)``.
    """

    params: DynamicsParams
    r0: float
    w0: float
    dw0: float
    center0: float
    center_velocity: float

    @classmethod
    def from_init(cls, params: DynamicsParams, init, r0: float = 0.0) -> "AnalyticSolution":
        u_a, u_c, v_a, v_c = map(float, init)
        M = params.m_a + params.m_c
        return cls(
            params=params,
            r0=r0,
            w0=u_a - u_c,
            dw0=v_a - v_c,
            center0=(params.m_a * u_a + params.m_c * u_c) / M,
            center_velocity=(params.m_a * v_a + params.m_c * v_c) / M,
        )

    @property
    def omega(self) -> float:
        return self.params.omega

    @property
    def amplitude(self) -> float:
        if self.params.k == 0:
            return math.inf if self.dw0 else abs(self.w0)
        return math.hypot(self.w0, self.dw0 / self.omega)

    @property
    def phase(self) -> float:
        if self.params.k == 0:
            return 0.0
        return math.atan2(-self.dw0 / self.omega, self.w0)

    def relative(self, r):
        t = np.asarray(r, dtype=float) - self.r0
        if self.params.k == 0:
            return self.w0 + self.dw0 * t, np.full_like(t, self.dw0)
        om = self.omega
        w = self.w0 * np.cos(om * t) + (self.dw0 / om) * np.sin(om * t)
        dw = -self.w0 * om * np.sin(om * t) + self.dw0 * np.cos(om * t)
        return w, dw

    def evaluate(self, r):
        """``(u_a, u_c, du_a, du_c)`` at ``r`` (scalar or array)."""
        t = np.asarray(r, dtype=float) - self.r0
        m_a, m_c = self.params.m_a, self.params.m_c
        M = m_a + m_c
        w, dw = self.relative(r)
        c = self.center0 + self.center_velocity * t
        u_a = c + (m_c / M) * w
        u_c = c - (m_a / M) * w
        du_a = self.center_velocity + (m_c / M) * dw
        du_c = self.center_velocity - (m_a / M) * dw
        return u_a, u_c, du_a, du_c


def analytic_trajectory(params: DynamicsParams, init, r, r0: float = 0.0):
    """Exact ``(u_a, u_c)`` at ``r``; ``k = 0`` falls back to constant velocities."""
    u_a, u_c, _, _ = AnalyticSolution.from_init(params, init, r0).evaluate(r)
    return u_a, u_c


def measure_period(traj: Trajectory) -> float:
    """Mean spacing of successive upward zero crossings of ``u_a - u_c``."""
    w = traj.u_a - traj.u_c
    idx = np.nonzero((w[:-1] < 0) & (w[1:] >= 0))[0]
    if idx.size < 2:
        raise DomainError("trajectory covers fewer than two upward crossings")
    # linear interpolation of each crossing
    r = traj.r
    cross = r[idx] + (r[idx + 1] - r[idx]) * (-w[idx]) / (w[idx + 1] - w[idx])
    return float(np.mean(np.diff(cross)))


def bump_trajectory(traj: Trajectory, eps_a: float, eps_c: float) -> Trajectory:
    """Add ``eps * sin(pi (r - r1) / (r2 - r1))`` to each coordinate; endpoints stay fixed."""
    r1, r2 = traj.r[0], traj.r[-1]
    L = r2 - r1
    s = np.sin(np.pi * (traj.r - r1) / L)
    ds = (np.pi / L) * np.cos(np.pi * (traj.r - r1) / L)
    return Trajectory(
        traj.r,
        traj.u_a + eps_a * s,
        traj.u_c + eps_c * s,
        traj.du_a + eps_a * ds,
        traj.du_c + eps_c * ds,
    )


def variational_check(
    params: DynamicsParams,
    init,
    span,
    n_perturbations: int,
    rng: np.random.Generator,
    h: float = 1e-3,
    eps_range: tuple[float, float] = (1e-3, 1e-1),
    mode: Optional[str] = None,
) -> bool:
    """True iff the integrated path has strictly lower action than every bumped path.

    Each perturbation draws independent bump sizes for both coordinates with
    magnitudes in ``eps_range`` and random signs. Minimality only holds for
    spans shorter than half an oscillation period, so longer spans are refused.
    """
    r1, r2 = map(float, span)
    if params.k > 0 and r2 - r1 >= 0.5 * params.period:
        raise DomainError(
            f"span {r2 - r1:g} is not shorter than half the period {0.5 * params.period:g}"
        )
    if mode is None:
        mode = "interaction" if params.k > 0 else "equilibrium"
    traj = integrate_dynamics(params, init, (r1, r2), h)
    s_true = action_integral(traj, params, mode)
    lo, hi = eps_range
    for _ in range(n_perturbations):
        mags = rng.uniform(lo, hi, size=2)
        signs = rng.choice([-1.0, 1.0], size=2)
        eps_a, eps_c = mags * signs
        if eps_a == 0 and eps_c == 0:
            continue
        if not action_integral(bump_trajectory(traj, eps_a, eps_c), params, mode) > s_true:
            return False
    return True


def bump_action_increase(params: DynamicsParams, span, eps_a: float, eps_c: float, mode: str = "equilibrium") -> float:
    """Closed-form action increase of a bump added to a free (``k = 0``) path.

    With a straight-line path the cross term integrates to zero, leaving
    ``c * (eps_a^2 m_a + eps_c^2 m_c) * pi^2 / (2 L)`` where ``c`` is 1 for
    the equilibrium form and 1/2 for the interaction form.
    """
    L = float(span[1]) - float(span[0])
    c = 1.0 if mode == "equilibrium" else 0.5
    return c * (params.m_a * eps_a**2 + params.m_c * eps_c**2) * math.pi**2 / (2.0 * L)
