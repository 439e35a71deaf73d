"""Two-point local differential privacy for values in [-1, 1].

Each user reports ``+B`` or ``-B`` with ``B = (e^eps + 1) / (e^eps - 1)``;
the +B probability is chosen so the report is an unbiased estimate of the
input.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import Batch, DomainError

ATTACKS = ("input_manipulation", "output_manipulation")


@dataclass(frozen=True)
class LdpConfig:
    epsilon: float
    domain: tuple = (-1.0, 1.0)

    def __post_init__(self):
        if not self.epsilon > 0 or math.isinf(self.epsilon):
            raise DomainError(f"epsilon must be a finite positive number, got {self.epsilon}")
        if tuple(self.domain) != (-1.0, 1.0):
            raise DomainError("the two-point mechanism is defined on [-1, 1] only")

    @property
    def bound(self) -> float:
        e = math.exp(self.epsilon)
        return (e + 1.0) / (e - 1.0)


def report_bound(epsilon: float) -> float:
    return LdpConfig(epsilon).bound


def plus_probability(x, cfg: LdpConfig):
    """Probability of reporting ``+B`` for input(s) ``x``."""
    x = np.asarray(x, dtype=float)
    if np.any((x < -1.0) | (x > 1.0)) or np.any(np.isnan(x)):
        raise DomainError("LDP inputs must lie in [-1, 1]")
    e = math.exp(cfg.epsilon)
    out = (x * (e - 1.0) + e + 1.0) / (2.0 * (e + 1.0))
    return float(out) if out.ndim == 0 else out


def ldp_perturb(x, cfg: LdpConfig, rng: np.random.Generator):
    """Perturb one value or an array of values; returns ``+-B`` of the same shape."""
    prob = plus_probability(x, cfg)
    B = cfg.bound
    u = rng.random(np.shape(prob))
    out = np.where(u < prob, B, -B)
    return float(out) if out.ndim == 0 else out


def perturb_constant(x: float, n: int, cfg: LdpConfig, rng: np.random.Generator) -> np.ndarray:
    """Reports of ``n`` users who all hold ``x``, drawn as one binomial count.

    Report order carries no information, so plus reports come first.
    """
    if n < 0:
        raise DomainError("n must be >= 0")
    n_plus = int(rng.binomial(n, plus_probability(x, cfg))) if n else 0
    B = cfg.bound
    out = np.full(n, -B)
    out[:n_plus] = B
    return out


def ldp_mean(reports) -> float:
    r = np.asarray(reports, dtype=float)
    if r.size == 0:
        raise DomainError("mean of no reports")
    return float(r.mean())


def craft_attack(kind: str, target: float, n: int, cfg: LdpConfig, rng: np.random.Generator) -> np.ndarray:
    """Reports of ``n`` colluding users.

    ``input_manipulation`` perturbs the counterfeit value ``target`` honestly,
    so the reports look like those of real users holding ``target``.
    ``output_manipulation`` skips the mechanism and sends the extreme report
    on the side of ``target`` (``+B`` unless ``target`` is negative).
    """
    if n < 0:
        raise DomainError("n must be >= 0")
    if kind == "input_manipulation":
        if not -1.0 <= target <= 1.0:
            raise DomainError(f"input manipulation target must lie in [-1, 1], got {target}")
        return perturb_constant(target, n, cfg, rng)
    if kind == "output_manipulation":
        if math.isnan(target):
            raise DomainError("target must be a number")
        side = -1.0 if target < 0 else 1.0
        return np.full(n, side * cfg.bound)
    raise DomainError(f"unknown attack kind {kind!r}; expected one of {ATTACKS}")


def mse(estimates, truth: float) -> float:
    e = np.asarray(estimates, dtype=float)
    if e.size == 0:
        raise DomainError("mse of no estimates")
    return float(np.mean((e - truth) ** 2))


def report_batch(honest, poison) -> Batch:
    """Engine batch from honest and poisoned report arrays."""
    honest = np.asarray(honest, dtype=float)
    poison = np.asarray(poison, dtype=float)
    return Batch(
        np.concatenate([honest, poison]),
        np.concatenate([np.zeros(honest.size, bool), np.ones(poison.size, bool)]),
    )


def mse_sweep(
    epsilons,
    values,
    repetitions: int,
    rng: np.random.Generator,
    attack: str | None = None,
    n_attackers: int = 0,
    target: float = 1.0,
    with_stderr: bool = False,
) -> list[tuple]:
    """``(epsilon, mse)`` of the mean estimate over ``repetitions`` rounds of collection.

    ``values`` are the honest users' inputs; attackers, when given, add
    ``n_attackers`` crafted reports each repetition. MSE is taken against
    the honest mean. With ``with_stderr`` each entry also carries the
    standard error of the squared errors.
    """
    values = np.asarray(values, dtype=float)
    truth = float(values.mean())
    out = []
    for eps in epsilons:
        cfg = LdpConfig(eps)
        prob = plus_probability(values, cfg)
        B = cfg.bound
        ests = np.empty(repetitions)
        for i in range(repetitions):
            rep = np.where(rng.random(values.size) < prob, B, -B)
            if attack is not None and n_attackers:
                rep = np.concatenate([rep, craft_attack(attack, target, n_attackers, cfg, rng)])
            ests[i] = rep.mean()
        if with_stderr:
            sq = (ests - truth) ** 2
            se = float(sq.std(ddof=1) / np.sqrt(repetitions)) if repetitions > 1 else 0.0
            out.append((float(eps), mse(ests, truth), se))
        else:
            out.append((float(eps), mse(ests, truth)))
    return out
