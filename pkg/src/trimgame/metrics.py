"""Evaluation metrics: k-means fit quality, poison leakage, Elastic cost, termination."""

from __future__ import annotations

import csv
import io
import itertools
from dataclasses import asdict, dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .core import DomainError
from .strategies import elastic_path


def _as_points(points) -> np.ndarray:
    x = np.asarray(points, dtype=float)
    if x.ndim == 1:
        x = x.reshape(-1, 1)
    if x.ndim != 2:
        raise DomainError("points must be a 1-D or 2-D array")
    return x


@dataclass(frozen=True, eq=False)
class Centroids:
    points: np.ndarray

    def __post_init__(self):
        p = _as_points(self.points)
        if p.shape[0] < 1:
            raise DomainError("need at least one centroid")
        object.__setattr__(self, "points", p)

    @property
    def k(self) -> int:
        return self.points.shape[0]


def _sq_dists(x: np.ndarray, c: np.ndarray) -> np.ndarray:
    return ((x[:, None, :] - c[None, :, :]) ** 2).sum(axis=2)


def sse(points, centroids) -> float:
    """Sum of squared distances from each point to its nearest centroid."""
    x = _as_points(points)
    c = centroids.points if isinstance(centroids, Centroids) else _as_points(centroids)
    if x.shape[1] != c.shape[1]:
        raise DomainError(f"dimension mismatch: points {x.shape[1]} vs centroids {c.shape[1]}")
    if x.shape[0] == 0:
        return 0.0
    return float(_sq_dists(x, c).min(axis=1).sum())


def _farthest_point_init(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    centers = [x[rng.integers(x.shape[0])]]
    d = ((x - centers[0]) ** 2).sum(axis=1)
    for _ in range(1, k):
        centers.append(x[int(np.argmax(d))])
        d = np.minimum(d, ((x - centers[-1]) ** 2).sum(axis=1))
    return np.array(centers)


def kmeans_fit(points, k: int, max_iters: int = 100, seed: int = 0, return_history: bool = False):
    """Lloyd's algorithm from a seeded farthest-point start.

    Stops when assignments stop changing or after ``max_iters`` updates.
    With ``return_history`` the SSE after every update is returned too.
    """
    x = _as_points(points)
    if k < 1:
        raise DomainError("k must be >= 1")
    if x.shape[0] < k:
        raise DomainError(f"need at least k={k} points, got {x.shape[0]}")
    rng = np.random.default_rng(seed)
    c = _farthest_point_init(x, k, rng)
    labels = _sq_dists(x, c).argmin(axis=1)
    history = [float(_sq_dists(x, c).min(axis=1).sum())]
    for _ in range(max_iters):
        for j in range(k):
            members = x[labels == j]
            if members.size:
                c[j] = members.mean(axis=0)
        d = _sq_dists(x, c)
        new = d.argmin(axis=1)
        history.append(float(d.min(axis=1).sum()))
        if np.array_equal(new, labels):
            break
        labels = new
    fit = Centroids(c)
    return (fit, history) if return_history else fit


def centroid_distance(fit, truth) -> float:
    """Total Euclidean distance under the cheapest one-to-one matching."""
    a = fit.points if isinstance(fit, Centroids) else _as_points(fit)
    b = truth.points if isinstance(truth, Centroids) else _as_points(truth)
    if a.shape != b.shape:
        raise DomainError(f"centroid sets differ in shape: {a.shape} vs {b.shape}")
    cost = np.sqrt(_sq_dists(a, b))
    k = a.shape[0]
    if k <= 8:
        return float(min(cost[np.arange(k), perm].sum() for perm in itertools.permutations(range(k))))
    rows, cols = linear_sum_assignment(cost)
    return float(cost[rows, cols].sum())


def untrimmed_poison_fraction(traces) -> float:
    """Pooled share of poison among kept values, over all rounds of one or more traces."""
    if not isinstance(traces, (list, tuple)):
        traces = [traces]
    kept_p = sum(int(r.kept_poison) for t in traces for r in t.rounds)
    kept_b = sum(int(r.kept_benign) for t in traces for r in t.rounds)
    if kept_p + kept_b == 0:
        return 0.0
    return kept_p / (kept_p + kept_b)


def elastic_cumulative_cost(tth_pp: float, k: float, round_no: int) -> float:
    """Cumulative cost in pp after ``round_no`` rounds of the elastic recurrences.

    The per-round cost is how far the attacker's injection percentile falls
    in that round, measured from ``Tth`` before round 1:
    ``c_i = A(i-1) - A(i)`` with ``A(0) = Tth``. The sum telescopes to
    ``Tth - A(round_no)``, which converges to ``(3 + k^2) / (1 - k^2)``.
    """
    if not 0.0 <= k < 1.0:
        raise DomainError(f"k must lie in [0, 1), got {k}")
    if round_no < 1:
        raise DomainError("round_no must be >= 1")
    _, A = elastic_path(tth_pp, k, round_no)
    gaps = np.diff(np.concatenate([[tth_pp], A])) * -1.0
    return float(gaps.sum())


def roundwise_cost(tth_pp: float, k: float, round_no: int) -> float:
    """Average per-round cost (pp) over ``round_no`` rounds."""
    return elastic_cumulative_cost(tth_pp, k, round_no) / round_no


def cumulative_cost_limit(k: float) -> float:
    if not 0.0 <= k < 1.0:
        raise DomainError(f"k must lie in [0, 1), got {k}")
    return (3.0 + k * k) / (1.0 - k * k)


def termination_stats(traces) -> float:
    """Mean termination round; untriggered games count at their round cap."""
    if not traces:
        raise DomainError("no traces")
    return float(np.mean([t.termination_round for t in traces]))


METRIC_COLUMNS = (
    "scheme",
    "attack_ratio",
    "seed_set",
    "sse",
    "centroid_distance",
    "untrimmed_fraction",
    "roundwise_cost_pp",
    "avg_termination_round",
)


@dataclass(frozen=True)
class MetricReport:
    scheme: str
    attack_ratio: str
    seed_set: str
    sse: float = 0.0
    centroid_distance: float = 0.0
    untrimmed_fraction: float = 0.0
    roundwise_cost_pp: float = 0.0
    avg_termination_round: float = 0.0

    def __post_init__(self):
        for name in METRIC_COLUMNS[3:]:
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0:
                raise DomainError(f"{name} must be finite and non-negative, got {v}")
        if self.untrimmed_fraction > 1:
            raise DomainError("untrimmed_fraction must lie in [0, 1]")

    @staticmethod
    def to_csv(reports, path=None) -> str:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=METRIC_COLUMNS, lineterminator="\n")
        w.writeheader()
        for r in reports:
            w.writerow({k: (repr(float(v)) if isinstance(v, float) else v) for k, v in asdict(r).items()})
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text
