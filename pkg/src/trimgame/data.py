"""Dataset ingestion and seeded synthetic generators."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import Batch, DomainError

SYNTH_SPECS = ("uniform", "gaussian", "clusters")


class DatasetError(ValueError):
    pass


def load_dataset(path, normalize: bool = False, column: int | None = None) -> Batch:
    """Read a CSV of numeric records, one per row.

    A non-numeric first row is treated as a header. Multi-column files give a
    2-D ``values`` array unless ``column`` picks one. With ``normalize`` each
    column is mapped affinely so its min goes to -1 and its max to +1.
    """
    path = Path(path)
    rows = []
    with path.open(newline="") as fh:
        for lineno, raw in enumerate(csv.reader(fh), start=1):
            cells = [c.strip() for c in raw]
            if not cells or all(c == "" for c in cells):
                continue
            try:
                rows.append([float(c) for c in cells])
            except ValueError:
                if lineno == 1 and not rows:
                    continue  # header
                raise DatasetError(f"{path}: row {lineno} is not numeric: {raw!r}") from None
    if not rows:
        raise DatasetError(f"{path}: no numeric records")
    width = len(rows[0])
    for i, r in enumerate(rows):
        if len(r) != width:
            raise DatasetError(f"{path}: record {i + 1} has {len(r)} columns, expected {width}")
    values = np.asarray(rows, dtype=float)
    if column is not None:
        values = values[:, column]
    elif width == 1:
        values = values[:, 0]
    if normalize:
        values = normalize_to_unit(values)
    return Batch.benign(values)


def normalize_to_unit(values: np.ndarray) -> np.ndarray:
    """Affine map per column sending min to -1 and max to +1."""
    lo = values.min(axis=0)
    hi = values.max(axis=0)
    span = np.where(hi > lo, hi - lo, 1.0)
    out = 2.0 * (values - lo) / span - 1.0
    return np.where(hi > lo, out, 0.0)


@dataclass(frozen=True)
class SynthSpec:
    """Parameters of a synthetic benign distribution.

    ``clusters`` draws 1-D Gaussian clusters with equal weights; ``centers``
    are the ground-truth centroids.
    """

    kind: str = "uniform"
    low: float = 0.0
    high: float = 1.0
    mean: float = 0.0
    std: float = 1.0
    centers: tuple = (-1.0, 1.0)
    sigma: float = 0.1

    def __post_init__(self):
        if self.kind not in SYNTH_SPECS:
            raise DomainError(f"unknown synthetic spec {self.kind!r}; expected one of {SYNTH_SPECS}")

    @property
    def truth_centroids(self) -> np.ndarray:
        if self.kind != "clusters":
            raise DomainError("only the clusters spec carries ground-truth centroids")
        return np.asarray(self.centers, dtype=float).reshape(-1, 1)

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        if self.kind == "uniform":
            return rng.uniform(self.low, self.high, size=n)
        if self.kind == "gaussian":
            return rng.normal(self.mean, self.std, size=n)
        centers = np.asarray(self.centers, dtype=float)
        labels = rng.integers(0, centers.size, size=n)
        return centers[labels] + rng.normal(0.0, self.sigma, size=n)


def synth_generate(spec, n: int, seed: int) -> Batch:
    """Seeded sample of ``n`` benign values from ``spec`` (a name or :class:`SynthSpec`)."""
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    if isinstance(spec, str):
        spec = SynthSpec(kind=spec)
    elif isinstance(spec, dict):
        spec = SynthSpec(**spec)
    rng = np.random.default_rng(seed)
    return Batch.benign(spec.sample(n, rng))


# --- benign sources used by the engine ----------------------------------


class BenignSource:
    def draw(self, n: int, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError


@dataclass(frozen=True)
class SyntheticSource(BenignSource):
    spec: SynthSpec = field(default_factory=SynthSpec)

    def draw(self, n, rng):
        return self.spec.sample(n, rng)

    @property
    def truth_centroids(self):
        return self.spec.truth_centroids


@dataclass(frozen=True, eq=False)
class DatasetSource(BenignSource):
    """Resamples rows of a loaded 1-D dataset with replacement."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or v.size == 0:
            raise DomainError("dataset source needs a non-empty 1-D value array")
        object.__setattr__(self, "values", v)

    def draw(self, n, rng):
        return self.values[rng.integers(0, self.values.size, size=n)]


def make_source(spec) -> BenignSource:
    """Build a source from a synthetic id, a :class:`SynthSpec`, a dict or a loaded batch."""
    if isinstance(spec, BenignSource):
        return spec
    if isinstance(spec, SynthSpec):
        return SyntheticSource(spec)
    if isinstance(spec, str):
        return SyntheticSource(SynthSpec(kind=spec))
    if isinstance(spec, dict):
        return SyntheticSource(SynthSpec(**spec))
    if isinstance(spec, Batch):
        return DatasetSource(spec.values)
    raise DomainError(f"cannot build a benign source from {type(spec).__name__}")
