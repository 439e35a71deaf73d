"""Config-driven experiments across schemes, attack ratios, thresholds and seeds."""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np
import yaml

from .core import DomainError
from .data import SynthSpec, load_dataset, make_source
from .engine import GameConfig, run_game
from .metrics import centroid_distance, kmeans_fit, sse, untrimmed_poison_fraction
from .privacy import mse_sweep
from .strategies import (
    ElasticAdversary,
    Elastic,
    IdealStatic,
    MixedEvasive,
    Ostrich,
    StaticBaseline,
    StaticPercentile,
    Titfortat,
    build_attacker,
    build_defender,
    scheme_fields,
)
from .theory import compliance_threshold

MODES = ("game", "theory", "ldp")
RESULT_COLUMNS = ("scheme", "attack_ratio", "tth", "metric", "value", "stderr", "repetitions")


class ExperimentError(RuntimeError):
    pass


# --- scheme pairings ------------------------------------------------------------


def preset_pairing(scheme_id: str, tth: float, **extra):
    """Defender/attacker pair for a named benchmark scheme at threshold ``tth``.

    Each defender faces the attacker it was benchmarked against: Ostrich
    against poison at the 99th percentile, the random-range baseline against
    poison spread over ``[0.9, 1]``, the static baseline against the ideal
    attacker 1pp below its threshold, and the trigger schemes against an
    attacker that follows the elastic update rule.
    """
    if scheme_id == "ostrich":
        return Ostrich(), StaticPercentile(0.99)
    if scheme_id == "baseline_0.9":
        return StaticBaseline(tth), StaticPercentile(0.9, q_hi=1.0)
    if scheme_id == "baseline_static":
        return StaticBaseline(tth), IdealStatic(-1.0)
    if scheme_id == "titfortat":
        return Titfortat(tth=tth, no_trigger=True), ElasticAdversary(tth=tth, k=0.0)
    if scheme_id.startswith("elastic_"):
        k = float(scheme_id.split("_", 1)[1])
        return Elastic(tth=tth, k=k), ElasticAdversary(tth=tth, k=k)
    if scheme_id == "nonequilibrium_titfortat":
        p = float(extra.get("p", 1.0))
        return Titfortat(tth=tth, red=0.05, hard_pp=90.0, qe_baseline=p), MixedEvasive(p)
    if scheme_id == "nonequilibrium_elastic":
        p = float(extra.get("p", 1.0))
        return Elastic(tth=tth, k=float(extra.get("k", 0.5))), MixedEvasive(p)
    raise DomainError(f"unknown scheme preset {scheme_id!r}")


FIGURE_SCHEMES = ("ostrich", "baseline_0.9", "baseline_static", "titfortat", "elastic_0.1", "elastic_0.5")


@dataclass(frozen=True)
class SchemeSpec:
    """One pairing: a preset id, or explicit defender and attacker dicts."""

    label: str
    preset: Optional[str] = None
    defender: Optional[dict] = None
    attacker: Optional[dict] = None
    params: dict = field(default_factory=dict)

    @classmethod
    def parse(cls, entry) -> "SchemeSpec":
        if isinstance(entry, str):
            return cls(label=entry, preset=entry)
        if not isinstance(entry, dict):
            raise DomainError(f"scheme entry must be a string or a mapping, got {entry!r}")
        entry = dict(entry)
        preset = entry.pop("preset", None) or entry.pop("id", None)
        defender = entry.pop("defender", None)
        attacker = entry.pop("attacker", None)
        label = entry.pop("label", None)
        if preset is None and not (isinstance(defender, dict) and isinstance(attacker, dict)):
            raise DomainError(f"scheme {label or entry!r} needs a preset or both defender and attacker mappings")
        label = label or preset or f"{defender.get('name')}+{attacker.get('name')}"
        return cls(label=label, preset=preset, defender=defender, attacker=attacker, params=entry)

    def build(self, tth: float):
        if self.preset is not None:
            return preset_pairing(self.preset, tth, **self.params)
        return _build_side(build_defender, self.defender, tth), _build_side(build_attacker, self.attacker, tth)


def _build_side(builder, spec: dict, tth: float):
    spec = dict(spec)
    name = spec.pop("name")
    if "tth" not in spec and "tth" in scheme_fields(name):
        spec["tth"] = tth
    return builder(name, **spec)


# --- config ---------------------------------------------------------------------


def _ratio(r):
    if isinstance(r, (list, tuple)):
        if len(r) != 2:
            raise DomainError(f"attack ratio interval must have two ends, got {r!r}")
        return (float(r[0]), float(r[1]))
    return float(r)


def ratio_label(r) -> str:
    if isinstance(r, tuple):
        return f"[{r[0]:g},{r[1]:g}]"
    return f"{r:g}"


@dataclass(frozen=True)
class ExperimentConfig:
    mode: str = "game"
    dataset: Any = "uniform"
    normalize: bool = False
    schemes: tuple = ()
    tth: tuple = (0.9,)
    attack_ratios: tuple = (0.2,)
    round_no: int = 20
    repetitions: int = 100
    seed: int = 0
    samples_per_round: int = 1000
    percentile_basis: str = "board_reference"
    clusters: Optional[int] = None
    output: Optional[str] = None
    workers: int = 1
    # theory mode
    d_grid: tuple = (0.5, 0.9)
    p_grid: tuple = (0.0, 0.5)
    g_ac_grid: tuple = (1.0,)
    # ldp mode
    epsilons: tuple = (0.5, 1.0, 2.0, 4.0)
    users: int = 10000
    attack: Optional[str] = None
    attacker_fraction: float = 0.0
    target: float = 1.0

    def __post_init__(self):
        if self.mode not in MODES:
            raise DomainError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.repetitions < 1:
            raise DomainError("repetitions must be >= 1")
        if self.round_no < 1:
            raise DomainError("round_no must be >= 1")
        schemes = tuple(s if isinstance(s, SchemeSpec) else SchemeSpec.parse(s) for s in self.schemes)
        object.__setattr__(self, "schemes", schemes)
        object.__setattr__(self, "tth", tuple(float(t) for t in _as_tuple(self.tth)))
        object.__setattr__(self, "attack_ratios", tuple(_ratio(r) for r in _as_tuple(self.attack_ratios)))
        for name in ("d_grid", "p_grid", "g_ac_grid", "epsilons"):
            object.__setattr__(self, name, tuple(float(v) for v in _as_tuple(getattr(self, name))))
        if self.mode == "game":
            if not schemes:
                raise DomainError("game mode needs at least one scheme")
            for s in schemes:
                for t in self.tth:
                    s.build(t)  # resolves every scheme id up front

    @classmethod
    def from_mapping(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise DomainError(f"unknown config fields: {sorted(unknown)}")
        return cls(**data)

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)


def _as_tuple(v):
    if isinstance(v, (list, tuple)):
        return tuple(v)
    return (v,)


def load_config(path) -> ExperimentConfig:
    """Read a YAML (or JSON) experiment description."""
    text = Path(path).read_text()
    data = yaml.safe_load(text)
    if not isinstance(data, dict):
        raise DomainError(f"{path}: config must be a mapping")
    return ExperimentConfig.from_mapping(data)


# --- results --------------------------------------------------------------------


@dataclass(frozen=True)
class ResultRow:
    scheme: str
    attack_ratio: str
    tth: float
    metric: str
    value: float
    stderr: float
    repetitions: int

    def __post_init__(self):
        if not self.stderr >= 0:
            raise DomainError("stderr must be >= 0")


def aggregate(values) -> tuple[float, float]:
    """Mean and standard error (sample std over sqrt(n); 0 for a single value)."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise DomainError("nothing to aggregate")
    mean = float(v.mean())
    se = float(v.std(ddof=1) / math.sqrt(v.size)) if v.size > 1 else 0.0
    return mean, se


def rows_to_csv(rows, path=None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RESULT_COLUMNS)
    for r in rows:
        w.writerow([r.scheme, r.attack_ratio, "" if math.isnan(r.tth) else repr(r.tth), r.metric,
                    repr(float(r.value)), repr(float(r.stderr)), r.repetitions])
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return text


# --- game mode ------------------------------------------------------------------


def _benign_source(cfg: ExperimentConfig):
    ds = cfg.dataset
    if isinstance(ds, str) and ds not in ("uniform", "gaussian", "clusters"):
        return make_source(load_dataset(ds, normalize=cfg.normalize, column=0 if cfg.clusters else None))
    return make_source(ds)


def clustering_offsets(trace, k: int, seed: int) -> tuple[float, float]:
    """SSE offset and centroid distance of a k-means fit on the kept data.

    Both are measured against a fit on the same game's clean benign draws:
    the offset is the extra SSE the poisoned fit costs on the clean points.
    """
    kept = np.concatenate(trace.kept_values)
    benign = np.concatenate(trace.benign_values)
    truth = kmeans_fit(benign, k, seed=seed)
    fit = kmeans_fit(kept, k, seed=seed)
    return sse(benign, fit) - sse(benign, truth), centroid_distance(fit, truth)


def _game_metrics(trace, cfg: ExperimentConfig, seed: int) -> dict:
    out = {
        "untrimmed_fraction": untrimmed_poison_fraction(trace),
        "termination_round": float(trace.termination_round),
        "u_a": float(trace.u_a[-1]),
        "u_c": float(trace.u_c[-1]),
    }
    if cfg.clusters:
        out["sse_offset"], out["centroid_distance"] = clustering_offsets(trace, cfg.clusters, seed)
    return out


def _run_repetition(args):
    cfg, scheme, ratio, tth, rep = args
    defender, attacker = scheme.build(tth)
    seed = cfg.seed + rep
    gc = GameConfig(
        defender=defender,
        attacker=attacker,
        round_no=cfg.round_no,
        samples_per_round=cfg.samples_per_round,
        attack_ratio=ratio,
        seed=seed,
        benign_source=_benign_source(cfg),
        percentile_basis=cfg.percentile_basis,
        keep_values=bool(cfg.clusters),
    )
    return _game_metrics(run_game(gc), cfg, seed)


def run_cell(cfg: ExperimentConfig, scheme: SchemeSpec, ratio, tth: float) -> dict[str, list[float]]:
    """Per-repetition metric values of one (scheme, ratio, Tth) cell."""
    jobs = [(cfg, scheme, ratio, tth, rep) for rep in range(cfg.repetitions)]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as ex:
            results = list(ex.map(_run_repetition, jobs))
    else:
        results = [_run_repetition(j) for j in jobs]
    per_metric: dict[str, list[float]] = {}
    for res in results:
        for name, v in res.items():
            per_metric.setdefault(name, []).append(v)
    return per_metric


def _cells(cfg: ExperimentConfig):
    for scheme in cfg.schemes:
        for ratio in cfg.attack_ratios:
            for tth in cfg.tth:
                yield scheme, ratio, tth


def run_game_experiment(cfg: ExperimentConfig, raw: Optional[list] = None) -> list[ResultRow]:
    rows = []
    for scheme, ratio, tth in _cells(cfg):
        cell_id = f"{scheme.label} ratio={ratio_label(ratio)} tth={tth:g}"
        try:
            per_metric = run_cell(cfg, scheme, ratio, tth)
        except Exception as exc:
            raise ExperimentError(f"cell {cell_id} failed: {exc}") from exc
        for name, values in per_metric.items():
            mean, se = aggregate(values)
            rows.append(ResultRow(scheme.label, ratio_label(ratio), tth, name, mean, se, cfg.repetitions))
            if raw is not None:
                raw.append((scheme.label, ratio_label(ratio), tth, name, list(values)))
    return rows


# --- theory and ldp modes ------------------------------------------------------


def run_theory_experiment(cfg: ExperimentConfig) -> list[ResultRow]:
    rows = []
    for g in cfg.g_ac_grid:
        for d in cfg.d_grid:
            for p in cfg.p_grid:
                label = f"d={d:g};p={p:g}"
                try:
                    v = compliance_threshold(d, p, g)
                except DomainError as exc:
                    raise ExperimentError(f"cell {label} g_ac={g:g} failed: {exc}") from exc
                rows.append(ResultRow("compliance", label, math.nan, f"delta_max@g_ac={g:g}", v, 0.0, 1))
    return rows


def _ldp_values(cfg: ExperimentConfig, rng: np.random.Generator) -> np.ndarray:
    ds = cfg.dataset
    if isinstance(ds, str) and ds not in ("uniform", "gaussian", "clusters"):
        values = load_dataset(ds, normalize=True, column=0).values
    else:
        spec = SynthSpec(kind="uniform", low=-1.0, high=1.0) if ds == "uniform" else make_source(ds).spec
        values = np.clip(spec.sample(cfg.users, rng), -1.0, 1.0)
    return values


def run_ldp_experiment(cfg: ExperimentConfig) -> list[ResultRow]:
    rng = np.random.default_rng(cfg.seed)
    values = _ldp_values(cfg, rng)
    n_att = int(round(cfg.attacker_fraction * values.size))
    sweep = mse_sweep(
        cfg.epsilons, values, cfg.repetitions, rng, attack=cfg.attack, n_attackers=n_att, target=cfg.target, with_stderr=True
    )
    label = cfg.attack or "honest"
    return [
        ResultRow(label, f"{cfg.attacker_fraction:g}", math.nan, f"mse@eps={eps:g}", v, se, cfg.repetitions)
        for eps, v, se in sweep
    ]


def run_experiment(cfg: ExperimentConfig, raw: Optional[list] = None) -> list[ResultRow]:
    """Run every cell of ``cfg`` and return aggregated rows in cell order.

    In game mode, ``raw`` (if given) collects the per-repetition values
    behind each row.
    """
    if cfg.mode == "game":
        rows = run_game_experiment(cfg, raw)
    elif cfg.mode == "theory":
        rows = run_theory_experiment(cfg)
    else:
        rows = run_ldp_experiment(cfg)
    if cfg.output:
        rows_to_csv(rows, cfg.output)
    return rows


# --- canned protocols -----------------------------------------------------------


def nonequilibrium_protocol(
    p: float,
    repetitions: int = 100,
    round_no: int = 25,
    attack_ratio: float = 0.2,
    tth: float = 0.93,
    k: float = 0.5,
    seed: int = 0,
    samples_per_round: int = 1000,
    percentile_basis: str = "board_reference",
) -> dict[str, float]:
    """Mixed-evasive attacker against Tit-for-tat and Elastic.

    Tit-for-tat triggers when the quality-estimated poison share exceeds
    ``1 - p + 0.05`` and then trims at the 90th percentile for good.
    Returns pooled untrimmed-poison fractions and Tit-for-tat's mean
    termination round.
    """
    out = {}
    tft_traces = []
    for label in ("titfortat", "elastic"):
        defender, attacker = preset_pairing(f"nonequilibrium_{label}", tth, p=p, k=k)
        traces = [
            run_game(GameConfig(
                defender=defender,
                attacker=attacker,
                round_no=round_no,
                samples_per_round=samples_per_round,
                attack_ratio=attack_ratio,
                seed=seed + rep,
                percentile_basis=percentile_basis,
            ))
            for rep in range(repetitions)
        ]
        out[f"{label}_fraction"] = untrimmed_poison_fraction(traces)
        if label == "titfortat":
            tft_traces = traces
    out["avg_termination_round"] = float(np.mean([t.termination_round for t in tft_traces]))
    return out


def figure_config(ratio, repetitions: int = 100, seed: int = 0, tth: float = 0.9, **changes) -> ExperimentConfig:
    """Clustering comparison of all benchmark schemes on two synthetic clusters."""
    base = dict(
        mode="game",
        dataset=SynthSpec(kind="clusters", centers=(-1.0, 1.0), sigma=0.1),
        schemes=FIGURE_SCHEMES,
        tth=(tth,),
        attack_ratios=(ratio,),
        round_no=20,
        repetitions=repetitions,
        seed=seed,
        percentile_basis="combined_batch",
        clusters=2,
    )
    base.update(changes)
    return ExperimentConfig(**base)


def dump_json(rows) -> str:
    return json.dumps([dataclasses.asdict(r) for r in rows], indent=1)
