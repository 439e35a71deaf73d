"""Simulator and analysis toolkit for the repeated trimming game between a
data collector and an evasive poisoning adversary."""

from .core import (
    Batch,
    DomainError,
    MixedStrategy,
    Move,
    PayoffMatrix,
    StrategySpace,
    decompose_point,
    mixed_strategy_point,
    nearest_rank_percentile,
    stage_game_equilibrium,
    trim_above,
)
from .engine import GameConfig, GameTrace, PublicBoard, play_round, quality_evaluation, run_game
from .strategies import (
    Elastic,
    ElasticAdversary,
    IdealStatic,
    MixedEvasive,
    Ostrich,
    StaticBaseline,
    StaticPercentile,
    Titfortat,
    build_attacker,
    build_defender,
)

__version__ = "0.1.0"
