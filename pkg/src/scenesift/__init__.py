"""Interactivity scoring and curation for multi-agent driving logs."""

from .counterfactuals import (
    GeneratorKind,
    MotionPrimitive,
    PrimitiveLibrary,
    extract_primitives,
    generate,
    load_library,
    save_library,
)
from .errors import ConfigError, DataError, ScenesiftError, ScoringError
from .prediction import (
    CachedPredictor,
    Condition,
    GaussianMode,
    GmmPrediction,
    PredictorConfig,
    ReferencePredictor,
)
from .ranking import (
    PreferenceRecord,
    Ranking,
    RewardModel,
    auc_roc,
    derive_labels,
    fit_reward,
    rank_dataset,
    ranking_from_scores,
    spearman,
)
from .scenario import (
    Agent,
    AgentState,
    LaneSegment,
    Scenario,
    ScenarioSet,
    Segment,
    canonical_segment,
    load_dataset,
    save_dataset,
    slice_segment,
    validate_scenario,
)
from .shift import gaussian_w2_cost, kld_gmm, l2_topk, sqrt_psd, w2_gmm
from .surprise import (
    SurpriseConfig,
    SurpriseResult,
    batch_rules,
    batch_score,
    rule_scores,
    surprise,
    ttc,
    ttce,
)
from .transport import TransportPlan, solve_transport

__version__ = "0.1.0"

__all__ = [
    "Agent",
    "AgentState",
    "CachedPredictor",
    "Condition",
    "ConfigError",
    "DataError",
    "GaussianMode",
    "GeneratorKind",
    "GmmPrediction",
    "LaneSegment",
    "MotionPrimitive",
    "PredictorConfig",
    "PreferenceRecord",
    "PrimitiveLibrary",
    "Ranking",
    "ReferencePredictor",
    "RewardModel",
    "Scenario",
    "ScenarioSet",
    "ScenesiftError",
    "ScoringError",
    "Segment",
    "SurpriseConfig",
    "SurpriseResult",
    "TransportPlan",
    "auc_roc",
    "batch_rules",
    "batch_score",
    "canonical_segment",
    "derive_labels",
    "extract_primitives",
    "fit_reward",
    "gaussian_w2_cost",
    "generate",
    "kld_gmm",
    "l2_topk",
    "load_dataset",
    "load_library",
    "rank_dataset",
    "ranking_from_scores",
    "rule_scores",
    "save_dataset",
    "save_library",
    "slice_segment",
    "solve_transport",
    "spearman",
    "sqrt_psd",
    "surprise",
    "ttc",
    "ttce",
    "validate_scenario",
    "__version__",
]
