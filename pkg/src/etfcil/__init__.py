"""Incremental learning with a fixed neural-collapse terminus.

The package trains small dense networks on synthetic class streams while the
classifier stays pinned to a precomputed simplex frame; novel-class
prototypes fly from their class-mean direction to their frame column over
the course of each session.  It also ships a projected-gradient oracle that
checks the claimed optimum of the constrained feature problem directly.
"""

from .checkpoint import load_checkpoint, save_checkpoint
from .config import (
    ExperimentConfig,
    build_plan,
    build_task,
    derive_seed,
    emit_config,
    load_config,
    parse_config,
)
from .errors import ConfigError, EtfcilError, InvariantViolation
from .losses import (
    combined_loss,
    cross_entropy_fixed,
    cross_entropy_fixed_batch,
    distillation_batch,
    distillation_loss,
    learnable_ce_batch,
    misalignment_batch,
    misalignment_loss,
)
from .memory import ExemplarStore, FeatureMeanMemory, herding_select
from .metrics import (
    average_incremental_accuracy,
    nc_cross_cos,
    nc_self_cos,
    top1_accuracy,
    trace_ratio,
)
from .nets import MlpNet, SgdMomentum, cosine_lr
from .oracle import OracleProblem, OracleResult, check_nc_terminus, solve
from .prototypes import PrototypeState, compute_ncm, make_prototype_state
from .report import RunReport, SessionMetrics
from .stream import (
    SessionBatch,
    SessionDef,
    SessionPlan,
    SyntheticTaskSpec,
    materialize,
    plan_cil,
    plan_fscil,
    plan_gcil,
    plan_ltcil,
)
from .terminus import EtfTerminus, build_terminus, verify_geometry
from .trainer import ModelState, TrainerConfig, run_experiment, train_session

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "EtfcilError",
    "EtfTerminus",
    "ExemplarStore",
    "ExperimentConfig",
    "FeatureMeanMemory",
    "InvariantViolation",
    "MlpNet",
    "ModelState",
    "OracleProblem",
    "OracleResult",
    "PrototypeState",
    "RunReport",
    "SessionBatch",
    "SessionDef",
    "SessionMetrics",
    "SessionPlan",
    "SgdMomentum",
    "SyntheticTaskSpec",
    "TrainerConfig",
    "average_incremental_accuracy",
    "build_plan",
    "build_task",
    "build_terminus",
    "check_nc_terminus",
    "combined_loss",
    "compute_ncm",
    "cosine_lr",
    "cross_entropy_fixed",
    "cross_entropy_fixed_batch",
    "derive_seed",
    "distillation_batch",
    "distillation_loss",
    "emit_config",
    "herding_select",
    "learnable_ce_batch",
    "load_checkpoint",
    "load_config",
    "make_prototype_state",
    "materialize",
    "misalignment_batch",
    "misalignment_loss",
    "nc_cross_cos",
    "nc_self_cos",
    "parse_config",
    "plan_cil",
    "plan_fscil",
    "plan_gcil",
    "plan_ltcil",
    "run_experiment",
    "save_checkpoint",
    "solve",
    "top1_accuracy",
    "trace_ratio",
    "train_session",
    "verify_geometry",
]
