"""Experiment configuration: flat ``key = value`` text with one section per
concern.  Parsing is strict (unknown sections or keys are errors), emit and
parse round-trip exactly, and every random choice in a run is derived from the
single root seed through fixed stream tags.
"""

from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, fields

import numpy as np

from .errors import ConfigError
from . import stream

REGIMES = ("cil", "ltcil", "fscil", "gcil")
CLASSIFIERS = ("flight", "fixed", "ncm", "learnable")
LOSSES = ("align", "ce")

# seed stream tags; every consumer hashes (root_seed, tag) so adding a
# consumer never shifts the draws of another
SEED_TERMINUS = 11
SEED_STREAM = 22
SEED_BACKBONE = 33
SEED_PROJECTION = 44
SEED_PROTOTYPES = 55
SEED_BATCHES = 66


def derive_seed(root, tag):
    return int(np.random.SeedSequence([int(root), int(tag)]).generate_state(1)[0])


@dataclass
class ExperimentConfig:
    # [run]
    regime: str = "cil"
    seed: int = 0
    deterministic: bool = True
    # [stream]
    input_dim: int = 16
    radius: float = 4.0
    sigma: float = 1.0
    train_per_class: int = 100
    test_per_class: int = 50
    # [plan]
    base_classes: int = 10
    steps: int = 5
    classes_per_step: int = 2
    shots: int = 5
    rho: float = 0.05
    lt_mode: str = "ordered"
    # [terminus]
    frame_kind: str = "etf"
    terminus_size: int = 0  # 0 means exactly the classes the plan uses
    feature_dim: int = 32
    # [trainer]
    classifier: str = "flight"
    loss: str = "align"
    epochs: int = 25
    base_lr: float = 0.008
    inc_lr: float = 0.5
    lambda_base: float = 5.0
    adaptive_lambda: bool = True
    exemplar_budget: int = 20
    ce_scale: float = 16.0
    fewshot_threshold: int = 5
    batch_size: int = 128
    momentum: float = 0.9
    weight_decay: float = 5e-4
    min_lr_ratio: float = 0.01
    hidden_dims: tuple = (64, 64)
    projection_hidden: int = 64

    def validate(self):
        if self.regime not in REGIMES:
            raise ConfigError(f"regime must be one of {REGIMES}, got {self.regime!r}")
        if self.classifier not in CLASSIFIERS:
            raise ConfigError(
                f"classifier must be one of {CLASSIFIERS}, got {self.classifier!r}"
            )
        if self.loss not in LOSSES:
            raise ConfigError(f"loss must be one of {LOSSES}, got {self.loss!r}")
        if self.lt_mode not in ("ordered", "shuffled"):
            raise ConfigError(f"lt_mode must be ordered or shuffled, got {self.lt_mode!r}")
        if self.frame_kind not in ("etf", "orthogonal"):
            raise ConfigError(f"frame_kind must be etf or orthogonal")
        if self.base_classes < 2 or self.classes_per_step < 2:
            # collapse diagnostics are per-session statistics and need at
            # least two classes in every scope
            raise ConfigError("base_classes and classes_per_step must be >= 2")
        if self.steps < 1:
            raise ConfigError("steps must be >= 1")
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if self.shots < 1:
            raise ConfigError("shots must be >= 1")
        if not 0 < self.rho <= 1:
            raise ConfigError("rho must lie in (0, 1]")
        if self.base_lr <= 0 or self.inc_lr <= 0:
            raise ConfigError("learning rates must be positive")
        if self.lambda_base < 0:
            raise ConfigError("lambda_base must be nonnegative")
        if self.exemplar_budget < 0:
            raise ConfigError("exemplar_budget must be nonnegative")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.train_per_class < 1 or self.test_per_class < 1:
            raise ConfigError("per-class sample counts must be >= 1")
        if len(self.hidden_dims) < 1:
            raise ConfigError("need at least one hidden layer")
        k_needed = self.base_classes + self.steps * self.classes_per_step
        k_total = self.terminus_size or k_needed
        if k_total < k_needed:
            raise ConfigError(
                f"terminus_size {self.terminus_size} is smaller than the "
                f"{k_needed} classes the plan uses"
            )
        if self.feature_dim < k_total:
            raise ConfigError(
                f"feature_dim {self.feature_dim} must be >= the terminus "
                f"width {k_total}"
            )
        return self

    @property
    def k_used(self):
        return self.base_classes + self.steps * self.classes_per_step

    @property
    def k_total(self):
        return self.terminus_size or self.k_used


_SECTIONS = {
    "run": ("regime", "seed", "deterministic"),
    "stream": ("input_dim", "radius", "sigma", "train_per_class", "test_per_class"),
    "plan": ("base_classes", "steps", "classes_per_step", "shots", "rho", "lt_mode"),
    "terminus": ("frame_kind", "terminus_size", "feature_dim"),
    "trainer": (
        "classifier", "loss", "epochs", "base_lr", "inc_lr", "lambda_base",
        "adaptive_lambda", "exemplar_budget", "ce_scale", "fewshot_threshold",
        "batch_size", "momentum", "weight_decay", "min_lr_ratio",
        "hidden_dims", "projection_hidden",
    ),
}

_FIELD_TYPES = {f.name: f.type for f in fields(ExperimentConfig)}


def _parse_value(name, raw, default):
    raw = raw.strip()
    try:
        if isinstance(default, bool):
            low = raw.lower()
            if low in ("true", "yes", "1", "on"):
                return True
            if low in ("false", "no", "0", "off"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, tuple):
            return tuple(int(v) for v in raw.split(",") if v.strip())
        return raw
    except ValueError as exc:
        raise ConfigError(f"bad value for {name}: {exc}") from exc


def _format_value(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def parse_config(text):
    """Parse config text into an ExperimentConfig.  Missing keys keep their
    defaults; unknown sections or keys raise ConfigError."""
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    defaults = ExperimentConfig()
    values = {}
    for section in parser.sections():
        if section not in _SECTIONS:
            raise ConfigError(f"unknown config section [{section}]")
        allowed = _SECTIONS[section]
        for key, raw in parser.items(section):
            if key not in allowed:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")
            values[key] = _parse_value(key, raw, getattr(defaults, key))
    return ExperimentConfig(**values)


def emit_config(cfg):
    """Render a config back to text; parse(emit(cfg)) == cfg."""
    out = io.StringIO()
    for section, keys in _SECTIONS.items():
        out.write(f"[{section}]\n")
        for key in keys:
            out.write(f"{key} = {_format_value(getattr(cfg, key))}\n")
        out.write("\n")
    return out.getvalue()


def load_config(path):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    return parse_config(text)


def build_plan(cfg):
    """Session plan for the configured regime."""
    k_used = cfg.k_used
    if cfg.regime == "cil":
        return stream.plan_cil(
            cfg.base_classes, cfg.steps, cfg.classes_per_step,
            n_per_class=cfg.train_per_class, available=k_used,
        )
    if cfg.regime == "ltcil":
        return stream.plan_ltcil(
            cfg.base_classes, cfg.steps, cfg.classes_per_step, cfg.rho,
            n_max=cfg.train_per_class, lt_mode=cfg.lt_mode, seed=cfg.seed,
            available=k_used,
        )
    if cfg.regime == "fscil":
        return stream.plan_fscil(
            cfg.base_classes, cfg.steps, cfg.classes_per_step, cfg.shots,
            n_per_class=cfg.train_per_class, available=k_used,
        )
    return stream.plan_gcil(
        cfg.base_classes, cfg.steps, cfg.classes_per_step, cfg.shots,
        cfg.rho, cfg.seed, n_per_class=cfg.train_per_class, available=k_used,
    )


def build_task(cfg):
    return stream.SyntheticTaskSpec(
        input_dim=cfg.input_dim,
        k_classes=cfg.k_used,
        radius=cfg.radius,
        sigma=cfg.sigma,
        train_per_class=cfg.train_per_class,
        test_per_class=cfg.test_per_class,
        seed=derive_seed(cfg.seed, SEED_STREAM),
    )
