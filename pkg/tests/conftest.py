import dataclasses

import pytest

from etfcil.config import ExperimentConfig
from etfcil.trainer import run_experiment


def tiny_config(**overrides):
    """A deliberately small experiment that still exercises every code path:
    two base classes, one incremental step, short epochs."""
    base = ExperimentConfig(
        base_classes=2,
        steps=1,
        classes_per_step=2,
        feature_dim=8,
        epochs=3,
        train_per_class=30,
        test_per_class=10,
        batch_size=64,
        hidden_dims=(16, 16),
        projection_hidden=12,
    )
    return dataclasses.replace(base, **overrides)


@pytest.fixture(scope="session")
def tiny_report():
    cfg = tiny_config()
    cfg.validate()
    return run_experiment(cfg)
