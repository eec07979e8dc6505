import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from tinyhar.dataset import default_synth_spec
from tinyhar.evaluation import evaluate
from tinyhar.mlp import TrainConfig, mlp_train
from tinyhar.gbdt import GbdtConfig, gbdt_train
from tinyhar.pipeline import synth_feature_corpus


def pytest_terminal_summary(terminalreporter):
    """Print one scorecard line per acceptance criterion after the run."""
    try:
        import test_acceptance
    except ImportError:
        return
    if getattr(test_acceptance, "RESULTS", None):
        terminalreporter.section("acceptance criteria")
        for line in test_acceptance.RESULTS:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def small_corpus():
    """6-class synthetic corpus through the full pipeline (fast)."""
    spec = default_synth_spec(n_classes=6, duration_s=40)
    X, y, names, windows = synth_feature_corpus(spec, seed=1)
    return X, y, names, windows


@pytest.fixture(scope="session")
def small_split(small_corpus):
    X, y, names, _ = small_corpus
    rng = np.random.default_rng(0)
    idx = rng.permutation(len(X))
    cut = int(0.8 * len(X))
    return (X[idx[:cut]], y[idx[:cut]]), (X[idx[cut:]], y[idx[cut:]]), names


@pytest.fixture(scope="session")
def trained_mlp(small_split):
    train, val, names = small_split
    model, history = mlp_train(
        train,
        val,
        TrainConfig(initial_lr=1e-2, max_epochs=300, patience=30, batch_size=256),
        dims=(78, 64, 32, len(names)),
        class_names=names,
    )
    return model, history


@pytest.fixture(scope="session")
def trained_forest(small_split):
    train, val, names = small_split
    return gbdt_train(
        train, hyper=GbdtConfig(n_rounds=15, max_depth=3), class_names=names
    )
