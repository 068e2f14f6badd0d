"""
MNIST accuracy benchmark.

Set DDNN_MNIST_DIR to a directory holding the four standard IDX files
(train-images-idx3-ubyte[.gz], train-labels-idx1-ubyte[.gz],
t10k-images-idx3-ubyte[.gz], t10k-labels-idx1-ubyte[.gz]).
"""
import dataclasses
import os
import time
from pathlib import Path

import numpy as np
import pytest

from src.data_access.repositories.idx_repository import read_idx
from src.services.baseline_service import predict_ridge_baseline, train_ridge_baseline
from src.services.network_service import build_network_spec, evaluate, train_ddnn
from src.services.normalization_service import apply_normalization, normalize
from src.shared.logging import get_logger

logger = get_logger(__name__)

MNIST_DIR = os.environ.get("DDNN_MNIST_DIR")
TRAIN_SAMPLES = 5000
TEST_SAMPLES = 1000

pytestmark = [
    pytest.mark.slow,
    pytest.mark.skipif(not MNIST_DIR, reason="DDNN_MNIST_DIR not set"),
]


def _find(stem: str) -> str:
    for name in (stem, f"{stem}.gz"):
        path = Path(MNIST_DIR) / name
        if path.exists():
            return str(path)
    pytest.skip(f"{stem} not found in {MNIST_DIR}")


def _subset(dataset, count):
    return dataclasses.replace(dataset, X=dataset.X[:, :count], labels=dataset.labels[:count])


@pytest.fixture(scope="module")
def mnist():
    train = _subset(read_idx(_find("train-images-idx3-ubyte"), _find("train-labels-idx1-ubyte")), TRAIN_SAMPLES)
    test = _subset(read_idx(_find("t10k-images-idx3-ubyte"), _find("t10k-labels-idx1-ubyte")), TEST_SAMPLES)
    return train, test


class TestMnistBenchmark:
    """Three-layer network against a ridge classifier on raw pixels"""

    def test_ddnn1_accuracy(self, mnist):
        train, test = mnist
        normalized, params = normalize(train, "unit_scale")
        spec = build_network_spec(train.n_features, train.class_count, atoms=[200, 100, 50], max_iters=30)

        start = time.perf_counter()
        net = train_ddnn(normalized, spec)
        elapsed = time.perf_counter() - start

        report = evaluate(net, dataclasses.replace(test, X=apply_normalization(test.X, params)))

        baseline = train_ridge_baseline(normalized.X, normalized.labels, train.class_count, ridge=1.0)
        # test labels are remapped in their own first-appearance order
        to_train = np.asarray([train.label_mapping[value] for value in test.class_values])
        baseline_accuracy = float(np.mean(
            predict_ridge_baseline(baseline, apply_normalization(test.X, params)) == to_train[test.labels]
        ))

        logger.info(
            f"MNIST ddnn1: accuracy={report.accuracy:.4f} baseline={baseline_accuracy:.4f} "
            f"train_time={elapsed:.1f}s"
        )
        assert report.accuracy >= 0.90
        assert report.accuracy > baseline_accuracy
