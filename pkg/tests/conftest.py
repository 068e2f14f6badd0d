import csv

import numpy as np
import pytest

from src.data_access.models.dataset_model import Dataset
from src.data_access.models.spec_model import InversionGuard, LayerSpec, NetworkSpec
from src.services.synthetic import planted_class_data, planted_factorization


@pytest.fixture
def rng():
    """Seeded generator for test inputs"""
    return np.random.default_rng(1234)


@pytest.fixture
def planted_instance():
    """X = D* Z* with d=20, K=10, n=200"""
    return planted_factorization(d=20, atoms=10, n=200, seed=3)


@pytest.fixture
def planted_toy():
    """3 classes on orthogonal subspaces of R^32, small amplitude so tanh codes stay unsaturated"""
    return planted_class_data(d=32, n=300, classes=3, subspace_dim=4, noise=1e-2, scale=0.02, seed=11)


@pytest.fixture
def two_class_toy():
    return planted_class_data(d=16, n=120, classes=2, subspace_dim=3, noise=1e-2, scale=0.02, seed=5)


@pytest.fixture
def small_dataset():
    """Tiny labeled dataset with string labels in first-appearance order 7, 9"""
    X = np.array([[1.0, 2.0, 3.0, 4.0], [0.5, -1.0, 0.0, 2.0]])
    return Dataset(X=X, labels=np.array([0, 1, 0, 1]), class_values=("7", "9"))


def make_network_spec(atoms, **kwargs) -> NetworkSpec:
    """NetworkSpec with explicit per-layer seeds, ridge_ls/MOD layers and a short iteration cap"""
    layer_kwargs = {key: kwargs.pop(key) for key in ("max_iters", "tol", "ridge", "coder", "sparsity") if key in kwargs}
    layer_kwargs.setdefault("max_iters", 30)
    guard = kwargs.pop("guard", InversionGuard(clamp_margin=1e-6, noise_sigma=0.0, seed=1))
    layers = [LayerSpec(atoms=count, seed=100 + k, **layer_kwargs) for k, count in enumerate(atoms)]
    return NetworkSpec(layers=layers, guard=guard, **kwargs)


@pytest.fixture
def network_spec_factory():
    return make_network_spec


def write_csv_dataset(path, dataset: Dataset, label_column: str = "label") -> None:
    names = dataset.feature_names or [f"f{i}" for i in range(dataset.n_features)]
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(names + [label_column])
        for j in range(dataset.n_samples):
            row = [repr(float(v)) for v in dataset.X[:, j]]
            writer.writerow(row + [dataset.class_values[dataset.labels[j]]])


@pytest.fixture
def csv_fixture(tmp_path):
    """100-sample planted 3-class CSV with 12 features"""
    dataset = planted_class_data(d=12, n=100, classes=3, subspace_dim=2, noise=1e-2, scale=1.0, seed=21)
    path = tmp_path / "fixture.csv"
    write_csv_dataset(path, dataset)
    return path, dataset


@pytest.fixture
def csv_writer():
    return write_csv_dataset
