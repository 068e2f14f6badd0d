import math

import numpy as np
import pytest

from src.data_access.models.network_model import LayerKind
from src.data_access.models.spec_model import ClassDictSpec, LayerSpec, LogisticLayerSpec
from src.services.dictionary_service import train_layer
from src.services.supervised_service import (
    class_dict_objective,
    classify_by_block_residual,
    incoherence_penalty,
    layer_from_class_model,
    logistic_loss,
    predict_logistic,
    supervised_gradients,
    supervised_objective,
    train_class_discriminative,
    train_supervised_logistic,
)
from src.services.synthetic import planted_class_data
from src.shared.exceptions import ClassCoverageError, LabelDomainError
from src.shared.numerics import normalize_columns

H = 1e-5


def _relative_error(a, b):
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return np.linalg.norm(a - b) / max(np.linalg.norm(a), np.linalg.norm(b), 1e-12)


class TestLogisticLoss:
    def test_zero_scores(self):
        assert logistic_loss([1, -1, 1], [0.0, 0.0, 0.0]) == pytest.approx(math.log(2.0))

    def test_saturation(self):
        assert logistic_loss([1], [100.0]) < 1e-30

    def test_misclassified_margin(self):
        assert logistic_loss([1], [-1.0]) == pytest.approx(math.log1p(math.e), rel=1e-12)

    def test_large_negative_margin_is_linear(self):
        assert logistic_loss([1], [-1000.0]) == pytest.approx(1000.0)

    def test_label_domain(self):
        with pytest.raises(LabelDomainError):
            logistic_loss([0, 1], [0.0, 0.0])


class TestSupervisedGradients:
    """Analytic derivatives against central finite differences"""

    @pytest.fixture
    def instance(self, rng):
        X = rng.standard_normal((4, 6))
        D, _ = normalize_columns(rng.standard_normal((4, 3)))
        Z = rng.standard_normal((3, 6))
        y = np.array([1.0, -1.0, 1.0, 1.0, -1.0, -1.0])
        theta = rng.standard_normal(3)
        return X, y, D, Z, theta, 0.3

    def test_gradients_match_finite_differences(self, instance):
        X, y, D, Z, theta, b = instance
        lam, ridge = 0.7, 0.05
        grad_z, grad_theta, grad_b = supervised_gradients(X, y, D, Z, theta, b, lam, ridge)

        def f(Z_=Z, theta_=theta, b_=b):
            return supervised_objective(X, y, D, Z_, theta_, b_, lam, ridge)

        numeric_theta = np.array([
            (f(theta_=theta + H * e) - f(theta_=theta - H * e)) / (2 * H) for e in np.eye(3)
        ])
        assert _relative_error(grad_theta, numeric_theta) <= 1e-4

        numeric_b = (f(b_=b + H) - f(b_=b - H)) / (2 * H)
        assert _relative_error([grad_b], [numeric_b]) <= 1e-4

        column = 2
        numeric_z = []
        for k in range(3):
            step = np.zeros_like(Z)
            step[k, column] = H
            numeric_z.append((f(Z_=Z + step) - f(Z_=Z - step)) / (2 * H))
        assert _relative_error(grad_z[:, column], numeric_z) <= 1e-4

    def test_predict_logistic_sign(self):
        Z = np.array([[1.0, -1.0, 0.0]])
        assert predict_logistic(np.array([1.0]), 0.0, Z).tolist() == [1, -1, 1]


class TestTrainSupervisedLogistic:
    def test_vanishing_weight_matches_unsupervised_layer(self, rng):
        X = rng.standard_normal((6, 40))
        y = np.where(rng.standard_normal(40) > 0, 1.0, -1.0)
        spec = LogisticLayerSpec(atoms=4, lam=1e-12, max_iters=5, tol=1e-12, seed=3)
        layer, _, _ = train_supervised_logistic(X, y, spec)
        reference = train_layer(X, LayerSpec(atoms=4, max_iters=5, tol=1e-12, seed=3))
        assert layer.iterations == reference.iterations
        assert np.max(np.abs(layer.D - reference.D)) <= 1e-6

    def test_separable_blobs(self, rng):
        n = 100
        y = np.where(np.arange(n) % 2 == 0, 1.0, -1.0)
        X = 0.5 * rng.standard_normal((2, n)) + 3.0 * np.outer([1.0, 1.0], y)
        layer, theta, b = train_supervised_logistic(X, y, LogisticLayerSpec(atoms=2, max_iters=20, seed=1))
        assert np.array_equal(predict_logistic(theta, b, layer.Z), y.astype(int))
        assert layer.kind == LayerKind.LOGISTIC
        assert np.array_equal(layer.theta, theta)

    @pytest.mark.parametrize("trial", range(25))
    def test_objective_trace_non_increasing(self, trial):
        rng = np.random.default_rng(trial)
        X = rng.standard_normal((5, 30))
        y = np.where(rng.standard_normal(30) > 0, 1.0, -1.0)
        layer, _, _ = train_supervised_logistic(X, y, LogisticLayerSpec(atoms=3, max_iters=10, seed=trial))
        assert np.all(np.diff(layer.loss_trace) <= 0.0)
        assert np.allclose(np.linalg.norm(layer.D, axis=0), 1.0)

    def test_rejects_non_binary_labels(self, rng):
        with pytest.raises(LabelDomainError):
            train_supervised_logistic(rng.standard_normal((3, 4)), [0, 1, 0, 1], LogisticLayerSpec(atoms=2))


class TestIncoherencePenalty:
    def test_orthogonal_dictionaries(self):
        I = np.eye(4)
        value, grads = incoherence_penalty([I[:, :2], I[:, 2:]])
        assert value == 0.0
        assert all(np.allclose(g, 0.0) for g in grads)

    def test_identical_single_atoms_count_both_orders(self):
        d = np.array([[1.0], [0.0]])
        value, _ = incoherence_penalty([d, d.copy()])
        assert value == pytest.approx(2.0)

    def test_gradient_matches_finite_differences(self, rng):
        dicts = [rng.standard_normal((5, 2)) for _ in range(3)]
        _, grads = incoherence_penalty(dicts)
        for i, D in enumerate(dicts):
            numeric = np.zeros_like(D)
            for r in range(D.shape[0]):
                for c in range(D.shape[1]):
                    plus = [m.copy() for m in dicts]
                    minus = [m.copy() for m in dicts]
                    plus[i][r, c] += H
                    minus[i][r, c] -= H
                    numeric[r, c] = (incoherence_penalty(plus)[0] - incoherence_penalty(minus)[0]) / (2 * H)
            assert _relative_error(grads[i], numeric) <= 1e-6

    def test_rotation_invariance(self, rng):
        dicts = [rng.standard_normal((4, 2)) for _ in range(3)]
        Q, _ = np.linalg.qr(rng.standard_normal((4, 4)))
        value, _ = incoherence_penalty(dicts)
        rotated, _ = incoherence_penalty([Q @ D for D in dicts])
        assert abs(value - rotated) <= 1e-9


class TestClassDiscriminative:
    """Class-specific plus shared dictionaries with a hard support mask"""

    def test_single_class_doubles_layer_objective(self, rng):
        X = rng.standard_normal((6, 30))
        spec = ClassDictSpec(classes=1, atoms_per_class=3, shared_atoms=0, max_iters=8, seed=4)
        model = train_class_discriminative(X, np.zeros(30, dtype=int), spec)
        reference = train_layer(X, LayerSpec(atoms=3, max_iters=8, seed=4))
        assert np.allclose(model.D, reference.D, atol=1e-9)
        assert np.allclose(model.loss_trace, 2.0 * np.asarray(reference.loss_trace), rtol=1e-9)

    def test_support_mask_is_hard(self):
        dataset = planted_class_data(d=12, n=60, classes=2, subspace_dim=2, noise=1e-2, seed=2)
        spec = ClassDictSpec(classes=2, atoms_per_class=3, shared_atoms=1, max_iters=5)
        model = train_class_discriminative(dataset.X, dataset.labels, spec)
        layout = np.asarray(model.class_of_atom)
        for c in range(2):
            foreign = (layout != c) & (layout != -1)
            assert np.all(model.Z[np.ix_(foreign, dataset.labels == c)] == 0.0)

    def test_block_residual_classification(self):
        dataset = planted_class_data(d=16, n=150, classes=3, subspace_dim=3, noise=1e-2, seed=8)
        spec = ClassDictSpec(classes=3, atoms_per_class=4, shared_atoms=2, max_iters=30)
        model = train_class_discriminative(dataset.X, dataset.labels, spec)
        predicted = classify_by_block_residual(model, dataset.X, ridge=1e-8)
        assert np.mean(predicted == dataset.labels) >= 0.95

    @pytest.mark.parametrize("trial", range(25))
    def test_trace_non_increasing_without_incoherence(self, trial):
        rng = np.random.default_rng(trial)
        X = rng.standard_normal((8, 40))
        labels = rng.permutation(np.arange(40) % 2)
        spec = ClassDictSpec(classes=2, atoms_per_class=2, shared_atoms=1, max_iters=10, seed=trial)
        model = train_class_discriminative(X, labels, spec)
        assert np.all(np.diff(model.loss_trace) <= 0.0)

    def test_incoherence_keeps_unit_atoms(self, rng):
        X = rng.standard_normal((8, 40))
        spec = ClassDictSpec(classes=2, atoms_per_class=3, shared_atoms=1, eta=0.5, max_iters=5)
        model = train_class_discriminative(X, np.arange(40) % 2, spec)
        assert np.allclose(np.linalg.norm(model.D, axis=0), 1.0)
        assert len(model.loss_trace) >= 2

    def test_objective_recomputes_final_trace_value(self, rng):
        X = rng.standard_normal((6, 20))
        labels = np.arange(20) % 2
        spec = ClassDictSpec(classes=2, atoms_per_class=2, shared_atoms=1, eta=0.2, max_iters=4)
        model = train_class_discriminative(X, labels, spec)
        assert class_dict_objective(X, labels, model, eta=0.2, ridge=spec.ridge) == pytest.approx(model.loss_trace[-1])

    def test_empty_class(self, rng):
        spec = ClassDictSpec(classes=3, atoms_per_class=1)
        with pytest.raises(ClassCoverageError) as exc:
            train_class_discriminative(rng.standard_normal((4, 6)), [0, 1, 0, 1, 0, 1], spec)
        assert exc.value.missing_classes == [2]

    def test_uniform_split(self):
        spec = ClassDictSpec.uniform(11, 3)
        assert (spec.atoms_per_class, spec.shared_atoms, spec.total_atoms) == (3, 2, 11)

    def test_layer_conversion(self, rng):
        spec = ClassDictSpec(classes=2, atoms_per_class=2, shared_atoms=1, max_iters=3)
        model = train_class_discriminative(rng.standard_normal((5, 10)), np.arange(10) % 2, spec)
        layer = layer_from_class_model(model)
        assert layer.kind == LayerKind.CLASS_DICT
        assert layer.class_of_atom == [0, 0, 1, 1, -1]
        assert np.array_equal(layer.D, model.D)
