import logging

import numpy as np
import pytest

from src.data_access.models.dataset_model import Dataset
from src.data_access.models.network_model import LayerKind
from src.data_access.models.spec_model import (
    ActivationKind,
    InversionGuard,
    LayerSpec,
    NetworkSpec,
    SolverKind,
    Variant,
)
from src.services.lcksvd_service import build_targets, classify, refit_classifier, train_lcksvd1
from src.services.network_service import (
    build_network_spec,
    default_atoms,
    encode,
    encode_layers,
    evaluate,
    evaluate_predictions,
    predict,
    predict_indices,
    train_ddnn,
)
from src.services.synthetic import planted_class_data
from src.shared.exceptions import (
    ConfigError,
    DimensionMismatchError,
    LabelDomainError,
    LayerTrainingError,
    NonnegativityViolationError,
)
from src.shared.numerics import derive_seed


def _accuracy(net, dataset):
    indices, _ = predict_indices(net, dataset.X)
    return float(np.mean(indices == dataset.labels))


def _planted_toy(seed):
    return planted_class_data(d=32, n=300, classes=3, subspace_dim=4, noise=1e-2, scale=0.02, seed=seed)


@pytest.fixture
def toy_network(planted_toy, network_spec_factory):
    spec = network_spec_factory([32, 16, 8])
    return train_ddnn(planted_toy, spec), planted_toy


class TestTrainDdnn:
    """Greedy layer-wise training"""

    def test_single_layer_is_lcksvd1(self, planted_toy, network_spec_factory):
        spec = network_spec_factory([9])
        net = train_ddnn(planted_toy, spec)
        T = build_targets(planted_toy.labels, 3)
        final, _ = train_lcksvd1(planted_toy.X, T, spec.final_mu, spec.layers[0])
        assert net.layers == []
        assert np.array_equal(net.final.D, final.D)
        assert np.allclose(net.final_codes, encode(net, planted_toy.X))
        refit = refit_classifier(final, net.final_codes, T, ridge=spec.layers[0].ridge)
        assert np.allclose(net.final.M, refit.M)

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_planted_classes_at_defaults(self, seed):
        dataset = _planted_toy(seed)
        net = train_ddnn(dataset, build_network_spec(32, 3, atoms=[32, 16], seed=seed))
        assert _accuracy(net, dataset) >= 0.95

    def test_dimension_chain(self, toy_network):
        net, _ = toy_network
        assert net.dimension_chain() == [(32, 32), (32, 16), (16, 8)]
        assert net.depth == 3
        assert net.class_labels == ("0", "1", "2")
        assert all(layer.kind == LayerKind.UNSUPERVISED for layer in net.layers)

    def test_deterministic(self, planted_toy, network_spec_factory):
        spec = network_spec_factory([32, 16, 8], max_iters=5)
        a, b = train_ddnn(planted_toy, spec), train_ddnn(planted_toy, spec)
        assert np.array_equal(a.final.D, b.final.D)
        assert np.array_equal(a.final.M, b.final.M)
        for left, right in zip(a.layers, b.layers):
            assert np.array_equal(left.D, right.D)

    def test_noisy_guard_is_seeded(self, planted_toy, network_spec_factory):
        guard = InversionGuard(clamp_margin=1e-6, noise_sigma=1e-3, seed=9)
        spec = network_spec_factory([32, 16], max_iters=5, guard=guard)
        a, b = train_ddnn(planted_toy, spec), train_ddnn(planted_toy, spec)
        assert np.array_equal(a.final.D, b.final.D)

    def test_class_dictionary_variant(self, planted_toy, network_spec_factory):
        net = train_ddnn(planted_toy, network_spec_factory([12, 12], variant=Variant.DDNN2))
        layer = net.layers[0]
        assert layer.kind == LayerKind.CLASS_DICT
        assert layer.class_of_atom == [0] * 4 + [1] * 4 + [2] * 4
        assert net.final.W is not None
        assert _accuracy(net, planted_toy) >= 0.9

    def test_binary_variant(self, two_class_toy, network_spec_factory):
        spec = network_spec_factory([16, 8], variant=Variant.DDNN_BINARY, lam=1e-3)
        net = train_ddnn(two_class_toy, spec)
        assert net.layers[0].kind == LayerKind.LOGISTIC
        assert net.layers[0].theta.shape == (16,)
        assert _accuracy(net, two_class_toy) >= 0.9

    def test_class_dictionaries_match_plain_layers(self):
        # paired seeds, majority vote
        wins = 0
        for seed in range(5):
            dataset = _planted_toy(seed)
            plain = train_ddnn(dataset, build_network_spec(32, 3, atoms=[32, 16], seed=seed, variant="ddnn1"))
            blocked = train_ddnn(dataset, build_network_spec(32, 3, atoms=[32, 16], seed=seed, variant="ddnn2"))
            wins += _accuracy(blocked, dataset) >= _accuracy(plain, dataset)
        assert wins >= 3

    def test_binary_variant_needs_two_classes(self, planted_toy, network_spec_factory):
        with pytest.raises(ConfigError):
            train_ddnn(planted_toy, network_spec_factory([32, 16], variant=Variant.DDNN_BINARY))

    def test_final_layer_smaller_than_class_count(self, planted_toy, network_spec_factory):
        with pytest.raises(ConfigError):
            train_ddnn(planted_toy, network_spec_factory([32, 2]))

    def test_layer_failure_carries_index(self, small_dataset):
        spec = NetworkSpec(
            layers=[LayerSpec(atoms=2, solver=SolverKind.MULTIPLICATIVE), LayerSpec(atoms=2)],
            activation=ActivationKind.SIGMOID,
        )
        with pytest.raises(LayerTrainingError) as exc:
            train_ddnn(small_dataset, spec)
        assert exc.value.layer_index == 1
        assert isinstance(exc.value.cause, NonnegativityViolationError)


class TestInference:
    def test_encode_reproduces_training_codes(self, toy_network):
        net, dataset = toy_network
        codes = encode_layers(net, dataset.X)
        assert len(codes) == 3
        for layer, Z in zip(net.layers, codes):
            assert np.allclose(Z, layer.Z, atol=1e-8)
        assert np.allclose(codes[-1], net.final_codes, atol=1e-8)

    def test_class_dictionary_layer_keeps_label_free_codes(self, planted_toy, network_spec_factory):
        net = train_ddnn(planted_toy, network_spec_factory([12, 12], variant=Variant.DDNN2, max_iters=10))
        codes = encode_layers(net, planted_toy.X)
        assert np.allclose(codes[0], net.layers[0].Z, atol=1e-8)
        assert np.allclose(codes[-1], net.final_codes, atol=1e-8)

    def test_logistic_layer_keeps_label_free_codes(self, two_class_toy, network_spec_factory):
        spec = network_spec_factory([16, 8], variant=Variant.DDNN_BINARY, lam=1e-3, max_iters=10)
        net = train_ddnn(two_class_toy, spec)
        codes = encode_layers(net, two_class_toy.X)
        assert np.allclose(codes[0], net.layers[0].Z, atol=1e-8)

    def test_stored_codes_give_the_predictions(self, toy_network):
        net, dataset = toy_network
        stored, _ = classify(net.final, net.final_codes)
        predicted, _ = predict_indices(net, dataset.X)
        assert np.array_equal(stored, predicted)

    def test_columns_are_encoded_independently(self, toy_network):
        net, dataset = toy_network
        assert np.allclose(encode(net, dataset.X[:, :7]), encode(net, dataset.X)[:, :7], atol=1e-9)

    def test_permuting_columns_permutes_predictions(self, toy_network, rng):
        net, dataset = toy_network
        order = rng.permutation(dataset.n_samples)
        labels, _ = predict(net, dataset.X)
        shuffled, _ = predict(net, dataset.X[:, order])
        assert np.array_equal(shuffled, labels[order])

    def test_predict_returns_values_and_scores(self, toy_network):
        net, dataset = toy_network
        labels, scores = predict(net, dataset.X[:, :10])
        assert scores.shape == (3, 10)
        assert set(labels.tolist()) <= {"0", "1", "2"}

    def test_empty_input(self, toy_network):
        net, dataset = toy_network
        labels, scores = predict(net, np.zeros((dataset.n_features, 0)))
        assert labels.shape == (0,)
        assert scores.shape == (3, 0)

    def test_feature_dimension_checked(self, toy_network):
        net, _ = toy_network
        with pytest.raises(DimensionMismatchError) as exc:
            encode(net, np.ones((5, 2)))
        assert exc.value.expected == 32


class TestEvaluate:
    def test_report_values(self):
        report = evaluate_predictions([0, 0, 1, 1], [0, 1, 1, 1], 2)
        assert report.accuracy == pytest.approx(0.75)
        assert report.error_rate == pytest.approx(0.25)
        assert np.array_equal(report.confusion, [[1, 1], [0, 2]])
        assert np.allclose(report.per_class_accuracy, [0.5, 1.0])

    def test_absent_class_is_nan(self):
        report = evaluate_predictions([0, 1], [0, 1], 3)
        assert np.isnan(report.per_class_accuracy[2])
        assert report.accuracy == 1.0

    def test_matches_labels_by_value(self, toy_network):
        net, dataset = toy_network
        baseline = evaluate(net, dataset)
        # same samples, class values listed in a different order
        reordered = Dataset(
            X=dataset.X,
            labels=np.asarray([2, 1, 0])[dataset.labels],
            class_values=("2", "1", "0"),
        )
        assert evaluate(net, reordered).accuracy == pytest.approx(baseline.accuracy)
        assert baseline.accuracy == pytest.approx(_accuracy(net, dataset))

    def test_unknown_label_value(self, toy_network):
        net, dataset = toy_network
        foreign = Dataset(X=dataset.X[:, :2], labels=np.array([0, 0]), class_values=("5",))
        with pytest.raises(LabelDomainError):
            evaluate(net, foreign)


class TestBuildNetworkSpec:
    def test_defaults_halve(self):
        spec = build_network_spec(32, 3)
        assert spec.atoms == default_atoms(32) == [32, 16, 8]
        assert len({layer.seed for layer in spec.layers}) == 3
        assert spec.guard.seed == derive_seed(spec.seed, 1)

    def test_overrides(self):
        spec = build_network_spec(10, 2, atoms=[6, 3], mu=0.5, ridge=1e-4, seed=7, activation="sigmoid")
        assert spec.atoms == [6, 3]
        assert spec.final_mu == 0.5
        assert spec.seed == 7
        assert spec.activation is ActivationKind.SIGMOID
        assert all(layer.ridge == 1e-4 for layer in spec.layers)

    def test_none_values_are_ignored(self):
        assert build_network_spec(8, 2, atoms=None, ridge=None).atoms == [8, 4, 2]

    def test_schedule_warning(self, caplog):
        with caplog.at_level(logging.WARNING):
            build_network_spec(10, 2, atoms=[10, 8, 2])
        assert "halving" in caplog.text

    def test_final_layer_too_small(self):
        with pytest.raises(ConfigError) as exc:
            build_network_spec(10, 4, atoms=[6, 3])
        assert exc.value.key == "atoms"

    def test_unknown_option(self):
        with pytest.raises(ConfigError):
            build_network_spec(10, 2, depth=4)

    def test_invalid_layer_values(self):
        with pytest.raises(ConfigError):
            build_network_spec(8, 2, atoms=[4, 2], coder="omp", sparsity=3)
