import numpy as np
import pytest

from src.data_access.models.dataset_model import Dataset, NormalizationParams
from src.data_access.models.spec_model import ActivationKind, NormalizationMode
from src.services.normalization_service import apply_normalization, fit_normalization, normalize
from src.shared.exceptions import ConfigError, DimensionMismatchError


class TestNormalization:
    """Fitted transforms and their replay on new data"""

    def test_none_is_a_copy(self, small_dataset):
        out, params = normalize(small_dataset, NormalizationMode.NONE)
        assert np.array_equal(out.X, small_dataset.X)
        assert out.X is not small_dataset.X
        assert params.mode == "none"

    def test_unit_scale(self, small_dataset):
        out, params = normalize(small_dataset, NormalizationMode.UNIT_SCALE)
        assert params.scale == 4.0
        assert np.max(np.abs(out.X)) == 1.0
        assert np.array_equal(out.labels, small_dataset.labels)

    def test_unit_scale_of_zeros(self):
        params = fit_normalization(np.zeros((2, 3)), NormalizationMode.UNIT_SCALE)
        assert params.scale == 1.0

    def test_standardize(self, rng):
        X = rng.standard_normal((3, 50)) * 4.0 + 2.0
        params = fit_normalization(X, NormalizationMode.PER_FEATURE_STANDARDIZE)
        out = apply_normalization(X, params)
        assert np.allclose(out.mean(axis=1), 0.0, atol=1e-12)
        assert np.allclose(out.std(axis=1), 1.0)

    def test_zero_variance_feature_passes_through(self):
        X = np.array([[1.0, 2.0, 3.0], [5.0, 5.0, 5.0]])
        params = fit_normalization(X, NormalizationMode.PER_FEATURE_STANDARDIZE)
        out = apply_normalization(X, params)
        assert params.passthrough_features == [1]
        assert np.array_equal(out[1], [5.0, 5.0, 5.0])
        assert np.allclose(out[0], [-np.sqrt(1.5), 0.0, np.sqrt(1.5)])

    def test_standardize_replay_checks_dimension(self, rng):
        params = fit_normalization(rng.standard_normal((3, 5)), NormalizationMode.PER_FEATURE_STANDARDIZE)
        with pytest.raises(DimensionMismatchError):
            apply_normalization(np.ones((4, 2)), params)

    @pytest.mark.parametrize("kind, low, high", [
        (ActivationKind.TANH, -1.0, 1.0),
        (ActivationKind.SIGMOID, 0.0, 1.0),
    ])
    def test_squash_hits_target_range(self, rng, kind, low, high):
        X = rng.uniform(-7.0, 3.0, (4, 30))
        params = fit_normalization(X, NormalizationMode.SQUASH_TO_ACTIVATION_RANGE, kind, delta=1e-3)
        out = apply_normalization(X, params)
        assert np.min(out) == pytest.approx(low + 1e-3)
        assert np.max(out) == pytest.approx(high - 1e-3)

    def test_squash_needs_bounded_activation(self, rng):
        with pytest.raises(ConfigError):
            fit_normalization(rng.standard_normal((2, 3)), NormalizationMode.SQUASH_TO_ACTIVATION_RANGE,
                              ActivationKind.IDENTITY)

    def test_replay_uses_training_parameters(self, rng):
        train = rng.uniform(0.0, 2.0, (3, 20))
        params = fit_normalization(train, NormalizationMode.UNIT_SCALE)
        new = np.full((3, 1), 4.0)
        assert np.allclose(apply_normalization(new, params), 4.0 / params.scale)

    def test_params_dict_round_trip(self, rng):
        params = fit_normalization(rng.standard_normal((3, 5)), NormalizationMode.PER_FEATURE_STANDARDIZE)
        assert NormalizationParams.from_dict(params.to_dict()) == params

    def test_empty_dataset(self):
        dataset = Dataset(X=np.zeros((3, 0)), labels=np.zeros(0, dtype=np.int64), class_values=())
        out, params = normalize(dataset, NormalizationMode.UNIT_SCALE)
        assert out.X.shape == (3, 0)
        assert params.scale == 1.0
