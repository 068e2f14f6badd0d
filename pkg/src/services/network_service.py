"""
Greedy layer-wise training and inference for deep dictionary networks.

Layer 1 factors X; every later layer factors the inverted activation of the
previous layer's codes; the final layer is LC-KSVD1 (ddnn1, ddnn_binary)
or LC-KSVD2 (ddnn2).
"""
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import numpy.typing as npt
from pydantic import ValidationError

from src.data_access.models.dataset_model import Dataset
from src.data_access.models.network_model import EvaluationReport, LayerKind, TrainedLayer, TrainedNetwork
from src.data_access.models.spec_model import (
    ClassDictSpec,
    InversionGuard,
    LayerSpec,
    LogisticLayerSpec,
    NetworkSpec,
    Variant,
)
from src.services import activation
from src.services.dictionary_service import encode_codes, train_layer
from src.services.lcksvd_service import (
    build_discriminative_code,
    build_targets,
    classify,
    refit_classifier,
    train_lcksvd1,
    train_lcksvd2,
    uniform_allocation,
)
from src.services.supervised_service import (
    layer_from_class_model,
    train_class_discriminative,
    train_supervised_logistic,
)
from src.shared.config import settings
from src.shared.exceptions import ConfigError, DDNNError, DimensionMismatchError, LabelDomainError, LayerTrainingError
from src.shared.logging import get_logger
from src.shared.monitoring import record_layer
from src.shared.numerics import Matrix, as_matrix, derive_seed

logger = get_logger(__name__)

_LAYER_SEED_STREAM = 0
_GUARD_SEED_STREAM = 1

_LAYER_KEYS = ("solver", "coder", "sparsity", "ridge", "max_iters", "tol")
_NETWORK_KEYS = (
    "variant", "activation", "final_mu", "eta", "lam", "logistic_step", "logistic_inner_iters",
    "test_coder", "test_sparsity", "test_ridge",
)


def default_atoms(input_dim: int) -> List[int]:
    """Three layers, halving the atom count each time."""
    return [max(input_dim, 1), max(input_dim // 2, 1), max(input_dim // 4, 1)]


def build_network_spec(input_dim: int, class_count: int, **overrides: Any) -> NetworkSpec:
    """
    Assemble a NetworkSpec from settings defaults and explicit overrides.

    Recognized overrides: atoms (list), seed, clamp_margin, noise_sigma, mu,
    the per-layer keys solver/coder/sparsity/ridge/max_iters/tol and the
    network keys variant/activation/eta/lam/logistic_step/
    logistic_inner_iters/test_coder/test_sparsity/test_ridge.
    Every layer gets its own seed derived from the network seed.
    """
    overrides = {key: value for key, value in overrides.items() if value is not None}
    atoms = list(overrides.pop("atoms", None) or default_atoms(input_dim))
    seed = int(overrides.pop("seed", settings.seed))
    if "mu" in overrides:
        overrides["final_mu"] = overrides.pop("mu")

    if atoms[-1] < class_count:
        raise ConfigError("atoms", f"final layer has {atoms[-1]} atoms for {class_count} classes")
    halving = [atoms[0] // 2 ** k for k in range(len(atoms))]
    if atoms != halving:
        logger.warning(f"atom schedule {atoms} deviates from the halving convention {halving}")

    layer_fields = {key: overrides.pop(key) for key in _LAYER_KEYS if key in overrides}
    guard_fields = {
        "clamp_margin": overrides.pop("clamp_margin", settings.clamp_margin),
        "noise_sigma": overrides.pop("noise_sigma", settings.noise_sigma),
        "seed": derive_seed(seed, _GUARD_SEED_STREAM),
    }
    network_fields = {key: overrides.pop(key) for key in _NETWORK_KEYS if key in overrides}
    if overrides:
        raise ConfigError(next(iter(overrides)), "unknown network option")

    try:
        layers = [
            LayerSpec(atoms=count, seed=derive_seed(seed, _LAYER_SEED_STREAM, k), **layer_fields)
            for k, count in enumerate(atoms)
        ]
        return NetworkSpec(
            layers=layers,
            guard=InversionGuard(**guard_fields),
            seed=seed,
            **network_fields,
        )
    except ValidationError as e:
        error = e.errors()[0]
        key = ".".join(str(part) for part in error["loc"]) or "network"
        raise ConfigError(key, error["msg"]) from None


def _layer_guard(guard: InversionGuard, layer_index: int) -> InversionGuard:
    return guard.model_copy(update={"seed": derive_seed(guard.seed, layer_index)})


def _train_prefinal(V: Matrix, labels: npt.NDArray[np.int64], class_count: int, layer_spec: LayerSpec,
                    spec: NetworkSpec) -> TrainedLayer:
    if spec.variant is Variant.DDNN2:
        try:
            class_spec = ClassDictSpec.uniform(
                layer_spec.atoms, class_count, eta=spec.eta, ridge=layer_spec.ridge,
                tol=layer_spec.tol, max_iters=layer_spec.max_iters, seed=layer_spec.seed,
            )
        except ValidationError:
            raise ConfigError("atoms", f"{layer_spec.atoms} atoms cannot hold {class_count} class blocks") from None
        return layer_from_class_model(train_class_discriminative(V, labels, class_spec))

    if spec.variant is Variant.DDNN_BINARY:
        logistic_spec = LogisticLayerSpec(
            atoms=layer_spec.atoms, lam=spec.lam, step=spec.logistic_step,
            inner_iters=spec.logistic_inner_iters, max_iters=layer_spec.max_iters,
            ridge=layer_spec.ridge, tol=layer_spec.tol, seed=layer_spec.seed,
        )
        layer, _, _ = train_supervised_logistic(V, 2.0 * labels - 1.0, logistic_spec)
        return layer

    return train_layer(V, layer_spec)


def _deployed_codes(D: Matrix, V: Matrix, spec: NetworkSpec, layer_index: int) -> Matrix:
    """Label-free codes of V, computed the way encode_layers computes them."""
    return encode_codes(D, V, spec.test_coder, spec.test_sparsity, _test_ridge(spec, layer_index))


def train_ddnn(dataset: Dataset, spec: NetworkSpec) -> TrainedNetwork:
    """
    Train every layer in turn; layer errors are re-raised as LayerTrainingError
    carrying the 1-based layer index.

    Supervised pre-final layers (class dictionaries, logistic layers) keep the
    label-free codes of their training samples, and the final classifier is
    refit on the codes encode() produces, so training and prediction see the
    same features.
    """
    X = as_matrix(dataset.X, "X")
    labels = dataset.labels
    class_count = dataset.class_count
    if spec.layers[-1].atoms < class_count:
        raise ConfigError("atoms", f"final layer has {spec.layers[-1].atoms} atoms for {class_count} classes")
    if spec.variant is Variant.DDNN_BINARY and class_count != 2:
        raise ConfigError("variant", f"ddnn_binary needs exactly 2 classes, got {class_count}")

    logger.info(
        f"Training {spec.variant.value} network: input {X.shape[0]}, atoms {spec.atoms}, "
        f"{dataset.n_samples} samples, {class_count} classes"
    )

    V = X
    layers: List[TrainedLayer] = []
    for k, layer_spec in enumerate(spec.layers[:-1], start=1):
        try:
            layer = _train_prefinal(V, labels, class_count, layer_spec, spec)
            if layer.kind != LayerKind.UNSUPERVISED:
                layer.Z = _deployed_codes(layer.D, V, spec, k - 1)
        except DDNNError as e:
            raise LayerTrainingError(k, e) from e
        logger.info(
            f"layer {k} ({layer.kind}): {layer.input_dim} -> {layer.atoms}, "
            f"iterations={layer.iterations}, objective={layer.final_objective:.6e}, stop={layer.stop_reason}"
        )
        record_layer(layer.kind, k, layer.iterations, layer.final_objective)
        layers.append(layer)
        V = activation.invert(spec.activation, layer.Z, _layer_guard(spec.guard, k))

    final_index = spec.depth
    final_spec = spec.layers[-1]
    T = build_targets(labels, class_count)
    H: Optional[Matrix] = None
    try:
        if spec.variant is Variant.DDNN2:
            allocation = uniform_allocation(final_spec.atoms, class_count)
            H = build_discriminative_code(labels, allocation)
            final, _ = train_lcksvd2(V, T, H, spec.final_mu, final_spec, allocation)
        else:
            final, _ = train_lcksvd1(V, T, spec.final_mu, final_spec)
    except DDNNError as e:
        raise LayerTrainingError(final_index, e) from e
    logger.info(
        f"layer {final_index} (final): {final.D.shape[0]} -> {final.atoms}, "
        f"iterations={final.iterations}, objective={final.final_objective:.6e}, stop={final.stop_reason}"
    )
    record_layer("final", final_index, final.iterations, final.final_objective)

    net = TrainedNetwork(
        layers=layers,
        final=final,
        final_codes=np.empty((final.atoms, 0)),
        activation=spec.activation,
        guard=spec.guard,
        class_labels=tuple(dataset.class_values),
        spec=spec,
    )
    try:
        net.final_codes = encode(net, X)
        net.final = refit_classifier(final, net.final_codes, T, H, final_spec.ridge)
    except DDNNError as e:
        raise LayerTrainingError(final_index, e) from e
    return net


def _test_ridge(spec: NetworkSpec, layer_index: int) -> float:
    if spec.test_ridge is not None:
        return spec.test_ridge
    return spec.layers[layer_index].ridge


def encode_layers(net: TrainedNetwork, X: Matrix) -> List[Matrix]:
    """Codes of every layer (final layer last) for the columns of X."""
    X = as_matrix(X, "X", allow_empty=True)
    if X.shape[0] != net.input_dim:
        raise DimensionMismatchError("feature dimension", net.input_dim, X.shape[0])
    guard = activation.without_noise(net.guard)

    codes: List[Matrix] = []
    V = X
    for k, layer in enumerate(net.layers):
        Z = _deployed_codes(layer.D, V, net.spec, k)
        codes.append(Z)
        V = activation.invert(net.activation, Z, guard)
    codes.append(_deployed_codes(net.final.D, V, net.spec, len(net.layers)))
    return codes


def encode(net: TrainedNetwork, X: Matrix) -> Matrix:
    return encode_layers(net, X)[-1]


def predict_indices(net: TrainedNetwork, X: Matrix) -> Tuple[npt.NDArray[np.int64], Matrix]:
    return classify(net.final, encode(net, X))


def predict(net: TrainedNetwork, X: Matrix) -> Tuple[npt.NDArray[np.str_], Matrix]:
    """
    Returns:
        (original label value per sample, C x n score matrix)
    """
    indices, scores = predict_indices(net, X)
    values = np.asarray(net.class_labels, dtype=str)
    return values[indices], scores


def evaluate_predictions(true_idx: Sequence[int], pred_idx: Sequence[int], class_count: int,
                         class_labels: Optional[Tuple[str, ...]] = None) -> EvaluationReport:
    """Accuracy, error rate, per-class accuracy (NaN for absent classes) and confusion matrix."""
    true_idx = np.asarray(true_idx, dtype=np.int64)
    pred_idx = np.asarray(pred_idx, dtype=np.int64)
    if true_idx.shape != pred_idx.shape:
        raise DimensionMismatchError("prediction count", true_idx.size, pred_idx.size)

    confusion = np.zeros((class_count, class_count), dtype=np.int64)
    np.add.at(confusion, (true_idx, pred_idx), 1)

    n = true_idx.size
    accuracy = float(np.trace(confusion)) / n if n else float("nan")
    support = confusion.sum(axis=1)
    per_class = np.full(class_count, np.nan)
    present = support > 0
    per_class[present] = np.diag(confusion)[present] / support[present]

    return EvaluationReport(
        accuracy=accuracy,
        error_rate=1.0 - accuracy,
        per_class_accuracy=per_class,
        confusion=confusion,
        class_labels=class_labels or tuple(str(c) for c in range(class_count)),
    )


def evaluate(net: TrainedNetwork, dataset: Dataset) -> EvaluationReport:
    """Compare predictions with the dataset's labels, matched to the network's classes by value."""
    mapping: Dict[str, int] = {value: index for index, value in enumerate(net.class_labels)}
    unknown = [value for value in dataset.class_values if value not in mapping]
    if unknown:
        raise LabelDomainError(unknown[0], f"network classes {list(net.class_labels)}")
    to_network = np.asarray([mapping[value] for value in dataset.class_values], dtype=np.int64)
    true_idx = to_network[dataset.labels]

    pred_idx, _ = predict_indices(net, dataset.X)
    return evaluate_predictions(true_idx, pred_idx, len(net.class_labels), tuple(net.class_labels))
