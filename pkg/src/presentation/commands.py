"""
Command handlers behind the `ddnn` entry point. Each returns the process exit
status; domain errors propagate to the caller, which owns the diagnostic.
"""
import csv
import dataclasses
import time
from typing import Callable, Dict, Optional

import click
import numpy as np

from src.data_access.models.dataset_model import NormalizationParams
from src.data_access.repositories.csv_repository import CsvDatasetRepository
from src.data_access.repositories.idx_repository import IdxDatasetRepository
from src.data_access.repositories.interfaces import IDatasetRepository
from src.data_access.repositories.model_repository import ModelRepository
from src.presentation.formatters import format_inspect, format_report, format_train_summary
from src.presentation.schemas.run_config import CommandEnum, RunConfig
from src.services import network_service
from src.services.normalization_service import apply_normalization, normalize
from src.shared.exceptions import DatasetIOError, DimensionMismatchError
from src.shared.logging import get_logger
from src.shared.numerics import Matrix

logger = get_logger(__name__)

models = ModelRepository()


def dataset_repository(config: RunConfig) -> IDatasetRepository:
    if str(config.data).lower().endswith(".csv"):
        return CsvDatasetRepository(config.label_column)
    return IdxDatasetRepository()


def _normalized(X: Matrix, params: Optional[NormalizationParams], input_dim: int) -> Matrix:
    if X.shape[0] != input_dim:
        raise DimensionMismatchError("feature dimension (model vs data)", input_dim, X.shape[0])
    return apply_normalization(X, params) if params is not None else X


def run_train(config: RunConfig) -> int:
    dataset = dataset_repository(config).read_dataset(config.data, config.labels)
    dataset, params = normalize(dataset, config.normalize, config.activation, config.delta)
    spec = network_service.build_network_spec(
        dataset.n_features, dataset.class_count, **config.network_overrides()
    )

    start = time.perf_counter()
    net = network_service.train_ddnn(dataset, spec)
    elapsed = time.perf_counter() - start

    models.save(net, params, config.model)
    click.echo(format_train_summary(net, elapsed))
    return 0


def run_eval(config: RunConfig) -> int:
    net, params = models.load(config.model)
    dataset = dataset_repository(config).read_dataset(config.data, config.labels)
    X = _normalized(dataset.X, params, net.input_dim)
    report = network_service.evaluate(net, dataclasses.replace(dataset, X=X))
    click.echo(format_report(report, config.format))
    return 0


def _write_scores(path: str, labels, scores: Matrix) -> None:
    try:
        with open(path, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f)
            writer.writerow(labels)
            for column in scores.T:
                writer.writerow([repr(float(v)) for v in column])
    except OSError as e:
        raise DatasetIOError(path, f"cannot write scores: {e.strerror or e}") from e


def run_predict(config: RunConfig) -> int:
    net, params = models.load(config.model)
    X = dataset_repository(config).read_features(config.data)

    if X.shape[1] == 0:
        predicted, scores = np.asarray([], dtype=str), np.zeros((len(net.class_labels), 0))
    else:
        predicted, scores = network_service.predict(net, _normalized(X, params, net.input_dim))

    lines = "".join(f"{label}\n" for label in predicted)
    if config.out:
        try:
            with open(config.out, "w", encoding="utf-8") as f:
                f.write(lines)
        except OSError as e:
            raise DatasetIOError(config.out, f"cannot write predictions: {e.strerror or e}") from e
    else:
        click.echo(lines, nl=False)
    if config.scores:
        _write_scores(config.scores, net.class_labels, scores)
    logger.info(f"Predicted {len(predicted)} samples")
    return 0


def run_inspect(config: RunConfig) -> int:
    # full load first so a damaged payload is reported, not just a bad header
    models.load(config.model)
    click.echo(format_inspect(models.read_header(config.model)))
    return 0


COMMANDS: Dict[CommandEnum, Callable[[RunConfig], int]] = {
    CommandEnum.TRAIN: run_train,
    CommandEnum.EVAL: run_eval,
    CommandEnum.PREDICT: run_predict,
    CommandEnum.INSPECT: run_inspect,
}
