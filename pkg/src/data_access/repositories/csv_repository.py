"""
Comma-separated datasets: header row required, one sample per row, decimal reals.
Rows and columns in error messages are 1-based file positions (the header is row 1).
"""
import csv
import math
from typing import List, Optional, Tuple

import numpy as np

from src.data_access.models.dataset_model import Dataset, remap_labels
from src.data_access.repositories.interfaces import IDatasetRepository
from src.shared.config import settings
from src.shared.exceptions import CsvParseError, DatasetIOError
from src.shared.logging import get_logger
from src.shared.numerics import Matrix

logger = get_logger(__name__)


def _read_rows(path: str) -> List[List[str]]:
    try:
        with open(path, newline="", encoding="utf-8") as f:
            return [row for row in csv.reader(f) if row]
    except (OSError, UnicodeDecodeError) as e:
        raise DatasetIOError(str(path), f"cannot read: {e}") from e


def _parse(path: str, label_column: Optional[str],
           require_label: bool) -> Tuple[List[str], Matrix, Optional[List[str]]]:
    rows = _read_rows(path)
    if not rows:
        if require_label:
            raise CsvParseError(str(path), 1, 1, "missing header row")
        return [], np.zeros((0, 0)), None

    header = [name.strip() for name in rows[0]]
    label_index: Optional[int] = None
    if label_column is not None and label_column in header:
        label_index = header.index(label_column)
    elif require_label:
        raise CsvParseError(str(path), 1, 1, f"no column named '{label_column}'")

    features = [i for i in range(len(header)) if i != label_index]
    X = np.empty((len(features), len(rows) - 1))
    labels: List[str] = []
    for r, row in enumerate(rows[1:]):
        line = r + 2
        if len(row) != len(header):
            raise CsvParseError(str(path), line, min(len(row), len(header)) + 1,
                                f"expected {len(header)} cells, found {len(row)}")
        for j, i in enumerate(features):
            try:
                value = float(row[i])
            except ValueError:
                raise CsvParseError(str(path), line, i + 1, f"non-numeric cell {row[i]!r}") from None
            if not math.isfinite(value):
                raise CsvParseError(str(path), line, i + 1, f"non-finite cell {row[i]!r}")
            X[j, r] = value
        if label_index is not None:
            labels.append(row[label_index].strip())

    names = [header[i] for i in features]
    return names, X, labels if label_index is not None else None


def read_csv_dataset(path: str, label_column: str = settings.label_column) -> Dataset:
    names, X, raw_labels = _parse(path, label_column, require_label=True)
    labels, class_values = remap_labels(raw_labels or [])
    logger.info(f"Read {X.shape[1]} samples with {X.shape[0]} features and {len(class_values)} classes from {path}")
    return Dataset(X=X, labels=labels, class_values=class_values, feature_names=names)


def read_csv_features(path: str, label_column: Optional[str] = None) -> Matrix:
    """Unlabeled samples; the label column is dropped when present."""
    _, X, _ = _parse(path, label_column, require_label=False)
    return X


class CsvDatasetRepository(IDatasetRepository):
    """Dataset repository over CSV files"""

    def __init__(self, label_column: str = settings.label_column):
        self.label_column = label_column

    def read_dataset(self, data_path: str, labels_path: Optional[str] = None) -> Dataset:
        return read_csv_dataset(data_path, self.label_column)

    def read_features(self, data_path: str) -> Matrix:
        return read_csv_features(data_path, self.label_column)
