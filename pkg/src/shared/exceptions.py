"""Custom exceptions for the application"""
from typing import Optional, Sequence


class DDNNError(Exception):
    """Base exception for every domain error"""
    pass


class ConfigError(DDNNError):
    """Raised when a configuration value is missing or invalid"""
    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(f"{key}: {message}")


class NonFiniteError(DDNNError):
    """Raised when a matrix holds NaN or infinite entries"""
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"matrix '{name}' contains non-finite entries")


class DimensionMismatchError(DDNNError):
    """Raised when two operands disagree on a dimension"""
    def __init__(self, what: str, expected: int, actual: int):
        self.what = what
        self.expected = expected
        self.actual = actual
        super().__init__(f"{what}: expected {expected}, got {actual}")


class SolverSingularError(DDNNError):
    """Raised when an unregularized normal matrix cannot be factored"""
    def __init__(self, dimension: int, pivot: Optional[int] = None):
        self.dimension = dimension
        self.pivot = pivot
        where = f" at pivot {pivot}" if pivot is not None else ""
        super().__init__(
            f"normal matrix of dimension {dimension} is singular{where}; use ridge > 0"
        )


class DegenerateAtomError(DDNNError):
    """Raised when a dictionary column collapses to zero"""
    def __init__(self, column: int):
        self.column = column
        super().__init__(f"column {column} has zero norm")


class NonnegativityViolationError(DDNNError):
    """Raised when the multiplicative solver receives signed input"""
    def __init__(self, argument: str):
        self.argument = argument
        super().__init__(f"multiplicative update requires nonnegative '{argument}'")


class LabelDomainError(DDNNError):
    """Raised when a label falls outside the expected domain"""
    def __init__(self, label: object, domain: str):
        self.label = label
        self.domain = domain
        super().__init__(f"label {label!r} outside {domain}")


class ClassCoverageError(DDNNError):
    """Raised when a class has no training samples"""
    def __init__(self, missing_classes: Sequence[int]):
        self.missing_classes = list(missing_classes)
        super().__init__(f"no samples for classes {self.missing_classes}")


class AllocationGapError(DDNNError):
    """Raised when a class present in the labels owns no dictionary atoms"""
    def __init__(self, class_index: int):
        self.class_index = class_index
        super().__init__(f"class {class_index} has no allocated atoms")


class LayerTrainingError(DDNNError):
    """Wraps a failure raised while training one layer of a network"""
    def __init__(self, layer_index: int, cause: DDNNError):
        self.layer_index = layer_index
        self.cause = cause
        super().__init__(f"layer {layer_index}: {cause}")


class IdxParseError(DDNNError):
    """Base exception for malformed IDX containers"""
    def __init__(self, path: str, offset: int, message: str):
        self.path = path
        self.offset = offset
        super().__init__(f"{path}: {message} at byte offset {offset}")


class IdxMagicError(IdxParseError):
    """Unexpected magic number"""
    pass


class IdxTruncatedError(IdxParseError):
    """Header or payload shorter than declared"""
    pass


class IdxCountMismatchError(IdxParseError):
    """Image and label files disagree on the item count"""
    pass


class CsvParseError(DDNNError):
    """Raised for ragged rows or non-numeric cells"""
    def __init__(self, path: str, row: int, column: int, message: str):
        self.path = path
        self.row = row
        self.column = column
        super().__init__(f"{path}: row {row}, column {column}: {message}")


class DatasetIOError(DDNNError):
    """Raised when a dataset file cannot be opened, read or written"""
    def __init__(self, path: str, reason: str):
        self.path = path
        super().__init__(f"{path}: {reason}")


class ModelStoreError(DDNNError):
    """Base exception for model file problems"""
    pass


class BadMagicError(ModelStoreError):
    """File does not start with the model magic"""
    def __init__(self, path: str):
        self.path = path
        super().__init__(f"{path}: not a model file (bad magic)")


class UnsupportedVersionError(ModelStoreError):
    """File written by an unknown format version"""
    def __init__(self, path: str, version: int):
        self.path = path
        self.version = version
        super().__init__(f"{path}: unsupported format version {version}")


class ModelDimensionError(ModelStoreError):
    """Matrix block disagrees with its declared dimensions"""
    def __init__(self, path: str, block: str, message: str):
        self.path = path
        self.block = block
        super().__init__(f"{path}: block '{block}': {message}")


class DimensionChainError(ModelStoreError):
    """Consecutive layers do not chain"""
    def __init__(self, layer_index: int, expected: int, actual: int):
        self.layer_index = layer_index
        super().__init__(
            f"layer {layer_index} expects {expected} input rows, previous layer has {actual} atoms"
        )


class ModelStoreIOError(ModelStoreError):
    """Underlying file operation failed"""
    def __init__(self, path: str, reason: str):
        self.path = path
        super().__init__(f"{path}: {reason}")
