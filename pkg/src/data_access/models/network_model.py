from typing import List, Optional, Tuple
from dataclasses import dataclass, field

import numpy as np
import numpy.typing as npt

from src.data_access.models.spec_model import ActivationKind, InversionGuard, NetworkSpec
from src.shared.numerics import Matrix


class LayerKind:
    UNSUPERVISED = "unsupervised"
    LOGISTIC = "logistic"
    CLASS_DICT = "class_dict"


@dataclass
class TrainedLayer:
    """One learned dictionary with its training codes"""
    D: Matrix
    Z: Matrix
    loss_trace: List[float]
    iterations: int = 0
    stop_reason: str = "max_iters"
    kind: str = LayerKind.UNSUPERVISED
    theta: Optional[npt.NDArray[np.float64]] = None  # logistic layers
    bias: float = 0.0
    class_of_atom: Optional[List[int]] = None  # class-dict layers, -1 marks shared atoms

    @property
    def input_dim(self) -> int:
        return self.D.shape[0]

    @property
    def atoms(self) -> int:
        return self.D.shape[1]

    @property
    def final_objective(self) -> float:
        return self.loss_trace[-1]


@dataclass
class ClassDictModel:
    """Class-specific dictionaries D_1..D_C plus a shared dictionary, in block layout"""
    per_class_dicts: List[Matrix]
    shared_dict: Matrix
    Z: Matrix
    loss_trace: List[float]
    iterations: int = 0
    stop_reason: str = "max_iters"

    @property
    def D(self) -> Matrix:
        return np.hstack([*self.per_class_dicts, self.shared_dict])

    @property
    def class_of_atom(self) -> List[int]:
        layout: List[int] = []
        for c, block in enumerate(self.per_class_dicts):
            layout.extend([c] * block.shape[1])
        layout.extend([-1] * self.shared_dict.shape[1])
        return layout

    def block_columns(self, class_index: int) -> npt.NDArray[np.int64]:
        """Atom indices usable by samples of one class (its block plus the shared block)"""
        layout = np.asarray(self.class_of_atom)
        return np.flatnonzero((layout == class_index) | (layout == -1))


@dataclass(frozen=True)
class AtomAllocation:
    class_of_atom: Tuple[int, ...]

    @property
    def atoms(self) -> int:
        return len(self.class_of_atom)

    def atoms_of(self, class_index: int) -> int:
        return sum(1 for c in self.class_of_atom if c == class_index)


@dataclass
class FinalLayerModel:
    """Final joint representation + linear classifier layer"""
    D: Matrix
    M: Matrix
    mu: float
    allocation: AtomAllocation
    loss_trace: List[float] = field(default_factory=list)
    W: Optional[Matrix] = None  # label-consistency map, LC-KSVD2 only
    iterations: int = 0
    stop_reason: str = "max_iters"

    @property
    def atoms(self) -> int:
        return self.D.shape[1]

    @property
    def class_count(self) -> int:
        return self.M.shape[0]

    @property
    def final_objective(self) -> float:
        return self.loss_trace[-1] if self.loss_trace else 0.0


@dataclass
class TrainedNetwork:
    layers: List[TrainedLayer]  # pre-final layers, input side first
    final: FinalLayerModel
    final_codes: Matrix
    activation: ActivationKind
    guard: InversionGuard
    class_labels: Tuple[str, ...]
    spec: NetworkSpec

    @property
    def input_dim(self) -> int:
        return self.layers[0].input_dim if self.layers else self.final.D.shape[0]

    @property
    def depth(self) -> int:
        return len(self.layers) + 1

    @property
    def greedy_objective(self) -> float:
        """Sum of each layer's last recorded objective; not a bound on the joint cost"""
        return float(sum(layer.final_objective for layer in self.layers) + self.final.final_objective)

    def dimension_chain(self) -> List[Tuple[int, int]]:
        dims = [(layer.input_dim, layer.atoms) for layer in self.layers]
        dims.append((self.final.D.shape[0], self.final.atoms))
        return dims


@dataclass
class EvaluationReport:
    accuracy: float
    error_rate: float
    per_class_accuracy: npt.NDArray[np.float64]
    confusion: npt.NDArray[np.int64]  # rows true class, columns predicted
    class_labels: Tuple[str, ...]

    @property
    def n_samples(self) -> int:
        return int(self.confusion.sum())


@dataclass
class RidgeBaseline:
    """Linear map from raw features to class scores"""
    W: Matrix  # C x d
    ridge: float

    @property
    def class_count(self) -> int:
        return self.W.shape[0]
