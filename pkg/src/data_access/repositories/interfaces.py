from abc import ABC, abstractmethod
from typing import Optional, Tuple
from src.data_access.models.dataset_model import Dataset, NormalizationParams
from src.data_access.models.network_model import TrainedNetwork
from src.shared.numerics import Matrix


class IDatasetRepository(ABC):
    """Interface for dataset readers"""

    @abstractmethod
    def read_dataset(self, data_path: str, labels_path: Optional[str] = None) -> Dataset:
        """Read labeled samples"""
        pass

    @abstractmethod
    def read_features(self, data_path: str) -> Matrix:
        """Read unlabeled samples as a d x n matrix"""
        pass


class IModelRepository(ABC):
    """Interface for trained network storage"""

    @abstractmethod
    def save(self, net: TrainedNetwork, normalization: Optional[NormalizationParams], path: str) -> None:
        """Persist a trained network with its input normalization"""
        pass

    @abstractmethod
    def load(self, path: str) -> Tuple[TrainedNetwork, Optional[NormalizationParams]]:
        """Load a network written by save"""
        pass
