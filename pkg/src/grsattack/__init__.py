"""Golden-ratio-search minimum-power attacks on a small modulation classifier."""

from .attacks import AttackConfig, AttackResult, bisect_attack, grs_attack
from .nn import Classifier, LayerSpec, TrainConfig
from .signal import Dataset, IQFrame, build_dataset

__all__ = [
    "AttackConfig",
    "AttackResult",
    "Classifier",
    "Dataset",
    "IQFrame",
    "LayerSpec",
    "TrainConfig",
    "bisect_attack",
    "build_dataset",
    "grs_attack",
]
