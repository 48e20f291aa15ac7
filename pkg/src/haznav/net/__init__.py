from . import kernels
from .model import ControllerNet, init_weights
from .schedule import ConvSpec, LayerSchedule, param_count
from .train import Adam, History, TrainConfig, TrainingDiverged, early_stop_trace, train

__all__ = [
    "Adam",
    "ControllerNet",
    "ConvSpec",
    "History",
    "LayerSchedule",
    "TrainConfig",
    "TrainingDiverged",
    "early_stop_trace",
    "init_weights",
    "kernels",
    "param_count",
    "train",
]
