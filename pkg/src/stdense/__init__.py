"""Dense ReLU network regression for temporal-spatial panel data."""
from .estimator import ArchSpec, TrainConfig, fit, predict_truncated, size_architecture
from .net import DenseNet, backward, forward, forward_batch, sgd_step, truncate
from .panel import PanelDataset, load_panel, save_panel
from .synth import NoiseScales, generate_panel

__all__ = [
    "ArchSpec",
    "DenseNet",
    "NoiseScales",
    "PanelDataset",
    "TrainConfig",
    "backward",
    "fit",
    "forward",
    "forward_batch",
    "generate_panel",
    "load_panel",
    "predict_truncated",
    "save_panel",
    "sgd_step",
    "size_architecture",
    "truncate",
]

__version__ = "0.1.0"
