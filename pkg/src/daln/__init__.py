"""Domain adaptation where the task classifier doubles as a nuclear-norm
Wasserstein critic, on a small numpy autodiff engine."""

from .data import Dataset, make_moons, moons_domains
from .model import Model
from .trainer import TrainConfig, TrainLog, train

__all__ = ["Dataset", "Model", "TrainConfig", "TrainLog", "make_moons", "moons_domains", "train"]
__version__ = "0.1.0"
