"""Deep neuroevolution with GA, Novelty Search and the adaptive EyAL hybrid on a point maze."""

from .evo_core import Algorithm, EvoConfig, run_generation
from .maze_env import MazeConfig, canonical_maze
from .policy_net import Architecture

__all__ = ["Algorithm", "Architecture", "EvoConfig", "MazeConfig", "canonical_maze", "run_generation"]
__version__ = "0.1.0"
