"""Sample-denoise-recover pose smoothing.

A pose estimator is run on one frame in every ``N``; a transformer encoder
(DenoiseNet) cleans the sampled poses and a transformer decoder
(RecoverNet) fills in the frames in between. Classical interpolation
baselines, metrics, training and a command-line front end are included.
"""

from .config import ModelConfig
from .errors import (ConfigError, DeciWatchError, DimensionError, DivergenceError, ParseError,
                     RangeError, SequenceTooShortError, UsageError)
from .model import DeciWatch
from .posedata import PoseSequence, SyntheticSpec, generate_synthetic, read_pose_file, write_pose_file
from .training import Checkpoint, TrainConfig, load_checkpoint, save_checkpoint, train

__version__ = "0.1.0"

__all__ = [
    "Checkpoint", "ConfigError", "DeciWatch", "DeciWatchError", "DimensionError",
    "DivergenceError", "ModelConfig", "ParseError", "PoseSequence", "RangeError",
    "SequenceTooShortError", "SyntheticSpec", "TrainConfig", "UsageError",
    "generate_synthetic", "load_checkpoint", "read_pose_file", "save_checkpoint", "train",
    "write_pose_file",
]
