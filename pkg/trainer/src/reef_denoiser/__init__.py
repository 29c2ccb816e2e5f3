"""Time-domain denoiser training and batch inference for reef soundscapes."""

from .config import CheckpointRecord, TrainConfig
from .infer import denoise_batch
from .model import Denoiser
from .train import load_model, train

__version__ = "0.1.0"
