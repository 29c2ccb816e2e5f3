"""Training configuration.

The defaults pin the published training setup: a reduced time-domain
separation network whose mask uses two repeated 1-D convolutional stacks
with 512 channels, batches of 32 ten-second recordings, mean-absolute-error
loss, Adam, and a 5000-epoch ceiling with best-validation selection.
Learning rate, early-stop patience, and the inner TCN block count are not
published; the values below are assumptions recorded here for
reproducibility.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass


@dataclass
class TrainConfig:
    # published setup
    repeats: int = 2
    channels: int = 512
    batch_size: int = 32
    epochs_max: int = 5000
    loss: str = "mae"
    optimizer: str = "adam"
    segment_len_s: float = 10.0
    # assumptions (unpublished)
    learning_rate: float = 1e-3
    patience: int = 50
    blocks_per_repeat: int = 8
    encoder_filters: int = 512
    encoder_kernel: int = 16
    bottleneck_channels: int = 128
    conv_kernel: int = 3
    seed: int = 0

    def __post_init__(self):
        if self.loss != "mae":
            raise ValueError("only mean-absolute-error loss is supported")
        if self.optimizer != "adam":
            raise ValueError("only the Adam optimizer is supported")
        for name in ("repeats", "channels", "batch_size", "epochs_max",
                     "patience", "blocks_per_repeat"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be at least 1")

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "TrainConfig":
        return cls(**json.loads(text))


@dataclass
class CheckpointRecord:
    epoch: int
    train_loss: float
    val_loss: float
    path: str
