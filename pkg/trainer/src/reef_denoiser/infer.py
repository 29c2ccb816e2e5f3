"""Batch inference: noisy WAV directory in, denoised WAV directory out.

Hard contract with the evaluation toolkit: one output per input with the
identical basename and sample count.
"""

from __future__ import annotations

import logging
from pathlib import Path

import numpy as np
import torch
from scipy.io import wavfile

from .data import load_wav
from .train import load_model

log = logging.getLogger(__name__)


def denoise_array(model, x: np.ndarray) -> np.ndarray:
    with torch.no_grad():
        out = model(torch.from_numpy(x.astype(np.float32))[None, None, :])
    y = out[0, 0].numpy()
    if y.size != x.size:
        log.warning("model output length %d != input %d; padding/cropping", y.size, x.size)
        if y.size < x.size:
            y = np.pad(y, (0, x.size - y.size))
        y = y[: x.size]
    return y


def denoise_batch(
    checkpoint_path: str | Path, in_dir: str | Path, out_dir: str | Path
) -> list[Path]:
    model = load_model(checkpoint_path)
    in_dir = Path(in_dir)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for path in sorted(in_dir.glob("*.wav")):
        x, rate = load_wav(path)
        y = denoise_array(model, x)
        out_path = out_dir / path.name
        scaled = np.clip(np.round(y * 32768.0), -32768, 32767).astype(np.int16)
        wavfile.write(str(out_path), rate, scaled)
        log.info("file=%s samples=%d status=ok", path.name, x.size)
        written.append(out_path)
    return written
