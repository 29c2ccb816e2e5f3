"""Fixtures: tiny on-disk pair datasets in the mixer's manifest format."""

from __future__ import annotations

import numpy as np
import pytest
from scipy.io import wavfile


def write_pairs(tmp_path, rng, count=8, split="train", fs=8000, dur_s=0.5,
                identical=False, val_mirrors_train=True):
    """Write toy (clean, noisy) WAV pairs plus a manifest CSV.

    Clean content is windowed tones; noise is Gaussian. With ``identical``
    the noisy file equals the clean one. The validation split mirrors the
    train pairs so overfit runs validate on what they train on.
    """
    rows = ["pair_id,split,clean_path,noisy_path,signal_refs,noise_ref,"
            "augments_applied,snr_db,seed"]
    n = int(dur_s * fs)

    def emit(i, sp):
        t = np.arange(n) / fs
        f0 = rng.uniform(300, 1500)
        clean = (0.5 * np.sin(2 * np.pi * f0 * t) * np.hanning(n)).astype(np.float64)
        noise = np.zeros(n) if identical else rng.normal(0, 0.3, n)
        noisy = clean + noise
        peak = max(np.abs(noisy).max(), np.abs(clean).max())
        if peak > 0.99:
            clean, noisy = clean / peak * 0.99, noisy / peak * 0.99
        cp = tmp_path / f"{sp}_{i:04d}_clean.wav"
        npth = tmp_path / f"{sp}_{i:04d}_noisy.wav"
        wavfile.write(str(cp), fs, np.round(clean * 32768).astype(np.int16))
        wavfile.write(str(npth), fs, np.round(noisy * 32768).astype(np.int16))
        rows.append(f"{sp}_{i:04d},{sp},{cp},{npth},sig.wav,noise.wav,,0.0,0")

    for i in range(count):
        emit(i, split)
    if val_mirrors_train and split == "train":
        for i in range(count):
            emit(i, "validation")
    manifest = tmp_path / "manifest.csv"
    manifest.write_text("\n".join(rows) + "\n")
    return manifest


@pytest.fixture
def rng():
    return np.random.default_rng(424242)


@pytest.fixture
def toy_config():
    from reef_denoiser.config import TrainConfig

    return TrainConfig(
        channels=32,
        repeats=1,
        blocks_per_repeat=3,
        encoder_filters=32,
        bottleneck_channels=16,
        batch_size=32,
        learning_rate=3e-4,
        patience=200,
    )
