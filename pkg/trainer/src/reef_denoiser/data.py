"""Pair-manifest loading.

Consumes the mixer's manifest CSV (pair_id, split, clean_path, noisy_path,
signal_refs, noise_ref, augments_applied, snr_db, seed) and the WAV pairs it
references; this file interface is the only coupling to the synthesis
toolkit.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from scipy.io import wavfile
from torch.utils.data import Dataset


class DataError(Exception):
    pass


@dataclass
class PairRef:
    pair_id: str
    split: str
    clean_path: str
    noisy_path: str


def read_manifest(path: str | Path) -> list[PairRef]:
    refs = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            refs.append(
                PairRef(
                    pair_id=row["pair_id"],
                    split=row["split"],
                    clean_path=row["clean_path"],
                    noisy_path=row["noisy_path"],
                )
            )
    if not refs:
        raise DataError(f"empty manifest: {path}")
    return refs


def load_wav(path: str | Path) -> tuple[np.ndarray, int]:
    rate, data = wavfile.read(str(path))
    if data.ndim != 1:
        raise DataError(f"{path}: expected mono audio")
    if data.dtype == np.int16:
        x = data.astype(np.float32) / 32768.0
    elif data.dtype == np.int32:
        x = data.astype(np.float32) / 2147483648.0
    else:
        x = data.astype(np.float32)
    return x, int(rate)


class PairDataset(Dataset):
    """(noisy, clean) waveform pairs for one split, uniform length enforced."""

    def __init__(self, refs: list[PairRef], split: str):
        self.refs = [r for r in refs if r.split == split]
        if not self.refs:
            raise DataError(f"no pairs with split '{split}'")
        first, rate = load_wav(self.refs[0].noisy_path)
        self.n_samples = first.size
        self.sample_rate = rate

    def __len__(self) -> int:
        return len(self.refs)

    def __getitem__(self, i: int):
        ref = self.refs[i]
        noisy, _ = load_wav(ref.noisy_path)
        clean, _ = load_wav(ref.clean_path)
        if noisy.size != self.n_samples or clean.size != self.n_samples:
            raise DataError(
                f"{ref.pair_id}: length {noisy.size}/{clean.size} != {self.n_samples}; "
                "training requires uniform segment lengths"
            )
        return (
            torch.from_numpy(noisy)[None, :],
            torch.from_numpy(clean)[None, :],
        )
