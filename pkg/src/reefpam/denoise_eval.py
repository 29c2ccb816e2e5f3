"""Denoiser scoring: envelope normalization, event labeling, ROC, and a
spectral-gate reference denoiser.

Detectability is measured sample-wise on normalized Hilbert envelopes:
samples of the clean envelope above 0.01 are the signal events; samples of
the test envelope above a sweeping threshold are detections. TPR and FPR
are counted over samples, and the ROC is integrated by trapezoid over FPR.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd
from scipy import signal as sps
from scipy.ndimage import convolve1d

from .audio_io import AudioClip, read_wav
from .dsp import Envelope, hilbert_envelope
from .mixer import PairManifest

ROC_CSV_COLUMNS = ["condition", "snr_db", "threshold", "tpr", "fpr"]
SUMMARY_CSV_COLUMNS = ["condition", "snr_db", "auc"]

EVENT_THRESHOLD = 0.01  # normalized-envelope level defining signal events


class DenoiseEvalError(Exception):
    pass


@dataclass
class RocCurve:
    """(FPR, TPR) pairs per threshold, sorted by threshold descending.

    ``auc`` is None when the event mask is degenerate (all true or all
    false), in which case FPR or TPR is undefined.
    """

    thresholds: np.ndarray
    fpr: np.ndarray
    tpr: np.ndarray
    auc: float | None
    condition: str = ""
    snr_db: float | None = None

    def point_at(self, threshold: float) -> tuple[float, float]:
        i = int(np.argmin(np.abs(self.thresholds - threshold)))
        return float(self.fpr[i]), float(self.tpr[i])


def normalize_envelope(env: Envelope) -> Envelope:
    """Map an envelope to [0, 1] via (v - min) / (max - min).

    A constant envelope has no range; it maps to all zeros with a warning.
    """
    v = env.values
    lo, hi = float(v.min()), float(v.max())
    if hi == lo:
        warnings.warn("constant envelope normalized to all zeros")
        return Envelope(values=np.zeros_like(v), sample_rate=env.sample_rate)
    return Envelope(values=(v - lo) / (hi - lo), sample_rate=env.sample_rate)


def label_signal_events(clean_env_norm: Envelope) -> np.ndarray:
    """Boolean signal-event mask: normalized clean envelope strictly above 0.01."""
    return clean_env_norm.values > EVENT_THRESHOLD


def decimate_envelope(env: Envelope, out_rate: float = 1000.0) -> Envelope:
    """Block-maximum decimation to ``out_rate``, for tractable sweeps.

    Block max (not mean) preserves transient peaks. Applied identically to
    clean and test envelopes so masks and detections stay aligned.
    """
    step = int(round(env.sample_rate / out_rate))
    if step <= 1:
        return env
    n = (env.values.size // step) * step
    if n == 0:
        return env
    vals = env.values[:n].reshape(-1, step).max(axis=1)
    return Envelope(values=vals, sample_rate=env.sample_rate / step)


def default_thresholds(test_values: np.ndarray, n_grid: int = 512) -> np.ndarray:
    """512 even thresholds in [0, 1], the event level, and (when the envelope
    is small enough) its exact values."""
    grid = [np.linspace(0.0, 1.0, n_grid), np.array([EVENT_THRESHOLD])]
    if test_values.size <= 1_000_000:
        grid.append(np.unique(test_values))
    thr = np.unique(np.concatenate(grid))
    return thr[(thr >= 0) & (thr <= 1)]


def roc(
    test_env_norm: Envelope,
    mask: np.ndarray,
    thresholds: np.ndarray | None = None,
    condition: str = "",
    snr_db: float | None = None,
) -> RocCurve:
    """Sweep detection thresholds over a normalized test envelope.

    Per threshold tau: detections are samples strictly above tau; true
    positives are detections on mask samples, false positives are detections
    off it. TPR = TP/(TP+FN), FPR = FP/(FP+TN). The curve is anchored at
    (0,0) and (1,1); between the largest measured FPR and the (1,1) anchor
    the curve is extended horizontally (a conservative step, so an all-zero
    test envelope scores AUC 0, not 0.5) and integrated by trapezoid.
    """
    v = test_env_norm.values
    if v.size != mask.size:
        raise DenoiseEvalError("envelope and mask lengths differ")
    if thresholds is None:
        thresholds = default_thresholds(v)
    thresholds = np.sort(np.asarray(thresholds, dtype=np.float64))[::-1]

    n_pos = int(mask.sum())
    n_neg = int(mask.size - n_pos)

    # Counts strictly above tau via searchsorted on the sorted envelope;
    # suffix sums give the positives among them.
    order = np.argsort(v, kind="stable")
    sorted_v = v[order]
    suffix_pos = np.concatenate([np.cumsum(mask[order][::-1])[::-1], [0]])
    idx = np.searchsorted(sorted_v, thresholds, side="right")
    total_above = v.size - idx
    pos_above = suffix_pos[idx]
    neg_above = total_above - pos_above

    tpr = np.full(len(thresholds), np.nan)
    fpr = np.full(len(thresholds), np.nan)
    if n_pos > 0:
        tpr = pos_above / n_pos
    if n_neg > 0:
        fpr = neg_above / n_neg

    auc: float | None = None
    if n_pos > 0 and n_neg > 0:
        # thresholds descending -> fpr ascending; assert sweep monotonicity.
        if np.any(np.diff(tpr) < 0) or np.any(np.diff(fpr) < 0):
            raise AssertionError("TPR/FPR must be non-increasing in threshold")
        path_fpr = np.concatenate([[0.0], fpr, [1.0]])
        path_tpr = np.concatenate([[0.0], tpr, [tpr[-1]]])
        auc = float(
            np.sum((path_fpr[1:] - path_fpr[:-1]) * (path_tpr[1:] + path_tpr[:-1]) / 2.0)
        )
    return RocCurve(
        thresholds=thresholds, fpr=fpr, tpr=tpr, auc=auc, condition=condition, snr_db=snr_db
    )


# --- reference denoiser --------------------------------------------------------


def spectral_gate_denoise(
    clip: AudioClip,
    noise_profile: np.ndarray | None = None,
    factor: float = 2.5,
    quiet_fraction: float = 0.10,
    gain_floor: float = 0.0,
    nperseg: int = 1024,
) -> AudioClip:
    """STFT magnitude gate against a per-bin noise floor.

    The floor is the mean magnitude over the quietest ``quiet_fraction`` of
    frames (ranked by broadband frame energy), or a supplied per-bin
    profile. Bins above ``factor`` times the floor pass; the binary mask is
    smoothed along time to limit musical noise, and the signal is rebuilt by
    overlap-add at the original length.
    """
    x = clip.samples
    nperseg = min(nperseg, x.size)
    noverlap = nperseg // 2
    _, _, Z = sps.stft(
        x, fs=clip.sample_rate, nperseg=nperseg, noverlap=noverlap, window="hann", padded=True
    )
    mag = np.abs(Z)
    if noise_profile is None:
        energy = (mag**2).sum(axis=0)
        n_quiet = max(1, int(np.ceil(quiet_fraction * energy.size)))
        quiet = np.argsort(energy, kind="stable")[:n_quiet]
        floor = mag[:, quiet].mean(axis=1)
    else:
        floor = np.asarray(noise_profile, dtype=np.float64)
        if floor.size != mag.shape[0]:
            raise DenoiseEvalError("noise profile length must match STFT bin count")
    mask = (mag > factor * floor[:, None]).astype(np.float64)
    kernel = np.array([0.25, 0.5, 1.0, 0.5, 0.25])
    kernel /= kernel.sum()
    mask = convolve1d(mask, kernel, axis=1, mode="nearest")
    gain = gain_floor + (1.0 - gain_floor) * mask
    _, y = sps.istft(
        Z * gain, fs=clip.sample_rate, nperseg=nperseg, noverlap=noverlap, window="hann"
    )
    if y.size < x.size:
        y = np.pad(y, (0, x.size - y.size))
    return clip.replace_samples(y[: x.size])


def identity_denoiser(clip: AudioClip) -> AudioClip:
    return clip


class DirectoryDenoiser:
    """Denoiser plug-in backed by a directory of pre-denoised WAVs.

    Output files must carry the same basename as the noisy input and an
    identical sample count (the plug-in contract).
    """

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)

    def __call__(self, clip: AudioClip, basename: str) -> AudioClip:
        path = self.directory / basename
        if not path.exists():
            raise DenoiseEvalError(f"denoised file missing: {path}")
        with warnings.catch_warnings():
            warnings.filterwarnings("ignore", message=".*start time.*")
            return read_wav(path)


# --- end-to-end evaluation ------------------------------------------------------


def _norm_decimated_env(clip: AudioClip, out_rate: float) -> np.ndarray:
    env = decimate_envelope(hilbert_envelope(clip), out_rate=out_rate)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return normalize_envelope(env).values


def evaluate_denoiser(
    pairs: list[PairManifest],
    denoiser,
    snr_grid: list[float] | None = None,
    envelope_rate: float = 1000.0,
) -> dict[float | None, dict[str, RocCurve]]:
    """Score a denoiser against the noisy baseline, per SNR condition.

    Pairs are grouped by their manifest snr_db (rounded to 0.1 dB), or
    restricted to ``snr_grid`` when given. Envelopes are computed per clip,
    normalized, then concatenated across the group's clips before the
    threshold sweep (the pooled protocol; per-clip curves can be had by
    calling with single-pair groups). The denoiser is a callable mapping an
    AudioClip to an AudioClip of equal length; pairs whose denoised output
    length differs are excluded with a diagnostic.
    """
    groups: dict[float | None, list[PairManifest]] = {}
    for m in pairs:
        key = None if m.snr_db is None else round(m.snr_db, 1)
        groups.setdefault(key, []).append(m)
    if snr_grid is not None:
        wanted = {round(s, 1) for s in snr_grid}
        groups = {k: v for k, v in groups.items() if k in wanted}

    results: dict[float | None, dict[str, RocCurve]] = {}
    for snr, group in sorted(groups.items(), key=lambda kv: (kv[0] is None, kv[0])):
        masks, noisy_envs, den_envs = [], [], []
        for m in group:
            with warnings.catch_warnings():
                # pair WAVs carry no timestamp; the filename warning is noise here
                warnings.filterwarnings("ignore", message=".*start time.*")
                clean = read_wav(m.clean_path)
                noisy = read_wav(m.noisy_path)
            try:
                den = _call_denoiser(denoiser, noisy, Path(m.noisy_path).name)
            except DenoiseEvalError as exc:
                warnings.warn(f"{m.pair_id}: {exc}; pair excluded")
                continue
            if den.samples.size != noisy.samples.size:
                warnings.warn(
                    f"{m.pair_id}: denoiser output length {den.samples.size} != "
                    f"{noisy.samples.size}; pair excluded"
                )
                continue
            masks.append(
                _norm_decimated_env(clean, envelope_rate) > EVENT_THRESHOLD
            )
            noisy_envs.append(_norm_decimated_env(noisy, envelope_rate))
            den_envs.append(_norm_decimated_env(den, envelope_rate))
        if not masks:
            continue
        mask = np.concatenate(masks)
        sr = envelope_rate
        noisy_curve = roc(
            Envelope(np.concatenate(noisy_envs), sr), mask, condition="noisy", snr_db=snr
        )
        den_curve = roc(
            Envelope(np.concatenate(den_envs), sr), mask, condition="denoised", snr_db=snr
        )
        results[snr] = {"noisy": noisy_curve, "denoised": den_curve}
    return results


def _call_denoiser(denoiser, clip: AudioClip, basename: str) -> AudioClip:
    if isinstance(denoiser, DirectoryDenoiser):
        return denoiser(clip, basename)
    return denoiser(clip)


def curves_to_frames(
    results: dict[float | None, dict[str, RocCurve]]
) -> tuple[pd.DataFrame, pd.DataFrame]:
    """Flatten evaluation results into the ROC CSV and summary CSV schemas."""
    roc_rows, summary_rows = [], []
    for snr, conds in results.items():
        for name, curve in conds.items():
            for t, tp, fp in zip(curve.thresholds, curve.tpr, curve.fpr):
                roc_rows.append(
                    {
                        "condition": name,
                        "snr_db": "" if snr is None else snr,
                        "threshold": t,
                        "tpr": tp,
                        "fpr": fp,
                    }
                )
            summary_rows.append(
                {
                    "condition": name,
                    "snr_db": "" if snr is None else snr,
                    "auc": "" if curve.auc is None else curve.auc,
                }
            )
    return (
        pd.DataFrame(roc_rows, columns=ROC_CSV_COLUMNS),
        pd.DataFrame(summary_rows, columns=SUMMARY_CSV_COLUMNS),
    )
