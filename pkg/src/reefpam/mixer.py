"""Noisy/clean training-pair synthesis with reproducible augmentation.

Pairs are built by superimposing N randomly chosen signal snippets into a
fixed-length vector, stochastically augmenting the summed vector (pitch
shift, time stretch, tanh distortion, each with probability 0.5), and adding
a noise cut from one randomly chosen noise entry. Everything is driven by a
per-pair substream of the dataset seed, so a dataset is byte-identical
across reruns.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np
import pandas as pd
from scipy import signal as sps
from scipy.io import wavfile

from .audio_io import AudioClip, write_wav

MANIFEST_COLUMNS = [
    "pair_id",
    "split",
    "clean_path",
    "noisy_path",
    "signal_refs",
    "noise_ref",
    "augments_applied",
    "snr_db",
    "seed",
]


class MixerError(Exception):
    pass


@dataclass(frozen=True)
class BankEntry:
    path: str
    tag: str
    split: str
    duration_s: float


@dataclass
class SoundBank:
    """A bank of signal or noise snippets with train/validation/test labels."""

    role: str  # "signal" | "noise"
    entries: list[BankEntry]

    def __post_init__(self):
        if self.role not in ("signal", "noise"):
            raise ValueError("role must be 'signal' or 'noise'")
        for e in self.entries:
            if e.duration_s <= 0:
                raise ValueError(f"non-positive duration for {e.path}")

    def subset(self, split: str) -> "SoundBank":
        return SoundBank(self.role, [e for e in self.entries if e.split == split])

    @classmethod
    def from_manifest(cls, path: str | Path, role: str) -> "SoundBank":
        """Bank manifest CSV columns: file_path, source, split."""
        df = pd.read_csv(path)
        base = Path(path).parent
        entries = []
        for _, row in df.iterrows():
            p = Path(str(row["file_path"]))
            if not p.is_absolute():
                p = base / p
            rate, data = wavfile.read(str(p))
            entries.append(
                BankEntry(
                    path=str(p),
                    tag=str(row.get("source", "")),
                    split=str(row["split"]),
                    duration_s=len(data) / rate,
                )
            )
        return cls(role, entries)


def load_entry(entry: BankEntry) -> tuple[np.ndarray, float]:
    rate, data = wavfile.read(entry.path)
    if data.ndim != 1:
        raise MixerError(f"{entry.path}: bank entries must be mono")
    if data.dtype == np.int16:
        x = data.astype(np.float64) / 32768.0
    elif data.dtype == np.int32:
        x = data.astype(np.float64) / 2147483648.0
    else:
        x = data.astype(np.float64)
    return x, float(rate)


@dataclass
class MixRecipe:
    """Parameters of pair synthesis.

    n_signals is the upper bound of the per-pair draw of N (the count of
    superimposed signal snippets), uniform over [1, n_signals].
    """

    n_signals: int = 5
    augment_prob: float = 0.5
    segment_len_s: float = 10.0
    snr_db: float | None = None
    rng_seed: int = 0
    loop_noise: bool = False

    def __post_init__(self):
        if not (1 <= self.n_signals <= 5):
            raise ValueError("n_signals must be in [1, 5]")
        if self.segment_len_s <= 0:
            raise ValueError("segment_len_s must be positive")


@dataclass
class PairManifest:
    """Reproducibility record for one emitted pair."""

    pair_id: str
    split: str
    clean_path: str
    noisy_path: str
    signal_refs: list[str]
    noise_ref: str
    augments_applied: list[str]
    snr_db: float | None
    seed: int


# --- augmentation primitives -------------------------------------------------


def _stft(x: np.ndarray, n_fft: int, hop: int) -> np.ndarray:
    pad = n_fft // 2
    xp = np.pad(x, (pad, pad), mode="reflect") if x.size > pad else np.pad(x, (pad, pad))
    win = sps.get_window("hann", n_fft, fftbins=True)
    n_frames = 1 + (xp.size - n_fft) // hop
    out = np.empty((n_fft // 2 + 1, n_frames), dtype=np.complex128)
    for t in range(n_frames):
        out[:, t] = np.fft.rfft(xp[t * hop : t * hop + n_fft] * win)
    return out


def _istft(spec: np.ndarray, n_fft: int, hop: int, length: int) -> np.ndarray:
    win = sps.get_window("hann", n_fft, fftbins=True)
    n_frames = spec.shape[1]
    out = np.zeros(n_fft + hop * (n_frames - 1))
    norm = np.zeros_like(out)
    for t in range(n_frames):
        frame = np.fft.irfft(spec[:, t], n=n_fft)
        out[t * hop : t * hop + n_fft] += frame * win
        norm[t * hop : t * hop + n_fft] += win**2
    out = out[n_fft // 2 :]
    norm = norm[n_fft // 2 :]
    nz = norm > 1e-10
    out[nz] /= norm[nz]
    if out.size < length:
        out = np.pad(out, (0, length - out.size))
    return out[:length]


def time_stretch(x: np.ndarray, rate: float, n_fft: int = 1024) -> np.ndarray:
    """Phase-vocoder time stretch; output duration = input duration / rate."""
    if rate <= 0:
        raise ValueError("rate must be positive")
    hop = n_fft // 4
    spec = _stft(x, n_fft, hop)
    steps = np.arange(0, spec.shape[1], rate)
    phase_adv = np.linspace(0, np.pi * hop, spec.shape[0])
    out = np.empty((spec.shape[0], len(steps)), dtype=np.complex128)
    phase = np.angle(spec[:, 0])
    spec = np.pad(spec, ((0, 0), (0, 2)))
    for i, step in enumerate(steps):
        lo = int(step)
        frac = step - lo
        mag = (1 - frac) * np.abs(spec[:, lo]) + frac * np.abs(spec[:, lo + 1])
        out[:, i] = mag * np.exp(1j * phase)
        dphase = np.angle(spec[:, lo + 1]) - np.angle(spec[:, lo]) - phase_adv
        dphase -= 2 * np.pi * np.round(dphase / (2 * np.pi))
        phase += phase_adv + dphase
    length = int(round(x.size / rate))
    return _istft(out, n_fft, hop, length)


def pitch_shift(x: np.ndarray, sample_rate: float, semitones: float) -> np.ndarray:
    """Shift pitch while preserving duration.

    Slows the clip by the pitch factor with the phase vocoder (pitch
    unchanged), then resamples back to the original length, which scales all
    frequencies by the factor.
    """
    factor = 2.0 ** (semitones / 12.0)
    stretched = time_stretch(x, rate=1.0 / factor)
    frac = Fraction(factor).limit_denominator(200)
    shifted = sps.resample_poly(stretched, frac.denominator, frac.numerator)
    if shifted.size < x.size:
        shifted = np.pad(shifted, (0, x.size - shifted.size))
    return shifted[: x.size]


def tanh_distortion(x: np.ndarray, drive: float) -> np.ndarray:
    """Soft-clipping waveshaper normalized so full scale maps to full scale."""
    return np.tanh(drive * x) / np.tanh(drive)


def augment(
    clip: AudioClip, rng: np.random.Generator, prob: float = 0.5
) -> tuple[AudioClip, list[str]]:
    """Apply each of pitch shift, time stretch, tanh distortion with prob 0.5.

    Parameter ranges: pitch shift +/-2 semitones, stretch x[0.9, 1.1],
    tanh drive in [1, 4]; mild, label-preserving perturbations. Output is
    cropped or zero-padded back to the input length. The applied-ops record
    lists each transform with its drawn parameter.
    """
    x = clip.samples.copy()
    n = x.size
    applied: list[str] = []
    if rng.random() < prob:
        semis = rng.uniform(-2.0, 2.0)
        x = pitch_shift(x, clip.sample_rate, semis)
        applied.append(f"pitch:{semis:+.3f}")
    if rng.random() < prob:
        rate = rng.uniform(0.9, 1.1)
        x = time_stretch(x, rate)
        applied.append(f"stretch:{rate:.3f}")
    if rng.random() < prob:
        drive = rng.uniform(1.0, 4.0)
        x = tanh_distortion(x, drive)
        applied.append(f"tanh:{drive:.3f}")
    if x.size < n:
        x = np.pad(x, (0, n - x.size))
    x = x[:n]
    return clip.replace_samples(x), applied


# --- pair construction --------------------------------------------------------


def _power(x: np.ndarray) -> float:
    return float(np.mean(x**2))


def make_pair(
    signal_bank: SoundBank,
    noise_bank: SoundBank,
    recipe: MixRecipe,
    rng: np.random.Generator,
    split: str = "train",
) -> tuple[AudioClip, AudioClip, PairManifest]:
    """Synthesize one (clean, noisy) pair.

    N signals (N uniform in [1, recipe.n_signals]) are placed at uniform
    random offsets within the segment, truncated at the segment end (no
    wraparound); the summed vector is then augmented as a whole. The noise
    vector is cut from one randomly chosen noise entry at a uniform random
    offset; entries shorter than the segment are rejected unless
    recipe.loop_noise tiles them. When recipe.snr_db is set, the noise is
    scaled so the realized clean-power/noise-power ratio matches to within
    0.01 dB; otherwise the native level is kept.
    """
    sig_entries = signal_bank.subset(split).entries
    noise_entries = noise_bank.subset(split).entries
    if not sig_entries or not noise_entries:
        raise MixerError(f"empty bank for split '{split}'")

    sr = load_entry(sig_entries[0])[1]  # bank rate, taken from the first entry
    seg_n = int(round(recipe.segment_len_s * sr))

    def draw_clean():
        n_sig = int(rng.integers(1, recipe.n_signals + 1))
        picks = rng.integers(0, len(sig_entries), size=n_sig)
        vec = np.zeros(seg_n)
        chosen = []
        for idx in picks:
            entry = sig_entries[int(idx)]
            x, xsr = load_entry(entry)
            if xsr != sr:
                raise MixerError(f"{entry.path}: sample rate {xsr} != bank rate {sr}")
            if x.size > seg_n:
                start = int(rng.integers(0, x.size - seg_n + 1))
                x = x[start : start + seg_n]
                offset = 0
            else:
                offset = int(rng.integers(0, seg_n))
            avail = seg_n - offset
            vec[offset : offset + min(avail, x.size)] += x[: min(avail, x.size)]
            chosen.append(entry.path)
        return vec, chosen

    # An unlucky placement can truncate all signal content away; a silent
    # clean target is useless, so redraw (deterministically, same substream).
    for _ in range(20):
        clean, refs = draw_clean()
        if np.any(clean != 0):
            break
    else:
        raise MixerError("signal bank yielded only silent placements")

    clean_clip, applied = augment(
        AudioClip(samples=clean, sample_rate=sr), rng, prob=recipe.augment_prob
    )
    clean = clean_clip.samples

    nidx = int(rng.integers(0, len(noise_entries)))
    nentry = noise_entries[nidx]
    nx, nsr = load_entry(nentry)
    if nsr != sr:
        raise MixerError(f"{nentry.path}: sample rate {nsr} != bank rate {sr}")
    if nx.size < seg_n:
        if not recipe.loop_noise:
            raise MixerError(
                f"{nentry.path}: noise entry is {nx.size / nsr:.2f} s, shorter than "
                f"the {recipe.segment_len_s} s segment and looping is disabled"
            )
        nx = np.tile(nx, int(np.ceil(seg_n / nx.size)))
    start = int(rng.integers(0, nx.size - seg_n + 1)) if nx.size > seg_n else 0
    noise = nx[start : start + seg_n].copy()

    realized_snr: float | None
    p_clean, p_noise = _power(clean), _power(noise)
    if recipe.snr_db is not None:
        if p_clean == 0 or p_noise == 0:
            raise MixerError("cannot scale to target SNR with a silent component")
        noise *= np.sqrt(p_clean / (p_noise * 10.0 ** (recipe.snr_db / 10.0)))
        realized_snr = float(10.0 * np.log10(p_clean / _power(noise)))
    else:
        realized_snr = (
            float(10.0 * np.log10(p_clean / p_noise)) if p_clean > 0 and p_noise > 0 else None
        )

    noisy = clean + noise
    manifest = PairManifest(
        pair_id="",
        split=split,
        clean_path="",
        noisy_path="",
        signal_refs=refs,
        noise_ref=nentry.path,
        augments_applied=applied,
        snr_db=realized_snr,
        seed=0,
    )
    return (
        AudioClip(samples=clean, sample_rate=sr),
        AudioClip(samples=noisy, sample_rate=sr),
        manifest,
    )


def build_dataset(
    signal_bank: SoundBank,
    noise_bank: SoundBank,
    recipe: MixRecipe,
    count: int,
    split: str,
    out_dir: str | Path,
) -> list[PairManifest]:
    """Emit ``count`` WAV pairs plus a manifest CSV, reproducibly.

    Pair i is generated from the substream seeded by (recipe.rng_seed, i),
    so the dataset is byte-identical for a fixed (seed, recipe, banks) and
    pairs may be generated in any order or in parallel. Existing output
    files are treated as path collisions and rejected.
    """
    if count <= 0:
        raise ValueError("count must be positive")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifests = []
    for i in range(count):
        pair_id = f"{split}_{i:05d}"
        clean_path = out_dir / f"{pair_id}_clean.wav"
        noisy_path = out_dir / f"{pair_id}_noisy.wav"
        if clean_path.exists() or noisy_path.exists():
            raise MixerError(f"output path collision: {pair_id}")
        rng = np.random.default_rng([recipe.rng_seed, i])
        clean, noisy, m = make_pair(signal_bank, noise_bank, recipe, rng, split=split)
        # Joint headroom scaling preserves both additivity and SNR.
        peak = max(np.abs(noisy.samples).max(), np.abs(clean.samples).max())
        if peak > 0.99:
            gain = 0.99 / peak
            clean = clean.replace_samples(clean.samples * gain)
            noisy = noisy.replace_samples(noisy.samples * gain)
        write_wav(clean, clean_path)
        write_wav(noisy, noisy_path)
        m.pair_id = pair_id
        m.clean_path = str(clean_path)
        m.noisy_path = str(noisy_path)
        m.seed = recipe.rng_seed
        manifests.append(m)
    write_pair_manifest(manifests, out_dir / "manifest.csv")
    return manifests


def write_pair_manifest(manifests: list[PairManifest], path: str | Path) -> None:
    rows = []
    for m in manifests:
        rows.append(
            {
                "pair_id": m.pair_id,
                "split": m.split,
                "clean_path": m.clean_path,
                "noisy_path": m.noisy_path,
                "signal_refs": "|".join(m.signal_refs),
                "noise_ref": m.noise_ref,
                "augments_applied": "|".join(m.augments_applied),
                "snr_db": "" if m.snr_db is None else f"{m.snr_db:.6f}",
                "seed": m.seed,
            }
        )
    pd.DataFrame(rows, columns=MANIFEST_COLUMNS).to_csv(path, index=False)


def read_pair_manifest(path: str | Path) -> list[PairManifest]:
    df = pd.read_csv(path, keep_default_na=False)
    out = []
    for _, row in df.iterrows():
        snr = str(row["snr_db"])
        out.append(
            PairManifest(
                pair_id=str(row["pair_id"]),
                split=str(row["split"]),
                clean_path=str(row["clean_path"]),
                noisy_path=str(row["noisy_path"]),
                signal_refs=[s for s in str(row["signal_refs"]).split("|") if s],
                noise_ref=str(row["noise_ref"]),
                augments_applied=[s for s in str(row["augments_applied"]).split("|") if s],
                snr_db=float(snr) if snr else None,
                seed=int(row["seed"]),
            )
        )
    return out


def check_split_hygiene(manifests: list[PairManifest]) -> None:
    """Assert no bank entry is referenced from more than one split."""
    seen: dict[str, str] = {}
    for m in manifests:
        for ref in list(m.signal_refs) + [m.noise_ref]:
            if ref in seen and seen[ref] != m.split:
                raise MixerError(
                    f"bank entry {ref} appears in splits '{seen[ref]}' and '{m.split}'"
                )
            seen[ref] = m.split
