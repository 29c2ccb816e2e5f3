"""WAV ingestion, calibration, and segmentation for hydrophone recordings.

Recordings are single-channel PCM WAV files, canonically 96 kHz / 16-bit
(other rates accepted). File metadata comes from the filename pattern
``<site>_<YYYYMMDD>T<HHMMSS>Z.wav`` or from a sidecar manifest CSV whose
entries take precedence over the filename.
"""

from __future__ import annotations

import re
import warnings
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from pathlib import Path

import numpy as np
import pandas as pd
from scipy.io import wavfile

FILENAME_RE = re.compile(
    r"^(?P<site>.+)_(?P<date>\d{8})T(?P<time>\d{6})Z$"
)

MANIFEST_COLUMNS = [
    "file_path",
    "site_id",
    "deployment_id",
    "start_time_iso8601",
    "sensitivity_db",
    "fullscale_v",
    "gain_db",
]


class AudioIOError(Exception):
    """Unreadable or unsupported audio input."""


@dataclass(frozen=True)
class Calibration:
    """Hydrophone calibration chain from ADC counts to pressure.

    sensitivity_db_re_v_per_upa: hydrophone sensitivity in dB re 1 V/uPa
        (a typical value is around -165 dB, i.e. a large negative number).
    adc_fullscale_v: voltage corresponding to digital full scale.
    gain_db: analog gain applied before the ADC.
    """

    sensitivity_db_re_v_per_upa: float
    adc_fullscale_v: float
    gain_db: float = 0.0

    def __post_init__(self):
        if self.adc_fullscale_v <= 0:
            raise ValueError("adc_fullscale_v must be positive")

    @property
    def counts_to_upa(self) -> float:
        """Linear factor mapping normalized counts in [-1, 1] to uPa."""
        volts = self.adc_fullscale_v * 10.0 ** (-self.gain_db / 20.0)
        sens_v_per_upa = 10.0 ** (self.sensitivity_db_re_v_per_upa / 20.0)
        return volts / sens_v_per_upa


@dataclass
class AudioClip:
    """Pressure time series with site and time provenance.

    ``samples`` are in uPa when ``calibrated`` is True, otherwise raw
    normalized counts in [-1, 1].
    """

    samples: np.ndarray
    sample_rate: float
    start_time: datetime | None = None
    site_id: str = ""
    calibrated: bool = False

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")
        if self.samples.size == 0:
            raise ValueError("samples must be non-empty")
        if self.samples.ndim != 1:
            raise ValueError("samples must be one-dimensional")

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate

    def replace_samples(self, samples: np.ndarray) -> "AudioClip":
        return AudioClip(
            samples=samples,
            sample_rate=self.sample_rate,
            start_time=self.start_time,
            site_id=self.site_id,
            calibrated=self.calibrated,
        )


@dataclass
class RecordingMeta:
    site_id: str
    deployment_id: str
    file_path: str
    start_time: datetime | None
    duration_s: float
    sample_rate: float


def parse_filename(path: Path) -> tuple[str | None, datetime | None]:
    """Extract (site_id, start_time) from the canonical filename pattern."""
    m = FILENAME_RE.match(path.stem)
    if not m:
        return None, None
    try:
        start = datetime.strptime(
            m.group("date") + m.group("time"), "%Y%m%d%H%M%S"
        ).replace(tzinfo=timezone.utc)
    except ValueError:
        return m.group("site"), None
    return m.group("site"), start


def _normalize_counts(data: np.ndarray) -> np.ndarray:
    """Scale integer PCM to [-1, 1]; float data passes through."""
    if data.dtype == np.int16:
        return data.astype(np.float64) / 32768.0
    if data.dtype == np.int32:
        return data.astype(np.float64) / 2147483648.0
    if data.dtype in (np.float32, np.float64):
        return data.astype(np.float64)
    raise AudioIOError(f"unsupported WAV encoding: {data.dtype}")


def read_wav(
    path: str | Path,
    cal: Calibration | None = None,
    site_id: str | None = None,
    start_time: datetime | None = None,
) -> AudioClip:
    """Read a mono PCM WAV file into an AudioClip.

    Samples are scaled to uPa when a calibration is given, otherwise to raw
    normalized counts in [-1, 1]. Site and start time default to the
    filename convention; explicit arguments (e.g. from a manifest) win.
    An unparseable timestamp produces a warning and a null start_time.
    """
    path = Path(path)
    if not path.exists():
        raise AudioIOError(f"no such file: {path}")
    rate, data = wavfile.read(str(path))
    if data.ndim != 1:
        raise AudioIOError(
            f"{path.name}: expected single-channel audio, got {data.shape[1]} channels"
        )
    samples = _normalize_counts(data)

    name_site, name_start = parse_filename(path)
    if site_id is None:
        site_id = name_site or path.stem
    if start_time is None:
        start_time = name_start
        if name_start is None:
            warnings.warn(
                f"{path.name}: cannot parse start time from filename; "
                "start_time set to None"
            )

    calibrated = cal is not None
    if calibrated:
        samples = samples * cal.counts_to_upa
    return AudioClip(
        samples=samples,
        sample_rate=float(rate),
        start_time=start_time,
        site_id=site_id,
        calibrated=calibrated,
    )


def write_wav(clip: AudioClip, path: str | Path, cal: Calibration | None = None) -> None:
    """Write a clip as 16-bit PCM.

    Calibrated clips require the calibration used to read them so pressure
    can be mapped back to counts; uncalibrated samples are written as-is
    (values outside [-1, 1] are clipped).
    """
    samples = clip.samples
    if clip.calibrated:
        if cal is None:
            raise AudioIOError("calibrated clip requires a Calibration to write")
        samples = samples / cal.counts_to_upa
    scaled = np.round(samples * 32768.0)
    scaled = np.clip(scaled, -32768, 32767).astype(np.int16)
    wavfile.write(str(path), int(clip.sample_rate), scaled)


def segment(clip: AudioClip, seg_len_s: float) -> list[AudioClip]:
    """Split a clip into consecutive non-overlapping segments.

    The trailing remainder shorter than ``seg_len_s`` is dropped rather than
    zero-padded, so level statistics are unbiased. Segment start times are
    offset from the parent clip's start time.
    """
    if seg_len_s <= 0:
        raise ValueError("seg_len_s must be positive")
    seg_n = int(round(seg_len_s * clip.sample_rate))
    n_segs = clip.samples.size // seg_n
    out = []
    for i in range(n_segs):
        start = None
        if clip.start_time is not None:
            start = clip.start_time + timedelta(seconds=i * seg_n / clip.sample_rate)
        out.append(
            AudioClip(
                samples=clip.samples[i * seg_n : (i + 1) * seg_n],
                sample_rate=clip.sample_rate,
                start_time=start,
                site_id=clip.site_id,
                calibrated=clip.calibrated,
            )
        )
    return out


def read_manifest(path: str | Path) -> pd.DataFrame:
    """Load a recordings manifest CSV.

    Required column: file_path. Optional: site_id, deployment_id,
    start_time_iso8601, sensitivity_db, fullscale_v, gain_db.
    """
    df = pd.read_csv(path)
    if "file_path" not in df.columns:
        raise AudioIOError("manifest must have a file_path column")
    unknown = set(df.columns) - set(MANIFEST_COLUMNS)
    if unknown:
        raise AudioIOError(f"manifest has unknown columns: {sorted(unknown)}")
    return df


def clip_from_manifest_row(row: pd.Series, base_dir: Path | None = None) -> AudioClip:
    """Read one manifest entry, applying its calibration when present."""
    path = Path(row["file_path"])
    if base_dir is not None and not path.is_absolute():
        path = base_dir / path
    cal = None
    if "sensitivity_db" in row and pd.notna(row.get("sensitivity_db")):
        cal = Calibration(
            sensitivity_db_re_v_per_upa=float(row["sensitivity_db"]),
            adc_fullscale_v=float(row.get("fullscale_v", 1.0)),
            gain_db=float(row.get("gain_db", 0.0)),
        )
    start = None
    if "start_time_iso8601" in row and pd.notna(row.get("start_time_iso8601")):
        start = datetime.fromisoformat(str(row["start_time_iso8601"]).replace("Z", "+00:00"))
    site = None
    if "site_id" in row and pd.notna(row.get("site_id")):
        site = str(row["site_id"])
    return read_wav(path, cal=cal, site_id=site, start_time=start)


def scan_recordings(
    manifest: pd.DataFrame, base_dir: Path | None = None
) -> list[RecordingMeta]:
    """Build RecordingMeta entries from a manifest, probing each file header."""
    metas = []
    for _, row in manifest.iterrows():
        clip = clip_from_manifest_row(row, base_dir=base_dir)
        deployment = str(row.get("deployment_id", "")) if pd.notna(row.get("deployment_id")) else ""
        metas.append(
            RecordingMeta(
                site_id=clip.site_id,
                deployment_id=deployment,
                file_path=str(row["file_path"]),
                start_time=clip.start_time,
                duration_s=clip.duration_s,
                sample_rate=clip.sample_rate,
            )
        )
    return metas
