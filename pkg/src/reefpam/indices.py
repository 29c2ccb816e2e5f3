"""Acoustic indices: SPL, acoustic complexity, snap detection, and aggregates.

All dB aggregation (diel profiles, daily means, date-hour matrices) is done
in the linear power domain and converted back, never by averaging dB values
directly.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime

import numpy as np
import pandas as pd
from scipy import signal as sps

from .audio_io import AudioClip
from .dsp import BandSpec, Spectrogram, bandpass, hilbert_envelope

INDEX_KINDS = ("spl_low", "spl_high", "aci_low", "snap_rate")

INDEX_CSV_COLUMNS = [
    "site_id",
    "timestamp_iso8601",
    "index_kind",
    "value",
    "units",
    "denoised_flag",
]


@dataclass
class IndexSeries:
    """Timestamped values of one acoustic index at one site."""

    site_id: str
    index_kind: str
    points: list[tuple[datetime, float]]
    units: str
    denoised: bool = False

    def __post_init__(self):
        times = [t for t, _ in self.points]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("timestamps must be strictly increasing")

    @property
    def is_db(self) -> bool:
        return self.units.startswith("dB")

    def values(self) -> np.ndarray:
        return np.array([v for _, v in self.points], dtype=np.float64)

    def times(self) -> list[datetime]:
        return [t for t, _ in self.points]


@dataclass
class SnapEvents:
    """Detected strong-snap peaks within one clip."""

    times: np.ndarray  # seconds from clip start, strictly increasing
    envelope_peaks: np.ndarray
    threshold_used: float


@dataclass
class DielProfile:
    """Within-day profile: per-bin mean values with sample counts.

    Bins tile 00:00-24:00 without overlap; bin i starts at
    i * bin_minutes past midnight.
    """

    bin_minutes: int
    means: np.ndarray
    counts: np.ndarray
    units: str = ""


def _power_mean(values: np.ndarray, is_db: bool) -> float:
    """Mean in the linear power domain for dB data, arithmetic otherwise."""
    if values.size == 0:
        return float("nan")
    if is_db:
        return float(10.0 * np.log10(np.mean(10.0 ** (values / 10.0))))
    return float(np.mean(values))


def spl(clip: AudioClip, band: BandSpec) -> float | None:
    """Band sound pressure level: 20*log10(rms / 1 uPa).

    For uncalibrated clips the result is a relative level (same formula on
    normalized counts). An all-zero clip has no defined level and yields
    None rather than -inf.
    """
    if np.all(clip.samples == 0):
        return None
    filtered = bandpass(clip, band)
    rms = np.sqrt(np.mean(filtered.samples**2))
    if rms == 0:
        return None
    return float(20.0 * np.log10(rms))


def aci(spec: Spectrogram, band: BandSpec, segment_len_steps: int) -> float:
    """Acoustic complexity index over a spectrogram.

    For each frequency bin within the band and each temporal segment of
    ``segment_len_steps`` steps, sums |I_k - I_{k-1}| across adjacent steps
    and divides by the segment's total intensity; contributions are summed
    over segments and bins. The first step of a segment has no predecessor
    and contributes no difference term, so a constant spectrogram scores 0.
    A segment with zero total intensity contributes 0. A trailing partial
    segment shorter than ``segment_len_steps`` is dropped.

    The index is a ratio per (bin, segment), hence invariant under scaling
    all intensities by any positive constant.
    """
    if segment_len_steps < 2:
        raise ValueError("segment_len_steps must be at least 2")
    mask = band.bin_mask(spec.freqs)
    if not mask.any():
        raise ValueError("band selects no frequency bins")
    grid = spec.intensities[mask, :]
    n_steps = grid.shape[1]
    n_segs = n_steps // segment_len_steps
    total = 0.0
    for j in range(n_segs):
        seg = grid[:, j * segment_len_steps : (j + 1) * segment_len_steps]
        diffs = np.abs(np.diff(seg, axis=1)).sum(axis=1)
        sums = seg.sum(axis=1)
        nonzero = sums > 0
        total += float((diffs[nonzero] / sums[nonzero]).sum())
    return total


def detect_snaps(
    clip: AudioClip,
    percentile: float = 99.9,
    refractory_s: float = 0.002,
    band: BandSpec | None = None,
) -> SnapEvents:
    """Detect strong snaps as envelope peaks above a per-clip percentile.

    The threshold is the ``percentile`` (default 99.9th, i.e. top 0.1%) of
    the Hilbert envelope of the clip; events are local maxima strictly above
    it, separated by at least ``refractory_s`` so the ringing of a single
    snap is not double-counted. Detection runs on the full signal by
    default; pass ``band`` to pre-filter (e.g. the high band).

    Event times scale-invariance: multiplying the clip by any c > 0 leaves
    event times unchanged, because the percentile threshold scales with the
    signal. Caveat: in snap-free clips the percentile rule yields spurious
    events by construction.
    """
    if band is not None:
        clip = bandpass(clip, band)
    env = hilbert_envelope(clip).values
    if np.all(env == 0):
        return SnapEvents(
            times=np.array([]), envelope_peaks=np.array([]), threshold_used=0.0
        )
    threshold = float(np.percentile(env, percentile))
    distance = max(1, int(round(refractory_s * clip.sample_rate)))
    peaks, _ = sps.find_peaks(env, distance=distance)
    peaks = peaks[env[peaks] > threshold]
    return SnapEvents(
        times=peaks / clip.sample_rate,
        envelope_peaks=env[peaks],
        threshold_used=threshold,
    )


def snap_rate(events: SnapEvents, duration_s: float) -> float:
    """Snap count divided by clip duration, in snaps/s."""
    if duration_s <= 0:
        raise ValueError("duration_s must be positive")
    return events.times.size / duration_s


def diel_profile(series: IndexSeries, bin_minutes: int = 60) -> DielProfile:
    """Average an index over the time of day.

    ``bin_minutes`` must divide 1440. dB-valued series are averaged in the
    power domain.
    """
    if 1440 % bin_minutes != 0:
        raise ValueError("bin_minutes must divide 1440")
    n_bins = 1440 // bin_minutes
    buckets: list[list[float]] = [[] for _ in range(n_bins)]
    for t, v in series.points:
        minute = t.hour * 60 + t.minute
        buckets[minute // bin_minutes].append(v)
    means = np.array(
        [_power_mean(np.array(b), series.is_db) for b in buckets], dtype=np.float64
    )
    counts = np.array([len(b) for b in buckets], dtype=np.int64)
    return DielProfile(
        bin_minutes=bin_minutes, means=means, counts=counts, units=series.units
    )


def date_hour_matrix(series: IndexSeries) -> pd.DataFrame:
    """Matrix of [date x hour] means; cells without data are NaN, never zero."""
    rows = {}
    for t, v in series.points:
        rows.setdefault(t.date(), {}).setdefault(t.hour, []).append(v)
    dates = sorted(rows)
    out = pd.DataFrame(index=pd.Index(dates, name="date"), columns=range(24), dtype=float)
    for d in dates:
        for h, vals in rows[d].items():
            out.loc[d, h] = _power_mean(np.array(vals), series.is_db)
    return out


def daily_means(series: IndexSeries) -> list[tuple[datetime, float]]:
    """Collapse a series to one value per calendar date (power-domain for dB)."""
    byday: dict = {}
    for t, v in series.points:
        byday.setdefault(t.date(), []).append(v)
    out = []
    for d in sorted(byday):
        mid = datetime(d.year, d.month, d.day, 12, tzinfo=series.points[0][0].tzinfo)
        out.append((mid, _power_mean(np.array(byday[d]), series.is_db)))
    return out


def series_to_frame(series_list: list[IndexSeries]) -> pd.DataFrame:
    """Flatten index series into the index CSV schema."""
    rows = []
    for s in series_list:
        for t, v in s.points:
            rows.append(
                {
                    "site_id": s.site_id,
                    "timestamp_iso8601": t.isoformat().replace("+00:00", "Z"),
                    "index_kind": s.index_kind,
                    "value": v,
                    "units": s.units,
                    "denoised_flag": s.denoised,
                }
            )
    return pd.DataFrame(rows, columns=INDEX_CSV_COLUMNS)


def frame_to_series(df: pd.DataFrame) -> list[IndexSeries]:
    """Inverse of series_to_frame: group rows into IndexSeries objects."""
    out = []
    for (site, kind, units, denoised), grp in df.groupby(
        ["site_id", "index_kind", "units", "denoised_flag"], sort=True
    ):
        pts = []
        for _, row in grp.iterrows():
            t = datetime.fromisoformat(str(row["timestamp_iso8601"]).replace("Z", "+00:00"))
            pts.append((t, float(row["value"])))
        pts.sort(key=lambda p: p[0])
        out.append(
            IndexSeries(
                site_id=str(site),
                index_kind=str(kind),
                points=pts,
                units=str(units),
                denoised=bool(denoised),
            )
        )
    return out
