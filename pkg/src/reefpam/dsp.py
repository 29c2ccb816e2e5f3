"""Shared DSP kernels: band filtering, analytic envelopes, spectrograms."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal as sps

from .audio_io import AudioClip


@dataclass(frozen=True)
class BandSpec:
    """Frequency band with edges in Hz.

    The analysis defaults are the fish-dominated low band (0.1-1 kHz) and
    the shrimp-dominated high band (1-48 kHz). A high edge equal to the
    Nyquist frequency is treated as "up to the recording's band limit".
    """

    f_lo: float
    f_hi: float
    name: str = "custom"

    def __post_init__(self):
        if not (0 < self.f_lo < self.f_hi):
            raise ValueError(f"invalid band edges: ({self.f_lo}, {self.f_hi})")

    def validate(self, sample_rate: float) -> None:
        nyquist = sample_rate / 2.0
        if self.f_lo >= nyquist:
            raise ValueError(f"band low edge {self.f_lo} Hz at or beyond Nyquist {nyquist} Hz")
        if self.f_hi > nyquist:
            raise ValueError(f"band high edge {self.f_hi} Hz beyond Nyquist {nyquist} Hz")

    def bin_mask(self, freqs: np.ndarray) -> np.ndarray:
        return (freqs >= self.f_lo) & (freqs <= self.f_hi)


LOW_BAND = BandSpec(100.0, 1000.0, "low")
HIGH_BAND = BandSpec(1000.0, 48000.0, "high")


@dataclass
class Envelope:
    """Non-negative instantaneous amplitude series, same length as its source."""

    values: np.ndarray
    sample_rate: float


@dataclass
class Spectrogram:
    """Linear-power short-time spectrum grid.

    intensities is [frequency bin x time step]; bin_hz = sample_rate / window
    length. Intensities carry the one-sided Parseval weighting so the total
    grid energy matches the windowed time-domain energy.
    """

    intensities: np.ndarray
    bin_hz: float
    step_s: float
    window: str
    overlap: float

    @property
    def freqs(self) -> np.ndarray:
        return np.arange(self.intensities.shape[0]) * self.bin_hz

    @property
    def n_steps(self) -> int:
        return self.intensities.shape[1]


def _band_sos(band: BandSpec, sample_rate: float, order: int = 8):
    nyquist = sample_rate / 2.0
    band.validate(sample_rate)
    if band.f_hi >= nyquist:
        # Band limited by the recording itself; only the low edge filters.
        return sps.butter(order, band.f_lo, btype="highpass", fs=sample_rate, output="sos")
    return sps.butter(
        order, [band.f_lo, band.f_hi], btype="bandpass", fs=sample_rate, output="sos"
    )


def bandpass(clip: AudioClip, band: BandSpec) -> AudioClip:
    """Zero-phase 8th-order Butterworth bandpass.

    Forward-backward application gives zero phase distortion (so snap timing
    and envelope shape survive) and doubles the stopband slope: attenuation
    one octave outside the passband exceeds 60 dB.
    """
    sos = _band_sos(band, clip.sample_rate)
    filtered = sps.sosfiltfilt(sos, clip.samples)
    return clip.replace_samples(filtered)


def hilbert_envelope(clip: AudioClip) -> Envelope:
    """Magnitude of the analytic signal, built over the full clip via FFT."""
    analytic = sps.hilbert(clip.samples)
    return Envelope(values=np.abs(analytic), sample_rate=clip.sample_rate)


def window_length(step_s: float, sample_rate: float) -> int:
    """Spectrogram window length: round(step * rate) to the nearest even integer."""
    n = int(round(step_s * sample_rate))
    if n % 2 == 1:
        n += 1
    return n


def spectrogram(
    clip: AudioClip,
    step_s: float = 0.128,
    overlap: float = 0.5,
    window: str = "hann",
) -> Spectrogram:
    """Short-time power spectrogram with explicit framing.

    The number of time steps is exactly floor((N - W) / (W * (1 - overlap))) + 1
    for window length W; a clip shorter than one window yields zero steps.
    """
    if not (0 <= overlap < 1):
        raise ValueError("overlap must be in [0, 1)")
    w = window_length(step_s, clip.sample_rate)
    if w < 2:
        raise ValueError("window shorter than 2 samples")
    hop = int(round(w * (1.0 - overlap)))
    if hop < 1:
        raise ValueError("overlap too close to 1 for this window length")
    n = clip.samples.size
    n_steps = max(0, (n - w) // hop + 1) if n >= w else 0
    win = sps.get_window(window, w, fftbins=True)
    n_bins = w // 2 + 1
    intensities = np.empty((n_bins, n_steps), dtype=np.float64)
    for j in range(n_steps):
        frame = clip.samples[j * hop : j * hop + w] * win
        spec = np.fft.rfft(frame)
        power = np.abs(spec) ** 2
        # One-sided correction so sum over bins equals W * windowed energy.
        if w % 2 == 0:
            power[1:-1] *= 2.0
        else:
            power[1:] *= 2.0
        intensities[:, j] = power
    return Spectrogram(
        intensities=intensities,
        bin_hz=clip.sample_rate / w,
        step_s=step_s,
        window=window,
        overlap=overlap,
    )
