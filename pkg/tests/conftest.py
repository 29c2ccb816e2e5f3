"""Shared synthetic-signal generators.

The generators double as test oracles: they return ground truth (event logs,
planted parameters, schedules) alongside the signal so detections and fits
can be checked against what was actually planted.
"""

from __future__ import annotations

import numpy as np
import pytest

from reefpam.audio_io import AudioClip


def tone(freq_hz: float, dur_s: float, sample_rate: float, amplitude: float = 1.0,
         phase: float = 0.0) -> np.ndarray:
    t = np.arange(int(round(dur_s * sample_rate))) / sample_rate
    return amplitude * np.sin(2.0 * np.pi * freq_hz * t + phase)


def clip_of(samples: np.ndarray, sample_rate: float, **kw) -> AudioClip:
    return AudioClip(samples=np.asarray(samples, dtype=np.float64),
                     sample_rate=sample_rate, **kw)


def snap_burst(amp: float, tau_s: float, sample_rate: float, fc_hz: float,
               phase: float) -> np.ndarray:
    """Synthetic snap: damped oscillation with a two-sided exponential (cusp)
    envelope. The cusp peak keeps the detector threshold well below the peak
    even when snaps are dense, while the tail fades into the noise floor well
    inside the 2 ms refractory window."""
    tau = tau_s * sample_rate
    half = int(np.ceil(tau * np.log(max(amp, 2.0) * 2.0)))
    d = np.arange(-half, half + 1)
    return amp * np.exp(-np.abs(d) / tau) * np.sin(2.0 * np.pi * fc_hz * d / sample_rate + phase)


def snap_train_clip(
    rng: np.random.Generator,
    sample_rate: float = 48000.0,
    dur_s: float = 60.0,
    rate_per_s: float = 5.0,
    amp_over_sigma: float = 100.0,
    noise_sigma: float = 1.0,
    tau_s: float = 1.0 / 3000.0,
    min_gap_s: float = 0.0022,
    fc_hz: float = 6000.0,
) -> tuple[AudioClip, np.ndarray]:
    """Gaussian noise plus a Poisson train of snap bursts (with dead time).

    Returns the clip and the ground-truth snap times in seconds.
    """
    n = int(round(sample_rate * dur_s))
    x = rng.normal(0.0, noise_sigma, n)
    times = []
    t = 0.0
    while True:
        t += rng.exponential(1.0 / rate_per_s)
        if t >= dur_s - 0.01:
            break
        if times and (t - times[-1]) < min_gap_s:
            continue
        times.append(t)
    for tt in times:
        burst = snap_burst(amp_over_sigma * noise_sigma, tau_s, sample_rate,
                           fc_hz, rng.uniform(0, 2 * np.pi))
        half = (burst.size - 1) // 2
        i0 = int(round(tt * sample_rate))
        lo, hi = i0 - half, i0 + half + 1
        s0, s1 = max(lo, 0), min(hi, n)
        x[s0:s1] += burst[s0 - lo : s1 - lo]
    return clip_of(x, sample_rate), np.array(times)


def fish_calls_clip(
    rng: np.random.Generator,
    sample_rate: float = 16000.0,
    dur_s: float = 10.0,
    n_calls: int = 6,
) -> np.ndarray:
    """Tone-complex 'fish call' bursts in silence; stands in for the
    unpublished labeled snippets."""
    n = int(round(dur_s * sample_rate))
    clean = np.zeros(n)
    for _ in range(n_calls):
        f0 = rng.uniform(400.0, 2000.0)
        m = int(rng.uniform(0.2, 0.6) * sample_rate)
        i0 = int(rng.integers(0, n - m))
        t = np.arange(m) / sample_rate
        call = np.sin(2 * np.pi * f0 * t) + 0.5 * np.sin(2 * np.pi * 2 * f0 * t)
        clean[i0 : i0 + m] += call * np.hanning(m)
    return clean


@pytest.fixture
def rng():
    return np.random.default_rng(20260809)
