"""reefpam: passive acoustic monitoring toolkit for coral reef soundscapes.

Turns raw hydrophone recordings into reef-health evidence: band SPL, the
acoustic complexity index, snapping-shrimp snap rate, denoiser training-pair
synthesis and ROC scoring, and statistical linkage of indices to transect
survey data including composite reef-health regressions.
"""

from .audio_io import AudioClip, Calibration, RecordingMeta, read_wav, segment, write_wav
from .config import RunConfig, load_config
from .denoise_eval import (
    RocCurve,
    evaluate_denoiser,
    label_signal_events,
    normalize_envelope,
    roc,
    spectral_gate_denoise,
)
from .dsp import (
    HIGH_BAND,
    LOW_BAND,
    BandSpec,
    Envelope,
    Spectrogram,
    bandpass,
    hilbert_envelope,
    spectrogram,
)
from .indices import (
    DielProfile,
    IndexSeries,
    SnapEvents,
    aci,
    date_hour_matrix,
    detect_snaps,
    diel_profile,
    snap_rate,
    spl,
)
from .mixer import MixRecipe, PairManifest, SoundBank, augment, build_dataset, make_pair
from .stats import (
    CompositeModel,
    CorrelationResult,
    CyclicFit,
    TransectRecord,
    correlate_index,
    fit_composite,
    fit_cyclic,
    interpolate_transect,
    pearson,
)

__version__ = "0.1.0"
