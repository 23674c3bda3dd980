"""Speech disfluency toolkit: ZTW features, delta stacking, TDNN classifier."""

from ._dysflow import (
    DataError,
    Tdnn,
    UsageError,
    compute_metrics,
    detect_voice_activity,
    extract,
    hilbert_envelope,
    load_wav,
    make_w1,
    make_w2,
    ngd_spectrum,
    sdc,
    standardize_clip,
    write_wav,
    ztw_spectrogram,
)

__version__ = "0.1.0"

__all__ = [
    "DataError",
    "Tdnn",
    "UsageError",
    "compute_metrics",
    "detect_voice_activity",
    "extract",
    "hilbert_envelope",
    "load_wav",
    "make_w1",
    "make_w2",
    "ngd_spectrum",
    "sdc",
    "standardize_clip",
    "write_wav",
    "ztw_spectrogram",
]
