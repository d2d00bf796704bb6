"""EEG preprocessing and the five per-channel statistical features at 100 Hz."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal

from .dsp import IirFilterSpec, design_iir

EEG_RATE_HZ = 1000
N_CHANNELS = 31
FEATURE_WINDOW = 100
FEATURE_HOP = 10
FEATURE_KINDS = ("rms", "zcr", "mwa", "kurtosis", "pse")
N_FEATURES = N_CHANNELS * len(FEATURE_KINDS)

# 10-20 names of the 31 data electrodes; metadata only.
CHANNEL_LABELS = (
    "Fp1", "Fp2", "F7", "F3", "Fz", "F4", "F8", "FC5", "FC1", "FC2", "FC6",
    "T7", "C3", "Cz", "C4", "T8", "TP9", "CP5", "CP1", "CP2", "CP6", "TP10",
    "P7", "P3", "Pz", "P4", "P8", "PO9", "O1", "Oz", "O2",
)

BANDPASS = IirFilterSpec("bandpass", 4, (0.1, 70.0), EEG_RATE_HZ)
NOTCH = IirFilterSpec("notch", 2, (60.0,), EEG_RATE_HZ)


@dataclass(frozen=True)
class EegRecording:
    data: np.ndarray  # channels x samples, microvolts
    sample_rate_hz: int = EEG_RATE_HZ
    channel_labels: tuple = CHANNEL_LABELS

    def __post_init__(self):
        d = np.asarray(self.data, dtype=np.float64)
        if d.ndim != 2 or d.shape[0] != N_CHANNELS:
            raise ValueError(f"EEG must be {N_CHANNELS} x samples, got {d.shape}")
        if self.sample_rate_hz != EEG_RATE_HZ:
            raise ValueError(f"EEG sample rate must be {EEG_RATE_HZ} Hz")
        if len(self.channel_labels) != N_CHANNELS:
            raise ValueError("need one label per channel")
        if not np.all(np.isfinite(d)):
            raise ValueError("EEG contains non-finite samples")
        object.__setattr__(self, "data", d)
        object.__setattr__(self, "channel_labels", tuple(self.channel_labels))

    @property
    def n_samples(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class EegFeatureSequence:
    """Frames x 155, channel-major blocks of [rms, zcr, mwa, kurtosis, pse]."""

    features: np.ndarray
    frame_rate_hz: int = 100

    def __post_init__(self):
        f = np.asarray(self.features, dtype=np.float64)
        if f.ndim != 2 or f.shape[1] != N_FEATURES:
            raise ValueError(f"EEG features must be frames x {N_FEATURES}, got {f.shape}")
        object.__setattr__(self, "features", f)

    @property
    def n_frames(self) -> int:
        return self.features.shape[0]

    def column(self, channel: int, kind: str) -> np.ndarray:
        return self.features[:, feature_column(channel, kind)]


def feature_column(channel: int, kind: str) -> int:
    return len(FEATURE_KINDS) * channel + FEATURE_KINDS.index(kind)


def no_artifact_removal(rec: EegRecording) -> EegRecording:
    return rec


def preprocess_eeg(x: EegRecording, artifact_hook=no_artifact_removal) -> EegRecording:
    """Band-pass 0.1-70 Hz, notch 60 Hz, then the (default no-op) artifact hook."""
    bp = design_iir(BANDPASS)
    notch = design_iir(NOTCH)
    y = signal.sosfilt(bp.sos, x.data, axis=1)
    y = signal.sosfilt(notch.sos, y, axis=1)
    return artifact_hook(EegRecording(y, x.sample_rate_hz, x.channel_labels))


# The batched helpers below work on (..., window) arrays; window_feature is
# the single-window entry point and shares them.

def _rms(w):
    return np.sqrt(np.mean(w * w, axis=-1))


def _zcr(w):
    s = w >= 0
    return np.count_nonzero(s[..., 1:] != s[..., :-1], axis=-1) / (w.shape[-1] - 1)


def _mwa(w):
    return np.mean(w, axis=-1)


def _kurtosis(w):
    d = w - w.mean(axis=-1, keepdims=True)
    m2 = np.mean(d * d, axis=-1)
    m4 = np.mean(d ** 4, axis=-1)
    scale = np.max(np.abs(w), axis=-1)
    flat = m2 <= (1e-12 * scale) ** 2
    return np.where(flat, 0.0, m4 / np.where(flat, 1.0, m2 * m2))


def _pse(w):
    p = np.abs(np.fft.rfft(w, axis=-1)[..., 1:]) ** 2
    total = p.sum(axis=-1, keepdims=True)
    zero = total[..., 0] <= 0
    q = p / np.where(total > 0, total, 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -np.sum(np.where(q > 0, q * np.log(q), 0.0), axis=-1)
    return np.where(zero, 0.0, h)


_FEATURE_FUNCS = {"rms": _rms, "zcr": _zcr, "mwa": _mwa, "kurtosis": _kurtosis, "pse": _pse}


def window_feature(window, kind: str) -> float:
    w = np.asarray(window, dtype=np.float64)
    if w.ndim != 1 or w.size < 2:
        raise ValueError("feature window needs at least two samples")
    if kind not in _FEATURE_FUNCS:
        raise ValueError(f"unknown feature {kind!r}; expected one of {FEATURE_KINDS}")
    return float(_FEATURE_FUNCS[kind](w))


def extract_eeg_features(x: EegRecording) -> EegFeatureSequence:
    n = x.n_samples
    if n < FEATURE_WINDOW:
        raise ValueError(f"recording of {n} samples is shorter than one {FEATURE_WINDOW}-sample window")
    n_frames = (n - FEATURE_WINDOW) // FEATURE_HOP + 1
    idx = np.arange(FEATURE_WINDOW)[None, :] + FEATURE_HOP * np.arange(n_frames)[:, None]
    windows = x.data[:, idx]  # channels x frames x window
    feats = np.stack([_FEATURE_FUNCS[k](windows) for k in FEATURE_KINDS], axis=-1)
    # channels x frames x 5 -> frames x (channel-major 5-blocks)
    return EegFeatureSequence(feats.transpose(1, 0, 2).reshape(n_frames, N_FEATURES))
