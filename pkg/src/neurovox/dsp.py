"""Audio-rate signal processing: IIR filters, STFT, MFCC analysis and
MFCC-to-waveform inversion via Griffin-Lim."""

from __future__ import annotations

import wave
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import fft as sp_fft
from scipy import signal

SPEECH_RATE_HZ = 16000
MFCC_WINDOW = 400  # 25 ms at 16 kHz
MFCC_HOP = 160  # 100 Hz frame rate
MFCC_FFT = 512
MFCC_FRAME_RATE_HZ = 100
N_MEL = 26
N_MFCC = 13
LOG_FLOOR = 1e-10
GRIFFIN_LIM_ITERATIONS = 60
NOTCH_QUALITY = 30.0


class SpecError(ValueError):
    """Invalid filter or analysis parameters."""


class EmptySpectrogramError(ValueError):
    """Signal too short to produce a single analysis frame."""


@dataclass(frozen=True)
class Waveform:
    samples: np.ndarray
    sample_rate_hz: int

    def __post_init__(self):
        x = np.asarray(self.samples, dtype=np.float64)
        if x.ndim != 1:
            raise ValueError("waveform must be one-dimensional")
        if int(self.sample_rate_hz) <= 0:
            raise ValueError("sample_rate_hz must be positive")
        if not np.all(np.isfinite(x)):
            raise ValueError("waveform contains non-finite samples")
        object.__setattr__(self, "samples", x)
        object.__setattr__(self, "sample_rate_hz", int(self.sample_rate_hz))

    def __len__(self):
        return self.samples.size

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate_hz


@dataclass(frozen=True)
class Spectrogram:
    magnitudes: np.ndarray  # frames x bins
    hop_samples: int
    window_samples: int
    fft_size: int
    sample_rate_hz: int

    def __post_init__(self):
        m = np.asarray(self.magnitudes, dtype=np.float64)
        if m.ndim != 2 or m.shape[1] != self.fft_size // 2 + 1:
            raise ValueError(
                f"spectrogram must have fft_size/2+1={self.fft_size // 2 + 1} bins, got shape {m.shape}"
            )
        if not np.all(np.isfinite(m)) or np.any(m < 0):
            raise ValueError("spectrogram magnitudes must be finite and non-negative")
        object.__setattr__(self, "magnitudes", m)

    @property
    def n_frames(self) -> int:
        return self.magnitudes.shape[0]


@dataclass(frozen=True)
class MfccSequence:
    """Frames x 13 cepstral matrix at a fixed 100 Hz frame rate."""

    coefficients: np.ndarray
    frame_rate_hz: int = MFCC_FRAME_RATE_HZ

    def __post_init__(self):
        c = np.asarray(self.coefficients, dtype=np.float64)
        if c.ndim != 2 or c.shape[1] != N_MFCC:
            raise ValueError(f"MFCC sequence must be frames x {N_MFCC}, got {c.shape}")
        if self.frame_rate_hz != MFCC_FRAME_RATE_HZ:
            raise ValueError("MFCC frame rate is fixed at 100 Hz")
        object.__setattr__(self, "coefficients", c)

    @property
    def n_frames(self) -> int:
        return self.coefficients.shape[0]


@dataclass(frozen=True)
class IirFilterSpec:
    kind: str  # "bandpass" | "notch"
    order: int
    cutoffs_hz: tuple
    sample_rate_hz: int

    def validate(self) -> None:
        if self.kind not in ("bandpass", "notch"):
            raise SpecError(f"unknown filter kind {self.kind!r}")
        if int(self.order) <= 0:
            raise SpecError("filter order must be positive")
        if self.sample_rate_hz <= 0:
            raise SpecError("sample rate must be positive")
        nyquist = self.sample_rate_hz / 2.0
        cut = tuple(float(c) for c in self.cutoffs_hz)
        if any(c <= 0 or not np.isfinite(c) for c in cut):
            raise SpecError("cutoffs must be positive and finite")
        if any(c >= nyquist for c in cut):
            raise SpecError(f"cutoff {max(cut)} Hz is not below Nyquist ({nyquist} Hz)")
        if self.kind == "bandpass" and (len(cut) != 2 or cut[0] >= cut[1]):
            raise SpecError("bandpass needs two cutoffs with low < high")
        if self.kind == "notch" and len(cut) != 1:
            raise SpecError("notch needs exactly one center frequency")


@dataclass(frozen=True)
class SosFilter:
    """Cascade of second-order sections bound to a sample rate."""

    sos: np.ndarray
    sample_rate_hz: int
    spec: IirFilterSpec | None = field(default=None, compare=False)

    def response_db(self, freqs_hz) -> np.ndarray:
        freqs_hz = np.atleast_1d(np.asarray(freqs_hz, dtype=np.float64))
        _, h = signal.sosfreqz(self.sos, worN=freqs_hz, fs=self.sample_rate_hz)
        return 20.0 * np.log10(np.maximum(np.abs(h), 1e-300))


def design_iir(spec: IirFilterSpec) -> SosFilter:
    """Design a Butterworth bandpass or a second-order notch as SOS.

    ``order`` is the Butterworth prototype order, so each band edge of a
    bandpass rolls off at ``order`` poles.
    """
    spec.validate()
    if spec.kind == "bandpass":
        sos = signal.butter(
            int(spec.order), list(spec.cutoffs_hz), btype="bandpass",
            fs=spec.sample_rate_hz, output="sos",
        )
    else:
        b, a = signal.iirnotch(float(spec.cutoffs_hz[0]), NOTCH_QUALITY, fs=spec.sample_rate_hz)
        sos = signal.tf2sos(b, a)
    return SosFilter(np.asarray(sos, dtype=np.float64), spec.sample_rate_hz, spec)


def filter_apply(filt: SosFilter, x: Waveform) -> Waveform:
    if filt.sample_rate_hz != x.sample_rate_hz:
        raise ValueError(
            f"filter designed for {filt.sample_rate_hz} Hz, signal is {x.sample_rate_hz} Hz"
        )
    return Waveform(signal.sosfilt(filt.sos, x.samples), x.sample_rate_hz)


def frame_count(n_samples: int, window_samples: int, hop_samples: int) -> int:
    if n_samples < window_samples:
        return 0
    return (n_samples - window_samples) // hop_samples + 1


def hann(window_samples: int) -> np.ndarray:
    return signal.get_window("hann", window_samples, fftbins=True)


def _frames(x: np.ndarray, window_samples: int, hop_samples: int) -> np.ndarray:
    n = frame_count(x.size, window_samples, hop_samples)
    idx = np.arange(window_samples)[None, :] + hop_samples * np.arange(n)[:, None]
    return x[idx]


def stft_complex(x: np.ndarray, window_samples: int, hop_samples: int, fft_size: int) -> np.ndarray:
    frames = _frames(x, window_samples, hop_samples) * hann(window_samples)
    return np.fft.rfft(frames, n=fft_size, axis=1)


def _check_stft_args(window_samples, hop_samples, fft_size):
    if window_samples < 1 or window_samples > fft_size:
        raise SpecError("window_samples must be in [1, fft_size]")
    if hop_samples < 1:
        raise SpecError("hop_samples must be >= 1")


def stft(x: Waveform, window_samples: int = MFCC_WINDOW, hop_samples: int = MFCC_HOP,
         fft_size: int = MFCC_FFT) -> Spectrogram:
    _check_stft_args(window_samples, hop_samples, fft_size)
    if len(x) < window_samples:
        raise EmptySpectrogramError(
            f"signal of {len(x)} samples is shorter than one {window_samples}-sample window"
        )
    mags = np.abs(stft_complex(x.samples, window_samples, hop_samples, fft_size))
    return Spectrogram(mags, hop_samples, window_samples, fft_size, x.sample_rate_hz)


def istft(spec: np.ndarray, window_samples: int, hop_samples: int, fft_size: int) -> np.ndarray:
    """Least-squares inverse STFT (weighted overlap-add, window-square normalised)."""
    n_frames = spec.shape[0]
    length = (n_frames - 1) * hop_samples + window_samples
    win = hann(window_samples)
    frames = np.fft.irfft(spec, n=fft_size, axis=1)[:, :window_samples] * win
    out = np.zeros(length)
    norm = np.zeros(length)
    for m in range(n_frames):
        s = m * hop_samples
        out[s:s + window_samples] += frames[m]
        norm[s:s + window_samples] += win * win
    nz = norm > 1e-12
    out[nz] /= norm[nz]
    return out


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(n_mels: int = N_MEL, fft_size: int = MFCC_FFT,
                   sample_rate_hz: int = SPEECH_RATE_HZ, fmin: float = 0.0,
                   fmax: float | None = None) -> np.ndarray:
    """HTK-scale triangular filters with unit peak, shape (n_mels, fft_size//2+1)."""
    fmax = sample_rate_hz / 2.0 if fmax is None else fmax
    edges = mel_to_hz(np.linspace(hz_to_mel(fmin), hz_to_mel(fmax), n_mels + 2))
    bins = np.fft.rfftfreq(fft_size, d=1.0 / sample_rate_hz)
    fb = np.zeros((n_mels, bins.size))
    for i in range(n_mels):
        lo, mid, hi = edges[i], edges[i + 1], edges[i + 2]
        rising = (bins - lo) / (mid - lo)
        falling = (hi - bins) / (hi - mid)
        fb[i] = np.maximum(0.0, np.minimum(rising, falling))
    return fb


_MEL_FB = mel_filterbank()
_MEL_FB_PINV = np.linalg.pinv(_MEL_FB)


def mfcc(x: Waveform) -> MfccSequence:
    """13 MFCCs (c0..c12) at 100 Hz from 16 kHz speech.

    STFT (Hann 400, hop 160, FFT 512) -> 26 mel power energies ->
    log with a 1e-10 floor -> orthonormal DCT-II.
    """
    if x.sample_rate_hz != SPEECH_RATE_HZ:
        raise ValueError(f"mfcc expects {SPEECH_RATE_HZ} Hz audio, got {x.sample_rate_hz} Hz")
    power = stft(x).magnitudes ** 2
    log_mel = np.log(np.maximum(power @ _MEL_FB.T, LOG_FLOOR))
    ceps = sp_fft.dct(log_mel, type=2, norm="ortho", axis=1)[:, :N_MFCC]
    return MfccSequence(ceps)


def mfcc_to_mel(m: MfccSequence) -> np.ndarray:
    """Mel power energies recovered from truncated cepstra (frames x 26)."""
    padded = np.zeros((m.n_frames, N_MEL))
    padded[:, :N_MFCC] = m.coefficients
    return np.exp(sp_fft.idct(padded, type=2, norm="ortho", axis=1))


def mfcc_invert(m: MfccSequence) -> Spectrogram:
    power = np.maximum(mfcc_to_mel(m) @ _MEL_FB_PINV.T, 0.0)
    return Spectrogram(np.sqrt(power), MFCC_HOP, MFCC_WINDOW, MFCC_FFT, SPEECH_RATE_HZ)


def spectral_convergence_error(target: np.ndarray, estimate: np.ndarray) -> float:
    denom = np.linalg.norm(target)
    if denom == 0:
        return 0.0
    return float(np.linalg.norm(estimate - target) / denom)


def griffin_lim(s: Spectrogram, iterations: int = GRIFFIN_LIM_ITERATIONS,
                return_errors: bool = False):
    """Reconstruct a waveform from STFT magnitudes, starting from zero phase.

    With ``return_errors`` the spectral-convergence error of every iterate
    is returned alongside the waveform (entry k-1 belongs to iterate k).
    """
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    target = s.magnitudes
    args = (s.window_samples, s.hop_samples, s.fft_size)
    errors = []
    x = istft(target.astype(np.complex128), *args)
    if not np.any(target):
        x = np.zeros_like(x)
        out = Waveform(x, s.sample_rate_hz)
        return (out, [0.0] * iterations) if return_errors else out
    for k in range(iterations):
        if k > 0:
            x = istft(target * np.exp(1j * np.angle(spec)), *args)
        spec = stft_complex(x, *args)
        if return_errors:
            errors.append(spectral_convergence_error(target, np.abs(spec)))
    out = Waveform(x, s.sample_rate_hz)
    return (out, errors) if return_errors else out


def read_wav(path) -> Waveform:
    with wave.open(str(path), "rb") as w:
        if w.getsampwidth() != 2 or w.getnchannels() != 1:
            raise ValueError(f"{path}: only mono 16-bit PCM is supported")
        rate = w.getframerate()
        raw = w.readframes(w.getnframes())
    return Waveform(np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0, rate)


def write_wav(path, x: Waveform) -> None:
    pcm = np.round(np.clip(x.samples, -1.0, 32767 / 32768) * 32768.0).astype("<i2")
    with wave.open(str(Path(path)), "wb") as w:
        w.setnchannels(1)
        w.setsampwidth(2)
        w.setframerate(x.sample_rate_hz)
        w.writeframes(pcm.tobytes())
