"""Objective quality metrics: STOI, mean/std SNR, spectral convergence and an
external-tool hook for PESQ."""

from __future__ import annotations

import csv
import io
import json
import logging
import re
import shlex
import subprocess
from dataclasses import asdict, dataclass, field
from math import gcd

import numpy as np
from scipy import signal

from . import dsp
from .dsp import Waveform

log = logging.getLogger(__name__)

STOI_RATE_HZ = 10000
STOI_FRAME = 256
STOI_FFT = 512
STOI_BANDS = 15
STOI_MIN_FREQ_HZ = 150.0
STOI_SEGMENT = 30
STOI_BETA_DB = -15.0
STOI_DYN_RANGE_DB = 40.0
RESAMPLE_TAPS_PER_PHASE = 64
RESAMPLE_KAISER_BETA = 8.0


class MetricError(ValueError):
    pass


def snr_mean_std(x: Waveform) -> float:
    """Mean of the samples divided by their population standard deviation."""
    s = x.samples
    if s.size < 2:
        raise MetricError("SNR needs at least two samples")
    sd = s.std()
    if sd == 0:
        raise MetricError("SNR undefined for a constant signal")
    return float(s.mean() / sd)


def resample(x: np.ndarray, rate_in: int, rate_out: int) -> np.ndarray:
    """Polyphase windowed-sinc resampling (Kaiser, 64 taps per phase)."""
    if rate_in == rate_out:
        return x.copy()
    g = gcd(rate_in, rate_out)
    up, down = rate_out // g, rate_in // g
    taps = signal.firwin(RESAMPLE_TAPS_PER_PHASE * up + 1, 1.0 / max(up, down),
                         window=("kaiser", RESAMPLE_KAISER_BETA))
    return signal.resample_poly(x, up, down, window=taps)


def third_octave_bands(fs=STOI_RATE_HZ, nfft=STOI_FFT, n_bands=STOI_BANDS,
                       min_freq=STOI_MIN_FREQ_HZ):
    """Binary one-third-octave band matrix (n_bands x nfft//2+1) and centre freqs."""
    freqs = np.linspace(0, fs, nfft + 1)[: nfft // 2 + 1]
    k = np.arange(n_bands, dtype=np.float64)
    centers = 2.0 ** (k / 3.0) * min_freq
    lo = min_freq * np.sqrt(2.0 ** (k / 3.0) * 2.0 ** ((k - 1) / 3.0))
    hi = min_freq * np.sqrt(2.0 ** (k / 3.0) * 2.0 ** ((k + 1) / 3.0))
    obm = np.zeros((n_bands, freqs.size))
    for i in range(n_bands):
        a = int(np.argmin((freqs - lo[i]) ** 2))
        b = int(np.argmin((freqs - hi[i]) ** 2))
        obm[i, a:b] = 1.0
    return obm, centers


def _stoi_window(n):
    return np.hanning(n + 2)[1:-1]


def _remove_silent_frames(x, y, dyn_range, framelen, hop):
    w = _stoi_window(framelen)
    n = dsp.frame_count(x.size, framelen, hop)
    idx = np.arange(framelen)[None, :] + hop * np.arange(n)[:, None]
    xf, yf = x[idx] * w, y[idx] * w
    energy = 20.0 * np.log10(np.linalg.norm(xf, axis=1) + np.finfo(np.float64).eps)
    keep = energy > energy.max() - dyn_range
    xf, yf = xf[keep], yf[keep]
    length = (xf.shape[0] - 1) * hop + framelen if xf.shape[0] else 0
    xs, ys = np.zeros(length), np.zeros(length)
    for i in range(xf.shape[0]):
        xs[i * hop:i * hop + framelen] += xf[i]
        ys[i * hop:i * hop + framelen] += yf[i]
    return xs, ys


def _stoi_stft(x):
    w = _stoi_window(STOI_FRAME)
    hop = STOI_FRAME // 2
    n = dsp.frame_count(x.size, STOI_FRAME, hop)
    idx = np.arange(STOI_FRAME)[None, :] + hop * np.arange(n)[:, None]
    return np.fft.rfft(x[idx] * w, n=STOI_FFT, axis=1)


_OBM, _ = third_octave_bands()


def stoi(clean: Waveform, degraded: Waveform) -> float:
    """Short-time objective intelligibility of ``degraded`` against ``clean``."""
    if clean.sample_rate_hz != degraded.sample_rate_hz:
        raise MetricError("clean and degraded sample rates differ")
    n = min(len(clean), len(degraded))
    x = resample(clean.samples[:n], clean.sample_rate_hz, STOI_RATE_HZ)
    y = resample(degraded.samples[:n], degraded.sample_rate_hz, STOI_RATE_HZ)
    x, y = _remove_silent_frames(x, y, STOI_DYN_RANGE_DB, STOI_FRAME, STOI_FRAME // 2)
    x_spec, y_spec = _stoi_stft(x), _stoi_stft(y)
    if x_spec.shape[0] < STOI_SEGMENT:
        raise MetricError(
            f"only {x_spec.shape[0]} non-silent frames; STOI needs at least {STOI_SEGMENT}"
        )
    # bands x frames envelopes
    x_tob = np.sqrt(_OBM @ (np.abs(x_spec) ** 2).T)
    y_tob = np.sqrt(_OBM @ (np.abs(y_spec) ** 2).T)
    clip = 10.0 ** (-STOI_BETA_DB / 20.0)
    eps = np.finfo(np.float64).eps
    scores = []
    for m in range(STOI_SEGMENT, x_tob.shape[1] + 1):
        xs = x_tob[:, m - STOI_SEGMENT:m]
        ys = y_tob[:, m - STOI_SEGMENT:m]
        scale = np.linalg.norm(xs, axis=1, keepdims=True) / (
            np.linalg.norm(ys, axis=1, keepdims=True) + eps)
        yp = np.minimum(ys * scale, xs * (1.0 + clip))
        xc = xs - xs.mean(axis=1, keepdims=True)
        yc = yp - yp.mean(axis=1, keepdims=True)
        xc /= np.linalg.norm(xc, axis=1, keepdims=True) + eps
        yc /= np.linalg.norm(yc, axis=1, keepdims=True) + eps
        scores.append(np.sum(xc * yc, axis=1))
    return float(np.mean(scores))


def spectral_convergence(ref: Waveform, est: Waveform) -> float:
    if ref.sample_rate_hz != est.sample_rate_hz:
        raise MetricError("sample rates differ")
    n = min(len(ref), len(est))
    r = dsp.stft(Waveform(ref.samples[:n], ref.sample_rate_hz)).magnitudes
    e = dsp.stft(Waveform(est.samples[:n], est.sample_rate_hz)).magnitudes
    denom = np.linalg.norm(r)
    if denom == 0:
        raise MetricError("reference has zero spectral energy")
    return float(np.linalg.norm(e - r) / denom)


_FLOAT_RE = re.compile(r"[-+]?(?:\d+\.\d*|\.\d+|\d+)(?:[eE][-+]?\d+)?")


def pesq_external(clean_path, degraded_path, command_template: str | None,
                  timeout_s: float = 120.0) -> float | None:
    """Run a user-supplied PESQ tool; ``None`` means the metric is unavailable.

    The template is a command line with ``{clean}`` and ``{degraded}``
    placeholders. The last number printed on stdout is taken as the score.
    """
    if not command_template:
        return None
    cmd = [part.format(clean=str(clean_path), degraded=str(degraded_path))
           for part in shlex.split(command_template)]
    try:
        proc = subprocess.run(cmd, capture_output=True, text=True, timeout=timeout_s)
    except (OSError, subprocess.TimeoutExpired) as exc:
        log.warning("pesq tool failed to run: %s", exc)
        return None
    if proc.returncode != 0:
        log.warning("pesq tool exited %d: %s", proc.returncode, proc.stderr.strip())
        return None
    found = _FLOAT_RE.findall(proc.stdout)
    if not found:
        log.warning("pesq tool output has no number: %r", proc.stdout)
        return None
    return float(found[-1])


@dataclass
class UtteranceMetrics:
    id: str
    snr_noisy: float
    snr_enhanced: float
    stoi_noisy: float
    stoi_enhanced: float
    spectral_convergence: float
    pesq_noisy: float | None = None
    pesq_enhanced: float | None = None


NUMERIC_FIELDS = ("snr_noisy", "snr_enhanced", "stoi_noisy", "stoi_enhanced",
                  "spectral_convergence")


@dataclass
class MetricReport:
    records: list = field(default_factory=list)
    notes: dict = field(default_factory=dict)
    pesq_available: bool = False

    def means(self) -> dict:
        out = {}
        fields = NUMERIC_FIELDS + (("pesq_noisy", "pesq_enhanced") if self.pesq_available else ())
        for name in fields:
            vals = [getattr(r, name) for r in self.records if getattr(r, name) is not None]
            out[name] = float(np.mean(vals)) if vals else None
        return out

    def columns(self):
        cols = ["id", *NUMERIC_FIELDS]
        if self.pesq_available:
            cols += ["pesq_noisy", "pesq_enhanced"]
        return cols

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        cols = self.columns()
        writer.writerow(cols)
        for r in self.records:
            writer.writerow([getattr(r, c) if c == "id" else repr(getattr(r, c)) for c in cols])
        return buf.getvalue()

    def to_json(self) -> str:
        cols = self.columns()
        doc = {
            "notes": self.notes,
            "pesq": "available" if self.pesq_available else "unavailable",
            "records": [{c: asdict(r)[c] for c in cols} for r in self.records],
            "means": self.means(),
        }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"
