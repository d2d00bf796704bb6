"""Seeded synthetic paired speech/EEG corpus and the two corruption processes.

Speech is a formant-shaped harmonic source with voiced/unvoiced/silent
segments. EEG is a 31 x 16 mixing of latent sources, half of which follow the
speech's short-time energy and spectral centroid, plus 1/f noise per channel.
Every random draw comes from a generator seeded by ``derive_seed``.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy import signal

from . import formats
from .dsp import SPEECH_RATE_HZ, MfccSequence, Waveform, read_wav, write_wav
from .eeg import CHANNEL_LABELS, EEG_RATE_HZ, N_CHANNELS, EegRecording

REFERENCE_LEVEL_DB = 65.0
# The reference level gives a -5 dB SNR mixture: noise rms sits this many dB
# above clean rms when level_db equals REFERENCE_LEVEL_DB.
NOISE_CALIBRATION_DB = 5.0
SEED_RULE = "numpy.random.SeedSequence([master_seed, stream, index]).generate_state(1)[0]"

# (F1, F2, F3) targets in Hz for a handful of vowel qualities.
VOWELS = (
    (730, 1090, 2440), (270, 2290, 3010), (530, 1840, 2480), (660, 1720, 2410),
    (300, 870, 2240), (570, 840, 2410), (440, 1020, 2240), (490, 1350, 1690),
)
FORMANT_BANDWIDTHS = (90.0, 120.0, 170.0)
FORMANT_GAINS = (1.0, 0.55, 0.3)


@dataclass(frozen=True)
class SynthParams:
    duration_s: float = 2.0
    pitch_range_hz: tuple = (95.0, 210.0)
    n_latent: int = 16
    n_coupled: int = 8
    coupling: float = 0.7
    smoothing_ms: float = 50.0
    latent_scale_uv: float = 12.0
    pink_noise_uv: float = 4.0
    subject_mixing_jitter: float = 0.2
    speech_rms: float = 0.05
    background_level_db: float = REFERENCE_LEVEL_DB
    background_kind: str = "music_like"
    master_seed: int = 0

    def validate(self):
        if not self.duration_s >= 1.0:
            raise ValueError("utterance duration must be at least 1 s")
        lo, hi = self.pitch_range_hz
        if not 0 < lo < hi:
            raise ValueError("pitch range must satisfy 0 < low < high")
        if not 0 < self.n_coupled <= self.n_latent:
            raise ValueError("need 0 < n_coupled <= n_latent")
        for name in ("coupling", "latent_scale_uv", "pink_noise_uv", "speech_rms",
                     "background_level_db", "smoothing_ms", "subject_mixing_jitter"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")

    def to_dict(self):
        d = asdict(self)
        d["pitch_range_hz"] = list(self.pitch_range_hz)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["pitch_range_hz"] = tuple(d["pitch_range_hz"])
        return cls(**d)


def derive_seed(master_seed: int, stream: int, index: int) -> int:
    return int(np.random.SeedSequence([int(master_seed), int(stream), int(index)]).generate_state(1)[0])


STREAM_UTTERANCE, STREAM_SUBJECT, STREAM_SENTENCE, STREAM_NOISE, STREAM_CORRUPT, STREAM_GLOBAL = range(6)


@dataclass
class SynthUtterance:
    clean: Waveform
    eeg: EegRecording
    latents: np.ndarray  # n_latent x eeg samples, before mixing
    frame_energy: np.ndarray  # coupling drive per 10 ms block
    frame_centroid: np.ndarray


def pink_noise(rng, n: int, channels: int = 1) -> np.ndarray:
    """Unit-variance 1/f noise, shape (channels, n)."""
    spec = np.fft.rfft(rng.standard_normal((channels, n)), axis=1)
    f = np.arange(spec.shape[1], dtype=np.float64)
    f[0] = 1.0
    spec /= np.sqrt(f)
    spec[:, 0] = 0.0
    x = np.fft.irfft(spec, n=n, axis=1)
    return x / (x.std(axis=1, keepdims=True) + 1e-12)


def _smooth_ramp(n: int, ramp: int) -> np.ndarray:
    env = np.ones(n)
    ramp = min(ramp, n // 2)
    if ramp > 0:
        r = 0.5 - 0.5 * np.cos(np.pi * np.arange(ramp) / ramp)
        env[:ramp] = r
        env[n - ramp:] = r[::-1]
    return env


def _segment_plan(rng, n: int, fs: int):
    """List of (kind, start, stop, vowel) covering [0, n)."""
    plan = []
    pos = int(rng.uniform(0.08, 0.18) * fs)
    plan.append(("silence", 0, pos, None))
    end = n - int(rng.uniform(0.08, 0.15) * fs)
    while pos < end:
        if rng.random() < 0.45:
            stop = min(end, pos + int(rng.uniform(0.04, 0.11) * fs))
            plan.append(("unvoiced", pos, stop, None))
            pos = stop
        stop = min(end, pos + int(rng.uniform(0.12, 0.30) * fs))
        if stop > pos:
            plan.append(("voiced", pos, stop, int(rng.integers(len(VOWELS)))))
            pos = stop
        if rng.random() < 0.35 and pos < end:
            stop = min(end, pos + int(rng.uniform(0.03, 0.12) * fs))
            plan.append(("silence", pos, stop, None))
            pos = stop
    plan.append(("silence", pos, n, None))
    return plan


def _synth_speech(rng, params: SynthParams, pitch_lo: float, pitch_hi: float) -> np.ndarray:
    fs = SPEECH_RATE_HZ
    n = int(round(params.duration_s * fs))
    t = np.arange(n) / fs
    plan = _segment_plan(rng, n, fs)

    voiced_env = np.zeros(n)
    formants = np.zeros((3, n))
    fric = np.zeros(n)
    last = VOWELS[0]
    anchors = []
    for kind, a, b, vowel in plan:
        if kind == "voiced":
            voiced_env[a:b] = rng.uniform(0.6, 1.0) * _smooth_ramp(b - a, int(0.02 * fs))
            target = np.array(VOWELS[vowel]) * rng.uniform(0.93, 1.07, 3)
            anchors.append(((a + b) // 2, target))
            last = target
        elif kind == "unvoiced":
            env = rng.uniform(0.25, 0.5) * _smooth_ramp(b - a, int(0.01 * fs))
            centre = rng.uniform(2500.0, 6000.0)
            sos = signal.butter(2, [centre * 0.7, min(centre * 1.3, 7900.0)], btype="bandpass",
                                fs=fs, output="sos")
            noise = signal.sosfilt(sos, rng.standard_normal(b - a))
            fric[a:b] = env * noise / (noise.std() + 1e-12)
    if not anchors:
        anchors.append((n // 2, np.array(last, dtype=np.float64)))
    pos = np.array([p for p, _ in anchors], dtype=np.float64)
    tgt = np.array([v for _, v in anchors])
    for k in range(3):
        formants[k] = np.interp(np.arange(n), pos, tgt[:, k])

    base = rng.uniform(pitch_lo, pitch_hi)
    f0 = base * (1.0 - 0.12 * t / params.duration_s) * (
        1.0 + 0.06 * np.sin(2 * np.pi * rng.uniform(0.5, 2.0) * t + rng.uniform(0, 2 * np.pi)))
    phase = 2 * np.pi * np.cumsum(f0) / fs
    n_harm = int(7800.0 // f0.min())
    voiced = np.zeros(n)
    for k in range(1, n_harm + 1):
        fk = k * f0
        gain = np.zeros(n)
        for i in range(3):
            gain += FORMANT_GAINS[i] / (1.0 + ((fk - formants[i]) / FORMANT_BANDWIDTHS[i]) ** 2)
        gain += 0.02
        gain = np.where(fk < 7900.0, gain, 0.0)
        voiced += gain * np.sin(k * phase)
    voiced /= voiced.std() + 1e-12

    x = voiced_env * voiced + fric
    x += 1e-4 * rng.standard_normal(n)  # recording floor
    return x * (params.speech_rms / (np.sqrt(np.mean(x * x)) + 1e-12))


def speech_drive(x: np.ndarray, fs: int = SPEECH_RATE_HZ):
    """Per-10-ms log energy and spectral centroid, each mapped to roughly [-1, 1]."""
    block = fs // 100
    n_blocks = x.size // block
    frames = x[: n_blocks * block].reshape(n_blocks, block)
    energy_db = 10.0 * np.log10(np.mean(frames ** 2, axis=1) + 1e-10)
    energy = np.clip((energy_db + 45.0) / 20.0, -1.5, 1.5)
    spec = np.abs(np.fft.rfft(frames * np.hanning(block), axis=1)) ** 2
    freqs = np.fft.rfftfreq(block, 1.0 / fs)
    centroid = (spec @ freqs) / (spec.sum(axis=1) + 1e-20)
    weight = np.clip(energy + 1.0, 0.0, 1.0)  # centroid of silence is meaningless
    centroid = weight * (centroid / 2000.0 - 1.0)
    return energy, centroid


def _mixing(params: SynthParams, subject_seed: int | None) -> np.ndarray:
    rng = np.random.default_rng(derive_seed(params.master_seed, STREAM_GLOBAL, 0))
    base = rng.standard_normal((N_CHANNELS, params.n_latent)) / np.sqrt(params.n_latent)
    if subject_seed is None:
        return base
    srng = np.random.default_rng(subject_seed)
    return base + params.subject_mixing_jitter * srng.standard_normal(base.shape) / np.sqrt(params.n_latent)


def _coupling_weights(params: SynthParams) -> np.ndarray:
    """Unit (energy, centroid) weights for each coupled latent; latent 0 is pure energy."""
    angles = np.linspace(0.0, np.pi, params.n_coupled, endpoint=False)
    return np.stack([np.cos(angles), np.sin(angles)], axis=1)


def synth_utterance(params: SynthParams, seed: int, subject_seed: int | None = None,
                    sentence_seed: int | None = None) -> SynthUtterance:
    """One clean 16 kHz utterance and its simultaneous 1000 Hz EEG.

    ``sentence_seed`` fixes the segment/vowel plan (shared by repetitions of a
    sentence), ``subject_seed`` fixes voice pitch range and the subject's
    mixing matrix; ``seed`` drives everything else.
    """
    params.validate()
    rng = np.random.default_rng(seed)
    lo, hi = params.pitch_range_hz
    if subject_seed is not None:
        srng = np.random.default_rng(subject_seed)
        centre = srng.uniform(lo, hi)
        span = 0.25 * (hi - lo)
        lo, hi = max(lo, centre - span), min(hi, centre + span)
    speech_rng = np.random.default_rng(sentence_seed) if sentence_seed is not None else rng
    x = _synth_speech(speech_rng, params, lo, hi)
    if sentence_seed is not None:
        # repetitions differ in level and a small noise floor
        x = x * rng.uniform(0.85, 1.15) + 2e-4 * rng.standard_normal(x.size)
        x *= params.speech_rms / np.sqrt(np.mean(x * x))
    clean = Waveform(x, SPEECH_RATE_HZ)

    n_eeg = int(round(params.duration_s * EEG_RATE_HZ))
    energy, centroid = speech_drive(x)
    per_block = EEG_RATE_HZ // 100
    drive = np.stack([energy, centroid])
    drive = np.repeat(drive, per_block, axis=1)
    if drive.shape[1] < n_eeg:
        drive = np.pad(drive, ((0, 0), (0, n_eeg - drive.shape[1])), mode="edge")
    drive = drive[:, :n_eeg]
    width = int(params.smoothing_ms * EEG_RATE_HZ / 1000)
    kernel = np.hanning(width + 2)[1:-1]
    kernel /= kernel.sum()
    drive = np.stack([np.convolve(d, kernel, mode="same") for d in drive])

    latents = np.zeros((params.n_latent, n_eeg))
    background = pink_noise(rng, n_eeg, params.n_latent)
    coupled = _coupling_weights(params) @ drive
    c = params.coupling
    latents[: params.n_coupled] = c * coupled + (1 - c) * background[: params.n_coupled]
    latents[params.n_coupled:] = background[params.n_coupled:]

    mix = _mixing(params, subject_seed)
    data = params.latent_scale_uv * (mix @ latents)
    data += params.pink_noise_uv * pink_noise(rng, n_eeg, N_CHANNELS)
    eeg = EegRecording(data, EEG_RATE_HZ, CHANNEL_LABELS)
    return SynthUtterance(clean, eeg, latents, energy, centroid)


def corrupt_mfcc(m: MfccSequence, sigma: float = 10.0, seed: int = 0) -> MfccSequence:
    """Add iid zero-mean Gaussian noise of standard deviation ``sigma``."""
    if not sigma >= 0:
        raise ValueError("sigma must be non-negative")
    if sigma == 0:
        return MfccSequence(m.coefficients.copy())
    rng = np.random.default_rng(seed)
    return MfccSequence(m.coefficients + sigma * rng.standard_normal(m.coefficients.shape))


def _music_like(rng, n: int, fs: int) -> np.ndarray:
    t = np.arange(n) / fs
    out = np.zeros(n)
    note_len = int(rng.uniform(0.25, 0.5) * fs)
    for voice in range(4):
        freqs = 110.0 * 2 ** (rng.integers(0, 36, size=n // note_len + 1) / 12.0)
        inst = np.repeat(freqs, note_len)[:n]
        inst = np.convolve(inst, np.ones(160) / 160, mode="same")  # glide between notes
        phase = 2 * np.pi * np.cumsum(inst) / fs
        trem = 1.0 + 0.5 * np.sin(2 * np.pi * rng.uniform(0.5, 4.0) * t + rng.uniform(0, 2 * np.pi))
        tone = sum((0.6 ** h) * np.sin((h + 1) * phase) for h in range(4))
        out += rng.uniform(0.5, 1.0) * trem * tone
    sos = signal.butter(2, [200.0, 3000.0], btype="bandpass", fs=fs, output="sos")
    colored = signal.sosfilt(sos, rng.standard_normal(n))
    out = out / (out.std() + 1e-12) + 0.6 * colored / (colored.std() + 1e-12)
    return out


def background_noise(kind: str, n: int, fs: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    if kind == "white":
        return rng.standard_normal(n)
    if kind == "music_like":
        return _music_like(rng, n, fs)
    raise ValueError(f"unknown noise kind {kind!r}")


def mix_background(clean: Waveform, noise_kind: str = "music_like",
                   level_db: float = REFERENCE_LEVEL_DB, seed: int = 0) -> Waveform:
    """Add background noise whose level relative to the speech is
    ``level_db - 65 + 5`` dB, so the 65 dB preset gives a -5 dB SNR mixture."""
    if not np.isfinite(level_db):
        raise ValueError("level_db must be finite")
    clean_rms = np.sqrt(np.mean(clean.samples ** 2))
    if clean_rms == 0:
        raise ValueError("clean signal has zero energy")
    noise = background_noise(noise_kind, len(clean), clean.sample_rate_hz, seed)
    rel_db = level_db - REFERENCE_LEVEL_DB + NOISE_CALIBRATION_DB
    noise *= clean_rms * 10.0 ** (rel_db / 20.0) / np.sqrt(np.mean(noise ** 2))
    return Waveform(clean.samples + noise, clean.sample_rate_hz)


def mixture_snr_db(clean: Waveform, mixture: Waveform) -> float:
    noise = mixture.samples - clean.samples
    return float(20.0 * np.log10(np.sqrt(np.mean(clean.samples ** 2)) / np.sqrt(np.mean(noise ** 2))))


# ---------------------------------------------------------------- corpus

@dataclass(frozen=True)
class CorpusPreset:
    train_subjects: tuple
    test_subjects: tuple
    n_sentences: int
    repeats: int
    n_train: int | None = None  # None: subjects x sentences x repeats
    n_test: int | None = None


PRESETS = {
    "desk": CorpusPreset((0, 1, 2, 3), (0, 1, 2, 3), n_sentences=10, repeats=3,
                         n_train=50, n_test=20),
    # 10 training subjects, 8 test subjects, two of them shared
    "paper-shape": CorpusPreset(tuple(range(10)), (8, 9) + tuple(range(10, 16)),
                                n_sentences=30, repeats=3),
    "tiny": CorpusPreset((0, 1), (0, 1), n_sentences=3, repeats=2, n_train=4, n_test=2),
}


@dataclass
class UtteranceRecord:
    id: str
    subject_id: int
    sentence: int
    repeat: int
    split: str
    seed: int
    clean_wav: str
    eeg: str
    noisy_wav: str | None = None
    subject_in_train: bool = True


@dataclass
class CorpusManifest:
    params: SynthParams
    preset: str
    seed_rule: str = SEED_RULE
    utterances: list = field(default_factory=list)
    root: Path | None = None

    def split(self, name: str):
        return [u for u in self.utterances if u.split == name]

    def validate(self, check_files: bool = True):
        ids = [u.id for u in self.utterances]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate utterance ids in manifest")
        if check_files and self.root is not None:
            for u in self.utterances:
                for rel in (u.clean_wav, u.eeg, u.noisy_wav):
                    if rel is not None and not (self.root / rel).exists():
                        raise FileNotFoundError(f"{u.id}: missing file {rel}")

    def to_json(self) -> str:
        doc = {
            "format": "neurovox-corpus/1",
            "preset": self.preset,
            "seed_rule": self.seed_rule,
            "params": self.params.to_dict(),
            "utterances": [asdict(u) for u in self.utterances],
        }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str, root=None) -> "CorpusManifest":
        doc = json.loads(text)
        return cls(SynthParams.from_dict(doc["params"]), doc["preset"], doc["seed_rule"],
                   [UtteranceRecord(**u) for u in doc["utterances"]],
                   Path(root) if root is not None else None)

    def write(self, path) -> None:
        formats.write_bytes(path, self.to_json().encode())

    @classmethod
    def read(cls, path) -> "CorpusManifest":
        path = Path(path)
        m = cls.from_json(path.read_text(), root=path.parent)
        m.validate()
        return m

    def load_clean(self, u: UtteranceRecord) -> Waveform:
        return read_wav(self.root / u.clean_wav)

    def load_noisy(self, u: UtteranceRecord) -> Waveform:
        return read_wav(self.root / u.noisy_wav)

    def load_eeg(self, u: UtteranceRecord) -> EegRecording:
        return formats.read_eeg(self.root / u.eeg)


def _plan_split(preset: CorpusPreset, subjects, count):
    full = [(s, k, r) for r in range(preset.repeats) for k in range(preset.n_sentences)
            for s in subjects]
    if count is None:
        return full
    if count > len(full):
        full = full * (count // len(full) + 1)
    return full[:count]


def build_corpus(params: SynthParams, out_dir, preset: str = "desk",
                 n_train: int | None = None, n_test: int | None = None,
                 subjects: int | None = None) -> CorpusManifest:
    """Generate and write a corpus; returns the manifest (also saved as manifest.json)."""
    if preset not in PRESETS:
        raise ValueError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
    p = PRESETS[preset]
    if subjects is not None:
        p = replace(p, train_subjects=tuple(range(subjects)), test_subjects=tuple(range(subjects)))
    n_train = p.n_train if n_train is None else n_train
    n_test = p.n_test if n_test is None else n_test
    if (n_train is not None and n_train < 1) or (n_test is not None and n_test < 1):
        raise ValueError("utterance counts must be >= 1")
    params.validate()

    out = Path(out_dir)
    try:
        (out / "wav").mkdir(parents=True, exist_ok=True)
        (out / "eeg").mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create corpus directory {out}: {exc}") from None

    manifest = CorpusManifest(params, preset, root=out)
    train_set = set(p.train_subjects)
    index = 0
    for split, subj_list, count in (("train", p.train_subjects, n_train),
                                    ("test", p.test_subjects, n_test)):
        for j, (subject, sentence, rep) in enumerate(_plan_split(p, subj_list, count)):
            uid = f"{split}-s{subject:02d}-n{sentence:02d}-r{rep}-{j:04d}"
            seed = derive_seed(params.master_seed, STREAM_UTTERANCE, index)
            utt = synth_utterance(
                params, seed,
                subject_seed=derive_seed(params.master_seed, STREAM_SUBJECT, subject),
                sentence_seed=derive_seed(params.master_seed, STREAM_SENTENCE, sentence),
            )
            rec = UtteranceRecord(uid, subject, sentence, rep, split, seed,
                                  f"wav/{uid}_clean.wav", f"eeg/{uid}.eeg",
                                  subject_in_train=subject in train_set)
            write_wav(out / rec.clean_wav, utt.clean)
            formats.write_eeg(out / rec.eeg, utt.eeg)
            if split == "test":
                noisy = mix_background(utt.clean, params.background_kind, params.background_level_db,
                                       derive_seed(params.master_seed, STREAM_NOISE, index))
                rec.noisy_wav = f"wav/{uid}_noisy.wav"
                write_wav(out / rec.noisy_wav, noisy)
            manifest.utterances.append(rec)
            index += 1
    manifest.validate()
    manifest.write(out / "manifest.json")
    return manifest
