"""End-to-end protocol: synthesise a corpus, extract features, train,
enhance and evaluate. Each stage reads and writes files under a working
directory so stages can be run separately (see ``neurovox.cli``)."""

from __future__ import annotations

import json
import logging
import os
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import dsp, formats, metrics, models
from .dimred import (explained_variance_csv, kpca_fit, kpca_transform,
                     pca_explained_variance, subsample_rows)
from .eeg import extract_eeg_features, preprocess_eeg
from .models import TrainConfig, UtteranceFeatures
from .synth import CorpusManifest, SynthParams, build_corpus, corrupt_mfcc, derive_seed

log = logging.getLogger(__name__)

STREAM_KPCA = 10
STREAM_DEBUG_NOISE = 11
KPCA_MAGIC_HEADER = "neurovox-kpca/1"


@dataclass
class ExperimentConfig:
    corpus_dir: str | None = None
    work_dir: str | None = None
    preset: str = "desk"
    master_seed: int = 0
    n_train: int | None = None
    n_test: int | None = None
    subjects: int | None = None
    subject: int | None = None  # restrict train/enhance/evaluate to one subject
    synth: dict = field(default_factory=dict)  # SynthParams overrides
    kpca_dim: int = 30
    kpca_degree: int = 3
    kpca_coef0: float = 1.0
    kpca_train_frames: int = 2000
    kpca_frame_cap: int = 20000
    eeg_input: str = "eeg30"  # KPCA-reduced features, or "eeg155" for the raw 155
    lstm: TrainConfig = field(default_factory=TrainConfig.default_lstm)
    gan: TrainConfig = field(default_factory=TrainConfig.default_gan)
    griffin_lim_iterations: int = dsp.GRIFFIN_LIM_ITERATIONS
    pesq_command: str | None = None

    def validate(self):
        if not 1 <= self.kpca_dim <= 155:
            raise ValueError("kpca_dim must be in [1, 155]")
        if self.eeg_input not in ("eeg30", "eeg155"):
            raise ValueError("eeg_input must be 'eeg30' or 'eeg155'")
        self.lstm.validate()
        self.gan.validate()

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        base = cls()
        for key in ("lstm", "gan"):
            if key in d:
                d[key] = replace(getattr(base, key), **d[key])
        return cls(**{**asdict(base), "lstm": base.lstm, "gan": base.gan, **d})

    @classmethod
    def load(cls, path):
        return cls.from_dict(json.loads(Path(path).read_text()))

    def train_config(self, model: str) -> TrainConfig:
        return self.lstm if model == "lstm" else self.gan

    def model_hash(self, model: str) -> str:
        """Hash of every setting a trained model depends on."""
        keys = ("preset", "master_seed", "n_train", "n_test", "subjects", "subject", "synth",
                "kpca_dim", "kpca_degree", "kpca_coef0", "kpca_train_frames", "eeg_input")
        doc = {k: getattr(self, k) for k in keys}
        doc["train"] = asdict(self.train_config(model))
        return formats.config_hash(doc)

    # directory layout
    def corpus_path(self) -> Path:
        if self.corpus_dir is None:
            raise ValueError("corpus_dir is not set")
        return Path(self.corpus_dir)

    def work_path(self) -> Path:
        if self.work_dir is None:
            raise ValueError("work_dir is not set")
        return Path(self.work_dir)

    def features_path(self) -> Path:
        return self.work_path() / "features"

    def model_path(self, model: str) -> Path:
        return self.work_path() / model


# Epoch budgets that keep the desk corpus (both models, end to end) inside
# half an hour on one CPU core. Everything else stays at the defaults.
DESK_EPOCHS = {"lstm": 200, "gan": 100}


def desk_config(corpus_dir, work_dir, master_seed: int = 0, **kw) -> ExperimentConfig:
    cfg = ExperimentConfig(corpus_dir=str(corpus_dir), work_dir=str(work_dir), preset="desk",
                           master_seed=master_seed, **kw)
    cfg.lstm = replace(cfg.lstm, epochs=DESK_EPOCHS["lstm"])
    cfg.gan = replace(cfg.gan, epochs=DESK_EPOCHS["gan"])
    return cfg


def apply_thread_cap():
    """Honour NEUROVOX_THREADS by capping BLAS/OpenMP pools; returns the cap."""
    value = os.environ.get("NEUROVOX_THREADS")
    if not value:
        return None
    from threadpoolctl import threadpool_limits

    n = int(value)
    threadpool_limits(limits=n)
    return n


# ------------------------------------------------------------------ synth

def run_synth(cfg: ExperimentConfig) -> CorpusManifest:
    params = SynthParams(**{**cfg.synth, "master_seed": cfg.master_seed})
    return build_corpus(params, cfg.corpus_path(), cfg.preset, cfg.n_train, cfg.n_test, cfg.subjects)


# ------------------------------------------------------------------ extract

def _feat_file(cfg, uid, kind, variant=""):
    suffix = f".{variant}" if variant else ""
    return cfg.features_path() / f"{uid}{suffix}.{kind}"


def _extract_one(manifest, u):
    clean = dsp.mfcc(manifest.load_clean(u)).coefficients
    eeg155 = extract_eeg_features(preprocess_eeg(manifest.load_eeg(u))).features
    noisy = dsp.mfcc(manifest.load_noisy(u)).coefficients if u.noisy_wav else None
    n = min(clean.shape[0], eeg155.shape[0])
    return clean[:n], eeg155[:n], (noisy[:n] if noisy is not None else None)


def run_extract(cfg: ExperimentConfig) -> dict:
    """Write mfcc13/eeg155/eeg30 files, the fitted KPCA and the
    explained-variance curve. Returns a small summary."""
    manifest = CorpusManifest.read(cfg.corpus_path() / "manifest.json")
    out = cfg.features_path()
    out.mkdir(parents=True, exist_ok=True)
    eeg_by_id = {}
    for u in manifest.utterances:
        try:
            clean, eeg155, noisy = _extract_one(manifest, u)
        except Exception as exc:
            raise RuntimeError(f"feature extraction failed for utterance {u.id}: {exc}") from exc
        formats.write_features(_feat_file(cfg, u.id, "mfcc13", "clean"), "mfcc13", clean)
        if noisy is not None:
            formats.write_features(_feat_file(cfg, u.id, "mfcc13", "noisy"), "mfcc13", noisy)
        formats.write_features(_feat_file(cfg, u.id, "eeg155"), "eeg155", eeg155)
        eeg_by_id[u.id] = eeg155

    train155 = np.concatenate([eeg_by_id[u.id] for u in manifest.split("train")])
    mean, std = train155.mean(axis=0), train155.std(axis=0)
    std = np.where(std > 1e-12, std, 1.0)
    scaled = (train155 - mean) / std
    curve = pca_explained_variance(scaled)
    formats.write_bytes(out / "explained_variance.csv", explained_variance_csv(curve).encode())

    fit_rows = subsample_rows(scaled, cfg.kpca_train_frames,
                              derive_seed(cfg.master_seed, STREAM_KPCA, 0))
    kpca = kpca_fit(fit_rows, cfg.kpca_dim, degree=cfg.kpca_degree, coef0=cfg.kpca_coef0,
                    frame_cap=cfg.kpca_frame_cap)
    header = {"format": KPCA_MAGIC_HEADER, "config_hash": formats.config_hash(
        {"kpca_dim": cfg.kpca_dim, "kpca_degree": cfg.kpca_degree, "seed": cfg.master_seed}),
        "kpca": kpca.header()}
    arrays = {**kpca.arrays(), "scaler.mean": mean, "scaler.std": std}
    formats.write_checkpoint(out / "kpca.nvx", header, arrays)

    for uid, eeg155 in eeg_by_id.items():
        reduced = kpca_transform(kpca, (eeg155 - mean) / std)
        formats.write_features(_feat_file(cfg, uid, "kpca"), f"eeg{reduced.shape[1]}", reduced)
    return {"utterances": len(eeg_by_id), "kpca_components": kpca.output_dim,
            "kpca_fit_frames": fit_rows.shape[0], "explained_variance_at_k":
            float(curve[min(cfg.kpca_dim, curve.size) - 1])}


def _load_eeg_input(cfg, uid):
    if cfg.eeg_input == "eeg155":
        return formats.read_features(_feat_file(cfg, uid, "eeg155"))[2]
    return formats.read_features(_feat_file(cfg, uid, "kpca"))[2]


def _utterances(cfg, manifest, split):
    us = manifest.split(split)
    if cfg.subject is not None:
        us = [u for u in us if u.subject_id == cfg.subject]
    return us


def load_training_items(cfg: ExperimentConfig):
    manifest = CorpusManifest.read(cfg.corpus_path() / "manifest.json")
    items = []
    for u in _utterances(cfg, manifest, "train"):
        clean = formats.read_features(_feat_file(cfg, u.id, "mfcc13", "clean"))[2]
        items.append(UtteranceFeatures(u.id, clean, _load_eeg_input(cfg, u.id)))
    if not items:
        raise ValueError("no training utterances selected")
    return items


def _ridge_fit_predict(X, Y, Xt, lam):
    mu, sd = X.mean(axis=0), X.std(axis=0)
    sd = np.where(sd > 1e-12, sd, 1.0)
    Z = np.hstack([(X - mu) / sd, np.ones((len(X), 1))])
    Zt = np.hstack([(Xt - mu) / sd, np.ones((len(Xt), 1))])
    W = np.linalg.solve(Z.T @ Z + lam * np.eye(Z.shape[1]), Z.T @ Y)
    return Zt @ W


def ridge_baseline(cfg: ExperimentConfig, lam: float = 1.0) -> dict:
    """Linear learnability check on extracted features.

    Fits ridge regressions to clean MFCC from the training inputs (clean MFCC
    plus the training noise) with and without the reduced EEG, then reports
    test-split MSE where the input is the MFCC of the mixed audio.
    """
    manifest = CorpusManifest.read(cfg.corpus_path() / "manifest.json")
    sigma = cfg.lstm.noise_sigma
    sets = {}
    for split in ("train", "test"):
        xs, es, ys = [], [], []
        for i, u in enumerate(_utterances(cfg, manifest, split)):
            clean = formats.read_features(_feat_file(cfg, u.id, "mfcc13", "clean"))[2]
            if split == "train":
                noisy = corrupt_mfcc(dsp.MfccSequence(clean), sigma,
                                     derive_seed(cfg.master_seed, STREAM_DEBUG_NOISE, i)).coefficients
            else:
                noisy = formats.read_features(_feat_file(cfg, u.id, "mfcc13", "noisy"))[2]
            xs.append(noisy)
            es.append(_load_eeg_input(cfg, u.id))
            ys.append(clean)
        sets[split] = tuple(np.concatenate(v) for v in (xs, es, ys))
    (x, e, y), (xt, et, yt) = sets["train"], sets["test"]
    without = float(np.mean((_ridge_fit_predict(x, y, xt, lam) - yt) ** 2))
    with_eeg = float(np.mean((_ridge_fit_predict(np.hstack([x, e]), y, np.hstack([xt, et]), lam)
                              - yt) ** 2))
    return {"mse_without_eeg": without, "mse_with_eeg": with_eeg,
            "identity_mse": float(np.mean((xt - yt) ** 2))}


# ------------------------------------------------------------------ train

LOG_FILES = {"lstm": "lstm_loss.csv", "generator": "generator_loss.csv",
             "discriminator": "discriminator_loss.csv"}


def _write_logs(state, out_dir):
    for name, rows in state.logs.items():
        formats.write_bytes(out_dir / LOG_FILES[name],
                            models.log_csv(rows, models.LOG_COLUMNS[name]).encode())


def run_train(cfg: ExperimentConfig, model: str, resume: bool = False,
              stop_after: int | None = None) -> models.TrainState:
    """Train ``model`` ('lstm' or 'gan'); a checkpoint is written after every
    epoch so an interrupted run can continue with ``resume=True``."""
    tcfg = cfg.train_config(model)
    tcfg.validate()
    items = load_training_items(cfg)
    out = cfg.model_path(model)
    out.mkdir(parents=True, exist_ok=True)
    ckpt = out / "checkpoint.nvx"
    chash = cfg.model_hash(model)
    state = None
    if resume and ckpt.exists():
        state, _, _ = models.load_checkpoint(ckpt, chash)
        log.info("resuming %s from epoch %d", model, state.epoch)

    def save(st):
        models.save_checkpoint(ckpt, st, chash)
        _write_logs(st, out)

    trainer = models.train_lstm_regression if model == "lstm" else models.train_gan
    state = trainer(items, tcfg, state=state, on_epoch_end=save, stop_after=stop_after)
    save(state)
    return state


# ------------------------------------------------------------------ enhance

def reconstruct(enhanced: dsp.MfccSequence, n_samples: int, iterations: int) -> dsp.Waveform:
    """MFCC -> magnitude -> Griffin-Lim, zero-padded/trimmed to ``n_samples``."""
    wav = dsp.griffin_lim(dsp.mfcc_invert(enhanced), iterations)
    x = np.zeros(n_samples)
    m = min(n_samples, len(wav))
    x[:m] = wav.samples[:m]
    return dsp.Waveform(x, dsp.SPEECH_RATE_HZ)


def run_enhance(cfg: ExperimentConfig, model: str, split: str = "test") -> list:
    """Enhance every utterance of ``split``; writes WAVs to <work>/<model>/enhanced-<split>/.

    For the test split the input MFCC comes from the acoustically mixed
    audio. For the train split (debugging) it is the clean MFCC corrupted
    with the training noise level.
    """
    state, _, _ = models.load_checkpoint(cfg.model_path(model) / "checkpoint.nvx",
                                         cfg.model_hash(model))
    manifest = CorpusManifest.read(cfg.corpus_path() / "manifest.json")
    out = cfg.model_path(model) / f"enhanced-{split}"
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for i, u in enumerate(_utterances(cfg, manifest, split)):
        if split == "test":
            mfcc_in = formats.read_features(_feat_file(cfg, u.id, "mfcc13", "noisy"))[2]
        else:
            clean = formats.read_features(_feat_file(cfg, u.id, "mfcc13", "clean"))[2]
            mfcc_in = corrupt_mfcc(dsp.MfccSequence(clean), state.config.noise_sigma,
                                   derive_seed(cfg.master_seed, STREAM_DEBUG_NOISE, i)).coefficients
        eeg = _load_eeg_input(cfg, u.id)
        enhanced = models.enhance(state.model, state.norm, mfcc_in, eeg)
        n_samples = len(manifest.load_clean(u))
        wav = reconstruct(enhanced, n_samples, cfg.griffin_lim_iterations)
        path = out / f"{u.id}_enhanced.wav"
        dsp.write_wav(path, wav)
        written.append(path)
    return written


# ------------------------------------------------------------------ evaluate

def _safe(fn, *args):
    try:
        return fn(*args)
    except metrics.MetricError as exc:
        log.warning("metric failed: %s", exc)
        return float("nan")


def run_evaluate(cfg: ExperimentConfig, model: str, split: str = "test") -> metrics.MetricReport:
    manifest = CorpusManifest.read(cfg.corpus_path() / "manifest.json")
    enh_dir = cfg.model_path(model) / f"enhanced-{split}"
    report = metrics.MetricReport(
        notes={"model": model, "split": split,
               "references": "clean synthetic reference for every utterance",
               "snr_definition": "mean / population std of the waveform"},
        pesq_available=bool(cfg.pesq_command))
    missing = []
    for u in _utterances(cfg, manifest, split):
        enh_path = enh_dir / f"{u.id}_enhanced.wav"
        if not enh_path.exists() or (split == "test" and not (manifest.root / u.noisy_wav).exists()):
            missing.append(u.id)
            continue
        clean = manifest.load_clean(u)
        noisy = manifest.load_noisy(u) if split == "test" else clean
        enhanced = dsp.read_wav(enh_path)
        rec = metrics.UtteranceMetrics(
            u.id, _safe(metrics.snr_mean_std, noisy), _safe(metrics.snr_mean_std, enhanced),
            _safe(metrics.stoi, clean, noisy), _safe(metrics.stoi, clean, enhanced),
            _safe(metrics.spectral_convergence, clean, enhanced))
        if cfg.pesq_command:
            clean_path = manifest.root / u.clean_wav
            noisy_path = manifest.root / (u.noisy_wav or u.clean_wav)
            rec.pesq_noisy = metrics.pesq_external(clean_path, noisy_path, cfg.pesq_command)
            rec.pesq_enhanced = metrics.pesq_external(clean_path, enh_path, cfg.pesq_command)
        report.records.append(rec)
    if missing:
        log.warning("skipped %d utterances with missing files: %s", len(missing), ", ".join(missing))
        report.notes["missing"] = missing
    out = cfg.model_path(model)
    suffix = "" if split == "test" else f"-{split}"
    formats.write_bytes(out / f"report{suffix}.csv", report.to_csv().encode())
    formats.write_bytes(out / f"report{suffix}.json", report.to_json().encode())
    return report


def comparison_table(reports: dict) -> str:
    """Corpus means per model, one row each."""
    cols = ["model", "snr_noisy", "snr_enhanced", "stoi_noisy", "stoi_enhanced",
            "spectral_convergence", "pesq_noisy", "pesq_enhanced"]
    lines = [",".join(cols)]
    for name, rep in reports.items():
        means = rep.means()
        vals = [name] + [("unavailable" if means.get(c) is None else repr(means[c])) for c in cols[1:]]
        lines.append(",".join(vals))
    return "\n".join(lines) + "\n"


def write_comparison(cfg: ExperimentConfig, reports: dict) -> Path:
    path = cfg.work_path() / "comparison.csv"
    formats.write_bytes(path, comparison_table(reports).encode())
    return path


def run_models(cfg: ExperimentConfig, model_names=("lstm", "gan")) -> dict:
    """train -> enhance -> evaluate for each model on extracted features."""
    reports = {}
    for name in model_names:
        run_train(cfg, name)
        run_enhance(cfg, name)
        reports[name] = run_evaluate(cfg, name)
    write_comparison(cfg, reports)
    return reports


def run_all(cfg: ExperimentConfig, model_names=("lstm", "gan")) -> dict:
    """synth -> extract -> train -> enhance -> evaluate for each model."""
    run_synth(cfg)
    run_extract(cfg)
    return run_models(cfg, model_names)
