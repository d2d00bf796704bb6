"""Acceptance checks, one test per criterion. Each test appends a PASS/FAIL
line that is printed in the terminal summary.

The desk-scale checks build a 50/20 utterance corpus and train both models
with the budgets in ``pipeline.DESK_EPOCHS``; expect roughly half an hour.
"""

import math
import time

import numpy as np
import pytest
from conftest import vowel
from test_dimred import _match_up_to_sign, brute_force_kpca, brute_force_transform

from neurovox import dsp, models, pipeline
from neurovox.dimred import kpca_fit, kpca_transform
from neurovox.dsp import SPEECH_RATE_HZ, Waveform
from neurovox.metrics import stoi
from neurovox.models import (Discriminator, Generator, LstmRegression, TrainConfig,
                             UtteranceFeatures, gan_losses)
from neurovox.neural import Dense, Lstm, gradient_check, mse_loss
from neurovox.synth import corrupt_mfcc

DESK_SEED = 7


def _record(log, name, passed, detail):
    log.append((name, bool(passed), detail))
    assert passed, f"{name}: {detail}"


@pytest.fixture(scope="module")
def desk(tmp_path_factory):
    root = tmp_path_factory.mktemp("desk")
    cfg = pipeline.desk_config(root / "corpus", root / "work", DESK_SEED)
    t = time.perf_counter()
    pipeline.run_synth(cfg)
    pipeline.run_extract(cfg)
    return cfg, time.perf_counter() - t


# ------------------------------------------------------------------ 1

def _layer_checks(rng):
    in_dim, hidden, T = (int(v) for v in rng.integers(1, 5, 3))
    lstm = Lstm(in_dim, hidden, rng)
    dense = Dense(hidden, int(rng.integers(1, 4)), str(rng.choice(["identity", "sigmoid"])), rng)
    for layer in (lstm, dense):
        for p in layer.params.values():
            p += 0.3 * rng.standard_normal(p.shape)
    x = rng.standard_normal((2, T, in_dim))
    w_h = rng.standard_normal((2, T, hidden))
    h_in = rng.standard_normal((2, T, hidden))
    _, c = lstm.forward(x)
    g_lstm, _ = lstm.backward(c, w_h)
    y, c = dense.forward(h_in)
    w_d = rng.standard_normal(y.shape)
    g_dense, _ = dense.backward(c, w_d)
    return [
        gradient_check(lambda: float(np.sum(w_h * lstm.forward(x)[0])), lstm.params, g_lstm),
        gradient_check(lambda: float(np.sum(w_d * dense.forward(h_in)[0])), dense.params, g_dense),
    ]


def _model_checks(rng):
    k, hidden, T = int(rng.integers(1, 4)), int(rng.integers(2, 5)), int(rng.integers(2, 5))
    seed = int(rng.integers(1000))
    reg, gen = LstmRegression(k, hidden, seed), Generator(k, hidden, seed + 1)
    disc = Discriminator(k, hidden, seed + 2)
    for net in (reg, gen, disc):
        for p in net.params.values():
            p += 0.3 * rng.standard_normal(p.shape)
    m, e = rng.standard_normal((2, T, 13)), rng.standard_normal((2, T, k))
    target = rng.standard_normal((2, T, 13))
    lengths = np.array([T, max(1, T - 1)])
    mask = (np.arange(T)[None, :] < lengths[:, None]).astype(float)[..., None]

    y, c = reg.forward(m, e)
    g_reg = reg.backward(c, mse_loss(y, target)[1])[0]
    p, c = disc.forward(m, e, lengths)
    g_disc = disc.backward(c, 1.0 / p)[0]
    g_gen = models.generator_loss_and_grads(gen, disc, m, e, lengths, mask)[1]
    return [
        gradient_check(lambda: mse_loss(reg.forward(m, e)[0], target)[0], reg.params, g_reg),
        gradient_check(lambda: float(np.sum(np.log(disc.forward(m, e, lengths)[0]))),
                       disc.params, g_disc),
        gradient_check(lambda: models.generator_loss_and_grads(gen, disc, m, e, lengths, mask)[0],
                       gen.params, g_gen),
    ]


def test_gradient_check_suite(acceptance_log):
    rng = np.random.default_rng(2024)
    t = time.perf_counter()
    reports = []
    for _ in range(5):
        reports += _layer_checks(rng)
        reports += _model_checks(rng)
    elapsed = time.perf_counter() - t
    worst = max(r["max_rel_err"] for r in reports)
    _record(acceptance_log, "1 gradient checks", worst < 1e-4 and elapsed <= 30,
            f"{len(reports)} checks, max rel err {worst:.2e} (< 1e-4), {elapsed:.1f} s (<= 30 s)")


# ------------------------------------------------------------------ 2

def test_gan_losses_at_one_half(acceptance_log):
    lg, ld = gan_losses(0.5, 0.5, 0.5)
    eg, ed = abs(lg - math.log(2)), abs(ld - 3 * math.log(2))
    _record(acceptance_log, "2 GAN losses at 0.5", eg <= 1e-12 and ed <= 1e-12,
            f"|L_G - ln2| = {eg:.1e}, |L_D - 3 ln2| = {ed:.1e} (<= 1e-12)")


# ------------------------------------------------------------------ 3

def test_kpca_oracle(acceptance_log):
    rng = np.random.default_rng(33)
    worst = 0.0
    for n in (5, 8, 12, 16, 20):
        d = int(rng.integers(2, 7))
        X, Y = rng.standard_normal((n, d)), rng.standard_normal((4, d))
        k = min(3, n - 2)
        model = kpca_fit(X, k)
        oracle, (K, vals, vecs, gamma) = brute_force_kpca(X, model.output_dim)
        for got, ref in ((kpca_transform(model, X), oracle),
                         (kpca_transform(model, Y), brute_force_transform(X, Y, K, vals, vecs, gamma))):
            signs = np.sign(np.sum(got * ref, axis=0))
            worst = max(worst, float(np.max(np.abs(got - signs * ref))))
    X = rng.standard_normal((15, 5)) @ np.diag([3, 2, 1, 0.5, 0.2])
    Xc = X - X.mean(axis=0)
    vt = np.linalg.svd(Xc, full_matrices=False)[2]
    pca = Xc @ vt[:3].T * np.sqrt(1.0 / 5)
    try:
        _match_up_to_sign(kpca_transform(kpca_fit(X, 3, degree=1), X), pca, 1e-8)
        linear_ok = True
    except AssertionError:
        linear_ok = False
    _record(acceptance_log, "3 KPCA oracle", worst < 1e-8 and linear_ok,
            f"max deviation from dense eigendecomposition {worst:.1e} (< 1e-8), "
            f"degree-1 equals PCA: {linear_ok}")


# ------------------------------------------------------------------ 4

def test_stoi_sanity(acceptance_log, utterances):
    snrs = (20, 10, 0, -10)
    self_scores, decreasing = [], 0
    for i, x in enumerate(utterances):
        self_scores.append(stoi(x, x))
        noise = np.random.default_rng(500 + i).standard_normal(len(x))
        noise *= np.sqrt(np.mean(x.samples ** 2) / np.mean(noise ** 2))
        scores = [stoi(x, Waveform(x.samples + noise * 10 ** (-s / 20), SPEECH_RATE_HZ))
                  for s in snrs]
        decreasing += bool(np.all(np.diff(scores) < 0))
    ok = min(self_scores) >= 0.999 and decreasing == len(utterances)
    _record(acceptance_log, "4 STOI sanity", ok,
            f"min stoi(x,x) {min(self_scores):.4f} (>= 0.999), strictly decreasing over "
            f"+20/+10/0/-10 dB for {decreasing}/{len(utterances)} utterances")


# ------------------------------------------------------------------ 5

def test_griffin_lim_convergence(acceptance_log):
    t = np.arange(SPEECH_RATE_HZ) / SPEECH_RATE_HZ
    signals = {"440 Hz": Waveform(0.5 * np.sin(2 * np.pi * 440 * t), SPEECH_RATE_HZ),
               "chord": Waveform(0.2 * sum(np.sin(2 * np.pi * f * t) for f in (220, 277.18, 329.63)),
                                 SPEECH_RATE_HZ)}
    for f0 in (100, 150, 220):
        signals[f"vowel {f0} Hz"] = vowel(f0)
    ratios, rises = [], []
    for x in signals.values():
        _, err = dsp.griffin_lim(dsp.stft(x), 60, return_errors=True)
        ratios.append(err[59] / err[0])
        rises.append(float(np.max(np.diff(err))))
    ok = max(ratios) <= 0.2 and max(rises) <= 1e-7
    _record(acceptance_log, "5 Griffin-Lim", ok,
            f"worst E60/E1 {max(ratios):.3f} (<= 0.2), largest step increase {max(rises):.1e} "
            f"(<= 1e-7) over {len(signals)} harmonic signals")


# ------------------------------------------------------------------ 6

@pytest.mark.slow
def test_ridge_learnability(acceptance_log, desk):
    cfg, _ = desk
    out = pipeline.ridge_baseline(cfg)
    _record(acceptance_log, "6 ridge learnability", out["mse_with_eeg"] < out["mse_without_eeg"],
            f"test MSE with EEG {out['mse_with_eeg']:.2f} vs without {out['mse_without_eeg']:.2f} "
            f"(identity {out['identity_mse']:.2f})")


# ------------------------------------------------------------------ 7

@pytest.mark.slow
def test_directional_desk(acceptance_log, desk):
    cfg, prep_s = desk
    t = time.perf_counter()
    reports = pipeline.run_models(cfg)
    elapsed = prep_s + time.perf_counter() - t
    means = {m: r.means() for m, r in reports.items()}
    better = {m: v["stoi_enhanced"] > v["stoi_noisy"] for m, v in means.items()}
    ranking = "GAN >= LSTM" if means["gan"]["stoi_enhanced"] >= means["lstm"]["stoi_enhanced"] \
        else "LSTM > GAN"
    detail = "; ".join(f"{m}: stoi noisy {v['stoi_noisy']:.3f} -> enhanced {v['stoi_enhanced']:.3f}"
                       for m, v in means.items())
    _record(acceptance_log, "7 directional (desk)", all(better.values()) and elapsed <= 1800,
            f"{detail}; {ranking} (informational); {elapsed / 60:.1f} min (<= 30)")


# ------------------------------------------------------------------ 8

@pytest.mark.slow
def test_overfit_two_utterances(acceptance_log, desk):
    cfg, _ = desk
    # a fixed dataset: the training corruption is drawn once per utterance
    items = [UtteranceFeatures(it.id, it.clean, it.eeg,
                               corrupt_mfcc(dsp.MfccSequence(it.clean), cfg.lstm.noise_sigma,
                                            i).coefficients)
             for i, it in enumerate(pipeline.load_training_items(cfg)[:2])]
    st = models.train_lstm_regression(items, TrainConfig.default_lstm(epochs=500))
    losses = models.epoch_means(st.logs["lstm"])
    ratio = losses[-1] / losses[0]
    out = models.enhance(st.model, st.norm, items[0].noisy, items[0].eeg).coefficients
    rel_rmse = np.sqrt(np.mean((out - items[0].clean) ** 2) / np.mean(items[0].clean ** 2))
    _record(acceptance_log, "8 overfit capacity", ratio <= 0.01,
            f"epoch-500 MSE / epoch-1 MSE = {ratio:.2e} (<= 1e-2); "
            f"train-utterance RMSE {100 * rel_rmse:.1f}% of clean RMS")


# ------------------------------------------------------------------ 9

def _full_run(root):
    cfg = pipeline.ExperimentConfig(corpus_dir=str(root / "corpus"), work_dir=str(root / "work"),
                                    preset="tiny", master_seed=DESK_SEED, kpca_dim=8,
                                    kpca_train_frames=300, griffin_lim_iterations=20)
    small = dict(epochs=4, batch_size=2, seq_len=50, hidden=16)
    cfg.lstm = TrainConfig.default_lstm(**small)
    cfg.gan = TrainConfig.default_gan(**small)
    pipeline.run_all(cfg)
    return {p.relative_to(root): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_full_pipeline_determinism(acceptance_log, tmp_path):
    a, b = _full_run(tmp_path / "a"), _full_run(tmp_path / "b")
    differing = sorted(str(k) for k in a if a[k] != b.get(k))
    keys_match = set(a) == set(b)
    n_ckpt = sum(1 for k in a if k.suffix == ".nvx")
    n_rep = sum(1 for k in a if k.name.startswith("report") or k.name == "comparison.csv")
    _record(acceptance_log, "9 determinism", keys_match and not differing,
            f"{len(a)} files compared ({n_ckpt} checkpoints, {n_rep} reports), "
            f"{len(differing)} differ")
