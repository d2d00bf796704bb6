import json
import sys

import numpy as np
import pytest

from neurovox import metrics
from neurovox.dsp import SPEECH_RATE_HZ, Waveform
from neurovox.metrics import (MetricError, MetricReport, UtteranceMetrics, pesq_external,
                              snr_mean_std, spectral_convergence, stoi)


def add_noise(x, snr_db, seed=0):
    n = np.random.default_rng(seed).standard_normal(len(x))
    n *= np.sqrt(np.mean(x.samples ** 2)) / np.sqrt(np.mean(n ** 2)) * 10 ** (-snr_db / 20)
    return Waveform(x.samples + n, x.sample_rate_hz)


def test_snr_examples():
    assert snr_mean_std(Waveform(np.array([1.0, 3.0]), 16000)) == 2.0
    x = np.random.default_rng(0).standard_normal(1000)
    assert abs(snr_mean_std(Waveform(x - x.mean(), 16000))) < 1e-12
    with pytest.raises(MetricError):
        snr_mean_std(Waveform(np.ones(10), 16000))
    with pytest.raises(MetricError):
        snr_mean_std(Waveform(np.ones(1), 16000))


def test_stoi_identity(speechlike):
    assert stoi(speechlike, speechlike) >= 0.999


def test_stoi_decreases_with_noise(utterances):
    for x in utterances[:3]:
        scores = [stoi(x, add_noise(x, snr)) for snr in (20, 10, 0, -10)]
        assert np.all(np.diff(scores) < 0), scores


def test_stoi_matches_reference_implementation(utterances):
    pystoi = pytest.importorskip("pystoi")
    for i, x in enumerate(utterances[:4]):
        y = add_noise(x, 5 - 5 * i, seed=i)
        ref = pystoi.stoi(x.samples, y.samples, SPEECH_RATE_HZ, extended=False)
        assert abs(stoi(x, y) - ref) < 5e-3


def test_stoi_amplitude_invariant(speechlike):
    y = add_noise(speechlike, 0)
    a = stoi(speechlike, y)
    b = stoi(speechlike, Waveform(3.0 * y.samples, SPEECH_RATE_HZ))
    assert abs(a - b) < 1e-6


def test_stoi_unrelated_noise_is_low(speechlike):
    noise = Waveform(0.05 * np.random.default_rng(9).standard_normal(len(speechlike)),
                     SPEECH_RATE_HZ)
    assert stoi(speechlike, noise) < 0.3


def test_stoi_errors(speechlike):
    with pytest.raises(MetricError):
        stoi(speechlike, Waveform(speechlike.samples, 8000))
    short = Waveform(speechlike.samples[:1600], SPEECH_RATE_HZ)
    with pytest.raises(MetricError):
        stoi(short, short)


def test_spectral_convergence_values(speechlike):
    assert spectral_convergence(speechlike, speechlike) == 0.0
    silent = Waveform(np.zeros(len(speechlike)), SPEECH_RATE_HZ)
    assert np.isclose(spectral_convergence(speechlike, silent), 1.0)
    half = Waveform(0.5 * speechlike.samples, SPEECH_RATE_HZ)
    assert np.isclose(spectral_convergence(speechlike, half), 0.5)
    with pytest.raises(MetricError):
        spectral_convergence(silent, speechlike)


def _stub(tmp_path, body):
    script = tmp_path / "pesq_stub.py"
    script.write_text(body)
    return f"{sys.executable} {script} {{clean}} {{degraded}}"


def test_pesq_stub_value(tmp_path):
    cmd = _stub(tmp_path, "import sys\nprint('MOS-LQO for', sys.argv[2], '= 2.60')\n")
    assert pesq_external(tmp_path / "a.wav", tmp_path / "b.wav", cmd) == 2.60


def test_pesq_stub_failure(tmp_path):
    cmd = _stub(tmp_path, "import sys\nsys.exit(3)\n")
    assert pesq_external("a.wav", "b.wav", cmd) is None
    assert pesq_external("a.wav", "b.wav", None) is None
    assert pesq_external("a.wav", "b.wav", "/nonexistent/pesq {clean}") is None


def _report(pesq=False):
    rep = MetricReport(pesq_available=pesq)
    rep.records = [UtteranceMetrics("u0", 0.1, 0.2, 0.5, 0.6, 0.9),
                   UtteranceMetrics("u1", 0.3, 0.4, 0.7, 0.8, 1.1)]
    return rep


def test_report_means_and_serialisation():
    rep = _report()
    m = rep.means()
    assert abs(m["stoi_noisy"] - 0.6) < 1e-12 and abs(m["spectral_convergence"] - 1.0) < 1e-12
    doc = json.loads(rep.to_json())
    assert doc["pesq"] == "unavailable"
    assert "pesq_noisy" not in rep.to_csv().splitlines()[0]
    assert rep.to_csv().splitlines()[1].startswith("u0,0.1,0.2")


def test_report_with_pesq_columns():
    rep = _report(pesq=True)
    rep.records[0].pesq_noisy, rep.records[0].pesq_enhanced = 1.5, 2.0
    m = rep.means()
    assert m["pesq_noisy"] == 1.5
    assert rep.to_csv().splitlines()[0].endswith("pesq_noisy,pesq_enhanced")


def test_resample_identity_and_length():
    x = np.random.default_rng(1).standard_normal(16000)
    assert np.array_equal(metrics.resample(x, 16000, 16000), x)
    assert metrics.resample(x, 16000, 10000).size == 10000
