import time

import numpy as np
import pytest

from neurovox import synth
from neurovox.dsp import SPEECH_RATE_HZ, MfccSequence, Waveform
from neurovox.synth import (CorpusManifest, SynthParams, build_corpus, corrupt_mfcc,
                            derive_seed, mix_background, mixture_snr_db, synth_utterance)


def test_utterance_deterministic():
    a = synth_utterance(SynthParams(), seed=5)
    b = synth_utterance(SynthParams(), seed=5)
    assert a.clean.samples.tobytes() == b.clean.samples.tobytes()
    assert a.eeg.data.tobytes() == b.eeg.data.tobytes()
    assert len(a.clean) == 2 * SPEECH_RATE_HZ and a.eeg.data.shape == (31, 2000)


def test_coupled_latents_follow_energy():
    p = SynthParams()
    u = synth_utterance(p, seed=21)
    energy = np.repeat(u.frame_energy, 10)[: u.latents.shape[1]]
    corr = np.corrcoef(u.latents[0, : energy.size], energy)[0, 1]
    assert corr > 0.5
    # an uncoupled latent carries no such relation
    assert abs(np.corrcoef(u.latents[-1, : energy.size], energy)[0, 1]) < 0.5


def test_different_seeds_are_unrelated():
    from scipy import signal

    a = synth_utterance(SynthParams(), seed=1).clean.samples
    b = synth_utterance(SynthParams(), seed=2).clean.samples
    xc = signal.correlate(a, b, mode="full", method="fft")
    assert np.max(np.abs(xc)) / (np.linalg.norm(a) * np.linalg.norm(b)) < 0.2


def test_params_validation():
    with pytest.raises(ValueError):
        SynthParams(duration_s=0.5).validate()
    with pytest.raises(ValueError):
        SynthParams(pitch_range_hz=(200.0, 100.0)).validate()
    with pytest.raises(ValueError):
        SynthParams(n_coupled=20).validate()


def test_derive_seed_rule():
    assert derive_seed(1, 2, 3) == int(np.random.SeedSequence([1, 2, 3]).generate_state(1)[0])
    assert derive_seed(1, 2, 3) != derive_seed(1, 2, 4)


def test_corrupt_mfcc_noise_level():
    m = MfccSequence(np.zeros((5000, 13)))
    noisy = corrupt_mfcc(m, 10.0, seed=0).coefficients
    assert abs(noisy.std() - 10.0) < 0.2 and abs(noisy.mean()) < 0.2
    assert np.array_equal(corrupt_mfcc(m, 0.0).coefficients, m.coefficients)
    with pytest.raises(ValueError):
        corrupt_mfcc(m, -1.0)


def test_mix_background_calibration(speechlike):
    for kind in ("music_like", "white"):
        mix = mix_background(speechlike, kind, synth.REFERENCE_LEVEL_DB, seed=4)
        assert abs(mixture_snr_db(speechlike, mix) + 5.0) < 0.1
    louder = mix_background(speechlike, "white", synth.REFERENCE_LEVEL_DB + 10, seed=4)
    assert abs(mixture_snr_db(speechlike, louder) + 15.0) < 0.1


def test_mix_background_errors(speechlike):
    with pytest.raises(ValueError):
        mix_background(speechlike, level_db=-np.inf)
    with pytest.raises(ValueError):
        mix_background(Waveform(np.zeros(16000), SPEECH_RATE_HZ))
    with pytest.raises(ValueError):
        mix_background(speechlike, "traffic")


def test_tiny_corpus_layout_and_manifest(tmp_path):
    m = build_corpus(SynthParams(master_seed=3), tmp_path / "c", "tiny")
    assert len(m.split("train")) == 4 and len(m.split("test")) == 2
    assert all(u.noisy_wav for u in m.split("test"))
    assert not any(u.noisy_wav for u in m.split("train"))
    text = (tmp_path / "c" / "manifest.json").read_text()
    again = CorpusManifest.read(tmp_path / "c" / "manifest.json")
    assert again.to_json() == text
    # same subjects and sentences appear in both splits of the tiny preset
    assert {u.sentence for u in m.split("test")} <= {u.sentence for u in m.split("train")}


def test_corpus_is_reproducible(tmp_path):
    build_corpus(SynthParams(master_seed=3), tmp_path / "a", "tiny")
    build_corpus(SynthParams(master_seed=3), tmp_path / "b", "tiny")
    for f in sorted((tmp_path / "a").rglob("*")):
        if f.is_file():
            assert f.read_bytes() == (tmp_path / "b" / f.relative_to(tmp_path / "a")).read_bytes()


def test_corpus_errors(tmp_path):
    with pytest.raises(ValueError):
        build_corpus(SynthParams(), tmp_path / "x", "huge")
    with pytest.raises(ValueError):
        build_corpus(SynthParams(), tmp_path / "x", "tiny", n_train=0)
    m = build_corpus(SynthParams(), tmp_path / "y", "tiny")
    (tmp_path / "y" / m.utterances[0].clean_wav).unlink()
    with pytest.raises(FileNotFoundError):
        CorpusManifest.read(tmp_path / "y" / "manifest.json")


@pytest.mark.slow
def test_desk_corpus_under_a_minute(tmp_path):
    t = time.perf_counter()
    m = build_corpus(SynthParams(), tmp_path / "desk", "desk")
    assert time.perf_counter() - t < 60
    assert len(m.split("train")) == 50 and len(m.split("test")) == 20
    assert len({u.subject_id for u in m.utterances}) == 4
