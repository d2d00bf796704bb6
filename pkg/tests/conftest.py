import numpy as np
import pytest
from hypothesis import settings

from neurovox.dsp import SPEECH_RATE_HZ, Waveform
from neurovox.synth import SynthParams, synth_utterance

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")


def vowel(f0=100.0, seconds=1.0, formants=(730, 1090, 2440), fs=SPEECH_RATE_HZ):
    """Steady harmonic tone shaped by three resonances."""
    t = np.arange(int(seconds * fs)) / fs
    x = np.zeros_like(t)
    for k in range(1, int(7800 // f0) + 1):
        g = sum(1.0 / (1.0 + ((k * f0 - f) / 100.0) ** 2) for f in formants) + 0.01
        x += g * np.sin(2 * np.pi * k * f0 * t)
    return Waveform(0.1 * x / np.abs(x).max(), fs)


@pytest.fixture
def speechlike():
    return synth_utterance(SynthParams(), seed=11).clean


@pytest.fixture(scope="session")
def utterances():
    """Ten seeded synthetic utterances (clean waveforms)."""
    return [synth_utterance(SynthParams(), seed=100 + i).clean for i in range(10)]


_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture(scope="session")
def acceptance_log(request):
    """Collects one (criterion, passed, detail) line per acceptance check."""
    return request.config.stash.setdefault(_ACCEPTANCE, [])


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for name, passed, detail in lines:
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {name}: {detail}")
