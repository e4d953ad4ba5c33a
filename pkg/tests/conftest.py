import numpy as np
import pytest

from emgdeck import dsp
from emgdeck.synth import SynthConfig, generate_synthetic


@pytest.fixture(scope="session")
def default_corpus():
    """The full default synthetic corpus (220 utterances, seed 2024)."""
    return generate_synthetic(SynthConfig(seed=2024))


@pytest.fixture(scope="session")
def default_dataset(default_corpus):
    return default_corpus[0]


@pytest.fixture(scope="session")
def default_acoustics(default_corpus):
    return default_corpus[1]


@pytest.fixture(scope="session")
def default_stats(default_dataset):
    return dsp.stats_matrix(default_dataset)


@pytest.fixture(scope="session")
def small_corpus():
    """A cheap corpus for protocol-level tests: 3 utterances per cell."""
    return generate_synthetic(SynthConfig(seed=11, utterances_per_cell=3))


@pytest.fixture(scope="session")
def quiet_corpus():
    """Sensor-noise-free corpus for the correlation oracle."""
    return generate_synthetic(SynthConfig(seed=2024, noise_std=0.0))


def make_utterance(samples, *, fs=1000, volts_per_lsb=1.0, word=None, speaker=1, uid="u0"):
    from emgdeck.dataset import Utterance
    from emgdeck.words import WORDS

    samples = np.atleast_2d(np.asarray(samples, dtype=np.int16))
    return Utterance(
        id=uid, speaker=speaker, word=word or WORDS[0],
        sample_rate_hz=fs, samples=samples, volts_per_lsb=volts_per_lsb,
    )
