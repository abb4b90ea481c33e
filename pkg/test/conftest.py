import sys
from os.path import dirname, join

import numpy as np
import pytest

sys.path.insert(0, join(dirname(dirname(__file__)), "src"))

from trnsense.config import PipelineConfig  # noqa: E402
from trnsense.scenesim import Scene, Subject, synth_codebook  # noqa: E402
from trnsense.structures import ApRegistration, RadioConfig  # noqa: E402


@pytest.fixture
def cwd():
    return dirname(__file__)


@pytest.fixture
def radio():
    return RadioConfig()


@pytest.fixture
def small_radio():
    """ Few taps, to keep the simulations fast """
    return RadioConfig(l=64)


@pytest.fixture
def codebook():
    return synth_codebook(12)


@pytest.fixture
def ap():
    return ApRegistration(id=0, position=[0.0, 3.85], boresight=0.0)


@pytest.fixture
def small_config(ap):
    """ Pipeline configuration with 64 taps and short spectrograms """
    cfg = PipelineConfig(aps=[ap])
    cfg.radio.l = 64
    cfg.md.update(t_window=20, overlap=10)
    return cfg


@pytest.fixture
def walker():
    """ One person walking away from the AP and back """
    return Subject(0, [(1.5, 3.6, 0.0), (3.0, 3.6, 1.5), (1.5, 3.6, 3.0)], activity="walking")


@pytest.fixture
def walker_scene(ap, walker):
    return Scene([6.1, 7.7], [walker], aps=[ap], noise_std=1e-3, duration=0.5, seed=3)


@pytest.fixture
def rng():
    return np.random.default_rng(42)
