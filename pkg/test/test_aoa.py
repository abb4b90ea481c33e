import numpy as np
import pytest

from trnsense.aoa import aoa_scores, estimate_aoa
from trnsense.detect import Candidate
from trnsense.scenesim import Scatterer, Scene, Subject, noiseless_channel
from trnsense.structures import ApRegistration, RadioConfig


def test_scores_shape(codebook):
    row = np.ones(12)
    scores = aoa_scores(row, codebook)
    assert scores.shape == codebook.grid.shape
    assert np.allclose(scores, codebook.gains.sum(axis=0) / np.sqrt(12))


def test_scores_invalid(codebook):
    with pytest.raises(ValueError):
        aoa_scores(np.zeros(12), codebook)
    with pytest.raises(ValueError):
        aoa_scores(np.ones(11), codebook)
    with pytest.raises(ValueError):
        estimate_aoa(Candidate(3, 1.0, 1.0), codebook)


def test_scale_invariant(codebook):
    row = codebook.gain(12.0) ** 2
    assert estimate_aoa(row, codebook) == estimate_aoa(7.5 * row, codebook)


def test_noiseless_steering_angles(codebook):
    """ A path at a steering angle is found within a few grid steps, the edge beams lean inwards """
    for angle in codebook.steering_angles:
        row = codebook.gain(angle) ** 2
        assert abs(estimate_aoa(row, codebook) - angle) <= 1.5


def test_candidate_input(codebook):
    row = codebook.gain(-20.0) ** 2
    candidate = Candidate(10, 1.0, 1.0, row)
    assert estimate_aoa(candidate, codebook) == estimate_aoa(row, codebook)


def test_single_scatterer_scenes(codebook):
    """ Mean error of at most 3 degrees at 20 dB SNR """
    radio = RadioConfig(l=128)
    ap = ApRegistration(id=0, position=[0.0, 3.85], boresight=0.0)
    errors = []
    for seed in range(500):
        rng = np.random.default_rng(seed)
        theta = rng.uniform(-40, 40)
        d = rng.uniform(1.5, 4.0)
        position = (d * np.cos(np.deg2rad(theta)), 3.85 + d * np.sin(np.deg2rad(theta)))
        subject = Subject(0, [(*position, 0.0)], scatterers=[Scatterer((0.0, 0.0), 1.0)])
        scene = Scene([6.1, 7.7], [subject], aps=[ap])
        h = noiseless_channel(scene, 0, codebook, radio, 0.0)
        tap = int(np.argmax(np.linalg.norm(h, axis=1)))
        peak = np.abs(h[tap]).max()
        sigma = peak / 10 / np.sqrt(2)
        noisy = h[tap] + rng.normal(0, sigma, 12) + 1j * rng.normal(0, sigma, 12)
        errors.append(abs(estimate_aoa(np.abs(noisy) ** 2, codebook) - theta))
    assert np.mean(errors) <= 3.0
