import numpy as np
import pytest

from trnsense.fusion import (
    FusedDecision,
    cdf,
    cross_ap_match,
    detection_rate,
    fuse_decisions,
    fuse_positions,
    fused_tracks,
    localization_errors,
    median,
)


def brute_force_decision(per_ap):
    best = None
    for ap, p in sorted(per_ap, key=lambda e: e[0]):
        for label, value in enumerate(p):
            if best is None or value > best[1]:
                best = (label, value, ap)
    return FusedDecision(*best)


def test_fuse_decisions_matches_brute_force(rng):
    for _ in range(1000):
        n_aps, n_classes = int(rng.integers(1, 5)), int(rng.integers(2, 6))
        aps = rng.permutation(10)[:n_aps]
        # coarse values, to produce ties
        per_ap = [(int(ap), rng.integers(0, 5, n_classes) / 4) for ap in aps]
        assert fuse_decisions(per_ap) == brute_force_decision(per_ap)


def test_fuse_decisions_example():
    decision = fuse_decisions([(1, [0.1, 0.7, 0.2]), (0, [0.5, 0.2, 0.3])])
    assert decision == FusedDecision(1, 0.7, 1)
    decision = fuse_decisions([(1, [0.6, 0.4]), (0, [0.4, 0.6])])
    assert decision.ap == 0 and decision.label == 1


def test_fuse_decisions_invalid():
    with pytest.raises(ValueError):
        fuse_decisions([])
    with pytest.raises(ValueError):
        fuse_decisions([(0, [0.5, 0.5]), (1, [0.2, 0.3, 0.5])])
    with pytest.raises(ValueError):
        FusedDecision(0, 1.5, 0)


def test_fuse_positions():
    assert np.allclose(fuse_positions([[0, 0], [2, 4]]), [1, 2])
    assert np.allclose(fuse_positions([1, 1]), [1, 1])
    with pytest.raises(ValueError):
        fuse_positions([])


def test_cross_ap_match():
    a = {0: [1.0, 1.0], 1: [3.0, 3.0], 2: [5.0, 0.5]}
    b = {7: [3.2, 3.1], 8: [1.1, 0.8], 9: [0.0, 6.0]}
    pairs, unpaired_a, unpaired_b = cross_ap_match(a, b, radius=0.75)
    assert sorted(pairs) == [(0, 8), (1, 7)]
    assert unpaired_a == [2]
    assert unpaired_b == [9]


def test_cross_ap_match_minimal_total():
    """ The greedy closest pair would leave the other track unmatched """
    a = {0: [0.0, 0.0], 1: [0.6, 0.0]}
    b = {0: [0.28, 0.0], 1: [-0.45, 0.0]}
    pairs, unpaired_a, unpaired_b = cross_ap_match(a, b, radius=0.5)
    assert sorted(pairs) == [(0, 1), (1, 0)]
    assert unpaired_a == unpaired_b == []


def test_cross_ap_match_empty():
    assert cross_ap_match({}, {1: [0, 0]}) == ([], [], [1])
    assert cross_ap_match({0: [0, 0]}, {}) == ([], [0], [])


def test_fused_tracks():
    per_ap = [
        (1, {4: [1.2, 1.0], 5: [4.0, 4.0]}),
        (0, {0: [1.0, 1.0], 1: [3.0, 6.0]}),
    ]
    fused = dict(fused_tracks(per_ap))
    assert set(fused) == {((0, 0), (1, 4)), ((0, 1),), ((1, 5),)}
    assert np.allclose(fused[((0, 0), (1, 4))], [1.1, 1.0])
    assert np.allclose(fused[((1, 5),)], [4.0, 4.0])


def test_fused_tracks_three_aps():
    per_ap = [(0, {0: [1.0, 1.0]}), (1, {0: [1.3, 1.0]}), (2, {3: [1.6, 1.0]})]
    fused = fused_tracks(per_ap)
    assert len(fused) == 1
    ids, position = fused[0]
    assert ids == ((0, 0), (1, 0), (2, 3))
    assert np.allclose(position, [1.3, 1.0])


def test_detection_rate():
    truth = [[1.0, 1.0], [3.0, 3.0]]
    assert detection_rate([[1.2, 1.1]], truth, radius=0.5) == 0.5
    assert detection_rate([[1.2, 1.1], [3.0, 2.6]], truth, radius=0.5) == 1.0
    assert detection_rate([], truth) == 0.0
    assert detection_rate([[0, 0]], np.zeros((0, 2))) == 1.0


def test_localization_errors():
    errors = localization_errors([[0.0, 0.0], [3.0, 4.0]], [[0.0, 1.0], [3.0, 3.0]])
    assert np.allclose(errors, [1.0, 1.0])
    assert np.all(np.isinf(localization_errors([], [[1.0, 1.0]])))


def test_median():
    assert median([1.0, np.inf, 3.0, 2.0]) == 2.0
    assert np.isnan(median([np.inf]))


def test_cdf():
    x, y = cdf([0.3, 0.1, 0.2, 0.4])
    assert np.allclose(x, [0.1, 0.2, 0.3, 0.4])
    assert np.allclose(y, [0.25, 0.5, 0.75, 1.0])
    x, y = cdf([])
    assert x.size == y.size == 0
