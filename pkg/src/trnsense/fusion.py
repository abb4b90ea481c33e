"""
Combination of the results of several APs observing the same room
"""

import numpy as np
from scipy.optimize import linear_sum_assignment

from .structures import FusionConfig


class FusedDecision:
    """ Class decided by the AP whose classifier is the most confident """

    def __init__(self, label, confidence, ap):
        if not 0 <= confidence <= 1:
            raise ValueError(f"Confidence must be in [0, 1], got {confidence}")
        self.label = int(label)
        self.confidence = float(confidence)
        #:int: id of the AP that made the decision
        self.ap = ap

    def __eq__(self, other):
        return (
            isinstance(other, FusedDecision)
            and (self.label, self.confidence, self.ap) == (other.label, other.confidence, other.ap)
        )

    def __repr__(self):
        return f"FusedDecision(label={self.label}, confidence={self.confidence:.3f}, ap={self.ap})"


def fuse_decisions(per_ap):
    """
    Decision fusion over APs

    The label is the argmax over classes of the maximum over APs of the
    class probabilities, i.e. the largest entry of all probability vectors.
    Ties go to the smaller AP id, then to the smaller label.

    Parameters
    ----------
    per_ap : list of (int, array)
        AP id and class probabilities of that AP

    Returns
    -------
    decision : FusedDecision
    """
    if len(per_ap) == 0:
        raise ValueError("Need the decision of at least one AP")
    per_ap = sorted(((ap, np.asarray(p, dtype=float)) for ap, p in per_ap), key=lambda e: e[0])
    sizes = {p.shape for _, p in per_ap}
    if len(sizes) != 1 or len(next(iter(sizes))) != 1:
        raise ValueError(f"All probability vectors must be 1-D of the same length, got {sorted(sizes)}")

    stacked = np.stack([p for _, p in per_ap])
    # row major argmax is the first maximum in (ap, label) order
    index = int(np.argmax(stacked))
    row, label = np.unravel_index(index, stacked.shape)
    confidence = float(np.clip(stacked[row, label], 0, 1))
    return FusedDecision(label, confidence, per_ap[row][0])


def fuse_positions(per_ap):
    """ Mean of the room frame positions of one person estimated by several APs """
    positions = np.atleast_2d(np.asarray(per_ap, dtype=float))
    if positions.size == 0:
        raise ValueError("Need at least one position")
    return positions.mean(axis=0)


def _pair(cost, radius):
    """ Minimal total distance pairing of all pairs closer than radius """
    if cost.size == 0:
        return []
    valid = cost <= radius
    if not np.any(valid):
        return []
    big = 2 * radius * (min(cost.shape) + 1) + 1
    rows, cols = linear_sum_assignment(np.where(valid, cost, big))
    return [(int(i), int(j)) for i, j in zip(rows, cols) if valid[i, j]]


def cross_ap_match(tracks_a, tracks_b, radius=None):
    """
    Pair the tracks of two APs that belong to the same person

    Parameters
    ----------
    tracks_a, tracks_b : dict
        room frame position of every track id of each AP
    radius : float, optional
        maximum distance of a pair in m (default: FusionConfig().match_radius)

    Returns
    -------
    pairs : list of (id_a, id_b)
        paired track ids, the total distance of all pairs is minimal
    unpaired_a, unpaired_b : list
        ids without a partner
    """
    if radius is None:
        radius = FusionConfig().match_radius
    ids_a, ids_b = sorted(tracks_a), sorted(tracks_b)
    if ids_a and ids_b:
        pa = np.array([tracks_a[i] for i in ids_a], dtype=float).reshape(-1, 2)
        pb = np.array([tracks_b[i] for i in ids_b], dtype=float).reshape(-1, 2)
        cost = np.linalg.norm(pa[:, None, :] - pb[None, :, :], axis=2)
    else:
        cost = np.zeros((len(ids_a), len(ids_b)))
    pairs = [(ids_a[i], ids_b[j]) for i, j in _pair(cost, radius)]
    paired_a = {a for a, _ in pairs}
    paired_b = {b for _, b in pairs}
    return (
        pairs,
        [i for i in ids_a if i not in paired_a],
        [i for i in ids_b if i not in paired_b],
    )


def fused_tracks(per_ap, cfg=None):
    """
    Person positions seen by all APs

    Tracks of the first AP are matched against the next one; matched pairs
    are averaged, unmatched tracks pass through. Further APs are matched
    against the running result.

    Parameters
    ----------
    per_ap : list of (int, dict)
        AP id and the room frame position of each of its track ids
    cfg : FusionConfig, optional

    Returns
    -------
    fused : list of (tuple, array)
        the (ap id, track id) pairs that make up each person and its position
    """
    cfg = cfg if cfg is not None else FusionConfig()
    groups = []
    for ap, tracks in sorted(per_ap, key=lambda e: e[0]):
        current = {i: fuse_positions(positions) for i, (_, positions) in enumerate(groups)}
        pairs, _, unpaired = cross_ap_match(current, tracks, cfg.match_radius)
        for i, track_id in pairs:
            groups[i][0].append((ap, track_id))
            groups[i][1].append(np.asarray(tracks[track_id], dtype=float))
        for track_id in unpaired:
            groups.append(([(ap, track_id)], [np.asarray(tracks[track_id], dtype=float)]))
    return [(tuple(ids), fuse_positions(positions)) for ids, positions in groups]


def detection_rate(positions, truth, radius=None):
    """
    Fraction of the persons detected at one tracking step

    A person is detected if some track lies within radius of its torso.

    Parameters
    ----------
    positions : array of shape (n, 2)
        room frame positions of the confirmed tracks
    truth : array of shape (m, 2)
        true torso positions
    radius : float, optional
        in m (default: FusionConfig().detection_radius)

    Returns
    -------
    rate : float
        1.0 if there is nobody to detect
    """
    if radius is None:
        radius = FusionConfig().detection_radius
    truth = np.asarray(truth, dtype=float).reshape(-1, 2)
    positions = np.asarray(positions, dtype=float).reshape(-1, 2)
    if len(truth) == 0:
        return 1.0
    if len(positions) == 0:
        return 0.0
    distance = np.linalg.norm(truth[:, None, :] - positions[None, :, :], axis=2)
    return float(np.mean(np.any(distance <= radius, axis=1)))


def localization_errors(positions, truth):
    """
    Distance between every person and the closest track

    Parameters
    ----------
    positions : array of shape (n, 2)
        track positions of one step
    truth : array of shape (m, 2)
        true positions

    Returns
    -------
    errors : array of size (m,)
        np.inf for persons when there are no tracks
    """
    truth = np.asarray(truth, dtype=float).reshape(-1, 2)
    positions = np.asarray(positions, dtype=float).reshape(-1, 2)
    if len(positions) == 0:
        return np.full(len(truth), np.inf)
    distance = np.linalg.norm(truth[:, None, :] - positions[None, :, :], axis=2)
    return distance.min(axis=1)


def median(errors):
    """ Median of the finite errors, nan if there are none """
    errors = np.asarray(errors, dtype=float)
    errors = errors[np.isfinite(errors)]
    return float(np.median(errors)) if errors.size else float("nan")


def cdf(errors):
    """
    Empirical cumulative distribution of the errors

    Returns
    -------
    x : array
        sorted errors
    y : array
        fraction of errors <= x
    """
    x = np.sort(np.asarray(errors, dtype=float).ravel())
    y = np.arange(1, x.size + 1) / max(x.size, 1)
    return x, y
