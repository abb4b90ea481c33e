"""
The sensing chain of every AP and the combination of all APs

background subtraction -> candidate detection -> angle of arrival -> tracking
-> micro-Doppler spectrograms -> classification -> multi AP fusion
"""

import logging

import numpy as np
import pandas as pd

from .aoa import estimate_aoa
from .classify import decide
from .detect import detect_candidates, estimate_background, path_strengths, subtract_background
from .fusion import (
    detection_rate,
    fuse_decisions,
    fused_tracks,
    localization_errors,
    median,
)
from .microdoppler import extract_stream, preprocess
from .scenesim import ACTIVITIES, SceneFrames, synth_background_frames, synth_codebook
from .track import Observation, Tracker

#:list: columns of the track tables
TRACK_COLUMNS = ["t", "ap", "id", "x", "y", "vx", "vy"]
#:list: columns of the ground truth tables
TRUTH_COLUMNS = ["t", "subject", "x", "y", "activity"]


def make_codebook(cfg):
    """ Synthetic codebook of the pipeline configuration """
    return synth_codebook(cfg.radio.n_p, cfg.codebook.fov, cfg.codebook.beamwidth, cfg.codebook.grid_step)


class ApPipeline:
    """ Detection and tracking for one AP, one frame per tracking step """

    def __init__(self, registration, codebook, cfg, background):
        if background.shape != (cfg.radio.l, cfg.radio.n_p):
            raise ValueError(
                f"Background of shape {background.shape} does not match the radio configuration"
            )
        self.registration = registration
        self.codebook = codebook
        self.cfg = cfg
        self.background = background
        self.tracker = Tracker(cfg.tracker)
        self.distances = cfg.radio.distances

    def observations(self, frame, step):
        """ Observations of the candidates in one frame """
        foreground = subtract_background(frame, self.background)
        h = path_strengths(foreground)
        candidates = detect_candidates(h, self.distances, self.cfg.detect, foreground)
        observations = []
        for candidate in candidates:
            if not np.any(candidate.row > 0) or candidate.distance <= 0:
                continue
            theta = estimate_aoa(candidate, self.codebook)
            observations.append(Observation(candidate.distance, theta, step))
        return observations

    def process(self, frame, step):
        """
        Run one tracking step

        Returns
        -------
        tracks : list of Track
            confirmed tracks, AP-local states
        """
        return self.tracker.step(self.observations(frame, step), step)


def n_steps(n_frames, cfg):
    """ Number of tracking steps in a stream of frames, one every sigma frames """
    if n_frames <= 0:
        return 0
    return (n_frames - 1) // cfg.stft.sigma + 1


def run_tracking(frames, registration, codebook, cfg, background):
    """
    Track the persons seen by one AP

    Tracking step n processes frame n * sigma, so that the tracking cadence
    matches the micro-Doppler columns.

    Parameters
    ----------
    frames : array like of shape (K, L, N_p)
        CIR frames of the AP
    registration : ApRegistration
        pose of the AP
    codebook : Codebook
        beam patterns of the AP
    cfg : PipelineConfig
        configuration
    background : BackgroundProfile or array of shape (K_static, L, N_p)
        background, or the empty room frames to estimate it from

    Returns
    -------
    history : list of (int, list of Track)
        confirmed tracks of every step
    """
    if not hasattr(background, "mean_amp"):
        background = estimate_background(np.asarray(background)[: cfg.detect.k_static])
    pipeline = ApPipeline(registration, codebook, cfg, background)
    history = []
    for step in range(n_steps(len(frames), cfg)):
        frame = np.asarray(frames[step * cfg.stft.sigma])
        history.append((step, pipeline.process(frame, step)))
    confirmed = {t.id for _, tracks in history for t in tracks}
    logging.info("AP %i: %i confirmed tracks in %i steps", registration.id, len(confirmed), len(history))
    return history


def tracks_table(history, registration):
    """
    Track snapshots in the room frame

    Returns
    -------
    df : pandas.DataFrame
        columns t, ap, id, x, y, vx, vy
    """
    rows = []
    origin = registration.to_room([0.0, 0.0])
    for step, tracks in history:
        for track in tracks:
            x, y = registration.to_room(track.x[:2])
            vx, vy = registration.to_room(track.x[2:]) - origin
            rows.append((step, registration.id, track.id, x, y, vx, vy))
    return pd.DataFrame(rows, columns=TRACK_COLUMNS)


def truth_table(scene, steps, cfg):
    """
    True torso positions and activities at every tracking step

    Returns
    -------
    df : pandas.DataFrame
        columns t, subject, x, y, activity
    """
    rows = []
    for step in range(steps):
        t = step * cfg.stft.sigma * cfg.radio.t_c
        for subject in scene.subjects:
            x, y = subject.position(t)
            rows.append((step, subject.id, x, y, subject.activity_at(t)))
    return pd.DataFrame(rows, columns=TRUTH_COLUMNS)


def _positions_by_step(tracks):
    return {
        step: group[["x", "y"]].to_numpy(dtype=float) for step, group in tracks.groupby("t")
    }


def _fused_positions_by_step(tracks, cfg):
    result = {}
    for step, group in tracks.groupby("t"):
        per_ap = [
            (ap, {i: np.array([x, y]) for i, x, y in rows[["id", "x", "y"]].itertuples(index=False)})
            for ap, rows in group.groupby("ap")
        ]
        fused = fused_tracks(per_ap, cfg.fusion)
        result[step] = np.array([p for _, p in fused]).reshape(-1, 2)
    return result


def evaluate_tracking(tracks, truth, cfg, burn_in=0):
    """
    Detection rate and localization error of every AP and of the fused tracks

    Parameters
    ----------
    tracks : pandas.DataFrame
        track table of all APs, see tracks_table
    truth : pandas.DataFrame
        ground truth table, see truth_table
    cfg : PipelineConfig
    burn_in : int, optional
        steps ignored at the start (default: 0)

    Returns
    -------
    report : pandas.DataFrame
        one row per AP and one for the fusion ("fused"), columns source,
        detection_rate, median_error
    """
    steps = sorted(s for s in truth["t"].unique() if s >= burn_in)
    truth_at = _positions_by_step(truth)
    sources = [(str(ap), _positions_by_step(tracks[tracks["ap"] == ap])) for ap in sorted(tracks["ap"].unique())]
    if tracks["ap"].nunique() > 1 or len(sources) == 0:
        sources.append(("fused", _fused_positions_by_step(tracks, cfg) if len(tracks) else {}))

    rows = []
    empty = np.zeros((0, 2))
    for name, positions in sources:
        rates, errors = [], []
        for step in steps:
            current = positions.get(step, empty)
            rates.append(detection_rate(current, truth_at[step], cfg.fusion.detection_radius))
            errors.extend(localization_errors(current, truth_at[step]).tolist())
        rows.append((name, float(np.mean(rates)) if rates else float("nan"), median(errors)))
    return pd.DataFrame(rows, columns=["source", "detection_rate", "median_error"])


def run_scene_tracking(scene, cfg, seed=None):
    """
    Simulate a scene and track it with every AP

    Returns
    -------
    frames : dict
        SceneFrames of every AP id
    histories : dict
        tracking history of every AP id
    """
    seed = scene.seed if seed is None else seed
    codebook = make_codebook(cfg)
    frames, histories = {}, {}
    for index, ap in enumerate(scene.aps):
        frames[ap.id] = SceneFrames(scene, index, codebook, cfg.radio, seed)
        background = synth_background_frames(scene, index, codebook, cfg.radio, cfg.detect.k_static, seed)
        histories[ap.id] = run_tracking(frames[ap.id], ap, codebook, cfg, background)
    return frames, histories


def classify_windows(spectrograms, net, cfg):
    """
    Class probabilities of the preprocessed spectrograms of one AP

    Returns
    -------
    probabilities : dict
        (track id, window start) -> probability vector
    """
    result = {}
    for track_id, specs in spectrograms.items():
        for spec in specs:
            values = preprocess(spec, cfg.md).values
            result[(track_id, spec.t0)] = net.forward(values, "eval")[0]
    return result


def run_e2e(scene, cfg, activity_net, identity_net=None, seed=None, activity_names=ACTIVITIES, identity_names=None):
    """
    Track every person of a scene and classify their activity and identity

    Every AP tracks and classifies on its own. The windows of the same
    person seen by several APs are matched by position at the end of the
    window, and the decision of the most confident AP is kept. The reported
    position is the one of that AP in "decision" fusion mode, the mean over
    the matched APs in "position" mode.

    Parameters
    ----------
    scene : Scene
        simulated scene, its APs must match cfg.aps
    cfg : PipelineConfig
    activity_net : Network
        activity classifier
    identity_net : Network, optional
        person classifier
    seed : int, optional
        root seed (default: the scene seed)
    activity_names, identity_names : list of str, optional
        label names

    Returns
    -------
    tracks : pandas.DataFrame
        track table of all APs
    timeline : pandas.DataFrame
        one row per window and person with columns t0, t_end, person, ap,
        tracks, activity, activity_confidence, identity, identity_confidence
    """
    codebook = make_codebook(cfg)
    frames, histories = run_scene_tracking(scene, cfg, seed)
    registrations = {ap.id: ap for ap in scene.aps}

    windows = {}
    for ap_id, history in histories.items():
        specs = extract_stream(frames[ap_id], history, codebook, cfg.radio, cfg.stft, cfg.md, ap=ap_id)
        activity = classify_windows(specs, activity_net, cfg)
        identity = classify_windows(specs, identity_net, cfg) if identity_net is not None else {}
        by_step = dict(history)
        for (track_id, t0), p in activity.items():
            t_end = t0 + cfg.md.t_window - 1
            track = next(t for t in by_step[t_end] if t.id == track_id)
            position = registrations[ap_id].to_room(track.x[:2])
            windows.setdefault(t0, []).append(
                (ap_id, track_id, position, p, identity.get((track_id, t0)))
            )

    rows = []
    for t0 in sorted(windows):
        entries = windows[t0]
        per_ap = {}
        for ap_id, track_id, position, _, _ in entries:
            per_ap.setdefault(ap_id, {})[track_id] = position
        lookup = {(e[0], e[1]): e for e in entries}
        people = fused_tracks(list(per_ap.items()), cfg.fusion)
        for person, (members, position) in enumerate(people):
            parts = [lookup[m] for m in members]
            decision = fuse_decisions([(e[0], e[3]) for e in parts])
            if cfg.fusion.mode == "decision":
                position = next(e[2] for e in parts if e[0] == decision.ap)
            identity, identity_conf = None, np.nan
            if identity_net is not None:
                fused_id = fuse_decisions([(e[0], e[4]) for e in parts])
                identity, identity_conf = fused_id.label, fused_id.confidence
                if identity_names is not None:
                    identity = identity_names[identity]
            rows.append(
                (
                    t0,
                    t0 + cfg.md.t_window - 1,
                    person,
                    decision.ap,
                    ";".join(f"{a}:{t}" for a, t in members),
                    position[0],
                    position[1],
                    activity_names[decision.label],
                    decision.confidence,
                    identity,
                    identity_conf,
                )
            )
    timeline = pd.DataFrame(
        rows,
        columns=[
            "t0",
            "t_end",
            "person",
            "ap",
            "tracks",
            "x",
            "y",
            "activity",
            "activity_confidence",
            "identity",
            "identity_confidence",
        ],
    )
    tracks = pd.concat(
        [tracks_table(histories[ap.id], ap) for ap in scene.aps], ignore_index=True
    )
    logging.info("%i windows classified", len(timeline))
    return tracks, timeline


def fused_accuracy(dataset, net):
    """
    Accuracy of every AP and of the decision fusion over APs

    Samples with the same window index are the same person seen by
    different APs; samples without ap and window keys are scored alone.

    Returns
    -------
    report : pandas.DataFrame
        columns source, samples, accuracy
    """
    x, y = dataset.arrays()
    p = net.forward(x, "eval") if len(y) else np.zeros((0, net.n_classes))
    rows = []
    aps = sorted({m["ap"] for m in dataset.meta if "ap" in m})
    for ap in aps:
        index = [i for i, m in enumerate(dataset.meta) if m.get("ap") == ap]
        correct = [decide(p[i])[0] == y[i] for i in index]
        rows.append((str(ap), len(index), float(np.mean(correct))))

    groups = {}
    for i, m in enumerate(dataset.meta):
        key = m.get("window", f"sample{i}")
        groups.setdefault(key, []).append(i)
    correct = []
    for index in groups.values():
        decision = fuse_decisions([(dataset.meta[i].get("ap", 0), p[i]) for i in index])
        correct.append(decision.label == y[index[0]])
    rows.append(("fused", len(groups), float(np.mean(correct)) if correct else float("nan")))
    return pd.DataFrame(rows, columns=["source", "samples", "accuracy"])
