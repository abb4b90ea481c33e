"""
Labeled spectrogram datasets

Spectrograms are stored as CSV tables (one row per velocity bin, one column
per tracking step) and listed in a YAML manifest together with their labels.
Synthetic datasets are simulated with the scene simulator, using the true
position of the person to select the beam pattern and the CIR taps.
"""

import logging
import os.path

import numpy as np
import pandas as pd
import yaml

from .config import PipelineConfig, SchemaError, check_keys, load_yaml, require, schema_error
from .microdoppler import Spectrogram, column_for_position, column_lag, doppler_axis, preprocess
from .scenesim import ACTIVITIES, Gait, Scene, SceneFrames, Subject, synth_codebook
from .structures import ApRegistration
from .util import rng_stream

#:list: size of the simulated room in m
ROOM = [6.1, 7.7]
#:float: noise std of the simulated datasets in V
NOISE_STD = 1e-3


class LabeledDataset:
    """ Spectrograms and their class labels """

    def __init__(self, samples, label_names, meta=None):
        """
        Parameters
        ----------
        samples : list of (array, int)
            spectrogram values and label index
        label_names : list of str
            name of every label
        meta : list of dict, optional
            extra information per sample, e.g. ap and window
        """
        label_names = list(label_names)
        samples = [(np.asarray(values, dtype=float), int(label)) for values, label in samples]
        shapes = {values.shape for values, _ in samples}
        if len(shapes) > 1:
            raise ValueError(f"All samples must have the same shape, got {sorted(shapes)}")
        for _, label in samples:
            if not 0 <= label < len(label_names):
                raise ValueError(f"Label {label} out of range for {len(label_names)} label names")
        if meta is None:
            meta = [{} for _ in samples]
        if len(meta) != len(samples):
            raise ValueError(f"Got {len(meta)} meta entries for {len(samples)} samples")
        self.samples = samples
        self.label_names = label_names
        self.meta = [dict(m) for m in meta]

    def __len__(self):
        return len(self.samples)

    def __getitem__(self, index):
        return self.samples[index]

    @property
    def shape(self):
        """tuple: shape of the spectrograms """
        return self.samples[0][0].shape if self.samples else None

    @property
    def labels(self):
        return np.array([label for _, label in self.samples], dtype=int)

    def arrays(self):
        """
        Returns
        -------
        x : array of shape (n, rows, columns)
        y : array of int of size (n,)
        """
        if len(self.samples) == 0:
            return np.zeros((0, 0, 0)), np.zeros(0, dtype=int)
        return np.stack([values for values, _ in self.samples]), self.labels

    def subset(self, indices):
        indices = list(indices)
        return LabeledDataset(
            [self.samples[i] for i in indices], self.label_names, [self.meta[i] for i in indices]
        )

    def split(self, fraction, seed=0):
        """
        Random split into two datasets

        Parameters
        ----------
        fraction : float
            share of the samples in the first dataset, per label
        seed : int
            seed of the permutation

        Returns
        -------
        first, second : LabeledDataset
        """
        if not 0 < fraction < 1:
            raise ValueError(f"Split fraction must be in (0, 1), got {fraction}")
        rng = rng_stream(seed)
        first, second = [], []
        labels = self.labels
        for label in range(len(self.label_names)):
            index = rng.permutation(np.flatnonzero(labels == label))
            cut = int(round(fraction * len(index)))
            first.extend(index[:cut].tolist())
            second.extend(index[cut:].tolist())
        return self.subset(sorted(first)), self.subset(sorted(second))


def write_spectrogram_csv(spec, filename):
    """
    Save a spectrogram as CSV

    The first column holds the velocity of every row in m/s, the header of
    the other columns is the tracking step of each column.
    """
    steps = [str(spec.t0 + i) for i in range(spec.n_columns)]
    df = pd.DataFrame(spec.values, columns=steps)
    df.insert(0, "velocity", spec.velocity_axis)
    df.to_csv(filename, index=False, float_format="%.10g")
    logging.debug("Saved spectrogram %s", filename)


def read_spectrogram_csv(filename, preprocessed=True):
    """ Load a spectrogram saved by write_spectrogram_csv """
    if not os.path.exists(filename):
        raise SchemaError(f"{filename}:0: spectrogram file not found")
    df = pd.read_csv(filename)
    if df.columns[0] != "velocity" or len(df.columns) < 2:
        raise SchemaError(f"{filename}:1: expected a 'velocity' column followed by the time steps")
    try:
        t0 = int(df.columns[1])
    except ValueError:
        raise SchemaError(f"{filename}:1: column header {df.columns[1]!r} is not a time step")
    return Spectrogram(
        df.iloc[:, 1:].to_numpy(dtype=float),
        df["velocity"].to_numpy(dtype=float),
        t0=t0,
        preprocessed=preprocessed,
    )


def write_pgm(spec, filename):
    """
    Save a spectrogram as 8 bit binary PGM image

    The highest velocity is the top row, values are scaled linearly so that
    the maximum maps to 255.
    """
    values = np.asarray(getattr(spec, "values", spec), dtype=float)[::-1]
    lo, hi = values.min(), values.max()
    if hi > lo:
        image = np.round(255 * (values - lo) / (hi - lo))
    else:
        image = np.zeros_like(values)
    rows, cols = image.shape
    with open(filename, "wb") as f:
        f.write(f"P5\n{cols} {rows}\n255\n".encode("ascii"))
        f.write(image.astype(np.uint8).tobytes())


def read_pgm(filename):
    """ Load an 8 bit binary PGM image as array of shape (rows, columns) """
    with open(filename, "rb") as f:
        data = f.read()
    fields = data.split(maxsplit=4)
    if fields[0] != b"P5" or int(fields[3]) != 255:
        raise SchemaError(f"{filename}:1: not an 8 bit binary PGM image")
    cols, rows = int(fields[1]), int(fields[2])
    pixels = np.frombuffer(data[-rows * cols :], dtype=np.uint8)
    return pixels.reshape(rows, cols)


def load_manifest(filename):
    """
    Load a dataset manifest and all of its spectrograms

    The manifest is a YAML document
        labels:  [name, ...]
        samples: [{path: file.csv, label: name, ap: id, window: index}, ...]
    Paths are relative to the manifest, ap and window are optional.

    Returns
    -------
    dataset : LabeledDataset
    """
    data = load_yaml(filename)
    check_keys(filename, data, ["labels", "samples"])
    labels = [str(name) for name in require(filename, data, "labels", list)]
    if len(set(labels)) != len(labels) or len(labels) < 2:
        raise schema_error(filename, data, "labels", f"need at least two unique labels, got {labels}")
    root = os.path.dirname(os.path.abspath(filename))

    samples, meta = [], []
    for entry in require(filename, data, "samples", list):
        check_keys(filename, entry, ["path", "label", "ap", "window"])
        path = require(filename, entry, "path", str)
        label = require(filename, entry, "label")
        if str(label) not in labels:
            raise schema_error(filename, entry, "label", f"unknown label {label!r}, expected one of {labels}")
        if not os.path.isabs(path):
            path = os.path.join(root, path)
        if not os.path.exists(path):
            raise schema_error(filename, entry, "path", f"spectrogram file not found: {path}")
        spec = read_spectrogram_csv(path)
        samples.append((spec.values, labels.index(str(label))))
        meta.append({key: entry[key] for key in ["ap", "window"] if key in entry})
    try:
        dataset = LabeledDataset(samples, labels, meta)
    except ValueError as ex:
        raise SchemaError(f"{filename}:{data.line}: {ex}")
    logging.info("Loaded %i samples of %i labels from %s", len(dataset), len(labels), filename)
    return dataset


def save_dataset(dataset, directory, velocity_axis, name="dataset"):
    """
    Write every sample as CSV file plus a manifest

    Returns
    -------
    manifest : str
        path of the manifest
    """
    os.makedirs(directory, exist_ok=True)
    entries = []
    for i, ((values, label), meta) in enumerate(zip(dataset.samples, dataset.meta)):
        path = f"{name}_{i:05d}.csv"
        spec = Spectrogram(values, velocity_axis, preprocessed=True)
        write_spectrogram_csv(spec, os.path.join(directory, path))
        entry = {"path": path, "label": dataset.label_names[label]}
        entry.update(meta)
        entries.append(entry)
    manifest = os.path.join(directory, f"{name}.yaml")
    with open(manifest, "w") as f:
        yaml.safe_dump({"labels": dataset.label_names, "samples": entries}, f, sort_keys=False)
    logging.info("Saved %i samples to %s", len(entries), manifest)
    return manifest


def _trajectory(activity, rng, duration):
    """ Waypoints in the AP-local frame of a single person """
    bearing = rng.uniform(-np.pi / 6, np.pi / 6)
    if activity in ["walking", "running"]:
        speed = rng.uniform(0.8, 1.2) if activity == "walking" else rng.uniform(1.7, 2.2)
        leg = speed * duration / 2
        away = rng.random() < 0.5
        if away:
            start = rng.uniform(1.5, 2.0)
            heading = bearing + rng.uniform(-np.pi / 4, np.pi / 4)
        else:
            start = rng.uniform(leg + 1.2, leg + 1.7)
            heading = bearing + np.pi + rng.uniform(-np.pi / 4, np.pi / 4)
        p0 = start * np.array([np.cos(bearing), np.sin(bearing)])
        p1 = p0 + leg * np.array([np.cos(heading), np.sin(heading)])
        return [(*p0, 0.0), (*p1, duration / 2), (*p0, duration)]
    r = rng.uniform(1.5, 4.0)
    p0 = r * np.array([np.cos(bearing), np.sin(bearing)])
    return [(*p0, 0.0)]


#:list: the AP in the middle of the west wall looking east, and the one in
#:the middle of the south wall looking north
DATASET_APS = [
    ApRegistration(id=0, position=[0.0, ROOM[1] / 2], boresight=0.0),
    ApRegistration(id=1, position=[ROOM[0] / 2, 0.0], boresight=90.0),
]


def simulate_spectrogram(subject_args, seed, cfg=None, noise_std=NOISE_STD, aps=None):
    """
    Preprocessed spectrogram of one simulated person

    Parameters
    ----------
    subject_args : dict
        activity, gait and waypoints (in m and s, local to the first AP) of
        the person
    seed : int
        seed of the scene
    cfg : PipelineConfig, optional
    noise_std : float, optional
        receiver noise std
    aps : list of ApRegistration, optional
        APs observing the person, all of them get a spectrogram
        (default: the first of DATASET_APS)

    Returns
    -------
    spec : Spectrogram or list of Spectrogram
        a single spectrogram if aps is None, one per AP otherwise
    """
    cfg = cfg if cfg is not None else PipelineConfig()
    radio, stft, md = cfg.radio, cfg.stft, cfg.md
    lag = column_lag(stft)
    n_steps = lag + md.t_window
    duration = (n_steps * stft.sigma + 1) * radio.t_c

    single = aps is None
    aps = DATASET_APS[:1] if single else list(aps)
    waypoints = [(*aps[0].to_room(w[:2]), w[2]) for w in subject_args["waypoints"]]
    subject = Subject(
        0, waypoints, activity=subject_args["activity"], gait=subject_args.get("gait")
    )
    scene = Scene(ROOM, [subject], aps=aps, noise_std=noise_std, duration=duration, seed=seed)
    codebook = synth_codebook(radio.n_p, cfg.codebook.fov, cfg.codebook.beamwidth, cfg.codebook.grid_step)
    axis, _, _ = doppler_axis(stft, radio)

    result = []
    for index, ap in enumerate(aps):
        frames = SceneFrames(scene, index, codebook, radio, seed)
        columns = []
        for step in range(lag, n_steps):
            position = ap.to_local(subject.position(step * stft.sigma * radio.t_c))
            mu, _, _ = column_for_position(frames, position, step, codebook, radio, stft, md)
            columns.append(mu)
        raw = Spectrogram(np.stack(columns, axis=1), axis, t0=lag, subject=0, ap=ap.id)
        result.append(preprocess(raw, md))
    return result[0] if single else result


def build_activity_dataset(activities=ACTIVITIES, per_class=60, seed=0, cfg=None, noise_std=NOISE_STD):
    """
    Simulate a dataset of activity spectrograms

    Parameters
    ----------
    activities : list of str
        activities to simulate, the labels in this order
    per_class : int
        samples per activity
    seed : int
        root seed, sample i of class c uses the streams (seed, c, i)
    cfg : PipelineConfig, optional

    Returns
    -------
    dataset : LabeledDataset
    """
    cfg = cfg if cfg is not None else PipelineConfig()
    activities = list(activities)
    duration = (column_lag(cfg.stft) + cfg.md.t_window) * cfg.stft.sigma * cfg.radio.t_c
    samples = []
    for c, activity in enumerate(activities):
        for i in range(per_class):
            rng = rng_stream(seed, c, i)
            args = {"activity": activity, "waypoints": _trajectory(activity, rng, duration)}
            scene_seed = int(rng.integers(2 ** 31))
            spec = simulate_spectrogram(args, scene_seed, cfg, noise_std)
            samples.append((spec.values, c))
        logging.info("Simulated %i spectrograms of %s", per_class, activity)
    return LabeledDataset(samples, activities)


def random_gaits(n, seed=0):
    """ n distinct gait signatures """
    rng = rng_stream(seed)
    return [
        Gait(
            frequency_scale=rng.uniform(0.75, 1.3),
            amplitude_scale=rng.uniform(0.7, 1.1),
            reflectivity_scale=rng.uniform(0.7, 1.3),
        )
        for _ in range(n)
    ]


def build_identity_dataset(gaits, per_subject=60, seed=0, cfg=None, activity="walking", noise_std=NOISE_STD):
    """
    Simulate a dataset of walking spectrograms of different persons

    Parameters
    ----------
    gaits : list of Gait
        gait signature of every person, the labels are "person0", ...
    per_subject : int
        samples per person
    seed : int
        root seed, sample i of person s uses the streams (seed, s, i)
    cfg : PipelineConfig, optional
    activity : str, optional
        activity of all persons (default: "walking")

    Returns
    -------
    dataset : LabeledDataset
    """
    cfg = cfg if cfg is not None else PipelineConfig()
    duration = (column_lag(cfg.stft) + cfg.md.t_window) * cfg.stft.sigma * cfg.radio.t_c
    samples = []
    for s, gait in enumerate(gaits):
        for i in range(per_subject):
            rng = rng_stream(seed, s, i)
            args = {
                "activity": activity,
                "gait": gait,
                "waypoints": _trajectory(activity, rng, duration),
            }
            spec = simulate_spectrogram(args, int(rng.integers(2 ** 31)), cfg, noise_std)
            samples.append((spec.values, s))
    logging.info("Simulated %i spectrograms of %i persons", len(samples), len(gaits))
    return LabeledDataset(samples, [f"person{s}" for s in range(len(gaits))])


def build_multi_ap_dataset(activities=ACTIVITIES, per_class=20, seed=0, cfg=None, aps=None, noise_std=NOISE_STD):
    """
    Simulate activity spectrograms of the same persons seen by several APs

    Every simulated person yields one sample per AP; the samples share the
    meta key "window" and carry the id of their AP in "ap".

    Parameters
    ----------
    activities : list of str
        activities to simulate, the labels in this order
    per_class : int
        persons per activity
    seed : int
        root seed, person i of class c uses the streams (seed, c, i)
    cfg : PipelineConfig, optional
    aps : list of ApRegistration, optional
        (default: DATASET_APS)

    Returns
    -------
    dataset : LabeledDataset
    """
    cfg = cfg if cfg is not None else PipelineConfig()
    aps = DATASET_APS if aps is None else list(aps)
    activities = list(activities)
    duration = (column_lag(cfg.stft) + cfg.md.t_window) * cfg.stft.sigma * cfg.radio.t_c
    samples, meta = [], []
    for c, activity in enumerate(activities):
        for i in range(per_class):
            rng = rng_stream(seed, c, i)
            args = {"activity": activity, "waypoints": _trajectory(activity, rng, duration)}
            specs = simulate_spectrogram(args, int(rng.integers(2 ** 31)), cfg, noise_std, aps)
            for spec in specs:
                samples.append((spec.values, c))
                meta.append({"ap": spec.ap, "window": f"{activity}{i}"})
        logging.info("Simulated %i persons %s seen by %i APs", per_class, activity, len(aps))
    return LabeledDataset(samples, activities, meta)
