"""
Command line interface

    trnsense simulate scene.yaml --out captures/
    trnsense track captures/0.cir captures/1.cir --out tracks.csv --truth captures/truth.csv --scene scene.yaml
    trnsense mud captures/0.cir --tracks tracks.csv --out spectrograms/
    trnsense dataset activity --out data/
    trnsense train data/dataset.yaml --out activity.net
    trnsense eval data/dataset.yaml --checkpoint activity.net --out confusion.csv
    trnsense e2e scene.yaml --activity activity.net --out results/
"""

import argparse
import logging
import os.path
import sys

import numpy as np
import pandas as pd

from . import dataset as ds
from .capture import read_capture, write_capture
from .classify import Network, accuracy, confusion_matrix, load_checkpoint, save_checkpoint, train
from .config import FileError, PipelineConfig
from .microdoppler import doppler_axis, extract_stream, preprocess, static_rows
from .pipeline import (
    evaluate_tracking,
    fused_accuracy,
    make_codebook,
    n_steps,
    run_e2e,
    run_tracking,
    tracks_table,
    truth_table,
)
from .scenesim import ACTIVITIES, SceneFrames, load_scene, synth_background_frames
from .structures import NetworkSpec
from .track import Track, TrackState
from .util import start_logging


def _config(args):
    if args.config is None:
        return PipelineConfig()
    return PipelineConfig.load(args.config)


def background_filename(filename):
    """ Calibration capture that belongs to a capture """
    root, ext = os.path.splitext(filename)
    return f"{root}_background{ext}"


def cmd_simulate(args):
    """ Simulate a scene and write one capture per AP, plus calibration captures and the truth """
    cfg = _config(args)
    scene = load_scene(args.scene)
    seed = scene.seed if args.seed is None else args.seed
    codebook = make_codebook(cfg)
    os.makedirs(args.out, exist_ok=True)

    n_frames = scene.n_frames(cfg.radio)
    for index, ap in enumerate(scene.aps):
        configured = {a.id: a for a in cfg.aps}.get(ap.id)
        if configured is None or configured.to_dict() != ap.to_dict():
            logging.warning("AP %i of the scene is not registered with this pose, track with --scene", ap.id)
        frames = SceneFrames(scene, index, codebook, cfg.radio, seed)
        filename = os.path.join(args.out, f"{ap.id}.cir")
        write_capture(filename, frames, cfg.radio, ap.id, codebook.hash)
        background = synth_background_frames(scene, index, codebook, cfg.radio, cfg.detect.k_static, seed)
        write_capture(background_filename(filename), background, cfg.radio, ap.id, codebook.hash)

    truth = truth_table(scene, n_steps(n_frames, cfg), cfg)
    truth.to_csv(os.path.join(args.out, "truth.csv"), index=False)
    logging.info("Simulated %i frames for %i APs", n_frames, len(scene.aps))
    return 0


def _open_capture(filename, cfg, codebook):
    capture = read_capture(filename)
    capture.check_radio(cfg.radio)
    capture.check_codebook(codebook)
    return capture


def _registrations(args, cfg):
    """
    Lookup of the AP poses, from the scene file if one is given and from
    the configuration otherwise
    """
    if args.scene is None:
        return cfg.ap
    aps = {ap.id: ap for ap in load_scene(args.scene).aps}

    def lookup(ap_id):
        if ap_id not in aps:
            raise ValueError(f"{args.scene} has no AP {ap_id}, it has {sorted(aps)}")
        return aps[ap_id]

    return lookup


def _track_captures(filenames, cfg, registrations):
    codebook = make_codebook(cfg)
    results = []
    for filename in filenames:
        capture = _open_capture(filename, cfg, codebook)
        background = _open_capture(background_filename(filename), cfg, codebook)
        registration = registrations(capture.ap)
        history = run_tracking(capture.frames, registration, codebook, cfg, background.frames)
        results.append((capture, registration, history))
    return sorted(results, key=lambda r: r[1].id)


def cmd_track(args):
    """ Track the persons in the captures of all APs """
    cfg = _config(args)
    results = _track_captures(args.captures, cfg, _registrations(args, cfg))
    tracks = pd.concat(
        [tracks_table(history, registration) for _, registration, history in results],
        ignore_index=True,
    )
    tracks.to_csv(args.out, index=False, float_format="%.6g")
    logging.info("Saved %i track states to %s", len(tracks), args.out)

    if args.truth is not None:
        truth = pd.read_csv(args.truth)
        report = evaluate_tracking(tracks, truth, cfg, burn_in=cfg.tracker.confirm_hits)
        print(report.to_string(index=False))
    return 0


def history_from_table(tracks, registration, steps):
    """
    AP-local track history of one AP from a track table

    Returns
    -------
    history : list of (int, list of Track)
    """
    tracks = tracks[tracks["ap"] == registration.id]
    by_step = {step: group for step, group in tracks.groupby("t")}
    origin = registration.to_room([0.0, 0.0])
    history = []
    for step in range(steps):
        current = []
        if step in by_step:
            for row in by_step[step].itertuples(index=False):
                position = registration.to_local([row.x, row.y])
                velocity = registration.to_local(origin + np.array([row.vx, row.vy]))
                state = TrackState(np.concatenate([position, velocity]), np.eye(4))
                current.append(Track(row.id, state, step))
        history.append((step, current))
    return history


def cmd_mud(args):
    """ Micro-Doppler spectrograms of every tracked person """
    cfg = _config(args)
    codebook = make_codebook(cfg)
    tracks = pd.read_csv(args.tracks)
    registrations = _registrations(args, cfg)
    os.makedirs(args.out, exist_ok=True)
    count = 0
    for filename in args.captures:
        capture = _open_capture(filename, cfg, codebook)
        registration = registrations(capture.ap)
        history = history_from_table(tracks, registration, n_steps(len(capture), cfg))
        specs = extract_stream(capture.frames, history, codebook, cfg.radio, cfg.stft, cfg.md, ap=capture.ap)
        for track_id, windows in specs.items():
            for spec in windows:
                spec = preprocess(spec, cfg.md)
                name = os.path.join(args.out, f"ap{capture.ap}_track{track_id}_t{spec.t0}")
                ds.write_spectrogram_csv(spec, f"{name}.csv")
                ds.write_pgm(spec, f"{name}.pgm")
                count += 1
    logging.info("Saved %i spectrograms to %s", count, args.out)
    return 0


def cmd_dataset(args):
    """ Simulate a labeled spectrogram dataset """
    cfg = _config(args)
    seed = 0 if args.seed is None else args.seed
    if args.kind == "activity":
        data = ds.build_activity_dataset(ACTIVITIES, args.per_class, seed, cfg)
    elif args.kind == "identity":
        gaits = ds.random_gaits(args.persons, seed)
        data = ds.build_identity_dataset(gaits, args.per_class, seed, cfg)
    else:
        data = ds.build_multi_ap_dataset(ACTIVITIES, args.per_class, seed, cfg)
    axis, _, _ = doppler_axis(cfg.stft, cfg.radio)
    axis = axis[~static_rows(axis, cfg.md.static_band)]
    manifest = ds.save_dataset(data, args.out, axis, name=args.kind)
    print(manifest)
    return 0


def cmd_train(args):
    """ Train a classifier on a dataset manifest """
    cfg = _config(args)
    data = ds.load_manifest(args.manifest)
    spec = cfg.network.to_dict()
    spec["n_classes"] = len(data.label_names)
    spec["input_shape"] = list(data.shape)
    spec["label_names"] = list(data.label_names)
    net = Network(NetworkSpec(**spec))
    train_cfg = cfg.train
    if args.seed is not None:
        train_cfg.seed = args.seed
    net, history = train(net, data, train_cfg)
    save_checkpoint(net, args.out)
    acc, _ = accuracy(net, data)
    print(f"final loss {history[-1]:.4f}, training accuracy {acc:.3f}")
    return 0


def check_labels(label_names, net, source):
    """ The labels of a dataset must be the first classes of the network, in the same order """
    if len(label_names) > net.n_classes:
        raise ValueError(f"{source} has {len(label_names)} labels, the network {net.n_classes} classes")
    if net.spec.label_names and list(label_names) != net.label_names[: len(label_names)]:
        raise ValueError(
            f"{source} labels {list(label_names)} do not match the network classes {net.label_names}"
        )


def cmd_eval(args):
    """ Accuracy and confusion matrix of a classifier on a dataset manifest """
    data = ds.load_manifest(args.manifest)
    net = load_checkpoint(args.checkpoint)
    check_labels(data.label_names, net, args.manifest)
    acc, predictions = accuracy(net, data)
    matrix = confusion_matrix(data.labels, predictions, net.n_classes)
    names = data.label_names + net.label_names[len(data.label_names) :]
    pd.DataFrame(matrix, index=names, columns=names).to_csv(args.out)
    print(f"accuracy {acc:.3f}")
    if any("ap" in m for m in data.meta):
        print(fused_accuracy(data, net).to_string(index=False))
    return 0


def cmd_e2e(args):
    """ Track, classify and fuse the persons of a simulated scene """
    cfg = _config(args)
    scene = load_scene(args.scene)
    activity_net = load_checkpoint(args.activity)
    identity_net = load_checkpoint(args.identity) if args.identity is not None else None
    activity_names = activity_net.label_names
    identity_names = identity_net.label_names if identity_net is not None else None
    tracks, timeline = run_e2e(
        scene, cfg, activity_net, identity_net, args.seed, activity_names, identity_names
    )
    os.makedirs(args.out, exist_ok=True)
    tracks.to_csv(os.path.join(args.out, "tracks.csv"), index=False, float_format="%.6g")
    timeline.to_csv(os.path.join(args.out, "timeline.csv"), index=False, float_format="%.6g")
    print(timeline.to_string(index=False))
    return 0


def parse_args(argv=None):
    parser = argparse.ArgumentParser(prog="trnsense", description="TRN based sensing pipeline")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=str, default=None, help="pipeline configuration file")
    common.add_argument("--seed", type=int, default=None, help="root seed")
    common.add_argument("--log", type=str, default="trnsense.log", help="log file")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="simulate the captures of a scene")
    p.add_argument("scene", type=str, help="scene file")
    p.add_argument("--out", type=str, default=".", help="output directory")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("track", parents=[common], help="track persons in captures")
    p.add_argument("captures", type=str, nargs="+", help="capture files, one per AP")
    p.add_argument("--out", type=str, default="tracks.csv", help="track table")
    p.add_argument("--truth", type=str, default=None, help="ground truth table of the simulation")
    p.add_argument("--scene", type=str, default=None, help="scene file with the AP poses")
    p.set_defaults(func=cmd_track)

    p = sub.add_parser("mud", parents=[common], help="extract micro-Doppler spectrograms")
    p.add_argument("captures", type=str, nargs="+", help="capture files, one per AP")
    p.add_argument("--tracks", type=str, required=True, help="track table of the captures")
    p.add_argument("--scene", type=str, default=None, help="scene file with the AP poses")
    p.add_argument("--out", type=str, default=".", help="output directory")
    p.set_defaults(func=cmd_mud)

    p = sub.add_parser("dataset", parents=[common], help="simulate a labeled dataset")
    p.add_argument("kind", choices=["activity", "identity", "multi-ap"])
    p.add_argument("--per-class", type=int, default=60, help="samples per label")
    p.add_argument("--persons", type=int, default=4, help="persons of an identity dataset")
    p.add_argument("--out", type=str, default=".", help="output directory")
    p.set_defaults(func=cmd_dataset)

    p = sub.add_parser("train", parents=[common], help="train a classifier")
    p.add_argument("manifest", type=str, help="dataset manifest")
    p.add_argument("--out", type=str, default="network.net", help="checkpoint file")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", parents=[common], help="evaluate a classifier")
    p.add_argument("manifest", type=str, help="dataset manifest")
    p.add_argument("--checkpoint", type=str, required=True, help="checkpoint file")
    p.add_argument("--out", type=str, default="confusion.csv", help="confusion matrix")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("e2e", parents=[common], help="track and classify the persons of a scene")
    p.add_argument("scene", type=str, help="scene file")
    p.add_argument("--activity", type=str, required=True, help="activity classifier checkpoint")
    p.add_argument("--identity", type=str, default=None, help="person classifier checkpoint")
    p.add_argument("--out", type=str, default=".", help="output directory")
    p.set_defaults(func=cmd_e2e)

    return parser.parse_args(argv)


def main(argv=None):
    args = parse_args(argv)
    start_logging(args.log)
    try:
        return args.func(args)
    except (FileError, ValueError, OSError, RuntimeError) as ex:
        logging.error("%s", ex)
        return 1


if __name__ == "__main__":
    sys.exit(main())
