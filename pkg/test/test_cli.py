import os

import numpy as np
import pandas as pd
import pytest

from trnsense.classify import Network, save_checkpoint
from trnsense.cli import background_filename, check_labels, main, parse_args
from trnsense.structures import NetworkSpec

SCENE = (
    "room: [6.1, 7.7]\n"
    "duration: 0.5\n"
    "seed: 3\n"
    "noise_std: 1e-3\n"
    "aps:\n"
    "  - {id: 0, position: [0.0, 3.85], boresight: 0}\n"
    "subjects:\n"
    "  - id: 0\n"
    "    waypoints: [[1.5, 3.6, 0.0], [3.0, 3.6, 1.5]]\n"
    "    activity: walking\n"
)


@pytest.fixture
def files(tmp_path, small_config):
    scene = tmp_path / "scene.yaml"
    scene.write_text(SCENE)
    config = tmp_path / "config.yaml"
    small_config.save(str(config))
    return {
        "scene": str(scene),
        "config": str(config),
        "log": str(tmp_path / "trnsense.log"),
        "out": str(tmp_path / "captures"),
    }


def run(files, *args):
    return main(list(args) + ["--config", files["config"], "--log", files["log"]])


def test_background_filename():
    assert background_filename("captures/0.cir") == "captures/0_background.cir"


def test_parse_args():
    args = parse_args(["track", "a.cir", "b.cir", "--truth", "truth.csv"])
    assert args.captures == ["a.cir", "b.cir"]
    assert args.out == "tracks.csv"
    assert args.config is None
    with pytest.raises(SystemExit):
        parse_args(["dataset", "furniture"])
    with pytest.raises(SystemExit):
        parse_args(["mud", "a.cir"])


def test_simulate_track_mud(files, tmp_path, capsys):
    out = files["out"]
    assert run(files, "simulate", files["scene"], "--out", out) == 0
    capture = os.path.join(out, "0.cir")
    for name in ["0.cir", "0_background.cir", "truth.csv"]:
        assert os.path.exists(os.path.join(out, name))
    truth = pd.read_csv(os.path.join(out, "truth.csv"))
    assert len(truth) == 116

    tracks_file = str(tmp_path / "tracks.csv")
    truth_file = os.path.join(out, "truth.csv")
    assert run(files, "track", capture, "--out", tracks_file, "--truth", truth_file) == 0
    assert "detection_rate" in capsys.readouterr().out
    tracks = pd.read_csv(tracks_file)
    assert list(tracks.columns) == ["t", "ap", "id", "x", "y", "vx", "vy"]
    assert len(tracks) > 0

    mud = str(tmp_path / "mud")
    assert run(files, "mud", capture, "--tracks", tracks_file, "--out", mud) == 0
    names = os.listdir(mud)
    csv = [n for n in names if n.endswith(".csv")]
    pgm = [n for n in names if n.endswith(".pgm")]
    assert len(csv) == len(pgm) > 0
    assert all(n.startswith("ap0_track") for n in names)


def test_replay_is_deterministic(files, tmp_path):
    a, b = str(tmp_path / "a"), str(tmp_path / "b")
    assert run(files, "simulate", files["scene"], "--out", a) == 0
    assert run(files, "simulate", files["scene"], "--out", b) == 0
    with open(os.path.join(a, "0.cir"), "rb") as f, open(os.path.join(b, "0.cir"), "rb") as g:
        assert f.read() == g.read()


def test_errors(files, tmp_path):
    assert run(files, "track", str(tmp_path / "missing.cir")) == 1
    assert run(files, "eval", str(tmp_path / "missing.yaml"), "--checkpoint", "x.net") == 1

    broken = tmp_path / "broken.cir"
    broken.write_bytes(b"NOTCIR" + bytes(200))
    assert run(files, "track", str(broken)) == 1

    config = tmp_path / "bad.yaml"
    config.write_text("radio:\n  bandwidth: 2e9\n")
    assert main(["simulate", files["scene"], "--config", str(config), "--log", files["log"]]) == 1


def test_codebook_mismatch(files, tmp_path, small_config):
    out = files["out"]
    assert run(files, "simulate", files["scene"], "--out", out) == 0
    small_config.codebook.beamwidth = 20.0
    other = tmp_path / "other.yaml"
    small_config.save(str(other))
    args = ["track", os.path.join(out, "0.cir"), "--out", str(tmp_path / "t.csv")]
    assert main(args + ["--config", str(other), "--log", files["log"]]) == 1


def test_track_is_deterministic(files, tmp_path):
    out = files["out"]
    assert run(files, "simulate", files["scene"], "--out", out) == 0
    capture = os.path.join(out, "0.cir")
    a, b = str(tmp_path / "a.csv"), str(tmp_path / "b.csv")
    assert run(files, "track", capture, "--out", a) == 0
    assert run(files, "track", capture, "--out", b) == 0
    with open(a) as f, open(b) as g:
        assert f.read() == g.read()


def test_track_with_scene_poses(files, tmp_path):
    moved = tmp_path / "moved.yaml"
    moved.write_text(SCENE.replace("position: [0.0, 3.85]", "position: [0.0, 3.35]"))
    out = files["out"]
    assert run(files, "simulate", str(moved), "--out", out) == 0
    capture = os.path.join(out, "0.cir")

    a, b = str(tmp_path / "configured.csv"), str(tmp_path / "scene.csv")
    assert run(files, "track", capture, "--out", a) == 0
    assert run(files, "track", capture, "--out", b, "--scene", str(moved)) == 0
    configured, scene = pd.read_csv(a), pd.read_csv(b)
    assert len(scene) == len(configured) > 0
    assert np.allclose(scene["x"], configured["x"], atol=1e-4)
    assert np.allclose(scene["y"], configured["y"] - 0.5, atol=1e-4)

    other = tmp_path / "other.yaml"
    other.write_text(SCENE.replace("id: 0, position", "id: 1, position"))
    assert run(files, "track", capture, "--out", a, "--scene", str(other)) == 1


def sitting_network(filename):
    """ Checkpoint of a network that answers its second class for every input """
    spec = NetworkSpec(
        input_shape=[59, 20],
        filters=[2],
        dense_units=4,
        n_classes=3,
        label_names=["walking", "sitting", "waving"],
    )
    net = Network(spec)
    net.head.w[...] = 0
    net.head.b[...] = [0.0, 5.0, 0.0]
    save_checkpoint(net, filename)
    return net


def test_e2e_label_names(files, tmp_path):
    checkpoint = str(tmp_path / "activity.net")
    sitting_network(checkpoint)
    out = str(tmp_path / "results")
    assert run(files, "e2e", files["scene"], "--activity", checkpoint, "--out", out) == 0
    timeline = pd.read_csv(os.path.join(out, "timeline.csv"))
    assert len(timeline) > 0
    assert set(timeline["activity"]) == {"sitting"}


def test_check_labels(tmp_path):
    net = sitting_network(str(tmp_path / "activity.net"))
    check_labels(["walking", "sitting"], net, "data.yaml")
    with pytest.raises(ValueError):
        check_labels(["sitting", "walking"], net, "data.yaml")
    with pytest.raises(ValueError):
        check_labels(["walking", "sitting", "waving", "running"], net, "data.yaml")
    unnamed = Network(NetworkSpec(input_shape=[59, 20], filters=[2], dense_units=4, n_classes=3))
    check_labels(["b", "a"], unnamed, "data.yaml")
