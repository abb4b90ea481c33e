import numpy as np
import pytest

from trnsense.config import FileError, PipelineConfig, SchemaError, load_yaml
from trnsense.structures import (
    ApRegistration,
    Collection,
    DetectConfig,
    MdConfig,
    NetworkSpec,
    RadioConfig,
    StftConfig,
    TrackerConfig,
    TrainConfig,
)


def test_default_parameters():
    """ The defaults are the reference parameter set """
    cfg = PipelineConfig()
    assert cfg.radio.f_o == 60.48e9
    assert cfg.radio.b == 1.76e9
    assert cfg.radio.t_c == 0.27e-3
    assert cfg.radio.l == 192
    assert cfg.radio.n_p == 12
    assert cfg.detect.to_dict() == {
        "alpha_max": 0.25,
        "alpha_mean": 2.0,
        "alpha_abs": 2.5e-3,
        "k_static": 128,
    }
    assert cfg.tracker.q == 0.5
    assert cfg.tracker.r_d == 0.1
    assert cfg.tracker.r_theta == 2.0
    assert cfg.tracker.gate == 9.21
    assert cfg.tracker.confirm_hits == 3
    assert cfg.tracker.kill_misses == 10
    assert np.isclose(cfg.tracker.dt, 16 * cfg.radio.t_c)
    assert cfg.stft.m == 64
    assert cfg.stft.sigma == 16
    assert cfg.md.q == 4
    assert cfg.md.t_window == 400
    assert cfg.md.overlap == 300
    assert cfg.md.hop == 100
    assert cfg.md.static_band == 0.28
    assert cfg.train.lr == 1e-4
    assert cfg.train.epochs == 120
    assert cfg.train.batch_size == 16
    assert cfg.network.filters == [8, 16, 32, 64]
    assert cfg.network.input_shape == [59, 400]
    assert cfg.fusion.mode == "decision"


def test_collection_case_insensitive():
    c = Collection(Alpha=1)
    assert c.alpha == 1
    assert c["ALPHA"] == 1
    assert "alpha" in c
    assert c.get("beta", 2) == 2
    c["Beta"] = 3
    assert c.names == ["alpha", "beta"]


def test_config_validation():
    with pytest.raises(ValueError):
        RadioConfig(b=-1)
    with pytest.raises(ValueError):
        RadioConfig(unknown=1)
    with pytest.raises(ValueError):
        StftConfig(m=48)
    with pytest.raises(ValueError):
        StftConfig(m=8, sigma=16)
    with pytest.raises(ValueError):
        MdConfig(q=3)
    with pytest.raises(ValueError):
        MdConfig(overlap=400)
    with pytest.raises(ValueError):
        TrackerConfig(gate=0)
    with pytest.raises(ValueError):
        TrainConfig(lr=-1)
    with pytest.raises(ValueError):
        NetworkSpec(n_classes=1)
    with pytest.raises(ValueError):
        DetectConfig(k_static=0)


def test_failed_change_is_reverted():
    md = MdConfig()
    with pytest.raises(ValueError):
        md.overlap = 500
    assert md.overlap == 300
    md.overlap = 200
    assert md.hop == 200


def test_update_checks_once():
    md = MdConfig()
    with pytest.raises(ValueError):
        md.t_window = 20
    md.update(t_window=20, overlap=10)
    assert md.t_window == 20
    assert md.hop == 10

    with pytest.raises(ValueError):
        md.update(overlap=5, t_window=4)
    assert (md.t_window, md.overlap) == (20, 10)
    with pytest.raises(ValueError):
        md.update(overlap=5, furniture=1)
    assert md.overlap == 10


def test_pipeline_consistency():
    cfg = PipelineConfig()
    cfg.tracker.dt = 1e-3
    with pytest.raises(ValueError):
        cfg.check()
    with pytest.raises(ValueError):
        PipelineConfig(aps=[ApRegistration(id=0), ApRegistration(id=0, position=[1, 0])])
    with pytest.raises(ValueError):
        PipelineConfig(aps=[ApRegistration(id=0), ApRegistration(id=1)])
    with pytest.raises(ValueError):
        PipelineConfig().ap(5)


def test_save_load(tmp_path):
    cfg = PipelineConfig(aps=[ApRegistration(id=0), ApRegistration(id=1, position=[3.0, 0.0], boresight=90)])
    cfg.detect.alpha_mean = 1.5
    cfg.fusion.mode = "position"
    filename = str(tmp_path / "pipeline.yaml")
    cfg.save(filename)
    other = PipelineConfig.load(filename)
    for name in PipelineConfig.sections:
        assert other[name] == cfg[name]
    assert [ap.to_dict() for ap in other.aps] == [ap.to_dict() for ap in cfg.aps]


def test_load_partial(tmp_path):
    """ Omitted keys keep their defaults, exponents without a dot are floats """
    filename = tmp_path / "pipeline.yaml"
    filename.write_text("radio:\n  b: 2e9\ndetect:\n  alpha_abs: 1e-3\n")
    cfg = PipelineConfig.load(str(filename))
    assert cfg.radio.b == 2e9
    assert cfg.radio.l == 192
    assert cfg.detect.alpha_abs == 1e-3
    assert cfg.tracker == TrackerConfig()


def test_load_errors(tmp_path):
    """ Schema errors point at the offending line """
    filename = tmp_path / "pipeline.yaml"
    filename.write_text("radio:\n  l: 64\n  bandwidth: 2.0\n")
    with pytest.raises(SchemaError, match=r"pipeline.yaml:3: unknown key 'bandwidth'"):
        PipelineConfig.load(str(filename))

    filename.write_text("detect:\n  alpha_max: fast\n")
    with pytest.raises(SchemaError, match=r":2: 'alpha_max' must be of type float"):
        PipelineConfig.load(str(filename))

    filename.write_text("stft:\n  m: 48\n")
    with pytest.raises(SchemaError):
        PipelineConfig.load(str(filename))

    filename.write_text("tracking:\n  q: 1.0\n")
    with pytest.raises(SchemaError, match=":1:"):
        PipelineConfig.load(str(filename))

    filename.write_text("radio: [1, 2\n")
    with pytest.raises(SchemaError):
        PipelineConfig.load(str(filename))

    with pytest.raises(FileError):
        load_yaml(str(tmp_path / "missing.yaml"))


def test_ap_registration_frames():
    ap = ApRegistration(id=1, position=[2.0, 1.0], boresight=90.0)
    room = ap.to_room([1.0, 0.0])
    assert np.allclose(room, [2.0, 2.0])
    assert np.allclose(ap.to_local(room), [1.0, 0.0])
    d, theta = ap.to_polar([[1.0, 1.0]])
    assert np.allclose(d, [1.0])
    assert np.allclose(theta, [90.0])
    with pytest.raises(ValueError):
        ApRegistration(position=[1.0, 2.0, 3.0])
