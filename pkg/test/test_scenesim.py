import numpy as np
import pytest
from scipy.constants import speed_of_light

from trnsense.config import SchemaError
from trnsense.scenesim import (
    ACTIVITIES,
    SIDELOBE_FLOOR,
    Gait,
    Reflector,
    Scatterer,
    Scene,
    SceneFrames,
    Subject,
    body_model,
    capture_cfo,
    ground_truth,
    load_scene,
    noiseless_channel,
    scene_step,
    synth_background_frames,
    synth_cir_frame,
    synth_codebook,
)
from trnsense.structures import ApRegistration, RadioConfig

ROOM = [6.1, 7.7]


def point(id, x, y, reflectivity=1.0):
    """ A subject made of one static point scatterer """
    return Subject(id, [(x, y, 0.0)], scatterers=[Scatterer((0.0, 0.0), reflectivity)])


def test_codebook_shape(codebook):
    assert codebook.n_p == 12
    assert len(codebook) == 12
    assert codebook.gains.shape == (12, 181)
    assert codebook.fov == (-45.0, 45.0)
    assert np.allclose(codebook.gains.max(axis=1), 1)
    assert np.all(codebook.gains >= SIDELOBE_FLOOR - 1e-12)


def test_codebook_mainlobe(codebook):
    """ Every pattern peaks at its steering angle and reaches the floor at one beamwidth """
    for p, angle in enumerate(codebook.steering_angles):
        gains = codebook.gain(angle)
        assert np.argmax(gains) == p
        assert gains[p] > 0.99
        far = angle + 15.0 if angle + 15.0 <= 45 else angle - 15.0
        assert SIDELOBE_FLOOR <= codebook.gain(far)[p] < 0.06


def test_codebook_outside_fov(codebook):
    assert np.all(codebook.gain(60.0) == 0)
    assert codebook.gain(np.array([[0.0, 10.0]])).shape == (1, 2, 12)


def test_codebook_hash(codebook):
    assert codebook.hash == synth_codebook(12).hash
    assert len(codebook.hash) == 32
    assert codebook.hash != synth_codebook(12, beamwidth=10.0).hash
    with pytest.raises(ValueError):
        synth_codebook(1)


def test_body_model():
    for activity in ACTIVITIES:
        scatterers = body_model(activity)
        assert len(scatterers) == 5
        assert scatterers[0].role == "torso"
        assert all(s.role == "limb" for s in scatterers[1:])
    walking = body_model("walking")
    assert walking[0].amplitude == 0
    assert walking[1].frequency == 1.5
    # near side limbs reflect more
    assert walking[1].reflectivity > walking[2].reflectivity
    assert walking[3].reflectivity > walking[4].reflectivity
    waving = body_model("waving")
    assert waving[1].amplitude == 0 and waving[3].amplitude > 0
    with pytest.raises(ValueError):
        body_model("dancing")


def test_gait_scaling():
    gait = Gait(frequency_scale=1.2, amplitude_scale=0.5, reflectivity_scale=2.0)
    base = body_model("walking")
    scaled = body_model("walking", gait)
    assert np.isclose(scaled[1].frequency, 1.2 * base[1].frequency)
    assert np.isclose(scaled[1].amplitude, 0.5 * base[1].amplitude)
    assert np.isclose(scaled[0].reflectivity, 2.0 * base[0].reflectivity)
    with pytest.raises(ValueError):
        Gait(frequency_scale=0)


def test_scatterer_limits():
    with pytest.raises(ValueError):
        Scatterer((0, 0), -1)
    with pytest.raises(ValueError):
        Scatterer((0, 0), 1, amplitude=5.0)
    with pytest.raises(ValueError):
        Scatterer((0, 0), 1, role="head")


def test_subject_motion(walker):
    assert np.allclose(walker.position(0.75), [2.25, 3.6])
    assert np.allclose(walker.velocity(0.75), [1.0, 0.0])
    assert np.allclose(walker.velocity(2.0), [-1.0, 0.0])
    assert np.allclose(walker.position(10.0), [1.5, 3.6])
    assert np.allclose(walker.velocity(10.0), [0.0, 0.0])


def test_activity_schedule():
    subject = Subject(0, [(1, 1, 0)], activities=[(2.0, "waving"), (0.0, "walking")])
    assert subject.activity == "walking"
    assert subject.activity_at(1.9) == "walking"
    assert subject.activity_at(2.0) == "waving"
    assert subject.scatterers_at(3.0)[1].amplitude == 0
    with pytest.raises(ValueError):
        Subject(0, [(1, 1, 0)], activity="dancing")
    with pytest.raises(ValueError):
        Subject(0, [(1, 1, 0), (2, 2, 0)])


def test_scene_validation(ap, walker):
    with pytest.raises(ValueError):
        Scene(ROOM, aps=[ApRegistration(position=[7.0, 1.0])])
    with pytest.raises(ValueError):
        Scene(ROOM, [Subject(0, [(9.0, 1.0, 0.0)])], aps=[ap])
    with pytest.raises(ValueError):
        Scene(ROOM, [walker, walker], aps=[ap])
    with pytest.raises(ValueError):
        Scene(ROOM, aps=[ap], noise_std=-1)
    with pytest.raises(ValueError):
        Scene(ROOM, reflectors=[Reflector([3.0, -0.5], 1.0)], aps=[ap])
    scene = Scene(ROOM, [walker], aps=[ap], duration=1.0)
    assert scene.n_frames(RadioConfig()) == 3703
    assert len(scene.empty().subjects) == 0
    assert len(scene.subjects) == 1


def test_single_scatterer_channel(ap, codebook, small_radio):
    """ Amplitude and phase of one point scatterer in front of the AP """
    scene = Scene(ROOM, [point(0, 2.0, 3.85)], aps=[ap], cfo_range_hz=0)
    h = noiseless_channel(scene, 0, codebook, small_radio, 0.0)
    tap = int(np.rint(2.0 / small_radio.tap_spacing))
    assert np.count_nonzero(np.any(h != 0, axis=1)) == 1
    expected_amp = codebook.gain(0.0) / 4
    expected_phase = 4 * np.pi * small_radio.f_o * 2.0 / speed_of_light
    assert np.allclose(np.abs(h[tap]), expected_amp)
    assert np.allclose(h[tap], expected_amp * np.exp(1j * expected_phase))


def test_occlusion(ap, codebook):
    """ A person between the AP and another person hides the second one """
    radio = RadioConfig(l=96)
    front = Subject(0, [(1.5, 3.85, 0.0)], activity="sitting")
    back = Subject(1, [(3.0, 3.85, 0.0)], activity="sitting")
    scene = Scene(ROOM, [front, back], aps=[ap])
    h = noiseless_channel(scene, 0, codebook, radio, 0.0)
    far = int(np.rint(3.0 / radio.tap_spacing))
    near = int(np.rint(1.5 / radio.tap_spacing))
    assert np.all(h[far - 3 : far + 4] == 0)
    assert np.any(h[near] != 0)

    alone = noiseless_channel(scene.without([0]), 0, codebook, radio, 0.0)
    assert np.any(alone[far] != 0)


def test_frames_are_deterministic(walker_scene, codebook, small_radio):
    a = synth_cir_frame(walker_scene, 0, codebook, small_radio, 10, 7)
    b = synth_cir_frame(walker_scene, 0, codebook, small_radio, 10, 7)
    c = synth_cir_frame(walker_scene, 0, codebook, small_radio, 10, 8)
    assert a.k == 10
    assert np.array_equal(a.h, b.h)
    assert not np.array_equal(a.h, c.h)
    with pytest.raises(ValueError):
        synth_cir_frame(walker_scene, 1, codebook, small_radio, 10, 7)


def test_cfo_per_capture(ap):
    scene = Scene(ROOM, aps=[ap], cfo_range_hz=40.0)
    cfo = capture_cfo(scene, 0, 5)
    assert -40 <= cfo <= 40
    assert cfo == capture_cfo(scene, 0, 5)
    assert capture_cfo(Scene(ROOM, aps=[ap], cfo_range_hz=0), 0, 5) == 0


def test_cfo_rotation(ap, codebook, small_radio):
    """ Without noise the CFO only rotates the phase of a static scene """
    scene = Scene(ROOM, [point(0, 2.0, 3.85)], aps=[ap], cfo_range_hz=40.0)
    h0 = synth_cir_frame(scene, 0, codebook, small_radio, 0, 1).h
    h1 = synth_cir_frame(scene, 0, codebook, small_radio, 100, 1).h
    assert np.allclose(np.abs(h0), np.abs(h1))
    cfo = capture_cfo(scene, 0, 1)
    tap = int(np.rint(2.0 / small_radio.tap_spacing))
    rotation = h1[tap, 0] / h0[tap, 0]
    assert np.isclose(rotation, np.exp(2j * np.pi * cfo * 100 * small_radio.t_c))


def test_background_frames(ap, codebook, small_radio):
    scene = Scene(
        ROOM,
        [point(0, 2.0, 3.85)],
        [Reflector([1.0, 3.0], 0.5)],
        aps=[ap],
        noise_std=0.0,
    )
    frames = synth_background_frames(scene, 0, codebook, small_radio, 4, 0)
    static = noiseless_channel(scene.empty(), 0, codebook, small_radio, 0.0)
    assert frames.shape == (4, 64, 12)
    assert np.allclose(np.abs(frames), np.abs(static)[None])
    person = int(np.rint(2.0 / small_radio.tap_spacing))
    assert np.all(frames[:, person] == 0)
    with pytest.raises(ValueError):
        synth_background_frames(scene, 0, codebook, small_radio, 0, 0)


def test_scene_frames(walker_scene, codebook, small_radio):
    frames = SceneFrames(walker_scene, 0, codebook, small_radio, 3, n_frames=40, cache_size=8)
    assert len(frames) == 40
    assert frames.shape == (40, 64, 12)
    block = frames[5:9]
    assert block.shape == (4, 64, 12)
    assert np.array_equal(block[2], frames[7])
    assert np.array_equal(frames[-1], frames[39])
    assert np.array_equal(frames[7], synth_cir_frame(walker_scene, 0, codebook, small_radio, 7, 3).h)
    with pytest.raises(IndexError):
        frames[40]


def test_radial_velocity(ap):
    """ A torso walking straight away from the AP at 1 m/s """
    subject = Subject(0, [(1.0, 3.85, 0.0), (3.0, 3.85, 2.0)])
    scene = Scene(ROOM, [subject], aps=[ap])
    (step,) = scene_step(scene, 100)
    assert step.radial_velocities.shape == (1, 5)
    assert np.isclose(step.radial_velocities[0, 0], 1.0)
    assert np.allclose(step.positions[0], subject.position(100 * 0.27e-3))
    with pytest.raises(ValueError):
        scene_step(scene, -1)


def test_ground_truth(walker_scene):
    ((subject_id, position, activity),) = ground_truth(walker_scene, 0)
    assert subject_id == 0
    assert np.allclose(position, [1.5, 3.6])
    assert activity == "walking"


def test_load_scene(tmp_path):
    filename = tmp_path / "scene.yaml"
    filename.write_text(
        "room: [6.1, 7.7]\n"
        "duration: 2.0\n"
        "seed: 4\n"
        "noise_std: 1e-3\n"
        "aps:\n"
        "  - {id: 0, position: [0.0, 3.85], boresight: 0}\n"
        "  - {id: 1, position: [3.05, 0.0], boresight: 90}\n"
        "reflectors:\n"
        "  - {position: [6.0, 1.0], reflectivity: 0.3}\n"
        "subjects:\n"
        "  - id: 0\n"
        "    waypoints: [[1.5, 3.0, 0.0], [4.5, 3.0, 2.0]]\n"
        "    activities: [[0.0, walking], [1.0, waving]]\n"
        "  - id: 1\n"
        "    waypoints: [[3.0, 5.5, 0.0]]\n"
        "    activity: sitting\n"
        "    gait: {frequency_scale: 1.1}\n"
    )
    scene = load_scene(str(filename))
    assert scene.seed == 4
    assert scene.noise_std == 1e-3
    assert [ap.id for ap in scene.aps] == [0, 1]
    assert scene.aps[1].boresight == 90.0
    assert len(scene.reflectors) == 1
    assert scene.subjects[0].activity_at(1.5) == "waving"
    assert scene.subjects[1].activity == "sitting"
    assert scene.subjects[1].gait.frequency_scale == 1.1


def test_load_scene_errors(tmp_path):
    filename = tmp_path / "scene.yaml"
    filename.write_text("room: [6.1, 7.7]\nduration: 2.0\n")
    with pytest.raises(SchemaError, match="aps"):
        load_scene(str(filename))

    filename.write_text(
        "room: [6.1, 7.7]\n"
        "duration: 2.0\n"
        "aps: [{id: 0, position: [0.0, 3.85]}]\n"
        "subjects:\n"
        "  - id: 0\n"
        "    waypoints: [[1.5, 3.0, 0.0]]\n"
        "    activity: dancing\n"
    )
    with pytest.raises(SchemaError, match=r"scene.yaml:5: .*dancing"):
        load_scene(str(filename))

    filename.write_text("room: [6.1, 7.7]\nduration: 2.0\naps: []\nfurniture: 1\n")
    with pytest.raises(SchemaError, match=r":4: unknown key 'furniture'"):
        load_scene(str(filename))
