"""
Scene simulator

Synthesizes the CIR frames an AP would estimate while people move through
a room, following the per-path amplitude and phase model

    h[l, p](k) = a[l, p](k) * exp(j phi_l(k))

Every scatterer adds one return at the tap nearest its distance. Its
amplitude follows the beam pattern gain at its azimuth and the free space
loss, its phase advances with the radial distance so that reflectors moving
away from the AP have positive Doppler.
"""

import hashlib
import logging
from collections import OrderedDict

import numpy as np
from scipy.constants import speed_of_light

from .config import SchemaError, check_keys, config_from_section, load_yaml, require, schema_error
from .structures import ApRegistration, RadioConfig
from .util import rng_stream, wrap_degrees
from .waveform import CirFrame

#:tuple: supported activities, in label order
ACTIVITIES = ("walking", "running", "sitting", "waving")

#:float: radius of the disc that blocks the line of sight in m
OCCLUSION_RADIUS = 0.3
#:float: distance below which the path loss stays constant in m
MIN_RANGE = 0.5
#:float: maximum oscillation speed of a body part in m/s
MAX_PART_SPEED = 4.5
#:float: gain of the beam patterns outside of their mainlobe
SIDELOBE_FLOOR = 0.05


class BeamPattern:
    """ Normalized gain of one beam pattern over the azimuth grid """

    def __init__(self, gains, grid):
        gains = np.asarray(gains, dtype=float)
        grid = np.asarray(grid, dtype=float)
        if gains.shape != grid.shape or gains.ndim != 1:
            raise ValueError(f"Gains {gains.shape} and grid {grid.shape} must be 1-D and match")
        if np.any(gains < 0) or np.any(gains > 1):
            raise ValueError("Beam pattern gains must be in [0, 1]")
        if not np.isclose(gains.max(), 1):
            raise ValueError(f"Beam pattern must be normalized to a maximum of 1, got {gains.max()}")
        #:array: gain at each grid angle
        self.gains = gains
        #:array: azimuth grid in degrees
        self.grid = grid

    def gain(self, theta):
        """ Gain at arbitrary angles, 0 outside of the grid """
        return np.interp(theta, self.grid, self.gains, left=0, right=0)


class Codebook:
    """ The N_p beam patterns of one AP and their steering angles """

    def __init__(self, patterns, steering_angles):
        steering_angles = np.asarray(steering_angles, dtype=float)
        if len(patterns) != steering_angles.size:
            raise ValueError(
                f"Got {len(patterns)} patterns but {steering_angles.size} steering angles"
            )
        if np.any(np.diff(steering_angles) <= 0):
            raise ValueError("Steering angles must be strictly increasing")
        grid = patterns[0].grid
        if any(not np.array_equal(p.grid, grid) for p in patterns):
            raise ValueError("All beam patterns must share the same angle grid")
        if steering_angles[0] < grid[0] or steering_angles[-1] > grid[-1]:
            raise ValueError("Steering angles must lie inside the field of view")

        self.patterns = list(patterns)
        self.steering_angles = steering_angles
        #:array of size (N_p, n_grid): gains of all patterns
        self.gains = np.stack([p.gains for p in patterns])

    def __len__(self):
        return len(self.patterns)

    @property
    def n_p(self):
        return len(self.patterns)

    @property
    def grid(self):
        """array: azimuth grid in degrees """
        return self.patterns[0].grid

    @property
    def fov(self):
        """tuple: first and last angle of the grid """
        return self.grid[0], self.grid[-1]

    @property
    def hash(self):
        """str: md5 hash of the steering angles and gains """
        m = hashlib.md5()
        m.update(np.ascontiguousarray(self.steering_angles, dtype="<f8").tobytes())
        m.update(np.ascontiguousarray(self.grid, dtype="<f8").tobytes())
        m.update(np.ascontiguousarray(self.gains, dtype="<f8").tobytes())
        return m.hexdigest()

    def gain(self, theta):
        """
        Gains of all patterns at the given angles

        Parameters
        ----------
        theta : float or array
            azimuth in degrees relative to the boresight

        Returns
        -------
        gains : array of shape (..., N_p)
            linear interpolation of the patterns, 0 outside of the grid
        """
        theta = np.asarray(theta, dtype=float)
        return np.stack([p.gain(theta) for p in self.patterns], axis=-1)


def synth_codebook(n_p, fov=90.0, beamwidth=15.0, grid_step=0.5):
    """
    Create a codebook of raised cosine beams

    The steering angles are spread uniformly over the field of view. Each
    pattern has a raised cosine mainlobe that reaches the sidelobe floor of
    0.05 at beamwidth degrees from its steering angle, i.e. beamwidth is
    the width at half maximum.

    Parameters
    ----------
    n_p : int
        number of patterns, at least 2
    fov : float, optional
        span of the steering angles in degrees, centered on the boresight
        (default: 90)
    beamwidth : float, optional
        mainlobe width in degrees (default: 15)
    grid_step : float, optional
        spacing of the angle grid in degrees (default: 0.5)

    Returns
    -------
    codebook : Codebook
    """
    if n_p < 2:
        raise ValueError(f"A codebook needs at least 2 beam patterns, got {n_p}")
    if beamwidth <= 0 or fov <= 0 or grid_step <= 0:
        raise ValueError(
            f"fov, beamwidth and grid_step must be positive, got {fov}, {beamwidth}, {grid_step}"
        )

    n_grid = int(round(fov / grid_step)) + 1
    grid = np.linspace(-fov / 2, fov / 2, n_grid)
    steering = np.linspace(-fov / 2, fov / 2, n_p)

    patterns = []
    for angle in steering:
        offset = np.abs(grid - angle)
        lobe = 0.5 * (1 + np.cos(np.pi * np.minimum(offset, beamwidth) / beamwidth))
        gains = SIDELOBE_FLOOR + (1 - SIDELOBE_FLOOR) * lobe
        patterns.append(BeamPattern(gains / gains.max(), grid))
    return Codebook(patterns, steering)


class Scatterer:
    """ A point reflector on a person's body """

    def __init__(
        self,
        offset,
        reflectivity,
        role="torso",
        amplitude=0.0,
        frequency=0.0,
        phase=0.0,
        intermittent=False,
    ):
        if reflectivity < 0:
            raise ValueError(f"Reflectivity must be >= 0, got {reflectivity}")
        if role not in ["torso", "limb"]:
            raise ValueError(f"Expected one of ['torso', 'limb'] got {role}")
        if abs(amplitude) > MAX_PART_SPEED:
            raise ValueError(
                f"Oscillation amplitude {amplitude} m/s exceeds the limit of {MAX_PART_SPEED} m/s"
            )
        if frequency < 0:
            raise ValueError(f"Oscillation frequency must be >= 0, got {frequency}")
        #:array: offset from the torso position in m
        self.offset = np.asarray(offset, dtype=float)
        #:float: amplitude reflection coefficient
        self.reflectivity = float(reflectivity)
        #:str: torso or limb
        self.role = role
        #:float: peak radial speed of the oscillation in m/s
        self.amplitude = float(amplitude)
        #:float: oscillation frequency in Hz
        self.frequency = float(frequency)
        #:float: oscillation phase in rad
        self.phase = float(phase)
        #:bool: oscillate only during every other period
        self.intermittent = bool(intermittent)


class Gait:
    """ Person specific scaling of the body model, used for identification """

    def __init__(self, frequency_scale=1.0, amplitude_scale=1.0, reflectivity_scale=1.0):
        for name, value in [
            ("frequency_scale", frequency_scale),
            ("amplitude_scale", amplitude_scale),
            ("reflectivity_scale", reflectivity_scale),
        ]:
            if value <= 0:
                raise ValueError(f"{name} must be positive, got {value}")
        self.frequency_scale = float(frequency_scale)
        self.amplitude_scale = float(amplitude_scale)
        self.reflectivity_scale = float(reflectivity_scale)


def body_model(activity, gait=None):
    """
    The five scatterers (torso and four limbs) of a person

    Near side limbs reflect more than far side limbs, which are partly
    shadowed by the body. Limbs on the same side swing in anti phase.

    Parameters
    ----------
    activity : str
        one of ACTIVITIES
    gait : Gait, optional
        person specific scaling

    Returns
    -------
    scatterers : list of Scatterer
    """
    if gait is None:
        gait = Gait()
    fs, ams, rs = gait.frequency_scale, gait.amplitude_scale, gait.reflectivity_scale

    # offset, reflectivity of torso, near leg, far leg, near arm, far arm
    layout = [
        ((0.0, 0.0), 0.5),
        ((0.03, 0.0), 0.15),
        ((-0.03, 0.0), 0.08),
        ((0.0, 0.03), 0.08),
        ((0.0, -0.03), 0.04),
    ]

    if activity == "walking":
        f, legs, arms = 1.5, 3.0, 2.0
        motion = [(0, 0, 0), (legs, f, 0), (legs, f, np.pi), (arms, f, np.pi), (arms, f, 0)]
        intermittent = False
    elif activity == "running":
        f, legs, arms = 2.5, 4.0, 3.5
        motion = [(0, 0, 0), (legs, f, 0), (legs, f, np.pi), (arms, f, np.pi), (arms, f, 0)]
        intermittent = False
    elif activity == "sitting":
        # the whole body bobs while sitting down and standing up
        motion = [(0.3, 0.5, 0)] * 5
        intermittent = True
    elif activity == "waving":
        f, arms = 1.2, 2.0
        motion = [(0, 0, 0), (0, 0, 0), (0, 0, 0), (arms, f, 0), (arms, f, np.pi)]
        intermittent = False
    else:
        raise ValueError(f"Expected one of {list(ACTIVITIES)} got {activity}")

    scatterers = []
    for i, ((offset, refl), (amp, freq, phase)) in enumerate(zip(layout, motion)):
        scatterers.append(
            Scatterer(
                offset,
                refl * rs,
                role="torso" if i == 0 else "limb",
                amplitude=min(amp * ams, MAX_PART_SPEED),
                frequency=freq * fs,
                phase=phase,
                intermittent=intermittent,
            )
        )
    return scatterers


class _Body:
    """ The scatterers of one body model as arrays """

    def __init__(self, scatterers):
        self.offsets = np.array([s.offset for s in scatterers]).reshape(-1, 2)
        self.reflectivity = np.array([s.reflectivity for s in scatterers])
        self.amplitude = np.array([s.amplitude for s in scatterers])
        self.frequency = np.array([s.frequency for s in scatterers])
        self.phase = np.array([s.phase for s in scatterers])
        self.intermittent = np.array([s.intermittent for s in scatterers], dtype=bool)

    def oscillation(self, t):
        """
        Radial displacement and velocity caused by the body part oscillations

        The velocity is amplitude * sin(2 pi f t + phase), the displacement its
        integral. Intermittent parts move during every other period only.
        """
        moving = (self.amplitude != 0) & (self.frequency > 0)
        freq = np.where(moving, self.frequency, 1.0)
        period = 1 / freq
        tau = np.where(self.intermittent, np.mod(t, 2 * period), t)
        active = moving & (~self.intermittent | (tau < period))
        omega = 2 * np.pi * freq
        arg = omega * tau + self.phase
        velocity = np.where(active, self.amplitude * np.sin(arg), 0.0)
        displacement = np.where(
            active, self.amplitude * (np.cos(self.phase) - np.cos(arg)) / omega, 0.0
        )
        return displacement, velocity


class Subject:
    """ A person moving through the scene """

    def __init__(self, id, waypoints, activity="walking", activities=None, gait=None, scatterers=None):
        """
        Parameters
        ----------
        id : int
            subject id
        waypoints : array of shape (n, 3)
            x, y in m and time in s of each waypoint
        activity : str, optional
            activity for the whole scene (default: "walking")
        activities : list of (float, str), optional
            activity schedule of (start time, activity), overrides activity
        gait : Gait, optional
            person specific body model scaling
        scatterers : list of Scatterer, optional
            explicit scatterers used instead of the body model
        """
        waypoints = np.atleast_2d(np.asarray(waypoints, dtype=float))
        if waypoints.ndim != 2 or waypoints.shape[1] != 3 or waypoints.shape[0] == 0:
            raise ValueError(f"Waypoints must be a list of (x, y, t), got shape {waypoints.shape}")
        if np.any(np.diff(waypoints[:, 2]) <= 0):
            raise ValueError(f"Waypoint times of subject {id} must be strictly increasing")

        if activities is None:
            activities = [(0.0, activity)]
        schedule = sorted((float(t), a) for t, a in activities)
        for _, a in schedule:
            if a not in ACTIVITIES:
                raise ValueError(f"Expected one of {list(ACTIVITIES)} got {a}")
        if len({t for t, _ in schedule}) != len(schedule):
            raise ValueError(f"Activity start times of subject {id} must be unique")

        self.id = int(id)
        self.waypoints = waypoints
        self.schedule = schedule
        self.gait = gait if gait is not None else Gait()
        self._scatterers = scatterers
        self._bodies = {}

    @property
    def activity(self):
        """str: activity at the start of the scene """
        return self.schedule[0][1]

    @property
    def scatterers(self):
        """list: scatterers at the start of the scene """
        return self.scatterers_at(0.0)

    def activity_at(self, t):
        current = self.schedule[0][1]
        for start, activity in self.schedule:
            if start <= t:
                current = activity
        return current

    def scatterers_at(self, t):
        if self._scatterers is not None:
            return self._scatterers
        return body_model(self.activity_at(t), self.gait)

    def body_at(self, t):
        key = "explicit" if self._scatterers is not None else self.activity_at(t)
        if key not in self._bodies:
            self._bodies[key] = _Body(self.scatterers_at(t))
        return self._bodies[key]

    def position(self, t):
        """ Torso position at time t, held outside of the trajectory """
        times = self.waypoints[:, 2]
        x = np.interp(t, times, self.waypoints[:, 0])
        y = np.interp(t, times, self.waypoints[:, 1])
        return np.array([x, y])

    def velocity(self, t):
        """ Torso velocity at time t, zero outside of the trajectory """
        times = self.waypoints[:, 2]
        if t < times[0] or t >= times[-1]:
            return np.zeros(2)
        i = np.searchsorted(times, t, side="right") - 1
        delta = self.waypoints[i + 1] - self.waypoints[i]
        return delta[:2] / delta[2]


class Reflector:
    """ A static reflector, e.g. furniture """

    def __init__(self, position, reflectivity):
        if reflectivity < 0:
            raise ValueError(f"Reflectivity must be >= 0, got {reflectivity}")
        self.position = np.asarray(position, dtype=float)
        self.reflectivity = float(reflectivity)


class Scene:
    """ Room, people, static reflectors and APs """

    def __init__(
        self,
        room,
        subjects=(),
        reflectors=(),
        aps=(),
        noise_std=0.0,
        cfo_range_hz=40.0,
        duration=1.0,
        seed=0,
    ):
        room = np.asarray(room, dtype=float)
        if room.shape != (2,) or np.any(room <= 0):
            raise ValueError(f"Room must be given as positive (width, depth), got {room}")
        if noise_std < 0:
            raise ValueError(f"noise_std must be >= 0, got {noise_std}")
        if cfo_range_hz < 0:
            raise ValueError(f"cfo_range_hz must be >= 0, got {cfo_range_hz}")
        if duration <= 0:
            raise ValueError(f"Scene duration must be positive, got {duration}")

        aps = [ap if isinstance(ap, ApRegistration) else ApRegistration(**ap) for ap in aps]
        for ap in aps:
            if not self._inside(room, ap.position):
                raise ValueError(f"AP {ap.id} at {ap.position} is outside of the room {room}")
        ids = [s.id for s in subjects]
        if len(set(ids)) != len(ids):
            raise ValueError(f"Subject ids must be unique, got {ids}")
        for subject in subjects:
            if not all(self._inside(room, w[:2]) for w in subject.waypoints):
                raise ValueError(f"Waypoints of subject {subject.id} leave the room {room}")
        for reflector in reflectors:
            if not self._inside(room, reflector.position):
                raise ValueError(f"Reflector at {reflector.position} is outside of the room {room}")

        self.room = room
        self.subjects = list(subjects)
        self.reflectors = list(reflectors)
        self.aps = aps
        self.noise_std = float(noise_std)
        self.cfo_range_hz = float(cfo_range_hz)
        self.duration = float(duration)
        self.seed = int(seed)

    @staticmethod
    def _inside(room, position, tol=1e-9):
        x, y = position
        return -tol <= x <= room[0] + tol and -tol <= y <= room[1] + tol

    def n_frames(self, cfg):
        """ Number of packets in the scene, duration / T_c rounded down """
        return int(np.floor(self.duration / cfg.t_c + 1e-9))

    def without(self, subject_ids):
        """ Copy of the scene with some subjects removed """
        subject_ids = set(subject_ids)
        subjects = [s for s in self.subjects if s.id not in subject_ids]
        return Scene(
            self.room,
            subjects,
            self.reflectors,
            self.aps,
            self.noise_std,
            self.cfo_range_hz,
            self.duration,
            self.seed,
        )

    def empty(self):
        """ Copy of the scene without any subjects """
        return self.without([s.id for s in self.subjects])


class SubjectStep:
    """ Scatterer positions and radial velocities of one subject at one packet """

    def __init__(self, id, positions, radial_velocities):
        #:int: subject id
        self.id = id
        #:array of shape (n_scatterers, 2): world positions in m
        self.positions = positions
        #:array of shape (n_aps, n_scatterers): radial velocity seen by each AP in m/s
        self.radial_velocities = radial_velocities


def scene_step(scene, k, t_c=RadioConfig._defaults["t_c"]):
    """
    Kinematic state of all subjects at packet k

    Parameters
    ----------
    scene : Scene
        the scene
    k : int
        packet index, >= 0
    t_c : float, optional
        packet interval in s

    Returns
    -------
    steps : list of SubjectStep
        radial velocities are positive for scatterers moving away from the AP
    """
    if k < 0:
        raise ValueError(f"Packet index must be >= 0, got {k}")
    t = k * t_c
    steps = []
    for subject in scene.subjects:
        body = subject.body_at(t)
        positions = subject.position(t) + body.offsets
        velocity = subject.velocity(t)
        _, oscillation = body.oscillation(t)
        radial = np.zeros((len(scene.aps), len(positions)))
        for a, ap in enumerate(scene.aps):
            rel = positions - np.asarray(ap.position)
            distance = np.hypot(rel[:, 0], rel[:, 1])
            unit = rel / np.maximum(distance, 1e-12)[:, None]
            radial[a] = unit @ velocity + oscillation
        steps.append(SubjectStep(subject.id, positions, radial))
    return steps


def ground_truth(scene, k, t_c=RadioConfig._defaults["t_c"]):
    """
    Torso positions and activities of all subjects at packet k

    Returns
    -------
    truth : list of (int, array, str)
        subject id, torso position, activity
    """
    t = k * t_c
    return [(s.id, s.position(t), s.activity_at(t)) for s in scene.subjects]


def _scatterers(scene, t):
    """ Positions, reflectivities, owner index and displacement of all scatterers at time t """
    positions, reflectivity, owner, displacement = [], [], [], []
    for reflector in scene.reflectors:
        positions.append(reflector.position[None, :])
        reflectivity.append([reflector.reflectivity])
        owner.append([-1])
        displacement.append([0.0])
    for index, subject in enumerate(scene.subjects):
        body = subject.body_at(t)
        positions.append(subject.position(t) + body.offsets)
        reflectivity.append(body.reflectivity)
        owner.append(np.full(len(body.offsets), index))
        displacement.append(body.oscillation(t)[0])
    if len(positions) == 0:
        return np.zeros((0, 2)), np.zeros(0), np.zeros(0, int), np.zeros(0)
    return (
        np.concatenate(positions),
        np.concatenate(reflectivity),
        np.concatenate(owner),
        np.concatenate(displacement),
    )


def _occluded(origin, positions, owner, bodies):
    """ True for scatterers whose line of sight passes through another subject """
    if len(bodies) == 0 or len(positions) == 0:
        return np.zeros(len(positions), dtype=bool)
    d = positions - origin
    w = bodies - origin
    length = np.maximum(np.sum(d * d, axis=1), 1e-12)
    s = np.clip((d @ w.T) / length[:, None], 0, 1)
    closest = origin + s[:, :, None] * d[:, None, :]
    distance = np.linalg.norm(bodies[None, :, :] - closest, axis=2)
    distance[np.arange(len(positions)), np.clip(owner, 0, None)] = np.where(
        owner >= 0, np.inf, distance[np.arange(len(positions)), np.clip(owner, 0, None)]
    )
    return np.any(distance < OCCLUSION_RADIUS, axis=1)


def noiseless_channel(scene, ap_index, codebook, cfg, t):
    """
    Noise and CFO free CIR of one AP at time t

    Returns
    -------
    h : array of complex of shape (L, N_p)
    """
    ap = scene.aps[ap_index]
    origin = np.asarray(ap.position)
    h = np.zeros((cfg.l, cfg.n_p), dtype=complex)

    positions, reflectivity, owner, displacement = _scatterers(scene, t)
    if len(positions) == 0:
        return h
    bodies = np.array([s.position(t) for s in scene.subjects]).reshape(-1, 2)

    rel = positions - origin
    distance = np.hypot(rel[:, 0], rel[:, 1])
    theta = wrap_degrees(np.rad2deg(np.arctan2(rel[:, 1], rel[:, 0])) - ap.boresight)
    tap = np.rint(distance / cfg.tap_spacing).astype(int)
    keep = (tap < cfg.l) & (reflectivity > 0) & ~_occluded(origin, positions, owner, bodies)
    if not np.any(keep):
        return h

    gains = codebook.gain(theta[keep])
    loss = 1 / np.maximum(distance[keep], MIN_RANGE) ** 2
    amplitude = reflectivity[keep, None] * gains * loss[:, None]
    phase = 4 * np.pi * cfg.f_o * (distance[keep] + displacement[keep]) / speed_of_light
    np.add.at(h, tap[keep], amplitude * np.exp(1j * phase)[:, None])
    return h


def capture_cfo(scene, ap_index, seed):
    """ Carrier frequency offset of one capture, uniform in +- cfo_range_hz """
    if scene.cfo_range_hz == 0:
        return 0.0
    return float(rng_stream(seed, ap_index).uniform(-scene.cfo_range_hz, scene.cfo_range_hz))


def _impair(h, scene, ap_index, cfg, k, seed, stream):
    rng = rng_stream(seed, ap_index, k, *stream)
    if scene.noise_std > 0:
        noise = rng.normal(0, scene.noise_std, size=h.shape + (2,))
        h = h + noise[..., 0] + 1j * noise[..., 1]
    cfo = capture_cfo(scene, ap_index, seed)
    if cfo != 0:
        h = h * np.exp(2j * np.pi * cfo * k * cfg.t_c)
    return h


def synth_cir_frame(scene, ap_index, codebook, cfg, k, rng_seed):
    """
    Synthesize the CIR frame of one AP at packet k

    Parameters
    ----------
    scene : Scene
        the scene
    ap_index : int
        index of the AP in scene.aps
    codebook : Codebook
        beam patterns of the AP
    cfg : RadioConfig
        radio parameters
    k : int
        packet index
    rng_seed : int
        root seed, noise of frame k uses the stream (seed, ap_index, k)

    Returns
    -------
    frame : CirFrame
    """
    if not 0 <= ap_index < len(scene.aps):
        raise ValueError(f"AP index {ap_index} out of range for {len(scene.aps)} APs")
    if codebook.n_p != cfg.n_p:
        raise ValueError(f"Codebook has {codebook.n_p} patterns, configuration {cfg.n_p}")
    h = noiseless_channel(scene, ap_index, codebook, cfg, k * cfg.t_c)
    h = _impair(h, scene, ap_index, cfg, k, rng_seed, ())
    return CirFrame(k, h)


def synth_background_frames(scene, ap_index, codebook, cfg, count, seed):
    """
    Empty room calibration frames of one AP

    The subjects are removed from the scene; noise comes from the
    streams (seed, ap_index, k, 1).

    Returns
    -------
    frames : array of complex of shape (count, L, N_p)
    """
    if count < 1:
        raise ValueError(f"Need at least one calibration frame, got {count}")
    empty = scene.empty()
    static = noiseless_channel(empty, ap_index, codebook, cfg, 0.0)
    frames = np.empty((count, cfg.l, cfg.n_p), dtype=complex)
    for k in range(count):
        frames[k] = _impair(static, empty, ap_index, cfg, k, seed, (1,))
    return frames


class SceneFrames:
    """
    Lazily synthesized frame stream of one AP

    Behaves like a read only array of shape (n_frames, L, N_p): integer
    indices return one frame, slices a stacked array. Recent frames are
    cached, since STFT windows overlap.
    """

    def __init__(self, scene, ap_index, codebook, cfg, seed, n_frames=None, cache_size=512):
        self.scene = scene
        self.ap_index = ap_index
        self.codebook = codebook
        self.cfg = cfg
        self.seed = seed
        self.n_frames = scene.n_frames(cfg) if n_frames is None else int(n_frames)
        self.cache_size = cache_size
        self._cache = OrderedDict()
        logging.debug(
            "Frame source for AP %i with %i frames of (%i, %i)",
            ap_index,
            self.n_frames,
            cfg.l,
            cfg.n_p,
        )

    def __len__(self):
        return self.n_frames

    @property
    def shape(self):
        return (self.n_frames, self.cfg.l, self.cfg.n_p)

    def _frame(self, k):
        if k in self._cache:
            self._cache.move_to_end(k)
            return self._cache[k]
        h = synth_cir_frame(self.scene, self.ap_index, self.codebook, self.cfg, k, self.seed).h
        self._cache[k] = h
        if len(self._cache) > self.cache_size:
            self._cache.popitem(last=False)
        return h

    def __getitem__(self, key):
        if isinstance(key, slice):
            indices = range(*key.indices(self.n_frames))
            frames = np.empty((len(indices), self.cfg.l, self.cfg.n_p), dtype=complex)
            for i, k in enumerate(indices):
                frames[i] = self._frame(k)
            return frames
        k = int(key)
        if k < 0:
            k += self.n_frames
        if not 0 <= k < self.n_frames:
            raise IndexError(f"Frame {key} out of range for {self.n_frames} frames")
        return self._frame(k)


def _load_gait(filename, entry):
    if entry is None:
        return None
    check_keys(filename, entry, ["frequency_scale", "amplitude_scale", "reflectivity_scale"])
    try:
        return Gait(**entry)
    except (TypeError, ValueError) as ex:
        raise SchemaError(f"{filename}:{entry.line}: {ex}")


def _load_subject(filename, entry):
    check_keys(filename, entry, ["id", "waypoints", "activity", "activities", "gait"])
    subject_id = require(filename, entry, "id", int)
    waypoints = require(filename, entry, "waypoints", list)
    for point in waypoints:
        if not isinstance(point, list) or len(point) != 3:
            raise schema_error(
                filename, entry, "waypoints", f"waypoints must be [x, y, t] triples, got {point!r}"
            )
    activities = entry.get("activities")
    if activities is not None:
        if not isinstance(activities, list) or not all(
            isinstance(a, list) and len(a) == 2 for a in activities
        ):
            raise schema_error(
                filename, entry, "activities", "activities must be a list of [start, activity]"
            )
    try:
        return Subject(
            subject_id,
            waypoints,
            activity=entry.get("activity", "walking"),
            activities=activities,
            gait=_load_gait(filename, entry.get("gait")),
        )
    except (TypeError, ValueError) as ex:
        raise SchemaError(f"{filename}:{entry.line}: {ex}")


def load_scene(filename):
    """
    Load a scene description

    The YAML document has the keys
        room:              [width, depth] in m, the room spans [0, width] x [0, depth]
        duration:          length of the scene in s
        seed:              root seed (optional, default 0)
        noise_std:         noise std per real and imaginary part in V (optional)
        cfo_range_hz:      CFO bound in Hz (optional, default 40)
        aps:               list of {id, position, boresight}
        reflectors:        list of {position, reflectivity} (optional)
        subjects:          list of {id, waypoints: [[x, y, t], ...],
                           activity or activities: [[start, activity], ...],
                           gait: {frequency_scale, amplitude_scale, reflectivity_scale}}

    Parameters
    ----------
    filename : str
        scene file

    Returns
    -------
    scene : Scene

    Raises
    ------
    SchemaError
        with the offending line if the document is invalid
    """
    data = load_yaml(filename)
    check_keys(
        filename,
        data,
        ["room", "duration", "seed", "noise_std", "cfo_range_hz", "aps", "reflectors", "subjects"],
    )
    room = require(filename, data, "room", list)
    duration = require(filename, data, "duration", float)
    aps = require(filename, data, "aps", list)
    if len(aps) == 0:
        raise schema_error(filename, data, "aps", "a scene needs at least one AP")
    aps = [config_from_section(ApRegistration, filename, ap) for ap in aps]

    reflectors = []
    for entry in data.get("reflectors", None) or []:
        check_keys(filename, entry, ["position", "reflectivity"])
        try:
            reflectors.append(
                Reflector(
                    require(filename, entry, "position", list),
                    require(filename, entry, "reflectivity", float),
                )
            )
        except ValueError as ex:
            raise SchemaError(f"{filename}:{entry.line}: {ex}")

    subjects = [_load_subject(filename, e) for e in data.get("subjects", None) or []]

    for key, kind in [("seed", int), ("noise_std", float), ("cfo_range_hz", float)]:
        if key in data:
            require(filename, data, key, kind)
    try:
        return Scene(
            room,
            subjects,
            reflectors,
            aps,
            noise_std=data.get("noise_std", 0.0),
            cfo_range_hz=data.get("cfo_range_hz", 40.0),
            duration=duration,
            seed=data.get("seed", 0),
        )
    except ValueError as ex:
        raise SchemaError(f"{filename}:{data.line}: {ex}")
