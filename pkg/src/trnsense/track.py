"""
Multi target tracking of the candidates of one AP

Each person is tracked by an extended Kalman filter with a constant
velocity model in the AP-local cartesian frame (x along the boresight).
The observations are the range and azimuth of the detected paths,
associated to the tracks by a gated global nearest neighbour assignment.
"""

import copy
import logging

import numpy as np
from scipy.optimize import linear_sum_assignment

from .structures import TrackerConfig
from .util import wrap_degrees

#:float: ranges below this value are treated as the singular point of the polar model
MIN_RANGE = 1e-6

TENTATIVE = "tentative"
CONFIRMED = "confirmed"
DEAD = "dead"


class TrackingError(ValueError):
    """ The measurement model can not be linearized at the given state """


class Observation:
    """ Range and azimuth of one candidate at one tracking step """

    def __init__(self, d, theta, t=0):
        if d < 0:
            raise ValueError(f"Observed range must be >= 0, got {d}")
        #:float: range in m
        self.d = float(d)
        #:float: azimuth in degrees relative to the boresight
        self.theta = float(theta)
        #:int: tracking step
        self.t = int(t)

    @property
    def z(self):
        """array: measurement vector [d, theta] """
        return np.array([self.d, self.theta])

    def to_cartesian(self):
        """array: AP-local position [x, y] in m """
        phi = np.deg2rad(self.theta)
        return np.array([self.d * np.cos(phi), self.d * np.sin(phi)])

    def __repr__(self):
        return f"Observation(d={self.d:.3f}, theta={self.theta:.2f}, t={self.t})"


class TrackState:
    """ EKF state [x, y, vx, vy] and its covariance """

    def __init__(self, x, P):
        x = np.asarray(x, dtype=float)
        P = np.asarray(P, dtype=float)
        if x.shape != (4,) or P.shape != (4, 4):
            raise ValueError(f"Expected a state of shape (4,) and covariance (4, 4), got {x.shape}, {P.shape}")
        self.x = x
        self.P = P

    @property
    def position(self):
        return self.x[:2]

    @property
    def velocity(self):
        return self.x[2:]

    def is_valid(self):
        """ True if P is symmetric and positive semi-definite """
        if not np.allclose(self.P, self.P.T):
            return False
        try:
            np.linalg.cholesky(self.P + 1e-12 * np.eye(4))
        except np.linalg.LinAlgError:
            return False
        return True


class Track:
    """ One person tracked over time """

    def __init__(self, id, state, t=0):
        self.id = int(id)
        self.state = state
        #:int: consecutive updates
        self.hits = 1
        #:int: consecutive misses
        self.misses = 0
        self.status = TENTATIVE
        #:int: tracking step of the last predict or update
        self.t = int(t)
        #:int: step of the track birth
        self.born = int(t)

    @property
    def x(self):
        return self.state.x

    @property
    def P(self):
        return self.state.P

    @property
    def confirmed(self):
        return self.status == CONFIRMED

    def snapshot(self):
        """ Independent copy of the track """
        return copy.deepcopy(self)

    def __repr__(self):
        x, y, vx, vy = self.x
        return (
            f"Track(id={self.id}, status={self.status}, "
            f"pos=({x:.2f}, {y:.2f}), vel=({vx:.2f}, {vy:.2f}))"
        )


def transition(dt):
    """ Constant velocity transition matrix """
    F = np.eye(4)
    F[0, 2] = F[1, 3] = dt
    return F


def process_noise(dt, q):
    """ White acceleration process noise of intensity q """
    block = q * np.array([[dt ** 3 / 3, dt ** 2 / 2], [dt ** 2 / 2, dt]])
    Q = np.zeros((4, 4))
    Q[np.ix_([0, 2], [0, 2])] = block
    Q[np.ix_([1, 3], [1, 3])] = block
    return Q


def measurement(x):
    """ Range in m and azimuth in degrees of the state x """
    return np.array([np.hypot(x[0], x[1]), np.rad2deg(np.arctan2(x[1], x[0]))])


def measurement_jacobian(x):
    """
    Jacobian of the measurement model at the state x

    Raises
    ------
    TrackingError
        if the state lies at the AP position
    """
    px, py = x[0], x[1]
    r2 = px ** 2 + py ** 2
    r = np.sqrt(r2)
    if r < MIN_RANGE:
        raise TrackingError(f"Measurement Jacobian is singular at the AP position {x[:2]}")
    deg = 180 / np.pi
    return np.array(
        [
            [px / r, py / r, 0, 0],
            [-py / r2 * deg, px / r2 * deg, 0, 0],
        ]
    )


def measurement_noise(cfg):
    return np.diag([cfg.r_d ** 2, cfg.r_theta ** 2])


def predict(track, dt, cfg):
    """
    Propagate a track by dt seconds with the constant velocity model

    Parameters
    ----------
    track : Track
        track to propagate, it is changed in place
    dt : float
        time step in s, > 0
    cfg : TrackerConfig
        provides the process noise intensity q

    Returns
    -------
    track : Track
    """
    if not dt > 0:
        raise ValueError(f"Prediction step must be positive, got {dt}")
    F = transition(dt)
    state = track.state
    state.x = F @ state.x
    P = F @ state.P @ F.T + process_noise(dt, cfg.q)
    state.P = (P + P.T) / 2
    return track


def innovation(track, obs, cfg):
    """
    Innovation, its covariance and the measurement Jacobian

    The angle innovation is wrapped to (-180, 180].
    """
    H = measurement_jacobian(track.x)
    nu = obs.z - measurement(track.x)
    nu[1] = wrap_degrees(nu[1])
    S = H @ track.P @ H.T + measurement_noise(cfg)
    return nu, (S + S.T) / 2, H


def mahalanobis(track, obs, cfg):
    """ Squared Mahalanobis distance of an observation to a track """
    nu, S, _ = innovation(track, obs, cfg)
    return float(nu @ np.linalg.solve(S, nu))


def update(track, obs, cfg):
    """
    EKF update of a track with one observation

    Parameters
    ----------
    track : Track
        track to update, it is changed in place
    obs : Observation
        associated observation
    cfg : TrackerConfig
        measurement noise

    Returns
    -------
    track : Track

    Raises
    ------
    TrackingError
        if the track or the observation lie at the AP position
    """
    if obs.d < MIN_RANGE:
        raise TrackingError(f"Can not update with an observation at the AP position: {obs}")
    nu, S, H = innovation(track, obs, cfg)
    state = track.state
    K = np.linalg.solve(S, H @ state.P).T
    state.x = state.x + K @ nu
    # Joseph form
    A = np.eye(4) - K @ H
    P = A @ state.P @ A.T + K @ measurement_noise(cfg) @ K.T
    state.P = (P + P.T) / 2
    return track


def associate(tracks, observations, cfg):
    """
    Assign observations to tracks

    Pairs with a squared Mahalanobis distance above the gate are excluded,
    the remaining pairs are assigned so that the total distance is minimal.

    Parameters
    ----------
    tracks : list of Track
        predicted tracks
    observations : list of Observation
        observations of this step
    cfg : TrackerConfig
        gate

    Returns
    -------
    assignment : dict
        observation index for each matched track index
    unmatched : list of int
        indices of the observations without a track
    """
    n_tracks, n_obs = len(tracks), len(observations)
    if n_tracks == 0 or n_obs == 0:
        return {}, list(range(n_obs))

    cost = np.full((n_tracks, n_obs), np.inf)
    for i, track in enumerate(tracks):
        for j, obs in enumerate(observations):
            try:
                cost[i, j] = mahalanobis(track, obs, cfg)
            except TrackingError:
                pass
    gated = cost <= cfg.gate
    if not np.any(gated):
        return {}, list(range(n_obs))

    # every gated pair must be cheaper than leaving one more pair unassigned
    big = 2 * cfg.gate * (min(n_tracks, n_obs) + 1)
    rows, cols = linear_sum_assignment(np.where(gated, cost, big))
    assignment = {int(i): int(j) for i, j in zip(rows, cols) if gated[i, j]}
    matched = set(assignment.values())
    unmatched = [j for j in range(n_obs) if j not in matched]
    return assignment, unmatched


def initial_state(obs, cfg):
    """ State of a new track at the observation, at rest """
    d, phi = obs.d, np.deg2rad(obs.theta)
    x = np.zeros(4)
    x[:2] = obs.to_cartesian()
    # polar to cartesian Jacobian, with the angle in degrees
    J = np.array(
        [
            [np.cos(phi), -d * np.sin(phi) * np.pi / 180],
            [np.sin(phi), d * np.cos(phi) * np.pi / 180],
        ]
    )
    P = np.zeros((4, 4))
    P[:2, :2] = J @ measurement_noise(cfg) @ J.T
    # a track born at the AP position would have a singular covariance
    P[:2, :2] += (cfg.r_d ** 2 * 1e-3) * np.eye(2)
    P[2:, 2:] = cfg.init_speed_std ** 2 * np.eye(2)
    return TrackState(x, (P + P.T) / 2)


def nees(x_true, state):
    """ Normalized estimation error squared of a state estimate """
    e = np.asarray(x_true, dtype=float) - state.x
    return float(e @ np.linalg.solve(state.P, e))


class Tracker:
    """ Tracks of one AP, updated once per tracking step """

    def __init__(self, cfg=None):
        if cfg is None:
            cfg = TrackerConfig()
        self.cfg = cfg
        self.tracks = []
        self.t = None
        self._next_id = 0

    @property
    def confirmed(self):
        return [t for t in self.tracks if t.status == CONFIRMED]

    def _spawn(self, obs, t):
        track = Track(self._next_id, initial_state(obs, self.cfg), t)
        self._next_id += 1
        if self.cfg.confirm_hits <= 1:
            track.status = CONFIRMED
        logging.debug("New track %i at d=%.2f m, theta=%.1f deg", track.id, obs.d, obs.theta)
        return track

    def step(self, observations, t):
        """
        Advance all tracks to step t and process its observations

        Parameters
        ----------
        observations : list of Observation
            observations of step t
        t : int
            tracking step, strictly increasing between calls; the time
            between two steps is t difference times cfg.dt

        Returns
        -------
        tracks : list of Track
            copies of the confirmed tracks
        """
        if self.t is not None and t <= self.t:
            raise ValueError(f"Tracking steps must increase, got {t} after {self.t}")
        cfg = self.cfg

        if self.t is not None:
            dt = (t - self.t) * cfg.dt
            for track in self.tracks:
                predict(track, dt, cfg)
                track.t = t
        self.t = t

        assignment, unmatched = associate(self.tracks, observations, cfg)

        for i, track in enumerate(self.tracks):
            if i in assignment:
                update(track, observations[assignment[i]], cfg)
                track.hits += 1
                track.misses = 0
                if track.status == TENTATIVE and track.hits >= cfg.confirm_hits:
                    track.status = CONFIRMED
                    logging.debug("Track %i confirmed at step %i", track.id, t)
            else:
                track.hits = 0
                track.misses += 1
                if track.status == TENTATIVE or track.misses >= cfg.kill_misses:
                    track.status = DEAD
                    logging.debug("Track %i dropped at step %i", track.id, t)

        survivors = [track for track in self.tracks if track.status != DEAD]
        for j in unmatched:
            obs = observations[j]
            if obs.d < MIN_RANGE:
                continue
            if cfg.birth_exclusion and self._inside_gate(survivors, obs):
                continue
            track = self._spawn(obs, t)
            survivors.append(track)
        self.tracks = survivors
        return [track.snapshot() for track in self.confirmed]

    def _inside_gate(self, tracks, obs):
        for track in tracks:
            if track.born == self.t:
                continue
            try:
                if mahalanobis(track, obs, self.cfg) <= self.cfg.gate:
                    return True
            except TrackingError:
                continue
        return False
