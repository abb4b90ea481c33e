"""
Micro-Doppler spectrograms of the tracked persons

The slow-time sequence of the CIR taps around a person's distance, seen
through the beam pattern pointing at them, is analysed with a short time
Fourier transform. Each tracking step yields one column of Doppler power,
T consecutive columns form a spectrogram.
"""

import logging
from collections import deque

import numpy as np
from scipy.constants import speed_of_light
from scipy.fft import fft, fftshift

from .structures import MdConfig, RadioConfig, StftConfig


class Spectrogram:
    """ Doppler power of one person over T tracking steps """

    def __init__(self, values, velocity_axis, t0=0, subject=None, ap=None, preprocessed=False):
        values = np.asarray(values, dtype=float)
        velocity_axis = np.asarray(velocity_axis, dtype=float)
        if values.ndim != 2 or values.shape[0] != velocity_axis.size:
            raise ValueError(
                f"Spectrogram of shape {values.shape} does not match {velocity_axis.size} velocities"
            )
        if np.any(np.diff(velocity_axis) <= 0):
            raise ValueError("Velocity axis must be increasing")
        #:array of shape (N_D, T): power per velocity bin and column
        self.values = values
        #:array of size (N_D,): velocity of each row in m/s
        self.velocity_axis = velocity_axis
        #:int: tracking step of the first column
        self.t0 = int(t0)
        #:int: track id
        self.subject = subject
        #:int: id of the AP that observed the person
        self.ap = ap
        self.preprocessed = preprocessed

    @property
    def shape(self):
        return self.values.shape

    @property
    def n_columns(self):
        return self.values.shape[1]

    @property
    def energy(self):
        return float(np.sum(self.values))

    def mean_velocity(self):
        """ Power weighted mean velocity of every column, 0 for empty columns """
        power = self.values.sum(axis=0)
        weighted = self.velocity_axis @ self.values
        return np.divide(weighted, power, out=np.zeros_like(weighted), where=power > 0)

    def __repr__(self):
        return (
            f"Spectrogram(shape={self.shape}, t0={self.t0}, subject={self.subject}, "
            f"ap={self.ap}, preprocessed={self.preprocessed})"
        )


def doppler_axis(stft=None, radio=None):
    """
    Velocity of every Doppler bin after centering

    dv = c / (2 f_o M T_c), v_max = c / (4 f_o T_c)

    Parameters
    ----------
    stft : StftConfig, optional
        window length M
    radio : RadioConfig, optional
        carrier frequency and packet interval

    Returns
    -------
    axis : array of size (M,)
        -v_max + i dv for i = 0 ... M - 1
    dv : float
        velocity resolution in m/s
    v_max : float
        largest unambiguous velocity in m/s
    """
    stft = stft if stft is not None else StftConfig()
    radio = radio if radio is not None else RadioConfig()
    dv = speed_of_light / (2 * radio.f_o * stft.m * radio.t_c)
    v_max = speed_of_light / (4 * radio.f_o * radio.t_c)
    axis = (np.arange(stft.m) - stft.m // 2) * dv
    return axis, dv, v_max


def select_beam(theta_hat, codebook):
    """ Beam pattern with the highest gain at theta_hat, ties to the smaller index """
    lo, hi = codebook.fov
    theta = float(np.clip(theta_hat, lo, hi))
    return int(np.argmax(codebook.gain(theta)))


def select_path(r_hat, cfg):
    """ CIR tap closest to the distance r_hat, ties to the smaller tap """
    if r_hat < 0:
        raise ValueError(f"Distance must be >= 0, got {r_hat}")
    x = r_hat / cfg.tap_spacing
    # half way between two taps goes to the lower one
    tap = int(np.ceil(x - 0.5 - 1e-9))
    return min(max(tap, 0), cfg.l - 1)


def stft_column(buffer, l_star, p_star, n, stft=None, md=None):
    """
    Micro-Doppler column n of one path

    mu_i = sum_l |H_l(n, i)|^2 over the Q + 1 taps centered on l_star, with
    H_l(n, i) = sum_m h_l(m + n sigma) w(m) exp(-2j pi i m / M). The DFT is
    not normalized, so sum_i |H_l(n, i)|^2 = M sum_m |h_l(m + n sigma) w(m)|^2.

    Parameters
    ----------
    buffer : array like of shape (K, L, N_p)
        slow-time history of the CIR frames, slicing along the first axis is
        all that is needed
    l_star : int
        center tap
    p_star : int
        beam pattern
    n : int
        column index, the window starts at frame n * sigma
    stft : StftConfig, optional
    md : MdConfig, optional

    Returns
    -------
    mu : array of size (M,) or None
        Doppler power ordered by increasing velocity, None if the buffer does
        not reach the end of the window yet
    """
    stft = stft if stft is not None else StftConfig()
    md = md if md is not None else MdConfig()
    if n < 0:
        return None
    start = n * stft.sigma
    stop = start + stft.m
    if len(buffer) < stop:
        return None
    half = md.q // 2
    window = np.asarray(buffer[start:stop])
    n_taps = window.shape[1]
    if l_star - half < 0 or l_star + half >= n_taps:
        raise ValueError(f"Fast-time window {l_star} +- {half} exceeds the {n_taps} CIR taps")
    if not 0 <= p_star < window.shape[2]:
        raise ValueError(f"Beam pattern {p_star} out of range")

    h = window[:, l_star - half : l_star + half + 1, p_star].astype(complex)
    H = fft(h * stft.window[:, None], axis=0)
    mu = np.sum(np.abs(H) ** 2, axis=1)
    return fftshift(mu)


def clamp_path(l_star, radio, md):
    """ Keep the fast-time window inside the CIR """
    half = md.q // 2
    return min(max(l_star, half), radio.l - 1 - half)


def column_lag(stft):
    """ Tracking steps between a column's window start and the step that completes it """
    return -(-stft.m // stft.sigma)


def column_for_position(frames, position, step, codebook, radio, stft, md):
    """
    Micro-Doppler column of a person at an AP-local position

    The window of the column ends at or before the frame of the tracking
    step, step * sigma.

    Returns
    -------
    mu : array or None
        None while the history is too short
    p_star, l_star : int
        selected beam pattern and tap
    """
    x, y = position[0], position[1]
    theta = np.rad2deg(np.arctan2(y, x))
    r = np.hypot(x, y)
    p_star = select_beam(theta, codebook)
    l_star = clamp_path(select_path(r, radio), radio, md)
    n = step - column_lag(stft)
    return stft_column(frames, l_star, p_star, n, stft, md), p_star, l_star


class MicroDopplerStream:
    """
    Assembles the columns of one (AP, track) stream into spectrograms

    Spectrogram windows start at multiples of t_window - overlap tracking
    steps, so that the windows of all streams line up. A window is emitted
    once all of its T columns are available; a missing column restarts the
    stream.
    """

    def __init__(self, velocity_axis, md=None, subject=None, ap=None):
        self.velocity_axis = velocity_axis
        self.md = md if md is not None else MdConfig()
        self.subject = subject
        self.ap = ap
        self.columns = deque(maxlen=self.md.t_window)
        #:int: length of the current run of consecutive columns
        self.run = 0
        self.last = None

    def push(self, step, mu):
        """
        Add the column of a tracking step

        Returns
        -------
        spectrogram : Spectrogram or None
            the window that ends with this column, if any
        """
        if self.last is not None and step <= self.last:
            raise ValueError(f"Columns must arrive in order, got step {step} after {self.last}")
        if self.last is None or step != self.last + 1:
            self.columns.clear()
            self.run = 0
        self.columns.append(mu)
        self.run += 1
        self.last = step

        T = self.md.t_window
        t0 = step - T + 1
        if self.run < T or t0 % self.md.hop != 0:
            return None
        values = np.stack(self.columns, axis=1)
        return Spectrogram(values, self.velocity_axis, t0=t0, subject=self.subject, ap=self.ap)


def extract_stream(frames, track_history, codebook, radio=None, stft=None, md=None, ap=None):
    """
    Spectrograms of all tracked persons seen by one AP

    Parameters
    ----------
    frames : array like of shape (K, L, N_p)
        CIR frames of the AP
    track_history : iterable of (int, list of Track)
        tracking step and the confirmed tracks of that step, AP-local states
    codebook : Codebook
        beam patterns of the AP
    radio, stft, md : configurations, optional
    ap : int, optional
        AP id stored in the spectrograms

    Returns
    -------
    spectrograms : dict
        list of raw Spectrograms for every track id
    """
    radio = radio if radio is not None else RadioConfig()
    stft = stft if stft is not None else StftConfig()
    md = md if md is not None else MdConfig()
    axis, _, _ = doppler_axis(stft, radio)

    streams = {}
    result = {}
    skipped = 0
    for step, tracks in track_history:
        for track in tracks:
            mu, _, _ = column_for_position(frames, track.x[:2], step, codebook, radio, stft, md)
            if mu is None:
                skipped += 1
                continue
            if track.id not in streams:
                streams[track.id] = MicroDopplerStream(axis, md, subject=track.id, ap=ap)
                result[track.id] = []
            spec = streams[track.id].push(step, mu)
            if spec is not None:
                result[track.id].append(spec)
    if skipped:
        logging.debug("Skipped %i columns without enough history", skipped)
    return result


def static_rows(velocity_axis, static_band):
    """
    Rows whose velocity bin reaches into [-static_band, static_band]

    A bin covers +- dv / 2 around its center velocity.
    """
    velocity_axis = np.asarray(velocity_axis, dtype=float)
    dv = velocity_axis[1] - velocity_axis[0] if velocity_axis.size > 1 else 0.0
    return np.abs(velocity_axis) - dv / 2 <= static_band + 1e-12


def normalize_columns(values, floor=0.0):
    """
    Min-max scaling of every column to [0, 1]

    Columns whose range does not exceed floor are constant and become 0.
    """
    lo = values.min(axis=0, keepdims=True)
    span = values.max(axis=0, keepdims=True) - lo
    floor = np.broadcast_to(np.asarray(floor, dtype=float), span.shape)
    return np.divide(values - lo, span, out=np.zeros_like(values), where=span > floor)


def preprocess(spec, cfg=None):
    """
    Classifier input from a raw spectrogram

    Removes the Doppler bins of static reflectors and scales every column
    to [0, 1]. With the default configuration 59 of 64 rows remain.

    Parameters
    ----------
    spec : Spectrogram
        raw spectrogram
    cfg : MdConfig, optional
        provides the static band

    Returns
    -------
    spec : Spectrogram
    """
    cfg = cfg if cfg is not None else MdConfig()
    keep = ~static_rows(spec.velocity_axis, cfg.static_band)
    # what is left of a column after removing a pure static tone is rounding noise
    floor = 1e-9 * spec.values.max(axis=0, keepdims=True)
    values = normalize_columns(spec.values[keep], floor)
    return Spectrogram(
        values,
        spec.velocity_axis[keep],
        t0=spec.t0,
        subject=spec.subject,
        ap=spec.ap,
        preprocessed=True,
    )
