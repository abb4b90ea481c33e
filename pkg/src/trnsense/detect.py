"""
Background subtraction and detection of candidate targets in a CIR frame
"""

import logging

import numpy as np
from scipy.signal import find_peaks

from .structures import DetectConfig
from .waveform import CirFrame


class BackgroundProfile:
    """ Time averaged CIR amplitude of the static environment """

    def __init__(self, mean_amp):
        mean_amp = np.asarray(mean_amp, dtype=float)
        if mean_amp.ndim != 2:
            raise ValueError(f"Background must be a (L, N_p) matrix, got shape {mean_amp.shape}")
        if np.any(mean_amp < 0) or not np.all(np.isfinite(mean_amp)):
            raise ValueError("Background amplitudes must be finite and non negative")
        #:array of shape (L, N_p): mean amplitude in V
        self.mean_amp = mean_amp

    @property
    def shape(self):
        return self.mean_amp.shape


class Candidate:
    """ A path whose strength passed the dynamic threshold """

    def __init__(self, tap, distance, strength, row=None):
        #:int: CIR tap index
        self.tap = int(tap)
        #:float: distance in m
        self.distance = float(distance)
        #:float: L2 norm of the foreground row
        self.strength = float(strength)
        #:array of size (N_p,): squared foreground amplitude per beam pattern
        self.row = None if row is None else np.asarray(row, dtype=float)

    def __repr__(self):
        return f"Candidate(tap={self.tap}, distance={self.distance:.3f}, strength={self.strength:.3g})"


def _amplitudes(frame):
    if isinstance(frame, CirFrame):
        frame = frame.h
    return np.abs(np.asarray(frame))


def estimate_background(frames):
    """
    Mean CIR amplitude over a window of frames

    Parameters
    ----------
    frames : sequence of CirFrame or array of shape (K, L, N_p)
        frames of the static scene

    Returns
    -------
    bg : BackgroundProfile
    """
    if isinstance(frames, np.ndarray):
        if frames.ndim != 3:
            raise ValueError(f"Expected frames of shape (K, L, N_p), got {frames.shape}")
        amplitudes = np.abs(frames)
    else:
        amplitudes = [_amplitudes(f) for f in frames]
    if len(amplitudes) == 0:
        raise ValueError("Need at least one frame to estimate the background")
    shapes = {a.shape for a in amplitudes}
    if len(shapes) != 1:
        raise ValueError(f"All frames must have the same shape, got {sorted(shapes)}")
    mean_amp = np.mean(amplitudes, axis=0, dtype=float)
    logging.debug("Background estimated from %i frames", len(amplitudes))
    return BackgroundProfile(mean_amp)


def subtract_background(frame, bg):
    """
    Foreground amplitude max(|h| - bg, 0)

    Parameters
    ----------
    frame : CirFrame or array of shape (L, N_p)
        current frame
    bg : BackgroundProfile
        background of the same dimensions

    Returns
    -------
    foreground : array of shape (L, N_p)
    """
    amplitude = _amplitudes(frame)
    if amplitude.shape != bg.shape:
        raise ValueError(
            f"Frame shape {amplitude.shape} does not match the background shape {bg.shape}"
        )
    return np.maximum(amplitude - bg.mean_amp, 0)


def path_strengths(foreground):
    """ Strength of every path, the L2 norm over the beam patterns """
    foreground = np.atleast_2d(np.asarray(foreground, dtype=float))
    return np.linalg.norm(foreground, axis=1)


def local_maxima(h):
    """
    Taps of the local maxima of h

    A local maximum is strictly greater than both of its neighbours, the
    first and last tap are never maxima. Flat peaks are reported at their
    leftmost tap.
    """
    h = np.asarray(h, dtype=float)
    _, properties = find_peaks(h, plateau_size=(None, None))
    return properties["left_edges"]


def threshold(peaks, cfg):
    """
    Dynamic detection threshold

    A_th = max(alpha_max * max(peaks), alpha_mean * mean(peaks), alpha_abs)

    Parameters
    ----------
    peaks : array
        values of the local maxima
    cfg : DetectConfig
        threshold coefficients

    Returns
    -------
    a_th : float
    """
    peaks = np.asarray(peaks, dtype=float)
    if peaks.size == 0:
        return float(cfg.alpha_abs)
    return float(max(cfg.alpha_max * peaks.max(), cfg.alpha_mean * peaks.mean(), cfg.alpha_abs))


def detect_candidates(h, distances, cfg=None, foreground=None):
    """
    Select the paths that carry a target

    Parameters
    ----------
    h : array of size (L,)
        path strengths, see path_strengths
    distances : array of size (L,)
        distance of every tap in m
    cfg : DetectConfig, optional
        threshold coefficients (default: DetectConfig())
    foreground : array of shape (L, N_p), optional
        foreground amplitudes, fills the rows of the candidates

    Returns
    -------
    candidates : list of Candidate
        in increasing tap order
    """
    if cfg is None:
        cfg = DetectConfig()
    h = np.asarray(h, dtype=float)
    distances = np.asarray(distances, dtype=float)
    if h.ndim != 1 or h.size < 3:
        raise ValueError(f"Need at least 3 path strengths, got shape {h.shape}")
    if distances.shape != h.shape:
        raise ValueError(f"Got {distances.size} distances for {h.size} taps")

    taps = local_maxima(h)
    if taps.size == 0:
        return []
    a_th = threshold(h[taps], cfg)

    candidates = []
    for tap in taps:
        if h[tap] >= a_th:
            row = None if foreground is None else np.asarray(foreground[tap], dtype=float) ** 2
            candidates.append(Candidate(tap, distances[tap], h[tap], row))
    logging.debug(
        "%i of %i peaks above the threshold %.3g", len(candidates), taps.size, a_th
    )
    return candidates
