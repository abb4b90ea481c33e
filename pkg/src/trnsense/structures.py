"""
This module contains the configuration Classes used throughout trnsense
Notably all configurations are Collections, which can accessed both by attribute and by index
"""

import numpy as np
from scipy.constants import speed_of_light


class Collection:
    """
    A dictionary that is case insensitive (always lowercase) and
    that can be accessed both by attribute or index (for names that don't start with "_")
    """

    def __init__(self, **kwargs):
        for key, value in kwargs.items():
            if isinstance(value, bytes):
                value = value.decode()
            setattr(self, key, value)

    def __getattribute__(self, name):
        return object.__getattribute__(self, name.casefold())

    def __setattr__(self, name, value):
        return object.__setattr__(self, name.casefold(), value)

    def __getitem__(self, key):
        return self.__getattribute__(key)

    def __setitem__(self, key, value):
        return self.__setattr__(key, value)

    def __contains__(self, key):
        return key.casefold() in self.names

    @property
    def names(self):
        """list(str): Names of all not None parameters in the Collection """
        return [s for s in vars(self) if s[0] != "_" and getattr(self, s) is not None]

    def get(self, key, alt=None):
        """
        Get a value with name key if it exists and is not None or alt if not

        Parameters
        ----------
        key: str
            Name of the value to get
        alt: obj, optional
            alternative value to get if key does not exist (default: None)

        Returns
        -------
        obj
        """
        if key in self:
            return self[key]
        else:
            return alt


class Config(Collection):
    """
    Collection with a fixed set of parameters, each with a default value.
    Values are checked whenever they are set.
    """

    #:dict: parameter names and their default values
    _defaults = {}

    def __init__(self, **kwargs):
        self._ready = False
        for key, value in self._defaults.items():
            setattr(self, key, list(value) if isinstance(value, (list, tuple)) else value)
        super().__init__(**kwargs)
        self._ready = True
        self._validate()

    def __setattr__(self, name, value):
        name = name.casefold()
        if name[0] == "_":
            return super().__setattr__(name, value)
        if name not in self._defaults:
            raise ValueError(
                f"Unknown parameter {name} for {self.__class__.__name__}, "
                f"expected one of {list(self._defaults)}"
            )
        old = self.__dict__.get(name)
        super().__setattr__(name, self._check(name, value))
        if self._ready:
            try:
                self._validate()
            except ValueError:
                super().__setattr__(name, old)
                raise

    def __eq__(self, other):
        return type(self) is type(other) and self.to_dict() == other.to_dict()

    def __repr__(self):
        values = ", ".join(f"{k}={v!r}" for k, v in self.to_dict().items())
        return f"{self.__class__.__name__}({values})"

    def _check(self, name, value):
        return value

    def _validate(self):
        """ Checks between parameters, run after every change """

    def update(self, **kwargs):
        """
        Set several parameters at once, the checks between parameters
        run only after all of them are set. On failure nothing changes.
        """
        old = {key: self.__dict__.get(key.casefold()) for key in kwargs}
        self._ready = False
        try:
            for key, value in kwargs.items():
                setattr(self, key, value)
            self._validate()
        except ValueError:
            for key, value in old.items():
                if key.casefold() in self._defaults:
                    super().__setattr__(key.casefold(), value)
            raise
        finally:
            self._ready = True
        return self

    def to_dict(self):
        """dict: plain copy of all parameters, lists for sequences """
        result = {}
        for key in self._defaults:
            value = self[key]
            if isinstance(value, (tuple, np.ndarray)):
                value = list(np.asarray(value).tolist())
            result[key] = value
        return result


def _positive(cls, name, value):
    if not np.all(np.asarray(value) > 0):
        raise ValueError(f"{cls.__name__}.{name} must be strictly positive, got {value}")
    return value


class RadioConfig(Config):
    """ Radio front-end and CIR dimensions """

    _defaults = {
        #:float: carrier frequency in Hz
        "f_o": 60.48e9,
        #:float: bandwidth in Hz
        "b": 1.76e9,
        #:float: inter-packet interval in s
        "t_c": 0.27e-3,
        #:int: receiver samples per symbol (3.52 GSPS at 2)
        "samples_per_symbol": 2,
        #:int: number of CIR taps
        "l": 192,
        #:int: number of beam patterns
        "n_p": 12,
    }

    def _check(self, name, value):
        if name in ["samples_per_symbol", "l", "n_p"]:
            value = int(value)
            if name == "samples_per_symbol" and value < 1:
                raise ValueError(f"samples_per_symbol must be >= 1, got {value}")
        else:
            value = float(value)
        return _positive(type(self), name, value)

    @property
    def tap_spacing(self):
        """float: distance between two consecutive CIR taps in m """
        return speed_of_light / (4 * self.b)

    @property
    def distances(self):
        """array of size (L,): distance of every tap in m """
        return np.arange(self.l) * self.tap_spacing

    @property
    def wavelength(self):
        """float: carrier wavelength in m """
        return speed_of_light / self.f_o


class CodebookConfig(Config):
    """ Parameters of the synthetic beam pattern codebook """

    _defaults = {
        #:float: azimuth span covered by the steering angles in degrees
        "fov": 90.0,
        #:float: half width of the raised cosine mainlobe in degrees
        "beamwidth": 15.0,
        #:float: angular grid step in degrees
        "grid_step": 0.5,
    }

    def _check(self, name, value):
        return _positive(type(self), name, float(value))


class DetectConfig(Config):
    """ Background subtraction and dynamic threshold """

    _defaults = {
        "alpha_max": 0.25,
        "alpha_mean": 2.0,
        "alpha_abs": 2.5e-3,
        #:int: background window length in frames
        "k_static": 128,
    }

    def _check(self, name, value):
        value = int(value) if name == "k_static" else float(value)
        return _positive(type(self), name, value)


class TrackerConfig(Config):
    """ EKF noise levels, gating and track lifecycle """

    _defaults = {
        #:float: process noise intensity in m^2/s^3
        "q": 0.5,
        #:float: range measurement std in m
        "r_d": 0.1,
        #:float: angle measurement std in degrees
        "r_theta": 2.0,
        #:float: squared Mahalanobis gate (chi2 99% for 2 dof)
        "gate": 9.21,
        "confirm_hits": 3,
        "kill_misses": 10,
        #:float: duration of one tracking step in s (16 T_c)
        "dt": 16 * 0.27e-3,
        #:float: velocity std of a newly spawned track in m/s
        "init_speed_std": 2.0,
        #:bool: suppress track birth inside the gate of a live track
        "birth_exclusion": True,
    }

    def _check(self, name, value):
        if name == "birth_exclusion":
            return bool(value)
        if name in ["confirm_hits", "kill_misses"]:
            value = int(value)
        else:
            value = float(value)
        return _positive(type(self), name, value)


class StftConfig(Config):
    """ Slow-time STFT used for micro-Doppler columns """

    _defaults = {
        #:int: window length M
        "m": 64,
        #:int: hop between columns in slow-time samples
        "sigma": 16,
    }

    def _check(self, name, value):
        value = int(value)
        if name == "m" and (value < 1 or value & (value - 1) != 0):
            raise ValueError(f"STFT window length must be a power of two, got {value}")
        return _positive(type(self), name, value)

    def _validate(self):
        if self.sigma > self.m:
            raise ValueError(f"STFT hop {self.sigma} exceeds the window length {self.m}")

    @property
    def window(self):
        """array of size (m,): periodic Hann window """
        m = np.arange(self.m)
        return 0.5 * (1 - np.cos(2 * np.pi * m / self.m))

    @property
    def n_d(self):
        """int: number of Doppler bins """
        return self.m


class MdConfig(Config):
    """ Micro-Doppler extraction and spectrogram assembly """

    _defaults = {
        #:int: fast-time window size, Q + 1 taps are summed
        "q": 4,
        #:int: spectrogram length T in columns
        "t_window": 400,
        #:int: overlap between consecutive spectrograms in columns
        "overlap": 300,
        #:float: half width of the removed static band in m/s
        "static_band": 0.28,
    }

    def _check(self, name, value):
        if name == "static_band":
            value = float(value)
            if value < 0:
                raise ValueError(f"static_band must be >= 0, got {value}")
            return value
        value = int(value)
        if name == "q" and (value < 0 or value % 2 != 0):
            raise ValueError(f"Fast-time window size q must be even, got {value}")
        if name == "t_window":
            _positive(type(self), name, value)
        if name == "overlap" and value < 0:
            raise ValueError(f"overlap must be >= 0, got {value}")
        return value

    def _validate(self):
        if self.overlap >= self.t_window:
            raise ValueError(
                f"overlap {self.overlap} must be smaller than t_window {self.t_window}"
            )

    @property
    def hop(self):
        """int: columns between the starts of consecutive spectrograms """
        return self.t_window - self.overlap


class TrainConfig(Config):
    """ Optimizer settings """

    _defaults = {
        "lr": 1e-4,
        "epochs": 120,
        "batch_size": 16,
        "seed": 0,
    }

    def _check(self, name, value):
        if name == "lr":
            value = float(value)
            if value < 0:
                raise ValueError(f"Learning rate must be >= 0, got {value}")
            return value
        value = int(value)
        if name == "seed":
            if value < 0:
                raise ValueError(f"Seed must be >= 0, got {value}")
            return value
        return _positive(type(self), name, value)


class NetworkSpec(Config):
    """ Architecture of the residual classifier """

    _defaults = {
        #:list: input shape (Doppler bins, time steps)
        "input_shape": [59, 400],
        #:list: filters of the residual blocks
        "filters": [8, 16, 32, 64],
        #:int: kernel size of the block convolutions
        "kernel": 3,
        #:int: units of the dense layer
        "dense_units": 64,
        #:float: dropout after the residual blocks
        "dropout_blocks": 0.5,
        #:float: dropout after the dense layer
        "dropout_dense": 0.2,
        "n_classes": 4,
        #:int: seed of the weight initialisation
        "seed": 0,
        #:list: names of the classes, empty if unknown
        "label_names": [],
    }

    def _check(self, name, value):
        if name == "label_names":
            return [str(v) for v in value]
        if name in ["input_shape", "filters"]:
            value = [int(v) for v in value]
            if name == "input_shape" and len(value) != 2:
                raise ValueError(f"input_shape must be (rows, columns), got {value}")
            if len(value) == 0:
                raise ValueError(f"{name} must not be empty")
            return _positive(type(self), name, value)
        if name in ["dropout_blocks", "dropout_dense"]:
            value = float(value)
            if not 0 <= value < 1:
                raise ValueError(f"{name} must be in [0, 1), got {value}")
            return value
        value = int(value)
        if name == "seed":
            return value
        if name == "n_classes" and value < 2:
            raise ValueError(f"n_classes must be >= 2, got {value}")
        return _positive(type(self), name, value)

    def _validate(self):
        if self.label_names and len(self.label_names) != self.n_classes:
            raise ValueError(
                f"{len(self.label_names)} label names for {self.n_classes} classes: {self.label_names}"
            )


class FusionConfig(Config):
    """ Multi-AP fusion """

    _defaults = {
        #:str: how APs are combined, one of "decision", "position"
        "mode": "decision",
        #:float: maximum distance of two tracks of the same subject in m
        "match_radius": 0.75,
        #:float: distance within which a subject counts as detected in m
        "detection_radius": 0.5,
    }

    def _check(self, name, value):
        if name == "mode":
            options = ["decision", "position"]
            if value not in options:
                raise ValueError(f"Expected one of {options} got {value}")
            return value
        return _positive(type(self), name, float(value))


class ApRegistration(Config):
    """ Pose of one AP in the room frame """

    _defaults = {
        "id": 0,
        #:list: position in m
        "position": [0.0, 0.0],
        #:float: boresight azimuth in degrees, counter clockwise from the room x axis
        "boresight": 0.0,
    }

    def _check(self, name, value):
        if name == "id":
            return int(value)
        if name == "position":
            value = [float(v) for v in value]
            if len(value) != 2:
                raise ValueError(f"AP position must be 2-D, got {value}")
            return value
        return float(value)

    def to_room(self, local):
        """
        Convert AP-local cartesian coordinates to the room frame

        Parameters
        ----------
        local : array of shape (..., 2)
            positions with x along the boresight

        Returns
        -------
        room : array of shape (..., 2)
        """
        local = np.asarray(local, dtype=float)
        phi = np.deg2rad(self.boresight)
        rot = np.array([[np.cos(phi), -np.sin(phi)], [np.sin(phi), np.cos(phi)]])
        return local @ rot.T + np.asarray(self.position)

    def to_local(self, room):
        """ Inverse of to_room """
        room = np.asarray(room, dtype=float) - np.asarray(self.position)
        phi = np.deg2rad(self.boresight)
        rot = np.array([[np.cos(phi), -np.sin(phi)], [np.sin(phi), np.cos(phi)]])
        return room @ rot

    def to_polar(self, room):
        """
        Range and AP-local azimuth of room frame positions

        Returns
        -------
        d : array
            distance in m
        theta : array
            azimuth in degrees relative to the boresight
        """
        local = self.to_local(room)
        d = np.hypot(local[..., 0], local[..., 1])
        theta = np.rad2deg(np.arctan2(local[..., 1], local[..., 0]))
        return d, theta
