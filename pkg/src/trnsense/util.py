"""
Utility functions for trnsense

logging setup, seeded random streams, angle helpers
"""

import logging
import os.path
from platform import python_version

import numpy as np
from numpy import __version__ as npversion
from pandas import __version__ as pdversion
from scipy import __version__ as spversion
from yaml import __version__ as yamlversion


def start_logging(log_file="trnsense.log"):
    """Start logging to log file and command line

    Parameters
    ----------
    log_file : str, optional
        name of the logging file, None disables file logging
        (default: "trnsense.log")
    """

    logger = logging.getLogger()
    logger.setLevel(logging.DEBUG)

    # Remove existing handles
    for h in list(logger.handlers):
        logger.removeHandler(h)

    ch = logging.StreamHandler()
    ch.setLevel(logging.INFO)
    ch_formatter = logging.Formatter("%(levelname)s - %(message)s")
    ch.setFormatter(ch_formatter)
    logger.addHandler(ch)

    if log_file is not None:
        log_dir = os.path.dirname(log_file)
        if log_dir == "":
            log_dir = "./"
        if not os.path.exists(log_dir):
            os.makedirs(log_dir)
        file = logging.FileHandler(log_file)
        file.setLevel(logging.DEBUG)
        file_formatter = logging.Formatter("%(asctime)s - %(levelname)s - %(message)s")
        file.setFormatter(file_formatter)
        logger.addHandler(file)

    logging.captureWarnings(True)

    logging.debug("----------------------")
    logging.debug("Python version: %s", python_version())
    logging.debug("Numpy version: %s", npversion)
    logging.debug("Scipy version: %s", spversion)
    logging.debug("Pandas version: %s", pdversion)
    logging.debug("PyYAML version: %s", yamlversion)


def rng_stream(seed, *keys):
    """Random generator for one named stream derived from the root seed

    Streams in use:
        (seed, ap)          carrier frequency offset of one capture
        (seed, ap, k)       noise of frame k
        (seed, ap, k, 1)    noise of empty-room calibration frame k

    Parameters
    ----------
    seed : int
        root seed
    *keys : int
        stream path below the root seed

    Returns
    -------
    rng : np.random.Generator
    """
    entropy = [int(seed)] + [int(k) for k in keys]
    if any(e < 0 for e in entropy):
        raise ValueError(f"Seed and stream keys must be non-negative, got {entropy}")
    return np.random.default_rng(entropy)


def wrap_degrees(angle):
    """ Wrap angles to (-180, 180] """
    angle = np.asarray(angle, dtype=float)
    return 180.0 - np.mod(180.0 - angle, 360.0)
