"""
Angle of arrival from the power each beam pattern receives from a path
"""

import numpy as np


def aoa_scores(row, codebook):
    """
    Correlation between a candidate's power profile and the codebook

    score(theta) = sum_p g_p(theta) * s_p / ||s||_2

    Parameters
    ----------
    row : array of size (N_p,)
        squared foreground amplitude s_p of every beam pattern
    codebook : Codebook
        beam patterns, the scores are evaluated on its angle grid

    Returns
    -------
    scores : array of size (n_grid,)
    """
    row = np.asarray(row, dtype=float)
    if row.shape != (codebook.n_p,):
        raise ValueError(f"Expected a row of {codebook.n_p} beam patterns, got shape {row.shape}")
    norm = np.linalg.norm(row)
    if not norm > 0:
        raise ValueError("Can not estimate the angle of a path without foreground power")
    return (row @ codebook.gains) / norm


def estimate_aoa(candidate, codebook):
    """
    Azimuth of a candidate, the grid angle with the highest score

    Parameters
    ----------
    candidate : Candidate or array
        candidate with its foreground row, or the row itself
    codebook : Codebook
        beam patterns

    Returns
    -------
    theta : float
        azimuth in degrees relative to the boresight, ties go to the
        smaller angle
    """
    row = getattr(candidate, "row", candidate)
    if row is None:
        raise ValueError("Candidate has no foreground row")
    scores = aoa_scores(row, codebook)
    return float(codebook.grid[np.argmax(scores)])
