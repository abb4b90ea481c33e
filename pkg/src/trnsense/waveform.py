"""
Golay complementary sequences, the TRN training field built from them,
and the monostatic CIR estimate obtained by correlating a received TRN
field with its sequences.
"""

import numpy as np
from scipy.constants import speed_of_light
from scipy.signal import correlate

#:tuple: sequence and sign of the six blocks of a TRN unit
TRN_BLOCKS = (("a", 1), ("b", -1), ("a", 1), ("b", 1), ("a", 1), ("b", -1))

#:tuple: weight of each block correlation in the CIR estimate
# blocks 1 to 4 are correlated with their own sequence and combined with
# these signs, which cancels every sidelobe and cross term for delays < N.
# Blocks 0 and 5 only guard the delay spread.
CIR_WEIGHTS = (0, -1, 1, 1, 1, 0)


def _is_power_of_two(n):
    return isinstance(n, (int, np.integer)) and n >= 1 and (n & (n - 1)) == 0


class GolayPair:
    """ A pair of complementary Golay sequences of equal power-of-two length """

    def __init__(self, ga, gb):
        ga = np.asarray(ga, dtype=np.int64)
        gb = np.asarray(gb, dtype=np.int64)
        if ga.ndim != 1 or ga.shape != gb.shape:
            raise ValueError(
                f"Golay sequences must be 1-D and of equal length, got {ga.shape} and {gb.shape}"
            )
        if not _is_power_of_two(ga.size):
            raise ValueError(f"Golay sequence length must be a power of two, got {ga.size}")
        if not (np.all(np.abs(ga) == 1) and np.all(np.abs(gb) == 1)):
            raise ValueError("Golay sequences must only contain +1 and -1")
        ga.flags.writeable = False
        gb.flags.writeable = False
        #:array of int: sequence of type a
        self.ga = ga
        #:array of int: sequence of type b
        self.gb = gb

    def __len__(self):
        return self.ga.size

    def __getitem__(self, key):
        if key == "a":
            return self.ga
        if key == "b":
            return self.gb
        raise KeyError(key)

    @property
    def n(self):
        """int: length of each sequence """
        return self.ga.size

    def autocorrelation_sum(self):
        """
        Sum of the aperiodic autocorrelations of both sequences

        Returns
        -------
        r : array of int of size (2n - 1,)
            lags -(n-1) to n-1, the center entry is lag 0
        """
        ra = np.correlate(self.ga, self.ga, mode="full")
        rb = np.correlate(self.gb, self.gb, mode="full")
        return ra + rb

    def is_complementary(self):
        r = self.autocorrelation_sum()
        expected = np.zeros_like(r)
        expected[self.n - 1] = 2 * self.n
        return bool(np.array_equal(r, expected))


class TrnUnit:
    """ One TRN unit {+Ga, -Gb, +Ga, +Gb, +Ga, -Gb} """

    def __init__(self, pair):
        self.pair = pair
        blocks = [sign * pair[name] for name, sign in TRN_BLOCKS]
        samples = np.concatenate(blocks)
        samples.flags.writeable = False
        #:array of int: the 6N samples of the unit
        self.samples = samples

    def __len__(self):
        return self.samples.size

    def block(self, index):
        """ Samples of block index (0 to 5) """
        n = self.pair.n
        return self.samples[index * n : (index + 1) * n]


def golay_pair(n):
    """
    Construct a complementary Golay pair by recursive doubling

    Starting from a = b = [1], each doubling step uses
    a' = (a | b) and b' = (a | -b).

    Parameters
    ----------
    n : int
        length of the sequences, a power of two

    Returns
    -------
    pair : GolayPair

    Raises
    ------
    ValueError
        if n is not a power of two
    """
    if not _is_power_of_two(n):
        raise ValueError(f"Golay sequence length must be a power of two, got {n}")

    ga = np.array([1], dtype=np.int64)
    gb = np.array([1], dtype=np.int64)
    while ga.size < n:
        ga, gb = np.concatenate([ga, gb]), np.concatenate([ga, -gb])
    return GolayPair(ga, gb)


def build_trn_unit(pair):
    """ TRN unit of the given Golay pair, 6N samples long """
    return TrnUnit(pair)


def synth_rx(pair, taps, L):
    """
    Noiseless reception of one TRN unit through a sparse channel

    Parameters
    ----------
    pair : GolayPair
        sequences of the transmitted TRN unit
    taps : dict
        channel gain for each integer delay
    L : int
        number of CIR taps, the result is 6N + L samples long

    Returns
    -------
    rx : array of complex
    """
    trn = build_trn_unit(pair).samples
    rx = np.zeros(trn.size + L, dtype=complex)
    for delay, gain in taps.items():
        if not 0 <= delay < L:
            raise ValueError(f"Channel delay {delay} outside of [0, {L})")
        rx[delay : delay + trn.size] += gain * trn
    return rx


def correlate_block(rx, seq, offset, L):
    """
    Correlate the TRN block starting at offset with one Golay sequence

    z[l] = sum_m rx[offset + m + l] * seq[m] for l = 0 ... L - 1

    Parameters
    ----------
    rx : array
        received samples
    seq : array
        Golay sequence of length N
    offset : int
        first sample of the block in rx
    L : int
        number of lags

    Returns
    -------
    z : array of size (L,)
    """
    n = len(seq)
    segment = rx[offset : offset + n + L - 1]
    if segment.size < n + L - 1:
        raise ValueError(
            f"Received sequence too short for block at {offset}: "
            f"need {offset + n + L - 1} samples, got {len(rx)}"
        )
    return correlate(segment, seq, mode="valid", method="direct")


def estimate_cir(rx, pair, L):
    """
    Estimate the channel impulse response from one received TRN unit

    Blocks 1 to 4 are correlated with their own sequence, and combined as
    -corr_b(block 1) + corr_a(block 2) + corr_b(block 3) + corr_a(block 4).
    The a and b autocorrelation sidelobes cancel and every cross term
    between neighbouring blocks appears twice with opposite sign, so a
    single delay d < N produces exactly 4N at tap d and 0 elsewhere.
    The result is divided by 4N.

    Parameters
    ----------
    rx : array of complex
        received samples, the TRN unit starts at sample 0
    pair : GolayPair
        sequences of the TRN unit
    L : int
        number of taps to estimate, at most N

    Returns
    -------
    h : array of complex of size (L,)

    Raises
    ------
    ValueError
        if rx is shorter than the TRN unit plus L - 1 samples, or L > N
    """
    n = pair.n
    L = int(L)
    if not 1 <= L <= n:
        raise ValueError(f"Number of taps must be between 1 and the sequence length {n}, got {L}")
    rx = np.asarray(rx)
    needed = 6 * n + L - 1
    if rx.size < needed:
        raise ValueError(f"Received sequence too short: need {needed} samples, got {rx.size}")

    h = np.zeros(L, dtype=complex)
    for index, ((name, _), weight) in enumerate(zip(TRN_BLOCKS, CIR_WEIGHTS)):
        if weight == 0:
            continue
        h += weight * correlate_block(rx, pair[name], index * n, L)
    return h / (4 * n)


def tap_to_distance(tap, cfg):
    """
    Distance of the reflector seen at a CIR tap, d = c * tap / (4 B)

    Parameters
    ----------
    tap : int or array of int
        tap index (>= 0)
    cfg : RadioConfig
        provides the bandwidth B

    Returns
    -------
    distance : float or array
        distance in m
    """
    tap = np.asarray(tap)
    if np.any(tap < 0):
        raise ValueError(f"Tap index must be >= 0, got {tap}")
    distance = speed_of_light * tap / (4 * cfg.b)
    return float(distance) if distance.ndim == 0 else distance


class CirFrame:
    """ CIR estimates of all beam patterns at one slow-time index """

    def __init__(self, k, h):
        h = np.asarray(h, dtype=complex)
        if h.ndim != 2:
            raise ValueError(f"CIR frame must be a (L, N_p) matrix, got shape {h.shape}")
        if not np.all(np.isfinite(h)):
            raise ValueError(f"CIR frame {k} contains non finite values")
        if k < 0:
            raise ValueError(f"Slow-time index must be >= 0, got {k}")
        #:int: slow-time index (packet counter)
        self.k = int(k)
        #:array of complex: L taps x N_p beam patterns
        self.h = h

    @property
    def L(self):
        return self.h.shape[0]

    @property
    def n_p(self):
        return self.h.shape[1]

    def check(self, cfg):
        """ Raise a ValueError if the dimensions do not match the RadioConfig """
        if self.h.shape != (cfg.l, cfg.n_p):
            raise ValueError(
                f"CIR frame shape {self.h.shape} does not match the radio configuration "
                f"({cfg.l}, {cfg.n_p})"
            )
