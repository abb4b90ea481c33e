"""
Capture files, the CIR frames of one AP as recorded or simulated

Layout (all values little endian)

    offset  type        field
    0       6 bytes     magic b"AYCIR1"
    6       uint16      format version
    8       float64     carrier frequency f_o in Hz
    16      float64     bandwidth B in Hz
    24      float64     packet interval T_c in s
    32      uint32      number of taps L
    36      uint32      number of beam patterns N_p
    40      uint64      number of frames
    48      int32       AP id
    52      32 bytes    md5 hex digest of the codebook
    84      frames, each L x N_p row major complex64 (float32 real, imag)
"""

import logging
import os.path

import numpy as np

from .config import FileError
from .structures import RadioConfig

MAGIC = b"AYCIR1"
VERSION = 1

HEADER = np.dtype(
    [
        ("magic", "S6"),
        ("version", "<u2"),
        ("f_o", "<f8"),
        ("b", "<f8"),
        ("t_c", "<f8"),
        ("l", "<u4"),
        ("n_p", "<u4"),
        ("n_frames", "<u8"),
        ("ap", "<i4"),
        ("codebook", "S32"),
    ]
)
SAMPLE = np.dtype("<c8")


class CaptureError(FileError):
    """ A capture file is invalid """


class CodebookMismatchError(CaptureError):
    """ The capture was recorded with a different codebook """


class Capture:
    """ Header and frames of a capture file """

    def __init__(self, filename, radio, n_frames, ap, codebook_hash, frames):
        self.filename = filename
        #:RadioConfig: radio parameters stored in the header
        self.radio = radio
        self.n_frames = int(n_frames)
        #:int: AP id
        self.ap = int(ap)
        #:str: md5 of the codebook used during the capture
        self.codebook_hash = codebook_hash
        #:array of shape (n_frames, L, N_p): complex64 frames, memory mapped when read lazily
        self.frames = frames

    def __len__(self):
        return self.n_frames

    def check_codebook(self, codebook):
        """ Raise a CodebookMismatchError if codebook is not the one of the capture """
        if codebook.hash != self.codebook_hash:
            raise CodebookMismatchError(
                f"{self.filename} was recorded with codebook {self.codebook_hash}, "
                f"but the configuration gives {codebook.hash}"
            )

    def check_radio(self, radio):
        """ Raise a CaptureError if the radio parameters do not match """
        for name in ["f_o", "b", "t_c", "l", "n_p"]:
            if not np.isclose(self.radio[name], radio[name], rtol=1e-12, atol=0):
                raise CaptureError(
                    f"{self.filename} has {name}={self.radio[name]}, "
                    f"but the configuration gives {radio[name]}"
                )


def _header(radio, n_frames, ap, codebook_hash):
    header = np.zeros((), dtype=HEADER)
    header["magic"] = MAGIC
    header["version"] = VERSION
    header["f_o"] = radio.f_o
    header["b"] = radio.b
    header["t_c"] = radio.t_c
    header["l"] = radio.l
    header["n_p"] = radio.n_p
    header["n_frames"] = n_frames
    header["ap"] = ap
    header["codebook"] = codebook_hash.encode("ascii")
    return header


class CaptureWriter:
    """
    Writes a capture frame by frame

    The frame count is fixed in advance, closing a writer that did not get
    all frames raises a CaptureError.
    """

    def __init__(self, filename, radio, n_frames, ap, codebook_hash):
        if len(codebook_hash) != 32:
            raise ValueError(f"Codebook hash must be an md5 hex digest, got {codebook_hash!r}")
        self.filename = filename
        self.radio = radio
        self.n_frames = int(n_frames)
        self.written = 0
        self._file = open(filename, "wb")
        self._file.write(_header(radio, n_frames, ap, codebook_hash).tobytes())

    def write(self, frames):
        """ Append one frame (L, N_p) or a block of frames (n, L, N_p) """
        frames = np.asarray(frames)
        if frames.ndim == 2:
            frames = frames[None]
        shape = (self.radio.l, self.radio.n_p)
        if frames.ndim != 3 or frames.shape[1:] != shape:
            raise ValueError(f"Expected frames of shape (n, {shape[0]}, {shape[1]}), got {frames.shape}")
        if self.written + len(frames) > self.n_frames:
            raise CaptureError(f"{self.filename} only holds {self.n_frames} frames")
        self._file.write(np.ascontiguousarray(frames, dtype=SAMPLE).tobytes())
        self.written += len(frames)

    def close(self):
        if self._file.closed:
            return
        self._file.close()
        if self.written != self.n_frames:
            raise CaptureError(
                f"{self.filename} got {self.written} of its {self.n_frames} frames"
            )
        logging.info("Saved %i frames to %s", self.n_frames, self.filename)

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc_value, traceback):
        if exc_type is None:
            self.close()
        else:
            self._file.close()


def write_capture(filename, frames, radio, ap, codebook_hash, chunk=256):
    """
    Write all frames of one AP

    Parameters
    ----------
    filename : str
        output file
    frames : array like of shape (n, L, N_p)
        e.g. an array or a SceneFrames source
    radio : RadioConfig
        radio parameters written to the header
    ap : int
        AP id
    codebook_hash : str
        md5 of the codebook
    chunk : int, optional
        number of frames converted at once
    """
    n = len(frames)
    with CaptureWriter(filename, radio, n, ap, codebook_hash) as writer:
        for start in range(0, n, chunk):
            writer.write(frames[start : start + chunk])


def read_capture(filename, mmap=True):
    """
    Read a capture

    Parameters
    ----------
    filename : str
        capture file
    mmap : bool, optional
        map the frames into memory instead of reading them (default: True)

    Returns
    -------
    capture : Capture

    Raises
    ------
    CaptureError
        if the magic, the version or the file size are wrong
    """
    if not os.path.exists(filename):
        raise CaptureError(f"Capture not found: {filename}")
    size = os.path.getsize(filename)
    if size < HEADER.itemsize:
        raise CaptureError(f"{filename} is too short for a capture header")
    header = np.fromfile(filename, dtype=HEADER, count=1)[0]
    if header["magic"] != MAGIC:
        raise CaptureError(f"{filename} is not a capture file, magic {header['magic']!r}")
    if header["version"] != VERSION:
        raise CaptureError(f"{filename} has unsupported version {header['version']}")

    l, n_p, n_frames = int(header["l"]), int(header["n_p"]), int(header["n_frames"])
    expected = HEADER.itemsize + n_frames * l * n_p * SAMPLE.itemsize
    if size != expected:
        raise CaptureError(f"{filename} has {size} bytes, expected {expected}")
    try:
        radio = RadioConfig(
            f_o=float(header["f_o"]),
            b=float(header["b"]),
            t_c=float(header["t_c"]),
            l=l,
            n_p=n_p,
        )
    except ValueError as ex:
        raise CaptureError(f"{filename} has an invalid header: {ex}")

    shape = (n_frames, l, n_p)
    if n_frames == 0:
        frames = np.zeros(shape, dtype=SAMPLE)
    elif mmap:
        frames = np.memmap(filename, dtype=SAMPLE, mode="r", offset=HEADER.itemsize, shape=shape)
    else:
        frames = np.fromfile(filename, dtype=SAMPLE, offset=HEADER.itemsize).reshape(shape)
    logging.info("Loaded %s with %i frames of AP %i", filename, n_frames, int(header["ap"]))
    return Capture(
        filename, radio, n_frames, int(header["ap"]), header["codebook"].decode("ascii"), frames
    )
