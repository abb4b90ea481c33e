import numpy as np
import pytest

from trnsense.capture import (
    HEADER,
    CaptureError,
    CaptureWriter,
    CodebookMismatchError,
    read_capture,
    write_capture,
)
from trnsense.config import FileError
from trnsense.scenesim import synth_codebook
from trnsense.structures import RadioConfig


@pytest.fixture
def frames(rng):
    shape = (10, 16, 4)
    return (rng.normal(size=shape) + 1j * rng.normal(size=shape)).astype(np.complex64)


@pytest.fixture
def radio():
    return RadioConfig(l=16, n_p=4)


@pytest.fixture
def codebook():
    return synth_codebook(4)


def test_header_size():
    assert HEADER.itemsize == 84


@pytest.mark.parametrize("mmap", [True, False])
def test_round_trip(tmp_path, frames, radio, codebook, mmap):
    filename = str(tmp_path / "0.cir")
    write_capture(filename, frames, radio, 3, codebook.hash, chunk=3)
    capture = read_capture(filename, mmap=mmap)
    assert len(capture) == 10
    assert capture.ap == 3
    assert capture.codebook_hash == codebook.hash
    assert capture.radio.to_dict() == radio.to_dict()
    assert capture.frames.dtype == np.complex64
    assert np.array_equal(np.asarray(capture.frames), frames)
    capture.check_radio(radio)
    capture.check_codebook(codebook)


def test_empty_capture(tmp_path, radio, codebook):
    filename = str(tmp_path / "0.cir")
    write_capture(filename, np.zeros((0, 16, 4)), radio, 0, codebook.hash)
    capture = read_capture(filename)
    assert capture.frames.shape == (0, 16, 4)


def test_missing(tmp_path):
    assert issubclass(CaptureError, FileError)
    with pytest.raises(CaptureError):
        read_capture(str(tmp_path / "missing.cir"))


def test_corrupt(tmp_path, frames, radio, codebook):
    filename = tmp_path / "0.cir"
    write_capture(str(filename), frames, radio, 0, codebook.hash)
    data = filename.read_bytes()

    filename.write_bytes(b"AYCIR9" + data[6:])
    with pytest.raises(CaptureError, match="not a capture"):
        read_capture(str(filename))

    filename.write_bytes(data[:6] + np.array([2], dtype="<u2").tobytes() + data[8:])
    with pytest.raises(CaptureError, match="version"):
        read_capture(str(filename))

    filename.write_bytes(data[:-3])
    with pytest.raises(CaptureError, match="bytes"):
        read_capture(str(filename))

    filename.write_bytes(data[:40])
    with pytest.raises(CaptureError, match="too short"):
        read_capture(str(filename))


def test_mismatch(tmp_path, frames, radio, codebook):
    filename = str(tmp_path / "0.cir")
    write_capture(filename, frames, radio, 0, codebook.hash)
    capture = read_capture(filename)
    with pytest.raises(CodebookMismatchError):
        capture.check_codebook(synth_codebook(4, beamwidth=20.0))
    with pytest.raises(CaptureError):
        capture.check_radio(RadioConfig(l=16, n_p=4, b=2.16e9))


def test_writer_counts(tmp_path, frames, radio, codebook):
    filename = str(tmp_path / "0.cir")
    with pytest.raises(CaptureError):
        with CaptureWriter(filename, radio, 11, 0, codebook.hash) as writer:
            writer.write(frames)

    with CaptureWriter(filename, radio, 10, 0, codebook.hash) as writer:
        for frame in frames:
            writer.write(frame)
        with pytest.raises(CaptureError):
            writer.write(frames[0])
        with pytest.raises(ValueError):
            writer.write(np.zeros((1, 8, 4)))
    assert len(read_capture(filename)) == 10

    with pytest.raises(ValueError):
        CaptureWriter(filename, radio, 1, 0, "abc")
