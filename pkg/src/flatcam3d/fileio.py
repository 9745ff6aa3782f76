"""Readers and writers for the on-disk artifact formats.

Formats (all little-endian, bit-exact round-trips):

* FCMASK — text. Line 1 ``FCMASK 1``; line 2
  ``features <n> pitch_mm <p> offset_mm <o> seed <s> symmetric <0|1>``;
  line 3 the bits as a contiguous ``0``/``1`` string. Unknown versions are
  rejected. Floats are written in shortest round-trip form.
* FCMAT / FCVOL — binary. 8-byte magic ``FCMAT1\\n\\0`` / ``FCVOL1\\n\\0``,
  an ASCII header line ``rows cols`` / ``nx ny k``, then the row-major
  IEEE-754 binary64 little-endian payload, whose length must match exactly.
* PGM — binary P5, maxval 255, values scaled linearly by `peak`.
"""

from __future__ import annotations

import os

import numpy as np

from .errors import FormatError
from .optics import MaskSpec

__all__ = [
    "read_mask",
    "write_mask",
    "read_matrix",
    "write_matrix",
    "read_volume",
    "write_volume",
    "write_pgm",
    "write_residuals_csv",
    "write_reconstruction",
]

_MAT_MAGIC = b"FCMAT1\n\x00"
_VOL_MAGIC = b"FCVOL1\n\x00"


def write_mask(path, mask):
    lines = [
        "FCMASK 1",
        f"features {mask.n_features} pitch_mm {mask.pitch!r} offset_mm {mask.offset!r} "
        f"seed {mask.seed} symmetric {int(mask.symmetric)}",
        "".join("1" if b else "0" for b in mask.bits),
    ]
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_mask(path):
    with open(path, "r", encoding="ascii", newline="") as fh:
        text = fh.read()
    lines = text.split("\n")
    if len(lines) < 3:
        raise FormatError(f"{path}: truncated FCMASK file")
    magic = lines[0].split()
    if len(magic) != 2 or magic[0] != "FCMASK":
        raise FormatError(f"{path}: not an FCMASK file")
    if magic[1] != "1":
        raise FormatError(f"{path}: unsupported FCMASK version {magic[1]!r}")
    tokens = lines[1].split()
    expected = ("features", "pitch_mm", "offset_mm", "seed", "symmetric")
    if len(tokens) != 10 or tuple(tokens[0::2]) != expected:
        raise FormatError(f"{path}: malformed FCMASK header line")
    try:
        n = int(tokens[1])
        pitch = float(tokens[3])
        offset = float(tokens[5])
        seed = int(tokens[7])
        symmetric = {"0": False, "1": True}[tokens[9]]
    except (ValueError, KeyError):
        raise FormatError(f"{path}: malformed FCMASK header values") from None
    bit_text = lines[2]
    if len(bit_text) != n or set(bit_text) - {"0", "1"}:
        raise FormatError(f"{path}: expected {n} mask bits of 0/1, got {bit_text!r}")
    if any(line.strip() for line in lines[3:]):
        raise FormatError(f"{path}: trailing content after mask bits")
    bits = np.frombuffer(bit_text.encode("ascii"), dtype=np.uint8) - ord("0")
    return MaskSpec(bits=bits, pitch=pitch, offset=offset, seed=seed, symmetric=symmetric)


def _write_binary(path, magic, header, payload):
    with open(path, "wb") as fh:
        fh.write(magic)
        fh.write(header.encode("ascii"))
        fh.write(payload)


def _read_binary(path, magic, n_dims):
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:8] != magic:
        raise FormatError(f"{path}: bad magic (expected {magic!r})")
    end = data.find(b"\n", 8)
    if end < 0:
        raise FormatError(f"{path}: missing header line")
    try:
        dims = [int(tok) for tok in data[8:end].decode("ascii").split()]
    except (UnicodeDecodeError, ValueError):
        raise FormatError(f"{path}: malformed header line") from None
    if len(dims) != n_dims or any(d < 1 for d in dims):
        raise FormatError(f"{path}: expected {n_dims} positive dimensions, got {dims}")
    payload = data[end + 1 :]
    expected = 8 * int(np.prod(dims))
    if len(payload) != expected:
        raise FormatError(f"{path}: expected {expected} payload bytes, got {len(payload)}")
    return np.frombuffer(payload, dtype="<f8").reshape(dims)


def write_matrix(path, matrix):
    a = np.ascontiguousarray(matrix, dtype="<f8")
    if a.ndim != 2:
        raise FormatError("matrix must be 2-D")
    _write_binary(path, _MAT_MAGIC, f"{a.shape[0]} {a.shape[1]}\n", a.tobytes())


def read_matrix(path):
    return _read_binary(path, _MAT_MAGIC, 2).copy()


def write_volume(path, volume):
    a = np.ascontiguousarray(volume, dtype="<f8")
    if a.ndim != 3:
        raise FormatError("volume must be 3-D")
    _write_binary(
        path, _VOL_MAGIC, f"{a.shape[0]} {a.shape[1]} {a.shape[2]}\n", a.tobytes()
    )


def read_volume(path):
    return _read_binary(path, _VOL_MAGIC, 3).copy()


def write_pgm(path, image, peak=None):
    """8-bit binary PGM preview, scaled linearly to [0, 255] by `peak`
    (default: the image maximum; an all-zero image stays zero)."""
    a = np.asarray(image, dtype=float)
    if a.ndim != 2:
        raise FormatError("image must be 2-D")
    if peak is None:
        peak = float(a.max())
    scaled = (
        np.zeros(a.shape) if peak <= 0 else np.clip(a / peak, 0.0, 1.0) * 255.0
    )
    data = np.rint(scaled).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{a.shape[1]} {a.shape[0]}\n255\n".encode("ascii"))
        fh.write(data.tobytes())


def write_residuals_csv(path, residuals):
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("iter,residual\n")
        for i, r in enumerate(residuals, 1):
            fh.write(f"{i},{float(r)!r}\n")


def write_reconstruction(out_dir, result):
    """Serialize a ReconstructionResult: depth map and intensity as FCMAT
    (depth indices integer-coded as float64), residual history as CSV."""
    os.makedirs(out_dir, exist_ok=True)
    write_matrix(os.path.join(out_dir, "depth_map.fcmat"), result.depth_map.astype(float))
    write_matrix(os.path.join(out_dir, "intensity.fcmat"), result.intensity)
    write_residuals_csv(os.path.join(out_dir, "residuals.csv"), result.residuals)
