"""Bit-exact binary serialization of coefficient fields.

Layout (little-endian throughout):

    bytes 0..3    magic "HGL1"
    bytes 4..7    u32 format version (currently 1)
    bytes 8..11   u32 dimension d
    bytes 12..15  u32 side length L
    bytes 16..23  f64 ellipticity constant lambda
    bytes 24..    d * L^d f64 edge values in canonical edge order

Round-tripping a field through dump/load reproduces it bit for bit.
"""

from __future__ import annotations

import os
import struct
import tempfile

import numpy as np

from .ensembles import CoefficientField
from .lattice import TorusLattice

MAGIC = b"HGL1"
VERSION = 1
_HEADER = struct.Struct("<4sIIId")


class FieldFormatError(ValueError):
    """Corrupt or unsupported field dump."""


def dump_field(a: CoefficientField, path):
    """Write a field dump atomically (temporary file + rename)."""
    header = _HEADER.pack(MAGIC, VERSION, a.lattice.d, a.lattice.L, a.lam)
    payload = np.ascontiguousarray(a.values, dtype="<f8").tobytes()
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".fielddump-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(header)
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_field(path) -> CoefficientField:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < _HEADER.size:
        raise FieldFormatError(
            f"file too short for a field dump header: {len(blob)} bytes < {_HEADER.size}"
        )
    magic, version, d, L, lam = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise FieldFormatError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise FieldFormatError(f"unsupported field dump version {version}, expected {VERSION}")
    lattice = TorusLattice(d, L)
    expected = _HEADER.size + 8 * lattice.n_edges
    if len(blob) != expected:
        raise FieldFormatError(
            f"truncated or padded payload: expected {expected} bytes total, got {len(blob)}"
        )
    values = np.frombuffer(blob, dtype="<f8", offset=_HEADER.size).astype(float)
    return CoefficientField(lattice, values, lam)
