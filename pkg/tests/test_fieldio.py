"""Binary field dump format: round trips and corruption handling."""

import struct

import numpy as np
import pytest

from homoglab.ensembles import EnsembleSpec, SeedContext, sample
from homoglab.fieldio import MAGIC, FieldFormatError, dump_field, load_field
from homoglab.lattice import TorusLattice


@pytest.fixture
def field():
    lat = TorusLattice(2, 8)
    return sample(EnsembleSpec.bernoulli(0.25, 0.25, 1.0, 0.5), lat, SeedContext(12))


def test_round_trip_bit_identical(tmp_path, field):
    path = tmp_path / "a.hgl"
    dump_field(field, path)
    back = load_field(path)
    assert np.array_equal(back.values, field.values)
    assert back.lattice == field.lattice
    assert back.lam == field.lam
    # dumping the loaded field reproduces the bytes exactly
    path2 = tmp_path / "b.hgl"
    dump_field(back, path2)
    assert path.read_bytes() == path2.read_bytes()


def test_header_layout(tmp_path, field):
    path = tmp_path / "a.hgl"
    dump_field(field, path)
    blob = path.read_bytes()
    magic, version, d, L, lam = struct.unpack_from("<4sIIId", blob)
    assert magic == MAGIC == b"HGL1"
    assert (version, d, L, lam) == (1, 2, 8, 0.25)
    assert len(blob) == 24 + 8 * field.lattice.n_edges


def test_bad_magic(tmp_path, field):
    path = tmp_path / "a.hgl"
    dump_field(field, path)
    blob = bytearray(path.read_bytes())
    blob[:4] = b"NOPE"
    path.write_bytes(bytes(blob))
    with pytest.raises(FieldFormatError, match="HGL1"):
        load_field(path)


def test_unsupported_version(tmp_path, field):
    path = tmp_path / "a.hgl"
    dump_field(field, path)
    blob = bytearray(path.read_bytes())
    struct.pack_into("<I", blob, 4, 99)
    path.write_bytes(bytes(blob))
    with pytest.raises(FieldFormatError, match="version"):
        load_field(path)


def test_truncated_payload(tmp_path, field):
    path = tmp_path / "a.hgl"
    dump_field(field, path)
    blob = path.read_bytes()[:-16]
    path.write_bytes(blob)
    with pytest.raises(FieldFormatError) as err:
        load_field(path)
    # message carries expected vs actual byte counts
    assert str(24 + 8 * field.lattice.n_edges) in str(err.value)
    assert str(len(blob)) in str(err.value)


def test_too_short_for_header(tmp_path):
    path = tmp_path / "a.hgl"
    path.write_bytes(b"HGL")
    with pytest.raises(FieldFormatError, match="header"):
        load_field(path)
