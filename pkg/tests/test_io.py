import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from lorma.exceptions import SnapshotFormatError
from lorma.io import (
    decode_matrix,
    dump_json,
    encode_matrix,
    format_float,
    load_matrix,
    load_matrix_csv,
    matrix_from_csv,
    matrix_to_csv,
    save_matrix,
    save_matrix_csv,
    write_rows_csv,
)

matrices = arrays(
    np.float64,
    st.tuples(st.integers(1, 6), st.integers(1, 6)),
    elements=st.floats(allow_nan=False, allow_infinity=False),
)


@settings(max_examples=50, deadline=None)
@given(matrices)
def test_snapshot_round_trip_bitwise(m):
    out = decode_matrix(encode_matrix(m))
    assert out.tobytes() == m.tobytes()


@settings(max_examples=50, deadline=None)
@given(matrices)
def test_csv_round_trip_bitwise(m):
    assert matrix_from_csv(matrix_to_csv(m)).tobytes() == m.tobytes()


def test_snapshot_header_layout():
    data = encode_matrix(np.array([[1.0, 2.0]]))
    assert data[:4] == b"LRMA"
    assert data[4] == 1
    assert int.from_bytes(data[5:9], "little") == 1
    assert int.from_bytes(data[9:13], "little") == 2
    assert len(data) == 13 + 16


def test_bad_magic_reports_offset():
    data = bytearray(encode_matrix(np.eye(2)))
    data[2] = ord("X")
    with pytest.raises(SnapshotFormatError, match="offset 2") as info:
        decode_matrix(bytes(data))
    assert info.value.offset == 2


def test_truncated_and_padded_snapshots():
    data = encode_matrix(np.eye(2))
    with pytest.raises(SnapshotFormatError, match="mismatch"):
        decode_matrix(data[:-1])
    with pytest.raises(SnapshotFormatError):
        decode_matrix(data + b"\0")
    with pytest.raises(SnapshotFormatError, match="truncated"):
        decode_matrix(data[:5])


def test_nonfinite_payload_rejected():
    data = bytearray(encode_matrix(np.zeros((1, 2))))
    data[13 + 8:] = np.array([np.nan]).astype("<f8").tobytes()
    with pytest.raises(SnapshotFormatError) as info:
        decode_matrix(bytes(data))
    assert info.value.offset == 21


def test_file_round_trips(tmp_path, rng):
    m = rng.standard_normal((3, 5))
    save_matrix(tmp_path / "m.lrma", m)
    np.testing.assert_array_equal(load_matrix(tmp_path / "m.lrma"), m)
    save_matrix_csv(tmp_path / "m.csv", m)
    np.testing.assert_array_equal(load_matrix_csv(tmp_path / "m.csv"), m)
    assert b"\r" not in (tmp_path / "m.csv").read_bytes()


def test_ragged_csv_rejected():
    with pytest.raises(ValueError, match="ragged"):
        matrix_from_csv("1,2\n3\n")


def test_format_float_uses_dot():
    assert format_float(0.1) == "0.1"
    assert format_float(1e-300) == "1e-300"


def test_rows_csv_and_json(tmp_path):
    write_rows_csv(tmp_path / "r.csv", ("step", "loss"), [(0, 0.5), (1, 0.25)])
    assert (tmp_path / "r.csv").read_bytes() == b"step,loss\n0,0.5\n1,0.25\n"
    dump_json(tmp_path / "s.json", {"b": 1, "a": [1.5]})
    text = (tmp_path / "s.json").read_text()
    assert text.index('"a"') < text.index('"b"')
    assert json.loads(text) == {"a": [1.5], "b": 1}
