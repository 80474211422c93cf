"""Matrix snapshots, CSV import/export and adapter persistence.

Binary snapshot layout (all little-endian)::

    offset 0   4 bytes   magic b"LRMA"
    offset 4   1 byte    version 0x01
    offset 5   uint32    rows
    offset 9   uint32    cols
    offset 13  float64[rows * cols], row-major
"""

import csv
import io as _io
import json
import struct
from pathlib import Path

import numpy as np

from .adapters import AdapterConfig, AdapterState
from .exceptions import SnapshotFormatError
from .validation import check_matrix

MAGIC = b"LRMA"
VERSION = 1
_HEADER = struct.Struct("<4sBII")


def encode_matrix(m):
    m = check_matrix(m, "m")
    rows, cols = m.shape
    return _HEADER.pack(MAGIC, VERSION, rows, cols) + m.astype("<f8").tobytes()


def decode_matrix(data):
    if len(data) < _HEADER.size:
        raise SnapshotFormatError(
            f"snapshot truncated: {len(data)} bytes, header needs {_HEADER.size}",
            offset=len(data),
        )
    magic, version, rows, cols = _HEADER.unpack_from(data)
    if magic != MAGIC:
        bad = next(i for i in range(4) if magic[i] != MAGIC[i])
        raise SnapshotFormatError(f"bad magic bytes {magic!r}, expected {MAGIC!r}", offset=bad)
    if version != VERSION:
        raise SnapshotFormatError(f"unsupported snapshot version {version}", offset=4)
    if rows == 0 or cols == 0:
        raise SnapshotFormatError(f"empty matrix {rows}x{cols}", offset=5)
    expected = _HEADER.size + 8 * rows * cols
    if len(data) != expected:
        raise SnapshotFormatError(
            f"payload size mismatch for {rows}x{cols}: expected {expected} bytes, "
            f"got {len(data)}",
            offset=min(len(data), expected),
        )
    m = np.frombuffer(data, dtype="<f8", offset=_HEADER.size).astype(np.float64)
    m = m.reshape(rows, cols)
    bad = np.flatnonzero(~np.isfinite(m))
    if bad.size:
        raise SnapshotFormatError("non-finite value", offset=_HEADER.size + 8 * int(bad[0]))
    return m


def save_matrix(path, m):
    Path(path).write_bytes(encode_matrix(m))


def load_matrix(path):
    return decode_matrix(Path(path).read_bytes())


def format_float(x):
    """Shortest round-tripping decimal form, locale independent."""
    return repr(float(x))


def matrix_to_csv(m):
    m = check_matrix(m, "m")
    return "".join(",".join(format_float(v) for v in row) + "\n" for row in m)


def matrix_from_csv(text):
    rows = [row for row in csv.reader(_io.StringIO(text)) if row]
    if not rows:
        raise ValueError("CSV contains no rows")
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise ValueError(f"ragged CSV rows with widths {sorted(widths)}")
    return check_matrix([[float(v) for v in r] for r in rows], "csv")


def save_matrix_csv(path, m):
    with open(path, "w", newline="\n", encoding="ascii") as fh:
        fh.write(matrix_to_csv(m))


def load_matrix_csv(path):
    return matrix_from_csv(Path(path).read_text(encoding="ascii"))


def write_rows_csv(path, header, rows):
    """Write a headed CSV with LF endings and repr-formatted floats."""
    with open(path, "w", newline="", encoding="ascii") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow(format_float(v) if isinstance(v, float) else v for v in row)


def dump_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="ascii")


def save_adapter(directory, state):
    """Write ``w0.lrma``, ``b.lrma``, ``a.lrma`` and ``adapter.json``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    save_matrix(directory / "w0.lrma", state.w0)
    save_matrix(directory / "b.lrma", state.b)
    save_matrix(directory / "a.lrma", state.a)
    dump_json(directory / "adapter.json", state.config.to_dict())


def load_adapter(directory):
    directory = Path(directory)
    meta = json.loads((directory / "adapter.json").read_text(encoding="ascii"))
    return AdapterState(
        w0=load_matrix(directory / "w0.lrma"),
        b=load_matrix(directory / "b.lrma"),
        a=load_matrix(directory / "a.lrma"),
        config=AdapterConfig(**meta),
    )
