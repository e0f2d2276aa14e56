"""Binary checkpoints with a bit-exact round trip.

Layout::

    b"MTHERMCK"                     8-byte magic
    header length                   uint32, little endian
    header                          UTF-8 JSON (version, grid, time, step, config_hash, ...)
    payload                         float64 little endian: u_x, u_y, u_z, F, theta, m, pi

Arrays are written in C order with shapes implied by the grid.
"""

from __future__ import annotations

import json
import struct
import warnings
from pathlib import Path

import numpy as np

from .errors import CheckpointError
from .grid import grid_from_spec
from .state import FieldState

MAGIC = b"MTHERMCK"
VERSION = 1
_DTYPE = np.dtype("<f8")


def _shapes(grid):
    dims = grid.dims
    return [grid.face_shape(0), grid.face_shape(1), grid.face_shape(2), (3, 3) + dims, dims, (3,) + dims, dims]


def save_checkpoint(state: FieldState, path, config_hash: str = "") -> None:
    header = {
        "version": VERSION,
        "grid": state.grid.spec(),
        "time": float(state.time).hex(),
        "step": int(state.step),
        "sphere_constrained": bool(state.sphere_constrained),
        "config_hash": config_hash,
    }
    blob = json.dumps(header, sort_keys=True).encode()
    with Path(path).open("wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for arr in state.arrays():
            fh.write(np.ascontiguousarray(arr, dtype=_DTYPE).tobytes())


def read_header(path) -> tuple[dict, int]:
    """Return ``(header, payload_offset)``."""
    with Path(path).open("rb") as fh:
        magic = fh.read(len(MAGIC))
        if magic != MAGIC:
            raise CheckpointError(f"{path}: not a checkpoint (bad magic {magic!r})")
        raw = fh.read(4)
        if len(raw) != 4:
            raise CheckpointError(f"{path}: truncated header length")
        (n,) = struct.unpack("<I", raw)
        blob = fh.read(n)
    if len(blob) != n:
        raise CheckpointError(f"{path}: corrupt header (expected {n} bytes, found {len(blob)})")
    try:
        header = json.loads(blob.decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path}: corrupt header ({exc})") from exc
    for key in ("version", "grid", "time", "step", "config_hash"):
        if key not in header:
            raise CheckpointError(f"{path}: corrupt header (missing {key!r})")
    return header, len(MAGIC) + 4 + n


def load_checkpoint(path, expected_config_hash: str | None = None) -> FieldState:
    """Read a checkpoint written by :func:`save_checkpoint`.

    A version or payload-size mismatch raises :class:`CheckpointError`. A
    differing ``expected_config_hash`` only warns, so a run can be resumed
    under an edited configuration on purpose.
    """
    header, offset = read_header(path)
    if header["version"] != VERSION:
        raise CheckpointError(f"{path}: checkpoint version {header['version']} is not supported (expected {VERSION})")
    if expected_config_hash is not None and header["config_hash"] != expected_config_hash:
        warnings.warn(
            f"{path}: config hash {header['config_hash']!r} differs from the current {expected_config_hash!r}",
            stacklevel=2,
        )
    grid = grid_from_spec(header["grid"])
    shapes = _shapes(grid)
    expected = sum(int(np.prod(s)) for s in shapes) * _DTYPE.itemsize
    data = Path(path).read_bytes()[offset:]
    if len(data) != expected:
        raise CheckpointError(f"{path}: payload size mismatch (expected {expected} bytes, found {len(data)})")
    arrays = []
    pos = 0
    for shape in shapes:
        count = int(np.prod(shape))
        arrays.append(np.frombuffer(data, dtype=_DTYPE, count=count, offset=pos).reshape(shape).astype(float))
        pos += count * _DTYPE.itemsize
    u = arrays[:3]
    F, theta, m, pi = arrays[3:]
    return FieldState(grid, u, F, theta, m, pi, float.fromhex(header["time"]), int(header["step"]),
                      bool(header.get("sphere_constrained", True)))
