"""Matrix and image files: CSV, "NKE1" binary matrices, "NKE-IMG" tensors.

CSV holds one sample per row, an optional non-numeric header row, and round
trips float64 exactly through 17-significant-digit decimal. The binary
formats carry an ASCII header line ("NKE1 rows cols" or "NKE-IMG d1 d2 c")
followed by the row-major values as little-endian 64-bit floats; they exist
for artifacts too large to diff anyway. Readers sniff the header, so a
matrix file can be loaded without knowing which writer produced it, and all
writers are deterministic: equal arrays give byte-identical files.
"""

from __future__ import annotations

import numpy as np

from .errors import BadParams

__all__ = [
    "read_csv_matrix",
    "write_csv_matrix",
    "read_nke1",
    "write_nke1",
    "read_matrix",
    "write_matrix",
    "read_image",
    "write_image",
]

_NKE1_MAGIC = b"NKE1 "
_IMG_MAGIC = b"NKE-IMG "
_BINARY_CUTOFF = 1_000_000  # entries; larger matrices default to binary


def _require_finite(arr: np.ndarray, path: str) -> np.ndarray:
    if not np.all(np.isfinite(arr)):
        bad = int(np.argmax(~np.all(np.isfinite(arr.reshape(arr.shape[0], -1)), axis=1)))
        raise BadParams(f"{path}: non-finite value in row {bad}")
    return arr


def _as_matrix(arr, path: str) -> np.ndarray:
    arr = np.asarray(arr, dtype=float)
    if arr.ndim != 2 or min(arr.shape) < 1:
        raise BadParams(f"{path}: expected a 2-D matrix, got shape {arr.shape}")
    return _require_finite(arr, path)


def write_csv_matrix(path, matrix) -> None:
    matrix = _as_matrix(matrix, str(path))
    np.savetxt(path, matrix, delimiter=",", fmt="%.17g")


def read_csv_matrix(path) -> np.ndarray:
    with open(path, "r", encoding="utf-8") as fh:
        lines = [(i + 1, ln.strip()) for i, ln in enumerate(fh)]
    lines = [(i, ln) for i, ln in lines if ln]
    if not lines:
        raise BadParams(f"{path}: empty CSV file")
    start = 0
    try:
        [float(tok) for tok in lines[0][1].split(",")]
    except ValueError:
        start = 1  # header row
    if start == len(lines):
        raise BadParams(f"{path}: header but no data rows")
    data = []
    width = None
    for lineno, ln in lines[start:]:
        try:
            row = [float(tok) for tok in ln.split(",")]
        except ValueError:
            raise BadParams(f"{path}: row {lineno} has a non-numeric field")
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise BadParams(
                f"{path}: row {lineno} has {len(row)} fields, expected {width}"
            )
        data.append(row)
    return _require_finite(np.asarray(data, dtype=float), str(path))


def _write_header_block(path, magic: bytes, dims, arr: np.ndarray) -> None:
    header = magic + b" ".join(str(int(d)).encode() for d in dims) + b"\n"
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def _read_header_block(path, magic: bytes, n_dims: int):
    with open(path, "rb") as fh:
        header = fh.readline()
        if not header.startswith(magic):
            raise BadParams(
                f"{path}: missing {magic.strip().decode()} header"
            )
        fields = header[len(magic):].split()
        if len(fields) != n_dims:
            raise BadParams(f"{path}: header needs {n_dims} dimensions")
        try:
            dims = [int(f) for f in fields]
        except ValueError:
            raise BadParams(f"{path}: non-integer dimension in header")
        if any(d < 1 for d in dims):
            raise BadParams(f"{path}: dimensions must be positive, got {dims}")
        count = int(np.prod(dims))
        payload = fh.read()
    if len(payload) != 8 * count:
        raise BadParams(
            f"{path}: expected {8 * count} payload bytes, found {len(payload)}"
        )
    values = np.frombuffer(payload, dtype="<f8").astype(float)
    return values.reshape(dims)


def write_nke1(path, matrix) -> None:
    matrix = _as_matrix(matrix, str(path))
    _write_header_block(path, _NKE1_MAGIC, matrix.shape, matrix)


def read_nke1(path) -> np.ndarray:
    return _require_finite(_read_header_block(path, _NKE1_MAGIC, 2), str(path))


def read_matrix(path) -> np.ndarray:
    """Load a matrix, sniffing NKE1 binary vs CSV from the first bytes."""
    with open(path, "rb") as fh:
        head = fh.read(len(_NKE1_MAGIC))
    if head == _NKE1_MAGIC:
        return read_nke1(path)
    return read_csv_matrix(path)


def write_matrix(path, matrix, fmt: str = "auto") -> str:
    """Write CSV or NKE1, choosing by entry count when fmt is "auto".

    Returns the format actually used.
    """
    if fmt not in ("auto", "csv", "nke1"):
        raise BadParams(f"fmt must be 'auto', 'csv', or 'nke1', got {fmt!r}")
    matrix = _as_matrix(matrix, str(path))
    if fmt == "auto":
        fmt = "csv" if matrix.size <= _BINARY_CUTOFF else "nke1"
    if fmt == "csv":
        write_csv_matrix(path, matrix)
    else:
        write_nke1(path, matrix)
    return fmt


def write_image(path, image) -> None:
    image = np.asarray(image, dtype=float)
    if image.ndim != 3 or min(image.shape) < 1:
        raise BadParams(f"{path}: expected a d1 x d2 x channels tensor, got shape {image.shape}")
    _require_finite(image, str(path))
    _write_header_block(path, _IMG_MAGIC, image.shape, image)


def read_image(path) -> np.ndarray:
    """Load an image tensor; a CSV file is read as one single-channel image."""
    with open(path, "rb") as fh:
        head = fh.read(len(_IMG_MAGIC))
    if head == _IMG_MAGIC:
        return _require_finite(_read_header_block(path, _IMG_MAGIC, 3), str(path))
    grid = read_csv_matrix(path)
    return grid[:, :, None]
