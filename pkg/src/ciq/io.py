"""File formats used by the command line: MatrixMarket, plain vectors, CSV points, PGM."""
from importlib import resources
import json

import numpy as np
import scipy.io


class FormatError(ValueError):
    pass


def read_matrix_market(path):
    """Dense float matrix from a MatrixMarket file (coordinate or array)."""
    try:
        m = scipy.io.mmread(str(path))
    except (ValueError, IndexError) as exc:
        raise FormatError(f"{path}: not a readable MatrixMarket file ({exc})") from exc
    return np.asarray(m.toarray() if hasattr(m, "toarray") else m, dtype=float)


def write_matrix_market(path, matrix, symmetric=True):
    scipy.io.mmwrite(str(path), np.asarray(matrix, dtype=float),
                     symmetry="symmetric" if symmetric else "general")


def read_vector(path):
    """Whitespace-separated reals (any line layout)."""
    with open(path) as fh:
        text = fh.read()
    try:
        v = np.array(text.split(), dtype=float)
    except ValueError as exc:
        raise FormatError(f"{path}: expected whitespace-separated reals ({exc})") from exc
    if v.size == 0:
        raise FormatError(f"{path}: empty vector file")
    return v


def format_vector(v):
    return "\n".join(f"{x:.17g}" for x in np.ravel(v)) + "\n"


def write_vector(path, v):
    with open(path, "w") as fh:
        fh.write(format_vector(v))


def read_points_csv(path):
    """Points as an (n, D) array from a CSV file; a non-numeric first row is a header."""
    with open(path) as fh:
        lines = [ln for ln in fh.read().splitlines() if ln.strip()]
    if lines:
        try:
            [float(tok) for tok in lines[0].split(",")]
        except ValueError:
            lines = lines[1:]
    if not lines:
        raise FormatError(f"{path}: no data rows")
    try:
        pts = np.array([[float(tok) for tok in ln.split(",")] for ln in lines])
    except ValueError as exc:
        raise FormatError(f"{path}: non-numeric entry ({exc})") from exc
    return pts


def read_xy_csv(path):
    """CSV whose last column is a target: returns (X, y)."""
    data = read_points_csv(path)
    if data.shape[1] < 2:
        raise FormatError(f"{path}: need at least one input column and one target column")
    return data[:, :-1], data[:, -1]


def _pgm_tokens(data):
    # Header tokens of a PGM file, skipping '#' comments; returns tokens and raster offset.
    tokens, pos = [], 0
    while len(tokens) < 4:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise FormatError("truncated PGM header")
        tokens.append(data[start:pos])
    return tokens, pos + 1


def parse_pgm(data):
    """Decode binary (P5) or ASCII (P2) PGM bytes into floats in [0, 1]."""
    tokens, offset = _pgm_tokens(data)
    magic = tokens[0]
    if magic not in (b"P5", b"P2"):
        raise FormatError(f"unsupported PGM magic {magic!r}")
    w, h, maxval = (int(t) for t in tokens[1:4])
    if w < 1 or h < 1 or not 0 < maxval < 65536:
        raise FormatError(f"bad PGM dimensions {w}x{h} maxval {maxval}")
    if magic == b"P2":
        vals = np.array(data[offset:].split()[: w * h], dtype=float)
    else:
        dtype = np.dtype(np.uint8 if maxval < 256 else ">u2")
        raster = data[offset:offset + w * h * dtype.itemsize]
        vals = np.frombuffer(raster, dtype=dtype, count=len(raster) // dtype.itemsize).astype(float)
    if vals.size != w * h:
        raise FormatError(f"PGM raster has {vals.size} pixels, expected {w * h}")
    return vals.reshape(h, w) / maxval


def read_pgm(path):
    with open(path, "rb") as fh:
        try:
            return parse_pgm(fh.read())
        except FormatError as exc:
            raise FormatError(f"{path}: {exc}") from exc


def write_pgm(path, image):
    """Write an image with values in [0, 1] (clipped) as 8-bit binary PGM."""
    img = np.clip(np.asarray(image, dtype=float), 0.0, 1.0)
    if img.ndim != 2:
        raise ValueError("write_pgm needs a 2-D image")
    raster = np.round(img * 255).astype(np.uint8)
    h, w = raster.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode())
        fh.write(raster.tobytes())


def bundled_test_image():
    """The 32 x 32 test image shipped with the package, in [0, 1]."""
    data = resources.files("ciq").joinpath("data/test32.pgm").read_bytes()
    return parse_pgm(data)


def write_jsonl(fh, records):
    for rec in records:
        fh.write(json.dumps(rec) + "\n")
