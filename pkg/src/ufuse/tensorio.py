"""Binary tensor files and PGM export.

Tensor layout::

    UFTENS1\\n
    dtype=<f32|f64|u8> dims=<d0,d1,...>\\n
    <little-endian, row-major payload>
"""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .dsp import minmax_normalize

MAGIC = b"UFTENS1"
DTYPES = {"f32": np.dtype("<f4"), "f64": np.dtype("<f8"), "u8": np.dtype("u1")}
_CODES = {v: k for k, v in DTYPES.items()}


class TensorFormatError(ValueError):
    pass


class BadMagicError(TensorFormatError):
    pass


class UnknownDtypeError(TensorFormatError):
    pass


class TruncatedPayloadError(TensorFormatError):
    pass


def _dtype_code(dtype) -> str:
    if isinstance(dtype, str) and dtype in DTYPES:
        return dtype
    dt = np.dtype(dtype)
    if dt == np.bool_:
        dt = np.dtype("u1")
    code = _CODES.get(dt.newbyteorder("<") if dt.itemsize > 1 else dt)
    if code is None:
        raise UnknownDtypeError(f"unsupported dtype {dt}; expected one of {sorted(DTYPES)}")
    return code


def encode_tensor(values, dtype=None) -> bytes:
    arr = np.asarray(values)
    code = _dtype_code(dtype if dtype is not None else arr.dtype)
    arr = np.ascontiguousarray(arr, dtype=DTYPES[code])
    header = MAGIC + b"\n" + f"dtype={code} dims={','.join(map(str, arr.shape))}\n".encode()
    return header + arr.tobytes(order="C")


def decode_tensor(blob: bytes) -> np.ndarray:
    first, sep, rest = blob.partition(b"\n")
    if first != MAGIC or not sep:
        raise BadMagicError(f"bad magic {first[:16]!r}")
    line, sep, payload = rest.partition(b"\n")
    if not sep:
        raise TruncatedPayloadError("missing header line")
    try:
        dfield, sfield = line.decode("ascii").split(" ")
        key_d, code = dfield.split("=")
        key_s, dims = sfield.split("=")
        if (key_d, key_s) != ("dtype", "dims"):
            raise ValueError(line)
        shape = tuple(int(d) for d in dims.split(",")) if dims else ()
    except ValueError as exc:
        raise TensorFormatError(f"malformed header line {line!r}") from exc
    if code not in DTYPES:
        raise UnknownDtypeError(f"unknown dtype {code!r}")
    dt = DTYPES[code]
    expected = int(np.prod(shape, dtype=np.int64)) * dt.itemsize
    if len(payload) < expected:
        raise TruncatedPayloadError(f"payload has {len(payload)} bytes, expected {expected}")
    if len(payload) > expected:
        raise TensorFormatError(f"payload has {len(payload) - expected} trailing bytes")
    return np.frombuffer(payload, dtype=dt).reshape(shape).copy()


def write_tensor(path, values, dtype=None) -> None:
    Path(path).write_bytes(encode_tensor(values, dtype))


def read_tensor(path) -> np.ndarray:
    return decode_tensor(Path(path).read_bytes())


def export_pgm(img, path) -> None:
    """Write a 2-D array as binary PGM; rows of the file are the first array axis."""
    img = np.asarray(img, dtype=float)
    if img.ndim != 2:
        raise ValueError(f"PGM export needs a 2-D image, got shape {img.shape}")
    pix = np.rint(255.0 * minmax_normalize(img)).astype(np.uint8)
    rows, cols = pix.shape
    Path(path).write_bytes(f"P5\n{cols} {rows}\n255\n".encode() + pix.tobytes())
