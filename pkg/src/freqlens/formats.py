"""Binary persistence: feature dumps ("F3FT") and checkpoints ("F3CK").

Both formats are little-endian and fully deterministic, so byte equality is
the round-trip test. Feature dumps hold one tensor (f32 or f64); checkpoints
hold the config hash, step count, RNG state and a named f64 tensor table.
"""

import struct
from dataclasses import dataclass

import numpy as np

DUMP_MAGIC = b"F3FT"
CKPT_MAGIC = b"F3CK"
DUMP_VERSION = 1
CKPT_VERSION = 1

_DTYPE_CODES = {0: "<f4", 1: "<f8"}
_DTYPE_NAMES = {"f32": 0, "f64": 1}


class FormatError(ValueError):
    """Malformed dump or checkpoint payload."""


def write_feature_dump(path, tensor, dtype: str = "f32") -> None:
    """Persist one row-major tensor; dtype is 'f32' or 'f64'."""
    if dtype not in _DTYPE_NAMES:
        raise ValueError(f"dtype must be f32 or f64, got {dtype!r}")
    code = _DTYPE_NAMES[dtype]
    arr = np.ascontiguousarray(tensor, dtype=_DTYPE_CODES[code])
    if arr.ndim < 1 or arr.ndim > 255:
        raise ValueError(f"unsupported rank {arr.ndim}")
    with open(path, "wb") as fh:
        fh.write(DUMP_MAGIC)
        fh.write(struct.pack("<HBB", DUMP_VERSION, code, arr.ndim))
        fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
        fh.write(arr.tobytes())


def read_feature_dump(path) -> np.ndarray:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != DUMP_MAGIC:
        raise FormatError(f"bad magic {data[:4]!r}, expected {DUMP_MAGIC!r}")
    version, code, ndim = struct.unpack_from("<HBB", data, 4)
    if version != DUMP_VERSION:
        raise FormatError(f"unsupported dump version {version}")
    if code not in _DTYPE_CODES:
        raise FormatError(f"unknown dtype code {code}")
    dims = struct.unpack_from(f"<{ndim}I", data, 8)
    offset = 8 + 4 * ndim
    dtype = np.dtype(_DTYPE_CODES[code])
    expected = int(np.prod(dims)) * dtype.itemsize
    payload = data[offset:]
    if len(payload) != expected:
        raise FormatError(f"payload is {len(payload)} bytes, expected {expected}")
    return np.frombuffer(payload, dtype=dtype).reshape(dims).copy()


def rng_state_words(rng: np.random.Generator) -> tuple:
    """PCG64 state packed as six u64 words."""
    st = rng.bit_generator.state
    if st["bit_generator"] != "PCG64":
        raise ValueError("only PCG64 generators are supported")
    mask = (1 << 64) - 1
    state = st["state"]["state"]
    inc = st["state"]["inc"]
    return (state & mask, (state >> 64) & mask, inc & mask, (inc >> 64) & mask,
            int(st["has_uint32"]), int(st["uinteger"]))


def rng_from_words(words) -> np.random.Generator:
    rng = np.random.default_rng(0)
    rng.bit_generator.state = {
        "bit_generator": "PCG64",
        "state": {"state": words[0] | (words[1] << 64),
                  "inc": words[2] | (words[3] << 64)},
        "has_uint32": int(words[4]),
        "uinteger": int(words[5]),
    }
    return rng


@dataclass
class Checkpoint:
    params: dict  # name -> float64 ndarray
    config_hash: bytes
    step: int
    rng_words: tuple


def save_checkpoint(path, params: dict, config_hash: bytes, step: int,
                    rng_words: tuple = (0, 0, 0, 0, 0, 0)) -> None:
    if len(config_hash) != 32:
        raise ValueError("config_hash must be 32 bytes")
    with open(path, "wb") as fh:
        fh.write(CKPT_MAGIC)
        fh.write(struct.pack("<H", CKPT_VERSION))
        fh.write(config_hash)
        fh.write(struct.pack("<Q", step))
        fh.write(struct.pack("<6Q", *rng_words))
        names = sorted(params)
        fh.write(struct.pack("<I", len(names)))
        for name in names:
            # np.asarray keeps 0-d tensors 0-d (ascontiguousarray promotes them)
            arr = np.asarray(params[name], dtype="<f8", order="C")
            encoded = name.encode("utf-8")
            fh.write(struct.pack("<H", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<B", arr.ndim))
            if arr.ndim:
                fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            fh.write(arr.tobytes())


def load_checkpoint(path) -> Checkpoint:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != CKPT_MAGIC:
        raise FormatError(f"bad magic {data[:4]!r}, expected {CKPT_MAGIC!r}")
    (version,) = struct.unpack_from("<H", data, 4)
    if version != CKPT_VERSION:
        raise FormatError(f"unsupported checkpoint version {version}")
    offset = 6
    config_hash = data[offset:offset + 32]
    offset += 32
    (step,) = struct.unpack_from("<Q", data, offset)
    offset += 8
    rng_words = struct.unpack_from("<6Q", data, offset)
    offset += 48
    (count,) = struct.unpack_from("<I", data, offset)
    offset += 4
    params = {}
    for _ in range(count):
        (name_len,) = struct.unpack_from("<H", data, offset)
        offset += 2
        name = data[offset:offset + name_len].decode("utf-8")
        offset += name_len
        (ndim,) = struct.unpack_from("<B", data, offset)
        offset += 1
        dims = struct.unpack_from(f"<{ndim}I", data, offset) if ndim else ()
        offset += 4 * ndim
        size = int(np.prod(dims)) if ndim else 1
        payload = data[offset:offset + 8 * size]
        if len(payload) != 8 * size:
            raise FormatError(f"tensor {name!r} is truncated")
        offset += 8 * size
        params[name] = np.frombuffer(payload, dtype="<f8").reshape(dims).copy()
    if offset != len(data):
        raise FormatError(f"{len(data) - offset} trailing bytes after tensor table")
    return Checkpoint(params=params, config_hash=config_hash, step=step,
                      rng_words=rng_words)
