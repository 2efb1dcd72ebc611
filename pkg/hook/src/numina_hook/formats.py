"""Standalone ATNB writer and NGDF reader.

The hook exchanges data with the core pipeline only through files, so these
are independent implementations of the two wire formats (little-endian):

ATNB v1: "ATNB" | u32 version | u8 kind | 3 pad | u32 frames, heads, grid_h,
grid_w, text_len, timestep, layer | f32 payload | u64 trailer_len | JSON
{"tokens": [...], "meta": {...}}.

NGDF v1: "NGDF" | u32 version | u32 frames, grid_h, grid_w, n_tokens |
f32 neg_const, boost, fraction | u32 total_steps | per (frame, slot): u8 mode
grid then f32 base grid | u64 trailer_len | JSON {"token_indices": [...],
"categories": [...]}.

Mode codes: 0 none, 1 suppress, 2 boost, 3 overwrite.
"""

import json
import struct

import numpy as np

KIND_SELF = 0
KIND_CROSS = 1
KIND_PRESOFTMAX = 2

MODE_NONE = 0
MODE_SUPPRESS = 1
MODE_BOOST = 2
MODE_OVERWRITE = 3

_ATNB_HEADER = struct.Struct("<4sIB3x7I")
_NGDF_HEADER = struct.Struct("<4sI4I3fI")
_U64 = struct.Struct("<Q")


def write_atnb(path, kind, data, grid_h, grid_w, text_len, tokens=(),
               timestep=0, layer=0, meta=None):
    """Serialize a [frames, heads, N, M] float tensor as an ATNB v1 file."""
    data = np.ascontiguousarray(data, dtype="<f4")
    frames, heads = data.shape[0], data.shape[1]
    header = _ATNB_HEADER.pack(b"ATNB", 1, kind, frames, heads, grid_h,
                               grid_w, text_len, timestep, layer)
    trailer = json.dumps({"tokens": list(tokens), "meta": meta or {}},
                         sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(data.tobytes())
        fh.write(_U64.pack(len(trailer)))
        fh.write(trailer)


def read_ngdf(path):
    """Parse an NGDF v1 file into a plain dict of arrays and parameters."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] != b"NGDF":
        raise ValueError(f"{path}: not an NGDF file")
    (_, version, frames, gh, gw, n_tokens, neg_const, boost, fraction,
     total_steps) = _NGDF_HEADER.unpack_from(raw, 0)
    if version != 1:
        raise ValueError(f"unsupported NGDF version {version}")
    cell = gh * gw
    offset = _NGDF_HEADER.size
    modes = np.zeros((frames, n_tokens, gh, gw), dtype=np.uint8)
    bases = np.zeros((frames, n_tokens, gh, gw), dtype=np.float32)
    for f in range(frames):
        for s in range(n_tokens):
            modes[f, s] = np.frombuffer(raw, np.uint8, cell, offset).reshape(gh, gw)
            offset += cell
            bases[f, s] = np.frombuffer(raw, "<f4", cell, offset).reshape(gh, gw)
            offset += 4 * cell
    (trailer_len,) = _U64.unpack_from(raw, offset)
    offset += _U64.size
    trailer = json.loads(raw[offset : offset + trailer_len].decode("utf-8"))
    return {
        "frames": frames,
        "grid_h": gh,
        "grid_w": gw,
        "neg_const": neg_const,
        "boost": boost,
        "fraction": fraction,
        "total_steps": total_steps,
        "modes": modes,
        "bases": bases,
        "token_indices": [int(i) for i in trailer["token_indices"]],
        "categories": list(trailer.get("categories", [])),
    }


def schedule_value(t, total_steps, fraction):
    """Linear decay over the guided window: 1 at t=0, 0 from
    fraction * total_steps on."""
    return max(0.0, 1.0 - t / (fraction * total_steps))
