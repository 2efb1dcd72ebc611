"""Binary containers and JSON records for every on-disk artifact.

Formats (all little-endian):

ATNB v1 (attention bundle)
    magic "ATNB" | u32 version=1 | u8 kind (0=self, 1=cross, 2=presoftmax)
    | 3 pad bytes | u32 frames, heads, grid_h, grid_w, text_len, timestep,
    layer | f32 payload, row-major, shape [F, H, N, M] with N = grid_h *
    grid_w and M = text_len (or N when text_len is 0) | u64 trailer_len |
    UTF-8 JSON {"tokens": [...], "meta": {...}}.

NLAY v1 (label layout)
    magic "NLAY" | u32 version=1 | u32 frames, grid_h, grid_w | u16 labels
    row-major per frame | u64 trailer_len | JSON {"labels": {...},
    "counts": [[...]], "targets": {...}, ...}.

NGDF v1 (guidance field)
    magic "NGDF" | u32 version=1 | u32 frames, grid_h, grid_w, n_tokens
    | f32 neg_const, k, fraction | u32 total_steps | per (frame, token
    slot): u8 mode grid then f32 base grid, row-major | u64 trailer_len |
    JSON {"token_indices": [...], "categories": [...]}.

CountRecord
    JSON {"classes": [...], "targets": [...], "frames": [[...], ...]}.

Reading and writing are exact inverses at byte level; JSON trailers are
serialized canonically (sorted keys, no whitespace) so round-trips are
byte-identical.
"""

import enum
import json
import struct
from dataclasses import dataclass, field as dc_field
from typing import Optional

import numpy as np

from .errors import (
    BadMagic,
    DimensionMismatch,
    FormatError,
    InvalidBundle,
    IoFailure,
    NonFinite,
    UnsupportedVersion,
)
from .guidance import DecaySchedule, GuidanceField, GuidanceSlot
from .layout import Layout

ROW_SUM_TOL = 1e-4

_ATNB_MAGIC = b"ATNB"
_NLAY_MAGIC = b"NLAY"
_NGDF_MAGIC = b"NGDF"
_ATNB_HEADER = struct.Struct("<4sIB3x7I")
_NLAY_HEADER = struct.Struct("<4sI3I")
_NGDF_HEADER = struct.Struct("<4sI4I3fI")
_U64 = struct.Struct("<Q")


class BundleKind(enum.IntEnum):
    SELF_ATTN = 0
    CROSS_ATTN = 1
    PRE_SOFTMAX = 2


def _canonical_json(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode("utf-8")


@dataclass
class AttentionBundle:
    """Dumped per-frame, per-head attention plus token metadata.

    ``data`` is float32 with shape [frames, heads, N, M]; M equals
    ``text_len`` for cross-attention and for pre-softmax dumps that carry
    text tokens, N otherwise.  Self- and cross-attention rows are softmax
    distributions (sum 1 within 1e-4); pre-softmax rows are unconstrained.
    """

    kind: BundleKind
    frames: int
    heads: int
    grid_h: int
    grid_w: int
    text_len: int
    data: np.ndarray
    tokens: list = dc_field(default_factory=list)
    timestep: int = 0
    layer: int = 0
    meta: dict = dc_field(default_factory=dict)

    @property
    def n_positions(self) -> int:
        return self.grid_h * self.grid_w

    @property
    def row_width(self) -> int:
        return self.text_len if self.text_len > 0 else self.n_positions

    def expected_shape(self):
        return (self.frames, self.heads, self.n_positions, self.row_width)


@dataclass
class Violation:
    code: str
    message: str
    frame: Optional[int] = None
    head: Optional[int] = None
    row: Optional[int] = None


@dataclass
class ValidationReport:
    violations: list = dc_field(default_factory=list)
    truncated: bool = False

    MAX_VIOLATIONS = 1000

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, code, message, frame=None, head=None, row=None):
        if len(self.violations) >= self.MAX_VIOLATIONS:
            self.truncated = True
            return
        self.violations.append(Violation(code, message, frame, head, row))

    def summary(self) -> str:
        if self.ok:
            return "valid"
        head = "; ".join(
            f"{v.code}@(f={v.frame},h={v.head},r={v.row})" for v in self.violations[:5]
        )
        more = "" if len(self.violations) <= 5 else f" (+{len(self.violations) - 5} more)"
        return head + more


def validate_bundle(bundle: AttentionBundle) -> ValidationReport:
    """Diagnostic check of every bundle invariant; never raises.

    The report names each violated invariant with its (frame, head, row)
    location; an empty report means the bundle is valid.
    """
    rep = ValidationReport()
    for name in ("frames", "heads", "grid_h", "grid_w"):
        if getattr(bundle, name) < 1:
            rep.add("bad_dims", f"{name} must be >= 1")
    if bundle.text_len < 0:
        rep.add("bad_dims", "text_len must be >= 0")
    if bundle.kind == BundleKind.SELF_ATTN and bundle.text_len != 0:
        rep.add("kind_mismatch", "self-attention bundles must have text_len 0")
    if bundle.kind == BundleKind.CROSS_ATTN and bundle.text_len < 1:
        rep.add("kind_mismatch", "cross-attention bundles must have text_len >= 1")
    if bundle.kind == BundleKind.CROSS_ATTN and len(bundle.tokens) != bundle.text_len:
        rep.add("token_mismatch",
                f"{len(bundle.tokens)} tokens for text_len {bundle.text_len}")
    if bundle.kind == BundleKind.PRE_SOFTMAX and bundle.tokens \
            and len(bundle.tokens) != bundle.text_len:
        rep.add("token_mismatch",
                f"{len(bundle.tokens)} tokens for text_len {bundle.text_len}")
    if bundle.kind == BundleKind.SELF_ATTN and bundle.tokens:
        rep.add("token_mismatch", "self-attention bundles carry no tokens")
    expected = bundle.expected_shape()
    if tuple(bundle.data.shape) != expected:
        rep.add("shape_mismatch", f"data shape {bundle.data.shape} != {expected}")
        return rep
    finite = np.isfinite(bundle.data)
    if not finite.all():
        bad = np.argwhere(~finite.all(axis=3))
        for f, h, r in bad:
            rep.add("non_finite", "NaN or Inf in row", int(f), int(h), int(r))
    if bundle.kind in (BundleKind.SELF_ATTN, BundleKind.CROSS_ATTN):
        sums = bundle.data.sum(axis=3, dtype=np.float64)
        bad = np.argwhere(np.abs(sums - 1.0) > ROW_SUM_TOL)
        for f, h, r in bad:
            rep.add("row_not_normalized",
                    f"row sums to {sums[f, h, r]:.6f}", int(f), int(h), int(r))
    return rep


def write_bundle(bundle: AttentionBundle, path) -> None:
    """Serialize a valid bundle to the ATNB v1 format."""
    rep = validate_bundle(bundle)
    if not rep.ok:
        raise InvalidBundle(rep)
    header = _ATNB_HEADER.pack(
        _ATNB_MAGIC, 1, int(bundle.kind), bundle.frames, bundle.heads,
        bundle.grid_h, bundle.grid_w, bundle.text_len, bundle.timestep,
        bundle.layer,
    )
    payload = np.ascontiguousarray(bundle.data, dtype="<f4").tobytes()
    trailer = _canonical_json({"tokens": bundle.tokens, "meta": bundle.meta})
    try:
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(payload)
            fh.write(_U64.pack(len(trailer)))
            fh.write(trailer)
    except OSError as exc:
        raise IoFailure(str(exc)) from exc


def read_bundle(path, check_rows: bool = True) -> AttentionBundle:
    """Parse an ATNB v1 file into a validated bundle.

    ``check_rows=False`` skips the row-normalization check (useful for very
    large dumps); format-level errors are always enforced.
    """
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
    if len(raw) < _ATNB_HEADER.size or raw[:4] != _ATNB_MAGIC:
        raise BadMagic(f"{path}: not an ATNB file")
    magic, version, kind, frames, heads, gh, gw, text_len, timestep, layer = \
        _ATNB_HEADER.unpack_from(raw, 0)
    if version != 1:
        raise UnsupportedVersion(f"ATNB version {version}")
    try:
        kind = BundleKind(kind)
    except ValueError:
        raise FormatError(f"unknown bundle kind {kind}") from None
    n = gh * gw
    width = text_len if text_len > 0 else n
    count = frames * heads * n * width
    offset = _ATNB_HEADER.size
    if len(raw) < offset + 4 * count + _U64.size:
        raise DimensionMismatch(
            f"payload needs {4 * count} bytes, file has {len(raw) - offset}")
    data = np.frombuffer(raw, dtype="<f4", count=count, offset=offset)
    data = data.reshape(frames, heads, n, width).copy()
    offset += 4 * count
    (trailer_len,) = _U64.unpack_from(raw, offset)
    offset += _U64.size
    if len(raw) != offset + trailer_len:
        raise DimensionMismatch(
            f"trailer declares {trailer_len} bytes, file has {len(raw) - offset}")
    try:
        trailer = json.loads(raw[offset:].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"bad trailer JSON: {exc}") from exc
    bundle = AttentionBundle(
        kind=kind, frames=frames, heads=heads, grid_h=gh, grid_w=gw,
        text_len=text_len, data=data, tokens=list(trailer.get("tokens", [])),
        timestep=timestep, layer=layer, meta=trailer.get("meta", {}),
    )
    if not np.isfinite(data).all():
        raise NonFinite(f"{path}: payload contains NaN or Inf")
    rep = validate_bundle(bundle)
    if not check_rows:
        rep.violations = [v for v in rep.violations if v.code != "row_not_normalized"]
    if not rep.ok:
        raise InvalidBundle(rep)
    return bundle


# --- NLAY layouts ---------------------------------------------------------------


def write_layout(layout: Layout, path, targets: Optional[dict] = None,
                 extra: Optional[dict] = None) -> None:
    """Serialize a layout to NLAY v1; the trailer records label names,
    per-frame per-label component counts, targets when known, plus any extra
    keys (e.g. token bindings)."""
    counts = [
        [layout.count(lid, f) for lid in sorted(layout.labels)]
        for f in range(layout.frames)
    ]
    trailer_obj = {
        "labels": {str(lid): name for lid, name in layout.labels.items()},
        "counts": counts,
        "targets": targets or {},
    }
    if extra:
        trailer_obj.update(extra)
    trailer = _canonical_json(trailer_obj)
    header = _NLAY_HEADER.pack(_NLAY_MAGIC, 1, layout.frames, layout.grid_h,
                               layout.grid_w)
    try:
        with open(path, "wb") as fh:
            fh.write(header)
            for grid in layout.grids:
                fh.write(np.ascontiguousarray(grid, dtype="<u2").tobytes())
            fh.write(_U64.pack(len(trailer)))
            fh.write(trailer)
    except OSError as exc:
        raise IoFailure(str(exc)) from exc


def read_layout(path):
    """Parse an NLAY v1 file; returns (Layout, trailer dict)."""
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
    if len(raw) < _NLAY_HEADER.size or raw[:4] != _NLAY_MAGIC:
        raise BadMagic(f"{path}: not an NLAY file")
    magic, version, frames, gh, gw = _NLAY_HEADER.unpack_from(raw, 0)
    if version != 1:
        raise UnsupportedVersion(f"NLAY version {version}")
    offset = _NLAY_HEADER.size
    count = frames * gh * gw
    if len(raw) < offset + 2 * count + _U64.size:
        raise DimensionMismatch(
            f"payload needs {2 * count} bytes, file has {len(raw) - offset}")
    labels_flat = np.frombuffer(raw, dtype="<u2", count=count, offset=offset)
    grids = [
        labels_flat[f * gh * gw : (f + 1) * gh * gw].reshape(gh, gw).copy()
        for f in range(frames)
    ]
    offset += 2 * count
    (trailer_len,) = _U64.unpack_from(raw, offset)
    offset += _U64.size
    if len(raw) != offset + trailer_len:
        raise DimensionMismatch(
            f"trailer declares {trailer_len} bytes, file has {len(raw) - offset}")
    try:
        trailer = json.loads(raw[offset:].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"bad trailer JSON: {exc}") from exc
    labels = {int(k): v for k, v in trailer.get("labels", {}).items()}
    layout = Layout(grids=grids, labels=labels, grid_h=gh, grid_w=gw)
    return layout, trailer


# --- NGDF guidance fields --------------------------------------------------------


def write_field(field: GuidanceField, path) -> None:
    """Serialize a guidance field to NGDF v1."""
    header = _NGDF_HEADER.pack(
        _NGDF_MAGIC, 1, field.frames, field.grid_h, field.grid_w,
        len(field.slots), field.neg_const, field.boost,
        field.schedule.fraction, field.schedule.total_steps,
    )
    trailer = _canonical_json({
        "token_indices": [slot.token_index for slot in field.slots],
        "categories": [slot.category for slot in field.slots],
    })
    try:
        with open(path, "wb") as fh:
            fh.write(header)
            for f in range(field.frames):
                for slot in field.slots:
                    fh.write(np.ascontiguousarray(slot.mode[f], dtype=np.uint8).tobytes())
                    fh.write(np.ascontiguousarray(slot.base[f], dtype="<f4").tobytes())
            fh.write(_U64.pack(len(trailer)))
            fh.write(trailer)
    except OSError as exc:
        raise IoFailure(str(exc)) from exc


def read_field(path) -> GuidanceField:
    """Parse an NGDF v1 file."""
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
    if len(raw) < _NGDF_HEADER.size or raw[:4] != _NGDF_MAGIC:
        raise BadMagic(f"{path}: not an NGDF file")
    magic, version, frames, gh, gw, n_tokens, neg_const, boost, fraction, \
        total_steps = _NGDF_HEADER.unpack_from(raw, 0)
    if version != 1:
        raise UnsupportedVersion(f"NGDF version {version}")
    cell = gh * gw
    per_slot = cell + 4 * cell
    body = frames * n_tokens * per_slot
    offset = _NGDF_HEADER.size
    if len(raw) < offset + body + _U64.size:
        raise DimensionMismatch(
            f"payload needs {body} bytes, file has {len(raw) - offset}")
    modes = [np.zeros((frames, gh, gw), dtype=np.uint8) for _ in range(n_tokens)]
    bases = [np.zeros((frames, gh, gw), dtype=np.float32) for _ in range(n_tokens)]
    for f in range(frames):
        for s in range(n_tokens):
            modes[s][f] = np.frombuffer(raw, dtype=np.uint8, count=cell,
                                        offset=offset).reshape(gh, gw)
            offset += cell
            bases[s][f] = np.frombuffer(raw, dtype="<f4", count=cell,
                                        offset=offset).reshape(gh, gw)
            offset += 4 * cell
    (trailer_len,) = _U64.unpack_from(raw, offset)
    offset += _U64.size
    if len(raw) != offset + trailer_len:
        raise DimensionMismatch(
            f"trailer declares {trailer_len} bytes, file has {len(raw) - offset}")
    try:
        trailer = json.loads(raw[offset:].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"bad trailer JSON: {exc}") from exc
    token_indices = trailer.get("token_indices", list(range(n_tokens)))
    categories = trailer.get("categories", [str(i) for i in range(n_tokens)])
    slots = [
        GuidanceSlot(category=categories[i], token_index=int(token_indices[i]),
                     mode=modes[i], base=bases[i])
        for i in range(n_tokens)
    ]
    return GuidanceField(
        grid_h=gh, grid_w=gw, frames=frames, slots=slots, boost=boost,
        neg_const=neg_const,
        schedule=DecaySchedule(total_steps=total_steps, fraction=fraction),
    )


# --- count records ----------------------------------------------------------------


@dataclass
class CountRecord:
    """Per-frame detector counts against prompted targets."""

    classes: list
    targets: list
    frames: np.ndarray          # (F, n_classes) non-negative ints

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=np.int64)
        if self.frames.ndim != 2 or self.frames.shape[1] != len(self.classes):
            raise DimensionMismatch(
                f"frames shape {self.frames.shape} does not match "
                f"{len(self.classes)} classes")
        if len(self.targets) != len(self.classes):
            raise DimensionMismatch("every class needs a target")
        if (self.frames < 0).any():
            raise ValueError("counts must be non-negative")
        if any(t < 1 for t in self.targets):
            raise ValueError("targets must be positive")


def read_count_record(path) -> CountRecord:
    try:
        with open(path) as fh:
            obj = json.load(fh)
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
    return CountRecord(classes=list(obj["classes"]), targets=list(obj["targets"]),
                       frames=np.asarray(obj["frames"], dtype=np.int64).reshape(
                           len(obj["frames"]), len(obj["classes"])))


def write_count_record(record: CountRecord, path) -> None:
    obj = {
        "classes": record.classes,
        "targets": list(record.targets),
        "frames": record.frames.tolist(),
    }
    try:
        with open(path, "w") as fh:
            json.dump(obj, fh, indent=2)
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
