"""Attention-guidance field construction and application.

Refinement deltas become per-pixel edits to cross-attention scores:
removals are suppressed with a large negative bias (not scheduled, so a
removed instance cannot resurface late); circle-template additions get a
scheduled positive bias; copied-template additions overwrite the pre-softmax
score with the reference region's mean, scheduled the same way.  The schedule
is linear over the first ``fraction`` of denoising steps and zero after.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DimMismatch, EmptyReference, MissingScores
from .refine import ORIGIN_CIRCLE, RefinedLayout

MODE_NONE = 0
MODE_SUPPRESS = 1
MODE_BOOST = 2
MODE_OVERWRITE = 3


@dataclass
class DecaySchedule:
    """delta(t) = max(0, 1 - t / (fraction * total_steps)).

    Strictly non-increasing, exactly 1 at t=0 and 0 from
    ``fraction * total_steps`` on.
    """

    total_steps: int
    fraction: float = 0.6

    def __post_init__(self):
        if self.total_steps < 1:
            raise ValueError("total_steps must be >= 1")
        if not 0.0 < self.fraction <= 1.0:
            raise ValueError("fraction must be in (0, 1]")

    def value(self, t: int) -> float:
        if not 0 <= t < self.total_steps:
            raise ValueError(f"step {t} outside [0, {self.total_steps})")
        window = self.fraction * self.total_steps
        return max(0.0, 1.0 - t / window)


def delta_schedule(t: int, total: int, fraction: float = 0.6) -> float:
    """Guidance intensity at denoising step ``t``."""
    return DecaySchedule(total_steps=total, fraction=fraction).value(t)


@dataclass
class GuidanceSlot:
    """Per-token guidance grids: mode (uint8) and base value (float32), both
    shaped [frames, H, W]."""

    category: str
    token_index: int
    mode: np.ndarray
    base: np.ndarray


@dataclass
class GuidanceField:
    grid_h: int
    grid_w: int
    frames: int
    slots: list
    boost: float
    neg_const: float
    schedule: DecaySchedule

    def summary(self):
        """Per-category pixel counts by mode (summed over frames)."""
        out = {}
        for slot in self.slots:
            out[slot.category] = {
                "suppressed": int((slot.mode == MODE_SUPPRESS).sum()),
                "boosted": int((slot.mode == MODE_BOOST).sum()),
                "overwritten": int((slot.mode == MODE_OVERWRITE).sum()),
            }
        return out


def mean_ref_score(scores, ref_pixels, frame: int, head: Optional[int],
                   token: int) -> float:
    """Mean pre-softmax score over the reference pixels in column ``token``.

    ``head=None`` pools over every head (how build_guidance uses it, since a
    single base grid serves all heads of the guided layer).
    """
    ref_pixels = np.asarray(ref_pixels)
    if ref_pixels.size == 0:
        raise EmptyReference("reference mask is empty")
    if head is None:
        vals = scores.data[frame, :, ref_pixels, token]
    else:
        vals = scores.data[frame, head, ref_pixels, token]
    return float(np.asarray(vals, dtype=np.float64).mean())


def build_guidance(refined: RefinedLayout, spec, scores=None, boost: float = 0.8,
                   neg_const: float = -1e4,
                   schedule: Optional[DecaySchedule] = None) -> GuidanceField:
    """Convert refinement deltas into a guidance field.

    Removal pixels: suppress with ``neg_const`` (unscheduled).  Circle
    additions: boost with base ``boost`` (scaled by delta(t) at apply time).
    Copied additions: overwrite with the reference region's mean pre-softmax
    score, which requires the ``scores`` bundle.
    """
    if boost <= 0:
        raise ValueError("boost coefficient must be positive")
    if neg_const >= 0:
        raise ValueError("neg_const must be negative")
    if schedule is None:
        schedule = DecaySchedule(total_steps=50, fraction=0.6)
    layout = refined.layout
    gh, gw = layout.grid_h, layout.grid_w
    slots = []
    for entry in spec.entries:
        mode = np.zeros((layout.frames, gh, gw), dtype=np.uint8)
        base = np.zeros((layout.frames, gh, gw), dtype=np.float32)
        rem = refined.delta_rem.get(entry.noun)
        add = refined.delta_add.get(entry.noun)
        for f in range(layout.frames):
            if rem is not None:
                mode[f][rem[f]] = MODE_SUPPRESS
                base[f][rem[f]] = neg_const
        for edit in refined.edits:
            if edit.category != entry.noun or edit.op != "add":
                continue
            f = edit.frame
            live = np.zeros(gh * gw, dtype=bool)
            live[edit.pixels] = True
            if add is not None:
                live &= add[f].ravel()
            if edit.origin == ORIGIN_CIRCLE:
                mode[f].ravel()[live] = MODE_BOOST
                base[f].ravel()[live] = boost
            else:
                if scores is None:
                    raise MissingScores(
                        f"copied-template addition for {entry.noun!r} needs a "
                        "pre-softmax score bundle")
                a_bar = mean_ref_score(scores, edit.ref_pixels, f, None,
                                       entry.token_index)
                mode[f].ravel()[live] = MODE_OVERWRITE
                base[f].ravel()[live] = a_bar
        slots.append(GuidanceSlot(category=entry.noun, token_index=entry.token_index,
                                  mode=mode, base=base))
    return GuidanceField(grid_h=gh, grid_w=gw, frames=layout.frames, slots=slots,
                         boost=boost, neg_const=neg_const, schedule=schedule)


def _row_softmax(x):
    shifted = x - x.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def apply_guidance(scores: np.ndarray, field: GuidanceField, frame: int,
                   t: int) -> np.ndarray:
    """Apply the field to an N x L pre-softmax score matrix and return the
    row-softmaxed attention weights.

    Overwrites land first (base * delta), then biases are added (suppression
    unscaled, boosts scaled).  Rows without any touched pixel are spliced
    from the plain softmax, so unguided positions are bitwise identical to
    the unguided result.  When delta(t) is zero the scheduled modes are
    skipped entirely.
    """
    s = np.asarray(scores, dtype=np.float64)
    n = field.grid_h * field.grid_w
    if s.ndim != 2 or s.shape[0] != n:
        raise DimMismatch(f"expected ({n}, L) score matrix, got {s.shape}")
    if not 0 <= frame < field.frames:
        raise DimMismatch(f"frame {frame} outside field range")
    plain = _row_softmax(s)
    delta = field.schedule.value(t)
    modified = s.copy()
    touched = np.zeros(n, dtype=bool)
    for slot in field.slots:
        if slot.token_index >= s.shape[1]:
            raise DimMismatch(
                f"token index {slot.token_index} outside score width {s.shape[1]}")
        mode = slot.mode[frame].ravel()
        base = slot.base[frame].ravel().astype(np.float64)
        if delta > 0.0:
            ov = mode == MODE_OVERWRITE
            if ov.any():
                modified[ov, slot.token_index] = base[ov] * delta
                touched |= ov
            bo = mode == MODE_BOOST
            if bo.any():
                modified[bo, slot.token_index] += base[bo] * delta
                touched |= bo
        su = mode == MODE_SUPPRESS
        if su.any():
            modified[su, slot.token_index] += base[su]
            touched |= su
    if not touched.any():
        return plain
    out = plain.copy()
    out[touched] = _row_softmax(modified[touched])
    return out
