"""Layout refinement: edit per-frame layouts until each category's instance
count matches its prompted target.

Excess instances are removed smallest-first (minimal perturbation); missing
instances are inserted from a template (the smallest existing region, or a
disk when the category is empty) at the center minimizing
``C_o + C_c + lambda * C_t`` over a uniform candidate grid: collision count,
squared distance to the category's geometric center, and squared distance to
the matching insertion's center in the previous frame.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _kernels as kernels
from .errors import NoRegion, NoValidPlacement, OutOfBounds, RefinementStalled
from .layout import BACKGROUND, Layout

ORIGIN_COPIED = "copied"
ORIGIN_CIRCLE = "circle"


@dataclass
class Template:
    """Pixel-offset shape anchored at (0, 0); the anchor is the rounded
    centroid of the source pixels, so the offset centroid stays within half a
    cell of the origin."""

    offsets: np.ndarray            # (k, 2) int64 (drow, dcol)
    origin: str                    # ORIGIN_COPIED | ORIGIN_CIRCLE
    radius: Optional[float] = None
    ref_pixels: Optional[np.ndarray] = None   # source region (copied only)

    def __post_init__(self):
        self.offsets = np.asarray(self.offsets, dtype=np.int64).reshape(-1, 2)
        if self.offsets.shape[0] == 0:
            raise ValueError("template must have at least one cell")


@dataclass
class PlacementCost:
    overlap: float
    center: float
    temporal: float
    total: float


@dataclass
class Edit:
    frame: int
    category: str
    op: str                        # "add" | "remove"
    pixels: np.ndarray             # flat indices touched by the edit
    center: Optional[tuple]
    area: int
    origin: Optional[str] = None   # template origin for adds
    ref_pixels: Optional[np.ndarray] = None


@dataclass
class RefinedLayout:
    layout: Layout
    edits: list
    delta_add: dict = field(default_factory=dict)   # category -> [H x W bool per frame]
    delta_rem: dict = field(default_factory=dict)


def _smallest_region(layout: Layout, label: int, frame: int):
    regions = layout.regions_of(label, frame)
    if not regions:
        return None
    return min(regions, key=lambda px: (px.size, int(px[0])))


def remove_smallest(layout: Layout, label: int, frame: int):
    """Reassign the minimal-area region (ties: smallest top-left pixel) to
    background.  Returns (new layout, removed pixel indices)."""
    region = _smallest_region(layout, label, frame)
    if region is None:
        raise NoRegion(f"no region with label {label} in frame {frame}")
    out = layout.copy()
    gflat = out.grids[frame].ravel()
    gflat[region] = BACKGROUND
    if out._owner_score is not None:
        out._owner_score[frame].ravel()[region] = 0.0
    return out, region


def make_template(layout: Layout, label: int, frame: int,
                  radius: Optional[float] = None) -> Template:
    """Copy the smallest existing region as the template, or fall back to a
    discrete disk of the given radius (default: round(min(H, W) / 8))."""
    region = _smallest_region(layout, label, frame)
    if region is not None:
        rows = region // layout.grid_w
        cols = region % layout.grid_w
        anchor_r = int(np.floor(rows.mean() + 0.5))
        anchor_c = int(np.floor(cols.mean() + 0.5))
        offs = np.stack([rows - anchor_r, cols - anchor_c], axis=1)
        return Template(offsets=offs, origin=ORIGIN_COPIED, ref_pixels=region)
    if radius is None:
        radius = round(min(layout.grid_h, layout.grid_w) / 8)
    r = float(radius)
    span = int(np.floor(r))
    offs = [
        (dr, dc)
        for dr in range(-span, span + 1)
        for dc in range(-span, span + 1)
        if dr * dr + dc * dc <= r * r
    ]
    return Template(offsets=np.array(offs, dtype=np.int64), origin=ORIGIN_CIRCLE,
                    radius=r)


def _category_center(layout: Layout, label: int, frame: int):
    px = np.flatnonzero(layout.grids[frame].ravel() == label)
    if px.size == 0:
        return (layout.grid_h - 1) / 2.0, (layout.grid_w - 1) / 2.0
    return float((px // layout.grid_w).mean()), float((px % layout.grid_w).mean())


def placement_cost(center, template: Template, layout: Layout, frame: int,
                   label: int, prev_center=None, lam: float = 8.0) -> PlacementCost:
    """Cost of placing ``template`` at ``center`` for the given category.

    Collisions count template cells over any non-background label; the
    center term measures squared distance to the category's current geometric
    center (frame center when the category is empty); the temporal term is
    active only past the first frame and when a previous center exists.
    """
    r, c = int(center[0]), int(center[1])
    rows = r + template.offsets[:, 0]
    cols = c + template.offsets[:, 1]
    if rows.min() < 0 or cols.min() < 0 or rows.max() >= layout.grid_h \
            or cols.max() >= layout.grid_w:
        raise OutOfBounds(f"template at {center} exceeds the grid")
    grid = layout.grids[frame]
    c_o = float(np.count_nonzero(grid[rows, cols]))
    c0r, c0c = _category_center(layout, label, frame)
    c_c = (r - c0r) ** 2 + (c - c0c) ** 2
    if frame > 0 and prev_center is not None:
        c_t = (r - prev_center[0]) ** 2 + (c - prev_center[1]) ** 2
    else:
        c_t = 0.0
    return PlacementCost(overlap=c_o, center=c_c, temporal=c_t,
                         total=c_o + c_c + lam * c_t)


def _forbidden_cells(layout: Layout, label: int, frame: int) -> np.ndarray:
    """Cells an insertion may not touch: every occupied cell, plus the
    4-neighborhood of the edited label (an insertion flush against an
    existing instance of the same category would merge with it instead of
    creating a new one)."""
    grid = layout.grids[frame]
    occupied = grid != BACKGROUND
    same = grid == label
    halo = same.copy()
    halo[1:, :] |= same[:-1, :]
    halo[:-1, :] |= same[1:, :]
    halo[:, 1:] |= same[:, :-1]
    halo[:, :-1] |= same[:, 1:]
    return np.ascontiguousarray(occupied | halo)


def place_instance(layout: Layout, label: int, frame: int, template: Template,
                   prev_center=None, lam: float = 8.0, stride: int = 2):
    """Insert the template at the argmin-cost candidate center.

    Candidates are the stride-grid centers at which the template fits
    in-bounds and creates a new disjoint instance (no overlap with any
    category, no 4-adjacency with the edited one; the cost's collision term
    would otherwise happily merge the insertion into an existing region and
    the count would never reach the target).  Ties resolve to the smallest
    (row, col).  Returns (new layout, chosen center).
    """
    offs = template.offsets
    row_lo = int(-offs[:, 0].min())
    row_hi = int(layout.grid_h - 1 - offs[:, 0].max())
    col_lo = int(-offs[:, 1].min())
    col_hi = int(layout.grid_w - 1 - offs[:, 1].max())
    if row_lo > row_hi or col_lo > col_hi:
        raise NoValidPlacement("template does not fit inside the grid")
    c0r, c0c = _category_center(layout, label, frame)
    has_prev = frame > 0 and prev_center is not None
    pr, pc = (float(prev_center[0]), float(prev_center[1])) if has_prev else (0.0, 0.0)
    forbidden = _forbidden_cells(layout, label, frame)
    r, c, _, _ = kernels.best_placement(
        forbidden, offs, row_lo, row_hi, col_lo, col_hi, int(stride),
        float(c0r), float(c0c), pr, pc, has_prev, float(lam),
    )
    if r < 0:
        raise NoValidPlacement("no admissible center for the template")
    out = layout.copy()
    out.grids[frame][r + offs[:, 0], c + offs[:, 1]] = label
    return out, (int(r), int(c))


def refine_to_count(layout: Layout, spec, lam: float = 8.0,
                    radius: Optional[float] = None, stride: int = 2) -> RefinedLayout:
    """Edit every frame of every category in spec order until the instance
    count equals the target, recording edits and delta masks.

    Insertions chain temporally: the j-th insertion in frame f reuses the
    j-th insertion's center from frame f-1 as the previous center.
    """
    work = layout.copy()
    original = layout
    edits = []
    for entry in spec.entries:
        label = work.label_of(entry.noun)
        if label is None:
            label = work.register(entry.noun)
        prev_centers = []
        for f in range(work.frames):
            m = work.count(label, f)
            guard = 0
            max_edits = 2 * (abs(m - entry.count) + entry.count + 2)
            while m > entry.count:
                work, removed = remove_smallest(work, label, f)
                rows = removed // work.grid_w
                cols = removed % work.grid_w
                center = (int(round(rows.mean())), int(round(cols.mean())))
                edits.append(Edit(frame=f, category=entry.noun, op="remove",
                                  pixels=removed, center=center, area=removed.size))
                m -= 1
                guard += 1
                if guard > max_edits:
                    raise RefinementStalled("removal loop did not converge")
            centers_this_frame = []
            j = 0
            while m < entry.count:
                template = make_template(work, label, f, radius=radius)
                prev = prev_centers[j] if f > 0 and j < len(prev_centers) else None
                work, center = place_instance(work, label, f, template,
                                              prev_center=prev, lam=lam, stride=stride)
                pixels = (center[0] + template.offsets[:, 0]) * work.grid_w \
                    + (center[1] + template.offsets[:, 1])
                edits.append(Edit(frame=f, category=entry.noun, op="add",
                                  pixels=np.sort(pixels), center=center,
                                  area=pixels.size, origin=template.origin,
                                  ref_pixels=template.ref_pixels))
                centers_this_frame.append(center)
                j += 1
                new_m = work.count(label, f)
                guard += 1
                if new_m <= m and guard > max_edits:
                    raise RefinementStalled("insertion loop did not converge")
                m = new_m
            prev_centers = centers_this_frame
    refined = RefinedLayout(layout=work, edits=edits)
    _fill_delta_masks(refined, original, spec)
    for entry in spec.entries:
        label = work.label_of(entry.noun)
        for f in range(work.frames):
            if work.count(label, f) != entry.count:
                raise RefinementStalled(
                    f"{entry.noun} frame {f}: {work.count(label, f)} != {entry.count}")
    return refined


def _fill_delta_masks(refined: RefinedLayout, original: Layout, spec) -> None:
    """Delta masks from the edit log, filtered by the final layout so that
    add pixels still carry the category label and removed pixels really are
    background (pixels later overwritten by other edits drop out)."""
    work = refined.layout
    gh, gw = work.grid_h, work.grid_w
    for entry in spec.entries:
        label = work.label_of(entry.noun)
        add = [np.zeros((gh, gw), dtype=bool) for _ in range(work.frames)]
        rem = [np.zeros((gh, gw), dtype=bool) for _ in range(work.frames)]
        for edit in refined.edits:
            if edit.category != entry.noun:
                continue
            target = add[edit.frame] if edit.op == "add" else rem[edit.frame]
            target.ravel()[edit.pixels] = True
        for f in range(work.frames):
            final = work.grids[f]
            add[f] &= final == label
            rem[f] &= final == BACKGROUND
        refined.delta_add[entry.noun] = add
        refined.delta_rem[entry.noun] = rem
