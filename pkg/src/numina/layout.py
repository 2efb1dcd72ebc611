"""Countable-layout construction.

The self-attention grayscale map is partitioned into contiguous regions by
mean-shift clustering over (row, col, intensity) features; the cross-attention
map for a noun token is thresholded at a peak ratio and density-clustered into
a focus mask.  Regions whose overlap with the mask clears the retention
threshold are painted into a per-frame label grid; counting the resulting
4-connected components per label gives the estimated instance count.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np

from . import _kernels as kernels
from .errors import EmptyRegion

if TYPE_CHECKING:
    from .heads import GrayscaleMap

BACKGROUND = 0


@dataclass
class RegionSet:
    """Disjoint 4-connected pixel regions (flat row-major indices)."""

    regions: list
    grid_h: int
    grid_w: int

    def __len__(self):
        return len(self.regions)


@dataclass
class FocusMask:
    mask: np.ndarray          # H x W bool
    cluster_count: int


@dataclass
class Layout:
    """Per-frame label grids; label 0 is reserved background.

    ``_owner_score`` holds, per painted pixel, the overlap score of the
    region that claimed it; it only matters while layouts are being
    constructed (cross-category collisions go to the higher score, ties to
    the earlier entry) and is not serialized.
    """

    grids: list
    labels: dict
    grid_h: int
    grid_w: int
    _owner_score: list = field(default=None, repr=False)

    @classmethod
    def empty(cls, frames: int, grid_h: int, grid_w: int) -> "Layout":
        grids = [np.zeros((grid_h, grid_w), dtype=np.uint16) for _ in range(frames)]
        return cls(grids=grids, labels={}, grid_h=grid_h, grid_w=grid_w)

    @property
    def frames(self) -> int:
        return len(self.grids)

    def register(self, name: str) -> int:
        for lid, lname in self.labels.items():
            if lname == name:
                return lid
        lid = max(self.labels.keys(), default=0) + 1
        self.labels[lid] = name
        return lid

    def label_of(self, name: str):
        for lid, lname in self.labels.items():
            if lname == name:
                return lid
        return None

    def copy(self) -> "Layout":
        out = Layout(
            grids=[g.copy() for g in self.grids],
            labels=dict(self.labels),
            grid_h=self.grid_h,
            grid_w=self.grid_w,
        )
        if self._owner_score is not None:
            out._owner_score = [s.copy() for s in self._owner_score]
        return out

    def owner_scores(self, frame: int) -> np.ndarray:
        if self._owner_score is None:
            self._owner_score = [
                np.zeros((self.grid_h, self.grid_w), dtype=np.float64)
                for _ in range(self.frames)
            ]
        return self._owner_score[frame]

    def regions_of(self, label: int, frame: int) -> list:
        """4-connected components carrying ``label``, ordered by first pixel."""
        mask = np.ascontiguousarray(self.grids[frame] == label)
        comp = kernels.label_components(mask)
        n = int(comp.max())
        flat = comp.ravel()
        return [np.flatnonzero(flat == i) for i in range(1, n + 1)]

    def count(self, label: int, frame: int) -> int:
        mask = np.ascontiguousarray(self.grids[frame] == label)
        return int(kernels.label_components(mask).max())


def segment_regions(a_s: "GrayscaleMap", bandwidth: float = None,
                    min_region: int = 4, intensity_weight: float = None,
                    max_iter: int = 100, bg_margin: float = 0.25) -> RegionSet:
    """Partition a grayscale map into contiguous regions by mean shift.

    Features are (row, col, intensity * w_int); w_int defaults to a quarter
    of the grid diagonal so intensity is commensurate with the spatial axes,
    bandwidth to max(H, W) / 6.  Converged modes are merged by single linkage
    at bandwidth / 2.  The background is the cluster with the lowest mean
    intensity together with every cluster within ``bg_margin`` of it
    (relative to the cluster-mean range): a flat background has no density
    mode, so mean shift tiles it into several same-intensity clusters that
    must all be excluded.  Each remaining cluster is split into 4-connected
    components and components under ``min_region`` pixels are dropped.  A
    constant map returns the empty RegionSet.
    """
    values = np.asarray(a_s.values, dtype=np.float64)
    gh, gw = a_s.grid_h, a_s.grid_w
    if bandwidth is None:
        bandwidth = max(gh, gw) / 6.0
    if bandwidth <= 0:
        raise ValueError("bandwidth must be positive")
    if intensity_weight is None:
        intensity_weight = float(np.hypot(gh, gw)) / 4.0
    rows, cols = np.meshgrid(np.arange(gh), np.arange(gw), indexing="ij")
    feats = np.stack(
        [rows.ravel().astype(np.float64),
         cols.ravel().astype(np.float64),
         values.ravel() * intensity_weight],
        axis=1,
    )
    feats = np.ascontiguousarray(feats)
    modes = kernels.mean_shift_modes(feats, float(bandwidth), max_iter, 1e-3)
    labels = kernels.link_modes(np.ascontiguousarray(modes), float(bandwidth) / 2.0)
    n_clusters = int(labels.max()) + 1
    if n_clusters <= 1:
        return RegionSet(regions=[], grid_h=gh, grid_w=gw)
    flat = values.ravel()
    means = np.array([flat[labels == i].mean() for i in range(n_clusters)])
    lo, hi = means.min(), means.max()
    if hi - lo <= 1e-12:
        return RegionSet(regions=[], grid_h=gh, grid_w=gw)
    background = means <= lo + bg_margin * (hi - lo)
    regions = []
    for i in range(n_clusters):
        if background[i]:
            continue
        mask = np.ascontiguousarray((labels == i).reshape(gh, gw))
        comp = kernels.label_components(mask)
        cflat = comp.ravel()
        for c in range(1, int(comp.max()) + 1):
            px = np.flatnonzero(cflat == c)
            if px.size >= min_region:
                regions.append(px)
    return RegionSet(regions=regions, grid_h=gh, grid_w=gw)


def build_focus_mask(a_ct: np.ndarray, peak_ratio: float = 0.1,
                     eps: float = 2.0, min_pts: int = 3) -> FocusMask:
    """Threshold a cross-attention map at ``peak_ratio * max`` and keep the
    DBSCAN clusters of the surviving positions.

    Neighborhood counts include the point itself, so ``min_pts=1`` keeps
    every survivor.  Noise points are dropped; an all-zero map (or one with
    no survivors) gives the empty mask with ``cluster_count == 0``.
    """
    if not 0.0 < peak_ratio < 1.0:
        raise ValueError("peak_ratio must be in (0, 1)")
    a = np.asarray(a_ct, dtype=np.float64)
    mask = np.zeros(a.shape, dtype=bool)
    peak = a.max()
    if peak <= 0:
        return FocusMask(mask=mask, cluster_count=0)
    surv = np.argwhere(a >= peak_ratio * peak)
    if surv.size == 0:
        return FocusMask(mask=mask, cluster_count=0)
    pts = np.ascontiguousarray(surv.astype(np.float64))
    labels = kernels.dbscan_labels(pts, float(eps), int(min_pts))
    keep = labels >= 0
    mask[surv[keep, 0], surv[keep, 1]] = True
    n = int(labels.max()) + 1 if keep.any() else 0
    return FocusMask(mask=mask, cluster_count=n)


def overlap_score(region: np.ndarray, mask: FocusMask) -> float:
    """|region ∩ mask| / |region| by exact pixel counting."""
    region = np.asarray(region)
    if region.size == 0:
        raise EmptyRegion("overlap score of an empty region is undefined")
    inside = int(mask.mask.ravel()[region].sum())
    return inside / region.size


def construct_layout(regions: RegionSet, mask: FocusMask, tau: float,
                     label: int, base: Layout, frame: int) -> Layout:
    """Paint every region with overlap >= tau into ``base`` at ``frame``.

    Pixels already owned by another category are stolen only by a strictly
    higher overlap score, so on ties the earlier-processed entry keeps them.
    Returns a new Layout; ``base`` is not modified.
    """
    if label not in base.labels:
        raise ValueError(f"label {label} is not registered")
    if not 0.0 < tau <= 1.0:
        raise ValueError("tau must be in (0, 1]")
    out = base.copy()
    grid = out.grids[frame]
    scores = out.owner_scores(frame)
    gflat = grid.ravel()
    sflat = scores.ravel()
    for region in regions.regions:
        s = overlap_score(region, mask)
        if s < tau:
            continue
        for p in region:
            owner = gflat[p]
            if owner == BACKGROUND or owner == label:
                gflat[p] = label
                sflat[p] = max(sflat[p], s)
            elif s > sflat[p]:
                gflat[p] = label
                sflat[p] = s
    return out


def count_instances(layout: Layout, label: int, frame: int) -> int:
    """Number of 4-connected components carrying ``label`` in ``frame``."""
    if label not in layout.labels:
        raise ValueError(f"label {label} is not registered")
    return layout.count(label, frame)
