"""Shared fixtures and independent oracles.

The oracle helpers here are deliberately naive (python loops, BFS, exhaustive
search) so they stay independent of the library's vectorized/compiled paths.
"""

import numpy as np
import pytest

from numina.io import AttentionBundle, BundleKind
from numina.layout import Layout


def softmax_rows(logits):
    e = np.exp(logits - logits.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


_WORDS = ["cats", "dogs", "birds", "cars", "cups", "hats", "pens", "fish"]


def make_random_bundle(rng, kind=None):
    """Small random bundle of the given (or random) kind, valid by construction."""
    if kind is None:
        kind = BundleKind(int(rng.integers(0, 3)))
    frames = int(rng.integers(1, 4))
    heads = int(rng.integers(1, 4))
    gh = int(rng.integers(2, 7))
    gw = int(rng.integers(2, 7))
    n = gh * gw
    if kind == BundleKind.SELF_ATTN:
        text_len, tokens = 0, []
        width = n
    else:
        text_len = int(rng.integers(2, 6))
        tokens = [
            _WORDS[int(rng.integers(0, len(_WORDS)))] + str(i)
            for i in range(text_len)
        ]
        width = text_len
    logits = rng.normal(0, 1.5, size=(frames, heads, n, width))
    if kind == BundleKind.PRE_SOFTMAX:
        data = logits.astype(np.float32)
    else:
        data = softmax_rows(logits).astype(np.float32)
        data /= data.sum(axis=3, keepdims=True)   # renormalize in f32
    return AttentionBundle(
        kind=kind, frames=frames, heads=heads, grid_h=gh, grid_w=gw,
        text_len=text_len, data=data, tokens=tokens,
        timestep=int(rng.integers(0, 50)), layer=int(rng.integers(0, 30)),
        meta={"fixture": True, "n": int(rng.integers(0, 1000))},
    )


def make_random_layout(rng):
    frames = int(rng.integers(1, 4))
    gh = int(rng.integers(4, 12))
    gw = int(rng.integers(4, 12))
    layout = Layout.empty(frames, gh, gw)
    for name in ("cats", "dogs")[: int(rng.integers(1, 3))]:
        lid = layout.register(name)
        for f in range(frames):
            for _ in range(int(rng.integers(0, 3))):
                r = int(rng.integers(0, gh - 1))
                c = int(rng.integers(0, gw - 1))
                layout.grids[f][r : r + 2, c : c + 2] = lid
    return layout


def bfs_components_4(mask):
    """Independent 4-connected component oracle: list of sorted flat-index
    arrays in first-pixel order."""
    gh, gw = mask.shape
    seen = np.zeros_like(mask, dtype=bool)
    comps = []
    for r0 in range(gh):
        for c0 in range(gw):
            if not mask[r0, c0] or seen[r0, c0]:
                continue
            stack = [(r0, c0)]
            seen[r0, c0] = True
            px = []
            while stack:
                r, c = stack.pop()
                px.append(r * gw + c)
                for dr, dc in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                    rr, cc = r + dr, c + dc
                    if 0 <= rr < gh and 0 <= cc < gw and mask[rr, cc] \
                            and not seen[rr, cc]:
                        seen[rr, cc] = True
                        stack.append((rr, cc))
            comps.append(np.array(sorted(px)))
    return comps


def brute_force_placement(layout, label, frame, offsets, prev_center, lam,
                          stride=1):
    """Exhaustive placement oracle: same admissibility contract as
    place_instance (no overlap with anything, no 4-adjacency with ``label``),
    cost C_c + lam * C_t, ties to smallest (row, col)."""
    gh, gw = layout.grid_h, layout.grid_w
    grid = layout.grids[frame]
    px = np.flatnonzero(grid.ravel() == label)
    if px.size:
        c0 = ((px // gw).mean(), (px % gw).mean())
    else:
        c0 = ((gh - 1) / 2.0, (gw - 1) / 2.0)
    has_prev = frame > 0 and prev_center is not None
    best = None
    best_cost = None
    row_lo, row_hi = -offsets[:, 0].min(), gh - 1 - offsets[:, 0].max()
    col_lo, col_hi = -offsets[:, 1].min(), gw - 1 - offsets[:, 1].max()
    for r in range(row_lo, row_hi + 1, stride):
        for c in range(col_lo, col_hi + 1, stride):
            ok = True
            for dr, dc in offsets:
                rr, cc = r + dr, c + dc
                if grid[rr, cc] != 0:
                    ok = False
                    break
                for ar, ac in ((rr + 1, cc), (rr - 1, cc), (rr, cc + 1), (rr, cc - 1)):
                    if 0 <= ar < gh and 0 <= ac < gw and grid[ar, ac] == label:
                        ok = False
                        break
                if not ok:
                    break
            if not ok:
                continue
            cost = (r - c0[0]) ** 2 + (c - c0[1]) ** 2
            if has_prev:
                cost += lam * ((r - prev_center[0]) ** 2 + (c - prev_center[1]) ** 2)
            if best_cost is None or cost < best_cost:
                best_cost = cost
                best = (r, c)
    return best


@pytest.fixture
def rng():
    return np.random.default_rng(0xC0FFEE)
