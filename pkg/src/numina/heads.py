"""Attention-head scoring and selection.

Self-attention heads are ranked by an instance-separability score computed on
a PCA-derived grayscale map of the head's row vectors; cross-attention heads
are ranked by their peak activation for a given text token.  The selected
pair (spatial scaffold + per-token semantic map) feeds layout construction.
"""

from dataclasses import dataclass

import numpy as np

from .io import AttentionBundle, BundleKind

# Exact SVD below this row count; randomized subspace iteration above.
_EXACT_SVD_MAX_N = 512
_RANDOMIZED_OVERSAMPLE = 7
_RANDOMIZED_POWER_ITERS = 2
_RANDOMIZED_SEED = 0x51D3


@dataclass
class GrayscaleMap:
    """H x W map in [0, 1] derived from one self-attention head."""

    grid_h: int
    grid_w: int
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != (self.grid_h, self.grid_w):
            raise ValueError("grayscale map shape does not match grid dims")


@dataclass
class HeadScore:
    head: int
    s1: float
    s2: float
    s3: float
    total: float


def _minmax(x):
    lo = x.min()
    hi = x.max()
    if hi - lo <= 0:
        return np.zeros_like(x)
    return (x - lo) / (hi - lo)


def _top_components(xc, k=3):
    """Top-k right singular vectors of the centered matrix, sign-fixed.

    Sign convention: each component's largest-magnitude loading is positive.
    Rows with singular value at numerical-rank tolerance come back as zero
    vectors (degenerate-rank padding).  Returns (components (k, n), scores
    (rows, k)).
    """
    n_rows, n = xc.shape
    if n_rows <= _EXACT_SVD_MAX_N:
        _, s, vt = np.linalg.svd(xc, full_matrices=False)
        vt = vt[: min(k, vt.shape[0])]
    else:
        rng = np.random.Generator(np.random.Philox(_RANDOMIZED_SEED))
        omega = rng.standard_normal((n, k + _RANDOMIZED_OVERSAMPLE))
        q, _ = np.linalg.qr(xc @ omega)
        for _ in range(_RANDOMIZED_POWER_ITERS):
            q, _ = np.linalg.qr(xc.T @ q)
            q, _ = np.linalg.qr(xc @ q)
        b = q.T @ xc
        _, s, vt = np.linalg.svd(b, full_matrices=False)
        vt = vt[:k]
    tol = 0.0
    if s.size and s[0] > 0:
        tol = s[0] * max(xc.shape) * np.finfo(np.float64).eps
    comps = np.zeros((k, n), dtype=np.float64)
    scores = np.zeros((n_rows, k), dtype=np.float64)
    for i in range(min(k, vt.shape[0])):
        if i >= s.size or s[i] <= tol:
            continue
        v = vt[i]
        j = int(np.argmax(np.abs(v)))
        if v[j] < 0:
            v = -v
        comps[i] = v
        scores[:, i] = xc @ v
    return comps, scores


def pca_grayscale(matrix, grid_h: int, grid_w: int) -> GrayscaleMap:
    """Project a head's row vectors onto their top-3 principal components
    and collapse to a single [0, 1] map.

    Rows are centered, projected, reshaped to H x W x 3, min-max normalized
    per channel, averaged with equal weight, and min-max normalized again.
    Fewer than three usable components pad the missing channels with zeros;
    a zero-variance matrix yields the all-zero map.
    """
    n = grid_h * grid_w
    x = np.asarray(matrix, dtype=np.float64)
    if x.shape != (n, n):
        raise ValueError(f"expected ({n}, {n}) attention matrix, got {x.shape}")
    if n < 4:
        raise ValueError("grid too small for PCA grayscale (need N >= 4)")
    xc = x - x.mean(axis=0, keepdims=True)
    _, scores = _top_components(xc, 3)
    channels = [_minmax(scores[:, i]) for i in range(3)]
    gray = _minmax(np.mean(channels, axis=0))
    return GrayscaleMap(grid_h, grid_w, gray.reshape(grid_h, grid_w))


def _sobel_mean(values):
    # 3x3 Sobel with replicate-padded borders; magnitude averaged over pixels
    p = np.pad(values, 1, mode="edge")
    gx = (
        p[:-2, 2:] + 2.0 * p[1:-1, 2:] + p[2:, 2:]
        - p[:-2, :-2] - 2.0 * p[1:-1, :-2] - p[2:, :-2]
    )
    gy = (
        p[2:, :-2] + 2.0 * p[2:, 1:-1] + p[2:, 2:]
        - p[:-2, :-2] - 2.0 * p[:-2, 1:-1] - p[:-2, 2:]
    )
    return float(np.sqrt(gx * gx + gy * gy).mean())


def _block_sum_variance(values, block):
    h, w = values.shape
    sums = []
    for r in range(0, h, block):
        for c in range(0, w, block):
            sums.append(values[r : r + block, c : c + block].sum())
    return float(np.var(sums))


def discriminability_score(gmap: GrayscaleMap, gamma: float = 0.5, block: int = 8) -> HeadScore:
    """S = S1 + S2 + gamma * S3 on a grayscale map.

    S1: population standard deviation of intensities.
    S2: variance across non-overlapping blocks of per-block sums (edge blocks
        may be partial).
    S3: mean Sobel gradient magnitude.
    """
    if block < 2 or block > min(gmap.grid_h, gmap.grid_w):
        raise ValueError("block must be in [2, min(grid_h, grid_w)]")
    v = gmap.values
    s1 = float(v.std())
    s2 = _block_sum_variance(v, block)
    s3 = _sobel_mean(v)
    return HeadScore(head=-1, s1=s1, s2=s2, s3=s3, total=s1 + s2 + gamma * s3)


def select_self_head(bundle: AttentionBundle, frame: int, gamma: float = 0.5,
                     block: int = 8):
    """Pick the self-attention head with the highest discriminability score.

    Ties break to the lowest head index.  Returns (head index, GrayscaleMap).
    """
    if bundle.kind != BundleKind.SELF_ATTN:
        raise ValueError("select_self_head requires a self-attention bundle")
    eff_block = max(2, min(block, bundle.grid_h, bundle.grid_w))
    best_idx = 0
    best_total = -np.inf
    best_map = None
    for h in range(bundle.heads):
        gmap = pca_grayscale(bundle.data[frame, h], bundle.grid_h, bundle.grid_w)
        score = discriminability_score(gmap, gamma=gamma, block=eff_block)
        if score.total > best_total:
            best_total = score.total
            best_idx = h
            best_map = gmap
    return best_idx, best_map


def select_cross_head(bundle: AttentionBundle, frame: int, token_index: int):
    """Pick the cross-attention head whose column for ``token_index`` has the
    highest peak.  Returns (head index, H x W map, peak value)."""
    if bundle.kind != BundleKind.CROSS_ATTN:
        raise ValueError("select_cross_head requires a cross-attention bundle")
    if not 0 <= token_index < bundle.text_len:
        raise ValueError(f"token index {token_index} out of range (L={bundle.text_len})")
    cols = np.asarray(bundle.data[frame, :, :, token_index], dtype=np.float64)
    peaks = cols.max(axis=1)
    best = int(np.argmax(peaks))
    amap = cols[best].reshape(bundle.grid_h, bundle.grid_w)
    return best, amap, float(peaks[best])
