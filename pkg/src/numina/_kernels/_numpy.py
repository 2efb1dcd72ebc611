"""Pure-numpy reference kernels.

These are the fallback implementations behind ``numina._kernels``; the numba
versions in ``_numba.py`` must agree with them (up to floating-point rounding
in accumulations).  Everything here is deterministic: loops run in index
order and ties resolve to the lowest index.
"""

import numpy as np


def mean_shift_modes(points, bandwidth, max_iter=100, tol=1e-3):
    """Flat-kernel mean shift: move every query point to the mean of the
    sample points within ``bandwidth`` until it shifts less than ``tol``.

    The sample set stays fixed at the original ``points``; only queries move.
    Returns the converged mode per point, shape ``(n, d)``.
    """
    pts = np.asarray(points, dtype=np.float64)
    cur = pts.copy()
    active = np.ones(len(pts), dtype=bool)
    bw2 = bandwidth * bandwidth
    tol2 = tol * tol
    for _ in range(max_iter):
        idx = np.where(active)[0]
        if idx.size == 0:
            break
        d2 = ((cur[idx, None, :] - pts[None, :, :]) ** 2).sum(axis=2)
        member = d2 <= bw2
        counts = member.sum(axis=1)
        new = (member[:, :, None] * pts[None, :, :]).sum(axis=1) / counts[:, None]
        shift2 = ((new - cur[idx]) ** 2).sum(axis=1)
        cur[idx] = new
        active[idx[shift2 <= tol2]] = False
    return cur


def link_modes(modes, thresh):
    """Single-linkage clustering of converged modes.

    Two modes within ``thresh`` are linked; clusters are the connected
    components of that graph, labelled 0..k-1 in order of first member.
    """
    m = np.asarray(modes, dtype=np.float64)
    n = len(m)
    labels = np.full(n, -1, dtype=np.int32)
    d2 = ((m[:, None, :] - m[None, :, :]) ** 2).sum(axis=2)
    adj = d2 <= thresh * thresh
    cur = 0
    for i in range(n):
        if labels[i] >= 0:
            continue
        stack = [i]
        labels[i] = cur
        while stack:
            j = stack.pop()
            nb = np.where(adj[j] & (labels < 0))[0]
            labels[nb] = cur
            stack.extend(nb.tolist())
        cur += 1
    return labels


def dbscan_labels(points, eps, min_pts):
    """Brute-force DBSCAN on 2-d points.

    Neighborhood counts include the point itself.  Returns labels with -1
    for noise; clusters numbered 0..k-1 in seed order.
    """
    p = np.asarray(points, dtype=np.float64)
    n = len(p)
    labels = np.full(n, -1, dtype=np.int32)
    if n == 0:
        return labels
    d2 = ((p[:, None, :] - p[None, :, :]) ** 2).sum(axis=2)
    nbr = d2 <= eps * eps
    core = nbr.sum(axis=1) >= min_pts
    visited = np.zeros(n, dtype=bool)
    cur = 0
    for i in range(n):
        if visited[i] or not core[i]:
            continue
        labels[i] = cur
        visited[i] = True
        stack = [i]
        while stack:
            j = stack.pop()
            for q in np.where(nbr[j])[0]:
                if labels[q] < 0:
                    labels[q] = cur
                if not visited[q] and core[q]:
                    visited[q] = True
                    stack.append(int(q))
        cur += 1
    return labels


def label_components(mask):
    """4-connected component labelling of a boolean grid.

    Components are numbered 1..k in order of their smallest row-major pixel;
    background stays 0.
    """
    m = np.asarray(mask)
    gh, gw = m.shape
    labels = np.zeros((gh, gw), dtype=np.int32)
    cur = 0
    for r0 in range(gh):
        for c0 in range(gw):
            if not m[r0, c0] or labels[r0, c0] != 0:
                continue
            cur += 1
            stack = [(r0, c0)]
            labels[r0, c0] = cur
            while stack:
                r, c = stack.pop()
                if r > 0 and m[r - 1, c] and labels[r - 1, c] == 0:
                    labels[r - 1, c] = cur
                    stack.append((r - 1, c))
                if r + 1 < gh and m[r + 1, c] and labels[r + 1, c] == 0:
                    labels[r + 1, c] = cur
                    stack.append((r + 1, c))
                if c > 0 and m[r, c - 1] and labels[r, c - 1] == 0:
                    labels[r, c - 1] = cur
                    stack.append((r, c - 1))
                if c + 1 < gw and m[r, c + 1] and labels[r, c + 1] == 0:
                    labels[r, c + 1] = cur
                    stack.append((r, c + 1))
    return labels


def best_placement(forbidden, offsets, row_lo, row_hi, col_lo, col_hi, stride,
                   c0r, c0c, prev_r, prev_c, has_prev, lam):
    """Exhaustive cost minimisation over the candidate-center grid.

    Candidates are ``(r, c)`` with ``r in row_lo..row_hi step stride`` (same
    for columns).  A candidate is admissible only when no template cell lands
    on ``forbidden`` (occupied cells plus the 4-neighborhood of the edited
    label, so the insertion really creates a new instance).  Cost: squared
    distance to ``(c0r, c0c)`` plus ``lam`` * squared distance to the
    previous center when ``has_prev``.  Ties resolve to the smallest
    (row, col).  Returns ``(r, c, center_cost, temporal_cost)`` with
    ``r == -1`` when no candidate is admissible.
    """
    fb = np.asarray(forbidden)
    best = (-1, -1)
    best_total = np.inf
    best_parts = (0.0, 0.0)
    for r in range(row_lo, row_hi + 1, stride):
        for c in range(col_lo, col_hi + 1, stride):
            if fb[r + offsets[:, 0], c + offsets[:, 1]].any():
                continue
            cc = float((r - c0r) ** 2 + (c - c0c) ** 2)
            ct = float((r - prev_r) ** 2 + (c - prev_c) ** 2) if has_prev else 0.0
            total = cc + lam * ct
            if total < best_total:
                best_total = total
                best = (r, c)
                best_parts = (cc, ct)
    return best[0], best[1], best_parts[0], best_parts[1]
