"""Numba-compiled kernels, mirroring ``_numpy.py`` exactly.

All kernels are serial ``@njit(cache=True)`` functions: no ``prange``, so the
results are independent of thread settings and compile artifacts are cached
across processes.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def mean_shift_modes(points, bandwidth, max_iter=100, tol=1e-3):
    n, d = points.shape
    cur = points.copy()
    active = np.ones(n, dtype=np.bool_)
    bw2 = bandwidth * bandwidth
    tol2 = tol * tol
    new = np.empty(d, dtype=np.float64)
    for _ in range(max_iter):
        moved = False
        for i in range(n):
            if not active[i]:
                continue
            for k in range(d):
                new[k] = 0.0
            cnt = 0
            for j in range(n):
                d2 = 0.0
                for k in range(d):
                    diff = cur[i, k] - points[j, k]
                    d2 += diff * diff
                if d2 <= bw2:
                    cnt += 1
                    for k in range(d):
                        new[k] += points[j, k]
            shift2 = 0.0
            for k in range(d):
                nk = new[k] / cnt
                diff = nk - cur[i, k]
                shift2 += diff * diff
                cur[i, k] = nk
            if shift2 <= tol2:
                active[i] = False
            else:
                moved = True
        if not moved:
            break
    return cur


@njit(cache=True)
def link_modes(modes, thresh):
    n, d = modes.shape
    labels = np.full(n, -1, dtype=np.int32)
    t2 = thresh * thresh
    stack = np.empty(n, dtype=np.int64)
    cur = 0
    for i in range(n):
        if labels[i] >= 0:
            continue
        labels[i] = cur
        stack[0] = i
        top = 1
        while top > 0:
            top -= 1
            j = stack[top]
            for q in range(n):
                if labels[q] >= 0:
                    continue
                d2 = 0.0
                for k in range(d):
                    diff = modes[j, k] - modes[q, k]
                    d2 += diff * diff
                if d2 <= t2:
                    labels[q] = cur
                    stack[top] = q
                    top += 1
        cur += 1
    return labels


@njit(cache=True)
def dbscan_labels(points, eps, min_pts):
    n = points.shape[0]
    labels = np.full(n, -1, dtype=np.int32)
    if n == 0:
        return labels
    e2 = eps * eps
    # neighborhood counts include the point itself
    core = np.zeros(n, dtype=np.bool_)
    for i in range(n):
        cnt = 0
        for j in range(n):
            d2 = 0.0
            for k in range(points.shape[1]):
                diff = points[i, k] - points[j, k]
                d2 += diff * diff
            if d2 <= e2:
                cnt += 1
        core[i] = cnt >= min_pts
    visited = np.zeros(n, dtype=np.bool_)
    stack = np.empty(n, dtype=np.int64)
    cur = 0
    for i in range(n):
        if visited[i] or not core[i]:
            continue
        labels[i] = cur
        visited[i] = True
        stack[0] = i
        top = 1
        while top > 0:
            top -= 1
            j = stack[top]
            for q in range(n):
                d2 = 0.0
                for k in range(points.shape[1]):
                    diff = points[j, k] - points[q, k]
                    d2 += diff * diff
                if d2 <= e2:
                    if labels[q] < 0:
                        labels[q] = cur
                    if not visited[q] and core[q]:
                        visited[q] = True
                        stack[top] = q
                        top += 1
        cur += 1
    return labels


@njit(cache=True)
def label_components(mask):
    gh, gw = mask.shape
    labels = np.zeros((gh, gw), dtype=np.int32)
    stack = np.empty((gh * gw, 2), dtype=np.int64)
    cur = 0
    for r0 in range(gh):
        for c0 in range(gw):
            if not mask[r0, c0] or labels[r0, c0] != 0:
                continue
            cur += 1
            labels[r0, c0] = cur
            stack[0, 0] = r0
            stack[0, 1] = c0
            top = 1
            while top > 0:
                top -= 1
                r = stack[top, 0]
                c = stack[top, 1]
                if r > 0 and mask[r - 1, c] and labels[r - 1, c] == 0:
                    labels[r - 1, c] = cur
                    stack[top, 0] = r - 1
                    stack[top, 1] = c
                    top += 1
                if r + 1 < gh and mask[r + 1, c] and labels[r + 1, c] == 0:
                    labels[r + 1, c] = cur
                    stack[top, 0] = r + 1
                    stack[top, 1] = c
                    top += 1
                if c > 0 and mask[r, c - 1] and labels[r, c - 1] == 0:
                    labels[r, c - 1] = cur
                    stack[top, 0] = r
                    stack[top, 1] = c - 1
                    top += 1
                if c + 1 < gw and mask[r, c + 1] and labels[r, c + 1] == 0:
                    labels[r, c + 1] = cur
                    stack[top, 0] = r
                    stack[top, 1] = c + 1
                    top += 1
    return labels


@njit(cache=True)
def best_placement(forbidden, offsets, row_lo, row_hi, col_lo, col_hi, stride,
                   c0r, c0c, prev_r, prev_c, has_prev, lam):
    best_r = -1
    best_c = -1
    best_total = np.inf
    best_cc = 0.0
    best_ct = 0.0
    k = offsets.shape[0]
    for r in range(row_lo, row_hi + 1, stride):
        for c in range(col_lo, col_hi + 1, stride):
            blocked = False
            for i in range(k):
                if forbidden[r + offsets[i, 0], c + offsets[i, 1]]:
                    blocked = True
                    break
            if blocked:
                continue
            cc = (r - c0r) ** 2 + (c - c0c) ** 2
            ct = 0.0
            if has_prev:
                ct = (r - prev_r) ** 2 + (c - prev_c) ** 2
            total = cc + lam * ct
            if total < best_total:
                best_total = total
                best_r = r
                best_c = c
                best_cc = cc
                best_ct = ct
    return best_r, best_c, best_cc, best_ct
