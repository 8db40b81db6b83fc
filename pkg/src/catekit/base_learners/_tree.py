"""Numba kernels for exact-greedy, leaf-wise regression trees.

A tree is stored as flat arrays indexed by node id. Internal nodes have
``left >= 0``; leaves have ``left == right == -1`` and carry ``value``.
Rows go left when ``x[feature] <= threshold``.

The builder works on per-feature presorted row indices. Each node owns a
contiguous segment ``[start, end)`` of every feature's index list, sorted by
that feature; splitting a node stably partitions all segments in place.
"""

import numpy as np
from numba import njit

_NEG = -1.0


@njit(cache=True, nogil=True)
def _best_split(x, g, h, sorted_idx, start, end, min_leaf, min_hess):
    """Best (gain, feature, position, threshold) for one node segment.

    ``position`` is the last segment offset that goes left. Ties keep the
    first candidate in (feature, threshold) order; gains must be strictly
    positive.
    """
    d = sorted_idx.shape[0]
    m = end - start
    best_gain = 0.0
    best_f = -1
    best_pos = -1
    best_thr = 0.0
    if m < 2 * min_leaf:
        return best_gain, best_f, best_pos, best_thr

    g_tot = 0.0
    h_tot = 0.0
    row = sorted_idx[0]
    for k in range(start, end):
        i = row[k]
        g_tot += g[i]
        h_tot += h[i]

    for f in range(d):
        row = sorted_idx[f]
        gl = 0.0
        hl = 0.0
        for k in range(start, end - 1):
            i = row[k]
            gl += g[i]
            hl += h[i]
            n_left = k - start + 1
            if n_left < min_leaf:
                continue
            if m - n_left < min_leaf:
                break
            xa = x[i, f]
            xb = x[row[k + 1], f]
            if not xa < xb:
                continue
            hr = h_tot - hl
            if hl <= min_hess or hr <= min_hess:
                continue
            gr = g_tot - gl
            num = gl * hr - gr * hl
            gain = num * num / (hl * hr * h_tot)
            if gain > best_gain:
                thr = xa + (xb - xa) * 0.5
                if not thr < xb:
                    thr = xa
                best_gain = gain
                best_f = f
                best_pos = k
                best_thr = thr
    return best_gain, best_f, best_pos, best_thr


@njit(cache=True, nogil=True)
def build_tree(x, g, h, sorted_idx, num_leaves, min_leaf, min_hess):
    """Grow one tree leaf-wise on the rows listed in ``sorted_idx``.

    ``g`` and ``h`` are per-row first and second order statistics (already
    multiplied by sample weights). Leaf values are Newton steps ``-G/H``.
    ``sorted_idx`` is modified in place.
    """
    d, m = sorted_idx.shape
    max_nodes = 2 * num_leaves - 1
    feature = np.full(max_nodes, -1, np.int64)
    threshold = np.zeros(max_nodes)
    left = np.full(max_nodes, -1, np.int64)
    right = np.full(max_nodes, -1, np.int64)
    value = np.zeros(max_nodes)
    start = np.zeros(max_nodes, np.int64)
    end = np.zeros(max_nodes, np.int64)

    cand_gain = np.full(max_nodes, _NEG)
    cand_f = np.full(max_nodes, -1, np.int64)
    cand_pos = np.full(max_nodes, -1, np.int64)
    cand_thr = np.zeros(max_nodes)

    goes_left = np.zeros(x.shape[0], np.bool_)
    buf = np.empty(m, np.int64)

    start[0] = 0
    end[0] = m
    n_nodes = 1
    n_leaves = 1
    gain, f, pos, thr = _best_split(x, g, h, sorted_idx, 0, m, min_leaf, min_hess)
    if f >= 0:
        cand_gain[0] = gain
        cand_f[0] = f
        cand_pos[0] = pos
        cand_thr[0] = thr

    while n_leaves < num_leaves:
        # pick the open leaf with the largest gain (lowest id on ties)
        node = -1
        top = 0.0
        for j in range(n_nodes):
            if cand_f[j] >= 0 and cand_gain[j] > top:
                top = cand_gain[j]
                node = j
        if node < 0:
            break

        s = start[node]
        e = end[node]
        f = cand_f[node]
        pos = cand_pos[node]
        row = sorted_idx[f]
        for k in range(s, e):
            goes_left[row[k]] = k <= pos
        n_left = pos - s + 1
        for ff in range(d):
            row = sorted_idx[ff]
            a = 0
            b = n_left
            for k in range(s, e):
                i = row[k]
                if goes_left[i]:
                    buf[a] = i
                    a += 1
                else:
                    buf[b] = i
                    b += 1
            for k in range(e - s):
                row[s + k] = buf[k]

        lc = n_nodes
        rc = n_nodes + 1
        n_nodes += 2
        n_leaves += 1
        feature[node] = f
        threshold[node] = cand_thr[node]
        left[node] = lc
        right[node] = rc
        cand_f[node] = -1
        start[lc] = s
        end[lc] = s + n_left
        start[rc] = s + n_left
        end[rc] = e
        for child in (lc, rc):
            gain, cf, cpos, cthr = _best_split(
                x, g, h, sorted_idx, start[child], end[child], min_leaf, min_hess
            )
            if cf >= 0:
                cand_gain[child] = gain
                cand_f[child] = cf
                cand_pos[child] = cpos
                cand_thr[child] = cthr

    row = sorted_idx[0]
    for j in range(n_nodes):
        if left[j] < 0:
            gs = 0.0
            hs = 0.0
            for k in range(start[j], end[j]):
                i = row[k]
                gs += g[i]
                hs += h[i]
            value[j] = -gs / hs if hs > 0.0 else 0.0

    return (
        feature[:n_nodes].copy(),
        threshold[:n_nodes].copy(),
        left[:n_nodes].copy(),
        right[:n_nodes].copy(),
        value[:n_nodes].copy(),
    )


@njit(cache=True, nogil=True)
def predict_forest(x, offsets, feature, threshold, left, right, value, scale, base):
    """Sum ``scale * leaf value`` over all trees, plus ``base``.

    Trees are concatenated; tree ``t`` spans nodes ``offsets[t]:offsets[t+1]``
    and its child indices are local to the tree.
    """
    n = x.shape[0]
    out = np.full(n, base)
    n_trees = offsets.shape[0] - 1
    for t in range(n_trees):
        off = offsets[t]
        for i in range(n):
            j = 0
            while left[off + j] >= 0:
                if x[i, feature[off + j]] <= threshold[off + j]:
                    j = left[off + j]
                else:
                    j = right[off + j]
            out[i] += scale * value[off + j]
    return out


@njit(cache=True, nogil=True)
def predict_tree(x, feature, threshold, left, right, value):
    n = x.shape[0]
    out = np.empty(n)
    for i in range(n):
        j = 0
        while left[j] >= 0:
            if x[i, feature[j]] <= threshold[j]:
                j = left[j]
            else:
                j = right[j]
        out[i] = value[j]
    return out
