"""Compiled kernels for exact (presorted) and histogram tree growth.

Every node statistic is a pair (T, H): T sums the per-row targets, H the
per-row hessians/weights. Leaf value is T / (H + lam) and the split score is

    T_L^2/(H_L+lam) + T_R^2/(H_R+lam) - T^2/(H+lam)

which is the SSE reduction when lam = 0, T = sum(w*y), H = sum(w), and twice
the second-order gain otherwise. ``cnt`` carries sample counts (bootstrap
multiplicities) for the min_samples_leaf rule.
"""

import numpy as np
from numba import njit

_CACHE = True

# node arrays: feature (-1 for leaves), threshold, left, right, value, count, gain


@njit(cache=_CACHE)
def _splitmix(state):
    state = (state + np.uint64(0x9E3779B97F4A7C15)) & np.uint64(0xFFFFFFFFFFFFFFFF)
    z = state
    z = ((z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)) & np.uint64(0xFFFFFFFFFFFFFFFF)
    z = ((z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)) & np.uint64(0xFFFFFFFFFFFFFFFF)
    z = z ^ (z >> np.uint64(31))
    return state, z


@njit(cache=_CACHE)
def _score(t, h, lam):
    d = h + lam
    if d <= 0.0:
        return 0.0
    return t * t / d


@njit(cache=_CACHE)
def _scan_feature(order_f, start, end, xf, t, h, cnt, lam, min_leaf, t_tot, h_tot, c_tot):
    """Best (score, threshold) for one feature over a presorted node range."""
    parent = _score(t_tot, h_tot, lam)
    best = -np.inf
    best_thr = 0.0
    tl = 0.0
    hl = 0.0
    cl = 0.0
    for pos in range(start, end - 1):
        r = order_f[pos]
        tl += t[r]
        hl += h[r]
        cl += cnt[r]
        x_here = xf[r]
        x_next = xf[order_f[pos + 1]]
        if x_next <= x_here:
            continue
        if cl < min_leaf or c_tot - cl < min_leaf:
            continue
        g = _score(tl, hl, lam) + _score(t_tot - tl, h_tot - hl, lam) - parent
        if g > best:
            best = g
            thr = 0.5 * (x_here + x_next)
            if thr >= x_next:
                thr = x_here
            best_thr = thr
    return best, best_thr


@njit(cache=_CACHE, nogil=True)
def grow_exact(X, order, t, h, cnt, lam, max_depth, min_leaf, mtry, seed, min_gain_rel):
    """Depth-first exact CART growth.

    ``order`` is (p, m): for every feature the m active rows sorted by value.
    It is permuted in place as nodes are partitioned.
    """
    n, p = X.shape
    m = order.shape[1]
    cap = 2 * m + 1
    feat = np.full(cap, -1, np.int64)
    thr = np.zeros(cap)
    left = np.full(cap, -1, np.int64)
    right = np.full(cap, -1, np.int64)
    value = np.zeros(cap)
    count = np.zeros(cap)
    gain = np.zeros(cap)
    importance = np.zeros(p)

    goes_left = np.zeros(n, np.bool_)
    buf = np.empty(m, order.dtype)
    feats = np.arange(p)
    chosen = np.empty(p, np.int64)
    state = np.uint64(seed)

    # stack of (node, start, end, depth)
    stack_node = np.empty(cap, np.int64)
    stack_start = np.empty(cap, np.int64)
    stack_end = np.empty(cap, np.int64)
    stack_depth = np.empty(cap, np.int64)
    top = 0
    n_nodes = 1
    stack_node[0] = 0
    stack_start[0] = 0
    stack_end[0] = m
    stack_depth[0] = 0
    top = 1

    while top > 0:
        top -= 1
        node = stack_node[top]
        start = stack_start[top]
        end = stack_end[top]
        depth = stack_depth[top]

        o0 = order[0]
        t_tot = 0.0
        h_tot = 0.0
        c_tot = 0.0
        scale = 0.0
        for pos in range(start, end):
            r = o0[pos]
            t_tot += t[r]
            h_tot += h[r]
            c_tot += cnt[r]
            if h[r] > 0.0:
                scale += t[r] * t[r] / h[r]
        value[node] = t_tot / (h_tot + lam) if h_tot + lam > 0.0 else 0.0
        count[node] = c_tot

        if (max_depth >= 0 and depth >= max_depth) or c_tot < 2 * min_leaf or end - start < 2:
            continue

        # candidate features: partial Fisher-Yates, then ascending for tie-breaks
        k = mtry
        if k >= p:
            for j in range(p):
                chosen[j] = j
            k = p
        else:
            for j in range(p):
                feats[j] = j
            for j in range(k):
                state, z = _splitmix(state)
                swap = j + np.int64(z % np.uint64(p - j))
                tmp = feats[j]
                feats[j] = feats[swap]
                feats[swap] = tmp
            for j in range(k):
                chosen[j] = feats[j]
            chosen[:k].sort()

        best = -np.inf
        best_f = -1
        best_thr = 0.0
        for j in range(k):
            f = chosen[j]
            g, tr = _scan_feature(order[f], start, end, X[:, f], t, h, cnt, lam, min_leaf,
                                  t_tot, h_tot, c_tot)
            if g > best:
                best = g
                best_f = f
                best_thr = tr
        if best_f < 0 or not (best > min_gain_rel * scale) or best <= 0.0:
            continue

        xf = X[:, best_f]
        n_left = 0
        of = order[best_f]
        for pos in range(start, end):
            r = of[pos]
            gl = xf[r] <= best_thr
            goes_left[r] = gl
            if gl:
                n_left += 1
        # stable partition of every feature's presorted range
        for f in range(p):
            row = order[f]
            li = start
            ri = 0
            for pos in range(start, end):
                r = row[pos]
                if goes_left[r]:
                    row[li] = r
                    li += 1
                else:
                    buf[ri] = r
                    ri += 1
            for q in range(ri):
                row[li + q] = buf[q]

        feat[node] = best_f
        thr[node] = best_thr
        gain[node] = best
        importance[best_f] += best
        lnode = n_nodes
        rnode = n_nodes + 1
        n_nodes += 2
        left[node] = lnode
        right[node] = rnode
        mid = start + n_left
        # push right first so the left subtree is expanded first
        stack_node[top] = rnode
        stack_start[top] = mid
        stack_end[top] = end
        stack_depth[top] = depth + 1
        top += 1
        stack_node[top] = lnode
        stack_start[top] = start
        stack_end[top] = mid
        stack_depth[top] = depth + 1
        top += 1

    return (feat[:n_nodes].copy(), thr[:n_nodes].copy(), left[:n_nodes].copy(),
            right[:n_nodes].copy(), value[:n_nodes].copy(), count[:n_nodes].copy(),
            gain[:n_nodes].copy(), importance)


@njit(cache=_CACHE, nogil=True)
def active_order(presorted, cnt):
    """Filter a (p, n) presorted index matrix down to rows with cnt > 0."""
    p, n = presorted.shape
    m = 0
    for i in range(n):
        if cnt[i] > 0:
            m += 1
    out = np.empty((p, m), presorted.dtype)
    for f in range(p):
        k = 0
        for i in range(n):
            r = presorted[f, i]
            if cnt[r] > 0:
                out[f, k] = r
                k += 1
    return out


@njit(cache=_CACHE, nogil=True)
def predict_tree(X, feat, thr, left, right, value):
    n = X.shape[0]
    out = np.empty(n)
    for i in range(n):
        node = 0
        while feat[node] >= 0:
            if X[i, feat[node]] <= thr[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = value[node]
    return out


@njit(cache=_CACHE, nogil=True)
def apply_tree(X, feat, thr, left, right):
    """Leaf index reached by every row."""
    n = X.shape[0]
    out = np.empty(n, np.int64)
    for i in range(n):
        node = 0
        while feat[node] >= 0:
            if X[i, feat[node]] <= thr[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = node
    return out


@njit(cache=_CACHE)
def _hist_best(B, rows, start, end, t, h, lam, min_leaf, n_bins, hist_t, hist_h, hist_c):
    """Best (score, feature, bin) over histogram boundaries for rows[start:end]."""
    p = B.shape[1]
    t_tot = 0.0
    h_tot = 0.0
    for pos in range(start, end):
        r = rows[pos]
        t_tot += t[r]
        h_tot += h[r]
    c_tot = end - start
    parent = _score(t_tot, h_tot, lam)
    best = -np.inf
    best_f = -1
    best_b = -1
    for f in range(p):
        nb = n_bins[f]
        if nb < 2:
            continue
        for b in range(nb):
            hist_t[b] = 0.0
            hist_h[b] = 0.0
            hist_c[b] = 0
        for pos in range(start, end):
            r = rows[pos]
            b = B[r, f]
            hist_t[b] += t[r]
            hist_h[b] += h[r]
            hist_c[b] += 1
        tl = 0.0
        hl = 0.0
        cl = 0
        for b in range(nb - 1):
            tl += hist_t[b]
            hl += hist_h[b]
            cl += hist_c[b]
            if hist_c[b] == 0:
                continue
            if cl < min_leaf or c_tot - cl < min_leaf:
                continue
            g = _score(tl, hl, lam) + _score(t_tot - tl, h_tot - hl, lam) - parent
            if g > best:
                best = g
                best_f = f
                best_b = b
    return best, best_f, best_b, t_tot, h_tot


@njit(cache=_CACHE, nogil=True)
def grow_leafwise(B, cuts, n_bins, t, h, lam, num_leaves, max_depth, min_leaf, min_gain_rel):
    """Best-first growth on pre-binned features up to ``num_leaves`` leaves.

    ``cuts`` is (p, max_bins-1): a row in bin b satisfies x <= cuts[f, b] and
    x > cuts[f, b-1], so a split after bin b uses threshold cuts[f, b].
    """
    n, p = B.shape
    max_b = 1
    for f in range(p):
        if n_bins[f] > max_b:
            max_b = n_bins[f]
    hist_t = np.empty(max_b)
    hist_h = np.empty(max_b)
    hist_c = np.empty(max_b, np.int64)

    cap = 2 * num_leaves + 1
    feat = np.full(cap, -1, np.int64)
    thr = np.zeros(cap)
    left = np.full(cap, -1, np.int64)
    right = np.full(cap, -1, np.int64)
    value = np.zeros(cap)
    count = np.zeros(cap)
    gain = np.zeros(cap)
    importance = np.zeros(p)

    node_start = np.zeros(cap, np.int64)
    node_end = np.zeros(cap, np.int64)
    node_depth = np.zeros(cap, np.int64)
    cand_gain = np.full(cap, -np.inf)
    cand_f = np.full(cap, -1, np.int64)
    cand_b = np.full(cap, -1, np.int64)
    is_open = np.zeros(cap, np.bool_)

    rows = np.arange(n)
    buf = np.empty(n, np.int64)
    n_nodes = 1
    node_end[0] = n

    # evaluate a freshly created leaf
    g, f, b, tt, hh = _hist_best(B, rows, 0, n, t, h, lam, min_leaf, n_bins, hist_t, hist_h, hist_c)
    value[0] = tt / (hh + lam) if hh + lam > 0.0 else 0.0
    count[0] = n
    scale0 = 0.0
    for r in range(n):
        if h[r] > 0.0:
            scale0 += t[r] * t[r] / h[r]
    cand_gain[0] = g
    cand_f[0] = f
    cand_b[0] = b
    is_open[0] = True
    n_leaves = 1

    while n_leaves < num_leaves:
        pick = -1
        best = 0.0
        for node in range(n_nodes):
            if is_open[node] and cand_f[node] >= 0 and cand_gain[node] > best:
                if max_depth >= 0 and node_depth[node] >= max_depth:
                    continue
                if cand_gain[node] <= min_gain_rel * scale0:
                    continue
                best = cand_gain[node]
                pick = node
        if pick < 0:
            break
        f = cand_f[pick]
        b = cand_b[pick]
        start = node_start[pick]
        end = node_end[pick]
        li = start
        ri = 0
        for pos in range(start, end):
            r = rows[pos]
            if B[r, f] <= b:
                rows[li] = r
                li += 1
            else:
                buf[ri] = r
                ri += 1
        for q in range(ri):
            rows[li + q] = buf[q]

        feat[pick] = f
        thr[pick] = cuts[f, b]
        gain[pick] = cand_gain[pick]
        importance[f] += cand_gain[pick]
        is_open[pick] = False
        for child, cs, ce in ((n_nodes, start, li), (n_nodes + 1, li, end)):
            node_start[child] = cs
            node_end[child] = ce
            node_depth[child] = node_depth[pick] + 1
            g, cf, cb, tt, hh = _hist_best(B, rows, cs, ce, t, h, lam, min_leaf, n_bins,
                                           hist_t, hist_h, hist_c)
            value[child] = tt / (hh + lam) if hh + lam > 0.0 else 0.0
            count[child] = ce - cs
            cand_gain[child] = g
            cand_f[child] = cf
            cand_b[child] = cb
            is_open[child] = True
        left[pick] = n_nodes
        right[pick] = n_nodes + 1
        n_nodes += 2
        n_leaves += 1

    return (feat[:n_nodes].copy(), thr[:n_nodes].copy(), left[:n_nodes].copy(),
            right[:n_nodes].copy(), value[:n_nodes].copy(), count[:n_nodes].copy(),
            gain[:n_nodes].copy(), importance)


@njit(cache=_CACHE, nogil=True)
def bin_matrix(X, cuts, n_bins):
    n, p = X.shape
    B = np.empty((n, p), np.int64)
    for f in range(p):
        nc = n_bins[f] - 1
        for i in range(n):
            B[i, f] = np.searchsorted(cuts[f, :nc], X[i, f])
    return B
