"""Compiled kernels for tree growing and traversal.

Trees are grown breadth-first so a tree limited to depth d is exactly the
depth-d truncation of the same tree grown deeper (same seed). Every tree owns
a splitmix64 stream whose start is a hash of (forest seed, tree index).
"""

import numpy as np
from numba import njit, prange

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_ONE = np.uint64(1)
_INV53 = 1.0 / 9007199254740992.0


@njit(cache=True, nogil=True)
def _next_u64(state):
    state[0] += _GOLDEN
    z = state[0]
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


@njit(cache=True, nogil=True)
def _mix(z):
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


@njit(cache=True, nogil=True)
def _tree_state(seed, tree_index):
    # hash both keys so streams of different trees start far apart
    state = np.empty(1, np.uint64)
    state[0] = _mix(_mix(seed + _GOLDEN) ^ _mix(np.uint64(tree_index) + _GOLDEN + _GOLDEN))
    return state


@njit(cache=True, nogil=True)
def _randbelow(state, n):
    u = np.float64(_next_u64(state) >> np.uint64(11)) * _INV53
    k = int(u * n)
    if k >= n:
        k = n - 1
    return k


@njit(cache=True, nogil=True)
def tree_stream_sample(seed, tree_index, n, k):
    """First ``k`` bootstrap draws of a tree's stream (exposed for tests)."""
    state = _tree_state(seed, tree_index)
    out = np.empty(k, np.int64)
    for i in range(k):
        out[i] = _randbelow(state, n)
    return out


@njit(cache=True, nogil=True)
def _best_numeric(Xt, f, ordf, s, e, m, y, w, ycls, prob, R, cls_tot, cls_l, cls_r):
    xf = Xt[f]
    if xf[ordf[s]] == xf[ordf[e - 1]]:
        return -np.inf, 0.0
    best = -np.inf
    best_thr = 0.0
    nl = 0.0
    if prob:
        sql = 0.0
        sqr = 0.0
        for c in range(R):
            cls_l[c] = 0.0
            cls_r[c] = cls_tot[c]
            sqr += cls_tot[c] * cls_tot[c]
        for k in range(s, e - 1):
            r = ordf[k]
            c = ycls[r]
            wr = w[r]
            sql += wr * (2.0 * cls_l[c] + wr)
            cls_l[c] += wr
            sqr -= wr * (2.0 * cls_r[c] - wr)
            cls_r[c] -= wr
            nl += wr
            v = xf[r]
            vn = xf[ordf[k + 1]]
            if v == vn:
                continue
            score = sql / nl + sqr / (m - nl)
            if score > best:
                best = score
                t = 0.5 * (v + vn)
                if t >= vn:
                    t = v
                best_thr = t
    else:
        tot = 0.0
        for k in range(s, e):
            r = ordf[k]
            tot += w[r] * y[r]
        sl = 0.0
        for k in range(s, e - 1):
            r = ordf[k]
            sl += w[r] * y[r]
            nl += w[r]
            v = xf[r]
            vn = xf[ordf[k + 1]]
            if v == vn:
                continue
            sr = tot - sl
            score = sl * sl / nl + sr * sr / (m - nl)
            if score > best:
                best = score
                t = 0.5 * (v + vn)
                if t >= vn:
                    t = v
                best_thr = t
    return best, best_thr


@njit(cache=True, nogil=True)
def _best_categorical(Xt, f, L, ordf, s, e, m, y, w, ycls, prob, R,
                      cat_cnt, cat_sum, cat_cls, cls_l, cls_tot, key, present):
    xf = Xt[f]
    for c in range(L):
        cat_cnt[c] = 0.0
        cat_sum[c] = 0.0
        for r in range(R):
            cat_cls[c, r] = 0.0
    tot = 0.0
    for k in range(s, e):
        i = ordf[k]
        c = int(xf[i])
        cat_cnt[c] += w[i]
        if prob:
            cat_cls[c, ycls[i]] += w[i]
        else:
            cat_sum[c] += w[i] * y[i]
            tot += w[i] * y[i]
    q = 0
    for c in range(L):
        if cat_cnt[c] > 0:
            present[q] = c
            if prob:
                key[q] = cat_cls[c, 0] / cat_cnt[c]
            else:
                key[q] = cat_sum[c] / cat_cnt[c]
            q += 1
    if q < 2:
        return -np.inf, np.uint64(0)
    # mergesort is stable: equal keys keep ascending level order
    order = np.argsort(key[:q], kind="mergesort")
    best = -np.inf
    best_mask = np.uint64(0)
    mask = np.uint64(0)
    nl = 0.0
    sl = 0.0
    for r in range(R):
        cls_l[r] = 0.0
    for j in range(q - 1):
        c = present[order[j]]
        mask |= _ONE << np.uint64(c)
        nl += cat_cnt[c]
        nr = m - nl
        if prob:
            sql = 0.0
            sqr = 0.0
            for r in range(R):
                cls_l[r] += cat_cls[c, r]
                lr = cls_l[r]
                rr = cls_tot[r] - lr
                sql += lr * lr
                sqr += rr * rr
            score = sql / nl + sqr / nr
        else:
            sl += cat_sum[c]
            sr = tot - sl
            score = sl * sl / nl + sr * sr / nr
        if score > best:
            best = score
            best_mask = mask
    return best, best_mask


@njit(cache=True, nogil=True)
def build_tree(Xt, gsort, y, n_classes, is_cat, n_levels, mtry, min_node_size, max_depth, seed, tree_index):
    """Grow one tree on a bootstrap of the training rows.

    ``Xt`` is the transposed predictor matrix (p, n) and ``gsort[f]`` the row
    order of feature f sorted by value. Bootstrap duplicates are carried as
    row weights. Returns (feature, threshold, category_mask, left, right,
    value, inbag); ``feature`` is -1 on leaves and ``value`` holds the mean
    response (regression) or class frequencies.
    """
    p, n = Xt.shape
    prob = n_classes > 0
    R = n_classes if prob else 1
    state = _tree_state(seed, tree_index)

    ycls = np.zeros(n, np.int64)
    if prob:
        for i in range(n):
            ycls[i] = int(y[i])

    inbag = np.zeros(n, np.int32)
    for k in range(n):
        inbag[_randbelow(state, n)] += 1
    w = inbag.astype(np.float64)
    u = 0
    for i in range(n):
        if inbag[i] > 0:
            u += 1

    # per-feature lists of in-bag rows sorted by value; every node owns the
    # same [start, end) segment in each of them. Two copies: nodes at even
    # depth read lists[0] and write their children's rows to lists[1].
    lists = np.empty((2, p, u + 1), np.int32)
    for f in range(p):
        k = 0
        gf = gsort[f]
        of = lists[0, f]
        for j in range(n):
            r = gf[j]
            of[k] = r
            k += inbag[r] > 0

    cap = 2 * u + 1
    feat = np.full(cap, -1, np.int32)
    thr = np.zeros(cap)
    cmask = np.zeros(cap, np.uint64)
    left = np.full(cap, -1, np.int32)
    right = np.full(cap, -1, np.int32)
    value = np.zeros((cap, R))
    nstart = np.zeros(cap, np.int64)
    nend = np.zeros(cap, np.int64)
    ndepth = np.zeros(cap, np.int64)
    nend[0] = u
    n_nodes = 1

    max_l = 1
    for j in range(p):
        if is_cat[j] and n_levels[j] > max_l:
            max_l = n_levels[j]
    perm = np.empty(p, np.int64)
    cand = np.empty(mtry, np.int64)
    rbuf = np.empty(u + 1, np.int32)
    goes = np.zeros(n, np.bool_)
    cls_tot = np.zeros(R)
    cls_l = np.zeros(R)
    cls_r = np.zeros(R)
    cat_cnt = np.zeros(max_l)
    cat_sum = np.zeros(max_l)
    cat_cls = np.zeros((max_l, R))
    key = np.empty(max_l)
    present = np.empty(max_l, np.int64)

    nid = 0
    while nid < n_nodes:
        s = nstart[nid]
        e = nend[nid]
        order = lists[ndepth[nid] & 1]
        base = order[0]
        m = 0.0
        if prob:
            for c in range(R):
                cls_tot[c] = 0.0
            for k in range(s, e):
                r = base[k]
                cls_tot[ycls[r]] += w[r]
                m += w[r]
            pure = False
            parent = 0.0
            for c in range(R):
                value[nid, c] = cls_tot[c] / m
                parent += cls_tot[c] * cls_tot[c]
                if cls_tot[c] == m:
                    pure = True
            parent /= m
            tol = 1e-12 * m
        else:
            tot = 0.0
            sq = 0.0
            ymin = np.inf
            ymax = -np.inf
            for k in range(s, e):
                r = base[k]
                v = y[r]
                tot += w[r] * v
                sq += w[r] * v * v
                m += w[r]
                if v < ymin:
                    ymin = v
                if v > ymax:
                    ymax = v
            value[nid, 0] = tot / m
            pure = ymin == ymax
            parent = tot * tot / m
            tol = 1e-12 * sq
        if pure or e - s < 2 or m <= min_node_size or (max_depth > 0 and ndepth[nid] >= max_depth):
            nid += 1
            continue

        for k in range(p):
            perm[k] = k
        for k in range(mtry):
            r = k + _randbelow(state, p - k)
            t = perm[k]
            perm[k] = perm[r]
            perm[r] = t
            cand[k] = perm[k]
        cand.sort()

        best = -np.inf
        best_f = -1
        best_thr = 0.0
        best_mask = np.uint64(0)
        for ci in range(mtry):
            f = cand[ci]
            if is_cat[f]:
                score, msk = _best_categorical(
                    Xt, f, n_levels[f], order[f], s, e, m, y, w, ycls, prob, R,
                    cat_cnt, cat_sum, cat_cls, cls_l, cls_tot, key, present,
                )
                if score > best:
                    best = score
                    best_f = f
                    best_mask = msk
            else:
                score, t = _best_numeric(
                    Xt, f, order[f], s, e, m, y, w, ycls, prob, R, cls_tot, cls_l, cls_r
                )
                if score > best:
                    best = score
                    best_f = f
                    best_thr = t
        if best_f < 0 or best <= parent + tol:
            nid += 1
            continue

        xb = Xt[best_f]
        nl = 0
        for k in range(s, e):
            r = base[k]
            x = xb[r]
            if is_cat[best_f]:
                g = ((best_mask >> np.uint64(int(x))) & _ONE) == _ONE
            else:
                g = x <= best_thr
            goes[r] = g
            if g:
                nl += 1
        # children that can never split only need the base list partitioned
        depth_next = ndepth[nid] + 1
        final = max_depth > 0 and depth_next >= max_depth
        n_part = 1 if final else p
        nxt = lists[depth_next & 1]
        for f in range(n_part):
            of = order[f]
            dst = nxt[f]
            # stable and branch-free: left rows go straight to dst, right
            # rows via rbuf (a stray write lands at s + nl before it is filled)
            a = s
            b = 0
            for k in range(s, e):
                r = of[k]
                g = goes[r]
                dst[a] = r
                rbuf[b] = r
                a += g
                b += 1 - g
            for k in range(b):
                dst[s + nl + k] = rbuf[k]

        feat[nid] = best_f
        if is_cat[best_f]:
            cmask[nid] = best_mask
        else:
            thr[nid] = best_thr
        lc = n_nodes
        rc = n_nodes + 1
        left[nid] = lc
        right[nid] = rc
        nstart[lc] = s
        nend[lc] = s + nl
        nstart[rc] = s + nl
        nend[rc] = e
        ndepth[lc] = depth_next
        ndepth[rc] = depth_next
        n_nodes += 2
        nid += 1

    k = n_nodes
    return (
        feat[:k].copy(), thr[:k].copy(), cmask[:k].copy(),
        left[:k].copy(), right[:k].copy(), value[:k].copy(), inbag,
    )


_BLOCK = 256


@njit(cache=True, nogil=True)
def _leaf(X, i, is_cat, base, feat, thr, cmask, left, right):
    node = 0
    while True:
        g = base + node
        f = feat[g]
        if f < 0:
            return g
        x = X[i, f]
        if is_cat[f]:
            if ((cmask[g] >> np.uint64(int(x))) & _ONE) == _ONE:
                node = left[g]
            else:
                node = right[g]
        elif x <= thr[g]:
            node = left[g]
        else:
            node = right[g]


# Rows are processed in blocks, tree by tree inside a block, so each tree
# stays in cache; every row still adds its trees in index order.

@njit(cache=True, parallel=True)
def predict_sum(X, is_cat, offsets, feat, thr, cmask, left, right, value):
    """Sum of leaf payloads over all trees, per row (trees added in order)."""
    n = X.shape[0]
    T = offsets.shape[0] - 1
    R = value.shape[1]
    out = np.zeros((n, R))
    nb = (n + _BLOCK - 1) // _BLOCK
    for b in prange(nb):
        lo = b * _BLOCK
        hi = min(n, lo + _BLOCK)
        for t in range(T):
            for i in range(lo, hi):
                g = _leaf(X, i, is_cat, offsets[t], feat, thr, cmask, left, right)
                for c in range(R):
                    out[i, c] += value[g, c]
    return out


@njit(cache=True, parallel=True)
def oob_sum(X, is_cat, offsets, feat, thr, cmask, left, right, value, inbag):
    """Per-row payload sums and tree counts over trees whose bootstrap missed the row."""
    n = X.shape[0]
    T = offsets.shape[0] - 1
    R = value.shape[1]
    out = np.zeros((n, R))
    cnt = np.zeros(n, np.int64)
    nb = (n + _BLOCK - 1) // _BLOCK
    for b in prange(nb):
        lo = b * _BLOCK
        hi = min(n, lo + _BLOCK)
        for t in range(T):
            for i in range(lo, hi):
                if inbag[t, i] > 0:
                    continue
                g = _leaf(X, i, is_cat, offsets[t], feat, thr, cmask, left, right)
                for c in range(R):
                    out[i, c] += value[g, c]
                cnt[i] += 1
    return out, cnt


@njit(cache=True, parallel=True)
def train_sums(X, is_cat, offsets, feat, thr, cmask, left, right, value, inbag):
    """predict_sum and oob_sum of the training rows in one traversal."""
    n = X.shape[0]
    T = offsets.shape[0] - 1
    R = value.shape[1]
    full = np.zeros((n, R))
    out = np.zeros((n, R))
    cnt = np.zeros(n, np.int64)
    nb = (n + _BLOCK - 1) // _BLOCK
    for b in prange(nb):
        lo = b * _BLOCK
        hi = min(n, lo + _BLOCK)
        for t in range(T):
            for i in range(lo, hi):
                g = _leaf(X, i, is_cat, offsets[t], feat, thr, cmask, left, right)
                oob = inbag[t, i] == 0
                for c in range(R):
                    full[i, c] += value[g, c]
                    if oob:
                        out[i, c] += value[g, c]
                if oob:
                    cnt[i] += 1
    return full, out, cnt
