"""Numba kernels for exact greedy tree growth on presorted features.

One builder serves every tree in the package. Each sample carries three
statistics ``a``, ``b`` and ``cnt``:

* entropy criterion: ``a`` = weighted class-1 count, ``b`` = weight, leaf value
  is the class-1 proportion ``a / b``;
* newton criterion: ``a`` = gradient, ``b`` = hessian, leaf value is
  ``-a / (b + lam)``. Plain regression is the special case ``a = -y``,
  ``b = 1``, ``lam = 0`` (leaf = mean, gain = SSE reduction).

``cnt`` is the sample multiplicity (bootstrap count, GOSS selection) and is
what ``min_samples_leaf`` counts. Samples with ``cnt == 0`` are ignored.
"""
import numba as nb
import numpy as np

ENTROPY = 0
NEWTON = 1


def presort(X):
    """Per-feature ascending sample order, shape (n_features, n_samples)."""
    return np.ascontiguousarray(np.argsort(X, axis=0, kind="stable").T.astype(np.int32))


@nb.njit(cache=True)
def _binary_entropy(pos, tot):
    if tot <= 0.0:
        return 0.0
    p = pos / tot
    if p <= 0.0 or p >= 1.0:
        return 0.0
    q = 1.0 - p
    return -(p * np.log2(p) + q * np.log2(q))


@nb.njit(cache=True)
def _leaf_value(criterion, A, B, lam):
    if criterion == 0:
        if B <= 0.0:
            return 0.0
        v = A / B
        if v < 0.0:
            v = 0.0
        elif v > 1.0:
            v = 1.0
        return v
    return -A / (B + lam)


@nb.njit(cache=True)
def build_tree(XT, order_full, a, b, cnt, criterion, max_depth, min_samples_leaf,
               max_features, lam, min_gain, seed):
    d, n = XT.shape
    np.random.seed(seed)

    m = 0
    for i in range(n):
        if cnt[i] > 0:
            m += 1
    order = np.empty((d, m), np.int32)
    for f in range(d):
        k = 0
        for p in range(n):
            i = order_full[f, p]
            if cnt[i] > 0:
                order[f, k] = i
                k += 1

    cap = 2 * m + 1
    feature = np.full(cap, -1, np.int32)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, np.int32)
    right = np.full(cap, -1, np.int32)
    value = np.zeros(cap)
    weight = np.zeros(cap)
    count = np.zeros(cap)
    impurity = np.zeros(cap)
    gain = np.zeros(cap)

    st_node = np.empty(cap, np.int64)
    st_start = np.empty(cap, np.int64)
    st_end = np.empty(cap, np.int64)
    st_depth = np.empty(cap, np.int64)
    sp = 0
    st_node[0] = 0
    st_start[0] = 0
    st_end[0] = m
    st_depth[0] = 0
    sp = 1
    n_nodes = 1

    goes_left = np.zeros(n, np.bool_)
    buf = np.empty(max(m, 1), np.int32)
    feats = np.arange(d)
    chosen = np.empty(d, np.int64)

    while sp > 0:
        sp -= 1
        node = st_node[sp]
        start = st_start[sp]
        end = st_end[sp]
        depth = st_depth[sp]

        A = 0.0
        B = 0.0
        C = 0.0
        for p in range(start, end):
            i = order[0, p] if d > 0 else 0
            A += a[i]
            B += b[i]
            C += cnt[i]
        value[node] = _leaf_value(criterion, A, B, lam)
        weight[node] = B
        count[node] = C
        if criterion == 0:
            parent_score = _binary_entropy(A, B)
            impurity[node] = parent_score
        else:
            parent_score = A * A / (B + lam)
            impurity[node] = 0.0

        if d == 0 or end - start < 2:
            continue
        if max_depth >= 0 and depth >= max_depth:
            continue
        if C < 2 * min_samples_leaf:
            continue
        if criterion == 0 and parent_score <= 0.0:
            continue

        if max_features < d:
            for j in range(max_features):
                r = j + np.random.randint(0, d - j)
                t = feats[j]
                feats[j] = feats[r]
                feats[r] = t
            n_chosen = max_features
            for j in range(n_chosen):
                chosen[j] = feats[j]
            chosen[:n_chosen].sort()
        else:
            n_chosen = d
            for j in range(d):
                chosen[j] = j

        best_gain = min_gain
        best_f = -1
        best_thr = 0.0
        for jf in range(n_chosen):
            f = chosen[jf]
            aL = 0.0
            bL = 0.0
            cL = 0.0
            for p in range(start, end - 1):
                i = order[f, p]
                aL += a[i]
                bL += b[i]
                cL += cnt[i]
                x = XT[f, i]
                xn = XT[f, order[f, p + 1]]
                if xn <= x:
                    continue
                if cL < min_samples_leaf:
                    continue
                if C - cL < min_samples_leaf:
                    break
                aR = A - aL
                bR = B - bL
                if criterion == 0:
                    if B <= 0.0:
                        continue
                    g = (parent_score - (bL / B) * _binary_entropy(aL, bL)
                         - (bR / B) * _binary_entropy(aR, bR))
                else:
                    g = aL * aL / (bL + lam) + aR * aR / (bR + lam) - parent_score
                if g > best_gain:
                    best_gain = g
                    best_f = f
                    thr = x + (xn - x) * 0.5
                    if thr >= xn:
                        thr = x
                    best_thr = thr

        if best_f < 0:
            continue

        n_left = 0
        for p in range(start, end):
            i = order[best_f, p]
            gl = XT[best_f, i] <= best_thr
            goes_left[i] = gl
            if gl:
                n_left += 1
        for f in range(d):
            wl = start
            wr = 0
            for p in range(start, end):
                i = order[f, p]
                if goes_left[i]:
                    order[f, wl] = i
                    wl += 1
                else:
                    buf[wr] = i
                    wr += 1
            for q in range(wr):
                order[f, wl + q] = buf[q]

        lnode = n_nodes
        rnode = n_nodes + 1
        n_nodes += 2
        feature[node] = best_f
        threshold[node] = best_thr
        left[node] = lnode
        right[node] = rnode
        gain[node] = best_gain

        st_node[sp] = rnode
        st_start[sp] = start + n_left
        st_end[sp] = end
        st_depth[sp] = depth + 1
        sp += 1
        st_node[sp] = lnode
        st_start[sp] = start
        st_end[sp] = start + n_left
        st_depth[sp] = depth + 1
        sp += 1

    return (feature[:n_nodes].copy(), threshold[:n_nodes].copy(), left[:n_nodes].copy(),
            right[:n_nodes].copy(), value[:n_nodes].copy(), weight[:n_nodes].copy(),
            count[:n_nodes].copy(), impurity[:n_nodes].copy(), gain[:n_nodes].copy())


@nb.njit(cache=True)
def predict_tree(X, feature, threshold, left, right, value):
    n = X.shape[0]
    out = np.empty(n)
    for r in range(n):
        node = 0
        while feature[node] >= 0:
            if X[r, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[r] = value[node]
    return out
