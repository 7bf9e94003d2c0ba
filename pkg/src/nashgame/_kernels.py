"""Numba kernels for the payoff-cloud builder and verifier.

Clouds of one time slice are stored CSR style: node ``j`` owns
``pts[offs[j]:offs[j+1]]`` (payoff pairs) and the matching residuals.
"""

from __future__ import annotations

import numpy as np
from numba import njit

_OFF = 1 << 30
_BIG = 1 << 31


@njit(cache=True)
def _distinct_corners(corner_idx, corner_w, j, buf):
    nw, C = corner_idx.shape[1], corner_idx.shape[2]
    nd = 0
    for w in range(nw):
        for c in range(C):
            if corner_w[j, w, c] > 0.0:
                idx = corner_idx[j, w, c]
                found = False
                for a in range(nd):
                    if buf[a] == idx:
                        found = True
                        break
                if not found:
                    buf[nd] = idx
                    nd += 1
    return nd


@njit(cache=True)
def candidate_bound(offs_next, corner_idx, corner_w, seed_offs):
    """Upper bound on the candidate count of every node."""
    N, nw, C = corner_idx.shape
    out = np.zeros(N, dtype=np.int64)
    buf = np.empty(nw * C, dtype=np.int64)
    for j in range(N):
        nd = _distinct_corners(corner_idx, corner_w, j, buf)
        s = seed_offs[j + 1] - seed_offs[j]
        for a in range(nd):
            s += offs_next[buf[a] + 1] - offs_next[buf[a]]
        out[j] = s
    return out


@njit(cache=True)
def build_slice(offs_next, pts_next, res_next, corner_idx, corner_w, seed_offs, seed_pts,
                om1, om2, tol_n1, q, thr, out_start, out_pts, out_res, out_cnt):
    """Backward step of the payoff-cloud recursion for every node of one slice.

    Candidates are the successor points near a node (and optional seed
    points) that satisfy the security-level bound, one representative per
    payoff-lattice cell of spacing ``q`` (the one with the smallest inherited
    residual).  A candidate ``J`` gets the transport residual

        min_w sum_c lambda_c(w) * min_{zeta in cloud(c)} (r_zeta + |zeta - J|_1)

    over the corners ``c`` of the cell containing each Euler foot, and is kept
    when that is at most ``thr``.  Kept points are thinned greedily by
    increasing residual so that no two lie closer than ``q / 2``.
    """
    N, nw, C = corner_idx.shape
    buf = np.empty(nw * C, dtype=np.int64)
    half = 0.5 * q
    for j in range(N):
        nd = _distinct_corners(corner_idx, corner_w, j, buf)
        total = seed_offs[j + 1] - seed_offs[j]
        for a in range(nd):
            total += offs_next[buf[a] + 1] - offs_next[buf[a]]
        keys = np.empty(total, dtype=np.int64)
        cv = np.empty((total, 2))
        cr = np.empty(total)
        nk = 0
        lo1 = om1[j] - tol_n1
        lo2 = om2[j] - tol_n1
        for a in range(nd + 1):
            if a < nd:
                p0, p1 = offs_next[buf[a]], offs_next[buf[a] + 1]
            else:
                p0, p1 = seed_offs[j], seed_offs[j + 1]
            for p in range(p0, p1):
                if a < nd:
                    v1, v2, r = pts_next[p, 0], pts_next[p, 1], res_next[p]
                else:
                    v1, v2, r = seed_pts[p, 0], seed_pts[p, 1], 0.0
                if v1 >= lo1 and v2 >= lo2:
                    i1 = np.int64(np.rint(v1 / q))
                    i2 = np.int64(np.rint(v2 / q))
                    keys[nk] = (i1 + _OFF) * _BIG + (i2 + _OFF)
                    cv[nk, 0] = v1
                    cv[nk, 1] = v2
                    cr[nk] = r
                    nk += 1
        if nk == 0:
            out_cnt[j] = 0
            continue
        order = np.argsort(keys[:nk], kind="mergesort")
        reps = np.empty(nk, dtype=np.int64)
        m = 0
        i = 0
        while i < nk:
            best = order[i]
            i2 = i + 1
            while i2 < nk and keys[order[i2]] == keys[order[i]]:
                if cr[order[i2]] < cr[best]:
                    best = order[i2]
                i2 += 1
            reps[m] = best
            m += 1
            i = i2
        J1 = np.empty(m)
        J2 = np.empty(m)
        for i in range(m):
            J1[i] = cv[reps[i], 0]
            J2[i] = cv[reps[i], 1]
        D = np.full((nd, m), np.inf)
        for a in range(nd):
            c = buf[a]
            for p in range(offs_next[c], offs_next[c + 1]):
                z1 = pts_next[p, 0]
                z2 = pts_next[p, 1]
                r = res_next[p]
                for i in range(m):
                    d = r + abs(z1 - J1[i]) + abs(z2 - J2[i])
                    if d < D[a, i]:
                        D[a, i] = d
        best_r = np.full(m, np.inf)
        R = np.empty(m)
        for w in range(nw):
            R[:] = 0.0
            for c in range(C):
                lam = corner_w[j, w, c]
                if lam <= 0.0:
                    continue
                idx = corner_idx[j, w, c]
                a = 0
                while buf[a] != idx:
                    a += 1
                for i in range(m):
                    R[i] += lam * D[a, i]
            for i in range(m):
                if R[i] < best_r[i]:
                    best_r[i] = R[i]
        # greedy thinning, lowest residual first (stable in lattice order)
        rank = np.argsort(best_r, kind="mergesort")
        cnt = 0
        s0 = out_start[j]
        for ii in range(m):
            i = rank[ii]
            if best_r[i] > thr:
                break
            ok = True
            for e in range(cnt):
                if abs(out_pts[s0 + e, 0] - J1[i]) + abs(out_pts[s0 + e, 1] - J2[i]) < half:
                    ok = False
                    break
            if ok:
                out_pts[s0 + cnt, 0] = J1[i]
                out_pts[s0 + cnt, 1] = J2[i]
                out_res[s0 + cnt] = best_r[i]
                cnt += 1
        out_cnt[j] = cnt


@njit(cache=True)
def _cloud_dist(offs, pts, row, J1, J2):
    d = np.inf
    for p in range(offs[row], offs[row + 1]):
        v = abs(pts[p, 0] - J1) + abs(pts[p, 1] - J2)
        if v < d:
            d = v
    return d


@njit(cache=True)
def verify_slice(offs, pts, k, n_nodes, nodes, check, lo, hi, dx, res, strides, times,
                 hull, steps, gammas, radius, stop_below, term_pay, use_term, out):
    """Discrete directional-derivative residual of every point of slice ``k``.

    For each node ``j`` with ``check[j]`` and each point ``J`` of its cloud,
    ``out`` receives

        min over w in hull[j], m in steps, gamma in gammas (plus corner snaps) of
        dist_l1(J, cloud(t_{k+m}, x_j + delta (w + gamma))) / delta,

    with the distance to off-grid clouds interpolated multilinearly from the
    surrounding nodes.  When ``use_term`` is set, steps ending on the horizon
    use the terminal payoffs at the feet instead, ``term_pay[j, w, g]`` (index
    ``G`` for the unperturbed foot).  Feet outside the box are skipped.  The
    search stops early for a point once ``stop_below`` is reached.
    """
    n = nodes.shape[1]
    nw = hull.shape[1]
    G = gammas.shape[0]
    C = 1 << n
    K = times.shape[0] - 1
    base = np.empty(n, dtype=np.int64)
    frac = np.empty(n)
    p = np.empty(n)
    for j in range(n_nodes):
        if not check[j]:
            continue
        row = k * n_nodes + j
        for q in range(offs[row], offs[row + 1]):
            J1 = pts[q, 0]
            J2 = pts[q, 1]
            best = np.inf
            for si in range(steps.shape[0]):
                k2 = k + steps[si]
                if k2 > K:
                    continue
                delta = times[k2] - times[k]
                rbase = k2 * n_nodes
                for w in range(nw):
                    for g in range(G + 1):
                        if g < G:
                            for d in range(n):
                                p[d] = nodes[j, d] + delta * (hull[j, w, d] + gammas[g, d])
                        else:
                            for d in range(n):
                                p[d] = nodes[j, d] + delta * hull[j, w, d]
                        inside = True
                        for d in range(n):
                            if p[d] < lo[d] - 1e-12 or p[d] > hi[d] + 1e-12:
                                inside = False
                        if not inside:
                            continue
                        if use_term and k2 == K:
                            val = (abs(term_pay[j, w, g, 0] - J1) + abs(term_pay[j, w, g, 1] - J2)) / delta
                            if val < best:
                                best = val
                            if best <= stop_below:
                                break
                            continue
                        for d in range(n):
                            f = (p[d] - lo[d]) / dx[d]
                            if f < 0.0:
                                f = 0.0
                            if f > res[d] - 1:
                                f = res[d] - 1.0
                            nr = np.rint(f)
                            if abs(f - nr) < 1e-9:
                                f = nr
                            b = np.int64(np.floor(f))
                            if b > res[d] - 2:
                                b = res[d] - 2
                            base[d] = b
                            frac[d] = f - b
                        if g < G:
                            val = 0.0
                            for c in range(C):
                                lam = 1.0
                                flat = 0
                                for d in range(n):
                                    bit = (c >> (n - 1 - d)) & 1
                                    flat += (base[d] + bit) * strides[d]
                                    lam *= frac[d] if bit else 1.0 - frac[d]
                                if lam > 0.0:
                                    val += lam * _cloud_dist(offs, pts, rbase + flat, J1, J2)
                            val /= delta
                            if val < best:
                                best = val
                        else:
                            # snap the foot to cell corners within the gamma ball
                            for c in range(C):
                                flat = 0
                                dist2 = 0.0
                                for d in range(n):
                                    bit = (c >> (n - 1 - d)) & 1
                                    flat += (base[d] + bit) * strides[d]
                                    off = (bit - frac[d]) * dx[d]
                                    dist2 += off * off
                                if np.sqrt(dist2) <= delta * radius + 1e-12:
                                    val = _cloud_dist(offs, pts, rbase + flat, J1, J2) / delta
                                    if val < best:
                                        best = val
                        if best <= stop_below:
                            break
                    if best <= stop_below:
                        break
                if best <= stop_below:
                    break
            out[q] = best
