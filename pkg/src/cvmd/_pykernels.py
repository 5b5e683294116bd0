"""Pure-Python/numpy implementation of the hot kernels.

Same signatures and the same floating-point operation order as the
compiled module, so the two backends produce identical event lists.
Rows that generate no events are handled vectorised; the rest fall back
to a per-row Python walk.
"""
from __future__ import annotations

import math

import numpy as np

MODE_DIRECT = 0
MODE_SPAN = 1
MODE_FRAMED = 2


def _min_image_1d(d, L):
    return d - L * np.floor(d / L + 0.5)


class _Grid:
    __slots__ = ("origin", "width", "n", "mode", "box", "center")

    def __init__(self, origin, width, n, mode, box):
        self.origin = [float(v) for v in origin]
        self.width = [float(v) for v in width]
        self.n = [int(v) for v in n]
        self.mode = [int(v) for v in mode]
        self.box = [float(v) for v in box]
        self.center = [self.origin[a] + self.n[a] * self.width[a] * 0.5 for a in range(3)]


def _frame(g, a, x):
    if g.mode[a] == MODE_FRAMED:
        c = g.center[a]
        return c + _min_image_1d(x - c, g.box[a])
    return x


def _start_end_cells(g, a, x0, d, x1, shift):
    """Vectorised start/end integer cell coordinates and start coordinate."""
    if g.mode[a] == MODE_SPAN:
        w, n = g.width[a], g.n[a]
        Ks = np.clip(np.floor(x0 / w).astype(np.int64), 0, n - 1)
        Ke = np.clip(np.floor(x1 / w).astype(np.int64), 0, n - 1) + shift * n
        xs = x0
    elif g.mode[a] == MODE_FRAMED:
        o, w = g.origin[a], g.width[a]
        xs = _frame(g, a, x0)
        Ks = np.floor((xs - o) / w).astype(np.int64)
        xe = xs + d
        xf1 = _frame(g, a, x1)
        near = np.abs(xe - xf1) < 0.5 * g.box[a]
        Ke = np.where(near, np.floor((xf1 - o) / w), np.floor((xe - o) / w)).astype(np.int64)
    else:
        o, w = g.origin[a], g.width[a]
        xs = x0
        Ks = np.floor((x0 - o) / w).astype(np.int64)
        Ke = np.floor((x1 - o) / w).astype(np.int64)
    return Ks, Ke, xs


def _flat(g, K):
    c = [0, 0, 0]
    for a in range(3):
        if g.mode[a] == MODE_SPAN:
            c[a] = K[a] % g.n[a]
        else:
            if K[a] < 0 or K[a] >= g.n[a]:
                return -1
            c[a] = K[a]
    return (c[0] * g.n[1] + c[1]) * g.n[2] + c[2]


def _flat_vec(g, K):
    """Flat cell index for an (M, 3) integer array, -1 where outside."""
    c = K.copy()
    inside = np.ones(len(K), dtype=bool)
    for a in range(3):
        if g.mode[a] == MODE_SPAN:
            c[:, a] = np.mod(c[:, a], g.n[a])
        else:
            inside &= (c[:, a] >= 0) & (c[:, a] < g.n[a])
    flat = (c[:, 0] * g.n[1] + c[:, 1]) * g.n[2] + c[:, 2]
    return np.where(inside, flat, -1)


def _events(g, xs, d, Ks, Ke):
    """Ordered (t, axis, dir) plane events for one row."""
    ev = []
    for a in range(3):
        ks, ke = int(Ks[a]), int(Ke[a])
        if ks == ke:
            continue
        step = 1 if ke > ks else -1
        b = ks
        o, w, da, x = g.origin[a], g.width[a], float(d[a]), float(xs[a])
        while b != ke:
            plane = o + (b + 1) * w if step > 0 else o + b * w
            t = (plane - x) / da if da != 0.0 else 0.0
            t = min(max(t, 0.0), 1.0)
            ev.append((t, a, step))
            b += step
    ev.sort(key=lambda e: (e[0], e[1]))
    return ev


def _prepare(g, x0, d, x1, shift):
    N = len(x0)
    Ks = np.empty((N, 3), dtype=np.int64)
    Ke = np.empty((N, 3), dtype=np.int64)
    xs = np.empty((N, 3))
    for a in range(3):
        Ks[:, a], Ke[:, a], xs[:, a] = _start_end_cells(g, a, x0[:, a], d[:, a], x1[:, a], shift[:, a])
    return Ks, Ke, xs


def point_crossings(x0, x1, disp, shift, origin, width, n, mode, box):
    g = _Grid(origin, width, n, mode, box)
    x0 = np.asarray(x0, dtype=float)
    x1 = np.asarray(x1, dtype=float)
    disp = np.asarray(disp, dtype=float)
    shift = np.asarray(shift, dtype=np.int64)
    Ks, Ke, xs = _prepare(g, x0, disp, x1, shift)
    rows = np.nonzero(np.any(Ks != Ke, axis=1))[0]
    mol, axis, dirs, cex, cen, s = [], [], [], [], [], []
    for i in rows:
        K = [int(v) for v in Ks[i]]
        for t, a, step in _events(g, xs[i], disp[i], Ks[i], Ke[i]):
            ce = _flat(g, K)
            K[a] += step
            mol.append(i)
            axis.append(a)
            dirs.append(step)
            cex.append(ce)
            cen.append(_flat(g, K))
            s.append(t)
    return (np.asarray(mol, dtype=np.int64), np.asarray(axis, dtype=np.int64),
            np.asarray(dirs, dtype=np.int64), np.asarray(cex, dtype=np.int64),
            np.asarray(cen, dtype=np.int64), np.asarray(s, dtype=float))


def pair_traverse(ri, rj, rij, origin, width, n, mode, box, want_visits=True):
    g = _Grid(origin, width, n, mode, box)
    ri = np.asarray(ri, dtype=float)
    rj = np.asarray(rj, dtype=float)
    d = -np.asarray(rij, dtype=float)
    P = len(ri)
    shift = np.zeros((P, 3), dtype=np.int64)
    for a in range(3):
        if g.mode[a] == MODE_SPAN:
            L = g.box[a]
            shift[:, a] = np.floor((ri[:, a] + d[:, a] - rj[:, a]) / L + 0.5).astype(np.int64)
    Ks, Ke, xs = _prepare(g, ri, d, rj, shift)
    moving = np.any(Ks != Ke, axis=1)
    rows = np.nonzero(moving)[0]

    # single-cell segments
    still = np.nonzero(~moving)[0]
    c_still = _flat_vec(g, Ks[still])
    keep = c_still >= 0
    vp = [still[keep]]
    vc = [c_still[keep]]
    vf = [np.ones(int(keep.sum()))]

    lp, lc, lf = [], [], []
    cp, ca, cd, cex, cen = [], [], [], [], []
    for p in rows:
        K = [int(v) for v in Ks[p]]
        tprev = 0.0
        for t, a, step in _events(g, xs[p], d[p], Ks[p], Ke[p]):
            ce = _flat(g, K)
            if ce >= 0:
                lp.append(p)
                lc.append(ce)
                lf.append(t - tprev)
            tprev = t
            K[a] += step
            cp.append(p)
            ca.append(a)
            cd.append(step)
            cex.append(ce)
            cen.append(_flat(g, K))
        ce = _flat(g, K)
        if ce >= 0:
            lp.append(p)
            lc.append(ce)
            lf.append(1.0 - tprev)
    planes = (np.asarray(cp, dtype=np.int64), np.asarray(ca, dtype=np.int64),
              np.asarray(cd, dtype=np.int64), np.asarray(cex, dtype=np.int64),
              np.asarray(cen, dtype=np.int64))
    if not want_visits:
        empty = (np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64), np.zeros(0))
        return empty, planes
    vp.append(np.asarray(lp, dtype=np.int64))
    vc.append(np.asarray(lc, dtype=np.int64))
    vf.append(np.asarray(lf, dtype=float))
    vp = np.concatenate(vp)
    order = np.argsort(vp, kind="stable")
    visits = (vp[order], np.concatenate(vc)[order], np.concatenate(vf)[order])
    return visits, planes


def wca_pairs(pos, box, periodic, rc):
    pos = np.ascontiguousarray(pos, dtype=float)
    box = np.asarray(box, dtype=float)
    N = len(pos)
    lo = np.zeros(3)
    nc = np.ones(3, dtype=np.int64)
    cw = np.ones(3)
    for a in range(3):
        if periodic[a]:
            nc[a] = max(1, int(math.floor(box[a] / rc)))
            cw[a] = box[a] / nc[a]
        else:
            if N:
                lo[a] = pos[:, a].min()
                ext = pos[:, a].max() - lo[a]
            else:
                ext = 0.0
            nc[a] = max(1, int(math.floor(ext / rc)))
            cw[a] = ext / nc[a] if ext > 0 else 1.0
    c3 = np.empty((N, 3), dtype=np.int64)
    for a in range(3):
        c3[:, a] = np.clip(np.floor((pos[:, a] - lo[a]) / cw[a]).astype(np.int64), 0, nc[a] - 1)
    cell = (c3[:, 0] * nc[1] + c3[:, 1]) * nc[2] + c3[:, 2]
    ncell = int(np.prod(nc))

    order = np.argsort(cell, kind="stable")
    counts = np.bincount(cell, minlength=ncell)
    maxocc = int(counts.max()) if N else 0
    starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
    slot = np.arange(N) - starts[cell[order]]
    table = np.full((ncell, max(maxocc, 1)), -1, dtype=np.int64)
    table[cell[order], slot] = order

    # unique neighbour cells per cell
    cc = np.stack(np.unravel_index(np.arange(ncell), tuple(nc)), axis=1)
    offs = np.array([(dx, dy, dz) for dx in (-1, 0, 1) for dy in (-1, 0, 1) for dz in (-1, 0, 1)])
    nb = cc[:, None, :] + offs[None, :, :]
    valid = np.ones(nb.shape[:2], dtype=bool)
    for a in range(3):
        if periodic[a]:
            nb[:, :, a] = np.mod(nb[:, :, a], nc[a])
        else:
            valid &= (nb[:, :, a] >= 0) & (nb[:, :, a] < nc[a])
    nbf = np.where(valid, (nb[:, :, 0] * nc[1] + nb[:, :, 1]) * nc[2] + nb[:, :, 2], -1)
    nbf.sort(axis=1)
    dup = np.zeros_like(valid)
    dup[:, 1:] = nbf[:, 1:] == nbf[:, :-1]
    nbf[dup] = -1

    ii_all, jj_all = [], []
    for k in range(nbf.shape[1]):
        src = np.nonzero(nbf[:, k] >= 0)[0]
        if len(src) == 0:
            continue
        A = table[src]
        B = table[nbf[src, k]]
        I = np.broadcast_to(A[:, :, None], (len(src), A.shape[1], B.shape[1])).ravel()
        J = np.broadcast_to(B[:, None, :], (len(src), A.shape[1], B.shape[1])).ravel()
        m = (I >= 0) & (J > I)
        ii_all.append(I[m])
        jj_all.append(J[m])
    if ii_all:
        ii = np.concatenate(ii_all)
        jj = np.concatenate(jj_all)
    else:
        ii = jj = np.zeros(0, dtype=np.int64)
    ii, jj, d, r2 = _within(pos, box, periodic, rc, ii, jj)
    srt = np.lexsort((jj, ii))
    return _wca_eval(ii[srt], jj[srt], d[srt], r2[srt])


def _within(pos, box, periodic, rc, ii, jj):
    d = pos[ii] - pos[jj]
    for a in range(3):
        if periodic[a]:
            d[:, a] = _min_image_1d(d[:, a], box[a])
    r2 = d[:, 0] * d[:, 0] + d[:, 1] * d[:, 1] + d[:, 2] * d[:, 2]
    keep = r2 <= rc * rc
    ii, jj, d, r2 = ii[keep], jj[keep], d[keep], r2[keep]
    if np.any(r2 == 0.0):
        raise ValueError("overlapping atoms: zero pair separation")
    return ii, jj, d, r2


def wca_filter(pos, box, periodic, rc, ci, cj):
    """WCA terms for the candidate pairs ``(ci, cj)`` (canonical order) within ``rc``."""
    pos = np.ascontiguousarray(pos, dtype=float)
    box = np.asarray(box, dtype=float)
    ci = np.asarray(ci, dtype=np.int64)
    cj = np.asarray(cj, dtype=np.int64)
    return _wca_eval(*_within(pos, box, periodic, rc, ci, cj))


def _wca_eval(ii, jj, d, r2):
    inv2 = 1.0 / r2
    inv6 = inv2 * inv2 * inv2
    fm = 24.0 * inv2 * inv6 * (2.0 * inv6 - 1.0)
    phi = 4.0 * inv6 * (inv6 - 1.0) + 1.0
    return (ii.astype(np.int64), jj.astype(np.int64), np.ascontiguousarray(d),
            np.ascontiguousarray(fm[:, None] * d), phi)
