# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels: WCA pair search and CV-grid segment walking.

The arithmetic mirrors ``_pykernels`` operation for operation so both
backends classify every point identically.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport floor, fabs
from libcpp.vector cimport vector

cnp.import_array()

cdef enum:
    MODE_DIRECT = 0
    MODE_SPAN = 1
    MODE_FRAMED = 2


cdef struct Grid:
    double origin[3]
    double width[3]
    long n[3]
    int mode[3]
    double box[3]
    double center[3]


cdef struct Hit:
    long j
    double d0, d1, d2, r2

cdef struct Event:
    double t
    int axis
    int dir


cdef inline double min_image_1d(double d, double L) noexcept nogil:
    # floor(d/L + 0.5) is exactly 0 for |d| < L/4
    if fabs(d) < 0.25 * L:
        return d
    return d - L * floor(d / L + 0.5)


cdef int load_grid(Grid* g, origin, width, n, mode, box) except -1:
    cdef int a
    for a in range(3):
        g.origin[a] = origin[a]
        g.width[a] = width[a]
        g.n[a] = n[a]
        g.mode[a] = mode[a]
        g.box[a] = box[a]
        g.center[a] = g.origin[a] + g.n[a] * g.width[a] * 0.5
    return 0


cdef inline double frame_coord(const Grid* g, int a, double x) nogil:
    if g.mode[a] == MODE_FRAMED:
        return g.center[a] + min_image_1d(x - g.center[a], g.box[a])
    return x


cdef inline long cell_coord(const Grid* g, int a, double x) nogil:
    """Unbounded (DIRECT/FRAMED) or clamped (SPAN) integer cell coordinate."""
    cdef long k
    if g.mode[a] == MODE_SPAN:
        k = <long>floor(x / g.width[a])
        if k >= g.n[a]:
            k = g.n[a] - 1
        elif k < 0:
            k = 0
        return k
    return <long>floor((frame_coord(g, a, x) - g.origin[a]) / g.width[a])


cdef inline long flat_index(const Grid* g, long* K) nogil:
    cdef long c[3]
    cdef int a
    for a in range(3):
        if g.mode[a] == MODE_SPAN:
            c[a] = K[a] % g.n[a]
            if c[a] < 0:
                c[a] += g.n[a]
        else:
            if K[a] < 0 or K[a] >= g.n[a]:
                return -1
            c[a] = K[a]
    return (c[0] * g.n[1] + c[1]) * g.n[2] + c[2]


cdef void walk(const Grid* g, double* x0, double* d, double* x1, long* shift,
               long* K0, vector[Event]& ev) noexcept nogil:
    """Collect plane-crossing events for the segment x0 -> x0 + d.

    ``x1`` is the stored (wrapped) end point and ``shift`` the number of box
    lengths separating it from the continuous end on SPAN axes.  End cells
    come from the same classification as membership, so crossing counts are
    exact cell differences.
    """
    cdef int a, k, m
    cdef long Ks, Ke, b, step
    cdef double xs, xe, xf1, plane, t
    cdef Event e
    ev.clear()
    for a in range(3):
        if g.mode[a] == MODE_SPAN:
            xs = x0[a]
            Ks = cell_coord(g, a, x0[a])
            Ke = cell_coord(g, a, x1[a]) + shift[a] * g.n[a]
        elif g.mode[a] == MODE_FRAMED:
            xs = frame_coord(g, a, x0[a])
            Ks = <long>floor((xs - g.origin[a]) / g.width[a])
            xe = xs + d[a]
            xf1 = frame_coord(g, a, x1[a])
            if fabs(xe - xf1) < 0.5 * g.box[a]:
                Ke = <long>floor((xf1 - g.origin[a]) / g.width[a])
            else:
                Ke = <long>floor((xe - g.origin[a]) / g.width[a])
        else:
            xs = x0[a]
            Ks = <long>floor((x0[a] - g.origin[a]) / g.width[a])
            Ke = <long>floor((x1[a] - g.origin[a]) / g.width[a])
        K0[a] = Ks
        if Ke == Ks:
            continue
        step = 1 if Ke > Ks else -1
        b = Ks
        while b != Ke:
            if step > 0:
                plane = g.origin[a] + (b + 1) * g.width[a]
            else:
                plane = g.origin[a] + b * g.width[a]
            if d[a] != 0.0:
                t = (plane - xs) / d[a]
            else:
                t = 0.0
            if t < 0.0:
                t = 0.0
            elif t > 1.0:
                t = 1.0
            e.t = t
            e.axis = a
            e.dir = <int>step
            ev.push_back(e)
            b += step
    # insertion sort by (t, axis); per-axis order is already monotone
    cdef Event tmp
    cdef int n = ev.size()
    for k in range(1, n):
        tmp = ev[k]
        m = k - 1
        while m >= 0 and (ev[m].t > tmp.t or (ev[m].t == tmp.t and ev[m].axis > tmp.axis)):
            ev[m + 1] = ev[m]
            m -= 1
        ev[m + 1] = tmp


def point_crossings(const double[:, ::1] x0, const double[:, ::1] x1, const double[:, ::1] disp,
                    const long[:, ::1] shift, origin, width, n, mode, box):
    """Plane crossings of molecule displacements over one step.

    Returns arrays ``(mol, axis, dir, cell_exit, cell_enter, s)``; a cell index
    of -1 means the exit or entry side lies outside the grid.
    """
    cdef Grid g
    load_grid(&g, origin, width, n, mode, box)
    cdef Py_ssize_t N = x0.shape[0], i
    cdef vector[Event] ev
    cdef vector[long] o_mol, o_exit, o_enter
    cdef vector[int] o_axis, o_dir
    cdef vector[double] o_s
    cdef long K[3]
    cdef long sh[3]
    cdef double p0[3]
    cdef double dd[3]
    cdef double p1[3]
    cdef long ce, cn
    cdef int a, k
    with nogil:
        for i in range(N):
            for a in range(3):
                p0[a] = x0[i, a]
                dd[a] = disp[i, a]
                p1[a] = x1[i, a]
                sh[a] = shift[i, a]
            walk(&g, p0, dd, p1, sh, K, ev)
            for k in range(<int>ev.size()):
                ce = flat_index(&g, K)
                K[ev[k].axis] += ev[k].dir
                cn = flat_index(&g, K)
                o_mol.push_back(i)
                o_axis.push_back(ev[k].axis)
                o_dir.push_back(ev[k].dir)
                o_exit.push_back(ce)
                o_enter.push_back(cn)
                o_s.push_back(ev[k].t)
    return (_arr_l(o_mol), _arr_i(o_axis), _arr_i(o_dir), _arr_l(o_exit),
            _arr_l(o_enter), _arr_d(o_s))


def pair_traverse(const double[:, ::1] ri, const double[:, ::1] rj, const double[:, ::1] rij,
                  origin, width, n, mode, box, bint want_visits=True):
    """Walk every pair segment r_i -> r_i - r_ij through the grid.

    Returns ``(visits, planes)`` where ``visits = (pair, cell, frac)`` for the
    in-grid cells each segment passes through and
    ``planes = (pair, axis, dir, cell_exit, cell_enter)``.
    """
    cdef Grid g
    load_grid(&g, origin, width, n, mode, box)
    cdef Py_ssize_t P = ri.shape[0], p
    cdef vector[Event] ev
    cdef vector[long] v_pair, v_cell, c_pair, c_exit, c_enter
    cdef vector[double] v_frac
    cdef vector[int] c_axis, c_dir
    cdef long K[3]
    cdef long sh[3]
    cdef double p0[3]
    cdef double dd[3]
    cdef double p1[3]
    cdef double tprev, L
    cdef long ce, cn
    cdef int a, k
    with nogil:
        for p in range(P):
            for a in range(3):
                p0[a] = ri[p, a]
                dd[a] = -rij[p, a]
                p1[a] = rj[p, a]
                if g.mode[a] == MODE_SPAN:
                    L = g.box[a]
                    sh[a] = <long>floor((p0[a] + dd[a] - p1[a]) / L + 0.5)
                else:
                    sh[a] = 0
            walk(&g, p0, dd, p1, sh, K, ev)
            tprev = 0.0
            for k in range(<int>ev.size()):
                ce = flat_index(&g, K)
                if want_visits and ce >= 0:
                    v_pair.push_back(p)
                    v_cell.push_back(ce)
                    v_frac.push_back(ev[k].t - tprev)
                tprev = ev[k].t
                K[ev[k].axis] += ev[k].dir
                cn = flat_index(&g, K)
                c_pair.push_back(p)
                c_axis.push_back(ev[k].axis)
                c_dir.push_back(ev[k].dir)
                c_exit.push_back(ce)
                c_enter.push_back(cn)
            if want_visits:
                ce = flat_index(&g, K)
                if ce >= 0:
                    v_pair.push_back(p)
                    v_cell.push_back(ce)
                    v_frac.push_back(1.0 - tprev)
    visits = (_arr_l(v_pair), _arr_l(v_cell), _arr_d(v_frac))
    planes = (_arr_l(c_pair), _arr_i(c_axis), _arr_i(c_dir), _arr_l(c_exit),
              _arr_l(c_enter))
    return visits, planes


def wca_pairs(const double[:, ::1] pos, const double[::1] box, periodic, double rc):
    """All WCA pairs with |r_ij| <= rc via a linked-cell search.

    Returns ``(i, j, rij, fij, phi)`` in canonical order (i ascending, then
    j ascending, i < j).  Raises ``ValueError`` on coincident atoms.
    """
    cdef Py_ssize_t N = pos.shape[0]
    cdef int per[3]
    cdef long nc[3]
    cdef double lo[3]
    cdef double cw[3]
    cdef double L[3]
    cdef int a
    cdef double hi, ext
    for a in range(3):
        per[a] = 1 if periodic[a] else 0
        L[a] = box[a]
    pos_np = np.asarray(pos)
    for a in range(3):
        if per[a]:
            lo[a] = 0.0
            nc[a] = max(1, <long>floor(L[a] / rc))
            cw[a] = L[a] / nc[a]
        else:
            if N > 0:
                lo[a] = float(pos_np[:, a].min())
                hi = float(pos_np[:, a].max())
            else:
                lo[a] = 0.0
                hi = 0.0
            ext = hi - lo[a]
            nc[a] = max(1, <long>floor(ext / rc))
            cw[a] = ext / nc[a] if ext > 0 else 1.0
    cdef long ncell = nc[0] * nc[1] * nc[2]
    cdef cnp.ndarray[long, ndim=1] start_np = np.zeros(ncell + 1, dtype=np.int_)
    cdef cnp.ndarray[long, ndim=1] order_np = np.empty(N, dtype=np.int_)
    cdef cnp.ndarray[long, ndim=1] cell_np = np.empty(N, dtype=np.int_)
    cdef cnp.ndarray[double, ndim=2] spos_np = np.empty((N, 3), dtype=np.float64)
    cdef long[::1] start = start_np
    cdef long[::1] order = order_np
    cdef long[::1] cellof = cell_np
    cdef double[:, ::1] spos = spos_np
    cdef Py_ssize_t i, j, s
    cdef long c[3]
    cdef long cc, q, nb, cnt
    cdef int dx, dy, dz
    for i in range(N):
        for a in range(3):
            c[a] = <long>floor((pos[i, a] - lo[a]) / cw[a])
            if c[a] >= nc[a]:
                c[a] = nc[a] - 1
            elif c[a] < 0:
                c[a] = 0
        cc = (c[0] * nc[1] + c[1]) * nc[2] + c[2]
        cellof[i] = cc
        start[cc + 1] += 1
    for cc in range(ncell):
        start[cc + 1] += start[cc]
    # stable counting sort: atoms of a cell are contiguous and ascending
    cdef cnp.ndarray[long, ndim=1] fill_np = start_np[:ncell].copy()
    cdef long[::1] fill = fill_np
    for i in range(N):
        s = fill[cellof[i]]
        fill[cellof[i]] += 1
        order[s] = i
        for a in range(3):
            spos[s, a] = pos[i, a]

    cdef vector[long] o_i, o_j
    cdef vector[double] o_r, o_f, o_phi
    cdef vector[Hit] hits
    cdef Hit h
    cdef double d[3]
    cdef double r2, inv2, inv6, fm, rc2 = rc * rc
    cdef long ci[3]
    cdef long nn[3]
    cdef int bad = 0
    cdef long k, m, tmp
    # unique neighbour cells of every cell, computed once
    cdef cnp.ndarray[long, ndim=2] nbr_np = np.empty((ncell, 27), dtype=np.int_)
    cdef cnp.ndarray[long, ndim=1] nnb_np = np.zeros(ncell, dtype=np.int_)
    cdef long[:, ::1] nbr = nbr_np
    cdef long[::1] nnb = nnb_np
    cdef int small = nc[0] < 3 or nc[1] < 3 or nc[2] < 3
    with nogil:
        for cc in range(ncell):
            ci[2] = cc % nc[2]
            ci[1] = (cc // nc[2]) % nc[1]
            ci[0] = cc // (nc[1] * nc[2])
            cnt = 0
            for dx in range(-1, 2):
                for dy in range(-1, 2):
                    for dz in range(-1, 2):
                        nn[0] = ci[0] + dx
                        nn[1] = ci[1] + dy
                        nn[2] = ci[2] + dz
                        q = 0
                        for a in range(3):
                            if nn[a] < 0 or nn[a] >= nc[a]:
                                if per[a]:
                                    nn[a] = (nn[a] + nc[a]) % nc[a]
                                else:
                                    q = 1
                        if q:
                            continue
                        nb = (nn[0] * nc[1] + nn[1]) * nc[2] + nn[2]
                        q = 0
                        # stencil cells can repeat only when an axis has < 3 cells
                        for k in range(cnt if small else 0):
                            if nbr[cc, k] == nb:
                                q = 1
                                break
                        if not q:
                            nbr[cc, cnt] = nb
                            cnt += 1
            nnb[cc] = cnt
        for i in range(N):
            cc = cellof[i]
            hits.clear()
            for k in range(nnb[cc]):
                nb = nbr[cc, k]
                for s in range(start[nb], start[nb + 1]):
                    j = order[s]
                    if j > i:
                        for a in range(3):
                            d[a] = pos[i, a] - spos[s, a]
                            if per[a]:
                                d[a] = min_image_1d(d[a], L[a])
                        r2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2]
                        if r2 <= rc2:
                            h.j = j
                            h.d0 = d[0]
                            h.d1 = d[1]
                            h.d2 = d[2]
                            h.r2 = r2
                            hits.push_back(h)
            # ascending j
            for k in range(1, <long>hits.size()):
                h = hits[k]
                m = k - 1
                while m >= 0 and hits[m].j > h.j:
                    hits[m + 1] = hits[m]
                    m -= 1
                hits[m + 1] = h
            for k in range(<long>hits.size()):
                h = hits[k]
                if h.r2 == 0.0:
                    bad = 1
                    continue
                inv2 = 1.0 / h.r2
                inv6 = inv2 * inv2 * inv2
                fm = 24.0 * inv2 * inv6 * (2.0 * inv6 - 1.0)
                o_i.push_back(i)
                o_j.push_back(h.j)
                o_r.push_back(h.d0)
                o_r.push_back(h.d1)
                o_r.push_back(h.d2)
                o_f.push_back(fm * h.d0)
                o_f.push_back(fm * h.d1)
                o_f.push_back(fm * h.d2)
                o_phi.push_back(4.0 * inv6 * (inv6 - 1.0) + 1.0)
    if bad:
        raise ValueError("overlapping atoms: zero pair separation")
    P = o_i.size()
    return (_arr_l(o_i), _arr_l(o_j), _arr_d(o_r).reshape(P, 3),
            _arr_d(o_f).reshape(P, 3), _arr_d(o_phi))


def wca_filter(const double[:, ::1] pos, const double[::1] box, periodic, double rc,
               const cnp.int64_t[::1] ci, const cnp.int64_t[::1] cj):
    """WCA terms for candidate pairs ``(ci, cj)``, given in canonical order, within ``rc``."""
    cdef Py_ssize_t P = ci.shape[0], k, i, j
    cdef int per[3]
    cdef double L[3]
    cdef double d[3]
    cdef double r2, inv2, inv6, fm, rc2 = rc * rc
    cdef int a, bad = 0
    if cj.shape[0] != P:
        raise ValueError("candidate arrays differ in length")
    for a in range(3):
        per[a] = 1 if periodic[a] else 0
        L[a] = box[a]
    cdef vector[long] o_i, o_j
    cdef vector[double] o_r, o_f, o_phi
    with nogil:
        for k in range(P):
            i = ci[k]
            j = cj[k]
            for a in range(3):
                d[a] = pos[i, a] - pos[j, a]
                if per[a]:
                    d[a] = min_image_1d(d[a], L[a])
            r2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2]
            if r2 > rc2:
                continue
            if r2 == 0.0:
                bad = 1
                continue
            inv2 = 1.0 / r2
            inv6 = inv2 * inv2 * inv2
            fm = 24.0 * inv2 * inv6 * (2.0 * inv6 - 1.0)
            o_i.push_back(i)
            o_j.push_back(j)
            for a in range(3):
                o_r.push_back(d[a])
                o_f.push_back(fm * d[a])
            o_phi.push_back(4.0 * inv6 * (inv6 - 1.0) + 1.0)
    if bad:
        raise ValueError("overlapping atoms: zero pair separation")
    P = o_i.size()
    return (_arr_l(o_i), _arr_l(o_j), _arr_d(o_r).reshape(P, 3),
            _arr_d(o_f).reshape(P, 3), _arr_d(o_phi))


cdef _arr_l(vector[long]& v):
    cdef Py_ssize_t k, n = v.size()
    out = np.empty(n, dtype=np.int64)
    cdef cnp.int64_t[::1] o = out
    for k in range(n):
        o[k] = v[k]
    return out


cdef _arr_i(vector[int]& v):
    cdef Py_ssize_t k, n = v.size()
    out = np.empty(n, dtype=np.int64)
    cdef cnp.int64_t[::1] o = out
    for k in range(n):
        o[k] = v[k]
    return out


cdef _arr_d(vector[double]& v):
    cdef Py_ssize_t k, n = v.size()
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    for k in range(n):
        o[k] = v[k]
    return out
