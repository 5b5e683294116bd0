"""Control-volume geometry: membership, face crossings, pair incidences.

Membership uses half-open intervals ``[lo, hi)`` on every axis, so a
tiling grid assigns each point to exactly one cell.  A molecule or pair
segment crossing several planes at the same parameter is processed in
axis order x, y, z.

Faces are numbered ``2*axis + side`` with side 0 for the lower face and
1 for the upper face (``FACES`` gives the names).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._backend import kernels as _K
from ._pykernels import MODE_DIRECT, MODE_FRAMED, MODE_SPAN, _events
from .core import BoxSpec, wrap_position

FACES = ("x-", "x+", "y-", "y+", "z-", "z+")
RC_WCA = 2.0 ** (1.0 / 6.0)


def face_id(axis: int, upper: bool) -> int:
    return 2 * axis + int(upper)


@dataclass(frozen=True)
class ControlVolume:
    """Axis-aligned cuboid given by its centre and half widths."""

    center: np.ndarray
    half_widths: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.center, dtype=float).reshape(3)
        h = np.asarray(self.half_widths, dtype=float).reshape(3)
        if np.any(h <= 0):
            raise ValueError("half widths must be positive")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "half_widths", h)

    @classmethod
    def from_bounds(cls, lo, hi) -> "ControlVolume":
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        return cls(0.5 * (lo + hi), 0.5 * (hi - lo))

    @property
    def lo(self) -> np.ndarray:
        return self.center - self.half_widths

    @property
    def hi(self) -> np.ndarray:
        return self.center + self.half_widths

    @property
    def widths(self) -> np.ndarray:
        return 2.0 * self.half_widths

    @property
    def volume(self) -> float:
        return float(np.prod(self.widths))

    @property
    def face_areas(self) -> np.ndarray:
        w = self.widths
        return np.array([w[1] * w[2], w[0] * w[2], w[0] * w[1]])

    def _grid_args(self):
        return dict(origin=self.lo, width=self.widths, n=(1, 1, 1),
                    mode=(MODE_DIRECT,) * 3, box=(1.0, 1.0, 1.0))


@dataclass(frozen=True)
class FaceCrossing:
    """One molecule crossing of a CV face.

    ``direction_sign`` is +1 for an exit (motion along the outward normal)
    and -1 for an entry.
    """

    face: str
    direction_sign: int
    step_fraction: float
    crossing_point: np.ndarray


@dataclass(frozen=True)
class PairFaceIncidence:
    """Pair-segment incidences on the six faces of one CV.

    ``values[f]`` is the raw selector ``1/2[sgn(r_f - x_j) - sgn(r_f - x_i)]``
    restricted to hits inside the face: minus the direction of travel
    from i to j along the face normal, or 0.
    """

    values: np.ndarray
    theta_ij: int

    @property
    def signed(self) -> np.ndarray:
        """Outward-signed incidences: upper faces as is, lower faces negated."""
        s = np.array([-1, 1, -1, 1, -1, 1])
        return s * self.values

    def as_dict(self) -> dict:
        return {name: int(v) for name, v in zip(FACES, self.values)}


def _cell_coords(x, lo, w):
    return np.floor((np.asarray(x, dtype=float) - lo) / w).astype(np.int64)


def theta(pos, cv: ControlVolume) -> int:
    """1 if ``pos`` lies in the half-open cuboid, else 0."""
    k = _cell_coords(pos, cv.lo, cv.widths)
    return int(np.all(k == 0))


def _walk_single(p0, p1, cv):
    lo, w = cv.lo, cv.widths
    p0 = np.asarray(p0, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    d = p1 - p0
    Ks = _cell_coords(p0, lo, w)
    Ke = _cell_coords(p1, lo, w)
    g = type("G", (), {})()
    g.origin, g.width = list(lo), list(w)
    ev = _events(g, p0, d, Ks, Ke)
    return Ks, ev, d


def face_crossings_point(p_start, p_end_unwrapped, cv: ControlVolume) -> list:
    """Crossings of the straight path ``p_start -> p_end_unwrapped`` with CV faces.

    Returns a list of :class:`FaceCrossing` ordered by step fraction.
    """
    p0 = np.asarray(p_start, dtype=float)
    K, ev, d = _walk_single(p0, p_end_unwrapped, cv)
    K = [int(v) for v in K]
    out = []
    lo, w = cv.lo, cv.widths
    for t, a, step in ev:
        inside_before = K == [0, 0, 0]
        K[a] += step
        inside_after = K == [0, 0, 0]
        if inside_before == inside_after:
            continue
        if inside_before:
            upper = step > 0
            sign = 1
        else:
            upper = step < 0
            sign = -1
        point = p0 + t * d
        point[a] = lo[a] + (w[a] if upper else 0.0)
        out.append(FaceCrossing(FACES[face_id(a, upper)], sign, float(t), point))
    return out


def face_incidence_pair(r_i, r_j_image, cv: ControlVolume) -> PairFaceIncidence:
    """Face incidences of the segment from ``r_i`` to ``r_j_image``."""
    r_i = np.asarray(r_i, dtype=float)
    r_j = np.asarray(r_j_image, dtype=float)
    if np.array_equal(r_i, r_j):
        raise ValueError("degenerate pair: coincident endpoints")
    K, ev, _ = _walk_single(r_i, r_j, cv)
    K = [int(v) for v in K]
    vals = np.zeros(6, dtype=np.int64)
    for _t, a, step in ev:
        if K == [0, 0, 0]:
            vals[face_id(a, step > 0)] = -step
        K[a] += step
        if K == [0, 0, 0]:
            vals[face_id(a, step < 0)] = -step
    th = theta(r_i, cv) - theta(r_j, cv)
    return PairFaceIncidence(vals, th)


def segment_inside_fraction(r_i, r_j_image, cv: ControlVolume) -> float:
    """Fraction of the segment ``r_i -> r_j_image`` inside the cuboid (slab clipping)."""
    r_i = np.asarray(r_i, dtype=float)
    d = np.asarray(r_j_image, dtype=float) - r_i
    if not np.any(d):
        raise ValueError("degenerate segment")
    t0, t1 = 0.0, 1.0
    for a in range(3):
        lo, hi = cv.lo[a], cv.hi[a]
        if d[a] == 0.0:
            if not (lo <= r_i[a] < hi):
                return 0.0
            continue
        ta = (lo - r_i[a]) / d[a]
        tb = (hi - r_i[a]) / d[a]
        if ta > tb:
            ta, tb = tb, ta
        t0 = max(t0, ta)
        t1 = min(t1, tb)
        if t1 <= t0:
            return 0.0
    return float(t1 - t0)


# ---------------------------------------------------------------- grids


@dataclass(frozen=True)
class Crossings:
    """Molecule plane crossings for one step on a grid.

    Each row is a move across one grid plane by molecule ``mol``:
    ``cell_exit`` is left and ``cell_enter`` entered (-1 = outside the grid).
    """

    mol: np.ndarray
    axis: np.ndarray
    dir: np.ndarray
    cell_exit: np.ndarray
    cell_enter: np.ndarray
    s: np.ndarray

    def __len__(self):
        return len(self.mol)


@dataclass(frozen=True)
class PairWalk:
    """Result of walking pair segments through a grid.

    ``visit_*`` give the in-grid cells each pair segment passes through
    with the fraction of its length in each; ``plane_*`` list plane
    crossings of the segment with the cells on either side.
    """

    visit_pair: np.ndarray
    visit_cell: np.ndarray
    visit_frac: np.ndarray
    plane_pair: np.ndarray
    plane_axis: np.ndarray
    plane_dir: np.ndarray
    plane_exit: np.ndarray
    plane_enter: np.ndarray


class CVGrid:
    """A lattice of identical cuboidal control volumes.

    Axes that exactly tile a periodic box direction wrap cell indices
    around the box.  Other periodic axes see coordinates in a
    minimum-image frame about the grid centre, which requires the grid
    to leave at least ``2 r_c`` of the box uncovered.  Non-periodic axes
    use plain coordinates.

    Parameters
    ----------
    box : BoxSpec
    shape : tuple of int
        Cells per axis.
    origin, widths : array_like, optional
        Lower corner and cell widths; default tiles the whole box.
    """

    def __init__(self, box: BoxSpec, shape, origin=None, widths=None, rc: float = RC_WCA):
        self.box = box
        self.shape = tuple(int(v) for v in np.broadcast_to(shape, (3,)))
        if min(self.shape) < 1:
            raise ValueError("grid shape must be positive")
        n = np.array(self.shape)
        L = box.lengths
        self.origin = np.zeros(3) if origin is None else np.asarray(origin, dtype=float).reshape(3).copy()
        self.widths = (L / n) if widths is None else np.asarray(widths, dtype=float).reshape(3).copy()
        if np.any(self.widths <= 0):
            raise ValueError("cell widths must be positive")
        modes = []
        for a in range(3):
            if box.periodic[a]:
                spans = self.origin[a] == 0.0 and np.isclose(n[a] * self.widths[a], L[a], rtol=1e-12, atol=0)
                if spans:
                    self.widths[a] = L[a] / n[a]
                    modes.append(MODE_SPAN)
                else:
                    if n[a] * self.widths[a] + 2 * rc > L[a]:
                        raise ValueError(
                            f"grid on periodic axis {a} must either tile the box or leave 2*r_c uncovered")
                    modes.append(MODE_FRAMED)
            else:
                modes.append(MODE_DIRECT)
        self.modes = tuple(modes)
        self.center = self.origin + n * self.widths * 0.5
        self._args = dict(origin=tuple(self.origin), width=tuple(self.widths), n=self.shape,
                          mode=self.modes, box=tuple(float(v) for v in L))

    # construction helpers
    @classmethod
    def tiling(cls, box: BoxSpec, shape) -> "CVGrid":
        return cls(box, shape)

    @classmethod
    def single(cls, box: BoxSpec, lo, hi) -> "CVGrid":
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        return cls(box, (1, 1, 1), origin=lo, widths=hi - lo)

    @property
    def ncells(self) -> int:
        return int(np.prod(self.shape))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.widths))

    @property
    def face_areas(self) -> np.ndarray:
        w = self.widths
        return np.array([w[1] * w[2], w[0] * w[2], w[0] * w[1]])

    def unravel(self, flat):
        return np.unravel_index(flat, self.shape)

    def ravel(self, ix, iy, iz):
        return (np.asarray(ix) * self.shape[1] + np.asarray(iy)) * self.shape[2] + np.asarray(iz)

    def cell_bounds(self, flat):
        idx = np.array(self.unravel(int(flat)))
        lo = self.origin + idx * self.widths
        return lo, lo + self.widths

    def control_volume(self, flat) -> ControlVolume:
        return ControlVolume.from_bounds(*self.cell_bounds(flat))

    def _frame(self, a, x):
        c = self.center[a]
        L = self.box.lengths[a]
        d = x - c
        return c + (d - L * np.floor(d / L + 0.5))

    def cell_coords(self, pos) -> np.ndarray:
        """Integer cell coordinates (N, 3); out-of-grid coordinates are kept."""
        pos = np.atleast_2d(np.asarray(pos, dtype=float))
        K = np.empty(pos.shape, dtype=np.int64)
        for a in range(3):
            x = pos[:, a]
            if self.modes[a] == MODE_SPAN:
                K[:, a] = np.clip(np.floor(x / self.widths[a]).astype(np.int64), 0, self.shape[a] - 1)
            elif self.modes[a] == MODE_FRAMED:
                K[:, a] = np.floor((self._frame(a, x) - self.origin[a]) / self.widths[a]).astype(np.int64)
            else:
                K[:, a] = np.floor((x - self.origin[a]) / self.widths[a]).astype(np.int64)
        return K

    def locate(self, pos) -> np.ndarray:
        """Flat cell index of each position, -1 where outside the grid."""
        K = self.cell_coords(pos)
        inside = np.all((K >= 0) & (K < np.array(self.shape)), axis=1)
        flat = (K[:, 0] * self.shape[1] + K[:, 1]) * self.shape[2] + K[:, 2]
        return np.where(inside, flat, -1)

    def point_crossings(self, x0, x1, disp, shift) -> Crossings:
        """Crossings of molecules moving ``x0 -> x0 + disp`` (stored end ``x1``)."""
        out = _K.point_crossings(
            np.ascontiguousarray(x0, dtype=float), np.ascontiguousarray(x1, dtype=float),
            np.ascontiguousarray(disp, dtype=float), np.ascontiguousarray(shift, dtype=np.int_),
            **self._args)
        return Crossings(*out)

    def pair_traverse(self, r_i, r_j, r_ij, want_visits: bool = True) -> PairWalk:
        """Walk pair segments from stored ``r_i`` along ``-r_ij`` to stored ``r_j``."""
        visits, planes = _K.pair_traverse(
            np.ascontiguousarray(r_i, dtype=float), np.ascontiguousarray(r_j, dtype=float),
            np.ascontiguousarray(r_ij, dtype=float), want_visits=want_visits, **self._args)
        return PairWalk(*visits, *planes)


def grid_locate(pos, grid: CVGrid):
    """Flat cell index of a single position (-1 outside)."""
    return int(grid.locate(np.asarray(pos, dtype=float).reshape(1, 3))[0])


def grid_traverse_segment(r_i, r_j_image, grid: CVGrid) -> list:
    """Cells visited by the segment ``r_i -> r_j_image``.

    Returns a list of ``(cell, fraction, PairFaceIncidence)`` in traversal
    order; the endpoint ``r_j_image`` may lie in a periodic image.
    """
    r_i = np.asarray(r_i, dtype=float).reshape(1, 3)
    r_jm = np.asarray(r_j_image, dtype=float).reshape(1, 3)
    if np.array_equal(r_i, r_jm):
        raise ValueError("degenerate segment")
    r_ij = r_i - r_jm
    r_j = wrap_position(r_jm, grid.box)
    r_i = wrap_position(r_i, grid.box)
    w = grid.pair_traverse(r_i, r_j, r_ij)
    cells = list(dict.fromkeys(int(c) for c in w.visit_cell))
    frac = {c: 0.0 for c in cells}
    for c, f in zip(w.visit_cell, w.visit_frac):
        frac[int(c)] += float(f)
    inc = {c: np.zeros(6, dtype=np.int64) for c in cells}
    for a, d, ce, cn in zip(w.plane_axis, w.plane_dir, w.plane_exit, w.plane_enter):
        for c, upper in ((int(ce), d > 0), (int(cn), d < 0)):
            if c >= 0:
                inc.setdefault(c, np.zeros(6, dtype=np.int64))
                inc[c][face_id(int(a), bool(upper))] = -int(d)
    ci = grid_locate(r_i[0], grid)
    cj = grid_locate(r_j[0], grid)
    out = []
    for c in cells:
        th = int(ci == c) - int(cj == c)
        out.append((c, frac[c], PairFaceIncidence(inc[c], th)))
    return out
