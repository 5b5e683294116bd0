"""WCA pair forces, wall tethers and per-pair records."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._backend import kernels as _K
from .core import BoxSpec, SimState, Tag, min_image

RC = 2.0 ** (1.0 / 6.0)
K4_DEFAULT = 5.0e3
K6_DEFAULT = 5.0e6


def wca(r_ij):
    """WCA potential and force on i for one separation vector.

    Parameters
    ----------
    r_ij : array_like, shape (3,)
        Separation ``r_i - r_j``.

    Returns
    -------
    phi : float
    f : ndarray, shape (3,)
        Force on i due to j.
    """
    r = np.asarray(r_ij, dtype=float)
    r2 = r[0] * r[0] + r[1] * r[1] + r[2] * r[2]
    if r2 == 0.0:
        raise ValueError("overlapping atoms: zero pair separation")
    if r2 > RC * RC:
        return 0.0, np.zeros(3)
    inv2 = 1.0 / r2
    inv6 = inv2 * inv2 * inv2
    fm = 24.0 * inv2 * inv6 * (2.0 * inv6 - 1.0)
    return 4.0 * inv6 * (inv6 - 1.0) + 1.0, fm * r


def tether_force(r_i, site, box: BoxSpec | None = None, k4: float = K4_DEFAULT,
                 k6: float = K6_DEFAULT):
    """Restoring force of the quartic-plus-sextic tether, ``-r0 (4 k4 r0^2 + 6 k6 r0^4)``.

    Works row-wise on arrays of shape (..., 3).  With ``box`` given, the
    displacement from the site uses the minimum image.
    """
    r0 = np.asarray(r_i, dtype=float) - np.asarray(site, dtype=float)
    if box is not None:
        r0 = min_image(r0, box)
    q = np.sum(r0 * r0, axis=-1, keepdims=True)
    return -r0 * (4.0 * k4 * q + 6.0 * k6 * q * q)


def tether_energy(r_i, site, box: BoxSpec | None = None, k4: float = K4_DEFAULT,
                  k6: float = K6_DEFAULT):
    r0 = np.asarray(r_i, dtype=float) - np.asarray(site, dtype=float)
    if box is not None:
        r0 = min_image(r0, box)
    q = np.sum(r0 * r0, axis=-1)
    return k4 * q * q + k6 * q * q * q


@dataclass(frozen=True)
class PairRecords:
    """All interacting pairs, each once with ``i < j`` in canonical order."""

    i: np.ndarray
    j: np.ndarray
    r_ij: np.ndarray
    f_ij: np.ndarray
    phi: np.ndarray

    def __len__(self):
        return len(self.i)

    def subset(self, mask) -> "PairRecords":
        return PairRecords(self.i[mask], self.j[mask], self.r_ij[mask], self.f_ij[mask], self.phi[mask])


@dataclass(frozen=True)
class ForceField:
    """Forces at one configuration.

    ``total = pair + external`` row by row; ``external`` holds tether forces.
    """

    total: np.ndarray
    pair: np.ndarray
    external: np.ndarray
    pairs: PairRecords

    def potential_per_molecule(self, n: int) -> np.ndarray:
        """Half of each pair energy assigned to each partner."""
        p = self.pairs
        return 0.5 * (np.bincount(p.i, weights=p.phi, minlength=n)
                      + np.bincount(p.j, weights=p.phi, minlength=n))

    @property
    def potential_energy(self) -> float:
        return float(np.sum(self.pairs.phi))


def build_cells(positions, box: BoxSpec, rc: float = RC) -> PairRecords:
    """Enumerate every pair with separation at most ``rc`` (linked cells)."""
    L = box.lengths
    for a in range(3):
        if box.periodic[a] and L[a] < 2.0 * rc:
            raise ValueError(f"periodic box length {L[a]} below 2*r_c on axis {a}")
    pos = np.ascontiguousarray(positions, dtype=float)
    i, j, r, f, phi = _K.wca_pairs(pos, np.ascontiguousarray(L, dtype=float),
                                   tuple(int(p) for p in box.periodic), float(rc))
    return PairRecords(i, j, r, f, phi)


class NeighborList:
    """Verlet list of candidate pairs within ``rc + skin``.

    The list is rebuilt with the cell search whenever some atom has moved
    more than ``skin / 2`` since the last build, so no pair within ``rc``
    is ever missed.  Candidates are kept in canonical order; the pair
    records are identical to those of :func:`build_cells`.
    """

    def __init__(self, skin: float = 0.3, rc: float = RC):
        if skin < 0:
            raise ValueError("skin must be non-negative")
        self.skin = float(skin)
        self.rc = float(rc)
        self.builds = 0
        self._ref = None
        self._key = None
        self._ci = self._cj = None

    def _stale(self, pos, box: BoxSpec) -> bool:
        key = (len(pos), tuple(box.lengths), tuple(box.periodic))
        if self._ref is None or key != self._key:
            self._key = key
            return True
        d = min_image(pos - self._ref, box)
        return float(np.max(np.einsum("ij,ij->i", d, d), initial=0.0)) > (0.5 * self.skin) ** 2

    def pairs(self, positions, box: BoxSpec) -> PairRecords:
        pos = np.ascontiguousarray(positions, dtype=float)
        L = np.ascontiguousarray(box.lengths, dtype=float)
        per = tuple(int(p) for p in box.periodic)
        if self.skin == 0.0:
            return build_cells(pos, box, self.rc)
        if self._stale(pos, box):
            cand = build_cells(pos, box, self.rc + self.skin)
            self._ci, self._cj = cand.i, cand.j
            self._ref = pos.copy()
            self.builds += 1
        return PairRecords(*_K.wca_filter(pos, L, per, self.rc, self._ci, self._cj))


def pair_totals(pairs: PairRecords, n: int) -> np.ndarray:
    """Per-molecule sum of pair forces, accumulated in canonical order."""
    F = np.empty((n, 3))
    for a in range(3):
        F[:, a] = (np.bincount(pairs.i, weights=pairs.f_ij[:, a], minlength=n)
                   - np.bincount(pairs.j, weights=pairs.f_ij[:, a], minlength=n))
    return F


def compute_forces(state: SimState, k4: float = K4_DEFAULT, k6: float = K6_DEFAULT,
                   nlist: NeighborList | None = None) -> ForceField:
    """Pair and tether forces for the current positions.

    With ``nlist`` the pairs come from the Verlet list, otherwise from a
    fresh cell search; both give identical records.
    """
    if nlist is None:
        pairs = build_cells(state.positions, state.box)
    else:
        pairs = nlist.pairs(state.positions, state.box)
    Fp = pair_totals(pairs, state.n)
    Fe = np.zeros_like(Fp)
    walls = state.tags != Tag.FLUID
    if np.any(walls):
        Fe[walls] = tether_force(state.positions[walls], state.tether_sites[walls], state.box, k4, k6)
    return ForceField(Fp + Fe, Fp, Fe, pairs)
