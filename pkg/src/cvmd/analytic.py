"""Start-up Couette flow from the Fourier solution of the 1-D diffusion equation.

The lower wall (y = 0) is at rest and the upper wall (y = L) moves at
``U0`` from ``t = 0``.  With ``nu = mu / rho`` and ``lambda_n = (n pi / L)^2``

    u(y, t) = sum_n u_n(t) sin(n pi y / L),
    u_n = 2 U0 (-1)^n / (n pi) [exp(-lambda_n nu t) - 1].

The ``-1`` part of every coefficient sums to the steady profile
``U0 y / L`` in closed form; only the decaying part is summed
numerically, so truncation error falls off exponentially for ``t > 0``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# exp(-40) ~ 4e-18: later terms cannot change a double at 1e-15 relative
_EXP_CUTOFF = 40.0


@dataclass(frozen=True)
class CouetteParams:
    """Channel and fluid parameters.

    ``dx`` and ``dz`` are the streamwise and spanwise extents of the
    control volume used by :func:`cv_momentum_history`.
    """

    mu: float = 1.6
    rho: float = 0.8
    L: float = 20.52
    U0: float = 1.0
    n_terms: int = 1000
    dx: float = 1.0
    dz: float = 1.0

    def __post_init__(self):
        if self.mu <= 0 or self.rho <= 0 or self.L <= 0:
            raise ValueError("mu, rho and L must be positive")
        if self.n_terms < 1:
            raise ValueError("n_terms must be at least 1")

    @property
    def nu(self) -> float:
        return self.mu / self.rho

    def lam(self, n):
        return (np.asarray(n) * np.pi / self.L) ** 2


def _modes(t: float, p: CouetteParams):
    """Mode numbers and decay factors ``exp(-lambda_n nu t)`` that matter at time t."""
    n_need = int(np.ceil(p.L / np.pi * np.sqrt(_EXP_CUTOFF / (p.nu * t)))) + 1
    n = np.arange(1, min(p.n_terms, max(n_need, 1)) + 1, dtype=float)
    return n, np.exp(-p.lam(n) * p.nu * t)


def _check_y(y, p):
    y = np.asarray(y, dtype=float)
    if np.any(y < 0) or np.any(y > p.L) or not np.all(np.isfinite(y)):
        raise ValueError("y must lie in [0, L]")
    return y


def couette_velocity(y, t: float, params: CouetteParams):
    """Streamwise velocity ``u_x(y, t)``; scalar or array ``y``."""
    p = params
    y = _check_y(y, p)
    if t < 0:
        raise ValueError("t must be non-negative")
    if t == 0:
        return np.where(y == p.L, p.U0, 0.0) if y.ndim else (p.U0 if y == p.L else 0.0)
    n, E = _modes(t, p)
    coef = 2.0 * p.U0 * (-1.0) ** n / (n * np.pi) * E
    s = np.sin(np.multiply.outer(y, n) * np.pi / p.L) @ coef
    u = p.U0 * y / p.L + s
    return float(u) if np.ndim(u) == 0 else u


def couette_shear_stress(y, t: float, params: CouetteParams):
    """Shear stress ``Pi_xy(y, t) = -mu du/dy``."""
    p = params
    y = _check_y(y, p)
    if not t > 0:
        raise ValueError("stress series needs t > 0")
    n, E = _modes(t, p)
    c = np.cos(np.multiply.outer(y, n) * np.pi / p.L) @ ((-1.0) ** n * E)
    out = -(p.mu * p.U0 / p.L) * (1.0 + 2.0 * c)
    return float(out) if np.ndim(out) == 0 else out


def cv_momentum_history(t: float, params: CouetteParams):
    """Whole-liquid CV momentum rate and face stress integrals.

    Returns ``(dPdt, top, bottom)`` where ``top`` and ``bottom`` are the
    face integrals of ``Pi_xy`` over the planes ``y = L`` and ``y = 0``
    (area ``dx * dz``), so that ``dPdt = -(top - bottom)``.
    """
    p = params
    if not t > 0:
        raise ValueError("series diverges at t = 0")
    n, E = _modes(t, p)
    A = p.dx * p.dz
    c = p.mu * p.U0 / p.L
    alt = (-1.0) ** n
    dPdt = 2.0 * A * c * np.sum((1.0 - alt) * E)
    top = -A * c * (1.0 + 2.0 * np.sum(E))
    bottom = -A * c * (1.0 + 2.0 * np.sum(alt * E))
    return float(dPdt), float(top), float(bottom)


def time_average(fn, y, t0: float, t1: float, params: CouetteParams, samples: int = 101):
    """Trapezoidal time average of ``fn(y, t, params)`` over ``[t0, t1]``."""
    ts = np.linspace(t0, t1, samples)
    vals = np.array([fn(y, t, params) for t in ts])
    integrate = getattr(np, "trapezoid", None) or np.trapz
    return integrate(vals, ts, axis=0) / (t1 - t0) if t1 > t0 else vals[0]
