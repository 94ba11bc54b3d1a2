"""Closed-form adjoint fields radiated from the receivers.

2D: ``V(x) = sum_j r_j (i/4) H2_0(kappa |x - x_j|)``.

3D: ``V(x) = kappa**-2 sum_j curl curl[Phi(|x - x_j|) r_j d_j]`` with
``Phi(r) = -exp(-i kappa r) / (4 pi r)``, the 3D counterpart of the 2D kernel
(both satisfy ``(Delta + kappa^2) Phi = delta`` and are incoming). ``d_j`` is
the receiver's measurement direction, the vertical unit vector for the
standard 3D layout.

Residuals are always incident minus measured.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .errors import DomainError

EXCLUSION_RADIUS = 1e-6


def _distances(x, y, exclusion):
    diff = x[:, None, :] - y[None, :, :]
    r = np.sqrt(np.einsum("nmk,nmk->nm", diff, diff))
    if np.any(r < exclusion):
        raise DomainError("adjoint field evaluated inside a receiver exclusion ball")
    return diff, r


def helmholtz_kernel(kappa, x, y, exclusion=EXCLUSION_RADIUS):
    """Matrix ``(i/4) H2_0(kappa |x_n - y_m|)`` of shape (N, M)."""
    _, r = _distances(np.atleast_2d(x), np.atleast_2d(y), exclusion)
    return 0.25j * np.conj(special.hankel1(0, kappa * r))


def dipole_kernel(kappa, x, y, d, exclusion=EXCLUSION_RADIUS):
    """Fields ``kappa**-2 curl curl[Phi d_m]`` at ``x_n``; shape (N, M, 3).

    Uses the dyadic closed form ``curl curl(Phi d) = (k^2 Phi + Phi'/r) d +
    (Phi'' - Phi'/r)(rhat . d) rhat``.
    """
    diff, r = _distances(np.atleast_2d(x), np.atleast_2d(y), exclusion)
    d = np.atleast_2d(d)
    rhat = diff / r[..., None]
    ikr = 1j * kappa * r
    phi = -np.exp(-ikr) / (4.0 * np.pi * r)
    inv_r2 = 1.0 / (r * r)
    a = phi * (1.0 - 1j / (kappa * r) - inv_r2 / kappa**2)
    b = phi * (-1.0 + 3j / (kappa * r) + 3.0 * inv_r2 / kappa**2)
    rd = np.einsum("nmk,mk->nm", rhat, d)
    return a[..., None] * d[None, :, :] + (b * rd)[..., None] * rhat


@dataclass(frozen=True)
class ResidualSet:
    """Per-receiver residuals of one experiment, plus where they radiate from.

    ``directions`` is only used in 3D; it defaults to the vertical unit vector.
    """

    points: np.ndarray
    residuals: np.ndarray
    kappa: float
    directions: np.ndarray = field(default=None)
    exclusion: float = EXCLUSION_RADIUS

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        res = np.asarray(self.residuals, dtype=complex).reshape(-1)
        if pts.shape[0] != res.size:
            raise DomainError("residual count must equal receiver count")
        if not np.all(np.isfinite(res)):
            raise DomainError("residuals must be finite")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "residuals", res)
        if pts.shape[1] == 3:
            d = self.directions
            if d is None:
                d = np.tile([0.0, 0.0, 1.0], (res.size, 1))
            object.__setattr__(self, "directions", np.atleast_2d(np.asarray(d, dtype=float)))

    @property
    def dimension(self):
        return self.points.shape[1]

    def __call__(self, x):
        if self.dimension == 2:
            return adjoint_2d(self, x)
        return adjoint_3d(self, x)


def _flat(x, dim):
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != dim:
        raise DomainError(f"points must have {dim} coordinates")
    return x.reshape(-1, dim), x.shape[:-1]


def adjoint_2d(rs, x):
    xf, shape = _flat(x, 2)
    v = helmholtz_kernel(rs.kappa, xf, rs.points, rs.exclusion) @ rs.residuals
    return v.reshape(shape)


def adjoint_3d(rs, x):
    xf, shape = _flat(x, 3)
    K = dipole_kernel(rs.kappa, xf, rs.points, rs.directions, rs.exclusion)
    v = np.einsum("nmk,m->nk", K, rs.residuals)
    return v.reshape(shape + (3,))
