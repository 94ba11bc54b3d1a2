"""Incident-field models: Hankel-series fit, plane wave, isotropic wave, calibrated 3D plane wave.

All models are callables over point arrays of shape ``(..., d)``.
"""

from dataclasses import dataclass

import numpy as np
from scipy import linalg, special

from .errors import DomainError, RankDeficientError
from .geometry import spherical_frame
from .specfun import MAX_ORDER

SINGULAR_RADIUS = 1e-9


def _polar_about(x, emitter):
    """Emitter-centred polar coordinates with theta = 0 pointing toward the origin."""
    x = np.asarray(x, dtype=float)
    emitter = np.asarray(emitter, dtype=float)
    d = x - emitter
    rho = np.hypot(d[..., 0], d[..., 1])
    if np.any(rho < SINGULAR_RADIUS):
        raise DomainError("incident field evaluated at the emitter singularity")
    r0 = np.hypot(*emitter)
    ref = -emitter / r0 if r0 > 0 else np.array([1.0, 0.0])
    theta = np.arctan2(ref[0] * d[..., 1] - ref[1] * d[..., 0], ref[0] * d[..., 0] + ref[1] * d[..., 1])
    return rho, theta


def _hankel_design(x, emitter, kappa, n_modes):
    rho, theta = _polar_about(x, emitter)
    n = np.arange(n_modes + 1)
    h = special.hankel1(n, kappa * rho[..., None])
    cols = [h[..., 0]]
    for m in range(1, n_modes + 1):
        cols.append(h[..., m] * np.cos(m * theta))
        cols.append(h[..., m] * np.sin(m * theta))
    return np.stack(cols, axis=-1)


@dataclass(frozen=True)
class HankelSeriesModel:
    """Emitter-centred series a0 H0 + sum_n H_n (a_n cos n theta + b_n sin n theta).

    ``coefficients`` is ordered ``[a0, a1, b1, a2, b2, ...]``.
    """

    emitter: np.ndarray
    kappa: float
    coefficients: np.ndarray
    residual_norm: float = float("nan")
    rank: int = -1  # of the stacked real system, -1 when not fitted
    condition: float = float("nan")

    @property
    def n_modes(self):
        return (len(self.coefficients) - 1) // 2

    def __call__(self, x):
        return _hankel_design(x, self.emitter, self.kappa, self.n_modes) @ np.asarray(self.coefficients)

    def to_text(self):
        """One-line text record: emitter coordinates, kappa, then re/im coefficient pairs."""
        vals = [*map(float, self.emitter), float(self.kappa), self.n_modes]
        for c in self.coefficients:
            vals += [c.real, c.imag]
        return " ".join(repr(float(v)) if not isinstance(v, int) else str(v) for v in vals)

    @classmethod
    def from_text(cls, line):
        p = line.split()
        emitter = np.array([float(p[0]), float(p[1])])
        kappa = float(p[2])
        n_modes = int(p[3])
        v = np.array([float(s) for s in p[4:]])
        coef = v[0::2] + 1j * v[1::2]
        if coef.size != 2 * n_modes + 1:
            raise DomainError("coefficient count does not match mode count")
        return cls(emitter, kappa, coef)


def fit_hankel_series(points, samples, emitter, kappa, n_modes=14, rcond=None, strict=False):
    """Least-squares fit of a :class:`HankelSeriesModel` to complex field samples.

    Solved on the real/imaginary stacked system by a column-pivoted QR
    factorization truncated at the numerical rank (pivots below ``rcond``
    times the largest are dropped, giving a basic solution).

    Receivers that see the emitter through a limited arc make the angular
    columns nearly dependent, so at 14 modes the design is numerically rank
    deficient while the fitted field is still exact to rounding. That case is
    handled by truncation. :class:`RankDeficientError` (with a condition
    estimate) is raised when more than half the columns are lost, or on any
    loss when ``strict`` is set.
    """
    points = np.asarray(points, dtype=float)
    samples = np.asarray(samples, dtype=complex).reshape(-1)
    if n_modes < 0 or n_modes > MAX_ORDER:
        raise DomainError(f"n_modes must be in [0, {MAX_ORDER}]")
    n_unknown = 2 * n_modes + 1
    if samples.size < n_unknown:
        raise DomainError(f"need at least {n_unknown} samples for {n_modes} modes, got {samples.size}")

    A = _hankel_design(points, emitter, kappa, n_modes)
    scale = np.linalg.norm(A, axis=0)
    scale[scale == 0] = 1.0
    As = A / scale
    M = np.block([[As.real, -As.imag], [As.imag, As.real]])
    rhs = np.concatenate([samples.real, samples.imag])
    if rcond is None:
        rcond = max(M.shape) * np.finfo(float).eps

    Q, R, perm = linalg.qr(M, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    cond = diag[0] / diag[-1] if diag[-1] > 0 else np.inf
    rank = int(np.count_nonzero(diag > rcond * diag[0]))
    if rank < M.shape[1] and (strict or 2 * rank < M.shape[1]):
        raise RankDeficientError(
            f"design matrix rank deficient: rank {rank} of {M.shape[1]} (condition ~ {cond:.3g})", cond
        )
    z = np.zeros(M.shape[1])
    z[:rank] = linalg.solve_triangular(R[:rank, :rank], Q[:, :rank].T @ rhs)
    sol = np.empty_like(z)
    sol[perm] = z
    coef = (sol[:n_unknown] + 1j * sol[n_unknown:]) / scale
    resid = float(np.linalg.norm(A @ coef - samples))
    return HankelSeriesModel(np.asarray(emitter, dtype=float), float(kappa), coef, resid, rank, float(cond))


@dataclass(frozen=True)
class IsotropicModel:
    """Scaled H1_0 wave radiating from the emitter."""

    emitter: np.ndarray
    kappa: float
    scale: complex = 1.0

    def __post_init__(self):
        if not np.isfinite(self.scale) or self.scale == 0:
            raise DomainError("isotropic scale must be finite and nonzero")

    @classmethod
    def anchored(cls, emitter, kappa, anchor_point, anchor_value):
        """Model that reproduces ``anchor_value`` exactly at ``anchor_point``."""
        r = np.linalg.norm(np.asarray(anchor_point, float) - np.asarray(emitter, float))
        return cls(np.asarray(emitter, float), float(kappa), complex(anchor_value) / special.hankel1(0, kappa * r))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        rho = np.linalg.norm(x - self.emitter, axis=-1)
        if np.any(rho < SINGULAR_RADIUS):
            raise DomainError("incident field evaluated at the emitter singularity")
        return self.scale * special.hankel1(0, self.kappa * rho)


@dataclass(frozen=True)
class PlaneWaveModel:
    """Plane wave ``value_at_anchor * exp(i kappa d.(x - anchor))``.

    In 3D, use :class:`PlaneWave3D` for the calibrated vector wave instead.
    """

    direction: np.ndarray
    kappa: float
    anchor: np.ndarray
    anchor_value: complex = 1.0

    def __post_init__(self):
        d = np.asarray(self.direction, dtype=float)
        if abs(np.linalg.norm(d) - 1.0) > 1e-14:
            raise DomainError("plane-wave direction must be a unit vector")

    @classmethod
    def toward(cls, emitter, target, kappa, anchor_point, anchor_value):
        d = np.asarray(target, float) - np.asarray(emitter, float)
        d = d / np.linalg.norm(d)
        return cls(d, float(kappa), np.asarray(anchor_point, float), complex(anchor_value))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return self.anchor_value * np.exp(1j * self.kappa * ((x - self.anchor) @ self.direction))


@dataclass(frozen=True)
class PlaneWave3D:
    """Unit-amplitude vector plane wave with zero phase at the origin.

    ``U(x) = p * exp(-i kappa x . u_r)`` where ``u_r`` points from the origin to
    the emitter, so the wave travels from the emitter across the origin.
    """

    polarization: np.ndarray
    source_direction: np.ndarray
    kappa: float

    def __post_init__(self):
        p = np.asarray(self.polarization, dtype=float)
        u = np.asarray(self.source_direction, dtype=float)
        if abs(np.linalg.norm(u) - 1.0) > 1e-14 or abs(np.linalg.norm(p) - 1.0) > 1e-12:
            raise DomainError("direction and polarization must be unit vectors")
        if abs(p @ u) > 1e-12:
            raise DomainError("polarization must be orthogonal to the propagation direction")

    @classmethod
    def from_angles(cls, theta, phi, kappa, pol="PP"):
        u_r, u_theta, u_phi = spherical_frame(theta, phi)
        if pol not in ("PP", "TP"):
            raise DomainError(f"unknown polarization {pol!r}")
        return cls(u_phi if pol == "PP" else u_theta, u_r, float(kappa))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        phase = np.exp(-1j * self.kappa * (x @ self.source_direction))
        return phase[..., None] * self.polarization


def eval_incident_2d(model, x):
    return model(x)


def eval_incident_3d(model, x):
    return model(x)
