"""Analytic forward solutions used as ground truth.

2D: separation-of-variables (Mie) series for a disk, Dirichlet or
dielectric, illuminated by a plane wave or a point source. 3D: a Born-level
point dipole radiating through the outgoing dyadic kernel.

Time dependence is exp(-iwt) throughout, so outgoing waves use H1 and
``exp(+i k r)``.
"""

import hashlib
import json
import math
from dataclasses import dataclass

import numpy as np

from .dataset import CONVENTION_MINUS, Dataset, Record
from .errors import ConvergenceError, DomainError
from .incident import IsotropicModel, PlaneWave3D, PlaneWaveModel
from .specfun import bessel_j_signed as _J, bessel_jp_signed as _Jp, hankel1_signed as _H, hankel1p_signed as _Hp
from .topofield import MaterialSpec

N_CAP = 64
TRUNCATION_TOL = 1e-14
BOUNDARY_TOL = 1e-12


@dataclass(frozen=True)
class DiskScatterer:
    center: tuple
    radius: float
    material: MaterialSpec

    def __post_init__(self):
        c = tuple(float(v) for v in self.center)
        if len(c) != 2:
            raise DomainError("disk center must be 2D")
        if not self.radius > 0:
            raise DomainError("disk radius must be positive")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "radius", float(self.radius))

    def contains(self, x):
        x = np.asarray(x, float)
        return np.linalg.norm(x - np.array(self.center), axis=-1) <= self.radius

    def to_dict(self):
        return {"type": "disk", "center": list(self.center), "radius": self.radius,
                "material": self.material.to_dict()}


@dataclass(frozen=True)
class MieSolution:
    orders: np.ndarray  # -N..N
    incident_coefficients: np.ndarray
    b: np.ndarray  # scattered, H1_n(kappa rho) e^{i n phi}
    c: np.ndarray  # interior, J_n(kappa_d rho) e^{i n phi}; zeros for Dirichlet
    kappa: float
    kappa_d: float
    disk: DiskScatterer

    @property
    def n_max(self):
        return int(self.orders[-1])


def incident_coefficients(model, center, kappa, orders):
    """Coefficients A_n of ``sum A_n J_n(kappa rho) e^{i n phi}`` about ``center``."""
    center = np.asarray(center, float)
    n = np.asarray(orders)
    if isinstance(model, PlaneWaveModel):
        d = np.asarray(model.direction, float)
        s = model.anchor_value * np.exp(1j * kappa * (d @ (center - model.anchor)))
        alpha = math.atan2(d[1], d[0])
        return s * (1j ** (n % 4)) * np.exp(-1j * n * alpha)
    if isinstance(model, IsotropicModel):
        v = np.asarray(model.emitter, float) - center
        rho_e = float(np.hypot(*v))
        phi_e = math.atan2(v[1], v[0])
        return model.scale * _H(n, kappa * rho_e) * np.exp(-1j * n * phi_e)
    raise DomainError("incident model must be a plane wave or an isotropic source")


def _modal(disk, A, kappa, n):
    ka = kappa * disk.radius
    J, Jp = _J(n, ka), _Jp(n, ka)
    H, Hp = _H(n, ka), _Hp(n, ka)
    mat = disk.material
    if mat.kind == "conducting":
        return -A * J / H, np.zeros_like(A), kappa
    kd = kappa * math.sqrt(mat.permittivity)
    kda = kd * disk.radius
    Jd, Jdp = _J(n, kda), _Jp(n, kda)
    # value and normal-derivative continuity at rho = a
    det = kappa * Hp * Jd - kd * H * Jdp
    b = A * ((kd * Jdp) * J - (kappa * Jp) * Jd) / det  # grouped so eps_d = 1 cancels exactly
    c = A * kappa * (Hp * J - H * Jp) / det
    return b, c, kd


def mie_solve(disk, incident, kappa, n_max=None):
    """Modal coefficients for ``disk`` lit by ``incident`` at wavenumber ``kappa``.

    Truncation starts at ``ceil(kappa a) + 16`` and grows until the outermost
    scattered coefficients fall below 1e-14 of the largest one.
    """
    if not kappa > 0:
        raise DomainError("kappa must be positive")
    if isinstance(incident, IsotropicModel):
        if np.linalg.norm(np.asarray(incident.emitter) - np.array(disk.center)) <= disk.radius:
            raise DomainError("point source inside the disk")
    N = int(math.ceil(kappa * disk.radius)) + 16 if n_max is None else int(n_max)
    while True:
        if N > N_CAP:
            raise ConvergenceError(f"Mie series did not converge within {N_CAP} orders")
        n = np.arange(-N, N + 1)
        A = incident_coefficients(incident, disk.center, kappa, n)
        b, c, kd = _modal(disk, A, kappa, n)
        peak = np.max(np.abs(b))
        if n_max is not None or peak == 0 or max(abs(b[0]), abs(b[-1])) <= TRUNCATION_TOL * peak:
            return MieSolution(n, A, b, c, float(kappa), float(kd), disk)
        N += 4


def _local(disk, x):
    x = np.asarray(x, float)
    d = x - np.array(disk.center)
    return np.hypot(d[..., 0], d[..., 1]), np.arctan2(d[..., 1], d[..., 0])


def _series(coef, fun, n, z, phi):
    return np.sum(coef * fun(n, z[..., None]) * np.exp(1j * n * phi[..., None]), axis=-1)


def scattered_field(sol, x):
    """Exterior scattered field, or the interior total field for points inside.

    Points within 1e-12 of the boundary are rejected as ambiguous.
    """
    rho, phi = _local(sol.disk, x)
    a = sol.disk.radius
    if np.any(np.abs(rho - a) <= BOUNDARY_TOL):
        raise DomainError("point on the disk boundary")
    out = np.zeros(rho.shape, dtype=complex)
    ext = rho > a
    if np.any(ext):
        out[ext] = _series(sol.b, _H, sol.orders, sol.kappa * rho[ext], phi[ext])
    if np.any(~ext):
        if sol.disk.material.kind == "conducting":
            out[~ext] = 0.0
        else:
            out[~ext] = _series(sol.c, _J, sol.orders, sol.kappa_d * rho[~ext], phi[~ext])
    return out


def boundary_traces(sol, phi):
    """Values and radial derivatives on both sides of the boundary at angles ``phi``.

    Returns ``(outer_value, outer_dr, inner_value, inner_dr)`` computed from
    the modal series (exterior total field = incident expansion + scattered).
    """
    phi = np.asarray(phi, float)
    k, kd, a, n = sol.kappa, sol.kappa_d, sol.disk.radius, sol.orders
    e = np.exp(1j * n * phi[..., None])
    A, b, c = sol.incident_coefficients, sol.b, sol.c
    ka, kda = k * a, kd * a
    out_v = np.sum((A * _J(n, ka) + b * _H(n, ka)) * e, axis=-1)
    out_d = k * np.sum((A * _Jp(n, ka) + b * _Hp(n, ka)) * e, axis=-1)
    in_v = np.sum(c * _J(n, kda) * e, axis=-1)
    in_d = kd * np.sum(c * _Jp(n, kda) * e, axis=-1)
    return out_v, out_d, in_v, in_d


def scattered_at(disks, incident, kappa, x):
    """Sum of single-disk scattered fields (exact for one disk)."""
    total = np.zeros(np.asarray(x).shape[:-1], dtype=complex)
    for d in disks:
        total = total + scattered_field(mie_solve(d, incident, kappa), x)
    return total


# ----------------------------------------------------------------------------
# datasets


def _digest(obj):
    return hashlib.sha256(json.dumps(obj, sort_keys=True).encode()).hexdigest()[:12]


def _add_noise(records, noise, rng):
    if noise <= 0:
        return records
    res = np.concatenate([r.residuals for r in records])
    rms = float(np.sqrt(np.mean(np.abs(res) ** 2)))
    out = []
    for r in records:
        z = rng.standard_normal(r.total.size) + 1j * rng.standard_normal(r.total.size)
        out.append(Record(r.emitter, r.freq, r.receivers, r.incident,
                          r.total + noise * rms * z / math.sqrt(2.0), r.pol))
    return out


def synthetic_incident_2d(layout, e, kappa, kind="isotropic"):
    xe = layout.emitter_point(e)
    if kind == "isotropic":
        return IsotropicModel(xe, float(kappa), 1.0)
    if kind == "plane":
        return PlaneWaveModel(-xe / np.linalg.norm(xe), float(kappa), np.zeros(2), 1.0)
    raise DomainError(f"unknown incident kind {kind!r}")


def synth_dataset_2d(disks, layout, sweep, incident="isotropic", noise=0.0, seed=0):
    """Synthetic 2D dataset: measured = incident + Mie scattered field at every receiver.

    Noise is circular complex Gaussian with standard deviation ``noise`` times
    the per-frequency RMS residual. More than one disk uses single-scattering
    superposition and is flagged as approximate in the metadata.
    """
    disks = list(disks)
    if noise < 0:
        raise DomainError("noise must be nonnegative")
    for d in disks:
        for e in range(layout.n_emitters):
            pts = np.vstack([layout.emitter_point(e)[None], layout.receiver_points(e)])
            if np.any(d.contains(pts)):
                raise DomainError("disk intersects an antenna")
    rng = np.random.default_rng(seed)
    records = []
    for f, kappa in enumerate(sweep.wavenumbers):
        recs = []
        for e in range(layout.n_emitters):
            model = synthetic_incident_2d(layout, e, kappa, incident)
            pts = layout.receiver_points(e)
            inc = model(pts)
            recs.append(Record(e, f, np.arange(len(pts)), inc, inc + scattered_at(disks, model, kappa, pts)))
        records += _add_noise(recs, noise, rng)
    truth = [d.to_dict() for d in disks]
    meta = {
        "synthetic": True,
        "truth": truth,
        "incident": incident,
        "noise": float(noise),
        "seed": int(seed),
        "approximate": len(disks) > 1,
    }
    meta["id"] = "synth2d-" + _digest([meta, layout.to_dict(), sweep.values.tolist()])
    return Dataset(2, layout, sweep, records, CONVENTION_MINUS, meta)


@dataclass(frozen=True)
class BornPointScatterer3D:
    location: tuple
    amplitude: complex = 0.05

    def __post_init__(self):
        loc = tuple(float(v) for v in self.location)
        if len(loc) != 3:
            raise DomainError("scatterer location must be 3D")
        if abs(self.amplitude) > 0.1:
            raise DomainError("Born amplitude must satisfy |a| <= 0.1")
        object.__setattr__(self, "location", loc)
        object.__setattr__(self, "amplitude", complex(self.amplitude))

    def to_dict(self):
        a = self.amplitude
        return {"type": "point", "location": list(self.location), "amplitude": [a.real, a.imag]}


def outgoing_dyadic(kappa, x, y):
    """``(I + grad grad / kappa^2) exp(i kappa r)/(4 pi r)``; shape (N, 3, 3)."""
    diff = np.atleast_2d(np.asarray(x, float)) - np.asarray(y, float)
    r = np.linalg.norm(diff, axis=-1)
    if np.any(r < 1e-9):
        raise DomainError("dyadic kernel evaluated at its source")
    rh = diff / r[:, None]
    kr = kappa * r
    g = np.exp(1j * kr) / (4.0 * np.pi * r)
    a = g * (1.0 + 1j / kr - 1.0 / kr**2)
    b = g * (-1.0 - 3j / kr + 3.0 / kr**2)
    return a[:, None, None] * np.eye(3) + b[:, None, None] * rh[:, :, None] * rh[:, None, :]


def born_field(scatterers, incident, kappa, x):
    """Re-radiated vector field of Born dipoles driven by ``incident`` at points ``x``."""
    x = np.atleast_2d(np.asarray(x, float))
    out = np.zeros(x.shape, dtype=complex)
    for s in scatterers:
        y = np.array(s.location)
        u = incident(y)
        out += s.amplitude * kappa * np.einsum("nij,j->ni", outgoing_dyadic(kappa, x, y), u)
    return out


def synth_dataset_3d(scatterers, layout, sweep, polarization="PP", noise=0.0, seed=0):
    """Synthetic 3D dataset of vertical field components under the Born model."""
    if polarization != "PP":
        raise DomainError("3D synthesis supports parallel polarization (PP) only")
    scatterers = list(scatterers)
    rng = np.random.default_rng(seed)
    records = []
    for f, kappa in enumerate(sweep.wavenumbers):
        recs = []
        for e in range(layout.n_emitters):
            xe = layout.emitter_point(e)
            model = PlaneWave3D(layout.emitter_polarization(e, "PP"), xe / np.linalg.norm(xe), float(kappa))
            pts = layout.receiver_points(e)
            dirs = layout.receiver_directions(e)
            inc = np.sum(model(pts) * dirs, axis=-1)
            sca = np.sum(born_field(scatterers, model, kappa, pts) * dirs, axis=-1)
            recs.append(Record(e, f, np.arange(len(pts)), inc, inc + sca, pol="PP"))
        records += _add_noise(recs, noise, rng)
    meta = {
        "synthetic": True,
        "truth": [s.to_dict() for s in scatterers],
        "incident": "plane3d",
        "noise": float(noise),
        "seed": int(seed),
        "approximate": True,
    }
    meta["id"] = "synth3d-" + _digest([meta, layout.to_dict(), sweep.values.tolist()])
    return Dataset(3, layout, sweep, records, CONVENTION_MINUS, meta)


def misfit(record, predicted):
    """Half the squared 2-norm of predicted minus measured samples."""
    p = np.asarray(predicted, dtype=complex).reshape(-1)
    if p.size != record.total.size:
        raise DomainError(f"expected {record.total.size} predicted values, got {p.size}")
    return 0.5 * float(np.sum(np.abs(p - record.total) ** 2))


# ----------------------------------------------------------------------------
# ground-truth shape files


def write_truth(path, shapes):
    items = [s.to_dict() if hasattr(s, "to_dict") else dict(s) for s in shapes]
    with open(path, "w") as fh:
        json.dump(items, fh, indent=2, sort_keys=True)


def read_truth(path):
    with open(path) as fh:
        items = json.load(fh)
    if not isinstance(items, list):
        raise DomainError("truth file must hold a JSON list")
    return items


def shapes_from_truth(items):
    """Oracle objects (disks and point scatterers) from truth records; boxes are skipped."""
    out = []
    for it in items:
        if it["type"] == "disk":
            m = it.get("material") or {"kind": "conducting"}
            out.append(DiskScatterer(it["center"], it["radius"], MaterialSpec(m["kind"], m.get("permittivity"))))
        elif it["type"] == "point":
            a = it.get("amplitude", [0.05, 0.0])
            out.append(BornPointScatterer3D(it["location"], complex(*a) if isinstance(a, list) else a))
    return out
