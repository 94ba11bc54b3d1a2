"""Topological derivative (TD) and topological energy (TE) indicator fields.

Per-experiment values are averaged over emitters, then combined across
frequencies with per-frequency normalization (TD by |min|, TE by max).

Sign conventions (residual = incident - measured, adjoint kernels as in
:mod:`topoimg.adjoint`):

* 2D dielectric: ``-kappa^2 (eps_d - 1) Re(U conj V)``
* 2D conducting: ``Re(U conj V)``
* 3D dielectric: ``-3 Re(kappa^2 (eps_r - 1)/(eps_r + 2) U . conj V)``

With these, each value is the true first-order change of the misfit per
unit ``f(eps)`` when a small inclusion nucleates at ``x``, so negative values
mark likely scatterers.
"""

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .adjoint import ResidualSet, dipole_kernel, helmholtz_kernel
from .errors import DomainError, GridMismatchError, ZeroNormalizerError
from .incident import IsotropicModel, PlaneWave3D, PlaneWaveModel, fit_hankel_series

log = logging.getLogger(__name__)

CHUNK = 2048


@dataclass(frozen=True)
class MaterialSpec:
    kind: str = "dielectric"  # "dielectric" | "conducting"
    permittivity: float = None

    def __post_init__(self):
        if self.kind not in ("dielectric", "conducting"):
            raise DomainError(f"unknown material kind {self.kind!r}")
        if self.kind == "dielectric":
            if self.permittivity is None or not self.permittivity > 0:
                raise DomainError("dielectric material needs a positive relative permittivity")
        elif self.permittivity is not None:
            raise DomainError("conducting material carries no permittivity")

    @classmethod
    def dielectric(cls, eps):
        return cls("dielectric", float(eps))

    @classmethod
    def conducting(cls):
        return cls("conducting")

    def to_dict(self):
        return {"kind": self.kind, "permittivity": self.permittivity}


@dataclass(frozen=True, eq=False)
class InspectionGrid:
    """Axis-aligned box sampled at cell centres; ``values`` arrays use ``ij`` indexing."""

    bounds: np.ndarray
    resolution: tuple

    def __post_init__(self):
        b = np.array(self.bounds, dtype=float).reshape(-1, 2)
        res = tuple(int(n) for n in np.broadcast_to(self.resolution, (b.shape[0],)))
        if b.shape[0] not in (2, 3):
            raise DomainError("grid must be 2D or 3D")
        if np.any(b[:, 1] <= b[:, 0]):
            raise DomainError("degenerate grid bounds")
        if min(res) < 2:
            raise DomainError("resolution must be at least 2 per axis")
        b.setflags(write=False)
        object.__setattr__(self, "bounds", b)
        object.__setattr__(self, "resolution", res)

    @classmethod
    def default(cls, dim):
        return cls([[-0.1, 0.1]] * dim, 100 if dim == 2 else 41)

    @property
    def dimension(self):
        return self.bounds.shape[0]

    @property
    def shape(self):
        return self.resolution

    @property
    def spacing(self):
        return (self.bounds[:, 1] - self.bounds[:, 0]) / np.array(self.resolution)

    @property
    def cell_volume(self):
        return float(np.prod(self.spacing))

    def axes(self):
        h = self.spacing
        return [lo + (np.arange(n) + 0.5) * hh for (lo, _), n, hh in zip(self.bounds, self.resolution, h)]

    def points(self):
        """Node coordinates, shape (N, d), in the C order of ``values.reshape(-1)``."""
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack([m.reshape(-1) for m in mesh], axis=-1)

    def nearest_index(self, x):
        idx = np.floor((np.asarray(x, float) - self.bounds[:, 0]) / self.spacing).astype(int)
        return tuple(np.clip(idx, 0, np.array(self.resolution) - 1))

    def contains(self, x):
        x = np.asarray(x, float)
        return bool(np.all(x >= self.bounds[:, 0]) and np.all(x <= self.bounds[:, 1]))

    def to_dict(self):
        return {"bounds": self.bounds.tolist(), "resolution": list(self.resolution)}

    def __eq__(self, other):
        return (
            isinstance(other, InspectionGrid)
            and self.resolution == other.resolution
            and np.array_equal(self.bounds, other.bounds)
        )

    __hash__ = None


@dataclass(frozen=True, eq=False)
class ScalarGrid:
    grid: InspectionGrid
    values: np.ndarray
    kind: str  # "TD" | "TE"
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).reshape(self.grid.shape)
        if self.kind not in ("TD", "TE"):
            raise DomainError(f"unknown field kind {self.kind!r}")
        if not np.all(np.isfinite(v)):
            raise DomainError("indicator values must be finite")
        if self.kind == "TE" and np.any(v < 0):
            raise DomainError("topological energy must be nonnegative")
        object.__setattr__(self, "values", v)

    def extremum(self):
        return float(self.values.min() if self.kind == "TD" else self.values.max())

    def extremum_index(self):
        flat = np.argmin(self.values) if self.kind == "TD" else np.argmax(self.values)
        return np.unravel_index(flat, self.grid.shape)

    def extremum_point(self):
        return np.array([ax[i] for ax, i in zip(self.grid.axes(), self.extremum_index())])


# ----------------------------------------------------------------------------
# pointwise formulas


def _kappa_of(model, kappa):
    if kappa is not None:
        return float(kappa)
    k = getattr(model, "kappa", None)
    if k is None:
        raise DomainError("wavenumber required")
    return float(k)


def td_values_2d(u, v, material, kappa):
    prod = np.real(u * np.conj(v))
    if material.kind == "conducting":
        return prod
    return -(kappa**2) * (material.permittivity - 1.0) * prod


def td_values_3d(u, v, material, kappa):
    if material.kind != "dielectric":
        raise DomainError("3D topological derivative is defined for dielectric targets only")
    eps = material.permittivity
    c = (eps - 1.0) / (eps + 2.0)
    return -3.0 * kappa**2 * c * np.real(np.sum(u * np.conj(v), axis=-1))


def te_values(u, v):
    """|U|^2 |V|^2 (Euclidean norms over a trailing vector axis when present)."""
    nu = np.abs(u) ** 2
    nv = np.abs(v) ** 2
    if np.ndim(u) and np.shape(u)[-1:] == (3,) and np.ndim(u) == np.ndim(v):
        nu, nv = nu.sum(-1), nv.sum(-1)
    return nu * nv


def td_point_2d(U, V, material, x, kappa=None):
    """TD of one 2D experiment at ``x`` given incident model ``U`` and adjoint ``V``."""
    k = _kappa_of(V, kappa) if material.kind == "dielectric" else 0.0
    return td_values_2d(U(x), V(x), material, k)


def td_point_3d(U, V, material, kappa, x):
    return td_values_3d(U(x), V(x), material, kappa)


def te_point(U, V, x):
    u, v = U(x), V(x)
    nu = np.abs(u) ** 2
    nv = np.abs(v) ** 2
    if np.ndim(u) > np.ndim(x) - 1:
        nu = nu.sum(-1)
    if np.ndim(v) > np.ndim(x) - 1:
        nv = nv.sum(-1)
    return nu * nv


def asymptotic_factor(eps, dim, kind, kappa=None):
    """Scale function f(eps) of the small-inclusion expansion."""
    if not eps > 0:
        raise DomainError("eps must be positive")
    if dim == 3:
        return 4.0 / 3.0 * np.pi * eps**3
    if dim != 2:
        raise DomainError("dim must be 2 or 3")
    if kind == "dielectric":
        return np.pi * eps**2
    if kind == "conducting":
        if kappa is None or not kappa * eps < 1:
            raise DomainError("2D conducting factor requires kappa*eps < 1")
        return -2.0 * np.pi / np.log(kappa * eps)
    raise DomainError(f"unknown material kind {kind!r}")


# ----------------------------------------------------------------------------
# combination


def _check_same(fields):
    if not fields:
        raise DomainError("at least one field required")
    g, k = fields[0].grid, fields[0].kind
    for f in fields[1:]:
        if f.grid != g or f.kind != k:
            raise GridMismatchError("fields differ in grid or kind")
    return g, k


def combine_emitters(fields):
    """Nodewise mean of single-experiment fields at one frequency."""
    g, kind = _check_same(fields)
    vals = np.mean(np.stack([f.values for f in fields]), axis=0)
    prov = dict(fields[0].provenance)
    prov["emitters"] = sorted({e for f in fields for e in f.provenance.get("emitters", [])})
    return ScalarGrid(g, vals, kind, prov)


def normalizer(f):
    if f.kind == "TD":
        m = float(f.values.min())
        return -m if m < 0 else 0.0
    m = float(f.values.max())
    return m if m > 0 else 0.0


def combine_frequencies(fields, kind=None):
    """Average of per-frequency fields, each scaled so its extremum has magnitude 1."""
    g, k = _check_same(fields)
    if kind is not None and kind != k:
        raise GridMismatchError(f"fields are {k}, not {kind}")
    total = np.zeros(g.shape)
    for i, f in enumerate(fields):
        n = normalizer(f)
        if n == 0.0:
            what = "negative minimum" if k == "TD" else "positive maximum"
            raise ZeroNormalizerError(f"frequency index {i}: field has no {what}", index=i)
        total += f.values / n
    prov = dict(fields[0].provenance)
    prov["frequencies_hz"] = [x for f in fields for x in f.provenance.get("frequencies_hz", [])]
    return ScalarGrid(g, total / len(fields), k, prov)


# ----------------------------------------------------------------------------
# grid evaluation


def _incident_2d(rec, layout, kappa, incident, n_modes):
    xe = layout.emitter_point(rec.emitter)
    pts = layout.receiver_points(rec.emitter)[rec.receivers]
    front = int(np.argmax(np.linalg.norm(pts - xe, axis=1)))
    if incident == "isotropic":
        return IsotropicModel.anchored(xe, kappa, pts[front], rec.incident[front])
    if incident == "plane":
        return PlaneWaveModel.toward(xe, pts[front], kappa, pts[front], rec.incident[front])
    if incident == "hankel":
        return fit_hankel_series(pts, rec.incident, xe, kappa, n_modes)
    raise DomainError(f"unknown incident model {incident!r}")


def _incident_3d(rec, layout, kappa):
    xe = layout.emitter_point(rec.emitter)
    u = xe / np.linalg.norm(xe)
    return PlaneWave3D(layout.emitter_polarization(rec.emitter, rec.pol), u, kappa)


def _experiment_setup(dataset, freq, emitters, pol, incident, n_modes):
    """Incident models and the residual matrix over the union of receiver points."""
    lay = dataset.layout
    kappa = float(dataset.sweep.wavenumbers[freq])
    dim = dataset.dimension
    rows, cols, vals, models = [], [], [], []
    table = {}
    pts_all, dirs_all = [], []
    for col, e in enumerate(emitters):
        key = (e, freq, pol)
        if key not in dataset.records:
            raise DomainError(f"missing record {key}")
        rec = dataset.records[key]
        pts = lay.receiver_points(e)[rec.receivers]
        dirs = lay.receiver_directions(e)
        dirs = None if dirs is None else dirs[rec.receivers]
        for j in range(pts.shape[0]):
            tag = tuple(np.round(pts[j], 12)) + (() if dirs is None else tuple(np.round(dirs[j], 12)))
            if tag not in table:
                table[tag] = len(pts_all)
                pts_all.append(pts[j])
                if dirs is not None:
                    dirs_all.append(dirs[j])
            rows.append(table[tag])
            cols.append(col)
        vals.append(rec.residuals)
        models.append(_incident_3d(rec, lay, kappa) if dim == 3 else _incident_2d(rec, lay, kappa, incident, n_modes))
    R = np.zeros((len(pts_all), len(emitters)), dtype=complex)
    np.add.at(R, (np.array(rows), np.array(cols)), np.concatenate(vals))
    return kappa, np.array(pts_all), (np.array(dirs_all) if dirs_all else None), R, models


def _chunk_values(x, kappa, pts, dirs, R, models, material, kind, dim):
    if dim == 2:
        V = helmholtz_kernel(kappa, x, pts) @ R
        U = np.stack([m(x) for m in models], axis=1)
        per = te_values(U, V) if kind == "TE" else td_values_2d(U, V, material, kappa)
    else:
        K = dipole_kernel(kappa, x, pts, dirs)
        V = np.einsum("nmk,me->nek", K, R)
        U = np.stack([m(x) for m in models], axis=1)
        if kind == "TE":
            per = (np.abs(U) ** 2).sum(-1) * (np.abs(V) ** 2).sum(-1)
        else:
            per = td_values_3d(U, V, material, kappa)
    return per.mean(axis=1)


def frequency_field(
    dataset, material, grid, freq, emitters=None, kind="TD", incident="isotropic",
    n_modes=14, pol=None, workers=1, chunk=CHUNK,
):
    """Emitter-averaged field for one frequency index.

    Nodes are processed in fixed-size chunks so the result is bitwise
    independent of ``workers``.
    """
    if kind not in ("TD", "TE"):
        raise DomainError(f"unknown field kind {kind!r}")
    dim = dataset.dimension
    if grid.dimension != dim:
        raise GridMismatchError("grid and dataset dimensions differ")
    if pol is None:
        pol = "-" if dim == 2 else "PP"
    if emitters is None:
        emitters = sorted({r.emitter for r in dataset if r.freq == freq and r.pol == pol})
    emitters = list(emitters)
    if not emitters:
        raise DomainError(f"no records for frequency index {freq}")
    if kind == "TD" and dim == 3 and material.kind != "dielectric":
        raise DomainError("3D topological derivative is defined for dielectric targets only")

    kappa, pts, dirs, R, models = _experiment_setup(dataset, freq, emitters, pol, incident, n_modes)
    x = grid.points()
    starts = range(0, x.shape[0], chunk)

    def work(s):
        return _chunk_values(x[s:s + chunk], kappa, pts, dirs, R, models, material, kind, dim)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(work, starts))
    else:
        parts = [work(s) for s in starts]
    vals = np.concatenate(parts)
    if kind == "TE":
        vals = np.maximum(vals, 0.0)
    prov = {
        "emitters": emitters,
        "frequencies_hz": [float(dataset.sweep.values[freq])],
        "frequency_ids": [int(freq)],
        "dataset": dataset.meta.get("id"),
        "material": material.to_dict(),
        "incident": incident if dim == 2 else "plane3d",
    }
    return ScalarGrid(grid, vals, kind, prov)


def evaluate_grid(
    dataset, material, grid=None, emitters=None, frequencies=None, kind="TD",
    incident="isotropic", n_modes=14, reciprocity=False, workers=1, pol=None,
):
    """Multi-frequency TD or TE field over ``grid``.

    ``frequencies`` are sweep indices (default: all). With ``reciprocity``
    the 3D dataset is first re-indexed by :func:`~topoimg.dataset.reciprocity_swap`.
    """
    from .dataset import CONVENTION_MINUS, reciprocity_swap

    if dataset.convention != CONVENTION_MINUS:
        raise DomainError("dataset must be in the exp(-iwt) working convention")
    if reciprocity:
        dataset = reciprocity_swap(dataset)
        emitters = None
    if grid is None:
        grid = InspectionGrid.default(dataset.dimension)
    if frequencies is None:
        frequencies = sorted({r.freq for r in dataset})
    fields = [
        frequency_field(dataset, material, grid, f, emitters, kind, incident, n_modes, pol, workers)
        for f in frequencies
    ]
    out = combine_frequencies(fields, kind)
    out.provenance["reciprocity"] = bool(reciprocity)
    return out


def residual_set(dataset, emitter, freq, pol=None):
    """:class:`ResidualSet` of one record, for pointwise evaluation."""
    if pol is None:
        pol = "-" if dataset.dimension == 2 else "PP"
    rec = dataset.records[(emitter, freq, pol)]
    lay = dataset.layout
    pts = lay.receiver_points(emitter)[rec.receivers]
    dirs = lay.receiver_directions(emitter)
    return ResidualSet(
        pts, rec.residuals, float(dataset.sweep.wavenumbers[freq]),
        None if dirs is None else dirs[rec.receivers],
    )


def incident_model(dataset, emitter, freq, incident="isotropic", n_modes=14, pol=None):
    if pol is None:
        pol = "-" if dataset.dimension == 2 else "PP"
    rec = dataset.records[(emitter, freq, pol)]
    kappa = float(dataset.sweep.wavenumbers[freq])
    if dataset.dimension == 3:
        return _incident_3d(rec, dataset.layout, kappa)
    return _incident_2d(rec, dataset.layout, kappa, incident, n_modes)


# ----------------------------------------------------------------------------
# output


def write_grid(sg, prefix):
    """Write ``<prefix>.csv`` (coordinates, value) and ``<prefix>.json`` sidecar.

    Returns the two paths.
    """
    pts = sg.grid.points()
    names = ["x", "y", "z"][: sg.grid.dimension]
    csv_path, json_path = f"{prefix}.csv", f"{prefix}.json"
    with open(csv_path, "w") as fh:
        fh.write(",".join(names + ["value"]) + "\n")
        for p, v in zip(pts, sg.values.reshape(-1)):
            fh.write(",".join(repr(float(c)) for c in p) + f",{float(v)!r}\n")
    side = {
        **sg.grid.to_dict(),
        "kind": sg.kind,
        "provenance": sg.provenance,
        "min": float(sg.values.min()),
        "max": float(sg.values.max()),
        "extremum_point": sg.extremum_point().tolist(),
    }
    with open(json_path, "w") as fh:
        json.dump(side, fh, indent=2, sort_keys=True)
    return csv_path, json_path


def read_grid(prefix):
    with open(f"{prefix}.json") as fh:
        side = json.load(fh)
    grid = InspectionGrid(side["bounds"], side["resolution"])
    data = np.loadtxt(f"{prefix}.csv", delimiter=",", skiprows=1, ndmin=2)
    return ScalarGrid(grid, data[:, -1], side["kind"], side.get("provenance", {}))


def _colormap(t):
    """Blue (-1) to white (0) to red (+1)."""
    t = np.clip(t, -1.0, 1.0)
    r = np.where(t < 0, 1.0 + t, 1.0)
    g = 1.0 - np.abs(t)
    b = np.where(t > 0, 1.0 - t, 1.0)
    return (np.stack([r, g, b], axis=-1) * 255.0 + 0.5).astype(np.uint8)


def write_ppm(sg, path):
    """Binary PPM heatmap; 3D fields are sliced in z through the extremum node.

    Returns the colour-scale metadata written alongside the other outputs.
    """
    vals = sg.values
    info = {}
    if sg.grid.dimension == 3:
        kz = int(sg.extremum_index()[2])
        vals = vals[:, :, kz]
        info["z_slice_index"] = kz
        info["z_slice"] = float(sg.grid.axes()[2][kz])
    scale = float(np.max(np.abs(vals))) or 1.0
    img = _colormap(vals / scale)  # (nx, ny, 3)
    img = np.transpose(img, (1, 0, 2))[::-1]  # rows = y descending
    h, w = img.shape[:2]
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        fh.write(img.tobytes())
    info.update({"colormap": "blue-white-red", "vmin": -scale, "vmax": scale})
    return info
