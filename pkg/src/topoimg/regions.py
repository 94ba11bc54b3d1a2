"""Level-set supports of indicator fields and their scoring against known shapes."""

import json
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import DomainError, ParseError
from .topofield import InspectionGrid


@dataclass(frozen=True, eq=False)
class RegionMask:
    grid: InspectionGrid
    membership: np.ndarray
    lam: float
    mode: str  # "min-side" (TD) | "max-side" (TE)
    extremum: float

    def __post_init__(self):
        m = np.asarray(self.membership, dtype=bool).reshape(self.grid.shape)
        if not 0.0 <= self.lam <= 1.0:
            raise DomainError("lambda must lie in [0, 1]")
        if self.mode not in ("min-side", "max-side"):
            raise DomainError(f"unknown mask mode {self.mode!r}")
        object.__setattr__(self, "membership", m)

    @property
    def count(self):
        return int(self.membership.sum())

    def points(self):
        return self.grid.points()[self.membership.reshape(-1)]

    def __eq__(self, other):
        return (
            isinstance(other, RegionMask)
            and self.grid == other.grid
            and np.array_equal(self.membership, other.membership)
        )

    __hash__ = None


def extract(sg, lam):
    """Nodes with TD <= lam * min (min < 0) or TE >= lam * max (max > 0)."""
    lam = float(lam)
    if not 0.0 <= lam <= 1.0:
        raise DomainError("lambda must lie in [0, 1]")
    v = sg.values
    if sg.kind == "TD":
        m = float(v.min())
        if not m < 0:
            raise DomainError("no negative values, nothing to reconstruct")
        return RegionMask(sg.grid, v <= lam * m, lam, "min-side", m)
    m = float(v.max())
    if not m > 0:
        raise DomainError("no positive values, nothing to reconstruct")
    return RegionMask(sg.grid, v >= lam * m, lam, "max-side", m)


@dataclass(frozen=True)
class ShapeTruth:
    """Ground-truth primitives: dicts with ``type`` disk/ball, box or point."""

    primitives: tuple = field(default_factory=tuple)

    def __post_init__(self):
        prims = tuple(dict(p) for p in self.primitives)
        for p in prims:
            if p.get("type") not in ("disk", "ball", "box", "point"):
                raise DomainError(f"unknown primitive type {p.get('type')!r}")
        object.__setattr__(self, "primitives", prims)

    @classmethod
    def from_json(cls, path):
        with open(path) as fh:
            items = json.load(fh)
        if isinstance(items, dict):
            items = items.get("shapes", [])
        return cls(tuple(items))

    def check_inside(self, grid):
        for p in self.primitives:
            if p["type"] in ("disk", "ball"):
                c = np.asarray(p["center"], float)
                lo, hi = c - p["radius"], c + p["radius"]
            elif p["type"] == "box":
                lo = np.asarray(p["corner"], float)
                hi = lo + np.asarray(p["extents"], float)
            else:
                lo = hi = np.asarray(p["location"], float)
            if not (grid.contains(lo) and grid.contains(hi)):
                raise DomainError(f"{p['type']} primitive extends outside the inspection region")

    def rasterize(self, grid):
        """Cells whose centre lies inside some primitive; a point marks its nearest cell."""
        pts = grid.points()
        inside = np.zeros(pts.shape[0], dtype=bool)
        for p in self.primitives:
            t = p["type"]
            if t in ("disk", "ball"):
                c = np.asarray(p["center"], float)
                inside |= np.linalg.norm(pts - c, axis=1) <= p["radius"]
            elif t == "box":
                lo = np.asarray(p["corner"], float)
                hi = lo + np.asarray(p["extents"], float)
                inside |= np.all((pts >= lo) & (pts <= hi), axis=1)
            else:
                idx = grid.nearest_index(p["location"])
                inside[np.ravel_multi_index(idx, grid.shape)] = True
        return inside.reshape(grid.shape)

    def centroid(self, grid):
        pts = [np.asarray(p["location"], float) for p in self.primitives if p["type"] == "point"]
        if pts and len(pts) == len(self.primitives):
            return np.mean(pts, axis=0)
        r = self.rasterize(grid)
        if not r.any():
            raise DomainError("truth does not cover any grid cell")
        return grid.points()[r.reshape(-1)].mean(axis=0)


def score(mask, truth):
    """Jaccard index, centroids, offset, component count and measure of a mask."""
    if mask.count == 0:
        raise DomainError("empty mask")
    g = mask.grid
    t = truth.rasterize(g)
    m = mask.membership
    union = np.logical_or(m, t).sum()
    jac = float(np.logical_and(m, t).sum() / union) if union else 0.0
    c = g.points()[m.reshape(-1)].mean(axis=0)
    tc = truth.centroid(g)
    structure = ndimage.generate_binary_structure(g.dimension, 1)
    _, ncomp = ndimage.label(m, structure=structure)
    return {
        "jaccard": jac,
        "centroid": c.tolist(),
        "truth_centroid": tc.tolist(),
        "centroid_offset_m": float(np.linalg.norm(c - tc)),
        "components": int(ncomp),
        "measure": float(mask.count * g.cell_volume),
        "measure_unit": "m^2" if g.dimension == 2 else "m^3",
        "nodes": mask.count,
        "lambda": mask.lam,
    }


def write_mask(mask, path):
    """CSV of member node coordinates, preceded by a comment header describing the grid."""
    names = ["x", "y", "z"][: mask.grid.dimension]
    head = {**mask.grid.to_dict(), "lambda": mask.lam, "mode": mask.mode, "extremum": mask.extremum}
    with open(path, "w") as fh:
        fh.write("# " + json.dumps(head, sort_keys=True) + "\n")
        fh.write(",".join(names) + "\n")
        for p in mask.points():
            fh.write(",".join(repr(float(v)) for v in p) + "\n")


def read_mask(path):
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or not lines[0].startswith("# "):
        raise ParseError("missing mask header", 1)
    try:
        head = json.loads(lines[0][2:])
        grid = InspectionGrid(head["bounds"], head["resolution"])
    except (ValueError, KeyError) as exc:
        raise ParseError(f"bad mask header: {exc}", 1)
    member = np.zeros(grid.shape, dtype=bool)
    for n, line in enumerate(lines[2:], start=3):
        if not line.strip():
            continue
        try:
            p = [float(v) for v in line.split(",")]
        except ValueError:
            raise ParseError("malformed coordinate", n)
        if len(p) != grid.dimension:
            raise ParseError(f"expected {grid.dimension} coordinates", n)
        member[grid.nearest_index(p)] = True
    return RegionMask(grid, member, float(head.get("lambda", 1.0)), head.get("mode", "min-side"),
                      float(head.get("extremum", 0.0)))
