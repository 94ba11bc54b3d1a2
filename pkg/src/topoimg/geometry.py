"""Antenna layouts, spherical frames and frequency sweeps.

Angles are kept in degrees inside layouts and converted to radians only where
trigonometric functions are evaluated. Emitter and receiver ids used by
datasets are 0-based; the helpers that mirror the measurement-setup
notation (``receiver_position_2d``, ``positions_3d``) take 1-based indices.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError

MU0 = 4e-7 * np.pi
EPS0 = 8.8541878128e-12


def wavenumber(frequency_hz):
    """Vacuum wavenumber 2*pi*nu*sqrt(mu0*eps0) in rad/m."""
    return 2.0 * np.pi * np.asarray(frequency_hz, dtype=float) * np.sqrt(MU0 * EPS0)


def spherical_frame(theta, phi):
    """Unit vectors ``(u_r, u_theta, u_phi)`` at azimuth ``theta``, altitude ``phi`` (degrees).

    ``phi`` is measured from the +z axis. Inputs broadcast; each output has a
    trailing axis of length 3.
    """
    t = np.deg2rad(np.mod(theta, 360.0))
    p = np.deg2rad(phi)
    t, p = np.broadcast_arrays(t, p)
    ct, st, cp, sp = np.cos(t), np.sin(t), np.cos(p), np.sin(p)
    zero = np.zeros_like(t)
    u_r = np.stack([ct * sp, st * sp, cp], axis=-1)
    u_theta = np.stack([-st, ct, zero], axis=-1)
    u_phi = np.stack([ct * cp, st * cp, -sp], axis=-1)
    return u_r, u_theta, u_phi


@dataclass(frozen=True)
class FrequencySweep:
    values: np.ndarray  # Hz

    def __post_init__(self):
        v = np.array(self.values, dtype=float).reshape(-1)
        if v.size and (np.any(v <= 0) or np.any(np.diff(v) <= 0)):
            raise DomainError("frequencies must be positive and strictly increasing")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_ghz(cls, ghz):
        return cls(np.asarray(ghz, dtype=float) * 1e9)

    @property
    def wavenumbers(self):
        return wavenumber(self.values)

    def __len__(self):
        return self.values.size

    def index_of(self, frequency_hz, rtol=1e-6):
        d = np.abs(self.values - frequency_hz)
        i = int(np.argmin(d)) if d.size else -1
        if i < 0 or d[i] > rtol * abs(frequency_hz):
            raise DomainError(f"frequency {frequency_hz} Hz not in sweep")
        return i

    def __eq__(self, other):
        return isinstance(other, FrequencySweep) and np.array_equal(self.values, other.values)

    def __hash__(self):
        return hash(self.values.tobytes())


def _angle_index(angles, value, tol):
    d = np.abs((np.asarray(angles) - value + 180.0) % 360.0 - 180.0)
    i = int(np.argmin(d))
    if d[i] > tol:
        return None
    return i


@dataclass(frozen=True)
class Layout2D:
    """Circular emitter/receiver arrangement of the 2D (TM) setup."""

    emitter_radius: float = 0.76
    receiver_radius: float = 0.72
    emitter_azimuths: tuple = tuple(float(a) for a in range(0, 360, 10))
    receiver_offsets: tuple = tuple(float(a) for a in range(60, 301, 5))

    dimension = 2

    def __post_init__(self):
        object.__setattr__(self, "emitter_azimuths", tuple(float(a) for a in self.emitter_azimuths))
        object.__setattr__(self, "receiver_offsets", tuple(float(a) for a in self.receiver_offsets))
        if self.emitter_radius <= 0 or self.receiver_radius <= 0:
            raise DomainError("radii must be positive")
        if any(not (0.0 < o < 360.0) for o in self.receiver_offsets):
            raise DomainError("receiver offsets must lie strictly inside (0, 360) degrees")

    @property
    def n_emitters(self):
        return len(self.emitter_azimuths)

    @property
    def n_receivers(self):
        return len(self.receiver_offsets)

    def emitter_point(self, e):
        return emitter_position_2d(self, self.emitter_azimuths[e])

    def receiver_points(self, e):
        a = np.deg2rad(self.emitter_azimuths[e] + np.asarray(self.receiver_offsets))
        return self.receiver_radius * np.stack([np.cos(a), np.sin(a)], axis=-1)

    def receiver_directions(self, e):
        return None

    def emitter_polarization(self, e, pol="-"):
        return None

    def emitter_index(self, azimuth, tol=1e-9):
        return _angle_index(self.emitter_azimuths, azimuth, tol)

    def receiver_index(self, offset, tol=1e-9):
        return _angle_index(self.receiver_offsets, offset, tol)

    def to_dict(self):
        return {
            "type": "circular2d",
            "emitter_radius": self.emitter_radius,
            "receiver_radius": self.receiver_radius,
            "emitter_azimuths": list(self.emitter_azimuths),
            "receiver_offsets": list(self.receiver_offsets),
        }


def emitter_position_2d(layout, azimuth):
    if layout.emitter_index(azimuth) is None:
        raise DomainError(f"azimuth {azimuth} is not an emitter azimuth of the layout")
    a = np.deg2rad(azimuth)
    return layout.emitter_radius * np.array([np.cos(a), np.sin(a)])


def receiver_position_2d(layout, emitter_azimuth, offset_index):
    """Receiver ``offset_index`` (1-based) for the emitter at ``emitter_azimuth``."""
    if not 1 <= offset_index <= layout.n_receivers:
        raise DomainError(f"offset index {offset_index} out of range 1..{layout.n_receivers}")
    a = np.deg2rad(emitter_azimuth + layout.receiver_offsets[offset_index - 1])
    return layout.receiver_radius * np.array([np.cos(a), np.sin(a)])


@dataclass(frozen=True)
class Layout3D:
    """Spherical emitter positions with receivers on the horizontal circle.

    Emitter id ``e`` maps to azimuth index ``e // n_altitudes`` and altitude
    index ``e % n_altitudes``. Receiver azimuths follow the emitter azimuth
    at fixed offsets (50..310 degrees, step 10, by default).
    """

    sphere_radius: float = 1.796
    emitter_azimuths: tuple = tuple(float(a) for a in range(40, 361, 40))
    emitter_altitudes: tuple = tuple(float(a) for a in range(18, 163, 18))
    receiver_offsets: tuple = tuple(float(a) for a in range(50, 311, 10))
    receiver_altitude: float = 90.0

    dimension = 3

    def __post_init__(self):
        for name in ("emitter_azimuths", "emitter_altitudes", "receiver_offsets"):
            object.__setattr__(self, name, tuple(float(a) for a in getattr(self, name)))
        if self.sphere_radius <= 0:
            raise DomainError("sphere radius must be positive")

    @property
    def n_emitters(self):
        return len(self.emitter_azimuths) * len(self.emitter_altitudes)

    @property
    def n_receivers(self):
        return len(self.receiver_offsets)

    def emitter_angles(self, e):
        na = len(self.emitter_altitudes)
        return self.emitter_azimuths[e // na], self.emitter_altitudes[e % na]

    def emitter_id(self, p, q):
        """Emitter id from 1-based azimuth index ``p`` and altitude index ``q``."""
        if not (1 <= p <= len(self.emitter_azimuths) and 1 <= q <= len(self.emitter_altitudes)):
            raise DomainError(f"emitter index (p={p}, q={q}) out of range")
        return (p - 1) * len(self.emitter_altitudes) + (q - 1)

    def emitter_point(self, e):
        t, p = self.emitter_angles(e)
        return self.sphere_radius * spherical_frame(t, p)[0]

    def emitter_polarization(self, e, pol="PP"):
        t, p = self.emitter_angles(e)
        _, u_theta, u_phi = spherical_frame(t, p)
        if pol == "PP":
            return u_phi
        if pol == "TP":
            return u_theta
        raise DomainError(f"unknown polarization {pol!r}")

    def receiver_points(self, e):
        t, _ = self.emitter_angles(e)
        u_r = spherical_frame(t + np.asarray(self.receiver_offsets), self.receiver_altitude)[0]
        return self.sphere_radius * u_r

    def receiver_directions(self, e):
        # samples are stored as the k component
        d = np.zeros((self.n_receivers, 3))
        d[:, 2] = 1.0
        return d

    def emitter_index(self, azimuth, altitude, tol=1e-9):
        i = _angle_index(self.emitter_azimuths, azimuth, tol)
        j = _angle_index(self.emitter_altitudes, altitude, tol)
        if i is None or j is None:
            return None
        return i * len(self.emitter_altitudes) + j

    def receiver_index(self, offset, tol=1e-9):
        return _angle_index(self.receiver_offsets, offset, tol)

    def to_dict(self):
        return {
            "type": "spherical3d",
            "sphere_radius": self.sphere_radius,
            "emitter_azimuths": list(self.emitter_azimuths),
            "emitter_altitudes": list(self.emitter_altitudes),
            "receiver_offsets": list(self.receiver_offsets),
            "receiver_altitude": self.receiver_altitude,
        }


def positions_3d(layout, p, q, pol=None):
    """Emitter point, receiver points and the PP/TP polarizations for indices ``(p, q)``.

    Returns ``(emitter, receivers, p_pp, p_tp)``.
    """
    e = layout.emitter_id(p, q)
    t, ph = layout.emitter_angles(e)
    _, u_theta, u_phi = spherical_frame(t, ph)
    return layout.emitter_point(e), layout.receiver_points(e), u_phi, u_theta


@dataclass(frozen=True, eq=False)
class PointLayout3D:
    """Explicit 3D source/measurement geometry.

    Produced by the reciprocity swap: sources carry their own polarization and
    every record's receiver ids index the shared measurement-point table.
    """

    sources: np.ndarray
    source_polarizations: np.ndarray
    receivers: np.ndarray
    receiver_dirs: np.ndarray = field(default=None)

    dimension = 3

    def __post_init__(self):
        for name in ("sources", "source_polarizations", "receivers", "receiver_dirs"):
            a = np.array(getattr(self, name), dtype=float).reshape(-1, 3)
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    @property
    def n_emitters(self):
        return self.sources.shape[0]

    @property
    def n_receivers(self):
        return self.receivers.shape[0]

    def emitter_point(self, e):
        return self.sources[e]

    def emitter_polarization(self, e, pol="PP"):
        return self.source_polarizations[e]

    def receiver_points(self, e):
        return self.receivers

    def receiver_directions(self, e):
        return self.receiver_dirs

    def to_dict(self):
        return {
            "type": "points3d",
            "sources": self.sources.tolist(),
            "source_polarizations": self.source_polarizations.tolist(),
            "receivers": self.receivers.tolist(),
            "receiver_dirs": self.receiver_dirs.tolist(),
        }

    def __eq__(self, other):
        return isinstance(other, PointLayout3D) and all(
            np.array_equal(getattr(self, n), getattr(other, n))
            for n in ("sources", "source_polarizations", "receivers", "receiver_dirs")
        )

    __hash__ = None


def layout_from_dict(d):
    d = dict(d)
    kind = d.pop("type")
    if kind == "circular2d":
        return Layout2D(**d)
    if kind == "spherical3d":
        return Layout3D(**d)
    if kind == "points3d":
        return PointLayout3D(**d)
    raise DomainError(f"unknown layout type {kind!r}")
