"""Measurement datasets: parsing, sign convention, validation and canonical I/O.

A :class:`Dataset` stores one :class:`Record` per (emitter, frequency,
polarization) key. Samples are complex incident/total field values at the
record's receivers; in 3D they are the vertical (k) components.

Canonical file layout (text, UTF-8)::

    #topoimg-dataset v1
    #dimension<TAB>2
    #convention<TAB>exp(-iwt)
    #layout<TAB>{json}
    #frequencies_hz<TAB>[json]
    #meta<TAB>{json}
    emitter_id<TAB>freq_id<TAB>recv_id<TAB>pol<TAB>inc_re<TAB>inc_im<TAB>tot_re<TAB>tot_im
    ...
    #crc32 <hex of zlib.crc32 over the body bytes>
"""

import io
import json
import zlib
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ChecksumError, DomainError, FormatVersionError, ParseError
from .geometry import FrequencySweep, Layout2D, Layout3D, PointLayout3D, layout_from_dict

CONVENTION_MINUS = "exp(-iwt)"
CONVENTION_PLUS = "exp(+iwt)"
FORMAT_TAG = "#topoimg-dataset v1"
BODY_HEADER = "emitter_id\tfreq_id\trecv_id\tpol\tinc_re\tinc_im\ttot_re\ttot_im"


@dataclass(frozen=True, eq=False)
class Record:
    emitter: int
    freq: int
    receivers: np.ndarray
    incident: np.ndarray
    total: np.ndarray
    pol: str = "-"

    def __post_init__(self):
        r = np.array(self.receivers, dtype=np.int64).reshape(-1)
        inc = np.array(self.incident, dtype=complex).reshape(-1)
        tot = np.array(self.total, dtype=complex).reshape(-1)
        if not (r.size == inc.size == tot.size):
            raise DomainError("receiver, incident and total arrays differ in length")
        if np.unique(r).size != r.size:
            raise DomainError("duplicate receiver ids in record")
        for a in (r, inc, tot):
            a.setflags(write=False)
        object.__setattr__(self, "receivers", r)
        object.__setattr__(self, "incident", inc)
        object.__setattr__(self, "total", tot)

    @property
    def key(self):
        return (self.emitter, self.freq, self.pol)

    @property
    def residuals(self):
        """Incident minus measured, the adjoint source weights."""
        return self.incident - self.total

    def __eq__(self, other):
        if not isinstance(other, Record):
            return NotImplemented
        return (
            self.key == other.key
            and np.array_equal(self.receivers, other.receivers)
            and _bits_equal(self.incident, other.incident)
            and _bits_equal(self.total, other.total)
        )

    __hash__ = None


def _bits_equal(a, b):
    return a.shape == b.shape and a.tobytes() == b.tobytes()


@dataclass(frozen=True, eq=False)
class Dataset:
    dimension: int
    layout: object
    sweep: FrequencySweep
    records: dict = field(default_factory=dict)
    convention: str = CONVENTION_MINUS
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.dimension not in (2, 3):
            raise DomainError("dimension must be 2 or 3")
        if self.convention not in (CONVENTION_MINUS, CONVENTION_PLUS):
            raise DomainError(f"unknown time convention {self.convention!r}")
        recs = {}
        for rec in self.records.values() if isinstance(self.records, dict) else self.records:
            if rec.key in recs:
                raise DomainError(f"duplicate record key {rec.key}")
            recs[rec.key] = rec
        object.__setattr__(self, "records", dict(sorted(recs.items())))

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records.values())

    def get(self, emitter, freq, pol=None):
        if pol is None:
            pol = "-" if self.dimension == 2 else "PP"
        return self.records[(emitter, freq, pol)]

    def with_records(self, records, **changes):
        return replace(self, records=list(records), **changes)

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.dimension == other.dimension
            and self.convention == other.convention
            and self.layout == other.layout
            and self.sweep == other.sweep
            and self.meta == other.meta
            and list(self.records) == list(other.records)
            and all(a == b for a, b in zip(self.records.values(), other.records.values()))
        )

    __hash__ = None


def to_working_convention(d):
    """Return the dataset in the exp(-iwt) convention, conjugating samples if needed."""
    if d.convention == CONVENTION_MINUS:
        return d
    recs = [replace(r, incident=np.conj(r.incident), total=np.conj(r.total)) for r in d]
    return d.with_records(recs, convention=CONVENTION_MINUS)


# ----------------------------------------------------------------------------
# columnar parsing

ROLES = {
    "emitter_angle_deg",
    "emitter_azimuth_deg",
    "emitter_altitude_deg",
    "receiver_angle_deg",
    "receiver_offset_deg",
    "frequency_ghz",
    "frequency_hz",
    "total_re",
    "total_im",
    "incident_re",
    "incident_im",
    "polarization",
    "skip",
}


@dataclass(frozen=True)
class ColumnMapping:
    """How the whitespace-separated columns of a measurement file map to roles.

    ``receiver_angle_deg`` is an absolute azimuth; ``receiver_offset_deg`` is
    measured from the emitter azimuth. Angles are snapped to the layout grid
    when within ``angle_tol`` degrees.
    """

    columns: tuple
    comment_prefix: str = "#"
    angle_tol: float = 1.0
    convention: str = CONVENTION_MINUS
    polarization: str = "PP"
    delimiter: str = None

    def __post_init__(self):
        cols = tuple(self.columns)
        object.__setattr__(self, "columns", cols)
        unknown = set(cols) - ROLES
        if unknown:
            raise DomainError(f"unknown column roles {sorted(unknown)}")
        for role in cols:
            if role != "skip" and cols.count(role) > 1:
                raise DomainError(f"role {role!r} mapped to more than one column")
        missing = {"total_re", "total_im", "incident_re", "incident_im"} - set(cols)
        if missing:
            raise DomainError(f"missing required roles {sorted(missing)}")
        if not ({"frequency_ghz", "frequency_hz"} & set(cols)):
            raise DomainError("a frequency column is required")
        if not ({"receiver_angle_deg", "receiver_offset_deg"} & set(cols)):
            raise DomainError("a receiver angle column is required")

    def check_tolerance(self, layout):
        steps = []
        for name in ("emitter_azimuths", "emitter_altitudes", "receiver_offsets"):
            a = np.sort(np.asarray(getattr(layout, name, ()), dtype=float))
            if a.size > 1:
                steps.append(np.min(np.diff(a)))
        if steps and self.angle_tol >= 0.5 * min(steps):
            raise DomainError("angle tolerance must be below half the smallest angular step")


# Best-effort presets. The internal column layout of the original measurement
# files is not documented alongside the data used here; verify against real files.
PRESETS = {
    "fresnel2d": ColumnMapping(
        columns=(
            "emitter_angle_deg", "receiver_angle_deg", "frequency_ghz",
            "total_re", "total_im", "incident_re", "incident_im",
        ),
        comment_prefix="#",
        angle_tol=1.0,
        convention=CONVENTION_PLUS,
    ),
    "fresnel3d": ColumnMapping(
        columns=(
            "frequency_ghz", "emitter_azimuth_deg", "emitter_altitude_deg", "receiver_angle_deg",
            "total_re", "total_im", "incident_re", "incident_im",
        ),
        comment_prefix="#",
        angle_tol=2.0,
        convention=CONVENTION_MINUS,
        polarization="PP",
    ),
}


def parse_columnar(text, mapping, layout, sweep=None):
    """Parse a line-oriented measurement file into a :class:`Dataset`.

    ``text`` may be ``str``, ``bytes`` or a file object. Every line is either a
    comment, blank, or a data row; anything else raises :class:`ParseError`
    carrying the line number. When ``sweep`` is None it is built from the
    frequencies encountered.
    """
    if hasattr(text, "read"):
        text = text.read()
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    mapping.check_tolerance(layout)
    dim = layout.dimension
    col = {role: i for i, role in enumerate(mapping.columns) if role != "skip"}
    ncol = len(mapping.columns)

    rows = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        s = line.strip()
        if not s or (mapping.comment_prefix and s.startswith(mapping.comment_prefix)):
            continue
        parts = s.split(mapping.delimiter)
        if len(parts) < ncol:
            raise ParseError(f"expected {ncol} columns, found {len(parts)}", lineno)
        vals = {}
        for role, i in col.items():
            if role == "polarization":
                vals[role] = parts[i].upper()
                continue
            try:
                vals[role] = float(parts[i])
            except ValueError:
                raise ParseError(f"malformed number {parts[i]!r} in column {i + 1} ({role})", lineno)
        rows.append((lineno, vals))

    def freq_of(v):
        return v["frequency_hz"] if "frequency_hz" in v else v["frequency_ghz"] * 1e9

    if sweep is None:
        sweep = FrequencySweep(np.unique([freq_of(v) for _, v in rows]))

    groups = {}
    for lineno, v in rows:
        e, r, emitter_az = _resolve_antennas(v, layout, mapping, lineno)
        try:
            f = sweep.index_of(freq_of(v))
        except DomainError as exc:
            raise ParseError(str(exc), lineno)
        pol = "-" if dim == 2 else v.get("polarization", mapping.polarization)
        key = (e, f, pol)
        g = groups.setdefault(key, {})
        if r in g:
            raise ParseError(f"duplicate (emitter, frequency, receiver) triple {(e, f, r)}", lineno)
        g[r] = (
            complex(v["incident_re"], v["incident_im"]),
            complex(v["total_re"], v["total_im"]),
        )

    records = []
    for (e, f, pol), g in groups.items():
        ids = sorted(g)
        records.append(
            Record(e, f, ids, [g[i][0] for i in ids], [g[i][1] for i in ids], pol=pol)
        )
    return Dataset(dim, layout, sweep, records, convention=mapping.convention)


def _resolve_antennas(v, layout, mapping, lineno):
    tol = mapping.angle_tol
    if layout.dimension == 2:
        if "emitter_angle_deg" not in v:
            raise ParseError("2D mapping needs an emitter_angle_deg column", lineno)
        az = v["emitter_angle_deg"]
        e = layout.emitter_index(az, tol)
        if e is None:
            raise ParseError(f"unmappable angle: emitter {az} deg", lineno)
    else:
        if "emitter_azimuth_deg" not in v or "emitter_altitude_deg" not in v:
            raise ParseError("3D mapping needs emitter azimuth and altitude columns", lineno)
        az = v["emitter_azimuth_deg"]
        e = layout.emitter_index(az, v["emitter_altitude_deg"], tol)
        if e is None:
            raise ParseError(
                f"unmappable angle: emitter ({az}, {v['emitter_altitude_deg']}) deg", lineno
            )
        az = layout.emitter_angles(e)[0]
    if "receiver_offset_deg" in v:
        off = v["receiver_offset_deg"]
    else:
        off = (v["receiver_angle_deg"] - az) % 360.0
    r = layout.receiver_index(off, tol)
    if r is None:
        raise ParseError(f"unmappable angle: receiver offset {off:g} deg", lineno)
    return e, r, az


# ----------------------------------------------------------------------------
# reciprocity


def _unique_rows(rows):
    index = {}
    out = []
    ids = []
    for row in rows:
        k = tuple(np.round(row, 12).tolist())
        if k not in index:
            index[k] = len(out)
            out.append(row)
        ids.append(index[k])
    return np.array(out), ids


def reciprocity_swap(d):
    """Exchange the roles of emitters and receivers in a 3D parallel-polarized dataset.

    Every former receiver becomes a source polarized along its measurement
    direction, and every former emitter becomes a measurement point reading
    the component along its former polarization. Sample values are carried
    over unchanged. Records of the result are grouped by source point and
    frequency; their receiver ids index the new layout's measurement table.
    """
    if d.dimension != 3:
        raise DomainError("reciprocity swap applies to 3D datasets only")
    if any(r.pol != "PP" for r in d):
        raise DomainError("reciprocity swap supports parallel polarization (PP) only")
    lay = d.layout

    src_rows, meas_rows, entries = [], [], []
    for rec in d:
        xe = lay.emitter_point(rec.emitter)
        pe = lay.emitter_polarization(rec.emitter, rec.pol)
        pts = lay.receiver_points(rec.emitter)[rec.receivers]
        dirs = lay.receiver_directions(rec.emitter)[rec.receivers]
        meas_rows.append(np.concatenate([xe, pe]))
        m_local = len(meas_rows) - 1
        for j in range(rec.receivers.size):
            src_rows.append(np.concatenate([pts[j], dirs[j]]))
            entries.append((len(src_rows) - 1, m_local, rec.freq, rec.incident[j], rec.total[j]))

    if not entries:
        return d
    src, src_ids = _unique_rows(src_rows)
    meas, meas_ids = _unique_rows(meas_rows)

    groups = {}
    for s_local, m_local, f, inc, tot in entries:
        key = (src_ids[s_local], f)
        g = groups.setdefault(key, {})
        m = meas_ids[m_local]
        if m in g:
            raise DomainError("swap produced a duplicate (source, frequency, measurement) triple")
        g[m] = (inc, tot)

    records = []
    for (s, f), g in groups.items():
        ids = sorted(g)
        records.append(Record(s, f, ids, [g[i][0] for i in ids], [g[i][1] for i in ids], pol="PP"))
    new_layout = PointLayout3D(src[:, :3], src[:, 3:], meas[:, :3], meas[:, 3:])
    meta = dict(d.meta)
    meta["reciprocity_swapped"] = not meta.get("reciprocity_swapped", False)
    return Dataset(3, new_layout, d.sweep, records, convention=d.convention, meta=meta)


def measurement_triples(d):
    """Multiset of (source point, source pol, measurement point, direction, freq, inc, tot)."""
    out = []
    lay = d.layout
    for rec in d:
        xe = tuple(np.round(lay.emitter_point(rec.emitter), 12))
        pe = lay.emitter_polarization(rec.emitter, rec.pol)
        pe = None if pe is None else tuple(np.round(pe, 12))
        pts = lay.receiver_points(rec.emitter)[rec.receivers]
        dirs = lay.receiver_directions(rec.emitter)
        for j in range(rec.receivers.size):
            dj = None if dirs is None else tuple(np.round(dirs[rec.receivers[j]], 12))
            out.append((xe, pe, tuple(np.round(pts[j], 12)), dj, rec.freq, rec.incident[j], rec.total[j]))
    return sorted(out, key=repr)


# ----------------------------------------------------------------------------
# validation


@dataclass(frozen=True)
class Issue:
    kind: str  # missing_pair | incomplete_receivers | non_finite | outlier
    key: tuple
    detail: str = ""


def validate(d, outlier_factor=10.0):
    """List coverage gaps, non-finite samples and amplitude outliers. Never raises."""
    issues = []
    lay = d.layout
    pols = sorted({r.pol for r in d}) or (["-"] if d.dimension == 2 else ["PP"])
    structured = isinstance(lay, (Layout2D, Layout3D))

    emitters = range(lay.n_emitters) if structured else sorted({r.emitter for r in d})
    for pol in pols:
        for e in emitters:
            for f in range(len(d.sweep)):
                if (e, f, pol) not in d.records:
                    issues.append(Issue("missing_pair", (e, f, pol)))

    for rec in d:
        if structured and rec.receivers.size != lay.n_receivers:
            missing = sorted(set(range(lay.n_receivers)) - set(rec.receivers.tolist()))
            issues.append(Issue("incomplete_receivers", rec.key, f"missing receivers {missing}"))
        for name in ("incident", "total"):
            bad = ~np.isfinite(getattr(rec, name))
            for j in np.flatnonzero(bad):
                issues.append(
                    Issue("non_finite", rec.key + (int(rec.receivers[j]),), f"{name} sample")
                )

    for f in range(len(d.sweep)):
        recs = [r for r in d if r.freq == f]
        if not recs:
            continue
        mags = np.abs(np.concatenate([np.concatenate([r.incident, r.total]) for r in recs]))
        mags = mags[np.isfinite(mags)]
        if mags.size == 0:
            continue
        limit = outlier_factor * np.median(mags)
        for rec in recs:
            for name in ("incident", "total"):
                m = np.abs(getattr(rec, name))
                for j in np.flatnonzero(np.isfinite(m) & (m > limit)):
                    issues.append(
                        Issue(
                            "outlier",
                            rec.key + (int(rec.receivers[j]),),
                            f"{name} |{m[j]:.3g}| > {outlier_factor:g} x median {limit / outlier_factor:.3g}",
                        )
                    )
    return issues


# ----------------------------------------------------------------------------
# canonical format


def _fmt(x):
    return repr(float(x))


def write_canonical(d):
    """Serialize to the canonical text container; returns bytes."""
    head = [
        FORMAT_TAG,
        f"#dimension\t{d.dimension}",
        f"#convention\t{d.convention}",
        f"#layout\t{json.dumps(d.layout.to_dict())}",
        f"#frequencies_hz\t{json.dumps([float(v) for v in d.sweep.values])}",
        f"#meta\t{json.dumps(d.meta, sort_keys=True)}",
    ]
    body = io.StringIO()
    body.write(BODY_HEADER + "\n")
    for rec in d:
        for j in range(rec.receivers.size):
            a, b = rec.incident[j], rec.total[j]
            body.write(
                f"{rec.emitter}\t{rec.freq}\t{int(rec.receivers[j])}\t{rec.pol}\t"
                f"{_fmt(a.real)}\t{_fmt(a.imag)}\t{_fmt(b.real)}\t{_fmt(b.imag)}\n"
            )
    body_bytes = body.getvalue().encode("utf-8")
    crc = zlib.crc32(body_bytes) & 0xFFFFFFFF
    return ("\n".join(head) + "\n").encode("utf-8") + body_bytes + f"#crc32 {crc:08x}\n".encode()


def read_canonical(data):
    if hasattr(data, "read"):
        data = data.read()
    if isinstance(data, str):
        data = data.encode("utf-8")
    lines = data.split(b"\n")
    if not lines or lines[0].decode("utf-8", "replace").strip() != FORMAT_TAG:
        raise FormatVersionError(f"expected {FORMAT_TAG!r} on line 1")

    header = {}
    i = 1
    while i < len(lines) and lines[i].startswith(b"#") and b"\t" in lines[i]:
        k, v = lines[i].decode("utf-8")[1:].split("\t", 1)
        header[k] = v
        i += 1
    if lines and lines[-1] == b"":
        lines = lines[:-1]
    if not lines or not lines[-1].startswith(b"#crc32 "):
        raise ChecksumError("missing checksum line (truncated stream?)")
    body_lines = lines[i:-1]
    body_bytes = b"".join(l + b"\n" for l in body_lines)
    try:
        expected = int(lines[-1].split()[1], 16)
    except (IndexError, ValueError):
        raise ChecksumError("malformed checksum line")
    if zlib.crc32(body_bytes) & 0xFFFFFFFF != expected:
        raise ChecksumError("checksum mismatch")

    for k in ("dimension", "convention", "layout", "frequencies_hz"):
        if k not in header:
            raise ParseError(f"missing header key {k!r}")
    layout = layout_from_dict(json.loads(header["layout"]))
    sweep = FrequencySweep(json.loads(header["frequencies_hz"]))
    meta = json.loads(header.get("meta", "{}"))

    groups = {}
    for n, raw in enumerate(body_lines, start=i + 1):
        s = raw.decode("utf-8")
        if s == BODY_HEADER:
            continue
        parts = s.split("\t")
        if len(parts) != 8:
            raise ParseError("expected 8 columns", n)
        try:
            e, f, r = int(parts[0]), int(parts[1]), int(parts[2])
            v = [float(p) for p in parts[4:]]
        except ValueError as exc:
            raise ParseError(str(exc), n)
        g = groups.setdefault((e, f, parts[3]), ([], [], []))
        g[0].append(r)
        g[1].append(complex(v[0], v[1]))
        g[2].append(complex(v[2], v[3]))
    records = [Record(e, f, *g, pol=pol) for (e, f, pol), g in groups.items()]
    return Dataset(int(header["dimension"]), layout, sweep, records, header["convention"], meta)


def save(d, path):
    with open(path, "wb") as fh:
        fh.write(write_canonical(d))


def load(path):
    with open(path, "rb") as fh:
        return read_canonical(fh.read())
