"""Command-line front end: ``topoimg {fit-incident,synth,invert,metrics,validate}``.

Every run writes ``<prefix>.meta.json`` with the resolved configuration and
SHA-256 checksums of the artifacts it produced. Exit codes: 0 success,
2 usage or input error, 3 numerical failure.
"""

import argparse
import hashlib
import json
import logging
import re
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .dataset import (
    FORMAT_TAG,
    PRESETS,
    load,
    parse_columnar,
    reciprocity_swap,
    read_canonical,
    save,
    to_working_convention,
    validate,
)
from .errors import (
    ChecksumError,
    ConvergenceError,
    DomainError,
    FormatVersionError,
    GridMismatchError,
    ParseError,
    RankDeficientError,
    ZeroNormalizerError,
)
from .geometry import FrequencySweep, Layout2D, Layout3D
from .incident import fit_hankel_series
from .regions import ShapeTruth, extract, read_mask, score, write_mask
from .topofield import (
    InspectionGrid,
    MaterialSpec,
    combine_frequencies,
    frequency_field,
    normalizer,
    write_grid,
    write_ppm,
)

log = logging.getLogger("topoimg")

INPUT_ERRORS = (DomainError, ParseError, ChecksumError, FormatVersionError, GridMismatchError, OSError, ValueError)
NUMERIC_ERRORS = (RankDeficientError, ConvergenceError, ZeroNormalizerError)

_UNITS = {"ghz": 1e9, "mhz": 1e6, "khz": 1e3, "hz": 1.0}


class InputError(Exception):
    pass


def parse_frequencies(text):
    """``"2,4,6,8GHz"`` -> Hz. A trailing unit applies to unsuffixed items; GHz by default."""
    s = text.replace(" ", "")
    m = re.search(r"([a-zA-Z]+)$", s)
    default = 1e9
    if m and "," in s:
        unit = m.group(1).lower()
        if unit not in _UNITS:
            raise InputError(f"unknown frequency unit {m.group(1)!r}")
        default = _UNITS[unit]
    out = []
    for item in filter(None, s.split(",")):
        mm = re.fullmatch(r"([0-9.eE+-]+)([a-zA-Z]*)", item)
        if not mm:
            raise InputError(f"bad frequency {item!r}")
        unit = mm.group(2).lower()
        if unit and unit not in _UNITS:
            raise InputError(f"unknown frequency unit {mm.group(2)!r}")
        out.append(float(mm.group(1)) * (_UNITS[unit] if unit else default))
    if not out:
        raise InputError("empty frequency list")
    return out


def parse_material(text):
    t = (text or "").strip().lower()
    if t in ("cond", "conducting", "pec", "metal"):
        return MaterialSpec.conducting()
    m = re.fullmatch(r"(?:diel|dielectric):([0-9.eE+-]+)", t)
    if not m:
        raise InputError(f"bad material {text!r}; use diel:<eps> or cond")
    return MaterialSpec.dielectric(float(m.group(1)))


def parse_shape(text, dim):
    kind, _, rest = text.partition(":")
    try:
        v = [float(x) for x in rest.split(",")]
    except ValueError:
        raise InputError(f"bad shape {text!r}")
    if dim == 2 and kind == "disk" and len(v) == 3:
        return {"type": "disk", "center": v[:2], "radius": v[2]}
    if dim == 3 and kind == "point" and len(v) in (3, 4):
        return {"type": "point", "location": v[:3], "amplitude": [v[3] if len(v) == 4 else 0.05, 0.0]}
    raise InputError(f"bad shape {text!r}; use disk:x,y,r (2D) or point:x,y,z[,amp] (3D)")


def _floats(text, n=None):
    v = [float(x) for x in str(text).split(",") if x.strip()]
    if n is not None and len(v) != n:
        raise InputError(f"expected {n} comma-separated numbers, got {text!r}")
    return v


def _ints(text):
    return [int(x) for x in str(text).split(",") if x.strip()]


def _bool(v):
    if isinstance(v, bool):
        return v
    s = str(v).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off", ""):
        return False
    raise InputError(f"bad boolean {v!r}")


def read_config(path):
    """key=value lines; ``#`` starts a comment; keys may use dashes or underscores."""
    out = {}
    with open(path) as fh:
        for n, line in enumerate(fh, start=1):
            s = line.split("#", 1)[0].strip()
            if not s:
                continue
            if "=" not in s:
                raise ParseError("expected key=value", n)
            k, v = s.split("=", 1)
            out[k.strip().replace("-", "_")] = v.strip()
    return out


def _grid(args, dim):
    b = args.bounds
    if b is None:
        bounds = [[-0.1, 0.1]] * dim
    else:
        v = _floats(b)
        if len(v) == 2:
            bounds = [v] * dim
        elif len(v) == 2 * dim:
            bounds = [v[2 * i:2 * i + 2] for i in range(dim)]
        else:
            raise InputError("--bounds takes lo,hi or one lo,hi pair per axis")
    res = args.resolution if args.resolution is not None else (100 if dim == 2 else 41)
    return InspectionGrid(bounds, int(res))


def _load_dataset(args):
    if not args.dataset:
        raise InputError("a dataset path is required (--dataset)")
    p = Path(args.dataset)
    if not p.is_file():
        raise InputError(f"dataset not found: {p}")
    raw = p.read_bytes()
    if raw.startswith(FORMAT_TAG.encode()):
        d = read_canonical(raw)
    else:
        preset = getattr(args, "preset", None)
        if not preset:
            raise InputError("non-canonical dataset needs --preset")
        if preset not in PRESETS:
            raise InputError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
        layout = Layout2D() if preset.endswith("2d") else Layout3D()
        d = parse_columnar(raw, PRESETS[preset], layout)
    return to_working_convention(d)


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_meta(args, artifacts, extra=None):
    prefix = args.out
    meta = {
        "version": __version__,
        "command": args.command,
        "config": {k: v for k, v in sorted(vars(args).items()) if k not in ("func",)},
        "artifacts": {str(a): _sha256(a) for a in artifacts},
    }
    if extra:
        meta.update(extra)
    path = f"{prefix}.meta.json"
    with open(path, "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True, default=str)
    return path


def _prepare_out(prefix):
    if not prefix:
        raise InputError("an output prefix is required (--out)")
    parent = Path(prefix).parent
    if not parent.is_dir():
        raise InputError(f"output directory does not exist: {parent}")


# ----------------------------------------------------------------------------
# subcommands


def cmd_fit_incident(args):
    d = _load_dataset(args)
    if d.dimension != 2:
        raise InputError("fit-incident applies to 2D datasets")
    _prepare_out(args.out)
    lay = d.layout
    models_path, report_path = f"{args.out}.models.txt", f"{args.out}.residuals.tsv"
    worst = 0.0
    with open(models_path, "w") as fm, open(report_path, "w") as fr:
        fm.write("# emitter freq_id | emitter_x emitter_y kappa n_modes (re im)*\n")
        fr.write("emitter\tfreq_id\tfreq_hz\tresidual\trelative\n")
        for rec in d:
            pts = lay.receiver_points(rec.emitter)[rec.receivers]
            kappa = float(d.sweep.wavenumbers[rec.freq])
            model = fit_hankel_series(pts, rec.incident, lay.emitter_point(rec.emitter), kappa, args.modes)
            rel = model.residual_norm / max(np.linalg.norm(rec.incident), 1e-300)
            worst = max(worst, rel)
            fm.write(f"{rec.emitter} {rec.freq} | {model.to_text()}\n")
            fr.write(f"{rec.emitter}\t{rec.freq}\t{d.sweep.values[rec.freq]!r}\t"
                     f"{model.residual_norm:.6e}\t{rel:.6e}\n")
    log.info("fitted %d records, worst relative residual %.3e", len(d), worst)
    print(f"fitted {len(d)} records with {args.modes} modes; worst relative residual {worst:.3e}")
    _write_meta(args, [models_path, report_path], {"worst_relative_residual": worst})
    return 0


def cmd_synth(args):
    from .oracle import BornPointScatterer3D, DiskScatterer, synth_dataset_2d, synth_dataset_3d, write_truth

    _prepare_out(args.out)
    dim = int(args.dim)
    if dim not in (2, 3):
        raise InputError("--dim must be 2 or 3")
    shapes = [parse_shape(s, dim) for s in (args.shape or [])]
    grid = _grid(args, dim)
    sweep = FrequencySweep(sorted(parse_frequencies(args.freqs)))
    if dim == 2:
        mat = parse_material(args.material or "diel:3")
        ShapeTruth(tuple(shapes)).check_inside(grid)
        disks = [DiskScatterer(s["center"], s["radius"], mat) for s in shapes]
        d = synth_dataset_2d(disks, Layout2D(), sweep, args.incident, args.noise, args.seed)
        truth = disks
    else:
        if args.polarization != "PP":
            raise InputError("3D synthesis supports PP only")
        ShapeTruth(tuple(shapes)).check_inside(grid)
        pts = [BornPointScatterer3D(s["location"], complex(*s["amplitude"])) for s in shapes]
        d = synth_dataset_3d(pts, Layout3D(), sweep, "PP", args.noise, args.seed)
        truth = pts
    data_path, truth_path = f"{args.out}.topo", f"{args.out}.truth.json"
    save(d, data_path)
    write_truth(truth_path, truth)
    print(f"wrote {len(d)} records to {data_path}")
    _write_meta(args, [data_path, truth_path], {"dataset_id": d.meta["id"]})
    return 0


def cmd_invert(args):
    _prepare_out(args.out)
    t0 = time.perf_counter()
    d = _load_dataset(args)
    kind = args.kind.upper()
    if kind not in ("TD", "TE"):
        raise InputError("--kind must be td or te")
    if args.material:
        mat = parse_material(args.material)
    elif kind == "TE":
        mat = MaterialSpec.conducting() if d.dimension == 2 else MaterialSpec.dielectric(2.0)
    else:
        raise InputError("--material is required for --kind td")
    if args.reciprocity:
        if d.dimension != 3:
            raise InputError("--reciprocity applies to 3D datasets")
        d = reciprocity_swap(d)
    grid = _grid(args, d.dimension)

    if args.freqs:
        freq_ids = [d.sweep.index_of(f, rtol=1e-6) for f in parse_frequencies(args.freqs)]
    else:
        freq_ids = sorted({r.freq for r in d})
    emitters = None
    if args.emitters:
        if args.reciprocity:
            raise InputError("--emitters cannot be combined with --reciprocity")
        emitters = _ints(args.emitters)

    fields, skipped = [], []
    for f in freq_ids:
        fld = frequency_field(d, mat, grid, f, emitters, kind, args.incident, args.modes, workers=args.threads)
        if normalizer(fld) == 0.0:
            msg = f"frequency {d.sweep.values[f] / 1e9:g} GHz has a degenerate {kind} field"
            if args.strict:
                raise ZeroNormalizerError(msg, index=f)
            log.warning("%s; skipped", msg)
            print(f"warning: {msg}; skipped", file=sys.stderr)
            skipped.append(int(f))
            continue
        fields.append(fld)
    if not fields:
        raise ZeroNormalizerError("every requested frequency has a degenerate field", index=-1)
    field = combine_frequencies(fields, kind)
    field.provenance["reciprocity"] = bool(args.reciprocity)

    artifacts = list(write_grid(field, f"{args.out}.field"))
    ppm = f"{args.out}.field.ppm"
    heat = write_ppm(field, ppm)
    side = json.loads(Path(artifacts[1]).read_text())
    side["heatmap"] = heat
    Path(artifacts[1]).write_text(json.dumps(side, indent=2, sort_keys=True))
    artifacts.append(ppm)

    truth = ShapeTruth.from_json(args.truth) if args.truth else None
    metrics = {}
    for lam in _floats(args.lam):
        mask = extract(field, lam)
        mpath = f"{args.out}.mask-{lam:g}.csv"
        write_mask(mask, mpath)
        artifacts.append(mpath)
        entry = {"nodes": mask.count, "extremum": mask.extremum}
        if truth is not None:
            entry = score(mask, truth)
        metrics[f"{lam:g}"] = entry
    mpath = f"{args.out}.metrics.json"
    summary = {
        "kind": kind,
        "extremum_point": field.extremum_point().tolist(),
        "skipped_frequency_ids": skipped,
        "masks": metrics,
    }
    Path(mpath).write_text(json.dumps(summary, indent=2, sort_keys=True))
    artifacts.append(mpath)

    elapsed = time.perf_counter() - t0
    nodes = int(np.prod(grid.shape))
    log.info("evaluated %d nodes in %.2f s", nodes, elapsed)
    print(f"{kind} field on {nodes} nodes in {elapsed:.2f} s; extremum at {np.round(field.extremum_point(), 4).tolist()}")
    _write_meta(args, artifacts, {"runtime_s": elapsed, "nodes": nodes, "skipped_frequency_ids": skipped})
    return 0


def cmd_metrics(args):
    _prepare_out(args.out)
    for p in (args.mask, args.truth):
        if not p or not Path(p).is_file():
            raise InputError(f"file not found: {p}")
    mask = read_mask(args.mask)
    if mask.count == 0:
        raise InputError("mask is empty")
    result = score(mask, ShapeTruth.from_json(args.truth))
    path = f"{args.out}.metrics.json"
    Path(path).write_text(json.dumps(result, indent=2, sort_keys=True))
    print(json.dumps(result, sort_keys=True))
    _write_meta(args, [path])
    return 0


def cmd_validate(args):
    _prepare_out(args.out)
    d = _load_dataset(args)
    issues = validate(d)
    for i in issues:
        print(f"{i.kind}\t{i.key}\t{i.detail}")
    print(f"{len(issues)} issue(s) in {len(d)} records")
    path = f"{args.out}.issues.json"
    Path(path).write_text(json.dumps(
        [{"kind": i.kind, "key": list(i.key), "detail": i.detail} for i in issues], indent=2))
    _write_meta(args, [path], {"issue_count": len(issues)})
    return 0


# ----------------------------------------------------------------------------
# parser


def _common(p):
    p.add_argument("--config", help="key=value file; command-line flags take precedence")
    p.add_argument("--out", help="output prefix")
    p.add_argument("-v", "--verbose", action="store_true")


def _dataset_args(p):
    p.add_argument("--dataset", help="canonical dataset, or a raw measurement file with --preset")
    p.add_argument("--preset", choices=sorted(PRESETS))


def build_parser():
    parser = argparse.ArgumentParser(prog="topoimg", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit-incident", help="fit Hankel-series incident models per record")
    _common(p)
    _dataset_args(p)
    p.add_argument("--modes", type=int, default=14)
    p.set_defaults(func=cmd_fit_incident)

    p = sub.add_parser("synth", help="synthesize a dataset from analytic scatterers")
    _common(p)
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--shape", action="append", help="disk:x,y,r (2D) or point:x,y,z[,amp] (3D); repeatable")
    p.add_argument("--material", help="diel:<eps> or cond (2D)")
    p.add_argument("--freqs", default="2,4,6,8GHz")
    p.add_argument("--incident", choices=["isotropic", "plane"], default="isotropic")
    p.add_argument("--polarization", default="PP")
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--bounds")
    p.add_argument("--resolution", type=int)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("invert", help="compute TD/TE fields, heatmap, masks and metrics")
    _common(p)
    _dataset_args(p)
    p.add_argument("--kind", default="td", type=str.lower, choices=["td", "te"])
    p.add_argument("--material")
    p.add_argument("--incident", choices=["isotropic", "plane", "hankel"], default="isotropic")
    p.add_argument("--modes", type=int, default=14)
    p.add_argument("--freqs", help="subset, e.g. 4,6GHz")
    p.add_argument("--emitters", help="subset of emitter ids, e.g. 0,1,2")
    p.add_argument("--lambda", dest="lam", default="0.7,0.9")
    p.add_argument("--reciprocity", action="store_true")
    p.add_argument("--strict", action="store_true")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--bounds")
    p.add_argument("--resolution", type=int)
    p.add_argument("--truth", help="JSON shape file for scoring")
    p.set_defaults(func=cmd_invert)

    p = sub.add_parser("metrics", help="score a mask against a truth file")
    _common(p)
    p.add_argument("--mask")
    p.add_argument("--truth")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("validate", help="report coverage gaps, non-finite samples and outliers")
    _common(p)
    _dataset_args(p)
    p.set_defaults(func=cmd_validate)
    return parser


_BOOL_KEYS = ("reciprocity", "strict", "verbose")


def _apply_config(parser, argv):
    """Re-parse with values from ``--config`` installed as subcommand defaults."""
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return parser.parse_args(argv)
    cfg = read_config(known.config)
    for k in _BOOL_KEYS:
        if k in cfg:
            cfg[k] = _bool(cfg[k])
    if "lambda" in cfg:
        cfg["lam"] = cfg.pop("lambda")
    if "shape" in cfg:
        cfg["shape"] = [s.strip() for s in cfg["shape"].split(";") if s.strip()]
    sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    for sp in sub.choices.values():
        valid = {a.dest for a in sp._actions}
        sp.set_defaults(**{k: v for k, v in cfg.items() if k in valid})
    return parser.parse_args(argv)


def main(argv=None):
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = _apply_config(parser, argv)
    except (OSError, ParseError, InputError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except NUMERIC_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except (InputError,) + INPUT_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
