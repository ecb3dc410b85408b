"""Command line entry point: ``mcflab <subcommand> --config cfg.json --out dir``.

Exit status is 0 on success, 2 when the configuration (or the output
directory) is unusable and 3 when a computation diverges or produces a
non-finite number.  Every run writes ``run.json`` into the output directory
with the resolved configuration and sha256 checksums of the emitted files.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import math
import os
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (
    cauchy_bound_check,
    divergence_identity_check,
    dlambda_identity_check,
    estimate_cone,
    estimate_K,
    estimate_star,
    homogeneity_defect,
    metric_bound_check,
    MetricBoundError,
    sample_blowdown,
    weighted_position_field,
)
from .fixtures import make_generator
from .flow import FlowConfig, FlowDivergenceError, FlowState, RescaledFlowState, run_flow, run_rescaled
from .geometry import geometry_csv_columns, geometry_report_rows
from .gridfield import (
    GraphField,
    GridError,
    GridSpec,
    build_field,
    field_to_json,
    load_field,
    sphere_sampling,
)
from .soliton import SolverConfig, equivalence_check, soliton_residual, solve_dirichlet

log = logging.getLogger("mcflab")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
SUBCOMMANDS = ("geometry", "solve-soliton", "run-flow", "blowdown", "verify")
ESTIMATE_HEADER = ["check", "param", "lhs", "rhs", "ratio"]


class ConfigError(ValueError):
    """Invalid or incomplete configuration; the message names the key."""


class NumericalError(RuntimeError):
    """Divergence or non-finite output."""


# ---------------------------------------------------------------- config access

def _get(cfg, dotted, default=..., kind=None, prefix=""):
    node = cfg
    for part in dotted.split("."):
        if not isinstance(node, dict) or part not in node:
            if default is ...:
                raise ConfigError(f"missing required key '{prefix}{dotted}'")
            return default
        node = node[part]
    if kind is not None and node is not None:
        try:
            if isinstance(node, bool) or isinstance(node, (dict, list)):
                raise TypeError
            node = kind(node)
        except (TypeError, ValueError):
            raise ConfigError(f"key '{prefix}{dotted}' must be {kind.__name__}, got {node!r}") from None
    return node


def _spec(cfg, key="spec") -> GridSpec:
    n = _get(cfg, f"{key}.n", kind=int)
    k = _get(cfg, f"{key}.k", kind=int)
    L = _get(cfg, f"{key}.L", kind=float)
    h = _get(cfg, f"{key}.h", kind=float)
    try:
        return GridSpec(n, k, L, h)
    except GridError as exc:
        raise ConfigError(f"invalid '{key}': {exc}") from None


def _source(cfg, key, n, k, seed, base_dir):
    """Generator or loaded field described by ``{kind, params}`` at ``cfg[key]``."""
    kind = _get(cfg, f"{key}.kind", kind=str)
    if kind == "file":
        path = Path(_get(cfg, f"{key}.path", kind=str))
        if not path.is_absolute():
            path = base_dir / path
        try:
            return load_field(path)
        except (OSError, ValueError, KeyError) as exc:
            raise ConfigError(f"cannot read field file for '{key}.path': {exc}") from None
    params = _get(cfg, f"{key}.params", {})
    if not isinstance(params, dict):
        raise ConfigError(f"key '{key}.params' must be an object")
    try:
        return make_generator(kind, n, k, params, seed)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid '{key}': {exc}") from None


def _field_on(spec, src, key):
    if isinstance(src, GraphField):
        if src.spec != spec:
            raise ConfigError(f"field file for '{key}' lives on {src.spec.to_dict()}, expected {spec.to_dict()}")
        return src
    try:
        return build_field(spec, src, vectorized=True)
    except (GridError, ValueError) as exc:
        raise ConfigError(f"cannot sample '{key}' on the grid: {exc}") from None


def _threads():
    raw = os.environ.get("MCFLAB_THREADS", "0")
    try:
        value = int(raw)
    except ValueError:
        raise ConfigError(f"MCFLAB_THREADS must be a non-negative integer, got {raw!r}") from None
    if value < 0:
        raise ConfigError(f"MCFLAB_THREADS must be a non-negative integer, got {raw!r}")
    return value


# ---------------------------------------------------------------- emission

def _finite_or_none(obj, where="output"):
    """Recursively convert numpy scalars; non-finite floats raise NumericalError."""
    if isinstance(obj, dict):
        return {str(k): _finite_or_none(v, f"{where}.{k}") for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite_or_none(v, where) for v in obj]
    if isinstance(obj, np.ndarray):
        return _finite_or_none(obj.tolist(), where)
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if not math.isfinite(v):
            raise NumericalError(f"non-finite value in {where}")
        return v
    return obj


def dumps(obj) -> str:
    """Canonical JSON: sorted keys, shortest round-trip floats, LF line endings."""
    return json.dumps(_finite_or_none(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if not math.isfinite(v):
            raise NumericalError("non-finite value in CSV output")
        return "%.17g" % v
    return str(v)


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


class Emitter:
    def __init__(self, out: Path):
        self.out = out
        self.files: dict[str, str] = {}

    def write(self, name, text):
        data = text.encode()
        (self.out / name).write_bytes(data)
        self.files[name] = hashlib.sha256(data).hexdigest()


# ---------------------------------------------------------------- subcommands

def _cmd_geometry(cfg, seed, em, base_dir):
    spec = _spec(cfg)
    field = _field_on(spec, _source(cfg, "field", spec.n, spec.k, seed, base_dir), "field")
    rows = geometry_report_rows(field)
    em.write("geometry.csv", csv_text(geometry_csv_columns(spec.n), rows))
    res = soliton_residual(field)
    arr = np.asarray(rows, dtype=float) if rows else np.zeros((0, spec.n + 6))
    summary = {
        "sup_H": float(arr[:, spec.n].max()) if len(arr) else 0.0,
        "sup_F_perp": float(arr[:, spec.n + 1].max()) if len(arr) else 0.0,
        "sup_residual": res.sup_parametric,
        "sup_scalar_residual": res.sup_scalar,
        "nodes": len(rows),
    }
    em.write("summary.json", dumps(summary))
    return EXIT_OK


def _cmd_solve(cfg, seed, em, base_dir):
    spec = _spec(cfg)
    boundary = _field_on(spec, _source(cfg, "boundary", spec.n, spec.k, seed, base_dir), "boundary")
    init = None
    init_kind = _get(cfg, "init.kind", "extension", kind=str)
    if init_kind not in ("extension", "multilinear"):
        init = _field_on(spec, _source(cfg, "init", spec.n, spec.k, seed, base_dir), "init")
    try:
        scfg = SolverConfig(
            c_tau=_get(cfg, "solver.c_tau", 0.2, kind=float),
            eps=_get(cfg, "solver.eps", 1e-8, kind=float),
            max_iters=_get(cfg, "solver.max_iters", 200_000, kind=int),
        )
    except ValueError as exc:
        raise ConfigError(f"invalid 'solver': {exc}") from None
    try:
        field, report = solve_dirichlet(spec, boundary, init, scfg)
    except GridError as exc:
        raise ConfigError(str(exc)) from None
    em.write("field.json", field_to_json(field))
    em.write("report.json", dumps(report.to_dict()))
    if report.diverged:
        raise NumericalError(report.message)
    return EXIT_OK


def _snapshot_list(cfg, key):
    snaps = _get(cfg, key, [])
    if isinstance(snaps, dict):  # {"geometric": [start, factor, count]}
        start, factor, count = _get(cfg, f"{key}.geometric")
        return [float(start) * float(factor) ** i for i in range(int(count))]
    if not isinstance(snaps, list):
        raise ConfigError(f"key '{key}' must be a list of times")
    return [float(s) for s in snaps]


def _cmd_flow(cfg, seed, em, base_dir):
    spec = _spec(cfg)
    f0 = _field_on(spec, _source(cfg, "initial", spec.n, spec.k, seed, base_dir), "initial")
    mode = _get(cfg, "mode", "plain", kind=str)
    if mode not in ("plain", "rescaled"):
        raise ConfigError(f"key 'mode' must be 'plain' or 'rescaled', got {mode!r}")
    try:
        fcfg = FlowConfig(
            c=_get(cfg, "flow.c", 0.2, kind=float),
            boundary=_get(cfg, "flow.boundary", "frozen", kind=str),
        )
    except ValueError as exc:
        raise ConfigError(f"invalid 'flow': {exc}") from None
    snaps_at = _snapshot_list(cfg, "flow.snapshots")
    try:
        if mode == "plain":
            t_end = _get(cfg, "flow.t_end", kind=float)
            if not t_end > 0:
                raise ConfigError("key 'flow.t_end' must be positive")
            _, snaps, rows = run_flow(FlowState(f0, 0.0, 0, fcfg.boundary), fcfg, t_end, snaps_at)
            header = ["t", "sup_grad", "sup_velocity", "sup_residual"]
        else:
            s_end = _get(cfg, "flow.s_end", None, kind=float)
            if s_end is None:
                s_end = 0.5 * math.log(_get(cfg, "flow.t_end", kind=float))
            if not s_end > 0:
                raise ConfigError("key 'flow.s_end' must be positive")
            _, snaps, rows = run_rescaled(RescaledFlowState(f0), fcfg, s_end, snaps_at)
            header = ["s", "t", "sup_grad", "sup_velocity", "sup_residual"]
    except FlowDivergenceError as exc:
        raise NumericalError(str(exc)) from None
    for i, st in enumerate(snaps):
        em.write(f"snapshot_{i:03d}.json", field_to_json(st.field))
    em.write("run.csv", csv_text(header, [[r[c] for c in header] for r in rows]))
    return EXIT_OK


def _sampling(node, n, seed, prefix=""):
    count = _get(node, "count", 2 if n == 1 else (256 if n == 2 else 400), kind=int, prefix=prefix)
    scheme = _get(node, "scheme", None, kind=str, prefix=prefix)
    try:
        return sphere_sampling(n, 1.0, count, scheme, seed)
    except (GridError, ValueError) as exc:
        raise ConfigError(f"invalid '{prefix.rstrip('.')}': {exc}") from None


def _ladder(node, key, default, prefix=""):
    lam = _get(node, key, default, prefix=prefix)
    if not isinstance(lam, (list, tuple)) or len(lam) < 3:
        raise ConfigError(f"key '{prefix}{key}' must be a list of at least three scales")
    lam = [float(v) for v in lam]
    if any(b <= a for a, b in zip(lam, lam[1:])) or lam[0] <= 0:
        raise ConfigError(f"key '{prefix}{key}' must be positive and strictly increasing")
    return lam


def _sub(node, key):
    value = node.get(key, {}) if isinstance(node, dict) else {}
    if not isinstance(value, dict):
        raise ConfigError(f"key '{key}' must be an object")
    return value


def _blowdown_block(source, node, n, seed, prefix, default_ladder):
    lam = _ladder(node, "lambdas", default_ladder, prefix)
    S = _sampling(_sub(node, "sampling"), n, seed, prefix + "sampling.")
    try:
        seq = sample_blowdown(source, lam, S)
    except GridError as exc:
        raise ConfigError(f"invalid '{prefix}lambdas': {exc}") from None
    cb = cauchy_bound_check(seq)
    profile, cone = estimate_cone(seq)
    hom_self = homogeneity_defect(profile)
    profile_doc = {
        "n": n,
        "lambda_max": lam[-1],
        "nodes": S.nodes,
        "weights": S.weights,
        "values": profile.values,
        "scheme": S.scheme,
    }
    summary = {
        "C_cauchy": cb.C,
        "cauchy_bounded": cb.flags["bounded"],
        "rate_slope": cone["rate_slope"],
        "already_conical": cone["already_conical"],
        "antipodal_defect": cone["antipodal_defect"],
        "cone_warning": cone["warning"],
        "homogeneity_self": max(d["defect"] for d in hom_self),
    }
    return cb, profile_doc, summary


def _cmd_blowdown(cfg, seed, em, base_dir):
    if "spec" in cfg:
        spec = _spec(cfg)
        source = _field_on(spec, _source(cfg, "source", spec.n, spec.k, seed, base_dir), "source")
        n = spec.n
        default = list(np.geomspace(spec.half_width / 4, spec.half_width, 5))
    else:
        n = _get(cfg, "n", kind=int)
        k = _get(cfg, "k", 1, kind=int)
        source = _source(cfg, "source", n, k, seed, base_dir)
        if isinstance(source, GraphField):
            n = source.spec.n
            default = list(np.geomspace(source.spec.half_width / 4, source.spec.half_width, 5))
        else:
            default = [1.0, 2.0, 4.0, 8.0]
    cb, profile_doc, bsum = _blowdown_block(source, cfg, n, seed, "", default)
    em.write("estimates.csv", csv_text(ESTIMATE_HEADER, cb.csv_rows()))
    em.write("profile.json", dumps(profile_doc))
    summary = {"C_K": None, "C_star_ok": None, **bsum}
    em.write("summary.json", dumps(summary))
    return EXIT_OK


def _vector_field(name, n, k):
    if name == "constant":
        e = np.zeros(n + k)
        e[0] = 1.0
        return lambda P: np.broadcast_to(e, np.shape(P)).copy()
    if name == "position":
        return lambda P: np.asarray(P, dtype=float)
    if name == "weighted":
        return weighted_position_field(n)
    raise ConfigError(f"unknown vector field {name!r} in 'checks.divergence.fields'")


def _cmd_verify(cfg, seed, em, base_dir):
    spec = _spec(cfg)
    field = _field_on(spec, _source(cfg, "field", spec.n, spec.k, seed, base_dir), "field")
    n = spec.n
    reach = spec.half_width - 2 * spec.h
    R_default = [round(reach * q, 12) for q in (0.25, 0.5, 0.75)]
    checks = _get(cfg, "checks", {})
    if not isinstance(checks, dict):
        raise ConfigError("key 'checks' must be an object")
    wanted = lambda name: name in checks or not checks
    est_rows = []
    defects = {}
    summary = {"C_K": None, "C_star_ok": None, "C_cauchy": None, "rate_slope": None,
               "antipodal_defect": None}

    res = soliton_residual(field)
    defects["soliton_residual_sup"] = res.sup_parametric
    defects["equivalence"] = equivalence_check(field)

    if wanted("metric"):
        try:
            summary["metric"] = metric_bound_check(field)
        except MetricBoundError as exc:
            summary["metric"] = {"error": str(exc), "nodes": exc.nodes}

    if wanted("divergence") and n <= 3:
        R = _get(checks, "divergence.R", R_default[-1], kind=float)
        names = _get(checks, "divergence.fields", ["constant", "position", "weighted"])
        table = {}
        for name in names:
            try:
                dc = divergence_identity_check(field, _vector_field(name, n, spec.k), R)
            except GridError as exc:
                raise ConfigError(f"invalid 'checks.divergence.R': {exc}") from None
            table[name] = {"pointwise": dc.pointwise_defect, "integral": dc.integral_defect,
                           "relative": dc.relative_defect}
            est_rows.append(["divergence:" + name, R, dc.div_integral + dc.mean_curvature_integral,
                             dc.flux_integral, dc.relative_defect])
        defects["divergence"] = table

    if wanted("star") and n <= 3:
        Rs = [float(r) for r in _get(checks, "star.R", R_default)]
        try:
            st = estimate_star(field, Rs)
        except GridError as exc:
            raise ConfigError(f"invalid 'checks.star.R': {exc}") from None
        est_rows.extend(st.csv_rows())
        summary["C_star_ok"] = st.flags["holds"]

    if wanted("K") and n <= 3:
        Rs = [float(r) for r in _get(checks, "K.R", R_default)]
        try:
            kr = estimate_K(field, Rs)
        except GridError as exc:
            raise ConfigError(f"invalid 'checks.K.R': {exc}") from None
        est_rows.extend(kr.csv_rows())
        summary["C_K"] = kr.C
        summary["K_flags"] = kr.flags

    if wanted("dlambda"):
        top = (spec.half_width - 2 * spec.h) / (1 + 3e-3)
        node = _sub(checks, "dlambda")
        lam = _ladder(node, "lambdas", [top / 3, top * 2 / 3, top], "checks.dlambda.")
        S = _sampling(_sub(node, "sampling"), n, seed, "checks.dlambda.sampling.")
        try:
            dl = dlambda_identity_check(field, lam, S)
        except GridError as exc:
            raise ConfigError(f"invalid 'checks.dlambda.lambdas': {exc}") from None
        defects["dlambda_A"] = max(d["defect_A"] for d in dl)
        defects["dlambda_B"] = max(d["defect_B"] for d in dl)
        for d in dl:
            est_rows.append(["dlambda", d["lambda"], d["defect_A"], d["defect_B"],
                             d["defect_A"] / d["defect_B"] if d["defect_B"] > 0 else 0.0])

    if wanted("blowdown"):
        default = list(np.geomspace(spec.half_width / 4, spec.half_width, 5))
        cb, profile_doc, bsum = _blowdown_block(field, _sub(checks, "blowdown"), n, seed,
                                                "checks.blowdown.", default)
        est_rows.extend(cb.csv_rows())
        em.write("profile.json", dumps(profile_doc))
        defects["homogeneity_self"] = bsum.pop("homogeneity_self")
        summary.update(bsum)

    summary["defects"] = defects
    em.write("estimates.csv", csv_text(ESTIMATE_HEADER, est_rows))
    em.write("summary.json", dumps(summary))
    return EXIT_OK


COMMANDS = {
    "geometry": _cmd_geometry,
    "solve-soliton": _cmd_solve,
    "run-flow": _cmd_flow,
    "blowdown": _cmd_blowdown,
    "verify": _cmd_verify,
}


# ---------------------------------------------------------------- driver

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mcflab", description="Graphical soliton and blow-down experiments.")
    p.add_argument("--version", action="version", version=f"mcflab {__version__}")
    sub = p.add_subparsers(dest="subcommand", required=True)
    for name in SUBCOMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="JSON configuration file")
        sp.add_argument("--out", required=True, help="output directory (created if missing)")
        sp.add_argument("--seed", type=int, default=42)
        sp.add_argument("--quiet", action="store_true")
    return p


def _load_config(path: Path) -> dict:
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    return cfg


def dispatch(args) -> int:
    start = time.perf_counter()
    out = Path(args.out)
    cfg_path = Path(args.config)
    status = EXIT_OK
    manifest = {"subcommand": args.subcommand, "seed": args.seed, "version": __version__,
                "config_path": str(cfg_path)}
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".mcflab-write-test"
        probe.write_bytes(b"")
        probe.unlink()
    except OSError as exc:
        print(f"mcflab: output directory {out} is not writable: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    em = Emitter(out)
    try:
        manifest["threads"] = _threads()
        cfg = _load_config(cfg_path)
        manifest["config"] = cfg
        with np.errstate(over="ignore", invalid="ignore"):
            status = COMMANDS[args.subcommand](cfg, args.seed, em, cfg_path.parent)
    except ConfigError as exc:
        print(f"mcflab: configuration error: {exc}", file=sys.stderr)
        manifest["error"] = str(exc)
        status = EXIT_CONFIG
    except NumericalError as exc:
        print(f"mcflab: numerical failure: {exc}", file=sys.stderr)
        manifest["error"] = str(exc)
        status = EXIT_NUMERIC
    except OSError as exc:
        print(f"mcflab: cannot write outputs: {exc}", file=sys.stderr)
        manifest["error"] = str(exc)
        status = EXIT_CONFIG
    manifest["exit_status"] = status
    manifest["duration_s"] = time.perf_counter() - start
    manifest["files"] = dict(sorted(em.files.items()))
    try:
        (out / "run.json").write_text(json.dumps(_safe(manifest), sort_keys=True, indent=2) + "\n")
    except OSError as exc:
        print(f"mcflab: cannot write manifest: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if not args.quiet and status == EXIT_OK:
        print(f"mcflab {args.subcommand}: wrote {', '.join(manifest['files'])} to {out}")
    return status


def _safe(obj):
    try:
        return _finite_or_none(obj)
    except NumericalError:
        return json.loads(json.dumps(obj, default=str).replace("NaN", "null"))


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(name)s: %(message)s", stream=sys.stderr)
    if args.quiet:
        warnings.simplefilter("ignore")
    return dispatch(args)


if __name__ == "__main__":
    sys.exit(main())
