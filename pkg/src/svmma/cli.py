"""Command-line front end: ``svmma simulate | fit | predict``.

Exit codes: 0 success, 1 fatal error, 2 partial success (some simulation
replications were excluded).
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import io
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__, empirical, simulation
from .candidates import all_subsets, nested_covariates
from .data import TransformSpec, apply_transforms, load_csv
from .exceptions import SVMMAError
from .gwr import default_bandwidth_grid
from .kernels import KERNELS

log = logging.getLogger("svmma")

SIMULATE_SCHEMA = "svmma.simulate/1"
EXIT_OK, EXIT_FATAL, EXIT_PARTIAL = 0, 1, 2


class UsageError(Exception):
    pass


def _now():
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def _prepare_out(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    if not os.access(out, os.W_OK):
        raise PermissionError(f"output directory {out} is not writable")
    return out


def _write(out: Path, name: str, text: str, written: list):
    p = out / name
    p.write_text(text)
    written.append(str(p))


def _dump(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=True) + "\n"


def _manifest(out, command, config, seed, started, written):
    doc = {
        "command": command,
        "config": config,
        "seed": seed,
        "version": __version__,
        "started": started,
        "finished": _now(),
        "outputs": sorted(written + [str(out / "manifest.json")]),
    }
    (out / "manifest.json").write_text(_dump(doc))


# -- shared parsing -------------------------------------------------------


def parse_bandwidth_grid(spec, q: float = 2.0):
    """Grid spec to a callable of the training locations.

    ``rel:LO:HI:NUM`` log-spaced multiples of the largest pairwise L_q
    distance (default ``rel:0.05:2:30``), ``log:LO:HI:NUM`` absolute
    log-spaced values, or an explicit list ``h1,h2,...``.
    """
    spec = spec or "rel:0.05:2:30"
    kind, _, rest = spec.partition(":")
    try:
        if kind in ("rel", "log"):
            lo, hi, num = rest.split(":")
            lo, hi, num = float(lo), float(hi), int(num)
            if not (0 < lo <= hi and num >= 1):
                raise ValueError
            if kind == "rel":
                return lambda loc: default_bandwidth_grid(loc, q, num, lo, hi)
            grid = np.geomspace(lo, hi, num)
        else:
            grid = np.array([float(v) for v in spec.split(",")])
            if np.any(grid <= 0):
                raise ValueError
    except ValueError:
        raise UsageError(f"bad --bandwidth-grid {spec!r}; use rel:LO:HI:NUM, log:LO:HI:NUM or h1,h2,...") from None
    return lambda loc: grid


def _split_names(v):
    return [c.strip() for c in v.split(",") if c.strip()]


def _transforms(items):
    actions = {}
    for item in items or ():
        col, sep, action = item.partition("=")
        if not sep:
            raise UsageError(f"bad --transform {item!r}; expected COLUMN=ACTION")
        actions[col.strip()] = action.strip()
    return TransformSpec(actions)


def _load(path, args):
    ds = load_csv(path, args.coords, args.response, args.covariates, add_intercept=not args.no_intercept)
    return apply_transforms(ds, _transforms(args.transform))


def _candidates(spec, ds, kernel, q):
    n_expl = ds.p - (1 if ds.has_intercept else 0)
    if spec == "all-subsets":
        off = 1 if ds.has_intercept else 0
        return all_subsets(n_expl, kernel, q, offset=off, always=(0,) if off else ())
    if spec.startswith("nested:"):
        try:
            M = int(spec.split(":", 1)[1])
        except ValueError:
            raise UsageError(f"bad --candidates {spec!r}") from None
        if M > n_expl:
            raise UsageError(f"nested:{M} needs M <= p = {n_expl} covariates")
        return nested_covariates(n_expl, M, kernel, q, intercept=ds.has_intercept)
    raise UsageError(f"bad --candidates {spec!r}; expected nested:M or all-subsets")


def _schema_args(p):
    p.add_argument("--coords", type=_split_names, required=True, help="two location columns, e.g. X,Y")
    p.add_argument("--response", required=True)
    p.add_argument("--covariates", type=_split_names, required=True, help="comma-separated covariate columns")
    p.add_argument("--no-intercept", action="store_true", help="do not add an intercept column")
    p.add_argument("--transform", action="append", metavar="COL=ACTION",
                   help="natural_log, square_root, standardize or identity; repeatable")
    p.add_argument("--candidates", default="all-subsets", help="nested:M or all-subsets")
    p.add_argument("--kernel", choices=KERNELS, default="gaussian")
    p.add_argument("--q", type=float, default=2.0)
    p.add_argument("--bandwidth-grid", default=None, help="rel:LO:HI:NUM (default rel:0.05:2:30), log:LO:HI:NUM or list")
    p.add_argument("--fast-cv", action="store_true", help="closed-form leave-one-out scores")
    p.add_argument("--out", required=True)


# -- commands -------------------------------------------------------------


def load_simulation_config(path, overrides: dict):
    """DesignConfig and method list from a JSON file plus flag overrides."""
    doc = json.loads(Path(path).read_text()) if path else {}
    if not isinstance(doc, dict):
        raise ValueError("config: top level must be a JSON object")
    schema = doc.pop("schema", SIMULATE_SCHEMA)
    if schema != SIMULATE_SCHEMA:
        raise ValueError(f"schema: expected {SIMULATE_SCHEMA!r}, got {schema!r}")
    methods = doc.pop("methods", None)
    doc.update({k: v for k, v in overrides.items() if v is not None})
    for key in ("design", "n"):
        if key not in doc:
            raise ValueError(f"{key}: required field missing")
    return simulation.DesignConfig.from_dict(doc), methods


def cmd_simulate(args) -> int:
    started = _now()
    overrides = {"design": args.design, "n": args.n, "seed": args.seed, "replications": args.replications,
                 "error_case": args.error_case, "r2": args.r2, "alpha": args.alpha}
    cfg, methods = load_simulation_config(args.config, overrides)
    if args.methods:
        methods = args.methods
    out = _prepare_out(args.out)
    report = simulation.run_replications(cfg, methods, threads=args.threads)
    written = []
    _write(out, "report.csv", report.to_csv(), written)
    _write(out, "report.json", report.to_json() + "\n", written)
    echo = {"schema": SIMULATE_SCHEMA, **cfg.to_dict(), "methods": list(report.methods)}
    _manifest(out, "simulate", echo, cfg.seed, started, written)
    if report.failures:
        log.warning("%d of %d replications excluded", len(report.failures), cfg.replications)
        return EXIT_PARTIAL
    return EXIT_OK


def _weight_table_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["rank", "model", "covariates", "bandwidth", "hat_trace", "weight"])
    for r, row in enumerate(rows, start=1):
        w.writerow([r, row["model"], " ".join(row["names"]), repr(row["bandwidth"]), repr(row["hat_trace"]),
                    repr(row["weight"])])
    return buf.getvalue()


def _config_echo(args, command):
    d = {k: v for k, v in vars(args).items() if k not in ("func", "verbose")}
    d["command"] = command
    return d


def cmd_fit(args) -> int:
    started = _now()
    ds = _load(args.data, args)
    cs = _candidates(args.candidates, ds, args.kernel, args.q)
    grid = parse_bandwidth_grid(args.bandwidth_grid, args.q)
    out = _prepare_out(args.out)
    rep = empirical.fit_report(ds, cs, grid, args.threshold, args.fast_cv)
    written = []
    _write(out, "fit.json", _dump(rep), written)
    _write(out, "weights.csv", _weight_table_csv(rep["weight_table"]), written)
    if not rep["weight_table"]:
        print(f"note: no candidate has SVMMA weight above {args.threshold:g}; weight table is empty")
    _manifest(out, "fit", _config_echo(args, "fit"), None, started, written)
    mse = rep["mse"]
    print("full-sample MSE: " + ", ".join(f"{m} {mse[m]:.4f}" for m in empirical.SVCM_METHODS))
    return EXIT_OK


def _mspe_csv(rows, methods) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["repeat", "seed", "method", "mspe"])
    for r in rows:
        if "error" in r:
            continue
        for m in methods:
            w.writerow([r["repeat"], "" if r["seed"] is None else r["seed"], m, repr(r["mspe"][m])])
    return buf.getvalue()


def cmd_predict(args) -> int:
    started = _now()
    methods = args.methods or list(empirical.ALL_METHODS)
    if (args.test is None) == (args.split is None):
        raise UsageError("give either a test CSV or --split N0")
    ds = _load(args.data, args)
    cs = _candidates(args.candidates, ds, args.kernel, args.q)
    grid = parse_bandwidth_grid(args.bandwidth_grid, args.q)
    out = _prepare_out(args.out)
    if args.test is not None:
        test = _load(args.test, args)
        rows = [{"repeat": 0, "seed": None,
                 "mspe": empirical.prediction_errors(ds, test, cs, methods, grid, args.fast_cv)}]
    else:
        rows = empirical.repeated_splits(ds, cs, args.split, args.seed, args.repeat, methods, grid,
                                         args.fast_cv, args.threads)
    failures = [r for r in rows if "error" in r]
    if len(failures) == len(rows):
        raise SVMMAError(f"all {len(rows)} splits failed; first: {failures[0]['error']}")
    summary = empirical.summarise_mspe(rows, methods)
    written = []
    _write(out, "mspe.csv", _mspe_csv(rows, methods), written)
    _write(out, "summary.json", _dump({"methods": methods, "summary": summary, "failed": len(failures),
                                       "failures": failures}), written)
    _manifest(out, "predict", _config_echo(args, "predict"), args.seed, started, written)
    for m in methods:
        print(f"{m:12s} mean {summary[m]['mean']:.4f}  median {summary[m]['median']:.4f}")
    if failures:
        print(f"{len(failures)} of {len(rows)} splits excluded (see summary.json)", file=sys.stderr)
        return EXIT_PARTIAL
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="svmma", description="Spatially varying coefficient model averaging")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run a Monte-Carlo design")
    s.add_argument("--config", help="JSON config with a 'schema' key; flags override its values")
    s.add_argument("--out", required=True)
    s.add_argument("--threads", type=int, default=1)
    s.add_argument("--design", type=int)
    s.add_argument("--n", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--replications", type=int)
    s.add_argument("--error-case", choices=simulation.ERROR_CASES)
    s.add_argument("--r2", type=float)
    s.add_argument("--alpha", type=float)
    s.add_argument("--methods", type=_split_names)
    s.set_defaults(func=cmd_simulate)

    f = sub.add_parser("fit", help="fit and average all candidates on one dataset")
    f.add_argument("data")
    _schema_args(f)
    f.add_argument("--threshold", type=float, default=empirical.WEIGHT_THRESHOLD)
    f.set_defaults(func=cmd_fit)

    p = sub.add_parser("predict", help="held-out prediction error")
    p.add_argument("data", help="training CSV (or the full CSV with --split)")
    p.add_argument("test", nargs="?")
    _schema_args(p)
    p.add_argument("--split", type=int, metavar="N0", help="random training size")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--repeat", type=int, default=1)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--methods", type=_split_names)
    p.set_defaults(func=cmd_predict)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (UsageError, SVMMAError, ValueError, OSError, np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FATAL


if __name__ == "__main__":
    sys.exit(main())
