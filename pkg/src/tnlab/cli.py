"""Command-line entry point: ``tnlab <subcommand>``.

Every subcommand prints a JSON RunReport. The ``results`` member depends only
on the command, the resolved configuration and the seed; wall-clock timings
live under ``timing``. Exit codes: 0 success (including empty findings),
2 input error, 3 internal-consistency failure.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import json
import logging
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .appendix import V_CAP, reproduce
from .entropy_system import (SystemSpec, structure_check, pq_values, solve, solve_degenerate,
                             split_brackets)
from .errors import ConsistencyError, TnlabError
from .ka import (KaConfig, case_analysis, dedup_params, fit_lambdas, rank_condition, sign_table_for,
                 translate)
from .models import make_model
from .tn import (MatrixSet, SearchOptions, TnCertificate, independence_filter, search_certificate,
                 sign_change_filter, verification_failures)

log = logging.getLogger("tnlab")

EXIT_OK, EXIT_INPUT, EXIT_CONSISTENCY = 0, 2, 3

DEFAULT_CAPS = {"appendix": V_CAP, "exp": (-30.0, 10.0)}


class UsageError(Exception):
    """Bad command-line or configuration input (exit code 2)."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


def dumps(obj) -> str:
    return json.dumps(jsonable(obj), sort_keys=True, indent=2, allow_nan=False)


# ---------------------------------------------------------------- config

def read_config(path: str | None) -> tuple[configparser.ConfigParser, str]:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    if path is None:
        return cp, ""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise UsageError(f"malformed config {path}: {exc}") from exc
    return cp, text


def _get(cp, section, key, flag, conv=str, default=None):
    if flag is not None:
        return flag
    if cp.has_option(section, key):
        raw = cp.get(section, key)
        try:
            return conv(raw)
        except ValueError as exc:
            raise UsageError(f"[{section}] {key}: cannot parse {raw!r}") from exc
    return default


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.replace(",", " ").split()]
    except ValueError as exc:
        raise UsageError(f"cannot parse numbers from {text!r}") from exc


def _model_from(args, cp):
    kind = _get(cp, "model", "kind", args.model, default="exp")
    k = _get(cp, "model", "k", args.k, float, 1e8)
    table = None
    if kind in ("table", "custom-table", "custom_table"):
        if not (cp.has_option("model", "t") and cp.has_option("model", "a")):
            raise UsageError("table model needs [model] t = ... and a = ... sample lists")
        table = (_floats(cp.get("model", "t")), _floats(cp.get("model", "a")))
    model = make_model(kind, k=k, table=table)
    return kind, model


def _brackets(text: str):
    out = []
    for part in text.replace(";", " ").split():
        bits = part.split(",") if "," in part else part.split(":")
        if len(bits) != 2:
            raise UsageError(f"bracket {part!r} must look like lo,hi")
        try:
            out.append((float(bits[0]), float(bits[1])))
        except ValueError as exc:
            raise UsageError(f"bracket {part!r} must look like lo,hi") from exc
    return out


def _config_hash(text: str, resolved: dict) -> str:
    h = hashlib.sha256()
    h.update(text.encode())
    h.update(dumps(resolved).encode())
    return h.hexdigest()


def _emit(args, results: dict, resolved: dict, config_text: str, seed, started: float, extra_timing=None):
    report = {
        "tool": "tnlab",
        "version": __version__,
        "command": list(args.argv),
        "config_hash": _config_hash(config_text, resolved),
        "seed": seed,
        "results": results,
        "timing": {"wall_seconds": time.perf_counter() - started, **(extra_timing or {})},
    }
    text = dumps(report) + "\n"
    if getattr(args, "output", None):
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------- solve-system

def _system_from(args, cp):
    kind, model = _model_from(args, cp)
    l1 = _get(cp, "system", "lambda1", args.l1, float)
    l2 = _get(cp, "system", "lambda2", args.l2, float)
    if l1 is None or l2 is None:
        raise UsageError("lambda1 and lambda2 are required (--l1/--l2 or [system])")
    grid = _get(cp, "system", "grid", args.grid, int, 100_000)
    if args.bracket:
        brackets = [b for text in args.bracket for b in _brackets(text)]
    elif cp.has_option("system", "brackets"):
        brackets = _brackets(cp.get("system", "brackets"))
    else:
        cap = DEFAULT_CAPS.get(kind) or model.domain()
        brackets = [tuple(cap)]
    return kind, SystemSpec(model, l1, l2), brackets, grid


def run_solver(spec: SystemSpec, brackets, grid):
    if spec.degenerate:
        sols = solve_degenerate(spec)
        return sols, {"route": "degenerate", **sols.as_dict()}
    sols = solve(spec, brackets, grid)
    out = {"route": "reduced", **sols.as_dict(), "structure": structure_check(spec, sols).as_dict()}
    return sols, out


def write_pq_csv(path: str, spec: SystemSpec, brackets, samples: int):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["v", "p", "q"])
        for lo, hi in brackets:
            for a, b in split_brackets(spec, lo, hi):
                v = np.linspace(a, b, samples)
                p, q = pq_values(spec, v)
                for row in zip(v, p, q):
                    w.writerow([format(float(x), ".17g") for x in row])


def cmd_solve_system(args) -> int:
    started = time.perf_counter()
    cp, text = read_config(args.config)
    kind, spec, brackets, grid = _system_from(args, cp)
    _, results = run_solver(spec, brackets, grid)
    results["model"] = spec.model.describe()
    results["lambda1"], results["lambda2"] = spec.lambda1, spec.lambda2
    if args.emit_pq:
        if spec.degenerate:
            raise UsageError("--emit-pq needs nonzero lambda1 and lambda2")
        write_pq_csv(args.emit_pq, spec, brackets, args.pq_samples)
    resolved = {"model": spec.model.describe(), "lambda1": spec.lambda1, "lambda2": spec.lambda2,
                "brackets": brackets, "grid": grid}
    _emit(args, results, resolved, text, args.seed, started)
    return EXIT_OK


# ---------------------------------------------------------------- check-ka

def _parse_points(text: str):
    pts = []
    for chunk in text.replace("\n", ";").split(";"):
        if chunk.strip():
            vals = _floats(chunk)
            if len(vals) != 2:
                raise UsageError(f"point {chunk!r} must be 'u, v'")
            pts.append(vals)
    return pts


def _points_from_solver_json(path: str):
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read solver output {path}: {exc}") from exc
    res = data.get("results", data)
    try:
        return [[s["s"], s["t"]] for s in res["solutions"]]
    except (KeyError, TypeError) as exc:
        raise UsageError(f"{path} does not look like solve-system output") from exc


def _ka_points(args, cp, model):
    if args.points:
        return _parse_points(args.points), "inline"
    if args.points_file:
        return _points_from_solver_json(args.points_file), "file"
    source = _get(cp, "points", "source", "from-solver" if args.from_solver else None, default=None)
    if source == "from-solver":
        _, spec, brackets, grid = _system_from(args, cp)
        sols, _ = run_solver(spec, brackets, grid)
        return sols.st.tolist(), "from-solver"
    if source == "file" or (source is None and cp.has_option("points", "file")):
        return _points_from_solver_json(cp.get("points", "file")), "file"
    if cp.has_option("points", "values"):
        return _parse_points(cp.get("points", "values")), "inline"
    raise UsageError("no points given (--points, --points-file, --from-solver or [points])")


def analyse_config(config: KaConfig, Q=None, precise: bool = False) -> dict:
    out = {"N": config.N, "points": config.params.tolist()}
    out["rank"] = rank_condition(config, Q, precise=precise).as_dict()
    a_vals = np.asarray(config.model.a(config.v))
    out["independence_filter"] = independence_filter(config.u, config.v, a_vals)
    fits = []
    for i in range(config.N):
        try:
            fits.append({"pivot": i, **fit_lambdas(translate(config, i)).as_dict()})
        except TnlabError as exc:
            if isinstance(exc, ConsistencyError):
                raise
            fits.append({"pivot": i, "error": str(exc)})
    out["lambda_fits"] = fits
    table = sign_table_for(config)
    out["sign_table"] = table.as_dict()
    out["case_analysis"] = case_analysis(config, table)
    refutes = config.N >= 4 and bool(table.constant_sign_rows) and not table.degenerate_pairs
    out["verdict"] = f"no T_{config.N} ordering" if refutes else "inconclusive"
    return out, table


def cmd_check_ka(args) -> int:
    started = time.perf_counter()
    cp, text = read_config(args.config)
    _, model = _model_from(args, cp)
    raw, source = _ka_points(args, cp, model)
    params, dropped = dedup_params(model, raw)
    if dropped:
        log.warning("dropped %d duplicate point(s): indices %s", len(dropped), dropped)
    Qtext = args.q or (cp.get("analysis", "q") if cp.has_option("analysis", "q") else None)
    Q = None
    if Qtext:
        vals = _floats(Qtext)
        if len(vals) != 6:
            raise UsageError("Q needs six entries q11,q12,q21,q22,q31,q32")
        Q = np.array(vals).reshape(3, 2)
    config = KaConfig(params, model)
    resolved = {"model": model.describe(), "points": params.tolist(), "Q": None if Q is None else Q.tolist(),
                "precise_rank": args.precise_rank}
    rank = rank_condition(config, Q, precise=args.precise_rank)
    if rank.rank == 1 or config.N < 4:
        results = {"N": config.N, "source": source, "dropped_duplicates": dropped, "rank": rank.as_dict()}
        if rank.rank == 1:
            # distinct points of K_a cannot produce rank one; treat it as a broken model or input
            results["error"] = "rank of A_X - Pi^N(Q) is 1, which distinct K_a points cannot produce"
            _emit(args, results, resolved, text, None, started)
            print(f"tnlab: consistency failure: {results['error']}", file=sys.stderr)
            return EXIT_CONSISTENCY
        results["error"] = "T_N analysis needs N >= 4"
        _emit(args, results, resolved, text, None, started)
        return EXIT_INPUT
    results, table = analyse_config(config, Q, args.precise_rank)
    results["source"] = source
    results["dropped_duplicates"] = dropped
    if args.report_md:
        Path(args.report_md).write_text(table.to_markdown() + "\n")
    _emit(args, results, resolved, text, None, started)
    return EXIT_OK


# ---------------------------------------------------------------- tn

def _load_tn_input(path: str):
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read {path}: {exc}") from exc
    if isinstance(data, list):
        data = {"matrices": data}
    if "matrices" not in data:
        raise UsageError(f"{path}: expected a 'matrices' list")
    try:
        mset = MatrixSet(np.array(data["matrices"], dtype=float), data.get("labels"))
    except (ValueError, TypeError) as exc:
        raise UsageError(f"{path}: malformed matrices ({exc})") from exc
    cert = None
    if data.get("certificate") is not None:
        c = data["certificate"]
        try:
            cert = TnCertificate(c["base"], c["increments"], c["multipliers"])
        except (KeyError, ValueError, TypeError) as exc:
            raise UsageError(f"{path}: malformed certificate ({exc})") from exc
    return mset, cert


def cmd_tn(args) -> int:
    started = time.perf_counter()
    mset, cert = _load_tn_input(args.input)
    text = Path(args.input).read_text()
    resolved = {"action": args.action, "rows": args.rows, "tol": args.tol}
    if args.action == "verify":
        if cert is None:
            raise UsageError("verify needs a 'certificate' object in the input")
        failures = verification_failures(mset, cert, args.tol)
        results = {"action": "verify", "passed": not failures, "failures": failures}
    elif args.action == "filter":
        rows = tuple(int(c) for c in args.rows)
        results = {"action": "filter", **sign_change_filter(mset, rows).as_dict()}
    else:
        opts = SearchOptions(exhaustive=args.exhaustive, max_orderings=args.max_orderings,
                             n_starts=args.starts, seed=args.seed, tol=args.tol)
        resolved.update(exhaustive=opts.exhaustive, max_orderings=opts.max_orderings, starts=opts.n_starts)
        res = search_certificate(mset, opts)
        results = {"action": "search", **res.as_dict()}
        if res.ordering is not None:
            results["ordering_labels"] = [mset.labels[k] for k in res.ordering]
    _emit(args, results, resolved, text, args.seed if args.action == "search" else None, started)
    return EXIT_OK


# ---------------------------------------------------------------- appendix

def cmd_appendix(args) -> int:
    started = time.perf_counter()
    opts = SearchOptions(exhaustive=True, seed=args.seed, n_starts=args.starts)
    results = reproduce(k=args.k, grid=args.grid, search=not args.no_search, search_opts=opts)
    timing = results.pop("timing")
    if results["rank"]["rank"] == 1:
        raise ConsistencyError("rank of A_X - Pi^6(0) is 1, which distinct K_a points cannot produce")
    if args.report_md:
        from .ka import KaConfig as _K
        from .appendix import appendix_spec
        cfg = _K(np.array([[s["s"], s["t"]] for s in results["solutions"]["solutions"]]), appendix_spec(args.k).model)
        Path(args.report_md).write_text(sign_table_for(cfg).to_markdown() + "\n")
    resolved = {"k": args.k, "grid": args.grid, "search": not args.no_search, "starts": args.starts}
    _emit(args, results, resolved, "", args.seed, started, timing)
    return EXIT_OK


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="tnlab", description="T_N configuration checks for the entropy set K_a")
    p.add_argument("--version", action="version", version=f"tnlab {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def model_flags(sp):
        sp.add_argument("--config", help="key-value config file with [model]/[system]/[points] sections")
        sp.add_argument("--model", choices=["exp", "appendix", "table"], default=None)
        sp.add_argument("--k", type=float, default=None, help="curvature constant of the appendix model")
        sp.add_argument("--output", "-o", help="write the JSON report here instead of stdout")

    def system_flags(sp):
        sp.add_argument("--l1", type=float, default=None, help="lambda1")
        sp.add_argument("--l2", type=float, default=None, help="lambda2")
        sp.add_argument("--bracket", action="append", help="search interval lo,hi (repeatable)")
        sp.add_argument("--grid", type=int, default=None, help="scan points per bracket")

    s = sub.add_parser("solve-system", help="solve the two-unknown entropy system")
    model_flags(s)
    system_flags(s)
    s.add_argument("--emit-pq", metavar="CSV", help="write (v, p, q) samples for plotting")
    s.add_argument("--pq-samples", type=int, default=2001)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_solve_system)

    c = sub.add_parser("check-ka", help="rank, coefficient fits and sign table of a K_a configuration")
    model_flags(c)
    system_flags(c)
    c.add_argument("--points", help="inline points 'u,v; u,v; ...'")
    c.add_argument("--points-file", help="solve-system JSON output to take points from")
    c.add_argument("--from-solver", action="store_true", help="solve the configured system and use its solutions")
    c.add_argument("--q", help="Q entries q11,q12,q21,q22,q31,q32 (default: zero matrix)")
    c.add_argument("--report-md", help="write the sign table as a markdown table")
    c.add_argument("--precise-rank", action="store_true",
                   help="re-evaluate near-threshold singular values in 50-digit arithmetic")
    c.set_defaults(func=cmd_check_ka)

    t = sub.add_parser("tn", help="T_N certificate verify / sign-change filter / search")
    t.add_argument("action", choices=["verify", "filter", "search"])
    t.add_argument("input", help="JSON with 'matrices' (and 'certificate' for verify)")
    t.add_argument("--rows", default="12", help="row pair for the filter, e.g. 12, 13 or 23")
    t.add_argument("--tol", type=float, default=1e-10)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--max-orderings", type=int, default=None)
    t.add_argument("--starts", type=int, default=6)
    g = t.add_mutually_exclusive_group()
    g.add_argument("--exhaustive", dest="exhaustive", action="store_true", default=True)
    g.add_argument("--sampled", dest="exhaustive", action="store_false",
                   help="sample orderings at random instead of enumerating them")
    t.add_argument("--output", "-o")
    t.set_defaults(func=cmd_tn)

    a = sub.add_parser("appendix", help="reproduce the six-point example end to end")
    a.add_argument("--k", type=float, default=1e8)
    a.add_argument("--grid", type=int, default=100_000)
    a.add_argument("--no-search", action="store_true")
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("--starts", type=int, default=6)
    a.add_argument("--report-md")
    a.add_argument("--output", "-o")
    a.set_defaults(func=cmd_appendix)
    return p


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"tnlab: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="tnlab: %(levelname)s: %(message)s")
    args.argv = argv
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"tnlab: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ConsistencyError as exc:
        print(f"tnlab: consistency failure: {exc}", file=sys.stderr)
        return EXIT_CONSISTENCY
    except TnlabError as exc:
        print(f"tnlab: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
