"""Command-line entry point.

Every subcommand resolves its parameters (built-in defaults, then
``--config`` JSON, then explicit flags), validates them all, computes, and
only then writes output.  Files written with ``--out`` get a sidecar
``<out>.manifest.json`` that can be fed back through ``--config``.

Exit status: 0 success, 1 usage or validation error, 2 runtime/model error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
from pathlib import Path

from . import __version__
from .link_dynamics import (
    LinkDynamics,
    MaintenancePolicy,
    Region,
    RegionThresholds,
    classify_region,
    consensus_lower_bound,
)
from .montecarlo import (
    FitError,
    SimConfig,
    SweepRecord,
    TransitionCounts,
    fit_overheads,
    sweep,
    trajectory,
    trajectory_csv,
)
from .scalability import (
    NoOptimumError,
    log_grid,
    optimum_report,
    region_tau_bound,
    scalability_point,
    tau_envelope,
)
from .topology import ConstellationGeometry

log = logging.getLogger("leoscale")

FULL_SWEEP_N = [100, 400, 900, 1600, 2500, 3600, 6400, 8100]

EXIT_USAGE = 1
EXIT_RUNTIME = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# Built-in parameter defaults per subcommand; None means unset.
_SIM_DEFAULTS = {
    "alpha": 1e-5,
    "beta": 0.8,
    "sigma": 1e-12,
    "k": 10,
    "warmup": 100,
    "slots": 200,
    "replications": 50,
    "seed": 0,
    "refresh_traffic": True,
    "estimation": "pooled",
}

PARAM_DEFAULTS = {
    "analyze": {
        "n_min": 100.0,
        "n_max": 1e8,
        "points": 61,
        "n": None,
        "sigma": 1e-10,
        "alpha": 1e-6,
        "beta": 0.5,
        "k": "1",
        "hk": None,
        "region": None,
        "eps": None,
    },
    "optimal-size": {
        "sigma": 1e-6,
        "alpha": 1e-5,
        "beta": 0.8,
        "k": "10",
        "hk": None,
    },
    "simulate": {"n": 100, **_SIM_DEFAULTS},
    "sweep": {"n_list": [100, 400, 900], "full_scale": False, **_SIM_DEFAULTS},
    "trajectory": {
        "n": 10000,
        "alpha": 0.5,
        "beta": 0.5,
        "slots": 900,
        "seed": 0,
    },
    "fit": {
        "sweep": None,
        "k": None,
        "alpha": None,
        "beta": None,
        "hk_source": "estimated",
    },
}


def _add_common(p: argparse.ArgumentParser, fmt_default: str) -> None:
    p.add_argument("--config", help="JSON parameter file or a previous run manifest")
    p.add_argument("--out", help="output path (default: stdout)")
    p.add_argument("--format", choices=("csv", "json"), default=None, help=f"default {fmt_default}")
    p.add_argument("--threads", type=int, default=None, help="worker threads (default: all cores)")
    p.add_argument("-v", "--verbose", action="store_true")


def _add_sim(p: argparse.ArgumentParser) -> None:
    p.add_argument("--alpha", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--sigma", type=float)
    p.add_argument("--k", type=int, help="maintenance period in slots")
    p.add_argument("--warmup", type=int, help="warm-up slots t0")
    p.add_argument("--slots", type=int, help="measurement slots t1")
    p.add_argument("--replications", type=int)
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument(
        "--fixed-traffic",
        dest="refresh_traffic",
        action="store_const",
        const=False,
        help="draw the source-destination permutation once per replication",
    )
    p.add_argument("--estimation", choices=("pooled", "replication"))


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="leoscale", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"leoscale {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("analyze", help="closed-form scalability curve over n")
    p.add_argument("--n-min", type=float)
    p.add_argument("--n-max", type=float)
    p.add_argument("--points", type=int)
    p.add_argument("--n", type=float, help="evaluate a single size instead of a grid")
    p.add_argument("--sigma", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--k", help="maintenance period, integer or 'inf'")
    p.add_argument("--hk", type=float, help="override the consensus bound (bits/slot)")
    p.add_argument("--region", help="add a region bound column: I, II, III, IV or 'auto'")
    p.add_argument("--eps", type=float, nargs=4, metavar=("E1", "E2", "E3", "E4"))
    _add_common(p, "csv")

    p = sub.add_parser("optimal-size", help="optimal constellation size and maximum scalability")
    p.add_argument("--sigma", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--k", help="maintenance period, integer or 'inf'")
    p.add_argument("--hk", type=float, help="override the consensus bound (bits/slot)")
    _add_common(p, "json")

    p = sub.add_parser("simulate", help="Monte-Carlo replications at one size")
    p.add_argument("--n", type=int)
    _add_sim(p)
    _add_common(p, "csv")

    p = sub.add_parser("sweep", help="Monte-Carlo sweep over sizes")
    p.add_argument("--n-list", type=int, nargs="+")
    p.add_argument(
        "--full-scale",
        action="store_const",
        const=True,
        help="full sweep: n up to 8100, 800 slots, 1000 replications",
    )
    _add_sim(p)
    _add_common(p, "csv")

    p = sub.add_parser("trajectory", help="per-slot ON-link count and connectivity")
    p.add_argument("--n", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--slots", type=int)
    p.add_argument("--seed", type=int)
    _add_common(p, "csv")

    p = sub.add_parser("fit", help="fit overhead coefficients to a sweep CSV")
    p.add_argument("--sweep", help="sweep CSV written by 'leoscale sweep'")
    p.add_argument("--k", type=int)
    p.add_argument("--alpha", type=float, help="fallback dynamics for missing estimates")
    p.add_argument("--beta", type=float)
    p.add_argument("--hk-source", choices=("estimated", "configured"))
    _add_common(p, "json")
    return parser


def _load_config(path: str, command: str) -> dict:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise UsageError(f"config {path} must hold a JSON object")
    if "params" in data and "subcommand" in data:
        if data["subcommand"] != command:
            raise UsageError(f"manifest {path} is for '{data['subcommand']}', not '{command}'")
        data = data["params"]
    unknown = set(data) - set(PARAM_DEFAULTS[command])
    if unknown:
        raise UsageError(f"unknown parameters in {path}: {', '.join(sorted(unknown))}")
    return data


def resolve_params(command: str, args: argparse.Namespace) -> dict:
    defaults = PARAM_DEFAULTS[command]
    params = dict(defaults)
    if args.config:
        params.update(_load_config(args.config, command))
    for name in defaults:
        v = getattr(args, name, None)
        if v is not None:
            params[name] = v
    return params


def _dyn(params) -> LinkDynamics:
    try:
        return LinkDynamics(float(params["alpha"]), float(params["beta"]))
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from exc


def _policy(value) -> MaintenancePolicy:
    try:
        return MaintenancePolicy.parse(value)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid k: {exc}") from exc


def _nonneg(name, v):
    if v is not None and not (v >= 0 and math.isfinite(v)):
        raise UsageError(f"{name} must be finite and >= 0, got {v}")


def _sim_config(params) -> SimConfig:
    try:
        return SimConfig(
            warmup_slots=int(params["warmup"]),
            measure_slots=int(params["slots"]),
            replications=int(params["replications"]),
            master_seed=int(params["seed"]),
            k=int(params["k"]),
            sigma=float(params["sigma"]),
            refresh_traffic_each_slot=bool(params["refresh_traffic"]),
            estimation=params["estimation"],
        )
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from exc


def _square(n) -> int:
    n = int(n)
    m = math.isqrt(n) if n > 0 else 0
    if m * m != n or m < 3:
        raise UsageError(f"n must be a perfect square >= 9, got {n}")
    return n


def _rows_out(header, rows, fmt) -> str:
    if fmt == "json":
        return json.dumps([dict(zip(header, r)) for r in rows], indent=2) + "\n"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _num(v):
    return "" if v is None else repr(float(v))


# --- subcommands: each returns a prepared callable so validation precedes work


def prepare_analyze(params):
    sigma = params["sigma"]
    _nonneg("sigma", sigma)
    _nonneg("hk", params["hk"])
    dyn = _dyn(params)
    policy = _policy(params["k"])
    if params["n"] is not None:
        if not params["n"] >= 1:
            raise UsageError(f"n must be >= 1, got {params['n']}")
        grid = [float(params["n"])]
    else:
        try:
            grid = log_grid(float(params["n_min"]), float(params["n_max"]), int(params["points"]))
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
    thr = RegionThresholds()
    if params["eps"] is not None:
        try:
            thr = RegionThresholds(*map(float, params["eps"]))
        except (TypeError, ValueError) as exc:
            raise UsageError(str(exc)) from exc
    region = params["region"]
    if region is not None:
        if str(region).lower() == "auto":
            region = classify_region(dyn, thr)
            if region is Region.V:
                raise UsageError(f"(alpha, beta) = ({dyn.alpha}, {dyn.beta}) falls in region V")
        else:
            try:
                region = Region(str(region).upper())
            except ValueError as exc:
                raise UsageError(f"unknown region {params['region']!r}") from exc
            if region is Region.V:
                raise UsageError("region V has no closed-form bound")
        if policy.is_infinite:
            raise UsageError("region bounds need a finite k")
    hk = params["hk"] if params["hk"] is not None else consensus_lower_bound(dyn, policy)

    def run(fmt):
        header = ["n", "tau", "tau1", "tauInf", "contention_term", "consensus_term"]
        if region is not None:
            header.append("tau_region")
        rows = []
        for n in grid:
            pt = scalability_point(n, sigma, hk)
            t1, tinf = tau_envelope(n, sigma, dyn)
            row = [_num(n), _num(pt.tau), _num(t1), _num(tinf), _num(pt.contention), _num(pt.consensus)]
            if region is not None:
                row.append(_num(region_tau_bound(region, n, sigma, dyn, policy.period)))
            rows.append(row)
        return _rows_out(header, rows, fmt)

    return run


def prepare_optimal_size(params):
    sigma = params["sigma"]
    _nonneg("sigma", sigma)
    _nonneg("hk", params["hk"])
    if params["hk"] is not None:
        hk = float(params["hk"])
    else:
        hk = consensus_lower_bound(_dyn(params), _policy(params["k"]))

    def run(fmt):
        rep = optimum_report(sigma, hk)
        out = {
            "sigma": sigma,
            "hk": hk,
            "n_star": rep.n_star,
            "tau_max": rep.tau_max,
            "tau_max_8sqrt_n_star": rep.tau_max_8sqrt,
            "n_star_contention_free": rep.n_star_contention_free,
            "n_star_consensus_free": rep.n_star_consensus_free,
        }
        if fmt == "csv":
            return _rows_out(list(out), [[_num(v) for v in out.values()]], "csv")
        return json.dumps(out, indent=2) + "\n"

    return run


def prepare_simulate(params, threads):
    n = _square(params["n"])
    dyn = _dyn(params)
    cfg = _sim_config(params)

    def run(fmt):
        res = sweep([n], dyn, cfg, threads=threads)
        header = [
            "n", "replication", "tau_sim", "avg_hops", "reachable_fraction",
            "alpha_hat", "beta_hat", "hk_hat", "mean_connectivity", "mean_on_links",
        ]
        rows = [
            [str(r.n), str(r.replication), _num(r.tau_sim), _num(r.avg_hops),
             _num(r.reachable_fraction), _num(r.alpha_hat), _num(r.beta_hat),
             _num(r.hk_hat), _num(r.mean_connectivity), _num(r.mean_on_links)]
            for r in res.replications
        ]
        return _rows_out(header, rows, fmt)

    return run


def prepare_sweep(params, threads):
    if params["full_scale"]:
        params.update(n_list=FULL_SWEEP_N, slots=800, replications=1000)
    sizes = [_square(n) for n in params["n_list"]]
    dyn = _dyn(params)
    cfg = _sim_config(params)

    def run(fmt):
        res = sweep(sizes, dyn, cfg, threads=threads)
        if fmt == "json":
            rows = [r.csv_row() for r in res.records]
            return _rows_out(list(SweepRecord.CSV_COLUMNS), rows, "json")
        return res.to_csv()

    return run


def prepare_trajectory(params):
    try:
        geometry = ConstellationGeometry.square(int(params["n"]))
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    dyn = _dyn(params)
    slots = int(params["slots"])
    if slots < 1:
        raise UsageError(f"slots must be >= 1, got {slots}")

    def run(fmt):
        pts = trajectory(geometry, dyn, slots, seed=int(params["seed"]))
        if fmt == "json":
            return json.dumps([p.__dict__ for p in pts]) + "\n"
        return trajectory_csv(pts)

    return run


def _read_sweep_csv(path: str) -> list[SweepRecord]:
    try:
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise UsageError(f"cannot read sweep {path}: {exc}") from exc
    missing = set(SweepRecord.CSV_COLUMNS) - set(rows[0] if rows else {})
    if missing:
        raise UsageError(f"{path} is not a sweep CSV (missing {', '.join(sorted(missing))})")

    def opt(v):
        f = float(v)
        return None if math.isnan(f) else f

    return [
        SweepRecord(
            n=int(r["n"]),
            tau_mean=float(r["tau_mean"]),
            tau_std=float(r["tau_std"]),
            tau_analytic=float(r["tau_analytic"]),
            avg_hops=float(r["avg_hops"]),
            reachable_fraction=float(r["reachable_fraction"]),
            alpha_hat=opt(r["alpha_hat"]),
            beta_hat=opt(r["beta_hat"]),
            counts=TransitionCounts(),
            replications=0,
        )
        for r in rows
    ]


def prepare_fit(params):
    if not params["sweep"]:
        raise UsageError("fit needs --sweep <csv>")
    # Fill k and fallback dynamics from the sweep's manifest when not given.
    manifest = Path(params["sweep"] + ".manifest.json")
    if manifest.exists():
        try:
            src = json.loads(manifest.read_text()).get("params", {})
        except json.JSONDecodeError:
            src = {}
        for name in ("k", "alpha", "beta"):
            if params[name] is None and name in src:
                params[name] = src[name]
    defaults = {"k": 10, "alpha": 1e-5, "beta": 0.8}
    for name, v in defaults.items():
        if params[name] is None:
            params[name] = v
    if params["hk_source"] not in ("estimated", "configured"):
        raise UsageError("hk_source must be 'estimated' or 'configured'")
    dyn = _dyn(params)
    k = int(params["k"])
    if k < 1:
        raise UsageError(f"k must be >= 1, got {k}")
    records = _read_sweep_csv(params["sweep"])

    def run(fmt):
        res = fit_overheads(records, k, dyn, hk_source=params["hk_source"])
        out = res.to_dict()
        out["hk_source"] = params["hk_source"]
        out["contention_term"] = "a * n * avg_hops"
        if fmt == "csv":
            return _rows_out(list(out), [[str(v) for v in out.values()]], "csv")
        return json.dumps(out, indent=2) + "\n"

    return run


def _manifest_format(path):
    if not path:
        return None
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError):
        return None
    return data.get("format") if isinstance(data, dict) and "subcommand" in data else None


_DEFAULT_FORMAT = {
    "analyze": "csv", "optimal-size": "json", "simulate": "csv",
    "sweep": "csv", "trajectory": "csv", "fit": "json",
}


def _write(path: str, text: str) -> None:
    tmp = f"{path}.tmp-{os.getpid()}"
    with open(tmp, "w", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def manifest_for(command: str, params: dict, out: str | None, fmt: str) -> dict:
    return {
        "subcommand": command,
        "params": params,
        "seed": params.get("seed"),
        "format": fmt,
        "version": __version__,
        "outputs": [out] if out else [],
    }


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    command = args.command
    if args.threads is not None and args.threads < 1:
        print("leoscale: error: --threads must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    fmt = args.format or _manifest_format(args.config) or _DEFAULT_FORMAT[command]
    try:
        params = resolve_params(command, args)
        if command == "analyze":
            run = prepare_analyze(params)
        elif command == "optimal-size":
            run = prepare_optimal_size(params)
        elif command == "simulate":
            run = prepare_simulate(params, args.threads)
        elif command == "sweep":
            run = prepare_sweep(params, args.threads)
        elif command == "trajectory":
            run = prepare_trajectory(params)
        else:
            run = prepare_fit(params)
    except UsageError as exc:
        print(f"leoscale {command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    try:
        text = run(fmt)
    except (NoOptimumError, FitError, ValueError, ArithmeticError) as exc:
        print(f"leoscale {command}: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME

    if args.out:
        _write(args.out, text)
        manifest = manifest_for(command, params, args.out, fmt)
        _write(args.out + ".manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")
        log.info("wrote %s", args.out)
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
