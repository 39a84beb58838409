"""Batch front-end: generate instances, run analyses, drive seeded sweeps.

Subcommands: generate, concentrate, folner, spectrum, series, oracle, run.
Everything emits JSON (stdout or --out) with optional CSV companions; the
config-driven `run` writes one JSON report per (instance, analysis), a
summary CSV per analysis, and a manifest.  Re-running a fixed config
reproduces every report byte for byte; only the manifest's timing fields
move.  Exit codes: 0 ok, 2 config error, 3 resource cap, 4 non-convergence.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
import scipy

import jsonschema

from . import __version__, concentration, folner, oracle
from .errors import ConfigError, ConvergenceError, ResourceCapError
from .families import (
    DEFAULT_EXPANDER_SEEDS,
    expander_graphing,
    odometer_graphing,
    product_graphing,
    rotation_graphing,
)
from .graphing import Graphing, edges_to_csv, graphing_to_json, load_graphing


def _jsonable(obj):
    """Recursively convert reports to JSON-safe values (inf -> "inf")."""
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {
            f.name: _jsonable(getattr(obj, f.name))
            for f in dataclasses.fields(obj)
        }
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        obj = float(obj)
    if isinstance(obj, float):
        if math.isinf(obj):
            return "inf" if obj > 0 else "-inf"
        if obj.is_integer() and abs(obj) < 1e15:
            return obj
        return obj
    return obj


def _dump_json(payload, out: str | None) -> None:
    text = json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n"
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text, encoding="utf-8")


def _dump_csv(rows: list[list], header: list[str], path: str) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(str(_jsonable(v)) for v in row))
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _parse_grid(text: str) -> list[tuple[float, float]]:
    grid = []
    for part in text.split(";"):
        part = part.strip()
        if not part:
            continue
        pieces = part.split(",")
        if len(pieces) != 2:
            raise ConfigError(f"grid entry '{part}' is not 'delta,delta_prime'")
        grid.append((float(pieces[0]), float(pieces[1])))
    if not grid:
        raise ConfigError("empty grid")
    return grid


def _build_family_instance(family: str, params: dict) -> Graphing:
    if family == "rotation":
        return rotation_graphing(int(params["n"]), int(params.get("step", 1)))
    if family == "odometer":
        return odometer_graphing(int(params["levels"]))
    if family == "expander":
        n = int(params["n"])
        seed = int(params.get("seed", DEFAULT_EXPANDER_SEEDS.get(n, 7)))
        return expander_graphing(n, int(params.get("degree", 4)), seed)
    if family == "product":
        n = int(params["n"])
        step = int(params.get("step", 1))
        return product_graphing(rotation_graphing(n, step), rotation_graphing(n, step))
    raise ConfigError(f"unknown family '{family}'")


def _instance_label(family: str, params: dict) -> str:
    if family == "odometer":
        return f"{family}_L{int(params['levels'])}"
    return f"{family}_{int(params['n'])}"


# ---------------------------------------------------------------------------
# Subcommand handlers.


def _cmd_generate(args) -> int:
    params = {
        "n": args.n,
        "step": args.step,
        "levels": args.levels,
        "degree": args.degree,
        "seed": args.seed,
    }
    params = {k: v for k, v in params.items() if v is not None}
    g = _build_family_instance(args.family, params)
    _dump_json(graphing_to_json(g), args.out)
    if args.csv:
        Path(args.csv).parent.mkdir(parents=True, exist_ok=True)
        Path(args.csv).write_text(edges_to_csv(g), encoding="utf-8")
    return 0


def _cmd_concentrate(args) -> int:
    g = load_graphing(args.input)
    grid = _parse_grid(args.grid)
    if args.exact:
        profile = concentration.profile_exact(g, grid)
    else:
        profile = concentration.profile_heuristic(g, grid, effort=args.effort)
    payload = {"profile": profile, "input": args.input}
    if args.witness_target is not None:
        witness = concentration.nonconcentration_witness(
            g,
            delta=grid[0][0],
            target_distance=args.witness_target,
            effort=args.effort,
        )
        payload["witness"] = witness
    _dump_json(payload, args.out)
    if args.csv:
        rows = [
            [s.delta, s.delta_prime, s.c_lower, s.c_upper] for s in profile.samples
        ]
        _dump_csv(rows, ["delta", "delta_prime", "c_lower", "c_upper"], args.csv)
    return 0


def _cmd_folner(args) -> int:
    g = load_graphing(args.input)
    payload = {"input": args.input}
    cert = folner.folner_search(g, mass_cap=args.mass_cap, effort=args.effort)
    payload["certificate"] = cert
    if args.target_mass is not None:
        if args.strategy == "accumulate":
            result = folner.accumulate_invariant(
                g,
                epsilon=args.epsilon if args.epsilon is not None else 0.5,
                target_mass=args.target_mass,
                effort=args.effort,
            )
            payload["accumulation"] = result
        else:
            entry = folner.asymptotic_invariance_series(
                [g],
                set_builder=args.strategy,
                target_mass=args.target_mass,
                epsilon=args.epsilon if args.epsilon is not None else 0.5,
                effort=args.effort,
            )[0]
            payload["invariant_set"] = entry
    _dump_json(payload, args.out)
    if args.csv:
        rows = [
            [k, m, r]
            for k, (m, r) in enumerate(zip(cert.masses, cert.ratios))
        ]
        _dump_csv(rows, ["scale", "mass", "ratio"], args.csv)
    return 0


def _cmd_spectrum(args) -> int:
    g = load_graphing(args.input)
    report = folner.spectral_gap(g, method=args.method, tol=args.tol)
    _dump_json({"input": args.input, "spectrum": report}, args.out)
    if args.csv:
        rows = [[i, v] for i, v in enumerate(report.eigenvalue_estimates)]
        _dump_csv(rows, ["index", "eigenvalue"], args.csv)
    return 0


def _cmd_series(args) -> int:
    sizes = [int(s) for s in args.sizes.split(",") if s.strip()]
    family = []
    for size in sizes:
        params = {"n": size, "levels": size, "seed": args.seed}
        family.append(_build_family_instance(args.family, params))
    entries = folner.asymptotic_invariance_series(
        family,
        set_builder=args.strategy,
        target_mass=args.target_mass,
        effort=args.effort,
    )
    _dump_json({"family": args.family, "entries": entries}, args.out)
    if args.csv:
        rows = [
            [
                e.index,
                e.label,
                e.mass if e.mass is not None else "",
                e.report.max_defect if e.report else "",
                e.error or "",
            ]
            for e in entries
        ]
        _dump_csv(rows, ["index", "label", "mass", "max_defect", "error"], args.csv)
    return 0


def _cmd_oracle(args) -> int:
    g = load_graphing(args.input)
    if args.op == "ratio":
        atoms, ratio = oracle.brute_min_boundary_ratio(g, args.mass_lo, args.mass_hi)
        payload = {"op": "ratio", "set": atoms, "ratio": ratio}
    elif args.op == "concentration":
        c, (a, b) = oracle.brute_concentration(g, args.delta, args.delta_prime)
        payload = {"op": "concentration", "c": c, "witness": [a, b]}
    else:
        payload = {"op": "spectrum", "eigenvalues": oracle.brute_dense_spectrum(g)}
    _dump_json(payload, args.out)
    return 0


# ---------------------------------------------------------------------------
# Config-driven runner.

CONFIG_SCHEMA = {
    "type": "object",
    "required": ["family", "sweep", "analyses", "seed", "output"],
    "additionalProperties": False,
    "properties": {
        "family": {"enum": ["rotation", "odometer", "expander", "product"]},
        "sweep": {
            "type": "array",
            "minItems": 1,
            "items": {"type": "object"},
        },
        "analyses": {
            "type": "array",
            "items": {
                "oneOf": [
                    {"enum": ["spectrum", "folner", "concentrate", "series"]},
                    {
                        "type": "object",
                        "required": ["name"],
                        "properties": {
                            "name": {
                                "enum": [
                                    "spectrum",
                                    "folner",
                                    "concentrate",
                                    "series",
                                ]
                            }
                        },
                    },
                ]
            },
        },
        "seed": {"type": "integer"},
        "output": {"type": "string"},
        "threads": {"type": "integer", "minimum": 1},
    },
}


def _normalize_analyses(raw) -> list[dict]:
    out = []
    for item in raw:
        if isinstance(item, str):
            out.append({"name": item})
        else:
            out.append(dict(item))
    return out


def _run_analysis(name: str, params: dict, g: Graphing, label: str) -> dict:
    if name == "spectrum":
        report = folner.spectral_gap(
            g, method=params.get("method", "auto"), tol=params.get("tol", 1e-6)
        )
        return {"instance": label, "analysis": "spectrum", "report": report}
    if name == "folner":
        cert = folner.folner_search(
            g,
            mass_cap=params.get("mass_cap", 0.25),
            effort=params.get("effort", 8),
        )
        payload = {"instance": label, "analysis": "folner", "certificate": cert}
        if "epsilon" in params and "target_mass" in params:
            payload["accumulation"] = folner.accumulate_invariant(
                g,
                epsilon=params["epsilon"],
                target_mass=params["target_mass"],
                effort=params.get("effort", 8),
            )
        return payload
    if name == "concentrate":
        grid = [tuple(p) for p in params.get("grid", [[0.25, 0.25]])]
        if params.get("exact", False):
            profile = concentration.profile_exact(g, grid)
        else:
            profile = concentration.profile_heuristic(
                g, grid, effort=params.get("effort", 8)
            )
        return {"instance": label, "analysis": "concentrate", "profile": profile}
    raise ConfigError(f"unknown analysis '{name}'")


def _summary_rows(name: str, results: list[dict]) -> tuple[list[str], list[list]]:
    if name == "spectrum":
        header = ["instance", "gap", "method", "residual"]
        rows = [
            [r["instance"], r["report"].gap, r["report"].method, r["report"].residual]
            for r in results
        ]
    elif name == "folner":
        header = ["instance", "scale", "mass", "ratio"]
        rows = []
        for r in results:
            cert = r["certificate"]
            for k, (m, ratio) in enumerate(zip(cert.masses, cert.ratios)):
                rows.append([r["instance"], k, m, ratio])
    elif name == "concentrate":
        header = ["instance", "delta", "delta_prime", "c_lower", "c_upper"]
        rows = []
        for r in results:
            for s in r["profile"].samples:
                rows.append([r["instance"], s.delta, s.delta_prime, s.c_lower, s.c_upper])
    else:  # series
        header = ["index", "label", "mass", "max_defect", "error"]
        rows = [
            [
                e.index,
                e.label,
                e.mass if e.mass is not None else "",
                e.report.max_defect if e.report else "",
                e.error or "",
            ]
            for e in results
        ]
    return header, rows


def run_experiment(config: dict, out_dir: str | None = None, threads: int = 1) -> dict:
    """Execute a validated sweep config; returns the manifest."""
    try:
        jsonschema.validate(config, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        pointer = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config invalid at '{pointer}': {exc.message}") from exc
    started = time.time()
    out = Path(out_dir or config["output"])
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory '{out}': {exc}") from exc
    family = config["family"]
    seed = int(config["seed"])
    sweep = [dict(entry) for entry in config["sweep"]]
    for entry in sweep:
        entry.setdefault("seed", seed)
    analyses = _normalize_analyses(config["analyses"])
    threads = int(config.get("threads", threads) or threads)

    labels = [_instance_label(family, entry) for entry in sweep]

    def build(entry):
        return _build_family_instance(family, entry)

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        instances = list(pool.map(build, sweep))

    written: list[str] = []
    timings: dict[str, float] = {}
    for analysis_entry in analyses:
        name = analysis_entry["name"]
        params = {k: v for k, v in analysis_entry.items() if k != "name"}
        t0 = time.time()
        if name == "series":
            entries = folner.asymptotic_invariance_series(
                instances,
                set_builder=params.get("strategy", "arcs"),
                target_mass=params.get("target_mass", 0.25),
                epsilon=params.get("epsilon", 0.5),
                effort=params.get("effort", 8),
            )
            path = out / "series.json"
            _dump_json({"analysis": "series", "entries": entries}, str(path))
            written.append(path.name)
            header, rows = _summary_rows("series", entries)
        else:
            with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
                results = list(
                    pool.map(
                        lambda pair: _run_analysis(name, params, pair[0], pair[1]),
                        zip(instances, labels),
                    )
                )
            for label, result in zip(labels, results):
                path = out / f"{name}_{label}.json"
                _dump_json(result, str(path))
                written.append(path.name)
            header, rows = _summary_rows(name, results)
        _dump_csv(rows, header, str(out / f"summary_{name}.csv"))
        written.append(f"summary_{name}.csv")
        timings[name] = time.time() - t0

    manifest = {
        "config": config,
        "versions": {
            "graphings": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": sys.version.split()[0],
        },
        "seed": seed,
        "instances": labels,
        "reports": sorted(written),
        "timing_seconds": {k: round(v, 6) for k, v in timings.items()},
        "wall_clock_seconds": round(time.time() - started, 6),
    }
    _dump_json(manifest, str(out / "manifest.json"))
    return manifest


def _cmd_run(args) -> int:
    try:
        with open(args.config, "r", encoding="utf-8") as fh:
            config = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config '{args.config}': {exc}") from exc
    run_experiment(config, out_dir=args.out, threads=args.threads)
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="graphings",
        description="Finite-resolution experiments on graphings: concentration "
        "profiles, invariance defects, Folner searches, spectra.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a graphing JSON for a family")
    p.add_argument("--family", required=True,
                   choices=["rotation", "odometer", "expander", "product"])
    p.add_argument("--n", type=int)
    p.add_argument("--step", type=int)
    p.add_argument("--levels", type=int)
    p.add_argument("--degree", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--csv", help="also write the edge list as CSV")
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("concentrate", help="concentration profile of a graphing")
    p.add_argument("--input", required=True)
    p.add_argument("--grid", default="0.25,0.25",
                   help="semicolon-separated delta,delta_prime pairs")
    p.add_argument("--exact", action="store_true")
    p.add_argument("--effort", type=int, default=8)
    p.add_argument("--witness-target", type=int, default=None)
    p.add_argument("--out")
    p.add_argument("--csv")
    p.set_defaults(func=_cmd_concentrate)

    p = sub.add_parser("folner", help="Folner search / invariant accumulation")
    p.add_argument("--input", required=True)
    p.add_argument("--mass-cap", type=float, default=0.25)
    p.add_argument("--effort", type=int, default=8)
    p.add_argument("--epsilon", type=float, default=None)
    p.add_argument("--target-mass", type=float, default=None)
    p.add_argument("--strategy", default="accumulate",
                   choices=["accumulate", "arcs", "level_set"],
                   help="how the invariant set is built when --target-mass is given")
    p.add_argument("--out")
    p.add_argument("--csv")
    p.set_defaults(func=_cmd_folner)

    p = sub.add_parser("spectrum", help="spectral gap of the lazy walk")
    p.add_argument("--input", required=True)
    p.add_argument("--method", default="auto", choices=["auto", "exact", "iterative"])
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--out")
    p.add_argument("--csv")
    p.set_defaults(func=_cmd_spectrum)

    p = sub.add_parser("series", help="invariance-defect series over a family sweep")
    p.add_argument("--family", required=True,
                   choices=["rotation", "odometer", "expander", "product"])
    p.add_argument("--sizes", required=True, help="comma separated sizes/levels")
    p.add_argument("--strategy", default="arcs",
                   choices=["arcs", "level_set", "accumulate"])
    p.add_argument("--target-mass", type=float, default=0.25)
    p.add_argument("--effort", type=int, default=8)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--out")
    p.add_argument("--csv")
    p.set_defaults(func=_cmd_series)

    p = sub.add_parser("oracle", help="brute-force references (unstable interface)")
    p.add_argument("--input", required=True)
    p.add_argument("--op", required=True, choices=["ratio", "concentration", "spectrum"])
    p.add_argument("--mass-lo", type=float, default=0.2)
    p.add_argument("--mass-hi", type=float, default=0.3)
    p.add_argument("--delta", type=float, default=0.25)
    p.add_argument("--delta-prime", type=float, default=0.25)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_oracle)

    p = sub.add_parser("run", help="config-driven experiment sweep")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=None, help="override the config output dir")
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=_cmd_run)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ResourceCapError as exc:
        print(f"resource cap: {exc}", file=sys.stderr)
        return 3
    except ConvergenceError as exc:
        print(f"non-convergence: {exc}", file=sys.stderr)
        return 4
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
