"""Command-line interface with reproducible CSV/JSON artifacts.

Every run resolves its options into a :class:`RunConfig`, executes one
subcommand, and writes artifacts plus a manifest JSON recording the config
hash, library versions, seeds and wall time.  Identical configs (including
the seed) produce byte-identical CSV artifacts; timestamps live only in the
manifest.

Exit codes: 0 success, 2 when a certificate is refused, 1 on any error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import platform
import sys
import time
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Callable, NamedTuple

import numpy as np

from . import __version__
from .certificates import (Refusal, best_bound, certify_subcritical,
                           compute_phi, region_id)
from .currents import (Current, CurrentGraph, correlation_via_currents,
                       expectation_via_currents, extract_backbone,
                       source_sum, switching_check, weight)
from .errors import ConfigError, SubcritError
from .ising_mc import (check_critical_divergence, estimate_magnetization,
                       estimate_two_point)
from .lattice import LatticeSpec, Region, ball
from .perc_mc import (estimate_exit, estimate_ghost_magnetization,
                      estimate_susceptibility, exit_profile,
                      susceptibility_profile)
from .verify import CHECK_NAMES, default_reports

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_REFUSED = 2

MEASUREMENT_COLUMNS = ("observable", "n", "param", "h",
                       "mean", "stderr", "samples", "seed")
TABLE_COLUMNS = ("model", "radius", "region_size", "method", "root")

_MODEL_CHOICES = ("perc", "percolation", "bond", "ising")


# ---------------------------------------------------------------------------
# configuration schema
# ---------------------------------------------------------------------------

class _Field(NamedTuple):
    name: str
    kind: str  # int | float | str | int_list | str_list
    default: object = None
    required: bool = False
    choices: tuple = ()
    help: str = ""


_LATTICE_FIELDS = [
    _Field("lattice", "str", default="square",
           choices=("square", "triangular", "hypercubic"),
           help="lattice family"),
    _Field("dim", "int", default=2, help="dimension (hypercubic only)"),
]
_MODE_FIELD = _Field("mode", "str", choices=("p", "beta"),
                     help="parameterization (default: p for percolation, "
                          "beta for ising)")
_OUTPUT_FIELDS = [
    _Field("out", "str", default=".", help="output directory"),
    _Field("label", "str", help="artifact basename (default: subcommand)"),
]
_REGION_FIELDS = [
    _Field("ball", "int", help="use the graph ball of this radius"),
    _Field("region", "str", help="JSON file with a vertex list"),
]
_CERTIFY_FIELDS = (
    [_Field("model", "str", required=True, choices=_MODEL_CHOICES),
     _Field("param", "float", required=True,
            help="bond density p or inverse temperature beta")]
    + _REGION_FIELDS + _LATTICE_FIELDS + [_MODE_FIELD]
    + [_Field("samples", "int", default=100_000,
              help="MC samples if the region exceeds the exact cap"),
       _Field("sweeps", "int", default=20_000,
              help="MC sweeps if the region exceeds the exact cap"),
       _Field("seed", "int", help="RNG seed (generated and recorded if absent)")]
    + _OUTPUT_FIELDS
)

_SCHEMAS: dict[str, list[_Field]] = {
    "certify": _CERTIFY_FIELDS,
    "phi": _CERTIFY_FIELDS,
    "best-bound": (
        [_Field("model", "str", required=True, choices=_MODEL_CHOICES),
         _Field("max_radius", "int", required=True),
         _Field("budget", "int", default=0,
                help="MC samples per ball beyond the exact cap (0 = skip)"),
         _Field("tol", "float", default=1e-9),
         _Field("seed", "int", default=0)]
        + _LATTICE_FIELDS + [_MODE_FIELD] + _OUTPUT_FIELDS),
    "simulate-perc": (
        [_Field("observable", "str", required=True,
                choices=("exit", "susceptibility", "ghost")),
         _Field("param", "float", required=True),
         _Field("n", "int", help="box/ball size"),
         _Field("n_list", "int_list", help="several sizes, e.g. 8,16,32"),
         _Field("h", "float", default=0.0, help="ghost-bond field"),
         _Field("samples", "int", required=True),
         _Field("seed", "int")]
        + _LATTICE_FIELDS + [_MODE_FIELD] + _OUTPUT_FIELDS),
    "simulate-ising": (
        [_Field("observable", "str", required=True,
                choices=("magnetization", "two-point", "divergence")),
         _Field("param", "float", required=True, help="inverse temperature"),
         _Field("n", "int"),
         _Field("n_list", "int_list"),
         _Field("h", "float", default=0.0, help="external field"),
         _Field("boundary", "str", default="free", choices=("free", "plus")),
         _Field("distances", "int_list", help="two-point distances, e.g. 1,2,4"),
         _Field("sweeps", "int", required=True),
         _Field("seed", "int")]
        + _LATTICE_FIELDS + _OUTPUT_FIELDS),
    "verify": (
        [_Field("check", "str", default="all", choices=CHECK_NAMES + ("all",))]
        + _OUTPUT_FIELDS),
    "current-lab": (
        [_Field("scenario", "str", required=True,
                help="JSON scenario (graph, beta, h, truncation, task)")]
        + _OUTPUT_FIELDS),
    "report": (
        [_Field("inputs", "str_list", default=(),
                help="manifest JSON files from prior runs")]
        + _OUTPUT_FIELDS),
}


@dataclass(frozen=True)
class RunConfig:
    """A resolved subcommand invocation (options fully defaulted)."""

    subcommand: str
    options: dict

    def canonical(self) -> str:
        return json.dumps({"subcommand": self.subcommand,
                           "options": self.options},
                          sort_keys=True, separators=(",", ":"))

    def sha256(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()

    def to_json(self) -> dict:
        return json.loads(self.canonical())

    @classmethod
    def from_json(cls, obj) -> "RunConfig":
        if isinstance(obj, str):
            obj = json.loads(obj)
        return cls(obj["subcommand"], dict(obj["options"]))


def _coerce(field: _Field, value, where: str):
    def fail(msg: str):
        raise ConfigError(where, msg)

    if field.kind == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            fail(f"expected an integer, got {value!r}")
    elif field.kind == "float":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            fail(f"expected a number, got {value!r}")
        value = float(value)
        if not math.isfinite(value):
            fail("must be finite")
    elif field.kind == "str":
        if not isinstance(value, str):
            fail(f"expected a string, got {value!r}")
    elif field.kind == "int_list":
        if isinstance(value, str):
            try:
                value = [int(part) for part in value.split(",") if part.strip()]
            except ValueError:
                fail(f"expected comma-separated integers, got {value!r}")
        if (not isinstance(value, (list, tuple)) or not value
                or any(isinstance(v, bool) or not isinstance(v, int)
                       for v in value)):
            fail(f"expected a list of integers, got {value!r}")
        value = list(value)
    elif field.kind == "str_list":
        if isinstance(value, str):
            value = [value]
        if (not isinstance(value, (list, tuple))
                or any(not isinstance(v, str) for v in value)):
            fail(f"expected a list of strings, got {value!r}")
        value = list(value)
    else:  # pragma: no cover - schema bug
        raise AssertionError(field.kind)
    if field.choices and value not in field.choices:
        fail(f"must be one of {', '.join(field.choices)}")
    return value


def _validate_options(subcommand: str, provided: dict) -> dict:
    schema = {f.name: f for f in _SCHEMAS[subcommand]}
    for name in provided:
        if name not in schema:
            raise ConfigError(f"options.{name}", "unknown field")
    options = {}
    for name, field in schema.items():
        if name in provided and provided[name] is not None:
            options[name] = _coerce(field, provided[name], f"options.{name}")
        elif field.required:
            raise ConfigError(f"options.{name}", "required field missing")
        else:
            default = field.default
            options[name] = list(default) if isinstance(default, tuple) else default
    if options.get("label") is None:
        options["label"] = subcommand
    return options


def config_from_args(args: argparse.Namespace) -> RunConfig:
    sub = args.subcommand
    provided = {}
    for field in _SCHEMAS[sub]:
        value = getattr(args, field.name, None)
        if value is not None:
            provided[field.name] = value
    if getattr(args, "config", None) is not None:
        if provided:
            raise ConfigError("options",
                              "--config and individual option flags are "
                              "mutually exclusive")
        try:
            with open(args.config) as fh:
                raw = json.load(fh)
        except OSError as exc:
            raise ConfigError("config", f"cannot read file: {exc}")
        except json.JSONDecodeError as exc:
            raise ConfigError("config", f"invalid JSON: {exc}")
        if not isinstance(raw, dict):
            raise ConfigError("config", "must be a JSON object")
        provided = raw
    return RunConfig(sub, _validate_options(sub, provided))


# ---------------------------------------------------------------------------
# shared plumbing
# ---------------------------------------------------------------------------

def _build_lattice(opts: dict, default_mode: str) -> LatticeSpec:
    mode = opts.get("mode") or default_mode
    opts["mode"] = mode  # resolved value enters the manifest
    family = opts["lattice"]
    if family == "square":
        return LatticeSpec.square(mode)
    if family == "triangular":
        return LatticeSpec.triangular(mode)
    return LatticeSpec.hypercubic(opts["dim"], mode)


def _default_mode(opts: dict) -> str:
    return "beta" if opts.get("model") == "ising" else "p"


def _load_region(opts: dict, lattice: LatticeSpec) -> Region:
    radius, path = opts.get("ball"), opts.get("region")
    if (radius is None) == (path is None):
        raise ConfigError("options.ball",
                          "exactly one of 'ball' and 'region' is required")
    if radius is not None:
        if radius < 0:
            raise ConfigError("options.ball", "radius must be non-negative")
        return ball(lattice, radius)
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError("options.region", f"cannot read file: {exc}")
    except json.JSONDecodeError as exc:
        raise ConfigError("options.region", f"invalid JSON: {exc}")
    if not isinstance(data, dict) or "vertices" not in data:
        raise ConfigError("options.region",
                          "expected an object with a 'vertices' list")
    origin = tuple(data["origin"]) if "origin" in data else None
    return Region(lattice, [tuple(v) for v in data["vertices"]], origin)


def _resolve_seed(opts: dict) -> int:
    if opts.get("seed") is None:
        opts["seed"] = int.from_bytes(os.urandom(4), "big")
    return opts["seed"]


def _resolve_sizes(opts: dict) -> list[int]:
    n, n_list = opts.get("n"), opts.get("n_list")
    if (n is None) == (n_list is None):
        raise ConfigError("options.n",
                          "exactly one of 'n' and 'n_list' is required")
    sizes = [n] if n is not None else list(n_list)
    if any(s <= 0 for s in sizes):
        raise ConfigError("options.n", "sizes must be positive")
    return sizes


def _artifact(opts: dict, suffix: str) -> str:
    os.makedirs(opts["out"], exist_ok=True)
    return os.path.join(opts["out"], opts["label"] + suffix)


def _g17(x: float) -> str:
    return f"{float(x):.17g}"


def _write_csv(path: str, header: tuple, rows: list[tuple]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _measurement_row(observable: str, n: int, param: float, h: float,
                     est) -> tuple:
    return (observable, str(n), _g17(param), _g17(h), _g17(est.mean),
            _g17(est.stderr), str(est.samples), str(est.seed))


def _write_json(path: str, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_manifest(cfg: RunConfig, artifacts: list[str], t0: float) -> str:
    manifest = {
        "subcommand": cfg.subcommand,
        "config": cfg.options,
        "config_sha256": cfg.sha256(),
        "versions": {"package": __version__,
                     "python": platform.python_version(),
                     "numpy": np.__version__},
        "seed": cfg.options.get("seed"),
        "wall_time_s": round(time.time() - t0, 3),
        "created_utc": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "artifacts": [os.path.basename(a) for a in artifacts],
    }
    path = _artifact(cfg.options, "_manifest.json")
    _write_json(path, manifest)
    return path


# ---------------------------------------------------------------------------
# subcommand handlers
# ---------------------------------------------------------------------------

def _phi_kwargs(opts: dict) -> dict:
    model = opts["model"]
    if model == "ising":
        return {"sweeps": opts["sweeps"], "seed": opts["seed"]}
    return {"samples": opts["samples"], "seed": opts["seed"]}


def _cmd_certify(cfg: RunConfig) -> int:
    t0 = time.time()
    opts = cfg.options
    lattice = _build_lattice(opts, _default_mode(opts))
    region = _load_region(opts, lattice)
    _resolve_seed(opts)
    result = certify_subcritical(opts["model"], lattice, region,
                                 opts["param"], **_phi_kwargs(opts))
    path = _artifact(opts, ".json")
    _write_json(path, result.to_json())
    _write_manifest(cfg, [path], t0)
    refused = isinstance(result, Refusal)
    if refused:
        print(f"refused: {result.reason}")
    else:
        print(f"certified {result.model} at param {_g17(result.param)}: "
              f"phi = {result.phi.value:.12g} "
              f"(ucb {result.phi.upper_confidence:.12g}, "
              f"method {result.phi.method})")
    print(f"wrote {path}")
    return EXIT_REFUSED if refused else EXIT_OK


def _cmd_phi(cfg: RunConfig) -> int:
    t0 = time.time()
    opts = cfg.options
    lattice = _build_lattice(opts, _default_mode(opts))
    region = _load_region(opts, lattice)
    _resolve_seed(opts)
    result = compute_phi(opts["model"], lattice, region, opts["param"],
                         **_phi_kwargs(opts))
    path = _artifact(opts, ".json")
    _write_json(path, result.to_json())
    _write_manifest(cfg, [path], t0)
    print(f"phi = {result.value:.12g} (ucb {result.upper_confidence:.12g}, "
          f"method {result.method}, region {result.region_id})")
    print(f"wrote {path}")
    return EXIT_OK


def _cmd_best_bound(cfg: RunConfig) -> int:
    t0 = time.time()
    opts = cfg.options
    if opts["max_radius"] < 0:
        raise ConfigError("options.max_radius", "must be non-negative")
    lattice = _build_lattice(opts, _default_mode(opts))
    result = best_bound(opts["model"], lattice, opts["max_radius"],
                        opts["budget"], tol=opts["tol"], seed=opts["seed"])
    rows = [(result.model, str(r.radius), str(r.region_size), r.method,
             _g17(r.root)) for r in result.rows]
    csv_path = _artifact(opts, ".csv")
    _write_csv(csv_path, TABLE_COLUMNS, rows)
    json_path = _artifact(opts, ".json")
    _write_json(json_path, {
        "model": result.model,
        "param_star": result.param_star,
        "region_id": region_id(result.region),
        "rows": [{"radius": r.radius, "root": r.root, "method": r.method,
                  "region_size": r.region_size} for r in result.rows],
    })
    _write_manifest(cfg, [csv_path, json_path], t0)
    print(f"best bound for {result.model}: param <= critical point for "
          f"param = {_g17(result.param_star)} (region {region_id(result.region)})")
    print(f"wrote {csv_path}")
    return EXIT_OK


def _cmd_simulate_perc(cfg: RunConfig) -> int:
    t0 = time.time()
    opts = cfg.options
    lattice = _build_lattice(opts, "p")
    seed = _resolve_seed(opts)
    observable, param, h = opts["observable"], opts["param"], opts["h"]
    samples = opts["samples"]
    if samples <= 0:
        raise ConfigError("options.samples", "must be positive")
    sizes = _resolve_sizes(opts)
    rows = []
    if observable == "exit":
        if len(sizes) == 1:
            estimates = {sizes[0]: estimate_exit(lattice, sizes[0], param,
                                                 samples, seed)}
        else:
            estimates = exit_profile(lattice, max(sizes), sizes, param,
                                     samples, seed)
        rows = [_measurement_row("exit", n, param, 0.0, estimates[n])
                for n in sizes]
    elif observable == "susceptibility":
        if len(sizes) == 1:
            estimates = {sizes[0]: estimate_susceptibility(
                lattice, sizes[0], param, samples, seed)}
        else:
            estimates = susceptibility_profile(lattice, max(sizes), sizes,
                                               param, samples, seed)
        rows = [_measurement_row("susceptibility", n, param, 0.0, estimates[n])
                for n in sizes]
    else:  # ghost
        if h <= 0.0:
            raise ConfigError("options.h",
                              "ghost magnetization needs a positive field")
        for n in sizes:
            est = estimate_ghost_magnetization(lattice, n, param, h,
                                               samples, seed)
            rows.append(_measurement_row("ghost", n, param, h, est))
    csv_path = _artifact(opts, ".csv")
    _write_csv(csv_path, MEASUREMENT_COLUMNS, rows)
    _write_manifest(cfg, [csv_path], t0)
    print(f"wrote {len(rows)} row(s) to {csv_path}")
    return EXIT_OK


def _cmd_simulate_ising(cfg: RunConfig) -> int:
    t0 = time.time()
    opts = cfg.options
    lattice = _build_lattice(opts, "beta")
    if opts["mode"] != "beta":
        raise ConfigError("options.mode", "ising simulation needs beta mode")
    seed = _resolve_seed(opts)
    observable, beta, h = opts["observable"], opts["param"], opts["h"]
    sweeps, boundary = opts["sweeps"], opts["boundary"]
    if sweeps <= 0:
        raise ConfigError("options.sweeps", "must be positive")
    rows = []
    extra_paths: list[str] = []
    if observable == "magnetization":
        for n in _resolve_sizes(opts):
            est = estimate_magnetization(lattice, n, beta, boundary,
                                         sweeps, seed, h=h)
            rows.append(_measurement_row("magnetization", n, beta, h, est))
    elif observable == "two-point":
        sizes = _resolve_sizes(opts)
        if len(sizes) != 1:
            raise ConfigError("options.n", "two-point needs a single size")
        if not opts.get("distances"):
            raise ConfigError("options.distances", "required field missing")
        estimates = estimate_two_point(lattice, sizes[0], beta,
                                       opts["distances"], sweeps, seed,
                                       boundary=boundary)
        for d in opts["distances"]:
            rows.append(_measurement_row(f"two-point[d={d}]", sizes[0],
                                         beta, h, estimates[d]))
    else:  # divergence
        sizes = _resolve_sizes(opts)
        if len(sizes) < 2:
            raise ConfigError("options.n_list",
                              "divergence needs at least two sizes")
        report = check_critical_divergence(lattice, beta, sizes, sweeps, seed)
        for n in sizes:
            rows.append(_measurement_row("susceptibility-sum", n, beta, h,
                                         report.estimates[n]))
        json_path = _artifact(opts, ".json")
        _write_json(json_path, {
            "beta": report.beta,
            "increments": [list(inc) for inc in report.increments],
            "strictly_increasing_3sigma": report.strictly_increasing_3sigma,
        })
        extra_paths.append(json_path)
        print(f"strictly increasing at 3 sigma: "
              f"{report.strictly_increasing_3sigma}")
    csv_path = _artifact(opts, ".csv")
    _write_csv(csv_path, MEASUREMENT_COLUMNS, rows)
    _write_manifest(cfg, [csv_path] + extra_paths, t0)
    print(f"wrote {len(rows)} row(s) to {csv_path}")
    return EXIT_OK


def _cmd_verify(cfg: RunConfig) -> int:
    t0 = time.time()
    opts = cfg.options
    reports = default_reports(opts["check"])
    for report in reports:
        print(report.summary_line())
    path = _artifact(opts, ".json")
    _write_json(path, [report.to_json() for report in reports])
    _write_manifest(cfg, [path], t0)
    print(f"wrote {path}")
    return EXIT_OK if all(r.passed for r in reports) else EXIT_ERROR


def _scenario_graph(data: dict) -> CurrentGraph:
    if not isinstance(data, dict) or "graph" not in data:
        raise ConfigError("scenario.graph", "required field missing")
    graph = data["graph"]
    try:
        edges = []
        for edge in graph["edges"]:
            x, y = int(edge[0]), int(edge[1])
            j = float(edge[2]) if len(edge) > 2 else 1.0
            edges.append((x, y, j))
        return CurrentGraph(int(graph["n_vertices"]), tuple(edges))
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise ConfigError("scenario.graph", f"malformed graph: {exc}")


def _scenario_f(spec):
    if isinstance(spec, str):
        return spec.replace("-", "_")
    if isinstance(spec, list) and len(spec) == 3 and spec[0] == "connect":
        return ("connect", int(spec[1]), int(spec[2]))
    raise ConfigError("scenario.task.f",
                      "expected 'one', 'even-total', or ['connect', a, b]")


def _cmd_current_lab(cfg: RunConfig) -> int:
    t0 = time.time()
    opts = cfg.options
    try:
        with open(opts["scenario"]) as fh:
            scenario = json.load(fh)
    except OSError as exc:
        raise ConfigError("options.scenario", f"cannot read file: {exc}")
    except json.JSONDecodeError as exc:
        raise ConfigError("options.scenario", f"invalid JSON: {exc}")
    graph = _scenario_graph(scenario)
    beta = float(scenario.get("beta", 0.0))
    h = float(scenario.get("h", 0.0))
    trunc = scenario.get("truncation")
    task = scenario.get("task")
    if not isinstance(task, dict) or "kind" not in task:
        raise ConfigError("scenario.task", "expected an object with 'kind'")
    kind = task["kind"]
    if kind != "backbone" and not isinstance(trunc, int):
        raise ConfigError("scenario.truncation", "expected an integer cap")
    try:
        if kind == "switching":
            lhs, rhs = switching_check(graph, [int(s) for s in task["sources"]],
                                       int(task["u"]), int(task["v"]),
                                       _scenario_f(task.get("f", "one")),
                                       beta, h, trunc)
            scale = max(abs(lhs), abs(rhs), 1e-300)
            result = {"kind": kind, "lhs": lhs, "rhs": rhs,
                      "abs_diff": abs(lhs - rhs),
                      "rel_diff": abs(lhs - rhs) / scale}
            line = (f"switching: lhs = {lhs:.17g}, rhs = {rhs:.17g}, "
                    f"rel diff = {result['rel_diff']:.3e}")
        elif kind == "correlation":
            value = correlation_via_currents(graph, int(task["x"]),
                                             int(task["y"]), beta, h, trunc)
            result = {"kind": kind, "value": value}
            line = f"correlation({task['x']},{task['y']}) = {value:.17g}"
        elif kind == "expectation":
            value = expectation_via_currents(graph,
                                             [int(s) for s in task["sources"]],
                                             beta, h, trunc)
            result = {"kind": kind, "value": value}
            line = f"expectation{tuple(task['sources'])} = {value:.17g}"
        elif kind == "source-sum":
            value = source_sum(graph, [int(s) for s in task["sources"]],
                               beta, h, trunc)
            result = {"kind": kind, "value": value}
            line = f"source sum{tuple(task['sources'])} = {value:.17g}"
        elif kind == "backbone":
            mults = tuple(((int(p[0][0]), int(p[0][1])), int(p[1]))
                          for p in task["multiplicities"])
            current = Current(graph, mults)
            path_edges = extract_backbone(current, h)
            result = {"kind": kind,
                      "path": [list(edge) for edge in path_edges],
                      "weight": weight(current, beta, h)}
            line = f"backbone: {result['path']}"
        else:
            raise ConfigError("scenario.task.kind",
                              "expected switching, correlation, expectation, "
                              "source-sum, or backbone")
    except (KeyError, TypeError) as exc:
        raise ConfigError("scenario.task", f"malformed task: {exc}")
    out_path = _artifact(opts, ".json")
    _write_json(out_path, {"scenario": scenario, "result": result})
    _write_manifest(cfg, [out_path], t0)
    print(line)
    print(f"wrote {out_path}")
    return EXIT_OK


def _cmd_report(cfg: RunConfig) -> int:
    t0 = time.time()
    opts = cfg.options
    measurements: list[tuple] = []
    tables: list[tuple] = []
    sections: dict[str, dict] = {}
    for i, manifest_path in enumerate(opts["inputs"]):
        where = f"options.inputs[{i}]"
        try:
            with open(manifest_path) as fh:
                manifest = json.load(fh)
        except OSError as exc:
            raise ConfigError(where, f"cannot read manifest: {exc}")
        except json.JSONDecodeError as exc:
            raise ConfigError(where, f"invalid JSON: {exc}")
        sub = manifest.get("subcommand", "unknown")
        label = manifest.get("config", {}).get("label", "run")
        base = os.path.dirname(os.path.abspath(manifest_path))
        section = sections.setdefault(sub, {"runs": 0, "rows": 0,
                                            "observables": set()})
        section["runs"] += 1
        for name in manifest.get("artifacts", ()):
            path = os.path.join(base, name)
            if not os.path.exists(path):
                raise ConfigError(where, f"missing artifact {name}")
            if not name.endswith(".csv"):
                continue
            with open(path, newline="") as fh:
                reader = csv.reader(fh)
                header = tuple(next(reader, ()))
                body = [tuple(row) for row in reader]
            if header == MEASUREMENT_COLUMNS:
                for row in body:
                    measurements.append((label, sub) + row)
                    section["observables"].add(row[0])
                section["rows"] += len(body)
            elif header == TABLE_COLUMNS:
                for row in body:
                    tables.append((label,) + row)
                    section["observables"].add(f"critical-root[{row[0]}]")
                section["rows"] += len(body)
            else:
                raise ConfigError(where, f"unrecognized CSV schema in {name}")
    csv_path = _artifact(opts, ".csv")
    _write_csv(csv_path, ("source", "subcommand") + MEASUREMENT_COLUMNS,
               measurements)
    artifacts = [csv_path]
    if tables:
        tables_path = _artifact(opts, "_tables.csv")
        _write_csv(tables_path, ("source",) + TABLE_COLUMNS, tables)
        artifacts.append(tables_path)
    summary_path = _artifact(opts, ".txt")
    with open(summary_path, "w") as fh:
        fh.write(f"consolidated report over {len(opts['inputs'])} run(s)\n")
        for sub in sorted(sections):
            sec = sections[sub]
            names = ", ".join(sorted(sec["observables"])) or "none"
            fh.write(f"\n[{sub}] {sec['runs']} run(s), {sec['rows']} row(s)\n")
            fh.write(f"  observables: {names}\n")
        if tables:
            fh.write("\ncritical-root tables:\n")
            for row in tables:
                fh.write("  " + " ".join(row) + "\n")
        if not sections:
            fh.write("no input artifacts\n")
    artifacts.append(summary_path)
    _write_manifest(cfg, artifacts, t0)
    print(f"merged {len(measurements)} measurement row(s) and "
          f"{len(tables)} table row(s) into {csv_path}")
    return EXIT_OK


_HANDLERS: dict[str, Callable[[RunConfig], int]] = {
    "certify": _cmd_certify,
    "phi": _cmd_phi,
    "best-bound": _cmd_best_bound,
    "simulate-perc": _cmd_simulate_perc,
    "simulate-ising": _cmd_simulate_ising,
    "verify": _cmd_verify,
    "current-lab": _cmd_current_lab,
    "report": _cmd_report,
}


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    """ArgumentParser whose usage errors exit 1 (2 is reserved for refusals)."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="subcrit",
                     description="subcriticality certificates, simulations, "
                                 "and inequality checks")
    parser.add_argument("--version", action="version",
                        version=f"subcrit {__version__}")
    subparsers = parser.add_subparsers(dest="subcommand", parser_class=_Parser)
    descriptions = {
        "certify": "produce a subcriticality certificate (exit 2 on refusal)",
        "phi": "evaluate the boundary functional phi on a region",
        "best-bound": "best certified lower bound over balls of growing radius",
        "simulate-perc": "percolation Monte Carlo (exit, susceptibility, ghost)",
        "simulate-ising": "Ising Monte Carlo (Wolff dynamics)",
        "verify": "run the exact inequality checks",
        "current-lab": "truncated random-current computations from a scenario file",
        "report": "merge artifacts from prior runs (never recomputes)",
    }
    for name, fields in _SCHEMAS.items():
        sub = subparsers.add_parser(name, description=descriptions[name],
                                    help=descriptions[name])
        sub.add_argument("--config", metavar="FILE",
                         help="JSON file with all options "
                              "(mutually exclusive with other flags)")
        for field in fields:
            flag = "--" + field.name.replace("_", "-")
            kwargs: dict = {"help": field.help or None, "default": None,
                            "dest": field.name}
            if field.kind == "int":
                kwargs["type"] = int
            elif field.kind == "float":
                kwargs["type"] = float
            elif field.kind == "str_list":
                kwargs["nargs"] = "*"
            sub.add_argument(flag, **kwargs)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.subcommand is None:
        parser.error("a subcommand is required")
    try:
        cfg = config_from_args(args)
        return _HANDLERS[cfg.subcommand](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except SubcritError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
