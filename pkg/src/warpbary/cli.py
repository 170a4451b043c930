"""Command-line interface.

``warpbary <command> [inputs] [options]`` with commands ``barycenter``,
``template``, ``equalize``, ``pca``, ``cluster`` and ``simulate``.

Exit status: 0 success, 2 malformed input (with line number), 3 numeric
failure (the library error class is printed), 4 invalid configuration.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import ingest
from .analysis import discriminant_features, geodesic_pca
from .barycenter import iterated_barycenter
from .deformations import FAMILIES, DeformationProcess
from .errors import WarpBaryError
from .estimation import consistency_experiment, resolve_bandwidth, smooth, stream, template_estimate
from .measures import DiscreteMeasure, Measure1D, grid_nodes, make_discrete, to_measure1d
from .transport import brenier_map_1d

EXIT_OK, EXIT_PARSE, EXIT_NUMERIC, EXIT_CONFIG = 0, 2, 3, 4
WEIGHT_TOL = 1e-9
COMMANDS = ("barycenter", "template", "equalize", "pca", "cluster", "simulate")


class ConfigError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


@dataclass
class Group:
    name: str
    samples: np.ndarray
    measure: object = None

    def as_measure(self):
        if self.measure is not None:
            return self.measure
        mu = make_discrete(self.samples)
        return to_measure1d(mu) if mu.dim == 1 else mu


# ---------------------------------------------------------------------------
# input


def _read_text(path):
    if path == "-":
        return sys.stdin.read()
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None


def load_groups(paths):
    """Groups from CSV tables and JSON measure files, in input order.

    Labels are prefixed with the file name only when they would collide.
    """
    groups = []
    for path in paths:
        text = _read_text(path)
        try:
            if path.endswith(".json") or text.lstrip().startswith("{"):
                for name, mu in ingest.read_measure_json(text).items():
                    groups.append(Group(name, mu.grid.values[:, None], mu))
            else:
                _, table, _ = ingest.read_table(text)
                groups.extend(Group(name, data) for name, data in table.items())
        except ingest.ParseError as exc:
            raise ingest.ParseError(exc.message, exc.line, path) from None
    seen = {}
    for g in groups:
        seen[g.name] = seen.get(g.name, 0) + 1
    for i, g in enumerate(groups):
        if seen[g.name] > 1:
            g.name = f"{g.name or 'group'}#{i}"
    return groups


def parse_weights(text, count):
    if text is None:
        return None
    try:
        w = np.array([float(v) for v in text.split(",")])
    except ValueError:
        raise ConfigError("weights must be a comma-separated list of numbers") from None
    if w.shape[0] != count:
        raise ConfigError(f"expected {count} weights, got {w.shape[0]}")
    if not np.all(np.isfinite(w)) or np.any(w <= 0):
        raise ConfigError("weights must be positive")
    if abs(w.sum() - 1.0) > WEIGHT_TOL:
        raise ConfigError(f"weights sum to {float(w.sum())!r}, not 1")
    return w / w.sum()


def parse_int_list(text, what):
    try:
        vals = [int(v) for v in str(text).split(",")] if not isinstance(text, list) else [int(v) for v in text]
    except ValueError:
        raise ConfigError(f"{what} must be a comma-separated list of integers") from None
    if not vals or any(v < 1 for v in vals):
        raise ConfigError(f"{what} must be positive")
    return vals


def _bandwidth(args):
    if args.bandwidth is None:
        return None
    try:
        resolve_bandwidth(args.bandwidth, 1)
    except WarpBaryError as exc:
        raise ConfigError(str(exc)) from None
    return args.bandwidth


def _one_dim(groups):
    for g in groups:
        if g.samples.shape[1] != 1:
            raise ConfigError(f"group {g.name!r} has {g.samples.shape[1]} columns; this command is 1D")


def _measures(groups, args):
    """Measures of the groups, smoothed when a bandwidth is given."""
    bw = _bandwidth(args)
    out = []
    for j, g in enumerate(groups):
        mu = g.as_measure()
        if bw is not None and g.measure is None:
            eps = resolve_bandwidth(bw, g.samples.shape[0])
            mu = smooth(make_discrete(g.samples), eps, m=args.grid, seed=args.seed + j).measure
            if isinstance(mu, DiscreteMeasure) and mu.dim == 1:
                mu = to_measure1d(mu)
        out.append(mu)
    return out


def _need_groups(groups, least=1):
    if len(groups) < least:
        raise ConfigError(f"need at least {least} group(s), got {len(groups)}")


# ---------------------------------------------------------------------------
# output


def _measure_dict(mu, m):
    if isinstance(mu, Measure1D):
        return ingest.grid_to_dict(mu.to_quantile_grid(m))
    return {"kind": "discrete", "points": mu.points.tolist(), "weights": mu.weights.tolist()}


def _measure_rows(mu, m):
    if isinstance(mu, Measure1D):
        grid = mu.to_quantile_grid(m)
        return ["t", "quantile"], list(zip(grid_nodes(grid.m).tolist(), grid.values.tolist()))
    d = mu.dim
    rows = [[float(w), *map(float, p)] for w, p in zip(mu.weights, mu.points)]
    return ["weight", *[f"x{k + 1}" for k in range(d)]], rows


def _result(args, obj, header, rows):
    fmt = args.format or ("csv" if args.out and args.out.endswith(".csv") else "json")
    text = ingest.dump_json(obj) if fmt == "json" else ingest.dump_csv(header, rows)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# commands


def cmd_barycenter(args):
    groups = load_groups(args.inputs)
    _need_groups(groups)
    weights = parse_weights(args.weights, len(groups))
    bary = iterated_barycenter(_measures(groups, args), weights)
    obj = {
        "schema": ingest.SCHEMA,
        "command": "barycenter",
        "groups": [g.name for g in groups],
        "weights": None if weights is None else weights.tolist(),
        "measure": _measure_dict(bary, args.grid),
    }
    _result(args, obj, *_measure_rows(bary, args.grid))


def cmd_template(args):
    groups = load_groups(args.inputs)
    _need_groups(groups)
    weights = parse_weights(args.weights, len(groups))
    bw = _bandwidth(args) or "1/n"
    est = template_estimate([g.samples for g in groups], bw, args.grid, weights, args.seed)
    obj = {
        "schema": ingest.SCHEMA,
        "command": "template",
        "groups": [g.name for g in groups],
        "bandwidth": bw,
        "seed": args.seed,
        "measure": _measure_dict(est, args.grid),
    }
    _result(args, obj, *_measure_rows(est, args.grid))


def cmd_equalize(args):
    # each score column is transported on its own (product-increasing model)
    groups = load_groups(args.inputs)
    _need_groups(groups)
    weights = parse_weights(args.weights, len(groups))
    d = groups[0].samples.shape[1]
    if any(g.samples.shape[1] != d for g in groups):
        raise ConfigError("all groups must have the same number of columns")
    equalized = [np.empty_like(g.samples) for g in groups]
    barycenters, maps = [], {g.name: [] for g in groups}
    for c in range(d):
        mus = [Measure1D(g.samples[:, c]) for g in groups]
        bary = iterated_barycenter(mus, weights)
        barycenters.append(ingest.grid_to_dict(bary.to_quantile_grid(args.grid)))
        for g, mu, out in zip(groups, mus, equalized):
            S = brenier_map_1d(mu, bary)
            out[:, c] = S(g.samples[:, c])
            maps[g.name].append(ingest.map_to_dict(S))
    cols = [f"x{k + 1}" for k in range(d)]
    header = ["row", "group", *cols, *[f"eq_{c}" for c in cols]]
    rows = []
    for g, eq in zip(groups, equalized):
        for x, y in zip(g.samples, eq):
            rows.append([len(rows), g.name, *map(float, x), *map(float, y)])
    obj = {
        "schema": ingest.SCHEMA,
        "command": "equalize",
        "groups": [g.name for g in groups],
        "barycenters": barycenters,
        "maps": maps,
        "equalized": {g.name: eq.tolist() for g, eq in zip(groups, equalized)},
    }
    _result(args, obj, header, rows)


def cmd_pca(args):
    groups = load_groups(args.inputs)
    _need_groups(groups, 2)
    _one_dim(groups)
    k = args.components
    if not 1 <= k <= min(len(groups), args.grid):
        raise ConfigError(f"--components must lie in [1, {min(len(groups), args.grid)}]")
    weights = parse_weights(args.weights, len(groups))
    measures = _measures(groups, args)
    bary = iterated_barycenter(measures, weights)
    res = geodesic_pca(measures, bary, k, args.grid)
    obj = {"schema": ingest.SCHEMA, "command": "pca", "groups": [g.name for g in groups], **res.to_dict()}
    obj["directions"] = [ingest.map_to_dict(T) for T in res.directions]
    header = ["group", *[f"score{i + 1}" for i in range(k)], *[f"d2_{i + 1}" for i in range(k)]]
    rows = [[g.name, *map(float, s), *map(float, e)] for g, s, e in zip(groups, res.scores, res.distances)]
    _result(args, obj, header, rows)


def cmd_cluster(args):
    groups = load_groups(args.inputs)
    _need_groups(groups)
    _one_dim(groups)
    weights = parse_weights(args.weights, len(groups))
    measures = _measures(groups, args)
    bary = iterated_barycenter(measures, weights)
    feats = discriminant_features(bary, measures)
    obj = {
        "schema": ingest.SCHEMA,
        "command": "cluster",
        "groups": [g.name for g in groups],
        "features": feats.tolist(),
        "barycenter": _measure_dict(bary, args.grid),
    }
    rows = [[g.name, float(f)] for g, f in zip(groups, feats)]
    _result(args, obj, ["group", "w2_squared"], rows)


SIM_DEFAULTS = {
    "family": "scale_location",
    "spread": 0.5,
    "centered": True,
    "antithetic": None,
    "J": [4, 16, 64],
    "reps": 50,
    "n": None,
    "seed": 0,
    "grid": 512,
    "support": None,
    "atoms": 20,
}


def simulation_config(args):
    """Merge defaults, an optional ``schema: 1`` JSON config and flags."""
    cfg = dict(SIM_DEFAULTS)
    if args.config:
        try:
            loaded = json.loads(_read_text(args.config))
        except json.JSONDecodeError as exc:
            raise ingest.ParseError(exc.msg, exc.lineno, args.config) from None
        if not isinstance(loaded, dict) or loaded.get("schema") != ingest.SCHEMA:
            raise ConfigError("config must be a JSON object with schema: 1")
        unknown = set(loaded) - set(cfg) - {"schema"}
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        cfg.update({k: v for k, v in loaded.items() if k != "schema"})
    for key, flag in (("family", "family"), ("spread", "spread"), ("J", "J"), ("reps", "reps"), ("n", "n")):
        if getattr(args, flag) is not None:
            cfg[key] = getattr(args, flag)
    if args.seed_given:
        cfg["seed"] = args.seed
    if args.grid_given:
        cfg["grid"] = args.grid
    if cfg["family"] not in FAMILIES:
        raise ConfigError(f"family must be one of {', '.join(FAMILIES)}")
    try:
        cfg["spread"] = float(cfg["spread"])
        cfg["reps"] = int(cfg["reps"])
        cfg["seed"] = int(cfg["seed"])
        cfg["grid"] = int(cfg["grid"])
        cfg["atoms"] = int(cfg["atoms"])
        cfg["n"] = None if cfg["n"] in (None, 0) else int(cfg["n"])
    except (TypeError, ValueError):
        raise ConfigError("spread, reps, seed, grid, atoms and n must be numbers") from None
    cfg["J"] = parse_int_list(cfg["J"], "J")
    if not 0.0 <= cfg["spread"] < 1.0:
        raise ConfigError("spread must lie in [0, 1)")
    if cfg["reps"] < 1 or cfg["grid"] < 2 or cfg["atoms"] < 1 or (cfg["n"] is not None and cfg["n"] < 1):
        raise ConfigError("reps, atoms and n must be positive and grid at least 2")
    return cfg


def default_template(seed, atoms):
    """Uniform weights on sorted ``U(0, 1)`` atoms."""
    return Measure1D(np.sort(stream(seed, 1000).uniform(0.0, 1.0, atoms)))


def cmd_simulate(args):
    cfg = simulation_config(args)
    if args.inputs:
        groups = load_groups(args.inputs)
        _one_dim(groups)
        template = groups[0].as_measure()
    else:
        template = default_template(cfg["seed"], cfg["atoms"])
    support = tuple(cfg["support"]) if cfg["support"] else template.support()
    if not support[0] < support[1]:
        support = (support[0] - 1.0, support[1] + 1.0)
    proc = DeformationProcess(
        cfg["family"], cfg["spread"], seed=cfg["seed"], centered=bool(cfg["centered"]),
        antithetic=cfg["antithetic"], support=support,
    )
    report = consistency_experiment(template, proc, cfg["J"], cfg["reps"], n=cfg["n"], seed=cfg["seed"], m=cfg["grid"])
    obj = {"command": "simulate", **report.to_dict()}
    buf = report.to_csv().splitlines()
    header = buf[0].split(",")
    rows = [line.split(",") for line in buf[1:]]
    _result(args, obj, header, rows)


HANDLERS = {
    "barycenter": cmd_barycenter,
    "template": cmd_template,
    "equalize": cmd_equalize,
    "pca": cmd_pca,
    "cluster": cmd_cluster,
    "simulate": cmd_simulate,
}


def build_parser():
    p = _Parser(prog="warpbary", description="Wasserstein barycenters of warped samples.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("inputs", nargs="*" if name == "simulate" else "+", help="CSV tables or JSON measure files")
        s.add_argument("--out", help="output file; .csv selects CSV, anything else JSON")
        s.add_argument("--format", choices=("json", "csv"))
        s.add_argument("--grid", type=int, default=None, help="quantile grid size (default 512)")
        s.add_argument("--seed", type=int, default=None)
        if name != "simulate":
            s.add_argument("--weights", help="comma-separated barycenter weights")
            s.add_argument("--bandwidth", help="smoothing variance, a number or '1/n'")
        if name == "pca":
            s.add_argument("--components", type=int, default=1)
        if name == "simulate":
            s.add_argument("--config", help="JSON config with schema: 1")
            s.add_argument("--family", choices=FAMILIES)
            s.add_argument("--spread", type=float)
            s.add_argument("--J")
            s.add_argument("--reps", type=int)
            s.add_argument("--n", type=int)
    return p


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        args.seed_given = args.seed is not None
        args.grid_given = args.grid is not None
        args.seed = 0 if args.seed is None else args.seed
        args.grid = 512 if args.grid is None else args.grid
        if args.grid < 2:
            raise ConfigError("--grid must be at least 2")
        HANDLERS[args.command](args)
    except ingest.ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except WarpBaryError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
