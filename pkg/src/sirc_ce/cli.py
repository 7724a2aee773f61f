"""Command-line front end.

    sirc-ce run CONFIG [--seed N] [--out DIR] [--threads N] [--entropy-seed]
    sirc-ce validate CONFIG

Configurations are YAML documents; see README.md for the schema. A run
writes ``trajectory.csv``, ``iterations.csv`` and ``summary.json`` into the
output directory, all or none.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import shutil
import sys
import tempfile
import time
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import yaml

from .ce_core import CeError, CeSettings, elite_count_for
from .control_param import ControlGrid
from .ode_sim import SircParameters, SircState
from .epi_opt import (
    CostWeights,
    Scenario,
    cost_index,
    initial_model,
    optimize_alternating,
    optimize_joint,
    simulate,
)

log = logging.getLogger("sirc_ce")

SCHEMA_VERSION = 1
DEFAULT_SEED = 20240101
PROBLEMS = ("sirc-uncontrolled", "sirc-v1", "sirc-v2", "rank", "svrp")
SIRC_PROBLEMS = PROBLEMS[:3]

START_INITIAL = {"S": 1 - 1e-6, "I": 1e-6, "R": 0.0, "C": 0.0}
DEVELOPED_INITIAL = {"S": 0.99, "I": 5e-3, "R": 3e-3, "C": 2e-3}

DEFAULTS = {
    "scenario": {
        "name": "start",
        "initial": None,
        "parameters": asdict(SircParameters()),
        "horizon": [0.0, 1.0],
        "step": 1e-3,
        "intervals": 20,
        "u_bounds": [0.0, 0.9],
        "v_bounds": [0.0, 0.9],
        "weights": asdict(CostWeights()),
    },
    "ce": {
        "population_size": 200,
        "elite_fraction": 0.1,
        "elite_count": None,
        "smoothing": 0.7,
        "epsilon": 1e-5,
        "max_iterations": 500,
        "initial_sigma": 0.5,
    },
    "rank": {
        "n": 5,
        "k": 2,
        "replications": 200,
        "final_replications": 2000,
        "window": 5,
        "lookahead": 3,
    },
    "svrp": {
        "instance": None,
        "replications": 100,
        "final_replications": 1000,
        "window": 5,
        "lookahead": 3,
    },
}

# CE defaults differ by problem family; ``initial_sigma`` only affects SIRC.
CE_DEFAULTS = {
    "sirc": DEFAULTS["ce"],
    "rank": {**DEFAULTS["ce"], "population_size": 500, "epsilon": 0.05, "max_iterations": 100},
    "svrp": {**DEFAULTS["ce"], "epsilon": 0.05, "max_iterations": 200},
}


class ConfigError(Exception):
    """Invalid configuration, with the offending key path and source line."""

    def __init__(self, message: str, path: str = "", line: int | None = None):
        where = path or "<document>"
        if line is not None:
            where += f" (line {line})"
        super().__init__(f"{where}: {message}")
        self.path = path
        self.line = line


@dataclass
class RunConfig:
    problem: str
    seed: int
    resolved: dict
    source: Path | None = None
    payload: object = None


def _line_map(text: str) -> dict:
    """Map dotted key paths to 1-based line numbers of their keys."""
    lines: dict = {}
    try:
        root = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.YAMLError:
        return lines

    def walk(node, prefix):
        if isinstance(node, yaml.MappingNode):
            for k, v in node.value:
                path = f"{prefix}.{k.value}" if prefix else str(k.value)
                lines[path] = k.start_mark.line + 1
                walk(v, path)
        elif isinstance(node, yaml.SequenceNode):
            for i, v in enumerate(node.value):
                lines[f"{prefix}[{i}]"] = v.start_mark.line + 1
                walk(v, f"{prefix}[{i}]")

    if root is not None:
        walk(root, "")
    return lines


class _Checker:
    def __init__(self, lines: dict):
        self.lines = lines

    def fail(self, msg: str, path: str):
        line = self.lines.get(path)
        if line is None:
            # fall back to the nearest enclosing key
            p = path
            while line is None and "." in p:
                p = p.rsplit(".", 1)[0]
                line = self.lines.get(p)
        raise ConfigError(msg, path, line)

    def merge(self, given, defaults: dict, path: str) -> dict:
        if given is None:
            given = {}
        if not isinstance(given, dict):
            self.fail("expected a mapping", path)
        for key in given:
            if key not in defaults:
                self.fail(f"unknown key {key!r}; allowed: {', '.join(sorted(defaults))}", f"{path}.{key}")
        out = {}
        for key, dval in defaults.items():
            val = given.get(key, dval)
            if isinstance(dval, dict) and key in given:
                val = self.merge(given[key], dval, f"{path}.{key}")
            elif isinstance(dval, dict):
                val = dict(dval)
            out[key] = val
        return out

    def number(self, value, path: str, *, lo=None, hi=None, integer=False, lo_open=False):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            self.fail(f"expected a number, got {value!r}", path)
        if integer and (not isinstance(value, int)):
            self.fail(f"expected an integer, got {value!r}", path)
        if not math.isfinite(value):
            self.fail("must be finite", path)
        if lo is not None and (value < lo or (lo_open and value == lo)):
            self.fail(f"must be {'>' if lo_open else '>='} {lo}, got {value}", path)
        if hi is not None and value > hi:
            self.fail(f"must be <= {hi}, got {value}", path)
        return int(value) if integer else float(value)

    def pair(self, value, path: str):
        if not isinstance(value, (list, tuple)) or len(value) != 2:
            self.fail("expected a two-element list", path)
        return [self.number(v, f"{path}[{i}]") for i, v in enumerate(value)]


def _resolve_sirc(chk: _Checker, doc: dict) -> dict:
    sc = chk.merge(doc.get("scenario"), DEFAULTS["scenario"], "scenario")
    ce = chk.merge(doc.get("ce"), CE_DEFAULTS["sirc"], "ce")
    if sc["name"] not in ("start", "developed"):
        chk.fail(f"unknown scenario {sc['name']!r}; choose start or developed", "scenario.name")
    base = START_INITIAL if sc["name"] == "start" else DEVELOPED_INITIAL
    init = chk.merge(sc["initial"], base, "scenario.initial")
    for key in "SIRC":
        init[key] = chk.number(init[key], f"scenario.initial.{key}", lo=0)
    if abs(sum(init.values()) - 1) > 1e-12:
        chk.fail(f"initial compartments must sum to 1, got {sum(init.values())!r}", "scenario.initial")
    sc["initial"] = init
    for key in sc["parameters"]:
        hi = 1 if key == "sigma" else None
        sc["parameters"][key] = chk.number(sc["parameters"][key], f"scenario.parameters.{key}", lo=0, hi=hi)
    for key in sc["weights"]:
        sc["weights"][key] = chk.number(sc["weights"][key], f"scenario.weights.{key}", lo=0)
    sc["horizon"] = chk.pair(sc["horizon"], "scenario.horizon")
    if not sc["horizon"][1] > sc["horizon"][0]:
        chk.fail("horizon end must exceed its start", "scenario.horizon")
    sc["step"] = chk.number(sc["step"], "scenario.step", lo=0, lo_open=True)
    if (sc["horizon"][1] - sc["horizon"][0]) / sc["step"] > 5e7:
        chk.fail("step too small for the horizon", "scenario.step")
    sc["intervals"] = chk.number(sc["intervals"], "scenario.intervals", lo=1, integer=True)
    for key in ("u_bounds", "v_bounds"):
        lo, hi = chk.pair(sc[key], f"scenario.{key}")
        if not 0 <= lo <= hi:
            chk.fail(f"bounds must satisfy 0 <= lower <= upper, got [{lo}, {hi}]", f"scenario.{key}")
        if hi > 1:
            log.warning("scenario.%s: upper bound %s exceeds 1 (a population fraction)", key, hi)
        sc[key] = [lo, hi]
    ce = _resolve_ce_block(chk, ce)
    return {"scenario": sc, "ce": ce}


def _resolve_rank(chk: _Checker, doc: dict) -> dict:
    rk = chk.merge(doc.get("rank"), DEFAULTS["rank"], "rank")
    ce = chk.merge(doc.get("ce"), CE_DEFAULTS["rank"], "ce")
    rk["n"] = chk.number(rk["n"], "rank.n", lo=1, hi=64, integer=True)
    rk["k"] = chk.number(rk["k"], "rank.k", lo=1, hi=rk["n"], integer=True)
    rk["replications"] = chk.number(rk["replications"], "rank.replications", lo=1, integer=True)
    rk["final_replications"] = chk.number(rk["final_replications"], "rank.final_replications", lo=2,
                                          integer=True)
    rk["window"] = chk.number(rk["window"], "rank.window", lo=2, integer=True)
    rk["lookahead"] = chk.number(rk["lookahead"], "rank.lookahead", lo=1, integer=True)
    ce = _resolve_ce_block(chk, ce)
    return {"rank": rk, "ce": ce}


def _resolve_ce_block(chk: _Checker, ce: dict) -> dict:
    ce["population_size"] = chk.number(ce["population_size"], "ce.population_size", lo=1, integer=True)
    ce["elite_fraction"] = chk.number(ce["elite_fraction"], "ce.elite_fraction", lo=0, hi=1, lo_open=True)
    if ce["elite_count"] is None:
        ce["elite_count"] = elite_count_for(ce["population_size"], ce["elite_fraction"])
    ce["elite_count"] = chk.number(ce["elite_count"], "ce.elite_count", lo=1, hi=ce["population_size"], integer=True)
    ce["smoothing"] = chk.number(ce["smoothing"], "ce.smoothing", lo=0, hi=1, lo_open=True)
    ce["epsilon"] = chk.number(ce["epsilon"], "ce.epsilon", lo=0, lo_open=True)
    ce["max_iterations"] = chk.number(ce["max_iterations"], "ce.max_iterations", lo=0, integer=True)
    ce["initial_sigma"] = chk.number(ce["initial_sigma"], "ce.initial_sigma", lo=0)
    return ce


def load_instance(path: Path):
    """Read an SVRP instance file (YAML).

    Schema::

        capacity: 25
        distances: [[0, 3, 4], [3, 0, 5], [4, 5, 0]]   # (n+1) x (n+1), depot first
        customers:                                     # n entries, customer 1 first
          - {mean: 4, std: 1, penalty: 10}
          - {mean: 6, std: 2, penalty: 12}
    """
    from .svrp import RoutingInstance

    text = Path(path).read_text()
    chk = _Checker(_line_map(text))
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed instance file: {exc}", str(path)) from None
    doc = chk.merge(doc, {"capacity": None, "distances": None, "customers": None}, "instance")
    for key in ("capacity", "distances", "customers"):
        if doc[key] is None:
            chk.fail("missing required key", f"instance.{key}")
    capacity = chk.number(doc["capacity"], "instance.capacity", lo=0, lo_open=True)
    custs = doc["customers"]
    if not isinstance(custs, list) or not custs:
        chk.fail("expected a non-empty list", "instance.customers")
    rows = []
    for i, c in enumerate(custs):
        c = chk.merge(c, {"mean": None, "std": 0.0, "penalty": 0.0}, f"instance.customers[{i}]")
        if c["mean"] is None:
            chk.fail("missing demand mean", f"instance.customers[{i}].mean")
        rows.append([chk.number(c[k], f"instance.customers[{i}].{k}", lo=0) for k in ("mean", "std", "penalty")])
    dist = doc["distances"]
    n = len(custs)
    if not isinstance(dist, list) or len(dist) != n + 1 or any(not isinstance(r, list) or len(r) != n + 1 for r in dist):
        chk.fail(f"expected a {n + 1}x{n + 1} matrix", "instance.distances")
    mat = [[chk.number(v, f"instance.distances[{i}]", lo=0) for v in r] for i, r in enumerate(dist)]
    rows = np.array(rows)
    try:
        inst = RoutingInstance(np.array(mat), capacity, rows[:, 0], rows[:, 1], rows[:, 2])
    except CeError as exc:
        raise ConfigError(str(exc), "instance") from None
    resolved = {"capacity": capacity, "distances": mat,
                "customers": [dict(zip(("mean", "std", "penalty"), map(float, r))) for r in rows]}
    return inst, resolved


def _resolve_svrp(chk: _Checker, doc: dict, base: Path | None):
    sv = chk.merge(doc.get("svrp"), DEFAULTS["svrp"], "svrp")
    ce = chk.merge(doc.get("ce"), CE_DEFAULTS["svrp"], "ce")
    inst_spec = sv["instance"]
    if inst_spec is None:
        chk.fail("missing instance (path to an instance file or an inline mapping)", "svrp.instance")
    if isinstance(inst_spec, str):
        path = Path(inst_spec)
        if not path.is_absolute() and base is not None:
            path = base.parent / path
        if not path.is_file():
            chk.fail(f"instance file {str(path)!r} does not exist", "svrp.instance")
        inst, resolved_inst = load_instance(path)
    elif isinstance(inst_spec, dict):
        with tempfile.NamedTemporaryFile("w", suffix=".yaml", delete=False) as fh:
            yaml.safe_dump(inst_spec, fh)
        try:
            inst, resolved_inst = load_instance(Path(fh.name))
        finally:
            os.unlink(fh.name)
    else:
        chk.fail("expected a path or a mapping", "svrp.instance")
    sv["instance"] = resolved_inst
    for key in ("replications", "final_replications"):
        sv[key] = chk.number(sv[key], f"svrp.{key}", lo=2, integer=True)
    sv["window"] = chk.number(sv["window"], "svrp.window", lo=2, integer=True)
    sv["lookahead"] = chk.number(sv["lookahead"], "svrp.lookahead", lo=1, integer=True)
    ce = _resolve_ce_block(chk, ce)
    return {"svrp": sv, "ce": ce}, inst


def parse_text(text: str, source: Path | None = None) -> RunConfig:
    """Validate a configuration document and materialize every default."""
    chk = _Checker(_line_map(text))
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(f"malformed YAML: {getattr(exc, 'problem', exc)}", "",
                          mark.line + 1 if mark else None) from None
    if doc is None:
        raise ConfigError(f"missing problem selector 'problem' (one of {', '.join(PROBLEMS)})", "problem")
    if not isinstance(doc, dict):
        raise ConfigError("top level must be a mapping", "")
    allowed = {"problem", "seed", "scenario", "ce", "rank", "svrp"}
    for key in doc:
        if key not in allowed:
            chk.fail(f"unknown key {key!r}; allowed: {', '.join(sorted(allowed))}", str(key))
    problem = doc.get("problem")
    if problem is None:
        chk.fail(f"missing problem selector 'problem' (one of {', '.join(PROBLEMS)})", "problem")
    if problem not in PROBLEMS:
        chk.fail(f"unknown problem {problem!r}; choose one of {', '.join(PROBLEMS)}", "problem")
    seed = doc.get("seed", DEFAULT_SEED)
    seed = chk.number(seed, "seed", lo=0, hi=2**64 - 1, integer=True)
    sections = {"scenario": SIRC_PROBLEMS, "rank": ("rank",), "svrp": ("svrp",)}
    for sec, owners in sections.items():
        if sec in doc and problem not in owners:
            chk.fail(f"section not used by problem {problem!r}", sec)
    payload = None
    if problem in SIRC_PROBLEMS:
        body = _resolve_sirc(chk, doc)
    elif problem == "rank":
        body = _resolve_rank(chk, doc)
    else:
        body, payload = _resolve_svrp(chk, doc, source)
    resolved = {"problem": problem, "seed": seed, **body}
    return RunConfig(problem, seed, resolved, source, payload)


def parse_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", str(path)) from None
    return parse_text(text, path)


def _settings(ce: dict, seed: int) -> CeSettings:
    return CeSettings(ce["population_size"], ce["elite_count"], ce["smoothing"], ce["epsilon"],
                      ce["max_iterations"], seed)


def build_scenario(sc: dict) -> Scenario:
    t1, t2 = sc["horizon"]
    return Scenario(
        SircState(**sc["initial"]),
        SircParameters(**sc["parameters"]),
        (t1, t2),
        ControlGrid.uniform(t1, t2, sc["intervals"], *sc["u_bounds"]),
        ControlGrid.uniform(t1, t2, sc["intervals"], *sc["v_bounds"]),
        CostWeights(**sc["weights"]),
        sc["step"],
        sc["name"],
    )


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return v


def _iteration_rows(records):
    for i, r in enumerate(records, 1):
        if isinstance(r, dict):
            yield i, r["gamma_hat"], r["best_score"], r["max_sigma"]
        else:
            yield i, r.gamma_hat, r.best_score, r.max_sigma


ITER_HEADER = ("iteration", "gamma_hat", "best_cost", "max_sigma")


def _run_sirc(cfg: RunConfig) -> tuple[dict, dict]:
    body = cfg.resolved
    sc = build_scenario(body["scenario"])
    settings = _settings(body["ce"], cfg.seed)
    sigma0 = body["ce"]["initial_sigma"]
    result: dict = {}
    if cfg.problem == "sirc-uncontrolled":
        u = np.zeros(sc.u_grid.size)
        v = np.zeros(sc.v_grid.size)
        records = []
    else:
        kwargs = dict(u_init=initial_model(sc.u_grid, sigma0), v_init=initial_model(sc.v_grid, sigma0))
        opt = optimize_joint if cfg.problem == "sirc-v2" else optimize_alternating
        res = opt(sc, settings, **kwargs)
        u, v, records = res.u, res.v, res.log
        result["stopped_by"] = res.stopped_by
        result["best_sample_cost"] = res.best_sample_cost
        if cfg.problem == "sirc-v1":
            result["stage_iterations"] = {s: sum(r.stage == s for r in records) for s in ("u", "v")}
    traj = simulate(u, v, sc)
    j = cost_index(u, v, sc)
    peak = int(np.argmax(traj.I))
    total = traj.states.sum(axis=1)
    result.update({
        "cost_index": j,
        "iterations": len(records),
        "u_nodes": [float(x) for x in u],
        "v_nodes": [float(x) for x in v],
        "peak_infected": float(traj.I[peak]),
        "peak_time": float(traj.t[peak]),
        "max_conservation_error": float(np.max(np.abs(total - 1.0))),
    })
    states = traj.clamped_states()
    rows = (
        (traj.t[j_], *states[j_], traj.u[j_], traj.v[j_]) for j_ in range(traj.t.size)
    )
    files = {
        "trajectory.csv": _csv(("t", "S", "I", "R", "C", "u", "v"), rows),
        "iterations.csv": _csv(ITER_HEADER, _iteration_rows(records)),
    }
    return result, files


def _run_rank(cfg: RunConfig) -> tuple[dict, dict]:
    from .rank_select import MAX_EXACT_N, ce_rank_optimize, estimate_S_with_error, exact_value

    rk = cfg.resolved["rank"]
    settings = _settings(cfg.resolved["ce"], cfg.seed)
    res = ce_rank_optimize(rk["n"], rk["k"], settings, rk["replications"],
                           window=rk["window"], lookahead=rk["lookahead"])
    s = res.strategy
    # fresh stream, independent of the search draws
    s_hat, s_se = estimate_S_with_error(s, rk["final_replications"], np.random.default_rng([cfg.seed, 1]))
    result = {
        "S_hat": s_hat,
        "S_stderr": s_se,
        "iterations": len(res.log),
        "stopped_by": res.stopped_by,
        "thresholds": s.thresholds.tolist(),
    }
    if s.n <= MAX_EXACT_N:
        result["exact_value"] = exact_value(s)
    rows = []
    for i in range(s.k, 0, -1):
        start = s.k - i + 1
        for q, val in enumerate(s.thresholds[i - 1]):
            rows.append((i, start + q, int(val)))
    files = {
        "trajectory.csv": _csv(("picks_remaining", "position", "threshold"), rows),
        "iterations.csv": _csv(ITER_HEADER, _iteration_rows(res.log)),
    }
    return result, files


def _run_svrp(cfg: RunConfig) -> tuple[dict, dict]:
    from .svrp import ce_route_optimize

    sv = cfg.resolved["svrp"]
    inst = cfg.payload
    settings = _settings(cfg.resolved["ce"], cfg.seed)
    res = ce_route_optimize(inst, settings, sv["replications"], sv["window"], sv["lookahead"],
                            sv["final_replications"])
    result = {
        "G_hat": res.cost,
        "G_stderr": res.stderr,
        "route": list(res.route),
        "tour_length": inst.tour_length(res.route),
        "iterations": len(res.log),
        "stopped_by": res.stopped_by,
    }
    path = (0, *res.route, 0)
    dist = 0.0
    rows = []
    for step, node in enumerate(path):
        if step:
            dist += inst.distances[path[step - 1], node]
        rows.append((step, node, dist))
    files = {
        "trajectory.csv": _csv(("step", "node", "distance"), rows),
        "iterations.csv": _csv(ITER_HEADER, _iteration_rows(res.log)),
    }
    return result, files


def set_threads(threads: int | None) -> int:
    import numba

    limit = numba.config.NUMBA_NUM_THREADS
    if threads is None:
        return numba.get_num_threads()
    if threads < 1:
        raise ConfigError("thread count must be >= 1", "--threads")
    if threads > limit:
        log.warning("requested %d threads, only %d available; using %d", threads, limit, limit)
        threads = limit
    numba.set_num_threads(threads)
    return threads


def execute(cfg: RunConfig) -> dict:
    """Run the configured problem; return the artifact texts keyed by file name."""
    t0 = time.perf_counter()
    runner = {"rank": _run_rank, "svrp": _run_svrp}.get(cfg.problem, _run_sirc)
    result, files = runner(cfg)
    summary = {
        "schema_version": SCHEMA_VERSION,
        "problem": cfg.problem,
        "seed": cfg.seed,
        **result,
        "wall_time_s": time.perf_counter() - t0,
        "config": cfg.resolved,
    }
    files["summary.json"] = json.dumps(summary, indent=2, sort_keys=False) + "\n"
    return files


def write_outputs(files: dict, out_dir: Path) -> None:
    """Write every artifact or none: stage in a sibling temp dir, then move."""
    out_dir = Path(out_dir)
    out_dir.parent.mkdir(parents=True, exist_ok=True)
    stage = Path(tempfile.mkdtemp(prefix=".stage-", dir=out_dir.parent))
    try:
        for name, text in files.items():
            (stage / name).write_text(text)
        out_dir.mkdir(exist_ok=True)
        for name in files:
            os.replace(stage / name, out_dir / name)
    finally:
        shutil.rmtree(stage, ignore_errors=True)


def run(cfg: RunConfig, out_dir, threads: int | None = None) -> int:
    set_threads(threads)
    files = execute(cfg)
    write_outputs(files, Path(out_dir))
    return 0


def _with_seed(cfg: RunConfig, seed: int) -> RunConfig:
    resolved = dict(cfg.resolved, seed=seed)
    return RunConfig(cfg.problem, seed, resolved, cfg.source, cfg.payload)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="sirc-ce", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run a configuration and write its artifacts")
    p_run.add_argument("config", type=Path)
    p_run.add_argument("--seed", type=int, default=None, help="override the configured seed")
    p_run.add_argument("--entropy-seed", action="store_true", help="draw a fresh seed from OS entropy")
    p_run.add_argument("--out", type=Path, default=Path("out"), help="output directory (default: ./out)")
    p_run.add_argument("--threads", type=int, default=None, help="worker threads for population evaluation")
    p_val = sub.add_parser("validate", help="check a configuration and print it with defaults filled in")
    p_val.add_argument("config", type=Path)
    parser.add_argument("-v", "--verbose", action="store_true")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        cfg = parse_config(args.config)
        if args.command == "validate":
            sys.stdout.write(yaml.safe_dump(cfg.resolved, sort_keys=False))
            return 0
        if args.entropy_seed:
            cfg = _with_seed(cfg, int(np.random.SeedSequence().entropy) % 2**64)
        elif args.seed is not None:
            if not 0 <= args.seed < 2**64:
                raise ConfigError("seed must be a 64-bit unsigned integer", "--seed")
            cfg = _with_seed(cfg, args.seed)
        return run(cfg, args.out, args.threads)
    except (ConfigError, CeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
