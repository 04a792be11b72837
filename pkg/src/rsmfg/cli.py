"""Command-line orchestration: config parsing, dispatch, CSV serialization.

Usage: rsmfg <mode> --config <path> [--out <dir>] [--threads <n>] with mode
one of solve-single, verify-single, solve-mfg, simulate-population,
nash-gap, reproduce-paper.  Configs are JSON; cost matrices may be given
either with an explicit per-agent risk loading "delta" or with
"raw_exponent": true, meaning the quadratic weights are the literal
exponent coefficients (loaded as delta=2 so that delta/2 equals one).
All emitted CSVs are long-format and byte-stable for a fixed config.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import importlib.resources
import json
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .errors import (
    AssumptionViolated,
    DimensionMismatch,
    FiniteEscape,
    NonFiniteState,
    NotConverged,
    ParseError,
)
from .mfg import equilibrium_laws, solve_consistency
from .model import (
    LqgProblem,
    MajorMinorSpec,
    MajorParams,
    MinorTypeParams,
    validate_game,
    validate_single,
)
from .montecarlo import (
    ControlLaw,
    check_martingale_quotient,
    check_normalization,
    check_optimal_cost,
    estimate_cost,
    simulate,
)
from .numerics import MatrixTrajectory, TimeGrid
from .population import (
    finite_cost,
    fluctuation_statistics,
    nash_gap,
    simulate_population,
)
from .riccati import solve

MODES = ("solve-single", "verify-single", "solve-mfg",
         "simulate-population", "nash-gap", "reproduce-paper")
STOCHASTIC_MODES = ("verify-single", "simulate-population", "nash-gap")

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_NOT_CONVERGED = 3
EXIT_FINITE_ESCAPE = 4
EXIT_NON_FINITE = 5

RAW_EXPONENT_DELTA = 2.0


@dataclass
class ExperimentConfig:
    """Parsed and validated experiment description."""

    mode: str
    model: object                 # LqgProblem or MajorMinorSpec
    grid: TimeGrid
    montecarlo: dict
    fixedpoint: dict
    population: dict
    output: dict
    threads: int
    raw: dict                     # the config document as read


@dataclass
class ResultBundle:
    """In-memory results: manifest, named CSV tables, convergence log."""

    manifest: dict
    tables: dict = field(default_factory=dict)   # name -> (header, rows)
    convergence: list = field(default_factory=list)


def _require(doc: dict, key: str, where: str):
    if key not in doc:
        raise ParseError(f"{where}: missing field '{key}'")
    return doc[key]


def _coefficient(value, grid: TimeGrid, where: str):
    """A constant array, or {"nodes": [...]} sampled on the grid nodes."""
    if isinstance(value, dict):
        nodes = _require(value, "nodes", where)
        arr = np.asarray(nodes, dtype=float)
        if arr.shape[0] != grid.steps + 1:
            raise ParseError(
                f"{where}: node array needs {grid.steps + 1} entries")
        return MatrixTrajectory(grid, arr)
    return np.asarray(value, dtype=float)


def _agent_delta(doc: dict, raw_exponent: bool, where: str) -> float:
    if raw_exponent:
        if "delta" in doc:
            raise ParseError(
                f"{where}: 'delta' conflicts with raw_exponent form")
        return RAW_EXPONENT_DELTA
    return float(_require(doc, "delta", where))


def _parse_single(doc: dict, grid: TimeGrid) -> LqgProblem:
    raw_exp = bool(doc.get("raw_exponent", False))

    def get(key):
        return _require(doc, key, "model")

    x0 = np.asarray(get("x0"), dtype=float).reshape(-1)
    n = x0.size
    B = np.asarray(get("B"), dtype=float)
    B = B.reshape(1, 1) if B.ndim == 0 else B.reshape(n, -1)
    m = B.shape[1]
    return LqgProblem(
        A=_coefficient(get("A"), grid, "model.A"),
        B=B,
        b=_coefficient(doc.get("b", np.zeros(n)), grid, "model.b"),
        sigma=_coefficient(get("sigma"), grid, "model.sigma"),
        Q=np.asarray(get("Q"), dtype=float),
        S=np.asarray(doc.get("S", np.zeros((n, m))), dtype=float),
        R=np.asarray(get("R"), dtype=float),
        eta=np.asarray(doc.get("eta", np.zeros(n)), dtype=float).reshape(-1),
        zeta=np.asarray(doc.get("zeta", np.zeros(m)),
                        dtype=float).reshape(-1),
        Q_hat=np.asarray(get("Q_hat"), dtype=float),
        delta=_agent_delta(doc, raw_exp, "model"),
        x0=x0,
        T=float(get("T")),
    )


def _parse_game(doc: dict, grid: TimeGrid) -> MajorMinorSpec:
    raw_exp = bool(doc.get("raw_exponent", False))
    n = int(_require(doc, "n", "model"))
    m = int(_require(doc, "m", "model"))
    r = int(_require(doc, "r", "model"))
    mdoc = _require(doc, "major", "model")
    major = MajorParams(
        A=mdoc["A"], F=mdoc["F"], B=mdoc["B"],
        b=_coefficient(mdoc.get("b", np.zeros(n)), grid, "major.b"),
        sigma=_coefficient(_require(mdoc, "sigma", "major"), grid,
                           "major.sigma"),
        Q=mdoc["Q"], S=mdoc.get("S", np.zeros((n, m))), R=mdoc["R"],
        Q_hat=mdoc.get("Q_hat", np.zeros((n, n))),
        H=mdoc.get("H", np.zeros((n, n))),
        eta=np.asarray(mdoc.get("eta", np.zeros(n)), dtype=float),
        delta=_agent_delta(mdoc, raw_exp, "major"),
        x0=mdoc["x0"],
    )
    minors = []
    for i, kdoc in enumerate(_require(doc, "minors", "model")):
        where = f"minors[{i}]"
        minors.append(MinorTypeParams(
            A=kdoc["A"], F=kdoc["F"], G=kdoc["G"], B=kdoc["B"],
            b=_coefficient(kdoc.get("b", np.zeros(n)), grid, where + ".b"),
            sigma=_coefficient(_require(kdoc, "sigma", where), grid,
                               where + ".sigma"),
            Q=kdoc["Q"], S=kdoc.get("S", np.zeros((n, m))), R=kdoc["R"],
            Q_hat=kdoc.get("Q_hat", np.zeros((n, n))),
            H=kdoc.get("H", np.zeros((n, n))),
            H_hat=kdoc.get("H_hat", np.zeros((n, n))),
            eta=np.asarray(kdoc.get("eta", np.zeros(n)), dtype=float),
            delta=_agent_delta(kdoc, raw_exp, where),
            x0=kdoc["x0"],
        ))
    return MajorMinorSpec(
        major=major, minors=minors,
        pi=_require(doc, "pi", "model"),
        T=float(_require(doc, "T", "model")), n=n, m=m, r=r,
    )


def bundled_config(name: str) -> dict:
    """Load one of the packaged example configs by file name."""
    ref = importlib.resources.files("rsmfg") / "configs" / name
    return json.loads(ref.read_text())


def load_config(path, mode: str) -> ExperimentConfig:
    """Read, parse, and validate a JSON experiment config."""
    if mode not in MODES:
        raise ParseError(f"unknown mode '{mode}'")
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise ParseError(f"config file not found: {path}")
    except json.JSONDecodeError as e:
        raise ParseError(f"line {e.lineno}, column {e.colno}: {e.msg}")
    return parse_config(raw, mode)


def parse_config(raw: dict, mode: str) -> ExperimentConfig:
    grid_doc = raw.get("grid", {})
    steps = int(grid_doc.get("steps", 2000))
    montecarlo = dict(raw.get("montecarlo", {}))
    fixedpoint = dict(raw.get("fixedpoint", {}))
    population = dict(raw.get("population", {}))
    output = dict(raw.get("output", {}))
    if mode in STOCHASTIC_MODES and "seed" not in montecarlo:
        raise ParseError("seed required")

    model_doc = raw.get("model")
    if model_doc is None:
        if mode != "reproduce-paper":
            raise ParseError("missing field 'model'")
        model_doc = bundled_config("paper_example.json")["model"]
    kind = _require(model_doc, "type", "model")
    # grid end time comes from the model horizon
    T = float(_require(model_doc, "T", "model"))
    grid = TimeGrid(t_end=T, steps=steps)
    if kind == "single":
        model = validate_single(_parse_single(model_doc, grid))
    elif kind == "major_minor":
        model = validate_game(_parse_game(model_doc, grid))
    else:
        raise ParseError(f"model.type must be 'single' or 'major_minor',"
                         f" got '{kind}'")
    single_modes = ("solve-single", "verify-single")
    if mode in single_modes and not isinstance(model, LqgProblem):
        raise ParseError(f"mode {mode} needs a 'single' model")
    if mode not in single_modes and isinstance(model, LqgProblem):
        raise ParseError(f"mode {mode} needs a 'major_minor' model")

    return ExperimentConfig(
        mode=mode, model=model, grid=grid, montecarlo=montecarlo,
        fixedpoint=fixedpoint, population=population, output=output,
        threads=int(raw.get("threads", 1)), raw=raw,
    )


def _config_hash(raw: dict) -> str:
    canon = json.dumps(raw, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


def _manifest(cfg: ExperimentConfig) -> dict:
    return {
        "mode": cfg.mode,
        "config": cfg.raw,
        "config_sha256": _config_hash(cfg.raw),
        "threads": cfg.threads,
        "versions": {
            "rsmfg": __version__,
            "numpy": np.__version__,
            "python": ".".join(map(str, sys.version_info[:3])),
        },
    }


TRAJ_HEADER = ("time [problem units]", "entity", "component",
               "value [dimensionless]")


def _components(shape):
    if len(shape) == 0:
        return [("", ())]
    idx = np.ndindex(*shape)
    return [(",".join(map(str, ix)), ix) for ix in idx]


def _traj_rows(grid: TimeGrid, values: np.ndarray, entity: str):
    rows = []
    comps = _components(values.shape[1:])
    for i, t in enumerate(grid.nodes):
        for name, ix in comps:
            rows.append((repr(float(t)), entity, name,
                         repr(float(values[(i,) + ix]))))
    return rows


def _run_solve_single(cfg: ExperimentConfig, bundle: ResultBundle):
    sol = solve(cfg.model, cfg.grid)
    rows = []
    rows += _traj_rows(cfg.grid, sol.Pi.values, "Pi")
    rows += _traj_rows(cfg.grid, sol.s.values, "s")
    rows += _traj_rows(cfg.grid, sol.K_gain.values, "K_gain")
    rows += _traj_rows(cfg.grid, sol.k_offset.values, "k_offset")
    bundle.tables["solution"] = (TRAJ_HEADER, rows)
    bundle.tables["scalars"] = (("name", "value"),
                                [("C_star", repr(float(sol.C_star)))])
    return sol


def _run_verify_single(cfg: ExperimentConfig, bundle: ResultBundle):
    sol = _run_solve_single(cfg, bundle)
    n_paths = int(cfg.montecarlo.get("n_paths", 10_000))
    seed = int(cfg.montecarlo["seed"])
    rows = []
    norm = check_normalization(cfg.model, sol, n_paths, seed)
    rows.append(("normalization", "", repr(norm.value), repr(norm.target),
                 repr(norm.std_error), repr(norm.z)))
    cost = check_optimal_cost(cfg.model, sol, n_paths, seed + 1)
    rows.append(("optimal_cost", "", repr(cost.value), repr(cost.target),
                 repr(cost.std_error), repr(cost.z)))
    quot = check_martingale_quotient(cfg.model, sol, n_paths, seed + 2)
    for j in range(cfg.model.n):
        rows.append(("martingale_quotient", str(j),
                     repr(float(quot.quotient[j])),
                     repr(float(quot.target[j])),
                     repr(float(quot.std_error[j])),
                     repr(float(quot.z[j]))))
    bundle.tables["checks"] = (
        ("check", "component", "value", "target", "std_error", "z"), rows)


def _solve_mfg(cfg: ExperimentConfig, callback=None):
    fp = cfg.fixedpoint
    return solve_consistency(
        cfg.model, cfg.grid,
        tol=float(fp.get("tol", 1e-10)),
        max_iter=int(fp.get("max_iter", 50)),
        relaxation=float(fp.get("relaxation", 0.0)),
        eta_hat_sign=float(fp.get("eta_hat_sign", -1.0)),
        callback=callback,
    )


def _emit_mfg_tables(cfg, bundle, eq):
    rows = []
    rows += _traj_rows(cfg.grid, eq.A_bar.values, "A_bar")
    rows += _traj_rows(cfg.grid, eq.G_bar.values, "G_bar")
    rows += _traj_rows(cfg.grid, eq.m_bar.values, "m_bar")
    bundle.tables["mean_field"] = (TRAJ_HEADER, rows)
    (K0, k0), minor_laws = equilibrium_laws(eq)
    rows = []
    rows += _traj_rows(cfg.grid, K0.values, "major_gain")
    rows += _traj_rows(cfg.grid, k0.values, "major_offset")
    for k, (Kk, kk) in enumerate(minor_laws):
        rows += _traj_rows(cfg.grid, Kk.values, f"minor{k}_gain")
        rows += _traj_rows(cfg.grid, kk.values, f"minor{k}_offset")
    bundle.tables["laws"] = (TRAJ_HEADER, rows)
    bundle.convergence = list(eq.iterations.errors)
    bundle.tables["convergence"] = (
        ("iteration", "error"),
        [(str(j + 1), repr(e)) for j, e in enumerate(eq.iterations.errors)])


def _run_solve_mfg(cfg: ExperimentConfig, bundle: ResultBundle):
    eq = _solve_mfg(cfg)
    _emit_mfg_tables(cfg, bundle, eq)
    return eq


def _run_reproduce_paper(cfg: ExperimentConfig, bundle: ResultBundle):
    iter_rows = []

    def record(j, A_bar, G_bar, m_bar, error):
        for values, entity in ((A_bar, "A_bar"), (G_bar, "G_bar"),
                               (m_bar, "m_bar")):
            for t, ent, comp, val in _traj_rows(cfg.grid, values, entity):
                iter_rows.append((str(j), t, ent, comp, val))

    eq = solve_consistency(
        cfg.model, cfg.grid,
        tol=float(cfg.fixedpoint.get("tol", 1e-10)),
        max_iter=int(cfg.fixedpoint.get("max_iter", 50)),
        callback=record,
    )
    _emit_mfg_tables(cfg, bundle, eq)
    bundle.tables["iterations"] = (
        ("iteration",) + TRAJ_HEADER, iter_rows)
    return eq


def _run_simulate_population(cfg: ExperimentConfig, bundle: ResultBundle):
    eq = _solve_mfg(cfg)
    pop = cfg.population
    N = int(pop.get("N", 5))
    n_reps = int(pop.get("n_reps", 1000))
    seed = int(cfg.montecarlo["seed"])
    run = simulate_population(cfg.model, eq, N, n_reps=n_reps, seed=seed)
    rows = []
    est = finite_cost(run, "major")
    rows.append(("major", repr(est.log_value), repr(est.std_error),
                 str(est.n)))
    for j in range(N):
        est = finite_cost(run, j)
        rows.append((f"minor{j}", repr(est.log_value), repr(est.std_error),
                     str(est.n)))
    bundle.tables["costs"] = (
        ("agent", "log_cost", "std_error", "n_reps"), rows)
    bundle.tables["empirical_avg"] = (
        TRAJ_HEADER, _traj_rows(cfg.grid, run.empirical_avg, "x_emp"))
    bundle.tables["fluctuations"] = (
        ("statistic", "value"),
        [("mean_sup", repr(float(np.mean(run.fluct_sup)))),
         ("mean_terminal", repr(float(np.mean(run.fluct_T))))])


def _run_nash_gap(cfg: ExperimentConfig, bundle: ResultBundle):
    eq = _solve_mfg(cfg)
    pop = cfg.population
    schedule = [int(N) for N in pop.get("N_schedule", (5, 20, 80))]
    n_reps = int(pop.get("n_reps", 1000))
    agent = pop.get("agent", "major")
    if agent != "major":
        agent = int(agent)
    seed = int(cfg.montecarlo["seed"])
    rows = []
    for N in schedule:
        rep = nash_gap(cfg.model, eq, agent, N=N, n_reps=n_reps, seed=seed)
        rows.append((str(N), "equilibrium", repr(rep.equilibrium.log_value),
                     repr(rep.equilibrium.std_error), repr(rep.gap),
                     repr(rep.gap_std_error)))
        for label, est in rep.deviations:
            rows.append((str(N), label, repr(est.log_value),
                         repr(est.std_error), "", ""))
    bundle.tables["gaps"] = (
        ("N", "law", "log_cost", "std_error", "gap", "gap_std_error"), rows)
    stats = fluctuation_statistics(cfg.model, eq, schedule,
                                   n_reps=n_reps, seed=seed)
    rows = [(str(N), repr(float(s)), repr(float(t)))
            for N, s, t in zip(schedule, stats.mean_sup,
                               stats.mean_terminal)]
    bundle.tables["fluctuations"] = (
        ("N", "mean_sup", "mean_terminal"), rows)
    bundle.tables["slopes"] = (
        ("statistic", "value"),
        [("slope_sup", repr(stats.slope_sup)),
         ("slope_terminal", repr(stats.slope_terminal))])


_DISPATCH = {
    "solve-single": _run_solve_single,
    "verify-single": _run_verify_single,
    "solve-mfg": _run_solve_mfg,
    "simulate-population": _run_simulate_population,
    "nash-gap": _run_nash_gap,
    "reproduce-paper": _run_reproduce_paper,
}


def run(cfg: ExperimentConfig) -> ResultBundle:
    """Execute the configured mode and collect all result tables."""
    bundle = ResultBundle(manifest=_manifest(cfg))
    _DISPATCH[cfg.mode](cfg, bundle)
    return bundle


def write_bundle(bundle: ResultBundle, out_dir) -> list:
    """Write manifest.json and one CSV per table; returns written paths."""
    os.makedirs(out_dir, exist_ok=True)
    written = []
    path = os.path.join(out_dir, "manifest.json")
    with open(path, "w") as fh:
        json.dump(bundle.manifest, fh, sort_keys=True, indent=2)
        fh.write("\n")
    written.append(path)
    for name, (header, rows) in bundle.tables.items():
        path = os.path.join(out_dir, f"{name}.csv")
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            writer.writerows(rows)
        written.append(path)
    return written


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="rsmfg",
        description="risk-sensitive mean-field game solver and verifier")
    parser.add_argument("mode", choices=MODES)
    parser.add_argument("--config", required=True)
    parser.add_argument("--out", default=None)
    parser.add_argument("--threads", type=int, default=None)
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config, args.mode)
        if args.threads is not None:
            cfg.threads = args.threads
        bundle = run(cfg)
        out_dir = args.out or cfg.output.get("directory")
        if out_dir:
            for path in write_bundle(bundle, out_dir):
                print(path)
        if bundle.convergence:
            print(f"converged in {len(bundle.convergence)} iterations, "
                  f"final error {bundle.convergence[-1]:.3e}")
        return EXIT_OK
    except (ParseError, AssumptionViolated, DimensionMismatch) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_PARSE
    except NotConverged as e:
        print(f"error: fixed point did not converge after {e.iterations} "
              f"iterations (last error {e.last_error:.3e})", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    except FiniteEscape as e:
        print(f"error: finite escape of the backward equation at "
              f"t={e.t:.6g}", file=sys.stderr)
        return EXIT_FINITE_ESCAPE
    except NonFiniteState as e:
        print(f"error: simulation became non-finite at t={e.t:.6g}",
              file=sys.stderr)
        return EXIT_NON_FINITE


if __name__ == "__main__":
    sys.exit(main())
