"""Command-line entry point: ``gexprisk <subcommand> --config scenario.ini``.

Exit codes: 0 success, 2 validation failure, 3 infeasible scenario,
4 numerical failure.
"""
from __future__ import annotations

import argparse
import datetime
import os
import sys

import numpy as np

from . import convex, strategy
from .bsde import BasisError, SolverError, risk_of_strategy
from .config import ConfigError, ScenarioConfig, csv_cell, dumps
from .convex import ConstraintSet
from .generators import GENERATOR_FACTORIES, GeneratorError, avar
from .market import (DensityError, SimulationError, StrategyProcess, make_model, simulate_index)
from .pricing import PayoffError, derivative_hedge, indifference_price, make_payoff, marginal_price
from .verify import Row, run_benchmarks

EXIT_OK, EXIT_VALIDATION, EXIT_INFEASIBLE, EXIT_NUMERICAL = 0, 2, 3, 4
SUBCOMMANDS = ("simulate", "polar", "strategy", "risk", "price", "hedge", "verify")


# --- builders ------------------------------------------------------------

def build_model(cfg: ScenarioConfig):
    params = {k: v for k, v in cfg.model.items() if k != "preset"}
    try:
        return make_model(cfg.model["preset"], **params)
    except ValueError as exc:
        raise ConfigError("model", str(exc)) from None


def build_generator(cfg: ScenarioConfig):
    g = cfg.generator
    try:
        if g["family"] == "avar":
            return avar(g["level"])
        return GENERATOR_FACTORIES[g["family"]](g["level"], g["decay"])
    except GeneratorError as exc:
        raise ConfigError("generator", str(exc)) from None


def build_payoff(cfg: ScenarioConfig):
    params = {k: v for k, v in cfg.payoff.items() if k != "preset"}
    try:
        return make_payoff(cfg.payoff["preset"], **params)
    except (PayoffError, ValueError) as exc:
        raise ConfigError("payoff", str(exc)) from None


def build_constraint(cfg: ScenarioConfig) -> ConstraintSet | None:
    c = ConstraintSet(cfg.constraint["lower"], cfg.constraint["upper"])
    return None if c.kind == "whole-line" else c


def build_bundle(cfg: ScenarioConfig, model):
    sc, g = cfg.scenario, cfg.grid
    return simulate_index(model, sc["t0"], sc["r0"], sc["T"], g["n_steps"], g["n_paths"], g["seed"],
                          antithetic=g["antithetic"])


# --- report writers ------------------------------------------------------

class Reporter:
    def __init__(self, cfg: ScenarioConfig, quiet: bool = False):
        self.cfg = cfg
        self.quiet = quiet
        self.dir = cfg.output["dir"]
        self.written: list[str] = []

    def _path(self, name):
        os.makedirs(self.dir, exist_ok=True)
        path = os.path.join(self.dir, name)
        self.written.append(path)
        return path

    def csv(self, name, header, rows):
        lines = [f"# config: {dumps(self.cfg.echo())}"]
        if self.cfg.output["timestamp"]:
            lines.append(f"# generated: {datetime.datetime.now(datetime.timezone.utc).isoformat()}")
        lines.append(",".join(header))
        lines += [",".join(csv_cell(v) for v in row) for row in rows]
        with open(self._path(name), "w", newline="") as fh:
            fh.write("\n".join(lines) + "\n")

    def json(self, name, result):
        doc = {"config": self.cfg.echo(), "result": result}
        if self.cfg.output["timestamp"]:
            doc["generated"] = datetime.datetime.now(datetime.timezone.utc).isoformat()
        with open(self._path(name), "w") as fh:
            fh.write(dumps(doc) + "\n")

    def say(self, msg):
        if not self.quiet:
            print(msg)


# --- subcommands ---------------------------------------------------------

def cmd_simulate(cfg, rep):
    model = build_model(cfg)
    b = build_bundle(cfg, model)
    q05, q50, q95 = np.quantile(b.R, [0.05, 0.5, 0.95], axis=0)
    n_show = min(3, b.n_paths)
    header = ["s", "mean", "std", "q05", "q50", "q95"] + [f"path{i}" for i in range(n_show)]
    rows = [[b.grid[j], b.R[:, j].mean(), b.R[:, j].std(), q05[j], q50[j], q95[j], *b.R[:n_show, j]]
            for j in range(b.n_steps + 1)]
    rep.csv("simulate.csv", header, rows)
    rep.say(f"simulated {b.n_paths} paths x {b.n_steps} steps; E[R_T] = {b.R[:, -1].mean():.6g}")
    return EXIT_OK


def cmd_polar(cfg, rep):
    spec = build_generator(cfg)
    sc, tb = cfg.scenario, cfg.tables
    rows = []
    for mu in np.linspace(tb["mu_min"], tb["mu_max"], tb["mu_count"]):
        a = convex.polar(spec, sc["t0"], sc["x"], float(mu), sc["r0"])
        n = convex.polar(spec, sc["t0"], sc["x"], float(mu), sc["r0"], numeric=True)
        rows.append([mu, a.value, a.optimizer, n.value, n.optimizer, a.finite, a.boundary])
    rep.csv("polar.csv", ["mu", "G", "optimizer", "G_numeric", "optimizer_numeric", "finite", "boundary"], rows)
    rep.say(f"polar of {spec.name} on {len(rows)} points")
    return EXIT_OK


def _feasibility_grid(cfg):
    sc, tb = cfg.scenario, cfg.tables
    times = np.linspace(sc["t0"], sc["T"], tb["time_points"])
    rs = sorted(set(tb["r_values"]) | {sc["r0"]})
    xs = sorted(set(tb["x_values"]) | {sc["x"]})
    return [(s, r, x) for s in times for r in rs for x in xs]


def _optimal(cfg, spec, model, gamma_set, bundle=None):
    sc, g = cfg.scenario, cfg.grid
    return strategy.optimal_strategy(spec, model, sc["t0"], sc["T"], sc["x"], sc["r0"], g["n_steps"],
                                     gamma_set, bundle=bundle, basis_degree=g["basis_degree"])


def _needs_bundle(cfg, spec, model):
    sc = cfg.scenario
    r0 = sc["r0"]
    return not (model.is_theta_deterministic(sc["t0"], r0) and all(
        float(spec.scale(sc["t0"], rr, sc["x"])) == float(spec.scale(sc["t0"], r0, sc["x"])) for rr in (r0 - 1, r0 + 1)))


def _regime(spec, model, s, r, x):
    return strategy.classify_point(spec.family, float(model.theta(s, np.asarray(r, dtype=float))),
                                   float(spec.scale(s, r, x)))[0]


def cmd_strategy(cfg, rep):
    model, spec, gamma_set = build_model(cfg), build_generator(cfg), build_constraint(cfg)
    if gamma_set is None or spec.family != "entropic_quadratic":
        report = strategy.feasibility(spec, model, _feasibility_grid(cfg))
        if not report.feasible:
            raise strategy.InfeasibleError(report)
    bundle = build_bundle(cfg, model) if _needs_bundle(cfg, spec, model) else None
    res = _optimal(cfg, spec, model, gamma_set, bundle)
    header = ["s", "r", "x", "theta", "z_bar", "p_bar", "pi_bar", "regime"]
    rows = []
    if res.mode == "deterministic":
        for s, r, x in _feasibility_grid(cfg):
            p = res.p_bar(s, r, x)
            rows.append([s, r, x, model.theta(s, np.asarray(r)), 0.0, p, res.pi_bar(s, r, x), _regime(spec, model, s, r, x)])
        rep.csv("ybar.csv", ["s", "y_bar"], list(zip(res.y_bar_curve.grid, res.y_bar_curve.values)))
    else:
        x = cfg.scenario["x"]
        n_show = min(5, bundle.n_paths)
        for j in np.unique(np.linspace(0, bundle.n_steps - 1, cfg.tables["time_points"]).astype(int)):
            s, r = bundle.grid[j], bundle.R[:n_show, j]
            p = res.p_bar(j, s, bundle.R[:, j])[:n_show]
            pi = res.pi_bar(j, s, bundle.R[:, j])[:n_show]
            for i in range(n_show):
                rows.append([s, r[i], x, model.theta(s, r[i]), res.z_bar[i, j], p[i], pi[i], _regime(spec, model, s, r[i], x)])
    rep.csv("strategy.csv", header, rows)
    rep.json("strategy.json", {"mode": res.mode, "y_bar": res.y_bar_t})
    rep.say(f"{res.mode} strategy; minimal risk Ybar(t) = {res.y_bar_t:.10g}")
    return EXIT_OK


def cmd_risk(cfg, rep):
    model, spec, gamma_set = build_model(cfg), build_generator(cfg), build_constraint(cfg)
    bundle = build_bundle(cfg, model)
    res = _optimal(cfg, spec, model, gamma_set, bundle if _needs_bundle(cfg, spec, model) else None)
    x = cfg.scenario["x"]
    if res.mode == "deterministic":
        opt = StrategyProcess.feedback(res.p_bar, x)
    else:
        opt = StrategyProcess(lambda j, s, r: res.p_bar(j, s, r), x)
    deg = cfg.grid["basis_degree"]
    at_opt = risk_of_strategy(bundle, opt, spec, model, deg)
    at_zero = risk_of_strategy(bundle, StrategyProcess.constant(0.0, x), spec, model, deg)
    result = {"rho_optimal": at_opt.y_t, "rho_optimal_se": at_opt.std_err, "rho_zero": at_zero.y_t,
              "rho_zero_se": at_zero.std_err, "paired_se": at_opt.paired_se(at_zero, bundle),
              "y_bar": res.y_bar_t, "mode": res.mode}
    rep.json("risk.json", result)
    rep.say(f"rho(p_bar) = {at_opt.y_t:.8g}, rho(0) = {at_zero.y_t:.8g}, Ybar = {res.y_bar_t:.8g}")
    return EXIT_OK


def cmd_price(cfg, rep):
    model, payoff = build_model(cfg), build_payoff(cfg)
    report = indifference_price(model, payoff, build_bundle(cfg, model))
    rep.json("price.json", {**report.to_dict(), "marginal_price": marginal_price(report)})
    rep.say(f"q = {report.q:.8g} +/- {report.std_err:.3g}")
    return EXIT_OK


def cmd_hedge(cfg, rep):
    model, payoff = build_model(cfg), build_payoff(cfg)
    report = derivative_hedge(model, payoff, build_bundle(cfg, model))
    rep.json("hedge.json", report.to_dict())
    rep.say(f"Delta = {report.delta:.8g} +/- {report.std_err:.3g}")
    if any(report.diagnostics.heavy_tails):
        print("warning: heavy-tailed integrability diagnostics", file=sys.stderr)
    return EXIT_OK


def cmd_verify(cfg, rep):
    rows = run_benchmarks(cfg)
    rep.csv("verify.csv", list(Row.FIELDS), [r.as_list() for r in rows])
    failed = [r for r in rows if not r.passed]
    for r in rows:
        rep.say(f"{'PASS' if r.passed else 'FAIL'} {r.check} [{r.case}] error={r.error:.3g} tol={r.tolerance:.3g}")
    rep.say(f"{len(rows) - len(failed)}/{len(rows)} benchmark rows pass")
    return EXIT_OK if not failed else EXIT_NUMERICAL


COMMANDS = {"simulate": cmd_simulate, "polar": cmd_polar, "strategy": cmd_strategy, "risk": cmd_risk,
            "price": cmd_price, "hedge": cmd_hedge, "verify": cmd_verify}


# --- entry ---------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gexprisk", description=__doc__.splitlines()[0])
    parser.add_argument("subcommand", choices=SUBCOMMANDS)
    parser.add_argument("--config", help="scenario INI file (defaults apply when omitted)")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--paths", type=int)
    parser.add_argument("--steps", type=int)
    parser.add_argument("--quiet", action="store_true")
    return parser


def load_config(args) -> ScenarioConfig:
    cfg = ScenarioConfig.load(args.config) if args.config else ScenarioConfig.from_dict({})
    return cfg.with_overrides(seed=args.seed, n_paths=args.paths, n_steps=args.steps, out_dir=args.out)


def run(subcommand: str, cfg: ScenarioConfig, quiet: bool = False) -> int:
    rep = Reporter(cfg, quiet)
    try:
        return COMMANDS[subcommand](cfg, rep)
    except ConfigError as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except strategy.InfeasibleError as exc:
        rep.json("feasibility.json", exc.report.to_dict())
        print(dumps(exc.report.to_dict()), file=sys.stderr)
        return EXIT_INFEASIBLE
    except (SimulationError, DensityError, SolverError, BasisError, ArithmeticError) as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args)
    except ConfigError as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    return run(args.subcommand, cfg, args.quiet)


if __name__ == "__main__":
    sys.exit(main())
