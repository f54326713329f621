"""Command line: ``simulate``, ``fit`` and ``verify``.

Exit codes: 0 success, 2 configuration or data error, 3 non-convergence,
4 invariant violation.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .basis import DictionarySpec, expand_design, smoothing_factors
from .lab import suites
from .lab.experiments import AdditiveModel
from .lab.reports import envelope, write_csv, write_json
from .penalty import GroupStructure, PenaltySpec, Rho, SmoothPenaltySpec
from .solver import FitConfig, LambdaRule, fit, fit_path, fit_smooth, lambda_from_theory
from .survival import DataError, load_dataset, save_dataset, simulate_cox_sample, summarize_dataset

EXIT_OK, EXIT_CONFIG, EXIT_NONCONVERGED, EXIT_INVARIANT = 0, 2, 3, 4


class ConfigError(ValueError):
    pass


# -- schema ---------------------------------------------------------------

SIMULATION_KEYS = {"n", "p", "s", "d", "amplitude", "family", "hazard_rate", "censor_rate", "tau",
                   "covariate_range"}
DICTIONARY_KEYS = {"family", "d", "domain", "standardize"}
PENALTY_KEYS = {"gamma", "lambda", "lambda_grid", "rule", "rho", "groups", "per_group_lambda", "smooth"}
RULE_KEYS = {"rule", "A", "u", "lambda0", "zeta", "c", "active_groups"}
FIT_KEYS = {"max_iters", "tol", "initial_step", "shrink", "sufficient_decrease", "accelerate", "mode",
            "kkt_tol", "min_step", "subgradient_step"}
TOP_KEYS = {
    "simulate": {"seed", "simulation"},
    "fit": {"seed", "data", "dictionary", "penalty", "fit"},
    "verify": {"seed"} | set(suites.DEFAULTS),
}


def _check_keys(block, allowed, where):
    if not isinstance(block, dict):
        raise ConfigError(f"{where}: expected an object")
    unknown = sorted(set(block) - allowed)
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {unknown}; allowed {sorted(allowed)}")


def _positive_int(block, key, where, minimum=1):
    v = block.get(key)
    if not isinstance(v, int) or isinstance(v, bool) or v < minimum:
        raise ConfigError(f"{where}.{key}: must be an integer >= {minimum}, got {v!r}")
    return v


def load_config(path, command) -> dict:
    if path is None:
        cfg = {}
    else:
        try:
            cfg = json.loads(Path(path).read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None
    _check_keys(cfg, TOP_KEYS[command], "config")
    if "seed" in cfg and (not isinstance(cfg["seed"], int) or cfg["seed"] < 0):
        raise ConfigError("config.seed: must be a nonnegative integer")
    return cfg


def _seed(args, cfg) -> int:
    return int(args.seed) if args.seed is not None else int(cfg.get("seed", 0))


# -- simulate -------------------------------------------------------------


def cmd_simulate(args) -> int:
    cfg = load_config(args.config, "simulate")
    sim = cfg.get("simulation")
    if sim is None:
        raise ConfigError("config.simulation: required")
    _check_keys(sim, SIMULATION_KEYS, "simulation")
    n = _positive_int(sim, "n", "simulation", 2)
    p = _positive_int(sim, "p", "simulation")
    s = sim.get("s", 0)
    if not isinstance(s, int) or not 0 <= s <= p:
        raise ConfigError(f"simulation.s: must be an integer in [0, p], got {s!r}")
    seed = _seed(args, cfg)
    try:
        model = AdditiveModel(p=p, d=int(sim.get("d", 4)), s=s, amplitude=float(sim.get("amplitude", 0.5)),
                              family=sim.get("family", "step"), hazard_rate=float(sim.get("hazard_rate", 1.0)),
                              censor_rate=float(sim.get("censor_rate", 0.3)),
                              covariate_range=tuple(sim.get("covariate_range", (0.0, 1.0))))
        sc = model.simulation(n, seed)
        sc.tau = sim.get("tau")
        ds = simulate_cox_sample(sc)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"simulation: {exc}") from None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    env = envelope(cfg, seed)
    save_dataset(ds, out / "data.csv", extra={**env, "model": model.to_json(),
                                                "beta_star": model.beta_star.tolist()}, comments=env)
    summary = summarize_dataset(ds)
    write_json(out / "summary.json", {"summary": summary}, cfg, seed)
    print(json.dumps(summary, indent=2))
    return EXIT_OK


# -- fit ------------------------------------------------------------------


def _penalty(block, design, ds):
    _check_keys(block, PENALTY_KEYS, "penalty")
    p, d = design.p, design.d
    gamma = block.get("gamma", 2)
    rho = Rho.from_json(block.get("rho", "identity"))
    audit = None
    lam = block.get("lambda")
    grid = block.get("lambda_grid")
    if "rule" in block:
        rb = block["rule"]
        _check_keys(rb, RULE_KEYS, "penalty.rule")
        gammas = tuple([gamma] * p) if np.isscalar(gamma) or isinstance(gamma, str) else tuple(gamma)
        active = rb.get("active_groups")
        rule = LambdaRule(rb.get("rule", "theorem1"), n=ds.n, p=p, d=d, A=float(rb.get("A", 1.0)),
                          u=float(rb.get("u", 1.0)), lambda0=float(rb.get("lambda0", 1.0)),
                          zeta=rb.get("zeta"), c=float(rb.get("c", 1.0)),
                          active_gammas=None if active is None else tuple(gammas[j] for j in active),
                          gammas=gammas, group_sizes=tuple([d] * p), u_source="config")
        res = lambda_from_theory(rule)
        lam, audit = res.value, res.audit
    if lam is None and grid is None:
        raise ConfigError("penalty: give one of lambda, lambda_grid or rule")
    if "smooth" in block:
        sm = block["smooth"]
        _check_keys(sm, {"eps_R"}, "penalty.smooth")
        factors = smoothing_factors(design.spec, float(sm.get("eps_R", 1e-8)), p)
        return SmoothPenaltySpec(factors, gamma, float(lam or 0.0), rho), grid, audit
    if "groups" in block:
        structure = GroupStructure(tuple(block["groups"]), p * d)
    else:
        structure = GroupStructure.contiguous(p, d)
    gam = gamma if np.isscalar(gamma) or isinstance(gamma, str) else tuple(gamma)
    spec = PenaltySpec(structure, gam, float(lam or 0.0), rho, block.get("per_group_lambda"))
    return spec, grid, audit


def cmd_fit(args) -> int:
    cfg = load_config(args.config, "fit")
    seed = _seed(args, cfg)
    data = args.data or cfg.get("data")
    if data is None:
        raise ConfigError("fit: no dataset given (use --data or config.data)")
    dict_block = cfg.get("dictionary", {"family": "step", "d": 4})
    _check_keys(dict_block, DICTIONARY_KEYS, "dictionary")
    fit_block = cfg.get("fit", {})
    _check_keys(fit_block, FIT_KEYS, "fit")
    try:
        ds = load_dataset(data)
        dspec = DictionarySpec.from_json(dict_block)
        design = expand_design(ds, dspec, bool(dict_block.get("standardize", False)))
        spec, grid, audit = _penalty(cfg.get("penalty", {}), design, ds)
        fc = FitConfig.from_json(fit_block)
    except (DataError, ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"fit: {exc}") from None
    out = Path(args.out)
    if isinstance(spec, SmoothPenaltySpec):
        if grid is not None:
            raise ConfigError("penalty: lambda_grid is not supported with smooth")
        results = [fit_smooth(design, ds, spec, fc)]
    elif grid is not None:
        results = fit_path(design, ds, spec, sorted(map(float, grid), reverse=True), fc)
    else:
        results = [fit(design, ds, spec, fc)]
    names = ["fit.json"] if len(results) == 1 else [f"fit_{k:03d}.json" for k in range(len(results))]
    for name, res in zip(names, results):
        write_json(out / name, res.to_json(audit), cfg, seed)
        status = "converged" if res.converged else f"NOT converged ({res.message})"
        print(f"{name}: lambda={res.lam:.6g} active={list(res.active_groups)} "
              f"kkt={res.kkt_residual:.3g} iterations={res.iterations} {status}")
    return EXIT_OK if all(r.converged for r in results) else EXIT_NONCONVERGED


# -- verify ---------------------------------------------------------------


def cmd_verify(args) -> int:
    if args.suite not in suites.SUITES:
        raise ConfigError(f"unknown suite {args.suite!r}; choose from {list(suites.SUITES)}")
    cfg = load_config(args.config, "verify")
    seed = _seed(args, cfg)
    names = [s for s in suites.SUITES if s != "all"] if args.suite == "all" else [args.suite]
    try:
        opts = {name: suites.options(name, cfg.get(name)) for name in names}
    except KeyError as exc:
        raise ConfigError(str(exc.args[0])) from None
    out = Path(args.out)
    failed = {}
    for name in names:
        payload, failures, tables = suites.RUNNERS[name](opts[name], seed)
        payload = {"suite": name, "options": opts[name], "failures": failures, **payload}
        write_json(out / f"verify_{name}.json", payload, cfg, seed)
        for fname, text in tables.items():
            write_csv(out / fname, text, cfg, seed)
        print(f"{name}: {'PASS' if not failures else 'FAIL'}")
        for f in failures:
            print(f"  - {f}")
        if failures:
            failed[name] = failures
    return EXIT_INVARIANT if failed else EXIT_OK


# -- entry point ----------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="structcox", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        p.add_argument("--config", required=config_required, help="JSON configuration file")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--seed", type=int, default=None, help="overrides the config seed")

    common(sub.add_parser("simulate", help="draw a censored dataset"))
    pf = sub.add_parser("fit", help="fit a penalised model")
    common(pf)
    pf.add_argument("--data", default=None, help="dataset CSV (overrides config.data)")
    pv = sub.add_parser("verify", help="run a verification suite")
    pv.add_argument("suite", help=f"one of {', '.join(suites.SUITES)}")
    common(pv, config_required=False)
    return ap


COMMANDS = {"simulate": cmd_simulate, "fit": cmd_fit, "verify": cmd_verify}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    if args.seed is not None and args.seed < 0:
        print("error: --seed must be nonnegative", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


__all__ = ["main", "build_parser"]
