"""``rckelly`` command line: solve, simulate, frontier and gen.

Every command writes JSON or CSV whose bytes depend only on the flags, and
echoes its effective configuration so a result can be reproduced from its
own output. Exit codes: 0 success, 1 solver did not converge, 2 usage,
3 file error.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from rckelly import expect, instances, kelly, montecarlo, qrck, rck
from rckelly.model import (
    BetVector,
    FiniteOutcomeModel,
    SolverConfig,
    lambda_from_alpha_beta,
    load_problem,
)

EXIT_OK, EXIT_NOT_CONVERGED, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3


class UsageError(Exception):
    pass


class FileError(Exception):
    pass


# ----------------------------------------------------------------- output


def _dumps(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=True, default=_jsonable) + "\n"


def _jsonable(x):
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"cannot serialize {type(x).__name__}")


def _emit(text: str, path) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    try:
        Path(path).write_text(text)
    except OSError as e:
        raise FileError(f"cannot write {path}: {e}") from e


def _read_json(path):
    try:
        return json.loads(Path(path).read_text())
    except OSError as e:
        raise FileError(f"cannot read {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise FileError(f"{path} is not valid JSON: {e}") from e


# ----------------------------------------------------------------- sources


def _parse_instance(text: str) -> dict:
    if text in ("finite", "mixture"):
        return {"kind": text}
    if text.startswith("two:"):
        parts = text.split(":")
        if len(parts) != 3:
            raise UsageError(f"expected two:PI:P, got {text!r}")
        try:
            return {"kind": "two", "pi": float(parts[1]), "P": float(parts[2])}
        except ValueError:
            raise UsageError(f"expected two:PI:P with numbers, got {text!r}") from None
    raise UsageError(f"unknown instance {text!r}; use finite, mixture or two:PI:P")


def _source_spec(args) -> dict:
    """Describe the return distribution named by the flags, fully resolved."""
    if args.problem and args.instance:
        raise UsageError("--problem and --instance are mutually exclusive")
    iseed = args.seed if args.instance_seed is None else args.instance_seed
    if args.problem:
        data = _read_json(args.problem)
        if isinstance(data, dict) and data.get("kind") == "mixture":
            return {"kind": "mixture", "n": int(data["n"]), "instance_seed": int(data["seed"]), "seed": args.seed}
        return {"kind": "problem", "path": str(args.problem)}
    if not args.instance:
        raise UsageError("one of --problem or --instance is required")
    spec = _parse_instance(args.instance)
    if spec["kind"] == "finite":
        spec.update(n=args.n, K=args.K, instance_seed=iseed)
    elif spec["kind"] == "mixture":
        spec.update(n=args.n, instance_seed=iseed, seed=args.seed)
    return spec


def _build_source(spec: dict):
    kind = spec["kind"]
    try:
        if kind == "finite":
            return instances.gen_finite(spec["n"], spec["K"], spec["instance_seed"])
        if kind == "two":
            return instances.gen_two_outcome(spec["pi"], spec["P"])
        if kind == "mixture":
            return instances.gen_lognormal_mixture(spec["n"], spec["instance_seed"], sample_seed=spec["seed"])
        if kind == "problem":
            try:
                return load_problem(spec["path"])
            except OSError as e:
                raise FileError(f"cannot read {spec['path']}: {e}") from e
            except (json.JSONDecodeError, KeyError) as e:
                raise FileError(f"{spec['path']} is not a problem file: {e}") from e
    except ValueError as e:
        raise UsageError(str(e)) from e
    raise UsageError(f"unknown source kind {kind!r}")


def _config(args) -> SolverConfig:
    kw = {"seed": args.seed}
    for flag, field in (("eps", "eps"), ("dual_cap", "dual_cap"), ("iters", "max_iters"),
                        ("batch", "batch_size"), ("step_constant", "step_constant")):
        v = getattr(args, flag, None)
        if v is not None:
            kw[field] = v
    try:
        return SolverConfig(**kw)
    except ValueError as e:
        raise UsageError(str(e)) from e


def _risk_lambda(args):
    """``(lam, alpha, beta)`` from ``--lambda`` or ``--alpha/--beta``."""
    has_ab = args.alpha is not None or args.beta is not None
    if args.lam is not None and has_ab:
        raise UsageError("--lambda and --alpha/--beta are mutually exclusive")
    if has_ab:
        if args.alpha is None or args.beta is None:
            raise UsageError("--alpha and --beta must be given together")
        try:
            return lambda_from_alpha_beta(args.alpha, args.beta), args.alpha, args.beta
        except ValueError as e:
            raise UsageError(str(e)) from e
    if args.lam is not None and args.lam < 0:
        raise UsageError("--lambda must be nonnegative")
    return args.lam, None, None


# ------------------------------------------------------------------ solve


def _solve(source, method, lam, config):
    finite = isinstance(source, FiniteOutcomeModel)
    if method == "kelly":
        return kelly.solve_finite(source, config) if finite else kelly.solve_sampled(source, source.n, config)
    if method == "rck":
        if finite:
            return rck.solve_finite_rck(source, lam, config)
        return rck.solve_sampled_rck(source, source.n, lam, config)
    moments = qrck.estimate_moments(source, config.moment_samples)
    return qrck.solve_qrck(moments, lam, config)


def cmd_solve(args) -> int:
    lam, alpha, beta = _risk_lambda(args)
    if args.method == "kelly":
        if lam not in (None, 0.0):
            raise UsageError("--method kelly takes no risk parameters")
        lam = 0.0
    elif lam is None:
        raise UsageError(f"--method {args.method} needs --lambda or --alpha/--beta")
    spec = _source_spec(args)
    source = _build_source(spec)
    config = _config(args)
    rep = _solve(source, args.method, lam, config)
    # certify with the true risk function, whatever the method optimized
    est = expect.estimate_risk(source, rep.bet, lam, config.holdout_samples)
    cert = rck.certify(rep.bet, lam, alpha, est.value) if lam > 0 else None
    out = {
        "command": "solve",
        "config": {
            "method": args.method,
            "lambda": lam,
            "alpha": alpha,
            "beta": beta,
            "source": spec,
            "solver": config.to_dict(),
        },
        "report": rep.to_dict(),
        "risk_value": {"value": est.value, "stderr": est.stderr},
        "certificate": None,
    }
    if cert is not None and cert.guaranteed:
        out["certificate"] = dict(
            cert.to_dict(), bounds={repr(a): cert.bound_at(a) for a in montecarlo.DEFAULT_ALPHAS}
        )
    _emit(_dumps(out), args.out)
    return EXIT_OK if rep.converged else EXIT_NOT_CONVERGED


# --------------------------------------------------------------- simulate


def _alpha_grid(text):
    try:
        grid = tuple(float(a) for a in text.split(",") if a.strip())
    except ValueError:
        raise UsageError(f"bad threshold list {text!r}") from None
    if not grid or not all(0.0 < a < 1.0 for a in grid):
        raise UsageError("thresholds must lie in (0, 1)")
    return grid


def _float_list(text, name):
    if text is None or text.strip() == "":
        return []
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"bad {name} list {text!r}") from None


def cmd_simulate(args) -> int:
    if (args.bet is None) == (args.from_solve is None):
        raise UsageError("exactly one of --bet or --from-solve is required")
    lam = args.lam
    if args.from_solve:
        solved = _read_json(args.from_solve)
        try:
            bet = solved["report"]["bet"]
            if lam is None:
                lam = solved["config"]["lambda"] or None
            spec = solved["config"]["source"] if not (args.problem or args.instance) else _source_spec(args)
        except (KeyError, TypeError):
            raise FileError(f"{args.from_solve} is not a solve output") from None
    else:
        data = _read_json(args.bet)
        bet = data.get("bet") if isinstance(data, dict) else data
        spec = _source_spec(args)
    source = _build_source(spec)
    try:
        bet = BetVector(bet)
        plan = montecarlo.SimulationPlan(args.trajectories, args.horizon, _alpha_grid(args.alpha_grid),
                                         args.seed, 0, args.threads)
        stats = montecarlo.simulate(source, bet, plan)
    except (ValueError, TypeError) as e:
        raise UsageError(str(e)) from e
    out = {
        "command": "simulate",
        "config": {"source": spec, "plan": plan.to_dict(), "lambda": lam},
        "summary": stats.summary(),
    }
    if lam:
        out["bound_check"] = [c.__dict__ for c in montecarlo.validate_bound(stats, lam)]
    _emit(_dumps(out), args.out)
    if args.csv:
        _emit(stats.to_csv(), args.csv)
    return EXIT_OK


# --------------------------------------------------------------- frontier


def cmd_frontier(args) -> int:
    lambdas = _float_list(args.lambdas, "lambda")
    fractions = _float_list(args.fractions, "fraction")
    if not lambdas and not fractions:
        raise UsageError("need --lambdas and/or --fractions")
    if any(x < 0 for x in lambdas) or any(not 0 <= f <= 1 for f in fractions):
        raise UsageError("lambdas must be nonnegative and fractions in [0, 1]")
    if not 0.0 < args.alpha < 1.0:
        raise UsageError("--alpha must lie in (0, 1)")
    spec = _source_spec(args)
    source = _build_source(spec)
    config = _config(args)
    plan = montecarlo.SimulationPlan(args.trajectories, args.horizon, (args.alpha,), args.seed, 0, args.threads)
    rows = montecarlo.frontier(source, lambdas, fractions, plan, config, alpha=args.alpha)
    _emit(montecarlo.frontier_csv(rows), args.out)
    meta = {
        "command": "frontier",
        "config": {"source": spec, "plan": plan.to_dict(), "lambdas": lambdas, "fractions": fractions,
                   "alpha": args.alpha, "solver": config.to_dict()},
    }
    if args.meta:
        _emit(_dumps(meta), args.meta)
    elif args.out not in (None, "-"):
        _emit(_dumps(meta), str(args.out) + ".json")
    return EXIT_OK


# -------------------------------------------------------------------- gen


def cmd_gen(args) -> int:
    try:
        if args.kind == "finite":
            model = instances.gen_finite(args.n, args.K, args.seed)
            gen = {"kind": "finite", "n": args.n, "K": args.K, "seed": args.seed}
            out = dict(model.to_dict(), generator=gen)
        elif args.kind == "two":
            if args.pi is None or args.P is None:
                raise UsageError("--kind two needs --pi and --P")
            model = instances.gen_two_outcome(args.pi, args.P)
            out = dict(model.to_dict(), generator={"kind": "two", "pi": args.pi, "P": args.P})
        else:
            out = instances.sampler_spec(instances.gen_lognormal_mixture(args.n, args.seed))
    except ValueError as e:
        raise UsageError(str(e)) from e
    _emit(_dumps(out), args.out)
    return EXIT_OK


# ------------------------------------------------------------------ parser


def _add_source(p):
    p.add_argument("--problem", help="problem JSON file (finite model or mixture spec)")
    p.add_argument("--instance", help="finite, mixture or two:PI:P")
    p.add_argument("--n", type=int, default=20, help="number of bets, cash included (default 20)")
    p.add_argument("--K", type=int, default=100, help="outcomes of a finite instance (default 100)")
    p.add_argument("--instance-seed", type=int, help="instance seed (default: --seed)")
    p.add_argument("--seed", type=int, default=0, help="seed for instances, sampling and simulation (default 0)")


def _add_solver(p):
    p.add_argument("--eps", type=float, help="cash floor")
    p.add_argument("--dual-cap", type=float, help="upper bound on the risk multiplier")
    p.add_argument("--iters", type=int, help="stochastic iterations")
    p.add_argument("--batch", type=int, help="samples per stochastic iteration")
    p.add_argument("--step-constant", type=float, help="C in the step size C/sqrt(k)")


def _add_plan(p):
    p.add_argument("--trajectories", type=int, default=10_000)
    p.add_argument("--horizon", type=int, default=100)
    p.add_argument("--threads", type=int, default=1, help="simulation threads; results do not depend on it")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rckelly", description="Risk-constrained Kelly gambling.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve a Kelly, RCK or QRCK problem")
    p.add_argument("--method", choices=("kelly", "rck", "qrck"), required=True)
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--alpha", type=float, help="drawdown threshold (with --beta)")
    p.add_argument("--beta", type=float, help="probability bound at --alpha")
    p.add_argument("--out", help="output file (default stdout)")
    p.add_argument("--threads", type=int, default=1, help=argparse.SUPPRESS)
    _add_source(p)
    _add_solver(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("simulate", help="Monte Carlo drawdown statistics of a bet")
    p.add_argument("--bet", help="JSON bet: a list or an object with a 'bet' entry")
    p.add_argument("--from-solve", help="output file of the solve command")
    p.add_argument("--lambda", dest="lam", type=float, help="risk parameter for bound checks")
    p.add_argument("--alpha-grid", default=",".join(repr(a) for a in montecarlo.DEFAULT_ALPHAS))
    p.add_argument("--out", help="summary JSON file (default stdout)")
    p.add_argument("--csv", help="per-trajectory CSV file")
    _add_source(p)
    _add_plan(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("frontier", help="growth versus drawdown risk table")
    p.add_argument("--lambdas", default="")
    p.add_argument("--fractions", default="")
    p.add_argument("--alpha", type=float, default=0.7, help="drawdown threshold (default 0.7)")
    p.add_argument("--out", help="CSV file (default stdout); metadata goes to OUT.json")
    p.add_argument("--meta", help="metadata JSON file")
    _add_source(p)
    _add_solver(p)
    _add_plan(p)
    p.set_defaults(func=cmd_frontier)

    p = sub.add_parser("gen", help="write a problem instance")
    p.add_argument("--kind", choices=("finite", "mixture", "two"), required=True)
    p.add_argument("--n", type=int, default=20)
    p.add_argument("--K", type=int, default=100)
    p.add_argument("--pi", type=float)
    p.add_argument("--P", type=float)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="output file (default stdout)")
    p.set_defaults(func=cmd_gen)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    if getattr(args, "threads", 1) < 1:
        parser.print_usage(sys.stderr)
        print("rckelly: error: --threads must be at least 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as e:
        parser.print_usage(sys.stderr)
        print(f"rckelly: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except FileError as e:
        print(f"rckelly: error: {e}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
