"""Command-line entry point.

Subcommands: eval, optimize, continuity, examples, simulate.  Every run
writes delimited output (CSV), a rendered figure for the report at hand,
and a JSON manifest with the resolved parameters into --out; deterministic
commands reproduce their outputs bit-exactly from the manifest.

Exit codes: 0 success, 2 model/config error, 3 numerical failure
(instability, truncation cap, search space too large), 4 self-check
assertion failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .common import (
    AvgMdpError,
    ConfigError,
    ErgodicityError,
    KCapExceededError,
    NonConvergedError,
    PolicyBindingError,
    SearchSpaceTooLargeError,
    SelfCheckError,
    SingularTruncationError,
    UndecidableTailError,
    UnstablePolicyError,
)
from .config import LoadedConfig, load_config
from .continuity import eta_diff_bound, modulus_scan
from .ctmdp import GenericCtmdpModel, average_cost_generic, solve_nu
from .evaluate import evaluate_eta
from .linechain import (
    approaching_reward_chain,
    diminishing_cost_chain,
    history_block_averages,
    history_stream_average,
    stationary_supremum_gap,
)
from .policies import (
    AllOnTail,
    ConstantTail,
    MetricParams,
    format_policy,
    parse_action,
    parse_policy,
)
from .queueing import GroupServerModel, average_cost, steady_state
from .search import exhaustive_search
from .sim import SimConfig, simulate_eta

_CONFIG_ERRORS = (ConfigError, PolicyBindingError, ErgodicityError,
                  UndecidableTailError, FileNotFoundError, ValueError)
_NUMERIC_ERRORS = (UnstablePolicyError, KCapExceededError,
                   SingularTruncationError, SearchSpaceTooLargeError,
                   NonConvergedError)


def _add_common(sub: argparse.ArgumentParser, config_required: bool = True) -> None:
    sub.add_argument("--config", required=config_required, help="model config file")
    sub.add_argument("--tol", type=float, default=1e-8, help="error tolerance")
    sub.add_argument("--r", type=float, default=None,
                     help="metric weight (overrides the config's metric section)")
    sub.add_argument("--out", default="out", help="output directory")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="avgmdp",
        description="Average-cost analysis of countable-state MDPs")
    commands = parser.add_subparsers(dest="command", required=True)

    p_eval = commands.add_parser("eval", help="evaluate eta(u) for one policy")
    _add_common(p_eval)
    p_eval.add_argument("--policy", required=True, help="policy literal")
    p_eval.add_argument("--self-check", action="store_true",
                        help="verify internal invariants; exit 4 on violation")
    p_eval.set_defaults(func=_cmd_eval)

    p_opt = commands.add_parser("optimize", help="exhaustive prefix search")
    _add_common(p_opt)
    p_opt.add_argument("--L", type=int, default=12, help="prefix length")
    p_opt.add_argument("--tail", default="all-on",
                       help="tail rule: all-on or constant(a)")
    p_opt.add_argument("--cap", type=int, default=100_000,
                       help="enumeration cardinality cap")
    p_opt.add_argument("--mode", choices=("min", "max"), default="min")
    p_opt.add_argument("--workers", type=int, default=0,
                       help="parallel evaluators (0 = all cores)")
    p_opt.set_defaults(func=_cmd_optimize)

    p_cont = commands.add_parser(
        "continuity", help="perturbation bounds for nearby policies")
    _add_common(p_cont)
    p_cont.add_argument("--policy", required=True, help="center policy literal")
    p_cont.add_argument("--policy2", default=None,
                        help="second policy for a single-pair report")
    p_cont.add_argument("--ks", default="2,5,10",
                        help="comma-separated agreement prefixes to scan")
    p_cont.add_argument("--samples", type=int, default=12,
                        help="neighborhood samples per k")
    p_cont.add_argument("--seed", type=int, default=0)
    p_cont.add_argument("--self-check", action="store_true")
    p_cont.set_defaults(func=_cmd_continuity)

    p_ex = commands.add_parser(
        "examples", help="the two deterministic line-chain benchmarks")
    p_ex.add_argument("--which", type=int, choices=(1, 2), required=True,
                      help="1 = diminishing stay cost, 2 = approaching stay reward")
    p_ex.add_argument("--policy", default=None, help="policy literal to evaluate")
    p_ex.add_argument("--L", type=int, default=64,
                      help="state budget for the stationary gap report")
    p_ex.add_argument("--stream-T", type=int, default=100_000,
                      help="steps of the dwell-then-advance reward stream")
    p_ex.add_argument("--out", default="out")
    p_ex.set_defaults(func=_cmd_examples)

    p_sim = commands.add_parser("simulate", help="discrete-event simulation")
    _add_common(p_sim)
    p_sim.add_argument("--policy", required=True, help="policy literal")
    p_sim.add_argument("--horizon", type=float, default=100_000.0)
    p_sim.add_argument("--warmup", type=float, default=5_000.0)
    p_sim.add_argument("--seed", type=int, default=0)
    p_sim.add_argument("--batches", type=int, default=20)
    p_sim.set_defaults(func=_cmd_simulate)

    return parser


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _metric_for(args, cfg: LoadedConfig | None) -> MetricParams:
    if getattr(args, "r", None) is not None:
        return MetricParams(r=args.r)
    return cfg.metric if cfg is not None else MetricParams()


def _write_csv(path: Path, header, rows, preamble: str | None = None) -> Path:
    with open(path, "w", newline="") as handle:
        if preamble:
            handle.write(preamble + "\n")
        writer = csv.writer(handle)
        writer.writerow(header)
        writer.writerows(rows)
    return path


def _write_manifest(out: Path, command: str, params: dict, outputs: list[Path],
                    started: float) -> Path:
    manifest = {
        "command": command,
        "parameters": params,
        "outputs": [str(p) for p in outputs],
        "versions": {"avgmdp": __version__, "numpy": np.__version__,
                     "scipy": scipy.__version__},
        "wall_clock_s": round(time.perf_counter() - started, 6),
    }
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def _parse_tail(text: str):
    text = text.strip()
    if text == "all-on":
        return AllOnTail()
    if text.startswith("constant(") and text.endswith(")"):
        return ConstantTail(parse_action(text[len("constant("):-1]))
    raise ConfigError(f"unknown tail rule {text!r}")


def _queue_self_checks(model: GroupServerModel, policy, steady) -> None:
    from .queueing import service_rate

    total = float(steady.pi.sum())
    if not math.isclose(total, 1.0, rel_tol=0.0, abs_tol=1e-12):
        raise SelfCheckError(f"window normalization violated: sum pi = {total}")
    if steady.tail_mass_bound < 0.0:
        raise SelfCheckError("negative tail mass bound")
    lam = model.arrival_rate
    for n in range(1, steady.n_trunc + 1):
        lhs = steady.pi[n] * service_rate(model, policy.action(n))
        rhs = steady.pi[n - 1] * lam
        if abs(lhs - rhs) > 1e-10 * max(1.0, abs(rhs)):
            raise SelfCheckError(
                f"detailed balance violated at state {n}: {lhs} vs {rhs}")


def _cmd_eval(args) -> int:
    started = time.perf_counter()
    cfg = load_config(args.config)
    out = _outdir(args)
    policy = parse_policy(args.policy).bind(cfg.model)
    outputs: list[Path] = []

    if isinstance(cfg.model, GroupServerModel):
        steady = steady_state(cfg.model, policy, args.tol)
        eta = average_cost(cfg.model, policy, args.tol)
        if args.self_check:
            _queue_self_checks(cfg.model, policy, steady)
        states = range(steady.n_trunc + 1)
        fvals = [cfg.model.cost_rate(n, policy.action(n)) for n in states]
        rows = [(n, f"{steady.pi[n]:.17g}", f"{fvals[n]:.17g}",
                 f"{steady.pi[n] * fvals[n]:.17g}") for n in states]
        outputs.append(_write_csv(out / "eval.csv",
                                  ("state", "pi", "f", "contribution"), rows))
        from . import plots
        outputs.append(plots.save_distribution(
            out / "eval_distribution.png", list(states), steady.pi,
            [steady.pi[n] * fvals[n] for n in states],
            title=f"eta = {eta.value:.8g} (bound {eta.bound:.2g})"))
        print(f"eta = {eta.value:.12g}  error_bound = {eta.bound:.3g}  "
              f"G = {steady.G:.12g}  n_trunc = {steady.n_trunc}  "
              f"rho0 = {steady.rho0:.6g}")
    else:
        model: GenericCtmdpModel = cfg.model
        solution = solve_nu(model, policy, args.tol)
        eta = average_cost_generic(model, policy, args.tol)
        if args.self_check:
            limit = 1e-9 * model.rate_bound * float(max(solution.nu.max(), 1.0))
            if solution.residual > limit:
                raise SelfCheckError(
                    f"balance residual {solution.residual} exceeds {limit}")
        states = range(solution.k_trunc + 1)
        fvals = [model.cost(i, policy.action(i)) for i in states]
        rows = [(i, f"{solution.nu[i]:.17g}", f"{solution.pi[i]:.17g}",
                 f"{fvals[i]:.17g}", f"{solution.pi[i] * fvals[i]:.17g}")
                for i in states]
        preamble = (f"# k_trunc={solution.k_trunc}, residual={solution.residual:.3e}, "
                    f"eta_error_estimate={eta.bound:.3e}")
        outputs.append(_write_csv(out / "eval.csv",
                                  ("state", "nu", "pi", "f", "contribution"),
                                  rows, preamble=preamble))
        from . import plots
        outputs.append(plots.save_distribution(
            out / "eval_distribution.png", list(states), solution.pi,
            [solution.pi[i] * fvals[i] for i in states],
            title=f"eta = {eta.value:.8g} (estimate {eta.bound:.2g})"))
        print(f"eta = {eta.value:.12g}  error_estimate = {eta.bound:.3g}  "
              f"k_trunc = {solution.k_trunc}  residual = {solution.residual:.3g}")

    outputs.append(_write_manifest(out, "eval", {
        "config": str(args.config), "policy": format_policy(policy),
        "tol": args.tol, "self_check": args.self_check}, outputs, started))
    return 0


def _cmd_optimize(args) -> int:
    started = time.perf_counter()
    cfg = load_config(args.config)
    out = _outdir(args)
    tail = _parse_tail(args.tail)
    workers = args.workers if args.workers > 0 else (os.cpu_count() or 1)
    result = exhaustive_search(cfg.model, args.L, tail, tol=args.tol,
                               cap=args.cap, mode=args.mode, workers=workers)

    rows = []
    for record in result.records:
        if record.eta is None:
            rows.append((format_policy(record.policy), "", "", "unstable"))
        else:
            rows.append((format_policy(record.policy),
                         f"{record.eta.value:.17g}", f"{record.eta.bound:.3g}", ""))
    outputs = [_write_csv(out / "optimize.csv",
                          ("policy", "eta", "bound", "note"), rows)]

    stable = [(i, r.eta.value) for i, r in enumerate(result.records) if r.eta]
    from . import plots
    etas = [v for _, v in stable]
    best_pos = max(range(len(stable)),
                   key=lambda i: -etas[i] if result.mode == "min" else etas[i])
    outputs.append(plots.save_candidates(out / "optimize_candidates.png",
                                         etas, best_pos, mode=result.mode))

    print(f"best policy: {format_policy(result.best_policy)}")
    print(f"best eta = {result.best_eta.value:.12g}  "
          f"error_bound = {result.best_eta.bound:.3g}")
    print(f"evaluated = {result.evaluated}  "
          f"skipped_unstable = {result.skipped_unstable}  "
          f"runner_up_gap = {result.runner_up_gap}")
    if result.cmu is not None:
        verdict = "conforms" if result.cmu.ok else f"violates at {result.cmu.witness}"
        print(f"c/mu priority order: {verdict}")

    outputs.append(_write_manifest(out, "optimize", {
        "config": str(args.config), "L": args.L, "tail": args.tail,
        "tol": args.tol, "cap": args.cap, "mode": args.mode,
        "workers": workers}, outputs, started))
    return 0


def _cmd_continuity(args) -> int:
    started = time.perf_counter()
    cfg = load_config(args.config)
    if not isinstance(cfg.model, GroupServerModel):
        raise ConfigError(
            "continuity diagnostics need a queue config (the normalizer "
            "machinery is product-form specific)")
    out = _outdir(args)
    metric = _metric_for(args, cfg)
    center = parse_policy(args.policy).bind(cfg.model)
    outputs: list[Path] = []

    if args.policy2 is not None:
        other = parse_policy(args.policy2).bind(cfg.model)
        report = eta_diff_bound(cfg.model, center, other, args.tol, metric)
        if args.self_check:
            if abs(report.eta_diff) > report.rigorous_bound + 1e-10:
                raise SelfCheckError(
                    f"|eta diff| {abs(report.eta_diff)} exceeds the rigorous "
                    f"bound {report.rigorous_bound}")
            if report.sandwich_strict is False:
                raise SelfCheckError("sigma sandwich is not strict")
        rows = [(report.agreement, f"{report.distance:.17g}",
                 _fmt(report.sigma), _fmt(report.sigma_lower), _fmt(report.sigma_upper),
                 f"{report.eta_diff:.17g}", f"{report.rigorous_bound:.17g}")]
        outputs.append(_write_csv(
            out / "continuity_pair.csv",
            ("agreement", "distance", "sigma", "sigma_lower", "sigma_upper",
             "eta_diff", "rigorous_bound"), rows))
        print(f"agreement = {report.agreement}  distance = {report.distance:.6g}")
        if report.sigma is not None:
            print(f"sigma = {report.sigma:.6g} in "
                  f"({report.sigma_lower:.6g}, {report.sigma_upper:.6g})")
        print(f"eta(u) = {report.eta_u.value:.12g}  eta(u') = {report.eta_u2.value:.12g}")
        print(f"eta_diff = {report.eta_diff:.6g} <= bound {report.rigorous_bound:.6g}")
    else:
        ks = [int(k) for k in args.ks.split(",") if k.strip()]
        rows_data = modulus_scan(cfg.model, center, ks, tol=args.tol,
                                 samples_per_k=args.samples, seed=args.seed,
                                 metric=metric)
        if args.self_check:
            for row in rows_data:
                if row.max_abs_diff > row.max_bound + 1e-10:
                    raise SelfCheckError(
                        f"k={row.k}: observed diff {row.max_abs_diff} exceeds "
                        f"bound {row.max_bound}")
        rows = [(r.k, r.samples, r.skipped_unstable, f"{r.max_abs_diff:.17g}",
                 f"{r.max_bound:.17g}", int(r.exhausted), int(r.noisy))
                for r in rows_data]
        outputs.append(_write_csv(
            out / "continuity_modulus.csv",
            ("k", "samples", "skipped_unstable", "max_abs_diff", "max_bound",
             "exhausted", "noisy"), rows))
        from . import plots
        outputs.append(plots.save_modulus(
            out / "continuity_modulus.png", [r.k for r in rows_data],
            [r.max_abs_diff for r in rows_data], [r.max_bound for r in rows_data]))
        print("k  samples  max|eta diff|  max bound")
        for r in rows_data:
            flag = " (noisy)" if r.noisy else ""
            print(f"{r.k:<3} {r.samples:<8} {r.max_abs_diff:<14.6g} "
                  f"{r.max_bound:.6g}{flag}")

    outputs.append(_write_manifest(out, "continuity", {
        "config": str(args.config), "policy": args.policy,
        "policy2": args.policy2, "ks": args.ks, "samples": args.samples,
        "seed": args.seed, "tol": args.tol, "r": metric.r}, outputs, started))
    return 0


def _fmt(value) -> str:
    return "" if value is None else f"{value:.17g}"


def _cmd_examples(args) -> int:
    started = time.perf_counter()
    out = _outdir(args)
    model = diminishing_cost_chain() if args.which == 1 else approaching_reward_chain()
    outputs: list[Path] = []

    if args.policy is not None:
        policy = parse_policy(args.policy).bind(model)
        eta = evaluate_eta(model, policy)
        print(f"eta({format_policy(policy)}) = {eta.value:.12g}")

    if args.which == 2:
        reports = [stationary_supremum_gap(model, budget)
                   for budget in range(1, args.L + 1)]
        rows = [(r.budget, f"{r.best_eta:.17g}",
                 r.best_stay_state if r.best_stay_state is not None else "",
                 f"{r.gap:.17g}") for r in reports]
        outputs.append(_write_csv(out / "examples_gap.csv",
                                  ("budget", "best_stationary_eta", "stay_state",
                                   "gap_to_optimum"), rows))
        last = reports[-1]
        print(f"best stationary eta within {last.budget} states = "
              f"{last.best_eta:.12g} (gap {last.gap:.6g} to optimum "
              f"{last.eta_star})")
        averages = history_block_averages(args.stream_T)
        stream_avg = history_stream_average(args.stream_T)
        rows = [(i + 1, f"{a:.17g}") for i, a in enumerate(averages)]
        outputs.append(_write_csv(out / "examples_stream.csv",
                                  ("block", "running_average"), rows))
        from . import plots
        outputs.append(plots.save_stream(out / "examples_stream.png",
                                         averages, model.eta_star))
        print(f"history stream average after T={args.stream_T}: {stream_avg:.6g} "
              "(beats every stationary policy above)")
    else:
        print("optimal cost 0 is attained by the always-advance policy "
              "prefix=[];tail=constant(1)")

    outputs.append(_write_manifest(out, "examples", {
        "which": args.which, "policy": args.policy, "L": args.L,
        "stream_T": args.stream_T}, outputs, started))
    return 0


def _cmd_simulate(args) -> int:
    started = time.perf_counter()
    cfg = load_config(args.config)
    out = _outdir(args)
    if not isinstance(cfg.model, GroupServerModel):
        raise ConfigError("simulate needs a queue config")
    policy = parse_policy(args.policy).bind(cfg.model)
    sim_cfg = SimConfig(horizon=args.horizon, warmup=args.warmup,
                        seed=args.seed, batches=args.batches)
    estimate = simulate_eta(cfg.model, policy, sim_cfg)
    try:
        analytic = average_cost(cfg.model, policy, args.tol).value
    except _NUMERIC_ERRORS:
        analytic = None

    inside = (analytic is not None
              and estimate.ci_lo <= analytic <= estimate.ci_hi)
    rows = [(b + 1, f"{m:.17g}") for b, m in enumerate(estimate.batch_means)]
    outputs = [_write_csv(out / "simulate_batches.csv",
                          ("batch", "mean"), rows)]
    from . import plots
    outputs.append(plots.save_batches(
        out / "simulate_batches.png", list(estimate.batch_means),
        estimate.eta_hat, estimate.ci_lo, estimate.ci_hi, analytic))
    analytic_text = f"{analytic:.12g}" if analytic is not None else "nan"
    print(f"eta_hat={estimate.eta_hat:.12g}, ci_lo={estimate.ci_lo:.12g}, "
          f"ci_hi={estimate.ci_hi:.12g}, analytic={analytic_text}, "
          f"inside={str(inside).lower()}")

    outputs.append(_write_manifest(out, "simulate", {
        "config": str(args.config), "policy": args.policy,
        "horizon": args.horizon, "warmup": args.warmup, "seed": args.seed,
        "batches": args.batches, "tol": args.tol}, outputs, started))
    return 0


def run(argv) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        code = exc.code if isinstance(exc.code, int) else 2
        return 0 if code == 0 else 2
    try:
        return args.func(args)
    except SelfCheckError as exc:
        print(f"self-check failed: {exc}", file=sys.stderr)
        return 4
    except _NUMERIC_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except _CONFIG_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except AvgMdpError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
