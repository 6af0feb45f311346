"""Command-line surface tying simulation, estimation, and testing together.

Every command is fully determined by its flags plus --seed; identical
invocations produce byte-identical artifacts. Artifacts are self-describing:
JSON outputs embed the resolved config, CSV traces carry a `#` header, and
event logs get a sidecar `<stem>.meta.json`.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import eventlog
from .estimation import (
    EstimationConfig,
    fit_linear_loss,
    fit_mle,
)
from .hypotest import UntestableLogError, cohort_summary, llr_statistic
from .inference import BetaPrior
from .policy import EstimatorKind, PolicyConfig
from .simulate import (
    ScenarioGenConfig,
    a1_walk,
    monte_carlo_regret,
    run_softmax_episode,
    sample_scenario,
    write_regret_csv,
)
from .policy import run_episode

ESTIMATORS = {"point": EstimatorKind.POINT_ESTIMATE, "sample": EstimatorKind.POSTERIOR_SAMPLE}


def _dump_json(payload, path) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    Path(path).write_text(text, encoding="utf-8")


def meta_path_for(log_path) -> Path:
    p = Path(log_path)
    stem = p.name[: -len(".jsonl")] if p.name.endswith(".jsonl") else p.name
    return p.with_name(stem + ".meta.json")


def _scenario_payload(scenario) -> dict:
    return {
        "follower_weights": scenario.weights.follower_weights.tolist(),
        "self_weight": scenario.weights.self_weight,
        "q": scenario.q.tolist(),
        "x": scenario.x.tolist(),
        "mu": scenario.mu.tolist(),
        "horizon": scenario.horizon,
    }


def _add_prior_flags(p) -> None:
    p.add_argument("--alpha", type=float, default=3.0, help="Beta prior alpha")
    p.add_argument("--beta", type=float, default=3.0, help="Beta prior beta")


def _add_scenario_flags(p) -> None:
    p.add_argument("--K", type=int, default=10, help="number of topics")
    p.add_argument("--N", type=int, default=10, help="number of followers")
    p.add_argument("--T", type=int, default=1000, help="horizon (steps)")
    p.add_argument("--mu-bar", type=float, default=0.0, help="mean external rate")
    p.add_argument("--gamma", type=float, default=0.8, help="Dirichlet concentration")


def cmd_simulate(args) -> int:
    cfg = ScenarioGenConfig(
        K=args.K, n_followers=args.N, T=args.T, gamma=args.gamma, mu_bar=args.mu_bar
    )
    rng = np.random.default_rng([args.seed, 0])
    scenario = sample_scenario(cfg, rng)
    prior = BetaPrior(args.alpha, args.beta)
    external = args.external == "on"
    if args.policy == "softmax":
        trajectory = run_softmax_episode(
            scenario, args.lam, rng, prior=prior, use_external_feedback=external
        )
    else:
        policy = PolicyConfig(
            estimator=ESTIMATORS[args.estimator],
            prior=prior,
            use_external_feedback=external,
        )
        trajectory = run_episode(scenario, policy, rng)
    log = eventlog.from_trajectory(trajectory, n_topics=args.K)
    eventlog.write_event_log(log, args.out)
    config = {
        "command": "simulate",
        "K": args.K,
        "N": args.N,
        "T": args.T,
        "mu_bar": args.mu_bar,
        "gamma": args.gamma,
        "prior": [args.alpha, args.beta],
        "policy": args.policy,
        "estimator": args.estimator,
        "external": external,
        "lambda": args.lam,
        "seed": args.seed,
    }
    _dump_json(
        {"config": config, "scenario": _scenario_payload(scenario)},
        meta_path_for(args.out),
    )
    print(f"wrote {args.out} ({len(log.events)} events)")
    return 0


def cmd_regret(args) -> int:
    cfg = ScenarioGenConfig(
        K=args.K, n_followers=args.N, T=args.T, gamma=args.gamma, mu_bar=args.mu_bar
    )
    policy = PolicyConfig(
        estimator=ESTIMATORS[args.estimator],
        prior=BetaPrior(args.alpha, args.beta),
        use_external_feedback=args.external == "on",
    )
    trace = monte_carlo_regret(cfg, policy, args.runs, args.seed)
    header = {
        "command": "regret",
        "K": args.K,
        "N": args.N,
        "T": args.T,
        "mu_bar": args.mu_bar,
        "gamma": args.gamma,
        "prior": [args.alpha, args.beta],
        "estimator": args.estimator,
        "external": args.external == "on",
        "runs": args.runs,
        "seed": args.seed,
    }
    write_regret_csv(trace, args.out, header)
    print(f"wrote {args.out} (final mean regret {trace.final()!r})")
    return 0


def _resolve_dims(args, log_path):
    k, n = args.K, args.N
    meta = meta_path_for(log_path)
    if (k is None or n is None) and meta.exists():
        config = json.loads(meta.read_text(encoding="utf-8")).get("config", {})
        k = k if k is not None else config.get("K")
        n = n if n is not None else config.get("N")
    return k, n


def cmd_estimate(args) -> int:
    k, n = _resolve_dims(args, args.log)
    log = eventlog.parse_event_log(args.log, n_topics=k, n_followers=n)
    cfg = EstimationConfig(
        lam=args.lam,
        prior=BetaPrior(args.alpha, args.beta),
        samples_S=args.samples,
        solver=args.solver,
        variant=args.variant,
        max_iters=args.max_iters,
        step_scale=args.step_scale,
        tolerance=args.tolerance,
    )
    rng = np.random.default_rng([args.seed, 1])
    if args.method == "mle":
        result = fit_mle(log, cfg, rng=rng)
    else:
        result = fit_linear_loss(log, cfg, rng=rng)
    config = {
        "command": "estimate",
        "log": str(args.log),
        "method": args.method,
        "solver": args.solver,
        "variant": args.variant,
        "lambda": args.lam,
        "samples": args.samples,
        "prior": [args.alpha, args.beta],
        "max_iters": args.max_iters,
        "step_scale": args.step_scale,
        "tolerance": args.tolerance,
        "K": log.n_topics,
        "N": log.n_followers,
        "seed": args.seed,
    }
    payload = {"config": config, "result": result.to_dict()}
    if args.out:
        _dump_json(payload, args.out)
        print(f"wrote {args.out} (objective {result.objective!r})")
    else:
        print(json.dumps(payload, indent=2, sort_keys=True))
    return 0


def cmd_test(args) -> int:
    cfg = EstimationConfig(lam=args.lam, prior=BetaPrior(args.alpha, args.beta))
    levels = tuple(float(s) for s in args.levels.split(","))
    reports = []
    lines = []
    for i, path in enumerate(args.logs):
        user = Path(path).name
        for suffix in (".jsonl", ".log", ".json"):
            if user.endswith(suffix):
                user = user[: -len(suffix)]
                break
        k, n = _resolve_dims(args, path)
        log = eventlog.parse_event_log(path, n_topics=k, n_followers=n)
        try:
            report = llr_statistic(
                log,
                cfg,
                dof=args.dof,
                user=user,
                levels=levels,
                rng=np.random.default_rng([args.seed, i]),
            )
        except UntestableLogError as exc:
            lines.append({"user": user, "untestable": exc.reason})
            continue
        reports.append(report)
        lines.append(report.to_dict())
    with open(args.out, "w", encoding="utf-8") as fh:
        for line in lines:
            fh.write(json.dumps(line, sort_keys=True) + "\n")
    config = {
        "command": "test",
        "lambda": args.lam,
        "prior": [args.alpha, args.beta],
        "dof": args.dof,
        "levels": list(levels),
        "logs": [str(p) for p in args.logs],
        "seed": args.seed,
    }
    summary_payload = {"config": config}
    if reports:
        summary_payload["summary"] = cohort_summary(reports, levels).to_dict()
    summary_payload["untestable"] = sum(1 for l in lines if "untestable" in l)
    if args.summary:
        _dump_json(summary_payload, args.summary)
    print(f"wrote {args.out} ({len(reports)} tested, {summary_payload['untestable']} untestable)")
    return 0


def cmd_a1_walk(args) -> int:
    prior = BetaPrior(args.alpha, args.beta)
    summary = a1_walk(args.T, args.runs, args.seed, tie_break=args.tie_break, prior=prior)
    if args.out:
        _dump_json(summary, args.out)
    print(
        "mean_t2={mean_t2!r} stderr={stderr_t2!r} mean_t2_over_T={mean_t2_over_T!r}".format(
            **summary
        )
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="feedback-bandit",
        description="Simulate, estimate, and test feedback-driven posting behavior.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="sample a scenario and write one episode's event log")
    _add_scenario_flags(p)
    _add_prior_flags(p)
    p.add_argument("--estimator", choices=ESTIMATORS, default="point")
    p.add_argument("--external", choices=("on", "off"), default="off")
    p.add_argument("--policy", choices=("argmax", "softmax"), default="argmax")
    p.add_argument("--lambda", dest="lam", type=float, default=10.0, help="softmax temperature")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output event log (.jsonl)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("regret", help="Monte Carlo averaged regret trace to CSV")
    _add_scenario_flags(p)
    _add_prior_flags(p)
    p.add_argument("--estimator", choices=ESTIMATORS, default="point")
    p.add_argument("--external", choices=("on", "off"), default="off")
    p.add_argument("--runs", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(func=cmd_regret)

    p = sub.add_parser("estimate", help="fit utility parameters from an event log")
    p.add_argument("--log", required=True)
    p.add_argument("--method", choices=("linear", "mle"), default="linear")
    p.add_argument("--solver", choices=("subgradient", "lp"), default="subgradient")
    p.add_argument("--variant", choices=("point", "sample"), default="point")
    p.add_argument("--lambda", dest="lam", type=float, default=10.0)
    p.add_argument("--samples", type=int, default=10, help="posterior draws per step")
    _add_prior_flags(p)
    p.add_argument("--max-iters", type=int, default=2000)
    p.add_argument("--step-scale", type=float, default=1.0)
    p.add_argument("--tolerance", type=float, default=1e-6)
    p.add_argument("--K", type=int, default=None, help="topic count override")
    p.add_argument("--N", type=int, default=None, help="follower count override")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="output JSON path (default: stdout)")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("test", help="LLR test per user log, plus a cohort summary")
    p.add_argument("--logs", nargs="+", required=True)
    p.add_argument("--lambda", dest="lam", type=float, default=10.0)
    _add_prior_flags(p)
    p.add_argument("--dof", type=int, default=None, help="chi-squared dof override")
    p.add_argument("--levels", default="0.01,0.05,0.1")
    p.add_argument("--K", type=int, default=None)
    p.add_argument("--N", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output JSONL report path")
    p.add_argument("--summary", default=None, help="output cohort summary JSON path")
    p.set_defaults(func=cmd_test)

    p = sub.add_parser("a1-walk", help="two-topic walk scenario: mean topic-2 count")
    p.add_argument("--T", type=int, default=1000)
    p.add_argument("--runs", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tie-break", choices=("lowest", "random"), default="lowest")
    _add_prior_flags(p)
    p.add_argument("--out", default=None, help="optional JSON summary path")
    p.set_defaults(func=cmd_a1_walk)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (eventlog.EventLogError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
