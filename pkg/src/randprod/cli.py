"""Command line front end: ``randprod analyze|simulate|verify|list-scenarios``.

Exit codes: analyze returns 0 on Converges/Diverges and 2 on Inconclusive;
verify returns 0 on AGREE, 2 on UNDECIDED and 3 on DISAGREE; any config
problem returns 1 with a message naming the offending field.
"""
import argparse
import json
import sys
from pathlib import Path

from . import scenarios, simulator
from .three_series import Status, evaluate

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_UNDECIDED = 2
EXIT_DISAGREE = 3
SIM_DECISIVE = 0.05


def _dump(obj, path):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def run_analysis(cfg):
    report = evaluate(cfg.sequence, cfg.chart, cfg.series_policy())
    doc = {"command": "analyze", "config": cfg.resolved(), "report": report.as_dict()}
    return report, doc


def run_simulation(cfg, trace_path=None):
    p = cfg.policy
    traces = simulator.simulate_paths(
        cfg.sequence, p["horizon"], p["paths"], p["seed"], m_star=cfg.m_star, workers=p["workers"]
    )
    verdict = simulator.as_convergence_test(traces, p["eps"], cfg.m_star)
    if trace_path is not None:
        trace_path.parent.mkdir(parents=True, exist_ok=True)
        simulator.write_traces(traces, trace_path)
    doc = {
        "command": "simulate",
        "config": cfg.resolved(),
        "verdict": verdict.as_dict(),
        "trace_columns": simulator.TRACE_HEADER_DOC,
    }
    return verdict, doc


def empirical_status(fraction):
    if fraction >= 1.0 - SIM_DECISIVE:
        return Status.CONVERGES
    if fraction <= SIM_DECISIVE:
        return Status.DIVERGES
    return None


def agreement(analyzer, fraction):
    if analyzer is Status.INCONCLUSIVE:
        return "UNDECIDED"
    empirical = empirical_status(fraction)
    if empirical is None:
        return "UNDECIDED"
    return "AGREE" if empirical is analyzer else "DISAGREE"


def _load(args):
    if args.config and args.scenario:
        raise scenarios.ConfigError("arguments", "give --config or --scenario, not both")
    if args.config:
        cfg = scenarios.load(args.config)
    elif args.scenario:
        cfg = scenarios.builtin(args.scenario)
    else:
        raise scenarios.ConfigError("arguments", "one of --config or --scenario is required")
    return cfg.with_overrides(seed=args.seed, paths=args.paths, horizon=args.horizon)


def cmd_analyze(args, out=None):
    cfg = _load(args)
    report, doc = run_analysis(cfg)
    _dump(doc, Path(args.out) / f"{cfg.name}.analyze.json")
    print(
        f"{cfg.name}: overall {report.overall.value} "
        f"(G1 {report.g1.status.value}, G2 {report.g2.status.value}, G3 {report.g3.status.value})",
        file=out or sys.stdout,
    )
    return EXIT_UNDECIDED if report.overall is Status.INCONCLUSIVE else EXIT_OK


def cmd_simulate(args, out=None):
    cfg = _load(args)
    verdict, doc = run_simulation(cfg, Path(args.out) / f"{cfg.name}.traces.csv")
    _dump(doc, Path(args.out) / f"{cfg.name}.simulate.json")
    print(f"{cfg.name}: converged_fraction {verdict.converged_fraction:.6g}", file=out or sys.stdout)
    return EXIT_OK


def cmd_verify(args, out=None):
    cfg = _load(args)
    report, analysis = run_analysis(cfg)
    verdict, simulation = run_simulation(cfg)
    result = agreement(report.overall, verdict.converged_fraction)
    doc = {
        "command": "verify",
        "config": cfg.resolved(),
        "analyzer_overall": report.overall.value,
        "converged_fraction": verdict.converged_fraction,
        "result": result,
        "report": analysis["report"],
        "verdict": simulation["verdict"],
    }
    _dump(doc, Path(args.out) / f"{cfg.name}.verify.json")
    print(
        f"{cfg.name}: {result} (analyzer {report.overall.value}, "
        f"converged_fraction {verdict.converged_fraction:.6g})",
        file=out or sys.stdout,
    )
    return {"AGREE": EXIT_OK, "UNDECIDED": EXIT_UNDECIDED}.get(result, EXIT_DISAGREE)


def cmd_list(args, out=None):
    for name in scenarios.builtin_names():
        cfg = scenarios.builtin(name)
        print(f"{name:26s} expected {cfg.expected or '?':10s} {cfg.description}", file=out or sys.stdout)
    return EXIT_OK


COMMANDS = {
    "analyze": cmd_analyze,
    "simulate": cmd_simulate,
    "verify": cmd_verify,
    "list-scenarios": cmd_list,
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="randprod", description="Almost-sure convergence of products of independent random matrices."
    )
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", metavar="PATH", help="scenario TOML file")
    parser.add_argument("--scenario", metavar="NAME", help="built-in scenario (see list-scenarios)")
    parser.add_argument("--seed", type=int, help="override policy.seed")
    parser.add_argument("--out", metavar="DIR", default="randprod-out", help="report directory")
    parser.add_argument("--paths", type=int, help="override policy.paths")
    parser.add_argument("--horizon", type=int, help="override policy.horizon (N)")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except scenarios.ConfigError as exc:
        print(f"config error in field '{exc.field}': {exc.message}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
