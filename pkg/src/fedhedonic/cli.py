"""Command-line front end.

Every stage reads a scenario (from ``--scenario`` or generated on the fly
from ``--n/--dim/--seed``) and writes one artifact into ``--out-dir``.
Exit codes: 0 success, 1 no stable allocation found within the cap,
2 usage error, 3 capacity exceeded.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path
from typing import Any

from . import __version__
from .clustering import optimal_clustering
from .combinatorics import PARTITION_CAP, Partition
from .dynamics import partition_of, run_dynamics
from .errors import CapacityError, ScenarioError
from .gains import build_report, is_superadditive
from .hedonic import ORACLE_CAP, check_nash_stable, mapping_M, phi_from_v
from .lp import duality_gap, verify
from .scenario import GainFnSpec, GenerationKnobs, Scenario, generate_scenario, make_rng
from .stable_set import (
    GENERAL_CAP,
    build_c1,
    find_general_allocation,
    membership_check,
    solve_symmetric_lp,
)

log = logging.getLogger("fedhedonic")

EXIT_OK, EXIT_INFEASIBLE, EXIT_USAGE, EXIT_CAPACITY = 0, 1, 2, 3

STAGE_FILES = {
    "gains": "gains.json",
    "lp": "lp.json",
    "stable-set": "stable-set.json",
    "dynamics": "dynamics.jsonl",
    "oracle": "oracle.json",
    "optimal": "optimal.json",
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:
        raise UsageError(message)


def _dump(obj: Any) -> str:
    return json.dumps(obj, indent=1) + "\n"


def _header(scenario: Scenario) -> dict[str, Any]:
    return {"tool_version": __version__, "scenario_hash": scenario.content_hash(), "seed": scenario.seed}


def _knobs(args: argparse.Namespace) -> GenerationKnobs:
    try:
        return GenerationKnobs(
            evaluator=args.evaluator,
            m_range=(args.m_low, args.m_high),
            p_range=(args.p_low, args.p_high),
            spread=args.spread,
            noise_floor=args.noise_floor,
            mae_weight=args.mae_weight,
            gain_fn=GainFnSpec(args.gain_kind, args.alpha),
            cost_per_agent=args.cost,
            fallback_loss=args.fallback_loss,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _generate(args: argparse.Namespace) -> Scenario:
    if args.n is None or args.n < 1:
        raise UsageError("--n must be a positive integer")
    if args.dim < 1:
        raise UsageError("--dim must be a positive integer")
    if not 0 <= args.seed < 1 << 64:
        raise UsageError("--seed must be a 64-bit unsigned integer")
    try:
        return generate_scenario(args.n, args.dim, args.seed, _knobs(args))
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _scenario(args: argparse.Namespace, cap: int | None = None, what: str = "") -> Scenario:
    if args.scenario is not None:
        try:
            scenario = Scenario.load(args.scenario)
        except (OSError, ScenarioError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read scenario {args.scenario}: {exc}") from exc
        n = scenario.n
    else:
        n = args.n
        scenario = None
    if cap is not None and n is not None and n > cap:
        raise CapacityError(f"{what} supports n <= {cap}, got n={n}")
    return scenario if scenario is not None else _generate(args)


def _write(args: argparse.Namespace, name: str, text: str) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / name
    path.write_text(text)
    log.info("wrote %s", path)
    return path


def cmd_gen(args: argparse.Namespace) -> int:
    scenario = _generate(args)
    text = scenario.to_json()
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    Path(args.out).write_text(text)
    print(f"{scenario.content_hash()}  {args.out}")
    return EXIT_OK


def cmd_gains(args: argparse.Namespace) -> int:
    scenario = _scenario(args, 16, "gain report")
    report = build_report(scenario)
    ok, witness = is_superadditive(report) if report.n <= 12 else (None, None)
    body = {
        **_header(scenario),
        "report": report.to_dict(),
        "superadditive": ok,
        "superadditive_witness": None if witness is None else [list(c.members) for c in witness],
    }
    _write(args, STAGE_FILES["gains"], _dump(body))
    return EXIT_OK


def _symmetric(scenario: Scenario):
    return solve_symmetric_lp(build_report(scenario))


def cmd_lp(args: argparse.Namespace) -> int:
    scenario = _scenario(args, ORACLE_CAP, "symmetric LP")
    if scenario.n < 2:
        raise UsageError("the symmetric LP needs n >= 2")
    report = build_report(scenario)
    result = solve_symmetric_lp(report)
    sol = result.solution
    body = {
        **_header(scenario),
        "v": result.allocation.to_dict(),
        "objective": result.objective_value,
        "half_grand_delta": float(report.delta[-1]) / 2.0,
        "certified_partition": result.certified_partition.to_lists(),
        "certificate": {
            "verified": verify(result.problem, sol),
            "duality_gap": duality_gap(result.problem, sol),
            "dual": sol.dual.tolist(),
            "pivots": sol.pivots,
        },
    }
    _write(args, STAGE_FILES["lp"], _dump(body))
    _write(args, "lp.constraints.txt", build_c1(report, "symmetric").dumps())
    return EXIT_OK


def cmd_stable_set(args: argparse.Namespace) -> int:
    scenario = _scenario(args, GENERAL_CAP, "general allocation search")
    report = build_report(scenario)
    result = find_general_allocation(report, alpha=scenario.gain_fn.alpha)
    body: dict[str, Any] = {**_header(scenario), "status": result.status, "partitions_tried": result.partitions_tried}
    if result.status == "member_found":
        body.update(
            partition=result.certified_partition.to_lists(),
            objective=result.objective_value,
            membership=membership_check(result.allocation, report),
            certificate_verified=verify(result.problem, result.solution),
            phi=result.allocation.to_dict(),
        )
    _write(args, STAGE_FILES["stable-set"], _dump(body))
    return EXIT_OK if result.status == "member_found" else EXIT_INFEASIBLE


def _start(kind: str, n: int, seed: int) -> tuple[int, ...]:
    if kind == "singletons":
        return tuple(range(n))
    if kind == "grand":
        return (0,) * n
    return tuple(make_rng(seed).integers(0, n, size=n).tolist())


def cmd_dynamics(args: argparse.Namespace) -> int:
    scenario = _scenario(args, ORACLE_CAP, "dynamics")
    if scenario.n < 2:
        raise UsageError("dynamics need n >= 2")
    result = _symmetric(scenario)
    seed = scenario.seed if args.dyn_seed is None else args.dyn_seed
    n = scenario.n
    trace = run_dynamics(
        _start(args.start, n, seed), result.allocation, args.schedule,
        args.max_steps or 10 * n**3, seed,
    )
    head = json.dumps({**_header(scenario), "start": args.start, "dyn_seed": seed})
    terminal = partition_of(trace.terminal)
    extra = {
        "terminal_partition": terminal.to_lists(),
        "terminal_stable": check_nash_stable(terminal, phi_from_v(result.allocation)).stable,
    }
    _write(args, STAGE_FILES["dynamics"], head + "\n" + trace.to_jsonl(extra))
    return EXIT_OK


def cmd_oracle(args: argparse.Namespace) -> int:
    scenario = _scenario(args, ORACLE_CAP, "stability oracle")
    if scenario.n < 2:
        raise UsageError("the oracle needs n >= 2")
    result = _symmetric(scenario)
    stable = mapping_M(phi_from_v(result.allocation))
    body = {
        **_header(scenario),
        "allocation": "symmetric-lp",
        "count": len(stable),
        "stable_partitions": [p.to_lists() for p in stable],
    }
    _write(args, STAGE_FILES["oracle"], _dump(body))
    return EXIT_OK


def cmd_optimal(args: argparse.Namespace) -> int:
    scenario = _scenario(args, ORACLE_CAP, "optimal clustering")
    report = build_report(scenario)
    solution = optimal_clustering(report, args.direction)
    body = {**_header(scenario), **solution.to_dict()}
    if scenario.n >= 2:
        v = solve_symmetric_lp(report).allocation
        body["stable_under_symmetric_lp"] = check_nash_stable(solution.partition, phi_from_v(v)).stable
    _write(args, STAGE_FILES["optimal"], _dump(body))
    return EXIT_OK


def _read_stage(out: Path, stage: str) -> Any:
    path = out / STAGE_FILES[stage]
    if not path.exists():
        raise UsageError(f"missing output of stage '{stage}' ({path}); run `fedhedonic {stage}` first")
    if stage == "dynamics":
        return [json.loads(line) for line in path.read_text().splitlines() if line.strip()]
    return json.loads(path.read_text())


def cmd_report(args: argparse.Namespace) -> int:
    out = Path(args.out_dir)
    stages = {stage: _read_stage(out, stage) for stage in STAGE_FILES}
    dyn = stages["dynamics"]
    header, steps, footer = dyn[0], dyn[1:-1], dyn[-1]
    hashes = {stage: (data[0] if stage == "dynamics" else data)["scenario_hash"] for stage, data in stages.items()}
    if len(set(hashes.values())) != 1:
        raise UsageError(f"stage outputs come from different scenarios: {hashes}")
    oracle = stages["oracle"]
    terminal = footer["terminal_partition"]
    summary = {
        "tool_version": __version__,
        "scenario_hash": header["scenario_hash"],
        "seed": header["seed"],
        "gains": {"n": stages["gains"]["report"]["n"], "superadditive": stages["gains"]["superadditive"]},
        "lp": {k: stages["lp"][k] for k in ("objective", "half_grand_delta", "certified_partition")}
        | {"certificate_verified": stages["lp"]["certificate"]["verified"]},
        "stable_set": {k: stages["stable-set"].get(k) for k in ("status", "partition", "objective", "membership")},
        "dynamics": {
            "converged": footer["converged"],
            "steps": len(steps),
            "rounds": footer["rounds"],
            "final_potential": footer["final_potential"],
            "terminal_partition": terminal,
            "terminal_in_oracle": terminal in oracle["stable_partitions"],
        },
        "oracle": {"count": oracle["count"]},
        "optimal": {k: stages["optimal"][k] for k in ("partition", "objective", "feasible_count", "direction")},
    }
    _write(args, "report.json", _dump(summary))
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(["step", "deviator", "potential", "gain_delta"])
    initial = steps[0]["potential_before"] if steps else footer["final_potential"]
    writer.writerow([0, "", repr(initial), ""])
    for s in steps:
        writer.writerow([s["step"] + 1, s["deviator"], repr(s["potential_after"]), repr(s["gain_after"] - s["gain_before"])])
    _write(args, "potential.csv", buf.getvalue())
    return EXIT_OK


def _add_scenario_args(p: argparse.ArgumentParser, required_n: bool = False) -> None:
    p.add_argument("--n", type=int, required=required_n, help="agent count (generated scenario)")
    p.add_argument("--dim", type=int, default=2, help="parameter dimension M")
    p.add_argument("--seed", type=int, default=0, help="64-bit generation seed")
    p.add_argument("--evaluator", choices=("quadratic", "regression"), default="quadratic")
    p.add_argument("--m-low", type=int, default=10)
    p.add_argument("--m-high", type=int, default=100)
    p.add_argument("--p-low", type=float, default=0.8)
    p.add_argument("--p-high", type=float, default=1.0)
    p.add_argument("--spread", type=float, default=2.0)
    p.add_argument("--noise-floor", type=float, default=0.01)
    p.add_argument("--mae-weight", type=float, default=0.5)
    p.add_argument("--gain-kind", choices=("linear", "log"), default="linear")
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--cost", type=float, default=0.05, help="communication cost per agent")
    p.add_argument("--fallback-loss", type=float, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="fedhedonic",
        description=(
            "Nash-stable gain allocation for federated-learning coalitions. "
            f"Caps: partitions n <= {PARTITION_CAP}, stability oracle n <= {ORACLE_CAP}, "
            f"general allocation search n <= {GENERAL_CAP}."
        ),
    )
    parser.add_argument("-v", "--verbose", action="count", default=0)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    gen = sub.add_parser("gen", help="generate a scenario file")
    _add_scenario_args(gen, required_n=True)
    gen.add_argument("--out", default="scenario.json")
    gen.set_defaults(func=cmd_gen)

    for name, func, doc in [
        ("gains", cmd_gains, "coalition gains, prices and marginal gains"),
        ("lp", cmd_lp, "symmetric mutual-gain LP with certificate"),
        ("stable-set", cmd_stable_set, "general Nash-stable allocation search"),
        ("dynamics", cmd_dynamics, "best-reply dynamics on the LP mutual gains"),
        ("oracle", cmd_oracle, "all Nash-stable partitions under the LP mutual gains"),
        ("optimal", cmd_optimal, "optimal clustering by exhaustive search"),
    ]:
        p = sub.add_parser(name, help=doc)
        p.add_argument("--scenario", help="scenario JSON (otherwise generated from --n)")
        _add_scenario_args(p)
        p.add_argument("--out-dir", default=".")
        if name == "dynamics":
            p.add_argument("--schedule", choices=("round_robin", "random"), default="round_robin")
            p.add_argument("--start", choices=("singletons", "grand", "random"), default="singletons")
            p.add_argument("--dyn-seed", type=int, default=None, help="override the scenario seed")
            p.add_argument("--max-steps", type=int, default=None)
        if name == "optimal":
            p.add_argument("--direction", choices=("min", "max"), default="min")
        p.set_defaults(func=func)

    rep = sub.add_parser("report", help="merge stage outputs into report.json and potential.csv")
    rep.add_argument("--out-dir", default=".")
    rep.set_defaults(func=cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        level = logging.WARNING - 10 * min(args.verbose, 2)
        logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
        if getattr(args, "scenario", None) is None and args.command not in ("gen", "report") and args.n is None:
            raise UsageError("either --scenario or --n is required")
        return args.func(args)
    except UsageError as exc:
        print(f"fedhedonic: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except CapacityError as exc:
        print(f"fedhedonic: capacity: {exc}", file=sys.stderr)
        return EXIT_CAPACITY


if __name__ == "__main__":
    sys.exit(main())
