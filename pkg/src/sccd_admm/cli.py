"""Command line entry points.

Each subcommand materializes one studied dataset family as CSV artifacts:

  run           generic grid driven by a config file
  fig3          l2 convergence cells, co_rat in {0.1, 0.6, 1.2}
  fig4          l1 convergence cells, same co_rat grid
  fig5          cost-vs-co_rat sweep over [0, 2.4], search stepsizes 1..3
  connectivity  the fig5 sweep at graph densities p in {0.1, 0.5, 0.9}
  table1        iterations vs network size N in {10, 30, 60, 100}
  delays        synchronous delay totals at co_rat in {0.1, 0.7, 1.4, 2.1}
  verify        property suites and numerical hygiene, nonzero exit on red

Plotting stays out of process: consumers read the emitted CSVs.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .accounting import per_value_slot_seconds
from .harness import ExperimentSpec, load_config, run_experiment

__all__ = ["main", "build_parser"]

_SWEEP_CO_RATS = tuple(round(0.2 * i, 1) for i in range(13))  # 0.0 .. 2.4
_DELAY_CO_RATS = (0.1, 0.7, 1.4, 2.1)
_DELAY_RATES_MBPS = (54.0, 11.0)
_TABLE1_SIZES = ((10, 60), (30, 20), (60, 10), (100, 6))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sccd-admm",
        description="Decentralized consensus ADMM experiment runner.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, doc in (
        ("run", "run the grid described by --config"),
        ("fig3", "l2 convergence traces per co_rat"),
        ("fig4", "l1 convergence traces per co_rat"),
        ("fig5", "cost sweep over co_rat and search stepsize"),
        ("connectivity", "cost sweep per graph density"),
        ("table1", "iterations to convergence per network size"),
        ("delays", "synchronous delay totals per co_rat and link rate"),
        ("verify", "run property suites; exit nonzero on failure"),
    ):
        cmd = sub.add_parser(name, help=doc)
        cmd.add_argument("--config", help="config file overriding defaults")
        cmd.add_argument("--seed", type=int, help="master seed")
        cmd.add_argument("--out", help="artifact directory")
        cmd.add_argument("--topology-file", help="edge-list file; skips the random graph")
        cmd.add_argument("--repetitions", type=int, help="repetitions per cell")
        cmd.add_argument("--jobs", type=int, default=1, help="parallel workers")
    return parser


def _resolve_spec(args, base: ExperimentSpec) -> ExperimentSpec:
    spec = load_config(args.config, base=base) if args.config else base
    if args.seed is not None:
        spec.master_seed = args.seed
    if args.out is not None:
        spec.out_dir = args.out
    if args.topology_file is not None:
        spec.topology_file = args.topology_file
    if args.repetitions is not None:
        spec.repetitions = args.repetitions
    return spec


def _report(result: dict) -> int:
    print(f"artifacts: {result['out_dir']}")
    for row in result["aggregates"]:
        scenario, variant, co_rat, stepsize = row[0], row[1], row[2], row[3]
        reps, converged, iters = row[6], row[7], row[8]
        total = row[12]
        print(
            f"  {scenario} {variant} co_rat={co_rat:g} stepsize={stepsize}: "
            f"converged {converged}/{reps}, iterations {iters:.1f}, "
            f"total cost {total:.1f}"
        )
    for cell, rep, msg in result["errors"]:
        print(f"  ERROR {cell} rep={rep}: {msg}", file=sys.stderr)
    return 1 if result["errors"] else 0


def _cmd_run(args) -> int:
    spec = _resolve_spec(args, ExperimentSpec(name="run", out_dir="artifacts/run"))
    return _report(run_experiment(spec, jobs=args.jobs))


def _cmd_fig3(args) -> int:
    base = ExperimentSpec(name="fig3", out_dir="artifacts/fig3")
    return _report(run_experiment(_resolve_spec(args, base), jobs=args.jobs))


def _cmd_fig4(args) -> int:
    base = ExperimentSpec(name="fig4", scenario="l1", out_dir="artifacts/fig4")
    return _report(run_experiment(_resolve_spec(args, base), jobs=args.jobs))


def _cmd_fig5(args) -> int:
    base = ExperimentSpec(
        name="fig5",
        variants=("sccd",),
        co_rats=_SWEEP_CO_RATS,
        stepsizes=(1, 2, 3),
        repetitions=100,
        out_dir="artifacts/fig5",
    )
    spec = _resolve_spec(args, base)
    rc = 0
    out_root = Path(spec.out_dir)
    sccd = _clone(spec, name="fig5_sccd", out_dir=str(out_root / "sccd"))
    rc |= _report(run_experiment(sccd, jobs=args.jobs))
    dadmm = _clone(
        spec,
        name="fig5_dadmm",
        variants=("dadmm",),
        stepsizes=(2,),
        out_dir=str(out_root / "dadmm"),
    )
    rc |= _report(run_experiment(dadmm, jobs=args.jobs))
    return rc


def _cmd_connectivity(args) -> int:
    base = ExperimentSpec(
        name="connectivity",
        co_rats=_SWEEP_CO_RATS,
        repetitions=100,
        out_dir="artifacts/connectivity",
    )
    spec = _resolve_spec(args, base)
    rc = 0
    for p in (0.1, 0.5, 0.9):
        sub = _clone(
            spec,
            name=f"connectivity_p{p:g}",
            p=p,
            out_dir=str(Path(spec.out_dir) / f"p{p:g}"),
        )
        rc |= _report(run_experiment(sub, jobs=args.jobs))
    return rc


def _cmd_table1(args) -> int:
    base = ExperimentSpec(
        name="table1",
        co_rats=(0.3,),
        repetitions=50,
        out_dir="artifacts/table1",
    )
    spec = _resolve_spec(args, base)
    rc = 0
    table_rows = []
    for n, m in _TABLE1_SIZES:
        sub = _clone(
            spec,
            name=f"table1_n{n}",
            n=n,
            samples_per_node=m,
            out_dir=str(Path(spec.out_dir) / f"n{n}"),
        )
        result = run_experiment(sub, jobs=args.jobs)
        rc |= _report(result)
        for row in result["aggregates"]:
            table_rows.append(
                {
                    "variant": row[1],
                    "n": n,
                    "m": m,
                    "iterations_mean": row[8],
                    "iterations_std": row[9],
                    "converged": row[7],
                    "repetitions": row[6],
                }
            )
    table_path = Path(spec.out_dir) / "table1.csv"
    table_path.parent.mkdir(parents=True, exist_ok=True)
    with open(table_path, "w") as fh:
        fh.write("variant,n,m,iterations_mean,iterations_std,converged,repetitions\n")
        for r in sorted(table_rows, key=lambda r: (r["variant"], r["n"])):
            fh.write(
                f"{r['variant']},{r['n']},{r['m']},{r['iterations_mean']!r},"
                f"{r['iterations_std']!r},{r['converged']},{r['repetitions']}\n"
            )
    print(f"table: {table_path}")
    return rc


def _cmd_delays(args) -> int:
    base = ExperimentSpec(
        name="delays",
        co_rats=_DELAY_CO_RATS,
        out_dir="artifacts/delays",
    )
    spec = _resolve_spec(args, base)
    result = run_experiment(spec, jobs=args.jobs)
    rc = _report(result)
    # summary delays are priced at the grid's own link rate; re-price per
    # studied rate (comm scales with tau, abstract compute units do not)
    tau_base = spec.tau
    rows = []
    for row in result["aggregates"]:
        for rate in _DELAY_RATES_MBPS:
            tau = per_value_slot_seconds(spec.dim, rate * 1e6)
            comm = row[14] * (tau / tau_base)
            comp = row[15]
            rows.append(
                (rate, row[1], row[2], repr(comm), repr(comp), repr(comm + comp))
            )
    delays_path = Path(spec.out_dir) / "delays.csv"
    with open(delays_path, "w") as fh:
        fh.write(
            "rate_mbps,variant,co_rat,comm_delay_mean,comp_delay_mean,"
            "total_delay_mean\n"
        )
        for r in sorted(rows):
            fh.write(",".join(str(v) for v in r) + "\n")
    print(f"delays: {delays_path}")
    return rc


def _cmd_verify(args) -> int:
    from .verify import run_all

    seed = args.seed if args.seed is not None else 0
    report = run_all(seed=seed)
    for check in report["checks"]:
        status = "pass" if check["passed"] else "FAIL"
        print(f"[{status}] {check['name']}: {check['detail']}")
    out_dir = Path(args.out) if args.out else Path("artifacts")
    out_dir.mkdir(parents=True, exist_ok=True)
    report_path = out_dir / "verify_report.json"
    with open(report_path, "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
    print(f"report: {report_path}")
    print("verify:", "pass" if report["passed"] else "FAIL")
    return 0 if report["passed"] else 1


def _clone(spec: ExperimentSpec, **overrides) -> ExperimentSpec:
    kw = dict(spec.__dict__)
    kw.update(overrides)
    return ExperimentSpec(**kw)


_DISPATCH = {
    "run": _cmd_run,
    "fig3": _cmd_fig3,
    "fig4": _cmd_fig4,
    "fig5": _cmd_fig5,
    "connectivity": _cmd_connectivity,
    "table1": _cmd_table1,
    "delays": _cmd_delays,
    "verify": _cmd_verify,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return _DISPATCH[args.command](args)


if __name__ == "__main__":
    raise SystemExit(main())
