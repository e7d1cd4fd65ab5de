"""Experiment orchestration: cells, repetitions, CSV artifacts.

An experiment is a grid of cells (variant, stepsize, co_rat) sharing one
topology, run for ``repetitions`` independently drawn datasets. The topology
is fixed for the whole experiment while data is redrawn per repetition, so
repetition seeds derive from the master seed and the repetition index only;
adding repetitions never perturbs earlier ones. Workers rebuild graph and
data from those seeds, and the parent alone writes files (in task order), so
trace and summary CSVs are byte-identical regardless of the worker count.

Artifacts per experiment directory:
  - ``trace_*.csv``   one per (cell, repetition), per-round metrics/costs
  - ``summary.csv``   one row per (cell, repetition)
  - ``aggregate.csv`` one row per cell, mean/std over repetitions
  - ``obj_star_cache.json`` centralized optima keyed by dataset hash
  - ``config.ini``    the resolved experiment configuration
"""

from __future__ import annotations

import configparser
import csv
import hashlib
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .accounting import per_value_slot_seconds
from .engine import RunConfig, run
from .problem import centralized_reference, dataset_hash, synthesize
from .topology import Graph, generate_erdos_renyi, laplacian_lambda_max, load_edge_list

__all__ = [
    "SCHEMA_VERSION",
    "TRACE_COLUMNS",
    "SUMMARY_COLUMNS",
    "AGGREGATE_COLUMNS",
    "ExperimentSpec",
    "derive_seed",
    "default_c",
    "resolve_lambda",
    "experiment_graph",
    "run_experiment",
    "load_config",
    "save_config",
    "read_csv_rows",
]

SCHEMA_VERSION = "1"

TRACE_COLUMNS = (
    "round",
    "acc",
    "cserr",
    "mean_num",
    "comm_cost_round",
    "comp_cost_round",
    "comm_cum",
    "comp_cum",
    "eta_warning",
)

SUMMARY_COLUMNS = (
    "scenario",
    "variant",
    "co_rat",
    "stepsize",
    "n",
    "p",
    "iterations",
    "comm_total",
    "comp_total",
    "total_cost",
    "comm_delay",
    "comp_delay",
    "total_delay",
    "seed",
)

AGGREGATE_COLUMNS = (
    "scenario",
    "variant",
    "co_rat",
    "stepsize",
    "n",
    "p",
    "repetitions",
    "converged",
    "iterations_mean",
    "iterations_std",
    "comm_total_mean",
    "comp_total_mean",
    "total_cost_mean",
    "total_cost_std",
    "comm_delay_mean",
    "comp_delay_mean",
    "total_delay_mean",
    "final_mean_num_mean",
)

# default penalty per (scenario, variant): the studied settings pair small
# co_rat with the larger c and switch to the smaller one from co_rat = 1.
_C_LOW_HIGH = {
    ("l2", "sccd"): (0.3, 0.2),
    ("l2", "dsccd"): (0.3, 0.2),
    ("l2", "dadmm"): (0.3, 0.3),
    ("l1", "sccd"): (0.007, 0.005),
    ("l1", "dsccd"): (0.007, 0.005),
    ("l1", "dadmm"): (0.006, 0.006),
}

_FISTA_BETA = 0.1


def derive_seed(master_seed: int, *parts) -> int:
    """Stable across processes and sessions; never use builtin hash here."""
    text = ":".join([str(int(master_seed))] + [str(p) for p in parts])
    digest = hashlib.blake2b(text.encode(), digest_size=8).digest()
    return int.from_bytes(digest, "big")


def default_c(scenario: str, variant: str, co_rat: float) -> float:
    low, high = _C_LOW_HIGH[(scenario, variant)]
    return high if co_rat >= 1.0 else low


def resolve_lambda(scenario: str, n: int, lam: float | None) -> float:
    """Scenario default regularizer weight.

    The l1 x-update shrinks with threshold beta * rho / n, which prices the
    pooled objective's l1 term at beta; lam must match it for acc to measure
    the same objective the nodes optimize.
    """
    if lam is not None:
        return lam
    return 0.4 if scenario == "l2" else _FISTA_BETA / n


@dataclass
class ExperimentSpec:
    """One experiment grid plus everything needed to reproduce it."""

    name: str = "run"
    scenario: str = "l2"
    n: int = 30
    p: float = 0.5
    dim: int = 100
    samples_per_node: int = 20
    variants: tuple[str, ...] = ("sccd", "dadmm")
    co_rats: tuple[float, ...] = (0.1, 0.6, 1.2)
    stepsizes: tuple[int, ...] = (2,)
    c_overrides: dict = field(default_factory=dict)  # (variant, co_rat) -> c
    lam: float | None = None
    d_prox: float = 0.3
    repetitions: int = 20
    master_seed: int = 0
    out_dir: str = "artifacts"
    topology_file: str | None = None
    max_iters: int = 5000
    acc_threshold: float = 0.1
    cserr_threshold: float = 0.1
    c_cmp: float = 1.0
    comm_rate_bits: float = 54e6

    def __post_init__(self):
        if self.scenario not in ("l2", "l1"):
            raise ValueError(f"unknown scenario {self.scenario!r}")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        if not self.variants or not self.co_rats or not self.stepsizes:
            raise ValueError("variants, co_rats and stepsizes must be non-empty")
        for cell in self.cells():
            if self.cell_c(cell[0], cell[2]) <= 0.0:
                raise ValueError(f"nonpositive c for cell {cell}")

    def cells(self) -> list[tuple[str, int, float]]:
        return [
            (variant, stepsize, co_rat)
            for variant in self.variants
            for stepsize in self.stepsizes
            for co_rat in self.co_rats
        ]

    def cell_c(self, variant: str, co_rat: float) -> float:
        key = (variant, float(co_rat))
        if key in self.c_overrides:
            return float(self.c_overrides[key])
        return default_c(self.scenario, variant, co_rat)

    def rep_seed(self, rep: int) -> int:
        return derive_seed(self.master_seed, "rep", rep)

    @property
    def tau(self) -> float:
        return per_value_slot_seconds(self.dim, self.comm_rate_bits)


def experiment_graph(spec: ExperimentSpec) -> Graph:
    if spec.topology_file is not None:
        return load_edge_list(spec.topology_file)
    return generate_erdos_renyi(
        spec.n, spec.p, seed=derive_seed(spec.master_seed, "graph")
    )


def _fmt(value) -> str:
    """CSV cell text: shortest float form that round-trips exactly."""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_csv(path: Path, columns: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def read_csv_rows(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _trace_name(spec: ExperimentSpec, cell, rep: int) -> str:
    variant, stepsize, co_rat = cell
    return (
        f"trace_{spec.name}_{spec.scenario}_{variant}"
        f"_s{stepsize}_co{co_rat:g}_rep{rep}.csv"
    )


def _run_cell_task(payload: dict) -> dict:
    """Worker body: rebuild inputs from seeds, run one repetition."""
    spec = ExperimentSpec(**payload["spec"])
    variant, stepsize, co_rat = payload["cell"]
    rep_seed = spec.rep_seed(payload["rep"])
    graph = experiment_graph(spec)
    dataset = synthesize(
        graph.n,
        spec.dim,
        spec.samples_per_node,
        spec.scenario,
        seed=rep_seed,
        lam=resolve_lambda(spec.scenario, graph.n, spec.lam),
    )
    cfg = RunConfig(
        variant=variant,
        c=spec.cell_c(variant, co_rat),
        d_prox=spec.d_prox,
        c_cmp=spec.c_cmp,
        co_rat=co_rat,
        stepsize=stepsize,
        acc_threshold=spec.acc_threshold,
        cserr_threshold=spec.cserr_threshold,
        max_iters=spec.max_iters,
        master_seed=rep_seed,
    )
    try:
        result = run(
            graph,
            dataset,
            cfg,
            obj_star=payload["obj_star"],
            lambda_max=payload["lambda_max"],
            collect_attempts=False,
        )
    except Exception as exc:  # recorded per repetition, batch continues
        return {"cell": payload["cell"], "rep": payload["rep"], "error": repr(exc)}
    return {
        "cell": payload["cell"],
        "rep": payload["rep"],
        "seed": rep_seed,
        "iterations": result.iterations,
        "converged": result.converged,
        "acc": result.acc.tolist(),
        "cserr": result.cserr.tolist(),
        "mean_num": result.mean_num.tolist(),
        "comm_round": result.comm_round.tolist(),
        "comp_round": result.comp_round.tolist(),
        "eta_warnings": result.eta_warnings.astype(int).tolist(),
        "max_num_round": [int(np.max(v)) for v in result.nums_per_round],
        "max_s_round": [int(np.max(v)) for v in result.s_per_round],
        "final_mean_num": float(result.mean_num[-1]),
    }


def _trace_rows(out: dict):
    comm_cum = comp_cum = 0.0
    for idx in range(out["iterations"]):
        comm_cum += out["comm_round"][idx]
        comp_cum += out["comp_round"][idx]
        yield (
            idx + 1,
            out["acc"][idx],
            out["cserr"][idx],
            out["mean_num"][idx],
            out["comm_round"][idx],
            out["comp_round"][idx],
            comm_cum,
            comp_cum,
            out["eta_warnings"][idx],
        )


def _summary_row(spec: ExperimentSpec, cell, out: dict) -> tuple:
    variant, stepsize, co_rat = cell
    comm_delay = spec.tau * math.fsum(out["max_num_round"])
    comp_delay = float(math.fsum(s + 1 for s in out["max_s_round"]))
    return (
        spec.scenario,
        variant,
        float(co_rat),
        stepsize,
        spec.n,
        float(spec.p),
        out["iterations"],
        float(math.fsum(out["comm_round"])),
        float(math.fsum(out["comp_round"])),
        float(math.fsum(out["comm_round"]) + math.fsum(out["comp_round"])),
        comm_delay,
        comp_delay,
        comm_delay + comp_delay,
        out["seed"],
    )


def _aggregate_row(spec: ExperimentSpec, cell, outs: list[dict]) -> tuple:
    variant, stepsize, co_rat = cell
    rows = [_summary_row(spec, cell, out) for out in outs]
    iters = np.array([r[6] for r in rows], dtype=float)
    comm = np.array([r[7] for r in rows])
    comp = np.array([r[8] for r in rows])
    total = np.array([r[9] for r in rows])
    comm_d = np.array([r[10] for r in rows])
    comp_d = np.array([r[11] for r in rows])
    total_d = np.array([r[12] for r in rows])
    return (
        spec.scenario,
        variant,
        float(co_rat),
        stepsize,
        spec.n,
        float(spec.p),
        len(outs),
        sum(int(out["converged"]) for out in outs),
        float(iters.mean()),
        float(iters.std()),
        float(comm.mean()),
        float(comp.mean()),
        float(total.mean()),
        float(total.std()),
        float(comm_d.mean()),
        float(comp_d.mean()),
        float(total_d.mean()),
        float(np.mean([out["final_mean_num"] for out in outs])),
    )


def _load_obj_star_cache(path: Path) -> dict:
    if path.exists():
        with open(path) as fh:
            return json.load(fh)
    return {}


def run_experiment(spec: ExperimentSpec, jobs: int = 1) -> dict:
    """Run the full grid and write artifacts; returns paths and aggregates."""
    out_dir = Path(spec.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    save_config(spec, out_dir / "config.ini")

    graph = experiment_graph(spec)
    if spec.topology_file is not None and graph.n != spec.n:
        spec.n = graph.n
    lambda_max = laplacian_lambda_max(graph)

    # centralized optima, one per repetition dataset, cached across runs
    cache_path = out_dir / "obj_star_cache.json"
    cache = _load_obj_star_cache(cache_path)
    obj_stars = []
    dirty = False
    for rep in range(spec.repetitions):
        dataset = synthesize(
            graph.n,
            spec.dim,
            spec.samples_per_node,
            spec.scenario,
            seed=spec.rep_seed(rep),
            lam=resolve_lambda(spec.scenario, graph.n, spec.lam),
        )
        key = dataset_hash(dataset)
        if key not in cache:
            _, obj_star = centralized_reference(dataset)
            cache[key] = obj_star
            dirty = True
        obj_stars.append(cache[key])
    if dirty:
        with open(cache_path, "w") as fh:
            json.dump(cache, fh, indent=0, sort_keys=True)

    spec_payload = asdict(spec)
    tasks = [
        {
            "spec": spec_payload,
            "cell": cell,
            "rep": rep,
            "obj_star": obj_stars[rep],
            "lambda_max": lambda_max,
        }
        for cell in spec.cells()
        for rep in range(spec.repetitions)
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outs = list(pool.map(_run_cell_task, tasks))
    else:
        outs = [_run_cell_task(t) for t in tasks]

    errors = []
    summary_rows = []
    by_cell: dict[tuple, list[dict]] = {cell: [] for cell in spec.cells()}
    for task, out in zip(tasks, outs):
        cell, rep = task["cell"], task["rep"]
        if "error" in out:
            errors.append((cell, rep, out["error"]))
            continue
        _write_csv(
            out_dir / _trace_name(spec, cell, rep), TRACE_COLUMNS, _trace_rows(out)
        )
        summary_rows.append(_summary_row(spec, cell, out))
        by_cell[cell].append(out)

    _write_csv(out_dir / "summary.csv", SUMMARY_COLUMNS, summary_rows)
    aggregate_rows = [
        _aggregate_row(spec, cell, outs_) for cell, outs_ in by_cell.items() if outs_
    ]
    _write_csv(out_dir / "aggregate.csv", AGGREGATE_COLUMNS, aggregate_rows)
    if errors:
        with open(out_dir / "errors.log", "w") as fh:
            for cell, rep, msg in errors:
                fh.write(f"{cell} rep={rep}: {msg}\n")

    return {
        "out_dir": str(out_dir),
        "summary": str(out_dir / "summary.csv"),
        "aggregate": str(out_dir / "aggregate.csv"),
        "aggregates": aggregate_rows,
        "errors": errors,
    }


# ---------------------------------------------------------------------------
# configuration files


def save_config(spec: ExperimentSpec, path) -> None:
    parser = configparser.ConfigParser()
    parser["experiment"] = {
        "spec_version": SCHEMA_VERSION,
        "name": spec.name,
        "scenario": spec.scenario,
        "repetitions": str(spec.repetitions),
        "master_seed": str(spec.master_seed),
        "out_dir": spec.out_dir,
        "max_iters": str(spec.max_iters),
    }
    parser["graph"] = {"n": str(spec.n), "p": repr(spec.p)}
    if spec.topology_file is not None:
        parser["graph"]["topology_file"] = spec.topology_file
    parser["dataset"] = {
        "dim": str(spec.dim),
        "samples_per_node": str(spec.samples_per_node),
    }
    if spec.lam is not None:
        parser["dataset"]["lam"] = repr(spec.lam)
    parser["runs"] = {
        "variants": ",".join(spec.variants),
        "co_rats": ",".join(repr(v) for v in spec.co_rats),
        "stepsizes": ",".join(str(v) for v in spec.stepsizes),
        "d_prox": repr(spec.d_prox),
        "acc_threshold": repr(spec.acc_threshold),
        "cserr_threshold": repr(spec.cserr_threshold),
    }
    parser["costs"] = {
        "c_cmp": repr(spec.c_cmp),
        "comm_rate_bits": repr(spec.comm_rate_bits),
    }
    if spec.c_overrides:
        parser["c"] = {
            f"{variant}@{co_rat:g}": repr(c)
            for (variant, co_rat), c in sorted(spec.c_overrides.items())
        }
    with open(path, "w") as fh:
        parser.write(fh)


def load_config(path, base: ExperimentSpec | None = None) -> ExperimentSpec:
    """Build a spec from a config file, defaulting absent keys from ``base``."""
    parser = configparser.ConfigParser()
    if not parser.read(path):
        raise FileNotFoundError(path)
    version = parser.get("experiment", "spec_version", fallback=SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ValueError(f"unsupported spec_version {version!r}")
    spec = base if base is not None else ExperimentSpec()
    kw = asdict(spec)

    def take(section: str, key: str, cast, target: str | None = None):
        if parser.has_option(section, key):
            kw[target or key] = cast(parser.get(section, key))

    take("experiment", "name", str)
    take("experiment", "scenario", str)
    take("experiment", "repetitions", int)
    take("experiment", "master_seed", int)
    take("experiment", "out_dir", str)
    take("experiment", "max_iters", int)
    take("graph", "n", int)
    take("graph", "p", float)
    take("graph", "topology_file", str)
    take("dataset", "dim", int)
    take("dataset", "samples_per_node", int)
    take("dataset", "lam", float)
    take("runs", "variants", lambda s: tuple(v.strip() for v in s.split(",")))
    take("runs", "co_rats", lambda s: tuple(float(v) for v in s.split(",")))
    take("runs", "stepsizes", lambda s: tuple(int(v) for v in s.split(",")))
    take("runs", "d_prox", float)
    take("runs", "acc_threshold", float)
    take("runs", "cserr_threshold", float)
    take("costs", "c_cmp", float)
    take("costs", "comm_rate_bits", float)
    if parser.has_section("c"):
        overrides = {}
        for key, value in parser.items("c"):
            variant, co_rat = key.split("@")
            overrides[(variant.strip(), float(co_rat))] = float(value)
        kw["c_overrides"] = overrides
    return ExperimentSpec(**kw)
