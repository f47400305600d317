"""Experiment orchestration: run every (instance, method, theta) cell.

A config is a JSON object::

    {"instances": [{"preset": "table3", "seeds": [0, 1, 2]},
                   {"path": "inst.json"},
                   {"generator": {...GeneratorParams fields...}, "seeds": [5]}],
     "methods": ["sca", "gds", "ls", "k8s", "lds", "cds"],
     "thetas": [0.5],
     "sca": {"alpha": 1.0, "epsilon": 0.5, "max_iters": 50, "subproblem_budget": 2000},
     "workers": 1,
     "track_memory": true}

Cells are independent and may run in a process pool; the report is assembled
in cell order, so its contents do not depend on the worker count.  A failing
cell records its error and the run goes on.
"""

from __future__ import annotations

import csv
import time
import tracemalloc
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .baselines import METHODS, solve_with
from .errors import BudgetExhausted, LayerChainError
from .generator import GeneratorParams, generate_instance, preset
from .io import dump_json, load_instance
from .model import Instance, check_feasibility, ensure_augmented
from .objective import evaluate, normalization_bounds
from .reallocation import reallocate_deployment
from .sca import ScaConfig

__all__ = [
    "baseline_metrics",
    "ExperimentConfig",
    "ExperimentReport",
    "load_config",
    "run_experiment",
    "run_cell",
    "METRIC_COLUMNS",
    "TIMING_COLUMNS",
    "REALLOCATION_COLUMNS",
]

METRIC_COLUMNS = (
    "instance", "method", "theta", "F", "T_s", "R_hopKB", "T_ratio", "R_ratio",
    "iterations", "converged", "optimal", "start", "feasible", "error",
)
TIMING_COLUMNS = ("instance", "method", "theta", "runtime_s", "peak_memory_MB")
REALLOCATION_COLUMNS = (
    "instance", "method", "theta", "server", "app", "idx", "demand_GHz", "allocated_GHz", "e",
)


def baseline_metrics(instance: Instance):
    """``(pull delay without layer sharing in s, total traffic in KB)``.

    The delay sums full image sizes over the real microservices and divides by
    the mean cloud bandwidth.  The traffic includes the ingress edges.
    """
    inst = ensure_augmented(instance)
    delay = float(inst.image_sizes[~inst.is_virtual].sum() / inst.bandwidth.mean())
    return delay, float(inst.traffic.sum())


@dataclass(frozen=True)
class ExperimentConfig:
    instances: tuple = ()
    methods: tuple = METHODS
    thetas: tuple = (0.5,)
    sca: ScaConfig = ScaConfig()
    workers: int = 1
    track_memory: bool = True

    @classmethod
    def from_dict(cls, data, base_dir="."):
        unknown = set(data) - {"instances", "methods", "thetas", "sca", "workers", "track_memory"}
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        methods = tuple(data.get("methods", METHODS))
        bad = [m for m in methods if m not in METHODS]
        if bad:
            raise ValueError(f"unknown methods {bad}; choose from {METHODS}")
        thetas = tuple(float(t) for t in data.get("thetas", (0.5,)))
        if any(not 0.0 <= t <= 1.0 for t in thetas):
            raise ValueError("thetas must lie in [0, 1]")
        specs = []
        for entry in data.get("instances", []):
            entry = dict(entry)
            if "path" in entry:
                p = Path(entry["path"])
                specs.append(("path", str(p if p.is_absolute() else Path(base_dir) / p)))
            else:
                seeds = entry.pop("seeds", None) or [entry.pop("seed", 0)]
                gen = entry.get("generator", {})
                name = entry.get("preset")
                for s in seeds:
                    params = preset(name, **gen, seed=int(s)) if name else GeneratorParams.from_dict({**gen, "seed": int(s)})
                    specs.append(("params", (name or "custom", params)))
        return cls(
            instances=tuple(specs),
            methods=methods,
            thetas=thetas,
            sca=ScaConfig(**data.get("sca", {})),
            workers=int(data.get("workers", 1)),
            track_memory=bool(data.get("track_memory", True)),
        )


def load_config(path) -> ExperimentConfig:
    from .io import load_json

    return ExperimentConfig.from_dict(load_json(path), base_dir=Path(path).parent)


@dataclass
class ExperimentReport:
    rows: list = field(default_factory=list)
    timings: list = field(default_factory=list)
    reallocation: list = field(default_factory=list)
    instances: dict = field(default_factory=dict)  # label -> baseline metrics and sizes

    def __len__(self):
        return len(self.rows)

    def cell(self, instance, method, theta):
        for r in self.rows:
            if r["instance"] == instance and r["method"] == method and r["theta"] == theta:
                return r
        raise KeyError((instance, method, theta))

    def summary(self):
        """Mean F, T, R and ratios per (method, theta) over successful cells."""
        groups = {}
        for r in self.rows:
            if r["error"]:
                continue
            groups.setdefault((r["method"], r["theta"]), []).append(r)
        out = []
        for (m, t), rs in sorted(groups.items(), key=lambda kv: (kv[0][1], METHODS.index(kv[0][0]))):
            out.append({
                "method": m, "theta": t, "cells": len(rs),
                **{k: float(np.mean([r[k] for r in rs])) for k in ("F", "T_s", "R_hopKB", "T_ratio", "R_ratio")},
            })
        return out

    def write_csv(self, out_dir):
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for name, cols, rows in (
            ("results.csv", METRIC_COLUMNS, self.rows),
            ("timing.csv", TIMING_COLUMNS, self.timings),
            ("reallocation.csv", REALLOCATION_COLUMNS, self.reallocation),
        ):
            with open(out / name, "w", newline="") as fh:
                w = csv.DictWriter(fh, fieldnames=cols, lineterminator="\n")
                w.writeheader()
                for r in rows:
                    w.writerow({c: _fmt(r.get(c)) for c in cols})

    def to_dict(self):
        return {
            "rows": self.rows,
            "timings": self.timings,
            "reallocation": self.reallocation,
            "instances": self.instances,
            "summary": self.summary(),
        }

    def write(self, out_dir):
        self.write_csv(out_dir)
        dump_json(self.to_dict(), Path(out_dir) / "report.json")


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(round(v, 12))
    return v


def _materialize(spec):
    kind, payload = spec
    if kind == "path":
        return Path(payload).stem, load_instance(payload)
    name, params = payload
    return f"{name}-s{params.seed}", generate_instance(params)


def run_cell(inst: Instance, label: str, method: str, theta: float, cfg: ScaConfig, track_memory=True):
    """Solve one cell; returns ``(row, timing, reallocation rows)``."""
    row = {"instance": label, "method": method, "theta": theta, "error": ""}
    timing = {"instance": label, "method": method, "theta": theta}
    realloc = []
    base_delay, base_traffic = baseline_metrics(inst)
    if track_memory:
        tracemalloc.start()
    start = time.perf_counter()
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", BudgetExhausted)
            dep, trace = solve_with(method, inst, theta, cfg)
        budget_hit = any(issubclass(w.category, BudgetExhausted) for w in caught)
    except (LayerChainError, ValueError) as exc:
        row["error"] = f"{type(exc).__name__}: {exc}"
        return row, timing, realloc
    finally:
        timing["runtime_s"] = time.perf_counter() - start
        if track_memory:
            timing["peak_memory_MB"] = tracemalloc.get_traced_memory()[1] / 2**20
            tracemalloc.stop()
    F, T, R = evaluate(inst, dep, normalization_bounds(inst, theta))
    row.update(
        F=F, T_s=T, R_hopKB=R,
        T_ratio=T / base_delay if base_delay else 0.0,
        R_ratio=R / base_traffic if base_traffic else 0.0,
        iterations=trace.iterations if trace else 0,
        converged=trace.converged if trace else True,
        optimal=(trace.all_optimal and not budget_hit) if trace else True,
        start=trace.start if trace else "",
        feasible=check_feasibility(inst, dep).feasible,
    )
    for server, res in reallocate_deployment(inst, dep).items():
        for (k, i), u, f, e in res.rows():
            realloc.append({"instance": label, "method": method, "theta": theta, "server": server,
                            "app": k, "idx": i, "demand_GHz": u, "allocated_GHz": f, "e": e})
    row["placements"] = {f"{k},{i}": s for (k, i), s in sorted(dep.placements.items())}
    return row, timing, realloc


def _run_instance(args):
    spec, methods, thetas, cfg, track_memory = args
    try:
        label, inst = _materialize(spec)
        inst = ensure_augmented(inst)
    except (LayerChainError, ValueError, OSError) as exc:
        label = spec[1] if spec[0] == "path" else f"{spec[1][0]}-s{spec[1][1].seed}"
        err = f"{type(exc).__name__}: {exc}"
        rows = [{"instance": label, "method": m, "theta": t, "error": err} for t in thetas for m in methods]
        return label, None, rows, [], []
    base_delay, base_traffic = baseline_metrics(inst)
    meta = {"servers": inst.n_servers, "microservices": int((~inst.is_virtual).sum()),
            "baseline_pull_delay_s": base_delay, "baseline_comm_overhead_KB": base_traffic}
    rows, timings, realloc = [], [], []
    for t in thetas:
        for m in methods:
            r, tm, ra = run_cell(inst, label, m, t, cfg, track_memory)
            rows.append(r)
            timings.append(tm)
            realloc.extend(ra)
    return label, meta, rows, timings, realloc


def run_experiment(config) -> ExperimentReport:
    """Run an :class:`ExperimentConfig` (or a path to a config file)."""
    if not isinstance(config, ExperimentConfig):
        config = load_config(config)
    jobs = [(spec, config.methods, config.thetas, config.sca, config.track_memory) for spec in config.instances]
    report = ExperimentReport()
    if not config.methods or not jobs:
        return report
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(_run_instance, jobs))
    else:
        results = [_run_instance(j) for j in jobs]
    for label, meta, rows, timings, realloc in results:
        if meta is not None:
            report.instances[label] = meta
        report.rows.extend(rows)
        report.timings.extend(timings)
        report.reallocation.extend(realloc)
    return report

