"""Deployment sweeps, aggregation and plot-data export."""

from __future__ import annotations

import csv
import io
import json
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from .config import ExperimentConfig
from .metrics import expected_error_split
from .network import calibrate_w, generate_deployment
from .optimizers import solve
from .rng import split_seed
from .sim import SimConfig, run_slots

__all__ = [
    "SweepRow",
    "Timing",
    "run_sweep",
    "summarize",
    "export",
    "read_rows_csv",
    "rows_to_csv",
    "deployment_seed",
    "method_seed",
]

BENCHMARK = "equal"


@dataclass(frozen=True)
class SweepRow:
    """One method on one deployment.

    ``w``, ``p_e``, ``p_miss`` and ``p_col`` are analytic; the ``sim_*``
    fields come from the slotted simulator.  Power is the fraction of TTIs a
    device spends transmitting; multiply by the device's transmit power in
    watts for an energy figure.
    """

    method: str
    n: int
    deployment: int
    seed: int
    feasible: bool
    margin: float
    w: float
    p_e: float
    p_miss: float
    p_col: float
    sim_p_e: float
    sim_p_e_se: float
    sim_p_miss: float
    sim_p_col: float
    sim_w: float

    @classmethod
    def header(cls) -> list[str]:
        return [f.name for f in fields(cls)]


@dataclass(frozen=True)
class Timing:
    method: str
    n: int
    deployment: int
    wall_ms: float


def deployment_seed(master: int, n: int, index: int) -> int:
    return split_seed(master, "deployment", n, index)


def method_seed(master: int, method: str, n: int, index: int) -> int:
    return split_seed(master, method, n, index)


def _run_unit(cfg: ExperimentConfig, n: int, index: int) -> tuple[list[SweepRow], list[Timing]]:
    model, budget = cfg.model, cfg.budget
    dep_seed = deployment_seed(cfg.master_seed, n, index)
    dep = generate_deployment(cfg.area, n, dep_seed)
    cals = calibrate_w(dep, model, samples=cfg.calibration_samples,
                       seed=split_seed(cfg.master_seed, "calibration", n, index))
    rows, timings = [], []
    for method in cfg.methods:
        seed = method_seed(cfg.master_seed, method, n, index)
        start = time.perf_counter()
        res = solve(method, dep, cals, model, budget, cfg.options(method), seed=seed)
        wall = 1000.0 * (time.perf_counter() - start)
        split = expected_error_split(cals, model, res.delta)
        sim = run_slots(dep, model, res.delta,
                        SimConfig(cfg.sim_ttis, seed=split_seed(cfg.master_seed, "sim", method, n, index)))
        rows.append(SweepRow(
            method=method, n=n, deployment=index, seed=dep_seed, feasible=res.feasible,
            margin=res.margin, w=res.objective, p_e=split["p_e"], p_miss=split["p_miss"],
            p_col=split["p_col"], sim_p_e=sim.p_e, sim_p_e_se=sim.p_e_se, sim_p_miss=sim.p_miss,
            sim_p_col=sim.p_col, sim_w=sim.w,
        ))
        timings.append(Timing(method, n, index, wall))
    return rows, timings


def _order(cfg: ExperimentConfig):
    rank = {m: i for i, m in enumerate(cfg.methods)}
    return lambda r: (rank[r.method], r.n, r.deployment)


def run_sweep(cfg: ExperimentConfig, with_timings: bool = False):
    """Every method on every ``(N, deployment)``, in a deterministic order.

    Rows are sorted by method (config order), ``N`` and deployment index no
    matter how the work pool schedules them.  Wall-clock times are returned
    separately when ``with_timings`` is set, keeping the rows reproducible.
    """
    units = [(n, i) for n in cfg.n_values for i in range(cfg.deployments)]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_run_unit, [cfg] * len(units), *zip(*units)))
    else:
        results = [_run_unit(cfg, n, i) for n, i in units]
    rows = sorted((r for res in results for r in res[0]), key=_order(cfg))
    timings = sorted((t for res in results for t in res[1]), key=_order(cfg))
    return (rows, timings) if with_timings else rows


def summarize(rows) -> list[dict]:
    """Per ``(method, N)`` means, medians, feasibility rate and reduction.

    ``power_reduction_pct`` is ``100 (1 - W_method / W_equal)`` on mean
    power and ``error_vs_equal_pct`` the same on mean simulated error; both
    are ``None`` when the benchmark was not run.
    """
    rows = list(rows)
    if not rows:
        raise ValueError("cannot summarise an empty sweep")
    groups: dict = {}
    for r in rows:
        groups.setdefault((r.method, r.n), []).append(r)
    out = []
    for (method, n), grp in groups.items():
        ws = [r.w for r in grp]
        out.append({
            "method": method,
            "n": n,
            "runs": len(grp),
            "feasibility": sum(r.feasible for r in grp) / len(grp),
            "w_mean": statistics.fmean(ws),
            "w_median": statistics.median(ws),
            "p_e_mean": statistics.fmean(r.p_e for r in grp),
            "sim_p_e_mean": statistics.fmean(r.sim_p_e for r in grp),
            "sim_p_miss_mean": statistics.fmean(r.sim_p_miss for r in grp),
            "sim_p_col_mean": statistics.fmean(r.sim_p_col for r in grp),
            "sim_w_mean": statistics.fmean(r.sim_w for r in grp),
        })
    bench = {a["n"]: a for a in out if a["method"] == BENCHMARK}
    for a in out:
        b = bench.get(a["n"])
        a["power_reduction_pct"] = (100.0 * (1.0 - a["w_mean"] / b["w_mean"])
                                    if b and b["w_mean"] > 0 else None)
        a["error_vs_equal_pct"] = (100.0 * (1.0 - a["sim_p_e_mean"] / b["sim_p_e_mean"])
                                   if b and b["sim_p_e_mean"] > 0 else None)
    return out


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return "" if v is None else str(v)


def _write_table(path: Path, header: list[str], rows) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for r in rows:
        writer.writerow([_fmt(r[h]) for h in header])
    path.write_text(buf.getvalue())


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SweepRow.header())
    for r in rows:
        writer.writerow([_fmt(v) for v in asdict(r).values()])
    return buf.getvalue()


def read_rows_csv(path) -> list[SweepRow]:
    types = {f.name: f.type for f in fields(SweepRow)}
    out = []
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            vals = {}
            for k, v in rec.items():
                t = types[k]
                if t == "bool":
                    vals[k] = v == "True"
                elif t == "int":
                    vals[k] = int(v)
                elif t == "float":
                    vals[k] = float(v)
                else:
                    vals[k] = v
            out.append(SweepRow(**vals))
    return out


def export(rows, out_dir, formats=("csv", "json"), timings=None) -> list[Path]:
    """Write the sweep table and the per-figure plot data.

    Files: ``sweep.csv`` / ``sweep.json``, ``fig5_power.csv`` (benchmark and
    Voronoi power), ``fig6_feasibility.csv``, ``fig8_power.csv`` (all
    methods), ``fig9_error_split.csv`` and, if given, ``timings.csv``.
    """
    rows = list(rows)
    out = Path(out_dir)
    written = []
    try:
        out.mkdir(parents=True, exist_ok=True)
        if "csv" in formats:
            p = out / "sweep.csv"
            p.write_text(rows_to_csv(rows))
            written.append(p)
        if "json" in formats:
            p = out / "sweep.json"
            p.write_text(json.dumps([asdict(r) for r in rows], indent=2))
            written.append(p)
        agg = summarize(rows) if rows else []
        power_cols = ["method", "n", "runs", "w_mean", "w_median", "power_reduction_pct"]
        fig5 = [a for a in agg if a["method"] == BENCHMARK or a["method"].startswith("voronoi_")]
        _write_table(out / "fig5_power.csv", power_cols, fig5)
        _write_table(out / "fig6_feasibility.csv", ["method", "n", "runs", "feasibility"], agg)
        _write_table(out / "fig8_power.csv", power_cols, agg)
        split = [{**a, "p_e": a["sim_p_miss_mean"] + a["sim_p_col_mean"]} for a in agg]
        _write_table(out / "fig9_error_split.csv",
                     ["method", "n", "p_e", "sim_p_miss_mean", "sim_p_col_mean", "error_vs_equal_pct"], split)
        written += [out / f for f in ("fig5_power.csv", "fig6_feasibility.csv", "fig8_power.csv",
                                      "fig9_error_split.csv")]
        if timings is not None:
            _write_table(out / "timings.csv", ["method", "n", "deployment", "wall_ms"],
                         [asdict(t) for t in timings])
            written.append(out / "timings.csv")
    except OSError as exc:
        raise OSError(f"cannot write results to {out}: {exc}") from exc
    return written
