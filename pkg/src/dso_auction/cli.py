"""Command-line front end.

    dso-auction solve    <scenario.json>   clear one auction, emit artifacts
    dso-auction sweep    <scenario.json>   price-scaling or penalty sweeps
    dso-auction validate <scenario.json>   check invariants, print violations

Exit codes: 0 success; 1 validation violations; 2 parse/usage error;
3 market-property failure; 4 solver failure.

All CSV artifacts carry a header row with units and use 6 significant
digits. The solution JSON schema is documented field-by-field in README.md.
Two runs on identical inputs produce byte-identical artifacts except for the
"generated_at" timestamp inside solution JSON files.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .branch_bound import (STATUS_GAP_LIMIT, STATUS_OPTIMAL, BbConfig,
                           MilpSolution, solve_milp)
from .model import build_model, write_lp_text
from .pricing import (DlmpReport, PropertyReport, Settlement,
                      check_market_properties, compute_dlmp, settle)
from .scenario import (Scenario, ScenarioParseError, ScenarioValidationError,
                       load_scenario, scale_lmp, validate_scenario, with_gamma)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_PARSE = 2
EXIT_PROPERTY = 3
EXIT_SOLVER = 4

_OK_STATUSES = (STATUS_OPTIMAL, STATUS_GAP_LIMIT)


@dataclass(frozen=True)
class SweepSpec:
    kind: str                    # "lmp_scale" or "gamma"
    values: tuple[float, ...]    # strictly increasing
    base: Path

    def __post_init__(self):
        if self.kind not in ("lmp_scale", "gamma"):
            raise ValueError(f"unknown sweep kind {self.kind!r}")
        if not self.values:
            raise ValueError("sweep needs at least one value")
        if any(b <= a for a, b in zip(self.values, self.values[1:])):
            raise ValueError("sweep values must be strictly increasing")


@dataclass(frozen=True)
class RunArtifacts:
    out_dir: Path
    solution_json: Path | None = None
    csv_files: tuple[Path, ...] = ()
    property_report: Path | None = None
    exit_code: int = EXIT_OK


def _fmt(x: float) -> str:
    if isinstance(x, float) and math.isnan(x):
        return "nan"
    return f"{x:.6g}"


def _write_atomic(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def _write_csv(path: Path, header: list[str], rows: list[list]) -> Path:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) if isinstance(v, float) else str(v)
                              for v in row))
    _write_atomic(path, "\n".join(lines) + "\n")
    return path


# ---------------------------------------------------------------------------
# solve command

def _series(sol: MilpSolution, kind: str, bus: str, unit=None, seg=None,
            horizon: int = 0) -> list[float]:
    return [sol.value_of(kind, bus, unit, seg, t) for t in range(1, horizon + 1)]


def _variables_block(scenario: Scenario, sol: MilpSolution) -> dict:
    horizon = scenario.horizon
    out: dict = {"wsm_draw": {}, "generators": {}, "storage": {}, "loads": {}}
    for bus in scenario.buses:
        out["wsm_draw"][bus.bus_id] = _series(sol, "s", bus.bus_id, horizon=horizon)
        for gen in bus.generators:
            out["generators"][gen.gen_id] = {
                "bus": bus.bus_id,
                "p": _series(sol, "p", bus.bus_id, gen.gen_id, horizon=horizon),
                "px": [_series(sol, "px", bus.bus_id, gen.gen_id, seg=q, horizon=horizon)
                       for q in range(1, len(gen.segments) + 1)],
                "committed": _series(sol, "i", bus.bus_id, gen.gen_id, horizon=horizon),
                "startup": _series(sol, "y", bus.bus_id, gen.gen_id, horizon=horizon),
                "shutdown": _series(sol, "z", bus.bus_id, gen.gen_id, horizon=horizon),
                "up_count": _series(sol, "su", bus.bus_id, gen.gen_id, horizon=horizon),
                "down_count": _series(sol, "sd", bus.bus_id, gen.gen_id, horizon=horizon),
            }
        for unit in bus.bss_units:
            out["storage"][unit.bss_id] = {
                "bus": bus.bus_id,
                "e": _series(sol, "e", bus.bus_id, unit.bss_id, horizon=horizon),
                "soc": _series(sol, "c", bus.bus_id, unit.bss_id, horizon=horizon),
                "discharging": _series(sol, "j", bus.bus_id, unit.bss_id, horizon=horizon),
                "to_discharge": _series(sol, "v", bus.bus_id, unit.bss_id, horizon=horizon),
                "to_charge": _series(sol, "u", bus.bus_id, unit.bss_id, horizon=horizon),
                "discharge_count": _series(sol, "dc", bus.bus_id, unit.bss_id, horizon=horizon),
                "charge_count": _series(sol, "cc", bus.bus_id, unit.bss_id, horizon=horizon),
            }
        for load in bus.loads:
            out["loads"][load.load_id] = {
                "bus": bus.bus_id,
                "d": _series(sol, "d", bus.bus_id, load.load_id, horizon=horizon),
                "dx": [[sol.value_of("dx", bus.bus_id, load.load_id, r, t)
                        for t in range(1, horizon + 1)]
                       for r in range(1, len(load.segments[0]) + 1)],
            }
    return out


def _net_position(scenario: Scenario, sol: MilpSolution) -> dict[str, list[float]]:
    """Per-bus net injection (generation + storage - demand); positive values
    mean the bus exports into the rest of the territory."""
    horizon = scenario.horizon
    out = {}
    for bus in scenario.buses:
        series = []
        for t in range(1, horizon + 1):
            gen = sum(sol.value_of("p", bus.bus_id, g.gen_id, t=t)
                      for g in bus.generators)
            bss = sum(sol.value_of("e", bus.bus_id, u.bss_id, t=t)
                      for u in bus.bss_units)
            dem = sum(sol.value_of("d", bus.bus_id, ld.load_id, t=t)
                      for ld in bus.loads)
            series.append(gen + bss - dem)
        out[bus.bus_id] = series
    return out


def _solution_document(scenario: Scenario, sol: MilpSolution, prices: DlmpReport,
                       stmt: Settlement, report: PropertyReport) -> dict:
    horizon = scenario.horizon
    return {
        "schema": "dso-auction/solution/v1",
        "generated_at": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        "scenario_id": scenario.scenario_id,
        "status": sol.status,
        "objective": sol.objective,
        "bound": sol.bound,
        "gap": sol.gap,
        "nodes": sol.nodes_explored,
        "bus_ids": list(prices.bus_ids),
        "dlmp": [[prices.dlmp[(b, t)] for t in range(1, horizon + 1)]
                 for b in prices.bus_ids],
        "cap_dual": list(prices.cap_dual),
        "lmp": list(prices.lmp),
        "degenerate_balance_rows": [list(p) for p in prices.degenerate_balance],
        "degenerate_cap_rows": list(prices.degenerate_cap),
        "net_position": _net_position(scenario, sol),
        "variables": _variables_block(scenario, sol),
        "settlement": {
            "load_payments": stmt.load_payments,
            "gen_revenues": stmt.gen_revenues,
            "bss_revenues": stmt.bss_revenues,
            "iso_payment": stmt.iso_payment,
            "deviation": stmt.deviation,
            "penalty": stmt.penalty,
            "dso_revenue_gross": stmt.dso_revenue_gross,
            "dso_revenue_net": stmt.dso_revenue_net,
        },
        "properties": [dataclasses.asdict(c) for c in report.checks],
    }


def _emit_solve_csvs(out_dir: Path, scenario: Scenario, sol: MilpSolution,
                     prices: DlmpReport) -> list[Path]:
    horizon = scenario.horizon
    hours = list(range(1, horizon + 1))
    buses = [b.bus_id for b in scenario.buses]
    files = []

    rows = [[t] + [sol.value_of("s", b, t=t) for b in buses] for t in hours]
    files.append(_write_csv(out_dir / "fig2_wsm_allocation.csv",
                            ["t_hour"] + [f"s_{b}_mwh" for b in buses], rows))

    gen_by_bus = []
    for t in hours:
        row = [t]
        for bus in scenario.buses:
            row.append(sum(sol.value_of("p", bus.bus_id, g.gen_id, t=t)
                           for g in bus.generators))
        gen_by_bus.append(row)
    files.append(_write_csv(out_dir / "fig3_bus_generation.csv",
                            ["t_hour"] + [f"gen_{b}_mwh" for b in buses], gen_by_bus))

    stack = []
    for t in hours:
        wsm = sum(sol.value_of("s", b, t=t) for b in buses)
        gen = sum(sol.value_of("p", bus.bus_id, g.gen_id, t=t)
                  for bus in scenario.buses for g in bus.generators)
        bss = sum(sol.value_of("e", bus.bus_id, u.bss_id, t=t)
                  for bus in scenario.buses for u in bus.bss_units)
        dem = sum(sol.value_of("d", bus.bus_id, ld.load_id, t=t)
                  for bus in scenario.buses for ld in bus.loads)
        stack.append([t, dem, wsm, gen, bss])
    files.append(_write_csv(out_dir / "fig4_supply_demand.csv",
                            ["t_hour", "demand_mwh", "wsm_mwh",
                             "generation_mwh", "bss_mwh"], stack))

    bss_units = [(bus, u) for bus in scenario.buses for u in bus.bss_units]
    header = ["t_hour"]
    for bus, u in bss_units:
        header += [f"e_{u.bss_id}_mwh", f"dlmp_{bus.bus_id}_usd_per_mwh",
                   f"offer_{u.bss_id}_usd_per_mwh"]
    rows = []
    for t in hours:
        row = [t]
        for bus, u in bss_units:
            row += [sol.value_of("e", bus.bus_id, u.bss_id, t=t),
                    prices.dlmp[(bus.bus_id, t)], u.sell_price]
        rows.append(row)
    files.append(_write_csv(out_dir / "fig5_bss_schedule.csv", header, rows))

    rows = [[t, prices.lmp[t - 1]] + [prices.dlmp[(b, t)] for b in buses]
            for t in hours]
    files.append(_write_csv(out_dir / "fig7_dlmp_vs_lmp.csv",
                            ["t_hour", "lmp_usd_per_mwh"]
                            + [f"dlmp_{b}_usd_per_mwh" for b in buses], rows))
    return files


def cmd_solve(scenario_path: str | Path, out_dir: str | Path = "out",
              gap: float = 1e-4, time_limit: float = 120.0,
              node_limit: int = 200_000, branch_rule: str = "most_fractional",
              strict_integers: bool = False, lp_export: bool = False,
              log_interval: int = 0, workers: int = 1) -> RunArtifacts:
    """Full pipeline: build, solve, price, settle, check, emit artifacts."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    try:
        scenario = load_scenario(scenario_path)
    except ScenarioValidationError as exc:
        _write_atomic(out / "error.json", json.dumps(
            {"error": "validation", "violations": [str(v) for v in exc.violations]},
            indent=1))
        return RunArtifacts(out_dir=out, exit_code=EXIT_VALIDATION)
    except ScenarioParseError as exc:
        _write_atomic(out / "error.json",
                      json.dumps({"error": "parse", "message": str(exc)}, indent=1))
        return RunArtifacts(out_dir=out, exit_code=EXIT_PARSE)

    model = build_model(scenario, strict_counters=strict_integers)
    cfg = BbConfig(mip_gap_rel=gap, node_limit=node_limit,
                   time_limit=time_limit, branch_rule=branch_rule,
                   log_interval=log_interval)
    sol = solve_milp(model, cfg)
    if sol.status not in _OK_STATUSES or sol.values is None:
        _write_atomic(out / "error.json", json.dumps(
            {"error": "solver", "status": sol.status, "gap": sol.gap,
             "nodes": sol.nodes_explored}, indent=1))
        return RunArtifacts(out_dir=out, exit_code=EXIT_SOLVER)

    prices = compute_dlmp(model, sol)
    stmt = settle(scenario, sol, prices)
    report = check_market_properties(scenario, sol, prices, stmt)

    doc = _solution_document(scenario, sol, prices, stmt, report)
    sol_path = out / "solution.json"
    _write_atomic(sol_path, json.dumps(doc, indent=1, sort_keys=True))
    csvs = _emit_solve_csvs(out, scenario, sol, prices)
    prop_path = out / "properties.json"
    _write_atomic(prop_path, json.dumps(doc["properties"], indent=1, sort_keys=True))
    if lp_export:
        write_lp_text(model, out / "model.lp")

    code = EXIT_OK if report.all_hard_passed else EXIT_PROPERTY
    return RunArtifacts(out_dir=out, solution_json=sol_path,
                        csv_files=tuple(csvs), property_report=prop_path,
                        exit_code=code)


# ---------------------------------------------------------------------------
# sweep command

def _sweep_row(args: tuple) -> dict:
    (base_path, kind, value, lmp_scale, gap, time_limit, node_limit,
     branch_rule) = args
    scenario = load_scenario(base_path)
    if kind == "lmp_scale":
        scenario = scale_lmp(scenario, value)
    else:
        if lmp_scale != 1.0:
            scenario = scale_lmp(scenario, lmp_scale)
        scenario = with_gamma(scenario, value)

    model = build_model(scenario)
    cfg = BbConfig(mip_gap_rel=gap, node_limit=node_limit, time_limit=time_limit,
                   branch_rule=branch_rule)
    sol = solve_milp(model, cfg)
    row = {"value": value, "status": sol.status}
    if sol.status not in _OK_STATUSES or sol.values is None:
        row.update(avg_lmp=float("nan"), avg_dlmp=float("nan"),
                   wsm_draw=float("nan"), deviation=float("nan"),
                   gross=float("nan"), net=float("nan"), properties_ok=False,
                   failed_properties=["solver_" + sol.status])
        return row

    prices = compute_dlmp(model, sol)
    stmt = settle(scenario, sol, prices)
    report = check_market_properties(scenario, sol, prices, stmt)
    horizon = scenario.horizon
    draw = sum(sol.value_of("s", b.bus_id, t=t)
               for b in scenario.buses for t in range(1, horizon + 1))
    all_dlmp = [prices.dlmp[(b.bus_id, t)]
                for b in scenario.buses for t in range(1, horizon + 1)]
    row.update(
        avg_lmp=float(np.mean(prices.lmp)),
        avg_dlmp=float(np.mean(all_dlmp)),
        wsm_draw=draw,
        deviation=stmt.deviation,
        gross=stmt.dso_revenue_gross,
        net=stmt.dso_revenue_net,
        properties_ok=report.all_hard_passed,
        failed_properties=[c.name for c in report.checks if c.hard and not c.passed],
    )
    if not report.all_hard_passed:
        row["status"] = "property_fail"
    return row


def cmd_sweep(spec: SweepSpec, out_dir: str | Path = "out",
              lmp_scale: float = 1.0, gap: float = 1e-4,
              time_limit: float = 120.0, node_limit: int = 200_000,
              branch_rule: str = "most_fractional", workers: int = 1
              ) -> RunArtifacts:
    """Solve one derived scenario per sweep value (independently; rows may
    run in parallel) and emit the summary CSV + JSON."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    try:
        load_scenario(spec.base)
    except ScenarioValidationError:
        return RunArtifacts(out_dir=out, exit_code=EXIT_VALIDATION)
    except ScenarioParseError:
        return RunArtifacts(out_dir=out, exit_code=EXIT_PARSE)

    jobs = [(str(spec.base), spec.kind, v, lmp_scale, gap, time_limit,
             node_limit, branch_rule) for v in spec.values]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_row, jobs))
    else:
        rows = [_sweep_row(j) for j in jobs]

    label = "factor" if spec.kind == "lmp_scale" else "gamma_usd_per_mwh"
    csv_rows = [[r["value"], r["avg_lmp"], r["avg_dlmp"], r["wsm_draw"],
                 r["deviation"], r["gross"], r["net"], r["status"]]
                for r in rows]
    csv_path = _write_csv(
        out / f"sweep_{spec.kind}.csv",
        [label, "avg_lmp_usd_per_mwh", "avg_dlmp_usd_per_mwh",
         "wsm_draw_mwh", "deviation_mwh", "gross_revenue_usd",
         "net_revenue_usd", "status"],
        csv_rows)
    json_path = out / f"sweep_{spec.kind}.json"
    _write_atomic(json_path, json.dumps(
        {"kind": spec.kind, "lmp_scale": lmp_scale, "rows": rows},
        indent=1, sort_keys=True))

    ok = all(r["status"] in _OK_STATUSES for r in rows)
    return RunArtifacts(out_dir=out, solution_json=json_path,
                        csv_files=(csv_path,),
                        exit_code=EXIT_OK if ok else EXIT_SOLVER)


# ---------------------------------------------------------------------------
# validate command

def cmd_validate(scenario_path: str | Path) -> int:
    try:
        scenario = load_scenario(scenario_path)
    except ScenarioValidationError as exc:
        for v in exc.violations:
            print(str(v))
        return EXIT_VALIDATION
    except ScenarioParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    violations = validate_scenario(scenario)
    for v in violations:
        print(str(v))
    return EXIT_OK if not violations else EXIT_VALIDATION


# ---------------------------------------------------------------------------
# argument parsing

def _add_solver_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--gap", type=float, default=1e-4,
                   help="relative optimality gap target (default 1e-4)")
    p.add_argument("--time-limit", type=float, default=120.0,
                   help="seconds per solve (default 120)")
    p.add_argument("--node-limit", type=int, default=200_000)
    p.add_argument("--branch-rule", choices=("most_fractional", "pseudo_cost"),
                   default="most_fractional")
    p.add_argument("--out-dir", default="out")
    p.add_argument("--workers", type=int, default=1,
                   help="parallel sweep rows (solve: accepted, single-threaded)")
    p.add_argument("--seed", type=int, default=0,
                   help="reserved; recorded but unused")
    p.add_argument("--log-interval", type=int, default=0,
                   help="progress line every N nodes (0 = silent)")


def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dso-auction",
                                 description=__doc__,
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    ps = sub.add_parser("solve", help="clear one auction scenario")
    ps.add_argument("scenario")
    ps.add_argument("--strict-integers", action="store_true",
                    help="declare run-length counters integer (differential mode)")
    ps.add_argument("--lp-export", action="store_true",
                    help="also write the model in LP text format")
    _add_solver_flags(ps)

    pw = sub.add_parser("sweep", help="price-scaling or penalty sweep")
    pw.add_argument("scenario")
    pw.add_argument("--kind", choices=("lmp_scale", "gamma"), required=True)
    pw.add_argument("--values", required=True,
                    help="comma-separated, strictly increasing")
    pw.add_argument("--lmp-scale", type=float, default=1.0,
                    help="pre-scale prices before a gamma sweep")
    _add_solver_flags(pw)

    pv = sub.add_parser("validate", help="check a scenario file")
    pv.add_argument("scenario")
    return ap


def main(argv: list[str] | None = None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")

    if args.command == "validate":
        return cmd_validate(args.scenario)

    if args.command == "solve":
        arts = cmd_solve(args.scenario, out_dir=args.out_dir, gap=args.gap,
                         time_limit=args.time_limit, node_limit=args.node_limit,
                         branch_rule=args.branch_rule,
                         strict_integers=args.strict_integers,
                         lp_export=args.lp_export,
                         log_interval=args.log_interval, workers=args.workers)
        if arts.solution_json:
            print(arts.solution_json)
        return arts.exit_code

    if args.command == "sweep":
        try:
            values = tuple(float(v) for v in args.values.split(","))
            spec = SweepSpec(kind=args.kind, values=values,
                             base=Path(args.scenario))
        except ValueError as exc:
            print(f"bad sweep: {exc}", file=sys.stderr)
            return EXIT_PARSE
        arts = cmd_sweep(spec, out_dir=args.out_dir, lmp_scale=args.lmp_scale,
                         gap=args.gap, time_limit=args.time_limit,
                         node_limit=args.node_limit,
                         branch_rule=args.branch_rule, workers=args.workers)
        for f in arts.csv_files:
            print(f)
        return arts.exit_code

    return EXIT_PARSE


if __name__ == "__main__":
    sys.exit(main())
