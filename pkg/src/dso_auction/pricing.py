"""Bus-level clearing prices, settlement, and market-property checks.

Prices come from re-solving the LP obtained by clamping every integer column
of the solved MILP to its incumbent value. The published bus price (DLMP) is
the shadow price of demand at the bus: the negative of the raw dual of that
bus's balance row (the row is written supply-minus-demand, so its raw dual
prices a forced unit of oversupply). The hourly dual of the supply-cap row
is reported alongside; it is non-negative under the solver's sign convention
and measures the scarcity rent on committed upstream energy.

Stationarity ties the three prices together wherever upstream energy flows:
with penalty weight gamma, drawing one more MWh costs LMP_t - gamma net of
avoided penalty, so  dlmp = LMP_t - gamma + cap_dual_t  at every (bus, t)
with positive draw. (With gamma = 0 this is the familiar dlmp = LMP + rent.)

Money is aggregated with compensated summation (math.fsum).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .branch_bound import MilpSolution
from .model import MilpModel, fix_binaries, integer_values_from, model_to_lp
from .scenario import Scenario
from .simplex import OPTIMAL, solve_lp_warm

logger = logging.getLogger(__name__)

TOL_PRICE = 1e-5     # rationality slack, $/MWh
TOL_CS = 1e-6        # stationarity identity slack
TOL_QTY = 1e-6       # "dispatched at all" threshold, MWh
EPS_MONEY = 1e-4     # budget-balance slack, $


class PricingError(RuntimeError):
    """The binary-fixed re-solve disagreed with the MILP incumbent."""


@dataclass(frozen=True)
class DlmpReport:
    """Per-(bus, hour) clearing prices plus the hourly supply-cap duals."""

    bus_ids: tuple[str, ...]
    dlmp: dict[tuple[str, int], float]        # (bus, t) -> $/MWh
    cap_dual: tuple[float, ...]               # per t, >= 0
    lmp: tuple[float, ...]                    # echo of the scenario series
    degenerate_balance: tuple[tuple[str, int], ...]  # rows with no net activity
    degenerate_cap: tuple[int, ...]           # cap rows with ~0 slack and ~0 dual
    lp_objective: float

    def dlmp_series(self, bus_id: str) -> list[float]:
        return [self.dlmp[(bus_id, t)] for t in range(1, len(self.lmp) + 1)]


def compute_dlmp(model: MilpModel, sol: MilpSolution) -> DlmpReport:
    """Fix the solution's integer columns, re-solve the LP, and read prices
    off the balance-row and cap-row duals.

    Raises PricingError when the re-solve fails or its objective strays from
    the incumbent objective by more than 1e-6 (that would mean the fix is
    not actually feasible, i.e. a search bug).
    """
    if sol.values is None:
        raise PricingError(f"solution has no values (status {sol.status})")
    fixed = fix_binaries(model, integer_values_from(model, sol.values))
    lp = model_to_lp(fixed)
    res = solve_lp_warm(lp, sol.basis)
    if res.status != OPTIMAL:
        raise PricingError(f"binary-fixed re-solve returned {res.status}")
    resolved = res.objective + model.objective_offset
    if sol.objective is not None and abs(resolved - sol.objective) > 1e-6 * max(
            1.0, abs(sol.objective)):
        raise PricingError(
            f"re-solve objective {resolved!r} != incumbent {sol.objective!r}")

    sc = model.scenario
    horizon = sc.horizon
    dlmp: dict[tuple[str, int], float] = {}
    degenerate_balance = []
    for bus in sc.buses:
        for t in range(1, horizon + 1):
            k = model.row_index_of("3", bus.bus_id, t)
            dlmp[(bus.bus_id, t)] = -float(res.duals[k])
            activity = _bus_activity(model, res.primal, bus, t)
            if activity <= TOL_QTY:
                degenerate_balance.append((bus.bus_id, t))

    cap_dual = []
    degenerate_cap = []
    for t in range(1, horizon + 1):
        k = model.row_index_of("2", None, t)
        mu = float(res.duals[k])
        cap_dual.append(mu)
        drawn = sum(res.primal[model.columns.column("s", bus.bus_id, t=t)]
                    for bus in sc.buses)
        slack = sc.wsm.supply[t - 1] - drawn
        if abs(slack) <= TOL_QTY and abs(mu) <= TOL_CS:
            degenerate_cap.append(t)

    return DlmpReport(
        bus_ids=tuple(bus.bus_id for bus in sc.buses),
        dlmp=dlmp,
        cap_dual=tuple(cap_dual),
        lmp=tuple(sc.wsm.lmp),
        degenerate_balance=tuple(degenerate_balance),
        degenerate_cap=tuple(degenerate_cap),
        lp_objective=resolved,
    )


def _bus_activity(model: MilpModel, x: np.ndarray, bus, t: int) -> float:
    col = model.columns.column
    total = abs(float(x[col("s", bus.bus_id, t=t)]))
    for gen in bus.generators:
        total += abs(float(x[col("p", bus.bus_id, gen.gen_id, t=t)]))
    for unit in bus.bss_units:
        total += abs(float(x[col("e", bus.bus_id, unit.bss_id, t=t)]))
    for load in bus.loads:
        total += abs(float(x[col("d", bus.bus_id, load.load_id, t=t)]))
    return total


@dataclass(frozen=True)
class Settlement:
    """All payments at the published prices, in dollars."""

    load_payments: dict[str, float]      # load pays dlmp * consumption
    gen_revenues: dict[str, float]       # generator paid dlmp * output
    bss_revenues: dict[str, float]       # storage paid dlmp * discharge
    iso_payment: float                   # operator pays LMP * draw upstream
    deviation: float                     # MWh committed but not drawn
    penalty: float                       # gamma * deviation
    dso_revenue_gross: float             # loads - generators - storage - upstream
    dso_revenue_net: float               # gross - penalty


def settle(scenario: Scenario, sol: MilpSolution, prices: DlmpReport) -> Settlement:
    """Pure payment arithmetic over the solved quantities at the published
    prices; no optimization happens here."""
    if sol.values is None:
        raise ValueError(f"solution has no values (status {sol.status})")
    x = sol.values
    cols = sol.columns
    horizon = scenario.horizon
    hours = range(1, horizon + 1)

    load_payments: dict[str, float] = {}
    gen_revenues: dict[str, float] = {}
    bss_revenues: dict[str, float] = {}
    for bus in scenario.buses:
        price = [prices.dlmp[(bus.bus_id, t)] for t in hours]
        for load in bus.loads:
            load_payments[load.load_id] = math.fsum(
                price[t - 1] * x[cols.column("d", bus.bus_id, load.load_id, t=t)]
                for t in hours)
        for gen in bus.generators:
            gen_revenues[gen.gen_id] = math.fsum(
                price[t - 1] * x[cols.column("p", bus.bus_id, gen.gen_id, t=t)]
                for t in hours)
        for unit in bus.bss_units:
            bss_revenues[unit.bss_id] = math.fsum(
                price[t - 1] * x[cols.column("e", bus.bus_id, unit.bss_id, t=t)]
                for t in hours)

    draw_by_hour = [
        math.fsum(x[cols.column("s", bus.bus_id, t=t)] for bus in scenario.buses)
        for t in hours]
    iso_payment = math.fsum(scenario.wsm.lmp[t - 1] * draw_by_hour[t - 1]
                            for t in hours)
    deviation = math.fsum(scenario.wsm.supply) - math.fsum(draw_by_hour)
    penalty = scenario.gamma * deviation

    gross = math.fsum([
        math.fsum(load_payments.values()),
        -math.fsum(gen_revenues.values()),
        -math.fsum(bss_revenues.values()),
        -iso_payment,
    ])
    return Settlement(
        load_payments=load_payments,
        gen_revenues=gen_revenues,
        bss_revenues=bss_revenues,
        iso_payment=iso_payment,
        deviation=deviation,
        penalty=penalty,
        dso_revenue_gross=gross,
        dso_revenue_net=gross - penalty,
    )


@dataclass(frozen=True)
class PropertyCheck:
    name: str
    passed: bool
    hard: bool                      # hard failures flip the process exit code
    violations: tuple[str, ...] = ()
    detail: str = ""


@dataclass(frozen=True)
class PropertyReport:
    checks: tuple[PropertyCheck, ...]

    @property
    def all_hard_passed(self) -> bool:
        return all(c.passed for c in self.checks if c.hard)

    def by_name(self, name: str) -> PropertyCheck:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)


def check_market_properties(scenario: Scenario, sol: MilpSolution,
                            prices: DlmpReport, settlement: Settlement
                            ) -> PropertyReport:
    """Evaluate the market-design properties of a solved auction; returns
    pass/fail per property with the violating indices."""
    x = sol.values
    cols = sol.columns
    hours = range(1, scenario.horizon + 1)
    checks: list[PropertyCheck] = []

    # weak budget balance (enforced at gamma = 0, informational otherwise)
    wbb_ok = settlement.dso_revenue_gross >= -EPS_MONEY
    checks.append(PropertyCheck(
        name="weak_budget_balance",
        passed=wbb_ok,
        hard=scenario.gamma == 0.0,
        detail=f"gross revenue {settlement.dso_revenue_gross:.6f} $",
        violations=() if wbb_ok else (f"gross={settlement.dso_revenue_gross:.6f}",)))

    # sellers dispatched only at or above their offers
    viols: list[str] = []
    for bus in scenario.buses:
        for gen in bus.generators:
            for q, seg in enumerate(gen.segments, start=1):
                for t in hours:
                    qty = x[cols.column("px", bus.bus_id, gen.gen_id, q, t)]
                    if qty > TOL_QTY and prices.dlmp[(bus.bus_id, t)] < seg.cost - TOL_PRICE:
                        viols.append(f"{gen.gen_id} q{q} t{t}: "
                                     f"{prices.dlmp[(bus.bus_id, t)]:.4f} < {seg.cost}")
    checks.append(PropertyCheck(
        name="supplier_rationality_generation", passed=not viols, hard=True,
        violations=tuple(viols[:20]),
        detail=f"{len(viols)} dispatched segment-hours below offer"))

    viols = []
    for bus in scenario.buses:
        for unit in bus.bss_units:
            for t in hours:
                qty = x[cols.column("e", bus.bus_id, unit.bss_id, t=t)]
                if qty > TOL_QTY and prices.dlmp[(bus.bus_id, t)] < unit.sell_price - TOL_PRICE:
                    viols.append(f"{unit.bss_id} t{t}: "
                                 f"{prices.dlmp[(bus.bus_id, t)]:.4f} < {unit.sell_price}")
    checks.append(PropertyCheck(
        name="supplier_rationality_storage", passed=not viols, hard=True,
        violations=tuple(viols[:20]),
        detail=f"{len(viols)} discharge-hours below offer"))

    # responsive buyers served only at or below their bids
    viols = []
    for bus in scenario.buses:
        for load in bus.loads:
            for t in hours:
                for r, seg in enumerate(load.segments[t - 1], start=1):
                    if r == 1:
                        continue
                    qty = x[cols.column("dx", bus.bus_id, load.load_id, r, t)]
                    if qty > TOL_QTY and prices.dlmp[(bus.bus_id, t)] > seg.bid + TOL_PRICE:
                        viols.append(f"{load.load_id} r{r} t{t}: "
                                     f"{prices.dlmp[(bus.bus_id, t)]:.4f} > {seg.bid}")
    checks.append(PropertyCheck(
        name="buyer_rationality", passed=not viols, hard=True,
        violations=tuple(viols[:20]),
        detail=f"{len(viols)} served responsive segment-hours above bid"))

    # stationarity of the upstream draw: dlmp = LMP - gamma + cap_dual
    # wherever energy is drawn
    viols = []
    gamma = scenario.gamma
    for bus in scenario.buses:
        for t in hours:
            qty = x[cols.column("s", bus.bus_id, t=t)]
            if qty <= TOL_QTY:
                continue
            want = prices.lmp[t - 1] - gamma + prices.cap_dual[t - 1]
            got = prices.dlmp[(bus.bus_id, t)]
            if abs(got - want) > TOL_CS:
                viols.append(f"{bus.bus_id} t{t}: dlmp {got:.8f} != "
                             f"lmp-gamma+cap {want:.8f}")
    checks.append(PropertyCheck(
        name="wsm_price_identity", passed=not viols, hard=True,
        violations=tuple(viols[:20]),
        detail="dlmp = LMP - gamma + cap_dual at every bus-hour with draw > 0"))

    # marginal upstream hours price at LMP - gamma exactly
    viols = []
    for bus in scenario.buses:
        for t in hours:
            qty = x[cols.column("s", bus.bus_id, t=t)]
            if qty <= TOL_QTY or prices.cap_dual[t - 1] > TOL_CS:
                continue
            want = prices.lmp[t - 1] - gamma
            got = prices.dlmp[(bus.bus_id, t)]
            if abs(got - want) > TOL_CS:
                viols.append(f"{bus.bus_id} t{t}: dlmp {got:.8f} != {want:.8f}")
    checks.append(PropertyCheck(
        name="wsm_marginality", passed=not viols, hard=True,
        violations=tuple(viols[:20]),
        detail="cap slack + positive draw pins dlmp to LMP - gamma"))

    dev_ok = settlement.deviation >= -TOL_QTY
    checks.append(PropertyCheck(
        name="deviation_nonnegative", passed=dev_ok, hard=True,
        detail=f"deviation {settlement.deviation:.6f} MWh",
        violations=() if dev_ok else (f"deviation={settlement.deviation:.6f}",)))

    cap_ok = all(v >= -1e-7 for v in prices.cap_dual)
    checks.append(PropertyCheck(
        name="cap_dual_sign", passed=cap_ok, hard=True,
        violations=tuple(f"t{t + 1}: {v:.3e}" for t, v in enumerate(prices.cap_dual)
                         if v < -1e-7),
        detail="hourly cap duals are non-negative"))

    # committed units can lose money at these prices (no make-whole uplift);
    # reported per unit, never a failure
    losers = []
    for bus in scenario.buses:
        for gen in bus.generators:
            energy_cost = math.fsum(
                seg.cost * x[cols.column("px", bus.bus_id, gen.gen_id, q, t)]
                for q, seg in enumerate(gen.segments, start=1) for t in hours)
            switch_cost = math.fsum(
                gen.startup_cost * x[cols.column("y", bus.bus_id, gen.gen_id, t=t)]
                + gen.shutdown_cost * x[cols.column("z", bus.bus_id, gen.gen_id, t=t)]
                for t in hours)
            profit = settlement.gen_revenues[gen.gen_id] - energy_cost - switch_cost
            if profit < -EPS_MONEY:
                losers.append(f"{gen.gen_id}: {profit:.4f}")
    checks.append(PropertyCheck(
        name="unit_profitability", passed=True, hard=False,
        violations=tuple(losers),
        detail="informational: units losing money absent make-whole payments"))

    report = PropertyReport(checks=tuple(checks))
    for c in report.checks:
        if not c.passed:
            logger.warning("property %s failed: %s", c.name, c.violations[:3])
    return report
