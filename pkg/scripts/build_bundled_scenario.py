#!/usr/bin/env python3
"""Regenerate the packaged 4-bus / 24-hour scenario file.

Generator and storage offers plus the hourly upstream commitment and price
series are fixed published figures. The load side is synthetic (the original
study does not publish load bids): each bus carries 2-4 aggregated loads with
a constant must-serve block and two price-responsive segments whose sizes
track the commitment shape and whose bids track the price shape. The
constants below are hand-picked, deterministic, and documented in README.md.

Run from the repository root:  python3 scripts/build_bundled_scenario.py
"""

from __future__ import annotations

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from dso_auction.scenario import (  # noqa: E402
    BssSpec, BusData, GenSegment, GeneratorSpec, LoadSegment, LoadSpec,
    Scenario, WsmCommitment, save_scenario, validate_scenario,
)

LMP = [22.07, 24.83, 24.83, 23.45, 24.83, 24.83,
       26.21, 27.59, 28.97, 30.35, 33.11, 30.35,
       27.59, 26.21, 26.48, 25.38, 27.04, 30.35,
       31.73, 34.49, 31.73, 28.97, 26.21, 23.45]

SUPPLY = [29.04, 32.67, 32.67, 30.855, 32.67, 32.67,
          34.485, 36.3, 38.115, 39.93, 43.56, 39.93,
          36.3, 34.485, 34.848, 33.396, 35.574, 39.93,
          41.475, 45.375, 41.745, 38.115, 34.485, 30.855]

# (bus, unit) -> three (capacity MW, price $/MWh) offer segments,
# ramp up/down MW/h, startup/shutdown cost $
GENERATORS = {
    "m1": [
        ("g1", [(1.5, 36.7), (2.5, 39.3), (1.0, 42.0)], 2.5, 2.5, 75.0, 60.0),
        ("g2", [(1.6, 34.8), (2.0, 37.8), (1.4, 40.5)], 2.5, 2.5, 60.0, 60.0),
    ],
    "m2": [
        ("g1", [(1.5, 30.0), (1.7, 33.0), (1.8, 39.0)], 2.5, 2.5, 45.0, 54.0),
        ("g2", [(1.4, 36.9), (1.8, 39.6), (1.8, 43.8)], 2.5, 2.5, 51.0, 45.0),
        ("g3", [(1.0, 34.5), (1.5, 36.0), (0.5, 39.6)], 3.0, 3.0, 84.0, 45.0),
    ],
    "m3": [
        ("g1", [(1.2, 29.4), (1.8, 30.6), (2.0, 34.5)], 2.5, 2.5, 0.0, 0.0),
        ("g2", [(1.8, 32.1), (1.45, 32.6), (1.75, 34.5)], 2.5, 2.5, 45.0, 51.0),
        ("g3", [(0.8, 35.7), (1.7, 37.5), (0.5, 40.5)], 3.0, 3.0, 60.0, 48.0),
        ("g4", [(0.95, 36.3), (1.1, 37.5), (0.95, 40.5)], 3.0, 3.0, 0.0, 0.0),
    ],
    "m4": [
        ("g1", [(1.9, 37.5), (1.7, 41.4), (1.4, 44.5)], 2.5, 2.5, 10.0, 10.0),
    ],
}

# (bus, unit) -> soc bounds MWh, hourly output bounds MWh, min discharge /
# charge run h, sell price $/MWh
BSS = {
    "m1": [("b1", 1.0, 10.0, 0.4, 2.0, 3, 6, 35.0)],
    "m2": [("b1", 1.0, 8.0, 0.4, 2.0, 3, 6, 33.0),
           ("b2", 1.0, 10.0, 0.4, 2.0, 3, 6, 36.5)],
    "m3": [],
    "m4": [("b1", 1.0, 8.0, 0.4, 2.0, 2, 6, 34.0)],
}

# synthetic loads. Each load: a constant must-serve block plus two
# responsive segments. Responsive bids jump to a premium level inside the
# evening window (hours 18-22) and otherwise sit in a narrow band that (a)
# stays clear of every storage offer (33 / 34 / 35 / 36.5 $/MWh) and (b)
# keeps the hours flanking the window at or above the costliest
# peak-chasing generation segment (32.1 $/MWh), so ramp tails into and out
# of the window never sell below cost.
# (bus, load, fixed MWh,
#  c2, seg2 off-peak bid, seg2 premium bid, c3, seg3 off-peak bid, seg3 premium bid)
PEAK_HOURS = frozenset({19, 20, 21})
SHOULDER_HOURS = frozenset({17, 18, 22, 23})
LOADS = [
    ("m1", "l1", 2.5, 1.3, 31.85, 42.4, 1.0, 29.9, 39.4),
    ("m1", "l2", 2.4, 1.2, 31.70, 41.2, 0.9, 29.8, 38.8),
    ("m1", "l3", 2.1, 1.0, 31.45, 39.6, 0.8, 29.5, 38.5),
    ("m2", "l1", 2.2, 1.4, 31.90, 44.6, 1.1, 29.9, 40.2),
    ("m2", "l2", 2.1, 1.1, 31.60, 40.9, 0.8, 29.7, 38.6),
    ("m2", "l3", 1.9, 1.2, 31.35, 39.9, 0.9, 29.4, 38.2),
    ("m2", "l4", 1.9, 1.0, 31.80, 43.3, 0.7, 29.8, 39.8),
    ("m3", "l1", 2.3, 1.5, 31.20, 38.3, 1.2, 29.2, 37.9),
    ("m3", "l2", 1.9, 1.3, 31.10, 38.0, 1.0, 29.2, 37.6),
    ("m4", "l1", 2.0, 1.4, 31.85, 44.1, 1.1, 29.9, 40.6),
    ("m4", "l2", 1.9, 1.1, 31.55, 41.5, 0.8, 29.6, 38.4),
    ("m4", "l3", 1.8, 1.0, 31.30, 38.9, 0.7, 29.4, 38.1),
]


def build() -> Scenario:
    horizon = 24
    lmp_lo, lmp_hi = min(LMP), max(LMP)
    sup_lo, sup_hi = min(SUPPLY), max(SUPPLY)
    price_shape = [(v - lmp_lo) / (lmp_hi - lmp_lo) for v in LMP]
    demand_shape = [(v - sup_lo) / (sup_hi - sup_lo) for v in SUPPLY]

    loads_by_bus: dict[str, list[LoadSpec]] = {b: [] for b in GENERATORS}
    for bus, name, fixed, c2, lo2, hi2, c3, lo3, hi3 in LOADS:
        hours = []
        for t in range(horizon):
            peak = (t + 1) in PEAK_HOURS
            shoulder = (t + 1) in SHOULDER_HOURS
            # deep premium demand inside the window (the window then clears
            # on load bids, above every storage offer); the shoulder band is
            # deep enough to absorb ramp tails without the price dropping
            # out of it
            cap2 = c2 * (2.6 if peak else 1.4 if shoulder else 1.0)
            cap3 = c3 * (0.9 + 0.2 * demand_shape[t])
            if peak:
                bid2, bid3 = hi2, hi3
            elif shoulder:
                bid2 = 32.62 + 0.20 * (lo2 - 31.10) / 0.80
                bid3 = min(30.5, lo3 + 0.3 * price_shape[t] + 0.4)
            else:
                bid2 = min(32.35, lo2 + 0.45 * price_shape[t])
                bid3 = min(30.5, lo3 + 0.3 * price_shape[t])
            seg2 = LoadSegment(dx_max=round(cap2, 3), bid=round(bid2, 2))
            seg3 = LoadSegment(dx_max=round(cap3, 3), bid=round(bid3, 2))
            hours.append((LoadSegment(dx_max=fixed, bid=0.0), seg2, seg3))
        d_max = fixed + max(h[1].dx_max + h[2].dx_max for h in hours)
        loads_by_bus[bus].append(LoadSpec(
            load_id=f"{bus}{name}", segments=tuple(hours),
            d_min=fixed, d_max=round(d_max, 3)))

    buses = []
    for bus_id in ("m1", "m2", "m3", "m4"):
        gens = tuple(
            GeneratorSpec(
                gen_id=f"{bus_id}{name}",
                segments=tuple(GenSegment(px_max=c, cost=p) for c, p in segs),
                p_min=0.0,
                p_max=round(sum(c for c, _ in segs), 6),
                ramp_up=ru, ramp_down=rd,
                startup_cost=stc, shutdown_cost=sdc,
                min_up_time=2, min_down_time=2,
                initial_committed=False, initial_output=0.0,
                initial_up_count=0, initial_down_count=2,
            )
            for name, segs, ru, rd, stc, sdc in GENERATORS[bus_id]
        )
        storage = tuple(
            BssSpec(
                bss_id=f"{bus_id}{name}",
                soc_min=cmin, soc_max=cmax, e_min=emin, e_max=emax,
                min_discharge_time=mdt, min_charge_time=mct,
                sell_price=price, initial_soc=cmax,
                initial_discharging=False,
                initial_discharge_count=0, initial_charge_count=mct,
            )
            for name, cmin, cmax, emin, emax, mdt, mct, price in BSS[bus_id]
        )
        buses.append(BusData(bus_id=bus_id, generators=gens,
                             bss_units=storage, loads=tuple(loads_by_bus[bus_id])))

    scenario = Scenario(
        horizon=horizon,
        buses=tuple(buses),
        wsm=WsmCommitment(supply=tuple(SUPPLY), lmp=tuple(LMP)),
        gamma=0.0,
        scenario_id="tables_1_2_3",
    )

    violations = validate_scenario(scenario)
    assert not violations, violations

    # the must-serve block alone never exceeds the hourly commitment, and the
    # full bid stack can absorb the whole commitment (zero deviation reachable)
    total_fixed = sum(ld[2] for ld in LOADS)
    for t in range(horizon):
        resp = sum(h.dx_max for _, ld in
                   ((None, ld) for b in buses for ld in b.loads)
                   for h in ld.segments[t][1:])
        assert total_fixed <= SUPPLY[t], (t, total_fixed, SUPPLY[t])
        assert total_fixed + resp >= SUPPLY[t], (t, total_fixed + resp, SUPPLY[t])

    return scenario


def main() -> None:
    out = Path(__file__).resolve().parents[1] / "src" / "dso_auction" / "data" / "tables_1_2_3.json"
    out.parent.mkdir(parents=True, exist_ok=True)
    scenario = build()
    save_scenario(scenario, out)
    n_gen = sum(len(b.generators) for b in scenario.buses)
    n_bss = sum(len(b.bss_units) for b in scenario.buses)
    n_load = sum(len(b.loads) for b in scenario.buses)
    print(f"wrote {out} ({len(scenario.buses)} buses, {n_gen} generators, "
          f"{n_bss} storage units, {n_load} loads, {scenario.horizon} hours)")


if __name__ == "__main__":
    main()
