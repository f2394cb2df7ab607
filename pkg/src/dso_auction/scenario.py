"""Auction input data: scenario types, validation, and JSON (de)serialization.

Unit conventions used throughout the package:
- power in MW, energy in MWh (timeslots are one hour, so the two interchange)
- all prices and bids in $/MWh, lump costs in $
- timeslots are 1-based in files, reports and row tags

All types here are immutable after construction and safe to share across
threads; the operations are pure functions.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterator


class ScenarioParseError(ValueError):
    """Raised when a scenario file is not well-formed (JSON or schema)."""


class ScenarioValidationError(ValueError):
    """Raised when a parsed scenario violates a data invariant."""

    def __init__(self, violations: list["Violation"]):
        self.violations = violations
        lines = "; ".join(str(v) for v in violations[:8])
        more = "" if len(violations) <= 8 else f" (+{len(violations) - 8} more)"
        super().__init__(f"{len(violations)} validation violation(s): {lines}{more}")


@dataclass(frozen=True)
class Violation:
    """One violated invariant, pointing at the offending entity and field."""

    path: str       # e.g. "buses[1].bss[0]"
    field: str      # e.g. "soc_min"
    message: str

    def __str__(self) -> str:
        return f"{self.path}.{self.field}: {self.message}"


@dataclass(frozen=True)
class GenSegment:
    px_max: float   # MW, segment capacity
    cost: float     # $/MWh, segment offer price


@dataclass(frozen=True)
class LoadSegment:
    dx_max: float   # MWh, segment size at this hour
    bid: float      # $/MWh; ignored for the first (fixed) segment


@dataclass(frozen=True)
class GeneratorSpec:
    """Dispatchable unit offer: stepwise energy segments plus commitment data."""

    gen_id: str
    segments: tuple[GenSegment, ...]
    p_min: float
    p_max: float
    ramp_up: float
    ramp_down: float
    startup_cost: float
    shutdown_cost: float
    min_up_time: int
    min_down_time: int
    initial_committed: bool = False
    initial_output: float = 0.0
    initial_up_count: int = 0
    initial_down_count: int = 0


@dataclass(frozen=True)
class BssSpec:
    """Storage unit offer. Units only discharge into the market; recharging
    happens off-model (from the unit's own renewable source), so the state of
    charge is non-increasing over the horizon."""

    bss_id: str
    soc_min: float
    soc_max: float
    e_min: float
    e_max: float
    min_discharge_time: int
    min_charge_time: int
    sell_price: float
    initial_soc: float
    initial_discharging: bool = False
    initial_discharge_count: int = 0
    initial_charge_count: int = 0


@dataclass(frozen=True)
class LoadSpec:
    """Aggregated load bid: per-hour segment lists where segment 1 is the
    fixed (must-serve, bid-less) block and the rest are price-responsive."""

    load_id: str
    segments: tuple[tuple[LoadSegment, ...], ...]   # [t][r]
    d_min: float
    d_max: float


@dataclass(frozen=True)
class BusData:
    bus_id: str
    generators: tuple[GeneratorSpec, ...] = ()
    bss_units: tuple[BssSpec, ...] = ()
    loads: tuple[LoadSpec, ...] = ()


@dataclass(frozen=True)
class WsmCommitment:
    """Upstream commitment: hourly energy granted to the operator and its price."""

    supply: tuple[float, ...]   # MWh per hour
    lmp: tuple[float, ...]      # $/MWh per hour


@dataclass(frozen=True)
class Scenario:
    horizon: int
    buses: tuple[BusData, ...]
    wsm: WsmCommitment
    gamma: float = 0.0          # $/MWh penalty on undrawn committed energy
    scenario_id: str = ""

    def iter_generators(self) -> Iterator[tuple[BusData, GeneratorSpec]]:
        for bus in self.buses:
            for gen in bus.generators:
                yield bus, gen

    def iter_bss(self) -> Iterator[tuple[BusData, BssSpec]]:
        for bus in self.buses:
            for unit in bus.bss_units:
                yield bus, unit

    def iter_loads(self) -> Iterator[tuple[BusData, LoadSpec]]:
        for bus in self.buses:
            for load in bus.loads:
                yield bus, load


# ---------------------------------------------------------------------------
# validation

def _finite(x: float) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)


def validate_scenario(s: Scenario) -> list[Violation]:
    """Check every data invariant; returns all violations (empty list = valid).

    Pure function: never mutates and never raises on bad data.
    """
    out: list[Violation] = []
    add = lambda path, fld, msg: out.append(Violation(path, fld, msg))  # noqa: E731

    if s.horizon < 1:
        add("scenario", "horizon", f"must be >= 1, got {s.horizon}")
    if not _finite(s.gamma) or s.gamma < 0:
        add("scenario", "gamma", f"must be a finite value >= 0, got {s.gamma}")

    if len(s.wsm.supply) != s.horizon:
        add("wsm", "supply", f"expected {s.horizon} entries, got {len(s.wsm.supply)}")
    if len(s.wsm.lmp) != s.horizon:
        add("wsm", "lmp", f"expected {s.horizon} entries, got {len(s.wsm.lmp)}")
    for t, v in enumerate(s.wsm.supply):
        if not _finite(v) or v < 0:
            add("wsm", f"supply[{t}]", f"must be finite and >= 0, got {v}")
    for t, v in enumerate(s.wsm.lmp):
        if not _finite(v):
            add("wsm", f"lmp[{t}]", f"must be finite, got {v}")

    seen: dict[str, set[str]] = {"bus": set(), "generator": set(), "bss": set(), "load": set()}

    def check_unique(kind: str, ident: str, path: str) -> None:
        if ident in seen[kind]:
            add(path, "id", f"duplicate {kind} id {ident!r}")
        seen[kind].add(ident)

    for bi, bus in enumerate(s.buses):
        bpath = f"buses[{bi}]"
        check_unique("bus", bus.bus_id, bpath)
        for gi, gen in enumerate(bus.generators):
            _validate_generator(gen, f"{bpath}.generators[{gi}]", add)
            check_unique("generator", gen.gen_id, f"{bpath}.generators[{gi}]")
        for ui, unit in enumerate(bus.bss_units):
            _validate_bss(unit, f"{bpath}.bss[{ui}]", add)
            check_unique("bss", unit.bss_id, f"{bpath}.bss[{ui}]")
        for li, load in enumerate(bus.loads):
            _validate_load(load, s.horizon, f"{bpath}.loads[{li}]", add)
            check_unique("load", load.load_id, f"{bpath}.loads[{li}]")

    return out


def _validate_generator(g: GeneratorSpec, path: str, add) -> None:
    if len(g.segments) < 1:
        add(path, "segments", "at least one segment required")
    for qi, seg in enumerate(g.segments):
        if not _finite(seg.px_max) or seg.px_max < 0:
            add(path, f"segments[{qi}].px_max", f"must be >= 0, got {seg.px_max}")
        if not _finite(seg.cost) or seg.cost < 0:
            add(path, f"segments[{qi}].cost", f"must be >= 0, got {seg.cost}")
    seg_total = sum(seg.px_max for seg in g.segments)
    if not _finite(g.p_min) or g.p_min < 0:
        add(path, "p_min", f"must be >= 0, got {g.p_min}")
    elif g.p_max < g.p_min:
        add(path, "p_max", f"p_max {g.p_max} < p_min {g.p_min}")
    if _finite(g.p_max) and g.p_max > seg_total + 1e-9:
        add(path, "p_max", f"p_max {g.p_max} exceeds segment total {seg_total}")
    for fld in ("ramp_up", "ramp_down", "startup_cost", "shutdown_cost"):
        v = getattr(g, fld)
        if not _finite(v) or v < 0:
            add(path, fld, f"must be >= 0, got {v}")
    for fld in ("min_up_time", "min_down_time"):
        v = getattr(g, fld)
        if not isinstance(v, int) or v < 0:
            add(path, fld, f"must be an integer >= 0, got {v}")
    up, down = g.initial_up_count, g.initial_down_count
    if not isinstance(up, int) or not isinstance(down, int) or up < 0 or down < 0:
        add(path, "initial_up_count", f"counters must be integers >= 0, got {up}/{down}")
    elif (up > 0) == (down > 0):
        add(path, "initial_up_count",
            f"exactly one of initial_up_count/initial_down_count must be positive, got {up}/{down}")
    elif g.initial_committed != (up > 0):
        add(path, "initial_committed",
            f"inconsistent with counters (committed={g.initial_committed}, up={up}, down={down})")
    if not _finite(g.initial_output) or g.initial_output < 0:
        add(path, "initial_output", f"must be >= 0, got {g.initial_output}")
    elif not g.initial_committed and g.initial_output > 0:
        add(path, "initial_output", "must be 0 for a unit that starts decommitted")
    elif g.initial_committed and _finite(g.p_max) and g.initial_output > g.p_max + 1e-9:
        add(path, "initial_output", f"{g.initial_output} exceeds p_max {g.p_max}")


def _validate_bss(b: BssSpec, path: str, add) -> None:
    if not _finite(b.soc_min) or b.soc_min < 0:
        add(path, "soc_min", f"must be >= 0, got {b.soc_min}")
    elif b.soc_max < b.soc_min:
        add(path, "soc_max", f"soc_max {b.soc_max} < soc_min {b.soc_min}")
    elif not (b.soc_min <= b.initial_soc <= b.soc_max):
        add(path, "initial_soc",
            f"{b.initial_soc} outside [{b.soc_min}, {b.soc_max}]")
    if not _finite(b.e_min) or b.e_min < 0:
        add(path, "e_min", f"must be >= 0, got {b.e_min}")
    elif b.e_max < b.e_min:
        add(path, "e_max", f"e_max {b.e_max} < e_min {b.e_min}")
    for fld in ("min_discharge_time", "min_charge_time"):
        v = getattr(b, fld)
        if not isinstance(v, int) or v < 1:
            add(path, fld, f"must be an integer >= 1, got {v}")
    if not _finite(b.sell_price) or b.sell_price < 0:
        add(path, "sell_price", f"must be >= 0, got {b.sell_price}")
    dc, cc = b.initial_discharge_count, b.initial_charge_count
    if not isinstance(dc, int) or not isinstance(cc, int) or dc < 0 or cc < 0:
        add(path, "initial_discharge_count", f"counters must be integers >= 0, got {dc}/{cc}")
    elif (dc > 0) == (cc > 0):
        add(path, "initial_discharge_count",
            f"exactly one of initial_discharge_count/initial_charge_count must be positive, got {dc}/{cc}")
    elif b.initial_discharging != (dc > 0):
        add(path, "initial_discharging",
            f"inconsistent with counters (discharging={b.initial_discharging}, dc={dc}, cc={cc})")


def _validate_load(ld: LoadSpec, horizon: int, path: str, add) -> None:
    if len(ld.segments) != horizon:
        add(path, "segments", f"expected {horizon} per-hour segment lists, got {len(ld.segments)}")
        return
    for t, segs in enumerate(ld.segments):
        if len(segs) < 1:
            add(path, f"segments[{t}]", "at least one segment required at every hour")
            continue
        for ri, seg in enumerate(segs):
            if not _finite(seg.dx_max) or seg.dx_max < 0:
                add(path, f"segments[{t}][{ri}].dx_max", f"must be >= 0, got {seg.dx_max}")
            if not _finite(seg.bid) or seg.bid < 0:
                add(path, f"segments[{t}][{ri}].bid", f"must be >= 0, got {seg.bid}")
    if not _finite(ld.d_min) or not _finite(ld.d_max):
        add(path, "d_min", f"demand bounds must be finite, got {ld.d_min}/{ld.d_max}")
        return
    fixed_max = max(segs[0].dx_max for segs in ld.segments if segs)
    if ld.d_min < fixed_max - 1e-12:
        add(path, "d_min", f"d_min {ld.d_min} below fixed segment {fixed_max}")
    if ld.d_max < ld.d_min:
        add(path, "d_max", f"d_max {ld.d_max} < d_min {ld.d_min}")


# ---------------------------------------------------------------------------
# JSON schema (documented in README.md)

_SCENARIO_KEYS = {"horizon", "wsm", "buses", "gamma", "id"}
_WSM_KEYS = {"supply", "lmp"}
_BUS_KEYS = {"id", "generators", "bss", "loads"}
_GEN_KEYS = {
    "id", "segments", "p_min", "p_max", "ramp_up", "ramp_down",
    "startup_cost", "shutdown_cost", "min_up_time", "min_down_time",
    "initial_committed", "initial_output", "initial_up_count", "initial_down_count",
}
_GEN_SEG_KEYS = {"px_max", "cost"}
_BSS_KEYS = {
    "id", "soc_min", "soc_max", "e_min", "e_max",
    "min_discharge_time", "min_charge_time", "sell_price", "initial_soc",
    "initial_discharging", "initial_discharge_count", "initial_charge_count",
}
_LOAD_KEYS = {"id", "segments", "d_min", "d_max"}
_LOAD_SEG_KEYS = {"dx_max", "bid"}


def _require_keys(obj: Any, allowed: set[str], required: set[str], where: str) -> None:
    if not isinstance(obj, dict):
        raise ScenarioParseError(f"{where}: expected an object, got {type(obj).__name__}")
    unknown = set(obj) - allowed
    if unknown:
        raise ScenarioParseError(f"{where}: unknown field(s) {sorted(unknown)}")
    missing = required - set(obj)
    if missing:
        raise ScenarioParseError(f"{where}: missing field(s) {sorted(missing)}")


def _num(obj: dict, key: str, where: str) -> float:
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ScenarioParseError(f"{where}.{key}: expected a number, got {v!r}")
    return float(v)


def _intval(obj: dict, key: str, where: str, default: int | None = None) -> int:
    if key not in obj:
        if default is None:
            raise ScenarioParseError(f"{where}.{key}: missing")
        return default
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, int):
        raise ScenarioParseError(f"{where}.{key}: expected an integer, got {v!r}")
    return v


def _boolval(obj: dict, key: str, where: str, default: bool) -> bool:
    if key not in obj:
        return default
    v = obj[key]
    if not isinstance(v, bool):
        raise ScenarioParseError(f"{where}.{key}: expected a boolean, got {v!r}")
    return v


def _reject_const(name: str) -> float:
    raise ScenarioParseError(f"non-finite number {name!r} not accepted")


def scenario_from_dict(doc: Any) -> Scenario:
    """Build a Scenario from a parsed JSON document (strict: unknown fields rejected)."""
    _require_keys(doc, _SCENARIO_KEYS, {"horizon", "wsm", "buses"}, "scenario")
    horizon = _intval(doc, "horizon", "scenario")

    wsm_obj = doc["wsm"]
    _require_keys(wsm_obj, _WSM_KEYS, _WSM_KEYS, "wsm")
    for key in ("supply", "lmp"):
        if not isinstance(wsm_obj[key], list):
            raise ScenarioParseError(f"wsm.{key}: expected an array")
    wsm = WsmCommitment(
        supply=tuple(float(v) for v in wsm_obj["supply"]),
        lmp=tuple(float(v) for v in wsm_obj["lmp"]),
    )

    if not isinstance(doc["buses"], list):
        raise ScenarioParseError("buses: expected an array")
    buses = []
    for bi, bus_obj in enumerate(doc["buses"]):
        where = f"buses[{bi}]"
        _require_keys(bus_obj, _BUS_KEYS, {"id"}, where)
        gens = tuple(
            _gen_from_dict(g, f"{where}.generators[{gi}]")
            for gi, g in enumerate(bus_obj.get("generators", []))
        )
        bss = tuple(
            _bss_from_dict(b, f"{where}.bss[{ui}]")
            for ui, b in enumerate(bus_obj.get("bss", []))
        )
        loads = tuple(
            _load_from_dict(ld, f"{where}.loads[{li}]")
            for li, ld in enumerate(bus_obj.get("loads", []))
        )
        buses.append(BusData(bus_id=str(bus_obj["id"]), generators=gens,
                             bss_units=bss, loads=loads))

    scenario = Scenario(
        horizon=horizon,
        buses=tuple(buses),
        wsm=wsm,
        gamma=_num(doc, "gamma", "scenario") if "gamma" in doc else 0.0,
        scenario_id=str(doc.get("id", "")),
    )
    violations = validate_scenario(scenario)
    if violations:
        raise ScenarioValidationError(violations)
    return scenario


def _gen_from_dict(obj: Any, where: str) -> GeneratorSpec:
    _require_keys(obj, _GEN_KEYS, {"id", "segments", "p_max", "ramp_up", "ramp_down",
                                   "startup_cost", "shutdown_cost",
                                   "min_up_time", "min_down_time"}, where)
    segs = []
    for qi, seg in enumerate(obj["segments"]):
        seg_where = f"{where}.segments[{qi}]"
        _require_keys(seg, _GEN_SEG_KEYS, _GEN_SEG_KEYS, seg_where)
        segs.append(GenSegment(px_max=_num(seg, "px_max", seg_where),
                               cost=_num(seg, "cost", seg_where)))
    return GeneratorSpec(
        gen_id=str(obj["id"]),
        segments=tuple(segs),
        p_min=_num(obj, "p_min", where) if "p_min" in obj else 0.0,
        p_max=_num(obj, "p_max", where),
        ramp_up=_num(obj, "ramp_up", where),
        ramp_down=_num(obj, "ramp_down", where),
        startup_cost=_num(obj, "startup_cost", where),
        shutdown_cost=_num(obj, "shutdown_cost", where),
        min_up_time=_intval(obj, "min_up_time", where),
        min_down_time=_intval(obj, "min_down_time", where),
        initial_committed=_boolval(obj, "initial_committed", where, False),
        initial_output=_num(obj, "initial_output", where) if "initial_output" in obj else 0.0,
        initial_up_count=_intval(obj, "initial_up_count", where, 0),
        initial_down_count=_intval(obj, "initial_down_count", where,
                                   0 if _boolval(obj, "initial_committed", where, False)
                                   else _intval(obj, "min_down_time", where)),
    )


def _bss_from_dict(obj: Any, where: str) -> BssSpec:
    _require_keys(obj, _BSS_KEYS, {"id", "soc_min", "soc_max", "e_min", "e_max",
                                   "min_discharge_time", "min_charge_time",
                                   "sell_price", "initial_soc"}, where)
    return BssSpec(
        bss_id=str(obj["id"]),
        soc_min=_num(obj, "soc_min", where),
        soc_max=_num(obj, "soc_max", where),
        e_min=_num(obj, "e_min", where),
        e_max=_num(obj, "e_max", where),
        min_discharge_time=_intval(obj, "min_discharge_time", where),
        min_charge_time=_intval(obj, "min_charge_time", where),
        sell_price=_num(obj, "sell_price", where),
        initial_soc=_num(obj, "initial_soc", where),
        initial_discharging=_boolval(obj, "initial_discharging", where, False),
        initial_discharge_count=_intval(obj, "initial_discharge_count", where, 0),
        initial_charge_count=_intval(obj, "initial_charge_count", where,
                                     0 if _boolval(obj, "initial_discharging", where, False)
                                     else _intval(obj, "min_charge_time", where)),
    )


def _load_from_dict(obj: Any, where: str) -> LoadSpec:
    _require_keys(obj, _LOAD_KEYS, _LOAD_KEYS, where)
    if not isinstance(obj["segments"], list):
        raise ScenarioParseError(f"{where}.segments: expected an array of per-hour segment lists")
    hours = []
    for t, segs in enumerate(obj["segments"]):
        if not isinstance(segs, list):
            raise ScenarioParseError(f"{where}.segments[{t}]: expected an array")
        row = []
        for ri, seg in enumerate(segs):
            seg_where = f"{where}.segments[{t}][{ri}]"
            _require_keys(seg, _LOAD_SEG_KEYS, _LOAD_SEG_KEYS, seg_where)
            row.append(LoadSegment(dx_max=_num(seg, "dx_max", seg_where),
                                   bid=_num(seg, "bid", seg_where)))
        hours.append(tuple(row))
    return LoadSpec(
        load_id=str(obj["id"]),
        segments=tuple(hours),
        d_min=_num(obj, "d_min", where),
        d_max=_num(obj, "d_max", where),
    )


def scenario_to_dict(s: Scenario) -> dict:
    """Inverse of scenario_from_dict; load(save(s)) == s field by field."""
    return {
        "id": s.scenario_id,
        "horizon": s.horizon,
        "gamma": s.gamma,
        "wsm": {"supply": list(s.wsm.supply), "lmp": list(s.wsm.lmp)},
        "buses": [
            {
                "id": bus.bus_id,
                "generators": [
                    {
                        "id": g.gen_id,
                        "segments": [{"px_max": seg.px_max, "cost": seg.cost}
                                     for seg in g.segments],
                        "p_min": g.p_min,
                        "p_max": g.p_max,
                        "ramp_up": g.ramp_up,
                        "ramp_down": g.ramp_down,
                        "startup_cost": g.startup_cost,
                        "shutdown_cost": g.shutdown_cost,
                        "min_up_time": g.min_up_time,
                        "min_down_time": g.min_down_time,
                        "initial_committed": g.initial_committed,
                        "initial_output": g.initial_output,
                        "initial_up_count": g.initial_up_count,
                        "initial_down_count": g.initial_down_count,
                    }
                    for g in bus.generators
                ],
                "bss": [
                    {
                        "id": b.bss_id,
                        "soc_min": b.soc_min,
                        "soc_max": b.soc_max,
                        "e_min": b.e_min,
                        "e_max": b.e_max,
                        "min_discharge_time": b.min_discharge_time,
                        "min_charge_time": b.min_charge_time,
                        "sell_price": b.sell_price,
                        "initial_soc": b.initial_soc,
                        "initial_discharging": b.initial_discharging,
                        "initial_discharge_count": b.initial_discharge_count,
                        "initial_charge_count": b.initial_charge_count,
                    }
                    for b in bus.bss_units
                ],
                "loads": [
                    {
                        "id": ld.load_id,
                        "d_min": ld.d_min,
                        "d_max": ld.d_max,
                        "segments": [[{"dx_max": seg.dx_max, "bid": seg.bid}
                                      for seg in hour] for hour in ld.segments],
                    }
                    for ld in bus.loads
                ],
            }
            for bus in s.buses
        ],
    }


def load_scenario(path: str | Path) -> Scenario:
    """Load and validate a scenario file. Raises ScenarioParseError on malformed
    input and ScenarioValidationError when an invariant is violated."""
    raw = Path(path).read_text(encoding="utf-8")
    try:
        doc = json.loads(raw, parse_constant=_reject_const)
    except json.JSONDecodeError as exc:
        raise ScenarioParseError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    return scenario_from_dict(doc)


def save_scenario(s: Scenario, path: str | Path) -> None:
    Path(path).write_text(json.dumps(scenario_to_dict(s), indent=1) + "\n", encoding="utf-8")


def scale_lmp(s: Scenario, factor: float) -> Scenario:
    """Return a copy of the scenario with every hourly price multiplied by
    `factor` (> 0); all other data unchanged."""
    if not _finite(factor) or factor <= 0:
        raise ValueError(f"scale factor must be positive and finite, got {factor}")
    scaled = WsmCommitment(supply=s.wsm.supply,
                           lmp=tuple(v * factor for v in s.wsm.lmp))
    return dataclasses.replace(s, wsm=scaled)


def with_gamma(s: Scenario, gamma: float) -> Scenario:
    """Return a copy with a different deviation penalty weight."""
    if not _finite(gamma) or gamma < 0:
        raise ValueError(f"gamma must be finite and >= 0, got {gamma}")
    return dataclasses.replace(s, gamma=gamma)


def bundled_scenario_path() -> Path:
    """Path of the packaged day-ahead scenario (4 buses, 10 generators,
    4 storage units, 24 hours, synthetic load bids)."""
    return Path(__file__).parent / "data" / "tables_1_2_3.json"
