"""Builds the welfare-maximization MILP for a scenario.

Every constraint row carries a tag (family id, bus, unit-or-load, timeslot)
so rows can be retrieved by address later (the pricing module reads the
duals of the bus balance rows, family "3", and of the hourly supply-cap
rows, family "2"). Family ids are short stable strings; two-sided families
are split into "<id>lo"/"<id>up" (or "min"/"max") halves. Timeslots in tags
are 1-based; tag timeslot 0 marks the initial-state boundary rows of the
minimum-run families.

Pure-bound restrictions (load segment sizes, total-demand and state-of-charge
windows, generation segment caps, counter non-negativity) live on the columns,
not in rows; `replay_violations` checks both.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, NamedTuple

import numpy as np
import scipy.sparse as sp

from .scenario import Scenario, validate_scenario
from .simplex import LpProblem, make_problem

CONTINUOUS = 0
BINARY = 1
INTEGER = 2

# variable kinds
_PHYSICAL = ("px", "p", "e", "s", "dx", "d", "c")
_BINARIES = ("i", "y", "z", "j", "u", "v")
_COUNTERS = ("su", "sd", "cc", "dc")


class VarKey(NamedTuple):
    kind: str
    bus: str | None = None
    unit: str | None = None
    seg: int | None = None
    t: int | None = None

    def name(self) -> str:
        parts = [self.kind]
        if self.unit is not None:
            parts.append(self.unit)
        elif self.bus is not None:
            parts.append(self.bus)
        if self.seg is not None:
            parts.append(f"q{self.seg}")
        if self.t is not None:
            parts.append(f"t{self.t}")
        return "_".join(parts)


class RowTag(NamedTuple):
    family: str            # "2".."30" variants, or "fixed_segment"
    bus: str | None
    unit: str | None       # unit or load id
    t: int                 # 1-based; 0 for initial-state boundary rows


class ModelError(ValueError):
    pass


class RowNotFoundError(KeyError):
    pass


@dataclass(frozen=True, eq=False)
class VariableIndex:
    """Bijection between symbolic variable keys and dense column indices,
    plus per-column bounds and integrality class."""

    keys: tuple[VarKey, ...]
    lower: np.ndarray
    upper: np.ndarray
    vclass: np.ndarray            # int8: CONTINUOUS / BINARY / INTEGER
    _by_key: dict = field(repr=False)

    def __len__(self) -> int:
        return len(self.keys)

    def column(self, kind: str, bus: str | None = None, unit: str | None = None,
               seg: int | None = None, t: int | None = None) -> int:
        key = VarKey(kind, bus, unit, seg, t)
        try:
            return self._by_key[key]
        except KeyError:
            raise ModelError(f"no such variable {key}") from None

    def key_of(self, col: int) -> VarKey:
        return self.keys[col]

    @property
    def binary_columns(self) -> np.ndarray:
        return np.flatnonzero(self.vclass == BINARY)

    @property
    def integer_columns(self) -> np.ndarray:
        """Columns requiring integral values (binaries included)."""
        return np.flatnonzero(self.vclass != CONTINUOUS)


@dataclass(frozen=True)
class ConstraintRow:
    coefficients: dict[int, float]
    sense: str                    # "<", ">", "="
    rhs: float
    tag: RowTag


@dataclass(frozen=True, eq=False)
class MilpModel:
    """Sparse maximization MILP with tagged rows. Immutable; `fix_binaries`
    returns a new model sharing the row structure."""

    objective: dict[int, float]
    objective_offset: float       # constant added to the column part
    rows: tuple[ConstraintRow, ...]
    columns: VariableIndex
    scenario: Scenario
    sense: str = "max"
    _tag_index: dict = field(repr=False, default_factory=dict)
    _matrix: sp.csc_matrix | None = field(repr=False, default=None)

    def __post_init__(self):
        if not self._tag_index:
            idx = {row.tag: k for k, row in enumerate(self.rows)}
            if len(idx) != len(self.rows):
                raise ModelError("duplicate row tags")
            object.__setattr__(self, "_tag_index", idx)
        if self._matrix is None:
            object.__setattr__(self, "_matrix", _rows_to_matrix(self.rows, len(self.columns)))

    @property
    def nrows(self) -> int:
        return len(self.rows)

    @property
    def ncols(self) -> int:
        return len(self.columns)

    def row_index(self, tag: RowTag) -> int:
        try:
            return self._tag_index[tag]
        except KeyError:
            raise RowNotFoundError(f"no row tagged {tag}") from None

    def row_index_of(self, family: str, bus: str | None, t: int,
                     unit: str | None = None) -> int:
        return self.row_index(RowTag(str(family), bus, unit, t))

    def objective_value(self, x: np.ndarray) -> float:
        cols = np.fromiter(self.objective.keys(), dtype=np.int64, count=len(self.objective))
        coefs = np.fromiter(self.objective.values(), dtype=np.float64, count=len(self.objective))
        return float(coefs @ x[cols]) + self.objective_offset


def _rows_to_matrix(rows: Iterable[ConstraintRow], ncols: int) -> sp.csc_matrix:
    ri, ci, vals = [], [], []
    nrows = 0
    for k, row in enumerate(rows):
        nrows += 1
        for col, val in row.coefficients.items():
            if col < 0 or col >= ncols:
                raise ModelError(f"row {row.tag} references invalid column {col}")
            ri.append(k)
            ci.append(col)
            vals.append(val)
    return sp.csc_matrix((vals, (ri, ci)), shape=(nrows, ncols))


# ---------------------------------------------------------------------------
# building

def build_model(scenario: Scenario, strict_counters: bool = False) -> MilpModel:
    """Translate a validated scenario into the auction MILP.

    With `strict_counters` the run-length counter columns are declared
    integer (they are continuous by default: integral commitment states force
    them to integral values anyway, so only commitment/state columns need to
    be branched). Kept as a differential-testing mode.
    """
    violations = validate_scenario(scenario)
    if violations:
        raise ModelError(f"invalid scenario: {violations[0]}"
                         + (f" (+{len(violations) - 1} more)" if len(violations) > 1 else ""))

    horizon = scenario.horizon
    hours = range(1, horizon + 1)

    keys: list[VarKey] = []
    lower: list[float] = []
    upper: list[float] = []
    vclass: list[int] = []

    def add_col(key: VarKey, lo: float, hi: float, cls: int) -> None:
        keys.append(key)
        lower.append(lo)
        upper.append(hi)
        vclass.append(cls)

    counter_cls = INTEGER if strict_counters else CONTINUOUS

    # big-M for the run-length counters: largest value a counter can reach
    def counter_cap(init_a: int, init_b: int) -> float:
        return float(horizon + max(init_a, init_b))

    for bus in scenario.buses:
        for gen in bus.generators:
            for q, seg in enumerate(gen.segments, start=1):
                for t in hours:
                    add_col(VarKey("px", bus.bus_id, gen.gen_id, q, t),
                            0.0, seg.px_max, CONTINUOUS)
            for t in hours:
                add_col(VarKey("p", bus.bus_id, gen.gen_id, None, t),
                        0.0, gen.p_max, CONTINUOUS)
        for unit in bus.bss_units:
            for t in hours:
                add_col(VarKey("e", bus.bus_id, unit.bss_id, None, t),
                        0.0, unit.e_max, CONTINUOUS)
            for t in hours:
                add_col(VarKey("c", bus.bus_id, unit.bss_id, None, t),
                        unit.soc_min, unit.soc_max, CONTINUOUS)
        for t in hours:
            add_col(VarKey("s", bus.bus_id, None, None, t), 0.0, np.inf, CONTINUOUS)
        for load in bus.loads:
            for t in hours:
                for r, seg in enumerate(load.segments[t - 1], start=1):
                    add_col(VarKey("dx", bus.bus_id, load.load_id, r, t),
                            0.0, seg.dx_max, CONTINUOUS)
            for t in hours:
                add_col(VarKey("d", bus.bus_id, load.load_id, None, t),
                        load.d_min, load.d_max, CONTINUOUS)

    for bus in scenario.buses:
        for gen in bus.generators:
            for kind in ("i", "y", "z"):
                for t in hours:
                    add_col(VarKey(kind, bus.bus_id, gen.gen_id, None, t),
                            0.0, 1.0, BINARY)
            cap = counter_cap(gen.initial_up_count, gen.initial_down_count)
            for kind in ("su", "sd"):
                for t in hours:
                    add_col(VarKey(kind, bus.bus_id, gen.gen_id, None, t),
                            0.0, cap, counter_cls)
        for unit in bus.bss_units:
            for kind in ("j", "u", "v"):
                for t in hours:
                    add_col(VarKey(kind, bus.bus_id, unit.bss_id, None, t),
                            0.0, 1.0, BINARY)
            cap = counter_cap(unit.initial_discharge_count, unit.initial_charge_count)
            for kind in ("cc", "dc"):
                for t in hours:
                    add_col(VarKey(kind, bus.bus_id, unit.bss_id, None, t),
                            0.0, cap, counter_cls)

    by_key = {k: i for i, k in enumerate(keys)}
    if len(by_key) != len(keys):
        raise ModelError("duplicate variable keys")
    index = VariableIndex(
        keys=tuple(keys),
        lower=np.asarray(lower), upper=np.asarray(upper),
        vclass=np.asarray(vclass, dtype=np.int8), _by_key=by_key)

    col = index.column
    rows: list[ConstraintRow] = []

    def add_row(family: str, bus_id: str | None, unit_id: str | None, t: int,
                coeffs: dict[int, float], sense: str, rhs: float) -> None:
        rows.append(ConstraintRow(coefficients=coeffs, sense=sense, rhs=rhs,
                                  tag=RowTag(family, bus_id, unit_id, t)))

    gamma = scenario.gamma
    lmp = scenario.wsm.lmp
    supply = scenario.wsm.supply

    # hourly cap on total upstream draw
    for t in hours:
        coeffs = {col("s", bus.bus_id, t=t): 1.0 for bus in scenario.buses}
        add_row("2", None, None, t, coeffs, "<", supply[t - 1])

    # per-bus hourly energy balance: generation + storage + upstream = demand
    for bus in scenario.buses:
        for t in hours:
            coeffs: dict[int, float] = {}
            for gen in bus.generators:
                coeffs[col("p", bus.bus_id, gen.gen_id, t=t)] = 1.0
            for unit in bus.bss_units:
                coeffs[col("e", bus.bus_id, unit.bss_id, t=t)] = 1.0
            coeffs[col("s", bus.bus_id, t=t)] = 1.0
            for load in bus.loads:
                coeffs[col("d", bus.bus_id, load.load_id, t=t)] = -1.0
            add_row("3", bus.bus_id, None, t, coeffs, "=", 0.0)

    # loads: total = sum of segments; first segment pinned at its size
    for bus in scenario.buses:
        for load in bus.loads:
            for t in hours:
                coeffs = {col("d", bus.bus_id, load.load_id, t=t): 1.0}
                for r in range(1, len(load.segments[t - 1]) + 1):
                    coeffs[col("dx", bus.bus_id, load.load_id, r, t)] = -1.0
                add_row("4", bus.bus_id, load.load_id, t, coeffs, "=", 0.0)
                add_row("fixed_segment", bus.bus_id, load.load_id, t,
                        {col("dx", bus.bus_id, load.load_id, 1, t): 1.0},
                        "=", load.segments[t - 1][0].dx_max)

    # generators
    for bus in scenario.buses:
        for gen in bus.generators:
            b, g = bus.bus_id, gen.gen_id
            big_m = counter_cap(gen.initial_up_count, gen.initial_down_count)
            for t in hours:
                coeffs = {col("p", b, g, t=t): 1.0}
                for q in range(1, len(gen.segments) + 1):
                    coeffs[col("px", b, g, q, t)] = -1.0
                add_row("7", b, g, t, coeffs, "=", 0.0)

                if gen.p_min > 0:
                    add_row("9min", b, g, t,
                            {col("p", b, g, t=t): 1.0, col("i", b, g, t=t): -gen.p_min},
                            ">", 0.0)
                add_row("9max", b, g, t,
                        {col("p", b, g, t=t): 1.0, col("i", b, g, t=t): -gen.p_max},
                        "<", 0.0)

                if t == 1:
                    add_row("10", b, g, t, {col("p", b, g, t=t): 1.0},
                            "<", gen.ramp_up + gen.initial_output)
                    add_row("11", b, g, t, {col("p", b, g, t=t): -1.0},
                            "<", gen.ramp_down - gen.initial_output)
                else:
                    add_row("10", b, g, t,
                            {col("p", b, g, t=t): 1.0, col("p", b, g, t=t - 1): -1.0},
                            "<", gen.ramp_up)
                    add_row("11", b, g, t,
                            {col("p", b, g, t=t): -1.0, col("p", b, g, t=t - 1): 1.0},
                            "<", gen.ramp_down)

                # committed-run counter: grows by one per committed hour, zero when off
                add_row("12", b, g, t,
                        {col("su", b, g, t=t): 1.0, col("i", b, g, t=t): -big_m},
                        "<", 0.0)
                if t == 1:
                    add_row("13up", b, g, t, {col("su", b, g, t=t): 1.0},
                            "<", 1.0 + gen.initial_up_count)
                    add_row("13lo", b, g, t,
                            {col("su", b, g, t=t): 1.0, col("i", b, g, t=t): -(big_m + 1.0)},
                            ">", gen.initial_up_count - big_m)
                else:
                    add_row("13up", b, g, t,
                            {col("su", b, g, t=t): 1.0, col("su", b, g, t=t - 1): -1.0},
                            "<", 1.0)
                    add_row("13lo", b, g, t,
                            {col("su", b, g, t=t): 1.0, col("su", b, g, t=t - 1): -1.0,
                             col("i", b, g, t=t): -(big_m + 1.0)},
                            ">", -big_m)

                # idle-run counter, mirrored
                add_row("15", b, g, t,
                        {col("sd", b, g, t=t): 1.0, col("i", b, g, t=t): big_m},
                        "<", big_m)
                if t == 1:
                    add_row("16up", b, g, t, {col("sd", b, g, t=t): 1.0},
                            "<", 1.0 + gen.initial_down_count)
                    add_row("16lo", b, g, t,
                            {col("sd", b, g, t=t): 1.0, col("i", b, g, t=t): big_m + 1.0},
                            ">", 1.0 + gen.initial_down_count)
                else:
                    add_row("16up", b, g, t,
                            {col("sd", b, g, t=t): 1.0, col("sd", b, g, t=t - 1): -1.0},
                            "<", 1.0)
                    add_row("16lo", b, g, t,
                            {col("sd", b, g, t=t): 1.0, col("sd", b, g, t=t - 1): -1.0,
                             col("i", b, g, t=t): big_m + 1.0},
                            ">", 1.0)

                # a shutdown needs enough committed hours behind it, a startup
                # enough idle hours; rows look one slot ahead
                if gen.min_up_time > 0 and t < horizon:
                    add_row("14", b, g, t,
                            {col("su", b, g, t=t): 1.0,
                             col("z", b, g, t=t + 1): -float(gen.min_up_time)},
                            ">", 0.0)
                if gen.min_down_time > 0 and t < horizon:
                    add_row("17", b, g, t,
                            {col("sd", b, g, t=t): 1.0,
                             col("y", b, g, t=t + 1): -float(gen.min_down_time)},
                            ">", 0.0)

                if t == 1:
                    add_row("18", b, g, t,
                            {col("i", b, g, t=t): 1.0, col("y", b, g, t=t): -1.0,
                             col("z", b, g, t=t): 1.0},
                            "=", 1.0 if gen.initial_committed else 0.0)
                else:
                    add_row("18", b, g, t,
                            {col("i", b, g, t=t): 1.0, col("i", b, g, t=t - 1): -1.0,
                             col("y", b, g, t=t): -1.0, col("z", b, g, t=t): 1.0},
                            "=", 0.0)
                add_row("19", b, g, t,
                        {col("y", b, g, t=t): 1.0, col("z", b, g, t=t): 1.0},
                        "<", 1.0)

            # initial-state boundary: the first startup/shutdown must respect
            # run lengths carried in from before the horizon
            if gen.min_up_time > 0:
                add_row("14", b, g, 0,
                        {col("z", b, g, t=1): -float(gen.min_up_time)},
                        ">", -float(gen.initial_up_count))
            if gen.min_down_time > 0:
                add_row("17", b, g, 0,
                        {col("y", b, g, t=1): -float(gen.min_down_time)},
                        ">", -float(gen.initial_down_count))

    # storage units
    for bus in scenario.buses:
        for unit in bus.bss_units:
            b, u = bus.bus_id, unit.bss_id
            big_m = counter_cap(unit.initial_discharge_count, unit.initial_charge_count)
            for t in hours:
                if unit.e_min > 0:
                    add_row("20min", b, u, t,
                            {col("e", b, u, t=t): 1.0, col("j", b, u, t=t): -unit.e_min},
                            ">", 0.0)
                add_row("20max", b, u, t,
                        {col("e", b, u, t=t): 1.0, col("j", b, u, t=t): -unit.e_max},
                        "<", 0.0)

                if t == 1:
                    add_row("22", b, u, t,
                            {col("c", b, u, t=t): 1.0, col("e", b, u, t=t): 1.0},
                            "=", unit.initial_soc)
                else:
                    add_row("22", b, u, t,
                            {col("c", b, u, t=t): 1.0, col("c", b, u, t=t - 1): -1.0,
                             col("e", b, u, t=t): 1.0},
                            "=", 0.0)

                add_row("23", b, u, t,
                        {col("dc", b, u, t=t): 1.0, col("j", b, u, t=t): -big_m},
                        "<", 0.0)
                if t == 1:
                    add_row("24up", b, u, t, {col("dc", b, u, t=t): 1.0},
                            "<", 1.0 + unit.initial_discharge_count)
                    add_row("24lo", b, u, t,
                            {col("dc", b, u, t=t): 1.0, col("j", b, u, t=t): -(big_m + 1.0)},
                            ">", unit.initial_discharge_count - big_m)
                else:
                    add_row("24up", b, u, t,
                            {col("dc", b, u, t=t): 1.0, col("dc", b, u, t=t - 1): -1.0},
                            "<", 1.0)
                    add_row("24lo", b, u, t,
                            {col("dc", b, u, t=t): 1.0, col("dc", b, u, t=t - 1): -1.0,
                             col("j", b, u, t=t): -(big_m + 1.0)},
                            ">", -big_m)

                add_row("26", b, u, t,
                        {col("cc", b, u, t=t): 1.0, col("j", b, u, t=t): big_m},
                        "<", big_m)
                if t == 1:
                    add_row("27up", b, u, t, {col("cc", b, u, t=t): 1.0},
                            "<", 1.0 + unit.initial_charge_count)
                    add_row("27lo", b, u, t,
                            {col("cc", b, u, t=t): 1.0, col("j", b, u, t=t): big_m + 1.0},
                            ">", 1.0 + unit.initial_charge_count)
                else:
                    add_row("27up", b, u, t,
                            {col("cc", b, u, t=t): 1.0, col("cc", b, u, t=t - 1): -1.0},
                            "<", 1.0)
                    add_row("27lo", b, u, t,
                            {col("cc", b, u, t=t): 1.0, col("cc", b, u, t=t - 1): -1.0,
                             col("j", b, u, t=t): big_m + 1.0},
                            ">", 1.0)

                if unit.min_discharge_time > 0 and t < horizon:
                    add_row("25", b, u, t,
                            {col("dc", b, u, t=t): 1.0,
                             col("u", b, u, t=t + 1): -float(unit.min_discharge_time)},
                            ">", 0.0)
                if unit.min_charge_time > 0 and t < horizon:
                    add_row("28", b, u, t,
                            {col("cc", b, u, t=t): 1.0,
                             col("v", b, u, t=t + 1): -float(unit.min_charge_time)},
                            ">", 0.0)

                if t == 1:
                    add_row("29", b, u, t,
                            {col("j", b, u, t=t): 1.0, col("v", b, u, t=t): -1.0,
                             col("u", b, u, t=t): 1.0},
                            "=", 1.0 if unit.initial_discharging else 0.0)
                else:
                    add_row("29", b, u, t,
                            {col("j", b, u, t=t): 1.0, col("j", b, u, t=t - 1): -1.0,
                             col("v", b, u, t=t): -1.0, col("u", b, u, t=t): 1.0},
                            "=", 0.0)
                add_row("30", b, u, t,
                        {col("u", b, u, t=t): 1.0, col("v", b, u, t=t): 1.0},
                        "<", 1.0)

            if unit.min_discharge_time > 0:
                add_row("25", b, u, 0,
                        {col("u", b, u, t=1): -float(unit.min_discharge_time)},
                        ">", -float(unit.initial_discharge_count))
            if unit.min_charge_time > 0:
                add_row("28", b, u, 0,
                        {col("v", b, u, t=1): -float(unit.min_charge_time)},
                        ">", -float(unit.initial_charge_count))

    # objective: responsive-load value minus generation, switching, storage
    # and upstream purchase cost; the deviation penalty contributes +gamma per
    # drawn MWh plus the constant -gamma * total commitment
    objective: dict[int, float] = {}
    for bus in scenario.buses:
        for load in bus.loads:
            for t in hours:
                for r, seg in enumerate(load.segments[t - 1], start=1):
                    if r >= 2 and seg.bid != 0.0:
                        objective[col("dx", bus.bus_id, load.load_id, r, t)] = seg.bid
        for gen in bus.generators:
            for q, seg in enumerate(gen.segments, start=1):
                if seg.cost != 0.0:
                    for t in hours:
                        objective[col("px", bus.bus_id, gen.gen_id, q, t)] = -seg.cost
            for t in hours:
                if gen.startup_cost != 0.0:
                    objective[col("y", bus.bus_id, gen.gen_id, t=t)] = -gen.startup_cost
                if gen.shutdown_cost != 0.0:
                    objective[col("z", bus.bus_id, gen.gen_id, t=t)] = -gen.shutdown_cost
        for unit in bus.bss_units:
            if unit.sell_price != 0.0:
                for t in hours:
                    objective[col("e", bus.bus_id, unit.bss_id, t=t)] = -unit.sell_price
        for t in hours:
            coef = gamma - lmp[t - 1]
            if coef != 0.0:
                objective[col("s", bus.bus_id, t=t)] = coef

    offset = -gamma * float(sum(supply))

    return MilpModel(objective=objective, objective_offset=offset,
                     rows=tuple(rows), columns=index, scenario=scenario)


# ---------------------------------------------------------------------------
# operations on built models

def model_to_lp(model: MilpModel) -> LpProblem:
    """The continuous relaxation (drops integrality, keeps bounds)."""
    c = np.zeros(model.ncols)
    for j, v in model.objective.items():
        c[j] = v
    senses = np.array([{"<": 1, ">": 2, "=": 0}[row.sense] for row in model.rows],
                      dtype=np.int8)
    rhs = np.array([row.rhs for row in model.rows])
    return make_problem(c, model._matrix, senses, rhs,
                        model.columns.lower, model.columns.upper)


def fix_binaries(model: MilpModel, values: Mapping[int, float]) -> MilpModel:
    """Clamp every integer-class column to its value in `values`, producing a
    pure LP (rows, objective and tags unchanged)."""
    int_cols = model.columns.integer_columns
    lower = model.columns.lower.copy()
    upper = model.columns.upper.copy()
    for j in int_cols:
        if int(j) not in values:
            raise ModelError(f"missing value for integer column {int(j)} "
                             f"({model.columns.key_of(int(j))})")
        v = float(values[int(j)])
        if abs(v - round(v)) > 1e-9:
            raise ModelError(f"non-integral value {v} for column {int(j)}")
        v = float(round(v))
        if model.columns.vclass[j] == BINARY and v not in (0.0, 1.0):
            raise ModelError(f"value {v} for binary column {int(j)} not in {{0, 1}}")
        if not (model.columns.lower[j] - 1e-9 <= v <= model.columns.upper[j] + 1e-9):
            raise ModelError(f"value {v} outside bounds of column {int(j)}")
        lower[j] = v
        upper[j] = v
    extra = set(values) - {int(j) for j in int_cols}
    if extra:
        raise ModelError(f"values given for non-integer columns {sorted(extra)[:4]}")
    index = VariableIndex(keys=model.columns.keys, lower=lower, upper=upper,
                          vclass=np.zeros(model.ncols, dtype=np.int8),
                          _by_key=model.columns._by_key)
    return MilpModel(objective=model.objective,
                     objective_offset=model.objective_offset,
                     rows=model.rows, columns=index, scenario=model.scenario,
                     _tag_index=model._tag_index, _matrix=model._matrix)


def integer_values_from(model: MilpModel, x: np.ndarray) -> dict[int, float]:
    """Rounded values of the integer-class columns of a solution vector."""
    return {int(j): float(round(x[j])) for j in model.columns.integer_columns}


def row_lookup(model: MilpModel, family: str | int, bus: str | None = None,
               timeslot: int | None = None, unit: str | None = None) -> ConstraintRow:
    """Retrieve the unique row matching (family, bus, unit, timeslot); bus and
    unit may be omitted for families that do not carry them."""
    fam = str(family)
    tag = RowTag(fam, bus, unit, 0 if timeslot is None else int(timeslot))
    try:
        return model.rows[model.row_index(tag)]
    except RowNotFoundError:
        matches = [r for r in model.rows
                   if r.tag.family == fam
                   and (bus is None or r.tag.bus == bus)
                   and (timeslot is None or r.tag.t == timeslot)
                   and (unit is None or r.tag.unit == unit)]
        if len(matches) == 1:
            return matches[0]
        if not matches:
            raise RowNotFoundError(f"no row for family {fam!r}, bus {bus!r}, "
                                   f"unit {unit!r}, t {timeslot!r}") from None
        raise RowNotFoundError(f"{len(matches)} rows match family {fam!r}, "
                               f"bus {bus!r}, t {timeslot!r}; pass unit=") from None


def replay_violations(model: MilpModel, x: np.ndarray, tol: float = 1e-6
                      ) -> list[tuple[str, float]]:
    """Re-check a solution vector against every row and every column bound.
    Returns (description, amount) for each violation beyond `tol`."""
    out: list[tuple[str, float]] = []
    ax = model._matrix @ x
    for k, row in enumerate(model.rows):
        resid = ax[k] - row.rhs
        if row.sense == "=" and abs(resid) > tol:
            out.append((f"row {row.tag}", abs(resid)))
        elif row.sense == "<" and resid > tol:
            out.append((f"row {row.tag}", resid))
        elif row.sense == ">" and resid < -tol:
            out.append((f"row {row.tag}", -resid))
    lo, hi = model.columns.lower, model.columns.upper
    bad = np.flatnonzero((x < lo - tol) | (x > hi + tol))
    for j in bad:
        amt = max(lo[j] - x[j], x[j] - hi[j])
        out.append((f"bound {model.columns.key_of(int(j))}", float(amt)))
    return out


def simulate_counters(model: MilpModel, x: np.ndarray) -> dict[int, float]:
    """Expected run-length counter values implied by the commitment/state
    trajectories in `x`: a committed (discharging) hour extends the running
    count by one, otherwise the count resets and the opposite counter grows.
    Returns column -> expected value."""
    sc = model.scenario
    col = model.columns.column
    expect: dict[int, float] = {}
    for bus in sc.buses:
        for gen in bus.generators:
            run_on = float(gen.initial_up_count)
            run_off = float(gen.initial_down_count)
            for t in range(1, sc.horizon + 1):
                on = round(x[col("i", bus.bus_id, gen.gen_id, t=t)]) == 1
                run_on = run_on + 1 if on else 0.0
                run_off = 0.0 if on else run_off + 1
                expect[col("su", bus.bus_id, gen.gen_id, t=t)] = run_on
                expect[col("sd", bus.bus_id, gen.gen_id, t=t)] = run_off
        for unit in bus.bss_units:
            run_dis = float(unit.initial_discharge_count)
            run_chg = float(unit.initial_charge_count)
            for t in range(1, sc.horizon + 1):
                dis = round(x[col("j", bus.bus_id, unit.bss_id, t=t)]) == 1
                run_dis = run_dis + 1 if dis else 0.0
                run_chg = 0.0 if dis else run_chg + 1
                expect[col("dc", bus.bus_id, unit.bss_id, t=t)] = run_dis
                expect[col("cc", bus.bus_id, unit.bss_id, t=t)] = run_chg
    return expect


# ---------------------------------------------------------------------------
# text export

_FAMILY_NAMES = {
    "2": "supply_cap", "3": "balance", "4": "load_total",
    "fixed_segment": "fixed_segment", "7": "gen_total",
    "9min": "gen_lim_lo", "9max": "gen_lim_hi",
    "10": "ramp_up", "11": "ramp_down",
    "12": "up_count_cap", "13up": "up_count_inc", "13lo": "up_count_dec",
    "14": "min_up", "15": "down_count_cap",
    "16up": "down_count_inc", "16lo": "down_count_dec", "17": "min_down",
    "18": "commit_link", "19": "switch_excl",
    "20min": "bss_out_lo", "20max": "bss_out_hi", "22": "soc_update",
    "23": "dis_count_cap", "24up": "dis_count_inc", "24lo": "dis_count_dec",
    "25": "min_discharge", "26": "chg_count_cap",
    "27up": "chg_count_inc", "27lo": "chg_count_dec", "28": "min_charge",
    "29": "bss_state_link", "30": "bss_switch_excl",
}


def row_name(tag: RowTag) -> str:
    base = _FAMILY_NAMES.get(tag.family, f"fam{tag.family}")
    parts = [base]
    if tag.unit is not None:
        parts.append(tag.unit)
    elif tag.bus is not None:
        parts.append(tag.bus)
    parts.append(f"t{tag.t}")
    return "_".join(parts)


def write_lp_text(model: MilpModel, path) -> None:
    """Human-auditable LP-format dump (row names match the tags); meant for
    cross-checking against external tools, never needed at runtime."""
    cols = model.columns
    names = [k.name() for k in cols.keys]

    def expr(coeffs: dict[int, float]) -> str:
        parts = []
        for j in sorted(coeffs):
            v = coeffs[j]
            sign = "-" if v < 0 else "+"
            parts.append(f"{sign} {abs(v):.12g} {names[j]}")
        return " ".join(parts) if parts else "0 " + names[0]

    lines = ["Maximize", f" obj: {expr(model.objective)}", "Subject To"]
    for row in model.rows:
        op = {"<": "<=", ">": ">=", "=": "="}[row.sense]
        lines.append(f" {row_name(row.tag)}: {expr(row.coefficients)} {op} {row.rhs:.12g}")
    lines.append("Bounds")
    for j, key in enumerate(cols.keys):
        lo, hi = cols.lower[j], cols.upper[j]
        hi_s = "+inf" if np.isinf(hi) else f"{hi:.12g}"
        lines.append(f" {lo:.12g} <= {names[j]} <= {hi_s}")
    bins = [names[j] for j in cols.binary_columns]
    if bins:
        lines.append("Binaries")
        lines.append(" " + " ".join(bins))
    gens = [names[j] for j in np.flatnonzero(cols.vclass == INTEGER)]
    if gens:
        lines.append("Generals")
        lines.append(" " + " ".join(gens))
    lines.append("End")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
