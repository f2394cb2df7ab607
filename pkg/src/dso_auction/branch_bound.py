"""Branch-and-bound over the integer columns of a MilpModel.

Bounding LPs are solved by the in-package simplex; child nodes warm-start
from their parent's basis through the dual simplex. Node selection is
best-bound with depth-first plunges after every expansion (the first plunge
supplies an early incumbent). Candidate incumbents are re-solved with their
integer columns fixed, so returned solutions satisfy the model rows to LP
tolerance, not merely to rounding error.

Status semantics: "optimal" means the tree was exhausted under a
near-zero pruning margin (proven optimum to LP tolerance); "gap_limit"
means the search stopped once the bound/incumbent gap reached
mip_gap_rel with nodes still open. Both carry the incumbent.

A rounding heuristic derived from the commitment trajectories (state columns
rounded, switch indicators recomputed from the state changes) is tried at the
root and periodically afterwards; unit-commitment relaxations are near
integral, so it usually supplies a tight incumbent immediately.
"""

from __future__ import annotations

import heapq
import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .model import MilpModel, VariableIndex, replay_violations
from .simplex import (INFEASIBLE, NUMERICAL_FAILURE, OPTIMAL, SimplexBasis,
                      SimplexSolver, UNBOUNDED)

logger = logging.getLogger(__name__)

INT_TOL = 1e-6
_PRUNE_MARGIN = 1e-9

STATUS_OPTIMAL = "optimal"
STATUS_GAP_LIMIT = "gap_limit"
STATUS_NODE_LIMIT = "node_limit"
STATUS_TIME_LIMIT = "time_limit"
STATUS_INFEASIBLE = "infeasible"


@dataclass(frozen=True)
class BbConfig:
    mip_gap_rel: float = 1e-4
    node_limit: int = 200_000
    time_limit: float = 120.0
    branch_rule: str = "most_fractional"   # or "pseudo_cost"
    log_interval: int = 0                  # nodes between progress lines; 0 = silent

    def __post_init__(self):
        if self.mip_gap_rel < 0:
            raise ValueError("mip_gap_rel must be >= 0")
        if self.node_limit < 1 or self.time_limit <= 0:
            raise ValueError("limits must be >= 1")
        if self.branch_rule not in ("most_fractional", "pseudo_cost"):
            raise ValueError(f"unknown branch rule {self.branch_rule!r}")


@dataclass
class MilpSolution:
    status: str
    objective: float | None            # includes the model's constant offset
    bound: float                       # best proven upper bound (offset included)
    gap: float
    nodes_explored: int
    values: np.ndarray | None          # all columns, integer columns exactly integral
    columns: VariableIndex | None = None
    basis: SimplexBasis | None = field(default=None, repr=False)
    lp_iterations: int = 0

    def value_of(self, kind: str, bus=None, unit=None, seg=None, t=None) -> float:
        if self.values is None or self.columns is None:
            raise ValueError("solution carries no values")
        return float(self.values[self.columns.column(kind, bus, unit, seg, t)])


@dataclass
class _Node:
    bound: float                       # parent LP bound (upper bound for subtree)
    seq: int
    overrides: dict[int, tuple[float, float]]
    basis: SimplexBasis | None
    depth: int
    branch_col: int = -1               # how this node was created (for pseudo-costs)
    branch_dir: int = 0                # 0 = down, 1 = up
    frac_dist: float = 0.0

    def __lt__(self, other: "_Node") -> bool:
        return (-self.bound, self.seq) < (-other.bound, other.seq)


def _gap(bound: float, incumbent: float | None) -> float:
    if incumbent is None:
        return np.inf
    if not np.isfinite(bound):
        return np.inf
    return abs(bound - incumbent) / max(1.0, abs(incumbent))


def _lp_arrays(model: MilpModel):
    c = np.zeros(model.ncols)
    for j, v in model.objective.items():
        c[j] = v
    senses = np.array([{"<": 1, ">": 2, "=": 0}[row.sense] for row in model.rows],
                      dtype=np.int8)
    rhs = np.array([row.rhs for row in model.rows])
    return c, senses, rhs, model.columns.lower.copy(), model.columns.upper.copy()


class _Search:
    def __init__(self, model: MilpModel, cfg: BbConfig):
        self.model = model
        self.cfg = cfg
        self.c, self.senses, self.rhs, self.lo0, self.hi0 = _lp_arrays(model)
        self.solver = SimplexSolver(model._matrix, self.senses, self.rhs)
        self.int_cols = model.columns.integer_columns
        self.incumbent_obj: float | None = None     # column part, offset excluded
        self.incumbent_x: np.ndarray | None = None
        self.incumbent_basis: SimplexBasis | None = None
        self.best_pruned = -np.inf
        self.nodes = 0
        self.lp_iterations = 0
        self.seq = 0
        self.t0 = time.perf_counter()
        self._first_plunge = True
        self._pc_sum = np.zeros((2, model.ncols))
        self._pc_cnt = np.zeros((2, model.ncols))

    # -- node mechanics --------------------------------------------------------

    def _solve_node(self, overrides, basis):
        lo = self.lo0.copy()
        hi = self.hi0.copy()
        for j, (l, h) in overrides.items():
            lo[j] = l
            hi[j] = h
        res = self.solver.solve(self.c, lo, hi, warm=basis)
        self.lp_iterations += res.iterations
        return res

    def _fractional(self, x: np.ndarray) -> np.ndarray:
        v = x[self.int_cols]
        frac = np.minimum(v - np.floor(v), np.ceil(v) - v)
        return self.int_cols[frac > INT_TOL]

    def _accept_incumbent(self, x: np.ndarray, basis, label: str) -> bool:
        obj = float(self.c @ x)
        if self.incumbent_obj is not None and obj <= self.incumbent_obj + 1e-12:
            return False
        bad = replay_violations(self.model, x, tol=1e-6)
        if bad:
            logger.debug("rejecting %s incumbent, %d replay violations", label, len(bad))
            return False
        self.incumbent_obj = obj
        self.incumbent_x = x.copy()
        self.incumbent_basis = basis
        logger.debug("incumbent %.6f from %s", obj, label)
        return True

    def _try_fixed_resolve(self, assignment: dict[int, float], basis, label: str) -> bool:
        """LP with all integer columns clamped; accept as incumbent if optimal."""
        overrides = {j: (v, v) for j, v in assignment.items()}
        res = self._solve_node(overrides, basis)
        if res.status != OPTIMAL:
            return False
        x = res.primal.copy()
        x[self.int_cols] = np.round(x[self.int_cols])
        return self._accept_incumbent(x, res.basis, label)

    @staticmethod
    def _repair_states(desired: list[float], on0: bool, run_on0: int, run_off0: int,
                       min_on: int, min_off: int) -> list[float]:
        """Nearest state trajectory to `desired` that honors minimum run
        lengths: transitions are deferred while the current run is too short."""
        out = []
        on = on0
        run = run_on0 if on0 else run_off0
        for want in desired:
            want_on = want >= 1.0
            if want_on != on:
                need = min_on if on else min_off
                if run >= need:
                    on = want_on
                    run = 0
            run += 1
            out.append(1.0 if on else 0.0)
        return out

    @staticmethod
    def _runs(states: list[float]) -> list[tuple[int, int]]:
        """Maximal [a, b] index ranges where the state is on."""
        runs = []
        start = None
        for k, v in enumerate(states):
            if v >= 1.0 and start is None:
                start = k
            elif v < 1.0 and start is not None:
                runs.append((start, k - 1))
                start = None
        if start is not None:
            runs.append((start, len(states) - 1))
        return runs

    def _round_trajectories(self, x: np.ndarray, threshold: float = 0.5,
                            duals: np.ndarray | None = None) -> dict[int, float]:
        """Integral assignment implied by rounding the state columns (up at
        `threshold`), repaired to honor minimum run lengths, with switch
        indicators recomputed from the state changes.

        Runs that carry no value are dropped before fixing: committed
        generator runs with essentially zero dispatched energy, and storage
        discharge runs whose estimated revenue at the node's own balance-row
        duals does not cover the unit's offer (the repair can stretch a run
        across hours the relaxation never priced as profitable)."""
        sc = self.model.scenario
        model = self.model
        col = model.columns.column
        hours = range(1, sc.horizon + 1)
        out: dict[int, float] = {}

        def put(kind_state, kind_on, kind_off, bus_id, unit_id, states, prev0,
                init_a, init_b, strict_counters):
            prev = prev0
            run_a, run_b = init_a, init_b
            for t, cur in zip(hours, states):
                out[col(kind_state, bus_id, unit_id, t=t)] = cur
                out[col(kind_on, bus_id, unit_id, t=t)] = max(0.0, cur - prev)
                out[col(kind_off, bus_id, unit_id, t=t)] = max(0.0, prev - cur)
                prev = cur
                if strict_counters is not None:
                    run_a = run_a + 1 if cur >= 1.0 else 0
                    run_b = 0 if cur >= 1.0 else run_b + 1
                    out[col(strict_counters[0], bus_id, unit_id, t=t)] = float(run_a)
                    out[col(strict_counters[1], bus_id, unit_id, t=t)] = float(run_b)

        strict = bool((model.columns.vclass == 2).any())
        for bus in sc.buses:
            for gen in bus.generators:
                want = [1.0 if x[col("i", bus.bus_id, gen.gen_id, t=t)] >= threshold
                        else 0.0 for t in hours]
                states = self._repair_states(
                    want, gen.initial_committed, gen.initial_up_count,
                    gen.initial_down_count, gen.min_up_time, gen.min_down_time)
                for a, b in self._runs(states):
                    if a == 0 and gen.initial_committed \
                            and gen.initial_up_count < gen.min_up_time:
                        continue  # cannot legally shut down at the first hour
                    energy = sum(x[col("p", bus.bus_id, gen.gen_id, t=t)]
                                 for t in range(a + 1, b + 2))
                    if energy <= 1e-6:
                        for k in range(a, b + 1):
                            states[k] = 0.0
                put("i", "y", "z", bus.bus_id, gen.gen_id, states,
                    1.0 if gen.initial_committed else 0.0,
                    gen.initial_up_count, gen.initial_down_count,
                    ("su", "sd") if strict else None)
            for unit in bus.bss_units:
                want = [1.0 if x[col("j", bus.bus_id, unit.bss_id, t=t)] >= threshold
                        else 0.0 for t in hours]
                states = self._repair_states(
                    want, unit.initial_discharging, unit.initial_discharge_count,
                    unit.initial_charge_count, unit.min_discharge_time,
                    unit.min_charge_time)
                if duals is not None:
                    for a, b in self._runs(states):
                        if a == 0 and unit.initial_discharging \
                                and unit.initial_discharge_count < unit.min_discharge_time:
                            continue
                        profit = 0.0
                        for t in range(a + 1, b + 2):
                            price = -duals[model.row_index_of("3", bus.bus_id, t)]
                            qty = max(x[col("e", bus.bus_id, unit.bss_id, t=t)],
                                      unit.e_min)
                            profit += (price - unit.sell_price) * qty
                        if profit <= 1e-9:
                            for k in range(a, b + 1):
                                states[k] = 0.0
                put("j", "v", "u", bus.bus_id, unit.bss_id, states,
                    1.0 if unit.initial_discharging else 0.0,
                    unit.initial_discharge_count, unit.initial_charge_count,
                    ("dc", "cc") if strict else None)
        for j in self.int_cols:
            out.setdefault(int(j), float(np.round(x[j])))
        return out

    def _pick_branch_col(self, x: np.ndarray, frac_cols: np.ndarray) -> int:
        v = x[frac_cols]
        frac = np.minimum(v - np.floor(v), np.ceil(v) - v)
        if self.cfg.branch_rule == "pseudo_cost":
            cnt = self._pc_cnt[:, frac_cols]
            seen_both = cnt.min(axis=0) >= 1
            if seen_both.any():
                avg = np.where(cnt > 0, self._pc_sum[:, frac_cols] / np.maximum(cnt, 1e-9), 0.0)
                score = np.where(
                    seen_both,
                    np.maximum(avg[0], 1e-9) * (v - np.floor(v))
                    * np.maximum(avg[1], 1e-9) * (np.ceil(v) - v),
                    -1.0)
                if score.max() > 0:
                    return int(frac_cols[int(np.argmax(score))])
        return int(frac_cols[int(np.argmax(frac))])

    # -- main loop ---------------------------------------------------------------

    def run(self) -> MilpSolution:
        cfg = self.cfg
        heap: list[_Node] = []
        stack: list[_Node] = []
        status = STATUS_OPTIMAL
        stack.append(_Node(bound=np.inf, seq=self._next_seq(), overrides={},
                           basis=None, depth=0))
        root_failed = False
        plunge_len = 0

        while stack or heap:
            if self.nodes >= cfg.node_limit:
                status = STATUS_NODE_LIMIT
                break
            if time.perf_counter() - self.t0 > cfg.time_limit:
                status = STATUS_TIME_LIMIT
                break
            if (cfg.mip_gap_rel > 0
                    and _gap(self._global_bound(heap, stack), self.incumbent_obj)
                    <= cfg.mip_gap_rel):
                status = STATUS_GAP_LIMIT
                break
            if stack and (plunge_len < 16 or not heap):
                node = stack.pop()
                plunge_len += 1
            else:
                while stack:
                    heapq.heappush(heap, stack.pop())
                node = heapq.heappop(heap)
                plunge_len = 0
                self._first_plunge = False
            if self._prunable(node.bound):
                self.best_pruned = max(self.best_pruned, min(node.bound, self._prune_threshold()))
                continue

            res = self._solve_node(node.overrides, node.basis)
            self.nodes += 1
            self._log_progress(heap, stack)

            if res.status == INFEASIBLE:
                self._first_plunge = False
                continue
            if res.status in (UNBOUNDED, NUMERICAL_FAILURE):
                logger.warning("node LP returned %s", res.status)
                if self.nodes == 1:
                    root_failed = True
                    break
                continue

            node_bound = res.objective
            if node.branch_col >= 0 and np.isfinite(node.bound):
                degr = max(node.bound - node_bound, 0.0) / max(node.frac_dist, INT_TOL)
                self._pc_sum[node.branch_dir, node.branch_col] += degr
                self._pc_cnt[node.branch_dir, node.branch_col] += 1.0

            if self._prunable(node_bound):
                self.best_pruned = max(self.best_pruned, min(node_bound, self._prune_threshold()))
                self._first_plunge = False
                continue

            frac_cols = self._fractional(res.primal)
            if frac_cols.size == 0:
                if not self._try_fixed_resolve(
                        {int(j): float(np.round(res.primal[j])) for j in self.int_cols},
                        res.basis, "node"):
                    x = res.primal.copy()
                    x[self.int_cols] = np.round(x[self.int_cols])
                    self._accept_incumbent(x, res.basis, "node-raw")
                self.best_pruned = max(self.best_pruned, node_bound)
                self._first_plunge = False
                continue

            # incumbent heuristics run at the root and along the initial dive
            if node.depth == 0 or self._first_plunge:
                thresholds = (0.5, 0.25, 0.75, 0.05) if node.depth == 0 else (0.5,)
                for threshold in thresholds:
                    self._try_fixed_resolve(
                        self._round_trajectories(res.primal, threshold, res.duals),
                        res.basis, f"rounding@{threshold}")
                if self._prunable(node_bound):
                    self.best_pruned = max(self.best_pruned,
                                           min(node_bound, self._prune_threshold()))
                    continue

            bcol = self._pick_branch_col(res.primal, frac_cols)
            xval = float(res.primal[bcol])
            base_lo = node.overrides.get(bcol, (self.lo0[bcol], self.hi0[bcol]))
            children = []
            for direction, (l, h) in enumerate(
                    ((base_lo[0], float(np.floor(xval))),
                     (float(np.ceil(xval)), base_lo[1]))):
                ov = dict(node.overrides)
                ov[bcol] = (l, h)
                children.append(_Node(
                    bound=node_bound, seq=self._next_seq(), overrides=ov,
                    basis=res.basis, depth=node.depth + 1, branch_col=bcol,
                    branch_dir=direction,
                    frac_dist=(xval - np.floor(xval)) if direction == 0
                    else (np.ceil(xval) - xval)))
            near_up = (xval - np.floor(xval)) >= 0.5
            heapq.heappush(heap, children[0 if near_up else 1])
            stack.append(children[1 if near_up else 0])

        exhausted = not stack and not heap and status == STATUS_OPTIMAL
        bound = self._global_bound(heap, stack)
        offset = self.model.objective_offset

        if self.incumbent_x is None:
            if root_failed:
                return self._bare(NUMERICAL_FAILURE, bound, offset)
            if exhausted:
                return self._bare(STATUS_INFEASIBLE, bound, offset)
            return self._bare(status, bound, offset)

        obj = self.incumbent_obj
        return MilpSolution(status=status, objective=obj + offset,
                            bound=bound + offset, gap=_gap(bound, obj),
                            nodes_explored=self.nodes,
                            values=self.incumbent_x, columns=self.model.columns,
                            basis=self.incumbent_basis,
                            lp_iterations=self.lp_iterations)

    def _bare(self, status: str, bound: float, offset: float) -> MilpSolution:
        return MilpSolution(status=status, objective=None,
                            bound=bound + offset, gap=np.inf,
                            nodes_explored=self.nodes, values=None,
                            columns=self.model.columns,
                            lp_iterations=self.lp_iterations)

    def _log_progress(self, heap, stack) -> None:
        cfg = self.cfg
        if cfg.log_interval and self.nodes % cfg.log_interval == 0:
            gb = self._global_bound(heap, stack)
            logger.info(
                "nodes=%d open=%d bound=%.6f incumbent=%s gap=%.3g",
                self.nodes, len(heap) + len(stack), gb,
                "-" if self.incumbent_obj is None else f"{self.incumbent_obj:.6f}",
                _gap(gb, self.incumbent_obj))

    def _next_seq(self) -> int:
        self.seq += 1
        return self.seq

    def _prune_threshold(self) -> float:
        if self.incumbent_obj is None:
            return -np.inf
        return self.incumbent_obj + _PRUNE_MARGIN * max(1.0, abs(self.incumbent_obj))

    def _prunable(self, bound: float) -> bool:
        return bound <= self._prune_threshold()

    def _global_bound(self, heap, stack) -> float:
        cands = [n.bound for n in heap] + [n.bound for n in stack]
        best_open = max(cands) if cands else -np.inf
        inc = self.incumbent_obj if self.incumbent_obj is not None else -np.inf
        return max(best_open, self.best_pruned, inc)


def solve_milp(model: MilpModel, cfg: BbConfig | None = None) -> MilpSolution:
    """Solve the MILP by branch-and-bound. On "optimal" the tree is exhausted
    (proven optimum to LP tolerance); "gap_limit" certifies the relative gap
    target; limit statuses carry the incumbent when one exists."""
    cfg = cfg or BbConfig()
    return _Search(model, cfg).run()


def enumerate_oracle(model: MilpModel, max_binaries: int = 16) -> MilpSolution:
    """Exact optimum by enumerating every assignment of the binary columns,
    solving the fixed LP for each assignment that survives a constant-row
    feasibility screen. Refuses models beyond `max_binaries`. Test oracle."""
    int_cols = [int(j) for j in model.columns.integer_columns]
    k = len(int_cols)
    if k > max_binaries:
        raise ValueError(f"{k} integer columns exceed the oracle cap {max_binaries}")
    if any(model.columns.vclass[j] != 1 for j in int_cols):
        raise ValueError("oracle enumerates binary columns only")

    c, senses, rhs, lo0, hi0 = _lp_arrays(model)
    solver = SimplexSolver(model._matrix, senses, rhs)
    int_set = set(int_cols)

    # rows touching only binary columns can be screened without an LP
    screen = []
    for row in model.rows:
        if row.coefficients and set(row.coefficients) <= int_set:
            screen.append((row.coefficients, row.sense, row.rhs))

    best_obj = None
    best_x = None
    basis = None
    n_lp = 0
    for bits in range(2 ** k):
        assign = {int_cols[i]: float((bits >> i) & 1) for i in range(k)}
        ok = True
        for coeffs, sense, b in screen:
            lhs = sum(v * assign[j] for j, v in coeffs.items())
            if ((sense == "=" and abs(lhs - b) > 1e-9)
                    or (sense == "<" and lhs > b + 1e-9)
                    or (sense == ">" and lhs < b - 1e-9)):
                ok = False
                break
        if not ok:
            continue
        lo = lo0.copy()
        hi = hi0.copy()
        for j, v in assign.items():
            lo[j] = v
            hi[j] = v
        res = solver.solve(c, lo, hi, warm=basis)
        n_lp += 1
        if res.status != OPTIMAL:
            continue
        basis = res.basis
        if best_obj is None or res.objective > best_obj + 1e-12:
            best_obj = res.objective
            best_x = res.primal.copy()
            best_x[list(int_set)] = np.round(best_x[list(int_set)])

    offset = model.objective_offset
    if best_obj is None:
        return MilpSolution(status=STATUS_INFEASIBLE, objective=None,
                            bound=-np.inf, gap=np.inf, nodes_explored=n_lp,
                            values=None, columns=model.columns)
    return MilpSolution(status=STATUS_OPTIMAL, objective=best_obj + offset,
                        bound=best_obj + offset, gap=0.0, nodes_explored=n_lp,
                        values=best_x, columns=model.columns)
