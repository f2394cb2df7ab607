"""Linear programming by revised simplex with bounded variables.

Solves  max c'x  s.t.  A x {<=,=,>=} b,  l <= x <= u  and returns primal
values, one dual value per row, and reduced costs per column.

Dual sign convention (normative for the pricing module): for a maximization
problem the dual of a <= row is >= 0, the dual of a >= row is <= 0, and
equality-row duals are unrestricted. Duals are computed as y' = c_B' B^-1 in
the slack formulation A x + s = b.

Implementation notes:
- column bounds are handled implicitly (never expanded into rows);
- cold starts run a phase-1 with explicit artificial columns, then phase 2;
- warm starts (changed bounds and/or objective) go through the dual simplex
  and fall back to a cold start when the supplied basis is unusable;
- the basis factorization is LU (dense below _DENSE_LIMIT rows, SuperLU
  above) refreshed every _REFACTOR_EVERY pivots with product-form eta
  updates in between;
- entering-variable rule is Dantzig's (largest reduced cost), switching to
  Bland's smallest-index rule after a stall of degenerate pivots, which
  guarantees termination;
- rows and columns are geometrically scaled (powers of two) before the
  solve; primals, duals and reduced costs are unscaled on output.

Determinism: identical inputs take identical pivot sequences; all
tie-breaking is by lowest column index.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

logger = logging.getLogger(__name__)

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
NUMERICAL_FAILURE = "numerical_failure"

ROW_EQ = 0
ROW_LE = 1
ROW_GE = 2

_SENSE_CODE = {"=": ROW_EQ, "<": ROW_LE, "<=": ROW_LE, ">": ROW_GE, ">=": ROW_GE}

# variable status codes
_BASIC = 0
_AT_LOWER = 1
_AT_UPPER = 2
_FREE_NB = 3

TOL_FEAS = 1e-7
TOL_DUAL = 1e-7
TOL_GAP = 1e-8
TOL_CS = 1e-6

_TOL_PIV = 1e-9          # smallest usable pivot element
_TOL_ENTER = 1e-9        # reduced-cost threshold to enter
_TOL_RATIO_TIE = 1e-9    # slack when collecting ratio-test ties
_BLAND_STALL = 1000      # degenerate pivots before switching to Bland's rule
_REFACTOR_EVERY = 64
_DENSE_LIMIT = 300
_MAX_RETRY = 3


class LpError(ValueError):
    """Malformed linear program."""


@dataclass(frozen=True)
class SimplexBasis:
    """Opaque basis descriptor: variable statuses over structural columns
    plus row slacks, and the basic column per row."""

    vstat: np.ndarray    # int8, length ncols + nrows
    basic: np.ndarray    # int32, length nrows

    def compatible_with(self, ncols: int, nrows: int) -> bool:
        return (self.vstat.shape == (ncols + nrows,)
                and self.basic.shape == (nrows,)
                and bool((self.basic >= 0).all())
                and bool((self.basic < ncols + nrows).all())
                and len(np.unique(self.basic)) == nrows)


@dataclass(frozen=True)
class LpProblem:
    """max objective'x subject to rows and column bounds."""

    objective: np.ndarray          # float64 (n,)
    a_matrix: sp.csc_matrix        # (m, n)
    row_sense: np.ndarray          # int8 (m,), ROW_EQ / ROW_LE / ROW_GE
    rhs: np.ndarray                # float64 (m,)
    lower: np.ndarray              # float64 (n,), may be -inf
    upper: np.ndarray              # float64 (n,), may be +inf

    @property
    def nrows(self) -> int:
        return self.a_matrix.shape[0]

    @property
    def ncols(self) -> int:
        return self.a_matrix.shape[1]


def make_problem(objective, a_matrix, row_sense, rhs, lower, upper) -> LpProblem:
    """Validate and normalize raw arrays into an LpProblem."""
    c = np.asarray(objective, dtype=np.float64).ravel()
    if sp.issparse(a_matrix):
        a = a_matrix.tocsc().astype(np.float64)
    else:
        a = sp.csc_matrix(np.asarray(a_matrix, dtype=np.float64))
    senses = np.asarray(
        [_SENSE_CODE[s] if isinstance(s, str) else int(s) for s in row_sense],
        dtype=np.int8)
    b = np.asarray(rhs, dtype=np.float64).ravel()
    lo = np.asarray(lower, dtype=np.float64).ravel()
    hi = np.asarray(upper, dtype=np.float64).ravel()
    m, n = a.shape
    if not (len(c) == n and len(lo) == n and len(hi) == n and len(b) == m == len(senses)):
        raise LpError("inconsistent array shapes")
    if not np.isfinite(b).all():
        raise LpError("rhs must be finite")
    if np.any(lo > hi + 1e-12):
        bad = int(np.argmax(lo - hi))
        raise LpError(f"column {bad}: lower {lo[bad]} > upper {hi[bad]}")
    if not np.isfinite(c).all():
        raise LpError("objective must be finite")
    return LpProblem(c, a, senses, b, lo, hi)


@dataclass
class LpResult:
    status: str
    objective: float | None = None
    primal: np.ndarray | None = None          # structural columns
    duals: np.ndarray | None = None           # one per row
    reduced_costs: np.ndarray | None = None   # structural columns
    basis: SimplexBasis | None = None
    iterations: int = 0
    pivots: int = 0
    message: str = ""


# ---------------------------------------------------------------------------
# factorization with eta updates

class _Factor:
    """B = LU plus a product-form eta file for pivots since the last refresh."""

    def __init__(self, m: int, dense: bool):
        self.m = m
        self.dense = dense
        self._lu = None
        self.etas: list[tuple[int, np.ndarray]] = []

    def refactor(self, bcols: sp.csc_matrix) -> None:
        self.etas = []
        if self.dense:
            self._lu = sla.lu_factor(bcols.toarray(), check_finite=False)
        else:
            self._lu = spla.splu(bcols.tocsc(), permc_spec="COLAMD")

    def _solve(self, v: np.ndarray, trans: bool) -> np.ndarray:
        if self.dense:
            return sla.lu_solve(self._lu, v, trans=1 if trans else 0,
                                check_finite=False)
        return self._lu.solve(v, trans="T" if trans else "N")

    def ftran(self, v: np.ndarray) -> np.ndarray:
        """B^-1 v."""
        x = self._solve(v, trans=False)
        for r, w in self.etas:
            t = x[r] / w[r]
            if t != 0.0:
                x -= t * w
            x[r] = t
        return x

    def btran(self, v: np.ndarray) -> np.ndarray:
        """B^-T v (i.e. y with y'B = v')."""
        y = v.copy()
        for r, w in reversed(self.etas):
            y[r] -= (w @ y - y[r]) / w[r]
        return self._solve(y, trans=True)

    def push(self, r: int, w: np.ndarray) -> None:
        self.etas.append((r, w.copy()))

    @property
    def nupdates(self) -> int:
        return len(self.etas)


# ---------------------------------------------------------------------------
# scaling

def _geometric_scales(a: sp.csc_matrix) -> tuple[np.ndarray, np.ndarray]:
    """Two rounds of geometric row/column scaling, rounded to powers of two."""
    m, n = a.shape
    row = np.ones(m)
    col = np.ones(n)
    if a.nnz == 0:
        return row, col
    coo = a.tocoo()
    absval = np.abs(coo.data)
    keep = absval > 0
    ri, ci, av = coo.row[keep], coo.col[keep], absval[keep]
    for _ in range(2):
        v = av * row[ri] * col[ci]
        logs = np.log2(v)
        rsum = np.zeros(m)
        rcnt = np.zeros(m)
        np.add.at(rsum, ri, logs)
        np.add.at(rcnt, ri, 1.0)
        radj = np.where(rcnt > 0, rsum / np.maximum(rcnt, 1.0), 0.0)
        row *= np.exp2(-np.round(radj))
        v = av * row[ri] * col[ci]
        logs = np.log2(v)
        csum = np.zeros(n)
        ccnt = np.zeros(n)
        np.add.at(csum, ci, logs)
        np.add.at(ccnt, ci, 1.0)
        cadj = np.where(ccnt > 0, csum / np.maximum(ccnt, 1.0), 0.0)
        col *= np.exp2(-np.round(cadj))
    return row, col


# ---------------------------------------------------------------------------
# core solver

class SimplexSolver:
    """Reusable solver bound to one constraint matrix; `solve` may be called
    repeatedly with different objectives/bounds (branch-and-bound nodes,
    price re-solves). A solver instance is single-threaded; use one instance
    per thread."""

    def __init__(self, a_matrix: sp.csc_matrix, row_sense: np.ndarray,
                 rhs: np.ndarray):
        a = a_matrix.tocsc().astype(np.float64)
        self.m, self.n = a.shape
        self.senses = np.asarray(row_sense, dtype=np.int8)
        m, n = self.m, self.n

        rs, cs = _geometric_scales(a)
        self.row_scale = rs
        self.col_scale = cs
        a_scaled = sp.diags(rs) @ a @ sp.diags(cs) if a.nnz else a
        self.rhs = np.asarray(rhs, dtype=np.float64) * rs

        # slack columns are kept at coefficient one by giving them scale 1/r_i
        self.ext = sp.hstack([a_scaled, sp.identity(m, format="csc")],
                             format="csc")
        self.ext.sort_indices()
        self.ext_t = self.ext.T.tocsr()
        self.next = n + m

        # slack bounds encode the row sense (scaled space: s~ = s * r_i)
        slo = np.zeros(m)
        shi = np.zeros(m)
        slo[self.senses == ROW_GE] = -np.inf
        shi[self.senses == ROW_LE] = np.inf
        self._slack_lo = slo
        self._slack_hi = shi

        self._factor = _Factor(m, dense=m <= _DENSE_LIMIT)

        # per-solve state
        self.x = None
        self.vstat = None
        self.basic = None
        self.in_basis_pos = None
        self.lo = None
        self.hi = None
        self.c = None
        self.art_cols = 0
        self.iterations = 0
        self._bland = False
        self._stall = 0

    # -- column access helpers ------------------------------------------------

    def _col_dense(self, j: int, ncols_total: int) -> np.ndarray:
        w = np.zeros(self.m)
        if j < self.next:
            a = self.ext
            sl = slice(a.indptr[j], a.indptr[j + 1])
            w[a.indices[sl]] = a.data[sl]
        else:
            r, sign = self._art_def[j - self.next]
            w[r] = sign
        return w

    def _matT_vec(self, y: np.ndarray) -> np.ndarray:
        """(ext cols + artificials)' y."""
        out = np.empty(self.ntot)
        out[: self.next] = self.ext_t @ y
        if self.art_cols:
            rows = self._art_rows
            out[self.next:] = y[rows] * self._art_signs
        return out

    def _basis_matrix(self) -> sp.csc_matrix:
        cols = []
        a = self.ext
        data, indices, indptr = [], [], [0]
        for j in self.basic:
            if j < self.next:
                sl = slice(a.indptr[j], a.indptr[j + 1])
                data.append(a.data[sl])
                indices.append(a.indices[sl])
            else:
                r, sign = self._art_def[j - self.next]
                data.append(np.array([sign]))
                indices.append(np.array([r], dtype=np.int32))
            indptr.append(indptr[-1] + len(data[-1]))
        return sp.csc_matrix(
            (np.concatenate(data) if data else np.empty(0),
             np.concatenate(indices) if indices else np.empty(0, dtype=np.int32),
             np.array(indptr)),
            shape=(self.m, self.m))

    def _refactor(self) -> None:
        self._factor.refactor(self._basis_matrix())

    def _recompute_basics(self) -> None:
        """x_B = B^-1 (b - N x_N), with nonbasics already snapped to bounds."""
        xn = self.x[: self.next].copy()
        xn[self.basic[self.basic < self.next]] = 0.0
        rhs = self.rhs - self.ext @ xn
        if self.art_cols:
            for j in range(self.next, self.ntot):
                if self.vstat[j] != _BASIC and self.x[j] != 0.0:
                    r, sign = self._art_def[j - self.next]
                    rhs[r] -= sign * self.x[j]
        self.x[self.basic] = self._factor.ftran(rhs)

    # -- solve driver ----------------------------------------------------------

    def solve(self, objective: np.ndarray, lower: np.ndarray, upper: np.ndarray,
              warm: SimplexBasis | None = None) -> LpResult:
        n, m = self.n, self.m
        c_orig = np.asarray(objective, dtype=np.float64)
        lo_orig = np.asarray(lower, dtype=np.float64)
        hi_orig = np.asarray(upper, dtype=np.float64)
        if np.any(lo_orig > hi_orig + 1e-12):
            raise LpError("crossing column bounds")

        for attempt in range(_MAX_RETRY):
            result = self._solve_once(c_orig, lo_orig, hi_orig,
                                      warm if attempt == 0 else None)
            if result.status != NUMERICAL_FAILURE:
                return result
            logger.debug("numerical retry %d", attempt + 1)
        return result

    def _install_bounds(self, lo_orig, hi_orig) -> None:
        lo = np.empty(self.ntot)
        hi = np.empty(self.ntot)
        lo[: self.n] = lo_orig / self.col_scale
        hi[: self.n] = hi_orig / self.col_scale
        lo[self.n: self.next] = self._slack_lo * self.row_scale
        hi[self.n: self.next] = self._slack_hi * self.row_scale
        if self.art_cols:
            lo[self.next:] = 0.0
            hi[self.next:] = np.inf
        self.lo, self.hi = lo, hi

    def _solve_once(self, c_orig, lo_orig, hi_orig,
                    warm: SimplexBasis | None) -> LpResult:
        n, m = self.n, self.m
        if m == 0:
            return self._solve_box_only(c_orig, lo_orig, hi_orig)
        self.art_cols = 0
        self._art_def: list[tuple[int, float]] = []
        self.ntot = self.next
        self.iterations = 0
        self.pivots = 0
        self._bland = False
        self._stall = 0

        c = np.zeros(self.next)
        c[:n] = c_orig * self.col_scale

        self._install_bounds(lo_orig, hi_orig)

        warm_ok = False
        if warm is not None and warm.compatible_with(n, m):
            warm_ok = self._try_warm(c, warm)
            if warm_ok == "infeasible":
                return LpResult(status=INFEASIBLE, iterations=self.iterations,
                                message="dual simplex certified infeasibility")
        if not warm_ok:
            status = self._cold_start(c)
            if status is not None:
                return status

        # phase 2 (primal) from a feasible basis
        self.c = c if self.ntot == self.next else np.concatenate(
            [c, np.zeros(self.art_cols)])
        status = self._primal_loop()
        if status == UNBOUNDED:
            return LpResult(status=UNBOUNDED, iterations=self.iterations)
        if status != OPTIMAL:
            return LpResult(status=NUMERICAL_FAILURE, iterations=self.iterations,
                            message=str(status))
        return self._finalize(c_orig, lo_orig, hi_orig)

    def _solve_box_only(self, c, lo, hi) -> LpResult:
        """Degenerate case with no rows: optimize each column independently."""
        x = np.where(c > 0, hi, lo)
        zero = c == 0
        x[zero] = np.where(np.isfinite(lo[zero]), lo[zero],
                           np.minimum(hi[zero], 0.0))
        if not np.isfinite(x).all():
            return LpResult(status=UNBOUNDED)
        return LpResult(status=OPTIMAL, objective=float(c @ x), primal=x,
                        duals=np.zeros(0), reduced_costs=c.copy(),
                        basis=SimplexBasis(
                            vstat=np.where(x == hi, _AT_UPPER, _AT_LOWER).astype(np.int8),
                            basic=np.zeros(0, dtype=np.int32)))

    # -- warm start ------------------------------------------------------------

    def _try_warm(self, c: np.ndarray, warm: SimplexBasis):
        n, m = self.n, self.m
        # when the requested basis is the one this solver already holds a
        # factorization for (the common case in branch-and-bound plunges),
        # skip the refactorization
        keep_factor = (self.basic is not None
                       and self._factor._lu is not None
                       and len(self.basic) == len(warm.basic)
                       and bool(np.array_equal(self.basic, warm.basic)))
        self.x = np.zeros(self.next)
        self.vstat = warm.vstat.copy()
        self.basic = warm.basic.astype(np.int64).copy()
        self.vstat[self.basic] = _BASIC
        self.c = c

        # snap nonbasic variables onto current bounds
        for code, arr in ((_AT_LOWER, self.lo), (_AT_UPPER, self.hi)):
            mask = self.vstat == code
            vals = arr[mask]
            if not np.isfinite(vals).all():
                return False
            self.x[mask] = vals
        fixed = self.lo == self.hi
        self.vstat[(self.vstat == _AT_UPPER) & fixed] = _AT_LOWER
        self.x[(self.vstat == _AT_LOWER) & fixed] = self.lo[
            (self.vstat == _AT_LOWER) & fixed]

        if not keep_factor:
            try:
                self._refactor()
            except (RuntimeError, ValueError, sla.LinAlgError):
                return False

        # dual feasibility: flip mis-signed nonbasics to their other bound
        y = self._factor.btran(c[self.basic])
        d = c - self.ext_t @ y
        movable = (self.hi - self.lo) > 0
        bad_low = (self.vstat == _AT_LOWER) & movable & (d > TOL_DUAL)
        bad_up = (self.vstat == _AT_UPPER) & movable & (d < -TOL_DUAL)
        if ((self.vstat == _FREE_NB) & (np.abs(d) > TOL_DUAL)).any():
            return False
        if bad_low.any():
            if not np.isfinite(self.hi[bad_low]).all():
                return False
            self.vstat[bad_low] = _AT_UPPER
            self.x[bad_low] = self.hi[bad_low]
        if bad_up.any():
            if not np.isfinite(self.lo[bad_up]).all():
                return False
            self.vstat[bad_up] = _AT_LOWER
            self.x[bad_up] = self.lo[bad_up]

        self._rebuild_pos()
        self._recompute_basics()
        status = self._dual_loop()
        if status == OPTIMAL:
            return True
        if status == INFEASIBLE:
            return "infeasible"
        return False

    def _rebuild_pos(self) -> None:
        pos = np.full(self.ntot, -1, dtype=np.int64)
        pos[self.basic] = np.arange(self.m)
        self.in_basis_pos = pos

    # -- cold start ------------------------------------------------------------

    def _cold_start(self, c: np.ndarray) -> LpResult | None:
        n, m = self.n, self.m
        self.x = np.zeros(self.next)
        self.vstat = np.empty(self.next, dtype=np.int8)

        # structural nonbasics at their preferred finite bound
        lo_f = np.isfinite(self.lo[:n])
        hi_f = np.isfinite(self.hi[:n])
        self.vstat[:n] = np.where(lo_f, _AT_LOWER,
                                  np.where(hi_f, _AT_UPPER, _FREE_NB))
        self.x[:n] = np.where(lo_f, np.nan_to_num(self.lo[:n], neginf=0.0),
                              np.where(hi_f, np.nan_to_num(self.hi[:n], posinf=0.0), 0.0))

        # slack basis
        self.vstat[n:self.next] = _BASIC
        self.basic = np.arange(n, self.next, dtype=np.int64)
        slack_vals = self.rhs - self.ext[:, :n] @ self.x[:n]
        self.x[n:self.next] = slack_vals

        # rows whose slack violates its own bounds get an artificial column
        viol_lo = slack_vals < self.lo[n:self.next] - TOL_FEAS
        viol_hi = slack_vals > self.hi[n:self.next] + TOL_FEAS
        bad_rows = np.flatnonzero(viol_lo | viol_hi)
        if bad_rows.size:
            art_x = []
            for r in bad_rows:
                target = self.lo[n + r] if viol_lo[r] else self.hi[n + r]
                resid = slack_vals[r] - target
                self._art_def.append((int(r), 1.0 if resid > 0 else -1.0))
                art_x.append(abs(resid))
                # clamp the slack at the violated bound, nonbasic
                self.x[n + r] = target
                self.vstat[n + r] = _AT_LOWER if viol_lo[r] else _AT_UPPER
                self.basic[r] = self.next + len(self._art_def) - 1
            self.art_cols = len(self._art_def)
            self.ntot = self.next + self.art_cols
            self._art_rows = np.array([r for r, _ in self._art_def])
            self._art_signs = np.array([s for _, s in self._art_def])
            self.x = np.concatenate([self.x, np.asarray(art_x)])
            self.vstat = np.concatenate(
                [self.vstat, np.full(self.art_cols, _BASIC, dtype=np.int8)])
            self._install_bounds(self.lo[:n] * self.col_scale,
                                 self.hi[:n] * self.col_scale)

            self._rebuild_pos()
            self._refactor()
            self.c = np.zeros(self.ntot)
            self.c[self.next:] = -1.0
            status = self._primal_loop()
            if status == UNBOUNDED:
                status = NUMERICAL_FAILURE  # cannot happen with bounded phase-1
            if status != OPTIMAL:
                return LpResult(status=NUMERICAL_FAILURE,
                                iterations=self.iterations, message="phase 1")
            infeas = float(self.x[self.next:].sum())
            scale = max(1.0, float(np.abs(self.rhs).max(initial=0.0)))
            if infeas > TOL_FEAS * scale * 10:
                return LpResult(status=INFEASIBLE, iterations=self.iterations,
                                message=f"phase-1 infeasibility {infeas:.3e}")
            self._drive_out_artificials()
            self._bland = False
            self._stall = 0
        else:
            self._rebuild_pos()
            self._refactor()
        return None

    def _drive_out_artificials(self) -> None:
        """Clamp artificials to zero; pivot basic ones out where possible."""
        self.lo[self.next:] = 0.0
        self.hi[self.next:] = 0.0
        self.x[self.next:] = 0.0
        for j in range(self.next, self.ntot):
            r = self.in_basis_pos[j]
            if r < 0:
                continue
            rho = self._factor.btran(_unit(self.m, r))
            alpha = self._matT_vec(rho)
            alpha[self.basic] = 0.0
            alpha[self.next:] = 0.0  # never swap one artificial for another
            cand = np.flatnonzero(np.abs(alpha) > _TOL_PIV)
            if cand.size == 0:
                continue  # redundant row: artificial stays basic at zero
            q = int(cand[np.argmax(np.abs(alpha[cand]))])
            w = self._factor.ftran(self._col_dense(q, self.ntot))
            if abs(w[r]) <= _TOL_PIV:
                continue
            self._pivot(int(r), q, w, t=0.0, sigma=1.0,
                        leave_to=_AT_LOWER)
            self.pivots -= 1
        self._recompute_basics()

    # -- primal simplex ---------------------------------------------------------

    def _primal_loop(self) -> str:
        max_iter = 2000 + 60 * self.m
        movable = (self.hi - self.lo) > 0
        while True:
            if self.iterations >= max_iter:
                return "iteration limit"
            self.iterations += 1

            y = self._factor.btran(self.c[self.basic])
            d = self.c - self._matT_vec(y)
            d[self.basic] = 0.0

            elig = movable & (
                ((self.vstat == _AT_LOWER) & (d > _TOL_ENTER))
                | ((self.vstat == _AT_UPPER) & (d < -_TOL_ENTER))
                | ((self.vstat == _FREE_NB) & (np.abs(d) > _TOL_ENTER)))
            idx = np.flatnonzero(elig)
            if idx.size == 0:
                return OPTIMAL
            if self._bland:
                q = int(idx[0])
            else:
                q = int(idx[np.argmax(np.abs(d[idx]))])

            sigma = 1.0 if (self.vstat[q] == _AT_LOWER
                            or (self.vstat[q] == _FREE_NB and d[q] > 0)) else -1.0
            w = self._factor.ftran(self._col_dense(q, self.ntot))

            t, r, leave_to = self._primal_ratio(q, sigma, w)
            if t is None:
                return UNBOUNDED

            if r is None:
                # bound flip: q runs to its other bound, basis unchanged
                self.pivots += 1
                self.x[self.basic] -= sigma * t * w
                self.x[q] = self.hi[q] if sigma > 0 else self.lo[q]
                self.vstat[q] = _AT_UPPER if sigma > 0 else _AT_LOWER
            else:
                self._apply_step(q, sigma, t, w)
                self._pivot(r, q, w, t, sigma, leave_to)

            if t <= 1e-9:
                self._stall += 1
                if self._stall >= _BLAND_STALL:
                    self._bland = True
            else:
                self._stall = 0
                self._bland = False

    def _primal_ratio(self, q: int, sigma: float, w: np.ndarray):
        xb = self.x[self.basic]
        lb = self.lo[self.basic]
        ub = self.hi[self.basic]
        sw = sigma * w

        t_rows = np.full(self.m, np.inf)
        pos = sw > _TOL_PIV
        if pos.any():
            gap = xb[pos] - lb[pos]
            t_rows[pos] = np.maximum(gap, 0.0) / sw[pos]
        neg = sw < -_TOL_PIV
        if neg.any():
            gap = ub[neg] - xb[neg]
            t_rows[neg] = np.maximum(gap, 0.0) / (-sw[neg])

        t_bound = self.hi[q] - self.lo[q]
        if not np.isfinite(t_bound):
            t_bound = np.inf

        t_row_min = float(t_rows.min()) if self.m else np.inf
        t_star = min(t_row_min, t_bound)
        if not np.isfinite(t_star):
            return None, None, None
        if t_bound <= t_row_min:
            return t_bound, None, None

        ties = np.flatnonzero(t_rows <= t_star + _TOL_RATIO_TIE)
        if self._bland:
            r = int(ties[np.argmin(self.basic[ties])])
        else:
            best = np.abs(w[ties])
            top = ties[best >= best.max() - 1e-15]
            r = int(top[np.argmin(self.basic[top])])
        leave_to = _AT_LOWER if sw[r] > 0 else _AT_UPPER
        return max(t_star, 0.0), r, leave_to

    def _apply_step(self, q: int, sigma: float, t: float, w: np.ndarray) -> None:
        if t != 0.0:
            self.x[self.basic] -= sigma * t * w
            self.x[q] += sigma * t

    def _pivot(self, r: int, q: int, w: np.ndarray, t: float, sigma: float,
               leave_to: int) -> None:
        self.pivots += 1
        lv = int(self.basic[r])
        self.x[lv] = self.lo[lv] if leave_to == _AT_LOWER else self.hi[lv]
        self.vstat[lv] = leave_to
        self.vstat[q] = _BASIC
        self.basic[r] = q
        self.in_basis_pos[lv] = -1
        self.in_basis_pos[q] = r
        self._factor.push(r, w)
        if self._factor.nupdates >= _REFACTOR_EVERY:
            self._refactor()
            self._recompute_basics()

    # -- dual simplex -----------------------------------------------------------

    def _dual_loop(self) -> str:
        max_iter = 2000 + 60 * self.m
        movable = (self.hi - self.lo) > 0
        d = None
        while True:
            if self.iterations >= max_iter:
                return "iteration limit"
            self.iterations += 1

            if d is None:
                y = self._factor.btran(self.c[self.basic])
                d = self.c - self._matT_vec(y)
                d[self.basic] = 0.0

            xb = self.x[self.basic]
            lb = self.lo[self.basic]
            ub = self.hi[self.basic]
            viol = np.maximum(lb - xb, 0.0) + np.maximum(xb - ub, 0.0)
            viol[viol <= TOL_FEAS] = 0.0
            if not viol.any():
                return OPTIMAL
            if self._bland:
                rows = np.flatnonzero(viol > 0)
                r = int(rows[np.argmin(self.basic[rows])])
            else:
                r = int(np.argmax(viol))
            below = xb[r] < lb[r]

            rho = self._factor.btran(_unit(self.m, r))
            alpha = self._matT_vec(rho)
            alpha[self.basic] = 0.0

            atilde = alpha if below else -alpha
            cand_low = movable & (self.vstat == _AT_LOWER) & (atilde < -_TOL_PIV)
            cand_up = movable & (self.vstat == _AT_UPPER) & (atilde > _TOL_PIV)
            cand_free = (self.vstat == _FREE_NB) & (np.abs(atilde) > _TOL_PIV)
            cand = cand_low | cand_up | cand_free
            idx = np.flatnonzero(cand)
            if idx.size == 0:
                return INFEASIBLE

            ratios = np.maximum(d[idx] / atilde[idx], 0.0)
            ratios[cand_free[idx]] = 0.0
            theta = float(ratios.min())
            ties = idx[ratios <= theta + 1e-12]
            if self._bland:
                q = int(ties[0])
            else:
                mags = np.abs(atilde[ties])
                top = ties[mags >= mags.max() - 1e-15]
                q = int(top[0])

            target = lb[r] if below else ub[r]
            delta_r = target - xb[r]
            w = self._factor.ftran(self._col_dense(q, self.ntot))
            if abs(w[r]) <= _TOL_PIV / 10:
                # numerically unusable pivot; refresh and retry once
                self._refactor()
                self._recompute_basics()
                d = None
                w = self._factor.ftran(self._col_dense(q, self.ntot))
                if abs(w[r]) <= _TOL_PIV / 10:
                    return "dual pivot breakdown"
            delta_q = -delta_r / alpha[q] * 1.0
            # alpha[q] = rho' a_q equals w[r] up to roundoff; use the sharper w[r]
            delta_q = -delta_r / w[r] if abs(w[r]) > abs(alpha[q]) else delta_q

            lv = int(self.basic[r])
            self.x[self.basic] -= delta_q * w
            self.x[q] += delta_q
            self._pivot(r, q, w, abs(delta_q), 1.0,
                        _AT_LOWER if below else _AT_UPPER)
            if d is not None:
                theta_signed = d[q] / alpha[q]
                d -= theta_signed * alpha
                d[q] = 0.0
                d[lv] = -theta_signed
                if self._factor.nupdates == 0:  # a refactor just happened
                    d = None

            if abs(delta_q) <= 1e-10:
                self._stall += 1
                if self._stall >= _BLAND_STALL:
                    self._bland = True
            else:
                self._stall = 0
                self._bland = False

    # -- result assembly ---------------------------------------------------------

    def _finalize(self, c_orig, lo_orig, hi_orig) -> LpResult:
        n, m = self.n, self.m
        # refresh the factorization for exact duals only when the eta file
        # has grown; the self-check below catches residual drift either way
        if self._factor.nupdates > 24:
            self._refactor()
            self._recompute_basics()

        x_struct = self.x[:n] * self.col_scale
        y = self._factor.btran(self.c[self.basic])
        d_all = self.c - self._matT_vec(y)
        d_all[self.basic] = 0.0
        duals = y * self.row_scale
        reduced = d_all[:n] / self.col_scale
        objective = float(c_orig @ x_struct)

        ok, msg = self._self_check(c_orig, lo_orig, hi_orig,
                                   x_struct, duals, reduced, objective, d_all)
        if not ok:
            return LpResult(status=NUMERICAL_FAILURE,
                            iterations=self.iterations, message=msg)

        basis = SimplexBasis(vstat=self.vstat[: self.next].copy(),
                             basic=self.basic.astype(np.int32).copy())
        return LpResult(status=OPTIMAL, objective=objective, primal=x_struct,
                        duals=duals, reduced_costs=reduced, basis=basis,
                        iterations=self.iterations, pivots=self.pivots)

    def _self_check(self, c_orig, lo, hi, x, y, d, obj, d_all) -> tuple[bool, str]:
        n, m = self.n, self.m
        a = self.ext[:, :n]
        # structural activities in original units
        ax = (a @ (x / self.col_scale)) / self.row_scale
        b = self.rhs / self.row_scale
        scale_b = 1.0 + float(np.abs(b).max(initial=0.0))

        resid = np.zeros(m)
        eq = self.senses == ROW_EQ
        le = self.senses == ROW_LE
        ge = self.senses == ROW_GE
        resid[eq] = np.abs(ax[eq] - b[eq])
        resid[le] = np.maximum(ax[le] - b[le], 0.0)
        resid[ge] = np.maximum(b[ge] - ax[ge], 0.0)
        if resid.max(initial=0.0) > TOL_FEAS * scale_b * 10:
            return False, f"primal row residual {resid.max():.2e}"

        col_resid = np.maximum(np.maximum(lo - x, x - hi), 0.0)
        col_resid[~np.isfinite(col_resid)] = 0.0
        scale_x = 1.0 + float(np.abs(x).max(initial=0.0))
        if col_resid.max(initial=0.0) > TOL_FEAS * scale_x * 10:
            return False, f"column bound residual {col_resid.max():.2e}"

        scale_c = 1.0 + float(np.abs(c_orig).max(initial=0.0))
        if (y[le].min(initial=0.0) < -TOL_DUAL * scale_c * 10
                or y[ge].max(initial=0.0) > TOL_DUAL * scale_c * 10):
            return False, "row dual sign violation"

        movable = (hi - lo) > 0
        stat = self.vstat[:n]
        bad = ((stat == _AT_LOWER) & movable & (d > TOL_DUAL * scale_c * 10)) | \
              ((stat == _AT_UPPER) & movable & (d < -TOL_DUAL * scale_c * 10)) | \
              ((stat == _FREE_NB) & (np.abs(d) > TOL_DUAL * scale_c * 10))
        if bad.any():
            return False, f"reduced cost sign violation at column {int(np.flatnonzero(bad)[0])}"

        # duality gap via the bound form of the dual objective
        nb = self.vstat != _BASIC
        dual_obj = float(y @ b) + float(d_all[nb] @ self._unscaled_x(nb))
        if abs(obj - dual_obj) > TOL_GAP * (1.0 + abs(obj)) * 100:
            return False, f"duality gap {abs(obj - dual_obj):.2e}"

        # complementary slackness
        slack = b - ax
        cs_rows = np.abs(y * slack)
        cs_rows[eq] = 0.0
        if cs_rows.max(initial=0.0) > TOL_CS * scale_b:
            return False, f"row complementary slackness {cs_rows.max():.2e}"
        dist = np.minimum(np.nan_to_num(x - lo, posinf=np.inf),
                          np.nan_to_num(hi - x, posinf=np.inf))
        dist = np.maximum(dist, 0.0)
        finite = np.isfinite(dist)
        cs_cols = np.abs(d[finite] * dist[finite])
        if cs_cols.size and cs_cols.max() > TOL_CS * scale_x * scale_c:
            return False, f"column complementary slackness {cs_cols.max():.2e}"
        return True, ""

    def _unscaled_x(self, mask: np.ndarray) -> np.ndarray:
        """d_all is in scaled units; pair it with scaled x so products match
        the unscaled d'x exactly (scale factors cancel)."""
        return self.x[mask]


def _unit(m: int, r: int) -> np.ndarray:
    v = np.zeros(m)
    v[r] = 1.0
    return v


# ---------------------------------------------------------------------------
# public API

def solve_lp(problem: LpProblem) -> LpResult:
    """Solve to optimality from a cold start."""
    solver = SimplexSolver(problem.a_matrix, problem.row_sense, problem.rhs)
    return solver.solve(problem.objective, problem.lower, problem.upper)


def solve_lp_warm(problem: LpProblem, basis: SimplexBasis | None) -> LpResult:
    """Solve reusing a prior basis (dual simplex); silently degrades to a
    cold start when the basis is missing or incompatible."""
    solver = SimplexSolver(problem.a_matrix, problem.row_sense, problem.rhs)
    return solver.solve(problem.objective, problem.lower, problem.upper, warm=basis)
