"""Independent brute-force references used by the test suite.

The LP reference enumerates candidate vertices directly from the geometry
(every vertex of {Ax {<=,=,>=} b, l <= x <= u} has n tight constraints drawn
from rows and bounds), solving a tiny linear system per candidate. It shares
no code with the simplex implementation it checks.
"""

from __future__ import annotations

from itertools import combinations, product

import numpy as np

FEAS_TOL = 1e-7


def _feasible(x, a_dense, senses, b, lo, hi, tol=FEAS_TOL):
    if np.any(x < lo - tol) or np.any(x > hi + tol):
        return False
    ax = a_dense @ x
    for i, s in enumerate(senses):
        if s == "=" and abs(ax[i] - b[i]) > tol:
            return False
        if s == "<" and ax[i] > b[i] + tol:
            return False
        if s == ">" and ax[i] < b[i] - tol:
            return False
    return True


def vertex_enum_optimum(c, a_dense, senses, b, lo, hi):
    """Exact optimum of a box-bounded LP by enumerating candidate vertices.

    Requires all bounds finite. Returns (objective, x) or (None, None) when
    no feasible vertex exists (for a bounded feasible box LP this means
    infeasible).
    """
    c = np.asarray(c, dtype=float)
    a_dense = np.asarray(a_dense, dtype=float)
    b = np.asarray(b, dtype=float)
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    m, n = a_dense.shape
    assert np.isfinite(lo).all() and np.isfinite(hi).all()

    eq_rows = [i for i, s in enumerate(senses) if s == "="]
    best_obj, best_x = None, None

    for k in range(0, min(m, n) + 1):
        for rows in combinations(range(m), k):
            # equality rows must always be tight, so skip subsets missing one
            # only when k < number of equalities they cannot all fit; the
            # feasibility check below rejects those candidates anyway.
            arows = a_dense[list(rows), :] if k else np.zeros((0, n))
            brows = b[list(rows)] if k else np.zeros(0)
            for free in combinations(range(n), k):
                fixed = [j for j in range(n) if j not in free]
                a_free = arows[:, list(free)] if k else np.zeros((0, 0))
                if k and abs(np.linalg.det(a_free)) < 1e-10:
                    continue
                for choice in product((0, 1), repeat=len(fixed)):
                    x = np.empty(n)
                    for j, side in zip(fixed, choice):
                        x[j] = lo[j] if side == 0 else hi[j]
                    if k:
                        rhs = brows - arows[:, fixed] @ x[fixed] if fixed else brows
                        try:
                            x[list(free)] = np.linalg.solve(a_free, rhs)
                        except np.linalg.LinAlgError:
                            continue
                    if not _feasible(x, a_dense, senses, b, lo, hi):
                        continue
                    obj = float(c @ x)
                    if best_obj is None or obj > best_obj + 1e-12:
                        best_obj, best_x = obj, x.copy()
    return best_obj, best_x


def random_box_lp(rng: np.random.Generator, max_cols=5, max_rows=4):
    """A random bounded LP that is feasible by construction (a random interior
    point is used to set right-hand sides)."""
    n = int(rng.integers(2, max_cols + 1))
    m = int(rng.integers(1, max_rows + 1))
    lo = rng.uniform(-3.0, 0.0, size=n)
    hi = lo + rng.uniform(0.5, 4.0, size=n)
    x0 = rng.uniform(lo, hi)
    a = rng.uniform(-2.0, 2.0, size=(m, n))
    a[rng.uniform(size=(m, n)) < 0.25] = 0.0
    senses = []
    b = np.empty(m)
    for i in range(m):
        kind = rng.choice(["<", ">", "="], p=[0.45, 0.35, 0.2])
        senses.append(kind)
        ax = float(a[i] @ x0)
        if kind == "<":
            b[i] = ax + float(rng.uniform(0.0, 2.0))
        elif kind == ">":
            b[i] = ax - float(rng.uniform(0.0, 2.0))
        else:
            b[i] = ax
    c = rng.uniform(-3.0, 3.0, size=n)
    return c, a, senses, b, lo, hi


def dual_bound(c, a_dense, b, lo, hi, duals):
    """Lagrangian upper bound of a max LP at the given (sign-correct) duals:
    y'b plus the box maximum of the reduced costs."""
    d = np.asarray(c, dtype=float) - np.asarray(a_dense).T @ np.asarray(duals)
    return float(np.asarray(duals) @ b
                 + np.maximum(d, 0.0) @ hi + np.minimum(d, 0.0) @ lo)
