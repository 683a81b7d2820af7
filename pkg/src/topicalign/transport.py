"""Exact balanced optimal transport between mass vectors.

The solver is a transportation simplex (north-west-corner start, MODI duals)
with Bland's entering/leaving rule, so the returned vertex is deterministic
even when the optimum is not unique.  ``lp_oracle`` solves the same instance
through an independent route (a general-purpose LP solver) and is meant for
testing on small problems only.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .errors import InvalidConfig, TooLarge, UnbalancedProblem, ZeroMass

__all__ = ["TransportProblem", "TransportPlan", "solve_exact", "lp_oracle"]

# Relative supply/demand imbalance repaired by rescaling; anything larger
# is treated as a caller error.
BALANCE_RTOL = 1e-6

_ORACLE_MAX_CELLS = 64


@dataclass(frozen=True)
class TransportProblem:
    """Supply p, demand q, and nonnegative cost matrix C of shape (len p, len q).

    Demand is rescaled to exact balance on construction when the imbalance is
    within ``BALANCE_RTOL`` relative to total supply.
    """

    supply: np.ndarray
    demand: np.ndarray
    cost: np.ndarray

    def __post_init__(self) -> None:
        p = np.asarray(self.supply, dtype=np.float64).ravel()
        q = np.asarray(self.demand, dtype=np.float64).ravel()
        c = np.asarray(self.cost, dtype=np.float64)
        if c.shape != (p.size, q.size):
            raise InvalidConfig(f"cost shape {c.shape} != ({p.size}, {q.size})")
        if p.size < 1 or q.size < 1:
            raise InvalidConfig("empty marginal")
        if np.any(p < 0) or np.any(q < 0):
            raise InvalidConfig("marginals must be nonnegative")
        if not np.all(np.isfinite(c)) or np.any(c < 0):
            raise InvalidConfig("costs must be finite and nonnegative")
        total_p, total_q = float(p.sum()), float(q.sum())
        if total_p <= 0.0:
            raise ZeroMass("total supply is zero")
        if abs(total_p - total_q) > BALANCE_RTOL * total_p:
            raise UnbalancedProblem(
                f"supply {total_p!r} and demand {total_q!r} differ beyond tolerance")
        if total_q <= 0.0:
            raise ZeroMass("total demand is zero")
        q = q * (total_p / total_q)
        object.__setattr__(self, "supply", p)
        object.__setattr__(self, "demand", q)
        object.__setattr__(self, "cost", c)

    @property
    def shape(self) -> tuple[int, int]:
        return self.cost.shape


@dataclass(frozen=True)
class TransportPlan:
    """An optimal coupling and its cost ``<C, plan>``."""

    plan: np.ndarray
    objective: float


def _northwest_corner(p: np.ndarray, q: np.ndarray):
    a, b = p.copy(), q.copy()
    n_rows, n_cols = a.size, b.size
    plan = np.zeros((n_rows, n_cols))
    basis = np.zeros((n_rows, n_cols), dtype=bool)
    i = j = 0
    for _ in range(n_rows + n_cols - 1):
        t = min(a[i], b[j])
        plan[i, j] = t
        basis[i, j] = True
        a[i] -= t
        b[j] -= t
        if i == n_rows - 1 and j == n_cols - 1:
            break
        if j == n_cols - 1:
            i += 1
        elif i == n_rows - 1:
            j += 1
        elif a[i] <= b[j]:
            i += 1
        else:
            j += 1
    return plan, basis


def _duals(cost: np.ndarray, basis: np.ndarray):
    # The basis is a spanning tree of the bipartite row/column graph; fix
    # u[0] = 0 and propagate u_i + v_j = C_ij outward.
    n_rows, n_cols = cost.shape
    u = np.full(n_rows, np.nan)
    v = np.full(n_cols, np.nan)
    rows_of_col = [np.flatnonzero(basis[:, j]) for j in range(n_cols)]
    cols_of_row = [np.flatnonzero(basis[i, :]) for i in range(n_rows)]
    u[0] = 0.0
    queue = deque([("r", 0)])
    while queue:
        side, idx = queue.popleft()
        if side == "r":
            for j in cols_of_row[idx]:
                if np.isnan(v[j]):
                    v[j] = cost[idx, j] - u[idx]
                    queue.append(("c", j))
        else:
            for i in rows_of_col[idx]:
                if np.isnan(u[i]):
                    u[i] = cost[i, idx] - v[idx]
                    queue.append(("r", i))
    return u, v


def _cycle(basis: np.ndarray, enter: tuple[int, int]):
    # Unique cycle created by adding `enter` to the basis tree: the path from
    # row node enter[0] to column node enter[1], plus the entering edge.
    n_rows, n_cols = basis.shape
    start, goal = enter[0], n_rows + enter[1]
    parent: dict[int, tuple[int, tuple[int, int]]] = {start: (-1, (-1, -1))}
    queue = deque([start])
    while queue:
        node = queue.popleft()
        if node == goal:
            break
        if node < n_rows:
            for j in np.flatnonzero(basis[node, :]):
                nxt = n_rows + j
                if nxt not in parent:
                    parent[nxt] = (node, (node, int(j)))
                    queue.append(nxt)
        else:
            j = node - n_rows
            for i in np.flatnonzero(basis[:, j]):
                if int(i) not in parent:
                    parent[int(i)] = (node, (int(i), j))
                    queue.append(int(i))
    path_cells = []
    node = goal
    while node != start:
        prev, cell = parent[node]
        path_cells.append(cell)
        node = prev
    # `enter`, then path cells walked from the column end back to the row end,
    # gives the alternating +/- cycle.
    return [enter] + path_cells


def solve_exact(problem: TransportProblem) -> TransportPlan:
    """Optimal vertex of the transportation polytope for ``problem``."""
    p, q, cost = problem.supply, problem.demand, problem.cost
    plan, basis = _northwest_corner(p, q)
    tol = 1e-11 * max(1.0, float(np.abs(cost).max()))
    max_pivots = 1000 * (p.size + q.size) + 1000

    for _ in range(max_pivots):
        u, v = _duals(cost, basis)
        reduced = cost - u[:, None] - v[None, :]
        candidates = np.flatnonzero(~basis.ravel() & (reduced.ravel() < -tol))
        if candidates.size == 0:
            break
        enter = np.unravel_index(int(candidates[0]), cost.shape)  # Bland: first in row-major order
        cycle = _cycle(basis, (int(enter[0]), int(enter[1])))
        minus = cycle[1::2]
        theta = min(plan[c] for c in minus)
        leave = min(c for c in minus if plan[c] == theta)
        for pos, cell in enumerate(cycle):
            plan[cell] += theta if pos % 2 == 0 else -theta
        plan[plan < 0] = 0.0
        plan[leave] = 0.0
        basis[leave] = False
        basis[enter] = True
    else:
        raise RuntimeError("transportation simplex failed to converge")

    objective = float(np.sum(cost * plan))
    return TransportPlan(plan=plan, objective=objective)


def lp_oracle(problem: TransportProblem) -> float:
    """Optimal objective via a general LP solver; small instances only."""
    n_rows, n_cols = problem.shape
    if n_rows * n_cols > _ORACLE_MAX_CELLS:
        raise TooLarge(f"{n_rows}x{n_cols} exceeds the oracle limit of {_ORACLE_MAX_CELLS} cells")
    n = n_rows * n_cols
    a_eq = np.zeros((n_rows + n_cols, n))
    for i in range(n_rows):
        a_eq[i, i * n_cols:(i + 1) * n_cols] = 1.0
    for j in range(n_cols):
        a_eq[n_rows + j, j::n_cols] = 1.0
    b_eq = np.concatenate([problem.supply, problem.demand])
    res = linprog(problem.cost.ravel(), A_eq=a_eq, b_eq=b_eq,
                  bounds=(0, None), method="highs")
    if not res.success:
        raise RuntimeError(f"LP oracle failed: {res.message}")
    return float(res.fun)
