"""Exact solver for small transportation linear programs.

Problems here are tiny (mixture sizes up to ~15), so an exact
transportation simplex beats approximate or regularized solvers: results
are deterministic, vertex-exact, and tie-broken reproducibly. Pivoting
follows Bland's rule, so degenerate instances terminate.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError

_RC_TOL = 1e-12  # reduced-cost threshold for entering cells
_SUM_TOL = 1e-9
_BALANCE_TOL = 1e-6


@dataclass
class TransportPlan:
    gamma: np.ndarray  # (m, n) nonnegative
    objective: float

    def residuals(self, pi1: np.ndarray, pi2: np.ndarray) -> tuple[float, float]:
        r1 = float(np.abs(self.gamma.sum(axis=1) - pi1).max())
        r2 = float(np.abs(self.gamma.sum(axis=0) - pi2).max())
        return r1, r2


def solve_transport(M: np.ndarray, pi1: np.ndarray, pi2: np.ndarray) -> TransportPlan:
    """Minimize sum(M * gamma) over plans with marginals pi1, pi2.

    Returns an exact optimal vertex. Among alternative optima reachable by
    one pivot, the plan that is lexicographically smallest in row-major
    order is returned, making degenerate instances reproducible.
    """
    M = np.asarray(M, dtype=float)
    pi1 = np.asarray(pi1, dtype=float)
    pi2 = np.asarray(pi2, dtype=float)
    if M.ndim != 2 or M.shape != (pi1.size, pi2.size):
        raise DataError(f"cost matrix {M.shape} does not match marginals {pi1.size}x{pi2.size}")
    if not (np.all(np.isfinite(M)) and np.all(np.isfinite(pi1)) and np.all(np.isfinite(pi2))):
        raise DataError("non-finite transport inputs")
    if np.any(pi1 < 0) or np.any(pi2 < 0):
        raise DataError("negative marginal mass")
    s1, s2 = float(pi1.sum()), float(pi2.sum())
    if abs(s1 - s2) > _BALANCE_TOL:
        raise DataError(f"marginals are unbalanced: {s1} vs {s2}")
    if abs(s1 - 1.0) > _SUM_TOL or abs(s2 - 1.0) > _SUM_TOL:
        raise DataError(f"marginals must sum to 1, got {s1} and {s2}")

    solver = _Simplex(M, pi1, pi2 * (s1 / s2) if s2 else pi2)
    solver.run()
    best = solver.gamma.copy()
    # one-pivot sweep over zero-reduced-cost cells for a reproducible
    # representative among alternative optimal vertices
    for cell in solver.zero_reduced_cost_nonbasics():
        alt = solver.pivoted_copy(cell)
        if alt is not None and _lex_less(alt, best):
            best = alt
    best[best < 0] = 0.0
    return TransportPlan(gamma=best, objective=float((M * best).sum()))


def _lex_less(a: np.ndarray, b: np.ndarray) -> bool:
    fa, fb = a.ravel(), b.ravel()
    for x, y in zip(fa, fb):
        if x != y:
            return x < y
    return False


class _Simplex:
    """Transportation simplex over the bipartite row/column graph."""

    def __init__(self, M: np.ndarray, supply: np.ndarray, demand: np.ndarray):
        self.M = M
        self.m, self.n = M.shape
        self.supply = supply
        self.demand = demand
        self.gamma = np.zeros_like(M)
        self.basis: list[tuple[int, int]] = []
        self._northwest_init()

    def _northwest_init(self) -> None:
        s = self.supply.copy()
        d = self.demand.copy()
        i = j = 0
        while True:
            q = min(s[i], d[j])
            self.gamma[i, j] = q
            self.basis.append((i, j))
            s[i] -= q
            d[j] -= q
            if i == self.m - 1 and j == self.n - 1:
                break
            # walk a monotone staircase so the basis stays a spanning tree
            if s[i] <= 0 and i < self.m - 1:
                i += 1
            else:
                j += 1

    def _duals(self) -> tuple[np.ndarray, np.ndarray]:
        u = np.full(self.m, np.nan)
        v = np.full(self.n, np.nan)
        u[0] = 0.0
        rows_of_col: dict[int, list[int]] = {}
        cols_of_row: dict[int, list[int]] = {}
        for r, c in self.basis:
            cols_of_row.setdefault(r, []).append(c)
            rows_of_col.setdefault(c, []).append(r)
        stack = [("r", 0)]
        while stack:
            kind, idx = stack.pop()
            if kind == "r":
                for c in cols_of_row.get(idx, []):
                    if np.isnan(v[c]):
                        v[c] = self.M[idx, c] - u[idx]
                        stack.append(("c", c))
            else:
                for r in rows_of_col.get(idx, []):
                    if np.isnan(u[r]):
                        u[r] = self.M[r, idx] - v[idx]
                        stack.append(("r", r))
        return u, v

    def _reduced_costs(self) -> np.ndarray:
        u, v = self._duals()
        return self.M - u[:, None] - v[None, :]

    def _cycle(self, enter: tuple[int, int]) -> list[tuple[int, int]]:
        """The unique alternating cycle the entering cell closes, as a cell
        sequence starting at the entering cell (signs alternate +,-,+,...)."""
        adj: dict[tuple[str, int], list[tuple[tuple[str, int], tuple[int, int]]]] = {}
        for r, c in self.basis:
            adj.setdefault(("r", r), []).append((("c", c), (r, c)))
            adj.setdefault(("c", c), []).append((("r", r), (r, c)))
        start = ("r", enter[0])
        goal = ("c", enter[1])
        prev: dict[tuple[str, int], tuple[tuple[str, int], tuple[int, int]]] = {start: (start, enter)}
        queue = [start]
        while queue:
            node = queue.pop(0)
            if node == goal:
                break
            for nxt, cell in adj.get(node, []):
                if nxt not in prev:
                    prev[nxt] = (node, cell)
                    queue.append(nxt)
        if goal not in prev:
            raise AssertionError("basis is not a spanning tree")
        path_cells: list[tuple[int, int]] = []
        node = goal
        while node != start:
            parent, cell = prev[node]
            path_cells.append(cell)
            node = parent
        return [enter] + path_cells

    def run(self, max_pivots: int = 100000) -> None:
        for _ in range(max_pivots):
            rc = self._reduced_costs()
            basic = set(self.basis)
            enter = None
            for i in range(self.m):  # Bland: first eligible cell, row-major
                for j in range(self.n):
                    if (i, j) not in basic and rc[i, j] < -_RC_TOL:
                        enter = (i, j)
                        break
                if enter is not None:
                    break
            if enter is None:
                return
            self._pivot(enter)
        raise AssertionError("transport simplex failed to terminate")

    def _pivot(self, enter: tuple[int, int]) -> None:
        cycle = self._cycle(enter)
        minus = cycle[1::2]
        theta = min(self.gamma[c] for c in minus)
        leave = min((c for c in minus if self.gamma[c] == theta))
        for k, cell in enumerate(cycle):
            self.gamma[cell] += theta if k % 2 == 0 else -theta
        self.gamma[leave] = 0.0
        self.basis.remove(leave)
        self.basis.append(enter)

    def zero_reduced_cost_nonbasics(self) -> list[tuple[int, int]]:
        rc = self._reduced_costs()
        basic = set(self.basis)
        return [
            (i, j)
            for i in range(self.m)
            for j in range(self.n)
            if (i, j) not in basic and abs(rc[i, j]) <= _RC_TOL
        ]

    def pivoted_copy(self, enter: tuple[int, int]) -> np.ndarray | None:
        cycle = self._cycle(enter)
        minus = cycle[1::2]
        theta = min(self.gamma[c] for c in minus)
        if theta <= 0:
            return None
        alt = self.gamma.copy()
        for k, cell in enumerate(cycle):
            alt[cell] += theta if k % 2 == 0 else -theta
        return alt
