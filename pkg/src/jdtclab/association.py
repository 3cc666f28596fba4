"""Assignment machinery: Murty's ranked K-best assignments and global nearest neighbor.

Costs are negative log weights; forbidden pairings carry a large finite cost
so scipy's Hungarian solver never sees an infeasible matrix, and any solution
touching a forbidden cell is discarded.
"""

from __future__ import annotations

import heapq
from typing import Iterator

import numpy as np
from scipy.optimize import linear_sum_assignment

__all__ = ["FORBIDDEN", "murty", "ranked_assignments", "gnn_assign"]

FORBIDDEN = 1e9
_FEASIBLE_LIMIT = FORBIDDEN / 2.0


def _solve(cost: np.ndarray) -> tuple[np.ndarray, float] | None:
    rows, cols = linear_sum_assignment(cost)
    total = float(cost[rows, cols].sum())
    if np.any(cost[rows, cols] >= _FEASIBLE_LIMIT):
        return None
    assignment = np.full(cost.shape[0], -1, dtype=int)
    assignment[rows] = cols
    return assignment, total


def murty(cost: np.ndarray, k_best: int | None) -> Iterator[tuple[np.ndarray, float]]:
    """Yield assignments (column index per row) in nondecreasing total cost.

    Every row is assigned; the matrix must have at least as many columns as
    rows. ``k_best=None`` exhausts all feasible assignments.
    """
    cost = np.asarray(cost, dtype=float)
    n_rows, n_cols = cost.shape
    if n_rows == 0:
        yield np.zeros(0, dtype=int), 0.0
        return
    if n_cols < n_rows:
        raise ValueError("cost matrix needs at least as many columns as rows")

    first = _solve(cost)
    if first is None:
        return
    counter = 0
    # Heap entries: (total cost, tiebreak counter, working matrix, assignment).
    heap: list[tuple[float, int, np.ndarray, np.ndarray]] = [
        (first[1], counter, cost, first[0])
    ]
    seen: set[tuple[int, ...]] = set()
    yielded = 0
    while heap:
        total, _, matrix, assignment = heapq.heappop(heap)
        key = tuple(assignment.tolist())
        if key in seen:
            continue
        seen.add(key)
        yield assignment, total
        yielded += 1
        if k_best is not None and yielded >= k_best:
            return
        # Murty partition: progressively fix the first i pairs and forbid pair i.
        partition = matrix.copy()
        for row in range(n_rows):
            col = assignment[row]
            sub = partition.copy()
            sub[row, col] = FORBIDDEN
            solved = _solve(sub)
            if solved is not None:
                sub_assignment, sub_total = solved
                key2 = tuple(sub_assignment.tolist())
                if key2 not in seen:
                    counter += 1
                    heapq.heappush(heap, (sub_total, counter, sub, sub_assignment))
            # Fix (row, col) for the remaining subproblems.
            fixed_row = np.full(n_cols, FORBIDDEN)
            fixed_row[col] = partition[row, col]
            partition[row, :] = fixed_row
            partition[:, col] = FORBIDDEN
            partition[row, col] = fixed_row[col]


def ranked_assignments(cost: np.ndarray, k_best: int | None) -> list[tuple[np.ndarray, float]]:
    return list(murty(cost, k_best))


def gnn_assign(cost: np.ndarray, gate: float = np.inf) -> dict[int, int]:
    """Global nearest neighbor: min-total-cost matching, gated, as {row: col}.

    Entries above the gate (or FORBIDDEN) stay unassigned.
    """
    cost = np.asarray(cost, dtype=float)
    if cost.size == 0:
        return {}
    work = cost.copy()
    work[work > gate] = FORBIDDEN
    n_rows, n_cols = work.shape
    # Pad with per-row dummy columns so leaving a row unassigned is always feasible.
    padded = np.full((n_rows, n_cols + n_rows), FORBIDDEN)
    padded[:, :n_cols] = work
    for r in range(n_rows):
        padded[r, n_cols + r] = _FEASIBLE_LIMIT / 1e3
    rows, cols = linear_sum_assignment(padded)
    out: dict[int, int] = {}
    for r, c in zip(rows, cols):
        if c < n_cols and work[r, c] < _FEASIBLE_LIMIT:
            out[int(r)] = int(c)
    return out
