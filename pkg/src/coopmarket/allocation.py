"""Per-interval clearing of the local exchange as a transportation problem.

Rows of every matrix here are buyers, columns are sellers; the grid is the
last row and the last column. The grid is a slack source (it serves whatever
the local sellers do not) and a slack sink (it absorbs unplaced surplus), so
every instance is feasible.

Arcs touching the grid cost ``big_m``. The solver does not multiply by
``big_m``: it treats cost as the pair (grid units, efficiency cost) and
compares pairs lexicographically, which is the behaviour any large enough
``big_m`` produces, without float cancellation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .market import OfferError, check_efficiency

DEFAULT_BIG_M = 1.0e6

# Cells not allowed by the connectivity matrix are priced above any route
# through the grid (two grid arcs), so an optimum never uses them.
_FORBIDDEN_UNITS = 3
_REDUCED_COST_TOL = 1e-12


class StructureError(ValueError):
    """Inputs are dimensioned inconsistently."""


class NumericError(ValueError):
    """Inputs are non-finite or outside their domain."""


@dataclass(frozen=True)
class ConnectivityMatrix:
    """Boolean (|B|+1) x (|S|+1) trading restrictions, grid last.

    Grid arcs are always connected.
    """

    entries: np.ndarray

    def __post_init__(self):
        e = np.array(self.entries, dtype=bool)
        if e.ndim != 2 or e.shape[0] < 1 or e.shape[1] < 1:
            raise StructureError("connectivity matrix must be 2-D with a grid row and column")
        e[-1, :] = True
        e[:, -1] = True
        e.flags.writeable = False
        object.__setattr__(self, "entries", e)

    @classmethod
    def full(cls, n_buyers: int, n_sellers: int) -> "ConnectivityMatrix":
        return cls(np.ones((n_buyers + 1, n_sellers + 1), dtype=bool))

    @property
    def shape(self):
        return self.entries.shape

    @property
    def is_full(self) -> bool:
        return bool(self.entries.all())


@dataclass(frozen=True)
class CostMatrix:
    """Per-kWh cost of each buyer/seller arc.

    A local arc costs the seller's round-trip efficiency; every arc that
    touches the grid costs ``big_m``.
    """

    entries: np.ndarray
    big_m: float

    @property
    def n_buyers(self) -> int:
        return self.entries.shape[0] - 1

    @property
    def n_sellers(self) -> int:
        return self.entries.shape[1] - 1

    def dominance_bound(self, total_energy: float) -> float:
        """Smallest ``big_m`` (exclusive) that dominates every local cost sum."""
        n_participants = self.n_buyers + self.n_sellers + 1
        return n_participants * total_energy * 1.0

    def dominates(self, total_energy: float) -> bool:
        return self.big_m > self.dominance_bound(total_energy)


@dataclass(frozen=True)
class AllocationMatrix:
    """Cleared quantities ``entries[b, s]``: kWh seller s delivers to buyer b."""

    entries: np.ndarray

    @property
    def local(self) -> np.ndarray:
        return self.entries[:-1, :-1]

    @property
    def from_grid(self) -> np.ndarray:
        """Per-buyer energy left to the grid."""
        return self.entries[:-1, -1]

    @property
    def to_grid(self) -> np.ndarray:
        """Per-seller surplus not placed locally."""
        return self.entries[-1, :-1]

    @property
    def grid_flow(self) -> float:
        return math.fsum(self.from_grid) + math.fsum(self.to_grid)

    def received(self) -> np.ndarray:
        return self.local.sum(axis=1)

    def delivered(self) -> np.ndarray:
        return self.local.sum(axis=0)

    def cost(self, costs: CostMatrix) -> float:
        """Objective value, computed exactly and rounded once."""
        total = Fraction(0)
        for c, x in zip(costs.entries.ravel().tolist(), self.entries.ravel().tolist()):
            if x:
                total += Fraction(c) * Fraction(x)
        return float(total)

    def lexicographic_cost(self, costs: CostMatrix):
        """(grid kWh, efficiency-weighted local kWh)."""
        local = self.local
        return self.grid_flow, math.fsum((costs.entries[:-1, :-1] * local).ravel())


def build_cost_matrix(
    seller_etas: Sequence[float],
    n_buyers: int,
    cm: Optional[ConnectivityMatrix] = None,
    big_m: float = DEFAULT_BIG_M,
    total_energy: Optional[float] = None,
) -> CostMatrix:
    """Cost of every arc: the seller's efficiency locally, ``big_m`` on the grid.

    ``total_energy``, when given, is checked against the dominance bound.
    """
    try:
        etas = [check_efficiency(float(e)) for e in seller_etas]
    except OfferError as exc:
        raise NumericError(str(exc)) from exc
    if n_buyers < 0:
        raise StructureError("negative buyer count")
    if not (math.isfinite(big_m) and big_m > 1.0):
        raise NumericError(f"big_m must be finite and > 1, got {big_m!r}")
    n_sellers = len(etas)
    if cm is not None and cm.shape != (n_buyers + 1, n_sellers + 1):
        raise StructureError(f"connectivity shape {cm.shape} != {(n_buyers + 1, n_sellers + 1)}")
    entries = np.full((n_buyers + 1, n_sellers + 1), float(big_m))
    if n_sellers and n_buyers:
        entries[:-1, :-1] = np.asarray(etas)[None, :]
    entries.flags.writeable = False
    costs = CostMatrix(entries, float(big_m))
    if total_energy is not None and not costs.dominates(total_energy):
        raise NumericError(
            f"big_m={big_m} does not dominate bound {costs.dominance_bound(total_energy)}"
        )
    return costs


def _to_exact_ints(values):
    """Scale floats to integers by a common power of two, exactly."""
    ratios = [float(v).as_integer_ratio() for v in values]
    shift = max((d.bit_length() - 1 for _, d in ratios), default=0)
    return [n << (shift - (d.bit_length() - 1)) for n, d in ratios], shift


def _check_quantities(name, values):
    out = []
    for v in values:
        v = float(v)
        if not math.isfinite(v):
            raise NumericError(f"non-finite {name} {v!r}")
        if v <= 0:
            raise NumericError(f"{name} must be > 0 (filter abstaining prosumers upstream), got {v!r}")
        out.append(v)
    return out


def solve_allocation(
    buyer_demands: Sequence[float],
    seller_supplies: Sequence[float],
    costs: CostMatrix,
    cm: Optional[ConnectivityMatrix] = None,
) -> AllocationMatrix:
    """Minimum-cost clearing of one interval.

    Minimizes grid flow first and efficiency-weighted local flow second.
    Among optimal bases, lower seller index and then lower buyer index are
    preferred.
    """
    demands = _check_quantities("buyer demand", buyer_demands)
    supplies = _check_quantities("seller supply", seller_supplies)
    nb, ns = len(demands), len(supplies)
    if costs.entries.shape != (nb + 1, ns + 1):
        raise StructureError(f"cost shape {costs.entries.shape} != {(nb + 1, ns + 1)}")
    if cm is None:
        cm = ConnectivityMatrix.full(nb, ns)
    elif cm.shape != (nb + 1, ns + 1):
        raise StructureError(f"connectivity shape {cm.shape} != {(nb + 1, ns + 1)}")
    if not np.all(np.isfinite(costs.entries)):
        raise NumericError("non-finite cost entry")
    if not costs.dominates(math.fsum(demands) + math.fsum(supplies)):
        raise NumericError("big_m does not dominate the local costs of this instance")

    ints, shift = _to_exact_ints(demands + supplies)
    d_int, s_int = ints[:nb], ints[nb:]

    # Tableau: rows are sources (sellers, then grid), columns are sinks
    # (buyers, then grid).
    grid_arc = (costs.entries >= costs.big_m).T
    units = grid_arc.astype(np.int64)
    eff = np.where(grid_arc, 0.0, costs.entries.T)
    allowed = cm.entries.T
    units[~allowed] = _FORBIDDEN_UNITS
    eff[~allowed] = 0.0
    # Grid-to-grid is the balancing slack; it carries no cost.
    units[-1, -1] = 0
    eff[-1, -1] = 0.0

    supply = s_int + [sum(d_int)]
    demand = d_int + [sum(s_int)]
    x = _transportation_simplex(supply, demand, units, eff)

    scale = 1 << shift
    out = np.zeros((nb + 1, ns + 1))
    for (r, c), q in x.items():
        if q and not (r == ns and c == nb):
            out[c, r] = q / scale
    if (out[~cm.entries] > 0).any():
        raise RuntimeError("solver routed flow over a disconnected arc")
    out.flags.writeable = False
    return AllocationMatrix(out)


def _transportation_simplex(supply, demand, units, eff):
    """Solve a balanced transportation problem with pair-valued costs.

    ``supply``/``demand`` are exact integers. Returns {(row, col): flow} over
    the final basis.
    """
    m, n = len(supply), len(demand)
    x, basis = _least_cost_start(supply, demand, units, eff)
    if m == 1 or n == 1:
        return x

    max_iter = 50 * m * n + 100
    degenerate_run = 0
    for _ in range(max_iter):
        u_k, u_r, v_k, v_r = _potentials(basis, units, eff, m, n)
        red_k = units - u_k[:, None] - v_k[None, :]
        red_r = eff - u_r[:, None] - v_r[None, :]
        negative = (red_k < 0) | ((red_k == 0) & (red_r < -_REDUCED_COST_TOL))
        for r, c in basis:
            negative[r, c] = False
        if not negative.any():
            return x
        cand = np.flatnonzero(negative)
        if degenerate_run > m * n:
            # Bland-style fallback against degenerate cycling.
            entering = divmod(int(cand[0]), n)
        else:
            keys = np.lexsort((cand, red_r.ravel()[cand], red_k.ravel()[cand]))
            entering = divmod(int(cand[keys[0]]), n)

        cycle = _cycle(basis, entering, m)
        minus = cycle[1::2]
        theta = min(x[cell] for cell in minus)
        leaving = min(cell for cell in minus if x[cell] == theta)
        degenerate_run = degenerate_run + 1 if theta == 0 else 0
        for i, cell in enumerate(cycle):
            if i % 2 == 0:
                x[cell] = x.get(cell, 0) + theta
            else:
                x[cell] -= theta
        del x[leaving]
        basis.remove(leaving)
        basis.add(entering)
    raise RuntimeError("transportation simplex did not converge")


def _least_cost_start(supply, demand, units, eff):
    m, n = len(supply), len(demand)
    start_units = units.copy()
    # Keep the slack cell out of the way until every real arc is considered.
    start_units[-1, -1] = 2
    order = np.lexsort(
        (np.tile(np.arange(n), m), np.repeat(np.arange(m), n), eff.ravel(), start_units.ravel())
    )
    supply, demand = list(supply), list(demand)
    rows, cols = set(range(m)), set(range(n))
    x, basis = {}, set()
    for flat in order.tolist():
        r, c = divmod(flat, n)
        if r not in rows or c not in cols:
            continue
        q = min(supply[r], demand[c])
        x[(r, c)] = q
        basis.add((r, c))
        supply[r] -= q
        demand[c] -= q
        if supply[r] == 0 and len(rows) > 1:
            rows.discard(r)
        else:
            cols.discard(c)
        if not cols:
            break
    return x, basis


def _tree_adjacency(basis, m):
    adj = {}
    for r, c in basis:
        adj.setdefault(r, []).append(m + c)
        adj.setdefault(m + c, []).append(r)
    return adj


def _potentials(basis, units, eff, m, n):
    u_k = np.zeros(m, dtype=np.int64)
    v_k = np.zeros(n, dtype=np.int64)
    u_r = np.zeros(m)
    v_r = np.zeros(n)
    adj = _tree_adjacency(basis, m)
    seen = {0}
    stack = [0]
    while stack:
        node = stack.pop()
        for nxt in adj.get(node, ()):
            if nxt in seen:
                continue
            seen.add(nxt)
            if node < m:
                r, c = node, nxt - m
                v_k[c] = units[r, c] - u_k[r]
                v_r[c] = eff[r, c] - u_r[r]
            else:
                r, c = nxt, node - m
                u_k[r] = units[r, c] - v_k[c]
                u_r[r] = eff[r, c] - v_r[c]
            stack.append(nxt)
    if len(seen) != m + n:
        raise RuntimeError("basis is not a spanning tree")
    return u_k, u_r, v_k, v_r


def _cycle(basis, entering, m):
    """Cells of the pivot cycle, entering first, alternating +/-."""
    r0, c0 = entering
    adj = _tree_adjacency(basis, m)
    start, goal = m + c0, r0
    parent = {start: None}
    queue = [start]
    for node in queue:
        if node == goal:
            break
        for nxt in adj.get(node, ()):
            if nxt not in parent:
                parent[nxt] = node
                queue.append(nxt)
    path = []
    node = goal
    while node is not None:
        path.append(node)
        node = parent[node]
    path.reverse()  # col c0 -> ... -> row r0
    cells = [entering]
    for a, b in zip(path, path[1:]):
        cells.append((a, b - m) if a < m else (b, a - m))
    return cells


def allocation_to_dict(demands, supplies, costs: CostMatrix, alloc: AllocationMatrix) -> dict:
    """Instance and solution as plain data, for debug dumps."""
    return {
        "demands": [float(v) for v in demands],
        "supplies": [float(v) for v in supplies],
        "costs": costs.entries.tolist(),
        "big_m": costs.big_m,
        "solution": alloc.entries.tolist(),
    }
