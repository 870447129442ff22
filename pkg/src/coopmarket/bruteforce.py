"""Exhaustive reference solver for small clearing instances (test oracle).

Local arc costs depend on the seller only, so the objective is a function of
how much each seller places locally. The oracle enumerates every vector of
seller totals on the quantity lattice, keeps those a buyer assignment can
realize (Hall's condition on the connectivity graph), and picks the best one
lexicographically: least grid flow, then least efficiency-weighted flow.
The flows themselves are recovered with a plain augmenting-path max-flow.
"""
from __future__ import annotations

import itertools
import math
from typing import Optional, Sequence

import numpy as np

from .allocation import AllocationMatrix, ConnectivityMatrix, CostMatrix, StructureError

MAX_PARTICIPANTS = 4
MAX_LATTICE_POINTS = 2_000_000


def brute_force_allocation(
    buyer_demands: Sequence[float],
    seller_supplies: Sequence[float],
    costs: CostMatrix,
    cm: Optional[ConnectivityMatrix] = None,
    step: float = 1.0,
) -> AllocationMatrix:
    nb, ns = len(buyer_demands), len(seller_supplies)
    if nb > MAX_PARTICIPANTS or ns > MAX_PARTICIPANTS:
        raise ValueError(f"instance too large for enumeration ({nb}x{ns})")
    if costs.entries.shape != (nb + 1, ns + 1):
        raise StructureError("cost matrix does not match the instance")
    if cm is None:
        cm = ConnectivityMatrix.full(nb, ns)
    local_costs = costs.entries[:-1, :-1]
    if nb and ns and not np.all(local_costs == local_costs[0]):
        raise ValueError("oracle requires seller-only local costs")
    etas = local_costs[0] if nb else np.zeros(ns)

    e_b = _units(buyer_demands, step)
    e_s = _units(seller_supplies, step)
    n_points = math.prod(q + 1 for q in e_s)
    if n_points > MAX_LATTICE_POINTS:
        raise ValueError("instance too large for enumeration")

    allowed = cm.entries[:-1, :-1]
    if ns:
        grids = np.meshgrid(*[np.arange(q + 1) for q in e_s], indexing="ij")
        y = np.stack([g.ravel() for g in grids], axis=1)
    else:
        y = np.zeros((1, 0), dtype=int)
    ok = np.ones(len(y), dtype=bool)
    for k in range(1, ns + 1):
        for subset in itertools.combinations(range(ns), k):
            reach = allowed[:, list(subset)].any(axis=1)
            cap = sum(q for q, r in zip(e_b, reach) if r)
            ok &= y[:, list(subset)].sum(axis=1) <= cap
    y = y[ok]
    placed = y.sum(axis=1)
    local = y @ etas if ns else np.zeros(len(y))
    best_placed = placed.max()
    tied = np.flatnonzero(placed == best_placed)
    pick = tied[np.argmin(local[tied])]
    totals = [int(v) for v in y[pick]]

    flows = _assign(totals, e_b, allowed)
    out = np.zeros((nb + 1, ns + 1))
    for (b, s), q in flows.items():
        out[b, s] = q * step
    for b in range(nb):
        out[b, -1] = (e_b[b] - sum(flows.get((b, s), 0) for s in range(ns))) * step
    for s in range(ns):
        out[-1, s] = (e_s[s] - totals[s]) * step
    return AllocationMatrix(out)


def _units(values, step):
    out = []
    for v in values:
        q = round(float(v) / step)
        if q <= 0 or abs(q * step - float(v)) > 1e-12 * max(1.0, abs(float(v))):
            raise ValueError(f"quantity {v!r} is not a positive multiple of {step}")
        out.append(q)
    return out


def _assign(totals, e_b, allowed):
    """Integer flows realizing the seller totals (Edmonds-Karp)."""
    nb, ns = len(e_b), len(totals)
    src, sink = 0, 1 + ns + nb
    cap = {}

    def arc(a, b, c):
        cap[(a, b)] = cap.get((a, b), 0) + c
        cap.setdefault((b, a), 0)

    for s in range(ns):
        arc(src, 1 + s, totals[s])
        for b in range(nb):
            if allowed[b, s]:
                arc(1 + s, 1 + ns + b, sum(totals))
    for b in range(nb):
        arc(1 + ns + b, sink, e_b[b])
    nbrs = {}
    for a, b in cap:
        nbrs.setdefault(a, []).append(b)

    while True:
        parent = {src: None}
        queue = [src]
        for node in queue:
            for nxt in nbrs.get(node, ()):
                if nxt not in parent and cap[(node, nxt)] > 0:
                    parent[nxt] = node
                    queue.append(nxt)
        if sink not in parent:
            break
        path, node = [], sink
        while parent[node] is not None:
            path.append((parent[node], node))
            node = parent[node]
        push = min(cap[e] for e in path)
        for a, b in path:
            cap[(a, b)] -= push
            cap[(b, a)] += push

    flows = {}
    for s in range(ns):
        for b in range(nb):
            if allowed[b, s]:
                q = cap[(1 + ns + b, 1 + s)]
                if q:
                    flows[(b, s)] = q
    if any(sum(flows.get((b, s), 0) for b in range(nb)) != totals[s] for s in range(ns)):
        raise RuntimeError("seller totals are not realizable")
    return flows
