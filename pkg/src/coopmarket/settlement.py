"""Losses, difference rewards, utilities, the alpha search and welfare metrics.

Losses follow this package's sign convention: ``pb > 0`` is charging, so an
agent's loss ``sum(pb) + theta`` is the energy its battery destroyed over the
cycle and is nonnegative for any lossy cycle.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from .config import Scenario
from .simulation import SimulationTrace, run_counterfactual_without, run_simulation

IDENTITY_TOL = 1e-9


class SettlementError(ValueError):
    pass


def agent_loss(trace: SimulationTrace, i: int) -> float:
    r = trace.row(i)
    return math.fsum(trace.battery[r]) + float(trace.theta[r])


def agent_losses(trace: SimulationTrace) -> np.ndarray:
    return np.array([agent_loss(trace, i) for i in trace.prosumers])


def system_loss(trace: SimulationTrace) -> float:
    return math.fsum(agent_losses(trace))


def _loss_without(args):
    scenario, mechanism, i, include = args
    return system_loss(run_counterfactual_without(scenario, mechanism, i, include))


def marginal_losses(
    scenario: Scenario,
    mechanism: int,
    full: Optional[SimulationTrace] = None,
    include: Optional[Sequence[int]] = None,
    workers: Optional[int] = None,
) -> np.ndarray:
    """Difference evaluation for every agent: loss with minus loss without."""
    ids = list(range(scenario.n)) if include is None else sorted(include)
    if len(ids) < 2:
        raise SettlementError("marginal losses need at least two prosumers")
    if full is None:
        full = run_simulation(scenario, mechanism, ids)
    total = system_loss(full)
    jobs = [(scenario, mechanism, i, ids) for i in ids]
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            without = list(pool.map(_loss_without, jobs))
    else:
        without = [_loss_without(j) for j in jobs]
    return np.array([total - w for w in without])


def marginal_loss(scenario: Scenario, mechanism: int, i: int,
                  include: Optional[Sequence[int]] = None) -> float:
    ids = list(range(scenario.n)) if include is None else sorted(include)
    full = run_simulation(scenario, mechanism, ids)
    return system_loss(full) - _loss_without((scenario, mechanism, i, ids))


def softmax_weights(marginals: Sequence[float]) -> np.ndarray:
    x = np.asarray(marginals, dtype=float)
    if not np.isfinite(x).all():
        raise SettlementError("non-finite marginal loss")
    e = np.exp(x - x.max())
    return e / e.sum()


def component_rewards(losses: Sequence[float], weights: Sequence[float], system: float) -> np.ndarray:
    """R_i = L_i - w_i * system; sums to zero."""
    L = np.asarray(losses, dtype=float)
    w = np.asarray(weights, dtype=float)
    if L.shape != w.shape:
        raise SettlementError("losses and weights differ in length")
    if abs(math.fsum(w) - 1.0) > IDENTITY_TOL:
        raise SettlementError(f"weights sum to {math.fsum(w)}, not 1")
    if abs(math.fsum(L) - system) > IDENTITY_TOL:
        raise SettlementError("system loss is not the sum of agent losses")
    return L - w * system


def utility(trace: SimulationTrace, i: int, mechanism: int, alpha: float, price: float,
            reward: float = 0.0) -> float:
    """Negative cost of grid purchases, exchange payments and the reward."""
    if not 0.0 <= alpha < 1.0:
        raise SettlementError(f"alpha {alpha} outside [0, 1)")
    if not price > 0:
        raise SettlementError("price must be > 0")
    r = trace.row(i)
    grid = math.fsum(trace.grid_import[r])
    if mechanism in (0, 1):
        return -price * grid
    exchanged = math.fsum(trace.exchange[r])
    return -price * (grid + alpha * exchanged - (1.0 - alpha) * reward)


def ir_bounds(grid_baseline: float, grid_exchange: float, exchanged: float, reward: float,
              tol: float = 1e-12) -> Tuple[float, float]:
    """Interval of alpha for which the exchange is no worse than a baseline.

    The condition ``alpha * (X + R) <= G_k - G_2 + R`` is linear in alpha.
    Returns closed ``(lo, hi)``; an empty interval has ``lo > hi``.
    """
    slope = exchanged + reward
    rhs = grid_baseline - grid_exchange + reward
    if abs(slope) <= tol:
        return (-math.inf, math.inf) if rhs >= -IDENTITY_TOL else (math.inf, -math.inf)
    bound = rhs / slope
    return (-math.inf, bound) if slope > 0 else (bound, math.inf)


def find_alpha(traces: Dict[int, SimulationTrace], rewards: Sequence[float],
               default: float = 0.9) -> Tuple[float, bool]:
    """Lowest alpha in [0, 1) keeping every agent individually rational
    against both baselines; ``(default, False)`` when none exists."""
    ex = traces[2]
    lo, hi = 0.0, math.inf
    for row, i in enumerate(ex.prosumers):
        g2 = math.fsum(ex.grid_import[row])
        x = math.fsum(ex.exchange[row])
        for k in (0, 1):
            gk = math.fsum(traces[k].grid_import[traces[k].row(i)])
            a, b = ir_bounds(gk, g2, x, float(rewards[row]))
            lo, hi = max(lo, a), min(hi, b)
    if lo > hi or lo >= 1.0:
        return default, False
    return lo, True


def social_welfare(utilities: Sequence[float]) -> float:
    return math.fsum(utilities)


def nash_fairness(u_m: Sequence[float], u_k: Sequence[float]):
    """Log of the product of utility improvements; ``(None, False)`` unless
    every improvement is strictly positive."""
    if len(u_m) != len(u_k):
        raise SettlementError("utility vectors differ in length")
    delta = np.asarray(u_m, dtype=float) - np.asarray(u_k, dtype=float)
    if len(delta) == 0 or not (delta > 0).all():
        return None, False
    return math.fsum(np.log(delta)), True


@dataclass
class SettlementReport:
    prosumers: tuple
    price: float
    losses: np.ndarray
    marginal: np.ndarray
    weights: np.ndarray
    rewards: np.ndarray
    utilities: Dict[int, np.ndarray]
    system_loss: float
    system_loss_individual: float
    alpha: float
    feasible: bool
    welfare: Dict[int, float]
    log_f_20: Optional[float]
    log_f_10: Optional[float]
    grid_totals: Dict[int, np.ndarray] = field(default_factory=dict)
    exchanged: Optional[np.ndarray] = None

    @property
    def fairness_defined(self) -> bool:
        return self.log_f_20 is not None

    @property
    def loss_reduction(self) -> float:
        return self.system_loss_individual - self.system_loss

    def improvements(self):
        """Per-agent (u(1) - u(0), u(2) - u(0))."""
        u = self.utilities
        return np.column_stack([u[1] - u[0], u[2] - u[0]])

    def to_dict(self) -> dict:
        return {
            "prosumers": list(self.prosumers),
            "price": self.price,
            "alpha": self.alpha,
            "feasible": self.feasible,
            "system_loss": self.system_loss,
            "system_loss_individual": self.system_loss_individual,
            "loss_reduction": self.loss_reduction,
            "welfare": {str(m): v for m, v in self.welfare.items()},
            "log_f_20": self.log_f_20,
            "log_f_10": self.log_f_10,
            "fairness_defined": self.fairness_defined,
            "agents": self.agent_rows(),
        }

    def agent_rows(self):
        rows = []
        for k, i in enumerate(self.prosumers):
            rows.append({
                "prosumer": int(i),
                "L": float(self.losses[k]),
                "marginal": float(self.marginal[k]),
                "w": float(self.weights[k]),
                "R": float(self.rewards[k]),
                "u0": float(self.utilities[0][k]),
                "u1": float(self.utilities[1][k]),
                "u2": float(self.utilities[2][k]),
            })
        return rows


def settle(scenario: Scenario, include: Optional[Sequence[int]] = None,
           workers: Optional[int] = None, traces: Optional[Dict[int, SimulationTrace]] = None
           ) -> SettlementReport:
    """Run all three mechanisms and settle the cycle."""
    cfg = scenario.config
    ids = list(range(scenario.n)) if include is None else sorted(include)
    if traces is None:
        traces = {m: run_simulation(scenario, m, ids) for m in (0, 1, 2)}
    ex = traces[2]
    losses = agent_losses(ex)
    total = system_loss(ex)
    if len(ids) >= 2:
        marginal = marginal_losses(scenario, 2, ex, ids, workers)
    else:
        # A lone agent's removal leaves an empty system with zero loss.
        marginal = losses.copy()
    weights = softmax_weights(marginal)
    rewards = component_rewards(losses, weights, total)
    alpha, feasible = find_alpha(traces, rewards, cfg.alpha_default)

    utilities = {}
    for m in (0, 1, 2):
        utilities[m] = np.array([
            utility(traces[m], i, m, alpha, cfg.price, rewards[k] if m == 2 else 0.0)
            for k, i in enumerate(ids)
        ])
    welfare = {m: social_welfare(utilities[m]) for m in (0, 1, 2)}
    log_f_20, _ = nash_fairness(utilities[2], utilities[0])
    log_f_10, _ = nash_fairness(utilities[1], utilities[0])
    return SettlementReport(
        prosumers=tuple(ids),
        price=cfg.price,
        losses=losses,
        marginal=marginal,
        weights=weights,
        rewards=rewards,
        utilities=utilities,
        system_loss=total,
        system_loss_individual=system_loss(traces[1]),
        alpha=alpha,
        feasible=feasible,
        welfare=welfare,
        log_f_20=log_f_20,
        log_f_10=log_f_10,
        grid_totals={m: traces[m].grid_import.sum(axis=1) for m in (0, 1, 2)},
        exchanged=ex.exchange.sum(axis=1),
    )
