"""Benchmark allocation rules and the efficiency upper bound.

Three references frame the karma mechanism's performance:

- RANDOM tosses a fair coin per paired interaction.
- TURN grants the resource to the paired agent with the lower historical
  win fraction (ties, including the very first interaction, by coin).
- MAX_EFF is a linear program over joint (urgency, outcome) mass: it
  maximizes the population reward subject to stationarity of the urgency
  marginal, normalization, and a 0.5 aggregate win share. Its optimum
  upper-bounds the long-run average reward of any allocation rule whose
  urgency transitions follow the same outcome-conditioned chain.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import ParameterError, UrgencyProcess
from .simplex import LpError, solve_standard_form


@dataclass
class LpProblem:
    """Small dense LP: maximize c @ x subject to A x = b, x >= 0.

    Variables are the joint mass psi[u, o] in u-major order
    (index = 2 * u + o); labels carries (urgency level, outcome) per
    column. One stationarity row is linearly redundant and retained; the
    solver handles the rank deficiency.
    """

    c: np.ndarray
    A: np.ndarray
    b: np.ndarray
    labels: list[tuple[int, int]]

    def __post_init__(self) -> None:
        self.c = np.asarray(self.c, dtype=float)
        self.A = np.asarray(self.A, dtype=float)
        self.b = np.asarray(self.b, dtype=float)
        m, n = self.A.shape
        if self.c.shape != (n,) or self.b.shape != (m,) or len(self.labels) != n:
            raise ParameterError(
                f"inconsistent LP dimensions: c {self.c.shape}, A {self.A.shape}, "
                f"b {self.b.shape}, {len(self.labels)} labels"
            )


def build_max_eff_lp(process: UrgencyProcess) -> LpProblem:
    """Assemble the efficiency-bound LP for an urgency process.

    Maximize sum_u psi[u, 1] * (-level_u) subject to, for every level u,
    stationarity sum_o psi[u, o] = sum_{u-, o} psi[u-, o] phi[o, u-, u],
    total mass one, and winner share sum_u psi[u, 0] = 0.5.
    """
    n_u = process.n_levels
    n = 2 * n_u
    c = np.zeros(n)
    for u, level in enumerate(process.levels):
        c[2 * u + 1] = -float(level)

    rows = []
    rhs = []
    for u in range(n_u):
        row = np.zeros(n)
        row[2 * u] += 1.0
        row[2 * u + 1] += 1.0
        for u_prev in range(n_u):
            row[2 * u_prev] -= process.phi[0, u_prev, u]
            row[2 * u_prev + 1] -= process.phi[1, u_prev, u]
        rows.append(row)
        rhs.append(0.0)
    rows.append(np.ones(n))
    rhs.append(1.0)
    share = np.zeros(n)
    share[0::2] = 1.0
    rows.append(share)
    rhs.append(0.5)

    labels = [(level, o) for level in process.levels for o in (0, 1)]
    return LpProblem(c=np.asarray(c), A=np.asarray(rows), b=np.asarray(rhs), labels=labels)


def solve_lp(problem: LpProblem) -> tuple[float, np.ndarray]:
    """Maximize the LP; returns (optimal value, optimizer psi).

    Raises:
        LpInfeasibleError / LpUnboundedError: construction bugs; the
            efficiency LP is always feasible and bounded.
        LpError: if the claimed optimizer violates a constraint beyond 1e-9.
    """
    x, neg_value = solve_standard_form(-problem.c, problem.A, problem.b)
    residual = float(np.abs(problem.A @ x - problem.b).max())
    if residual > 1e-9:
        raise LpError(f"optimizer violates constraints by {residual:.3e}")
    return -neg_value, x


def mixture_stationary_distribution(process: UrgencyProcess, win_share: float = 0.5) -> np.ndarray:
    """Stationary urgency distribution when every agent wins a fixed share
    of its interactions, independent of state."""
    if not 0.0 <= win_share <= 1.0:
        raise ParameterError(f"win_share must lie in [0, 1], got {win_share}")
    mix = win_share * process.phi[0] + (1.0 - win_share) * process.phi[1]
    n = process.n_levels
    # Stationarity rows plus normalization; full column rank for an
    # irreducible chain, solved in the least-squares sense.
    stacked = np.vstack([mix.T - np.eye(n), np.ones((1, n))])
    target = np.zeros(n + 1)
    target[-1] = 1.0
    dist, *_ = np.linalg.lstsq(stacked, target, rcond=None)
    return dist


def random_long_run_reward(process: UrgencyProcess) -> float:
    """Long-run average reward per agent per interaction under RANDOM.

    At the even-coin stationary urgency distribution an agent loses half
    the time, paying its current urgency.
    """
    dist = mixture_stationary_distribution(process, win_share=0.5)
    return float(-(dist @ process.level_values) / 2.0)


@dataclass
class TurnCounter:
    """Per-agent history the TURN rule compares: wins over interactions."""

    wins: int = 0
    interactions: int = 0

    def __post_init__(self) -> None:
        if self.wins < 0 or self.interactions < 0 or self.wins > self.interactions:
            raise ParameterError(
                f"invalid counters: wins={self.wins} interactions={self.interactions}"
            )

    @property
    def fraction(self) -> float:
        # A fresh agent counts as fraction zero, making it maximally favored.
        return self.wins / self.interactions if self.interactions else 0.0

    def record(self, won: bool) -> None:
        self.interactions += 1
        if won:
            self.wins += 1


def random_choose(rng: np.random.Generator) -> tuple[int, int]:
    """Fair-coin outcome pair for two paired agents: (0, 1) or (1, 0)."""
    return (0, 1) if rng.random() < 0.5 else (1, 0)


def turn_choose(a: TurnCounter, b: TurnCounter, rng: np.random.Generator) -> int:
    """Pick the winner between two agents by lower historical win fraction.

    Exact ties fall back to a fair coin. Both counters are updated after
    the decision. Returns 0 if the first agent wins, 1 otherwise.
    """
    if a.fraction < b.fraction:
        winner = 0
    elif b.fraction < a.fraction:
        winner = 1
    else:
        winner = 0 if rng.random() < 0.5 else 1
    a.record(winner == 0)
    b.record(winner == 1)
    return winner
