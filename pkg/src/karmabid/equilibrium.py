"""Stationary equilibrium solver for the mean-field bidding game.

A stationary Nash equilibrium is a social state (d, pi) where d is
stationary under the population dynamics induced by pi and pi is a best
response to the values it generates at every private state. The solver
alternates policy evaluation, a temperature-smoothed best response, and
damped push-forward of the state distribution, annealing the temperature
until both the exploitability and the stationarity residual pass their
tolerances.

Layout conventions: private states are (urgency index u, karma k) with
karma truncated to {0, ..., k_max}; flat state index is u * (k_max+1) + k.
Value arrays are (n_levels, k_max+1); the policy and Q tables are
(n_levels, k_max+1, k_max+1) indexed [u, k, b], with entries for b > k
zeroed (policy) or NaN (Q).
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .model import (
    GameConfig,
    ParameterError,
    SocialState,
    UrgencyProcess,
    average_payment,
    bid_marginal,
    feasible_bids,
    redistribution_split,
    win_prob_all_bids,
)


class SolverError(RuntimeError):
    """Raised when a value computation fails to meet its residual contract."""

    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


@dataclass
class SolverConfig:
    """Knobs of the equilibrium iteration.

    br_temperature is the initial softmax temperature of the perturbed
    best response; it decays multiplicatively each outer iteration down
    to temperature_floor. step_size damps both the policy and the
    distribution updates.
    """

    br_temperature: float = 2.0
    temperature_decay: float = 0.97
    temperature_floor: float = 1e-5
    step_size: float = 0.2
    tol_policy: float = 1e-4
    tol_distribution: float = 1e-6
    tol_value: float = 1e-9
    max_outer_iters: int = 2000

    def __post_init__(self) -> None:
        for name in ("br_temperature", "temperature_decay", "temperature_floor",
                     "step_size", "tol_policy", "tol_distribution", "tol_value"):
            if getattr(self, name) <= 0:
                raise ParameterError(f"{name} must be positive, got {getattr(self, name)}")
        if self.step_size > 1.0:
            raise ParameterError(f"step_size must lie in (0, 1], got {self.step_size}")
        if self.temperature_decay > 1.0:
            raise ParameterError(f"temperature_decay must lie in (0, 1], got {self.temperature_decay}")
        if self.max_outer_iters < 1:
            raise ParameterError(f"max_outer_iters must be positive, got {self.max_outer_iters}")


@dataclass
class ValueTables:
    """Value quantities of one policy-evaluation pass.

    V: expected discounted reward per (u, k).
    R: expected immediate reward per (u, k).
    P: flat state-to-state transition kernel induced by the policy.
    Q: one-step deviation values per (u, k, b), NaN for b > k; filled in
       by q_function.
    """

    V: np.ndarray
    R: np.ndarray
    P: np.ndarray
    Q: np.ndarray | None = None


@dataclass
class EquilibriumResult:
    """Converged (or best-effort) social state with diagnostics.

    residuals has one row per outer iteration with columns
    (stationarity residual in total variation, exploitability), both
    measured on the social state entering that iteration.
    """

    social: SocialState
    values: ValueTables
    residuals: np.ndarray
    converged: bool
    iterations: int

    @property
    def exploitability(self) -> float:
        return float(self.residuals[-1, 1])

    @property
    def stationarity_residual(self) -> float:
        return float(self.residuals[-1, 0])

    def summary(self) -> dict:
        return {
            "converged": bool(self.converged),
            "iterations": int(self.iterations),
            "exploitability": self.exploitability,
            "stationarity_residual": self.stationarity_residual,
            "mean_karma": self.social.mean_karma,
        }


def initial_social_state(process: UrgencyProcess, config: GameConfig) -> SocialState:
    """Unbiased starting point: urgency uniform, karma point mass at k_bar
    (so the mean karma equals k_bar exactly), policy uniform over feasible bids."""
    n_u = process.n_levels
    nk = config.k_max + 1
    d = np.zeros((n_u, nk))
    d[:, config.k_bar] = 1.0 / n_u
    pi = np.zeros((n_u, nk, nk))
    for k in range(nk):
        pi[:, k, : k + 1] = 1.0 / (k + 1)
    return SocialState(d=d, pi=pi)


def _karma_landing(nk: int, p_bar: float) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, float, float]:
    """Truncated landing indices for winners (per k, b) and losers (per k)."""
    k_max = nk - 1
    low, high, f_low, f_high = redistribution_split(p_bar)
    ks = np.arange(nk)
    # Winner balance k - b + received; infeasible bids (b > k) carry zero
    # policy weight, the clip just keeps their dummy indices in range.
    win_lo = np.clip(ks[:, None] - ks[None, :] + low, 0, k_max)
    win_hi = np.clip(ks[:, None] - ks[None, :] + high, 0, k_max)
    lose_lo = np.minimum(ks + low, k_max)
    lose_hi = np.minimum(ks + high, k_max)
    return win_lo, win_hi, lose_lo, lose_hi, f_low, f_high


def transition_kernel(process: UrgencyProcess, social: SocialState) -> np.ndarray:
    """Flat (S x S) state transition kernel induced by the social state.

    Rows are per current (u, k), columns per next (u, k); each row sums
    to one because truncated overflow is reassigned to k_max.
    """
    n_u, nk = social.d.shape
    nu = bid_marginal(social)
    gamma0 = win_prob_all_bids(nu)
    gamma1 = 1.0 - gamma0
    p_bar = average_payment(social)
    win_lo, win_hi, lose_lo, lose_hi, f_low, f_high = _karma_landing(nk, p_bar)

    win_weight = social.pi * gamma0[None, None, :]            # (u, k, b)
    lose_weight = np.einsum("ukb,b->uk", social.pi, gamma1)   # (u, k)

    karma_win = np.zeros((n_u, nk, nk))
    karma_lose = np.zeros((n_u, nk, nk))
    u_idx = np.broadcast_to(np.arange(n_u)[:, None, None], win_weight.shape)
    k_idx = np.broadcast_to(np.arange(nk)[None, :, None], win_weight.shape)
    for idx, frac in ((win_lo, f_low), (win_hi, f_high)):
        if frac == 0.0:
            continue
        np.add.at(karma_win, (u_idx, k_idx, np.broadcast_to(idx[None], win_weight.shape)),
                  win_weight * frac)
    u_idx2 = np.broadcast_to(np.arange(n_u)[:, None], lose_weight.shape)
    k_idx2 = np.broadcast_to(np.arange(nk)[None, :], lose_weight.shape)
    for idx, frac in ((lose_lo, f_low), (lose_hi, f_high)):
        if frac == 0.0:
            continue
        np.add.at(karma_lose, (u_idx2, k_idx2, np.broadcast_to(idx[None], lose_weight.shape)),
                  lose_weight * frac)

    kernel = (
        np.einsum("uv,ukm->ukvm", process.phi[0], karma_win)
        + np.einsum("uv,ukm->ukvm", process.phi[1], karma_lose)
    )
    size = n_u * nk
    return kernel.reshape(size, size)


def policy_evaluation(
    process: UrgencyProcess,
    social: SocialState,
    config: GameConfig,
    solver: SolverConfig | None = None,
) -> ValueTables:
    """Evaluate the shared policy: immediate rewards, kernel, and values.

    V solves the discounted fixed-point equation V = R + alpha P V by a
    direct dense solve; the result must meet tol_value in sup norm.

    Raises:
        SolverError: if the value residual exceeds tol_value (carries the
            residual).
    """
    solver = solver if solver is not None else SolverConfig()
    nu = bid_marginal(social)
    gamma1 = 1.0 - win_prob_all_bids(nu)
    xi = -np.outer(process.level_values, gamma1)          # (u, b)
    reward = np.einsum("ukb,ub->uk", social.pi, xi)
    kernel = transition_kernel(process, social)
    size = reward.size
    flat = np.linalg.solve(np.eye(size) - config.alpha * kernel, reward.ravel())
    residual = float(np.abs(flat - (reward.ravel() + config.alpha * (kernel @ flat))).max())
    if residual > solver.tol_value:
        raise SolverError(
            f"policy evaluation residual {residual:.3e} exceeds tol_value {solver.tol_value:.3e}",
            residual=residual,
        )
    return ValueTables(V=flat.reshape(reward.shape), R=reward, P=kernel)


def q_function(
    values: ValueTables,
    process: UrgencyProcess,
    social: SocialState,
    config: GameConfig,
) -> np.ndarray:
    """One-step deviation values Q[u, k, b] for every feasible bid b <= k.

    Q is the immediate reward of bidding b plus the discounted expected
    continuation value over the outcome-mixed karma and urgency moves.
    Entries with b > k are NaN (absent).
    """
    n_u, nk = social.d.shape
    nu = bid_marginal(social)
    gamma0 = win_prob_all_bids(nu)
    gamma1 = 1.0 - gamma0
    p_bar = average_payment(social)
    win_lo, win_hi, lose_lo, lose_hi, f_low, f_high = _karma_landing(nk, p_bar)

    w_next = np.einsum("ouv,vk->ouk", process.phi, values.V)  # E[V | o, u, k+]
    exp_win = f_low * w_next[0][:, win_lo] + f_high * w_next[0][:, win_hi]     # (u, k, b)
    exp_lose = f_low * w_next[1][:, lose_lo] + f_high * w_next[1][:, lose_hi]  # (u, k)

    xi = -np.outer(process.level_values, gamma1)
    q = xi[:, None, :] + config.alpha * (
        gamma0[None, None, :] * exp_win + gamma1[None, None, :] * exp_lose[:, :, None]
    )
    feas = feasible_bids(nk - 1)[None, :, :]
    return np.where(feas, q, np.nan)


def exploitability(q: np.ndarray, pi: np.ndarray) -> float:
    """Largest one-step gain any state can get by deviating from pi.

    Zero exactly at a best response; the max over states is floored at
    zero to discard sub-epsilon float dust.
    """
    best = np.nanmax(q, axis=2)
    current = np.einsum("ukb,ukb->uk", pi, np.nan_to_num(q, nan=0.0))
    return max(float((best - current).max()), 0.0)


def perturbed_best_response(q: np.ndarray, temperature: float) -> np.ndarray:
    """Softmax best response over feasible bids, sharpened as temperature -> 0.

    Exponentials are shifted by the per-state maximum, so any Q scale is
    safe; exact ties split evenly in the low-temperature limit.
    """
    if temperature <= 0:
        raise ParameterError(f"temperature must be positive, got {temperature}")
    feas = np.isfinite(q)
    shifted = np.where(feas, q - np.nanmax(q, axis=2, keepdims=True), 0.0)
    weights = np.where(feas, np.exp(shifted / temperature), 0.0)
    return weights / weights.sum(axis=2, keepdims=True)


def stationary_distribution_step(
    process: UrgencyProcess, social: SocialState, step_size: float
) -> SocialState:
    """One damped push of the state distribution through the kernel.

    Returns a social state with d <- (1 - step) d + step (d P) and the
    policy unchanged. A stationary d is a fixed point.
    """
    if not 0.0 < step_size <= 1.0:
        raise ParameterError(f"step_size must lie in (0, 1], got {step_size}")
    kernel = transition_kernel(process, social)
    push = (social.d.ravel() @ kernel).reshape(social.d.shape)
    d_new = (1.0 - step_size) * social.d + step_size * push
    return SocialState(d=d_new, pi=social.pi)


def solve_sne(
    process: UrgencyProcess,
    config: GameConfig,
    solver: SolverConfig | None = None,
    initial: SocialState | None = None,
) -> EquilibriumResult:
    """Iterate smoothed best response with annealing to a stationary equilibrium.

    Each outer iteration evaluates the current social state, records its
    residual pair, and stops as soon as both exploitability and the
    stationarity residual meet their tolerances; otherwise the policy is
    mixed toward the softmax best response and the distribution is pushed
    one damped step, reusing the kernel of the evaluation. Deterministic:
    identical inputs give bit-identical residual traces.

    Non-convergence is reported through converged=False on the result,
    never as an exception.
    """
    solver = solver if solver is not None else SolverConfig()
    social = initial if initial is not None else initial_social_state(process, config)
    if social.d.shape != (process.n_levels, config.k_max + 1):
        raise ParameterError(
            f"initial social state shape {social.d.shape} does not match "
            f"({process.n_levels}, {config.k_max + 1})"
        )
    temperature = solver.br_temperature
    trace: list[tuple[float, float]] = []
    converged = False
    values: ValueTables | None = None
    q: np.ndarray | None = None
    iterations = 0

    for iterations in range(1, solver.max_outer_iters + 1):
        values = policy_evaluation(process, social, config, solver)
        q = q_function(values, process, social, config)
        expl = exploitability(q, social.pi)
        push = (social.d.ravel() @ values.P).reshape(social.d.shape)
        resid = 0.5 * float(np.abs(push - social.d).sum())
        trace.append((resid, expl))
        if expl <= solver.tol_policy and resid <= solver.tol_distribution:
            converged = True
            break
        if iterations == solver.max_outer_iters:
            break
        target = perturbed_best_response(q, temperature)
        pi_new = (1.0 - solver.step_size) * social.pi + solver.step_size * target
        d_new = (1.0 - solver.step_size) * social.d + solver.step_size * push
        social = SocialState(d=d_new, pi=pi_new)
        temperature = max(temperature * solver.temperature_decay, solver.temperature_floor)

    assert values is not None and q is not None
    return EquilibriumResult(
        social=social,
        values=dataclasses.replace(values, Q=q),
        residuals=np.asarray(trace),
        converged=converged,
        iterations=iterations,
    )


def _fmt(value: float) -> str:
    return repr(float(value))


def write_policy_csv(path: Path | str, process: UrgencyProcess, social: SocialState) -> None:
    """Policy table as CSV rows (urgency_level, karma, bid, probability)."""
    lines = ["urgency_level,karma,bid,probability"]
    for u, level in enumerate(process.levels):
        for k in range(social.k_max + 1):
            for b in range(k + 1):
                lines.append(f"{level},{k},{b},{_fmt(social.pi[u, k, b])}")
    Path(path).write_text("\n".join(lines) + "\n")


def write_distribution_csv(path: Path | str, process: UrgencyProcess, social: SocialState) -> None:
    """State distribution as CSV rows (urgency_level, karma, mass)."""
    lines = ["urgency_level,karma,mass"]
    for u, level in enumerate(process.levels):
        for k in range(social.k_max + 1):
            lines.append(f"{level},{k},{_fmt(social.d[u, k])}")
    Path(path).write_text("\n".join(lines) + "\n")


def write_residuals_csv(path: Path | str, result: EquilibriumResult) -> None:
    """Residual trace as CSV rows (iteration, stationarity_residual, exploitability)."""
    lines = ["iteration,stationarity_residual,exploitability"]
    for i, (resid, expl) in enumerate(result.residuals, start=1):
        lines.append(f"{i},{_fmt(resid)},{_fmt(expl)}")
    Path(path).write_text("\n".join(lines) + "\n")
