"""
bisimagg DP Solver
Bellman backups, value iteration with the eps(1 - gamma) / (2 gamma) stopping
rule, greedy policy extraction and iterative policy evaluation.
"""

import logging
from typing import Optional, Sequence

import numpy as np

from bisimagg.core.errors import DimensionError, IterationCapError, PreconditionError
from bisimagg.core.mdp import Mdp

logger = logging.getLogger(__name__)


def _iteration_cap(cap: Optional[int]) -> int:
    if cap is None:
        from bisimagg import config
        cap = config.VI_ITERATION_CAP
    return int(cap)


def _check_gamma(gamma: float):
    if not 0.0 < gamma < 1.0:
        raise PreconditionError(f"gamma must lie in (0, 1), got {gamma}")


def _check_values(mdp: Mdp, v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.shape != (mdp.n_states,):
        raise DimensionError(f"value function of shape {v.shape}, expected ({mdp.n_states},)")
    return v


def stopping_threshold(gamma: float, epsilon: float) -> float:
    """Max-norm step size below which the current iterate is within epsilon of V*."""
    return epsilon * (1.0 - gamma) / (2.0 * gamma)


# ─── Backups ──────────────────────────────────────────────────────────────────

def q_values(mdp: Mdp, gamma: float, v) -> np.ndarray:
    """Q[a, s] = r_s^a + gamma * sum_s' P^a_ss' v(s')."""
    v = _check_values(mdp, v)
    return mdp.rewards + gamma * (mdp.transitions @ v)


def bellman_backup(mdp: Mdp, gamma: float, v) -> np.ndarray:
    """One exact Bellman optimality backup."""
    _check_gamma(gamma)
    return q_values(mdp, gamma, v).max(axis=0)


# ─── Value iteration ──────────────────────────────────────────────────────────

def value_iteration(
    mdp: Mdp,
    gamma: float,
    epsilon: float,
    max_iterations: Optional[int] = None,
) -> tuple:
    """
    Iterate from V_0 = 0 until ||V_{n+1} - V_n|| <= eps(1 - gamma)/(2 gamma).
    Returns (V_{n+1}, number of backups); the result is within epsilon of V*.
    Raises IterationCapError if the cap is reached first.
    """
    _check_gamma(gamma)
    if not epsilon > 0.0:
        raise PreconditionError(f"epsilon must be positive, got {epsilon}")
    cap = _iteration_cap(max_iterations)
    threshold = stopping_threshold(gamma, epsilon)

    v = np.zeros(mdp.n_states)
    for n in range(1, cap + 1):
        v_next = bellman_backup(mdp, gamma, v)
        step = float(np.max(np.abs(v_next - v)))
        v = v_next
        if step <= threshold:
            logger.debug(f"value_iteration: converged after {n} backups (step {step:.3e})")
            return v, n

    raise IterationCapError(
        f"value iteration reached the cap of {cap} backups (gamma={gamma}, epsilon={epsilon})",
        iterations=cap,
    )


def finite_horizon_values(mdp: Mdp, gamma: float, n: int) -> np.ndarray:
    """V_n: exactly n backups from V_0 = 0."""
    _check_gamma(gamma)
    if n < 0:
        raise PreconditionError(f"horizon must be non-negative, got {n}")
    v = np.zeros(mdp.n_states)
    for _ in range(n):
        v = bellman_backup(mdp, gamma, v)
    return v


# ─── Policies ─────────────────────────────────────────────────────────────────

def greedy_policy(mdp: Mdp, gamma: float, v) -> np.ndarray:
    """Per-state argmax of the backup; ties go to the lowest action index."""
    # np.argmax returns the first maximal index
    return np.argmax(q_values(mdp, gamma, v), axis=0).astype(int)


def _check_policy(mdp: Mdp, policy: Sequence[int]) -> np.ndarray:
    pi = np.asarray(policy)
    if pi.shape != (mdp.n_states,):
        raise DimensionError(f"policy of shape {pi.shape}, expected ({mdp.n_states},)")
    if not np.issubdtype(pi.dtype, np.integer):
        if not np.all(np.equal(np.mod(pi, 1), 0)):
            raise PreconditionError("policy entries must be integer action indices")
        pi = pi.astype(int)
    bad = np.flatnonzero((pi < 0) | (pi >= mdp.n_actions))
    if bad.size:
        s = int(bad[0])
        raise PreconditionError(f"invalid action index {pi[s]} at state {s} ({mdp.n_actions} actions)")
    return pi


def evaluate_policy(
    mdp: Mdp,
    gamma: float,
    policy: Sequence[int],
    epsilon: float,
    max_iterations: Optional[int] = None,
) -> np.ndarray:
    """Iterative evaluation of a fixed policy with the value-iteration stopping rule."""
    _check_gamma(gamma)
    if not epsilon > 0.0:
        raise PreconditionError(f"epsilon must be positive, got {epsilon}")
    pi = _check_policy(mdp, policy)
    cap = _iteration_cap(max_iterations)
    threshold = stopping_threshold(gamma, epsilon)

    states = np.arange(mdp.n_states)
    r_pi = mdp.rewards[pi, states]
    P_pi = mdp.transitions[pi, states, :]

    v = np.zeros(mdp.n_states)
    for n in range(1, cap + 1):
        v_next = r_pi + gamma * (P_pi @ v)
        step = float(np.max(np.abs(v_next - v)))
        v = v_next
        if step <= threshold:
            logger.debug(f"evaluate_policy: converged after {n} sweeps")
            return v

    raise IterationCapError(f"policy evaluation reached the cap of {cap} sweeps", iterations=cap)
