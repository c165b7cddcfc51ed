"""
bisimagg Instance Generators
Gridworld, the four-state s/t/u/v family and seeded random MDPs.
Every generator returns an Mdp that passes validate().
"""

import logging
from typing import Optional

import numpy as np

from bisimagg.core.errors import PreconditionError
from bisimagg.core.mdp import Mdp, is_finite_number

logger = logging.getLogger(__name__)

GRID_ACTIONS = ("north", "south", "east", "west", "stay")
CHAIN_STATES = ("s", "t", "u", "v")

# reward schedule of the 5x5 gridworld, extended linearly to other sizes
SOUTH_REWARD_STEP = 0.1
EAST_REWARD_BASE = 0.5
EAST_REWARD_STEP = 0.03
CORNER_STAY_REWARD = 1.0


def _check_probability(name: str, value) -> float:
    if not is_finite_number(value) or not 0.0 <= value <= 1.0:
        raise PreconditionError(f"{name} must be a number in [0, 1], got {value!r}")
    return float(value)


# ─── Gridworld ────────────────────────────────────────────────────────────────

def grid_state(row: int, col: int, width: int) -> int:
    """State index of the 1-based (row, col) cell; rows run north to south."""
    return (row - 1) * width + (col - 1)


def gen_grid(width: int, height: int) -> Mdp:
    """
    A width x height gridworld with actions north/south/east/west/stay.

    Every action moves uniformly to one of the in-grid 4-neighbours of the
    cell (boundary neighbours dropped, never the cell itself); a 1x1 grid
    self-loops. Actions differ only through rewards:
      south from row i < height   -> 0.1 * i
      east from column j < width  -> 0.5 + 0.03 * (j - 1)
      stay in the southeast corner -> 1
    Rewards the linear schedule would push above 1 (grids taller than 10 or
    wider than 17) are capped at 1.
    """
    if not isinstance(width, int) or not isinstance(height, int) or width < 1 or height < 1:
        raise PreconditionError(f"grid dimensions must be positive integers, got {width}x{height}")

    n = width * height
    rewards = np.zeros((len(GRID_ACTIONS), n))
    row_transitions = np.zeros((n, n))
    labels = []

    south = GRID_ACTIONS.index("south")
    east = GRID_ACTIONS.index("east")
    stay = GRID_ACTIONS.index("stay")

    for row in range(1, height + 1):
        for col in range(1, width + 1):
            s = grid_state(row, col, width)
            labels.append(f"({row},{col})")

            neighbours = [
                grid_state(r, c, width)
                for r, c in ((row - 1, col), (row + 1, col), (row, col + 1), (row, col - 1))
                if 1 <= r <= height and 1 <= c <= width
            ]
            if neighbours:
                row_transitions[s, neighbours] = 1.0 / len(neighbours)
            else:
                row_transitions[s, s] = 1.0

            if row < height:
                rewards[south, s] = min(round(SOUTH_REWARD_STEP * row, 12), 1.0)
            if col < width:
                rewards[east, s] = min(round(EAST_REWARD_BASE + EAST_REWARD_STEP * (col - 1), 12), 1.0)

    rewards[stay, grid_state(height, width, width)] = CORNER_STAY_REWARD
    transitions = np.broadcast_to(row_transitions, (len(GRID_ACTIONS), n, n))

    logger.debug(f"gen_grid: {width}x{height} -> {n} states")
    return Mdp(n, GRID_ACTIONS, rewards, transitions, tuple(labels))


# ─── Four-state family ────────────────────────────────────────────────────────

def gen_figure1(p: float, q: float, r_v: float) -> Mdp:
    """
    One action 'a' over states s, t, u, v (indices 0..3).
    s -> u w.p. p, s -> v w.p. 1 - p; t -> u w.p. q, t -> v w.p. 1 - q;
    u and v self-loop. Only v is rewarded (r_v). With this orientation
    s ~ u iff p = 1, t ~ u iff q = 1 and s ~ t iff p = q (for r_v > 0).
    """
    p = _check_probability("p", p)
    q = _check_probability("q", q)
    r_v = _check_probability("r_v", r_v)

    s, t, u, v = range(4)
    P = np.zeros((1, 4, 4))
    P[0, s, u], P[0, s, v] = p, 1.0 - p
    P[0, t, u], P[0, t, v] = q, 1.0 - q
    P[0, u, u] = 1.0
    P[0, v, v] = 1.0

    R = np.zeros((1, 4))
    R[0, v] = r_v
    return Mdp(4, ("a",), R, P, CHAIN_STATES)


# ─── Random MDPs ──────────────────────────────────────────────────────────────

def gen_random(n_states: int, n_actions: int, seed: int, branching: Optional[int] = None) -> Mdp:
    """
    Seeded random MDP. Each (action, state) row puts uniform-random weights on
    `branching` distinct successors drawn uniformly without replacement;
    rewards are uniform in [0, 1). `branching=None` means fully dense rows.
    """
    if n_states < 1 or n_actions < 1:
        raise PreconditionError(f"need at least one state and one action, got {n_states}, {n_actions}")
    if branching is None:
        branching = n_states
    if not 1 <= branching <= n_states:
        raise PreconditionError(f"branching must lie in [1, {n_states}], got {branching}")

    rng = np.random.default_rng(seed)
    P = np.zeros((n_actions, n_states, n_states))
    for a in range(n_actions):
        for s in range(n_states):
            successors = rng.choice(n_states, size=branching, replace=False)
            weights = rng.random(branching)
            while weights.sum() <= 0.0:
                weights = rng.random(branching)
            P[a, s, successors] = weights / weights.sum()
    R = rng.random((n_actions, n_states))

    actions = tuple(f"a{i}" for i in range(n_actions))
    logger.debug(f"gen_random: seed={seed} states={n_states} actions={n_actions} branching={branching}")
    return Mdp(n_states, actions, R, P)
