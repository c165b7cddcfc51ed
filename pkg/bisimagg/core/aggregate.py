"""
bisimagg Aggregation
Greedy epsilon-clustering under a metric, the averaged aggregate MDP, and the
value-error bounds that a bisimulation metric certifies for it.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from bisimagg.core.errors import CertificateError, DimensionError, PreconditionError
from bisimagg.core.mdp import Mdp, MetricParams
from bisimagg.core.metrics import MetricResult
from bisimagg.core.partition import Partition
from bisimagg.core.solver import finite_horizon_values, value_iteration

logger = logging.getLogger(__name__)

# float slack for inequalities that hold exactly in real arithmetic
ROUNDOFF = 1e-9

SEED_ORDERS = ("index", "farthest")


# ─── Clustering ───────────────────────────────────────────────────────────────

def _check_square(d) -> np.ndarray:
    d = np.asarray(d, dtype=float)
    if d.ndim != 2 or d.shape[0] != d.shape[1]:
        raise DimensionError(f"distance matrix must be square, got shape {d.shape}")
    return d


def farthest_point_order(d, start: int = 0) -> list:
    """
    Permutation of the states: `start`, then repeatedly the state farthest
    from everything chosen so far (ties to the lowest index).
    """
    d = _check_square(d)
    n = d.shape[0]
    if not 0 <= start < n:
        raise PreconditionError(f"start state {start} outside 0..{n - 1}")
    order = [start]
    chosen = np.zeros(n, dtype=bool)
    chosen[start] = True
    nearest = d[start].copy()
    for _ in range(n - 1):
        candidates = np.where(chosen, -np.inf, nearest)
        nxt = int(np.argmax(candidates))
        order.append(nxt)
        chosen[nxt] = True
        nearest = np.minimum(nearest, d[nxt])
    return order


def epsilon_partition(d, epsilon: float, seed_order: Optional[Sequence[int]] = None) -> Partition:
    """
    Scan states in `seed_order` (default: by index). Each state joins the
    first cluster whose seed is within epsilon, or seeds a new cluster.
    """
    d = _check_square(d)
    n = d.shape[0]
    if epsilon < 0:
        raise PreconditionError(f"epsilon must be non-negative, got {epsilon}")
    order = list(range(n)) if seed_order is None else [int(s) for s in seed_order]
    if sorted(order) != list(range(n)):
        raise PreconditionError("seed_order must be a permutation of the states")

    seeds = []
    labels = np.empty(n, dtype=int)
    for s in order:
        near = np.flatnonzero(d[s, seeds] <= epsilon) if seeds else ()
        if len(near):
            labels[s] = int(near[0])
        else:
            labels[s] = len(seeds)
            seeds.append(s)

    logger.debug(f"epsilon_partition: eps={epsilon} -> {len(seeds)} clusters")
    return Partition.from_labels(labels)


def seeded_order(d, kind: str) -> Optional[list]:
    if kind == "index":
        return None
    if kind == "farthest":
        return farthest_point_order(d)
    raise PreconditionError(f"unknown seed order {kind!r}; expected one of {', '.join(SEED_ORDERS)}")


# ─── Aggregate MDP ────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class AggregateMdp:
    partition: Partition
    quotient: Mdp
    rho: np.ndarray

    def lift(self, values) -> np.ndarray:
        """Quotient values read back on the original states: v(rho(s))."""
        return np.asarray(values, dtype=float)[self.rho]


def build_aggregate(mdp: Mdp, blocks: Partition) -> AggregateMdp:
    """Average rewards and block transition probabilities over each block."""
    if blocks.n_states != mdp.n_states:
        raise DimensionError(f"partition covers {blocks.n_states} states, MDP has {mdp.n_states}")
    ind = blocks.indicator()
    sizes = ind.sum(axis=0)

    rewards = (mdp.rewards @ ind) / sizes
    transitions = np.einsum("sc,ast,td->acd", ind, mdp.transitions, ind) / sizes[None, :, None]
    labels = tuple("{" + ",".join(mdp.label(s) for s in b) + "}" for b in blocks.blocks)

    quotient = Mdp(blocks.n_blocks, mdp.action_labels, rewards, transitions, labels)
    return AggregateMdp(blocks, quotient, np.asarray(blocks.block_of, dtype=int))


# ─── Bounds ───────────────────────────────────────────────────────────────────

def avg_class_distance(s: int, d, blocks: Partition) -> float:
    """g(s, d): mean distance from s to the members of its block, itself included."""
    d = _check_square(d)
    block = blocks.blocks[blocks.block_of[s]]
    return float(d[s, list(block)].mean())


def class_distances(d, blocks: Partition) -> np.ndarray:
    """g(s, d) for every state."""
    d = _check_square(d)
    if d.shape[0] != blocks.n_states:
        raise DimensionError(f"distance matrix of size {d.shape[0]} for a {blocks.n_states}-state partition")
    sizes = np.bincount(blocks.block_of).astype(float)
    return (d * blocks.same_block()).sum(axis=1) / sizes[list(blocks.block_of)]


@dataclass(frozen=True)
class BoundReport:
    """
    Value-error bound per state, already divided by c_R. true_error (when
    solved) is |V(rho(s)) - V(s)| and must not exceed bound + slack.
    """

    g: np.ndarray
    per_state_bound: np.ndarray
    max_bound: float
    naive_bound: Optional[float] = None
    true_error: Optional[np.ndarray] = None
    slack: float = 0.0

    @property
    def max_true_error(self) -> Optional[float]:
        return None if self.true_error is None else float(self.true_error.max())

    def violations(self) -> list:
        out = []
        if self.true_error is not None:
            excess = self.true_error - self.per_state_bound - self.slack
            for s in np.flatnonzero(excess > ROUNDOFF):
                out.append(f"state {int(s)}: true error {self.true_error[s]!r} exceeds bound {self.per_state_bound[s]!r}")
        if self.naive_bound is not None and self.max_bound > self.naive_bound + ROUNDOFF:
            out.append(f"bound {self.max_bound!r} exceeds the naive bound {self.naive_bound!r}")
        return out

    def check(self) -> "BoundReport":
        problems = self.violations()
        if problems:
            raise CertificateError("value bound violated: " + "; ".join(problems))
        return self


def _check_bound_params(params: MetricParams):
    if not params.bounds_apply:
        raise PreconditionError(f"value bounds need gamma <= c_T (gamma={params.gamma}, c_T={params.c_T})")
    if params.c_R <= 0.0:
        raise PreconditionError("value bounds need c_R > 0")


def bound_theorem52(
    mdp: Mdp,
    metric: MetricResult,
    blocks: Partition,
    params: Optional[MetricParams] = None,
    epsilon_vi: Optional[float] = None,
    epsilon: Optional[float] = None,
    solve: bool = True,
) -> BoundReport:
    """
    |V*(rho(s)) - V*(s)| <= (g(s, d) + k max_u g(u, d) + (1 + k) res) / c_R
    with k = gamma / (1 - gamma) and res the metric's residual bound.

    With `epsilon` the naive radius bound 2 (epsilon + res) / (c_R (1 - gamma))
    is reported too. With `solve` both MDPs are solved to epsilon_vi and the
    true error carries a 2 epsilon_vi slack.
    """
    params = params or metric.params
    _check_bound_params(params)
    d = metric.distances
    if d.shape != (mdp.n_states, mdp.n_states) or blocks.n_states != mdp.n_states:
        raise DimensionError("metric, partition and MDP disagree on the number of states")

    gamma = params.gamma
    k = gamma / (1.0 - gamma)
    res = metric.residual_bound
    g = class_distances(d, blocks)
    bound = (g + k * g.max() + (1.0 + k) * res) / params.c_R

    naive = None
    if epsilon is not None:
        naive = 2.0 * (epsilon + res) / (params.c_R * (1.0 - gamma))

    true_error = None
    slack = 0.0
    if solve:
        if epsilon_vi is None:
            from bisimagg import config
            epsilon_vi = config.DEFAULT_EPSILON_VI
        agg = build_aggregate(mdp, blocks)
        v, _ = value_iteration(mdp, gamma, epsilon_vi)
        vq, _ = value_iteration(agg.quotient, gamma, epsilon_vi)
        true_error = np.abs(agg.lift(vq) - v)
        slack = 2.0 * epsilon_vi

    return BoundReport(g, bound, float(bound.max()), naive, true_error, slack)


def finite_n_bound(mdp: Mdp, iterates: Sequence, blocks: Partition, params: MetricParams) -> BoundReport:
    """
    Horizon-n bound from the metric iterates d_1..d_n:
    |V_n(rho(s)) - V_n(s)| <= (g(s, d_n) + sum_{k<n} gamma^(n-k) max_u g(u, d_k)) / c_R,
    compared against exactly n backups on both MDPs.
    """
    _check_bound_params(params)
    n = len(iterates)
    if n < 1:
        raise PreconditionError("finite_n_bound needs at least one metric iterate")
    gamma = params.gamma

    gs = [class_distances(d_k, blocks) for d_k in iterates]
    tail = sum(gamma ** (n - k) * gs[k - 1].max() for k in range(1, n))
    bound = (gs[-1] + tail) / params.c_R

    agg = build_aggregate(mdp, blocks)
    v = finite_horizon_values(mdp, gamma, n)
    vq = finite_horizon_values(agg.quotient, gamma, n)
    true_error = np.abs(agg.lift(vq) - v)
    return BoundReport(gs[-1], bound, float(bound.max()), None, true_error, 0.0)


def value_bound_violations(mdp: Mdp, metric: MetricResult, epsilon_vi: Optional[float] = None) -> list:
    """
    Pairs breaking c_R |V(s) - V(s')| <= d(s, s'):
      - for every recorded iterate d_n against V_n, exactly (up to round-off)
      - for the returned metric against V*, with slack res + 2 c_R epsilon_vi
    Each entry is (horizon or None for V*, s, s', excess). Never raises on a
    violation; the caller decides.
    """
    params = metric.params
    _check_bound_params(params)
    if epsilon_vi is None:
        from bisimagg import config
        epsilon_vi = config.DEFAULT_EPSILON_VI
    c_R, gamma = params.c_R, params.gamma
    out = []

    def collect(horizon, v, d, slack):
        gap = c_R * np.abs(v[:, None] - v[None, :]) - d - slack
        for i, j in np.argwhere(np.triu(gap > ROUNDOFF, 1)):
            out.append((horizon, int(i), int(j), float(gap[i, j])))

    for n, d_n in enumerate(metric.trace, 1):
        collect(n, finite_horizon_values(mdp, gamma, n), d_n, 0.0)

    v, _ = value_iteration(mdp, gamma, epsilon_vi)
    collect(None, v, metric.distances, metric.residual_bound + 2.0 * c_R * epsilon_vi)
    return out
