"""
bisimagg Metrics
Bisimulation metrics on a finite MDP:
  fixpoint  d_fix, the least fixed point of
            F(d)(s, s') = max_a c_R |r_s^a - r_s'^a| + c_T T_K(d)(P_s^a, P_s'^a),
            approximated by iterating F from 0 with a certified residual
  tv        F applied once to the 0/1 non-bisimilarity metric, which reduces
            to total variation over bisimulation classes
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from bisimagg.core.errors import DimensionError, PreconditionError
from bisimagg.core.mdp import Mdp, MetricParams
from bisimagg.core.partition import Partition, bisimulation_partition, class_probabilities
from bisimagg.core.transport import kantorovich

logger = logging.getLogger(__name__)

METRIC_KINDS = ("fixpoint", "tv")


@dataclass(frozen=True)
class MetricResult:
    """
    distances       the returned distance matrix
    iterations      applications of F performed
    residual_bound  upper bound on max |d_fix - distances| (0 for tv)
    increments      max |d_{n+1} - d_n| for every iteration run
    trace           d_1 .. d_n when requested
    partition       bisimulation classes used by the tv metric
    """

    distances: np.ndarray
    iterations: int
    residual_bound: float
    kind: str
    params: MetricParams
    increments: tuple = ()
    trace: tuple = ()
    partition: Optional[Partition] = None

    def summary(self) -> dict:
        return {
            "kind": self.kind,
            "iterations": self.iterations,
            "residual_bound": self.residual_bound,
            "gamma": self.params.gamma,
            "c_R": self.params.c_R,
            "c_T": self.params.c_T,
            "delta": self.params.delta,
            "increments": list(self.increments),
        }


def _check_metric(mdp: Mdp, d) -> np.ndarray:
    d = np.asarray(d, dtype=float)
    if d.shape != (mdp.n_states, mdp.n_states):
        raise DimensionError(f"distance matrix of shape {d.shape} for {mdp.n_states} states")
    return d


def _workers(workers: Optional[int]) -> int:
    if workers is None:
        from bisimagg import config
        workers = config.WORKERS
    return max(1, int(workers))


def _combine(mdp: Mdp, params: MetricParams, transport: np.ndarray) -> np.ndarray:
    """max over actions of c_R |reward gap| + c_T transport, on i < j pairs, mirrored."""
    n = mdp.n_states
    iu, ju = np.triu_indices(n, 1)
    gap = np.abs(mdp.rewards[:, iu] - mdp.rewards[:, ju])
    per_action = params.c_R * gap + params.c_T * transport
    out = np.zeros((n, n))
    if iu.size:
        out[iu, ju] = per_action.max(axis=0)
        out[ju, iu] = out[iu, ju]
    return np.clip(out, 0.0, 1.0)


# ─── The operator F ───────────────────────────────────────────────────────────

def apply_F(mdp: Mdp, d, params: MetricParams, workers: Optional[int] = None) -> np.ndarray:
    """
    One exact application of F. Each distinct pair of transition rows is
    solved once per call; identical rows cost nothing.
    """
    d = _check_metric(mdp, d)
    n = mdp.n_states
    iu, ju = np.triu_indices(n, 1)
    transport = np.zeros((mdp.n_actions, iu.size))
    if params.c_T == 0.0 or iu.size == 0:
        return _combine(mdp, params, transport)

    P = mdp.transitions
    jobs = {}
    keys = {}
    for a in range(mdp.n_actions):
        for k, (i, j) in enumerate(zip(iu, ju)):
            p, q = P[a, i], P[a, j]
            if np.array_equal(p, q):
                continue
            bp, bq = p.tobytes(), q.tobytes()
            key = (bp, bq) if bp <= bq else (bq, bp)
            if key not in jobs:
                jobs[key] = (p, q)
            keys[a, k] = key

    def solve(pair):
        return kantorovich(d, pair[0], pair[1]).cost

    n_workers = _workers(workers)
    if n_workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            costs = dict(zip(jobs, pool.map(solve, jobs.values())))
    else:
        costs = {key: solve(pair) for key, pair in jobs.items()}

    for (a, k), key in keys.items():
        transport[a, k] = costs[key]
    logger.debug(f"apply_F: {len(jobs)} transport problems for {len(keys)} (action, pair) entries")
    return _combine(mdp, params, transport)


def fixed_point_metric(
    mdp: Mdp,
    params: MetricParams,
    keep_trace: bool = False,
    workers: Optional[int] = None,
) -> MetricResult:
    """
    Iterate d_{n+1} = F(d_n) from d_0 = 0 for N = ceil(ln delta / ln c_T)
    steps, so that d_fix - d_N <= c_T^N <= delta. Stops early, with residual
    0, if an iteration leaves d unchanged. c_T = 0 needs one application.
    """
    if params.c_T >= 1.0:
        raise PreconditionError("fixed_point_metric needs c_T < 1")

    n = mdp.n_states
    d = np.zeros((n, n))
    increments = []
    trace = []

    if params.c_T == 0.0:
        d_next = apply_F(mdp, d, params, workers)
        increments.append(float(np.abs(d_next).max(initial=0.0)))
        if keep_trace:
            trace.append(d_next)
        return MetricResult(d_next, 1, 0.0, "fixpoint", params, tuple(increments), tuple(trace))

    steps = max(0, math.ceil(math.log(params.delta) / math.log(params.c_T)))
    residual = params.c_T ** steps
    iterations = 0
    for _ in range(steps):
        d_next = apply_F(mdp, d, params, workers)
        iterations += 1
        step = float(np.abs(d_next - d).max(initial=0.0))
        increments.append(step)
        if keep_trace:
            trace.append(d_next)
        logger.debug(f"fixed_point_metric: iteration {iterations}/{steps} increment {step:.3e}")
        d = d_next
        if step == 0.0:
            residual = 0.0
            break

    logger.info(f"fixed_point_metric: {iterations} iterations, residual bound {residual:.3e}")
    return MetricResult(d, iterations, residual, "fixpoint", params, tuple(increments), tuple(trace))


# ─── Total-variation metric ───────────────────────────────────────────────────

def discrete_nonbisim_metric(blocks: Partition) -> np.ndarray:
    """0 within a block, 1 across blocks."""
    return 1.0 - blocks.same_block().astype(float)


def tv_metric(mdp: Mdp, params: MetricParams, tol: Optional[float] = None) -> MetricResult:
    """F applied to the non-bisimilarity metric, via class probabilities."""
    blocks = bisimulation_partition(mdp, tol)
    probs = class_probabilities(mdp, blocks)  # (A, S, C)
    iu, ju = np.triu_indices(mdp.n_states, 1)
    transport = 0.5 * np.abs(probs[:, iu, :] - probs[:, ju, :]).sum(axis=2)
    d = _combine(mdp, params, transport)
    logger.info(f"tv_metric: {blocks.n_blocks} bisimulation classes")
    return MetricResult(d, 1, 0.0, "tv", params, partition=blocks)


def compute_metric(
    mdp: Mdp,
    params: MetricParams,
    kind: str,
    tol: Optional[float] = None,
    keep_trace: bool = False,
    workers: Optional[int] = None,
) -> MetricResult:
    if kind == "fixpoint":
        return fixed_point_metric(mdp, params, keep_trace=keep_trace, workers=workers)
    if kind == "tv":
        return tv_metric(mdp, params, tol)
    raise PreconditionError(f"unknown metric kind {kind!r}; expected one of {', '.join(METRIC_KINDS)}")


# ─── Checks ───────────────────────────────────────────────────────────────────

def is_prefixed_point(mdp: Mdp, d, params: MetricParams, tol: float = 1e-9) -> bool:
    """F(d) <= d pointwise; such a d bounds d_fix from above."""
    d = _check_metric(mdp, d)
    return bool(np.all(apply_F(mdp, d, params) <= d + tol))


def certified_nonbisimilar(result: MetricResult) -> list:
    """
    Pairs (i, j), i < j, whose distance exceeds c_T^N / (1 - c_T) and are
    therefore not bisimilar. Small distances certify nothing.
    """
    c_T = result.params.c_T
    if result.kind == "tv" or result.residual_bound == 0.0:
        threshold = 0.0
    else:
        threshold = c_T ** result.iterations / (1.0 - c_T)
    d = result.distances
    iu, ju = np.triu_indices(d.shape[0], 1)
    hit = d[iu, ju] > threshold
    return [(int(i), int(j)) for i, j in zip(iu[hit], ju[hit])]
