"""
bisimagg Experiment Module
Sweeps epsilon over [0, 1] for every (gamma, metric) pair: cluster, aggregate,
bound and solve, one ExperimentRow per cell. Rows are checked against the
bound invariants and sorted by (gamma, epsilon, metric_kind).
"""

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Optional, Sequence

import numpy as np

from bisimagg.core.aggregate import ROUNDOFF, bound_theorem52, epsilon_partition, seeded_order
from bisimagg.core.errors import CertificateError, PreconditionError
from bisimagg.core.mdp import Mdp, MetricParams
from bisimagg.core.metrics import METRIC_KINDS, compute_metric

logger = logging.getLogger(__name__)

COLUMNS = (
    "epsilon", "gamma", "metric_kind", "n_blocks",
    "true_error", "theorem_bound", "naive_bound", "metric_ms", "total_ms",
)


@dataclass(frozen=True)
class ExperimentRow:
    epsilon: float
    gamma: float
    metric_kind: str
    n_blocks: int
    true_error: float
    theorem_bound: float
    naive_bound: float
    metric_ms: float
    total_ms: float

    def as_dict(self) -> dict:
        return asdict(self)

    def violations(self, n_states: int, slack: float) -> list:
        out = []
        if self.true_error > self.theorem_bound + slack + ROUNDOFF:
            out.append(f"true error {self.true_error!r} above theorem bound {self.theorem_bound!r}")
        if self.theorem_bound > self.naive_bound + ROUNDOFF:
            out.append(f"theorem bound {self.theorem_bound!r} above naive bound {self.naive_bound!r}")
        if not 1 <= self.n_blocks <= n_states:
            out.append(f"n_blocks {self.n_blocks} outside [1, {n_states}]")
        return out


def epsilon_grid(steps: int) -> np.ndarray:
    """steps + 1 evenly spaced points covering [0, 1], both ends included."""
    if steps < 1:
        raise PreconditionError(f"eps-steps must be at least 1, got {steps}")
    return np.linspace(0.0, 1.0, steps + 1)


def run_experiment(
    mdp: Mdp,
    gammas: Sequence[float],
    eps_steps: Optional[int] = None,
    kinds: Sequence[str] = METRIC_KINDS,
    epsilon_vi: Optional[float] = None,
    delta: Optional[float] = None,
    seed_order: str = "index",
    tol: Optional[float] = None,
    workers: Optional[int] = None,
) -> list:
    from bisimagg import config
    eps_steps = config.EPS_STEPS if eps_steps is None else eps_steps
    epsilon_vi = config.DEFAULT_EPSILON_VI if epsilon_vi is None else epsilon_vi
    workers = config.WORKERS if workers is None else max(1, int(workers))
    for kind in kinds:
        if kind not in METRIC_KINDS:
            raise PreconditionError(f"unknown metric kind {kind!r}")

    grid = epsilon_grid(eps_steps)
    rows = []
    for gamma in gammas:
        params = MetricParams.default(gamma, delta)
        timings = {}
        for kind in kinds:
            started = time.perf_counter()
            metric = compute_metric(mdp, params, kind, tol=tol, workers=workers)
            metric_ms = (time.perf_counter() - started) * 1000.0
            timings[kind] = metric_ms
            order = seeded_order(metric.distances, seed_order)

            def cell(eps, metric=metric, order=order, metric_ms=metric_ms, kind=kind):
                t0 = time.perf_counter()
                blocks = epsilon_partition(metric.distances, float(eps), order)
                report = bound_theorem52(mdp, metric, blocks, params, epsilon_vi, epsilon=float(eps))
                # per-state check; the row itself only carries the maxima
                problems = report.violations()
                if problems:
                    raise CertificateError(
                        f"cell (epsilon={float(eps)}, gamma={gamma}, {kind}): " + "; ".join(problems)
                    )
                total_ms = metric_ms + (time.perf_counter() - t0) * 1000.0
                return ExperimentRow(
                    epsilon=float(eps),
                    gamma=float(gamma),
                    metric_kind=kind,
                    n_blocks=blocks.n_blocks,
                    true_error=report.max_true_error,
                    theorem_bound=report.max_bound,
                    naive_bound=report.naive_bound,
                    metric_ms=metric_ms,
                    total_ms=total_ms,
                )

            if workers > 1:
                with ThreadPoolExecutor(max_workers=workers) as pool:
                    rows.extend(pool.map(cell, grid))
            else:
                rows.extend(cell(eps) for eps in grid)
            logger.info(f"experiment: gamma={gamma} {kind} metric in {metric_ms:.1f} ms, {len(grid)} cells")

        if "tv" in timings and "fixpoint" in timings and timings["tv"] >= timings["fixpoint"]:
            logger.warning(
                f"gamma={gamma}: tv metric ({timings['tv']:.1f} ms) was not faster than "
                f"fixpoint ({timings['fixpoint']:.1f} ms)"
            )

    rows.sort(key=lambda r: (r.gamma, r.epsilon, r.metric_kind))
    slack = 2.0 * epsilon_vi
    for row in rows:
        problems = row.violations(mdp.n_states, slack)
        if problems:
            raise CertificateError(
                f"row (epsilon={row.epsilon}, gamma={row.gamma}, {row.metric_kind}): " + "; ".join(problems)
            )
    return rows
