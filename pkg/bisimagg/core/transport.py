"""
bisimagg Transport
Exact Kantorovich distance between two distributions under a ground
semimetric, solved as a transportation problem with the network (MODI)
simplex. Every plan is returned with dual potentials and is checked against
its own certificate: marginals, dual feasibility and a zero duality gap.
Also: total variation, and the Kantorovich LP over zero-distance classes.
"""

import logging
from collections import deque
from dataclasses import dataclass
from typing import Optional

import numpy as np

from bisimagg.core.errors import CertificateError, DimensionError, IterationCapError, PreconditionError
from bisimagg.core.mdp import as_distribution
from bisimagg.core.partition import Partition

logger = logging.getLogger(__name__)

# reduced costs above -PIVOT_TOL count as optimal
PIVOT_TOL = 1e-12


def _certificate_tol(tol: Optional[float]) -> float:
    if tol is None:
        from bisimagg import config
        tol = config.CERTIFICATE_TOL
    return float(tol)


def _pivot_cap(cap: Optional[int]) -> int:
    if cap is None:
        from bisimagg import config
        cap = config.TRANSPORT_PIVOT_CAP
    return int(cap)


# ─── Distance matrices ────────────────────────────────────────────────────────

def distance_violations(d, tol: float = 1e-9) -> list:
    """
    Check the 1-bounded semimetric axioms: square, symmetric, zero diagonal,
    entries in [0, 1] and the triangle inequality on every triple.
    """
    d = np.asarray(d, dtype=float)
    if d.ndim != 2 or d.shape[0] != d.shape[1]:
        return [f"distance matrix must be square, got shape {d.shape}"]
    if not np.all(np.isfinite(d)):
        return ["distance matrix has non-finite entries"]

    out = []
    asym = np.abs(d - d.T)
    if asym.max(initial=0.0) > tol:
        i, j = np.unravel_index(np.argmax(asym), asym.shape)
        out.append(f"symmetry: d[{i}][{j}] = {d[i, j]!r} but d[{j}][{i}] = {d[j, i]!r}")
    diag = np.abs(np.diag(d))
    if diag.max(initial=0.0) > tol:
        out.append(f"diagonal: d[{int(np.argmax(diag))}][{int(np.argmax(diag))}] is not 0")
    if d.min(initial=0.0) < -tol or d.max(initial=0.0) > 1.0 + tol:
        out.append(f"range: entries span [{d.min()!r}, {d.max()!r}], outside [0, 1]")

    n = d.shape[0]
    for k in range(n):
        # d[i, j] <= d[i, k] + d[k, j] for every i, j
        excess = d - (d[:, k, None] + d[None, k, :])
        worst = excess.max(initial=0.0)
        if worst > tol:
            i, j = np.unravel_index(np.argmax(excess), excess.shape)
            out.append(f"triangle: d[{i}][{j}] exceeds d[{i}][{k}] + d[{k}][{j}] by {worst:.3e}")
            break
    return out


def as_distance_matrix(d, tol: float = 1e-9) -> np.ndarray:
    d = np.array(d, dtype=float)
    problems = distance_violations(d, tol)
    if problems:
        raise PreconditionError("not a 1-bounded semimetric: " + "; ".join(problems))
    return d


def discrete_metric(n: int) -> np.ndarray:
    """1 between distinct states, 0 on the diagonal."""
    return 1.0 - np.eye(n)


# ─── Transportation simplex ───────────────────────────────────────────────────

def _northwest_corner(supply: np.ndarray, demand: np.ndarray):
    """Initial basic solution: m + n - 1 cells forming a spanning staircase tree."""
    m, n = len(supply), len(demand)
    s, d = supply.copy(), demand.copy()
    flow = np.zeros((m, n))
    basis = []
    i = j = 0
    while True:
        x = min(s[i], d[j])
        flow[i, j] = x
        basis.append((i, j))
        s[i] -= x
        d[j] -= x
        if i == m - 1 and j == n - 1:
            break
        if i == m - 1:
            j += 1
        elif j == n - 1:
            i += 1
        elif s[i] <= d[j]:
            i += 1
        else:
            j += 1
    return flow, basis


def _potentials(cost: np.ndarray, row_adj: list, col_adj: list):
    """Solve a_i + b_j = c_ij on the basis tree, rooted at a_0 = 0."""
    m, n = cost.shape
    a = np.full(m, np.nan)
    b = np.full(n, np.nan)
    a[0] = 0.0
    queue = deque([(0, 0)])  # (kind, index); kind 0 = row, 1 = column
    while queue:
        kind, k = queue.popleft()
        if kind == 0:
            for j in row_adj[k]:
                if np.isnan(b[j]):
                    b[j] = cost[k, j] - a[k]
                    queue.append((1, j))
        else:
            for i in col_adj[k]:
                if np.isnan(a[i]):
                    a[i] = cost[i, k] - b[k]
                    queue.append((0, i))
    return a, b


def _tree_path(row_start: int, col_end: int, row_adj: list, col_adj: list) -> list:
    """Cells on the unique tree path from row `row_start` to column `col_end`."""
    parent = {(0, row_start): None}
    queue = deque([(0, row_start)])
    target = (1, col_end)
    while queue:
        node = queue.popleft()
        if node == target:
            break
        kind, k = node
        neighbours = [(1, j) for j in row_adj[k]] if kind == 0 else [(0, i) for i in col_adj[k]]
        for nb in neighbours:
            if nb not in parent:
                parent[nb] = node
                queue.append(nb)

    cells = []
    node = target
    while parent[node] is not None:
        prev = parent[node]
        cells.append((prev[1], node[1]) if prev[0] == 0 else (node[1], prev[1]))
        node = prev
    cells.reverse()
    return cells


def solve_transport(
    cost,
    supply,
    demand,
    max_pivots: Optional[int] = None,
) -> tuple:
    """
    Minimise sum(flow * cost) subject to row sums = supply, column sums = demand.

    Returns (flow, alpha, beta, pivots) with alpha_i - beta_j <= cost_ij on
    every cell and equality on the final basis. Entering cells are chosen by
    the most negative reduced cost; after a run of degenerate pivots the rule
    switches to Bland's (lowest index enters and leaves) until the objective
    moves again, which rules out cycling.
    """
    cost = np.asarray(cost, dtype=float)
    supply = np.asarray(supply, dtype=float)
    demand = np.asarray(demand, dtype=float)
    m, n = cost.shape
    if supply.shape != (m,) or demand.shape != (n,):
        raise DimensionError(f"cost {cost.shape} does not match supply {supply.shape} / demand {demand.shape}")
    cap = _pivot_cap(max_pivots)

    flow, basis = _northwest_corner(supply, demand)
    basic = np.zeros((m, n), dtype=bool)
    row_adj = [set() for _ in range(m)]
    col_adj = [set() for _ in range(n)]
    for i, j in basis:
        basic[i, j] = True
        row_adj[i].add(j)
        col_adj[j].add(i)

    degenerate_run = 0
    bland = False
    for pivot in range(cap + 1):
        a, b = _potentials(cost, row_adj, col_adj)
        reduced = cost - a[:, None] - b[None, :]
        reduced[basic] = 0.0

        if bland:
            candidates = np.flatnonzero(reduced.ravel() < -PIVOT_TOL)
            if candidates.size == 0:
                return flow, a, -b, pivot
            entering = int(candidates[0])
        else:
            entering = int(np.argmin(reduced))
            if reduced.flat[entering] >= -PIVOT_TOL:
                return flow, a, -b, pivot
        if pivot == cap:
            break

        ie, je = divmod(entering, n)
        path = _tree_path(ie, je, row_adj, col_adj)
        minus = path[0::2]
        plus = path[1::2]

        theta = min(flow[c] for c in minus)
        leaving = min((c for c in minus if flow[c] == theta), key=lambda c: c[0] * n + c[1])

        if theta > 0.0:
            for c in minus:
                flow[c] -= theta
            for c in plus:
                flow[c] += theta
            flow[ie, je] = theta
            degenerate_run = 0
            bland = False
        else:
            degenerate_run += 1
            if degenerate_run > m + n:
                bland = True
        flow[leaving] = 0.0

        li, lj = leaving
        basic[li, lj] = False
        row_adj[li].discard(lj)
        col_adj[lj].discard(li)
        basic[ie, je] = True
        row_adj[ie].add(je)
        col_adj[je].add(ie)

    raise IterationCapError(f"transportation simplex reached the cap of {cap} pivots", iterations=cap)


# ─── Kantorovich distance ─────────────────────────────────────────────────────

@dataclass(frozen=True)
class TransportPlan:
    """
    Optimal coupling of p and q under ground cost d.

    flow[k][j]       mass moved from state k (under p) to state j (under q)
    cost             sum(flow * d), the Kantorovich distance
    dual_potentials  u with u_i - u_j <= d_ij, 0 <= u <= 1, min u = 0 and
                     sum((p - q) * u) == cost
    """

    flow: np.ndarray
    cost: float
    dual_potentials: np.ndarray
    duality_gap: float
    pivots: int = 0


def plan_violations(plan: TransportPlan, d, p, q, tol: float = 1e-9) -> list:
    """Check a plan against its own certificate; empty list means proven optimal."""
    d = np.asarray(d, dtype=float)
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    flow, u = plan.flow, plan.dual_potentials
    out = []

    if flow.min(initial=0.0) < -tol:
        out.append(f"negative flow {flow.min()!r}")
    rows = np.abs(flow.sum(axis=1) - p).max(initial=0.0)
    if rows > tol:
        out.append(f"row sums miss the source distribution by {rows:.3e}")
    cols = np.abs(flow.sum(axis=0) - q).max(initial=0.0)
    if cols > tol:
        out.append(f"column sums miss the destination distribution by {cols:.3e}")

    slack = (u[:, None] - u[None, :] - d).max(initial=0.0)
    if slack > tol:
        out.append(f"dual infeasible: u_i - u_j exceeds d_ij by {slack:.3e}")
    if u.min(initial=0.0) < -tol or u.max(initial=0.0) > 1.0 + tol:
        out.append(f"potentials outside [0, 1]: [{u.min()!r}, {u.max()!r}]")

    primal = float((flow * d).sum())
    dual = float((p - q) @ u)
    if abs(primal - dual) > tol:
        out.append(f"duality gap {abs(primal - dual):.3e}")
    if abs(primal - plan.cost) > tol:
        out.append(f"reported cost {plan.cost!r} differs from flow cost {primal!r}")
    return out


def _normalized(w: np.ndarray) -> np.ndarray:
    """Clip round-off negatives and rescale to total mass exactly 1."""
    w = np.clip(w, 0.0, None)
    return w / w.sum()


def kantorovich(d, p, q, tol: Optional[float] = None, check_metric: bool = False) -> TransportPlan:
    """
    T_K(d)(p, q): optimal transport cost from p to q under ground semimetric d.

    The LP is solved on supp(p) x supp(q); potentials for every state come
    from the c-transform u(i) = min_{j in supp q} (beta_j + d(i, j)), which is
    feasible because d satisfies the triangle inequality. p and q are
    rescaled to mass exactly 1 first, and the result is certified against the
    rescaled pair (zero duality gap, feasible primal and dual) or CertificateError
    is raised.
    """
    tol = _certificate_tol(tol)
    d = np.asarray(d, dtype=float)
    if d.ndim != 2 or d.shape[0] != d.shape[1]:
        raise DimensionError(f"ground metric must be square, got shape {d.shape}")
    n = d.shape[0]
    # supply and demand must balance exactly for the northwest-corner start
    p = _normalized(as_distribution(p, n))
    q = _normalized(as_distribution(q, n))
    if check_metric:
        as_distance_matrix(d)

    if np.array_equal(p, q):
        return TransportPlan(np.diag(p), 0.0, np.zeros(n), 0.0)

    src = np.flatnonzero(p > 0.0)
    dst = np.flatnonzero(q > 0.0)
    sub_flow, _alpha, beta, pivots = solve_transport(d[np.ix_(src, dst)], p[src], q[dst])

    flow = np.zeros((n, n))
    flow[np.ix_(src, dst)] = sub_flow
    u = (beta[None, :] + d[:, dst]).min(axis=1)
    u = u - u.min()

    cost = float((flow * d).sum())
    gap = abs(cost - float((p - q) @ u))
    plan = TransportPlan(flow, cost, u, gap, pivots)

    problems = plan_violations(plan, d, p, q, tol)
    if problems:
        raise CertificateError("Kantorovich plan failed certification: " + "; ".join(problems))
    return plan


def total_variation(p, q) -> float:
    """Half the L1 distance between p and q."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape or p.ndim != 1:
        raise DimensionError(f"distributions of shapes {p.shape} and {q.shape}")
    return 0.5 * float(np.abs(p - q).sum())


def quotient_kantorovich(d, blocks: Partition, p, q, tol: float = 1e-9) -> float:
    """
    T_K(d)(p, q) computed on the classes of zero d-distance: one LP variable
    per block, ground cost min_{i in C, j in D} d(i, j). Zero exactly when p
    and q give every block the same mass.
    """
    d = np.asarray(d, dtype=float)
    n = d.shape[0]
    if blocks.n_states != n:
        raise DimensionError(f"partition covers {blocks.n_states} states, metric has {n}")
    p = _normalized(as_distribution(p, n))
    q = _normalized(as_distribution(q, n))

    for block in blocks.blocks:
        idx = np.asarray(block)
        if d[np.ix_(idx, idx)].max() > tol:
            raise PreconditionError(f"block {list(block)} is not a zero-distance class of d")

    p_mass = blocks.class_masses(p)
    q_mass = blocks.class_masses(q)
    if np.array_equal(p_mass, q_mass):
        return 0.0

    k = blocks.n_blocks
    block_cost = np.empty((k, k))
    for c, bc in enumerate(blocks.blocks):
        for e, be in enumerate(blocks.blocks):
            block_cost[c, e] = d[np.ix_(bc, be)].min()

    src = np.flatnonzero(p_mass > 0.0)
    dst = np.flatnonzero(q_mass > 0.0)
    flow, _alpha, _beta, _pivots = solve_transport(block_cost[np.ix_(src, dst)], p_mass[src], q_mass[dst])
    return float((flow * block_cost[np.ix_(src, dst)]).sum())
