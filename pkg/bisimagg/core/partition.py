"""
bisimagg Partitions
Disjoint covers of the state set, stochastic bisimulation by partition
refinement, and the equivalence induced by a distance matrix.
"""

import logging
import re
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from bisimagg.core.errors import DimensionError, MdpFormatError, PreconditionError
from bisimagg.core.mdp import Mdp

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Partition:
    """
    block_of[s]  index of the block holding state s (the quotient map rho)
    blocks[k]    sorted states of block k

    Always canonical: blocks ordered by their smallest state. Build through
    the classmethods, which canonicalize and check disjointness and cover.
    """

    block_of: tuple
    blocks: tuple

    @classmethod
    def from_labels(cls, labels: Sequence) -> "Partition":
        """One block per distinct label; any hashable labels work."""
        ids = {}
        block_of = []
        for label in (x.item() if isinstance(x, np.generic) else x for x in labels):
            block_of.append(ids.setdefault(label, len(ids)))
        if not block_of:
            raise PreconditionError("a partition needs at least one state")
        blocks = [[] for _ in ids]
        for s, k in enumerate(block_of):
            blocks[k].append(s)
        return cls(tuple(block_of), tuple(tuple(b) for b in blocks))

    @classmethod
    def from_blocks(cls, blocks: Iterable[Iterable[int]], n_states: Optional[int] = None) -> "Partition":
        blocks = [sorted(int(s) for s in b) for b in blocks]
        if any(not b for b in blocks):
            raise PreconditionError("partition blocks must be nonempty")
        seen = [s for b in blocks for s in b]
        n = n_states if n_states is not None else len(seen)
        if len(set(seen)) != len(seen):
            raise PreconditionError("partition blocks overlap")
        if sorted(seen) != list(range(n)):
            raise PreconditionError(f"partition blocks do not cover states 0..{n - 1} exactly")
        labels = [0] * n
        for k, b in enumerate(blocks):
            for s in b:
                labels[s] = k
        return cls.from_labels(labels)

    @classmethod
    def singletons(cls, n: int) -> "Partition":
        return cls.from_labels(range(n))

    @classmethod
    def single_block(cls, n: int) -> "Partition":
        return cls.from_labels([0] * n)

    @property
    def n_states(self) -> int:
        return len(self.block_of)

    @property
    def n_blocks(self) -> int:
        return len(self.blocks)

    def indicator(self) -> np.ndarray:
        """(n_states, n_blocks) 0/1 membership matrix."""
        m = np.zeros((self.n_states, self.n_blocks))
        m[np.arange(self.n_states), self.block_of] = 1.0
        return m

    def class_masses(self, p) -> np.ndarray:
        """P(C) for every block C."""
        p = np.asarray(p, dtype=float)
        if p.shape != (self.n_states,):
            raise DimensionError(f"distribution of shape {p.shape} for {self.n_states} states")
        return np.bincount(self.block_of, weights=p, minlength=self.n_blocks)

    def same_block(self) -> np.ndarray:
        """Boolean (n, n) matrix: True where two states share a block."""
        b = np.asarray(self.block_of)
        return b[:, None] == b[None, :]

    def to_text(self) -> str:
        return "".join(f"{k}: {' '.join(str(s) for s in b)}\n" for k, b in enumerate(self.blocks))


_LINE = re.compile(r"^\s*(\d+)\s*:\s*((?:\d+\s*)*)$")


def parse_partition_text(text: str, n_states: Optional[int] = None) -> Partition:
    """Read the `block_id: s1 s2 ...` format written by Partition.to_text()."""
    blocks = []
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        m = _LINE.match(line)
        if not m:
            raise MdpFormatError(f"partition line {lineno}: expected 'block_id: states', got {line!r}")
        blocks.append([int(s) for s in m.group(2).split()])
    return Partition.from_blocks(blocks, n_states)


# ─── Class probabilities ──────────────────────────────────────────────────────

def class_probability(p, block: Sequence[int]) -> float:
    """P(C): total mass p puts on the block."""
    p = np.asarray(p, dtype=float)
    idx = np.asarray(block, dtype=int)
    if idx.size and (idx.min() < 0 or idx.max() >= p.size):
        raise DimensionError(f"block {list(block)} has indices outside 0..{p.size - 1}")
    return float(p[idx].sum())


def class_probabilities(mdp: Mdp, partition: Partition) -> np.ndarray:
    """(A, S, n_blocks) array of P_s^a(C)."""
    if partition.n_states != mdp.n_states:
        raise DimensionError(f"partition covers {partition.n_states} states, MDP has {mdp.n_states}")
    return mdp.transitions @ partition.indicator()


# ─── Bisimulation ─────────────────────────────────────────────────────────────

def _tolerance(tol: Optional[float]) -> float:
    if tol is None:
        from bisimagg import config
        tol = config.PARTITION_TOL
    if tol < 0:
        raise PreconditionError(f"tol must be non-negative, got {tol}")
    return float(tol)


def _signatures(mdp: Mdp, labels: np.ndarray, n_blocks: int, tol: float) -> np.ndarray:
    indicator = np.zeros((mdp.n_states, n_blocks))
    indicator[np.arange(mdp.n_states), labels] = 1.0
    # the last block's column is implied by stochastic rows
    probs = (mdp.transitions @ indicator[:, :-1]).transpose(1, 0, 2).reshape(mdp.n_states, -1)
    sig = np.hstack([mdp.rewards.T, probs]) + 0.0  # folds -0.0 into 0.0
    if tol > 0.0:
        sig = np.round(sig / tol)
    return np.column_stack([labels, sig])


def bisimulation_partition(mdp: Mdp, tol: Optional[float] = None) -> Partition:
    """
    Coarsest partition whose blocks agree on rewards and on class
    probabilities over the blocks themselves. Starts from one block and splits
    by signature until a pass creates no new block; with tol = 0 this is
    exact stochastic bisimulation. For tol > 0 signatures are bucketed on a
    grid of width tol, so two values within tol can still land in different
    buckets.
    """
    tol = _tolerance(tol)
    labels = np.zeros(mdp.n_states, dtype=int)
    n_blocks = 1
    passes = 0
    while True:
        passes += 1
        keys = _signatures(mdp, labels, n_blocks, tol)
        _, inverse = np.unique(keys, axis=0, return_inverse=True)
        inverse = inverse.reshape(-1)
        refined = int(inverse.max()) + 1
        if refined == n_blocks:
            break
        # canonical relabelling keeps the last-column drop meaningful
        labels = np.asarray(Partition.from_labels(inverse).block_of)
        n_blocks = refined

    logger.debug(f"bisimulation_partition: {n_blocks} blocks after {passes} passes (tol={tol})")
    return Partition.from_labels(labels)


def is_bisimulation(mdp: Mdp, partition: Partition, tol: float = 0.0) -> bool:
    """Every block agrees on rewards and on class probabilities over the partition, within tol."""
    probs = class_probabilities(mdp, partition)
    for block in partition.blocks:
        idx = list(block)
        if np.ptp(mdp.rewards[:, idx], axis=1).max() > tol:
            return False
        if np.ptp(probs[:, idx, :], axis=1).max() > tol:
            return False
    return True


def induced_partition(d, tol: float) -> Partition:
    """
    Connected components of the graph joining states at distance <= tol.
    The closure makes the result an equivalence even though thresholding is
    not transitive.
    """
    d = np.asarray(d, dtype=float)
    if d.ndim != 2 or d.shape[0] != d.shape[1]:
        raise DimensionError(f"distance matrix must be square, got shape {d.shape}")
    if tol < 0:
        raise PreconditionError(f"tol must be non-negative, got {tol}")
    _, labels = connected_components(csr_matrix(d <= tol), directed=False)
    return Partition.from_labels(labels)
