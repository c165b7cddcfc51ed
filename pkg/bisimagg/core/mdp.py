"""
bisimagg MDP Core
Finite MDP data model, invariant checks, reward normalization and the on-disk
MDP document (versioned JSON, one document per file).

Array layout is action-major everywhere:
  rewards[a][s]            reward for taking action a in state s
  transitions[a][s][s']    probability of moving s -> s' under action a
"""

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from bisimagg.core.errors import (
    DimensionError,
    MdpFormatError,
    MdpValidationError,
    PreconditionError,
)

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
PROB_TOL = 1e-9

PathLike = Union[str, Path]


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=float, copy=True)
    arr.setflags(write=False)
    return arr


# ─── Types ────────────────────────────────────────────────────────────────────

@dataclass(frozen=True, eq=False)
class Mdp:
    """
    A finite MDP. Immutable: the arrays are copied and marked read-only.

    Construction only checks shapes. Stochasticity and reward range are
    reported by validate(), so unnormalized MDPs can still be built and
    passed to normalize_rewards().
    """

    n_states: int
    action_labels: tuple
    rewards: np.ndarray
    transitions: np.ndarray
    state_labels: Optional[tuple] = None

    def __post_init__(self):
        n = int(self.n_states)
        labels = tuple(str(a) for a in self.action_labels)
        if n < 1:
            raise DimensionError(f"n_states must be positive, got {self.n_states}")
        if not labels:
            raise DimensionError("an MDP needs at least one action")

        try:
            rewards = _frozen(self.rewards)
            transitions = _frozen(self.transitions)
        except (TypeError, ValueError) as e:
            raise DimensionError(f"rewards/transitions are not rectangular numeric arrays: {e}")

        n_actions = len(labels)
        if rewards.shape != (n_actions, n):
            raise DimensionError(f"rewards shape {rewards.shape} != ({n_actions}, {n})")
        if transitions.shape != (n_actions, n, n):
            raise DimensionError(f"transitions shape {transitions.shape} != ({n_actions}, {n}, {n})")

        state_labels = self.state_labels
        if state_labels is not None:
            state_labels = tuple(str(s) for s in state_labels)
            if len(state_labels) != n:
                raise DimensionError(f"{len(state_labels)} state labels for {n} states")

        object.__setattr__(self, "n_states", n)
        object.__setattr__(self, "action_labels", labels)
        object.__setattr__(self, "rewards", rewards)
        object.__setattr__(self, "transitions", transitions)
        object.__setattr__(self, "state_labels", state_labels)

    @property
    def n_actions(self) -> int:
        return len(self.action_labels)

    def label(self, s: int) -> str:
        return self.state_labels[s] if self.state_labels else str(s)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Mdp):
            return NotImplemented
        return (
            self.n_states == other.n_states
            and self.action_labels == other.action_labels
            and self.state_labels == other.state_labels
            and np.array_equal(self.rewards, other.rewards)
            and np.array_equal(self.transitions, other.transitions)
        )

    __hash__ = None

    def __repr__(self) -> str:
        return f"Mdp(n_states={self.n_states}, actions={list(self.action_labels)})"


@dataclass(frozen=True)
class MetricParams:
    """
    Weights of the bisimulation operator plus the d_fix accuracy.

    c_R + c_T <= 1 is enforced here. gamma <= c_T is only needed by the value
    bounds, so it is reported by warnings() instead of raised.
    """

    gamma: float
    c_R: float
    c_T: float
    delta: float = 0.01

    def __post_init__(self):
        if not 0.0 < self.gamma < 1.0:
            raise PreconditionError(f"gamma must lie in (0, 1), got {self.gamma}")
        for name in ("c_R", "c_T"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise PreconditionError(f"{name} must lie in [0, 1], got {value}")
        # 1 - g + g can land one ulp above 1
        if self.c_R + self.c_T > 1.0 + 1e-12:
            raise PreconditionError(f"c_R + c_T must be <= 1, got {self.c_R} + {self.c_T}")
        if not self.delta > 0.0:
            raise PreconditionError(f"delta must be positive, got {self.delta}")

    @classmethod
    def default(cls, gamma: float, delta: Optional[float] = None) -> "MetricParams":
        """The c_R = 1 - gamma, c_T = gamma parameterization."""
        if delta is None:
            from bisimagg import config
            delta = config.DEFAULT_DELTA
        return cls(gamma=gamma, c_R=1.0 - gamma, c_T=gamma, delta=delta)

    @property
    def bounds_apply(self) -> bool:
        return self.gamma <= self.c_T

    def warnings(self) -> list:
        out = []
        if not self.bounds_apply:
            out.append(f"gamma={self.gamma} > c_T={self.c_T}: value bounds do not apply")
        if self.c_R == 0.0:
            out.append("c_R = 0: the metric ignores rewards and value bounds are vacuous")
        return out


# ─── Distributions and value functions ────────────────────────────────────────

def distribution_violations(weights: Sequence[float], tol: float = PROB_TOL) -> list:
    """Report why `weights` is not a probability distribution (empty list if it is)."""
    w = np.asarray(weights, dtype=float)
    out = []
    if w.ndim != 1 or w.size == 0:
        return [f"distribution must be a non-empty vector, got shape {w.shape}"]
    if not np.all(np.isfinite(w)):
        return ["distribution has non-finite entries"]
    neg = np.flatnonzero(w < -tol)
    if neg.size:
        out.append(f"negative weight at index {int(neg[0])}: {w[neg[0]]!r}")
    total = float(w.sum())
    if abs(total - 1.0) > tol:
        out.append(f"weights sum to {total!r}, not 1")
    return out


def as_distribution(weights: Sequence[float], n: Optional[int] = None) -> np.ndarray:
    """Validate and return `weights` as a float vector; raises on any violation."""
    w = np.asarray(weights, dtype=float)
    if n is not None and w.shape != (n,):
        raise DimensionError(f"distribution of shape {w.shape}, expected ({n},)")
    problems = distribution_violations(w)
    if problems:
        raise PreconditionError("; ".join(problems))
    return w


def value_function_violations(values: Sequence[float], n_states: int, gamma: float) -> list:
    v = np.asarray(values, dtype=float)
    if v.shape != (n_states,):
        return [f"value function of shape {v.shape}, expected ({n_states},)"]
    upper = 1.0 / (1.0 - gamma) + PROB_TOL
    bad = np.flatnonzero((v < -PROB_TOL) | (v > upper))
    return [f"value {v[s]!r} at state {int(s)} outside [0, {upper:.6g}]" for s in bad]


# ─── Validation ───────────────────────────────────────────────────────────────

def validate(mdp: Mdp, tol: float = PROB_TOL) -> list:
    """
    Check every model invariant; return one message per violation.
    Never raises. Each message starts with the invariant name.
    """
    violations = []

    bad_r = np.argwhere(~np.isfinite(mdp.rewards))
    for a, s in bad_r:
        violations.append(f"non-finite: reward[{a}][{s}] = {mdp.rewards[a, s]!r}")
    out_of_range = np.argwhere(np.isfinite(mdp.rewards) & ((mdp.rewards < 0.0) | (mdp.rewards > 1.0)))
    for a, s in out_of_range:
        violations.append(f"reward-range: reward[{a}][{s}] = {mdp.rewards[a, s]!r} not in [0, 1]")

    if not np.all(np.isfinite(mdp.transitions)):
        for a, s, t in np.argwhere(~np.isfinite(mdp.transitions)):
            violations.append(f"non-finite: transition[{a}][{s}][{t}]")
        return violations

    for a, s, t in np.argwhere(mdp.transitions < -tol):
        violations.append(
            f"negative-probability: transition[{a}][{s}][{t}] = {mdp.transitions[a, s, t]!r}"
        )
    sums = mdp.transitions.sum(axis=2)
    for a, s in np.argwhere(np.abs(sums - 1.0) > tol):
        violations.append(f"row-sum: transition[{a}][{s}] sums to {sums[a, s]!r}")

    return violations


def require_valid(mdp: Mdp) -> Mdp:
    problems = validate(mdp)
    if problems:
        raise MdpValidationError(problems)
    return mdp


# ─── Reward normalization ─────────────────────────────────────────────────────

def normalize_rewards(mdp: Mdp) -> Mdp:
    """
    Map rewards affinely onto [0, 1]: (r - R_min) / (R_max - R_min).
    If every reward is equal they all map to 0. Transitions are untouched.
    """
    r = mdp.rewards
    if not np.all(np.isfinite(r)):
        raise PreconditionError("cannot normalize non-finite rewards")
    lo, hi = float(r.min()), float(r.max())
    if hi == lo:
        scaled = np.zeros_like(r)
    else:
        scaled = (r - lo) / (hi - lo)
        # guard the endpoints against round-off
        scaled = np.clip(scaled, 0.0, 1.0)
    logger.debug(f"normalize_rewards: [{lo}, {hi}] -> [0, 1]")
    return Mdp(mdp.n_states, mdp.action_labels, scaled, mdp.transitions, mdp.state_labels)


# ─── Document I/O ─────────────────────────────────────────────────────────────

def to_document(mdp: Mdp) -> dict:
    doc = {
        "version": FORMAT_VERSION,
        "n_states": mdp.n_states,
        "actions": list(mdp.action_labels),
        "rewards": mdp.rewards.tolist(),
        "transitions": mdp.transitions.tolist(),
    }
    if mdp.state_labels is not None:
        doc["state_labels"] = list(mdp.state_labels)
    return doc


def from_document(doc: dict, check: bool = True) -> Mdp:
    """
    Build an Mdp from a parsed document. Raises MdpFormatError for structural
    problems, DimensionError for shape mismatches and MdpValidationError when
    `check` is set and the model breaks an invariant.
    """
    if not isinstance(doc, dict):
        raise MdpFormatError(f"MDP document must be an object, got {type(doc).__name__}")
    missing = [k for k in ("version", "n_states", "actions", "rewards", "transitions") if k not in doc]
    if missing:
        raise MdpFormatError(f"MDP document is missing field(s): {', '.join(missing)}")
    if doc["version"] != FORMAT_VERSION:
        raise MdpFormatError(f"unsupported MDP document version {doc['version']!r}")
    if not isinstance(doc["n_states"], int) or isinstance(doc["n_states"], bool):
        raise MdpFormatError(f"n_states must be an integer, got {doc['n_states']!r}")
    if not isinstance(doc["actions"], list):
        raise MdpFormatError("actions must be a list of labels")

    try:
        rewards = np.array(doc["rewards"], dtype=float)
        transitions = np.array(doc["transitions"], dtype=float)
    except (TypeError, ValueError) as e:
        # ragged nesting surfaces as ValueError from numpy
        if "inhomogeneous" in str(e) or "sequence" in str(e):
            raise DimensionError(f"ragged rewards/transitions array: {e}")
        raise MdpFormatError(f"non-numeric rewards/transitions: {e}")

    mdp = Mdp(
        n_states=doc["n_states"],
        action_labels=tuple(doc["actions"]),
        rewards=rewards,
        transitions=transitions,
        state_labels=tuple(doc["state_labels"]) if doc.get("state_labels") is not None else None,
    )
    if check:
        require_valid(mdp)
    return mdp


def write_mdp(mdp: Mdp, path: PathLike) -> Path:
    """Write the MDP document. Floats are emitted with repr, so read-back is bit-identical."""
    p = Path(path).expanduser()
    p.parent.mkdir(parents=True, exist_ok=True)
    with open(p, "w", encoding="utf-8") as f:
        json.dump(to_document(mdp), f, indent=1, allow_nan=True)
        f.write("\n")
    logger.info(f"MDP written: {p} ({mdp.n_states} states, {mdp.n_actions} actions)")
    return p


def read_mdp(path: PathLike, check: bool = True) -> Mdp:
    p = Path(path).expanduser()
    try:
        with open(p, encoding="utf-8") as f:
            doc = json.load(f)
    except json.JSONDecodeError as e:
        raise MdpFormatError(f"{p}: not a valid MDP document: {e}")
    mdp = from_document(doc, check=check)
    logger.debug(f"MDP read: {p} ({mdp.n_states} states)")
    return mdp


def is_finite_number(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)
