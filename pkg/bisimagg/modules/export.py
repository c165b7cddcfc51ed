"""
bisimagg Export Module
CSV / text / JSON / spreadsheet writers (and the readers the CLI needs) for
every artifact: value functions, policies, distance matrices, transport
plans, partitions, bound reports and experiment rows.
"""

import json
import logging
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
import pandas as pd

from bisimagg.core.aggregate import BoundReport
from bisimagg.core.metrics import MetricResult
from bisimagg.core.partition import Partition, parse_partition_text
from bisimagg.core.transport import TransportPlan

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

# repr-precision floats so reading back is exact
FLOAT_FORMAT = "%.17g"


def _target(path: PathLike) -> Path:
    p = Path(path).expanduser()
    p.parent.mkdir(parents=True, exist_ok=True)
    return p


def _write_frame(df: pd.DataFrame, path: PathLike) -> Path:
    p = _target(path)
    df.to_csv(p, index=False, float_format=FLOAT_FORMAT)
    logger.info(f"written: {p} ({len(df)} rows)")
    return p


# ─── Values and policies ──────────────────────────────────────────────────────

def write_values(path: PathLike, values) -> Path:
    v = np.asarray(values, dtype=float)
    return _write_frame(pd.DataFrame({"state_index": np.arange(v.size), "value": v}), path)


def read_values(path: PathLike) -> np.ndarray:
    df = pd.read_csv(Path(path).expanduser())
    return df.sort_values("state_index")["value"].to_numpy(dtype=float)


def write_policy(path: PathLike, policy) -> Path:
    pi = np.asarray(policy, dtype=int)
    return _write_frame(pd.DataFrame({"state_index": np.arange(pi.size), "action_index": pi}), path)


# ─── Distance matrices ────────────────────────────────────────────────────────

def write_distances(path: PathLike, d, labels: Optional[Sequence[str]] = None) -> Path:
    """n x n CSV, header row of state labels (indices when unlabelled)."""
    d = np.asarray(d, dtype=float)
    columns = list(labels) if labels is not None else [str(s) for s in range(d.shape[0])]
    return _write_frame(pd.DataFrame(d, columns=columns), path)


def read_distances(path: PathLike) -> tuple:
    """Returns (matrix, header labels)."""
    df = pd.read_csv(Path(path).expanduser())
    return df.to_numpy(dtype=float), [str(c) for c in df.columns]


def write_metric_sidecar(path: PathLike, result: MetricResult) -> Path:
    p = _target(path)
    with open(p, "w", encoding="utf-8") as f:
        json.dump(result.summary(), f, indent=2)
    return p


def read_metric_sidecar(path: PathLike) -> dict:
    with open(Path(path).expanduser(), encoding="utf-8") as f:
        return json.load(f)


def write_plan(path: PathLike, plan: TransportPlan) -> Path:
    """Nonzero flow as (source, target, mass) triples, then the potentials."""
    src, dst = np.nonzero(plan.flow)
    df = pd.DataFrame({"source": src, "target": dst, "mass": plan.flow[src, dst]})
    p = _write_frame(df, path)
    _write_frame(
        pd.DataFrame({"state_index": np.arange(plan.dual_potentials.size), "potential": plan.dual_potentials}),
        p.with_name(p.stem + "_potentials.csv"),
    )
    return p


# ─── Partitions ───────────────────────────────────────────────────────────────

def write_partition(path: PathLike, partition: Partition) -> Path:
    p = _target(path)
    p.write_text(partition.to_text(), encoding="utf-8")
    logger.info(f"partition written: {p} ({partition.n_blocks} blocks)")
    return p


def read_partition(path: PathLike, n_states: Optional[int] = None) -> Partition:
    return parse_partition_text(Path(path).expanduser().read_text(encoding="utf-8"), n_states)


# ─── Bound reports ────────────────────────────────────────────────────────────

def write_bound_report(path: PathLike, report: BoundReport) -> Path:
    """`state,g,bound,true_error` rows followed by one `# max_bound=..` summary line."""
    true_error = report.true_error if report.true_error is not None else np.full(report.g.size, np.nan)
    df = pd.DataFrame({
        "state": np.arange(report.g.size),
        "g": report.g,
        "bound": report.per_state_bound,
        "true_error": true_error,
    })
    p = _write_frame(df, path)
    naive = "" if report.naive_bound is None else f"{report.naive_bound!r}"
    with open(p, "a", encoding="utf-8") as f:
        f.write(f"# max_bound={report.max_bound!r},naive_bound={naive},slack={report.slack!r}\n")
    return p


def read_bound_report(path: PathLike) -> tuple:
    """Returns (per-state DataFrame, summary dict)."""
    p = Path(path).expanduser()
    df = pd.read_csv(p, comment="#")
    summary = {}
    for line in p.read_text(encoding="utf-8").splitlines():
        if line.startswith("#"):
            for item in line.lstrip("# ").split(","):
                key, _, value = item.partition("=")
                summary[key] = float(value) if value else None
    return df, summary


# ─── Experiment rows ──────────────────────────────────────────────────────────

def rows_frame(rows: Sequence, columns: Sequence[str]) -> pd.DataFrame:
    return pd.DataFrame([r.as_dict() for r in rows], columns=list(columns))


def write_rows(path: PathLike, rows: Sequence, columns: Sequence[str]) -> Path:
    return _write_frame(rows_frame(rows, columns), path)


def write_rows_xlsx(path: PathLike, rows: Sequence, columns: Sequence[str], sheet_name: str = "sweep") -> Path:
    p = _target(path)
    rows_frame(rows, columns).to_excel(p, index=False, sheet_name=sheet_name, engine="openpyxl")
    logger.info(f"spreadsheet written: {p}")
    return p
