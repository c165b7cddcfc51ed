#!/usr/bin/env python3
"""
bisimagg Main Entry Point
Command-line pipeline: gen -> solve -> metric -> aggregate -> bounds, plus
experiment sweeps that emit epsilon / gamma sweep data as CSV.

Exit codes: 0 success, 1 usage error or unwritable path, 2 invalid input,
3 failed certificate (duality gap, bound violation, iteration cap).
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Optional

from bisimagg import __version__, config
from bisimagg.core.aggregate import (
    SEED_ORDERS,
    bound_theorem52,
    build_aggregate,
    epsilon_partition,
    seeded_order,
)
from bisimagg.core.errors import (
    BisimError,
    CertificateError,
    DimensionError,
    IterationCapError,
    MdpFormatError,
    MdpValidationError,
    PreconditionError,
)
from bisimagg.core.generators import gen_figure1, gen_grid, gen_random
from bisimagg.core.mdp import MetricParams, read_mdp, write_mdp
from bisimagg.core.metrics import METRIC_KINDS, MetricResult, compute_metric
from bisimagg.core.solver import greedy_policy, value_iteration
from bisimagg.modules import export
from bisimagg.modules.experiment import COLUMNS, run_experiment

logger = logging.getLogger("bisimagg")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INVALID = 2
EXIT_CERTIFICATE = 3


# ─── Logging Setup ────────────────────────────────────────────────────────────

def setup_logging(level: str):
    handlers = [logging.StreamHandler(sys.stderr)]
    try:
        config.ensure_dirs()
        handlers.append(logging.FileHandler(str(config.LOG_PATH), encoding="utf-8"))
    except OSError:
        pass  # read-only home: console only
    logging.basicConfig(
        level=getattr(logging, level, logging.INFO),
        format="%(asctime)s [%(levelname)s] %(name)s: %(message)s",
        handlers=handlers,
        force=True,
    )


# ─── Helpers ──────────────────────────────────────────────────────────────────

def _output(path: Optional[str], default_name: str) -> Path:
    return Path(path).expanduser() if path else config.OUTPUT_DIR / default_name


def _params(args) -> MetricParams:
    gamma = args.gamma
    c_R = args.cR if args.cR is not None else 1.0 - gamma
    c_T = args.cT if args.cT is not None else gamma
    delta = args.delta if args.delta is not None else config.DEFAULT_DELTA
    params = MetricParams(gamma=gamma, c_R=c_R, c_T=c_T, delta=delta)
    for warning in params.warnings():
        logger.warning(warning)
    return params


def _sidecar(distances: Path) -> Path:
    return distances.with_suffix(".json")


def _load_metric(args, mdp, params: MetricParams) -> MetricResult:
    """Distances from --distances (with residual from the JSON sidecar) or computed fresh."""
    if not getattr(args, "distances", None):
        return compute_metric(mdp, params, args.kind, tol=args.tol)

    path = Path(args.distances).expanduser()
    d, _labels = export.read_distances(path)
    if d.shape != (mdp.n_states, mdp.n_states):
        raise DimensionError(f"{path}: {d.shape} distance matrix for {mdp.n_states} states")
    residual, kind, iterations = 0.0, args.kind, 0
    if _sidecar(path).exists():
        meta = export.read_metric_sidecar(_sidecar(path))
        residual = float(meta.get("residual_bound", 0.0))
        kind = meta.get("kind", kind)
        iterations = int(meta.get("iterations", 0))
    else:
        logger.warning(f"no sidecar for {path}; assuming residual bound 0")
    return MetricResult(d, iterations, residual, kind, params)


# ─── Commands ─────────────────────────────────────────────────────────────────

def cmd_gen(args) -> dict:
    if args.family == "grid":
        mdp = gen_grid(args.width, args.height)
    elif args.family == "figure1":
        mdp = gen_figure1(args.p, args.q, args.r_v)
    else:
        mdp = gen_random(args.states, args.actions, args.seed, args.branching)

    path = write_mdp(mdp, _output(args.output, f"{args.family}.json"))
    read_mdp(path)  # read-back validation
    return {
        "success": True,
        "text": f"{args.family}: {mdp.n_states} states, {mdp.n_actions} actions -> {path}",
        "file_path": str(path),
    }


def cmd_solve(args) -> dict:
    mdp = read_mdp(args.mdp)
    epsilon = args.epsilon if args.epsilon is not None else config.DEFAULT_EPSILON_VI
    v, backups = value_iteration(mdp, args.gamma, epsilon)
    path = export.write_values(_output(args.output, "values.csv"), v)
    if args.policy:
        export.write_policy(args.policy, greedy_policy(mdp, args.gamma, v))
    return {
        "success": True,
        "text": f"value iteration: {backups} backups, max V = {v.max():.6g} -> {path}",
        "file_path": str(path),
    }


def cmd_metric(args) -> dict:
    mdp = read_mdp(args.mdp)
    params = _params(args)
    result = compute_metric(mdp, params, args.kind, tol=args.tol)
    path = export.write_distances(_output(args.output, f"{args.kind}.csv"), result.distances, mdp.state_labels)
    export.write_metric_sidecar(_sidecar(path), result)
    return {
        "success": True,
        "text": (
            f"{args.kind} metric: {result.iterations} iterations, "
            f"residual bound {result.residual_bound:.3e} -> {path}"
        ),
        "file_path": str(path),
        "residual_bound": result.residual_bound,
    }


def cmd_aggregate(args) -> dict:
    mdp = read_mdp(args.mdp)
    metric = _load_metric(args, mdp, _params(args))
    order = seeded_order(metric.distances, args.seed_order)
    blocks = epsilon_partition(metric.distances, args.epsilon, order)
    agg = build_aggregate(mdp, blocks)

    path = write_mdp(agg.quotient, _output(args.output, "quotient.json"))
    part_path = export.write_partition(args.partition or path.with_suffix(".partition.txt"), blocks)
    return {
        "success": True,
        "text": f"aggregate: eps={args.epsilon} -> {blocks.n_blocks} blocks ({path}, {part_path})",
        "file_path": str(path),
        "n_blocks": blocks.n_blocks,
    }


def cmd_bounds(args) -> dict:
    mdp = read_mdp(args.mdp)
    params = _params(args)
    metric = _load_metric(args, mdp, params)
    blocks = export.read_partition(args.partition, mdp.n_states)
    epsilon_vi = args.epsilon_vi if args.epsilon_vi is not None else config.DEFAULT_EPSILON_VI

    report = bound_theorem52(mdp, metric, blocks, params, epsilon_vi, epsilon=args.epsilon)
    path = export.write_bound_report(_output(args.output, "bounds.csv"), report)
    report.check()
    naive = f", naive {report.naive_bound:.6g}" if report.naive_bound is not None else ""
    return {
        "success": True,
        "text": (
            f"bounds: max bound {report.max_bound:.6g}{naive}, "
            f"max true error {report.max_true_error:.6g} -> {path}"
        ),
        "file_path": str(path),
    }


def cmd_experiment(args) -> dict:
    if args.mdp:
        mdp = read_mdp(args.mdp)
    else:
        width, _, height = args.grid.partition("x")
        try:
            mdp = gen_grid(int(width), int(height or width))
        except ValueError:
            raise PreconditionError(f"--grid expects WIDTHxHEIGHT, got {args.grid!r}")

    rows = run_experiment(
        mdp,
        gammas=args.gammas,
        eps_steps=args.eps_steps,
        kinds=args.metrics,
        epsilon_vi=args.epsilon_vi,
        delta=args.delta,
        seed_order=args.seed_order,
        tol=args.tol,
        workers=args.workers,
    )
    path = export.write_rows(_output(args.output, "experiment.csv"), rows, COLUMNS)
    if args.xlsx:
        export.write_rows_xlsx(args.xlsx, rows, COLUMNS)
    return {
        "success": True,
        "text": f"experiment: {len(rows)} rows -> {path}",
        "file_path": str(path),
    }


# ─── Argument parsing ─────────────────────────────────────────────────────────

class _Parser(argparse.ArgumentParser):
    """Usage errors exit with 1 instead of argparse's 2, which means invalid input here."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _float_list(text: str) -> list:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _kind_list(text: str) -> list:
    kinds = [k.strip() for k in text.split(",") if k.strip()]
    bad = [k for k in kinds if k not in METRIC_KINDS]
    if bad or not kinds:
        raise argparse.ArgumentTypeError(f"metrics must be drawn from {', '.join(METRIC_KINDS)}")
    return kinds


def _metric_flags(p: argparse.ArgumentParser, gamma_required: bool = True):
    if gamma_required:
        p.add_argument("--gamma", type=float, required=True)
    else:
        p.add_argument("--gamma", type=float, default=config.DEFAULT_GAMMA)
    p.add_argument("--cR", type=float, default=None, help="reward weight (default 1 - gamma)")
    p.add_argument("--cT", type=float, default=None, help="transport weight (default gamma)")
    p.add_argument("--delta", type=float, default=None, help="fixpoint accuracy")
    p.add_argument("--kind", choices=METRIC_KINDS, default="fixpoint")
    p.add_argument("--tol", type=float, default=None, help="bisimulation partition tolerance")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="bisimagg", description="Bisimulation metrics and state aggregation for finite MDPs.")
    parser.add_argument("--version", action="version", version=f"bisimagg {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    parser.add_argument("-q", "--quiet", action="store_true", help="warnings only")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    gen = sub.add_parser("gen", help="generate an MDP document")
    fam = gen.add_subparsers(dest="family", required=True, parser_class=_Parser)
    grid = fam.add_parser("grid")
    grid.add_argument("width", type=int)
    grid.add_argument("height", type=int)
    fig = fam.add_parser("figure1")
    fig.add_argument("--p", type=float, required=True)
    fig.add_argument("--q", type=float, required=True)
    fig.add_argument("--r-v", dest="r_v", type=float, required=True)
    rnd = fam.add_parser("random")
    rnd.add_argument("--states", type=int, required=True)
    rnd.add_argument("--actions", type=int, required=True)
    rnd.add_argument("--seed", type=int, required=True)
    rnd.add_argument("--branching", type=int, default=None)
    for p in (grid, fig, rnd):
        p.add_argument("-o", "--output", default=None)
    gen.set_defaults(handler=cmd_gen)

    solve = sub.add_parser("solve", help="value iteration")
    solve.add_argument("mdp")
    solve.add_argument("--gamma", type=float, required=True)
    solve.add_argument("--epsilon", type=float, default=None)
    solve.add_argument("--policy", default=None, help="also write the greedy policy CSV")
    solve.add_argument("-o", "--output", default=None)
    solve.set_defaults(handler=cmd_solve)

    metric = sub.add_parser("metric", help="bisimulation distance matrix")
    metric.add_argument("mdp")
    _metric_flags(metric)
    metric.add_argument("-o", "--output", default=None)
    metric.set_defaults(handler=cmd_metric)

    agg = sub.add_parser("aggregate", help="epsilon-cluster and write the aggregate MDP")
    agg.add_argument("mdp")
    agg.add_argument("--epsilon", type=float, required=True)
    agg.add_argument("--seed-order", choices=SEED_ORDERS, default="index")
    agg.add_argument("--distances", default=None, help="distance CSV from `metric` (computed if omitted)")
    _metric_flags(agg, gamma_required=False)
    agg.add_argument("--partition", default=None, help="partition text output")
    agg.add_argument("-o", "--output", default=None)
    agg.set_defaults(handler=cmd_aggregate)

    bounds = sub.add_parser("bounds", help="value-error bounds for a partition")
    bounds.add_argument("mdp")
    bounds.add_argument("--partition", required=True)
    bounds.add_argument("--distances", default=None)
    bounds.add_argument("--epsilon", type=float, default=None, help="clustering radius, enables the naive bound")
    bounds.add_argument("--epsilon-vi", dest="epsilon_vi", type=float, default=None)
    _metric_flags(bounds)
    bounds.add_argument("-o", "--output", default=None)
    bounds.set_defaults(handler=cmd_bounds)

    exp = sub.add_parser("experiment", help="sweep epsilon and gamma")
    exp.add_argument("mdp", nargs="?", default=None)
    exp.add_argument("--grid", default="5x5", help="WIDTHxHEIGHT gridworld when no MDP is given")
    exp.add_argument("--gammas", type=_float_list, default=[0.1, 0.5, 0.9])
    exp.add_argument("--eps-steps", dest="eps_steps", type=int, default=None)
    exp.add_argument("--metrics", type=_kind_list, default=list(METRIC_KINDS))
    exp.add_argument("--seed-order", choices=SEED_ORDERS, default="index")
    exp.add_argument("--epsilon-vi", dest="epsilon_vi", type=float, default=None)
    exp.add_argument("--delta", type=float, default=None)
    exp.add_argument("--tol", type=float, default=None)
    exp.add_argument("--workers", type=int, default=None)
    exp.add_argument("--xlsx", default=None, help="also write the rows as a spreadsheet")
    exp.add_argument("-o", "--output", default=None)
    exp.set_defaults(handler=cmd_experiment)

    return parser


def main(argv: Optional[list] = None) -> int:
    args = build_parser().parse_args(argv)
    level = "DEBUG" if args.verbose else "WARNING" if args.quiet else config.LOG_LEVEL
    setup_logging(level)

    try:
        result = args.handler(args)
    except (CertificateError, IterationCapError) as e:
        logger.error(f"certificate failure: {e}")
        return EXIT_CERTIFICATE
    except (MdpFormatError, DimensionError, MdpValidationError, PreconditionError) as e:
        logger.error(f"invalid input: {e}")
        return EXIT_INVALID
    except BisimError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return EXIT_INVALID
    except OSError as e:
        logger.error(f"cannot access {getattr(e, 'filename', None) or 'path'}: {e}")
        return EXIT_USAGE

    print(result["text"])
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
