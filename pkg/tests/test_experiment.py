import dataclasses

import numpy as np
import pytest

from bisimagg.core.aggregate import bound_theorem52, epsilon_partition
from bisimagg.core.errors import CertificateError, PreconditionError
from bisimagg.core.generators import gen_figure1, gen_grid
from bisimagg.core.mdp import MetricParams
from bisimagg.core.metrics import fixed_point_metric, tv_metric
from bisimagg.core.transport import distance_violations
from bisimagg.modules import experiment
from bisimagg.modules.experiment import COLUMNS, epsilon_grid, run_experiment


def test_epsilon_grid():
    assert np.allclose(epsilon_grid(4), [0.0, 0.25, 0.5, 0.75, 1.0])
    assert epsilon_grid(1).tolist() == [0.0, 1.0]
    with pytest.raises(PreconditionError):
        epsilon_grid(0)


def test_small_sweep():
    rows = run_experiment(gen_figure1(0.3, 0.7, 0.5), gammas=[0.5], eps_steps=4, epsilon_vi=1e-8)
    assert len(rows) == 10
    keys = [(r.gamma, r.epsilon, r.metric_kind) for r in rows]
    assert keys == sorted(keys)
    assert {r.metric_kind for r in rows} == {"fixpoint", "tv"}
    by_eps = {(r.epsilon, r.metric_kind): r for r in rows}
    for kind in ("fixpoint", "tv"):
        assert by_eps[0.0, kind].n_blocks == 4
        assert by_eps[1.0, kind].n_blocks == 1
        assert by_eps[0.0, kind].true_error <= 2e-8
    for row in rows:
        assert row.theorem_bound <= row.naive_bound + 1e-9
        assert row.total_ms >= row.metric_ms >= 0.0
        assert list(row.as_dict()) == list(COLUMNS)


def cells(rows):
    return [(r.gamma, r.epsilon, r.n_blocks, r.theorem_bound) for r in rows]


def test_sweep_with_threads_matches_serial():
    mdp = gen_figure1(0.2, 0.9, 1.0)
    serial = run_experiment(mdp, gammas=[0.3, 0.7], eps_steps=3, kinds=["tv"], workers=1)
    threaded = run_experiment(mdp, gammas=[0.3, 0.7], eps_steps=3, kinds=["tv"], workers=3)
    assert cells(serial) == cells(threaded)


def test_farthest_seed_order_runs():
    rows = run_experiment(gen_grid(3, 3), gammas=[0.5], eps_steps=2, seed_order="farthest")
    assert [r.n_blocks for r in rows if r.epsilon == 0.0] == [9, 9]


def test_unknown_metric_kind():
    with pytest.raises(PreconditionError):
        run_experiment(gen_figure1(0.3, 0.7, 0.5), gammas=[0.5], eps_steps=2, kinds=["hausdorff"])


def test_row_violations_fail_the_sweep(monkeypatch):
    real = experiment.bound_theorem52

    def inflated(*args, **kwargs):
        report = real(*args, **kwargs)
        return dataclasses.replace(report, true_error=report.true_error + 10.0)

    monkeypatch.setattr(experiment, "bound_theorem52", inflated)
    with pytest.raises(CertificateError):
        run_experiment(gen_figure1(0.3, 0.7, 0.5), gammas=[0.5], eps_steps=2)


@pytest.mark.slow
def test_gridworld_sweep():
    rows = run_experiment(gen_grid(5, 5), gammas=[0.1, 0.5, 0.9], eps_steps=19)
    assert len(rows) == 3 * 20 * 2
    for row in rows:
        if row.epsilon == 1.0:
            assert row.n_blocks == 1
        if row.epsilon == 0.0:
            assert row.n_blocks == 25
    assert all(r.theorem_bound <= r.naive_bound + 1e-9 for r in rows)


@pytest.mark.slow
@pytest.mark.parametrize("gamma", [0.1, 0.5, 0.9])
def test_gridworld_metrics_and_bounds(gamma):
    mdp = gen_grid(5, 5)
    params = MetricParams.default(gamma)
    fix = fixed_point_metric(mdp, params, keep_trace=True)
    tv = tv_metric(mdp, params)
    assert distance_violations(fix.distances) == []
    assert distance_violations(tv.distances) == []
    for n, step in enumerate(fix.increments):
        assert step <= params.c_T ** n + 1e-12
    for metric in (fix, tv):
        for eps in (0.0, 0.1, 0.3, 1.0):
            blocks = epsilon_partition(metric.distances, eps)
            report = bound_theorem52(mdp, metric, blocks, params, 1e-8, epsilon=eps)
            assert report.violations() == []


def test_single_state_violation_fails_the_sweep(monkeypatch):
    real = experiment.bound_theorem52
    tightest = []

    def shifted(*args, **kwargs):
        report = real(*args, **kwargs)
        s = int(np.argmin(report.per_state_bound))
        # the maximum true error stays within the maximum bound
        error = np.zeros_like(report.per_state_bound)
        error[s] = report.max_bound
        if report.per_state_bound[s] < report.max_bound:
            tightest.append(s)
        return dataclasses.replace(report, true_error=error)

    monkeypatch.setattr(experiment, "bound_theorem52", shifted)
    with pytest.raises(CertificateError, match="exceeds bound"):
        run_experiment(gen_figure1(0.3, 0.7, 0.5), gammas=[0.5], eps_steps=2, kinds=["tv"])
    assert tightest
