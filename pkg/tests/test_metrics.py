import numpy as np
import pytest

from bisimagg.core.errors import PreconditionError
from bisimagg.core.generators import gen_figure1, gen_grid
from bisimagg.core.mdp import Mdp, MetricParams, validate
from bisimagg.core.metrics import (
    apply_F,
    certified_nonbisimilar,
    compute_metric,
    discrete_nonbisim_metric,
    fixed_point_metric,
    is_prefixed_point,
    tv_metric,
)
from bisimagg.core.partition import Partition, bisimulation_partition, induced_partition
from bisimagg.core.transport import discrete_metric, distance_violations, kantorovich
from tests.conftest import random_mdps


def closed_form(p, q, r, gamma):
    c_R, c_T = 1.0 - gamma, gamma
    d_uv = c_R * r / (1.0 - c_T)
    return d_uv, c_T * abs(p - q) * d_uv


# ─── apply_F ──────────────────────────────────────────────────────────────────

def test_apply_F_from_zero_is_reward_gap():
    mdp = gen_grid(3, 2)
    params = MetricParams.default(0.9)
    d = apply_F(mdp, np.zeros((6, 6)), params)
    gap = np.abs(mdp.rewards[:, :, None] - mdp.rewards[:, None, :]).max(axis=0)
    assert np.allclose(d, params.c_R * gap)


def test_apply_F_transports_mass_between_u_and_v():
    p, q, x = 0.3, 0.7, 0.4
    mdp = gen_figure1(p, q, 0.5)
    params = MetricParams.default(0.5)
    # s, t and u sit together, v is x away
    d = np.zeros((4, 4))
    d[3, :3] = d[:3, 3] = x
    assert apply_F(mdp, d, params)[0, 1] == pytest.approx(params.c_T * abs(p - q) * x, abs=1e-12)


def test_apply_F_identical_states_stay_at_zero():
    mdp = gen_figure1(0.4, 0.4, 0.8)
    d = apply_F(mdp, discrete_metric(4) * 0.5, MetricParams.default(0.7))
    assert d[0, 1] == 0.0


def test_apply_F_threads_agree():
    mdp = next(random_mdps(1, max_states=7, max_actions=3, seed=5))
    params = MetricParams.default(0.8)
    d = apply_F(mdp, apply_F(mdp, np.zeros((mdp.n_states,) * 2), params), params)
    assert np.array_equal(apply_F(mdp, d, params, workers=1), apply_F(mdp, d, params, workers=4))


# ─── fixed_point_metric ───────────────────────────────────────────────────────

@pytest.mark.parametrize("gamma", [0.5, 0.9])
@pytest.mark.parametrize("p, q", [(0.3, 0.7), (0.3, 0.3), (0.0, 1.0), (1.0, 0.2)])
@pytest.mark.parametrize("r", [0.5, 1.0])
def test_two_chain_closed_forms(p, q, r, gamma):
    result = fixed_point_metric(gen_figure1(p, q, r), MetricParams.default(gamma, delta=1e-10))
    d_uv, d_st = closed_form(p, q, r, gamma)
    assert result.distances[2, 3] == pytest.approx(d_uv, abs=1e-8)
    assert result.distances[0, 1] == pytest.approx(d_st, abs=1e-8)
    assert distance_violations(result.distances) == []


def test_iteration_count_and_residual():
    result = fixed_point_metric(gen_figure1(0.3, 0.7, 0.5), MetricParams.default(0.9, delta=0.01))
    assert result.iterations == 44
    assert result.residual_bound == pytest.approx(0.9 ** 44)
    assert result.residual_bound <= 0.01
    assert result.kind == "fixpoint"


def test_zero_rewards_reach_the_fixed_point_at_once():
    result = fixed_point_metric(gen_figure1(0.3, 0.7, 0.0), MetricParams.default(0.9))
    assert np.array_equal(result.distances, np.zeros((4, 4)))
    assert result.iterations == 1
    assert result.residual_bound == 0.0


def test_iterates_are_monotone_and_contract():
    for mdp in random_mdps(5, max_states=6, max_actions=3):
        params = MetricParams.default(0.7, delta=1e-4)
        result = fixed_point_metric(mdp, params, keep_trace=True)
        previous = np.zeros((mdp.n_states, mdp.n_states))
        for d_n in result.trace:
            assert np.all(d_n >= previous - 1e-12)
            assert distance_violations(d_n) == []
            previous = d_n
        inc = result.increments
        for k in range(1, len(inc)):
            assert inc[k] <= params.c_T * inc[k - 1] + 1e-12
            assert inc[k] <= params.c_T ** k + 1e-12


def test_c_T_edge_cases():
    mdp = gen_figure1(0.3, 0.7, 0.5)
    with pytest.raises(PreconditionError):
        fixed_point_metric(mdp, MetricParams(gamma=0.5, c_R=0.0, c_T=1.0))
    result = fixed_point_metric(mdp, MetricParams(gamma=0.5, c_R=1.0, c_T=0.0))
    assert result.iterations == 1
    assert result.residual_bound == 0.0
    assert result.distances[2, 3] == pytest.approx(0.5)
    assert result.distances[0, 1] == 0.0


@pytest.mark.parametrize("p", [0.0, 0.3, 0.7, 1.0])
@pytest.mark.parametrize("q", [0.0, 0.3, 1.0])
@pytest.mark.parametrize("r", [0.0, 0.5])
def test_fixed_point_agrees_with_bisimulation(p, q, r):
    mdp = gen_figure1(p, q, r)
    result = fixed_point_metric(mdp, MetricParams.default(0.5, delta=1e-10))
    assert induced_partition(result.distances, 1e-6) == bisimulation_partition(mdp, tol=0.0)


# ─── tv_metric ────────────────────────────────────────────────────────────────

def test_tv_metric_closed_form():
    params = MetricParams.default(0.9)
    result = tv_metric(gen_figure1(0.3, 0.7, 0.5), params)
    assert result.distances[0, 1] == pytest.approx(0.4 * params.c_T)
    assert result.residual_bound == 0.0
    assert result.partition.n_blocks == 4


def test_tv_metric_is_F_of_the_nonbisimilarity_metric():
    for mdp in random_mdps(5, max_states=6, max_actions=2, seed=9):
        params = MetricParams.default(0.6)
        result = tv_metric(mdp, params, tol=0.0)
        indicator = discrete_nonbisim_metric(bisimulation_partition(mdp, tol=0.0))
        assert np.allclose(result.distances, apply_F(mdp, indicator, params), atol=1e-9)


def test_bisimilar_states_have_zero_tv_distance():
    result = tv_metric(gen_figure1(0.3, 0.3, 0.5), MetricParams.default(0.9), tol=0.0)
    assert result.distances[0, 1] == 0.0
    assert result.distances[0, 2] > 0.0


def test_fixpoint_is_below_tv():
    for mdp in random_mdps(8, max_states=6, max_actions=3, seed=3):
        params = MetricParams.default(0.8)
        fix = fixed_point_metric(mdp, params)
        tv = tv_metric(mdp, params)
        assert np.all(fix.distances <= tv.distances + fix.residual_bound + 1e-9)
        assert distance_violations(tv.distances) == []


# ─── helpers ──────────────────────────────────────────────────────────────────

def test_discrete_nonbisim_metric():
    assert np.array_equal(discrete_nonbisim_metric(Partition.single_block(3)), np.zeros((3, 3)))
    assert np.array_equal(discrete_nonbisim_metric(Partition.singletons(3)), discrete_metric(3))
    d = discrete_nonbisim_metric(Partition.from_blocks([[0, 1], [2], [3]]))
    assert d[0, 1] == 0.0
    assert d[0, 2] == d[2, 3] == d[1, 3] == 1.0


def test_nonbisimilarity_metric_is_a_prefixed_point():
    mdp = gen_figure1(0.3, 0.3, 0.5)
    params = MetricParams.default(0.9)
    indicator = discrete_nonbisim_metric(bisimulation_partition(mdp, tol=0.0))
    assert is_prefixed_point(mdp, indicator, params)
    assert not is_prefixed_point(mdp, np.zeros((4, 4)), params)


def test_certified_nonbisimilar_pairs():
    params = MetricParams.default(0.5, delta=1e-6)
    distinct = fixed_point_metric(gen_figure1(0.3, 0.7, 0.5), params)
    assert certified_nonbisimilar(distinct) == [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]
    merged = fixed_point_metric(gen_figure1(0.3, 0.3, 0.5), params)
    assert (0, 1) not in certified_nonbisimilar(merged)


def test_compute_metric_dispatch():
    mdp = Mdp(2, ("a",), np.array([[0.0, 1.0]]), np.eye(2)[None])
    params = MetricParams.default(0.5)
    assert compute_metric(mdp, params, "tv").kind == "tv"
    assert compute_metric(mdp, params, "fixpoint").kind == "fixpoint"
    with pytest.raises(PreconditionError):
        compute_metric(mdp, params, "hausdorff")


def test_tv_matches_kantorovich_with_indicator_ground_metric():
    mdp = gen_figure1(0.3, 0.7, 0.5)
    indicator = discrete_nonbisim_metric(bisimulation_partition(mdp, tol=0.0))
    P = mdp.transitions[0]
    assert kantorovich(indicator, P[0], P[1]).cost == pytest.approx(0.4)


def test_rows_within_tolerance_of_stochastic():
    P = np.array([[[0.5, 0.5 + 9e-10, 0.0], [0.0, 0.3, 0.7 - 9e-10], [0.0, 0.0, 1.0]]])
    mdp = Mdp(3, ("a",), np.array([[0.0, 0.5, 1.0]]), P)
    assert validate(mdp) == []
    result = fixed_point_metric(mdp, MetricParams.default(0.5, delta=1e-4))
    assert distance_violations(result.distances, tol=1e-8) == []
    assert result.distances[0, 1] > 0.0
