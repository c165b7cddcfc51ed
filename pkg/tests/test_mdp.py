import json

import numpy as np
import pytest

from bisimagg.core.errors import DimensionError, MdpFormatError, MdpValidationError, PreconditionError
from bisimagg.core.generators import gen_figure1, gen_grid
from bisimagg.core.mdp import (
    Mdp,
    MetricParams,
    as_distribution,
    from_document,
    normalize_rewards,
    read_mdp,
    to_document,
    validate,
    value_function_violations,
    write_mdp,
)


def two_state(rewards=((0.0, 1.0),), transitions=(((1.0, 0.0), (0.0, 1.0)),)) -> Mdp:
    return Mdp(2, ("a",), np.array(rewards), np.array(transitions))


def test_arrays_are_read_only():
    mdp = two_state()
    with pytest.raises(ValueError):
        mdp.rewards[0, 0] = 0.5
    assert mdp.n_actions == 1
    assert mdp.label(1) == "1"


def test_shape_mismatch_raises():
    with pytest.raises(DimensionError):
        Mdp(3, ("a",), np.zeros((1, 2)), np.zeros((1, 2, 2)))
    with pytest.raises(DimensionError):
        Mdp(2, ("a", "b"), np.zeros((2, 2)), np.zeros((1, 2, 2)))
    with pytest.raises(DimensionError):
        Mdp(2, ("a",), np.zeros((1, 2)), np.eye(2)[None], state_labels=("x",))


def test_generated_models_are_valid():
    assert validate(gen_grid(5, 5)) == []
    assert validate(gen_figure1(0.3, 0.7, 0.5)) == []


def test_validate_reports_each_invariant():
    bad = Mdp(2, ("a",), np.array([[1.5, np.nan]]), np.array([[[0.7, 0.2], [-0.1, 1.1]]]))
    problems = validate(bad)
    prefixes = {p.split(":")[0] for p in problems}
    assert {"reward-range", "non-finite", "negative-probability", "row-sum"} <= prefixes


def test_normalize_rewards():
    mdp = Mdp(2, ("a", "b"), np.array([[2.0, 4.0], [3.0, 4.0]]), np.tile(np.eye(2), (2, 1, 1)))
    assert np.allclose(normalize_rewards(mdp).rewards, [[0.0, 1.0], [0.5, 1.0]])

    flat = Mdp(2, ("a",), np.array([[7.0, 7.0]]), np.eye(2)[None])
    assert np.array_equal(normalize_rewards(flat).rewards, np.zeros((1, 2)))

    with pytest.raises(PreconditionError):
        normalize_rewards(Mdp(2, ("a",), np.array([[np.inf, 0.0]]), np.eye(2)[None]))


def test_document_read_back_is_exact(tmp_path):
    mdp = gen_figure1(0.1, 1.0 / 3.0, 0.7)
    path = write_mdp(mdp, tmp_path / "fig.json")
    assert read_mdp(path) == mdp


def test_document_errors(tmp_path):
    doc = to_document(gen_figure1(0.3, 0.3, 0.5))

    missing = dict(doc)
    del missing["rewards"]
    with pytest.raises(MdpFormatError):
        from_document(missing)

    with pytest.raises(MdpFormatError):
        from_document({**doc, "version": 2})

    with pytest.raises(DimensionError):
        from_document({**doc, "rewards": [[0.0, 0.0], [1.0]]})

    broken = json.loads(json.dumps(doc))
    broken["transitions"][0][0] = [0.5, 0.0, 0.0, 0.0]
    with pytest.raises(MdpValidationError) as info:
        from_document(broken)
    assert any(v.startswith("row-sum") for v in info.value.violations)
    assert from_document(broken, check=False).n_states == 4

    garbage = tmp_path / "garbage.json"
    garbage.write_text("{not json", encoding="utf-8")
    with pytest.raises(MdpFormatError):
        read_mdp(garbage)


def test_metric_params():
    params = MetricParams.default(0.9, delta=0.01)
    assert params.c_R == pytest.approx(0.1)
    assert params.c_T == 0.9
    assert params.bounds_apply
    assert params.warnings() == []

    loose = MetricParams(gamma=0.9, c_R=0.5, c_T=0.5)
    assert not loose.bounds_apply
    assert loose.warnings()

    with pytest.raises(PreconditionError):
        MetricParams(gamma=0.5, c_R=0.6, c_T=0.6)
    with pytest.raises(PreconditionError):
        MetricParams(gamma=1.0, c_R=0.0, c_T=1.0)
    with pytest.raises(PreconditionError):
        MetricParams(gamma=0.5, c_R=0.5, c_T=0.5, delta=0.0)


def test_distribution_and_value_checks():
    assert np.array_equal(as_distribution([0.25, 0.75]), [0.25, 0.75])
    with pytest.raises(PreconditionError):
        as_distribution([0.5, 0.4])
    with pytest.raises(DimensionError):
        as_distribution([1.0], n=2)
    assert value_function_violations([0.0, 10.0], 2, 0.9) == []
    assert len(value_function_violations([-1.0, 11.0], 2, 0.9)) == 2
