import json

import numpy as np
import pytest

from conftest import line
from wass import measures
from wass.measures import DiscreteMeasure, EvaluationError, ValidationError


def test_weights_must_sum_to_one():
    with pytest.raises(ValidationError, match="sum to 1"):
        line([0, 1], [0.5, 0.6])


def test_negative_weight_rejected():
    with pytest.raises(ValidationError, match="nonnegative"):
        line([0, 1], [1.5, -0.5])


def test_duplicate_atoms_rejected():
    with pytest.raises(ValidationError, match="distinct"):
        line([0, 1e-12], [0.5, 0.5])


def test_from_points_merges_coincident_atoms():
    mu = DiscreteMeasure.from_points([[0.0], [1.0], [0.0]], [0.2, 0.5, 0.3])
    assert len(mu) == 2
    assert mu.weights.tolist() == [0.5, 0.5]


def test_support_drops_zero_weight():
    assert [a.tolist() for a in measures.support(line([0], [1.0]))] == [[0.0]]
    assert [a.tolist() for a in measures.support(line([0, 1], [0.0, 1.0]))] == [[1.0]]
    assert len(measures.support(line([0, 1], [0.5, 0.5]))) == 2


def test_pushforward_identity_constant_and_scaling():
    mu = line([0, 1], [0.5, 0.5])
    assert measures.same_measure(measures.pushforward(measures.identity(1), mu), mu)
    collapsed = measures.pushforward(measures.constant([3.0], 1), mu)
    assert measures.same_measure(collapsed, DiscreteMeasure.dirac([3.0]))
    doubled = measures.pushforward(measures.scaling(2.0, 1), line([1, 2], [0.3, 0.7]))
    assert measures.same_measure(doubled, line([2, 4], [0.3, 0.7]))


def test_pushforward_reports_nonfinite_atom_index():
    f = measures.PointMap(lambda x: np.where(x > 0.5, np.inf, x), lambda x: np.ones((len(x), 1, 1)), 1, 1, "blowup")
    with pytest.raises(EvaluationError, match="atom index 1"):
        measures.pushforward(f, line([0, 1], [0.5, 0.5]))


def test_json_round_trip():
    mu = line([0, 2], [0.25, 0.75])
    back = measures.measure_from_json(json.loads(measures.dumps(mu.to_json())))
    assert measures.same_measure(mu, back, atol=0)


def test_json_errors_name_the_field(tmp_path):
    with pytest.raises(ValidationError, match="'weights'"):
        measures.measure_from_json({"d": 1, "atoms": [[0]]})
    bad = tmp_path / "bad.json"
    bad.write_text('{"d": 1,\n "atoms": [[0]], "weights": [1.0')
    with pytest.raises(ValidationError, match="line 2"):
        measures.load_json(bad)


def test_quantize_env_override(monkeypatch):
    monkeypatch.setenv("WASS_QUANTIZE", "1e-3")
    with pytest.raises(ValidationError, match="distinct"):
        line([0, 1e-5], [0.5, 0.5])
    monkeypatch.setenv("WASS_QUANTIZE", "-1")
    with pytest.raises(ValidationError, match="WASS_QUANTIZE"):
        measures.quantum()


def test_composition_and_inverse():
    f = measures.affine([[2.0, 1.0], [0.0, 1.0]], [1.0, -1.0])
    g = measures.rotation(0.3)
    x = np.array([[0.2, -0.7], [1.0, 2.0]])
    np.testing.assert_allclose(f.then(g)(x), g(f(x)))
    np.testing.assert_allclose(f.inverse(f(x)), x, atol=1e-14)
    assert g.isometry and not f.isometry
