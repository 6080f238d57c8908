import json

import numpy as np
import pytest

from wass.cli import main


def write(path, obj):
    path.write_text(json.dumps(obj))
    return str(path)


@pytest.fixture
def files(tmp_path):
    mu = write(tmp_path / "mu.json", {"d": 2, "atoms": [[0, 0], [0.3, 0]], "weights": [0.5, 0.5]})
    nu = write(tmp_path / "nu.json", {"d": 2, "atoms": [[0.2, 0.1], [0.4, 0.2], [0.1, 0.3]],
                                      "weights": [0.25, 0.25, 0.5]})
    field = write(tmp_path / "v.json", {"vectors": [[1, 0], [0, 1]]})
    return tmp_path, mu, nu, field


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_distance_to_self_is_zero(files, capsys):
    _, mu, _, _ = files
    code, out, _ = run(capsys, "distance", "--mu", mu, "--nu", mu)
    assert code == 0 and json.loads(out) == {"wp": 0.0, "cost": 0.0}


def test_plan_writes_matrix(files, capsys):
    tmp, mu, nu, _ = files
    code, out, _ = run(capsys, "plan", "--mu", mu, "--nu", nu, "--out", str(tmp / "plan.json"))
    assert code == 0
    m = np.array(json.loads((tmp / "plan.json").read_text())["matrix"])
    np.testing.assert_allclose(m.sum(axis=1), [0.5, 0.5])
    assert json.loads(out)["wp"] > 0


def test_geodesic_then_continuity(files, capsys):
    tmp, mu, nu, _ = files
    c, v = str(tmp / "c.json"), str(tmp / "v.json")
    assert run(capsys, "geodesic", "--mu", mu, "--nu", nu, "--steps", "11", "--out-curve", c, "--out-velocity", v)[0] == 0
    code, out, _ = run(capsys, "verify-continuity", "--curve", c, "--velocity", v, "--tol", "1e-2")
    result = json.loads(out)
    assert code == 0 and result["pass"], result


def test_counterexample_table_and_guard(capsys):
    code, out, _ = run(capsys, "counterexample", "--eps", "0.5", "--K", "3", "--grid", "16")
    lines = out.strip().splitlines()
    assert code == 0 and lines[0] == "K,residual" and len(lines) == 4
    code, _, err = run(capsys, "counterexample", "--eps", "0", "--K", "4", "--grid", "32")
    assert code == 2 and "nu must be nonconstant" in err


def test_invalid_weights_exit_2(tmp_path, capsys):
    bad = write(tmp_path / "bad.json", {"d": 1, "atoms": [[0], [1]], "weights": [0.5, 0.6]})
    code, _, err = run(capsys, "distance", "--mu", bad, "--nu", bad)
    assert code == 2 and "sum to 1" in err


def test_malformed_json_names_position(tmp_path, capsys):
    bad = tmp_path / "broken.json"
    bad.write_text('{"d": 1,\n"atoms": [[0]] "weights": [1]}')
    code, _, err = run(capsys, "distance", "--mu", str(bad), "--nu", str(bad))
    assert code == 2 and "line 2" in err


def test_project_and_pushdiff(files, capsys):
    tmp, mu, _, field = files
    code, out, _ = run(capsys, "project", "--mu", mu, "--field", field, "--dict", "poly:1")
    assert code == 0 and "residual" in json.loads(out)
    code, out, _ = run(capsys, "project", "--mu", mu, "--field", field, "--dict", "trig:2", "--metric", "conformal")
    assert code == 0
    a = write(tmp / "a.json", {"A": [[2, 0], [0, 2]], "b": [1, 1]})
    code, out, _ = run(capsys, "pushdiff", "--map", f"affine:{a}", "--mu", mu, "--field", field, "--dict", "poly:2")
    result = json.loads(out)
    assert code == 0 and result["operator_norm_bound"] == pytest.approx(2.0)
    assert run(capsys, "pushdiff", "--map", "warp", "--mu", mu, "--field", field)[0] == 2


def test_mix_convention_swap(files, capsys):
    tmp, mu, nu, field = files
    w = write(tmp / "w.json", {"vectors": [[0, 0], [1, 1], [2, 2]]})
    _, a, _ = run(capsys, "mix", "--mu", mu, "--nu", nu, "--lambda", "0.25", "--fields", field, w)
    _, b, _ = run(capsys, "mix", "--mu", mu, "--nu", nu, "--lambda", "0.75", "--convention", "lam-nu")
    assert json.loads(a)["mixed"] == json.loads(b)["mixed"]
    assert "canonical_field" in json.loads(a)


def test_check_is_deterministic(tmp_path, capsys):
    paths = [tmp_path / f"r{i}.csv" for i in range(2)]
    for p in paths:
        assert run(capsys, "check", "ot-oracle", "projection", "--seed", "7", "--csv", str(p))[0] == 0
    assert paths[0].read_bytes() == paths[1].read_bytes()
    assert paths[0].read_text().splitlines()[0] == "suite,passed,metrics"


def test_unknown_suite(capsys):
    assert run(capsys, "check", "nope")[0] == 2
