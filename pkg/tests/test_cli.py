import json

import jsonschema
import pytest

from evarkit import cli

ETEST_CFG = {
    "schema": "evarkit/1",
    "grid": {"start": 0, "stop": 1, "step": 0.1},
    "constraints": [{"kind": "bounded_mean", "params": {"m": 0.5}}],
    "candidate": {"pi": [2.0]},
}
VERIFY_CFG = {
    "grid": [-2, -1, 0, 1, 2],
    "constraints": [{"kind": "mean_var", "params": {"sigma": 1.0}}],
    "candidate": {"constant": 1.0},
}


@pytest.fixture
def call(capsys):
    def _call(*argv):
        code = cli.main([str(a) for a in argv])
        out, err = capsys.readouterr()
        return code, (json.loads(out) if out.strip() else None), out, err
    return _call


@pytest.fixture
def validator():
    return jsonschema.Draft202012Validator(cli.load_schema())


def _write(tmp_path, name, obj):
    p = tmp_path / name
    p.write_text(obj if isinstance(obj, str) else json.dumps(obj), encoding="utf-8")
    return p


class TestETest:
    def test_example_rejects(self, call, tmp_path):
        cfg = _write(tmp_path, "c.json", ETEST_CFG)
        data = _write(tmp_path, "d.csv", "0.9\n0.9\n")
        code, rep, _, _ = call("etest", "--config", cfg, "--data", data, "--alpha", 0.4)
        assert code == 0
        r = rep["result"]
        assert r["combined"] == pytest.approx(3.24, abs=1e-12)
        assert r["threshold"] == pytest.approx(2.5)
        assert r["reject"] is True
        assert r["evaluation"] == "closed_form"
        assert r["combination"]["label"] == "extension"

    def test_header_and_crlf(self, call, tmp_path):
        cfg = _write(tmp_path, "c.json", ETEST_CFG)
        data = tmp_path / "d.csv"
        data.write_bytes(b"x\r\n0.9\r\n0.9\r\n")
        code, rep, _, _ = call("etest", "--config", cfg, "--data", data, "--alpha", 0.4)
        assert code == 0 and rep["result"]["e_values"] == pytest.approx([1.8, 1.8])

    def test_bad_csv_line_number(self, call, tmp_path):
        cfg = _write(tmp_path, "c.json", ETEST_CFG)
        data = _write(tmp_path, "d.csv", "0.1\n0.2\nabc\n")
        code, rep, _, err = call("etest", "--config", cfg, "--data", data)
        assert code == 1 and rep is None
        assert "line 3" in err

    def test_ragged_csv(self, call, tmp_path):
        cfg = _write(tmp_path, "c.json", ETEST_CFG)
        data = _write(tmp_path, "d.csv", "0.1\n0.2,0.3\n")
        code, _, _, err = call("etest", "--config", cfg, "--data", data)
        assert code == 1 and "line 2" in err

    def test_nearest_grid_warning(self, call, tmp_path):
        cfg = dict(ETEST_CFG, grid=[0.0, 0.5, 1.0], candidate={"values": [0.0, 1.0, 2.0]})
        c = _write(tmp_path, "c.json", cfg)
        # 1.8 sits 0.8 past the last point; 0.4 is within half a step
        data = _write(tmp_path, "d.csv", "0.4\n1.8\n")
        code, rep, _, _ = call("etest", "--config", c, "--data", data)
        assert code == 0
        assert rep["result"]["evaluation"] == "nearest_grid"
        assert rep["result"]["e_values"] == [1.0, 2.0]
        assert len(rep["warnings"]) == 1 and "observation 1" in rep["warnings"][0]

    def test_missing_data_file(self, call, tmp_path):
        cfg = _write(tmp_path, "c.json", ETEST_CFG)
        code, _, _, err = call("etest", "--config", cfg, "--data", tmp_path / "nope.csv")
        assert code == 1 and "no such file" in err


class TestVerify:
    def test_one_is_evar(self, call):
        code, rep, _, _ = call("verify", "--config", json.dumps(VERIFY_CFG))
        assert code == 0
        assert rep["result"]["verdict"] == "e-variable"
        assert rep["exit_code"] == 0

    def test_violation_exit_two(self, call):
        cfg = dict(VERIFY_CFG, candidate={"constant": 1.1})
        code, rep, _, _ = call("verify", "--config", json.dumps(cfg))
        assert code == 2 and rep["result"]["verdict"] == "violated"

    def test_bad_json_reports_position(self, call, tmp_path):
        p = _write(tmp_path, "c.json", '{\n  "grid": [1, 2,\n}')
        code, _, _, err = call("verify", "--config", p)
        assert code == 1 and "line 3" in err

    def test_unknown_key(self, call):
        code, _, _, err = call("verify", "--config", json.dumps(dict(VERIFY_CFG, colour=1)))
        assert code == 1 and "colour" in err

    def test_wrong_schema_version(self, call):
        code, _, _, err = call("verify", "--config", json.dumps(dict(VERIFY_CFG, schema="evarkit/0")))
        assert code == 1 and "schema" in err

    def test_output_file(self, call, tmp_path):
        out = tmp_path / "r.json"
        code, rep, _, _ = call("verify", "--config", json.dumps(VERIFY_CFG), "-o", out)
        assert code == 0 and rep is None
        assert json.loads(out.read_text())["result"]["verdict"] == "e-variable"


class TestMaximal:
    def test_defaults_agree(self, call):
        code, rep, _, _ = call("maximal")
        r = rep["result"]
        assert code == 0
        assert r["ellipse_maximal"] is True
        assert r["adversary_verdict"] == "maximal"
        assert r["agree"] is True

    def test_interior_is_maximal(self, call):
        code, rep, _, _ = call("maximal", "--alpha", 0.2, "--beta", 0.6)
        r = rep["result"]
        assert code == 0 and r["ellipse_maximal"] is True
        assert r["adversary_verdict"] == "maximal" and r["agree"] is True

    def test_dominated_constant(self, call):
        cfg = {"candidate": {"constant": 0.5}}
        code, rep, _, _ = call("maximal", "--config", json.dumps(cfg))
        assert code == 0 and rep["result"]["adversary_verdict"] == "dominated"

    def test_outside_ellipse_exit_two(self, call):
        code, rep, _, _ = call("maximal", "--alpha", 1.5, "--beta", 0.5)
        assert code == 2 and rep["result"]["evar_verdict"] == "violated"

    def test_bad_sigma(self, call):
        code, _, _, _ = call("maximal", "--sigma", 0)
        assert code == 1


def _all_reports(call, tmp_path):
    cfg = _write(tmp_path, "c.json", ETEST_CFG)
    data = _write(tmp_path, "d.csv", "0.9\n0.9\n")
    runs = [
        ("verify", "--config", json.dumps(VERIFY_CFG)),
        ("maximal",),
        ("subpsi",),
        ("subpsi", "--psi", "gamma", "--shape", 2, "--scale", 0.5, "--mix",
         '{"nodes": [0.5, 1.0], "weights": [0.5, 0.5]}'),
        ("symmetry", "--group", "s3", "--grid", "[0, 1, 2]", "--f", "0"),
        ("symmetry", "--group", "signs:2", "--grid", "[-1, 0, 1]", "--f", "1"),
        ("reduce", "--measure", '{"grid": [1,2,3,4,5,6,7,8,9,10], "weights": [0.1,0.1,0.1,0.1,0.1,0.1,0.1,0.1,0.1,0.1]}',
         "--moments", '[[1,2,3,4,5,6,7,8,9,10]]'),
        ("relaxed-demo", "--n", 20),
        ("etest", "--config", cfg, "--data", data, "--alpha", 0.4),
    ]
    return [(argv, call(*argv)) for argv in runs]


def test_every_report_validates(call, tmp_path, validator):
    for argv, (code, rep, _, _) in _all_reports(call, tmp_path):
        assert code == 0, argv
        validator.validate(rep)
        assert rep["schema"] == "evarkit/1"
        assert len(rep["config_hash"]) == 16


def test_failure_report_validates(call, validator):
    code, rep, _, _ = call("verify", "--config", json.dumps(dict(VERIFY_CFG, candidate={"constant": 3})))
    assert code == 2
    validator.validate(rep)


def test_byte_identical(call, tmp_path):
    first = [out for _, (_, _, out, _) in _all_reports(call, tmp_path)]
    second = [out for _, (_, _, out, _) in _all_reports(call, tmp_path)]
    assert first == second


def test_config_hash_tracks_content(call):
    _, a, _, _ = call("verify", "--config", json.dumps(VERIFY_CFG))
    _, b, _, _ = call("verify", "--config", json.dumps(dict(VERIFY_CFG, tol=1e-7)))
    assert a["config_hash"] != b["config_hash"]
    assert a["grid_hash"] == b["grid_hash"]


def test_reduce_result(call):
    _, rep, _, _ = call("reduce", "--measure", '{"grid": [1,2,3,4,5,6,7,8,9,10], "weights": [0.1,0.1,0.1,0.1,0.1,0.1,0.1,0.1,0.1,0.1]}',
                        "--moments", '[{"kind": "affine", "params": {"slope": 1}}]')
    r = rep["result"]
    assert len(r["support"]) <= 2 and r["residual"] <= 1e-10


def test_relaxed_demo(call):
    _, rep, _, _ = call("relaxed-demo", "--n", 40)
    r = rep["result"]
    assert r["f0_partial_sums"][-1] == -40
    assert r["phi_relaxed"] is True and r["phi0_strict"] is False


class TestDumps:
    def test_float_format(self):
        assert cli.dumps(0.1) == "0.10000000000000001"
        assert cli.dumps(-0.0) == "0"
        assert cli.dumps({"b": 1, "a": [float("inf"), float("nan")]}) == '{"a":["inf","nan"],"b":1}'

    def test_round_trip(self):
        x = [0.1, 1 / 3, 2.0**-40, 1e300]
        assert json.loads(cli.dumps(x)) == x
