import json

import pytest

from lacelab import cli


def _run(tmp_path, name, *argv):
    out = tmp_path / name
    code = cli.main([*argv, "--out", str(out)])
    return code, out


def _record(out):
    return json.loads((out / "record.json").read_text())


def test_simulate_q1(tmp_path):
    code, out = _run(tmp_path, "a", "simulate", "--graph", "qn", "--n", "1", "--replicas", "3",
                     "--p", "0.5")
    assert code == 0
    lines = (out / "micro.csv").read_text().splitlines()
    assert len(lines) == 3
    rec = _record(out)
    chi = [v for v in rec["payload"]["values"] if v["quantity"] == "chi"][0]
    assert chi["value"] == 1.5 and chi["stderr"] == 0.0
    man = json.loads((out / "manifest.json").read_text())
    assert man["command"] == "simulate" and "timestamp" in man


def test_records_are_deterministic_across_runs_and_workers(tmp_path):
    args = ["simulate", "--graph", "torus", "--n", "2", "--L", "4", "--replicas", "130",
            "--seed", "9", "--p-grid", "0.2,0.5"]
    _, a = _run(tmp_path, "a", *args, "--workers", "1")
    _, b = _run(tmp_path, "b", *args, "--workers", "1")
    _, c = _run(tmp_path, "c", *args, "--workers", "2")
    ra = (a / "record.json").read_bytes()
    assert ra == (b / "record.json").read_bytes() == (c / "record.json").read_bytes()
    assert (a / "micro.csv").read_bytes() == (c / "micro.csv").read_bytes()


def test_enumerate_and_verify_against_simulation(tmp_path):
    _, ex = _run(tmp_path, "ex", "enumerate", "--graph", "qn", "--n", "2", "--event", "chi",
                 "--p-grid", "0.3,0.6")
    rec = _record(ex)
    assert rec["payload"]["values"][0]["exact"] == "18097/10000"
    _, mc = _run(tmp_path, "mc", "simulate", "--graph", "qn", "--n", "2", "--replicas", "3000",
                 "--seed", "4", "--p-grid", "0.3,0.6")
    code, report = cli.verify(mc / "record.json", ex / "record.json")
    assert code == 0 and report["status"] == "pass"
    assert {c["quantity"] for c in report["checks"]} == {"chi"}
    assert cli.main(["verify", str(mc / "record.json"), str(ex / "record.json")]) == 0


def test_verify_identical_records(tmp_path):
    _, a = _run(tmp_path, "a", "enumerate", "--graph", "qn", "--n", "2", "--event", "pi0",
                "--p", "0.5")
    code, report = cli.verify(a / "record.json", a / "record.json")
    assert code == 0 and report["status"] == "all-exact-match"
    assert _record(a)["payload"]["polynomials"]["pi0"][4] == {"numerator": "3",
                                                               "denominator": "1"}


def test_verify_detects_disagreement(tmp_path):
    _, a = _run(tmp_path, "a", "enumerate", "--graph", "qn", "--n", "2", "--event", "chi",
                "--p", "0.5")
    _, b = _run(tmp_path, "b", "enumerate", "--graph", "qn", "--n", "3", "--event", "chi",
                "--p", "0.5")
    code, report = cli.verify(a / "record.json", b / "record.json")
    assert code == 1 and report["status"] == "fail"


def test_module_error_is_json(tmp_path, capsys):
    code, _ = _run(tmp_path, "a", "simulate", "--graph", "torus", "--n", "2", "--L", "2",
                   "--replicas", "2")
    assert code == 3
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["error"] == "module" and "side length" in err["message"]


def test_schema_error(tmp_path, capsys):
    code, _ = _run(tmp_path, "a", "simulate", "--replicas", "2")
    assert code == 2
    assert json.loads(capsys.readouterr().err)["error"] == "schema"


def test_manifest_and_env_precedence(tmp_path, monkeypatch):
    m = tmp_path / "m.json"
    m.write_text(json.dumps({"graph": "qn", "n": 2, "replicas": 7, "seed": 5}))
    monkeypatch.setenv("LACELAB_WORKERS", "2")
    _, out = _run(tmp_path, "a", "simulate", "--manifest", str(m), "--seed", "8")
    man = json.loads((out / "manifest.json").read_text())
    assert (man["replicas"], man["seed"], man["workers"]) == (7, 8, 2)
    _, out = _run(tmp_path, "b", "simulate", "--manifest", str(m), "--workers", "1")
    assert json.loads((out / "manifest.json").read_text())["workers"] == 1


def test_spherical(tmp_path):
    _, out = _run(tmp_path, "s", "spherical", "--n", "3")
    val = _record(out)["payload"]["values"][0]["value"]
    assert val == pytest.approx(3.956776022694, rel=1e-11)
    assert (out / "spherical_trace.csv").exists()


def test_window_rejects_negative_p(tmp_path):
    _, out = _run(tmp_path, "w", "window", "--graph", "qn", "--n", "5", "--replicas", "20",
                  "--order", "1")
    rows = _record(out)["payload"]["rows"]
    # p = 1/5 + delta/5 for deltas -4, -2, 2, 4; only 0 < p < 1 is kept
    assert [r["status"] == "ok" for r in rows] == [False, False, True, False]


def test_fixed_point_writes_trace(tmp_path):
    _, out = _run(tmp_path, "f", "fixed-point", "--graph", "qn", "--n", "6", "--replicas", "50",
                  "--mode", "finite-target", "--target", "1.5", "--max-iter", "5", "--tol", "1e-3")
    rec = _record(out)["payload"]
    assert "defect" in rec and rec["result"]["iterations"] >= 1
    assert (out / "fixed_point_trace.csv").read_text().startswith("iteration,p,pi_hat")


def test_estimate_pc_and_diagrams(tmp_path):
    _, out = _run(tmp_path, "e", "estimate-pc", "--graph", "qn", "--n", "5", "--replicas",
                  "100", "--order", "3")
    pay = _record(out)["payload"]
    assert [t["M"] for t in pay["truncations"]] == [1, 2, 3]
    assert pay["truncations"][2]["p_trunc_exact"] == "67/250"
    _, out = _run(tmp_path, "d", "diagrams", "--graph", "qn", "--n", "4", "--p", "0.125")
    assert _record(out)["payload"]["kind"] == "exact"
    assert (out / "diagrams.csv").exists()
