import json
import subprocess
import sys

import numpy as np
import pytest

from edmlngm.cli import main


def run(*args):
    return main([str(a) for a in args])


@pytest.fixture(scope="module")
def line_files(tmp_path_factory):
    d = tmp_path_factory.mktemp("line")
    assert run("gen", "--n", 50, "--d", 1, "--seed", 0, "-o", d / "inst.json") == 0
    assert run("minimize", d / "inst.json", "--starts", 20, "--seed", 0, "-o", d / "rep.json") == 0
    return d


def test_gen_small_instance(tmp_path):
    assert run("gen", "--n", 2, "--d", 1, "--seed", 0, "-o", tmp_path / "a.json") == 0
    data = json.loads((tmp_path / "a.json").read_text())
    D = np.array(data["D"])
    assert D.shape == (2, 2) and np.array_equal(D, D.T) and np.all(np.diag(D) == 0)


def test_gen_is_byte_identical(tmp_path):
    run("gen", "--n", 50, "--d", 1, "--seed", 3, "-o", tmp_path / "a.json")
    run("gen", "--n", 50, "--d", 1, "--seed", 3, "-o", tmp_path / "b.json")
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()


def test_minimize_reports_candidate(line_files, capsys):
    rep = json.loads((line_files / "rep.json").read_text())
    assert rep["summary"]["LNGM_CANDIDATE"] >= 1
    assert sum(rep["summary"].values()) == len(rep["reports"])


def test_minimize_is_deterministic(line_files, tmp_path):
    run("minimize", line_files / "inst.json", "--starts", 20, "--seed", 0, "-o", tmp_path / "again.json")
    assert (tmp_path / "again.json").read_bytes() == (line_files / "rep.json").read_bytes()


def test_minimize_small_all_global(tmp_path):
    run("gen", "--n", 4, "--d", 3, "--seed", 1, "-o", tmp_path / "i.json")
    assert run("minimize", tmp_path / "i.json", "--starts", 200, "--no-dedup", "-o", tmp_path / "r.json") == 0
    rep = json.loads((tmp_path / "r.json").read_text())
    assert rep["summary"]["GLOBAL"] == 200


def test_minimize_from_collapsed_start(tmp_path):
    run("gen", "--n", 2, "--d", 1, "--seed", 0, "-o", tmp_path / "i.json")
    (tmp_path / "s.json").write_text(json.dumps({"formulation": "P", "data": [[0.0], [0.0]]}))
    assert run("minimize", tmp_path / "i.json", "--start", tmp_path / "s.json", "-o", tmp_path / "r.json") == 0
    rep = json.loads((tmp_path / "r.json").read_text())
    assert rep["reports"][0]["classification"] == "GLOBAL"


def test_certify_and_verify(line_files, tmp_path):
    cert = tmp_path / "cert.json"
    assert run("certify", line_files / "inst.json", "--point", line_files / "rep.json", "-o", cert) == 0
    assert json.loads(cert.read_text())["verdict"] == "CERTIFIED"
    assert run("certify", line_files / "inst.json", "--verify", cert) == 0


def test_certify_generator_point_fails(line_files, tmp_path):
    inst = json.loads((line_files / "inst.json").read_text())
    pt = tmp_path / "gen.json"
    pt.write_text(json.dumps({"formulation": "P", "data": inst["P_bar"]}))
    assert run("certify", line_files / "inst.json", "--point", pt, "-o", tmp_path / "c.json") == 1
    assert json.loads((tmp_path / "c.json").read_text())["verdict"] == "FAILED"


def test_certify_auto_radius(line_files, tmp_path):
    assert run("certify", line_files / "inst.json", "--point", line_files / "rep.json",
               "--r", "auto", "-q", "-o", tmp_path / "c.json") == 0


def test_verify_against_other_instance_fails(line_files, tmp_path):
    cert = tmp_path / "cert.json"
    run("certify", line_files / "inst.json", "--point", line_files / "rep.json", "-o", cert)
    run("gen", "--n", 50, "--d", 1, "--seed", 1, "-o", tmp_path / "other.json")
    assert run("certify", tmp_path / "other.json", "--verify", cert) == 1


def test_newton_eval_reduce(line_files, tmp_path):
    assert run("newton", line_files / "inst.json", "--point", line_files / "rep.json",
               "--to-certifiable", "--steps", 4, "-o", tmp_path / "n.json") == 0
    out = json.loads((tmp_path / "n.json").read_text())
    assert out["classification"] == "LNGM_CANDIDATE" and out["grad_norm"] < 1e-8
    assert run("eval", line_files / "inst.json", "--point", tmp_path / "n.json",
               "--spectrum-csv", tmp_path / "s.csv", "-o", tmp_path / "e.json") == 0
    assert len((tmp_path / "s.csv").read_text().splitlines()) == 50
    inst = json.loads((line_files / "inst.json").read_text())
    (tmp_path / "p.json").write_text(json.dumps({"formulation": "P", "data": inst["P_bar"]}))
    assert run("reduce", "--point", tmp_path / "p.json", "-o", tmp_path / "r.json") == 0
    assert json.loads((tmp_path / "r.json").read_text())["formulation"] == "ell"


def test_trace_csv(tmp_path):
    run("gen", "--n", 5, "--d", 2, "-o", tmp_path / "i.json")
    assert run("minimize", tmp_path / "i.json", "--starts", 2, "--trace",
               "--trace-csv", tmp_path / "tr", "-o", tmp_path / "r.json") == 0
    assert "trace" in json.loads((tmp_path / "r.json").read_text())["reports"][0]
    assert (tmp_path / "tr_0.csv").read_text().startswith("iteration,f,grad_norm,radius")


def test_exit_codes_for_bad_input(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"n": 2, "d": 1, "D": [[0, 1], [2, 0]]}')
    assert run("minimize", bad) == 2
    nan = tmp_path / "nan.json"
    nan.write_text('{"n": 2, "d": 1, "D": [[0, NaN], [NaN, 0]]}')
    assert run("minimize", nan) == 2
    assert run("minimize", tmp_path / "missing.json") == 2
    with pytest.raises(SystemExit) as exc:
        run("check", "bogus")
    assert exc.value.code == 2


def test_formulation_mismatch_is_reported(tmp_path, capsys):
    run("gen", "--n", 5, "--d", 2, "-o", tmp_path / "i.json")
    (tmp_path / "p.json").write_text(json.dumps({"formulation": "ell", "data": [1.0, 2.0]}))
    assert run("certify", tmp_path / "i.json", "--point", tmp_path / "p.json") == 2
    assert "expected (7,) for ell" in capsys.readouterr().err


def test_numerical_error_exit_code(tmp_path):
    run("gen", "--n", 5, "--d", 2, "-o", tmp_path / "i.json")
    P = np.random.default_rng(1).standard_normal((5, 2))
    (tmp_path / "p.json").write_text(json.dumps({"formulation": "P", "data": P.tolist()}))
    assert run("newton", tmp_path / "i.json", "--point", tmp_path / "p.json") == 3


def test_check_suite_runs():
    assert run("check", "structure") == 0


def test_console_script_entry_point():
    out = subprocess.run([sys.executable, "-m", "edmlngm.cli", "--version"],
                         capture_output=True, text=True)
    assert out.returncode == 0 and "0.1.0" in out.stdout
