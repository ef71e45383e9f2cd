"""CLI contract: exit codes, report shapes, deterministic bytes."""

import json
import math

from eprsim import acceptance
from eprsim.acceptance import AcceptanceResult
from eprsim.cli import main


def run_json(capsys, argv):
    code = main(argv)
    out = capsys.readouterr().out
    return code, (json.loads(out) if out.lstrip().startswith("{") else out)


def test_expectation_orthogonal(capsys):
    code, report = run_json(capsys, ["expectation", "--knots", "4",
                                     "--a", "1,0,0", "--b", "0,1,0"])
    assert code == 0
    assert report["pass"] is True
    assert report["payload"]["expectation"] == 0.0
    assert report["payload"]["M1"] == 0.0


def test_mass_and_defect(capsys):
    code, report = run_json(capsys, ["mass", "--knots", "8",
                                     "--a", "0.6,0.8,0", "--b", "0.8,0.6,0"])
    assert code == 0
    assert 1.0 <= report["payload"]["total"] <= 1.0 + 3.0 / (8 * 64) + 1e-12
    code, report = run_json(capsys, ["defect", "--knots", "8", "--a", "0.6,0.8,0"])
    assert code == 0
    assert report["payload"]["defect"] < report["payload"]["epsilon"]


def test_lemma_pass(capsys):
    code, report = run_json(capsys, ["lemma", "--knots", "8",
                                     "--resolution", "200"])
    assert code == 0
    assert report["payload"]["truncated"]["pass"]
    assert report["payload"]["exact_identity"]["pass"]


def test_bell_and_chsh_quantum(capsys):
    code, report = run_json(capsys, ["bell"])
    assert code == 0
    assert report["payload"]["violated"] is True
    assert report["payload"]["slack"] == -0.5
    code, report = run_json(capsys, ["chsh"])
    assert code == 0
    assert abs(report["payload"]["abs_S"] - 2 * math.sqrt(2)) < 1e-12


def test_bell_non_violating_angles(capsys):
    # collinear settings obey the bound, so the command reports failure
    code, report = run_json(capsys, ["bell", "--angles", "0,0,0"])
    assert code == 1
    assert report["payload"]["violated"] is False


def test_simulate_inline_and_csv(capsys):
    code, report = run_json(capsys, ["simulate", "--knots", "4",
                                     "--a", "1,0,0", "--b", "0,1,0",
                                     "--trials", "20000", "--seed", "3"])
    assert code == 0
    est = report["payload"]["estimates"][0]
    assert est["n"] == 20000
    code = main(["simulate", "--knots", "4", "--a", "1,0,0", "--b", "0,1,0",
                 "--trials", "20000", "--seed", "3", "--format", "csv"])
    out = capsys.readouterr().out
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0] == "ax,ay,az,bx,by,bz,n,mean,stderr,exact,quantum,abs_err"
    assert len(lines) == 2


def test_simulate_config_file(tmp_path, capsys):
    config = {
        "knots": 4, "seed": 1, "trials": 10_000, "workers": 2,
        "pairs": [{"a": [1, 0, 0], "b": [0, 1, 0]},
                  {"a": [1, 0, 0], "b": [1, 0, 0]}],
    }
    path = tmp_path / "config.json"
    path.write_text(json.dumps(config))
    code, report = run_json(capsys, ["simulate", "--config", str(path)])
    assert code == 0
    assert len(report["payload"]["estimates"]) == 2
    assert report["payload"]["estimates"][1]["mean"] == -1.0


def test_simulate_bad_config(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"knots": 4, "seed": 1, "trials": 10}))
    assert main(["simulate", "--config", str(path)]) == 2
    path.write_text("{not json")
    assert main(["simulate", "--config", str(path)]) == 2
    assert main(["simulate", "--knots", "4", "--a", "1,0,0"]) == 2
    capsys.readouterr()


def test_curve_csv_rows(capsys):
    code = main(["curve", "--knots", "4", "--steps", "3", "--trials", "5000",
                 "--format", "csv"])
    out = capsys.readouterr().out
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0] == "angle_deg,quantum,exact,mc_mean,mc_stderr,n"
    assert len(lines) == 4


def test_csv_unsupported_command(capsys):
    assert main(["lemma", "--format", "csv"]) == 2
    capsys.readouterr()


def test_unknown_command_and_bad_vector(capsys):
    assert main(["no-such-command"]) == 2
    assert main(["expectation", "--a", "1,0", "--b", "0,1,0"]) == 2
    capsys.readouterr()


def test_appendix_commands(capsys):
    code, report = run_json(capsys, ["appendix3"])
    assert code == 0
    assert report["payload"]["consistent"] is False
    assert report["payload"]["bruteforce_agrees"] is True
    code, report = run_json(capsys, ["appendix3", "--correlations=-1,-1,-1"])
    assert code == 0
    assert report["payload"]["consistent"] is True
    code, report = run_json(capsys, ["appendix1", "--a", "1,0,0", "--b", "1,0,0",
                                     "--resolution", "50000"])
    assert code == 0
    assert report["payload"]["abs_diff"] <= 1e-12


def test_layers_count(capsys):
    code, report = run_json(capsys, ["layers-count", "--knots", "4"])
    assert code == 0
    assert report["payload"]["block_positions"] == 49
    assert report["payload"]["formula_n1_check"] == 336


def test_deterministic_bytes(tmp_path, monkeypatch):
    monkeypatch.setenv("SOURCE_DATE_EPOCH", "1700000000")
    out1 = tmp_path / "r1.json"
    out2 = tmp_path / "r2.json"
    argv = ["expectation", "--knots", "4", "--a", "0.6,0.8,0",
            "--b", "0.8,0.6,0"]
    assert main(argv + ["--out", str(out1)]) == 0
    assert main(argv + ["--out", str(out2)]) == 0
    assert out1.read_bytes() == out2.read_bytes()
    report = json.loads(out1.read_text())
    assert report["timestamp"] == 1700000000


def test_output_dir_env(tmp_path, monkeypatch):
    monkeypatch.setenv("EPRSIM_OUTPUT_DIR", str(tmp_path))
    assert main(["expectation", "--knots", "4", "--a", "1,0,0",
                 "--b", "0,1,0", "--out", "report.json"]) == 0
    assert (tmp_path / "report.json").exists()


def test_selftest_harness(capsys, monkeypatch):
    good = [AcceptanceResult(cid=1, name="x", passed=True, details="", seconds=0.0)]
    bad = [AcceptanceResult(cid=1, name="x", passed=False, details="", seconds=0.0)]
    monkeypatch.setattr(acceptance, "run_all", lambda **kw: good)
    assert main(["selftest"]) == 0
    monkeypatch.setattr(acceptance, "run_all", lambda **kw: bad)
    assert main(["selftest"]) == 1
    assert main(["selftest", "--knots", ""]) == 2
    capsys.readouterr()
