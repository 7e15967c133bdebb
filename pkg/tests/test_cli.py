import json
import subprocess
import sys

import pytest

from finsler2d import config
from finsler2d.cli import RunConfig, run


def test_eval_funk_spray(capsys):
    code = run(["eval", "--metric", "funk", "--point", "0,0,1,1", "--format", "json"])
    assert code == 0
    doc = json.loads(capsys.readouterr().out)
    row = doc["points"][0]
    assert row["spray"]["G"] == pytest.approx([-0.3, -0.3], abs=1e-12)
    assert row["barred"]["G"] == pytest.approx([-0.3, -0.3], abs=1e-12)
    assert row["frame"]["epsilon"] == 1


def test_eval_quantities(capsys):
    code = run(["eval", "--metric", "euclid", "--point", "0.1,0.2,1,0.5", "-q", "I", "-q", "F;1"])
    assert code == 0
    out = capsys.readouterr().out
    assert "I" in out and "n/a" not in out.split("quantities")[-1]


def test_degree_exhaustion_names_the_chain(capsys):
    code = run(["eval", "--metric", "funk", "--point", "0,0,1,1", "--degree", "4",
                "-q", "Q;2;2;2;2"])
    assert code == 3
    err = capsys.readouterr().err
    assert "Q;2;2;2;2" in err and "degree budget 4" in err


def test_unknown_quantity_is_input_error(capsys):
    assert run(["eval", "--metric", "funk", "--point", "0,0,1,1", "-q", "Z;2"]) == 2


def test_point_outside_domain(capsys):
    assert run(["eval", "--metric", "funk", "--point", "0,0,-1,-1"]) == 2
    assert "outside the domain" in capsys.readouterr().err


def test_example_runs_clean(capsys):
    assert run(["example", "berwald-rund", "--count", "10"]) == 0
    out = capsys.readouterr().out
    assert "class.metrizable" in out


def test_unknown_example(capsys):
    assert run(["example", "nope"]) == 2


def test_argument_errors_exit_2():
    with pytest.raises(SystemExit) as info:
        run(["eval", "--metric", "funk", "--point", "1,2"])
    assert info.value.code == 2


def test_bad_metric_file(tmp_path, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text('[metric]\nF = "sqrt(y1^2 + "\n')
    assert run(["verify", "--metric", str(bad), "--count", "3"]) == 2
    assert "offset" in capsys.readouterr().err
    missing = tmp_path / "nothing.toml"
    assert run(["verify", "--metric", str(missing)]) == 2


def test_expectation_mismatch_exits_1(capsys):
    code = run(["classify", "--metric", "funk", "--count", "5", "--suite", "classification",
                "--expect", "class.flat=true"])
    assert code == 1
    code = run(["classify", "--metric", "funk", "--count", "5", "--suite", "classification",
                "--expect", "class.flat=false"])
    assert code == 0


def test_json_report_to_file(tmp_path):
    out = tmp_path / "report.json"
    code = run(["verify", "--metric", "euclid", "--count", "4", "--format", "json",
                "--output", str(out)])
    assert code == 0
    doc = json.loads(out.read_text())
    assert doc["ok"] is True
    assert doc["metadata"]["suite"] == ["identities"]


def test_run_config_roundtrip(tmp_path, capsys):
    assert run(["classify", "--metric", "funk", "--count", "7", "--seed", "4",
                "--expect", "class.flat=false", "--dump-run-config"]) == 0
    dumped = capsys.readouterr().out
    rc = RunConfig.from_dict(json.loads(dumped))
    assert rc.count == 7 and rc.seed == 4 and rc.expect == {"class.flat": False}
    assert RunConfig.from_dict(json.loads(rc.to_json())) == rc
    path = tmp_path / "run.json"
    path.write_text(dumped)
    assert run(["classify", "--run-config", str(path), "--metric", "funk",
                "--dump-run-config", "--count", "9"]) == 0
    assert json.loads(capsys.readouterr().out)["count"] == 9


def test_run_config_rejects_unknown_keys(tmp_path):
    path = tmp_path / "run.json"
    path.write_text('{"colour": "blue"}')
    assert run(["verify", "--metric", "funk", "--run-config", str(path)]) == 2


@pytest.mark.parametrize("name", ["funk", "berwald-rund", "euclid"])
def test_metric_file_roundtrip(name):
    cfg = config.load(name)
    again = config.loads(config.dumps(cfg))
    assert again.F == cfg.F
    assert again.phi == cfg.phi
    assert again.domain.sources == cfg.domain.sources
    assert again.plan == cfg.plan
    assert again.expect == cfg.expect


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "finsler2d", "--version"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert proc.stdout.strip().startswith("finsler2d")
