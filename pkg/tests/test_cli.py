import json

import pytest

from activescalar import cli, experiments
from activescalar.evolution import CFLError


@pytest.fixture
def small_config(tmp_path):
    p = tmp_path / "small.ini"
    p.write_text("[grid]\nN = 64\nM = 100\n")
    return p


def _bodies(d):
    return {p.name: p.read_bytes() for p in sorted(d.glob("*.csv"))}


def test_diffuse_writes_artifacts(tmp_path, small_config):
    out = tmp_path / "runs"
    assert cli.main(["diffuse", "--config", str(small_config), "--out", str(out)]) == 0
    d = out / "diffuse"
    header = (d / "closed_form.csv").read_text().splitlines()[0]
    assert header == "time,numeric,exact,rel_error"
    man = json.loads((d / "manifest.json").read_text())
    assert man["config"]["N"] == 64 and len(man["content_sha256"]) == 64
    assert man["wall_time_s"] > 0
    summary = json.loads((d / "summary.json").read_text())
    assert {c["id"] for c in summary["criteria"]} == {2, 4}


def test_reruns_are_byte_identical(tmp_path, small_config):
    runs = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert cli.main(["diffuse", "--config", str(small_config), "--out", str(out),
                         "--seed", "5"]) == 0
        runs.append(_bodies(out / "diffuse"))
        runs[-1]["hash"] = json.loads((out / "diffuse" / "manifest.json").read_text())[
            "content_sha256"]
    assert runs[0] == runs[1]


def test_config_error_exit_code(tmp_path, capsys):
    p = tmp_path / "bad.ini"
    p.write_text("[model]\nalpha = 0.4\n")
    assert cli.main(["diffuse", "--config", str(p), "--out", str(tmp_path)]) == 1
    assert "alpha" in capsys.readouterr().err


def test_solver_failure_exit_code(tmp_path, monkeypatch):
    def boom(cfg):
        raise CFLError(3, 2.5)
    monkeypatch.setitem(experiments.EXPERIMENTS, "forward", boom)
    assert cli.main(["forward", "--out", str(tmp_path)]) == 2


def test_report_lists_missing_runs(tmp_path, small_config, capsys):
    out = tmp_path / "runs"
    cli.main(["diffuse", "--config", str(small_config), "--out", str(out)])
    capsys.readouterr()
    assert cli.main(["report", "--out", str(out)]) == 3
    text = capsys.readouterr().out
    assert "missing runs:" in text and "forward" in text
    rows = (out / "report.csv").read_text().splitlines()
    assert rows[0] == "criterion,name,subcommand,status,value,threshold" and len(rows) == 11
    assert ",PASS," in rows[2] and ",MISSING," in rows[1]


def test_report_passes_when_all_criteria_pass(tmp_path):
    out = tmp_path / "runs"
    for sub in set(experiments.CRITERIA_SOURCE.values()):
        (out / sub).mkdir(parents=True)
        crit = [{"id": cid, "name": experiments.CRITERIA_NAMES[cid], "value": 0.0,
                 "threshold": "", "passed": True, "detail": {}}
                for cid, s in experiments.CRITERIA_SOURCE.items() if s == sub]
        (out / sub / "summary.json").write_text(json.dumps({"criteria": crit}))
    assert cli.main(["report", "--out", str(out)]) == 0


def test_reconstruct_equal_specs(tmp_path):
    p = tmp_path / "same.ini"
    p.write_text("[grid]\nN = 64\n[compare_multiplier]\nkind = riesz\n"
                 "[reconstruct]\noffset_grid = 2, 4\n")
    out = tmp_path / "runs"
    assert cli.main(["reconstruct", "--config", str(p), "--out", str(out)]) == 0
    rows = (out / "reconstruct" / "kernel_gradient.csv").read_text().splitlines()[1:]
    assert rows and all(float(r.split(",")[-1]) == 0 for r in rows)


def test_linearize_x1_only_at_floor(tmp_path):
    p = tmp_path / "lin.ini"
    p.write_text("[grid]\nN = 32\nM = 100\n")
    out = tmp_path / "runs"
    assert cli.main(["linearize", "--source", "x1_only", "--config", str(p),
                     "--out", str(out)]) == 0
    s = json.loads((out / "linearize" / "summary.json").read_text())["summary"]
    assert s["at_floor"] and s["max_residual"] <= 1e-8


def test_module_entry_point():
    import subprocess
    import sys
    r = subprocess.run([sys.executable, "-m", "activescalar", "--help"], capture_output=True,
                       text=True)
    assert r.returncode == 0
    for sub in ("forward", "diffuse", "linearize", "runge", "identity", "reconstruct", "report"):
        assert sub in r.stdout
