import json
import shutil
import subprocess
import sys

import numpy as np
import pytest

from ensemble_lab import cli
from ensemble_lab.curves import curve_from_csv
from ensemble_lab.presets import preset

MANIFEST_KEYS = {"command", "model_hash", "seeds", "budgets", "version", "wall_time", "outputs", "warnings",
                 "status", "exit_code", "error"}


@pytest.fixture
def model_file(tmp_path):
    def write(doc, name="model.json"):
        p = tmp_path / name
        p.write_text(json.dumps(doc), encoding="utf-8")
        return str(p)

    return write


def run(*argv):
    return cli.main([str(a) for a in argv])


def test_grid_parsing():
    assert np.array_equal(cli.parse_grid("0:1:5"), np.linspace(0, 1, 5))
    for bad in ("0:1", "1:0:5", "0:1:1", "a:b:c"):
        with pytest.raises(Exception) as exc:
            cli.parse_grid(bad)
        assert exc.value.exit_code == 2


# exit codes


def test_validate_exit_codes(model_file, tmp_path, capsys):
    assert run("validate", "--model", model_file(preset("vortex-disc"))) == 0
    doc = preset("vortex-disc")
    doc["kernel"] = {"family": "monomial", "params": {"exponent": 2.0}}
    out = tmp_path / "rep.json"
    assert run("validate", "--model", model_file(doc, "sq.json"), "--out", out) == 1
    report = json.loads(out.read_text())
    assert not report["passed"] and any(not e["passed"] for e in report["checks"])
    assert "FAIL" in capsys.readouterr().out


def test_declared_assumptions_are_reported_not_checked(model_file, capsys):
    doc = preset("vortex-disc", assumptions={"affine_continuity": True})
    assert run("validate", "--model", model_file(doc)) == 0
    assert "NOTE  assumption affine_continuity = True" in capsys.readouterr().out


def test_malformed_json_is_usage_error(tmp_path, capsys):
    p = tmp_path / "broken.json"
    p.write_text("{not json", encoding="utf-8")
    assert run("validate", "--model", p) == 2
    assert "malformed JSON" in capsys.readouterr().err


def test_schema_error_names_the_field(model_file, capsys):
    doc = preset("vortex-disc")
    doc["kernel"]["family"] = "spline"
    assert run("validate", "--model", model_file(doc)) == 2
    assert "kernel.family" in capsys.readouterr().err


def test_unknown_subcommand_exits_two():
    with pytest.raises(SystemExit) as exc:
        run("frobnicate")
    assert exc.value.code == 2


def test_missing_seed_is_usage_error(model_file, tmp_path):
    doc = preset("vortex-disc")
    del doc["seed"]
    out = tmp_path / "x.csv"
    assert run("micro", "--model", model_file(doc), "--e-grid", "0:1:4", "--samples", 100, "--out", out) == 2
    assert not out.exists()


# micro and manifests


def test_micro_csv_and_manifest(model_file, tmp_path):
    out = tmp_path / "t.csv"
    code = run("micro", "--model", model_file(preset("vortex-disc", N=4)), "--e-grid", "0:0.4:5",
               "--samples", 20000, "--out", out)
    assert code == 0
    c = curve_from_csv(out.read_text())
    assert len(c) == 5 and c.y[0] <= 0 and np.all(np.diff(c.y[np.isfinite(c.y)]) <= 0)
    man = json.loads((tmp_path / "t.csv.manifest.json").read_text())
    assert set(man) == MANIFEST_KEYS
    assert man["status"] == "ok" and man["exit_code"] == 0
    assert man["seeds"]["seed"] == 20240612 and len(man["model_hash"]) == 16
    assert str(out) in man["outputs"] and man["budgets"]["samples"] == 20000


def test_micro_output_independent_of_workers(model_file, tmp_path):
    m = model_file(preset("vortex-disc", N=3))
    texts = []
    for w in (1, 3):
        out = tmp_path / f"w{w}.csv"
        assert run("micro", "--model", m, "--e-grid", "0:0.3:4", "--samples", 30000, "--seed", 9,
                   "--workers", w, "--out", out) == 0
        texts.append(out.read_bytes())
    assert texts[0] == texts[1]


def test_error_manifest_records_failure(model_file, tmp_path):
    out = tmp_path / "e.csv"
    assert run("micro", "--model", model_file(preset("vortex-disc")), "--e-grid", "1:0:4", "--out", out) == 2
    man = json.loads((tmp_path / "e.csv.manifest.json").read_text())
    assert man["status"] == "error" and man["exit_code"] == 2 and "--e-grid" in man["error"]


# macro and duality


def test_macro_then_duality(model_file, tmp_path):
    m = model_file(preset("vortex-disc"))
    prefix = tmp_path / "mac"
    assert run("macro", "--model", m, "--resolution", 128, "--beta-grid=-4:30:120",
               "--e-grid", "0.03:0.2:8", "--out-prefix", prefix) == 0
    for suffix in ("_F.csv", "_S_sweep.csv", "_S.csv", "_measures.csv", "_manifest.json"):
        assert (tmp_path / f"mac{suffix}").exists()
    F = curve_from_csv((tmp_path / "mac_F.csv").read_text())
    assert F.meta["x_name"] == "beta" and F.y[np.argmin(np.abs(F.x))] == pytest.approx(0, abs=0.02)
    dprefix = tmp_path / "dual"
    code = run("duality", "--s-curve", tmp_path / "mac_S.csv", "--f-curve", tmp_path / "mac_F.csv",
               "--out-prefix", dprefix)
    rep = json.loads((tmp_path / "dual_report.json").read_text())
    assert code == 0 and rep["equivalence"]["verdict"]
    assert (tmp_path / "dual_F_star.csv").exists() and (tmp_path / "dual_S_envelope.csv").exists()


def test_macro_needs_a_grid(model_file, tmp_path):
    assert run("macro", "--model", model_file(preset("vortex-disc")), "--out-prefix", tmp_path / "m") == 2


# plot


def write_csv(path, rows, x_name="e"):
    lines = [f"{x_name},value,stderr,flag"] + [",".join(map(str, r)) for r in rows]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def test_plot_is_deterministic_with_legend_and_flags(tmp_path):
    a = write_csv(tmp_path / "alpha.csv", [(0, 0, "", ""), (1, -1, "", "low_count"), (2, -3, "", "")])
    b = write_csv(tmp_path / "beta.csv", [(0, 0, "", ""), (1, -0.5, "", ""), (2, "-inf", "", "")])
    assert run("plot", a, b, "--title", "tails", "--out", tmp_path / "p1.svg") == 0
    assert run("plot", a, b, "--title", "tails", "--out", tmp_path / "p2.svg") == 0
    svg = (tmp_path / "p1.svg").read_text()
    assert svg == (tmp_path / "p2.svg").read_text()
    assert ">alpha<" in svg and ">beta<" in svg
    assert svg.count('fill="none" stroke="#1f77b4"/>') == 1


def test_single_series_has_no_legend(tmp_path):
    a = write_csv(tmp_path / "only.csv", [(0, 1, "", ""), (1, 2, "", "")])
    assert run("plot", a, "--out", tmp_path / "p.svg") == 0
    assert ">only<" not in (tmp_path / "p.svg").read_text()


def test_empty_csv_is_usage_error(tmp_path):
    p = tmp_path / "empty.csv"
    p.write_text("e,value,stderr,flag\n", encoding="utf-8")
    assert run("plot", p, "--out", tmp_path / "p.svg") == 2
    assert run("plot", tmp_path / "missing.csv", "--out", tmp_path / "q.svg") == 2


# demo and console script


def test_catastrophe_demo(tmp_path, capsys):
    assert run("demo", "catastrophe", "--out-dir", tmp_path) == 0
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["status"] == "ok" and man["model_hash"]
    assert "PASS" in capsys.readouterr().out


def test_console_script_reports_version():
    exe = shutil.which("ensemble-lab")
    cmd = [exe] if exe else [sys.executable, "-m", "ensemble_lab.cli"]
    out = subprocess.run(cmd + ["--version"], capture_output=True, text=True, check=True)
    assert out.stdout.startswith("ensemble-lab ")
