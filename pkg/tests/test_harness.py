import csv
import io
import json
import re
import subprocess
import sys

import numpy as np
import pytest

from fprates.harness.cli import main, verify
from fprates.harness.config import ConfigError, builtin_names, load_config
from fprates.harness.report import load_bundle
from fprates.harness.runner import CheckFailed, InadmissibleError, run_config

BASE = """
name = "{name}"
schemes = {schemes}
analyses = {analyses}
x0 = [0.0]

[problem]
matrix = [[0.5]]
offset = [1.0]

[schedule]
family = "constant"
parameters = {params}
"""

DATADEP = """
[datadep]
epsilon = 0.1
shift = [0.1]
"""


def write_cfg(tmp_path, name="t", schemes='["KO", "CR"]', analyses="[]", params="[0.5, 0.5, 0.5]", extra=""):
    p = tmp_path / f"{name}.toml"
    p.write_text(BASE.format(name=name, schemes=schemes, analyses=analyses, params=params) + extra)
    return p


def hashes(directory):
    return {e["path"]: e["sha256"] for e in json.loads((directory / "manifest.json").read_text())["files"]}


class TestConfig:
    def test_builtins_load(self):
        names = builtin_names()
        assert "standard-ko-vs-cr" in names
        for n in names:
            load_config(n)

    def test_unknown_field_rejected(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(write_cfg(tmp_path, extra="\nbogus = 1\n"))

    def test_empty_scheme_list_rejected(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(write_cfg(tmp_path, schemes="[]"))

    def test_unknown_scheme_rejected(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(write_cfg(tmp_path, schemes='["Halpern"]'))

    def test_equivalence_needs_both(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(write_cfg(tmp_path, schemes='["KO"]', analyses='["equivalence"]'))

    def test_missing_file(self):
        with pytest.raises(ConfigError):
            load_config("no-such-config")

    def test_non_contractive_problem(self, tmp_path):
        p = write_cfg(tmp_path)
        p.write_text(p.read_text().replace("[[0.5]]", "[[1.5]]"))
        with pytest.raises(ConfigError):
            run_config(p, output_root=tmp_path / "out")


class TestRun:
    def test_outputs_and_determinism(self, tmp_path):
        a = run_config("standard-ko-vs-cr", output_root=tmp_path / "a")
        b = run_config("standard-ko-vs-cr", output_root=tmp_path / "b")
        ha, hb = hashes(a.directory), hashes(b.directory)
        assert ha == hb
        assert {"bundle.json", "errors.svg", "traces/KO.csv", "traces/CR.csv"} <= set(ha)

    def test_csv_rows_and_round_trip(self, tmp_path):
        bundle = run_config("standard-ko-vs-cr", output_root=tmp_path)
        rows = list(csv.DictReader(io.StringIO((bundle.directory / "traces" / "KO.csv").read_text())))
        assert len(rows) == 25  # n = 0..24
        xs = np.array([float(r["x"]) for r in rows])
        assert np.array_equal(xs, np.asarray(bundle.traces["KO"]["iterates"])[:, 0])
        assert float(rows[1]["x"]) == 1.28125
        assert {"error", "residual", "exp_bound", "b_n"} <= set(rows[0])

    def test_svg(self, tmp_path):
        bundle = run_config("standard-ko-vs-cr", output_root=tmp_path)
        svg = (bundle.directory / "errors.svg").read_text()
        assert re.findall(r'data-scheme="(\w+)"', svg) == ["KO", "CR"]
        assert ">KO</text>" in svg and ">CR</text>" in svg

    def test_inadmissible_datadep(self, tmp_path):
        cfg = write_cfg(tmp_path, schemes='["KO", "KOPerturbed"]', analyses='["datadep"]',
                        params="[0.25, 0.5, 0.5]", extra=DATADEP)
        with pytest.raises(InadmissibleError):
            run_config(cfg, output_root=tmp_path / "out")
        assert main(["run", str(cfg), "--out", str(tmp_path / "out")]) == 3

    def test_exit_code_config_error(self, tmp_path):
        assert main(["run", str(write_cfg(tmp_path, schemes="[]"))]) == 2

    def test_failed_expectation_writes_bundle(self, tmp_path):
        cfg = write_cfg(tmp_path, schemes='["Mann"]', extra="\n[stop]\nmax_n = 3\n\n[expect]\nall_converged = true\n")
        with pytest.raises(CheckFailed) as info:
            run_config(cfg, output_root=tmp_path / "out")
        assert (info.value.bundle.directory / "bundle.json").is_file()
        assert main(["run", str(cfg), "--out", str(tmp_path / "out")]) == 4

    def test_env_output_root(self, tmp_path, monkeypatch):
        monkeypatch.setenv("FPRATES_OUTPUT_ROOT", str(tmp_path / "env"))
        bundle = run_config(write_cfg(tmp_path, name="envrun"))
        assert bundle.directory == tmp_path / "env" / "envrun"
        assert (bundle.directory / "manifest.json").is_file()

    def test_report_verb_rebuilds(self, tmp_path):
        bundle = run_config("standard-ko-vs-cr", output_root=tmp_path)
        before = hashes(bundle.directory)
        (bundle.directory / "errors.svg").unlink()
        for f in (bundle.directory / "traces").iterdir():
            f.unlink()
        assert main(["report", str(bundle.directory), "--format", "csv", "svg"]) == 0
        assert hashes(bundle.directory) == before
        assert load_bundle(bundle.directory).passed

    def test_report_missing_bundle(self, tmp_path):
        assert main(["report", str(tmp_path)]) == 6

    def test_seed_override(self, tmp_path):
        bundle = run_config("standard-ko-vs-cr", output_root=tmp_path, seed=11)
        assert bundle.config["seed"] == 11


def test_verify_prints_one_line_per_criterion(tmp_path):
    out = io.StringIO()
    assert verify(str(tmp_path), stream=out)
    lines = [ln for ln in out.getvalue().splitlines() if ln.startswith(("PASS", "FAIL"))]
    assert len(lines) == 9 and all(ln.startswith("PASS") for ln in lines)


def test_cli_list_and_module_entry():
    res = subprocess.run([sys.executable, "-m", "fprates.harness.cli", "list"], capture_output=True, text=True)
    assert res.returncode == 0 and "standard-ko-vs-cr" in res.stdout
