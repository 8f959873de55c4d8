import json
import subprocess
import sys

import numpy as np
import pytest

from clicktomo.cli import main
from clicktomo.povm_solver import PovmMatrix, write_povm_json

SMALL = ["--n-probes", "8", "--trials", "200000", "--target-dark", "1e-4", "--target-xtalk", "0.1"]


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def small_run(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    assert run("simulate", "--counts-out", d / "counts.csv", "--probes-out", d / "probes.csv",
               "--truth-out", d / "truth.json", "--seed", 3, *SMALL) == 0
    assert run("reconstruct", "--counts", d / "counts.csv", "--probes", d / "probes.csv",
               "--out", d / "povm.json") == 0
    return d


def write_povm(path, rows):
    write_povm_json(path, PovmMatrix(np.array(rows, dtype=float)), epsilon=0.1)


class TestParser:
    @pytest.mark.parametrize("cmd", [[], ["simulate"], ["reconstruct"], ["report"], ["sweep"], ["wigner"]])
    def test_help_exits_zero(self, cmd, capsys):
        with pytest.raises(SystemExit) as exc:
            main(cmd + ["--help"])
        assert exc.value.code == 0
        assert "usage" in capsys.readouterr().out

    def test_help_documents_flags(self, capsys):
        with pytest.raises(SystemExit):
            main(["report", "--help"])
        out = capsys.readouterr().out
        for flag in ("--povm", "--mc", "--amplitude-sigma", "--config", "--threads", "--epsilon"):
            assert flag in out

    def test_unknown_flag(self):
        with pytest.raises(SystemExit) as exc:
            main(["simulate", "--frobnicate"])
        assert exc.value.code == 2

    def test_console_script(self):
        proc = subprocess.run([sys.executable, "-m", "clicktomo", "--version"],
                              capture_output=True, text=True)
        assert proc.returncode == 0 and "clicktomo" in proc.stdout


class TestSimulate:
    def test_zero_trials(self, tmp_path, capsys):
        assert run("simulate", "--counts-out", tmp_path / "c.csv", "--probes-out", tmp_path / "p.csv",
                   "--trials", 0) == 2
        assert "trials_per_probe" in capsys.readouterr().err

    def test_unwritable_path(self, tmp_path):
        assert run("simulate", "--counts-out", tmp_path / "missing" / "c.csv",
                   "--probes-out", tmp_path / "p.csv", "--n-probes", 3, "--trials", 10) == 3

    def test_bad_config_file(self, tmp_path):
        cfg = tmp_path / "run.toml"
        cfg.write_text("[solver]\nepsilon = 3\n", encoding="utf-8")
        assert run("simulate", "--config", cfg, "--counts-out", tmp_path / "c.csv",
                   "--probes-out", tmp_path / "p.csv") == 2
        assert run("simulate", "--config", tmp_path / "nope.toml", "--counts-out", tmp_path / "c.csv",
                   "--probes-out", tmp_path / "p.csv") == 3

    def test_same_seed_is_byte_identical(self, tmp_path):
        outs = []
        for tag in "ab":
            c = tmp_path / f"{tag}.csv"
            assert run("simulate", "--counts-out", c, "--probes-out", tmp_path / f"{tag}p.csv",
                       "--seed", 5, "--n-probes", 4, "--trials", 1000) == 0
            outs.append(c.read_bytes())
        assert outs[0] == outs[1]
        assert outs[0].startswith(b"# clicktomo")


class TestReconstruct:
    def test_output_document(self, small_run):
        doc = json.loads((small_run / "povm.json").read_text())
        assert doc["diagnostics"]["converged"] is True
        assert doc["epsilon"] == 0.1
        assert doc["metadata"]["command"] == "reconstruct"

    def test_non_monotone_counts(self, small_run, tmp_path, capsys):
        bad = tmp_path / "bad.csv"
        bad.write_text("probe_label,trials,c1,c2,c3,c4\nx,100,20,30,5,1\n", encoding="utf-8")
        probes = tmp_path / "p.csv"
        probes.write_text("label,mean_photon\nx,1.0\n", encoding="utf-8")
        assert run("reconstruct", "--counts", bad, "--probes", probes, "--out", tmp_path / "o.json") == 4
        err = capsys.readouterr().err
        assert "x" in err and "c2=30" in err

    def test_iteration_cap(self, small_run, tmp_path):
        out = tmp_path / "o.json"
        code = run("reconstruct", "--counts", small_run / "counts.csv", "--probes", small_run / "probes.csv",
                   "--out", out, "--max-iterations", 1)
        assert code == 5
        assert json.loads(out.read_text())["diagnostics"]["converged"] is False

    def test_missing_input(self, tmp_path):
        assert run("reconstruct", "--counts", tmp_path / "none.csv", "--probes", tmp_path / "none.csv",
                   "--out", tmp_path / "o.json") == 3


class TestReport:
    def test_read_offs_through_files(self, tmp_path, capsys):
        path = tmp_path / "pi.json"
        write_povm(path, [[0.9, 0.1, 0, 0, 0], [0.37, 0.49, 0.14, 0, 0], [0, 0, 0, 0, 1]])
        assert run("report", "--povm", path) == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["efficiency"] == pytest.approx(0.63)
        assert doc["dark_prob"] == pytest.approx(0.1)
        assert doc["xtalk_prob"] == pytest.approx(0.14 - 0.49 * 0.1)
        assert "efficiency_sigma" not in doc

    def test_mc_zero_has_no_sigmas(self, small_run, capsys):
        assert run("report", "--povm", small_run / "povm.json", "--mc", 0) == 0
        doc = json.loads(capsys.readouterr().out)
        assert not any(k.endswith("_sigma") for k in doc)

    def test_mc_samples(self, small_run, capsys):
        assert run("report", "--povm", small_run / "povm.json", "--mc", 3, "--counts",
                   small_run / "counts.csv", "--probes", small_run / "probes.csv") == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["n_mc_samples"] == 3
        assert doc["efficiency_sigma"] > 0

    def test_mc_needs_data(self, small_run):
        assert run("report", "--povm", small_run / "povm.json", "--mc", 3) == 2

    def test_non_stochastic_povm(self, tmp_path):
        path = tmp_path / "pi.json"
        path.write_text(json.dumps({"truncation_dim": 2, "n_outcomes": 2,
                                    "columns": [[0.5, 0.5], [0.2, 0.2]]}), encoding="utf-8")
        assert run("report", "--povm", path) == 6

    def test_malformed_json(self, tmp_path):
        path = tmp_path / "pi.json"
        path.write_text("{not json", encoding="utf-8")
        assert run("report", "--povm", path) == 2


class TestSweep:
    def test_single_point(self, small_run, tmp_path):
        out = tmp_path / "s.csv"
        assert run("sweep", "--counts", small_run / "counts.csv", "--probes", small_run / "probes.csv",
                   "--eps", "0.1", "--out", out) == 0
        lines = out.read_text().splitlines()
        assert lines[1] == "epsilon,theta_0_1" and len(lines) == 3

    @pytest.mark.parametrize("eps", ["", ",", "0.1,abc", "1.5"])
    def test_bad_grids(self, small_run, tmp_path, eps):
        assert run("sweep", "--counts", small_run / "counts.csv", "--probes", small_run / "probes.csv",
                   "--eps", eps, "--out", tmp_path / "s.csv") == 2

    def test_target_outside(self, small_run, tmp_path):
        assert run("sweep", "--counts", small_run / "counts.csv", "--probes", small_run / "probes.csv",
                   "--eps", "0.1", "--target", 0, 9, "--out", tmp_path / "s.csv") == 2


class TestWigner:
    def test_default_grid_json(self, small_run, tmp_path):
        out = tmp_path / "w.json"
        assert run("wigner", "--povm", small_run / "povm.json", "--outcome", 0, "--out", out) == 0
        doc = json.loads(out.read_text())
        values = np.array(doc["values"])
        assert values.shape == (201, 201)
        # the no-click element of a good detector peaks at the origin
        assert values.min() > 0
        assert np.unravel_index(values.argmax(), values.shape) == (100, 100)

    def test_csv(self, small_run, tmp_path):
        out = tmp_path / "w.csv"
        assert run("wigner", "--povm", small_run / "povm.json", "--outcome", 1, "--resolution", 5,
                   "--out", out) == 0
        lines = out.read_text().splitlines()
        assert lines[0].startswith("# clicktomo") and len(lines) == 2 + 25

    def test_outcome_out_of_range(self, small_run, tmp_path):
        assert run("wigner", "--povm", small_run / "povm.json", "--outcome", 5, "--out", tmp_path / "w.csv") == 2
