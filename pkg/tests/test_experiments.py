import csv
import importlib
import io
import json
import math

import numpy as np
import pytest

import sparselab
from sparselab.checks import REPRO_CONFIGS
from sparselab.cli import main
from sparselab.errors import ConfigError, LabIOError
from sparselab.experiments import (
    KINDS,
    ExperimentConfig,
    ExperimentReport,
    load_config,
    report_json,
    rows_csv,
    run_experiment,
    write_report,
)
from sparselab.experiments.runner import PIPELINES

MINIMAL = "kind=smin_survey n=50 p=0.2 alpha=2 z=0+1i trials=5 master_seed=1"


def small(kind, trials=None):
    body = REPRO_CONFIGS[kind]
    if trials is not None:
        body = " ".join(t for t in body.split() if not t.startswith("trials=")) + f" trials={trials}"
    return load_config(f"kind={kind} master_seed=3 {body}")


class TestConfig:
    def test_minimal(self):
        cfg = load_config(MINIMAL)
        assert (cfg.kind, cfg.n, cfg.p, cfg.alpha, cfg.z, cfg.trials) == ("smin_survey", 50, 0.2, 2.0, 1j, 5)
        assert cfg.mode == "raw" and cfg.dist.describe() == "rademacher"

    @pytest.mark.parametrize("text, message", [
        ("kind=warp_drive n=5", "unknown kind"),
        (MINIMAL.replace("p=0.2", "p=1.5"), "p out of range"),
        (MINIMAL.replace("trials=5", "trials=0"), "trials out of range"),
        (MINIMAL.replace("alpha=2 ", ""), "missing required key 'alpha'"),
        (MINIMAL + " warp=9", "unknown key 'warp'"),
        (MINIMAL + " n=3", "duplicate key 'n'"),
    ])
    def test_errors(self, text, message):
        with pytest.raises(ConfigError, match=message):
            load_config(text)

    def test_comments_and_lines(self):
        cfg = load_config("# survey\nkind=esd_survey  # which\nn=10 p=0.5\nalpha=1\ntrials=2 master_seed=0\nradii=0.2,0.9\n")
        assert cfg.radii == (0.2, 0.9)

    def test_complex_pair(self):
        assert load_config(MINIMAL.replace("z=0+1i", "z=0.5,-2")).z == 0.5 - 2j

    def test_text_round_trip(self):
        cfg = load_config(MINIMAL + " ws=1i;0.5+0.5i T_marks=1,3")
        assert load_config(cfg.to_text()) == cfg

    def test_from_path(self, tmp_path):
        path = tmp_path / "c.cfg"
        path.write_text(MINIMAL)
        assert load_config(path) == load_config(MINIMAL)

    def test_defaults(self):
        cfg = load_config("kind=chain_census n=100 p=0.05 alpha=2 trials=1 master_seed=0")
        assert cfg.effective_K() == pytest.approx(1.25)
        assert cfg.effective_k_max() == math.floor(math.log(100) / math.log(5))


class TestRun:
    def test_smin_positive(self):
        rep = run_experiment(load_config(MINIMAL))
        assert len(rep.rows) == 5 and not rep.errors
        assert all(r["s_min"] > 0 for r in rep.rows)

    def test_smin_golden_columns(self):
        rep = run_experiment(load_config(MINIMAL))
        assert rows_csv(rep).splitlines()[0] == "trial,seed,s_min,a3_satisfied"

    def test_bt_columns(self):
        rep = run_experiment(small("bt_success"))
        assert rep.columns[:6] == ["trial", "ell", "|J|", "cond_norm", "cond_lower", "submatrix_smin"]
        assert 0 <= rep.aggregates["success_rate"]["rate"] <= 1

    @pytest.mark.parametrize("kind", KINDS)
    def test_every_kind_deterministic_across_threads(self, kind):
        cfg = small(kind, trials=3)
        a = run_experiment(cfg, threads=1)
        b = run_experiment(cfg, threads=3)
        assert len(a.rows) == 3
        assert rows_csv(a) == rows_csv(b)
        assert report_json(a, False) == report_json(b, False)

    def test_event_probe_shell_statistic(self):
        cfg = load_config("kind=event_probe n=30 p=0.05 alpha=1 z=0 trials=6 master_seed=2 tau=0.1 q=2")
        rep = run_experiment(cfg)
        assert rep.counters["shell_built"] == 6
        for r in rep.rows:
            assert r["shell_status"] == "ok"
            assert r["infinite_type_reference"] == 3.0 and 0 <= r["infinite_type_hits"] <= 30

    def test_census_decay_exponent(self):
        rep = run_experiment(load_config("kind=chain_census n=40 p=0.1 alpha=2 z=0+1i trials=2 master_seed=3 K=4"))
        assert any(r["self_balancing_cf_1"] for r in rep.rows)
        for r in rep.rows:
            for k in range(1, 10):
                if f"self_balancing_cf_{k}" not in r:
                    break
                cnt = r[f"self_balancing_cf_{k}"]
                expect = math.inf if cnt == 0 else math.log(40 / cnt) / (40 * 0.1 * k)
                assert r[f"decay_exponent_{k}"] == pytest.approx(expect)

    def test_trial_errors_are_recorded(self, monkeypatch):
        from sparselab import spectra

        calls = {"n": 0}
        real = spectra.singular_values

        def flaky(B):
            calls["n"] += 1
            if calls["n"] == 2:
                raise np.linalg.LinAlgError("did not converge")
            return real(B)

        monkeypatch.setattr(spectra, "singular_values", flaky)
        rep = run_experiment(load_config(MINIMAL.replace("trials=5", "trials=3")))
        assert len(rep.rows) == 3 and list(rep.errors) == [1]
        assert rep.rows[1] == {"trial": 1}
        assert rep.counters["errors"] == 1


class TestRegistry:
    def test_kinds_registered(self):
        assert set(PIPELINES) == set(KINDS)

    @pytest.mark.parametrize("kind", KINDS)
    def test_cited_operations_run(self, kind, monkeypatch):
        hits = {}
        for op in PIPELINES[kind][1]:
            mod_name, fn_name = op.split(".")
            mod = importlib.import_module(f"sparselab.{mod_name}")
            real = getattr(mod, fn_name)

            def wrapped(*a, _real=real, _op=op, **kw):
                hits[_op] = hits.get(_op, 0) + 1
                return _real(*a, **kw)

            monkeypatch.setattr(mod, fn_name, wrapped)
        rep = run_experiment(small(kind, trials=2))
        assert not rep.errors
        assert hits, f"{kind} called none of its listed operations"


class TestReport:
    def test_empty_rows(self):
        rep = ExperimentReport(load_config(MINIMAL), ["trial", "seed", "s_min", "a3_satisfied"], [])
        assert rows_csv(rep) == "trial,seed,s_min,a3_satisfied\r\n"

    def test_json_round_trip(self):
        rep = run_experiment(load_config(MINIMAL))
        doc = json.loads(report_json(rep))
        assert doc["columns"] == rep.columns
        for row, back in zip(rep.rows, doc["rows"]):
            assert back[rep.columns.index("s_min")] == row["s_min"]
            assert back[rep.columns.index("seed")] == row["seed"]
        assert doc["config"]["z"] == [0.0, 1.0]
        assert "wall_clock_seconds" in doc

    def test_csv_round_trip(self, tmp_path):
        rep = run_experiment(load_config(MINIMAL))
        paths = write_report(rep, "csv", tmp_path)
        assert [p.name for p in paths] == ["smin_survey.csv", "smin_survey_aggregates.csv"]
        with open(paths[0], newline="") as fh:
            table = list(csv.DictReader(fh))
        assert [float(r["s_min"]) for r in table] == [r["s_min"] for r in rep.rows]
        assert {r["a3_satisfied"] for r in table} <= {"true", "false"}

    def test_json_file(self, tmp_path):
        rep = run_experiment(small("esd_survey", 2))
        (path,) = write_report(rep, "json", tmp_path)
        assert path.name == "esd_survey.json" and json.loads(path.read_text())["rows"]

    def test_bad_format(self, tmp_path):
        with pytest.raises(ConfigError):
            write_report(run_experiment(small("type_mass", 1)), "xml", tmp_path)

    def test_unwritable(self, tmp_path):
        blocker = tmp_path / "f"
        blocker.write_text("")
        with pytest.raises(LabIOError):
            write_report(run_experiment(small("type_mass", 1)), "csv", blocker / "x")


class TestCli:
    def test_validate(self, tmp_path, capsys):
        path = tmp_path / "c.cfg"
        path.write_text(MINIMAL)
        assert main(["validate", str(path)]) == 0
        assert "smin_survey" in capsys.readouterr().out

    def test_config_error(self, tmp_path):
        path = tmp_path / "c.cfg"
        path.write_text("kind=warp_drive")
        assert main(["validate", str(path)]) == 2
        assert main(["run", str(path)]) == 2

    def test_missing_file(self, tmp_path):
        assert main(["run", str(tmp_path / "none.cfg")]) == 3

    def test_run(self, tmp_path):
        path = tmp_path / "c.cfg"
        path.write_text(MINIMAL)
        out = tmp_path / "out"
        assert main(["run", str(path), "--out", str(out), "--format", "csv", "--threads", "2"]) == 0
        assert (out / "smin_survey.csv").exists() and (out / "smin_survey_aggregates.csv").exists()
        assert main(["run", str(path), "--out", str(out), "--format", "json"]) == 0
        assert (out / "smin_survey.json").exists()

    def test_unwritable_output(self, tmp_path):
        path = tmp_path / "c.cfg"
        path.write_text(MINIMAL)
        blocker = tmp_path / "f"
        blocker.write_text("")
        assert main(["run", str(path), "--out", str(blocker / "d")]) == 3

    def test_bad_threads(self, tmp_path):
        path = tmp_path / "c.cfg"
        path.write_text(MINIMAL)
        assert main(["run", str(path), "--threads", "0"]) == 2


def test_version():
    assert isinstance(sparselab.__version__, str)


def test_cli_selftest_quick(capsys):
    assert main(["selftest", "--quick"]) == 0
    out = capsys.readouterr().out
    assert out.count("[PASS]") == 10
