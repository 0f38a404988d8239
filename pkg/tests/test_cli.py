import csv
import json
import subprocess
import sys

import pytest

from robust_mab.bandit import ConfigError
from robust_mab.cli import main
from robust_mab.engine import EventLog, verify_event_log
from robust_mab.experiment import (
    ExperimentSpec,
    load_spec,
    parse_config_text,
    read_events,
    recompute_summary,
    render_summary,
    run_experiment,
)

SMALL = ["--n", "4", "--m", "2", "--K", "10", "--T", "1500", "--trials", "3"]


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


class TestConfigParsing:
    def test_flat_file(self):
        values = parse_config_text("n = 5\n# comment\nvariants = blocking, oracle\nbound = yes\nK = auto\n")
        assert values == {"n": 5, "variants": ("blocking", "oracle"), "bound": True, "K": None}

    def test_scientific_int(self):
        assert parse_config_text("T = 1e5")["T"] == 100_000

    def test_unknown_key_has_line(self):
        with pytest.raises(ConfigError, match=r":2: unknown key 'bogus'"):
            parse_config_text("n = 3\nbogus = 1\n")

    def test_bad_value(self):
        with pytest.raises(ConfigError, match="bad value for 'T'"):
            parse_config_text("T = 2.5")

    def test_missing_equals(self):
        with pytest.raises(ConfigError, match=":1:"):
            parse_config_text("n 3")

    def test_overrides_win(self, tmp_path):
        p = tmp_path / "exp.cfg"
        p.write_text("n = 3\nm = 1\n")
        assert load_spec(p, {"n": 9}).n == 9

    @pytest.mark.parametrize("values", [
        {"variants": ("blocking", "bogus")}, {"baseline": "oracle", "variants": ("blocking",)},
        {"strategy": "nope"}, {"plugins": ("no_such_module_xyz",)}, {"workers": 0},
    ])
    def test_spec_errors(self, values):
        with pytest.raises(ConfigError):
            ExperimentSpec(**values).validate()


class TestRunAndReport:
    def test_outputs_and_exact_report(self, tmp_cwd, capsys):
        assert main(["run", *SMALL, "--bound", "true", "--out", "res"]) == 0
        out = tmp_cwd / "res"
        for name in ("config.json", "arms.csv", "curves.csv", "tau.csv", "events.jsonl", "summary.json", "bounds.csv"):
            assert (out / name).exists(), name
        summary = json.loads((out / "summary.json").read_text())
        assert set(summary["variants"]) == {"blocking", "no-blocking", "no-communication", "oracle"}
        assert "relative_regret" in summary["variants"]["blocking"]
        assert main(["report", str(out), "--check"]) == 0
        assert "reproduced exactly" in capsys.readouterr().out

    def test_report_detects_tampering(self, tmp_cwd):
        assert main(["run", *SMALL, "--variants", "blocking,no-blocking", "--out", "res"]) == 0
        path = tmp_cwd / "res" / "summary.json"
        path.write_text(path.read_text().replace('"trials": 3', '"trials": 4', 1))
        assert main(["report", str(tmp_cwd / "res"), "--check"]) == 1

    def test_byte_identical_reruns(self, tmp_cwd):
        for out in ("a", "b"):
            assert main(["run", *SMALL, "--out", out]) == 0
        for name in ("curves.csv", "tau.csv", "events.jsonl", "summary.json", "arms.csv"):
            assert (tmp_cwd / "a" / name).read_bytes() == (tmp_cwd / "b" / name).read_bytes(), name

    def test_workers_do_not_change_output(self, tmp_cwd):
        assert main(["run", *SMALL, "--events", "false", "--out", "a"]) == 0
        assert main(["run", *SMALL, "--events", "false", "--workers", "2", "--out", "b"]) == 0
        assert (tmp_cwd / "a" / "curves.csv").read_bytes() == (tmp_cwd / "b" / "curves.csv").read_bytes()

    def test_single_pull(self, tmp_cwd):
        summary = run_experiment(ExperimentSpec(n=3, m=1, K=6, T=1, trials=1, out="one"))
        rows = read_csv(tmp_cwd / "one" / "curves.csv")
        arms = [float(r["mean"]) for r in read_csv(tmp_cwd / "one" / "arms.csv")]
        gaps = {arms[0] - mu for mu in arms}
        assert {r["t"] for r in rows} == {"1"}
        assert all(float(r["cumulative_regret"]) in gaps for r in rows)
        assert summary["variants"]["blocking"]["trials"] == 1

    def test_events_file_verifies(self, tmp_cwd):
        run_experiment(ExperimentSpec(n=4, m=3, K=10, T=3000, trials=2, variants=("blocking",),
                                      baseline=None, out="ev"))
        records = [r for v, r in read_events(tmp_cwd / "ev" / "events.jsonl")]
        log = EventLog(records)
        assert log.blocks
        assert verify_event_log(log, 2.0) == []

    def test_means_file(self, tmp_cwd):
        (tmp_cwd / "means.txt").write_text("0.9\n0.5\n0.7\n0.2\n0.3\n")
        assert main(["run", "--n", "2", "--m", "1", "--T", "300", "--trials", "2", "--S", "1",
                     "--arms", "means.txt", "--out", "mf"]) == 0
        spec = json.loads((tmp_cwd / "mf" / "config.json").read_text())
        assert spec["K"] == 5
        means = [float(r["mean"]) for r in read_csv(tmp_cwd / "mf" / "arms.csv") if r["trial"] == "0"]
        assert means == [0.9, 0.7, 0.5, 0.3, 0.2]

    def test_recompute_matches_render(self, tmp_cwd):
        summary = run_experiment(ExperimentSpec(n=3, m=1, K=8, T=500, trials=2, out="rc"))
        assert render_summary(recompute_summary(tmp_cwd / "rc")) == render_summary(summary)


class TestSweepAndCheck:
    def test_sweep(self, tmp_cwd):
        argv = ["sweep", "--n", "3", "--T", "400", "--trials", "2", "--K", "8",
                "--variants", "blocking,no-blocking", "--grid-m", "0,2", "--grid-eta", "1.5,2", "--out", "sw"]
        assert main(argv) == 0
        rows = read_csv(tmp_cwd / "sw" / "sweep.csv")
        assert len(rows) == 8
        assert {(r["m"], r["eta"]) for r in rows} == {("0", "1.5"), ("0", "2.0"), ("2", "1.5"), ("2", "2.0")}
        assert all(r["relative_regret"] for r in rows if r["variant"] == "blocking")

    def test_check(self, capsys):
        assert main(["check", "--alpha", "2"]) == 0
        assert "FAILS" in capsys.readouterr().out


class TestExitCodes:
    def test_bad_value(self, capsys):
        assert main(["run", "--T", "abc"]) == 2
        assert "bad value" in capsys.readouterr().err

    def test_missing_config(self, tmp_cwd):
        assert main(["run", "missing.cfg"]) == 2

    def test_bad_means_file(self, tmp_cwd, capsys):
        (tmp_cwd / "m.txt").write_text("0.9\n1.2\n")
        assert main(["run", "--arms", "m.txt", "--T", "10", "--out", "x"]) == 2
        assert "m.txt:2" in capsys.readouterr().err

    def test_report_missing_dir(self, tmp_cwd):
        assert main(["report", "nowhere"]) == 2

    def test_unwritable_output(self, tmp_cwd):
        (tmp_cwd / "file").write_text("")
        assert main(["run", *SMALL, "--out", "file/sub"]) == 2

    def test_console_script(self, tmp_cwd):
        proc = subprocess.run([sys.executable, "-m", "robust_mab.cli", "check"], capture_output=True, text=True)
        assert proc.returncode == 0 and "alpha > 2.75: ok" in proc.stdout


def test_plugin_strategy(tmp_cwd, monkeypatch):
    (tmp_cwd / "my_strategies.py").write_text(
        "import robust_mab\n\n"
        "@robust_mab.register_strategy('always-last')\n"
        "def always_last(phase, target, obs, rng):\n"
        "    return obs.K - 1\n"
    )
    monkeypatch.syspath_prepend(str(tmp_cwd))
    argv = ["run", *SMALL, "--plugins", "my_strategies", "--strategy", "always-last",
            "--variants", "no-blocking", "--baseline", "none", "--out", "pl"]
    assert main(argv) == 0
    recs = {r.rec_arm for v, r in read_events(tmp_cwd / "pl" / "events.jsonl")
            if r.kind == "contact" and r.peer >= 4}
    assert recs == {9}
