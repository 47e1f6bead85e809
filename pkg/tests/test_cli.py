import csv
import json

import pytest

from seqate import cli, montecarlo
from seqate.population import PotentialOutcomes, write_population


@pytest.fixture
def tiny(tmp_path):
    path = tmp_path / "tiny.csv"
    write_population(PotentialOutcomes([1.0, 2.0, -0.5], [3.0, 5.0, 0.25]), path)
    return path


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_analytics_efron(capsys):
    assert cli.main(["analytics", "--efron-eta", "0.7"]) == 0
    out = capsys.readouterr().out
    assert "p1star=0.440120" in out
    assert "p2star=0.559880" in out
    assert "pi0=0.285714" in out


def test_analytics_moments_and_pmf_file(capsys, tmp_path):
    argv = ["analytics", "--efron-eta", "0.7", "--m0-sq", "2.5", "--m1-sq", "17", "--m01", "6.5",
            "--sigma0-sq", "0.25", "--sigma1-sq", "1", "--gamma", "0.5", "--out", str(tmp_path)]
    assert cli.main(argv) == 0
    out = capsys.readouterr().out
    assert "wei[oracle]: V_ipw=32.500000  V_aipw=2.250000" in out
    assert "V_aipw=2.590136" in out
    assert (tmp_path / "stationary_pmf_eta0.7.csv").exists()


def test_analytics_fair_coin_and_errors(capsys):
    assert cli.main(["analytics", "--efron-eta", "0.5"]) == 0
    assert "Bernoulli" in capsys.readouterr().out
    assert cli.main(["analytics"]) == 2
    assert cli.main(["analytics", "--efron-eta", "1.2"]) == 2
    assert "efron-eta" in capsys.readouterr().err


def test_enumerate_tiny(capsys, tiny):
    argv = ["enumerate", "--pop", str(tiny), "--design", "efron", "--eta", "0.7",
            "--estimator", "aipw"]
    assert cli.main(argv) == 0
    vals = dict(line.split("=") for line in capsys.readouterr().out.split())
    assert abs(float(vals["expectation"]) - float(vals["tau_bar"])) < 1e-12


def test_enumerate_missing_file(capsys, tmp_path):
    assert cli.main(["enumerate", "--pop", str(tmp_path / "nope.csv")]) == 2
    assert "pop" in capsys.readouterr().err


def test_run_writes_twenty_rows(tmp_path, capsys):
    out = tmp_path / "res"
    argv = ["run", "--design", "wei", "--dgp", "logadditive", "--n", "200", "--reps", "100",
            "--levels", "0.75:0.99:20", "--seed", "7", "--out", str(out)]
    assert cli.main(argv) == 0
    rows = _rows(out / "coverage.csv")
    for est in ("ipw", "aipw"):
        assert sum(r["estimator"] == est for r in rows) == 20
    summary = json.loads((out / "summary.json").read_text())
    assert summary["config"]["dgp"] == "logadditive"
    assert summary["config"]["master_seed"] == 7
    timing = json.loads((out / "timing.json").read_text())
    assert timing["workers"] >= 1 and timing["runtime_seconds"] >= 0
    assert "tau_bar=" in capsys.readouterr().out


@pytest.mark.parametrize("argv,field", [
    (["run", "--n", "1"], "n"),
    (["run", "--levels", "0.9,0.8"], "levels"),
    (["run", "--levels", "a:b:c"], "levels"),
    (["run", "--reps", "0"], "reps"),
    (["run", "--workers", "0"], "workers"),
    (["run", "--dgp", "file"], "population_file"),
])
def test_run_usage_errors(argv, field, tmp_path, capsys):
    assert cli.main(argv + ["--out", str(tmp_path)]) == 2
    assert field in capsys.readouterr().err


def test_unknown_flag_and_missing_subcommand(capsys):
    assert cli.main(["run", "--bogus", "1"]) == 2
    assert cli.main([]) == 2


def test_unwritable_out(tmp_path, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert cli.main(["run", "--n", "50", "--reps", "5", "--out", str(blocker / "sub")]) == 2
    assert "out" in capsys.readouterr().err


def test_runtime_error_exit_code(monkeypatch, tmp_path, capsys):
    def boom(*a, **k):
        raise RuntimeError("kaput")
    monkeypatch.setattr(cli, "simulate", boom)
    assert cli.main(["run", "--n", "50", "--reps", "5", "--out", str(tmp_path)]) == 3
    assert "kaput" in capsys.readouterr().err


def test_config_file_and_flag_override(tmp_path):
    cfg = tmp_path / "scenario.cfg"
    cfg.write_text("# desk check\n"
                   "design = efron\n"
                   "efron.eta = 0.8\n"
                   "dgp = additive\n"
                   "tau = 4\n"
                   "n = 300\n"
                   "reps = 40\n"
                   "levels = 0.9,0.95\n"
                   "estimator = aipw\n"
                   "population-mode = fixed\n"
                   "seed = 3\n"
                   "workers = 1\n")
    out = tmp_path / "o"
    assert cli.main(["run", "--config", str(cfg), "--n", "120", "--out", str(out)]) == 0
    echo = json.loads((out / "summary.json").read_text())["config"]
    assert echo["n"] == 120
    assert echo["design"] == "efron" and echo["eta"] == 0.8
    assert echo["tau"] == 4.0 and echo["reps"] == 40
    assert echo["levels"] == [0.9, 0.95]
    assert echo["estimators"] == ["aipw"]
    assert len(_rows(out / "coverage.csv")) == 2


def test_json_config_file(tmp_path):
    cfg = tmp_path / "scenario.json"
    cfg.write_text(json.dumps({"design": "bernoulli", "p": 0.3, "n": 100, "reps": 10,
                               "levels": "0.8:0.9:3", "estimator": "both"}))
    out = tmp_path / "o"
    assert cli.main(["run", "--config", str(cfg), "--out", str(out)]) == 0
    echo = json.loads((out / "summary.json").read_text())["config"]
    assert echo["design"] == "bernoulli" and echo["p"] == 0.3
    assert echo["levels"] == [0.8, 0.85, 0.9]


def test_config_unknown_key(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("colour = blue\n")
    assert cli.main(["run", "--config", str(cfg), "--out", str(tmp_path)]) == 2
    assert "colour" in capsys.readouterr().err


def test_every_flag_has_file_equivalent():
    flags = {"design": "wei", "eta": 0.7, "delta": 0.01, "p": 0.5, "dgp": "nonadditive",
             "tau": 10.0, "c": 2.0, "n": 100, "reps": 5, "levels": "0.9",
             "estimator": "ipw", "stability": "strong", "limits": "known",
             "population_mode": "fixed", "seed": 1}
    from_file = cli.build_config({k: str(v) for k, v in flags.items()}, {})
    from_flags = cli.build_config({}, dict(flags, levels=cli.parse_levels("0.9"),
                                           estimator="ipw"))
    assert from_file == from_flags


def test_file_population_run(tiny, tmp_path):
    out = tmp_path / "o"
    assert cli.main(["run", "--dgp", "file", "--pop", str(tiny), "--reps", "20",
                     "--levels", "0.95", "--out", str(out)]) == 0
    assert json.loads((out / "summary.json").read_text())["config"]["n"] == 3


def test_parse_levels():
    lv = cli.parse_levels("0.75:0.99:20")
    assert len(lv) == 20 and lv[0] == 0.75 and lv[-1] == 0.99
    assert cli.parse_levels("0.9, 0.95") == (0.9, 0.95)
    with pytest.raises(cli.UsageError):
        cli.parse_levels("0.9:0.95")


def test_replicate_paper_smoke(monkeypatch, tmp_path, capsys):
    monkeypatch.setitem(montecarlo.PRESETS, "desk", {"n": 100, "reps": 30})
    argv = ["replicate-paper", "--preset", "desk", "--levels", "0.9,0.95", "--seed", "2",
            "--workers", "1", "--out", str(tmp_path)]
    assert cli.main(argv) == 0
    for name in ("fig1_wei_coverage.csv", "fig2_wei_length.csv", "fig3_efron_coverage.csv",
                 "fig4_efron_length.csv"):
        rows = _rows(tmp_path / name)
        assert len(rows) == 3 * 2 * 2
    assert (tmp_path / "efron_additive_summary.json").exists()
    assert cli.main(["replicate-paper", "--preset", "galactic", "--out", str(tmp_path)]) == 2
