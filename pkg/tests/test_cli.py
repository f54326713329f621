import json

import pytest

from structcox.cli import EXIT_CONFIG, EXIT_INVARIANT, EXIT_NONCONVERGED, EXIT_OK, main


def _write(path, obj):
    path.write_text(json.dumps(obj))
    return str(path)


def test_simulate_is_deterministic(tmp_path, capsys):
    cfg = _write(tmp_path / "c.json", {"seed": 3, "simulation": {"n": 100, "p": 2, "s": 0}})
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path / "a")]) == EXIT_OK
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path / "b")]) == EXIT_OK
    a = (tmp_path / "a" / "data.csv").read_bytes()
    assert a == (tmp_path / "b" / "data.csv").read_bytes()
    rows = [l for l in a.decode().splitlines() if not l.startswith("#")]
    assert len(rows) == 101
    summary = json.loads((tmp_path / "a" / "summary.json").read_text())
    assert {"config_hash", "seed", "tool_version"} <= set(summary)


def test_seed_flag_overrides(tmp_path):
    cfg = _write(tmp_path / "c.json", {"seed": 3, "simulation": {"n": 20, "p": 1}})
    main(["simulate", "--config", cfg, "--out", str(tmp_path / "a")])
    main(["simulate", "--config", cfg, "--out", str(tmp_path / "b"), "--seed", "4"])
    assert (tmp_path / "a" / "data.csv").read_text() != (tmp_path / "b" / "data.csv").read_text()


@pytest.mark.parametrize("sim, field", [
    ({"n": 0, "p": 2}, "simulation.n"),
    ({"n": 10, "p": 2, "colour": 1}, "colour"),
    ({"n": 10, "p": 2, "s": 5}, "simulation.s"),
])
def test_simulate_config_errors(tmp_path, capsys, sim, field):
    cfg = _write(tmp_path / "c.json", {"simulation": sim})
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path)]) == EXIT_CONFIG
    assert field in capsys.readouterr().err


def test_missing_and_malformed_config(tmp_path):
    assert main(["simulate", "--config", str(tmp_path / "nope.json")]) == EXIT_CONFIG
    (tmp_path / "bad.json").write_text("{")
    assert main(["simulate", "--config", str(tmp_path / "bad.json")]) == EXIT_CONFIG
    assert main(["simulate"]) == EXIT_CONFIG


def _hand_data(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("time,status,x1\n3,1,0.5\n1,0,0.2\n2,1,0.9\n")
    return str(p)


def test_fit_above_threshold_gives_zero(tmp_path):
    cfg = _write(tmp_path / "c.json", {"dictionary": {"family": "step", "d": 2},
                                       "penalty": {"gamma": 2, "lambda": 10.0}})
    out = tmp_path / "o"
    assert main(["fit", "--config", cfg, "--data", _hand_data(tmp_path), "--out", str(out)]) == EXIT_OK
    rep = json.loads((out / "fit.json").read_text())
    assert rep["beta_hat"] == [0.0, 0.0] and rep["converged"] and rep["kkt_residual"] == 0
    assert {"beta_hat", "active_groups", "objective", "kkt_residual", "iterations", "converged", "lambda",
            "rule_audit", "config_hash", "seed", "tool_version"} <= set(rep)


def test_fit_grid_writes_one_report_per_point(tmp_path):
    cfg = _write(tmp_path / "c.json", {"dictionary": {"family": "polynomial", "d": 2},
                                       "penalty": {"lambda_grid": [0.5, 0.1, 0.01]}})
    out = tmp_path / "o"
    main(["fit", "--config", cfg, "--data", _hand_data(tmp_path), "--out", str(out)])
    assert sorted(p.name for p in out.glob("fit_*.json")) == ["fit_000.json", "fit_001.json", "fit_002.json"]


def test_fit_rule_records_audit(tmp_path):
    cfg = _write(tmp_path / "c.json", {"penalty": {"rule": {"rule": "theorem1", "A": 0.01}}})
    out = tmp_path / "o"
    main(["fit", "--config", cfg, "--data", _hand_data(tmp_path), "--out", str(out)])
    rep = json.loads((out / "fit.json").read_text())
    assert rep["rule_audit"]["rule"] == "theorem1" and rep["lambda"] == rep["rule_audit"]["value"]


def test_fit_separable_unpenalised_exits_3(tmp_path):
    data = tmp_path / "s.csv"
    data.write_text("time,status,x1\n1,1,0.9\n2,1,0.5\n3,1,0.1\n")
    cfg = _write(tmp_path / "c.json", {"dictionary": {"family": "polynomial", "d": 2},
                                       "penalty": {"gamma": 1, "lambda": 0.0}, "fit": {"max_iters": 100}})
    out = tmp_path / "o"
    assert main(["fit", "--config", cfg, "--data", str(data), "--out", str(out)]) == EXIT_NONCONVERGED
    assert not json.loads((out / "fit.json").read_text())["converged"]


def test_fit_config_errors(tmp_path):
    data = _hand_data(tmp_path)
    bad = [
        {"penalty": {"gamma": 2}},
        {"penalty": {"lambda": 1, "extra": 2}},
        {"dictionary": {"family": "fourier", "d": 2}, "penalty": {"lambda": 1}},
        {"penalty": {"lambda": 1}, "fit": {"tol": -1}},
    ]
    for k, obj in enumerate(bad):
        cfg = _write(tmp_path / f"c{k}.json", obj)
        assert main(["fit", "--config", cfg, "--data", data, "--out", str(tmp_path)]) == EXIT_CONFIG
    cfg = _write(tmp_path / "ok.json", {"penalty": {"lambda": 1}})
    assert main(["fit", "--config", cfg, "--out", str(tmp_path)]) == EXIT_CONFIG
    assert main(["fit", "--config", cfg, "--data", str(tmp_path / "missing.csv")]) == EXIT_CONFIG


def test_fit_smooth_and_overlap(tmp_path):
    data = _hand_data(tmp_path)
    cfg = _write(tmp_path / "s.json", {"dictionary": {"family": "bspline", "d": 4},
                                       "penalty": {"lambda": 0.05, "smooth": {"eps_R": 1e-2}}})
    assert main(["fit", "--config", cfg, "--data", data, "--out", str(tmp_path / "s")]) in (EXIT_OK,
                                                                                            EXIT_NONCONVERGED)
    assert (tmp_path / "s" / "fit.json").exists()
    cfg = _write(tmp_path / "o.json", {"dictionary": {"family": "polynomial", "d": 3},
                                       "penalty": {"lambda": 0.05, "groups": [[0, 1], [1, 2]]},
                                       "fit": {"mode": "overlap-latent"}})
    assert main(["fit", "--config", cfg, "--data", data, "--out", str(tmp_path / "o")]) == EXIT_OK


def test_verify_unknown_suite(tmp_path):
    assert main(["verify", "bogus", "--out", str(tmp_path)]) == EXIT_CONFIG


def test_verify_unknown_option(tmp_path):
    cfg = _write(tmp_path / "c.json", {"lemma1": {"nope": 1}})
    assert main(["verify", "lemma1", "--config", cfg, "--out", str(tmp_path)]) == EXIT_CONFIG


def test_verify_lemma1_passes(tmp_path):
    cfg = _write(tmp_path / "c.json", {"lemma1": {"n_samples": 2000}})
    assert main(["verify", "lemma1", "--config", cfg, "--out", str(tmp_path)]) == EXIT_OK
    rep = json.loads((tmp_path / "verify_lemma1.json").read_text())
    assert rep["failures"] == [] and rep["suite"] == "lemma1"


def test_verify_rate_small_grid_csv(tmp_path):
    cfg = _write(tmp_path / "c.json", {"rate": {"n_grid": [100, 200], "replicates": 2, "p": 5, "s": 1}})
    main(["verify", "rate", "--config", cfg, "--out", str(tmp_path)])
    text = (tmp_path / "rate.csv").read_text()
    assert text.startswith("# config_hash")
    rep = json.loads((tmp_path / "verify_rate.json").read_text())
    assert isinstance(rep["slope"], float)


def test_verify_sandwich_reports_literal_violations(tmp_path):
    # the literal two-sided bound is violated on random instances, so the suite exits 4
    cfg = _write(tmp_path / "c.json", {"sandwich": {"instances": 200}})
    assert main(["verify", "sandwich", "--config", cfg, "--out", str(tmp_path)]) == EXIT_INVARIANT
    rep = json.loads((tmp_path / "verify_sandwich.json").read_text())
    assert rep["violations"] > 0 and rep["anchored_violations"] == 0 and rep["norm_form_gap"] <= 1e-10
