import json

import pytest

from randprod import cli, scenarios

SMALL = ["--horizon", "400", "--paths", "8"]


def run(tmp_path, *args):
    return cli.main(list(args) + ["--out", str(tmp_path)])


def test_list_scenarios(capsys):
    assert cli.main(["list-scenarios"]) == 0
    out = capsys.readouterr().out
    for name in ("identity", "gaussian-decay-q2", "gaussian-harmonic", "uniform-ball", "exp-gaussian", "haar-c4"):
        assert name in out
    assert "classical-harmonic-signs" in out


def test_analyze_identity(tmp_path):
    assert run(tmp_path, "analyze", "--scenario", "identity") == 0
    doc = json.loads((tmp_path / "identity.analyze.json").read_text())
    assert doc["report"]["overall"] == "Converges"
    assert doc["config"]["policy"]["m_star"] == 500


def test_analyze_decisive_builtins(tmp_path):
    assert run(tmp_path, "analyze", "--scenario", "gaussian-decay-q2") == 0
    doc = json.loads((tmp_path / "gaussian-decay-q2.analyze.json").read_text())
    assert doc["report"]["overall"] == "Converges"
    assert run(tmp_path, "analyze", "--scenario", "haar-c4") == 0
    doc = json.loads((tmp_path / "haar-c4.analyze.json").read_text())
    assert doc["report"]["overall"] == "Diverges" and doc["report"]["g1"]["status"] == "Diverges"


def test_report_lists_all_defaults(tmp_path):
    run(tmp_path, "analyze", "--scenario", "identity")
    policy = json.loads((tmp_path / "identity.analyze.json").read_text())["config"]["policy"]
    assert set(policy) == set(scenarios.POLICY_DEFAULTS)


WANDERING = """
name = "wandering-drift"
dim = 2
[chart]
kind = "exponential"
r = 0.3
[law]
variant = "atomic"
atoms = [[[1.2, 0.1], [0.0, 0.9]], [[0.9, 0.0], [0.2, 1.1]]]
probs = [0.5, 0.5]
n_dependence = "power"
q = 0.75
[policy]
horizon = 200
paths = 16
"""


def test_inconclusive_exit_codes(tmp_path, capsys):
    cfg = tmp_path / "wander.toml"
    cfg.write_text(WANDERING)
    assert run(tmp_path, "analyze", "--config", str(cfg)) == 2
    doc = json.loads((tmp_path / "wandering-drift.analyze.json").read_text())
    assert doc["report"]["g2"]["status"] == "Inconclusive"
    assert run(tmp_path, "verify", "--config", str(cfg)) == 2
    assert "UNDECIDED" in capsys.readouterr().out


def test_config_errors_name_the_field(tmp_path, capsys):
    cfg = tmp_path / "bad.toml"
    cfg.write_text('name = "x"\ndim = 2\n[chart]\nkind = "affine"\nr = 0.5\n[law]\nvariant = "gaussian"\nsigma = -1.0\n')
    assert run(tmp_path, "analyze", "--config", str(cfg)) == 1
    assert "law.sigma" in capsys.readouterr().err
    cfg.write_text('name = "x"\ndim = 2\n[chart]\nkind = "affine"\nr = 1.5\n[law]\nvariant = "gaussian"\nsigma = 1.0\n')
    assert run(tmp_path, "analyze", "--config", str(cfg)) == 1
    assert "chart.r" in capsys.readouterr().err
    assert run(tmp_path, "analyze", "--scenario", "nope") == 1
    assert run(tmp_path, "analyze", "--config", str(tmp_path / "missing.toml")) == 1
    assert run(tmp_path, "analyze") == 1


def test_simulate_identity(tmp_path, capsys):
    assert run(tmp_path, "simulate", "--scenario", "identity", "--seed", "123") == 0
    assert "converged_fraction 1" in capsys.readouterr().out
    header = (tmp_path / "identity.traces.csv").read_text().splitlines()[0]
    assert header == "path,n,x11,x12,x21,x22,D_m"


def test_simulate_haar(tmp_path):
    assert run(tmp_path, "simulate", "--scenario", "haar-c4", "--paths", "64") == 0
    doc = json.loads((tmp_path / "haar-c4.simulate.json").read_text())
    assert doc["verdict"]["converged_fraction"] == 0.0


def test_simulate_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert run(d, "simulate", "--scenario", "gaussian-harmonic", *SMALL, "--seed", "5") == 0
    assert (a / "gaussian-harmonic.traces.csv").read_bytes() == (b / "gaussian-harmonic.traces.csv").read_bytes()
    assert (a / "gaussian-harmonic.simulate.json").read_bytes() == (b / "gaussian-harmonic.simulate.json").read_bytes()


def test_analyze_round_trip(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        run(d, "analyze", "--scenario", "uniform-ball")
    assert (a / "uniform-ball.analyze.json").read_bytes() == (b / "uniform-ball.analyze.json").read_bytes()


def test_verify_agree(tmp_path, capsys):
    assert run(tmp_path, "verify", "--scenario", "classical-harmonic-signs") == 0
    assert "AGREE" in capsys.readouterr().out
    assert run(tmp_path, "verify", "--scenario", "haar-c4", "--paths", "64") == 0


def test_agreement_policy():
    from randprod.three_series import Status

    assert cli.agreement(Status.INCONCLUSIVE, 1.0) == "UNDECIDED"
    assert cli.agreement(Status.INCONCLUSIVE, 0.0) == "UNDECIDED"
    assert cli.agreement(Status.CONVERGES, 0.5) == "UNDECIDED"
    assert cli.agreement(Status.CONVERGES, 0.97) == "AGREE"
    assert cli.agreement(Status.DIVERGES, 0.97) == "DISAGREE"


@pytest.mark.xfail(strict=True, reason="eps=1e-3 sits below the tail fluctuation scale at m_star=N/2; see notes")
def test_simulate_gaussian_decay_fraction(tmp_path):
    run(tmp_path, "simulate", "--scenario", "gaussian-decay-q2")
    doc = json.loads((tmp_path / "gaussian-decay-q2.simulate.json").read_text())
    assert doc["verdict"]["converged_fraction"] >= 0.99
