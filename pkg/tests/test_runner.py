import json
import shutil
from pathlib import Path

import pytest

from gsqc.cli import EXIT_ASSERT, EXIT_CONFIG, EXIT_OK, EXIT_RESOURCE, main
from gsqc.runner import ConfigError, config_hash, execute, load_config, normalize_config

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def test_fig2_config_runs(tmp_path, capsys):
    assert main(["run", str(CONFIGS / "fig2.toml"), "--out", str(tmp_path)]) == EXIT_OK
    out = capsys.readouterr().out
    assert out.startswith("PASS final_row_fidelity")
    report = json.loads((tmp_path / "fig2.report.json").read_text())
    assert report["passed"] and report["dim"] == 36
    manifest = json.loads((tmp_path / "fig2.manifest.json").read_text())
    assert "fig2.rows.csv" in manifest["artifacts"]
    assert manifest["config_sha256"] == config_hash(load_config(CONFIGS / "fig2.toml"))


@pytest.mark.parametrize("name", ["fig2", "splitting", "nonunitary", "manybody", "teleport_small"])
def test_artifacts_are_deterministic(tmp_path, name):
    cfg = load_config(CONFIGS / f"{name}.toml")
    a, b = execute(cfg, tmp_path / "a"), execute(cfg, tmp_path / "b")
    assert a.passed and b.passed
    names = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert names == sorted(p.name for p in (tmp_path / "b").iterdir())
    for n in names:
        ta, tb = (tmp_path / "a" / n).read_bytes(), (tmp_path / "b" / n).read_bytes()
        if n.endswith(".manifest.json"):
            ta = ta.replace(str(tmp_path / "a").encode(), b"OUT")
            tb = tb.replace(str(tmp_path / "b").encode(), b"OUT")
        assert ta == tb, n


def test_relative_circuit_path(tmp_path):
    shutil.copy(CONFIGS / "fig2.circ", tmp_path / "prog.circ")
    (tmp_path / "c.toml").write_text('experiment = "simulate"\n[params]\ncircuit = "prog.circ"\n')
    assert execute(load_config(tmp_path / "c.toml"), tmp_path / "out").passed


@pytest.mark.parametrize(
    "raw, fragment",
    [
        ({"experiment": "nope"}, "unknown experiment"),
        ({"experiment": "simulate", "colour": 1}, "unknown top-level"),
        ({"experiment": "simulate", "seed": "x"}, "seed"),
    ],
)
def test_normalize_errors(raw, fragment):
    with pytest.raises(ConfigError, match=fragment):
        normalize_config(raw)


def test_unknown_param_is_rejected(tmp_path):
    cfg = normalize_config({"experiment": "manybody", "params": {"n_step": [1]}})
    with pytest.raises(ConfigError, match="n_step"):
        execute(cfg, tmp_path)


def test_bad_toml(tmp_path):
    (tmp_path / "bad.toml").write_text("experiment = \n")
    with pytest.raises(ConfigError):
        load_config(tmp_path / "bad.toml")
    with pytest.raises(ConfigError, match="not found"):
        load_config(tmp_path / "missing.toml")


def test_exit_codes(tmp_path, capsys):
    out = str(tmp_path)
    assert main(["teleport", "--n-gates", "4", "--out", out]) == EXIT_RESOURCE
    assert main(["teleport", "--n-gates", "2", "--gates", "W,FOO", "--out", out]) == EXIT_CONFIG
    assert main(["simulate", str(tmp_path / "none.circ"), "--out", out]) == EXIT_CONFIG
    (tmp_path / "bad.circ").write_text("qubits 1\nstep FOO\n")
    assert main(["simulate", str(tmp_path / "bad.circ"), "--out", out]) == EXIT_CONFIG
    with pytest.raises(SystemExit) as exc:
        main(["gap-scan", "--kind", "bogus"])
    assert exc.value.code == 2
    # a declared check that cannot hold fails the run
    assert main(["gap-scan", "--values", "4", "8", "--delta", "0.5", "--out", out]) == EXIT_ASSERT
    err = capsys.readouterr().err
    assert "exceeds budget" in err and "unknown gates" in err


def test_subcommands(tmp_path, capsys):
    out = str(tmp_path)
    assert main(["simulate", "fig2", "--out", out, "--dump-hamiltonian", "h.txt"]) == EXIT_OK
    assert (tmp_path / "h.txt").read_text().startswith("dim 36\n")
    assert main(["gap-scan", "--values", "4", "8", "16", "--out", out]) == EXIT_OK
    assert main(["gap-scan", "--kind", "nonunitary", "--values", "0.5", "2", "--out", out]) == EXIT_OK
    assert main(["nonunitary", "--n-steps", "8", "--out", out]) == EXIT_OK
    assert main(["manybody", "--n-steps", "1", "2", "--out", out]) == EXIT_OK
    assert main(["teleport", "--n-gates", "2", "--no-gap", "--out", out]) == EXIT_OK
    assert "PASS p_at_least_bound[lam=4]" in capsys.readouterr().out
