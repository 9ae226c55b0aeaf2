import json
import pathlib

import pytest

from statrg.cli import SUBCOMMANDS, run_cli
from statrg.config import ConfigError, build_experiment, load_config, validate_config

CONFIGS = pathlib.Path(__file__).resolve().parent.parent / "configs"
SELECT = str(CONFIGS / "select_fixture.json")


def write(tmp_path, cfg, name="c.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return str(p)


@pytest.mark.parametrize("path", sorted(CONFIGS.glob("*.json")), ids=lambda p: p.name)
def test_shipped_configs_validate(path):
    validate_config(load_config(path), str(path))


class TestValidation:
    def test_missing_file(self, capsys):
        assert run_cli(["select", "--config", "/nonexistent/x.json"]) == 2
        assert "/nonexistent/x.json" in capsys.readouterr().err

    def test_bad_json(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text("{nope")
        with pytest.raises(ConfigError):
            load_config(p)

    def test_unknown_key(self, tmp_path, capsys):
        cfg = json.loads(pathlib.Path(SELECT).read_text())
        cfg["rule"]["tua"] = 1.2
        assert run_cli(["select", "--config", write(tmp_path, cfg)]) == 2
        assert "tua" in capsys.readouterr().err

    def test_version_required(self, tmp_path):
        cfg = json.loads(pathlib.Path(SELECT).read_text())
        del cfg["schema_version"]
        with pytest.raises(ConfigError, match="schema_version"):
            validate_config(cfg)

    def test_tau_domain_names_field(self, tmp_path):
        cfg = json.loads(pathlib.Path(SELECT).read_text())
        cfg["rule"]["tau"] = 0.5
        with pytest.raises(ConfigError, match="tau"):
            validate_config(cfg)

    def test_missing_subcommand_field(self, tmp_path, capsys):
        cfg = json.loads(pathlib.Path(SELECT).read_text())
        del cfg["delta"]
        assert run_cli(["select", "--config", write(tmp_path, cfg)]) == 2
        assert "delta" in capsys.readouterr().err

    def test_seed_override(self):
        cfg = load_config(CONFIGS / "mc_benchmark.json")
        assert build_experiment(cfg).seed == 2024
        assert build_experiment(cfg, seed=3).seed == 3


class TestCommands:
    def test_parser_lists_all(self):
        assert set(SUBCOMMANDS) == {"axioms", "kn-check", "select", "mc", "rate", "concentration", "lemmas"}

    def test_axioms_single(self, capsys):
        assert run_cli(["axioms", "--scheme", "tikhonov"]) == 0
        assert "PASS" in capsys.readouterr().out

    def test_axioms_all(self, tmp_path):
        out = tmp_path / "ax.csv"
        assert run_cli(["axioms", "--out", str(out)]) == 0
        assert len(out.read_text().splitlines()) == 6

    def test_select_fixture(self, capsys, tmp_path):
        out = tmp_path / "trace.csv"
        assert run_cli(["select", "--config", SELECT, "--out", str(out)]) == 0
        assert capsys.readouterr().out.strip() == "alpha=0.25 stop=Regular steps=3"
        lines = out.read_text().splitlines()
        assert lines[0] == "k,alpha,misfit,regular_threshold,emergency_lhs,emergency_rhs"
        assert len(lines) == 1 + 3

    def test_kn_check_csv(self, tmp_path):
        out = tmp_path / "kn.csv"
        assert run_cli(["kn-check", "--config", str(CONFIGS / "kn_check.json"), "--out", str(out)]) == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "alpha,lhs,rhs,ratio"
        assert len(lines) > 2

    def test_kn_check_projector(self):
        assert run_cli(["kn-check", "--projector", "--config", str(CONFIGS / "kn_check.json")]) == 0

    def test_kn_check_fails_on_adversarial(self, tmp_path):
        cfg = {"schema_version": 1, "spectrum": {"kind": "power", "a": 1.0, "J": 50},
               "solution": {"kind": "explicit", "coefficients": [0.0] * 49 + [1.0]},
               "scheme": "tsvd", "kn": {"c1": 4.0, "c2": 0.25, "t0": 0.1}}
        assert run_cli(["kn-check", "--config", write(tmp_path, cfg)]) == 1

    def test_mc_repeatable_and_json(self, tmp_path):
        cfg = load_config(CONFIGS / "mc_benchmark.json")
        cfg["replicates"] = 20
        path = write(tmp_path, cfg)
        a, b, j = tmp_path / "a.csv", tmp_path / "b.csv", tmp_path / "r.json"
        assert run_cli(["mc", "--config", path, "--out", str(a)]) == 0
        assert run_cli(["mc", "--config", path, "--out", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()
        assert run_cli(["mc", "--config", path, "--out", str(j), "--format", "json"]) == 0
        data = json.loads(j.read_text())
        assert "created" in data["metadata"]
        c = tmp_path / "c.csv"
        assert run_cli(["mc", "--config", path, "--out", str(c), "--seed", "1"]) == 0
        assert c.read_bytes() != a.read_bytes()

    def test_concentration_needs_replicates(self, tmp_path, capsys):
        cfg = load_config(CONFIGS / "concentration.json")
        cfg["replicates"] = 10
        assert run_cli(["concentration", "--config", write(tmp_path, cfg)]) == 2
        assert "replicates" in capsys.readouterr().err

    def test_lemmas(self, tmp_path):
        out = tmp_path / "l.csv"
        assert run_cli(["lemmas", "--config", str(CONFIGS / "lemmas.json"), "--out", str(out)]) == 0
        assert out.read_text().splitlines()[0] == "lemma,checks,failures,worst_ratio,passed"

    def test_rate_short_ladder(self, tmp_path):
        cfg = load_config(CONFIGS / "rate.json")
        cfg["delta_ladder"] = [0.01, 0.001]
        assert run_cli(["rate", "--config", write(tmp_path, cfg)]) == 2

    def test_unwritable_output(self):
        assert run_cli(["select", "--config", SELECT, "--out", "/nonexistent/dir/t.csv"]) == 2

    def test_bad_arguments(self):
        assert run_cli(["select", "--format", "xml"]) == 2
        assert run_cli([]) == 2

    def test_config_required(self, capsys):
        assert run_cli(["mc"]) == 2
        assert "--config" in capsys.readouterr().err
