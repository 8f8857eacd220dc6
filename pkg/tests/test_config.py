import pytest

from volterra_mv import ConfigError
from volterra_mv.config import parse_flat, validate_config

MINIMAL = """
[experiment]
kind = simulate

[kernel1]
family = constant
c = 1.0

[kernel2]
family = constant
c = 1.0
"""


class TestParser:
    def test_sections_and_values(self):
        data, issues = parse_flat(
            '[a]\nx = 1\ny = 2.5\nz = "text"\nflag = true\nlist = [1, 2e-3, 5]\n'
        )
        assert not issues
        assert data["a"]["x"] == 1
        assert data["a"]["y"] == 2.5
        assert data["a"]["z"] == "text"
        assert data["a"]["flag"] is True
        assert data["a"]["list"] == [1, 2e-3, 5]

    def test_comments_and_blanks(self):
        data, issues = parse_flat("# top\n[a]\n; note\nx = 1\n\n")
        assert not issues and data["a"]["x"] == 1

    def test_parse_errors_carry_position(self):
        _, issues = parse_flat("[a\nx = 1\n")
        assert any("line 1" in i for i in issues)
        _, issues = parse_flat("[a]\njust a line\n")
        assert any("line 2" in i for i in issues)
        _, issues = parse_flat("x = 1\n")
        assert any("outside any [section]" in i for i in issues)

    def test_duplicate_sections_merge(self):
        data, issues = parse_flat("[run]\nseed = 1\n[run]\nseed = 2\n")
        assert not issues and data["run"]["seed"] == 2


class TestValidation:
    def test_minimal_config_defaults(self):
        cfg = validate_config(MINIMAL)
        assert cfg.kind == "simulate"
        assert cfg.grid.horizon == 1.0 and cfg.grid.n_steps == 100
        assert cfg.n_particles == 1000
        assert cfg.seed == 0
        assert cfg.eps_list == [1.0]
        assert cfg.coeffs.d == 1

    def test_eps_range_message(self):
        text = MINIMAL + "\n[run]\neps = 1.5\n"
        with pytest.raises(ConfigError) as err:
            validate_config(text)
        assert "run.eps[0] must lie in (0,1]" in err.value.issues

    def test_unknown_family_names_alternatives(self):
        text = MINIMAL.replace("family = constant\nc = 1.0\n\n[kernel2]",
                               "family = gauss\n\n[kernel2]")
        with pytest.raises(ConfigError) as err:
            validate_config(text)
        assert any(
            "unknown kernel family" in i and "constant, power, fbm, tabulated" in i
            for i in err.value.issues
        )

    def test_all_errors_reported_at_once(self):
        text = """
[experiment]
kind = simulate
[kernel1]
family = gauss
[grid]
T = -1
n_steps = 1
[run]
N = 0
eps = 1.5
seed = 3
"""
        with pytest.raises(ConfigError) as err:
            validate_config(text)
        issues = err.value.issues
        assert len(issues) >= 5
        assert any("grid.T" in i for i in issues)
        assert any("grid.n_steps" in i for i in issues)
        assert any("run.N" in i for i in issues)
        assert any("run.eps[0]" in i for i in issues)
        assert any("kernel1.family" in i for i in issues)

    def test_unknown_kind(self):
        text = MINIMAL.replace("kind = simulate", "kind = frobnicate")
        with pytest.raises(ConfigError) as err:
            validate_config(text)
        assert any("experiment.kind" in i for i in err.value.issues)

    def test_rate_kinds_need_target(self):
        text = MINIMAL.replace("kind = simulate", "kind = mdp-rate")
        with pytest.raises(ConfigError) as err:
            validate_config(text)
        assert any("rate.target_csv" in i for i in err.value.issues)

    def test_model_parameters_flow_through(self):
        text = MINIMAL + "\n[model]\nname = linear_mean_field\nA = 2.0\nxi = 1.5\n"
        cfg = validate_config(text)
        assert cfg.xi[0] == 1.5
        import numpy as np
        from volterra_mv import EmpiricalMeasure

        drift = cfg.coeffs.drift(0.0, np.array([[1.0]]), EmpiricalMeasure.dirac([0.0]))
        assert drift[0, 0] == 2.0

    def test_sha_changes_with_text(self):
        a = validate_config(MINIMAL)
        b = validate_config(MINIMAL + "\n# comment\n")
        assert a.sha256 != b.sha256
