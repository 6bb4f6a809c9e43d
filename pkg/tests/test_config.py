"""Tests for run configuration parsing, presets, hashing and output directory resolution."""

import json
from pathlib import Path

import pytest

from hopfduet.config import (
    DEFAULT_OUTDIR,
    OUTDIR_ENV,
    apply_preset,
    config_hash,
    ic_list,
    jsonable,
    load_config,
    parse_config,
    resolve_output_dir,
)
from hopfduet.errors import ConfigError
from hopfduet.presets import reference_coefficients
from hopfduet.wc_model import wc_hopf_lambda, wc_period


class TestNormalFormBlock:
    """Coefficient sources of the nf block."""

    def test_preset(self):
        config = parse_config({"nf": {"preset": "table2-bsp-m003", "lam": 0.01, "eps": 0.05}})
        assert config.nf.coefficients == reference_coefficients("table2-bsp-m003")
        assert config.nf.source == "preset:table2-bsp-m003"
        assert (config.nf.lam, config.nf.eps) == (0.01, 0.05)

    def test_inline(self):
        config = parse_config({"nf": {"coefficients": {"omega": 1.0, "alpha01_re": -1.0, "alpha01_im": 0.2}}})
        assert config.nf.coefficients.alpha01 == -1.0 + 0.2j
        assert config.nf.source == "inline"

    def test_file_with_meta(self, tmp_path):
        data = dict(reference_coefficients("table2-bsp-p003").to_dict(), _meta={"command": "wc extract"})
        (tmp_path / "coeffs.json").write_text(json.dumps(data))
        config = parse_config({"nf": {"file": "coeffs.json"}}, base_dir=tmp_path)
        assert config.nf.coefficients == reference_coefficients("table2-bsp-p003")
        assert config.nf.source == "file:coeffs.json"

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="nf.file"):
            parse_config({"nf": {"file": "absent.json"}}, base_dir=tmp_path)

    def test_exactly_one_source(self):
        with pytest.raises(ConfigError, match="exactly one"):
            parse_config({"nf": {"lam": 0.1}})
        with pytest.raises(ConfigError, match="exactly one"):
            parse_config({"nf": {"preset": "table2-bsp-0", "coefficients": {"omega": 1.0}}})

    def test_negative_eps(self):
        with pytest.raises(ConfigError, match="nf.eps"):
            parse_config({"nf": {"preset": "table2-bsp-0", "eps": -0.1}})

    def test_subcritical_inline(self):
        with pytest.raises(ConfigError, match="supercritical"):
            parse_config({"nf": {"coefficients": {"omega": 1.0, "alpha01_re": 0.5, "alpha01_im": 0.0}}})

    def test_require(self):
        config = parse_config({})
        with pytest.raises(ConfigError, match="nf"):
            config.require_nf()
        with pytest.raises(ConfigError, match="wc"):
            config.require_wc()
        with pytest.raises(ConfigError, match="forcing"):
            config.require_forcing()


class TestWilsonCowanBlock:
    """Wilson-Cowan parameters and forcing."""

    def test_preset_defaults_to_threshold(self):
        config = parse_config({"wc": {"preset": "paperP", "b_sp": -0.03}})
        p = config.wc.params
        assert p.lambda_slope == pytest.approx(3.0236, abs=2e-3)
        assert p.b_sp == -0.03
        assert p.eps == 0.0

    def test_explicit_slope(self):
        config = parse_config({"wc": {"preset": "paperP", "lambda_slope": 3.05, "eps": 0.2}})
        assert config.wc.params.lambda_slope == 3.05
        assert config.wc.params.eps == 0.2

    def test_explicit_fields_required_without_preset(self):
        with pytest.raises(ConfigError, match="wc.a"):
            parse_config({"wc": {"b": 5.25}})

    def test_unknown_preset(self):
        with pytest.raises(ConfigError, match="unknown preset"):
            parse_config({"wc": {"preset": "paperQ"}})

    def test_invalid_values(self):
        with pytest.raises(ConfigError, match="wc"):
            parse_config({"wc": {"preset": "paperP", "tau": -1.0}})
        with pytest.raises(ConfigError, match="expected a number"):
            parse_config({"wc": {"preset": "paperP", "eps": "0.1"}})

    def test_match_period(self):
        config = parse_config({"wc": {"preset": "paperP", "lambda_slope": 3.05}, "forcing": {"A": 1.0, "f": 2.5}})
        p = config.wc.params
        assert wc_period(p.lambda_slope, p) == pytest.approx(0.2)

    def test_match_period_disabled(self):
        raw = {"wc": {"preset": "paperP"}, "forcing": {"A": 1.0, "match_period": False}}
        assert parse_config(raw).wc.params.tau == 1.0

    def test_forcing_validation(self):
        with pytest.raises(ConfigError, match="forcing"):
            parse_config({"forcing": {"A": 1.0, "h": 2.0}})
        with pytest.raises(ConfigError, match="expected an integer"):
            parse_config({"forcing": {"A": 1.0, "n": 2.5}})


class TestOtherBlocks:
    """Curves, extraction, sweep, branch, sim and output blocks."""

    def test_defaults(self):
        config = parse_config({})
        assert config.curves.method == "second-order"
        assert config.extract.normalization == "unit-norm"
        assert config.branch.start == 3.03
        assert config.output.formats == ("csv", "json", "svg")
        assert config.sweep is None

    def test_unknown_key(self):
        with pytest.raises(ConfigError, match="curves.epsilon: unknown key"):
            parse_config({"curves": {"epsilon": 0.1}})
        with pytest.raises(ConfigError, match="unknown key"):
            parse_config({"plots": {}})

    def test_curves(self):
        config = parse_config({"curves": {"eps_stop": 0.2, "eps_n": 3, "method": "exact"}})
        assert list(config.curves.eps_values) == [0.0, 0.1, 0.2]
        with pytest.raises(ConfigError, match="curves.method"):
            parse_config({"curves": {"method": "fourth-order"}})

    def test_extract(self):
        config = parse_config({"extract": {"scale": [2.0, 0.0], "reference": "table2-bsp-0"}})
        assert config.extract.scale == 2.0
        with pytest.raises(ConfigError, match="extract.scale"):
            parse_config({"extract": {"scale": [0.0, 0.0]}})
        with pytest.raises(ConfigError, match="extract.reference"):
            parse_config({"extract": {"reference": "table3"}})

    def test_sweep(self):
        raw = {
            "sweep": {
                "p1": {"name": "A", "start": 0.0, "stop": 2.0, "n": 5},
                "p2": {"name": "h", "start": 0.0, "stop": 0.5, "n": 3},
                "bisect": False,
                "classify": {"transient_periods": 50, "integrator": {"rel_tol": 1e-7}},
            }
        }
        block = parse_config(raw).sweep
        assert block.p1.name == "A"
        assert block.p2.n == 3
        assert block.bisect_tol is None
        assert block.classify.transient_periods == 50.0
        assert block.classify.integrator.rel_tol == 1e-7

    def test_sweep_cell_limit(self):
        raw = {
            "sweep": {
                "p1": {"name": "A", "start": 0.0, "stop": 2.0, "n": 101},
                "p2": {"name": "h", "start": 0.0, "stop": 0.5, "n": 100},
            }
        }
        with pytest.raises(ConfigError, match="10000"):
            parse_config(raw)

    def test_sweep_requires_p1(self):
        with pytest.raises(ConfigError, match="sweep.p1"):
            parse_config({"sweep": {}})

    def test_branch(self):
        config = parse_config({"branch": {"family": "plus", "max_step": 0.005, "initial_step": 0.001}})
        assert config.branch.family == "plus"
        assert config.branch.policy.max_step == 0.005
        with pytest.raises(ConfigError, match="branch.family"):
            parse_config({"branch": {"family": "both"}})
        with pytest.raises(ConfigError, match="branch"):
            parse_config({"branch": {"min_step": 0.1, "initial_step": 0.01}})

    def test_sim_ics(self):
        config = parse_config({"sim": {"ics": [{"label": "a", "state": [0.1, 0, 0.1, 0]}, {"state": [0.2, 0, 0, 0]}]}})
        assert ic_list(config.sim) == [("a", [0.1, 0.0, 0.1, 0.0]), ("ic1", [0.2, 0.0, 0.0, 0.0])]
        assert ic_list(parse_config({}).sim) is None
        with pytest.raises(ConfigError, match=r"sim.ics\[0\]"):
            parse_config({"sim": {"ics": [[0.1, 0.0]]}})

    def test_sim_chart(self):
        with pytest.raises(ConfigError, match="sim.chart"):
            parse_config({"sim": {"chart": "polar"}})

    def test_output_formats(self):
        config = parse_config({"output": {"formats": ["svg", "csv"]}})
        assert config.output.formats == ("csv", "svg")
        with pytest.raises(ConfigError, match="output.formats"):
            parse_config({"output": {"formats": ["png"]}})

    def test_integrator(self):
        config = parse_config({"integrator": {"method": "rk4", "rk4_step": 0.005}})
        assert config.integrator.method == "rk4"
        with pytest.raises(ConfigError, match="integrator"):
            parse_config({"integrator": {"solver": "LSODA"}})


class TestPresetsAndLoading:
    """Preset merging and file loading."""

    def test_apply_wc_preset(self):
        merged = apply_preset({"wc": {"eps": 0.1}}, "paperP")
        assert merged["wc"] == {"eps": 0.1, "preset": "paperP"}

    def test_apply_nf_preset_keeps_explicit_source(self):
        raw = {"nf": {"coefficients": {"omega": 1.0, "alpha01_re": -1.0, "alpha01_im": 0.0}}}
        assert "preset" not in apply_preset(raw, "table2-bsp-0")["nf"]
        assert apply_preset({}, "table2-bsp-0")["nf"] == {"preset": "table2-bsp-0"}

    def test_unknown_preset(self):
        with pytest.raises(ConfigError, match="unknown preset 'paperZ'"):
            apply_preset({}, "paperZ")

    def test_load_preset_only(self):
        config = load_config(None, "paperP")
        assert config.wc.params.lambda_slope == pytest.approx(wc_hopf_lambda(config.wc.params))

    def test_load_file(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text(json.dumps({"nf": {"preset": "table2-bsp-m003"}}))
        assert load_config(str(path)).nf.source == "preset:table2-bsp-m003"

    def test_malformed_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{nf: }")
        with pytest.raises(ConfigError, match="malformed JSON"):
            load_config(str(path))

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="cannot read config"):
            load_config(str(tmp_path / "absent.json"))

    def test_not_an_object(self):
        with pytest.raises(ConfigError, match="JSON object"):
            parse_config([1, 2])


class TestHashAndOutput:
    """Canonical hash and output directory resolution."""

    def test_hash_stable(self):
        a = parse_config({"nf": {"preset": "table2-bsp-0", "lam": 0.01}})
        b = parse_config({"nf": {"lam": 0.01, "preset": "table2-bsp-0"}})
        assert config_hash(a) == config_hash(b)
        assert len(config_hash(a)) == 12
        int(config_hash(a), 16)

    def test_hash_changes_with_content(self):
        a = parse_config({"nf": {"preset": "table2-bsp-0", "lam": 0.01}})
        b = parse_config({"nf": {"preset": "table2-bsp-0", "lam": 0.02}})
        assert config_hash(a) != config_hash(b)

    def test_hash_ignores_output_directory(self):
        a = parse_config({"output": {"directory": "one"}})
        b = parse_config({"output": {"directory": "two"}})
        assert config_hash(a) == config_hash(b)

    def test_resolve_order(self, monkeypatch):
        config = parse_config({"output": {"directory": "from-config"}})
        monkeypatch.setenv(OUTDIR_ENV, "from-env")
        assert resolve_output_dir("from-cli", config) == Path("from-cli")
        assert resolve_output_dir(None, config) == Path("from-env")
        monkeypatch.delenv(OUTDIR_ENV)
        assert resolve_output_dir(None, config) == Path("from-config")
        assert resolve_output_dir(None, parse_config({})) == Path(DEFAULT_OUTDIR)

    def test_jsonable(self):
        assert jsonable(1 + 2j) == {"re": 1.0, "im": 2.0}
        assert jsonable(float("nan")) == "nan"
        assert jsonable((1, 2.5)) == [1, 2.5]
