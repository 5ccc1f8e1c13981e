from pathlib import Path

import pytest

from activescalar.config import (ConfigError, ExperimentConfig, MultiplierConfig, dump_config,
                                 load_config)

REFERENCE = Path(__file__).resolve().parents[1] / "configs" / "reference.ini"


def test_defaults_round_trip(tmp_path):
    cfg = ExperimentConfig()
    dump_config(cfg, tmp_path / "c.ini")
    assert load_config(tmp_path / "c.ini") == cfg


def test_reference_config_holds_defaults():
    assert load_config(REFERENCE) == ExperimentConfig()


def test_boundary_q_is_accepted():
    assert ExperimentConfig(q=4.0, alpha=0.75).q == 4.0


@pytest.mark.parametrize("kw, field", [
    (dict(alpha=0.5), "alpha"), (dict(alpha=1.0), "alpha"), (dict(q=3.0), "q"),
    (dict(s=1.0), "s"), (dict(N=127), "N"), (dict(M=0), "M"), (dict(T=0.0), "T"),
    (dict(window_radius=0.3), "window"), (dict(epsilons=(1e-2, 1e-1, 1e-3)), "epsilons"),
    (dict(lambdas=(0.0,)), "lambdas"), (dict(probe_width=0.3), "probe_width"),
    (dict(multiplier=MultiplierConfig(kind="perturbed", amplitude=0.9)), "multiplier"),
    (dict(compare_multiplier=MultiplierConfig(kind="bogus")), "compare_multiplier.kind"),
])
def test_invalid_parameters_name_the_field(kw, field):
    with pytest.raises(ConfigError) as exc:
        ExperimentConfig(**kw)
    assert exc.value.field == field


@pytest.mark.parametrize("text, field", [
    ("[grid]\nNN = 3\n", "grid.NN"),
    ("[bogus]\nx = 1\n", "bogus"),
    ("[grid]\nN = abc\n", "grid.N"),
    ("[window]\ncenter = 0.1\n", "window_center"),
    ("[multiplier]\ncolour = red\n", "multiplier.colour"),
])
def test_bad_files_name_the_field(tmp_path, text, field):
    p = tmp_path / "bad.ini"
    p.write_text(text)
    with pytest.raises(ConfigError) as exc:
        load_config(p)
    assert exc.value.field == field


def test_partial_file_and_overrides(tmp_path):
    p = tmp_path / "c.ini"
    p.write_text("[grid]\nN = 64\n[multiplier]\nkind = perturbed\namplitude = 0.25\n")
    cfg = load_config(p, rng_seed=7)
    assert cfg.N == 64 and cfg.M == 500 and cfg.rng_seed == 7
    assert cfg.multiplier.build().name.startswith("perturbed")


def test_missing_file():
    with pytest.raises(ConfigError):
        load_config("/nonexistent/config.ini")
