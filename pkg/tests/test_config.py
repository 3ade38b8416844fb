import pytest

from gradspin.config import ConfigError, ExperimentConfig, build_config, validate


def test_build_and_override():
    cfg = build_config({"seed": 3, "model": "Harm", "spin": 1}, ["N=32", "times=0.01,0.02", "test_functions=cos1,sin2"])
    assert cfg.seed == 3 and cfg.N == 32
    assert cfg.times == [0.01, 0.02]
    assert cfg.test_functions == ["cos1", "sin2"]
    assert cfg.spec.two_s == 2.0
    assert validate(cfg) is cfg


def test_unknown_and_malformed_keys():
    with pytest.raises(ConfigError) as err:
        build_config({"colour": 1})
    assert err.value.field == "colour"
    with pytest.raises(ConfigError):
        build_config(None, ["N"])
    with pytest.raises(ConfigError) as err:
        build_config(None, ["N=abc"])
    assert err.value.field == "N"


@pytest.mark.parametrize(
    "overrides, field, command",
    [
        (["spin=-1"], "spin", "simulate"),
        (["model=dKMP", "spin=1"], "spin", "simulate"),
        (["N=1"], "N", "simulate"),
        (["times=0.2,0.1"], "times", "simulate"),
        (["bins=5", "N=64"], "bins", "hydro"),
        (["profile=wave:1"], "profile", "simulate"),
        (["test_functions=cos12"], "test_functions", "simulate"),
        (["replicas=0"], "replicas", "simulate"),
        (["n_max=0"], "n_max", "attract"),
        (["draws=1"], "draws", "moments"),
    ],
)
def test_validation_names_field(overrides, field, command):
    with pytest.raises(ConfigError) as err:
        validate(build_config({"seed": 1}, overrides), command)
    assert err.value.field == field


def test_seed_is_mandatory():
    with pytest.raises(ConfigError) as err:
        validate(ExperimentConfig())
    assert err.value.field == "seed"


def test_content_hash_is_stable(tmp_path):
    a = build_config({"seed": 1})
    b = build_config({"seed": 1})
    assert a.content_hash() == b.content_hash()
    assert a.content_hash() != build_config({"seed": 2}).content_hash()
    table = tmp_path / "p.csv"
    table.write_text("u,rho\n0,1\n")
    c = build_config({"seed": 1, "profile": f"table:{table}"})
    h1 = c.content_hash()
    table.write_text("u,rho\n0,2\n")
    assert c.content_hash() != h1
