import pytest

from clicktomo.config import ConfigError, RunConfig, config_from_dict, load_config, with_overrides


def test_defaults():
    cfg = load_config(None)
    assert cfg.solver.epsilon == 0.1
    assert cfg.truncation_sigma == 6.0
    assert cfg.mc.samples == 100
    assert cfg.mc.amplitude_rel_sigma == 0.05
    assert cfg.simulator.n_probes == 19


def test_toml_sections_and_aliases(tmp_path):
    path = tmp_path / "run.toml"
    path.write_text(
        'seed = 9\nepsilon = 0.2\nmc_samples = 12\n'
        '[calibration]\neta_cal = 0.5\n'
        '[solver]\nresidual = "squared"\ntruncation_sigma = 7.0\n'
        '[metadata]\ndevice = "array-3"\n',
        encoding="utf-8",
    )
    cfg = load_config(path)
    assert cfg.seed == 9
    assert cfg.solver.epsilon == 0.2 and cfg.solver.residual == "squared"
    assert cfg.truncation_sigma == 7.0
    assert cfg.mc.samples == 12
    assert cfg.calibration.eta_cal == 0.5
    assert cfg.metadata == {"device": "array-3"}


@pytest.mark.parametrize(
    "doc",
    [
        {"bogus": 1},
        {"solver": {"tolerance": 1e-3}},
        {"epsilon": 0.2, "solver": {"epsilon": 0.3}},
        {"solver": {"epsilon": 2.0}},
        {"simulator": {"trials_per_probe": 0}},
        {"mc": {"samples": 1}},
        {"seed": -3},
        {"solver": 5},
    ],
)
def test_rejects_bad_documents(doc):
    with pytest.raises(ConfigError):
        config_from_dict(doc)


def test_bad_toml(tmp_path):
    path = tmp_path / "bad.toml"
    path.write_text("seed = = 1\n", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_config(path)


def test_overrides_and_digest():
    base = RunConfig()
    same = with_overrides(base, **{"solver.epsilon": None})
    assert same.digest() == base.digest()
    changed = with_overrides(base, **{"solver.epsilon": 0.3, "seed": 4})
    assert changed.solver.epsilon == 0.3 and changed.seed == 4
    assert changed.digest() != base.digest()
    assert base.solver.epsilon == 0.1
