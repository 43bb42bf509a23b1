import pytest

from anticonc.config import ExperimentConfig, SpecSource, load_config
from anticonc.errors import ConfigError


def test_precedence(tmp_path):
    ini = tmp_path / "run.ini"
    ini.write_text("[experiment]\nseed = 3\nn_samples = 500\n\n[verify]\nseed = 4\nchecks = deng\n"
                   "\n[spec]\nn = 5\nrho = 0.25\n")
    assert load_config(str(ini), "bounds").seed == 3
    cfg = load_config(str(ini), "verify")
    assert cfg.seed == 4 and cfg.checks == ("deng",) and cfg.n_samples == 500
    assert cfg.spec == SpecSource("equicorrelated", n=5, rho=0.25)
    assert load_config(str(ini), "verify", {"seed": 9, "budget": None}).seed == 9


def test_round_trip(tmp_path):
    cfg = ExperimentConfig(spec=SpecSource("explicit", mu=(0.0, 1.0), sigma=(1.0, 0.2, 0.2, 2.0)),
                           eps=(0.1, 0.3), seed=77, var=0.5, checks=("sandwich", "mode"))
    path = tmp_path / "c.ini"
    path.write_text(cfg.to_ini())
    back = load_config(str(path), "verify")
    assert back.to_ini() == cfg.to_ini()
    assert back.sha256() == cfg.sha256()
    assert back.field().n == 2


def test_spec_file(tmp_path):
    (tmp_path / "f.txt").write_text("0 0\n1, 0.5\n0.5 1\n")
    ini = tmp_path / "c.ini"
    ini.write_text("[spec]\nfile = f.txt\n")
    spec = load_config(str(ini)).field()
    assert spec.sigma[0, 1] == 0.5


@pytest.mark.parametrize("text", ["[experiment]\nbogus = 1\n", "[experiment]\neps = 0, 1\n",
                                  "[experiment]\nstatistic = median\n", "[verify]\nchecks = nope\n",
                                  "[spec]\nfamily = explicit\nfile = missing.txt\n"])
def test_bad_configs(tmp_path, text):
    ini = tmp_path / "bad.ini"
    ini.write_text(text)
    with pytest.raises(ConfigError):
        load_config(str(ini), "verify").field()


def test_missing_file():
    with pytest.raises(ConfigError):
        load_config("/nonexistent/x.ini")
