import math

import pytest

from optocollapse.config import ConfigError, list_presets, load_config, load_preset_config
from optocollapse.decoherence import DiosiPenrose, EllisQuadratic, Standard, Tabulated

BASE = """
[system]
mass_kg = 6e-11
omega_m_rad_s = 125663.70614359173
cavity_length_m = 5e-3
finesse = 1.5e5
g0_rad_s = 628.3185307179587
tau_s = auto
alpha = 10
"""


def _write(tmp_path, text, name="run.ini"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_presets_listed():
    assert set(list_presets()) >= {"trampoline-60ng", "ellis-test", "dp-test"}
    with pytest.raises(ConfigError, match="unknown preset"):
        load_preset_config("nope")


def test_minimal_config(tmp_path):
    cfg = load_config(_write(tmp_path, BASE))
    assert cfg.system.g0 == pytest.approx(628.3185307179587)
    assert cfg.system.tau == pytest.approx(math.log(2) / cfg.system.kappa)
    assert cfg.system.alpha == 10
    assert cfg.models == {} and cfg.temperature is None
    assert cfg.run["shots"] >= 1


def test_missing_key_names_it(tmp_path):
    text = BASE.replace("mass_kg = 6e-11\n", "")
    with pytest.raises(ConfigError, match="mass_kg"):
        load_config(_write(tmp_path, text))


@pytest.mark.parametrize("extra,match", [
    ("[system]\nmass = 1\n", "mass"),
    ("[bogus]\nx = 1\n", "bogus"),
    ("[run]\nshots = many\n", "shots"),
    ("[run]\nshots = 0\n", "shots"),
    ("[model.x]\nmodel = csl\n", "csl"),
    ("[model.x]\nmodel = standard\n", "lambda_per_m2_s"),
    ("[run]\nsweep_scale = cubic\n", "sweep_scale"),
])
def test_bad_configs(tmp_path, extra, match):
    text = BASE + extra if not extra.startswith("[system]") else BASE.replace(
        "alpha = 10", "alpha = 10\nmass = 1")
    with pytest.raises(ConfigError, match=match):
        load_config(_write(tmp_path, text))


def test_both_couplings_rejected(tmp_path):
    with pytest.raises(ConfigError, match="exactly one"):
        load_config(_write(tmp_path, BASE + "omega_c_rad_s = 1e15\n"))


def test_models(tmp_path):
    (tmp_path / "tab.csv").write_text("x_m,gamma_per_s\n0,0\n1e-14,5\n2e-14,9\n")
    text = BASE + """
[bath]
temperature_k = 0.4
q_factor = 1e6
[model.std]
model = standard
[model.e]
model = ellis
lambda_e_per_m2_s = 1e30
[model.dp]
model = diosi-penrose
prefactor = 2
[model.t]
model = table
table_path = tab.csv
"""
    cfg = load_config(_write(tmp_path, text))
    assert isinstance(cfg.models["std"], Standard)
    assert cfg.models["e"] == EllisQuadratic(1e30)
    dp = cfg.models["dp"]
    assert isinstance(dp, DiosiPenrose) and dp.prefactor == 2
    assert dp.R0 == pytest.approx(1.2e-15 * 28 ** (1 / 3))
    assert isinstance(cfg.models["t"], Tabulated)


def test_overrides(tmp_path):
    p = _write(tmp_path, BASE)
    cfg = load_config(p, ["run.shots=77", "system.alpha=3"])
    assert cfg.run["shots"] == 77
    assert cfg.system.alpha == 3
    with pytest.raises(ConfigError):
        load_config(p, ["shots=3"])


def test_header_lines_round_trip(tmp_path):
    cfg = load_preset_config("trampoline-60ng")
    lines = cfg.header_lines()
    assert lines[0] == "[system]"
    assert not any(line.startswith("workers") for line in lines)
    text = "\n".join(line for line in lines)
    again = load_config(_write(tmp_path, text))
    assert again.system == cfg.system
    assert again.models == cfg.models


def test_ellis_calibration_in_preset():
    cfg = load_preset_config("trampoline-60ng")
    assert cfg.models["ellis"].Lambda_E == pytest.approx(4.1327e31, rel=1e-4)
