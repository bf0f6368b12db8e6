import csv
import io
import json
import math

import numpy as np
import pytest

from optocollapse.cli import main
from optocollapse.witness import min_alpha_squared

DESK = """
[system]
mass_kg = 6e-11
omega_m_rad_s = 125663.70614359173
cavity_length_m = 5e-3
finesse = 1.5e5
g0_rad_s = 1e5
tau_s = 1e-6
alpha = 10
"""
# g0 tau = 0.1, omega_m tau = 0.126; alpha = 10 keeps eps ~ 0.02


def _run(argv, capsys):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def _table(text):
    rows = [line for line in text.splitlines() if not line.startswith("#")]
    return list(csv.DictReader(io.StringIO("\n".join(rows))))


@pytest.fixture
def desk(tmp_path):
    p = tmp_path / "desk.ini"
    p.write_text(DESK)
    return p


def test_plan_preset(capsys):
    code, out, _ = _run(["plan", "--preset", "trampoline-60ng"], capsys)
    assert code == 0
    assert out.startswith("# optocollapse")
    assert "pulse duration tau          1.104 us" in out
    assert "# seed = 0" in out


def test_plan_ellis_testable(capsys):
    code, out, _ = _run(["plan", "--preset", "ellis-test"], capsys)
    assert code == 0
    assert "ellis: testable" in out


def test_plan_failing_verdict_exit_2(capsys):
    code, out, _ = _run(["plan", "--preset", "trampoline-60ng", "--set",
                         "run.require=ellis_testable"], capsys)
    assert code == 2
    assert "ellis: not testable" in out


def test_plan_unknown_verdict_exit_1(capsys):
    code, _, err = _run(["plan", "--preset", "trampoline-60ng", "--set", "run.require=flying"],
                        capsys)
    assert code == 1 and "flying" in err


def test_plan_json(tmp_path, capsys):
    path = tmp_path / "r.json"
    code, _, _ = _run(["plan", "--preset", "dp-test", "--json", path], capsys)
    assert code == 0
    doc = json.loads(path.read_text())
    assert doc["report"]["verdicts"]["diosi-penrose_testable"] is True
    assert float(doc["config"]["model.diosi-penrose"]["calibrate_doubling_time_s"]) == 2e-8


def test_missing_key_exit_1(tmp_path, capsys):
    p = tmp_path / "bad.ini"
    p.write_text(DESK.replace("mass_kg = 6e-11\n", ""))
    code, _, err = _run(["plan", p], capsys)
    assert code == 1
    assert "mass_kg" in err


@pytest.mark.parametrize("argv", [[], ["fly"], ["plan"], ["plan", "--preset", "x"],
                                  ["plan", "/nonexistent.ini"],
                                  ["simulate", "--preset", "trampoline-60ng", "--set", "run.shots=-4"]])
def test_usage_errors_exit_1(argv, capsys):
    code, _, err = _run(argv, capsys)
    assert code == 1
    assert "Traceback" not in err


def test_witness_alpha_sweep(desk, tmp_path, capsys):
    out = tmp_path / "w.csv"
    th = min_alpha_squared(0.1)
    code, _, _ = _run(["witness", desk, "-o", out, "--set", "run.sweep_var=alpha_sq",
                       "--set", "run.sweep_start=0", "--set", f"run.sweep_stop={2 * th}",
                       "--set", "run.sweep_num=41", "--set", "run.witness_g0tau=0.1",
                       "--set", "run.cutoff=60"], capsys)
    assert code == 0
    rows = _table(out.read_text())
    assert list(rows[0]) == ["sweep_var", "lhs", "rhs", "margin", "violated", "oracle_margin"]
    assert rows[0]["violated"] == "false"
    a = np.array([float(r["sweep_var"]) for r in rows])
    m = np.array([float(r["oracle_margin"]) for r in rows])
    first = a[np.argmax(m > 0)]
    assert first == pytest.approx(th, rel=0.05)


def test_witness_n_th_sweep(desk, tmp_path, capsys):
    out = tmp_path / "w.csv"
    g, alpha = 1e-3, 5e3
    bound = 8 * (g * alpha) ** 2 - 0.5
    code, _, _ = _run(["witness", desk, "-o", out, "--set", "run.sweep_var=n_th",
                       "--set", f"run.sweep_start={bound}", "--set", f"run.sweep_stop={bound}",
                       "--set", "run.sweep_num=1", "--set", f"run.witness_g0tau={g}",
                       "--set", f"run.witness_alpha_sq={alpha**2}"], capsys)
    assert code == 0
    (row,) = _table(out.read_text())
    assert abs(float(row["margin"])) < 1e-2 * float(row["lhs"])


def test_decohere(desk, tmp_path, capsys):
    text = DESK + """
[model.std]
model = standard
lambda_per_m2_s = 1e30
[model.dp]
model = diosi-penrose
prefactor = 5000
[run]
k_values = 0,1,4
eta_values = 0,1,2
"""
    p = tmp_path / "d.ini"
    p.write_text(text)
    out = tmp_path / "d.csv"
    code, _, _ = _run(["decohere", p, "-o", out], capsys)
    assert code == 0
    body = out.read_text()
    rows = _table(body)
    assert list(rows[0]) == ["model", "k", "eta", "xi", "mean_theta0", "var_theta_pi2",
                             "ratio_xi2_xi1_4"]
    for r in rows:
        if r["k"] == "0":
            assert float(r["xi"]) == 1.0
        if r["model"] == "std":
            assert float(r["ratio_xi2_xi1_4"]) == pytest.approx(1.0, abs=1e-12)
    dp_ratio = [float(r["ratio_xi2_xi1_4"]) for r in rows if r["model"] == "dp" and r["k"] == "4"]
    assert dp_ratio[0] > 1.0
    assert "# doubling_time std:" in body and "# doubling_time dp:" in body


def _summary(text):
    out = {}
    for line in text.splitlines():
        if line.startswith("# ") and " = " in line:
            k, v = line[2:].split(" = ", 1)
            out[k] = v
    return out


def test_simulate_k0(desk, tmp_path, capsys):
    out = tmp_path / "s.csv"
    code, _, _ = _run(["simulate", desk, "-o", out, "--set", "run.shots=200000"], capsys)
    assert code == 0
    text = out.read_text()
    s = _summary(text)
    assert abs(float(s["variance"]) - 0.5) < 5 * float(s["std_error_var"])
    rows = _table(text)
    assert list(rows[0]) == ["shot_index", "phi_deco_rad", "x_meas_x0", "phi_feedback_rad",
                             "outcome"]
    assert len(rows) == 200000


def test_simulate_standard_model(desk, tmp_path, capsys):
    text = DESK + """
[model.std]
model = standard
lambda_per_m2_s = 3e33
[run]
k = 2
shots = 200000
seed = 5
"""
    p = tmp_path / "s.ini"
    p.write_text(text)
    out = tmp_path / "s.csv"
    assert _run(["simulate", p, "-o", out], capsys)[0] == 0
    s = _summary(out.read_text())
    pred = float(s["predicted_variance_no_readout_noise"])
    assert 0.6 < pred < 100.5
    assert abs(float(s["variance"]) - pred) < 5 * float(s["std_error_var"])


def test_simulate_bytes_identical_across_workers(desk, tmp_path, capsys):
    texts = []
    for w in (1, 4, 16):
        out = tmp_path / f"s{w}.csv"
        code, _, _ = _run(["simulate", desk, "-o", out, "--workers", w, "--set",
                           "run.shots=150000", "--set", "run.seed=42",
                           "--set", "run.delta_x_x0=0.2"], capsys)
        assert code == 0
        texts.append(out.read_bytes())
    assert texts[0] == texts[1] == texts[2]


def test_float_format_round_trips(desk, tmp_path, capsys):
    out = tmp_path / "s.csv"
    _run(["simulate", desk, "-o", out, "--set", "run.shots=50", "--set", "run.delta_x_x0=0.3"],
         capsys)
    rows = _table(out.read_text())
    v = rows[7]["x_meas_x0"]
    assert repr(float(v)) == repr(float(f"{float(v):.17g}"))
    assert "," not in v and math.isfinite(float(v))
