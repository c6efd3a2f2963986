import numpy as np
import pytest

from blochensemble.analysis import basin_monte_carlo, convergence_schedule
from blochensemble.core import FrequencySet, geometric_weights, unit_weights
from blochensemble.dynamics import ControlLaw, IntegratorConfig, integrate
from blochensemble.experiment import (
    ConfigError,
    ScenarioConfig,
    fourier_rows,
    run_scenario,
    spectrum_rows,
    write_basin_csv,
    write_fourier_csv,
    write_schedule_csv,
    write_spectrum_csv,
)


def small_cfg(tmp_path, **kw):
    base = dict(
        seed=5, p=3, t_final=20.0, stride=10, directory=str(tmp_path),
        z0_lo=-1.0, z0_hi=1.0,
    )
    base.update(kw)
    return ScenarioConfig(**base)


# --- config ------------------------------------------------------------------


def test_config_ini_round_trip():
    cfg = ScenarioConfig(
        seed=42, p=30, weight_scheme="geometric", weight_base=1.1,
        law="truncated", trunc_n=7, h=0.005, t_final=123.25, stride=50,
        directory="runs/x", plot_svg="plot.svg",
    )
    again = ScenarioConfig.from_ini(cfg.to_ini())
    assert again == cfg


def test_config_file_round_trip(tmp_path):
    cfg = ScenarioConfig(seed=7, p=2, law="radiation-damping", rde_rate=0.5, rde_sign=-1)
    path = tmp_path / "scenario.ini"
    cfg.save(path)
    assert ScenarioConfig.load(path) == cfg


def test_config_validation_messages():
    with pytest.raises(ConfigError, match="ensemble.p"):
        ScenarioConfig(p=0).validate()
    with pytest.raises(ConfigError, match="freq_lo"):
        ScenarioConfig(freq_lo=4.0, freq_hi=1.0).validate()
    with pytest.raises(ConfigError, match="z0"):
        ScenarioConfig(z0_lo=-2.0).validate()
    with pytest.raises(ConfigError, match="weight_base"):
        ScenarioConfig(weight_scheme="geometric", weight_base=1.0).validate()
    with pytest.raises(ConfigError, match="trunc_n"):
        ScenarioConfig(law="truncated", trunc_n=99, p=3).validate()
    with pytest.raises(ConfigError, match="rde_sign"):
        ScenarioConfig(law="radiation-damping", rde_sign=0).validate()
    with pytest.raises(ConfigError, match="stride"):
        ScenarioConfig(stride=0).validate()


def test_config_parse_error_names_field():
    text = "[integrator]\nh = fast\n"
    with pytest.raises(ConfigError, match="integrator.h"):
        ScenarioConfig.from_ini(text)


# --- trajectory CSV -----------------------------------------------------------


def test_trajectory_csv_schema(tmp_path):
    cfg = small_cfg(tmp_path)
    summary, traj = run_scenario(cfg)
    lines = summary.trajectory_path.read_text().splitlines()
    header = lines[0].split(",")
    assert header[:4] == ["t", "u1", "u2", "V"]
    assert header[4:7] == ["x1", "y1", "z1"]
    assert len(header) == 4 + 3 * cfg.p
    for row in lines[1:]:
        assert len(row.split(",")) == 4 + 3 * cfg.p
    assert len(lines) - 1 == traj.n_samples


def test_trajectory_csv_deterministic(tmp_path):
    cfg_a = small_cfg(tmp_path / "a")
    cfg_b = small_cfg(tmp_path / "b")
    sa, _ = run_scenario(cfg_a)
    sb, _ = run_scenario(cfg_b)
    assert sa.trajectory_path.read_bytes() == sb.trajectory_path.read_bytes()
    assert sa.trajectory_path.read_bytes() != b""


def test_csv_values_round_trip(tmp_path):
    cfg = small_cfg(tmp_path)
    summary, traj = run_scenario(cfg)
    data = np.genfromtxt(summary.trajectory_path, delimiter=",", names=True)
    assert np.array_equal(data["t"], traj.times)
    assert np.array_equal(data["V"], traj.lyapunov)
    assert np.array_equal(data["x2"], traj.states[:, 1, 0])


# --- scenarios ------------------------------------------------------------------


def test_run_scenario_up_start_is_non_generic(tmp_path):
    cfg = small_cfg(tmp_path, p=1, z0_lo=1.0, z0_hi=1.0, t_final=50.0)
    summary, traj = run_scenario(cfg)
    assert summary.non_generic_start
    assert not summary.converged
    assert summary.pole_reached == "up"  # stays at the opposite pole
    assert np.allclose(traj.final_state.spins, [[0.0, 0.0, 1.0]], atol=0)


def test_run_scenario_small_converges(tmp_path):
    cfg = small_cfg(tmp_path, p=2, t_final=2000.0, stride=100, seed=11)
    summary, _ = run_scenario(cfg)
    assert summary.converged
    assert summary.pole_reached == "down"
    assert summary.max_norm_drift <= 1e-9
    assert summary.max_v_increase <= 1e-8
    text = summary.summary_path.read_text()
    assert "converged = true" in text
    assert "[final_state]" in text


def test_run_scenario_rde_reports_pole(tmp_path):
    cfg = small_cfg(
        tmp_path, p=2, law="radiation-damping", rde_rate=1.0, rde_sign=1,
        t_final=500.0, stride=100, seed=8,
    )
    summary, _ = run_scenario(cfg)
    assert summary.pole_reached == "up"
    assert summary.converged


def test_run_scenario_writes_plot(tmp_path):
    cfg = small_cfg(tmp_path, plot_svg="traj.svg")
    summary, _ = run_scenario(cfg)
    text = summary.plot_path.read_text()
    assert text.startswith("<svg ")
    assert "polyline" in text and text.rstrip().endswith("</svg>")


# --- reports ----------------------------------------------------------------------


def test_spectrum_report_p1(tmp_path):
    fs = FrequencySet(np.array([2.0]))
    reports = spectrum_rows(fs, "all")
    path = tmp_path / "spec.csv"
    write_spectrum_csv(path, reports)
    lines = path.read_text().splitlines()
    assert lines[0] == "pattern,class,hyperbolic,n_unstable,max_residual,eigenvalues"
    assert len(lines) == 3  # header + one row per equilibrium
    down, up = lines[1].split(","), lines[2].split(",")
    assert down[0] == "-" and down[1] == "attractor"
    assert up[0] == "+" and up[1] == "repeller"
    eigs = [complex(tok) for tok in down[5].split(";")]
    assert sorted(eigs, key=lambda c: c.imag) == [(-1 - 2j), (-1 + 2j)]


def test_spectrum_rows_pattern_selector():
    fs = FrequencySet(np.array([1.0, 2.0, 3.0]))
    reports = spectrum_rows(fs, "+--")
    assert len(reports) == 1
    assert reports[0].pattern.signs == (1, -1, -1)
    assert reports[0].classification.value == "saddle"
    with pytest.raises(ConfigError, match="pattern"):
        spectrum_rows(fs, "+-")


def test_basin_csv(tmp_path):
    fs = FrequencySet(np.array([2.0]))
    est = basin_monte_carlo(fs, unit_weights(1), samples=5, horizon=500.0, seed=4)
    path = tmp_path / "basin.csv"
    write_basin_csv(path, est)
    lines = path.read_text().splitlines()
    assert lines[0] == "sample,converged,final_max_z,stopped_early"
    assert len(lines) == 6


def test_schedule_csv(tmp_path):
    p = 3
    w = geometric_weights(p, 2.0)
    from blochensemble.core import random_ensemble

    s = random_ensemble(5, p, (1.0, 4.0), (-1.0, 1.0), weights=w)
    fam = {
        n: integrate(s, ControlLaw.truncated(n), IntegratorConfig(t_final=500.0), stride=100)
        for n in (2, 3)
    }
    sched = convergence_schedule(fam, 0.6)
    path = tmp_path / "sched.csv"
    write_schedule_csv(path, sched)
    lines = path.read_text().splitlines()
    assert lines[2] == "N,t_hit,converged"
    assert len(lines) == 5


def test_fourier_csv(tmp_path):
    from blochensemble.core import random_ensemble

    s = random_ensemble(6, 2, (1.0, 4.0), (-1.0, 1.0), weights=geometric_weights(2, 2.0))
    traj = integrate(s, ControlLaw.zero(), IntegratorConfig(t_final=200.0), stride=2)
    rows = fourier_rows(traj, extra_omegas=(0.4,))
    path = tmp_path / "fourier.csv"
    write_fourier_csv(path, rows)
    lines = path.read_text().splitlines()
    assert lines[0].startswith("omega,component,")
    assert len(lines) == 1 + 4 * 2 + 2
