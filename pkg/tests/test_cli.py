import numpy as np
import pytest

from geomodes.cli import main
from geomodes.outputs import read_csv
from geomodes.scenarios import BUILTIN_SCENARIOS, grid_metric_from_csv, validate_config
from geomodes.errors import ConfigError


SIMULATE_TOML = """
experiment = "simulate"

[system]
metric = "double_pendulum"
[system.potential]
kind = "circular"
k0 = 100.0

[parameters]
horizon = 0.5
dt = 1e-3
[parameters.state0]
q = [0.2, -0.1]
qdot = [0.0, 0.0]
"""

DESIGN_TOML = """
experiment = "design"

[system]
metric = "double_pendulum"
[system.potential]
kind = "designed"

[design]
alpha = [0.0, -5.0]
beta = [-47.86]
epsilon = 0.5

[design.chart]
start = [0.0, 0.0]
angle = -0.7853981633974483
length = 0.8
halfwidth = 0.2
spacing = 0.02

[parameters]
energies = [0.5]
periods = 1.0
dt = 1e-3
resolution = 0.1
"""


def _write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def test_scenarios_listing(capsys):
    assert main(["scenarios"]) == 0
    out = capsys.readouterr().out
    assert "paper-3-1" in out
    assert "paper-3-2" in out
    assert len(BUILTIN_SCENARIOS) >= 2


def test_simulate_roundtrip(tmp_path, capsys):
    cfg = _write(tmp_path, "sim.toml", SIMULATE_TOML)
    out = tmp_path / "out"
    assert main(["simulate", "--config", cfg, "--out", str(out)]) == 0
    header, data = read_csv(out / "trajectory.csv")
    assert header == ["t", "q1", "q2", "qd1", "qd2", "E"]
    assert len(data) == 501
    report = (out / "report.txt").read_text()
    assert "energy_drift" in report
    assert "wallclock" not in report


def test_malformed_config_exits_2_without_outputs(tmp_path, capsys):
    cfg = _write(tmp_path, "bad.toml", "experiment = 'nonsense'\n")
    out = tmp_path / "out"
    assert main(["run", "--config", cfg, "--out", str(out)]) == 2
    assert not out.exists()


def test_unparsable_toml_exits_2(tmp_path):
    cfg = _write(tmp_path, "broken.toml", "experiment = [unclosed\n")
    assert main(["run", "--config", cfg, "--out", str(tmp_path / "o")]) == 2


def test_missing_config_exits_2(tmp_path):
    assert main(["simulate", "--config", str(tmp_path / "nope.toml")]) == 2


def test_experiment_mismatch_exits_2(tmp_path):
    cfg = _write(tmp_path, "sim.toml", SIMULATE_TOML)
    assert main(["geodesic", "--config", cfg, "--out", str(tmp_path / "o")]) == 2


def test_tolerance_breach_exits_4(tmp_path):
    cfg = _write(tmp_path, "sim.toml", SIMULATE_TOML)
    code = main(
        ["simulate", "--config", cfg, "--out", str(tmp_path / "o"), "--tol-energy", "1e-18"]
    )
    assert code == 4


def test_numerical_failure_exits_3(tmp_path):
    # on-mode energy far beyond the designed strip: the state exits the chart
    text = DESIGN_TOML.replace("energies = [0.5]", "energies = [40.0]")
    cfg = _write(tmp_path, "design.toml", text)
    assert main(["design", "--config", cfg, "--out", str(tmp_path / "o")]) == 3


def test_geodesic_experiment(tmp_path):
    cfg = _write(
        tmp_path,
        "geo.toml",
        """
experiment = "geodesic"
[system]
metric = "double_pendulum"
[parameters]
angle = -0.7853981633974483
length = 0.6
ds = 0.01
two_sided = true
halfwidth = 0.2
resolution = 0.1
""",
    )
    out = tmp_path / "out"
    assert main(["geodesic", "--config", cfg, "--out", str(out)]) == 0
    header, data = read_csv(out / "geodesic.csv")
    assert header == ["s", "q1", "q2", "w1", "w2"]
    header, grid = read_csv(out / "chart_grid.csv")
    assert header == ["xi1", "xi2", "q1", "q2"]


def test_linearize_experiment(tmp_path):
    cfg = _write(
        tmp_path,
        "lin.toml",
        """
experiment = "linearize"
[system]
metric = "double_pendulum"
[system.potential]
kind = "circular"
k0 = 100.0
""",
    )
    out = tmp_path / "out"
    assert main(["linearize", "--config", cfg, "--out", str(out)]) == 0
    header, data = read_csv(out / "modes.csv")
    assert header == ["omega", "v1", "v2", "angle"]
    np.testing.assert_allclose(data[0, 0], 4.142135623, rtol=1e-8)
    np.testing.assert_allclose(data[1, 0], 24.142135623, rtol=1e-8)


def test_modes_verify_experiment(tmp_path):
    geo_cfg = _write(
        tmp_path,
        "geo.toml",
        """
experiment = "geodesic"
[system]
metric = "double_pendulum"
[parameters]
angle = 0.3926990816987242
length = 0.5
two_sided = true
""",
    )
    out1 = tmp_path / "geo_out"
    assert main(["geodesic", "--config", geo_cfg, "--out", str(out1)]) == 0

    verify_cfg = _write(
        tmp_path,
        "ver.toml",
        f"""
experiment = "modes-verify"
[system]
metric = "double_pendulum"
[system.potential]
kind = "circular"
k0 = 100.0
[parameters]
curve = '{out1 / "geodesic.csv"}'
tol = 1e-4
""",
    )
    out2 = tmp_path / "ver_out"
    assert main(["modes", "verify", "--config", verify_cfg, "--out", str(out2)]) == 0
    report = (out2 / "report.txt").read_text()
    assert "max_geodesic_residual" in report
    assert "verdict" in report


def test_design_experiment_and_determinism(tmp_path):
    cfg = _write(tmp_path, "design.toml", DESIGN_TOML)
    out_a = tmp_path / "a"
    out_b = tmp_path / "b"
    assert main(["design", "--config", cfg, "--out", str(out_a), "--jobs", "1"]) == 0
    assert main(["design", "--config", cfg, "--out", str(out_b), "--jobs", "1"]) == 0
    names = sorted(p.name for p in out_a.iterdir())
    assert "certification.txt" in names
    assert "potential_grid.csv" in names
    assert "force_field.csv" in names
    for name in names:
        assert (out_a / name).read_bytes() == (out_b / name).read_bytes(), name


def test_worker_count_does_not_change_results(tmp_path):
    cfg = _write(tmp_path, "design.toml", DESIGN_TOML.replace(
        "energies = [0.5]", "energies = [0.2, 0.5]"
    ))
    out_seq = tmp_path / "seq"
    out_par = tmp_path / "par"
    assert main(["design", "--config", cfg, "--out", str(out_seq), "--jobs", "1"]) == 0
    assert main(["design", "--config", cfg, "--out", str(out_par), "--jobs", "2"]) == 0
    for p in sorted(out_seq.iterdir()):
        assert p.read_bytes() == (out_par / p.name).read_bytes(), p.name


def test_invariance_experiment(tmp_path):
    text = DESIGN_TOML.replace('experiment = "design"', 'experiment = "invariance"')
    text += '\ncurve = "design-geodesic"\nscales = [0.5, 1.0]\nhorizon = 0.3\n'
    # the trailing keys above must live in [parameters]: TOML appends to the
    # last open table, which DESIGN_TOML leaves as [parameters]
    cfg = _write(tmp_path, "inv.toml", text)
    out = tmp_path / "out"
    assert main(["invariance", "--config", cfg, "--out", str(out)]) == 0
    header, data = read_csv(out / "scaling.csv")
    assert header == ["scale", "max_deviation", "normal_accel_ratio", "expected_ratio"]
    assert np.all(np.isfinite(data[:, 1]))


def test_dt_override_applied(tmp_path):
    cfg = _write(tmp_path, "sim.toml", SIMULATE_TOML)
    out = tmp_path / "out"
    assert main(["simulate", "--config", cfg, "--out", str(out), "--dt", "0.002"]) == 0
    report = (out / "report.txt").read_text()
    assert "parameters.dt = 0.002" in report
    _, data = read_csv(out / "trajectory.csv")
    assert len(data) == 251


def test_run_builtin_scenario_rejects_unknown():
    assert main(["run", "--scenario", "nope"]) == 2


def test_validate_config_collects_errors():
    with pytest.raises(ConfigError):
        validate_config({"experiment": "simulate", "system": {"metric": "euclidean"}})


def test_grid_metric_loader(tmp_path, dp_metric):
    from geomodes.outputs import write_csv

    grid = np.linspace(-1.0, 1.0, 41)
    rows = []
    for a in grid:
        for b in grid:
            g = dp_metric.matrix(np.array([a, b]))
            rows.append([a, b, g[0, 0], g[0, 1], g[1, 1]])
    rows = np.array(rows)
    path = tmp_path / "metric.csv"
    write_csv(path, ["q1", "q2", "g11", "g12", "g22"], [rows[:, i] for i in range(5)])

    loaded = grid_metric_from_csv(str(path))
    q = np.array([0.123, -0.456])
    np.testing.assert_allclose(loaded.matrix(q), dp_metric.matrix(q), atol=1e-8)
    from geomodes.manifold import metric_partials

    np.testing.assert_allclose(
        metric_partials(loaded, q), metric_partials(dp_metric, q), atol=1e-5
    )
