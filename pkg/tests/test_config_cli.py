import math

import pytest
from hypothesis import given, settings, strategies as st

from trisap import cli
from trisap import config as cfgmod
from trisap.config import ConfigError, SimulationConfig
from trisap.export import read_csv


def text(**kw):
    lines = [f"format-version = {cfgmod.FORMAT_VERSION}"]
    lines += [f"{k.replace('_', '-')} = {v}" for k, v in kw.items()]
    return "\n".join(lines) + "\n"


def test_defaults_fill_unspecified_keys():
    cfg = cfgmod.parse(text(dmin=3.5))
    assert cfg.dmin == 3.5
    assert cfg.replace(dmin=3.0) == SimulationConfig()


@pytest.mark.parametrize("raw, value", [("2pi/3", 2 * math.pi / 3), ("0.5pi", 0.5 * math.pi),
                                        ("pi/2", math.pi / 2), ("1.25", 1.25), ("0.1 * pi", 0.1 * math.pi)])
def test_angles(raw, value):
    assert cfgmod.parse_angle(raw) == pytest.approx(value)


@pytest.mark.parametrize("body, line, fragment", [
    ("format-version = trisap-config/1\nbogus = 1\n", 2, "unknown key"),
    ("format-version = trisap-config/1\ndmin = 3\ndmin = 4\n", 3, "duplicate"),
    ("format-version = trisap-config/1\n\n# c\ngrid-n = 100\n", 4, "grid-n"),
    ("format-version = trisap-config/1\nbeta = abc\n", 2, "bad value"),
    ("format-version = trisap-config/1\njust text\n", 2, "expected"),
])
def test_errors_carry_line_numbers(body, line, fragment):
    with pytest.raises(ConfigError) as info:
        cfgmod.parse(body, source="run.cfg")
    assert info.value.line == line
    assert f"run.cfg:{line}:" in str(info.value) and fragment in str(info.value)


def test_version_required():
    with pytest.raises(ConfigError, match="format-version"):
        cfgmod.parse("dmin = 3\n")
    with pytest.raises(ConfigError):
        cfgmod.parse("format-version = trisap-config/9\n")


configs = st.builds(
    SimulationConfig,
    backend=st.sampled_from(["three_mode", "grid2d"]),
    beta=st.floats(0.0, math.pi, exclude_max=True),
    total_time=st.floats(1.0, 1e5),
    delay_frac=st.floats(0.0, 0.9),
    dmin=st.floats(0.5, 5.0),
    dmax=st.floats(6.0, 20.0),
    shake_amp=st.floats(-0.4, 0.4),
    dt=st.floats(1e-3, 0.05),
    grid_n=st.sampled_from([32, 64, 128, 512]),
    nonlinearity_g=st.floats(-1.0, 1.0),
    phi_points=st.integers(1, 64),
    psi0=st.sampled_from("ABC"),
    output_dir=st.sampled_from(["out", "runs/a b", "/tmp/x"]),
)


@settings(max_examples=150)
@given(configs)
def test_round_trip(cfg):
    assert cfgmod.parse(cfgmod.serialize(cfg)) == cfg


def test_output_dir_env_override(monkeypatch):
    monkeypatch.setenv(cfgmod.OUTPUT_ENV, "/tmp/elsewhere")
    assert SimulationConfig().resolved_output_dir() == "/tmp/elsewhere"
    monkeypatch.delenv(cfgmod.OUTPUT_ENV)
    assert SimulationConfig().resolved_output_dir() == "out"


def test_flags_override_file(tmp_path):
    path = tmp_path / "a.cfg"
    path.write_text(text(dmin=3.5, beta="0.5pi"))
    args = cli.build_parser().parse_args(["spectrum", "--config", str(path), "--dmin", "3.2"])
    cfg = cli.config_from_args(args)
    assert cfg.dmin == 3.2 and cfg.beta == pytest.approx(math.pi / 2)


def run(tmp_path, *argv):
    return cli.main([*argv, "--out", str(tmp_path), "--jobs", "1"])


def test_spectrum_command(tmp_path, capsys):
    assert run(tmp_path, "spectrum", "--spectrum-samples", "101") == 0
    assert "level crossings at t = 2500" in capsys.readouterr().out
    lines = (tmp_path / "spectrum.csv").read_text().splitlines()
    assert lines[0] == "# trisap-csv/1 spectrum"
    header, rows = read_csv(tmp_path / "spectrum.csv")
    assert header[:13] == list(cli.TRAJECTORY_HEADER) and "Psi2_A" in header
    assert len(rows) == 101


def test_spectrum_right_angle_has_open_gaps(tmp_path, capsys):
    assert run(tmp_path, "spectrum", "--beta", "0.5pi", "--spectrum-samples", "201") == 0
    assert "level crossings at t = none" in capsys.readouterr().out
    header, rows = read_csv(tmp_path / "spectrum.csv")
    e1, e2, e3 = (header.index(k) for k in ("E1", "E2", "E3"))
    mid = [r for r in rows if 1000 <= r[0] <= 4000]
    assert min(min(r[e2] - r[e1], r[e3] - r[e2]) for r in mid) > 0


def test_spectrum_decoupled_is_flat(tmp_path):
    assert run(tmp_path, "spectrum", "--dmin", "60", "--dmax", "70", "--spectrum-samples", "11") == 0
    header, rows = read_csv(tmp_path / "spectrum.csv")
    assert all(r[header.index(k)] == 0.0 for r in rows for k in ("E1", "E2", "E3"))


def test_sweep_beta_command(tmp_path):
    assert run(tmp_path, "sweep-beta", "--beta-min", "0.5pi", "--beta-max", "2pi/3", "--beta-points", "2") == 0
    header, rows = read_csv(tmp_path / "sweep_beta.csv")
    assert header == ["beta", "beta_over_pi", "P_C_model", "P_C_grid"]
    assert rows[0][2] > 0.99 and rows[1][2] < 0.01
    assert math.isnan(rows[0][3])


def test_interferometer_command(tmp_path):
    assert run(tmp_path, "interferometer", "--phi-points", "4") == 0
    header, rows = read_csv(tmp_path / "interferometer.csv")
    assert header == ["phi_imprint", "P_A", "P_BC", "phi_measured", "deviation"]
    assert [round(r[1], 1) for r in rows] == [1.0, 0.5, 0.0, 0.5]
    summary = (tmp_path / "interferometer_summary.txt").read_text()
    assert "max_phase_deviation_over_pi" in summary and "cosine_result: PASS" in summary
    assert "gpe_gate" not in summary


def test_interferometer_reports_gpe_gate():
    rows = [cli.interferometer.SweepRow(0.0, 1.0, 0.0, 0.0, 0.0)]
    text_, ok = cli.interferometer_summary(SimulationConfig(nonlinearity_g=1e-3), rows, 1.0)
    assert ok and "gpe_gate_10_percent: PASS" in text_


def test_adiabaticity_failure_exit_code(tmp_path, capsys):
    assert run(tmp_path, "interferometer", "--total-time", "200") == cli.EXIT_NUMERICAL
    assert "hint" in capsys.readouterr().err


def test_validation_exit_code(tmp_path):
    assert run(tmp_path, "spectrum", "--grid-n", "100") == cli.EXIT_VALIDATION
    assert run(tmp_path, "spectrum", "--dmin", "x") == cli.EXIT_VALIDATION
    assert run(tmp_path, "interferometer", "--beta", "0.5pi") == cli.EXIT_VALIDATION


def test_io_exit_code(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert cli.main(["spectrum", "--out", str(blocker / "sub")]) == cli.EXIT_IO
    assert cli.main(["spectrum", "--config", str(tmp_path / "missing.cfg")]) == cli.EXIT_IO


def test_shake_command(tmp_path):
    argv = ["shake", "--shake-amp-points", "2", "--shake-freq-points", "2", "--shake-amp-min", "0"]
    assert run(tmp_path, *argv) == 0
    for tag in ("0", "0.5pi", "pi"):
        header, rows = read_csv(tmp_path / f"shake_phi_{tag}.csv")
        assert header == ["A_shake", "omega_shake", "phi_imprint", "delta_phi"]
        assert len(rows) == 4 and rows[0][3] == 0.0


def test_evolve_model(tmp_path):
    assert run(tmp_path, "evolve", "--beta", "0.5pi", "--spectrum-samples", "11") == 0
    header, rows = read_csv(tmp_path / "trajectory.csv")
    assert rows[-1][header.index("P_C")] > 0.99


def test_evolve_grid(tmp_path):
    argv = ["evolve", "--backend", "grid2d", "--total-time", "40", "--grid-n", "32", "--spectrum-samples", "5"]
    assert run(tmp_path, *argv) == 0
    header, rows = read_csv(tmp_path / "populations.csv")
    assert header == ["t", "P_A", "P_B", "P_C", "norm", "warn_flag"]
    assert [r[0] for r in rows] == [0.0, 10.0, 20.0, 30.0, 40.0]
    from trisap.grid2d import read_density_dump
    for k in range(3):
        grid, t, rho = read_density_dump(tmp_path / f"density_t{k}.bin")
        assert t == [0.0, 20.0, 40.0][k] and rho.shape == (32, 32)


def test_output_is_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert run(d, "sweep-beta", "--beta-points", "5") == 0
        assert run(d, "interferometer", "--phi-points", "5") == 0
    for name in ("sweep_beta.csv", "interferometer.csv", "interferometer_summary.txt"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_worker_count_does_not_change_output(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert cli.main(["sweep-beta", "--beta-points", "4", "--out", str(a), "--jobs", "1"]) == 0
    assert cli.main(["sweep-beta", "--beta-points", "4", "--out", str(b), "--jobs", "2"]) == 0
    assert (a / "sweep_beta.csv").read_bytes() == (b / "sweep_beta.csv").read_bytes()
