"""Command-line front end: ``trisap <subcommand> [--config FILE] [--key value ...]``.

Subcommands write plot-ready CSV files into the output directory (the
``--out`` flag, else $TRISAP_OUTPUT_DIR, else the config's output-dir).
Flags override values from the config file.

Exit codes: 0 success, 1 validation error, 2 numerical failure, 3 I/O error.
"""
from __future__ import annotations

import argparse
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import config as cfgmod
from . import grid2d, interferometer, three_mode
from .config import ConfigError, SimulationConfig
from .export import TRAJECTORY_HEADER, trajectory_rows, write_csv
from .pulses import PulseSchedule

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL, EXIT_IO = 0, 1, 2, 3
PHASE_TOL = {"three_mode": 0.02 * math.pi, "grid2d": 0.05 * math.pi}
COSINE_TOL = 0.02
GPE_PHASE_GATE = 0.10  # fraction of pi


class NumericalFailure(RuntimeError):
    pass


def schedule_of(cfg: SimulationConfig) -> PulseSchedule:
    return PulseSchedule.counterintuitive(cfg.total_time, cfg.delay_frac, d_min=cfg.dmin, d_max=cfg.dmax,
                                          shake_amp=cfg.shake_amp, shake_freq=cfg.shake_freq)


def protocol_of(cfg: SimulationConfig) -> interferometer.ProtocolConfig:
    return interferometer.ProtocolConfig(
        backend=cfg.backend, beta=cfg.beta, T=cfg.total_time, delay_frac=cfg.delay_frac,
        d_min=cfg.dmin, d_max=cfg.dmax, shake_amp=cfg.shake_amp, shake_freq=cfg.shake_freq,
        dt_model=cfg.dt_model, dt_grid=cfg.dt, grid_n=cfg.grid_n, grid_margin=cfg.grid_extent,
        g=cfg.nonlinearity_g)


def _sample_index(n_total: int, n_samples: int) -> np.ndarray:
    return np.unique(np.round(np.linspace(0, n_total - 1, min(n_samples, n_total))).astype(int))


def _initial(cfg: SimulationConfig) -> np.ndarray:
    psi = np.zeros(3, dtype=complex)
    psi["ABC".index(cfg.psi0)] = 1.0
    return psi


def cmd_spectrum(cfg: SimulationConfig, outdir: Path) -> Path:
    """Energies, tracked eigenstate compositions and model populations along the schedule."""
    sched = schedule_of(cfg)
    traj = three_mode.evolve(sched, cfg.beta, _initial(cfg), cfg.dt_model)
    E, V = three_mode.spectrum_series(*traj.couplings.T)
    paths = three_mode.track_eigenstates(E, V)
    idx = _sample_index(len(traj.t), cfg.spectrum_samples)
    header = list(TRAJECTORY_HEADER)
    for lab in paths.labels:
        header += [f"E_{lab}", f"{lab}_A", f"{lab}_B", f"{lab}_C"]
    rows = []
    for i, base in zip(idx, trajectory_rows(traj, idx)):
        extra = []
        for j in range(3):
            extra += [paths.energies[i, j], *(paths.vectors[i, :, j] ** 2)]
        rows.append((*base, *extra))
    path = outdir / "spectrum.csv"
    write_csv(path, header, rows, "spectrum")
    crossings = three_mode.find_crossings(sched, cfg.beta, traj.t)
    print(f"spectrum: {len(rows)} rows -> {path}")
    print("level crossings at t = " + (", ".join(f"{t:.6g}" for t in crossings) if crossings else "none"))
    return path


def cmd_evolve(cfg: SimulationConfig, outdir: Path) -> list[Path]:
    """A single forward trajectory on the chosen backend."""
    sched = schedule_of(cfg)
    if cfg.backend == "three_mode":
        traj = three_mode.evolve(sched, cfg.beta, _initial(cfg), cfg.dt_model)
        idx = _sample_index(len(traj.t), cfg.spectrum_samples)
        path = outdir / "trajectory.csv"
        write_csv(path, TRAJECTORY_HEADER, trajectory_rows(traj, idx), "trajectory")
        drift = float(np.max(np.abs(np.sum(traj.populations, axis=1) - 1.0)))
        if drift > 1e-10:
            raise NumericalFailure(f"norm drift {drift:.3g} exceeds 1e-10")
        print(f"final populations (A, B, C) = {tuple(round(float(p), 6) for p in traj.populations[-1])}")
        return [path]

    grid = grid2d.Grid2D.for_schedule(sched, n=cfg.grid_n, margin=cfg.grid_extent)
    layout_at = grid2d.schedule_path(sched, cfg.beta)
    wf = grid2d.asymptotic_state(cfg.psi0, layout_at(0.0), grid)
    record = grid2d.PopulationRecord()
    dumps = []
    marks = [0.0, 0.5 * cfg.total_time, cfg.total_time]
    stride = cfg.total_time / max(cfg.spectrum_samples - 1, 1)
    path0 = outdir / "density_t0.bin"
    grid2d.write_density_dump(wf, path0)
    dumps.append(path0)
    for k, (a, b) in enumerate(zip(marks[:-1], marks[1:]), start=1):
        seg = grid2d.PopulationRecord()
        wf = grid2d.propagate(wf, layout_at, a, b, dt=cfg.dt, g=cfg.nonlinearity_g,
                              record_every=stride, record=seg)
        start = 0 if k == 1 else 1
        record.t += seg.t[start:]
        record.P += seg.P[start:]
        record.norm += seg.norm[start:]
        record.warn += seg.warn[start:]
        p = outdir / f"density_t{k}.bin"
        grid2d.write_density_dump(wf, p)
        dumps.append(p)
    path = outdir / "populations.csv"
    write_csv(path, ("t", "P_A", "P_B", "P_C", "norm", "warn_flag"),
              ((t, *P, n, w) for t, P, n, w in zip(record.t, record.P, record.norm, record.warn)), "populations")
    drift = max(abs(n - 1.0) for n in record.norm)
    if cfg.nonlinearity_g == 0.0 and drift > 1e-8:
        raise NumericalFailure(f"norm drift {drift:.3g} exceeds 1e-8")
    print(f"final populations (A, B, C) = {tuple(round(p, 6) for p in record.P[-1])}")
    return [path, *dumps]


def _model_pc(args):
    sched, beta, dt = args
    psi = three_mode.final_state(sched, beta, np.array([1, 0, 0], dtype=complex), dt)
    return float(abs(psi[2]) ** 2)


def _grid_pc(args):
    sched, beta, n, margin, dt, g = args
    grid = grid2d.Grid2D.for_schedule(sched, n=n, margin=margin)
    layout_at = grid2d.schedule_path(sched, beta)
    wf = grid2d.asymptotic_state("A", layout_at(0.0), grid)
    wf = grid2d.propagate(wf, layout_at, 0.0, sched.T, dt=dt, g=g)
    return grid2d.project_populations(wf, layout_at(sched.T)).P_C


def _pmap(fn, tasks, jobs):
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(fn, tasks))
    return [fn(t) for t in tasks]


def cmd_sweep_beta(cfg: SimulationConfig, outdir: Path, jobs: int = 1) -> Path:
    """Final C population against the triangle angle; the grid column is opt-in."""
    sched = schedule_of(cfg)
    betas = np.linspace(cfg.beta_min, cfg.beta_max, cfg.beta_points)
    model = _pmap(_model_pc, [(sched, float(b), cfg.dt_model) for b in betas], jobs)
    grid_vals = [None] * len(betas)
    if cfg.grid_beta_points > 0:
        pick = _sample_index(len(betas), cfg.grid_beta_points)
        tasks = [(sched, float(betas[i]), cfg.grid_n, cfg.grid_extent, cfg.dt, cfg.nonlinearity_g) for i in pick]
        for i, v in zip(pick, _pmap(_grid_pc, tasks, jobs)):
            grid_vals[i] = v
    path = outdir / "sweep_beta.csv"
    write_csv(path, ("beta", "beta_over_pi", "P_C_model", "P_C_grid"),
              ((b, b / math.pi, m, g) for b, m, g in zip(betas, model, grid_vals)), "sweep-beta")
    print(f"sweep-beta: {len(betas)} angles -> {path}")
    return path


def interferometer_summary(cfg: SimulationConfig, rows, split_fidelity: float) -> tuple[str, bool]:
    max_dev = max(r.deviation for r in rows)
    cos_res = max(abs(r.P_A - 0.5 * (1.0 + math.cos(r.phi_imprint))) for r in rows)
    tol = PHASE_TOL[cfg.backend]
    ok = max_dev < tol
    lines = [
        f"backend: {cfg.backend}",
        f"beta_over_pi: {cfg.beta / math.pi:.12g}",
        f"total_time_2T: {2.0 * cfg.total_time:.12g}",
        f"phase_points: {len(rows)}",
        f"split_fidelity: {split_fidelity:.12g}",
        f"max_phase_deviation_over_pi: {max_dev / math.pi:.12g}",
        f"phase_tolerance_over_pi: {tol / math.pi:.12g}",
        f"phase_result: {'PASS' if ok else 'FAIL'}",
        f"max_cosine_law_residual: {cos_res:.12g}",
        f"cosine_tolerance: {COSINE_TOL:.12g}",
        f"cosine_result: {'PASS' if cos_res < COSINE_TOL else 'FAIL'}",
    ]
    if cfg.nonlinearity_g != 0.0:
        err = max_dev / math.pi
        lines += [
            f"nonlinearity_g: {cfg.nonlinearity_g:.12g}",
            f"phase_error_fraction_of_pi: {err:.12g}",
            f"gpe_gate_10_percent: {'PASS' if err < GPE_PHASE_GATE else 'FAIL'}",
        ]
    lines.append(f"note: {interferometer.PHASE_NOTE}")
    return "\n".join(lines) + "\n", ok


def cmd_interferometer(cfg: SimulationConfig, outdir: Path) -> Path:
    """Phase sweep through split, imprint and recombination; CSV plus a text summary."""
    proto = protocol_of(cfg)
    try:
        split = interferometer.split(proto, strict=True)
    except interferometer.AdiabaticityError as err:
        raise NumericalFailure(f"{err} (hint: raise --total-time or lower --dmin)") from None
    phis = interferometer.default_phis(cfg.phi_points)
    pops = interferometer.recombine(split, phis, proto)
    rows = []
    for phi, (pa, pb, pc) in zip(phis, pops):
        measured = interferometer.read_phase(pa, pb, pc)
        rows.append(interferometer.SweepRow(float(phi), float(pa), float(pb + pc), measured,
                                            abs(measured - interferometer.fold_phase(phi))))
    path = outdir / "interferometer.csv"
    write_csv(path, ("phi_imprint", "P_A", "P_BC", "phi_measured", "deviation"),
              ((r.phi_imprint, r.P_A, r.P_BC, r.phi_measured, r.deviation) for r in rows), "phase-sweep")
    text, _ = interferometer_summary(cfg, rows, split.fidelity)
    (outdir / "interferometer_summary.txt").write_text(text, encoding="utf-8")
    print(text, end="")
    return path


def cmd_shake(cfg: SimulationConfig, outdir: Path, jobs: int = 1) -> list[Path]:
    """Phase error maps over shaking amplitude and frequency for phi in {0, pi/2, pi}."""
    proto = protocol_of(cfg)
    amps = np.linspace(cfg.shake_amp_min, cfg.shake_amp_max, cfg.shake_amp_points)
    freqs = np.linspace(cfg.shake_freq_min, cfg.shake_freq_max, cfg.shake_freq_points)
    phis = (0.0, 0.5 * math.pi, math.pi)
    cells = interferometer.shake_robustness(proto, amps, freqs, phis, jobs=jobs)
    paths = []
    for phi, tag in zip(phis, ("0", "0.5pi", "pi")):
        sel = [c for c in cells if c.phi_imprint == phi]
        path = outdir / f"shake_phi_{tag}.csv"
        write_csv(path, ("A_shake", "omega_shake", "phi_imprint", "delta_phi"),
                  ((c.A_shake, c.omega_shake, c.phi_imprint, c.delta_phi) for c in sel), "shake-map")
        below = sum(c.delta_phi < 0.1 * math.pi for c in sel)
        print(f"phi={tag}: {below}/{len(sel)} cells with delta_phi < 0.1 pi -> {path}")
        paths.append(path)
    return paths


COMMANDS = {
    "spectrum": "energies and eigenstate compositions along the schedule",
    "evolve": "single trajectory on the chosen backend",
    "sweep-beta": "final C population against beta",
    "interferometer": "phase sweep through the full interferometer",
    "shake": "robustness maps against shaking of the trap distances",
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value config file")
    common.add_argument("--out", help="output directory (overrides config and environment)")
    common.add_argument("--jobs", type=int, default=os.cpu_count() or 1, help="worker processes for sweeps")
    for key in cfgmod.KEYS:
        if key == "format-version":
            continue
        common.add_argument(f"--{key}", dest=key.replace("-", "_"), default=None, metavar="VALUE")
    parser = argparse.ArgumentParser(prog="trisap", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=help_text)
    return parser


def config_from_args(args) -> SimulationConfig:
    cfg = cfgmod.load(args.config) if args.config else SimulationConfig()
    overrides = {}
    for key in cfgmod.KEYS:
        name = key.replace("-", "_")
        raw = getattr(args, name, None)
        if raw is None or name == "format_version":
            continue
        try:
            overrides[name] = cfgmod.convert(name, raw)
        except ValueError:
            raise ConfigError(f"bad value {raw!r} for --{key}") from None
    return cfg.replace(**overrides).validate()


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = config_from_args(args)
    except ConfigError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as err:
        print(f"error: cannot read config: {err}", file=sys.stderr)
        return EXIT_IO
    outdir = Path(args.out or cfg.resolved_output_dir())
    try:
        outdir.mkdir(parents=True, exist_ok=True)
        if args.command == "spectrum":
            cmd_spectrum(cfg, outdir)
        elif args.command == "evolve":
            cmd_evolve(cfg, outdir)
        elif args.command == "sweep-beta":
            cmd_sweep_beta(cfg, outdir, args.jobs)
        elif args.command == "interferometer":
            cmd_interferometer(cfg, outdir)
        elif args.command == "shake":
            cmd_shake(cfg, outdir, args.jobs)
    except NumericalFailure as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValueError, ConfigError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as err:
        print(f"I/O error: {err}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
