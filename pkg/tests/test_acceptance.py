"""Acceptance criteria, one test each.

Every test prints a single ``CRITERION n ...: PASS|FAIL`` line (collected into
the pytest terminal summary) and then asserts. Tolerances are fixed constants
below. Run alone with ``pytest tests/test_acceptance.py -v`` or as a script.
"""
import math
import sys

import mpmath
import numpy as np
import pytest
from scipy import ndimage

from trisap import cli, grid2d as g2, interferometer as itf, three_mode as tm
from trisap.config import SimulationConfig
from trisap.couplings import TrapLayout, coupling_rate
from trisap.pulses import PulseSchedule

try:
    from conftest import ACCEPTANCE_LINES
except ImportError:  # executed as a script from elsewhere
    ACCEPTANCE_LINES = []

T = 5000.0
DT_MODEL = 0.1
BETA_C = 2 * math.pi / 3
SCHED = PulseSchedule.counterintuitive(T, 0.2)
PSI_A = np.array([1, 0, 0], dtype=complex)
MODEL = itf.ProtocolConfig()
GRID = itf.ProtocolConfig(backend="grid2d")
PHIS = itf.default_phis(17)

# criterion tolerances
C1_MODEL, C1_GRID = 0.99, 0.98
C2_HALF, C2_C = 0.02, 0.01
C3_PLATEAU, C3_DIP, C3_RECOVER, C3_AGREE, C3_POINTS = 0.95, 0.01, 0.9, 0.02, 64
C3_SPOT_BETAS = (0.3 * math.pi, 0.5 * math.pi, 0.55 * math.pi, BETA_C, 0.7 * math.pi)
C4_COSINE, C4_GRID_PHASE = 0.02, 0.05 * math.pi
C6_EIG, C6_RATE, C6_OVERLAP = 1e-9, 1e-10, 1e-6
C7_NORM, C7_UNITARY, C7_STATIONARY = 1e-8, 1e-10, 1e-6
C8_SHAKE, C8_BETA_FRAC = 0.1 * math.pi, 0.01
C9_GS, C9_POP, C9_GATE = (1e-3, -1e-3), 0.01, 0.10
C9_GRID_N, C9_PHIS = 64, (0.0, math.pi / 2, math.pi)


def report(n: int, title: str, ok: bool, detail: str) -> None:
    line = f"CRITERION {n} {title}: {'PASS' if ok else 'FAIL'} ({detail})"
    ACCEPTANCE_LINES.append(line)
    print(line)


def grid_final(beta: float, n: int = 128) -> tuple[float, float, float]:
    grid = g2.Grid2D.for_schedule(SCHED, n=n)
    path = g2.schedule_path(SCHED, beta)
    out = g2.propagate(g2.asymptotic_state("A", path(0.0), grid), path, 0.0, T, dt=0.05)
    return g2.project_populations(out, path(T)).as_tuple()


def model_final(beta: float) -> np.ndarray:
    return np.abs(tm.final_state(SCHED, beta, PSI_A, DT_MODEL)) ** 2


@pytest.fixture(scope="module")
def grid_right_angle():
    return grid_final(math.pi / 2)


@pytest.fixture(scope="module")
def grid_split():
    return itf.split(GRID)


@pytest.fixture(scope="module")
def grid_sweep(grid_split):
    pops = itf.recombine(grid_split, PHIS, GRID)
    return [(phi, *p) for phi, p in zip(PHIS, pops)]


@pytest.fixture(scope="module")
def model_beta_sweep():
    betas = np.linspace(0.1 * math.pi, 0.8 * math.pi, C3_POINTS)
    return betas, np.array([model_final(b)[2] for b in betas])


def test_criterion_1_transfer(grid_right_angle):
    pm = model_final(math.pi / 2)[2]
    pg = grid_right_angle[2]
    ok = pm >= C1_MODEL and pg >= C1_GRID
    report(1, "transfer at beta=pi/2", ok, f"model P_C={pm:.5f} >= {C1_MODEL}, grid P_C={pg:.5f} >= {C1_GRID}")
    assert ok


def test_criterion_2_splitting(grid_split):
    def good(p):
        return abs(p[0] - 0.5) < C2_HALF and abs(p[1] - 0.5) < C2_HALF and p[2] < C2_C
    pm = model_final(BETA_C)
    pg = grid_split.populations
    ok = good(pm) and good(pg)
    fmt = lambda p: "(" + ", ".join(f"{x:.4f}" for x in p) + ")"
    report(2, "splitting at beta=2pi/3", ok, f"model {fmt(pm)}, grid {fmt(pg)}")
    assert ok


def test_criterion_3_beta_sweep(model_beta_sweep, grid_right_angle, grid_split):
    betas, pc = model_beta_sweep
    width = betas[1] - betas[0]
    plateau = bool(np.all(pc[betas <= BETA_C - 0.05 * math.pi] > C3_PLATEAU))
    dip = float(pc[np.abs(betas - BETA_C) <= width].min())
    above = (betas > BETA_C) & (betas <= BETA_C + 0.05 * math.pi)
    recovery = float(pc[above].max())
    peak_above = float(pc[betas > BETA_C].max())
    decline = pc[-1] < peak_above - 1e-3
    known = {math.pi / 2: grid_right_angle[2], BETA_C: grid_split.populations[2]}
    diffs = []
    for b in C3_SPOT_BETAS:
        g = known[b] if b in known else grid_final(b)[2]
        diffs.append(abs(g - model_final(b)[2]))
    agree = max(diffs) < C3_AGREE
    ok = plateau and dip < C3_DIP and recovery > C3_RECOVER and decline and agree
    report(3, "beta sweep shape", ok,
           f"{len(betas)} pts; plateau>{C3_PLATEAU}: {plateau}; dip={dip:.4f}<{C3_DIP}; "
           f"recovery={recovery:.4f}>{C3_RECOVER}; decline {peak_above:.4f}->{pc[-1]:.4f}; "
           f"grid-model max diff={max(diffs):.4f}<{C3_AGREE}")
    assert ok


def test_criterion_4_readout(grid_sweep):
    rows = itf.phase_sweep(MODEL, PHIS)
    cos_res = max(abs(r.P_A - 0.5 * (1 + math.cos(r.phi_imprint))) for r in rows)
    grid_dev = max(abs(itf.read_phase(pa, pb, pc) - itf.fold_phase(phi)) for phi, pa, pb, pc in grid_sweep)
    ok = cos_res < C4_COSINE and grid_dev < C4_GRID_PHASE
    report(4, "readout law", ok, f"model cosine residual={cos_res:.5f}<{C4_COSINE}; "
           f"grid max folded deviation={grid_dev / math.pi:.4f} pi<0.05 pi")
    assert ok


def test_criterion_5_crossing():
    t = np.arange(0.0, T + DT_MODEL / 2, DT_MODEL)
    found = tm.find_crossings(SCHED, BETA_C, t)
    ok = len(found) == 1 and abs(found[0] - 0.5 * T) <= DT_MODEL
    report(5, "crossing location", ok, f"crossings={[round(x, 6) for x in found]}, expected {0.5 * T} +- {DT_MODEL}")
    assert ok


def test_criterion_6_oracles():
    rng = np.random.default_rng(2024)
    J = rng.uniform(0.0, 1.0, size=(10_000, 3))
    E, _ = tm.spectrum_series(*J.T)
    eig_err = float(np.max(np.abs(np.sort(E, axis=1) - np.linalg.eigvalsh(tm._hamiltonians(*J.T)))))

    mpmath.mp.dps = 50
    def ref(x):
        x = mpmath.mpf(x)
        num = -1 + mpmath.exp((x / 2) ** 2) * (1 + mpmath.sqrt(mpmath.pi) * x * mpmath.erfc(x / 2) / 2)
        return float(num / (mpmath.sqrt(mpmath.pi) * (mpmath.exp(x * x / 2) - 1) / x))
    xs = np.logspace(-3, math.log10(30.0), 100)
    rate_err = float(np.max(np.abs(coupling_rate(xs) / np.array([ref(x) for x in xs]) - 1.0)))

    grid = g2.Grid2D(128, 128, 18.0, 18.0)
    ov_err = 0.0
    for d in np.linspace(0.5, 10.0, 20):
        lay = TrapLayout(math.pi / 2, 10.0, float(d))
        b, c = (g2.asymptotic_state(k, lay, grid) for k in "BC")
        ov_err = max(ov_err, abs(b.inner(c) - math.exp(-d * d / 4)))
    ok = eig_err < C6_EIG and rate_err < C6_RATE and ov_err < C6_OVERLAP
    report(6, "oracle suites", ok, f"(a) energies {eig_err:.2e}<{C6_EIG}; (b) rate rel {rate_err:.2e}<{C6_RATE}; "
           f"(c) overlap {ov_err:.2e}<{C6_OVERLAP}")
    assert ok


def test_criterion_7_conservation(grid_split):
    norm_drift = abs(grid_split.state.norm() - 1.0)  # 1e5 steps: T=5000 at dt=0.05
    traj = tm.evolve(SCHED, BETA_C, PSI_A, DT_MODEL)
    unitary = float(np.max(np.abs(traj.populations.sum(axis=1) - 1.0)))
    lay = TrapLayout(BETA_C, 10.0, 10.0)
    grid = g2.Grid2D.for_schedule(SCHED, n=128)
    wf = g2.asymptotic_state("B", lay, grid)
    out = g2.propagate(wf, lambda t: lay, 0.0, 100.0, dt=0.05)
    stat = 1.0 - abs(wf.inner(out))
    ok = norm_drift < C7_NORM and unitary < C7_UNITARY and stat < C7_STATIONARY
    report(7, "conservation gates", ok, f"grid norm drift/1e5 steps={norm_drift:.2e}<{C7_NORM}; "
           f"model unitarity={unitary:.2e}<{C7_UNITARY}; 1-|<psi0|psi(100)>|={stat:.2e}<{C7_STATIONARY}")
    assert ok


def largest_region(ok_map: np.ndarray) -> int:
    labels, n = ndimage.label(ok_map)
    return int(max((np.sum(labels == i) for i in range(1, n + 1)), default=0))


def test_criterion_8_robustness():
    d = SimulationConfig()
    amps = np.linspace(d.shake_amp_min, d.shake_amp_max, d.shake_amp_points)
    freqs = np.linspace(d.shake_freq_min, d.shake_freq_max, d.shake_freq_points)
    phis = (0.0, math.pi / 2, math.pi)
    cells = itf.shake_robustness(MODEL, amps, freqs, phis)
    need = math.ceil(0.5 * len(amps) * len(freqs))
    regions = []
    for phi in phis:
        m = np.array([c.delta_phi for c in cells if c.phi_imprint == phi]).reshape(len(amps), len(freqs))
        regions.append(largest_region(m < C8_SHAKE))
    shake_ok = min(regions) >= need
    beta_res = []
    for f in (1.0 - C8_BETA_FRAC, 1.0 + C8_BETA_FRAC):
        rows = itf.phase_sweep(MODEL.replace(beta=BETA_C * f), PHIS)
        beta_res.append(max(abs(r.P_A - 0.5 * (1 + math.cos(r.phi_imprint))) for r in rows))
    beta_ok = max(beta_res) < C4_COSINE
    ok = shake_ok and beta_ok
    report(8, "robustness", ok, f"largest dphi<0.1pi region per phi={regions} (need >= {need}); "
           f"beta -+1% cosine residual={[round(x, 4) for x in beta_res]} (need < {C4_COSINE})")
    assert ok


def test_criterion_9_gpe_continuity():
    base = GRID.replace(grid_n=C9_GRID_N)
    linear = itf.recombine(itf.split(base), C9_PHIS, base)
    diffs, gates = [], []
    for g in C9_GS:
        cfg = base.replace(g=g)
        pops = itf.recombine(itf.split(cfg), C9_PHIS, cfg)
        diffs.append(float(np.max(np.abs(pops - linear))))
        rows = [itf.SweepRow(phi, p[0], p[1] + p[2], m := itf.read_phase(*p), abs(m - itf.fold_phase(phi)))
                for phi, p in zip(C9_PHIS, pops)]
        text, _ = cli.interferometer_summary(SimulationConfig(backend="grid2d", nonlinearity_g=g), rows, 1.0)
        gates.append("gpe_gate_10_percent: PASS" in text and "phase_error_fraction_of_pi" in text)
    ok = max(diffs) < C9_POP and all(gates)
    report(9, "GPE continuity", ok, f"g={list(C9_GS)}: max |P - P_linear|={[f'{x:.2e}' for x in diffs]} "
           f"(need < {C9_POP}); summary 10% gate reported and passed: {gates}")
    assert ok


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-s"]))
