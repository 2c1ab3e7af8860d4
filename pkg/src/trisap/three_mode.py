"""Three-mode model of the triangular triple well.

The Hamiltonian in the basis of the asymptotic trap ground states
{psi_A, psi_B, psi_C} is

    H = (hbar/2) [[0, -J_AB, -J_AC], [-J_AB, 0, -J_BC], [-J_AC, -J_BC, 0]]

whose characteristic polynomial is the depressed cubic E^3 + pE + q = 0.
Energies come from the trigonometric root formula and are returned in the
root-index order k = 1, 2, 3, which is ascending energy order.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment, minimize_scalar

from .couplings import CouplingTriple, coupling_rate
from .pulses import PulseSchedule

HBAR = 1.0
LABELS = ("Psi1", "Psi2", "Psi3")
CROSSING_GAP_TOL = 1e-9
CROSSING_MIN_COUPLING = 1e-6
# cross-product norms below this (relative to scale^2) mark a degenerate pair
_DEGENERATE_REL = 1e-7


@dataclass(frozen=True)
class SpectrumSnapshot:
    energies: np.ndarray  # (3,), ascending
    vectors: np.ndarray  # (3, 3), column k is the eigenvector of energies[k]
    p: float
    q: float
    discriminant: float


@dataclass
class Trajectory:
    """Result of a three-mode evolution; arrays are indexed by time sample."""
    t: np.ndarray
    amplitudes: np.ndarray  # (n, 3) or (n, 3, m) for batched initial states
    d_AB: np.ndarray
    d_BC: np.ndarray
    d_AC: np.ndarray
    couplings: np.ndarray  # (n, 3) columns J_AB, J_BC, J_AC
    energies: np.ndarray  # (n, 3)

    @property
    def populations(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    @property
    def final(self) -> np.ndarray:
        return self.amplitudes[-1]


def hamiltonian(J: CouplingTriple, hbar: float = HBAR) -> np.ndarray:
    jab, jbc, jac = J.as_tuple()
    return -0.5 * hbar * np.array([[0.0, jab, jac], [jab, 0.0, jbc], [jac, jbc, 0.0]])


def _hamiltonians(jab, jbc, jac, hbar=HBAR):
    n = len(jab)
    H = np.zeros((n, 3, 3))
    H[:, 0, 1] = H[:, 1, 0] = -0.5 * hbar * jab
    H[:, 0, 2] = H[:, 2, 0] = -0.5 * hbar * jac
    H[:, 1, 2] = H[:, 2, 1] = -0.5 * hbar * jbc
    return H


def cubic_coefficients(J: CouplingTriple, hbar: float = HBAR) -> tuple[float, float]:
    jab, jbc, jac = J.as_tuple()
    p = -(hbar**2 / 4.0) * (jab**2 + jbc**2 + jac**2)
    q = (hbar**3 / 4.0) * jab * jbc * jac
    return p, q


def discriminant(J: CouplingTriple, hbar: float = HBAR) -> float:
    """4p^3 + 27q^2; never positive for real couplings, zero iff all rates are equal."""
    p, q = cubic_coefficients(J, hbar)
    return 4.0 * p**3 + 27.0 * q**2


def _energies(jab, jbc, jac):
    """Ascending energies (n, 3) for hbar = 1, scaled internally so tiny rates keep precision."""
    s = np.maximum(np.maximum(jab, jbc), jac)
    safe = np.where(s > 0, s, 1.0)
    a, b, c = jab / safe, jbc / safe, jac / safe
    p = -(a * a + b * b + c * c) / 4.0
    q = a * b * c / 4.0
    r = np.sqrt(-p / 3.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        x = (3.0 * q / (2.0 * p)) * np.sqrt(-3.0 / p)
    x = np.clip(np.nan_to_num(x), -1.0, 1.0)
    theta = np.arccos(x) / 3.0
    k = np.arange(1, 4)
    E = 2.0 * r[:, None] * np.cos(theta[:, None] + k * (2.0 * math.pi / 3.0))
    E[s == 0] = 0.0
    return E * s[:, None]


def _eigenvectors(jab, jbc, jac, E):
    """Orthonormal eigenvectors (n, 3, 3), columns matching E's ordering.

    The primary vector for root k is a_k psi_A + b_k psi_B - c_k psi_C,
    multiplied through by J_AB so that J_AB = 0 is not singular; this is the
    cross product of the first two rows of 2(H - E_k). When that vanishes the
    other row pairs are used, and the most nearly degenerate pair is rebuilt
    by orthonormalisation against the best-isolated vector.
    """
    n = len(jab)
    s = np.maximum(np.maximum(jab, jbc), jac)
    safe = np.where(s > 0, s, 1.0)
    a, b, c = jab / safe, jbc / safe, jac / safe
    e2 = 2.0 * E / safe[:, None]  # 2 E_k / hbar in scaled units

    raw = np.empty((n, 3, 3))
    norms = np.empty((n, 3))
    for k in range(3):
        ek = e2[:, k]
        r1 = np.stack([-ek, -a, -c], axis=1)
        r2 = np.stack([-a, -ek, -b], axis=1)
        r3 = np.stack([-c, -b, -ek], axis=1)
        paper = np.stack([a * b - ek * c, a * c - ek * b, -(a * a - ek * ek)], axis=1)
        alt1 = np.cross(r1, r3)
        alt2 = np.cross(r2, r3)
        cands = np.stack([paper, alt1, alt2], axis=1)
        cn = np.linalg.norm(cands, axis=2)
        best = np.argmax(cn, axis=1)
        v = cands[np.arange(n), best]
        flip = np.einsum("ij,ij->i", v, paper) < 0
        v[flip] *= -1.0
        raw[:, :, k] = v
        norms[:, k] = cn[np.arange(n), best]

    gaps = np.abs(E[:, :, None] - E[:, None, :])
    gaps[:, [0, 1, 2], [0, 1, 2]] = np.inf
    iso = np.argmax(gaps.min(axis=2), axis=1)  # index of the best-separated energy
    out = np.empty_like(raw)
    rows = np.arange(n)
    others = np.array([[1, 2], [0, 2], [0, 1]])[iso]

    u0 = raw[rows, :, iso]
    u0n = np.linalg.norm(u0, axis=1)
    ok0 = u0n > _DEGENERATE_REL
    u0 = np.where(ok0[:, None], u0 / np.where(ok0, u0n, 1.0)[:, None], 0.0)

    ka, kb = others[:, 0], others[:, 1]
    swap = norms[rows, kb] > norms[rows, ka]
    k1 = np.where(swap, kb, ka)
    k2 = np.where(swap, ka, kb)
    u1 = raw[rows, :, k1]
    u1 = u1 - np.einsum("ij,ij->i", u1, u0)[:, None] * u0
    u1n = np.linalg.norm(u1, axis=1)
    ok1 = u1n > _DEGENERATE_REL
    u1 = u1 / np.where(ok1, u1n, 1.0)[:, None]

    # degenerate pair: any orthonormal basis of the complement of u0 will do
    need = ok0 & ~ok1
    if np.any(need):
        basis = np.eye(3)
        pick = np.argmin(np.abs(u0[need]), axis=1)
        e = basis[pick]
        e = e - np.einsum("ij,ij->i", e, u0[need])[:, None] * u0[need]
        u1[need] = e / np.linalg.norm(e, axis=1)[:, None]
    u2 = np.cross(u0, u1)
    ref = raw[rows, :, k2]
    flip = np.einsum("ij,ij->i", u2, ref) < 0
    u2[flip] *= -1.0
    out[rows, :, iso] = u0
    out[rows, :, k1] = u1
    out[rows, :, k2] = u2

    # zero Hamiltonian: canonical basis
    zero = (s == 0) | ~ok0
    out[zero] = np.eye(3)
    return out


def spectrum_series(jab, jbc, jac):
    """Vectorised energies (n, 3) and eigenvectors (n, 3, 3) for arrays of rates."""
    jab = np.atleast_1d(np.asarray(jab, dtype=float))
    jbc = np.atleast_1d(np.asarray(jbc, dtype=float))
    jac = np.atleast_1d(np.asarray(jac, dtype=float))
    E = _energies(jab, jbc, jac)
    V = _eigenvectors(jab, jbc, jac, E)
    return E, V


def spectrum(J: CouplingTriple) -> SpectrumSnapshot:
    E, V = spectrum_series(*J.as_tuple())
    p, q = cubic_coefficients(J)
    return SpectrumSnapshot(E[0], V[0], p, q, 4.0 * p**3 + 27.0 * q**2)


def dark_state_angle(J: CouplingTriple) -> float:
    return math.atan2(J.J_AB, J.J_BC)


def schedule_couplings(schedule: PulseSchedule, beta: float, t):
    """Distances and rates along a schedule: (d_AB, d_BC, d_AC, J_AB, J_BC, J_AC)."""
    d_ab, d_bc = schedule.distances_at(np.atleast_1d(np.asarray(t, dtype=float)))
    d_ac = np.sqrt(np.maximum(d_ab**2 + d_bc**2 + 2.0 * d_ab * d_bc * math.cos(beta), 0.0))
    return d_ab, d_bc, d_ac, coupling_rate(d_ab), coupling_rate(d_bc), coupling_rate(d_ac)


def _upper_gap(schedule, beta, t):
    *_, jab, jbc, jac = schedule_couplings(schedule, beta, t)
    E = _energies(jab, jbc, jac)
    return E[:, 2] - E[:, 1], np.maximum(np.maximum(jab, jbc), jac)


def find_crossings(schedule: PulseSchedule, beta: float, t_grid) -> list[float]:
    """Times at which the two upper levels become degenerate.

    Local minima of the E3 - E2 gap on ``t_grid`` are refined with a bounded
    scalar search; a minimum counts as a crossing when the gap falls below
    1e-9 hbar omega while the couplings are not all negligible.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.size < 3:
        raise ValueError("need at least three time samples")
    gap, jmax = _upper_gap(schedule, beta, t_grid)
    interior = np.nonzero((gap[1:-1] <= gap[:-2]) & (gap[1:-1] <= gap[2:]))[0] + 1
    # a decoupled stretch is a flat plateau of minima; none of it can qualify
    interior = interior[np.maximum(jmax[interior - 1], jmax[interior + 1]) > CROSSING_MIN_COUPLING]
    found: list[float] = []
    for i in interior:
        lo, hi = t_grid[i - 1], t_grid[i + 1]
        res = minimize_scalar(
            lambda tt: float(_upper_gap(schedule, beta, tt)[0][0]),
            bounds=(lo, hi),
            method="bounded",
            options={"xatol": 1e-12 * schedule.T},
        )
        t_star = float(res.x)
        g, jmax = _upper_gap(schedule, beta, t_star)
        if g[0] < CROSSING_GAP_TOL and jmax[0] > CROSSING_MIN_COUPLING:
            if not found or t_star - found[-1] > (hi - lo):
                found.append(t_star)
    return found


def propagators(E, V, dt, hbar=HBAR):
    """Step unitaries V exp(-i E dt / hbar) V^T for each frozen Hamiltonian."""
    phase = np.exp(-1j * E * dt / hbar)
    return np.einsum("nik,nk,njk->nij", V, phase, V)


def evolve(schedule: PulseSchedule, beta: float, psi0, dt: float = 0.1, hbar: float = HBAR) -> Trajectory:
    """Propagate amplitudes over [0, T] with midpoint-frozen exact step unitaries.

    ``psi0`` may be a single state (3,) or a batch (3, m) of states that share
    the schedule. The step is adjusted down so that T is hit exactly.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    psi = np.asarray(psi0, dtype=complex)
    if psi.shape[0] != 3:
        raise ValueError("three-mode state must have three amplitudes")
    norms = np.sqrt(np.sum(np.abs(psi) ** 2, axis=0))
    if np.any(np.abs(norms - 1.0) > 1e-10):
        raise ValueError(f"initial state is not normalised (norm {norms})")

    nsteps = max(1, int(math.ceil(schedule.T / dt - 1e-9)))
    h = schedule.T / nsteps
    t = np.linspace(0.0, schedule.T, nsteps + 1)
    t[-1] = schedule.T
    t_mid = (np.arange(nsteps) + 0.5) * h
    *_, jab, jbc, jac = schedule_couplings(schedule, beta, t_mid)
    E, V = spectrum_series(jab, jbc, jac)
    U = propagators(E, V, h, hbar)

    out = np.empty((nsteps + 1,) + psi.shape, dtype=complex)
    out[0] = psi
    cur = psi
    for n in range(nsteps):
        cur = U[n] @ cur
        out[n + 1] = cur

    d_ab, d_bc, d_ac, jab_s, jbc_s, jac_s = schedule_couplings(schedule, beta, t)
    return Trajectory(
        t=t,
        amplitudes=out,
        d_AB=d_ab,
        d_BC=d_bc,
        d_AC=d_ac,
        couplings=np.stack([jab_s, jbc_s, jac_s], axis=1),
        energies=_energies(jab_s, jbc_s, jac_s),
    )


def final_state(schedule: PulseSchedule, beta: float, psi0, dt: float = 0.1) -> np.ndarray:
    """Like :func:`evolve` but only returns the amplitudes at T."""
    psi = np.asarray(psi0, dtype=complex)
    nsteps = max(1, int(math.ceil(schedule.T / dt - 1e-9)))
    h = schedule.T / nsteps
    t_mid = (np.arange(nsteps) + 0.5) * h
    *_, jab, jbc, jac = schedule_couplings(schedule, beta, t_mid)
    E, V = spectrum_series(jab, jbc, jac)
    U = propagators(E, V, h)
    for n in range(nsteps):
        psi = U[n] @ psi
    return psi


@dataclass
class TrackedPaths:
    """Eigenpairs relabelled by continuity; column j of ``vectors`` follows label j."""
    labels: tuple[str, ...]
    energies: np.ndarray  # (n, 3)
    vectors: np.ndarray  # (n, 3, 3)
    ambiguous: list[int] = field(default_factory=list)


def track_eigenstates(energies, vectors=None, min_overlap: float = 0.9) -> TrackedPaths:
    """Follow eigenstates across samples by maximal overlap.

    Labels are seeded from the root index at the first sample. Each sample is
    matched to the last confidently matched one, so a sample sitting exactly
    on a degeneracy (where the basis of the degenerate pair is arbitrary) does
    not break the chain. Signs are fixed so overlaps are positive. Samples
    where a matched overlap is below ``min_overlap`` are reported in
    ``ambiguous``.
    """
    if isinstance(energies, (list, tuple)) and energies and isinstance(energies[0], SpectrumSnapshot):
        snaps = energies
        energies = np.array([s.energies for s in snaps])
        vectors = np.array([s.vectors for s in snaps])
    E = np.asarray(energies, dtype=float)
    V = np.asarray(vectors, dtype=float)
    n = len(E)
    outE = np.empty_like(E)
    outV = np.empty_like(V)
    outE[0], outV[0] = E[0], V[0]
    ref = V[0]
    ambiguous = []
    for i in range(1, n):
        ov = ref.T @ V[i]  # ov[label, k]
        rows, cols = linear_sum_assignment(-np.abs(ov))
        perm = cols[np.argsort(rows)]
        chosen = ov[np.arange(3), perm]
        vec = V[i][:, perm] * np.sign(np.where(chosen == 0, 1.0, chosen))
        outE[i] = E[i][perm]
        outV[i] = vec
        if np.min(np.abs(chosen)) < min_overlap:
            ambiguous.append(i)
        else:
            ref = vec
    return TrackedPaths(LABELS, outE, outV, ambiguous)
