"""Split-operator solver for the 2D Schrodinger / Gross-Pitaevskii equation.

The landscape is the pointwise minimum of three identical harmonic wells
whose centres move with the trap layout. Periodic FFT boundaries; the domain
is padded well beyond the outermost trap so periodic images never overlap.

Fields are stored as arrays of shape (N_y, N_x): rows run along y.
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import fft as sfft

from .couplings import TrapLayout
from .export import write_csv
from .pulses import PulseSchedule

TRAPS = ("A", "B", "C")
MIN_MARGIN = 6.0
DEFAULT_MARGIN = 8.0
ORTHOGONAL_SEPARATION = 8.0
# momentum beyond which a trap ground state's amplitude is below 1e-6
K_CONTENT = math.sqrt(12.0 * math.log(10.0))


class DomainError(ValueError):
    """A trap centre came closer to the domain edge than the allowed margin."""


class TimestepError(ValueError):
    """The time step does not resolve the kinetic phase of the wavefunction content."""


@dataclass(frozen=True)
class Grid2D:
    nx: int
    ny: int
    Lx: float
    Ly: float

    def __post_init__(self):
        for n in (self.nx, self.ny):
            if n < 2 or n & (n - 1):
                raise ValueError(f"grid point counts must be powers of two, got {n}")
        if self.Lx <= 0 or self.Ly <= 0:
            raise ValueError("half-extents must be positive")

    @classmethod
    def covering(cls, radius: float, spacing: float = 0.3, margin: float = DEFAULT_MARGIN) -> "Grid2D":
        """Square grid on [-L, L)^2 with L = radius + margin and spacing at most ``spacing``."""
        L = radius + margin
        n = 1 << int(math.ceil(math.log2(2.0 * L / spacing)))
        return cls(n, n, L, L)

    @classmethod
    def for_schedule(cls, schedule: PulseSchedule, spacing: float = 0.3, margin: float = DEFAULT_MARGIN,
                     n: Optional[int] = None) -> "Grid2D":
        radius = schedule.d_max + abs(schedule.shake_amp)
        if n is not None:
            L = radius + margin
            return cls(n, n, L, L)
        return cls.covering(radius, spacing, margin)

    @property
    def dx(self) -> float:
        return 2.0 * self.Lx / self.nx

    @property
    def dy(self) -> float:
        return 2.0 * self.Ly / self.ny

    @property
    def dA(self) -> float:
        return self.dx * self.dy

    @property
    def x(self) -> np.ndarray:
        return -self.Lx + self.dx * np.arange(self.nx)

    @property
    def y(self) -> np.ndarray:
        return -self.Ly + self.dy * np.arange(self.ny)

    def mesh(self):
        return np.meshgrid(self.x, self.y)

    @property
    def kmax(self) -> float:
        return math.pi * max(1.0 / self.dx, 1.0 / self.dy)

    def k2(self) -> np.ndarray:
        kx = 2.0 * math.pi * np.fft.fftfreq(self.nx, self.dx)
        ky = 2.0 * math.pi * np.fft.fftfreq(self.ny, self.dy)
        return kx[None, :] ** 2 + ky[:, None] ** 2

    def margin_of(self, point) -> float:
        px, py = point
        return min(self.Lx - abs(px), self.Ly - abs(py))


@dataclass
class Wavefunction2D:
    grid: Grid2D
    psi: np.ndarray
    t: float = 0.0

    def norm(self) -> float:
        return float(np.sum(np.abs(self.psi) ** 2) * self.grid.dA)

    def density(self) -> np.ndarray:
        return np.abs(self.psi) ** 2

    def inner(self, other: "Wavefunction2D") -> complex:
        """<self|other> on the grid."""
        return complex(np.vdot(self.psi, other.psi) * self.grid.dA)

    def copy(self) -> "Wavefunction2D":
        return Wavefunction2D(self.grid, self.psi.copy(), self.t)


def _ground_1d(u):
    return math.pi ** -0.25 * np.exp(-0.5 * u * u)


def gaussian_at(grid: Grid2D, center) -> np.ndarray:
    """Harmonic ground state centred at ``center``, unit norm on the grid."""
    cx, cy = center
    phi = _ground_1d(grid.y - cy)[:, None] * _ground_1d(grid.x - cx)[None, :]
    return phi / math.sqrt(np.sum(phi * phi) * grid.dA)


def _trap_center(trap: str, layout: TrapLayout):
    try:
        return {"A": layout.pos_A, "B": layout.pos_B, "C": layout.pos_C}[trap]
    except KeyError:
        raise ValueError(f"unknown trap {trap!r}") from None


def asymptotic_state(trap: str, layout: TrapLayout, grid: Grid2D) -> Wavefunction2D:
    center = _trap_center(trap, layout)
    if grid.margin_of(center) < MIN_MARGIN:
        raise DomainError(f"trap {trap} at {center} is within {MIN_MARGIN} of the domain edge")
    return Wavefunction2D(grid, gaussian_at(grid, center).astype(complex))


def potential(grid: Grid2D, layout: TrapLayout, omega: float = 1.0) -> np.ndarray:
    """Truncated harmonic landscape: minimum of the three parabolas."""
    x, y = grid.x, grid.y
    V = None
    for cx, cy in layout.centers():
        Vi = (0.5 * omega**2) * ((x - cx) ** 2)[None, :] + (0.5 * omega**2) * ((y - cy) ** 2)[:, None]
        V = Vi if V is None else np.minimum(V, Vi)
    return V


def energy(wf: Wavefunction2D, layout: TrapLayout, g: float = 0.0) -> float:
    """<H> with the spectral kinetic term (and mean-field term g|psi|^4 / 2)."""
    grid = wf.grid
    phik = sfft.fft2(wf.psi)
    kin = 0.5 * np.sum(grid.k2() * np.abs(phik) ** 2) * grid.dA / (grid.nx * grid.ny)
    rho = np.abs(wf.psi) ** 2
    pot = np.sum(potential(grid, layout) * rho) * grid.dA
    inter = 0.5 * g * np.sum(rho * rho) * grid.dA
    return float(kin + pot + inter)


def check_timestep(grid: Grid2D, dt: float) -> None:
    """Phase condition dt * k^2 / 2 < pi/4 on the populated part of the spectrum.

    The cutoff is the smaller of the grid Nyquist wavenumber and the momentum
    where a trap ground state has decayed to 1e-6 in amplitude.
    """
    if dt <= 0:
        raise TimestepError("dt must be positive")
    k = min(grid.kmax, K_CONTENT)
    if dt * k * k / 2.0 >= math.pi / 4.0 or dt >= math.pi / 4.0:
        limit = min(math.pi / 2.0 / (k * k), math.pi / 4.0)
        raise TimestepError(f"dt={dt} too large; need dt < {limit:.4g}")


def schedule_path(schedule: PulseSchedule, beta: float) -> Callable[[float], TrapLayout]:
    def layout_at(t: float) -> TrapLayout:
        d_ab, d_bc = schedule.distances_at(t)
        return TrapLayout(beta, d_ab, d_bc)
    return layout_at


@dataclass(frozen=True)
class Populations:
    P_A: float
    P_B: float
    P_C: float
    non_orthogonal: bool = False

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.P_A, self.P_B, self.P_C)

    @property
    def total(self) -> float:
        return self.P_A + self.P_B + self.P_C


def project_populations(wf: Wavefunction2D, layout: TrapLayout) -> Populations:
    """|<psi_i|psi>|^2 against the asymptotic states at the current trap positions.

    ``non_orthogonal`` is set when any pair of traps is closer than 8 / alpha,
    where the Gaussian basis overlaps enough that the numbers stop being
    probabilities.
    """
    grid = wf.grid
    pops = []
    for trap in TRAPS:
        phi = gaussian_at(grid, _trap_center(trap, layout))
        pops.append(abs(np.vdot(phi, wf.psi) * grid.dA) ** 2)
    close = min(layout.d_AB, layout.d_BC, layout.d_AC) < ORTHOGONAL_SEPARATION
    return Populations(float(pops[0]), float(pops[1]), float(pops[2]), close)


def voronoi_mask(grid: Grid2D, layout: TrapLayout, trap: str = "B") -> np.ndarray:
    """Grid points strictly closer to ``trap`` than to either other trap centre."""
    X, Y = grid.mesh()
    d2 = {name: (X - c[0]) ** 2 + (Y - c[1]) ** 2
          for name, c in zip(TRAPS, layout.centers())}
    mine = d2.pop(trap)
    others = list(d2.values())
    return (mine < others[0]) & (mine < others[1])


def imprint_phase(wf: Wavefunction2D, layout: TrapLayout, phi: float, trap: str = "B") -> Wavefunction2D:
    """Multiply the wavefunction by exp(i phi) on the region belonging to ``trap``."""
    if min(layout.d_AB, layout.d_BC, layout.d_AC) <= ORTHOGONAL_SEPARATION:
        raise ValueError("traps are too close for a regional phase imprint "
                         f"(need all separations > {ORTHOGONAL_SEPARATION})")
    if phi == 0.0:
        return wf.copy()
    mask = voronoi_mask(wf.grid, layout, trap)
    psi = wf.psi.copy()
    psi[mask] *= np.exp(1j * phi)
    return Wavefunction2D(wf.grid, psi, wf.t)


@dataclass
class PopulationRecord:
    t: list = field(default_factory=list)
    P: list = field(default_factory=list)
    norm: list = field(default_factory=list)
    warn: list = field(default_factory=list)

    def append(self, t, pops: Populations, norm):
        self.t.append(t)
        self.P.append(pops.as_tuple())
        self.norm.append(norm)
        self.warn.append(pops.non_orthogonal)

    def write_csv(self, path) -> None:
        write_csv(path, ("t", "P_A", "P_B", "P_C", "norm", "warn_flag"),
                  ((t, *P, n, bool(w)) for t, P, n, w in zip(self.t, self.P, self.norm, self.warn)), "populations")


def propagate(wf: Wavefunction2D, layout_at: Callable[[float], TrapLayout], t0: float, t1: float,
              dt: float = 0.05, g: float = 0.0, record_every: Optional[float] = None,
              record: Optional[PopulationRecord] = None, check_margin: bool = True) -> Wavefunction2D:
    """Strang-split step ``wf`` from t0 to t1 under the moving landscape.

    Each step is half a kinetic step, a full potential kick with V sampled at
    the step midpoint (plus g|psi|^2 if nonlinear), and half a kinetic step.
    Adjacent kinetic half steps are fused except around recorded samples.
    ``layout_at`` maps absolute time to a :class:`TrapLayout`. ``wf.psi`` may
    carry extra leading axes to propagate a batch of fields together (linear
    case only).
    """
    grid = wf.grid
    check_timestep(grid, dt)
    if t1 < t0:
        raise ValueError("t1 must not precede t0")
    psi = np.array(wf.psi, dtype=complex)
    if g != 0.0 and psi.ndim != 2:
        raise ValueError("batched propagation is only valid for the linear equation")
    nsteps = max(1, int(math.ceil((t1 - t0) / dt - 1e-9))) if t1 > t0 else 0
    if nsteps == 0:
        return Wavefunction2D(grid, psi, t1)
    h = (t1 - t0) / nsteps
    k2 = grid.k2()
    half_kin = np.exp(-0.25j * h * k2)
    full_kin = half_kin * half_kin
    x, y = grid.x, grid.y
    axes = (-2, -1)

    rec_stride = None
    if record is not None:
        rec_stride = 1 if record_every is None else max(1, int(round(record_every / h)))
        if psi.ndim == 2:
            layout = layout_at(t0)
            record.append(t0, project_populations(Wavefunction2D(grid, psi), layout), float(np.sum(np.abs(psi) ** 2) * grid.dA))

    phik = sfft.fft2(psi, axes=axes) * half_kin
    for n in range(nsteps):
        tm = t0 + (n + 0.5) * h
        layout = layout_at(tm)
        if check_margin:
            for c in layout.centers():
                if grid.margin_of(c) < MIN_MARGIN:
                    raise DomainError(f"trap centre {tuple(c)} left the padded domain at t={tm:.6g}")
        V = None
        for cx, cy in layout.centers():
            Vi = (0.5 * (x - cx) ** 2)[None, :] + (0.5 * (y - cy) ** 2)[:, None]
            V = Vi if V is None else np.minimum(V, Vi)
        psi = sfft.ifft2(phik, axes=axes)
        if g != 0.0:
            V = V + g * (psi.real**2 + psi.imag**2)
        psi *= np.exp(-1j * h * V)
        phik = sfft.fft2(psi, axes=axes)
        last = n == nsteps - 1
        sample = rec_stride is not None and ((n + 1) % rec_stride == 0 or last)
        if last or sample:
            phik *= half_kin
            if sample and psi.ndim == 2:
                out = sfft.ifft2(phik)
                t_now = t0 + (n + 1) * h
                record.append(t_now, project_populations(Wavefunction2D(grid, out), layout_at(t_now)),
                              float(np.sum(np.abs(out) ** 2) * grid.dA))
            if not last:
                phik *= half_kin
        else:
            phik *= full_kin
    return Wavefunction2D(grid, sfft.ifft2(phik, axes=axes), t1)


def write_density_dump(wf: Wavefunction2D, path) -> None:
    """|psi|^2 as little-endian float64, row-major (N_y, N_x), after a 5-value header."""
    g = wf.grid
    with open(path, "wb") as fh:
        fh.write(struct.pack("<5d", g.nx, g.ny, g.Lx, g.Ly, wf.t))
        fh.write(np.ascontiguousarray(wf.density(), dtype="<f8").tobytes())


def read_density_dump(path):
    """Return (Grid2D, t, density) from a file written by :func:`write_density_dump`."""
    with open(path, "rb") as fh:
        nx, ny, Lx, Ly, t = struct.unpack("<5d", fh.read(40))
        data = np.frombuffer(fh.read(), dtype="<f8")
    grid = Grid2D(int(nx), int(ny), Lx, Ly)
    return grid, t, data.reshape(grid.ny, grid.nx)
