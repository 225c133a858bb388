"""Small relativistic particle-in-cell solver on a periodic box.

Units: unit charge-to-mass ratio, unit speed of light, unit vacuum
permittivity. Particle weights are charges; a uniform immobile background of
density ``rho_bg`` neutralizes the box.

Fields live on a Yee grid with cell size ``dx``. Component offsets (in cells)
are listed in ``E_OFFSETS`` and ``B_OFFSETS``; charge density lives on the
nodes. A step is: Boris push with fields gathered at integer time, drift,
charge-conserving current deposition, then a leapfrog field update with B
split into two half steps so that E and B are both available at integer
times.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

E_OFFSETS = np.array([[0.5, 0.0, 0.0], [0.0, 0.5, 0.0], [0.0, 0.0, 0.5]])
B_OFFSETS = np.array([[0.0, 0.5, 0.5], [0.5, 0.0, 0.5], [0.5, 0.5, 0.0]])
FIELD_OFFSETS = np.vstack([E_OFFSETS, B_OFFSETS])


class CFLViolation(ValueError):
    pass


class GaussSolveError(RuntimeError):
    pass


@dataclass(frozen=True)
class GridSpec:
    cells: int
    dx: float
    origin: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if self.cells < 4:
            raise ValueError("need at least 4 cells per axis")
        if not self.dx > 0:
            raise ValueError("dx must be positive")

    @property
    def length(self) -> float:
        return self.cells * self.dx

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.cells,) * 3

    @property
    def cell_volume(self) -> float:
        return self.dx ** 3

    @property
    def center(self) -> np.ndarray:
        return np.asarray(self.origin, float) + 0.5 * self.length

    def max_dt(self) -> float:
        return self.dx / math.sqrt(3.0)


# ---------------------------------------------------------------------------
# Discrete operators (periodic)
# ---------------------------------------------------------------------------

def _fwd(a, axis, dx):
    return (np.roll(a, -1, axis) - a) / dx


def _bwd(a, axis, dx):
    return (a - np.roll(a, 1, axis)) / dx


def curl_E(E: np.ndarray, dx: float) -> np.ndarray:
    """Curl of the edge field E, located on the faces where B lives."""
    return np.stack([_fwd(E[2], 1, dx) - _fwd(E[1], 2, dx),
                     _fwd(E[0], 2, dx) - _fwd(E[2], 0, dx),
                     _fwd(E[1], 0, dx) - _fwd(E[0], 1, dx)])


def curl_B(B: np.ndarray, dx: float) -> np.ndarray:
    """Curl of the face field B, located on the edges where E lives."""
    return np.stack([_bwd(B[2], 1, dx) - _bwd(B[1], 2, dx),
                     _bwd(B[0], 2, dx) - _bwd(B[2], 0, dx),
                     _bwd(B[1], 0, dx) - _bwd(B[0], 1, dx)])


def div_E(E: np.ndarray, dx: float) -> np.ndarray:
    """Node-centred divergence of E."""
    return _bwd(E[0], 0, dx) + _bwd(E[1], 1, dx) + _bwd(E[2], 2, dx)


def div_B(B: np.ndarray, dx: float) -> np.ndarray:
    """Cell-centred divergence of B."""
    return _fwd(B[0], 0, dx) + _fwd(B[1], 1, dx) + _fwd(B[2], 2, dx)


def poisson_E(charge: np.ndarray, dx: float) -> np.ndarray:
    """Yee field ``E = -grad phi`` with ``div_E(E) = charge`` exactly.

    Uses the symbol of the discrete Laplacian; ``charge`` must have zero mean.
    """
    n = charge.shape
    k = [2.0 * np.pi * np.fft.fftfreq(n[a], d=dx) for a in range(3)]
    K = np.meshgrid(*k, indexing="ij")
    lam = sum((2.0 / dx * np.sin(0.5 * K[a] * dx)) ** 2 for a in range(3))
    rhat = np.fft.fftn(charge)
    lam[0, 0, 0] = 1.0
    phi_hat = rhat / lam
    phi_hat[0, 0, 0] = 0.0
    phi = np.real(np.fft.ifftn(phi_hat))
    return -np.stack([_fwd(phi, a, dx) for a in range(3)])


# ---------------------------------------------------------------------------
# Particle kernels
# ---------------------------------------------------------------------------

@njit(cache=True)
def _cic(g, base, out):
    for a in range(4):
        d = abs(g - (base - 1 + a))
        out[a] = 1.0 - d if d < 1.0 else 0.0


@njit(cache=True)
def gather(fields, offsets, origin, dx, pos, out):
    """Linear (CIC) interpolation of the six staggered components."""
    n = fields.shape[1]
    for p in range(pos.shape[0]):
        for c in range(6):
            gx = (pos[p, 0] - origin[0]) / dx - offsets[c, 0]
            gy = (pos[p, 1] - origin[1]) / dx - offsets[c, 1]
            gz = (pos[p, 2] - origin[2]) / dx - offsets[c, 2]
            ix = int(math.floor(gx))
            iy = int(math.floor(gy))
            iz = int(math.floor(gz))
            fx = gx - ix
            fy = gy - iy
            fz = gz - iz
            acc = 0.0
            for a in range(2):
                wx = fx if a else 1.0 - fx
                jx = (ix + a) % n
                for b in range(2):
                    wy = fy if b else 1.0 - fy
                    jy = (iy + b) % n
                    for d in range(2):
                        wz = fz if d else 1.0 - fz
                        acc += wx * wy * wz * fields[c, jx, jy, (iz + d) % n]
            out[p, c] = acc


@njit(cache=True)
def boris_push(xi, F, dt):
    """Relativistic Boris update of the momenta in place; F holds (E, B)."""
    for p in range(xi.shape[0]):
        ux = xi[p, 0] + 0.5 * dt * F[p, 0]
        uy = xi[p, 1] + 0.5 * dt * F[p, 1]
        uz = xi[p, 2] + 0.5 * dt * F[p, 2]
        g = math.sqrt(1.0 + ux * ux + uy * uy + uz * uz)
        tx = 0.5 * dt * F[p, 3] / g
        ty = 0.5 * dt * F[p, 4] / g
        tz = 0.5 * dt * F[p, 5] / g
        px = ux + (uy * tz - uz * ty)
        py = uy + (uz * tx - ux * tz)
        pz = uz + (ux * ty - uy * tx)
        s = 2.0 / (1.0 + tx * tx + ty * ty + tz * tz)
        ux += s * (py * tz - pz * ty)
        uy += s * (pz * tx - px * tz)
        uz += s * (px * ty - py * tx)
        xi[p, 0] = ux + 0.5 * dt * F[p, 0]
        xi[p, 1] = uy + 0.5 * dt * F[p, 1]
        xi[p, 2] = uz + 0.5 * dt * F[p, 2]


@njit(cache=True)
def drift(pos, xi, dt):
    for p in range(pos.shape[0]):
        g = math.sqrt(1.0 + xi[p, 0] ** 2 + xi[p, 1] ** 2 + xi[p, 2] ** 2)
        for a in range(3):
            pos[p, a] += dt * xi[p, a] / g


@njit(cache=True)
def deposit_charge(pos, w, origin, dx, n, rho):
    """CIC charge density on the nodes."""
    inv_vol = 1.0 / dx ** 3
    for p in range(pos.shape[0]):
        gx = (pos[p, 0] - origin[0]) / dx
        gy = (pos[p, 1] - origin[1]) / dx
        gz = (pos[p, 2] - origin[2]) / dx
        ix = int(math.floor(gx))
        iy = int(math.floor(gy))
        iz = int(math.floor(gz))
        fx = gx - ix
        fy = gy - iy
        fz = gz - iz
        for a in range(2):
            wx = fx if a else 1.0 - fx
            for b in range(2):
                wy = fy if b else 1.0 - fy
                for d in range(2):
                    wz = fz if d else 1.0 - fz
                    rho[(ix + a) % n, (iy + b) % n, (iz + d) % n] += w[p] * wx * wy * wz * inv_vol


@njit(cache=True)
def deposit_current(old, new, w, origin, dx, dt, n, J):
    """Charge-conserving (Esirkepov) current for CIC particles moving less than a cell."""
    s0 = np.empty((3, 4))
    s1 = np.empty((3, 4))
    ds = np.empty((3, 4))
    wx = np.empty((4, 4, 4))
    wy = np.empty((4, 4, 4))
    wz = np.empty((4, 4, 4))
    scale = dx / dt / dx ** 3
    base = np.empty(3, np.int64)
    for p in range(old.shape[0]):
        for a in range(3):
            g0 = (old[p, a] - origin[a]) / dx
            g1 = (new[p, a] - origin[a]) / dx
            b = int(math.floor(g0))
            base[a] = b
            _cic(g0, b, s0[a])
            _cic(g1, b, s1[a])
            for k in range(4):
                ds[a, k] = s1[a, k] - s0[a, k]
        for i in range(4):
            for j in range(4):
                for k in range(4):
                    wx[i, j, k] = ds[0, i] * (s0[1, j] * s0[2, k] + 0.5 * ds[1, j] * s0[2, k]
                                              + 0.5 * s0[1, j] * ds[2, k] + ds[1, j] * ds[2, k] / 3.0)
                    wy[i, j, k] = ds[1, j] * (s0[0, i] * s0[2, k] + 0.5 * ds[0, i] * s0[2, k]
                                              + 0.5 * s0[0, i] * ds[2, k] + ds[0, i] * ds[2, k] / 3.0)
                    wz[i, j, k] = ds[2, k] * (s0[0, i] * s0[1, j] + 0.5 * ds[0, i] * s0[1, j]
                                              + 0.5 * s0[0, i] * ds[1, j] + ds[0, i] * ds[1, j] / 3.0)
        q = w[p] * scale
        for j in range(4):
            for k in range(4):
                acc = 0.0
                for i in range(4):
                    acc -= q * wx[i, j, k]
                    J[0, (base[0] - 1 + i) % n, (base[1] - 1 + j) % n, (base[2] - 1 + k) % n] += acc
        for i in range(4):
            for k in range(4):
                acc = 0.0
                for j in range(4):
                    acc -= q * wy[i, j, k]
                    J[1, (base[0] - 1 + i) % n, (base[1] - 1 + j) % n, (base[2] - 1 + k) % n] += acc
        for i in range(4):
            for j in range(4):
                acc = 0.0
                for k in range(4):
                    acc -= q * wz[i, j, k]
                    J[2, (base[0] - 1 + i) % n, (base[1] - 1 + j) % n, (base[2] - 1 + k) % n] += acc


# ---------------------------------------------------------------------------
# State and stepping
# ---------------------------------------------------------------------------

@dataclass
class PICState:
    """Particles, Yee fields and clock.

    ``xi`` holds momenta half a step behind the positions and fields.
    ``w_eq`` is the part of each weight carried by the equilibrium, so that
    the perturbation weight is ``w - w_eq``.
    """

    grid: GridSpec
    x: np.ndarray
    xi: np.ndarray
    w: np.ndarray
    E: np.ndarray
    B: np.ndarray
    dt: float
    rho_bg: float = 0.0
    t: float = 0.0
    step: int = 0
    w_eq: np.ndarray | None = None
    xi0: np.ndarray | None = None
    extras: dict = field(default_factory=dict)

    @property
    def n_particles(self) -> int:
        return self.x.shape[0]

    def charge_density(self) -> np.ndarray:
        rho = np.zeros(self.grid.shape)
        deposit_charge(self.x, self.w, np.asarray(self.grid.origin, float), self.grid.dx, self.grid.cells, rho)
        return rho

    def gauss_residual(self) -> float:
        """Max-norm of div E - (charge - background), relative to the charge scale."""
        net = self.charge_density() - self.rho_bg
        res = div_E(self.E, self.grid.dx) - net
        scale = max(float(np.max(np.abs(net))), float(np.max(np.abs(self.charge_density()))), 1e-300)
        return float(np.max(np.abs(res)) / scale)

    def div_B_residual(self) -> float:
        """Max-norm of the discrete divergence of B times dx, relative to max |B|."""
        scale = max(float(np.max(np.abs(self.B))), 1e-300)
        return float(np.max(np.abs(div_B(self.B, self.grid.dx))) * self.grid.dx / scale)

    def fields_at(self, pos: np.ndarray) -> np.ndarray:
        out = np.empty((pos.shape[0], 6))
        gather(np.concatenate([self.E, self.B]), FIELD_OFFSETS, np.asarray(self.grid.origin, float),
               self.grid.dx, np.ascontiguousarray(pos), out)
        return out


def init_state(grid: GridSpec, x, xi, w, dt: float, B_uniform=(0.0, 0.0, 0.0), rho_bg: float | None = None,
               w_eq=None, gauss_tolerance: float = 1e-10) -> PICState:
    """Fields from the Gauss law, uniform B, momenta moved back half a step."""
    if not dt < grid.max_dt():
        raise CFLViolation(f"dt={dt} violates dt < dx/sqrt(3) = {grid.max_dt()}")
    x = np.ascontiguousarray(np.atleast_2d(x), float)
    xi = np.ascontiguousarray(np.atleast_2d(xi), float)
    w = np.ascontiguousarray(w, float)
    org = np.asarray(grid.origin, float)
    x = org + np.mod(x - org, grid.length)
    rho = np.zeros(grid.shape)
    deposit_charge(x, w, org, grid.dx, grid.cells, rho)
    if rho_bg is None:
        rho_bg = float(rho.mean())
    net = rho - rho_bg
    if abs(net.mean()) > 1e-12 * max(1.0, float(np.max(np.abs(rho)))):
        raise GaussSolveError("box is not neutral: background does not match the mean charge")
    E = poisson_E(net - net.mean(), grid.dx)
    B = np.zeros((3,) + grid.shape) + np.asarray(B_uniform, float)[:, None, None, None]
    state = PICState(grid, x, xi.copy(), w, E, B, float(dt), float(rho_bg), 0.0, 0,
                     None if w_eq is None else np.asarray(w_eq, float), xi.copy())
    res = state.gauss_residual()
    if res > gauss_tolerance:
        raise GaussSolveError(f"Gauss residual {res:.3e} above {gauss_tolerance:.1e}")
    # Move momenta to t = -dt/2 with a half-step Boris push backwards.
    F = state.fields_at(x)
    boris_push(state.xi, F, -0.5 * dt)
    state.extras["initial_gauss_residual"] = res
    return state


def pic_step(state: PICState) -> PICState:
    """Advance particles and fields by one step, in place."""
    g = state.grid
    dt = state.dt
    org = np.asarray(g.origin, float)
    F = state.fields_at(state.x)
    boris_push(state.xi, F, dt)
    old = state.x.copy()
    drift(state.x, state.xi, dt)
    J = np.zeros((3,) + g.shape)
    deposit_current(old, state.x, state.w, org, g.dx, dt, g.cells, J)
    state.x = org + np.mod(state.x - org, g.length)
    state.B -= 0.5 * dt * curl_E(state.E, g.dx)
    state.E += dt * (curl_B(state.B, g.dx) - J)
    state.B -= 0.5 * dt * curl_E(state.E, g.dx)
    state.step += 1
    state.t = state.step * dt
    return state


def field_energy(state: PICState, B_ref=None) -> float:
    """Half the squared L2 norm of (E, B - B_ref) with the staggered-grid sum."""
    B = state.B if B_ref is None else state.B - np.asarray(B_ref, float)[:, None, None, None]
    return 0.5 * state.grid.cell_volume * float(np.sum(state.E ** 2) + np.sum(B ** 2))


def kinetic_energy(state: PICState) -> float:
    return float(np.sum(state.w * np.sqrt(1.0 + np.sum(state.xi ** 2, axis=1))))


def light_speed(grid: GridSpec, dt: float, steps: int, mode: int = 2) -> float:
    """Measured phase speed of a vacuum plane wave along x on the Yee grid."""
    k = 2.0 * np.pi * mode / grid.length
    xs = grid.origin[0] + (np.arange(grid.cells)) * grid.dx
    E = np.zeros((3,) + grid.shape)
    B = np.zeros((3,) + grid.shape)
    E[1] = np.cos(k * xs)[:, None, None]
    # B_z sits half a cell ahead in x and half a step behind in time. Its
    # phase uses the discrete frequency so that a single mode is excited.
    w = 2.0 / dt * math.asin(min(1.0, dt / grid.dx * math.sin(0.5 * k * grid.dx)))
    B[2] = np.cos(k * (xs + 0.5 * grid.dx) + 0.5 * w * dt)[:, None, None]
    for _ in range(steps):
        B -= dt * curl_E(E, grid.dx)
        E += dt * curl_B(B, grid.dx)
    spec = np.fft.fft(E[1][:, 0, 0])
    phase = -np.angle(spec[mode])  # cos(k x - k c t) -> phase k c t
    total = k * steps * dt
    phase = phase + 2.0 * np.pi * np.round((total - phase) / (2.0 * np.pi))
    return float(phase / total)
