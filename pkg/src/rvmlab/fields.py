"""Analytic and gridded field configurations.

Covers external magnetic fields, the isotropic equilibrium profile, initial
electromagnetic data, the Kirchhoff solution of the free wave equation, the
Coulomb-gauge vector potential of a gridded magnetic field, and the binary
snapshot format used for gridded fields.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .interp import interpolate
from .providers import (AnalyticFields, Domain, FieldProvider, OutOfDomainError,  # noqa: F401
                        UniformFields, zero_fields)
from .quadrature import SphereRule, gauss_legendre, lebedev_by_points


class ConstraintViolation(ValueError):
    """Input data violates a divergence constraint beyond tolerance."""


class InvalidSupport(ValueError):
    """Profile support parameters are inconsistent."""


# ---------------------------------------------------------------------------
# External magnetic fields
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExternalFieldConfig:
    """External magnetic field, applied with the strong-field scaling 1/epsilon.

    kinds:
      ``constant``  uniform vector ``amplitude``.
      ``harmonic``  ``amplitude + gradient * (x1, -x2, 0)``, the gradient of a
                    harmonic potential; only defined on ``|x_i| <= half_width``.
      ``sheared``   ``(amplitude_3 + gradient * sin(wavenumber * x3)) e3``; the
                    divergence is nonzero unless ``gradient == 0``.
    """

    kind: str = "constant"
    amplitude: tuple[float, float, float] = (0.0, 0.0, 1.0)
    gradient: float = 0.0
    wavenumber: float = 1.0
    half_width: float = 1.0
    epsilon: float = 1.0

    def __post_init__(self):
        if self.kind not in ("constant", "harmonic", "sheared"):
            raise ValueError(f"unknown external field kind {self.kind!r}")
        if not 0.0 < self.epsilon <= 1.0:
            raise ValueError("epsilon must lie in (0, 1]")

    @property
    def domain(self) -> Domain:
        if self.kind == "harmonic":
            w = self.half_width
            return Domain(lower=(-w, -w, -w), upper=(w, w, w))
        return Domain()

    def profile(self, x) -> np.ndarray:
        """Unscaled field B_e(x)."""
        x = np.atleast_2d(np.asarray(x, float))
        out = np.broadcast_to(np.asarray(self.amplitude, float), x.shape).copy()
        if self.kind == "harmonic":
            self.domain.check(0.0, x)
            out[:, 0] += self.gradient * x[:, 0]
            out[:, 1] -= self.gradient * x[:, 1]
        elif self.kind == "sheared":
            out[:, 0] = 0.0
            out[:, 1] = 0.0
            out[:, 2] = self.amplitude[2] + self.gradient * np.sin(self.wavenumber * x[:, 2])
        return out

    def field(self, x) -> np.ndarray:
        """Scaled field B_e(x) / epsilon."""
        return self.profile(x) / self.epsilon

    def b3(self, x3) -> np.ndarray:
        """Vertical amplitude for the sheared kind, unscaled."""
        x3 = np.asarray(x3, float)
        if self.kind == "sheared":
            return self.amplitude[2] + self.gradient * np.sin(self.wavenumber * x3)
        return np.full_like(x3, self.amplitude[2])

    def provider(self) -> AnalyticFields:
        return AnalyticFields(E=None, B=lambda t, x: self.field(x), domain=self.domain)

    def constraint_report(self, n_points: int = 200, step: float = 1e-3, seed: int = 0) -> dict:
        """Finite-difference divergence and curl over random points in the domain."""
        rng = np.random.default_rng(seed)
        w = self.half_width - 2 * step if self.kind == "harmonic" else 3.0
        pts = rng.uniform(-w, w, size=(n_points, 3))
        jac = np.empty((n_points, 3, 3))  # jac[:, i, j] = d_j B_i
        for j in range(3):
            e = np.zeros(3)
            e[j] = step
            jac[:, :, j] = (self.profile(pts + e) - self.profile(pts - e)) / (2 * step)
        div = jac[:, 0, 0] + jac[:, 1, 1] + jac[:, 2, 2]
        curl = np.stack([jac[:, 2, 1] - jac[:, 1, 2], jac[:, 0, 2] - jac[:, 2, 0],
                         jac[:, 1, 0] - jac[:, 0, 1]], axis=1)
        max_div = float(np.max(np.abs(div)))
        max_curl = float(np.max(np.linalg.norm(curl, axis=1)))
        ok = max_div <= 1e-8 and max_curl <= 1e-8
        return {"kind": self.kind, "max_div": max_div, "max_curl": max_curl,
                "divergence_free": max_div <= 1e-8, "curl_free": max_curl <= 1e-8,
                "consistent": ok,
                "flag": None if ok else "external field is not solenoidal and irrotational"}


# ---------------------------------------------------------------------------
# Equilibrium profile
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EquilibriumProfile:
    """Isotropic profile M(eps, r) of the Lorentz factor r = <xi>.

    ``core``: m0 (1 + eps_slope*eps) (1 - u^2)^2 with u = (r-1)/(r_max-1).
    ``shell``: same polynomial centred on [r_min, r_max].
    Both are C^1 and vanish for r >= r_max.
    """

    m0: float
    r_max: float
    c2: float
    shape: str = "core"
    r_min: float = 1.0
    eps_slope: float = 0.0

    def amplitude(self, eps: float) -> float:
        return self.m0 * (1.0 + self.eps_slope * eps)

    def _u(self, r):
        if self.shape == "core":
            return (r - 1.0) / (self.r_max - 1.0)
        mid = 0.5 * (self.r_min + self.r_max)
        return (r - mid) / (0.5 * (self.r_max - self.r_min))

    def _inside(self, r):
        # Compare r itself so the support edges are exact under rounding.
        lo = self.r_min if self.shape == "shell" else -np.inf
        return (r > lo) & (r < self.r_max)

    def __call__(self, eps: float, r) -> np.ndarray:
        r = np.asarray(r, float)
        u = self._u(r)
        inside = self._inside(r)
        return np.where(inside, self.amplitude(eps) * (1.0 - u * u) ** 2, 0.0)

    def dr(self, eps: float, r) -> np.ndarray:
        """Derivative with respect to r."""
        r = np.asarray(r, float)
        u = self._u(r)
        du = 1.0 / (self.r_max - 1.0) if self.shape == "core" else 2.0 / (self.r_max - self.r_min)
        inside = self._inside(r)
        return np.where(inside, self.amplitude(eps) * 2.0 * (1.0 - u * u) * (-2.0 * u) * du, 0.0)

    def of_momentum(self, eps: float, xi) -> np.ndarray:
        xi = np.asarray(xi, float)
        return self(eps, np.sqrt(1.0 + np.sum(xi * xi, axis=-1)))

    @property
    def momentum_radius(self) -> float:
        """Radius in |xi| beyond which the profile vanishes."""
        return float(np.sqrt(self.r_max ** 2 - 1.0))

    @property
    def sup(self) -> float:
        return abs(self.m0) * (1.0 + max(0.0, self.eps_slope))

    def lipschitz_xi(self, eps: float, n: int = 2001) -> float:
        """Sup of |grad_xi M(eps, <xi>)| = |dM/dr| |xi| / <xi|."""
        q = np.linspace(0.0, self.momentum_radius, n)
        r = np.sqrt(1.0 + q * q)
        return float(np.max(np.abs(self.dr(eps, r)) * q / r))


def make_equilibrium(m0: float, r_max: float, c2: float, *, shape: str = "core",
                     r_min: float = 1.0, eps_slope: float = 0.0,
                     validate: bool = True) -> EquilibriumProfile:
    """Build a C^1 bump profile meeting the dense and hot conditions."""
    if not r_max > 1.0 + c2 > 1.0:
        raise InvalidSupport(f"need r_max > 1 + c2 > 1, got r_max={r_max}, c2={c2}")
    if shape == "shell" and not 1.0 <= r_min < r_max:
        raise InvalidSupport("shell needs 1 <= r_min < r_max")
    if validate and not m0 > 0.0:
        raise ValueError("dense condition requires a positive amplitude")
    return EquilibriumProfile(float(m0), float(r_max), float(c2), shape, float(r_min), float(eps_slope))


def rho_eps(profile: EquilibriumProfile, eps: float, n: int = 64) -> tuple[float, float]:
    """Density of the equilibrium, integral of M(eps, <xi>) dxi, with an error estimate."""
    if not 0.0 <= eps <= 1.0:
        raise ValueError("eps must lie in [0, 1]")
    lo = np.sqrt(max(profile.r_min, 1.0) ** 2 - 1.0) if profile.shape == "shell" else 0.0
    hi = profile.momentum_radius

    def radial(m):
        q, w = gauss_legendre(m, lo, hi)
        return float(4.0 * np.pi * np.sum(w * q * q * profile(eps, np.sqrt(1.0 + q * q))))

    fine = radial(n)
    coarse = radial(n // 2)
    return fine, abs(fine - coarse) + 1e-15 * abs(fine)


# ---------------------------------------------------------------------------
# Gridded fields
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GriddedField:
    """Multi-component field on a uniform grid.

    ``data`` has shape ``(ncomp, n0, n1, n2)``. Component ``c`` is sampled at
    ``origin + (index + offsets[c]) * spacing``. Non-periodic grids mark
    unusable margin values with NaN.
    """

    data: np.ndarray
    origin: tuple[float, float, float]
    spacing: tuple[float, float, float]
    periodic: bool = True
    offsets: np.ndarray | None = None
    time: float = 0.0

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        if data.ndim == 3:
            data = data[None]
        object.__setattr__(self, "data", data)
        offs = np.zeros((data.shape[0], 3)) if self.offsets is None else np.asarray(self.offsets, float)
        object.__setattr__(self, "offsets", offs)

    @property
    def shape(self) -> tuple[int, int, int]:
        return tuple(self.data.shape[1:])

    @property
    def ncomp(self) -> int:
        return self.data.shape[0]

    def extent(self) -> np.ndarray:
        return np.asarray(self.shape) * np.asarray(self.spacing)

    def node_coords(self, comp: int = 0) -> np.ndarray:
        """Coordinates of the nodes of component ``comp`` as (n0, n1, n2, 3)."""
        axes = [self.origin[a] + (np.arange(self.shape[a]) + self.offsets[comp, a]) * self.spacing[a]
                for a in range(3)]
        g = np.meshgrid(*axes, indexing="ij")
        return np.stack(g, axis=-1)

    def evaluate(self, x) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(x, float))
        out = np.empty((pts.shape[0], self.ncomp))
        sp = np.asarray(self.spacing, float)
        for c in range(self.ncomp):
            org = np.asarray(self.origin, float) + self.offsets[c] * sp
            vals, bad = interpolate(self.data[c], org, sp, pts, self.periodic)
            if bad >= 0 or np.any(np.isnan(vals)):
                idx = bad if bad >= 0 else int(np.argmax(np.isnan(vals)))
                raise OutOfDomainError(self.time, pts[idx],
                                       "interpolation stencil leaves the usable grid (no ghost margin)")
            out[:, c] = vals
        return out

    def derivative(self, axis: int, method: str = "fd4") -> "GriddedField":
        """Derivative of every component along ``axis``.

        ``fd4`` uses the fourth-order central stencil; on non-periodic grids
        the two outermost layers become NaN. ``spectral`` needs a periodic grid.
        """
        h = self.spacing[axis]
        if method == "spectral":
            if not self.periodic:
                raise ValueError("spectral derivatives need a periodic grid")
            k = 2 * np.pi * np.fft.fftfreq(self.shape[axis], d=h)
            shape = [1, 1, 1, 1]
            shape[axis + 1] = -1
            out = np.real(np.fft.ifft(1j * k.reshape(shape) * np.fft.fft(self.data, axis=axis + 1), axis=axis + 1))
        elif method == "fd4":
            d = self.data
            ax = axis + 1
            out = (8 * (np.roll(d, -1, ax) - np.roll(d, 1, ax)) - (np.roll(d, -2, ax) - np.roll(d, 2, ax))) / (12 * h)
            if not self.periodic:
                sl = [slice(None)] * 4
                for edge in (0, 1, -1, -2):
                    sl[ax] = edge
                    out[tuple(sl)] = np.nan
        else:
            raise ValueError(f"unknown derivative method {method!r}")
        return GriddedField(out, self.origin, self.spacing, self.periodic, self.offsets, self.time)


def grid_from_function(func: Callable[[np.ndarray], np.ndarray], shape, origin, spacing,
                       periodic: bool = True, time: float = 0.0) -> GriddedField:
    axes = [origin[a] + np.arange(shape[a]) * spacing[a] for a in range(3)]
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)
    vals = np.asarray(func(pts), float).reshape(pts.shape[0], -1)
    data = np.moveaxis(vals.reshape(*shape, -1), -1, 0)
    return GriddedField(data, tuple(origin), tuple(spacing), periodic, None, time)


# ---------------------------------------------------------------------------
# Initial data and the Kirchhoff formula
# ---------------------------------------------------------------------------

VectorField = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class InitialEM:
    """Initial electric and magnetic fields with the derivatives Kirchhoff needs.

    ``grad_E0(x)`` returns ``(N, 3, 3)`` with entry ``[n, i, j] = d_j E0_i``.
    """

    E0: VectorField
    B0: VectorField
    grad_E0: Callable[[np.ndarray], np.ndarray]
    curl_B0: VectorField

    @classmethod
    def zero(cls) -> "InitialEM":
        z3 = lambda x: np.zeros((np.atleast_2d(x).shape[0], 3))  # noqa: E731
        return cls(z3, z3, lambda x: np.zeros((np.atleast_2d(x).shape[0], 3, 3)), z3)

    @classmethod
    def from_grids(cls, E0: GriddedField, B0: GriddedField, method: str = "fd4",
                   B_uniform=(0.0, 0.0, 0.0)) -> "InitialEM":
        """Gridded data; derivatives by finite differences (or spectrally).

        ``B_uniform`` is a constant background added to ``B0`` (it has no curl).
        """
        dE = [E0.derivative(j, method) for j in range(3)]
        dB = [B0.derivative(j, method) for j in range(3)]
        b_bg = np.asarray(B_uniform, float)

        def grad(x):
            return np.stack([dE[j].evaluate(x) for j in range(3)], axis=-1)

        def curl(x):
            d = [dB[j].evaluate(x) for j in range(3)]  # d[j][:, i] = d_j B_i
            return np.stack([d[1][:, 2] - d[2][:, 1], d[2][:, 0] - d[0][:, 2],
                             d[0][:, 1] - d[1][:, 0]], axis=1)

        return cls(E0.evaluate, lambda x: B0.evaluate(x) + b_bg, grad, curl)


def spherical_mean(k: Callable[[np.ndarray], np.ndarray], t: float, x, rule: SphereRule | None = None) -> np.ndarray:
    """Average of ``k`` over the sphere of radius ``t`` centred at each row of ``x``."""
    if t < 0:
        raise ValueError("radius must be nonnegative")
    rule = rule or lebedev_by_points(26)
    x = np.atleast_2d(np.asarray(x, float))
    pts = (x[:, None, :] + t * rule.points[None, :, :]).reshape(-1, 3)
    vals = np.asarray(k(pts), float)
    vals = vals.reshape(x.shape[0], rule.size, *vals.shape[1:])
    return np.einsum("nm...,m->n...", vals, rule.weights) / (4.0 * np.pi)


def kirchhoff_Eh(init: InitialEM, t: float, x, rule: SphereRule | None = None) -> np.ndarray:
    """Free-wave field with data (E0, curl B0) at time ``t``, points ``x``."""
    rule = rule or lebedev_by_points(26)
    x = np.atleast_2d(np.asarray(x, float))
    if t == 0.0:
        return np.asarray(init.E0(x), float).reshape(x.shape)
    n, m = x.shape[0], rule.size
    pts = (x[:, None, :] + t * rule.points[None, :, :]).reshape(-1, 3)
    e0 = np.asarray(init.E0(pts), float).reshape(n, m, 3)
    cb = np.asarray(init.curl_B0(pts), float).reshape(n, m, 3)
    ge = np.asarray(init.grad_E0(pts), float).reshape(n, m, 3, 3)
    dir_deriv = np.einsum("nmij,mj->nmi", ge, rule.points)
    integrand = e0 + t * (cb + dir_deriv)
    return np.einsum("nmi,m->ni", integrand, rule.weights) / (4.0 * np.pi)


@dataclass(frozen=True)
class KirchhoffProvider:
    """Field provider returning (E_h, 0) from the Kirchhoff formula."""

    init: InitialEM
    rule: SphereRule = field(default_factory=lambda: lebedev_by_points(26))
    t_range: tuple[float, float] = (0.0, np.inf)

    def evaluate(self, t, x):
        x = np.atleast_2d(np.asarray(x, float))
        return kirchhoff_Eh(self.init, t, x, self.rule), np.zeros_like(x)


# ---------------------------------------------------------------------------
# Spectral tools on periodic grids
# ---------------------------------------------------------------------------

def _wavevectors(shape, spacing):
    ks = [2 * np.pi * np.fft.fftfreq(shape[a], d=spacing[a]) for a in range(3)]
    return np.meshgrid(*ks, indexing="ij")


def spectral_curl(data: np.ndarray, spacing) -> np.ndarray:
    k = _wavevectors(data.shape[1:], spacing)
    f = np.fft.fftn(data, axes=(1, 2, 3))
    c = np.stack([1j * (k[1] * f[2] - k[2] * f[1]), 1j * (k[2] * f[0] - k[0] * f[2]),
                  1j * (k[0] * f[1] - k[1] * f[0])])
    return np.real(np.fft.ifftn(c, axes=(1, 2, 3)))


def spectral_div(data: np.ndarray, spacing) -> np.ndarray:
    k = _wavevectors(data.shape[1:], spacing)
    f = np.fft.fftn(data, axes=(1, 2, 3))
    return np.real(np.fft.ifftn(1j * (k[0] * f[0] + k[1] * f[1] + k[2] * f[2])))


def vector_potential(B0: np.ndarray, spacing, origin=(0.0, 0.0, 0.0), tol: float = 1e-8) -> np.ndarray:
    """Divergence-free vector potential whose curl is ``B0`` on a periodic box.

    The mean of ``B0`` is carried by the symmetric gauge about the box centre;
    the fluctuation is inverted spectrally.
    """
    B0 = np.asarray(B0, float)
    shape = B0.shape[1:]
    mean = B0.reshape(3, -1).mean(axis=1)
    fluct = B0 - mean[:, None, None, None]
    k = _wavevectors(shape, spacing)
    k2 = k[0] ** 2 + k[1] ** 2 + k[2] ** 2
    f = np.fft.fftn(fluct, axes=(1, 2, 3))
    kmag = np.sqrt(k2)
    div = np.abs(k[0] * f[0] + k[1] * f[1] + k[2] * f[2])
    scale = np.sqrt(np.sum(np.abs(f) ** 2, axis=0)) * kmag
    if np.max(scale) > 0 and np.linalg.norm(div) > tol * np.linalg.norm(scale):
        raise ConstraintViolation(
            f"magnetic data not solenoidal: relative spectral divergence "
            f"{np.linalg.norm(div) / np.linalg.norm(scale):.3e} > {tol:.1e}")
    k2[0, 0, 0] = 1.0
    A = np.stack([1j * (k[1] * f[2] - k[2] * f[1]), 1j * (k[2] * f[0] - k[0] * f[2]),
                  1j * (k[0] * f[1] - k[1] * f[0])]) / k2
    A[:, 0, 0, 0] = 0.0
    A = np.real(np.fft.ifftn(A, axes=(1, 2, 3)))
    if np.any(mean != 0.0):
        axes = [origin[a] + np.arange(shape[a]) * spacing[a] for a in range(3)]
        centre = [origin[a] + 0.5 * (shape[a] - 1) * spacing[a] for a in range(3)]
        X = np.meshgrid(*[axes[a] - centre[a] for a in range(3)], indexing="ij")
        A[0] += 0.5 * (mean[1] * X[2] - mean[2] * X[1])
        A[1] += 0.5 * (mean[2] * X[0] - mean[0] * X[2])
        A[2] += 0.5 * (mean[0] * X[1] - mean[1] * X[0])
    return A


def spectral_wave(u0: np.ndarray, v0: np.ndarray, spacing, t: float) -> np.ndarray:
    """Exact periodic solution of u_tt = Laplacian u with data (u0, v0), per component."""
    k = _wavevectors(u0.shape[-3:], spacing)
    kmag = np.sqrt(k[0] ** 2 + k[1] ** 2 + k[2] ** 2)
    f0 = np.fft.fftn(u0, axes=(-3, -2, -1))
    g0 = np.fft.fftn(v0, axes=(-3, -2, -1))
    sinc = np.where(kmag > 0, np.sin(kmag * t) / np.where(kmag > 0, kmag, 1.0), t)
    return np.real(np.fft.ifftn(np.cos(kmag * t) * f0 + sinc * g0, axes=(-3, -2, -1)))


# ---------------------------------------------------------------------------
# Binary snapshot format
# ---------------------------------------------------------------------------

SNAPSHOT_MAGIC = b"RVMS"
_HEADER = struct.Struct("<4sIIqqq3d3dd")


def write_snapshot(path, fieldgrid: GriddedField) -> None:
    """Little-endian header (magic, version, ncomp, dims, spacing, origin, time),
    then component-major float64 data."""
    n0, n1, n2 = fieldgrid.shape
    header = _HEADER.pack(SNAPSHOT_MAGIC, 1, fieldgrid.ncomp, n0, n1, n2,
                          *map(float, fieldgrid.spacing), *map(float, fieldgrid.origin),
                          float(fieldgrid.time))
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(fieldgrid.data, dtype="<f8").tobytes())


def read_snapshot(path, periodic: bool = True, offsets=None) -> GriddedField:
    with open(path, "rb") as fh:
        raw = fh.read()
    magic, version, ncomp, n0, n1, n2, s0, s1, s2, o0, o1, o2, t = _HEADER.unpack_from(raw)
    if magic != SNAPSHOT_MAGIC or version != 1:
        raise ValueError(f"{path}: not a snapshot file")
    data = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size).reshape(ncomp, n0, n1, n2)
    return GriddedField(data.astype(float), (o0, o1, o2), (s0, s1, s2), periodic, offsets, t)


# ---------------------------------------------------------------------------
# Kirchhoff against the spectral solution
# ---------------------------------------------------------------------------

def gaussian_wave_data(center=(0.0, 0.0, 0.0), sigma: float = 1.0):
    """Smooth test data: E0 a Gaussian vector field, B0 with a Gaussian curl."""
    c = np.asarray(center, float)

    def gauss(x):
        d = np.atleast_2d(np.asarray(x, float)) - c
        return np.exp(-0.5 * np.sum(d * d, axis=1) / sigma ** 2), d

    def E0(x):
        g, d = gauss(x)
        return np.stack([g, 0.5 * g, -0.25 * g * d[:, 0]], axis=1)

    def B0(x):
        g, d = gauss(x)
        return np.stack([0.3 * g * d[:, 1], -0.2 * g, 0.4 * g * d[:, 2]], axis=1)

    return E0, B0


def kirchhoff_spectral_check(cells: int = 64, length: float = 16.0, t: float = 2.0, sigma: float = 1.0,
                             probes: int = 20, sphere_points: int = 590, method: str = "spectral",
                             seed: int = 0) -> dict:
    """Kirchhoff on gridded data against the exact periodic (spectral) solution.

    The data are centred in the box; probes lie within distance ``t`` of the
    centre, so with ``2 t + 8 sigma < length / 2`` no periodic image reaches
    them.
    """
    h = length / cells
    origin = (-0.5 * length,) * 3
    E0, B0 = gaussian_wave_data(sigma=sigma)
    gE = grid_from_function(E0, (cells,) * 3, origin, (h,) * 3)
    gB = grid_from_function(B0, (cells,) * 3, origin, (h,) * 3)
    init = InitialEM.from_grids(gE, gB, method)
    curlB = np.stack([
        gB.derivative(1, "spectral").data[2] - gB.derivative(2, "spectral").data[1],
        gB.derivative(2, "spectral").data[0] - gB.derivative(0, "spectral").data[2],
        gB.derivative(0, "spectral").data[1] - gB.derivative(1, "spectral").data[0]])
    exact = GriddedField(spectral_wave(gE.data, curlB, (h,) * 3, t), origin, (h,) * 3, True)
    rng = np.random.default_rng(seed)
    u = rng.normal(size=(probes, 3))
    x = u / np.linalg.norm(u, axis=1, keepdims=True) * (t * rng.random((probes, 1)))
    # Probe on grid nodes so the reference needs no interpolation.
    x = np.round((x - origin[0]) / h) * h + origin[0]
    ref = exact.evaluate(x)
    kir = kirchhoff_Eh(init, t, x, lebedev_by_points(sphere_points))
    scale = float(np.max(np.abs(exact.data)))
    err = np.max(np.abs(kir - ref), axis=1)
    return {"t": t, "cells": cells, "max_abs_error": float(err.max()), "scale": scale,
            "relative_error": float(err.max() / scale), "probes": probes}
