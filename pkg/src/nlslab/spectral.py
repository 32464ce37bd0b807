"""Periodic grids, spectral operators, and the quadratic/Lp functionals.

Everything lives on a periodic box [-L, L)^d sampled with N points per axis.
Quadrature is the plain Riemann sum dx^d * sum(...), which is exact for
band-limited periodic fields and consistent with the discrete Parseval
identity.  Conventions: "mass" is the squared L2 norm int |u|^2.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import fft as _fft


class GridError(ValueError):
    """Invalid grid construction parameters."""


class FieldShapeError(ValueError):
    """Sample array does not match its grid."""


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid on [-L, L)^d with N points per axis."""

    d: int
    L: float
    N: int

    def __post_init__(self):
        if self.d not in (1, 2):
            raise GridError(f"dimension must be 1 or 2, got {self.d}")
        if not self.L > 0:
            raise GridError(f"box half-width must be positive, got {self.L}")
        if self.N < 16 or not _is_power_of_two(self.N):
            raise GridError(f"N must be a power of two >= 16, got {self.N}")

    @property
    def dx(self) -> float:
        return 2.0 * self.L / self.N

    @property
    def shape(self) -> tuple:
        return (self.N,) * self.d

    @property
    def npoints(self) -> int:
        return self.N**self.d

    @property
    def cell_volume(self) -> float:
        return self.dx**self.d

    @cached_property
    def x(self) -> tuple:
        """Coordinate array per axis, x_i = -L + i*dx."""
        ax = -self.L + self.dx * np.arange(self.N)
        return (ax,) * self.d

    def meshes(self) -> tuple:
        """Broadcastable coordinate meshes (x,) or (X, Y)."""
        if self.d == 1:
            return (self.x[0],)
        return tuple(np.meshgrid(*self.x, indexing="ij"))

    @cached_property
    def k(self) -> tuple:
        """Wavenumber table per axis, k = pi*m/L for m in [-N/2, N/2), FFT order."""
        kax = 2.0 * np.pi * np.fft.fftfreq(self.N, d=self.dx)
        return (kax,) * self.d

    @cached_property
    def k_squared(self) -> np.ndarray:
        """|k|^2 broadcast to the full grid shape (includes the Nyquist mode)."""
        if self.d == 1:
            return self.k[0] ** 2
        kx, ky = self.k
        return kx[:, None] ** 2 + ky[None, :] ** 2

    @cached_property
    def deriv_multipliers(self) -> tuple:
        """i*k per axis, broadcastable, with the Nyquist mode zeroed.

        Zeroing the unpaired -N/2 mode keeps the derivative skew-symmetric,
        hence the discrete momentum real.
        """
        out = []
        for axis in range(self.d):
            ik = 1j * self.k[axis].copy()
            ik[self.N // 2] = 0.0
            shape = [1] * self.d
            shape[axis] = self.N
            out.append(ik.reshape(shape))
        return tuple(out)

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        """2/3-rule mask: keep |m| <= N/3 per axis."""
        m = np.fft.fftfreq(self.N, d=1.0 / self.N)
        keep = np.abs(m) <= self.N / 3.0
        if self.d == 1:
            return keep
        return keep[:, None] & keep[None, :]


def make_grid(d: int, L: float, N: int) -> Grid:
    """Validated Grid constructor."""
    return Grid(d=int(d), L=float(L), N=int(N))


@dataclass(frozen=True)
class PhysParams:
    """Physical parameters: i u_t + Lap u + sign |u|^(4/d) u + i a |u|^p u = 0.

    The focusing power 4/d is implied by the dimension; p is the damping
    power and a >= 0 the damping coefficient (a = 0 recovers the conservative
    equation).  focusing_sign = -1 flips to the defocusing variant.
    """

    d: int
    p: float = 1.0
    a: float = 0.0
    focusing_sign: float = 1.0

    def __post_init__(self):
        if self.d not in (1, 2):
            raise ValueError(f"dimension must be 1 or 2, got {self.d}")
        if not (np.isfinite(self.p) and self.p >= 1.0):
            raise ValueError(f"damping power must satisfy p >= 1, got {self.p}")
        if not (np.isfinite(self.a) and self.a >= 0.0):
            raise ValueError(f"damping coefficient must satisfy a >= 0, got {self.a}")
        if self.focusing_sign not in (1.0, -1.0):
            raise ValueError("focusing_sign must be +1 or -1")

    @property
    def focusing_power(self) -> float:
        return 4.0 / self.d

    @property
    def c_p(self) -> float:
        """(4 + 2d + pd) / (4 + 2d), the energy-dissipation constant."""
        return (4.0 + 2.0 * self.d + self.p * self.d) / (4.0 + 2.0 * self.d)


@dataclass
class ComplexField:
    """Complex samples u on a Grid, row-major over axes."""

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.complex128)
        if vals.shape != self.grid.shape:
            raise FieldShapeError(
                f"values shape {vals.shape} does not match grid shape {self.grid.shape}"
            )
        self.values = vals

    def copy(self) -> "ComplexField":
        return ComplexField(self.grid, self.values.copy())

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.values)))


def fftn(values: np.ndarray) -> np.ndarray:
    return _fft.fftn(values)


def ifftn(values: np.ndarray) -> np.ndarray:
    return _fft.ifftn(values)


def abs_pow(abs_squared: np.ndarray, q: float) -> np.ndarray:
    """Pointwise |u|^q from |u|^2, with the convention 0^q = 0 (q may be fractional)."""
    out = np.zeros_like(abs_squared, dtype=np.float64)
    pos = abs_squared > 0.0
    np.exp(0.5 * q * np.log(abs_squared, where=pos, out=np.zeros_like(out)), where=pos, out=out)
    out[~pos] = 0.0
    return out


def gradient(u: ComplexField) -> list:
    """Spectral gradient, one ComplexField per axis (Nyquist derivative zeroed)."""
    spectrum = fftn(u.values)
    return [
        ComplexField(u.grid, ifftn(mult * spectrum))
        for mult in u.grid.deriv_multipliers
    ]


def mass(u: ComplexField) -> float:
    """int |u|^2 by Riemann sum (the squared L2 norm)."""
    return float(np.sum(np.abs(u.values) ** 2) * u.grid.cell_volume)


def lp_norm_pow(u: ComplexField, q: float) -> float:
    """int |u|^q by Riemann sum."""
    if q < 1:
        raise ValueError(f"q must be >= 1, got {q}")
    rho = np.abs(u.values) ** 2
    return float(np.sum(abs_pow(rho, q)) * u.grid.cell_volume)


def grad_norm_sq(u: ComplexField) -> float:
    """int |grad u|^2 (spectral derivative, Nyquist zeroed)."""
    spectrum = fftn(u.values)
    total = 0.0
    for mult in u.grid.deriv_multipliers:
        total += np.sum(np.abs(mult * spectrum) ** 2)
    # Parseval for the unnormalized FFT: sum_x |f|^2 = sum_k |fhat|^2 / N^d
    return float(total / u.grid.npoints * u.grid.cell_volume)


def energy(u: ComplexField, params) -> float:
    """E(u) = 1/2 int |grad u|^2 - sign * d/(4+2d) int |u|^(4/d+2)."""
    d = u.grid.d
    coeff = d / (4.0 + 2.0 * d)
    kinetic = 0.5 * grad_norm_sq(u)
    potential = coeff * lp_norm_pow(u, 4.0 / d + 2.0)
    return kinetic - params.focusing_sign * potential


def momentum(u: ComplexField) -> np.ndarray:
    """Kinetic momentum Im int (grad u) conj(u), one component per axis."""
    spectrum = fftn(u.values)
    vol = u.grid.cell_volume
    out = np.empty(u.grid.d)
    for j, mult in enumerate(u.grid.deriv_multipliers):
        du = ifftn(mult * spectrum)
        out[j] = np.sum((du * np.conj(u.values)).imag) * vol
    return out


def max_amplitude(u: ComplexField) -> float:
    return float(np.max(np.abs(u.values)))


def spectral_mass(u: ComplexField) -> float:
    """Mass evaluated from the Fourier coefficients (discrete Parseval route)."""
    spectrum = fftn(u.values)
    return float(np.sum(np.abs(spectrum) ** 2) / u.grid.npoints * u.grid.cell_volume)


def fourier_oversample(u: ComplexField, factor: int) -> np.ndarray:
    """Trigonometric interpolation of u onto a factor*N grid over the same box.

    The unpaired Nyquist coefficient is dropped; for resolved fields it is at
    roundoff level.
    """
    if factor < 1 or not _is_power_of_two(factor):
        raise ValueError("oversampling factor must be a power of two >= 1")
    if factor == 1:
        return u.values.copy()
    grid = u.grid
    coeffs = np.fft.fftshift(fftn(u.values)) / grid.npoints
    for axis in range(grid.d):
        idx = [slice(None)] * grid.d
        idx[axis] = 0  # the -N/2 mode after fftshift
        coeffs[tuple(idx)] = 0.0
    pad = (factor - 1) * grid.N // 2
    coeffs = np.pad(coeffs, [(pad, pad)] * grid.d)
    fine = ifftn(np.fft.ifftshift(coeffs)) * (factor * grid.N) ** grid.d
    return fine


def sample_scaled(u: ComplexField, scale: float, oversample: int | None = None) -> np.ndarray:
    """Values of u(scale * x) on u's own grid via oversampled cubic interpolation."""
    from scipy.ndimage import map_coordinates

    grid = u.grid
    if oversample is None:
        oversample = 8 if grid.d == 1 else 4
    fine = fourier_oversample(u, oversample)
    dx_fine = grid.dx / oversample
    coords = []
    for mesh in grid.meshes():
        y = np.mod(scale * mesh + grid.L, 2.0 * grid.L)
        coords.append(y / dx_fine)
    coords = np.stack([c.ravel() for c in coords])
    re = map_coordinates(fine.real, coords, order=3, mode="grid-wrap")
    im = map_coordinates(fine.imag, coords, order=3, mode="grid-wrap")
    return (re + 1j * im).reshape(grid.shape)
