"""Trajectory diagnostics: dissipation-identity residuals, the exponential
H1 bound, generalized Gagliardo-Nirenberg constants with the induced
small-mass threshold, the critical-case mass budget, and the scattering
monitor.

The dissipation laws being checked are
    d/dt mass = -2a int |u|^(p+2)
    d/dt E    = -a K(u),  K = int |u|^p |grad u|^2 - C_p int |u|^(4/d+2+p)
    d/dt P    = -2a Im int conj(u) |u|^p grad u
with C_p = (4+2d+pd)/(4+2d).  Residuals are midpoint finite differences
between consecutive records, so they converge at order dt^2 and isolate
identity error from quadrature drift.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .evolve import Trajectory, linear_substep
from .ground_state import GroundState
from .spectral import (
    ComplexField,
    Grid,
    PhysParams,
    abs_pow,
    fftn,
    grad_norm_sq,
    ifftn,
    lp_norm_pow,
    mass,
)


class InsufficientRecordsError(ValueError):
    """Trajectory has too few records for interval residuals."""


class InsufficientSnapshotsError(ValueError):
    """Scattering monitor needs at least three stored snapshots."""


class EmptyFamilyError(ValueError):
    """Constant estimation needs a non-empty field family."""


class ZeroFieldError(ZeroDivisionError):
    """The Gagliardo-Nirenberg ratio is undefined for the zero field."""


def dissipation_functionals(u: ComplexField, params: PhysParams):
    """(D_mass, K, D_mom): the right-hand sides of the three dissipation laws.

    D_mass = 2a int |u|^(p+2); K as in the module docstring; D_mom is the
    d-vector 2a Im int conj(u) |u|^p grad u.
    """
    grid = u.grid
    vol = grid.cell_volume
    rho = u.values.real**2 + u.values.imag**2
    rho_p = abs_pow(rho, params.p)
    a = params.a

    d_mass = 2.0 * a * float(np.sum(abs_pow(rho, params.p + 2.0))) * vol

    spectrum = fftn(u.values)
    conj_vals = np.conj(u.values)
    grad_sq = np.zeros_like(rho)
    d_mom = np.empty(grid.d)
    for j, mult in enumerate(grid.deriv_multipliers):
        du = ifftn(mult * spectrum)
        grad_sq += du.real**2 + du.imag**2
        d_mom[j] = 2.0 * a * float(np.sum(rho_p * (du * conj_vals).imag)) * vol
    k_diss = float(np.sum(rho_p * grad_sq)) * vol - params.c_p * float(
        np.sum(abs_pow(rho, 4.0 / params.d + 2.0 + params.p))
    ) * vol
    return d_mass, k_diss, d_mom


@dataclass
class IdentityResiduals:
    """Normalized midpoint residuals per record interval."""

    t_mid: np.ndarray
    r_mass: np.ndarray
    r_energy: np.ndarray
    r_mom: np.ndarray  # shape (n-1, d)

    def summary(self) -> dict:
        r_mom_flat = np.max(self.r_mom, axis=1)
        return {
            "max_r_mass": float(np.max(self.r_mass)),
            "max_r_energy": float(np.max(self.r_energy)),
            "max_r_mom": float(np.max(r_mom_flat)),
            "median_r_mass": float(np.median(self.r_mass)),
            "median_r_energy": float(np.median(self.r_energy)),
            "median_r_mom": float(np.median(r_mom_flat)),
        }


def identity_residuals(traj: Trajectory) -> IdentityResiduals:
    """Midpoint finite-difference residuals of the three dissipation laws."""
    if len(traj.records) < 3:
        raise InsufficientRecordsError("need at least 3 records")
    t = traj.series("t")
    m = traj.series("mass")
    e = traj.series("energy")
    p_mom = traj.series("momentum")
    d_mass = traj.series("d_mass")
    k_diss = traj.series("k_diss")
    d_mom = traj.series("d_mom")
    a = traj.params.a

    dt = np.diff(t)
    t_mid = 0.5 * (t[1:] + t[:-1])

    def midpoint(series):
        return 0.5 * (series[1:] + series[:-1])

    r_mass = np.abs(np.diff(m) / dt + midpoint(d_mass))
    r_mass /= np.maximum(1.0, np.abs(midpoint(m)))
    r_energy = np.abs(np.diff(e) / dt + a * midpoint(k_diss))
    r_energy /= np.maximum(1.0, np.abs(midpoint(e)))
    r_mom = np.abs(np.diff(p_mom, axis=0) / dt[:, None] + midpoint(d_mom))
    r_mom /= np.maximum(1.0, np.abs(midpoint(p_mom)))
    return IdentityResiduals(t_mid=t_mid, r_mass=r_mass, r_energy=r_energy, r_mom=r_mom)


def h1_bound_check(traj: Trajectory, params: PhysParams) -> dict:
    """Check ||grad u(t)||^2 <= ||grad u(0)||^2 exp(a^(-4/(pd-4)) t) at every record.

    The Gronwall constant a^(-4/(pd-4)) is what the Young-inequality step of
    the a-priori gradient estimate yields; the bound is only claimed for
    p > 4/d.
    """
    p, d, a = params.p, params.d, params.a
    if p * d <= 4.0:
        raise ValueError(f"bound requires p > 4/d, got p={p}, d={d}")
    if a <= 0.0:
        raise ValueError("bound requires a > 0")
    const = a ** (-4.0 / (p * d - 4.0))
    t = traj.series("t")
    gsq = traj.series("grad_norm") ** 2
    bound = gsq[0] * np.exp(const * t)
    margin = (bound - gsq) / np.maximum(bound, 1e-300)
    return {
        "gronwall_constant": const,
        "min_margin": float(np.min(margin)),
        "holds": bool(np.all(gsq <= bound * (1.0 + 1e-12))),
    }


def generalized_gn_ratio(v: ComplexField, params: PhysParams) -> float:
    """Ratio int |v|^(4/d+2+p) / [ int |grad(|v|^((p+2)/2))|^2 * (int |v|^2)^(2/d) ].

    The constant of the generalized Gagliardo-Nirenberg inequality is the
    supremum of this ratio (claimed finite for 1 <= p <= 2).  The gradient of
    the pointwise power is taken spectrally.  Scale, translation, and global
    phase invariant by homogeneity.
    """
    if not (1.0 <= params.p <= 2.0):
        raise ValueError(f"ratio defined for 1 <= p <= 2, got p={params.p}")
    rho = v.values.real**2 + v.values.imag**2
    if not np.any(rho > 0.0):
        raise ZeroFieldError("ratio undefined for the zero field")
    grid = v.grid
    vol = grid.cell_volume
    lhs = float(np.sum(abs_pow(rho, 4.0 / params.d + 2.0 + params.p))) * vol
    w = ComplexField(grid, abs_pow(rho, (params.p + 2.0) / 2.0).astype(np.complex128))
    den = grad_norm_sq(w) * (float(np.sum(rho)) * vol) ** (2.0 / params.d)
    return lhs / den


@dataclass
class GNReport:
    """Estimated constant and the induced small-mass threshold.

    alpha_hat is reported in mass units (the squared-norm convention):
    alpha_hat^(2/d) = 4 / ((p+2)^2 C_p C_hat).  Family maximization gives a
    lower bound on the true constant, so alpha_hat is an estimate, not a
    certificate; the trajectory run is the oracle downstream.
    """

    c_hat: float
    alpha_hat: float
    family_size: int
    family_description: str
    mass_q: float | None = None

    @property
    def below_critical(self) -> bool | None:
        if self.mass_q is None:
            return None
        return self.alpha_hat < self.mass_q


def estimate_gn_constant(
    family: list,
    params: PhysParams,
    mass_q: float | None = None,
    description: str = "",
) -> GNReport:
    """C_hat = max ratio over the family; threshold per the energy-sign bound."""
    if not family:
        raise EmptyFamilyError("family must contain at least one field")
    c_hat = max(generalized_gn_ratio(v, params) for v in family)
    alpha_pow = 4.0 / ((params.p + 2.0) ** 2 * params.c_p * c_hat)
    alpha_hat = alpha_pow ** (params.d / 2.0)
    return GNReport(
        c_hat=c_hat,
        alpha_hat=alpha_hat,
        family_size=len(family),
        family_description=description or f"{len(family)} fields",
        mass_q=mass_q,
    )


def default_gn_family(
    grid: Grid,
    gs: GroundState | None = None,
    n_random: int = 100,
    seed: int = 20240801,
) -> list:
    """Ground state, a Gaussian width/amplitude lattice, and random smooth bumps."""
    fields = []
    if gs is not None:
        fields.append(gs.profile)
    meshes = grid.meshes()
    r2 = sum(m**2 for m in meshes)
    for amp in (0.5, 1.0, 1.5, 2.0):
        for width in (0.5, 1.0, 2.0, 4.0):
            fields.append(ComplexField(grid, amp * np.exp(-r2 / width**2) + 0j))
    rng = np.random.default_rng(seed)
    for _ in range(n_random):
        n_bumps = rng.integers(1, 4)
        vals = np.zeros(grid.shape, dtype=np.complex128)
        for _ in range(n_bumps):
            amp = rng.uniform(0.2, 2.0)
            width = rng.uniform(0.4, 3.0)
            phase = rng.uniform(0.0, 2.0 * np.pi)
            kvec = rng.uniform(-2.0, 2.0, size=grid.d)
            center = rng.uniform(-grid.L / 2, grid.L / 2, size=grid.d)
            shifted = sum((m - c) ** 2 for m, c in zip(meshes, center))
            carrier = sum(k * m for k, m in zip(kvec, meshes))
            vals += amp * np.exp(-shifted / width**2) * np.exp(1j * (carrier + phase))
        fields.append(ComplexField(grid, vals))
    return fields


def critical_budget(traj: Trajectory, params: PhysParams) -> dict:
    """Space-time budget B(t) = 2a int_0^t int |u|^(4/d+2) versus the mass drop.

    Only meaningful at the critical damping power p = 4/d, where the budget
    integrand coincides with the mass-dissipation density, so B(t) equals
    mass(0) - mass(t) and is capped by mass(0).
    """
    if params.p != 4.0 / params.d:
        raise ValueError(f"critical budget requires p = 4/d, got p={params.p}")
    t = traj.series("t")
    m = traj.series("mass")
    d_mass = traj.series("d_mass")
    budget = np.concatenate(
        ([0.0], np.cumsum(0.5 * (d_mass[1:] + d_mass[:-1]) * np.diff(t)))
    )
    deficit = m[0] - m
    return {
        "t": t,
        "budget": budget,
        "mass_deficit": deficit,
        "max_abs_error": float(np.max(np.abs(budget - deficit))),
        "budget_within_mass": bool(budget[-1] <= m[0] * (1.0 + 1e-12)),
        "budget_monotone": bool(np.all(np.diff(budget) >= -1e-15)),
    }


def scattering_monitor(traj: Trajectory) -> dict:
    """Cauchy increments of v(t) = exp(-it Lap) u(t) across stored snapshots.

    A decreasing increment series is the desk-scale signature of scattering:
    the interaction integral tails vanish and v(t) converges in L2.
    """
    if len(traj.snapshots) < 3:
        raise InsufficientSnapshotsError("need at least 3 snapshots")
    times = sorted(traj.snapshots)
    profiles = [linear_substep(traj.snapshots[s], -s) for s in times]
    increments = []
    for va, vb in zip(profiles[:-1], profiles[1:]):
        diff = ComplexField(va.grid, vb.values - va.values)
        increments.append(float(np.sqrt(mass(diff))))
    return {
        "times": np.array(times),
        "increments": np.array(increments),
        "decreasing": bool(np.all(np.diff(increments) < 0.0)),
    }
