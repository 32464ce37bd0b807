"""Time integration by Strang splitting with exact substeps.

The linear half-step multiplies each Fourier mode by exp(-i |k|^2 dt).  The
nonlinear substep solves the pointwise ODE i u_t = -sign |u|^(4/d) u - i a |u|^p u
exactly: the intensity rho = |u|^2 obeys rho' = -2 a rho^(1+p/2), whose
solution is rho(t) = rho0 (1 + a p rho0^(p/2) t)^(-2/p), and the phase
increment int_0^dt rho(s)^(2/d) ds has a closed form (logarithmic in the
critical case p = 4/d).  Splitting error is the only dt limiter, so the
adaptive step is keyed to the pointwise nonlinear rates.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .ground_state import GroundState
from .spectral import (
    ComplexField,
    Grid,
    PhysParams,
    abs_pow,
    fftn,
    ifftn,
    sample_scaled,
)


class NumericalFailureError(RuntimeError):
    """A step produced non-finite samples."""


class Termination(str, enum.Enum):
    TIME_REACHED = "TimeReached"
    BLOWUP_RESOLUTION_LIMIT = "BlowupResolutionLimit"
    AMPLITUDE_CAP = "AmplitudeCap"
    NUMERICAL_FAILURE = "NumericalFailure"


@dataclass(frozen=True)
class StepControl:
    """Adaptive step-size and termination thresholds.

    dt = clamp(dt_min, dt_max, cfl_nl / max(max|u|^(4/d), a max|u|^p, 1)).
    Setting dt_min = dt_max pins the step (used by the identity-order runs).
    lambda_floor stops a run once the focusing scale drops below
    lambda_floor * dx, where a fixed grid can no longer resolve the collapse.
    """

    dt_max: float = 1e-3
    dt_min: float = 1e-10
    cfl_nl: float = 0.1
    amp_cap: float = 1e6
    lambda_floor: float = 4.0

    def __post_init__(self):
        if not (0.0 < self.dt_min <= self.dt_max):
            raise ValueError("need 0 < dt_min <= dt_max")
        if self.amp_cap <= 0.0:
            raise ValueError("amp_cap must be positive")
        if self.lambda_floor < 2.0:
            raise ValueError("lambda_floor must be >= 2")


@dataclass
class TrajectoryRecord:
    """Scalars monitored at one time level."""

    t: float
    dt: float
    mass: float
    energy: float
    momentum: tuple
    grad_norm: float
    max_amp: float
    lam: float
    d_mass: float
    k_diss: float
    d_mom: tuple


@dataclass
class Trajectory:
    params: PhysParams
    grid: Grid
    records: list
    termination: Termination
    final_field: ComplexField
    snapshots: dict = field(default_factory=dict)
    grad_norm_q: float = float("nan")

    def series(self, name: str) -> np.ndarray:
        if name in ("momentum", "d_mom"):
            return np.array([getattr(r, name) for r in self.records])
        return np.array([getattr(r, name) for r in self.records], dtype=np.float64)

    @property
    def times(self) -> np.ndarray:
        return self.series("t")


def linear_substep(u: ComplexField, dt: float) -> ComplexField:
    """Exact free evolution: each mode gains exp(-i |k|^2 dt)."""
    phase = np.exp(-1j * u.grid.k_squared * dt)
    return ComplexField(u.grid, ifftn(phase * fftn(u.values)))


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)


def _phase_increment(rho_pow: np.ndarray, c: np.ndarray, m: float, dt: float) -> np.ndarray:
    """int_0^dt rho(s)^(2/d) ds for rho(s) = rho0 (1+cs)^(-2/p), m = 4/(pd).

    rho_pow = rho0^(2/d).  Closed form via expm1/log1p away from m = 1, the
    logarithm at m = 1; a 16-node Gauss-Legendre quadrature backs up any
    sample the closed form cannot evaluate finitely.
    """
    s = c * dt
    safe_c = np.where(c > 0.0, c, 1.0)
    if abs(m - 1.0) < 1e-12:
        theta = rho_pow * np.log1p(s) / safe_c
    else:
        theta = rho_pow * np.expm1((1.0 - m) * np.log1p(s)) / ((1.0 - m) * safe_c)
    theta = np.where(c > 0.0, theta, rho_pow * dt)
    bad = ~np.isfinite(theta)
    if np.any(bad):
        nodes = 0.5 * dt * (_GL_NODES + 1.0)
        acc = np.zeros_like(theta[bad])
        for w, s_node in zip(_GL_WEIGHTS, nodes):
            acc += w * rho_pow[bad] * (1.0 + c[bad] * s_node) ** (-m)
        theta[bad] = 0.5 * dt * acc
    return theta


def _nonlinear_update(vals: np.ndarray, dt: float, params: PhysParams) -> np.ndarray:
    rho = vals.real**2 + vals.imag**2
    two_over_d = 2.0 / params.d
    if params.a == 0.0:
        theta = params.focusing_sign * abs_pow(rho, 2.0 * two_over_d) * dt
        return vals * np.exp(1j * theta)
    # decay rate coefficient c = a p rho^(p/2) per sample
    c = params.a * params.p * abs_pow(rho, params.p)
    amp_factor = (1.0 + c * dt) ** (-1.0 / params.p)
    m = 4.0 / (params.p * params.d)
    theta = params.focusing_sign * _phase_increment(abs_pow(rho, 2.0 * two_over_d), c, m, dt)
    return vals * amp_factor * np.exp(1j * theta)


def nonlinear_substep(u: ComplexField, dt: float, params: PhysParams) -> ComplexField:
    """Exact pointwise nonlinear flow over dt (dt >= 0 when a > 0)."""
    if params.a > 0.0 and dt < 0.0:
        raise ValueError("negative dt is only reversible for a = 0")
    return ComplexField(u.grid, _nonlinear_update(u.values.copy(), dt, params))


def _strang_raw(vals: np.ndarray, dt: float, params: PhysParams, grid: Grid):
    """One Strang step on raw samples; returns (values, their spectrum)."""
    half_kick = np.exp(-0.5j * grid.k_squared * dt)
    spec = fftn(vals) * half_kick
    mid = _nonlinear_update(ifftn(spec), dt, params)
    spec = fftn(mid) * (half_kick * grid.dealias_mask)
    return ifftn(spec), spec


def strang_step(u: ComplexField, dt: float, params: PhysParams) -> ComplexField:
    """Half linear, full nonlinear, half linear, with 2/3-rule truncation."""
    out, _ = _strang_raw(u.values, dt, params, u.grid)
    if not np.all(np.isfinite(out)):
        raise NumericalFailureError(f"non-finite samples after step dt={dt}")
    return ComplexField(u.grid, out)


def _functionals(vals, spec, grid, params, grad_norm_q, t, dt):
    """All monitored scalars for one time level, sharing the spectrum."""
    vol = grid.cell_volume
    rho = vals.real**2 + vals.imag**2
    mass_val = float(np.sum(rho)) * vol
    max_amp = float(np.sqrt(np.max(rho)))

    gsq = 0.0
    mom = []
    d_mom = []
    grad_rho_sq = np.zeros_like(rho)
    conj_vals = np.conj(vals)
    rho_p = abs_pow(rho, params.p)
    for mult in grid.deriv_multipliers:
        du = ifftn(mult * spec)
        du_sq = du.real**2 + du.imag**2
        gsq += float(np.sum(du_sq)) * vol
        cross = du * conj_vals
        mom.append(float(np.sum(cross.imag)) * vol)
        d_mom.append(2.0 * params.a * float(np.sum(rho_p * cross.imag)) * vol)
        grad_rho_sq += du_sq

    d = params.d
    lp_crit = float(np.sum(abs_pow(rho, 4.0 / d + 2.0))) * vol
    energy_val = 0.5 * gsq - params.focusing_sign * d / (4.0 + 2.0 * d) * lp_crit
    d_mass = 2.0 * params.a * float(np.sum(abs_pow(rho, params.p + 2.0))) * vol
    k_diss = float(np.sum(rho_p * grad_rho_sq)) * vol - params.c_p * float(
        np.sum(abs_pow(rho, 4.0 / d + 2.0 + params.p))
    ) * vol
    grad_norm = float(np.sqrt(gsq))
    lam = grad_norm_q / grad_norm if grad_norm > 0.0 else float("inf")
    return TrajectoryRecord(
        t=t, dt=dt, mass=mass_val, energy=energy_val, momentum=tuple(mom),
        grad_norm=grad_norm, max_amp=max_amp, lam=lam,
        d_mass=d_mass, k_diss=k_diss, d_mom=tuple(d_mom),
    )


def evolve(
    u0: ComplexField,
    params: PhysParams,
    ctrl: StepControl,
    t_end: float,
    gs: GroundState,
    snapshot_times: tuple = (),
) -> Trajectory:
    """Integrate from u0 to t_end with adaptive steps and full monitoring.

    Terminates early when the focusing scale lambda = ||grad Q|| / ||grad u||
    falls below lambda_floor * dx (collapse no longer resolvable) or when
    max|u| exceeds amp_cap; non-finite samples end the run with the last
    valid state.
    """
    if not u0.is_finite():
        raise ValueError("initial data contains non-finite samples")
    if t_end <= 0.0:
        raise ValueError("t_end must be positive")
    grid = u0.grid
    gnq = gs.grad_norm
    pending_snaps = sorted(set(float(s) for s in snapshot_times))
    for s in pending_snaps:
        if not (0.0 <= s <= t_end):
            raise ValueError(f"snapshot time {s} outside [0, t_end]")

    vals = u0.values.copy()
    spec = fftn(vals)
    t = 0.0
    records = [_functionals(vals, spec, grid, params, gnq, t, 0.0)]
    snapshots = {}
    if pending_snaps and pending_snaps[0] == 0.0:
        snapshots[0.0] = ComplexField(grid, vals.copy())
        pending_snaps.pop(0)

    termination = None
    power = 4.0 / params.d
    eps = 1e-12
    while True:
        if t >= t_end - eps * max(1.0, t_end):
            termination = Termination.TIME_REACHED
            break
        amp = records[-1].max_amp
        rate = max(amp**power, params.a * amp**params.p, 1.0)
        dt = min(ctrl.dt_max, max(ctrl.dt_min, ctrl.cfl_nl / rate))
        dt = min(dt, t_end - t)
        if pending_snaps:
            dt = min(dt, pending_snaps[0] - t)
        new_vals, new_spec = _strang_raw(vals, dt, params, grid)
        if not np.all(np.isfinite(new_vals)):
            termination = Termination.NUMERICAL_FAILURE
            break
        vals, spec = new_vals, new_spec
        t += dt
        rec = _functionals(vals, spec, grid, params, gnq, t, dt)
        records.append(rec)
        if pending_snaps and t >= pending_snaps[0] - eps:
            snapshots[pending_snaps.pop(0)] = ComplexField(grid, vals.copy())
        if rec.lam < ctrl.lambda_floor * grid.dx:
            termination = Termination.BLOWUP_RESOLUTION_LIMIT
            break
        if rec.max_amp > ctrl.amp_cap:
            termination = Termination.AMPLITUDE_CAP
            break

    return Trajectory(
        params=params, grid=grid, records=records, termination=termination,
        final_field=ComplexField(grid, vals), snapshots=snapshots, grad_norm_q=gnq,
    )


def pseudo_conformal_solution(t: float, grid: Grid, gs: GroundState) -> ComplexField:
    """Explicit minimal-mass collapsing solution |t|^(-d/2) Q(x/t) e^(i(-|x|^2/4t + 1/t)).

    Blows up as t -> 0 with gradient norm ~ 1/|t|.  For d = 1 the profile is
    sampled from the closed form; for d = 2 it is interpolated from the
    computed profile, which restricts |t| >= 1 so x/t stays inside the box.
    """
    if t == 0.0:
        raise ValueError("the pseudo-conformal solution is singular at t = 0")
    d = grid.d
    if d == 1:
        x = grid.x[0]
        prof = (3.0**0.25 / np.sqrt(np.cosh(2.0 * x / t))).astype(np.complex128)
    else:
        if abs(t) < 1.0:
            raise ValueError("d=2 sampling needs |t| >= 1 (profile leaves the box)")
        if gs.grid != grid:
            raise ValueError("ground state grid must match the target grid")
        prof = sample_scaled(gs.profile, 1.0 / t)
    r2 = sum(m**2 for m in grid.meshes())
    phase = np.exp(1j * (-r2 / (4.0 * t) + 1.0 / t))
    return ComplexField(grid, abs(t) ** (-d / 2.0) * prof * phase)
