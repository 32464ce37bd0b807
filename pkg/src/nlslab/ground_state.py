"""Ground-state profiles of Lap Q - Q + Q^(1+4/d) = 0 and related functionals.

Two independent routes are provided: a spectral Petviashvili iteration on the
periodic grid (any supported dimension) and, for d = 2, a radial shooting
solver that integrates the profile ODE directly.  The d = 1 profile also has
a closed form used as an oracle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .spectral import (
    ComplexField,
    Grid,
    PhysParams,
    energy,
    fftn,
    grad_norm_sq,
    ifftn,
    lp_norm_pow,
    mass,
)


class NonConvergenceError(RuntimeError):
    """Petviashvili iteration failed to reach the residual tolerance."""


class NegativePhaseError(RuntimeError):
    """Iterate lost positivity and restarts were exhausted."""


@dataclass
class GroundState:
    """Converged profile with its cached scalars."""

    profile: ComplexField
    mass: float
    grad_norm: float
    residual: float
    iterations: int
    residual_history: list

    @property
    def grid(self) -> Grid:
        return self.profile.grid


def analytic_ground_state_1d(grid: Grid) -> ComplexField:
    """Closed-form d=1 profile Q(x) = 3^(1/4) sech^(1/2)(2x)."""
    if grid.d != 1:
        raise ValueError(f"closed form exists only for d=1, got d={grid.d}")
    x = grid.x[0]
    q = 3.0**0.25 / np.sqrt(np.cosh(2.0 * x))
    return ComplexField(grid, q.astype(np.complex128))


def pde_residual_sup(q_vals: np.ndarray, grid: Grid, d: int) -> float:
    """sup |Lap Q - Q + Q^(1+4/d)| with the spectral Laplacian."""
    lap = ifftn(-grid.k_squared * fftn(q_vals)).real
    qr = q_vals.real
    defect = lap - qr + np.abs(qr) ** (4.0 / d) * qr
    return float(np.max(np.abs(defect)))


def _gaussian_seed(grid: Grid, amp: float, width: float) -> np.ndarray:
    r2 = sum(m**2 for m in grid.meshes())
    return amp * np.exp(-r2 / width**2)


def solve_ground_state(
    grid: Grid,
    d: int | None = None,
    tol: float = 1e-10,
    max_iter: int = 500,
    seed: ComplexField | None = None,
) -> GroundState:
    """Petviashvili iteration for the positive profile on the periodic box.

    Iterates Q <- M^gamma (1 - Lap)^(-1) Q^(1+4/d) with the normalization
    ratio M = (||grad Q||^2 + ||Q||^2) / int Q^(2+4/d) and the stabilizing
    exponent gamma = q/(q-1) for q = 1 + 4/d.  Stops when the sup-norm PDE
    defect drops below tol.
    """
    if d is None:
        d = grid.d
    if d != grid.d:
        raise ValueError(f"requested dimension {d} does not match grid dimension {grid.d}")
    if not (0.0 < tol <= 1e-6):
        raise ValueError(f"tol must lie in (0, 1e-6], got {tol}")

    q_power = 1.0 + 4.0 / d
    gamma = q_power / (q_power - 1.0)
    inv_helmholtz = 1.0 / (1.0 + grid.k_squared)
    vol = grid.cell_volume

    width = 1.0
    restarts = 0
    while True:
        if seed is not None:
            q = seed.values.real.copy()
        else:
            q = _gaussian_seed(grid, amp=1.5, width=width)
        history = []
        failed_positivity = False
        for it in range(max_iter):
            res = pde_residual_sup(q, grid, d)
            history.append(res)
            if res < tol:
                field = ComplexField(grid, q.astype(np.complex128))
                return GroundState(
                    profile=field,
                    mass=mass(field),
                    grad_norm=float(np.sqrt(grad_norm_sq(field))),
                    residual=res,
                    iterations=it,
                    residual_history=history,
                )
            spectrum = fftn(q)
            num = float(np.sum((1.0 + grid.k_squared) * np.abs(spectrum) ** 2)) / grid.npoints * vol
            den = float(np.sum(np.abs(q) ** (q_power + 1.0))) * vol
            if den <= 0.0:
                failed_positivity = True
                break
            ratio = num / den
            q = ratio**gamma * ifftn(inv_helmholtz * fftn(np.abs(q) ** (q_power - 1.0) * q)).real
            if np.min(q) < -1e-12 * np.max(np.abs(q)):
                failed_positivity = True
                break
        if failed_positivity and seed is None and restarts < 3:
            restarts += 1
            width *= 1.5
            continue
        if failed_positivity:
            raise NegativePhaseError("iterate lost positivity; widen the seed")
        raise NonConvergenceError(
            f"residual {history[-1]:.3e} after {max_iter} iterations (tol {tol:.1e})"
        )


def sharp_gn_gap(u: ComplexField, gs: GroundState, params: PhysParams) -> float:
    """G(u) = E(u) - 1/2 ||grad u||^2 (1 - (mass(u)/mass(Q))^(2/d)).

    Nonnegative for every u by the sharp Gagliardo-Nirenberg inequality,
    with equality on the ground-state orbit.
    """
    if params.d != gs.grid.d:
        raise ValueError("params dimension does not match ground state")
    m = mass(u)
    gsq = grad_norm_sq(u)
    return energy(u, params) - 0.5 * gsq * (1.0 - (m / gs.mass) ** (2.0 / params.d))


def pohozaev_report(gs: GroundState, params: PhysParams) -> dict:
    """Residuals of the two ground-state integral identities.

    E(Q) = 0 and ||grad Q||^2 = d/(d+2) int Q^(4/d+2) both follow from the
    profile equation by multiplying with Q and x.grad Q and integrating.
    """
    d = gs.grid.d
    e_q = energy(gs.profile, params)
    gsq = gs.grad_norm**2
    lp = lp_norm_pow(gs.profile, 4.0 / d + 2.0)
    return {
        "energy": e_q,
        "energy_residual": abs(e_q),
        "grad_norm_sq": gsq,
        "lp_critical": lp,
        "virial_residual": abs(gsq - d / (d + 2.0) * lp),
    }


def townes_mass_by_shooting(
    r_max: float = 14.0,
    bracket: tuple = (2.0, 2.4),
    bisections: int = 60,
    rtol: float = 1e-12,
) -> dict:
    """d=2 critical mass by radial shooting, independent of the spectral solver.

    Integrates Q'' + Q'/r - Q + Q^3 = 0 from a series expansion at r = 0 and
    bisects the axis value between decay-to-zero (undershoot: Q turns back up
    while positive) and overshoot (Q crosses zero).  The mass 2 pi int Q^2 r dr
    is accumulated as an extra ODE component along the accepted solution.
    """

    def rhs(r, y):
        q, dq, _ = y
        return [dq, q - q**3 - dq / r, 2.0 * np.pi * r * q * q]

    def classify(a0):
        # events: crossing zero => a0 too large; turning up while positive => too small
        hit_zero = lambda r, y: y[0]
        hit_zero.terminal = True
        hit_zero.direction = -1
        turn_up = lambda r, y: y[1]
        turn_up.terminal = True
        turn_up.direction = 1
        r0 = 1e-6
        y0 = [a0 + 0.25 * (a0 - a0**3) * r0**2, 0.5 * (a0 - a0**3) * r0, 0.0]
        sol = solve_ivp(
            rhs, (r0, r_max), y0, rtol=rtol, atol=1e-14,
            events=(hit_zero, turn_up), dense_output=False, method="RK45",
        )
        if sol.t_events[0].size:
            return "over", sol
        if sol.t_events[1].size:
            return "under", sol
        return "decayed", sol

    lo, hi = bracket
    side_lo, _ = classify(lo)
    side_hi, _ = classify(hi)
    if not (side_lo == "under" and side_hi == "over"):
        raise RuntimeError(f"bracket does not straddle the ground state: {side_lo}, {side_hi}")
    for _ in range(bisections):
        mid = 0.5 * (lo + hi)
        side, _ = classify(mid)
        if side == "over":
            hi = mid
        else:
            lo = mid
    a_star = 0.5 * (lo + hi)
    _, sol = classify(a_star)
    # mass up to the event point; the exponential tail beyond is below the
    # bisection precision for r_max >= 14
    mass_val = float(sol.y[2, -1])
    return {
        "axis_value": a_star,
        "mass": mass_val,
        "r_stop": float(sol.t[-1]),
    }
