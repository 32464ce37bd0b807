"""Blow-up detection and rate analysis on the resolvable window.

Blow-up is operationally defined: the focusing scale
lambda(t) = ||grad Q|| / ||grad u(t)|| hits the resolution floor with a
monotone trailing decrease.  A fixed grid cannot certify the singularity
time, so every rate statement is restricted to the resolvable window; the
fitter estimates (T, beta) for ||grad u|| ~ c (T-t)^(-beta) by a nested
search (golden section over T, linear least squares inside) and also emits
the log-log compensated series g(t) sqrt((T-t)/log|log(T-t)|), which is
flat when the collapse follows the log-log law.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .evolve import StepControl, Termination, Trajectory, evolve
from .ground_state import GroundState
from .spectral import ComplexField, PhysParams, fftn, ifftn, mass, sample_scaled


class InsufficientDataError(ValueError):
    """Too few samples in the fit window."""


class InsufficientCrossingsError(ValueError):
    """Too few dyadic crossings for doubling statistics."""


class DegenerateFitError(RuntimeError):
    """Power-law fit residual exceeded the sanity threshold."""


class UnresolvableProfileError(ValueError):
    """Rescaling would land below the grid resolution."""


@dataclass
class LambdaSeries:
    """Focusing-scale series with its dyadic crossing times."""

    times: np.ndarray
    lam: np.ndarray
    grad_norm_q: float
    crossing_k: np.ndarray
    crossing_t: np.ndarray

    @property
    def grad_norm(self) -> np.ndarray:
        return self.grad_norm_q / self.lam


def lambda_series(traj: Trajectory, gs: GroundState) -> LambdaSeries:
    """lambda per record plus the times t_k where lambda first crosses 2^-k."""
    t = traj.series("t")
    grad = traj.series("grad_norm")
    if np.any(grad <= 0.0):
        raise ValueError("lambda series needs ||grad u|| > 0 at every record")
    lam = gs.grad_norm / grad
    log_lam = np.log2(lam)

    ks, tks = [], []
    k_lo = int(np.floor(-log_lam[0])) + 1
    k_hi = int(np.floor(-np.min(log_lam)))
    for k in range(k_lo, k_hi + 1):
        level = -float(k)
        below = np.nonzero(log_lam < level)[0]
        if below.size == 0 or below[0] == 0:
            continue
        i = below[0]
        frac = (log_lam[i - 1] - level) / (log_lam[i - 1] - log_lam[i])
        ks.append(k)
        tks.append(t[i - 1] + frac * (t[i] - t[i - 1]))
    return LambdaSeries(
        times=t, lam=lam, grad_norm_q=gs.grad_norm,
        crossing_k=np.array(ks, dtype=int), crossing_t=np.array(tks),
    )


@dataclass
class BlowupFit:
    """Fitted blow-up time and rate exponent with the compensated series."""

    t_hat: float
    beta_hat: float
    log_c: float
    window: tuple
    rms_residual: float
    loglog_t: np.ndarray
    loglog_ratio: np.ndarray


def _golden_section_min(f, a: float, b: float, iters: int = 100) -> float:
    inv_phi = (np.sqrt(5.0) - 1.0) / 2.0
    c = b - inv_phi * (b - a)
    d = a + inv_phi * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - inv_phi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv_phi * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def _power_fit(log_g: np.ndarray, t: np.ndarray, t_hat: float):
    """Least squares of log g against log(t_hat - t); returns (beta, log_c, rms)."""
    tau = np.log(t_hat - t)
    design = np.column_stack((-tau, np.ones_like(tau)))
    coef, _, _, _ = np.linalg.lstsq(design, log_g, rcond=None)
    resid = log_g - design @ coef
    return coef[0], coef[1], float(np.sqrt(np.mean(resid**2)))


def fit_power_law(
    series: LambdaSeries,
    window_fraction: float = 0.3,
    rms_max: float = 0.5,
) -> BlowupFit:
    """Fit ||grad u(t)|| ~ c (T-t)^(-beta) on the trailing window.

    Outer golden-section search over T in (t_b, t_b + 2 (t_b - t_a)], inner
    linear least squares for (beta, log c); the minimizing triple wins.  The
    compensated log-log ratio is evaluated at the fitted T wherever
    T - t < 1/e (where log|log| is positive).
    """
    n = series.times.size
    i0 = max(0, int(np.ceil((1.0 - window_fraction) * n)) - 1)
    t = series.times[i0:]
    g = series.grad_norm[i0:]
    if t.size < 30:
        raise InsufficientDataError(f"need >= 30 points in the window, got {t.size}")
    t_a, t_b = float(t[0]), float(t[-1])
    span = t_b - t_a
    log_g = np.log(g)

    def objective(t_hat):
        return _power_fit(log_g, t, t_hat)[2]

    lo = t_b + 1e-9 * span
    hi = t_b + 2.0 * span
    t_hat = _golden_section_min(objective, lo, hi)
    beta, log_c, rms = _power_fit(log_g, t, t_hat)
    if rms > rms_max:
        raise DegenerateFitError(f"fit rms {rms:.3g} exceeds {rms_max}")
    if beta <= 0.0:
        raise DegenerateFitError(f"fitted exponent is not positive: {beta:.3g}")

    remain = t_hat - t
    valid = remain < np.exp(-1.0)
    ratio = np.full_like(t, np.nan)
    if np.any(valid):
        r = remain[valid]
        ratio[valid] = g[valid] * np.sqrt(r / np.log(-np.log(r)))
    return BlowupFit(
        t_hat=float(t_hat), beta_hat=float(beta), log_c=float(log_c),
        window=(t_a, t_b), rms_residual=rms, loglog_t=t, loglog_ratio=ratio,
    )


def lower_bound_check(fit: BlowupFit, series: LambdaSeries) -> dict:
    """inf over the fit window of ||grad u(t)|| sqrt(T_hat - t).

    A positive infimum is consistent with the known 1/sqrt(T-t) lower bound
    on the collapse rate.
    """
    t_a, t_b = fit.window
    sel = (series.times >= t_a) & (series.times <= t_b)
    t = series.times[sel]
    g = series.grad_norm[sel]
    product = g * np.sqrt(np.maximum(fit.t_hat - t, 0.0))
    i = int(np.argmin(product))
    return {
        "inf_product": float(product[i]),
        "argmin_t": float(t[i]),
        "positive": bool(product[i] > 0.0),
    }


def doubling_time_stats(series: LambdaSeries) -> dict:
    """Ratios (t_{k+1} - t_k) / (k lambda^2(t_k)) at the dyadic crossings.

    In a log-log-consistent collapse these ratios are O(1); they are
    reported, not asserted.
    """
    if series.crossing_k.size < 3:
        raise InsufficientCrossingsError(
            f"need >= 3 dyadic crossings, got {series.crossing_k.size}"
        )
    ks = series.crossing_k[:-1]
    dt = np.diff(series.crossing_t)
    lam_k = 2.0 ** (-ks.astype(float))
    ratios = dt / (ks * lam_k**2)
    return {"k": ks, "t_k": series.crossing_t[:-1], "ratios": ratios}


def exclusion_experiment(
    params: PhysParams,
    gs: GroundState,
    mass_fraction: float,
    ctrl: StepControl,
    t_end: float,
) -> dict:
    """Subcritical-mass run: no blow-up indicator may trigger.

    Evolves both the mass-rescaled ground-state profile and a mass-matched
    Gaussian; each run must reach t_end with focusing-scale decrease factor
    below 4.
    """
    if not (0.0 < mass_fraction < 1.0):
        raise ValueError("mass_fraction must lie in (0, 1)")
    if not (1.0 <= params.p < 4.0 / params.d):
        raise ValueError("exclusion regime requires 1 <= p < 4/d")
    grid = gs.grid
    target = mass_fraction * gs.mass
    runs = {}
    r2 = sum(m**2 for m in grid.meshes())
    width = 1.5
    gauss_amp = np.sqrt(target / ((np.pi / 2.0) ** (grid.d / 2.0) * width**grid.d))
    initial = {
        "rescaled_profile": ComplexField(
            grid, np.sqrt(mass_fraction) * gs.profile.values
        ),
        "gaussian": ComplexField(grid, gauss_amp * np.exp(-r2 / width**2) + 0j),
    }
    for name, u0 in initial.items():
        traj = evolve(u0, params, ctrl, t_end, gs)
        lam = traj.series("lam")
        factor = float(lam[0] / np.min(lam))
        runs[name] = {
            "termination": traj.termination.value,
            "lambda_decrease_factor": factor,
            "passed": traj.termination == Termination.TIME_REACHED and factor < 4.0,
        }
    return {
        "mass_fraction": mass_fraction,
        "p": params.p,
        "a": params.a,
        "runs": runs,
        "passed": all(r["passed"] for r in runs.values()),
    }


def profile_rescale(u: ComplexField, gs: GroundState) -> ComplexField:
    """v(x) = rho^(d/2) u(rho x) with rho = ||grad Q|| / ||grad u||.

    Normalizes the gradient norm to the ground state's, zooming the collapse
    core to unit scale.  Rejected when rho N < 16 (core unresolvable).
    """
    from .spectral import grad_norm_sq

    gn = float(np.sqrt(grad_norm_sq(u)))
    if gn <= 0.0:
        raise ValueError("cannot rescale a gradient-free field")
    rho = gs.grad_norm / gn
    if rho * u.grid.N < 16:
        raise UnresolvableProfileError(f"rho N = {rho * u.grid.N:.1f} < 16")
    vals = rho ** (u.grid.d / 2.0) * sample_scaled(u, rho)
    return ComplexField(u.grid, vals)


def profile_distance(v: ComplexField, gs: GroundState) -> float:
    """min over lattice translations of || |v| - Q ||_L2 (phase-free by modulus)."""
    if v.grid != gs.grid:
        raise ValueError("field and ground state must share a grid")
    a = np.abs(v.values)
    b = gs.profile.values.real
    corr = ifftn(fftn(a) * np.conj(fftn(b))).real
    best = float(np.max(corr))
    dist_sq = (float(np.sum(a**2)) + float(np.sum(b**2)) - 2.0 * best) * v.grid.cell_volume
    return float(np.sqrt(max(dist_sq, 0.0)))


def loglog_consistency_monitors(traj: Trajectory, series: LambdaSeries) -> dict:
    """Reported-only growth monitors for the damped log-log regime.

    Emits |E(t)| lambda^(pd/2) / |log lambda| and |P(t)| lambda^(pd/4 - 1)
    / |log lambda|, the compensated forms of the energy and momentum growth
    bounds; O(1) series are consistent with the regime.
    """
    p, d = traj.params.p, traj.params.d
    lam = series.lam
    log_lam = np.abs(np.log(lam))
    log_lam = np.maximum(log_lam, 1e-12)
    e = np.abs(traj.series("energy"))
    mom = np.linalg.norm(traj.series("momentum"), axis=1)
    return {
        "t": series.times,
        "energy_ratio": e * lam ** (p * d / 2.0) / log_lam,
        "momentum_ratio": mom * lam ** (p * d / 4.0 - 1.0) / log_lam,
    }
