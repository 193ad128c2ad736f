"""A-posteriori KAM solver for foliation-preserving maps.

Given the full scalar f of F(x) = x + f(x) Omega and a target rotation
alpha, find a scalar h and a constant lambda with

    F o (Id + h Omega) = (Id + h Omega) o T_{alpha Omega} + lambda Omega,

i.e. e = h - h o T - (alpha + lambda) + f o (Id + h Omega) = 0.  The Newton
step uses the rank-one structure of DH = I + Omega grad(h)^T: with
s = 1 + grad(h).Omega, the correction dh = s dV solves the constant
coefficient equation dV o T - dV = (e - dlambda) / s o T up to a quadratic
error.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import AliasingRisk, Diverged, NonDegeneracyFail, NotInvertible, PreconditionError
from .fourier import TrigSeries, cohomology_solve, grid_points, grid_size, norms

INVERTIBILITY_FLOOR = 1e-6
NONDEG_FLOOR = 1e-8


def _composed(f, h, Omega, band, N):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", AliasingRisk)
        return f.compose_along(h, Omega, band=band, N=N)


def residual(f, h, lam, alpha, Omega, band=None, N=None):
    """Scalar residual e with F o H - H o T_{alpha Omega} - lambda Omega = e Omega."""
    Omega = np.atleast_1d(np.asarray(Omega, dtype=float))
    band = band or max(h.band, f.band)
    N = N or grid_size(band)
    T = alpha * Omega
    h = h.pad(band)
    return h - h.shift(T) - (alpha + lam) + _composed(f, h, Omega, band, N)


@dataclass
class KamState:
    h: TrigSeries
    lam: float
    residual_norm: float
    e: TrigSeries = field(repr=False, default=None)
    history: list = field(default_factory=list)
    rho_schedule: list = field(default_factory=list)
    converged: bool = False
    steps: int = 0
    lambda0: float = None
    h0: TrigSeries = field(repr=False, default=None)
    e0_norm: float = None

    @property
    def lambda_distance(self):
        return abs(self.lam - self.lambda0)

    @property
    def h_distance(self):
        N = grid_size(max(self.h.band, self.h0.band, 4))
        return (self.h - self.h0).sup_grid(N)

    def to_dict(self):
        out = {"h": self.h.trim().to_dict(), "lambda": self.lam,
               "residual_norm": self.residual_norm, "history": self.history,
               "rho_schedule": self.rho_schedule, "converged": self.converged, "steps": self.steps}
        if self.lambda0 is not None:
            out.update({"lambda0": self.lambda0, "e0_norm": self.e0_norm,
                        "lambda_distance": self.lambda_distance, "h_distance": self.h_distance})
        return out


def _state(f, h, lam, alpha, Omega, band, N):
    e = residual(f, h, lam, alpha, Omega, band, N)
    return e, e.sup_grid(N)


def newton_step(state, f, alpha, Omega, band=None, N=None, divisor_floor=1e-12):
    """One Newton correction; the new residual is recomputed from scratch."""
    Omega = np.atleast_1d(np.asarray(Omega, dtype=float))
    band = band or state.h.band
    N = N or grid_size(band)
    T = alpha * Omega
    h = state.h.pad(band)
    e = state.e if state.e is not None else residual(f, h, state.lam, alpha, Omega, band, N)
    s = h.directional(Omega) + 1.0
    s_grid = s.to_grid(N)[0]
    if np.min(np.abs(s_grid)) < INVERTIBILITY_FLOOR:
        raise NotInvertible(f"|1 + grad h . Omega| reaches {np.min(np.abs(s_grid)):.3g}")
    inv_sT = TrigSeries.from_grid((1.0 / s.shift(T).to_grid(N)), band)
    avg_inv = float(inv_sT.mean()[0])
    if abs(avg_inv) < NONDEG_FLOOR:
        raise NonDegeneracyFail("<(DH)^{-1}> is singular")
    e_over = e.product(inv_sT, band=band)
    dlam = float(e_over.mean()[0]) / avg_inv
    rhs = e_over - inv_sT * dlam
    dV, _ = cohomology_solve(-rhs, T, divisor_floor=divisor_floor)
    # fix the gauge: the correction dh = s dV has zero mean
    sdV = s.product(dV, band=band)
    c = -float(sdV.mean()[0]) / float(s.mean()[0])
    dh = (sdV + s * c).truncate(band)
    h_new = h + dh
    lam_new = state.lam + dlam
    e_new, norm = _state(f, h_new, lam_new, alpha, Omega, band, N)
    return KamState(h=h_new, lam=lam_new, residual_norm=norm, e=e_new,
                    history=list(state.history), rho_schedule=list(state.rho_schedule),
                    steps=state.steps + 1, lambda0=state.lambda0, h0=state.h0,
                    e0_norm=state.e0_norm), {"dlambda": dlam, "nondegeneracy": avg_inv,
                                             "min_s": float(np.min(np.abs(s_grid)))}


def kam_solve(f, alpha, Omega, h0=None, lambda0=None, tol=1e-11, max_steps=8, band=32, N=None,
              divisor_floor=1e-12, rho0=0.05, sigma0=None):
    """Newton iteration from (h0, lambda0) until the residual is below tol.

    Defaults: h0 = 0 and lambda0 = <f> - alpha, the value that removes the
    mean of the initial residual.
    """
    Omega = np.atleast_1d(np.asarray(Omega, dtype=float))
    if f.dim != Omega.size or f.value_dim != 1:
        raise PreconditionError("f must be a scalar series on T^d with d = len(Omega)")
    N = N or grid_size(band)
    h0 = TrigSeries.zeros(f.dim, 1, band) if h0 is None else h0.pad(band).truncate(band)
    lambda0 = float(f.mean()[0]) - alpha if lambda0 is None else float(lambda0)
    e0, n0 = _state(f, h0, lambda0, alpha, Omega, band, N)
    sigma0 = sigma0 if sigma0 is not None else rho0 / 2
    rho = rho0
    state = KamState(h=h0, lam=lambda0, residual_norm=n0, e=e0, lambda0=lambda0, h0=h0,
                     e0_norm=n0)
    state.history.append({"step": 0, "residual": n0, "tail": float(e0.tail),
                          "nondegeneracy": 1.0, "rho": rho,
                          "h_norm_rho": norms(h0, rho).sup_norm_rho})
    state.rho_schedule.append(rho)
    if n0 <= tol:
        state.converged = True
        return state
    increases = 0
    for n in range(1, max_steps + 1):
        new, info = newton_step(state, f, alpha, Omega, band, N, divisor_floor)
        rho = rho - sigma0 * 2.0 ** (-(n - 1)) / 2
        new.rho_schedule.append(rho)
        new.history.append({"step": n, "residual": new.residual_norm, "tail": float(new.e.tail),
                            "nondegeneracy": info["nondegeneracy"], "dlambda": info["dlambda"],
                            "rho": rho, "h_norm_rho": norms(new.h, max(rho, 0.0)).sup_norm_rho})
        increases = increases + 1 if new.residual_norm > state.residual_norm else 0
        state = new
        if state.residual_norm <= tol:
            state.converged = True
            return state
        if increases >= 2:
            raise Diverged(f"residual grew twice in a row (now {state.residual_norm:.3g})")
    return state


def quadratic_slope(residuals, floor=1e-14):
    """Slope of log e_{n+1} against log e_n over pairs above the roundoff floor."""
    r = np.asarray(residuals, dtype=float)
    pairs = [(r[i], r[i + 1]) for i in range(len(r) - 1) if r[i + 1] > floor and r[i] > floor]
    if len(pairs) < 2:
        return float("nan"), len(pairs)
    x = np.log([p[0] for p in pairs])
    y = np.log([p[1] for p in pairs])
    return float(np.polyfit(x, y, 1)[0]), len(pairs)


def solution_defect(f, state, alpha, Omega, n=None):
    """Pointwise |F(H(x)) - H(x + alpha Omega) - lambda Omega| on a shifted fine grid."""
    Omega = np.atleast_1d(np.asarray(Omega, dtype=float))
    n = n or 2 * grid_size(state.h.band)
    X = grid_points(f.dim, n) + 0.29 / n
    hx = state.h(X)[:, 0]
    Hx = X + hx[:, None] * Omega
    lhs = Hx + f(Hx)[:, 0][:, None] * Omega
    XT = X + alpha * Omega
    rhs = XT + state.h(XT)[:, 0][:, None] * Omega + state.lam * Omega
    return float(np.max(np.abs(lhs - rhs)))


def circle_conjugacy(lift, rotation, band=32, tol=1e-12, max_steps=12, secant_tol=1e-13):
    """Conjugacy of a circle map x -> x + lift(x) to the rotation by ``rotation``.

    ``lift`` is the full displacement series on T^1.  The rotation is refined
    by a secant search on the KAM parameter lambda so that lambda = 0.
    Returns (h, alpha, state).
    """
    Om = np.ones(1)
    a0 = float(rotation)
    s0 = kam_solve(lift, a0, Om, band=band, tol=tol, max_steps=max_steps)
    l0 = s0.lam
    if abs(l0) <= secant_tol:
        return s0.h, a0, s0
    a1 = a0 + l0
    s1 = kam_solve(lift, a1, Om, band=band, tol=tol, max_steps=max_steps)
    for _ in range(20):
        l1 = s1.lam
        if abs(l1) <= secant_tol or l1 == l0:
            break
        a0, a1, l0 = a1, a1 - l1 * (a1 - a0) / (l1 - l0), l1
        s1 = kam_solve(lift, a1, Om, band=band, tol=tol, max_steps=max_steps)
    return s1.h, a1, s1
