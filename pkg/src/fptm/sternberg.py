"""Fiberwise linearization of a one-dimensional skew product and reduction
of the linear cocycle to a constant multiplier.

Skew product: (sigma, rho) -> (u(sigma), Gamma_sigma(rho)) with
Gamma_sigma(0) = 0 and A_sigma = Gamma_sigma'(0).  We look for fiber maps
k_sigma tangent to the identity with

    k_{u(sigma)} o Gamma_sigma = A_sigma k_sigma,

so that (sigma, rho) -> (u(sigma), A_sigma rho) in the new coordinates.
Fiber maps are degree-D Taylor polynomials in rho, carried as arrays of
shape (D+1, P) over a set of P base points.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import FiberInversionFail, PinchingFail, PreconditionError, SignChange
from .fourier import TrigSeries, cohomology_solve, grid_points, grid_size
from .frequency import diophantine_estimate

DEFAULT_DEGREE = 10
TAIL_TOL = 1e-12
RADII = (0.2, 0.1, 0.05, 0.02, 0.01, 0.005, 0.002, 0.001)


# ---------------------------------------------------------------------------
# truncated power series in rho, vectorized over base points


class PowerSeriesOps:
    def __init__(self, degree=DEFAULT_DEGREE):
        self.D = degree

    def mul(self, a, b):
        """Truncated Cauchy product."""
        out = np.zeros(np.broadcast_shapes(a.shape, b.shape))
        for i in range(self.D + 1):
            out[i:] += a[i] * b[:self.D + 1 - i]
        return out

    def compose(self, a, b):
        """a o b for b with zero constant term (Horner)."""
        out = np.zeros_like(b)
        out[0] = a[self.D]
        for k in range(self.D - 1, -1, -1):
            out = self.mul(out, b)
            out[0] += a[k]
        return out

    def identity(self, P):
        e = np.zeros((self.D + 1, P))
        e[1] = 1.0
        return e

    def revert(self, a, tol=1e-10):
        """Compositional inverse of a with a(0) = 0, a'(0) != 0."""
        A = a[1]
        if np.any(np.abs(A) < 1e-12) or np.any(np.abs(a[0]) > 1e-14):
            raise FiberInversionFail("fiber map is not a local diffeomorphism at 0")
        nonlin = a.copy()
        nonlin[1] = 0.0
        ident = self.identity(a.shape[1])
        g = ident / A
        for _ in range(self.D):
            g = (ident - self.compose(nonlin, g)) / A
        check = self.compose(a, g) - ident
        if np.max(np.abs(check)) > tol * max(1.0, np.max(np.abs(a))):
            raise FiberInversionFail("series reversion did not close")
        return g

    def derivative(self, a):
        out = np.zeros_like(a)
        out[:-1] = a[1:] * np.arange(1, self.D + 1)[:, None]
        return out

    @staticmethod
    def weighted_norm(a, gamma):
        """max over base points of sum_k |a_k| gamma^k."""
        w = gamma ** np.arange(a.shape[0])
        return float(np.max(np.abs(a).T @ w))

    @staticmethod
    def evaluate(a, rho):
        """Evaluate at rho (P,) per base point."""
        out = np.zeros_like(rho, dtype=float)
        for k in range(a.shape[0] - 1, -1, -1):
            out = out * rho + a[k]
        return out


# ---------------------------------------------------------------------------


@dataclass
class SkewProduct:
    """Fiber coefficients c_0..c_D as a series on T^1 (value_dim D+1) and
    base map u(sigma) = sigma + shift + base(sigma)."""

    fiber: TrigSeries
    shift: float
    base: TrigSeries
    gamma_radius: float = None
    pinching: tuple = None

    @property
    def degree(self):
        return self.fiber.value_dim - 1

    def coefficients(self, sigma):
        return self.fiber(np.atleast_1d(sigma)[:, None]).T

    def u(self, sigma):
        sigma = np.atleast_1d(sigma)
        return sigma + self.shift + self.base(sigma[:, None])[:, 0]

    def w(self, sigma, tol=1e-14):
        """Inverse base map by fixed-point iteration."""
        y = np.atleast_1d(np.asarray(sigma, dtype=float))
        x = y - self.shift
        for _ in range(200):
            x_new = y - self.shift - self.base(x[:, None])[:, 0]
            if np.max(np.abs(x_new - x)) <= tol:
                return x_new
            x = x_new
        return x

    def multiplier(self):
        return TrigSeries(self.fiber.coeffs[1:2].copy())

    def to_dict(self):
        return {"fiber": self.fiber.to_dict(), "shift": self.shift, "base": self.base.to_dict(),
                "gamma_radius": self.gamma_radius, "pinching": list(self.pinching or ())}

    @classmethod
    def from_dict(cls, data):
        return cls(TrigSeries.from_dict(data["fiber"]), float(data["shift"]),
                   TrigSeries.from_dict(data["base"]), data.get("gamma_radius"),
                   tuple(data["pinching"]) if data.get("pinching") else None)


def autonomous_skew_product(coeffs, shift=0.6180339887498949):
    """Skew product whose fiber map does not depend on sigma."""
    c = np.asarray(coeffs, dtype=float)
    fiber = TrigSeries(c.reshape(-1, 1).astype(complex))
    return SkewProduct(fiber=fiber, shift=float(shift), base=TrigSeries.zeros(1, 1))


def skew_product_from_circle(solution, degree=DEFAULT_DEGREE, band=None):
    """Exact skew product around a foliation-kind invariant circle.

    Coordinates (sigma, rho) -> p(sigma) + rho Omega, p the circle in
    original coordinates; then Gamma_sigma(rho) = rho + s(p + rho Omega) - s(p)
    with s the full scalar of the map.
    """
    nf = solution.nf
    if nf.kind != "foliation" or solution.r != 1:
        raise PreconditionError("skew product needs a foliation-kind circle")
    band = band or solution.w.band
    N = grid_size(band)
    sigma = grid_points(1, N)
    P = solution.original_points(sigma)
    F = nf.family_at(solution.eps, solution.alpha)
    fe = F.f_eps()
    Om = F.Omega
    rows = [np.zeros(N)]
    g = fe
    for k in range(1, degree + 1):
        g = g.directional(Om)
        rows.append(solution.eps * g(P)[:, 0] / math.factorial(k))
    rows[1] = rows[1] + 1.0
    fiber = TrigSeries.from_grid(np.array(rows), band)
    shift = float(nf.translation[0])
    return SkewProduct(fiber=fiber, shift=shift, base=solution.base_map)


def choose_radius(sp, radii=RADII, tail_tol=TAIL_TOL, n=None):
    """Largest radius with a negligible Taylor tail and lambda + delta < (lambda - delta)^2."""
    n = n or grid_size(max(sp.fiber.band, 8))
    C = sp.coefficients(np.arange(n) / n)
    D = C.shape[0] - 1
    ops = PowerSeriesOps(D)
    dC = ops.derivative(C)
    A = C[1]
    expanding = np.all(np.abs(A) > 1)
    contracting = np.all(np.abs(A) < 1)
    if not (expanding or contracting):
        raise PinchingFail("multiplier crosses the unit circle")
    for gamma in radii:
        tail = float(np.max(np.abs(C[D]) * gamma ** D))
        if tail >= tail_tol:
            continue
        rho = np.linspace(-gamma, gamma, 21)
        vals = np.abs(np.array([ops.evaluate(dC, np.full(n, t)) for t in rho]))
        lam = 0.5 * (vals.max() + vals.min())
        delta = 0.5 * (vals.max() - vals.min()) + 1e-15
        if expanding and lam + delta < (lam - delta) ** 2:
            return gamma, (float(lam), float(delta))
        if contracting:
            # the attracting case is linearized forward; the mirrored condition
            # applies to the inverse fiber maps
            li, di = 1.0 / lam, delta / (lam - delta) / lam
            if li + di < (li - di) ** 2:
                return gamma, (float(lam), float(delta))
    raise PinchingFail("no radius satisfies the pinching and tail conditions")


@dataclass
class SternbergConjugacy:
    h_fiber: TrigSeries              # Taylor coefficients of k_sigma, value_dim D+1
    A_sigma: TrigSeries
    iterations_used: int
    gamma_radius: float
    pinching: tuple
    rate: float
    rate_bound: float
    residual: float
    rho2_coefficient: float
    history: list = field(default_factory=list)
    mode: str = "backward"
    b: TrigSeries = None
    kappa: float = None

    def to_dict(self):
        return {
            "h_fiber": self.h_fiber.trim().to_dict(), "A_sigma": self.A_sigma.trim().to_dict(),
            "iterations_used": self.iterations_used, "gamma_radius": self.gamma_radius,
            "pinching": list(self.pinching), "rate": self.rate, "rate_bound": self.rate_bound,
            "residual": self.residual, "rho2_coefficient": self.rho2_coefficient,
            "mode": self.mode, "history": self.history,
            "kappa": self.kappa, "b": None if self.b is None else self.b.trim().to_dict(),
        }


def _linearizer_sequence(sp, sigma, ops, max_iter, tol, gamma, mode):
    """Iterates k^N at the points sigma; yields (N, k^N)."""
    P = sigma.size
    if mode == "backward":
        acc = ops.identity(P)          # Gamma^{-1} o ... composed so far
        prod = np.ones(P)
        s = sigma.copy()
        for N in range(1, max_iter + 1):
            s = sp.w(s)
            C = sp.coefficients(s)
            acc = ops.compose(ops.revert(C), acc)
            prod = prod * C[1]
            yield N, acc * prod
    else:
        acc = ops.identity(P)
        prod = np.ones(P)
        s = sigma.copy()
        for N in range(1, max_iter + 1):
            C = sp.coefficients(s)
            acc = ops.compose(C, acc)
            prod = prod * C[1]
            s = sp.u(s)
            yield N, acc / prod


def fiber_linearize(sp, tol=1e-13, max_iter=5000, n=None, gamma=None):
    """Sternberg linearization of the fibers (tangent to the identity)."""
    n = n or grid_size(max(sp.fiber.band, 8))
    if gamma is None:
        gamma, pinch = choose_radius(sp, n=n)
    else:
        pinch = sp.pinching or choose_radius(sp, radii=(gamma,), n=n)[1]
    lam, delta = pinch
    A_grid = sp.coefficients(np.arange(n) / n)[1]
    mode = "backward" if np.all(np.abs(A_grid) > 1) else "forward"
    ops = PowerSeriesOps(sp.degree)
    sigma = np.arange(n) / n
    pts = np.concatenate([sigma, sp.u(sigma)])
    history = []
    prev = None
    k = None
    for N, k in _linearizer_sequence(sp, pts, ops, max_iter, tol, gamma, mode):
        if prev is not None:
            diff = ops.weighted_norm(k - prev, gamma)
            history.append(diff)
            if diff < tol:
                break
        prev = k
    else:
        raise PinchingFail(f"fiber linearization did not converge in {max_iter} iterations")
    k_here, k_next = k[:, :n], k[:, n:]
    C = sp.coefficients(sigma)
    # conjugated fiber map k_{u(sigma)} o Gamma_sigma o k_sigma^{-1}
    lin = ops.compose(ops.compose(k_next, C), ops.revert(k_here))
    target = np.zeros_like(lin)
    target[1] = C[1]
    residual = ops.weighted_norm(lin - target, gamma)
    rho2 = float(np.max(np.abs(lin[2])))
    # geometric decay rate from the clean tail of the history
    h = np.array(history)
    sel = h[h > 1e3 * tol]
    if sel.size >= 4:
        tail = sel[len(sel) // 2:] if sel.size >= 8 else sel
        rate = float(np.exp(np.polyfit(np.arange(tail.size), np.log(tail), 1)[0]))
    elif sel.size >= 2:
        rate = float((sel[-1] / sel[0]) ** (1.0 / (sel.size - 1)))
    else:
        rate = 0.0
    if mode == "backward":
        bound = (lam + delta) / (lam - delta) ** 2
    else:
        li, di = 1.0 / lam, delta / (lam - delta) / lam
        bound = (li + di) / (li - di) ** 2
    band = sp.fiber.band
    h_fiber = TrigSeries.from_grid(k_here, max(band, 1))
    return SternbergConjugacy(h_fiber=h_fiber, A_sigma=sp.multiplier(), iterations_used=N,
                              gamma_radius=float(gamma), pinching=(lam, delta), rate=rate,
                              rate_bound=float(bound), residual=float(residual),
                              rho2_coefficient=rho2, history=[float(v) for v in history],
                              mode=mode)


@dataclass
class ConstantReduction:
    b: TrigSeries
    log_b: TrigSeries
    kappa: float
    residual: float
    multiplier_spread: float

    def to_dict(self):
        return {"b": self.b.trim().to_dict(), "kappa": self.kappa, "residual": self.residual,
                "multiplier_spread": self.multiplier_spread}


def constant_reduction(a, h_base=None, omega=None, band=None, tau=1.0, dioph_kmax=500,
                       divisor_floor=1e-12):
    """b and kappa with (a o h) b = kappa b o T_omega.

    ``a`` is a nonvanishing series on T^m, ``h_base`` the periodic part of a
    conjugacy h(sigma) = sigma + h_base(sigma) to the rotation by ``omega``
    (None for the identity).
    """
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    if omega.size != a.dim:
        raise PreconditionError("omega and a live on different tori")
    diophantine_estimate(omega, tau if omega.size == 1 else max(tau, float(omega.size)), k_max=dioph_kmax)
    band = band or max(a.band, h_base.band if h_base is not None else 0, 8)
    N = grid_size(band)
    ah = a.pad(band) if h_base is None else a.compose(h_base, band=band, N=N)
    vals = ah.to_grid(N)[0]
    if np.min(np.abs(vals)) <= 1e-12 or (vals.min() < 0 < vals.max()):
        raise SignChange("a o h vanishes or changes sign")
    sign = 1.0 if vals.min() > 0 else -1.0
    L = TrigSeries.from_grid(np.log(np.abs(vals))[None], band)
    log_kappa = float(L.mean()[0])
    kappa = sign * math.exp(log_kappa)
    W, _ = cohomology_solve(-(L - log_kappa), omega, divisor_floor=divisor_floor)
    b = W.apply(np.exp, band=band, N=N)
    X = grid_points(a.dim, N)
    lhs = ah(X)[:, 0] * b(X)[:, 0]
    rhs = kappa * b(X + omega[None, :])[:, 0]
    residual = float(np.max(np.abs(lhs - rhs)))
    eff = lhs / b(X + omega[None, :])[:, 0]
    return ConstantReduction(b=b, log_b=W, kappa=kappa, residual=residual,
                             multiplier_spread=float(np.var(eff)))
