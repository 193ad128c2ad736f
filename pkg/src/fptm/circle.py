"""Invariant circles (surfaces) generated by a resonance.

In normal-form coordinates (x, y) in T^r x T^{d-r} the surface is a graph
y = y* + w(x) over the non-resonant angles, with y* a simple zero of eta.
The graph transform is iterated on a collocation grid: the stable
directions are pushed forward through the base map x -> P(x), the unstable
ones are pulled back with the inverse multiplier.  The full conjugated
displacement (explicit terms, remainder and the alpha offset) is used, so
the fixed point is the exact invariant surface of the map.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .dynamics import rotation_number, torus_distance
from .errors import (DegenerateZero, HyperbolicityFail, NotContracting, NoZero,
                     PreconditionError)
from .fourier import TrigSeries, grid_points, grid_size

ROOT_TOL = 1e-12
SLOPE_FLOOR = 1e-8


def _newton_root(eta, y, tol=ROOT_TOL, max_iter=50):
    """Newton for eta(y) = 0 with eta on T^k; y is a (k,) array."""
    grad = eta.gradient() if eta.value_dim == 1 else TrigSeries.stack(
        [eta.component(i).gradient() for i in range(eta.value_dim)])
    k = eta.dim
    y = np.array(y, dtype=float)
    for _ in range(max_iter):
        v = eta(y)
        J = grad(y).reshape(k, k)
        step = np.linalg.solve(J, v)
        y = y - step
        if np.max(np.abs(step)) <= 1e-15 and np.max(np.abs(eta(y))) <= tol:
            break
    return y


def _wrap(y):
    """Representative in [0, 1); plain % can return 1.0 for tiny negatives."""
    y = np.mod(y, 1.0)
    return np.where(y >= 1.0, 0.0, y)


def locate_eta_zero(eta, which="positive_slope", seed=None, tol=ROOT_TOL, slope_floor=SLOPE_FLOOR):
    """Simple zero of eta on T^{d-r}.

    For scalar eta on T^1 all sign changes are bracketed on a fine grid and
    the one whose slope sign matches ``which`` is returned as (y*, slope).
    Otherwise ``seed`` is required and Newton is run; the slope is then the
    Jacobian matrix.
    """
    if eta.dim == 1 and eta.value_dim == 1 and seed is None:
        N = max(512, 8 * eta.band)
        # offset grid so zeros at simple rationals do not sit on nodes
        ys = (np.arange(N + 1) + 0.3183098861837907) / N
        vals = eta.eval1(ys)
        roots = []
        for j in range(N):
            a, b = vals[j], vals[j + 1]
            if a == 0.0:
                roots.append(ys[j])
            elif a * b < 0:
                roots.append(brentq(lambda t: float(eta.eval1(t)), ys[j], ys[j + 1], xtol=1e-15))
        if not roots:
            j = int(np.argmin(np.abs(vals)))
            near = minimize_scalar(lambda t: abs(float(eta.eval1(t))), method="bounded",
                                   bounds=(ys[j] - 1.0 / N, ys[j] + 1.0 / N),
                                   options={"xatol": 1e-12})
            if near.fun <= 1e-10:
                raise DegenerateZero("eta touches zero without changing sign")
            raise NoZero("eta has constant sign")
        deta = eta.derivative((1,))
        want = 1.0 if which == "positive_slope" else -1.0
        cands = []
        for y in roots:
            y = float(_wrap(_newton_root(eta, [y], tol)[0]))
            cands.append((y, float(deta.eval1(y))))
        picked = [c for c in cands if np.sign(c[1]) == want]
        if not picked:
            raise DegenerateZero(f"no zero with {which}")
        y, slope = max(picked, key=lambda c: abs(c[1]))
        if abs(slope) < slope_floor:
            raise DegenerateZero(f"slope {slope:.3g} below floor")
        if abs(eta.eval1(y)) > tol:
            raise NoZero("root polish failed")
        return y, slope
    if seed is None:
        raise PreconditionError("a seed is required when d - r > 1")
    y = _wrap(_newton_root(eta, np.atleast_1d(seed), tol))
    if np.max(np.abs(eta(y))) > tol:
        raise NoZero("Newton did not reach a zero of eta")
    k = eta.dim
    J = TrigSeries.stack([eta.component(i).gradient() for i in range(eta.value_dim)])(y).reshape(k, k)
    if abs(np.linalg.det(J)) < slope_floor:
        raise DegenerateZero("singular Jacobian at the zero")
    return y, J


def refine_zero(eta_eps, y0, tol=ROOT_TOL):
    """Follow a zero of eta(., 0) to eta(., eps) by Newton."""
    y = _newton_root(eta_eps, np.atleast_1d(y0), tol)
    if np.max(np.abs(eta_eps(y))) > tol:
        raise NoZero("zero lost when moving to eps > 0")
    return _wrap(y)


def _eta_jacobian(eta, y):
    k = eta.dim
    return TrigSeries.stack([eta.component(i).gradient() for i in range(eta.value_dim)])(
        np.atleast_1d(y)).reshape(k, k)


def classify_stability(nf, eps, y_star, unit_gap=1e-6):
    """Stability of the surface from the spectrum of I + eps^n D eta(y*, eps)."""
    eta = nf.eta_at(eps)
    k = eta.dim
    Deta = _eta_jacobian(eta, y_star)
    Lam = np.eye(k) + eps ** nf.n * Deta
    mu, Q = np.linalg.eig(Lam)
    if np.max(np.abs(mu.imag)) > 1e-12:
        raise HyperbolicityFail("complex normal multipliers are not supported")
    mu, Q = mu.real, Q.real
    if eps > 0 and np.min(np.abs(np.abs(mu) - 1.0)) < unit_gap:
        raise HyperbolicityFail(f"multiplier within {unit_gap} of the unit circle")
    if eps == 0:
        # limiting classification from the sign of D eta
        ev = np.linalg.eigvals(Deta).real
        if np.min(np.abs(ev)) < SLOPE_FLOOR:
            raise HyperbolicityFail("D eta is singular at y*")
        stable = ev < 0
    else:
        stable = np.abs(mu) < 1
    kind = "attracting" if stable.all() else "repelling" if not stable.any() else "saddle"
    return kind, {"multipliers": mu.tolist(), "eigenvectors": Q.tolist(),
                  "stable": stable.tolist(), "Deta": Deta.tolist()}


@dataclass
class GraphConfig:
    tol: float = 1e-11
    max_iter: int = 5000
    band: int = 16
    grid: int = None
    alpha0_exp: float = 0.5
    alpha1_exp: float = 0.9
    stall: int = 5
    preimage_tol: float = 1e-13
    offset_const: float = 10.0
    accelerate: bool = False


@dataclass
class BaseMap:
    """x -> x + T_x + D_x(x, y* + w(x)) and the graph's vertical update."""

    D: TrigSeries
    translation: np.ndarray
    y_star: np.ndarray
    r: int

    def points(self, x, wv):
        return np.concatenate([x, self.y_star[None, :] + wv], axis=1)

    def displacement(self, x, wv):
        return self.D(self.points(x, wv))

    def forward(self, x, wv):
        return x + self.translation[None, :self.r] + self.displacement(x, wv)[:, :self.r]


def base_preimage(base, y1, w, tol=1e-13, max_iter=200, stall=5):
    """x1 with P(x1) = y1 by the fixed-point iteration x <- y1 - T_x - D_x(x, y* + w(x))."""
    y1 = np.atleast_2d(y1)
    r = base.r
    x = y1 - base.translation[None, :r]
    bad, prev = 0, np.inf
    for _ in range(max_iter):
        x = y1 - base.translation[None, :r] - base.displacement(x, w(x))[:, :r]
        res = float(np.max(np.abs(base.forward(x, w(x)) - y1)))
        if res <= tol:
            return x
        bad = bad + 1 if res >= prev else 0
        if bad >= stall:
            raise NotContracting("base preimage iteration is not contracting")
        prev = res
    if res <= 100 * tol:
        return x
    raise NotContracting(f"base preimage residual {res:.3g} after {max_iter} iterations")


@dataclass
class GraphSolution:
    w: TrigSeries
    y_star: np.ndarray
    defect: float
    contraction_factor: float
    stability: str
    splitting: dict
    iterations: int
    eps: float
    alpha: float
    base_map: TrigSeries              # periodic part of P minus the translation
    updates: list = field(default_factory=list)
    nf: object = field(default=None, repr=False)

    @property
    def r(self):
        return self.w.dim

    def surface_points(self, sigma):
        """Points of the surface in normal-form coordinates (lifts)."""
        sigma = np.atleast_2d(sigma)
        return np.concatenate([sigma, self.y_star[None, :] + self.w(sigma)], axis=1)

    def reduced_points(self, sigma):
        return self.nf.to_reduced(self.surface_points(sigma), self.eps)

    def original_points(self, sigma):
        return self.nf.to_original(self.surface_points(sigma), self.eps)

    def base_lift(self, sigma):
        sigma = np.atleast_2d(sigma)
        return sigma + self.nf.translation[None, :self.r] + self.base_map(sigma)

    def original_defect(self, n=None):
        """max over sigma of dist(F(P(sigma)), P(base(sigma))) in original coordinates."""
        n = n or 2 * grid_size(self.w.band)
        sigma = grid_points(self.r, n) + 0.37 / n
        F = self.nf.family_at(self.eps, self.alpha)
        lhs = F(self.original_points(sigma))
        rhs = self.original_points(self.base_lift(sigma))
        return float(np.max(torus_distance(lhs, rhs)))

    def multipliers(self, n=None):
        """Normal multipliers 1 + eps grad f . Omega along the circle (foliation kind)."""
        if self.nf.kind != "foliation":
            raise PreconditionError("closed-form multipliers need the foliation kind")
        n = n or 2 * grid_size(self.w.band)
        F = self.nf.family_at(self.eps, self.alpha)
        P = self.original_points(grid_points(self.r, n))
        dfo = F.f_eps().directional(F.Omega)
        return 1.0 + self.eps * dfo(P)[:, 0]

    def rotation(self, horizon=2 ** 15, **kw):
        """Rotation number of the induced circle map (r = 1)."""
        if self.r != 1:
            raise PreconditionError("rotation number needs a one-dimensional base")
        lift = self.base_map + float(self.nf.translation[0])
        return rotation_number(lift, horizon=horizon, **kw)

    def polyline(self, n=200):
        sigma = (np.arange(n) / n)[:, None] if self.r == 1 else grid_points(self.r, int(round(n ** (1 / self.r))))
        return self.original_points(sigma) % 1.0

    def to_dict(self, with_polyline=True):
        out = {
            "w": self.w.trim().to_dict(), "y_star": [float(v) for v in self.y_star],
            "defect": self.defect, "contraction_factor": self.contraction_factor,
            "stability": self.stability, "splitting": self.splitting,
            "iterations": self.iterations, "eps": self.eps, "alpha": self.alpha,
        }
        if with_polyline:
            out["polyline"] = self.polyline().tolist()
        return out


def graph_transform(nf, eps, alpha_offset=0.0, y_star=None, which="positive_slope",
                    config=None, seed=None):
    """Invariant surface y = y* + w(x) of the conjugated map at (eps, alpha0 + alpha_offset)."""
    cfg = config or GraphConfig()
    r, d = nf.r, nf.dim
    k = d - r
    alpha = nf.alpha0 + alpha_offset
    if abs(alpha_offset) > cfg.offset_const * eps ** (nf.n + 1) and alpha_offset != 0:
        raise PreconditionError("alpha offset too large; absorb it into f first")
    if y_star is None:
        y0, _ = locate_eta_zero(nf.eta, which=which, seed=seed)
        y_star = refine_zero(nf.eta_at(eps), y0)
    y_star = np.atleast_1d(np.asarray(y_star, dtype=float))
    stability, split = classify_stability(nf, eps, y_star)
    Q = np.array(split["eigenvectors"]).reshape(k, k)
    Qinv = np.linalg.inv(Q)
    mu = np.array(split["multipliers"])
    stable = np.array(split["stable"], dtype=bool)
    Lam = Q @ np.diag(mu) @ Qinv

    Ng = cfg.grid or grid_size(cfg.band)
    X = grid_points(r, Ng)
    shape = (k,) + (Ng,) * r
    zero = TrigSeries.zeros(r, k, cfg.band)
    if eps == 0:
        base = TrigSeries.zeros(r, r, cfg.band)
        return GraphSolution(w=zero, y_star=y_star, defect=0.0, contraction_factor=0.0,
                             stability=stability, splitting=split, iterations=1, eps=0.0,
                             alpha=alpha, base_map=base, nf=nf)

    D = nf.exact_displacement(eps, alpha).trim(1e-17)
    base = BaseMap(D=D, translation=nf.translation, y_star=y_star, r=r)
    W = zero
    updates = []
    bad = 0
    lo, hi = eps ** cfg.alpha0_exp, eps ** cfg.alpha1_exp
    for it in range(1, cfg.max_iter + 1):
        wv = W(X)
        vals = base.displacement(X, wv)
        z_new = np.zeros((X.shape[0], k))
        if stable.any():
            x1 = base_preimage(base, X, W, tol=cfg.preimage_tol)
            w1 = W(x1)
            push = w1 + base.displacement(x1, w1)[:, r:]
            z_new[:, stable] = (push @ Qinv.T)[:, stable]
        if (~stable).any():
            Px = X + nf.translation[None, :r] + vals[:, :r]
            Nx = vals[:, r:] - wv @ (Lam - np.eye(k)).T
            pull = (W(Px) - Nx) @ Qinv.T
            z_new[:, ~stable] = pull[:, ~stable] / mu[None, ~stable]
        w_new = z_new @ Q.T
        upd = float(np.max(np.abs(w_new - wv)))
        updates.append(upd)
        if cfg.accelerate:
            # damp each Fourier mode of the update by the frozen rigid-rotation multiplier
            drift = np.mean(vals[:, :r], axis=0) + nf.translation[:r]
            dZ = TrigSeries.from_grid(((w_new - wv) @ Qinv.T).T.reshape(shape), cfg.band)
            phase = np.exp(1j * np.tensordot(drift, dZ._wave(), axes=(0, 0)))
            m = np.where(stable.reshape((-1,) + (1,) * r), mu.reshape((-1,) + (1,) * r) / phase,
                         phase / mu.reshape((-1,) + (1,) * r))
            dZ = TrigSeries(dZ.coeffs / (1.0 - m))
            W = W + TrigSeries(np.tensordot(Q, dZ.coeffs, axes=(1, 0)))
        else:
            W = TrigSeries.from_grid(w_new.T.reshape(shape), cfg.band)
        if len(updates) > 1 and updates[-2] > 0:
            bad = bad + 1 if upd >= updates[-2] and upd > 10 * cfg.tol else 0
            if bad >= cfg.stall:
                raise NotContracting("graph transform update ratio >= 1 for 5 iterations")
        dW = max((W.directional(e).sup_grid(Ng) for e in np.eye(r)), default=0.0) if W.band else 0.0
        if W.sup_grid(Ng) > lo or dW > hi:
            raise NotContracting("iterate left the admissible set of small graphs")
        if upd < cfg.tol:
            break
    else:
        raise NotContracting(f"no convergence in {cfg.max_iter} iterations (last update {upd:.3g})")

    # measured contraction: geometric mean ratio over the clean part of the history
    h = np.array(updates)
    good = h[(h > 1e3 * cfg.tol)]
    if good.size >= 3:
        factor = float(np.exp(np.polyfit(np.arange(good.size), np.log(good), 1)[0]))
    elif len(h) >= 2 and h[0] > 0:
        factor = float((h[-1] / h[0]) ** (1.0 / (len(h) - 1)))
    else:
        factor = 0.0

    # invariance residual on the grid and a shifted grid
    defect = 0.0
    for Xs in (X, X + 0.5 / Ng):
        wv = W(Xs)
        vals = base.displacement(Xs, wv)
        Px = Xs + nf.translation[None, :r] + vals[:, :r]
        defect = max(defect, float(np.max(np.abs(W(Px) - wv - vals[:, r:]))))
    wv = W(X)
    pvals = base.displacement(X, wv)[:, :r]
    base_series = TrigSeries.from_grid(pvals.T.reshape((r,) + (Ng,) * r), cfg.band)
    return GraphSolution(w=W, y_star=y_star, defect=defect, contraction_factor=factor,
                         stability=stability, splitting=split, iterations=it, eps=float(eps),
                         alpha=float(alpha), base_map=base_series, updates=updates, nf=nf)
