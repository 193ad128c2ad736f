"""Torus map families, the group law of foliation-preserving maps, and
orbit diagnostics (Lyapunov exponents, rotation numbers, return distances).

A foliation-preserving map is T_s(x) = x + s(x) Omega for a scalar s on
T^d; the family F(x) = x + alpha Omega + eps f_eps(x) Omega is T_s with
s = alpha + eps f_eps.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import NonMonotone, NotInvertible, PreconditionError
from .fourier import TrigSeries, grid_points, grid_size

DEFAULT_BAND = 32


@dataclass
class MapFamily:
    """F(x) = x + alpha Omega + eps f_eps(x) (times Omega for the foliation kind)."""

    kind: str
    Omega: np.ndarray
    alpha: float
    eps: float
    f_jets: list
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        self.Omega = np.atleast_1d(np.asarray(self.Omega, dtype=float))
        if self.kind not in ("foliation", "generic"):
            raise PreconditionError(f"unknown map kind {self.kind!r}")
        if not self.f_jets:
            self.f_jets = [TrigSeries.zeros(self.dim, 1 if self.kind == "foliation" else self.dim)]
        want = 1 if self.kind == "foliation" else self.dim
        for fj in self.f_jets:
            if fj.dim != self.dim or fj.value_dim != want:
                raise PreconditionError("jet has wrong dimension or value dimension")

    @property
    def dim(self):
        return self.Omega.size

    def with_params(self, alpha=None, eps=None, f_jets=None):
        return MapFamily(self.kind, self.Omega.copy(),
                         self.alpha if alpha is None else float(alpha),
                         self.eps if eps is None else float(eps),
                         list(self.f_jets if f_jets is None else f_jets))

    def f_eps(self, eps=None):
        """sum_j eps^j f^j as one series."""
        eps = self.eps if eps is None else eps
        total = self.f_jets[0]
        for j, fj in enumerate(self.f_jets[1:], start=1):
            total = total + fj * eps ** j
        return total

    def scalar(self, eps=None, alpha=None):
        """Full scalar s = alpha + eps f_eps of a foliation-kind map."""
        if self.kind != "foliation":
            raise PreconditionError("scalar form exists only for the foliation kind")
        eps = self.eps if eps is None else eps
        alpha = self.alpha if alpha is None else alpha
        return self.f_eps(eps) * eps + alpha

    def _point_series(self):
        # [f, grad f] (foliation) or [f, Df rows] (generic), cached per eps
        key = ("pts", self.eps)
        if key not in self._cache:
            f = self.f_eps()
            if self.kind == "foliation":
                parts = [f, f.gradient()]
            else:
                parts = [f] + [f.component(i).gradient() for i in range(self.dim)]
            self._cache[key] = TrigSeries.stack(parts).trim(0.0)
        return self._cache[key]

    def displacement(self, X):
        """F(X) - X at points X of shape (P, d)."""
        X = np.atleast_2d(X)
        vals = self.f_eps()(X)
        if self.kind == "foliation":
            return (self.alpha + self.eps * vals[:, 0])[:, None] * self.Omega
        return self.alpha * self.Omega + self.eps * vals

    def __call__(self, X):
        X = np.asarray(X, dtype=float)
        single = X.ndim == 1
        Y = np.atleast_2d(X) + self.displacement(X)
        return Y[0] if single else Y

    def step_with_jacobian(self, x):
        """Image of a single point and the Jacobian there."""
        vals = self._point_series()(x)
        d = self.dim
        if self.kind == "foliation":
            s = self.alpha + self.eps * vals[0]
            grad = vals[1:1 + d]
            J = np.eye(d) + self.eps * np.outer(self.Omega, grad)
            return x + s * self.Omega, J
        f = vals[:d]
        Df = vals[d:].reshape(d, d)
        return x + self.alpha * self.Omega + self.eps * f, np.eye(d) + self.eps * Df

    def reduced(self, A):
        """Conjugate by the unimodular matrix A: y -> A F(A^{-1} y)."""
        A = np.asarray(A, dtype=np.int64)
        jets = []
        for fj in self.f_jets:
            g = fj.linear_change(A)
            if self.kind == "generic":
                g = TrigSeries(np.tensordot(A.astype(float), g.coeffs, axes=(1, 0)), g.tail)
            jets.append(g)
        return MapFamily(self.kind, A.astype(float) @ self.Omega, self.alpha, self.eps, jets)

    def absorb_offset(self, alpha0):
        """Same map written at rotation alpha0, with (alpha - alpha0)/eps moved into f^0."""
        if self.eps == 0:
            raise PreconditionError("cannot absorb a rotation offset at eps = 0")
        shift = (self.alpha - alpha0) / self.eps
        jets = list(self.f_jets)
        if self.kind == "foliation":
            jets[0] = jets[0] + shift
        else:
            jets[0] = jets[0] + TrigSeries.constant(shift * self.Omega, self.dim)
        return MapFamily(self.kind, self.Omega.copy(), alpha0, self.eps, jets)

    def to_dict(self):
        return {"kind": self.kind, "dim": self.dim, "Omega": [float(v) for v in self.Omega],
                "alpha": float(self.alpha), "eps": float(self.eps),
                "f_jets": [fj.to_dict() for fj in self.f_jets]}

    @classmethod
    def from_dict(cls, data):
        return cls(data["kind"], np.array(data["Omega"], dtype=float), float(data["alpha"]),
                   float(data["eps"]), [TrigSeries.from_dict(j) for j in data["f_jets"]])


# ---------------------------------------------------------------------------
# group law


def compose_fptm(f, g, Omega, band=None, N=None):
    """Scalar of T_f o T_g, i.e. g + f o T_g."""
    band = max(f.band, g.band, 1) if band is None else band
    if band < max(f.band, g.band):
        band = max(f.band, g.band)
    return f.compose_along(g, Omega, band=band, N=N) + g.pad(band)


def fptm_preimage(f, Omega, Y, tol=1e-14, max_iter=60):
    """Solve x + f(x) Omega = y pointwise; returns t with x = y + t Omega."""
    Omega = np.asarray(Omega, dtype=float)
    both = TrigSeries.stack([f, f.directional(Omega)]).trim(0.0)
    t = -f(Y)[:, 0]
    for _ in range(max_iter):
        v = both(Y + t[:, None] * Omega)
        step = (t + v[:, 0]) / (1.0 + v[:, 1])
        t = t - step
        if np.max(np.abs(step)) <= tol:
            break
    return t


def check_fptm_invertible(f, Omega, N=None, floor=1e-6):
    N = N or grid_size(max(f.band, 8))
    D = 1.0 + f.directional(Omega).to_grid(N)
    if D.min() <= floor:
        raise NotInvertible(f"1 + grad f . Omega reaches {D.min():.3g} on the grid")
    return float(D.min())


def invert_fptm(f, Omega, band=None, N=None, tol=1e-14):
    """Scalar g with T_g = (T_f)^{-1}, g = -f o T_f^{-1}."""
    band = max(f.band, 1) if band is None else band
    N = N or grid_size(band)
    check_fptm_invertible(f, Omega, N)
    Y = grid_points(f.dim, N)
    t = fptm_preimage(f, Omega, Y, tol=tol)
    return TrigSeries.from_grid(t.reshape((N,) * f.dim), band, dim=f.dim)


def solve_preimage(v, Y, tol=1e-14, max_iter=60):
    """Solve x + v(x) = y pointwise for a vector displacement series v."""
    d = v.dim
    both = TrigSeries.stack([v] + [v.component(i).gradient() for i in range(d)]).trim(0.0)
    X = Y - v(Y)
    for _ in range(max_iter):
        vals = both(X)
        r = X + vals[:, :d] - Y
        J = np.eye(d)[None] + vals[:, d:].reshape(-1, d, d)
        step = np.linalg.solve(J, r[..., None])[..., 0]
        X = X - step
        if np.max(np.abs(step)) <= tol:
            break
    return X


def torus_distance(a, b):
    """l-infinity distance on T^d with representatives in [-1/2, 1/2)."""
    diff = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    diff = diff - np.floor(diff + 0.5)
    return np.max(np.abs(diff), axis=-1)


# ---------------------------------------------------------------------------
# orbit diagnostics


@dataclass
class OrbitDiagnostics:
    lyapunov_along_Omega: float
    transverse_exponents: list
    qr_exponents: list
    rotation_estimate: list
    min_return_distance: float
    horizon: int

    def to_dict(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def _inverse_step(F, y, tol=1e-15):
    """Preimage of a point under a foliation-kind map, and the Jacobian of F there."""
    x = y - F.alpha * F.Omega
    for _ in range(50):
        fx, J = F.step_with_jacobian(x)
        r = fx - y
        x_new = x - np.linalg.solve(J, r)
        if np.max(np.abs(x_new - x)) <= tol:
            x = x_new
            break
        x = x_new
    fx, J = F.step_with_jacobian(x)
    return x, J


def lyapunov(F, x0, horizon=10_000, backward=False, return_window=1000, block=8):
    """Lyapunov exponents along an orbit of F (or of F^{-1} with ``backward``).

    Exponents are always reported for F itself: on a backward orbit the
    averages are of log|DF| at the preimages, which is what a repelling
    invariant set sees.
    """
    if horizon < 100:
        raise PreconditionError("horizon must be at least 100")
    d = F.dim
    x = np.asarray(x0, dtype=float).copy()
    start = x.copy()
    rng = np.random.default_rng(12345)
    Q, _ = np.linalg.qr(rng.normal(size=(d, d)))
    logs = np.zeros(d)
    along = 0.0
    min_ret = np.inf
    acc = np.eye(d)
    for n in range(1, horizon + 1):
        if backward:
            x, J = _inverse_step(F, x)
            acc = np.linalg.inv(J) @ acc
        else:
            x_new, J = F.step_with_jacobian(x)
            acc = J @ acc
            x = x_new
        if F.kind == "foliation":
            mult = J @ F.Omega
            along += np.log(abs(mult @ F.Omega) / (F.Omega @ F.Omega))
        if n % block == 0 or n == horizon:
            Q, R = np.linalg.qr(acc @ Q)
            sgn = np.sign(np.diag(R))
            Q = Q * sgn
            logs += np.log(np.abs(np.diag(R)))
            acc = np.eye(d)
        if n <= return_window:
            min_ret = min(min_ret, float(torus_distance(x, start)))
    qr_exp = logs / horizon
    if backward:
        qr_exp = -qr_exp
    qr_exp = np.sort(qr_exp)[::-1]
    rot = (x - start) / horizon * (-1 if backward else 1)
    if F.kind == "foliation":
        lam = along / horizon
        i = int(np.argmin(np.abs(qr_exp - lam)))
        transverse = [float(v) for j, v in enumerate(qr_exp) if j != i]
    else:
        lam = float("nan")
        transverse = [float(v) for v in qr_exp]
    return OrbitDiagnostics(lyapunov_along_Omega=float(lam), transverse_exponents=transverse,
                            qr_exponents=[float(v) for v in qr_exp],
                            rotation_estimate=[float(v) for v in rot],
                            min_return_distance=float(min_ret), horizon=int(horizon))


@dataclass
class RotationEstimate:
    value: float
    error: float
    averages: list
    table: list


def _as_lift(circle_map):
    if isinstance(circle_map, TrigSeries):
        if circle_map.dim != 1 or circle_map.value_dim != 1:
            raise PreconditionError("circle map must be a scalar series on T^1")
        N = grid_size(max(circle_map.band, 16))
        dp = circle_map.derivative((1,)).to_grid(N)[0]
        if np.min(1.0 + dp) <= 0:
            raise NonMonotone(f"lift derivative reaches {np.min(1.0 + dp):.3g}")
        K = circle_map.band
        k = 2j * np.pi * np.arange(-K, K + 1)
        c = circle_map.coeffs[0]
        return lambda x: x + (np.exp(np.multiply.outer(x, k)) @ c).real
    return circle_map


def rotation_number(circle_map, horizon=2 ** 15, seeds=16, levels=4, x0=None):
    """Rotation number of a degree-one circle map.

    ``circle_map`` is either a displacement series p (lift x -> x + p(x)) or a
    vectorized lift.  Averages (lift^n(x) - x)/n over a few uniformly spread
    seeds at n = H/8, H/4, H/2, H are Richardson-extrapolated in 1/n; the
    error is half the last extrapolation gap plus a rounding floor (each
    step of the lift rounds by up to one ulp of the current position).
    """
    lift = _as_lift(circle_map)
    x0 = np.arange(seeds) / seeds if x0 is None else np.atleast_1d(np.asarray(x0, dtype=float))
    base = max(horizon // 2 ** (levels - 1), 1)
    checkpoints = {base * 2 ** i for i in range(levels)}
    x = x0.copy()
    avgs = []
    for n in range(1, base * 2 ** (levels - 1) + 1):
        x = lift(x)
        if n in checkpoints:
            avgs.append(float(np.mean((x - x0) / n)))
    T = [[a] for a in avgs]
    for i in range(1, levels):
        for j in range(1, i + 1):
            T[i].append(T[i][j - 1] + (T[i][j - 1] - T[i - 1][j - 1]) / (2 ** j - 1))
    value = T[-1][-1]
    error = 0.5 * abs(T[-1][-1] - T[-1][-2]) if levels > 1 else abs(avgs[-1])
    error += float(np.spacing(np.max(np.abs(x))))
    return RotationEstimate(value=float(value), error=float(error), averages=avgs, table=T)


def periodicity_probe(F, grid_size_=16, n_max=1000):
    """Smallest torus distance between a grid seed and its first n_max iterates."""
    X0 = grid_points(F.dim, grid_size_)
    X = X0.copy()
    best = np.inf
    for _ in range(n_max):
        X = F(X)
        best = min(best, float(torus_distance(X, X0).min()))
    return best
