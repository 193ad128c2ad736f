"""Real trigonometric series on T^d with vector values.

Coefficients are stored densely in a box |k|_inf <= K, as an array of
shape (s, 2K+1, ..., 2K+1) with mode k at index k + K.  Nonlinear
operations are done by collocation on a uniform grid x_j = j/N and the
result is truncated back to a working band; the dropped coefficient mass
is kept in ``tail``.
"""

import itertools
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import AliasingRisk, RealityViolation, SmallDivisorBreach

TWO_PI = 2.0 * np.pi
DROP_FLOOR = 1e-15
REALITY_TOL = 1e-10


def grid_size(band):
    """Default oversampled grid for a band-K computation."""
    return max(4 * int(band), 8)


def grid_points(dim, N):
    """Uniform grid on T^d as an (N**dim, dim) array, axis 0 slowest."""
    axes = [np.arange(N) / N] * dim
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def _flip_all(a):
    # a[..., k] -> a[..., -k] on every mode axis (index k+K -> K-k)
    return a[(slice(None),) + (slice(None, None, -1),) * (a.ndim - 1)]


class TrigSeries:
    """Finite Fourier series sum_k c(k) exp(2 pi i k.x) with values in R^s."""

    __slots__ = ("coeffs", "tail", "_sparse")

    def __init__(self, coeffs, tail=0.0):
        c = np.asarray(coeffs, dtype=complex)
        if c.ndim < 2:
            raise ValueError("coeffs must have shape (s, 2K+1, ...)")
        n = c.shape[1]
        if n % 2 != 1 or any(m != n for m in c.shape[1:]):
            raise ValueError("mode axes must all have odd length 2K+1")
        self.coeffs = c
        self.tail = float(tail)
        self._sparse = None

    # -- shape -----------------------------------------------------------
    @property
    def dim(self):
        return self.coeffs.ndim - 1

    @property
    def value_dim(self):
        return self.coeffs.shape[0]

    @property
    def band(self):
        return (self.coeffs.shape[1] - 1) // 2

    def __repr__(self):
        return f"TrigSeries(dim={self.dim}, value_dim={self.value_dim}, band={self.band})"

    # -- constructors ----------------------------------------------------
    @classmethod
    def zeros(cls, dim, value_dim=1, band=0):
        n = 2 * band + 1
        return cls(np.zeros((value_dim,) + (n,) * dim, dtype=complex))

    @classmethod
    def constant(cls, value, dim, band=0):
        v = np.atleast_1d(np.asarray(value, dtype=float))
        out = cls.zeros(dim, v.size, band)
        out.coeffs[(slice(None),) + (band,) * dim] = v
        return out

    @classmethod
    def from_modes(cls, dim, modes, value_dim=1):
        """Build from a dict {k: coeff}; coeff is a scalar or an s-vector.

        The reality partner c(-k) = conj c(k) is filled in when missing.
        """
        if not modes:
            return cls.zeros(dim, value_dim)
        K = max(max(abs(int(ki)) for ki in k) for k in modes)
        out = cls.zeros(dim, value_dim, K)
        for k, c in modes.items():
            k = tuple(int(ki) for ki in k)
            if len(k) != dim:
                raise ValueError("mode has wrong dimension")
            idx = tuple(ki + K for ki in k)
            out.coeffs[(slice(None),) + idx] = np.broadcast_to(np.asarray(c, dtype=complex), (value_dim,))
        for k, c in modes.items():
            mk = tuple(-int(ki) for ki in k)
            if mk not in modes:
                idx = tuple(ki + K for ki in mk)
                out.coeffs[(slice(None),) + idx] = np.conj(np.broadcast_to(np.asarray(c, dtype=complex), (value_dim,)))
        return out

    @classmethod
    def from_grid(cls, samples, band, dim=None):
        """Fourier coefficients |k|_inf <= band of samples on a uniform grid.

        ``samples`` has shape (s, N, ..., N); pass ``dim`` to give a scalar
        field of shape (N, ..., N).
        """
        a = np.asarray(samples, dtype=float)
        if dim is not None and a.ndim == dim:
            a = a[None]
        d = a.ndim - 1
        N = a.shape[1]
        if 2 * band + 1 > N:
            raise ValueError(f"grid N={N} too coarse for band {band}")
        F = np.fft.fftn(a, axes=tuple(range(1, d + 1))) / N ** d
        idx = np.arange(-band, band + 1) % N
        c = F[np.ix_(range(a.shape[0]), *([idx] * d))]
        total = np.abs(F).sum()
        tail = max(total - np.abs(c).sum(), 0.0)
        c = 0.5 * (c + np.conj(_flip_all(c)))
        return cls(c, tail=tail)

    @classmethod
    def from_function(cls, func, dim, band, N=None):
        """Sample ``func`` on the grid (points as (P, dim) array) and transform."""
        N = N or grid_size(band)
        pts = grid_points(dim, N)
        vals = np.asarray(func(pts), dtype=float)
        if vals.ndim == 1:
            vals = vals[:, None]
        vals = vals.T.reshape((vals.shape[1],) + (N,) * dim)
        return cls.from_grid(vals, band)

    # -- basic structure -------------------------------------------------
    def copy(self):
        return TrigSeries(self.coeffs.copy(), self.tail)

    def modes(self):
        """Integer mode array of shape (d, 2K+1, ..., 2K+1)."""
        k = np.arange(-self.band, self.band + 1)
        return np.stack(np.meshgrid(*([k] * self.dim), indexing="ij"))

    def pad(self, band):
        if band < self.band:
            return self.truncate(band)
        if band == self.band:
            return self
        p = band - self.band
        c = np.pad(self.coeffs, [(0, 0)] + [(p, p)] * self.dim)
        return TrigSeries(c, self.tail)

    def truncate(self, band):
        if band >= self.band:
            return self.pad(band)
        p = self.band - band
        sl = (slice(None),) + (slice(p, p + 2 * band + 1),) * self.dim
        c = self.coeffs[sl]
        dropped = np.abs(self.coeffs).sum() - np.abs(c).sum()
        return TrigSeries(c.copy(), self.tail + max(dropped, 0.0))

    def trim(self, floor=DROP_FLOOR):
        """Drop negligible coefficients and shrink the band to the support."""
        a = np.abs(self.coeffs)
        big = a.max() if a.size else 0.0
        c = self.coeffs.copy()
        c[a <= floor * big] = 0
        if big == 0:
            return TrigSeries.zeros(self.dim, self.value_dim)
        nz = np.argwhere(np.any(c != 0, axis=0))
        K = int(np.abs(nz - self.band).max()) if nz.size else 0
        return TrigSeries(c, self.tail).truncate(K)

    def component(self, i):
        return TrigSeries(self.coeffs[i:i + 1].copy(), self.tail)

    @staticmethod
    def stack(series):
        K = max(s.band for s in series)
        c = np.concatenate([s.pad(K).coeffs for s in series], axis=0)
        return TrigSeries(c, sum(s.tail for s in series))

    def _align(self, other):
        K = max(self.band, other.band)
        return self.pad(K).coeffs, other.pad(K).coeffs

    # -- arithmetic ------------------------------------------------------
    def __add__(self, other):
        if isinstance(other, TrigSeries):
            a, b = self._align(other)
            return TrigSeries(a + b, self.tail + other.tail)
        out = self.copy()
        out.coeffs[(slice(None),) + (self.band,) * self.dim] += other
        return out

    __radd__ = __add__

    def __neg__(self):
        return TrigSeries(-self.coeffs, self.tail)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, TrigSeries):
            return self.product(other)
        other = np.asarray(other, dtype=float)
        if other.ndim == 1:
            other = other.reshape((-1,) + (1,) * self.dim)
        return TrigSeries(self.coeffs * other, self.tail * float(np.max(np.abs(other))))

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return self * (1.0 / scalar)

    def product(self, other, band=None):
        """Pointwise product; exact on a grid large enough for the full band."""
        Kp = self.band + other.band
        N = 2 * Kp + 2
        a = self.to_grid(N)
        b = other.to_grid(N)
        if a.shape[0] != b.shape[0] and min(a.shape[0], b.shape[0]) != 1:
            raise ValueError("value dimensions do not broadcast")
        out = TrigSeries.from_grid(a * b, Kp)
        out.tail = self.tail + other.tail
        return out if band is None else out.truncate(band)

    def mean(self):
        return self.coeffs[(slice(None),) + (self.band,) * self.dim].real.copy()

    def centered(self):
        out = self.copy()
        out.coeffs[(slice(None),) + (self.band,) * self.dim] = 0
        return out

    # -- calculus --------------------------------------------------------
    def _wave(self):
        return TWO_PI * self.modes()

    def derivative(self, multi_index):
        mu = tuple(int(m) for m in multi_index)
        factor = np.ones(self.coeffs.shape[1:], dtype=complex)
        w = self._wave()
        for i, m in enumerate(mu):
            if m:
                factor = factor * (1j * w[i]) ** m
        return TrigSeries(self.coeffs * factor, self.tail)

    def directional(self, v, order=1):
        """(v . grad)^order applied to every component."""
        v = np.asarray(v, dtype=float)
        kv = np.tensordot(v, self._wave(), axes=(0, 0))
        return TrigSeries(self.coeffs * (1j * kv) ** order, self.tail)

    def gradient(self):
        """Gradient of a scalar series as a vector series (value_dim = dim)."""
        if self.value_dim != 1:
            raise ValueError("gradient needs a scalar series")
        w = self._wave()
        c = np.concatenate([self.coeffs * (1j * w[i]) for i in range(self.dim)], axis=0)
        return TrigSeries(c, self.tail)

    def shift(self, t):
        """The series x -> w(x + t)."""
        t = np.asarray(t, dtype=float)
        phase = np.exp(1j * np.tensordot(t, self._wave(), axes=(0, 0)))
        return TrigSeries(self.coeffs * phase, self.tail)

    # -- grids and evaluation --------------------------------------------
    def to_grid(self, N):
        """Real samples of shape (s, N, ..., N) on x_j = j/N."""
        d, K = self.dim, self.band
        if N < 2 * K + 1:
            # fold aliased modes explicitly
            G = np.zeros((self.value_dim,) + (N,) * d, dtype=complex)
            idx = np.arange(-K, K + 1) % N
            for pos in itertools.product(range(2 * K + 1), repeat=d):
                tgt = tuple(idx[p] for p in pos)
                G[(slice(None),) + tgt] += self.coeffs[(slice(None),) + pos]
        else:
            G = np.zeros((self.value_dim,) + (N,) * d, dtype=complex)
            idx = np.arange(-K, K + 1) % N
            G[np.ix_(range(self.value_dim), *([idx] * d))] = self.coeffs
        vals = np.fft.ifftn(G, axes=tuple(range(1, d + 1))) * N ** d
        return vals.real

    def _sparse_form(self):
        if self._sparse is None:
            nz = np.argwhere(np.any(self.coeffs != 0, axis=0))
            k = nz - self.band
            c = self.coeffs[(slice(None),) + tuple(nz.T)].T  # (M, s)
            self._sparse = (k.astype(float), c)
        return self._sparse

    def _eval_complex(self, X):
        d, K = self.dim, self.band
        P = X.shape[0]
        n = 2 * K + 1
        kk, cs = self._sparse_form()
        if kk.shape[0] == 0:
            return np.zeros((P, self.value_dim), dtype=complex)
        if kk.shape[0] * 8 <= n ** d or d > 3:
            ph = np.exp(1j * TWO_PI * (X @ kk.T))
            return ph @ cs
        k = np.arange(-K, K + 1)
        E = np.exp(1j * TWO_PI * X[:, d - 1, None] * k)  # (P, n)
        T = np.tensordot(self.coeffs, E, axes=([d], [1]))  # (s, n.., P)
        T = np.moveaxis(T, -1, 0)  # (P, s, n, ...)
        for ax in range(d - 2, -1, -1):
            E = np.exp(1j * TWO_PI * X[:, ax, None] * k)
            T = np.einsum("ps...j,pj->ps...", T, E)
        return T

    def __call__(self, x):
        """Evaluate at a point (d,) or points (P, d); returns (s,) or (P, s)."""
        X = np.asarray(x, dtype=float)
        single = False
        if X.ndim == 0:
            X = X.reshape(1, 1)
            single = True
        elif X.ndim == 1:
            if X.size == self.dim:
                X = X[None, :]
                single = True
            elif self.dim == 1:
                X = X[:, None]
            else:
                raise ValueError("point has wrong dimension")
        V = self._eval_complex(X)
        scale = np.abs(self.coeffs).reshape(self.value_dim, -1).sum(axis=1)
        if V.size and np.any(np.abs(V.imag) > REALITY_TOL * np.maximum(scale, 1e-300)):
            raise RealityViolation("imaginary part of evaluation exceeds tolerance")
        out = V.real
        return out[0] if single else out

    def eval1(self, x):
        """Scalar series on T^1 at an array of points; returns same shape."""
        x = np.asarray(x, dtype=float)
        return self(x.reshape(-1, 1))[:, 0].reshape(x.shape)

    # -- compositions ----------------------------------------------------
    def compose(self, displacement, band=None, N=None):
        """The series x -> w(x + v(x)) for a vector series v (value_dim = dim)."""
        band = self.band if band is None else band
        N = N or grid_size(max(band, displacement.band, 1))
        if max(self.band, displacement.band) > N / 4:
            warnings.warn(AliasingRisk(f"band {max(self.band, displacement.band)} > N/4 = {N / 4}"))
        pts = grid_points(self.dim, N)
        disp = displacement.to_grid(N).reshape(self.dim, -1).T
        vals = self(pts + disp)
        vals = vals.T.reshape((self.value_dim,) + (N,) * self.dim)
        return TrigSeries.from_grid(vals, band)

    def compose_along(self, g, direction, band=None, N=None):
        """The series x -> w(x + g(x) * direction) for a scalar series g."""
        direction = np.asarray(direction, dtype=float)
        disp = TrigSeries(g.coeffs * direction.reshape((-1,) + (1,) * g.dim))
        return self.compose(disp, band=band, N=N)

    def apply(self, func, band=None, N=None):
        """Collocation of a pointwise nonlinear function of the values."""
        band = self.band if band is None else band
        N = N or grid_size(max(band, 1))
        vals = np.asarray(func(self.to_grid(N)), dtype=float)
        return TrigSeries.from_grid(vals, band)

    def linear_change(self, A):
        """The series y -> w(A^{-1} y) for a unimodular integer matrix A."""
        A = np.asarray(A, dtype=np.int64)
        Ainv_T = np.rint(np.linalg.inv(A).T).astype(np.int64)
        kk, cs = self._sparse_form()
        if kk.shape[0] == 0:
            return TrigSeries.zeros(self.dim, self.value_dim)
        knew = (Ainv_T @ kk.astype(np.int64).T).T
        K = int(np.abs(knew).max())
        out = TrigSeries.zeros(self.dim, self.value_dim, K)
        for kv, c in zip(knew, cs):
            out.coeffs[(slice(None),) + tuple(kv + K)] = c
        out.tail = self.tail
        return out

    # -- resonance handling -------------------------------------------------
    def resonant_mask(self, r):
        """Boolean mask over modes whose first r components vanish."""
        m = self.modes()
        return np.all(m[:r] == 0, axis=0) if r > 0 else np.ones(m.shape[1:], dtype=bool)

    def split_resonant(self, r):
        mask = self.resonant_mask(r)
        res = TrigSeries(np.where(mask, self.coeffs, 0))
        non = TrigSeries(np.where(mask, 0, self.coeffs), self.tail)
        return non, res

    def to_subtorus(self, r):
        """Restrict a series with only resonant modes to a series on T^{d-r}."""
        K = self.band
        sl = (slice(None),) + (K,) * r + (slice(None),) * (self.dim - r)
        return TrigSeries(self.coeffs[sl].copy(), self.tail)

    def from_subtorus(self, r):
        """Inverse of ``to_subtorus``: view a T^{d-r} series as one on T^d."""
        K = self.band
        n = 2 * K + 1
        out = np.zeros((self.value_dim,) + (n,) * (self.dim + r), dtype=complex)
        out[(slice(None),) + (K,) * r] = self.coeffs
        return TrigSeries(out, self.tail)

    # -- sizes -----------------------------------------------------------
    def coeff_norm(self):
        """Sum of coefficient moduli, max over components (C0 upper bound)."""
        return float(np.abs(self.coeffs).reshape(self.value_dim, -1).sum(axis=1).max())

    def sup_grid(self, N=None):
        N = N or grid_size(max(self.band, 4))
        return float(np.abs(self.to_grid(N)).max())

    def is_real(self, tol=1e-12):
        scale = max(np.abs(self.coeffs).max(), 1e-300)
        return bool(np.abs(self.coeffs - np.conj(_flip_all(self.coeffs))).max() <= tol * scale)

    # -- serialization ---------------------------------------------------
    def to_dict(self):
        out = []
        K = self.band
        for idx in np.argwhere(np.any(self.coeffs != 0, axis=0)):
            c = self.coeffs[(slice(None),) + tuple(idx)]
            out.append({"k": [int(i - K) for i in idx],
                        "re": [float(v) for v in c.real],
                        "im": [float(v) for v in c.imag]})
        return {"dim": self.dim, "value_dim": self.value_dim, "band": K, "coeffs": out}

    @classmethod
    def from_dict(cls, data):
        dim = int(data["dim"])
        s = int(data.get("value_dim", 1))
        K = int(data.get("band", 0))
        out = cls.zeros(dim, s, K)
        for item in data.get("coeffs", []):
            k = [int(v) for v in item["k"]]
            if len(k) != dim or max(abs(v) for v in k) > K:
                raise ValueError(f"mode {k} outside declared band")
            re = np.broadcast_to(np.asarray(item["re"], dtype=float), (s,))
            im = np.broadcast_to(np.asarray(item.get("im", 0.0), dtype=float), (s,))
            out.coeffs[(slice(None),) + tuple(v + K for v in k)] = re + 1j * im
        if not out.is_real(1e-12):
            raise RealityViolation("coefficients violate c(-k) = conj c(k)")
        return out


# ----------------------------------------------------------------------------
# norms


@dataclass
class NormReport:
    rho: float
    sup_norm_rho: float
    c_norms: list


def norms(series, rho, j_max=1, N=None):
    """Weighted coefficient bound for the analytic norm plus grid C^j norms."""
    w = series._wave() / TWO_PI
    k1 = np.abs(w).sum(axis=0)
    weight = np.exp(TWO_PI * k1 * rho)
    bound = float((np.abs(series.coeffs) * weight).reshape(series.value_dim, -1).sum(axis=1).max())
    N = N or grid_size(max(series.band, 4))
    c_norms = []
    for j in range(j_max + 1):
        best = 0.0
        for mu in itertools.product(range(j + 1), repeat=series.dim):
            if sum(mu) != j:
                continue
            best = max(best, series.derivative(mu).sup_grid(N))
        c_norms.append(best)
    return NormReport(rho=float(rho), sup_norm_rho=bound, c_norms=c_norms)


# ----------------------------------------------------------------------------
# cohomology equation


def cohomology_solve(Q, omega, resonance=None, divisor_floor=1e-12):
    """Solve W - W(. + omega) = Q - P(Q) mode by mode.

    P projects onto the resonant modes: those whose first r components vanish
    when ``resonance`` (anything with an integer attribute ``r``, or an int)
    is given, else the zero mode only.  Returns (W, resonant_part) with W of
    zero mean.
    """
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    r = None
    if resonance is not None:
        r = resonance if isinstance(resonance, (int, np.integer)) else int(resonance.r)
    if omega.size != Q.dim:
        if r is not None and omega.size == r:
            omega = np.concatenate([omega, np.zeros(Q.dim - r)])
        else:
            raise ValueError("frequency dimension does not match series")
    kw = np.tensordot(omega, Q._wave(), axes=(0, 0))
    div = 1.0 - np.exp(1j * kw)
    if r is None:
        mask = np.zeros(Q.coeffs.shape[1:], dtype=bool)
        mask[(Q.band,) * Q.dim] = True
    else:
        mask = Q.resonant_mask(r)
    active = np.any(Q.coeffs != 0, axis=0) & ~mask
    if np.any(np.abs(div[active]) < divisor_floor):
        worst = np.argwhere(active & (np.abs(div) < divisor_floor))[0] - Q.band
        raise SmallDivisorBreach(f"divisor below {divisor_floor:g} at k={worst.tolist()}")
    safe = np.where(mask, 1.0, div)
    W = np.where(mask, 0, Q.coeffs / safe)
    res = np.where(mask, Q.coeffs, 0)
    return TrigSeries(W, Q.tail), TrigSeries(res)


def cohomology_residual(W, Q_minus_res, omega, N=None):
    """Grid sup of W - W(.+omega) - Q'; the oracle used by tests."""
    N = N or grid_size(max(W.band, Q_minus_res.band, 4))
    lhs = W.to_grid(N) - W.shift(omega).to_grid(N)
    return float(np.abs(lhs - Q_minus_res.to_grid(N)).max())
