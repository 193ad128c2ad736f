"""Resonant normal forms by order-by-order averaging.

Work happens in reduced coordinates y = A x where the translation is
alpha0 A Omega = (omega, 0) + L.  The conjugacy is H = Id + sum eps^{j+1} h^j
(times the direction A Omega for foliation-preserving maps) and the
conjugated map is

    H^{-1} o F o H (x) = x + alpha0 A Omega + D(x),  D = sum_j eps^j D_j.

At each order the unknown h^{j-1} enters D_j only through
h^{j-1} - h^{j-1}(. + alpha0 A Omega); everything else (R_j) is assembled by
eps-jet arithmetic on the conjugation identity.  The resonant part of R_j is
kept as D_j and the rest is removed by the cohomology solve.
"""

from dataclasses import dataclass, field

import numpy as np

from .dynamics import (MapFamily, compose_fptm, invert_fptm, solve_preimage)
from .errors import AllOrdersFlat, PreconditionError
from .fourier import TrigSeries, cohomology_solve, grid_points, grid_size
from .jets import taylor_scalar_delta, taylor_vector_delta

THRESHOLD_REL = 1e-8


def _values(series, N):
    return series.to_grid(N).reshape(series.value_dim, -1)


def _order_rhs(fam, h_jets, D_jets, J, N):
    """R_J: the eps^J coefficient of H + eps f(H) - H(. + T + D), with h^{J-1} = 0.

    Returns grid values of shape (s, P).
    """
    d = fam.dim
    P = N ** d
    V = fam.Omega
    T = fam.alpha * fam.Omega
    fol = fam.kind == "foliation"
    s = 1 if fol else d

    Hj = np.zeros((J + 1, s, P))
    for i, h in enumerate(h_jets):
        if i + 1 <= J:
            Hj[i + 1] = _values(h, N)
    Dj = np.zeros((J + 1, s, P))
    for k, Dk in enumerate(D_jets, start=1):
        if k <= J:
            Dj[k] = _values(Dk, N)

    total = Hj.copy()
    # eps f_eps(x + H(x))
    for i, f in enumerate(fam.f_jets):
        if i + 1 > J:
            break
        if fol:
            term = taylor_scalar_delta(lambda k, f=f: _values(f.directional(V, k) if k else f, N), Hj[:, 0, :])
        else:
            term = taylor_vector_delta(lambda mu, f=f: _values(f.derivative(mu), N), np.moveaxis(Hj, 1, 0))
        total[i + 1:] += term[:J - i]
    # - H(x + T + D(x))
    for i, h in enumerate(h_jets):
        if i + 1 > J:
            break
        hT = h.shift(T)
        if fol:
            term = taylor_scalar_delta(lambda k, hT=hT: _values(hT.directional(V, k) if k else hT, N), Dj[:, 0, :])
        else:
            term = taylor_vector_delta(lambda mu, hT=hT: _values(hT.derivative(mu), N), np.moveaxis(Dj, 1, 0))
        total[i + 1:] -= term[:J - i]
    return total[J]


def _solve_order(fam, r, h_jets, D_jets, J, band, N, divisor_floor):
    d = fam.dim
    R = TrigSeries.from_grid(_order_rhs(fam, h_jets, D_jets, J, N).reshape((-1,) + (N,) * d), band)
    W, res = cohomology_solve(-R, fam.alpha * fam.Omega, resonance=r, divisor_floor=divisor_floor)
    return W, -res


def averaging_order(F, resonance, j, lower_jets=(), band=16, N=None, divisor_floor=1e-12):
    """h^j and the resonant average at eps-order j+1.

    ``F`` is given in original coordinates at alpha = alpha0; ``lower_jets``
    are h^0..h^{j-1} in reduced coordinates (as returned by earlier calls).
    """
    if len(lower_jets) != j:
        raise PreconditionError("need exactly j lower jets")
    fam = F.reduced(resonance.A_matrix)
    N = N or grid_size(band)
    D_jets = []
    for k in range(1, j + 1):
        R = TrigSeries.from_grid(_order_rhs(fam, list(lower_jets[:k - 1]), D_jets, k, N)
                                 .reshape((-1,) + (N,) * fam.dim), band)
        D_jets.append(R.split_resonant(resonance.r)[1])
    return _solve_order(fam, resonance.r, list(lower_jets), D_jets, j + 1, band, N, divisor_floor)


@dataclass
class DeltaModel:
    slope: float
    bound: float
    offsets: list
    norms: list

    def to_dict(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


@dataclass
class NormalForm:
    kind: str
    resonance: object
    alpha0: float
    n: int
    m: int
    family: MapFamily            # reduced coordinates, alpha = alpha0
    h_jets: list
    avg_jets: list               # resonant D_1..D_N on T^d
    beta_jets: list              # orders n..N on T^{d-r}
    eta_jets: list
    eps_probe: float
    r1: TrigSeries
    r2: TrigSeries
    band: int
    grid: int
    source: MapFamily = None     # original coordinates, alpha = alpha0
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def N(self):
        return self.n + self.m - 1

    @property
    def r(self):
        return self.resonance.r

    @property
    def dim(self):
        return self.family.dim

    @property
    def direction(self):
        return self.family.Omega

    @property
    def translation(self):
        return self.alpha0 * self.family.Omega

    @property
    def beta(self):
        return self.beta_jets[0]

    @property
    def eta(self):
        return self.eta_jets[0]

    def _sum_jets(self, jets, eps):
        total = jets[0]
        for k, jet in enumerate(jets[1:], start=1):
            total = total + jet * eps ** k
        return total

    def beta_at(self, eps):
        """beta(., eps) = sum_{j=n}^{N} eps^{j-n} beta_j."""
        return self._sum_jets(self.beta_jets, eps)

    def eta_at(self, eps):
        return self._sum_jets(self.eta_jets, eps)

    def _vec(self, scalar_series):
        V = self.direction.reshape((-1,) + (1,) * self.dim)
        return TrigSeries(scalar_series.coeffs * V, scalar_series.tail)

    def conjugacy(self, eps):
        """Vector series v with H(x) = x + v(x) in reduced coordinates."""
        if not self.h_jets or eps == 0:
            return TrigSeries.zeros(self.dim, self.dim)
        hs = self._sum_jets(self.h_jets, eps) * eps
        return self._vec(hs) if self.kind == "foliation" else hs

    def conjugacy_scalar(self, eps):
        if self.kind != "foliation":
            raise PreconditionError("scalar conjugacy only for the foliation kind")
        if not self.h_jets or eps == 0:
            return TrigSeries.zeros(self.dim, 1)
        return self._sum_jets(self.h_jets, eps) * eps

    def exact_displacement(self, eps, alpha=None):
        """D with H^{-1} F H (x) = x + alpha0 A Omega + D(x), computed without expansion."""
        alpha = self.alpha0 if alpha is None else float(alpha)
        key = ("D", float(eps), alpha)
        if key in self._cache:
            return self._cache[key]
        fam = self.family
        if self.kind == "foliation":
            s = fam.scalar(eps, alpha)
            hs = self.conjugacy_scalar(eps).pad(self.band)
            q1 = compose_fptm(s, hs, self.direction, band=self.band, N=self.grid)
            hinv = invert_fptm(hs, self.direction, band=self.band, N=self.grid)
            q = compose_fptm(hinv, q1, self.direction, band=self.band, N=self.grid)
            out = self._vec(q - self.alpha0)
        else:
            v = self.conjugacy(eps)
            Fa = fam.with_params(alpha=alpha, eps=eps)
            Y = grid_points(self.dim, self.grid)
            Z = Fa(Y + v(Y))
            W = solve_preimage(v, Z)
            D = W - Y - self.translation
            out = TrigSeries.from_grid(D.T.reshape((self.dim,) + (self.grid,) * self.dim), self.band)
        self._cache[key] = out
        return out

    def explicit(self, eps):
        """sum_{j=n}^{N} eps^j D_j as a vector series on T^d."""
        total = TrigSeries.zeros(self.dim, 1 if self.kind == "foliation" else self.dim)
        for k in range(self.n, self.N + 1):
            total = total + self.avg_jets[k - 1] * eps ** k
        return self._vec(total) if self.kind == "foliation" else total

    def remainder(self, eps, alpha=None):
        return self.exact_displacement(eps, alpha) - self.explicit(eps)

    def defect(self, eps):
        """Grid sup of conjugated map minus the truncated normal form."""
        return self.remainder(eps).sup_grid(self.grid)

    def family_at(self, eps, alpha=None):
        """The original-coordinate map at (eps, alpha)."""
        return self.source.with_params(alpha=self.alpha0 if alpha is None else alpha, eps=eps)

    def to_reduced(self, X, eps):
        """Normal-form points to reduced coordinates (lifts)."""
        X = np.atleast_2d(X)
        return X + self.conjugacy(eps)(X)

    def to_original(self, X, eps):
        Ainv = np.linalg.inv(self.resonance.A_matrix.astype(float))
        return self.to_reduced(X, eps) @ Ainv.T

    def summary(self):
        return {
            "kind": self.kind, "n": self.n, "m": self.m, "N": self.N,
            "alpha0": self.alpha0, "eps_probe": self.eps_probe,
            "resonance": self.resonance.to_dict(),
            "beta": [b.to_dict() for b in self.beta_jets],
            "eta": [e.to_dict() for e in self.eta_jets],
            "h_jets": [h.trim().to_dict() for h in self.h_jets],
            "r1_sup": self.r1.sup_grid(self.grid), "r2_sup": self.r2.sup_grid(self.grid),
            "band": self.band,
        }


def resonant_normal_form(F, resonance, N=1, eps_probe=None, band=16, grid=None,
                         divisor_floor=1e-12, threshold=THRESHOLD_REL):
    """Order-N resonant normal form of the family F at alpha0 = F.alpha."""
    if N < 1:
        raise PreconditionError("order N must be at least 1")
    eps_probe = F.eps if eps_probe is None else float(eps_probe)
    fam = F.reduced(resonance.A_matrix)
    grid = grid or grid_size(band)
    ref = fam.f_jets[0].coeff_norm() or max(fj.coeff_norm() for fj in fam.f_jets)
    if ref == 0:
        raise AllOrdersFlat("f_eps vanishes identically")
    h_jets, D_jets = [], []
    for J in range(1, N + 1):
        h, D = _solve_order(fam, resonance.r, h_jets, D_jets, J, band, grid, divisor_floor)
        h_jets.append(h)
        D_jets.append(D)
    flat = [Dk.coeff_norm() < threshold * ref for Dk in D_jets]
    if all(flat):
        raise AllOrdersFlat(f"resonant averages vanish through order {N}")
    n = flat.index(False) + 1
    m = N + 1 - n
    r = resonance.r
    beta_jets, eta_jets = [], []
    for k in range(n, N + 1):
        sub = D_jets[k - 1].to_subtorus(r)
        if fam.kind == "foliation":
            V = fam.Omega
            beta_jets.append(TrigSeries(sub.coeffs * V[:r].reshape((-1,) + (1,) * sub.dim)))
            eta_jets.append(TrigSeries(sub.coeffs * V[r:].reshape((-1,) + (1,) * sub.dim)))
        else:
            beta_jets.append(TrigSeries(sub.coeffs[:r]))
            eta_jets.append(TrigSeries(sub.coeffs[r:]))
    nf = NormalForm(kind=fam.kind, resonance=resonance, alpha0=fam.alpha, n=n, m=m, family=fam,
                    h_jets=h_jets, avg_jets=D_jets, beta_jets=beta_jets, eta_jets=eta_jets,
                    eps_probe=eps_probe, r1=None, r2=None, band=band, grid=grid, source=F)
    if eps_probe > 0:
        rem = nf.remainder(eps_probe) * (1.0 / eps_probe ** (n + m))
        nf.r1 = TrigSeries(rem.coeffs[:r].copy())
        nf.r2 = TrigSeries(rem.coeffs[r:].copy())
    else:
        nf.r1 = TrigSeries.zeros(fam.dim, r)
        nf.r2 = TrigSeries.zeros(fam.dim, fam.dim - r)
    return nf


def delta_model(F, resonance, alpha_0=None, probe_offsets=(1e-3, -1e-3, 1e-4, -1e-4), N=1,
                band=16, nf=None):
    """Linear fit of |Delta(alpha)| against |alpha - alpha_0| and its a-priori bound."""
    alpha_0 = F.alpha if alpha_0 is None else alpha_0
    if nf is None:
        nf = resonant_normal_form(F.with_params(alpha=alpha_0), resonance, N=N, band=band)
    eps = F.eps
    base = nf.exact_displacement(eps, alpha_0)
    offs, vals = [], []
    for off in probe_offsets:
        diff = nf.exact_displacement(eps, alpha_0 + off) - base
        offs.append(abs(off))
        vals.append(diff.sup_grid(nf.grid))
    offs, vals = np.array(offs), np.array(vals)
    slope = float(offs @ vals / (offs @ offs)) if np.any(offs) else 0.0
    # bound ||D(H^{-1})|| |Omega| with H^{-1} measured on the grid
    V = nf.direction
    X = grid_points(nf.dim, nf.grid)
    if nf.kind == "foliation" and eps != 0:
        hinv = invert_fptm(nf.conjugacy_scalar(eps).pad(nf.band), V, band=nf.band, N=nf.grid)
        grad = hinv.gradient()(X)
        J = np.eye(nf.dim)[None] + V[None, :, None] * grad[:, None, :]
    elif eps != 0:
        v = nf.conjugacy(eps)
        Dv = np.stack([v.component(i).gradient()(X) for i in range(nf.dim)], axis=1)
        J = np.linalg.inv(np.eye(nf.dim)[None] + Dv)
    else:
        J = np.eye(nf.dim)[None]
    opnorm = float(np.abs(J).sum(axis=2).max())
    bound = opnorm * float(np.abs(V).max())
    return DeltaModel(slope=slope, bound=bound, offsets=[float(o) for o in probe_offsets],
                      norms=[float(v) for v in vals])
