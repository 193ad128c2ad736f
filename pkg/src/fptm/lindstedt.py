"""Lindstedt series for the invariant surface generated by a resonance.

Unknowns: an embedding l(sigma) = (sigma, y0) + sum_j eps^j l_j(sigma) of
T^r and base dynamics u(sigma) = sigma + omega' + sum_j eps^j u_j with
constant u_j, solving F o l = l o u in reduced coordinates.  At order j

    l_j - l_j(. + omega') = (u_j, 0) - E_j,

where E_j collects every lower-order contribution (assembled by eps-jet
arithmetic).  The average of the y-part of E_j fixes <l_{j-1}^y> through
the non-degeneracy matrix M = <V D_y f^0(., y0)>; the x-part gives u_j.
"""

from dataclasses import dataclass, field

import numpy as np

from .dynamics import torus_distance
from .errors import NonDegeneracyFail, PreconditionError, SolvabilityFail
from .fourier import TrigSeries, cohomology_solve, grid_points, grid_size
from .jets import taylor_vector_delta

SOLVABILITY_TOL = 1e-10
NONDEG_FLOOR = 1e-8


@dataclass
class LindstedtSeries:
    kind: str
    N: int
    y0: np.ndarray
    l_jets: list                 # [(l_j^x, l_j^y)] for j = 1..N
    u_consts: list               # constant vectors u_j, j = 1..N
    averages_log: list           # <l_j^y> chosen at each order
    shift: np.ndarray            # omega' = omega + L_1
    family: object = field(repr=False, default=None)   # reduced coordinates
    resonance: object = field(repr=False, default=None)
    u_rederived: list = field(default_factory=list)
    cohomology_residuals: list = field(default_factory=list)

    @property
    def r(self):
        return self.shift.size

    @property
    def dim(self):
        return self.family.dim

    def jet(self, j):
        lx, ly = self.l_jets[j - 1]
        return TrigSeries.stack([lx, ly])

    def embedding(self, sigma, eps, order=None):
        """l^{<=N}(sigma) in reduced coordinates (lifts)."""
        order = self.N if order is None else order
        sigma = np.atleast_2d(sigma)
        out = np.concatenate([sigma, np.broadcast_to(self.y0, (sigma.shape[0], self.y0.size))], axis=1)
        for j in range(1, order + 1):
            out = out + eps ** j * self.jet(j)(sigma)
        return out

    def base_shift(self, eps, order=None):
        order = self.N if order is None else order
        total = self.shift.copy()
        for j in range(1, order + 1):
            total = total + eps ** j * self.u_consts[j - 1]
        return total

    def to_dict(self):
        return {
            "kind": self.kind, "N": self.N, "y0": self.y0.tolist(), "shift": self.shift.tolist(),
            "l_jets": [{"x": lx.trim().to_dict(), "y": ly.trim().to_dict()} for lx, ly in self.l_jets],
            "u_consts": [np.asarray(u).tolist() for u in self.u_consts],
            "u_rederived": [np.asarray(u).tolist() for u in self.u_rederived],
            "averages_log": [np.asarray(a).tolist() for a in self.averages_log],
            "cohomology_residuals": self.cohomology_residuals,
        }


def _vector_f(fam, k):
    """k-th eps-jet of the displacement as a vector series (f Omega for the foliation kind)."""
    f = fam.f_jets[k]
    if fam.kind == "foliation":
        V = fam.Omega.reshape((-1,) + (1,) * fam.dim)
        return TrigSeries(f.coeffs * V, f.tail)
    return f


class _Expander:
    def __init__(self, fam, r, y0, band, grid):
        self.fam, self.r, self.band = fam, r, band
        self.d = fam.dim
        self.k = self.d - r
        self.Ng = grid
        self.S = grid_points(r, grid)
        self.P = self.S.shape[0]
        self.y0 = y0
        self.Z0 = np.concatenate([self.S, np.broadcast_to(y0, (self.P, self.k))], axis=1)
        self.shift = (fam.alpha * fam.Omega)[:r]
        self.fv = [_vector_f(fam, i) for i in range(len(fam.f_jets))]

    def orderE(self, l_jets, u_consts, J):
        """E_J with l_J = 0 and u_J = 0; grid values (d, P)."""
        d, r, P = self.d, self.r, self.P
        Lam = np.zeros((d, J + 1, P))
        for i, lj in enumerate(l_jets, start=1):
            if i < J:
                Lam[:, i, :] = lj(self.S).T
        total = np.zeros((J + 1, d, P))
        for i, f in enumerate(self.fv):
            if i + 1 > J:
                break
            term = taylor_vector_delta(lambda mu, f=f: f.derivative(mu)(self.Z0).T, Lam[:, :J + 1 - (i + 1), :])
            total[i + 1:] += term
        U = np.zeros((r, J + 1, P))
        for i, u in enumerate(u_consts, start=1):
            if i < J:
                U[:, i, :] = np.asarray(u)[:, None]
        Sw = self.S + self.shift[None, :]
        for i, lj in enumerate(l_jets, start=1):
            if i >= J:
                break
            term = taylor_vector_delta(lambda mu, lj=lj: lj.derivative(mu)(Sw).T, U[:, :J - i + 1, :])
            total[i:] -= term
        return total[J]

    def M(self):
        """<V D_y f^0(., y0)> as a (d, d-r) matrix."""
        f0 = self.fv[0]
        cols = []
        for a in range(self.k):
            mu = tuple(int(i == self.r + a) for i in range(self.d))
            cols.append(f0.derivative(mu)(self.Z0).mean(axis=0))
        return np.stack(cols, axis=1)

    def DyF(self):
        """D_y of the order-0 vector field on the grid, shape (P, d, d-r)."""
        f0 = self.fv[0]
        cols = []
        for a in range(self.k):
            mu = tuple(int(i == self.r + a) for i in range(self.d))
            cols.append(f0.derivative(mu)(self.Z0))
        return np.stack(cols, axis=2)


def lindstedt_expand(F, resonance, y0, N=2, band=16, grid=None, close_last_average=True):
    """Order-N Lindstedt series of the surface through y0.

    F is given in original coordinates at alpha = alpha0; it is reduced with
    the resonance matrix internally.  With ``close_last_average`` the
    average of l_N^y is fixed from the order-(N+1) solvability condition,
    otherwise it is left at zero.
    """
    if N < 1:
        raise PreconditionError("order N must be at least 1")
    fam = F.reduced(resonance.A_matrix)
    r = resonance.r
    d = fam.dim
    k = d - r
    y0 = np.atleast_1d(np.asarray(y0, dtype=float))
    grid = grid or grid_size(band)
    ex = _Expander(fam, r, y0, band, grid)
    M = ex.M()
    My = M[r:]
    if abs(np.linalg.det(My)) < NONDEG_FLOOR:
        raise NonDegeneracyFail(f"<D_y f> is singular at y0 (det {np.linalg.det(My):.3g})")
    DyF = ex.DyF()
    shape = (d,) + (grid,) * r

    l_jets, u_consts, u_red, avgs, resid = [], [], [], [], []
    for J in range(1, N + 2):
        if J == N + 1 and not close_last_average:
            avgs.append(np.zeros(k))
            break
        E = ex.orderE(l_jets, u_consts, J)
        Ebar = E.mean(axis=1)
        if J == 1:
            if np.max(np.abs(Ebar[r:])) > SOLVABILITY_TOL:
                raise SolvabilityFail(f"<f(., y0)> = {Ebar[r:].tolist()} does not vanish")
            c = np.zeros(k)
        else:
            c = -np.linalg.solve(My, Ebar[r:])
            # shift the average of l_{J-1}^y by c and update E_J accordingly
            l_jets[J - 2] = l_jets[J - 2] + TrigSeries.constant(np.concatenate([np.zeros(r), c]), r)
            avgs.append(c)
            E = E + np.einsum("pda,a->dp", DyF, c)
            Ebar = E.mean(axis=1)
        if J == N + 1:
            break
        u = Ebar[:r].copy()
        u_red.append(u.copy())
        if fam.kind == "foliation":
            u = np.zeros(r)
        u_consts.append(u)
        G = E.copy()
        G[:r] -= u[:, None]
        Gs = TrigSeries.from_grid(G.reshape(shape), band)
        W, res = cohomology_solve(-Gs, ex.shift)
        resid.append(float(np.max(np.abs(res.mean()))))
        l_jets.append(W)
    if len(avgs) < N:
        avgs.append(np.zeros(k))
    pairs = [(TrigSeries(W.coeffs[:r].copy()), TrigSeries(W.coeffs[r:].copy())) for W in l_jets]
    return LindstedtSeries(kind=fam.kind, N=N, y0=y0, l_jets=pairs, u_consts=u_consts,
                           averages_log=avgs, shift=ex.shift.copy(), family=fam,
                           resonance=resonance, u_rederived=u_red, cohomology_residuals=resid)


def defect(F, series, eps, n=None):
    """sup over a sigma grid of |F_eps(l(sigma)) - l(u(sigma))| (torus distance).

    F is in original coordinates; it is reduced with the series' resonance.
    """
    fam = F.reduced(series.resonance.A_matrix).with_params(eps=eps)
    n = n or 64
    sigma = grid_points(series.r, n) + 0.13 / n
    lhs = fam(series.embedding(sigma, eps))
    rhs = series.embedding(sigma + series.base_shift(eps)[None, :], eps)
    return float(np.max(torus_distance(lhs, rhs)))


def graph_distance(series, solution, eps, n=128, tol=1e-14):
    """Vertical C^0 distance between the curve l^{<=N} and the invariant circle.

    Both are written in reduced coordinates as graphs over the x angle;
    needs r = 1 and d - r = 1.
    """
    if series.r != 1 or series.dim != 2:
        raise PreconditionError("graph comparison is implemented for circles in T^2")
    sigma = (np.arange(n) / n)[:, None]
    L = series.embedding(sigma, eps)
    x_target = L[:, :1]
    t = x_target.copy()
    for _ in range(100):
        C = solution.reduced_points(t)
        step = C[:, :1] - x_target
        step = step - np.rint(step)
        t = t - step
        if np.max(np.abs(step)) <= tol:
            break
    C = solution.reduced_points(t)
    dy = L[:, 1] - C[:, 1]
    dy = dy - np.rint(dy)
    return float(np.max(np.abs(dy)))
