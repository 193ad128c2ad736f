"""Resonances of frequency vectors and the reduction to an intrinsic frequency.

All lattice algebra runs on Python integers so that the unimodular matrix
has determinant exactly +1.
"""

import ast
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import (ConfigError, NonSaturatedModule, PreconditionError,
                     ResidualResonance, ZeroDivisor)

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
DETECT_KMAX = 32
DETECT_TOL = 1e-9


_NAMES = {"golden": GOLDEN, "phi": GOLDEN, "golden_mean": GOLDEN}
_BINOPS = {ast.Add: lambda a, b: a + b, ast.Sub: lambda a, b: a - b,
           ast.Mult: lambda a, b: a * b, ast.Div: lambda a, b: a / b}


def _eval_node(node):
    if isinstance(node, ast.Expression):
        return _eval_node(node.body)
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
        return float(node.value)
    if isinstance(node, ast.Name) and node.id in _NAMES:
        return _NAMES[node.id]
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        v = _eval_node(node.operand)
        return -v if isinstance(node.op, ast.USub) else v
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        a, b = _eval_node(node.left), _eval_node(node.right)
        if isinstance(node.op, ast.Div) and b == 0:
            raise ConfigError("zero denominator")
        return _BINOPS[type(node.op)](a, b)
    if (isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id == "sqrt"
            and len(node.args) == 1 and not node.keywords):
        v = _eval_node(node.args[0])
        if v < 0:
            raise ConfigError("sqrt of a negative number")
        return math.sqrt(v)
    raise ValueError("unsupported expression")


def parse_frequency(expr):
    """Evaluate an expression built from numbers, 'golden', sqrt(.) and + - * /."""
    if isinstance(expr, (int, float)):
        return float(expr)
    try:
        val = _eval_node(ast.parse(str(expr).strip(), mode="eval"))
    except ConfigError as exc:
        raise ConfigError(f"{exc} in {expr!r}") from None
    except (SyntaxError, ValueError):
        raise ConfigError(f"cannot parse frequency expression {expr!r}") from None
    if not math.isfinite(val):
        raise ConfigError(f"non-finite frequency {expr!r}")
    return val


def parse_frequency_vector(text):
    if isinstance(text, str):
        parts = [p for p in text.split(",") if p.strip()]
    else:
        parts = list(text)
    if not parts:
        raise ConfigError("empty frequency vector")
    return np.array([parse_frequency(p) for p in parts])


# ---------------------------------------------------------------------------
# exact integer lattice routines


def _ext_gcd(a, b):
    """Return (g, x, y) with x*a + y*b = g = gcd(a, b) >= 0."""
    x0, y0, x1, y1 = 1, 0, 0, 1
    while b:
        q, a, b = a // b, b, a % b
        x0, x1 = x1, x0 - q * x1
        y0, y1 = y1, y0 - q * y1
    if a < 0:
        a, x0, y0 = -a, -x0, -y0
    return a, x0, y0


def hermite_normal_form(M, with_transform=False):
    """Row-style Hermite normal form of an integer matrix.

    Returns the nonzero rows H (pivots positive, entries above a pivot reduced
    into [0, pivot)).  With ``with_transform`` also returns the full
    unimodular U with U @ M = [H; 0].
    """
    A = [[int(v) for v in row] for row in M]
    m = len(A)
    n = len(A[0]) if m else 0
    U = [[int(i == j) for j in range(m)] for i in range(m)]
    r = 0
    for c in range(n):
        if r == m:
            break
        for i in range(r + 1, m):
            if A[i][c] == 0:
                continue
            a, b = A[r][c], A[i][c]
            g, x, y = _ext_gcd(a, b)
            p, q = -b // g, a // g
            for T in (A, U):
                Rr, Ri = T[r], T[i]
                T[r] = [x * u + y * v for u, v in zip(Rr, Ri)]
                T[i] = [p * u + q * v for u, v in zip(Rr, Ri)]
        if A[r][c] == 0:
            continue
        if A[r][c] < 0:
            A[r] = [-v for v in A[r]]
            U[r] = [-v for v in U[r]]
        piv = A[r][c]
        for i in range(r):
            q = A[i][c] // piv
            if q:
                A[i] = [u - q * v for u, v in zip(A[i], A[r])]
                U[i] = [u - q * v for u, v in zip(U[i], U[r])]
        r += 1
    H = [row for row in A[:r]]
    return (H, U) if with_transform else H


def smith_diagonal(M):
    """Elementary divisors (Smith normal form diagonal) of an integer matrix."""
    A = [[int(v) for v in row] for row in M]
    m = len(A)
    n = len(A[0]) if m else 0
    diag = []
    for t in range(min(m, n)):
        nz = [(abs(A[i][j]), i, j) for i in range(t, m) for j in range(t, n) if A[i][j]]
        if not nz:
            break
        _, i, j = min(nz)
        A[t], A[i] = A[i], A[t]
        for row in A:
            row[t], row[j] = row[j], row[t]
        while True:
            p = A[t][t]
            for i in range(t + 1, m):
                q = A[i][t] // p
                if q:
                    A[i] = [u - q * v for u, v in zip(A[i], A[t])]
            for j in range(t + 1, n):
                q = A[t][j] // p
                if q:
                    for row in A:
                        row[j] -= q * row[t]
            rest = [(abs(A[i][t]), i, t) for i in range(t + 1, m) if A[i][t]]
            rest += [(abs(A[t][j]), t, j) for j in range(t + 1, n) if A[t][j]]
            if rest:
                _, i, j = min(rest)
                if j == t:
                    A[t], A[i] = A[i], A[t]
                else:
                    for row in A:
                        row[t], row[j] = row[j], row[t]
                continue
            bad = [(i, j) for i in range(t + 1, m) for j in range(t + 1, n) if A[i][j] % p]
            if bad:
                i, _ = bad[0]
                A[t] = [u + v for u, v in zip(A[t], A[i])]
                continue
            break
        diag.append(abs(A[t][t]))
    return diag


def _int_det(M):
    A = [[Fraction(v) for v in row] for row in M]
    n = len(A)
    det = Fraction(1)
    for c in range(n):
        piv = next((i for i in range(c, n) if A[i][c] != 0), None)
        if piv is None:
            return 0
        if piv != c:
            A[c], A[piv] = A[piv], A[c]
            det = -det
        det *= A[c][c]
        for i in range(c + 1, n):
            f = A[i][c] / A[c][c]
            if f:
                A[i] = [u - f * v for u, v in zip(A[i], A[c])]
    return int(det)


def _int_inverse(M):
    n = len(M)
    A = [[Fraction(v) for v in row] + [Fraction(int(i == j)) for j in range(n)] for i, row in enumerate(M)]
    for c in range(n):
        piv = next(i for i in range(c, n) if A[i][c] != 0)
        A[c], A[piv] = A[piv], A[c]
        pv = A[c][c]
        A[c] = [v / pv for v in A[c]]
        for i in range(n):
            if i != c and A[i][c] != 0:
                f = A[i][c]
                A[i] = [u - f * v for u, v in zip(A[i], A[c])]
    inv = [[A[i][n + j] for j in range(n)] for i in range(n)]
    if any(v.denominator != 1 for row in inv for v in row):
        raise ValueError("matrix is not unimodular")
    return [[int(v) for v in row] for row in inv]


# ---------------------------------------------------------------------------
# resonances


@dataclass(frozen=True)
class ResonanceRelation:
    k: tuple
    n: int


@dataclass
class ResonanceData:
    relations: list
    basis: np.ndarray          # (d-r, d) integer
    A_matrix: np.ndarray       # (d, d) integer, det +1
    omega: np.ndarray          # (r,)
    L: np.ndarray              # (d,) integer
    r: int
    Omega: np.ndarray = field(default=None)

    @property
    def dim(self):
        return self.A_matrix.shape[0]

    @property
    def reduced_frequency(self):
        """(omega, 0) padded to dimension d."""
        return np.concatenate([self.omega, np.zeros(self.dim - self.r)])

    def to_dict(self):
        return {
            "relations": [{"k": list(map(int, rel.k)), "n": int(rel.n)} for rel in self.relations],
            "basis": self.basis.astype(int).tolist(),
            "A_matrix": self.A_matrix.astype(int).tolist(),
            "omega": [float(v) for v in self.omega],
            "L": [int(v) for v in self.L],
            "r": int(self.r),
            "Omega": None if self.Omega is None else [float(v) for v in self.Omega],
        }

    @classmethod
    def from_dict(cls, data):
        return cls(
            relations=[ResonanceRelation(tuple(d["k"]), int(d["n"])) for d in data["relations"]],
            basis=np.array(data["basis"], dtype=np.int64).reshape(-1, len(data["A_matrix"])),
            A_matrix=np.array(data["A_matrix"], dtype=np.int64),
            omega=np.array(data["omega"], dtype=float),
            L=np.array(data["L"], dtype=np.int64),
            r=int(data["r"]),
            Omega=None if data.get("Omega") is None else np.array(data["Omega"], dtype=float),
        )


def _box_vectors(d, k_max, first):
    """Integer vectors with first coordinate ``first`` and |k|_inf <= k_max."""
    if d == 1:
        return np.array([[first]], dtype=np.int64)
    rng = np.arange(-k_max, k_max + 1)
    rest = np.stack(np.meshgrid(*([rng] * (d - 1)), indexing="ij"), axis=-1).reshape(-1, d - 1)
    return np.concatenate([np.full((rest.shape[0], 1), first), rest], axis=1)


def _search_chunks(d, k_max):
    """Half-space of the box 0 < |k|_inf <= k_max, in chunks."""
    if d == 1:
        yield np.arange(1, k_max + 1, dtype=np.int64)[:, None]
        return
    for first in range(0, k_max + 1):
        V = _half_space(_box_vectors(d, k_max, first))
        if V.size:
            yield V


def _half_space(vectors):
    # keep vectors whose first nonzero entry is positive
    nz = vectors != 0
    first = np.argmax(nz, axis=1)
    lead = vectors[np.arange(len(vectors)), first]
    return vectors[(lead > 0) & nz.any(axis=1)]


def detect_resonances(Omega, k_max=DETECT_KMAX, tol=DETECT_TOL):
    """Lattice basis of the resonances k.Omega in Z with |k|_inf <= k_max."""
    if k_max < 1 or tol <= 0:
        raise PreconditionError("need k_max >= 1 and tol > 0")
    Om = np.atleast_1d(np.asarray(Omega, dtype=float))
    d = Om.size
    found = []
    for V in _search_chunks(d, k_max):
        v = V @ Om
        hit = np.abs(v - np.rint(v)) <= tol
        if np.any(hit):
            found.append(V[hit])
    if not found:
        return []
    K = np.concatenate(found)
    H = hermite_normal_form(K.tolist())
    return [ResonanceRelation(tuple(int(x) for x in row), int(round(float(np.dot(row, Om)))))
            for row in H]


def intrinsic_decomposition(Omega, relations, k_max=DETECT_KMAX, tol=DETECT_TOL):
    """Unimodular A with A.Omega = (omega, 0) + L and resonance rows last."""
    Om = np.atleast_1d(np.asarray(Omega, dtype=float))
    d = Om.size
    if not relations:
        raise PreconditionError("no resonance relations: decomposition undefined")
    basis = hermite_normal_form([list(rel.k) for rel in relations])
    divisors = smith_diagonal(basis)
    if any(v != 1 for v in divisors):
        raise NonSaturatedModule(f"elementary divisors {divisors}: lattice not saturated")
    dr = len(basis)
    r = d - dr
    BT = [[basis[i][j] for i in range(dr)] for j in range(d)]
    _, U = hermite_normal_form(BT, with_transform=True)
    Uinv = _int_inverse(U)
    W = [[Uinv[j][i] for j in range(d)] for i in range(d)]   # (U^{-1})^T
    A = [list(row) for row in W[dr:]] + [list(row) for row in basis]
    det = _int_det(A)
    if abs(det) != 1:
        raise NonSaturatedModule(f"completion has determinant {det}")
    if det < 0:
        if r >= 2:
            A[0], A[1] = A[1], A[0]
        else:
            A[0] = [-v for v in A[0]]
    A = np.array(A, dtype=np.int64)
    v = A.astype(float) @ Om
    L = np.zeros(d, dtype=np.int64)
    L[r:] = np.rint(v[r:]).astype(np.int64)
    if np.any(np.abs(v[r:] - L[r:]) > 10 * tol):
        raise PreconditionError("relations are not resonances of Omega within tolerance")
    omega = v[:r].copy()
    if r > 0 and detect_resonances(omega, k_max, tol):
        raise ResidualResonance(f"intrinsic frequency {omega.tolist()} is resonant")
    rels = [ResonanceRelation(tuple(int(x) for x in row), int(L_i))
            for row, L_i in zip(basis, L[r:])]
    return ResonanceData(relations=rels, basis=np.array(basis, dtype=np.int64).reshape(dr, d),
                         A_matrix=A, omega=omega, L=L, r=r, Omega=Om.copy())


def resonance_data(Omega, k_max=DETECT_KMAX, tol=DETECT_TOL):
    """Detect and decompose in one call; None when numerically non-resonant."""
    rels = detect_resonances(Omega, k_max, tol)
    if not rels:
        return None
    return intrinsic_decomposition(Omega, rels, k_max, tol)


# ---------------------------------------------------------------------------
# Diophantine constants


@dataclass
class DiophantineEstimate:
    tau: float
    nu: float
    k_max: int
    k_argmin: tuple


def default_dioph_kmax(dim):
    return 10_000 if dim <= 2 else 1_000


def diophantine_estimate(omega, tau, k_max=None):
    """Exact minimum of |k.omega - n| |k|_inf^tau over 0 < |k|_inf <= k_max."""
    om = np.atleast_1d(np.asarray(omega, dtype=float))
    d = om.size
    if k_max is None:
        k_max = default_dioph_kmax(d)
    if k_max < 1 or tau <= 0:
        raise PreconditionError("need k_max >= 1 and tau > 0")
    best, arg = np.inf, None
    zero_tol = 2 * np.finfo(float).eps
    for V in _search_chunks(d, k_max):
        v = V @ om
        dist = np.abs(v - np.rint(v))
        if np.any(dist <= zero_tol * np.maximum(1.0, np.abs(v))):
            i = int(np.argmax(dist <= zero_tol * np.maximum(1.0, np.abs(v))))
            raise ZeroDivisor(f"k={V[i].tolist()} gives an integer k.omega")
        weight = np.abs(V).max(axis=1).astype(float) ** tau
        score = dist * weight
        i = int(np.argmin(score))
        if score[i] < best:
            best, arg = float(score[i]), tuple(int(x) for x in V[i])
    return DiophantineEstimate(tau=float(tau), nu=best, k_max=int(k_max), k_argmin=arg)
