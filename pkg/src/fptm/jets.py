"""Truncated power series in eps with array-valued coefficients.

A jet is a numpy array whose leading axis is the eps order 0..J.  These
helpers mechanize the order-by-order expansion of conjugation identities:
products, powers, and Taylor composition f(x0 + delta) where delta is a
jet with vanishing constant term.
"""

import itertools
import math

import numpy as np


def jmul(a, b):
    """Cauchy product of two jets truncated at the common order."""
    J = min(a.shape[0], b.shape[0]) - 1
    out = np.zeros((J + 1,) + np.broadcast_shapes(a.shape[1:], b.shape[1:]), dtype=np.result_type(a, b))
    for n in range(J + 1):
        for i in range(n + 1):
            out[n] += a[i] * b[n - i]
    return out


def jshift(a, k=1):
    """Multiply a jet by eps^k (drops terms beyond the order)."""
    out = np.zeros_like(a)
    if k < a.shape[0]:
        out[k:] = a[:a.shape[0] - k]
    return out


def jpowers(a, kmax):
    """[a^0, a^1, ..., a^kmax] as jets."""
    one = np.zeros_like(a)
    one[0] = 1.0
    out = [one]
    for _ in range(kmax):
        out.append(jmul(out[-1], a))
    return out


def multi_indices(d, J):
    """All multi-indices mu in N^d with 1 <= |mu| <= J."""
    for total in range(1, J + 1):
        for mu in itertools.product(range(total + 1), repeat=d):
            if sum(mu) == total:
                yield mu


def taylor_scalar_delta(values_at, delta):
    """sum_k values_at(k) delta^k / k! for a scalar delta jet of shape (J+1, P).

    ``values_at(k)`` returns the k-th directional derivative at the base
    points with shape (s, P).  Result has shape (J+1, s, P).
    """
    J = delta.shape[0] - 1
    pw = jpowers(delta, J)
    base = values_at(0)
    out = np.zeros((J + 1,) + base.shape)
    out[0] = base
    for k in range(1, J + 1):
        if not np.any(pw[k]):
            continue
        out += pw[k][:, None, :] * (values_at(k) / math.factorial(k))[None]
    return out


def taylor_vector_delta(values_at, delta):
    """sum_mu values_at(mu) delta^mu / mu! for a vector jet delta (d, J+1, P)."""
    d, J1 = delta.shape[0], delta.shape[1]
    J = J1 - 1
    pw = [jpowers(delta[i], J) for i in range(d)]
    base = values_at((0,) * d)
    out = np.zeros((J + 1,) + base.shape)
    out[0] = base
    for mu in multi_indices(d, J):
        mono = pw[0][mu[0]]
        for i in range(1, d):
            mono = jmul(mono, pw[i][mu[i]])
        if not np.any(mono):
            continue
        fact = math.prod(math.factorial(m) for m in mu)
        out += mono[:, None, :] * (values_at(mu) / fact)[None]
    return out
