import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fptm.dynamics import (MapFamily, compose_fptm, invert_fptm, lyapunov, periodicity_probe,
                           rotation_number, torus_distance)
from fptm.errors import NonMonotone, NotInvertible
from fptm.fourier import TrigSeries, grid_points
from fptm.frequency import GOLDEN
from fptm.models import generic_locking_family, locking_family
from oracles import locking_map, rigid_rotation_average

OM = np.array([GOLDEN, 1.0])


def T(f, X, Om=OM):
    return X + f(X)[:, :1] * Om


def test_compose_constants():
    c = compose_fptm(TrigSeries.constant(0.2, 2), TrigSeries.constant(0.3, 2), OM)
    assert c(np.array([[0.1, 0.4]]))[0, 0] == pytest.approx(0.5)
    z = compose_fptm(TrigSeries.zeros(2), TrigSeries.zeros(2), OM)
    assert np.all(np.abs(z.coeffs) < 1e-15)


def test_compose_pointwise():
    f = TrigSeries.from_modes(2, {(1, 0): 0.1 / 2j})
    g = TrigSeries.from_modes(2, {(1, 0): 0.1})
    h = compose_fptm(f, g, OM, band=16)
    X = grid_points(2, 32)
    assert np.max(np.abs(T(h, X) - T(f, T(g, X)))) <= 1e-10


def test_invert_constant_and_round_trip():
    g = invert_fptm(TrigSeries.constant(0.2, 2), OM)
    assert g(np.array([[0.3, 0.1]]))[0, 0] == pytest.approx(-0.2)
    f = TrigSeries.from_modes(2, {(1, 0): 0.05 / 2j})
    g = invert_fptm(f, OM, band=16)
    X = grid_points(2, 24) + 0.01
    assert np.max(np.abs(T(g, T(f, X)) - X)) <= 1e-9


def test_invert_fold():
    f = TrigSeries.from_modes(2, {(1, 0): 2.0 / 2j})
    with pytest.raises(NotInvertible):
        invert_fptm(f, OM)


def test_map_against_pointwise_formula():
    F = locking_family(0.3, 0.1, 0.5, eps=0.05, alpha=0.9)
    X = np.random.default_rng(2).random((40, 2))
    assert np.allclose(F(X), locking_map(0.3, 0.1, 0.5, 0.05, 0.9, GOLDEN, X), atol=1e-14)


def test_serialization_round_trip():
    F = generic_locking_family()
    G = MapFamily.from_dict(F.to_dict())
    X = np.random.default_rng(0).random((5, 2))
    assert np.array_equal(F(X), G(X))


def test_lyapunov_rigid_rotation():
    F = locking_family(0.0, 0.0, 0.0, eps=0.0)
    d = lyapunov(F, [0.1, 0.2], horizon=500)
    assert max(abs(v) for v in d.qr_exponents) <= 1e-12
    assert abs(d.lyapunov_along_Omega) <= 1e-12


def test_lyapunov_constant_f():
    F = locking_family(0.4, 0.0, 0.0, eps=0.1)
    d = lyapunov(F, [0.1, 0.2], horizon=500)
    assert max(abs(v) for v in d.qr_exponents) <= 1e-12


def test_lyapunov_near_repelling_circle():
    """A backward orbit stays near the repelling circle, where the exponent
    along Omega exceeds log(1 + lambda pi eps / 4)."""
    eps, lam = 0.02, 0.4
    F = locking_family(eps=eps)
    y = 1 + math.asin(-0.6) / (2 * math.pi)
    d = lyapunov(F, [0.1, y], horizon=4000, backward=True)
    assert d.lyapunov_along_Omega >= math.log(1 + lam * math.pi * eps / 4) - 1e-3
    assert abs(d.transverse_exponents[0]) < 1e-2


def test_rotation_rigid():
    r = rotation_number(lambda x: x + GOLDEN, horizon=4096)
    assert abs(r.value - GOLDEN) <= 1e-10
    assert abs(rotation_number(lambda x: x, horizon=512).value) == 0.0
    assert rigid_rotation_average(GOLDEN, 1000) == pytest.approx(GOLDEN, abs=1e-12)


def test_rotation_non_monotone():
    p = TrigSeries.from_modes(1, {(0,): 0.3, (1,): 0.5 / 2j})
    with pytest.raises(NonMonotone):
        rotation_number(p, horizon=64)


def test_periodicity_probe_examples():
    F = locking_family(0.0, 0.0, 0.0, eps=0.0, alpha=1.0, omega=np.sqrt(2) - 1)
    assert periodicity_probe(F, 4, 1000) > 0
    G = locking_family(0.8, 0.1, 0.5, eps=0.1)
    assert periodicity_probe(G, 4, 200) > 0
    # g vanishes at (0, 1/2) when a = 0 and delta1 = 0; with alpha = 0 that point is fixed
    H = locking_family(0.0, 0.0, 0.5, eps=0.1, alpha=0.0)
    fx = H(np.array([[0.0, 0.5]]))
    assert torus_distance(fx, np.array([[0.0, 0.5]]))[0] < 1e-15


@settings(max_examples=10)
@given(st.floats(-0.03, 0.03), st.floats(-0.03, 0.03), st.integers(0, 1000))
def test_group_law_round_trip(a1, a2, seed):
    f = TrigSeries.from_modes(2, {(1, 0): a1 / 2j, (0, 1): a2 / 2, (0, 0): 0.1})
    g = TrigSeries.from_modes(2, {(1, 1): a2 / 2j, (0, 0): -0.2})
    fg = compose_fptm(f, g, OM, band=24)
    inv = invert_fptm(fg, OM, band=24)
    X = np.random.default_rng(seed).random((30, 2))
    assert np.max(np.abs(T(inv, T(fg, X)) - X)) <= 1e-8


@given(st.floats(0, 0.1), st.floats(0.5, 1.5), st.integers(0, 1000))
def test_foliation_preserved(eps, alpha, seed):
    F = locking_family(eps=eps, alpha=alpha)
    X = np.random.default_rng(seed).random((20, 2))
    D = F(X) - X
    cross = D[:, 0] * OM[1] - D[:, 1] * OM[0]
    assert np.max(np.abs(cross)) <= 1e-12
