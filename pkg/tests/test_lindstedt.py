import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fptm.circle import GraphConfig, graph_transform
from fptm.errors import NonDegeneracyFail, PreconditionError, SolvabilityFail
from fptm.fourier import TrigSeries
from fptm.frequency import GOLDEN, resonance_data
from fptm.lindstedt import defect, graph_distance, lindstedt_expand
from fptm.models import generic_toy_family, locking_family
from fptm.normalform import resonant_normal_form
from oracles import cohomology_modes, eta_root

RES = resonance_data(np.array([GOLDEN, 1.0]))
Y_ATT = eta_root(0.3, 0.5, positive=False)


def test_first_order_jet_against_divisor_formula():
    s = lindstedt_expand(locking_family(), RES, [Y_ATT], N=1, band=12)
    ly = s.l_jets[0][1]
    K = ly.band
    # l_1 - l_1(. + omega) = -delta1 sin(2 pi sigma) (omega, 1)
    ref = cohomology_modes({(1,): -0.1 / 2j, (-1,): 0.1 / 2j}, [GOLDEN])
    assert ly.coeffs[0, K + 1] == pytest.approx(ref[(1,)], abs=1e-13)
    assert ly.coeffs[0, K + 1] == pytest.approx((0.1 / 2j) / (np.exp(2j * np.pi * GOLDEN) - 1), abs=1e-13)
    lx = s.l_jets[0][0]
    assert lx.coeffs[0, K + 1] == pytest.approx(GOLDEN * ref[(1,)], abs=1e-13)


def test_exactly_invariant_circle_gives_zero_jets():
    """a = delta1 = 0: y = 0 is invariant, so every jet vanishes."""
    s = lindstedt_expand(locking_family(0.0, 0.0, 0.5), RES, [0.0], N=3, band=8)
    for lx, ly in s.l_jets:
        assert np.max(np.abs(lx.coeffs)) <= 1e-14 and np.max(np.abs(ly.coeffs)) <= 1e-14
    assert defect(locking_family(0.0, 0.0, 0.5), s, 0.05) <= 1e-14


@pytest.mark.parametrize("N", [1, 2, 3])
def test_defect_order(N):
    F = locking_family()
    s = lindstedt_expand(F, RES, [Y_ATT], N=N, band=16)
    ratio = defect(F, s, 0.02) / defect(F, s, 0.01)
    target = 2.0 ** (N + 1)
    assert 0.75 * target <= ratio <= 1.25 * target


def test_foliation_base_dynamics_is_rigid():
    s = lindstedt_expand(locking_family(), RES, [Y_ATT], N=3, band=16)
    assert all(np.max(np.abs(u)) <= 1e-10 for u in s.u_rederived)
    assert all(np.all(u == 0) for u in s.u_consts)


def test_generic_toy_first_correction():
    F = generic_toy_family(c=0.15)
    s = lindstedt_expand(F, RES, [Y_ATT], N=2, band=16)
    assert s.u_consts[0][0] == pytest.approx(0.15, abs=1e-12)
    ratio = defect(F, s, 0.02) / defect(F, s, 0.01)
    assert 6.0 <= ratio <= 10.0


def test_distance_to_invariant_circle():
    F = locking_family()
    s = lindstedt_expand(F, RES, [Y_ATT], N=2, band=16)
    nf = resonant_normal_form(F, RES, N=2, band=16)
    vals = []
    for eps in (0.01, 0.02, 0.04):
        sol = graph_transform(nf, eps, which="negative_slope", config=GraphConfig(band=16))
        vals.append(graph_distance(s, sol, eps) / eps ** 3)
    assert max(vals) <= 1.0
    assert max(vals) / min(vals) <= 1.5


def test_misplaced_base_point():
    with pytest.raises(SolvabilityFail):
        lindstedt_expand(locking_family(), RES, [0.1], N=1)
    with pytest.raises(NonDegeneracyFail):
        lindstedt_expand(locking_family(0.5, 0.0, 0.5), RES, [0.75], N=1)
    with pytest.raises(PreconditionError):
        lindstedt_expand(locking_family(), RES, [Y_ATT], N=0)


def test_to_dict_is_json():
    s = lindstedt_expand(locking_family(), RES, [Y_ATT], N=2, band=8)
    d = json.loads(json.dumps(s.to_dict()))
    assert d["N"] == 2 and len(d["l_jets"]) == 2


@settings(max_examples=8)
@given(st.floats(-0.35, 0.35), st.floats(-0.2, 0.2), st.floats(0.4, 0.7), st.booleans())
def test_first_order_formula_property(a, d1, d2, positive):
    y0 = eta_root(a, d2, positive)
    s = lindstedt_expand(locking_family(a, d1, d2), RES, [y0], N=1, band=8)
    ly = s.l_jets[0][1]
    K = ly.band
    expect = (d1 / 2j) / (np.exp(2j * np.pi * GOLDEN) - 1)
    assert abs(ly.coeffs[0, K + 1] - expect) <= 1e-12
    # the chosen average makes the next order solvable: it is finite and real
    assert all(math.isfinite(float(v)) for v in np.ravel(s.averages_log[0]))


@pytest.mark.parametrize("j", [1, 2])
def test_average_perturbation_enters_at_next_order(j):
    """Shifting <l_j^y> by 1e-6 changes the invariance residual at order eps^(j+1)."""
    F = locking_family()
    s = lindstedt_expand(F, RES, [Y_ATT], N=3, band=16)
    sigma = (np.arange(64)[:, None] + 0.3) / 64

    def resid(series, eps):
        fam = series.family.with_params(eps=eps)
        return fam(series.embedding(sigma, eps)) - series.embedding(sigma + series.base_shift(eps), eps)

    lx, ly = s.l_jets[j - 1]
    moved = lindstedt_expand(F, RES, [Y_ATT], N=3, band=16)
    moved.l_jets[j - 1] = (lx, ly + TrigSeries.constant(1e-6, 1))
    delta = [np.max(np.abs(resid(moved, e) - resid(s, e))) for e in (0.04, 0.02)]
    assert math.log2(delta[0] / delta[1]) == pytest.approx(j + 1, abs=0.2)
