import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fptm.dynamics import MapFamily
from fptm.errors import AllOrdersFlat
from fptm.fourier import TrigSeries
from fptm.frequency import GOLDEN, resonance_data
from fptm.models import generic_locking_family, locking_family
from fptm.normalform import averaging_order, delta_model, resonant_normal_form
from oracles import cohomology_modes

RES = resonance_data(np.array([GOLDEN, 1.0]))


def eta_closed_form(a, d2):
    return TrigSeries.from_modes(1, {(0,): a, (1,): d2 / 2j})


def test_first_order_average_and_h0():
    F = locking_family(0.3, 0.1, 0.5)
    h0, avg = averaging_order(F, RES, 0)
    ref = TrigSeries.from_modes(2, {(0, 0): 0.3, (0, 1): 0.5 / 2j})
    assert np.max(np.abs((avg - ref).coeffs)) <= 1e-12
    # h0 - h0 o T = -(delta1 sin(2 pi x)); compare the (1, 0) mode with the divisor formula
    q = {(1, 0): -0.1 / 2j}
    ref_h = cohomology_modes(q, [GOLDEN, 1.0])[(1, 0)]
    K = h0.band
    assert h0.coeffs[0, K + 1, K] == pytest.approx(ref_h, abs=1e-14)
    others = h0.coeffs.copy()
    others[0, K + 1, K] = others[0, K - 1, K] = 0
    assert np.max(np.abs(others)) <= 1e-14


def test_zero_map_is_flat():
    F = MapFamily("foliation", np.array([GOLDEN, 1.0]), 1.0, 0.02, [TrigSeries.zeros(2)])
    h0, avg = averaging_order(F, RES, 0)
    assert np.all(h0.coeffs == 0) and np.all(avg.coeffs == 0)
    with pytest.raises(AllOrdersFlat):
        resonant_normal_form(F, RES, N=2)


def test_locking_normal_form_closed_form():
    nf = resonant_normal_form(locking_family(0.3, 0.1, 0.5), RES, N=1)
    assert nf.n == 1 and nf.m == 1
    eta = eta_closed_form(0.3, 0.5)
    assert np.max(np.abs((nf.eta - eta).coeffs)) <= 1e-10
    assert np.max(np.abs((nf.beta - eta * GOLDEN).coeffs)) <= 1e-10


def test_generic_kind_averages():
    """Generic kind: eta is the y-average, beta the x-average including the drift."""
    F = generic_locking_family(0.3, 0.1, 0.5, drift=0.2, drift_y=0.1)
    nf = resonant_normal_form(F, RES, N=1)
    eta = eta_closed_form(0.3, 0.5)
    beta = eta * GOLDEN + TrigSeries.from_modes(1, {(0,): 0.2, (1,): 0.05})
    assert np.max(np.abs((nf.eta - eta).coeffs)) <= 1e-10
    assert np.max(np.abs((nf.beta - beta).coeffs)) <= 1e-10


@pytest.mark.parametrize("N", [1, 2, 3])
def test_defect_order(N):
    F = locking_family(0.3, 0.1, 0.5)
    nf = resonant_normal_form(F, RES, N=N, band=16)
    ratio = nf.defect(0.04) / nf.defect(0.02)
    target = 2.0 ** (nf.n + nf.m)
    assert 0.75 * target <= ratio <= 1.25 * target


def test_delta_model_zero_offset_and_eps_zero():
    F = locking_family(0.3, 0.1, 0.5, eps=0.05)
    dm = delta_model(F, RES, probe_offsets=(0.0,))
    assert dm.norms == [0.0]
    F0 = locking_family(0.3, 0.1, 0.5, eps=0.0)
    nf0 = resonant_normal_form(locking_family(0.3, 0.1, 0.5, eps=0.05), RES, N=1)
    dm0 = delta_model(F0, RES, nf=nf0, probe_offsets=(1e-3, -1e-4))
    # H = Id at eps = 0, so the difference is exactly offset * Omega (sup over components)
    assert dm0.slope == pytest.approx(1.0, abs=1e-12)


def test_delta_model_slope_below_bound():
    F = locking_family(0.3, 0.1, 0.5, eps=0.05)
    dm = delta_model(F, RES, probe_offsets=(1e-3, -1e-3, 1e-4, -1e-4))
    assert dm.slope <= dm.bound


def test_summary_is_serializable():
    import json
    nf = resonant_normal_form(locking_family(), RES, N=1)
    json.dumps(nf.summary())


@settings(max_examples=10)
@given(st.floats(-0.45, 0.45), st.floats(-0.2, 0.2), st.floats(0.1, 0.6))
def test_foliation_structure(a, d1, d2):
    nf = resonant_normal_form(locking_family(a, d1, d2), RES, N=1, eps_probe=0.0)
    # beta and eta are parallel to (omega, 1) with a common scalar factor
    assert np.max(np.abs((nf.beta - nf.eta * GOLDEN).coeffs)) <= 1e-10
    assert np.max(np.abs((nf.eta - eta_closed_form(a, d2)).coeffs)) <= 1e-10
    # h jets: zero average, no resonant modes
    for h in nf.h_jets:
        non, res = h.split_resonant(1)
        assert np.max(np.abs(res.coeffs)) <= 1e-14
    # beta / eta live on the resonant subtorus (one variable)
    assert nf.eta.dim == 1 and nf.beta.dim == 1


@settings(max_examples=5)
@given(st.floats(0.05, 0.4), st.floats(0.2, 0.6))
def test_order_two_averages_are_resonant_only(a, d2):
    nf = resonant_normal_form(locking_family(a, 0.1, d2), RES, N=2, eps_probe=0.0)
    for D in nf.avg_jets:
        non, _ = D.split_resonant(1)
        assert np.max(np.abs(non.coeffs)) <= 1e-14
    assert math.isfinite(nf.defect(0.02))
