import json
import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

import oracles as O
from modalstab.models import NonlinearitySpec
from modalstab.spectral import Basis, SpectralField
from modalstab.thresholds import (
    Condition,
    bbmb_conditions,
    bbmb_thresholds,
    count_eigenvalues_below,
    fixed_point,
    kdvb_thresholds,
    ndwave_frontier,
    ndwave_thresholds,
    nsv_thresholds,
    sdwave_thresholds,
)

SINE = Basis("SineDirichlet1D", 1.0, 64)
PER = Basis("PeriodicZeroMean1D", 1.0, 64)
TWO = Basis("PeriodicZeroMean2DVector", 1.0, 16)
IDENTITY = NonlinearitySpec("Identity")


def inf_if_none(n):
    return math.inf if n is None else n


# ----------------------------------------------------------------------------
# NSV


def test_nsv_constants_unit_viscosity():
    r = nsv_thresholds(1.0, 1.0, 0.5, SINE)
    assert r.constants["C1"] == 0.84375
    assert r.constants["kappa"] == pytest.approx(0.25, rel=1e-15)
    assert r.constants["k0"] == pytest.approx(1 + 1 / math.pi**2, rel=1e-15)
    assert r.constants["k0"] == pytest.approx(1.10132, abs=1e-5)


def test_nsv_zero_forcing():
    r = nsv_thresholds(0.3, 0.5, 0.0, TWO)
    assert r.constants["r0"] == 0 and r.mu_min == 0 and r.N_min == 1
    assert r.certified


def test_nsv_reports_3d_scope():
    assert any("3D" in n for n in nsv_thresholds(1.0, 1.0, 0.1, TWO).notes)


# ----------------------------------------------------------------------------
# BBMB


def test_bbmb_rate_and_kappa1():
    r = bbmb_thresholds(IDENTITY, 0.1, SINE)
    assert r.constants["kappa1"] == 1.0 and r.guaranteed_rate == 0.25


def test_bbmb_zero_nonlinearity():
    r = bbmb_thresholds(NonlinearitySpec("Zero"), 0.3, SINE)
    assert r.constants["D1"] == 0 and r.constants["D2"] == 0
    assert r.mu_min == 0 and r.N_min == 1


def test_bbmb_identity_unit_radii():
    r = bbmb_conditions(IDENTITY, 1.0, 1.0, SINE)
    assert r.constants["D1"] == 1.0 and r.constants["D2"] == 1.0
    assert r.condition("gain").rhs == 1.5
    assert r.N_min == 1


def test_bbmb_identity_forcing_matches_oracle():
    r = bbmb_thresholds(IDENTITY, 0.1, SINE)
    o = O.bbmb((0, 1), 0.1, 1.0, "SineDirichlet1D", 1.0, SINE.n_modes)
    assert O.rel_err(r.mu_min, o["mu_min"]) < 1e-12
    for k in ("R1", "R2", "D1", "D2", "a0"):
        assert O.rel_err(r.constants[k], o[k]) < 1e-12
    assert r.N_min == o["N_min"]
    assert r.certified


def test_bbmb_divergent_fixed_point_is_not_certifiable():
    r = bbmb_thresholds(NonlinearitySpec("Polynomial", (0, 0, 0, 1)), 1.0, SINE)
    assert not r.fixed_point["converged"] and r.mu_min == math.inf and not r.certified


@pytest.mark.parametrize("coeffs, h", [((0, 1), 0.1), ((0, 1), 1.0), ((0, 0.5, 0.5), 0.2)])
def test_bbmb_fixed_point_start_independent(coeffs, h):
    f = NonlinearitySpec("Polynomial", coeffs)
    vals = [bbmb_thresholds(f, h, SINE, r1_form="sharp", mu0=m0).mu_min for m0 in (0.0, 1.0, 100.0)]
    assert all(math.isfinite(v) for v in vals)
    assert max(vals) - min(vals) <= 1e-8 * max(vals)


# ----------------------------------------------------------------------------
# KdVB


def test_kdvb_zero_forcing_chain():
    r = kdvb_thresholds(0.0, PER, beta=1.0)
    lam1 = 4 * math.pi**2
    assert r.constants["rho1"] == 0
    assert r.constants["rho2"] == pytest.approx((lam1 / 3) ** 4 + 1, rel=1e-14)
    assert r.constants["rho2"] == pytest.approx(29989.4437, rel=1e-9)
    for k in ("rho2", "M0", "beta1"):
        assert 0 < r.constants[k] < math.inf


def test_kdvb_generic_chain_matches_oracle():
    r = kdvb_thresholds(0.1, PER, beta=1.0, mu=10.0, N=4)
    o = O.kdvb(0.1, 1.0, 1.0, PER.n_modes, mu=10.0)
    for k in ("rho1", "rho2", "M0", "M1", "M2", "M3", "beta1"):
        assert O.rel_err(r.constants[k], o[k]) < 1e-12


def test_kdvb_small_beta_converges_and_start_independent():
    vals = [kdvb_thresholds(0.1, PER, beta=1e-3, mu0=m0) for m0 in (0.0, 1.0, 100.0)]
    assert all(v.fixed_point["converged"] for v in vals)
    mus = [v.mu_min for v in vals]
    assert max(mus) - min(mus) <= 1e-8 * max(mus)


def test_kdvb_unit_beta_has_no_fixed_point():
    r = kdvb_thresholds(0.0, PER, beta=1.0)
    assert not r.certified and r.mu_min == math.inf
    assert r.fixed_point["trace"]


# ----------------------------------------------------------------------------
# SDWave


def test_sdwave_gain_threshold():
    r = sdwave_thresholds(2.0, 1.0, 1.0, 1.0, 2, SINE)
    assert r.mu_min == 4.0
    assert r.guaranteed_rate == 1.0


def test_sdwave_zero_data():
    r = sdwave_thresholds(1.0, 1.0, 0.0, 1.0, 4, SINE, SpectralField.zeros(SINE), SpectralField.zeros(SINE))
    assert r.constants["E0"] == 0.0


def test_sdwave_gap_admits_zero_modes():
    r = sdwave_thresholds(2.0, 1.0, 1.0, 1.0, 2, SINE)
    assert r.N_min == 0


def test_sdwave_E0_matches_oracle():
    rng = np.random.default_rng(1)
    c0 = rng.standard_normal(5) * 0.3 / np.arange(1, 6) ** 2
    c1 = rng.standard_normal(5) * 0.2
    b = Basis("SineDirichlet1D", 1.0, 16)
    u0, u1 = SpectralField(b, np.r_[c0, np.zeros(11)]), SpectralField(b, np.r_[c1, np.zeros(11)])
    r = sdwave_thresholds(1.5, 0.8, 0.5, 1.0, 4, b, u0, u1, mu=3.0, N=2)
    o = O.sdwave(1.5, 0.8, 0.5, 1.0, 16, c0, c1, 4, 3.0, 2)
    assert O.rel_err(r.constants["E0"], o["E0"]) < 1e-12


# ----------------------------------------------------------------------------
# NDWave


def test_ndwave_unit():
    assert ndwave_thresholds(1.0, 1.0, SINE).N_min == 0


def test_ndwave_gain_below_m0_not_certified():
    r = ndwave_thresholds(2.0, 1.0, SINE)
    assert not r.certified and not r.condition("gain").satisfied


def test_ndwave_five():
    r = ndwave_thresholds(5.0, 5.0, SINE)
    assert r.N_min == 2 and r.certified
    assert r.rate_form == "t^-1/2"


def test_ndwave_frontier_nondecreasing():
    fr = ndwave_frontier(1.0, np.linspace(0.5, 200, 40), SINE)
    assert all(a <= b for a, b in zip(fr, fr[1:]))


# ----------------------------------------------------------------------------
# shared machinery


def test_eigenvalue_counting_matches_enumeration():
    """The count covers the whole spectrum, beyond the resolved modes."""
    lam = [float(x) for x in O.eigenvalues("PeriodicZeroMean2DVector", 1.0, 1500)]
    for thr in (1.0, 40.0, 4 * math.pi**2, 80.0, 200.0, 1000.0, 5000.0, 4 * math.pi**2 * 25):
        for strict in (False, True):
            n = count_eigenvalues_below(TWO, thr, strict=strict)
            ref = sum(1 for x in lam if (x < thr if strict else x <= thr))
            assert n == ref


def test_fixed_point_contraction_and_divergence():
    fp = fixed_point(lambda x: 0.5 * x + 1.0, 0.0)
    assert fp.converged and fp.value == pytest.approx(2.0, rel=1e-15)
    div = fixed_point(lambda x: 2 * x + 1.0, 0.0)
    assert not div.converged and div.value == math.inf


def test_condition_relations():
    assert Condition("a", 1.0, "<=", 1.0).satisfied
    assert not Condition("a", 1.0, "<", 1.0).satisfied
    assert Condition("a", 1.0 + 1e-14, "<=", 1.0).satisfied


def test_report_json_roundtrip():
    r = kdvb_thresholds(0.0, PER, beta=1.0)
    doc = json.loads(r.to_json())
    assert doc["mu_min"] == "inf" and doc["certified"] is False
    assert doc["model_kind"] == "KdVB"


# ----------------------------------------------------------------------------
# monotonicity properties


@given(h1=st.floats(0, 2), h2=st.floats(0, 2), b1=st.floats(0.5, 4), b2=st.floats(0.5, 4))
def test_nsv_monotone(h1, h2, b1, b2):
    lo = nsv_thresholds(0.5, 0.4, min(h1, h2), TWO, b0=min(b1, b2))
    hi = nsv_thresholds(0.5, 0.4, max(h1, h2), TWO, b0=max(b1, b2))
    assert lo.mu_min <= hi.mu_min
    assert inf_if_none(lo.N_min) <= inf_if_none(hi.N_min)


@given(h1=st.floats(0, 1), h2=st.floats(0, 1), c1=st.floats(0.2, 2), c2=st.floats(0.2, 2))
def test_bbmb_monotone(h1, h2, c1, c2):
    lo = bbmb_thresholds(IDENTITY, min(h1, h2), SINE, sobolev_const=min(c1, c2), r1_form="sharp")
    hi = bbmb_thresholds(IDENTITY, max(h1, h2), SINE, sobolev_const=max(c1, c2), r1_form="sharp")
    assume(math.isfinite(hi.mu_min) or not math.isfinite(lo.mu_min) or True)
    assert lo.mu_min <= hi.mu_min * (1 + 1e-12)
    assert inf_if_none(lo.N_min) <= inf_if_none(hi.N_min)


@given(h1=st.floats(0, 3), h2=st.floats(0, 3), e1=st.floats(-4, 0), e2=st.floats(-4, 0))
def test_kdvb_monotone(h1, h2, e1, e2):
    lo = kdvb_thresholds(min(h1, h2), PER, beta=10 ** min(e1, e2))
    hi = kdvb_thresholds(max(h1, h2), PER, beta=10 ** max(e1, e2))
    assert lo.mu_min <= hi.mu_min * (1 + 1e-12)
    assert inf_if_none(lo.N_min) <= inf_if_none(hi.N_min)
