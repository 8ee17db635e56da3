import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad

from modalstab.spectral import (
    Basis,
    DomainError,
    IneqConstants,
    SpectralField,
    check_inequality,
    divergence_residual,
    eigenvalue,
    nonlinear_product,
    pad_for_degree,
    project_low_modes,
    weighted_inner,
)

SINE = Basis("SineDirichlet1D", 1.0, 32)
PER = Basis("PeriodicZeroMean1D", 1.0, 32)
TWO = Basis("PeriodicZeroMean2DVector", 1.0, 16)
BASES = [SINE, PER, TWO]


def random_field(basis, seed, decay=1.0):
    rng = np.random.default_rng(seed)
    k = np.where(basis.mode_index > 0, basis.mode_index, 1).astype(float)
    if np.issubdtype(basis.dtype, np.complexfloating):
        c = rng.standard_normal(basis.shape) + 1j * rng.standard_normal(basis.shape)
    else:
        c = rng.standard_normal(basis.shape)
    return SpectralField(basis, np.where(basis.mode_index > 0, c * k**-decay, 0))


# ----------------------------------------------------------------------------
# eigenvalues


@pytest.mark.parametrize(
    "basis, k, expected",
    [
        (SINE, 1, math.pi**2),
        (SINE, 3, 9 * math.pi**2),
        (PER, 1, 4 * math.pi**2),
    ],
)
def test_eigenvalue_examples(basis, k, expected):
    assert eigenvalue(basis, k) == pytest.approx(expected, rel=1e-14)


def test_eigenvalue_out_of_range():
    with pytest.raises(DomainError):
        eigenvalue(SINE, 0)
    with pytest.raises(DomainError):
        eigenvalue(SINE, 33)


def test_sine_eigenvalues_exact_and_increasing():
    lam = SINE.eigenvalues
    assert np.allclose(lam, (np.arange(1, 33) * np.pi) ** 2, rtol=1e-15, atol=0)
    assert np.all(np.diff(lam) > 0)


def test_2d_sorted_eigenvalues_pairs():
    lam = TWO.sorted_eigenvalues
    assert np.all(np.diff(lam) >= 0)
    assert np.allclose(lam[:6] / (4 * np.pi**2), [1, 1, 2, 2, 4, 4])


def test_periodic_fields_have_zero_mean():
    u = random_field(PER, 0)
    _, vals = u.to_physical()
    assert abs(np.mean(vals)) < 1e-14
    _, ux, uy = random_field(TWO, 0).to_physical()
    assert abs(np.mean(ux)) < 1e-14 and abs(np.mean(uy)) < 1e-14


# ----------------------------------------------------------------------------
# Parseval, differentiation, projection


@pytest.mark.parametrize("basis", BASES, ids=lambda b: b.kind.value)
@given(seed=st.integers(0, 2**32 - 1))
def test_parseval(basis, seed):
    u = random_field(basis, seed)
    out = u.to_physical(pad=2.0)
    vals = out[1]
    if basis.is_2d:
        ux, uy = out[1], out[2]
        phys = float(np.mean(ux**2 + uy**2)) * basis.length**2
    elif basis.kind.value == "SineDirichlet1D":
        # odd extension is a trigonometric polynomial: the periodic mean is exact
        phys = float(np.mean(vals[:-1] ** 2)) * basis.length
    else:
        phys = float(np.mean(vals**2)) * basis.length
    assert phys == pytest.approx(u.norm2(), rel=1e-12)


@pytest.mark.parametrize("basis", BASES, ids=lambda b: b.kind.value)
def test_differentiation_is_diagonal(basis):
    for k in (1, 2, 5):
        w = SpectralField.single_mode(basis, k)
        assert w.norm2() == pytest.approx(1.0, rel=1e-14)
        assert w.grad_norm2() == pytest.approx(eigenvalue(basis, k), rel=1e-12)


def test_projection_examples():
    b = Basis("SineDirichlet1D", 1.0, 4)
    u = SpectralField(b, [1.0, 2.0, 3.0, 4.0])
    assert np.array_equal(project_low_modes(u, 2).coeffs, [1, 2, 0, 0])
    assert np.array_equal(project_low_modes(u, 4).coeffs, u.coeffs)
    e3 = SpectralField.single_mode(b, 3)
    assert not np.any(project_low_modes(e3, 2).coeffs)
    with pytest.raises(DomainError):
        project_low_modes(u, 5)


@pytest.mark.parametrize("basis", BASES, ids=lambda b: b.kind.value)
@given(seed=st.integers(0, 2**32 - 1), N=st.integers(1, 10))
def test_projection_idempotent_self_adjoint_linear(basis, seed, N):
    u, v = random_field(basis, seed), random_field(basis, seed + 1)
    Pu, Pv = project_low_modes(u, N), project_low_modes(v, N)
    assert np.array_equal(project_low_modes(Pu, N).coeffs, Pu.coeffs)
    assert Pu.inner(v) == pytest.approx(u.inner(Pv), rel=1e-14, abs=1e-14)
    w = project_low_modes(SpectralField(basis, 2.0 * u.coeffs + v.coeffs), N)
    assert np.allclose(w.coeffs, 2.0 * Pu.coeffs + Pv.coeffs, rtol=0, atol=1e-15)


def test_pad_for_degree():
    assert pad_for_degree(2) == 1.5
    assert pad_for_degree(3) >= 2.0


# ----------------------------------------------------------------------------
# products


def test_product_sin_squared_matches_quadrature():
    b = Basis("SineDirichlet1D", 1.0, 16)
    w1 = SpectralField.from_function(b, lambda x: np.sin(np.pi * x))
    prod = nonlinear_product(w1, w1, "uv")
    ref = [quad(lambda x, k=k: np.sin(np.pi * x) ** 2 * math.sqrt(2) * np.sin(k * np.pi * x), 0, 1,
                limit=200, epsabs=1e-14)[0] for k in range(1, 17)]
    assert np.allclose(prod.coeffs, ref, rtol=0, atol=1e-12)


@pytest.mark.parametrize("form", ["uv", "u_dx_v"])
@pytest.mark.parametrize("basis", [SINE, PER], ids=lambda b: b.kind.value)
def test_product_exact_for_band_limited(basis, form):
    """Dealiased products of fields with content below M/2 match quadrature."""
    rng = np.random.default_rng(4)
    half = basis.modes // 2
    cu = np.where(basis.mode_index <= half, rng.standard_normal(basis.shape), 0) * (basis.mode_index > 0)
    cv = np.where(basis.mode_index <= half, rng.standard_normal(basis.shape), 0) * (basis.mode_index > 0)
    u, v = SpectralField(basis, cu), SpectralField(basis, cv)
    got = nonlinear_product(u, v, form)
    # oracle: dense-grid physical product projected back
    n = 4096
    L = basis.length
    if basis.kind.value == "SineDirichlet1D":
        x = (np.arange(n) + 0.5) * L / n
        k = np.arange(1, basis.modes + 1)
        S = math.sqrt(2 / L) * np.sin(np.outer(x, k) * np.pi / L)
        dS = math.sqrt(2 / L) * np.cos(np.outer(x, k) * np.pi / L) * (k * np.pi / L)
        uv = S @ u.coeffs
        vv = (S if form == "uv" else dS) @ v.coeffs
        ref = S.T @ (uv * vv) * (L / n)
        assert np.allclose(got.coeffs, ref, atol=1e-10)
    else:
        # u(x) = (2 / sqrt(L)) Re sum_k c_k exp(2 pi i k x / L), k = 1..M
        x = np.arange(n) * L / n
        k = np.arange(1, basis.modes + 1)
        E = np.exp(2j * np.pi * np.outer(x, k) / L)

        def phys(c, deriv=False):
            d = 2j * np.pi * k / L if deriv else 1.0
            return 2 / math.sqrt(L) * np.real(E @ (d * c))

        prod = phys(u.coeffs) * phys(v.coeffs, deriv=(form == "u_dx_v"))
        ref = math.sqrt(L) * (E.conj().T @ prod) / n
        assert np.allclose(got.coeffs, ref, atol=1e-10)


def test_product_with_zero_and_mismatch():
    u = random_field(SINE, 1)
    assert not np.any(nonlinear_product(u, SpectralField.zeros(SINE), "uv").coeffs)
    with pytest.raises(DomainError):
        nonlinear_product(u, random_field(Basis("SineDirichlet1D", 1.0, 16), 2), "uv")


@given(seed=st.integers(0, 2**32 - 1), a=st.floats(-3, 3))
def test_product_bilinear(seed, a):
    u, v, w = (random_field(SINE, seed + i) for i in range(3))
    lhs = nonlinear_product(SpectralField(SINE, a * u.coeffs + w.coeffs), v, "u_dx_v").coeffs
    rhs = a * nonlinear_product(u, v, "u_dx_v").coeffs + nonlinear_product(w, v, "u_dx_v").coeffs
    assert np.allclose(lhs, rhs, atol=1e-11 * (1 + abs(a)))


def test_shear_flow_advection_vanishes():
    b = Basis("PeriodicZeroMean2DVector", 1.0, 16)
    u = SpectralField.from_velocity(b, lambda x, y: (np.sin(2 * np.pi * y), 0 * x))
    adv = nonlinear_product(u, u, "advection2D")
    assert np.max(np.abs(adv.coeffs)) < 1e-13


def test_advection_output_divergence_free():
    u, v = random_field(TWO, 5), random_field(TWO, 6)
    adv = nonlinear_product(u, v, "advection2D")
    assert divergence_residual(adv) < 1e-12
    assert divergence_residual(u) < 1e-12


# ----------------------------------------------------------------------------
# inequalities


def test_poincare_equality_on_first_mode():
    w1 = SpectralField.single_mode(SINE, 1)
    r = check_inequality("PF", w1, IneqConstants.for_basis(SINE))
    assert r.holds and r.lhs == pytest.approx(r.rhs, rel=1e-12)


def test_tail_poincare_equality_on_mode_n_plus_1():
    N = 3
    w = SpectralField.single_mode(SINE, N + 1)
    r = check_inequality("PFN", w, IneqConstants.for_basis(SINE), extra=N)
    assert r.holds and r.lhs == pytest.approx(r.rhs, rel=1e-12)


def test_agmon_sin():
    u = SpectralField.from_function(SINE, lambda x: np.sin(np.pi * x))
    r = check_inequality("Agmon", u, IneqConstants.for_basis(SINE, c0=2.0))
    assert r.lhs == pytest.approx(1.0, rel=1e-10)
    assert r.rhs == pytest.approx(math.pi, rel=1e-10)
    assert r.holds


@pytest.mark.parametrize("ineq", ["PF", "PFN", "Agmon", "GN"])
@given(seed=st.integers(0, 2**32 - 1))
def test_inequalities_hold_on_random_fields(ineq, seed):
    u = random_field(SINE, seed)
    assert check_inequality(ineq, u, IneqConstants.for_basis(SINE), extra=4).holds


def test_constants_must_be_positive():
    with pytest.raises(DomainError):
        IneqConstants(lambda1=1.0, c0=0.0)


def test_weighted_inner_is_symmetric():
    u, v = random_field(PER, 1), random_field(PER, 2)
    assert weighted_inner(PER, u.coeffs, v.coeffs) == pytest.approx(
        weighted_inner(PER, v.coeffs, u.coeffs), rel=1e-15)
