"""The five dissipative models written in spectral coefficients.

Each model is split as ``M dU/dt = A U + N(U) + h`` with a diagonal mass
``M`` and a per-mode linear operator ``A`` (a scalar for the first-order
kinds, a 2x2 block ``[[0, 1], [-c_k, -d_k]]`` for the wave kinds acting on
``(z, dz/dt)``).  :class:`Dynamics` exposes that split in a batched, array
form that the integrators consume; :func:`rhs` and :func:`energy` are the
field-level views.
"""

from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass, field

import numpy as np

from .spectral import (
    Basis,
    BasisKind,
    DomainError,
    SpectralField,
    pad_for_degree,
    spectral_ops,
    weighted_inner,
    weighted_norm2,
)


class ModelKind(str, enum.Enum):
    NSV2D = "NSV2D"
    BBMB = "BBMB"
    KDVB = "KdVB"
    SDWAVE = "SDWave"
    NDWAVE = "NDWave"

    @property
    def second_order(self) -> bool:
        return self in (ModelKind.SDWAVE, ModelKind.NDWAVE)


class NonlinearityForm(str, enum.Enum):
    ZERO = "Zero"
    POLYNOMIAL = "Polynomial"
    CUBIC_MINUS_LINEAR = "CubicMinusLinear"
    IDENTITY = "Identity"


# (m0, a) for p = 2; f' = 3s^2 - 1 needs m0 = 3 for the upper bound
_GROWTH_DEFAULTS = {
    NonlinearityForm.ZERO: (1.0, 0.0),
    NonlinearityForm.IDENTITY: (1.0, 0.0),
    NonlinearityForm.CUBIC_MINUS_LINEAR: (3.0, 3.0),
    NonlinearityForm.POLYNOMIAL: (1.0, 1.0),
}


@dataclass(frozen=True)
class NonlinearitySpec:
    """A polynomial nonlinearity ``f`` and its declared growth constants.

    ``coefficients`` are in increasing degree (``c0 + c1 s + ...``) and only
    used by the ``Polynomial`` form.  ``m0, a, p`` are the constants of the
    growth condition ``-m0 + a|s|^p <= f'(s) <= m0 (1 + |s|^p)``; ``d0`` is the
    coercivity constant quoted by the wave-equation energy bounds.
    """

    form: NonlinearityForm = NonlinearityForm.ZERO
    coefficients: tuple[float, ...] = ()
    p: int = 2
    m0: float | None = None
    a: float | None = None
    d0: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "form", NonlinearityForm(self.form))
        object.__setattr__(self, "coefficients", tuple(float(c) for c in self.coefficients))
        m0, a = _GROWTH_DEFAULTS[self.form]
        if self.m0 is None:
            object.__setattr__(self, "m0", m0)
        if self.a is None:
            object.__setattr__(self, "a", a)
        if self.form is NonlinearityForm.POLYNOMIAL and not self.coefficients:
            raise DomainError("Polynomial nonlinearity needs coefficients")
        if self.p < 2:
            raise DomainError("growth exponent p must be >= 2")

    @functools.cached_property
    def polynomial(self) -> np.polynomial.Polynomial:
        coef = {
            NonlinearityForm.ZERO: (0.0,),
            NonlinearityForm.IDENTITY: (0.0, 1.0),
            NonlinearityForm.CUBIC_MINUS_LINEAR: (0.0, -1.0, 0.0, 1.0),
            NonlinearityForm.POLYNOMIAL: self.coefficients,
        }[self.form]
        return np.polynomial.Polynomial(coef).trim()

    @property
    def is_zero(self) -> bool:
        return not np.any(self.polynomial.coef)

    @property
    def degree(self) -> int:
        return self.polynomial.degree()

    def __call__(self, s):
        return self.polynomial(s)

    def derivative(self, s):
        return self.polynomial.deriv()(s)

    def antiderivative(self, s):
        """``F(s) = int_0^s f``."""
        return self.polynomial.integ(lbnd=0)(s)

    def max_abs(self, radius: float, derivative: bool = False) -> float:
        """``max_{|s| <= radius} |f(s)|`` (or ``|f'(s)|``), exact for polynomials."""
        poly = self.polynomial.deriv() if derivative else self.polynomial
        # drop terms that cannot matter on this interval (keeps the root finder finite)
        scale = np.abs(poly.coef) * max(radius, 1.0) ** np.arange(poly.coef.size)
        keep = scale > np.finfo(float).eps * scale.max() if scale.max() > 0 else scale > 0
        coef = np.where(keep, poly.coef, 0.0)
        poly = np.polynomial.Polynomial(coef if coef.any() else [0.0]).trim()
        cand = [-radius, radius]
        if poly.degree() >= 2:
            for r in poly.deriv().roots():
                if abs(r.imag) < 1e-12 and abs(r.real) <= radius:
                    cand.append(r.real)
        vals = np.abs(poly(np.array(cand, dtype=float)))
        if not np.all(np.isfinite(vals)):
            raise DomainError(f"nonlinearity is not finite on |s| <= {radius}")
        return float(vals.max())

    def check_growth(self, s_max: float = 10.0, n: int = 4001) -> bool:
        s = np.linspace(-s_max, s_max, n)
        fp = self.derivative(s)
        sp = np.abs(s) ** self.p
        tol = 1e-12 * (1 + np.abs(fp))
        return bool(np.all(fp >= -self.m0 + self.a * sp - tol) and np.all(fp <= self.m0 * (1 + sp) + tol))


class DampingForm(str, enum.Enum):
    LINEAR = "Linear"
    LINEAR_PLUS_POWER = "LinearPlusPower"


@dataclass(frozen=True)
class DampingSpec:
    """``g(s) = a1 s + a2 |s|^m s``.

    For ``a2 > 0`` the monotonicity constant in
    ``[g(s1) - g(s2)](s1 - s2) >= a1 |s1-s2|^2 + c |s1-s2|^{m+2}`` is
    ``c = a2 2^{-m}`` (attained at ``s1 = -s2``), exposed as :attr:`power_constant`.
    """

    form: DampingForm = DampingForm.LINEAR
    a1: float = 1.0
    a2: float = 0.0
    m: float = 2.0
    a0: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "form", DampingForm(self.form))
        if not self.a1 > 0:
            raise DomainError("damping a1 must be positive")
        if self.form is DampingForm.LINEAR and self.a2 != 0:
            raise DomainError("Linear damping has a2 = 0")
        if self.form is DampingForm.LINEAR_PLUS_POWER and not (self.a2 > 0 and self.m > 0):
            raise DomainError("LinearPlusPower damping needs a2 > 0 and m > 0")

    @property
    def lipschitz_constant(self) -> float:
        if self.a0 is not None:
            return self.a0
        return max(self.a1, (self.m + 1) * self.a2)

    @property
    def power_constant(self) -> float:
        return self.a2 * 2.0 ** (-self.m)

    def __call__(self, s):
        return self.a1 * s + self.nonlinear(s)

    def nonlinear(self, s):
        if self.a2 == 0:
            return np.zeros_like(s)
        return self.a2 * np.abs(s) ** self.m * s

    def check_monotone(self, s1, s2) -> bool:
        d = np.asarray(s1) - np.asarray(s2)
        lhs = (self(s1) - self(s2)) * d
        rhs = self.a1 * d**2 + self.power_constant * np.abs(d) ** (self.m + 2)
        return bool(np.all(lhs >= rhs - 1e-12 * (1 + np.abs(rhs))) and self(np.zeros(1))[0] == 0)


_ALLOWED_BASES = {
    ModelKind.NSV2D: {BasisKind.PERIODIC_2D},
    ModelKind.BBMB: {BasisKind.SINE, BasisKind.PERIODIC},
    ModelKind.KDVB: {BasisKind.PERIODIC},
    ModelKind.SDWAVE: {BasisKind.SINE, BasisKind.PERIODIC},
    ModelKind.NDWAVE: {BasisKind.SINE, BasisKind.PERIODIC},
}


@dataclass(frozen=True, eq=False)
class ModelSpec:
    """Which PDE, its parameters and its (time-independent) forcing.

    ``nu`` multiplies the diffusion / ``-Laplacian`` term, ``alpha**2`` the
    ``-Laplacian d/dt`` regularization of NSV and BBMB, ``b`` the strong damping
    of SDWave and ``lam`` its ``-lam u`` term.
    """

    kind: ModelKind
    basis: Basis
    nu: float = 1.0
    alpha: float = 1.0
    b: float = 1.0
    lam: float = 0.0
    f: NonlinearitySpec = field(default_factory=NonlinearitySpec)
    g: DampingSpec = field(default_factory=DampingSpec)
    h: SpectralField | None = None

    def __post_init__(self):
        kind = ModelKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if self.basis.kind not in _ALLOWED_BASES[kind]:
            raise DomainError(f"{kind.value} is not defined on a {self.basis.kind.value} basis")
        if kind is ModelKind.KDVB:
            if not self.nu >= 0:
                raise DomainError("KdVB diffusion nu must be >= 0")
            if self.f.form not in (NonlinearityForm.ZERO, NonlinearityForm.IDENTITY):
                raise DomainError("KdVB nonlinearity is u u_x (Identity) or off (Zero)")
        elif not self.nu > 0:
            raise DomainError("nu must be positive")
        if kind in (ModelKind.NSV2D, ModelKind.BBMB) and not self.alpha > 0:
            raise DomainError("alpha must be positive")
        if kind is ModelKind.SDWAVE and not self.b > 0:
            raise DomainError("strong damping b must be positive")
        if self.h is not None and self.h.basis != self.basis:
            raise DomainError("forcing lives on a different basis")

    @property
    def forcing(self) -> SpectralField:
        return self.h if self.h is not None else SpectralField.zeros(self.basis)

    @property
    def mass(self) -> np.ndarray:
        if self.kind in (ModelKind.NSV2D, ModelKind.BBMB):
            return 1.0 + self.alpha**2 * self.basis.eigenvalues
        return np.ones(self.basis.shape)

    def dynamics(self) -> "Dynamics":
        return Dynamics(self)


class LinearOp:
    """Per-mode linear operator; scalar ``a`` or wave block ``[[0,1],[-c,-d]]``."""

    def __init__(self, a=None, c=None, d=None):
        self.a, self.c, self.d = a, c, d
        self.block = a is None

    def apply(self, U: np.ndarray) -> np.ndarray:
        if not self.block:
            return self.a * U
        out = np.empty_like(U)
        out[..., 0, :] = U[..., 1, :]
        out[..., 1, :] = -self.c * U[..., 0, :] - self.d * U[..., 1, :]
        return out

    def solve(self, Y: np.ndarray, tau: float) -> np.ndarray:
        """Solve ``(I - tau A) X = Y``."""
        if not self.block:
            return Y / (1.0 - tau * self.a)
        y0, y1 = Y[..., 0, :], Y[..., 1, :]
        det = 1.0 + tau * self.d + tau * tau * self.c
        X = np.empty_like(Y)
        X[..., 0, :] = ((1.0 + tau * self.d) * y0 + tau * y1) / det
        X[..., 1, :] = (y1 - tau * self.c * y0) / det
        return X

    @property
    def spectral_radius(self) -> float:
        if not self.block:
            return float(np.max(np.abs(self.a)))
        return float(np.max(np.abs(self.d)) + np.sqrt(np.max(np.abs(self.c))))


class Dynamics:
    """Array-level split of one model: diagonal linear part plus explicit terms.

    States are coefficient arrays with optional leading batch axes; the wave
    kinds carry an extra axis of length 2 for ``(z, dz/dt)`` just before the
    basis axes.
    """

    def __init__(self, model: ModelSpec):
        self.model = model
        basis = model.basis
        self.basis = basis
        self.second_order = model.kind.second_order
        self.mass = model.mass
        lam = basis.eigenvalues
        kind = model.kind
        if kind in (ModelKind.NSV2D, ModelKind.BBMB):
            self.linear = LinearOp(a=-model.nu * lam / self.mass)
        elif kind is ModelKind.KDVB:
            k = basis.wavenumbers
            # -u_xxx contributes +i k^3 for e^{ikx}
            self.linear = LinearOp(a=-model.nu * lam + 1j * k**3)
        elif kind is ModelKind.SDWAVE:
            self.linear = LinearOp(c=model.nu * lam - model.lam, d=model.b * lam)
        else:
            self.linear = LinearOp(c=lam, d=np.full(basis.shape, model.g.a1))
        self.h = model.forcing.coeffs / self.mass
        f = model.f
        if kind is ModelKind.NSV2D:
            self._ops = spectral_ops(basis, 1.5)
        elif kind in (ModelKind.BBMB, ModelKind.KDVB):
            self._ops = spectral_ops(basis, pad_for_degree(f.degree + 1))
        else:
            deg = f.degree
            if model.g.a2 != 0:
                m = model.g.m
                deg = max(deg, int(m) + 1 if float(m).is_integer() and int(m) % 2 == 0 else 3)
            self._ops = spectral_ops(basis, pad_for_degree(deg))

    def zeros(self, batch: tuple[int, ...] = ()) -> np.ndarray:
        shape = batch + ((2,) if self.second_order else ()) + self.basis.shape
        return np.zeros(shape, dtype=self.basis.dtype)

    def nonlinear(self, U: np.ndarray) -> np.ndarray:
        """Explicit terms without the forcing, already divided by the mass."""
        m = self.model
        kind = m.kind
        if kind is ModelKind.NSV2D:
            return -self._ops.advection(U, U) / self.mass
        if kind is ModelKind.BBMB:
            if m.f.is_zero:
                return np.zeros_like(U)
            if m.f.form is NonlinearityForm.IDENTITY:
                return -self._ops.product_dx(U, U) / self.mass
            return -self._ops.pointwise_dx(U, m.f) / self.mass
        if kind is ModelKind.KDVB:
            if m.f.is_zero:
                return np.zeros_like(U)
            return -self._ops.product_dx(U, U)
        out = np.zeros_like(U)
        acc = out[..., 1, :]
        if not m.f.is_zero:
            acc -= self._ops.pointwise(U[..., 0, :], m.f)
        if kind is ModelKind.NDWAVE and m.g.a2 != 0:
            acc -= self._ops.pointwise(U[..., 1, :], m.g.nonlinear)
        return out

    def explicit(self, U: np.ndarray) -> np.ndarray:
        out = self.nonlinear(U)
        if self.second_order:
            out[..., 1, :] += self.h
        else:
            out += self.h
        return out

    def full(self, U: np.ndarray) -> np.ndarray:
        return self.linear.apply(U) + self.explicit(U)


# ----------------------------------------------------------------------------
# field-level views


@dataclass(frozen=True)
class ModelRHS:
    """Right-hand side of one model, controller excluded.

    First-order kinds: ``mass * du/dt = value``.  Wave kinds: ``du/dt =
    velocity`` and ``d2u/dt2 = value`` (``mass`` is all ones).
    """

    value: SpectralField
    mass: np.ndarray
    velocity: SpectralField | None = None

    def rate(self) -> SpectralField:
        return SpectralField(self.value.basis, self.value.coeffs / self.mass, self.value.time)


def rhs(model: ModelSpec, u: SpectralField, u_t: SpectralField | None = None) -> ModelRHS:
    if u.basis != model.basis:
        raise DomainError("state lives on a different basis than the model")
    dyn = model.dynamics()
    if model.kind.second_order:
        if u_t is None:
            raise DomainError(f"{model.kind.value} is second order in time; u_t is required")
        U = np.stack([u.coeffs, u_t.coeffs]).astype(model.basis.dtype)
        dU = dyn.full(U)
        return ModelRHS(
            value=SpectralField(model.basis, dU[1], u.time),
            mass=np.ones(model.basis.shape),
            velocity=SpectralField(model.basis, dU[0], u.time),
        )
    rate = dyn.full(np.asarray(u.coeffs, dtype=model.basis.dtype))
    return ModelRHS(SpectralField(model.basis, rate * dyn.mass, u.time), dyn.mass)


_GL_S, _GL_W = np.polynomial.legendre.leggauss(16)
_GL_S = 0.5 * (_GL_S + 1.0)
_GL_W = 0.5 * _GL_W


def potential_functional(model: ModelSpec, z: np.ndarray, phi: np.ndarray) -> float:
    """``int_0^1 (f(phi + s z) - f(phi), z) ds`` by 16-point Gauss-Legendre in ``s``."""
    f = model.f
    if f.is_zero:
        return 0.0
    basis = model.basis
    ops = spectral_ops(basis, pad_for_degree(f.degree))
    f_phi = ops.pointwise(phi, f)
    total = 0.0
    for s, w in zip(_GL_S, _GL_W):
        total += w * weighted_inner(basis, ops.pointwise(phi + s * z, f) - f_phi, z)
    return float(total)


def energy(
    model: ModelSpec,
    state,
    mu: float = 0.0,
    N: int = 0,
    epsilon: float | None = None,
    phi: SpectralField | None = None,
) -> dict[str, float]:
    """Energy functional of ``state`` with its named components.

    ``state`` is a field for the first-order kinds and a ``(z, z_t)`` pair for
    the wave kinds.  ``mu, N`` describe the controller entering the SDWave and
    NDWave functionals; ``epsilon`` defaults to ``b / 2``; ``phi`` is the
    NDWave steady state (zero by default).
    """
    basis = model.basis
    lam = basis.eigenvalues
    kind = model.kind
    if not kind.second_order:
        c = state.coeffs
        l2 = weighted_norm2(basis, c)
        if kind is ModelKind.KDVB:
            return {"l2": l2, "total": l2}
        grad = model.alpha**2 * weighted_norm2(basis, c, lam)
        return {"l2": l2, "grad": grad, "total": l2 + grad}

    z, zt = state
    z, zt = np.asarray(z.coeffs), np.asarray(zt.coeffs)
    low = basis.low_mode_mask(N)
    if kind is ModelKind.SDWAVE:
        b, nu = model.b, model.nu
        eps = b / 2 if epsilon is None else epsilon
        inv = np.where(lam > 0, 1.0 / np.where(lam > 0, lam, 1.0), 0.0)
        parts = {
            "kinetic": weighted_norm2(basis, zt, inv),
            "l2": nu * weighted_norm2(basis, z) - model.lam * weighted_norm2(basis, z, inv),
            "control": mu * weighted_norm2(basis, np.where(low, z, 0), inv + eps / 2),
            "grad": eps * b / 2 * weighted_norm2(basis, z, lam),
            "cross": eps * weighted_inner(basis, z, zt),
        }
    else:
        p = np.zeros(basis.shape, basis.dtype) if phi is None else np.asarray(phi.coeffs)
        parts = {
            "kinetic": 0.5 * weighted_norm2(basis, zt),
            "grad": 0.5 * weighted_norm2(basis, z, lam),
            "control": 0.5 * mu * weighted_norm2(basis, np.where(low, z, 0)),
            "potential": potential_functional(model, z, p),
        }
    parts["total"] = float(sum(parts.values()))
    return parts
