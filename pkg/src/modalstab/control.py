"""Finite-mode feedback controllers and the stationary problem they target."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .models import ModelKind, ModelSpec
from .spectral import BasisKind, DomainError, SpectralField


class ControllerVariant(str, enum.Enum):
    TRACK_STATE = "TrackState"
    TRACK_STATE_PLUS_VELOCITY = "TrackStatePlusVelocity"
    STEADY_STATE = "SteadyState"


@dataclass(frozen=True, eq=False)
class ControllerSpec:
    """Gain ``mu`` acting on the ``N`` lowest modes of the tracking error.

    ``target`` is the fixed state for ``SteadyState``; the tracking variants
    follow a reference trajectory that the integrator advances alongside the
    controlled one, so their ``target`` (if any) is the reference's initial
    state.
    """

    variant: ControllerVariant = ControllerVariant.TRACK_STATE
    mu: float = 0.0
    N: int = 0
    target: SpectralField | None = None

    def __post_init__(self):
        object.__setattr__(self, "variant", ControllerVariant(self.variant))
        if not self.mu >= 0:
            raise DomainError("gain mu must be >= 0")
        if int(self.N) != self.N or self.N < 0:
            raise DomainError("mode count N must be a non-negative integer")
        object.__setattr__(self, "N", int(self.N))
        if self.variant is ControllerVariant.STEADY_STATE and self.target is None:
            raise DomainError("SteadyState controller needs a target field")

    @property
    def uses_velocity(self) -> bool:
        return self.variant is ControllerVariant.TRACK_STATE_PLUS_VELOCITY

    def check_basis(self, basis) -> None:
        if self.N > basis.n_modes:
            raise DomainError(f"controller N={self.N} exceeds the {basis.n_modes} resolved modes")
        if self.target is not None and self.target.basis != basis:
            raise DomainError("controller target lives on a different basis")

    def gain_mask(self, basis) -> np.ndarray:
        """``mu`` on the controlled modes, 0 elsewhere."""
        self.check_basis(basis)
        return self.mu * basis.low_mode_mask(self.N)


def feedback(
    ctrl: ControllerSpec,
    u: SpectralField,
    v: SpectralField | None = None,
    u_t: SpectralField | None = None,
    v_t: SpectralField | None = None,
) -> SpectralField:
    """Control force ``-mu P_N(u - v)``, or ``-mu P_N((u - v) + (u_t - v_t))``.

    For ``SteadyState`` the reference defaults to ``ctrl.target``.
    """
    basis = u.basis
    if v is None:
        if ctrl.target is None:
            raise DomainError("no reference state given")
        v = ctrl.target
    fields = [v] + [f for f in (u_t, v_t) if f is not None]
    if any(f.basis != basis for f in fields):
        raise DomainError("feedback fields live on different bases")
    err = np.asarray(u.coeffs) - np.asarray(v.coeffs)
    if ctrl.uses_velocity:
        if u_t is None or v_t is None:
            raise DomainError("TrackStatePlusVelocity needs u_t and v_t")
        err = err + (np.asarray(u_t.coeffs) - np.asarray(v_t.coeffs))
    return SpectralField(basis, -ctrl.gain_mask(basis) * err, u.time)


# ----------------------------------------------------------------------------
# stationary problem  -phi'' + f(phi) = 0


class SteadyStateError(RuntimeError):
    def __init__(self, message: str, residual: float, iterations: int):
        super().__init__(f"{message} (residual {residual:.3e} after {iterations} iterations)")
        self.residual = residual
        self.iterations = iterations


@dataclass(frozen=True)
class SteadyState:
    phi: SpectralField
    residual: float
    iterations: int


def _galerkin_quadrature(model: ModelSpec):
    """Gauss-Legendre nodes, weights and the sine basis sampled on them.

    Enough nodes to integrate ``f(phi) w_k`` exactly for polynomial ``f``.
    """
    basis = model.basis
    M, L = basis.modes, basis.length
    n = (max(model.f.degree, 1) + 1) * M // 2 + M + 1
    x, w = np.polynomial.legendre.leggauss(n)
    x = 0.5 * L * (x + 1.0)
    w = 0.5 * L * w
    k = np.arange(1, M + 1)
    W = np.sqrt(2.0 / L) * np.sin(np.outer(k, x) * np.pi / L)
    return W, w


def steady_state_solve(
    model: ModelSpec,
    guess: SpectralField | None = None,
    tol: float = 1e-10,
    max_iter: int = 100,
) -> SteadyState:
    """Solve the Galerkin problem ``lambda_k phi_k + (f(phi), w_k) = 0`` by damped Newton.

    The Jacobian ``diag(lambda) + (f'(phi) w_j, w_i)`` is assembled exactly by
    Gauss-Legendre quadrature.  The residual reported is the Euclidean norm of
    the coefficient residual (the L2 norm of ``-phi'' + P f(phi)``).
    """
    if model.kind not in (ModelKind.NDWAVE, ModelKind.SDWAVE):
        raise DomainError("steady states are defined for the wave models")
    basis = model.basis
    if basis.kind is not BasisKind.SINE:
        raise DomainError("steady_state_solve needs the Dirichlet sine basis")
    lam = basis.eigenvalues
    f = model.f
    if guess is None:
        c = np.zeros(basis.modes)
    else:
        if guess.basis != basis:
            raise DomainError("initial guess lives on a different basis")
        c = np.array(guess.coeffs, dtype=float)
    if f.is_zero:
        return SteadyState(SpectralField.zeros(basis), 0.0, 0)

    W, w = _galerkin_quadrature(model)
    Ww = W * w

    def residual(c):
        return lam * c + Ww @ f(c @ W)

    r = residual(c)
    rn = float(np.linalg.norm(r))
    it = 0
    while rn >= tol:
        if it >= max_iter:
            raise SteadyStateError("Newton did not converge", rn, it)
        J = (Ww * f.derivative(c @ W)) @ W.T + np.diag(lam)
        step = np.linalg.solve(J, -r)
        t = 1.0
        while True:
            cn = c + t * step
            rnew = residual(cn)
            nn = float(np.linalg.norm(rnew))
            if nn < (1 - 1e-4 * t) * rn or t < 1e-6:
                break
            t *= 0.5
        if t < 1e-6 and nn >= rn:
            raise SteadyStateError("line search stalled", rn, it)
        c, r, rn = cn, rnew, nn
        it += 1
    return SteadyState(SpectralField(basis, c), rn, it)
