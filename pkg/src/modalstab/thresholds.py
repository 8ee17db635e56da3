"""Sufficient conditions on the gain ``mu`` and mode count ``N``.

Each calculator evaluates the closed-form constants of one stabilization
result, resolves any circular dependence on ``mu`` by fixed-point iteration,
and returns a :class:`ThresholdReport` holding every constant, every
condition (as ``lhs <relation> rhs``) and the minimal ``(mu, N)``.

When ``mu`` / ``N`` are passed, the conditions are evaluated at those
values; otherwise at ``(mu_min, N_min)``.
"""

from __future__ import annotations

import json
import math
import operator
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from .models import NonlinearitySpec
from .spectral import (
    Basis,
    BasisKind,
    DomainError,
    SpectralField,
    analytic_eigenvalue,
    pad_for_degree,
    spectral_ops,
)

# non-strict relations forgive relative roundoff so that a value sitting
# exactly on its threshold (e.g. mu = mu_min) counts as satisfied
_RTOL = 1e-12
_RELATIONS: dict[str, Callable[[float, float], bool]] = {
    "<=": lambda a, b: a <= b + _RTOL * max(abs(a), abs(b)),
    "<": operator.lt,
    ">=": lambda a, b: a >= b - _RTOL * max(abs(a), abs(b)),
    ">": operator.gt,
}


@dataclass(frozen=True)
class Condition:
    name: str
    lhs: float
    relation: str
    rhs: float

    @property
    def satisfied(self) -> bool:
        return bool(_RELATIONS[self.relation](self.lhs, self.rhs))

    def to_dict(self) -> dict:
        return {**asdict(self), "satisfied": self.satisfied}


@dataclass(frozen=True)
class ThresholdReport:
    """Certificate for one model.

    ``guaranteed_rate`` is the exponential rate promised for the quantity
    named by ``rate_quantity``; it is ``None`` when the result is algebraic or
    the rate is not explicit (see ``rate_form``).
    """

    model_kind: str
    constants: dict[str, float]
    conditions: tuple[Condition, ...]
    mu: float
    N: int | None
    mu_min: float
    N_min: int | None
    guaranteed_rate: float | None
    rate_form: str = "exponential"
    rate_quantity: str = ""
    fixed_point: dict = field(default_factory=dict)
    notes: tuple[str, ...] = ()

    @property
    def certified(self) -> bool:
        return bool(self.conditions) and all(c.satisfied for c in self.conditions)

    def condition(self, name: str) -> Condition:
        for c in self.conditions:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self) -> dict:
        def clean(x):
            if isinstance(x, float) and not math.isfinite(x):
                return None if math.isnan(x) else ("inf" if x > 0 else "-inf")
            return x

        return {
            "model_kind": self.model_kind,
            "certified": self.certified,
            "mu": clean(self.mu),
            "N": self.N,
            "mu_min": clean(self.mu_min),
            "N_min": self.N_min,
            "guaranteed_rate": self.guaranteed_rate,
            "rate_form": self.rate_form,
            "rate_quantity": self.rate_quantity,
            "constants": {k: clean(float(v)) for k, v in self.constants.items()},
            "conditions": [{k: clean(v) for k, v in c.to_dict().items()} for c in self.conditions],
            "fixed_point": {k: clean(v) if not isinstance(v, list) else [clean(t) for t in v]
                            for k, v in self.fixed_point.items()},
            "notes": list(self.notes),
        }

    def to_json(self, indent: int = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent)


# placeholder for a gain condition whose threshold chain has no finite fixed point
_NO_FIXED_POINT = Condition("gain_fixed_point_exists", 0.0, ">", 0.0)


def _feedback_modes(N: int) -> Condition:
    # the first-order estimates need at least one controlled mode
    return Condition("feedback_modes", float(N), ">=", 1.0)


# ----------------------------------------------------------------------------
# spectral-gap helpers


def count_eigenvalues_below(basis: Basis, threshold: float, strict: bool = True) -> int | None:
    """Number of modes with ``lambda_k < threshold`` (``<=`` if not strict).

    Counts the infinite-dimensional spectrum, not just the resolved modes.
    Returns ``None`` when the count is too large to enumerate (2D only).
    """
    if not threshold > 0:
        return 0
    if not math.isfinite(threshold):
        return None
    below = operator.lt if strict else operator.le
    L = basis.length
    if basis.kind is BasisKind.SINE:
        unit = (math.pi / L) ** 2
    else:
        unit = (2 * math.pi / L) ** 2
    if basis.kind is not BasisKind.PERIODIC_2D:
        k = int(math.isqrt(int(threshold / unit))) + 2
        while k > 0 and not below(analytic_eigenvalue(basis, k), threshold):
            k -= 1
        return k
    R = threshold / unit
    if R > 1e12:
        return None
    n_max = int(R) + 1
    while n_max > 0 and not below(unit * n_max, threshold):
        n_max -= 1
    K = math.isqrt(n_max)
    kx = np.arange(-K, K + 1)
    rem = n_max - kx * kx
    full = int(np.sum(2 * np.floor(np.sqrt(rem + 0.5)).astype(np.int64) + 1))
    return (full - 1) // 2


def least_gap_modes(basis: Basis, threshold: float, strict: bool = False, n_min: int = 0) -> int | None:
    """Least ``N >= n_min`` with ``lambda_{N+1} >= threshold`` (``>`` if strict)."""
    n = count_eigenvalues_below(basis, threshold, strict=not strict)
    return None if n is None else max(n, n_min)


def _lambda(basis: Basis, k: int) -> float:
    return analytic_eigenvalue(basis, k)


# ----------------------------------------------------------------------------
# fixed point for circular constant chains


@dataclass(frozen=True)
class FixedPoint:
    value: float
    converged: bool
    iterations: int
    trace: tuple[float, ...]


def fixed_point(G: Callable[[float], float], x0: float = 0.0, rtol: float = 1e-10,
                max_iter: int = 100000, cap: float = 1e15) -> FixedPoint:
    """Iterate ``x <- G(x)``.

    Runs past ``rtol`` until the iterate stops changing at double precision,
    so converged values agree with an independent evaluation to roundoff.
    Divergence is declared when the iterate exceeds ``cap`` or ``max_iter``
    is reached without meeting ``rtol``.
    """
    x = float(x0)
    trace = [x]
    rel = math.inf
    for it in range(1, max_iter + 1):
        y = float(G(x))
        trace.append(y)
        if not math.isfinite(y) or y > cap:
            return FixedPoint(math.inf, False, it, tuple(trace[:50]))
        rel = abs(y - x) / max(abs(y), 1e-300)
        x = y
        if rel <= 4 * np.finfo(float).eps or y == 0.0 and trace[-2] == 0.0:
            break
    ok = rel < rtol
    return FixedPoint(x if ok else math.inf, ok, it, tuple(trace[:50]))


# ----------------------------------------------------------------------------
# calculators


def nsv_thresholds(nu: float, alpha: float, h_norm: float, basis: Basis, b0: float = 2.0,
                   mu: float | None = None, N: int | None = None) -> ThresholdReport:
    """Gain and spectral-gap conditions for the Voigt-regularized Navier-Stokes system."""
    if not (nu > 0 and alpha > 0 and h_norm >= 0 and b0 > 0):
        raise DomainError("nsv_thresholds needs nu, alpha, b0 > 0 and h_norm >= 0")
    lam1 = _lambda(basis, 1)
    d0 = nu / 2 * min(lam1, alpha**-2)
    r0 = 2 * h_norm**2 / (nu * lam1 * d0 * alpha**2)
    C1 = 0.25 * (3 / (2 * nu)) ** 3
    kappa = nu / 4 * min(lam1, alpha**-2)
    k0 = 1 + 1 / (alpha**2 * lam1)
    g = C1 * r0**2 * b0**4
    mu_min = g
    N_min = least_gap_modes(basis, 4 * g / nu, strict=True, n_min=1)
    mu_eval = mu_min if mu is None else float(mu)
    N_eval = N_min if N is None else int(N)
    r1 = 2 / (d0 * alpha**2) * (mu_eval / (2 * lam1) * r0 + h_norm**2 / (nu * lam1))
    conditions = [Condition("gain", mu_eval, ">=", g)]
    if N_eval is not None:
        lamN = _lambda(basis, N_eval + 1)
        conditions.append(Condition("spectral_gap", nu - 4 * g / lamN, ">", 0.0))
        conditions.append(_feedback_modes(N_eval))
    constants = dict(d0=d0, r0=r0, r1=r1, C1=C1, kappa=kappa, k0=k0, b0=b0, lambda1=lam1)
    return ThresholdReport(
        "NSV2D", constants, tuple(conditions), mu_eval, N_eval, mu_min, N_min, kappa,
        rate_quantity="grad_norm",
        notes=("3D sufficient condition; evaluated with the eigenvalues of the given basis",),
    )


def _bbmb_core(f: NonlinearitySpec, R1: float, R2: float, sobolev_const: float):
    D1 = f.max_abs(sobolev_const * math.sqrt(R2))
    D2 = f.max_abs(sobolev_const * (math.sqrt(R1) + math.sqrt(R2)), derivative=True)
    return D1, D2, 0.5 * D1**2 + D2 * math.sqrt(R1), D1**2 + 2 * D2 * math.sqrt(R1)


def bbmb_conditions(f: NonlinearitySpec, R1: float, R2: float, basis: Basis, sobolev_const: float = 1.0,
                    mu: float | None = None, N: int | None = None) -> ThresholdReport:
    """Gain and gap conditions for given absorbing radii ``R1, R2`` (no fixed point)."""
    D1, D2, gain, gap = _bbmb_core(f, R1, R2, sobolev_const)
    return _bbmb_report(basis, dict(R1=R1, R2=R2, D1=D1, D2=D2), gain, gap, mu, N, {}, ())


def _bbmb_report(basis, constants, gain, gap, mu, N, fp, notes) -> ThresholdReport:
    lam1 = _lambda(basis, 1)
    N_min = least_gap_modes(basis, 2 * gap, n_min=1)
    mu_min = gain if not fp else fp["mu_min"]
    mu_eval = gain if mu is None else float(mu)
    N_eval = N_min if N is None else int(N)
    conditions = [Condition("gain", mu_eval, ">=", gain)]
    if N_eval is not None:
        conditions.append(Condition("spectral_gap", gap / _lambda(basis, N_eval + 1), "<=", 0.5))
        conditions.append(_feedback_modes(N_eval))
    a0 = 0.25 * min(1.0, lam1)
    constants = {**constants, "a0": a0, "lambda1": lam1}
    return ThresholdReport(
        "BBMB", constants, tuple(conditions), mu_eval, N_eval, mu_min, N_min, a0,
        rate_quantity="h1_energy", fixed_point=fp, notes=notes,
    )


def bbmb_thresholds(f: NonlinearitySpec, h_norm: float, basis: Basis, sobolev_const: float = 1.0,
                    mu: float | None = None, N: int | None = None, r1_form: str = "literal",
                    mu0: float = 0.0) -> ThresholdReport:
    """Conditions for the Benjamin-Bona-Mahony-Burgers feedback system.

    ``r1_form`` selects the first absorbing radius: ``"literal"`` uses
    ``4 / (lambda1 kappa1)``, ``"sharp"`` uses ``2 ||h||^2 / (lambda1 kappa1)``;
    both are reported.  ``sobolev_const`` is the constant ``c`` in
    ``||z||_inf <= c ||z_x||`` used for the radii of ``D1`` and ``D2``.
    """
    if not (h_norm >= 0 and sobolev_const > 0):
        raise DomainError("bbmb_thresholds needs h_norm >= 0 and sobolev_const > 0")
    lam1 = _lambda(basis, 1)
    kappa1 = min(lam1 / 2, 1.0)
    R1_literal = 4 / (lam1 * kappa1)
    R1_sharp = 2 * h_norm**2 / (lam1 * kappa1)
    R1 = {"literal": R1_literal, "sharp": R1_sharp}[r1_form]
    hterm = 2 / lam1 * h_norm**2

    def G(m):
        return _bbmb_core(f, R1, m * R1 + hterm, sobolev_const)[2]

    fp = fixed_point(G, mu0)
    mu_min = fp.value
    notes = []
    if not fp.converged:
        notes.append("gain fixed point diverged: no finite mu satisfies the gain condition")
    mu_eval = float(mu) if mu is not None else (mu_min if fp.converged else math.inf)
    if math.isfinite(mu_eval):
        R2 = mu_eval * R1 + hterm
        D1, D2, gain, gap = _bbmb_core(f, R1, R2, sobolev_const)
    else:
        R2 = D1 = D2 = gain = gap = math.inf
    constants = dict(kappa1=kappa1, R1=R1, R1_literal=R1_literal, R1_sharp=R1_sharp, R2=R2,
                     D1=D1, D2=D2, sobolev_const=sobolev_const)
    fpd = dict(mu_min=mu_min, converged=fp.converged, iterations=fp.iterations, mu0=mu0,
               trace=list(fp.trace))
    if not math.isfinite(gap):
        return ThresholdReport("BBMB", {**constants, "a0": 0.25 * min(1.0, lam1), "lambda1": lam1},
                               (_NO_FIXED_POINT,), mu_eval, N, mu_min, None,
                               0.25 * min(1.0, lam1), rate_quantity="h1_energy", fixed_point=fpd,
                               notes=tuple(notes))
    rep = _bbmb_report(basis, constants, gain, gap, mu_eval, N, fpd, tuple(notes))
    return rep


def kdvb_thresholds(h_norm: float, basis: Basis, beta: float = 2.0, mu: float | None = None,
                    N: int | None = None, mu0: float = 0.0) -> ThresholdReport:
    """Conditions for the Korteweg-de Vries-Burgers feedback system.

    The chain ``rho1 -> rho2 -> M0``, then ``M1, M2, M3`` (which grow with
    ``mu``).  ``mu_min`` is the fixed point of ``mu = M3(mu) / 2``; since
    ``M3`` is superlinear in ``mu`` it often has none, and the report is then
    not certifiable.  The trace of the iteration is kept for inspection.
    """
    if basis.kind is not BasisKind.PERIODIC:
        raise DomainError("KdVB lives on the periodic zero-mean basis")
    if not (h_norm >= 0 and beta > 0):
        raise DomainError("kdvb_thresholds needs h_norm >= 0 and beta > 0")
    lam1 = _lambda(basis, 1)
    h2 = h_norm**2
    rho1 = 2 / lam1**2 * h2
    rho2 = 2 ** (-1 / 3) * (3 * beta**4 * rho1 ** (7 / 4)) ** (4 / 3) + 5 * h2 + (lam1 / 3) ** 4 + 1
    M0 = 8 / 3 * rho2 + 16 / 15 * (beta**3 * rho1 ** (5 / 2) / 3) ** (5 / 4)
    beta1 = beta ** (24 / 7)

    def chain(m):
        M1 = (m * rho1 + h2 / lam1) / lam1
        M2 = m * M0 + beta1 * M1 ** (11 / 7) + 2 * h2
        M3 = 2 * beta**4 * lam1 ** (-3 / 4) * (M0**2 + 0.25 * M2**2)
        return M1, M2, M3

    fp = fixed_point(lambda m: chain(m)[2] / 2, mu0)
    notes = []
    if not fp.converged:
        notes.append("mu = M3(mu)/2 has no reachable fixed point: M3 grows faster than 2 mu")
    mu_min = fp.value
    mu_eval = float(mu) if mu is not None else mu_min
    constants = dict(rho1=rho1, rho2=rho2, M0=M0, beta1=beta1, beta=beta, lambda1=lam1)
    fpd = dict(mu_min=mu_min, converged=fp.converged, iterations=fp.iterations, mu0=mu0,
               trace=list(fp.trace))
    if math.isfinite(mu_eval):
        M1, M2, M3 = chain(mu_eval)
        constants.update(M1=M1, M2=M2, M3=M3)
        N_min = least_gap_modes(basis, 2 * M3, n_min=1)
        N_eval = N_min if N is None else int(N)
        conditions = [Condition("gain", M3, "<=", 2 * mu_eval)]
        if N_eval is not None:
            conditions.append(Condition("spectral_gap", M3 / _lambda(basis, N_eval + 1), "<=", 0.5))
            conditions.append(_feedback_modes(N_eval))
    else:
        N_min, N_eval = None, N
        conditions = [_NO_FIXED_POINT]
    return ThresholdReport(
        "KdVB", constants, tuple(conditions), mu_eval, N_eval, mu_min, N_min, None,
        rate_form="exponential_unquantified", rate_quantity="l2_norm",
        fixed_point=fpd, notes=tuple(notes),
    )


def sdwave_E0(basis: Basis, nu: float, b: float, a: float, p: float, mu: float, N: int,
              u0: SpectralField | None, u1: SpectralField | None) -> float:
    """The explicit initial constant of the strongly damped wave decay estimate."""
    zero = SpectralField.zeros(basis)
    u0 = zero if u0 is None else u0
    u1 = zero if u1 is None else u1
    c0 = np.asarray(u0.coeffs)
    if np.any(c0):
        ops = spectral_ops(basis, pad_for_degree(max(2, math.ceil(p))))
        lp = ops.mean_power(c0, p)
    else:
        lp = 0.0
    low = basis.low_mode_mask(min(N, basis.n_modes))
    lowsum = float(np.sum(basis.weights * np.abs(np.where(low, c0, 0)) ** 2))
    return (0.5 * u1.norm2() + nu / 2 * u0.grad_norm2() + (b**2 / 4 - a / 2) * u0.norm2()
            + lp / p + mu / 2 * lowsum + b / 2 * u0.inner(u1))


def sdwave_thresholds(b: float, nu: float, a: float, m0: float, p: float, basis: Basis,
                      u0: SpectralField | None = None, u1: SpectralField | None = None,
                      mu: float | None = None, N: int | None = None, d0: float = 1.0,
                      C: float = 1.0, epsilon: float | None = None) -> ThresholdReport:
    """Conditions and the initial constant ``E0`` for the strongly damped wave system.

    ``u0, u1`` are the initial displacement and velocity of the tracking error.
    ``epsilon`` (default ``b/2``) and the interpolation constant ``C`` only
    enter the admissibility bound ``epsilon <= min(b/2, b C / (C + d0))``,
    reported as a constant; the guaranteed rate is ``b/2`` regardless.
    """
    if not (b > 0 and nu > 0 and m0 > 0 and p >= 2 and a >= 0):
        raise DomainError("sdwave_thresholds needs b, nu, m0 > 0, a >= 0 and p >= 2")
    gap = 2 * a + 0.75 * b**2
    mu_min = a + 0.75 * b**2
    N_min = least_gap_modes(basis, gap / nu)
    mu_eval = mu_min if mu is None else float(mu)
    N_eval = N_min if N is None else int(N)
    eps = b / 2 if epsilon is None else float(epsilon)
    eps_max = min(b / 2, b * C / (C + d0))
    E0 = sdwave_E0(basis, nu, b, a, p, mu_eval, N_eval, u0, u1)
    conditions = (
        Condition("spectral_gap", nu, ">=", gap / _lambda(basis, N_eval + 1)),
        Condition("gain", mu_eval, ">=", mu_min),
    )
    constants = dict(E0=E0, rate=b / 2, a=a, p=p, m0=m0, d0=d0, epsilon=eps, epsilon_max=eps_max,
                     C=C, lambda1=_lambda(basis, 1))
    return ThresholdReport(
        "SDWave", constants, conditions, mu_eval, N_eval, mu_min, N_min, b / 2,
        rate_quantity="wave_energy",
    )


def ndwave_frontier(m0: float, mus, basis: Basis) -> list[int | None]:
    """Least ``N`` with ``lambda_{N+1} >= 2 mu m0`` for each ``mu``."""
    return [least_gap_modes(basis, 2 * m * m0) for m in mus]


def ndwave_thresholds(m0: float, mu: float, basis: Basis, N: int | None = None) -> ThresholdReport:
    """Conditions for the wave equation with nonlinear damping.

    Decay is algebraic, ``E(t) <= C t^{-1/2}`` with ``C`` not explicit.
    """
    if not m0 > 0 or not mu >= 0:
        raise DomainError("ndwave_thresholds needs m0 > 0 and mu >= 0")
    N_min = least_gap_modes(basis, 2 * mu * m0)
    N_eval = N_min if N is None else int(N)
    conditions = (
        Condition("gain", mu, ">=", m0),
        Condition("spectral_gap", _lambda(basis, N_eval + 1), ">=", 2 * mu * m0),
    )
    constants = dict(m0=m0, mu_min=m0, lambda_N1_min=2 * mu * m0, lambda1=_lambda(basis, 1))
    return ThresholdReport(
        "NDWave", constants, conditions, float(mu), N_eval, m0, N_min, None,
        rate_form="t^-1/2", rate_quantity="energy",
    )
