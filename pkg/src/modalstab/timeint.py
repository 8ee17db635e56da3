"""Time stepping for the controlled models.

The linear part of every model is diagonal (or 2x2 block-diagonal) in the
eigenbasis, so the IMEX schemes invert it mode by mode.  Nonlinear terms,
forcing and the feedback force are explicit.  The controlled state ``u`` and
its reference ``v`` are stacked along a leading batch axis and advanced
together with the same scheme and step.
"""

from __future__ import annotations

import csv
import enum
import io
import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .control import ControllerSpec, ControllerVariant
from .models import Dynamics, ModelKind, ModelSpec, energy
from .spectral import DomainError, SpectralField, mode_amplitudes, spectral_ops, weighted_inner, weighted_norm2

RK4_STABILITY = 2.78


class Scheme(str, enum.Enum):
    IMEX_CNAB2 = "IMEX_CNAB2"
    IMEX_EULER = "IMEX_Euler"
    RK4 = "RK4Reference"


@dataclass(frozen=True)
class IntegratorSpec:
    scheme: Scheme = Scheme.IMEX_CNAB2
    dt: float = 1e-3
    t_end: float = 1.0
    record_every: int = 1
    auto_reduce: bool = True

    def __post_init__(self):
        object.__setattr__(self, "scheme", Scheme(self.scheme))
        if not self.dt > 0:
            raise DomainError("dt must be positive")
        if not self.t_end > 0:
            raise DomainError("t_end must be positive")
        if int(self.record_every) != self.record_every or self.record_every < 1:
            raise DomainError("record_every must be a positive integer")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))


class NumericalBlowup(RuntimeError):
    """Non-finite state; carries the last finite state for post-mortem."""

    def __init__(self, step: int, time: float, last_state: np.ndarray):
        super().__init__(f"non-finite state at step {step} (t = {time:.6g})")
        self.step = step
        self.time = time
        self.last_state = last_state


@dataclass(frozen=True, eq=False)
class RunRecord:
    """Recorded time series of one simulation.

    ``data`` maps column names to arrays sampled at ``data["t"]``; ``final``
    holds the final coefficient arrays (not serialized); ``meta`` is the JSON
    sidecar.
    """

    data: dict[str, np.ndarray]
    meta: dict
    final: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def t(self) -> np.ndarray:
        return self.data["t"]

    @property
    def columns(self) -> list[str]:
        return list(self.data)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.data[name]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        cols = [self.data[c] for c in self.columns]
        for row in zip(*cols):
            w.writerow([repr(float(x)) for x in row])
        return buf.getvalue()

    def write(self, out_dir, stem: str = "run") -> tuple[Path, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        csv_path, meta_path = out / f"{stem}.csv", out / f"{stem}.meta.json"
        csv_path.write_text(self.to_csv())
        meta_path.write_text(json.dumps(self.meta, indent=2, sort_keys=True) + "\n")
        return csv_path, meta_path


# ----------------------------------------------------------------------------
# coupled system


class _System:
    """Stacked ``(u[, v])`` system with the feedback force acting on ``u`` only."""

    def __init__(self, model: ModelSpec, ctrl: ControllerSpec | None, tracking: bool):
        self.model = model
        self.dyn = Dynamics(model)
        self.linear = self.dyn.linear
        self.second = self.dyn.second_order
        self.tracking = tracking
        self.ctrl = ctrl
        basis = model.basis
        self.phi = None
        self.gain = None
        if ctrl is not None and ctrl.mu > 0 and ctrl.N > 0:
            self.gain = ctrl.gain_mask(basis)
            if not self.second:
                self.gain = self.gain / self.dyn.mass
        if ctrl is not None and ctrl.variant is ControllerVariant.STEADY_STATE:
            self.phi = np.asarray(ctrl.target.coeffs, dtype=basis.dtype)

    @property
    def explicit_stiffness(self) -> float:
        return 0.0 if self.gain is None else float(np.max(self.gain))

    def _error(self, S):
        if self.phi is not None:
            return S[0] - (np.stack([self.phi, np.zeros_like(self.phi)]) if self.second else self.phi)
        return S[0] - S[1]

    def explicit(self, S: np.ndarray) -> np.ndarray:
        out = self.dyn.explicit(S)
        if self.gain is not None:
            e = self._error(S)
            if self.second:
                drive = e[0] + e[1] if self.ctrl.uses_velocity else e[0]
                out[0, 1] -= self.gain * drive
            else:
                out[0] -= self.gain * e
        return out

    def full(self, S: np.ndarray) -> np.ndarray:
        return self.linear.apply(S) + self.explicit(S)


def _step_imex_euler(sys: _System, S, dt, N0=None):
    N0 = sys.explicit(S) if N0 is None else N0
    return sys.linear.solve(S + dt * N0, dt), N0


def _step_cnab2(sys: _System, S, dt, N_prev, N0=None):
    N0 = sys.explicit(S) if N0 is None else N0
    rhs = S + 0.5 * dt * sys.linear.apply(S) + dt * (1.5 * N0 - 0.5 * N_prev)
    return sys.linear.solve(rhs, 0.5 * dt), N0


def _step_cn_heun(sys: _System, S, dt):
    """Second-order start for CNAB2: Crank-Nicolson on the linear part, Heun on
    the explicit part.  Unlike a backward-Euler start it leaves the skew
    (dispersive) modes unimodular."""
    N0 = sys.explicit(S)
    pred, _ = _step_cnab2(sys, S, dt, N0, N0)
    avg = 0.5 * (N0 + sys.explicit(pred))
    return _step_cnab2(sys, S, dt, avg, avg)[0], N0


def _step_rk4(sys: _System, S, dt):
    k1 = sys.full(S)
    k2 = sys.full(S + 0.5 * dt * k1)
    k3 = sys.full(S + 0.5 * dt * k2)
    k4 = sys.full(S + dt * k3)
    return S + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


# ----------------------------------------------------------------------------
# recording


class _Recorder:
    def __init__(self, model: ModelSpec, ctrl: ControllerSpec | None, tracking: bool,
                 n_modes: int, epsilon: float | None):
        self.model = model
        self.basis = model.basis
        self.ctrl = ctrl
        self.tracking = tracking
        self.steady = ctrl is not None and ctrl.variant is ControllerVariant.STEADY_STATE
        self.has_z = tracking or self.steady
        self.n_modes = min(n_modes, self.basis.n_modes)
        self.epsilon = epsilon
        self.rows: dict[str, list[float]] = {}
        self.lam = self.basis.eigenvalues
        self.h = np.asarray(model.forcing.coeffs)
        self.mean_ops = spectral_ops(self.basis, 1.0) if not self.basis.is_2d else None

    def _put(self, name, value):
        self.rows.setdefault(name, []).append(float(value))

    def _first_order(self, prefix, c):
        b = self.basis
        l2 = weighted_norm2(b, c)
        g2 = weighted_norm2(b, c, self.lam)
        self._put(f"{prefix}_norm", math.sqrt(l2))
        self._put(f"{prefix}_grad", math.sqrt(g2))
        kind = self.model.kind
        e = l2 if kind is ModelKind.KDVB else l2 + self.model.alpha**2 * g2
        self._put(f"{prefix}_energy", e)

    def _second_order(self, prefix, c, ct):
        b = self.basis
        self._put(f"{prefix}_norm", math.sqrt(weighted_norm2(b, c)))
        self._put(f"{prefix}_grad", math.sqrt(weighted_norm2(b, c, self.lam)))
        self._put(f"{prefix}_t_norm", math.sqrt(weighted_norm2(b, ct)))

    def record(self, t: float, S: np.ndarray):
        b = self.basis
        m = self.model
        self._put("t", t)
        u = S[0]
        if not m.kind.second_order:
            self._first_order("u", u)
            self._put("u_h_inner", weighted_inner(b, self.h, u))
            if self.mean_ops is not None and b.kind.value.startswith("Periodic"):
                L = b.length
                self._put("u_mean", L * float(np.mean(self.mean_ops.values(u))))
            if self.tracking:
                self._first_order("v", S[1])
            if self.has_z:
                z = u - (S[1] if self.tracking else self.ctrl.target.coeffs)
                self._first_order("z", z)
                amps = mode_amplitudes(b, z, self.n_modes)
        else:
            self._second_order("u", u[0], u[1])
            if self.tracking:
                self._second_order("v", S[1][0], S[1][1])
            if self.has_z:
                if self.tracking:
                    z, zt = u[0] - S[1][0], u[1] - S[1][1]
                else:
                    z, zt = u[0] - self.ctrl.target.coeffs, u[1]
                self._second_order("z", z, zt)
                self._put("wave_energy", weighted_norm2(b, zt) + weighted_norm2(b, z, self.lam))
                mu = self.ctrl.mu if self.ctrl else 0.0
                N = self.ctrl.N if self.ctrl else 0
                phi = self.ctrl.target if self.steady else None
                E = energy(m, (SpectralField(b, z), SpectralField(b, zt)), mu=mu, N=N,
                           epsilon=self.epsilon, phi=phi)
                self._put("lyapunov", E["total"])
                amps = mode_amplitudes(b, z, self.n_modes)
        if self.has_z:
            for k, a in enumerate(amps, start=1):
                self._put(f"z_mode_{k}", a)

    def arrays(self) -> dict[str, np.ndarray]:
        return {k: np.asarray(v) for k, v in self.rows.items()}


# ----------------------------------------------------------------------------
# driver


def _as_array(model: ModelSpec, state) -> np.ndarray:
    basis = model.basis
    if model.kind.second_order:
        if not isinstance(state, (tuple, list)) or len(state) != 2:
            raise DomainError(f"{model.kind.value} needs an initial (u, u_t) pair")
        fields = state
    else:
        fields = (state,)
    for f in fields:
        if f.basis != basis:
            raise DomainError("initial state lives on a different basis")
    arr = np.stack([np.asarray(f.coeffs, dtype=basis.dtype) for f in fields])
    return arr if model.kind.second_order else arr[0]


def _warn_trapezoidal_damping(linear, dt: float) -> None:
    """Warn when the trapezoidal rule damps some stiff mode slower than the slowest exact mode.

    The trapezoidal amplification factor tends to modulus one for ``|a dt| >> 1``,
    so strongly damped but stiff (for instance dispersive) modes linger and
    can dominate the late-time decay of a run.
    """
    if linear.block:
        return
    a = np.ravel(np.asarray(linear.a))
    a = a[np.real(a) < 0]
    if a.size == 0:
        return
    z = a * dt
    numerical = -np.log(np.abs((1 + z / 2) / (1 - z / 2))) / dt
    slowest = float(np.min(-np.real(a)))
    if float(np.min(numerical)) < 0.5 * slowest:
        warnings.warn(
            f"dt = {dt:g} is too large for the stiffest linear modes: the trapezoidal step damps them at "
            f"rate {float(np.min(numerical)):.3g}, below the slowest exact rate {slowest:.3g}",
            RuntimeWarning, stacklevel=3)


def advance(
    model: ModelSpec,
    ctrl: ControllerSpec | None,
    state,
    spec: IntegratorSpec,
    reference=None,
    epsilon: float | None = None,
    meta: dict | None = None,
) -> RunRecord:
    """Integrate the controlled model from ``state`` over ``[0, spec.t_end]``.

    ``reference`` is the initial state of the tracked trajectory ``v`` (a
    field, or a ``(v, v_t)`` pair for the wave kinds).  It is required for the
    tracking variants and co-advanced with the same scheme and step.  The
    ``SteadyState`` variant tracks ``ctrl.target`` instead.
    """
    basis = model.basis
    if ctrl is not None:
        ctrl.check_basis(basis)
    tracking = reference is not None
    if ctrl is not None and ctrl.variant is not ControllerVariant.STEADY_STATE and ctrl.mu > 0 and not tracking:
        raise DomainError(f"{ctrl.variant.value} needs a reference trajectory")
    if tracking and ctrl is not None and ctrl.variant is ControllerVariant.STEADY_STATE:
        raise DomainError("SteadyState tracks its fixed target; do not pass a reference")

    parts = [_as_array(model, state)]
    if tracking:
        parts.append(_as_array(model, reference))
    S = np.stack(parts)
    sys = _System(model, ctrl, tracking)

    dt, record_every = spec.dt, spec.record_every
    n_steps = spec.n_steps
    if abs(n_steps * dt - spec.t_end) > 1e-9 * spec.t_end:
        raise DomainError("t_end must be an integer multiple of dt")
    stiff = sys.explicit_stiffness
    if spec.scheme is not Scheme.RK4 and dt * stiff > 1.0:
        msg = f"dt = {dt:g} exceeds 1/mu for the explicit feedback term"
        if not spec.auto_reduce:
            warnings.warn(msg, RuntimeWarning, stacklevel=2)
        else:
            k = math.ceil(dt * stiff)
            dt, n_steps, record_every = dt / k, n_steps * k, record_every * k
            warnings.warn(f"{msg}; reduced to {dt:g}", RuntimeWarning, stacklevel=2)
    if spec.scheme is Scheme.RK4:
        rho = sys.linear.spectral_radius + stiff
        if dt * rho > RK4_STABILITY:
            warnings.warn(f"RK4 step dt = {dt:g} exceeds the stability bound for this model",
                          RuntimeWarning, stacklevel=2)

    if spec.scheme is Scheme.IMEX_CNAB2:
        _warn_trapezoidal_damping(sys.linear, dt)

    N = ctrl.N if ctrl is not None else 0
    rec = _Recorder(model, ctrl, tracking, N + 4, epsilon)
    rec.record(0.0, S)
    N_prev = None
    last = S
    for n in range(1, n_steps + 1):
        if spec.scheme is Scheme.RK4:
            S = _step_rk4(sys, S, dt)
        elif spec.scheme is Scheme.IMEX_EULER:
            S, _ = _step_imex_euler(sys, S, dt)
        elif N_prev is None:
            S, N_prev = _step_cn_heun(sys, S, dt)
        else:
            S, N_prev = _step_cnab2(sys, S, dt, N_prev)
        if not np.all(np.isfinite(S)):
            raise NumericalBlowup(n, n * dt, last)
        last = S
        if n % record_every == 0 or n == n_steps:
            rec.record(n * dt, S)

    final = {"u": S[0][0] if sys.second else S[0]}
    if sys.second:
        final["u_t"] = S[0][1]
    if tracking:
        final["v"] = S[1][0] if sys.second else S[1]
        if sys.second:
            final["v_t"] = S[1][1]
    info = {
        "model": model.kind.value,
        "basis": basis.kind.value,
        "modes": basis.modes,
        "scheme": spec.scheme.value,
        "dt": dt,
        "dt_requested": spec.dt,
        "t_end": spec.t_end,
        "record_every": record_every,
        "steps": n_steps,
        "controller": None if ctrl is None else {"variant": ctrl.variant.value, "mu": ctrl.mu, "N": ctrl.N},
    }
    info.update(meta or {})
    return RunRecord(rec.arrays(), info, final)


# ----------------------------------------------------------------------------
# convergence order


@dataclass(frozen=True)
class OrderCheck:
    status: str  # "ok", "degenerate" or "failed"
    order: float
    orders: tuple[float, ...]
    errors: tuple[float, ...]
    dts: tuple[float, ...]

    def within(self, lo: float, hi: float) -> bool:
        return self.status == "ok" and lo <= self.order <= hi


def richardson_order_check(
    model: ModelSpec,
    ctrl: ControllerSpec | None,
    state,
    dt_list,
    t_end: float = 1.0,
    scheme: Scheme | str = Scheme.IMEX_CNAB2,
    reference=None,
    exact=None,
) -> OrderCheck:
    """Observed convergence order at ``t_end`` over a geometric ``dt`` sequence.

    Without ``exact`` (final coefficient array), errors are the differences of
    successive runs; with it, errors are measured against it directly.
    """
    dts = sorted((float(d) for d in dt_list), reverse=True)
    if len(dts) < 3:
        raise DomainError("need at least three step sizes")
    ratios = [dts[i] / dts[i + 1] for i in range(len(dts) - 1)]
    if max(ratios) - min(ratios) > 1e-9 * max(ratios):
        raise DomainError("step sizes must form a geometric progression")
    r = ratios[0]
    finals = []
    for dt in dts:
        spec = IntegratorSpec(scheme=scheme, dt=dt, t_end=t_end, record_every=10**9, auto_reduce=False)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            rec = advance(model, ctrl, state, spec, reference=reference)
        u = rec.final["u"]
        finals.append(np.concatenate([u.ravel(), rec.final.get("u_t", np.zeros(0)).ravel()]))
    if exact is not None:
        errs = [float(np.linalg.norm(f - np.ravel(exact))) for f in finals]
    else:
        errs = [float(np.linalg.norm(finals[i] - finals[i + 1])) for i in range(len(finals) - 1)]
    scale = max(float(np.linalg.norm(finals[-1])), 1e-300)
    if all(e <= 1e-14 * scale for e in errs) or all(e == 0 for e in errs):
        return OrderCheck("degenerate", math.nan, (), tuple(errs), tuple(dts))
    orders = tuple(math.log(errs[i] / errs[i + 1]) / math.log(r) if errs[i + 1] > 0 else math.inf
                   for i in range(len(errs) - 1))
    monotone = all(errs[i] > errs[i + 1] for i in range(len(errs) - 1))
    status = "ok" if monotone else "failed"
    return OrderCheck(status, orders[-1], orders, tuple(errs), tuple(dts))
