"""Experiment configuration: a strict JSON document and its translation into
model, controller, integrator and initial data."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Annotated, Literal, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from .control import ControllerSpec, steady_state_solve
from .models import DampingSpec, ModelSpec, NonlinearitySpec
from .spectral import Basis, DomainError, SpectralField
from .thresholds import (
    ThresholdReport,
    bbmb_thresholds,
    kdvb_thresholds,
    ndwave_thresholds,
    nsv_thresholds,
    sdwave_thresholds,
)
from .timeint import IntegratorSpec

U64_MAX = 2**64 - 1


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", strict=True, frozen=True)


class BasisConfig(_Strict):
    kind: Literal["SineDirichlet1D", "PeriodicZeroMean1D", "PeriodicZeroMean2DVector"]
    length: float = Field(1.0, gt=0)
    modes: int | None = Field(None, gt=0)


class NonlinearityConfig(_Strict):
    form: Literal["Zero", "Polynomial", "CubicMinusLinear", "Identity"] = "Zero"
    coefficients: list[float] = []
    p: int = Field(2, ge=2)
    m0: float | None = None
    a: float | None = None
    d0: float = 1.0


class DampingConfig(_Strict):
    form: Literal["Linear", "LinearPlusPower"] = "Linear"
    a1: float = 1.0
    a2: float = 0.0
    m: float = 2.0
    a0: float | None = None


class ZeroField(_Strict):
    kind: Literal["Zero"]


class SingleModeField(_Strict):
    kind: Literal["SingleMode"]
    k: int = Field(1, ge=1)
    amplitude: float = 1.0


class RandomSmoothField(_Strict):
    kind: Literal["RandomSmooth"]
    decay_exponent: float = 2.0
    amplitude: float = 1.0


class FromFileField(_Strict):
    kind: Literal["FromFile"]
    path: str


FieldConfig = Annotated[
    Union[ZeroField, SingleModeField, RandomSmoothField, FromFileField], Field(discriminator="kind")
]


class SteadyStateTarget(_Strict):
    """Target found by Newton from ``guess``."""

    kind: Literal["SteadyStateSolve"]
    guess: FieldConfig = ZeroField(kind="Zero")


TargetConfig = Annotated[
    Union[ZeroField, SingleModeField, RandomSmoothField, FromFileField, SteadyStateTarget],
    Field(discriminator="kind"),
]


class ModelConfig(_Strict):
    kind: Literal["NSV2D", "BBMB", "KdVB", "SDWave", "NDWave"]
    basis: BasisConfig
    nu: float = 1.0
    alpha: float = 1.0
    b: float = 1.0
    lam: float = 0.0
    f: NonlinearityConfig = NonlinearityConfig()
    g: DampingConfig = DampingConfig()
    h: FieldConfig = ZeroField(kind="Zero")


class ControllerConfig(_Strict):
    variant: Literal["TrackState", "TrackStatePlusVelocity", "SteadyState"] = "TrackState"
    mu: float = Field(0.0, ge=0)
    N: int = Field(0, ge=0)
    target: TargetConfig | None = None


class IntegratorConfig(_Strict):
    scheme: Literal["IMEX_CNAB2", "IMEX_Euler", "RK4Reference"] = "IMEX_CNAB2"
    dt: float = Field(1e-3, gt=0)
    t_end: float = Field(1.0, gt=0)
    record_every: int = Field(1, ge=1)


class CertifyConfig(_Strict):
    """Constants the threshold calculators need beyond the model itself."""

    b0: float = Field(2.0, gt=0)
    beta: float = Field(2.0, gt=0)
    sobolev_const: float = Field(1.0, gt=0)
    r1_form: Literal["literal", "sharp"] = "literal"
    a: float = Field(0.0, ge=0)
    p: float | None = None
    C: float = Field(1.0, gt=0)
    epsilon: float | None = None


class AnalysisConfig(_Strict):
    series: str | None = None
    window_frac: float = Field(0.2, ge=0, lt=1)
    slack: float = Field(0.05, ge=0, lt=1)
    floor: float = Field(1e-13, gt=0)


class ExperimentConfig(_Strict):
    model: ModelConfig
    controller: ControllerConfig = ControllerConfig()
    integrator: IntegratorConfig = IntegratorConfig()
    seed: int = Field(0, ge=0, le=U64_MAX)
    initial_condition: FieldConfig = RandomSmoothField(kind="RandomSmooth")
    initial_velocity: FieldConfig = ZeroField(kind="Zero")
    reference: FieldConfig | None = ZeroField(kind="Zero")
    reference_velocity: FieldConfig = ZeroField(kind="Zero")
    output_dir: str = "out"
    certify: CertifyConfig = CertifyConfig()
    analysis: AnalysisConfig = AnalysisConfig()


# ----------------------------------------------------------------------------
# parsing and canonical form


def parse_config(text: str) -> ExperimentConfig:
    return ExperimentConfig.model_validate_json(text)


def load_config(path) -> ExperimentConfig:
    return parse_config(Path(path).read_text())


def canonical_json(cfg: ExperimentConfig) -> str:
    return json.dumps(cfg.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))


def config_hash(cfg: ExperimentConfig) -> str:
    return hashlib.sha256(canonical_json(cfg).encode()).hexdigest()


def with_override(cfg: ExperimentConfig, dotted: str, value) -> ExperimentConfig:
    """Copy of ``cfg`` with the field at ``dotted`` (e.g. ``controller.mu``) replaced."""
    doc = cfg.model_dump(mode="json")
    node = doc
    keys = dotted.split(".")
    for k in keys[:-1]:
        if not isinstance(node, dict) or k not in node:
            raise DomainError(f"unknown config field {dotted!r}")
        node = node[k]
    if not isinstance(node, dict) or keys[-1] not in node:
        raise DomainError(f"unknown config field {dotted!r}")
    old = node[keys[-1]]
    if isinstance(old, bool) or not isinstance(old, (int, float)):
        raise DomainError(f"{dotted!r} is not a numeric field")
    if isinstance(old, int) and not float(value).is_integer():
        raise DomainError(f"{dotted!r} takes integers, got {value}")
    node[keys[-1]] = int(value) if isinstance(old, int) else float(value)
    return ExperimentConfig.model_validate(doc, strict=False)


# ----------------------------------------------------------------------------
# building


# child streams of the run seed, one per random input
_STREAMS = ("initial_condition", "initial_velocity", "reference", "reference_velocity", "h", "target")


def _rng(seed: int, role: str) -> np.random.Generator:
    child = np.random.SeedSequence(seed).spawn(len(_STREAMS))[_STREAMS.index(role)]
    return np.random.default_rng(child)


def build_field(spec, basis: Basis, rng: np.random.Generator | None = None, base_dir=".") -> SpectralField:
    if isinstance(spec, ZeroField):
        return SpectralField.zeros(basis)
    if isinstance(spec, SingleModeField):
        return SpectralField.single_mode(basis, spec.k, spec.amplitude)
    if isinstance(spec, RandomSmoothField):
        if rng is None:
            raise DomainError("RandomSmooth needs a seeded generator")
        idx = basis.mode_index
        k = np.where(idx > 0, idx, 1).astype(float)
        if np.issubdtype(basis.dtype, np.complexfloating):
            xi = (rng.standard_normal(basis.shape) + 1j * rng.standard_normal(basis.shape)) / np.sqrt(2.0)
        else:
            xi = rng.standard_normal(basis.shape)
        c = np.where(idx > 0, spec.amplitude * xi * k ** (-spec.decay_exponent), 0.0)
        return SpectralField(basis, c)
    if isinstance(spec, FromFileField):
        p = Path(spec.path)
        if not p.is_absolute():
            p = Path(base_dir) / p
        if p.suffix == ".npy":
            c = np.load(p)
        else:
            doc = json.loads(p.read_text())
            c = np.asarray(doc["re"]) + 1j * np.asarray(doc.get("im", 0.0)) if isinstance(doc, dict) else np.asarray(doc)
        c = np.asarray(c)
        if c.shape != basis.shape:
            raise DomainError(f"{p} holds shape {c.shape}, basis needs {basis.shape}")
        if not np.issubdtype(basis.dtype, np.complexfloating):
            c = c.real
        return SpectralField(basis, c)
    raise DomainError(f"unsupported field spec {spec!r}")


@dataclass(frozen=True, eq=False)
class Experiment:
    config: ExperimentConfig
    model: ModelSpec
    controller: ControllerSpec | None
    state: object
    reference: object
    integrator: IntegratorSpec
    steady_residual: float | None = None


def build_basis(cfg: BasisConfig) -> Basis:
    kw = {} if cfg.modes is None else {"modes": cfg.modes}
    return Basis(cfg.kind, cfg.length, **kw)


def build_model(cfg: ModelConfig, seed: int = 0, base_dir=".") -> ModelSpec:
    basis = build_basis(cfg.basis)
    f = NonlinearitySpec(form=cfg.f.form, coefficients=tuple(cfg.f.coefficients), p=cfg.f.p,
                         m0=cfg.f.m0, a=cfg.f.a, d0=cfg.f.d0)
    g = DampingSpec(form=cfg.g.form, a1=cfg.g.a1, a2=cfg.g.a2, m=cfg.g.m, a0=cfg.g.a0)
    h = build_field(cfg.h, basis, _rng(seed, "h"), base_dir)
    return ModelSpec(cfg.kind, basis, nu=cfg.nu, alpha=cfg.alpha, b=cfg.b, lam=cfg.lam, f=f, g=g, h=h)


def build_experiment(cfg: ExperimentConfig, base_dir=".") -> Experiment:
    """Validate every module precondition and assemble the run inputs."""
    seed = cfg.seed
    model = build_model(cfg.model, seed, base_dir)
    basis = model.basis
    second = model.kind.second_order

    def field(role):
        spec = getattr(cfg, role)
        return build_field(spec, basis, _rng(seed, role), base_dir)

    state = (field("initial_condition"), field("initial_velocity")) if second else field("initial_condition")

    cc = cfg.controller
    target = None
    residual = None
    if isinstance(cc.target, SteadyStateTarget):
        guess = build_field(cc.target.guess, basis, _rng(seed, "target"), base_dir)
        sol = steady_state_solve(model, guess)
        target, residual = sol.phi, sol.residual
    elif cc.target is not None:
        target = build_field(cc.target, basis, _rng(seed, "target"), base_dir)
    ctrl = ControllerSpec(cc.variant, cc.mu, cc.N, target)
    ctrl.check_basis(basis)

    reference = None
    if cc.variant != "SteadyState" and cfg.reference is not None:
        v0 = field("reference")
        reference = (v0, field("reference_velocity")) if second else v0
    ic = cfg.integrator
    spec = IntegratorSpec(ic.scheme, ic.dt, ic.t_end, ic.record_every)
    if abs(spec.n_steps * spec.dt - spec.t_end) > 1e-9 * spec.t_end:
        raise DomainError("integrator.t_end must be an integer multiple of integrator.dt")
    return Experiment(cfg, model, ctrl, state, reference, spec, residual)


def initial_error(exp: Experiment):
    """``(z0, z1)`` for the wave kinds, ``z0`` otherwise (the state minus its reference)."""
    model, ctrl = exp.model, exp.controller
    second = model.kind.second_order
    if ctrl is not None and ctrl.target is not None and exp.reference is None:
        ref = (ctrl.target, SpectralField.zeros(model.basis)) if second else ctrl.target
    elif exp.reference is not None:
        ref = exp.reference
    else:
        ref = (SpectralField.zeros(model.basis),) * 2 if second else SpectralField.zeros(model.basis)
    if second:
        return exp.state[0] - ref[0], exp.state[1] - ref[1]
    return exp.state - ref


def certificate(exp: Experiment) -> ThresholdReport:
    """Threshold report at the configured ``(mu, N)``."""
    cfg, m = exp.config.certify, exp.model
    mu, N = exp.controller.mu, exp.controller.N
    h_norm = m.forcing.norm()
    kind = m.kind.value
    if kind == "NSV2D":
        return nsv_thresholds(m.nu, m.alpha, h_norm, m.basis, b0=cfg.b0, mu=mu, N=N)
    if kind == "BBMB":
        return bbmb_thresholds(m.f, h_norm, m.basis, sobolev_const=cfg.sobolev_const, mu=mu, N=N,
                               r1_form=cfg.r1_form)
    if kind == "KdVB":
        return kdvb_thresholds(h_norm, m.basis, beta=cfg.beta, mu=mu, N=N)
    if kind == "SDWave":
        z0, z1 = initial_error(exp)
        p = cfg.p if cfg.p is not None else m.f.p
        return sdwave_thresholds(m.b, m.nu, cfg.a, m.f.m0, p, m.basis, z0, z1, mu=mu, N=N,
                                 d0=m.f.d0, C=cfg.C, epsilon=cfg.epsilon)
    return ndwave_thresholds(m.f.m0, mu, m.basis, N=N)


def json_schema() -> dict:
    return ExperimentConfig.model_json_schema()
