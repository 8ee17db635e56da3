"""Spectral-Galerkin laboratory for finite-mode feedback stabilization of dissipative PDEs."""

__version__ = "0.1.0"

from .spectral import Basis, DomainError, SpectralField  # noqa: E402
from .models import DampingSpec, ModelKind, ModelSpec, NonlinearitySpec  # noqa: E402
from .control import ControllerSpec, SteadyStateError, steady_state_solve  # noqa: E402
from .timeint import IntegratorSpec, NumericalBlowup, RunRecord, Scheme, advance  # noqa: E402

__all__ = [
    "Basis",
    "ControllerSpec",
    "DampingSpec",
    "DomainError",
    "IntegratorSpec",
    "ModelKind",
    "ModelSpec",
    "NonlinearitySpec",
    "NumericalBlowup",
    "RunRecord",
    "Scheme",
    "SpectralField",
    "SteadyStateError",
    "advance",
    "steady_state_solve",
]
