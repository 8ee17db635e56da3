"""Eigenbases of the Laplacian and the spectral machinery built on them.

Three bases are supported:

``SineDirichlet1D``
    ``w_k(x) = sqrt(2/L) sin(k pi x / L)`` on ``(0, L)``, ``lambda_k = (k pi / L)**2``.
    Coefficients are real.
``PeriodicZeroMean1D``
    complex exponentials ``exp(2 pi i k x / L) / sqrt(L)`` for ``k = 1..M``; the
    conjugate modes ``-k`` are implied, so a stored coefficient stands for a pair
    of real eigenfunctions.  ``lambda_k = (2 pi k / L)**2``.
``PeriodicZeroMean2DVector``
    divergence-free velocity fields on ``[0, L]**2`` stored in the Stokes
    eigenbasis ``i k_perp / |k| exp(i k.x) / L``.  Coefficients live on the
    ``rfft2`` layout ``(M, M // 2 + 1)``; Nyquist rows/columns and ``k = 0`` are
    structurally zero.

Every coefficient is an orthonormal-basis coordinate, so ``||u||**2`` is the
multiplicity-weighted sum of ``|c|**2`` over the stored entries.
"""

from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
import scipy.fft as sfft
from scipy.integrate import trapezoid
from scipy.optimize import minimize_scalar


class DomainError(ValueError):
    """Raised when an argument violates an operation's preconditions."""


class BasisKind(str, enum.Enum):
    SINE = "SineDirichlet1D"
    PERIODIC = "PeriodicZeroMean1D"
    PERIODIC_2D = "PeriodicZeroMean2DVector"


DEFAULT_MODES = {BasisKind.SINE: 128, BasisKind.PERIODIC: 128, BasisKind.PERIODIC_2D: 64}


def _sort_key_2d(kx: int, ky: int) -> tuple[int, int, int]:
    return (kx * kx + ky * ky, kx, ky)


@dataclass(frozen=True)
class Basis:
    """An eigenbasis of ``-Laplacian`` truncated at resolution ``modes``.

    For the 2D kind ``modes`` is the number of grid points per direction; the
    number of distinct controllable modes is :attr:`n_modes`.
    """

    kind: BasisKind
    length: float = 1.0
    modes: int = 128

    def __post_init__(self):
        object.__setattr__(self, "kind", BasisKind(self.kind))
        if not (self.length > 0 and math.isfinite(self.length)):
            raise DomainError(f"basis length must be positive, got {self.length}")
        if int(self.modes) != self.modes or self.modes < 1:
            raise DomainError(f"modes must be a positive integer, got {self.modes}")
        object.__setattr__(self, "modes", int(self.modes))
        object.__setattr__(self, "length", float(self.length))
        if self.kind is BasisKind.PERIODIC_2D and (self.modes < 4 or self.modes % 2):
            raise DomainError("2D resolution must be an even integer >= 4")

    @property
    def is_2d(self) -> bool:
        return self.kind is BasisKind.PERIODIC_2D

    @property
    def shape(self) -> tuple[int, ...]:
        if self.is_2d:
            return (self.modes, self.modes // 2 + 1)
        return (self.modes,)

    @property
    def dtype(self):
        return np.float64 if self.kind is BasisKind.SINE else np.complex128

    @property
    def ndim(self) -> int:
        return len(self.shape)

    @functools.cached_property
    def _integer_wavenumbers(self):
        if self.is_2d:
            ky = np.rint(sfft.fftfreq(self.modes) * self.modes).astype(int)
            kx = np.arange(self.modes // 2 + 1)
            return kx[None, :], ky[:, None]
        return np.arange(1, self.modes + 1)

    @functools.cached_property
    def wavenumbers(self):
        """Physical wavenumbers: ``k pi / L`` (sine), ``2 pi k / L`` (periodic);
        a pair ``(kx, ky)`` of broadcastable arrays in 2D."""
        if self.is_2d:
            kx, ky = self._integer_wavenumbers
            s = 2 * np.pi / self.length
            return s * kx, s * ky
        k = self._integer_wavenumbers
        if self.kind is BasisKind.SINE:
            return k * np.pi / self.length
        return 2 * np.pi * k / self.length

    @functools.cached_property
    def valid(self) -> np.ndarray:
        if not self.is_2d:
            return np.ones(self.shape, dtype=bool)
        kx, ky = self._integer_wavenumbers
        half = self.modes // 2
        mask = (np.abs(ky) < half) & (kx < half)
        mask = mask & ~((kx == 0) & (ky == 0))
        return np.broadcast_to(mask, self.shape).copy()

    @functools.cached_property
    def eigenvalues(self) -> np.ndarray:
        """``lambda`` for every stored entry (0 on structurally-zero entries)."""
        if self.is_2d:
            kx, ky = self.wavenumbers
            lam = kx**2 + ky**2
            return np.where(self.valid, lam, 0.0)
        return self.wavenumbers**2

    @functools.cached_property
    def weights(self) -> np.ndarray:
        """Multiplicity of each stored entry in ``||u||**2 = sum(w |c|**2)``."""
        if self.kind is BasisKind.SINE:
            return np.ones(self.shape)
        if self.kind is BasisKind.PERIODIC:
            return np.full(self.shape, 2.0)
        kx, _ = self._integer_wavenumbers
        w = np.where(kx > 0, 2.0, 1.0) * np.ones(self.shape)
        return np.where(self.valid, w, 0.0)

    @functools.cached_property
    def mode_index(self) -> np.ndarray:
        """1-based position of each entry in the eigenvalue ordering (0 = unused).

        In 2D a mode is a ``+-k`` pair; both entries of a pair in the ``kx = 0``
        column carry the same index.
        """
        if not self.is_2d:
            return np.arange(1, self.modes + 1)
        kx, ky = self._integer_wavenumbers
        idx = np.zeros(self.shape, dtype=int)
        entries = []
        for iy in range(self.shape[0]):
            for ix in range(self.shape[1]):
                if not self.valid[iy, ix]:
                    continue
                kxi, kyi = int(kx[0, ix]), int(ky[iy, 0])
                if kxi > 0 or kyi > 0:
                    entries.append((_sort_key_2d(kxi, kyi), iy, ix))
        entries.sort()
        for n, (_, iy, ix) in enumerate(entries, start=1):
            idx[iy, ix] = n
            if ix == 0:
                idx[(-iy) % self.modes, 0] = n
        return idx

    @property
    def n_modes(self) -> int:
        """Number of distinct modes (the largest admissible controller ``N``)."""
        if self.is_2d:
            return int(self.mode_index.max())
        return self.modes

    @functools.cached_property
    def sorted_eigenvalues(self) -> np.ndarray:
        if not self.is_2d:
            return self.eigenvalues.copy()
        lam = np.zeros(self.n_modes)
        sel = self.mode_index > 0
        lam[self.mode_index[sel] - 1] = self.eigenvalues[sel]
        return lam

    def low_mode_mask(self, N: int) -> np.ndarray:
        return (self.mode_index >= 1) & (self.mode_index <= N)

    def symmetrize(self, coeffs: np.ndarray) -> np.ndarray:
        """Zero structurally-absent entries and enforce Hermitian symmetry of the
        ``kx = 0`` column (2D only; identity otherwise)."""
        if not self.is_2d:
            return coeffs
        out = np.where(self.valid, coeffs, 0.0)
        M = self.modes
        half = M // 2
        col = out[..., :, 0]
        for iy in range(1, half):
            col[..., M - iy] = np.conj(col[..., iy])
        return out


def eigenvalue(basis: Basis, k: int) -> float:
    """The ``k``-th eigenvalue (1-based) of ``-Laplacian`` on ``basis``."""
    if int(k) != k or not 1 <= k <= basis.n_modes:
        raise DomainError(f"eigenvalue index {k} outside 1..{basis.n_modes}")
    return float(basis.sorted_eigenvalues[int(k) - 1])


@functools.lru_cache(maxsize=64)
def _disk_eigenvalues(length: float, count: int) -> np.ndarray:
    radius = int(math.sqrt(2 * count / math.pi)) + 2
    while True:
        pairs = [
            (kx, ky)
            for kx in range(0, radius + 1)
            for ky in range(-radius, radius + 1)
            if (kx > 0 or ky > 0) and kx * kx + ky * ky < radius * radius
        ]
        if len(pairs) >= count:
            break
        radius *= 2
    pairs.sort(key=lambda p: _sort_key_2d(*p))
    s = (2 * np.pi / length) ** 2
    return np.array([s * (kx * kx + ky * ky) for kx, ky in pairs[:count]])


def analytic_eigenvalue(basis: Basis, k: int) -> float:
    """``lambda_k`` of the infinite-dimensional operator (no resolution cap).

    Threshold calculators use this, since a spectral-gap condition may call for
    more modes than a given discretization resolves.
    """
    if int(k) != k or k < 1:
        raise DomainError(f"eigenvalue index must be >= 1, got {k}")
    if basis.kind is BasisKind.SINE:
        return (k * np.pi / basis.length) ** 2
    if basis.kind is BasisKind.PERIODIC:
        return (2 * np.pi * k / basis.length) ** 2
    return float(_disk_eigenvalues(basis.length, max(64, 2 ** math.ceil(math.log2(k))))[k - 1])


# ----------------------------------------------------------------------------
# fields


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Immutable coefficient vector on a :class:`Basis`."""

    basis: Basis
    coeffs: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=self.basis.dtype)
        if c.shape != self.basis.shape:
            raise DomainError(f"coefficient shape {c.shape} != basis shape {self.basis.shape}")
        c = self.basis.symmetrize(c)
        if not np.all(np.isfinite(c)):
            raise DomainError("coefficients must be finite")
        c.flags.writeable = False
        object.__setattr__(self, "coeffs", c)

    # constructors ---------------------------------------------------------

    @classmethod
    def zeros(cls, basis: Basis, time: float = 0.0) -> "SpectralField":
        return cls(basis, np.zeros(basis.shape, dtype=basis.dtype), time)

    @classmethod
    def single_mode(cls, basis: Basis, k: int, amplitude: float = 1.0) -> "SpectralField":
        """``amplitude`` times the (real, unit-norm) eigenfunction of mode ``k``.

        Periodic modes use the cosine member of the pair; in 2D it is the
        first entry of mode ``k`` in the sorted ordering.
        """
        if not 1 <= k <= basis.n_modes:
            raise DomainError(f"mode {k} outside 1..{basis.n_modes}")
        c = np.zeros(basis.shape, dtype=basis.dtype)
        sel = basis.mode_index == k
        if basis.kind is BasisKind.SINE:
            c[sel] = amplitude
        else:
            # a real unit eigenfunction split over the stored conjugate entries
            c[sel] = amplitude / math.sqrt(2.0)
        return cls(basis, c)

    @classmethod
    def from_function(cls, basis: Basis, func: Callable, n_quad: int | None = None) -> "SpectralField":
        """Galerkin projection of a scalar function of ``x`` (1D bases)."""
        L = basis.length
        if basis.kind is BasisKind.SINE:
            n = n_quad or max(8 * basis.modes, 512)
            xg, wg = np.polynomial.legendre.leggauss(n)
            x = 0.5 * L * (xg + 1)
            w = 0.5 * L * wg
            fx = np.asarray(func(x), dtype=float)
            k = basis._integer_wavenumbers
            phi = math.sqrt(2 / L) * np.sin(np.outer(k, x) * np.pi / L)
            return cls(basis, phi @ (w * fx))
        if basis.kind is BasisKind.PERIODIC:
            n = n_quad or max(8 * basis.modes, 512)
            x = np.arange(n) * L / n
            fhat = sfft.rfft(np.asarray(func(x), dtype=float), norm="forward")
            return cls(basis, math.sqrt(L) * fhat[1 : basis.modes + 1])
        raise DomainError("use from_velocity for 2D vector bases")

    @classmethod
    def from_velocity(cls, basis: Basis, func: Callable, n_grid: int | None = None) -> "SpectralField":
        """Leray-projected Galerkin coefficients of ``func(x, y) -> (ux, uy)``."""
        if not basis.is_2d:
            raise DomainError("from_velocity requires a 2D vector basis")
        n = n_grid or 2 * basis.modes
        L = basis.length
        x = np.arange(n) * L / n
        X, Y = np.meshgrid(x, x, indexing="xy")
        ux, uy = func(X, Y)
        ux = np.broadcast_to(np.asarray(ux, float), X.shape)
        uy = np.broadcast_to(np.asarray(uy, float), X.shape)
        ops = spectral_ops(basis, n / basis.modes)
        uxh = sfft.rfft2(ux, norm="forward")
        uyh = sfft.rfft2(uy, norm="forward")
        return cls(basis, ops.leray(ops.unpad(uxh), ops.unpad(uyh)))

    # arithmetic -----------------------------------------------------------

    def _check(self, other: "SpectralField"):
        if not isinstance(other, SpectralField) or other.basis != self.basis:
            raise DomainError("fields live on different bases")

    def __add__(self, other):
        self._check(other)
        return SpectralField(self.basis, self.coeffs + other.coeffs, self.time)

    def __sub__(self, other):
        self._check(other)
        return SpectralField(self.basis, self.coeffs - other.coeffs, self.time)

    def __neg__(self):
        return SpectralField(self.basis, -self.coeffs, self.time)

    def __mul__(self, scalar):
        return SpectralField(self.basis, self.coeffs * scalar, self.time)

    __rmul__ = __mul__

    # norms ----------------------------------------------------------------

    def inner(self, other: "SpectralField") -> float:
        self._check(other)
        return weighted_inner(self.basis, self.coeffs, other.coeffs)

    def norm2(self) -> float:
        return weighted_norm2(self.basis, self.coeffs)

    def norm(self) -> float:
        return math.sqrt(self.norm2())

    def grad_norm2(self) -> float:
        return weighted_norm2(self.basis, self.coeffs, self.basis.eigenvalues)

    def grad_norm(self) -> float:
        return math.sqrt(self.grad_norm2())

    def lap_norm2(self) -> float:
        """``||Laplacian u||**2``."""
        return weighted_norm2(self.basis, self.coeffs, self.basis.eigenvalues**2)

    def mode_amplitudes(self, n: int | None = None) -> np.ndarray:
        return mode_amplitudes(self.basis, self.coeffs, n)

    def to_physical(self, pad: float = 2.0):
        """Grid and values; ``(x, u)`` in 1D, ``(x, ux, uy)`` in 2D."""
        ops = spectral_ops(self.basis, pad)
        if self.basis.is_2d:
            ux, uy = ops.velocity(self.coeffs)
            return ops.grid, ux, uy
        return ops.grid, ops.values(self.coeffs)


def weighted_norm2(basis: Basis, c: np.ndarray, scale=None) -> float:
    w = basis.weights if scale is None else basis.weights * scale
    return float(np.sum(w * (c.real**2 + c.imag**2)))


def weighted_inner(basis: Basis, a: np.ndarray, b: np.ndarray) -> float:
    return float(np.sum(basis.weights * (a * np.conj(b)).real))


def mode_amplitudes(basis: Basis, c: np.ndarray, n: int | None = None) -> np.ndarray:
    """``sqrt(sum |(u, w)|**2)`` over the eigenfunctions of each of the first ``n`` modes."""
    n = basis.n_modes if n is None else min(n, basis.n_modes)
    if not basis.is_2d:
        return np.sqrt(basis.weights[:n] * np.abs(c[:n]) ** 2)
    idx = basis.mode_index.ravel()
    e = (basis.weights * np.abs(c) ** 2).ravel()
    sel = (idx >= 1) & (idx <= n)
    return np.sqrt(np.bincount(idx[sel] - 1, weights=e[sel], minlength=n))


def project_low_modes(u: SpectralField, N: int) -> SpectralField:
    """Orthogonal projection onto the span of the ``N`` lowest modes."""
    if int(N) != N or N < 0:
        raise DomainError(f"mode count must be a non-negative integer, got {N}")
    if N > u.basis.n_modes:
        raise DomainError(f"N={N} exceeds the {u.basis.n_modes} resolved modes")
    mask = u.basis.low_mode_mask(int(N))
    return SpectralField(u.basis, np.where(mask, u.coeffs, 0), u.time)


# ----------------------------------------------------------------------------
# transforms


def pad_for_degree(degree: int) -> float:
    """Zero-padding factor that makes a degree-``degree`` product alias-free."""
    return max(1.5, (degree + 1) / 2)


@functools.lru_cache(maxsize=128)
def _cos_to_sine(M: int, Q: int, length: float) -> np.ndarray:
    """Matrix mapping cosine coefficients ``0..Q+1`` to sine-basis coefficients.

    ``(cos(n pi x/L), w_m) = sqrt(2 L) * m (1 - (-1)**(m+n)) / (pi (m**2 - n**2))``.
    """
    m = np.arange(1, M + 1)[:, None].astype(float)
    n = np.arange(0, Q + 2)[None, :].astype(float)
    parity = 1 - (-1.0) ** (m + n)
    with np.errstate(divide="ignore", invalid="ignore"):
        T = m * parity / (np.pi * (m**2 - n**2))
    T[m == n] = 0.0
    return math.sqrt(2 * length) * T


class SpectralOps:
    """Physical/spectral transforms for one basis at one padding factor.

    All methods accept coefficient arrays with arbitrary leading batch axes.
    """

    def __init__(self, basis: Basis, pad: float):
        self.basis = basis
        self.pad = pad
        M, L = basis.modes, basis.length
        if basis.kind is BasisKind.SINE:
            self.Q = max(M, int(math.ceil(pad * M)))
            self.grid = np.arange(self.Q + 2) * L / (self.Q + 1)
            self._k = basis._integer_wavenumbers
            self._T = _cos_to_sine(M, self.Q, L)
        elif basis.kind is BasisKind.PERIODIC:
            self.P = 2 * int(math.ceil(pad * (M + 1)))
            self.grid = np.arange(self.P) * L / self.P
            self._ik = 1j * basis.wavenumbers
        else:
            self.P = max(M, 2 * int(math.ceil(pad * M / 2)))
            self.grid = np.arange(self.P) * L / self.P
            kx, ky = basis.wavenumbers
            self._kx = kx * np.ones(basis.shape)
            self._ky = ky * np.ones(basis.shape)
            kk = np.sqrt(self._kx**2 + self._ky**2)
            self._inv_k = np.where(basis.valid, 1.0 / np.where(kk > 0, kk, 1.0), 0.0)

    # --- sine -------------------------------------------------------------

    def _sine_vals(self, a: np.ndarray) -> np.ndarray:
        """Values at ``x_j, j = 0..Q+1`` (endpoints zero)."""
        Q, M, L = self.Q, self.basis.modes, self.basis.length
        ap = np.zeros(a.shape[:-1] + (Q,))
        ap[..., :M] = a
        inner = sfft.dst(ap, type=1, axis=-1) / math.sqrt(2 * L)
        out = np.zeros(a.shape[:-1] + (Q + 2,))
        out[..., 1:-1] = inner
        return out

    def _sine_dx_vals(self, a: np.ndarray) -> np.ndarray:
        """``du/dx`` (a cosine series) at ``x_j, j = 0..Q+1``."""
        Q, M, L = self.Q, self.basis.modes, self.basis.length
        cp = np.zeros(a.shape[:-1] + (Q + 2,))
        cp[..., 1 : M + 1] = a * self.basis.wavenumbers
        return sfft.dct(cp, type=1, axis=-1) / math.sqrt(2 * L)

    def _sine_project(self, odd: np.ndarray | None, even: np.ndarray | None) -> np.ndarray:
        """Sine coefficients of ``odd + even`` given grid values of the parts.

        ``odd`` is the part whose odd extension is smooth (a sine series),
        ``even`` the part whose even extension is (a cosine series).
        """
        Q, M, L = self.Q, self.basis.modes, self.basis.length
        out = None
        if odd is not None:
            s = sfft.dst(odd[..., 1:-1], type=1, axis=-1)[..., :M]
            out = s * math.sqrt(L) / (math.sqrt(2) * (Q + 1))
        if even is not None:
            c = sfft.dct(even, type=1, axis=-1) / (Q + 1)
            c[..., 0] *= 0.5
            c[..., -1] *= 0.5
            e = c @ self._T.T
            out = e if out is None else out + e
        if out is None:
            out = np.zeros(self.basis.shape)
        return out

    # --- periodic 1D -------------------------------------------------------

    def _per_vals(self, c: np.ndarray) -> np.ndarray:
        M, L = self.basis.modes, self.basis.length
        X = np.zeros(c.shape[:-1] + (self.P // 2 + 1,), dtype=complex)
        X[..., 1 : M + 1] = c / math.sqrt(L)
        return sfft.irfft(X, n=self.P, axis=-1, norm="forward")

    def _per_project(self, vals: np.ndarray) -> np.ndarray:
        M, L = self.basis.modes, self.basis.length
        X = sfft.rfft(vals, axis=-1, norm="forward")
        return math.sqrt(L) * X[..., 1 : M + 1]

    # --- 2D -----------------------------------------------------------------

    def pad2(self, a: np.ndarray) -> np.ndarray:
        M, P = self.basis.modes, self.P
        h = M // 2
        out = np.zeros(a.shape[:-2] + (P, P // 2 + 1), dtype=complex)
        out[..., :h, :h] = a[..., :h, :h]
        out[..., P - (h - 1) :, :h] = a[..., M - (h - 1) :, :h]
        return out

    def unpad(self, A: np.ndarray) -> np.ndarray:
        M = self.basis.modes
        P = A.shape[-2]
        h = M // 2
        out = np.zeros(A.shape[:-2] + self.basis.shape, dtype=complex)
        out[..., :h, :h] = A[..., :h, :h]
        out[..., M - (h - 1) :, :h] = A[..., P - (h - 1) :, :h]
        return out

    def velocity_hat(self, s: np.ndarray):
        """Fourier coefficients ``(ux_hat, uy_hat)`` of the velocity, ``u = sum u_hat e^{ik.x}``."""
        L = self.basis.length
        f = 1j * s * self._inv_k / L
        return f * self._ky, -f * self._kx

    def leray(self, nx: np.ndarray, ny: np.ndarray) -> np.ndarray:
        """Stokes-basis coefficients of the divergence-free part of ``(nx, ny)``."""
        L = self.basis.length
        s = -1j * L * (self._ky * nx - self._kx * ny) * self._inv_k
        return np.where(self.basis.valid, s, 0)

    def _phys2(self, a: np.ndarray) -> np.ndarray:
        return sfft.irfft2(self.pad2(a), s=(self.P, self.P), axes=(-2, -1), norm="forward")

    def _spec2(self, v: np.ndarray) -> np.ndarray:
        return self.unpad(sfft.rfft2(v, axes=(-2, -1), norm="forward"))

    def velocity(self, s: np.ndarray):
        ux, uy = self.velocity_hat(s)
        return self._phys2(ux), self._phys2(uy)

    # --- public -------------------------------------------------------------

    def values(self, c: np.ndarray) -> np.ndarray:
        if self.basis.kind is BasisKind.SINE:
            return self._sine_vals(c)
        if self.basis.kind is BasisKind.PERIODIC:
            return self._per_vals(c)
        raise DomainError("use velocity() for 2D fields")

    def dx_values(self, c: np.ndarray) -> np.ndarray:
        if self.basis.kind is BasisKind.SINE:
            return self._sine_dx_vals(c)
        if self.basis.kind is BasisKind.PERIODIC:
            return self._per_vals(c * self._ik)
        raise DomainError("dx_values is 1D only")

    def pointwise(self, c: np.ndarray, func: Callable) -> np.ndarray:
        """Galerkin projection of ``func(u(x))``."""
        u = self.values(c)
        if self.basis.kind is BasisKind.SINE:
            fp, fm = func(u), func(-u)
            return self._sine_project(0.5 * (fp - fm), 0.5 * (fp + fm))
        return self._per_project(func(u))

    def pointwise_dx(self, c: np.ndarray, func: Callable) -> np.ndarray:
        """Galerkin projection of ``func(u) du/dx``."""
        u = self.values(c)
        ux = self.dx_values(c)
        if self.basis.kind is BasisKind.SINE:
            fp, fm = func(u), func(-u)
            # odd part of f times the even du/dx is odd, and vice versa
            return self._sine_project(0.5 * (fp + fm) * ux, 0.5 * (fp - fm) * ux)
        return self._per_project(func(u) * ux)

    def product(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        if self.basis.kind is BasisKind.SINE:
            return self._sine_project(None, self._sine_vals(a) * self._sine_vals(b))
        return self._per_project(self._per_vals(a) * self._per_vals(b))

    def product_dx(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Galerkin projection of ``a * db/dx``."""
        if self.basis.kind is BasisKind.SINE:
            return self._sine_project(self._sine_vals(a) * self._sine_dx_vals(b), None)
        return self._per_project(self._per_vals(a) * self._per_vals(b * self._ik))

    def advection(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Leray projection of ``(a . grad) b`` for 2D Stokes coefficients."""
        axh, ayh = self.velocity_hat(a)
        bxh, byh = self.velocity_hat(b)
        ax, ay = self._phys2(axh), self._phys2(ayh)
        ikx, iky = 1j * self._kx, 1j * self._ky
        nx = ax * self._phys2(ikx * bxh) + ay * self._phys2(iky * bxh)
        ny = ax * self._phys2(ikx * byh) + ay * self._phys2(iky * byh)
        return self.leray(self._spec2(nx), self._spec2(ny))

    def mean_power(self, c: np.ndarray, power: int) -> float:
        """``integral |u|**power dx`` with an alias-free grid for even ``power <= 2*pad``."""
        L = self.basis.length
        if self.basis.kind is BasisKind.SINE:
            v = np.abs(self._sine_vals(c)) ** power
            return float(trapezoid(v, self.grid, axis=-1))
        if self.basis.kind is BasisKind.PERIODIC:
            return float(L * np.mean(np.abs(self._per_vals(c)) ** power, axis=-1))
        ux, uy = self.velocity(c)
        return float(L * L * np.mean((ux**2 + uy**2) ** (power / 2), axis=(-2, -1)))


@functools.lru_cache(maxsize=256)
def spectral_ops(basis: Basis, pad: float = 1.5) -> SpectralOps:
    return SpectralOps(basis, float(pad))


# ----------------------------------------------------------------------------
# nonlinear products


class ProductForm(str, enum.Enum):
    UV = "uv"
    U_DX_V = "u_dx_v"
    ADVECTION_2D = "advection2D"


def nonlinear_product(u: SpectralField, v: SpectralField, form: str | ProductForm) -> SpectralField:
    """Dealiased Galerkin projection of a quadratic nonlinearity.

    ``uv`` is the pointwise product, ``u_dx_v`` is ``u dv/dx`` and
    ``advection2D`` is the Leray projection of ``(u . grad) v``.
    """
    u._check(v)
    form = ProductForm(form)
    basis = u.basis
    if (form is ProductForm.ADVECTION_2D) != basis.is_2d:
        raise DomainError(f"product form {form.value} does not apply to {basis.kind.value}")
    # sine-basis u*v is a cosine series whose cosine transform needs a 2x grid
    pad = 2.0 if (form is ProductForm.UV and basis.kind is BasisKind.SINE) else 1.5
    ops = spectral_ops(basis, pad)
    if form is ProductForm.UV:
        c = ops.product(u.coeffs, v.coeffs)
    elif form is ProductForm.U_DX_V:
        c = ops.product_dx(u.coeffs, v.coeffs)
    else:
        c = ops.advection(u.coeffs, v.coeffs)
    return SpectralField(basis, c, u.time)


def pointwise(u: SpectralField, func: Callable, degree: int = 3) -> SpectralField:
    """Galerkin projection of ``func(u)``; exact for polynomials up to ``degree``."""
    ops = spectral_ops(u.basis, pad_for_degree(degree))
    return SpectralField(u.basis, ops.pointwise(u.coeffs, func), u.time)


def divergence_residual(u: SpectralField) -> float:
    """``max |k . u_hat(k)| / max |k| |u_hat(k)|`` for a 2D field (0 when exact)."""
    if not u.basis.is_2d:
        raise DomainError("divergence is checked for 2D vector fields")
    ops = spectral_ops(u.basis, 1.5)
    ux, uy = ops.velocity_hat(u.coeffs)
    div = np.abs(ops._kx * ux + ops._ky * uy)
    scale = np.max(np.sqrt(ops._kx**2 + ops._ky**2) * np.sqrt(np.abs(ux) ** 2 + np.abs(uy) ** 2))
    return float(div.max() / scale) if scale > 0 else 0.0


# ----------------------------------------------------------------------------
# inequalities


@dataclass(frozen=True)
class IneqConstants:
    """Constants of the Agmon (``c0``), 3D Ladyzhenskaya (``b0``) and 1D
    Gagliardo-Nirenberg (``beta``) inequalities, plus ``lambda1``."""

    lambda1: float
    c0: float = 2.0
    b0: float = 2.0
    beta: float = 2.0

    def __post_init__(self):
        for name in ("lambda1", "c0", "b0", "beta"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be positive")

    @classmethod
    def for_basis(cls, basis: Basis, **kw) -> "IneqConstants":
        return cls(lambda1=eigenvalue(basis, 1), **kw)


def _eval_1d(basis: Basis, c: np.ndarray, x: float) -> float:
    """Exact value of a 1D field at one point."""
    L = basis.length
    k = basis._integer_wavenumbers
    if basis.kind is BasisKind.SINE:
        return float(math.sqrt(2 / L) * np.dot(c, np.sin(k * np.pi * x / L)))
    return float(2 / math.sqrt(L) * np.real(np.dot(c, np.exp(2j * np.pi * k * x / L))))


def _sup_abs_1d(u: SpectralField) -> float:
    """``max |u|``: grid maximum refined by a bounded search around it."""
    x, vals = u.to_physical(pad=8.0)
    j = int(np.argmax(np.abs(vals)))
    lo, hi = x[max(j - 1, 0)], x[min(j + 1, x.size - 1)]
    res = minimize_scalar(lambda s: -abs(_eval_1d(u.basis, u.coeffs, s)), bounds=(lo, hi),
                          method="bounded", options={"xatol": 1e-12 * u.basis.length})
    return max(float(np.abs(vals[j])), -float(res.fun))


class Inequality(str, enum.Enum):
    PF = "PF"
    PFN = "PFN"
    AGMON = "Agmon"
    LAD3 = "Lad3"
    GN = "GN"


class InequalityCheck(NamedTuple):
    lhs: float
    rhs: float
    holds: bool


def check_inequality(
    ineq: str | Inequality, u: SpectralField, consts: IneqConstants, extra: int | None = None
) -> InequalityCheck:
    """Evaluate both sides of a functional inequality on a discrete field.

    ``PF``     ``||u||**2 <= ||grad u||**2 / lambda1``
    ``PFN``    ``sum_{k>N} |(u, w_k)|**2 <= ||grad u||**2 / lambda_{N+1}``  (``extra = N``)
    ``Agmon``  ``max |u|**2 <= c0 ||u|| ||u'||``
    ``Lad3``   ``||u||_{L4}**2 <= b0 ||u||**(1/2) ||grad u||**(3/2)``
    ``GN``     ``||u||_{L4} <= beta ||u||**(7/8) ||u''||**(1/8)``
    """
    ineq = Inequality(ineq)
    basis = u.basis
    if ineq is Inequality.PF:
        lhs, rhs = u.norm2(), u.grad_norm2() / consts.lambda1
    elif ineq is Inequality.PFN:
        if extra is None:
            raise DomainError("PFN needs the mode count N")
        N = int(extra)
        tail = u - project_low_modes(u, N)
        lhs = tail.norm2()
        rhs = u.grad_norm2() / eigenvalue(basis, N + 1)
    elif ineq is Inequality.AGMON:
        if basis.is_2d:
            raise DomainError("the Agmon check is one-dimensional")
        lhs = _sup_abs_1d(u) ** 2
        rhs = consts.c0 * u.norm() * u.grad_norm()
    elif ineq is Inequality.LAD3:
        l4 = spectral_ops(basis, 2.0).mean_power(u.coeffs, 4) ** 0.5
        lhs = l4
        rhs = consts.b0 * u.norm() ** 0.5 * u.grad_norm() ** 1.5
    else:
        if basis.is_2d:
            raise DomainError("the Gagliardo-Nirenberg check is one-dimensional")
        lhs = spectral_ops(basis, 2.0).mean_power(u.coeffs, 4) ** 0.25
        rhs = consts.beta * u.norm() ** 0.875 * u.lap_norm2() ** (1 / 16)
    return InequalityCheck(float(lhs), float(rhs), bool(lhs <= rhs * (1 + 1e-10)))
