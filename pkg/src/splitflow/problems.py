"""Concrete evolution problems: Schrodinger-Poisson, NLS/Hartree and a
1+1-D wave-interaction system.

Torus problems carry their state as a complex array of node values; the
module-level flow functions also accept :class:`TorusField` and return the
same type they were given.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .errors import NeutralityError, NonFiniteStateError
from .torus import (
    LinearPropagator,
    TorusField,
    TorusGrid,
    forward,
    inverse,
    l2_norm,
    poisson_coeffs,
)


def _unwrap(u):
    if isinstance(u, TorusField):
        return u.nodes(), u.grid
    return np.asarray(u, dtype=complex), None


def _wrap(values, grid):
    return values if grid is None else TorusField(grid, values, "nodes")


class TorusProblem:
    """Shared linear part: free Schrodinger flow on the periodic grid."""

    def __init__(self, grid: TorusGrid):
        self.grid = grid
        self._propagator = LinearPropagator(grid.eigenvalues)

    def linear_flow(self, t, u):
        values, g = _unwrap(u)
        return _wrap(self._propagator(t, values), g)

    def norm(self, u) -> float:
        values, _ = _unwrap(u)
        return l2_norm(values)


# --- Schrodinger-Poisson -------------------------------------------------


class SchrodingerPoissonProblem(TorusProblem):
    """``i u_t + u_xx + |u|^2 u + V u = 0`` with ``V_xx = D - |u|^2``."""

    def __init__(self, grid: TorusGrid, D, neutrality_tol: float = 1e-6):
        super().__init__(grid)
        D = np.asarray(D)
        if np.iscomplexobj(D):
            if np.max(np.abs(D.imag)) > 0:
                raise ValueError("background D must be real-valued")
            D = D.real
        self.D = D.astype(float)
        self.D_hat = forward(self.D.astype(complex))
        self.neutrality_tol = neutrality_tol

    def neutrality_residual(self, u) -> float:
        values, _ = _unwrap(u)
        return abs(self.D_hat[0].real - float(np.mean(np.abs(values) ** 2)))

    def check_neutrality(self, u) -> None:
        r = self.neutrality_residual(u)
        if r > self.neutrality_tol:
            raise NeutralityError(r, self.neutrality_tol)

    def potential(self, values: np.ndarray) -> np.ndarray:
        n = np.abs(values) ** 2
        rho_hat = self.D_hat - forward(n.astype(complex))
        return inverse(poisson_coeffs(rho_hat, self.grid.freqs, self.neutrality_tol)).real

    def nonlinear_flow(self, t, u):
        return sp_nonlinear_flow(t, u, self)


def sp_nonlinear_flow(t: float, u, prob: SchrodingerPoissonProblem):
    """``u -> exp(i t (V + |u|^2)) u`` with ``V`` solved from the current ``|u|``."""
    values, g = _unwrap(u)
    if t == 0:
        return u
    n = np.abs(values) ** 2
    v = prob.potential(values)
    return _wrap(np.exp(1j * t * (v + n)) * values, g)


# --- NLS with local and Hartree nonlinearity -----------------------------


def green_kernel(grid: TorusGrid) -> np.ndarray:
    """Kernel coefficients ``(2 pi p)^-2`` (zero mean) in DFT ordering."""
    k = 2 * math.pi * grid.freqs.astype(float)
    w = np.zeros(grid.m)
    nz = grid.freqs != 0
    w[nz] = 1.0 / k[nz] ** 2
    return w


def even_kernel(grid: TorusGrid, coeffs: Sequence[float]) -> np.ndarray:
    """Expand coefficients for |p| = 0, 1, 2, ... into a symmetric DFT array."""
    w = np.zeros(grid.m)
    for p, c in enumerate(coeffs):
        if p > grid.l:
            break
        w[p] = c
        w[-p] = c
    return w


def hartree_term(u, W_hat) -> np.ndarray:
    """Real node values of ``W * |u|^2`` computed coefficient-wise."""
    values, _ = _unwrap(u)
    W_hat = np.asarray(W_hat)
    n_hat = forward((np.abs(values) ** 2).astype(complex))
    return inverse(W_hat * n_hat).real


class NLSProblem(TorusProblem):
    """``i u_t + u_xx + f(|u|^2) u + (W * |u|^2) u = 0``.

    ``f`` maps the intensity array to a real array.  A complex-valued ``f``
    (gain or loss) is accepted but integrated with RK4 instead of the exact
    phase rotation.
    """

    def __init__(
        self,
        grid: TorusGrid,
        f: Callable[[np.ndarray], np.ndarray] | None = None,
        W_hat=None,
        complex_substeps: int = 8,
    ):
        super().__init__(grid)
        self.f = f
        if W_hat is None:
            W_hat = np.zeros(grid.m)
        W_hat = np.asarray(W_hat)
        if np.iscomplexobj(W_hat):
            if np.max(np.abs(W_hat.imag)) > 1e-14 * max(1.0, np.max(np.abs(W_hat))):
                raise ValueError("kernel coefficients must be real")
            W_hat = W_hat.real
        if W_hat.shape != (grid.m,):
            raise ValueError(f"kernel needs {grid.m} coefficients, got {W_hat.shape}")
        if not np.allclose(W_hat, W_hat[(-np.arange(grid.m)) % grid.m], rtol=0, atol=1e-14):
            raise ValueError("kernel coefficients must be symmetric under p -> -p")
        self.W_hat = W_hat.astype(float)
        self.has_kernel = bool(np.any(self.W_hat != 0))
        self.complex_substeps = complex_substeps

    @property
    def is_linear(self) -> bool:
        return self.f is None and not self.has_kernel

    def phase_rate(self, values: np.ndarray) -> np.ndarray:
        """Instantaneous ``f(|u|^2) + W * |u|^2`` (possibly complex)."""
        n = np.abs(values) ** 2
        rate = np.zeros(values.shape, dtype=complex)
        if self.f is not None:
            fv = np.asarray(self.f(n))
            if not np.all(np.isfinite(fv)):
                raise NonFiniteStateError("nonlinearity f returned non-finite values")
            rate = rate + fv
        if self.has_kernel:
            rate = rate + hartree_term(values, self.W_hat)
        return rate

    def nonlinear_flow(self, t, u):
        return nls_nonlinear_flow(t, u, self)


def nls_nonlinear_flow(t: float, u, prob: NLSProblem):
    values, g = _unwrap(u)
    if t == 0 or prob.is_linear:
        return u
    rate = prob.phase_rate(values)
    if np.all(rate.imag == 0):
        return _wrap(np.exp(1j * t * rate.real) * values, g)
    return _wrap(_rk4(lambda w: 1j * prob.phase_rate(w) * w, values, t, prob.complex_substeps), g)


def _rk4(rhs, y, t, nsteps):
    dt = t / nsteps
    for _ in range(nsteps):
        k1 = rhs(y)
        k2 = rhs(y + 0.5 * dt * k1)
        k3 = rhs(y + 0.5 * dt * k2)
        k4 = rhs(y + dt * k3)
        y = y + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(y)):
            raise NonFiniteStateError("RK4 integration produced non-finite values")
    return y


# --- sine-power datum ------------------------------------------------


def gamma_mass(alpha: float) -> float:
    """``Gamma(alpha+2) / (sqrt(pi) Gamma(alpha+5/2))``, the integral of sin^(3+2 alpha)(pi x)."""
    return math.exp(math.lgamma(alpha + 2.0) - math.lgamma(alpha + 2.5)) / math.sqrt(math.pi)


def sin_power(x, power: float) -> np.ndarray:
    s = np.sin(np.pi * np.asarray(x, dtype=float))
    out = np.zeros_like(s)
    pos = s > 0
    out[pos] = np.exp(power * np.log(s[pos]))
    return out


def sine_power_background(x, alpha: float) -> np.ndarray:
    return gamma_mass(alpha) * (1.0 + (1.0 + 16.0 * math.pi**2) * np.cos(4.0 * math.pi * np.asarray(x)))


def make_sine_power_data(alpha: float, grid: TorusGrid) -> tuple[TorusField, np.ndarray]:
    """``u0 = sin^(3/2+alpha)(pi x)`` and its neutralizing background ``D``."""
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    u0 = TorusField(grid, sin_power(grid.nodes, 1.5 + alpha).astype(complex), "nodes")
    return u0, sine_power_background(grid.nodes, alpha)


# --- wave interaction ----------------------------------------------------


@dataclass(frozen=True, eq=False)
class WaveInteractionState:
    x_min: float
    x_max: float
    u1: np.ndarray
    u2: np.ndarray
    nu: int = 1

    def __post_init__(self):
        u1 = np.asarray(self.u1, dtype=complex)
        u2 = np.asarray(self.u2, dtype=complex)
        if u1.shape != u2.shape or u1.ndim != 1:
            raise ValueError("u1 and u2 must be 1-D arrays of equal length")
        if self.nu not in (1, -1):
            raise ValueError("nu must be +1 or -1")
        object.__setattr__(self, "u1", u1)
        object.__setattr__(self, "u2", u2)

    @property
    def N(self) -> int:
        return self.u1.shape[0]

    @property
    def length(self) -> float:
        return self.x_max - self.x_min

    @property
    def dx(self) -> float:
        return self.length / self.N

    @property
    def x(self) -> np.ndarray:
        return self.x_min + self.dx * np.arange(self.N)

    def with_fields(self, u1, u2) -> "WaveInteractionState":
        return replace(self, u1=u1, u2=u2)

    def density(self) -> np.ndarray:
        return np.abs(self.u1) ** 2 + np.abs(self.u2) ** 2

    def l2(self) -> float:
        return float(np.sqrt(self.dx * np.sum(self.density())))


def wave_linear_flow(t: float, s: WaveInteractionState) -> WaveInteractionState:
    """Transport ``u1`` to the left and ``u2`` to the right by distance ``t``."""
    if t == 0:
        return s
    k = 2 * math.pi * np.fft.fftfreq(s.N, d=s.dx)
    shift = np.exp(1j * k * t)
    u1 = np.fft.ifft(np.fft.fft(s.u1) * shift)
    u2 = np.fft.ifft(np.fft.fft(s.u2) * np.conj(shift))
    return s.with_fields(u1, u2)


def wave_g(s: WaveInteractionState) -> np.ndarray:
    """Running integral of ``conj(u2) u1`` from the left end (trapezoid rule)."""
    return cumulative_trapezoid(np.conj(s.u2) * s.u1, dx=s.dx, initial=0.0)


def _wave_rhs(s: WaveInteractionState, u1, u2):
    g = cumulative_trapezoid(np.conj(u2) * u1, dx=s.dx, initial=0.0)
    return -s.nu * g * u2, s.nu * np.conj(g) * u1


def wave_nonlinear_flow(t: float, s: WaveInteractionState, substeps: int = 4) -> WaveInteractionState:
    """RK4 for ``u1' = -nu g u2``, ``u2' = nu conj(g) u1`` with ``g`` recomputed per stage."""
    if substeps < 1:
        raise ValueError("substeps must be >= 1")
    if t == 0:
        return s
    dt = t / substeps
    u1, u2 = s.u1, s.u2
    for _ in range(substeps):
        a1, b1 = _wave_rhs(s, u1, u2)
        a2, b2 = _wave_rhs(s, u1 + 0.5 * dt * a1, u2 + 0.5 * dt * b1)
        a3, b3 = _wave_rhs(s, u1 + 0.5 * dt * a2, u2 + 0.5 * dt * b2)
        a4, b4 = _wave_rhs(s, u1 + dt * a3, u2 + dt * b3)
        u1 = u1 + dt / 6.0 * (a1 + 2 * a2 + 2 * a3 + a4)
        u2 = u2 + dt / 6.0 * (b1 + 2 * b2 + 2 * b3 + b4)
    if not (np.all(np.isfinite(u1)) and np.all(np.isfinite(u2))):
        raise NonFiniteStateError("wave nonlinear flow produced non-finite values")
    return s.with_fields(u1, u2)


@dataclass
class WaveProblem:
    substeps: int = 4

    def linear_flow(self, t, s):
        return wave_linear_flow(t, s)

    def nonlinear_flow(self, t, s):
        return wave_nonlinear_flow(t, s, self.substeps)

    def norm(self, s) -> float:
        return s.l2()


def bump(x, center: float = 0.0, radius: float = 1.0) -> np.ndarray:
    """Smooth bump ``exp(1 - 1/(1 - r^2))`` supported on ``|x - center| < radius``."""
    r = (np.asarray(x, dtype=float) - center) / radius
    out = np.zeros_like(r)
    inside = np.abs(r) < 1
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - r[inside] ** 2))
    return out


def default_wave_state(
    N: int = 512, x_min: float = -4.0, x_max: float = 4.0, nu: int = 1, amplitude: float = 1.0
) -> WaveInteractionState:
    """Compactly supported default datum on (-1, 1); artifact-chosen."""
    x = x_min + (x_max - x_min) / N * np.arange(N)
    u1 = amplitude * bump(x) * np.exp(1j * x)
    u2 = 0.8 * amplitude * bump(x, center=0.2, radius=0.8)
    return WaveInteractionState(x_min, x_max, u1, u2, nu)
