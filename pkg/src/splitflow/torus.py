"""Fourier machinery on the uniform periodic grid ``x_q = q/m`` of odd size.

Coefficients follow the normalization

    U_hat[p] = (1/m) sum_q U[q] exp(-2 pi i p q / m)
    U[q]     =       sum_p U_hat[p] exp(+2 pi i p q / m)

so ``U_hat`` approximates the continuous Fourier coefficients on [0, 1).
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Callable, Literal

import numpy as np

from .errors import NeutralityError

Repr = Literal["nodes", "coeffs"]
TWO_PI = 2.0 * math.pi


@dataclass(frozen=True, eq=False)
class TorusGrid:
    m: int

    def __post_init__(self):
        if not isinstance(self.m, (int, np.integer)) or self.m < 3 or self.m % 2 == 0:
            raise ValueError(f"grid size must be an odd integer >= 3, got {self.m!r}")

    def __eq__(self, other):
        return isinstance(other, TorusGrid) and other.m == self.m

    def __hash__(self):
        return hash(("TorusGrid", self.m))

    @property
    def l(self) -> int:
        return (self.m - 1) // 2

    @cached_property
    def nodes(self) -> np.ndarray:
        return np.arange(self.m) / self.m

    @cached_property
    def freqs(self) -> np.ndarray:
        """Signed frequency of each DFT index, in ``-l..l``."""
        p = np.arange(self.m)
        return np.where(p <= self.l, p, p - self.m)

    def signed_freq(self, p: int) -> int:
        return p if p <= self.l else p - self.m

    @cached_property
    def eigenvalues(self) -> np.ndarray:
        return aliased_eigenvalue(np.arange(self.m), self.m)


@dataclass(frozen=True, eq=False)
class TorusField:
    grid: TorusGrid
    data: np.ndarray
    repr: Repr = "nodes"

    def __post_init__(self):
        data = np.asarray(self.data, dtype=complex)
        if data.shape != (self.grid.m,):
            raise ValueError(f"expected {self.grid.m} values, got shape {data.shape}")
        object.__setattr__(self, "data", data)

    @classmethod
    def from_function(cls, grid: TorusGrid, f: Callable[[np.ndarray], np.ndarray]) -> "TorusField":
        return cls(grid, np.asarray(f(grid.nodes), dtype=complex), "nodes")

    def nodes(self) -> np.ndarray:
        return self.data if self.repr == "nodes" else dft(self, "inverse").data

    def coeffs(self) -> np.ndarray:
        return self.data if self.repr == "coeffs" else dft(self, "forward").data

    def as_nodes(self) -> "TorusField":
        return self if self.repr == "nodes" else dft(self, "inverse")

    def l2(self) -> float:
        return l2_norm(self.nodes())


def forward(values: np.ndarray) -> np.ndarray:
    return np.fft.fft(values) / values.shape[-1]


def inverse(coeffs: np.ndarray) -> np.ndarray:
    return np.fft.ifft(coeffs) * coeffs.shape[-1]


def dft(field: TorusField, direction: Literal["forward", "inverse"] = "forward") -> TorusField:
    """Switch a field between node values and Fourier coefficients."""
    if direction == "forward":
        if field.repr != "nodes":
            raise ValueError("forward transform expects node values")
        return TorusField(field.grid, forward(field.data), "coeffs")
    if direction == "inverse":
        if field.repr != "coeffs":
            raise ValueError("inverse transform expects Fourier coefficients")
        return TorusField(field.grid, inverse(field.data), "nodes")
    raise ValueError(f"unknown direction {direction!r}")


def fold_symbol(nu):
    """``h(nu) = nu^2 - 2 (nu - 1/2)_+`` on [0, 1), written as ``min(nu, 1-nu)^2``."""
    nu = np.asarray(nu, dtype=float)
    return np.minimum(nu, 1.0 - nu) ** 2


def aliased_eigenvalue(p, m: int):
    """Laplacian symbol folded onto DFT index ``p``: ``4 m^2 pi^2 h(p/m)``.

    Evaluated as ``4 pi^2 k^2`` with ``k = min(p, m - p)`` so the result is
    exact up to the rounding of ``pi^2``.
    """
    p = np.asarray(p)
    if np.any(p < 0) or np.any(p >= m):
        raise ValueError(f"index out of range 0..{m - 1}")
    k = np.minimum(p, m - p).astype(float)
    lam = 4.0 * math.pi**2 * k**2
    return float(lam) if lam.ndim == 0 else lam


def l2_norm(values: np.ndarray) -> float:
    """Discrete L2 norm ``sqrt((1/m) sum |U_q|^2)``."""
    return float(np.sqrt(np.mean(np.abs(values) ** 2)))


class LinearPropagator:
    """Cached phase tables ``exp(-i lambda_p t)`` for repeated durations."""

    def __init__(self, eigenvalues: np.ndarray, max_cached: int = 16):
        self.eigenvalues = eigenvalues
        self._phases: dict[float, np.ndarray] = {}
        self._max = max_cached

    def phases(self, t: float) -> np.ndarray:
        ph = self._phases.get(t)
        if ph is None:
            ph = np.exp(-1j * self.eigenvalues * t)
            if len(self._phases) < self._max:
                self._phases[t] = ph
        return ph

    def __call__(self, t: float, values: np.ndarray) -> np.ndarray:
        if t == 0:
            return values
        return inverse(forward(values) * self.phases(t))


def linear_flow(t: float, field: TorusField) -> TorusField:
    """Exact free Schrodinger flow ``u_t = i u_xx`` on the grid."""
    if t == 0:
        return field
    ph = np.exp(-1j * field.grid.eigenvalues * t)
    if field.repr == "coeffs":
        return TorusField(field.grid, field.data * ph, "coeffs")
    return TorusField(field.grid, inverse(forward(field.data) * ph), "nodes")


def poisson_coeffs(rho_hat: np.ndarray, freqs: np.ndarray, neutrality_tol: float) -> np.ndarray:
    residual = abs(rho_hat[0])
    if residual > neutrality_tol:
        raise NeutralityError(residual, neutrality_tol)
    k = TWO_PI * freqs
    v_hat = np.zeros_like(rho_hat)
    nz = freqs != 0
    v_hat[nz] = -rho_hat[nz] / k[nz] ** 2
    return v_hat


def poisson_potential(rho: TorusField, neutrality_tol: float = 1e-8) -> TorusField:
    """Solve ``V_xx = rho`` with zero-mean ``V``.

    Raises :class:`NeutralityError` when the mean of ``rho`` exceeds
    ``neutrality_tol``.  A real ``rho`` yields a real ``V``.
    """
    grid = rho.grid
    v = inverse(poisson_coeffs(rho.coeffs(), grid.freqs, neutrality_tol))
    if np.all(rho.nodes().imag == 0):
        v = v.real
    return TorusField(grid, v, "nodes")


def project_spectrum(field: TorusField, R: float) -> TorusField:
    """Zero every coefficient whose eigenvalue exceeds ``R``."""
    if R < 0:
        raise ValueError("R must be non-negative")
    c = np.where(field.grid.eigenvalues <= R, field.coeffs(), 0.0)
    out = TorusField(field.grid, c, "coeffs")
    return out if field.repr == "coeffs" else dft(out, "inverse")


def sobolev_norm(field: TorusField, theta: float) -> float:
    """``(sum_p (1 + lambda_p)^theta |u_hat_p|^2)^(1/2)`` for ``0 <= theta <= 1``."""
    if not 0.0 <= theta <= 1.0:
        raise ValueError(f"theta must lie in [0, 1], got {theta}")
    c = field.coeffs()
    w = (1.0 + field.grid.eigenvalues) ** theta
    return float(np.sqrt(np.sum(w * np.abs(c) ** 2)))


def graph_norm(field: TorusField) -> float:
    """Domain norm of the Laplacian, ``(sum_p (1 + lambda_p)^2 |u_hat_p|^2)^(1/2)``."""
    c = field.coeffs()
    return float(np.sqrt(np.sum((1.0 + field.grid.eigenvalues) ** 2 * np.abs(c) ** 2)))


def interpolate(field: TorusField, m_fine: int) -> TorusField:
    """Evaluate the trigonometric interpolant ``I_m u`` on a finer odd grid."""
    fine = TorusGrid(m_fine)
    src = field.grid
    if m_fine < src.m:
        raise ValueError("target grid must not be coarser")
    c = field.coeffs()
    out = np.zeros(m_fine, dtype=complex)
    out[src.freqs % m_fine] = c
    return TorusField(fine, inverse(out), "nodes")


def naive_dft(values: np.ndarray) -> np.ndarray:
    """O(m^2) forward sum, kept as a reference for the fast path."""
    m = len(values)
    q = np.arange(m)
    kernel = np.exp(-2j * np.pi * np.outer(q, q) / m)
    return kernel @ values / m


def write_field_csv(field: TorusField, path) -> None:
    u = field.nodes()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["q", "x", "re", "im"])
        for q, (x, val) in enumerate(zip(field.grid.nodes, u)):
            w.writerow([q, f"{x:.17g}", f"{val.real:.17g}", f"{val.imag:.17g}"])


def read_field_csv(path) -> TorusField:
    with open(Path(path), newline="") as fh:
        rows = list(csv.DictReader(fh))
    data = np.array([complex(float(r["re"]), float(r["im"])) for r in rows])
    return TorusField(TorusGrid(len(rows)), data, "nodes")
