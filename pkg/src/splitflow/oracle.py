"""Reference solutions and order-of-convergence measurement.

The collocation oracle below integrates the full (unsplit) semi-discrete
Schrodinger-Poisson system with classical RK4.  It deliberately builds its
own DFT matrices and Poisson solve instead of reusing :mod:`splitflow.torus`
or any splitting code, so agreement with a split solution is a genuine
cross-check.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import InsufficientDataError, OracleNotConvergedError, ReferenceNotConvergedError
from .schemes import SplittingScheme, evolve, make_scheme, step, validate_scheme

R2_MIN = 0.98


# --- independent collocation oracle -------------------------------------


@dataclass
class GalerkinSystem:
    """Fourier coefficients of ``i u_t + u_xx + |u|^2 u + V u = 0`` on ``m_small`` nodes.

    ``V_xx = D - |u|^2`` with zero-mean ``V``.  Products are formed at the
    collocation nodes, which makes this the exact semi-discrete system the
    split solver approximates on the same grid.
    """

    D: np.ndarray
    m_small: int = 5
    cubic: bool = True
    poisson: bool = True
    _F: np.ndarray = field(init=False, repr=False)
    _Finv: np.ndarray = field(init=False, repr=False)
    _k: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        m = self.m_small
        if m < 3 or m % 2 == 0:
            raise ValueError("m_small must be odd and >= 3")
        self.D = np.asarray(self.D, dtype=float)
        if self.D.shape != (m,):
            raise ValueError(f"D must have {m} node values")
        q = np.arange(m)
        self._Finv = np.exp(2j * np.pi * np.outer(q, q) / m)
        self._F = np.conj(self._Finv) / m
        self._k = 2 * np.pi * np.array([p if 2 * p < m else p - m for p in range(m)], dtype=float)
        self._D_hat = self._F @ self.D

    def to_coeffs(self, nodes):
        return self._F @ np.asarray(nodes, dtype=complex)

    def to_nodes(self, coeffs):
        return self._Finv @ coeffs

    def potential(self, nodes):
        if not self.poisson:
            return np.zeros(self.m_small)
        rho_hat = self._D_hat - self._F @ (np.abs(nodes) ** 2)
        v_hat = np.zeros_like(rho_hat)
        nz = self._k != 0
        v_hat[nz] = -rho_hat[nz] / self._k[nz] ** 2
        return (self._Finv @ v_hat).real

    def rhs(self, c):
        nodes = self._Finv @ c
        mult = self.potential(nodes)
        if self.cubic:
            mult = mult + np.abs(nodes) ** 2
        return 1j * (-(self._k**2) * c + self._F @ (mult * nodes))


def _rk4_fixed(rhs, y, T, steps):
    dt = T / steps
    for _ in range(steps):
        k1 = rhs(y)
        k2 = rhs(y + 0.5 * dt * k1)
        k3 = rhs(y + 0.5 * dt * k2)
        k4 = rhs(y + dt * k3)
        y = y + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    return y


def galerkin_oracle(sys: GalerkinSystem, u0, T: float, rk4_steps: int, tol: float = 1e-10):
    """Node values at time ``T`` from RK4 on the unsplit system.

    Runs with ``rk4_steps`` and twice that; raises
    :class:`OracleNotConvergedError` if the two differ by more than ``tol``
    in discrete L2.  Returns the finer result.
    """
    u0 = np.asarray(u0, dtype=complex)
    if T == 0:
        return u0.copy()
    c0 = sys.to_coeffs(u0)
    coarse = _rk4_fixed(sys.rhs, c0, T, rk4_steps)
    fine = _rk4_fixed(sys.rhs, c0, T, 2 * rk4_steps)
    diff = float(np.sqrt(np.sum(np.abs(fine - coarse) ** 2)))
    if not diff < tol:
        raise OracleNotConvergedError(
            f"RK4 with {rk4_steps} vs {2 * rk4_steps} steps differs by {diff:.3e} > {tol:.1e}"
        )
    return sys.to_nodes(fine)


def stable_rk4_steps(sys: GalerkinSystem, T: float, courant: float = 0.005, minimum: int = 64) -> int:
    """Step count keeping ``dt * lambda_max`` at ``courant``."""
    lam = float(np.max(sys._k**2))
    return max(minimum, int(math.ceil(abs(T) * lam / courant)))


# --- split reference -----------------------------------------------------


def reference_solve(
    problem,
    u0,
    T: float,
    n_ref: int,
    scheme: SplittingScheme | None = None,
    below: float | None = None,
    diff_norm: Callable | None = None,
):
    """Fine split solution with a Richardson self-check.

    The run with ``n_ref`` steps is compared against ``n_ref // 2`` steps.
    When ``below`` is given the difference must be under ``below / 10``.
    Returns ``(state, difference)``.
    """
    scheme = scheme or make_scheme("strang")
    if n_ref < 2:
        raise ValueError("n_ref must be >= 2")
    diff_norm = diff_norm or (lambda a, b: problem.norm(_sub(a, b)))
    fine = evolve(problem, scheme, T, n_ref, u0).final_state
    half = evolve(problem, scheme, T, n_ref // 2, u0).final_state
    diff = diff_norm(fine, half)
    if below is not None and not diff < below / 10:
        raise ReferenceNotConvergedError(
            f"reference with {n_ref} steps moves by {diff:.3e} when halved; "
            f"needs < {below / 10:.3e}"
        )
    return fine, diff


def _sub(a, b):
    if hasattr(a, "u1"):
        return a.with_fields(a.u1 - b.u1, a.u2 - b.u2)
    return np.asarray(a) - np.asarray(b)


# --- order fitting -------------------------------------------------------


def order_estimate(rows: Iterable) -> tuple[float, float]:
    """Least-squares slope of ``log(err)`` against ``log(h)`` and its R^2.

    ``rows`` holds ``(h, err)`` pairs; rows with a non-positive or
    non-finite error are skipped.
    """
    pts = [(float(h), float(e)) for h, e in rows if e > 0 and math.isfinite(e) and h > 0]
    if len(pts) < 3 or len({h for h, _ in pts}) < 3:
        raise InsufficientDataError(f"need >= 3 usable rows with distinct h, got {len(pts)}")
    x = np.log([h for h, _ in pts])
    y = np.log([e for _, e in pts])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), r2


@dataclass
class Row:
    res: int
    h: float
    err_l2: float
    err_linf: float


@dataclass
class ConvergenceReport:
    rows: list[Row]
    slope: float | None = None
    r2: float | None = None
    fit_rows: int = 0
    notes: list[str] = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    def sort(self):
        self.rows.sort(key=lambda r: -r.h)
        return self

    def fit(self, key: str = "err_l2", floor: float = 0.0, against: str = "h") -> "ConvergenceReport":
        """Fit the slope; drop the two coarsest rows once if ``r2 < 0.98``.

        ``against="res"`` fits against the resolution column instead of ``h``
        (grid-size sweeps, where the expected slope is negative).
        """
        self.sort()
        usable = [r for r in self.rows if getattr(r, key) > floor and math.isfinite(getattr(r, key))]
        if len(usable) < 3:
            self.slope = self.r2 = None
            self.notes.append(f"fit skipped: {len(usable)} rows above error floor {floor:.1e}")
            return self
        pts = [(r.h if against == "h" else r.res, getattr(r, key)) for r in usable]
        slope, r2 = order_estimate(pts)
        self.fit_rows = len(pts)
        if r2 < R2_MIN and len(pts) >= 5:
            slope2, r2b = order_estimate(pts[2:])
            self.notes.append(f"dropped two coarsest rows (r2 {r2:.4f} -> {r2b:.4f})")
            slope, r2 = slope2, r2b
            self.fit_rows = len(pts) - 2
        self.slope, self.r2 = slope, r2
        errs = [getattr(r, key) for r in self.rows]
        for i in range(1, len(errs)):
            if errs[i] > errs[i - 1]:
                self.notes.append(f"non-monotone error at res={self.rows[i].res}")
        return self

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            s = "nan" if self.slope is None else f"{self.slope:.17g}"
            r = "nan" if self.r2 is None else f"{self.r2:.17g}"
            fh.write(f"# slope={s} r2={r}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["res", "h", "err_l2", "err_linf"])
            for row in self.rows:
                w.writerow([row.res, f"{row.h:.17g}", f"{row.err_l2:.17g}", f"{row.err_linf:.17g}"])

    @classmethod
    def from_csv(cls, path) -> "ConvergenceReport":
        with open(path, newline="") as fh:
            lines = fh.read().splitlines()
        slope = r2 = None
        body = []
        for line in lines:
            if line.startswith("#"):
                parts = dict(tok.split("=") for tok in line[1:].split())
                slope = None if parts["slope"] == "nan" else float(parts["slope"])
                r2 = None if parts["r2"] == "nan" else float(parts["r2"])
            else:
                body.append(line)
        rows = [
            Row(int(d["res"]), float(d["h"]), float(d["err_l2"]), float(d["err_linf"]))
            for d in csv.DictReader(body)
        ]
        return cls(rows, slope, r2)


def local_error_probe(
    problem,
    scheme: SplittingScheme,
    u0,
    h_list: Sequence[float],
    exact: Callable[[float, object], object] | None = None,
    n_sub: int = 64,
) -> ConvergenceReport:
    """Single-step errors ``||Phi(h) u0 - Phi_h u0||`` for each ``h``.

    ``exact(h, u0)`` supplies the true flow; by default a Strang run with
    ``n_sub`` steps over ``[0, h]``.
    """
    validate_scheme(scheme)
    if exact is None:
        strang = make_scheme("strang")

        def exact(h, u):
            return evolve(problem, strang, h, n_sub, u).final_state

    rows = []
    for h in h_list:
        approx = step(problem, scheme, h, u0)
        ref = exact(h, u0)
        d = _sub(approx, ref)
        rows.append(Row(int(round(1 / h)), h, problem.norm(d), _linf(d)))
    return ConvergenceReport(rows).fit(floor=1e-13)


def _linf(d) -> float:
    if hasattr(d, "u1"):
        return float(max(np.max(np.abs(d.u1)), np.max(np.abs(d.u2))))
    return float(np.max(np.abs(d)))


# --- scheme certification ------------------------------------------------


class HarmonicOscillator:
    """``q' = p, p' = -q`` split into drift (linear slot) and kick (nonlinear slot)."""

    def linear_flow(self, t, y):
        return np.array([y[0] + t * y[1], y[1]])

    def nonlinear_flow(self, t, y):
        return np.array([y[0], y[1] - t * y[0]])

    def norm(self, y):
        return float(np.hypot(y[0], y[1]))

    @staticmethod
    def exact(T, y):
        c, s = math.cos(T), math.sin(T)
        return np.array([c * y[0] + s * y[1], -s * y[0] + c * y[1]])


def observed_order(scheme: SplittingScheme, n_list=(8, 16, 32, 64, 128), T: float = 1.0) -> tuple[float, float]:
    """Global-error slope of ``scheme`` on the harmonic oscillator."""
    osc = HarmonicOscillator()
    y0 = np.array([1.0, 0.0])
    exact = osc.exact(T, y0)
    rows = []
    for n in n_list:
        y = evolve(osc, scheme, T, n, y0, norm_guard=math.inf).final_state
        rows.append((T / n, float(np.linalg.norm(y - exact))))
    return order_estimate(rows)
