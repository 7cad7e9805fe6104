"""Splitting schemes and the composed discrete flow.

A scheme is a list of stages ``(a_j, b_j)``.  One step of size ``h`` applies,
for each stage in order, the linear flow for ``a_j h`` followed by the
nonlinear flow for ``b_j h``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Protocol, Sequence

import numpy as np

from .errors import InvalidSchemeError, NonFiniteStateError

SUM_TOL = 1e-14


class EvolutionProblem(Protocol):
    """A unitary linear flow paired with a nonlinear flow."""

    def linear_flow(self, t: float, u: Any) -> Any: ...

    def nonlinear_flow(self, t: float, u: Any) -> Any: ...

    def norm(self, u: Any) -> float: ...


@dataclass(frozen=True)
class SplittingScheme:
    name: str
    stages: tuple[tuple[float, float], ...]

    @property
    def a(self) -> np.ndarray:
        return np.array([s[0] for s in self.stages])

    @property
    def b(self) -> np.ndarray:
        return np.array([s[1] for s in self.stages])

    def __len__(self):
        return len(self.stages)


def validate_scheme(s: SplittingScheme) -> None:
    """Raise :class:`InvalidSchemeError` unless both stage sums equal 1."""
    if len(s.stages) < 1:
        raise InvalidSchemeError(f"scheme {s.name!r} has no stages")
    problems = []
    for label, idx in (("a", 0), ("b", 1)):
        total = math.fsum(stage[idx] for stage in s.stages)
        if not math.isfinite(total) or abs(total - 1.0) > SUM_TOL:
            problems.append(f"sum of {label}_j = {total!r} (off by {total - 1.0:.3e})")
    if problems:
        raise InvalidSchemeError(f"scheme {s.name!r}: " + "; ".join(problems))


def _yoshida4_stages():
    # triple jump of Strang with weights (w1, w0, w1); adjacent linear half-steps merged
    w1 = 1.0 / (2.0 - 2.0 ** (1.0 / 3.0))
    w0 = 1.0 - 2.0 * w1
    return (
        (w1 / 2, w1),
        ((w1 + w0) / 2, w0),
        ((w0 + w1) / 2, w1),
        (w1 / 2, 0.0),
    )


BUILTIN = {
    "lie": ((1.0, 1.0),),
    "strang": ((0.5, 1.0), (0.5, 0.0)),
    "yoshida4": _yoshida4_stages(),
}
ALIASES = {"lie_trotter": "lie", "lie-trotter": "lie"}


def make_scheme(kind: str = "lie", stages: Sequence[Sequence[float]] | None = None) -> SplittingScheme:
    """Build a named scheme, or a ``custom`` one from explicit stages.

    >>> make_scheme("strang").stages
    ((0.5, 1.0), (0.5, 0.0))
    """
    if kind == "custom":
        if not stages:
            raise InvalidSchemeError("custom scheme needs at least one stage")
        scheme = SplittingScheme("custom", tuple((float(a), float(b)) for a, b in stages))
    else:
        key = ALIASES.get(kind, kind)
        if key not in BUILTIN:
            raise InvalidSchemeError(
                f"unknown scheme {kind!r}; expected one of {sorted(BUILTIN)} or 'custom'"
            )
        scheme = SplittingScheme(key, BUILTIN[key])
    validate_scheme(scheme)
    return scheme


def substeps(s: SplittingScheme, h: float) -> list[tuple[float, float]]:
    """Durations ``(a_j h, b_j h)`` in execution order."""
    if not h > 0:
        raise ValueError(f"step size must be positive, got {h}")
    return [(a * h, b * h) for a, b in s.stages]


@dataclass(frozen=True)
class StepFunctions:
    """1-periodic piecewise-constant weights of the linear and nonlinear parts.

    ``breakpoints`` are the left ends of the pieces in ``[0, 1)``; ``alpha`` and
    ``beta`` hold the value on each piece.
    """

    breakpoints: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray

    def _piece(self, t):
        frac = np.mod(np.asarray(t, dtype=float), 1.0)
        return np.searchsorted(self.breakpoints, frac, side="right") - 1

    def alpha_at(self, t):
        return self.alpha[self._piece(t)]

    def beta_at(self, t):
        return self.beta[self._piece(t)]

    def widths(self) -> np.ndarray:
        return np.diff(np.append(self.breakpoints, 1.0))

    def integrals(self) -> tuple[float, float]:
        w = self.widths()
        return float(np.sum(w * self.alpha)), float(np.sum(w * self.beta))


def step_functions(s: SplittingScheme) -> StepFunctions:
    m = len(s.stages)
    breaks, alpha, beta = [], [], []
    for j, (a, b) in enumerate(s.stages, start=1):
        breaks += [(j - 1) / m, (j - 0.5) / m]
        alpha += [2 * m * a, 0.0]
        beta += [0.0, 2 * m * b]
    return StepFunctions(np.array(breaks), np.array(alpha), np.array(beta))


def step(p: EvolutionProblem, s: SplittingScheme, h: float, u):
    """One step of the composed discrete flow."""
    if h == 0:
        return u
    for ta, tb in substeps(s, h):
        if ta != 0.0:
            u = p.linear_flow(ta, u)
        if tb != 0.0:
            u = p.nonlinear_flow(tb, u)
    return u


@dataclass
class SolveReport:
    times: list[float]
    norms: list[float]
    status: str
    final_state: Any
    tripped_at: int | None = None
    states: list = field(default_factory=list)

    @property
    def completed(self) -> bool:
        return self.status == "completed"


DEFAULT_GUARD_FACTOR = 1e3


def evolve(
    p: EvolutionProblem,
    s: SplittingScheme,
    T: float,
    n: int,
    u0,
    norm_guard: float | None = None,
    keep_states: bool = False,
    callback: Callable[[int, float, Any], None] | None = None,
) -> SolveReport:
    """Apply ``n`` steps of size ``T/n`` starting from ``u0``.

    Stops early with status ``"norm-guard-tripped"`` once a recorded norm
    exceeds ``norm_guard`` (default: 1000 times the initial norm).
    """
    if n < 1:
        raise ValueError(f"step count must be >= 1, got {n}")
    if not T > 0:
        raise ValueError(f"final time must be positive, got {T}")
    norm0 = p.norm(u0)
    if not math.isfinite(norm0):
        raise NonFiniteStateError("initial state is not finite", step=0)
    if norm_guard is None:
        norm_guard = DEFAULT_GUARD_FACTOR * norm0 if norm0 > 0 else math.inf
    if not norm_guard > norm0:
        raise ValueError(f"norm_guard {norm_guard} must exceed the initial norm {norm0}")

    h = T / n
    u = u0
    times, norms = [0.0], [norm0]
    states = [u0] if keep_states else []
    for k in range(1, n + 1):
        u = step(p, s, h, u)
        nrm = p.norm(u)
        if not math.isfinite(nrm):
            raise NonFiniteStateError("state became non-finite", step=k)
        times.append(k * h)
        norms.append(nrm)
        if keep_states:
            states.append(u)
        if callback is not None:
            callback(k, k * h, u)
        if nrm > norm_guard:
            return SolveReport(times, norms, "norm-guard-tripped", u, tripped_at=k, states=states)
    return SolveReport(times, norms, "completed", u, states=states)
