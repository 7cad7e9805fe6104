"""Run configurations and the experiment drivers behind the CLI."""
from __future__ import annotations

import csv
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, ValidationError, field_validator, model_validator

from .errors import ConfigError, InsufficientDataError, ReferenceNotConvergedError
from .oracle import ConvergenceReport, Row, observed_order, reference_solve
from .problems import (
    NLSProblem,
    SchrodingerPoissonProblem,
    WaveProblem,
    default_wave_state,
    even_kernel,
    green_kernel,
    make_sine_power_data,
)
from .schemes import BUILTIN, evolve, make_scheme
from .torus import TorusField, TorusGrid, interpolate, l2_norm, sobolev_norm, write_field_csv

log = logging.getLogger(__name__)

ProblemKind = Literal["sp", "nls", "wave"]
SchemeName = Literal["lie", "strang", "yoshida4"]


def _odd(m: int, name: str) -> int:
    if m < 3 or m % 2 == 0:
        raise ValueError(f"{name} must be an odd integer >= 3, got {m}")
    return m


class RunConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    problem: ProblemKind = "sp"
    scheme: SchemeName = "lie"
    m: int = 257
    n: int = 1024
    n_list: list[int] = [32, 64, 128, 256, 512, 1024]
    m_list: list[int] = [33, 65, 129, 257, 513]
    T: float = 0.5
    h: Optional[float] = None
    alpha: float = 0.01
    ref_n: Optional[int] = None
    ref_m: int = 4097
    seed: int = 0
    out: str = "out"
    datum: Literal["sine-power", "bandlimited"] = "sine-power"
    nonlinearity: Literal["cubic", "none"] = "cubic"
    kernel: Union[Literal["none", "green"], list[float]] = "none"
    nu: Literal[1, -1] = 1
    interval: tuple[float, float] = (-4.0, 4.0)
    wave_substeps: int = 4
    neutrality_tol: float = 1e-6
    norm_guard_factor: float = 1e3
    workers: int = 1

    @field_validator("m", "ref_m")
    @classmethod
    def _odd_grid(cls, v, info):
        return _odd(v, info.field_name)

    @field_validator("m_list")
    @classmethod
    def _odd_list(cls, v):
        if not v:
            raise ValueError("m_list must not be empty")
        for m in v:
            _odd(m, "m_list entry")
        if sorted(v) != v:
            raise ValueError("m_list must be ascending")
        return v

    @field_validator("n_list")
    @classmethod
    def _n_list(cls, v):
        if not v or min(v) < 1:
            raise ValueError("n_list entries must be >= 1")
        if sorted(v) != v:
            raise ValueError("n_list must be ascending")
        return v

    @field_validator("n", "wave_substeps", "workers")
    @classmethod
    def _positive(cls, v, info):
        if v < 1:
            raise ValueError(f"{info.field_name} must be >= 1")
        return v

    @field_validator("T", "alpha", "norm_guard_factor")
    @classmethod
    def _positive_real(cls, v, info):
        if not v > 0:
            raise ValueError(f"{info.field_name} must be > 0")
        return v

    @model_validator(mode="after")
    def _refs(self):
        if self.ref_n is not None and self.ref_n < 8 * max(self.n_list):
            raise ValueError(f"ref_n must be >= 8 * max(n_list) = {8 * max(self.n_list)}")
        if self.ref_m < 4 * max(self.m_list):
            raise ValueError(f"ref_m must be >= 4 * max(m_list) = {4 * max(self.m_list)}")
        if self.h is not None and not self.h > 0:
            raise ValueError("h must be > 0")
        if self.interval[1] <= self.interval[0]:
            raise ValueError("interval must be increasing")
        return self

    @property
    def ref_steps(self) -> int:
        return self.ref_n if self.ref_n is not None else 8 * max(self.n_list)

    @property
    def space_steps(self) -> int:
        """Step count for the space sweep: ``T/h`` when ``h`` is set, else ``n``."""
        if self.h is None:
            return self.n
        n = int(round(self.T / self.h))
        if n < 1 or abs(n * self.h - self.T) > 1e-9 * self.T:
            raise ConfigError(f"T={self.T} is not an integer multiple of h={self.h}")
        return n


PRESETS: dict[str, dict] = {
    "desk-time": dict(problem="sp", scheme="lie", m=257, T=0.5, alpha=0.01,
                      n_list=[32, 64, 128, 256, 512, 1024], ref_n=8192),
    "desk-space": dict(problem="sp", scheme="lie", T=0.5, h=1e-3, alpha=0.01,
                       m_list=[33, 65, 129, 257, 513], ref_m=4097),
    # full-scale runs; hours, not minutes
    "full-time": dict(problem="sp", scheme="lie", m=200001, T=1.0, alpha=0.01,
                       n_list=[100, 200, 400, 800, 1600, 3200, 6400, 12800, 25000], ref_n=200000),
    "full-space": dict(problem="sp", scheme="lie", T=1.0, h=1e-3, alpha=0.01,
                        m_list=[129, 257, 513, 1025, 2049, 4097], ref_m=16385),
}


def load_config(path=None, preset: str | None = None, **overrides) -> RunConfig:
    """Merge preset, JSON file and flag overrides (later wins) into a RunConfig."""
    import json

    data: dict = {}
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
        data.update(PRESETS[preset])
    if path is not None:
        try:
            with open(path) as fh:
                loaded = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(loaded, dict):
            raise ConfigError("config must be a JSON object")
        data.update(loaded)
    data.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return RunConfig(**data)
    except ValidationError as exc:
        msgs = "; ".join(
            f"{'.'.join(str(x) for x in e['loc']) or 'config'}: {e['msg']}" for e in exc.errors()
        )
        raise ConfigError(msgs) from exc


# --- problem construction ------------------------------------------------


def _bandlimited(grid: TorusGrid, seed: int, modes: int = 4) -> np.ndarray:
    rng = np.random.default_rng(seed)
    c = np.zeros(grid.m, dtype=complex)
    for p in range(-modes, modes + 1):
        c[p % grid.m] = (rng.standard_normal() + 1j * rng.standard_normal()) / (1 + p * p)
    c /= np.sqrt(np.sum(np.abs(c) ** 2))
    return np.fft.ifft(c) * grid.m


def build(cfg: RunConfig, m: int | None = None):
    """Problem and initial state for ``cfg`` on a grid of size ``m``."""
    m = cfg.m if m is None else m
    if cfg.problem == "wave":
        s = default_wave_state(N=m, x_min=cfg.interval[0], x_max=cfg.interval[1], nu=cfg.nu)
        return WaveProblem(cfg.wave_substeps), s
    grid = TorusGrid(m)
    if cfg.datum == "sine-power":
        u0, D = make_sine_power_data(cfg.alpha, grid)
        u0 = u0.data
    else:
        u0 = _bandlimited(grid, cfg.seed)
        D = np.full(m, float(np.mean(np.abs(u0) ** 2)))
    if cfg.problem == "sp":
        prob = SchrodingerPoissonProblem(grid, D, cfg.neutrality_tol)
        prob.check_neutrality(u0)
        return prob, u0
    if cfg.kernel == "none":
        W = None
    elif cfg.kernel == "green":
        W = green_kernel(grid)
    else:
        W = even_kernel(grid, cfg.kernel)
    f = (lambda s: s) if cfg.nonlinearity == "cubic" else None
    return NLSProblem(grid, f=f, W_hat=W), u0


def _diff_norms(a, b, cfg: RunConfig):
    if cfg.problem == "wave":
        d1, d2 = a.u1 - b.u1, a.u2 - b.u2
        l2 = float(np.sqrt(a.dx * np.sum(np.abs(d1) ** 2 + np.abs(d2) ** 2)))
        return l2, float(max(np.max(np.abs(d1)), np.max(np.abs(d2)))), {}
    d = np.asarray(a) - np.asarray(b)
    field = TorusField(TorusGrid(len(d)), d)
    extra = {f"h{theta:g}": sobolev_norm(field, theta) for theta in (0.0, 0.5)}
    return l2_norm(d), float(np.max(np.abs(d))), extra


# --- commands ------------------------------------------------------------


def cmd_solve(cfg: RunConfig, out_dir=None, echo=print) -> dict:
    out = Path(out_dir or cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    prob, u0 = build(cfg)
    scheme = make_scheme(cfg.scheme)
    norm0 = prob.norm(u0)
    t0 = time.perf_counter()
    report = evolve(prob, scheme, cfg.T, cfg.n, u0, norm_guard=cfg.norm_guard_factor * norm0)
    wall = time.perf_counter() - t0

    traj = out / f"solve_{cfg.scheme}_{cfg.problem}_trajectory.csv"
    with open(traj, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k", "t", "norm_l2"])
        for k, (t, nrm) in enumerate(zip(report.times, report.norms)):
            w.writerow([k, f"{t:.17g}", f"{nrm:.17g}"])
    final = out / f"solve_{cfg.scheme}_{cfg.problem}_final.csv"
    if cfg.problem == "wave":
        s = report.final_state
        with open(final, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["q", "x", "re1", "im1", "re2", "im2"])
            for q, (x, a, b) in enumerate(zip(s.x, s.u1, s.u2)):
                w.writerow([q, f"{x:.17g}", f"{a.real:.17g}", f"{a.imag:.17g}",
                            f"{b.real:.17g}", f"{b.imag:.17g}"])
    else:
        write_field_csv(TorusField(TorusGrid(cfg.m), report.final_state), final)

    ffts_per_step = 4 * len(scheme.stages)
    cost = cfg.n * cfg.m * math.log2(cfg.m)
    drift = max(abs(x - norm0) for x in report.norms) / norm0 if norm0 > 0 else 0.0
    echo(f"status: {report.status}" + (f" at step {report.tripped_at}" if report.tripped_at else ""))
    echo(f"steps: {len(report.times) - 1}/{cfg.n}  h = {cfg.T / cfg.n:.6g}")
    echo(f"max relative norm drift: {drift:.3e}")
    echo(f"wall clock: {wall:.3f} s")
    echo(f"cost model n*m*log2(m) = {cost:.4g}  (~{ffts_per_step} FFTs per step)")
    return {"report": report, "wall": wall, "cost": cost, "drift": drift,
            "trajectory": traj, "final": final}


def _savefig_svg(report: ConvergenceReport, path: Path, xlabel: str, title: str, x_of=None):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "splitflow"
    xs = [x_of(r) if x_of else r.h for r in report.rows]
    fig, ax = plt.subplots(figsize=(6, 4.5))
    l2 = [r.err_l2 for r in report.rows]
    li = [r.err_linf for r in report.rows]
    ax.loglog(xs, l2, "o-", label="L2 error")
    ax.loglog(xs, li, "s--", label="Linf error")
    if report.slope is not None:
        ax.text(0.05, 0.92, f"fitted slope {report.slope:.3f} (r2 {report.r2:.4f})",
                transform=ax.transAxes)
    ax.set_xlabel(xlabel)
    ax.set_ylabel("error")
    ax.set_title(title)
    ax.grid(True, which="both", ls=":")
    ax.legend(loc="lower right")
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def _pool_map(fn, items, workers):
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))


def converge_time(cfg: RunConfig) -> ConvergenceReport:
    prob, u0 = build(cfg)
    scheme = make_scheme(cfg.scheme)

    def run(n):
        return evolve(prob, scheme, cfg.T, n, u0).final_state

    finals = _pool_map(run, cfg.n_list, cfg.workers)
    ref, ref_diff = reference_solve(prob, u0, cfg.T, cfg.ref_steps,
                                    diff_norm=lambda a, b: _diff_norms(a, b, cfg)[0])
    rows, sob = [], {}
    for n, u in zip(cfg.n_list, finals):
        l2, linf, extra = _diff_norms(u, ref, cfg)
        rows.append(Row(n, cfg.T / n, l2, linf))
        for k, v in extra.items():
            sob.setdefault(k, []).append((cfg.T / n, v))
    floor = 1e-12 * max(prob.norm(u0), 1e-300)
    report = ConvergenceReport(rows).fit(floor=floor)
    if report.slope is not None:
        smallest = min(r.err_l2 for r in rows if r.err_l2 > floor)
        if not ref_diff < smallest / 10:
            raise ReferenceNotConvergedError(
                f"reference with {cfg.ref_steps} steps moves by {ref_diff:.3e} when halved; "
                f"needs < {smallest / 10:.3e}"
            )
    report.extra["ref_diff"] = ref_diff
    for k, pts in sob.items():
        try:
            report.extra[f"slope_{k}"] = _fit_pts(pts, floor)
        except InsufficientDataError:
            pass
    return report


def _fit_pts(pts, floor):
    from .oracle import order_estimate

    return order_estimate([(h, e) for h, e in pts if e > floor])[0]


def converge_space(cfg: RunConfig) -> ConvergenceReport:
    if cfg.problem == "wave":
        raise ConfigError("problem: converge-space supports the torus problems sp and nls")
    n = cfg.space_steps
    scheme = make_scheme(cfg.scheme)

    def run(m):
        prob, u0 = build(cfg, m)
        return TorusField(TorusGrid(m), evolve(prob, scheme, cfg.T, n, u0).final_state)

    ms = list(cfg.m_list) + [cfg.ref_m]
    finals = _pool_map(run, ms, cfg.workers)
    ref = finals[-1]
    rows = []
    for m, u in zip(cfg.m_list, finals[:-1]):
        d = interpolate(u, cfg.ref_m).data - ref.data
        rows.append(Row(m, 1.0 / m, l2_norm(d), float(np.max(np.abs(d)))))
    floor = 1e-12 * max(l2_norm(ref.data), 1e-300)
    return ConvergenceReport(rows).fit(floor=floor, against="res")


def _finish(report, cfg, command, xlabel, title, out_dir, echo, x_of=None):
    out = Path(out_dir or cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    stem = f"{command}_{cfg.scheme}_{cfg.problem}"
    csv_path = out / f"{stem}.csv"
    svg_path = out / f"{stem}.svg"
    report.to_csv(csv_path)
    _savefig_svg(report, svg_path, xlabel, title, x_of)
    echo("res,h,err_l2,err_linf")
    for r in report.rows:
        echo(f"{r.res},{r.h:.6g},{r.err_l2:.6e},{r.err_linf:.6e}")
    if report.slope is None:
        echo("fit skipped: errors at rounding floor")
    else:
        echo(f"slope = {report.slope:.4f}  r2 = {report.r2:.5f}")
    for k, v in report.extra.items():
        echo(f"{k} = {v:.6g}")
    for note in report.notes:
        echo(f"note: {note}")
    return {"report": report, "csv": csv_path, "svg": svg_path}


def cmd_converge_time(cfg: RunConfig, out_dir=None, echo=print) -> dict:
    report = converge_time(cfg)
    return _finish(report, cfg, "converge-time", "time step h", f"{cfg.scheme} / {cfg.problem}: error vs h",
                   out_dir, echo)


def cmd_converge_space(cfg: RunConfig, out_dir=None, echo=print) -> dict:
    report = converge_space(cfg)
    return _finish(report, cfg, "converge-space", "grid size m",
                   f"{cfg.scheme} / {cfg.problem}: error vs m", out_dir, echo, x_of=lambda r: r.res)


def cmd_schemes(echo=print) -> list[dict]:
    listing = []
    for name in BUILTIN:
        s = make_scheme(name)
        order, r2 = observed_order(s)
        entry = {"name": name, "stages": s.stages, "valid": True, "order": order, "r2": r2}
        listing.append(entry)
        stages = ", ".join(f"({a:.15g}, {b:.15g})" for a, b in s.stages)
        echo(f"{name}: [{stages}]  valid")
        if name == "yoshida4":
            status = "empirically certified order 4" if order >= 3.7 else "FAILED order-4 check"
            echo(f"  {status} (observed {order:.3f})")
        else:
            echo(f"  observed order {order:.3f} on the harmonic oscillator")
    return listing
