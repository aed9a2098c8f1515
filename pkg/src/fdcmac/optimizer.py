"""Joint choice of the sensing time and sensing-stage power.

For every candidate ``p_sen`` on a dB grid the throughput is maximised over
``t_s`` with a bracketed bounded line search (the profile in ``t_s`` is
unimodal in the regimes of interest), and the best pair is kept.  The
structural claims behind the line search (slope signs at both ends of
``(0, T]``, concavity in between) are checked by finite differences in
:func:`verify_theorem1`.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import optimize

from .core import Mode, Scenario, SensingConfig, SicModel, db_to_linear, linear_to_db, self_interference
from .exceptions import DomainError, FdcMacError
from .throughput import evaluate

__all__ = [
    "TsSearchResult",
    "OptimizationResult",
    "Theorem1Diagnostics",
    "critical_sensing_power",
    "t_s_bounds",
    "optimize_ts",
    "optimize_config",
    "verify_theorem1",
    "sweep_parameter",
]

COARSE_POINTS = 41
DENSE_POINTS = 2000


def critical_sensing_power(p_dat, sc: SensingConfig, sic: SicModel) -> float:
    """Sensing power above which the FDTx throughput keeps rising up to ``t_s = T``."""
    if not p_dat > 0.0:
        raise DomainError(f"p_dat must be > 0, got {p_dat}")
    n0 = sc.n0_noise
    return n0 * ((1.0 + p_dat / (n0 + self_interference(p_dat, sic))) ** 2 - 1.0)


def t_s_bounds(scenario: Scenario):
    """Search interval for the sensing time: at least 10 detector samples."""
    lo = max(10.0 / scenario.sensing.f_s, 1e-6)
    hi = scenario.access.t_frame
    if lo >= hi:
        raise DomainError(f"frame {hi} s too short for a meaningful sensing stage")
    return lo, hi


@dataclass(frozen=True)
class TsSearchResult:
    t_s: float
    nt: float
    boundary: bool        # maximiser sits at t_s = T
    flagged: bool         # coarse profile was not unimodal; dense scan used
    evaluations: int


def _peaks(values, rel=1e-12):
    """Number of local maxima of a sampled profile, ignoring round-off ties."""
    d = np.diff(values)
    tol = rel * max(1.0, float(np.max(np.abs(values))))
    s = np.sign(np.where(np.abs(d) <= tol, 0.0, d))
    s = s[s != 0]
    if s.size == 0:
        return 1
    # every +/- switch is an interior peak; the ends count when the profile
    # starts falling or finishes rising
    interior = int(np.sum((s[:-1] > 0) & (s[1:] < 0)))
    return interior + int(s[0] < 0) + int(s[-1] > 0)


def optimize_ts(scenario: Scenario, p_sen: float, rel_tol: float = 1e-3,
                coarse_points: int = COARSE_POINTS) -> TsSearchResult:
    """Maximise the throughput over ``t_s`` at fixed ``p_sen``.

    A coarse grid brackets the peak, a bounded Brent search (golden section
    with parabolic steps) refines it to ``rel_tol * T``, and the endpoint
    ``t_s = T`` is compared explicitly.  When the coarse profile has more
    than one local maximum the config is flagged and a dense scan is used.
    """
    lo, hi = t_s_bounds(scenario)
    if not 0.0 <= p_sen <= scenario.access.p_max * (1 + 1e-12):
        raise DomainError(f"p_sen must lie in [0, p_max], got {p_sen}")
    T = scenario.access.t_frame
    n_eval = 0

    def nt(t):
        nonlocal n_eval
        n_eval += 1
        return evaluate(scenario, t_s=float(t), p_sen=p_sen).nt

    grid = np.linspace(lo, hi, coarse_points)
    vals = np.array([nt(t) for t in grid])
    flagged = _peaks(vals) > 1
    if flagged:
        grid = np.linspace(lo, hi, DENSE_POINTS)
        vals = np.array([nt(t) for t in grid])
    i = int(np.argmax(vals))
    best_t, best_v = float(grid[i]), float(vals[i])

    a = grid[max(i - 1, 0)]
    b = grid[min(i + 1, len(grid) - 1)]
    if b - a > rel_tol * T:
        res = optimize.minimize_scalar(lambda t: -nt(t), bounds=(a, b), method="bounded",
                                       options={"xatol": 0.25 * rel_tol * T})
        if -res.fun > best_v:
            best_t, best_v = float(res.x), float(-res.fun)
    v_end = float(vals[-1])  # grid always ends at T
    if v_end >= best_v:
        best_t, best_v = hi, v_end
    return TsSearchResult(t_s=best_t, nt=best_v, boundary=best_t == hi,
                          flagged=flagged, evaluations=n_eval)


@dataclass(frozen=True)
class TraceRow:
    p_sen: float
    p_sen_db: float
    t_s: float
    nt: float
    boundary: bool = False
    flagged: bool = False
    error: str = ""


@dataclass
class OptimizationResult:
    t_s_star: float
    p_sen_star: float
    nt_star: float
    boundary_flag: bool
    trace: list = field(default_factory=list)
    flags: list = field(default_factory=list)   # p_sen values with non-unimodal profiles
    failures: list = field(default_factory=list)

    @property
    def p_sen_star_db(self) -> float:
        return linear_to_db(self.p_sen_star) if self.p_sen_star > 0 else -math.inf

    def summary(self) -> dict:
        return {
            "t_s_star": self.t_s_star,
            "p_sen_star": self.p_sen_star,
            "p_sen_star_db": self.p_sen_star_db,
            "nt_star": self.nt_star,
            "boundary_flag": self.boundary_flag,
            "flagged_points": len(self.flags),
            "failed_points": len(self.failures),
        }


def power_grid(p_max, step_db=0.25, min_db=-10.0):
    """``[0]`` followed by a dB grid ending exactly at ``p_max``."""
    if p_max <= 0.0:
        return np.array([0.0])
    top = linear_to_db(p_max)
    n = int(math.floor((top - min_db) / step_db + 1e-9))
    dbs = top - step_db * np.arange(n, -1, -1)
    return np.concatenate([[0.0], db_to_linear(dbs)])


def _row(args) -> TraceRow:
    scenario, p_sen, rel_tol = args
    db = linear_to_db(p_sen) if p_sen > 0 else -math.inf
    try:
        r = optimize_ts(scenario, p_sen, rel_tol=rel_tol)
    except FdcMacError as exc:
        return TraceRow(p_sen, db, math.nan, math.nan, error=f"{type(exc).__name__}: {exc}")
    return TraceRow(p_sen, db, r.t_s, r.nt, r.boundary, r.flagged)


def _run_rows(scenario, powers, rel_tol, workers):
    jobs = [(scenario, float(p), rel_tol) for p in powers]
    if workers and workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(_row, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    return [_row(j) for j in jobs]


def optimize_config(scenario: Scenario, step_db: float = 0.25, min_db: float = -10.0,
                    refine: bool = True, rel_tol: float = 1e-3,
                    powers: Sequence[float] | None = None,
                    workers: int | None = None) -> OptimizationResult:
    """Grid over ``p_sen`` with a line search over ``t_s`` at each point.

    ``refine`` adds a second pass at ``step_db / 10`` around the best grid
    point.  Rows come back in grid order whatever ``workers`` is, so serial
    and parallel runs give the same trace.
    """
    p_max = scenario.access.p_max
    grid = power_grid(p_max, step_db, min_db) if powers is None else np.asarray(powers, dtype=float)
    if grid.size == 0:
        raise DomainError("empty p_sen grid")
    trace = _run_rows(scenario, grid, rel_tol, workers)

    def best(rows):
        ok = [r for r in rows if not r.error]
        return max(ok, key=lambda r: r.nt) if ok else None

    top = best(trace)
    if refine and top is not None and top.p_sen > 0.0 and powers is None:
        fine = top.p_sen_db + np.arange(-9, 10) * step_db / 10.0
        fine = fine[(fine < linear_to_db(p_max)) & (fine >= min_db) & (np.abs(fine - top.p_sen_db) > 1e-12)]
        trace = trace + _run_rows(scenario, db_to_linear(fine), rel_tol, workers)
        top = best(trace)
    if top is None:
        raise FdcMacError("every p_sen grid point failed: " + trace[0].error)
    return OptimizationResult(
        t_s_star=top.t_s, p_sen_star=top.p_sen, nt_star=top.nt, boundary_flag=top.boundary,
        trace=trace,
        flags=[r.p_sen for r in trace if r.flagged],
        failures=[(r.p_sen, r.error) for r in trace if r.error],
    )


# ---------------------------------------------------------------------------
# Structural diagnostics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Theorem1Diagnostics:
    p_sen: float
    p_sen_critical: float
    left_derivative: float
    right_derivative: float
    left_derivative_sign: int
    right_derivative_sign: int
    predicted_right_sign: int
    concavity_violations: int
    probe_points: int
    max_second_derivative: float

    @property
    def consistent(self) -> bool:
        """Slope signs and concavity match the predicted structure."""
        return (self.left_derivative_sign > 0
                and self.right_derivative_sign == self.predicted_right_sign
                and self.concavity_violations == 0)


def _d2_richardson(f, x, h):
    def d2(hh):
        return (f(x + hh) - 2.0 * f(x) + f(x - hh)) / (hh * hh)
    return (4.0 * d2(h / 2.0) - d2(h)) / 3.0


def verify_theorem1(scenario: Scenario, p_sen: float, probe_points: int = 200,
                    h_rel: float = 1e-4) -> Theorem1Diagnostics:
    """Finite-difference check of the slope signs and concavity of ``NT(t_s)``.

    One-sided second-order differences at the ends, Richardson-extrapolated
    central second differences on an interior grid of ``probe_points``.
    """
    lo, T = t_s_bounds(scenario)
    h = h_rel * T

    def f(t):
        return evaluate(scenario, t_s=float(t), p_sen=p_sen).nt

    left = (-3.0 * f(lo) + 4.0 * f(lo + h) - f(lo + 2 * h)) / (2.0 * h)
    right = (3.0 * f(T) - 4.0 * f(T - h) + f(T - 2 * h)) / (2.0 * h)

    xs = np.linspace(lo + 2 * h, T - 2 * h, probe_points)
    d2 = np.array([_d2_richardson(f, x, h) for x in xs])
    # evaluation noise (~1e-12 from calibration) amplified by 1/h^2
    noise = 64.0 * 1e-12 * max(1.0, abs(f(T))) / (h * h)
    violations = int(np.sum(d2 > noise))

    crit = critical_sensing_power(scenario.access.p_dat, scenario.sensing, scenario.sic)
    fd = scenario.access.mode is Mode.FDTX
    predicted = 1 if (fd and p_sen > crit) else -1
    return Theorem1Diagnostics(
        p_sen=p_sen, p_sen_critical=crit,
        left_derivative=float(left), right_derivative=float(right),
        left_derivative_sign=int(np.sign(left)), right_derivative_sign=int(np.sign(right)),
        predicted_right_sign=predicted, concavity_violations=violations,
        probe_points=probe_points, max_second_derivative=float(np.max(d2)),
    )


# ---------------------------------------------------------------------------
# One-dimensional sweeps
# ---------------------------------------------------------------------------

def set_field(scenario: Scenario, path: str, value) -> Scenario:
    """Return a copy of ``scenario`` with ``section.field`` replaced."""
    from dataclasses import replace
    try:
        section, name = path.split(".")
    except ValueError:
        raise DomainError(f"sweep variable must look like section.field, got {path!r}") from None
    if section not in ("contention", "pu", "sic", "sensing", "access"):
        raise DomainError(f"unknown section {section!r}")
    part = getattr(scenario, section)
    if not hasattr(part, name):
        raise DomainError(f"{section} has no field {name!r}")
    if section == "access":
        new = part.with_(**{name: value})
    else:
        new = replace(part, **{name: value})
    return scenario.replace(**{section: new})


def sweep_parameter(scenario: Scenario, path: str, values, objective: str = "optimize", **opt_kw):
    """Evaluate or optimise the scenario for each value of one field.

    Used for throughput-vs-``p``, vs ``n0`` and vs ``T`` curves.  Returns a
    list of ``(value, result)`` with ``result`` a ThroughputReport
    (``objective="eval"``) or an OptimizationResult (``"optimize"``).
    """
    out = []
    for v in values:
        sc = set_field(scenario, path, v)
        if objective == "eval":
            out.append((v, evaluate(sc)))
        elif objective == "optimize":
            out.append((v, optimize_config(sc, **opt_kw)))
        else:
            raise DomainError(f"objective must be 'eval' or 'optimize', got {objective!r}")
    return out
