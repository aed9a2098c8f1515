"""Cycle-by-cycle Monte-Carlo estimate of the normalised throughput.

Each contention-and-access cycle is simulated from its primitives:

* contention: every slot draws the number of transmitters from
  ``Binomial(n0, p)`` (0 = idle slot costing sigma, 1 = reservation
  costing ``t_succ``, more = collision costing ``t_coll``) until a
  reservation succeeds; then ``2 SIFS + 2 PD + ACK`` is added;
* the PU is idle at the cycle start with probability ``P(H0)``; its idle
  clock starts at the cycle start and its active period is exponential;
* the sensing outcome is a Bernoulli draw with the calibrated false-alarm
  or detection probability;
* bits accrue at the stage rates of the analytical model.

Accounting mirrors the analytical model: a PU that arrives during the
contention phase, or returns to idle before the frame ends, yields a zero-bit
cycle (the closed forms have no term for either).  Those cycles still
consume their full duration.
"""
from __future__ import annotations

import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .contention import successful_and_collision_durations
from .core import Scenario
from .sensing import sensing_model
from .throughput import RateContext

__all__ = ["SimConfig", "CaseStats", "SimReport", "simulate"]

POLICIES = ("ignore", "count-and-flag", "active-remainder")
CASES = ("busy", "contention", "case1", "case2", "case3", "returned")


@dataclass(frozen=True)
class SimConfig:
    """Monte-Carlo settings.

    ``multi_transition_policy``:
      ``ignore``           zero bits when the PU returns to idle inside the frame
                           (what the closed forms assume);
      ``count-and-flag``   same accounting, plus a warning when such cycles
                           exceed 5 %;
      ``active-remainder`` keep the PU active until the frame ends
                           (sensitivity check, not the analytical model).
    ``force_idle_start`` and ``pf00_override`` exist for degenerate tests.
    """

    cycles: int = 100_000
    seed: int = 0
    record_cases: bool = True
    multi_transition_policy: str = "ignore"
    chunk_size: int = 50_000
    workers: int | None = None
    force_idle_start: bool = False
    pf00_override: float | None = None

    def __post_init__(self):
        if int(self.cycles) != self.cycles or self.cycles < 1:
            raise ValueError(f"cycles must be a positive integer, got {self.cycles}")
        if self.multi_transition_policy not in POLICIES:
            raise ValueError(f"multi_transition_policy must be one of {POLICIES}")
        if self.chunk_size < 1:
            raise ValueError("chunk_size must be >= 1")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must be an unsigned 64-bit integer")


@dataclass(frozen=True)
class CaseStats:
    """Per-case bits.  ``contribution`` is bits per cycle averaged over *all*
    cycles, which is what B1/B2/B3 estimate."""

    count: int
    frequency: float
    conditional_mean: float
    conditional_se: float
    contribution: float
    contribution_se: float


@dataclass
class SimReport:
    cycles: int
    seed: int
    nt_estimate: float
    nt_se: float
    mean_bits: float
    mean_cycle_time: float
    mean_collisions: float
    mean_collisions_se: float
    mean_idle_slots: float
    mean_idle_slots_se: float
    mean_t_ove: float
    multi_transition_fraction: float
    evacuation_violation_fraction: float
    cases: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)

    def as_row(self) -> dict:
        row = {
            "sim_cycles": self.cycles, "sim_seed": self.seed,
            "sim_nt": self.nt_estimate, "sim_nt_se": self.nt_se,
            "sim_mean_collisions": self.mean_collisions, "sim_mean_idle_slots": self.mean_idle_slots,
            "sim_multi_transition_fraction": self.multi_transition_fraction,
            "sim_evacuation_violation_fraction": self.evacuation_violation_fraction,
        }
        for k in ("case1", "case2", "case3"):
            c = self.cases.get(k)
            row[f"sim_{k}_bits"] = c.contribution if c else math.nan
            row[f"sim_{k}_bits_se"] = c.contribution_se if c else math.nan
        return row


# ---------------------------------------------------------------------------
# one chunk
# ---------------------------------------------------------------------------

def _contention(rng, n, cp):
    """Slot-by-slot contention for ``n`` cycles: (durations, collisions, idle slots)."""
    t_succ, t_coll = successful_and_collision_durations(cp)
    dur = np.zeros(n)
    coll = np.zeros(n, dtype=np.int64)
    idle = np.zeros(n, dtype=np.int64)
    live = np.arange(n)
    while live.size:
        k = rng.binomial(cp.n0, cp.p, size=live.size)
        is_idle, is_succ = k == 0, k == 1
        is_coll = ~(is_idle | is_succ)
        idle[live[is_idle]] += 1
        coll[live[is_coll]] += 1
        dur[live[is_idle]] += cp.sigma
        dur[live[is_coll]] += t_coll
        dur[live[is_succ]] += t_succ
        live = live[~is_succ]
    dur += 2.0 * cp.sifs + 2.0 * cp.pd + cp.ack
    return dur, coll, idle


def _chunk(args):
    scenario, sim, n, seed_seq, model_pf, model_pd = args
    rng = np.random.default_rng(seed_seq)
    cp, pu, acc = scenario.contention, scenario.pu, scenario.access
    ctx = RateContext.from_config(acc, pu, scenario.sensing, scenario.sic)
    T, ts, phi = acc.t_frame, acc.t_s, ctx.phi

    t_ove, coll, idle = _contention(rng, n, cp)
    idle_start = np.ones(n, bool) if sim.force_idle_start else rng.random(n) < pu.p_h0
    t1 = rng.exponential(pu.tau_id_bar, n)      # PU arrival, from cycle start
    t2 = rng.exponential(pu.tau_ac_bar, n)      # its active period
    u = rng.random(n)

    start = t_ove                     # data phase begins
    off = t1 - start                  # arrival offset inside the data phase
    end_active = t1 + t2 >= start + T
    returned = idle_start & (off >= 0) & (off < T) & ~end_active

    c_cont = idle_start & (off < 0)
    c1 = idle_start & (off >= T)
    c2 = idle_start & (off >= ts) & (off < T)
    c3 = idle_start & (off >= 0) & (off < ts)
    if sim.multi_transition_policy != "active-remainder":
        c2 &= end_active
        c3 &= end_active

    bits = np.zeros(n)
    # case 1: PU idle through the frame
    fa = u < model_pf
    bits[c1] = ts * ctx.s1 + np.where(fa[c1], 0.0, phi * (T - ts) * ctx.d1)
    # case 2: PU arrives during transmission
    o2 = off[c2]
    bits[c2] = ts * ctx.s1 + np.where(fa[c2], 0.0, phi * ((o2 - ts) * ctx.d1 + (T - o2) * ctx.d2))
    # case 3: PU arrives during sensing
    o3 = off[c3]
    det = u[c3] < model_pd(np.clip(o3, 0.0, ts))
    bits[c3] = o3 * ctx.s1 + (ts - o3) * ctx.s2 + np.where(det, 0.0, phi * (T - ts) * ctx.d2)

    cyc_t = t_ove + T
    undetected = (c2 & ~fa).sum() + int((~det).sum())
    arrivals = int((c2 | c3).sum())

    out = {"collisions": [float(coll.sum()), float((coll.astype(float) ** 2).sum())],
           "idle": [float(idle.sum()), float((idle.astype(float) ** 2).sum())],
           "t_ove": float(t_ove.sum()),
           "n_returned": int(returned.sum()), "idle_start": int(idle_start.sum()),
           "undetected": int(undetected), "arrivals": arrivals}
    masks = {"all": np.ones(n, bool)}
    if sim.record_cases:
        masks.update({"busy": ~idle_start, "contention": c_cont, "case1": c1, "case2": c2, "case3": c3,
                      "returned": returned & ~(c2 | c3)})
    for name, m in masks.items():
        b, t = bits[m], cyc_t[m]
        out[name] = [float(m.sum()), float(b.sum()), float((b * b).sum()),
                     float(t.sum()), float((t * t).sum()), float((b * t).sum())]
    return out


def _merge(chunks, key):
    cols = list(zip(*[c[key] for c in chunks]))
    return [math.fsum(col) for col in cols]


def _mean_se(s, ss, n):
    mean = s / n
    var = max(ss / n - mean * mean, 0.0) * n / max(n - 1, 1)
    return mean, math.sqrt(var / n)


def simulate(scenario: Scenario, sim: SimConfig = SimConfig()) -> SimReport:
    """Monte-Carlo estimate of the throughput with a delta-method standard error.

    Work is split into fixed-size chunks, each with its own child of
    ``SeedSequence(seed)``; partial sums are merged in chunk order, so the
    report does not depend on ``workers``.
    """
    model = sensing_model(scenario.access.t_s, scenario.access.p_sen, scenario.pu,
                          scenario.sensing, scenario.sic)
    pf = model.pf00 if sim.pf00_override is None else sim.pf00_override
    sizes = [sim.chunk_size] * (sim.cycles // sim.chunk_size)
    if sim.cycles % sim.chunk_size:
        sizes.append(sim.cycles % sim.chunk_size)
    seeds = np.random.SeedSequence(sim.seed).spawn(len(sizes))
    jobs = [(scenario, sim, n, ss, pf, model.pd01) for n, ss in zip(sizes, seeds)]
    if sim.workers and sim.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=sim.workers) as ex:
            chunks = list(ex.map(_chunk, jobs))
    else:
        chunks = [_chunk(j) for j in jobs]

    N = sim.cycles
    n, sb, sbb, st, stt, sbt = _merge(chunks, "all")
    mb, mt = sb / N, st / N
    nt = sb / st
    # delta method for a ratio of means: Var(b - R t) / (N mean(t)^2)
    resid_var = (sbb - 2 * nt * sbt + nt * nt * stt) / N - (mb - nt * mt) ** 2
    nt_se = math.sqrt(max(resid_var, 0.0) * N / max(N - 1, 1) / N) / mt

    coll_s, coll_ss = _merge(chunks, "collisions")
    idle_s, idle_ss = _merge(chunks, "idle")
    mc, mc_se = _mean_se(coll_s, coll_ss, N)
    mi, mi_se = _mean_se(idle_s, idle_ss, N)
    idle_start = sum(c["idle_start"] for c in chunks)
    arrivals = sum(c["arrivals"] for c in chunks)
    returned = sum(c["n_returned"] for c in chunks)

    report = SimReport(
        cycles=N, seed=sim.seed, nt_estimate=nt, nt_se=nt_se,
        mean_bits=mb, mean_cycle_time=mt,
        mean_collisions=mc, mean_collisions_se=mc_se,
        mean_idle_slots=mi, mean_idle_slots_se=mi_se,
        mean_t_ove=math.fsum(c["t_ove"] for c in chunks) / N,
        multi_transition_fraction=returned / idle_start if idle_start else 0.0,
        evacuation_violation_fraction=(sum(c["undetected"] for c in chunks) / arrivals) if arrivals else 0.0,
    )
    if sim.record_cases:
        for name in CASES:
            cn, cb, cbb, *_ = _merge(chunks, name)
            cond_m, cond_se = _mean_se(cb, cbb, cn) if cn else (math.nan, math.nan)
            contrib, contrib_se = _mean_se(cb, cbb, N)
            report.cases[name] = CaseStats(int(cn), cn / N, cond_m, cond_se, contrib, contrib_se)
            if name in ("case1", "case2", "case3") and cn < 30:
                report.warnings.append(f"only {int(cn)} {name} cycles; its statistics are unreliable")
    if N < 1000:
        report.warnings.append(f"{N} cycles is too few for a meaningful confidence interval")
    if sim.multi_transition_policy == "count-and-flag" and report.multi_transition_fraction >= 0.05:
        report.warnings.append(
            f"PU returned to idle inside the frame in {report.multi_transition_fraction:.1%} of idle-start cycles")
    for w in report.warnings:
        warnings.warn(w, RuntimeWarning, stacklevel=2)
    return report
