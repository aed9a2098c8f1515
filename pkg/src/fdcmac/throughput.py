"""Expected bits per cycle and normalised saturation throughput.

The data phase of length ``T`` starts after the contention overhead
``t_ove``.  With the PU idle at the start of the data phase, three PU
histories contribute bits:

* case 1: the PU stays idle for the whole data phase,
* case 2: it turns active during the transmission stage,
* case 3: it turns active during the sensing stage and stays active.

``B1``, ``B2`` and ``B31`` have closed forms; ``B32`` needs the detection
probability under a mid-window arrival and is integrated numerically.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from . import contention as _contention
from .core import (
    AccessConfig, ContentionParams, PuModel, Scenario, SensingConfig, SicModel,
    ThroughputReport, self_interference,
)
from .exceptions import DomainError, NumericalError
from .sensing import SensingOutcomeModel, _quad, sensing_model

__all__ = [
    "RateContext",
    "k_e_factor",
    "bits_case1",
    "bits_case2",
    "bits_case3",
    "normalized_throughput",
    "evaluate",
]

# Below this |T / delta_tau| the literal closed forms lose too many digits to
# cancellation; switch to the (e^x - 1)/x kernels.
SERIES_SWITCH = 1e-3
NEG_CLAMP_REL = 1e-12


@dataclass(frozen=True)
class RateContext:
    """Per-stage SNR/SINR values (linear) and the mode pair (theta, phi)."""

    gamma_s1: float
    gamma_s2: float
    gamma_d1: float
    gamma_d2: float
    theta: int
    phi: int

    @classmethod
    def from_config(cls, cfg: AccessConfig, pu: PuModel, sc: SensingConfig, sic: SicModel) -> "RateContext":
        n0 = sc.n0_noise
        i_dat = cfg.theta * self_interference(cfg.p_dat, sic)
        return cls(
            gamma_s1=cfg.p_sen / n0,
            gamma_s2=cfg.p_sen / (n0 + pu.p_pu),
            gamma_d1=cfg.p_dat / (n0 + i_dat),
            gamma_d2=cfg.p_dat / (n0 + pu.p_pu + i_dat),
            theta=cfg.theta,
            phi=cfg.phi,
        )

    # spectral efficiencies in bits/s/Hz
    @property
    def s1(self) -> float:
        return math.log2(1.0 + self.gamma_s1)

    @property
    def s2(self) -> float:
        return math.log2(1.0 + self.gamma_s2)

    @property
    def d1(self) -> float:
        return math.log2(1.0 + self.gamma_d1)

    @property
    def d2(self) -> float:
        return math.log2(1.0 + self.gamma_d2)


def k_e_factor(t_ove, t_frame, pu: PuModel) -> float:
    """``P(H0) * exp(-(t_ove / tau_id + T / tau_ac))``."""
    return pu.p_h0 * math.exp(-(t_ove / pu.tau_id_bar + t_frame / pu.tau_ac_bar))


def _e1(x):
    """(e^x - 1) / x, continuous at 0."""
    if abs(x) < 1e-5:
        return 1.0 + x / 2.0 + x * x / 6.0
    return math.expm1(x) / x


def _e2(x):
    """integral_0^1 u e^{x u} du = (x e^x - e^x + 1) / x^2, continuous at 0."""
    if abs(x) < 1e-3:
        return 0.5 + x / 3.0 + x * x / 8.0 + x ** 3 / 30.0
    return (x * math.exp(x) - math.expm1(x)) / (x * x)


def _nonneg(value, scale, what):
    if value >= 0.0:
        return value
    if abs(value) <= NEG_CLAMP_REL * max(scale, 0.0):
        return 0.0
    raise NumericalError(f"{what} evaluated to {value!r} (reference scale {scale!r})", residual=value)


def bits_case1(cfg: AccessConfig, ctx: RateContext, pf00, k_e, inv_dtau) -> float:
    """Expected bits/Hz from cycles where the PU stays idle throughout."""
    T, ts = cfg.t_frame, cfg.t_s
    return k_e * math.exp(T * inv_dtau) * (
        ts * ctx.s1 + ctx.phi * (1.0 - pf00) * (T - ts) * ctx.d1)


def bits_case2(cfg: AccessConfig, ctx: RateContext, pf00, k_e, inv_dtau, pu: PuModel,
               scale: float | None = None) -> float:
    """Expected bits/Hz from cycles where the PU arrives in the transmission stage."""
    T, ts, phi = cfg.t_frame, cfg.t_s, ctx.phi
    ts00 = ts * ctx.s1
    tau_id = pu.tau_id_bar
    if abs(T * inv_dtau) >= SERIES_SWITCH:
        dtau = 1.0 / inv_dtau
        e_t, e_s = math.exp(T * inv_dtau), math.exp(ts * inv_dtau)
        val = k_e * dtau / tau_id * (
            (e_t - e_s) * (ts00 - phi * dtau * (1.0 - pf00) * (ctx.d1 - ctx.d2))
            + phi * (T - ts) * (1.0 - pf00) * (e_t * ctx.d1 - e_s * ctx.d2))
    else:
        # direct form of the same integral over the arrival offset s in [0, L]
        length = T - ts
        e_s = math.exp(ts * inv_dtau)
        a0 = e_s * length * _e1(inv_dtau * length)          # int e^{k(ts+s)} ds
        a1 = e_s * length ** 2 * _e2(inv_dtau * length)     # int s e^{k(ts+s)} ds
        val = k_e / tau_id * (
            ts00 * a0 + phi * (1.0 - pf00) * (ctx.d2 * (length * a0 - a1) + ctx.d1 * a1))
    if scale is None:
        scale = bits_case1(cfg, ctx, pf00, k_e, inv_dtau)
    return _nonneg(val, scale, "B2")


def _b31(cfg: AccessConfig, ctx: RateContext, k_e, inv_dtau, pu: PuModel) -> float:
    T, ts, phi = cfg.t_frame, cfg.t_s, ctx.phi
    td11 = phi * (T - ts) * ctx.d2
    tau_id = pu.tau_id_bar
    if abs(T * inv_dtau) >= SERIES_SWITCH:
        dtau = 1.0 / inv_dtau
        x = ts * inv_dtau
        return k_e * dtau / tau_id * (
            dtau * ((x - 1.0) * math.exp(x) + 1.0) * (ctx.s1 - ctx.s2)
            + math.expm1(x) * (td11 + ts * ctx.s2))
    x = ts * inv_dtau
    return k_e / tau_id * ((ctx.s1 - ctx.s2) * ts ** 2 * _e2(x) + (ts * ctx.s2 + td11) * ts * _e1(x))


def _t32(model: SensingOutcomeModel, pu: PuModel) -> float:
    """Integral of the detection probability against f_id(t) exp(t / tau_ac) on [0, t_s]."""
    tau_id, inv_dtau = pu.tau_id_bar, pu.inv_delta_tau
    ts = model.t_s
    return _quad(lambda t: model.pd01_scalar(t) * math.exp(t * inv_dtau) / tau_id, 0.0, ts, "T32")


def bits_case3(cfg: AccessConfig, ctx: RateContext, model: SensingOutcomeModel, k_e, inv_dtau,
               pu: PuModel, check_bounds: bool = True):
    """Expected bits/Hz from cycles where the PU arrives during sensing.

    Returns ``(b3, b31, b32)``.
    """
    T, ts = cfg.t_frame, cfg.t_s
    td11 = ctx.phi * (T - ts) * ctx.d2
    b31 = _b31(cfg, ctx, k_e, inv_dtau, pu)
    t32 = _t32(model, pu) if td11 > 0.0 else 0.0
    b32 = -k_e * td11 * t32
    if check_bounds and td11 > 0.0:
        base = model.pd_avg * -math.expm1(-ts / pu.tau_id_bar)
        lo = base * (1.0 - 1e-8)
        hi = base * math.exp(ts / pu.tau_ac_bar) * (1.0 + 1e-8)
        if not lo - 1e-14 <= t32 <= hi + 1e-14:
            raise NumericalError(f"T32={t32!r} outside its a-priori bounds [{lo!r}, {hi!r}]")
    b3 = _nonneg(b31 + b32, b31, "B3")
    return b3, b31, b32


def normalized_throughput(cfg: AccessConfig, cp: ContentionParams, pu: PuModel,
                          sc: SensingConfig, sic: SicModel) -> ThroughputReport:
    """Normalised throughput ``(B1 + B2 + B3) / (t_ove + T)`` in bits/s/Hz."""
    if not 0.0 < cfg.t_s <= cfg.t_frame:
        raise DomainError(f"t_s must lie in (0, T], got {cfg.t_s}")
    if not cfg.t_frame < pu.t_eva:
        raise DomainError(f"frame length {cfg.t_frame} must be shorter than t_eva {pu.t_eva}")
    stats = _contention.contention_overhead(cp)
    k_e = k_e_factor(stats.t_ove, cfg.t_frame, pu)
    inv_dtau = pu.inv_delta_tau
    ctx = RateContext.from_config(cfg, pu, sc, sic)
    model = sensing_model(cfg.t_s, cfg.p_sen, pu, sc, sic)
    pf = model.pf00

    b1 = bits_case1(cfg, ctx, pf, k_e, inv_dtau)
    b2 = bits_case2(cfg, ctx, pf, k_e, inv_dtau, pu, scale=b1)
    b3, b31, b32 = bits_case3(cfg, ctx, model, k_e, inv_dtau, pu)
    nt = (b1 + b2 + b3) / (stats.t_ove + cfg.t_frame)
    return ThroughputReport(
        t_ove=stats.t_ove, t_cont_bar=stats.t_cont_bar,
        b1=b1, b2=b2, b3=b3, nt=nt,
        gammas={
            "gamma_s1": ctx.gamma_s1, "gamma_s2": ctx.gamma_s2,
            "gamma_d1": ctx.gamma_d1, "gamma_d2": ctx.gamma_d2,
            "gamma_ps": model.gamma_ps,
        },
        pf00=pf, epsilon=model.epsilon_star, k_e=k_e, delta_tau_inv=inv_dtau,
        b31=b31, b32=b32, t_frame=cfg.t_frame, t_s=cfg.t_s, p_sen=cfg.p_sen,
    )


def evaluate(scenario: Scenario, t_s: float | None = None, p_sen: float | None = None) -> ThroughputReport:
    """:func:`normalized_throughput` for a bundled scenario, optionally
    overriding the sensing time and sensing-stage power."""
    access = scenario.access
    changes = {}
    if t_s is not None:
        changes["t_s"] = t_s
    if p_sen is not None:
        changes["p_sen"] = p_sen
    if changes:
        access = access.with_(**changes)
    return normalized_throughput(access, scenario.contention, scenario.pu, scenario.sensing, scenario.sic)
