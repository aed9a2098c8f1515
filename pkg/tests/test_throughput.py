import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate

from fdcmac import (
    AccessConfig, Mode, PuModel, Scenario, SicModel, contention_overhead, db_to_linear,
    evaluate, normalized_throughput, sensing_model,
)
from fdcmac.exceptions import DomainError, NumericalError
from fdcmac.throughput import RateContext, _b31, bits_case1, bits_case2, bits_case3, k_e_factor


def parts(s: Scenario):
    a = s.access
    t_ove = contention_overhead(s.contention).t_ove
    ctx = RateContext.from_config(a, s.pu, s.sensing, s.sic)
    model = sensing_model(a.t_s, a.p_sen, s.pu, s.sensing, s.sic)
    return a, t_ove, ctx, model, k_e_factor(t_ove, a.t_frame, s.pu), s.pu.inv_delta_tau


def double_integral_bits(s: Scenario):
    """B2 and B3 straight from their definition: integrate over the PU idle
    time t (from cycle start) and its active time u, keeping only histories
    where the PU stays active to the end of the frame."""
    a, t_ove, ctx, model, _, _ = parts(s)
    pu, T, ts, phi = s.pu, a.t_frame, a.t_s, ctx.phi
    f_id = lambda t: math.exp(-t / pu.tau_id_bar) / pu.tau_id_bar
    f_ac = lambda u: math.exp(-u / pu.tau_ac_bar) / pu.tau_ac_bar
    end = t_ove + T

    def bits2(u, t):
        x = t - t_ove
        return (ts * ctx.s1 + phi * (1 - model.pf00) * ((x - ts) * ctx.d1 + (T - x) * ctx.d2)) * f_id(t) * f_ac(u)

    def bits3(u, t):
        x = t - t_ove
        miss = 1 - model.pd01_scalar(x)
        return (x * ctx.s1 + (ts - x) * ctx.s2 + miss * phi * (T - ts) * ctx.d2) * f_id(t) * f_ac(u)

    kw = dict(epsabs=1e-13, epsrel=1e-11)
    umax = lambda t: end - t + 60 * pu.tau_ac_bar
    b2 = integrate.dblquad(bits2, t_ove + ts, end, lambda t: end - t, umax, **kw)[0]
    b3 = integrate.dblquad(bits3, t_ove, t_ove + ts, lambda t: end - t, umax, **kw)[0]
    return pu.p_h0 * b2, pu.p_h0 * b3


SCENARIOS = [
    Scenario(),
    Scenario(access=AccessConfig(t_s=0.006, p_sen=db_to_linear(10.0), mode=Mode.HDTX)),
    Scenario(pu=PuModel(tau_id_bar=0.5, tau_ac_bar=0.05), sic=SicModel(0.7, 1.0),
             access=AccessConfig(t_s=0.011, p_sen=db_to_linear(2.0))),
    Scenario(pu=PuModel(tau_id_bar=0.04, tau_ac_bar=0.2, p_pu=0.1), access=AccessConfig(t_s=0.001)),
]


@pytest.mark.parametrize("s", SCENARIOS)
def test_closed_forms_match_double_integrals(s):
    rep = evaluate(s)
    b2, b3 = double_integral_bits(s)
    assert rep.b2 == pytest.approx(b2, rel=1e-8)
    assert rep.b3 == pytest.approx(b3, rel=1e-8)


def test_case1_is_survival_times_bits():
    s = Scenario()
    a, t_ove, ctx, model, k_e, k = parts(s)
    direct = s.pu.p_h0 * math.exp(-(t_ove + a.t_frame) / s.pu.tau_id_bar) * (
        a.t_s * ctx.s1 + 2 * (1 - model.pf00) * (a.t_frame - a.t_s) * ctx.d1)
    assert bits_case1(a, ctx, model.pf00, k_e, k) == pytest.approx(direct, rel=1e-13)


def test_full_sensing_boundary():
    s = Scenario().with_access(t_s=0.015)
    a, t_ove, ctx, model, k_e, k = parts(s)
    assert bits_case1(a, ctx, model.pf00, k_e, k) == pytest.approx(k_e * math.exp(a.t_frame * k) * a.t_frame * ctx.s1)
    assert bits_case2(a, ctx, model.pf00, k_e, k, s.pu) == 0.0


def test_certain_false_alarm_leaves_sensing_bits():
    s = Scenario()
    a, t_ove, ctx, model, k_e, k = parts(s)
    assert bits_case1(a, ctx, 1.0, k_e, k) == pytest.approx(k_e * math.exp(a.t_frame * k) * a.t_s * ctx.s1)


def test_case2_without_pu_power():
    s = Scenario(pu=PuModel(p_pu=0.0))
    a, t_ove, ctx, model, k_e, k = parts(s)
    assert ctx.d1 == ctx.d2
    dtau, tid = 1 / k, s.pu.tau_id_bar
    e_t, e_s = math.exp(a.t_frame * k), math.exp(a.t_s * k)
    hand = k_e * dtau / tid * (e_t - e_s) * (a.t_s * ctx.s1 + 2 * (a.t_frame - a.t_s) * (1 - model.pf00) * ctx.d1)
    assert bits_case2(a, ctx, model.pf00, k_e, k, s.pu) == pytest.approx(hand, rel=1e-12)


@pytest.mark.parametrize("rel", [0.0, 1e-12, 1e-9, 1e-6, 1e-4, 1e-3, 1e-2])
def test_equal_means_branch_is_continuous(rel):
    # near tau_ac == tau_id the two evaluation paths must agree
    base = evaluate(Scenario(pu=PuModel(tau_id_bar=0.15, tau_ac_bar=0.15)))
    near = evaluate(Scenario(pu=PuModel(tau_id_bar=0.15, tau_ac_bar=0.15 * (1 + rel))))
    assert near.nt == pytest.approx(base.nt, rel=max(2 * rel, 1e-12))


def test_equal_means_matches_double_integral():
    s = Scenario(pu=PuModel(tau_id_bar=0.15, tau_ac_bar=0.15))
    rep = evaluate(s)
    b2, b3 = double_integral_bits(s)
    assert rep.b2 == pytest.approx(b2, rel=1e-8) and rep.b3 == pytest.approx(b3, rel=1e-8)


def test_perfect_detection_cancels_transmission_bits():
    # with detection certain and tau_ac -> inf, the detected-case term removes
    # everything the transmission stage would have carried in case 3
    pu = PuModel(tau_id_bar=0.15, tau_ac_bar=1e12)
    s = Scenario(pu=pu)
    a, t_ove, ctx, model, k_e, k = parts(s)
    only_td = RateContext(0.0, 0.0, ctx.gamma_d1, ctx.gamma_d2, ctx.theta, ctx.phi)
    td11 = ctx.phi * (a.t_frame - a.t_s) * ctx.d2
    b31 = _b31(a, only_td, k_e, k, pu)
    b32_perfect = -k_e * td11 * -math.expm1(-a.t_s / pu.tau_id_bar)
    assert b31 + b32_perfect == pytest.approx(0.0, abs=1e-12 * b31)


def test_case3_vanishes_with_sensing_time():
    # smallest sensing time that still gives the detector ten samples
    vals = [evaluate(Scenario(), t_s=t).b3 for t in (1e-3, 1e-4, 1e-5, 2e-6)]
    assert vals[-1] < 1e-2 * vals[0]
    assert all(b < a for a, b in zip(vals, vals[1:]))


def test_b32_bounds_hold_and_are_checked(fig5):
    a, t_ove, ctx, model, k_e, k = parts(fig5)
    b3, b31, b32 = bits_case3(a, ctx, model, k_e, k, fig5.pu)
    td11 = ctx.phi * (a.t_frame - a.t_s) * ctx.d2
    base = k_e * td11 * model.pd_avg * -math.expm1(-a.t_s / fig5.pu.tau_id_bar)
    assert base <= -b32 <= base * math.exp(a.t_s / fig5.pu.tau_ac_bar)
    # a detector model that disagrees with its own average trips the check
    from dataclasses import replace
    broken = replace(model, pd_avg=0.3)
    with pytest.raises(NumericalError):
        bits_case3(a, ctx, broken, k_e, k, fig5.pu)


def test_report_invariants(fig5):
    r = evaluate(fig5)
    assert r.nt == pytest.approx((r.b1 + r.b2 + r.b3) / (r.t_ove + r.t_frame), rel=1e-15)
    assert min(r.b1, r.b2, r.b3) >= 0 and 0 <= r.pf00 <= 1
    assert r.delta_tau_inv == pytest.approx(1 / 0.05 - 1 / 0.15)
    g = r.gammas
    assert g["gamma_s1"] >= g["gamma_s2"] > 0 and g["gamma_d1"] >= g["gamma_d2"] > 0
    assert set(r.as_row()) >= {"nt", "b1", "b2", "b3", "gamma_s1", "gamma_d2", "pf00"}


def test_hd_mac_special_case(fig5):
    r = evaluate(fig5.with_access(mode=Mode.HDTX), p_sen=0.0)
    assert math.isfinite(r.nt) and r.nt > 0
    assert r.gammas["gamma_s1"] == 0.0 and r.b3 >= 0


def test_single_stage_special_case(fig5):
    r = evaluate(fig5, t_s=fig5.access.t_frame)
    assert r.b2 == 0.0 and r.nt > 0


def test_sensing_time_domain(fig5):
    with pytest.raises(DomainError):
        normalized_throughput(fig5.access.with_(t_s=0.0), fig5.contention, fig5.pu, fig5.sensing, fig5.sic)


@pytest.mark.parametrize("t_s", [1e-3, 4e-3, 9e-3, 0.015])
@pytest.mark.parametrize("p_db", [-5.0, 5.0, 15.0])
def test_two_way_beats_one_way_without_self_interference(t_s, p_db):
    s = Scenario(sic=SicModel(0.0, 1.0))
    fd = evaluate(s.with_access(mode=Mode.FDTX), t_s=t_s, p_sen=db_to_linear(p_db)).nt
    hd = evaluate(s.with_access(mode=Mode.HDTX), t_s=t_s, p_sen=db_to_linear(p_db)).nt
    assert fd >= hd


def test_continuous_in_sensing_time(fig5):
    ts = np.linspace(2e-4, 0.015, 400)
    nt = np.array([evaluate(fig5, t_s=t).nt for t in ts])
    d = np.abs(np.diff(nt))
    # no jump larger than ten times the neighbouring steps
    for i in range(1, len(d) - 1):
        assert d[i] <= 10 * max(d[i - 1], d[i + 1]) + 1e-12


def test_more_white_space_more_throughput():
    vals = [evaluate(Scenario(pu=PuModel(tau_id_bar=t))).nt for t in np.linspace(0.05, 2.0, 25)]
    assert all(b > a for a, b in zip(vals, vals[1:]))


@given(st.floats(5e-4, 0.015), st.floats(-10, 15), st.floats(0, 1), st.floats(0.3, 1),
       st.sampled_from(list(Mode)), st.floats(0.05, 2), st.floats(0.02, 2))
def test_random_configs_satisfy_invariants(t_s, p_db, zeta, xi, mode, tid, tac):
    s = Scenario(pu=PuModel(tau_id_bar=tid, tau_ac_bar=tac), sic=SicModel(zeta, xi),
                 access=AccessConfig(t_s=t_s, p_sen=db_to_linear(p_db), mode=mode))
    r = evaluate(s)
    assert min(r.b1, r.b2, r.b3) >= 0 and 0 <= r.pf00 <= 1 and r.nt > 0
