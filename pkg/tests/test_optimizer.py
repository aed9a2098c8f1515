import math

import numpy as np
import pytest

from fdcmac import (
    AccessConfig, DomainError, Mode, Scenario, SensingConfig, SicModel, db_to_linear,
    evaluate, linear_to_db, load_manifest,
)
from fdcmac.optimizer import (
    _peaks, critical_sensing_power, optimize_config, optimize_ts, power_grid, set_field,
    sweep_parameter, t_s_bounds, verify_theorem1,
)


def test_critical_power_examples():
    sc = SensingConfig()
    # without self-interference: N0 [(1 + P/N0)^2 - 1]
    assert critical_sensing_power(1.0, sc, SicModel(0.0, 1.0)) == pytest.approx(3.0)
    assert critical_sensing_power(10.0, sc, SicModel(0.0, 1.0)) == pytest.approx(120.0)
    # linear leakage saturates the data SINR at 1/zeta
    big = critical_sensing_power(1e9, sc, SicModel(0.5, 1.0))
    assert big == pytest.approx(8.0, rel=1e-6)
    with pytest.raises(DomainError):
        critical_sensing_power(0.0, sc, SicModel())


def test_power_grid_shape():
    g = power_grid(db_to_linear(15.0), step_db=0.25, min_db=-10.0)
    assert g[0] == 0.0 and g[-1] == pytest.approx(db_to_linear(15.0), rel=1e-12)
    assert linear_to_db(g[1]) == pytest.approx(-10.0)
    assert np.allclose(np.diff(linear_to_db(g[1:])), 0.25)
    assert list(power_grid(0.0)) == [0.0]


def test_peak_counter():
    assert _peaks(np.array([1, 2, 3, 2, 1.0])) == 1
    assert _peaks(np.array([1, 2, 3.0])) == 1
    assert _peaks(np.array([3, 2, 1.0])) == 1
    assert _peaks(np.array([1, 3, 1, 3, 1.0])) == 2
    assert _peaks(np.array([2, 1, 2.0])) == 2
    assert _peaks(np.ones(5)) == 1


@pytest.mark.parametrize("p_db", [-5.0, 2.0, 8.0, 15.0])
@pytest.mark.parametrize("mode", list(Mode))
def test_line_search_matches_dense_grid(p_db, mode):
    s = load_manifest("fig4").scenario.with_access(mode=mode)
    p = db_to_linear(p_db)
    lo, hi = t_s_bounds(s)
    ts = np.linspace(lo, hi, 2000)
    dense = max(evaluate(s, t_s=t, p_sen=p).nt for t in ts)
    r = optimize_ts(s, p)
    assert r.nt >= dense * (1 - 1e-6)
    assert not r.flagged


def test_fd_above_critical_power_ends_at_frame(fig5):
    # strong leakage caps the data SINR, pulling the critical power below p_max
    s = fig5.replace(sic=SicModel(0.8, 1.0))
    crit = critical_sensing_power(s.access.p_dat, s.sensing, s.sic)
    p = min(2 * crit, s.access.p_max)
    assert p > crit
    assert optimize_ts(s, p).boundary


def test_line_search_rejects_power_above_cap(fig5):
    with pytest.raises(DomainError):
        optimize_ts(fig5, fig5.access.p_max * 1.01)


def test_parallel_equals_serial(fig5):
    a = optimize_config(fig5, step_db=1.0)
    b = optimize_config(fig5, step_db=1.0, workers=3)
    assert a.trace == b.trace
    assert a.summary() == b.summary()


def test_trace_invariants(fig5):
    r = optimize_config(fig5, step_db=1.0)
    ok = [t for t in r.trace if not t.error]
    assert r.nt_star == max(t.nt for t in ok)
    assert all(0 < t.t_s <= fig5.access.t_frame for t in ok)
    assert all(t.p_sen <= fig5.access.p_max * (1 + 1e-12) for t in r.trace)
    assert r.trace[0].p_sen == 0.0 and r.trace[0].p_sen_db == -math.inf
    assert r.flags == [] and r.failures == []
    assert set(r.summary()) == {"t_s_star", "p_sen_star", "p_sen_star_db", "nt_star", "boundary_flag",
                                "flagged_points", "failed_points"}


def test_refinement_never_loses(fig5):
    coarse = optimize_config(fig5, step_db=1.0, refine=False)
    fine = optimize_config(fig5, step_db=1.0, refine=True)
    assert fine.nt_star >= coarse.nt_star
    assert len(fine.trace) >= len(coarse.trace)


def test_vanishing_power_cap():
    s = Scenario(access=AccessConfig(p_max=1e-9, p_sen=1e-9, mode=Mode.HDTX))
    r = optimize_config(s, step_db=1.0)
    assert math.isfinite(r.nt_star) and r.nt_star >= 0


def test_explicit_power_list(fig5):
    r = optimize_config(fig5, powers=[0.0, 1.0, 10.0])
    assert [t.p_sen for t in r.trace] == [0.0, 1.0, 10.0]


def test_bundled_scenarios_are_unimodal():
    for name in ("fig4", "fig5", "fig6", "fig7"):
        s = load_manifest(name).scenario
        r = optimize_config(s, step_db=2.0, refine=False)
        assert r.flags == [], name


def test_concavity_on_reference_scenarios():
    for name in ("fig4", "fig5"):
        s = load_manifest(name).scenario
        for p_db in (-5.0, 5.0, 15.0):
            d = verify_theorem1(s, db_to_linear(p_db), probe_points=60)
            assert d.concavity_violations == 0, (name, p_db, d.max_second_derivative)
            assert d.left_derivative > 0


def test_hd_transmission_slope_at_frame_end():
    # the one-way mode should always prefer to stop sensing before the frame ends
    s = load_manifest("fig7").scenario
    for p_db in (-5.0, 5.0, 15.0):
        d = verify_theorem1(s, db_to_linear(p_db), probe_points=20)
        assert d.right_derivative < 0, (p_db, d.right_derivative)


def test_boundary_classification_follows_critical_power():
    s = load_manifest("fig4").scenario
    crit = critical_sensing_power(s.access.p_dat, s.sensing, s.sic)
    for p_db in np.arange(-5.0, linear_to_db(s.access.p_max) + 1e-9, 2.5):
        p = db_to_linear(p_db)
        assert optimize_ts(s, p).boundary == (p > crit), (p_db, linear_to_db(crit))


def test_set_field_and_sweep(fig5):
    s = set_field(fig5, "contention.n0", 20)
    assert s.contention.n0 == 20
    with pytest.raises(DomainError):
        set_field(fig5, "nope.n0", 1)
    with pytest.raises(DomainError):
        set_field(fig5, "pu.nope", 1)
    out = sweep_parameter(fig5, "pu.tau_id_bar", [0.1, 0.2, 0.4], objective="eval")
    nts = [r.nt for _, r in out]
    assert nts == sorted(nts)
    opt = sweep_parameter(fig5, "access.t_frame", [0.01, 0.02], step_db=3.0, refine=False)
    assert all(r.nt_star > 0 for _, r in opt)
