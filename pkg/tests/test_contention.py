import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fdcmac import (
    ContentionParams, InfeasibleContentionError, contention_overhead, slot_probabilities,
    successful_and_collision_durations,
)

ZERO_TIMES = dict(sigma=0.0, difs=0.0, sifs=0.0, rts=0.0, cts=0.0, ack=0.0, pd=0.0)


def test_slot_probabilities_examples():
    assert slot_probabilities(ContentionParams(n0=1, p=1.0)) == (1.0, 0.0, 0.0)
    ps, pi, pc = slot_probabilities(ContentionParams(n0=2, p=0.5))
    assert (ps, pi, pc) == pytest.approx((0.5, 0.25, 0.25), abs=1e-15)
    assert slot_probabilities(ContentionParams())[1] == pytest.approx(0.9157, abs=1e-3)


def test_idle_probability_matches_slot_sampling(rng):
    cp = ContentionParams()
    k = rng.binomial(cp.n0, cp.p, size=10 ** 6)
    p_idle = slot_probabilities(cp)[1]
    se = math.sqrt(p_idle * (1 - p_idle) / k.size)
    assert abs(np.mean(k == 0) - p_idle) < 3 * se


@given(st.integers(1, 500), st.floats(1e-6, 1.0))
def test_slot_probabilities_sum_to_one(n0, p):
    out = slot_probabilities(ContentionParams(n0=n0, p=p))
    assert sum(out) == pytest.approx(1.0, abs=1e-12)
    assert all(0.0 <= x <= 1.0 for x in out)


def test_durations():
    assert successful_and_collision_durations(ContentionParams(**ZERO_TIMES)) == (0.0, 0.0)
    t_succ, t_coll = successful_and_collision_durations(ContentionParams())
    assert t_succ == pytest.approx(1.042e-3, abs=1e-12)
    assert t_coll == pytest.approx(0.601e-3, abs=1e-12)


def test_degenerate_single_station():
    st_ = contention_overhead(ContentionParams(n0=1, p=1.0))
    assert st_.t_idle_bar == 0.0 and st_.n_coll_bar == 0.0
    assert st_.t_cont_bar == st_.t_succ


def test_default_overhead_values():
    cp = ContentionParams()
    s = contention_overhead(cp)
    assert s.n_coll_bar == pytest.approx(0.0439, abs=1e-3)
    assert s.t_idle_bar == pytest.approx(10.86, abs=0.05)
    assert s.t_ove == pytest.approx(s.t_cont_bar + 2 * 40e-6 + 2e-6 + 400e-6, abs=1e-15)
    assert s.t_ove == pytest.approx(1.77735e-3, rel=1e-4)


def test_overhead_against_geometric_sampling(rng):
    # oracle: collisions before success are geometric in the busy slots, idle
    # runs geometric in all slots; 10^6 draws each
    cp = ContentionParams()
    s = contention_overhead(cp)
    n = 10 ** 6
    q_succ_given_busy = s.p_succ / (1 - s.p_idle)
    coll = rng.geometric(q_succ_given_busy, size=n) - 1
    idle_run = rng.geometric(1 - s.p_idle, size=n) - 1
    for sample, target in ((coll, s.n_coll_bar), (idle_run, s.t_idle_bar)):
        se = sample.std(ddof=1) / math.sqrt(n)
        assert abs(sample.mean() - target) < 3 * se


def test_collisions_increase_with_population():
    vals = [contention_overhead(ContentionParams(n0=n, p=0.0022)).n_coll_bar for n in range(2, 101)]
    assert all(b > a for a, b in zip(vals, vals[1:]))


def test_single_station_contention_shrinks_with_p():
    ps = np.linspace(0.01, 1.0, 60)
    vals = [contention_overhead(ContentionParams(n0=1, p=p)).t_cont_bar for p in ps]
    assert all(b < a for a, b in zip(vals, vals[1:]))


def test_infeasible_contention():
    with pytest.raises(InfeasibleContentionError):
        contention_overhead(ContentionParams(n0=3, p=1.0))


def test_large_population_stays_finite():
    s = contention_overhead(ContentionParams(n0=5000, p=0.05))
    assert math.isfinite(s.t_cont_bar) and s.n_coll_bar > 1e50
    assert s.t_cont_bar >= s.t_succ


@given(st.integers(1, 200), st.floats(1e-4, 0.2))
def test_overhead_invariants(n0, p):
    s = contention_overhead(ContentionParams(n0=n0, p=p))
    assert s.t_idle_bar >= 0 and s.n_coll_bar >= 0 and s.t_cont_bar >= s.t_succ
