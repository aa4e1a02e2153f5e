import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import chain_waiting_probability, truncated_chain
from signage.errors import DimensionMismatch, UnstableQueue
from signage.queueing import (
    CloudSystemConfig,
    DisplayQueueConfig,
    EvaluationMode,
    idle_probability,
    link_utilization,
    state_probability,
    sweep_rates,
    system_rejection_probability,
    waiting_probability,
)

V, C = EvaluationMode.VERBATIM, EvaluationMode.CORRECTED


def cfg(u, lam, mu):
    return DisplayQueueConfig(1, u, lam, mu)


# Frozen from tests/oracles.truncated_chain (cutoff 200).
@pytest.mark.parametrize(
    "u, lam, mu, m, expected",
    [
        (1, 0.0, 1.0, 0, 1.0),
        (1, 0.5, 1.0, 2, 0.125),
        (10, 0.5, 0.1, 3, 0.139753735801292),
    ],
)
def test_state_probability_examples(u, lam, mu, m, expected):
    assert state_probability(cfg(u, lam, mu), m) == pytest.approx(expected, rel=1e-9)


@pytest.mark.parametrize(
    "u, lam, mu, expected", [(1, 0.5, 1.0, 0.5), (2, 1.0, 1.0, 1 / 3), (1, 0.0, 1.0, 1.0)]
)
def test_idle_probability_examples(u, lam, mu, expected):
    c = cfg(u, lam, mu)
    assert idle_probability(c) == pytest.approx(expected, rel=1e-12)
    assert idle_probability(c) == state_probability(c, 0)


@pytest.mark.parametrize(
    "u, lam, mu, expected", [(1, 0.5, 1.0, 0.5), (2, 1.0, 1.0, 1 / 3), (5, 0.0, 1.0, 0.0)]
)
def test_waiting_probability_examples(u, lam, mu, expected):
    assert waiting_probability(cfg(u, lam, mu)) == pytest.approx(expected, rel=1e-12, abs=0)


def test_unstable_raises():
    for op in (idle_probability, waiting_probability):
        with pytest.raises(UnstableQueue):
            op(cfg(1, 1.0, 1.0))
    with pytest.raises(UnstableQueue):
        state_probability(cfg(3, 5.0, 1.0), 2)


def test_large_channel_counts_do_not_overflow():
    c = cfg(400, 350.0, 1.0)
    w = waiting_probability(c)
    assert 0.0 < w < 1.0
    assert math.isfinite(idle_probability(c))


stable_cfgs = st.integers(1, 20).flatmap(
    lambda u: st.tuples(
        st.just(u),
        st.floats(0.0, min(8.0, u * 0.98), allow_nan=False),
        st.floats(0.05, 5.0, allow_nan=False),
    )
)


@settings(max_examples=60, deadline=None)
@given(stable_cfgs)
def test_matches_truncated_chain(params):
    u, a, mu = params
    c = cfg(u, a * mu, mu)
    # extend the chain until the dropped tail is negligible; at a/U near 1 200 states is too few
    cutoff = 200 if a / u < 0.5 else max(200, u + math.ceil(math.log(1e-12) / math.log(a / u)))
    pi = truncated_chain(u, a * mu, mu, cutoff=cutoff)
    probs = np.array([state_probability(c, m) for m in range(cutoff + 1)])
    assert np.all(probs >= 0)
    assert np.max(np.abs(probs - pi)) < 1e-6
    assert waiting_probability(c) == pytest.approx(float(pi[u:].sum()), abs=1e-6)


@settings(max_examples=60, deadline=None)
@given(stable_cfgs)
def test_normalization_with_geometric_tail(params):
    u, a, mu = params
    c = cfg(u, a * mu, mu)
    head = sum(state_probability(c, m) for m in range(201))
    rho = a / u
    # states m > 200 form a geometric series with ratio rho
    tail = state_probability(c, 200) * rho / (1 - rho) if 200 >= u else 0.0
    assert head + tail == pytest.approx(1.0, abs=1e-9)


@given(st.floats(1e-6, 0.999, allow_nan=False), st.floats(0.01, 100.0, allow_nan=False))
def test_single_channel_identity(rho, mu):
    assert waiting_probability(cfg(1, rho * mu, mu)) == pytest.approx(rho * mu / mu, rel=1e-12)


@given(st.integers(1, 30), st.floats(0.01, 0.98), st.floats(0.001, 0.01))
def test_waiting_probability_increasing_in_load(u, rho, step):
    low = waiting_probability(cfg(u, rho * u, 1.0))
    high = waiting_probability(cfg(u, min(rho + step, 0.999) * u, 1.0))
    assert high > low


def table2(rates):
    return CloudSystemConfig.uniform(10, rates, 0.1)


def test_zero_load_verbatim_and_corrected():
    sys = table2([0.0])
    assert system_rejection_probability(sys, V) == 1.0
    assert link_utilization(sys, V) == 1.0
    assert system_rejection_probability(sys, C) == 0.0
    assert link_utilization(sys, C) == 0.0


def test_corrected_single_display_reduces_to_waiting_probability():
    sys = CloudSystemConfig.uniform(1, [0.5], 1.0)
    assert system_rejection_probability(sys, C) == pytest.approx(0.5, rel=1e-12)


def test_verbatim_matches_independent_reevaluation():
    sys = table2([0.5, 0.3, 0.2])
    rc = [chain_waiting_probability(10, lam, 0.1) for lam in (0.5, 0.3, 0.2)]
    expected_rc = 1 - sum(lam * (1 - r) for lam, r in zip((0.5, 0.3, 0.2), rc)) / 30
    assert system_rejection_probability(sys, V) == pytest.approx(expected_rc, rel=1e-9)
    assert link_utilization(sys, V) == pytest.approx(1 - (1 - expected_rc) * 1.0 / 3.0, rel=1e-9)


def test_corrected_utilization_table2_rates():
    sys = table2([0.5, 0.3, 0.2])
    rc = [chain_waiting_probability(10, lam, 0.1) for lam in (0.5, 0.3, 0.2)]
    r = sum(lam * w for lam, w in zip((0.5, 0.3, 0.2), rc)) / 1.0
    assert system_rejection_probability(sys, C) == pytest.approx(r, rel=1e-9)
    assert link_utilization(sys, C) == pytest.approx((1 - r) * 1.0 / 3.0, rel=1e-9)


@given(st.lists(st.tuples(st.integers(1, 12), st.floats(0, 0.99), st.floats(0.01, 3)), min_size=1, max_size=4))
def test_corrected_ranges(displays):
    sys = CloudSystemConfig(
        tuple(DisplayQueueConfig(i + 1, u, rho * u * mu, mu) for i, (u, rho, mu) in enumerate(displays))
    )
    assert 0.0 <= system_rejection_probability(sys, C) <= 1.0
    assert 0.0 <= link_utilization(sys, C) <= 1.0


def test_sweep_examples():
    template = table2([0, 0, 0])
    (row,) = sweep_rates(template, [0], [5, 3, 2], C)
    assert (row.rejection, row.utilization, row.stable) == (0.0, 0.0, True)
    (row,) = sweep_rates(template, [1], [5, 3, 2], C)
    assert row.per_display_rates == pytest.approx((0.5, 0.3, 0.2))
    assert sum(row.per_display_rates) == pytest.approx(row.total_arrival_rate, abs=1e-9)
    (row,) = sweep_rates(template, [10], [5, 3, 2], C)
    assert not row.stable and row.rejection is None and row.utilization is None


def test_sweep_ratio_length_checked():
    with pytest.raises(DimensionMismatch):
        sweep_rates(table2([0, 0, 0]), [1], [1, 1])
