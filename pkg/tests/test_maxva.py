import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from maxva_lab.maxva import (
    BetaBounds,
    MaxVAState,
    UninitializedStateError,
    bias_corrected,
    clip_beta,
    compute_beta_raw,
    maxva_step_beta,
    update_moments,
)
from maxva_lab.oracle import beta_grid_argmax, beta_search_upper


def state_from_corrected(u, v, w, t=1):
    """Build a state whose bias-corrected estimates are exactly (u, v)."""
    return MaxVAState(
        u_tilde=np.atleast_1d(np.asarray(u) * w),
        v_tilde=np.atleast_1d(np.asarray(v) * w),
        w=np.atleast_1d(np.float64(w)),
        t=t,
    )


class TestClosedForm:
    def test_worked_example(self):
        # w=0.5, u=0, v=1 (so sigma^2=1), incoming g=2:
        # beta = (4+1) / (0.5*(4-1) + 4+1) = 5 / 6.5
        state = state_from_corrected(0.0, 1.0, 0.5)
        beta = compute_beta_raw(np.array([2.0]), state)
        assert beta[0] == pytest.approx(5.0 / 6.5, rel=1e-12)

    def test_worked_example_agrees_with_grid_oracle(self):
        beta_star, sigma_star = beta_grid_argmax(g=2.0, u=0.0, v=1.0, w=0.5)
        resolution = beta_search_upper(0.5) / 10_000
        assert abs(beta_star - 5.0 / 6.5) <= resolution
        # maximized variance estimate at the optimum, derived by hand
        assert sigma_star == pytest.approx(25.0 / 16.0, abs=1e-4)

    def test_second_step_value_independent_of_gradient(self):
        # after one step the state carries zero variance, so the raw
        # coefficient collapses to 1 / (2 - beta_one) for any g != u
        bounds = BetaBounds(beta_lower=0.1, beta_upper=0.999, beta_one=0.9)
        _, state = maxva_step_beta(MaxVAState.zeros(1), np.array([3.0]), bounds)
        for g in (2.9, -5.0, 100.0):
            raw = compute_beta_raw(np.array([g]), state, bounds.delta)
            assert raw[0] == pytest.approx(1.0 / (2.0 - 0.9), rel=1e-12)
        # a vanishing surprise still lands there, but the delta guard
        # contributes ~delta/dg^2 in relative terms
        raw = compute_beta_raw(np.array([3.0001]), state, bounds.delta)
        assert raw[0] == pytest.approx(1.0 / (2.0 - 0.9), rel=1e-7)

    def test_degenerate_repeat_gradient_hits_lower_clip(self):
        # zero variance and g equal to the running mean: the guard sends
        # the raw value to ~0 and clipping lands on beta_lower
        bounds = BetaBounds(beta_lower=0.5, beta_upper=0.999, beta_one=0.9)
        _, state = maxva_step_beta(MaxVAState.zeros(1), np.array([3.0]), bounds)
        raw = compute_beta_raw(np.array([3.0]), state, bounds.delta)
        assert raw[0] == pytest.approx(0.0, abs=1e-10)
        beta, _ = maxva_step_beta(state, np.array([3.0]), bounds)
        assert beta[0] == 0.5

    def test_surprise_direction(self):
        # large surprise pushes beta toward 1/(1+w), none toward 1/(1-w)
        state = state_from_corrected(0.0, 1.0, 0.5)
        big = compute_beta_raw(np.array([100.0]), state)[0]
        small = compute_beta_raw(np.array([0.0]), state)[0]
        assert abs(big - 1.0 / 1.5) < 1e-3
        assert big < small

    def test_r_form_equals_one_when_surprise_matches_variance(self):
        # dg^2 == sigma^2 makes the w terms cancel: beta = 1 exactly
        state = state_from_corrected(0.0, 4.0, 0.7)
        beta = compute_beta_raw(np.array([2.0]), state)  # dg^2 = 4 = sigma^2
        assert beta[0] == pytest.approx(1.0, rel=1e-12)


class TestMoments:
    def test_two_step_bias_corrected_trace(self):
        state = MaxVAState.zeros(1)
        state = update_moments(state, np.array([0.0]), np.array([0.5]))
        state = update_moments(state, np.array([2.0]), np.array([0.5]))
        assert state.w[0] == pytest.approx(0.75)
        assert state.u_tilde[0] == pytest.approx(1.0)
        assert state.v_tilde[0] == pytest.approx(2.0)
        u, v, sigma_sq = bias_corrected(state)
        assert u[0] == pytest.approx(4.0 / 3.0, rel=1e-12)
        assert v[0] == pytest.approx(8.0 / 3.0, rel=1e-12)
        assert sigma_sq[0] == pytest.approx(8.0 / 9.0, rel=1e-12)

    def test_beta_of_one_freezes_accumulators(self):
        state = state_from_corrected(1.0, 2.0, 0.6)
        frozen = update_moments(state, np.array([5.0]), np.array([1.0]))
        assert frozen.u_tilde[0] == state.u_tilde[0]
        assert frozen.v_tilde[0] == state.v_tilde[0]
        assert frozen.w[0] == state.w[0]
        assert frozen.t == state.t + 1

    def test_uninitialized_state_error(self):
        with pytest.raises(UninitializedStateError):
            bias_corrected(MaxVAState.zeros(2))

    def test_beta_range_validation(self):
        state = MaxVAState.zeros(1)
        with pytest.raises(ValueError):
            update_moments(state, np.array([1.0]), np.array([0.0]))
        with pytest.raises(ValueError):
            update_moments(state, np.array([1.0]), np.array([1.1]))

    def test_purity(self):
        state = state_from_corrected(1.0, 2.0, 0.5)
        g = np.array([3.0])
        bounds = BetaBounds()
        before = (state.u_tilde.copy(), state.v_tilde.copy(), state.w.copy())
        out1 = maxva_step_beta(state, g, bounds)
        out2 = maxva_step_beta(state, g, bounds)
        assert np.array_equal(out1[0], out2[0])
        assert np.array_equal(out1[1].u_tilde, out2[1].u_tilde)
        assert np.array_equal(state.u_tilde, before[0])
        assert np.array_equal(state.v_tilde, before[1])
        assert np.array_equal(state.w, before[2])


class TestBounds:
    def test_defaults(self):
        bounds = BetaBounds()
        assert bounds.beta_one == bounds.beta_upper == 0.999
        assert bounds.delta == 1e-16

    def test_beta_one_capped_when_upper_is_one(self):
        bounds = BetaBounds(beta_lower=0.5, beta_upper=1.0)
        assert bounds.beta_one == 0.999

    def test_equal_bounds_allowed(self):
        bounds = BetaBounds(beta_lower=0.9, beta_upper=0.9)
        assert bounds.beta_lower == bounds.beta_upper

    def test_validation(self):
        with pytest.raises(ValueError):
            BetaBounds(beta_lower=0.9, beta_upper=0.5)
        with pytest.raises(ValueError):
            BetaBounds(beta_lower=0.0, beta_upper=0.9)
        with pytest.raises(ValueError):
            BetaBounds(delta=0.0)
        with pytest.raises(ValueError):
            BetaBounds(beta_one=1.0)

    def test_clip(self):
        bounds = BetaBounds(beta_lower=0.5, beta_upper=0.9)
        clipped = clip_beta(np.array([0.1, 0.7, 5.0]), bounds)
        assert np.array_equal(clipped, [0.5, 0.7, 0.9])


@given(
    w=st.floats(0.01, 0.99),
    u=st.floats(-5, 5),
    spread=st.floats(1e-6, 10),
    g=st.floats(-10, 10),
)
def test_raw_beta_within_theoretical_range(w, u, spread, g):
    # with positive observed variance the raw coefficient lies in
    # [1/(1+w), 1/(1-w)] regardless of the incoming gradient
    state = state_from_corrected(u, u * u + spread, w)
    beta = compute_beta_raw(np.array([g]), state)[0]
    assert 1.0 / (1.0 + w) - 1e-9 <= beta <= 1.0 / (1.0 - w) + 1e-9


@given(
    w=st.floats(0.01, 0.99),
    sigma_sq=st.floats(1e-3, 10),
    r1=st.floats(0.0, 50),
    r2=st.floats(0.0, 50),
)
def test_raw_beta_decreasing_in_surprise(w, sigma_sq, r1, r2):
    # beta as a function of R = dg^2 / sigma^2 decreases from 1/(1-w)
    # toward 1/(1+w)
    state = state_from_corrected(0.0, sigma_sq, w)
    lo, hi = sorted((r1, r2))
    beta_lo = compute_beta_raw(np.array([np.sqrt(lo * sigma_sq)]), state)[0]
    beta_hi = compute_beta_raw(np.array([np.sqrt(hi * sigma_sq)]), state)[0]
    assert beta_hi <= beta_lo + 1e-12


def test_w_monotone_and_capped_along_random_trajectory():
    rng = np.random.default_rng(42)
    bounds = BetaBounds(beta_lower=0.5, beta_upper=0.999)
    state = MaxVAState.zeros(3)
    prev_w = state.w.copy()
    checkpoint = None
    for t in range(500):
        g = rng.standard_normal(3) * (1.0 + 10.0 * (rng.random(3) < 0.05))
        _, state = maxva_step_beta(state, g, bounds)
        assert (state.w >= prev_w - 1e-15).all()
        assert (state.w > 0.0).all() and (state.w <= 1.0 + 1e-15).all()
        prev_w = state.w.copy()
        if t == 49:
            checkpoint = state.w.copy()
    # the total weight keeps growing toward 1 (rate is (1 - beta) per step)
    assert (state.w > checkpoint).all()


def test_w_approaches_one_when_upper_clip_is_moderate():
    rng = np.random.default_rng(11)
    bounds = BetaBounds(beta_lower=0.5, beta_upper=0.9)
    state = MaxVAState.zeros(2)
    for _ in range(300):
        _, state = maxva_step_beta(state, rng.standard_normal(2), bounds)
    assert (state.w > 0.999).all()


def test_sigma_sq_never_meaningfully_negative():
    rng = np.random.default_rng(7)
    bounds = BetaBounds(beta_lower=0.5, beta_upper=0.999)
    state = MaxVAState.zeros(4)
    for t in range(1000):
        g = rng.standard_normal(4) * 10 ** rng.uniform(-2, 2)
        _, state = maxva_step_beta(state, g, bounds)
        u = state.u_tilde / state.w
        v = state.v_tilde / state.w
        assert (v - u * u >= -1e-12).all()


def test_beta_sequence_scale_invariant():
    # rescaling every gradient by c leaves the coefficient sequence
    # unchanged up to the delta guard
    rng = np.random.default_rng(3)
    grads = rng.standard_normal(50)
    bounds = BetaBounds(beta_lower=0.5, beta_upper=0.999)
    for c in (0.01, 100.0):
        state_a = MaxVAState.zeros(1)
        state_b = MaxVAState.zeros(1)
        for g in grads:
            beta_a, state_a = maxva_step_beta(state_a, np.array([g]), bounds)
            beta_b, state_b = maxva_step_beta(state_b, np.array([c * g]), bounds)
            assert beta_a[0] == pytest.approx(beta_b[0], rel=1e-9, abs=1e-9)
