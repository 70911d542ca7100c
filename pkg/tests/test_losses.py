import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aplloss.losses import (
    EPS,
    APLParams,
    InvalidInputError,
    apl_elementwise,
    apl_forward_backward,
    apl_series_forward,
    bce,
    bce_with_logits,
    shift_probability,
    sigmoid,
    taylor_bce,
)

import oracles

LN2 = math.log(2.0)


def logit(p):
    return math.log(p / (1.0 - p))


params_strategy = st.builds(
    APLParams,
    alpha1=st.floats(0, 4),
    alpha2=st.floats(0, 4),
    beta1=st.floats(0, 4),
    gamma_plus=st.floats(0, 4),
    gamma_minus=st.floats(0, 5),
    p_th=st.floats(0, 0.5),
)


class TestParams:
    @pytest.mark.parametrize(
        "kwargs",
        [
            {"gamma_plus": -0.1},
            {"gamma_minus": -1},
            {"p_th": 1.0},
            {"p_th": -0.01},
            {"alpha1": -1},
            {"beta1": float("nan")},
            {"trunc_order": 0},
            {"trunc_order": 2.5},
        ],
    )
    def test_rejects_invalid(self, kwargs):
        with pytest.raises(ValueError):
            APLParams(**kwargs)

    def test_from_dict_rejects_unknown(self):
        with pytest.raises(ValueError, match="gamma"):
            APLParams.from_dict({"gamma": 1})

    def test_roundtrip(self):
        p = APLParams(alpha1=2.5, gamma_minus=3, p_th=0.05)
        assert APLParams.from_dict(p.to_dict()) == p


class TestSigmoid:
    def test_zero(self):
        assert sigmoid([[0.0]])[0, 0] == 0.5

    def test_saturation_is_clamped(self):
        assert sigmoid([[40.0]])[0, 0] == 1.0 - EPS
        assert sigmoid([[-40.0]])[0, 0] == EPS

    def test_antisymmetry(self):
        assert abs(sigmoid([-3.7])[0] - (1.0 - sigmoid([3.7])[0])) <= 1e-12

    @pytest.mark.parametrize("bad", [np.nan, np.inf, -np.inf])
    def test_non_finite(self, bad):
        with pytest.raises(InvalidInputError):
            sigmoid([[0.0, bad]])


class TestBCE:
    def test_half(self):
        assert bce([[0.5]], [[1]]).value == pytest.approx(0.693147, abs=1e-6)

    def test_perfect(self):
        assert bce([[1 - 1e-12]], [[1]]).value == pytest.approx(0.0, abs=1e-11)

    def test_two_classes(self):
        assert bce([[0.5, 0.5]], [[1, 0]]).value == pytest.approx(0.693147, abs=1e-6)

    def test_gradient_is_p_minus_y_over_n(self):
        out = bce([[0.2, 0.7]], [[1, 0]])
        np.testing.assert_allclose(out.grad, [[(0.2 - 1) / 2, 0.7 / 2]])

    def test_shape_mismatch(self):
        with pytest.raises(InvalidInputError):
            bce([[0.5, 0.5]], [[1]])

    def test_non_binary_labels(self):
        with pytest.raises(InvalidInputError):
            bce([[0.5]], [[0.5]])


class TestTaylorBCE:
    def test_first_order(self):
        assert taylor_bce([[0.5]], [[1]], 1) == 0.5

    def test_second_order(self):
        assert taylor_bce([[0.5]], [[1]], 2) == 0.625

    def test_converges_to_ln2(self):
        # remainder <= x^(M+1) / ((M+1)(1-x)) with x = 0.5, M = 200
        assert abs(taylor_bce([[0.5]], [[1]], 200) - LN2) <= 1e-5

    def test_negative_branch_uses_p(self):
        assert taylor_bce([[0.25]], [[0]], 2) == pytest.approx(0.25 + 0.25**2 / 2)

    def test_rejects_zero_order(self):
        with pytest.raises(ValueError):
            taylor_bce([[0.5]], [[1]], 0)

    @pytest.mark.parametrize("order", [1, 2, 5, 10, 50])
    @pytest.mark.parametrize("p", np.round(np.arange(0.1, 1.0, 0.1), 1))
    def test_remainder_bound(self, p, order):
        err = abs(taylor_bce([[p]], [[1]], order) - bce([[p]], [[1]]).value)
        bound = (1 - p) ** (order + 1) / ((order + 1) * p)
        # 4 ulp slack for the float evaluation of two O(1) quantities
        assert err <= bound + 4 * np.finfo(float).eps


class TestShiftProbability:
    @pytest.mark.parametrize(
        "p, p_th, expected", [(0.3, 0.4, 0.0), (0.6, 0.1, 0.5), (0.05, 0.05, 0.0)]
    )
    def test_examples(self, p, p_th, expected):
        assert shift_probability(p, p_th) == pytest.approx(expected, abs=1e-15)

    def test_rejects_bad_threshold(self):
        with pytest.raises(ValueError):
            shift_probability(0.5, 1.0)


class TestAPLForward:
    def test_defaults_are_bce(self):
        out = apl_forward_backward([[0.0]], [[1]], APLParams())
        assert out.value == pytest.approx(0.693147, abs=1e-6)

    def test_positive_focusing(self):
        out = apl_forward_backward([[0.0]], [[1]], APLParams(gamma_plus=1))
        assert out.value == pytest.approx(0.5 * LN2, abs=1e-6)
        assert out.value == pytest.approx(0.346574, abs=1e-6)

    @pytest.mark.parametrize("gamma", [0.0, 0.5, 2.0, 4.0])
    @pytest.mark.parametrize("beta1", [0.0, 1.0, 3.0])
    def test_dead_zone(self, gamma, beta1):
        params = APLParams(gamma_minus=gamma, beta1=beta1, p_th=0.4)
        out = apl_forward_backward([[logit(0.3)]], [[0]], params)
        assert out.value == 0.0
        assert out.grad[0, 0] == 0.0

    def test_shifted_negative_log_convention(self):
        params = APLParams(p_th=0.1)
        out = apl_forward_backward([[logit(0.6)]], [[0]], params)
        assert out.value == pytest.approx(LN2, abs=1e-6)

    def test_mean_reduction(self, rng):
        logits = rng.normal(size=(3, 4))
        labels = rng.integers(0, 2, size=(3, 4))
        params = APLParams(gamma_minus=2, p_th=0.05, alpha1=2)
        per_entry, per_grad = apl_elementwise(logits, labels, params)
        out = apl_forward_backward(logits, labels, params)
        assert out.value == pytest.approx(per_entry.mean(), rel=1e-14)
        np.testing.assert_allclose(out.grad, per_grad / 12)

    def test_grad_of_mean_loss(self, rng):
        # finite differences of the reduced value, not the per-entry loss
        logits = rng.normal(size=(2, 3))
        labels = np.array([[1, 0, 1], [0, 0, 1]])
        params = APLParams(gamma_plus=1, gamma_minus=3, p_th=0.05, alpha1=2.5, beta1=1.4)
        out = apl_forward_backward(logits, labels, params)
        h = 1e-6
        for idx in np.ndindex(logits.shape):
            up, down = logits.copy(), logits.copy()
            up[idx] += h
            down[idx] -= h
            num = (
                apl_forward_backward(up, labels, params).value
                - apl_forward_backward(down, labels, params).value
            ) / (2 * h)
            assert out.grad[idx] == pytest.approx(num, rel=1e-5, abs=1e-10)

    def test_shape_mismatch(self):
        with pytest.raises(InvalidInputError):
            apl_forward_backward(np.zeros((2, 2)), np.zeros((2, 3)), APLParams())

    def test_extreme_logits_finite(self):
        out = apl_forward_backward([[1e4, -1e4]], [[0, 1]], APLParams(gamma_minus=2, p_th=0.05))
        assert np.isfinite(out.value)
        assert np.all(np.isfinite(out.grad))

    @settings(max_examples=100, deadline=None)
    @given(params=params_strategy, seed=st.integers(0, 2**32 - 1))
    def test_nonnegative(self, params, seed):
        rng = np.random.default_rng(seed)
        logits = rng.normal(0, 5, size=(4, 5))
        labels = rng.integers(0, 2, size=(4, 5))
        loss, _ = apl_elementwise(logits, labels, params)
        assert np.all(loss >= 0)

    @settings(max_examples=100, deadline=None)
    @given(params=params_strategy)
    def test_monotone_in_p(self, params):
        logits = np.linspace(-8, 8, 401)[None, :]
        pos, _ = apl_elementwise(logits, np.ones_like(logits), params)
        neg, _ = apl_elementwise(logits, np.zeros_like(logits), params)
        assert np.all(np.diff(pos) <= 1e-15)
        assert np.all(np.diff(neg) >= -1e-15)

    @settings(max_examples=50, deadline=None)
    @given(params=params_strategy, seed=st.integers(0, 2**32 - 1))
    def test_bce_reduction_property(self, params, seed):
        rng = np.random.default_rng(seed)
        logits = rng.normal(0, 3, size=(3, 4))
        labels = rng.integers(0, 2, size=(3, 4))
        ref = bce(sigmoid(logits), labels)
        out = apl_forward_backward(logits, labels, APLParams(trunc_order=params.trunc_order))
        assert abs(out.value - ref.value) <= 1e-9
        np.testing.assert_allclose(out.grad, ref.grad, atol=1e-9, rtol=0)


class TestSeries:
    def test_bce_limit(self):
        value = apl_series_forward([[0.5]], [[1]], APLParams(trunc_order=200))
        assert abs(value - bce([[0.5]], [[1]]).value) <= 1e-5

    def test_focused_limit(self):
        value = apl_series_forward([[0.5]], [[1]], APLParams(gamma_plus=1, trunc_order=200))
        assert abs(value - 0.5 * LN2) <= 1e-5

    @pytest.mark.parametrize("order", [1, 2, 7, 200])
    def test_dead_zone(self, order):
        params = APLParams(gamma_minus=0, p_th=0.3, trunc_order=order)
        assert apl_series_forward([[0.2, 0.3]], [[0, 0]], params) == 0.0

    def test_matches_scalar_oracle(self):
        params = APLParams(alpha1=2.0, alpha2=0.3, gamma_plus=0.7, trunc_order=40)
        expected = oracles.pos_loss_series(0.35, 0.7, 2.0, 0.3, 40)
        assert apl_series_forward([[0.35]], [[1]], params) == pytest.approx(expected, rel=1e-13)

    def test_closed_form_agreement(self, rng):
        for _ in range(10):
            params = APLParams(
                alpha1=rng.uniform(0, 3),
                alpha2=rng.uniform(0, 3),
                beta1=rng.uniform(0, 3),
                gamma_plus=rng.uniform(0, 4),
                gamma_minus=rng.uniform(0, 4),
                p_th=rng.uniform(0, 0.3),
                trunc_order=500,
            )
            p = rng.uniform(0.05, 0.95, size=(5, 5))
            y = rng.integers(0, 2, size=(5, 5))
            logits = np.log(p / (1 - p))
            closed = apl_forward_backward(logits, y, params).value
            assert abs(apl_series_forward(p, y, params) - closed) <= 1e-6


class TestBCEWithLogits:
    def test_matches_probability_form(self, rng):
        x = rng.normal(0, 3, (6, 5))
        y = rng.integers(0, 2, (6, 5))
        a, b = bce_with_logits(x, y), bce(sigmoid(x), y)
        assert a.value == pytest.approx(b.value, abs=1e-12)
        np.testing.assert_allclose(a.grad, b.grad, atol=1e-16)

    def test_keeps_precision_near_one(self):
        # 1 - sigmoid(18.86) cancels to ~1e-8 relative error in the probability form
        x = np.array([[18.856132080236407]])
        assert bce_with_logits(x, [[0]]).value == pytest.approx(np.logaddexp(0, x[0, 0]), rel=1e-15)
        assert apl_forward_backward(x, [[0]], APLParams()).value == pytest.approx(
            np.logaddexp(0, x[0, 0]), rel=1e-15
        )
