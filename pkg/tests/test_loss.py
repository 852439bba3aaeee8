"""Balanced loss: values, identities and finite-difference gradchecks."""

import numpy as np
import pytest

from litedepth.errors import DimensionError, ValidationError
from litedepth.loss import (
    LossWeights,
    balanced_loss,
    l_depth,
    l_grad,
    l_norm,
    l_ssim,
    sobel_gradients,
)

from oracles import finite_difference, max_rel_err, ssim_scalar


def _pair(seed, shape=(8, 8), noise=0.3):
    """A random pair whose errors stay away from the |.| kink at zero."""
    rng = np.random.default_rng(seed)
    y = rng.uniform(1.0, 9.0, shape)
    sign = np.where(rng.random(shape) < 0.5, -1.0, 1.0)
    y_hat = y + sign * rng.uniform(0.05, noise, shape)
    return y, y_hat


class TestDepthTerm:
    def test_hand_computed(self):
        y = np.array([[1.0, 2.0, 3.0]] * 3)
        y_hat = np.array([[1.5, 2.0, 2.0]] * 3)
        assert l_depth(y, y_hat) == pytest.approx((0.5 + 0.0 + 1.0) / 3.0, abs=1e-12)

    def test_zero_at_equality(self):
        y, _ = _pair(0)
        assert l_depth(y, y.copy()) == 0.0

    @pytest.mark.parametrize("seed", range(5))
    def test_gradcheck(self, seed):
        y, y_hat = _pair(seed)
        _, g = l_depth(y, y_hat, with_gradient=True)
        num = finite_difference(lambda a, b: l_depth(a, b), y, y_hat)
        assert max_rel_err(g, num) < 1e-6

    def test_shape_mismatch_rejected(self):
        with pytest.raises(DimensionError):
            l_depth(np.zeros((4, 4)), np.zeros((4, 5)))


class TestGradientTerm:
    def test_zero_at_equality(self):
        y, _ = _pair(1)
        assert abs(l_grad(y, y.copy())) <= 1e-12

    def test_zero_for_constant_offset(self):
        # A constant error map has zero Sobel response everywhere.
        y, _ = _pair(2)
        assert abs(l_grad(y, y + 0.7)) <= 1e-12
        assert abs(l_grad(y, y + 0.7, absolute_response=True)) <= 1e-12

    @pytest.mark.parametrize("seed", range(5))
    @pytest.mark.parametrize("absolute", [False, True])
    def test_gradcheck(self, seed, absolute):
        y, y_hat = _pair(seed + 10)
        _, g = l_grad(y, y_hat, with_gradient=True, absolute_response=absolute)
        num = finite_difference(
            lambda a, b: l_grad(a, b, absolute_response=absolute), y, y_hat
        )
        assert max_rel_err(g, num) < 1e-6

    def test_too_small_map_rejected(self):
        with pytest.raises(DimensionError):
            l_grad(np.zeros((2, 5)), np.zeros((2, 5)))


class TestSobel:
    def test_horizontal_ramp(self):
        # gx of x[i,j] = j is 8 in the interior (kernel weight sum per column).
        z = np.tile(np.arange(6.0), (5, 1))
        gx, gy = sobel_gradients(z)
        assert np.allclose(gx[1:-1, 1:-1], 8.0)
        assert np.allclose(gy, 0.0)

    def test_constant_map(self):
        gx, gy = sobel_gradients(np.full((5, 5), 3.0))
        assert not gx.any() and not gy.any()


class TestNormalTerm:
    def test_zero_at_equality(self):
        y, _ = _pair(3)
        assert abs(l_norm(y, y.copy())) <= 1e-12

    def test_zero_for_constant_offset(self):
        y, _ = _pair(4)
        assert abs(l_norm(y, y - 0.05)) <= 1e-12

    def test_range(self):
        rng = np.random.default_rng(5)
        v = l_norm(rng.uniform(0, 10, (8, 8)), rng.uniform(0, 10, (8, 8)))
        assert 0.0 <= v <= 2.0

    @pytest.mark.parametrize("seed", range(5))
    def test_gradcheck(self, seed):
        y, y_hat = _pair(seed + 20)
        _, g = l_norm(y, y_hat, with_gradient=True)
        num = finite_difference(lambda a, b: l_norm(a, b), y, y_hat)
        assert max_rel_err(g, num) < 1e-6


class TestSsimTerm:
    def test_zero_at_equality(self):
        y, _ = _pair(6)
        assert abs(l_ssim(y, y.copy(), 10.0)) <= 1e-12

    def test_single_window_matches_scalar_reference(self):
        rng = np.random.default_rng(7)
        y = rng.uniform(1, 9, (7, 7))
        y_hat = rng.uniform(1, 9, (7, 7))
        c1, c2 = (0.01 * 10.0) ** 2, (0.03 * 10.0) ** 2
        want = 1.0 - ssim_scalar(y, y_hat, c1, c2)
        assert l_ssim(y, y_hat, 10.0) == pytest.approx(want, abs=1e-12)

    def test_window_averaging(self):
        rng = np.random.default_rng(8)
        y = rng.uniform(1, 9, (7, 8))
        y_hat = rng.uniform(1, 9, (7, 8))
        c1, c2 = (0.01 * 10.0) ** 2, (0.03 * 10.0) ** 2
        want = 1.0 - 0.5 * (
            ssim_scalar(y[:, :7], y_hat[:, :7], c1, c2)
            + ssim_scalar(y[:, 1:], y_hat[:, 1:], c1, c2)
        )
        assert l_ssim(y, y_hat, 10.0) == pytest.approx(want, abs=1e-12)

    @pytest.mark.parametrize("seed", range(5))
    def test_gradcheck(self, seed):
        y, y_hat = _pair(seed + 30)
        _, g = l_ssim(y, y_hat, 10.0, with_gradient=True)
        num = finite_difference(lambda a, b: l_ssim(a, b, 10.0), y, y_hat)
        assert max_rel_err(g, num) < 1e-5

    def test_small_map_rejected(self):
        with pytest.raises(ValidationError):
            l_ssim(np.zeros((6, 6)), np.zeros((6, 6)), 10.0)

    def test_bad_dynamic_range_rejected(self):
        with pytest.raises(ValidationError):
            l_ssim(np.ones((7, 7)), np.ones((7, 7)), 0.0)


class TestBalancedLoss:
    def test_default_weights(self):
        w = LossWeights()
        assert (w.lambda1, w.lambda2, w.lambda3) == (0.5, 10.0, 10.0)

    def test_negative_weight_rejected(self):
        with pytest.raises(ValidationError):
            LossWeights(lambda1=-0.1)

    def test_combination_is_weighted_sum(self):
        y, y_hat = _pair(9)
        w = LossWeights(lambda1=0.5, lambda2=2.0, lambda3=3.0)
        rep = balanced_loss(y, y_hat, w)
        want = rep.l_depth + 0.5 * rep.l_grad + 2.0 * rep.l_norm + 3.0 * rep.l_ssim
        assert rep.total == pytest.approx(want, abs=1e-12)

    @pytest.mark.parametrize("lam", [0.0, 1.0, 2.0])
    @pytest.mark.parametrize("which", ["lambda1", "lambda2", "lambda3"])
    def test_linear_in_each_lambda(self, which, lam):
        y, y_hat = _pair(10)
        base = balanced_loss(y, y_hat, LossWeights(0.0, 0.0, 0.0))
        rep = balanced_loss(y, y_hat, LossWeights(**{
            "lambda1": 0.0, "lambda2": 0.0, "lambda3": 0.0, which: lam,
        }))
        comp = {"lambda1": rep.l_grad, "lambda2": rep.l_norm, "lambda3": rep.l_ssim}[which]
        assert rep.total == pytest.approx(base.total + lam * comp, abs=1e-12)

    def test_all_components_zero_at_equality(self):
        y, _ = _pair(11)
        rep = balanced_loss(y, y.copy())
        assert rep.total <= 1e-9
        for v in (rep.l_depth, rep.l_grad, rep.l_norm, rep.l_ssim):
            assert abs(v) <= 1e-9

    @pytest.mark.parametrize("seed", range(3))
    def test_combined_gradcheck(self, seed):
        y, y_hat = _pair(seed + 40)
        w = LossWeights(0.5, 2.0, 3.0)
        rep = balanced_loss(y, y_hat, w, with_gradient=True)
        num = finite_difference(lambda a, b: balanced_loss(a, b, w).total, y, y_hat)
        assert max_rel_err(rep.gradient, num) < 1e-5

    def test_accepts_nchw_maps(self):
        y, y_hat = _pair(12)
        a = balanced_loss(y[None, None], y_hat[None, None]).total
        b = balanced_loss(y, y_hat).total
        assert a == b
