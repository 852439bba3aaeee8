"""Augmentation policies: determinism, identities and parameter ranges."""

import numpy as np
import pytest

from litedepth.augment import (
    APPLY_PROB,
    AugmentParams,
    DepthSample,
    PHOTO_RANGE,
    c_shift,
    d_shift,
    default_policy,
    draw_decisions,
    shifting_policy,
)
from litedepth.errors import ValidationError


def _sample(seed=0, hw=(24, 32), unit="indoor_cm"):
    rng = np.random.default_rng(seed)
    return DepthSample(
        rgb=rng.uniform(0, 1, (1, 3, *hw)).astype(np.float32),
        depth=rng.uniform(0.5, 9.5, (1, 1, *hw)).astype(np.float32),
        unit=unit,
    )


def _coordinate_sample(hw=(16, 20)):
    """RGB encodes (row, col) so geometric correspondence is checkable."""
    h, w = hw
    rr, cc = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    rgb = np.stack([rr / (h - 1), cc / (w - 1), np.zeros_like(rr, dtype=float)])
    depth = (1.0 + rr + h * cc).astype(np.float32)
    return DepthSample(rgb=rgb[None].astype(np.float32), depth=depth[None, None])


class TestDepthSample:
    def test_shape_validation(self):
        with pytest.raises(ValidationError):
            DepthSample(rgb=np.zeros((3, 8, 8), dtype=np.float32),
                        depth=np.zeros((1, 1, 8, 8), dtype=np.float32))
        with pytest.raises(ValidationError):
            DepthSample(rgb=np.zeros((1, 3, 8, 8), dtype=np.float32),
                        depth=np.zeros((1, 1, 8, 9), dtype=np.float32))

    def test_unknown_unit_rejected(self):
        with pytest.raises(ValidationError):
            _sample(unit="furlongs")


class TestCShift:
    def test_unit_parameters_are_identity(self):
        s = _sample(1)
        out = c_shift(s.rgb, 1.0, 1.0, (1.0, 1.0, 1.0))
        assert np.array_equal(out, s.rgb)

    def test_formula(self):
        rng = np.random.default_rng(2)
        rgb = rng.uniform(0.1, 0.9, (1, 3, 4, 4)).astype(np.float32)
        beta, gamma, eta = 1.05, 0.95, (0.9, 1.0, 1.1)
        out = c_shift(rgb, beta, gamma, eta)
        want = beta * np.power(rgb.astype(np.float64), gamma)
        want *= np.array(eta).reshape(1, 3, 1, 1)
        assert np.abs(out - np.clip(want, 0, 1)).max() <= 1e-6

    def test_output_stays_in_unit_interval(self):
        rgb = np.ones((1, 3, 2, 2), dtype=np.float32)
        out = c_shift(rgb, 1.1, 0.9, (1.1, 1.1, 1.1))
        assert out.max() <= 1.0 and out.min() >= 0.0

    def test_out_of_range_parameters_rejected(self):
        rgb = np.ones((1, 3, 2, 2), dtype=np.float32)
        with pytest.raises(ValidationError):
            c_shift(rgb, 1.2, 1.0, (1.0, 1.0, 1.0))
        with pytest.raises(ValidationError):
            c_shift(rgb, 1.0, 1.0, (0.8, 1.0, 1.0))


class TestDShift:
    def test_adds_scalar_exactly(self):
        depth = np.full((1, 1, 4, 4), 5.0, dtype=np.float32)
        out = d_shift(depth, 0.07, 10.0)
        assert np.allclose(out, 5.07, atol=1e-7)

    def test_zero_shift_is_identity(self):
        s = _sample(3)
        assert np.array_equal(d_shift(s.depth, 0.0, s.max_depth), s.depth)

    def test_clamped_to_range(self):
        depth = np.array([[[[0.05, 9.98]]]], dtype=np.float32)
        low = d_shift(depth, -0.10, 10.0)
        high = d_shift(depth, 0.10, 10.0)
        assert low.min() == 0.0
        assert high.max() == 10.0

    def test_unit_bounds_enforced(self):
        depth = np.ones((1, 1, 2, 2), dtype=np.float32)
        with pytest.raises(ValidationError):
            d_shift(depth, 0.2, 10.0, unit="indoor_cm")
        # The same magnitude is legal for the outdoor unit.
        d_shift(depth, 0.2, 80.0, unit="outdoor_dm")
        with pytest.raises(ValidationError):
            d_shift(depth, 1.5, 80.0, unit="outdoor_dm")


class TestAugmentParams:
    def test_validate_ranges(self):
        AugmentParams(beta=0.9, gamma=1.1, eta=(1.0, 0.95, 1.05), shift_s=0.1).validate(
            "indoor_cm"
        )
        with pytest.raises(ValidationError):
            AugmentParams(gamma=1.2).validate("indoor_cm")
        with pytest.raises(ValidationError):
            AugmentParams(shift_s=0.11).validate("indoor_cm")


class TestDecisions:
    def test_deterministic_per_seed(self):
        assert draw_decisions(42) == draw_decisions(42)
        assert draw_decisions(42) != draw_decisions(43)

    @pytest.mark.parametrize("field", ["vflip", "mirror", "crop", "channel_swap",
                                       "apply_c_shift", "apply_d_shift"])
    def test_fire_rate_near_half(self, field):
        n = 10000
        fired = sum(getattr(draw_decisions(i), field) for i in range(n))
        assert abs(fired / n - APPLY_PROB) <= 0.02

    def test_parameters_within_ranges(self):
        lo, hi = PHOTO_RANGE
        for seed in range(200):
            d = draw_decisions(seed)
            d.c_params.validate("indoor_cm")
            assert lo <= d.c_params.beta <= hi
            assert 0.75 <= d.crop_scale <= 1.0
            assert sorted(d.channel_order) == [0, 1, 2]
            assert abs(d.shift_s) <= 0.10

    def test_outdoor_shift_bound(self):
        shifts = [draw_decisions(s, "outdoor_dm").shift_s for s in range(300)]
        assert max(abs(s) for s in shifts) <= 1.0
        assert max(abs(s) for s in shifts) > 0.10  # actually uses the wider range


class TestPolicies:
    def test_deterministic(self):
        s = _sample(4)
        a = shifting_policy(s, 9)
        b = shifting_policy(s, 9)
        assert np.array_equal(a.rgb, b.rgb)
        assert np.array_equal(a.depth, b.depth)

    def test_shapes_preserved(self):
        s = _sample(5)
        for seed in range(10):
            out = shifting_policy(s, seed)
            assert out.rgb.shape == s.rgb.shape
            assert out.depth.shape == s.depth.shape

    def test_geometric_correspondence(self):
        # Under flips/mirror/crop, rgb and depth must move together: the
        # coordinates encoded in the rgb channels still identify the
        # depth value at every pixel.
        s = _coordinate_sample()
        h, w = s.rgb.shape[2:]
        for seed in range(30):
            dec = draw_decisions(seed)
            if dec.crop or dec.channel_swap:
                continue  # crop interpolates rgb; a swap moves the channels
            out = default_policy(s, seed)
            rr = np.rint(out.rgb[0, 0] * (h - 1)).astype(int)
            cc = np.rint(out.rgb[0, 1] * (w - 1)).astype(int)
            want = (1.0 + rr + h * cc).astype(np.float32)
            assert np.array_equal(out.depth[0, 0], want)

    def test_crop_correspondence_nearest(self):
        # With a crop the depth is resampled nearest, so every output
        # depth value must exist in the original map.
        s = _coordinate_sample()
        original = set(s.depth.ravel().tolist())
        for seed in range(40):
            if not draw_decisions(seed).crop:
                continue
            out = default_policy(s, seed)
            assert set(out.depth.ravel().tolist()) <= original

    def test_channel_swap_only_permutes(self):
        s = _sample(6)
        for seed in range(40):
            dec = draw_decisions(seed)
            if dec.channel_swap and not (dec.vflip or dec.mirror or dec.crop):
                out = default_policy(s, seed)
                assert np.array_equal(out.rgb, s.rgb[:, list(dec.channel_order)])
                break
        else:
            pytest.fail("no seed exercised a pure channel swap")

    def test_shifting_extends_default(self):
        s = _sample(7)
        for seed in range(40):
            dec = draw_decisions(seed)
            if not (dec.apply_c_shift or dec.apply_d_shift):
                base = default_policy(s, seed)
                out = shifting_policy(s, seed)
                assert np.array_equal(base.rgb, out.rgb)
                assert np.array_equal(base.depth, out.depth)
                break
        else:
            pytest.fail("no seed left the shifting pair idle")

    def test_identity_when_nothing_fires(self):
        s = _sample(8)
        for seed in range(200):
            d = draw_decisions(seed)
            if not any((d.vflip, d.mirror, d.crop, d.channel_swap,
                        d.apply_c_shift, d.apply_d_shift)):
                out = shifting_policy(s, seed)
                assert np.array_equal(out.rgb, s.rgb)
                assert np.array_equal(out.depth, s.depth)
                return
        pytest.fail("no fully idle seed found in 200 draws")

    def test_depth_shift_applied_exactly(self):
        s = _sample(9)
        for seed in range(60):
            dec = draw_decisions(seed)
            if dec.apply_d_shift and not (dec.vflip or dec.mirror or dec.crop):
                out = shifting_policy(s, seed)
                want = np.clip(s.depth.astype(np.float64) + dec.shift_s, 0, s.max_depth)
                assert np.abs(out.depth - want).max() <= 1e-6
                return
        pytest.fail("no seed exercised a pure depth shift")
