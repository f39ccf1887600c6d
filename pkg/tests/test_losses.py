"""Loss values, subgradients and Lipschitz properties."""

import numpy as np
import pytest

from robust_wdep_dnn.errors import InvalidSpecError
from robust_wdep_dnn.losses import (
    LossSpec,
    dloss_dpred,
    lipschitz_constant,
    loss,
    loss_spec_from_string,
)

L1 = LossSpec("l1")
L2 = LossSpec("l2")
HUBER1 = LossSpec("huber", delta=1.0)
HUBER = LossSpec("huber")  # default delta 1.345


class TestValues:
    def test_huber_zero_residual(self):
        assert loss(HUBER1, 0.0, 0.0) == 0.0

    def test_huber_linear_region(self):
        assert loss(HUBER1, 2.0, 0.0) == pytest.approx(1.5, abs=0)

    def test_huber_boundary_both_branches_agree(self):
        assert loss(HUBER1, 1.0, 0.0) == pytest.approx(0.5, abs=0)
        d = HUBER.delta
        quad = 0.5 * d * d
        lin = d * d - 0.5 * d * d
        assert abs(quad - lin) <= 1e-12
        assert loss(HUBER, d, 0.0) == pytest.approx(quad, abs=1e-12)

    def test_l1(self):
        assert loss(L1, -3.0, 1.0) == 4.0

    def test_l2(self):
        assert loss(L2, 2.0, -1.0) == 9.0

    def test_vectorized(self):
        out = loss(L1, np.array([0.0, 2.0]), np.array([1.0, 2.0]))
        assert np.array_equal(out, [1.0, 0.0])

    def test_nonfinite_rejected(self):
        with pytest.raises(ValueError):
            loss(L1, np.inf, 0.0)
        with pytest.raises(ValueError):
            loss(HUBER, 0.0, np.nan)


class TestSubgradient:
    def test_l1_zero_at_tie(self):
        assert dloss_dpred(L1, 3.0, 3.0) == 0.0

    def test_huber_quadratic_region(self):
        assert dloss_dpred(HUBER, 0.5, 0.0) == 0.5

    def test_huber_linear_region(self):
        assert dloss_dpred(HUBER, 10.0, 0.0) == 1.345
        assert dloss_dpred(HUBER, -10.0, 0.0) == -1.345

    def test_huber_derivative_continuous_at_boundary(self):
        d = HUBER.delta
        assert dloss_dpred(HUBER, d, 0.0) == pytest.approx(d, abs=1e-12)

    def test_l2(self):
        assert dloss_dpred(L2, 2.0, 0.5) == pytest.approx(3.0, abs=0)

    def test_matches_finite_differences(self):
        rng = np.random.default_rng(4)
        for spec in (L1, HUBER, L2):
            for _ in range(200):
                y, yt = rng.uniform(-5, 5, size=2)
                if spec.family == "l1" and abs(y - yt) < 1e-3:
                    continue
                if spec.family == "huber" and abs(abs(y - yt) - spec.delta) < 1e-3:
                    continue
                h = 1e-6
                fd = (loss(spec, y + h, yt) - loss(spec, y - h, yt)) / (2 * h)
                assert dloss_dpred(spec, y, yt) == pytest.approx(fd, abs=1e-6)


class TestLipschitz:
    def test_constants(self):
        assert lipschitz_constant(L1) == 1.0
        assert lipschitz_constant(HUBER) == 1.345
        assert lipschitz_constant(L2) is None

    def test_sampled_lipschitz_bound(self):
        rng = np.random.default_rng(2024)
        y1 = rng.uniform(-50, 50, size=10_000)
        y2 = rng.uniform(-50, 50, size=10_000)
        yt = rng.uniform(-50, 50, size=10_000)
        for spec in (L1, HUBER):
            k = lipschitz_constant(spec)
            gap = np.abs(loss(spec, y1, yt) - loss(spec, y2, yt))
            assert np.all(gap <= k * np.abs(y1 - y2) + 1e-12)


class TestShape:
    def test_nonnegative_and_zero_iff_equal(self):
        rng = np.random.default_rng(31)
        y = rng.uniform(-20, 20, size=1000)
        yt = rng.uniform(-20, 20, size=1000)
        for spec in (L1, HUBER, L2):
            values = loss(spec, y, yt)
            assert np.all(values >= 0)
            assert np.all((values == 0) == (y == yt))
            assert np.all(loss(spec, y, y) == 0)

    def test_even_in_residual(self):
        rng = np.random.default_rng(32)
        r = rng.uniform(-10, 10, size=500)
        for spec in (L1, HUBER, L2):
            assert np.array_equal(loss(spec, r, 0.0), loss(spec, -r, 0.0))

    def test_depends_only_on_residual(self):
        for spec in (L1, HUBER, L2):
            assert loss(spec, 5.0, 3.0) == loss(spec, 2.0, 0.0)


class TestSpec:
    def test_bad_family(self):
        with pytest.raises(InvalidSpecError):
            LossSpec("quantile")

    def test_bad_delta(self):
        with pytest.raises(InvalidSpecError):
            LossSpec("huber", delta=0.0)

    def test_from_string(self):
        assert loss_spec_from_string("l1").family == "l1"
        assert loss_spec_from_string("huber").delta == 1.345
        assert loss_spec_from_string("huber", 2.0).delta == 2.0
