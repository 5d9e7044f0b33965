"""Quadrature tests: rule construction, moment exactness, pruning, and the
affine map to arbitrary normal priors."""
import itertools
import math

import numpy as np
import pytest

from tweedie_screen import (
    QuadratureRule,
    affine_map,
    hermite_rule_1d,
    prune_rule,
    renormalize,
    tensor_rule,
)


def normal_moment(k: int) -> float:
    """E[Z^k] for standard normal: (k-1)!! for even k, 0 for odd."""
    if k % 2 == 1:
        return 0.0
    out = 1.0
    for j in range(k - 1, 0, -2):
        out *= j
    return out


def gaussian_moment_fn(mean, cov):
    """Exact raw-moment oracle for Normal(mean, cov).

    Central moments come from the Wick pairing recursion (memoized per
    covariance); raw moments expand binomially around the mean.
    """
    mean = np.asarray(mean, float)
    cov = np.asarray(cov, float)
    d = mean.size
    memo = {(0,) * d: 1.0}

    def central(j):
        j = tuple(j)
        if j in memo:
            return memo[j]
        if sum(j) % 2 == 1:
            memo[j] = 0.0
            return 0.0
        i = next(k for k, v in enumerate(j) if v > 0)
        rest = list(j)
        rest[i] -= 1
        total = 0.0
        for l in range(d):
            if rest[l] > 0:
                nxt = list(rest)
                nxt[l] -= 1
                total += rest[l] * cov[i, l] * central(nxt)
        memo[j] = total
        return total

    def raw(powers):
        total = 0.0
        for js in itertools.product(*[range(k + 1) for k in powers]):
            coef = math.prod(
                math.comb(k, jv) * mean[i] ** (k - jv)
                for i, (k, jv) in enumerate(zip(powers, js))
            )
            total += coef * central(js)
        return total

    return raw


def mapped_moment(mean, cov, powers):
    return gaussian_moment_fn(mean, cov)(powers)


class TestRuleType:
    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError):
            QuadratureRule(np.zeros((3, 1)), np.ones(2))

    def test_nonpositive_weights_rejected(self):
        with pytest.raises(ValueError):
            QuadratureRule(np.zeros((2, 1)), np.array([1.0, 0.0]))

    def test_size_and_dim(self):
        r = tensor_rule(4, 2)
        assert r.size == 16 and r.dim == 2


class TestHermite1d:
    def test_weights_sum_to_one(self):
        for n in (1, 2, 5, 20, 100):
            assert hermite_rule_1d(n).weights.sum() == pytest.approx(1.0, abs=1e-12)

    def test_moment_exactness(self):
        for n in (2, 5, 7):
            r = hermite_rule_1d(n)
            x = r.points[:, 0]
            for k in range(2 * n):
                approx = float((r.weights * x ** k).sum())
                assert approx == pytest.approx(normal_moment(k), abs=1e-9)

    def test_out_of_range_n(self):
        with pytest.raises(ValueError):
            hermite_rule_1d(0)
        with pytest.raises(ValueError):
            hermite_rule_1d(101)


class TestTensorRule:
    def test_default_size(self):
        assert tensor_rule(10, 3).size == 1000

    def test_weights_product_normalized(self):
        r = tensor_rule(6, 3)
        assert r.weights.sum() == pytest.approx(1.0, abs=1e-12)

    def test_cap_enforced(self):
        with pytest.raises(ValueError):
            tensor_rule(100, 4)

    def test_bad_dimension(self):
        with pytest.raises(ValueError):
            tensor_rule(5, 0)


class TestPrune:
    def test_default_prune_keeps_roughly_800(self):
        r = prune_rule(tensor_rule(10, 3), 0.2)
        assert 700 <= r.size <= 800

    def test_weights_not_renormalized(self):
        full = tensor_rule(10, 3)
        pruned = prune_rule(full, 0.2)
        assert pruned.weights.sum() < 1.0
        kept = set(map(tuple, pruned.points))
        for pt, w in zip(full.points, full.weights):
            if tuple(pt) in kept:
                assert w in pruned.weights

    def test_drops_lowest_weights(self):
        full = tensor_rule(8, 3)
        pruned = prune_rule(full, 0.3)
        assert pruned.weights.min() > full.weights.min()

    def test_zero_fraction_drops_only_minimum_ties(self):
        full = tensor_rule(5, 2)
        pruned = prune_rule(full, 0.0)
        n_min = int(np.sum(full.weights == full.weights.min()))
        assert pruned.size == full.size - n_min

    def test_renormalize_opt_in(self):
        r = renormalize(prune_rule(tensor_rule(10, 3), 0.2))
        assert r.weights.sum() == pytest.approx(1.0, abs=1e-12)

    def test_invalid_fraction(self):
        with pytest.raises(ValueError):
            prune_rule(tensor_rule(5, 2), 1.0)


class TestAffineMap:
    def test_identity_map(self):
        r = tensor_rule(5, 3)
        m = affine_map(r, np.zeros(3), np.eye(3))
        assert np.allclose(np.sort(m.points, axis=0), np.sort(r.points, axis=0))

    def test_mapped_moments(self):
        rng = np.random.default_rng(5)
        for n in (5, 7):
            A = rng.standard_normal((3, 3))
            cov = A @ A.T + 0.5 * np.eye(3)
            mean = rng.standard_normal(3)
            r = affine_map(tensor_rule(n, 3), mean, cov)
            mm = gaussian_moment_fn(mean, cov)
            for powers in itertools.product(range(4), repeat=3):
                if sum(powers) > 2 * n - 1 or sum(powers) == 0:
                    continue
                approx = float((r.weights * np.prod(r.points ** powers, axis=1)).sum())
                exact = mm(powers)
                assert abs(approx - exact) <= 1e-9 * max(1.0, abs(exact))

    def test_weights_untouched(self):
        r = tensor_rule(6, 3)
        m = affine_map(r, np.ones(3), 2.0 * np.eye(3))
        assert np.array_equal(m.weights, r.weights)

    def test_singular_covariance_rejected(self):
        cov = np.diag([1.0, 1.0, 0.0])
        with pytest.raises(np.linalg.LinAlgError):
            affine_map(tensor_rule(4, 3), np.zeros(3), cov)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            affine_map(tensor_rule(4, 3), np.zeros(2), np.eye(2))
