import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from deepshallow.errors import NegativeCoefficient
from deepshallow.lemmas import (
    FeatureLinear,
    mirror_identity_terms,
    sign_split,
    subset_expand,
    subset_matrix,
    subset_member,
)
from oracles import relu, subset_max


def x_form(coef=1.0):
    return FeatureLinear.of_input([coef])


def values(forms, X):
    return np.stack([f.evaluate(None, X) for f in forms], axis=1)


class TestSubsetMatrix:
    def test_small(self):
        np.testing.assert_array_equal(subset_matrix(2), [[0, 0], [1, 0], [0, 1], [1, 1]])

    def test_recursive_construction(self):
        prev = np.array([[0.0], [1.0]])
        for n in range(2, 6):
            prev = np.block([[prev, np.zeros((len(prev), 1))], [prev, np.ones((len(prev), 1))]])
            np.testing.assert_array_equal(subset_matrix(n), prev)

    def test_member(self):
        M = subset_matrix(4)
        assert all(subset_member(j, i) == bool(M[j, i]) for j in range(16) for i in range(4))

    def test_refuses_huge(self):
        with pytest.raises(Exception):
            subset_matrix(17)


class TestSubsetExpand:
    def test_single(self):
        g = subset_expand([2.0], [x_form()])
        X = np.array([[3.0], [-1.0]])
        np.testing.assert_array_equal(values(g, X), [[0, 6], [0, -2]])
        assert values(g, [[3.0]]).max() == 6.0

    def test_absolute_value(self):
        g = subset_expand([1.0, 1.0], [x_form(1.0), x_form(-1.0)])
        X = np.linspace(-4, 4, 17)[:, None]
        np.testing.assert_array_equal(values(g, X)[:, [0, 3]], 0.0)
        np.testing.assert_array_equal(values(g, X).max(axis=1), np.abs(X[:, 0]))

    def test_random_three_forms(self):
        rng = np.random.default_rng(11)
        a = rng.uniform(0, 1, 3)
        forms = [FeatureLinear.of_input(rng.uniform(-1, 1, 2), rng.uniform(-1, 1)) for _ in range(3)]
        X = rng.uniform(-5, 5, (1000, 2))
        F = values(forms, X)
        direct = (a * np.maximum(F, 0)).sum(axis=1)
        np.testing.assert_allclose(values(subset_expand(a, forms), X).max(axis=1), direct, rtol=1e-12, atol=1e-14)

    def test_rejects_negative(self):
        with pytest.raises(NegativeCoefficient):
            subset_expand([1.0, -0.5], [x_form(), x_form()])


@settings(max_examples=60, deadline=None)
@given(
    a=st.lists(st.floats(0, 10), min_size=1, max_size=4),
    v=st.lists(st.floats(-10, 10), min_size=4, max_size=4),
)
def test_subset_expansion_matches_brute_force(a, v):
    n = len(a)
    forms = [FeatureLinear.of_input([1.0], v[i]) for i in range(n)]
    got = values(subset_expand(a, forms), [[0.0]]).max()
    assert got == pytest.approx(subset_max(a, v[:n]), rel=1e-12, abs=1e-12)
    assert got == pytest.approx(sum(ai * relu(vi) for ai, vi in zip(a, v)), rel=1e-12, abs=1e-12)


class TestSignSplit:
    def test_mixed(self):
        s = sign_split([1.0, -2.0, 0.0])
        assert s.pos_idx == (0,) and s.neg_idx == (1, 2)
        np.testing.assert_array_equal(s.a_plus, [1.0])
        np.testing.assert_array_equal(s.a_minus_abs, [2.0, 0.0])

    def test_all_positive(self):
        assert sign_split([0.5, 3.0]).neg_idx == ()

    def test_all_zero(self):
        s = sign_split([0.0, 0.0])
        assert s.pos_idx == () and np.all(s.a_minus_abs == 0)

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(-5, 5), min_size=1, max_size=6))
    def test_partition_and_reassembly(self, a):
        s = sign_split(a)
        assert sorted(s.pos_idx + s.neg_idx) == list(range(len(a)))
        np.testing.assert_array_equal(s.reassemble(), np.where(np.array(a) > 0, a, -np.abs(a)))


class TestMirrorIdentity:
    def test_scalar_identity(self):
        terms = mirror_identity_terms([[1.0]], [0.0], [x_form()])
        lhs, rhs = terms.sides([[-3.0], [5.0]])
        np.testing.assert_array_equal(lhs, [[0.0], [5.0]])
        np.testing.assert_array_equal(rhs, lhs)

    def test_scalar_negative_weight_grid(self):
        terms = mirror_identity_terms([[-1.0]], [1.0], [x_form()])
        lhs, rhs = terms.sides(np.linspace(-5, 5, 100)[:, None])
        np.testing.assert_allclose(lhs, rhs, rtol=1e-12, atol=1e-14)

    def test_forms_are_affine_pieces(self):
        terms = mirror_identity_terms([[2.0]], [0.5], [x_form()])
        X = np.array([[-1.5], [2.0]])
        Phi = np.hstack([np.ones((2, 1)), X, np.maximum(X, 0)])
        z, zh, zb = (Phi @ t[0].flat() for t in (terms.z, terms.z_hat, terms.z_bar))
        np.testing.assert_allclose(z, 2 * np.maximum(X[:, 0], 0) + 0.5)
        np.testing.assert_allclose(zh, -2 * np.maximum(-X[:, 0], 0) + 0.5)
        np.testing.assert_allclose(zb, 2 * X[:, 0] + 0.5)

    def test_scalar_feed_holds_for_any_output_width(self):
        rng = np.random.default_rng(5)
        W, b = rng.uniform(-1, 1, (3, 1)), rng.uniform(-1, 1, 3)
        lhs, rhs = mirror_identity_terms(W, b, [x_form()]).sides(rng.uniform(-5, 5, (1000, 1)))
        np.testing.assert_allclose(lhs, rhs, rtol=1e-12, atol=1e-14)

    def test_mixed_sign_counterexample(self):
        # with z_prev = (1, -1) and W = [1, 1] the two sides are 1 and 0
        forms = [FeatureLinear.of_input([1.0, 0.0]), FeatureLinear.of_input([0.0, 1.0])]
        lhs, rhs = mirror_identity_terms([[1.0, 1.0]], [0.0], forms).sides([[1.0, -1.0]])
        assert (lhs[0, 0], rhs[0, 0]) == (1.0, 0.0)

    @pytest.mark.xfail(strict=True, reason="identity fails when z_prev has entries of both signs")
    def test_random_two_by_two(self):
        rng = np.random.default_rng(5)
        W, b = rng.uniform(-1, 1, (2, 2)), rng.uniform(-1, 1, 2)
        forms = [FeatureLinear.of_input(row) for row in np.eye(2)]
        lhs, rhs = mirror_identity_terms(W, b, forms).sides(rng.uniform(-5, 5, (1000, 2)))
        np.testing.assert_allclose(lhs, rhs, rtol=1e-12, atol=1e-14)

    def test_sum_relation_always_holds(self):
        # z + z_hat == z_bar + b for every z_prev, whatever the signs
        rng = np.random.default_rng(8)
        W, b = rng.uniform(-1, 1, (3, 3)), rng.uniform(-1, 1, 3)
        forms = [FeatureLinear.of_input(row) for row in np.eye(3)]
        t = mirror_identity_terms(W, b, forms)
        X = rng.uniform(-5, 5, (200, 3))
        ev = lambda fs: np.stack([f.evaluate(t.stack, X) for f in fs], axis=1)
        np.testing.assert_allclose(ev(t.z) + ev(t.z_hat), ev(t.z_bar) + b, atol=1e-12)
