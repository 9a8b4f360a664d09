import numpy as np
import pytest

from deepshallow.core import plan_step
from deepshallow.errors import CapExceeded, DepthTooSmall, NotPlain
from deepshallow.io import net_to_dict
from deepshallow.net import MaxRectifierNet, NetKind, evaluate, random_net, validate
from deepshallow.plain import collapse_plain, plan_plain_reduction, reduce_depth_plain
from helpers import max_rel_err
from oracles import interpret


class TestReduceDepthPlain:
    def test_width_one_pair(self):
        net = random_net("plain", 2, [1, 1], seed=2)
        red, report = reduce_depth_plain(net)
        assert red.stack.widths == (2,) and red.n_heads == 2
        assert max_rel_err(net, red) <= 1e-9
        assert report.rules == ["plain"]

    def test_head_count_doubles_per_removed_unit(self):
        red, _ = reduce_depth_plain(random_net("plain", 2, [1, 3], seed=0))
        assert red.n_heads == 8

    def test_positive_top_coefficients_leave_new_units_unused(self):
        net = random_net("plain", 2, [1, 2], seed=6)
        coef = net.coef.copy()
        coef[0, -2:] = [0.7, 1.3]
        red, _ = reduce_depth_plain(MaxRectifierNet(net.stack, coef))
        appended = red.stack.block_slice(1)
        assert np.all(red.coef[:, appended][:, 1:] == 0)

    def test_structure(self):
        net = random_net("plain", 3, [2, 1, 2], seed=1)
        red, _ = reduce_depth_plain(net)
        assert red.kind is NetKind.PLAIN
        assert red.stack.widths == (2, 3)
        assert validate(red) == []

    def test_depth_one_rejected(self):
        with pytest.raises(DepthTooSmall):
            reduce_depth_plain(random_net("plain", 2, [3], seed=0))

    def test_wrong_kind(self):
        with pytest.raises(NotPlain):
            reduce_depth_plain(random_net("residual", 2, [1, 1], seed=0))

    def test_plan_rows(self):
        step = plan_plain_reduction(random_net("plain", 1, [1, 1, 1], seed=0).stack)
        assert step.stack.widths == (1, 2) and not step.z0_units

    def test_matches_interpreter_on_width_one_feed(self):
        net = random_net("plain", 2, [3, 1, 2], seed=12)
        red, _ = reduce_depth_plain(net)
        doc = net_to_dict(red)
        X = np.random.default_rng(3).uniform(-5, 5, (30, 2))
        np.testing.assert_allclose([interpret(doc, x) for x in X], evaluate(net, X), rtol=1e-9, atol=1e-12)

    @pytest.mark.xfail(strict=True, reason="reduction is inexact when the layer below the top has width >= 2")
    def test_wide_feed_pair(self):
        net = random_net("plain", 2, [2, 2], seed=9)
        red, _ = reduce_depth_plain(net)
        assert max_rel_err(net, red) <= 1e-9


class TestCollapsePlain:
    def test_sizes_uniform(self):
        out, report = collapse_plain(random_net("plain", 2, [2, 2, 2], seed=0))
        assert out.stack.widths == (6,) and out.n_heads == 64
        assert report.head_exponent == 6 and report.final_width == 6

    def test_sizes_uneven(self):
        out, _ = collapse_plain(random_net("plain", 2, [3, 2], seed=0))
        assert out.stack.widths == (5,) and out.n_heads == 4

    def test_width_one_chain_is_exact(self):
        net = random_net("plain", 2, [1, 1, 1, 2], seed=4)
        out, _ = collapse_plain(net)
        assert out.depth == 1
        assert max_rel_err(net, out) <= 1e-9

    @pytest.mark.xfail(strict=True, reason="reduction is inexact when the layer below the top has width >= 2")
    def test_wide_pair_seed_nine(self):
        net = random_net("plain", 2, [2, 2], seed=9)
        out, _ = collapse_plain(net)
        assert max_rel_err(net, out) <= 1e-9

    def test_cap(self):
        with pytest.raises(CapExceeded):
            collapse_plain(random_net("plain", 1, [1, 2, 2], seed=0), head_cap=5)

    def test_force_lifts_cap(self):
        out, _ = collapse_plain(random_net("plain", 1, [1, 2, 2], seed=0), head_cap=None)
        assert out.n_heads == 2 ** 6

    def test_depth_one_is_unchanged(self):
        net = random_net("plain", 2, [3], seed=0)
        out, report = collapse_plain(net)
        assert report.steps == 0 and out.n_heads == 1
        np.testing.assert_array_equal(out.coef, net.coef)

    def test_dedup_and_prune_keep_function(self):
        net = random_net("plain", 2, [1, 1, 2], seed=8)
        coef = net.coef.copy()
        coef[0, -1] = 0.0
        base = MaxRectifierNet(net.stack, coef)
        full, _ = collapse_plain(base)
        pruned, _ = collapse_plain(base, prune_zeros=True, dedup=True)
        assert pruned.n_heads < full.n_heads
        assert max_rel_err(full, pruned) <= 1e-12
        assert max_rel_err(base, pruned) <= 1e-9

    def test_reduce_twice_equals_collapse(self):
        net = random_net("plain", 2, [2, 1, 2], seed=5)
        once, _ = reduce_depth_plain(net)
        twice, _ = reduce_depth_plain(once)
        col, _ = collapse_plain(net)
        np.testing.assert_array_equal(twice.coef, col.coef)
        assert all(np.array_equal(x, y) for x, y in zip(twice.stack.W, col.stack.W))


def test_plan_step_rejects_skip_inputs_without_units():
    stack = random_net("full_skip", 1, [1, 1], seed=0).stack
    with pytest.raises(Exception):
        plan_step(stack, False, "plain")
