import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from deepshallow.errors import DimensionMismatch, EmptyHeads, InvalidNet, InvalidWidths
from deepshallow.io import net_to_dict
from deepshallow.net import (
    LayerStack,
    MaxRectifierNet,
    NetKind,
    OutputHead,
    RectifierNet,
    as_max,
    eval_max_rectifier,
    eval_rectifier,
    evaluate,
    mandated_skips,
    random_net,
    validate,
)
from oracles import interpret, plain_trace


def tiny_plain():
    stack = LayerStack("plain", 1, [1], [[[1.0]]], [[0.0]])
    return RectifierNet(stack, OutputHead(0.0, [0.0], [[1.0]]))


def two_layer_plain():
    stack = LayerStack("plain", 1, [1, 1], [[[1.0]], [[-1.0]]], [[0.0], [1.0]])
    return RectifierNet(stack, OutputHead(0.0, [0.0], [[0.0], [1.0]]))


class TestEvalRectifier:
    def test_negative_input_is_cut(self):
        assert eval_rectifier(tiny_plain(), [-2.0]).output == 0.0

    def test_positive_input_passes(self):
        assert eval_rectifier(tiny_plain(), [3.0]).output == 3.0

    def test_two_layers_hand_values(self):
        tr = eval_rectifier(two_layer_plain(), [0.5])
        assert tr.preactivations[0][0] == 0.5
        assert tr.preactivations[1][0] == 0.5
        assert tr.output == 0.5

    def test_matches_straight_line_interpreter(self):
        net = two_layer_plain()
        zs = plain_trace([[[1.0]], [[-1.0]]], [[0.0], [1.0]], [0.5])
        assert zs == [[0.5], [0.5]]
        assert interpret(net_to_dict(net), [0.5]) == 0.5

    def test_wrong_dimension(self):
        with pytest.raises(DimensionMismatch):
            eval_rectifier(tiny_plain(), [1.0, 2.0])


@pytest.mark.parametrize("kind", list(NetKind))
@pytest.mark.parametrize("widths", [[1], [2, 3], [1, 2, 1], [2, 1, 2, 1]])
def test_batched_evaluation_matches_interpreter(kind, widths):
    net = random_net(kind, 3, widths, seed=17)
    doc = net_to_dict(net)
    X = np.random.default_rng(0).uniform(-5, 5, (40, 3))
    got = evaluate(net, X)
    want = [interpret(doc, x) for x in X]
    np.testing.assert_allclose(got, want, rtol=1e-12, atol=1e-12)


class TestMaxRectifier:
    def heads_zero_and_2x(self):
        stack = LayerStack("plain", 1, [1], [[[1.0]]], [[0.0]])
        return MaxRectifierNet.from_heads(
            stack, [OutputHead(0.0, [0.0], [[0.0]]), OutputHead(0.0, [2.0], [[0.0]])]
        )

    def test_negative(self):
        assert eval_max_rectifier(self.heads_zero_and_2x(), [-1.0]) == 0.0

    def test_positive(self):
        assert eval_max_rectifier(self.heads_zero_and_2x(), [2.0]) == 4.0

    def test_single_head_matches_rectifier(self):
        net = random_net("residual", 2, [2, 1, 2], seed=3)
        X = np.random.default_rng(42).uniform(-5, 5, (100, 2))
        single = [eval_rectifier(net, x).output for x in X]
        np.testing.assert_array_equal([eval_max_rectifier(as_max(net), x) for x in X], single)

    def test_empty_heads(self):
        stack = LayerStack("plain", 1, [1], [[[1.0]]], [[0.0]])
        with pytest.raises(EmptyHeads):
            evaluate(MaxRectifierNet(stack, np.zeros((0, stack.feature_dim))), [[0.0]])


class TestValidate:
    def test_well_formed(self):
        assert validate(random_net("plain", 2, [2, 2], seed=0)) == []

    def test_plain_with_skip(self):
        net = random_net("plain", 1, [1, 1, 1], seed=0)
        s = net.stack
        bad = LayerStack(s.kind, s.input_dim, s.widths, s.W, s.b, {(3, 1): [[1.0]]})
        v = validate(RectifierNet(bad, net.head))
        assert len(v) == 1 and "skip block on Plain kind" in v[0]

    def test_residual_even_skip(self):
        net = random_net("residual", 1, [1, 1, 1, 1], seed=0)
        s = net.stack
        skip = dict(s.skip)
        skip[(4, 2)] = [[0.5]]
        v = validate(LayerStack(s.kind, s.input_dim, s.widths, s.W, s.b, skip))
        assert any("A_k must vanish for even k" in msg for msg in v)

    def test_shape_errors_reported(self):
        s = LayerStack("plain", 2, [2], [[[1.0, 2.0]]], [[0.0, 0.0]])
        assert any("W[1]" in msg for msg in validate(s))

    def test_invalid_net_raises_on_eval(self):
        s = LayerStack("plain", 2, [2], [[[1.0, 2.0]]], [[0.0, 0.0]])
        with pytest.raises(InvalidNet):
            evaluate(RectifierNet(s, OutputHead(0.0, [0, 0], [[0, 0]])), [[0.0, 0.0]])


class TestRandomNet:
    def test_deterministic(self):
        a = random_net("plain", 2, [2, 2], seed=1, scale=1.0)
        b = random_net("plain", 2, [2, 2], seed=1, scale=1.0)
        assert np.array_equal(a.coef, b.coef)
        assert all(np.array_equal(x, y) for x, y in zip(a.stack.W, b.stack.W))

    def test_residual_valid(self):
        assert validate(random_net("residual", 3, [2, 2, 2], seed=7)) == []

    def test_full_skip_blocks(self):
        net = random_net("full_skip", 1, [1, 1, 1], seed=3)
        assert set(net.stack.skip) == {(2, 0), (3, 0), (3, 1)}

    def test_mandated_residual(self):
        assert mandated_skips("residual", [1] * 6) == [(3, 1), (5, 3)]

    @pytest.mark.parametrize("widths", [[], [0], [2, -1]])
    def test_bad_widths(self, widths):
        with pytest.raises(InvalidWidths):
            random_net("plain", 2, widths, seed=0)


@settings(max_examples=40, deadline=None)
@given(
    kind=st.sampled_from(list(NetKind)),
    widths=st.lists(st.integers(1, 3), min_size=1, max_size=4),
    seed=st.integers(0, 10_000),
)
def test_generated_nets_always_validate(kind, widths, seed):
    assert validate(random_net(kind, 2, widths, seed)) == []
