"""Rectifier network data model and exact evaluation.

A network is a :class:`LayerStack` (hidden layers shared by every read-out)
plus one or more affine heads over the input and all hidden activations.
Three connection families are supported:

* ``plain``: layer ``i`` only reads layer ``i-1``.
* ``full_skip``: layer ``i`` may read every earlier layer and the raw input.
* ``residual``: adjacent blocks everywhere, plus a skip block from layer
  ``k-2`` into layer ``k`` for odd ``k >= 3``.

Heads are stored flat. For a stack with input dimension ``l0`` and widths
``l1..lm`` the flat layout is ``[c, a0 (l0), a1 (l1), ..., am (lm)]``, which
lines up with the feature vector ``[1, x, relu(z1), ..., relu(zm)]``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping, Sequence, Union

import numpy as np

from .errors import (
    DimensionMismatch,
    EmptyHeads,
    InvalidNet,
    InvalidWidths,
)

# rows x heads evaluated per chunk in batched max-net evaluation
_CHUNK_CELLS = 1 << 22


class NetKind(str, enum.Enum):
    PLAIN = "plain"
    FULL_SKIP = "full_skip"
    RESIDUAL = "residual"


def _frozen(a, ndim):
    arr = np.array(a, dtype=np.float64)
    if arr.ndim != ndim:
        if arr.size == 0:
            arr = arr.reshape((0,) * ndim)
        else:
            raise ValueError(f"expected a {ndim}-d array, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class LayerStack:
    """Hidden-layer parameters of a network family.

    ``W[k-1]`` is the adjacent block feeding layer ``k`` (for ``k = 1`` it
    reads the raw input), ``b[k-1]`` its bias. ``skip[(i, j)]`` is the block
    from layer ``j`` into layer ``i``, with ``j = 0`` meaning the raw input.
    """

    kind: NetKind
    input_dim: int
    widths: tuple
    W: tuple
    b: tuple
    skip: Mapping = field(default_factory=dict)

    def __post_init__(self):
        set_ = object.__setattr__
        set_(self, "kind", NetKind(self.kind))
        set_(self, "input_dim", int(self.input_dim))
        set_(self, "widths", tuple(int(w) for w in self.widths))
        set_(self, "W", tuple(_frozen(w, 2) for w in self.W))
        set_(self, "b", tuple(_frozen(v, 1) for v in self.b))
        skip = {(int(i), int(j)): _frozen(M, 2) for (i, j), M in self.skip.items()}
        set_(self, "skip", dict(sorted(skip.items())))

    @property
    def depth(self) -> int:
        return len(self.widths)

    @cached_property
    def offsets(self) -> tuple:
        """Start index of each block in the flat feature layout.

        ``offsets[0]`` is the input block, ``offsets[k]`` hidden layer ``k``;
        the final entry is the total feature dimension.
        """
        out = [1, 1 + self.input_dim]
        for w in self.widths:
            out.append(out[-1] + w)
        return tuple(out)

    @property
    def feature_dim(self) -> int:
        return self.offsets[-1]

    def block_slice(self, k: int) -> slice:
        return slice(self.offsets[k], self.offsets[k + 1])

    def layer_width(self, k: int) -> int:
        return self.input_dim if k == 0 else self.widths[k - 1]

    def incoming(self, k: int) -> dict:
        """All blocks feeding layer ``k`` keyed by source layer (0 is the input)."""
        blocks = {j: M for (i, j), M in self.skip.items() if i == k}
        blocks[k - 1] = self.W[k - 1]
        return dict(sorted(blocks.items()))

    def violations(self) -> list:
        return list(self._violations)

    @cached_property
    def _violations(self) -> tuple:
        return tuple(_stack_violations(self))


@dataclass(frozen=True, eq=False)
class OutputHead:
    """Affine read-out ``c + a0.x + sum_k a_k.relu(z_k)``."""

    c: float
    a0: np.ndarray
    a: tuple

    def __post_init__(self):
        object.__setattr__(self, "c", float(self.c))
        object.__setattr__(self, "a0", _frozen(self.a0, 1))
        object.__setattr__(self, "a", tuple(_frozen(v, 1) for v in self.a))

    def vector(self) -> np.ndarray:
        return np.concatenate([[self.c], self.a0, *self.a])

    @classmethod
    def from_vector(cls, stack: LayerStack, v) -> "OutputHead":
        v = np.asarray(v, dtype=np.float64)
        if v.shape != (stack.feature_dim,):
            raise DimensionMismatch(
                f"head vector has shape {v.shape}, expected ({stack.feature_dim},)"
            )
        o = stack.offsets
        return cls(v[0], v[o[0]:o[1]], tuple(v[o[k]:o[k + 1]] for k in range(1, len(o) - 1)))


def _head_violations(stack: LayerStack, head: OutputHead, label: str) -> list:
    out = []
    if head.a0.shape != (stack.input_dim,):
        out.append(f"{label}.a0: length {head.a0.shape[0]}, expected {stack.input_dim}")
    if len(head.a) != stack.depth:
        out.append(f"{label}.a: {len(head.a)} blocks, expected {stack.depth}")
    for k, (v, w) in enumerate(zip(head.a, stack.widths), start=1):
        if v.shape != (w,):
            out.append(f"{label}.a[{k}]: length {v.shape[0]}, expected {w}")
    return out


@dataclass(frozen=True, eq=False)
class RectifierNet:
    stack: LayerStack
    head: OutputHead

    @property
    def input_dim(self) -> int:
        return self.stack.input_dim

    @property
    def kind(self) -> NetKind:
        return self.stack.kind

    @property
    def depth(self) -> int:
        return self.stack.depth

    @property
    def n_heads(self) -> int:
        return 1

    @cached_property
    def coef(self) -> np.ndarray:
        c = self.head.vector()[None, :]
        c.setflags(write=False)
        return c


@dataclass(frozen=True, eq=False)
class MaxRectifierNet:
    """Shared stack with many heads; the output is the pointwise max over heads.

    Heads live in ``coef``, one flat head vector per row. Use
    :meth:`from_heads` to build one from :class:`OutputHead` objects.
    """

    stack: LayerStack
    coef: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "coef", _frozen(self.coef, 2))

    @classmethod
    def from_heads(cls, stack: LayerStack, heads: Sequence[OutputHead]) -> "MaxRectifierNet":
        heads = list(heads)
        bad = []
        for n, h in enumerate(heads):
            bad += _head_violations(stack, h, f"heads[{n}]")
        if bad:
            raise InvalidNet(bad)
        if not heads:
            return cls(stack, np.zeros((0, stack.feature_dim)))
        return cls(stack, np.stack([h.vector() for h in heads]))

    @property
    def heads(self) -> tuple:
        return tuple(OutputHead.from_vector(self.stack, row) for row in self.coef)

    @property
    def input_dim(self) -> int:
        return self.stack.input_dim

    @property
    def kind(self) -> NetKind:
        return self.stack.kind

    @property
    def depth(self) -> int:
        return self.stack.depth

    @property
    def n_heads(self) -> int:
        return self.coef.shape[0]


Net = Union[RectifierNet, MaxRectifierNet]


def as_max(net: Net) -> MaxRectifierNet:
    if isinstance(net, MaxRectifierNet):
        return net
    return MaxRectifierNet(net.stack, net.coef)


@dataclass(frozen=True)
class EvalTrace:
    preactivations: tuple
    activations: tuple
    output: float


# ---------------------------------------------------------------- validation


def _stack_violations(stack: LayerStack) -> list:
    out = []
    m = stack.depth
    if m < 1:
        return ["widths: at least one hidden layer is required"]
    if stack.input_dim < 1:
        out.append(f"input_dim: must be positive, got {stack.input_dim}")
    for k, w in enumerate(stack.widths, start=1):
        if w < 1:
            out.append(f"widths[{k}]: must be positive, got {w}")
    if len(stack.W) != m:
        out.append(f"W: {len(stack.W)} blocks, expected {m}")
    if len(stack.b) != m:
        out.append(f"b: {len(stack.b)} vectors, expected {m}")
    for k in range(1, min(m, len(stack.W)) + 1):
        want = (stack.layer_width(k), stack.layer_width(k - 1))
        if stack.W[k - 1].shape != want:
            out.append(f"W[{k}]: shape {stack.W[k - 1].shape}, expected {want}")
    for k in range(1, min(m, len(stack.b)) + 1):
        if stack.b[k - 1].shape != (stack.layer_width(k),):
            out.append(
                f"b[{k}]: length {stack.b[k - 1].shape[0]}, expected {stack.layer_width(k)}"
            )
    for (i, j), M in stack.skip.items():
        label = f"skip[{i},{j}]"
        if not (1 <= i <= m and 0 <= j < i):
            out.append(f"{label}: needs 0 <= from < to <= {m}")
            continue
        if j == i - 1:
            out.append(f"{label}: duplicates the adjacent block W[{i}]")
            continue
        if stack.kind is NetKind.PLAIN:
            out.append(f"{label}: skip block on Plain kind")
            continue
        if stack.kind is NetKind.RESIDUAL:
            if i % 2 == 0:
                out.append(f"{label}: A_k must vanish for even k")
                continue
            if j != i - 2:
                out.append(f"{label}: residual skip must connect layer k-2 to layer k")
                continue
        want = (stack.layer_width(i), stack.layer_width(j))
        if M.shape != want:
            out.append(f"{label}: shape {M.shape}, expected {want}")
    return out


def validate(net) -> list:
    """Return a list of invariant violations; empty means the net is well formed."""
    if isinstance(net, LayerStack):
        return net.violations()
    out = net.stack.violations()
    if out:
        return out
    if isinstance(net, RectifierNet):
        return _head_violations(net.stack, net.head, "head")
    if net.coef.shape[0] == 0:
        out.append("heads: at least one head is required")
    if net.coef.shape[1] != net.stack.feature_dim:
        out.append(
            f"heads: {net.coef.shape[1]} coefficients per head, expected {net.stack.feature_dim}"
        )
    return out


def _require_valid(net):
    bad = validate(net)
    if bad:
        if isinstance(net, MaxRectifierNet) and net.coef.shape[0] == 0 and len(bad) == 1:
            raise EmptyHeads(bad[0])
        raise InvalidNet(bad)


# ---------------------------------------------------------------- evaluation


def _as_batch(stack: LayerStack, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != stack.input_dim:
        raise DimensionMismatch(
            f"input has shape {X.shape}, expected (*, {stack.input_dim})"
        )
    return X


def preactivations(stack: LayerStack, X) -> list:
    """Pre-activations ``z_1..z_m`` for a batch of inputs, each of shape (s, l_k)."""
    X = _as_batch(stack, X)
    acts = [X]
    zs = []
    for k in range(1, stack.depth + 1):
        z = np.broadcast_to(stack.b[k - 1], (X.shape[0], stack.widths[k - 1])).copy()
        for j, M in stack.incoming(k).items():
            z += acts[j] @ M.T
        zs.append(z)
        acts.append(np.maximum(z, 0.0))
    return zs


def features(stack: LayerStack, X) -> np.ndarray:
    """Flat feature matrix ``[1, x, relu(z_1), ..., relu(z_m)]`` per row."""
    X = _as_batch(stack, X)
    zs = preactivations(stack, X)
    return np.hstack([np.ones((X.shape[0], 1)), X] + [np.maximum(z, 0.0) for z in zs])


def eval_rectifier(net: RectifierNet, x) -> EvalTrace:
    _require_valid(net)
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (net.input_dim,):
        raise DimensionMismatch(f"x has shape {x.shape}, expected ({net.input_dim},)")
    zs = [z[0] for z in preactivations(net.stack, x[None, :])]
    acts = [np.maximum(z, 0.0) for z in zs]
    # same summation path as batched evaluation, so the two agree bit for bit
    out = np.concatenate([[1.0], x, *acts]) @ net.coef[0]
    return EvalTrace(tuple(zs), tuple(acts), float(out))


def eval_max_rectifier(net: MaxRectifierNet, x) -> float:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (net.input_dim,):
        raise DimensionMismatch(f"x has shape {x.shape}, expected ({net.input_dim},)")
    return float(evaluate(net, x[None, :])[0])


def head_values(net: Net, X) -> np.ndarray:
    """Every head's value at every input row, shape (s, n_heads)."""
    _require_valid(net)
    return features(net.stack, X) @ net.coef.T


def evaluate(net: Net, X) -> np.ndarray:
    """Network output for a batch of inputs (rows of ``X``)."""
    _require_valid(net)
    Phi = features(net.stack, X)
    if isinstance(net, RectifierNet):
        return Phi @ net.coef[0]
    if net.coef.shape[0] == 1:
        return Phi @ net.coef[0]
    n = net.coef.shape[0]
    rows = max(1, _CHUNK_CELLS // n)
    out = np.empty(Phi.shape[0])
    for s in range(0, Phi.shape[0], rows):
        out[s:s + rows] = (Phi[s:s + rows] @ net.coef.T).max(axis=1)
    return out


# ---------------------------------------------------------------- generation


def mandated_skips(kind: NetKind, widths: Sequence[int]) -> list:
    """Skip positions a freshly generated net of this family populates."""
    m = len(widths)
    kind = NetKind(kind)
    if kind is NetKind.FULL_SKIP:
        return [(i, j) for i in range(2, m + 1) for j in range(0, i - 1)]
    if kind is NetKind.RESIDUAL:
        return [(k, k - 2) for k in range(3, m + 1, 2)]
    return []


def random_net(kind, input_dim: int, widths: Sequence[int], seed: int, scale: float = 1.0) -> RectifierNet:
    """Draw every parameter i.i.d. uniform on [-scale, scale].

    Draw order is fixed (adjacent blocks and biases layer by layer, then skip
    blocks in sorted order, then the head) so a seed pins the net exactly.
    """
    kind = NetKind(kind)
    widths = [int(w) for w in widths]
    if not widths or any(w < 1 for w in widths) or input_dim < 1:
        raise InvalidWidths(f"widths must be a nonempty list of positive integers, got {widths}")
    if not scale > 0:
        raise ValueError(f"scale must be positive, got {scale}")
    rng = np.random.default_rng(seed)
    u = lambda *shape: rng.uniform(-scale, scale, size=shape)
    dims = [input_dim] + widths
    W, b = [], []
    for k in range(1, len(dims)):
        W.append(u(dims[k], dims[k - 1]))
        b.append(u(dims[k]))
    skip = {(i, j): u(dims[i], dims[j]) for i, j in mandated_skips(kind, widths)}
    stack = LayerStack(kind, input_dim, widths, W, b, skip)
    head = OutputHead(u(1)[0], u(input_dim), [u(w) for w in widths])
    return RectifierNet(stack, head)
