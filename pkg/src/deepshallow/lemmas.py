"""Building blocks of depth reduction.

Two identities carry every reduction in this package:

* a nonnegative combination of rectified forms equals the max over all
  subset sums of those forms (:func:`subset_expand`);
* for ``z = W relu(p) + b`` and its mirror ``z_hat = -W relu(-p) + b``,
  ``relu(z) + relu(z_hat) == relu(b) + relu(W p + b)`` elementwise
  (:func:`mirror_identity_terms`).

The second lets a head with negative weights on a layer be rewritten with
nonnegative weights on ``z`` and ``z_hat`` plus terms that no longer need
the layer, after which the first identity removes it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import DimensionMismatch, NegativeCoefficient, NetError
from .net import LayerStack, NetKind, features

MAX_MATERIALIZED_SUBSETS = 16


def subset_member(j: int, i: int) -> bool:
    """Whether column ``i`` (0-based) belongs to subset row ``j`` (0-based)."""
    return bool((j >> i) & 1)


def subset_matrix(n: int, allow_large: bool = False) -> np.ndarray:
    """The 2**n x n 0/1 matrix whose row j holds the bits of j.

    Row 0 is the empty subset and the last row the full one; this is the
    ordering produced by ``M_1 = [0; 1]``, ``M_k = [[M, 0], [M, 1]]``.
    """
    if n < 0:
        raise ValueError("n must be nonnegative")
    if n > MAX_MATERIALIZED_SUBSETS and not allow_large:
        raise NetError(
            f"refusing to materialize 2**{n} subset rows; pass allow_large=True"
        )
    rows = np.arange(1 << n)[:, None]
    return ((rows >> np.arange(n)[None, :]) & 1).astype(np.float64)


@dataclass(frozen=True, eq=False)
class SplitCoefficients:
    pos_idx: tuple
    neg_idx: tuple
    a_plus: np.ndarray
    a_minus_abs: np.ndarray

    @property
    def size(self) -> int:
        return len(self.pos_idx) + len(self.neg_idx)

    def magnitudes(self) -> np.ndarray:
        """``|a|`` in original index order."""
        out = np.zeros(self.size)
        out[list(self.pos_idx)] = self.a_plus
        out[list(self.neg_idx)] = self.a_minus_abs
        return out

    def reassemble(self) -> np.ndarray:
        out = np.zeros(self.size)
        out[list(self.pos_idx)] = self.a_plus
        out[list(self.neg_idx)] = -self.a_minus_abs
        return out


def sign_split(a) -> SplitCoefficients:
    """Split a coefficient vector into strictly positive and nonpositive parts.

    Zeros go to the nonpositive side so every index lands in exactly one class.
    """
    a = np.asarray(a, dtype=np.float64)
    pos = np.flatnonzero(a > 0)
    neg = np.flatnonzero(~(a > 0))
    return SplitCoefficients(tuple(pos.tolist()), tuple(neg.tolist()), a[pos].copy(), -a[neg])


@dataclass(frozen=True, eq=False)
class FeatureLinear:
    """Affine form over a stack's features: ``constant + on_input.x + sum on_layer[k].relu(z_k)``."""

    constant: float
    on_input: np.ndarray
    on_layer: tuple

    def flat(self) -> np.ndarray:
        return np.concatenate([[self.constant], self.on_input, *self.on_layer])

    @classmethod
    def from_flat(cls, stack: Optional[LayerStack], v):
        v = np.asarray(v, dtype=np.float64)
        if stack is None:
            return cls(float(v[0]), v[1:].copy(), ())
        o = stack.offsets
        return cls(
            float(v[0]),
            v[o[0]:o[1]].copy(),
            tuple(v[o[k]:o[k + 1]].copy() for k in range(1, len(o) - 1)),
        )

    @classmethod
    def of_input(cls, coeffs, constant=0.0):
        """A form that reads only the raw input."""
        return cls(float(constant), np.asarray(coeffs, dtype=np.float64), ())

    def evaluate(self, stack: Optional[LayerStack], X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if stack is None:
            if self.on_layer:
                raise DimensionMismatch("form reads hidden layers but no stack was given")
            return self.constant + X @ self.on_input
        v = self.flat()
        if v.shape[0] != stack.feature_dim:
            raise DimensionMismatch(
                f"form has {v.shape[0]} coefficients, stack has {stack.feature_dim} features"
            )
        return features(stack, X) @ v


def subset_expand(a, forms: Sequence[FeatureLinear]) -> list:
    """Expand ``sum_i a_i relu(f_i)`` into the list of subset sums ``g_j``.

    ``g_j = sum_{i in S_j} a_i f_i`` where ``S_j`` is the subset encoded by
    the bits of ``j``; the max over ``g_j`` equals the rectified sum.
    """
    a = np.asarray(a, dtype=np.float64)
    if a.shape != (len(forms),):
        raise DimensionMismatch(f"{a.shape[0]} coefficients for {len(forms)} forms")
    if np.any(a < 0):
        raise NegativeCoefficient(f"coefficients must be nonnegative, got {a.tolist()}")
    if not forms:
        return [FeatureLinear(0.0, np.zeros(0), ())]
    F = np.stack([f.flat() for f in forms])
    G = subset_matrix(len(forms)) @ (a[:, None] * F)
    proto = forms[0]
    sizes = [proto.on_input.shape[0]] + [v.shape[0] for v in proto.on_layer]
    cuts = np.cumsum([1] + sizes)[:-1]
    out = []
    for g in G:
        parts = np.split(g, cuts)
        out.append(FeatureLinear(float(parts[0][0]), parts[1], tuple(parts[2:])))
    return out


@dataclass(frozen=True, eq=False)
class MirrorTerms:
    """Forms ``z``, ``z_hat`` and ``z_bar`` over ``stack``.

    ``stack`` extends the base with one layer whose pre-activations are the
    given ``z_prev`` forms, so ``relu(z_prev)`` is a feature of it.
    """

    stack: LayerStack
    z: tuple
    z_hat: tuple
    z_bar: tuple
    bias: np.ndarray

    def sides(self, X):
        """Both sides of the mirror identity, each of shape (s, rows)."""
        Phi = features(self.stack, X)
        val = lambda forms: Phi @ np.stack([f.flat() for f in forms]).T
        z, zh, zb = val(self.z), val(self.z_hat), val(self.z_bar)
        lhs = np.maximum(z, 0) + np.maximum(zh, 0)
        rhs = np.maximum(self.bias, 0)[None, :] + np.maximum(zb, 0)
        return lhs, rhs


def _lift(stack: Optional[LayerStack], z_prev: Sequence[FeatureLinear], input_dim: int) -> LayerStack:
    """Stack with one more layer whose pre-activations are ``z_prev``."""
    P = np.stack([f.flat() for f in z_prev])
    if stack is None:
        return LayerStack(NetKind.PLAIN, input_dim, [len(z_prev)], [P[:, 1:]], [P[:, 0]])
    m = stack.depth
    o = stack.offsets
    skip = dict(stack.skip)
    for j in range(0, m):
        blk = P[:, o[j]:o[j + 1]]
        if np.any(blk != 0):
            skip[(m + 1, j)] = blk
    return LayerStack(
        NetKind.FULL_SKIP,
        stack.input_dim,
        list(stack.widths) + [len(z_prev)],
        list(stack.W) + [P[:, o[m]:o[m + 1]]],
        list(stack.b) + [P[:, 0]],
        skip,
    )


def mirror_identity_terms(W, b, z_prev: Sequence[FeatureLinear], stack: Optional[LayerStack] = None) -> MirrorTerms:
    """Build ``z = W relu(z_prev) + b``, ``z_hat`` and ``z_bar = W z_prev + b``.

    ``z_prev`` are forms over ``stack`` (or over the raw input when ``stack``
    is None). ``z_hat = -W relu(z_prev) + W z_prev + b``.
    """
    W = np.atleast_2d(np.asarray(W, dtype=np.float64))
    b = np.asarray(b, dtype=np.float64).reshape(-1)
    z_prev = list(z_prev)
    if W.shape != (b.shape[0], len(z_prev)):
        raise DimensionMismatch(
            f"W has shape {W.shape}; expected ({b.shape[0]}, {len(z_prev)})"
        )
    input_dim = z_prev[0].on_input.shape[0]
    lifted = _lift(stack, z_prev, input_dim)
    P = np.stack([f.flat() for f in z_prev])
    D = lifted.feature_dim
    top = lifted.block_slice(lifted.depth)

    lin = np.zeros((W.shape[0], D))
    lin[:, :P.shape[1]] = W @ P
    lin[:, 0] += b
    z = np.zeros((W.shape[0], D))
    z[:, 0] = b
    z[:, top] = W
    z_hat = lin.copy()
    z_hat[:, top] -= W

    wrap = lambda M: tuple(FeatureLinear.from_flat(lifted, row) for row in M)
    return MirrorTerms(lifted, wrap(z), wrap(z_hat), wrap(lin), b)
