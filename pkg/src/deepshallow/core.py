"""Family-independent depth reduction.

Write the top layer's pre-activation as ``z_m = z0 + W_m relu(z_{m-1})``
where ``z0`` collects the bias and any skip blocks from layers below
``m-1``. With the bypass ``u = z0 + W_m z_{m-1}`` and the mirror
``z_hat = u - W_m relu(z_{m-1})``::

    relu(z_m) + relu(z_hat) == relu(z0) + relu(u)

so a head's ``a_m . relu(z_m)`` becomes a nonnegative combination of
``relu(z_m)`` (positive entries) and ``relu(z_hat)`` (the rest), minus
``|a_i| (relu(z0_i) + relu(u_i))`` for the nonpositive entries. ``z_m``
and ``z_hat`` are affine in the features of layers ``< m``, so the subset
expansion turns the nonnegative part into ``2**l_m`` heads and layer ``m``
disappears. ``relu(u)`` is realized by ``l_m`` new units appended to layer
``m-1``; ``relu(z0)`` either by another ``l_m`` units or, when ``z0`` is
just the bias, by a constant.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import CapExceeded, DepthTooSmall, NetError
from .lemmas import subset_matrix
from .net import LayerStack, MaxRectifierNet, Net, _as_batch, preactivations


@dataclass(frozen=True, eq=False)
class AppendedBlock:
    """Pre-activation of a group of units: ``bias + sum_j blocks[j] @ phi_j``.

    ``phi_0`` is the raw input and ``phi_j`` the activations of layer ``j``.
    """

    bias: np.ndarray
    blocks: dict

    def preactivation(self, stack: LayerStack, X) -> np.ndarray:
        X = _as_batch(stack, X)
        zs = preactivations(stack, X)
        acts = [X] + [np.maximum(z, 0.0) for z in zs]
        out = np.broadcast_to(self.bias, (X.shape[0], self.bias.shape[0])).copy()
        for j, M in self.blocks.items():
            out += acts[j] @ M.T
        return out


@dataclass(frozen=True, eq=False)
class ReductionStep:
    """Everything needed to remove the top layer of ``source``.

    ``z_forms`` and ``mirror_forms`` hold, per removed unit, the flat
    coefficients of ``z_m`` and ``z_hat`` over the reduced stack's features.
    """

    source: LayerStack
    stack: LayerStack
    rule: str
    z0_units: bool
    z0_block: AppendedBlock
    bypass_block: AppendedBlock
    z_forms: np.ndarray
    mirror_forms: np.ndarray

    @property
    def removed_width(self) -> int:
        return self.source.widths[-1]

    @property
    def bypass_offset(self) -> int:
        s = self.stack
        return s.offsets[s.depth] + self.source.widths[-2] + (self.removed_width if self.z0_units else 0)

    @property
    def z0_offset(self) -> Optional[int]:
        if not self.z0_units:
            return None
        return self.stack.offsets[self.stack.depth] + self.source.widths[-2]


def _add(acc: dict, j: int, M):
    acc[j] = acc[j] + M if j in acc else np.array(M, dtype=np.float64)


def plan_step(stack: LayerStack, z0_units: bool, rule: str) -> ReductionStep:
    m = stack.depth
    if m < 2:
        raise DepthTooSmall(f"depth reduction needs at least 2 hidden layers, got {m}")
    lm, lp = stack.widths[-1], stack.widths[-2]
    Wm = stack.W[m - 1]
    into_top = {j: M for j, M in stack.incoming(m).items() if j < m - 1}
    into_prev = stack.incoming(m - 1)
    if into_top and not z0_units:
        raise NetError(f"rule {rule!r} needs a bias-only z0 but layer {m} has skip inputs {sorted(into_top)}")

    z0 = AppendedBlock(stack.b[m - 1].copy(), {j: M.copy() for j, M in into_top.items()})
    byp_blocks = {j: M.copy() for j, M in into_top.items()}
    for j, M in into_prev.items():
        _add(byp_blocks, j, Wm @ M)
    bypass = AppendedBlock(stack.b[m - 1] + Wm @ stack.b[m - 2], dict(sorted(byp_blocks.items())))

    # rows of the new layer m-1: [old units; z0 units?; bypass units]
    groups = [(lp, into_prev)] + ([(lm, into_top)] if z0_units else []) + [(lm, bypass.blocks)]
    sources = sorted(set().union(*(g[1].keys() for g in groups)))
    new_blocks = {}
    for j in sources:
        cols = stack.layer_width(j)
        new_blocks[j] = np.vstack([blocks.get(j, np.zeros((rows, cols))) for rows, blocks in groups])
    new_bias = np.concatenate(
        [stack.b[m - 2]] + ([z0.bias] if z0_units else []) + [bypass.bias]
    )
    width = lp + lm * (2 if z0_units else 1)

    skip = {k: M for k, M in stack.skip.items() if k[0] < m - 1}
    for j, M in new_blocks.items():
        if j != m - 2:
            skip[(m - 1, j)] = M
    new_stack = LayerStack(
        stack.kind,
        stack.input_dim,
        list(stack.widths[:-2]) + [width],
        list(stack.W[:-2]) + [new_blocks[m - 2]],
        list(stack.b[:-2]) + [new_bias],
        skip,
    )

    # z_m and z_hat over the reduced features
    D = new_stack.feature_dim
    old = slice(new_stack.offsets[m - 1], new_stack.offsets[m - 1] + lp)
    Z = np.zeros((lm, D))
    Z[:, 0] = z0.bias
    Z[:, old] = Wm
    Zh = np.zeros((lm, D))
    Zh[:, 0] = bypass.bias
    Zh[:, old] = -Wm
    for j, M in z0.blocks.items():
        Z[:, new_stack.block_slice(j)] += M
    for j, M in bypass.blocks.items():
        Zh[:, new_stack.block_slice(j)] += M
    return ReductionStep(stack, new_stack, rule, z0_units, z0, bypass, Z, Zh)


def reduce_heads(
    step: ReductionStep, coef: np.ndarray, prune_zeros: bool = False, allow_large: bool = False
) -> np.ndarray:
    """Heads of the reduced net; head order is (input head, subset row)."""
    src, dst = step.source, step.stack
    m = src.depth
    lm = step.removed_width
    keep = src.offsets[m]  # c, a0, a_1..a_{m-1} keep their positions
    n = coef.shape[0]
    a = coef[:, src.block_slice(m)]
    mag = np.abs(a)
    neg = ~(a > 0)
    neg_mag = np.where(neg, mag, 0.0)

    base = np.zeros((n, dst.feature_dim))
    base[:, :keep] = coef[:, :keep]
    bo = step.bypass_offset
    base[:, bo:bo + lm] -= neg_mag
    if step.z0_units:
        zo = step.z0_offset
        base[:, zo:zo + lm] -= neg_mag
    else:
        base[:, 0] -= neg_mag @ np.maximum(step.z0_block.bias, 0.0)

    # per-head forms: z rows for positive entries, mirror rows otherwise
    F = np.where(neg[:, :, None], step.mirror_forms[None], step.z_forms[None]) * mag[:, :, None]
    if not prune_zeros:
        M = subset_matrix(lm, allow_large)
        out = base[:, None, :] + np.einsum("sl,nld->nsd", M, F)
        return out.reshape(n * (1 << lm), dst.feature_dim)
    parts = []
    for h in range(n):
        live = np.flatnonzero(mag[h] != 0)
        M = subset_matrix(len(live), allow_large)
        parts.append(base[h][None, :] + M @ F[h, live])
    return np.vstack(parts)


def dedup_heads(coef: np.ndarray) -> np.ndarray:
    """Drop exact duplicate rows, keeping first occurrences in order."""
    _, first = np.unique(coef, axis=0, return_index=True)
    return coef[np.sort(first)]


@dataclass
class ReductionReport:
    """What a sequence of reduction steps did.

    ``widths_per_step[0]`` is the input; each later entry follows one step.
    """

    kind: str
    widths_per_step: list = field(default_factory=list)
    rules: list = field(default_factory=list)
    removed_widths: list = field(default_factory=list)
    head_count: int = 1
    predicted: Optional[dict] = None
    extra: dict = field(default_factory=dict)

    @property
    def steps(self) -> int:
        return len(self.rules)

    @property
    def head_exponent(self) -> int:
        return int(sum(self.removed_widths))

    @property
    def final_width(self) -> int:
        return int(sum(self.widths_per_step[-1]))

    def to_dict(self) -> dict:
        d = {
            "kind": self.kind,
            "steps": self.steps,
            "widths_per_step": [list(w) for w in self.widths_per_step],
            "rules": list(self.rules),
            "head_exponent": self.head_exponent,
            "final_width": self.final_width,
            "head_count": self.head_count,
        }
        if self.predicted is not None:
            d["predicted"] = dict(self.predicted)
        d.update(self.extra)
        return d


StepRule = Callable[[LayerStack], tuple]


def _check_cap(exponent: float, head_cap: Optional[int]):
    if head_cap is not None and exponent > head_cap:
        raise CapExceeded(int(exponent) if float(exponent).is_integer() else float(exponent), head_cap)


def reduce_once(net: Net, rule: StepRule, head_cap: Optional[int] = None, prune_zeros: bool = False):
    z0_units, name = rule(net.stack)
    if net.stack.depth >= 2:
        n = net.n_heads
        _check_cap(np.log2(n) + net.stack.widths[-1], head_cap)
    step = plan_step(net.stack, z0_units, name)
    coef = reduce_heads(step, net.coef, prune_zeros, head_cap is None)
    report = ReductionReport(
        net.kind.value,
        [list(net.stack.widths), list(step.stack.widths)],
        [name],
        [step.removed_width],
        coef.shape[0],
    )
    return MaxRectifierNet(step.stack, coef), report


def collapse_stack(stack: LayerStack, rule: StepRule):
    """Reduce a stack (without heads) to one hidden layer.

    Returns the final stack and a report whose ``head_exponent`` is the
    number of doublings a single head would undergo.
    """
    report = ReductionReport(stack.kind.value, [list(stack.widths)])
    while stack.depth > 1:
        z0_units, name = rule(stack)
        step = plan_step(stack, z0_units, name)
        report.rules.append(name)
        report.removed_widths.append(step.removed_width)
        stack = step.stack
        report.widths_per_step.append(list(stack.widths))
    report.head_count = 1 << report.head_exponent
    return stack, report


def collapse_net(
    net: Net,
    rule: StepRule,
    predicted: tuple,
    head_cap: Optional[int] = 20,
    prune_zeros: bool = False,
    dedup: bool = False,
):
    """Apply reduction steps until one hidden layer remains.

    ``predicted`` is the family's ``(L, N)`` for a single head; the cap is
    checked against ``N + log2(n_heads)`` before any work is done.
    """
    L, N = predicted
    _check_cap(N + np.log2(net.n_heads), head_cap)
    report = ReductionReport(net.kind.value, [list(net.stack.widths)], predicted={"L": L, "N": N})
    stack, coef = net.stack, net.coef
    while stack.depth > 1:
        z0_units, name = rule(stack)
        step = plan_step(stack, z0_units, name)
        coef = reduce_heads(step, coef, prune_zeros, head_cap is None)
        report.rules.append(name)
        report.removed_widths.append(step.removed_width)
        stack = step.stack
        report.widths_per_step.append(list(stack.widths))
    if dedup:
        coef = dedup_heads(coef)
    report.head_count = int(coef.shape[0])
    return MaxRectifierNet(stack, coef), report

