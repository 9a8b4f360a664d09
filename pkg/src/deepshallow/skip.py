"""Depth reduction for fully skip-connected nets.

Each step appends two blocks of ``l_m`` units to layer ``m-1``: one
computing ``z0`` (layer ``m``'s pre-activation without its adjacent term)
and one computing the bypass ``z0 + W_{m,m-1} z_{m-1}``.
"""

from __future__ import annotations

from typing import Optional

import numpy as np

from .complexity import counts_skip
from .core import ReductionStep, collapse_net, plan_step, reduce_once
from .errors import DepthTooSmall, NotFullSkip
from .net import LayerStack, NetKind, preactivations

SkipReductionPlan = ReductionStep


def _rule(stack: LayerStack):
    return True, "full_skip"


def plan_skip_reduction(stack: LayerStack) -> SkipReductionPlan:
    if stack.kind is not NetKind.FULL_SKIP:
        raise NotFullSkip(f"expected a full_skip stack, got {stack.kind.value}")
    return plan_step(stack, True, "full_skip")


def reduce_depth_skip(net, head_cap: Optional[int] = None, prune_zeros: bool = False):
    if net.kind is not NetKind.FULL_SKIP:
        raise NotFullSkip(f"expected a full_skip net, got {net.kind.value}")
    if net.depth < 2:
        raise DepthTooSmall(f"depth reduction needs at least 2 hidden layers, got {net.depth}")
    return reduce_once(net, _rule, head_cap, prune_zeros)


def collapse_skip(net, head_cap: Optional[int] = 20, prune_zeros: bool = False, dedup: bool = False):
    """Reduce to one hidden layer of width ``sum(2**(i-1) l_i)``."""
    if net.kind is not NetKind.FULL_SKIP:
        raise NotFullSkip(f"expected a full_skip net, got {net.kind.value}")
    return collapse_net(net, _rule, counts_skip(net.stack.widths), head_cap, prune_zeros, dedup)


def mirror_sides(stack: LayerStack, X):
    """Both sides of ``relu(z_m) + relu(z_hat) == relu(z0) + relu(bypass)``.

    Evaluated from the original stack's own trace, shape (s, l_m) each.
    """
    m = stack.depth
    plan = plan_step(stack, True, stack.kind.value)
    zs = preactivations(stack, X)
    Wm = stack.W[m - 1]
    z0 = plan.z0_block.preactivation(stack, X)
    bypass = z0 + zs[m - 2] @ Wm.T
    z_hat = z0 - np.maximum(-zs[m - 2], 0.0) @ Wm.T
    lhs = np.maximum(zs[m - 1], 0.0) + np.maximum(z_hat, 0.0)
    rhs = np.maximum(z0, 0.0) + np.maximum(bypass, 0.0)
    return lhs, rhs
