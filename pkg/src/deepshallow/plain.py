"""Depth reduction and full collapse for plain (adjacent-only) nets."""

from __future__ import annotations

from typing import Optional

from .complexity import counts_plain
from .core import collapse_net, plan_step, reduce_once
from .errors import DepthTooSmall, NotPlain
from .net import LayerStack, NetKind


def _rule(stack: LayerStack):
    return False, "plain"


def _require(net):
    if net.kind is not NetKind.PLAIN:
        raise NotPlain(f"expected a plain net, got {net.kind.value}")
    if net.depth < 2:
        raise DepthTooSmall(f"depth reduction needs at least 2 hidden layers, got {net.depth}")


def plan_plain_reduction(stack: LayerStack):
    if stack.kind is not NetKind.PLAIN:
        raise NotPlain(f"expected a plain stack, got {stack.kind.value}")
    return plan_step(stack, False, "plain")


def reduce_depth_plain(net, head_cap: Optional[int] = None, prune_zeros: bool = False):
    """Remove the top hidden layer, widening the one below by ``l_m`` units.

    Returns ``(MaxRectifierNet, ReductionReport)``; every input head becomes
    ``2**l_m`` output heads.
    """
    _require(net)
    return reduce_once(net, _rule, head_cap, prune_zeros)


def collapse_plain(net, head_cap: Optional[int] = 20, prune_zeros: bool = False, dedup: bool = False):
    """Reduce to one hidden layer of width ``sum(l)`` with ``2**sum((i-1) l_i)`` heads.

    ``head_cap=None`` lifts the cap.
    """
    if net.kind is not NetKind.PLAIN:
        raise NotPlain(f"expected a plain net, got {net.kind.value}")
    return collapse_net(net, _rule, counts_plain(net.stack.widths), head_cap, prune_zeros, dedup)
