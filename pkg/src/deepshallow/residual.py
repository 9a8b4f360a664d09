"""Depth reduction for residual nets.

The step depends on the parity of the current depth ``m``. Skip blocks
only enter odd layers, so for even ``m`` the top layer's ``z0`` is just its
bias and ``l_m`` units suffice; for odd ``m`` the skip block from layer
``m-2`` is carried by ``l_m`` extra units, and the new top layer (now even)
has no skip input. Either way the result is again a residual stack.
"""

from __future__ import annotations

from typing import Optional

from .complexity import counts_residual
from .core import collapse_net, plan_step, reduce_once
from .errors import DepthTooSmall, NotResidual
from .net import LayerStack, NetKind


def _rule(stack: LayerStack):
    if stack.depth % 2 == 0:
        return False, "residual_even"
    return True, "residual_odd"


def plan_residual_reduction(stack: LayerStack):
    if stack.kind is not NetKind.RESIDUAL:
        raise NotResidual(f"expected a residual stack, got {stack.kind.value}")
    return plan_step(stack, *_rule(stack))


def reduce_depth_residual(net, head_cap: Optional[int] = None, prune_zeros: bool = False):
    if net.kind is not NetKind.RESIDUAL:
        raise NotResidual(f"expected a residual net, got {net.kind.value}")
    if net.depth < 2:
        raise DepthTooSmall(f"depth reduction needs at least 2 hidden layers, got {net.depth}")
    out, report = reduce_once(net, _rule, head_cap, prune_zeros)
    report.extra["parity"] = ["even" if net.depth % 2 == 0 else "odd"]
    return out, report


def collapse_residual(net, head_cap: Optional[int] = 20, prune_zeros: bool = False, dedup: bool = False):
    """Reduce to one hidden layer; sizes follow the parity-dependent width rule.

    The report carries both the recurrence counts and the closed forms,
    with any disagreement listed under ``flags``.
    """
    if net.kind is not NetKind.RESIDUAL:
        raise NotResidual(f"expected a residual net, got {net.kind.value}")
    counts = counts_residual(net.stack.widths)
    out, report = collapse_net(net, _rule, (counts.L, counts.N), head_cap, prune_zeros, dedup)
    report.extra["parity"] = [
        "even" if len(w) % 2 == 0 else "odd" for w in report.widths_per_step[:-1]
    ]
    report.extra["closed_form"] = {"L": counts.L_closed, "N": counts.N_closed}
    report.extra["flags"] = counts.flags
    return out, report
