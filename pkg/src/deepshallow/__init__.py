"""Exact depth reduction for rectifier networks.

Deep ReLU nets in three families (plain, fully skip-connected, residual)
are rewritten layer by layer into max-rectifier nets, down to a single
hidden layer, with size accounting and numerical equivalence checks.
"""

from .complexity import (
    ComparisonRow,
    ResidualCounts,
    comparison_table,
    counts_for,
    counts_plain,
    counts_residual,
    counts_skip,
    recurrence_counts,
)
from .core import ReductionReport
from .errors import (
    CapExceeded,
    DepthTooSmall,
    DimensionMismatch,
    EmptyHeads,
    InvalidNet,
    InvalidWidths,
    NegativeCoefficient,
    NetError,
    NetFormatError,
    NotFullSkip,
    NotPlain,
    NotResidual,
    ZeroDirection,
)
from .io import dumps_net, loads_net, read_net, write_net
from .lemmas import FeatureLinear, mirror_identity_terms, sign_split, subset_expand, subset_matrix
from .net import (
    LayerStack,
    MaxRectifierNet,
    NetKind,
    OutputHead,
    RectifierNet,
    eval_max_rectifier,
    eval_rectifier,
    evaluate,
    random_net,
    validate,
)
from .plain import collapse_plain, reduce_depth_plain
from .residual import collapse_residual, reduce_depth_residual
from .skip import collapse_skip, reduce_depth_skip
from .verify import check_gradient_consistency, check_pointwise, line_probe, run_property_suite

REDUCERS = {
    NetKind.PLAIN: reduce_depth_plain,
    NetKind.FULL_SKIP: reduce_depth_skip,
    NetKind.RESIDUAL: reduce_depth_residual,
}
COLLAPSERS = {
    NetKind.PLAIN: collapse_plain,
    NetKind.FULL_SKIP: collapse_skip,
    NetKind.RESIDUAL: collapse_residual,
}


def reduce_depth(net, **kwargs):
    """Remove one hidden layer using the rule of ``net``'s family."""
    return REDUCERS[net.kind](net, **kwargs)


def collapse(net, **kwargs):
    """Reduce ``net`` to a single hidden layer using its family's rule."""
    return COLLAPSERS[net.kind](net, **kwargs)


__all__ = [name for name in dir() if not name.startswith("_")]
