"""Equivalence checks between networks.

Every check here evaluates both nets through :mod:`deepshallow.net` only,
so a transformed net is always compared against the untouched original.
"""

from __future__ import annotations

import itertools
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .complexity import counts_for, recurrence_counts
from .core import collapse_stack
from .errors import CapExceeded, DimensionMismatch, ZeroDirection
from .lemmas import FeatureLinear, mirror_identity_terms, subset_expand
from .net import NetKind, evaluate, random_net

DEFAULT_BOX = (-5.0, 5.0)


def sample_box(input_dim: int, n: int, seed: int, box=DEFAULT_BOX) -> np.ndarray:
    """Uniform samples; row i depends only on (seed, i)."""
    lo, hi = box
    return np.random.default_rng(seed).uniform(lo, hi, size=(n, input_dim))


def rel_errors(fa: np.ndarray, fb: np.ndarray, abs_floor: float = 1e-12):
    """Per-sample ``|a-b| / max(|a|, |b|)``; zero where both are below ``abs_floor``."""
    diff = np.abs(fa - fb)
    scale = np.maximum(np.abs(fa), np.abs(fb))
    rel = np.where(scale > abs_floor, diff / np.where(scale > abs_floor, scale, 1.0), 0.0)
    return rel, diff


@dataclass
class EquivReport:
    samples: int
    max_rel_err: float
    max_abs_err: float
    worst_x: list
    tol: float
    abs_floor: float

    @property
    def passed(self) -> bool:
        return self.max_rel_err <= self.tol or self.max_abs_err <= self.abs_floor

    def to_dict(self) -> dict:
        d = asdict(self)
        d["passed"] = self.passed
        return d


def check_pointwise(a, b, box=DEFAULT_BOX, n_samples: int = 10_000, seed: int = 0,
                    tol: float = 1e-9, abs_floor: float = 1e-12) -> EquivReport:
    if a.input_dim != b.input_dim:
        raise DimensionMismatch(f"input dims differ: {a.input_dim} vs {b.input_dim}")
    X = sample_box(a.input_dim, n_samples, seed, box)
    rel, diff = rel_errors(evaluate(a, X), evaluate(b, X), abs_floor)
    worst = int(np.argmax(rel)) if rel.max() > 0 else int(np.argmax(diff))
    return EquivReport(n_samples, float(rel.max()), float(diff.max()), X[worst].tolist(), tol, abs_floor)


# ------------------------------------------------------------ line probes


@dataclass
class LineProbeReport:
    anchor: list
    direction: list
    breakpoint_count_a: int
    breakpoint_count_b: int
    slope_sequences_match: bool
    value_match: bool

    @property
    def passed(self) -> bool:
        return self.slope_sequences_match and self.value_match


def _breakpoints(slopes: np.ndarray, tol: float) -> int:
    """Count slope changes, merging changes on adjacent boundaries.

    A kink strictly inside one sampling interval shows up as two changes
    (into and out of the mixed slope) and counts once.
    """
    scale = np.maximum(1.0, np.maximum(np.abs(slopes[1:]), np.abs(slopes[:-1])))
    change = np.abs(np.diff(slopes)) > tol * scale
    runs = 0
    prev = False
    for c in change:
        if c and not prev:
            runs += 1
        prev = c
    return runs


def line_probe(a, b, anchor, direction, n_steps: int = 401, tol: float = 1e-6,
               value_tol: float = 1e-9) -> LineProbeReport:
    """Compare two nets along ``anchor + t * direction`` for t in [-1, 1].

    Both restrictions are piecewise linear in t, so equal functions give
    the same finite-difference slope sequence.
    """
    anchor = np.asarray(anchor, dtype=np.float64)
    direction = np.asarray(direction, dtype=np.float64)
    if not np.any(direction != 0):
        raise ZeroDirection("direction must be nonzero")
    if anchor.shape != (a.input_dim,) or direction.shape != (a.input_dim,) or b.input_dim != a.input_dim:
        raise DimensionMismatch("anchor, direction and both nets must share the input dimension")
    t = np.linspace(-1.0, 1.0, n_steps)
    X = anchor[None, :] + t[:, None] * direction[None, :]
    fa, fb = evaluate(a, X), evaluate(b, X)
    sa, sb = np.diff(fa) / np.diff(t), np.diff(fb) / np.diff(t)
    slope_scale = np.maximum(1.0, np.maximum(np.abs(sa), np.abs(sb)))
    rel, diff = rel_errors(fa, fb)
    return LineProbeReport(
        anchor.tolist(),
        direction.tolist(),
        _breakpoints(sa, tol),
        _breakpoints(sb, tol),
        bool(np.all(np.isfinite(sa)) and np.all(np.abs(sa - sb) <= tol * slope_scale)),
        bool(np.all((rel <= value_tol) | (diff <= 1e-12))),
    )


def random_lines(input_dim: int, n: int, seed: int, box=DEFAULT_BOX):
    """Anchors inside the box, directions spanning roughly the box width."""
    rng = np.random.default_rng(seed)
    lo, hi = box
    for _ in range(n):
        anchor = rng.uniform(lo, hi, input_dim) * 0.5
        d = rng.normal(size=input_dim)
        yield anchor, d / np.linalg.norm(d) * (hi - lo) / 2


# ------------------------------------------------------------ gradients


@dataclass
class GradientReport:
    retained: int
    skipped: int
    max_diff: float
    tol: float

    @property
    def passed(self) -> bool:
        return self.retained > 0 and self.max_diff <= self.tol


def fd_gradients(net, P: np.ndarray, h: float) -> np.ndarray:
    n, d = P.shape
    E = np.eye(d) * h
    plus = (P[:, None, :] + E[None]).reshape(-1, d)
    minus = (P[:, None, :] - E[None]).reshape(-1, d)
    return ((evaluate(net, plus) - evaluate(net, minus)) / (2 * h)).reshape(n, d)


def kink_stable(net, P: np.ndarray, fd_step: float, tol: float) -> np.ndarray:
    """Points where the FD gradient does not move when the step is halved."""
    g1, g2 = fd_gradients(net, P, fd_step), fd_gradients(net, P, fd_step / 2)
    return np.max(np.abs(g1 - g2), axis=1) <= 10 * tol


def check_gradient_consistency(a, b, points, fd_step: float = 1e-5, tol: float = 1e-6) -> GradientReport:
    P = np.atleast_2d(np.asarray(points, dtype=np.float64))
    keep = kink_stable(a, P, fd_step, tol) & kink_stable(b, P, fd_step, tol)
    if not keep.any():
        return GradientReport(0, int(P.shape[0]), float("nan"), tol)
    Q = P[keep]
    diff = np.max(np.abs(fd_gradients(a, Q, fd_step) - fd_gradients(b, Q, fd_step)))
    return GradientReport(int(keep.sum()), int((~keep).sum()), float(diff), tol)


def stable_points(a, b, n: int, seed: int, box=DEFAULT_BOX, fd_step=1e-5, tol=1e-6, max_tries=10):
    """First ``n`` sampled points that are kink-stable for both nets."""
    got = []
    for k in range(max_tries):
        P = sample_box(a.input_dim, 2 * n, seed + 7919 * k, box)
        keep = kink_stable(a, P, fd_step, tol) & kink_stable(b, P, fd_step, tol)
        got.extend(P[keep])
        if len(got) >= n:
            break
    return np.array(got[:n]).reshape(-1, a.input_dim)


# ------------------------------------------------------------ property suite


@dataclass
class PropertyResult:
    name: str
    passed: bool
    detail: str
    repro: str = ""


@dataclass
class SuiteReport:
    family: str
    results: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def summary(self) -> dict:
        names = sorted({r.name for r in self.results})
        return {
            n: {
                "runs": sum(r.name == n for r in self.results),
                "failures": sum(r.name == n and not r.passed for r in self.results),
            }
            for n in names
        }

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "passed": self.passed,
            "summary": self.summary(),
            "failures": [asdict(r) for r in self.results if not r.passed],
        }


def subset_identity_error(a, forms, X) -> float:
    """Largest gap between ``sum a_i relu(f_i)`` and ``max_j g_j``.

    The gap is measured relative to ``sum a_i |f_i|``, the size of the terms
    being added, so rounding in near-cancelling sums is not reported.
    """
    F = np.stack([f.evaluate(None, X) for f in forms], axis=1)
    a = np.asarray(a, dtype=np.float64)
    direct = np.maximum(F, 0.0) @ a
    G = np.stack([g.evaluate(None, X) for g in subset_expand(a, forms)], axis=1).max(axis=1)
    scale = np.maximum(np.abs(F) @ a, np.maximum(np.abs(direct), np.abs(G)))
    diff = np.abs(direct - G)
    return float(np.max(np.where(diff == 0, 0.0, diff / np.maximum(scale, 1e-300))))


def mirror_identity_error(W, b, X) -> float:
    z_prev = [FeatureLinear.of_input(np.eye(X.shape[1])[i]) for i in range(X.shape[1])]
    lhs, rhs = mirror_identity_terms(W, b, z_prev).sides(X)
    rel, diff = rel_errors(lhs, rhs)
    return float(np.max(np.where(diff <= 1e-14, 0.0, rel)))


def _reducers():
    from .plain import collapse_plain, reduce_depth_plain
    from .residual import collapse_residual, reduce_depth_residual
    from .skip import collapse_skip, reduce_depth_skip

    return (
        {NetKind.PLAIN: reduce_depth_plain, NetKind.FULL_SKIP: reduce_depth_skip,
         NetKind.RESIDUAL: reduce_depth_residual},
        {NetKind.PLAIN: collapse_plain, NetKind.FULL_SKIP: collapse_skip,
         NetKind.RESIDUAL: collapse_residual},
    )


def step_rule(kind):
    from .complexity import appends_z0, step_rule_name

    return lambda stack: (appends_z0(kind, stack.depth), step_rule_name(kind, stack.depth))


def realized_sizes(net) -> tuple:
    """Width and head exponent produced by actually transforming the stack."""
    stack, report = collapse_stack(net.stack, step_rule(net.kind))
    return stack.widths[0], report.head_exponent


def width_grid(max_depth: int, max_width: int, min_depth: int = 1):
    for m in range(min_depth, max_depth + 1):
        yield from itertools.product(range(1, max_width + 1), repeat=m)


def run_property_suite(family, grid: Sequence[Sequence[int]], seeds: Sequence[int], tol: float = 1e-9,
                       input_dim: int = 2, n_samples: int = 2000, head_cap: int = 12,
                       n_lines: int = 3) -> SuiteReport:
    """Check every transformation property on each (widths, seed) pair.

    Properties: subset expansion identity, mirror identity, one-step
    preservation (with line probes), full-collapse preservation, and the
    count law (realized sizes vs the family formula and the recurrence).
    """
    kind = NetKind(family)
    reduce, collapse = _reducers()
    report = SuiteReport(kind.value)
    add = report.results.append
    for seed in seeds:
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, 5))
        a = rng.uniform(0, 1, n)
        forms = [FeatureLinear.of_input(rng.uniform(-1, 1, input_dim), rng.uniform(-1, 1)) for _ in range(n)]
        X = sample_box(input_dim, 1000, seed)
        err = subset_identity_error(a, forms, X)
        add(PropertyResult("subset_expansion", err <= 1e-12, f"max rel err {err:.3g}",
                           f"subset_identity_error seed={seed}"))
        r = int(rng.integers(1, 4))
        W, b = rng.uniform(-1, 1, (r, input_dim)), rng.uniform(-1, 1, r)
        err = mirror_identity_error(W, b, X)
        add(PropertyResult("mirror_identity", err <= 1e-12, f"max rel err {err:.3g}",
                           f"mirror_identity_error W shape {W.shape} seed={seed}"))
    for widths in grid:
        widths = list(widths)
        for seed in seeds:
            repro = f"random_net({kind.value!r}, {input_dim}, {widths}, seed={seed})"
            net = random_net(kind, input_dim, widths, seed)
            if len(widths) >= 2:
                red, _ = reduce[kind](net)
                eq = check_pointwise(net, red, n_samples=n_samples, seed=seed, tol=tol)
                probes = [line_probe(net, red, p, d) for p, d in random_lines(input_dim, n_lines, seed)]
                ok = eq.passed and all(p.passed for p in probes)
                add(PropertyResult("step_preservation", ok,
                                   f"max rel err {eq.max_rel_err:.3g}, line probes "
                                   f"{sum(p.passed for p in probes)}/{len(probes)}", repro))
            L, N = counts_for(kind, widths)
            rL, rN = realized_sizes(net)
            qL, qN = recurrence_counts(kind, widths)
            add(PropertyResult("count_law", (rL, rN) == (L, N) == (qL, qN),
                               f"realized ({rL},{rN}) formula ({L},{N}) recurrence ({qL},{qN})", repro))
            if N <= head_cap:
                try:
                    col, rep = collapse[kind](net, head_cap=head_cap)
                except CapExceeded as e:  # pragma: no cover - guarded by N <= head_cap
                    add(PropertyResult("collapse_preservation", False, str(e), repro))
                    continue
                eq = check_pointwise(net, col, n_samples=n_samples, seed=seed, tol=tol)
                sized = col.stack.widths == (L,) and col.n_heads == 2 ** N
                add(PropertyResult("collapse_preservation", eq.passed and sized,
                                   f"max rel err {eq.max_rel_err:.3g}, width {col.stack.widths[0]}, "
                                   f"heads {col.n_heads}", repro))
    return report
