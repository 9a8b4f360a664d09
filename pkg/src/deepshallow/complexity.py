"""Size accounting for collapsed networks.

Collapsing a depth-``m`` net to one hidden layer yields width ``L`` and
``2**N`` heads. For every family the normative values come from iterating
the one-step width rule; the closed forms are reported beside them.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

from .errors import InvalidWidths
from .net import NetKind


def _check(widths) -> list:
    widths = [int(w) for w in widths]
    if not widths or any(w < 1 for w in widths):
        raise InvalidWidths(f"widths must be a nonempty list of positive integers, got {widths}")
    return widths


def counts_plain(widths) -> tuple:
    w = _check(widths)
    return sum(w), sum((i - 1) * l for i, l in enumerate(w, start=1))


def counts_skip(widths) -> tuple:
    w = _check(widths)
    return (
        sum(2 ** (i - 1) * l for i, l in enumerate(w, start=1)),
        sum((2 ** (i - 1) - 1) * l for i, l in enumerate(w, start=1)),
    )


def step_rule_name(kind, depth: int) -> str:
    kind = NetKind(kind)
    if kind is NetKind.RESIDUAL:
        return "residual_even" if depth % 2 == 0 else "residual_odd"
    return kind.value


def appends_z0(kind, depth: int) -> bool:
    """Whether a reduction step at this depth adds a second block of units."""
    kind = NetKind(kind)
    if kind is NetKind.FULL_SKIP:
        return True
    if kind is NetKind.RESIDUAL:
        return depth % 2 == 1
    return False


def width_recurrence(kind, widths) -> list:
    """Iterate the one-step width rule down to a single layer.

    Returns ``[(widths, removed_width, rule), ...]`` with one entry per step;
    the last element's widths are not included (see :func:`recurrence_counts`).
    """
    w = _check(widths)
    out = []
    while len(w) > 1:
        lm = w[-1]
        mult = 2 if appends_z0(kind, len(w)) else 1
        out.append((list(w), lm, step_rule_name(kind, len(w))))
        w = w[:-2] + [w[-2] + mult * lm]
    return out


def recurrence_counts(kind, widths) -> tuple:
    w = _check(widths)
    steps = width_recurrence(kind, w)
    if not steps:
        return w[0], 0
    last, lm, _ = steps[-1]
    L = sum(last[:-2]) + last[-2] + (2 if appends_z0(kind, len(last)) else 1) * lm
    return L, sum(s[1] for s in steps)


def mu(k: int) -> int:
    return 3 * (2 ** (k - 1) - 1)


def residual_closed_form(widths) -> tuple:
    """Closed-form ``(L, N)`` for a residual net.

    These are reported next to the recurrence and never used in its place;
    at odd depth the width term disagrees with the recurrence.
    """
    w = _check(widths)
    m = len(w)
    l = lambda i: w[i - 1]
    if m % 2 == 0:
        L = sum(2 ** (k - 1) * (l(2 * k - 1) + l(2 * k)) for k in range(1, m // 2 + 1))
        N = sum(mu(k) * l(2 * k - 1) for k in range(2, m // 2 + 1)) + sum(
            (mu(k) + 1) * l(2 * k) for k in range(1, m // 2 + 1)
        )
    else:
        L = 2 ** ((m + 1) // 2) * l(m) + sum(
            2 ** (k - 1) * (l(2 * k - 1) + l(2 * k)) for k in range(1, (m - 1) // 2 + 1)
        )
        N = sum(mu(k) * l(2 * k - 1) for k in range(2, (m + 1) // 2 + 1)) + sum(
            (mu(k) + 1) * l(2 * k) for k in range(1, (m - 1) // 2 + 1)
        )
    return L, N


@dataclass(frozen=True)
class ResidualCounts:
    L: int
    N: int
    L_closed: int
    N_closed: int
    parity: str
    mu_values: tuple

    @property
    def flags(self) -> list:
        out = []
        if self.L != self.L_closed:
            out.append(f"L mismatch: recurrence {self.L} vs closed form {self.L_closed}")
        if self.N != self.N_closed:
            out.append(f"N mismatch: recurrence {self.N} vs closed form {self.N_closed}")
        return out

    def to_dict(self) -> dict:
        d = asdict(self)
        d["mu_values"] = list(self.mu_values)
        d["flags"] = self.flags
        return d


def counts_residual(widths) -> ResidualCounts:
    w = _check(widths)
    L, N = recurrence_counts(NetKind.RESIDUAL, w)
    Lc, Nc = residual_closed_form(w)
    m = len(w)
    return ResidualCounts(
        L, N, Lc, Nc, "even" if m % 2 == 0 else "odd",
        tuple(mu(k) for k in range(1, (m + 1) // 2 + 2)),
    )


def counts_for(kind, widths) -> tuple:
    kind = NetKind(kind)
    if kind is NetKind.PLAIN:
        return counts_plain(widths)
    if kind is NetKind.FULL_SKIP:
        return counts_skip(widths)
    c = counts_residual(widths)
    return c.L, c.N


# ------------------------------------------------------------ comparison


def _num(x):
    if isinstance(x, Fraction):
        return int(x) if x.denominator == 1 else float(x)
    if isinstance(x, float) and x.is_integer():
        return int(x)
    return x


@dataclass
class ComparisonRow:
    m: int
    T: int
    L_p: object
    N_p: object
    L_res_paper: float
    N_res_paper: float
    L_res_rec: Optional[int] = None
    N_res_rec: Optional[int] = None
    L_res_same_width: Optional[int] = None
    N_res_same_width: Optional[int] = None
    analytic_only: bool = False
    flags: list = field(default_factory=list)


CSV_COLUMNS = (
    "m", "T", "L_p", "N_p", "L_res_paper", "N_res_paper",
    "L_res_rec", "N_res_rec", "flags", "L_res_same_width", "N_res_same_width",
)


def comparison_row(T: int, m: int) -> ComparisonRow:
    """Plain vs residual sizes for depth ``m`` at ``T`` total hidden units.

    Plain nets use width ``T/m``; residual nets use width ``2T/(3m)``
    and, side by side, the same width ``T/m``. The ``*_paper`` columns are
    the reference closed forms; ``*_rec`` come from the width recurrence.
    """
    T, m = int(T), int(m)
    L_p = Fraction(T)
    N_p = Fraction((m - 1) * T, 2)
    growth = 2.0 ** (0.5 * m + 1)
    row = ComparisonRow(
        m, T, _num(L_p), _num(N_p),
        _num(T * (growth - m * (m + 2) / 4)),
        _num(2 * T / (3 * m) * (growth - 2)),
    )
    plain_w = Fraction(T, m)
    if plain_w.denominator == 1 and plain_w > 0:
        if counts_plain([int(plain_w)] * m) != (L_p, N_p):
            row.flags.append("plain recurrence disagrees with L_p/N_p")
        same = counts_residual([int(plain_w)] * m)
        row.L_res_same_width, row.N_res_same_width = same.L, same.N
    else:
        row.flags.append("plain width T/m not integral")
    res_w = Fraction(2 * T, 3 * m)
    if res_w.denominator == 1 and res_w > 0:
        rec = counts_residual([int(res_w)] * m)
        row.L_res_rec, row.N_res_rec = rec.L, rec.N
        if rec.L != row.L_res_paper:
            row.flags.append(f"L_res mismatch: paper {row.L_res_paper} vs recurrence {rec.L}")
        if rec.N != row.N_res_paper:
            row.flags.append(f"N_res mismatch: paper {row.N_res_paper} vs recurrence {rec.N}")
    else:
        row.analytic_only = True
    return row


def comparison_table(T: int, depths: Sequence[int]) -> list:
    return [comparison_row(T, m) for m in depths]


def table_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in rows:
        d = asdict(r)
        d["flags"] = "; ".join(r.flags + (["analytic_only"] if r.analytic_only else []))
        writer.writerow(["" if d[c] is None else d[c] for c in CSV_COLUMNS])
    return buf.getvalue()


def table_json(rows) -> str:
    return json.dumps([asdict(r) for r in rows], indent=2) + "\n"
