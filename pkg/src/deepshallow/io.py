"""JSON net files.

One document per net::

    {"kind": "plain" | "full_skip" | "residual", "input_dim": int,
     "widths": [int, ...], "W": [matrix, ...], "b": [vector, ...],
     "skip": [{"to": i, "from": j, "M": matrix}, ...],
     "heads": [{"c": num, "a0": vector, "a": [vector, ...]}, ...]}

Matrices are row-major nested arrays. Floats are written in Python's
shortest round-trip form, so read -> write reproduces a file byte for byte.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from pathlib import Path

import numpy as np

from .errors import NetFormatError
from .net import LayerStack, MaxRectifierNet, NetKind, OutputHead, RectifierNet, validate

TOP_FIELDS = ("kind", "input_dim", "widths", "W", "b", "skip", "heads")
REQUIRED = {"kind", "input_dim", "widths", "W", "b", "heads"}


def _floats(a):
    return np.asarray(a, dtype=np.float64).tolist()


def net_to_dict(net) -> dict:
    s = net.stack
    if isinstance(net, RectifierNet):
        heads = [net.head]
    else:
        heads = net.heads
    return {
        "kind": s.kind.value,
        "input_dim": s.input_dim,
        "widths": list(s.widths),
        "W": [_floats(M) for M in s.W],
        "b": [_floats(v) for v in s.b],
        "skip": [{"to": i, "from": j, "M": _floats(M)} for (i, j), M in s.skip.items()],
        "heads": [{"c": h.c, "a0": _floats(h.a0), "a": [_floats(v) for v in h.a]} for h in heads],
    }


def dumps_net(net) -> str:
    return json.dumps(net_to_dict(net), separators=(",", ":"), allow_nan=False) + "\n"


def _fail(msg, where):
    raise NetFormatError(msg, where)


def _int(v, where):
    if isinstance(v, bool) or not isinstance(v, int):
        _fail(f"expected an integer, got {v!r}", where)
    return v


def _number(v, where):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        _fail(f"expected a number, got {v!r}", where)
    if not math.isfinite(v):
        _fail(f"non-finite number {v!r}", where)
    return float(v)


def _vector(v, where):
    if not isinstance(v, list):
        _fail("expected an array of numbers", where)
    return [_number(x, f"{where}[{i}]") for i, x in enumerate(v)]


def _matrix(v, where):
    if not isinstance(v, list):
        _fail("expected an array of rows", where)
    rows = [_vector(r, f"{where}[{i}]") for i, r in enumerate(v)]
    if len({len(r) for r in rows}) > 1:
        _fail("rows have different lengths", where)
    if not rows:
        return np.zeros((0, 0))
    return np.array(rows)


def _fields(obj, allowed, required, where):
    if not isinstance(obj, dict):
        _fail("expected an object", where)
    unknown = sorted(set(obj) - set(allowed))
    if unknown:
        _fail(f"unknown field(s) {unknown}", where)
    missing = sorted(set(required) - set(obj))
    if missing:
        _fail(f"missing field(s) {missing}", where)


def net_from_dict(doc: dict):
    """Build a net from a parsed document; one head gives a RectifierNet."""
    _fields(doc, TOP_FIELDS, REQUIRED, "$")
    try:
        kind = NetKind(doc["kind"])
    except ValueError:
        _fail(f"unknown kind {doc['kind']!r}", "kind")
    input_dim = _int(doc["input_dim"], "input_dim")
    if not isinstance(doc["widths"], list):
        _fail("expected an array of integers", "widths")
    widths = [_int(w, f"widths[{i}]") for i, w in enumerate(doc["widths"])]
    if not isinstance(doc["W"], list) or not isinstance(doc["b"], list):
        _fail("expected arrays", "W/b")
    W = [_matrix(M, f"W[{i}]") for i, M in enumerate(doc["W"])]
    b = [np.array(_vector(v, f"b[{i}]")) for i, v in enumerate(doc["b"])]
    skip = {}
    entries = doc.get("skip", [])
    if not isinstance(entries, list):
        _fail("expected an array", "skip")
    for n, e in enumerate(entries):
        where = f"skip[{n}]"
        _fields(e, ("to", "from", "M"), ("to", "from", "M"), where)
        key = (_int(e["to"], f"{where}.to"), _int(e["from"], f"{where}.from"))
        if key in skip:
            _fail(f"duplicate skip block {key}", where)
        skip[key] = _matrix(e["M"], f"{where}.M")
    if not isinstance(doc["heads"], list) or not doc["heads"]:
        _fail("expected a nonempty array of heads", "heads")
    heads = []
    for n, h in enumerate(doc["heads"]):
        where = f"heads[{n}]"
        _fields(h, ("c", "a0", "a"), ("c", "a0", "a"), where)
        if not isinstance(h["a"], list):
            _fail("expected an array of vectors", f"{where}.a")
        heads.append(OutputHead(
            _number(h["c"], f"{where}.c"),
            _vector(h["a0"], f"{where}.a0"),
            [_vector(v, f"{where}.a[{k}]") for k, v in enumerate(h["a"], start=1)],
        ))
    stack = LayerStack(kind, input_dim, widths, W, b, skip)
    bad = validate(stack)
    if bad:
        _fail("; ".join(bad), "$")
    if len(heads) == 1:
        net = RectifierNet(stack, heads[0])
        bad = validate(net)
        if bad:
            _fail("; ".join(bad), "heads[0]")
        return net
    return MaxRectifierNet.from_heads(stack, heads)


def loads_net(text: str):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise NetFormatError(e.msg, f"line {e.lineno} column {e.colno}") from None
    try:
        return net_from_dict(doc)
    except NetFormatError:
        raise
    except Exception as e:  # InvalidNet from from_heads, shape errors
        raise NetFormatError(str(e), "$") from None


def read_net(path):
    return loads_net(Path(path).read_text())


def write_text_atomic(path, text: str):
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_net(path, net):
    write_text_atomic(path, dumps_net(net))
