"""MLP1 instance text format.

    mlp k=<k>
    dims n=<n1,...,nk> m=<m1,...,mk>
    A <l> <i> : <m_l x n_i row-major rationals>
    b <l> : <rationals>
    c <l> <i> : <rationals>
    x <l> : <rationals>            (optional witness/point blocks)

Rationals are serialized as p/q with q omitted when 1.  Blank lines and
'#' comments are ignored.  Duplicate blocks and non-canonical rationals are
rejected.
"""

from __future__ import annotations

from .core import MlpInstance, Point
from .rat import ZERO, format_rat, parse_rat


class Mlp1Error(ValueError):
    def __init__(self, message, lineno=None):
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)
        self.lineno = lineno


def dump_instance(inst: MlpInstance) -> str:
    lines = [f"mlp k={inst.k}"]
    lines.append(
        "dims n=%s m=%s"
        % (",".join(str(v) for v in inst.n), ",".join(str(v) for v in inst.m))
    )
    for (l, i) in sorted(inst.A):
        mat = inst.A[(l, i)]
        if not any(v != 0 for row in mat for v in row):
            continue
        body = " ".join(format_rat(v) for row in mat for v in row)
        lines.append(f"A {l} {i} : {body}")
    for l in sorted(inst.b):
        vec = inst.b[l]
        if vec:
            lines.append(f"b {l} : " + " ".join(format_rat(v) for v in vec))
    for (l, i) in sorted(inst.c):
        vec = inst.c[(l, i)]
        if not any(v != 0 for v in vec):
            continue
        lines.append(f"c {l} {i} : " + " ".join(format_rat(v) for v in vec))
    return "\n".join(lines) + "\n"


def dump_point(p: Point) -> str:
    lines = []
    for l, vec in enumerate(p.x, start=1):
        lines.append(f"x {l} : " + " ".join(format_rat(v) for v in vec))
    return "\n".join(lines) + "\n"


def _parse_rationals(body: str, expected: int, lineno: int):
    toks = body.split()
    if len(toks) != expected:
        raise Mlp1Error(f"expected {expected} rationals, got {len(toks)}", lineno)
    try:
        return [parse_rat(t) for t in toks]
    except ValueError as exc:
        raise Mlp1Error(str(exc), lineno) from None


def load_instance(text: str) -> MlpInstance:
    inst, _ = load_instance_and_points(text)
    return inst


def load_instance_and_points(text: str):
    """Parse an MLP1 document; returns (instance, point or None)."""
    lines = text.splitlines()
    k = None
    n = m = None
    A, b, c = {}, {}, {}
    xblocks = {}
    seen = set()
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("mlp"):
            if k is not None:
                raise Mlp1Error("duplicate header", lineno)
            parts = line.split()
            if len(parts) != 2 or not parts[1].startswith("k="):
                raise Mlp1Error("malformed header, want 'mlp k=<k>'", lineno)
            k = int(parts[1][2:])
            if k < 1:
                raise Mlp1Error("k must be >= 1", lineno)
            continue
        if k is None:
            raise Mlp1Error("first line must be the 'mlp' header", lineno)
        if line.startswith("dims"):
            if n is not None:
                raise Mlp1Error("duplicate dims", lineno)
            parts = line.split()
            if len(parts) != 3 or not parts[1].startswith("n=") or not parts[2].startswith("m="):
                raise Mlp1Error("malformed dims line", lineno)
            n = tuple(int(v) for v in parts[1][2:].split(","))
            m = tuple(int(v) for v in parts[2][2:].split(","))
            if len(n) != k or len(m) != k:
                raise Mlp1Error("dims length does not match k", lineno)
            continue
        if n is None:
            raise Mlp1Error("dims line must precede blocks", lineno)
        if ":" not in line:
            raise Mlp1Error("malformed block line", lineno)
        head, body = line.split(":", 1)
        parts = head.split()
        kind = parts[0]
        try:
            if kind == "A" and len(parts) == 3:
                l, i = int(parts[1]), int(parts[2])
                if not (1 <= l <= k and 1 <= i <= k):
                    raise Mlp1Error("A block indices out of range", lineno)
                key = ("A", l, i)
                if key in seen:
                    raise Mlp1Error(f"duplicate block A {l} {i}", lineno)
                seen.add(key)
                vals = _parse_rationals(body, m[l - 1] * n[i - 1], lineno)
                A[(l, i)] = tuple(
                    tuple(vals[r * n[i - 1] : (r + 1) * n[i - 1]]) for r in range(m[l - 1])
                )
            elif kind == "b" and len(parts) == 2:
                l = int(parts[1])
                if not 1 <= l <= k:
                    raise Mlp1Error("b block index out of range", lineno)
                key = ("b", l)
                if key in seen:
                    raise Mlp1Error(f"duplicate block b {l}", lineno)
                seen.add(key)
                b[l] = tuple(_parse_rationals(body, m[l - 1], lineno))
            elif kind == "c" and len(parts) == 3:
                l, i = int(parts[1]), int(parts[2])
                if not (1 <= l <= k and l <= i <= k):
                    raise Mlp1Error("c block indices out of range (need i >= l)", lineno)
                key = ("c", l, i)
                if key in seen:
                    raise Mlp1Error(f"duplicate block c {l} {i}", lineno)
                seen.add(key)
                c[(l, i)] = tuple(_parse_rationals(body, n[i - 1], lineno))
            elif kind == "x" and len(parts) == 2:
                l = int(parts[1])
                key = ("x", l)
                if key in seen:
                    raise Mlp1Error(f"duplicate block x {l}", lineno)
                seen.add(key)
                xblocks[l] = tuple(_parse_rationals(body, n[l - 1], lineno))
            else:
                raise Mlp1Error(f"unknown block kind {kind!r}", lineno)
        except ValueError as exc:
            if isinstance(exc, Mlp1Error):
                raise
            raise Mlp1Error(str(exc), lineno) from None
    if k is None or n is None:
        raise Mlp1Error("missing header or dims")
    inst = MlpInstance(k=k, n=n, m=m, A=A, b=b, c=c)
    point = None
    if xblocks:
        if sorted(xblocks) != list(range(1, k + 1)):
            raise Mlp1Error("point blocks must cover levels 1..k")
        point = Point(tuple(xblocks[l] for l in range(1, k + 1)))
    return inst, point
