"""Boolean formula ASTs, prenex QBFs, file ingestion, and brute-force oracles.

Formulas are circuits written as nested tuples:

    ('var', i)        1-based variable leaf
    ('not', a)
    ('and', a, b)
    ('or', a, b)

The oracles (satisfiability, lexicographically maximum satisfying assignment,
QBF truth) enumerate assignments outright.  They are intentionally exponential
and refuse above a configurable cap; everything downstream cross-checks the
LP machinery against them, so they must stay simple and independent.
"""

from __future__ import annotations

from dataclasses import dataclass

DEFAULT_BRUTE_FORCE_CAP = 24


class FormulaError(ValueError):
    pass


class CapExceeded(RuntimeError):
    """An oracle was asked to enumerate beyond its configured cap."""


def var(i: int):
    return ("var", i)


def not_(a):
    return ("not", a)


def and_(a, b):
    return ("and", a, b)


def or_(a, b):
    return ("or", a, b)


def _walk(ast):
    yield ast
    op = ast[0]
    if op == "not":
        yield from _walk(ast[1])
    elif op in ("and", "or"):
        yield from _walk(ast[1])
        yield from _walk(ast[2])
    elif op != "var":
        raise FormulaError(f"unknown node {ast[0]!r}")


@dataclass(frozen=True)
class Formula:
    """A circuit over variables 1..n with a designated root."""

    n: int
    root: tuple

    def __post_init__(self):
        if self.n < 1:
            raise FormulaError("need at least one variable")
        for node in _walk(self.root):
            if node[0] == "var" and not 1 <= node[1] <= self.n:
                raise FormulaError(f"variable {node[1]} out of range 1..{self.n}")

    @property
    def gate_count(self) -> int:
        return sum(1 for node in _walk(self.root) if node[0] != "var")

    def to_sexpr(self) -> str:
        def rec(ast):
            if ast[0] == "var":
                return f"v{ast[1]}"
            if ast[0] == "not":
                return f"(not {rec(ast[1])})"
            return f"({ast[0]} {rec(ast[1])} {rec(ast[2])})"

        return rec(self.root)


def eval_formula(f: Formula, s) -> int:
    """Circuit value at the root under assignment s (length n, entries 0/1)."""
    if len(s) != f.n:
        raise FormulaError(f"assignment length {len(s)} != n={f.n}")

    def rec(ast):
        op = ast[0]
        if op == "var":
            return int(s[ast[1] - 1])
        if op == "not":
            return 1 - rec(ast[1])
        a = rec(ast[1])
        if op == "and":
            return a & rec(ast[2]) if a else 0
        return a | rec(ast[2]) if not a else 1

    return rec(f.root)


def _assignments_desc(n: int):
    """All binary vectors of length n in decreasing lexicographic order
    (component 1 most significant)."""
    for v in range((1 << n) - 1, -1, -1):
        yield tuple((v >> (n - 1 - i)) & 1 for i in range(n))


def lexmax_sat(f: Formula, cap: int = DEFAULT_BRUTE_FORCE_CAP):
    """Lexicographically maximum satisfying assignment, or None."""
    if f.n > cap:
        raise CapExceeded(f"n={f.n} exceeds brute-force cap {cap}")
    for s in _assignments_desc(f.n):
        if eval_formula(f, s):
            return s
    return None


def is_satisfiable(f: Formula, cap: int = DEFAULT_BRUTE_FORCE_CAP) -> bool:
    return lexmax_sat(f, cap=cap) is not None


@dataclass(frozen=True)
class Qbf:
    """Prenex QBF with strictly alternating blocks starting existential.

    blocks[j] lists the 1-based variables of block j+1; block 1 is exists.
    Blocks must partition 1..matrix.n.
    """

    blocks: tuple
    matrix: Formula

    def __post_init__(self):
        object.__setattr__(self, "blocks", tuple(tuple(blk) for blk in self.blocks))
        seen = set()
        for blk in self.blocks:
            if not blk:
                raise FormulaError("empty quantifier block")
            for v in blk:
                if v in seen:
                    raise FormulaError(f"variable {v} appears in two blocks")
                seen.add(v)
        if seen != set(range(1, self.matrix.n + 1)):
            raise FormulaError("blocks must partition the matrix variables")

    @property
    def k(self) -> int:
        return len(self.blocks)

    def quantifier(self, block_index: int) -> str:
        """'exists' for odd blocks (1-based), 'forall' for even ones."""
        return "exists" if block_index % 2 == 1 else "forall"


def qbf_truth(h: Qbf, cap: int = DEFAULT_BRUTE_FORCE_CAP) -> int:
    if h.matrix.n > cap:
        raise CapExceeded(f"total variables {h.matrix.n} exceed cap {cap}")
    assign = [0] * h.matrix.n

    def rec(j: int) -> int:
        if j == len(h.blocks):
            return eval_formula(h.matrix, assign)
        blk = h.blocks[j]
        exists = (j % 2 == 0)
        for bits in range(1 << len(blk)):
            for pos, v in enumerate(blk):
                assign[v - 1] = (bits >> (len(blk) - 1 - pos)) & 1
            val = rec(j + 1)
            if exists and val:
                return 1
            if not exists and not val:
                return 0
        return 0 if exists else 1

    return rec(0)


def qbf_substitute(h: Qbf, s1) -> int:
    """Truth of H(s1): first block fixed to the binary vector s1."""
    blk = h.blocks[0]
    if len(s1) != len(blk):
        raise FormulaError("s1 length must match the first block")
    assign = [0] * h.matrix.n
    for pos, v in enumerate(blk):
        assign[v - 1] = int(s1[pos])

    def rec(j: int) -> int:
        if j == len(h.blocks):
            return eval_formula(h.matrix, assign)
        blkj = h.blocks[j]
        exists = (j % 2 == 0)
        for bits in range(1 << len(blkj)):
            for pos, v in enumerate(blkj):
                assign[v - 1] = (bits >> (len(blkj) - 1 - pos)) & 1
            val = rec(j + 1)
            if exists and val:
                return 1
            if not exists and not val:
                return 0
        return 0 if exists else 1

    return rec(1)


def qbf_lexmax(h: Qbf, cap: int = DEFAULT_BRUTE_FORCE_CAP):
    """M(H): lexicographically maximum s1 with H(s1) true, or None."""
    if h.matrix.n > cap:
        raise CapExceeded(f"total variables {h.matrix.n} exceed cap {cap}")
    for s1 in _assignments_desc(len(h.blocks[0])):
        if qbf_substitute(h, s1):
            return s1
    return None


# -- DIMACS / QDIMACS ---------------------------------------------------------


class ParseError(ValueError):
    def __init__(self, message, lineno):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


def _clause_ast(lits, n, lineno):
    parts = []
    for lit in lits:
        if lit == 0 or abs(lit) > n:
            raise ParseError(f"literal {lit} out of range", lineno)
        leaf = var(abs(lit))
        parts.append(not_(leaf) if lit < 0 else leaf)
    if not parts:
        # empty clause: constant false
        return and_(var(1), not_(var(1)))
    ast = parts[0]
    for p in parts[1:]:
        ast = or_(ast, p)
    return ast


def _read_lines(data) -> list:
    if isinstance(data, bytes):
        data = data.decode("ascii")
    return data.splitlines()


def parse_cnf(data) -> Formula:
    """DIMACS CNF to a Formula (OR-of-literal clauses joined by AND)."""
    lines = _read_lines(data)
    n = nclauses = None
    header_line = 0
    clauses = []
    current = []
    current_start = None
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("c") or line.startswith("%"):
            continue
        if line.startswith("p"):
            if n is not None:
                raise ParseError("duplicate header", lineno)
            parts = line.split()
            if len(parts) != 4 or parts[1] != "cnf":
                raise ParseError("malformed header, want 'p cnf <vars> <clauses>'", lineno)
            try:
                n, nclauses = int(parts[2]), int(parts[3])
            except ValueError:
                raise ParseError("malformed header counts", lineno) from None
            if n < 1:
                raise ParseError("need at least one variable", lineno)
            header_line = lineno
            continue
        if n is None:
            raise ParseError("clause before header", lineno)
        try:
            tokens = [int(t) for t in line.split()]
        except ValueError:
            raise ParseError(f"bad token in clause: {line!r}", lineno) from None
        for t in tokens:
            if t == 0:
                clauses.append(_clause_ast(current, n, lineno))
                current = []
                current_start = None
            else:
                if current_start is None:
                    current_start = lineno
                current.append(t)
    if current:
        raise ParseError("unterminated clause at end of input", current_start or len(lines))
    if n is None:
        raise ParseError("missing header", header_line or 1)
    if not clauses:
        # no clauses: trivially true
        return Formula(n, or_(var(1), not_(var(1))))
    ast = clauses[0]
    for cl in clauses[1:]:
        ast = and_(ast, cl)
    return Formula(n, ast)


def parse_qdimacs(data) -> Qbf:
    """QDIMACS to a Qbf; the leading block must be existential and free
    variables are folded into it."""
    lines = _read_lines(data)
    n = None
    blocks = []  # list of (quant, [vars])
    clauses_raw = []
    current = []
    current_start = None
    prefix_done = False
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("c") or line.startswith("%"):
            continue
        if line.startswith("p"):
            parts = line.split()
            if len(parts) != 4 or parts[1] != "cnf":
                raise ParseError("malformed header", lineno)
            n = int(parts[2])
            if n < 1:
                raise ParseError("need at least one variable", lineno)
            continue
        if line[0] in "ea":
            if n is None:
                raise ParseError("quantifier line before header", lineno)
            if prefix_done:
                raise ParseError("quantifier line after clauses", lineno)
            quant = line[0]
            try:
                vs = [int(t) for t in line[1:].split()]
            except ValueError:
                raise ParseError("bad quantifier line", lineno) from None
            if not vs or vs[-1] != 0:
                raise ParseError("quantifier line must end with 0", lineno)
            vs = vs[:-1]
            if not vs:
                raise ParseError("empty quantifier block", lineno)
            if any(v < 1 or v > n for v in vs):
                raise ParseError("quantified variable out of range", lineno)
            if not blocks and quant == "a":
                raise ParseError("first block must be existential", lineno)
            if blocks and blocks[-1][0] == quant:
                blocks[-1][1].extend(vs)  # merge adjacent duplicates
            else:
                blocks.append((quant, list(vs)))
            continue
        if n is None:
            raise ParseError("clause before header", lineno)
        prefix_done = True
        try:
            tokens = [int(t) for t in line.split()]
        except ValueError:
            raise ParseError(f"bad token in clause: {line!r}", lineno) from None
        for t in tokens:
            if t == 0:
                clauses_raw.append((list(current), lineno))
                current = []
                current_start = None
            else:
                if current_start is None:
                    current_start = lineno
                current.append(t)
    if current:
        raise ParseError("unterminated clause at end of input", current_start or len(lines))
    if n is None:
        raise ParseError("missing header", 1)
    quantified = {v for _, vs in blocks for v in vs}
    free = [v for v in range(1, n + 1) if v not in quantified]
    if free:
        if blocks and blocks[0][0] == "e":
            blocks[0][1].extend(free)
        else:
            blocks.insert(0, ("e", free))
    clause_asts = [_clause_ast(lits, n, lineno) for lits, lineno in clauses_raw]
    if not clause_asts:
        ast = or_(var(1), not_(var(1)))
    else:
        ast = clause_asts[0]
        for cl in clause_asts[1:]:
            ast = and_(ast, cl)
    return Qbf(blocks=tuple(tuple(vs) for _, vs in blocks), matrix=Formula(n, ast))


# -- deterministic enumeration and random generation for sweeps ---------------


def enumerate_small_formulas(max_vars: int, max_gates: int):
    """All structurally distinct ASTs over <= max_vars variables with
    <= max_gates gates, canonicalized (commutative children sorted),
    deterministic order, smallest first."""
    leaves = [var(i) for i in range(1, max_vars + 1)]
    by_gates = {0: sorted(leaves)}
    for g in range(1, max_gates + 1):
        stratum = set()
        for sub in by_gates[g - 1]:
            stratum.add(not_(sub))
        for ga in range(0, g):
            gb = g - 1 - ga
            for a in by_gates[ga]:
                for b in by_gates[gb]:
                    lo, hi = (a, b) if a <= b else (b, a)
                    stratum.add(("and", lo, hi))
                    stratum.add(("or", lo, hi))
        by_gates[g] = sorted(stratum)
    out = []
    for g in range(0, max_gates + 1):
        for ast in by_gates[g]:
            used = {node[1] for node in _walk(ast) if node[0] == "var"}
            out.append(Formula(max(used), ast))
    return out


def random_cnf(rng, n: int, n_clauses: int, max_width: int = 3) -> Formula:
    """Seeded random CNF as a Formula."""
    clauses = []
    for _ in range(n_clauses):
        width = rng.randint(1, min(max_width, n))
        vs = rng.sample(range(1, n + 1), width)
        lits = [v if rng.random() < 0.5 else -v for v in vs]
        clauses.append(_clause_ast(lits, n, 0))
    if not clauses:
        ast = or_(var(1), not_(var(1)))
    else:
        ast = clauses[0]
        for cl in clauses[1:]:
            ast = and_(ast, cl)
    return Formula(n, ast)


def random_qbf(rng, block_sizes, n_clauses: int, max_width: int = 3) -> Qbf:
    """Seeded random prenex QBF with the given block sizes."""
    n = sum(block_sizes)
    matrix = random_cnf(rng, n, n_clauses, max_width)
    blocks = []
    pos = 1
    for size in block_sizes:
        blocks.append(tuple(range(pos, pos + size)))
        pos += size
    return Qbf(blocks=tuple(blocks), matrix=matrix)
