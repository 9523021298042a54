"""k-level LP instance model: exact-rational blocks, structural conditions, evaluation.

An instance (A, b, c) is stored in dense block form keyed by (level, level)
pairs; absent blocks are implicit zero.  Player l minimizes
sum_{i>=l} c[l,i]^T x_i subject to sum_i A[l,i] x_i >= b[l] and the next
player's optimality.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .rat import (
    Rat,
    ZERO,
    encoding_size_mat,
    encoding_size_rat,
    encoding_size_vec,
    _int_bits,
    is_integer,
    mpq,
)


def _freeze_vec(v):
    return tuple(mpq(x) for x in v)


def _freeze_mat(rows):
    return tuple(tuple(mpq(x) for x in row) for row in rows)


@dataclass(frozen=True)
class MlpInstance:
    """Immutable k-level LP data.  A maps (l, i) -> m_l x n_i matrix,
    b maps l -> length-m_l vector, c maps (l, i) -> length-n_i vector (i >= l)."""

    k: int
    n: tuple
    m: tuple
    A: dict
    b: dict
    c: dict

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if len(self.n) != self.k or len(self.m) != self.k:
            raise ValueError("dims length mismatch")
        if any(nl < 1 for nl in self.n):
            raise ValueError("every level needs at least one variable")
        if any(ml < 0 for ml in self.m):
            raise ValueError("negative row count")
        object.__setattr__(self, "A", {key: _freeze_mat(mat) for key, mat in self.A.items()})
        object.__setattr__(self, "b", {l: _freeze_vec(v) for l, v in self.b.items()})
        object.__setattr__(self, "c", {key: _freeze_vec(v) for key, v in self.c.items()})
        for (l, i), mat in self.A.items():
            if not (1 <= l <= self.k and 1 <= i <= self.k):
                raise ValueError(f"A block {(l, i)} out of range")
            if len(mat) != self.m[l - 1] or any(len(row) != self.n[i - 1] for row in mat):
                raise ValueError(f"A block {(l, i)} has wrong shape")
        for l, vec in self.b.items():
            if not 1 <= l <= self.k:
                raise ValueError(f"b block {l} out of range")
            if len(vec) != self.m[l - 1]:
                raise ValueError(f"b block {l} has wrong length")
        for (l, i), vec in self.c.items():
            if not (1 <= l <= self.k and l <= i <= self.k):
                raise ValueError(f"c block {(l, i)} out of range (need i >= l)")
            if len(vec) != self.n[i - 1]:
                raise ValueError(f"c block {(l, i)} has wrong length")

    # -- block access with implicit zeros ------------------------------------

    def a_block(self, l: int, i: int):
        blk = self.A.get((l, i))
        if blk is None:
            return tuple(tuple(ZERO for _ in range(self.n[i - 1])) for _ in range(self.m[l - 1]))
        return blk

    def b_vec(self, l: int):
        vec = self.b.get(l)
        if vec is None:
            return tuple(ZERO for _ in range(self.m[l - 1]))
        return vec

    def c_vec(self, l: int, i: int):
        vec = self.c.get((l, i))
        if vec is None:
            return tuple(ZERO for _ in range(self.n[i - 1]))
        return vec

    @property
    def total_vars(self) -> int:
        return sum(self.n)

    def var_offset(self, level: int) -> int:
        """Offset of level's variables in the flattened x = (x_1, ..., x_k) order."""
        return sum(self.n[: level - 1])

    def flat_row(self, level: int, r: int):
        """Row r of level's constraint block as (coeff vector over all vars, rhs)."""
        coeffs = []
        for i in range(1, self.k + 1):
            blk = self.A.get((level, i))
            if blk is None:
                coeffs.extend([ZERO] * self.n[i - 1])
            else:
                coeffs.extend(blk[r])
        return coeffs, self.b_vec(level)[r]

    def flat_rows(self, level: int):
        return [self.flat_row(level, r) for r in range(self.m[level - 1])]

    def flat_objective(self, level: int):
        """Level's objective as a coefficient vector over all vars (zeros below level l)."""
        coeffs = []
        for i in range(1, self.k + 1):
            if i < level:
                coeffs.extend([ZERO] * self.n[i - 1])
            else:
                coeffs.extend(self.c_vec(level, i))
        return coeffs

    def row_is_linking(self, level: int, r: int) -> bool:
        """A row at level l links iff it touches variables of levels > l."""
        for i in range(level + 1, self.k + 1):
            blk = self.A.get((level, i))
            if blk is not None and any(x != 0 for x in blk[r]):
                return True
        return False


@dataclass(frozen=True)
class Point:
    """Per-level decision vectors x_1 .. x_k."""

    x: tuple

    def __post_init__(self):
        object.__setattr__(self, "x", tuple(_freeze_vec(v) for v in self.x))

    def level(self, l: int):
        return self.x[l - 1]

    def flat(self):
        return [v for vec in self.x for v in vec]

    @staticmethod
    def from_flat(inst: MlpInstance, flat):
        out = []
        pos = 0
        for nl in inst.n:
            out.append(tuple(flat[pos : pos + nl]))
            pos += nl
        return Point(tuple(out))


@dataclass(frozen=True)
class ConditionReport:
    c1: bool
    c2: bool
    c3: bool
    violations: tuple = field(default_factory=tuple)

    def __str__(self):
        yn = lambda v: "yes" if v else "no"
        return f"C1={yn(self.c1)} C2={yn(self.c2)} C3={yn(self.c3)}"


def _check_shapes(inst: MlpInstance, p: Point):
    if len(p.x) != inst.k:
        raise ValueError("point has wrong number of levels")
    for i, vec in enumerate(p.x):
        if len(vec) != inst.n[i]:
            raise ValueError(f"point level {i + 1} has wrong length")


def residuals_at(inst: MlpInstance, p: Point, level: int):
    """sum_i A[level,i] x_i - b[level]; the point satisfies the level iff all >= 0."""
    if not 1 <= level <= inst.k:
        raise ValueError("level out of range")
    _check_shapes(inst, p)
    out = []
    bvec = inst.b_vec(level)
    for r in range(inst.m[level - 1]):
        acc = -bvec[r]
        for i in range(1, inst.k + 1):
            blk = inst.A.get((level, i))
            if blk is None:
                continue
            row = blk[r]
            xi = p.level(i)
            for j in range(inst.n[i - 1]):
                if row[j]:
                    acc += row[j] * xi[j]
        out.append(acc)
    return tuple(out)


def objective_at(inst: MlpInstance, p: Point, level: int) -> Rat:
    """sum_{i>=level} c[level,i]^T x_i."""
    if not 1 <= level <= inst.k:
        raise ValueError("level out of range")
    _check_shapes(inst, p)
    acc = ZERO
    for i in range(level, inst.k + 1):
        cv = inst.c.get((level, i))
        if cv is None:
            continue
        xi = p.level(i)
        for j in range(inst.n[i - 1]):
            if cv[j]:
                acc += cv[j] * xi[j]
    return acc


def feasible_for_rows(inst: MlpInstance, p: Point) -> bool:
    """All linear rows of all levels hold at p (says nothing about optimality)."""
    return all(
        all(res >= 0 for res in residuals_at(inst, p, l)) for l in range(1, inst.k + 1)
    )


def _bound_rows_present(inst: MlpInstance):
    """For every variable, look for literal rows x_j >= 0 and -x_j >= -1 at the last level."""
    k = inst.k
    lower = set()
    upper = set()
    for r in range(inst.m[k - 1]):
        coeffs, rhs = inst.flat_row(k, r)
        nz = [(j, v) for j, v in enumerate(coeffs) if v != 0]
        if len(nz) != 1:
            continue
        j, v = nz[0]
        if v == 1 and rhs == 0:
            lower.add(j)
        elif v == -1 and rhs == -1:
            upper.add(j)
    return lower, upper


def check_conditions(inst: MlpInstance) -> ConditionReport:
    violations = []

    c1 = all(inst.m[l] == 0 for l in range(inst.k - 1))
    if not c1:
        bad = [l + 1 for l in range(inst.k - 1) if inst.m[l] > 0]
        violations.append(f"C1: levels {bad} have linear constraints")

    lower, upper = _bound_rows_present(inst)
    missing = [j for j in range(inst.total_vars) if j not in lower or j not in upper]
    c2 = not missing
    if not c2:
        violations.append(f"C2: variables (flat indices) {missing[:8]} lack 0<=x<=1 rows at the last level")

    nbound = inst.total_vars
    c3 = True
    for (l, i), mat in inst.A.items():
        for row in mat:
            for v in row:
                if not is_integer(v) or abs(v) > nbound:
                    c3 = False
    for l, vec in inst.b.items():
        for v in vec:
            if not is_integer(v) or abs(v) > nbound:
                c3 = False
    for (l, i), vec in inst.c.items():
        for v in vec:
            if not is_integer(v) or abs(v) > nbound:
                c3 = False
    if not c3:
        violations.append(f"C3: some entry is not an integer in [-{nbound}, {nbound}]")

    return ConditionReport(c1=c1, c2=c2, c3=c3, violations=tuple(violations))


def encoding_size(obj) -> int:
    """Binary encoding size of a rational, vector, matrix, point, or instance."""
    if isinstance(obj, MlpInstance):
        total = _int_bits(obj.k)
        for nl in obj.n:
            total += _int_bits(nl)
        for ml in obj.m:
            total += _int_bits(ml)
        for key in sorted(obj.A):
            mat = obj.A[key]
            if mat:
                total += encoding_size_mat(mat)
        for l in sorted(obj.b):
            total += encoding_size_vec(obj.b[l])
        for key in sorted(obj.c):
            total += encoding_size_vec(obj.c[key])
        return total
    if isinstance(obj, Point):
        return sum(encoding_size_vec(v) for v in obj.x)
    if isinstance(obj, (tuple, list)):
        if obj and isinstance(obj[0], (tuple, list)):
            return encoding_size_mat(obj)
        return encoding_size_vec(obj)
    return encoding_size_rat(mpq(obj))
