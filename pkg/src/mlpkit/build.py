"""Mutable builder for assembling MlpInstance objects level by level."""

from __future__ import annotations

from dataclasses import dataclass

from .core import MlpInstance
from .rat import ZERO, mpq


@dataclass(frozen=True)
class Var:
    level: int
    index: int
    name: str

    def __repr__(self):
        return f"<{self.name}@{self.level}.{self.index}>"


class InstanceBuilder:
    def __init__(self, k: int):
        self.k = k
        self._vars = [[] for _ in range(k)]  # per-level list of names
        self._rows = [[] for _ in range(k)]  # per-level list of (coeff dict Var->Rat, rhs)
        self._obj = [{} for _ in range(k)]  # per-level objective dict Var->Rat
        self._by_name = {}

    def var(self, level: int, name: str) -> Var:
        if not 1 <= level <= self.k:
            raise ValueError("level out of range")
        if name in self._by_name:
            raise ValueError(f"duplicate variable name {name!r}")
        v = Var(level, len(self._vars[level - 1]), name)
        self._vars[level - 1].append(name)
        self._by_name[name] = v
        return v

    def vars_at(self, level: int):
        return [self._by_name[nm] for nm in self._vars[level - 1]]

    def row(self, level: int, coeffs: dict, rhs, sense: str = ">="):
        """Add one linear row at `level`.  sense '<=' flips signs; '==' adds a pair."""
        rhs = mpq(rhs)
        coeffs = {v: mpq(c) for v, c in coeffs.items() if mpq(c) != 0}
        if sense == ">=":
            self._rows[level - 1].append((coeffs, rhs))
        elif sense == "<=":
            self._rows[level - 1].append(({v: -c for v, c in coeffs.items()}, -rhs))
        elif sense == "==":
            self.row(level, coeffs, rhs, ">=")
            self.row(level, coeffs, rhs, "<=")
        else:
            raise ValueError(f"unknown sense {sense!r}")

    def box(self, v: Var, level: int | None = None):
        """0 <= v <= 1 as two rows, by default at the last level."""
        lv = level if level is not None else self.k
        self.row(lv, {v: 1}, 0, ">=")
        self.row(lv, {v: 1}, 1, "<=")

    def obj(self, level: int, coeffs: dict):
        """Accumulate objective terms for `level` (vars must be at levels >= level)."""
        for v, c in coeffs.items():
            if v.level < level:
                raise ValueError(f"objective of level {level} cannot touch {v!r}")
            self._obj[level - 1][v] = self._obj[level - 1].get(v, ZERO) + mpq(c)

    def obj_coeff(self, level: int, v: Var):
        return self._obj[level - 1].get(v, ZERO)

    def set_obj_coeff(self, level: int, v: Var, c):
        self._obj[level - 1][v] = mpq(c)

    def build(self) -> MlpInstance:
        n = tuple(len(vs) for vs in self._vars)
        m = tuple(len(rs) for rs in self._rows)
        A = {}
        b = {}
        c = {}
        for l in range(1, self.k + 1):
            rows = self._rows[l - 1]
            if rows:
                b[l] = tuple(rhs for _, rhs in rows)
            touched = set()
            for coeffs, _ in rows:
                for v in coeffs:
                    touched.add(v.level)
            for i in sorted(touched):
                mat = [[ZERO] * n[i - 1] for _ in rows]
                for r, (coeffs, _) in enumerate(rows):
                    for v, cf in coeffs.items():
                        if v.level == i:
                            mat[r][v.index] = cf
                A[(l, i)] = tuple(tuple(row) for row in mat)
        for l in range(1, self.k + 1):
            per_level = {}
            for v, cf in self._obj[l - 1].items():
                if cf == 0:
                    continue
                per_level.setdefault(v.level, {})[v.index] = cf
            for i, entries in sorted(per_level.items()):
                vec = [ZERO] * n[i - 1]
                for idx, cf in entries.items():
                    vec[idx] = cf
                c[(l, i)] = tuple(vec)
        return MlpInstance(k=self.k, n=n, m=m, A=A, b=b, c=c)

    def flat_index(self, v: Var, n=None) -> int:
        """Index of v in the flattened variable order of the built instance."""
        ns = n if n is not None else [len(vs) for vs in self._vars]
        return sum(ns[: v.level - 1]) + v.index
