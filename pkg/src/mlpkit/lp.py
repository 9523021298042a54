"""Exact LP solver: minimize c^T x subject to a.x >= rhs rows, x free.

Two-phase primal simplex on a dense rational tableau with native variable
bounds.  Anti-cycling is Bland's smallest-index rule throughout, so the solver
is deterministic and always terminates.  A presolve pass turns single-variable
rows into bounds, folds opposite row pairs into equalities, Gaussian-eliminates
variables pinned by equalities, and merges dominated parallel rows; solutions
and rays are mapped back to the original variable space.
"""

from __future__ import annotations

from dataclasses import dataclass

from .rat import Rat, ZERO, ONE, mpq

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"


@dataclass
class LpProblem:
    """min objective . x  s.t.  each (coeffs, rhs): coeffs . x >= rhs; x free."""

    n: int
    rows: list
    objective: list

    def __post_init__(self):
        self.rows = [([mpq(v) for v in coeffs], mpq(rhs)) for coeffs, rhs in self.rows]
        self.objective = [mpq(v) for v in self.objective]
        for coeffs, _ in self.rows:
            if len(coeffs) != self.n:
                raise ValueError("row length mismatch")
        if len(self.objective) != self.n:
            raise ValueError("objective length mismatch")


@dataclass
class LpResult:
    status: str
    value: Rat = None
    x: list = None
    ray_point: list = None
    ray_dir: list = None
    pivots: int = 0

    @property
    def optimal(self):
        return self.status == OPTIMAL


class _Infeasible(Exception):
    pass


class _Presolved:
    """Normalized system: core variables with bounds, equality rows with
    slacks to be added, plus the substitution chain for map-back."""

    def __init__(self, n):
        self.n = n
        self.lo = [None] * n
        self.up = [None] * n
        self.subs = []  # (var, {var: coef}, const): var = const + sum coef.x
        self.alive = [True] * n
        self.rows = []  # ({var: coef}, rhs) multi-variable ">=" rows
        self.deferred = []  # rows produced during elimination, substituted later
        self.obj = {}
        self.obj_const = ZERO

    def add_bound(self, j, coef, rhs):
        v = rhs / coef
        if coef > 0:
            if self.lo[j] is None or v > self.lo[j]:
                self.lo[j] = v
        else:
            if self.up[j] is None or v < self.up[j]:
                self.up[j] = v
        if self.lo[j] is not None and self.up[j] is not None and self.lo[j] > self.up[j]:
            raise _Infeasible

    def apply_subs(self, d, rhs):
        changed = True
        while changed:
            changed = False
            for (sv, scoef, sconst) in self.subs:
                if sv in d:
                    f = d.pop(sv)
                    for j, c in scoef.items():
                        nv = d.get(j, ZERO) + f * c
                        if nv == 0:
                            d.pop(j, None)
                        else:
                            d[j] = nv
                    rhs -= f * sconst
                    changed = True
        return d, rhs

    def eliminate(self, d, rhs):
        """Record x_piv = const + sum coefs.x from the equality d.x = rhs."""
        d = dict(d)
        d, rhs = self.apply_subs(d, rhs)
        if not d:
            if rhs != 0:
                raise _Infeasible
            return
        piv = min(d)
        pc = d.pop(piv)
        coefs = {j: -c / pc for j, c in d.items()}
        const = rhs / pc
        self.subs.append((piv, coefs, const))
        self.alive[piv] = False
        plo, pup = self.lo[piv], self.up[piv]
        self.lo[piv] = self.up[piv] = None
        if plo is not None:
            if coefs:
                self.deferred.append((dict(coefs), plo - const))
            elif const < plo:
                raise _Infeasible
        if pup is not None:
            if coefs:
                self.deferred.append(({j: -c for j, c in coefs.items()}, const - pup))
            elif const > pup:
                raise _Infeasible


def _presolve(problem: LpProblem) -> _Presolved:
    ps = _Presolved(problem.n)

    # bucket parallel rows: key = direction normalized by its first coefficient
    buckets = {}  # key -> {"ge": max_rhs or None, "le": min_rhs or None, "dir": {var: coef}}
    singles = []
    for coeffs, rhs in problem.rows:
        d = {j: v for j, v in enumerate(coeffs) if v}
        if not d:
            if rhs > 0:
                raise _Infeasible
            continue
        if len(d) == 1:
            singles.append((d, rhs))
            continue
        items = sorted(d.items())
        c0 = items[0][1]
        key = tuple((j, c / c0) for j, c in items)
        ent = buckets.setdefault(key, {"ge": None, "le": None, "dir": {j: c for j, c in key}})
        v = rhs / c0
        if c0 > 0:  # direction . x >= v
            if ent["ge"] is None or v > ent["ge"]:
                ent["ge"] = v
        else:  # direction . x <= v
            if ent["le"] is None or v < ent["le"]:
                ent["le"] = v

    for d, rhs in singles:
        ((j, coef),) = d.items()
        ps.add_bound(j, coef, rhs)

    pending = []
    for key in sorted(buckets):
        ent = buckets[key]
        ge, le = ent["ge"], ent["le"]
        if ge is not None and le is not None:
            if ge > le:
                raise _Infeasible
            if ge == le:
                pending.append(("eq", ent["dir"], ge))
                continue
        if ge is not None:
            pending.append(("ge", ent["dir"], ge))
        if le is not None:
            pending.append(("ge", {j: -c for j, c in ent["dir"].items()}, -le))

    for kind, d, rhs in pending:
        if kind == "eq":
            ps.eliminate(d, rhs)

    ge_rows = [(d, rhs) for kind, d, rhs in pending if kind == "ge"]
    ge_rows.extend(ps.deferred)
    for d, rhs in ge_rows:
        d, rhs = ps.apply_subs(dict(d), rhs)
        if not d:
            if rhs > 0:
                raise _Infeasible
            continue
        if len(d) == 1:
            ((j, coef),) = d.items()
            ps.add_bound(j, coef, rhs)
        else:
            ps.rows.append((d, rhs))

    od = {j: v for j, v in enumerate(problem.objective) if v}
    od, negconst = ps.apply_subs(od, ZERO)
    ps.obj = od
    ps.obj_const = -negconst
    return ps


class _Tableau:
    """Bounded-variable simplex core: rows are equalities row . x = rhs and
    every column has bounds (lo, up), either side possibly None (infinite)."""

    def __init__(self, ncols, lo, up, eq_rows, eq_rhs):
        self.ncols = ncols
        self.lo = lo
        self.up = up
        self.pivots = 0
        self.status = []  # 'lo' | 'up' | 'free' | 'basic'
        self.value = []
        for j in range(ncols):
            if lo[j] is not None and (lo[j] >= 0 or up[j] is None):
                self.status.append("lo")
                self.value.append(lo[j])
            elif up[j] is not None:
                self.status.append("up")
                self.value.append(up[j])
            else:
                self.status.append("free")
                self.value.append(ZERO)
        self.rows = [list(r) for r in eq_rows]
        self.rhs = list(eq_rhs)
        self.basis = []
        self.obj = None
        self.objval = ZERO
        self.art_base = ncols

    def install_artificials(self):
        res = []
        for r, row in enumerate(self.rows):
            acc = self.rhs[r]
            for j, v in enumerate(row):
                if v and self.value[j]:
                    acc -= v * self.value[j]
            res.append(acc)
        self.art_base = self.ncols
        for r in range(len(self.rows)):
            if res[r] < 0:  # normalize so the artificial basis column is +1
                self.rows[r] = [-v for v in self.rows[r]]
                self.rhs[r] = -self.rhs[r]
                res[r] = -res[r]
            for rr in range(len(self.rows)):
                self.rows[rr].append(ONE if rr == r else ZERO)
            self.lo.append(ZERO)
            self.up.append(None)
            self.status.append("basic")
            self.value.append(res[r])
            self.basis.append(self.ncols)
            self.ncols += 1

    def set_objective(self, costs):
        obj = list(costs) + [ZERO] * (self.ncols - len(costs))
        val = ZERO
        for j in range(self.ncols):
            if self.status[j] != "basic" and obj[j] and self.value[j]:
                val += obj[j] * self.value[j]
        for r, bj in enumerate(self.basis):
            f = obj[bj]
            if f:
                row = self.rows[r]
                obj = [a - f * b if b else a for a, b in zip(obj, row)]
                val += f * self.value[bj]
        self.obj = obj
        self.objval = val

    def _pivot(self, r, col):
        self.pivots += 1
        rows = self.rows
        prow = rows[r]
        piv = prow[col]
        if piv != 1:
            inv = 1 / piv
            rows[r] = prow = [v * inv for v in prow]
        for i, row in enumerate(rows):
            if i == r:
                continue
            f = row[col]
            if f:
                rows[i] = [a - f * b if b else a for a, b in zip(row, prow)]
        f = self.obj[col]
        if f:
            self.obj = [a - f * b if b else a for a, b in zip(self.obj, prow)]

    def iterate(self):
        """Bland iterations to optimality; returns ('optimal',) or
        ('unbounded', entering_col, direction)."""
        while True:
            enter = None
            direction = 0
            obj = self.obj
            status = self.status
            for j in range(self.ncols):
                st = status[j]
                if st == "basic":
                    continue
                d = obj[j]
                if not d:
                    continue
                if d < 0 and st != "up":
                    enter, direction = j, 1
                    break
                if d > 0 and st != "lo":
                    enter, direction = j, -1
                    break
            if enter is None:
                return ("optimal",)
            j = enter
            # ratio test: move x_j by direction * t, t >= 0; candidates are
            # (t, leaving column, row index or None for the entering's own flip)
            best_t = None
            leave_col = None
            leave_row = None
            leave_to = None
            if self.lo[j] is not None and self.up[j] is not None:
                best_t = self.up[j] - self.lo[j]
                leave_col = j
                leave_row = None
                leave_to = "up" if direction == 1 else "lo"
            for r, row in enumerate(self.rows):
                a = row[j]
                if not a:
                    continue
                bj = self.basis[r]
                bv = self.value[bj]
                step = -a * direction  # basic value moves by step * t
                if step > 0:
                    if self.up[bj] is None:
                        continue
                    t = (self.up[bj] - bv) / step
                    target = "up"
                else:
                    if self.lo[bj] is None:
                        continue
                    t = (bv - self.lo[bj]) / (-step)
                    target = "lo"
                if best_t is None or t < best_t or (t == best_t and bj < leave_col):
                    best_t = t
                    leave_col = bj
                    leave_row = r
                    leave_to = target
            if best_t is None:
                return ("unbounded", j, direction)
            t = best_t
            if t:
                for r, row in enumerate(self.rows):
                    a = row[j]
                    if a:
                        bj = self.basis[r]
                        self.value[bj] -= a * direction * t
                self.value[j] += direction * t
                self.objval += self.obj[j] * direction * t
            if leave_row is None:
                self.status[j] = leave_to  # bound flip
                continue
            out = self.basis[leave_row]
            self.status[out] = leave_to
            self.value[out] = self.lo[out] if leave_to == "lo" else self.up[out]
            self.basis[leave_row] = j
            self.status[j] = "basic"
            self._pivot(leave_row, j)

    def ray(self, col, direction):
        d = [ZERO] * self.ncols
        d[col] = mpq(direction)
        for r, row in enumerate(self.rows):
            a = row[col]
            if a:
                d[self.basis[r]] = -a * direction
        return d


def lp_solve(problem: LpProblem) -> LpResult:
    """Exact two-phase simplex; deterministic."""
    try:
        ps = _presolve(problem)
    except _Infeasible:
        return LpResult(status=INFEASIBLE)

    core = [j for j in range(problem.n) if ps.alive[j]]
    colmap = {j: idx for idx, j in enumerate(core)}
    ncore = len(core)
    nslack = len(ps.rows)
    ncols = ncore + nslack
    lo = [ps.lo[j] for j in core] + [ZERO] * nslack
    up = [ps.up[j] for j in core] + [None] * nslack
    eq_rows = []
    eq_rhs = []
    for ridx, (d, rhs) in enumerate(ps.rows):
        row = [ZERO] * ncols
        for j, c in d.items():
            row[colmap[j]] = c
        row[ncore + ridx] = -ONE  # a.x - s = rhs, s >= 0
        eq_rows.append(row)
        eq_rhs.append(rhs)

    tab = _Tableau(ncols, lo, up, eq_rows, eq_rhs)
    tab.install_artificials()
    tab.set_objective([ZERO] * ncols + [ONE] * (tab.ncols - ncols))
    out = tab.iterate()
    assert out[0] == "optimal", "phase-1 objective is bounded below"
    if tab.objval > 0:
        return LpResult(status=INFEASIBLE, pivots=tab.pivots)
    for j in range(tab.art_base, tab.ncols):
        tab.up[j] = ZERO
        if tab.status[j] != "basic":
            tab.status[j] = "lo"
            tab.value[j] = ZERO

    costs2 = [ZERO] * tab.ncols
    for j, c in ps.obj.items():
        costs2[colmap[j]] = c
    tab.set_objective(costs2)
    out = tab.iterate()

    def expand(vals, as_direction=False):
        full = [ZERO] * problem.n
        for idx, j in enumerate(core):
            full[j] = vals[idx]
        for (sv, scoef, sconst) in reversed(ps.subs):
            acc = ZERO if as_direction else sconst
            for j, c in scoef.items():
                if full[j]:
                    acc += c * full[j]
            full[sv] = acc
        return full

    if out[0] == "unbounded":
        point = expand(tab.value[:ncore])
        ray = expand(tab.ray(out[1], out[2])[:ncore], as_direction=True)
        return LpResult(status=UNBOUNDED, x=point, ray_point=point, ray_dir=ray, pivots=tab.pivots)

    x = expand(tab.value[:ncore])
    return LpResult(status=OPTIMAL, value=tab.objval + ps.obj_const, x=x, pivots=tab.pivots)


def lp_feasible(n, rows):
    """Feasibility of a row system; returns (bool, witness_or_None)."""
    res = lp_solve(LpProblem(n=n, rows=rows, objective=[ZERO] * n))
    if res.status == INFEASIBLE:
        return False, None
    return True, res.x
