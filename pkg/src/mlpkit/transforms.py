"""Structure-preserving instance transformations.

* forward_constraints: move non-linking rows of upper levels down to the last
  player, preserving the feasible set and the optimal value.
* scale_rhs: positive scaling of the right-hand side of a no-linking instance
  scales the feasible set pointwise.
* compact_powers: replace 1/2^i objective weights by halving chains so that
  all coefficients become small integers.
* t_companion: the T2/T3/T4 companion minimization instances whose optimal
  solutions exist iff the original instance is feasible.
* binarize_lift: mixed-binary to pure LP via a fractionality-evaluating
  bottom player and one aggregated linking row.
"""

from __future__ import annotations

from dataclasses import dataclass

from .core import MlpInstance, check_conditions, encoding_size
from .rat import ZERO, ONE, is_integer, mpq, pow2


@dataclass(frozen=True)
class BoundFn:
    """A named polynomial bound sigma -> nonnegative integer, used for the
    leader boxes of companion instances and the value-search bracket."""

    name: str  # 'psi2' | 'psi3' | 'phi_k'
    coefficient: int  # evaluate(sigma) = coefficient * sigma

    def evaluate(self, sigma: int) -> int:
        return self.coefficient * sigma


def default_bound(name: str, inst: MlpInstance) -> BoundFn:
    """Generous vertex-complexity-style default: 4 * n^2 * sigma."""
    n = inst.total_vars
    return BoundFn(name=name, coefficient=4 * n * n)


def _flat_rows_by_level(inst: MlpInstance):
    return {l: inst.flat_rows(l) for l in range(1, inst.k + 1)}


def _instance_from_flat(k, n, rows_by_level, obj_by_level) -> MlpInstance:
    """Assemble an MlpInstance from flat coefficient rows/objectives."""
    m = tuple(len(rows_by_level.get(l, [])) for l in range(1, k + 1))
    offs = [0]
    for nl in n:
        offs.append(offs[-1] + nl)
    A, b, c = {}, {}, {}
    for l in range(1, k + 1):
        rows = rows_by_level.get(l, [])
        if not rows:
            continue
        b[l] = tuple(rhs for _, rhs in rows)
        for i in range(1, k + 1):
            lo_off = offs[i - 1]
            hi = offs[i]
            if any(any(coeffs[j] for j in range(lo_off, hi)) for coeffs, _ in rows):
                A[(l, i)] = tuple(tuple(coeffs[lo_off:hi]) for coeffs, _ in rows)
    for l in range(1, k + 1):
        vec = obj_by_level.get(l)
        if vec is None:
            continue
        for i in range(l, k + 1):
            lo_off = offs[i - 1]
            hi = offs[i]
            if any(vec[j] for j in range(lo_off, hi)):
                c[(l, i)] = tuple(vec[lo_off:hi])
    return MlpInstance(k=k, n=tuple(n), m=m, A=A, b=b, c=c)


def forward_constraints(inst: MlpInstance) -> MlpInstance:
    """Append the non-linking rows of levels 1..k-1 to the last level, in level
    order; linking rows stay where they are."""
    k = inst.k
    rows = _flat_rows_by_level(inst)
    moved = []
    kept = {}
    for l in range(1, k):
        stay = []
        for r, row in enumerate(rows[l]):
            if inst.row_is_linking(l, r):
                stay.append(row)
            else:
                moved.append(row)
        kept[l] = stay
    kept[k] = moved + rows[k]
    obj = {l: inst.flat_objective(l) for l in range(1, k + 1)}
    return _instance_from_flat(k, inst.n, kept, obj)


def scale_rhs(inst: MlpInstance, lam) -> MlpInstance:
    """(A, b, c) -> (A, lam*b, c) for lam > 0 on a C1 instance."""
    lam = mpq(lam)
    if lam <= 0:
        raise ValueError("scale factor must be positive")
    rep = check_conditions(inst)
    if not rep.c1:
        raise ValueError("scale_rhs requires a no-linking (C1) instance")
    b = {l: tuple(lam * v for v in vec) for l, vec in inst.b.items()}
    return MlpInstance(k=inst.k, n=inst.n, m=inst.m, A=dict(inst.A), b=b, c=dict(inst.c))


def _has_unit_box(inst: MlpInstance, flat_var: int) -> bool:
    k = inst.k
    lower = upper = False
    for r in range(inst.m[k - 1]):
        coeffs, rhs = inst.flat_row(k, r)
        nz = [(j, v) for j, v in enumerate(coeffs) if v]
        if len(nz) != 1 or nz[0][0] != flat_var:
            continue
        if nz[0][1] == 1 and rhs == 0:
            lower = True
        if nz[0][1] == -1 and rhs == -1:
            upper = True
    return lower and upper


def compact_powers(inst: MlpInstance, weights):
    """Replace leader objective terms (a / 2^i) * g by a * h_{g,i} where
    h-chains 2 h_1 = g, 2 h_{p+1} = h_p live at the last level.

    weights: list of (flat variable index, exponent i >= 1).  The leader
    coefficient on each listed variable must be a / 2^i with integer a.
    Returns (instance, chains) with chains[g] = list of new flat h indices.
    """
    k = inst.k
    rows = _flat_rows_by_level(inst)
    obj = {l: list(inst.flat_objective(l)) for l in range(1, k + 1)}
    old_total = inst.total_vars
    extra = 0
    new_rows_k = []
    chains = {}
    for g, expo in weights:
        if expo <= 0:
            raise ValueError("exponent must be >= 1")
        if not _has_unit_box(inst, g):
            raise ValueError(f"variable {g} lacks [0,1] bounds at the last level")
        coef = obj[1][g]
        a = coef * pow2(expo)
        if coef == 0 or not is_integer(a):
            raise ValueError(f"leader coefficient on variable {g} is not a/2^{expo}")
        chain = [old_total + extra + p for p in range(expo)]
        extra += expo
        chains[g] = chain
        obj[1][g] = ZERO
    new_n_k = inst.n[k - 1] + extra

    def widen(coeffs):
        return list(coeffs) + [ZERO] * extra

    rows_by_level = {l: [(widen(cf), rhs) for cf, rhs in rows[l]] for l in range(1, k + 1)}
    width = old_total + extra
    for (g, expo) in weights:
        chain = chains[g]
        prev = g
        for h in chain:
            row = [ZERO] * width
            row[h] = mpq(2)
            row[prev] = -ONE
            new_rows_k.append((row, ZERO))
            new_rows_k.append(([-v for v in row], ZERO))
            lobox = [ZERO] * width
            lobox[h] = ONE
            new_rows_k.append((lobox, ZERO))
            upbox = [ZERO] * width
            upbox[h] = -ONE
            new_rows_k.append((upbox, -ONE))
            prev = h
    rows_by_level[k] = rows_by_level[k] + new_rows_k

    obj_by_level = {}
    for l in range(1, k + 1):
        obj_by_level[l] = widen(obj[l])
    for g, expo in weights:
        coef = inst.flat_objective(1)[g]
        a = coef * pow2(expo)
        obj_by_level[1][chains[g][-1]] = a

    n = list(inst.n)
    n[k - 1] = new_n_k
    out = _instance_from_flat(k, n, rows_by_level, obj_by_level)
    return out, chains


def t_companion(inst: MlpInstance, which: str, psi: BoundFn | None = None) -> MlpInstance:
    """Companion minimization instance; optimal solutions exist iff the
    original is feasible.  T2: bilevel -> LP; T3: trilevel -> bilevel;
    T4: boxed 4-level -> trilevel (no extra boxes)."""
    rep = check_conditions(inst)
    sigma = encoding_size(inst)

    def leader_boxes(nvars, width, bound):
        rows = []
        for j in range(nvars):
            lorow = [ZERO] * width
            lorow[j] = ONE
            rows.append((lorow, -bound))
            uprow = [ZERO] * width
            uprow[j] = -ONE
            rows.append((uprow, -bound))
        return rows

    if which == "T2":
        if inst.k != 2:
            raise ValueError("T2 needs a bilevel instance")
        if not rep.c1:
            raise ValueError("T2 requires condition C1 (no linking constraints)")
        psi = psi or default_bound("psi2", inst)
        bound = pow2(psi.evaluate(sigma))
        width = inst.total_vars
        rows = inst.flat_rows(2) + leader_boxes(inst.n[0], width, bound)
        obj = inst.flat_objective(2)
        return _instance_from_flat(1, (width,), {1: rows}, {1: obj})

    if which == "T3":
        if inst.k != 3:
            raise ValueError("T3 needs a trilevel instance")
        if not rep.c1:
            raise ValueError("T3 requires condition C1 (no linking constraints)")
        psi = psi or default_bound("psi3", inst)
        bound = pow2(psi.evaluate(sigma))
        width = inst.total_vars
        rows = inst.flat_rows(3) + leader_boxes(inst.n[0], width, bound)
        obj1 = inst.flat_objective(2)  # second player's objective, jointly minimized
        obj2 = inst.flat_objective(3)
        n = (inst.n[0] + inst.n[1], inst.n[2])
        return _instance_from_flat(2, n, {2: rows}, {1: obj1, 2: obj2})

    if which == "T4":
        if inst.k != 4:
            raise ValueError("T4 needs a 4-level instance")
        if not rep.c1:
            raise ValueError("T4 requires condition C1 (no linking constraints)")
        if not rep.c2:
            raise ValueError("T4 requires condition C2 (unit boxes at the last level)")
        rows = inst.flat_rows(4)
        obj1 = inst.flat_objective(2)
        obj2 = inst.flat_objective(3)
        obj3 = inst.flat_objective(4)
        n = (inst.n[0] + inst.n[1], inst.n[2], inst.n[3])
        return _instance_from_flat(3, n, {3: rows}, {1: obj1, 2: obj2, 3: obj3})

    raise ValueError(f"unknown companion {which!r}")


def binarize_lift(inst: MlpInstance, binary_vars) -> MlpInstance:
    """(k+1)-level lift: a new bottom player owns fractionality variables
    w_j <= y_j, w_j <= 1 - y_j, 0 <= w_j <= 1 with objective -sum w, and the
    original last player gains the aggregated linking row sum w <= 0."""
    k = inst.k
    for g in binary_vars:
        if not _has_unit_box(inst, g):
            raise ValueError(f"variable {g} is not box-bounded [0,1] at the last level")
    old_total = inst.total_vars
    nw = len(binary_vars)
    width = old_total + nw
    rows = {l: [(list(cf) + [ZERO] * nw, rhs) for cf, rhs in inst.flat_rows(l)] for l in range(1, k + 1)}
    agg = [ZERO] * width
    for j in range(nw):
        agg[old_total + j] = -ONE
    rows[k].append((agg, ZERO))  # sum w <= 0
    wrows = []
    for j, g in enumerate(binary_vars):
        w = old_total + j
        r1 = [ZERO] * width
        r1[w] = -ONE
        r1[g] = ONE
        wrows.append((r1, ZERO))  # w <= y
        r2 = [ZERO] * width
        r2[w] = -ONE
        r2[g] = -ONE
        wrows.append((r2, -ONE))  # w <= 1 - y
        lo = [ZERO] * width
        lo[w] = ONE
        wrows.append((lo, ZERO))
        up = [ZERO] * width
        up[w] = -ONE
        wrows.append((up, -ONE))
    rows[k + 1] = wrows
    obj = {l: list(inst.flat_objective(l)) + [ZERO] * nw for l in range(1, k + 1)}
    wobj = [ZERO] * width
    for j in range(nw):
        wobj[old_total + j] = -ONE
    obj[k + 1] = wobj
    n = tuple(inst.n) + (nw,)
    return _instance_from_flat(k + 1, n, rows, obj)
