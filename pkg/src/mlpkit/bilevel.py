"""Exact optimistic bilevel LP solving via the complementarity-pattern
union-of-polyhedra characterization.

The bilevel feasible graph is the union, over patterns omega in Omega(A, c),
of the polyhedra

    U(omega) = { (x1, x2) : A21 x1 + A22 x2 >= b2,
                 omega^T (b2 - A21 x1 - A22 x2) >= 0 },

where Omega(A, c) = { omega : exists lambda >= 0, A22^T lambda = c22,
lambda supported inside omega }.  Leader rows (linking permitted) are
intersected with each piece after the union is formed.

Two execution strategies share that semantics:

* full enumeration of Omega for small follower row counts (also powers the
  `bilevel_graph` operation), and
* a branch-and-bound over per-component minimal patterns for gadget-sized
  instances: the follower row set splits into connected components over the
  follower variables, every minimal dual support lives inside one component,
  and a partial assignment of components to patterns gives a relaxation LP
  whose value prunes the search.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from .core import MlpInstance, Point
from .lp import INFEASIBLE as LP_INFEASIBLE
from .lp import OPTIMAL as LP_OPTIMAL
from .lp import UNBOUNDED as LP_UNBOUNDED
from .lp import LpProblem, lp_solve
from .outcome import ATTAINED, INFEASIBLE, UNBOUNDED, SolveOutcome
from .rat import ZERO, ONE, mpq

DEFAULT_PATTERN_CAP = 18  # refuse full Omega enumeration above this many follower rows
DEFAULT_COMPONENT_ROW_CAP = 22


class EnumerationCapExceeded(RuntimeError):
    pass


@dataclass(frozen=True)
class CompPattern:
    """A complementarity pattern: the set of follower rows allowed to carry
    dual weight (omega's support)."""

    rows: tuple  # sorted tuple of follower row indices with omega_j = 1

    def as_bits(self, m2: int):
        return tuple(1 if j in set(self.rows) else 0 for j in range(m2))


@dataclass
class PolyPiece:
    """{ z : rows hold }, one piece U(omega) of the bilevel feasible graph,
    over the flattened (x1, x2) variables."""

    pattern: CompPattern
    rows: list  # list of (coeff list over n1+n2, rhs)

    def contains(self, flat) -> bool:
        for coeffs, rhs in self.rows:
            acc = ZERO
            for j, c in enumerate(coeffs):
                if c and flat[j]:
                    acc += c * flat[j]
            if acc < rhs:
                return False
        return True


# -- instance splitting -------------------------------------------------------


@dataclass
class _Component:
    index: int
    vars: tuple  # follower var flat indices (within follower block, 0-based)
    rows: tuple  # follower row indices
    patterns: list = field(default_factory=list)  # list of frozenset(row ids)
    droppable: bool = True
    hull_min: dict = field(default_factory=dict)  # var -> (lo, up) from own single rows


class BilevelSystem:
    """Preprocessed bilevel structure reusable across repeated solves
    (value-oracle queries add leader rows against the same system)."""

    def __init__(self, inst: MlpInstance, component_row_cap: int = DEFAULT_COMPONENT_ROW_CAP):
        if inst.k != 2:
            raise ValueError("bilevel solver needs k = 2")
        self.inst = inst
        self.n1, self.n2 = inst.n
        self.n = self.n1 + self.n2
        self.leader_rows = inst.flat_rows(1)
        self.follower_rows = inst.flat_rows(2)
        self.m2 = len(self.follower_rows)
        self.leader_obj = inst.flat_objective(1)
        self.follower_obj = inst.flat_objective(2)  # zero on leader block
        self.component_row_cap = component_row_cap
        self._build_components()

    # connected components of follower variables through follower rows
    def _build_components(self):
        parent = list(range(self.n2))

        def find(a):
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        def union(a, b):
            ra, rb = find(a), find(b)
            if ra != rb:
                parent[max(ra, rb)] = min(ra, rb)

        row_fvars = []
        for coeffs, _ in self.follower_rows:
            fv = [j - self.n1 for j in range(self.n1, self.n) if coeffs[j]]
            row_fvars.append(fv)
            for a, b in zip(fv, fv[1:]):
                union(a, b)

        groups = {}
        for v in range(self.n2):
            groups.setdefault(find(v), []).append(v)
        comp_of_var = {}
        comps = []
        for idx, (root, vs) in enumerate(sorted(groups.items())):
            comps.append(_Component(index=idx, vars=tuple(sorted(vs)), rows=()))
            for v in vs:
                comp_of_var[v] = idx
        rows_by_comp = {i: [] for i in range(len(comps))}
        self.free_rows = []  # follower rows with no follower variables
        for r, fv in enumerate(row_fvars):
            if not fv:
                self.free_rows.append(r)
            else:
                rows_by_comp[comp_of_var[fv[0]]].append(r)
        for comp in comps:
            comp.rows = tuple(rows_by_comp[comp.index])
        self.components = comps
        self._infeasible_component = None
        for comp in comps:
            self._prepare_component(comp)
            if not comp.patterns:
                self._infeasible_component = comp
        # deterministic branching order: most-constrained first, stable
        self.branch_order = sorted(
            (c for c in comps), key=lambda c: (-len(c.patterns), c.index)
        )

    def _dual_feasible(self, comp, support) -> bool:
        """exists lambda >= 0 supported in `support` with A22_c^T lambda = c_c."""
        rows = []
        nlam = len(support)
        for v in comp.vars:
            coeffs = [self.follower_rows[r][0][self.n1 + v] for r in support]
            target = self.follower_obj[self.n1 + v]
            rows.append((list(coeffs), target))
            rows.append(([-c for c in coeffs], -target))
        for i in range(nlam):
            e = [ZERO] * nlam
            e[i] = ONE
            rows.append((e, ZERO))
        res = lp_solve(LpProblem(n=nlam, rows=rows, objective=[ZERO] * nlam))
        return res.status != LP_INFEASIBLE

    def _prepare_component(self, comp):
        if len(comp.rows) > self.component_row_cap:
            raise EnumerationCapExceeded(
                f"follower component with {len(comp.rows)} rows exceeds cap {self.component_row_cap}"
            )
        # minimal dual supports have size <= number of component variables
        max_size = min(len(comp.rows), len(comp.vars))
        minimal = []
        for size in range(0, max_size + 1):
            for subset in itertools.combinations(comp.rows, size):
                sset = set(subset)
                if any(m <= sset for m in minimal):
                    continue
                if self._dual_feasible(comp, subset):
                    minimal.append(frozenset(subset))
        comp.patterns = sorted(minimal, key=lambda s: (len(s), sorted(s)))
        # per-variable hull bounds from single-variable rows (for droppability)
        bounds = {}
        for r in comp.rows:
            coeffs, rhs = self.follower_rows[r]
            nz = [(j, coeffs[j]) for j in range(self.n) if coeffs[j]]
            if len(nz) != 1:
                continue
            j, c = nz[0]
            lo, up = bounds.get(j - self.n1, (None, None))
            if c > 0:
                v = rhs / c
                lo = v if lo is None or v > lo else lo
            else:
                v = rhs / c
                up = v if up is None or v < up else up
            bounds[j - self.n1] = (lo, up)
        comp.hull_min = bounds

    def component_obj_floor(self, comp, objective):
        """Lower bound on the objective contribution of a dropped component,
        or None when its hull bounds cannot certify one."""
        acc = ZERO
        for v in comp.vars:
            cobj = objective[self.n1 + v]
            if not cobj:
                continue
            lo, up = comp.hull_min.get(v, (None, None))
            bound = lo if cobj > 0 else up
            if bound is None:
                return None
            acc += cobj * bound
        return acc

    # -- node LPs -------------------------------------------------------------

    def _node_lp(self, assignment, extra_rows, objective, pinned=frozenset()):
        """Build and solve the relaxation LP for a partial pattern assignment.

        assignment: dict comp index -> frozenset of tight rows.  Unassigned
        components not pinned by any row are dropped and replaced by a sound
        objective floor.  Returns (LpResult, kept_vars, obj_floor_const).
        """
        keep_var = [True] * self.n
        floor_const = ZERO
        dropped = []
        for comp in self.components:
            if comp.index in assignment or comp.index in pinned:
                continue
            floor = self.component_obj_floor(comp, objective)
            if floor is None:
                continue
            dropped.append(comp)
            for v in comp.vars:
                keep_var[self.n1 + v] = False
            floor_const += floor
        kept = [j for j in range(self.n) if keep_var[j]]
        colmap = {j: i for i, j in enumerate(kept)}
        nk = len(kept)

        def project(coeffs):
            return [coeffs[j] for j in kept]

        rows = []
        for coeffs, rhs in self.leader_rows:
            rows.append((project(coeffs), rhs))
        for coeffs, rhs in extra_rows:
            rows.append((project(coeffs), rhs))
        dropped_rows = set()
        for comp in dropped:
            dropped_rows.update(comp.rows)
        tight = set()
        for cidx, pat in assignment.items():
            tight.update(pat)
        for r, (coeffs, rhs) in enumerate(self.follower_rows):
            if r in dropped_rows:
                continue
            rows.append((project(coeffs), rhs))
            if r in tight:
                rows.append(([-c for c in project(coeffs)], -rhs))
        obj = project(objective)
        res = lp_solve(LpProblem(n=nk, rows=rows, objective=obj))
        return res, kept, floor_const

    def _expand_solution(self, x_kept, kept):
        full = [ZERO] * self.n
        for i, j in enumerate(kept):
            full[j] = x_kept[i]
        return full

    def _piece_value_at(self, comp, pattern, x_full, objective):
        """Objective contribution of one component piece with the leader part
        frozen at x_full: a tiny LP over the component's own variables."""
        cvars = [self.n1 + v for v in comp.vars]
        pos = {j: i for i, j in enumerate(cvars)}
        rows = []
        for r in comp.rows:
            coeffs, rhs = self.follower_rows[r]
            local = [ZERO] * len(cvars)
            shift = ZERO
            for j, c in enumerate(coeffs):
                if not c:
                    continue
                if j in pos:
                    local[pos[j]] = c
                else:
                    shift += c * x_full[j]
            rows.append((local, rhs - shift))
            if r in pattern:
                rows.append(([-v for v in local], shift - rhs))
        obj = [objective[j] for j in cvars]
        res = lp_solve(LpProblem(n=len(cvars), rows=rows, objective=obj))
        if res.status == LP_OPTIMAL:
            return res.value
        return None  # infeasible (or unbounded contribution) at this point

    def _dive(self, assignment, x_full, objective):
        """Greedy completion: per unassigned component pick the piece with the
        cheapest contribution at x_full.  Returns (full assignment, gaps),
        where gaps estimate how much each component's true contribution
        exceeds the relaxation floor at this point."""
        out = dict(assignment)
        gaps = {}
        for comp in self.components:
            if comp.index in out:
                continue
            best = None
            best_pat = comp.patterns[0]
            for pat in comp.patterns:
                val = self._piece_value_at(comp, pat, x_full, objective)
                if val is not None and (best is None or val < best):
                    best = val
                    best_pat = pat
            out[comp.index] = best_pat
            if best is not None:
                floor = self.component_obj_floor(comp, objective)
                gaps[comp.index] = best - floor if floor is not None else best
        return out, gaps

    # -- search ----------------------------------------------------------------

    def solve(
        self,
        extra_leader_rows=(),
        objective=None,
        mode: str = "optimize",
        target=None,
        stop_value=None,
    ) -> SolveOutcome:
        """Optimistic bilevel solve.

        mode 'optimize': exact minimum of `objective` (default: leader objective)
        over the bilevel feasible set intersected with extra_leader_rows.
        mode 'feasible': stop at the first feasible point found.
        stop_value: optional early-out, prune nodes with bound >= stop_value and
        stop as soon as the incumbent is < stop_value (used by decision oracles).
        """
        if self._infeasible_component is not None:
            return SolveOutcome(status=INFEASIBLE, stats={"reason": "follower dual infeasible"})
        objective = list(self.leader_obj) if objective is None else [mpq(c) for c in objective]
        extra_rows = [([mpq(c) for c in coeffs], mpq(rhs)) for coeffs, rhs in extra_leader_rows]

        # components touched by leader/extra rows must stay in every node LP
        comp_of_var = {}
        for comp in self.components:
            for v in comp.vars:
                comp_of_var[v] = comp.index
        pinned = set()
        for coeffs, _ in list(self.leader_rows) + extra_rows:
            for j in range(self.n1, self.n):
                if coeffs[j]:
                    pinned.add(comp_of_var[j - self.n1])
        pinned = frozenset(pinned)

        incumbent = None
        incumbent_x = None
        nodes = 0
        lp_calls = 0
        stack = [dict()]
        unbounded_leaf = None

        def branch(assignment, comp):
            for pat in reversed(comp.patterns):
                child = dict(assignment)
                child[comp.index] = pat
                stack.append(child)

        while stack:
            assignment = stack.pop()
            nodes += 1
            res, kept, floor_const = self._node_lp(assignment, extra_rows, objective, pinned)
            lp_calls += 1
            if res.status == LP_INFEASIBLE:
                continue
            full = len(assignment) == len(self.components)
            if res.status == LP_UNBOUNDED:
                if full:
                    unbounded_leaf = (res, kept)
                    break
                branch(assignment, next(c for c in self.branch_order if c.index not in assignment))
                continue
            bound = res.value + floor_const
            if incumbent is not None and bound >= incumbent:
                continue
            if stop_value is not None and bound >= stop_value:
                continue
            if full:
                incumbent = bound
                incumbent_x = self._expand_solution(res.x, kept)
                if mode == "feasible":
                    break
                if stop_value is not None and incumbent < stop_value:
                    break
                continue
            # dive: complete the assignment greedily at this node's LP point,
            # solve the resulting leaf, and use it as an incumbent candidate
            x_full = self._expand_solution(res.x, kept)
            dive_assignment, gaps = self._dive(assignment, x_full, objective)
            leaf_res, leaf_kept, _ = self._node_lp(dive_assignment, extra_rows, objective, pinned)
            lp_calls += 1
            if leaf_res.status == LP_UNBOUNDED:
                unbounded_leaf = (leaf_res, leaf_kept)
                break
            if leaf_res.status == LP_OPTIMAL:
                if incumbent is None or leaf_res.value < incumbent:
                    incumbent = leaf_res.value
                    incumbent_x = self._expand_solution(leaf_res.x, leaf_kept)
                    if mode == "feasible":
                        break
                    if stop_value is not None and incumbent < stop_value:
                        break
                if leaf_res.value == bound:
                    continue  # the relaxation gap closed at this node
                if incumbent is not None and bound >= incumbent:
                    continue
            # branch on the unassigned component with the largest dive gap
            target = None
            best_gap = None
            for comp in self.branch_order:
                if comp.index in assignment:
                    continue
                gap = gaps.get(comp.index, ZERO)
                if best_gap is None or gap > best_gap:
                    best_gap = gap
                    target = comp
            branch(assignment, target)

        stats = {"nodes": nodes, "lp_calls": lp_calls}
        if unbounded_leaf is not None:
            res, kept = unbounded_leaf
            point = self._expand_solution(res.ray_point, kept)
            ray = self._expand_solution(res.ray_dir, kept)
            return SolveOutcome(
                status=UNBOUNDED,
                witness=Point.from_flat(self.inst, point),
                certificate={"ray_point": point, "ray_dir": ray},
                stats=stats,
            )
        if incumbent is None:
            return SolveOutcome(status=INFEASIBLE, stats=stats)
        witness = Point.from_flat(self.inst, incumbent_x)
        return SolveOutcome(status=ATTAINED, value=incumbent, witness=witness, stats=stats)

    # -- follower-side checks ---------------------------------------------------

    def follower_optimal_value(self, x1):
        """Exact follower LP value at a fixed leader vector (None if infeasible,
        'unbounded' marker if unbounded)."""
        rows = []
        for coeffs, rhs in self.follower_rows:
            shift = sum((coeffs[j] * x1[j] for j in range(self.n1) if coeffs[j]), ZERO)
            rows.append(([coeffs[self.n1 + v] for v in range(self.n2)], rhs - shift))
        obj = [self.follower_obj[self.n1 + v] for v in range(self.n2)]
        res = lp_solve(LpProblem(n=self.n2, rows=rows, objective=obj))
        if res.status == LP_INFEASIBLE:
            return None
        if res.status == LP_UNBOUNDED:
            return "unbounded"
        return res.value

    def is_bilevel_feasible(self, point: Point) -> bool:
        """Membership in the bilevel feasible set (rows + follower optimality)."""
        flat = point.flat()
        for coeffs, rhs in self.leader_rows + self.follower_rows:
            acc = sum((coeffs[j] * flat[j] for j in range(self.n) if coeffs[j]), ZERO)
            if acc < rhs:
                return False
        x1 = flat[: self.n1]
        opt = self.follower_optimal_value(x1)
        if opt is None or opt == "unbounded":
            return False
        fval = sum(
            (self.follower_obj[self.n1 + v] * flat[self.n1 + v] for v in range(self.n2)),
            ZERO,
        )
        return fval == opt


# -- spec-level operations -----------------------------------------------------


def enumerate_patterns(inst: MlpInstance, cap: int = DEFAULT_PATTERN_CAP):
    """All omega in {0,1}^{m2} admitting a supported dual certificate,
    certified one by one with an exact LP.  Exponential by design."""
    sys_ = BilevelSystem(inst)
    if sys_.m2 > cap:
        raise EnumerationCapExceeded(f"m2 = {sys_.m2} exceeds enumeration cap {cap}")
    out = []
    for bits in range(1 << sys_.m2):
        support = tuple(j for j in range(sys_.m2) if bits & (1 << j))
        ok = True
        for comp in sys_.components:
            comp_support = tuple(r for r in support if r in set(comp.rows))
            if not sys_._dual_feasible(comp, comp_support):
                ok = False
                break
        if ok:
            out.append(CompPattern(rows=support))
    return out


def minimal_patterns(inst: MlpInstance):
    """Minimal elements of Omega (products of per-component minimal supports);
    their pieces already cover the whole feasible graph."""
    sys_ = BilevelSystem(inst)
    if sys_._infeasible_component is not None:
        return []
    out = []
    for combo in itertools.product(*(c.patterns for c in sys_.components)):
        rows = sorted(set().union(*combo)) if combo else []
        out.append(CompPattern(rows=tuple(rows)))
    return out


def piece_for_pattern(inst: MlpInstance, pattern: CompPattern) -> PolyPiece:
    """U(omega) in the paper's literal form: follower rows plus the aggregated
    omega^T (b - A x) >= 0 row."""
    sys_ = BilevelSystem(inst)
    rows = [(list(coeffs), rhs) for coeffs, rhs in sys_.follower_rows]
    agg = [ZERO] * sys_.n
    rhs_agg = ZERO
    for r in pattern.rows:
        coeffs, rhs = sys_.follower_rows[r]
        for j in range(sys_.n):
            agg[j] -= coeffs[j]
        rhs_agg -= rhs
    # omega^T (b - Ax) >= 0  <=>  -(sum of rows) . x >= -(sum of rhs)
    rows.append((agg, rhs_agg))
    return PolyPiece(pattern=pattern, rows=rows)


def bilevel_graph(inst: MlpInstance, cap: int = DEFAULT_PATTERN_CAP):
    """The feasible graph as a list of PolyPiece covering it (minimal patterns)."""
    sys_ = BilevelSystem(inst)
    if sys_.m2 > cap:
        raise EnumerationCapExceeded(f"m2 = {sys_.m2} exceeds enumeration cap {cap}")
    return [piece_for_pattern(inst, pat) for pat in minimal_patterns(inst)]


def bilevel_solve(inst: MlpInstance, extra_leader_rows=(), objective=None,
                  mode: str = "optimize", stop_value=None) -> SolveOutcome:
    """One-shot solve; builds the system and dispatches."""
    return BilevelSystem(inst).solve(
        extra_leader_rows=extra_leader_rows, objective=objective, mode=mode, stop_value=stop_value
    )


def bilevel_lex_solve(system: BilevelSystem, objectives, extra_leader_rows=()):
    """Lexicographic optimistic minimization: optimize objectives[0], then each
    later objective subject to all earlier ones pinned at their optima.

    Returns (list of values, witness Point) or a SolveOutcome on failure."""
    rows = list(extra_leader_rows)
    values = []
    witness = None
    for obj in objectives:
        out = system.solve(extra_leader_rows=rows, objective=obj)
        if out.status != ATTAINED:
            return out
        values.append(out.value)
        witness = out.witness
        flat_obj = list(obj)
        rows.append(([-c for c in flat_obj], -out.value))  # obj <= value
    return values, witness
