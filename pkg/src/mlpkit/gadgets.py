"""Compilers from Boolean formulas and QBFs to multilevel LP instances.

Construction conventions shared by the whole family:

* gate hull rows: NOT is the equality u = 1 - a; AND gives u <= a, u <= b,
  u >= a + b - 1; OR gives u >= a, u >= b, u <= a + b.  For binary inputs the
  hull pins the gate value exactly.
* fractionality penalties: a bottom-player variable per watched wire w with
  rows v <= w, v <= 1 - w and objective -v drives v to min(w, 1 - w); the
  watcher's owner charges it with a positive coefficient (default 3).  Every
  wire of the penalized player is watched (variables, gates, and the root),
  otherwise shared-subformula slack can leak value through the hull.
* objective constants: a pinned variable `one` (rows one >= 1, one <= 1 at the
  last level) carries additive constants, and scales correctly under
  right-hand-side scaling.
* level penalties q_l: witnesses w <= 4 s, w <= 4 - 4 s maximized by the
  bottom player reach 1 whenever min(s, 1-s) >= 1/4, and rows q_l >= w force
  the level penalty up; for binary s everything collapses to 0 and q_l is
  free, so the optimistic upper player pays nothing.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .build import InstanceBuilder, Var
from .core import MlpInstance
from .formulas import Formula, Qbf, not_
from .rat import ZERO, ONE, mpq, pow2
from . import transforms

DEFAULT_PENALTY = 3
WITNESS_SLOPE = 4  # w <= SLOPE*s rows; forces q = 1 once min(s,1-s) >= 1/SLOPE


@dataclass
class GadgetInstance:
    instance: MlpInstance
    varmap: dict  # role -> flat index | list of flat indices | nested lists
    provenance: dict

    @property
    def name(self):
        return self.provenance.get("gadget")


def _flat(b: InstanceBuilder, inst: MlpInstance, v: Var) -> int:
    return sum(inst.n[: v.level - 1]) + v.index


def _flatten_map(b: InstanceBuilder, inst: MlpInstance, roles: dict) -> dict:
    def conv(obj):
        if isinstance(obj, Var):
            return _flat(b, inst, obj)
        if isinstance(obj, (list, tuple)):
            return [conv(x) for x in obj]
        if isinstance(obj, dict):
            return {k: conv(v) for k, v in obj.items()}
        return obj

    return conv(roles)


def _acc(*terms) -> dict:
    """Coefficient dict that sums repeated variables (OR(x, x) is legal)."""
    d = {}
    for v, c in terms:
        d[v] = d.get(v, 0) + c
    return {v: c for v, c in d.items() if c}


def _chain(node, op):
    """Flatten an associative chain of `op` nodes into its operand list."""
    if node[0] != op:
        return [node]
    return _chain(node[1], op) + _chain(node[2], op)


def _emit_circuit(b: InstanceBuilder, ast, leaf_vars: dict, gate_level: int,
                  row_level: int, prefix: str):
    """Emit hull rows for the AST; returns (root wire Var, list of gate Vars).

    Associative AND/OR chains collapse into one n-ary gate; the n-ary hull
    (u >= each input, u <= sum for OR; u <= each input, u >= sum - (n-1) for
    AND) coincides with the chained binary hull but costs far fewer rows."""
    gates = []
    counter = [0]

    def rec(node) -> Var:
        if node[0] == "var":
            return leaf_vars[node[1]]
        counter[0] += 1
        u = b.var(gate_level, f"{prefix}{counter[0]}")
        gates.append(u)
        if node[0] == "not":
            a = rec(node[1])
            b.row(row_level, _acc((u, 1), (a, 1)), 1, "==")
        elif node[0] == "and":
            ins = [rec(x) for x in _chain(node, "and")]
            for a in ins:
                b.row(row_level, _acc((u, 1), (a, -1)), 0, "<=")
            b.row(row_level, _acc((u, 1), *((a, -1) for a in ins)), -(len(ins) - 1), ">=")
        elif node[0] == "or":
            ins = [rec(x) for x in _chain(node, "or")]
            for a in ins:
                b.row(row_level, _acc((u, 1), (a, -1)), 0, ">=")
            b.row(row_level, _acc((u, 1), *((a, -1) for a in ins)), 0, "<=")
        else:
            raise ValueError(f"unknown node {node[0]!r}")
        return u

    root = rec(ast)
    return root, gates


def _penalties(b: InstanceBuilder, watched, owner_level: int, row_level: int, prefix: str):
    """One min(w, 1-w) watcher per watched wire, owned by `owner_level`."""
    vs = []
    for i, w in enumerate(watched, start=1):
        v = b.var(owner_level, f"{prefix}{i}")
        b.row(row_level, {v: 1, w: -1}, 0, "<=")
        b.row(row_level, {v: 1, w: 1}, 1, "<=")
        vs.append(v)
    return vs


def _level_penalty(b: InstanceBuilder, s_vars, bottom_level: int, tag: str):
    """q with witness amplifiers for one upper level's block of s variables."""
    q = b.var(bottom_level, f"q{tag}")
    ws = []
    for i, s in enumerate(s_vars, start=1):
        w = b.var(bottom_level, f"w{tag}_{i}")
        b.row(bottom_level, {w: 1, s: -WITNESS_SLOPE}, 0, "<=")
        b.row(bottom_level, {w: 1, s: WITNESS_SLOPE}, WITNESS_SLOPE, "<=")
        b.row(bottom_level, {q: 1, w: -1}, 0, ">=")
        ws.append(w)
    return q, ws


def _pin_one(b: InstanceBuilder, level: int, row_level: int, name="one") -> Var:
    one = b.var(level, name)
    b.row(row_level, {one: 1}, 1, ">=")
    return one


# -- SATBLP --------------------------------------------------------------------


def sat_to_blp(f: Formula, penalty: int = DEFAULT_PENALTY) -> GadgetInstance:
    """Bilevel instance with V = 0 iff f is satisfiable, else V = 1.

    Leader owns (s, t, u); the follower owns one fractionality watcher per
    leader wire.  All rows live at the bottom (C1) and every variable is
    box-bounded (C2)."""
    b = InstanceBuilder(2)
    s = [b.var(1, f"s{i}") for i in range(1, f.n + 1)]
    t = b.var(1, "t")
    leaf = {i + 1: s[i] for i in range(f.n)}
    root, gates = _emit_circuit(b, f.root, leaf, 1, 2, "u")
    b.row(2, {t: 1, root: -1}, 0, "==")
    one = _pin_one(b, 2, 2)
    watched = s + [t] + gates
    v = _penalties(b, watched, 2, 2, "v")
    for x in s + [t] + gates + [one] + v:
        b.box(x)
    b.obj(1, {one: 1, t: -1})
    b.obj(1, {w: penalty for w in v})
    b.obj(2, {w: -1 for w in v})
    inst = b.build()
    varmap = _flatten_map(b, inst, {"s": s, "t": t, "u": gates, "v": v, "one": one})
    return GadgetInstance(
        instance=inst,
        varmap=varmap,
        provenance={"gadget": "satblp", "formula": f, "penalty": penalty},
    )


def lexsat_to_blp(f: Formula, compact: bool = False, penalty: int = DEFAULT_PENALTY) -> GadgetInstance:
    """SATBLP extended with follower variables g (rows 2s - 1 <= g, boxes,
    follower cost +sum g) and leader reward -sum g_i / 2^i.

    compact=True routes the 1/2^i weights through halving chains so the
    result satisfies C1-C3."""
    b = InstanceBuilder(2)
    s = [b.var(1, f"s{i}") for i in range(1, f.n + 1)]
    t = b.var(1, "t")
    leaf = {i + 1: s[i] for i in range(f.n)}
    root, gates = _emit_circuit(b, f.root, leaf, 1, 2, "u")
    b.row(2, {t: 1, root: -1}, 0, "==")
    one = _pin_one(b, 2, 2)
    watched = s + [t] + gates
    v = _penalties(b, watched, 2, 2, "v")
    g = [b.var(2, f"g{i}") for i in range(1, f.n + 1)]
    for gi, si in zip(g, s):
        b.row(2, {gi: 1, si: -2}, -1, ">=")
    for x in s + [t] + gates + [one] + v + g:
        b.box(x)
    b.obj(1, {one: 1, t: -1})
    b.obj(1, {w: penalty for w in v})
    b.obj(1, {gi: -pow2(-i) for i, gi in enumerate(g, start=1)})
    b.obj(2, {w: -1 for w in v})
    b.obj(2, {gi: 1 for gi in g})
    inst = b.build()
    roles = {"s": s, "t": t, "u": gates, "v": v, "g": g, "one": one}
    varmap = _flatten_map(b, inst, roles)
    prov = {"gadget": "lexsatblp", "formula": f, "penalty": penalty, "compact": compact}
    if compact:
        weights = [(varmap["g"][i], i + 1) for i in range(f.n)]
        inst, chains = transforms.compact_powers(inst, weights)
        varmap["h"] = [chains[gflat] for gflat in varmap["g"]]
    return GadgetInstance(instance=inst, varmap=varmap, provenance=prov)


# -- QLP -----------------------------------------------------------------------


def _theta_terms(k: int, level: int, t: Var, one: Var) -> dict:
    """theta^l_k(t): 1 - t when k - l is odd, else t."""
    if (k - level) % 2 == 1:
        return {one: 1, t: -1}
    return {t: 1}


def qbf_to_klp(h: Qbf, k: int, search: bool = False, penalty: int = DEFAULT_PENALTY) -> GadgetInstance:
    """k-level instance whose value is 0 if H is true and 1 otherwise; with
    search=True the leader objective additionally earns -sum s_1i / 2^i and
    the value becomes -sum M(H)_i/2^i (true) or 1/2^{n_1} (false).

    Levels 1..k-2 own the s blocks; level k-1 owns the last block plus the
    root wire t and the gate wires p; level k carries all rows, the penalty
    watchers r for level k-1's wires, and the per-level penalties q.  The
    matrix encodes F for even k and its negation for odd k, so that the
    alternation of minimizing/maximizing theta terms reproduces the
    quantifier chain."""
    if h.k != k - 1:
        raise ValueError(f"need {k - 1} quantifier blocks for k = {k}, got {h.k}")
    if k < 3:
        raise ValueError("qbf_to_klp needs k >= 3")
    b = InstanceBuilder(k)
    s_blocks = []
    for l, blk in enumerate(h.blocks, start=1):
        level = min(l, k - 1)
        s_blocks.append([b.var(level, f"s{l}_{i}") for i in range(1, len(blk) + 1)])
    t = b.var(k - 1, "t")
    leaf = {}
    for blk, svars in zip(h.blocks, s_blocks):
        for pos, global_var in enumerate(blk):
            leaf[global_var] = svars[pos]
    ast = h.matrix.root if k % 2 == 0 else not_(h.matrix.root)
    root, gates = _emit_circuit(b, ast, leaf, k - 1, k, "p")
    b.row(k, {t: 1, root: -1}, 0, "==")
    one = _pin_one(b, k, k)
    watched = s_blocks[k - 2] + [t] + gates
    r = _penalties(b, watched, k, k, "r")
    qs = []
    wss = []
    for l in range(1, k - 1):
        q, ws = _level_penalty(b, s_blocks[l - 1], k, str(l))
        qs.append(q)
        wss.append(ws)
    allvars = [v for blk in s_blocks for v in blk] + [t] + gates + [one] + r + qs + [
        w for ws in wss for w in ws
    ]
    for x in allvars:
        b.box(x)
    for l in range(1, k - 1):
        b.obj(l, _theta_terms(k, l, t, one))
        b.obj(l, {qs[l - 1]: 2})
    b.obj(k - 1, {one: 1, t: -1})
    b.obj(k - 1, {w: penalty for w in r})
    b.obj(k, {w: -1 for w in r})
    for ws in wss:
        b.obj(k, {w: -1 for w in ws})
    if search:
        b.obj(1, {si: -pow2(-i) for i, si in enumerate(s_blocks[0], start=1)})
    inst = b.build()
    roles = {
        "s_blocks": s_blocks,
        "t": t,
        "p": gates,
        "r": r,
        "q": qs,
        "w": wss,
        "one": one,
    }
    varmap = _flatten_map(b, inst, roles)
    prov = {
        "gadget": "qlp_search" if search else "qlp",
        "qbf": h,
        "k": k,
        "penalty": penalty,
        "search": search,
    }
    if search:
        weights = [(varmap["s_blocks"][0][i], i + 1) for i in range(len(s_blocks[0]))]
        inst, chains = transforms.compact_powers(inst, weights)
        varmap["h"] = [chains[sflat] for sflat in varmap["s_blocks"][0]]
    return GadgetInstance(instance=inst, varmap=varmap, provenance=prov)


# -- illustrative non-attainment instances --------------------------------------


def example_nonattain(which: str) -> GadgetInstance:
    """The two illustrative instances with V = -1 not attained."""
    if which == "k4":
        b = InstanceBuilder(4)
        x1 = b.var(1, "x1")
        x2 = b.var(2, "x2")
        x3 = b.var(3, "x3")
        x4 = b.var(4, "x4")
        b.box(x1, level=1)
        b.row(2, {x2: 1}, 0, "==")
        b.box(x2, level=2)
        b.box(x3, level=3)
        b.row(4, {x4: 1, x3: -1}, 0, "<=")
        b.row(4, {x4: 1, x1: 1, x3: 1}, 2, "<=")
        b.box(x4, level=4)
        b.obj(1, {x3: 1, x1: -1})
        b.obj(2, {x3: -1})
        b.obj(3, {x4: 1})
        b.obj(4, {x4: -1})
        inst = b.build()
        varmap = _flatten_map(b, inst, {"x": [x1, x2, x3, x4]})
        return GadgetInstance(instance=inst, varmap=varmap, provenance={"gadget": "example_k4"})
    if which == "k3":
        b = InstanceBuilder(3)
        x1 = b.var(1, "x1")
        x2 = b.var(2, "x2")
        x3 = b.var(3, "x3")
        b.box(x1, level=1)
        b.row(2, {x2: 1, x1: -1}, 0, "<=")
        b.row(2, {x3: 1}, 0, "==")
        b.box(x2, level=2)
        b.row(3, {x3: 1, x2: -1}, 0, "<=")
        b.row(3, {x3: 1, x2: 1}, 1, "<=")
        b.box(x3, level=3)
        b.obj(1, {x2: 1, x1: -1})
        b.obj(2, {x2: -1})
        b.obj(3, {x3: -1})
        inst = b.build()
        varmap = _flatten_map(b, inst, {"x": [x1, x2, x3]})
        return GadgetInstance(instance=inst, varmap=varmap, provenance={"gadget": "example_k3"})
    raise ValueError("which must be 'k4' or 'k3'")


# -- attainability gadget (k = 3) ------------------------------------------------


def attain_gadget_k3(h: Qbf, penalty: int = DEFAULT_PENALTY) -> GadgetInstance:
    """Couples the k=3 search gadget with the k3 counterexample; an optimal
    solution exists iff NOT (H true and the last bit of M(H) is 1).

    Unlike qbf_to_klp with k = 3, the matrix here encodes F directly and the
    second player minimizes t + penalties - x2 (the printed parity), so at its
    optimum t carries the truth of H(s_1) itself."""
    if h.k != 2:
        raise ValueError("attain gadget needs a 2-block QBF")
    n1 = len(h.blocks[0])
    b = InstanceBuilder(3)
    s1 = [b.var(1, f"s1_{i}") for i in range(1, n1 + 1)]
    x1 = b.var(1, "x1")
    s2 = [b.var(2, f"s2_{i}") for i in range(1, len(h.blocks[1]) + 1)]
    t = b.var(2, "t")
    x2 = b.var(2, "x2")
    leaf = {}
    for pos, gv in enumerate(h.blocks[0]):
        leaf[gv] = s1[pos]
    for pos, gv in enumerate(h.blocks[1]):
        leaf[gv] = s2[pos]
    root, gates = _emit_circuit(b, h.matrix.root, leaf, 2, 3, "p")
    b.row(3, {t: 1, root: -1}, 0, "==")
    one = _pin_one(b, 3, 3)
    # example-two block
    x3 = b.var(3, "x3")
    y = b.var(3, "y")
    # penalties for the second player's wires
    r = _penalties(b, s2 + [t] + gates, 3, 3, "r")
    q1, w1 = _level_penalty(b, s1, 3, "1")
    # second player's printed rows
    b.row(2, {x2: 1, x1: -1}, 0, "<=")
    b.row(2, {x3: 1}, 0, "==")
    # third player's example rows
    b.row(3, {x3: 1, x2: -1}, 0, "<=")
    b.row(3, {x3: 1, x2: 1}, 1, "<=")
    # coupling rows: 6(y - 1/2) >= -s1_last and 6(y - 1/2) >= x2 - x1 - 1 + t
    b.row(3, {y: 6, one: -3, s1[-1]: 1}, 0, ">=")
    b.row(3, {y: 6, one: -2, x2: -1, x1: 1, t: -1}, 0, ">=")
    allvars = s1 + [x1] + s2 + [t, x2] + gates + [one, x3, y] + r + [q1] + w1
    for x in allvars:
        b.box(x)
    # objectives
    b.obj(1, {one: 1, t: -1, q1: 2})
    b.obj(1, {si: -pow2(-i) for i, si in enumerate(s1[:-1], start=1)})
    b.obj(1, {y: 6 * pow2(-n1), one: -3 * pow2(-n1)})
    b.obj(2, {t: 1, x2: -1})
    b.obj(2, {w: penalty for w in r})
    b.obj(3, {w: -1 for w in r})
    b.obj(3, {w: -1 for w in w1})
    b.obj(3, {x3: -1})
    inst = b.build()
    roles = {
        "s1": s1, "x1": x1, "s2": s2, "t": t, "x2": x2, "p": gates,
        "x3": x3, "y": y, "r": r, "q": [q1], "w": [w1], "one": one,
    }
    varmap = _flatten_map(b, inst, roles)
    weights = [(varmap["s1"][i], i + 1) for i in range(n1 - 1)]
    weights.append((varmap["y"], n1))
    weights.append((varmap["one"], n1))
    inst, chains = transforms.compact_powers(inst, weights)
    varmap["h"] = {str(g): chains[g] for g in chains}
    return GadgetInstance(
        instance=inst,
        varmap=varmap,
        provenance={"gadget": "attain_k3", "qbf": h, "penalty": penalty, "n1": n1},
    )


# -- SAT-UNSAT attainability (k = 2) ---------------------------------------------


def _emit_satblp_copy(b: InstanceBuilder, f: Formula, tag: str, penalty: int,
                      scale: Var | None = None):
    """One modified-SATBLP copy (objective -t + penalty * sum v, value -1 iff
    satisfiable else 0).  With `scale`, every right-hand side constant is
    replaced by the scale variable (homogenization)."""
    s = [b.var(1, f"{tag}s{i}") for i in range(1, f.n + 1)]
    t = b.var(1, f"{tag}t")
    leaf = {i + 1: s[i] for i in range(f.n)}
    gates = []
    counter = [0]

    def rhs_one(coeffs, rhs, sense):
        # rewrite constant rhs through the scale variable when homogenizing
        if scale is None or rhs == 0:
            b.row(2, coeffs, rhs, sense)
        else:
            coeffs = dict(coeffs)
            coeffs[scale] = coeffs.get(scale, 0) - rhs
            b.row(2, coeffs, 0, sense)

    def rec(node) -> Var:
        if node[0] == "var":
            return leaf[node[1]]
        counter[0] += 1
        u = b.var(1, f"{tag}u{counter[0]}")
        gates.append(u)
        if node[0] == "not":
            a = rec(node[1])
            rhs_one(_acc((u, 1), (a, 1)), 1, "==")
        elif node[0] == "and":
            ins = [rec(x) for x in _chain(node, "and")]
            for a in ins:
                b.row(2, _acc((u, 1), (a, -1)), 0, "<=")
            rhs_one(_acc((u, 1), *((a, -1) for a in ins)), -(len(ins) - 1), ">=")
        else:
            ins = [rec(x) for x in _chain(node, "or")]
            for a in ins:
                b.row(2, _acc((u, 1), (a, -1)), 0, ">=")
            rhs_one(_acc((u, 1), *((a, -1) for a in ins)), 0, "<=")
        return u

    root = rec(f.root)
    b.row(2, {t: 1, root: -1}, 0, "==")
    v = []
    for i, w in enumerate(s + [t] + gates, start=1):
        vv = b.var(2, f"{tag}v{i}")
        v.append(vv)
        b.row(2, {vv: 1, w: -1}, 0, "<=")  # v <= w (already homogeneous)
        rhs_one({vv: 1, w: 1}, 1, "<=")  # v <= 1 - w, constant scales
    for x in s + [t] + gates + v:
        b.row(2, {x: 1}, 0, ">=")
        rhs_one({x: 1}, 1, "<=")
    return s, t, gates, v


def sat_unsat_attain(f1: Formula, f2: Formula, penalty: int = DEFAULT_PENALTY) -> GadgetInstance:
    """Bilevel instance with an optimal solution iff f1 is satisfiable and f2
    is unsatisfiable: a linking row pins copy 1's objective at -1, and copy 2
    is homogenized by a nonnegative scale variable, so a satisfiable f2 opens
    an unbounded scaling ray."""
    b = InstanceBuilder(2)
    scale = b.var(1, "scale")
    b.row(2, {scale: 1}, 0, ">=")
    s1, t1, u1, v1 = _emit_satblp_copy(b, f1, "a_", penalty, scale=None)
    s2, t2, u2, v2 = _emit_satblp_copy(b, f2, "b_", penalty, scale=scale)
    # copy 1's objective forced to -1 by a leader linking row: -t1 + pen sum v1 <= -1
    row = {t1: -1}
    for w in v1:
        row[w] = penalty
    b.row(1, row, -1, "<=")
    # leader objective: copy 2's (scaled) value
    b.obj(1, {t2: -1})
    b.obj(1, {w: penalty for w in v2})
    b.obj(2, {w: -1 for w in v1})
    b.obj(2, {w: -1 for w in v2})
    inst = b.build()
    roles = {
        "s1": s1, "t1": t1, "u1": u1, "v1": v1,
        "s2": s2, "t2": t2, "u2": u2, "v2": v2,
        "scale": scale,
    }
    varmap = _flatten_map(b, inst, roles)
    return GadgetInstance(
        instance=inst,
        varmap=varmap,
        provenance={"gadget": "sat_unsat", "f1": f1, "f2": f2, "penalty": penalty},
    )


# -- feasibility gadgets ---------------------------------------------------------


def pi_feasibility_gadget(h: Qbf, k: int, penalty: int = DEFAULT_PENALTY) -> GadgetInstance:
    """(k+1)-level no-linking instance, feasible iff h is NOT true.

    Wraps a value-{-1, 0} QBF gadget (qbf_to_klp with the pinned `one`
    subtracted from the top objective) in the scaling construction: a new
    second player owns the scale sigma >= 1 jointly with the old leader block
    and minimizes the old leader objective over the sigma-scaled feasible set.
    If h is true the inner value is -1 and the scaled infimum -sigma is
    unattained, emptying the argmin the new leader needs."""
    if h.k != k - 1:
        raise ValueError(f"need {k - 1} quantifier blocks for k = {k}")
    inner = qbf_to_klp(h, k, search=False, penalty=penalty)
    inst = inner.instance
    one_flat = inner.varmap["one"]
    shift = 2  # new flat order: dummy, sigma, then all inner variables
    width = inst.total_vars + shift
    rows_by_level = {}
    bottom = k + 1
    hrows = []
    for coeffs, rhs in inst.flat_rows(k):
        row = [ZERO, -rhs] + list(coeffs)  # rhs constant becomes -rhs * sigma
        hrows.append((row, ZERO))
    sigma_row = [ZERO] * width
    sigma_row[1] = ONE
    hrows.append((sigma_row, ONE))  # sigma >= 1
    dlo = [ZERO] * width
    dlo[0] = ONE
    hrows.append((dlo, ZERO))
    dup = [ZERO] * width
    dup[0] = -ONE
    hrows.append((dup, -ONE))
    rows_by_level[bottom] = hrows

    obj_by_level = {}
    inner_obj1 = list(inst.flat_objective(1))
    inner_obj1[one_flat] -= ONE  # value becomes -1 (true) / 0 (false)
    obj_by_level[2] = [ZERO, ZERO] + inner_obj1
    for l in range(2, k + 1):
        obj_by_level[l + 1] = [ZERO, ZERO] + list(inst.flat_objective(l))

    n = (1, 1 + inst.n[0]) + tuple(inst.n[1:])
    out = transforms._instance_from_flat(k + 1, n, rows_by_level, obj_by_level)

    def shift_map(v):
        if isinstance(v, list):
            return [shift_map(x) for x in v]
        if isinstance(v, dict):
            return {kk: shift_map(x) for kk, x in v.items()}
        return v + shift

    varmap = shift_map(inner.varmap)
    varmap["dummy"] = 0
    varmap["sigma"] = 1
    return GadgetInstance(
        instance=out,
        varmap=varmap,
        provenance={"gadget": "pi_feas", "qbf": h, "k": k + 1, "penalty": penalty},
    )


def _emit_feas5_copy(b: InstanceBuilder, h: Qbf, s1, one: Var, tag: str, penalty: int):
    """One decoupled block of the k=5 feasibility gadget: the QLP machinery
    for levels 2..5 (matrix encodes F; the level-4 player minimizes t, so t
    carries the truth of the remaining exists-forall chain) plus an embedded
    copy of the 4-level counterexample.  All rows go to level 5."""
    s2 = [b.var(2, f"{tag}s2_{i}") for i in range(1, len(h.blocks[1]) + 1)]
    s3 = [b.var(3, f"{tag}s3_{i}") for i in range(1, len(h.blocks[2]) + 1)]
    s4 = [b.var(4, f"{tag}s4_{i}") for i in range(1, len(h.blocks[3]) + 1)]
    t = b.var(4, f"{tag}t")
    leaf = {}
    for blk, svars in zip(h.blocks, [s1, s2, s3, s4]):
        for pos, gv in enumerate(blk):
            leaf[gv] = svars[pos]
    root, gates = _emit_circuit(b, h.matrix.root, leaf, 4, 5, f"{tag}p")
    b.row(5, {t: 1, root: -1}, 0, "==")
    r = _penalties(b, s4 + [t] + gates, 5, 5, f"{tag}r")
    q1, w1 = _level_penalty(b, s1, 5, f"{tag}1")
    q2, w2 = _level_penalty(b, s2, 5, f"{tag}2")
    q3, w3 = _level_penalty(b, s3, 5, f"{tag}3")
    # embedded 4-level counterexample, shifted one level down (top at level 2)
    x1 = b.var(2, f"{tag}x1")
    y = b.var(2, f"{tag}y")
    x2 = b.var(3, f"{tag}x2")
    x3 = b.var(4, f"{tag}x3")
    x4 = b.var(5, f"{tag}x4")
    b.row(5, {x2: 1}, 0, "==")
    b.row(5, {x4: 1, x3: -1}, 0, "<=")
    b.row(5, {x4: 1, x1: 1, x3: 1, one: -2}, 0, "<=")
    mine = (
        s2 + s3 + s4 + [t] + gates + r + [q1, q2, q3] + w1 + w2 + w3 + [x1, y, x2, x3, x4]
    )
    for x in mine:
        b.box(x)
    # objectives, merged level by level with the QLP theta chain
    b.obj(2, {y: 6, one: -3})
    b.obj(3, {t: 1, q3: 2, x3: -1})
    b.obj(4, {one: 1, t: -1, x4: 1})
    b.obj(4, {w: penalty for w in r})
    b.obj(5, {w: -1 for w in r})
    for ws in (w1, w2, w3):
        b.obj(5, {w: -1 for w in ws})
    b.obj(5, {x4: -1})
    return {
        "s2": s2, "s3": s3, "s4": s4, "t": t, "p": gates, "r": r,
        "q": [q1, q2, q3], "w": [w1, w2, w3],
        "x": [x1, x2, x3, x4], "y": y,
    }


def feas_gadget_k5(h: Qbf, penalty: int = DEFAULT_PENALTY) -> GadgetInstance:
    """5-level no-linking boxed instance, feasible iff the 4-block QBF h is
    true.  Two decoupled sub-gadgets hang below the shared leader block s1:
    the first empties exactly when s1 goes (grid-)fractional, the second
    exactly when H(s1) is false; both are tied to the leader only through the
    bottom-level coupling rows with the 6(y - 1/2) slack."""
    if h.k != 4:
        raise ValueError("feas_gadget_k5 needs a 4-block QBF")
    b = InstanceBuilder(5)
    s1 = [b.var(1, f"s1_{i}") for i in range(1, len(h.blocks[0]) + 1)]
    one = _pin_one(b, 5, 5)
    for x in s1 + [one]:
        b.box(x)
    da = _emit_feas5_copy(b, h, s1, one, "a_", penalty)
    db = _emit_feas5_copy(b, h, s1, one, "b_", penalty)
    # coupling rows, first copy: 6(y-1/2) >= -1 and >= x3 - x1 + q1 - 1
    b.row(5, {da["y"]: 6, one: -2}, 0, ">=")
    b.row(5, {da["y"]: 6, one: -2, da["x"][2]: -1, da["x"][0]: 1, da["q"][0]: -1}, 0, ">=")
    # second copy: 6(y-1/2) >= t + 2 q2 - 1 and >= x3 - x1
    b.row(5, {db["y"]: 6, one: -2, db["t"]: -1, db["q"][1]: -2}, 0, ">=")
    b.row(5, {db["y"]: 6, one: -3, db["x"][2]: -1, db["x"][0]: 1}, 0, ">=")
    inst = b.build()
    varmap = _flatten_map(b, inst, {"s1": s1, "one": one, "copy_a": da, "copy_b": db})
    return GadgetInstance(
        instance=inst,
        varmap=varmap,
        provenance={"gadget": "feas5", "qbf": h, "penalty": penalty},
    )
