"""Brute-force LP oracle: enumerate candidate vertices from all row subsets.

Only valid when the feasible set has at least one vertex whenever it is
nonempty (true when the optimum is finite and the rows pin all variables,
e.g. boxed instances); tests feed it accordingly.
"""

import itertools

from mlpkit.linalg import solve_square
from mlpkit.rat import ZERO, mpq


def brute_force_lp(n, rows, objective):
    """Returns ('infeasible',), ('unbounded',) or ('optimal', value, point).

    Decides unboundedness by re-running on a huge bounding box and checking
    whether the optimum sits on it.
    """
    BIG = mpq(10) ** 9
    boxed = list(rows)
    for j in range(n):
        e = [ZERO] * n
        e[j] = mpq(1)
        boxed.append((list(e), -BIG))
        e2 = [ZERO] * n
        e2[j] = mpq(-1)
        boxed.append((list(e2), -BIG))

    best = None
    best_x = None
    m = len(boxed)
    for subset in itertools.combinations(range(m), n):
        A = [boxed[i][0] for i in subset]
        rhs = [boxed[i][1] for i in subset]
        x = solve_square(A, rhs)
        if x is None:
            continue
        ok = True
        for coeffs, r in boxed:
            acc = ZERO
            for j in range(n):
                if coeffs[j]:
                    acc += coeffs[j] * x[j]
            if acc < r:
                ok = False
                break
        if not ok:
            continue
        val = sum((objective[j] * x[j] for j in range(n) if objective[j]), ZERO)
        if best is None or val < best:
            best = val
            best_x = x
    if best is None:
        return ("infeasible",)
    if any(abs(v) >= BIG for v in best_x):
        return ("unbounded",)
    return ("optimal", best, best_x)
