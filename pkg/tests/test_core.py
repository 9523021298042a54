import random

import pytest

from mlpkit.build import InstanceBuilder
from mlpkit.core import (
    MlpInstance,
    Point,
    check_conditions,
    encoding_size,
    objective_at,
    residuals_at,
)
from mlpkit.mlp1 import Mlp1Error, dump_instance, load_instance, load_instance_and_points, dump_point
from mlpkit.rat import rat


def tiny_bilevel():
    # leader min -x2, follower min x2 s.t. 0 <= x2 <= x1, 0 <= x1 <= 1
    b = InstanceBuilder(2)
    x1 = b.var(1, "x1")
    x2 = b.var(2, "x2")
    b.row(2, {x2: 1}, 0)
    b.row(2, {x1: 1, x2: -1}, 0)
    b.row(2, {x1: 1}, 0)
    b.row(2, {x1: 1}, 1, "<=")
    b.obj(1, {x2: -1})
    b.obj(2, {x2: 1})
    return b.build()


def test_builder_shapes():
    inst = tiny_bilevel()
    assert inst.k == 2
    assert inst.n == (1, 1)
    assert inst.m == (0, 4)
    assert inst.total_vars == 2


def test_residuals_trivial_cases():
    b = InstanceBuilder(1)
    x = b.var(1, "x")
    b.row(1, {x: 1}, 0)
    inst = b.build()
    assert residuals_at(inst, Point(((0,),)), 1) == (0,)

    b = InstanceBuilder(1)
    x = b.var(1, "x")
    b.row(1, {x: 1}, 1)
    inst = b.build()
    assert residuals_at(inst, Point(((3,),)), 1) == (2,)

    b = InstanceBuilder(1)
    x = b.var(1, "x")
    b.row(1, {x: -1}, 0)
    inst = b.build()
    res = residuals_at(inst, Point(((1,),)), 1)
    assert res == (-1,) and res[0] < 0


def test_objective_cases():
    b = InstanceBuilder(1)
    x = b.var(1, "x")
    inst = b.build()
    assert objective_at(inst, Point(((5,),)), 1) == 0

    b = InstanceBuilder(1)
    x = b.var(1, "x")
    b.obj(1, {x: 1})
    inst = b.build()
    assert objective_at(inst, Point(((5,),)), 1) == 5

    b = InstanceBuilder(2)
    x1 = b.var(1, "x1")
    x2 = b.var(2, "x2")
    b.obj(1, {x1: 1, x2: -2})
    inst = b.build()
    assert objective_at(inst, Point(((1,), (1,))), 1) == -1


def test_linearity_of_evaluation():
    rng = random.Random(3)
    b = InstanceBuilder(2)
    xs = [b.var(1, "u1"), b.var(1, "u2"), b.var(2, "w1")]
    b.row(2, {xs[0]: 2, xs[1]: -1, xs[2]: 3}, 1)
    b.row(2, {xs[0]: -1, xs[2]: 1}, 0)
    b.obj(1, {xs[0]: 5, xs[2]: -7})
    inst = b.build()
    for _ in range(50):
        p = Point(((rat(rng.randint(-9, 9), rng.randint(1, 9)), rat(rng.randint(-9, 9))), (rat(rng.randint(-9, 9), 2),)))
        q = Point(((rat(rng.randint(-9, 9)), rat(rng.randint(-9, 9), 3)), (rat(rng.randint(-9, 9)),)))
        a = rat(rng.randint(-5, 5), rng.randint(1, 7))
        mix = Point(
            tuple(
                tuple(a * pv + (1 - a) * qv for pv, qv in zip(pl, ql))
                for pl, ql in zip(p.x, q.x)
            )
        )
        for level in (1, 2):
            rp = residuals_at(inst, p, level)
            rq = residuals_at(inst, q, level)
            rm = residuals_at(inst, mix, level)
            assert all(m == a * u + (1 - a) * v for m, u, v in zip(rm, rp, rq))
        assert objective_at(inst, mix, 1) == a * objective_at(inst, p, 1) + (1 - a) * objective_at(inst, q, 1)


def test_check_conditions():
    inst = tiny_bilevel()
    rep = check_conditions(inst)
    assert rep.c1  # no rows above the last level
    assert not rep.c2  # x2 lacks an upper-bound row
    assert rep.c3

    # C1 violation
    b = InstanceBuilder(2)
    x1 = b.var(1, "x1")
    x2 = b.var(2, "x2")
    b.row(1, {x1: 1}, 0)
    inst2 = b.build()
    assert not check_conditions(inst2).c1

    # C3 violation: entry n+1 with n = 2
    b = InstanceBuilder(2)
    x1 = b.var(1, "x1")
    x2 = b.var(2, "x2")
    b.row(2, {x1: 3}, 0)
    inst3 = b.build()
    assert not check_conditions(inst3).c3

    # fully boxed instance satisfies C2
    b = InstanceBuilder(2)
    x1 = b.var(1, "x1")
    x2 = b.var(2, "x2")
    b.box(x1)
    b.box(x2)
    inst4 = b.build()
    rep4 = check_conditions(inst4)
    assert rep4.c1 and rep4.c2 and rep4.c3


def test_encoding_size_instance():
    inst = tiny_bilevel()
    assert encoding_size(inst) > 0
    assert encoding_size(rat(3, 7)) == 6
    assert encoding_size([rat(1), rat(2)]) > encoding_size(rat(1))


def test_mlp1_roundtrip():
    inst = tiny_bilevel()
    text = dump_instance(inst)
    back = load_instance(text)
    assert back.k == inst.k and back.n == inst.n and back.m == inst.m
    assert back.A == inst.A and back.b == inst.b and back.c == inst.c


def test_mlp1_point_roundtrip():
    inst = tiny_bilevel()
    p = Point(((rat(1, 2),), (rat(0),)))
    text = dump_instance(inst) + dump_point(p)
    back, point = load_instance_and_points(text)
    assert point == p


def test_mlp1_rejects_duplicates_and_noncanonical():
    inst = tiny_bilevel()
    text = dump_instance(inst)
    dup = text + "b 2 : 0 0 0 -1\n"
    with pytest.raises(Mlp1Error):
        load_instance(dup)
    bad = text.replace("c 1 2 : -1", "c 1 2 : -2/4")
    with pytest.raises(Mlp1Error):
        load_instance(bad)


def test_immutability():
    inst = tiny_bilevel()
    with pytest.raises(Exception):
        inst.k = 3
