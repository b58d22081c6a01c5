import numpy as np
import pytest
from scipy.optimize import linprog

from helpers import economy_31, g1, g2, hub_for, random_route_unique_path
from ramex.errors import DimensionMismatch, DimensionTooLarge, IncompatiblePair
from ramex.plan_polytope import (
    build_constraints,
    compatibility_check,
    interior_point_test,
    polytope_dimension_formula,
    polytope_dimension_rank,
    vertices,
)
from ramex.economy import demand_profile
from ramex.transport_graph import AtomicMeasure, TransportPath, hub_path, route_matrix

Q_BAR = np.array([[0.5, 0.0], [0.0, 0.5]])
SWAP = np.array([[0.0, 0.5], [0.5, 0.0]])
QUARTER = np.full((2, 2), 0.25)


def _row_set(cs):
    return {(tuple(row.astype(int)), round(float(b), 12)) for row, b in zip(cs.A, cs.rhs)}


def test_trunk_equations():
    cs = build_constraints(g2(), Q_BAR)
    assert cs.zero_routes == ()
    expected = {
        ((1, 1, 0, 0), 0.5),
        ((0, 0, 1, 1), 0.5),
        ((1, 0, 1, 0), 0.5),
        ((0, 1, 0, 1), 0.5),
        ((1, 1, 1, 1), 1.0),
    }
    assert _row_set(cs) == expected


def test_disjoint_pairing_equations():
    cs = build_constraints(g1(), Q_BAR)
    assert set(cs.zero_routes) == {(0, 1), (1, 0)}
    assert _row_set(cs) == {((1, 0, 0, 0), 0.5), ((0, 0, 0, 1), 0.5)}


def test_hub_equations_are_the_marginals():
    cs = build_constraints(hub_for(economy_31()), Q_BAR)
    assert _row_set(cs) == {((1, 1, 0, 0), 0.5), ((0, 0, 1, 1), 0.5), ((1, 0, 1, 0), 0.5), ((0, 1, 0, 1), 0.5)}


def test_incompatible_reference_rejected():
    with pytest.raises(IncompatiblePair):
        build_constraints(g1(), SWAP)


def test_compatibility_examples():
    assert compatibility_check(g2(), Q_BAR).compatible
    assert compatibility_check(g2(), SWAP).compatible
    rep = compatibility_check(g1(), SWAP)
    assert not rep.compatible and rep.max_residual == pytest.approx(0.5)


def test_compatibility_shape_mismatch():
    with pytest.raises(DimensionMismatch):
        compatibility_check(g2(), np.zeros((3, 2)))


def test_dimension_examples():
    for G, d in ((g1(), 0), (g2(), 1), (hub_for(economy_31()), 1)):
        cs = build_constraints(G, Q_BAR)
        assert polytope_dimension_rank(cs) == d
        assert polytope_dimension_formula(G) == d


def test_hub_dimension_is_product():
    rng = np.random.default_rng(0)
    for k in (2, 3):
        for l in (2, 3):
            plan = rng.uniform(0.1, 1, (k, l))
            plan /= plan.sum()
            a = AtomicMeasure(tuple(((0.0, float(i)), float(plan[i].sum())) for i in range(k)))
            b = AtomicMeasure(tuple(((4.0, float(j)), float(plan[:, j].sum())) for j in range(l)))
            G = hub_path(a, b, (2.0, 0.5))
            cs = build_constraints(G, plan)
            assert polytope_dimension_rank(cs) == (k - 1) * (l - 1) == polytope_dimension_formula(G)


def test_rank_equals_formula_on_random_paths():
    rng = np.random.default_rng(1)
    for _ in range(60):
        k, l = rng.integers(1, 5, 2)
        G, plan = random_route_unique_path(rng, int(k), int(l), int(rng.integers(0, 7)))
        cs = build_constraints(G, plan)
        assert polytope_dimension_rank(cs) == polytope_dimension_formula(G)


def test_reference_satisfies_its_constraints():
    rng = np.random.default_rng(2)
    for _ in range(30):
        G, plan = random_route_unique_path(rng, 3, 3, 3)
        cs = build_constraints(G, plan)
        M, b = cs.equalities()
        assert np.allclose(M @ plan.ravel(), b, atol=1e-12)


def test_edge_equations_imply_marginals():
    rng = np.random.default_rng(3)
    for _ in range(30):
        G, plan = random_route_unique_path(rng, 3, 2, 3)
        cs = build_constraints(G, plan)
        N = cs.hull_basis()
        for _ in range(5):
            q = (plan.ravel() + N @ rng.normal(size=N.shape[1])).reshape(plan.shape)
            assert np.allclose(q.sum(axis=1), plan.sum(axis=1), atol=1e-10)
            assert np.allclose(q.sum(axis=0), plan.sum(axis=0), atol=1e-10)


def test_disjoint_cross_routes_give_dimension_zero():
    rng = np.random.default_rng(4)
    # a source-sink matching with private edges: cross routes never meet
    for _ in range(10):
        k = int(rng.integers(1, 5))
        verts = {f"x{i + 1}": (0.0, float(i)) for i in range(k)}
        verts.update({f"y{i + 1}": (1.0 + rng.uniform(), float(i)) for i in range(k)})
        edges = {(f"x{i + 1}", f"y{i + 1}"): 1 / k for i in range(k)}
        G = TransportPath(verts, edges, tuple((f"x{i + 1}", 1 / k) for i in range(k)), tuple((f"y{i + 1}", 1 / k) for i in range(k)))
        cs = build_constraints(G, np.eye(k) / k)
        assert polytope_dimension_rank(cs) == 0


def test_interior_point_examples():
    assert not interior_point_test(build_constraints(g2(), Q_BAR))
    assert interior_point_test(build_constraints(g2(plan=QUARTER), QUARTER))
    assert interior_point_test(build_constraints(g1(), Q_BAR))


def test_vertex_examples():
    vs = vertices(build_constraints(g2(), Q_BAR))
    assert len(vs) == 2
    assert any(np.allclose(v, Q_BAR) for v in vs) and any(np.allclose(v, SWAP) for v in vs)
    vs = vertices(build_constraints(g1(), Q_BAR))
    assert len(vs) == 1 and np.allclose(vs[0], Q_BAR)
    vs = vertices(build_constraints(hub_for(economy_31()), Q_BAR))
    assert len(vs) == 2


def test_vertices_are_compatible_and_contain_reference():
    rng = np.random.default_rng(5)
    for _ in range(15):
        G, plan = random_route_unique_path(rng, 3, 3, 2)
        cs = build_constraints(G, plan)
        if cs.hull_basis().shape[1] > 4:
            continue
        vs = vertices(cs)
        for v in vs:
            assert compatibility_check(G, v).compatible and v.min() >= 0
        # q_bar is a convex combination of the vertices
        V = np.array([v.ravel() for v in vs]).T
        A_eq = np.vstack([V, np.ones(len(vs))])
        b_eq = np.concatenate([plan.ravel(), [1.0]])
        res = linprog(np.zeros(len(vs)), A_eq=A_eq, b_eq=b_eq, bounds=[(0, None)] * len(vs), method="highs")
        assert res.status == 0


def test_vertex_enumeration_cap():
    plan = np.full((4, 4), 1 / 16)
    a = AtomicMeasure(tuple(((0.0, float(i)), 0.25) for i in range(4)))
    b = AtomicMeasure(tuple(((4.0, float(j)), 0.25) for j in range(4)))
    cs = build_constraints(hub_path(a, b, (2.0, 0.5)), plan)
    with pytest.raises(DimensionTooLarge):
        vertices(cs, d_max=6)


def test_example_economy_profile_is_compatible_with_both_paths():
    q = demand_profile(economy_31()).plan
    assert compatibility_check(g1(), q).compatible and compatibility_check(g2(), q).compatible
    assert route_matrix(g2()).count == 4
