import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import graphings as gr
from graphings.errors import ResourceCapError
from graphings.graphing import boundary_mass, edges_to_csv, graphing_from_json, graphing_to_json

from conftest import complete_graphing, random_graphing


def test_build_rotation_is_cycle():
    g = gr.rotation_graphing(4, 1)
    assert g.edges.tolist() == [[0, 1], [0, 3], [1, 2], [2, 3]]


def test_symmetrization_idempotent():
    s = gr.FiniteMeasuredSpace.uniform(5)
    phi = gr.partial_isomorphism(s, list(range(5)), [(i + 1) % 5 for i in range(5)])
    g1 = gr.build_graphing(s, [phi])
    g2 = gr.build_graphing(s, [phi, gr.inverse(phi)])
    assert np.array_equal(g1.edges, g2.edges)


def test_overlapping_generator_graphs_deduplicate():
    s = gr.FiniteMeasuredSpace.uniform(6)
    f = gr.partial_isomorphism(s, [0, 1, 2], [1, 2, 3])
    h = gr.partial_isomorphism(s, [1, 2, 4], [2, 3, 5])
    g = gr.build_graphing(s, [f, h])
    expected = set()
    for phi in (f, h):
        for d, i in zip(phi.domain, phi.image):
            expected.add((min(int(d), int(i)), max(int(d), int(i))))
    assert {tuple(e) for e in g.edges.tolist()} == expected
    assert g.edge_count == len(expected)


def test_build_rejects_out_of_range_generator():
    s = gr.FiniteMeasuredSpace.uniform(3)
    other = gr.FiniteMeasuredSpace.uniform(5)
    phi = gr.partial_isomorphism(other, [0, 4], [1, 2])
    with pytest.raises(ValueError):
        gr.build_graphing(s, [phi])


def test_bfs_distance_examples():
    g = gr.rotation_graphing(8, 1)
    assert gr.bfs_distance(g, 3, 3) == 0
    assert gr.bfs_distance(g, 0, 5) == 3
    two_cycles = gr.rotation_graphing(6, 2)  # two disjoint triangles
    assert gr.bfs_distance(two_cycles, 0, 1) == math.inf
    with pytest.raises(ValueError):
        gr.bfs_distance(g, 0, 99)


def test_boundary_examples():
    g = gr.rotation_graphing(8, 1)
    assert gr.boundary(g, []) == ()
    assert gr.boundary(g, range(8)) == ()
    assert gr.boundary(g, [0, 1, 2]) == (3, 7)
    assert boundary_mass(g, [0, 1, 2]) == pytest.approx(0.25, abs=1e-12)
    k5 = complete_graphing(5)
    assert gr.boundary(k5, [0]) == (1, 2, 3, 4)


def test_ball_examples():
    g = gr.rotation_graphing(8, 1)
    assert gr.ball(g, [2, 3], 0) == (2, 3)
    assert gr.ball(g, [0], 2) == (0, 1, 2, 6, 7)
    assert gr.ball(g, [0], 10) == tuple(range(8))  # saturates the component


def test_boundary_is_sphere_of_radius_one():
    rng = np.random.default_rng(5)
    for _ in range(20):
        g = random_graphing(rng)
        atoms = [int(a) for a in rng.choice(g.atom_count, size=2, replace=False)]
        b = set(gr.boundary(g, atoms))
        ball1 = set(gr.ball(g, atoms, 1))
        assert b == ball1 - set(atoms)
        assert not b & set(atoms)


@given(st.integers(min_value=0, max_value=10**6))
@settings(max_examples=30, deadline=None)
def test_metric_axioms_random(seed):
    rng = np.random.default_rng(seed)
    g = random_graphing(rng, max_atoms=9)
    n = g.atom_count
    dist = [[gr.bfs_distance(g, x, y) for y in range(n)] for x in range(n)]
    for x in range(n):
        assert dist[x][x] == 0
        for y in range(n):
            assert dist[x][y] == dist[y][x]
            if x != y:
                assert dist[x][y] > 0
            for z in range(n):
                assert dist[x][z] <= dist[x][y] + dist[y][z]


def test_word_family_r0_is_identity():
    g = gr.rotation_graphing(6, 1)
    fam = gr.word_family(g, 0)
    assert len(fam) == 1
    assert fam[0].mapping() == {i: i for i in range(6)}


def test_word_family_cycle_words():
    g = gr.rotation_graphing(8, 1)
    fam = gr.word_family(g, 2)
    assert len(fam) == 5  # id, r, r^-1, r^2, r^-2
    actions = {w.action_key() for w in fam}
    expected = set()
    for k in (-2, -1, 0, 1, 2):
        expected.add(tuple((x, (x + k) % 8) for x in range(8)))
    assert actions == expected


def test_word_family_involution_pair():
    s = gr.FiniteMeasuredSpace.uniform(6)
    a = gr.partial_isomorphism(s, [0, 1, 2, 3, 4, 5], [1, 0, 3, 2, 5, 4])
    b = gr.partial_isomorphism(s, [0, 1, 2, 3, 4, 5], [5, 2, 1, 4, 3, 0])
    g = gr.build_graphing(s, [a, b])
    fam = gr.word_family(g, 2)
    # brute force over spellings, deduplicated by action: id, a, b, ab, ba
    maps = {tuple(range(6)): None}
    amap, bmap = a.mapping(), b.mapping()
    for w1 in (amap, bmap):
        maps[tuple(w1[i] for i in range(6))] = None
        for w2 in (amap, bmap):
            maps[tuple(w2[w1[i]] for i in range(6))] = None
    assert len(fam) == len(maps) == 5


def test_word_family_cap_error_names_cap():
    g = gr.rotation_graphing(32, 1)
    with pytest.raises(ResourceCapError) as err:
        gr.word_family(g, 8, cap=5)
    assert "5" in str(err.value)


def test_word_family_realizes_short_distances():
    rng = np.random.default_rng(11)
    for _ in range(10):
        g = random_graphing(rng, max_atoms=12)
        r = 3
        fam = gr.word_family(g, r, cap=200_000)
        reach = {}
        for w in fam:
            for d, i in zip(w.domain, w.image):
                reach.setdefault(int(d), set()).add(int(i))
        for x in range(g.atom_count):
            for y in range(g.atom_count):
                d = gr.bfs_distance(g, x, y)
                if d != math.inf and d <= r:
                    assert y in reach.get(x, set())


def test_degree_report_cycle():
    g = gr.rotation_graphing(4, 1)
    rep = gr.degree_report(g)
    assert rep.max_degree == 2
    # h(K) integrates the per-atom edge count: 4 atoms x 0.25 mass x degree 2.
    assert rep.horizontal_mass == pytest.approx(2.0, abs=1e-12)
    assert rep.vertical_mass == pytest.approx(rep.horizontal_mass, abs=1e-12)
    assert rep.ulb_constant == pytest.approx(1.0, abs=1e-12)


def test_degree_report_complete_graph():
    n = 6
    rep = gr.degree_report(complete_graphing(n))
    assert rep.max_degree == n - 1
    assert rep.horizontal_mass == pytest.approx(n - 1, abs=1e-12)


def test_degree_report_weighted_triangle():
    s = gr.make_space([0.5, 0.25, 0.25])
    tri = gr.build_graphing(
        s, [gr.partial_isomorphism(s, [0, 1, 2], [1, 2, 0])]
    )
    rep = gr.degree_report(tri)
    assert rep.ulb_constant == pytest.approx(2.0, abs=1e-12)


def test_mass_balance_on_random_graphings():
    rng = np.random.default_rng(17)
    for _ in range(20):
        g = random_graphing(rng)
        rep = gr.degree_report(g)
        w = g.space.weights
        deg = g.degrees()
        assert rep.horizontal_mass == pytest.approx(float((w * deg).sum()), abs=1e-12)
        assert abs(rep.horizontal_mass - rep.vertical_mass) <= 1e-12


def test_graphing_json_roundtrip_and_csv():
    g = gr.rotation_graphing(5, 2)
    data = graphing_to_json(g)
    g2 = graphing_from_json(data)
    assert np.array_equal(g.edges, g2.edges)
    assert np.allclose(g.space.weights, g2.space.weights)
    csv = edges_to_csv(g)
    lines = csv.strip().split("\n")
    assert lines[0] == "x,y"
    assert len(lines) == g.edge_count + 1
    for line in lines[1:]:
        x, y = map(int, line.split(","))
        assert x < y
