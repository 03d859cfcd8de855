import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from latgauge.errors import SideTooLong
from latgauge.lattice import (
    Edge,
    Loop,
    TorusLattice,
    bfs_distance,
    enumerate_geometry,
    get_lattice,
    rectangular_loop,
    slab,
    torus_distance,
)


@pytest.mark.parametrize("d,L", [(1, 5), (2, 3), (2, 4), (3, 3), (4, 2)])
def test_counts(d, L):
    lat = TorusLattice(d, L)
    assert lat.n_vertices == L ** d
    assert lat.n_edges == d * L ** d
    assert lat.n_plaquettes == L ** d * d * (d - 1) // 2
    assert len(lat.plaquettes()) == lat.n_plaquettes
    assert len(set(lat.edges())) == lat.n_edges


def test_vertex_round_trip():
    lat = get_lattice(3, 4)
    for v in range(lat.n_vertices):
        assert lat.vertex_index(lat.vertex(v)) == v
    assert lat.vertex_index((5, -1, 4)) == lat.vertex_index((1, 3, 0))


def test_shift_table_matches_coordinates():
    lat = get_lattice(3, 3)
    for v in range(lat.n_vertices):
        x = lat.vertex(v)
        for mu in range(3):
            up = list(x)
            up[mu] = (up[mu] + 1) % 3
            assert lat.shift[v, mu, 0] == lat.vertex_index(up)
            assert lat.shift[lat.shift[v, mu, 0], mu, 1] == v


def test_plaquette_boundary_is_closed_and_consistent():
    lat = get_lattice(3, 3)
    for p, plaq in enumerate(lat.plaquettes()):
        word = plaq.boundary(lat.L)
        Loop(tuple(word), lat.L)  # raises if not closed
        assert [lat.edge_index(e) for e in word] == list(lat.plaq_edges[p])
        assert [e.orientation for e in word] == list(lat.plaq_sign[p])


@pytest.mark.parametrize("d,L", [(2, 3), (3, 3), (4, 3)])
def test_each_edge_in_2d_minus_2_plaquettes(d, L):
    lat = get_lattice(d, L)
    counts = np.bincount(lat.plaq_edges.ravel(), minlength=lat.n_edges)
    assert np.all(counts == 2 * (d - 1))
    geo = enumerate_geometry(lat)
    for e, row in enumerate(geo["edge_plaquettes"]):
        assert len(row) == 2 * (d - 1)
        for p, sign in row:
            k = list(lat.plaq_edges[p]).index(e)
            assert lat.plaq_sign[p, k] == sign


def test_l2_plaquettes_distinct_edges():
    # On L = 2 the +mu and -mu neighbors coincide, but each plaquette still uses four distinct links.
    lat = get_lattice(2, 2)
    for row in lat.plaq_edges:
        assert len(set(row.tolist())) == 4


def test_edge_reversal():
    e = Edge((0, 2), 1, 1)
    r = e.reversed(3)
    assert r == Edge((0, 0), 1, -1)
    assert r.reversed(3) == e
    lat = get_lattice(2, 3)
    assert lat.edge_index(e) == lat.edge_index(r)


def test_distance_examples():
    assert torus_distance(8, (0, 0), (7, 7)) == 2
    assert torus_distance(8, (0, 0), (4, 4)) == 8
    assert torus_distance(5, (0,), (3,)) == 2


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 3), st.integers(1, 6), st.data())
def test_distance_matches_bfs(d, L, data):
    pt = st.tuples(*[st.integers(0, L - 1)] * d)
    x, y = data.draw(pt), data.draw(pt)
    assert torus_distance(L, x, y) == bfs_distance(L, d, x, y)


def test_distance_symmetric_and_translation_invariant():
    L = 5
    for x, y, t in itertools.islice(itertools.product(itertools.product(range(L), repeat=2), repeat=3), 0, None, 37):
        assert torus_distance(L, x, y) == torus_distance(L, y, x)
        shifted = [(a + b) % L for a, b in zip(x, t)], [(a + b) % L for a, b in zip(y, t)]
        assert torus_distance(L, *shifted) == torus_distance(L, x, y)


class TestRectangles:
    def test_shape(self):
        lat = get_lattice(2, 8)
        loop = rectangular_loop(lat, (1, 2), (0, 1), 3, 2)
        assert len(loop) == 10 and loop.area == 6
        assert loop.edges[0].base == (1, 2)

    def test_single_plaquette_matches_boundary(self):
        lat = get_lattice(3, 4)
        loop = lat.rectangular_loop((1, 1, 1), (0, 2), 1, 1)
        plaq = [p for p in lat.plaquettes() if p.base == (1, 1, 1) and p.dirs == (0, 2)][0]
        assert list(loop.edges) == plaq.boundary(4)

    def test_side_limit(self):
        lat = get_lattice(2, 6)
        rectangular_loop(lat, (0, 0), (0, 1), 3, 3)
        with pytest.raises(SideTooLong):
            rectangular_loop(lat, (0, 0), (0, 1), 4, 1)

    def test_invalid(self):
        lat = get_lattice(2, 6)
        with pytest.raises(ValueError):
            rectangular_loop(lat, (0, 0), (0, 0), 1, 1)
        with pytest.raises(ValueError):
            rectangular_loop(lat, (0, 0), (0, 1), 0, 1)

    def test_json_round_trip(self):
        lat = get_lattice(3, 6)
        loop = rectangular_loop(lat, (5, 0, 3), (2, 0), 2, 3)
        back = Loop.from_json(loop.to_json(), 6)
        assert back.edges == loop.edges

    def test_open_path_rejected(self):
        with pytest.raises(ValueError):
            Loop((Edge((0, 0), 0, 1),), 4)


class TestSlab:
    def test_tables(self):
        lat = get_lattice(3, 4)
        sl = slab(lat, 3)
        assert sl.m == 2 and sl.slice == get_lattice(2, 4)
        for s in range(sl.slice.n_vertices):
            x = sl.slice.vertex(s)
            assert sl.vertical_edge_of[s] == lat.edge_index(Edge(x + (3,), 2, 1))
            for mu in range(2):
                assert sl.bottom_edge_of[s, mu] == lat.edge_index(Edge(x + (3,), mu, 1))
                assert sl.top_edge_of[s, mu] == lat.edge_index(Edge(x + (0,), mu, 1))

    def test_partitions_slab_edges(self):
        lat = get_lattice(2, 5)
        sl = lat.slab(1)
        used = np.concatenate([sl.vertical_edge_of, sl.bottom_edge_of.ravel(), sl.top_edge_of.ravel()])
        assert len(set(used.tolist())) == used.size

    def test_bad_height(self):
        with pytest.raises(ValueError):
            slab(get_lattice(2, 4), 4)
        with pytest.raises(ValueError):
            slab(get_lattice(1, 4), 0)


def test_cache_shares_tables():
    assert get_lattice(2, 7) is get_lattice(2, 7)


def test_invalid_lattice():
    with pytest.raises(ValueError):
        TorusLattice(0, 3)


@pytest.mark.parametrize("d,L,n_edges,n_plaq", [(2, 4, 32, 16), (3, 4, 192, 192)])
def test_enumerate_examples(d, L, n_edges, n_plaq):
    geo = enumerate_geometry(get_lattice(d, L))
    assert len(geo["edges"]) == n_edges and len(geo["plaquettes"]) == n_plaq


def test_l2_incidence_brute_force():
    # Scan boundary words directly instead of using the precomputed incidence table.
    lat = get_lattice(2, 2)
    hits = {e: 0 for e in range(lat.n_edges)}
    for plaq in lat.plaquettes():
        for e in plaq.boundary(2):
            hits[lat.edge_index(e)] += 1
    assert set(hits.values()) == {2}


def test_vertical_plaquettes_use_one_a_one_b_two_vertical():
    lat = get_lattice(3, 4)
    sl = lat.slab(1)
    a, b = set(sl.bottom_edge_of.ravel().tolist()), set(sl.top_edge_of.ravel().tolist())
    vert = set(sl.vertical_edge_of.tolist())
    count = 0
    for plaq in lat.plaquettes():
        if plaq.dirs[1] != 2 or plaq.base[2] != 1:
            continue
        idx = [lat.edge_index(e) for e in plaq.boundary(4)]
        assert sum(i in a for i in idx) == 1 and sum(i in b for i in idx) == 1
        assert sum(i in vert for i in idx) == 2
        count += 1
    assert count == 2 * 4 ** 2


def test_slice_sizes():
    sl = slab(get_lattice(2, 4), 0)
    assert sl.slice.n_vertices == 4 and sl.slice.n_edges == 4
    sl = slab(get_lattice(3, 4), 0)
    assert sl.slice.n_vertices == 16 and sl.slice.n_edges == 32


def test_triangle_inequality():
    rng = np.random.default_rng(0)
    for _ in range(500):
        x, y, z = rng.integers(0, 6, (3, 3))
        assert torus_distance(6, x, z) <= torus_distance(6, x, y) + torus_distance(6, y, z)
    assert torus_distance(8, (0, 0), (7, 0)) == 1
    assert torus_distance(8, (3, 4), (3, 4)) == 0


def test_rectangle_walk_replay():
    lat = get_lattice(2, 6)
    loop = rectangular_loop(lat, (5, 5), (1, 0), 3, 2)
    pos = loop.edges[0].base
    for e in loop.edges:
        assert e.base == pos
        pos = tuple((c + (e.orientation if k == e.dir else 0)) % 6 for k, c in enumerate(pos))
    assert pos == loop.edges[0].base
