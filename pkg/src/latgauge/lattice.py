"""Geometry of the periodic lattice: vertices, edges, plaquettes, loops, slabs.

Vertices are indexed lexicographically with the first coordinate most
significant.  Positively oriented edges are indexed ``v * d + mu``;
plaquettes ``(v, mu, nu)`` with ``mu < nu`` are traversed +mu, +nu, -mu, -nu.
"""
from __future__ import annotations

import functools
import itertools
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import SideTooLong


@dataclass(frozen=True)
class Edge:
    base: tuple
    dir: int
    orientation: int = 1

    @property
    def positive(self) -> bool:
        return self.orientation == 1

    def reversed(self, L: int) -> "Edge":
        """Same link traversed the other way (tail and head swapped)."""
        if self.orientation == 1:
            head = list(self.base)
            head[self.dir] = (head[self.dir] + 1) % L
            return Edge(tuple(head), self.dir, -1)
        tail = list(self.base)
        tail[self.dir] = (tail[self.dir] - 1) % L
        return Edge(tuple(tail), self.dir, 1)

    def tail(self, L: int) -> tuple:
        return self.base

    def head(self, L: int) -> tuple:
        return _shift(self.base, self.dir, self.orientation, L)

    def to_json(self):
        return [list(self.base), self.dir, self.orientation]

    @classmethod
    def from_json(cls, obj):
        base, d, o = obj
        return cls(tuple(int(b) for b in base), int(d), int(o))


# Oriented-edge convention: ``base`` is the tail of the traversal.  A negatively
# oriented edge (base b, dir mu, -1) runs from b to b - mu and is the inverse of
# the positive link based at b - mu.


def _shift(x, mu, step, L):
    y = list(x)
    y[mu] = (y[mu] + step) % L
    return tuple(y)


@dataclass(frozen=True)
class Plaquette:
    base: tuple
    dirs: tuple

    def boundary(self, L: int) -> list[Edge]:
        mu, nu = self.dirs
        x = self.base
        x_mu = _shift(x, mu, 1, L)
        x_munu = _shift(x_mu, nu, 1, L)
        x_nu = _shift(x, nu, 1, L)
        return [Edge(x, mu, 1), Edge(x_mu, nu, 1), Edge(x_munu, mu, -1), Edge(x_nu, nu, -1)]


@dataclass(frozen=True)
class Loop:
    edges: tuple
    L: int
    R: int | None = None
    T: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "edges", tuple(self.edges))
        if not self.edges:
            raise ValueError("a loop needs at least one edge")
        for a, b in zip(self.edges, self.edges[1:] + self.edges[:1]):
            if a.head(self.L) != b.base:
                raise ValueError("loop edges do not chain head-to-tail")

    def __len__(self):
        return len(self.edges)

    @property
    def area(self) -> int | None:
        return None if self.R is None else self.R * self.T

    def to_json(self):
        return [e.to_json() for e in self.edges]

    @classmethod
    def from_json(cls, obj, L: int) -> "Loop":
        return cls(tuple(Edge.from_json(e) for e in obj), L)


class TorusLattice:
    """The d-dimensional discrete torus of side L with precomputed tables.

    Attributes
    ----------
    coords : (V, d) int array of vertex coordinates.
    shift : (V, d, 2) int array; ``shift[v, mu, 0]`` is v + mu, ``[..., 1]`` is v - mu.
    plaq_edges : (P, 4) edge indices of each plaquette's boundary word.
    plaq_sign : (P, 4) +1/-1 traversal orientation.
    edge_plaqs : (E, 2(d-1), 2) rows of (plaquette index, position in word).
    """

    def __init__(self, d: int, L: int):
        if d < 1 or L < 1:
            raise ValueError("need d >= 1 and L >= 1")
        self.d = int(d)
        self.L = int(L)
        self.shape = (self.L,) * self.d
        self.n_vertices = self.L ** self.d
        self.n_edges = self.d * self.n_vertices
        self.n_plaquettes = self.n_vertices * self.d * (self.d - 1) // 2
        self.coords = np.array(list(itertools.product(range(self.L), repeat=self.d)), dtype=np.int64).reshape(
            self.n_vertices, self.d)
        strides = self.L ** np.arange(self.d - 1, -1, -1)
        self._strides = strides
        shift = np.empty((self.n_vertices, self.d, 2), dtype=np.int64)
        for mu in range(self.d):
            for s, step in enumerate((1, -1)):
                c = self.coords.copy()
                c[:, mu] = (c[:, mu] + step) % self.L
                shift[:, mu, s] = c @ strides
        self.shift = shift
        self._build_plaquettes()

    def __repr__(self):
        return f"TorusLattice(d={self.d}, L={self.L})"

    def __eq__(self, other):
        return isinstance(other, TorusLattice) and (self.d, self.L) == (other.d, other.L)

    def __hash__(self):
        return hash((self.d, self.L))

    def __reduce__(self):
        return (TorusLattice, (self.d, self.L))

    def vertex_index(self, x) -> int:
        return int(np.asarray(x, dtype=np.int64) % self.L @ self._strides)

    def vertex(self, v: int) -> tuple:
        return tuple(int(c) for c in self.coords[v])

    def edge_index(self, e: Edge) -> int:
        """Index of the positive link underlying an oriented edge."""
        if e.orientation == 1:
            return self.vertex_index(e.base) * self.d + e.dir
        tail = _shift(e.base, e.dir, -1, self.L)
        return self.vertex_index(tail) * self.d + e.dir

    def edges(self) -> list[Edge]:
        return [Edge(self.vertex(v), mu, 1) for v in range(self.n_vertices) for mu in range(self.d)]

    def plaquettes(self) -> list[Plaquette]:
        return [Plaquette(self.vertex(v), (mu, nu)) for v, mu, nu in self._plaq_keys]

    def _build_plaquettes(self):
        d = self.d
        keys = [(v, mu, nu) for v in range(self.n_vertices) for mu in range(d) for nu in range(mu + 1, d)]
        self._plaq_keys = keys
        pe = np.empty((len(keys), 4), dtype=np.int64)
        ps = np.tile(np.array([1, 1, -1, -1], dtype=np.int64), (len(keys), 1))
        for p, (v, mu, nu) in enumerate(keys):
            v_mu = self.shift[v, mu, 0]
            v_nu = self.shift[v, nu, 0]
            pe[p] = (v * d + mu, v_mu * d + nu, v_nu * d + mu, v * d + nu)
        self.plaq_edges = pe
        self.plaq_sign = ps
        inc = [[] for _ in range(self.n_edges)]
        for p in range(len(keys)):
            for k in range(4):
                inc[pe[p, k]].append((p, k))
        width = 2 * (d - 1)
        self.edge_plaqs = np.array(inc, dtype=np.int64).reshape(self.n_edges, width, 2) if width else \
            np.zeros((self.n_edges, 0, 2), dtype=np.int64)

    # geometry queries -------------------------------------------------

    def distance(self, x, y) -> int:
        return torus_distance(self.L, x, y)

    def rectangular_loop(self, corner, axes, R: int, T: int) -> Loop:
        return rectangular_loop(self, corner, axes, R, T)

    def slab(self, k: int) -> "SlabGeometry":
        return slab(self, k)


@functools.lru_cache(maxsize=64)
def get_lattice(d: int, L: int) -> TorusLattice:
    """Shared immutable geometry tables per (d, L)."""
    return TorusLattice(d, L)


def enumerate_geometry(lattice: TorusLattice) -> dict:
    """Edge list, plaquette list and edge-to-plaquette incidence."""
    return {
        "edges": lattice.edges(),
        "plaquettes": lattice.plaquettes(),
        "edge_plaquettes": [
            [(int(p), 1 if k < 2 else -1) for p, k in row] for row in lattice.edge_plaqs
        ],
    }


def torus_distance(L: int, x, y) -> int:
    """Graph distance on the periodic lattice of side L."""
    diff = np.abs(np.asarray(x, dtype=np.int64) - np.asarray(y, dtype=np.int64)) % L
    return int(np.sum(np.minimum(diff, L - diff)))


def bfs_distance(L: int, d: int, x, y) -> int:
    """Breadth-first-search distance; independent check of torus_distance."""
    start, goal = tuple(int(c) % L for c in x), tuple(int(c) % L for c in y)
    seen = {start: 0}
    queue = deque([start])
    while queue:
        u = queue.popleft()
        if u == goal:
            return seen[u]
        for mu in range(d):
            for step in (1, -1):
                w = _shift(u, mu, step, L)
                if w not in seen:
                    seen[w] = seen[u] + 1
                    queue.append(w)
    raise RuntimeError("unreachable vertex")


def rectangular_loop(lattice: TorusLattice, corner, axes, R: int, T: int) -> Loop:
    """R x T rectangle in the (axes[0], axes[1]) plane, R along axes[0]."""
    mu, nu = axes
    if mu == nu:
        raise ValueError("rectangle axes must differ")
    if R < 1 or T < 1:
        raise ValueError("rectangle sides must be >= 1")
    if 2 * R > lattice.L or 2 * T > lattice.L:
        raise SideTooLong(f"sides {R}x{T} exceed L/2 = {lattice.L / 2}")
    L = lattice.L
    x = tuple(int(c) % L for c in corner)
    edges = []
    for step_dir, orient, count in ((mu, 1, R), (nu, 1, T), (mu, -1, R), (nu, -1, T)):
        for _ in range(count):
            edges.append(Edge(x, step_dir, orient))
            x = _shift(x, step_dir, orient, L)
    return Loop(tuple(edges), L, R, T)


@dataclass(frozen=True)
class SlabGeometry:
    """Height-one slab between the planes x_{d-1} = k and k + 1.

    The slice is the (d-1)-torus.  ``vertical_edge_of[s]`` is the parent edge
    index of the vertical link over slice vertex s; ``bottom_edge_of[s, mu]``
    and ``top_edge_of[s, mu]`` are the parent indices of the slice edge
    (s, s + mu) in the lower (A) and upper (B) planes.
    """

    parent: TorusLattice
    k: int
    slice: TorusLattice
    vertical_edge_of: np.ndarray = field(repr=False)
    bottom_edge_of: np.ndarray = field(repr=False)
    top_edge_of: np.ndarray = field(repr=False)

    @property
    def m(self) -> int:
        return self.slice.d


def slab(lattice: TorusLattice, k: int) -> SlabGeometry:
    d, L = lattice.d, lattice.L
    if d < 2:
        raise ValueError("slabs need d >= 2")
    if not 0 <= k < L:
        raise ValueError(f"slab height {k} outside [0, {L})")
    sl = get_lattice(d - 1, L)
    vert = np.empty(sl.n_vertices, dtype=np.int64)
    bottom = np.empty((sl.n_vertices, d - 1), dtype=np.int64)
    top = np.empty((sl.n_vertices, d - 1), dtype=np.int64)
    for s in range(sl.n_vertices):
        x = sl.vertex(s)
        vb = lattice.vertex_index(x + (k,))
        vt = lattice.vertex_index(x + ((k + 1) % L,))
        vert[s] = vb * d + (d - 1)
        for mu in range(d - 1):
            bottom[s, mu] = vb * d + mu
            top[s, mu] = vt * d + mu
    return SlabGeometry(lattice, k, sl, vert, bottom, top)
