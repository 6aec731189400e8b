"""Polyhedral graph combinatorics.

Combinatorial types (vertex-facet incidences), polyhedral graphs
(simple planar 3-connected, with face cycles from the essentially
unique planar embedding), edge contraction, vertex truncation, duals,
and the edge-selection machinery used by the contraction pipeline:

- ``build_edge_graph``: vertex adjacency from incidence data (two
  vertices are adjacent iff some set of facets has exactly these two
  vertices in common).
- ``select_contraction``: total case split into K4 / well-contractible
  edge / stacked-K4 vertex.
- ``triangle_or_three_vertex``: every polyhedral graph has, for any
  edge e, either a facial triangle or a degree-3 vertex away from e.
- ``enumerate_polyhedral_graphs``: exhaustive corpus up to a vertex
  count, generated by inverse edge contraction (planar vertex splits)
  starting from K4.

All values are immutable after construction; operations are pure.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from functools import cached_property

import networkx as nx

Edge = tuple[int, int]


class IncidenceDegenerate(ValueError):
    """A facet has fewer than three incident vertices."""


class ResultNotPolyhedral(ValueError):
    """An operation produced a graph that is not polyhedral."""


class DegreeMismatch(ValueError):
    """The vertex does not have the required degree."""


def edge_key(u: int, v: int) -> Edge:
    return (u, v) if u < v else (v, u)


# =============================================================================
# Domain types
# =============================================================================


@dataclass(frozen=True)
class CombinatorialType:
    """Abstract vertex/facet sets with a vertex-facet incidence relation.

    Only id consistency is enforced at construction; use ``validate`` for
    the dimension-dependent incidence-count checks so that deliberately
    degenerate inputs can still be represented.
    """

    vertex_ids: tuple[int, ...]
    facet_ids: tuple[int, ...]
    incidence: frozenset[tuple[int, int]]
    dimension: int = 3

    def __post_init__(self):
        vs, fs = set(self.vertex_ids), set(self.facet_ids)
        for v, f in self.incidence:
            if v not in vs or f not in fs:
                raise ValueError(f"incidence pair ({v}, {f}) references unknown ids")

    @cached_property
    def facet_vertices(self) -> dict[int, frozenset[int]]:
        out: dict[int, set[int]] = {f: set() for f in self.facet_ids}
        for v, f in self.incidence:
            out[f].add(v)
        return {f: frozenset(s) for f, s in out.items()}

    @cached_property
    def vertex_facets(self) -> dict[int, frozenset[int]]:
        out: dict[int, set[int]] = {v: set() for v in self.vertex_ids}
        for v, f in self.incidence:
            out[v].add(f)
        return {v: frozenset(s) for v, s in out.items()}

    def validate(self) -> None:
        d = self.dimension
        for v, fs in self.vertex_facets.items():
            if len(fs) < d:
                raise ValueError(f"vertex {v} lies on {len(fs)} < {d} facets")
        for f, vs in self.facet_vertices.items():
            if len(vs) < d:
                raise ValueError(f"facet {f} has {len(vs)} < {d} vertices")


@dataclass(frozen=True)
class PolyhedralGraph:
    """Graph with optional face cycles of its planar embedding.

    ``faces`` may be empty for an edges-only graph (e.g. fresh output of
    ``build_edge_graph``); use ``with_faces`` / ``polyhedral_graph`` to
    resolve the embedding.
    """

    vertices: tuple[int, ...]
    edges: tuple[Edge, ...]
    faces: tuple[tuple[int, ...], ...] = ()

    @cached_property
    def adjacency(self) -> dict[int, frozenset[int]]:
        adj: dict[int, set[int]] = {v: set() for v in self.vertices}
        for u, v in self.edges:
            adj[u].add(v)
            adj[v].add(u)
        return {v: frozenset(s) for v, s in adj.items()}

    def degree(self, v: int) -> int:
        return len(self.adjacency[v])

    @cached_property
    def edge_set(self) -> frozenset[Edge]:
        return frozenset(self.edges)

    @cached_property
    def face_edges(self) -> tuple[tuple[Edge, ...], ...]:
        return tuple(
            tuple(edge_key(c[i], c[(i + 1) % len(c)]) for i in range(len(c)))
            for c in self.faces
        )

    def faces_of_edge(self, e: Edge) -> tuple[int, ...]:
        e = edge_key(*e)
        return tuple(i for i, fe in enumerate(self.face_edges) if e in fe)

    def euler_characteristic(self) -> int:
        return len(self.vertices) - len(self.edges) + len(self.faces)


@dataclass(frozen=True)
class ContractionMap:
    """Vertex partition and induced correspondences for a contraction minor.

    ``vertex_classes`` maps each minor vertex to its class of original
    vertices; ``edge_classes`` maps each minor edge to the set of original
    edges between the two classes; ``face_map`` sends original face indices
    to minor face indices (``None`` for collapsed faces).
    """

    vertex_classes: dict[int, frozenset[int]]
    vertex_map: dict[int, int]
    edge_classes: dict[Edge, frozenset[Edge]]
    face_map: dict[int, int | None]

    def class_size(self, e: Edge) -> int:
        return len(self.edge_classes[edge_key(*e)])

    def persistent_faces(self) -> tuple[int, ...]:
        return tuple(i for i, j in sorted(self.face_map.items()) if j is not None)


@dataclass(frozen=True)
class PolyhedralVerdict:
    kind: str  # "polyhedral" | "not_planar" | "not_3_connected"
    faces: tuple[tuple[int, ...], ...] | None = None

    def __bool__(self) -> bool:
        return self.kind == "polyhedral"


@dataclass(frozen=True)
class ContractionChoice:
    """Outcome of ``select_contraction``.

    ``kind`` is one of "is_K4", "well_contractible" (with ``edge``) or
    "stacked_K4" (with ``vertex``).
    """

    kind: str
    edge: Edge | None = None
    vertex: int | None = None


@dataclass(frozen=True)
class TriangleOrVertex:
    kind: str  # "facial_triangle" | "three_vertex"
    face: int | None = None
    vertex: int | None = None


# =============================================================================
# Incidence -> edge graph
# =============================================================================


def build_edge_graph(ct: CombinatorialType) -> PolyhedralGraph:
    """Derive vertex adjacency from incidences (faces left unresolved).

    Vertices i, j are adjacent iff the facets containing both have exactly
    {i, j} as their common vertex set.
    """
    for f, vs in ct.facet_vertices.items():
        if len(vs) < 3:
            raise IncidenceDegenerate(f"facet {f} has {len(vs)} < 3 vertices")
    vf = ct.vertex_facets
    fv = ct.facet_vertices
    edges = []
    for i, j in itertools.combinations(sorted(ct.vertex_ids), 2):
        shared = vf[i] & vf[j]
        if not shared:
            continue
        common: set[int] = set(fv[next(iter(shared))])
        for f in shared:
            common &= fv[f]
        if common == {i, j}:
            edges.append(edge_key(i, j))
    return PolyhedralGraph(tuple(sorted(ct.vertex_ids)), tuple(sorted(edges)))


def graph_to_combinatorial_type(g: PolyhedralGraph) -> CombinatorialType:
    """Faces of a polyhedral graph become the facets of the 3-dim type."""
    if not g.faces:
        raise ValueError("graph has unresolved faces")
    inc = {(v, fi) for fi, cycle in enumerate(g.faces) for v in cycle}
    return CombinatorialType(g.vertices, tuple(range(len(g.faces))), frozenset(inc))


# =============================================================================
# Planarity / 3-connectivity / embedding
# =============================================================================


def _is_connected_after_removal(adj: dict[int, frozenset[int]], removed: set[int]) -> bool:
    rest = [v for v in adj if v not in removed]
    if not rest:
        return True
    seen = {rest[0]}
    stack = [rest[0]]
    while stack:
        for w in adj[stack.pop()]:
            if w not in removed and w not in seen:
                seen.add(w)
                stack.append(w)
    return len(seen) == len(rest)


def is_three_connected(g: PolyhedralGraph) -> bool:
    """Exhaustive 2-cut search; adequate at desk scale."""
    n = len(g.vertices)
    if n < 4:
        return False
    adj = g.adjacency
    if any(len(adj[v]) < 3 for v in g.vertices):
        return False
    if not _is_connected_after_removal(adj, set()):
        return False
    for u, v in itertools.combinations(g.vertices, 2):
        if not _is_connected_after_removal(adj, {u, v}):
            return False
    return True


def _embedding_faces(g: PolyhedralGraph) -> tuple[tuple[int, ...], ...] | None:
    """Face cycles of the planar embedding, or None if non-planar."""
    G = nx.Graph()
    G.add_nodes_from(g.vertices)
    G.add_edges_from(g.edges)
    ok, emb = nx.check_planarity(G)
    if not ok:
        return None
    faces = []
    seen: set[tuple[int, int]] = set()
    for u, v in emb.edges:
        if (u, v) in seen:
            continue
        cycle = emb.traverse_face(u, v, mark_half_edges=seen)
        faces.append(tuple(cycle))
    return tuple(faces)


def is_polyhedral(g: PolyhedralGraph) -> PolyhedralVerdict:
    """Steinitz test.  On success the face cycles of the embedding are
    returned; for 3-connected graphs these are canonical (Whitney)."""
    faces = _embedding_faces(g)
    if faces is None:
        return PolyhedralVerdict("not_planar")
    if not is_three_connected(g):
        return PolyhedralVerdict("not_3_connected")
    return PolyhedralVerdict("polyhedral", faces)


def polyhedral_graph(vertices, edges) -> PolyhedralGraph:
    """Build a PolyhedralGraph with resolved faces; raise if not polyhedral."""
    g = PolyhedralGraph(tuple(sorted(vertices)), tuple(sorted(edge_key(*e) for e in edges)))
    verdict = is_polyhedral(g)
    if not verdict:
        raise ResultNotPolyhedral(f"graph is {verdict.kind}")
    return PolyhedralGraph(g.vertices, g.edges, verdict.faces)


def polyhedral_graph_from_faces(faces) -> PolyhedralGraph:
    """Build a graph from face cycles; edges derived from consecutive pairs."""
    faces = tuple(tuple(int(v) for v in c) for c in faces)
    edges = set()
    vertices = set()
    for c in faces:
        vertices.update(c)
        for i in range(len(c)):
            edges.add(edge_key(c[i], c[(i + 1) % len(c)]))
    g = PolyhedralGraph(tuple(sorted(vertices)), tuple(sorted(edges)), faces)
    _check_face_structure(g)
    return g


def _check_face_structure(g: PolyhedralGraph) -> None:
    if g.euler_characteristic() != 2:
        raise ResultNotPolyhedral(
            f"Euler characteristic {g.euler_characteristic()} != 2"
        )
    count: dict[Edge, int] = {e: 0 for e in g.edges}
    for fe in g.face_edges:
        for e in fe:
            if e not in count:
                raise ResultNotPolyhedral(f"face uses unknown edge {e}")
            count[e] += 1
    bad = [e for e, c in count.items() if c != 2]
    if bad:
        raise ResultNotPolyhedral(f"edges not on exactly two faces: {bad[:5]}")


# =============================================================================
# Contraction, truncation, duality
# =============================================================================


def _contract_cycle(cycle: tuple[int, ...], old: set[int], new: int) -> tuple[int, ...]:
    out: list[int] = []
    for v in cycle:
        w = new if v in old else v
        if not out or out[-1] != w:
            out.append(w)
    if len(out) > 1 and out[0] == out[-1]:
        out.pop()
    return tuple(out)


def contract_edge(g: PolyhedralGraph, e: Edge) -> tuple[PolyhedralGraph, ContractionMap]:
    """Contract e, merging parallel edges and updating face cycles.

    The two faces incident to e lose a vertex (triangles collapse); all
    other faces keep their cycle with the endpoints renamed.  Raises
    ResultNotPolyhedral if the minor fails the polyhedrality test.
    """
    e = edge_key(*e)
    if e not in g.edge_set:
        raise ValueError(f"edge {e} not in graph")
    if not g.faces:
        raise ValueError("graph has unresolved faces")
    i_hat, j_hat = e
    merged = min(i_hat, j_hat)
    cls = {i_hat, j_hat}

    vertex_map = {v: (merged if v in cls else v) for v in g.vertices}
    new_vertices = tuple(sorted(set(vertex_map.values())))

    new_edges: dict[Edge, set[Edge]] = {}
    for u, v in g.edges:
        nu, nv = vertex_map[u], vertex_map[v]
        if nu == nv:
            continue
        new_edges.setdefault(edge_key(nu, nv), set()).add(edge_key(u, v))

    new_faces: list[tuple[int, ...]] = []
    face_map: dict[int, int | None] = {}
    for idx, cycle in enumerate(g.faces):
        cc = _contract_cycle(cycle, cls, merged)
        if len(cc) >= 3:
            face_map[idx] = len(new_faces)
            new_faces.append(cc)
        else:
            face_map[idx] = None

    minor = PolyhedralGraph(new_vertices, tuple(sorted(new_edges)), tuple(new_faces))
    if not is_three_connected(minor):
        raise ResultNotPolyhedral(f"contracting {e} breaks 3-connectivity")
    _check_face_structure(minor)

    classes = {v: frozenset({v}) for v in new_vertices}
    classes[merged] = frozenset(cls)
    cmap = ContractionMap(
        vertex_classes=classes,
        vertex_map=vertex_map,
        edge_classes={k: frozenset(v) for k, v in new_edges.items()},
        face_map=face_map,
    )
    return minor, cmap


def contract_classes(
    g: PolyhedralGraph, classes: dict[int, frozenset[int] | set[int]]
) -> tuple[PolyhedralGraph, ContractionMap]:
    """General contraction-only minor from a vertex partition.

    Each class must induce a connected subgraph.  Classes are named by
    their given keys; faces persist when their vertices meet at least
    three classes.
    """
    if not g.faces:
        raise ValueError("graph has unresolved faces")
    vertex_map: dict[int, int] = {}
    for cid, members in classes.items():
        members = frozenset(members)
        sub_adj = {
            v: [w for w in g.adjacency[v] if w in members] for v in members
        }
        seen = set()
        stack = [next(iter(members))]
        while stack:
            u = stack.pop()
            if u in seen:
                continue
            seen.add(u)
            stack.extend(sub_adj[u])
        if seen != members:
            raise ValueError(f"class {cid} does not induce a connected subgraph")
        for v in members:
            vertex_map[v] = cid
    if set(vertex_map) != set(g.vertices):
        raise ValueError("classes do not partition the vertex set")

    new_vertices = tuple(sorted(classes))
    new_edges: dict[Edge, set[Edge]] = {}
    for u, v in g.edges:
        nu, nv = vertex_map[u], vertex_map[v]
        if nu == nv:
            continue
        new_edges.setdefault(edge_key(nu, nv), set()).add(edge_key(u, v))

    new_faces: list[tuple[int, ...]] = []
    face_map: dict[int, int | None] = {}
    for idx, cycle in enumerate(g.faces):
        out: list[int] = []
        for v in cycle:
            w = vertex_map[v]
            if not out or out[-1] != w:
                out.append(w)
        while len(out) > 1 and out[0] == out[-1]:
            out.pop()
        if len(set(out)) >= 3 and len(out) == len(set(out)):
            face_map[idx] = len(new_faces)
            new_faces.append(tuple(out))
        else:
            face_map[idx] = None

    minor = PolyhedralGraph(new_vertices, tuple(sorted(new_edges)), tuple(new_faces))
    if not is_three_connected(minor):
        raise ResultNotPolyhedral("contraction minor is not 3-connected")
    _check_face_structure(minor)
    cmap = ContractionMap(
        vertex_classes={c: frozenset(m) for c, m in classes.items()},
        vertex_map=vertex_map,
        edge_classes={k: frozenset(v) for k, v in new_edges.items()},
        face_map=face_map,
    )
    return minor, cmap


def is_contractible(g: PolyhedralGraph, e: Edge) -> bool:
    try:
        contract_edge(g, e)
        return True
    except ResultNotPolyhedral:
        return False


def is_well_contractible(g: PolyhedralGraph, e: Edge) -> bool:
    """Contractible and (on a non-triangular face, or no degree-3 endpoint)."""
    e = edge_key(*e)
    if not is_contractible(g, e):
        return False
    face_sizes = [len(g.faces[fi]) for fi in g.faces_of_edge(e)]
    if any(s > 3 for s in face_sizes):
        return True
    return g.degree(e[0]) >= 4 and g.degree(e[1]) >= 4


def stacked_k4_vertices(g: PolyhedralGraph) -> tuple[int, ...]:
    """Degree-3 vertices whose three incident faces are all triangles."""
    out = []
    for v in g.vertices:
        if g.degree(v) != 3:
            continue
        incident = [c for c in g.faces if v in c]
        if len(incident) == 3 and all(len(c) == 3 for c in incident):
            out.append(v)
    return tuple(out)


def select_contraction(g: PolyhedralGraph) -> ContractionChoice:
    """Total case split: K4, else the smallest well-contractible edge,
    else the smallest stacked-K4 apex.  Lexicographic tie-breaking keeps
    the choice deterministic."""
    if len(g.vertices) == 4 and len(g.edges) == 6:
        return ContractionChoice("is_K4")
    for e in g.edges:
        if is_well_contractible(g, e):
            return ContractionChoice("well_contractible", edge=e)
    stacked = stacked_k4_vertices(g)
    if stacked:
        return ContractionChoice("stacked_K4", vertex=min(stacked))
    raise AssertionError("no contraction alternative found; graph not polyhedral?")


def triangle_or_three_vertex(g: PolyhedralGraph, e: Edge) -> TriangleOrVertex:
    """A facial triangle not containing e, or a degree-3 vertex that is not
    an endpoint of e.  One of the two always exists; triangles are
    preferred, and among them those avoiding e's endpoints entirely."""
    e = edge_key(*e)
    candidates = []
    for fi, cycle in enumerate(g.faces):
        if len(cycle) != 3:
            continue
        if e[0] in cycle and e[1] in cycle:
            continue
        shares = (e[0] in cycle) + (e[1] in cycle)
        candidates.append((shares, min(cycle), fi))
    if candidates:
        return TriangleOrVertex("facial_triangle", face=min(candidates)[2])
    for v in g.vertices:
        if v not in e and g.degree(v) == 3:
            return TriangleOrVertex("three_vertex", vertex=v)
    raise AssertionError("neither triangle nor 3-vertex found away from the edge")


def truncate_three_vertex(g: PolyhedralGraph, v: int) -> PolyhedralGraph:
    """Cut off a degree-3 vertex: its three edges are subdivided by new
    vertices j1, j2, j3 which form a new triangular face."""
    if g.degree(v) != 3:
        raise DegreeMismatch(f"vertex {v} has degree {g.degree(v)}, need 3")
    if not g.faces:
        raise ValueError("graph has unresolved faces")
    neighbors = sorted(g.adjacency[v])
    base = max(g.vertices) + 1
    sub = {n: base + k for k, n in enumerate(neighbors)}

    new_faces: list[tuple[int, ...]] = []
    for cycle in g.faces:
        if v not in cycle:
            new_faces.append(cycle)
            continue
        k = cycle.index(v)
        a = cycle[(k - 1) % len(cycle)]
        b = cycle[(k + 1) % len(cycle)]
        out = list(cycle[:k]) + [sub[a], sub[b]] + list(cycle[k + 1:])
        new_faces.append(tuple(out))
    # the new triangle, oriented along the rotation of v seen by its faces
    new_faces.append(tuple(sub[n] for n in neighbors))

    edges = set()
    for u, w in g.edges:
        if v in (u, w):
            other = w if u == v else u
            edges.add(edge_key(sub[other], other))
        else:
            edges.add(edge_key(u, w))
    for a, b in itertools.combinations(neighbors, 2):
        edges.add(edge_key(sub[a], sub[b]))

    vertices = tuple(sorted(set(g.vertices) - {v}) + sorted(sub.values()))
    out_graph = PolyhedralGraph(tuple(sorted(vertices)), tuple(sorted(edges)), tuple(new_faces))
    _check_face_structure(out_graph)
    if not is_three_connected(out_graph):
        raise ResultNotPolyhedral("truncation result not 3-connected")
    return out_graph


def dual_graph(g: PolyhedralGraph) -> tuple[PolyhedralGraph, dict[Edge, Edge]]:
    """Dual: vertices are the face indices of g, adjacent when the faces
    share an edge.  Returns the dual and the bijection primal edge -> dual
    edge.  Dual faces are the cycles of faces around each primal vertex."""
    if not g.faces:
        raise ValueError("graph has unresolved faces")
    edge_faces: dict[Edge, list[int]] = {}
    for fi, fe in enumerate(g.face_edges):
        for e in fe:
            edge_faces.setdefault(e, []).append(fi)
    correspondence: dict[Edge, Edge] = {}
    dual_edges = set()
    for e, fs in edge_faces.items():
        if len(fs) != 2:
            raise ResultNotPolyhedral(f"edge {e} lies on {len(fs)} faces")
        de = edge_key(fs[0], fs[1])
        correspondence[e] = de
        dual_edges.add(de)

    # trace the cycle of faces around each primal vertex
    dual_faces = []
    for v in g.vertices:
        incident = [fi for fi, c in enumerate(g.faces) if v in c]
        links: dict[int, set[int]] = {fi: set() for fi in incident}
        for e, fs in edge_faces.items():
            if v in e:
                links[fs[0]].add(fs[1])
                links[fs[1]].add(fs[0])
        start = incident[0]
        cycle = [start]
        prev = None
        while True:
            nxts = [f for f in links[cycle[-1]] if f != prev]
            nxt = nxts[0]
            if nxt == start:
                break
            prev = cycle[-1]
            cycle.append(nxt)
        dual_faces.append(tuple(cycle))

    dual = PolyhedralGraph(
        tuple(range(len(g.faces))), tuple(sorted(dual_edges)), tuple(dual_faces)
    )
    _check_face_structure(dual)
    return dual, correspondence


# =============================================================================
# Canonical forms (embedded-graph codes)
# =============================================================================


def _rotation_system(g: PolyhedralGraph) -> dict[int, tuple[int, ...]]:
    G = nx.Graph()
    G.add_nodes_from(g.vertices)
    G.add_edges_from(g.edges)
    ok, emb = nx.check_planarity(G)
    if not ok:
        raise ResultNotPolyhedral("graph is not planar")
    return {v: tuple(emb.neighbors_cw_order(v)) for v in g.vertices}


def _trace_code(rot: dict[int, tuple[int, ...]], root_u: int, root_v: int) -> tuple:
    """Canonical BFS code of a rotation system from a directed root edge."""
    labels = {root_u: 0}
    order = [root_u]
    parent_nbr = {root_u: root_v}
    code: list[int] = []
    k = 0
    while k < len(order):
        u = order[k]
        k += 1
        nbrs = rot[u]
        start = nbrs.index(parent_nbr[u])
        seq = nbrs[start:] + nbrs[:start]
        code.append(-1)  # vertex separator
        for w in seq:
            if w not in labels:
                labels[w] = len(order)
                order.append(w)
                parent_nbr[w] = u
            code.append(labels[w])
    return tuple(code)


def canonical_form(g: PolyhedralGraph) -> tuple:
    """Isomorphism-invariant code of a polyhedral graph.

    Uses the unique planar embedding (both orientations, all roots with
    lexicographically minimal endpoint degrees), so equal codes mean
    isomorphic graphs and vice versa."""
    rot = _rotation_system(g)
    mirrored = {v: tuple(reversed(r)) for v, r in rot.items()}
    deg = {v: len(r) for v, r in rot.items()}
    roots = [(u, v) for u in g.vertices for v in rot[u]]
    min_key = min((deg[u], deg[v]) for u, v in roots)
    best = None
    for u, v in roots:
        if (deg[u], deg[v]) != min_key:
            continue
        for system in (rot, mirrored):
            code = _trace_code(system, u, v)
            if best is None or code < best:
                best = code
    return best


# =============================================================================
# Exhaustive corpus by inverse contraction
# =============================================================================


def _vertex_splits(g: PolyhedralGraph, rot: dict[int, tuple[int, ...]], v: int):
    """All planar splits of v into an adjacent pair, as new edge sets.

    Cut positions live on the cyclic corner/neighbor sequence around v;
    a cut at a neighbor means that neighbor is kept by both halves
    (contracting the new edge then re-merges the parallel edges).
    """
    nbrs = rot[v]
    d = len(nbrs)
    positions = [("gap", i) for i in range(d)] + [("vert", i) for i in range(d)]

    def arc(p1, p2):
        """Neighbors owned by the side from cut p1 forward (cw) to cut p2."""
        kind1, i1 = p1
        kind2, i2 = p2
        side = []
        if kind1 == "vert":  # a cut at a neighbor shares it with both sides
            side.append(nbrs[i1])
            i = (i1 + 1) % d
        else:  # gap i1 cuts just before nbrs[i1]
            i = i1
        while i != i2:
            side.append(nbrs[i])
            i = (i + 1) % d
        if kind2 == "vert":
            side.append(nbrs[i2])
        return side

    base_edges = [e for e in g.edges if v not in e]
    v1, v2 = max(g.vertices) + 1, max(g.vertices) + 2
    seen_splits = set()
    for a in range(len(positions)):
        for b in range(a + 1, len(positions)):
            p1, p2 = positions[a], positions[b]
            side1, side2 = arc(p1, p2), arc(p2, p1)
            if len(side1) < 2 or len(side2) < 2:
                continue
            key = frozenset(
                (tuple(sorted(side1)), tuple(sorted(side2)))
            )
            if key in seen_splits:
                continue
            seen_splits.add(key)
            edges = list(base_edges)
            edges.append(edge_key(v1, v2))
            edges.extend(edge_key(v1, w) for w in side1)
            edges.extend(edge_key(v2, w) for w in side2)
            vertices = tuple(sorted(set(vv for vv in g.vertices if vv != v) | {v1, v2}))
            yield PolyhedralGraph(vertices, tuple(sorted(set(edges))))


def enumerate_polyhedral_graphs(max_vertices: int) -> dict[int, list[PolyhedralGraph]]:
    """Every polyhedral graph with at most ``max_vertices`` vertices, up to
    isomorphism, keyed by vertex count.

    Each polyhedral graph other than K4 has an edge whose contraction is
    again polyhedral, so inverse contraction (vertex splitting) starting
    from K4 reaches everything level by level.
    """
    k4 = polyhedral_graph(range(4), itertools.combinations(range(4), 2))
    levels: dict[int, list[PolyhedralGraph]] = {4: [k4]}
    for n in range(4, max_vertices):
        found: dict[tuple, PolyhedralGraph] = {}
        for g in levels[n]:
            rot = _rotation_system(g)
            for v in g.vertices:
                for cand in _vertex_splits(g, rot, v):
                    code = canonical_form(cand)
                    if code not in found:
                        verdict = is_polyhedral(cand)
                        if not verdict:  # safety net; splits should be polyhedral
                            continue
                        found[code] = PolyhedralGraph(
                            cand.vertices, cand.edges, verdict.faces
                        )
        levels[n + 1] = list(found.values())
    return levels


# =============================================================================
# Serialization
# =============================================================================


def graph_to_json(g: PolyhedralGraph) -> str:
    return json.dumps(
        {"vertices": list(g.vertices), "faces": [list(c) for c in g.faces]}
    )


def graph_from_json(text: str) -> PolyhedralGraph:
    data = json.loads(text)
    faces = tuple(tuple(int(v) for v in c) for c in data["faces"])
    g = polyhedral_graph_from_faces(faces)
    declared = tuple(sorted(int(v) for v in data["vertices"]))
    if declared != g.vertices:
        raise ValueError("vertex list does not match the vertices used by faces")
    return g
