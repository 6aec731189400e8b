"""Tutte embeddings, reciprocal frameworks and Maxwell-Cremona lifts.

Pipeline pieces:

- ``tutte_embed``: equilibrium positions for prescribed positive stresses
  with a pinned triangular outer face, via the weighted Laplacian; the
  outer-edge stresses are recovered from equilibrium at the pinned
  vertices.
- ``reciprocal_build``: integrate the 90-degree-rotated, stress-scaled edge
  vectors over the dual graph; closure of the non-tree edges certifies the
  self-stress.
- ``mc_lift``: integrate heights over the primal graph; both face choices
  per edge must agree (that is reciprocity).
- ``lift_to_polytope`` / ``stress_from_lift``: the two directions of the
  stress <-> lift correspondence.
- ``mc_position_transform``: projective positioning that turns a strictly
  convex polytope into a Maxwell-Cremona lift over a triangular facet.
- ``realize_graph``: canonical generic realization of a polyhedral graph
  (Tutte + lift, through the dual when the graph has no triangle).

Orientation convention: faces are oriented by the drawing (counterclockwise
interior, clockwise outer face), so every directed edge lies on exactly one
face.  With ``left(i->j)`` denoting that face, the reciprocal satisfies
``w_right - w_left = omega_ij * R90 (v_j - v_i)`` with R90 the
counterclockwise rotation; under this convention positive interior stresses
lift interior vertices above the outer face's plane, and convex polytopes
positioned over an outer facet induce positive interior stresses.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .geometry import (
    DEFAULT_TOL,
    Realization,
    ProjectiveTransform,
    ToleranceConfig,
    facet_cycle,
    transform_apply,
    validate_realization,
)
from .graphs import (
    CombinatorialType,
    Edge,
    PolyhedralGraph,
    build_edge_graph,
    dual_graph,
    edge_key,
    graph_to_combinatorial_type,
    polyhedral_graph_from_faces,
)


class SingularSystem(RuntimeError):
    """The Laplacian system could not be solved (guarded; should not occur
    for connected graphs with positive weights)."""


class InconsistentStress(ValueError):
    """Reciprocal integration does not close; the stress is not an
    equilibrium stress."""


class FaceChoiceMismatch(ValueError):
    """The two face choices for a lift edge disagree."""


class SignConditionViolated(ValueError):
    """Stress signs do not match the convex-lifting requirement."""


class NotALift(ValueError):
    """Heights are not face-wise coplanar."""


class NotAchieved(RuntimeError):
    """Positioning search failed; diagnostics in the message."""


_R90 = np.array([[0.0, -1.0], [1.0, 0.0]])  # counterclockwise quarter turn


# =============================================================================
# Framework types
# =============================================================================


@dataclass(frozen=True)
class PlanarStressedFramework:
    graph: PolyhedralGraph
    positions: dict[int, np.ndarray]
    stress: dict[Edge, float]
    outer_face: int | None = None

    def edge_list(self) -> tuple[Edge, ...]:
        if self.graph.edges:
            return self.graph.edges
        return tuple(sorted(self.stress))

    def diameter(self) -> float:
        pts = np.asarray(list(self.positions.values()))
        if len(pts) < 2:
            return 1.0
        return float(
            np.sqrt(((pts[:, None] - pts[None]) ** 2).sum(-1).max())
        )


@dataclass(frozen=True)
class ReciprocalFramework:
    positions: dict[int, np.ndarray]  # one point per face of the primal
    base_face: int


@dataclass(frozen=True)
class Lift:
    heights: dict[int, float]
    base_vertex: int


def check_self_stress(f: PlanarStressedFramework) -> float:
    """Maximum vertex equilibrium residual, scaled by total |stress| times
    the drawing diameter."""
    force = {v: np.zeros(2) for v in f.positions}
    total = 0.0
    for (u, v) in f.edge_list():
        w = f.stress.get((u, v), f.stress.get((v, u), 0.0))
        d = f.positions[v] - f.positions[u]
        force[u] += w * d
        force[v] -= w * d
        total += abs(w)
    raw = max((float(np.linalg.norm(g)) for g in force.values()), default=0.0)
    scale = total * f.diameter()
    return raw / scale if scale > 0 else raw


# =============================================================================
# Drawing-oriented face incidences
# =============================================================================


def _signed_area(cycle, positions) -> float:
    s = 0.0
    for i in range(len(cycle)):
        p, q = positions[cycle[i]], positions[cycle[(i + 1) % len(cycle)]]
        s += p[0] * q[1] - p[1] * q[0]
    return 0.5 * s


def oriented_faces(
    graph: PolyhedralGraph, positions: dict[int, np.ndarray]
) -> tuple[tuple[tuple[int, ...], ...], int, dict[tuple[int, int], int]]:
    """Orient face cycles by the drawing (interior ccw, outer cw).

    Returns (cycles, outer index, map directed edge -> face index).  Every
    directed edge lying on exactly one oriented face certifies that the
    stored faces are consistent with the drawing.
    """
    areas = [_signed_area(c, positions) for c in graph.faces]
    outer = int(np.argmax(np.abs(areas)))
    cycles = []
    for k, c in enumerate(graph.faces):
        ccw = tuple(c) if areas[k] > 0 else tuple(reversed(c))
        cycles.append(tuple(reversed(ccw)) if k == outer else ccw)
    halfedge_face: dict[tuple[int, int], int] = {}
    for k, c in enumerate(cycles):
        for i in range(len(c)):
            he = (c[i], c[(i + 1) % len(c)])
            if he in halfedge_face:
                raise InconsistentStress(
                    f"drawing is not a plane embedding (half-edge {he} doubled)"
                )
            halfedge_face[he] = k
    missing = 2 * len(graph.edges) - len(halfedge_face)
    if missing:
        raise InconsistentStress("face cycles do not cover all half-edges")
    return tuple(cycles), outer, halfedge_face


# =============================================================================
# Tutte embedding
# =============================================================================


def tutte_embed(
    graph: PolyhedralGraph,
    outer_face: int,
    pinned: dict[int, np.ndarray],
    partial_stress: dict[Edge, float],
) -> PlanarStressedFramework:
    """Equilibrium drawing for a positive partial stress on the non-outer
    edges, with the triangular outer face pinned at ``pinned``.

    The three outer-edge stresses are recovered from equilibrium at the
    pinned vertices, so the result is a full self-stressed framework.
    """
    cycle = graph.faces[outer_face]
    if len(cycle) != 3:
        raise ValueError("outer face must be a triangle")
    tri = set(cycle)
    if set(pinned) != tri:
        raise ValueError("pinned positions must cover exactly the outer face")
    tri_pts = np.asarray([pinned[v] for v in cycle], dtype=float)
    area = _signed_area(tuple(range(3)), {i: tri_pts[i] for i in range(3)})
    if abs(area) < 1e-14:
        raise ValueError("pinned outer-face positions are collinear")

    outer_edges = {edge_key(cycle[i], cycle[(i + 1) % 3]) for i in range(3)}
    stress = {}
    for e in graph.edges:
        if e in outer_edges:
            continue
        w = partial_stress.get(e, partial_stress.get((e[1], e[0])))
        if w is None or w <= 0:
            raise ValueError(f"partial stress must be positive on edge {e}")
        stress[e] = float(w)

    interior = [v for v in graph.vertices if v not in tri]
    index = {v: k for k, v in enumerate(interior)}
    n = len(interior)
    positions = {v: np.asarray(pinned[v], dtype=float) for v in tri}
    if n:
        L = sp.lil_matrix((n, n))
        rhs = np.zeros((n, 2))
        for (u, v), w in stress.items():
            for a, b in ((u, v), (v, u)):
                if a in index:
                    L[index[a], index[a]] += w
                    if b in index:
                        L[index[a], index[b]] -= w
                    else:
                        rhs[index[a]] += w * positions[b]
        try:
            sol = spla.spsolve(L.tocsc(), rhs)
        except Exception as exc:  # pragma: no cover - guarded
            raise SingularSystem(str(exc)) from exc
        sol = np.atleast_2d(sol)
        if not np.all(np.isfinite(sol)):
            raise SingularSystem("Laplacian solve produced non-finite positions")
        for v, k in index.items():
            positions[v] = sol[k]

    # outer-edge stresses from equilibrium at the pinned vertices
    tri_edges = sorted(outer_edges)
    A = np.zeros((6, 3))
    b = np.zeros(6)
    for row, v in enumerate(cycle):
        net = np.zeros(2)
        for u in graph.adjacency[v]:
            e = edge_key(u, v)
            if e in stress:
                net += stress[e] * (positions[u] - positions[v])
        b[2 * row : 2 * row + 2] = -net
        for col, e in enumerate(tri_edges):
            if v in e:
                other = e[0] if e[1] == v else e[1]
                A[2 * row : 2 * row + 2, col] = positions[other] - positions[v]
    sol, *_ = np.linalg.lstsq(A, b, rcond=None)
    for e, w in zip(tri_edges, sol):
        stress[e] = float(w)

    return PlanarStressedFramework(graph, positions, stress, outer_face)


# =============================================================================
# Reciprocal framework
# =============================================================================


def _stress_of(f: PlanarStressedFramework, e: Edge) -> float:
    return f.stress.get(e, f.stress.get((e[1], e[0]), 0.0))


def reciprocal_build(
    f: PlanarStressedFramework,
    base: tuple[int, np.ndarray] | None = None,
    tol: ToleranceConfig = DEFAULT_TOL,
) -> ReciprocalFramework:
    """Integrate the reciprocal positions over a dual spanning tree and
    verify closure on the remaining dual edges."""
    cycles, outer, he_face = oriented_faces(f.graph, f.positions)
    base_face, base_pos = (outer, np.zeros(2)) if base is None else base
    base_pos = np.asarray(base_pos, dtype=float)

    scale = max(
        (abs(_stress_of(f, e)) * np.linalg.norm(f.positions[e[0]] - f.positions[e[1]])
         for e in f.graph.edges),
        default=1.0,
    )
    scale = max(scale, 1e-30)

    def delta(i, j):
        """w[left(j->i)] - w[left(i->j)] for the primal edge ij."""
        return _stress_of(f, edge_key(i, j)) * (_R90 @ (f.positions[j] - f.positions[i]))

    w: dict[int, np.ndarray] = {base_face: base_pos}
    queue = [base_face]
    dual_adj: dict[int, list[tuple[int, int, int]]] = {}
    for (i, j), fa in he_face.items():
        fb = he_face[(j, i)]
        dual_adj.setdefault(fa, []).append((fb, i, j))
    while queue:
        fa = queue.pop()
        for fb, i, j in dual_adj[fa]:
            if fb in w:
                continue
            # fa = left(i->j), fb = left(j->i) = right(i->j)
            w[fb] = w[fa] + delta(i, j)
            queue.append(fb)

    worst = 0.0
    for (i, j), fa in he_face.items():
        fb = he_face[(j, i)]
        worst = max(worst, float(np.linalg.norm(w[fb] - w[fa] - delta(i, j))))
    if worst > tol.residual_tol * scale * len(f.graph.edges):
        raise InconsistentStress(
            f"reciprocal closure residual {worst:.3e} exceeds tolerance"
        )
    return ReciprocalFramework(w, base_face)


def reciprocity_residual(
    f: PlanarStressedFramework, rec: ReciprocalFramework
) -> float:
    """Max |<v_j - v_i, w_tau - w_sigma>| over dual edge pairs, scaled."""
    _, _, he_face = oriented_faces(f.graph, f.positions)
    worst = 0.0
    scale = f.diameter() * max(
        (np.linalg.norm(w) for w in rec.positions.values()), default=1.0
    )
    for (i, j), fa in he_face.items():
        fb = he_face[(j, i)]
        worst = max(
            worst,
            abs(float((f.positions[j] - f.positions[i]) @ (rec.positions[fb] - rec.positions[fa]))),
        )
    return worst / max(scale, 1e-30)


# =============================================================================
# Maxwell-Cremona lift
# =============================================================================


def mc_lift(
    f: PlanarStressedFramework,
    rec: ReciprocalFramework,
    base: tuple[int, float] | None = None,
    tol: ToleranceConfig = DEFAULT_TOL,
) -> Lift:
    """Integrate heights over the primal graph; reciprocal positions act as
    face gradients.  Both face choices must agree on every edge."""
    _, _, he_face = oriented_faces(f.graph, f.positions)
    base_vertex, base_height = (
        (f.graph.vertices[0], 0.0) if base is None else base
    )
    scale = max(f.diameter(), 1e-30) * max(
        (np.linalg.norm(w) for w in rec.positions.values()), default=1.0
    )
    for (i, j), fa in he_face.items():
        fb = he_face[(j, i)]
        d = f.positions[j] - f.positions[i]
        gap = abs(float((rec.positions[fa] - rec.positions[fb]) @ d))
        if gap > max(tol.residual_tol * scale, 1e-12 * scale):
            raise FaceChoiceMismatch(
                f"face choices for edge {(i, j)} disagree by {gap:.3e}"
            )

    h: dict[int, float] = {base_vertex: float(base_height)}
    queue = [base_vertex]
    while queue:
        i = queue.pop()
        for j in f.graph.adjacency[i]:
            if j in h:
                continue
            sigma = he_face[(i, j)]
            h[j] = h[i] + float(rec.positions[sigma] @ (f.positions[j] - f.positions[i]))
            queue.append(j)
    return Lift(h, base_vertex)


def lift_coplanarity_residual(f: PlanarStressedFramework, lift: Lift) -> float:
    """Max per-face plane-fit residual of the lifted points, scaled by the
    drawing diameter."""
    worst = 0.0
    for cycle in f.graph.faces:
        pts = np.asarray(
            [[*f.positions[v], lift.heights[v]] for v in cycle], dtype=float
        )
        if len(pts) <= 3:
            continue
        c = pts.mean(axis=0)
        s = np.linalg.svd(pts - c, compute_uv=False)
        worst = max(worst, float(s[-1]))
    return worst / max(f.diameter(), 1e-30)


def lift_to_polytope(
    f: PlanarStressedFramework,
    lift: Lift,
    tol: ToleranceConfig = DEFAULT_TOL,
) -> tuple[CombinatorialType, Realization]:
    """Assemble the lifted polytope; requires the classical sign pattern
    (negative stress on the outer face's edges, positive elsewhere)."""
    cycles, outer, _ = oriented_faces(f.graph, f.positions)
    outer_edges = {
        edge_key(c, d)
        for c, d in zip(cycles[outer], cycles[outer][1:] + cycles[outer][:1])
    }
    for e in f.graph.edges:
        w = _stress_of(f, e)
        if e in outer_edges and w >= 0:
            raise SignConditionViolated(f"outer edge {e} has stress {w:.3e} >= 0")
        if e not in outer_edges and w <= 0:
            raise SignConditionViolated(f"interior edge {e} has stress {w:.3e} <= 0")

    coords = {
        v: np.array([*f.positions[v], lift.heights[v]]) for v in f.graph.vertices
    }
    ct = graph_to_combinatorial_type(f.graph)
    interior_pt = np.mean(list(coords.values()), axis=0)
    normals = {}
    for fi, cycle in enumerate(f.graph.faces):
        pts = np.asarray([coords[v] for v in cycle])
        c = pts.mean(axis=0)
        _, _, vt = np.linalg.svd(pts - c)
        n = vt[-1]
        if n @ (c - interior_pt) < 0:
            n = -n
        normals[fi] = n / np.linalg.norm(n)
    r = Realization(3, coords, normals)
    rep = validate_realization(ct, r, tol)
    if not rep.ok(tol):
        raise NotAchieved(f"lifted polytope fails validation: {rep}")
    return ct, r


def stress_from_lift(
    graph: PolyhedralGraph,
    positions: dict[int, np.ndarray],
    heights: dict[int, float],
    tol: ToleranceConfig = DEFAULT_TOL,
) -> dict[Edge, float]:
    """Recover the unique self-stress of a polyhedral lifting.

    Face gradients are fitted by least squares (these are the reciprocal
    positions); each edge's stress comes from the gradient jump across it.
    Raises NotALift when a face is not coplanar.
    """
    _, _, he_face = oriented_faces(graph, positions)
    diam = max(
        float(np.sqrt(((np.asarray(list(positions.values()))[:, None]
                        - np.asarray(list(positions.values()))[None]) ** 2).sum(-1).max())),
        1e-30,
    )
    hscale = max(max(abs(h) for h in heights.values()), diam)

    grads = {}
    for fi, cycle in enumerate(graph.faces):
        A = np.asarray([[*positions[v], 1.0] for v in cycle], dtype=float)
        b = np.asarray([heights[v] for v in cycle], dtype=float)
        sol, *_ = np.linalg.lstsq(A, b, rcond=None)
        res = float(np.abs(A @ sol - b).max())
        if res > max(tol.residual_tol, 1e-10) * hscale:
            raise NotALift(f"face {fi} is not coplanar (residual {res:.3e})")
        grads[fi] = sol[:2]

    stress: dict[Edge, float] = {}
    for (i, j), fa in he_face.items():
        e = edge_key(i, j)
        if e in stress:
            continue
        fb = he_face[(j, i)]
        d = positions[j] - positions[i]
        rd = _R90 @ d
        stress[e] = float((grads[fb] - grads[fa]) @ rd) / float(rd @ rd)
    return stress


# =============================================================================
# Projective positioning over a facet
# =============================================================================


def _rotation_taking(a, b) -> np.ndarray:
    """Rotation matrix sending unit vector a to unit vector b."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    v = np.cross(a, b)
    c = float(a @ b)
    if np.linalg.norm(v) < 1e-14:
        if c > 0:
            return np.eye(3)
        axis = np.zeros(3)
        axis[int(np.argmin(np.abs(a)))] = 1.0
        axis -= (axis @ a) * a
        axis /= np.linalg.norm(axis)
        return 2 * np.outer(axis, axis) - np.eye(3)  # half turn about the axis
    K = np.array([[0, -v[2], v[1]], [v[2], 0, -v[0]], [-v[1], v[0], 0]])
    return np.eye(3) + K + K @ K / (1 + c)


def mc_position_transform(
    ct: CombinatorialType,
    r: Realization,
    facet: int,
    tol: ToleranceConfig = DEFAULT_TOL,
) -> tuple[ProjectiveTransform, PlanarStressedFramework]:
    """Projective transform after which the polytope projects vertically to
    a plane drawing with the given triangular facet outermost, and the
    heights form a Maxwell-Cremona lift whose stress is positive off that
    facet and negative on it."""
    members = sorted(ct.facet_vertices[facet])
    if len(members) != 3:
        raise ValueError("positioning facet must be a triangle")
    a = r.normals[facet]
    c = np.mean([r.coords[v] for v in members], axis=0)

    rot = _rotation_taking(a, np.array([0.0, 0.0, -1.0]))
    M1 = ProjectiveTransform.from_affine(rot, -rot @ c)

    h_max = np.inf
    for f in ct.facet_ids:
        if f == facet:
            continue
        af = r.normals[f]
        level = float(np.mean([af @ r.coords[v] for v in ct.facet_vertices[f]]))
        slope = float(af @ a)
        if slope > 1e-12:
            h_max = min(h_max, (level - float(af @ c)) / slope)
    if not np.isfinite(h_max) or h_max <= 0:
        h_max = r.diameter

    last = None
    h = 0.5 * h_max
    for _ in range(60):
        down = np.array([0.0, 0.0, -1.0])
        T2 = ProjectiveTransform.homology(
            down, 0.0, np.array([0.0, 0.0, -h]), scale=h
        )
        T = T2.compose(M1)
        try:
            q = transform_apply(ct, r, T)
        except Exception as exc:
            last = exc
            h *= 0.5
            continue
        graph = polyhedral_graph_from_faces(
            [facet_cycle(ct, q, f) for f in sorted(ct.facet_ids)]
        )
        positions = {v: q.coords[v][:2] for v in ct.vertex_ids}
        heights = {v: float(q.coords[v][2]) for v in ct.vertex_ids}
        facet_index = sorted(ct.facet_ids).index(facet)
        try:
            stress = stress_from_lift(graph, positions, heights, tol)
        except (NotALift, InconsistentStress) as exc:
            last = exc
            h *= 0.5
            continue
        framework = PlanarStressedFramework(graph, positions, stress, facet_index)
        outer_edges = set(graph.face_edges[facet_index])
        signs_ok = all(
            (stress[e] < 0) == (e in outer_edges) for e in graph.edges
        )
        if signs_ok and check_self_stress(framework) < 1e-6:
            return T, framework
        last = f"sign pattern or equilibrium failed at h={h:.3e}"
        h *= 0.5
    raise NotAchieved(f"no admissible positioning found: {last}")


# =============================================================================
# Canonical realization of a polyhedral graph
# =============================================================================


def _triangle_faces(g: PolyhedralGraph) -> list[int]:
    return [i for i, c in enumerate(g.faces) if len(c) == 3]


def realize_graph(
    g: PolyhedralGraph,
    rng: np.random.Generator | None = None,
    tol: ToleranceConfig = DEFAULT_TOL,
) -> tuple[CombinatorialType, Realization]:
    """Strictly convex realization of a polyhedral graph, with vertex ids
    preserved and facet ids equal to face indices.

    Uses a Tutte embedding with random positive stresses and the lift of
    its self-stress; graphs without a triangular face are realized through
    the polar of their dual (which then must have one).
    """
    rng = rng or np.random.default_rng(0)
    tris = _triangle_faces(g)
    if tris:
        outer = tris[0]
        cycle = g.faces[outer]
        pinned = {
            cycle[0]: np.array([0.0, 0.0]),
            cycle[1]: np.array([1.0, 0.0]),
            cycle[2]: np.array([0.5, np.sqrt(3) / 2]),
        }
        stress = {
            e: float(rng.uniform(0.5, 2.0))
            for e in g.edges
            if not (e[0] in cycle and e[1] in cycle)
        }
        fw = tutte_embed(g, outer, pinned, stress)
        rec = reciprocal_build(fw)
        lift = mc_lift(fw, rec)
        ct, r = lift_to_polytope(fw, lift, tol)
        # recentre for downstream polarity / conditioning
        shift = -r.centroid
        coords = {v: p + shift for v, p in r.coords.items()}
        return ct, Realization(3, coords, dict(r.normals))

    dual, _ = dual_graph(g)
    ct_d, r_d = realize_graph(dual, rng, tol)
    # polar: one vertex per dual facet; dual facet index k <-> primal vertex
    coords = {}
    for k in sorted(ct_d.facet_ids):
        members = ct_d.facet_vertices[k]
        a = r_d.normals[k]
        level = float(np.mean([a @ r_d.coords[v] for v in members]))
        if level <= 1e-12:
            raise NotAchieved("dual realization does not contain the origin")
        coords[g.vertices[k]] = a / level
    incidence = frozenset(
        (g.vertices[f], v) for (v, f) in ct_d.incidence
    )
    ct = CombinatorialType(
        tuple(g.vertices), tuple(sorted(ct_d.vertex_ids)), incidence
    )
    interior = np.mean(list(coords.values()), axis=0)
    normals = {}
    for f in ct.facet_ids:
        pts = np.asarray([coords[v] for v in sorted(ct.facet_vertices[f])])
        cc = pts.mean(axis=0)
        _, _, vt = np.linalg.svd(pts - cc)
        n = vt[-1]
        if n @ (cc - interior) < 0:
            n = -n
        normals[f] = n / np.linalg.norm(n)
    r = Realization(3, coords, normals)
    rep = validate_realization(ct, r, tol)
    if not rep.ok(tol):
        raise NotAchieved(f"polar realization fails validation: {rep}")
    return ct, r
