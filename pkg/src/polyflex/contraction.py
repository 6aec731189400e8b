"""Contraction sequences and flex limits.

Given a polyhedral graph G, a contractible edge e, and a strictly convex
target realization of the minor G/e, this module constructs a sequence of
strictly convex realizations of G converging to the target:

- Case 1 (a facial triangle of G survives the contraction): position the
  target projectively as a Maxwell-Cremona lift over that triangle, split
  its interior stress across the edge classes, drive the contracted edge's
  stress to infinity along a geometric schedule, and pull each Tutte
  embedding back through reciprocal + lift + inverse transform.  An edge
  whose stress grows without bound shrinks to length zero in the Tutte
  embedding, while everything else converges.
- Case 2 (no such triangle; then a degree-3 vertex away from e exists):
  truncate that vertex in both G and the target, run Case 1 on the
  truncated pair, then remove the truncation facet by intersecting its
  three neighboring planes back into an apex.

``flex_limit`` re-orients the sequence so the contracted edge lies on a
fixed line, gauges each per-index first-order flex to vanish on the edge's
endpoints and one incident facet normal, normalizes, and estimates the
limit from the tail; the verdict says whether the limit is a nontrivial
first-order flex of the contracted polytope.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import (
    DEFAULT_TOL,
    ProjectiveTransform,
    Realization,
    ToleranceConfig,
    transform_apply,
    validate_realization,
)
from .graphs import (
    CombinatorialType,
    ContractionMap,
    Edge,
    PolyhedralGraph,
    build_edge_graph,
    canonical_form,
    contract_edge,
    edge_key,
    graph_to_combinatorial_type,
    triangle_or_three_vertex,
    truncate_three_vertex,
)
from .rigidity import build_rigidity_matrix, flex_analysis, trivial_motion_basis
from .tutte_mc import (
    Lift,
    PlanarStressedFramework,
    ReciprocalFramework,
    lift_to_polytope,
    mc_lift,
    mc_position_transform,
    reciprocal_build,
    tutte_embed,
    _rotation_taking,
)


class CaseUnavailable(RuntimeError):
    """Neither pipeline case applies (guarded; cannot occur for polyhedral
    inputs with a contractible edge)."""


class NoConvergence(RuntimeError):
    """Tail of gauge-fixed flexes fails the Cauchy test."""

    def __init__(self, message, diffs):
        super().__init__(message)
        self.diffs = diffs


# =============================================================================
# Stress bookkeeping
# =============================================================================


def contracted_stress(
    partial: dict[Edge, float], cmap: ContractionMap
) -> dict[Edge, float]:
    """Sum a partial stress over the edge classes of a contraction minor."""
    out: dict[Edge, float] = {}
    for minor_edge, members in cmap.edge_classes.items():
        vals = [partial[e] for e in members if e in partial]
        if len(vals) == len(members):
            out[minor_edge] = sum(vals)
    return out


def split_stress(
    minor_stress: dict[Edge, float], cmap: ContractionMap
) -> dict[Edge, float]:
    """Spread a minor stress evenly over each edge class, so that
    ``contracted_stress`` recovers it exactly."""
    out: dict[Edge, float] = {}
    for minor_edge, value in minor_stress.items():
        members = cmap.edge_classes[edge_key(*minor_edge)]
        share = value / len(members)
        for e in members:
            out[e] = share
    return out


@dataclass(frozen=True)
class StressSchedule:
    """Geometric escalation of the contracted edge's stress.

    Between-class edges keep their base value; intra-class edges grow by a
    factor gamma per index.
    """

    base: dict[Edge, float]
    intra_edges: tuple[Edge, ...]
    start: float
    gamma: float
    steps: int

    def __post_init__(self):
        if self.gamma <= 1:
            raise ValueError("growth factor must exceed 1")

    def stresses_at(self, n: int) -> dict[Edge, float]:
        out = dict(self.base)
        for e in self.intra_edges:
            out[e] = self.start * self.gamma**n
        return out


# =============================================================================
# Sequence container
# =============================================================================


@dataclass(frozen=True)
class ContractionSequence:
    graph: PolyhedralGraph
    edge: Edge
    ct: CombinatorialType  # combinatorial type of G (facets = face indices)
    map: ContractionMap  # G -> G/e
    target_ct: CombinatorialType
    target_real: Realization
    realizations: tuple[Realization, ...]  # P^1 ... P^N, keyed like ct
    case: str  # "triangle" | "three_vertex"
    schedule: StressSchedule | None = None
    transform: ProjectiveTransform | None = None
    frameworks: tuple[PlanarStressedFramework, ...] = ()
    reciprocals: tuple[ReciprocalFramework, ...] = ()
    lifts: tuple[Lift, ...] = ()
    contracted_framework: PlanarStressedFramework | None = None
    contracted_reciprocal: ReciprocalFramework | None = None
    contracted_lift: Lift | None = None
    pipeline_map: ContractionMap | None = None  # H -> H/e in the truncated case

    def __len__(self) -> int:
        return len(self.realizations)


def _case1_pipeline(
    graph: PolyhedralGraph,
    e: Edge,
    cmap: ContractionMap,
    target_ct: CombinatorialType,
    target_real: Realization,
    delta_face: int,
    steps: int,
    gamma: float,
    tol: ToleranceConfig,
    final_stress_ratio: float,
):
    """Shared core: run the Tutte/reciprocal/lift ladder on ``graph`` whose
    contraction (via cmap) is realized by ``target_real``.  ``delta_face``
    is a triangular face index of ``graph`` persisting in the minor."""
    delta_minor = cmap.face_map[delta_face]
    if delta_minor is None:
        raise ValueError("chosen triangle does not persist in the minor")

    T, fw_minor = mc_position_transform(target_ct, target_real, delta_minor, tol)

    # base partial stress on E(G) minus the triangle's edges
    delta_cycle = graph.faces[delta_face]
    delta_edges = {
        edge_key(delta_cycle[i], delta_cycle[(i + 1) % 3]) for i in range(3)
    }
    minor_outer_edges = set(fw_minor.graph.face_edges[delta_minor])
    minor_interior = {
        me: w for me, w in fw_minor.stress.items() if me not in minor_outer_edges
    }
    base = split_stress(minor_interior, cmap)
    positive = [w for w in base.values() if w > 0]
    fallback = float(np.median(positive)) if positive else 1.0
    for ge in graph.edges:
        if ge in delta_edges or ge == e:
            continue
        if ge not in base:
            # class collapsed onto an outer edge of the minor; any positive
            # value works since the limit puts no constraint on it
            base[ge] = fallback
    base.pop(e, None)

    # the start value places the final stress at final_stress_ratio times the
    # largest base stress: high enough that the contracted edge's Tutte
    # length drops well below the convergence thresholds, low enough that
    # every member stays strictly convex at validation tolerance and the
    # Laplacian solves stay well-conditioned
    top = max(positive) if positive else 1.0
    schedule = StressSchedule(
        base=base,
        intra_edges=(e,),
        start=top * final_stress_ratio / gamma**steps,
        gamma=gamma,
        steps=steps,
    )

    pinned = {
        v: fw_minor.positions[cmap.vertex_map[v]] for v in delta_cycle
    }
    base_vertex = min(delta_cycle)

    rec_minor = reciprocal_build(fw_minor, base=(delta_minor, np.zeros(2)))
    minor_heights = {
        v: float(
            transform_apply(target_ct, target_real, T).coords[v][2]
        )
        for v in target_ct.vertex_ids
    }
    lift_minor = Lift(minor_heights, cmap.vertex_map[base_vertex])

    frameworks = []
    reciprocals = []
    lifts = []
    reals = []
    for n in range(1, steps + 1):
        stresses = schedule.stresses_at(n)
        fw = tutte_embed(graph, delta_face, pinned, stresses)
        rec = reciprocal_build(fw, base=(delta_face, np.zeros(2)))
        lift = mc_lift(
            fw, rec, base=(base_vertex, minor_heights[cmap.vertex_map[base_vertex]])
        )
        ct_n, q_n = lift_to_polytope(fw, lift, tol)
        frameworks.append(fw)
        reciprocals.append(rec)
        lifts.append(lift)
        reals.append((ct_n, q_n))
    return T, fw_minor, rec_minor, lift_minor, schedule, frameworks, reciprocals, lifts, reals


def contraction_sequence(
    graph: PolyhedralGraph,
    e: Edge,
    target: tuple[CombinatorialType, Realization],
    steps: int = 8,
    gamma: float = 10.0,
    tol: ToleranceConfig = DEFAULT_TOL,
    truncation_eps: float = 0.25,
    final_stress_ratio: float = 3e5,
) -> ContractionSequence:
    """Sequence of strictly convex realizations of ``graph`` converging to
    the given realization of the contraction minor.

    ``target`` must be keyed like ``contract_edge(graph, e)``: vertex ids of
    the minor and facet ids equal to the minor's face indices.
    """
    e = edge_key(*e)
    minor, cmap = contract_edge(graph, e)  # raises if e is not contractible
    target_ct, target_real = target
    if set(target_ct.vertex_ids) != set(minor.vertices):
        raise ValueError("target realization does not match the contraction minor")
    rep = validate_realization(target_ct, target_real, tol)
    if not rep.ok(tol):
        raise ValueError(f"target realization is not strictly convex: {rep}")

    choice = triangle_or_three_vertex(graph, e)
    ct_g = graph_to_combinatorial_type(graph)

    if choice.kind == "facial_triangle":
        (
            T,
            fw_minor,
            rec_minor,
            lift_minor,
            schedule,
            frameworks,
            reciprocals,
            lifts,
            reals,
        ) = _case1_pipeline(
            graph, e, cmap, target_ct, target_real, choice.face, steps, gamma, tol,
            final_stress_ratio,
        )
        t_inv = T.inverse()
        out_reals = []
        for ct_n, q_n in reals:
            p_n = transform_apply(ct_n, q_n, t_inv)
            _validate_member(ct_g, graph, p_n, tol)
            out_reals.append(p_n)
        return ContractionSequence(
            graph,
            e,
            ct_g,
            cmap,
            target_ct,
            target_real,
            tuple(out_reals),
            "triangle",
            schedule,
            T,
            tuple(frameworks),
            tuple(reciprocals),
            tuple(lifts),
            fw_minor,
            rec_minor,
            lift_minor,
            pipeline_map=cmap,
        )

    if choice.kind != "three_vertex":  # pragma: no cover - guarded
        raise CaseUnavailable("no persistent triangle and no spare 3-vertex")

    v = choice.vertex
    eps = truncation_eps
    for _ in range(12):
        try:
            return _truncated_sequence(
                graph, e, cmap, target_ct, target_real, v, steps, gamma, tol, eps,
                ct_g, final_stress_ratio,
            )
        except (ValueError, RuntimeError):
            eps *= 0.5
    raise CaseUnavailable("truncated pipeline failed for all truncation sizes")


def _truncated_sequence(
    graph, e, cmap, target_ct, target_real, v, steps, gamma, tol, eps, ct_g,
    final_stress_ratio,
):
    trunc = truncate_three_vertex(graph, v)
    delta_face = len(trunc.faces) - 1  # the added triangle
    minor_t, cmap_t = contract_edge(trunc, e)

    # target realization of the truncated minor: cut the 3-vertex of the
    # given target at parameter eps along its edges
    neighbors = sorted(graph.adjacency[v])
    sub_ids = {n: max(graph.vertices) + 1 + k for k, n in enumerate(neighbors)}
    coords = {
        u: target_real.coords[u].copy()
        for u in target_ct.vertex_ids
        if u != v
    }
    pv = target_real.coords[v]
    for n_g, sid in sub_ids.items():
        n_minor = cmap.vertex_map[n_g]
        coords[sid] = pv + eps * (target_real.coords[n_minor] - pv)
    ct_tm = graph_to_combinatorial_type(minor_t)
    interior = np.mean(list(coords.values()), axis=0)
    normals = {}
    for fi, cycle in enumerate(minor_t.faces):
        pts = np.asarray([coords[u] for u in cycle])
        c = pts.mean(axis=0)
        _, _, vt = np.linalg.svd(pts - c)
        nvec = vt[-1]
        if nvec @ (c - interior) < 0:
            nvec = -nvec
        normals[fi] = nvec / np.linalg.norm(nvec)
    r_tm = Realization(3, coords, normals)
    rep = validate_realization(ct_tm, r_tm, tol)
    if not rep.ok(tol):
        raise ValueError(f"truncated target not strictly convex: {rep}")

    (
        T,
        fw_minor,
        rec_minor,
        lift_minor,
        schedule,
        frameworks,
        reciprocals,
        lifts,
        reals,
    ) = _case1_pipeline(
        trunc, e, cmap_t, ct_tm, r_tm, delta_face, steps, gamma, tol,
        final_stress_ratio,
    )

    # carve the apex back: intersect the three planes that neighbor the
    # truncation triangle, then drop the subdivision vertices
    t_inv = T.inverse()
    faces_at_v = [fi for fi, c in enumerate(graph.faces) if v in c]
    out_reals = []
    for ct_n, q_n in reals:
        q = transform_apply(ct_n, q_n, t_inv)
        A = np.zeros((3, 3))
        b = np.zeros(3)
        for row, fi in enumerate(faces_at_v):
            members = sorted(ct_n.facet_vertices[fi])
            a = q.normals[fi]
            A[row] = a
            b[row] = float(np.mean([a @ q.coords[u] for u in members]))
        apex = np.linalg.solve(A, b)
        coords_g = {
            u: q.coords[u].copy() for u in graph.vertices if u != v
        }
        coords_g[v] = apex
        normals_g = {fi: q.normals[fi].copy() for fi in range(len(graph.faces))}
        p_n = Realization(3, coords_g, normals_g)
        _validate_member(ct_g, graph, p_n, tol)
        out_reals.append(p_n)

    return ContractionSequence(
        graph,
        e,
        ct_g,
        cmap,
        target_ct,
        target_real,
        tuple(out_reals),
        "three_vertex",
        schedule,
        T,
        tuple(frameworks),
        tuple(reciprocals),
        tuple(lifts),
        fw_minor,
        rec_minor,
        lift_minor,
        pipeline_map=cmap_t,
    )


def _validate_member(ct_g, graph, real, tol):
    rep = validate_realization(ct_g, real, tol)
    if not rep.ok(tol):
        raise RuntimeError(f"sequence member fails strict convexity: {rep}")
    from .geometry import hull_realization

    hull_ct, _ = hull_realization(real.points(sorted(real.coords)), tol)
    if canonical_form(build_edge_graph(hull_ct)) != canonical_form(graph):
        raise RuntimeError("sequence member's hull has the wrong combinatorics")


# =============================================================================
# Convergence metrics
# =============================================================================


@dataclass(frozen=True)
class ConvergenceReport:
    edge_length: np.ndarray  # contracted edge length per index
    vertex_dist: np.ndarray  # max |p_i - target class point| per index
    normal_dev: np.ndarray  # max |a_f - target normal| over persistent facets
    reciprocal_dev: np.ndarray  # max |w_f - contracted w| over persistent faces
    lift_dev: np.ndarray  # max |h_i - contracted h over classes|
    scale: float

    def tail_decreasing(self, last: int = 3) -> bool:
        def dec(a):
            t = a[-last:]
            return all(t[i + 1] < t[i] for i in range(len(t) - 1))

        return dec(self.edge_length) and dec(self.vertex_dist)


def convergence_report(seq: ContractionSequence) -> ConvergenceReport:
    i_hat, j_hat = seq.edge
    edge_len = []
    vert = []
    norm = []
    for r in seq.realizations:
        edge_len.append(float(np.linalg.norm(r.coords[i_hat] - r.coords[j_hat])))
        vert.append(
            max(
                float(
                    np.linalg.norm(
                        r.coords[u] - seq.target_real.coords[seq.map.vertex_map[u]]
                    )
                )
                for u in seq.graph.vertices
            )
        )
        devs = []
        for fi, fm in seq.map.face_map.items():
            if fm is None:
                continue
            devs.append(
                float(np.linalg.norm(r.normals[fi] - seq.target_real.normals[fm]))
            )
        norm.append(max(devs))

    rec_dev = []
    lift_dev = []
    pmap = seq.pipeline_map
    for rec, lift in zip(seq.reciprocals, seq.lifts):
        devs = [
            float(np.linalg.norm(rec.positions[fi] - seq.contracted_reciprocal.positions[fm]))
            for fi, fm in pmap.face_map.items()
            if fm is not None
        ]
        rec_dev.append(max(devs))
        hd = [
            abs(lift.heights[u] - seq.contracted_lift.heights[pmap.vertex_map[u]])
            for u in lift.heights
        ]
        lift_dev.append(max(hd))

    return ConvergenceReport(
        np.asarray(edge_len),
        np.asarray(vert),
        np.asarray(norm),
        np.asarray(rec_dev),
        np.asarray(lift_dev),
        scale=seq.target_real.diameter,
    )


# =============================================================================
# Flex limits
# =============================================================================


@dataclass(frozen=True)
class FlexLimitResult:
    verdict: str  # "limit_is_flex" | "limit_degenerate"
    limit_motion: np.ndarray  # packed for the contracted layout
    rigidity_residual: float
    nontrivial_norm: float
    cauchy_diffs: np.ndarray
    relations: dict


def default_gauge(seq: ContractionSequence):
    """Line through the target's contraction vertex along the first
    realization's pre-contraction edge direction; gauge facet is a face of
    the graph incident to the contracted edge, preferring one that
    persists and is non-triangular."""
    i_hat, j_hat = seq.edge
    d = seq.realizations[0].coords[j_hat] - seq.realizations[0].coords[i_hat]
    d = d / np.linalg.norm(d)
    anchor = seq.target_real.coords[seq.map.vertex_map[i_hat]]
    e_faces = seq.graph.faces_of_edge(seq.edge)
    ranked = sorted(
        e_faces,
        key=lambda fi: (
            seq.map.face_map[fi] is None,
            len(seq.graph.faces[fi]) == 3,
            fi,
        ),
    )
    return (anchor, d), ranked[0]


def aligned_flexes(
    seq: ContractionSequence, tol: ToleranceConfig = DEFAULT_TOL
) -> list[np.ndarray]:
    """One nontrivial flex per index, continued along the sequence by
    projecting the previous pick onto the next kernel."""
    flexes = []
    prev = None
    for r in seq.realizations:
        rep = flex_analysis(seq.ct, r, tol, use_exact_oracle=False)
        basis = rep.basis.nontrivial_basis
        if not len(basis):
            raise ValueError("sequence member is first-order rigid; no flex to track")
        if prev is None:
            vec = basis[0]
        else:
            coeffs = basis @ prev
            vec = basis.T @ coeffs
            if np.linalg.norm(vec) < 1e-8:
                vec = basis[0]
        vec = vec / np.linalg.norm(vec)
        flexes.append(vec)
        prev = vec
    return flexes


def _orienting_isometry(r: Realization, e: Edge, line):
    anchor, direction = line
    i_hat, j_hat = e
    d = r.coords[j_hat] - r.coords[i_hat]
    nd = np.linalg.norm(d)
    rot = _rotation_taking(d / nd, direction) if nd > 0 else np.eye(3)
    mid = 0.5 * (r.coords[i_hat] + r.coords[j_hat])
    shift = np.asarray(anchor) - rot @ mid
    return rot, shift


def flex_limit(
    seq: ContractionSequence,
    flexes: list[np.ndarray] | None = None,
    gauge=None,
    tol: ToleranceConfig = DEFAULT_TOL,
    cauchy_threshold: float = 1e-4,
) -> FlexLimitResult:
    """Estimate the limit of the per-index flexes on the contracted type.

    Each realization is re-oriented so the contracted edge lies on the gauge
    line; each flex is normalized after subtracting the trivial motion that
    zeroes the edge-endpoint velocities and the gauge facet's normal
    velocity.  The limit is read off the tail (the analytic device of
    extracting a convergent subsequence is replaced by a Cauchy check on
    the last entries; failure raises NoConvergence instead of guessing).
    """
    if flexes is None:
        flexes = aligned_flexes(seq, tol)
    if gauge is None:
        line, sigma_face = default_gauge(seq)
    else:
        line, sigma_face = gauge
    i_hat, j_hat = seq.edge

    gauged = []
    relations: dict[str, list[float]] = {"a_sigma_perp_line": [], "a_tau_perp_line": []}
    e_faces = seq.graph.faces_of_edge(seq.edge)
    tau_face = [f for f in e_faces if f != sigma_face][0]

    for r, flex in zip(seq.realizations, flexes):
        rot, shift = _orienting_isometry(r, seq.edge, line)
        coords = {u: rot @ r.coords[u] + shift for u in r.coords}
        normals = {f: rot @ r.normals[f] for f in r.normals}
        r_or = Realization(3, coords, normals)
        rm = build_rigidity_matrix(seq.ct, r_or)

        # rotate the flex into the new frame
        pdot, adot = rm.motion_parts(flex)
        vec = rm.pack_motion(
            {u: rot @ pdot[u] for u in pdot}, {f: rot @ adot[f] for f in adot}
        )

        # subtract the trivial motion matching the gauge components
        T = trivial_motion_basis(seq.ct, r_or)
        rows = np.concatenate(
            [
                np.arange(rm.vertex_block(i_hat).start, rm.vertex_block(i_hat).stop),
                np.arange(rm.vertex_block(j_hat).start, rm.vertex_block(j_hat).stop),
                np.arange(rm.facet_block(sigma_face).start, rm.facet_block(sigma_face).stop),
            ]
        )
        A = T[:, rows].T
        bvec = vec[rows]
        coeff, *_ = np.linalg.lstsq(A, bvec, rcond=None)
        vec = vec - T.T @ coeff
        nv = np.linalg.norm(vec)
        if nv < 1e-12:
            raise NoConvergence("flex collapses to a trivial motion", np.array([]))
        vec = vec / nv
        if gauged and float(vec @ gauged[-1]) < 0:
            vec = -vec
        gauged.append(vec)

        d_line = line[1]
        relations["a_sigma_perp_line"].append(
            abs(float(r_or.normals[sigma_face] @ d_line))
        )
        relations["a_tau_perp_line"].append(
            abs(float(r_or.normals[tau_face] @ d_line))
        )

    tail = min(3, len(gauged) - 1)
    diffs = np.asarray(
        [float(np.linalg.norm(gauged[-k] - gauged[-k - 1])) for k in range(1, tail + 1)]
    )
    if len(diffs) and diffs.max() > cauchy_threshold:
        raise NoConvergence(
            f"gauge-fixed flex tail is not Cauchy (max diff {diffs.max():.3e})",
            diffs,
        )
    limit_raw = gauged[-1]

    # assemble the candidate on the contracted polytope, evaluated against
    # the re-oriented target
    rot, shift = _orienting_isometry(seq.realizations[-1], seq.edge, line)
    t_coords = {
        u: rot @ seq.target_real.coords[u] + shift for u in seq.target_real.coords
    }
    t_normals = {f: rot @ seq.target_real.normals[f] for f in seq.target_real.normals}
    target_or = Realization(3, t_coords, t_normals)
    rm_g = build_rigidity_matrix(seq.ct, seq.realizations[-1])
    pdot, adot = rm_g.motion_parts(limit_raw)

    rm_t = build_rigidity_matrix(seq.target_ct, target_or)
    merged = seq.map.vertex_map[i_hat]
    pdot_t = {}
    for cls_vertex, members in seq.map.vertex_classes.items():
        if cls_vertex == merged:
            pdot_t[cls_vertex] = np.zeros(3)
        else:
            pdot_t[cls_vertex] = pdot[next(iter(members))]
    adot_t = {}
    for fi, fm in seq.map.face_map.items():
        if fm is not None:
            adot_t[fm] = adot[fi]
    limit_vec = rm_t.pack_motion(pdot_t, adot_t)

    norm_limit = np.linalg.norm(limit_vec)
    if norm_limit < 1e-10:
        return FlexLimitResult(
            "limit_degenerate", limit_vec, np.inf, 0.0, diffs, relations
        )
    resid = float(
        np.linalg.norm(rm_t.matrix @ limit_vec)
        / (np.linalg.norm(rm_t.matrix, 2) * norm_limit)
    )
    Tt = trivial_motion_basis(seq.target_ct, target_or)
    Tq, _ = np.linalg.qr(Tt.T)
    nontrivial = limit_vec - Tq @ (Tq.T @ limit_vec)
    nt_norm = float(np.linalg.norm(nontrivial)) / norm_limit

    ok = resid < 1e-5 and nt_norm > 1e-2
    return FlexLimitResult(
        "limit_is_flex" if ok else "limit_degenerate",
        limit_vec,
        resid,
        nt_norm,
        diffs,
        relations,
    )
