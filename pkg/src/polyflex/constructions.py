"""Constructions of flexible polytopes and numerical flex-path tooling.

- Minkowski sums and Minkowski flexes (reorienting one summand while the
  other stays put; edge lengths are inherited from the summands).
- Zonotope flexes: redirect the generators by a linear family and restore
  their lengths; the combinatorics depends only on the oriented matroid of
  directions, so the type is preserved while face angles change.
- Pyramid stacking over a facet (flat apex along the outward normal).
- A generic predictor-corrector that follows a first-order flex along the
  constraint manifold (edge lengths + coplanarity + unit normals), and a
  validator that certifies a sampled path as a genuine flex (constant
  lengths and type, non-congruent endpoints).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import (
    DEFAULT_TOL,
    CongruenceReport,
    Realization,
    ToleranceConfig,
    congruence_class_check,
    facet_cycle,
    hull_realization,
    validate_realization,
)
from .graphs import (
    CombinatorialType,
    Edge,
    build_edge_graph,
    canonical_form,
)
from .rigidity import build_rigidity_matrix


class TypeBreak(RuntimeError):
    """Combinatorial type changed along a parameter path."""

    def __init__(self, t: float, message: str = ""):
        super().__init__(f"combinatorial type changed at t={t:g} {message}".strip())
        self.t = t


class TooTall(ValueError):
    """Stacked apex breaks convexity or swallows a neighboring facet."""


class CorrectorDiverged(RuntimeError):
    """Path corrector failed to converge; carries the partial path."""

    def __init__(self, t: float, partial: "FlexPath | None" = None):
        super().__init__(f"corrector diverged at t={t:g}")
        self.t = t
        self.partial = partial


# =============================================================================
# Flex paths
# =============================================================================


@dataclass(frozen=True)
class FlexPath:
    ct: CombinatorialType
    ts: np.ndarray
    realizations: tuple[Realization, ...]
    reference_lengths: dict[Edge, float]

    def __len__(self) -> int:
        return len(self.realizations)


def _edge_lengths(ct: CombinatorialType, r: Realization) -> dict[Edge, float]:
    g = build_edge_graph(ct)
    return {
        e: float(np.linalg.norm(r.coords[e[0]] - r.coords[e[1]])) for e in g.edges
    }


def _hull_canonical(coords: np.ndarray):
    from .graphs import PolyhedralGraph, is_polyhedral

    ct, _ = hull_realization(coords)
    g = build_edge_graph(ct)
    return canonical_form(g)


@dataclass(frozen=True)
class FlexPathReport:
    max_length_deviation: float
    max_realization_residual: float
    type_constant: bool
    endpoints_congruent: bool
    endpoint_congruence: CongruenceReport

    @property
    def certifies_flex(self) -> bool:
        return (
            self.type_constant
            and not self.endpoints_congruent
        )


def validate_flex_path(
    path: FlexPath, tol: ToleranceConfig = DEFAULT_TOL
) -> FlexPathReport:
    """Certificate data for a sampled path: a path certifies a flex iff
    edge lengths and the combinatorial type stay constant while the
    endpoints are not congruent."""
    if not len(path):
        raise ValueError("empty path")
    max_dev = 0.0
    max_resid = 0.0
    for r in path.realizations:
        lengths = _edge_lengths(path.ct, r)
        for e, ref in path.reference_lengths.items():
            max_dev = max(max_dev, abs(lengths[e] - ref))
        rep = validate_realization(path.ct, r, tol)
        max_resid = max(max_resid, rep.max_coplanarity_residual, rep.max_norm_residual)

    ref_code = _hull_canonical(path.realizations[0].points())
    type_constant = all(
        _hull_canonical(r.points()) == ref_code for r in path.realizations[1:]
    )
    cong = congruence_class_check(
        path.ct, path.realizations[0], path.realizations[-1], tol
    )
    lim = tol.residual_tol * max(r.diameter for r in path.realizations)
    return FlexPathReport(
        max_dev,
        max_resid,
        type_constant and max_dev <= max(lim, 1e-7 * path.realizations[0].diameter),
        cong.congruent,
        cong,
    )


# =============================================================================
# Minkowski sums and flexes
# =============================================================================


def _pair_points(rP: Realization, rQ: Realization, rot=None):
    pv = sorted(rP.coords)
    qv = sorted(rQ.coords)
    rot = np.eye(3) if rot is None else rot
    pts = []
    for p in pv:
        for q in qv:
            pts.append(rP.coords[p] + rot @ rQ.coords[q])
    return np.asarray(pts), pv, qv


def minkowski_sum(
    rP: Realization, rQ: Realization, tol: ToleranceConfig = DEFAULT_TOL
) -> tuple[CombinatorialType, Realization]:
    """Hull of pairwise vertex sums.  Output vertex id i*|Q|+j records the
    summand pair, so sample paths keep consistent labels."""
    pts, pv, qv = _pair_points(rP, rQ)
    return hull_realization(pts, tol)


def _check_no_merged_edges(ct: CombinatorialType, n_q: int) -> None:
    """Every Minkowski-sum edge must move in only one summand (its vertex
    pairs agree in the other coordinate); a violation means two parallel
    summand edges merged, and reorientation would not preserve lengths."""
    g = build_edge_graph(ct)
    for u, v in g.edges:
        iu, ju = divmod(u, n_q)
        iv, jv = divmod(v, n_q)
        if iu != iv and ju != jv:
            raise ValueError(
                "summands share an edge direction degenerately; the sum has a "
                "merged parallel-edge pair and no length-preserving reorientation"
            )


def minkowski_flex(
    rP: Realization,
    rQ: Realization,
    rotation_path,
    samples: int = 20,
    tol: ToleranceConfig = DEFAULT_TOL,
) -> FlexPath:
    """Sample P + R(t)Q for t in [0, 1].

    Fails fast with TypeBreak at the first sample whose hull combinatorics
    differ from the t=0 sum.
    """
    n_q = len(rQ.coords)
    ts = np.linspace(0.0, 1.0, samples)
    base_ct = None
    base_code = None
    reals = []
    for t in ts:
        pts, _, _ = _pair_points(rP, rQ, rot=rotation_path(float(t)))
        ct, r = hull_realization(pts, tol)
        if base_ct is None:
            _check_no_merged_edges(ct, n_q)
            base_ct = ct
            base_code = canonical_form(build_edge_graph(ct))
            reals.append(r)
            continue
        if set(ct.vertex_ids) != set(base_ct.vertex_ids) or canonical_form(
            build_edge_graph(ct)
        ) != base_code:
            raise TypeBreak(float(t))
        # rebuild with the base facet labelling so ids line up across samples
        reals.append(
            Realization(3, dict(r.coords), _relabel_normals(base_ct, r))
        )
    lengths = _edge_lengths(base_ct, reals[0])
    return FlexPath(base_ct, ts, tuple(reals), lengths)


def _relabel_normals(base_ct: CombinatorialType, r: Realization) -> dict[int, np.ndarray]:
    """Recompute normals for the base facet labelling from the sample's
    coordinates (facet vertex sets can be matched by recomputing planes)."""
    interior = np.mean(list(r.coords.values()), axis=0)
    normals = {}
    for f in base_ct.facet_ids:
        pts = np.asarray([r.coords[v] for v in sorted(base_ct.facet_vertices[f])])
        c = pts.mean(axis=0)
        _, _, vt = np.linalg.svd(pts - c)
        n = vt[-1]
        if n @ (c - interior) < 0:
            n = -n
        normals[f] = n / np.linalg.norm(n)
    return normals


# =============================================================================
# Zonotopes
# =============================================================================


@dataclass(frozen=True)
class Zonotope:
    """Generators of a Minkowski sum of segments, parallel ones merged."""

    generators: np.ndarray

    @classmethod
    def from_vectors(cls, vectors) -> "Zonotope":
        vecs = [np.asarray(v, dtype=float) for v in vectors]
        groups: list[list[np.ndarray]] = []
        dirs: list[np.ndarray] = []
        for v in vecs:
            n = np.linalg.norm(v)
            if n < 1e-14:
                continue
            d = v / n
            for k in range(3):  # canonical sign: first nonzero positive
                if abs(d[k]) > 1e-12:
                    if d[k] < 0:
                        d = -d
                    break
            placed = False
            for gi, gd in enumerate(dirs):
                if np.linalg.norm(gd - d) < 1e-12:
                    groups[gi].append(v)
                    placed = True
                    break
            if not placed:
                dirs.append(d)
                groups.append([v])
        gens = [d * sum(float(np.linalg.norm(v)) for v in g) for d, g in zip(dirs, groups)]
        if len(gens) < 3:
            raise ValueError("need at least three independent generators")
        return cls(np.asarray(gens))

    def vertex_candidates(self, generators=None) -> np.ndarray:
        """Sign-combination points (vertex id = sign bitmask index)."""
        gens = self.generators if generators is None else generators
        r = len(gens)
        pts = np.zeros((2**r, 3))
        for mask in range(2**r):
            s = np.array([1.0 if mask & (1 << k) else -1.0 for k in range(r)])
            pts[mask] = 0.5 * (s[:, None] * gens).sum(axis=0)
        return pts

    def realize(self, generators=None, tol: ToleranceConfig = DEFAULT_TOL):
        return hull_realization(self.vertex_candidates(generators), tol)


def zonotope_flex(
    z: Zonotope,
    linear_path,
    samples: int = 20,
    tol: ToleranceConfig = DEFAULT_TOL,
) -> FlexPath:
    """Redirect each generator by A(t) and restore its length; edge lengths
    are preserved exactly by construction.  ``linear_path(0)`` must be the
    identity."""
    A0 = np.asarray(linear_path(0.0), dtype=float)
    if not np.allclose(A0, np.eye(3), atol=1e-12):
        raise ValueError("linear path must start at the identity")
    ts = np.linspace(0.0, 1.0, samples)
    norms = np.linalg.norm(z.generators, axis=1)
    base_ct = None
    base_code = None
    reals = []
    for t in ts:
        A = np.asarray(linear_path(float(t)), dtype=float)
        imgs = (A @ z.generators.T).T
        gens = imgs * (norms / np.linalg.norm(imgs, axis=1))[:, None]
        ct, r = z.realize(gens, tol)
        if base_ct is None:
            base_ct = ct
            base_code = canonical_form(build_edge_graph(ct))
            reals.append(r)
            continue
        if set(ct.vertex_ids) != set(base_ct.vertex_ids) or canonical_form(
            build_edge_graph(ct)
        ) != base_code:
            raise TypeBreak(float(t))
        reals.append(Realization(3, dict(r.coords), _relabel_normals(base_ct, r)))
    lengths = _edge_lengths(base_ct, reals[0])
    return FlexPath(base_ct, ts, tuple(reals), lengths)


# =============================================================================
# Stacking
# =============================================================================


def stack_pyramid(
    ct: CombinatorialType,
    r: Realization,
    facet: int,
    height: float,
    tol: ToleranceConfig = DEFAULT_TOL,
) -> tuple[CombinatorialType, Realization]:
    """Replace a facet by the triangle fan to a flat apex sitting ``height``
    above its centroid along the outward normal.  Raises TooTall when the
    result is not strictly convex with the expected combinatorics."""
    cycle = facet_cycle(ct, r, facet)
    apex = max(ct.vertex_ids) + 1
    centroid = np.mean([r.coords[v] for v in cycle], axis=0)
    apex_pt = centroid + float(height) * r.normals[facet]

    facet_sets = [
        sorted(ct.facet_vertices[f]) for f in sorted(ct.facet_ids) if f != facet
    ]
    for k in range(len(cycle)):
        facet_sets.append(sorted((apex, cycle[k], cycle[(k + 1) % len(cycle)])))

    vertices = tuple(sorted(ct.vertex_ids) + [apex])
    incidence = frozenset(
        (v, fi) for fi, vs in enumerate(facet_sets) for v in vs
    )
    new_ct = CombinatorialType(vertices, tuple(range(len(facet_sets))), incidence)

    coords = {v: r.coords[v].copy() for v in ct.vertex_ids}
    coords[apex] = apex_pt
    interior = np.mean(list(coords.values()), axis=0)
    normals = {}
    for fi, vs in enumerate(facet_sets):
        pts = np.asarray([coords[v] for v in vs])
        c = pts.mean(axis=0)
        _, _, vt = np.linalg.svd(pts - c)
        n = vt[-1]
        if n @ (c - interior) < 0:
            n = -n
        normals[fi] = n / np.linalg.norm(n)
    new_r = Realization(3, coords, normals)

    rep = validate_realization(new_ct, new_r, tol)
    if not rep.ok(tol):
        raise TooTall(f"apex at height {height} breaks convexity: {rep}")
    hull_ct, _ = hull_realization(new_r.points(sorted(coords)), tol)
    if canonical_form(build_edge_graph(hull_ct)) != canonical_form(
        build_edge_graph(new_ct)
    ):
        raise TooTall(f"apex at height {height} changes the face structure")
    return new_ct, new_r


# =============================================================================
# Path following along a first-order flex
# =============================================================================


def _constraint_values(ct, rm, x, targets):
    """Stacked constraint residuals at state x (same layout as motions)."""
    nv = len(rm.vertex_order)
    p = {v: x[3 * k : 3 * k + 3] for k, v in enumerate(rm.vertex_order)}
    a = {f: x[3 * (nv + k) : 3 * (nv + k) + 3] for k, f in enumerate(rm.facet_order)}
    vals = []
    for lab in rm.row_labels:
        if lab[0] == "edge":
            u, v = lab[1]
            vals.append(0.5 * (float(np.dot(p[u] - p[v], p[u] - p[v])) - targets[(u, v)]))
        elif lab[0] == "coplanar":
            f, (i0, im) = lab[1], lab[2]
            vals.append(float(np.dot(p[i0] - p[im], a[f])))
        else:
            f = lab[1]
            vals.append(0.5 * (float(np.dot(a[f], a[f])) - 1.0))
    return np.asarray(vals)


def _state_to_realization(rm, x) -> Realization:
    nv = len(rm.vertex_order)
    coords = {v: x[3 * k : 3 * k + 3].copy() for k, v in enumerate(rm.vertex_order)}
    normals = {
        f: x[3 * (nv + k) : 3 * (nv + k) + 3].copy()
        for k, f in enumerate(rm.facet_order)
    }
    return Realization(3, coords, normals)


def flex_path_follow(
    ct: CombinatorialType,
    r0: Realization,
    flex0: np.ndarray,
    step: float,
    samples: int = 20,
    tol: ToleranceConfig = DEFAULT_TOL,
    max_corrector_iters: int = 50,
) -> FlexPath:
    """Predictor-corrector integration of a first-order flex.

    Predicts along the current kernel direction, then projects back onto the
    constraint set (fixed edge lengths, coplanarity, unit normals) by damped
    Gauss-Newton.  The direction is continued by projecting the previous one
    onto the new kernel with trivial motions removed.
    """
    from .rigidity import flex_analysis

    rm0 = build_rigidity_matrix(ct, r0)
    diam = r0.diameter
    target_resid = max(tol.residual_tol * diam, 1e-12)

    kernel_resid = float(np.linalg.norm(rm0.matrix @ flex0)) / max(
        np.linalg.norm(rm0.matrix, 2) * np.linalg.norm(flex0), 1e-30
    )
    if kernel_resid > 1e-6:
        raise ValueError(f"flex0 is not in the constraint kernel ({kernel_resid:.2e})")

    g = build_edge_graph(ct)
    targets = {
        e: float(np.dot(r0.coords[e[0]] - r0.coords[e[1]], r0.coords[e[0]] - r0.coords[e[1]]))
        for e in g.edges
    }

    x = rm0.pack_motion(
        {v: r0.coords[v] for v in ct.vertex_ids},
        {f: r0.normals[f] for f in ct.facet_ids},
    )
    direction = flex0 / np.linalg.norm(flex0)
    reals = [_state_to_realization(rm0, x)]
    ts = [0.0]

    for k in range(1, samples):
        x_pred = x + step * direction
        # damped Gauss-Newton corrector
        xk = x_pred.copy()
        ok = False
        for _ in range(max_corrector_iters):
            rk = _state_to_realization(rm0, xk)
            vals = _constraint_values(ct, rm0, xk, targets)
            if np.abs(vals).max() < target_resid:
                ok = True
                break
            J = build_rigidity_matrix(ct, rk).matrix
            delta, *_ = np.linalg.lstsq(J, -vals, rcond=None)
            lam = 1.0
            best = np.abs(vals).max()
            moved = False
            for _ in range(10):
                trial = xk + lam * delta
                tv = np.abs(_constraint_values(ct, rm0, trial, targets)).max()
                if tv < best:
                    xk = trial
                    moved = True
                    break
                lam *= 0.5
            if not moved:
                break
        if not ok:
            partial = FlexPath(
                ct,
                np.asarray(ts),
                tuple(reals),
                {e: float(np.sqrt(t)) for e, t in targets.items()},
            )
            raise CorrectorDiverged(k / (samples - 1), partial)
        x = xk
        reals.append(_state_to_realization(rm0, x))
        ts.append(k / (samples - 1))

        rep = flex_analysis(ct, reals[-1], tol, use_exact_oracle=False)
        basis = rep.basis.nontrivial_basis
        if len(basis):
            coeffs = basis @ direction
            new_dir = basis.T @ coeffs
            n = np.linalg.norm(new_dir)
            if n > 1e-8:
                direction = new_dir / n
        # if the kernel degenerates we keep the previous direction and let
        # the corrector decide

    lengths = {e: float(np.sqrt(t)) for e, t in targets.items()}
    return FlexPath(ct, np.asarray(ts), tuple(reals), lengths)
