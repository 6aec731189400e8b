"""Geometric layer: realizations, hulls, convexity and projective tools.

A realization assigns coordinates to vertices and unit outward normals to
facets so that each facet's vertices are coplanar.  Strict convexity means
every non-incident vertex lies strictly on the inner side of each facet
hyperplane.

Hulls are computed with Qhull and coplanar simplices are merged back into
whole facets (the constraints of this package live on facets, not on a
triangulation).  Exact rational coordinates are carried along when the
input allows it, so that the rational rank oracle can be applied downstream.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from .graphs import CombinatorialType

ExactPoint = tuple[Fraction, ...]


class DegenerateInput(ValueError):
    """Input does not affinely span the ambient space."""


class NotAchieved(RuntimeError):
    """Iterative geometric search failed; diagnostics in the message."""


class UnknownName(KeyError):
    """Catalog name not recognized."""


class Inadmissible(ValueError):
    """Transform sends part of the polytope to infinity."""


class TypeMismatch(ValueError):
    """Realizations do not share a combinatorial type."""


# =============================================================================
# Config and core types
# =============================================================================


@dataclass(frozen=True)
class ToleranceConfig:
    """Residual tolerance is absolute but scaled by geometric diameter;
    the rank gap tolerance is relative to the largest singular value."""

    residual_tol: float = 1e-9
    rank_gap_tol: float = 1e-8

    def __post_init__(self):
        if self.residual_tol <= 0 or self.rank_gap_tol <= 0:
            raise ValueError("tolerances must be positive")


DEFAULT_TOL = ToleranceConfig()


@dataclass(frozen=True)
class Realization:
    """Vertex coordinates plus unit facet normals, keyed by ids.

    ``exact_coords`` optionally carries rational coordinates equal to the
    floating ones; it enables the exact rank oracle.
    """

    dimension: int
    coords: dict[int, np.ndarray]
    normals: dict[int, np.ndarray]
    exact_coords: dict[int, ExactPoint] | None = None

    @cached_property
    def diameter(self) -> float:
        pts = list(self.coords.values())
        if len(pts) < 2:
            return 1.0
        arr = np.asarray(pts)
        d2 = ((arr[:, None, :] - arr[None, :, :]) ** 2).sum(-1)
        return float(np.sqrt(d2.max()))

    def points(self, order=None) -> np.ndarray:
        order = sorted(self.coords) if order is None else list(order)
        return np.asarray([self.coords[v] for v in order], dtype=float)

    @cached_property
    def centroid(self) -> np.ndarray:
        return self.points().mean(axis=0)


def make_realization(coords, normals, exact_coords=None, dimension=3) -> Realization:
    c = {int(v): np.asarray(p, dtype=float) for v, p in coords.items()}
    n = {int(f): np.asarray(a, dtype=float) for f, a in normals.items()}
    return Realization(dimension, c, n, exact_coords)


@dataclass(frozen=True)
class ProjectiveTransform:
    """Nonsingular (d+1) x (d+1) matrix acting on homogeneous coordinates.

    Admissibility with respect to a point set (no point sent to or across
    infinity) is a property of the application, checked in ``apply``.
    """

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.shape[0] != m.shape[1]:
            raise ValueError("transform matrix must be square")
        if abs(np.linalg.det(m)) < 1e-300:
            raise ValueError("transform matrix is singular")
        object.__setattr__(self, "matrix", m)

    @classmethod
    def identity(cls, dimension: int = 3) -> "ProjectiveTransform":
        return cls(np.eye(dimension + 1))

    @classmethod
    def from_affine(cls, linear, translation=None) -> "ProjectiveTransform":
        A = np.asarray(linear, dtype=float)
        d = A.shape[0]
        t = np.zeros(d) if translation is None else np.asarray(translation, dtype=float)
        m = np.eye(d + 1)
        m[:d, :d] = A
        m[:d, d] = t
        return cls(m)

    @classmethod
    def homology(cls, normal, offset, center, scale) -> "ProjectiveTransform":
        """Perspective collineation fixing the hyperplane <normal, p> = offset
        pointwise and sending ``center`` to the infinite point in direction
        ``normal``.  ``scale`` sets the free parameter of the pencil."""
        a = np.asarray(normal, dtype=float)
        x = np.asarray(center, dtype=float)
        d = a.size
        fx = float(a @ x - offset)
        if abs(fx) < 1e-14:
            raise ValueError("center lies on the fixed hyperplane")
        u_xyz = (scale * a - x) / fx
        u_w = -1.0 / fx
        m = np.eye(d + 1)
        m[:d, :d] += np.outer(u_xyz, a)
        m[:d, d] = -offset * u_xyz
        m[d, :d] = u_w * a
        m[d, d] = 1.0 - offset * u_w
        return cls(m)

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0] - 1

    def is_affine(self, tol: float = 1e-14) -> bool:
        bottom = self.matrix[-1]
        ref = np.zeros_like(bottom)
        ref[-1] = self.matrix[-1, -1]
        return bool(np.allclose(bottom, ref, atol=tol * max(1.0, abs(ref[-1]))))

    def inverse(self) -> "ProjectiveTransform":
        return ProjectiveTransform(np.linalg.inv(self.matrix))

    def compose(self, other: "ProjectiveTransform") -> "ProjectiveTransform":
        """self after other."""
        return ProjectiveTransform(self.matrix @ other.matrix)

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Apply to an (n, d) array; raises Inadmissible when a point hits or
        crosses the vanishing hyperplane."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        hom = np.hstack([pts, np.ones((len(pts), 1))])
        img = hom @ self.matrix.T
        w = img[:, -1]
        scale = max(1.0, float(np.abs(img).max()))
        if np.any(np.abs(w) < 1e-12 * scale) or (w.max() > 0 > w.min()):
            raise Inadmissible("transform sends points to or across infinity")
        return img[:, :-1] / w[:, None]


def normalize_transform(T) -> ProjectiveTransform:
    """Accept a ProjectiveTransform, a dxd linear map, or an (A, t) pair."""
    if isinstance(T, ProjectiveTransform):
        return T
    if isinstance(T, tuple) and len(T) == 2:
        return ProjectiveTransform.from_affine(T[0], T[1])
    A = np.asarray(T, dtype=float)
    if A.shape == (3, 3):
        return ProjectiveTransform.from_affine(A)
    if A.shape == (4, 4):
        return ProjectiveTransform(A)
    raise ValueError(f"cannot interpret {A.shape} as a transform")


# =============================================================================
# Validation
# =============================================================================


@dataclass(frozen=True)
class ValidationReport:
    max_coplanarity_residual: float
    max_norm_residual: float
    is_convex: bool
    is_strictly_convex: bool
    diameter: float

    def ok(self, tol: ToleranceConfig = DEFAULT_TOL) -> bool:
        """Valid strictly convex realization at the given tolerance."""
        lim = tol.residual_tol * max(self.diameter, 1e-30)
        return (
            self.max_coplanarity_residual <= lim
            and self.max_norm_residual <= tol.residual_tol
            and self.is_strictly_convex
        )


def validate_realization(
    ct: CombinatorialType, r: Realization, tol: ToleranceConfig = DEFAULT_TOL
) -> ValidationReport:
    """Residuals of the defining equations plus convexity flags.

    Strict convexity requires every non-incident vertex to clear each facet
    hyperplane by more than ``residual_tol`` times the diameter.
    """
    diam = r.diameter
    margin = tol.residual_tol * max(diam, 1e-30)
    max_cop = 0.0
    max_norm = 0.0
    convex = True
    strict = True
    for f in ct.facet_ids:
        a = r.normals[f]
        max_norm = max(max_norm, abs(float(np.linalg.norm(a)) - 1.0))
        members = ct.facet_vertices[f]
        offsets = [float(a @ r.coords[v]) for v in members]
        max_cop = max(max_cop, max(offsets) - min(offsets))
        level = float(np.mean(offsets))
        for v in ct.vertex_ids:
            if v in members:
                continue
            gap = float(a @ r.coords[v]) - level
            if gap > margin:
                convex = False
            if gap > -margin:
                strict = False
    return ValidationReport(max_cop, max_norm, convex, strict and convex, diam)


# =============================================================================
# Convex hulls with facet merging
# =============================================================================


def _affine_rank(pts: np.ndarray, tol: float = 1e-9) -> int:
    centered = pts - pts.mean(axis=0)
    if len(pts) < 2:
        return 0
    s = np.linalg.svd(centered, compute_uv=False)
    return int((s > tol * max(s[0], 1e-30)).sum())


class _UnionFind:
    def __init__(self, n):
        self.parent = list(range(n))

    def find(self, x):
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[rb] = ra


def _fit_outward_normal(pts: np.ndarray, interior: np.ndarray):
    """Best-fit plane normal of a coplanar point set, oriented away from
    ``interior``.  Returns (unit normal, offset)."""
    c = pts.mean(axis=0)
    _, _, vt = np.linalg.svd(pts - c)
    n = vt[-1]
    if n @ (c - interior) < 0:
        n = -n
    n = n / np.linalg.norm(n)
    return n, float(n @ c)


def hull_realization(
    points, tol: ToleranceConfig = DEFAULT_TOL, exact=None
) -> tuple[CombinatorialType, Realization]:
    """Convex hull with coplanar facets merged; interior points discarded.

    Vertex ids in the output are indices into the input point list.  When
    ``exact`` (a parallel list of rational points) is given, or when all
    input coordinates are integers, exact coordinates are attached to the
    result.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise DegenerateInput("expected an (n, 3) point array")
    if _affine_rank(pts) < 3:
        raise DegenerateInput("points do not affinely span 3-space")
    try:
        hull = ConvexHull(pts)
    except QhullError as exc:  # pragma: no cover - rank check catches most
        raise DegenerateInput(str(exc)) from exc

    diam = float(np.ptp(pts, axis=0).max()) * np.sqrt(3)
    eps = 1e-9 * max(diam, 1e-30)

    # merge adjacent simplices lying in a common plane; the test is
    # distance-based (does one simplex's plane contain the other's
    # vertices?) because sliver triangles at short edges have badly
    # conditioned normals of their own
    nsimp = len(hull.simplices)
    uf = _UnionFind(nsimp)
    eq = hull.equations

    def coplanar(i: int, j: int) -> bool:
        for a, b in ((i, j), (j, i)):
            dists = pts[hull.simplices[b]] @ eq[a, :3] + eq[a, 3]
            if np.abs(dists).max() < eps:
                return True
        return False

    for i in range(nsimp):
        for j in hull.neighbors[i]:
            if j < 0 or j <= i:
                continue
            if coplanar(i, int(j)):
                uf.union(i, int(j))

    groups: dict[int, set[int]] = {}
    for i in range(nsimp):
        groups.setdefault(uf.find(i), set()).update(int(v) for v in hull.simplices[i])

    facet_vertex_sets = sorted(tuple(sorted(vs)) for vs in groups.values())
    hull_vertices = sorted(int(v) for v in hull.vertices)

    incidence = frozenset(
        (v, fi) for fi, vs in enumerate(facet_vertex_sets) for v in vs
    )
    ct = CombinatorialType(
        tuple(hull_vertices), tuple(range(len(facet_vertex_sets))), incidence
    )

    interior = pts[hull_vertices].mean(axis=0)
    normals = {}
    for fi, vs in enumerate(facet_vertex_sets):
        n, _ = _fit_outward_normal(pts[list(vs)], interior)
        normals[fi] = n

    exact_coords = None
    if exact is not None:
        exact_coords = {v: tuple(Fraction(x) for x in exact[v]) for v in hull_vertices}
    elif np.all(pts == np.round(pts)):
        exact_coords = {
            v: tuple(Fraction(int(x)) for x in np.round(pts[v]).astype(int))
            for v in hull_vertices
        }

    r = Realization(
        3,
        {v: pts[v].copy() for v in hull_vertices},
        normals,
        exact_coords,
    )
    return ct, r


# =============================================================================
# Well-shaped realizations and the well-shaping transform
# =============================================================================


def facet_cycle(ct: CombinatorialType, r: Realization, facet: int) -> tuple[int, ...]:
    """Vertices of a facet in convex cyclic order (angle sort in its plane)."""
    members = sorted(ct.facet_vertices[facet])
    a = r.normals[facet]
    pts = np.asarray([r.coords[v] for v in members])
    c = pts.mean(axis=0)
    b1 = np.zeros(3)
    b1[int(np.argmin(np.abs(a)))] = 1.0
    b1 = b1 - (b1 @ a) * a
    b1 /= np.linalg.norm(b1)
    b2 = np.cross(a, b1)
    ang = np.arctan2((pts - c) @ b2, (pts - c) @ b1)
    return tuple(members[k] for k in np.argsort(ang))


def _facet_frame(ct, r, facet):
    a = r.normals[facet]
    cyc = facet_cycle(ct, r, facet)
    pts = np.asarray([r.coords[v] for v in cyc])
    c = pts.mean(axis=0)
    b1 = np.zeros(3)
    b1[int(np.argmin(np.abs(a)))] = 1.0
    b1 = b1 - (b1 @ a) * a
    b1 /= np.linalg.norm(b1)
    b2 = np.cross(a, b1)
    poly2d = np.column_stack([(pts - c) @ b1, (pts - c) @ b2])
    return a, c, b1, b2, poly2d, cyc


def is_well_shaped(
    ct: CombinatorialType,
    r: Realization,
    facet: int,
    tol: ToleranceConfig = DEFAULT_TOL,
) -> bool:
    """True iff every vertex off the facet projects orthogonally into the
    relative interior of the facet polygon, with margin above tolerance."""
    a, c, b1, b2, poly, _ = _facet_frame(ct, r, facet)
    margin = tol.residual_tol * max(r.diameter, 1e-30)
    members = ct.facet_vertices[facet]
    # inward edge normals of the 2D polygon
    m = len(poly)
    inner = poly.mean(axis=0)
    edges = []
    for i in range(m):
        p, q = poly[i], poly[(i + 1) % m]
        t = q - p
        nrm = np.array([-t[1], t[0]])
        nrm /= np.linalg.norm(nrm)
        if nrm @ (inner - p) < 0:
            nrm = -nrm
        edges.append((p, nrm))
    for v in ct.vertex_ids:
        if v in members:
            continue
        q = r.coords[v] - c
        q2 = np.array([q @ b1, q @ b2])
        for p, nrm in edges:
            if nrm @ (q2 - p) <= margin:
                return False
    return True


def well_shaping_transform(
    ct: CombinatorialType,
    r: Realization,
    facet: int,
    tol: ToleranceConfig = DEFAULT_TOL,
) -> ProjectiveTransform:
    """Projective transform making the realization well-shaped over a facet.

    Picks a center just beyond the facet (along the outward normal from its
    centroid) and sends it to the infinite point orthogonal to the facet,
    which turns the orthogonal projection into a Schlegel-style central
    projection through the facet.  Already well-shaped inputs return the
    identity.
    """
    if is_well_shaped(ct, r, facet, tol):
        return ProjectiveTransform.identity(3)
    a = r.normals[facet]
    members = sorted(ct.facet_vertices[facet])
    c = np.mean([r.coords[v] for v in members], axis=0)
    offset = float(a @ c)

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

    h = 0.5 * h_max
    last_report = None
    for _ in range(60):
        T = ProjectiveTransform.homology(a, offset, c + h * a, scale=h)
        try:
            new = transform_apply(ct, r, T)
        except Inadmissible:
            h *= 0.5
            continue
        rep = validate_realization(ct, new, tol)
        if rep.ok(tol) and is_well_shaped(ct, new, facet, tol):
            return T
        last_report = rep
        h *= 0.5
    raise NotAchieved(
        f"no well-shaping transform found over facet {facet}; last report: {last_report}"
    )


# =============================================================================
# Transforms and congruence
# =============================================================================


def transform_apply(ct: CombinatorialType, r: Realization, T) -> Realization:
    """Map vertex coordinates and recompute facet normals from the mapped
    facet planes (re-normalized, oriented outward)."""
    T = normalize_transform(T)
    order = sorted(r.coords)
    imgs = T.apply(r.points(order))
    coords = {v: imgs[k] for k, v in enumerate(order)}
    interior = imgs.mean(axis=0)
    normals = {}
    for f in ct.facet_ids:
        pts = np.asarray([coords[v] for v in sorted(ct.facet_vertices[f])])
        n, _ = _fit_outward_normal(pts, interior)
        normals[f] = n
    return Realization(r.dimension, coords, normals, None)


@dataclass(frozen=True)
class CongruenceReport:
    equivalent: bool  # equal edge lengths
    congruent: bool  # equal pairwise distances
    max_edge_deviation: float
    max_pair_deviation: float


def congruence_class_check(
    ct: CombinatorialType,
    r1: Realization,
    r2: Realization,
    tol: ToleranceConfig = DEFAULT_TOL,
) -> CongruenceReport:
    from .graphs import build_edge_graph

    if set(r1.coords) != set(ct.vertex_ids) or set(r2.coords) != set(ct.vertex_ids):
        raise TypeMismatch("realizations do not match the combinatorial type")
    lim = tol.residual_tol * max(r1.diameter, r2.diameter, 1e-30)
    g = build_edge_graph(ct)
    dev_e = 0.0
    for u, v in g.edges:
        l1 = float(np.linalg.norm(r1.coords[u] - r1.coords[v]))
        l2 = float(np.linalg.norm(r2.coords[u] - r2.coords[v]))
        dev_e = max(dev_e, abs(l1 - l2))
    dev_p = 0.0
    for u, v in itertools.combinations(sorted(ct.vertex_ids), 2):
        l1 = float(np.linalg.norm(r1.coords[u] - r1.coords[v]))
        l2 = float(np.linalg.norm(r2.coords[u] - r2.coords[v]))
        dev_p = max(dev_p, abs(l1 - l2))
    return CongruenceReport(dev_e <= lim, dev_p <= lim, dev_e, dev_p)


# =============================================================================
# Random transform helpers (seeded experiments)
# =============================================================================


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    """Haar-ish random rotation via QR of a Gaussian matrix."""
    q, rr = np.linalg.qr(rng.standard_normal((3, 3)))
    q *= np.sign(np.diag(rr))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def random_affine(rng: np.random.Generator, cond_max: float = 10.0) -> np.ndarray:
    """Random linear map with condition number below ``cond_max``."""
    u = random_rotation(rng)
    v = random_rotation(rng)
    lo, hi = 1.0, min(cond_max, 10.0) * 0.9
    s = rng.uniform(lo, hi, size=3)
    return u @ np.diag(s) @ v.T


def rotation_about_axis(axis, angle: float) -> np.ndarray:
    """Rodrigues rotation matrix."""
    k = np.asarray(axis, dtype=float)
    k = k / np.linalg.norm(k)
    K = np.array([[0, -k[2], k[1]], [k[2], 0, -k[0]], [-k[1], k[0], 0]])
    return np.eye(3) + np.sin(angle) * K + (1 - np.cos(angle)) * (K @ K)
