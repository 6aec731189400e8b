"""First-order rigidity analysis.

The constraint matrix stacks three row families over the motion variables
(one velocity vector per vertex, one per facet normal):

- one row per edge: the length derivative,
- rows per facet pairing a base vertex with each other incident vertex:
  the coplanarity derivative (the all-pairs conditions are linear
  combinations of these, so the kernel is unchanged),
- one row per facet: the unit-norm derivative.

The kernel of this matrix is the space of first-order motions.  Its
dimension (corank) is at least 6 for affinely spanning inputs, with
equality exactly for first-order rigid realizations.  Numeric rank uses a
singular-value gap; an exact rational oracle cross-checks small instances
with exact coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import exact as exact_mod
from .geometry import DEFAULT_TOL, Realization, ToleranceConfig
from .graphs import CombinatorialType, Edge, build_edge_graph


class NotSpanning(ValueError):
    """Vertices do not affinely span the ambient space."""


class RankAmbiguous(RuntimeError):
    """No clear singular-value gap at the rank cut."""

    def __init__(self, message, spectrum):
        super().__init__(message)
        self.spectrum = spectrum


GAP_RATIO_MIN = 1e3
EXACT_ORACLE_MAX_SIZE = 40

_SKEW = [
    np.array([[0.0, 0.0, 0.0], [0.0, 0.0, -1.0], [0.0, 1.0, 0.0]]),
    np.array([[0.0, 0.0, 1.0], [0.0, 0.0, 0.0], [-1.0, 0.0, 0.0]]),
    np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]]),
]


# =============================================================================
# Matrix assembly
# =============================================================================


@dataclass(frozen=True)
class RigidityMatrix:
    matrix: np.ndarray
    vertex_order: tuple[int, ...]
    facet_order: tuple[int, ...]
    row_labels: tuple[tuple, ...]
    edges: tuple[Edge, ...]

    @property
    def ncols(self) -> int:
        return self.matrix.shape[1]

    def vertex_block(self, v: int) -> slice:
        k = self.vertex_order.index(v)
        return slice(3 * k, 3 * k + 3)

    def facet_block(self, f: int) -> slice:
        k = self.facet_order.index(f)
        off = 3 * len(self.vertex_order)
        return slice(off + 3 * k, off + 3 * k + 3)

    def motion_parts(self, vec: np.ndarray):
        """Split a motion vector into (vertex velocities, normal velocities)."""
        nv = len(self.vertex_order)
        p = {v: vec[3 * k : 3 * k + 3] for k, v in enumerate(self.vertex_order)}
        a = {
            f: vec[3 * (nv + k) : 3 * (nv + k) + 3]
            for k, f in enumerate(self.facet_order)
        }
        return p, a

    def pack_motion(self, pdot: dict, adot: dict) -> np.ndarray:
        vec = np.zeros(self.ncols)
        for k, v in enumerate(self.vertex_order):
            vec[3 * k : 3 * k + 3] = pdot.get(v, 0.0)
        off = 3 * len(self.vertex_order)
        for k, f in enumerate(self.facet_order):
            vec[off + 3 * k : off + 3 * k + 3] = adot.get(f, 0.0)
        return vec


def build_rigidity_matrix(ct: CombinatorialType, r: Realization) -> RigidityMatrix:
    vorder = tuple(sorted(ct.vertex_ids))
    forder = tuple(sorted(ct.facet_ids))
    vcol = {v: 3 * k for k, v in enumerate(vorder)}
    fcol = {f: 3 * (len(vorder) + k) for k, f in enumerate(forder)}
    ncols = 3 * (len(vorder) + len(forder))
    g = build_edge_graph(ct)

    rows = []
    labels = []
    for u, v in g.edges:
        row = np.zeros(ncols)
        d = r.coords[u] - r.coords[v]
        row[vcol[u] : vcol[u] + 3] = d
        row[vcol[v] : vcol[v] + 3] = -d
        rows.append(row)
        labels.append(("edge", (u, v)))
    for f in forder:
        members = sorted(ct.facet_vertices[f])
        a = r.normals[f]
        i0 = members[0]
        for im in members[1:]:
            row = np.zeros(ncols)
            row[vcol[i0] : vcol[i0] + 3] = a
            row[vcol[im] : vcol[im] + 3] = -a
            row[fcol[f] : fcol[f] + 3] = r.coords[i0] - r.coords[im]
            rows.append(row)
            labels.append(("coplanar", f, (i0, im)))
    for f in forder:
        row = np.zeros(ncols)
        row[fcol[f] : fcol[f] + 3] = r.normals[f]
        rows.append(row)
        labels.append(("norm", f))

    return RigidityMatrix(np.asarray(rows), vorder, forder, tuple(labels), g.edges)


# =============================================================================
# Trivial motions
# =============================================================================


def _check_spanning(ct, r):
    pts = np.asarray([r.coords[v] for v in sorted(ct.vertex_ids)])
    centered = pts - pts.mean(axis=0)
    s = np.linalg.svd(centered, compute_uv=False)
    if s[-1] <= 1e-12 * max(s[0], 1e-30):
        raise NotSpanning("vertices are affinely degenerate")


def trivial_motion_basis(ct: CombinatorialType, r: Realization) -> np.ndarray:
    """Six rigid-motion velocity fields: translations (normals fixed) and
    the skew rotations applied to positions and normals alike."""
    _check_spanning(ct, r)
    rm = build_rigidity_matrix(ct, r)
    basis = []
    for k in range(3):
        t = np.zeros(3)
        t[k] = 1.0
        basis.append(rm.pack_motion({v: t for v in ct.vertex_ids}, {}))
    for S in _SKEW:
        pdot = {v: S @ r.coords[v] for v in ct.vertex_ids}
        adot = {f: S @ r.normals[f] for f in ct.facet_ids}
        basis.append(rm.pack_motion(pdot, adot))
    return np.asarray(basis)


# =============================================================================
# Rank analysis
# =============================================================================


def _numeric_rank(M: np.ndarray, tol: ToleranceConfig):
    """(rank, singular values, gap ratio at the cut).  Raises RankAmbiguous
    when singular values straddle the threshold without a 10^3 gap."""
    if M.size == 0:
        return 0, np.zeros(0), np.inf
    s = np.linalg.svd(M, compute_uv=False)
    smax = s[0] if s[0] > 0 else 1.0
    rank = int((s >= tol.rank_gap_tol * smax).sum())
    if 0 < rank < len(s) and s[rank] > 0:
        ratio = s[rank - 1] / s[rank]
        if ratio < GAP_RATIO_MIN:
            raise RankAmbiguous(
                f"singular-value gap ratio {ratio:.1f} < {GAP_RATIO_MIN:.0f}",
                spectrum=s,
            )
    else:
        ratio = np.inf
    return rank, s, ratio


@dataclass(frozen=True)
class FlexBasis:
    trivial_basis: np.ndarray
    nontrivial_basis: np.ndarray
    corank: int


@dataclass(frozen=True)
class FlexReport:
    corank: int
    trivial_dim: int
    nontrivial_dim: int
    verdict: str  # "first_order_rigid" | "first_order_flexible"
    basis: FlexBasis
    matrix: RigidityMatrix
    singular_values: np.ndarray
    gap_ratio: float
    exact_corank: int | None = None

    @property
    def rigid(self) -> bool:
        return self.verdict == "first_order_rigid"


def flex_analysis(
    ct: CombinatorialType,
    r: Realization,
    tol: ToleranceConfig = DEFAULT_TOL,
    use_exact_oracle: bool = True,
) -> FlexReport:
    """Corank, kernel split into trivial/nontrivial parts, and the verdict:
    rigid iff no nontrivial first-order motion exists."""
    _check_spanning(ct, r)
    rm = build_rigidity_matrix(ct, r)
    M = rm.matrix
    rank, s, ratio = _numeric_rank(M, tol)
    corank = rm.ncols - rank

    _, _, vt = np.linalg.svd(M, full_matrices=True)
    kernel = vt[rank:]

    T = trivial_motion_basis(ct, r)
    Tq, _ = np.linalg.qr(T.T)
    Tq = Tq.T  # orthonormal rows spanning the trivial space
    trivial_dim = T.shape[0]

    proj = kernel - (kernel @ Tq.T) @ Tq
    if proj.size:
        u2, s2, vt2 = np.linalg.svd(proj, full_matrices=False)
        nontrivial = vt2[s2 > 0.5]
    else:
        nontrivial = np.zeros((0, rm.ncols))
    nontrivial_dim = corank - trivial_dim
    verdict = "first_order_rigid" if nontrivial_dim == 0 else "first_order_flexible"

    exact_val = None
    if (
        use_exact_oracle
        and r.exact_coords is not None
        and len(ct.vertex_ids) + len(ct.facet_ids) <= EXACT_ORACLE_MAX_SIZE
    ):
        exact_val = exact_mod.exact_corank(ct, r.exact_coords)

    basis = FlexBasis(Tq, nontrivial, corank)
    return FlexReport(
        corank,
        trivial_dim,
        nontrivial_dim,
        verdict,
        basis,
        rm,
        s[-min(len(s), corank + 4) :],
        ratio,
        exact_val,
    )


def nontrivial_component(report: FlexReport, vec: np.ndarray) -> np.ndarray:
    """Project a motion vector onto the complement of the trivial space."""
    T = report.basis.trivial_basis
    return vec - T.T @ (T @ vec)


# =============================================================================
# Affine flexes (quadric at infinity)
# =============================================================================


@dataclass(frozen=True)
class AffineFlex:
    quadric_matrix: np.ndarray  # symmetric S with u' S u = 0 on edge directions
    kernel_dim: int
    motion: np.ndarray  # packed (vertex velocities, normal velocities)
    residual: float


def _moment_row(u: np.ndarray) -> np.ndarray:
    return np.array(
        [
            u[0] * u[0],
            u[1] * u[1],
            u[2] * u[2],
            2 * u[0] * u[1],
            2 * u[0] * u[2],
            2 * u[1] * u[2],
        ]
    )


def affine_flex_detect(
    ct: CombinatorialType,
    r: Realization,
    tol: ToleranceConfig = DEFAULT_TOL,
) -> AffineFlex | None:
    """Find a symmetric matrix annihilating all edge directions as a quadratic
    form; such a matrix induces a first-order motion with linear vertex
    velocities.  Returns None when the moment system has full rank 6."""
    rm = build_rigidity_matrix(ct, r)
    rows = []
    for u, v in rm.edges:
        d = r.coords[u] - r.coords[v]
        rows.append(_moment_row(d / np.linalg.norm(d)))
    M = np.asarray(rows)
    s = np.linalg.svd(M, compute_uv=False)
    smax = s[0] if len(s) and s[0] > 0 else 1.0
    rank = int((s >= tol.rank_gap_tol * smax).sum())
    kernel_dim = 6 - rank
    if kernel_dim == 0:
        return None
    _, _, vt = np.linalg.svd(M, full_matrices=True)
    c = vt[-1]
    S = np.array(
        [
            [c[0], c[3], c[4]],
            [c[3], c[1], c[5]],
            [c[4], c[5], c[2]],
        ]
    )
    pdot = {v: S @ r.coords[v] for v in ct.vertex_ids}
    adot = {}
    for f in ct.facet_ids:
        a = r.normals[f]
        w = -S @ a
        adot[f] = w - (a @ w) * a  # tangential part keeps the unit norm
    vec = rm.pack_motion(pdot, adot)
    denom = np.linalg.norm(rm.matrix, ord=2) * max(np.linalg.norm(vec), 1e-30)
    residual = float(np.linalg.norm(rm.matrix @ vec) / max(denom, 1e-30))
    return AffineFlex(S, kernel_dim, vec, residual)


# =============================================================================
# Tangent dimension of the realization constraints
# =============================================================================


def tangent_dimension(
    ct: CombinatorialType,
    r: Realization,
    tol: ToleranceConfig = DEFAULT_TOL,
) -> int:
    """Corank of the coplanarity + unit-norm Jacobian (no edge rows): the
    dimension of the tangent space of the realization variety."""
    rm = build_rigidity_matrix(ct, r)
    keep = [i for i, lab in enumerate(rm.row_labels) if lab[0] != "edge"]
    M = rm.matrix[keep]
    rank, _, _ = _numeric_rank(M, tol)
    return rm.ncols - rank


def edge_length_perturbation_check(
    ct: CombinatorialType,
    r: Realization,
    tol: ToleranceConfig = DEFAULT_TOL,
) -> bool:
    """True iff the realization variety is smooth of the expected dimension
    (edge count + 6) and the realization is first-order rigid; together
    these make the edge-length map a local homeomorphism."""
    g = build_edge_graph(ct)
    if tangent_dimension(ct, r, tol) != len(g.edges) + 6:
        return False
    return flex_analysis(ct, r, tol, use_exact_oracle=False).rigid
