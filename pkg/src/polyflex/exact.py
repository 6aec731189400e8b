"""Exact rational rank oracle for constraint matrices.

Works on realizations with exact rational coordinates.  Facet normals are
taken as unnormalized rational cross products: rescaling a facet normal by
any nonzero factor maps the kernel of the constraint matrix bijectively
(scale that facet's normal-velocity block accordingly), so the corank
agrees with the unit-normal floating-point matrix.

Rank is computed by fraction-free Bareiss elimination over the integers
after clearing denominators.
"""

from __future__ import annotations

from fractions import Fraction
from math import gcd

from .graphs import CombinatorialType, build_edge_graph

ExactPoint = tuple[Fraction, ...]


def _cross(u, v):
    return (
        u[1] * v[2] - u[2] * v[1],
        u[2] * v[0] - u[0] * v[2],
        u[0] * v[1] - u[1] * v[0],
    )


def _sub(u, v):
    return tuple(a - b for a, b in zip(u, v))


def _dot(u, v):
    return sum(a * b for a, b in zip(u, v))


def rational_facet_normal(
    ct: CombinatorialType, exact: dict[int, ExactPoint], facet: int
) -> tuple[Fraction, Fraction, Fraction]:
    """Unnormalized rational normal of an exactly coplanar facet."""
    members = sorted(ct.facet_vertices[facet])
    p0 = exact[members[0]]
    normal = None
    for i in range(1, len(members)):
        for j in range(i + 1, len(members)):
            n = _cross(_sub(exact[members[i]], p0), _sub(exact[members[j]], p0))
            if any(x != 0 for x in n):
                normal = n
                break
        if normal:
            break
    if normal is None:
        raise ValueError(f"facet {facet} is collinear")
    for v in members:
        if _dot(_sub(exact[v], p0), normal) != 0:
            raise ValueError(f"facet {facet} is not exactly coplanar")
    return normal


def _integer_rank(rows: list[list[int]]) -> int:
    """Bareiss fraction-free elimination; exact rank of an integer matrix."""
    m = [row[:] for row in rows]
    nrows = len(m)
    if nrows == 0:
        return 0
    ncols = len(m[0])
    rank = 0
    prev = 1
    for col in range(ncols):
        piv = None
        for r in range(rank, nrows):
            if m[r][col] != 0:
                piv = r
                break
        if piv is None:
            continue
        m[rank], m[piv] = m[piv], m[rank]
        for i in range(rank + 1, nrows):
            lead_i, lead_r = m[i][col], m[rank][col]
            row_i, row_r = m[i], m[rank]
            for j in range(col + 1, ncols):
                row_i[j] = (row_i[j] * lead_r - lead_i * row_r[j]) // prev
            row_i[col] = 0
        prev = m[rank][col]
        rank += 1
        if rank == nrows:
            break
    return rank


def _clear_denominators(rows: list[list[Fraction]]) -> list[list[int]]:
    den = 1
    for row in rows:
        for x in row:
            den = den * x.denominator // gcd(den, x.denominator)
    return [[int(x * den) for x in row] for row in rows]


def exact_constraint_rows(
    ct: CombinatorialType,
    exact: dict[int, ExactPoint],
    include_edges: bool = True,
) -> tuple[list[list[Fraction]], int]:
    """Rational rows of the first-order constraint system.

    Returns (rows, ncols) with columns ordered vertex blocks then facet
    blocks, three per id.
    """
    vorder = sorted(ct.vertex_ids)
    forder = sorted(ct.facet_ids)
    vcol = {v: 3 * k for k, v in enumerate(vorder)}
    fcol = {f: 3 * (len(vorder) + k) for k, f in enumerate(forder)}
    ncols = 3 * (len(vorder) + len(forder))
    normals = {f: rational_facet_normal(ct, exact, f) for f in forder}

    rows: list[list[Fraction]] = []

    def new_row():
        return [Fraction(0)] * ncols

    if include_edges:
        g = build_edge_graph(ct)
        for u, v in g.edges:
            row = new_row()
            d = _sub(exact[u], exact[v])
            for k in range(3):
                row[vcol[u] + k] = d[k]
                row[vcol[v] + k] = -d[k]
            rows.append(row)

    for f in forder:
        members = sorted(ct.facet_vertices[f])
        a = normals[f]
        i0 = members[0]
        for im in members[1:]:
            row = new_row()
            d = _sub(exact[i0], exact[im])
            for k in range(3):
                row[vcol[i0] + k] = Fraction(a[k])
                row[vcol[im] + k] = -Fraction(a[k])
                row[fcol[f] + k] = d[k]
            rows.append(row)

    for f in forder:
        row = new_row()
        a = normals[f]
        for k in range(3):
            row[fcol[f] + k] = Fraction(a[k])
        rows.append(row)

    return rows, ncols


def exact_corank(
    ct: CombinatorialType,
    exact: dict[int, ExactPoint],
    include_edges: bool = True,
) -> int:
    """Exact corank of the constraint matrix (kernel dimension)."""
    rows, ncols = exact_constraint_rows(ct, exact, include_edges)
    int_rows = _clear_denominators(rows)
    return ncols - _integer_rank(int_rows)
