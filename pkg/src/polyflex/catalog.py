"""Catalog of standard polytopes with exact coordinates where possible.

Entries with rational coordinates carry exact data for the rational rank
oracle; golden-ratio entries use a 64-digit constant rounded at load.

Parametrized entries use call syntax, e.g. ``prism(6)``, ``antiprism(8)``
or ``antiprism_stacked_k4(8)``.
"""

from __future__ import annotations

import itertools
import re
from fractions import Fraction

import numpy as np

from .geometry import (
    DEFAULT_TOL,
    Realization,
    UnknownName,
    hull_realization,
    validate_realization,
)
from .graphs import CombinatorialType

PHI = float(
    "1.6180339887498948482045868343656381177203091798057628621354486227053"[:66]
)

F0, F1 = Fraction(0), Fraction(1)


def _signs(vals):
    """All sign combinations of the nonzero entries."""
    out = set()
    for ss in itertools.product((-1, 1), repeat=len(vals)):
        out.add(tuple(s * v for s, v in zip(ss, vals)))
    return sorted(out)


def _cyclic(vals):
    out = set()
    v = list(vals)
    for _ in range(3):
        v = v[1:] + v[:1]
        out.add(tuple(v))
    return sorted(out)


def _from_exact(points: list[tuple[Fraction, ...]]):
    floats = [[float(x) for x in p] for p in points]
    return hull_realization(floats, exact=points)


def _tetrahedron():
    pts = [(F1, F1, F1), (F1, -F1, -F1), (-F1, F1, -F1), (-F1, -F1, F1)]
    return _from_exact(pts)


def _cube():
    return _from_exact(_signs((F1, F1, F1)))


def _octahedron():
    pts = []
    for i in range(3):
        for s in (-1, 1):
            p = [F0, F0, F0]
            p[i] = s * F1
            pts.append(tuple(p))
    return _from_exact(pts)


def _cuboctahedron():
    pts = set()
    for perm in itertools.permutations((F1, F1, F0)):
        pts.update(_signs(perm))
    return _from_exact(sorted(pts))


def _permutahedron():
    # truncated-octahedron coordinates: all permutations of (0, +-1, +-2)
    pts = set()
    for perm in itertools.permutations((F0, F1, 2 * F1)):
        pts.update(_signs(perm))
    return _from_exact(sorted(pts))


def _dodecahedron():
    phi = PHI
    inv = 1.0 / phi
    pts = [list(p) for p in _signs((1.0, 1.0, 1.0))]
    for base in [(0.0, inv, phi)]:
        for c in _cyclic(base):
            for p in {tuple(s * x for s, x in zip(ss, c)) for ss in itertools.product((-1, 1), repeat=3)}:
                pts.append(list(p))
    uniq = sorted(set(tuple(p) for p in pts))
    return hull_realization(uniq)


def _icosahedron():
    pts = set()
    for c in _cyclic((0.0, 1.0, PHI)):
        for ss in itertools.product((-1, 1), repeat=3):
            pts.add(tuple(s * x for s, x in zip(ss, c)))
    return hull_realization(sorted(pts))


def _prism(n: int):
    if n < 3:
        raise UnknownName(f"prism({n}): need n >= 3")
    pts = []
    for k in range(n):
        ang = 2 * np.pi * k / n
        for z in (-0.5, 0.5):
            pts.append((np.cos(ang), np.sin(ang), z))
    return hull_realization(pts)


def _antiprism(n: int):
    if n < 3:
        raise UnknownName(f"antiprism({n}): need n >= 3")
    h2 = 2 * (np.cos(np.pi / n) - np.cos(2 * np.pi / n))
    h = float(np.sqrt(h2))
    pts = []
    for k in range(n):
        ang = 2 * np.pi * k / n
        pts.append((np.cos(ang), np.sin(ang), -h / 2))
        pts.append((np.cos(ang + np.pi / n), np.sin(ang + np.pi / n), h / 2))
    return hull_realization(pts)


def _cube_with_roof():
    pts = list(_signs((F1, F1, F1))) + [(F0, F0, 2 * F1)]
    return _from_exact(pts)


def _stacked_cuboctahedron():
    base = set()
    for perm in itertools.permutations((F1, F1, F0)):
        base.update(_signs(perm))
    h = Fraction(1, 2)
    pts = sorted(base) + [(F1 + h, F0, F0), (-F1 - h, F0, F0)]
    return _from_exact(pts)


def _antiprism_stacked_k4(n: int):
    """Antiprism with a flat tetrahedron stacked on each triangular facet.

    The stack height shrinks until every apex is a degree-3 vertex and all
    2n triangles split into three.
    """
    ct0, r0 = _antiprism(n)
    triangles = [f for f in ct0.facet_ids if len(ct0.facet_vertices[f]) == 3]
    base_pts = r0.points(sorted(r0.coords))
    h = 0.3
    for _ in range(30):
        pts = [tuple(p) for p in base_pts]
        for f in triangles:
            members = sorted(ct0.facet_vertices[f])
            c = np.mean([r0.coords[v] for v in members], axis=0)
            pts.append(tuple(c + h * r0.normals[f]))
        ct, r = hull_realization(pts)
        expected_f = 2 + 3 * len(triangles)
        if (
            len(ct.vertex_ids) == len(pts)
            and len(ct.facet_ids) == expected_f
            and validate_realization(ct, r).is_strictly_convex
        ):
            return ct, r
        h *= 0.5
    raise RuntimeError(f"could not stack K4s on antiprism({n})")


_PLAIN = {
    "tetrahedron": _tetrahedron,
    "cube": _cube,
    "octahedron": _octahedron,
    "dodecahedron": _dodecahedron,
    "icosahedron": _icosahedron,
    "cuboctahedron": _cuboctahedron,
    "permutahedron": _permutahedron,
    "cube_with_roof": _cube_with_roof,
    "stacked_cuboctahedron": _stacked_cuboctahedron,
}

_PARAM = {
    "prism": _prism,
    "antiprism": _antiprism,
    "antiprism_stacked_k4": _antiprism_stacked_k4,
}

CATALOG_NAMES = sorted(_PLAIN) + [f"{k}(n)" for k in sorted(_PARAM)]


def catalog(name: str) -> tuple[CombinatorialType, Realization]:
    """Look up a catalog polytope; see CATALOG_NAMES for the accepted names."""
    name = name.strip()
    if name in _PLAIN:
        ct, r = _PLAIN[name]()
    else:
        m = re.fullmatch(r"([a-z0-9_]+)\((\d+)\)", name)
        if not m or m.group(1) not in _PARAM:
            raise UnknownName(f"unknown catalog entry {name!r}; known: {CATALOG_NAMES}")
        ct, r = _PARAM[m.group(1)](int(m.group(2)))
    return ct, r
