"""Polytope and framework file formats.

Polytope JSON: {"dimension": 3, "vertices": [[x, y, z], ...],
"facets": [[vertex indices], ...], "normals": [[x, y, z], ...] (optional)}.
Vertex ids are list positions.  All floats are written with 17 significant
digits, which round-trips float64 exactly.

OFF import/export carries vertices and facets; normals are recomputed.

``save_flex_sequence`` writes numbered polytope files plus a manifest (and
a metrics CSV for contraction sequences).
"""

from __future__ import annotations

import csv
import json
import warnings
from pathlib import Path

import numpy as np

from .geometry import (
    DEFAULT_TOL,
    Realization,
    ToleranceConfig,
    validate_realization,
)
from .graphs import CombinatorialType


class ParseError(ValueError):
    """Malformed input file; carries a line number when known."""

    def __init__(self, message, line=None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class ValidationError(ValueError):
    """Input parsed but fails the realization equations badly."""


# =============================================================================
# Float-exact JSON rendering
# =============================================================================


def _render(value, indent=0) -> str:
    pad = " " * indent
    if isinstance(value, float):
        return f"{value:.17g}"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, str):
        return json.dumps(value)
    if value is None:
        return "null"
    if isinstance(value, dict):
        items = ",\n".join(
            f'{pad}  {json.dumps(str(k))}: {_render(v, indent + 2)}'
            for k, v in value.items()
        )
        return "{\n" + items + "\n" + pad + "}"
    if isinstance(value, (list, tuple, np.ndarray)):
        seq = list(value)
        flat = all(not isinstance(x, (dict, list, tuple, np.ndarray)) for x in seq)
        if flat:
            return "[" + ", ".join(_render(x) for x in seq) + "]"
        items = ",\n".join(f"{pad}  {_render(x, indent + 2)}" for x in seq)
        return "[\n" + items + "\n" + pad + "]"
    raise TypeError(f"cannot render {type(value)}")


def render_json(obj) -> str:
    return _render(obj) + "\n"


# =============================================================================
# Polytope JSON
# =============================================================================


def polytope_to_json(ct: CombinatorialType, r: Realization) -> str:
    order = sorted(ct.vertex_ids)
    index = {v: k for k, v in enumerate(order)}
    facets = [
        sorted(index[v] for v in ct.facet_vertices[f]) for f in sorted(ct.facet_ids)
    ]
    doc = {
        "dimension": r.dimension,
        "vertices": [[float(x) for x in r.coords[v]] for v in order],
        "facets": facets,
        "normals": [
            [float(x) for x in r.normals[f]] for f in sorted(ct.facet_ids)
        ],
    }
    return render_json(doc)


def _recompute_normals(coords: dict[int, np.ndarray], facets) -> dict[int, np.ndarray]:
    interior = np.mean(list(coords.values()), axis=0)
    normals = {}
    for fi, members in enumerate(facets):
        pts = np.asarray([coords[v] for v in members])
        c = pts.mean(axis=0)
        _, _, vt = np.linalg.svd(pts - c)
        n = vt[-1]
        if n @ (c - interior) < 0:
            n = -n
        normals[fi] = n / np.linalg.norm(n)
    return normals


def polytope_from_json(text: str) -> tuple[CombinatorialType, Realization]:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, line=exc.lineno) from exc
    try:
        dim = int(doc.get("dimension", 3))
        vertices = [np.asarray(p, dtype=float) for p in doc["vertices"]]
        facets = [list(map(int, f)) for f in doc["facets"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"bad polytope document: {exc}") from exc
    if dim != 3:
        raise ParseError(f"only dimension 3 is supported, got {dim}")
    coords = {k: v for k, v in enumerate(vertices)}
    for f in facets:
        for v in f:
            if v < 0 or v >= len(vertices):
                raise ParseError(f"facet references unknown vertex {v}")
    if "normals" in doc and doc["normals"] is not None:
        normals = {
            k: np.asarray(n, dtype=float) for k, n in enumerate(doc["normals"])
        }
        if len(normals) != len(facets):
            raise ParseError("normal count does not match facet count")
    else:
        normals = _recompute_normals(coords, facets)
    incidence = frozenset((v, fi) for fi, f in enumerate(facets) for v in f)
    ct = CombinatorialType(
        tuple(range(len(vertices))), tuple(range(len(facets))), incidence
    )
    return ct, Realization(3, coords, normals)


# =============================================================================
# OFF
# =============================================================================


def polytope_to_off(ct: CombinatorialType, r: Realization) -> str:
    from .geometry import facet_cycle

    order = sorted(ct.vertex_ids)
    index = {v: k for k, v in enumerate(order)}
    lines = ["OFF", f"{len(order)} {len(ct.facet_ids)} 0"]
    for v in order:
        lines.append(" ".join(f"{float(x):.17g}" for x in r.coords[v]))
    for f in sorted(ct.facet_ids):
        cyc = facet_cycle(ct, r, f)
        lines.append(str(len(cyc)) + " " + " ".join(str(index[v]) for v in cyc))
    return "\n".join(lines) + "\n"


def polytope_from_off(text: str) -> tuple[CombinatorialType, Realization]:
    rows = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        s = raw.split("#", 1)[0].strip()
        if s:
            rows.append((lineno, s))
    if not rows:
        raise ParseError("empty OFF file", line=1)
    k = 0
    if rows[0][1].upper().startswith("OFF"):
        k = 1
    try:
        nv, nf, _ = (int(x) for x in rows[k][1].split()[:3])
    except (IndexError, ValueError) as exc:
        raise ParseError("bad OFF counts line", line=rows[k][0]) from exc
    k += 1
    if len(rows) < k + nv + nf:
        last = rows[-1][0]
        raise ParseError("truncated OFF file", line=last)
    coords = {}
    for i in range(nv):
        lineno, s = rows[k + i]
        parts = s.split()
        if len(parts) < 3:
            raise ParseError("bad vertex line", line=lineno)
        coords[i] = np.asarray([float(x) for x in parts[:3]])
    facets = []
    for j in range(nf):
        lineno, s = rows[k + nv + j]
        parts = [int(x) for x in s.split()]
        if not parts or len(parts) < parts[0] + 1:
            raise ParseError("bad facet line", line=lineno)
        facets.append(parts[1 : parts[0] + 1])
    normals = _recompute_normals(coords, facets)
    incidence = frozenset((v, fi) for fi, f in enumerate(facets) for v in f)
    ct = CombinatorialType(
        tuple(range(nv)), tuple(range(len(facets))), incidence
    )
    return ct, Realization(3, coords, normals)


# =============================================================================
# Loading with validation
# =============================================================================


def load_polytope(
    path, fmt: str | None = None, tol: ToleranceConfig = DEFAULT_TOL
) -> tuple[CombinatorialType, Realization]:
    """Parse a polytope file (json or off, inferred from the suffix when
    ``fmt`` is None), recompute missing normals, and validate.

    Residuals above tolerance produce a warning; grossly inconsistent
    inputs (residual above 1e-6 of the diameter) raise ValidationError.
    """
    path = Path(path)
    text = path.read_text()
    if fmt is None:
        fmt = "off" if path.suffix.lower() == ".off" else "json"
    if fmt == "off":
        ct, r = polytope_from_off(text)
    elif fmt == "json":
        ct, r = polytope_from_json(text)
    else:
        raise ValueError(f"unknown format {fmt!r}")
    rep = validate_realization(ct, r, tol)
    lim = tol.residual_tol * max(rep.diameter, 1e-30)
    worst = max(rep.max_coplanarity_residual, rep.max_norm_residual)
    if worst > 1e-6 * max(rep.diameter, 1e-30):
        raise ValidationError(
            f"{path}: realization residuals too large "
            f"(coplanarity {rep.max_coplanarity_residual:.3e}, "
            f"norm {rep.max_norm_residual:.3e})"
        )
    if worst > lim:
        warnings.warn(f"{path}: residuals above tolerance ({worst:.3e})")
    if not rep.is_strictly_convex:
        warnings.warn(f"{path}: realization is not strictly convex")
    return ct, r


def save_polytope(path, ct: CombinatorialType, r: Realization, fmt: str = "json"):
    path = Path(path)
    if fmt == "off":
        path.write_text(polytope_to_off(ct, r))
    else:
        path.write_text(polytope_to_json(ct, r))


# =============================================================================
# Sequence export
# =============================================================================


def polytope_to_obj(ct: CombinatorialType, r: Realization) -> str:
    from .geometry import facet_cycle

    order = sorted(ct.vertex_ids)
    index = {v: k + 1 for k, v in enumerate(order)}
    lines = ["# polyflex mesh"]
    for v in order:
        lines.append("v " + " ".join(f"{float(x):.17g}" for x in r.coords[v]))
    for f in sorted(ct.facet_ids):
        cyc = facet_cycle(ct, r, f)
        lines.append("f " + " ".join(str(index[v]) for v in cyc))
    return "\n".join(lines) + "\n"


def save_flex_sequence(out_dir, obj, parameters=None, write_obj=False) -> dict:
    """Write numbered polytope files plus a manifest; contraction sequences
    also get a metrics CSV.  Returns the manifest dict."""
    from .constructions import FlexPath
    from .contraction import ContractionSequence, convergence_report
    from .rigidity import flex_analysis

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest: dict = {"parameters": parameters or {}, "files": []}

    if isinstance(obj, FlexPath):
        manifest["kind"] = "flex_path"
        manifest["samples"] = len(obj)
        for k, r in enumerate(obj.realizations):
            name = f"sample_{k:03d}.json"
            (out / name).write_text(polytope_to_json(obj.ct, r))
            if write_obj:
                (out / f"sample_{k:03d}.obj").write_text(
                    polytope_to_obj(obj.ct, r)
                )
            manifest["files"].append(name)
        manifest["ts"] = [float(t) for t in obj.ts]
    elif isinstance(obj, ContractionSequence):
        manifest["kind"] = "contraction_sequence"
        manifest["samples"] = len(obj)
        rep = convergence_report(obj)
        for k, r in enumerate(obj.realizations):
            name = f"sample_{k:03d}.json"
            (out / name).write_text(polytope_to_json(obj.ct, r))
            if write_obj:
                (out / f"sample_{k:03d}.obj").write_text(polytope_to_obj(obj.ct, r))
            manifest["files"].append(name)
        with (out / "metrics.csv").open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["n", "edge_length", "vertex_dist", "normal_dev", "corank"])
            for k, r in enumerate(obj.realizations):
                corank = flex_analysis(
                    obj.ct, r, use_exact_oracle=False
                ).corank
                writer.writerow(
                    [
                        k + 1,
                        f"{rep.edge_length[k]:.17g}",
                        f"{rep.vertex_dist[k]:.17g}",
                        f"{rep.normal_dev[k]:.17g}",
                        corank,
                    ]
                )
        manifest["metrics_csv"] = "metrics.csv"
        manifest["final_edge_length"] = float(rep.edge_length[-1])
    else:
        manifest["kind"] = "empty"
        if obj:
            raise TypeError(f"cannot save {type(obj)}")
        warnings.warn("saving an empty sequence")
    (out / "manifest.json").write_text(render_json(manifest))
    return manifest
