"""Structured triangulations of parametric charts.

Each triangle is treated as the flat (chordal) triangle spanned by the
immersed positions of its vertices; its metric is the Gram matrix of the
two edge vectors leaving the first vertex.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DomainError, InvariantViolation
from .surfaces import ParametricSurface

MODULE = "surface_geometry"


@dataclass(frozen=True)
class TriMesh:
    uv: np.ndarray
    positions: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray
    boundary_tags: np.ndarray
    metrics: np.ndarray
    h: float = float("nan")
    collapsed: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))

    @property
    def n_vertices(self) -> int:
        return len(self.uv)

    def edges(self) -> np.ndarray:
        e = np.concatenate([self.triangles[:, [0, 1]], self.triangles[:, [1, 2]], self.triangles[:, [2, 0]]])
        return np.unique(np.sort(e, axis=1), axis=0)

    @property
    def euler_characteristic(self) -> int:
        return self.n_vertices - len(self.edges()) + len(self.triangles)

    @property
    def boundary_vertices(self) -> np.ndarray:
        return np.unique(self.boundary_edges)

    @property
    def interior_vertices(self) -> np.ndarray:
        mask = np.ones(self.n_vertices, bool)
        mask[self.boundary_vertices] = False
        return np.flatnonzero(mask)

    def triangle_areas(self) -> np.ndarray:
        g = self.metrics
        return 0.5 * np.sqrt(np.maximum(g[:, 0, 0] * g[:, 1, 1] - g[:, 0, 1] ** 2, 0.0))

    def area(self) -> float:
        return float(self.triangle_areas().sum())

    def boundary_length(self) -> float:
        p = self.positions
        return float(np.linalg.norm(p[self.boundary_edges[:, 1]] - p[self.boundary_edges[:, 0]], axis=1).sum())

    def dump(self, path) -> None:
        """Write the plain-text format: ``v u v x...``, ``f i j k``, ``be i j loop``."""
        lines = []
        for (u, v), x in zip(self.uv, self.positions):
            lines.append("v " + " ".join(f"{c:.17g}" for c in (u, v, *x)))
        for tri in self.triangles:
            lines.append("f {} {} {}".format(*tri))
        for (i, j), tag in zip(self.boundary_edges, self.boundary_tags):
            lines.append(f"be {i} {j} {tag}")
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "TriMesh":
        uv, pos, tris, bes, tags = [], [], [], [], []
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "v":
                vals = [float(p) for p in parts[1:]]
                uv.append(vals[:2])
                pos.append(vals[2:])
            elif parts[0] == "f":
                tris.append([int(p) for p in parts[1:4]])
            elif parts[0] == "be":
                bes.append([int(parts[1]), int(parts[2])])
                tags.append(int(parts[3]))
        positions = np.array(pos)
        triangles = np.array(tris, dtype=int)
        return cls(
            np.array(uv),
            positions,
            triangles,
            np.array(bes, dtype=int).reshape(-1, 2),
            np.array(tags, dtype=int),
            triangle_metrics(positions, triangles),
        )


def triangle_metrics(positions: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    p0, p1, p2 = (positions[triangles[:, k]] for k in range(3))
    e1, e2 = p1 - p0, p2 - p0
    g = np.empty((len(triangles), 2, 2))
    g[:, 0, 0] = np.sum(e1 * e1, 1)
    g[:, 0, 1] = g[:, 1, 0] = np.sum(e1 * e2, 1)
    g[:, 1, 1] = np.sum(e2 * e2, 1)
    return g


def _line_lengths(surface: ParametricSurface, samples: int = 64) -> tuple:
    """Longest metric length of u-lines and of v-lines."""
    chart = surface.chart
    (u0, u1), (v0, v1) = chart.domain
    s = (np.arange(samples) + 0.5) / samples
    U, V = np.meshgrid(u0 + (u1 - u0) * s, v0 + (v1 - v0) * s, indexing="ij")
    _, (xu, xv) = chart.derivatives(U, V, order=1)
    lu = np.linalg.norm(xu, axis=-1).mean(axis=0) * (u1 - u0)
    lv = np.linalg.norm(xv, axis=-1).mean(axis=1) * (v1 - v0)
    return float(lu.max()), float(lv.max())


def mesh_parametric(surface: ParametricSurface, target_h: float, counts: tuple | None = None) -> TriMesh:
    """Structured triangulation with edges of metric length about ``target_h``.

    Periodic directions are identified and collapsed sides become a single
    vertex, so a polar chart gives a fan around its pole.
    """
    if not target_h > 0:
        raise DomainError("target_h must be positive", MODULE)
    chart = surface.chart
    if len(surface.charts) != 1:
        raise DomainError("multi-chart surfaces are not supported", MODULE)
    if counts is None:
        lu, lv = _line_lengths(surface)
        counts = (max(2, int(np.ceil(lu / target_h))), max(3, int(np.ceil(lv / target_h))))
    nu, nv = counts
    (u0, u1), (v0, v1) = chart.domain
    pu, pv = chart.periodic
    us = np.linspace(u0, u1, nu + 1)
    vs = np.linspace(v0, v1, nv + 1)

    index = -np.ones((nu + 1, nv + 1), dtype=int)
    uv = []
    collapsed = []

    def new(u, v):
        uv.append((u, v))
        return len(uv) - 1

    for side in chart.collapsed:
        if side == "u0":
            k = new(u0, 0.5 * (v0 + v1))
            index[0, :] = k
        elif side == "u1":
            k = new(u1, 0.5 * (v0 + v1))
            index[nu, :] = k
        else:
            raise DomainError("only u-sides may collapse", MODULE)
        collapsed.append(k)
    for i in range(nu + 1):
        for j in range(nv + 1):
            if index[i, j] >= 0:
                continue
            if pu and i == nu:
                index[i, j] = index[0, j]
            elif pv and j == nv:
                index[i, j] = index[i, 0]
            else:
                index[i, j] = new(us[i], vs[j])
    uv = np.array(uv)
    positions = chart.position(uv[:, 0], uv[:, 1])

    a = index[:-1, :-1].ravel()
    b = index[1:, :-1].ravel()
    c = index[1:, 1:].ravel()
    d = index[:-1, 1:].ravel()
    tris = np.concatenate([np.stack([a, b, c], 1), np.stack([a, c, d], 1)])
    keep = (tris[:, 0] != tris[:, 1]) & (tris[:, 1] != tris[:, 2]) & (tris[:, 0] != tris[:, 2])
    tris = tris[keep]

    bedges, btags = [], []
    for loop, side in surface.boundary_sides():
        if side == "u0":
            line = index[0, :]
        elif side == "u1":
            line = index[nu, :]
        elif side == "v0":
            line = index[:, 0]
        else:
            line = index[:, nv]
        for k in range(len(line) - 1):
            bedges.append((line[k], line[k + 1]))
            btags.append(loop.tag)
    bedges = np.array(bedges, dtype=int).reshape(-1, 2)
    mesh = TriMesh(
        uv,
        positions,
        tris,
        bedges,
        np.array(btags, dtype=int),
        triangle_metrics(positions, tris),
        float(target_h),
        np.array(collapsed, dtype=int),
    )
    validate_mesh(mesh)
    return mesh


def validate_mesh(mesh: TriMesh) -> None:
    """Manifold, non-degenerate, and tagged boundary equal to the topological boundary."""
    if np.any(mesh.triangle_areas() <= 1e-12):
        raise InvariantViolation("degenerate triangle in mesh", MODULE)
    t = mesh.triangles
    half = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
    key = np.sort(half, axis=1)
    uniq, counts = np.unique(key, axis=0, return_counts=True)
    if np.any(counts > 2):
        raise InvariantViolation("non-manifold edge in mesh", MODULE)
    directed = {tuple(e) for e in half.tolist()}
    if len(directed) != len(half):
        raise InvariantViolation("inconsistent triangle orientation", MODULE)
    topo = {tuple(e) for e in uniq[counts == 1].tolist()}
    tagged = {tuple(sorted(e)) for e in mesh.boundary_edges.tolist()}
    if topo != tagged:
        raise InvariantViolation("boundary edges do not match the declared boundary loops", MODULE)
