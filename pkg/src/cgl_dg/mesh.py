"""Structured triangulation of the unit square with edge connectivity."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

BOUNDARY = -1


@dataclass(frozen=True)
class Mesh:
    """Uniform n x n grid of squares, each cut into two triangles.

    Every square ``[i/n, (i+1)/n] x [j/n, (j+1)/n]`` is split along the
    diagonal running from its lower-left to its upper-right corner.

    Attributes
    ----------
    vertices : (V, 2) float array
    elements : (K, 3) int array, counterclockwise vertex triples
    edge_vertices : (E, 2) int array
    edge_elements : (E, 2) int array; column 1 is ``BOUNDARY`` on the boundary
    normals : (E, 2) float array, unit normal pointing out of the left element
    lengths : (E,) float array
    """

    n: int
    vertices: np.ndarray
    elements: np.ndarray
    edge_vertices: np.ndarray
    edge_elements: np.ndarray
    normals: np.ndarray
    lengths: np.ndarray
    _areas: np.ndarray = field(repr=False)

    @property
    def h(self) -> float:
        """Longest edge length, sqrt(2)/n."""
        return float(self.lengths.max())

    @property
    def num_elements(self) -> int:
        return self.elements.shape[0]

    @property
    def num_edges(self) -> int:
        return self.edge_vertices.shape[0]

    @property
    def areas(self) -> np.ndarray:
        return self._areas

    @property
    def interior_edges(self) -> np.ndarray:
        return np.flatnonzero(self.edge_elements[:, 1] != BOUNDARY)

    @property
    def boundary_edges(self) -> np.ndarray:
        return np.flatnonzero(self.edge_elements[:, 1] == BOUNDARY)

    def edge_geometry(self, edge_id: int):
        """Return ``(normal, h_e, (left, right))`` for one edge.

        ``right`` is ``BOUNDARY`` (-1) for boundary edges, whose normal
        points out of the domain.
        """
        if not 0 <= edge_id < self.num_edges:
            raise IndexError(f"edge index {edge_id} out of range [0, {self.num_edges})")
        left, right = self.edge_elements[edge_id]
        return self.normals[edge_id].copy(), float(self.lengths[edge_id]), (int(left), int(right))

    def dump(self, path) -> None:
        """Write ``v x y`` and ``t i j k`` lines for debugging."""
        lines = [f"v {x:.17g} {y:.17g}" for x, y in self.vertices]
        lines += [f"t {i} {j} {k}" for i, j, k in self.elements]
        Path(path).write_text("\n".join(lines) + "\n")


def build_unit_square(n: int) -> Mesh:
    """Build the structured mesh with ``n`` cells per side (2n^2 triangles)."""
    if int(n) != n or n < 1:
        raise ValueError(f"subdivision count must be a positive integer, got {n!r}")
    n = int(n)
    s = np.linspace(0.0, 1.0, n + 1)
    X, Y = np.meshgrid(s, s, indexing="xy")
    vertices = np.column_stack([X.ravel(), Y.ravel()])

    j, i = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    v00 = (i + j * (n + 1)).ravel()
    v10 = v00 + 1
    v01 = v00 + (n + 1)
    v11 = v01 + 1
    lower = np.column_stack([v00, v10, v11])
    upper = np.column_stack([v00, v11, v01])
    elements = np.empty((2 * n * n, 3), dtype=np.int64)
    elements[0::2] = lower
    elements[1::2] = upper

    p = vertices[elements]
    e1 = p[:, 1] - p[:, 0]
    e2 = p[:, 2] - p[:, 0]
    areas = 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    # local edge k is opposite local vertex k
    local = np.array([[1, 2], [2, 0], [0, 1]])
    owner: dict[tuple[int, int], int] = {}
    edge_vertices = []
    edge_elements = []
    for k, tri in enumerate(elements):
        for a, b in local:
            va, vb = int(tri[a]), int(tri[b])
            key = (va, vb) if va < vb else (vb, va)
            e = owner.get(key)
            if e is None:
                owner[key] = len(edge_vertices)
                edge_vertices.append((va, vb))
                edge_elements.append([k, BOUNDARY])
            else:
                if edge_elements[e][1] != BOUNDARY:
                    raise RuntimeError(f"edge {key} shared by more than two elements")
                edge_elements[e][1] = k
    edge_vertices = np.asarray(edge_vertices, dtype=np.int64)
    edge_elements = np.asarray(edge_elements, dtype=np.int64)

    tangent = vertices[edge_vertices[:, 1]] - vertices[edge_vertices[:, 0]]
    lengths = np.hypot(tangent[:, 0], tangent[:, 1])
    normals = np.column_stack([tangent[:, 1], -tangent[:, 0]]) / lengths[:, None]
    # orient away from the left element's centroid
    centroid = vertices[elements[edge_elements[:, 0]]].mean(axis=1)
    midpoint = 0.5 * (vertices[edge_vertices[:, 0]] + vertices[edge_vertices[:, 1]])
    flip = np.einsum("ij,ij->i", normals, midpoint - centroid) < 0
    normals[flip] *= -1.0

    for arr in (vertices, elements, edge_vertices, edge_elements, normals, lengths, areas):
        arr.setflags(write=False)
    return Mesh(n, vertices, elements, edge_vertices, edge_elements, normals, lengths, areas)
