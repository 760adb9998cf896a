"""Broken polynomial space on a triangle mesh.

Each element carries its own Lagrange basis of total degree ``r`` on an
equispaced barycentric lattice; for ``r = 1`` the local dofs sit at the
element's three vertices in element order. Dofs are numbered element by
element: dof ``k * nb + i`` is local function ``i`` of element ``k``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import _kernels
from .mesh import BOUNDARY, Mesh
from .quadrature import edge_rule, volume_rule

#: exactness degree used for data (projection, load vectors) that is not polynomial
DATA_QUAD_DEGREE = 10


def _monomial_exponents(r: int) -> np.ndarray:
    return np.array([(p, d - p) for d in range(r + 1) for p in range(d, -1, -1)])


def _lattice_nodes(r: int) -> np.ndarray:
    if r == 0:
        return np.array([[1.0 / 3.0, 1.0 / 3.0]])
    nodes = [(i / r, j / r) for j in range(r + 1) for i in range(r + 1 - j)]
    corners = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)]
    rest = [p for p in nodes if p not in corners]
    return np.array(corners + rest)


@dataclass(frozen=True)
class EdgeTraces:
    """Basis traces at edge quadrature points, split by side.

    ``side`` 0 is the left element, 1 the right one (zeros on boundary
    edges). ``wlen`` holds quadrature weights times edge length.
    """

    points: np.ndarray  # (Ne, nq, 2)
    wlen: np.ndarray  # (Ne, nq)
    values: np.ndarray  # (2, Ne, nq, nb)
    grad_n: np.ndarray  # (2, Ne, nq, nb), gradient dotted with the edge normal


@dataclass(frozen=True)
class ElementQuadrature:
    points: np.ndarray  # (K, nq, 2)
    wdet: np.ndarray  # (K, nq) weights times |det J|
    phi: np.ndarray  # (nq, nb)
    grads: np.ndarray  # (K, nq, nb, 2)


@dataclass(frozen=True, eq=False)
class DGSpace:
    mesh: Mesh
    degree: int = 1
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if int(self.degree) != self.degree or self.degree < 0:
            raise ValueError(f"polynomial degree must be a non-negative integer, got {self.degree!r}")

    @property
    def dofs_per_element(self) -> int:
        r = self.degree
        return (r + 1) * (r + 2) // 2

    @property
    def total_dofs(self) -> int:
        return self.mesh.num_elements * self.dofs_per_element

    def element_dofs(self, k) -> np.ndarray:
        nb = self.dofs_per_element
        return np.asarray(k)[..., None] * nb + np.arange(nb)

    # --- reference basis ---------------------------------------------------

    @cached_property
    def _exponents(self) -> np.ndarray:
        return _monomial_exponents(self.degree)

    @cached_property
    def ref_nodes(self) -> np.ndarray:
        return _lattice_nodes(self.degree)

    @cached_property
    def _coeffs(self) -> np.ndarray:
        V = self._monomials(self.ref_nodes)
        return np.linalg.inv(V)

    def _monomials(self, xi: np.ndarray) -> np.ndarray:
        p, q = self._exponents.T
        return xi[..., 0:1] ** p * xi[..., 1:2] ** q

    def _monomial_grads(self, xi: np.ndarray) -> np.ndarray:
        p, q = self._exponents.T
        x, y = xi[..., 0:1], xi[..., 1:2]
        dx = np.where(p > 0, p * x ** np.maximum(p - 1, 0), 0.0) * y**q
        dy = np.where(q > 0, q * y ** np.maximum(q - 1, 0), 0.0) * x**p
        return np.stack([dx, dy], axis=-1)

    def ref_values(self, xi: np.ndarray) -> np.ndarray:
        """Reference basis values, shape ``xi.shape[:-1] + (nb,)``."""
        return self._monomials(np.asarray(xi, dtype=float)) @ self._coeffs

    def ref_grads(self, xi: np.ndarray) -> np.ndarray:
        """Reference gradients, shape ``xi.shape[:-1] + (nb, 2)``."""
        g = self._monomial_grads(np.asarray(xi, dtype=float))
        return np.einsum("...mc,mi->...ic", g, self._coeffs)

    # --- geometry ------------------------------------------------------------

    @cached_property
    def _geometry(self):
        p = self.mesh.vertices[self.mesh.elements]
        origin = p[:, 0]
        J = np.stack([p[:, 1] - origin, p[:, 2] - origin], axis=-1)  # columns are edge vectors
        det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
        invJ = np.empty_like(J)
        invJ[:, 0, 0] = J[:, 1, 1] / det
        invJ[:, 1, 1] = J[:, 0, 0] / det
        invJ[:, 0, 1] = -J[:, 0, 1] / det
        invJ[:, 1, 0] = -J[:, 1, 0] / det
        return origin, J, det, invJ

    def to_reference(self, k, x: np.ndarray) -> np.ndarray:
        origin, _, _, invJ = self._geometry
        k = np.asarray(k)
        d = np.asarray(x, dtype=float) - origin[k]
        return np.einsum("...ab,...b->...a", invJ[k], d)

    def to_physical(self, k, xi: np.ndarray) -> np.ndarray:
        origin, J, _, _ = self._geometry
        k = np.asarray(k)
        return origin[k] + np.einsum("...ab,...b->...a", J[k], np.asarray(xi, dtype=float))

    def _physical_grads(self, k, ref_g: np.ndarray) -> np.ndarray:
        _, _, _, invJ = self._geometry
        # grad_x phi = J^{-T} grad_xi phi
        return np.einsum("...ba,...ib->...ia", invJ[np.asarray(k)], ref_g)

    def eval_basis(self, element: int, point):
        """Basis values and physical gradients of ``element`` at ``point``."""
        if not 0 <= element < self.mesh.num_elements:
            raise IndexError(f"element index {element} out of range")
        xi = self.to_reference(element, np.asarray(point, dtype=float))
        values = self.ref_values(xi)
        grads = self._physical_grads(element, self.ref_grads(xi))
        return values, grads

    def locate(self, x: float, y: float) -> int:
        """Index of an element whose closure contains ``(x, y)``."""
        xi = self.to_reference(np.arange(self.mesh.num_elements), np.array([x, y]))
        lam = np.column_stack([1.0 - xi.sum(axis=1), xi])
        return int(np.argmax(lam.min(axis=1)))

    def evaluate(self, coeffs: np.ndarray, x: float, y: float) -> float:
        k = self.locate(x, y)
        values, _ = self.eval_basis(k, (x, y))
        return float(values @ coeffs[self.element_dofs(k)])

    # --- quadrature data -----------------------------------------------------

    def element_quadrature(self, degree: int) -> ElementQuadrature:
        key = ("vol", degree)
        if key not in self._cache:
            rule = volume_rule(degree)
            K = self.mesh.num_elements
            _, _, det, _ = self._geometry
            k = np.arange(K)[:, None]
            points = self.to_physical(k, rule.points[None, :, :])
            wdet = np.abs(det)[:, None] * rule.weights[None, :]
            phi = self.ref_values(rule.points)
            grads = self._physical_grads(k, self.ref_grads(rule.points)[None])
            self._cache[key] = ElementQuadrature(points, wdet, phi, grads)
        return self._cache[key]

    def edge_traces(self, degree: int) -> EdgeTraces:
        key = ("edge", degree)
        if key not in self._cache:
            rule = edge_rule(degree)
            m = self.mesh
            a = m.vertices[m.edge_vertices[:, 0]]
            b = m.vertices[m.edge_vertices[:, 1]]
            points = a[:, None, :] + rule.points[None, :, None] * (b - a)[:, None, :]
            wlen = m.lengths[:, None] * rule.weights[None, :]
            Ne, nq = wlen.shape
            nb = self.dofs_per_element
            values = np.zeros((2, Ne, nq, nb))
            grad_n = np.zeros((2, Ne, nq, nb))
            for side in (0, 1):
                elem = m.edge_elements[:, side]
                sel = np.flatnonzero(elem != BOUNDARY)
                ks = elem[sel]
                xi = self.to_reference(ks[:, None], points[sel])
                values[side, sel] = self.ref_values(xi)
                g = self._physical_grads(ks[:, None], self.ref_grads(xi))
                grad_n[side, sel] = np.einsum("eqic,ec->eqi", g, m.normals[sel])
            self._cache[key] = EdgeTraces(points, wlen, values, grad_n)
        return self._cache[key]

    # --- projection ----------------------------------------------------------

    @cached_property
    def local_mass(self) -> np.ndarray:
        """(K, nb, nb) element mass matrices."""
        q = self.element_quadrature(2 * self.degree)
        return _kernels.weighted_mass_blocks(q.phi, q.wdet, np.ones_like(q.wdet))

    def moments(self, f, degree: int = DATA_QUAD_DEGREE) -> np.ndarray:
        """Vector of ``int f phi_i`` over the domain; ``f(x, y)`` is vectorised."""
        q = self.element_quadrature(degree)
        fvals = np.broadcast_to(np.asarray(f(q.points[..., 0], q.points[..., 1]), dtype=float), q.wdet.shape)
        return _kernels.load_blocks(q.phi, q.wdet, fvals).ravel()

    def project_l2(self, f, degree: int = DATA_QUAD_DEGREE) -> np.ndarray:
        """Element-wise L2 projection of the vectorised field ``f(x, y)``."""
        rhs = self.moments(f, degree).reshape(self.mesh.num_elements, self.dofs_per_element)
        try:
            sol = np.linalg.solve(self.local_mass, rhs[..., None])[..., 0]
        except np.linalg.LinAlgError as exc:  # only reachable with degenerate geometry
            raise RuntimeError("singular local mass matrix") from exc
        return sol.ravel()

    def interpolate(self, f) -> np.ndarray:
        """Nodal interpolant of ``f(x, y)`` (continuous f gives zero jumps)."""
        K = self.mesh.num_elements
        x = self.to_physical(np.arange(K)[:, None], self.ref_nodes[None])
        return np.asarray(f(x[..., 0], x[..., 1]), dtype=float).reshape(-1)
