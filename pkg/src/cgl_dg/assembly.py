"""Interior-penalty DG operators: stiffness, mass, frozen reaction, loads.

The stiffness matrix realises

    a(u, v) = sum_K (grad u, grad v)_K
              - sum_e <{grad u}.[v]>_e + eps * sum_e <{grad v}.[u]>_e
              + sum_e (sigma / h_e) <[u].[v]>_e

over interior and boundary edges; on a boundary edge ``{w} = w`` and
``[w] = w n``, which imposes Dirichlet data weakly. ``A[i, j] = a(phi_j,
phi_i)`` so that ``v @ A @ u == a(u, v)``.
"""

from __future__ import annotations

import enum
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from . import _kernels
from .mesh import BOUNDARY
from .space import DATA_QUAD_DEGREE, DGSpace


class IPVariant(enum.Enum):
    """Interior-penalty flavour and its symmetry parameter ``eps``."""

    SIPG = -1
    NIPG = 1
    IIPG = 0

    @property
    def eps(self) -> float:
        return float(self.value)

    @classmethod
    def parse(cls, value) -> "IPVariant":
        if isinstance(value, cls):
            return value
        try:
            return cls[str(value).strip().upper()]
        except KeyError:
            raise ValueError(f"unknown interior-penalty variant {value!r}; expected SIPG, NIPG or IIPG") from None


def _block_diagonal(space: DGSpace, blocks: np.ndarray) -> sp.csr_matrix:
    K, nb, _ = blocks.shape
    dofs = space.element_dofs(np.arange(K))
    rows = np.repeat(dofs, nb, axis=1).ravel()
    cols = np.tile(dofs, (1, nb)).ravel()
    n = space.total_dofs
    return sp.csr_matrix((blocks.ravel(), (rows, cols)), shape=(n, n))


def _edge_stencils(space: DGSpace, degree: int):
    """Per-edge dof lists, scalar jumps and averaged normal derivatives."""
    m = space.mesh
    tr = space.edge_traces(degree)
    left = m.edge_elements[:, 0]
    right = m.edge_elements[:, 1]
    bnd = right == BOUNDARY
    right_dofs = space.element_dofs(np.where(bnd, left, right))
    dofs = np.concatenate([space.element_dofs(left), right_dofs], axis=1)
    jump = np.concatenate([tr.values[0], -tr.values[1]], axis=2)
    half = np.where(bnd, 1.0, 0.5)[:, None, None]
    avg_dn = np.concatenate([half * tr.grad_n[0], half * tr.grad_n[1]], axis=2)
    return dofs, jump, avg_dn, tr.wlen


def edge_quad_degree(space: DGSpace) -> int:
    return max(2 * space.degree + 1, 3)


def volume_quad_degree(space: DGSpace) -> int:
    # the frozen reaction integrand |w|^2 phi_i phi_j has degree 4r
    return max(4 * space.degree, 4)


def assemble_stiffness(space: DGSpace, variant, sigma: float) -> sp.csr_matrix:
    """Interior-penalty stiffness matrix for ``variant`` with penalty ``sigma``."""
    variant = IPVariant.parse(variant)
    if not np.isfinite(sigma) or sigma <= 0:
        raise ValueError(f"penalty sigma must be positive, got {sigma!r}")
    q = space.element_quadrature(volume_quad_degree(space))
    vol = np.einsum("kq,kqic,kqjc->kij", q.wdet, q.grads, q.grads)
    A = _block_diagonal(space, vol)

    dofs, jump, avg_dn, wlen = _edge_stencils(space, edge_quad_degree(space))
    penalty = sigma / space.mesh.lengths
    blocks = _kernels.edge_blocks(jump, avg_dn, wlen, penalty, variant.eps)
    nd = dofs.shape[1]
    rows = np.repeat(dofs, nd, axis=1).ravel()
    cols = np.tile(dofs, (1, nd)).ravel()
    n = space.total_dofs
    A = A + sp.csr_matrix((blocks.ravel(), (rows, cols)), shape=(n, n))
    A.sum_duplicates()
    return A.tocsr()


def assemble_mass(space: DGSpace) -> sp.csr_matrix:
    """Block-diagonal mass matrix."""
    return _block_diagonal(space, space.local_mass)


def reaction_blocks(space: DGSpace, w1: np.ndarray, w2: np.ndarray) -> np.ndarray:
    """Element blocks of ``int (w1^2 + w2^2) phi_j phi_i``, shape (K, nb, nb)."""
    n = space.total_dofs
    w1 = np.asarray(w1, dtype=float)
    w2 = np.asarray(w2, dtype=float)
    if w1.shape != (n,) or w2.shape != (n,):
        raise ValueError(f"frozen iterate must have {n} entries per part, got {w1.shape} and {w2.shape}")
    q = space.element_quadrature(volume_quad_degree(space))
    K, nb = space.mesh.num_elements, space.dofs_per_element
    return _kernels.reaction_blocks(q.phi, q.wdet, w1.reshape(K, nb), w2.reshape(K, nb))


def assemble_frozen_reaction(space: DGSpace, w1: np.ndarray, w2: np.ndarray) -> sp.csr_matrix:
    """Picard-frozen cubic term as a block-diagonal matrix."""
    return _block_diagonal(space, reaction_blocks(space, w1, w2))


def assemble_load(space: DGSpace, f, t: float, *, sigma: float | None = None, variant=None, g=None,
                  degree: int = DATA_QUAD_DEGREE) -> np.ndarray:
    """Load vector of the source ``f(x, y, t)`` plus weak Dirichlet data.

    Boundary data ``g(x, y, t)`` contributes ``eps <grad v . n, g> +
    (sigma / h_e) <g, v>`` on boundary edges and needs ``sigma`` and
    ``variant``. With ``g=None`` the trace is homogeneous and no boundary
    term is added.
    """
    L = space.moments(lambda x, y: f(x, y, t), degree)
    if g is None:
        return L
    if sigma is None or variant is None:
        raise ValueError("weak Dirichlet data needs sigma and variant")
    variant = IPVariant.parse(variant)
    m = space.mesh
    tr = space.edge_traces(degree)
    be = m.boundary_edges
    k = m.edge_elements[be, 0]
    pts = tr.points[be]
    gv = np.asarray(g(pts[..., 0], pts[..., 1], t), dtype=float) * tr.wlen[be]
    pen = (sigma / m.lengths[be])[:, None, None]
    contrib = np.einsum("eq,eqi->ei", gv, variant.eps * tr.grad_n[0, be] + pen * tr.values[0, be])
    np.add.at(L, space.element_dofs(k).ravel(), contrib.ravel())
    return L


def dump_coo(matrix, path) -> None:
    """Write ``row col value`` lines, sorted by row then column."""
    coo = sp.coo_matrix(matrix)
    order = np.lexsort((coo.col, coo.row))
    with Path(path).open("w") as fh:
        for i, j, v in zip(coo.row[order], coo.col[order], coo.data[order]):
            fh.write(f"{i} {j} {v:.17g}\n")
