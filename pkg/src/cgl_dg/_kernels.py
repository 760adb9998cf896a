"""Hot assembly kernels.

Each kernel exists twice: a numba ``@njit`` loop version and a vectorised
numpy version. The numba path is used when numba imports and the
environment variable ``CGL_DG_DISABLE_JIT`` is unset (or ``0``). Both
paths must agree to rounding; ``benchmarks/bench_kernels.py`` compares
their speed.

Array conventions: ``K`` elements, ``nq`` quadrature points, ``nb`` local
basis functions, ``Ne`` edges, ``nd`` local dofs on an edge stencil.
"""

from __future__ import annotations

import os

import numpy as np

_FLAG = os.environ.get("CGL_DG_DISABLE_JIT", "0").strip().lower()
_DISABLED = _FLAG not in ("", "0", "false", "no")

try:
    if _DISABLED:
        raise ImportError("disabled by CGL_DG_DISABLE_JIT")
    from numba import njit

    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False

BACKEND = "numba" if HAVE_NUMBA else "numpy"


# --- numpy reference path -------------------------------------------------


def weighted_mass_blocks_numpy(phi, wdet, coef):
    """Blocks ``B[k,i,j] = sum_q wdet[k,q] coef[k,q] phi[q,i] phi[q,j]``."""
    return np.einsum("kq,qi,qj->kij", wdet * coef, phi, phi)


def reaction_blocks_numpy(phi, wdet, w1, w2):
    """Element blocks of the frozen-modulus reaction matrix.

    ``w1``, ``w2`` are (K, nb) local coefficients of the frozen iterate.
    """
    a = w1 @ phi.T
    b = w2 @ phi.T
    return np.einsum("kq,qi,qj->kij", wdet * (a * a + b * b), phi, phi)


def load_blocks_numpy(phi, wdet, fvals):
    """Element load vectors ``L[k,i] = sum_q wdet[k,q] f[k,q] phi[q,i]``."""
    return (wdet * fvals) @ phi


def edge_blocks_numpy(jump, avg_dn, wlen, penalty, eps):
    """Local interior-penalty edge matrices.

    ``jump[e,q,i]`` is the scalar jump of local basis function ``i`` (the
    vector jump divided by the edge normal), ``avg_dn[e,q,i]`` the normal
    component of its averaged gradient. Row index is the test function.
    """
    wjump = jump * wlen[:, :, None]
    consist = np.einsum("eqi,eqj->eij", wjump, avg_dn)
    pen = np.einsum("eqi,eqj->eij", wjump, jump)
    return -consist + eps * np.transpose(consist, (0, 2, 1)) + penalty[:, None, None] * pen


# --- numba path -----------------------------------------------------------

if HAVE_NUMBA:

    @njit(cache=True)
    def _weighted_mass_blocks_jit(phi, wdet, coef):
        K, nq = wdet.shape
        nb = phi.shape[1]
        out = np.zeros((K, nb, nb))
        for k in range(K):
            for q in range(nq):
                c = wdet[k, q] * coef[k, q]
                for i in range(nb):
                    ci = c * phi[q, i]
                    for j in range(nb):
                        out[k, i, j] += ci * phi[q, j]
        return out

    @njit(cache=True)
    def _reaction_blocks_jit(phi, wdet, w1, w2):
        K, nq = wdet.shape
        nb = phi.shape[1]
        out = np.zeros((K, nb, nb))
        for k in range(K):
            for q in range(nq):
                a = 0.0
                b = 0.0
                for i in range(nb):
                    a += w1[k, i] * phi[q, i]
                    b += w2[k, i] * phi[q, i]
                c = wdet[k, q] * (a * a + b * b)
                for i in range(nb):
                    ci = c * phi[q, i]
                    for j in range(nb):
                        out[k, i, j] += ci * phi[q, j]
        return out

    @njit(cache=True)
    def _load_blocks_jit(phi, wdet, fvals):
        K, nq = wdet.shape
        nb = phi.shape[1]
        out = np.zeros((K, nb))
        for k in range(K):
            for q in range(nq):
                c = wdet[k, q] * fvals[k, q]
                for i in range(nb):
                    out[k, i] += c * phi[q, i]
        return out

    @njit(cache=True)
    def _edge_blocks_jit(jump, avg_dn, wlen, penalty, eps):
        Ne, nq, nd = jump.shape
        out = np.zeros((Ne, nd, nd))
        for e in range(Ne):
            for q in range(nq):
                w = wlen[e, q]
                for i in range(nd):
                    ji = jump[e, q, i] * w
                    di = avg_dn[e, q, i] * w
                    for j in range(nd):
                        out[e, i, j] += (
                            -ji * avg_dn[e, q, j]
                            + eps * di * jump[e, q, j]
                            + penalty[e] * ji * jump[e, q, j]
                        )
        return out

    def weighted_mass_blocks(phi, wdet, coef):
        return _weighted_mass_blocks_jit(
            np.ascontiguousarray(phi), np.ascontiguousarray(wdet), np.ascontiguousarray(coef)
        )

    def reaction_blocks(phi, wdet, w1, w2):
        return _reaction_blocks_jit(
            np.ascontiguousarray(phi),
            np.ascontiguousarray(wdet),
            np.ascontiguousarray(w1, dtype=np.float64),
            np.ascontiguousarray(w2, dtype=np.float64),
        )

    def load_blocks(phi, wdet, fvals):
        return _load_blocks_jit(
            np.ascontiguousarray(phi), np.ascontiguousarray(wdet), np.ascontiguousarray(fvals)
        )

    def edge_blocks(jump, avg_dn, wlen, penalty, eps):
        return _edge_blocks_jit(
            np.ascontiguousarray(jump),
            np.ascontiguousarray(avg_dn),
            np.ascontiguousarray(wlen),
            np.ascontiguousarray(penalty, dtype=np.float64),
            float(eps),
        )

else:
    weighted_mass_blocks = weighted_mass_blocks_numpy
    reaction_blocks = reaction_blocks_numpy
    load_blocks = load_blocks_numpy
    edge_blocks = edge_blocks_numpy
