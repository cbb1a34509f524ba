"""Sparse assembly of the bilinear forms behind the block eigenproblems.

All basis functions are piecewise P1 (or P0), so each local matrix is
integrated exactly with the barycentric identity
``int_T lambda_i lambda_j = |T| (1 + delta_ij) / 12``; no quadrature error
enters the matrices.
"""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.io

from .fespace import P1_MASS, FeSpace

__all__ = ["FORMS", "assemble", "assemble_local", "verify_transpose_identity", "dump_matrix"]

# tag -> (row family kind, column family kind); "vec" = any vector family
FORMS = {
    "mass_sigma": ("vec", "vec"),       # (sigma, tau)
    "divdiv": ("vec", "vec"),           # (div sigma, div tau)
    "curlcurl": ("vec", "vec"),         # (curl sigma, curl tau)
    "grad_coupling": ("scalar", "vec"),  # -(sigma, grad v): rows v, columns sigma
    "stiffness": ("scalar", "scalar"),  # (grad u, grad v)
    "udiv": ("vec", "scalar"),          # (u, div tau): rows tau, columns u
    "mass_u": ("scalar", "scalar"),     # (p, q)
    "div_coupling": ("scalar", "vec"),  # (div sigma, v): rows v, columns sigma
}

SYMMETRIC_FORMS = ("mass_sigma", "divdiv", "curlcurl", "stiffness", "mass_u")


def _check(form, rowspace, colspace):
    if form not in FORMS:
        raise ValueError(f"unknown form {form!r}")
    if rowspace.mesh is not colspace.mesh:
        raise ValueError("row and column spaces live on different meshes")
    want = FORMS[form]
    for space, kind in zip((rowspace, colspace), want):
        if (kind == "vec") != space.is_vector:
            raise ValueError(f"form {form!r} cannot pair with family {space.family}")
    if form in ("stiffness", "grad_coupling") and rowspace.family == "DG0":
        raise ValueError("gradient of a DG0 function is not defined")
    if form == "stiffness" and colspace.family == "DG0":
        raise ValueError("gradient of a DG0 function is not defined")


def assemble_local(form: str, rowspace: FeSpace, colspace: FeSpace):
    """Element matrices ``(nt, nloc_row, nloc_col)`` before global summation."""
    _check(form, rowspace, colspace)
    areas = rowspace.mesh.areas
    Vr, Vc = rowspace.local_values, colspace.local_values
    if form in ("mass_sigma", "mass_u"):
        return np.einsum("t,ij,taic,tbjc->tab", areas, P1_MASS, Vr, Vc)
    if form == "divdiv":
        dr, dc = rowspace.local_divergence(), colspace.local_divergence()
        return areas[:, None, None] * dr[:, :, None] * dc[:, None, :]
    if form == "curlcurl":
        cr, cc = rowspace.local_curl(), colspace.local_curl()
        return areas[:, None, None] * cr[:, :, None] * cc[:, None, :]
    if form == "stiffness":
        gr, gc = rowspace.local_gradients(), colspace.local_gradients()
        return areas[:, None, None] * np.einsum("tad,tbd->tab", gr, gc)
    if form == "grad_coupling":
        g = rowspace.local_gradients()                       # (nt, nr, 2)
        mean = Vc.mean(axis=2)                               # int_T tau = |T| mean of vertex values
        return -areas[:, None, None] * np.einsum("tad,tbd->tab", g, mean)
    if form == "div_coupling":
        d = colspace.local_divergence()
        mean = Vr[..., 0].mean(axis=2)
        return areas[:, None, None] * mean[:, :, None] * d[:, None, :]
    if form == "udiv":
        d = rowspace.local_divergence()
        mean = Vc[..., 0].mean(axis=2)
        return areas[:, None, None] * d[:, :, None] * mean[:, None, :]
    raise AssertionError(form)


def assemble(form: str, rowspace: FeSpace, colspace: FeSpace | None = None, eliminate=True):
    """Assemble a bilinear form into a CSR matrix.

    Parameters
    ----------
    form : str
        One of :data:`FORMS`.
    rowspace, colspace : FeSpace
        Test and trial spaces; ``colspace`` defaults to ``rowspace``.
    eliminate : bool
        Drop rows and columns of constrained dofs (essential conditions).
        With ``False`` the matrix is indexed by all dofs of both spaces.

    Returns
    -------
    scipy.sparse.csr_matrix
    """
    colspace = rowspace if colspace is None else colspace
    K = assemble_local(form, rowspace, colspace)
    if eliminate:
        rmap, cmap = rowspace.free_dofmap(), colspace.free_dofmap()
        shape = (rowspace.nfree, colspace.nfree)
    else:
        rmap, cmap = rowspace.dofmap, colspace.dofmap
        shape = (rowspace.ndof, colspace.ndof)
    nr, nc = rmap.shape[1], cmap.shape[1]
    rows = np.repeat(rmap, nc, axis=1).ravel()
    cols = np.tile(cmap, (1, nr)).ravel()
    vals = K.ravel()
    keep = (rows >= 0) & (cols >= 0)
    # coo -> csr sums duplicates in a fixed order, so results are reproducible
    A = sp.coo_matrix((vals[keep], (rows[keep], cols[keep])), shape=shape).tocsr()
    A.sum_duplicates()
    A.sort_indices()
    return A


def verify_transpose_identity(B, D, tol=1e-12) -> bool:
    """Check ``D = -B^T`` entrywise.

    ``B`` is the matrix of ``-(sigma, grad v)`` and ``D`` the right-hand block
    of the first equation, i.e. the matrix of ``-(u, div tau)``. The identity
    is integration by parts and needs ``u = 0`` on the boundary.
    """
    if D.shape != B.T.shape:
        raise ValueError(f"dimension mismatch: D {D.shape} vs B^T {B.T.shape}")
    diff = (sp.csr_matrix(D) + sp.csr_matrix(B).T).tocoo()
    return bool(diff.nnz == 0 or np.abs(diff.data).max() < tol)


def dump_matrix(A, path, comment=""):
    """Matrix Market coordinate dump."""
    scipy.io.mmwrite(str(path), sp.coo_matrix(A), comment=comment, precision=17)
