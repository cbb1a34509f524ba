"""Degenerate block eigenproblems and their symmetric Schur reductions.

Every formulation shares the left-hand block matrix

    K = [[A, B^T],
         [B, C  ]]

with A the flux form (mass + div-div, plus curl-curl when enriched), B the
coupling ``-(sigma, grad v)`` and C the stiffness matrix. The right-hand
blocks differ:

    F1, F1curl : [[0, -B^T], [0, 0]]
    F1star     : [[0, 0], [-B, 0]]
    LLstar     : [[0, 0], [0, M]]

The finite spectrum is computed from the reductions

    F1      A x = (lam + 1) B^T C^-1 B x
    F1star  C y = (lam + 1) B A^-1 B^T y
    LLstar  (C - B A^-1 B^T) y = mu M y

with the roles of the two sides swapped so that the infinite eigenvalues
become zeros and the wanted ones the largest.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

__all__ = [
    "FORMULATIONS",
    "BlockPencil",
    "EigenPair",
    "FamilyReport",
    "ReducedProblem",
    "DENSE_LIMIT",
    "schur_reduce",
    "solve_finite_spectrum",
    "classify_families",
    "map_llstar_eigenvalue",
    "llstar_from_lambda",
    "published_llstar_map",
    "recover_llstar_eigenfunction",
]

FORMULATIONS = ("F1", "F1star", "LLstar", "F1curl")
DENSE_LIMIT = 2000
INFINITE_TOL = 1e-10
_V0_SEED = 20240531


class FactorizationError(RuntimeError):
    """A block that must be symmetric positive definite could not be factorized."""


@dataclass
class BlockPencil:
    """The 2x2 block generalized eigenproblem ``K z = lam R z``.

    ``sigma_space`` and ``u_space`` are optional back references used to
    normalize eigenfunctions in L2 and to build estimators.
    """

    formulation: str
    A: sp.spmatrix
    B: sp.spmatrix
    C: sp.spmatrix
    M: sp.spmatrix | None = None
    sigma_space: object = None
    u_space: object = None
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.formulation not in FORMULATIONS:
            raise ValueError(f"unknown formulation {self.formulation!r}")
        n_s, n_u = self.A.shape[0], self.C.shape[0]
        if self.A.shape != (n_s, n_s) or self.C.shape != (n_u, n_u) or self.B.shape != (n_u, n_s):
            raise ValueError("inconsistent block dimensions")
        if self.M is None:
            if self.formulation == "LLstar":
                raise ValueError("LLstar needs the mass block M")
        elif self.M.shape != (n_u, n_u):
            raise ValueError("M must match C")

    @property
    def n_sigma(self) -> int:
        return self.A.shape[0]

    @property
    def n_u(self) -> int:
        return self.C.shape[0]

    @property
    def dim(self) -> int:
        return self.n_sigma + self.n_u

    def lhs(self):
        if "lhs" not in self._cache:
            self._cache["lhs"] = sp.bmat([[self.A, self.B.T], [self.B, self.C]], format="csr")
        return self._cache["lhs"]

    def rhs(self):
        if "rhs" not in self._cache:
            self._cache["rhs"] = self._rhs()
        return self._cache["rhs"]

    def _rhs(self):
        n_s, n_u = self.n_sigma, self.n_u
        Z = None
        if self.formulation in ("F1", "F1curl"):
            blocks = [[sp.csr_matrix((n_s, n_s)), -self.B.T], [Z, sp.csr_matrix((n_u, n_u))]]
        elif self.formulation == "F1star":
            blocks = [[sp.csr_matrix((n_s, n_s)), Z], [-self.B, sp.csr_matrix((n_u, n_u))]]
        else:
            blocks = [[sp.csr_matrix((n_s, n_s)), Z], [Z, self.M]]
        return sp.bmat(blocks, format="csr")

    def rearranged(self):
        """The symmetric rearranged pencil ``diag(A, 0) z = (lam + 1) R2 z``.

        Only defined for the FOSLS family; used as a symmetry cross-check.
        """
        if self.formulation == "LLstar":
            raise ValueError("no rearranged form for LLstar")
        n_s, n_u = self.n_sigma, self.n_u
        left = sp.bmat([[self.A, None], [None, sp.csr_matrix((n_u, n_u))]], format="csr")
        right = sp.bmat([[sp.csr_matrix((n_s, n_s)), -self.B.T], [-self.B, -self.C]], format="csr")
        return left, right

    # -- cached factorizations ------------------------------------------
    def _factor(self, name, mat):
        if name not in self._cache:
            try:
                lu = spla.splu(sp.csc_matrix(mat))
            except RuntimeError as exc:  # singular factor
                raise FactorizationError(f"block {name} is not factorizable: {exc}") from exc
            self._cache[name] = lu
        return self._cache[name]

    def solve_A(self, rhs):
        return self._factor("A", self.A).solve(np.asarray(rhs, dtype=float))

    def solve_C(self, rhs):
        return self._factor("C", self.C).solve(np.asarray(rhs, dtype=float))

    def solve_K(self, rhs):
        return self._factor("K", self.lhs()).solve(np.asarray(rhs, dtype=float))


@dataclass
class EigenPair:
    """One finite eigenpair with block coefficient vectors.

    ``value`` is the eigenvalue of the pencil itself (``mu`` for LLstar);
    ``lam`` is the Laplace eigenvalue it represents.
    """

    formulation: str
    value: float
    u: np.ndarray
    sigma: np.ndarray
    residual: float

    @property
    def lam(self) -> float:
        if self.formulation == "LLstar":
            return map_llstar_eigenvalue(self.value)
        return self.value


@dataclass
class FamilyReport:
    """Eigenvalue family counts of a block pencil.

    For LLstar ``n_infinite_keru`` is always zero and ``n_infinite_sigma``
    counts the ``mu = +inf`` family.
    """

    formulation: str
    n_infinite_sigma: int
    n_infinite_keru: int
    n_finite: int
    n_infinite_detected: int
    n_finite_detected: int
    max_imag: float
    finite_values: np.ndarray

    @property
    def counts(self):
        if self.formulation == "LLstar":
            return (self.n_infinite_sigma, self.n_finite)
        return (self.n_infinite_sigma, self.n_infinite_keru, self.n_finite)

    @property
    def total(self) -> int:
        return self.n_infinite_sigma + self.n_infinite_keru + self.n_finite

    @property
    def consistent(self) -> bool:
        return (self.n_finite == self.n_finite_detected
                and self.n_infinite_sigma + self.n_infinite_keru == self.n_infinite_detected)


@dataclass
class ReducedProblem:
    """Symmetric reduced problem ``lhs v = (value + shift) rhs v``.

    ``variable`` is the unknown that survives the elimination: ``"sigma"``
    for the F1 reduction, ``"u"`` for F1star and LLstar. Operators are
    :class:`scipy.sparse.linalg.LinearOperator` instances; ``dense()``
    materializes them.
    """

    formulation: str
    variable: str
    lhs: spla.LinearOperator
    rhs: spla.LinearOperator
    shift: float

    def dense(self):
        n = self.lhs.shape[0]
        eye = np.eye(n)
        L = self.lhs.matmat(eye)
        R = self.rhs.matmat(eye)
        return L, R


def _as_op(mat):
    return spla.aslinearoperator(sp.csr_matrix(mat))


def schur_reduce(p: BlockPencil, variable: str | None = None) -> ReducedProblem:
    """Symmetric Schur complement form of a block pencil.

    F1 and F1curl reduce on ``sigma`` by default; pass ``variable="u"`` to
    get the equivalent F1star reduction instead.
    """
    form = p.formulation
    if variable is None:
        variable = "sigma" if form in ("F1", "F1curl") else "u"
    if form == "LLstar":
        if variable != "u":
            raise ValueError("LLstar reduces on u only")
        lhs = spla.LinearOperator(
            (p.n_u, p.n_u), dtype=float,
            matvec=lambda y: p.C @ y - p.B @ p.solve_A(p.B.T @ y),
            matmat=lambda Y: p.C @ Y - p.B @ p.solve_A(p.B.T @ Y))
        return ReducedProblem(form, "u", lhs, _as_op(p.M), 0.0)
    if variable == "sigma":
        rhs = spla.LinearOperator(
            (p.n_sigma, p.n_sigma), dtype=float,
            matvec=lambda x: p.B.T @ p.solve_C(p.B @ x),
            matmat=lambda X: p.B.T @ p.solve_C(p.B @ X))
        return ReducedProblem(form, "sigma", _as_op(p.A), rhs, 1.0)
    if variable == "u":
        rhs = spla.LinearOperator(
            (p.n_u, p.n_u), dtype=float,
            matvec=lambda y: p.B @ p.solve_A(p.B.T @ y),
            matmat=lambda Y: p.B @ p.solve_A(p.B.T @ Y))
        return ReducedProblem(form, "u", _as_op(p.C), rhs, 1.0)
    raise ValueError(f"unknown reduction variable {variable!r}")


def map_llstar_eigenvalue(mu):
    """Laplace eigenvalue represented by an LL* eigenvalue.

    Testing the LL* system with a Laplace eigenfunction ``phi`` (eigenvalue
    ``lam``) gives ``chi = grad(p - u)`` with ``u = -div chi = (lam / (1 + lam)) p``,
    hence ``mu = lam^2 / (1 + lam)`` and

        lam = (mu + sqrt(mu^2 + 4 mu)) / 2.

    ``mu`` must be nonnegative (every finite LL* eigenvalue is positive).
    """
    mu = np.asarray(mu, dtype=float)
    if np.any(mu < 0):
        raise ValueError("LL* eigenvalues are nonnegative")
    lam = 0.5 * (mu + np.sqrt(mu * mu + 4.0 * mu))
    return float(lam) if lam.ndim == 0 else lam


def llstar_from_lambda(lam):
    """Inverse of :func:`map_llstar_eigenvalue`: ``mu = lam^2 / (1 + lam)``."""
    lam = np.asarray(lam, dtype=float)
    mu = lam * lam / (1.0 + lam)
    return float(mu) if mu.ndim == 0 else mu


def published_llstar_map(mu):
    """The closed form ``(mu + sqrt(mu^2 + 4)) / 2``, inverse of ``lam - 1/lam``.

    Kept for comparison only: it is not the relation satisfied by the LL*
    system as assembled here (see :func:`map_llstar_eigenvalue`), and applied
    to discrete LL* eigenvalues it converges to a different limit.
    """
    mu = np.asarray(mu, dtype=float)
    root = np.sqrt(mu * mu + 4.0)
    # the second branch avoids cancellation for negative mu
    with np.errstate(divide="ignore"):
        lam = np.where(mu >= 0, 0.5 * (mu + root), 2.0 / (root - mu))
    return float(lam) if lam.ndim == 0 else lam


def _u_mass(p: BlockPencil):
    if p.M is not None:
        return p.M
    if p.u_space is not None:
        from .assembly import assemble
        p.M = assemble("mass_u", p.u_space)
        return p.M
    return None


def _dense_reduced(p: BlockPencil):
    """Finite eigenvalues (ascending) and u-vectors from a dense reduction."""
    C = p.C.toarray()
    if p.n_sigma:
        AinvBt = p.solve_A(p.B.T.toarray())
        S = p.B @ AinvBt
    else:
        S = np.zeros_like(C)
    S = 0.5 * (S + S.T)
    if p.formulation == "LLstar":
        L = 0.5 * ((C - S) + (C - S).T)
        vals, vecs = sla.eigh(L, p.M.toarray())
        return vals, vecs
    # S y = t C y with t = 1 / (lam + 1); t = 0 is the infinite family
    t, vecs = sla.eigh(S, C)
    scale = max(abs(t).max(initial=0.0), 1e-300)
    keep = t > 1e-10 * scale
    t, vecs = t[keep][::-1], vecs[:, keep][:, ::-1]
    return 1.0 / t - 1.0, vecs


def _sparse_reduced(p: BlockPencil, k: int, tol: float):
    rng = np.random.default_rng(_V0_SEED)
    v0 = rng.standard_normal(p.n_u)
    ncv = min(p.n_u, max(2 * k + 1, 20))
    if p.formulation == "LLstar":
        # M y = t (C - S) y, t = 1/mu; (C - S)^-1 via the full block matrix
        red = schur_reduce(p)

        def minv(r):
            z = p.solve_K(np.concatenate([np.zeros(p.n_sigma), r]))
            return z[p.n_sigma:]
        Minv = spla.LinearOperator((p.n_u, p.n_u), matvec=minv, dtype=float)
        t, vecs = spla.eigsh(p.M, k=k, M=red.lhs, Minv=Minv, which="LA", v0=v0, ncv=ncv, tol=tol)
        order = np.argsort(-t)
        t, vecs = t[order], vecs[:, order]
        return 1.0 / t, vecs
    red = schur_reduce(p, variable="u")
    Cinv = spla.LinearOperator((p.n_u, p.n_u), matvec=p.solve_C, dtype=float)
    t, vecs = spla.eigsh(red.rhs, k=k, M=p.C, Minv=Cinv, which="LA", v0=v0, ncv=ncv, tol=tol)
    order = np.argsort(-t)
    t, vecs = t[order], vecs[:, order]
    return 1.0 / t - 1.0, vecs


def _recover_sigma(p: BlockPencil, value, y):
    if p.n_sigma == 0:
        return np.zeros(0)
    w = p.solve_A(p.B.T @ y)
    if p.formulation in ("F1", "F1curl"):
        return -(value + 1.0) * w
    return -w


def block_residual(p: BlockPencil, value, sigma, u):
    """Relative residual ``|K z - value R z| / (|K z| + |value| |R z|)``."""
    z = np.concatenate([sigma, u])
    Kz = p.lhs() @ z
    Rz = p.rhs() @ z
    den = np.linalg.norm(Kz) + abs(value) * np.linalg.norm(Rz)
    return float(np.linalg.norm(Kz - value * Rz) / den) if den > 0 else 0.0


def _finite_count(p: BlockPencil) -> int:
    if p.formulation == "LLstar":
        return p.n_u
    if p.n_sigma == 0 or p.n_u == 0:
        return 0
    if p.dim <= DENSE_LIMIT:
        return int(np.linalg.matrix_rank(p.B.toarray()))
    return p.n_u


def solve_finite_spectrum(p: BlockPencil, k: int = 1, dense: bool | None = None, tol: float = 1e-12):
    """The ``k`` smallest finite eigenpairs, ascending.

    Eigenvectors are returned in block form: ``u`` normalized in L2 with its
    largest-magnitude coefficient positive, ``sigma`` (or ``chi`` for LLstar)
    recovered from the eliminated block with the same scaling.

    Raises
    ------
    ValueError
        If ``k`` exceeds the number of finite eigenvalues.
    """
    if k < 1:
        raise ValueError("k must be positive")
    n_finite = _finite_count(p)
    if k > n_finite:
        raise ValueError(f"requested {k} eigenvalues but the pencil has only {n_finite} finite ones")
    if dense is None:
        dense = p.dim <= DENSE_LIMIT
    if not dense and k >= p.n_u - 1:
        dense = True
    if dense:
        vals, vecs = _dense_reduced(p)
        vals, vecs = vals[:k], vecs[:, :k]
    else:
        vals, vecs = _sparse_reduced(p, k, tol)
    M = _u_mass(p)
    pairs = []
    for j in range(len(vals)):
        y = vecs[:, j]
        nrm = math.sqrt(float(y @ (M @ y))) if M is not None else float(np.linalg.norm(y))
        y = y / nrm
        if y[np.argmax(np.abs(y))] < 0:
            y = -y
        sigma = _recover_sigma(p, vals[j], y)
        res = block_residual(p, vals[j], sigma, y)
        pairs.append(EigenPair(p.formulation, float(vals[j]), y, sigma, res))
    return pairs


def classify_families(p: BlockPencil, tol: float = INFINITE_TOL) -> FamilyReport:
    """Count the eigenvalue families and cross-check them with a dense QZ solve.

    Infinite eigenvalues are those with ``|beta| < tol * ||pencil||`` in the
    homogeneous (alpha, beta) representation.
    """
    if p.dim > DENSE_LIMIT:
        raise ValueError(f"pencil dimension {p.dim} exceeds the dense limit {DENSE_LIMIT}")
    K = p.lhs().toarray()
    R = p.rhs().toarray()
    ab = sla.eig(K, R, homogeneous_eigvals=True, right=False)
    alpha, beta = ab[0], ab[1]
    norm = max(np.linalg.norm(K, 2), np.linalg.norm(R, 2))
    inf_mask = np.abs(beta) < tol * norm
    finite = alpha[~inf_mask] / beta[~inf_mask]
    max_imag = float(np.abs(finite.imag).max(initial=0.0))
    finite_vals = np.sort(finite.real)

    Bd = p.B.toarray()
    rank = int(np.linalg.matrix_rank(Bd)) if Bd.size else 0
    if p.formulation in ("F1", "F1curl"):
        counts = (p.n_sigma, p.n_u - rank, rank)
    elif p.formulation == "F1star":
        counts = (p.n_u, p.n_sigma - rank, rank)
    else:
        counts = (p.n_sigma, 0, p.n_u)
    return FamilyReport(p.formulation, *counts,
                        n_infinite_detected=int(inf_mask.sum()),
                        n_finite_detected=int((~inf_mask).sum()),
                        max_imag=max_imag, finite_values=finite_vals)


@dataclass
class LLStarRecovery:
    """Laplace eigenfunction data recovered from an LL* eigenpair.

    ``u`` holds the elementwise values of ``-div chi_h`` (constant per
    triangle for the lowest-order spaces), ``grad_u`` the vertex values of
    ``grad p_h - chi_h`` per triangle; the two signs are consistent with
    ``chi = grad(p - u)``. Both carry the same scale factor,
    chosen so that ``u`` has unit L2 norm.
    """

    u: np.ndarray
    grad_u: np.ndarray
    scale: float


def recover_llstar_eigenfunction(p: BlockPencil, pair: EigenPair) -> LLStarRecovery:
    if p.formulation != "LLstar" or pair.formulation != "LLstar":
        raise ValueError("recovery applies to LLstar eigenpairs only")
    S, U = p.sigma_space, p.u_space
    mesh = S.mesh
    chi = S.vertex_values(pair.sigma)                 # (nt, 3, 2)
    G = mesh.barycentric_gradients()
    u = -np.einsum("tvc,tvc->t", chi, G)
    grad_p = np.einsum("tv,tvd->td", U.vertex_values(pair.u)[..., 0], G)
    grad_u = grad_p[:, None, :] - chi
    nrm = math.sqrt(float(np.sum(mesh.areas * u ** 2)))
    scale = 1.0 / nrm if nrm > 0 else 0.0
    return LLStarRecovery(u * scale, grad_u * scale, scale)
