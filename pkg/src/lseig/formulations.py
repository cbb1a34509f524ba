"""Discrete eigenproblems, solution operators and error norms.

A :class:`FormulationSpec` names one of the least-squares formulations
(``F1``, ``F1star``, ``LLstar``, ``F1curl``) together with the flux family.
Two cheap baselines used only for comparison tables are also available:
``PEP`` (conforming P1 Galerkin) and ``PEMd`` (mixed RT0-P0).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import assemble, verify_transpose_identity
from .eigsolve import BlockPencil, EigenPair, solve_finite_spectrum
from .fespace import FeFunction, FeSpace, _call_field, build_space, canonical_family, quadrature_points
from .mesh import Mesh

__all__ = [
    "FormulationSpec",
    "ExactMode",
    "SourceSolution",
    "ErrorRecord",
    "square_mode",
    "build_pencil",
    "solve_eigen",
    "apply_discrete_solution_operator",
    "compute_error_norms",
    "align_sign",
]

LS_TAGS = ("F1", "F1star", "LLstar", "F1curl")
BASELINE_TAGS = ("PEP", "PEMd")


@dataclass(frozen=True)
class FormulationSpec:
    """Formulation tag, flux family and mesh.

    ``sigma_bc`` applies to CG1-vec fluxes only: ``"none"`` leaves the flux
    unconstrained, ``"tangential"`` imposes a vanishing tangential trace.
    """

    tag: str
    sigma_family: str
    mesh: Mesh
    sigma_bc: str = "none"

    def __post_init__(self):
        fam = canonical_family(self.sigma_family)
        object.__setattr__(self, "sigma_family", fam)
        if self.tag not in LS_TAGS + BASELINE_TAGS:
            raise ValueError(f"unknown formulation {self.tag!r}")
        if self.tag == "F1curl" and fam != "CG1-vec":
            raise ValueError("F1curl needs an H(div) and H(curl) conforming flux: use CG1-vec")
        if self.tag in LS_TAGS and fam not in ("RT0", "BDM1", "CG1-vec"):
            raise ValueError(f"flux family {fam} is not allowed for {self.tag}")
        if self.tag == "PEMd" and fam != "RT0":
            raise ValueError("the mixed baseline uses RT0")
        if self.sigma_bc not in ("none", "tangential"):
            raise ValueError(f"unknown flux boundary condition {self.sigma_bc!r}")
        if self.sigma_bc == "tangential" and fam != "CG1-vec":
            raise ValueError("tangential flux constraints are only implemented for CG1-vec")

    def sigma_space(self) -> FeSpace:
        return build_space(self.mesh, self.sigma_family, tangential_bc=self.sigma_bc == "tangential")

    def u_space(self) -> FeSpace:
        if self.tag == "PEMd":
            return build_space(self.mesh, "DG0")
        return build_space(self.mesh, "CG1")


def build_pencil(spec: FormulationSpec) -> BlockPencil:
    """Assemble the block pencil of a least-squares formulation.

    Raises
    ------
    ValueError
        For baseline tags, which have no block pencil.
    RuntimeError
        If the integration-by-parts identity ``D = -B^T`` fails.
    """
    if spec.tag not in LS_TAGS:
        raise ValueError(f"{spec.tag} is a baseline without a block pencil")
    S = spec.sigma_space()
    U = spec.u_space()
    A = assemble("mass_sigma", S) + assemble("divdiv", S)
    if spec.tag == "F1curl":
        A = A + assemble("curlcurl", S)
    A = A.tocsr()
    B = assemble("grad_coupling", U, S)
    C = assemble("stiffness", U)
    M = assemble("mass_u", U)
    if spec.tag in ("F1", "F1star", "F1curl"):
        D = -assemble("udiv", S, U)
        if not verify_transpose_identity(B, D, tol=1e-12 * max(1.0, abs(B).max())):
            raise RuntimeError("D = -B^T failed: check the Dirichlet elimination")
    return BlockPencil(spec.tag, A, B, C, M, sigma_space=S, u_space=U)


@dataclass
class BaselinePair:
    """Eigenpair of a baseline discretization (``u`` and optional ``sigma``)."""

    formulation: str
    value: float
    u: np.ndarray
    sigma: np.ndarray
    residual: float = 0.0

    @property
    def lam(self):
        return self.value


def _normalize(vec, M):
    vec = vec / math.sqrt(float(vec @ (M @ vec)))
    if vec[np.argmax(np.abs(vec))] < 0:
        vec = -vec
    return vec


def _solve_baseline(spec: FormulationSpec, k: int):
    U = spec.u_space()
    rng = np.random.default_rng(20240531)
    if spec.tag == "PEP":
        C = assemble("stiffness", U)
        M = assemble("mass_u", U)
        if C.shape[0] <= 2000:
            import scipy.linalg as sla
            vals, vecs = sla.eigh(C.toarray(), M.toarray(), subset_by_index=[0, k - 1])
        else:
            lu = spla.splu(C.tocsc())
            Cinv = spla.LinearOperator(C.shape, matvec=lu.solve, dtype=float)
            t, vecs = spla.eigsh(M, k=k, M=C, Minv=Cinv, which="LA",
                                 v0=rng.standard_normal(C.shape[0]), tol=1e-12)
            order = np.argsort(-t)
            vals, vecs = 1.0 / t[order], vecs[:, order]
        return [BaselinePair("PEP", float(vals[j]), _normalize(vecs[:, j], M), np.zeros(0))
                for j in range(k)], (None, U)
    # mixed RT0-P0: (sigma, tau) + (u, div tau) = 0, (div sigma, v) = -lam (u, v)
    S = spec.sigma_space()
    A0 = assemble("mass_sigma", S)
    Bm = assemble("div_coupling", U, S)
    M0 = assemble("mass_u", U)
    K = sp.bmat([[A0, Bm.T], [Bm, None]], format="csc")
    lu = spla.splu(K)
    luA = spla.splu(A0.tocsc())
    ns, nu = S.nfree, U.nfree

    def schur(v):
        return Bm @ luA.solve(Bm.T @ v)

    def schur_inv(r):
        return -lu.solve(np.concatenate([np.zeros(ns), r]))[ns:]
    Sop = spla.LinearOperator((nu, nu), matvec=schur, dtype=float)
    Sinv = spla.LinearOperator((nu, nu), matvec=schur_inv, dtype=float)
    t, vecs = spla.eigsh(M0, k=k, M=Sop, Minv=Sinv, which="LA",
                         v0=rng.standard_normal(nu), tol=1e-12)
    order = np.argsort(-t)
    vals, vecs = 1.0 / t[order], vecs[:, order]
    pairs = []
    for j in range(k):
        u = _normalize(vecs[:, j], M0)
        sigma = -luA.solve(Bm.T @ u)
        pairs.append(BaselinePair("PEMd", float(vals[j]), u, sigma))
    return pairs, (S, U)


def solve_eigen(spec: FormulationSpec, k: int = 1):
    """Solve a formulation; returns ``(pairs, pencil_or_None, (S, U))``."""
    if spec.tag in BASELINE_TAGS:
        pairs, spaces = _solve_baseline(spec, k)
        return pairs, None, spaces
    p = build_pencil(spec)
    return solve_finite_spectrum(p, k), p, (p.sigma_space, p.u_space)


@dataclass
class SourceSolution:
    sigma: FeFunction
    u: FeFunction
    residual: float


def _load_div(S: FeSpace, f, degree):
    """Vector ``(f, div tau)`` over the free dofs of S."""
    m = S.mesh
    pts, w = quadrature_points(m, degree)
    if isinstance(f, FeFunction):
        from .quadrature import triangle_rule
        bary, _ = triangle_rule(degree)
        fv = np.einsum("qv,tv->tq", bary, f.vertex_values()[..., 0])
    else:
        fv = _call_field(f, pts).reshape(m.nt, -1)
    mean = (fv * w).sum(axis=1)                     # int_T f
    loc = S.local_divergence() * mean[:, None]
    return _scatter(S, loc)


def _load_mass(U: FeSpace, f, degree):
    """Vector ``(f, q)`` over the free dofs of U."""
    from .quadrature import triangle_rule
    m = U.mesh
    bary, wq = triangle_rule(degree)
    pts, w = quadrature_points(m, degree)
    if isinstance(f, FeFunction):
        fv = np.einsum("qv,tv->tq", bary, f.vertex_values()[..., 0])
    else:
        fv = _call_field(f, pts).reshape(m.nt, -1)
    phi = np.einsum("qv,tlv->tlq", bary, U.local_values[..., 0])
    loc = np.einsum("tlq,tq,tq->tl", phi, fv, w)
    return _scatter(U, loc)


def _scatter(space: FeSpace, loc):
    fmap = space.free_dofmap().ravel()
    vals = loc.ravel()
    keep = fmap >= 0
    return np.bincount(fmap[keep], weights=vals[keep], minlength=space.nfree)


def apply_discrete_solution_operator(spec: FormulationSpec, f, pencil: BlockPencil | None = None,
                                     degree: int = 6) -> SourceSolution:
    """Discrete source solve returning ``(sigma_h, u_h)``.

    For the FOSLS family the data enters as ``-(f, div tau)`` in the first
    equation; for LLstar as ``(f, q)`` in the second. ``f`` may be a callable
    ``f(x, y)`` or a CG1 :class:`FeFunction` on the same mesh.
    """
    p = build_pencil(spec) if pencil is None else pencil
    S, U = p.sigma_space, p.u_space
    rhs = np.zeros(p.dim)
    if p.formulation == "LLstar":
        rhs[p.n_sigma:] = _load_mass(U, f, degree)
    else:
        rhs[:p.n_sigma] = -_load_div(S, f, degree)
    z = p.solve_K(rhs)
    K = p.lhs()
    nrm = np.linalg.norm(rhs)
    res = float(np.linalg.norm(K @ z - rhs) / nrm) if nrm > 0 else 0.0
    return SourceSolution(FeFunction(S, z[:p.n_sigma]), FeFunction(U, z[p.n_sigma:]), res)


@dataclass(frozen=True)
class ExactMode:
    """Closed-form eigenmode: callables of ``(x, y)`` arrays."""

    lam: float
    u: object
    grad_u: object

    def sigma(self, x, y):
        return self.grad_u(x, y)

    def div_sigma(self, x, y):
        return -self.lam * self.u(x, y)


def square_mode(i: int = 1, j: int = 1) -> ExactMode:
    """L2-normalized Dirichlet mode ``2 sin(i pi x) sin(j pi y)`` of the unit square."""
    a, b = i * math.pi, j * math.pi
    return ExactMode(
        lam=a * a + b * b,
        u=lambda x, y: 2.0 * np.sin(a * x) * np.sin(b * y),
        grad_u=lambda x, y: np.stack([2.0 * a * np.cos(a * x) * np.sin(b * y),
                                      2.0 * b * np.sin(a * x) * np.cos(b * y)], axis=-1),
    )


@dataclass
class ErrorRecord:
    err_lambda: float
    err_u_L2: float
    err_gradu_L2: float
    err_sigma_L2: float
    err_divsigma_L2: float

    def as_dict(self):
        return dict(self.__dict__)


def _discrete_fields(pair, S: FeSpace | None, U: FeSpace):
    """Vertex-value representation of (u_h, grad u_h, sigma_h, div sigma_h).

    Fields that a discretization does not define come back as ``None``.
    """
    u_vals = U.vertex_values(pair.u)[..., 0]                     # (nt, 3)
    m = U.mesh
    G = m.barycentric_gradients()
    if U.family == "DG0":
        grad_u = None
    else:
        grad_u = np.einsum("tv,tvd->td", u_vals, G)
    if S is None or len(pair.sigma) == 0:
        sigma = grad_u[:, None, :].repeat(3, axis=1) if grad_u is not None else None
        div_sigma = None
    else:
        sigma = S.vertex_values(pair.sigma)
        div_sigma = np.einsum("tvc,tvc->t", sigma, G)
    if grad_u is None and sigma is not None:
        # the mixed baseline approximates grad u by its flux
        grad_u = sigma
    return u_vals, grad_u, sigma, div_sigma


def align_sign(u_vals, exact_u, m: Mesh, degree=6):
    """Sign (+1/-1) that makes the discrete u positively correlated with exact u."""
    from .quadrature import triangle_rule
    bary, _ = triangle_rule(degree)
    pts, w = quadrature_points(m, degree)
    uh = np.einsum("qv,tv->tq", bary, u_vals)
    ue = _call_field(exact_u, pts).reshape(m.nt, -1)
    return 1.0 if np.sum(uh * ue * w) >= 0 else -1.0


def compute_error_norms(pair, spaces, exact: ExactMode, degree: int = 6) -> ErrorRecord:
    """L2 errors of u, grad u, sigma, div sigma and the eigenvalue error.

    ``spaces`` is ``(sigma_space, u_space)``; eigenfunction signs are aligned
    with the exact mode before differencing. Quantities a discretization does
    not provide are reported as NaN.
    """
    from .quadrature import triangle_rule
    S, U = spaces
    m = U.mesh
    bary, _ = triangle_rule(degree)
    pts, w = quadrature_points(m, degree)
    u_vals, grad_u, sigma, div_sigma = _discrete_fields(pair, S, U)
    sgn = align_sign(u_vals, exact.u, m, degree)

    def l2(diff):
        return math.sqrt(float(np.sum(w * np.sum(np.atleast_3d(diff) ** 2, axis=2))))

    ue = _call_field(exact.u, pts).reshape(m.nt, -1)
    ge = _call_field(exact.grad_u, pts).reshape(m.nt, -1, 2)
    de = _call_field(exact.div_sigma, pts).reshape(m.nt, -1)
    uh = sgn * np.einsum("qv,tv->tq", bary, u_vals)
    e_u = l2(ue - uh)
    if grad_u is None:
        e_g = float("nan")
    elif grad_u.ndim == 2:
        e_g = l2(ge - sgn * grad_u[:, None, :])
    else:
        e_g = l2(ge - sgn * np.einsum("qv,tvd->tqd", bary, grad_u))
    if sigma is None:
        e_s = float("nan")
    else:
        e_s = l2(ge - sgn * np.einsum("qv,tvd->tqd", bary, sigma))
    e_d = float("nan") if div_sigma is None else l2(de - sgn * div_sigma[:, None])
    return ErrorRecord(abs(exact.lam - pair.lam), e_u, e_g, e_s, e_d)
