"""Residual a posteriori estimator, Dörfler marking and the adaptive loop.

For an F1 eigenpair ``(lam_h, sigma_h, u_h)`` the element indicator is

    eta_T^2 = h_T^2 ||div sigma_h - lap u_h||_T^2 + h_T^2 ||curl sigma_h||_T^2
              + sum_{e in dT} h_e (||[sigma_h . t]||_e^2 + ||[grad u_h . n]||_e^2)

with jumps taken over interior edges only. Each interior edge term is added in
full to both neighbouring triangles, exactly as the sum over ``e in dT`` reads.
All fluxes are piecewise linear, so the element terms are integrated exactly and
the 2-point Gauss rule on edges is exact for the squared linear jumps.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .eigsolve import solve_finite_spectrum
from .formulations import FormulationSpec, build_pencil
from .mesh import Mesh, mesh_metrics, refine_marked
from .quadrature import edge_rule, triangle_rule

__all__ = ["IndicatorField", "AdaptiveRecord", "estimate", "mark_dorfler", "adapt_loop"]

log = logging.getLogger(__name__)

SUPPORTED = ("RT0", "BDM1")


@dataclass
class IndicatorField:
    """Per-triangle indicators with the squared contributions kept apart.

    ``eigen_residual`` holds the optional diagnostic
    ``h_T^2 ||lam_h u_h + div sigma_h||_T^2``. It is not part of the estimator
    above and only enters ``eta_T`` when requested.
    """

    residual: np.ndarray
    curl: np.ndarray
    tangential_jump: np.ndarray
    normal_jump: np.ndarray
    eigen_residual: np.ndarray | None = None
    include_eigen_residual: bool = False

    @property
    def eta_T_squared(self) -> np.ndarray:
        total = self.residual + self.curl + self.tangential_jump + self.normal_jump
        if self.include_eigen_residual and self.eigen_residual is not None:
            total = total + self.eigen_residual
        return total

    @property
    def eta_T(self) -> np.ndarray:
        return np.sqrt(self.eta_T_squared)

    @property
    def eta(self) -> float:
        return float(np.sqrt(self.eta_T_squared.sum()))


def _edge_endpoint_values(m: Mesh, vals, side):
    """Values of a discontinuous P1 field at the two endpoints of every edge.

    ``vals`` is ``(nt, 3, ncomp)``; ``side`` selects the column of
    ``edge_tris``. Returns ``(ne, 2, ncomp)`` ordered as ``m.edges`` (low to
    high vertex), NaN where the edge has no triangle on that side.
    """
    ne = m.ne
    out = np.full((ne, 2, vals.shape[2]), np.nan)
    tris = m.edge_tris[:, side]
    ok = tris >= 0
    t = tris[ok]
    local = m.triangles[t]                               # (n, 3)
    for j in range(2):
        gv = m.edges[ok, j]
        idx = np.argmax(local == gv[:, None], axis=1)
        out[ok, j] = vals[t, idx]
    return out


def estimate(pair, spaces, include_eigen_residual: bool = False) -> IndicatorField:
    """Evaluate the element indicators of an F1 eigenpair.

    Parameters
    ----------
    pair : EigenPair
        Discrete eigenpair with free coefficients ``sigma`` and ``u``.
    spaces : tuple of FeSpace
        ``(Sigma_h, U_h)`` the pair lives in; ``Sigma_h`` must be RT0 or BDM1
        and ``U_h`` CG1.
    include_eigen_residual : bool
        Add the diagnostic ``h_T^2 ||lam_h u_h + div sigma_h||^2`` to
        ``eta_T``. Off by default.

    Raises
    ------
    ValueError
        For any other pair of families.
    """
    S, U = spaces
    if S.family not in SUPPORTED or U.family != "CG1":
        raise ValueError(f"estimator is defined for RT0/BDM1 with CG1, got {S.family}/{U.family}")
    m = S.mesh
    h_T, h_e, _ = mesh_metrics(m)
    area = m.areas

    sv = S.vertex_values(pair.sigma)                      # (nt, 3, 2)
    uv = U.vertex_values(pair.u)[..., 0]                  # (nt, 3)
    G = m.barycentric_gradients()
    div = np.einsum("tvc,tvc->t", sv, G)
    curl = np.einsum("tv,tv->t", sv[..., 1], G[..., 0]) - np.einsum("tv,tv->t", sv[..., 0], G[..., 1])
    grad_u = np.einsum("tv,tvd->td", uv, G)

    # lap u_h = 0 elementwise for P1, and div/curl of a P1 field are constant
    residual = h_T**2 * area * div**2
    curl_term = h_T**2 * area * curl**2

    interior = ~m.boundary_edges
    t0, t1 = m.edge_tris[:, 0], m.edge_tris[:, 1]
    s, w = edge_rule(2)
    a = _edge_endpoint_values(m, sv, 0)
    b = _edge_endpoint_values(m, sv, 1)
    jump_ends = np.einsum("ejc,ec->ej", a - b, m.edge_tangents)       # (ne, 2)
    jump_q = (1 - s)[None, :] * jump_ends[:, :1] + s[None, :] * jump_ends[:, 1:]
    tang = np.zeros(m.ne)
    tang[interior] = h_e[interior] * h_e[interior] * (jump_q[interior] ** 2 @ w)

    norm = np.zeros(m.ne)
    gj = np.einsum("ed,ed->e", grad_u[t0[interior]] - grad_u[t1[interior]], m.edge_normals[interior])
    norm[interior] = h_e[interior] * h_e[interior] * gj**2

    tang_T = np.zeros(m.nt)
    norm_T = np.zeros(m.nt)
    for side in (t0, t1):
        np.add.at(tang_T, side[interior], tang[interior])
        np.add.at(norm_T, side[interior], norm[interior])

    bary, qw = triangle_rule(2)
    r = pair.lam * (bary @ uv.T).T + div[:, None]          # (nt, nq)
    eig = h_T**2 * area * (r**2 @ qw)

    return IndicatorField(residual, curl_term, tang_T, norm_T, eig, include_eigen_residual)


def mark_dorfler(eta_T, theta: float) -> np.ndarray:
    """Minimal set of triangles carrying a ``theta`` share of ``sum eta_T^2``.

    Parameters
    ----------
    eta_T : array or IndicatorField
        Per-triangle indicators (not squared).
    theta : float
        Bulk parameter in ``(0, 1]``.

    Returns
    -------
    ndarray of int
        Sorted triangle ids. Triangles are taken greedily by decreasing
        indicator, ties by increasing id. With ``theta = 1`` every triangle
        with a positive indicator is marked.
    """
    if not 0.0 < theta <= 1.0:
        raise ValueError(f"theta must lie in (0, 1], got {theta}")
    if isinstance(eta_T, IndicatorField):
        eta_T = eta_T.eta_T
    e2 = np.asarray(eta_T, dtype=float) ** 2
    total = e2.sum()
    if total <= 0:
        return np.zeros(0, dtype=np.int64)
    if theta == 1.0:
        return np.flatnonzero(e2 > 0)
    order = np.argsort(-e2, kind="stable")
    csum = np.cumsum(e2[order])
    # relative slack so that e.g. 3 of 10 equal values reach 0.3 of the total
    count = int(np.searchsorted(csum, theta * total * (1 - 1e-12))) + 1
    return np.sort(order[:min(count, len(order))])


@dataclass
class AdaptiveRecord:
    iter: int
    ndof: int
    lambda1: float
    eta: float
    err_lambda: float
    mesh: Mesh = field(repr=False)
    indicators: IndicatorField = field(repr=False)

    def row(self):
        return (self.iter, self.ndof, self.lambda1, self.eta, self.err_lambda)


def adapt_loop(spec: FormulationSpec, theta: float, budget: int, ref_lambda: float | None = None,
               max_iter: int = 200):
    """SOLVE-ESTIMATE-MARK-REFINE for the first eigenvalue.

    Parameters
    ----------
    spec : FormulationSpec
        F1 with RT0 or BDM1 on the initial mesh.
    theta : float
        Dörfler parameter; ``1.0`` marks every triangle.
    budget : int
        Largest admissible ``dim Sigma_h + dim U_h``. The loop stops before
        solving on a mesh that exceeds it.
    ref_lambda : float, optional
        Reference eigenvalue for ``err_lambda`` (NaN otherwise).

    Returns
    -------
    list of AdaptiveRecord
    """
    if spec.tag != "F1":
        raise ValueError("the adaptive loop drives the F1 formulation")
    if not 0.0 < theta <= 1.0:
        raise ValueError(f"theta must lie in (0, 1], got {theta}")
    mesh = spec.mesh
    records = []
    for it in range(max_iter):
        cur = FormulationSpec("F1", spec.sigma_family, mesh)
        S, U = cur.sigma_space(), cur.u_space()
        ndof = S.nfree + U.nfree
        if ndof > budget:
            if it == 0:
                raise ValueError(f"initial mesh already has {ndof} dofs > budget {budget}")
            break
        p = build_pencil(cur)
        pair = solve_finite_spectrum(p, k=1)[0]
        ind = estimate(pair, (p.sigma_space, p.u_space))
        err = abs(ref_lambda - pair.lam) if ref_lambda is not None else float("nan")
        records.append(AdaptiveRecord(it, ndof, pair.lam, ind.eta, err, mesh, ind))
        log.info("theta=%g iter=%d ndof=%d lambda=%.10f eta=%.3e err=%.3e",
                 theta, it, ndof, pair.lam, ind.eta, err)
        marked = mark_dorfler(ind.eta_T, theta)
        if marked.size == 0:
            break
        mesh = refine_marked(mesh, marked)
    return records
