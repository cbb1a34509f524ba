"""Discrete spaces: CG1, CG1-vec, RT0, BDM1 (and DG0 for the mixed baseline).

Every basis function used here is a polynomial of degree at most one on each
triangle, so a local basis function is stored by its values at the three
vertices of the triangle (``local_values``, shape ``(nt, nloc, 3, ncomp)``).
Signs coming from edge orientation are folded into those values.

RT0 and BDM1 degrees of freedom are normal-trace moments taken with the
global edge normal and, for the linear moment, the global edge parameter
``s`` running from the lower to the higher vertex index:

    m0(tau) = 1/|e| int_e tau.n ds
    m1(tau) = 3/|e| int_e tau.n (2s - 1) ds

so that a linear normal trace reads ``tau.n = m0 + m1 (2s - 1)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import LOCAL_EDGES, Mesh
from .quadrature import edge_rule, triangle_rule

__all__ = ["FAMILIES", "FeSpace", "FeFunction", "build_space", "interpolate", "l2_norm"]

FAMILIES = ("CG1", "CG1-vec", "RT0", "BDM1", "DG0")
_ALIASES = {"cg1": "CG1", "p1": "CG1", "cg1vec": "CG1-vec", "cg1-vec": "CG1-vec",
            "rt0": "RT0", "bdm1": "BDM1", "dg0": "DG0", "p0": "DG0"}

# P1 mass matrix on a triangle divided by |T|
P1_MASS = (np.ones((3, 3)) + np.eye(3)) / 12.0


def canonical_family(family: str) -> str:
    if family in FAMILIES:
        return family
    try:
        return _ALIASES[family.lower()]
    except (KeyError, AttributeError):
        raise ValueError(f"unknown finite element family {family!r}") from None


class FeSpace:
    """Degree-of-freedom map for one discrete space on a mesh.

    Attributes
    ----------
    family : str
    mesh : Mesh
    ndof : int
        Number of global dofs before any constraint.
    dofmap : (nt, nloc) int array
    local_values : (nt, nloc, 3, ncomp) array
        Vertex values of each local basis function.
    constrained : (ndof,) bool array
        Dofs removed by essential boundary conditions.
    """

    def __init__(self, mesh: Mesh, family: str, dirichlet: bool | None = None,
                 tangential_bc: bool = False):
        family = canonical_family(family)
        self.family = family
        self.mesh = mesh
        m = mesh
        if dirichlet is None:
            dirichlet = family == "CG1"
        if family == "CG1":
            self.ncomp = 1
            self.ndof = m.nv
            self.dofmap = m.triangles.copy()
            lv = np.zeros((m.nt, 3, 3, 1))
            lv[:, np.arange(3), np.arange(3), 0] = 1.0
            self.local_values = lv
            self.constrained = m.boundary_vertices.copy() if dirichlet else np.zeros(m.nv, bool)
        elif family == "CG1-vec":
            self.ncomp = 2
            self.ndof = 2 * m.nv
            self.dofmap = np.concatenate([m.triangles, m.triangles + m.nv], axis=1)
            lv = np.zeros((m.nt, 6, 3, 2))
            for c in range(2):
                lv[:, 3 * c + np.arange(3), np.arange(3), c] = 1.0
            self.local_values = lv
            con = np.zeros(2 * m.nv, bool)
            if tangential_bc:
                con = _tangential_constraints(m)
            self.constrained = con
        elif family == "RT0":
            self.ncomp = 2
            self.ndof = m.ne
            self.dofmap = m.tri_edges.copy()
            p = m.vertices[m.triangles]                          # (nt, 3, 2)
            le = m.edge_lengths[m.tri_edges]                     # (nt, 3)
            scale = m.tri_edge_signs * le / (2.0 * m.areas[:, None])
            # phi_k(x) = s_k |e_k| / (2|T|) (x - p_k), evaluated at vertex j
            diff = p[:, None, :, :] - p[:, :, None, :]           # [t, k, j] = p_j - p_k
            self.local_values = scale[:, :, None, None] * diff
            self.constrained = np.zeros(m.ne, bool)
        elif family == "BDM1":
            self.ncomp = 2
            self.ndof = 2 * m.ne
            self.dofmap = np.concatenate([m.tri_edges, m.tri_edges + m.ne], axis=1)
            self.local_values = _bdm1_local_values(m)
            self.constrained = np.zeros(2 * m.ne, bool)
        elif family == "DG0":
            self.ncomp = 1
            self.ndof = m.nt
            self.dofmap = np.arange(m.nt)[:, None]
            self.local_values = np.ones((m.nt, 1, 3, 1))
            self.constrained = np.zeros(m.nt, bool)
        self.dofmap.flags.writeable = False
        self.local_values.flags.writeable = False
        self.free = np.flatnonzero(~self.constrained)
        self._full_to_free = np.full(self.ndof, -1, dtype=np.int64)
        self._full_to_free[self.free] = np.arange(len(self.free))

    @property
    def nfree(self) -> int:
        return len(self.free)

    @property
    def nloc(self) -> int:
        return self.dofmap.shape[1]

    @property
    def is_vector(self) -> bool:
        return self.ncomp == 2

    @property
    def signs(self):
        """Per-triangle orientation signs of the edge dofs (RT0/BDM1 only)."""
        if self.family == "RT0":
            return self.mesh.tri_edge_signs.copy()
        if self.family == "BDM1":
            s = self.mesh.tri_edge_signs
            return np.concatenate([s, np.ones_like(s)], axis=1)
        raise AttributeError(f"{self.family} has no orientation signs")

    def free_dofmap(self):
        """Local-to-free dof map, -1 where the dof is constrained."""
        return self._full_to_free[self.dofmap]

    def expand(self, coeffs):
        """Free coefficients -> full coefficient vector (zeros on constraints)."""
        coeffs = np.asarray(coeffs, dtype=float)
        full = np.zeros(self.ndof)
        full[self.free] = coeffs
        return full

    def vertex_values(self, coeffs):
        """Values of a discrete function at the vertices of every triangle.

        Returns an ``(nt, 3, ncomp)`` array (discontinuous storage).
        """
        full = self.expand(coeffs)
        return np.einsum("tl,tlvc->tvc", full[self.dofmap], self.local_values)

    # -- local derivatives -------------------------------------------------
    def local_gradients(self):
        """Gradients of scalar local basis functions, ``(nt, nloc, 2)``."""
        if self.is_vector:
            raise ValueError("gradient requested for a vector family")
        G = self.mesh.barycentric_gradients()
        return np.einsum("tlv,tvd->tld", self.local_values[..., 0], G)

    def local_divergence(self):
        """Divergence of each local basis function, ``(nt, nloc)``."""
        if not self.is_vector:
            raise ValueError("divergence requested for a scalar family")
        G = self.mesh.barycentric_gradients()
        return np.einsum("tlvc,tvc->tl", self.local_values, G)

    def local_curl(self):
        """Scalar curl d(tau_y)/dx - d(tau_x)/dy of each local basis function."""
        if not self.is_vector:
            raise ValueError("curl requested for a scalar family")
        G = self.mesh.barycentric_gradients()
        V = self.local_values
        return (np.einsum("tlv,tv->tl", V[..., 1], G[..., 0])
                - np.einsum("tlv,tv->tl", V[..., 0], G[..., 1]))

    def eval_basis(self, tri: int, point):
        """Evaluate the local basis of triangle ``tri`` at barycentric ``point``.

        Returns a dict with ``values`` (nloc, ncomp) and either ``grad``
        (nloc, 2) for scalar families or ``div`` and ``curl`` (nloc,) for
        vector families.
        """
        lam = np.asarray(point, dtype=float)
        if lam.shape == (2,):
            lam = np.array([1.0 - lam.sum(), lam[0], lam[1]])
        if lam.shape != (3,) or np.any(lam < -1e-12) or abs(lam.sum() - 1) > 1e-12:
            raise ValueError("point must be barycentric coordinates inside the triangle")
        V = self.local_values[tri]
        out = {"values": np.einsum("v,lvc->lc", lam, V)}
        G = self.mesh.barycentric_gradients()[tri]
        if self.is_vector:
            out["div"] = np.einsum("lvc,vc->l", V, G)
            out["curl"] = V[..., 1] @ G[:, 0] - V[..., 0] @ G[:, 1]
        else:
            out["grad"] = V[..., 0] @ G
        return out

    def __repr__(self):
        return f"FeSpace({self.family}, ndof={self.ndof}, free={self.nfree})"


def build_space(m: Mesh, family: str, **kw) -> FeSpace:
    return FeSpace(m, family, **kw)


def _tangential_constraints(m: Mesh):
    """Zero tangential component on an axis-aligned boundary.

    On horizontal boundary edges the x-component vanishes, on vertical ones
    the y-component; corner vertices lose both.
    """
    con = np.zeros(2 * m.nv, bool)
    be = m.edges[m.boundary_edges]
    t = m.edge_tangents[m.boundary_edges]
    if not np.all((np.abs(t[:, 0]) < 1e-12) | (np.abs(t[:, 1]) < 1e-12)):
        raise ValueError("tangential constraints need an axis-aligned boundary")
    horiz = np.abs(t[:, 1]) < 1e-12
    con[be[horiz].ravel()] = True
    con[m.nv + be[~horiz].ravel()] = True
    return con


def _bdm1_local_values(m: Mesh):
    """Vertex values of the BDM1 basis dual to the edge moments."""
    nt = m.nt
    normals = m.edge_normals[m.tri_edges]                       # (nt, 3, 2)
    # on local edge k the barycentrics of its endpoints are (1 - s, s) in the
    # global parametrisation; s runs from the lower to the higher vertex index
    tloc = m.triangles[:, LOCAL_EDGES]                          # (nt, 3, 2)
    forward = tloc[:, :, 0] < tloc[:, :, 1]
    lo_local = np.where(forward, LOCAL_EDGES[None, :, 0], LOCAL_EDGES[None, :, 1])
    hi_local = np.where(forward, LOCAL_EDGES[None, :, 1], LOCAL_EDGES[None, :, 0])
    # moments of (1 - s) and s against 1 and 3(2s - 1), divided by |e|
    mom = np.array([[0.5, 0.5], [-0.5, 0.5]])                   # [moment, endpoint lo/hi]
    G = np.zeros((nt, 6, 6))                                    # [dof(m,k), psi(i,c)]
    tt = np.arange(nt)
    for k in range(3):
        for mm in range(2):
            row = 3 * mm + k
            for end, loc in ((0, lo_local[:, k]), (1, hi_local[:, k])):
                for c in range(2):
                    G[tt, row, 3 * c + loc] += mom[mm, end] * normals[:, k, c]
    Ginv = np.linalg.inv(G)                                     # columns: dual basis in psi coords
    lv = np.zeros((nt, 6, 3, 2))
    for c in range(2):
        lv[:, :, :, c] = np.transpose(Ginv[:, 3 * c:3 * c + 3, :], (0, 2, 1))
    return lv


@dataclass
class FeFunction:
    """A discrete function: a space plus coefficients on its free dofs."""

    space: FeSpace
    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        if self.coeffs.shape != (self.space.nfree,):
            raise ValueError(f"expected {self.space.nfree} coefficients, got {self.coeffs.shape}")

    def vertex_values(self):
        return self.space.vertex_values(self.coeffs)

    def at_quadrature(self, degree=4):
        """Values at the points of ``triangle_rule(degree)``: ``(nt, nq, ncomp)``."""
        bary, _ = triangle_rule(degree)
        return np.einsum("qv,tvc->tqc", bary, self.vertex_values())

    def gradient(self):
        """Elementwise constant gradient of a scalar function, ``(nt, 2)``."""
        G = self.space.mesh.barycentric_gradients()
        return np.einsum("tv,tvd->td", self.vertex_values()[..., 0], G)

    def divergence(self):
        G = self.space.mesh.barycentric_gradients()
        return np.einsum("tvc,tvc->t", self.vertex_values(), G)

    def curl(self):
        G = self.space.mesh.barycentric_gradients()
        V = self.vertex_values()
        return np.einsum("tv,tv->t", V[..., 1], G[..., 0]) - np.einsum("tv,tv->t", V[..., 0], G[..., 1])

    def __add__(self, other):
        return FeFunction(self.space, self.coeffs + other.coeffs)

    def __sub__(self, other):
        return FeFunction(self.space, self.coeffs - other.coeffs)

    def __mul__(self, a):
        return FeFunction(self.space, a * self.coeffs)

    __rmul__ = __mul__


def quadrature_points(m: Mesh, degree):
    """Physical quadrature points ``(nt, nq, 2)`` and weights ``(nt, nq)``."""
    bary, w = triangle_rule(degree)
    pts = np.einsum("qv,tvd->tqd", bary, m.vertices[m.triangles])
    return pts, m.areas[:, None] * w[None, :]


def _call_field(f, pts):
    """Evaluate a callable on an ``(..., 2)`` point array."""
    shape = pts.shape[:-1]
    flat = pts.reshape(-1, 2)
    val = np.asarray(f(flat[:, 0], flat[:, 1]), dtype=float)
    if val.ndim == 0:
        val = np.full(flat.shape[0], float(val))
    if val.shape[0] == 2 and val.ndim == 2 and val.shape[1] == flat.shape[0]:
        val = val.T
    elif val.ndim == 1 and val.shape[0] == 2 and flat.shape[0] != 2:
        val = np.broadcast_to(val, (flat.shape[0], 2))
    return val.reshape(shape + val.shape[1:])


def interpolate(space: FeSpace, f, edge_points=4) -> FeFunction:
    """Canonical interpolant of a callable ``f(x, y)``.

    Vertex values for CG1/CG1-vec, edge normal moments for RT0/BDM1 and
    element means for DG0. Vector fields may return ``(2, n)`` or ``(n, 2)``.
    Constrained dofs are dropped.
    """
    m = space.mesh
    fam = space.family
    if fam == "CG1":
        full = _call_field(f, m.vertices).reshape(-1)
    elif fam == "CG1-vec":
        v = _call_field(f, m.vertices).reshape(m.nv, 2)
        full = np.concatenate([v[:, 0], v[:, 1]])
    elif fam in ("RT0", "BDM1"):
        s, w = edge_rule(edge_points)
        a = m.vertices[m.edges[:, 0]]
        b = m.vertices[m.edges[:, 1]]
        pts = a[:, None, :] + s[None, :, None] * (b - a)[:, None, :]
        vals = _call_field(f, pts).reshape(m.ne, len(s), 2)
        fn = np.einsum("eqc,ec->eq", vals, m.edge_normals)
        m0 = fn @ w
        if fam == "RT0":
            full = m0
        else:
            m1 = fn @ (3.0 * w * (2.0 * s - 1.0))
            full = np.concatenate([m0, m1])
    elif fam == "DG0":
        pts, wq = quadrature_points(m, 4)
        full = (_call_field(f, pts).reshape(m.nt, -1) * wq).sum(axis=1) / m.areas
    return FeFunction(space, full[space.free])


def l2_norm(func: FeFunction, degree=2) -> float:
    """Exact L2 norm of a discrete function (piecewise P1 or P0)."""
    V = func.vertex_values()
    areas = func.space.mesh.areas
    return float(np.sqrt(np.einsum("t,ij,tic,tjc->", areas, P1_MASS, V, V)))
