"""Conforming triangular meshes of the unit square and the L-shaped domain.

Triangles are stored counterclockwise. The vertex order also carries the
bisection label: local edge ``k`` joins local vertices ``k+1`` and ``k+2``
(mod 3), and the refinement edge of every triangle is local edge 2, i.e. the
edge ``(v0, v1)`` opposite the newest vertex ``v2``.

Edges are stored with their lower vertex index first; the global tangent
points from the lower to the higher index and the global normal is that
tangent rotated clockwise.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "DomainSpec",
    "Mesh",
    "build_initial_mesh",
    "refine_uniform",
    "refine_marked",
    "mesh_metrics",
    "check_conformity",
    "dump_mesh",
    "load_mesh",
]

# local edge k = (LOCAL_EDGES[k, 0], LOCAL_EDGES[k, 1])
LOCAL_EDGES = np.array([[1, 2], [2, 0], [0, 1]])


@dataclass(frozen=True)
class DomainSpec:
    """Domain kind plus the number of unit cells per unit length.

    ``kind`` is ``"unit-square"`` for (0,1)^2 or ``"l-shape"`` for
    (-1,1)^2 minus [0,1]x[-1,0]. ``pattern`` selects how each cell is split:
    ``"criss-cross"`` (four triangles around the cell centre) or
    ``"two-triangle"`` (one diagonal).
    """

    kind: str = "unit-square"
    n: int = 1
    pattern: str = "criss-cross"

    def __post_init__(self):
        if self.kind not in ("unit-square", "l-shape"):
            raise ValueError(f"unknown domain kind {self.kind!r}")
        if self.pattern not in ("criss-cross", "two-triangle"):
            raise ValueError(f"unknown pattern {self.pattern!r}")
        if isinstance(self.n, bool) or int(self.n) != self.n or self.n < 1:
            raise ValueError(f"subdivision count must be a positive integer, got {self.n!r}")

    @property
    def area(self) -> float:
        return 1.0 if self.kind == "unit-square" else 3.0

    @property
    def perimeter(self) -> float:
        return 4.0 if self.kind == "unit-square" else 8.0

    def cells(self):
        """Lower-left corners of the unit cells making up the domain."""
        if self.kind == "unit-square":
            return [(0.0, 0.0)]
        return [(-1.0, -1.0), (-1.0, 0.0), (0.0, 0.0)]

    def on_boundary(self, pts, tol=1e-12):
        """Boolean mask of points lying on the domain boundary."""
        x, y = np.asarray(pts, dtype=float).T
        if self.kind == "unit-square":
            return (np.abs(x) < tol) | (np.abs(x - 1) < tol) | (np.abs(y) < tol) | (np.abs(y - 1) < tol)
        outer = (np.abs(x + 1) < tol) | (np.abs(x - 1) < tol) | (np.abs(y + 1) < tol) | (np.abs(y - 1) < tol)
        notch_h = (np.abs(y) < tol) & (x > -tol)
        notch_v = (np.abs(x) < tol) & (y < tol)
        return outer | notch_h | notch_v


class Mesh:
    """Immutable conforming triangulation with edge connectivity.

    Parameters
    ----------
    vertices : (nv, 2) array
    triangles : (nt, 3) int array, counterclockwise, labelled for bisection
    domain : DomainSpec, optional
        Used by the conformity audit to tell boundary edges from holes.
    parent : (nt,) int array, optional
        Index of the parent triangle in the mesh this one was refined from
        (-1 for an initial mesh).
    """

    def __init__(self, vertices, triangles, domain=None, parent=None):
        self.vertices = np.ascontiguousarray(vertices, dtype=float)
        self.triangles = np.ascontiguousarray(triangles, dtype=np.int64)
        self.domain = domain
        nt = len(self.triangles)
        self.parent = (np.full(nt, -1, dtype=np.int64) if parent is None
                       else np.asarray(parent, dtype=np.int64))
        for arr in (self.vertices, self.triangles, self.parent):
            arr.flags.writeable = False
        self._build_connectivity()

    def _build_connectivity(self):
        t = self.triangles
        nt = len(t)
        loc = t[:, LOCAL_EDGES]                      # (nt, 3, 2)
        lo = loc.min(axis=2).ravel()
        hi = loc.max(axis=2).ravel()
        key = lo * len(self.vertices) + hi
        uniq, inv = np.unique(key, return_inverse=True)
        nv = len(self.vertices)
        self.edges = np.stack([uniq // nv, uniq % nv], axis=1)
        self.tri_edges = inv.reshape(nt, 3)
        # +1 when the counterclockwise traversal agrees with the global tangent,
        # i.e. when the global normal is outward for this triangle
        self.tri_edge_signs = np.where(loc[:, :, 0] < loc[:, :, 1], 1, -1)

        ne = len(self.edges)
        edge_tris = np.full((ne, 2), -1, dtype=np.int64)
        edge_local = np.full((ne, 2), -1, dtype=np.int64)
        flat_e = self.tri_edges.ravel()
        flat_t = np.repeat(np.arange(nt), 3)
        flat_k = np.tile(np.arange(3), nt)
        order = np.argsort(flat_e, kind="stable")
        fe, ft, fk = flat_e[order], flat_t[order], flat_k[order]
        first = np.ones(len(fe), dtype=bool)
        first[1:] = fe[1:] != fe[:-1]
        slot = np.where(first, 0, 1)
        counts = np.bincount(fe, minlength=ne)
        if counts.max(initial=0) > 2:
            raise ValueError("edge shared by more than two triangles")
        edge_tris[fe, slot] = ft
        edge_local[fe, slot] = fk
        self.edge_tris = edge_tris
        self.edge_local = edge_local
        self.boundary_edges = edge_tris[:, 1] < 0
        bv = np.zeros(nv, dtype=bool)
        bv[self.edges[self.boundary_edges].ravel()] = True
        self.boundary_vertices = bv
        for arr in (self.edges, self.tri_edges, self.tri_edge_signs, self.edge_tris,
                    self.edge_local, self.boundary_edges, self.boundary_vertices):
            arr.flags.writeable = False

    # -- sizes -------------------------------------------------------------
    @property
    def nv(self) -> int:
        return len(self.vertices)

    @property
    def nt(self) -> int:
        return len(self.triangles)

    @property
    def ne(self) -> int:
        return len(self.edges)

    @property
    def refinement_edges(self):
        """Global index of each triangle's refinement edge."""
        return self.tri_edges[:, 2]

    # -- geometry ----------------------------------------------------------
    @property
    def signed_areas(self):
        p = self.vertices[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    @property
    def areas(self):
        return np.abs(self.signed_areas)

    @property
    def edge_lengths(self):
        d = self.vertices[self.edges[:, 1]] - self.vertices[self.edges[:, 0]]
        return np.hypot(d[:, 0], d[:, 1])

    @property
    def edge_tangents(self):
        """Unit tangents pointing from the lower to the higher vertex index."""
        d = self.vertices[self.edges[:, 1]] - self.vertices[self.edges[:, 0]]
        return d / np.hypot(d[:, 0], d[:, 1])[:, None]

    @property
    def edge_normals(self):
        """Unit global normals (tangent rotated clockwise)."""
        t = self.edge_tangents
        return np.stack([t[:, 1], -t[:, 0]], axis=1)

    def barycentric_gradients(self):
        """Gradients of the three barycentric coordinates, shape (nt, 3, 2)."""
        p = self.vertices[self.triangles]
        two_area = 2.0 * self.signed_areas
        # grad(lambda_i) = rot(p_{i+2} - p_{i+1}) / (2|T|), rot(a, b) = (b, -a)
        d = p[:, [2, 0, 1]] - p[:, [1, 2, 0]]
        g = np.stack([-d[:, :, 1], d[:, :, 0]], axis=2)
        return g / two_area[:, None, None]

    def h_max(self) -> float:
        return float(self.edge_lengths.max())

    def __repr__(self):
        return f"Mesh(nv={self.nv}, nt={self.nt}, ne={self.ne})"


def build_initial_mesh(spec: DomainSpec) -> Mesh:
    """Structured mesh of ``spec.n`` x ``spec.n`` cells per unit square.

    Every triangle is right isosceles with its hypotenuse as refinement edge.
    """
    n = int(spec.n)
    h = 1.0 / n
    quads = []
    for (x0, y0) in spec.cells():
        for i in range(n):
            for j in range(n):
                quads.append((x0 + i * h, y0 + j * h))
    quads = np.array(quads)

    # integer lattice on a half-step grid so cell centres are representable
    def key(p):
        return np.rint(np.asarray(p) * 2 * n).astype(np.int64)

    corners = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], dtype=float) * h
    pts = (quads[:, None, :] + corners[None]).reshape(-1, 2)
    if spec.pattern == "criss-cross":
        centres = quads + 0.5 * h
        pts = np.vstack([pts, centres])
    keys = key(pts)
    _, first, inv = np.unique(keys[:, 0] * (1 << 32) + keys[:, 1], return_index=True, return_inverse=True)
    order = np.argsort(first)
    rank = np.empty_like(order)
    rank[order] = np.arange(len(order))
    vertices = pts[first[order]]
    idx = rank[inv]

    nq = len(quads)
    c = idx[: 4 * nq].reshape(nq, 4)
    if spec.pattern == "criss-cross":
        m = idx[4 * nq:]
        tris = np.concatenate([
            np.stack([c[:, 0], c[:, 1], m], axis=1),
            np.stack([c[:, 1], c[:, 2], m], axis=1),
            np.stack([c[:, 2], c[:, 3], m], axis=1),
            np.stack([c[:, 3], c[:, 0], m], axis=1),
        ])
        tris = tris.reshape(4, nq, 3).transpose(1, 0, 2).reshape(-1, 3)
    else:
        tris = np.stack([
            np.stack([c[:, 2], c[:, 0], c[:, 1]], axis=1),
            np.stack([c[:, 0], c[:, 2], c[:, 3]], axis=1),
        ], axis=1).reshape(-1, 3)
    return Mesh(vertices, tris, domain=spec)


def refine_uniform(m: Mesh) -> Mesh:
    """Red refinement: every triangle into four similar children.

    Each child inherits the refinement edge that corresponds to the parent's
    under the similarity map.
    """
    t = m.triangles
    mid = m.nv + m.tri_edges           # midpoint of local edge k, opposite vertex k
    verts = np.vstack([m.vertices, 0.5 * (m.vertices[m.edges[:, 0]] + m.vertices[m.edges[:, 1]])])
    v0, v1, v2 = t.T
    m0, m1, m2 = mid.T
    children = np.stack([
        np.stack([v0, m2, m1], axis=1),
        np.stack([m2, v1, m0], axis=1),
        np.stack([m1, m0, v2], axis=1),
        np.stack([m0, m1, m2], axis=1),
    ], axis=1).reshape(-1, 3)
    parent = np.repeat(np.arange(m.nt), 4)
    return Mesh(verts, children, domain=m.domain, parent=parent)


def _closure(m: Mesh, marked_edges):
    em = marked_edges.copy()
    while True:
        tm = em[m.tri_edges]
        need = tm.any(axis=1) & ~tm[:, 2]
        if not need.any():
            return em
        em[m.tri_edges[need, 2]] = True


def refine_marked(m: Mesh, marked) -> Mesh:
    """Newest-vertex bisection of the marked triangles plus conforming closure.

    Parameters
    ----------
    m : Mesh
    marked : iterable of int or boolean mask
        Triangles to refine.

    Returns
    -------
    Mesh
        A new conforming mesh; ``parent`` maps children to triangles of ``m``.
        An empty marking returns ``m`` itself.
    """
    marked = np.asarray(marked)
    if marked.dtype == bool:
        ids = np.flatnonzero(marked)
    else:
        ids = np.unique(marked.astype(np.int64))
    if ids.size == 0:
        return m
    if ids.min() < 0 or ids.max() >= m.nt:
        raise IndexError("marked triangle id out of range")

    em = np.zeros(m.ne, dtype=bool)
    em[m.tri_edges[ids, 2]] = True
    em = _closure(m, em)

    new_index = np.full(m.ne, -1, dtype=np.int64)
    new_index[em] = m.nv + np.arange(em.sum())
    e = m.edges[em]
    verts = np.vstack([m.vertices, 0.5 * (m.vertices[e[:, 0]] + m.vertices[e[:, 1]])])

    t = m.triangles
    tm = em[m.tri_edges]
    mid = new_index[m.tri_edges]
    v0, v1, v2 = t.T
    m0, m1, m2 = mid.T
    out, par = [], []

    keep = ~tm[:, 2]
    out.append(t[keep])
    par.append(np.flatnonzero(keep))

    bis = tm[:, 2]
    # first bisection: (v2, v0, m2) with refinement edge v2v0 = old e1,
    # and (v1, v2, m2) with refinement edge v1v2 = old e0
    left_plain = bis & ~tm[:, 1]
    left_split = bis & tm[:, 1]
    right_plain = bis & ~tm[:, 0]
    right_split = bis & tm[:, 0]

    sel = np.flatnonzero(left_plain)
    out.append(np.stack([v2[sel], v0[sel], m2[sel]], axis=1))
    par.append(sel)
    sel = np.flatnonzero(left_split)
    out.append(np.stack([m2[sel], v2[sel], m1[sel]], axis=1))
    par.append(sel)
    out.append(np.stack([v0[sel], m2[sel], m1[sel]], axis=1))
    par.append(sel)

    sel = np.flatnonzero(right_plain)
    out.append(np.stack([v1[sel], v2[sel], m2[sel]], axis=1))
    par.append(sel)
    sel = np.flatnonzero(right_split)
    out.append(np.stack([m2[sel], v1[sel], m0[sel]], axis=1))
    par.append(sel)
    out.append(np.stack([v2[sel], m2[sel], m0[sel]], axis=1))
    par.append(sel)

    tris = np.concatenate(out)
    parent = np.concatenate(par)
    order = np.argsort(parent, kind="stable")
    return Mesh(verts, tris[order], domain=m.domain, parent=parent[order])


def mesh_metrics(m: Mesh):
    """Element diameters, edge lengths and the shape-regularity ratio.

    Returns
    -------
    h_T : (nt,) array
        Triangle diameters (longest edge).
    h_e : (ne,) array
        Edge lengths.
    ratio : float
        max over T of h_T / (2 * inradius).
    """
    h_e = m.edge_lengths
    le = h_e[m.tri_edges]
    h_T = le.max(axis=1)
    inradius = 2.0 * m.areas / le.sum(axis=1)
    ratio = float(np.max(h_T / (2.0 * inradius)))
    return h_T, h_e, ratio


def check_conformity(m: Mesh, tol=1e-12):
    """Audit the mesh invariants; returns a list of violations (empty if fine)."""
    problems = []
    if np.any(m.signed_areas <= 0):
        problems.append(f"{int(np.sum(m.signed_areas <= 0))} triangles not counterclockwise")
    counts = (m.edge_tris >= 0).sum(axis=1)
    if np.any(counts == 0):
        problems.append("edge without triangles")
    if np.any(m.edges[:, 0] >= m.edges[:, 1]):
        problems.append("edge not oriented low -> high")
    used = np.zeros(m.nv, dtype=bool)
    used[m.triangles.ravel()] = True
    if not used.all():
        problems.append(f"{int((~used).sum())} vertices not used by any triangle")
    bmid = 0.5 * (m.vertices[m.edges[m.boundary_edges, 0]] + m.vertices[m.edges[m.boundary_edges, 1]])
    if m.domain is not None:
        inside = ~m.domain.on_boundary(bmid, tol=1e-10)
        if inside.any():
            problems.append(f"{int(inside.sum())} single-sided edges in the interior (hanging vertices)")
        if abs(m.areas.sum() - m.domain.area) > 1e-13 * max(1.0, m.domain.area) * 10:
            problems.append("triangle areas do not sum to the domain area")
        blen = m.edge_lengths[m.boundary_edges].sum()
        if abs(blen - m.domain.perimeter) > 1e-10:
            problems.append("boundary length differs from the domain perimeter")
    else:
        # without a domain we can still catch hanging vertices on single-sided edges
        bv = m.vertices[np.unique(m.edges[m.boundary_edges].ravel())]
        be = m.edges[m.boundary_edges]
        a = m.vertices[be[:, 0]]
        b = m.vertices[be[:, 1]]
        for p in bv:
            d = b - a
            s = np.einsum("ij,ij->i", p - a, d) / np.einsum("ij,ij->i", d, d)
            cross = d[:, 0] * (p - a)[:, 1] - d[:, 1] * (p - a)[:, 0]
            hit = (s > tol) & (s < 1 - tol) & (np.abs(cross) < tol)
            if hit.any():
                problems.append("vertex lying inside a single-sided edge")
                break
    return problems


def dump_mesh(m: Mesh, path):
    """Write the ASCII mesh dump: header ``ntri nvert nedge`` then the arrays."""
    with open(path, "w") as fh:
        fh.write(f"{m.nt} {m.nv} {m.ne}\n")
        for x, y in m.vertices:
            fh.write(f"{x:.17g} {y:.17g}\n")
        for a, b, c in m.triangles:
            fh.write(f"{a} {b} {c}\n")
        for a, b in m.edges:
            fh.write(f"{a} {b}\n")


def load_mesh(path, domain=None) -> Mesh:
    with open(path) as fh:
        nt, nv, ne = (int(s) for s in fh.readline().split())
        data = fh.read().split("\n")
    verts = np.array([[float(s) for s in line.split()] for line in data[:nv]])
    tris = np.array([[int(s) for s in line.split()] for line in data[nv:nv + nt]], dtype=np.int64)
    m = Mesh(verts, tris, domain=domain)
    if m.ne != ne:
        raise ValueError("edge count in dump does not match the triangles")
    return m
