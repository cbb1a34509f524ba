"""Reference eigenvalues for the L-shaped domain.

The values are produced by a conforming P1 discretization on a sequence of
uniformly refined meshes followed by Richardson extrapolation. The re-entrant
corner of angle 3*pi/2 makes the eigenfunctions behave like r^(2/3), so the
eigenvalue error expands in powers h^(2k/3), k >= 2; the extrapolated value is
the constant term of a least-squares fit in those powers. The observed leading
exponent (Aitken's delta-squared estimate from the last three levels) is kept
as a sanity check. The output is cached in ``refdata/lshape.json`` inside the
package.
"""
from __future__ import annotations

import datetime
import json
import math
import time
from importlib import resources
from pathlib import Path

import numpy as np
import scipy.sparse.linalg as spla

from .assembly import assemble
from .fespace import build_space
from .mesh import DomainSpec, build_initial_mesh, refine_uniform

__all__ = ["p1_eigenvalues", "richardson", "richardson_fit", "lshape_oracle", "load_lshape_reference", "write_reference"]

REFDATA_NAME = "lshape.json"
EXPONENTS = (4 / 3, 2.0, 8 / 3, 10 / 3)


def p1_eigenvalues(mesh, k=5):
    """The ``k`` smallest Dirichlet eigenvalues of conforming P1 on ``mesh``."""
    U = build_space(mesh, "CG1")
    C = assemble("stiffness", U).tocsc()
    M = assemble("mass_u", U).tocsc()
    v0 = np.random.default_rng(7).standard_normal(U.nfree)
    vals = spla.eigsh(C, k=k, M=M, sigma=0.0, which="LM", v0=v0, tol=1e-14,
                      return_eigenvectors=False)
    return np.sort(vals)


def richardson(seq):
    """Extrapolated limit and estimated rate from the last three terms.

    ``seq`` holds values on meshes with ``h`` halved at each step. Returns
    ``(limit, exponent)``; the exponent is the order in ``h``.
    """
    a, b, c = (float(s) for s in seq[-3:])
    d1, d2 = b - a, c - b
    if d2 == 0 or d1 == 0 or d1 * d2 < 0:
        return c, float("nan")
    ratio = d1 / d2
    p = math.log2(ratio)
    return c + d2 / (ratio - 1.0), p


def richardson_fit(h, seq, exponents=EXPONENTS):
    """Constant term of ``seq ~ lam + sum_k c_k h^p_k`` by least squares."""
    h = np.asarray(h, dtype=float)
    seq = np.asarray(seq, dtype=float)
    if len(h) < len(exponents) + 1:
        raise ValueError(f"need at least {len(exponents) + 1} levels, got {len(h)}")
    A = np.column_stack([np.ones_like(h)] + [h**p for p in exponents])
    return float(np.linalg.lstsq(A, seq, rcond=None)[0][0])


def lshape_oracle(levels=(4, 5, 6, 7, 8), k=5, n=1, verbose=False):
    """Run the P1 sequence and extrapolate; returns a JSON-ready dict."""
    mesh = build_initial_mesh(DomainSpec("l-shape", n))
    seq, hs, ndofs = [], [], []
    start = time.time()
    for lev in range(max(levels) + 1):
        if lev in levels:
            t = time.time()
            vals = p1_eigenvalues(mesh, k)
            seq.append(vals)
            hs.append(mesh.h_max())
            ndofs.append(int((~mesh.boundary_vertices).sum()))
            if verbose:
                print(f"level {lev}: h={mesh.h_max():.5g} ndof={ndofs[-1]} "
                      f"lam={np.array2string(vals, precision=8)} ({time.time() - t:.1f}s)")
        if lev < max(levels):
            mesh = refine_uniform(mesh)
    seq = np.array(seq)
    limits = [richardson_fit(hs, seq[:, j]) for j in range(k)]
    rates = [richardson(seq[:, j])[1] for j in range(k)]
    return {
        "domain": "(-1,1)^2 minus [0,1]x[-1,0], Dirichlet",
        "method": "conforming P1 on uniformly refined criss-cross meshes, "
                  "Richardson extrapolation by least squares in powers of h",
        "exponents": list(EXPONENTS),
        "generated": datetime.date.today().isoformat(),
        "runtime_s": round(time.time() - start, 1),
        "h": hs,
        "ndof": ndofs,
        "p1_values": seq.tolist(),
        "estimated_rates": rates,
        "eigenvalues": limits,
    }


def write_reference(out_dir, **kw):
    data = lshape_oracle(**kw)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / REFDATA_NAME
    path.write_text(json.dumps(data, indent=2) + "\n")
    return path, data


def load_lshape_reference(path=None):
    """Reference L-shape eigenvalues ``lam_1..lam_5`` as a numpy array."""
    if path is None:
        text = resources.files("lseig").joinpath("refdata", REFDATA_NAME).read_text()
    else:
        text = Path(path).read_text()
    return np.array(json.loads(text)["eigenvalues"])
