"""
Infinite and finite eigenvalues of the block pencils
====================================================

The least-squares pencils are degenerate: their right-hand side matrix is
singular, so a large part of the spectrum is infinite. Only the finite part
approximates the Laplace eigenvalues. On a tiny mesh we can see all of it
with a dense QZ solve.
"""

import numpy as np

from lseig import DomainSpec, FormulationSpec, build_initial_mesh, build_pencil, classify_families
from lseig.eigsolve import map_llstar_eigenvalue, solve_finite_spectrum

# the criss-cross square with n = 2: five interior vertices
mesh = build_initial_mesh(DomainSpec("unit-square", 2))

for tag in ("F1", "F1star", "LLstar"):
    p = build_pencil(FormulationSpec(tag, "RT0", mesh))
    rep = classify_families(p)
    print(f"{tag:7s} dim {p.dim:3d}  families {rep.counts}  detected infinite {rep.n_infinite_detected}")

###############################################################################
# F1 and F1* share their finite spectrum exactly. LL* computes a different
# quantity mu, which is turned into a Laplace eigenvalue by
# lambda = (mu + sqrt(mu^2 + 4 mu)) / 2.

n = classify_families(build_pencil(FormulationSpec("F1", "RT0", mesh))).n_finite
f1 = [q.value for q in solve_finite_spectrum(build_pencil(FormulationSpec("F1", "RT0", mesh)), n)]
f1s = [q.value for q in solve_finite_spectrum(build_pencil(FormulationSpec("F1star", "RT0", mesh)), n)]
ll = [q.value for q in solve_finite_spectrum(build_pencil(FormulationSpec("LLstar", "RT0", mesh)), 3)]
print("F1      ", np.round(f1, 8))
print("F1*     ", np.round(f1s, 8))
print("LL* mu  ", np.round(ll, 8))
print("LL* lam ", np.round(map_llstar_eigenvalue(np.array(ll)), 8))
