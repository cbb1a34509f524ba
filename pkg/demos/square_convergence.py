"""
First eigenvalue of the unit square
===================================

The first Dirichlet eigenvalue of the unit square is 2 pi^2 with eigenfunction
sin(pi x) sin(pi y). We solve the F1 least-squares pencil with lowest-order
Raviart-Thomas fluxes on uniformly refined criss-cross meshes and watch the
eigenvalue converge at twice the rate of the eigenfunction.
"""

import math

from lseig import ExperimentConfig, run_apriori

# five uniform levels, h = 1/4 down to 1/64
table = run_apriori(ExperimentConfig("apriori", "f1", "rt0", "square", levels=5))

print(f"{'h':>8} {'lambda_1':>16} {'|error|':>10} {'||u-u_h||':>10} {'||div err||':>11}")
for h, lam, err_u, err_div in zip(table.column("h_max"), table.column("lambda_1"),
                                   table.column("err_u_L2"), table.column("err_divsigma_L2")):
    print(f"{h:8.5f} {lam:16.10f} {abs(lam - 2 * math.pi**2):10.3e} {err_u:10.3e} {err_div:11.3e}")

# the eigenvalue converges like h^2 while the flux and the gradient go like h
for name, rate in table.rates().items():
    print(f"rate {name:16s} {rate:6.3f}")

###############################################################################
# Swapping the flux space is a one-word change. BDM1 improves the flux
# error to second order, while continuous vector fluxes are not covered by the
# theory and are flagged as such.

for sigma in ("bdm1", "cg1vec"):
    t = run_apriori(ExperimentConfig("apriori", "f1", sigma, "square", levels=4))
    flag = " (uncovered by theory)" if t.uncovered_by_theory else ""
    print(f"{t.label}{flag}: sigma rate {t.rates()['err_sigma_L2']:.3f}")
