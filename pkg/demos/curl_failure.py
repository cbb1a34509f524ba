"""
Converging to the wrong eigenvalue on the L-shape
=================================================

On the L-shaped domain the first eigenfunction has an r^(2/3) singularity at
the re-entrant corner, so its gradient is not in H^1. If the flux is sought in
continuous vector fields with vanishing tangential trace, the discrete flux
space lies inside H(div) and H_0(curl) and cannot see that singularity. The
first eigenvalue then converges nicely, but to the wrong number.
"""

from lseig import ExperimentConfig, load_lshape_reference, run_curl_failure

ref = load_lshape_reference()
print("reference eigenvalues:", " ".join(f"{v:.8f}" for v in ref))

res = run_curl_failure(ExperimentConfig("curl-failure", "f1", "cg1vec", "lshape", levels=5))

print(f"{'h':>8} {'F1curl lambda_1':>16} {'F1/RT0 lambda_1':>16}")
for a, b in zip(res.curl_rows, res.control_rows):
    print(f"{a[1]:8.5f} {a[4]:16.8f} {b[4]:16.8f}")

###############################################################################
# The successive differences of the F1curl sequence shrink geometrically, so
# it looks converged, yet it stays far from the reference value. The
# H(div)-conforming control does not have this problem.

print("F1curl errors:", " ".join(f"{e:.3f}" for e in res.mode_errors(res.curl_rows)))
print("F1/RT0 errors:", " ".join(f"{e:.4f}" for e in res.mode_errors(res.control_rows)))
print("wrong-limit convergence detected:", res.wrong_limit)
