"""Capture-rate constants of a single well.

Near a global minimizer with Hessian A the log-distance decays like
-Lambda(A, beta) (beta - beta0) t. This prints Lambda across beta for an
anisotropic well, the three beta thresholds of a two-well landscape, and
how Lambda slides toward the small eigenvalue as the dimension grows.
"""
from fraudsim import Spectrum, beta_thresholds, lambda_avg, two_point_lambda_scan

A = Spectrum([1, 4])
print("Lambda(diag(1,4), beta), between lambda_min = 1 and lambda_max = 4")
for beta in (-0.5, 0.0, 1.0, 2.0, 5.0):
    val, _ = lambda_avg(A, beta)
    print(f"  beta = {beta:4.1f}: {val:.6f}")

th = beta_thresholds([Spectrum([1, 1]), Spectrum([1, 2])])
print(f"\nwells (1,1) and (1,2): beta_wedge = {th.beta_wedge}, beta0 = {th.beta_zero}, beta_vee = {th.beta_vee}")

print("\ntwo-point spectrum (1, ..., 1, 2) at beta = 1")
for row in two_point_lambda_scan(1, 2, 1.0, [2, 5, 10, 20, 50], budget=400_000, seed=3):
    print(f"  m = {row.m:2d}: {row.value:.4f} +- {row.stderr:.4f} ({row.method})")
