"""Blow-up of the generator at a well.

For f = -ln d the generator tends to (beta - beta0) <theta, A theta> and the
carre du champ to <theta, A theta> as the probe point approaches the well
along the direction theta.
"""
import numpy as np

from fraudsim import Well, apply_generator_fd, build_torus_landscape, carre_du_champ_fd
from fraudsim.sde import neg_log_distance

land = build_torus_landscape([Well([0, 0], [1, 4])])
f = neg_log_distance(land, 0)
theta = np.array([0.6, 0.8])
q = theta @ np.diag([1.0, 4.0]) @ theta
beta = 1.5
print(f"limits: generator {beta * q:.6f}, carre du champ {q:.6f}")
for rho in (1e-1, 1e-2, 1e-3, 1e-4):
    x, h = rho * theta, 3e-3 * rho
    print(f"rho = {rho:.0e}: {apply_generator_fd(land, beta, f, x, h):.9f}  {carre_du_champ_fd(land, beta, f, x, h):.9f}")
