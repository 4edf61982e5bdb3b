"""At beta = beta0 the path spends a growing share of time near the well.

Reports the fraction of time with U < 0.1 up to several horizons. The
distance floor is pushed far down so that paths are not declared converged.
"""
from fraudsim import SimParams, Well, build_torus_landscape, occupation_fraction, simulate_ensemble
from fraudsim.sde import uniform_torus_sampler

land = build_torus_landscape([Well([0, 0], [1, 1])])
params = SimParams(beta=0.0, dt=1e-3, horizon=2000, record_stride=100, seed=3, floor_distance=1e-140)
ens = simulate_ensemble(land, params, n_paths=4, x0_sampler=uniform_torus_sampler(land))
for until in (20, 200, 2000):
    fr = [occupation_fraction(p, 0.1, until=until) for p in ens.paths]
    print(f"t <= {until:5d}: fractions " + ", ".join(f"{f:.3f}" for f in fr))
