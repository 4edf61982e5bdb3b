"""Every global minimizer is selected with positive probability.

Two wells with different Hessians on the flat torus, beta above beta_vee.
Counts which well each path converges to and reports Wilson intervals.
"""
from fraudsim import SimParams, Well, beta_thresholds, build_torus_landscape, selection_stats, simulate_ensemble
from fraudsim.sde import uniform_torus_sampler

land = build_torus_landscape([Well([-1.5708, 0], [1, 1]), Well([1.5708, 0], [1, 2])], target_exact=True)
beta = beta_thresholds(land.achieved_spectra).beta_vee + 0.5
params = SimParams(beta=beta, dt=1e-3, horizon=60, record_stride=100, seed=11)
ens = simulate_ensemble(land, params, n_paths=200, x0_sampler=uniform_torus_sampler(land))
st = selection_stats(ens, land, confidence=0.95)

print(f"beta = {beta}")
for j in range(land.n_wells):
    lo, hi = st.intervals[j]
    print(f"well {j}: {st.counts[j]:3d} paths, frequency {st.freqs[j]:.3f}, 95% interval [{lo:.3f}, {hi:.3f}]")
print(f"unresolved {st.unresolved}, capped {st.capped}")
