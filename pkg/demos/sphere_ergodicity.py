"""The angular diffusion on the sphere samples mu_{A,beta}.

Time averages of <theta, A theta> along one long path are compared with
Lambda(A, beta) from quadrature.
"""
from fraudsim import SimParams, Spectrum, lambda_avg, simulate_sphere

A = Spectrum([1, 4])
for beta in (-0.5, 0.0, 1.5):
    params = SimParams(beta=beta, dt=1e-3, horizon=2000, record_stride=1000, seed=5)
    rec = simulate_sphere(A, beta, [2 ** -0.5, 2 ** -0.5], params)
    ref, _ = lambda_avg(A, beta)
    avg = rec.final_averages["psi"]
    print(f"beta = {beta:4.1f}: time average {avg:.4f}, Lambda {ref:.4f}, rel err {avg / ref - 1:+.4f}")
