import math

import numpy as np
import pytest

from fraudsim._rng import derive_seed, make_rng
from fraudsim.analysis import lyapunov_rate
from fraudsim.errors import DimensionError
from fraudsim.landscape import Well, build_euclidean_landscape, build_torus_landscape
from fraudsim.sde import (
    CONVERGED,
    SimParams,
    _draw,
    apply_generator_fd,
    carre_du_champ_fd,
    ensemble_summary,
    neg_log_distance,
    simulate_ensemble,
    simulate_path,
    simulate_sphere,
    uniform_torus_sampler,
    write_path_csv,
)
from fraudsim.spectral import Spectrum

TORUS = build_torus_landscape([Well([0, 0], [1, 1])])
BOWL = build_euclidean_landscape([Well([0, 0], [2, 2])], beta_range=(0.5, 3.0))


def test_params_validation():
    with pytest.raises(ValueError):
        SimParams(beta=1, dt=0, horizon=1)
    with pytest.raises(ValueError):
        SimParams(beta=1, dt=1e-3, horizon=1e-3)
    with pytest.raises(ValueError):
        SimParams(beta=1, dt=1e-3, horizon=1, record_stride=0)
    with pytest.raises(ValueError):
        SimParams(beta=1, dt=1e-3, horizon=1, floor_distance=0)


def test_start_at_well_rejected():
    with pytest.raises(ValueError):
        simulate_path(TORUS, SimParams(beta=1, dt=1e-3, horizon=1), [0, 0])


def test_dimension_mismatch():
    with pytest.raises(DimensionError):
        simulate_path(TORUS, SimParams(beta=1, dt=1e-3, horizon=1), [0.1, 0.2, 0.3])


def test_euclidean_start_outside_sanity_ball():
    r = BOWL.domain.r
    with pytest.raises(ValueError):
        simulate_path(BOWL, SimParams(beta=1, dt=1e-3, horizon=1), [11 * r, 0])


def test_fixed_seed_is_bit_identical():
    p = SimParams(beta=0.5, dt=1e-3, horizon=5, record_stride=3, seed=42)
    a = simulate_path(TORUS, p, [1.0, -2.0])
    b = simulate_path(TORUS, p, [1.0, -2.0])
    for field in ("times", "states", "log_dists", "u_values"):
        assert np.array_equal(getattr(a, field), getattr(b, field))
    assert a.terminal == b.terminal


def test_record_invariants():
    p = SimParams(beta=-0.5, dt=1e-3, horizon=20, record_stride=7, seed=1)
    rec = simulate_path(TORUS, p, [3.0, 3.0])
    n = rec.times.size
    assert rec.states.shape == (n, 2)
    assert rec.log_dists.shape == (n, 1)
    assert rec.u_values.shape == (n,)
    assert np.all(np.isfinite(rec.states)) and np.all(np.isfinite(rec.log_dists))
    assert np.all(rec.u_values >= 0)
    assert np.all(rec.states >= -math.pi) and np.all(rec.states < math.pi)
    assert rec.times[0] == 0 and np.allclose(np.diff(rec.times), 7e-3)


def test_convergence_declared_at_floor():
    p = SimParams(beta=2.0, dt=1e-3, horizon=100, record_stride=10, seed=3)
    rec = simulate_path(TORUS, p, [0.5, 0.5])
    assert rec.terminal == CONVERGED
    assert rec.terminal_well == 0
    assert rec.terminal_time < 100
    assert rec.log_dists[-1, 0] < -20


def test_ensemble_single_path_equals_simulate_path():
    p = SimParams(beta=1, dt=1e-3, horizon=3, seed=77)
    ens = simulate_ensemble(TORUS, p, x0=[1.0, 1.0], n_paths=1)
    one = simulate_path(TORUS, SimParams(beta=1, dt=1e-3, horizon=3, seed=derive_seed(77, 0)), [1.0, 1.0])
    assert np.array_equal(ens.paths[0].states, one.states)


def test_ensemble_independent_of_workers():
    p = SimParams(beta=1, dt=1e-3, horizon=2, record_stride=5, seed=5)
    a = simulate_ensemble(TORUS, p, n_paths=6, x0_sampler=uniform_torus_sampler(TORUS), workers=1)
    b = simulate_ensemble(TORUS, p, n_paths=6, x0_sampler=uniform_torus_sampler(TORUS), workers=3)
    for pa, pb in zip(a.paths, b.paths):
        assert np.array_equal(pa.states, pb.states)
    assert ensemble_summary(a, TORUS) == ensemble_summary(b, TORUS)


def test_ensemble_needs_one_start_source():
    p = SimParams(beta=1, dt=1e-3, horizon=2)
    with pytest.raises(ValueError):
        simulate_ensemble(TORUS, p, n_paths=2)
    with pytest.raises(ValueError):
        simulate_ensemble(TORUS, p, x0=[1, 1], n_paths=0)


def test_noise_substeps_pair_brownian_increments():
    fine = _draw(make_rng(9), 6, 2, 1)
    coarse = _draw(make_rng(9), 3, 2, 2)
    assert np.allclose(coarse, (fine[0::2] + fine[1::2]) / math.sqrt(2), atol=1e-15)


def test_halving_dt_changes_slope_less_than_stderr():
    # paired Brownian paths: the coarse run sums the fine run's normals in pairs
    n = 40
    slopes = {}
    for dt, sub in ((2e-3, 2), (1e-3, 1)):
        vals = []
        for i in range(n):
            p = SimParams(beta=1.0, dt=dt, horizon=30, record_stride=max(1, int(round(0.02 / dt))),
                          seed=derive_seed(123, i), noise_substeps=sub)
            vals.append(lyapunov_rate(simulate_path(TORUS, p, [1.5, -1.0]), TORUS).slope)
        slopes[dt] = np.array(vals)
    se = slopes[1e-3].std(ddof=1) / math.sqrt(n)
    assert abs(slopes[2e-3].mean() - slopes[1e-3].mean()) < se


def test_sphere_rejects_non_unit_start():
    with pytest.raises(ValueError):
        simulate_sphere(Spectrum([1, 4]), 0.0, [1.0, 1.0], SimParams(beta=0, dt=1e-3, horizon=1))


def test_sphere_unit_norm_and_reproducible():
    p = SimParams(beta=0.5, dt=1e-3, horizon=20, record_stride=50, seed=8)
    theta0 = np.ones(3) / math.sqrt(3)
    a = simulate_sphere(Spectrum([1, 2, 4]), 0.5, theta0, p)
    b = simulate_sphere(Spectrum([1, 2, 4]), 0.5, theta0, p)
    assert np.allclose(np.linalg.norm(a.thetas, axis=1), 1.0, atol=1e-9)
    assert np.array_equal(a.thetas, b.thetas)
    assert a.final_averages == b.final_averages


def test_sphere_isotropic_average():
    p = SimParams(beta=1.0, dt=1e-3, horizon=50, record_stride=100, seed=2)
    rec = simulate_sphere(Spectrum.isotropic(2.5, 3), 1.0, [1.0, 0.0, 0.0], p)
    assert rec.final_averages["psi"] == pytest.approx(2.5, rel=1e-12)
    assert rec.final_averages["phi_a"] == pytest.approx(2.5, rel=1e-12)


def test_generator_kills_constants():
    f = lambda x: 3.7  # noqa: E731
    assert apply_generator_fd(TORUS, 1.3, f, np.array([0.4, -0.9]), 1e-4) == 0
    assert carre_du_champ_fd(TORUS, 1.3, f, np.array([0.4, -0.9]), 1e-4) == 0


def test_generator_quadratic_on_bowl():
    # U = |x|^2, f = x1^2 + 3 x2^2:  L f = 8 |x|^2 - beta (4 x1^2 + 12 x2^2)
    f = lambda x: x[0] ** 2 + 3 * x[1] ** 2  # noqa: E731
    x = np.array([0.6, -1.3])
    beta = 1.7
    exact = 8 * (x @ x) - beta * (4 * x[0] ** 2 + 12 * x[1] ** 2)
    assert apply_generator_fd(BOWL, beta, f, x, 1e-3) == pytest.approx(exact, abs=1e-6)


def test_carre_du_champ_linear_on_bowl():
    a = np.array([2.0, -0.5])
    x = np.array([0.3, 0.8])
    val = carre_du_champ_fd(BOWL, 1.0, lambda y: a @ y, x, 1e-3)
    assert val == pytest.approx(2 * (x @ x) * (a @ a), rel=1e-9)


def test_generator_guard_near_well():
    f = neg_log_distance(TORUS, 0)
    with pytest.raises(ValueError):
        apply_generator_fd(TORUS, 1.0, f, np.array([1e-5, 0]), 1e-4)
    with pytest.raises(ValueError):
        carre_du_champ_fd(TORUS, 1.0, f, np.array([1e-5, 0]), 1e-4)


def test_generator_blow_up_isotropic():
    # H_beta(0, theta) = (beta - beta0) <theta, A theta> = 1.5 for A = I, beta = 1.5
    f = neg_log_distance(TORUS, 0)
    theta = np.array([0.6, 0.8])
    errs = [abs(apply_generator_fd(TORUS, 1.5, f, rho * theta, rho * 1e-3) - 1.5) for rho in (1e-1, 1e-2, 1e-3)]
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 1e-3


def test_path_csv_header_and_rows(tmp_path):
    import io

    rec = simulate_path(TORUS, SimParams(beta=1, dt=1e-3, horizon=1, record_stride=100, seed=1), [1, 1])
    buf = io.StringIO()
    write_path_csv(rec, TORUS, buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "t,x1,x2,U,ln_d0"
    assert len(lines) == rec.times.size + 1
