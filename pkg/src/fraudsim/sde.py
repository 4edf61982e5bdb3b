"""Simulation of the diffusion with generator ``U Lap - beta <grad U, grad .>``.

    dX = -beta grad U(X) dt + sqrt(2 U(X)) dB

is integrated with fixed-step Euler-Maruyama. The angular limit process on
the sphere (generator ``Psi_A (Lap_theta / 2 - beta <b, grad_theta>)``) is
integrated by a projected Euler step followed by renormalization.
Finite-difference probes of the generator and of its carre du champ
``2 U |grad f|^2`` are also provided.
"""
from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels as K
from ._rng import derive_seed, make_rng
from .errors import DimensionError

CHUNK_STEPS = 1 << 16

RUNNING = "running"
CONVERGED = "converged"
CAPPED = "capped"


@dataclass(frozen=True)
class SimParams:
    beta: float
    dt: float
    horizon: float
    record_stride: int = 1
    seed: int = 0
    floor_distance: float = 1e-12
    occupation_bins: int = 0
    burn_in: float = 0.0
    noise_substeps: int = 1

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not self.horizon > self.dt:
            raise ValueError(f"horizon must exceed dt, got horizon={self.horizon}, dt={self.dt}")
        if int(self.record_stride) < 1:
            raise ValueError(f"record_stride must be >= 1, got {self.record_stride}")
        if not self.floor_distance > 0:
            raise ValueError("floor_distance must be positive")
        if int(self.occupation_bins) < 0 or self.burn_in < 0:
            raise ValueError("occupation_bins and burn_in must be non-negative")
        if int(self.noise_substeps) < 1:
            raise ValueError("noise_substeps must be >= 1")

    @property
    def n_steps(self):
        return int(round(self.horizon / self.dt))


@dataclass(eq=False)
class PathRecord:
    times: np.ndarray
    states: np.ndarray
    log_dists: np.ndarray  # (n_records, n_wells)
    u_values: np.ndarray
    terminal: str
    terminal_well: int | None
    terminal_time: float
    params: SimParams
    x0: np.ndarray
    occupation: np.ndarray | None = None
    entry_time: float | None = None

    @property
    def converged(self):
        return self.terminal == CONVERGED

    def summary(self):
        return {
            "seed": self.params.seed,
            "terminal": self.terminal,
            "terminal_well": self.terminal_well,
            "terminal_time": self.terminal_time,
            "entry_time": self.entry_time,
            "n_records": int(self.times.size),
        }


@dataclass(eq=False)
class EnsembleRecord:
    master_seed: int
    params: SimParams
    paths: list
    workers: int = 1

    @property
    def seeds(self):
        return [p.params.seed for p in self.paths]

    @property
    def n_paths(self):
        return len(self.paths)

    def tallies(self, n_wells):
        counts = [0] * n_wells
        running = capped = 0
        for p in self.paths:
            if p.terminal == CONVERGED:
                counts[p.terminal_well] += 1
            elif p.terminal == CAPPED:
                capped += 1
            else:
                running += 1
        return {"converged": counts, "running": running, "capped": capped}

    def pooled_occupation(self):
        occ = [p.occupation for p in self.paths if p.occupation is not None]
        if not occ:
            return None
        total = np.zeros_like(occ[0])
        for o in occ:
            total += o
        return total


@dataclass(eq=False)
class SpherePathRecord:
    times: np.ndarray
    thetas: np.ndarray
    running_avgs: np.ndarray  # columns follow ``observables``
    observables: tuple = ("psi", "phi_a")
    final_averages: dict = field(default_factory=dict)


def occupation_layout(land, bins):
    """Lower corner and bin widths of the occupation grid over the domain."""
    if land.is_torus:
        p = land.period
        return -p / 2, p / bins
    r = land.domain.r
    return np.full(land.m, -r), np.full(land.m, 2 * r / bins)


def _draw(rng, k, m, sub):
    """``k`` standard normal m-vectors, each the normalized sum of ``sub`` draws.

    With ``sub = 2`` a path at step ``dt`` sees exactly the Brownian
    increments of a ``sub = 1`` path at ``dt / 2`` with the same seed.
    """
    if sub == 1:
        return rng.standard_normal((k, m))
    z = rng.standard_normal((k * sub, m)).reshape(k, sub, m)
    return z.sum(axis=1) / math.sqrt(sub)


def simulate_path(land, params, x0):
    x0 = np.asarray(x0, dtype=float).ravel()
    if x0.size != land.m:
        raise DimensionError(f"x0 has {x0.size} coordinates, landscape has m={land.m}")
    x = land.reduce(x0)
    floor2 = params.floor_distance ** 2
    for j in range(land.n_wells):
        if land.distance(x, j) ** 2 < floor2:
            raise ValueError(f"x0 is at well {j}: the minimizer set is invariant, nothing to simulate")
    kind, pos, coef, gamma, omega, period = land.kernel_args()
    if land.is_torus:
        cap2 = entry2 = math.inf
    else:
        r = land.domain.r
        if np.linalg.norm(x) > 10 * r:
            raise ValueError(f"x0 lies outside the sanity ball of radius 10 r = {10 * r}")
        cap2, entry2 = (10 * r) ** 2, r * r
    n_steps = params.n_steps
    stride = int(params.record_stride)
    n_rec = n_steps // stride + 1
    J = land.n_wells
    rec_t = np.empty(n_rec)
    rec_x = np.empty((n_rec, land.m))
    rec_u = np.empty(n_rec)
    rec_logd = np.empty((n_rec, J))
    rec_t[0] = 0.0
    rec_x[0] = x
    rec_u[0] = land.evaluate(x)[0]
    rec_logd[0] = np.log(land.distances(x))
    rec_n = np.array([1], dtype=np.int64)
    bins = int(params.occupation_bins)
    if bins:
        occ = np.zeros(bins ** land.m, dtype=np.int64)
        occ_lo, occ_w = occupation_layout(land, bins)
    else:
        occ = np.zeros(1, dtype=np.int64)
        occ_lo = occ_w = np.ones(land.m)
    occ_from = int(math.ceil(params.burn_in / params.dt))
    entry = np.array([-1], dtype=np.int64)
    if not land.is_torus and x @ x <= entry2:
        entry[0] = 0
    rng = make_rng(params.seed)
    sub = int(params.noise_substeps)
    status, done = K.RUNNING, 0
    while done < n_steps:
        k = min(CHUNK_STEPS, n_steps - done)
        noise = _draw(rng, k, land.m, sub)
        status, taken = K.em_chunk(
            kind, pos, coef, gamma, omega, period, float(params.beta), float(params.dt), x, noise,
            done, stride, floor2, cap2, entry2, rec_t, rec_x, rec_u, rec_logd, rec_n,
            occ, bins, occ_lo, occ_w, occ_from, entry,
        )
        done += taken
        if status != K.RUNNING:
            break
    if status == K.NONFINITE:
        raise FloatingPointError(f"non-finite state after {done} steps (seed {params.seed})")
    n = int(rec_n[0])
    if status > 0:
        terminal, well = CONVERGED, status - 1
    elif status == K.CAPPED:
        terminal, well = CAPPED, None
    else:
        terminal, well = RUNNING, None
    return PathRecord(
        times=rec_t[:n].copy(),
        states=rec_x[:n].copy(),
        log_dists=rec_logd[:n].copy(),
        u_values=rec_u[:n].copy(),
        terminal=terminal,
        terminal_well=well,
        terminal_time=done * params.dt,
        params=params,
        x0=x0,
        occupation=occ if bins else None,
        entry_time=None if entry[0] < 0 else entry[0] * params.dt,
    )


def uniform_torus_sampler(land):
    def sample(rng):
        return (rng.random(land.m) - 0.5) * land.period
    return sample


def shell_sampler(m, radius):
    """Uniform point on the sphere of the given radius."""
    def sample(rng):
        v = rng.standard_normal(m)
        return radius * v / np.linalg.norm(v)
    return sample


def simulate_ensemble(land, params, x0=None, n_paths=1, x0_sampler=None, workers=1):
    """Independent paths with seeds ``derive_seed(params.seed, i)``.

    ``x0`` is one start point shared by all paths or a list with one per
    path; ``x0_sampler(rng)`` draws starts from the stream
    ``derive_seed(params.seed, i, 1)`` instead. Paths are collected in index
    order, so the result does not depend on ``workers``.
    """
    n_paths = int(n_paths)
    if n_paths < 1:
        raise ValueError(f"n_paths must be >= 1, got {n_paths}")
    if (x0 is None) == (x0_sampler is None):
        raise ValueError("give exactly one of x0 and x0_sampler")
    starts = []
    if x0_sampler is not None:
        for i in range(n_paths):
            starts.append(np.asarray(x0_sampler(make_rng(derive_seed(params.seed, i, 1))), dtype=float))
    else:
        arr = np.asarray(x0, dtype=float)
        if arr.ndim == 1:
            starts = [arr] * n_paths
        else:
            if arr.shape[0] != n_paths:
                raise ValueError(f"got {arr.shape[0]} start points for {n_paths} paths")
            starts = list(arr)

    def run(i):
        return simulate_path(land, replace(params, seed=derive_seed(params.seed, i)), starts[i])

    workers = max(1, int(workers))
    if workers == 1:
        paths = [run(i) for i in range(n_paths)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            paths = list(pool.map(run, range(n_paths)))
    return EnsembleRecord(master_seed=params.seed, params=params, paths=paths, workers=workers)


def simulate_sphere(spectrum, beta, theta0, params):
    """Angular diffusion whose invariant law is ``mu_{A,beta}``.

    Only ``dt``, ``horizon``, ``record_stride`` and ``seed`` of ``params``
    are used.
    """
    theta = np.asarray(theta0, dtype=float).ravel().copy()
    if theta.size != spectrum.m:
        raise DimensionError(f"theta0 has {theta.size} coordinates, spectrum has m={spectrum.m}")
    if abs(np.linalg.norm(theta) - 1.0) > 1e-9:
        raise ValueError(f"theta0 must be a unit vector, |theta0| = {np.linalg.norm(theta)}")
    lam = spectrum.values
    n_steps = params.n_steps
    stride = int(params.record_stride)
    n_rec = n_steps // stride
    rec_t = np.empty(n_rec)
    rec_theta = np.empty((n_rec, spectrum.m))
    rec_avg = np.empty((n_rec, 2))
    rec_n = np.zeros(1, dtype=np.int64)
    sums = np.zeros(2)
    rng = make_rng(params.seed)
    done = 0
    while done < n_steps:
        k = min(CHUNK_STEPS, n_steps - done)
        noise = rng.standard_normal((k, spectrum.m))
        K.sphere_chunk(lam, float(beta), float(params.dt), theta, noise, done, stride, sums,
                       rec_t, rec_theta, rec_avg, rec_n)
        done += k
    n = int(rec_n[0])
    return SpherePathRecord(
        times=rec_t[:n],
        thetas=rec_theta[:n],
        running_avgs=rec_avg[:n],
        final_averages={"psi": sums[0] / n_steps, "phi_a": sums[1] / n_steps},
    )


# --------------------------------------------------------- generator probes

def neg_log_distance(land, j):
    """``f(x) = -ln d(x, p_j)``, singular at well ``j``."""
    def f(x):
        return -math.log(land.distance(x, j))
    return f


def _guard(land, x, h):
    if not h > 0:
        raise ValueError(f"step h must be positive, got {h}")
    d = land.distances(x)
    if np.min(d) <= 2 * h:
        raise ValueError(f"x is within 2h={2 * h} of well {int(np.argmin(d))}; the probe would straddle the singularity")


def _fd_grad_lap(f, x, h):
    # fourth-order five-point stencils; the second-order ones bottom out
    # near 1e-7 relative error, above the rho^2 decay of the blow-up probe
    m = x.size
    f0 = f(x)
    grad = np.empty(m)
    lap = 0.0
    for k in range(m):
        e = np.zeros(m)
        e[k] = h
        fp, fm = f(x + e), f(x - e)
        fpp, fmm = f(x + 2 * e), f(x - 2 * e)
        grad[k] = (8 * (fp - fm) - (fpp - fmm)) / (12 * h)
        lap += (16 * (fp + fm) - (fpp + fmm) - 30 * f0) / (12 * h * h)
    return grad, lap


def apply_generator_fd(land, beta, f, x, h):
    """``U Lap f - beta <grad U, grad f>`` at ``x`` with central differences for f."""
    x = np.asarray(x, dtype=float)
    _guard(land, x, h)
    u, gu = land.evaluate(x)
    gf, lap = _fd_grad_lap(f, x, h)
    return float(u * lap - beta * gu @ gf)


def carre_du_champ_fd(land, beta, f, x, h):
    """``2 U |grad f|^2`` at ``x``; independent of beta, which is kept for symmetry."""
    x = np.asarray(x, dtype=float)
    _guard(land, x, h)
    u, _ = land.evaluate(x)
    gf, _ = _fd_grad_lap(f, x, h)
    return float(2 * u * gf @ gf)


# ------------------------------------------------------------ serialization

def _fmt(v):
    return format(float(v), ".17g")


def write_path_csv(path, land, fh):
    w = csv.writer(fh, lineterminator="\n")
    m, J = land.m, land.n_wells
    w.writerow(["t", *[f"x{k + 1}" for k in range(m)], "U", *[f"ln_d{j}" for j in range(J)]])
    for i in range(path.times.size):
        w.writerow([_fmt(path.times[i]), *map(_fmt, path.states[i]), _fmt(path.u_values[i]),
                    *map(_fmt, path.log_dists[i])])


def ensemble_summary(ens, land):
    return {
        "master_seed": ens.master_seed,
        "n_paths": ens.n_paths,
        "params": {k: getattr(ens.params, k) for k in ens.params.__dataclass_fields__},
        "seeds": ens.seeds,
        "tallies": ens.tallies(land.n_wells),
        "paths": [p.summary() for p in ens.paths],
    }


def write_ensemble_summary(ens, land, fh):
    json.dump(ensemble_summary(ens, land), fh, indent=2, sort_keys=True)
    fh.write("\n")
