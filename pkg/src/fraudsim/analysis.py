"""Verdicts on simulated paths: capture rates, selection, invariant law, criticality.

Also hosts the spherical sign identity comparing ``2 (1 + beta) mu_{A,beta}[phi_A]``
with ``tr(A)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import stats

from .errors import RegimeError, VerdictError
from .sde import CAPPED, CONVERGED, EnsembleRecord, PathRecord, occupation_layout
from .spectral import MONTE_CARLO, QUADRATURE, Spectrum, beta_zero, mu_expectation, phi_a
from .spectral import lambda_avg as _lambda_avg


@dataclass(frozen=True)
class RateVerdict:
    slope: float
    stderr: float
    target: float
    window: tuple
    well: int


@dataclass(frozen=True)
class PooledRate:
    slope: float
    stderr: float
    target: float
    n_paths: int
    one_sided_fraction: float


@lru_cache(maxsize=256)
def _lambda_cached(eigs, beta):
    spec = Spectrum(eigs)
    method = QUADRATURE if spec.m <= 3 else MONTE_CARLO
    return _lambda_avg(spec, beta, method)[0]


def capture_rate(spectrum, beta):
    """``-Lambda(A, beta) (beta - beta0)``; zero at criticality."""
    b0 = beta_zero(spectrum.m)
    if beta == b0:
        return 0.0
    return -_lambda_cached(spectrum.eigenvalues, float(beta)) * (beta - b0)


def lyapunov_rate(path, land, well=None, tail_fraction=0.5, beta=None):
    """Least-squares slope of ``ln d(X(t), p_j)`` over the tail of the path.

    The standard error treats ``ln d`` as a drifted Brownian motion: the
    diffusion variance is estimated from the residual increments and plugged
    into the OLS-slope variance ``6 sigma^2 / (5 T)`` of such a process.
    """
    if not 0 < tail_fraction <= 1:
        raise ValueError(f"tail_fraction must be in (0, 1], got {tail_fraction}")
    beta = path.params.beta if beta is None else beta
    if path.terminal == CAPPED:
        raise VerdictError("path hit the confinement cap; it was not attracted to any well")
    if well is None:
        well = path.terminal_well if path.converged else int(np.argmin(path.log_dists[-1]))
    if path.converged and path.terminal_well != well:
        raise VerdictError(f"path converged to well {path.terminal_well}, not {well}")
    n = path.times.size
    start = min(int(math.floor(n * (1 - tail_fraction))), n - 3)
    if start < 0:
        raise VerdictError("path has too few recorded samples for a slope fit")
    t = path.times[start:]
    y = path.log_dists[start:, well]
    tc = t - t.mean()
    slope = float(tc @ (y - y.mean()) / (tc @ tc))
    dt = np.diff(t)
    dy = np.diff(y)
    span = float(t[-1] - t[0])
    mu = dy.sum() / dt.sum()
    sigma2 = float(((dy - mu * dt) ** 2).sum() / dt.sum() * dy.size / max(dy.size - 1, 1))
    stderr = math.sqrt(6 * sigma2 / (5 * span))
    if not path.converged and not slope < 0:
        raise VerdictError(f"ln d to well {well} is not decreasing over the tail window (slope {slope:.3g})")
    target = capture_rate(land.achieved_spectra[well], beta)
    return RateVerdict(slope=slope, stderr=stderr, target=target, window=(float(t[0]), float(t[-1])), well=well)


def pooled_rate(verdicts, slack=0.85):
    """Mean slope over paths, its standard error, and the per-path one-sided check.

    A path passes the one-sided check when ``slope <= slack * target + 3 stderr``.
    """
    v = list(verdicts)
    if not v:
        raise ValueError("no verdicts to pool")
    s = np.array([r.slope for r in v])
    target = v[0].target
    ok = [r.slope <= slack * r.target + 3 * r.stderr for r in v]
    se = float(s.std(ddof=1) / math.sqrt(len(s))) if len(s) > 1 else v[0].stderr
    return PooledRate(slope=float(s.mean()), stderr=se, target=target, n_paths=len(v),
                      one_sided_fraction=float(np.mean(ok)))


# ------------------------------------------------------------------ selection

def wilson_interval(k, n, confidence=0.95):
    if n == 0:
        return 0.0, 1.0
    z = stats.norm.ppf(0.5 + confidence / 2)
    p = k / n
    den = 1 + z * z / n
    centre = (p + z * z / (2 * n)) / den
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / den
    return max(0.0, centre - half), min(1.0, centre + half)


@dataclass(frozen=True)
class SelectionStats:
    counts: tuple
    n_paths: int
    freqs: tuple
    intervals: tuple
    unresolved: int
    capped: int

    @property
    def unresolved_fraction(self):
        return (self.unresolved + self.capped) / self.n_paths

    def resolved_interval(self, j, confidence=0.95):
        """Wilson interval for well ``j`` among the paths that converged."""
        return wilson_interval(self.counts[j], sum(self.counts), confidence)


def selection_stats(ensemble, land, confidence=0.95):
    if not ensemble.params.beta > beta_zero(land.m):
        raise RegimeError("selection statistics need beta > beta0 = m/2 - 1 (attractive regime)")
    t = ensemble.tallies(land.n_wells)
    n = ensemble.n_paths
    counts = tuple(t["converged"])
    return SelectionStats(
        counts=counts,
        n_paths=n,
        freqs=tuple(c / n for c in counts),
        intervals=tuple(wilson_interval(c, n, confidence) for c in counts),
        unresolved=t["running"],
        capped=t["capped"],
    )


# ----------------------------------------------------------- invariant law

def _require_recurrent(m, beta):
    if not beta < beta_zero(m):
        raise RegimeError(
            f"C_beta infinite for beta={beta}: U^(-1-beta) is integrable only if 2(beta+1) < m (m={m})"
        )


@dataclass(frozen=True)
class InvariantGrid:
    bins: int
    lower: np.ndarray
    width: np.ndarray
    masses: np.ndarray  # flat, row-major over axes
    flagged: np.ndarray
    c_beta: float
    volume: float

    def centers(self):
        m = self.lower.size
        idx = np.indices((self.bins,) * m).reshape(m, -1).T
        return self.lower + (idx + 0.5) * self.width


def _gl_box(land, expo, lo, hi, nodes, weights):
    m = lo.size
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    grids = np.meshgrid(*[mid[k] + half[k] * nodes for k in range(m)], indexing="ij")
    pts = np.column_stack([g.ravel() for g in grids])
    w = weights
    for _ in range(m - 1):
        w = np.multiply.outer(w, weights)
    u = land.u(pts)
    return float(np.prod(half) * (w.ravel() @ (u ** expo)))


def _refined_box(land, expo, lo, hi, wells, nodes, weights, depth=0, max_depth=40):
    diag = float(np.linalg.norm(hi - lo))
    near = False
    for p in wells:
        gap = np.maximum(np.maximum(lo - p, p - hi), 0.0)
        if np.linalg.norm(gap) < diag:
            near = True
            break
    if not near or depth >= max_depth:
        return _gl_box(land, expo, lo, hi, nodes, weights)
    mid = 0.5 * (lo + hi)
    m = lo.size
    total = 0.0
    for corner in range(1 << m):
        bits = np.array([(corner >> k) & 1 for k in range(m)], dtype=bool)
        clo = np.where(bits, mid, lo)
        chi = np.where(bits, hi, mid)
        total += _refined_box(land, expo, clo, chi, wells, nodes, weights, depth + 1, max_depth)
    return total


def _unwrapped_wells(land, lo, hi):
    """Well images (over neighbouring periods) that may touch the box."""
    out = []
    shifts = np.indices((3,) * land.m).reshape(land.m, -1).T - 1
    for p in land.positions:
        for s in shifts:
            q = p + s * land.period
            gap = np.maximum(np.maximum(lo - q, q - hi), 0.0)
            if np.linalg.norm(gap) < 2 * np.linalg.norm(hi - lo):
                out.append(q)
    return out


def invariant_grid(land, beta, bins, nodes=None):
    """Bin masses of ``pi_beta`` on a regular torus grid.

    Bins whose closure comes within two bin diagonals of a well are flagged;
    their masses come from recursive bisection toward the singular point, the
    rest from tensor Gauss-Legendre rules.
    """
    if not land.is_torus:
        raise ValueError("invariant grids are defined on the flat torus only")
    _require_recurrent(land.m, beta)
    bins = int(bins)
    if bins < 1:
        raise ValueError("bins must be positive")
    m = land.m
    lower, width = occupation_layout(land, bins)
    n_gl = nodes or (6 if m == 2 else 4)
    gl_x, gl_w = np.polynomial.legendre.leggauss(n_gl)
    expo = -1.0 - beta
    idx = np.indices((bins,) * m).reshape(m, -1).T
    lo_all = lower + idx * width
    diag = float(np.linalg.norm(width))
    flagged = np.zeros(len(idx), dtype=bool)
    for p in land.positions:
        gap = lo_all - p
        gap = gap - land.period * np.floor(gap / land.period + 0.5)
        # nearest point of each box to the well, computed in the wrapped frame
        d = np.where(gap > 0, gap, np.where(gap + width < 0, -(gap + width), 0.0))
        flagged |= np.linalg.norm(d, axis=1) < 2 * diag
    masses = np.empty(len(idx))
    # vectorized GL over unflagged bins
    grids = np.meshgrid(*[gl_x] * m, indexing="ij")
    ref = np.column_stack([g.ravel() for g in grids])
    w = gl_w
    for _ in range(m - 1):
        w = np.multiply.outer(w, gl_w)
    w = w.ravel()
    free = np.flatnonzero(~flagged)
    chunks = np.array_split(free, max(1, len(free) // 4096)) if free.size else []
    for chunk in chunks:
        centre = lo_all[chunk] + 0.5 * width
        pts = (centre[:, None, :] + 0.5 * width * ref[None, :, :]).reshape(-1, m)
        u = land.u(pts).reshape(len(chunk), -1)
        masses[chunk] = np.prod(0.5 * width) * (u ** expo) @ w
    fine_x, fine_w = np.polynomial.legendre.leggauss(8)
    for b in np.flatnonzero(flagged):
        lo = lo_all[b]
        hi = lo + width
        masses[b] = _refined_box(land, expo, lo, hi, _unwrapped_wells(land, lo, hi), fine_x, fine_w)
    c_beta = float(masses.sum())
    return InvariantGrid(bins=bins, lower=lower, width=width, masses=masses / c_beta, flagged=flagged,
                         c_beta=c_beta, volume=float(np.prod(land.period)))


@dataclass(frozen=True)
class InvariantComparison:
    tv: float
    rel_err: np.ndarray  # NaN on flagged bins
    max_rel_err: float
    chi2: float
    empirical: np.ndarray
    grid: InvariantGrid
    n_samples: int


def _sources(source):
    if isinstance(source, EnsembleRecord):
        return list(source.paths)
    if isinstance(source, PathRecord):
        return [source]
    return list(source)


def empirical_masses(source, land, bins):
    """Pooled occupation fractions on the ``bins``-per-axis grid.

    Per-step occupation counts are used when the paths carry them at this
    resolution; otherwise the recorded states after burn-in are histogrammed.
    """
    paths = _sources(source)
    m = land.m
    if all(p.occupation is not None and p.params.occupation_bins == bins for p in paths):
        counts = np.zeros(bins ** m, dtype=np.int64)
        for p in paths:
            counts += p.occupation
    else:
        lower, width = occupation_layout(land, bins)
        counts = np.zeros(bins ** m, dtype=np.int64)
        for p in paths:
            keep = p.times >= p.params.burn_in
            b = np.floor((p.states[keep] - lower) / width).astype(np.int64)
            b = np.clip(b, 0, bins - 1)
            flat = np.ravel_multi_index(tuple(b.T), (bins,) * m)
            counts += np.bincount(flat, minlength=bins ** m)
    return counts


def invariant_comparison(source, land, beta, bins, grid=None):
    """Compare pooled occupation with the ``pi_beta`` bin masses."""
    _require_recurrent(land.m, beta)
    grid = invariant_grid(land, beta, bins) if grid is None else grid
    counts = empirical_masses(source, land, bins)
    total = int(counts.sum())
    if total == 0:
        raise ValueError("no occupation samples to compare")
    emp = counts / total
    tv = 0.5 * float(np.abs(emp - grid.masses).sum())
    rel = np.full(emp.size, np.nan)
    ok = ~grid.flagged
    rel[ok] = (emp[ok] - grid.masses[ok]) / grid.masses[ok]
    expected = total * grid.masses[ok]
    chi2 = float(((counts[ok] - expected) ** 2 / expected).sum())
    return InvariantComparison(tv=tv, rel_err=rel, max_rel_err=float(np.nanmax(np.abs(rel))), chi2=chi2,
                               empirical=emp, grid=grid, n_samples=total)


def ergodic_average(source, func):
    """Time average of ``func(states)`` over recorded samples after burn-in, pooled."""
    num = 0.0
    den = 0
    for p in _sources(source):
        keep = p.times >= p.params.burn_in
        vals = np.asarray(func(p.states[keep]), dtype=float)
        num += float(vals.sum())
        den += int(keep.sum())
    if den == 0:
        raise ValueError("no samples after burn-in")
    return num / den


@dataclass(frozen=True)
class TVDecay:
    times: tuple
    tv: tuple
    decreasing: bool
    log_slope: float


def tv_decay_probe(ensemble, land, beta, times, bins=8):
    """Histogram TV between the ensemble law at each time and ``pi_beta``.

    A qualitative trend check: ``decreasing`` is true when the last TV is
    below the first and the least-squares slope of TV against ``ln t`` is
    negative. The sampling noise floor of the histogram is not removed.
    """
    _require_recurrent(land.m, beta)
    grid = invariant_grid(land, beta, bins)
    lower, width = occupation_layout(land, bins)
    rows_t, rows_tv = [], []
    for t in times:
        pts = []
        for p in ensemble.paths:
            i = int(np.argmin(np.abs(p.times - t)))
            pts.append(p.states[i])
        pts = np.array(pts)
        b = np.clip(np.floor((pts - lower) / width).astype(np.int64), 0, bins - 1)
        flat = np.ravel_multi_index(tuple(b.T), (bins,) * land.m)
        emp = np.bincount(flat, minlength=bins ** land.m) / len(pts)
        rows_t.append(float(t))
        rows_tv.append(0.5 * float(np.abs(emp - grid.masses).sum()))
    lt = np.log(np.maximum(rows_t, 1e-300))
    slope = float(np.polyfit(lt, rows_tv, 1)[0]) if len(rows_t) > 1 else 0.0
    return TVDecay(times=tuple(rows_t), tv=tuple(rows_tv), decreasing=rows_tv[-1] < rows_tv[0] and slope < 0,
                   log_slope=slope)


# -------------------------------------------------------------- criticality

def occupation_fraction(path, u0, until=None):
    """Fraction of recorded samples with ``U < u0`` (optionally up to time ``until``).

    A path that converged stays at its well afterwards, so the record slots
    it would have filled up to ``until`` (or the horizon) count as inside.
    """
    if not u0 > 0:
        raise ValueError(f"u0 must be positive, got {u0}")
    until = path.params.horizon if until is None else min(until, path.params.horizon)
    u = path.u_values[path.times <= until]
    if u.size == 0:
        raise ValueError("no recorded samples")
    inside = int(np.count_nonzero(u < u0))
    total = u.size
    if path.converged and path.terminal_time < until:
        step = path.params.dt * path.params.record_stride
        expected = int(math.floor(until / step + 1e-9)) + 1
        inside += max(expected - total, 0)
        total = max(expected, total)
    return inside / total


# ------------------------------------------------------- spherical identity

@dataclass(frozen=True)
class InequalityResult:
    lhs: float
    rhs: float
    stderr: float
    verdict: str  # "match", "mismatch" or "indeterminate"
    sign_match: bool | None


def spherical_inequality_check(spectrum, beta, method=QUADRATURE, budget=None, seed=0, tol=1e-9):
    """Compare ``2 (1 + beta) mu_{A,beta}[phi_A]`` with ``tr(A)``.

    The sign of the difference should be the sign of ``beta - beta0``; at
    ``beta0`` the two sides coincide. Differences within ``3 stderr`` (or the
    relative quadrature tolerance ``tol``) are indeterminate away from beta0
    and count as equality at beta0.
    """
    val, se = mu_expectation(spectrum, beta, lambda pts, psi: phi_a(spectrum, pts), method, budget, seed)
    lhs = 2 * (1 + beta) * val
    lhs_se = 2 * abs(1 + beta) * se
    rhs = spectrum.trace
    diff = lhs - rhs
    guard = max(3 * lhs_se, tol * abs(rhs))
    expected = float(np.sign(beta - beta_zero(spectrum.m)))
    if abs(diff) <= guard:
        if expected == 0:
            return InequalityResult(lhs, rhs, lhs_se, "match", True)
        return InequalityResult(lhs, rhs, lhs_se, "indeterminate", None)
    ok = bool(np.sign(diff) == expected)
    return InequalityResult(lhs, rhs, lhs_se, "match" if ok else "mismatch", ok)
