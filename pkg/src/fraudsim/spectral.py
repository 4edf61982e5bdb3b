"""Spherical integrals of Hessian quadratic forms.

For a positive spectrum ``A`` (diagonal, since only eigenvalues matter) this
module evaluates

    Z(A, s)      = E_sigma[ <theta, A theta>^(-s) ]
    Lambda(A, b) = Z(A, b) / Z(A, 1 + b)

where ``sigma`` is the uniform probability on the unit sphere, samples the
tilted sphere law ``mu_{A,b}`` (density proportional to ``<theta, A theta>^(-1-b)``),
and provides the beta thresholds used to compare regimes.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._rng import derive_seed, make_rng
from .errors import CapabilityError, DimensionError

QUADRATURE = "quadrature"
MONTE_CARLO = "monte_carlo"
METHODS = (QUADRATURE, MONTE_CARLO)

DEFAULT_MC_BUDGET = 1_000_000
DEFAULT_TRAPEZOID_NODES = 4096
DEFAULT_AZIMUTH_NODES = 512  # m = 3 uses 256 x 512
_MC_CHUNK = 1 << 18


@dataclass(frozen=True)
class Spectrum:
    """Sorted positive eigenvalues of a Hessian (the diagonal of ``A_p``)."""

    eigenvalues: tuple

    def __post_init__(self):
        vals = np.asarray(self.eigenvalues, dtype=float).ravel()
        if vals.size < 2:
            raise DimensionError(f"spectrum needs m >= 2 eigenvalues, got {vals.size}")
        if not np.all(np.isfinite(vals)) or np.any(vals <= 0):
            raise ValueError(f"eigenvalues must be finite and strictly positive: {vals.tolist()}")
        object.__setattr__(self, "eigenvalues", tuple(float(v) for v in np.sort(vals)))

    @classmethod
    def isotropic(cls, lam, m):
        return cls((lam,) * m)

    @property
    def m(self):
        return len(self.eigenvalues)

    @property
    def values(self):
        return np.array(self.eigenvalues)

    @property
    def lambda_min(self):
        return self.eigenvalues[0]

    @property
    def lambda_max(self):
        return self.eigenvalues[-1]

    @property
    def trace(self):
        return float(sum(self.eigenvalues))

    def matrix(self):
        return np.diag(self.values)

    def quadratic_form(self, theta):
        """``<theta, A theta>`` row-wise for an ``(n, m)`` array."""
        theta = np.asarray(theta, dtype=float)
        return (theta * theta) @ self.values


@dataclass(frozen=True)
class SphereSample:
    points: np.ndarray
    seed: int
    weights: np.ndarray | None = None
    acceptance_rate: float = field(default=1.0, compare=False)


@dataclass(frozen=True)
class BetaThresholds:
    beta_zero: float
    beta_vee: float
    beta_wedge: float


def beta_zero(m):
    """Critical parameter ``m/2 - 1``."""
    if int(m) != m or m < 2:
        raise DimensionError(f"dimension must be an integer >= 2, got {m}")
    return m / 2 - 1


def beta_thresholds(spectra):
    spectra = list(spectra)
    if not spectra:
        raise ValueError("beta_thresholds needs at least one spectrum")
    dims = {s.m for s in spectra}
    if len(dims) != 1:
        raise DimensionError(f"spectra have mixed dimensions {sorted(dims)}")
    m = dims.pop()
    vee = max(s.trace / (2 * s.lambda_min) - 1 for s in spectra)
    wedge = min(s.trace / (2 * s.lambda_max) - 1 for s in spectra)
    return BetaThresholds(beta_zero=beta_zero(m), beta_vee=vee, beta_wedge=wedge)


# ---------------------------------------------------------------- point sets

def uniform_sphere(m, n, rng):
    """``n`` uniform points on S^(m-1) via normalized Gaussian vectors."""
    x = rng.standard_normal((n, m))
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def sphere_rule(m, budget=None):
    """Deterministic quadrature nodes and weights (summing to 1) on S^(m-1).

    m = 2: uniform trapezoid rule in the angle (``budget`` nodes).
    m = 3: Gauss-Legendre in the height ``z = cos(polar)`` (which absorbs the
    sine Jacobian) times a trapezoid rule in azimuth; ``budget`` is the number
    of azimuth nodes and half as many heights are used.
    """
    if m == 2:
        n = DEFAULT_TRAPEZOID_NODES if budget is None else int(budget)
        t = 2 * np.pi * np.arange(n) / n
        return np.column_stack([np.cos(t), np.sin(t)]), np.full(n, 1.0 / n)
    if m == 3:
        n_phi = DEFAULT_AZIMUTH_NODES if budget is None else int(budget)
        n_z = max(n_phi // 2, 1)
        z, wz = np.polynomial.legendre.leggauss(n_z)
        phi = 2 * np.pi * np.arange(n_phi) / n_phi
        zz, pp = np.meshgrid(z, phi, indexing="ij")
        s = np.sqrt(1.0 - zz * zz)
        pts = np.column_stack([(s * np.cos(pp)).ravel(), (s * np.sin(pp)).ravel(), zz.ravel()])
        w = np.repeat(wz / 2.0, n_phi) / n_phi
        return pts, w
    raise CapabilityError(f"quadrature is only available for m in {{2, 3}}, got m={m}")


def _check_method(spectrum, method, budget):
    if method not in METHODS:
        raise CapabilityError(f"unknown method {method!r}; expected one of {METHODS}")
    if budget is not None and int(budget) <= 0:
        raise ValueError(f"budget must be positive, got {budget}")
    if method == QUADRATURE and spectrum.m not in (2, 3):
        raise CapabilityError(f"quadrature is only available for m in {{2, 3}}, got m={spectrum.m}")


def _mc_chunks(m, budget, seed):
    rng = make_rng(seed)
    remaining = DEFAULT_MC_BUDGET if budget is None else int(budget)
    while remaining > 0:
        k = min(remaining, _MC_CHUNK)
        remaining -= k
        yield uniform_sphere(m, k, rng)


# ----------------------------------------------------------------- integrals

def sphere_integral_z(spectrum, s, method=QUADRATURE, budget=None, seed=0):
    """Estimate ``Z(A, s)``; returns ``(value, stderr)`` (stderr 0 for quadrature)."""
    _check_method(spectrum, method, budget)
    lam = spectrum.values
    if s == 0:
        return 1.0, 0.0
    if method == QUADRATURE:
        pts, w = sphere_rule(spectrum.m, budget)
        return float(w @ spectrum.quadratic_form(pts) ** (-s)), 0.0
    n = 0
    total = 0.0
    total_sq = 0.0
    ref = lam[0]
    for pts in _mc_chunks(spectrum.m, budget, seed):
        v = ((pts * pts) @ (lam / ref)) ** (-s)
        n += v.size
        total += v.sum()
        total_sq += (v * v).sum()
    mean = total / n
    var = max(total_sq / n - mean * mean, 0.0)
    scale = ref ** (-s)
    return float(mean * scale), float(np.sqrt(var / n) * scale)


def mu_expectation(spectrum, beta, func, method=QUADRATURE, budget=None, seed=0):
    """Expectation of ``func(theta, psi)`` under ``mu_{A,beta}``; ``(value, stderr)``.

    Monte Carlo uses the self-normalized ratio estimator with a delta-method
    standard error.
    """
    _check_method(spectrum, method, budget)
    lam = spectrum.values
    expo = -1.0 - beta
    # keep weights <= 1 whatever the sign of the exponent
    ref = lam[0] if expo < 0 else lam[-1]
    if method == QUADRATURE:
        pts, w = sphere_rule(spectrum.m, budget)
        psi = spectrum.quadratic_form(pts)
        tilt = w * (psi / ref) ** expo
        return float(tilt @ func(pts, psi) / tilt.sum()), 0.0
    n = 0
    sw = swg = sww = swgwg = swwg = 0.0
    for pts in _mc_chunks(spectrum.m, budget, seed):
        psi = (pts * pts) @ lam
        w = (psi / ref) ** expo
        g = np.asarray(func(pts, psi), dtype=float)
        wg = w * g
        n += w.size
        sw += w.sum()
        swg += wg.sum()
        sww += (w * w).sum()
        swgwg += (wg * wg).sum()
        swwg += (w * wg).sum()
    ratio = swg / sw
    resid_sq = swgwg / n - 2 * ratio * swwg / n + ratio * ratio * sww / n
    se = np.sqrt(max(resid_sq, 0.0) / n) / (sw / n)
    return float(ratio), float(se)


def lambda_avg(spectrum, beta, method=QUADRATURE, budget=None, seed=0):
    """beta-average eigenvalue ``Lambda(A, beta)``; returns ``(value, stderr)``."""
    return mu_expectation(spectrum, beta, lambda pts, psi: psi, method, budget, seed)


def phi_a(spectrum, theta):
    """``<theta, A^2 theta> / <theta, A theta>`` row-wise."""
    theta = np.asarray(theta, dtype=float)
    lam = spectrum.values
    t2 = theta * theta
    return (t2 @ (lam * lam)) / (t2 @ lam)


# ------------------------------------------------------------------ sampling

def sample_mu(spectrum, beta, n, seed=0):
    """Draw ``n`` points from ``mu_{A,beta}`` by rejection from the uniform law.

    The proposal bound is the sup of the weight ``<theta, A theta>^(-1-beta)``,
    reached along the smallest eigendirection when ``1 + beta > 0`` and along
    the largest one when ``1 + beta < 0``.
    """
    n = int(n)
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    rng = make_rng(seed)
    lam = spectrum.values
    expo = -1.0 - beta
    ext = lam[0] if expo < 0 else lam[-1]
    lower = (lam[0] / lam[-1]) ** abs(1 + beta)
    batch = min(max(1024, int(np.ceil(1.2 * n / lower))), 1 << 20)
    accepted = []
    got = proposed = 0
    while got < n:
        pts = uniform_sphere(spectrum.m, batch, rng)
        prob = (((pts * pts) @ lam) / ext) ** expo
        keep = rng.random(batch) < prob
        proposed += batch
        sel = pts[keep]
        accepted.append(sel)
        got += sel.shape[0]
    points = np.concatenate(accepted)[:n]
    return SphereSample(points=points, seed=int(seed), acceptance_rate=got / proposed)


# ----------------------------------------------------- two-point spectra

@dataclass(frozen=True)
class TwoPointRow:
    m: int
    value: float
    stderr: float
    method: str


def two_point_spectrum(lambda_minus, lambda_plus, m):
    return Spectrum((lambda_minus,) * (m - 1) + (lambda_plus,))


def _two_point_mc(lambda_minus, lambda_plus, beta, m, budget, seed):
    # theta_m^2 = X_m^2 / sum X_i^2 with iid standard normals; the other m - 1
    # squares enter only through their chi-square sum.
    rng = make_rng(seed)
    remaining = DEFAULT_MC_BUDGET if budget is None else int(budget)
    ref = lambda_minus if beta > -1 else lambda_plus
    n = 0
    sw = swg = sww = swgwg = swwg = 0.0
    while remaining > 0:
        k = min(remaining, _MC_CHUNK)
        remaining -= k
        top = rng.standard_normal(k) ** 2
        rest = rng.chisquare(m - 1, k)
        frac = top / (top + rest)
        psi = lambda_minus + (lambda_plus - lambda_minus) * frac
        w = (psi / ref) ** (-1.0 - beta)
        wg = w * psi
        n += k
        sw += w.sum()
        swg += wg.sum()
        sww += (w * w).sum()
        swgwg += (wg * wg).sum()
        swwg += (w * wg).sum()
    ratio = swg / sw
    resid_sq = swgwg / n - 2 * ratio * swwg / n + ratio * ratio * sww / n
    return float(ratio), float(np.sqrt(max(resid_sq, 0.0) / n) / (sw / n))


def two_point_lambda_scan(lambda_minus, lambda_plus, beta, dims, method="auto", budget=None, seed=0):
    """``Lambda`` for ``diag(l-, ..., l-, l+)`` over a list of dimensions.

    ``method="auto"`` uses quadrature for m <= 3 and the Gaussian-quotient
    Monte Carlo otherwise; each dimension gets its own derived seed.
    """
    if not 0 < lambda_minus < lambda_plus:
        raise ValueError(f"need 0 < lambda_minus < lambda_plus, got {lambda_minus}, {lambda_plus}")
    rows = []
    for m in dims:
        m = int(m)
        beta_zero(m)
        use = method
        if method == "auto":
            use = QUADRATURE if m <= 3 else MONTE_CARLO
        if use == QUADRATURE:
            # the budget is a sample count; quadrature keeps its default grid
            val, se = lambda_avg(two_point_spectrum(lambda_minus, lambda_plus, m), beta, QUADRATURE)
        elif use == MONTE_CARLO:
            val, se = _two_point_mc(lambda_minus, lambda_plus, beta, m, budget, derive_seed(seed, m))
        else:
            raise CapabilityError(f"unknown method {method!r}")
        rows.append(TwoPointRow(m=m, value=val, stderr=se, method=use))
    return rows
