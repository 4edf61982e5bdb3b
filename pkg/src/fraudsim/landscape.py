"""Morse objectives with known zero sets.

Two families are built as products of per-well factors, one per global
minimizer, so every zero is a prescribed well and gradients are closed form:

* flat torus: ``q_j(x) = sum_k a_jk (1 - cos(x_k - p_jk))`` (per-axis period
  rescaled), optionally multiplied by a smooth positive tilt that makes the
  Hessian spectra at the wells hit requested values exactly;
* Euclidean space: ``q_j(x) = <x - p_j, B_j (x - p_j)>`` with
  ``B_j = diag(curvature_j) / 2``, growing like ``|x|^(2J)`` at infinity.

Torus coordinates are reduced to the centered fundamental domain
``[-period/2, period/2)`` on every axis.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .errors import BuildError, DimensionError, VerificationError
from .spectral import Spectrum, beta_zero

SCHEMA_VERSION = 1
TWO_PI = 2 * math.pi


@dataclass(frozen=True)
class Well:
    position: tuple
    curvature: tuple

    def __post_init__(self):
        pos = tuple(float(v) for v in np.ravel(self.position))
        curv = tuple(float(v) for v in np.ravel(self.curvature))
        if len(pos) != len(curv):
            raise DimensionError(f"position has {len(pos)} coordinates but curvature has {len(curv)}")
        if any(not math.isfinite(c) or c <= 0 for c in curv):
            raise ValueError(f"curvature entries must be strictly positive: {curv}")
        if any(not math.isfinite(p) for p in pos):
            raise ValueError(f"well position must be finite: {pos}")
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "curvature", curv)

    @property
    def m(self):
        return len(self.position)


@dataclass(frozen=True)
class FlatTorus:
    period: tuple

    @property
    def kind(self):
        return K.TORUS


@dataclass(frozen=True)
class Euclidean:
    r: float
    alpha: float
    beta_range: tuple

    @property
    def kind(self):
        return K.EUCLID


@dataclass(frozen=True, eq=False)
class Landscape:
    domain: FlatTorus | Euclidean
    wells: tuple
    achieved_spectra: tuple
    coefficients: np.ndarray = field(repr=False)
    tilt: np.ndarray = field(repr=False)
    target_exact: bool = False

    @property
    def m(self):
        return self.wells[0].m

    @property
    def n_wells(self):
        return len(self.wells)

    @property
    def is_torus(self):
        return isinstance(self.domain, FlatTorus)

    @property
    def positions(self):
        return np.array([w.position for w in self.wells], dtype=float)

    @property
    def period(self):
        if self.is_torus:
            return np.array(self.domain.period, dtype=float)
        return np.ones(self.m)

    def kernel_args(self):
        """Arrays in the layout expected by the compiled kernels."""
        period = self.period
        return (self.domain.kind, self.positions, self.coefficients, self.tilt, TWO_PI / period, period)

    def reduce(self, x):
        x = np.array(x, dtype=float)
        if self.is_torus:
            p = self.period
            x = x - p * np.floor(x / p + 0.5)
        return x

    def evaluate(self, x):
        """Return ``(U(x), grad U(x))``."""
        x = self.reduce(np.asarray(x, dtype=float).reshape(self.m))
        kind, pos, coef, gamma, omega, _ = self.kernel_args()
        grad = np.empty(self.m)
        u = K.potential(kind, pos, coef, gamma, omega, x, grad, np.empty(self.n_wells), np.empty((self.n_wells, self.m)))
        return max(float(u), 0.0), grad

    def u(self, X):
        """Vectorized ``U`` over an ``(n, m)`` array."""
        X = self.reduce(np.atleast_2d(np.asarray(X, dtype=float)))
        kind, pos, coef, gamma, omega, _ = self.kernel_args()
        return np.maximum(K.potential_batch(kind, pos, coef, gamma, omega, np.ascontiguousarray(X)), 0.0)

    def grad(self, X):
        X = self.reduce(np.atleast_2d(np.asarray(X, dtype=float)))
        kind, pos, coef, gamma, omega, _ = self.kernel_args()
        return K.gradient_batch(kind, pos, coef, gamma, omega, np.ascontiguousarray(X))

    def displacement(self, x, j):
        """Shortest displacement from well ``j`` to ``x`` (wrapped on the torus)."""
        d = np.asarray(x, dtype=float) - self.positions[j]
        if self.is_torus:
            p = self.period
            d = d - p * np.floor(d / p + 0.5)
        return d

    def distance(self, x, j):
        return float(np.linalg.norm(self.displacement(x, j)))

    def distances(self, x):
        return np.array([self.distance(x, j) for j in range(self.n_wells)])

    # ----------------------------------------------------------- serialization
    def to_dict(self):
        if self.is_torus:
            dom = {"type": "flat_torus", "period": list(self.domain.period)}
        else:
            dom = {"type": "euclidean", "r": self.domain.r, "alpha": self.domain.alpha,
                   "beta_range": list(self.domain.beta_range)}
        return {
            "schema_version": SCHEMA_VERSION,
            "domain": dom,
            "target_exact": self.target_exact,
            "wells": [{"position": list(w.position), "curvature": list(w.curvature)} for w in self.wells],
            "achieved_spectra": [list(s.eigenvalues) for s in self.achieved_spectra],
        }

    def to_json(self, path=None):
        text = json.dumps(self.to_dict(), indent=2)
        if path is not None:
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(text + "\n")
        return text


def landscape_from_dict(doc):
    """Rebuild a landscape from its JSON document and cross-check the spectra."""
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ValueError(f"unsupported landscape schema_version {version!r}")
    wells = [Well(w["position"], w["curvature"]) for w in doc["wells"]]
    dom = doc["domain"]
    if dom["type"] == "flat_torus":
        land = build_torus_landscape(wells, target_exact=doc.get("target_exact", False), period=dom.get("period"))
    elif dom["type"] == "euclidean":
        land = build_euclidean_landscape(wells, beta_range=tuple(dom["beta_range"]), r=dom["r"])
    else:
        raise ValueError(f"unknown domain type {dom['type']!r}")
    stored = doc.get("achieved_spectra")
    if stored is not None:
        for j, (a, b) in enumerate(zip(stored, land.achieved_spectra)):
            if not np.allclose(a, b.eigenvalues, rtol=1e-9, atol=0):
                raise ValueError(f"stored achieved spectrum of well {j} does not match the rebuilt landscape")
    return land


def load_landscape(path):
    with open(path, encoding="utf-8") as fh:
        return landscape_from_dict(json.load(fh))


# ------------------------------------------------------------------- builders

def _check_wells(wells):
    wells = list(wells)
    if not wells:
        raise ValueError("at least one well is required")
    m = wells[0].m
    if any(w.m != m for w in wells):
        raise DimensionError("wells have mixed dimensions")
    beta_zero(m)
    return wells, m


def _grid(lo, hi, res, m):
    axes = [np.linspace(lo[k], hi[k], res, endpoint=False) + 0.5 * (hi[k] - lo[k]) / res for k in range(m)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.column_stack([g.ravel() for g in mesh]), (hi - lo) / res


def default_screen_resolution(m):
    if m == 2:
        return 512
    if m == 3:
        return 128
    return max(4, int(2e6 ** (1.0 / m)))


def _screen_zeros(land, res):
    """Abort if U vanishes on the grid away from the wells."""
    if land.is_torus:
        p = land.period
        lo, hi = -p / 2, p / 2
    else:
        r = land.domain.r
        lo, hi = np.full(land.m, -r), np.full(land.m, r)
    pts, h = _grid(lo, hi, res, land.m)
    u = land.u(pts)
    excl = 1.5 * float(np.linalg.norm(h))
    near = np.zeros(len(pts), dtype=bool)
    for j in range(land.n_wells):
        d = pts - land.positions[j]
        if land.is_torus:
            d = d - land.period * np.floor(d / land.period + 0.5)
        near |= np.einsum("ij,ij->i", d, d) < excl * excl
    off = ~near
    if not np.any(off):
        return math.inf, None
    idx = np.flatnonzero(off)[np.argmin(u[off])]
    return float(u[idx]), pts[idx]


def _torus_factor(a, p, omega, x):
    d = x - p
    return float(np.sum(a * 2.0 * np.sin(0.5 * omega * d) ** 2 / omega**2))


def _torus_bump(p, omega, x):
    d = x - p
    return math.exp(-float(np.sum(2.0 * np.sin(0.5 * omega * d) ** 2)))


def build_torus_landscape(wells, target_exact=False, period=None, screen_resolution=None, max_iter=100):
    """Product-of-wells objective on the flat torus.

    Without ``target_exact`` the achieved Hessian at well ``j`` is
    ``prod_{i != j} q_i(p_j) * diag(curvature_j)``. With it, a positive tilt
    ``exp(sum_i gamma_i phi_i)`` (von Mises bumps centred at the wells) is
    solved for so the achieved spectra equal the requested curvatures; the
    linear solve is refined until the relative residual is below 1e-12.
    """
    wells, m = _check_wells(wells)
    period = np.full(m, TWO_PI) if period is None else np.asarray(period, dtype=float).reshape(m)
    if np.any(period <= 0):
        raise ValueError("torus period must be positive")
    omega = TWO_PI / period
    red = []
    for w in wells:
        x = np.array(w.position)
        red.append(Well(x - period * np.floor(x / period + 0.5), w.curvature))
    wells = red
    J = len(wells)
    pos = np.array([w.position for w in wells])
    coef = np.array([w.curvature for w in wells])
    for i in range(J):
        for j in range(i + 1, J):
            d = pos[i] - pos[j]
            d = d - period * np.floor(d / period + 0.5)
            if np.linalg.norm(d) < 1e-9:
                raise ValueError(f"wells {i} and {j} coincide on the torus")
    # cross[i, j] = q_i(p_j)
    cross = np.ones((J, J))
    for i in range(J):
        for j in range(J):
            if i != j:
                cross[i, j] = _torus_factor(coef[i], pos[i], omega, pos[j])
    others = np.array([np.prod(np.delete(cross[:, j], j)) for j in range(J)])
    gamma = np.zeros(J)
    if target_exact and J > 1:
        target_logw = -np.log(others)
        bump = np.array([[_torus_bump(pos[i], omega, pos[j]) for i in range(J)] for j in range(J)])
        residual = target_logw.copy()
        for _ in range(max_iter):
            gamma = gamma + np.linalg.solve(bump, residual)
            residual = target_logw - bump @ gamma
            if np.max(np.abs(residual)) < 1e-13:
                break
        rel = np.max(np.abs(np.expm1(residual)))
        if not np.isfinite(rel) or rel > 1e-10:
            raise BuildError(f"tilt solve did not converge: relative spectrum residual {rel:.3e}")
    land = Landscape(
        domain=FlatTorus(tuple(float(v) for v in period)),
        wells=tuple(wells),
        achieved_spectra=(),
        coefficients=coef,
        tilt=gamma,
        target_exact=bool(target_exact),
    )
    spectra = []
    for j in range(J):
        if target_exact:
            scale = math.exp(float(sum(gamma[i] * _torus_bump(pos[i], omega, pos[j]) for i in range(J)))) * others[j]
        else:
            scale = others[j]
        spectra.append(Spectrum(scale * coef[j]))
    object.__setattr__(land, "achieved_spectra", tuple(spectra))
    res = default_screen_resolution(m) if screen_resolution is None else int(screen_resolution)
    if res > 0:
        umin, witness = _screen_zeros(land, res)
        if not umin > 0:
            raise BuildError(f"spurious zero of U at {witness.tolist()}")
    return land


def confinement_margin(land, beta, x):
    """``-(2 beta0 U - beta <grad U, x>) / |x|^2`` row-wise; positive means confined."""
    X = np.atleast_2d(np.asarray(x, dtype=float))
    u = land.u(X)
    g = land.grad(X)
    b0 = beta_zero(land.m)
    return -(2 * b0 * u - beta * np.einsum("ij,ij->i", g, X)) / np.einsum("ij,ij->i", X, X)


def shell_points(m, n=None):
    """Deterministic points on S^(m-1) used for the confinement check."""
    if m == 2:
        n = 720 if n is None else n
        t = TWO_PI * np.arange(n) / n
        return np.column_stack([np.cos(t), np.sin(t)])
    n = 2000 if n is None else n
    if m == 3:
        i = np.arange(n) + 0.5
        z = 1 - 2 * i / n
        phi = math.pi * (3 - math.sqrt(5)) * i
        s = np.sqrt(1 - z * z)
        return np.column_stack([s * np.cos(phi), s * np.sin(phi), z])
    x = np.random.default_rng(12345).standard_normal((n, m))
    return x / np.linalg.norm(x, axis=1, keepdims=True)


SHELL_FACTORS = (1.0, 1.1, 1.25, 1.5, 2.0, 3.0, 5.0, 7.5, 10.0)


def confinement_report(land, beta_range, r=None):
    """Minimal margin per shell radius over the beta interval endpoints.

    The margin is affine in beta, so checking the endpoints covers the range.
    Returns a list of ``(radius, margin, witness_point, witness_beta)``.
    """
    r = land.domain.r if r is None else r
    dirs = shell_points(land.m)
    rows = []
    for f in SHELL_FACTORS:
        X = f * r * dirs
        best = (math.inf, None, None)
        for b in beta_range:
            marg = confinement_margin(land, b, X)
            i = int(np.argmin(marg))
            if marg[i] < best[0]:
                best = (float(marg[i]), X[i], b)
        rows.append((f * r, best[0], best[1], best[2]))
    return rows


def build_euclidean_landscape(wells, beta_range=None, r=None, screen_resolution=None):
    """Product-of-quadratics objective on R^m with a verified confinement radius.

    ``r`` defaults to ``2 * max|p_j| + 1``. The confinement rate ``alpha`` is
    the smallest margin found over the shells ``r * SHELL_FACTORS`` (out to the
    simulation cap ``10 r``) and the two ends of ``beta_range``.
    """
    wells, m = _check_wells(wells)
    b0 = beta_zero(m)
    beta_range = (b0 + 0.5, b0 + 3.0) if beta_range is None else tuple(float(b) for b in beta_range)
    if len(beta_range) != 2 or beta_range[0] > beta_range[1]:
        raise ValueError(f"beta_range must be an ordered pair, got {beta_range}")
    J = len(wells)
    pos = np.array([w.position for w in wells])
    coef = np.array([w.curvature for w in wells])
    for i in range(J):
        for j in range(i + 1, J):
            if np.linalg.norm(pos[i] - pos[j]) < 1e-9:
                raise ValueError(f"wells {i} and {j} coincide")
    if r is None:
        r = 2.0 * float(np.max(np.linalg.norm(pos, axis=1))) + 1.0
    r = float(r)
    if not r > 0:
        raise ValueError("confinement radius must be positive")
    cross = np.ones((J, J))
    for i in range(J):
        for j in range(J):
            if i != j:
                d = pos[j] - pos[i]
                cross[i, j] = float(np.sum(0.5 * coef[i] * d * d))
    spectra = tuple(Spectrum(np.prod(np.delete(cross[:, j], j)) * coef[j]) for j in range(J))
    land = Landscape(
        domain=Euclidean(r=r, alpha=0.0, beta_range=beta_range),
        wells=tuple(wells),
        achieved_spectra=spectra,
        coefficients=coef,
        tilt=np.zeros(J),
    )
    rows = confinement_report(land, beta_range, r)
    alpha, witness, wb = min(((row[1], row[2], row[3]) for row in rows), key=lambda t: t[0])
    if not alpha > 0:
        raise BuildError(
            f"confinement condition fails at shell point {np.round(witness, 6).tolist()} "
            f"(|x| = {np.linalg.norm(witness):.4g}, beta = {wb}): margin {alpha:.4g}"
        )
    object.__setattr__(land, "domain", Euclidean(r=r, alpha=float(alpha), beta_range=beta_range))
    res = default_screen_resolution(m) if screen_resolution is None else int(screen_resolution)
    if res > 0:
        umin, w = _screen_zeros(land, res)
        if not umin > 0:
            raise BuildError(f"spurious zero of U at {w.tolist()}")
    return land


# --------------------------------------------------------------- verification

def fd_hessian(land, x, h=1e-4):
    """Hessian of U at ``x`` from second differences of U values only."""
    x = np.asarray(x, dtype=float)
    m = x.size
    H = np.empty((m, m))
    e = np.eye(m) * h
    u0 = land.evaluate(x)[0]
    for k in range(m):
        H[k, k] = (land.evaluate(x + e[k])[0] - 2 * u0 + land.evaluate(x - e[k])[0]) / h**2
        for l in range(k + 1, m):
            v = (land.evaluate(x + e[k] + e[l])[0] - land.evaluate(x + e[k] - e[l])[0]
                 - land.evaluate(x - e[k] + e[l])[0] + land.evaluate(x - e[k] - e[l])[0]) / (4 * h * h)
            H[k, l] = H[l, k] = v
    return H


@dataclass
class VerificationReport:
    min_u_off_wells: float
    min_u_witness: list
    well_spectra_fd: list
    spectrum_rel_err: list
    confinement: list = field(default_factory=list)
    passed: bool = True

    def rows(self):
        out = [("min_u_off_wells", self.min_u_off_wells, self.min_u_off_wells > 0)]
        for j, err in enumerate(self.spectrum_rel_err):
            out.append((f"well{j}_min_fd_eigenvalue", float(min(self.well_spectra_fd[j])), min(self.well_spectra_fd[j]) > 0))
            out.append((f"well{j}_spectrum_rel_err", err, err < 1e-6))
        for radius, margin in self.confinement:
            out.append((f"confinement_margin_r={radius:.6g}", margin, margin > 0))
        return out


def verify_landscape(land, grid_resolution, beta_range=None):
    """Grid positivity, per-well Hessian spectra and (Euclidean) confinement."""
    if int(grid_resolution) <= 0:
        raise ValueError(f"grid_resolution must be positive, got {grid_resolution}")
    umin, witness = _screen_zeros(land, int(grid_resolution))
    if not umin > 0:
        raise VerificationError(f"U vanishes away from the wells at {witness.tolist()}", witness)
    fd_spectra = []
    errs = []
    for j, w in enumerate(land.wells):
        H = fd_hessian(land, np.array(w.position))
        ev = np.sort(np.linalg.eigvalsh(0.5 * (H + H.T)))
        fd_spectra.append(ev.tolist())
        if ev[0] <= 0:
            raise VerificationError(f"Hessian at well {j} is not positive definite: {ev.tolist()}", list(w.position))
        target = np.array(land.achieved_spectra[j].eigenvalues)
        errs.append(float(np.max(np.abs(ev - target) / target)))
    conf = []
    if not land.is_torus:
        lo, hi = land.domain.beta_range
        if beta_range is None:
            beta_range = (lo, hi)
        beta_range = tuple(float(b) for b in beta_range)
        if beta_range[0] < lo or beta_range[1] > hi:
            raise VerificationError(
                f"beta range {beta_range} lies outside the verified confinement range {(lo, hi)}", None
            )
        for radius, margin, pt, _ in confinement_report(land, beta_range):
            conf.append((radius, margin))
            if not margin > 0:
                raise VerificationError(f"confinement fails on shell |x| = {radius:.4g}", pt.tolist())
    return VerificationReport(
        min_u_off_wells=umin,
        min_u_witness=None if witness is None else witness.tolist(),
        well_spectra_fd=fd_spectra,
        spectrum_rel_err=errs,
        confinement=conf,
    )
