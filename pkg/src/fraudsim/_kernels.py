"""Compiled inner loops: potential evaluation and the two integrators.

Landscapes are passed as flat arrays so the same kernels serve both domains:

    kind   TORUS or EUCLID
    pos    (J, m) well positions
    coef   (J, m) per-well diagonal coefficients
    gamma  (J,)   tilt weights (torus only; zeros mean no tilt)
    omega  (m,)   angular frequency 2 pi / period per axis (torus only)
    period (m,)   torus period per axis

Torus factor:  q_j(x) = sum_k a_jk (2 / w_k^2) sin^2(w_k (x_k - p_jk) / 2)
Euclid factor: q_j(x) = sum_k (c_jk / 2) (x_k - p_jk)^2
U(x) = exp(sum_i gamma_i phi_i(x)) * prod_j q_j(x),
phi_i(x) = exp(-sum_k 2 sin^2(w_k (x_k - p_ik) / 2)).

The half-angle sine form keeps 1 - cos accurate for tiny displacements.
"""
import math

import numpy as np
from numba import njit

TORUS = 0
EUCLID = 1

RUNNING = 0
CAPPED = -1
NONFINITE = -2


@njit(cache=True, nogil=True)
def potential(kind, pos, coef, gamma, omega, x, grad, q, dq):
    J, m = pos.shape
    for j in range(J):
        s = 0.0
        for k in range(m):
            d = x[k] - pos[j, k]
            if kind == TORUS:
                w = omega[k]
                sh = math.sin(0.5 * w * d)
                s += coef[j, k] * 2.0 * sh * sh / (w * w)
                dq[j, k] = coef[j, k] * math.sin(w * d) / w
            else:
                s += 0.5 * coef[j, k] * d * d
                dq[j, k] = coef[j, k] * d
        q[j] = s
    prod = 1.0
    for j in range(J):
        prod *= q[j]
    for k in range(m):
        grad[k] = 0.0
    for j in range(J):
        others = 1.0
        for i in range(J):
            if i != j:
                others *= q[i]
        for k in range(m):
            grad[k] += dq[j, k] * others
    if kind == TORUS:
        logw = 0.0
        tilted = False
        for i in range(J):
            if gamma[i] != 0.0:
                tilted = True
        if tilted:
            for i in range(J):
                e = 0.0
                for k in range(m):
                    sh = math.sin(0.5 * omega[k] * (x[k] - pos[i, k]))
                    e -= 2.0 * sh * sh
                phi = math.exp(e)
                logw += gamma[i] * phi
                for k in range(m):
                    # d phi / d x_k = -w_k sin(w_k d) phi, accumulated into grad via Q
                    dq[i, k] = -gamma[i] * phi * omega[k] * math.sin(omega[k] * (x[k] - pos[i, k]))
            wt = math.exp(logw)
            for k in range(m):
                dl = 0.0
                for i in range(J):
                    dl += dq[i, k]
                grad[k] = wt * (grad[k] + prod * dl)
            prod *= wt
    return prod


@njit(cache=True, nogil=True)
def dist2(kind, pos, period, x, j):
    m = x.shape[0]
    s = 0.0
    for k in range(m):
        d = x[k] - pos[j, k]
        if kind == TORUS:
            d -= period[k] * math.floor(d / period[k] + 0.5)
        s += d * d
    return s


@njit(cache=True, nogil=True)
def potential_batch(kind, pos, coef, gamma, omega, X):
    n, m = X.shape
    J = pos.shape[0]
    out = np.empty(n)
    grad = np.empty(m)
    q = np.empty(J)
    dq = np.empty((J, m))
    for i in range(n):
        out[i] = potential(kind, pos, coef, gamma, omega, X[i], grad, q, dq)
    return out


@njit(cache=True, nogil=True)
def gradient_batch(kind, pos, coef, gamma, omega, X):
    n, m = X.shape
    J = pos.shape[0]
    out = np.empty((n, m))
    grad = np.empty(m)
    q = np.empty(J)
    dq = np.empty((J, m))
    for i in range(n):
        potential(kind, pos, coef, gamma, omega, X[i], grad, q, dq)
        for k in range(m):
            out[i, k] = grad[k]
    return out


@njit(cache=True, nogil=True)
def em_chunk(kind, pos, coef, gamma, omega, period, beta, dt, x, noise, step0, stride,
             floor2, cap2, entry2, rec_t, rec_x, rec_u, rec_logd, rec_n,
             occ, occ_bins, occ_lo, occ_width, occ_from, entry_step):
    """Advance ``x`` in place over ``noise.shape[0]`` Euler-Maruyama steps.

    Returns ``(status, steps_taken)`` with status RUNNING, CAPPED, NONFINITE
    or ``j + 1`` when the path came within the floor distance of well ``j``.
    """
    n, m = noise.shape
    J = pos.shape[0]
    grad = np.empty(m)
    q = np.empty(J)
    dq = np.empty((J, m))
    d2 = np.empty(J)
    for i in range(n):
        u = potential(kind, pos, coef, gamma, omega, x, grad, q, dq)
        amp = math.sqrt(2.0 * max(u, 0.0) * dt)
        for k in range(m):
            x[k] = x[k] - beta * grad[k] * dt + amp * noise[i, k]
        if kind == TORUS:
            for k in range(m):
                x[k] -= period[k] * math.floor(x[k] / period[k] + 0.5)
        step = step0 + i + 1
        for k in range(m):
            if not math.isfinite(x[k]):
                return NONFINITE, i + 1
        for j in range(J):
            d2[j] = dist2(kind, pos, period, x, j)
            if d2[j] < floor2:
                return j + 1, i + 1
        if kind == EUCLID:
            r2 = 0.0
            for k in range(m):
                r2 += x[k] * x[k]
            if entry_step[0] < 0 and r2 <= entry2:
                entry_step[0] = step
            if r2 > cap2:
                return CAPPED, i + 1
        if occ_bins > 0 and step >= occ_from:
            idx = 0
            inside = True
            for k in range(m):
                b = int(math.floor((x[k] - occ_lo[k]) / occ_width[k]))
                if b < 0 or b >= occ_bins:
                    inside = False
                    break
                idx = idx * occ_bins + b
            if inside:
                occ[idx] += 1
        if step % stride == 0:
            r = rec_n[0]
            if r < rec_t.shape[0]:
                rec_t[r] = step * dt
                for k in range(m):
                    rec_x[r, k] = x[k]
                rec_u[r] = potential(kind, pos, coef, gamma, omega, x, grad, q, dq)
                for j in range(J):
                    rec_logd[r, j] = 0.5 * math.log(d2[j])
                rec_n[0] = r + 1
    return RUNNING, n


@njit(cache=True, nogil=True)
def sphere_chunk(lam, beta, dt, theta, noise, step0, stride, sums, rec_t, rec_theta, rec_avg, rec_n):
    """Projected Euler steps of the angular diffusion with renormalization.

    ``sums`` accumulates the post-step values of <theta, A theta> and phi_A.
    """
    n, m = noise.shape
    at = np.empty(m)
    sdt = math.sqrt(dt)
    for i in range(n):
        psi = 0.0
        for k in range(m):
            at[k] = lam[k] * theta[k]
            psi += theta[k] * at[k]
        xi_dot = 0.0
        for k in range(m):
            xi_dot += noise[i, k] * theta[k]
        amp = math.sqrt(psi) * sdt
        nrm = 0.0
        for k in range(m):
            drift = -beta * (at[k] - psi * theta[k]) * dt
            tang = noise[i, k] - xi_dot * theta[k]
            theta[k] = theta[k] + drift + amp * tang
            nrm += theta[k] * theta[k]
        nrm = math.sqrt(nrm)
        psi = 0.0
        psi2 = 0.0
        for k in range(m):
            theta[k] /= nrm
            t2 = theta[k] * theta[k]
            psi += lam[k] * t2
            psi2 += lam[k] * lam[k] * t2
        sums[0] += psi
        sums[1] += psi2 / psi
        step = step0 + i + 1
        if step % stride == 0:
            r = rec_n[0]
            if r < rec_t.shape[0]:
                rec_t[r] = step * dt
                for k in range(m):
                    rec_theta[r, k] = theta[k]
                rec_avg[r, 0] = sums[0] / step
                rec_avg[r, 1] = sums[1] / step
                rec_n[0] = r + 1
