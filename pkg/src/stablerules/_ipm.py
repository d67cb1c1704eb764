"""Primal-dual interior point solver for linear SVM-type problems.

Solves

    min_{theta, xi}  0.5 * ||theta[:-1]||^2 + c^T xi
    s.t.             A theta + xi >= h,   xi >= 0

where ``theta = (beta, b)`` and the intercept is unregularized. Both the
weighted hinge SVM and the epsilon-insensitive SVR have this form. The
slack blocks are diagonal, so every Newton system collapses to a
(p+1) x (p+1) solve and an iteration costs O(m p^2). Steps follow
Mehrotra's predictor-corrector scheme.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List

import numpy as np


@dataclass
class QPSolution:
    theta: np.ndarray
    objective: float
    iterations: int
    converged: bool
    history: List[float] = field(default_factory=list)


def primal_value(theta, A, h, c) -> float:
    beta = theta[:-1]
    return 0.5 * float(beta @ beta) + float(c @ np.maximum(h - A @ theta, 0.0))


def _max_step(v, dv):
    neg = dv < 0
    if not neg.any():
        return np.inf
    return float(np.min(-v[neg] / dv[neg]))


STALL_RESID = 1e-6


def solve(A, h, c, tol=1e-10, max_iter=200) -> QPSolution:
    A = np.asarray(A, dtype=float)
    h = np.asarray(h, dtype=float)
    c = np.asarray(c, dtype=float)
    d = A.shape[1]
    active = c > 0
    # zero-cost constraints can always be met by their slack
    A, h, c = A[active], h[active], c[active]
    m = len(h)
    Hdiag = np.ones(d)
    Hdiag[-1] = 0.0
    theta = np.zeros(d)
    if m == 0:
        return QPSolution(theta, 0.0, 0, True, [0.0])

    xi = np.maximum(h, 0.0) + 1.0
    s = A @ theta + xi - h
    lam = c / 2.0
    mu = c / 2.0
    scale = max(1.0, float(np.abs(h).max()), float(c.max()))
    best = primal_value(theta, A, h, c)
    history = [best]
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        r1 = Hdiag * theta - A.T @ lam
        r2 = c - lam - mu
        r3 = A @ theta + xi - s - h
        nu = (s @ lam + xi @ mu) / (2 * m)
        resid = max(np.abs(r1).max(), np.abs(r2).max(), np.abs(r3).max())
        # the residual floors near the precision of the normal-equation solve;
        # once the gap is closed a residual below STALL_RESID counts as converged
        if nu < tol * scale and resid < max(tol * 10, STALL_RESID) * scale:
            converged = True
            break
        D = xi / mu + s / lam
        M = np.diag(Hdiag) + (A / D[:, None]).T @ A
        # tiny regularization keeps M positive definite when all slacks are free
        M[np.diag_indices(d)] += 1e-14 * max(1.0, np.trace(M) / d)
        L = np.linalg.cholesky(M)

        def newton(r4, r5):
            q = -r3 + (r5 + xi * r2) / mu - r4 / lam
            rhs = -r1 + A.T @ (q / D)
            dtheta = np.linalg.solve(L.T, np.linalg.solve(L, rhs))
            dlam = (q - A @ dtheta) / D
            dmu = r2 - dlam
            ds = (-r4 - s * dlam) / lam
            dxi = (-r5 - xi * dmu) / mu
            return dtheta, dlam, dmu, ds, dxi

        aff = newton(s * lam, xi * mu)
        _, dlam_a, dmu_a, ds_a, dxi_a = aff
        alpha = min(1.0, _max_step(s, ds_a), _max_step(xi, dxi_a), _max_step(lam, dlam_a), _max_step(mu, dmu_a))
        nu_aff = ((s + alpha * ds_a) @ (lam + alpha * dlam_a) + (xi + alpha * dxi_a) @ (mu + alpha * dmu_a)) / (2 * m)
        sigma = (nu_aff / nu) ** 3
        dtheta, dlam, dmu, ds, dxi = newton(s * lam + ds_a * dlam_a - sigma * nu,
                                            xi * mu + dxi_a * dmu_a - sigma * nu)
        alpha = min(1.0, 0.995 * min(_max_step(s, ds), _max_step(xi, dxi), _max_step(lam, dlam), _max_step(mu, dmu)))
        step = [v + alpha * dv for v, dv in ((theta, dtheta), (lam, dlam), (mu, dmu), (s, ds), (xi, dxi))]
        if not all(np.all(np.isfinite(v)) for v in step) or min(v.min() for v in step[1:]) <= 0:
            break
        theta, lam, mu, s, xi = step
        # report best feasible primal value seen so far (monotone by construction)
        best = min(best, primal_value(theta, A, h, c))
        history.append(best)
    return QPSolution(theta, primal_value(theta, A, h, c), it, converged, history)
