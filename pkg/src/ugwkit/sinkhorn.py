"""Log-domain stabilized unbalanced Sinkhorn iterations.

Solves the entropic unbalanced OT problem

    min_pi  <cost, pi> + rho1 KL(pi_1|mu) + rho2 KL(pi_2|nu) + eps KL(pi|mu (x) nu)

by alternating the potential updates

    f_i <- -(eps rho1 / (eps + rho1)) LSE_j[ (g_j - c_ij)/eps + log nu_j ]
    g_j <- -(eps rho2 / (eps + rho2)) LSE_i[ (f_i - c_ij)/eps + log mu_i ]

where LSE is the max-shifted log-sum-exp. rho = inf is the balanced mode: the
damping factor rho/(eps + rho) becomes 1. The plan is recovered as
pi_ij = exp((f_i + g_j - c_ij)/eps) mu_i nu_j.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .measures import TransportPlan

__all__ = ["Potentials", "SinkhornResult", "logsumexp", "uot_sinkhorn", "plan_from_potentials"]


@dataclass(frozen=True)
class Potentials:
    f: np.ndarray
    g: np.ndarray


@dataclass(frozen=True)
class SinkhornResult:
    potentials: Potentials
    plan: TransportPlan
    iterations: int
    converged: bool
    residual: float


def logsumexp(a, axis):
    """Max-shifted log-sum-exp reduction along ``axis``.

    log(sum exp(a))  computed as  log(sum exp(a - max)) + max, so entries as
    low as -1e9 cause no underflow issue. Rows that are entirely -inf reduce
    to -inf without producing NaN.
    """
    a = np.asarray(a, dtype=float)
    m = np.max(a, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore"):
        out = np.log(np.sum(np.exp(a - m), axis=axis)) + np.squeeze(m, axis=axis)
    return out


def _damping(rho, eps):
    # prefactor eps * rho / (eps + rho); -> eps in the balanced limit rho = inf
    if math.isinf(rho):
        return eps
    return eps * rho / (eps + rho)


def uot_sinkhorn(
    cost,
    mu,
    nu,
    rho1,
    rho2=None,
    eps=1e-2,
    init=None,
    tol_pot=1e-6,
    max_inner=3000,
):
    """Run the f/g updates to a fixed point; returns a SinkhornResult.

    rho2 defaults to rho1. ``init`` warm-starts the potentials (default 0).
    Stops when the sup-norm change of f drops to tol_pot or the cap is hit
    (the result is then flagged, not an error). rho=inf on either side is the
    balanced mode for that marginal.
    """
    cost = np.asarray(cost, dtype=float)
    mu = np.asarray(mu, dtype=float)
    nu = np.asarray(nu, dtype=float)
    if rho2 is None:
        rho2 = rho1
    if not eps > 0:
        raise ValueError("eps must be positive")
    if rho1 < 0 or rho2 < 0:
        raise ValueError("rho must be nonnegative")
    if not np.all(np.isfinite(cost)):
        raise ValueError("cost must be finite")
    if np.any(mu <= 0) or np.any(nu <= 0):
        raise ValueError("mu and nu must be strictly positive")
    n, m = cost.shape
    if mu.shape != (n,) or nu.shape != (m,):
        raise ValueError("marginal sizes do not match the cost matrix")

    log_mu = np.log(mu)
    log_nu = np.log(nu)
    fact1 = _damping(rho1, eps)
    fact2 = _damping(rho2, eps)

    if init is None:
        f = np.zeros(n)
        g = np.zeros(m)
    else:
        f = np.array(init.f, dtype=float, copy=True)
        g = np.array(init.g, dtype=float, copy=True)

    converged = False
    residual = math.inf
    it = 0
    for it in range(1, max_inner + 1):
        f_prev = f
        f = -fact1 * logsumexp((g[None, :] - cost) / eps + log_nu[None, :], axis=1)
        g = -fact2 * logsumexp((f[:, None] - cost) / eps + log_mu[:, None], axis=0)
        if not (np.all(np.isfinite(f)) and np.all(np.isfinite(g))):
            raise FloatingPointError(
                "non-finite potential: cost scale is too large for this eps"
            )
        residual = float(np.max(np.abs(f - f_prev)))
        if residual <= tol_pot:
            converged = True
            break

    plan = plan_from_potentials(f, g, cost, eps, mu, nu)
    return SinkhornResult(Potentials(f, g), plan, it, converged, residual)


def plan_from_potentials(f, g, cost, eps, mu, nu):
    """pi_ij = exp((f_i + g_j - c_ij)/eps) mu_i nu_j as a TransportPlan."""
    f = np.asarray(f, dtype=float)
    g = np.asarray(g, dtype=float)
    cost = np.asarray(cost, dtype=float)
    mu = np.asarray(mu, dtype=float)
    nu = np.asarray(nu, dtype=float)
    with np.errstate(over="raise"):
        try:
            values = np.exp(
                (f[:, None] + g[None, :] - cost) / eps
                + np.log(mu)[:, None]
                + np.log(nu)[None, :]
            )
        except FloatingPointError as exc:
            raise FloatingPointError(
                "plan overflow: potentials do not match this eps scale"
            ) from exc
    return TransportPlan(values)
