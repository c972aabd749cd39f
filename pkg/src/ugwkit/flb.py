"""Eccentricity-profile matching, used as a cheap warm start for solve_ugw.

Every point is summarized by its average distance to the rest of its space
(against the normalized weights). Matching the two resulting 1-D profiles is
a plain unbalanced OT problem with squared-difference cost; its plan makes a
good initialization for the quadratic solver because points with similar
aggregated-distance signatures tend to correspond.
"""

from __future__ import annotations

import numpy as np

from .sinkhorn import uot_sinkhorn

__all__ = ["eccentricity", "solve_flb"]


def eccentricity(D, weights):
    """e_i = sum_j D_ij w_j / m(w): weight-averaged distance from each point."""
    D = np.asarray(D, dtype=float)
    w = np.asarray(weights, dtype=float)
    return D @ (w / w.sum())


def solve_flb(X, Y, rho, eps=1e-2, tol_pot=1e-6, max_inner=3000):
    """Unbalanced OT between eccentricity profiles, squared-difference cost.

    rho may be a scalar or a (rho1, rho2) pair; math.inf selects the
    balanced (hard-constraint) update on that side.
    """
    ex = eccentricity(X.dist, X.weights)
    ey = eccentricity(Y.dist, Y.weights)
    cost = (ex[:, None] - ey[None, :]) ** 2
    rho1, rho2 = rho if isinstance(rho, (tuple, list)) else (rho, rho)
    return uot_sinkhorn(
        cost,
        X.weights,
        Y.weights,
        rho1,
        rho2,
        eps=eps,
        tol_pot=tol_pot,
        max_inner=max_inner,
    )
