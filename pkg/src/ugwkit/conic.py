"""Cones over metric spaces: distances, dilations, lifts, and the grid solver.

A cone point is a base point plus a radius; all radius-0 points are glued
into a single apex. Distances on the cone come from the perspective
transform of an entropy function,

    H_c(r, s) = inf_{theta >= 0} theta * (c + rho psi(r/theta) + rho psi(s/theta)),

with the base distance entering through a setting-specific map lambda.
Three settings are wired: Gaussian-Hellinger (KL, lambda(t) = t^2,
p = q = 2), Hellinger-Kantorovich (KL, lambda(t) = -log cos^2(t /\\ pi/2),
p = q = 2), and partial-TV (TV, lambda(t) = t^q, p = 1).

The quadratic matching problem compares two spaces through plans on the
product of their cones: the energy H(alpha) double-sums the cone cost over
atom pairs, where the pair of pairs ((x, x'), (y, y')) contributes the cone
distance between ([d_X(x, x'), r r'], [d_Y(y, y'), s s']). The solver
restricts radii to a uniform grid on [0, R], R^2 = m(mu)^2 + m(nu)^2, and
alternates linear programs on the frozen-cost contraction, from random
product-form and permutation-lift initializations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .lp import LpProblem, solve_lp
from .measures import EntropySpec, TransportPlan

__all__ = [
    "ConeMetricSpec",
    "ConePoint",
    "ConicPlan",
    "CgwResult",
    "perspective_H",
    "cone_cost",
    "cone_dist",
    "dilate",
    "conic_lift",
    "conic_energy",
    "conic_local_cost",
    "up_residual",
    "solve_cgw",
]

_SETTINGS = {
    # setting -> (divergence kind, p, default q)
    "gh": ("kl", 2.0, 2.0),
    "hk": ("kl", 2.0, 2.0),
    "ptv": ("tv", 1.0, 2.0),
}

_ALIASES = {
    "gaussianhellinger": "gh",
    "gaussian_hellinger": "gh",
    "hellingerkantorovich": "hk",
    "hellinger_kantorovich": "hk",
    "partialtv": "ptv",
    "partial_tv": "ptv",
}


@dataclass(frozen=True)
class ConeMetricSpec:
    """Cone distance setting: divergence, base-distance map, exponents.

    ``gh_literal`` switches the Gaussian-Hellinger exponent from the
    quadratic base map exp(-d^2/(2 rho)) to the plain exp(-d/(2 rho)); both
    variants agree at rho = 1 only on d in {0, 1}. The quadratic map is the
    one used by the matching solver.
    """

    setting: str = "gh"
    rho: float = 1.0
    q: float = 2.0
    gh_literal: bool = False

    def __post_init__(self):
        key = _ALIASES.get(self.setting.lower(), self.setting.lower())
        if key not in _SETTINGS:
            raise ValueError(f"unknown cone setting {self.setting!r}")
        object.__setattr__(self, "setting", key)
        if not self.rho > 0:
            raise ValueError("rho must be positive")
        if key != "ptv":
            object.__setattr__(self, "q", _SETTINGS[key][2])
        elif not self.q >= 1:
            raise ValueError("ptv requires q >= 1")

    @property
    def p(self):
        return _SETTINGS[self.setting][1]

    @property
    def entropy(self):
        return EntropySpec(_SETTINGS[self.setting][0], self.rho)


@dataclass(frozen=True)
class ConePoint:
    """Base reference (index or base-space value) plus a radius."""

    base: float
    r: float

    def __post_init__(self):
        if not self.r >= 0:
            raise ValueError("radius must be nonnegative")

    def __eq__(self, other):
        if not isinstance(other, ConePoint):
            return NotImplemented
        if self.r == 0 and other.r == 0:
            return True  # every zero-radius point is the apex
        return self.r == other.r and self.base == other.base


def perspective_H(c, r, s, entropy, method="closed"):
    """H_c(r, s), the perspective infimum over the joint scale theta.

    method="closed" uses the KL/TV closed forms; method="grid" minimizes on
    a log grid of theta with golden-section refinement (KL and TV only).
    The balanced entropy forces theta = r = s.
    """
    if not c >= 0:
        raise ValueError("c must be nonnegative")
    if r < 0 or s < 0:
        raise ValueError("masses must be nonnegative")
    rho = entropy.rho
    if entropy.kind == "balanced":
        if r == s:
            return r * c
        return math.inf
    if method == "closed":
        if entropy.kind == "kl":
            damp = math.exp(-c / (2.0 * rho)) if math.isfinite(c) else 0.0
            return rho * (r + s - 2.0 * math.sqrt(r * s) * damp)
        # tv
        return rho * (r + s - min(r, s) * max(0.0, 2.0 - c / rho))
    if method != "grid":
        raise ValueError("method must be 'closed' or 'grid'")

    scale = max(r, s)
    if scale == 0.0:
        return 0.0

    def objective(theta):
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            val = theta * c + rho * theta * (
                entropy.psi(r / theta) + entropy.psi(s / theta)
            )
        return float(val) if np.isfinite(val) else math.inf

    best_val = rho * entropy.psi_recession * (r + s)  # theta -> 0 limit
    thetas = scale * np.logspace(-9, 3, 1201)
    vals = np.array([objective(t) for t in thetas])
    i = int(np.argmin(vals))
    if vals[i] < best_val:
        best_val = vals[i]
        lo = thetas[max(i - 1, 0)]
        hi = thetas[min(i + 1, thetas.size - 1)]
        invphi = (math.sqrt(5.0) - 1.0) / 2.0
        a, b = lo, hi
        x1 = b - invphi * (b - a)
        x2 = a + invphi * (b - a)
        f1, f2 = objective(x1), objective(x2)
        for _ in range(120):
            if f1 <= f2:
                b, x2, f2 = x2, x1, f1
                x1 = b - invphi * (b - a)
                f1 = objective(x1)
            else:
                a, x1, f1 = x1, x2, f2
                x2 = a + invphi * (b - a)
                f2 = objective(x2)
        best_val = min(best_val, f1, f2)
    return best_val


def _kernel(spec, base):
    """The multiplicative damping exp(-lambda(base)/(2 rho)) of KL settings."""
    base = np.asarray(base, dtype=float)
    if spec.setting == "gh":
        lam = base if spec.gh_literal else base * base
        return np.exp(-lam / (2.0 * spec.rho))
    if spec.setting == "hk":
        return np.cos(np.minimum(base, math.pi / 2.0)) ** (1.0 / spec.rho)
    raise ValueError("no exponential kernel for the TV setting")


def cone_cost(spec, base, r, s):
    """D_Co^q between cone points of radii r, s over base distance ``base``.

    Vectorized over numpy-broadcastable arguments. For pairs of product
    atoms pass radius products as r and s.
    """
    base = np.asarray(base, dtype=float)
    r = np.asarray(r, dtype=float)
    s = np.asarray(s, dtype=float)
    rho = spec.rho
    if spec.setting in ("gh", "hk"):
        out = rho * (r * r + s * s - 2.0 * r * s * _kernel(spec, base))
    else:
        hinge = np.clip(2.0 - base**spec.q / rho, 0.0, None)
        out = rho * (r + s - np.minimum(r, s) * hinge)
    return np.maximum(out, 0.0)


def cone_dist(spec, a, b, base_distance):
    """D_Co(a, b)^q for two ConePoints at the given base distance."""
    return float(cone_cost(spec, base_distance, a.r, b.r))


@dataclass
class ConicPlan:
    """A measure on the product of two cones, in grid or atom form.

    Grid form: tensor ``grid[i, j, k, l]`` over base pairs and radius indices
    with radii r_k = k R / K, s_l = l R / L. Atom form: rows
    (i, r, j, s, mass) with index -1 marking the apex (radius 0).
    """

    R: float
    grid: np.ndarray = None
    atoms: np.ndarray = None
    K: int = None
    L: int = None

    @classmethod
    def from_grid(cls, grid, R):
        grid = np.asarray(grid, dtype=float)
        if grid.ndim != 4:
            raise ValueError("grid form is a 4-way tensor")
        if np.any(grid < 0):
            raise ValueError("plan masses must be nonnegative")
        return cls(R=float(R), grid=grid, K=grid.shape[2] - 1, L=grid.shape[3] - 1)

    @classmethod
    def from_atoms(cls, atoms, R=None):
        atoms = np.atleast_2d(np.asarray(atoms, dtype=float))
        if atoms.size == 0:
            atoms = atoms.reshape(0, 5)
        if atoms.shape[1] != 5:
            raise ValueError("atom rows are (i, r, j, s, mass)")
        if np.any(atoms[:, 4] < 0):
            raise ValueError("plan masses must be nonnegative")
        if np.any(atoms[:, [1, 3]] < 0):
            raise ValueError("radii must be nonnegative")
        if np.any((atoms[:, 0] < 0) & (atoms[:, 1] > 0)) or np.any(
            (atoms[:, 2] < 0) & (atoms[:, 3] > 0)
        ):
            raise ValueError("apex entries must have radius 0")
        if R is None:
            R = float(atoms[:, [1, 3]].max()) if atoms.size else 0.0
        return cls(R=float(R), atoms=atoms)

    def radii(self):
        if self.grid is None:
            raise ValueError("radii grids exist only in grid form")
        r = np.arange(self.K + 1) * (self.R / self.K)
        s = np.arange(self.L + 1) * (self.R / self.L)
        return r, s

    def to_atoms(self):
        """Atom-form view: one row per charged grid cell (or the atoms as-is)."""
        if self.atoms is not None:
            return self.atoms
        r, s = self.radii()
        i, j, k, l = np.nonzero(self.grid > 0)
        return np.column_stack(
            [i.astype(float), r[k], j.astype(float), s[l], self.grid[i, j, k, l]]
        )


def dilate(alpha, v, p):
    """Radial rescale (i, r, j, s, w) -> (i, r/v, j, s/v, w v^p), atom-wise.

    v is a positive scalar or a per-atom array; grid plans convert to atom
    form first. Leaves the conic energy and the U_p residuals unchanged.
    """
    atoms = np.array(alpha.to_atoms(), dtype=float)
    v = np.broadcast_to(np.asarray(v, dtype=float), atoms.shape[0]).astype(float)
    if np.any(v[atoms[:, 4] > 0] <= 0):
        raise ValueError("dilation factor must be positive on charged atoms")
    charged = atoms[:, 4] > 0
    atoms, v = atoms[charged], v[charged]
    out = atoms.copy()
    out[:, 1] = atoms[:, 1] / v
    out[:, 3] = atoms[:, 3] / v
    out[:, 4] = atoms[:, 4] * v**p
    return ConicPlan.from_atoms(out, R=max(alpha.R, float(out[:, [1, 3]].max(initial=0.0))))


def conic_lift(pi, X, Y, p=2.0):
    """Lift a plan to the cones: density radii on the support, apex elsewhere.

    Charged entries (i, j) get radii (mu_i/pi1_i)^(1/p), (nu_j/pi2_j)^(1/p)
    and keep their mass; rows (columns) the plan misses entirely send their
    weight to unit-radius atoms paired with the opposite apex. The result
    satisfies the radial moment constraints U_p exactly.
    """
    P = pi.values if isinstance(pi, TransportPlan) else np.asarray(pi, dtype=float)
    mu, nu = X.weights, Y.weights
    if P.shape != (X.n, Y.n):
        raise ValueError("plan shape does not match the spaces")
    p1 = P.sum(axis=1)
    p2 = P.sum(axis=0)
    rows = []
    ii, jj = np.nonzero(P > 0)
    if ii.size:
        r = (mu[ii] / p1[ii]) ** (1.0 / p)
        s = (nu[jj] / p2[jj]) ** (1.0 / p)
        rows.append(np.column_stack([ii.astype(float), r, jj.astype(float), s, P[ii, jj]]))
    dead_rows = np.nonzero(p1 == 0)[0]
    if dead_rows.size:
        rows.append(
            np.column_stack(
                [
                    dead_rows.astype(float),
                    np.ones(dead_rows.size),
                    -np.ones(dead_rows.size),
                    np.zeros(dead_rows.size),
                    mu[dead_rows],
                ]
            )
        )
    dead_cols = np.nonzero(p2 == 0)[0]
    if dead_cols.size:
        rows.append(
            np.column_stack(
                [
                    -np.ones(dead_cols.size),
                    np.zeros(dead_cols.size),
                    dead_cols.astype(float),
                    np.ones(dead_cols.size),
                    nu[dead_cols],
                ]
            )
        )
    atoms = np.vstack(rows) if rows else np.zeros((0, 5))
    return ConicPlan.from_atoms(atoms)


def up_residual(alpha, X, Y, p=2.0):
    """Sup-norm residuals of the radial moment constraints against (mu, nu)."""
    atoms = alpha.to_atoms()
    h1 = np.zeros(X.n)
    h2 = np.zeros(Y.n)
    for row in atoms:
        i, r, j, s, w = row
        if i >= 0:
            h1[int(i)] += r**p * w
        if j >= 0:
            h2[int(j)] += s**p * w
    return (
        float(np.max(np.abs(h1 - X.weights), initial=0.0)),
        float(np.max(np.abs(h2 - Y.weights), initial=0.0)),
    )


def conic_energy(alpha, DX, DY, spec, block=1024):
    """H(alpha): double sum of cone costs over atom pairs.

    The pair of atoms ((i,r,j,s,w), (i',r',j',s',w')) contributes
    w w' D_Co([DX_ii', rr'], [DY_jj', ss'])^q. Apex rows (index -1) have
    zero radius, so their base lookup never influences the cost; the index
    is clamped to keep the fancy indexing in range.
    """
    DX = np.asarray(DX, dtype=float)
    DY = np.asarray(DY, dtype=float)
    atoms = alpha.to_atoms()
    if atoms.shape[0] == 0:
        return 0.0
    ix = np.maximum(atoms[:, 0].astype(int), 0)
    iy = np.maximum(atoms[:, 2].astype(int), 0)
    r, s, w = atoms[:, 1], atoms[:, 3], atoms[:, 4]
    total = 0.0
    for start in range(0, atoms.shape[0], block):
        end = min(start + block, atoms.shape[0])
        base = np.abs(DX[ix[start:end, None], ix[None, :]] - DY[iy[start:end, None], iy[None, :]])
        rr = r[start:end, None] * r[None, :]
        ss = s[start:end, None] * s[None, :]
        cost = cone_cost(spec, base, rr, ss)
        total += float(np.einsum("a,b,ab->", w[start:end], w, cost))
    return total


def conic_local_cost(beta, DX, DY, spec):
    """Frozen-plan cost tensor C[i,j,k,l] of the grid matching problem.

    C = rho (r_k^2 S_r + s_l^2 S_s) - 2 rho r_k s_l G_ij with S_r, S_s the
    radial second moments of beta, G = kernel-contraction of the first
    moments T_ij = sum_kl r_k s_l beta_ijkl. Requires a KL (p = 2) setting.
    """
    if spec.setting not in ("gh", "hk"):
        raise ValueError("the grid cost is wired for the KL (p=2) settings")
    if beta.grid is None:
        raise ValueError("beta must be in grid form")
    DX = np.asarray(DX, dtype=float)
    DY = np.asarray(DY, dtype=float)
    n, m = DX.shape[0], DY.shape[0]
    if beta.grid.shape[:2] != (n, m):
        raise ValueError("grid does not match the distance matrices")
    r, s = beta.radii()
    rho = spec.rho
    S_r = float(np.einsum("ijkl,k->", beta.grid, r * r))
    S_s = float(np.einsum("ijkl,l->", beta.grid, s * s))
    T = np.einsum("ijkl,k,l->ij", beta.grid, r, s)
    base = np.abs(DX[:, None, :, None] - DY[None, :, None, :])  # (n,m,n,m)
    G = np.einsum("ijab,ab->ij", _kernel(spec, base), T)
    C = np.zeros((n, m, r.size, s.size))
    C += rho * (r * r * S_r)[None, None, :, None]
    C += rho * (s * s * S_s)[None, None, None, :]
    C -= 2.0 * rho * G[:, :, None, None] * (r[:, None] * s[None, :])[None, None, :, :]
    return C


def _radial_profile(rng, radii_sq, mass, moment):
    """Nonnegative profile with prescribed total mass and second moment.

    A random positive profile is blended with a point mass at radius 0 or at
    the top radius, which moves the moment to the target exactly.
    """
    npts = radii_sq.size
    top = radii_sq[-1] * mass
    if moment < 0 or moment > top * (1 + 1e-12):
        raise ValueError("moment target outside the reachable range")
    w = rng.uniform(0.1, 1.0, npts)
    w *= mass / w.sum()
    cur = float(radii_sq @ w)
    u = np.zeros(npts)
    if moment <= cur:
        lam = moment / cur
        u = lam * w
        u[0] += (1.0 - lam) * mass
    else:
        lam = (top - moment) / (top - cur)
        u = lam * w
        u[-1] += (1.0 - lam) * mass
    return u


def _product_init(rng, mu, nu, r, s):
    """alpha = mu_i nu_j u_k v_l with profiles solving both moment equations."""
    mmu, mnu = float(mu.sum()), float(nu.sum())
    R2 = r[-1] ** 2
    cap = R2 * min(1.0, mmu / mnu)
    mean_u = rng.uniform(0.05, 0.95) * cap
    u = _radial_profile(rng, r * r, 1.0, mean_u)
    v = _radial_profile(rng, s * s, 1.0 / (mnu * mean_u), 1.0 / mmu)
    return (
        mu[:, None, None, None]
        * nu[None, :, None, None]
        * u[None, None, :, None]
        * v[None, None, None, :]
    )


def _permutation_init(rng, mu, nu, r, s):
    """Permutation-supported feasible plan, radial profiles per matched pair.

    Each matched pair (i, j) carries unit-mass radial profiles whose moments
    reproduce mu_i and nu_j; any moment overflow beyond the grid top radius
    lands on the one-sided cells (K, 0) / (0, L), which only one constraint
    sees. Unmatched rows/columns go entirely to those one-sided cells.
    """
    n, m = mu.size, nu.size
    K1, L1 = r.size, s.size
    R2r, R2s = r[-1] ** 2, s[-1] ** 2
    alpha = np.zeros((n, m, K1, L1))
    if n <= m:
        sigma = rng.permutation(m)[:n]
        matched = set(int(x) for x in sigma)
        pairs = [(i, int(sigma[i])) for i in range(n)]
        free_rows = []
        free_cols = [j for j in range(m) if j not in matched]
    else:
        sigma = rng.permutation(n)[:m]
        matched = set(int(x) for x in sigma)
        pairs = [(int(sigma[j]), j) for j in range(m)]
        free_rows = [i for i in range(n) if i not in matched]
        free_cols = []
    for i, j in pairs:
        mom_r = min(mu[i], 0.98 * R2r)
        mom_s = min(nu[j], 0.98 * R2s)
        u = _radial_profile(rng, r * r, 1.0, mom_r)
        v = _radial_profile(rng, s * s, 1.0, mom_s)
        alpha[i, j] += np.outer(u, v)
        if mu[i] > mom_r:
            alpha[i, j, K1 - 1, 0] += (mu[i] - mom_r) / R2r
        if nu[j] > mom_s:
            alpha[i, j, 0, L1 - 1] += (nu[j] - mom_s) / R2s
    for i in free_rows:
        alpha[i, 0, K1 - 1, 0] += mu[i] / R2r
    for j in free_cols:
        alpha[0, j, 0, L1 - 1] += nu[j] / R2s
    return alpha


@dataclass
class CgwResult:
    alpha: ConicPlan
    cost: float
    restart_log: list = field(default_factory=list)


def solve_cgw(X, Y, spec=None, K=10, L=10, restarts=20, seed=0, max_rounds=200, tol=1e-9):
    """Grid matching solver: alternate LPs from multiple feasible starts.

    Radii live on [0, R] with R^2 = m(mu)^2 + m(nu)^2. Half the restarts use
    random product-form plans, half permutation lifts. Each restart freezes
    the plan, builds the local cost tensor, and re-solves the moment-
    constrained LP (warm-started, since the constraints never change) until
    the energy decrease falls below tol*(1+|cost|) or max_rounds.
    """
    if spec is None:
        spec = ConeMetricSpec("gh", rho=1.0)
    if spec.setting != "gh":
        raise ValueError("the grid solver is wired for the GH setting")
    if K < 1 or L < 1:
        raise ValueError("K and L must be at least 1")
    mu, nu = X.weights, Y.weights
    R = math.sqrt(X.mass**2 + Y.mass**2)
    r = np.arange(K + 1) * (R / K)
    s = np.arange(L + 1) * (R / L)
    n, m = X.n, Y.n
    N = n * m * (K + 1) * (L + 1)

    # moment constraint rows: sum_jkl r_k^2 alpha = mu_i, sum_ikl s_l^2 alpha = nu_j
    A_mu = np.kron(np.eye(n), np.kron(np.ones(m), np.kron(r * r, np.ones(L + 1))))
    A_nu = np.kron(np.ones(n), np.kron(np.eye(m), np.kron(np.ones(K + 1), s * s)))
    A = np.vstack([A_mu, A_nu])
    b = np.concatenate([mu, nu])

    rng = np.random.default_rng(seed)
    n_prod = (restarts + 1) // 2
    best = None
    log = []
    basis = None
    for idx in range(restarts):
        kind = "product" if idx < n_prod else "permutation"
        if kind == "product":
            alpha = _product_init(rng, mu, nu, r, s)
        else:
            alpha = _permutation_init(rng, mu, nu, r, s)
        plan = ConicPlan.from_grid(alpha, R)
        C = conic_local_cost(plan, X.dist, Y.dist, spec)
        cost = float(np.vdot(C, plan.grid))
        trace = [cost]
        for _ in range(max_rounds):
            sol = solve_lp(LpProblem(A, b, C.ravel()), init_basis=basis)
            if sol.status != "optimal":
                raise RuntimeError("grid LP terminated " + sol.status)
            basis = sol.basis
            new = ConicPlan.from_grid(sol.x.reshape(alpha.shape), R)
            C = conic_local_cost(new, X.dist, Y.dist, spec)
            new_cost = float(np.vdot(C, new.grid))
            trace.append(new_cost)
            improved = cost - new_cost
            plan, cost = new, new_cost
            if improved <= tol * (1.0 + abs(new_cost)):
                break
        log.append({"init": kind, "rounds": len(trace) - 1, "cost": cost, "trace": trace})
        if best is None or cost < best.cost:
            best = CgwResult(alpha=plan, cost=cost, restart_log=log)
    best.restart_log = log
    return best
