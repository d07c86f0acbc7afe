"""Band structure and embedded-eigenvalue detection by subspace matching.

Eigenvalue test: propagate the decaying directions of the system at
infinity from x = +T and the growing ones from x = -T to x = 0 and measure
how far the two subspaces are from intersecting.  Matching is done in the
original U = (u, u') coordinates; since G(0) = I this is the same test as
in the Floquet-transformed coordinates.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import trapezoid
from scipy.optimize import brentq

from .errors import NoHyperbolicDirections, NoLocalMinimum, ResidualError
from .floquet import FloquetData, floquet_decomposition, periodic_schrodinger
from .ode import (DEFAULT_CONFIG, CoefficientField, IntegratorConfig, evolve_subspace,
                  integrate_matrix_ode, schrodinger_field, subspace_trajectory)
from .potentials import Perturbation, Potential, xbeta_norm

_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class MatchingConfig:
    T: float = 15.0
    radius: float = 0.05
    tol: float = 1e-5
    coarse_points: int = 21
    lam_xtol: float = 1e-11
    grid_step: float = 0.05
    residual_bound: float = 1e-5
    integrator: IntegratorConfig = DEFAULT_CONFIG

    def __post_init__(self):
        for name in ("T", "radius", "tol", "lam_xtol", "grid_step", "residual_bound"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")
        if self.coarse_points < 3:
            raise ValueError("coarse_points must be at least 3")


# ---------------------------------------------------------------- bands

def _scalar_field(Vp, lam):
    return schrodinger_field(lambda xs: np.asarray(Vp(xs), dtype=float), 1, lam, name="hill")


def hill_discriminant(Vp, period, lam, cfg: IntegratorConfig = DEFAULT_CONFIG):
    """tr M(lam) for -u'' + Vp u = lam u over one period."""
    M = integrate_matrix_ode(_scalar_field(Vp, lam), 0.0, period, np.eye(2), cfg)
    return float(np.trace(M))


@dataclass
class BandStructure:
    lams: np.ndarray
    discriminant: np.ndarray
    in_band: np.ndarray
    bands: list
    edges: list

    def contains(self, lam):
        return any(lo <= lam <= hi for lo, hi in self.bands)

    def midpoint(self, index=0):
        lo, hi = self.bands[index]
        return 0.5 * (lo + hi)


def band_scan(Vp, period, lam_range, samples=401, cfg: IntegratorConfig = DEFAULT_CONFIG,
              edge_tol=1e-9, threads=1) -> BandStructure:
    """Classify a lambda grid by |Delta| <= 2 and refine the band edges."""
    lo, hi = map(float, lam_range)
    if not (np.isfinite(lo) and np.isfinite(hi) and hi > lo):
        raise ValueError("lambda range must be finite and increasing")
    lams = np.linspace(lo, hi, samples)
    disc_fn = lambda lam: hill_discriminant(Vp, period, lam, cfg)
    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            disc = np.array(list(ex.map(disc_fn, lams)))
    else:
        disc = np.array([disc_fn(lam) for lam in lams])
    in_band = np.abs(disc) <= 2.0

    edges = []
    for i in range(samples - 1):
        if in_band[i] != in_band[i + 1]:
            a, b = lams[i], lams[i + 1]
            # the crossing is of +2 or -2 depending on the sign of Delta there
            level = 2.0 if disc[i] + disc[i + 1] > 0 else -2.0
            g = lambda lam: disc_fn(lam) - level
            edges.append(brentq(g, a, b, xtol=edge_tol * 1e-3, rtol=4 * np.finfo(float).eps))
    bands = []
    start = lo if in_band[0] else None
    ei = 0
    for i in range(samples - 1):
        if in_band[i] != in_band[i + 1]:
            e = edges[ei]
            ei += 1
            if in_band[i]:
                bands.append((start, e))
                start = None
            else:
                start = e
    if start is not None:
        bands.append((start, hi))
    return BandStructure(lams, disc, in_band, bands, edges)


# ------------------------------------------------------------ matching

def system_at_infinity(potential: Potential, lam):
    return periodic_schrodinger(potential.Ap, potential.n, potential.period, lam)


def full_field(potential: Potential, lam, B: Perturbation | None = None) -> CoefficientField:
    if B is None:
        pot = potential.A
    else:
        pot = lambda xs: potential.A(xs) + B(xs)
    return schrodinger_field(pot, potential.n, lam, name="full system")


def infinity_floquet(potential: Potential, lam, cfg: MatchingConfig = MatchingConfig()):
    return floquet_decomposition(system_at_infinity(potential, lam), cfg.integrator)


def infinity_subspaces(fdata: FloquetData, side, T=None):
    """Orthonormal basis of the decaying (side '+') or growing (side '-') directions.

    With ``T`` None the basis is returned in the coordinates of the
    transformed constant-coefficient system (X^s or X^u of R); otherwise it
    is the corresponding subspace of the original system at x = +T or -T.
    """
    if side not in ("+", "-"):
        raise ValueError("side must be '+' or '-'")
    which = "s" if side == "+" else "u"
    basis = fdata.split.real_basis(which)
    if basis.shape[1] == 0:
        raise NoHyperbolicDirections("system at infinity has no hyperbolic directions")
    if T is None:
        return basis
    x = T if side == "+" else -T
    return np.linalg.qr(fdata.transport(basis, x))[0]


@dataclass
class Mismatch:
    lam: float
    sigma: float
    S0: np.ndarray
    U0: np.ndarray
    coeffs_s: np.ndarray
    coeffs_u: np.ndarray
    V0s: np.ndarray
    V0u: np.ndarray
    fdata: FloquetData = field(repr=False)


def mismatch(potential: Potential, lam, B: Perturbation | None = None,
             cfg: MatchingConfig = MatchingConfig()) -> Mismatch:
    """Smallest singular value of [S0 | -U0] at x = 0."""
    fdata = infinity_floquet(potential, lam, cfg)
    Es = infinity_subspaces(fdata, "+", cfg.T)
    Eu = infinity_subspaces(fdata, "-", cfg.T)
    fld = full_field(potential, lam, B)
    S0 = evolve_subspace(fld, Es, cfg.T, 0.0, cfg.integrator)
    U0 = evolve_subspace(fld, Eu, -cfg.T, 0.0, cfg.integrator)
    mat = np.hstack([S0, -U0])
    _, s, vh = np.linalg.svd(mat)
    v = vh[-1]
    k = S0.shape[1]
    a, b = v[:k], v[k:]
    V0s, V0u = S0 @ a, U0 @ b
    ns, nu = np.linalg.norm(V0s), np.linalg.norm(V0u)
    return Mismatch(float(lam), float(s[-1]), S0, U0, a, b,
                    V0s / ns if ns else V0s, V0u / nu if nu else V0u, fdata)


def mismatch_scan(potential, lams, B=None, cfg: MatchingConfig = MatchingConfig(), threads=1):
    f = lambda lam: mismatch(potential, lam, B, cfg).sigma
    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            return np.array(list(ex.map(f, lams)))
    return np.array([f(lam) for lam in lams])


def golden_min(f, a, b, xtol=1e-11):
    """Golden-section search for a minimiser of a unimodal f on [a, b]."""
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while abs(b - a) > xtol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = f(d)
    return (c, fc) if fc < fd else (d, fd)


@dataclass
class EigenCandidate:
    lam: float
    mismatch: float
    flagged: bool
    match: Mismatch = field(repr=False)
    potential: Potential = field(repr=False)
    B: Perturbation | None = field(repr=False)
    decay_rate: float | None = None
    evaluations: int = 0


def find_embedded_eigenvalue(potential: Potential, lam_guess, B: Perturbation | None = None,
                             cfg: MatchingConfig = MatchingConfig(), threads=1) -> EigenCandidate:
    """Minimise sigma_min(lam) on [lam_guess - radius, lam_guess + radius]."""
    cache = {}

    def sigma(lam):
        if lam not in cache:
            cache[lam] = mismatch(potential, lam, B, cfg)
        return cache[lam].sigma

    grid = np.linspace(lam_guess - cfg.radius, lam_guess + cfg.radius, cfg.coarse_points)
    vals = mismatch_scan(potential, grid, B, cfg, threads) if threads > 1 else None
    if vals is None:
        vals = np.array([sigma(lam) for lam in grid])
    i = int(np.argmin(vals))
    if i == 0 or i == len(grid) - 1:
        raise NoLocalMinimum(
            f"mismatch minimum at the edge of [{grid[0]:.6g}, {grid[-1]:.6g}]")
    lam, _ = golden_min(sigma, grid[i - 1], grid[i + 1], cfg.lam_xtol)
    m = cache.get(lam) or mismatch(potential, lam, B, cfg)
    return EigenCandidate(float(lam), m.sigma, m.sigma < cfg.tol, m, potential, B,
                          evaluations=len(cache) + len(grid))


# ---------------------------------------------------------- eigenfunction

_D2 = np.array([1 / 90, -3 / 20, 3 / 2, -49 / 18, 3 / 2, -3 / 20, 1 / 90])


def second_derivative(values, h):
    """Sixth-order central second difference on interior points (3 dropped per side)."""
    v = np.asarray(values)
    m = len(v)
    out = np.zeros((m - 6,) + v.shape[1:])
    for k, c in enumerate(_D2):
        out += c * v[k:m - 6 + k]
    return out / h ** 2


@dataclass
class Eigenfunction:
    lam: float
    xs: np.ndarray
    U: np.ndarray
    residual: float
    omega_min: float

    @property
    def u(self):
        return self.U[:, : self.U.shape[1] // 2]

    @property
    def u_prime(self):
        return self.U[:, self.U.shape[1] // 2:]


def eigenfunction(candidate: EigenCandidate, cfg: MatchingConfig = MatchingConfig(),
                  check=True) -> Eigenfunction:
    """Reconstruct u on a uniform grid of [-T, T] from the matching vectors."""
    T = cfg.T
    n_half = int(round(T / cfg.grid_step))
    h = T / n_half
    xs = np.linspace(-T, T, 2 * n_half + 1)
    m = candidate.match
    pot, B, lam = candidate.potential, candidate.B, candidate.lam
    fld = full_field(pot, lam, B)
    Es = infinity_subspaces(m.fdata, "+", T)
    Eu = infinity_subspaces(m.fdata, "-", T)
    right = subspace_trajectory(fld, Es, T, 0.0, xs[xs >= 0], cfg.integrator)
    left = subspace_trajectory(fld, Eu, -T, 0.0, xs[xs <= 0], cfg.integrator)
    # sampling changes the step sequence slightly, so redo the matching
    # with the end bases of these trajectories
    k = right.final.shape[1]
    v = np.linalg.svd(np.hstack([right.final, -left.final]))[2][-1]
    ur = right.solution(v[:k])
    ul = left.solution(v[k:])
    order_r = np.argsort(right.xs)
    order_l = np.argsort(left.xs)
    ur, xr = ur[order_r], right.xs[order_r]
    ul, xl = ul[order_l], left.xs[order_l]
    # x = 0 appears in both; join with the average of the two matched values
    U = np.vstack([ul[:-1], 0.5 * (ul[-1] + ur[0])[None, :], ur[1:]])
    xs_all = np.concatenate([xl[:-1], [0.0], xr[1:]])
    n = pot.n
    u = U[:, :n]
    norm = np.sqrt(trapezoid(np.sum(u * u, axis=1), xs_all))
    U = U / norm
    i0 = len(xl) - 1
    if U[i0, np.argmax(np.abs(U[i0, :n]))] < 0:
        U = -U
    u = U[:, :n]
    Q = pot.A(xs_all) - lam * np.eye(n)
    if B is not None:
        Q = Q + B(xs_all)
    res = -second_derivative(u, h) + np.einsum("mij,mj->mi", Q, u)[3:-3]
    residual = float(np.sqrt(trapezoid(np.sum(res * res, axis=1), xs_all[3:-3])))
    if check and residual > cfg.residual_bound:
        raise ResidualError(f"eigenfunction residual {residual:.3e} exceeds "
                            f"{cfg.residual_bound:.1e}")
    return Eigenfunction(lam, xs_all, U, residual, m.fdata.omega_min)


def truncation_ratio(potential: Potential, B: Perturbation | None, cfg: MatchingConfig):
    """Weighted tail of A - A_p + B beyond T relative to its X_beta norm."""
    diff = potential.difference if B is None else (lambda xs: potential.difference(xs) + B(xs))
    total = xbeta_norm(diff, potential.beta).value
    if total == 0:
        return 0.0
    xs = np.concatenate([np.linspace(cfg.T, 4 * cfg.T, 4001), -np.linspace(cfg.T, 4 * cfg.T, 4001)])
    vals = np.max(np.abs(diff(xs)).reshape(len(xs), -1), axis=1) * (1 + np.abs(xs)) ** potential.beta
    return float(vals.max() / total)
