"""Monodromy, Floquet multipliers/exponents and the decomposition Phi = G e^{Rx}."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import FloquetError, SpectralGapError
from .ode import (DEFAULT_CONFIG, CoefficientField, IntegratorConfig, fundamental_matrix,
                  integrate_matrix_ode, schrodinger_field)

TOL_CENTER = 1e-6
GAP_GUARD = 1e-4
BRANCH_TOL = 1e-6
JORDAN_COND = 1e8


@dataclass(frozen=True)
class PeriodicSystem:
    field: CoefficientField
    period: float

    def __post_init__(self):
        if not self.period > 0:
            raise ValueError("period must be positive")

    @property
    def dim(self):
        return self.field.dim


def periodic_schrodinger(ap_batch, n, period, lam, name="system at infinity"):
    """System at infinity U' = [[0, I], [A_p(x) - lam I, 0]] U."""
    return PeriodicSystem(schrodinger_field(ap_batch, n, lam, name=name), period)


@dataclass
class SpectralSplit:
    exponents: np.ndarray
    labels: np.ndarray  # 's', 'c' or 'u' per exponent
    eigvecs: np.ndarray
    projections: dict
    bases: dict

    @property
    def dims(self):
        return tuple(int(np.sum(self.labels == k)) for k in "scu")

    def real_basis(self, which):
        """Orthonormal real basis of a conjugation-invariant invariant subspace."""
        B = self.bases[which]
        k = B.shape[1]
        if k == 0:
            return np.zeros((B.shape[0], 0))
        stacked = np.hstack([B.real, B.imag])
        U, s, _ = np.linalg.svd(stacked, full_matrices=False)
        if k < len(s) and s[k] > 1e-8 * s[0]:
            raise FloquetError(f"X^{which} is not a real subspace")
        return U[:, :k]


@dataclass
class FloquetData:
    period: float
    M: np.ndarray
    multipliers: np.ndarray
    exponents: np.ndarray
    R: np.ndarray
    x_grid: np.ndarray
    G_samples: np.ndarray
    center_count: int
    split: SpectralSplit
    periodicity_defect: float
    system: PeriodicSystem = field(repr=False)
    cfg: IntegratorConfig = field(repr=False, default=DEFAULT_CONFIG)

    @property
    def omega_min(self):
        """Smallest positive real part among the exponents (inf if none)."""
        re = self.split.exponents.real[self.split.labels == "u"]
        return float(re.min()) if re.size else np.inf

    def fundamental(self, xs):
        """Phi(x) at arbitrary abscissae from one period and Phi(x + kp) = Phi(x) M^k."""
        xs = np.atleast_1d(np.asarray(xs, dtype=float))
        p = self.period
        k = np.floor(xs / p).astype(int)
        tau = xs - k * p
        order = np.argsort(tau)
        grid = np.concatenate([[0.0], tau[order]])
        phis = fundamental_matrix(self.system.field, grid, self.cfg)[1:]
        out = np.empty((len(xs), self.M.shape[0], self.M.shape[0]))
        out[order] = phis
        for i, kk in enumerate(k):
            if kk:
                out[i] = out[i] @ np.linalg.matrix_power(self.M, kk)
        return out

    def G(self, xs):
        """Periodic factor G(x) = Phi(x) e^{-Rx}, evaluated through x mod p."""
        xs = np.atleast_1d(np.asarray(xs, dtype=float))
        tau = np.mod(xs, self.period)
        phis = self.fundamental(tau)
        return np.array([phi @ scipy.linalg.expm(-self.R * t) for phi, t in zip(phis, tau)])

    def transport(self, basis, x):
        """Image Phi(x mod p) @ basis of an R-invariant subspace given at x = 0.

        Since G is periodic and e^{Rx} preserves invariant subspaces, this
        spans the same subspace as Phi(x) @ basis without integrating across
        many periods.
        """
        tau = float(np.mod(x, self.period))
        if tau == 0.0:
            return np.asarray(basis)
        phi = integrate_matrix_ode(self.system.field, 0.0, tau, np.eye(self.M.shape[0]), self.cfg)
        return phi @ basis


def monodromy(system: PeriodicSystem, cfg: IntegratorConfig = DEFAULT_CONFIG):
    """M = Phi(p) with Phi(0) = I."""
    return integrate_matrix_ode(system.field, 0.0, system.period, np.eye(system.dim), cfg)


def floquet_multipliers(M, tol_center=TOL_CENTER):
    """Eigenvalues of M and the count of those with modulus 1 (within tol)."""
    if not 0 < tol_center < 0.1:
        raise ValueError("tol_center must lie in (0, 0.1)")
    M = np.asarray(M, dtype=float)
    if not np.all(np.isfinite(M)):
        raise FloquetError("monodromy matrix is not finite")
    try:
        mu = np.linalg.eigvals(M)
    except np.linalg.LinAlgError as exc:
        raise FloquetError(f"eigenvalue computation failed: {exc}") from exc
    mu = mu[np.lexsort((mu.imag, np.abs(mu)))]
    center = int(np.sum(np.abs(np.abs(mu) - 1.0) < tol_center))
    if center % 2:
        raise FloquetError(
            f"odd number ({center}) of unit-modulus multipliers: near-tangency, "
            "tighten the integrator tolerance or tol_center")
    return mu, center


def floquet_exponents(multipliers, period):
    """Principal-branch exponents omega = log(mu) / p."""
    mu = np.asarray(multipliers, dtype=complex)
    if np.any(mu == 0):
        raise FloquetError("zero multiplier; the monodromy matrix is singular")
    return np.log(mu) / period


def spectral_split(R, tol=TOL_CENTER, guard=GAP_GUARD):
    """Stable/center/unstable split of R by the sign of Re(omega).

    |Re omega| < tol is center; tol <= |Re omega| < guard is a gap violation.
    """
    R = np.asarray(R)
    w, V = np.linalg.eig(R)
    re = w.real
    bad = (np.abs(re) >= tol) & (np.abs(re) < guard)
    if np.any(bad):
        raise SpectralGapError(f"exponent(s) {w[bad]} inside the guard band [{tol}, {guard})")
    if np.linalg.cond(V) > JORDAN_COND:
        raise FloquetError("eigenvector matrix is ill-conditioned (defective R)")
    labels = np.where(np.abs(re) < tol, "c", np.where(re < 0, "s", "u"))
    Vinv = np.linalg.inv(V)
    projections, bases = {}, {}
    for key in "scu":
        mask = labels == key
        projections[key] = V[:, mask] @ Vinv[mask, :]
        if mask.any():
            bases[key] = np.linalg.qr(V[:, mask])[0]
        else:
            bases[key] = np.zeros((R.shape[0], 0), dtype=complex)
    return SpectralSplit(w, labels, V, projections, bases)


def matrix_log(M):
    """Principal logarithm; real when M has no negative real eigenvalues."""
    L = scipy.linalg.logm(M)
    if np.iscomplexobj(L) and np.max(np.abs(L.imag)) < 1e-12 * max(1.0, np.max(np.abs(L))):
        L = L.real
    return L


def floquet_decomposition(system: PeriodicSystem, cfg: IntegratorConfig = DEFAULT_CONFIG,
                          n_samples=32, tol_center=TOL_CENTER, guard=GAP_GUARD) -> FloquetData:
    p = system.period
    x_grid = np.linspace(0.0, p, n_samples + 1)
    phis = fundamental_matrix(system.field, x_grid, cfg)
    M = phis[-1]
    mu, center = floquet_multipliers(M, tol_center)
    if np.any(np.abs(mu + 1.0) < BRANCH_TOL):
        raise FloquetError("multiplier at -1: principal logarithm undefined; "
                           "double the period (log of M^2 over 2p exists)")
    _, V = np.linalg.eig(M)
    if np.linalg.cond(V) > JORDAN_COND:
        raise FloquetError("monodromy matrix is (nearly) defective")
    omega = floquet_exponents(mu, p)
    R = matrix_log(M) / p
    G = np.array([phi @ scipy.linalg.expm(-R * x) for phi, x in zip(phis, x_grid)])
    defect = float(np.max(np.abs(G[-1] - np.eye(system.dim))))
    split = spectral_split(R, tol=tol_center / p, guard=guard)
    if split.dims[1] != center:
        raise FloquetError(f"center count mismatch: multipliers give {center}, "
                           f"exponents give {split.dims[1]}")
    return FloquetData(p, M, mu, omega, R, x_grid, G, center, split, defect, system, cfg)


def lambda0_not_multiplier(M, lam0, period, tol=1e-8):
    """e^{p lam0} not in sigma(M), checked on multipliers and on exponents."""
    mu = np.linalg.eigvals(M)
    by_multiplier = bool(np.min(np.abs(mu - np.exp(period * lam0))) > tol)
    omega = floquet_exponents(mu, period)
    by_exponent = bool(np.min(np.abs(omega - lam0)) > tol)
    return by_multiplier, by_exponent
