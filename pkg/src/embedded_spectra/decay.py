"""Empirical decay rates of eigenfunctions and of perturbed dichotomies.

``fit_decay_rate`` regresses log|U(x)| against |x| on both tails of a
sampled eigenfunction.  ``roughness_probe`` measures the growth rates of a
constant hyperbolic system under a bounded perturbation with the discrete
QR method for Lyapunov exponents and compares them with the rate bands
``[k_s, k_s + 2K delta]`` and ``[k_u - 2K delta, k_u]``.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DecayFitError
from .ode import DEFAULT_CONFIG, CoefficientField, IntegratorConfig, integrate_on_grid
from .spectral import Eigenfunction

MIN_R2 = 0.99


@dataclass
class TailFit:
    side: str
    rate: float
    r2: float
    x: np.ndarray
    log_norm: np.ndarray


@dataclass
class DecayFit:
    left: TailFit
    right: TailFit
    omega_min: float

    @property
    def rate(self):
        """The slower of the two tail rates (the one that bounds |U|)."""
        return min(self.left.rate, self.right.rate)

    @property
    def r2(self):
        return min(self.left.r2, self.right.r2)

    def within_bound(self, slack=0.05):
        return 0.0 < self.rate <= self.omega_min * (1.0 + slack)


def _fit_tail(x, y, side):
    d = np.diff(y)
    if not (np.all(d < 0)):
        raise DecayFitError(f"{side} tail of log|U| is not monotonically decreasing")
    slope, icept = np.polyfit(x, y, 1)
    resid = y - (slope * x + icept)
    ss = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 - np.sum(resid ** 2) / ss if ss > 0 else 1.0
    return TailFit(side, float(-slope), float(r2), x, y)


def fit_decay_rate(xs, U, omega_min=np.inf, window=None, check=True) -> DecayFit:
    """Fit |U(x)| ~ K exp(-k |x|) on |x| in [T/2, T] for each tail.

    ``xs`` must cover [-T, T]; ``U`` holds samples (m, d) or (m,).  With
    ``check`` the fit must have R^2 > 0.99 and 0 < k < omega_min + 0.05.
    """
    xs = np.asarray(xs, dtype=float)
    U = np.asarray(U, dtype=float)
    nrm = np.abs(U) if U.ndim == 1 else np.linalg.norm(U, axis=1)
    T = min(-xs[0], xs[-1])
    lo, hi = window if window is not None else (0.5 * T, T)
    if not (0 <= lo < hi <= T):
        raise ValueError("tail window must lie inside the sampled range")
    if np.any(nrm[(np.abs(xs) >= lo) & (np.abs(xs) <= hi)] <= 0):
        raise DecayFitError("eigenfunction vanishes on the tail window")
    fits = {}
    for side, mask in (("left", (xs <= -lo) & (xs >= -hi)), ("right", (xs >= lo) & (xs <= hi))):
        ax = np.abs(xs[mask])
        order = np.argsort(ax)
        fits[side] = _fit_tail(ax[order], np.log(nrm[mask][order]), side)
    fit = DecayFit(fits["left"], fits["right"], float(omega_min))
    if check:
        if fit.r2 <= MIN_R2:
            raise DecayFitError(f"tail fit R^2 = {fit.r2:.4f} below {MIN_R2}")
        if not (0.0 < fit.rate < omega_min + 0.05):
            raise DecayFitError(f"fitted rate {fit.rate:.4f} outside (0, omega_min + 0.05)")
    return fit


def fit_eigenfunction(ef: Eigenfunction, window=None, check=True) -> DecayFit:
    return fit_decay_rate(ef.xs, ef.U, ef.omega_min, window, check)


# ------------------------------------------------------------ roughness

@dataclass
class RateBands:
    kappa_s: float
    kappa_u: float
    K: float


def rate_bands(R) -> RateBands:
    """Base rates (largest stable / smallest unstable real part) and K = cond(V)."""
    w, V = np.linalg.eig(np.asarray(R, dtype=float))
    re = w.real
    if np.any(re == 0):
        raise ConfigError("base system has eigenvalues on the imaginary axis")
    if not (np.any(re < 0) and np.any(re > 0)):
        raise ConfigError("base system needs both stable and unstable directions")
    return RateBands(float(re[re < 0].max()), float(re[re > 0].min()), float(np.linalg.cond(V)))


def lyapunov_spectrum(fld: CoefficientField, horizon=50.0, seed=0, segment=1.0,
                      cfg: IntegratorConfig = DEFAULT_CONFIG):
    """Lyapunov exponents (descending) by discrete QR reorthonormalisation.

    Rates are slopes of the accumulated log|diag R| fitted over the second
    half of the horizon, which removes the transient of the initial frame.
    """
    rng = np.random.default_rng(seed)
    N = fld.dim
    Q = np.linalg.qr(rng.normal(size=(N, N)))[0]
    n_seg = int(round(horizon / segment))
    acc = np.zeros((n_seg + 1, N))
    h = None
    for j in range(n_seg):
        a = j * segment
        out, h = integrate_on_grid(fld, [a, a + segment], Q, cfg, h0=h)
        Q, Rf = np.linalg.qr(out[-1])
        acc[j + 1] = acc[j] + np.log(np.abs(np.diag(Rf)))
    xs = np.arange(n_seg + 1) * segment
    half = n_seg // 2
    rates = np.polyfit(xs[half:], acc[half:], 1)[0]
    return np.sort(rates)[::-1]


@dataclass
class RoughnessResult:
    delta: float
    measured_s: float
    measured_u: float
    bound_s: tuple
    bound_u: tuple
    K: float
    tol: float

    @property
    def passed(self):
        lo_s, hi_s = self.bound_s
        lo_u, hi_u = self.bound_u
        return (lo_s - self.tol <= self.measured_s <= hi_s + self.tol
                and lo_u - self.tol <= self.measured_u <= hi_u + self.tol)


def roughness_probe(R, D=None, delta=0.0, eta=0.0, horizon=50.0, seed=0, tol=1e-2,
                    cfg: IntegratorConfig = DEFAULT_CONFIG) -> RoughnessResult:
    """Measure the rates of Y' = (R + eta I + D(x)) Y against the perturbed bands.

    ``D`` maps xs (m,) to (m, N, N) with sup_x |D(x)|_2 <= delta.  The
    precondition delta < min(-k_s, k_u) / (2K) is enforced.
    """
    R = np.asarray(R, dtype=float)
    N = R.shape[0]
    base = R + eta * np.eye(N)
    bands = rate_bands(base)
    if delta < 0:
        raise ConfigError("delta must be non-negative")
    limit = min(-bands.kappa_s, bands.kappa_u) / (2.0 * bands.K)
    if delta >= limit:
        raise ConfigError(f"delta = {delta:g} violates delta < min(-k_s, k_u)/(2K) = {limit:g}")
    n_unstable = int(np.sum(np.linalg.eigvals(base).real > 0))
    if D is None:
        fld = CoefficientField.constant(base, name="roughness base")
    else:
        fld = CoefficientField(func=None, dim=N, batch=lambda xs: base + D(xs),
                               name="roughness probe")
    rates = lyapunov_spectrum(fld, horizon, seed, cfg=cfg)
    slack = 2.0 * bands.K * delta
    return RoughnessResult(float(delta), float(rates[n_unstable]), float(rates[n_unstable - 1]),
                           (bands.kappa_s, bands.kappa_s + slack),
                           (bands.kappa_u - slack, bands.kappa_u), bands.K, tol)


@dataclass
class RandomProbe:
    R: np.ndarray
    D: object
    delta: float


def random_probe(rng, dim=2, fraction=None) -> RandomProbe:
    """Symmetric hyperbolic base plus a skew bounded perturbation delta s(x) J.

    The base is Q diag(a, -b) Q^T with Q orthogonal (so K = 1); J is skew
    with unit spectral norm and |s| <= 1, and delta is a random fraction of
    the admissible bound.
    """
    if dim % 2:
        raise ValueError("dim must be even")
    k = dim // 2
    Q = np.linalg.qr(rng.normal(size=(dim, dim)))[0]
    diag = np.concatenate([rng.uniform(0.5, 1.5, k), -rng.uniform(0.5, 1.5, k)])
    R = Q @ np.diag(diag) @ Q.T
    R = 0.5 * (R + R.T)
    S = rng.normal(size=(dim, dim))
    J = S - S.T
    J /= np.linalg.norm(J, 2)
    amps = rng.normal(size=3)
    amps /= np.sum(np.abs(amps))
    freqs = rng.uniform(0.2, 3.0, 3)
    phases = rng.uniform(0, 2 * np.pi, 3)
    f = rng.uniform(0.1, 0.9) if fraction is None else fraction
    delta = f * min(-diag[k:].max(), diag[:k].min()) / 2.0

    def D(xs):
        s = np.sum(amps * np.sin(np.outer(xs, freqs) + phases), axis=1)
        return delta * s[:, None, None] * J

    return RandomProbe(R, D, float(delta))


def roughness_trials(n_trials=20, seed=0, dim=2, horizon=50.0, tol=1e-2, threads=1,
                     cfg: IntegratorConfig = DEFAULT_CONFIG):
    """Independent random probes; trial i uses the stream spawned from ``seed`` at index i."""
    seqs = np.random.SeedSequence(seed).spawn(n_trials)

    def one(i):
        rng = np.random.default_rng(seqs[i])
        pr = random_probe(rng, dim)
        return roughness_probe(pr.R, pr.D, pr.delta, horizon=horizon,
                               seed=int(rng.integers(2 ** 31)), tol=tol, cfg=cfg)

    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            return list(ex.map(one, range(n_trials)))
    return [one(i) for i in range(n_trials)]
