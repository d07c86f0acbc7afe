"""First-order perturbation quantities for an embedded eigenvalue.

The eigenvalue derivative, the functionals built from bounded Bloch
solutions (generalized eigenfunctions), the codimension count, and scans
of the minimised mismatch along a perturbation direction.

Sign conventions.  ``lambda_prime`` returns the published first-order
quantity ``-int <u, B u>``; the actual eigenvalue of L + eps B moves by
``-eps * lambda_prime(B)`` (Hellmann-Feynman gives ``+int <u, B u>``).
``tangent_functional`` returns ``-int <z, B u> + lambda' int <z, u>`` and
``example_functional`` the reduced form ``int b_1k z_k u_1``; for potentials
whose eigenfunction lives in the first component only and whose bounded
solutions avoid it the two differ by an overall sign.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.integrate import quad, simpson
from scipy.interpolate import CubicSpline

from .errors import FloquetError, QuadratureError
from .floquet import FloquetData
from .potentials import Perturbation, Potential, make_perturbation, profile
from .spectral import (Eigenfunction, MatchingConfig, find_embedded_eigenvalue,
                       infinity_floquet)

TAIL_BOUND = 1e-10


# ------------------------------------------------------------ helpers

def _as_callable(u_star):
    """Vectorised xs -> (m, n) from a callable or a sampled Eigenfunction."""
    if isinstance(u_star, Eigenfunction):
        spline = CubicSpline(u_star.xs, u_star.u, axis=0)
        lo, hi = u_star.xs[0], u_star.xs[-1]

        def f(xs):
            xs = np.asarray(xs, dtype=float)
            out = spline(np.clip(xs, lo, hi))
            out[(xs < lo) | (xs > hi)] = 0.0
            return out

        return f, float(hi)
    return u_star, None


def _tail_estimate(g, T):
    """Crude bound on int_{|x|>T} |g| from the local exponential decay at +-T."""
    total = 0.0
    for s in (1.0, -1.0):
        a, b = abs(g(s * (T - 1.0))), abs(g(s * T))
        if b == 0.0:
            continue
        if a <= b:
            raise QuadratureError(f"integrand does not decay near x={s * T:+g}")
        total += b / np.log(a / b)
    return total


# ------------------------------------------------------ lambda prime

def lambda_prime(B: Perturbation, u_star, T=None, tail_bound=TAIL_BOUND):
    """First-order eigenvalue functional ``-int <u*, B u*>`` by adaptive quadrature.

    ``u_star`` is a vectorised callable xs -> (m, n) or an ``Eigenfunction``;
    it must have unit L2 norm.  The truncation tail beyond +-T is estimated
    from the decay of the integrand and must stay below ``tail_bound``.
    """
    u, T_samples = _as_callable(u_star)
    if T is None:
        T = T_samples if T_samples is not None else 30.0

    def g(x):
        xs = np.array([x], dtype=float)
        uu = u(xs)
        return float(np.einsum("mi,mij,mj->m", uu, B(xs), uu)[0])

    val, err = quad(g, -T, T, limit=400, epsabs=1e-13, epsrel=1e-12, points=[0.0])
    if not np.isfinite(val) or err > 1e-9:
        raise QuadratureError(f"quadrature did not converge (error estimate {err:.2e})")
    if T_samples is None:
        tail = _tail_estimate(g, T)
        if tail > tail_bound:
            raise QuadratureError(f"tail beyond |x| = {T} estimated at {tail:.2e}")
    return -val


def lambda_prime_grid(B: Perturbation, xs, u):
    """Simpson-rule variant of ``lambda_prime`` on samples u (m, n) at xs."""
    xs = np.asarray(xs, dtype=float)
    integrand = np.einsum("mi,mij,mj->m", u, B(xs), u)
    return -float(simpson(integrand, x=xs))


def eigenvalue_shift(B: Perturbation, u_star, eps=1.0):
    """Predicted first-order shift of the eigenvalue of L + eps B."""
    return -eps * lambda_prime(B, u_star)


# ------------------------------------------- generalized eigenfunctions

@dataclass
class GeneralizedEigenfunctions:
    xs: np.ndarray
    z: list
    multipliers: np.ndarray
    scales: np.ndarray
    normalization: str = "unit sup-norm over [0, p)"

    def __len__(self):
        return len(self.z)


def _center_vectors(fdata: FloquetData, tol=1e-6):
    w, V = np.linalg.eig(fdata.M)
    center = np.abs(np.abs(w) - 1.0) < tol
    if np.any(center & (np.abs(w.imag) < 1e-7)):
        raise FloquetError("real unit multiplier: lambda0 sits at a band edge")
    keep = center & (w.imag > 0)
    return w[keep], V[:, keep]


def bloch_solution(fdata: FloquetData, mu, v, xs):
    """psi(x) = Phi(x mod p) v mu^k for x = kp + tau; psi(x + p) = mu psi(x)."""
    xs = np.asarray(xs, dtype=float)
    p = fdata.period
    k = np.floor(xs / p)
    tau = xs - k * p
    phis = fdata.fundamental(tau)
    return np.einsum("mij,j->mi", phis, v) * mu ** k[:, None]


def generalized_eigenfunctions(potential: Potential, lam0, xs,
                               cfg: MatchingConfig = MatchingConfig(),
                               fdata: FloquetData | None = None) -> GeneralizedEigenfunctions:
    """Real bounded solutions Re/Im of each Bloch wave with |mu| = 1, Im mu > 0."""
    if fdata is None:
        fdata = infinity_floquet(potential, lam0, cfg)
    n = potential.n
    mus, V = _center_vectors(fdata)
    one_period = np.linspace(0.0, fdata.period, 401)[:-1]
    zs, scales = [], []
    for mu, v in zip(mus, V.T):
        i = int(np.argmax(np.abs(v[:n])))
        v = v * np.conj(v[i]) / abs(v[i])  # u-component of largest modulus real at x = 0
        psi = bloch_solution(fdata, mu, v, xs)[:, :n]
        ref = bloch_solution(fdata, mu, v, one_period)[:, :n]
        for part, ref_part in ((psi.real, ref.real), (psi.imag, ref.imag)):
            s = float(np.max(np.abs(ref_part)))
            zs.append(part / s)
            scales.append(s)
    if len(zs) != fdata.center_count:
        raise FloquetError(f"expected {fdata.center_count} bounded solutions, built {len(zs)}")
    return GeneralizedEigenfunctions(np.asarray(xs, dtype=float), zs, mus, np.array(scales))


# --------------------------------------------------------- functionals

@dataclass(frozen=True)
class FunctionalValue:
    value: float
    main: float
    correction: float


def tangent_functional(B: Perturbation, z, u, lam_prime_B, xs) -> FunctionalValue:
    """``-int <z, B u> + lambda'(0)B int <z, u>`` by Simpson's rule on the grid xs."""
    xs = np.asarray(xs, dtype=float)
    z, u = np.asarray(z), np.asarray(u)
    if z.shape != u.shape or z.shape[0] != len(xs):
        raise ValueError("z, u and the grid must share their sample points")
    main = -float(simpson(np.einsum("mi,mij,mj->m", z, B(xs), u), x=xs))
    correction = float(lam_prime_B) * float(simpson(np.sum(z * u, axis=1), x=xs))
    return FunctionalValue(main + correction, main, correction)


def example_functional(B: Perturbation, z, u, xs):
    """Reduced form ``int sum_k b_1k z_k u_1`` (coupling row of the first component)."""
    xs = np.asarray(xs, dtype=float)
    b = B(xs)
    z, u = np.asarray(z), np.asarray(u)
    integrand = np.sum(b[:, 0, 1:] * z[:, 1:], axis=1) * u[:, 0]
    return float(simpson(integrand, x=xs))


class Codimension(NamedTuple):
    two_m: int
    iota_range: int


def codimension(fdata: FloquetData) -> Codimension:
    """Manifold codimension 2m and the codimension 2m + 1 of the matching-map range."""
    return Codimension(int(fdata.center_count), int(fdata.center_count) + 1)


@dataclass
class TangentData:
    lam0: float
    xs: np.ndarray
    u: np.ndarray
    gen: GeneralizedEigenfunctions
    codim: Codimension
    u_callable: object = field(repr=False, default=None)

    @property
    def z(self):
        return self.gen.z

    def lambda_prime(self, B: Perturbation):
        return lambda_prime(B, self.u_callable) if self.u_callable is not None \
            else lambda_prime_grid(B, self.xs, self.u)

    def functionals(self, B: Perturbation):
        lp = self.lambda_prime(B)
        return [tangent_functional(B, z, self.u, lp, self.xs) for z in self.z]

    def functional_vector(self, B: Perturbation):
        return np.array([f.value for f in self.functionals(B)])

    def gram_determinant(self):
        """Gram determinant of the unit-normalised integrand profiles <z_k, .> u_1."""
        rows = []
        for z in self.z:
            prof = z[:, 1:] * self.u[:, :1]
            nrm = np.sqrt(simpson(np.sum(prof * prof, axis=1), x=self.xs))
            rows.append(prof / nrm)
        G = np.array([[simpson(np.sum(a * b, axis=1), x=self.xs) for b in rows] for a in rows])
        return float(np.linalg.det(G))


def tangent_data(potential: Potential, lam0, u_star, xs=None,
                 cfg: MatchingConfig = MatchingConfig()) -> TangentData:
    """Collect u*, the bounded solutions z_k and the codimension at lam0.

    ``u_star`` is an ``Eigenfunction`` (its grid is used) or a callable
    together with a grid ``xs``.
    """
    if isinstance(u_star, Eigenfunction):
        xs, u, call = u_star.xs, u_star.u, None
    else:
        if xs is None:
            raise ValueError("a grid is required with a callable eigenfunction")
        xs = np.asarray(xs, dtype=float)
        u, call = np.asarray(u_star(xs)), u_star
    fdata = infinity_floquet(potential, lam0, cfg)
    gen = generalized_eigenfunctions(potential, lam0, xs, cfg, fdata)
    return TangentData(float(lam0), xs, u, gen, codimension(fdata), call)


# --------------------------------------------------------- directions

DEFAULT_CORRECTIONS = (profile("sech2"), profile("tanh_sech2"),
                       profile("sech2", shift=1.0), profile("sech2", shift=-1.0))


def project_to_tangent(td: TangentData, f, entry=1, corrections=DEFAULT_CORRECTIONS,
                       beta=2.0, n=2) -> Perturbation:
    """T_beta direction b_1k = f - sum_j a_j g_j with every functional zero, unit X_beta norm.

    The coefficients a_j solve the (least-squares) system F_k(f) = sum_j a_j F_k(g_j).
    """
    k = len(td.z)
    if k == 0:
        return make_perturbation("T_beta", {(0, entry): f}, beta=beta, n=n).normalized()
    gs = list(corrections)[:max(k, 1)]
    if len(gs) < k:
        raise ValueError(f"need at least {k} correction profiles")

    def F(prof):
        return td.functional_vector(make_perturbation("T_beta", {(0, entry): prof}, beta=beta,
                                                      n=n, validate=False))

    rhs = F(f)
    mat = np.column_stack([F(g) for g in gs])
    a = np.linalg.lstsq(mat, rhs, rcond=None)[0]
    terms = [(1.0, f)] + [(-aj, g) for aj, g in zip(a, gs)]

    def b(x):
        x = np.asarray(x, dtype=float)
        return sum(c * g(x) for c, g in terms)

    return make_perturbation("T_beta", {(0, entry): b}, beta=beta, n=n).normalized()


def random_profile(rng, n_terms=3):
    """Random decaying scalar profile: shifted sech^2/gaussian terms."""
    terms = []
    for _ in range(n_terms):
        c = rng.normal()
        shift = rng.uniform(-2.0, 2.0)
        if rng.random() < 0.5:
            terms.append((c, profile("sech2", shift=shift)))
        else:
            terms.append((c, profile("gauss", shift=shift, width=rng.uniform(0.5, 2.0))))

    def f(x):
        x = np.asarray(x, dtype=float)
        return sum(c * g(x) for c, g in terms)

    return f


# -------------------------------------------------------------- scans

@dataclass
class PersistenceRow:
    epsilon: float
    lambda_min: float
    sigma_min: float
    flagged: bool


@dataclass
class PersistenceScan:
    rows: list
    exponent: float
    direction: str

    @property
    def all_flagged(self):
        return all(r.flagged for r in self.rows)


def fit_exponent(eps, sigma):
    """Slope of log sigma against log eps over the three smallest eps."""
    eps, sigma = np.asarray(eps, dtype=float), np.asarray(sigma, dtype=float)
    order = np.argsort(eps)[:3]
    if len(order) < 2 or np.any(sigma[order] <= 0):
        return float("nan")
    return float(np.polyfit(np.log(eps[order]), np.log(sigma[order]), 1)[0])


def persistence_scan(potential: Potential, lam0, direction: Perturbation, eps_list,
                     cfg: MatchingConfig = MatchingConfig(), threads=1) -> PersistenceScan:
    """Minimised mismatch near lam0 for B = eps * direction, eps in eps_list."""
    eps_list = [float(e) for e in eps_list]
    if any(e <= 0 for e in eps_list):
        raise ValueError("epsilon values must be positive")

    def run(eps):
        c = find_embedded_eigenvalue(potential, lam0, direction.scaled(eps), cfg)
        return PersistenceRow(eps, c.lam, c.mismatch, c.flagged)

    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            rows = list(ex.map(run, eps_list))
    else:
        rows = [run(e) for e in eps_list]
    exponent = fit_exponent([r.epsilon for r in rows], [r.sigma_min for r in rows])
    return PersistenceScan(rows, exponent, direction.description)
