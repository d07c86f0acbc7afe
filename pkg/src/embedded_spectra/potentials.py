"""Potentials A, periodic backgrounds A_p, perturbations B and the X_beta norm.

Every matrix field here is a vectorised callable ``xs (m,) -> (m, n, n)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import minimize_scalar

from .errors import ConfigError

PERTURBATION_CLASSES = ("full", "diagonal", "offdiag_row1", "T_beta")


def sech(x):
    with np.errstate(over="ignore"):
        return 1.0 / np.cosh(x)


def _bump(a, b):
    mid, half = 0.5 * (a + b), 0.5 * (b - a)

    def f(x):
        t = (np.asarray(x, dtype=float) - mid) / half
        out = np.zeros_like(t)
        inside = np.abs(t) < 1
        out[inside] = np.exp(1.0 - 1.0 / (1.0 - t[inside] ** 2))
        return out

    return f


def profile(name, **params) -> Callable[[np.ndarray], np.ndarray]:
    """Scalar decaying profiles used to build perturbations.

    ``sech2``: sech^2(x - shift); ``sech``: sech(x - shift);
    ``tanh_sech2``: tanh(x) sech^2(x) (odd); ``gauss``: exp(-(x - shift)^2 / width^2);
    ``bump``: smooth bump with support [a, b] and peak 1; ``zero``.
    """
    shift = params.get("shift", 0.0)
    if name == "sech2":
        return lambda x: sech(np.asarray(x) - shift) ** 2
    if name == "sech":
        return lambda x: sech(np.asarray(x) - shift)
    if name == "tanh_sech2":
        return lambda x: np.tanh(np.asarray(x) - shift) * sech(np.asarray(x) - shift) ** 2
    if name == "gauss":
        width = params.get("width", 1.0)
        return lambda x: np.exp(-((np.asarray(x) - shift) / width) ** 2)
    if name == "bump":
        return _bump(params.get("a", 1.0), params.get("b", 2.0))
    if name == "zero":
        return lambda x: np.zeros_like(np.asarray(x, dtype=float))
    raise ConfigError(f"unknown profile {name!r}")


def combine(terms):
    """Linear combination sum_j c_j f_j of profiles given as (c_j, f_j) pairs."""
    terms = list(terms)

    def f(x):
        x = np.asarray(x, dtype=float)
        return sum(c * g(x) for c, g in terms) + np.zeros_like(x)

    return f


@dataclass(frozen=True)
class XBetaNorm:
    value: float
    argmax: float
    refinement_defect: float
    window_defect: float

    def __float__(self):
        return self.value


def _weighted_sup(F, beta, xs):
    vals = np.max(np.abs(np.asarray(F(xs)).reshape(len(xs), -1)), axis=1)
    if not np.all(np.isfinite(vals)):
        raise ValueError("non-finite samples in matrix field")
    return vals * (1.0 + np.abs(xs)) ** beta


def _scan(F, beta, window, n_grid):
    xs = np.linspace(-window, window, n_grid)
    w = _weighted_sup(F, beta, xs)
    i = int(np.argmax(w))
    best, arg = w[i], xs[i]
    lo, hi = xs[max(i - 1, 0)], xs[min(i + 1, n_grid - 1)]
    if hi > lo:
        res = minimize_scalar(lambda t: -_weighted_sup(F, beta, np.array([t]))[0],
                              bounds=(lo, hi), method="bounded", options={"xatol": 1e-12})
        if -res.fun > best:
            best, arg = -res.fun, res.x
    return float(best), float(arg)


def xbeta_norm(F, beta, window=30.0, n_grid=20001) -> XBetaNorm:
    """sup_x |F(x)|_max (1 + |x|)^beta over [-window, window].

    Dense sampling plus bounded local refinement of the argmax bracket.  The
    result carries the change against a half-density grid and against a
    doubled window.
    """
    if not beta > 1:
        raise ValueError("beta must exceed 1")
    if not window > 0:
        raise ValueError("window must be positive")
    value, arg = _scan(F, beta, window, n_grid)
    coarse, _ = _scan(F, beta, window, (n_grid + 1) // 2)
    wide, _ = _scan(F, beta, 2 * window, 2 * n_grid - 1)
    return XBetaNorm(value, arg, abs(value - coarse), abs(wide - value))


@dataclass(frozen=True)
class Potential:
    n: int
    A: Callable[[np.ndarray], np.ndarray]
    Ap: Callable[[np.ndarray], np.ndarray]
    period: float
    beta: float = 2.0
    name: str = "potential"
    diagonal: bool = False

    def difference(self, xs):
        return self.A(xs) - self.Ap(xs)

    def symmetry_defect(self, xs):
        a = self.A(np.asarray(xs, dtype=float))
        return float(np.max(np.abs(a - np.swapaxes(a, 1, 2))))

    def periodicity_defect(self, xs):
        xs = np.asarray(xs, dtype=float)
        return float(np.max(np.abs(self.Ap(xs + self.period) - self.Ap(xs))))

    def asymptotic_norm(self, window=30.0):
        """Weighted norm of A - A_p and its change when the window doubles."""
        return xbeta_norm(self.difference, self.beta, window=window)


@dataclass(frozen=True)
class Perturbation:
    B: Callable[[np.ndarray], np.ndarray]
    n: int
    beta: float
    cls: str
    epsilon: float = 1.0
    description: str = field(default="", compare=False)

    def __call__(self, xs):
        return self.epsilon * self.B(np.asarray(xs, dtype=float))

    def scaled(self, eps):
        return Perturbation(self.B, self.n, self.beta, self.cls, eps * self.epsilon,
                            self.description)

    def norm(self, window=30.0):
        return xbeta_norm(self, self.beta, window=window)

    def normalized(self, window=30.0):
        """Same direction with unit X_beta norm (epsilon absorbed)."""
        nrm = self.norm(window).value
        if nrm == 0:
            raise ValueError("cannot normalise the zero perturbation")
        B, eps = self.B, self.epsilon
        return Perturbation(lambda xs: (eps / nrm) * B(xs), self.n, self.beta, self.cls, 1.0,
                            self.description)

    def entry(self, i, j):
        return lambda xs: self(xs)[:, i, j]


def zero_perturbation(n, beta=2.0):
    return Perturbation(lambda xs: np.zeros((len(xs), n, n)), n, beta, "full", 1.0, "zero")


def make_perturbation(cls, profiles, epsilon=1.0, beta=2.0, n=2, window=30.0,
                      validate=True) -> Perturbation:
    """Build a symmetric perturbation of the requested class.

    ``profiles`` maps entry positions to scalar callables:

    * ``diagonal``: {i: f} or {(i, i): f}
    * ``offdiag_row1``: a single entry {(0, k): f}, k > 0
    * ``T_beta``: entries {(0, k): f} for any k > 0 (zero diagonal)
    * ``full``: any {(i, j): f}; the transposed entry is filled in
    """
    if cls not in PERTURBATION_CLASSES:
        raise ConfigError(f"unknown perturbation class {cls!r}")
    entries = {}
    for key, f in profiles.items():
        i, j = (key, key) if isinstance(key, (int, np.integer)) else key
        i, j = min(i, j), max(i, j)
        if not (0 <= i < n and 0 <= j < n):
            raise ConfigError(f"entry {(i, j)} outside a {n}x{n} matrix")
        entries[(i, j)] = f
    if cls == "diagonal" and any(i != j for i, j in entries):
        raise ConfigError("diagonal class accepts diagonal entries only")
    if cls in ("offdiag_row1", "T_beta"):
        if any(i != 0 or j == 0 for i, j in entries):
            raise ConfigError(f"{cls} admits only entries (1, k), k > 1, with zero diagonal")
        if cls == "offdiag_row1" and len(entries) != 1:
            raise ConfigError("offdiag_row1 takes exactly one coupling entry")

    def B(xs):
        xs = np.asarray(xs, dtype=float)
        out = np.zeros((len(xs), n, n))
        for (i, j), f in entries.items():
            v = f(xs)
            out[:, i, j] = v
            out[:, j, i] = v
        return out

    pert = Perturbation(B, n, beta, cls, epsilon, description=f"{cls}:{sorted(entries)}")
    if validate:
        nrm = pert.norm(window)
        if not np.isfinite(nrm.value) or nrm.window_defect > 1e-8 * max(1.0, nrm.value):
            raise ConfigError(f"profile does not decay like (1+|x|)^-{beta}: weighted sup "
                              f"changes by {nrm.window_defect:.3e} when the window doubles")
    return pert


def validate_perturbation(pert: Perturbation, xs=None):
    """Structural checks: symmetry and class constraints. Returns the max defect."""
    xs = np.linspace(-20, 20, 801) if xs is None else np.asarray(xs, dtype=float)
    b = pert(xs)
    defect = float(np.max(np.abs(b - np.swapaxes(b, 1, 2))))
    if pert.cls == "diagonal":
        off = b - np.einsum("mii->mi", b)[:, :, None] * np.eye(pert.n)
        defect = max(defect, float(np.max(np.abs(off))))
    if pert.cls in ("offdiag_row1", "T_beta"):
        mask = np.ones((pert.n, pert.n), dtype=bool)
        mask[0, 1:] = False
        mask[1:, 0] = False
        defect = max(defect, float(np.max(np.abs(b[:, mask]))))
    return defect


@dataclass(frozen=True)
class Example5:
    lambda0: float
    potential: Potential
    u_star: Callable[[np.ndarray], np.ndarray]
    u_star_prime: Callable[[np.ndarray], np.ndarray]
    metadata: dict


def make_example5(lambda0, beta=2.0) -> Example5:
    """Sech well coupled diagonally to a Mathieu background, period pi.

    A = diag(1 - 2 sech^2 x + lambda0, 2 cos 2x) and A_p = diag(1 + lambda0, 2 cos 2x).
    The first component -u'' + (1 - 2 sech^2) u = 0 is solved by sech, so
    lambda0 is an eigenvalue with eigenfunction (sech x / sqrt 2, 0).
    """
    lam0 = float(lambda0)
    c = 1.0 / np.sqrt(2.0)

    def A(xs):
        xs = np.asarray(xs, dtype=float)
        out = np.zeros((len(xs), 2, 2))
        out[:, 0, 0] = 1.0 - 2.0 * sech(xs) ** 2 + lam0
        out[:, 1, 1] = 2.0 * np.cos(2.0 * xs)
        return out

    def Ap(xs):
        xs = np.asarray(xs, dtype=float)
        out = np.zeros((len(xs), 2, 2))
        out[:, 0, 0] = 1.0 + lam0
        out[:, 1, 1] = 2.0 * np.cos(2.0 * xs)
        return out

    def u_star(xs):
        xs = np.asarray(xs, dtype=float)
        return np.stack([c * sech(xs), np.zeros_like(xs)], axis=-1)

    def u_star_prime(xs):
        xs = np.asarray(xs, dtype=float)
        return np.stack([-c * sech(xs) * np.tanh(xs), np.zeros_like(xs)], axis=-1)

    pot = Potential(2, A, Ap, np.pi, beta, name="example5", diagonal=True)
    meta = {
        "lambda0": lam0,
        "beta": beta,
        "period": np.pi,
        "eigenfunction": "(sech x / sqrt(2), 0)",
        "normalization": "unit L2",
        "exact_eigenpair": "L u* = lambda0 u* holds identically",
    }
    return Example5(lam0, pot, u_star, u_star_prime, meta)


def scalar_potential(Vp, period, name, A=None, beta=2.0):
    """n = 1 potential from vectorised scalar callables."""
    Vp_m = lambda xs: np.asarray(Vp(np.asarray(xs, dtype=float)), dtype=float)[:, None, None]
    A_m = Vp_m if A is None else (
        lambda xs: np.asarray(A(np.asarray(xs, dtype=float)), dtype=float)[:, None, None])
    return Potential(1, A_m, Vp_m, period, beta, name=name, diagonal=True)


def mathieu_potential(q=1.0):
    return scalar_potential(lambda x: 2.0 * q * np.cos(2.0 * x), np.pi, f"mathieu(q={q})")


def free_potential(period=np.pi):
    return scalar_potential(lambda x: np.zeros_like(x), period, "free")


def constant_potential(values, period=1.0):
    """Constant diagonal A = A_p = diag(values)."""
    D = np.diag(np.asarray(values, dtype=float))
    f = lambda xs: np.broadcast_to(D, (len(xs),) + D.shape).copy()
    return Potential(D.shape[0], f, f, period, 2.0, name=f"constant{tuple(values)}", diagonal=True)


def table_potential(x, A_values, Ap_values, period, beta=2.0, name="table"):
    """Cubic interpolation of sampled (x, n x n) tables.

    ``Ap_values`` must be sampled on one period starting at x[0] of the
    periodic grid given by ``np.linspace(0, period, len(Ap_values))`` and is
    interpolated with periodic boundary conditions; outside the sampled
    range of ``A`` the periodic part is used.
    """
    x = np.asarray(x, dtype=float)
    A_values = np.asarray(A_values, dtype=float)
    Ap_values = np.asarray(Ap_values, dtype=float)
    n = A_values.shape[1]
    xp = np.linspace(0.0, period, len(Ap_values))
    Ap_vals = Ap_values.copy()
    Ap_vals[-1] = Ap_vals[0]
    ap_spline = CubicSpline(xp, Ap_vals, axis=0, bc_type="periodic")
    diff_spline = CubicSpline(x, A_values - ap_spline(np.mod(x, period)), axis=0)

    def Ap(xs):
        xs = np.asarray(xs, dtype=float)
        return ap_spline(np.mod(xs, period))

    def A(xs):
        xs = np.asarray(xs, dtype=float)
        d = diff_spline(np.clip(xs, x[0], x[-1]))
        d[(xs < x[0]) | (xs > x[-1])] = 0.0
        return Ap(xs) + d

    return Potential(n, A, Ap, period, beta, name=name)
