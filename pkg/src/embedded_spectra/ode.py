"""Initial-value integration of linear ODEs Y' = C(x) Y.

All systems here are linear, so the coefficient field can be evaluated at
every stage abscissa of a step in one vectorised call before the stage
arithmetic runs.  The adaptive Dormand-Prince loop lives in
``_dopri_kernel`` (compiled) with ``_dopri_py`` as fallback.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import _backend
from .errors import IntegrationError, NonFiniteCoefficient, RankCollapse


@dataclass(frozen=True)
class IntegratorConfig:
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    max_step: float = 0.5
    renorm_interval: float = 1.0
    kernel: str | None = None

    def __post_init__(self):
        for name in ("rel_tol", "abs_tol", "max_step", "renorm_interval"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")


DEFAULT_CONFIG = IntegratorConfig()


@dataclass(frozen=True)
class CoefficientField:
    """Matrix field x -> C(x) of size dim x dim.

    ``batch`` maps an array of abscissae (m,) to an array (m, dim, dim); when
    omitted it is built by stacking pointwise calls of ``func``.
    """

    func: Callable[[float], np.ndarray] | None
    dim: int
    batch: Callable[[np.ndarray], np.ndarray] | None = None
    domain: tuple[float, float] = (-np.inf, np.inf)
    name: str = field(default="field", compare=False)

    def __call__(self, x):
        return self.eval_many(np.array([x], dtype=float))[0]

    def eval_many(self, xs):
        xs = np.asarray(xs, dtype=float)
        if self.batch is not None:
            return self.batch(xs)
        return np.stack([np.asarray(self.func(x), dtype=float) for x in xs])

    @classmethod
    def constant(cls, C, name="constant"):
        C = np.array(C, dtype=float)
        return cls(func=None, dim=C.shape[0],
                   batch=lambda xs: np.broadcast_to(C, (len(xs),) + C.shape),
                   name=name)

    @classmethod
    def from_callable(cls, func, dim, name="field"):
        return cls(func=func, dim=dim, name=name)

    def shifted(self, shift_matrix):
        """Field C(x) + S for a constant matrix S."""
        S = np.asarray(shift_matrix, dtype=float)
        inner = self
        return CoefficientField(func=None, dim=self.dim,
                                batch=lambda xs: inner.eval_many(xs) + S,
                                domain=self.domain, name=f"{self.name}+shift")


def schrodinger_field(potential_batch, n, lam, name="schrodinger"):
    """First-order field [[0, I], [Q(x) - lam I, 0]] for -u'' + Q u = lam u.

    ``potential_batch`` maps xs (m,) to symmetric matrices (m, n, n).
    """
    eye = np.eye(n)

    def batch(xs):
        Q = np.asarray(potential_batch(xs), dtype=float).reshape(len(xs), n, n)
        out = np.zeros((len(xs), 2 * n, 2 * n))
        out[:, :n, n:] = eye
        out[:, n:, :n] = Q - lam * eye
        return out

    return CoefficientField(func=None, dim=2 * n, batch=batch, name=name)


def _check_domain(fld, *xs):
    lo, hi = fld.domain
    for x in xs:
        if not (lo <= x <= hi):
            raise IntegrationError(f"x={x} outside field domain {fld.domain}")


def _initial_step(span, cfg):
    return min(cfg.max_step, 1e-3 * max(1.0, abs(span)))


def integrate_on_grid(fld: CoefficientField, xs, Y0, cfg: IntegratorConfig = DEFAULT_CONFIG,
                      h0=None):
    """Solve Y' = C(x)Y from xs[0] and return Y at every abscissa of ``xs``.

    ``xs`` must be monotone (increasing or decreasing).  Returns an array of
    shape (len(xs),) + Y0.shape and the step size suggested for continuing.
    """
    xs = np.ascontiguousarray(xs, dtype=float)
    Y0 = np.asarray(Y0, dtype=float)
    vector = Y0.ndim == 1
    Y = np.ascontiguousarray(Y0.reshape(Y0.shape[0], -1))
    if Y.shape[0] != fld.dim:
        raise ValueError(f"state has {Y.shape[0]} rows, field dimension is {fld.dim}")
    if not np.all(np.isfinite(Y)):
        raise NonFiniteCoefficient("non-finite initial condition")
    d = np.diff(xs)
    if len(d) and not (np.all(d >= 0) or np.all(d <= 0)):
        raise ValueError("output abscissae must be monotone")
    _check_domain(fld, xs[0], xs[-1])
    kernel = _backend.get_kernel(cfg.kernel)
    if h0 is None:
        h0 = _initial_step(xs[-1] - xs[0], cfg)
    out, h_next, _, _ = kernel(fld.eval_many, float(xs[0]), xs, Y,
                               cfg.rel_tol, cfg.abs_tol, cfg.max_step, float(h0))
    if vector:
        out = out[:, :, 0]
    return out, h_next


def integrate_matrix_ode(fld: CoefficientField, x0, x1, Y0, cfg: IntegratorConfig = DEFAULT_CONFIG):
    """Y(x1) for Y' = C(x)Y, Y(x0) = Y0; x1 < x0 integrates backwards."""
    out, _ = integrate_on_grid(fld, [x0, x1], np.asarray(Y0, dtype=float), cfg)
    return out[-1]


def integrate_vector_ode(fld: CoefficientField, x0, x1, v0, cfg: IntegratorConfig = DEFAULT_CONFIG):
    v0 = np.asarray(v0, dtype=float)
    if v0.ndim != 1:
        raise ValueError("v0 must be a vector")
    out, _ = integrate_on_grid(fld, [x0, x1], v0, cfg)
    return out[-1]


def fundamental_matrix(fld: CoefficientField, xs, cfg: IntegratorConfig = DEFAULT_CONFIG):
    """Phi(x) with Phi(xs[0]) = I, sampled at every abscissa of xs."""
    out, _ = integrate_on_grid(fld, xs, np.eye(fld.dim), cfg)
    return out


def _qr_positive(Y):
    Q, R = np.linalg.qr(Y)
    signs = np.sign(np.diag(R))
    signs[signs == 0] = 1.0
    return Q * signs, R * signs[:, None]


def _check_rank(R, x):
    d = np.abs(np.diag(R))
    if d.size and d.min() <= 1e-12 * d.max():
        raise RankCollapse(f"propagated basis lost rank near x={x}")


@dataclass
class SubspaceTrajectory:
    """Renormalised propagation of a basis, sampled on a grid.

    ``raw[i]`` is the propagated start-of-segment basis at ``xs[i]``;
    ``segment[i]`` the index of that segment; ``factors[j]`` is the
    triangular factor removed at the end of segment j.
    """

    xs: np.ndarray
    raw: np.ndarray
    segment: np.ndarray
    factors: list
    final: np.ndarray

    def solution(self, coeffs):
        """Samples of the solution equal to ``final @ coeffs`` at the end point."""
        c = np.asarray(coeffs)
        nseg = len(self.factors)
        seg_coeffs = [None] * nseg
        for j in range(nseg - 1, -1, -1):
            c = np.linalg.solve(self.factors[j], c)
            seg_coeffs[j] = c
        vals = np.empty((len(self.xs), self.raw.shape[1]), dtype=np.result_type(self.raw, c))
        for i in range(len(self.xs)):
            vals[i] = self.raw[i] @ seg_coeffs[self.segment[i]]
        return vals


def _segments(x0, x1, step):
    n = max(1, int(np.ceil(abs(x1 - x0) / step - 1e-12)))
    return np.linspace(x0, x1, n + 1)


def _propagate(fld, basis, x0, x1, cfg, sample_xs=None):
    basis = np.asarray(basis, dtype=float)
    if basis.ndim == 1:
        basis = basis[:, None]
    N, k = basis.shape
    if k > N:
        raise ValueError("basis has more columns than the state dimension")
    gram = basis.T @ basis
    if not np.allclose(gram, np.eye(k), atol=1e-8):
        raise ValueError("basis columns must be orthonormal")
    Q = basis.copy()
    if x0 == x1:
        return Q, None
    bps = _segments(x0, x1, cfg.renorm_interval)
    sign = np.sign(x1 - x0)
    if sample_xs is not None:
        sample_xs = np.asarray(sample_xs, dtype=float)
        sample_xs = sample_xs[np.argsort(sign * sample_xs, kind="stable")]
    xs_rec, raw_rec, seg_rec, factors = [], [], [], []
    h = None
    for j in range(len(bps) - 1):
        a, b = bps[j], bps[j + 1]
        pts = [a]
        if sample_xs is not None:
            lo, hi = sorted((a, b))
            inside = sample_xs[(sample_xs >= lo) & (sample_xs <= hi)]
            if j > 0:
                inside = inside[inside != a]
            pts.extend(p for p in inside if p != a)
        if pts[-1] != b:
            pts.append(b)
        pts = np.array(pts)
        out, h = integrate_on_grid(fld, pts, Q, cfg, h0=h)
        if sample_xs is not None:
            keep = np.isin(pts, sample_xs)
            if j > 0:
                keep[0] = False
            elif not np.isin(a, sample_xs):
                keep[0] = False
            xs_rec.extend(pts[keep])
            raw_rec.extend(out[keep])
            seg_rec.extend([j] * int(keep.sum()))
        Qn, R = _qr_positive(out[-1])
        _check_rank(R, b)
        factors.append(R)
        Q = Qn
    traj = None
    if sample_xs is not None:
        traj = SubspaceTrajectory(np.array(xs_rec), np.array(raw_rec),
                                  np.array(seg_rec, dtype=int), factors, Q)
    return Q, traj


def evolve_subspace(fld: CoefficientField, basis, x0, x1, cfg: IntegratorConfig = DEFAULT_CONFIG):
    """Orthonormal basis of the image of span(basis) under the flow x0 -> x1."""
    Q, _ = _propagate(fld, basis, x0, x1, cfg)
    return Q


def subspace_trajectory(fld: CoefficientField, basis, x0, x1, sample_xs,
                        cfg: IntegratorConfig = DEFAULT_CONFIG) -> SubspaceTrajectory:
    """Like ``evolve_subspace`` but keeps samples for solution reconstruction."""
    _, traj = _propagate(fld, basis, x0, x1, cfg, sample_xs=sample_xs)
    return traj


def principal_angles(A, B):
    """Principal angles (radians) between the column spans of A and B.

    Uses cosines and sines together so small angles keep full accuracy.
    """
    Qa = np.linalg.qr(np.asarray(A))[0]
    Qb = np.linalg.qr(np.asarray(B))[0]
    if Qa.shape[1] < Qb.shape[1]:
        Qa, Qb = Qb, Qa
    M = Qa.conj().T @ Qb
    cos = np.sort(np.linalg.svd(M, compute_uv=False))[::-1]
    sin = np.sort(np.linalg.svd(Qb - Qa @ M, compute_uv=False))
    return np.arctan2(sin, np.clip(cos, 0.0, 1.0))
