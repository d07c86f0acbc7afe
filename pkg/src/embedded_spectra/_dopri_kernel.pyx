# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled Dormand-Prince 5(4) loop for linear systems Y' = C(x) Y.

Mirrors ``_dopri_py.dopri5`` step for step; the two must stay in sync.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, sqrt, pow, isfinite

from .errors import NonFiniteCoefficient, StepSizeUnderflow, IntegrationError

cnp.import_array()

cdef double A21 = 1.0 / 5.0
cdef double A31 = 3.0 / 40.0, A32 = 9.0 / 40.0
cdef double A41 = 44.0 / 45.0, A42 = -56.0 / 15.0, A43 = 32.0 / 9.0
cdef double A51 = 19372.0 / 6561.0, A52 = -25360.0 / 2187.0
cdef double A53 = 64448.0 / 6561.0, A54 = -212.0 / 729.0
cdef double A61 = 9017.0 / 3168.0, A62 = -355.0 / 33.0, A63 = 46732.0 / 5247.0
cdef double A64 = 49.0 / 176.0, A65 = -5103.0 / 18656.0
cdef double B1 = 35.0 / 384.0, B3 = 500.0 / 1113.0, B4 = 125.0 / 192.0
cdef double B5 = -2187.0 / 6784.0, B6 = 11.0 / 84.0
cdef double E1 = 71.0 / 57600.0, E3 = -71.0 / 16695.0, E4 = 71.0 / 1920.0
cdef double E5 = -17253.0 / 339200.0, E6 = 22.0 / 525.0, E7 = -1.0 / 40.0

cdef double SAFE = 0.9, BETA = 0.04, FACMIN = 0.2, FACMAX = 10.0


cdef inline void _matmul(const double[:, :, ::1] C, int s, const double* y,
                         double* out, int N, int K) noexcept nogil:
    cdef int i, j, l
    cdef double acc
    for i in range(N):
        for l in range(K):
            acc = 0.0
            for j in range(N):
                acc = acc + C[s, i, j] * y[j * K + l]
            out[i * K + l] = acc


def dopri5(object batch_eval, double x0, double[::1] xout, double[:, ::1] Y0,
           double rtol, double atol, double max_step, double h0):
    """Integrate from ``x0`` through every abscissa of ``xout`` (monotone).

    Returns ``(Y_out, h_next, n_accepted, n_rejected)``.
    """
    cdef int N = Y0.shape[0], K = Y0.shape[1], M = N * K
    cdef int nout = xout.shape[0]
    cdef double direction = 1.0
    if nout > 0 and xout[nout - 1] < x0:
        direction = -1.0

    out_arr = np.empty((nout, N, K), dtype=np.float64)
    cdef double[:, :, ::1] out = out_arr
    work_arr = np.zeros((10, M), dtype=np.float64)
    cdef double[:, ::1] w = work_arr
    cdef double* y = &w[0, 0]
    cdef double* ys = &w[1, 0]
    cdef double* yn = &w[2, 0]
    cdef double* k1 = &w[3, 0]
    cdef double* k2 = &w[4, 0]
    cdef double* k3 = &w[5, 0]
    cdef double* k4 = &w[6, 0]
    cdef double* k5 = &w[7, 0]
    cdef double* k6 = &w[8, 0]
    cdef double* k7 = &w[9, 0]
    nodes_arr = np.empty(6, dtype=np.float64)
    cdef double[::1] nodes = nodes_arr
    cdef double[:, :, ::1] C

    cdef int i, j, l, idx = 0
    cdef double x = x0, h = fabs(h0), hs, h_prop, target, err, sk, diff, fac, fac11, hnew
    cdef double errold = 1e-4
    cdef bint last_rejected = False, hit
    cdef long n_acc = 0, n_rej = 0

    for i in range(N):
        for l in range(K):
            y[i * K + l] = Y0[i, l]

    while idx < nout and xout[idx] == x0:
        for i in range(N):
            for l in range(K):
                out[idx, i, l] = y[i * K + l]
        idx += 1

    if h <= 0.0:
        h = 1e-2
    if h > max_step:
        h = max_step

    while idx < nout:
        target = xout[idx]
        hit = False
        h_prop = h
        if h >= fabs(target - x):
            h = fabs(target - x)
            hit = True
        if hit and h <= 1e-13 * (1.0 + fabs(x)):
            # output abscissa coincides with x up to rounding
            x = target
            for i in range(N):
                for l in range(K):
                    out[idx, i, l] = y[i * K + l]
            idx += 1
            h = h_prop
            continue
        if h < 1e-14 * (1.0 + fabs(x)):
            raise StepSizeUnderflow(
                f"step size underflow at x={x!r} (h={h:.3e}); field too stiff")

        hs = direction * h
        nodes[0] = x
        nodes[1] = x + 0.2 * hs
        nodes[2] = x + 0.3 * hs
        nodes[3] = x + 0.8 * hs
        nodes[4] = x + (8.0 / 9.0) * hs
        nodes[5] = x + hs if not hit else target
        C_obj = batch_eval(nodes_arr)
        C = np.ascontiguousarray(C_obj, dtype=np.float64)
        if C.shape[0] != 6 or C.shape[1] != N or C.shape[2] != N:
            raise IntegrationError("coefficient batch has wrong shape")
        for l in range(6):
            for i in range(N):
                for j in range(N):
                    if not isfinite(C[l, i, j]):
                        raise NonFiniteCoefficient(
                            f"non-finite coefficient at x={nodes[l]!r}")

        _matmul(C, 0, y, k1, N, K)
        for i in range(M):
            ys[i] = y[i] + hs * A21 * k1[i]
        _matmul(C, 1, ys, k2, N, K)
        for i in range(M):
            ys[i] = y[i] + hs * (A31 * k1[i] + A32 * k2[i])
        _matmul(C, 2, ys, k3, N, K)
        for i in range(M):
            ys[i] = y[i] + hs * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i])
        _matmul(C, 3, ys, k4, N, K)
        for i in range(M):
            ys[i] = y[i] + hs * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i]
                                 + A54 * k4[i])
        _matmul(C, 4, ys, k5, N, K)
        for i in range(M):
            ys[i] = y[i] + hs * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i]
                                 + A64 * k4[i] + A65 * k5[i])
        _matmul(C, 5, ys, k6, N, K)
        for i in range(M):
            yn[i] = y[i] + hs * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i]
                                 + B5 * k5[i] + B6 * k6[i])
        _matmul(C, 5, yn, k7, N, K)

        err = 0.0
        for i in range(M):
            sk = atol + rtol * (fabs(y[i]) if fabs(y[i]) > fabs(yn[i]) else fabs(yn[i]))
            diff = hs * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i]
                         + E6 * k6[i] + E7 * k7[i]) / sk
            err = err + diff * diff
        err = sqrt(err / M)
        if not isfinite(err):
            raise IntegrationError(f"non-finite error estimate at x={x!r}")

        fac11 = pow(err, 0.2 - BETA * 0.75)
        if err <= 1.0:
            fac = fac11 / pow(errold, BETA)
            fac = fac / SAFE
            if fac < 1.0 / FACMAX:
                fac = 1.0 / FACMAX
            if fac > 1.0 / FACMIN:
                fac = 1.0 / FACMIN
            hnew = h / fac
            if last_rejected and hnew > h:
                hnew = h
            if hit and hnew < h_prop and not last_rejected:
                hnew = h_prop
            errold = err if err > 1e-4 else 1e-4
            last_rejected = False
            n_acc += 1
            for i in range(M):
                y[i] = yn[i]
            if hit:
                x = target
                for i in range(N):
                    for l in range(K):
                        out[idx, i, l] = y[i * K + l]
                idx += 1
                while idx < nout and xout[idx] == x:
                    for i in range(N):
                        for l in range(K):
                            out[idx, i, l] = y[i * K + l]
                    idx += 1
            else:
                x = x + hs
        else:
            fac = fac11 / SAFE
            if fac > 1.0 / FACMIN:
                fac = 1.0 / FACMIN
            hnew = h / fac
            last_rejected = True
            n_rej += 1
        h = hnew if hnew < max_step else max_step

    return out_arr, h, n_acc, n_rej
