"""Pure-Python Dormand-Prince 5(4) loop; fallback for ``_dopri_kernel``.

Same stepping, error norm and controller as the compiled kernel, so both
backends produce the same step sequence up to rounding.
"""
import numpy as np

from .errors import IntegrationError, NonFiniteCoefficient, StepSizeUnderflow

_NODES = np.array([0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0])
_A = [
    [],
    [1.0 / 5.0],
    [3.0 / 40.0, 9.0 / 40.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0],
]
_B = np.array([35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0])
_E = np.array([71.0 / 57600.0, 0.0, -71.0 / 16695.0, 71.0 / 1920.0,
               -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0])

SAFE, BETA, FACMIN, FACMAX = 0.9, 0.04, 0.2, 10.0


def dopri5(batch_eval, x0, xout, Y0, rtol, atol, max_step, h0):
    xout = np.asarray(xout, dtype=float)
    y = np.array(Y0, dtype=float)
    N, K = y.shape
    nout = len(xout)
    direction = -1.0 if nout and xout[-1] < x0 else 1.0
    out = np.empty((nout, N, K))
    ks = np.empty((7, N, K))

    x = float(x0)
    h = abs(h0) if h0 > 0 else 1e-2
    h = min(h, max_step)
    errold = 1e-4
    last_rejected = False
    n_acc = n_rej = 0

    idx = 0
    while idx < nout and xout[idx] == x0:
        out[idx] = y
        idx += 1

    while idx < nout:
        target = xout[idx]
        hit = False
        h_prop = h
        if h >= abs(target - x):
            h = abs(target - x)
            hit = True
        if hit and h <= 1e-13 * (1.0 + abs(x)):
            # output abscissa coincides with x up to rounding
            x = target
            out[idx] = y
            idx += 1
            h = h_prop
            continue
        if h < 1e-14 * (1.0 + abs(x)):
            raise StepSizeUnderflow(
                f"step size underflow at x={x!r} (h={h:.3e}); field too stiff")
        hs = direction * h
        nodes = x + _NODES * hs
        if hit:
            nodes[5] = target
        C = np.asarray(batch_eval(nodes), dtype=float)
        if C.shape != (6, N, N):
            raise IntegrationError("coefficient batch has wrong shape")
        if not np.all(np.isfinite(C)):
            bad = nodes[np.argmax(~np.isfinite(C).all(axis=(1, 2)))]
            raise NonFiniteCoefficient(f"non-finite coefficient at x={bad!r}")

        ks[0] = C[0] @ y
        for s in range(1, 6):
            ys = y + hs * np.tensordot(_A[s], ks[:s], axes=1)
            ks[s] = C[s] @ ys
        yn = y + hs * np.tensordot(_B, ks[:6], axes=1)
        ks[6] = C[5] @ yn

        scale = atol + rtol * np.maximum(np.abs(y), np.abs(yn))
        err = np.sqrt(np.mean((hs * np.tensordot(_E, ks, axes=1) / scale) ** 2))
        if not np.isfinite(err):
            raise IntegrationError(f"non-finite error estimate at x={x!r}")

        fac11 = err ** (0.2 - BETA * 0.75)
        if err <= 1.0:
            fac = fac11 / errold ** BETA / SAFE
            fac = min(max(fac, 1.0 / FACMAX), 1.0 / FACMIN)
            hnew = h / fac
            if last_rejected and hnew > h:
                hnew = h
            if hit and hnew < h_prop and not last_rejected:
                hnew = h_prop
            errold = max(err, 1e-4)
            last_rejected = False
            n_acc += 1
            y = yn
            if hit:
                x = target
                while idx < nout and xout[idx] == x:
                    out[idx] = y
                    idx += 1
            else:
                x = x + hs
        else:
            hnew = h / min(fac11 / SAFE, 1.0 / FACMIN)
            last_rejected = True
            n_rej += 1
        h = min(hnew, max_step)

    return out, h, n_acc, n_rej
