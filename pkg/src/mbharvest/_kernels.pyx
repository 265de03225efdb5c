# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops: SMO for the SVM dual and the (theta, eps) grid scan.

Signatures and results match ``_kernels_py`` exactly.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport erfc, sqrt, floor

cnp.import_array()

cdef double TAU = 1e-12
cdef double SQRT2 = 1.4142135623730951


def smo_solve(double[:, ::1] K, double[::1] y, double C, double tol=1e-3, long max_iter=10000000):
    """Minimise ``0.5 a'Qa - sum(a)`` with ``0 <= a <= C``, ``y'a = 0``.

    Returns ``(alpha, rho, iterations, gap)``; the decision function is
    ``sum_i alpha_i y_i K(x_i, x) - rho``.
    """
    cdef Py_ssize_t n = y.shape[0]
    cdef Py_ssize_t t, i, j
    cdef long it = 0
    cdef double gmax, gmin, v, b, a, obj, best, quad, delta, diff, s
    cdef double ai_old, aj_old, dai, daj, yi, yj, Kii
    alpha_arr = np.zeros(n)
    grad_arr = -np.ones(n)
    cdef double[::1] alpha = alpha_arr
    cdef double[::1] G = grad_arr

    while True:
        gmax = -1e300
        gmin = 1e300
        i = -1
        for t in range(n):
            if (y[t] > 0 and alpha[t] < C) or (y[t] < 0 and alpha[t] > 0):
                v = -y[t] * G[t]
                if v >= gmax:
                    gmax = v
                    i = t
        j = -1
        best = 1e300
        for t in range(n):
            if (y[t] > 0 and alpha[t] > 0) or (y[t] < 0 and alpha[t] < C):
                v = -y[t] * G[t]
                if v < gmin:
                    gmin = v
                if i >= 0 and v < gmax:
                    b = gmax - v
                    a = K[i, i] + K[t, t] - 2.0 * K[i, t]
                    if a <= 0:
                        a = TAU
                    obj = -(b * b) / a
                    if obj <= best:
                        best = obj
                        j = t
        if i < 0 or j < 0 or gmax - gmin < tol or it >= max_iter:
            break
        it += 1

        yi = y[i]
        yj = y[j]
        ai_old = alpha[i]
        aj_old = alpha[j]
        Kii = K[i, i]
        if yi != yj:
            quad = Kii + K[j, j] - 2.0 * K[i, j]
            if quad <= 0:
                quad = TAU
            delta = (-G[i] - G[j]) / quad
            diff = alpha[i] - alpha[j]
            alpha[i] += delta
            alpha[j] += delta
            if diff > 0:
                if alpha[j] < 0:
                    alpha[j] = 0
                    alpha[i] = diff
            else:
                if alpha[i] < 0:
                    alpha[i] = 0
                    alpha[j] = -diff
            if diff > 0:
                if alpha[i] > C:
                    alpha[i] = C
                    alpha[j] = C - diff
            else:
                if alpha[j] > C:
                    alpha[j] = C
                    alpha[i] = C + diff
        else:
            quad = Kii + K[j, j] - 2.0 * K[i, j]
            if quad <= 0:
                quad = TAU
            delta = (G[i] - G[j]) / quad
            s = alpha[i] + alpha[j]
            alpha[i] -= delta
            alpha[j] += delta
            if s > C:
                if alpha[i] > C:
                    alpha[i] = C
                    alpha[j] = s - C
            else:
                if alpha[j] < 0:
                    alpha[j] = 0
                    alpha[i] = s
            if s > C:
                if alpha[j] > C:
                    alpha[j] = C
                    alpha[i] = s - C
            else:
                if alpha[i] < 0:
                    alpha[i] = 0
                    alpha[j] = s

        dai = alpha[i] - ai_old
        daj = alpha[j] - aj_old
        for t in range(n):
            G[t] += y[t] * (yi * K[t, i] * dai + yj * K[t, j] * daj)

    return alpha_arr, _rho(alpha, G, y, C), it, gmax - gmin


cdef double _rho(double[::1] alpha, double[::1] G, double[::1] y, double C):
    cdef Py_ssize_t t, n = y.shape[0]
    cdef double ub = 1e300, lb = -1e300, total = 0.0, yg
    cdef long nfree = 0
    for t in range(n):
        yg = y[t] * G[t]
        if alpha[t] >= C:
            if y[t] < 0:
                ub = min(ub, yg)
            else:
                lb = max(lb, yg)
        elif alpha[t] <= 0:
            if y[t] > 0:
                ub = min(ub, yg)
            else:
                lb = max(lb, yg)
        else:
            nfree += 1
            total += yg
    if nfree > 0:
        return total / nfree
    return (ub + lb) / 2.0


cdef inline double _q(double x):
    return 0.5 * erfc(x / SQRT2)


def grid_min_samples(double snr, double max_fa, double min_det, long theta_lo, long theta_hi,
                     double eps_step=1e-4, double eps_max=-1.0):
    """Smallest integer theta in [theta_lo, theta_hi] for which some grid
    threshold ``eps = k * eps_step`` meets both probability targets.

    Returns ``(theta, eps)`` or ``(-1, nan)``.
    """
    cdef long theta, lo, hi, mid, kmax
    cdef double rt, eps
    if eps_max < 0:
        eps_max = snr + 2.0
    kmax = <long>floor(eps_max / eps_step)
    for theta in range(theta_lo, theta_hi + 1):
        rt = sqrt(<double>theta)
        # false-alarm probability decreases in eps: bisect for the first
        # grid point that meets the cap
        if _q((kmax * eps_step - 1.0) * rt) > max_fa:
            continue
        lo = 0
        hi = kmax
        while lo < hi:
            mid = (lo + hi) // 2
            if _q((mid * eps_step - 1.0) * rt) <= max_fa:
                hi = mid
            else:
                lo = mid + 1
        eps = lo * eps_step
        if _q((eps - snr - 1.0) * rt / (snr + 1.0)) >= min_det:
            return theta, eps
    return -1, float("nan")
