"""Pure-Python versions of the compiled kernels in ``_kernels.pyx``."""

import math

import numpy as np

TAU = 1e-12


def smo_solve(K, y, C, tol=1e-3, max_iter=10_000_000):
    K = np.ascontiguousarray(K, dtype=float)
    y = np.ascontiguousarray(y, dtype=float)
    n = y.size
    alpha = np.zeros(n)
    G = -np.ones(n)
    diagK = np.diag(K).copy()
    it = 0
    pos = y > 0
    while True:
        up = (pos & (alpha < C)) | (~pos & (alpha > 0))
        low = (pos & (alpha > 0)) | (~pos & (alpha < C))
        score = -y * G
        if not up.any() or not low.any():
            gap = 0.0
            break
        cand = np.flatnonzero(up)
        # last index among ties, as in the compiled loop
        i = cand[np.flatnonzero(score[cand] == score[cand].max())[-1]]
        gmax = score[i]
        gmin = score[low].min()
        gap = gmax - gmin
        if gap < tol or it >= max_iter:
            break
        sel = low & (score < gmax)
        idx = np.flatnonzero(sel)
        if idx.size == 0:
            break
        b = gmax - score[idx]
        a = diagK[i] + diagK[idx] - 2.0 * K[i, idx]
        a = np.where(a <= 0, TAU, a)
        obj = -(b * b) / a
        j = idx[np.flatnonzero(obj == obj.min())[-1]]
        it += 1

        yi, yj = y[i], y[j]
        ai_old, aj_old = alpha[i], alpha[j]
        quad = diagK[i] + diagK[j] - 2.0 * K[i, j]
        if quad <= 0:
            quad = TAU
        if yi != yj:
            delta = (-G[i] - G[j]) / quad
            diff = alpha[i] - alpha[j]
            alpha[i] += delta
            alpha[j] += delta
            if diff > 0:
                if alpha[j] < 0:
                    alpha[j] = 0
                    alpha[i] = diff
            elif alpha[i] < 0:
                alpha[i] = 0
                alpha[j] = -diff
            if diff > 0:
                if alpha[i] > C:
                    alpha[i] = C
                    alpha[j] = C - diff
            elif alpha[j] > C:
                alpha[j] = C
                alpha[i] = C + diff
        else:
            delta = (G[i] - G[j]) / quad
            s = alpha[i] + alpha[j]
            alpha[i] -= delta
            alpha[j] += delta
            if s > C:
                if alpha[i] > C:
                    alpha[i] = C
                    alpha[j] = s - C
            elif alpha[j] < 0:
                alpha[j] = 0
                alpha[i] = s
            if s > C:
                if alpha[j] > C:
                    alpha[j] = C
                    alpha[i] = s - C
            elif alpha[i] < 0:
                alpha[i] = 0
                alpha[j] = s
        dai = alpha[i] - ai_old
        daj = alpha[j] - aj_old
        G += y * (yi * K[:, i] * dai + yj * K[:, j] * daj)
    return alpha, _rho(alpha, G, y, C), it, gap


def _rho(alpha, G, y, C):
    yg = y * G
    at_ub = alpha >= C
    at_lb = alpha <= 0
    free = ~(at_ub | at_lb)
    if free.any():
        return float(yg[free].mean())
    ub_mask = (at_ub & (y < 0)) | (at_lb & (y > 0))
    lb_mask = (at_ub & (y > 0)) | (at_lb & (y < 0))
    ub = yg[ub_mask].min() if ub_mask.any() else 1e300
    lb = yg[lb_mask].max() if lb_mask.any() else -1e300
    return float((ub + lb) / 2.0)


def _q(x):
    return 0.5 * math.erfc(x / math.sqrt(2.0))


def grid_min_samples(snr, max_fa, min_det, theta_lo, theta_hi, eps_step=1e-4, eps_max=-1.0):
    if eps_max < 0:
        eps_max = snr + 2.0
    kmax = int(math.floor(eps_max / eps_step))
    for theta in range(int(theta_lo), int(theta_hi) + 1):
        rt = math.sqrt(theta)
        if _q((kmax * eps_step - 1.0) * rt) > max_fa:
            continue
        lo, hi = 0, kmax
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
