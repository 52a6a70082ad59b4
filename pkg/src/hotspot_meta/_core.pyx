# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops. ``_fallback`` mirrors every function here line by line.

Floating-point expressions are written in the same order as the fallback so
that both backends produce bit-identical results wherever the operations are
pure IEEE arithmetic plus libm ``erfc``/``exp``.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport erfc, fabs, INFINITY

cnp.import_array()

cdef double SQRT2 = 1.4142135623730951


cdef inline double _intensity(const double[:, ::1] rects, double px, double py,
                              double inv) noexcept nogil:
    cdef Py_ssize_t r
    cdef double fx, fy, total = 0.0
    for r in range(rects.shape[0]):
        fx = 0.5 * (erfc((px - rects[r, 2]) * inv) - erfc((px - rects[r, 0]) * inv))
        fy = 0.5 * (erfc((py - rects[r, 3]) * inv) - erfc((py - rects[r, 1]) * inv))
        total += fx * fy
    if total < 0.0:
        return 0.0
    if total > 1.0:
        return 1.0
    return total


def intensity(const double[:, ::1] rects, double px, double py, double sigma):
    """Gaussian-blurred coverage of ``rects`` at ``(px, py)``."""
    return _intensity(rects, px, py, 1.0 / (sigma * SQRT2))


def epe_offset(const double[:, ::1] rects, double cx, double cy, double nx,
               double ny, double sigma, double threshold, int scan_steps,
               double resolution):
    """Signed offset along the outward normal where intensity meets threshold.

    Returns ``(offset, saturated)``.
    """
    cdef double inv = 1.0 / (sigma * SQRT2)
    cdef double span = 4.0 * sigma
    cdef double step = span / scan_steps
    cdef double direction, a, b, m, fa, fb, fm
    cdef int s
    cdef bint found = False
    with nogil:
        fa = _intensity(rects, cx, cy, inv) - threshold
        direction = 1.0 if fa >= 0.0 else -1.0
        a = 0.0
        b = 0.0
        fb = fa
        for s in range(1, scan_steps + 1):
            b = direction * s * step
            fb = _intensity(rects, cx + nx * b, cy + ny * b, inv) - threshold
            if (fb >= 0.0) != (fa >= 0.0):
                found = True
                break
            a = b
            fa = fb
        if found:
            while fabs(b - a) > resolution:
                m = 0.5 * (a + b)
                fm = _intensity(rects, cx + nx * m, cy + ny * m, inv) - threshold
                if (fm >= 0.0) == (fa >= 0.0):
                    a = m
                    fa = fm
                else:
                    b = m
    if not found:
        return direction * span, True
    return 0.5 * (a + b), False


def coverage_grid(const long long[:, ::1] rects, long long extent, int grid):
    """Exact covered-area fraction per cell of a ``grid`` x ``grid`` window.

    ``rects`` are in window-local integer coordinates; the window is
    ``[0, extent]^2`` and ``extent`` must be divisible by ``grid``.
    """
    cdef long long cell = extent // grid
    cdef long long[:, ::1] acc = np.zeros((grid, grid), dtype=np.int64)
    cdef Py_ssize_t r
    cdef long long x1, y1, x2, y2, cx0, cx1, cy0, cy1, gx, gy, ox, oy
    with nogil:
        for r in range(rects.shape[0]):
            x1 = rects[r, 0] if rects[r, 0] > 0 else 0
            y1 = rects[r, 1] if rects[r, 1] > 0 else 0
            x2 = rects[r, 2] if rects[r, 2] < extent else extent
            y2 = rects[r, 3] if rects[r, 3] < extent else extent
            if x2 <= x1 or y2 <= y1:
                continue
            cx0 = x1 // cell
            cx1 = (x2 - 1) // cell
            cy0 = y1 // cell
            cy1 = (y2 - 1) // cell
            for gy in range(cy0, cy1 + 1):
                oy = min(y2, (gy + 1) * cell) - max(y1, gy * cell)
                for gx in range(cx0, cx1 + 1):
                    ox = min(x2, (gx + 1) * cell) - max(x1, gx * cell)
                    acc[gy, gx] += ox * oy
    out = np.asarray(acc, dtype=np.float64).reshape(-1)
    out /= float(cell * cell)
    return out


cdef inline unsigned long long _splitmix64(unsigned long long *state) noexcept nogil:
    cdef unsigned long long z
    state[0] += 0x9E3779B97F4A7C15ULL
    z = state[0]
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


def smo_solve(const double[:, ::1] K, const double[::1] y, double c_bound,
              double tol, long long max_iter, unsigned long long seed):
    """Pairwise dual coordinate optimization for the C-SVM dual.

    Returns ``(alpha, grad, iterations, residual, converged)`` where ``grad`` is
    ``Z alpha - e`` and ``residual`` is the maximal KKT violation.
    """
    cdef Py_ssize_t n = y.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] alpha_arr = np.zeros(n)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] grad_arr = -np.ones(n)
    cdef double[::1] alpha = alpha_arr
    cdef double[::1] g = grad_arr
    cdef unsigned long long state = seed
    cdef long long it = 0
    cdef Py_ssize_t t, i, j, cnt, k
    cdef double v, vmax, vmin, vi, vj, a, lam, lim, ai_new, aj_new, dai, daj
    cdef double residual = INFINITY
    cdef bint converged = False
    cdef bint up, low
    with nogil:
        while True:
            vmax = -INFINITY
            vmin = INFINITY
            i = -1
            for t in range(n):
                v = -y[t] * g[t]
                if y[t] > 0.0:
                    up = alpha[t] < c_bound
                    low = alpha[t] > 0.0
                else:
                    up = alpha[t] > 0.0
                    low = alpha[t] < c_bound
                if up and v > vmax:
                    vmax = v
                    i = t
                if low and v < vmin:
                    vmin = v
            residual = vmax - vmin
            if residual <= tol or i < 0:
                converged = True
                break
            if it >= max_iter:
                break
            cnt = 0
            for t in range(n):
                if y[t] > 0.0:
                    low = alpha[t] > 0.0
                else:
                    low = alpha[t] < c_bound
                if low and -y[t] * g[t] < vmax - tol:
                    cnt += 1
            k = <Py_ssize_t>(_splitmix64(&state) % <unsigned long long>cnt)
            j = -1
            for t in range(n):
                if y[t] > 0.0:
                    low = alpha[t] > 0.0
                else:
                    low = alpha[t] < c_bound
                if low and -y[t] * g[t] < vmax - tol:
                    if k == 0:
                        j = t
                        break
                    k -= 1
            vi = vmax
            vj = -y[j] * g[j]
            a = K[i, i] + K[j, j] - 2.0 * K[i, j]
            if a <= 0.0:
                a = 1e-12
            lam = (vi - vj) / a
            if y[i] > 0.0:
                lim = c_bound - alpha[i]
            else:
                lim = alpha[i]
            if lim < lam:
                lam = lim
            if y[j] > 0.0:
                lim = alpha[j]
            else:
                lim = c_bound - alpha[j]
            if lim < lam:
                lam = lim
            ai_new = alpha[i] + y[i] * lam
            aj_new = alpha[j] - y[j] * lam
            ai_new = 0.0 if ai_new <= 0.0 else (c_bound if ai_new >= c_bound else ai_new)
            aj_new = 0.0 if aj_new <= 0.0 else (c_bound if aj_new >= c_bound else aj_new)
            dai = ai_new - alpha[i]
            daj = aj_new - alpha[j]
            alpha[i] = ai_new
            alpha[j] = aj_new
            for t in range(n):
                g[t] += y[t] * (y[i] * K[t, i] * dai + y[j] * K[t, j] * daj)
            it += 1
    return alpha_arr, grad_arr, it, residual, converged


cdef double _qp_objective(const double[:, ::1] Q, const double[::1] c,
                          double[::1] x) noexcept nogil:
    cdef Py_ssize_t n = c.shape[0], r, s
    cdef double quad = 0.0, lin = 0.0, row
    for r in range(n):
        row = 0.0
        for s in range(n):
            row += Q[r, s] * x[s]
        quad += x[r] * row
        lin += c[r] * x[r]
    return 0.5 * quad + lin


def qp_coordinate_descent(const double[:, ::1] Q, const double[::1] c,
                          const double[::1] x0, double tol, long long max_iter):
    """Projected coordinate descent for ``min 1/2 x'Qx + c'x`` s.t. ``x >= 0``.

    Returns ``(x, steps, residual, converged, sweep_objectives)``.
    """
    cdef Py_ssize_t n = c.shape[0], r, s
    cdef cnp.ndarray[cnp.float64_t, ndim=1] x_arr = np.maximum(np.asarray(x0, dtype=np.float64), 0.0)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] g_arr = np.zeros(n)
    cdef double[::1] x = x_arr
    cdef double[::1] g = g_arr
    cdef long long steps = 0
    cdef double residual, v, xi, d
    cdef bint converged = False
    history = [_qp_objective(Q, c, x)]
    while True:
        with nogil:
            for r in range(n):
                v = c[r]
                for s in range(n):
                    v += Q[r, s] * x[s]
                g[r] = v
            residual = 0.0
            for r in range(n):
                if x[r] > 0.0:
                    v = fabs(g[r])
                else:
                    v = -g[r] if g[r] < 0.0 else 0.0
                if v > residual:
                    residual = v
        if residual <= tol:
            converged = True
            break
        if steps >= max_iter:
            break
        with nogil:
            for r in range(n):
                if steps >= max_iter:
                    break
                xi = x[r] - g[r] / Q[r, r]
                if xi < 0.0:
                    xi = 0.0
                d = xi - x[r]
                if d != 0.0:
                    x[r] = xi
                    for s in range(n):
                        g[s] += Q[s, r] * d
                steps += 1
        history.append(_qp_objective(Q, c, x))
    return x_arr, steps, residual, converged, history


def pm_match(const int[:, ::1] signatures, const int[:, ::1] queries, int eps,
             int budget):
    """+1 where some signature is within ``eps`` on all but ``budget`` cells."""
    cdef Py_ssize_t nq = queries.shape[0], ns = signatures.shape[0]
    cdef Py_ssize_t dim = queries.shape[1], q, s, d
    cdef int cnt, diff
    cdef cnp.ndarray[cnp.int8_t, ndim=1] out_arr = np.full(nq, -1, dtype=np.int8)
    cdef cnp.int8_t[::1] out = out_arr
    with nogil:
        for q in range(nq):
            for s in range(ns):
                cnt = 0
                for d in range(dim):
                    diff = queries[q, d] - signatures[s, d]
                    if diff > eps or -diff > eps:
                        cnt += 1
                        if cnt > budget:
                            break
                if cnt <= budget:
                    out[q] = 1
                    break
    return out_arr
