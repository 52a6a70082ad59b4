"""Pure-Python/numpy versions of the compiled kernels in ``_core.pyx``.

Same signatures and same arithmetic order, so results agree bit for bit with
the compiled backend (tests check this).
"""

import math

import numpy as np

SQRT2 = 1.4142135623730951
_MASK64 = (1 << 64) - 1


def _intensity(rects, px, py, inv):
    total = 0.0
    erfc = math.erfc
    for x1, y1, x2, y2 in rects:
        fx = 0.5 * (erfc((px - x2) * inv) - erfc((px - x1) * inv))
        fy = 0.5 * (erfc((py - y2) * inv) - erfc((py - y1) * inv))
        total += fx * fy
    if total < 0.0:
        return 0.0
    if total > 1.0:
        return 1.0
    return total


def intensity(rects, px, py, sigma):
    """Gaussian-blurred coverage of ``rects`` at ``(px, py)``."""
    return _intensity(np.asarray(rects).tolist(), px, py, 1.0 / (sigma * SQRT2))


def epe_offset(rects, cx, cy, nx, ny, sigma, threshold, scan_steps, resolution):
    rects = np.asarray(rects).tolist()
    inv = 1.0 / (sigma * SQRT2)
    span = 4.0 * sigma
    step = span / scan_steps
    fa = _intensity(rects, cx, cy, inv) - threshold
    direction = 1.0 if fa >= 0.0 else -1.0
    a = 0.0
    b = 0.0
    found = False
    for s in range(1, scan_steps + 1):
        b = direction * s * step
        fb = _intensity(rects, cx + nx * b, cy + ny * b, inv) - threshold
        if (fb >= 0.0) != (fa >= 0.0):
            found = True
            break
        a = b
        fa = fb
    if not found:
        return direction * span, True
    while abs(b - a) > resolution:
        m = 0.5 * (a + b)
        fm = _intensity(rects, cx + nx * m, cy + ny * m, inv) - threshold
        if (fm >= 0.0) == (fa >= 0.0):
            a = m
            fa = fm
        else:
            b = m
    return 0.5 * (a + b), False


def coverage_grid(rects, extent, grid):
    cell = extent // grid
    acc = [[0] * grid for _ in range(grid)]
    for x1, y1, x2, y2 in np.asarray(rects, dtype=np.int64).tolist():
        x1, y1 = max(x1, 0), max(y1, 0)
        x2, y2 = min(x2, extent), min(y2, extent)
        if x2 <= x1 or y2 <= y1:
            continue
        for gy in range(y1 // cell, (y2 - 1) // cell + 1):
            oy = min(y2, (gy + 1) * cell) - max(y1, gy * cell)
            row = acc[gy]
            for gx in range(x1 // cell, (x2 - 1) // cell + 1):
                row[gx] += (min(x2, (gx + 1) * cell) - max(x1, gx * cell)) * oy
    out = np.asarray(acc, dtype=np.float64).reshape(-1)
    out /= float(cell * cell)
    return out


def _splitmix64(state):
    state = (state + 0x9E3779B97F4A7C15) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return state, z ^ (z >> 31)


def smo_solve(K, y, c_bound, tol, max_iter, seed):
    K = np.asarray(K, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = y.shape[0]
    alpha = np.zeros(n)
    g = -np.ones(n)
    pos = y > 0.0
    state = int(seed) & _MASK64
    it = 0
    converged = False
    residual = math.inf
    while True:
        v = -y * g
        up = np.where(pos, alpha < c_bound, alpha > 0.0)
        low = np.where(pos, alpha > 0.0, alpha < c_bound)
        if not up.any():
            residual = -math.inf
            converged = True
            break
        i = int(np.argmax(np.where(up, v, -np.inf)))
        vmax = float(v[i])
        vmin = float(np.min(np.where(low, v, np.inf)))
        residual = vmax - vmin
        if residual <= tol:
            converged = True
            break
        if it >= max_iter:
            break
        candidates = np.flatnonzero(low & (v < vmax - tol))
        state, z = _splitmix64(state)
        j = int(candidates[z % candidates.shape[0]])
        vj = float(v[j])
        a = K[i, i] + K[j, j] - 2.0 * K[i, j]
        if a <= 0.0:
            a = 1e-12
        lam = (vmax - vj) / a
        lim = c_bound - alpha[i] if y[i] > 0.0 else alpha[i]
        if lim < lam:
            lam = lim
        lim = alpha[j] if y[j] > 0.0 else c_bound - alpha[j]
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
        g += y * (y[i] * K[:, i] * dai + y[j] * K[:, j] * daj)
        it += 1
    return alpha, g, it, residual, converged


def _qp_objective(Q, c, x):
    n = len(c)
    quad = 0.0
    lin = 0.0
    for r in range(n):
        row = 0.0
        Qr = Q[r]
        for s in range(n):
            row += Qr[s] * x[s]
        quad += x[r] * row
        lin += c[r] * x[r]
    return 0.5 * quad + lin


def qp_coordinate_descent(Q, c, x0, tol, max_iter):
    Q = np.asarray(Q, dtype=np.float64).tolist()
    c = np.asarray(c, dtype=np.float64).tolist()
    x = [max(float(v), 0.0) for v in np.asarray(x0, dtype=np.float64)]
    n = len(c)
    steps = 0
    converged = False
    history = [_qp_objective(Q, c, x)]
    while True:
        g = []
        for r in range(n):
            v = c[r]
            Qr = Q[r]
            for s in range(n):
                v += Qr[s] * x[s]
            g.append(v)
        residual = 0.0
        for r in range(n):
            if x[r] > 0.0:
                v = abs(g[r])
            else:
                v = -g[r] if g[r] < 0.0 else 0.0
            if v > residual:
                residual = v
        if residual <= tol:
            converged = True
            break
        if steps >= max_iter:
            break
        for r in range(n):
            if steps >= max_iter:
                break
            xi = x[r] - g[r] / Q[r][r]
            if xi < 0.0:
                xi = 0.0
            d = xi - x[r]
            if d != 0.0:
                x[r] = xi
                for s in range(n):
                    g[s] += Q[s][r] * d
            steps += 1
        history.append(_qp_objective(Q, c, x))
    return np.asarray(x, dtype=np.float64), steps, residual, converged, history


def pm_match(signatures, queries, eps, budget):
    signatures = np.asarray(signatures, dtype=np.int32)
    queries = np.asarray(queries, dtype=np.int32)
    out = np.full(queries.shape[0], -1, dtype=np.int8)
    if signatures.shape[0] == 0:
        return out
    for start in range(0, queries.shape[0], 256):
        block = queries[start:start + 256]
        over = np.abs(block[:, None, :] - signatures[None, :, :]) > eps
        hit = (over.sum(axis=2) <= budget).any(axis=1)
        out[start:start + 256][hit] = 1
    return out
