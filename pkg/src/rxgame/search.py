"""Vectorised one-dimensional maximisation helpers."""
from __future__ import annotations

import numpy as np

INV_PHI = (np.sqrt(5.0) - 1.0) / 2.0


def golden_max_batch(f, lo, hi, tol, x0=None, max_iter=200):
    """Maximise many scalar functions at once by golden-section search.

    ``f`` maps an array of abscissae (one per problem) to objective values.
    Each problem ``i`` is searched on ``[lo[i], hi[i]]`` until the bracket is
    narrower than ``tol[i]``.  ``x0`` optionally seeds the incumbent, so the
    result is never worse than that starting point.  Returns ``(x, fx)`` of the
    best point seen.
    """
    a = np.asarray(lo, dtype=float).copy()
    b = np.asarray(hi, dtype=float).copy()
    tol = np.broadcast_to(np.asarray(tol, dtype=float), a.shape)
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    best_x = np.where(fc >= fd, c, d)
    best_f = np.maximum(fc, fd)
    if x0 is not None:
        x0 = np.asarray(x0, dtype=float)
        f0 = f(x0)
        seed = f0 >= best_f
        best_x = np.where(seed, x0, best_x)
        best_f = np.where(seed, f0, best_f)
    for _ in range(max_iter):
        active = (b - a) > tol
        if not active.any():
            break
        left = active & (fc >= fd)  # ties keep the lower sub-bracket
        right = active & ~left
        b = np.where(left, d, b)
        a = np.where(right, c, a)
        new_d = np.where(left, c, d)
        new_c = np.where(right, d, c)
        fd_new = np.where(left, fc, fd)
        fc_new = np.where(right, fd, fc)
        c = np.where(left, b - INV_PHI * (b - a), new_c)
        d = np.where(right, a + INV_PHI * (b - a), new_d)
        probe = np.where(left, c, d)
        fp = f(probe)
        fc = np.where(left, fp, fc_new)
        fd = np.where(right, fp, fd_new)
        better = active & ((fp > best_f) | ((fp == best_f) & (probe < best_x)))
        best_x = np.where(better, probe, best_x)
        best_f = np.where(better, fp, best_f)
    return best_x, best_f


def local_max_indices(values, top_k):
    """Indices of the discrete local maxima of each row, best ``top_k`` first.

    ``values`` has shape ``(m, n)``.  A point is a local maximum when it is
    strictly above its left neighbour and not below its right one, so a flat
    plateau contributes its leftmost point.  Endpoints count when they beat
    their single neighbour.  Returns an int array ``(m, top_k)`` padded with -1.
    """
    v = np.asarray(values, dtype=float)
    m = v.shape[0]
    left = np.concatenate([np.full((m, 1), -np.inf), v[:, :-1]], axis=1)
    right = np.concatenate([v[:, 1:], np.full((m, 1), -np.inf)], axis=1)
    is_max = (v > left) & (v >= right)
    score = np.where(is_max, v, -np.inf)
    # stable sort on -score keeps smaller indices first among equal values
    order = np.argsort(-score, axis=1, kind="stable")[:, :top_k]
    picked = np.take_along_axis(score, order, axis=1)
    return np.where(np.isfinite(picked), order, -1)


def parabolic_vertex(x0, x1, x2, f0, f1, f2):
    """Abscissa of the parabola through three points, clipped to [x0, x2]."""
    num = (x1 - x0) ** 2 * (f1 - f2) - (x1 - x2) ** 2 * (f1 - f0)
    den = (x1 - x0) * (f1 - f2) - (x1 - x2) * (f1 - f0)
    with np.errstate(divide="ignore", invalid="ignore"):
        v = x1 - 0.5 * num / den
    return np.clip(np.where(np.isfinite(v), v, x1), x0, x2)


def bisect_sign_batch(g, lo, hi, iters=60):
    """Root of ``g`` on brackets with ``g(lo) > 0 >= g(hi)`` (vectorised bisection)."""
    a = np.asarray(lo, dtype=float).copy()
    b = np.asarray(hi, dtype=float).copy()
    for _ in range(iters):
        mid = 0.5 * (a + b)
        pos = g(mid) > 0
        a = np.where(pos, mid, a)
        b = np.where(pos, b, mid)
    return 0.5 * (a + b)


def illinois_root_batch(g, a, b, ga, gb, xtol, max_iter=60):
    """Regula falsi with the Illinois modification, many brackets at once.

    Each bracket must satisfy ``ga * gb <= 0``.  A member stops once its
    bracket is narrower than ``xtol`` or an endpoint residual is exactly 0.
    """
    a = np.asarray(a, dtype=float).copy()
    b = np.asarray(b, dtype=float).copy()
    ga = np.asarray(ga, dtype=float).copy()
    gb = np.asarray(gb, dtype=float).copy()
    xtol = np.broadcast_to(np.asarray(xtol, dtype=float), a.shape)
    side = np.zeros(a.shape, dtype=int)  # -1: a moved last, +1: b moved last
    for _ in range(max_iter):
        active = (np.abs(b - a) > xtol) & (ga != 0) & (gb != 0)
        if not active.any():
            break
        with np.errstate(divide="ignore", invalid="ignore"):
            x = (a * gb - b * ga) / (gb - ga)
        inside = np.isfinite(x) & (x > np.minimum(a, b)) & (x < np.maximum(a, b))
        x = np.where(inside, x, 0.5 * (a + b))
        gx = g(x)
        move_a = active & (np.sign(gx) == np.sign(ga))
        move_b = active & ~move_a
        # Illinois step: halve the stale endpoint value on repeated sides
        gb = np.where(move_a & (side == -1), 0.5 * gb, gb)
        ga = np.where(move_b & (side == 1), 0.5 * ga, ga)
        a, ga = np.where(move_a, x, a), np.where(move_a, gx, ga)
        b, gb = np.where(move_b, x, b), np.where(move_b, gx, gb)
        side = np.where(move_a, -1, np.where(move_b, 1, side))
    return np.where(ga == 0, a, np.where(gb == 0, b, np.where(np.abs(ga) <= np.abs(gb), a, b)))
