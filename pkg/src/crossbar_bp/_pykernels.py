"""Pure numpy implementation of the crossbar update loops.

Mirrors ``_kernels.pyx`` call for call.  The common non-saturated pulse is
vectorized; saturated pairs (a small minority) go through a scalar path.
"""

import math

import numpy as np


def _pot(g, p):
    out = g + p.alpha_p * math.exp(-p.beta_p * (g - p.g_min) / (p.g_max - p.g_min))
    return p.g_max if out > p.g_max else out


def _dep(g, p):
    out = g - p.alpha_d * math.exp(-p.beta_d * (p.g_max - g) / (p.g_max - p.g_min))
    return p.g_min if out < p.g_min else out


def _saturated_update(up, other, method, p, tol):
    sat = p.g_max - tol
    if method == 0:
        w_old = up - other
        up = other = p.g_min
        while up - other < w_old and up < sat:
            up = _pot(up, p)
        up = _pot(up, p)
    elif method == 1:
        w_old = up - other
        other = p.g_min
        while other < p.g_max:
            nxt = _pot(other, p)
            if up - nxt > w_old:
                other = nxt
            else:
                break
    else:
        other = _dep(other, p)
    return up, other


def _update_block(gp, gm, xp, xm, direction, method, p, tol):
    """Apply one update to each element of flat arrays; returns new (gp, gm, w)."""
    inc = direction > 0
    up = np.where(inc, gp, gm)
    other = np.where(inc, gm, gp)
    # both saturated: the reset itself is the update event
    done = (gp >= p.g_max - tol) & (gm >= p.g_max - tol)
    up[done] = other[done] = p.g_min
    sat = (up >= p.g_max - tol) & ~done
    free = ~sat & ~done
    if free.any():
        g = up[free]
        step = p.alpha_p * np.exp(-p.beta_p * (g - p.g_min) / (p.g_max - p.g_min))
        up[free] = np.minimum(p.g_max, g + step)
    for k in np.flatnonzero(sat):
        up[k], other[k] = _saturated_update(float(up[k]), float(other[k]), method, p, tol)
    new_gp = np.where(inc, up, other)
    new_gm = np.where(inc, other, up)
    both = (new_gp >= p.g_max - tol) & (new_gm >= p.g_max - tol)
    new_gp[both] = p.g_min
    new_gm[both] = p.g_min
    return new_gp, new_gm, xp * new_gp - xm * new_gm


def apply_single(gp, gm, xp, xm, w, i, j, direction, method, params, tol):
    if direction == 0:
        return
    a, b, c = _update_block(gp[i, j:j + 1], gm[i, j:j + 1], xp[i, j:j + 1],
                            xm[i, j:j + 1], np.array([direction]), method, params, tol)
    gp[i, j], gm[i, j], w[i, j] = a[0], b[0], c[0]


def apply_outer(gp, gm, xp, xm, w, rows, col_dir, method, params, tol):
    cols = np.flatnonzero(col_dir)
    if rows.size == 0 or cols.size == 0:
        return
    idx = np.ix_(rows, cols)
    direction = np.broadcast_to(col_dir[cols], (rows.size, cols.size)).ravel()
    a, b, c = _update_block(gp[idx].ravel(), gm[idx].ravel(), xp[idx].ravel(),
                            xm[idx].ravel(), direction, method, params, tol)
    shape = (rows.size, cols.size)
    gp[idx] = a.reshape(shape)
    gm[idx] = b.reshape(shape)
    w[idx] = c.reshape(shape)


def apply_votes(gp, gm, xp, xm, w, votes, method, params, tol):
    ii, jj = np.nonzero(votes)
    if ii.size == 0:
        return
    direction = np.sign(votes[ii, jj])
    a, b, c = _update_block(gp[ii, jj], gm[ii, jj], xp[ii, jj], xm[ii, jj],
                            direction, method, params, tol)
    gp[ii, jj] = a
    gm[ii, jj] = b
    w[ii, jj] = c
