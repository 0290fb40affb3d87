# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled weight-update loops for differential-pair crossbars.

Every routine mutates ``gp``/``gm`` (nominal conductances) in place and
refreshes the cached effective weights ``w = xp * gp - xm * gm`` for each
touched pair.  Method codes: 0 = a, 1 = b, 2 = c.
"""

from libc.math cimport exp

ctypedef struct Device:
    double g_min
    double g_max
    double span
    double alpha_p
    double beta_p
    double alpha_d
    double beta_d
    double tol


cdef inline double _pot(double g, const Device* d) noexcept nogil:
    cdef double out = g + d.alpha_p * exp(-d.beta_p * (g - d.g_min) / d.span)
    return d.g_max if out > d.g_max else out


cdef inline double _dep(double g, const Device* d) noexcept nogil:
    cdef double out = g - d.alpha_d * exp(-d.beta_d * (d.g_max - g) / d.span)
    return d.g_min if out < d.g_min else out


cdef inline void _update(double* up, double* other, int method, const Device* d) noexcept nogil:
    # ``up`` is the device whose potentiation moves the weight the requested way.
    cdef double w_old, nxt
    cdef double sat = d.g_max - d.tol
    if up[0] < sat:
        up[0] = _pot(up[0], d)
        return
    if method == 0:
        w_old = up[0] - other[0]
        up[0] = d.g_min
        other[0] = d.g_min
        while up[0] - other[0] < w_old and up[0] < sat:
            up[0] = _pot(up[0], d)
        up[0] = _pot(up[0], d)
    elif method == 1:
        w_old = up[0] - other[0]
        other[0] = d.g_min
        while other[0] < d.g_max:
            nxt = _pot(other[0], d)
            if up[0] - nxt > w_old:
                other[0] = nxt
            else:
                break
    else:
        other[0] = _dep(other[0], d)


cdef inline void _apply(double[:, ::1] gp, double[:, ::1] gm,
                        double[:, ::1] xp, double[:, ::1] xm, double[:, ::1] w,
                        Py_ssize_t i, Py_ssize_t j, int direction, int method,
                        const Device* d) noexcept nogil:
    cdef double sat = d.g_max - d.tol
    if gp[i, j] >= sat and gm[i, j] >= sat:
        # both saturated: the reset itself is the update event
        gp[i, j] = d.g_min
        gm[i, j] = d.g_min
    elif direction > 0:
        _update(&gp[i, j], &gm[i, j], method, d)
    else:
        _update(&gm[i, j], &gp[i, j], method, d)
    if gp[i, j] >= sat and gm[i, j] >= sat:
        gp[i, j] = d.g_min
        gm[i, j] = d.g_min
    w[i, j] = xp[i, j] * gp[i, j] - xm[i, j] * gm[i, j]


cdef Device _device(object params, double tol):
    cdef Device d
    d.g_min = params.g_min
    d.g_max = params.g_max
    d.span = params.g_max - params.g_min
    d.alpha_p = params.alpha_p
    d.beta_p = params.beta_p
    d.alpha_d = params.alpha_d
    d.beta_d = params.beta_d
    d.tol = tol
    return d


def apply_single(double[:, ::1] gp, double[:, ::1] gm, double[:, ::1] xp,
                 double[:, ::1] xm, double[:, ::1] w, Py_ssize_t i, Py_ssize_t j,
                 int direction, int method, object params, double tol):
    cdef Device d = _device(params, tol)
    if direction != 0:
        _apply(gp, gm, xp, xm, w, i, j, direction, method, &d)


def apply_outer(double[:, ::1] gp, double[:, ::1] gm, double[:, ::1] xp,
                double[:, ::1] xm, double[:, ::1] w, const Py_ssize_t[::1] rows,
                const signed char[::1] col_dir, int method, object params, double tol):
    """Update every pair (rows[r], j) with ``col_dir[j] != 0``."""
    cdef Device d = _device(params, tol)
    cdef Py_ssize_t r, i, j
    cdef Py_ssize_t ncols = col_dir.shape[0]
    with nogil:
        for r in range(rows.shape[0]):
            i = rows[r]
            for j in range(ncols):
                if col_dir[j] != 0:
                    _apply(gp, gm, xp, xm, w, i, j, col_dir[j], method, &d)


def apply_votes(double[:, ::1] gp, double[:, ::1] gm, double[:, ::1] xp,
                double[:, ::1] xm, double[:, ::1] w, const int[:, ::1] votes,
                int method, object params, double tol):
    """One update per pair in the direction of the sign of its vote."""
    cdef Device d = _device(params, tol)
    cdef Py_ssize_t i, j
    cdef int v
    with nogil:
        for i in range(votes.shape[0]):
            for j in range(votes.shape[1]):
                v = votes[i, j]
                if v > 0:
                    _apply(gp, gm, xp, xm, w, i, j, 1, method, &d)
                elif v < 0:
                    _apply(gp, gm, xp, xm, w, i, j, -1, method, &d)
