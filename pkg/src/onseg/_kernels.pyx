# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled per-round numerical kernels; same API as onseg._kernels_py."""

import numpy as np

from libc.math cimport INFINITY, fabs, sqrt
from libc.stdlib cimport qsort

NAME = "cython"

cdef double EPS = 2.220446049250313e-16


cdef int _cholesky(double[:, ::1] M) noexcept nogil:
    # lower factor in place; upper triangle is left untouched
    cdef Py_ssize_t d = M.shape[0], i, j, k
    cdef double s
    for j in range(d):
        s = M[j, j]
        for k in range(j):
            s -= M[j, k] * M[j, k]
        if s <= 0.0:
            return -1
        M[j, j] = sqrt(s)
        for i in range(j + 1, d):
            s = M[i, j]
            for k in range(j):
                s -= M[i, k] * M[j, k]
            M[i, j] = s / M[j, j]
    return 0


cdef void _forward_solve(double[:, ::1] L, double[::1] b, double[::1] out) noexcept nogil:
    # L out = b
    cdef Py_ssize_t d = L.shape[0], i, k
    cdef double s
    for i in range(d):
        s = b[i]
        for k in range(i):
            s -= L[i, k] * out[k]
        out[i] = s / L[i, i]


cdef void _chol_solve(double[:, ::1] L, double[::1] b, double[::1] out) noexcept nogil:
    # L L^T out = b
    cdef Py_ssize_t d = L.shape[0], i, k
    cdef double s
    _forward_solve(L, b, out)
    for i in range(d - 1, -1, -1):
        s = out[i]
        for k in range(i + 1, d):
            s -= L[k, i] * out[k]
        out[i] = s / L[i, i]


def smw_update(double[:, ::1] A, double[:, ::1] A_inv, double[::1] g):
    """In-place rank-one update of A and A_inv; returns 1 + g^T A_inv g."""
    cdef Py_ssize_t d = g.shape[0], i, j
    cdef double denom = 1.0, s, gi, agi, inv_denom
    Ag_arr = np.empty(d, dtype=np.float64)
    cdef double[::1] Ag = Ag_arr
    for i in range(d):
        s = 0.0
        for j in range(d):
            s += A_inv[i, j] * g[j]
        Ag[i] = s
        denom += g[i] * s
    if denom <= 0.0:
        raise ValueError(
            f"rank-one update denominator {denom:.6g} <= 0; inverse state is corrupted"
        )
    inv_denom = 1.0 / denom
    for i in range(d):
        gi = g[i]
        agi = Ag[i] * inv_denom
        for j in range(d):
            A[i, j] += gi * g[j]
            A_inv[i, j] -= agi * Ag[j]
    return denom


def refresh_inverse(double[:, ::1] A, double[:, ::1] A_inv):
    """Recompute A_inv from A via Cholesky, in place; exactly symmetric output."""
    cdef Py_ssize_t d = A.shape[0], i, j, k
    cdef double s
    M_arr = np.empty((d, d), dtype=np.float64)
    Li_arr = np.zeros((d, d), dtype=np.float64)
    cdef double[:, ::1] M = M_arr
    cdef double[:, ::1] Li = Li_arr
    for i in range(d):
        for j in range(d):
            M[i, j] = A[i, j]
    if _cholesky(M) != 0:
        raise ValueError("matrix is not positive definite")
    for i in range(d):
        Li[i, i] = 1.0 / M[i, i]
        for j in range(i):
            s = 0.0
            for k in range(j, i):
                s += M[i, k] * Li[k, j]
            Li[i, j] = -s / M[i, i]
    for i in range(d):
        for j in range(i + 1):
            s = 0.0
            for k in range(i, d):
                s += Li[k, i] * Li[k, j]
            A_inv[i, j] = s
            A_inv[j, i] = s


def ball_project_anorm(double[:, ::1] A, double[::1] z, double radius):
    """A-norm projection onto the origin-centered Euclidean ball."""
    cdef Py_ssize_t d = z.shape[0], i, j, it
    cdef double nz = 0.0, lam = 0.0, lo = 0.0, hi, s, pn, w, cand, scale
    if radius <= 0.0:
        raise ValueError("radius must be positive")
    for i in range(d):
        nz += z[i] * z[i]
    nz = sqrt(nz)
    if nz <= radius:
        return np.asarray(z).copy()
    M_arr = np.empty((d, d), dtype=np.float64)
    b_arr = np.empty(d, dtype=np.float64)
    p_arr = np.empty(d, dtype=np.float64)
    q_arr = np.empty(d, dtype=np.float64)
    cdef double[:, ::1] M = M_arr
    cdef double[::1] b = b_arr
    cdef double[::1] p = p_arr
    cdef double[::1] q = q_arr
    hi = 0.0
    for i in range(d):
        s = 0.0
        for j in range(d):
            s += A[i, j] * z[j]
        b[i] = s
        hi += s * s
    hi = sqrt(hi) / radius
    for it in range(200):
        for i in range(d):
            for j in range(d):
                M[i, j] = A[i, j]
            M[i, i] += lam
        if _cholesky(M) != 0:
            raise ValueError("matrix is not positive definite")
        _chol_solve(M, b, p)
        pn = 0.0
        for i in range(d):
            pn += p[i] * p[i]
        pn = sqrt(pn)
        if fabs(pn - radius) <= 1e-13 * radius:
            break
        if pn > radius:
            lo = lam
        else:
            hi = lam
        if hi - lo <= EPS * hi:
            break
        # Newton step on 1/||p(lam)|| - 1/radius; bisect when outside the bracket
        _forward_solve(M, p, q)
        w = 0.0
        for i in range(d):
            w += q[i] * q[i]
        cand = lam + (pn * pn / w) * ((pn - radius) / radius)
        if lo < cand < hi:
            lam = cand
        else:
            lam = 0.5 * (lo + hi)
    pn = 0.0
    for i in range(d):
        pn += p[i] * p[i]
    pn = sqrt(pn)
    if pn > radius:
        scale = radius / pn
        for i in range(d):
            p[i] *= scale
    return p_arr


cdef int _cmp_desc(const void* a, const void* b) noexcept nogil:
    cdef double ad = (<const double*> a)[0]
    cdef double bd = (<const double*> b)[0]
    if ad < bd:
        return 1
    if ad > bd:
        return -1
    return 0


cdef int _simplex_euclid(double[::1] v, double lower, double[::1] work,
                         double[::1] out) noexcept nogil:
    # out = euclidean projection of v onto {x >= lower, sum x = 1}
    cdef Py_ssize_t d = v.shape[0], i
    cdef double mass = 1.0 - d * lower
    cdef double csum = 0.0, theta = 0.0, u
    if mass <= 0.0:
        return -1
    for i in range(d):
        work[i] = v[i] - lower
    qsort(&work[0], d, sizeof(double), _cmp_desc)
    for i in range(d):
        csum += work[i]
        if work[i] * (i + 1) > csum - mass:
            theta = (csum - mass) / (i + 1)
    for i in range(d):
        u = v[i] - lower - theta
        out[i] = (u if u > 0.0 else 0.0) + lower
    return 0


def simplex_project_euclid(double[::1] v, double lower):
    """Euclidean projection onto {x : x_i >= lower, sum x_i = 1}."""
    cdef Py_ssize_t d = v.shape[0]
    out_arr = np.empty(d, dtype=np.float64)
    work_arr = np.empty(d, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef double[::1] work = work_arr
    if _simplex_euclid(v, lower, work, out) != 0:
        raise ValueError("lower bound leaves no feasible mass on the simplex")
    return out_arr


def simplex_project_anorm(double[:, ::1] A, double[::1] z, double lower, x0,
                          double tol, int max_iter):
    """A-norm projection onto {x : x_i >= lower, sum x_i = 1}.

    Accelerated projected gradient with function-value restarts; terminates
    on the linear-minimization gap.  Returns (x, gap, iterations, converged).
    """
    cdef Py_ssize_t d = z.shape[0], i, j, it
    cdef double L = 0.0, row, q_x, q_prev, gap, floor, gmin, gsum, gdotx, gabs
    cdef double t_k = 1.0, t_next, mom, invL, s
    cdef bint y_is_x = True
    x_arr = np.empty(d, dtype=np.float64)
    xn_arr = np.empty(d, dtype=np.float64)
    y_arr = np.empty(d, dtype=np.float64)
    grad_arr = np.empty(d, dtype=np.float64)
    gy_arr = np.empty(d, dtype=np.float64)
    diff_arr = np.empty(d, dtype=np.float64)
    work_arr = np.empty(d, dtype=np.float64)
    cdef double[::1] x = x_arr
    cdef double[::1] xn = xn_arr
    cdef double[::1] y = y_arr
    cdef double[::1] grad = grad_arr
    cdef double[::1] gy = gy_arr
    cdef double[::1] diff = diff_arr
    cdef double[::1] work = work_arr
    cdef double[::1] start = z if x0 is None else x0
    for i in range(d):
        row = 0.0
        for j in range(d):
            row += fabs(A[i, j])
        if row > L:
            L = row
    if not L > 0.0:
        raise ValueError("matrix has no positive row sum; not positive definite")
    invL = 1.0 / L
    if _simplex_euclid(start, lower, work, x) != 0:
        raise ValueError("lower bound leaves no feasible mass on the simplex")
    for i in range(d):
        y[i] = x[i]
    q_prev = INFINITY
    gap = INFINITY
    for it in range(1, max_iter + 1):
        q_x = 0.0
        gmin = INFINITY
        gsum = 0.0
        gdotx = 0.0
        gabs = 0.0
        for i in range(d):
            diff[i] = x[i] - z[i]
        for i in range(d):
            s = 0.0
            for j in range(d):
                s += A[i, j] * diff[j]
            grad[i] = s
            q_x += diff[i] * s
            gsum += s
            gdotx += s * x[i]
            if s < gmin:
                gmin = s
            if fabs(s) > gabs:
                gabs = fabs(s)
        q_x *= 0.5
        gap = gdotx - (lower * gsum + (1.0 - d * lower) * gmin)
        floor = 64.0 * EPS * (2.0 * gabs + fabs(q_x))
        if gap <= (tol if tol > floor else floor):
            return x_arr, gap, it, True
        if q_x > q_prev:
            for i in range(d):
                y[i] = x[i]
            t_k = 1.0
            y_is_x = True
        q_prev = q_x
        if y_is_x:
            for i in range(d):
                gy[i] = grad[i]
        else:
            for i in range(d):
                diff[i] = y[i] - z[i]
            for i in range(d):
                s = 0.0
                for j in range(d):
                    s += A[i, j] * diff[j]
                gy[i] = s
        for i in range(d):
            diff[i] = y[i] - gy[i] * invL
        _simplex_euclid(diff, lower, work, xn)
        t_next = 0.5 * (1.0 + sqrt(1.0 + 4.0 * t_k * t_k))
        mom = (t_k - 1.0) / t_next
        for i in range(d):
            y[i] = xn[i] + mom * (xn[i] - x[i])
            x[i] = xn[i]
        y_is_x = False
        t_k = t_next
    return x_arr, gap, max_iter, False
