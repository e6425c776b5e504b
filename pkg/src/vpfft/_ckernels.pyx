# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled per-pixel Backward Euler return map and consistent tangent.

Mirrors :func:`vpfft.material.be_return_map` and
:func:`vpfft.material.be_tangent` point by point; the Python side turns the
status codes into exceptions.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, log, exp, fabs, pow, isfinite
from libc.float cimport DBL_EPSILON

cnp.import_array()

cdef enum:
    OK = 0
    NO_CONVERGENCE = 1
    NONPOSITIVE_YIELD = 2


cdef inline double _phi(double u, double q, double G, double m, double c,
                        double ss0, double h, double* dphi) nogil:
    cdef double y = exp(u)
    cdef double seq = q - 3.0 * G * y
    cdef double ss = ss0 + h * y
    dphi[0] = m + 3.0 * G * y / seq + h * y / ss
    return m * (u - log(c)) - log(seq / ss)


cdef int _solve_dgam(double q, double G, double m, double c, double ss0,
                     double h, double rtol, int max_iter,
                     double* dgam, int* iters) nogil:
    cdef double hi = q / (3.0 * G)
    cdef double lo = 0.0
    cdef double u = log(c) + log(q / ss0) / m
    cdef double f, df, du, y, y_new, tol, x, ss, r, seq, floor
    cdef int k
    cdef bint converged = 0
    if not (u < log(hi)):
        u = log(0.5 * hi)
    for k in range(max_iter):
        f = _phi(u, q, G, m, c, ss0, h, &df)
        iters[0] = k + 1
        y = exp(u)
        if f < 0:
            lo = y
        else:
            hi = y
        du = -f / df
        tol = 1e-13 * (fabs(u) if fabs(u) > 1.0 else 1.0)
        if fabs(du) <= tol or f == 0:
            u = u + du
            converged = 1
            break
        y_new = exp(u + du)
        if not isfinite(y_new) or y_new <= lo or y_new >= hi:
            u = log(0.5 * (lo + hi))
        else:
            u = u + du
    x = exp(u)
    ss = ss0 + h * x
    if ss <= 0:
        return NONPOSITIVE_YIELD
    seq = q - 3.0 * G * x
    r = x - c * pow(seq / ss, 1.0 / m)
    dgam[0] = x
    # rounding floor, see material._rounding_floor
    tol = rtol * (x if x > c else c)
    floor = 4.0 * DBL_EPSILON * x * (1.0 + (q / seq + fabs(h) * x / ss + 1.0) / m)
    if floor > tol:
        tol = floor
    if not converged or not (fabs(r) <= tol):
        return NO_CONVERGENCE
    return OK


def be_update(const double[:, ::1] eps, const double[:, ::1] eps_p_t,
              const double[::1] gamma_t, const double[::1] K,
              const double[::1] G, const double[::1] g0, const double[::1] m,
              const double[::1] s0, const double[::1] h, double dt,
              double rtol=1e-12, int max_iter=50):
    cdef Py_ssize_t n = eps.shape[0]
    cdef Py_ssize_t i, a, b
    sigma_a = np.empty((n, 6))
    eps_p_a = np.empty((n, 6))
    N_a = np.empty((n, 6))
    C_a = np.empty((n, 6, 6))
    gamma_a = np.empty(n)
    gdot_a = np.empty(n)
    kappa_a = np.empty(n)
    dgam_a = np.empty(n)
    seq_a = np.empty(n)
    seqtr_a = np.empty(n)
    ss_a = np.empty(n)
    iters_a = np.zeros(n, dtype=np.intc)
    status_a = np.zeros(n, dtype=np.intc)
    cdef double[:, ::1] sigma = sigma_a
    cdef double[:, ::1] eps_p = eps_p_a
    cdef double[:, ::1] Nv = N_a
    cdef double[:, :, ::1] C = C_a
    cdef double[::1] gamma = gamma_a
    cdef double[::1] gdot = gdot_a
    cdef double[::1] kappa = kappa_a
    cdef double[::1] dgam = dgam_a
    cdef double[::1] seq = seq_a
    cdef double[::1] seqtr = seqtr_a
    cdef double[::1] ssv = ss_a
    cdef int[::1] iters = iters_a
    cdef int[::1] status = status_a
    cdef double e[6]
    cdef double s[6]
    cdef double N[6]
    cdef double tr, q, x, ss0, ss, alpha, beta, hr, coef, Gi, Ki, dev
    cdef int st, it
    with nogil:
        for i in range(n):
            Gi = G[i]
            Ki = K[i]
            for a in range(6):
                e[a] = eps[i, a] - eps_p_t[i, a]
            tr = e[0] + e[1] + e[2]
            q = 0.0
            for a in range(6):
                dev = e[a] - tr / 3.0 if a < 3 else e[a]
                s[a] = 2.0 * Gi * dev
                q = q + s[a] * s[a]
            q = sqrt(1.5 * q)
            for a in range(6):
                N[a] = 1.5 * s[a] / q if q > 0 else 0.0
            ss0 = s0[i] + h[i] * gamma_t[i]
            x = 0.0
            it = 0
            st = OK
            if ss0 <= 0:
                st = NONPOSITIVE_YIELD
            elif q > 0:
                st = _solve_dgam(q, Gi, m[i], dt * g0[i], ss0, h[i], rtol,
                                 max_iter, &x, &it)
            status[i] = st
            iters[i] = it
            ss = ss0 + h[i] * x
            dgam[i] = x
            gamma[i] = gamma_t[i] + x
            gdot[i] = x / dt
            seqtr[i] = q
            seq[i] = q - 3.0 * Gi * x
            ssv[i] = ss
            for a in range(6):
                Nv[i, a] = N[a]
                eps_p[i, a] = eps_p_t[i, a] + x * N[a]
                sigma[i, a] = s[a] - 2.0 * Gi * x * N[a]
                if a < 3:
                    sigma[i, a] = sigma[i, a] + Ki * tr
            if q > 0 and ss > 0:
                alpha = g0[i] * Gi * dt / (m[i] * ss) * pow(seq[i] / ss, 1.0 / m[i] - 1.0)
                hr = seq[i] * h[i] / (ss * Gi)
            else:
                alpha = 0.0
                hr = 0.0
            beta = 2.0 * alpha / (1.0 + 3.0 * alpha + hr * alpha)
            kappa[i] = 1.0 / (1.0 + hr * alpha)
            coef = 4.0 * Gi * Gi * x / q if q > 0 else 0.0
            for a in range(6):
                for b in range(6):
                    C[i, a, b] = (-2.0 * Gi * beta + coef) * N[a] * N[b]
                    if a < 3 and b < 3:
                        C[i, a, b] = C[i, a, b] + Ki - (2.0 * Gi - 1.5 * coef) / 3.0
                    if a == b:
                        C[i, a, b] = C[i, a, b] + 2.0 * Gi - 1.5 * coef
    return (sigma_a, eps_p_a, gamma_a, gdot_a, N_a, kappa_a, dgam_a, seq_a,
            seqtr_a, ss_a, C_a, iters_a, status_a)
