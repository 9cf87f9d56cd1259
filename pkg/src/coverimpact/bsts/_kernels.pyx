# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled Kalman / FFBS / Gibbs kernels.

Mirrors ``_pykernels`` operation for operation; matrices are row-major
d x d blocks addressed through raw pointers.
"""

import numpy as np

from libc.math cimport log, sqrt, M_PI

cdef double PIVOT_RTOL = 1e-12
cdef double LOG_2PI = log(2.0 * M_PI)


cdef void psd_chol(const double* A, double* L, Py_ssize_t d) noexcept nogil:
    cdef Py_ssize_t i, j, k
    cdef double s, t, ljj, tol, mx = 0.0
    for i in range(d * d):
        L[i] = 0.0
    for i in range(d):
        if A[i * d + i] > mx:
            mx = A[i * d + i]
    tol = PIVOT_RTOL * mx
    for j in range(d):
        s = A[j * d + j]
        for k in range(j):
            s -= L[j * d + k] * L[j * d + k]
        if s > tol and s > 0.0:
            ljj = sqrt(s)
            L[j * d + j] = ljj
            for i in range(j + 1, d):
                t = A[i * d + j]
                for k in range(j):
                    t -= L[i * d + k] * L[j * d + k]
                L[i * d + j] = t / ljj


cdef void psd_solve(const double* L, const double* b, double* x, double* w, Py_ssize_t d) noexcept nogil:
    cdef Py_ssize_t i, k
    cdef double t
    for i in range(d):
        w[i] = 0.0
        x[i] = 0.0
    for i in range(d):
        if L[i * d + i] == 0.0:
            continue
        t = b[i]
        for k in range(i):
            t -= L[i * d + k] * w[k]
        w[i] = t / L[i * d + i]
    for i in range(d - 1, -1, -1):
        if L[i * d + i] == 0.0:
            continue
        t = w[i]
        for k in range(i + 1, d):
            t -= L[k * d + i] * x[k]
        x[i] = t / L[i * d + i]


cdef inline void symmetrize(double* P, Py_ssize_t d) noexcept nogil:
    cdef Py_ssize_t i, j
    cdef double m
    for i in range(d):
        for j in range(i + 1, d):
            m = 0.5 * (P[i * d + j] + P[j * d + i])
            P[i * d + j] = m
            P[j * d + i] = m


cdef inline void matmul(const double* A, const double* B, double* C, Py_ssize_t d) noexcept nogil:
    # C = A B
    cdef Py_ssize_t i, j, k
    cdef double s
    for i in range(d):
        for j in range(d):
            s = 0.0
            for k in range(d):
                s += A[i * d + k] * B[k * d + j]
            C[i * d + j] = s


cdef inline void matmul_bt(const double* A, const double* B, double* C, Py_ssize_t d) noexcept nogil:
    # C = A B'
    cdef Py_ssize_t i, j, k
    cdef double s
    for i in range(d):
        for j in range(d):
            s = 0.0
            for k in range(d):
                s += A[i * d + k] * B[j * d + k]
            C[i * d + j] = s


cdef Py_ssize_t forward(
    const double* Z, const double* T, const double* RQR, double obs_var,
    const double* a1, const double* P1, const double* y, const unsigned char* observed,
    Py_ssize_t n, Py_ssize_t d,
    double* a_pred, double* P_pred, double* a_filt, double* P_filt,
    double* v, double* F, double* loglik, double* work,
) noexcept nogil:
    """Returns -1 on success, else the index t where F <= 0."""
    cdef Py_ssize_t t, i, j, dd = d * d
    cdef double vt, Ft, s
    cdef double* a = work
    cdef double* P = work + d
    cdef double* PZ = P + dd
    cdef double* K = PZ + d
    cdef double* A = K + d
    cdef double* tmp = A + dd
    cdef double* anew = tmp + dd

    for i in range(d):
        a[i] = a1[i]
    for i in range(dd):
        P[i] = P1[i]
    loglik[0] = 0.0

    for t in range(n):
        for i in range(d):
            a_pred[t * d + i] = a[i]
        for i in range(dd):
            P_pred[t * dd + i] = P[i]
        if observed[t]:
            vt = y[t]
            for i in range(d):
                vt -= Z[i] * a[i]
            Ft = obs_var
            for i in range(d):
                s = 0.0
                for j in range(d):
                    s += P[i * d + j] * Z[j]
                PZ[i] = s
                Ft += Z[i] * s
            v[t] = vt
            F[t] = Ft
            if not Ft > 0.0:
                return t
            for i in range(d):
                K[i] = PZ[i] / Ft
                a[i] += K[i] * vt
            for i in range(d):
                for j in range(d):
                    A[i * d + j] = (1.0 if i == j else 0.0) - K[i] * Z[j]
            matmul(A, P, tmp, d)
            matmul_bt(tmp, A, P, d)
            for i in range(d):
                for j in range(d):
                    P[i * d + j] += obs_var * K[i] * K[j]
            symmetrize(P, d)
            loglik[0] -= 0.5 * (LOG_2PI + log(Ft) + vt * vt / Ft)
        for i in range(d):
            a_filt[t * d + i] = a[i]
        for i in range(dd):
            P_filt[t * dd + i] = P[i]
        for i in range(d):
            s = 0.0
            for j in range(d):
                s += T[i * d + j] * a[j]
            anew[i] = s
        for i in range(d):
            a[i] = anew[i]
        matmul(T, P, tmp, d)
        matmul_bt(tmp, T, P, d)
        for i in range(dd):
            P[i] += RQR[i]
        symmetrize(P, d)
    return -1


cdef void backward(
    const double* T, const double* a_filt, const double* P_filt,
    const double* a_pred, const double* P_pred, const double* z,
    Py_ssize_t n, Py_ssize_t d, double* alpha, double* work,
) noexcept nogil:
    cdef Py_ssize_t t, i, j, k, dd = d * d
    cdef double s
    cdef const double* Pf
    cdef double* L = work
    cdef double* B = L + dd
    cdef double* G = B + dd
    cdef double* V = G + dd
    cdef double* col = V + dd
    cdef double* x = col + d
    cdef double* w = x + d
    cdef double* mean = w + d
    cdef double* diff = mean + d

    psd_chol(P_filt + (n - 1) * dd, L, d)
    for i in range(d):
        s = a_filt[(n - 1) * d + i]
        for k in range(i + 1):
            s += L[i * d + k] * z[(n - 1) * d + k]
        alpha[(n - 1) * d + i] = s

    for t in range(n - 2, -1, -1):
        Pf = P_filt + t * dd
        matmul(T, Pf, B, d)
        psd_chol(P_pred + (t + 1) * dd, L, d)
        for j in range(d):
            for i in range(d):
                col[i] = B[i * d + j]
            psd_solve(L, col, x, w, d)
            # x is column j of P_pred^-1 B, i.e. row j of G
            for i in range(d):
                G[j * d + i] = x[i]
        for i in range(d):
            diff[i] = alpha[(t + 1) * d + i] - a_pred[(t + 1) * d + i]
        for i in range(d):
            s = a_filt[t * d + i]
            for k in range(d):
                s += G[i * d + k] * diff[k]
            mean[i] = s
        matmul(G, B, V, d)
        for i in range(dd):
            V[i] = Pf[i] - V[i]
        symmetrize(V, d)
        psd_chol(V, L, d)
        for i in range(d):
            s = mean[i]
            for k in range(i + 1):
                s += L[i * d + k] * z[t * d + k]
            alpha[t * d + i] = s


def psd_cholesky(A):
    cdef const double[:, ::1] Av = np.ascontiguousarray(A, dtype=np.float64)
    cdef Py_ssize_t d = Av.shape[0]
    out = np.zeros((d, d))
    cdef double[:, ::1] Lv = out
    if d:
        psd_chol(&Av[0, 0], &Lv[0, 0], d)
    return out


def kalman_forward(Z, T, RQR, double obs_var, a1, P1, y, observed):
    cdef const double[::1] Zv = np.ascontiguousarray(Z, dtype=np.float64)
    cdef const double[:, ::1] Tv = np.ascontiguousarray(T, dtype=np.float64)
    cdef const double[:, ::1] RQRv = np.ascontiguousarray(RQR, dtype=np.float64)
    cdef const double[::1] a1v = np.ascontiguousarray(a1, dtype=np.float64)
    cdef const double[:, ::1] P1v = np.ascontiguousarray(P1, dtype=np.float64)
    cdef const double[::1] yv = np.ascontiguousarray(y, dtype=np.float64)
    cdef const unsigned char[::1] ov = np.ascontiguousarray(observed, dtype=np.uint8)
    cdef Py_ssize_t n = yv.shape[0], d = Zv.shape[0]

    a_pred = np.zeros((n, d))
    P_pred = np.zeros((n, d, d))
    a_filt = np.zeros((n, d))
    P_filt = np.zeros((n, d, d))
    v = np.full(n, np.nan)
    F = np.full(n, np.nan)
    work = np.zeros(3 * d * d + 4 * d)
    cdef double[:, ::1] apv = a_pred
    cdef double[:, :, ::1] Ppv = P_pred
    cdef double[:, ::1] afv = a_filt
    cdef double[:, :, ::1] Pfv = P_filt
    cdef double[::1] vv = v
    cdef double[::1] Fv = F
    cdef double[::1] wv = work
    cdef double loglik = 0.0
    cdef Py_ssize_t bad
    with nogil:
        bad = forward(&Zv[0], &Tv[0, 0], &RQRv[0, 0], obs_var, &a1v[0], &P1v[0, 0],
                      &yv[0], &ov[0], n, d, &apv[0, 0], &Ppv[0, 0, 0], &afv[0, 0],
                      &Pfv[0, 0, 0], &vv[0], &Fv[0], &loglik, &wv[0])
    return a_pred, P_pred, a_filt, P_filt, v, F, loglik, bad


def backward_sample(T, a_filt, P_filt, a_pred, P_pred, z):
    cdef const double[:, ::1] Tv = np.ascontiguousarray(T, dtype=np.float64)
    cdef const double[:, ::1] afv = np.ascontiguousarray(a_filt, dtype=np.float64)
    cdef const double[:, :, ::1] Pfv = np.ascontiguousarray(P_filt, dtype=np.float64)
    cdef const double[:, ::1] apv = np.ascontiguousarray(a_pred, dtype=np.float64)
    cdef const double[:, :, ::1] Ppv = np.ascontiguousarray(P_pred, dtype=np.float64)
    cdef const double[:, ::1] zv = np.ascontiguousarray(z, dtype=np.float64)
    cdef Py_ssize_t n = afv.shape[0], d = afv.shape[1]
    alpha = np.zeros((n, d))
    work = np.zeros(4 * d * d + 5 * d)
    cdef double[:, ::1] alv = alpha
    cdef double[::1] wv = work
    with nogil:
        backward(&Tv[0, 0], &afv[0, 0], &Pfv[0, 0, 0], &apv[0, 0], &Ppv[0, 0, 0],
                 &zv[0, 0], n, d, &alv[0, 0], &wv[0])
    return alpha


def gibbs_chain(Z, T, R, Rpinv, a1, P1, y, observed, prior_b, init_var, z, gam, Py_ssize_t burn_in):
    cdef const double[::1] Zv = np.ascontiguousarray(Z, dtype=np.float64)
    cdef const double[:, ::1] Tv = np.ascontiguousarray(T, dtype=np.float64)
    cdef const double[:, ::1] Rv = np.ascontiguousarray(R, dtype=np.float64)
    cdef const double[:, ::1] Rpv = np.ascontiguousarray(Rpinv, dtype=np.float64)
    cdef const double[::1] a1v = np.ascontiguousarray(a1, dtype=np.float64)
    cdef const double[:, ::1] P1v = np.ascontiguousarray(P1, dtype=np.float64)
    cdef const double[::1] yv = np.ascontiguousarray(y, dtype=np.float64)
    cdef const unsigned char[::1] ov = np.ascontiguousarray(observed, dtype=np.uint8)
    cdef const double[::1] bv = np.ascontiguousarray(prior_b, dtype=np.float64)
    cdef const double[:, :, ::1] zv = np.ascontiguousarray(z, dtype=np.float64)
    cdef const double[:, ::1] gv = np.ascontiguousarray(gam, dtype=np.float64)

    cdef Py_ssize_t n_iter = zv.shape[0], n = yv.shape[0], d = Zv.shape[0]
    cdef Py_ssize_t q = Rv.shape[1], dd = d * d, n_keep = n_iter - burn_in
    cdef Py_ssize_t it, t, i, j, k, bad = -1, bad_it = -1

    var_out = np.zeros((n_keep, 1 + q))
    state_out = np.zeros((n_keep, n, d))
    cdef double[:, ::1] vov = var_out
    cdef double[:, :, ::1] sov = state_out

    cur_arr = np.array(init_var, dtype=np.float64)
    cdef double[::1] cur = cur_arr
    a_pred = np.zeros((n, d))
    P_pred = np.zeros((n, d, d))
    a_filt = np.zeros((n, d))
    P_filt = np.zeros((n, d, d))
    v = np.zeros(n)
    F = np.zeros(n)
    alpha = np.zeros((n, d))
    RQR = np.zeros((d, d))
    ss = np.zeros(q)
    eta = np.zeros(q)
    resid = np.zeros(d)
    fwork = np.zeros(3 * dd + 4 * d)
    bwork = np.zeros(4 * dd + 5 * d)
    cdef double[:, ::1] apv = a_pred
    cdef double[:, :, ::1] Ppv = P_pred
    cdef double[:, ::1] afv = a_filt
    cdef double[:, :, ::1] Pfv = P_filt
    cdef double[::1] vv = v
    cdef double[::1] Fv = F
    cdef double[:, ::1] alv = alpha
    cdef double[:, ::1] RQRv = RQR
    cdef double[::1] ssv = ss
    cdef double[::1] etav = eta
    cdef double[::1] rv = resid
    cdef double[::1] fw = fwork
    cdef double[::1] bw = bwork
    cdef double loglik, r, s, sse

    with nogil:
        for it in range(n_iter):
            for i in range(d):
                for j in range(d):
                    s = 0.0
                    for k in range(q):
                        s += Rv[i, k] * cur[1 + k] * Rv[j, k]
                    RQRv[i, j] = s
            bad = forward(&Zv[0], &Tv[0, 0], &RQRv[0, 0], cur[0], &a1v[0], &P1v[0, 0],
                          &yv[0], &ov[0], n, d, &apv[0, 0], &Ppv[0, 0, 0], &afv[0, 0],
                          &Pfv[0, 0, 0], &vv[0], &Fv[0], &loglik, &fw[0])
            if bad >= 0:
                bad_it = it
                break
            backward(&Tv[0, 0], &afv[0, 0], &Pfv[0, 0, 0], &apv[0, 0], &Ppv[0, 0, 0],
                     &zv[it, 0, 0], n, d, &alv[0, 0], &bw[0])

            sse = 0.0
            for t in range(n):
                if ov[t]:
                    r = yv[t]
                    for i in range(d):
                        r -= Zv[i] * alv[t, i]
                    sse += r * r
            cur[0] = (bv[0] + 0.5 * sse) / gv[it, 0]

            for j in range(q):
                ssv[j] = 0.0
            for t in range(n - 1):
                for i in range(d):
                    s = alv[t + 1, i]
                    for k in range(d):
                        s -= Tv[i, k] * alv[t, k]
                    rv[i] = s
                for j in range(q):
                    s = 0.0
                    for i in range(d):
                        s += Rpv[j, i] * rv[i]
                    ssv[j] += s * s
            for j in range(q):
                cur[1 + j] = (bv[1 + j] + 0.5 * ssv[j]) / gv[it, 1 + j]

            if it >= burn_in:
                for j in range(1 + q):
                    vov[it - burn_in, j] = cur[j]
                for t in range(n):
                    for i in range(d):
                        sov[it - burn_in, t, i] = alv[t, i]
    return var_out, state_out, bad, bad_it
