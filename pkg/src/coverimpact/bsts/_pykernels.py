"""Pure-Python kernels; the reference the compiled ``_kernels`` must match.

All randomness arrives as pre-drawn standard normals / gammas so both
backends produce the same numbers from the same seed.
"""

import math

import numpy as np

LOG_2PI = math.log(2.0 * math.pi)
PIVOT_RTOL = 1e-12


def psd_cholesky(A):
    """Lower factor L with L L' = A for symmetric PSD A.

    Pivots at or below ``PIVOT_RTOL * max(diag A)`` are treated as exact
    zeros and their column is cleared.
    """
    d = A.shape[0]
    L = np.zeros((d, d))
    tol = PIVOT_RTOL * max(max(A[i, i] for i in range(d)), 0.0)
    for j in range(d):
        s = A[j, j]
        for k in range(j):
            s -= L[j, k] * L[j, k]
        if s > tol and s > 0.0:
            ljj = math.sqrt(s)
            L[j, j] = ljj
            for i in range(j + 1, d):
                t = A[i, j]
                for k in range(j):
                    t -= L[i, k] * L[j, k]
                L[i, j] = t / ljj
    return L


def psd_solve(L, b):
    """Solve A x = b through ``psd_cholesky`` factor, zero on null pivots."""
    d = L.shape[0]
    w = np.zeros(d)
    for i in range(d):
        if L[i, i] == 0.0:
            continue
        t = b[i]
        for k in range(i):
            t -= L[i, k] * w[k]
        w[i] = t / L[i, i]
    x = np.zeros(d)
    for i in range(d - 1, -1, -1):
        if L[i, i] == 0.0:
            continue
        t = w[i]
        for k in range(i + 1, d):
            t -= L[k, i] * x[k]
        x[i] = t / L[i, i]
    return x


def _sym(P):
    return 0.5 * (P + P.T)


def kalman_forward(Z, T, RQR, obs_var, a1, P1, y, observed):
    n = y.shape[0]
    d = Z.shape[0]
    a_pred = np.zeros((n, d))
    P_pred = np.zeros((n, d, d))
    a_filt = np.zeros((n, d))
    P_filt = np.zeros((n, d, d))
    v = np.full(n, np.nan)
    F = np.full(n, np.nan)
    loglik = 0.0
    eye = np.eye(d)

    a = a1.copy()
    P = P1.copy()
    for t in range(n):
        a_pred[t] = a
        P_pred[t] = P
        if observed[t]:
            vt = y[t] - Z @ a
            PZ = P @ Z
            Ft = Z @ PZ + obs_var
            v[t] = vt
            F[t] = Ft
            if not Ft > 0.0:
                return a_pred, P_pred, a_filt, P_filt, v, F, loglik, t
            K = PZ / Ft
            a = a + K * vt
            A = eye - np.outer(K, Z)
            # Joseph form keeps P PSD under the large diffuse prior.
            P = _sym(A @ P @ A.T + obs_var * np.outer(K, K))
            loglik -= 0.5 * (LOG_2PI + math.log(Ft) + vt * vt / Ft)
        a_filt[t] = a
        P_filt[t] = P
        a = T @ a
        P = _sym(T @ P @ T.T + RQR)
    return a_pred, P_pred, a_filt, P_filt, v, F, loglik, -1


def backward_sample(T, a_filt, P_filt, a_pred, P_pred, z):
    n, d = a_filt.shape
    alpha = np.zeros((n, d))
    L = psd_cholesky(P_filt[n - 1])
    alpha[n - 1] = a_filt[n - 1] + L @ z[n - 1]
    for t in range(n - 2, -1, -1):
        Pf = P_filt[t]
        B = T @ Pf  # = Cov(alpha_{t+1}, alpha_t | y_1:t)
        Lp = psd_cholesky(P_pred[t + 1])
        X = np.zeros((d, d))
        for j in range(d):
            X[:, j] = psd_solve(Lp, B[:, j])
        G = X.T
        mean = a_filt[t] + G @ (alpha[t + 1] - a_pred[t + 1])
        V = _sym(Pf - G @ B)
        alpha[t] = mean + psd_cholesky(V) @ z[t]
    return alpha


def gibbs_chain(Z, T, R, Rpinv, a1, P1, y, observed, prior_b, init_var, z, gam, burn_in):
    """Run the variance/state Gibbs sweep; returns kept draws.

    ``gam[i, j]`` are standard-gamma variates with the conditional shapes
    already applied, so each variance draw is ``scale / gam``.
    """
    n_iter = z.shape[0]
    n, d = y.shape[0], Z.shape[0]
    q = R.shape[1]
    n_keep = n_iter - burn_in
    var_out = np.zeros((n_keep, 1 + q))
    state_out = np.zeros((n_keep, n, d))
    cur = np.array(init_var, dtype=np.float64)

    for it in range(n_iter):
        RQR = (R * cur[1:]) @ R.T
        a_pred, P_pred, a_filt, P_filt, _, _, _, bad = kalman_forward(
            Z, T, RQR, cur[0], a1, P1, y, observed
        )
        if bad >= 0:
            return var_out, state_out, bad, it
        alpha = backward_sample(T, a_filt, P_filt, a_pred, P_pred, z[it])

        sse = 0.0
        for t in range(n):
            if observed[t]:
                r = y[t] - Z @ alpha[t]
                sse += r * r
        cur[0] = (prior_b[0] + 0.5 * sse) / gam[it, 0]

        ss = np.zeros(q)
        for t in range(n - 1):
            eta = Rpinv @ (alpha[t + 1] - T @ alpha[t])
            ss += eta * eta
        for j in range(q):
            cur[1 + j] = (prior_b[1 + j] + 0.5 * ss[j]) / gam[it, 1 + j]

        if it >= burn_in:
            var_out[it - burn_in] = cur
            state_out[it - burn_in] = alpha
    return var_out, state_out, -1, -1
