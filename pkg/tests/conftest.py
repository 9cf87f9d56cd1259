import math

import numpy as np
import pytest
from scipy.stats import multivariate_normal

from coverimpact.bsts import StateSpaceModel, build_model

ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance_log():
    """Append ``(criterion, passed, detail)``; printed in the terminal summary."""

    def log(criterion, passed, detail):
        ACCEPTANCE_LINES.append((criterion, passed, detail))

    return log


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, passed, detail in sorted(ACCEPTANCE_LINES, key=lambda r: r[0]):
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] {criterion}: {detail}")


def random_model(rng, d=None, q=None, n_diffuse=False):
    d = d or int(rng.integers(1, 4))
    q = q or int(rng.integers(1, d + 1))
    T = rng.normal(0, 0.5, (d, d)) + np.eye(d) * 0.5
    R = rng.normal(0, 1, (d, q))
    Q = rng.uniform(0.05, 1.0, q)
    A = rng.normal(0, 1, (d, d))
    P1 = A @ A.T + 0.1 * np.eye(d)
    return StateSpaceModel(
        Z=rng.normal(0, 1, d), T=T, R=R, obs_var=float(rng.uniform(0.1, 2.0)), Q=Q,
        a1=rng.normal(0, 1, d), P1=P1,
    )


def dense_state_moments(m: StateSpaceModel, n: int):
    """Mean (n*d,) and covariance (n*d, n*d) of the stacked state path."""
    d = m.d
    RQR = m.RQR
    powers = [np.eye(d)]
    for _ in range(n):
        powers.append(m.T @ powers[-1])
    mean = np.concatenate([powers[t] @ m.a1 for t in range(n)])
    cov = np.zeros((n * d, n * d))
    for t in range(n):
        for u in range(n):
            block = powers[t] @ m.P1 @ powers[u].T
            for s in range(min(t, u)):
                block = block + powers[t - 1 - s] @ RQR @ powers[u - 1 - s].T
            cov[t * d:(t + 1) * d, u * d:(u + 1) * d] = block
    return mean, cov


def dense_oracle(m: StateSpaceModel, y):
    """Log-likelihood and E[alpha_t | y] by conditioning one big Gaussian."""
    y = np.asarray(y, dtype=np.float64)
    n, d = len(y), m.d
    obs = np.isfinite(y)
    mu_a, S_aa = dense_state_moments(m, n)
    H = np.zeros((n, n * d))
    for t in range(n):
        H[t, t * d:(t + 1) * d] = m.Z
    H = H[obs]
    mu_y = H @ mu_a
    S_yy = H @ S_aa @ H.T + m.obs_var * np.eye(obs.sum())
    S_ay = S_aa @ H.T
    loglik = multivariate_normal(mu_y, S_yy).logpdf(y[obs])
    smoothed = mu_a + S_ay @ np.linalg.solve(S_yy, y[obs] - mu_y)
    return float(loglik), smoothed.reshape(n, d)


def simulate(m: StateSpaceModel, n, seed, a1=None):
    """Draw y_1..y_n from ``m`` starting at ``a1`` (default ``m.a1``)."""
    rng = np.random.default_rng(seed)
    alpha = np.array(m.a1 if a1 is None else a1, dtype=float)
    y = np.zeros(n)
    for t in range(n):
        y[t] = m.Z @ alpha + rng.normal(0, math.sqrt(m.obs_var))
        alpha = m.T @ alpha + m.R @ (rng.normal(size=m.q) * np.sqrt(m.Q))
    return y


def standard_model(kind):
    """Diffuse structural model and 30 points simulated from it."""
    variances = (0.5, 0.05) if kind == "local_level" else (0.5, 0.05, 0.005)
    truth = build_model(kind, variances)
    y = simulate(truth, 30, seed=2024, a1=[10.0, 0.3][: truth.d])
    return build_model(kind, variances, y=y), y


@pytest.fixture(params=["local_level", "local_linear_trend"])
def standard_fixture(request):
    return standard_model(request.param)
