"""Slow, literal reimplementations used as test oracles.

Nothing here imports from xsdr; every formula is written out with loops.
"""

import numpy as np
from scipy import optimize


def naive_moments(Z, labels, H):
    n, p = Z.shape
    props, means, Vs = [], [], []
    for h in range(H):
        rows = [Z[i] for i in range(n) if labels[i] == h]
        props.append(len(rows) / n)
        mu = np.zeros(p)
        S = np.zeros((p, p))
        for z in rows:
            mu += z
            S += np.outer(z, z)
        means.append(mu / len(rows))
        Vs.append(S / len(rows) - np.eye(p))
    return props, means, Vs


def naive_sir(Z, labels, H):
    props, means, _ = naive_moments(Z, labels, H)
    p = Z.shape[1]
    M = np.zeros((p, p))
    for ph, mu in zip(props, means):
        M += ph * np.outer(mu, mu)
    return M


def naive_save(Z, labels, H):
    props, means, Vs = naive_moments(Z, labels, H)
    p = Z.shape[1]
    G = np.zeros((p, p))
    for ph, mu, V in zip(props, means, Vs):
        A = V - np.outer(mu, mu)
        G += ph * (A @ A)
    return G


def naive_dr(Z, labels, H):
    props, means, Vs = naive_moments(Z, labels, H)
    p = Z.shape[1]
    first = np.zeros((p, p))
    for ph, V in zip(props, Vs):
        first += ph * (V @ V)
    M = naive_sir(Z, labels, H)
    scale = sum(ph * float(mu @ mu) for ph, mu in zip(props, means))
    return 2 * first + 2 * (M @ M) + 2 * scale * M


def equal_count_labels(v, H):
    """Slice labels by enumerating the sorted order with explicit counts."""
    n = len(v)
    order = sorted(range(n), key=lambda i: (v[i], i))
    sizes = [n // H + (1 if h < n % H else 0) for h in range(H)]
    labels = [0] * n
    pos = 0
    for h, s in enumerate(sizes):
        for i in order[pos:pos + s]:
            labels[i] = h
        pos += s
    return np.array(labels)


def naive_dcor2(u, v):
    u = np.asarray(u, dtype=float).reshape(len(u), -1)
    v = np.asarray(v, dtype=float).reshape(len(v), -1)
    n = len(u)

    def centered(x):
        a = np.array([[np.linalg.norm(x[i] - x[j]) for j in range(n)] for i in range(n)])
        row = a.mean(axis=1)
        col = a.mean(axis=0)
        return np.array([[a[i, j] - row[i] - col[j] + a.mean() for j in range(n)] for i in range(n)])

    A, B = centered(u), centered(v)
    uv = (A * B).mean()
    uu = (A * A).mean()
    vv = (B * B).mean()
    if uu * vv == 0:
        return 0.0
    return uv / np.sqrt(uu * vv)


def brute_expectile(values, tau):
    values = np.asarray(values, dtype=float)

    def loss(a):
        c = values - a
        return np.sum(np.where(c > 0, tau, 1 - tau) * c**2)

    res = optimize.minimize_scalar(loss, bounds=(values.min(), values.max()), method="bounded",
                                   options={"xatol": 1e-12})
    return res.x


def gaussian_gram(X, r):
    n = len(X)
    return np.array([[np.exp(-r * np.sum((X[i] - X[j]) ** 2)) for j in range(n)] for i in range(n)])


def ridge_half_squared(K, y, lam):
    """Minimize 0.5 * sum r_i^2 + lam a'Ka with unpenalized intercept.

    Stationarity: (K + 2 lam I) a + a0 1 = y, 1'a = 0.
    """
    n = len(y)
    A = np.zeros((n + 1, n + 1))
    A[:n, :n] = K + 2 * lam * np.eye(n)
    A[:n, n] = 1
    A[n, :n] = 1
    sol = np.linalg.solve(A, np.append(y, 0.0))
    return sol[n], sol[:n]


def projection_matrix(B):
    Q, _ = np.linalg.qr(np.asarray(B, dtype=float))
    return Q @ Q.T


NAIVE = {"sir": naive_sir, "save": naive_save, "dr": naive_dr}
