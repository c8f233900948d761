"""Independent reference computations used only by the tests."""
import itertools

import numpy as np


def brute_force_allocation(s, budget, cap, step):
    """Best feasible plan on a grid of increments, by exhaustive enumeration."""
    s = np.asarray(s, dtype=float)
    n = len(s)
    total = n * budget
    grid = np.round(np.arange(0.0, cap + step / 2, step), 10)
    if n == 1:
        return np.array([total]), float(s[0] * total)
    mesh = np.stack(np.meshgrid(*([grid] * (n - 1)), indexing="ij"), axis=-1).reshape(-1, n - 1)
    last = total - mesh.sum(axis=1)
    x = np.column_stack([mesh, last])
    ok = (last >= -1e-9) & (last <= cap + 1e-9)
    mean = total / n
    ok &= np.all(s * x >= s * mean - 1e-9, axis=1)
    x = x[ok]
    obj = x @ s
    k = int(np.argmax(obj))
    return x[k], float(obj[k])


def vertex_enumeration(s, budget, cap):
    """LP optimum by enumerating vertices: all but one coordinate at a bound."""
    s = np.asarray(s, dtype=float)
    n = len(s)
    lower = np.where(s > 0, budget, 0.0)
    upper = np.where(s < 0, budget, cap)
    best = -np.inf
    best_x = None
    for free in range(n):
        others = [i for i in range(n) if i != free]
        for choice in itertools.product((0, 1), repeat=n - 1):
            x = np.empty(n)
            for i, c in zip(others, choice):
                x[i] = upper[i] if c else lower[i]
            x[free] = n * budget - x[others].sum()
            if lower[free] - 1e-12 <= x[free] <= upper[free] + 1e-12:
                val = float(x @ s)
                if val > best:
                    best, best_x = val, x
    return best_x, best


def normal_equations(X, y):
    X = np.asarray(X, dtype=float)
    return np.linalg.solve(X.T @ X, X.T @ y)


def lsdv(y, X, groups):
    """Dummy-variable OLS: one indicator column per group, no intercept."""
    codes =np.unique(groups, return_inverse=True)[1]
    D = np.zeros((len(y), codes.max() + 1))
    D[np.arange(len(y)), codes] = 1.0
    Z = np.column_stack([X, D])
    beta, *_ = np.linalg.lstsq(Z, y, rcond=None)
    return beta[: X.shape[1]]


def cell_means_did(y, post, treated):
    y = np.asarray(y, dtype=float)
    post = np.asarray(post, dtype=bool)
    treated = np.asarray(treated, dtype=bool)

    def m(p, t):
        return y[(post == p) & (treated == t)].mean()

    return (m(True, True) - m(False, True)) - (m(True, False) - m(False, False))


def sandwich_by_loops(X, u, clusters):
    """CR1 sandwich built cluster by cluster with explicit outer products."""
    X = np.asarray(X, dtype=float)
    u = np.asarray(u, dtype=float)
    n, k = X.shape
    bread = np.linalg.inv(X.T @ X)
    meat = np.zeros((k, k))
    labels = sorted(set(clusters))
    for g in labels:
        idx = [i for i, c in enumerate(clusters) if c == g]
        score = X[idx].T @ u[idx]
        meat += np.outer(score, score)
    G = len(labels)
    factor = G / (G - 1) * (n - 1) / (n - k)
    return factor * bread @ meat @ bread
