"""Independent reference computations used by the tests.

Nothing here calls into the code paths it is used to check.
"""
import math

import numpy as np


def naive_forward(net, x):
    """Scalar loops over the recursion f_i^(s) = relu(sum_j c_ij f_j^(s-1) + c_i0)."""
    h = [float(v) for v in x]
    for W, b in zip(net.weights[:-1], net.biases[:-1]):
        h = [max(0.0, sum(W[i][j] * h[j] for j in range(len(h))) + b[i]) for i in range(len(b))]
    Wo, bo = net.weights[-1], net.biases[-1]
    return sum(Wo[0][i] * h[i] for i in range(len(h))) + bo[0]


def weighted_loss(net, X, y, w):
    return sum(wk * (yk - naive_forward(net, xk)) ** 2 for xk, yk, wk in zip(X, y, w))


def fd_gradient(net, X, y, w, step=1e-5):
    """Central finite differences of the weighted loss for every parameter,
    flattened in (W_0, b_0, W_1, b_1, ...) order."""
    out = []
    for arrays in zip(net.weights, net.biases):
        for arr in arrays:
            flat = arr.reshape(-1)
            for k in range(flat.size):
                old = flat[k]
                flat[k] = old + step
                up = weighted_loss(net, X, y, w)
                flat[k] = old - step
                down = weighted_loss(net, X, y, w)
                flat[k] = old
                out.append((up - down) / (2 * step))
    return np.array(out)


def min_abs_preactivation(net, X):
    worst = math.inf
    for x in X:
        h = [float(v) for v in x]
        for W, b in zip(net.weights[:-1], net.biases[:-1]):
            z = [sum(W[i][j] * h[j] for j in range(len(h))) + b[i] for i in range(len(b))]
            worst = min(worst, min(abs(v) for v in z))
            h = [max(0.0, v) for v in z]
    return worst


def brute_blocks(n, S):
    """Classify every i in 1..n by direct evaluation of the interval and
    residue definitions."""
    K = n // S
    interval = {}
    for i in range(1, n + 1):
        for k in range(1, K + 2):
            lo, hi = ((k - 1) * S, k * S) if k <= K else (K * S, n)
            if lo < i <= hi:
                interval[i] = k
                break
    even = {s: [] for s in range(S)}
    odd = {s: [] for s in range(S)}
    for i in range(1, n + 1):
        (even if interval[i] % 2 == 0 else odd)[i % S].append(i)
    intervals = [[i for i in range(1, n + 1) if interval[i] == k] for k in range(1, K + 2)]
    return intervals, even, odd
