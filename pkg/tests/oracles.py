"""Independent reference computations used by the tests."""

import math

import numpy as np

from piranha import Shape, Weights


def py_step(F, G, u, v):
    """Scalar-loop network update, independent of the numpy code paths."""
    n = len(u)
    inp = list(v) + [1.0]
    out = []
    for a in range(n):
        z = sum(F[a][b] * u[b] for b in range(n)) + sum(G[a][d] * inp[d] for d in range(len(inp)))
        out.append(math.tanh(z))
    return out


def py_push(w, u, t, k, x):
    """Teacher step with x[t], then k-1 steps feeding the first m components back."""
    F, G, m = w.F.tolist(), w.G.tolist(), w.m
    h = list(u)
    if k == 0:
        return h
    h = py_step(F, G, h, list(x[t]))
    for _ in range(k - 1):
        h = py_step(F, G, h, h[:m])
    return h


def py_discounted(w_first, w_rest, U, x, gamma, K, T, k_min=0):
    total = 0.0
    m = w_first.m
    for t in range(T):
        for k in range(k_min, K + 1):
            if k == 0:
                h = list(U[t])
            else:
                h = py_step(w_first.F.tolist(), w_first.G.tolist(), list(U[t]), list(x[t]))
                for _ in range(k - 1):
                    h = py_step(w_rest.F.tolist(), w_rest.G.tolist(), h, h[:m])
            for c in range(m):
                total += gamma ** k * (h[c] - x[t + k][c]) ** 2
    return total


def random_instance(rng, n=None, m=None, T=10, K=6, gamma=0.5, scale=0.5, clip=True, extra=0):
    from piranha import clip_recurrent, rollout

    if m is None:
        m = int(rng.integers(1, 4))
    if n is None:
        n = int(rng.integers(max(3, m + 1), 7))
    shape = Shape(m, n)
    w = Weights.random(shape, rng, scale=scale)
    if clip:
        w = Weights(clip_recurrent(w.F, gamma), w.G)
    x = rng.uniform(-1.0, 1.0, size=(T + K + extra, m))
    U = rollout(w, x, T)
    return w, U, x
