"""Slow, independent reference implementations used as test oracles.

Nothing here imports the transforms under test: Fourier coefficients are
direct sums over characters, states are built from explicit Kronecker-product
matrices, and density matrices are accumulated entry by entry.
"""

import itertools
import math

import numpy as np


def points(n):
    """All x in {+1,-1}^n in index order (+1 -> bit 0, MSB first)."""
    return [tuple(-1 if b else 1 for b in bits) for bits in itertools.product((0, 1), repeat=n)]


def subset_of(index, n):
    return [i for i in range(n) if (index >> (n - 1 - i)) & 1]


def character(S, x):
    return math.prod(x[i] for i in S)


def fourier_direct(values, n):
    pts = points(n)
    out = []
    for s in range(1 << n):
        S = subset_of(s, n)
        out.append(sum(values[j] * character(S, y) for j, y in enumerate(pts)) / 2**n)
    return np.array(out)


def multilinear_eval(coeffs, n):
    pts = points(n)
    return np.array([sum(coeffs[s] * character(subset_of(s, n), x) for s in range(1 << n)) for x in pts])


def hadamard_matrix(n):
    h = np.array([[1.0, 1.0], [1.0, -1.0]]) / math.sqrt(2)
    H = np.array([[1.0]])
    for _ in range(n):
        H = np.kron(H, h)
    return H


def forrelation_state_dense(f, g):
    n = int(math.log2(len(f)))
    plus = np.full(1 << n, 2 ** (-n / 2))
    return np.diag(np.asarray(g, float)) @ hadamard_matrix(n) @ np.diag(np.asarray(f, float)) @ plus


def rho_entries(F, G):
    """<i|rho|j> = E_k g_k(i) g_k(j) f^_k(i) f^_k(j), one entry at a time."""
    K, N = F.shape
    n = int(math.log2(N))
    Fh = [fourier_direct(F[k], n) for k in range(K)]
    rho = np.zeros((N, N))
    for i in range(N):
        for j in range(N):
            rho[i, j] = sum(G[k][i] * G[k][j] * Fh[k][i] * Fh[k][j] for k in range(K)) / K
    return rho


def sigma_entries(F, G, eps):
    K, N = F.shape
    n = int(math.log2(N))
    scale = math.sqrt(eps * N)
    Fh = [fourier_direct(F[k], n) for k in range(K)]
    sig = np.zeros((N, N))
    for i in range(N):
        for j in range(N):
            if i == j:
                sig[i, j] = 1 / N
                continue
            acc = 0.0
            for k in range(K):
                bi = min(1.0, max(-1.0, scale * Fh[k][i]))
                bj = min(1.0, max(-1.0, scale * Fh[k][j]))
                acc += G[k][i] * G[k][j] * bi * bj
            sig[i, j] = acc / (K * N)
    return sig
