"""Gauss-Legendre-Lobatto nodal basis on [-1, 1].

Provides GLL nodes/weights, barycentric Lagrange interpolation, the nodal
differentiation matrix, endpoint lift coefficients and the two-to-one mortar
interpolation/projection operators used at non-conforming faces.
"""

import math

import numpy as np

__all__ = [
    "gauss_lobatto",
    "lagrange_interp_matrix",
    "diff_matrix",
    "legendre_vandermonde",
    "central_fd_weights",
    "Basis",
]


def _legendre(n, x):
    """Evaluate P_n and P_n' at points x by the three-term recurrence."""
    x = np.asarray(x, dtype=float)
    p0 = np.ones_like(x)
    if n == 0:
        return p0, np.zeros_like(x)
    p1 = x.copy()
    for k in range(2, n + 1):
        p0, p1 = p1, ((2 * k - 1) * x * p1 - (k - 1) * p0) / k
    if n == 1:
        p0, p1 = np.ones_like(x), x.copy()
    # derivative from the standard identity, endpoint-safe
    dp = np.where(
        np.abs(x) < 1.0,
        n * (x * p1 - p0) / np.where(np.abs(x) < 1.0, x * x - 1.0, 1.0),
        0.5 * n * (n + 1) * np.sign(x) ** (n + 1),
    )
    return p1, dp


def gauss_lobatto(n, tol=1e-15):
    """Nodes and weights of the (n+1)-point Gauss-Lobatto rule, degree n >= 1.

    Interior nodes are the roots of P_n'; Newton iteration on
    (1 - x^2) P_n'(x) from Chebyshev-Gauss-Lobatto initial guesses.

    Returns (x, w), each of shape (n+1,), x ascending, sum(w) == 2.
    """
    if n < 1:
        raise ValueError("degree must be >= 1")
    x = -np.cos(np.pi * np.arange(n + 1) / n)
    for _ in range(100):
        p, dp = _legendre(n, x)
        # g = (1 - x^2) P_n'(x); Newton update using g' = -n(n+1) P_n
        g = (1.0 - x * x) * dp
        dg = -n * (n + 1) * p
        dx = np.where(np.abs(dg) > 0, g / dg, 0.0)
        dx[0] = dx[-1] = 0.0
        x = x - dx
        if np.max(np.abs(dx)) < tol:
            break
    x[0], x[-1] = -1.0, 1.0
    # enforce symmetry to round-off
    x = 0.5 * (x - x[::-1])
    p, _ = _legendre(n, x)
    w = 2.0 / (n * (n + 1) * p * p)
    return x, w


def _bary_weights(nodes):
    diff = nodes[:, None] - nodes[None, :]
    np.fill_diagonal(diff, 1.0)
    return 1.0 / np.prod(diff, axis=1)


def lagrange_interp_matrix(nodes, xeval):
    """Matrix L with L[i, j] = ell_j(xeval[i]) by barycentric interpolation."""
    nodes = np.asarray(nodes, float)
    xeval = np.atleast_1d(np.asarray(xeval, float))
    bw = _bary_weights(nodes)
    L = np.zeros((xeval.size, nodes.size))
    for i, xv in enumerate(xeval):
        d = xv - nodes
        hit = np.isclose(d, 0.0, rtol=0.0, atol=1e-14)
        if hit.any():
            L[i, np.argmax(hit)] = 1.0
        else:
            t = bw / d
            L[i] = t / t.sum()
    return L


def diff_matrix(nodes):
    """Nodal differentiation matrix: (D u)_i = p'(nodes[i]) for p interpolating u."""
    nodes = np.asarray(nodes, float)
    bw = _bary_weights(nodes)
    n = nodes.size
    D = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            if i != j:
                D[i, j] = (bw[j] / bw[i]) / (nodes[i] - nodes[j])
        D[i, i] = -np.sum(D[i, [j for j in range(n) if j != i]])
    return D


def legendre_vandermonde(nodes, degree=None):
    """V[i, p] = orthonormal Legendre polynomial p evaluated at nodes[i]."""
    nodes = np.asarray(nodes, float)
    if degree is None:
        degree = nodes.size - 1
    V = np.zeros((nodes.size, degree + 1))
    for p in range(degree + 1):
        val, _ = _legendre(p, nodes)
        V[:, p] = val * np.sqrt((2 * p + 1) / 2.0)
    return V


def central_fd_weights(k, order):
    """Symmetric finite-difference weights for the k-th derivative.

    Returns (offsets, coeffs) with sum_m c_m g(m h) ~= h^k g^(k)(0) and
    formal accuracy >= order (order rounded up to even).
    """
    order = max(2, order + (order % 2))
    m = (k + 1) // 2 + order // 2 - 1
    offs = np.arange(-m, m + 1)
    A = np.vander(offs, 2 * m + 1, increasing=True).T.astype(float)
    rhs = np.zeros(2 * m + 1)
    rhs[k] = float(math.factorial(k))
    c = np.linalg.solve(A, rhs)
    c[np.abs(c) < 1e-13] = 0.0
    return offs, c


class Basis:
    """Degree-N GLL nodal basis with the operators the solver needs.

    Attributes:
        x, w: nodes and quadrature weights, shape (N+1,).
        D: differentiation matrix.
        lift_l, lift_r: endpoint lift coefficients 1/w_0 and 1/w_N used by
            the correction terms (the DG-equivalent correction functions have
            g_l'(x_p) = -delta_{p0}/w_0 and g_r'(x_p) = delta_{pN}/w_N).
        V: (2, N+1, N+1) interpolation from a face to its two half faces.
        P: (2, N+1, N+1) L2 projection from the half faces back to the face.
        VL: orthonormal Legendre Vandermonde for modal analysis.
    """

    def __init__(self, degree):
        if not 1 <= degree <= 8:
            raise ValueError("degree must be in [1, 8]")
        self.degree = degree
        self.n = degree + 1
        self.x, self.w = gauss_lobatto(degree)
        self.D = diff_matrix(self.x)
        self.lift_l = 1.0 / self.w[0]
        self.lift_r = 1.0 / self.w[-1]
        self.VL = legendre_vandermonde(self.x)
        # half-face maps: phi_0(y) = 2y + 1 on [-1, 0], phi_1(y) = 2y - 1 on [0, 1]
        # V interpolates face data to the half faces; P is the exact L2
        # projection back, so that sum_s P_s V_s = I holds to round-off.
        self.V = np.zeros((2, self.n, self.n))
        self.P = np.zeros((2, self.n, self.n))
        xg, wg = np.polynomial.legendre.leggauss(self.n + 2)  # exact to 2N+3
        M = np.zeros((self.n, self.n))
        Lg = lagrange_interp_matrix(self.x, xg)
        M = Lg.T @ (wg[:, None] * Lg)
        for s in range(2):
            y = 0.5 * (self.x + (2 * s - 1))  # phi_s^{-1}(x)
            self.V[s] = lagrange_interp_matrix(self.x, y)
            yg = 0.5 * (xg + (2 * s - 1))
            B = 0.5 * lagrange_interp_matrix(self.x, yg).T @ (wg[:, None] * Lg)
            self.P[s] = np.linalg.solve(M, B)

    def interp_to(self, xeval):
        return lagrange_interp_matrix(self.x, xeval)
