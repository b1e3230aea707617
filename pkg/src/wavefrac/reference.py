"""Reference-element tools: 1D rules, Lagrange bases and tensor products on [-1, 1]^2."""
from __future__ import annotations

from functools import lru_cache

import numpy as np
from numpy.polynomial import legendre


@lru_cache(maxsize=None)
def gauss(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre points and weights on [-1, 1] (exact to degree 2n-1)."""
    if n < 1:
        raise ValueError("need at least one quadrature point")
    x, w = legendre.leggauss(n)
    return x, w


@lru_cache(maxsize=None)
def gauss_lobatto(n: int) -> np.ndarray:
    """Gauss-Lobatto-Legendre nodes on [-1, 1] (endpoints included)."""
    if n < 2:
        raise ValueError("Lobatto rule needs n >= 2")
    inner = legendre.Legendre.basis(n - 1).deriv().roots()
    return np.concatenate(([-1.0], np.sort(inner.real), [1.0]))


def lagrange_1d(nodes: np.ndarray, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Values and derivatives of the Lagrange polynomials on `nodes` at `x`.

    Returns arrays of shape (len(x), len(nodes)).
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    n = len(nodes)
    val = np.ones((len(x), n))
    der = np.zeros((len(x), n))
    for a in range(n):
        others = [b for b in range(n) if b != a]
        denom = np.prod([nodes[a] - nodes[b] for b in others])
        for b in others:
            val[:, a] *= x - nodes[b]
        for m in others:
            term = np.ones(len(x))
            for b in others:
                if b != m:
                    term *= x - nodes[b]
            der[:, a] += term
        val[:, a] /= denom
        der[:, a] /= denom
    return val, der


def tensor_basis(degree: int, xi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Tensor-product nodal basis of degree `degree` at reference points `xi` (m, 2).

    Node index a = i + (degree + 1) * j with i running along xi_1.
    Returns values (m, nb) and reference gradients (m, nb, 2).
    """
    nodes = gauss_lobatto(degree + 1)
    v1, d1 = lagrange_1d(nodes, xi[:, 0])
    v2, d2 = lagrange_1d(nodes, xi[:, 1])
    val = np.einsum("mj,mi->mji", v2, v1).reshape(len(xi), -1)
    g1 = np.einsum("mj,mi->mji", v2, d1).reshape(len(xi), -1)
    g2 = np.einsum("mj,mi->mji", d2, v1).reshape(len(xi), -1)
    return val, np.stack([g1, g2], axis=-1)


def tensor_gauss(n: int) -> tuple[np.ndarray, np.ndarray]:
    """n x n Gauss rule on [-1, 1]^2, same index ordering as `tensor_basis`."""
    x, w = gauss(n)
    X1, X2 = np.meshgrid(x, x, indexing="xy")
    W = np.outer(w, w)
    return np.column_stack([X1.ravel(), X2.ravel()]), W.ravel()


# Q1 corner ordering, counterclockwise.
CORNERS = np.array([[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]])


def q1_shape(xi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Bilinear shape functions for the counterclockwise corners at `xi` (m, 2)."""
    x, y = xi[:, 0:1], xi[:, 1:2]
    cx, cy = CORNERS[:, 0], CORNERS[:, 1]
    val = 0.25 * (1 + cx * x) * (1 + cy * y)
    gx = 0.25 * cx * (1 + cy * y)
    gy = 0.25 * cy * (1 + cx * x)
    return val, np.stack([gx, gy], axis=-1)


def edge_points(edge: int, s: np.ndarray) -> np.ndarray:
    """Reference points on local edge `edge` for parameters s in [0, 1].

    Edge e runs from corner e to corner (e + 1) % 4.
    """
    a, b = CORNERS[edge], CORNERS[(edge + 1) % 4]
    s = np.asarray(s, dtype=float)[:, None]
    return (1 - s) * a + s * b
