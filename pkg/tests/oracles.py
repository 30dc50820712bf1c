"""Independent reference computations used by the tests.

Nothing here calls the routine it is meant to check.
"""
from __future__ import annotations

import math
from itertools import product

import numpy as np
from scipy import integrate, special


def gauss_galerkin_1d(kind: str, a: float, K: int, q, nodes: int = 2048) -> np.ndarray:
    """Galerkin matrix of ``-d2 + q`` on ``[0, a]`` by Gauss-Legendre quadrature."""
    x, w = np.polynomial.legendre.leggauss(nodes)
    x = 0.5 * a * (x + 1)
    w = 0.5 * a * w
    j = np.arange(K)
    if kind == "DD":
        p = j + 1.0
        phi = np.sqrt(2 / a) * np.sin(np.pi * np.outer(x, p) / a)
    elif kind == "NN":
        p = j.astype(float)
        phi = np.sqrt(2 / a) * np.cos(np.pi * np.outer(x, p) / a)
        phi[:, 0] = np.sqrt(1 / a)
    elif kind == "DN":
        p = j + 0.5
        phi = np.sqrt(2 / a) * np.sin(np.pi * np.outer(x, p) / a)
    elif kind == "ND":
        p = j + 0.5
        phi = np.sqrt(2 / a) * np.cos(np.pi * np.outer(x, p) / a)
    else:
        raise ValueError(kind)
    V = (phi * (w * q(x))[:, None]).T @ phi
    return np.diag((np.pi * p / a) ** 2) + V


def free_interval_levels(kind: str, a: float, count: int) -> np.ndarray:
    p = {"DD": np.arange(1, count + 1), "NN": np.arange(count), "DN": np.arange(count) + 0.5,
         "ND": np.arange(count) + 0.5}[kind]
    return (np.pi * p / a) ** 2


def dirichlet_theta_poisson(a: float, t: float, terms: int = 50) -> float:
    """``sum_{k>=1} exp(-pi^2 k^2 t / a^2)`` by Poisson summation."""
    n = np.arange(1, terms + 1)
    full = a / math.sqrt(math.pi * t) * (0.5 + float(np.sum(np.exp(-(n * a) ** 2 / t))))
    return full - 0.5


def free_kernel_images(kind: str, a: float, t: float, x, y, terms: int = 20) -> np.ndarray:
    """Free interval kernel by the method of images with Gaussians."""
    x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
    g = lambda z: np.exp(-z * z / (4 * t)) / math.sqrt(4 * math.pi * t)
    out = np.zeros(x.shape)
    s0 = -1.0 if kind[0] == "D" else 1.0
    s1 = -1.0 if kind[1] == "D" else 1.0
    # group generated by reflections at 0 and a
    for n in range(-terms, terms + 1):
        w = (s0 * s1) ** abs(n)
        out += w * g(x - y + 2 * n * a)
        out += w * s0 * g(x + y + 2 * n * a)
    return out


def mathieu_period_pi(q: float, count: int) -> np.ndarray:
    """Eigenvalues of ``-y'' + 2 q cos(2x) y`` with period ``pi`` (scipy's Mathieu values)."""
    a = [special.mathieu_a(2 * r, q) for r in range(count)]
    b = [special.mathieu_b(2 * r + 2, q) for r in range(count)]
    return np.sort(np.array(a + b))[:count]


def product_expansion(parts, max_order: float) -> dict:
    """Plain nested-loop product of ``{e: c}`` expansions."""
    out = {}
    for combo in product(*[list(p.items()) for p in parts]):
        e = sum(c[0] for c in combo)
        if e <= max_order + 1e-12:
            out[e] = out.get(e, 0.0) + math.prod(c[1] for c in combo)
    return out


def coefficients_1d_dirichlet(a: float, terms: dict) -> dict:
    """Small-t coefficients of the 1D Dirichlet trace for ``q = sum c_m cos(pi m x / a)``."""
    sp = math.sqrt(math.pi)
    c0 = terms.get(0, 0.0)
    intq = a * c0
    intq2 = a * (c0 * c0 + sum(c * c / 2 for m, c in terms.items() if m))
    ends = [sum(terms.values()), sum(c * (-1) ** m for m, c in terms.items())]
    dd = [-sum(c * (math.pi * m / a) ** 2 for m, c in terms.items()),
          -sum(c * (math.pi * m / a) ** 2 * (-1) ** m for m, c in terms.items())]
    return {-0.5: a / (2 * sp), 0.0: -0.5, 0.5: -intq / (2 * sp), 1.0: sum(ends) / 4,
            1.5: intq2 / (4 * sp), 2.0: -sum(v * v / 8 - w / 16 for v, w in zip(ends, dd))}


def segment_integral(f, x: float, y: float, weight=lambda s: 1.0) -> float:
    val, _ = integrate.quad(lambda s: weight(s) * f(y + s * (x - y)), 0.0, 1.0, epsabs=1e-14, epsrel=1e-14, limit=200)
    return val


def grid_integral_sq(f, sides, nodes: int = 64) -> float:
    """``int_{R0} f^2`` by the periodic trapezoid rule on the doubled cell."""
    axes = [np.linspace(-a, a, nodes, endpoint=False) for a in sides]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    w = np.prod([2 * a / nodes for a in sides])
    return float(w * np.sum(f(grid) ** 2))


def hadamard_taylor_mp(P, nu, x, y, dps=80, deg=200):
    """Brute-force a_nu(x, y) in 1D: Taylor recursion in r = x - y, all in mpf."""
    import mpmath

    with mpmath.workdps(dps):
        a = mpmath.mpf(P.sides[0])
        y = mpmath.mpf(y)
        top = deg + 2 * nu
        q = [mpmath.mpf(0)] * (top + 1)
        for (m,), v in P.coeffs:
            if m == 0:
                q[0] += v
                continue
            w = mpmath.pi * m / a
            for i in range(top + 1):
                # i-th derivative of cos(w z) is w^i cos(w z + i pi / 2)
                q[i] += 2 * v * w ** i * mpmath.cos(w * y + i * mpmath.pi / 2) / mpmath.factorial(i)
        c = [mpmath.mpf(1)] + [mpmath.mpf(0)] * top
        for k in range(1, nu + 1):
            c = [(((j + 2) * (j + 1) * c[j + 2] if j + 2 <= top else 0)
                  - mpmath.fsum(q[i] * c[j - i] for i in range(j + 1))) / (k + j) for j in range(top + 1)]
        return float(mpmath.polyval(c[: deg + 1][::-1], mpmath.mpf(x) - y))
