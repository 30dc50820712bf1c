"""Hadamard parametrix coefficients ``a_nu(x, y)``.

Closed forms for ``a_1`` and ``a_2`` in any dimension, the solved transport
recursion

    a_nu(x, y) = int_0^1 s^(nu-1) [Delta_x a_{nu-1} - Q a_{nu-1}](y + s(x - y), y) ds

in one dimension, and a numerical check that ``x -> a_nu(c + b x, c + x)`` has
no odd Taylor terms at ``x = 0``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import mpmath
import numpy as np

from .model import TrigPotential, evaluate


@lru_cache(maxsize=64)
def _gauss(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on ``[0, 1]``."""
    x, w = np.polynomial.legendre.leggauss(order)
    return 0.5 * (x + 1.0), 0.5 * w


def laplacian(P: TrigPotential) -> TrigPotential:
    """Exact ``Delta Q`` by termwise differentiation."""
    return TrigPotential(P.sides, {
        m: -v * np.pi ** 2 * sum((mi / a) ** 2 for mi, a in zip(m, P.sides)) for m, v in P.coeffs
    })


def _points(P: TrigPotential, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if P.n == 1:
        return x.reshape(1)
    if x.shape != (P.n,):
        raise ValueError(f"expected a point of dimension {P.n}")
    return x


def _order(P: TrigPotential, x: np.ndarray, y: np.ndarray, per_wave: int = 32) -> int:
    """Quadrature order: ``per_wave`` nodes per wavelength along the segment."""
    d = (x - y) / np.asarray(P.sides)
    waves = max((abs(float(np.dot(m, d))) / 2 for m, _ in P.coeffs), default=0.0)
    return per_wave * max(1, int(math.ceil(waves)))


def _segment_integral(P: TrigPotential, x, y, weight=lambda s: 1.0) -> float:
    x, y = _points(P, x), _points(P, y)
    s, w = _gauss(_order(P, x, y))
    pts = y[None, :] + s[:, None] * (x - y)[None, :]
    return float(np.sum(w * weight(s) * evaluate(P, pts)))


def a1(P: TrigPotential, x, y) -> float:
    """``a_1 = -int_0^1 Q(y + s(x - y)) ds``."""
    return -_segment_integral(P, x, y)


def a2(P: TrigPotential, x, y) -> float:
    """``a_2 = -int s(1-s) Delta Q + (1/2) (int Q)^2`` along the segment."""
    lap = laplacian(P)
    first = _segment_integral(lap, x, y, lambda s: s * (1 - s))
    mean = _segment_integral(P, x, y)
    return -first + 0.5 * mean * mean


class RefinementError(RuntimeError):
    """Series truncation did not converge."""


def _shift_taylor(P: TrigPotential, y: float, S: float, deg: int, bits: int) -> list[int]:
    """Fixed-point (``2**-bits``) Taylor coefficients of ``u -> Q(y + S u)``."""
    w_max = max((abs(m[0]) * math.pi / P.sides[0] for m, _ in P.coeffs), default=0.0)
    dps = int(bits * 0.302) + int(w_max * S / 2.3) + 20
    with mpmath.workdps(dps):
        q = [mpmath.mpf(0)] * (deg + 1)
        a = mpmath.mpf(P.sides[0])
        for (m,), v in P.coeffs:
            if m == 0:
                q[0] += v
                continue
            w = mpmath.pi * m / a
            phase = w * mpmath.mpf(y)
            term = 2 * mpmath.mpf(v)
            step = w * mpmath.mpf(S)
            for i in range(deg + 1):
                q[i] += term * mpmath.cos(phase + i * mpmath.pi / 2)
                term = term * step / (i + 1)
        return [int(mpmath.nint(c * mpmath.mpf(2) ** bits)) for c in q]


def _recursion_taylor(P: TrigPotential, nu: int, y: float, S: float, deg: int) -> tuple[list[int], int]:
    """Fixed-point Taylor coefficients in ``u = (x - y) / S`` of ``a_nu(y + S u, y)``.

    With ``a_{k-1} = sum c_j u^j`` the solved recursion gives
    ``c'_j = ((j+2)(j+1) c_{j+2} / S**2 - (q * c)_j) / (k + j)``.
    Exact integer arithmetic carries the cancellation between large terms;
    the fraction bits cover the growth of the second-derivative factors.
    """
    top = deg + 2 * nu
    bits = 96 + 2 * nu * (top + 2).bit_length()
    one = 1 << bits
    q = _shift_taylor(P, y, S, top, bits)
    inv_s2 = int(mpmath.nint(mpmath.mpf(2) ** bits / mpmath.mpf(S) ** 2))
    c = [one] + [0] * top
    for k in range(1, nu + 1):
        nxt = []
        for j in range(top + 1):
            lap = ((j + 2) * (j + 1) * c[j + 2] * inv_s2) >> bits if j + 2 <= top else 0
            conv = sum(q[i] * c[j - i] for i in range(j + 1)) >> bits
            nxt.append((lap - conv) // (k + j))
        c = nxt
    return c[: deg + 1], bits


def a_nu_1d(P: TrigPotential, nu: int, x: float, y: float, tol: float = 1e-12, deg0: int = 32,
            deg_max: int = 2048) -> float:
    """Transport recursion in one dimension.

    ``a_nu(., y)`` is carried as its Taylor series in ``r = x - y``: the
    second derivative acts exactly on coefficients and the segment integral
    ``int_0^1 s^(nu-1) (s r)^j ds`` is ``r^j / (nu + j)``.  Coefficients are
    exact-rounded fixed-point integers, so the alternating sum loses nothing
    to cancellation.  The truncation degree is doubled until two successive
    values agree within ``tol`` (relative to ``max(1, |a|)``); the finer value
    is returned.
    """
    if P.n != 1:
        raise ValueError("recursion implemented for n = 1")
    if nu < 0:
        raise ValueError("nu must be nonnegative")
    if nu == 0:
        return 1.0
    x, y = float(x), float(y)
    r = x - y
    S = max(abs(r), 1.0)
    sign = -1 if r < 0 else 1
    # |u| = |r| / S, exactly 1 when |r| >= 1
    u = mpmath.mpf(abs(r)) / S
    prev = None
    deg = deg0
    while deg <= deg_max:
        c, bits = _recursion_taylor(P, nu, y, S, deg)
        with mpmath.workdps(int(bits * 0.302) + 20):
            acc = mpmath.mpf(0)
            for j in range(len(c) - 1, -1, -1):
                acc = acc * u * sign + c[j]
            val = float(acc / mpmath.mpf(2) ** bits)
        if prev is not None and abs(val - prev) <= tol * max(1.0, abs(val)):
            return val
        prev = val
        deg *= 2
    raise RefinementError(f"a_{nu} did not converge up to degree {deg_max}")


@dataclass(frozen=True)
class EvenMaclaurinReport:
    nu: int
    base: float
    b: float
    odd_derivatives: dict[int, float]
    even_derivatives: dict[int, float]
    tolerance: float

    @property
    def max_odd(self) -> float:
        return max(abs(v) for v in self.odd_derivatives.values())

    @property
    def passed(self) -> bool:
        return self.max_odd <= self.tolerance


def _taylor_odd_even(f, h: float, terms: int = 4) -> tuple[np.ndarray, np.ndarray]:
    """Odd and even Taylor coefficients from samples at ``+-j h``."""
    xs = h * np.arange(1, terms + 1)
    fp = np.array([f(x) for x in xs])
    fm = np.array([f(-x) for x in xs])
    f0 = f(0.0)
    odd = 0.5 * (fp - fm)
    even = 0.5 * (fp + fm) - f0
    Vo = xs[:, None] ** (2 * np.arange(terms) + 1)[None, :]
    Ve = xs[:, None] ** (2 * np.arange(1, terms + 1))[None, :]
    return np.linalg.solve(Vo, odd), np.concatenate([[f0], np.linalg.solve(Ve, even)])


def even_maclaurin_check(P: TrigPotential, nu: int, base: float, b: float = -1.0, h: float = 0.25,
                         tolerance: float = 1e-6) -> EvenMaclaurinReport:
    """Odd derivatives (orders 1, 3, 5) of ``x -> a_nu(c + b x, c + x)`` at 0.

    Symmetric samples at ``+-h, ..., +-4h`` give a high-order central
    difference; the step is halved and the two estimates are combined by
    Richardson extrapolation (error order ``h**8``).
    """
    if P.n != 1:
        raise ValueError("check implemented for n = 1")

    def f(x):
        return a_nu_1d(P, nu, base + b * x, base + x)

    o1, e1 = _taylor_odd_even(f, h)
    o2, e2 = _taylor_odd_even(f, h / 2)
    o = o2 + (o2 - o1) / (2 ** 8 - 1)
    e = e2 + (e2 - e1) / (2 ** 8 - 1)
    odd = {2 * k + 1: float(o[k] * math.factorial(2 * k + 1)) for k in range(3)}
    even = {2 * k: float(e[k] * math.factorial(2 * k)) for k in range(3)}
    return EvenMaclaurinReport(nu, base, b, odd, even, tolerance)


@dataclass(frozen=True)
class HadamardTable:
    """Coefficients ``a_nu`` up to ``nu_max`` with normalization metadata.

    ``e_nu`` carries the exponent ``nu + (1 - n)/2`` and prefactor
    ``2**(-2 nu - 1) pi**((1 - n)/2)``; no distribution arithmetic is done.
    """

    P: TrigPotential
    nu_max: int = 4
    quadrature_per_wave: int = 32
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.quadrature_per_wave < 16:
            raise ValueError("quadrature order must be at least 16")
        n = self.P.n
        meta = {nu: {"exponent": nu + (1 - n) / 2, "prefactor": 2.0 ** (-2 * nu - 1) * math.pi ** ((1 - n) / 2)}
                for nu in range(self.nu_max + 1)}
        object.__setattr__(self, "metadata", meta)

    def __call__(self, nu: int, x, y) -> float:
        if nu > self.nu_max:
            raise ValueError(f"nu {nu} exceeds nu_max {self.nu_max}")
        if nu == 0:
            return 1.0
        if self.P.n == 1:
            return a_nu_1d(self.P, nu, float(np.ravel(x)[0]), float(np.ravel(y)[0]))
        if nu == 1:
            return a1(self.P, x, y)
        if nu == 2:
            return a2(self.P, x, y)
        raise ValueError("only a_1 and a_2 are available for n >= 2")

    def to_csv(self, xs: Sequence, ys: Sequence) -> str:
        rows = ["nu,x,y,value"]
        for nu in range(self.nu_max + 1 if self.P.n == 1 else 3):
            for x in xs:
                for y in ys:
                    rows.append(f"{nu},{x!r},{y!r},{self(nu, x, y)!r}")
        return "\n".join(rows) + "\n"
