"""Box geometry, trigonometric potentials and their exact coefficient algebra.

A potential ``q`` on the box ``R = prod [0, a_i]`` is given as a finite cosine
series.  Its even ``2 a_i``-periodic extension ``Q`` is stored through
exponential coefficients ``a_m`` with ``Q(x) = sum_m a_m exp(i pi m.x / a)``,
one representative per orbit ``{m, -m}``.
"""
from __future__ import annotations

import hashlib
import itertools
import json
import math
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property, reduce
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

DROP_RTOL = 1e-15

Index = tuple[int, ...]


class BC(str, Enum):
    """Boundary condition on one face."""

    D = "D"
    N = "N"

    @classmethod
    def parse(cls, value: "BC | str") -> "BC":
        if isinstance(value, BC):
            return value
        key = str(value).strip().lower()
        if key in ("d", "dirichlet"):
            return cls.D
        if key in ("n", "neumann"):
            return cls.N
        raise ValueError(f"unknown boundary condition {value!r}")

    @property
    def sign(self) -> int:
        """Image sign: -1 for Dirichlet, +1 for Neumann."""
        return -1 if self is BC.D else 1


def _parse_bc_pair(pair) -> tuple[BC, BC]:
    if isinstance(pair, str):
        if len(pair) != 2:
            raise ValueError(f"boundary pair {pair!r} must have two letters")
        pair = (pair[0], pair[1])
    if len(pair) != 2:
        raise ValueError(f"boundary pair {pair!r} must have two entries")
    return (BC.parse(pair[0]), BC.parse(pair[1]))


@dataclass(frozen=True)
class BoxProblem:
    """Box ``prod [0, a_i]`` with a boundary condition on each face.

    Parameters
    ----------
    sides : sequence of float
        Positive side lengths ``a_i``.
    bc : sequence of pairs
        ``(alpha_i, beta_i)``: conditions at ``x_i = 0`` and ``x_i = a_i``.
        Defaults to all-Dirichlet.
    """

    sides: tuple[float, ...]
    bc: tuple[tuple[BC, BC], ...] = ()

    def __post_init__(self):
        sides = tuple(float(a) for a in self.sides)
        if len(sides) not in (1, 2, 3):
            raise ValueError(f"dimension must be 1, 2 or 3, got {len(sides)}")
        if not all(math.isfinite(a) and a > 0 for a in sides):
            raise ValueError(f"sides must be positive and finite, got {sides}")
        bc = self.bc or tuple((BC.D, BC.D) for _ in sides)
        bc = tuple(_parse_bc_pair(p) for p in bc)
        if len(bc) != len(sides):
            raise ValueError("need one boundary pair per dimension")
        object.__setattr__(self, "sides", sides)
        object.__setattr__(self, "bc", bc)

    @property
    def n(self) -> int:
        return len(self.sides)

    @property
    def volume(self) -> float:
        return float(np.prod(self.sides))

    @property
    def doubled_volume(self) -> float:
        """Volume of the doubled cell ``R0 = prod [-a_i, a_i]``."""
        return float(2 ** self.n * self.volume)

    def lattice_vector(self, k: Sequence[int]) -> np.ndarray:
        """Lattice vector ``d = (2 k_i a_i)``."""
        return np.array([2 * ki * a for ki, a in zip(k, self.sides)], dtype=float)

    def bc_label(self, i: int) -> str:
        return self.bc[i][0].value + self.bc[i][1].value


def canonical(m: Index) -> Index:
    """Representative of ``{m, -m}`` whose first nonzero entry is positive."""
    for v in m:
        if v > 0:
            return m
        if v < 0:
            return tuple(-x for x in m)
    return m


def _clean(coeffs: Mapping[Index, float]) -> dict[Index, float]:
    if not coeffs:
        return {}
    scale = max(abs(v) for v in coeffs.values())
    tol = DROP_RTOL * scale
    return {m: float(v) for m, v in coeffs.items() if abs(v) > tol}


@dataclass(frozen=True)
class CosineSpec:
    """Cosine series ``q(x) = sum_m c_m prod_i cos(pi m_i x_i / a_i)`` on the box.

    Indices are componentwise nonnegative.  Also serves as the closed-form
    integration engine for restrictions of ``q`` to faces, edges and vertices.
    """

    sides: tuple[float, ...]
    terms: tuple[tuple[Index, float], ...]

    def __init__(self, sides: Sequence[float], terms: Mapping[Index, float] | Iterable = ()):
        sides = tuple(float(a) for a in sides)
        items = terms.items() if isinstance(terms, Mapping) else terms
        acc: dict[Index, float] = {}
        for m, c in items:
            m = tuple(int(v) for v in m)
            if len(m) != len(sides):
                raise ValueError(f"index {m} has arity {len(m)}, expected {len(sides)}")
            if any(v < 0 for v in m):
                raise ValueError(f"cosine index {m} must be componentwise nonnegative")
            c = float(c)
            if not math.isfinite(c):
                raise ValueError(f"coefficient for {m} is not finite")
            acc[m] = acc.get(m, 0.0) + c
        object.__setattr__(self, "sides", sides)
        object.__setattr__(self, "terms", tuple(sorted(_clean(acc).items())))

    @property
    def n(self) -> int:
        return len(self.sides)

    @cached_property
    def coeffs(self) -> dict[Index, float]:
        return dict(self.terms)

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        xs = x[..., None] if self.n == 1 and (x.ndim == 0 or x.shape[-1] != 1) else x
        out = np.zeros(xs.shape[:-1])
        for m, c in self.terms:
            term = np.full(xs.shape[:-1], c)
            for i, mi in enumerate(m):
                if mi:
                    term = term * np.cos(np.pi * mi * xs[..., i] / self.sides[i])
            out = out + term
        return out

    # closed-form calculus ------------------------------------------------
    def restrict(self, dim: int, at_end: bool) -> "CosineSpec":
        """Restriction to the face ``x_dim = 0`` (or ``a_dim`` when ``at_end``)."""
        acc: dict[Index, float] = {}
        for m, c in self.terms:
            sign = (-1) ** m[dim] if at_end else 1
            key = m[:dim] + m[dim + 1:]
            acc[key] = acc.get(key, 0.0) + sign * c
        return CosineSpec(self.sides[:dim] + self.sides[dim + 1:], acc)

    def d2(self, dim: int) -> "CosineSpec":
        """Second derivative in ``x_dim``."""
        return CosineSpec(
            self.sides,
            {m: -c * (np.pi * m[dim] / self.sides[dim]) ** 2 for m, c in self.terms},
        )

    def integral(self) -> float:
        """Integral over the box (a point value when ``n == 0``)."""
        vol = float(np.prod(self.sides)) if self.sides else 1.0
        return vol * self.coeffs.get((0,) * self.n, 0.0)

    def integral_sq(self) -> float:
        """Integral of ``q**2`` over the box, by orthogonality."""
        vol = float(np.prod(self.sides)) if self.sides else 1.0
        if self.n == 0:
            return sum(c for _, c in self.terms) ** 2
        return vol * sum(c * c * 0.5 ** sum(1 for v in m if v) for m, c in self.terms)

    def sup_bound(self) -> float:
        """Upper bound for ``max |q|``."""
        return float(sum(abs(c) for _, c in self.terms))

    # serialization ------------------------------------------------------
    def to_json(self) -> dict:
        return {"sides": list(self.sides), "terms": [{"m": list(m), "c": c} for m, c in self.terms]}

    @classmethod
    def from_json(cls, doc: Mapping) -> "CosineSpec":
        return cls(doc["sides"], [(t["m"], t["c"]) for t in doc.get("terms", [])])


@dataclass(frozen=True)
class TrigPotential:
    """Real even trigonometric polynomial on the doubled cell.

    ``coeffs`` holds ``(m, a_m)`` for the canonical member of each orbit
    ``{m, -m}``; the value applies to both members.
    """

    sides: tuple[float, ...]
    coeffs: tuple[tuple[Index, float], ...]

    def __init__(self, sides: Sequence[float], coeffs: Mapping[Index, float] | Iterable = ()):
        sides = tuple(float(a) for a in sides)
        items = coeffs.items() if isinstance(coeffs, Mapping) else coeffs
        acc: dict[Index, float] = {}
        for m, v in items:
            m = tuple(int(c) for c in m)
            if len(m) != len(sides):
                raise ValueError(f"index {m} has arity {len(m)}, expected {len(sides)}")
            v = float(v)
            if not math.isfinite(v):
                raise ValueError(f"coefficient for {m} is not finite")
            key = canonical(m)
            if key in acc and acc[key] != v:
                raise ValueError(f"conflicting coefficients for the orbit of {key}")
            acc[key] = v
        object.__setattr__(self, "sides", sides)
        object.__setattr__(self, "coeffs", tuple(sorted(_clean(acc).items())))

    @property
    def n(self) -> int:
        return len(self.sides)

    @cached_property
    def coeff_map(self) -> dict[Index, float]:
        return dict(self.coeffs)

    def full_items(self) -> Iterator[tuple[Index, float]]:
        """Iterate ``(m, a_m)`` over all indices, both orbit members."""
        for m, v in self.coeffs:
            yield m, v
            neg = tuple(-x for x in m)
            if neg != m:
                yield neg, v

    @cached_property
    def digest(self) -> str:
        payload = json.dumps([self.sides, [[list(m), v] for m, v in self.coeffs]])
        return hashlib.sha256(payload.encode()).hexdigest()[:16]

    @property
    def is_coordinatewise_even(self) -> bool:
        cm = self.coeff_map
        for m, v in self.coeffs:
            for i in range(self.n):
                flipped = canonical(m[:i] + (-m[i],) + m[i + 1:])
                if abs(cm.get(flipped, 0.0) - v) > 1e-14 * max(1.0, abs(v)):
                    return False
        return True

    def to_cosine(self) -> CosineSpec:
        """Cosine series on the box; requires coordinatewise evenness."""
        if not self.is_coordinatewise_even:
            raise ValueError("potential is not coordinatewise even")
        terms = {}
        for m, v in self.coeffs:
            absm = tuple(abs(x) for x in m)
            if absm in terms:
                continue
            terms[absm] = v * 2 ** sum(1 for x in m if x)
        return CosineSpec(self.sides, terms)

    def __call__(self, x) -> np.ndarray:
        return evaluate(self, x)


@dataclass(frozen=True)
class DirectionalComponent:
    """Directional profile ``Q_delta(s) = sum_k b_k cos(2 pi k s)``.

    Attributes
    ----------
    direction : tuple of int
        Primitive integer vector ``m_hat``; ``delta = m_hat / (2 a)``.
    series : tuple of (k, b_k)
        Cosine coefficients, ``k >= 1``.
    dual_norm : float
        ``|delta|``.
    """

    direction: Index
    series: tuple[tuple[int, float], ...]
    dual_norm: float

    def __call__(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        return sum((b * np.cos(2 * np.pi * k * s) for k, b in self.series), np.zeros_like(s))

    def delta(self, sides: Sequence[float]) -> np.ndarray:
        return np.array([m / (2 * a) for m, a in zip(self.direction, sides)])

    @property
    def has_no_zero_component(self) -> bool:
        return all(v != 0 for v in self.direction)

    @property
    def nonzero_count(self) -> int:
        return sum(1 for v in self.direction if v != 0)


# ---------------------------------------------------------------------------
# operations


def build_potential(spec: CosineSpec) -> TrigPotential:
    """Even periodic extension of a cosine series as a trig polynomial.

    Each ``c_m prod cos`` splits into ``2**p`` exponentials with weight
    ``c_m 2**-p``, ``p`` the number of nonzero entries of ``m``.
    """
    acc: dict[Index, float] = {}
    for m, c in spec.terms:
        nz = [i for i, v in enumerate(m) if v]
        w = c * 0.5 ** len(nz)
        for signs in itertools.product((1, -1), repeat=len(nz)):
            mm = list(m)
            for i, s in zip(nz, signs):
                mm[i] = s * m[i]
            key = canonical(tuple(mm))
            if key == tuple(mm):
                acc[key] = acc.get(key, 0.0) + w
    return TrigPotential(spec.sides, acc)


def evaluate(P: TrigPotential, x) -> np.ndarray:
    """Evaluate ``Q`` at points ``x`` of shape ``(..., n)`` (or scalars if n=1)."""
    x = np.asarray(x, dtype=float)
    if P.n == 1 and (x.ndim == 0 or x.shape[-1] != 1):
        x = x[..., None]
    if x.shape[-1] != P.n:
        raise ValueError(f"point dimension {x.shape[-1]} does not match potential dimension {P.n}")
    scaled = x / np.asarray(P.sides)
    out = np.zeros(x.shape[:-1])
    for m, v in P.coeffs:
        if not any(m):
            out = out + v
        else:
            out = out + 2 * v * np.cos(np.pi * (scaled @ np.asarray(m, dtype=float)))
    return out


def mean_value(P: TrigPotential) -> float:
    return P.coeff_map.get((0,) * P.n, 0.0)


def subtract_mean(P: TrigPotential) -> TrigPotential:
    return TrigPotential(P.sides, {m: v for m, v in P.coeffs if any(m)})


def _gcd(m: Index) -> int:
    return reduce(math.gcd, (abs(v) for v in m))


def directional_decomposition(P: TrigPotential) -> list[DirectionalComponent]:
    """Split a zero-mean potential into directional profiles.

    Returns one component per primitive direction in the support, ordered by
    direction.  ``sum_c c(delta_c . x)`` reproduces ``Q(x)``.
    """
    if abs(mean_value(P)) > 0.0:
        raise ValueError("potential has nonzero mean; subtract mean first")
    groups: dict[Index, dict[int, float]] = {}
    for m, v in P.coeffs:
        g = _gcd(m)
        mhat = tuple(x // g for x in m)
        series = groups.setdefault(mhat, {})
        series[g] = series.get(g, 0.0) + 2 * v
    out = []
    for mhat in sorted(groups):
        norm = math.sqrt(sum((mi / (2 * a)) ** 2 for mi, a in zip(mhat, P.sides)))
        out.append(DirectionalComponent(mhat, tuple(sorted(groups[mhat].items())), norm))
    return out


def reduce_potential(P: TrigPotential, k: Sequence[int]) -> TrigPotential:
    """Average of ``Q`` along the lattice vector ``d = (2 k_i a_i)``.

    Exact Fourier filter: keeps the modes with ``m . k = 0``.
    """
    k = tuple(int(v) for v in k)
    if len(k) != P.n:
        raise ValueError("lattice vector dimension mismatch")
    if not any(k):
        raise ValueError("lattice vector must be nonzero")
    return TrigPotential(P.sides, {m: v for m, v in P.coeffs if sum(a * b for a, b in zip(m, k)) == 0})


def reflect_potential(P: TrigPotential) -> TrigPotential:
    """Potential of ``q(a - x)``: ``c_m -> (-1)**sum(m) c_m``."""
    if not P.is_coordinatewise_even:
        raise ValueError("reflection needs a coordinatewise even potential")
    return TrigPotential(P.sides, {m: v * (-1) ** (sum(m) % 2) for m, v in P.coeffs})


def shift_potential(P: TrigPotential, gamma: float) -> TrigPotential:
    """``Q + gamma``."""
    cm = dict(P.coeff_map)
    zero = (0,) * P.n
    cm[zero] = cm.get(zero, 0.0) + gamma
    return TrigPotential(P.sides, cm)


def scale_potential(P: TrigPotential, factor: float) -> TrigPotential:
    return TrigPotential(P.sides, {m: factor * v for m, v in P.coeffs})


def add_potentials(P: TrigPotential, Q: TrigPotential) -> TrigPotential:
    if P.sides != Q.sides:
        raise ValueError("potentials live on different boxes")
    cm = dict(P.coeff_map)
    for m, v in Q.coeffs:
        cm[m] = cm.get(m, 0.0) + v
    return TrigPotential(P.sides, cm)


def coordinate_series(P: TrigPotential, dim: int) -> CosineSpec:
    """1D cosine series of the modes of ``Q`` supported on axis ``dim``."""
    terms = {}
    for m, v in P.coeffs:
        if all(x == 0 for i, x in enumerate(m) if i != dim) and m[dim] != 0:
            terms[(abs(m[dim]),)] = 2 * v
    return CosineSpec((P.sides[dim],), terms)


@dataclass(frozen=True)
class IrrationalityReport:
    sides: tuple[float, ...]
    bound: int
    relation: Index | None
    residual: float | None

    @property
    def found(self) -> bool:
        return self.relation is not None

    def summary(self) -> str:
        if self.relation is None:
            return f"no relation up to bound {self.bound}"
        terms = " + ".join(f"({p})*a{i + 1}^2" for i, p in enumerate(self.relation))
        return f"relation {terms} = 0 (residual {self.residual:.3e})"


def irrationality_scan(box: BoxProblem, bound: int = 1000) -> IrrationalityReport:
    """Search integer relations ``sum p_i a_i**2 = 0`` with ``|p_i| <= bound``.

    The last coefficient is solved for and rounded, so the cost is
    ``(2 bound + 1)**(n - 1)``.  The relation with smallest max-norm is reported.
    """
    if bound < 1:
        raise ValueError("bound must be >= 1")
    sq = np.array([a * a for a in box.sides])
    n = len(sq)
    if n == 1:
        return IrrationalityReport(box.sides, bound, None, None)
    rng = np.arange(-bound, bound + 1)
    grids = np.meshgrid(*([rng] * (n - 1)), indexing="ij")
    head = np.stack([g.ravel() for g in grids], axis=1)
    partial = head @ sq[:-1]
    last = np.rint(-partial / sq[-1])
    P = np.concatenate([head, last[:, None]], axis=1)
    ok = (np.abs(last) <= bound) & np.any(P != 0, axis=1)
    resid = np.abs(P @ sq)
    scale = np.max(np.abs(P) * sq, axis=1)
    hit = ok & (resid <= 1e-12 * np.maximum(scale, 1e-300))
    if not np.any(hit):
        return IrrationalityReport(box.sides, bound, None, None)
    idx = np.flatnonzero(hit)
    norms = np.max(np.abs(P[idx]), axis=1)
    best = idx[np.lexsort((np.arange(len(idx)), norms))[0]]
    rel = canonical(tuple(int(v) for v in P[best]))
    return IrrationalityReport(box.sides, bound, rel, float(resid[best]))


def potential_from_json(doc: Mapping) -> TrigPotential:
    return build_potential(CosineSpec.from_json(doc))
