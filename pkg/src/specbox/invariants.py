"""Spectral-invariant bundles and their comparison.

A bundle collects quantities that agree for isospectral potentials on a box:
the integral of ``q``, periodic spectra of the directional profiles, 1D
spectra of the coordinate profiles with the inherited face conditions, the
sums of ``int q_d^2`` over lattice vectors of equal length, and fitted heat
coefficients.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .heat import (ORDERS, AsymptoticFit, fit_expansion, geometric_coefficients, reliable_window,
                   trace_series)
from .model import (BoxProblem, DirectionalComponent, TrigPotential, canonical, coordinate_series,
                    directional_decomposition, mean_value, subtract_mean)
from .spectra1d import directional_spectrum, spectrum_1d
from .spectrand import interval_kind, spectrum_nd

GROUP_RTOL = 1e-12
DEFAULT_HEAT_K = {1: 128, 2: 32, 3: 12}


@dataclass(frozen=True, eq=False)
class InvariantBundle:
    """Invariants of one potential on one box.

    ``directional`` and ``coordinate`` hold the first ``J`` eigenvalues.
    ``guaranteed`` lists the directions whose periodic spectrum is an
    a proven invariant (no zero component in 2D, at least two nonzero
    components in higher dimension); the others are reported for context.
    """

    box: BoxProblem
    mean_integral: float
    directional: dict[tuple[int, ...], np.ndarray]
    coordinate: dict[int, np.ndarray]
    q_d_sums: dict[float, float]
    heat_coeffs: AsymptoticFit | None
    guaranteed: frozenset = frozenset()
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        for name, group in (("directional", self.directional), ("coordinate", self.coordinate)):
            for key, ev in group.items():
                if np.any(np.diff(ev) < 0):
                    raise ValueError(f"{name} spectrum {key} is not ascending")
        if any(v < 0 for v in self.q_d_sums.values()):
            raise ValueError("q_d sums must be nonnegative")

    def to_json(self) -> dict:
        return {
            "sides": list(self.box.sides),
            "bc": [self.box.bc_label(i) for i in range(self.box.n)],
            "mean_integral": self.mean_integral,
            "directional": [{"direction": list(k), "guaranteed": k in self.guaranteed,
                             "eigenvalues": v.tolist()} for k, v in sorted(self.directional.items())],
            "coordinate": [{"dim": i, "eigenvalues": v.tolist()} for i, v in sorted(self.coordinate.items())],
            "q_d_sums": [{"r2": r, "sum": s} for r, s in sorted(self.q_d_sums.items())],
            "heat_coeffs": None if self.heat_coeffs is None else
            {repr(e): self.heat_coeffs.fitted[e] for e in self.heat_coeffs.exponents},
            "params": dict(self.params),
        }


def _is_guaranteed(direction) -> bool:
    nz = sum(1 for v in direction if v)
    return nz == len(direction) if len(direction) == 2 else nz > 1


def lattice_radii(box: BoxProblem, count: int = 8) -> list[tuple[float, list[tuple[int, ...]]]]:
    """Smallest ``count`` values of ``|d|^2`` over lattice vectors with no zero component.

    ``d = (2 k_i a_i)``; ``d`` and ``-d`` are listed once (canonical half).
    Values within ``GROUP_RTOL`` relative are one radius.  The enumeration
    grows until every returned radius is complete.
    """
    sq = np.array([4 * a * a for a in box.sides])
    kmax = 2
    while True:
        rng = [v for v in range(-kmax, kmax + 1) if v]
        vecs = {canonical(k) for k in itertools.product(rng, repeat=box.n)}
        items = sorted((float(np.dot(np.square(k), sq)), k) for k in vecs)
        groups: list[tuple[float, list]] = []
        for r2, k in items:
            if groups and abs(r2 - groups[-1][0]) <= GROUP_RTOL * r2:
                groups[-1][1].append(k)
            else:
                groups.append((r2, [k]))
        # any vector outside the cube has some |k_i| > kmax
        complete = float((kmax + 1) ** 2 * sq.min() + (sq.sum() - sq.min()))
        done = [g for g in groups if g[0] < complete * (1 - GROUP_RTOL)]
        if len(done) >= count:
            return done[:count]
        kmax *= 2


def q_d_integral(P: TrigPotential, k) -> float:
    """``int_{R0} q_d^2`` by Parseval over the modes with ``m . k = 0``."""
    k = np.asarray(k)
    s = sum(v * v for m, v in P.full_items() if int(np.dot(m, k)) == 0 and any(m))
    return float(np.prod([2 * a for a in P.sides]) * s)


def q_d_sums(P: TrigPotential, box: BoxProblem, count: int = 8) -> dict[float, float]:
    """Sums of ``int q_d^2`` grouped by ``|d|^2`` for the zero-mean part of ``P``."""
    P0 = subtract_mean(P)
    return {r2: sum(q_d_integral(P0, k) for k in ks) for r2, ks in lattice_radii(box, count)}


def heat_fit(P: TrigPotential, box: BoxProblem, K: int | None = None) -> AsymptoticFit:
    """Fit of the coefficients of ``t**e``, ``0 <= e <= 1``, with the free box removed."""
    K = K or DEFAULT_HEAT_K[box.n]
    if box.n == 1:
        spec = spectrum_1d(P, interval_kind(box.bc[0]), box.sides[0], K, vectors=False)
    else:
        spec = spectrum_nd(P, box, K)
    known = geometric_coefficients(box)
    series = reliable_window(lambda g: trace_series(spec, g), known)
    return fit_expansion(series, [e for e in ORDERS[box.n] if 0 <= e <= 1], known)


def bundle(P: TrigPotential, box: BoxProblem, J: int = 20, K_dir: int = 64, K_coord: int = 128,
           radii: int = 8, heat: bool = True, K_heat: int | None = None) -> InvariantBundle:
    """Compute the invariant bundle of ``P`` on ``box``.

    Parameters
    ----------
    P : TrigPotential
        Coordinatewise even potential on ``box.sides``.
    box : BoxProblem
    J : int
        Eigenvalues kept per 1D spectrum.
    K_dir, K_coord : int
        Basis sizes for directional (doubled cell) and coordinate (interval)
        solves; ``J`` must lie in the trusted range of each.
    radii : int
        Number of lattice radii for the ``q_d`` sums.
    heat : bool
        Whether to fit heat coefficients (the costly part).
    """
    if P.sides != box.sides:
        raise ValueError("potential and box have different sides")
    if not P.is_coordinatewise_even:
        raise ValueError("bundle needs a coordinatewise even potential")
    if J > (2 * K_dir + 1) // 4 or J > K_coord // 4:
        raise ValueError("J exceeds the trusted range of the 1D solves")
    P0 = subtract_mean(P)
    directional = {}
    guaranteed = set()
    for comp in directional_decomposition(P0):
        directional[comp.direction] = directional_spectrum(comp, K_dir).eigenvalues[:J]
        if _is_guaranteed(comp.direction):
            guaranteed.add(comp.direction)
    coordinate = {}
    for i in range(box.n):
        q = coordinate_series(P0, i)
        coordinate[i] = spectrum_1d(q, interval_kind(box.bc[i]), box.sides[i], K_coord, vectors=False).eigenvalues[:J]
    params = {"J": J, "K_dir": K_dir, "K_coord": K_coord, "radii": radii,
              "K_heat": (K_heat or DEFAULT_HEAT_K[box.n]) if heat else None}
    return InvariantBundle(
        box=box,
        mean_integral=box.volume * mean_value(P),
        directional=directional,
        coordinate=coordinate,
        q_d_sums=q_d_sums(P, box, radii),
        heat_coeffs=heat_fit(P, box, K_heat) if heat else None,
        guaranteed=frozenset(guaranteed),
        params=params,
    )


# ---------------------------------------------------------------------------
# comparison


@dataclass(frozen=True)
class ComponentResult:
    name: str
    deviation: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.deviation <= self.tolerance

    @property
    def separation(self) -> float:
        """Deviation in units of the tolerance."""
        return self.deviation / self.tolerance


@dataclass(frozen=True)
class CompareReport:
    components: tuple[ComponentResult, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.components)

    @property
    def verdict(self) -> str:
        if self.passed:
            return "consistent with isospectrality"
        worst = max(self.components, key=lambda c: c.separation)
        return f"separated by invariant {worst.name}"

    def to_json(self) -> dict:
        return {"verdict": self.verdict, "passed": self.passed,
                "components": [{"name": c.name, "deviation": c.deviation, "tolerance": c.tolerance,
                                "passed": c.passed} for c in self.components]}


def _free_directional(direction, sides, J: int, K: int) -> np.ndarray:
    norm = math.sqrt(sum((m / (2 * a)) ** 2 for m, a in zip(direction, sides)))
    return directional_spectrum(DirectionalComponent(tuple(direction), (), norm), K).eigenvalues[:J]


def _spec_dev(a: np.ndarray, b: np.ndarray) -> float:
    if len(a) != len(b):
        return math.inf
    return float(np.max(np.abs(a - b) / np.maximum(1.0, np.abs(b)))) if len(a) else 0.0


def compare(A: InvariantBundle, B: InvariantBundle, spectra_tol: float = 1e-8, integral_tol: float = 1e-10,
            heat_tol: float = 1e-6) -> CompareReport:
    """Componentwise comparison of two bundles.

    Spectra are compared relative to ``max(1, |lambda|)``; missing
    directional components are the free periodic spectrum.
    """
    if A.box != B.box or A.params != B.params:
        raise ValueError("bundles were computed for different boxes or parameters")
    J, K = A.params["J"], A.params["K_dir"]
    out = [ComponentResult("mean_integral", abs(A.mean_integral - B.mean_integral), integral_tol)]
    for d in sorted(set(A.directional) | set(B.directional)):
        ea = A.directional.get(d)
        eb = B.directional.get(d)
        ea = _free_directional(d, A.box.sides, J, K) if ea is None else ea
        eb = _free_directional(d, B.box.sides, J, K) if eb is None else eb
        out.append(ComponentResult(f"directional{list(d)}", _spec_dev(ea, eb), spectra_tol))
    for i in sorted(A.coordinate):
        out.append(ComponentResult(f"coordinate[{i}]", _spec_dev(A.coordinate[i], B.coordinate[i]), spectra_tol))
    for r2 in sorted(set(A.q_d_sums) | set(B.q_d_sums)):
        dev = abs(A.q_d_sums.get(r2, 0.0) - B.q_d_sums.get(r2, 0.0))
        out.append(ComponentResult(f"q_d_sum[r2={r2:.12g}]", dev, integral_tol))
    if A.heat_coeffs is not None and B.heat_coeffs is not None:
        for e in A.heat_coeffs.exponents:
            fa, fb = A.heat_coeffs.fitted[e], B.heat_coeffs.fitted[e]
            out.append(ComponentResult(f"heat[t^{e:g}]", abs(fa - fb) / max(1.0, abs(fb)), heat_tol))
    return CompareReport(tuple(out))


@dataclass(frozen=True)
class SeparabilityReport:
    consistent: bool
    separating_radius: float | None
    values: dict[float, float]
    tolerance: float

    @property
    def verdict(self) -> str:
        if self.consistent:
            return "consistent with separable"
        return f"separated at r2={self.separating_radius:.12g}"


def separability_diagnosis(b: InvariantBundle, tol: float = 1e-12, min_radii: int = 5) -> SeparabilityReport:
    """Separable potentials have every ``q_d`` sum equal to zero."""
    if len(b.q_d_sums) < min_radii:
        raise ValueError(f"need q_d sums for at least {min_radii} radii")
    bad = [r for r, v in sorted(b.q_d_sums.items()) if v > tol]
    return SeparabilityReport(not bad, bad[0] if bad else None, dict(b.q_d_sums), tol)
