"""Reflection and trace identities checked on heat kernels.

Each check builds both sides from independent eigensolves (interval basis on
the box, exponential basis on the doubled cell) and reports the largest
residual over a deterministic sample of points and times.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from itertools import product
from typing import Callable, Sequence

import numpy as np
from scipy.stats import qmc

from .model import BC, BoxProblem, CosineSpec, TrigPotential, build_potential, reduce_potential
from .spectra1d import Basis1D, Spectrum1D, free_tail_1d, kernel_1d, spectrum_1d
from .spectrand import SpectrumND, kernel_nd, kernel_tail_nd, spectrum_nd, torus_kind

DEFAULT_T = (0.05, 0.1, 0.2)
TAIL_TOL = 1e-9


class TailTooLarge(ValueError):
    """Truncated eigen-sums are not accurate enough at the requested time."""


@dataclass(frozen=True)
class IdentityReport:
    """Residual of one identity over a sample set."""

    name: str
    samples: str
    residual: float
    tolerance: float
    provenance: tuple[str, str] = ("", "")
    per_t: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.residual >= 0:
            raise ValueError("residual must be nonnegative")

    @property
    def passed(self) -> bool:
        return self.residual <= self.tolerance

    def to_json(self) -> dict:
        doc = asdict(self)
        doc["provenance"] = list(self.provenance)
        doc["per_t"] = {repr(k): v for k, v in self.per_t.items()}
        doc["passed"] = self.passed
        return doc


@dataclass(frozen=True)
class RefinementReport:
    """Residuals at ``K`` and ``2K``; spectral convergence asks for a 10x drop."""

    name: str
    K: int
    coarse: float
    fine: float
    factor: float = 10.0

    @property
    def ratio(self) -> float:
        return self.coarse / self.fine if self.fine > 0 else math.inf

    @property
    def passed(self) -> bool:
        return self.fine * self.factor <= self.coarse


def halton_points(lo: Sequence[float], hi: Sequence[float], count: int = 25, seed: int = 0) -> np.ndarray:
    """Scrambled Halton points in the open box ``(lo, hi)``."""
    lo, hi = np.asarray(lo, float), np.asarray(hi, float)
    u = qmc.Halton(len(lo), scramble=True, seed=seed).random(count)
    return qmc.scale(np.clip(u, 1e-12, 1 - 1e-12), lo, hi)


def _times(t_set, length: float) -> tuple[float, ...]:
    t = tuple(float(v) * length ** 2 for v in (t_set if t_set is not None else DEFAULT_T))
    if any(v <= 0 for v in t):
        raise ValueError("times must be positive")
    return t


def _cell(K: int, K_cell: int | None) -> int:
    return max(4, K // 2) if K_cell is None else int(K_cell)


def _as_1d(P) -> TrigPotential:
    if isinstance(P, CosineSpec):
        P = build_potential(P)
    if P.n != 1:
        raise ValueError("need a one-dimensional potential")
    return P


def _check_tail(name: str, tail: float, t: float, check: bool):
    if check and tail > TAIL_TOL:
        raise TailTooLarge(f"{name}: truncation estimate {tail:.2e} at t={t:g} exceeds {TAIL_TOL:g}")


def _free_sums(b: Basis1D, t: float) -> tuple[float, float]:
    """Free trace of the basis levels and of the dropped levels beyond them."""
    c = (math.pi / b.length) ** 2 * t
    kept = float(np.sum(np.exp(-c * b.freq ** 2)))
    p0 = float(np.max(np.abs(b.freq))) + 1.0
    per_level = 1.0 if b.is_interval else 2.0
    p = p0 + np.arange(int(math.ceil(math.sqrt(60.0 / c))) + 2)
    dropped = per_level * float(np.sum(np.exp(-c * p * p)))
    return kept, dropped


def trace_tail(bases: Sequence[Basis1D], t: float, sup: float) -> float:
    """Estimate of the trace carried by modes outside the product basis."""
    kept, full = 1.0, 1.0
    for b in bases:
        k, d = _free_sums(b, t)
        kept *= k
        full *= k + d
    return math.exp(sup * t) * max(full - kept, 0.0)


def _sup(P: TrigPotential) -> float:
    return float(sum(abs(v) for _, v in P.full_items()))


def _trace(spec, t: float) -> float:
    return float(np.sum(np.exp(-spec.eigenvalues * t)))


# ---------------------------------------------------------------------------
# one dimension


def reflection_identity_1d(P, a: float, bc: str, t_set=None, points=None, K: int = 64,
                           tolerance: float = 1e-7, seed: int = 0, check_tail: bool = True,
                           K_cell: int | None = None) -> IdentityReport:
    """Interval kernel against the signed image pair on the doubled cell.

    ``G_DD = G_per(x,y) - G_per(-x,y)``, ``G_NN`` with ``+``; ``DN`` and ``ND``
    use the antiperiodic kernel with ``-`` and ``+``.

    ``K_cell`` is the doubled-cell frequency cutoff (default ``K // 2``).  With
    equal cutoffs the odd or even part of the doubled-cell basis is the
    interval basis itself and both sides share one discrete problem.
    """
    P = _as_1d(P)
    if abs(P.sides[0] - a) > 1e-14 * a:
        raise ValueError("potential and interval length differ")
    bc = bc.upper()
    if bc not in ("DD", "DN", "ND", "NN"):
        raise ValueError(f"unknown boundary pair {bc!r}")
    kind = "Periodic" if bc[0] == bc[1] else "Antiperiodic"
    sign = BC(bc[0]).sign
    box = spectrum_1d(P, bc, a, K)
    tor = spectrum_1d(P, kind, a, _cell(K, K_cell))
    pts = np.asarray(points, float) if points is not None else halton_points((0, 0), (a, a), seed=seed)
    x, y = pts[:, 0], pts[:, 1]
    sup = _sup(P)
    per_t = {}
    for t in _times(t_set, a):
        tail = free_tail_1d(box.basis, t, sup) + 2 * free_tail_1d(tor.basis, t, sup)
        _check_tail("reflection", tail, t, check_tail)
        lhs = kernel_1d(box, t, x, y)
        rhs = kernel_1d(tor, t, x, y) + sign * kernel_1d(tor, t, -x, y)
        per_t[t] = float(np.max(np.abs(lhs - rhs)))
    return IdentityReport(f"reflection_1d[{bc}]", f"{len(x)} point pairs x {len(per_t)} times",
                          max(per_t.values()), tolerance, (box.provenance, tor.provenance), per_t)


def trace_pairing_identity(P, a: float, t_set=None, K: int = 128, tolerance: float = 1e-8,
                           check_tail: bool = True, K_cell: int | None = None) -> IdentityReport:
    """``Tr_DD + Tr_NN = Tr_per`` and ``Tr_DN + Tr_ND = Tr_anti``."""
    P = _as_1d(P)
    Kc = _cell(K, K_cell)
    specs = {k: spectrum_1d(P, k, a, K, vectors=False) for k in ("DD", "NN", "DN", "ND")}
    specs.update({k: spectrum_1d(P, k, a, Kc, vectors=False) for k in ("Periodic", "Antiperiodic")})
    sup = _sup(P)
    per_t = {}
    for t in _times(t_set, a):
        for k, s in specs.items():
            _check_tail("pairing", trace_tail((Basis1D(k, a, Kc if k in ("Periodic", "Antiperiodic") else K),), t, sup),
                        t, check_tail)
        tr = {k: _trace(s, t) for k, s in specs.items()}
        per_t[t] = max(abs(tr["DD"] + tr["NN"] - tr["Periodic"]), abs(tr["DN"] + tr["ND"] - tr["Antiperiodic"]))
    return IdentityReport("trace_pairing", f"{len(per_t)} times", max(per_t.values()), tolerance,
                          (specs["DD"].provenance, specs["Periodic"].provenance), per_t)


def _reversal(b: Basis1D) -> np.ndarray:
    """Index map ``k -> -k`` of a doubled-cell basis (frequencies are symmetric)."""
    return np.arange(b.dim)[::-1]


def diagonal_integrals(spec, perms: Sequence[np.ndarray], t: float) -> float:
    """``int G(t, E x, x) dx`` over the doubled cell, computed in coefficient space.

    For an orthonormal exponential basis ``phi(E x) = sum_k v_k e_{E k}(x)``,
    so each eigenfunction contributes ``sum_k v_k conj(v_{E k})``.
    """
    V = spec.eigenvectors
    idx = np.arange(V.shape[0]).reshape([b.dim for b in spec.bases])
    for axis, perm in enumerate(perms):
        if perm is not None:
            idx = np.take(idx, perm, axis=axis)
    overlap = np.real(np.sum(V * np.conj(V[idx.ravel()]), axis=0))
    return float(np.sum(np.exp(-spec.eigenvalues * t) * overlap))


def telescoped_dirichlet_trace(P, b: float, t_set=None, K: int = 128, tolerance: float = 1e-7,
                               check_tail: bool = True, K_cell: int | None = None) -> IdentityReport:
    """Dirichlet trace on ``[0, b]`` from the periodic kernel on ``[-b, b]``.

    The image sum over ``2nb`` shifts gives the periodic trace; each line
    integral of the whole-line kernel folds onto half of the corresponding
    doubled-cell integral, and the combination equals twice ``Tr_DD``.
    """
    P = _as_1d(P)
    per = spectrum_1d(P, "Periodic", b, _cell(K, K_cell))
    dd = spectrum_1d(P, "DD", b, K, vectors=False)
    rev = [_reversal(per.basis)]
    spec = _as_nd(per)
    half_shift = _half_shift_phase(per.basis)
    sup = _sup(P)
    per_t = {}
    for t in _times(t_set, b):
        tail = trace_tail((per.basis,), t, sup) + trace_tail((dd.basis,), t, sup)
        _check_tail("telescoped", tail, t, check_tail)
        total = _trace(per, t)
        line0 = 0.5 * diagonal_integrals(spec, rev, t)
        line_b = 0.5 * _shifted_integral(spec, rev, half_shift, t)
        per_t[t] = abs(0.5 * (total - line0 - line_b) - _trace(dd, t))
    return IdentityReport("telescoped_dirichlet", f"{len(per_t)} times", max(per_t.values()), tolerance,
                          (per.provenance, dd.provenance), per_t)


def _as_nd(spec: Spectrum1D) -> SpectrumND:
    return SpectrumND(spec.eigenvalues, (spec.basis,), spec.eigenvectors, "torus", spec.provenance,
                      spec.potential_sup, 1.0)


def _half_shift_phase(b: Basis1D) -> np.ndarray:
    """Phases ``exp(i pi k)`` picked up by ``e_k`` under ``x -> x + b``."""
    return np.exp(1j * np.pi * b.freq)


def _shifted_integral(spec: SpectrumND, perms, phase: np.ndarray, t: float) -> float:
    """``int G(t, b - x, b + x) dx``: reflection about ``b`` in coefficient space.

    ``phi(b - x) = sum_k v_k phase_k e_{-k}(x)`` and ``phi(b + x) = sum_k v_k
    phase_k e_k(x)``; the phases enter once from each factor.
    """
    V = spec.eigenvectors * phase[:, None]
    rev = perms[0]
    overlap = np.real(np.sum(V * np.conj(V[rev]), axis=0))
    return float(np.sum(np.exp(-spec.eigenvalues * t) * overlap))


# ---------------------------------------------------------------------------
# two dimensions


def _signs(box: BoxProblem):
    """Image sign ``s(eps)`` for each reflection pattern ``eps in {+1,-1}^n``."""
    for eps in product((1, -1), repeat=box.n):
        s = 1
        for e, (alpha, _) in zip(eps, box.bc):
            if e == -1:
                s *= alpha.sign
        yield np.array(eps, float), s


def torus_image_identity_2d(P: TrigPotential, box: BoxProblem, t_set=None, points=None, K: int = 32,
                            tolerance: float = 1e-5, seed: int = 0, check_tail: bool = True,
                            K_cell: int | None = None) -> IdentityReport:
    """Box kernel against the signed sum of torus kernels at reflected points."""
    if box.n != 2:
        raise ValueError("image identity implemented for n = 2")
    inner = spectrum_nd(P, box, K, "interval", vectors=True)
    tor = spectrum_nd(P, box, _cell(K, K_cell), "torus", vectors=True)
    if points is None:
        lo, hi = (0.0,) * 4, tuple(box.sides) * 2
        pts = halton_points(lo, hi, seed=seed)
    else:
        pts = np.asarray(points, float)
    x, y = pts[:, :2], pts[:, 2:]
    per_t = {}
    for t in _times(t_set, max(box.sides)):
        tail = kernel_tail_nd(inner, t) + 4 * kernel_tail_nd(tor, t)
        _check_tail("torus image", tail, t, check_tail)
        lhs = kernel_nd(inner, t, x, y)
        rhs = sum(s * kernel_nd(tor, t, x * eps, y) for eps, s in _signs(box))
        per_t[t] = float(np.max(np.abs(lhs - rhs)))
    return IdentityReport("torus_image_2d", f"{len(x)} point pairs x {len(per_t)} times", max(per_t.values()),
                          tolerance, (inner.provenance, tor.provenance), per_t)


def trace_quadrupling_2d(P: TrigPotential, box: BoxProblem, t_set=None, K: int = 32, tolerance: float = 1e-5,
                         check_tail: bool = True, K_cell: int | None = None) -> IdentityReport:
    """``4 Tr_box(t) = sum_eps s(eps) int_{R0} G_tor(t, eps x, x) dx``."""
    if box.n != 2:
        raise ValueError("quadrupling implemented for n = 2")
    if any(p != (BC.D, BC.D) for p in box.bc):
        raise ValueError("quadrupling needs all-Dirichlet faces")
    inner = spectrum_nd(P, box, K, "interval", vectors=False)
    tor = spectrum_nd(P, box, _cell(K, K_cell), "torus", vectors=True)
    sup = _sup(P)
    per_t = {}
    for t in _times(t_set, max(box.sides)):
        tail = 4 * trace_tail(inner.bases, t, sup) + 4 * trace_tail(tor.bases, t, sup)
        _check_tail("quadrupling", tail, t, check_tail)
        rhs = 0.0
        for eps, s in _signs(box):
            perms = [None if e > 0 else _reversal(b) for e, b in zip(eps, tor.bases)]
            rhs += s * diagonal_integrals(tor, perms, t)
        per_t[t] = abs(4 * _trace(inner, t) - rhs)
    return IdentityReport("trace_quadrupling_2d", f"{len(per_t)} times", max(per_t.values()), tolerance,
                          (inner.provenance, tor.provenance), per_t)


def trapezoid_diagonal_integral(spec: SpectrumND, eps, t: float, nodes: int = 64) -> float:
    """Tensor-grid trapezoid value of ``int_{R0} G(t, eps x, x) dx`` (periodic, so spectrally exact)."""
    axes = [np.linspace(-b.length, b.length, nodes, endpoint=False) for b in spec.bases]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(axes))
    w = np.prod([2 * b.length / nodes for b in spec.bases])
    vals = kernel_nd(spec, t, grid * np.asarray(eps, float), grid)
    return float(w * np.sum(vals))


def periodized_gaussian(t: float, z, period: float) -> np.ndarray:
    """Free periodic kernel ``sum_n exp(-(z + n L)^2 / 4t) / sqrt(4 pi t)``."""
    z = np.asarray(z, float)
    nmax = int(math.ceil(math.sqrt(40.0 * t) / period)) + 2
    n = np.arange(-nmax, nmax + 1)
    return np.sum(np.exp(-(z[..., None] + n * period) ** 2 / (4 * t)), axis=-1) / math.sqrt(4 * math.pi * t)


def factorization_identity(P: TrigPotential, box: BoxProblem, k: Sequence[int], t_set=None, points=None,
                           K: int = 24, K1: int = 64, tolerance: float = 1e-8, seed: int = 0,
                           check_tail: bool = True) -> IdentityReport:
    """Torus kernel of ``q_d`` as a free factor along ``d`` times a transverse 1D kernel.

    ``k`` must be a coordinate direction; ``q_d`` is then constant along axis
    ``i`` and the periodic kernel splits into the periodized Gaussian in
    ``x_i`` and the periodic kernel of the transverse profile.
    """
    if box.n != 2:
        raise ValueError("factorization implemented for n = 2")
    k = tuple(int(v) for v in k)
    nz = [i for i, v in enumerate(k) if v]
    if len(nz) != 1:
        raise ValueError("k must be a coordinate direction")
    i = nz[0]
    j = 1 - i
    Pd = reduce_potential(P, k)
    tor = spectrum_nd(Pd, box, K, "torus", torus_kinds=("Periodic", "Periodic"), vectors=True)
    transverse = TrigPotential((box.sides[j],), {(m[j],): v for m, v in Pd.coeffs})
    H = spectrum_1d(transverse, "Periodic", box.sides[j], K1)
    if points is None:
        lo = tuple(-a for a in box.sides) * 2
        hi = tuple(box.sides) * 2
        pts = halton_points(lo, hi, seed=seed)
    else:
        pts = np.asarray(points, float)
    x, y = pts[:, :2], pts[:, 2:]
    sup = _sup(Pd)
    per_t = {}
    for t in _times(t_set, max(box.sides)):
        tail = kernel_tail_nd(tor, t) + free_tail_1d(H.basis, t, sup)
        _check_tail("factorization", tail, t, check_tail)
        lhs = kernel_nd(tor, t, x, y)
        rhs = periodized_gaussian(t, x[:, i] - y[:, i], 2 * box.sides[i]) * kernel_1d(H, t, x[:, j], y[:, j])
        per_t[t] = float(np.max(np.abs(lhs - rhs)))
    return IdentityReport(f"factorization{list(k)}", f"{len(x)} point pairs x {len(per_t)} times",
                          max(per_t.values()), tolerance, (tor.provenance, H.provenance), per_t)


def refinement_shrink(check: Callable[..., IdentityReport], K: int, factor: float = 10.0, **kwargs) -> RefinementReport:
    """Run ``check`` at ``K`` and ``2K`` without the tail precondition."""
    coarse = check(K=K, check_tail=False, **kwargs)
    fine = check(K=2 * K, check_tail=False, **kwargs)
    return RefinementReport(coarse.name, K, coarse.residual, fine.residual, factor)
