"""Heat traces, certified tails, closed-form small-t coefficients and fits.

Expansions are dictionaries ``{e: c_e}`` for ``sum_e c_e t**e`` with
half-integer exponents stored as floats.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations, product
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.special import erfc

from .model import BC, BoxProblem, CosineSpec, TrigPotential
from .spectra1d import Basis1D, Spectrum1D
from .spectrand import SpectrumND, interval_kind

SQPI = math.sqrt(math.pi)

# Coefficients of the wave-trace singularities for the Dirichlet 3D box.
GAMMA = {
    "0": -1 / (2 * math.pi),
    "1": -1 / (8 * math.pi),
    "21": -1 / (4 * math.pi),
    "22": 1 / 16,
    "31": 1 / (16 * math.pi),
    "32": -1 / 64,
    "41": 1 / (32 * math.pi),
    "42": -1 / 64,
    "51": -1 / (64 * math.pi),
    "52": 1 / (128 * math.pi),
    "53": 1 / 128,
}
# Uncorrected gamma_51 (missing 1/pi); breaks the product law, kept for reporting.
GAMMA_51_ALT = -1 / 64

# Gaussian smoothing G = (4 pi t)^(-1/2) int D(s) exp(-s^2/4t) ds maps each
# wave-side singularity to c * t**e.
WAVE_TO_HEAT = {
    "delta''": (-1.5, -1 / (4 * SQPI)),
    "d/dt pv(1/t)": (-1.0, 0.5),
    "delta": (-0.5, 1 / (2 * SQPI)),
    "1": (0.0, 1.0),
    "|t|": (0.5, 2 / SQPI),
    "t^2": (1.0, 2.0),
}

ORDERS = {1: (-0.5, 0.0, 0.5, 1.0, 1.5, 2.0), 2: (-1.0, -0.5, 0.0, 0.5, 1.0, 1.5),
          3: (-1.5, -1.0, -0.5, 0.0, 0.5, 1.0)}


# ---------------------------------------------------------------------------
# series


@dataclass(frozen=True, eq=False)
class HeatTraceSeries:
    """Sampled trace ``sum_j exp(-mu_j t)`` with certified tail bounds."""

    t: np.ndarray
    value: np.ndarray
    tail_bound: np.ndarray
    flagged: np.ndarray = field(default_factory=lambda: np.zeros(0, bool))

    def __post_init__(self):
        t = np.asarray(self.t, float)
        if t.size and (np.any(t <= 0) or np.any(np.diff(t) <= 0)):
            raise ValueError("t must be positive and strictly increasing")
        if np.any(np.asarray(self.tail_bound) < 0):
            raise ValueError("tail bounds must be nonnegative")
        if self.flagged.size == 0:
            object.__setattr__(self, "flagged", np.zeros(t.size, bool))

    def __len__(self) -> int:
        return len(self.t)

    def to_csv(self) -> str:
        rows = ["t,value,tail_bound"]
        rows += [f"{t!r},{v!r},{b!r}" for t, v, b in zip(self.t.tolist(), self.value.tolist(),
                                                         self.tail_bound.tolist())]
        return "\n".join(rows) + "\n"


def _trace_values(mu: np.ndarray, t: np.ndarray, chunk: int = 64) -> np.ndarray:
    out = np.empty(len(t))
    for i in range(0, len(t), chunk):
        out[i:i + chunk] = np.exp(-np.outer(t[i:i + chunk], mu)).sum(axis=1)
    return out


def _spec_box(spec) -> tuple[BoxProblem, tuple[str, ...]]:
    if isinstance(spec, Spectrum1D):
        b = spec.basis
        if b is None or not b.is_interval:
            raise ValueError("tail bounds need an interval basis")
        return BoxProblem((b.length,), (tuple(b.kind),)), (b.kind,)
    if spec.box is None:
        raise ValueError("spectrum carries no box")
    if spec.mode not in ("interval", "separable"):
        raise ValueError("tail bounds implemented for box problems only")
    return spec.box, tuple(interval_kind(p) for p in spec.box.bc)


def _levels(kind: str, a: float, lam: float) -> np.ndarray:
    """Free 1D eigenvalues ``<= lam`` for an interval kind."""
    pmax = int(math.floor(a * math.sqrt(max(lam, 0.0)) / math.pi)) + 2
    if kind == "DD":
        p = np.arange(1, pmax + 1, dtype=float)
    elif kind == "NN":
        p = np.arange(0, pmax + 1, dtype=float)
    else:
        p = np.arange(1, pmax + 1, dtype=float) - 0.5
    ev = (math.pi * p / a) ** 2
    return ev[ev <= lam]


def theta_interval(kind: str, a: float, t: float) -> float:
    """Upper bound (exact to rounding) for the free 1D trace ``sum exp(-mu t)``."""
    c = (math.pi / a) ** 2 * t
    pmax = int(math.ceil(math.sqrt(60.0 / c))) + 2
    start = {"DD": 1.0, "NN": 0.0}.get(kind, 0.5)
    p = start + np.arange(pmax)
    s = float(np.sum(np.exp(-c * p * p)))
    pend = p[-1] + 1
    return s + 0.5 * math.sqrt(math.pi / c) * float(erfc(pend * math.sqrt(c)))


def free_trace(box: BoxProblem, t: float) -> float:
    """Free trace of the box, product of interval thetas."""
    return float(np.prod([theta_interval(interval_kind(p), a, t) for p, a in zip(box.bc, box.sides)]))


def free_eigenvalues(box: BoxProblem, lam: float) -> np.ndarray:
    """All free eigenvalues ``<= lam`` (with multiplicity), ascending."""
    vals = np.zeros(1)
    for p, a in zip(box.bc, box.sides):
        lv = _levels(interval_kind(p), a, lam)
        vals = (vals[:, None] + lv[None, :]).ravel()
        vals = vals[vals <= lam]
    return np.sort(vals)


def tail_bound(spec, t: float, count: int | None = None) -> float:
    """Certified bound for the trace beyond the first ``count`` eigenvalues.

    Min-max gives ``mu_j >= mu_j^free - ||q||_inf``, so the missing part is at
    most ``exp(||q|| t) sum_{j > count} exp(-mu_j^free t)``.  Free levels up to
    ``Lambda`` are summed exactly; the rest is bounded by
    ``exp(-Lambda t / 2) * free_trace(t / 2)``.
    """
    return float(tail_bounds(spec, [t], count)[0])


def tail_bounds(spec, ts: Sequence[float], count: int | None = None) -> np.ndarray:
    """Vectorized ``tail_bound`` sharing one enumeration of free levels."""
    ts = np.asarray(ts, float)
    if np.any(ts <= 0):
        raise ValueError("t must be positive")
    box, _ = _spec_box(spec)
    N = len(spec.trusted) if count is None else int(count)
    lam = _guess_level(box, N)
    lev = free_eigenvalues(box, lam)
    while len(lev) < N + 1:
        lam *= 2.0
        lev = free_eigenvalues(box, lam)
    # remainder relative to the head is below exp(-100) * free_trace(t/2)
    lam_cut = 2.0 * lev[N] + 200.0 / float(ts.min())
    levels = free_eigenvalues(box, lam_cut)[N:]
    out = np.empty(len(ts))
    for i, t in enumerate(ts):
        head = float(np.sum(np.exp(-levels * t)))
        rest = math.exp(-lam_cut * t / 2) * free_trace(box, t / 2)
        out[i] = math.exp(spec.potential_sup * t) * (head + rest) + 1e-15 * head
    return out


def _guess_level(box: BoxProblem, N: int) -> float:
    n = box.n
    vol = box.volume
    # Weyl: N ~ omega_n vol lam^(n/2) / (2 pi)^n
    omega = {1: 2.0, 2: math.pi, 3: 4 * math.pi / 3}[n]
    lam = ((N + 10) * (2 * math.pi) ** n / (omega * vol)) ** (2 / n)
    return 2.0 * lam + 100.0


def trace_series(spec, t_grid: Sequence[float], rel_floor: float = 1e-8) -> HeatTraceSeries:
    """Trace over the trusted eigenvalues with a certified tail per ``t``.

    Points whose tail bound exceeds ``rel_floor * value`` are flagged.
    """
    t = np.asarray(t_grid, float)
    mu = spec.trusted
    val = _trace_values(mu, t)
    tails = tail_bounds(spec, t)
    return HeatTraceSeries(t, val, tails, tails > rel_floor * val)


def product_series(parts: Sequence[HeatTraceSeries]) -> HeatTraceSeries:
    """Trace of a separable problem as the product of factor traces."""
    t = parts[0].t
    for p in parts[1:]:
        if not np.array_equal(p.t, t):
            raise ValueError("factor series need a common t grid")
    val = np.prod([p.value for p in parts], axis=0)
    upper = np.prod([p.value + p.tail_bound for p in parts], axis=0)
    tails = upper - val + 1e-15 * val
    flagged = np.any([p.flagged for p in parts], axis=0)
    return HeatTraceSeries(t, val, tails, flagged)


# ---------------------------------------------------------------------------
# closed-form coefficients


def _faces(box: BoxProblem, q: CosineSpec):
    """``(sign, area, restriction, normal second derivative)`` per face."""
    for i in range(box.n):
        d2 = q.d2(i)
        for end in (0, 1):
            sigma = box.bc[i][end].sign
            area = float(np.prod([a for j, a in enumerate(box.sides) if j != i]))
            yield sigma, area, q.restrict(i, bool(end)), d2.restrict(i, bool(end))


def _restrict_many(q: CosineSpec, fixed: Sequence[tuple[int, int]]) -> CosineSpec:
    # remove higher dims first so indices stay valid
    for dim, end in sorted(fixed, reverse=True):
        q = q.restrict(dim, bool(end))
    return q


def _edges(box: BoxProblem, q: CosineSpec):
    """``(sign product, length, restriction)`` per codimension-2 stratum."""
    for i, j in combinations(range(box.n), 2):
        for ei, ej in product((0, 1), repeat=2):
            sig = box.bc[i][ei].sign * box.bc[j][ej].sign
            length = float(np.prod([a for k, a in enumerate(box.sides) if k not in (i, j)]))
            yield sig, length, _restrict_many(q, [(i, ei), (j, ej)])


def _vertices(box: BoxProblem, q: CosineSpec):
    for ends in product((0, 1), repeat=box.n):
        sig = int(np.prod([box.bc[i][e].sign for i, e in enumerate(ends)]))
        yield sig, _restrict_many(q, list(enumerate(ends))).integral()


def _as_cosine(P, box: BoxProblem) -> CosineSpec:
    if P is None:
        return CosineSpec(box.sides, {})
    if isinstance(P, CosineSpec):
        return P
    if not P.is_coordinatewise_even:
        raise ValueError("closed-form coefficients need a coordinatewise even potential")
    return P.to_cosine()


def predicted_coefficients(box: BoxProblem, P: TrigPotential | CosineSpec | None = None,
                           gamma: Mapping[str, float] | None = None) -> dict[float, float]:
    """Closed-form small-t coefficients of the heat trace.

    ``n = 2`` follows the explicit two-dimensional expansion, ``n = 3`` the
    gamma table mapped through the Gaussian smoothing, ``n = 1`` the endpoint
    reflection structure.  Mixed conditions use the sign rules: faces carry
    their image sign, codimension-2 strata the product of two signs and
    vertices the product of all adjoining signs.
    """
    q = _as_cosine(P, box)
    if q.sides != box.sides:
        raise ValueError("potential and box have different sides")
    if box.n == 1:
        return _coeffs_1d(box, q)
    if box.n == 2:
        return _coeffs_2d(box, q)
    if box.n == 3:
        return _coeffs_3d(box, q, gamma or GAMMA)
    raise ValueError(f"unsupported dimension {box.n}")


def _coeffs_1d(box: BoxProblem, q: CosineSpec) -> dict[float, float]:
    a = box.sides[0]
    c = dict.fromkeys(ORDERS[1], 0.0)
    c[-0.5] = a / (2 * SQPI)
    c[0.5] = -q.integral() / (2 * SQPI)
    c[1.5] = q.integral_sq() / (4 * SQPI)
    qpp = q.d2(0)
    for end in (0, 1):
        s = box.bc[0][end].sign
        v = q.restrict(0, bool(end)).integral()
        w = qpp.restrict(0, bool(end)).integral()
        c[0.0] += s / 4
        c[1.0] -= s * v / 4
        c[2.0] += s * (v * v / 8 - w / 16)
    return c


def _coeffs_2d(box: BoxProblem, q: CosineSpec) -> dict[float, float]:
    c = dict.fromkeys(ORDERS[2], 0.0)
    c[-1.0] = box.volume / (4 * math.pi)
    c[0.0] = -q.integral() / (4 * math.pi)
    c[1.0] = q.integral_sq() / (8 * math.pi)
    for s, length, qf, d2f in _faces(box, q):
        # Dirichlet sides have s = -1
        c[-0.5] += s * length / (8 * SQPI)
        c[0.5] -= s * qf.integral() / (8 * SQPI)
        c[1.5] += s * (qf.integral_sq() / (16 * SQPI) - d2f.integral() / (32 * SQPI))
    for s, qv in _vertices(box, q):
        c[0.0] += s / 16
        c[1.0] -= s * qv / 16
    return c


def wave_terms_3d(box: BoxProblem, q: CosineSpec, gamma: Mapping[str, float]) -> list[tuple[str, float]]:
    """Wave-trace singularity list ``(kind, weight)`` for a 3D box.

    Tabulated constants are for all-Dirichlet faces; face terms carry ``-sigma``,
    edge terms ``sigma sigma'`` and vertex terms ``-sigma sigma' sigma''`` so
    that the Dirichlet case reproduces them.
    """
    g = gamma
    terms = [("delta''", g["0"] * box.volume), ("delta", g["21"] * q.integral()),
             ("|t|", g["41"] * q.integral_sq())]
    for s, area, qf, d2f in _faces(box, q):
        f = -s
        terms += [("d/dt pv(1/t)", f * g["1"] * area), ("1", f * g["31"] * qf.integral()),
                  ("t^2", f * (g["51"] * qf.integral_sq() + g["52"] * d2f.integral()))]
    for s, length, qe in _edges(box, q):
        terms += [("delta", s * g["22"] * length), ("|t|", s * g["42"] * qe.integral())]
    for s, qv in _vertices(box, q):
        terms += [("1", -s * g["32"]), ("t^2", -s * g["53"] * qv)]
    return terms


def smooth_wave_terms(terms: Sequence[tuple[str, float]]) -> dict[float, float]:
    out: dict[float, float] = {}
    for kind, w in terms:
        e, f = WAVE_TO_HEAT[kind]
        out[e] = out.get(e, 0.0) + f * w
    return out


def _coeffs_3d(box: BoxProblem, q: CosineSpec, gamma: Mapping[str, float]) -> dict[float, float]:
    c = dict.fromkeys(ORDERS[3], 0.0)
    c.update(smooth_wave_terms(wave_terms_3d(box, q, gamma)))
    return c


def geometric_coefficients(box: BoxProblem) -> dict[float, float]:
    """Potential-free part of the expansion (the free box)."""
    return {e: v for e, v in predicted_coefficients(box, None).items() if v != 0.0}


def multiply_expansions(parts: Sequence[Mapping[float, float]], max_order: float) -> dict[float, float]:
    """Product of expansions truncated at ``max_order``."""
    out = {0.0: 1.0}
    for p in parts:
        nxt: dict[float, float] = {}
        for e1, v1 in out.items():
            for e2, v2 in p.items():
                nxt[e1 + e2] = nxt.get(e1 + e2, 0.0) + v1 * v2
        out = nxt
    return {e: v for e, v in sorted(out.items()) if e <= max_order + 1e-12}


def shift_expansion(coeffs: Mapping[float, float], gamma: float, max_order: float) -> dict[float, float]:
    """Coefficients of ``exp(-gamma t) * sum c_e t**e``."""
    series = {float(k): (-gamma) ** k / math.factorial(k) for k in range(0, 8)}
    return multiply_expansions([coeffs, series], max_order)


# ---------------------------------------------------------------------------
# fitting


@dataclass(frozen=True, eq=False)
class AsymptoticFit:
    """Least-squares fit of ``value - known`` against ``{t**e}``.

    ``fitted`` reports full coefficients (known parts added back) for the
    compared exponents; guard exponents are listed separately.
    """

    exponents: tuple[float, ...]
    guard_exponents: tuple[float, ...]
    fitted: dict[float, float]
    stderr: dict[float, float]
    known: dict[float, float]
    residual: float
    condition: float
    t_range: tuple[float, float]
    npoints: int
    predicted: dict[float, float] | None = None

    def potential_part(self, e: float) -> float:
        return self.fitted[e] - self.known.get(e, 0.0)

    def with_predicted(self, predicted: Mapping[float, float]) -> "AsymptoticFit":
        return AsymptoticFit(self.exponents, self.guard_exponents, self.fitted, self.stderr, self.known,
                             self.residual, self.condition, self.t_range, self.npoints, dict(predicted))

    def to_csv(self) -> str:
        rows = ["exponent,fitted,predicted,deviation"]
        for e in self.exponents:
            p = None if self.predicted is None else self.predicted.get(e)
            dev = "" if p is None else repr(self.fitted[e] - p)
            rows.append(f"{e!r},{self.fitted[e]!r},{'' if p is None else repr(p)},{dev}")
        return "\n".join(rows) + "\n"


class FitError(ValueError):
    """Ill-posed or unreliable fit."""


def fit_expansion(series: HeatTraceSeries, exponents: Sequence[float],
                  subtract_known: Mapping[float, float] | None = None, guards: int = 3,
                  tail_rtol: float = 1e-9, max_condition: float = 1e10) -> AsymptoticFit:
    """Weighted linear least squares for half-power coefficients.

    Parameters
    ----------
    series : HeatTraceSeries
    exponents : sequence of float
        Exponents to report, strictly increasing.
    subtract_known : mapping, optional
        Exactly known coefficients removed from the data before fitting.  They
        are added back into ``fitted`` for exponents that are also fitted.
    guards : int
        Extra exponents ``e_max + 1/2, e_max + 1, ...`` that absorb the
        remainder of the expansion.
    tail_rtol : float
        Every point must satisfy ``tail_bound <= tail_rtol * |value - known|``.
    max_condition : float
        Fits whose column-scaled design exceeds this condition number are refused.

    Notes
    -----
    Rows are weighted by ``1 / value`` so that rounding in the trace, which is
    relative to its size, has uniform weight.
    """
    ex = tuple(float(e) for e in exponents)
    if any(b <= a for a, b in zip(ex, ex[1:])):
        raise FitError("exponents must be strictly increasing")
    gex = tuple(ex[-1] + 0.5 * (k + 1) for k in range(guards))
    allx = ex + gex
    t = np.asarray(series.t, float)
    if len(t) < 2 * len(allx):
        raise FitError(f"need at least {2 * len(allx)} points, got {len(t)}")
    known = {float(k): float(v) for k, v in (subtract_known or {}).items()}
    y = series.value - sum((v * t ** e for e, v in known.items()), np.zeros_like(t))
    bad = series.tail_bound > tail_rtol * np.abs(y)
    if np.any(bad):
        raise FitError(f"{int(bad.sum())} points outside the reliability window (tail too large)")
    A = t[:, None] ** np.asarray(allx)[None, :]
    w = 1.0 / np.abs(series.value)
    Aw = A * w[:, None]
    yw = y * w
    norms = np.linalg.norm(Aw, axis=0)
    An = Aw / norms
    cond = float(np.linalg.cond(An))
    if not np.isfinite(cond) or cond > max_condition:
        raise FitError(f"design matrix condition {cond:.3e} exceeds {max_condition:.1e}")
    sol, _, _, _ = np.linalg.lstsq(An, yw, rcond=None)
    coef = sol / norms
    r = yw - An @ sol
    dof = max(len(t) - len(allx), 1)
    s2 = float(r @ r) / dof
    cov = s2 * np.linalg.inv(An.T @ An) / np.outer(norms, norms)
    fitted = {e: float(c) + known.get(e, 0.0) for e, c in zip(allx, coef)}
    stderr = {e: float(math.sqrt(max(cov[i, i], 0.0))) for i, e in enumerate(allx)}
    return AsymptoticFit(ex, gex, fitted, stderr, known, float(np.linalg.norm(r)), cond,
                         (float(t[0]), float(t[-1])), len(t))


def reliable_window(trace: Callable[[np.ndarray], HeatTraceSeries],
                    known: Mapping[float, float] | None = None, t_start: float = 1e-5,
                    span: float = 8.0, npts: int = 64, tail_rtol: float = 1e-9,
                    step: float = 1.05, t_stop: float = 10.0) -> HeatTraceSeries:
    """Smallest log-spaced window ``[t_min, span t_min]`` passing the tail rule.

    ``trace`` maps a t grid to a series.  ``t_min`` is the first point of a
    geometric scan at which every window point satisfies
    ``tail_bound <= tail_rtol * |value - known|``.
    """
    known = known or {}
    tm = t_start
    while tm < t_stop:
        probe = trace(np.array([tm]))
        y0 = probe.value[0] - sum(v * tm ** e for e, v in known.items())
        if probe.tail_bound[0] <= tail_rtol * abs(y0):
            grid = np.geomspace(tm, span * tm, npts)
            s = trace(grid)
            y = s.value - sum((v * grid ** e for e, v in known.items()), np.zeros_like(grid))
            if np.all(s.tail_bound <= tail_rtol * np.abs(y)):
                return s
        tm *= step
    raise FitError("no reliable window found")


@dataclass(frozen=True)
class FitRow:
    exponent: float
    fitted: float
    predicted: float
    abs_dev: float
    rel_dev: float
    passed: bool


@dataclass(frozen=True)
class FitComparison:
    rows: tuple[FitRow, ...]

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)

    def row(self, e: float) -> FitRow:
        for r in self.rows:
            if r.exponent == e:
                return r
        raise KeyError(e)


def compare_fit(fit: AsymptoticFit, predicted: Mapping[float, float], rtol: float | Mapping[float, float] = 0.02,
                atol: float | Mapping[float, float] = 0.0, exponents: Sequence[float] | None = None) -> FitComparison:
    """Per-exponent deviations; a row passes if within ``atol`` or ``rtol``."""
    ex = tuple(exponents) if exponents is not None else fit.exponents
    rows = []
    for e in ex:
        if e not in predicted or e not in fit.fitted:
            raise KeyError(f"exponent {e} missing from fit or prediction")
        f, p = fit.fitted[e], float(predicted[e])
        d = abs(f - p)
        rel = d / abs(p) if p != 0 else (0.0 if d == 0 else math.inf)
        rt = rtol[e] if isinstance(rtol, Mapping) else rtol
        at = atol[e] if isinstance(atol, Mapping) else atol
        rows.append(FitRow(e, f, p, d, rel, bool(d <= at or rel <= rt)))
    return FitComparison(tuple(rows))
