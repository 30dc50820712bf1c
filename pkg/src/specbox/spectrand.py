"""Spectra and heat kernels of ``-Delta + q`` on 2D/3D boxes and doubled-cell tori.

The Galerkin matrix is a sum of Kronecker products of exact 1D multiplier
matrices.  Before the dense solve it is split into the connected components
of its coupling graph (for a cosine potential these are parity classes), which
leaves the eigenvalues unchanged and cuts the cost of the solve.
"""
from __future__ import annotations

import hashlib
import heapq
from dataclasses import dataclass
from functools import lru_cache, reduce
from typing import Sequence

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .model import BC, BoxProblem, TrigPotential
from .spectra1d import Basis1D, Spectrum1D, _sign_fix, free_tail_1d, spectrum_1d

DEFAULT_CAP = 20000
MODES = ("interval", "torus")


class CapExceeded(ValueError):
    """Requested basis is larger than the configured size cap."""


def interval_kind(pair: tuple[BC, BC]) -> str:
    return pair[0].value + pair[1].value


def torus_kind(pair: tuple[BC, BC]) -> str:
    """Periodic when both faces share a condition, antiperiodic otherwise."""
    return "Periodic" if pair[0] == pair[1] else "Antiperiodic"


def make_bases(box: BoxProblem, K: Sequence[int] | int, mode: str = "interval",
               torus_kinds: Sequence[str] | None = None) -> tuple[Basis1D, ...]:
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    Ks = (int(K),) * box.n if np.isscalar(K) else tuple(int(k) for k in K)
    if len(Ks) != box.n:
        raise ValueError("need one basis size per dimension")
    if mode == "interval":
        kinds = [interval_kind(p) for p in box.bc]
    else:
        kinds = list(torus_kinds) if torus_kinds is not None else [torus_kind(p) for p in box.bc]
    return tuple(Basis1D(k, a, n) for k, a, n in zip(kinds, box.sides, Ks))


def _kron_all(mats) -> sp.csr_matrix:
    return reduce(lambda A, B: sp.kron(A, B, format="csr"), mats)


def assemble_nd(P: TrigPotential, box: BoxProblem, K: Sequence[int] | int, mode: str = "interval",
                torus_kinds: Sequence[str] | None = None, cap: int = DEFAULT_CAP) -> sp.csr_matrix:
    """Sparse symmetric Galerkin matrix of ``-Delta + Q``.

    Interval mode uses the face conditions of ``box`` and needs a
    coordinatewise even potential; torus mode works on the doubled cell with
    per-dimension periodic or antiperiodic exponentials and accepts any
    ``TrigPotential``.
    """
    if P.sides != box.sides:
        raise ValueError("potential and box have different sides")
    bases = make_bases(box, K, mode, torus_kinds)
    N = int(np.prod([b.dim for b in bases]))
    if N > cap:
        raise CapExceeded(f"basis size {N} exceeds cap {cap}")
    lap = np.zeros(N)
    for i, b in enumerate(bases):
        shape = [1] * len(bases)
        shape[i] = b.dim
        lap = (lap.reshape([b2.dim for b2 in bases]) + b.eigenfrequencies_sq.reshape(shape)).ravel()
    H = sp.diags(lap, format="csr")
    if mode == "interval":
        for m, c in P.to_cosine().terms:
            H = H + c * _kron_all([b.potential_matrix(mi) for b, mi in zip(bases, m)])
    else:
        for m, v in P.full_items():
            H = H + v * _kron_all([b.exp_matrix(mi) for b, mi in zip(bases, m)])
    H.eliminate_zeros()
    return H


@dataclass(frozen=True, eq=False)
class SpectrumND:
    """Eigenvalues (ascending) of a box or torus problem."""

    eigenvalues: np.ndarray
    bases: tuple[Basis1D, ...] = ()
    eigenvectors: np.ndarray | None = None
    mode: str = "interval"
    provenance: str = ""
    potential_sup: float = 0.0
    trust_fraction: float = 0.25
    box: BoxProblem | None = None

    def __len__(self) -> int:
        return len(self.eigenvalues)

    @property
    def trusted(self) -> np.ndarray:
        return self.eigenvalues[: max(1, int(len(self.eigenvalues) * self.trust_fraction))]

    def to_csv(self) -> str:
        lines = ["index,eigenvalue"]
        lines += [f"{i + 1},{v!r}" for i, v in enumerate(self.eigenvalues.tolist())]
        return "\n".join(lines) + "\n"


def coupling_blocks(H: sp.spmatrix) -> list[np.ndarray]:
    """Index sets of the connected components of the coupling graph of ``H``."""
    ncomp, labels = connected_components(H != 0, directed=False)
    order = np.argsort(labels, kind="stable")
    splits = np.flatnonzero(np.diff(labels[order])) + 1
    return np.split(order, splits)


def solve_nd(H, vectors: bool = False, bases: tuple[Basis1D, ...] = (), mode: str = "interval",
             provenance: str = "", potential_sup: float = 0.0, box: BoxProblem | None = None) -> SpectrumND:
    """Dense eigensolve of each coupling block; merged ascending eigenvalues.

    Each block is ordered by increasing diagonal before the solve (see
    ``graded_eigh``).
    """
    H = sp.csr_matrix(H)
    if H.shape[0] != H.shape[1]:
        raise ValueError("matrix must be square")
    asym = abs(H - H.T)
    scale = max(1.0, float(abs(H).max()))
    if asym.nnz and asym.max() > 1e-13 * scale:
        raise ValueError("matrix is not symmetric")
    N = H.shape[0]
    diag = H.diagonal()
    vals = []
    owners = []
    vec = np.zeros((N, N)) if vectors else None
    col = 0
    for idx in coupling_blocks(H):
        idx = idx[np.argsort(diag[idx], kind="stable")]
        block = H[idx][:, idx].toarray()
        if vectors:
            w, v = sla.eigh(block, check_finite=False)
            vec[np.ix_(idx, np.arange(col, col + len(w)))] = v
        else:
            w = sla.eigh(block, eigvals_only=True, driver="evr", overwrite_a=True, check_finite=False)
        vals.append(w)
        owners.append(np.arange(col, col + len(w)))
        col += len(w)
    vals = np.concatenate(vals)
    order = np.argsort(vals, kind="stable")
    if vectors:
        vec = _sign_fix(vec[:, order])
    return SpectrumND(vals[order], tuple(bases), vec, mode, provenance, potential_sup, 0.25, box)


@lru_cache(maxsize=32)
def _cached_nd(P: TrigPotential, box: BoxProblem, K: tuple, mode: str, torus_kinds, vectors: bool, cap: int):
    H = assemble_nd(P, box, K, mode, torus_kinds, cap)
    bases = make_bases(box, K, mode, torus_kinds)
    prov = hashlib.sha256(repr((P.digest, box, K, mode, torus_kinds)).encode()).hexdigest()[:16]
    sup = sum(abs(v) for _, v in P.full_items())
    return solve_nd(H, vectors, bases, mode, prov, sup, box)


def spectrum_nd(P: TrigPotential, box: BoxProblem, K: Sequence[int] | int, mode: str = "interval",
                torus_kinds: Sequence[str] | None = None, vectors: bool = False,
                cap: int = DEFAULT_CAP) -> SpectrumND:
    """Assemble and solve; cached by input."""
    Ks = (int(K),) * box.n if np.isscalar(K) else tuple(int(k) for k in K)
    tk = tuple(torus_kinds) if torus_kinds is not None else None
    return _cached_nd(P, box, Ks, mode, tk, bool(vectors), int(cap))


def separable_spectrum(qs: Sequence, box: BoxProblem, count: int, K: int = 128) -> SpectrumND:
    """The ``count`` smallest sums of 1D eigenvalues for ``q = sum_i q_i(x_i)``.

    Parameters
    ----------
    qs : sequence
        Per-dimension 1D cosine series (anything ``spectrum_1d`` accepts).
    box : BoxProblem
    count : int
    K : int
        1D basis size; only the trusted part of each 1D spectrum is merged.

    Raises
    ------
    ValueError
        If the ``count``-th sum could involve an untrusted 1D eigenvalue.
    """
    if len(qs) != box.n:
        raise ValueError("need one 1D potential per dimension")
    specs = [spectrum_1d(q, interval_kind(p), a, K, vectors=False) for q, p, a in zip(qs, box.bc, box.sides)]
    lists = [s.trusted for s in specs]
    total = int(np.prod([len(l) for l in lists]))
    if count > total:
        raise ValueError(f"count {count} exceeds the {total} available products")
    start = (0,) * box.n
    heap = [(sum(l[0] for l in lists), start)]
    seen = {start}
    out = []
    while heap and len(out) < count:
        val, idx = heapq.heappop(heap)
        out.append(val)
        for i in range(box.n):
            if idx[i] + 1 < len(lists[i]):
                nxt = idx[:i] + (idx[i] + 1,) + idx[i + 1:]
                if nxt not in seen:
                    seen.add(nxt)
                    heapq.heappush(heap, (sum(l[j] for l, j in zip(lists, nxt)), nxt))
    mins = [l[0] for l in lists]
    limit = min(specs[i].eigenvalues[len(lists[i])] + sum(mins) - mins[i] for i in range(box.n)
                if len(specs[i].eigenvalues) > len(lists[i]))
    if out[-1] > limit:
        raise ValueError("count reaches beyond the trusted 1D eigenvalues")
    sup = sum(s.potential_sup for s in specs)
    return SpectrumND(np.array(out), (), None, "separable", "", sup, 1.0, box)


def basis_values(bases: Sequence[Basis1D], x) -> np.ndarray:
    """Tensor-product basis values at points ``x`` of shape ``(npts, n)``."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    vals = None
    for i, b in enumerate(bases):
        Bi = b.evaluate(x[:, i])
        vals = Bi if vals is None else (vals[:, :, None] * Bi[:, None, :]).reshape(len(x), -1)
    return vals


def kernel_nd(spec: SpectrumND, t: float, x, y) -> np.ndarray:
    """Heat kernel from the eigen-sum at point pairs ``x[j], y[j]``."""
    if t <= 0:
        raise ValueError("t must be positive")
    if spec.eigenvectors is None:
        raise ValueError("kernel needs eigenvectors")
    Fx = basis_values(spec.bases, x) @ spec.eigenvectors
    Fy = basis_values(spec.bases, y) @ spec.eigenvectors
    return np.real(np.sum(Fx * np.conj(Fy) * np.exp(-spec.eigenvalues * t), axis=-1))


def kernel_tail_nd(spec: SpectrumND, t: float) -> float:
    """Estimate of the kernel contribution of modes outside the product basis."""
    kept, full = 1.0, 1.0
    for b in spec.bases:
        w = 2 / b.length if b.is_interval else 1 / b.length
        s = w * float(np.sum(np.exp(-b.eigenfrequencies_sq * t)))
        kept *= s
        full *= s + free_tail_1d(b, t)
    return float(np.exp(spec.potential_sup * t) * max(full - kept, 0.0))
