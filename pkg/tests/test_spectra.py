import math

import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, settings, strategies as st

from oracles import free_interval_levels, free_kernel_images, gauss_galerkin_1d, mathieu_period_pi
from specbox.model import BoxProblem, CosineSpec, TrigPotential, build_potential
from specbox.spectra1d import Basis1D, assemble_1d, directional_spectrum, kernel_1d, spectrum_1d
from specbox.spectrand import (CapExceeded, assemble_nd, coupling_blocks, kernel_nd, separable_spectrum,
                               spectrum_nd)
from specbox.model import directional_decomposition, subtract_mean


@pytest.mark.parametrize("kind", ["DD", "DN", "ND", "NN"])
def test_free_interval_spectrum(kind):
    s = spectrum_1d(None, kind, 1.3, 40, vectors=False)
    assert np.allclose(s.eigenvalues, free_interval_levels(kind, 1.3, 40), rtol=1e-14, atol=1e-12)


def test_free_doubled_cell_spectrum():
    per = spectrum_1d(None, "Periodic", 1.0, 10, vectors=False).eigenvalues
    exp = np.sort(np.concatenate([[0.0], np.repeat((np.pi * np.arange(1, 11)) ** 2, 2)]))
    assert np.allclose(per, exp)
    anti = spectrum_1d(None, "Antiperiodic", 1.0, 10, vectors=False).eigenvalues
    assert np.allclose(anti, np.repeat((np.pi * (np.arange(10) + 0.5)) ** 2, 2))


@given(st.sampled_from(["DD", "DN", "ND", "NN"]),
       st.dictionaries(st.integers(0, 6), st.floats(-3, 3, allow_nan=False), min_size=1, max_size=4))
@settings(max_examples=30, deadline=None)
def test_exact_assembly_matches_quadrature(kind, terms):
    a = 1.7
    basis = Basis1D(kind, a, 24)
    M = assemble_1d(terms, basis)
    q = lambda x: sum(c * np.cos(np.pi * m * x / a) for m, c in terms.items())
    assert np.allclose(M, gauss_galerkin_1d(kind, a, 24, q), atol=1e-11)


def test_periodic_spectrum_matches_mathieu_values():
    # -y'' + 2 q cos(2x) y with period pi: doubled cell of half-length pi / 2
    for q in (0.5, 2.0):
        s = spectrum_1d({1: 2 * q}, "Periodic", math.pi / 2, 48, vectors=False)
        assert np.allclose(s.eigenvalues[:12], mathieu_period_pi(q, 12), atol=1e-9)


def test_solver_errors():
    with pytest.raises(ValueError):
        Basis1D("XY", 1.0, 8)
    with pytest.raises(ValueError):
        Basis1D("DD", 1.0, 2)
    with pytest.raises(ValueError):
        assemble_1d({1: 1.0}, Basis1D("DD", 1.0, 8), stiffness_scale=0.0)
    from specbox.spectra1d import solve_1d
    with pytest.raises(ValueError):
        solve_1d(np.array([[1.0, 2.0], [0.0, 1.0]]))


@pytest.mark.parametrize("kind", ["DD", "DN", "ND", "NN"])
def test_free_kernel_matches_images(kind):
    s = spectrum_1d(None, kind, 1.0, 64)
    x = np.linspace(0.05, 0.95, 7)
    y = x[::-1]
    for t in (0.01, 0.1):
        assert np.allclose(kernel_1d(s, t, x, y), free_kernel_images(kind, 1.0, t, x, y), atol=1e-12)


@given(st.floats(0.01, 0.5), st.floats(0.05, 0.95), st.floats(0.05, 0.95))
@settings(max_examples=30, deadline=None)
def test_kernel_symmetric_and_positive(t, x, y):
    s = spectrum_1d({1: 0.8, 3: -0.5}, "DN", 1.0, 48)
    k = kernel_1d(s, t, x, y)
    assert k == pytest.approx(float(kernel_1d(s, t, y, x)), abs=1e-13)
    assert k > 0


def test_directional_scaling_coherence():
    # coordinate direction: periodic spectrum in s = x / (2a) equals the doubled-cell solve
    a = 0.8
    P = build_potential(CosineSpec((a, 1.1), {(1, 0): 0.6, (3, 0): -0.4}))
    comp = [c for c in directional_decomposition(subtract_mean(P)) if c.direction == (1, 0)][0]
    s1 = directional_spectrum(comp, 48).eigenvalues[:30]
    s2 = spectrum_1d({1: 0.6, 3: -0.4}, "Periodic", a, 48, vectors=False).eigenvalues[:30]
    assert np.allclose(s1, s2, rtol=1e-12, atol=1e-10)


def test_nd_free_box():
    box = BoxProblem((1.0, 1.5), ("DN", "NN"))
    s = spectrum_nd(TrigPotential(box.sides, {}), box, 20)
    l1 = free_interval_levels("DN", 1.0, 20)
    l2 = free_interval_levels("NN", 1.5, 20)
    exp = np.sort(np.add.outer(l1, l2).ravel())
    assert np.allclose(s.eigenvalues, exp)


def test_separable_nd_matches_sum_of_1d():
    box = BoxProblem((1.0, 2 ** 0.25))
    q = CosineSpec(box.sides, {(1, 0): 0.7, (0, 2): -0.5, (2, 0): 0.2})
    nd = spectrum_nd(build_potential(q), box, 40).trusted[:100]
    sep = separable_spectrum([{1: 0.7, 2: 0.2}, {2: -0.5}], box, 100, K=128).eigenvalues
    assert np.allclose(nd, sep, rtol=1e-10)


def test_block_split_equals_dense_solve():
    box = BoxProblem((1.0, 1.3), ("DD", "NN"))
    P = build_potential(CosineSpec(box.sides, {(1, 1): 1.0, (2, 0): 0.3, (0, 2): -0.4}))
    H = assemble_nd(P, box, 12)
    assert len(coupling_blocks(H)) > 1
    dense = sla.eigh(H.toarray(), eigvals_only=True)
    assert np.allclose(spectrum_nd(P, box, 12).eigenvalues, dense, atol=1e-10)
    torus = assemble_nd(P, box, 6, mode="torus")
    assert np.allclose(spectrum_nd(P, box, 6, mode="torus").eigenvalues,
                       sla.eigh(torus.toarray(), eigvals_only=True), atol=1e-10)


def test_cap_exceeded():
    box = BoxProblem((1.0, 1.0))
    with pytest.raises(CapExceeded):
        spectrum_nd(TrigPotential(box.sides, {}), box, 200)


def test_nd_kernel_symmetric():
    box = BoxProblem((1.0, 1.2), ("DN", "DD"))
    P = build_potential(CosineSpec(box.sides, {(1, 1): 0.9}))
    s = spectrum_nd(P, box, 16, vectors=True)
    x = np.array([[0.3, 0.4], [0.7, 0.1]])
    y = np.array([[0.5, 0.9], [0.2, 0.6]])
    assert np.allclose(kernel_nd(s, 0.05, x, y), kernel_nd(s, 0.05, y, x), atol=1e-13)
