import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, settings, strategies as st

from collective_qo.dynamics import propagate
from collective_qo.errors import DegenerateSteadyStateError
from collective_qo.hilbert import SpaceDescriptor, StateMatrix
from collective_qo.liouville import (assemble, liouvillian_gap, metastability, spectral_decomposition,
                                     steady_state, steady_state_derivative)
from collective_qo.models import (DimerParams, LambdaParams, SystemModel, TlsParams, build_driven_dimer,
                                  build_lambda, build_tls)
from collective_qo.hilbert import Operator

from conftest import random_model, random_state


def test_row_major_vectorization_identity():
    rng = np.random.default_rng(1)
    A, B, r = (rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3)) for _ in range(3))
    assert np.allclose((A @ r @ B).ravel(), np.kron(A, B.T) @ r.ravel())


def test_liouvillian_matches_explicit_lindblad_form():
    rng = np.random.default_rng(2)
    m = random_model(rng)
    L = assemble(m).dense()
    r = random_state(rng, m.dim)
    H = m.hamiltonian.matrix
    out = -1j * (H @ r - r @ H)
    for c in m.channels:
        A, B = c.A, c.B
        out += 0.5 * c.rate * (2 * A @ r @ B.conj().T - B.conj().T @ A @ r - r @ B.conj().T @ A)
    assert np.allclose(L @ r.ravel(), out.ravel())


def test_sparse_and_dense_agree():
    m = build_driven_dimer(DimerParams(1.0, 0.5, 3.0, 1.0, 0.2, 0.7))
    a = assemble(m, sparse=False).dense()
    b = assemble(m, sparse=True).dense()
    assert np.allclose(a, b)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_spectral_invariants(seed):
    rng = np.random.default_rng(seed)
    m = random_model(rng)
    L = assemble(m)
    dec = spectral_decomposition(L)
    lam = dec.eigenvalues
    # dissipativity
    assert np.all(lam.real <= 1e-9 * L.norm)
    # conjugate pairing
    for x in lam:
        assert np.min(np.abs(lam - np.conj(x))) < 1e-8 * max(1.0, L.norm)
    # steady state from the linear solve equals the zero mode
    rho = steady_state(L).matrix
    assert np.allclose(rho, dec.right[0], atol=1e-9)
    # exp(Lt) path vs ODE path
    r0 = random_state(rng, m.dim)
    a = propagate(L, r0, [0.0, 5.0], method="spectral").states[-1]
    b = propagate(L, r0, [0.0, 5.0], method="ode").states[-1]
    assert np.abs(a - b).max() < 1e-7


def test_degenerate_steady_state_raises():
    sp = SpaceDescriptor((2,))
    m = SystemModel(sp, Operator(sp, np.zeros((2, 2))), [], {})
    with pytest.raises(DegenerateSteadyStateError):
        steady_state(assemble(m))


def test_steady_state_derivative_matches_finite_difference():
    def Lb(th):
        return assemble(build_tls(TlsParams(th, 0.8, 1.0)))

    d = steady_state_derivative(Lb, 0.3)
    h = 1e-5
    fd = (steady_state(Lb(0.3 + h)).matrix - steady_state(Lb(0.3 - h)).matrix) / (2 * h)
    assert np.allclose(d, fd, atol=1e-8)


def test_tls_gap_and_no_metastability():
    Om = 0.7
    L = assemble(build_tls(TlsParams(0.0, Om, 1.0)))
    # Mollow eigenvalues: -1/2 and -3/4 +- i sqrt(4 Om^2 - 1/16)
    assert np.isclose(liouvillian_gap(L), 0.5)
    rep, _ = metastability(spectral_decomposition(L), StateMatrix.pure((2,), [1, 0]))
    assert rep.cluster_index == 1 and not rep.metastable


def test_lambda_metastability_closes_with_GammaV():
    p = LambdaParams(0.0, 0.0, 1.0, 0.01, 1e-5, GammaV=1e-5)
    rep, _ = metastability(spectral_decomposition(assemble(build_lambda(p))), StateMatrix.pure((3,), [1, 0, 0]))
    assert rep.cluster_index == 1


def test_spectral_evolution_matches_expm():
    rng = np.random.default_rng(3)
    m = random_model(rng, dims=(3,))
    L = assemble(m)
    dec = spectral_decomposition(L)
    r0 = random_state(rng, 3)
    ref = (sla.expm(L.dense() * 1.3) @ r0.ravel()).reshape(3, 3)
    assert np.allclose(dec.evolve(r0, 1.3), ref, atol=1e-10)
