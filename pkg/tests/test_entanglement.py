import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import unitary_group

from collective_qo.entanglement import (coherent_moments, concurrence, fidelity_and_herald, log_negativity,
                                        moments_from_state, partial_transpose, witnesses)
from collective_qo.errors import HeraldImpossibleError, ValidationError
from collective_qo.hilbert import SpaceDescriptor, StateMatrix

from conftest import random_state

SP = SpaceDescriptor((2, 2))
BELL = np.array([0, 1, 1, 0]) / np.sqrt(2)


def test_bell_and_product_states():
    bell = StateMatrix.pure(SP, BELL)
    assert np.isclose(concurrence(bell), 1)
    assert np.isclose(log_negativity(bell)[1], 1)
    prod = StateMatrix.pure(SP, np.kron([1, 0], [0.6, 0.8]))
    assert concurrence(prod) < 1e-9
    assert log_negativity(prod)[1] < 1e-9


def test_werner_threshold():
    for p, ent in ((0.2, False), (0.5, True)):
        r = p * np.outer(BELL, BELL) + (1 - p) * np.eye(4) / 4
        assert (concurrence(r) > 1e-9) == ent
        # two qubits: PPT criterion agrees with concurrence
        assert (log_negativity(StateMatrix(SP, r))[1] > 1e-9) == ent


def test_concurrence_shape_check():
    with pytest.raises(ValidationError):
        concurrence(np.eye(3) / 3)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_local_unitary_invariance(seed):
    rng = np.random.default_rng(seed)
    r = random_state(rng, 4)
    U = np.kron(unitary_group.rvs(2, random_state=seed % 1000), unitary_group.rvs(2, random_state=seed % 997 + 1))
    r2 = U @ r @ U.conj().T
    assert abs(concurrence(r) - concurrence(r2)) < 1e-8
    assert abs(log_negativity(StateMatrix(SP, r))[1] - log_negativity(StateMatrix(SP, r2))[1]) < 1e-8


def test_partial_transpose_involution():
    r = random_state(np.random.default_rng(4), 6)
    assert np.allclose(partial_transpose(partial_transpose(r, (2, 3)), (2, 3)), r)


def test_fidelity_and_herald():
    rho = StateMatrix(SP, 0.5 * np.outer(BELL, BELL) + 0.5 * np.diag([1.0, 0, 0, 0]))
    # heralding on a two-qubit "any excitation" projector removes the ground-state part
    h = np.diag([0.0, 1, 1, 1])
    F, FH = fidelity_and_herald(rho, BELL, herald=h)
    assert np.isclose(F, 0.5) and np.isclose(FH, 1.0)
    with pytest.raises(HeraldImpossibleError):
        fidelity_and_herald(StateMatrix(SP, np.diag([1.0, 0, 0, 0])), BELL, herald=h)


def test_witnesses_classical_limit():
    w = witnesses(coherent_moments(0.3, 0.5j))
    assert np.isclose(w.R_csi, 1) and not w.csi_violated
    assert not w.bell_violated


def test_moments_of_vacuum():
    vac = np.zeros((9, 9))
    vac[0, 0] = 1
    m = moments_from_state(vac, (3, 3))
    assert m["n1"] == 0 and m["n12"] == 0
