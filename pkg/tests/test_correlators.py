import numpy as np
import pytest

from collective_qo.correlators import (FilterSpec, SensorSpec, cascaded_attach, emission_spectrum, filter_overlap,
                                       ringdown, sensor_correlations, spectrum_components, two_mode_capture,
                                       two_time)
from collective_qo.entanglement import log_negativity
from collective_qo.errors import NumericalError, ValidationError
from collective_qo.hilbert import partial_trace
from collective_qo.liouville import assemble, steady_state
from collective_qo.models import CavityParams, DimerParams, TlsParams, build_dimer_cavity, build_tls


def test_spectrum_normalization_and_elastic_weight():
    Om = 0.3
    m = build_tls(TlsParams(0.0, Om, 1.0))
    om = np.linspace(-200, 200, 40001)
    sc = emission_spectrum(m, "sigma", om, 0.0)
    # coherent fraction |<s>|^2/<s^dag s> = 1/(1 + 8 Om^2)
    assert np.isclose(sc.elastic_weight, 1 / (1 + 8 * Om**2))
    assert abs(sc.integrated_weight() - 1) < 2e-3


def test_spectrum_components_reconstruct_density():
    m = build_tls(TlsParams(0.5, 2.0, 1.0))
    om = np.linspace(-10, 10, 201)
    pos, hw, a, b = spectrum_components(m, "sigma")
    S = np.sum((a * hw + b * (om[:, None] - pos)) / (np.pi * ((om[:, None] - pos) ** 2 + hw**2)), axis=1)
    assert np.allclose(S, emission_spectrum(m, "sigma", om, 0.0).inelastic_density, atol=1e-10)


def test_undriven_spectrum_raises():
    with pytest.raises(NumericalError):
        emission_spectrum(build_tls(TlsParams(0.0, 0.0, 1.0)), "sigma", [0.0])


def test_sensor_reproduces_filtered_spectrum():
    m = build_tls(TlsParams(0.0, 3.0, 1.0))
    G = 0.5
    for D in (0.0, 6.0):
        r = sensor_correlations(m, "sigma", [SensorSpec(D, G)], order=1)
        ref = emission_spectrum(m, "sigma", [D], G / 2).total[0]
        assert abs(r.S[0] / ref - 1) < 1e-2
    with pytest.raises(ValidationError):
        SensorSpec(0.0, 0.0)


def test_tls_antibunching_through_broad_sensor():
    r = sensor_correlations(build_tls(TlsParams(0.0, 0.5, 1.0)), "sigma", [SensorSpec(0.0, 200.0)])
    assert r.g2 < 0.05


def test_cascade_leaves_source_untouched():
    src = build_tls(TlsParams(0.3, 1.2, 1.0))
    rho_src = steady_state(assemble(src)).matrix
    casc = cascaded_attach(src, SensorSpec(0.5, 1.0, 1.0), n_levels=3)
    rho = steady_state(assemble(casc))
    assert np.allclose(partial_trace(rho, [0]).matrix, rho_src, atol=1e-10)


def test_filter_overlap_orthogonality():
    T = 2.0
    f1 = FilterSpec(T, 0.0, 0.0)
    assert np.isclose(abs(filter_overlap(f1, f1)), 1)
    assert abs(filter_overlap(f1, FilterSpec(T, 0.0, 2 * np.pi / T))) < 1e-12
    assert abs(filter_overlap(f1, FilterSpec(T, T, 0.0))) < 1e-12


def test_ringdown_of_a_coherent_cavity():
    # empty cavity prepared in the driven steady state: n_T equals the stored photon number
    m = build_dimer_cavity(DimerParams(1.0, 0.0, 1.0, 0.0, 0.0, 0.0), CavityParams(0.0, 2.0, 0.0, 3))
    a = m.op("a")
    driven = m.with_terms(hamiltonian=0.2 * (m.labels["a"] + m.labels["a"].dag))
    rho = steady_state(assemble(driven))
    r = ringdown(m, rho)
    nbar = np.trace(a.conj().T @ a @ rho.matrix).real
    assert np.isclose(r.n_T, nbar, rtol=1e-6)
    assert np.isclose(r.g_T2, 1.0, atol=2e-2)


def test_two_time_coherence_decay():
    m = build_tls(TlsParams(0.0, 0.0, 1.0))
    s = m.op("sigma")
    tau = np.linspace(0, 4, 9)
    c = two_time(assemble(m), np.diag([0, 1.0]).astype(complex), s.conj().T, s, tau_grid=tau)
    assert np.allclose(c, np.exp(-tau / 2), atol=1e-9)


def _photon_overlap(T, Delta, gamma=1.0):
    # |int_0^T sqrt(gamma) e^{-gamma t/2} e^{-i Delta t} / sqrt(T) dt|^2
    z = gamma / 2 + 1j * Delta
    return gamma / T * abs((1 - np.exp(-z * T)) / z) ** 2


@pytest.mark.parametrize("T", [4.0, 10.0])
def test_capture_of_a_single_photon_matches_mode_overlap(T):
    src = build_tls(TlsParams(0.0, 0.0, 1.0))
    res = two_mode_capture(src, [FilterSpec(T, 0.0, 0.0), FilterSpec(T, 0.0, 2 * np.pi / T)],
                           rho0=np.diag([0, 1.0]).astype(complex))
    assert res.orthogonal and abs(res.overlap) < 1e-12
    n = res.n_trunc + 1
    p = np.real(np.diag(res.state.matrix)).reshape(n, n)
    assert abs(p[1, 0] - _photon_overlap(T, 0.0)) < 2e-3
    assert abs(p[0, 1] - _photon_overlap(T, 2 * np.pi / T)) < 2e-3


def test_capture_of_ground_state_is_vacuum():
    src = build_tls(TlsParams(0.0, 0.0, 1.0))
    res = two_mode_capture(src, [FilterSpec(5.0, 0.0, 0.0), FilterSpec(5.0, 0.0, 2 * np.pi / 5)],
                           rho0=np.diag([1.0, 0]).astype(complex))
    assert np.isclose(res.state.matrix[0, 0].real, 1)
    assert log_negativity(res.state)[1] < 1e-9


@pytest.mark.parametrize("splitting", ["digital", "physical"])
def test_capture_returns_a_state(splitting):
    src = build_tls(TlsParams(0.0, 1.0, 1.0))
    res = two_mode_capture(src, [FilterSpec(5.0, 10.0, -2.0), FilterSpec(5.0, 10.0, 2.0)], splitting=splitting)
    r = res.state.matrix
    assert np.isclose(np.trace(r).real, 1) and np.linalg.eigvalsh(r)[0] > -1e-9
    with pytest.raises(ValidationError):
        two_mode_capture(src, [FilterSpec(5.0, 0.0), FilterSpec(5.0, 0.0, 1.0)], splitting="quantum")
