"""Analytic oracles and effective models for driven and cavity-coupled emitters.

Closed forms are evaluated in the laser frame used by
:func:`collective_qo.models.build_driven_dimer`. Dissipators written as
``Gamma D[L]`` with ``D[L] rho = 2 L rho L^dag - {L^dag L, rho}`` map onto a
:class:`~collective_qo.models.Channel` of rate ``2 Gamma``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace
from typing import Mapping

import numpy as np

from .errors import NumericalError, ValidationError
from .liouville import Superoperator, assemble
from .models import (CavityParams, Channel, DimerParams, LambdaParams, SystemModel, build_driven_dimer,
                     excitonic, excitonic_states)

MARGIN = 3.0        # ratio that operationalizes "much larger than"
WEAK_DRIVE = 0.2    # Omega/R above which the perturbative dimer models are flagged


def _warn(msg: str):
    warnings.warn(msg, RuntimeWarning, stacklevel=3)


# ---------------------------------------------------------------------------
# two-photon parameters

@dataclass(frozen=True)
class TwoPhotonParams:
    """Two-photon drive parameters of a weakly driven dimer.

    ``Omega_2p`` is signed (``-2 Omega^2 cos(beta)/R``); formulas built on
    the cavity-assisted mechanisms use its magnitude. ``E`` holds the dressed
    energies E1..E4 and ``omega`` the six sideband frequencies.
    """

    beta: float
    R: float
    Omega_2p: float
    lamb_shift: float
    Omega_2PS: float
    Omega_v: float
    E: tuple
    omega: tuple

    @property
    def Omega_2p_abs(self) -> float:
        return abs(self.Omega_2p)


def two_photon_params(Omega: float, J: float, delta: float, gamma: float = 1.0) -> TwoPhotonParams:
    """Two-photon Rabi frequency, saturation amplitude, visibility threshold and sidebands.

    ``Omega_2PS`` is ``inf`` when ``cos(beta) <= 0``. The visibility
    threshold tends to ``gamma/2`` when ``gamma << R tan(beta)``.
    """
    ex = excitonic(J, delta, gamma)
    b, R = ex.beta, ex.R
    cb = np.cos(b)
    O2p = -2 * Omega**2 * cb / R
    if abs(cb) < 1e-15:
        O2p = 0.0
    O2PS = 0.5 * np.sqrt(R * gamma / cb) if cb > 1e-15 else np.inf
    Ov = R * np.sqrt(2 / (np.tan(b) ** 2 + 8 * R**2 / gamma**2)) if abs(cb) > 1e-15 else gamma / 2
    E1 = R + 2 * (cb + 1) * Omega**2 / R
    E2 = 0.0
    E3 = -4 * Omega**2 * cb / R
    E4 = -R + 2 * (cb - 1) * Omega**2 / R
    w = (E1 - E4, E1 - E3, E1 - E2, E2 - E4, E3 - E4, E2 - E3)
    return TwoPhotonParams(b, R, float(O2p), float(O2p), float(O2PS), float(Ov),
                           (E1, E2, E3, E4), tuple(float(x) for x in w))


# ---------------------------------------------------------------------------
# Models 2P and 1P

@dataclass(frozen=True)
class Model2P:
    """Three-level cascade |gg> -> |+>,|-> -> |ee> at two-photon resonance."""

    rho_ee: float
    rho_pp: float
    rho_mm: float
    rho_gg: float
    rho_gg_ee: complex


@dataclass(frozen=True)
class Model1P:
    """Vee model of the one-photon resonances |gg> <-> |+>, |->."""

    rho_pp: float
    rho_mm: float
    rho_pm: float
    rho_ee: float


def _check_weak(p: DimerParams, R: float):
    if abs(p.Omega) > WEAK_DRIVE * R:
        _warn(f"Omega = {p.Omega} exceeds R/5 = {R / 5}; the perturbative dimer models are unreliable")


def model_2p_steady(params: DimerParams) -> Model2P:
    """Steady state of the two-photon cascade model.

    The |gg><ee| coherence is the stationary solution of the three-level
    system |gg>, |ee> and the symmetric state with the latter eliminated.
    """
    ex = excitonic(params.J, params.delta, params.gamma, params.gamma12)
    _check_weak(params, ex.R)
    R, cb, g, D, O = ex.R, np.cos(ex.beta), params.gamma, params.Delta, params.Omega
    O2p = 2 * O**2 * cb / R
    ree = O2p**2 / (g**2 + 4 * D**2 + 4 * O2p**2)
    den = R**2 * (g**2 + 4 * D**2) + 16 * O**4 * cb**2
    gg_ee = 2 * R * (-1j * g + 2 * D) * O**2 * cb / den
    return Model2P(float(ree), float(ree), float(ree), float(1 - 3 * ree), complex(gg_ee))


def model_1p_steady(params: DimerParams) -> Model1P:
    """Steady state of the one-photon Vee model; ``rho_ee`` is the factorized product."""
    ex = excitonic(params.J, params.delta, params.gamma, params.gamma12, params.Omega)
    _check_weak(params, ex.R)
    b, R, g, D, O = ex.beta, ex.R, params.gamma, params.Delta, params.Omega
    cb, sb = np.cos(b), np.sin(b)
    xp = ex.gamma_plus**2 + 4 * (D + R) ** 2 + 8 * ex.Omega_plus**2
    xm = ex.gamma_minus**2 + 4 * (D - R) ** 2 + 8 * ex.Omega_minus**2
    chi = (2 * (g**2 * D**2 + (D**2 + 2 * O**2) ** 2) + g**2 * R**2 * np.cos(2 * b)
           + R**2 * (g**2 - 4 * D**2 + 8 * O**2) + 2 * R**4 - 4 * D * R * cb * (g**2 + 4 * O**2))
    rpp = 4 * ex.Omega_plus**2 / xp
    rmm = 4 * ex.Omega_minus**2 / xm
    rpm = 2 * O**2 * sb * (D**2 - R**2 - 2 * O**2) / chi
    return Model1P(float(rpp), float(rmm), float(rpm), float(rpp * rmm))


@dataclass(frozen=True)
class IntensityAnalytics:
    """Total emitted intensity ``<X^dag X>`` and its one- and two-photon parts."""

    I: float
    I1: float
    I2: float
    V_2p: float
    g2: float


def intensity_analytics(params: DimerParams) -> IntensityAnalytics:
    """Intensity, visibility and zero-delay correlation from Models 1P and 2P.

    ``I = 2 rho_ee + rho_++ + rho_-- + cos(beta)(rho_++ - rho_--) + 2 sin(beta) Re rho_+-``
    with populations summed over both models and ``rho_ee`` the sum of the
    two-photon and factorized one-photon parts. ``g2`` is ``nan`` when the
    intensity is below 1e-14.
    """
    ex = excitonic(params.J, params.delta, params.gamma, params.gamma12)
    cb, sb = np.cos(ex.beta), np.sin(ex.beta)
    m2 = model_2p_steady(params)
    m1 = model_1p_steady(params)
    I2 = 4 * m2.rho_ee
    I1 = m1.rho_pp + m1.rho_mm + cb * (m1.rho_pp - m1.rho_mm) + 2 * sb * m1.rho_pm + 2 * m1.rho_ee
    I = I1 + I2
    ree = m2.rho_ee + m1.rho_ee
    g2 = 4 * ree / I**2 if I >= 1e-14 else float("nan")
    V = I2 / I1 if I1 > 0 else float("inf")
    return IntensityAnalytics(float(I), float(I1), float(I2), float(V), float(g2))


# ---------------------------------------------------------------------------
# cavity elimination

def _dimer_part(dimer_cavity: SystemModel):
    if dimer_cavity.meta.get("kind") != "dimer_cavity":
        raise ValidationError("expected a model built by build_dimer_cavity")
    return dimer_cavity.meta["params"], dimer_cavity.meta["cavity"]


def nakajima_elimination(dimer_cavity: SystemModel, dressed=None) -> Superoperator:
    """Second-order elimination of a bad cavity into Bloch-Redfield terms.

    Adds ``sum g_ij g_mn^* / (kappa/2 + i(Delta_a - w_ij)) [s_ij rho, s_mn^dag] + h.c.``
    to the emitter Liouvillian, where ``s_ij = |j><i|`` are transitions
    between eigenstates of the driven dimer Hamiltonian, ``w_ij`` their
    frequencies and ``g_ij = g <j|s1 + s2|i>``. The result need not be of
    Lindblad form.

    Parameters
    ----------
    dimer_cavity : SystemModel
        Model from :func:`collective_qo.models.build_dimer_cavity`.
    dressed : tuple of (eigenvalues, eigenvectors), optional
        Eigensystem of the dimer Hamiltonian; computed with ``eigh`` if omitted.
    """
    p, cav = _dimer_part(dimer_cavity)
    dimer = build_driven_dimer(p)
    H = dimer.hamiltonian.matrix
    if not (cav.kappa >= MARGIN * abs(cav.g) and abs(cav.g) >= MARGIN * p.gamma):
        _warn(f"bad-cavity ordering kappa >> g >> gamma violated (kappa={cav.kappa}, g={cav.g}, gamma={p.gamma})")
    if dressed is None:
        lam, V = np.linalg.eigh(H)
    else:
        lam, V = (np.asarray(x) for x in dressed)
        if np.linalg.matrix_rank(V) < V.shape[0]:
            raise NumericalError("dressed eigenvectors do not form a basis")
    X = dimer.op("sigma1") + dimer.op("sigma2")
    Vinv = np.linalg.inv(V)
    Xe = Vinv @ X @ V                       # Xe[j, i] = <j|X|i>
    w = lam[:, None] - lam[None, :]         # w[i, j] = lam_i - lam_j
    Ae = cav.g * Xe / (cav.kappa / 2 + 1j * (cav.Delta_a - w.T))
    A = V @ Ae @ Vinv
    B = cav.g * X
    d = H.shape[0]
    eye = np.eye(d)
    Ad, Bd = A.conj().T, B.conj().T
    K = (np.kron(A, B.conj()) + np.kron(B, A.conj()) - np.kron(Bd @ A, eye) - np.kron(eye, (Ad @ B).T))
    L0 = assemble(dimer, sparse=False)
    return Superoperator(d, L0.dense() + K, dimer.space)


def collective_purcell(dimer_cavity: SystemModel) -> SystemModel:
    """Dimer with the cavity replaced by collective decay ``Gamma_P = 4 g^2/kappa`` through ``s1 + s2``."""
    p, cav = _dimer_part(dimer_cavity)
    dimer = build_driven_dimer(p)
    R = float(np.hypot(p.J, p.delta))
    if cav.kappa < MARGIN * max(R, abs(p.Omega)):
        _warn(f"kappa = {cav.kappa} is not much larger than R = {R} and Omega = {p.Omega}")
    X = dimer.op("sigma1") + dimer.op("sigma2")
    GP = 4 * cav.g**2 / cav.kappa
    m = dimer.with_terms(channels=[Channel(X, X, GP, label="purcell")], Gamma_P=GP)
    return replace(m, meta={**m.meta, "kind": "dimer_purcell", "cavity": cav})


def freq_resolved_jump_ops(beta: float, Gamma_P: float, branch: str) -> Channel:
    """Frequency-resolved cavity jump operator for a cavity tuned to one dimer transition.

    ``branch="A"``: ``xi = |gg><+| - (beta/2)|-><ee|``; ``branch="S"``:
    ``xi = -|+><ee| + (beta/2)|gg><-|``. The returned channel realizes
    ``Gamma_P D[xi]`` and acts on the dimer basis (gg, ge, eg, ee).
    """
    plus, minus = excitonic_states(beta)
    gg, ee = np.eye(4)[0], np.eye(4)[3]
    op = lambda u, v: np.outer(u, v.conj())  # noqa: E731
    if branch == "A":
        xi = op(gg, plus) - 0.5 * beta * op(minus, ee)
    elif branch == "S":
        xi = -op(plus, ee) + 0.5 * beta * op(gg, minus)
    else:
        raise ValidationError(f"branch must be 'S' or 'A', got {branch!r}")
    if abs(beta) > 0.3:
        _warn(f"beta = {beta} is not small; the frequency-resolved expansion is unreliable")
    return Channel(xi, xi, 2 * Gamma_P, label=f"xi_{branch}")


def freq_resolved_model(params: DimerParams, Gamma_P: float, branch: str) -> SystemModel:
    """Driven dimer plus the frequency-resolved cavity channel of ``branch``."""
    ex = excitonic(params.J, params.delta, params.gamma, params.gamma12)
    dimer = build_driven_dimer(params)
    return dimer.with_terms(channels=[freq_resolved_jump_ops(ex.beta, Gamma_P, branch)], Gamma_P=Gamma_P)


# ---------------------------------------------------------------------------
# HAE for the Lambda system

def _lambda_core(p: LambdaParams):
    if p.Delta1 != 0 or p.Delta2 != 0 or p.GammaV != 0:
        _warn("closed forms assume Delta1 = Delta2 = 0 and GammaV = 0")
    return p.Omega, p.Gamma, p.DeltaV


def lambda_steady_state(params: LambdaParams) -> np.ndarray:
    """Exact steady state of the Lambda system on (|1>, |2>, |V>)."""
    O, G, D = _lambda_core(params)
    den = 2 * G**2 * O**2 + G**2 * D**2 + 12 * O**4
    r = np.array([
        [G**2 * O**2 + G**2 * D**2 + 4 * O**4, -2j * G * O**2 * D, -G * O * (G * D - 2j * O**2)],
        [2j * G * O**2 * D, 4 * O**4, -2j * G * O**3],
        [-G * O * (G * D + 2j * O**2), 2j * G * O**3, O**2 * (G**2 + 4 * O**2)],
    ], dtype=complex)
    return r / den


@dataclass(frozen=True)
class HaeSolution:
    """Hierarchical adiabatic elimination of the Lambda system.

    ``rho_ss`` is the exact stationary state, ``rho22_MM`` and ``rho12_MM``
    the metastable plateau of the effective two-level system driven at
    ``Omega_2p = Omega^2/DeltaV``.
    """

    params: LambdaParams
    Gamma_c: float
    Gamma_c_approx: float
    Omega_2p: float
    rho_ss: np.ndarray
    rho22_MM: float
    rho12_MM: complex
    chi: float

    def short_time(self, t):
        """Metastable transients ``(rho22, rho12)`` of the effective two-level system."""
        t = np.asarray(t, dtype=float)
        G, O2 = self.params.Gamma, self.Omega_2p
        k = 0.5 * np.sqrt(complex(G**2 / 4 - 16 * O2**2))
        if abs(k) < 1e-12 * G:
            k = 1e-12 * G
        e = np.exp(-0.75 * G * t)
        ch, sh = np.cosh(k * t), np.sinh(k * t)
        r22 = self.rho22_MM * (1 - e * (ch + 0.75 * G / k * sh))
        r12 = self.rho12_MM * (1 - e * (ch + (k / G + 3 * G / (16 * k)) * sh))
        return np.real(r22), r12

    def rho_VV(self, t):
        t = np.asarray(t, dtype=float)
        return self.rho_ss[2, 2].real * (1 - np.exp(-self.Gamma_c * t))

    def long_time(self, t):
        """Slow evolution ``(rho_VV, rho22, rho12)`` with the real subspace slaved to ``rho_VV``."""
        O, G, D = self.params.Omega, self.params.Gamma, self.params.DeltaV
        vv = self.rho_VV(t)
        chi = self.chi
        r22 = 16 * O**4 * (D**2 + O**2) / chi + 4 * (G**2 * D**2 * O**2 - 4 * O**4 * (D**2 + O**2)) / chi * vv
        a = -2 * O**2 * (1j * G * D * (G**2 + 4 * D**2) + 2 * G * O**2 * (G + 4j * D) + 8 * O**4) / chi
        b = 4 * O**2 * (2 * G * O**2 * (G + 4j * D) + G * D * (G + 1j * D) * (2 * D + 1j * G) + 12 * O**4) / chi
        return vv, r22, a + b * vv


def hae_lambda(params: LambdaParams) -> HaeSolution:
    """Closed-form relaxation rates and element dynamics of the Lambda system.

    Valid for ``DeltaV >> Omega, Gamma``; the approximate rate additionally
    needs ``Omega^2/DeltaV >> Gamma``.
    """
    O, G, D = _lambda_core(params)
    if abs(D) < MARGIN * max(abs(O), G):
        _warn(f"DeltaV = {D} is not much larger than Omega = {O} and Gamma = {G}")
    chi = G**4 * D**2 + 32 * O**4 * (D**2 + O**2) + 4 * G**2 * (D**4 + 3 * D**2 * O**2 + O**4)
    Gc = 4 * (12 * G * O**6 + G**3 * O**2 * (D**2 + 2 * O**2)) / chi
    O2p = O**2 / D
    return HaeSolution(params, float(Gc), float(1.5 * G * O**2 / D**2), float(O2p), lambda_steady_state(params),
                       float(4 * O2p**2 / (G**2 + 8 * O2p**2)), complex(-2j * G * O2p / (G**2 + 8 * O2p**2)),
                       float(chi))


def metastable_concurrence(Omega_2p: float, Gamma: float) -> float:
    """Concurrence ``2|rho12| - rho_VV`` of the metastable plateau, with ``rho_VV`` neglected."""
    return float(4 * Gamma * abs(Omega_2p) / (Gamma**2 + 8 * Omega_2p**2))


def chiral_tau_hae(Omega: float, delta: float, Delta_gamma: float, Gamma: float) -> float:
    """Entanglement formation time of two emitters on a chiral waveguide, valid for ``Omega >> delta, Delta_gamma``."""
    den = Gamma * (4 * delta**2 + Delta_gamma**2)
    return float(24 * Omega**2 / den) if den > 0 else float("inf")


# ---------------------------------------------------------------------------
# mechanism analytics

@dataclass(frozen=True)
class AnalyticsEntry:
    value: float
    valid: bool
    kind: str = "value"     # "probability", "rate", "time" or "value"


@dataclass(frozen=True)
class AnalyticsReport:
    """Named closed-form values, each with the flag of its validity regime."""

    entries: Mapping[str, AnalyticsEntry] = field(default_factory=dict)

    def __post_init__(self):
        for name, e in self.entries.items():
            v = e.value
            if not np.isfinite(v):
                continue
            if e.kind == "probability" and not (-1e-12 <= v <= 1 + 1e-12):
                raise NumericalError(f"{name} = {v} is not a probability")
            if e.kind in ("rate", "time") and v < -1e-12:
                raise NumericalError(f"{name} = {v} is negative")

    def __getitem__(self, name: str) -> float:
        return self.entries[name].value

    def __contains__(self, name: str) -> bool:
        return name in self.entries

    def valid(self, name: str) -> bool:
        return self.entries[name].valid

    def as_dict(self) -> dict:
        return {k: (e.value, e.valid) for k, e in self.entries.items()}


def _ge(a: float, b: float) -> bool:
    return a >= MARGIN * b


def mechanism_analytics(params: DimerParams, cavity: CavityParams | None = None, *,
                        lambda_params: LambdaParams | None = None, chiral: tuple | None = None) -> AnalyticsReport:
    """Evaluate every closed form that the given parameters allow.

    Cavity-assisted entries need ``cavity``; pumped entries use ``params.P``.
    ``lambda_params`` adds the Lambda-system relaxation rates and ``chiral``
    ``(Omega, delta, Delta_gamma, Gamma)`` the chiral-waveguide time.
    """
    p = params
    ex = excitonic(p.J, p.delta, p.gamma, p.gamma12, p.Omega)
    b, R, g, O, P, J, d = ex.beta, ex.R, p.gamma, p.Omega, p.P, abs(p.J), abs(p.delta)
    cb = np.cos(b)
    out: dict[str, AnalyticsEntry] = {}

    def put(name, value, valid, kind="value"):
        out[name] = AnalyticsEntry(float(np.real(value)), bool(valid), kind)

    weak = abs(O) <= WEAK_DRIVE * R and g <= WEAK_DRIVE * R
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        m2, m1, ia = model_2p_steady(p), model_1p_steady(p), intensity_analytics(p)
    put("rho2p_ee", m2.rho_ee, weak, "probability")
    put("rho2p_gg_ee_abs", abs(m2.rho_gg_ee), weak, "probability")
    put("rho1p_pp", m1.rho_pp, weak, "probability")
    put("rho1p_mm", m1.rho_mm, weak, "probability")
    put("rho1p_pm", m1.rho_pm, weak)
    put("rho1p_ee", m1.rho_ee, weak, "probability")
    for k in ("I", "I1", "I2", "V_2p", "g2"):
        put(k, getattr(ia, k), weak)
    O2p = 2 * O**2 * abs(cb) / R

    put("delta_max_III", O * np.sqrt(2 * (1 + np.sqrt(5)) * J / g), _ge(O * np.sqrt(2 * (1 + np.sqrt(5)) * J / g), J), "rate")

    if cavity is not None:
        kap, gc = cavity.kappa, cavity.g
        GP = 4 * gc**2 / kap
        C = 4 * gc**2 / (kap * g)
        put("Gamma_P", GP, True, "rate")
        put("C", C, True)
        gp, gm = ex.gamma_plus, ex.gamma_minus
        frI = C > 1 and _ge(J, kap) and _ge(kap, GP)
        GIA = b**2 * GP / 2
        put("rho_A_ss_coh", GIA / (GIA + gm), frI, "probability")
        put("tau_A_coh", 4 / (b**2 * GP) if b != 0 else np.inf, frI, "time")
        PS = 2 * O2p**2 / GP
        put("rho_S_ss_coh", 1 / (1 + gp * (1 / PS + 1 / GP)) if PS > 0 else 0.0, frI, "probability")
        root = np.sqrt(complex(1 - (2 * O2p / GP) ** 2)).real
        put("tau_S_coh", (2 / GP) / (1 - root) if root < 1 else np.inf, frI, "time")
        incoh = frI and P > 0 and _ge(GP, P) and _ge(P, g)
        if P > 0:
            put("rho_S_ss_incoh", 1 / (1 + P / (2 * GP) + gp / P + GP / (8 * P) * (kap / J) ** 2) if J > 0 else 0.0,
                incoh, "probability")
            put("tau_S_incoh", 1 / (P + GP - np.sqrt(GP**2 + P * gp)), incoh, "time")
        put("P_opt", 0.5 * GP * np.sqrt((kap / J) ** 2 + 16 / C) if J > 0 else np.inf, frI, "rate")
        GS = g + p.gamma12 + 2 * GP
        regII = _ge(kap, max(R, abs(O))) and _ge(abs(O), d)
        put("Gamma_eff_II", 4 * GS * d**2 / (GS**2 + 24 * O**2), regII, "rate")
        put("rho_A_ss_II", 2 * O**2 / (d**2 + 2 * O**2) if O != 0 else 0.0, regII, "probability")
        put("Gamma_A_eff_ringdown", g + 4 * d**2 / GS, _ge(kap, R) and _ge(GS, d), "rate")
        regIV = _ge(kap, R) and _ge(J, d) and P > 0 and _ge(GP, P) and _ge(P, g)
        put("rho_A_ss_IV", 2 * (GP + g) ** 2 / (P**2 + 3 * P * (GP + g) + 4 * (GP + g) ** 2), regIV, "probability")
        reg1p = _ge(kap, max(R, abs(O))) and weak
        for s, name in ((1, "rho_pp_eff_1p"), (-1, "rho_mm_eff_1p")):
            Gs = g + s * p.gamma12 * cb + (1 + s * cb) * GP
            Os2 = O**2 * (1 + s * cb)
            put(name, 4 * Os2 / (Gs**2 + 4 * (p.Delta + s * R) ** 2 + 8 * Os2), reg1p, "probability")

    if lambda_params is not None:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            h = hae_lambda(lambda_params)
        lp = lambda_params
        okV = _ge(abs(lp.DeltaV), max(abs(lp.Omega), lp.Gamma))
        put("Gamma_c", h.Gamma_c, okV, "rate")
        put("Gamma_c_approx", h.Gamma_c_approx, okV and _ge(abs(h.Omega_2p), lp.Gamma), "rate")
    if chiral is not None:
        Oc, dc, dg, Gc = chiral
        put("tau_HAE_chiral", chiral_tau_hae(Oc, dc, dg, Gc), _ge(abs(Oc), max(abs(dc), abs(dg))), "time")
    return AnalyticsReport(out)


# ---------------------------------------------------------------------------
# classifier

@dataclass(frozen=True)
class Condition:
    """One tabulated inequality: the ratio that tests it, whether it holds and whether it holds strongly."""

    ratio: float
    holds: bool
    strong: bool


@dataclass(frozen=True)
class Classification:
    labels: frozenset
    strong_labels: frozenset
    conditions: Mapping[str, Mapping[str, Condition]]


def _much(a: float, b: float) -> Condition:
    r = a / b if b > 0 else np.inf
    return Condition(float(r), r > 1, r >= MARGIN)


def _roughly_ge(a: float, b: float) -> Condition:
    r = a / b if b > 0 else np.inf
    return Condition(float(r), r >= 1 / MARGIN, r >= 1)


def _near(x: float, target: float, width: float) -> Condition:
    r = abs(x - target) / width if width > 0 else (0.0 if x == target else np.inf)
    return Condition(float(r), r <= 1, r <= 1 / MARGIN)


def _within_factor(a: float, b: float) -> Condition:
    r = a / b if b > 0 else np.inf
    dev = max(r, 1 / r) if r > 0 else np.inf
    return Condition(float(r), dev <= MARGIN, dev <= np.sqrt(MARGIN))


def mechanism_classifier(params: DimerParams, cavity: CavityParams | None = None) -> Classification:
    """Which entanglement mechanisms the parameters support.

    "Much larger" holds when the ratio exceeds 1 and is strong at a ratio of
    3. "Larger or comparable" holds down to a ratio of 1/3 and is strong at 1.
    Resonance conditions hold within one cavity linewidth. Every row reports
    its ratios.
    """
    p = params
    if p.J == 0 and p.delta == 0:
        R, b = 0.0, 0.0
    else:
        ex = excitonic(p.J, p.delta, p.gamma, p.gamma12)
        R, b = ex.R, ex.beta
    O, g, J, d, P = abs(p.Omega), p.gamma, abs(p.J), abs(p.delta), p.P
    O2p = 2 * O**2 * abs(np.cos(b)) / R if R > 0 else 0.0
    rows: dict[str, dict[str, Condition]] = {}
    if cavity is not None:
        kap, Da = cavity.kappa, cavity.Delta_a
        GP = 4 * cavity.g**2 / kap
        C = 4 * cavity.g**2 / (kap * g)
        GS = g + p.gamma12 + 2 * GP
        GA = g - p.gamma12
        base_I = {
            "C>1": _much(C, 1.0),
            "R>>kappa": _much(R, kap),
            "R>>delta": _much(R, d) if d > 0 else Condition(np.inf, True, True),
            "R>>Omega": _much(R, O),
            "kappa>~Omega_2p": _roughly_ge(kap, O2p),
            "J>~kappa": _roughly_ge(J, kap),
        }
        rows["I_A"] = {**base_I, "Delta_a~R": _near(Da, R, kap)}
        rows["I_S"] = {**base_I, "Delta_a~-R": _near(Da, -R, kap)}
        Geff = 4 * GS * d**2 / (GS**2 + 24 * O**2)
        rows["II"] = {
            "kappa>>R": _much(kap, R),
            "kappa>>Omega": _much(kap, O),
            "Omega>>delta": _much(O, d) if d > 0 else Condition(np.inf, True, True),
            "Gamma_eff>>Gamma_A": _much(Geff, GA) if GA > 0 else Condition(np.inf, True, True),
        }
        rows["III_cav"] = {
            "delta>~J": _roughly_ge(d, J),
            "kappa<J": Condition(float(kap / J) if J > 0 else np.inf, kap < J, kap * MARGIN <= J),
            "Omega<=R": Condition(float(O / R) if R > 0 else np.inf, O <= R, O * MARGIN <= R),
            "C>1": _much(C, 1.0),
        }
        rows["IV"] = {
            "kappa>>R": _much(kap, R),
            "J>>delta": _much(J, d) if d > 0 else Condition(np.inf, True, True),
            "Gamma_P>>P": _much(GP, P) if P > 0 else Condition(0.0, False, False),
            "P>>gamma": _much(P, g),
        }
        rows["V"] = {
            "J>~kappa": _roughly_ge(J, kap),
            "J>~Omega_2p": _roughly_ge(J, O2p),
            "Delta_a~+-2Omega_2p": _near(abs(Da), 2 * O2p, kap),
            "C>1": _much(C, 1.0),
        }
    if O > 0 and R > 0:
        rows["III_sp"] = {
            "delta>~J": _roughly_ge(d, J),
            "Omega_2p~gamma": _within_factor(O2p, g),
            "R>>Omega": _much(R, O),
        }
        if cavity is not None:
            rows["III_sp"]["kappa<J"] = Condition(float(cavity.kappa / J) if J > 0 else np.inf,
                                                  cavity.kappa < J, cavity.kappa * MARGIN <= J)
    labels = frozenset(k for k, r in rows.items() if all(c.holds for c in r.values()))
    strong = frozenset(k for k, r in rows.items() if all(c.strong for c in r.values()))
    return Classification(labels, strong, rows)
