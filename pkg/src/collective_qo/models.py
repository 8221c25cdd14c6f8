"""Builders for the canonical open-system models and their couplings.

All rates are in units of the single-emitter decay rate unless stated
otherwise. Every channel contributes ``(rate/2)(2 A rho B^dag - {B^dag A, rho})``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping, Optional

import numpy as np

from .errors import ValidationError
from .hilbert import Operator, SpaceDescriptor, embed, identity, make_ladder

Amplitude = Optional[Callable[[float], complex]]


# ---------------------------------------------------------------------------
# parameter containers

@dataclass(frozen=True)
class DimerParams:
    """Driven dimer parameters.

    ``delta`` is half the emitter-emitter detuning and ``Delta`` the
    laser detuning from the mean emitter frequency.
    """

    gamma: float = 1.0
    gamma12: float = 0.0
    J: float = 0.0
    delta: float = 0.0
    Delta: float = 0.0
    Omega: float = 0.0
    P: float = 0.0

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValidationError(f"gamma must be positive, got {self.gamma}")
        if abs(self.gamma12) > self.gamma * (1 + 1e-12):
            raise ValidationError(
                f"|gamma12| = {abs(self.gamma12)} exceeds gamma = {self.gamma}: "
                "the Kossakowski matrix would not be positive"
            )
        if self.P < 0:
            raise ValidationError("pump rate P must be nonnegative")


@dataclass(frozen=True)
class CavityParams:
    g: float
    kappa: float
    Delta_a: float = 0.0
    n_trunc: int = 5

    def __post_init__(self):
        if not self.kappa > 0:
            raise ValidationError(f"kappa must be positive, got {self.kappa}")
        if int(self.n_trunc) < 1:
            raise ValidationError(f"n_trunc must be >= 1, got {self.n_trunc}")


@dataclass(frozen=True)
class FreeSpaceGeometry:
    """Two parallel dipoles separated by ``r12``.

    ``orientation`` is ``"H"`` (dipoles perpendicular to the separation),
    ``"J"`` (parallel) or a float angle zeta in radians between dipole and
    separation vector.
    """

    r12: float
    k: float
    orientation: object = "H"

    def __post_init__(self):
        if not (self.r12 > 0 and self.k > 0):
            raise ValidationError("r12 and k must be positive")

    @classmethod
    def from_wavelength(cls, r12: float, wavelength: float, orientation="H"):
        return cls(r12, 2 * np.pi / wavelength, orientation)

    @property
    def cos_zeta(self) -> float:
        if self.orientation == "H":
            return 0.0
        if self.orientation == "J":
            return 1.0
        return float(np.cos(float(self.orientation)))


@dataclass(frozen=True)
class ExcitonicParams:
    beta: float
    R: float
    gamma_plus: float
    gamma_minus: float
    gamma_C: float
    Omega_plus: float
    Omega_minus: float


@dataclass(frozen=True)
class LambdaParams:
    Delta1: float = 0.0
    Delta2: float = 0.0
    DeltaV: float = 1.0
    Omega: float = 0.01
    Gamma: float = 1e-5
    GammaV: float = 0.0

    def __post_init__(self):
        if not self.Gamma > 0:
            raise ValidationError("Gamma must be positive")
        if self.GammaV < 0:
            raise ValidationError("GammaV must be nonnegative")


@dataclass(frozen=True)
class TlsParams:
    Delta_sigma: float = 0.0
    Omega_tilde: complex = 0.0
    gamma: float = 1.0

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValidationError("gamma must be positive")


@dataclass(frozen=True)
class DickeParams:
    """All-to-all coupled emitters in a cavity.

    ``cavity.Delta_a`` is the cavity-emitter detuning.
    """

    N: int
    J: float
    cavity: CavityParams
    gamma: float = 1.0
    gamma_col: float = 0.0
    P: float = 0.0

    def __post_init__(self):
        if not 2 <= int(self.N) <= 6:
            raise ValidationError(f"N must lie in 2..6, got {self.N}")
        if abs(self.gamma_col) > self.gamma * (1 + 1e-12):
            raise ValidationError("|gamma_col| exceeds gamma")


@dataclass(frozen=True, eq=False)
class Channel:
    """One dissipator term ``(rate/2) D[A, B]``.

    ``amplitude`` optionally multiplies the rate by a complex function of
    time.
    """

    A: np.ndarray
    B: np.ndarray
    rate: float
    amplitude: Amplitude = None
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "A", np.asarray(self.A, dtype=complex))
        object.__setattr__(self, "B", np.asarray(self.B, dtype=complex))

    @property
    def diagonal(self) -> bool:
        return self.A is self.B or np.array_equal(self.A, self.B)

    def coefficient(self, t: float | None = None) -> complex:
        if self.amplitude is None:
            return complex(self.rate)
        if t is None:
            raise ValidationError(f"channel {self.label!r} is time dependent")
        return self.rate * complex(self.amplitude(t))


@dataclass(frozen=True, eq=False)
class SystemModel:
    """Hamiltonian plus dissipative channels on a composite space.

    ``drives`` holds time-dependent Hamiltonian terms ``(O, f)`` that add
    ``f(t) O + conj(f(t)) O^dag``.
    """

    space: SpaceDescriptor
    hamiltonian: Operator
    channels: tuple = ()
    labels: Mapping[str, Operator] = field(default_factory=dict)
    drives: tuple = ()
    check_positivity: bool = True
    meta: Mapping[str, object] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "channels", tuple(self.channels))
        object.__setattr__(self, "drives", tuple(self.drives))
        H = self.hamiltonian.matrix
        if np.max(np.abs(H - H.conj().T), initial=0.0) > 1e-12 * max(1.0, np.max(np.abs(H))):
            raise ValidationError("Hamiltonian is not Hermitian")
        d = self.space.dim
        for ch in self.channels:
            if ch.A.shape != (d, d) or ch.B.shape != (d, d):
                raise ValidationError(f"channel {ch.label!r} has wrong shape")
        if self.check_positivity and not self.time_dependent and self.channels:
            lmin = np.linalg.eigvalsh(self.kossakowski()[1])[0]
            if lmin < -1e-9 * max(1.0, max(abs(c.rate) for c in self.channels)):
                raise ValidationError(f"channel rate matrix not positive (eigenvalue {lmin:.3e})")

    @property
    def dim(self) -> int:
        return self.space.dim

    @property
    def time_dependent(self) -> bool:
        return bool(self.drives) or any(c.amplitude is not None for c in self.channels)

    def op(self, name: str) -> np.ndarray:
        return self.labels[name].matrix

    def hamiltonian_at(self, t: float | None = None) -> np.ndarray:
        H = self.hamiltonian.matrix.copy()
        for O, f in self.drives:
            c = complex(f(t))
            H += c * O.matrix + np.conj(c) * O.matrix.conj().T
        return H

    def kossakowski(self, t: float | None = None):
        """Orthonormal operator basis and the Hermitian coefficient matrix in it.

        Channel operators are expanded in a Frobenius-orthonormal basis of
        their span, so linearly dependent families (e.g. a collective
        operator next to the local ones) are handled consistently.
        """
        ops: list[np.ndarray] = []

        def index(M):
            for i, O in enumerate(ops):
                if O is M or np.array_equal(O, M):
                    return i
            ops.append(M)
            return len(ops) - 1

        pairs = [(index(c.A), index(c.B), c.coefficient(t)) for c in self.channels]
        if not ops:
            return [], np.zeros((0, 0), dtype=complex)
        vecs = np.array([O.ravel() for O in ops])
        _, s, Vh = np.linalg.svd(vecs, full_matrices=False)
        rank = int(np.sum(s > 1e-12 * s[0]))
        Q = Vh[:rank]                   # orthonormal rows spanning the operators
        coef = vecs @ Q.conj().T        # ops[i] = sum_k coef[i, k] Q[k]
        K = np.zeros((rank, rank), dtype=complex)
        for i, j, r in pairs:
            K += r * np.outer(coef[i], coef[j].conj())
        d = self.dim
        return [q.reshape(d, d) for q in Q], K

    def jump_operators(self, t: float | None = None, tol: float = 1e-14):
        """Diagonal jump form: list of (rate, L) with the cross terms resolved."""
        basis, K = self.kossakowski(t)
        if not basis:
            return []
        w, U = np.linalg.eigh(0.5 * (K + K.conj().T))
        scale = max(1.0, float(np.max(np.abs(w))))
        if w[0] < -1e-9 * scale:
            raise ValidationError("channel rate matrix not positive; no jump unravelling exists")
        out = []
        for k in range(len(w)):
            if w[k] <= tol * scale:
                continue
            L = sum(U[i, k] * basis[i] for i in range(len(basis)))
            out.append((float(w[k]), L))
        return out

    def with_terms(self, hamiltonian=None, channels=(), labels=None, **meta) -> "SystemModel":
        H = self.hamiltonian if hamiltonian is None else self.hamiltonian + _op(self.space, hamiltonian)
        lab = dict(self.labels)
        lab.update(labels or {})
        m = dict(self.meta)
        m.update(meta)
        return replace(self, hamiltonian=H, channels=self.channels + tuple(channels), labels=lab, meta=m)


def _op(space, M) -> Operator:
    return M if isinstance(M, Operator) else Operator(space, M)


def _chan(A, B, rate, label="", amplitude=None) -> Channel:
    a = A.matrix if isinstance(A, Operator) else A
    b = B.matrix if isinstance(B, Operator) else B
    return Channel(a, b, float(rate), amplitude, label)


# ---------------------------------------------------------------------------
# couplings

def free_space_couplings(geometry: FreeSpaceGeometry, gamma1: float = 1.0, gamma2: float = 1.0):
    """Dipole-dipole coupling J and collective decay gamma12 in free space."""
    x = geometry.k * geometry.r12
    if x == 0:
        raise ValidationError("k*r12 = 0 is singular; use the small-sample (Dicke) limit")
    u2 = geometry.cos_zeta ** 2
    g = np.sqrt(gamma1 * gamma2)
    s, c = np.sin(x), np.cos(x)
    J = 0.75 * g * (-(1 - u2) * c / x + (1 - 3 * u2) * (s / x**2 + c / x**3))
    g12 = 1.5 * g * ((1 - u2) * s / x + (1 - 3 * u2) * (c / x**2 - s / x**3))
    return float(J), float(g12)


def excitonic(J: float, delta: float, gamma: float = 1.0, gamma12: float = 0.0, Omega: float = 0.0) -> ExcitonicParams:
    """Mixing angle, dipole Rabi frequency and dressed-exciton rates."""
    if J == 0 and delta == 0:
        raise ValidationError("mixing angle undefined for J = delta = 0")
    beta = float(np.arctan2(delta, J))
    R = float(np.hypot(J, delta))
    cb = np.cos(beta)
    return ExcitonicParams(
        beta=beta,
        R=R,
        gamma_plus=gamma + gamma12 * cb,
        gamma_minus=gamma - gamma12 * cb,
        gamma_C=gamma12 * np.sin(beta),
        Omega_plus=Omega * np.sqrt(1 + cb),
        Omega_minus=Omega * np.sqrt(1 - cb),
    )


def excitonic_states(beta: float):
    """|+> and |-> in the dimer basis (gg, ge, eg, ee); |eg> has emitter 1 excited."""
    s = np.sin(beta)
    plus = np.zeros(4, dtype=complex)
    minus = np.zeros(4, dtype=complex)
    plus[2], plus[1] = np.sqrt(1 - s), np.sqrt(1 + s)
    minus[2], minus[1] = np.sqrt(1 + s), -np.sqrt(1 - s)
    return plus / np.sqrt(2), minus / np.sqrt(2)


def purcell_cooperativity(g: float, kappa: float, gamma: float = 1.0, Delta_a: float = 0.0):
    """Purcell rate at detuning ``Delta_a`` and the resonant cooperativity.

    ``Gamma_P = g^2 kappa / (kappa^2/4 + Delta_a^2)``, which reduces to
    ``4 g^2/kappa`` on resonance.
    """
    if not (kappa > 0 and gamma > 0):
        raise ValidationError("kappa and gamma must be positive")
    Gamma_P = g**2 * kappa / (kappa**2 / 4 + Delta_a**2)
    C = 4 * g**2 / (kappa * gamma)
    return float(Gamma_P), float(C)


# ---------------------------------------------------------------------------
# model builders

def _dimer_ops(space):
    s = make_ladder("qubit")
    return embed(s, 0, space), embed(s, 1, space)


def _dimer_core(p: DimerParams, space: SpaceDescriptor):
    s1, s2 = _dimer_ops(space)
    n1, n2 = s1.dag @ s1, s2.dag @ s2
    H = (p.Delta - p.delta) * n1 + (p.Delta + p.delta) * n2 + p.J * (s1.dag @ s2 + s2.dag @ s1)
    H = H + p.Omega * (s1 + s2 + s1.dag + s2.dag)
    ch = [
        _chan(s1, s1, p.gamma, "gamma_1"),
        _chan(s2, s2, p.gamma, "gamma_2"),
    ]
    if p.gamma12 != 0:
        ch += [_chan(s1, s2, p.gamma12, "gamma_12"), _chan(s2, s1, p.gamma12, "gamma_21")]
    if p.P > 0:
        ch += [_chan(s1.dag, s1.dag, p.P, "pump_1"), _chan(s2.dag, s2.dag, p.P, "pump_2")]
    labels = {"sigma1": s1, "sigma2": s2}
    return H, ch, labels


def build_driven_dimer(params: DimerParams) -> SystemModel:
    """Two coupled emitters driven by a common laser, in the laser frame."""
    space = SpaceDescriptor((2, 2))
    H, ch, labels = _dimer_core(params, space)
    return SystemModel(space, H, ch, labels, meta={"kind": "dimer", "params": params})


def build_dimer_cavity(params: DimerParams, cavity: CavityParams) -> SystemModel:
    """Dimer coupled to a single lossy cavity mode (Tavis-Cummings)."""
    n = int(cavity.n_trunc)
    space = SpaceDescriptor((2, 2, n + 1))
    H, ch, labels = _dimer_core(params, space)
    a = embed(make_ladder("boson", n), 2, space)
    X = labels["sigma1"] + labels["sigma2"]
    H = H + cavity.Delta_a * (a.dag @ a) + cavity.g * (a.dag @ X + X.dag @ a)
    ch.append(_chan(a, a, cavity.kappa, "kappa"))
    labels["a"] = a
    return SystemModel(space, H, ch, labels, meta={"kind": "dimer_cavity", "params": params, "cavity": cavity})


def build_dicke_cavity(params: DickeParams) -> SystemModel:
    """N all-to-all coupled emitters in a cavity, full Hilbert space."""
    N, n = int(params.N), int(params.cavity.n_trunc)
    space = SpaceDescriptor((2,) * N + (n + 1,))
    s = make_ladder("qubit")
    sig = [embed(s, i, space) for i in range(N)]
    Sm = sig[0]
    for op in sig[1:]:
        Sm = Sm + op
    a = embed(make_ladder("boson", n), N, space)
    cav = params.cavity
    H = params.J * (Sm.dag @ Sm) + cav.Delta_a * (a.dag @ a) + cav.g * (a.dag @ Sm + Sm.dag @ a)
    ch = []
    for i in range(N):
        ch.append(_chan(sig[i], sig[i], params.gamma, f"gamma_{i + 1}"))
    if params.gamma_col != 0:
        for i in range(N):
            for j in range(N):
                if i != j:
                    ch.append(_chan(sig[i], sig[j], params.gamma_col, f"gamma_{i + 1}{j + 1}"))
    if params.P > 0:
        for i in range(N):
            ch.append(_chan(sig[i].dag, sig[i].dag, params.P, f"pump_{i + 1}"))
    ch.append(_chan(a, a, cav.kappa, "kappa"))
    labels = {f"sigma{i + 1}": sig[i] for i in range(N)}
    labels.update({"S-": Sm, "S+": Sm.dag, "a": a})
    return SystemModel(space, H, ch, labels, meta={"kind": "dicke_cavity", "params": params})


def w_state(N: int, excitations: int | None = None) -> np.ndarray:
    """Symmetric Dicke state with ``excitations`` excited emitters (default N-1).

    The default is the state one de-excitation below the fully excited one.
    """
    k = N - 1 if excitations is None else excitations
    psi = np.zeros(2**N, dtype=complex)
    for idx in range(2**N):
        if bin(idx).count("1") == k:
            psi[idx] = 1
    return psi / np.linalg.norm(psi)


def build_tls(params: TlsParams) -> SystemModel:
    """Driven two-level system ``H = Delta s^dag s + (Om s + Om^* s^dag)``."""
    space = SpaceDescriptor((2,))
    s = make_ladder("qubit")
    Om = complex(params.Omega_tilde)
    H = params.Delta_sigma * (s.dag @ s) + Om * s + np.conj(Om) * s.dag
    return SystemModel(space, H, [_chan(s, s, params.gamma, "gamma")], {"sigma": s},
                       meta={"kind": "tls", "params": params})


def build_lambda(params: LambdaParams) -> SystemModel:
    """Three-level Lambda system on (|1>, |2>, |V>)."""
    space = SpaceDescriptor((3,))
    k = np.eye(3)
    ket = lambda i, j: np.outer(k[i], k[j])  # noqa: E731
    H = (params.Delta1 * ket(0, 0) + params.Delta2 * ket(1, 1) + params.DeltaV * ket(2, 2)
         + params.Omega * (ket(0, 2) + ket(1, 2) + ket(2, 0) + ket(2, 1)))
    s12, s1V = ket(0, 1), ket(0, 2)
    ch = [_chan(s12, s12, params.Gamma, "Gamma")]
    if params.GammaV > 0:
        ch.append(_chan(s1V, s1V, params.GammaV, "Gamma_V"))
    labels = {"sigma12": Operator(space, s12), "sigma1V": Operator(space, s1V)}
    return SystemModel(space, Operator(space, H), ch, labels, meta={"kind": "lambda", "params": params})


def build_two_photon_decay_dimer(J: float, Omega: float, Gamma: float, gamma: float = 0.0,
                                 Delta: float = 0.0) -> SystemModel:
    """Identical coupled emitters driven at two-photon resonance with a direct |ee> -> |gg> channel.

    Maps onto the Lambda system with ``|1> = |gg>``, ``|2> = |ee>``, the
    symmetric state as the virtual level, ``DeltaV = J`` and coupling
    ``sqrt(2) Omega``.
    """
    space = SpaceDescriptor((2, 2))
    s1, s2 = _dimer_ops(space)
    H = Delta * (s1.dag @ s1 + s2.dag @ s2) + J * (s1.dag @ s2 + s2.dag @ s1) + Omega * (s1 + s2 + s1.dag + s2.dag)
    down = np.zeros((4, 4))
    down[0, 3] = 1
    ch = [_chan(down, down, Gamma, "two_photon_decay")]
    if gamma > 0:
        ch += [_chan(s1, s1, gamma, "gamma_1"), _chan(s2, s2, gamma, "gamma_2")]
    return SystemModel(space, H, ch, {"sigma1": s1, "sigma2": s2}, meta={"kind": "two_photon_decay_dimer"})


def build_chiral_pair(Omega: float, delta: float, Delta_gamma: float, Gamma: float) -> SystemModel:
    """Two emitters coupled to a chiral waveguide in the symmetric/antisymmetric basis."""
    space = SpaceDescriptor((2, 2))
    gg, ee = np.eye(4)[0], np.eye(4)[3]
    S = (np.eye(4)[1] + np.eye(4)[2]) / np.sqrt(2)
    A = (np.eye(4)[2] - np.eye(4)[1]) / np.sqrt(2)
    op = lambda u, v: np.outer(u, v.conj())  # noqa: E731
    V = np.sqrt(2) * Omega * (op(S, gg) + op(ee, S)) + (delta - 0.5j * Delta_gamma) * op(A, S)
    H = V + V.conj().T
    L1, L2 = op(gg, S), op(S, ee)
    ch = [_chan(L1, L1, Gamma, "S_to_gg"), _chan(L2, L2, Gamma, "ee_to_S")]
    labels = {"proj_S": Operator(space, op(S, S)), "proj_A": Operator(space, op(A, A))}
    return SystemModel(space, Operator(space, H), ch, labels, meta={"kind": "chiral_pair"})


def effective_incoherent_pump(Omega: float, Gamma_fast: float) -> float:
    """Pump rate ``4 Omega^2/Gamma_fast`` from eliminating a fast-decaying level."""
    if Gamma_fast < 10 * abs(Omega):
        warnings.warn(
            f"Gamma_fast = {Gamma_fast} is not much larger than Omega = {Omega}; "
            "the effective-pump approximation is unreliable",
            RuntimeWarning,
            stacklevel=2,
        )
    return 4 * Omega**2 / Gamma_fast


def build_pump_three_level(Omega: float, Gamma_fast: float, gamma: float = 1.0, Delta: float = 0.0) -> SystemModel:
    """Three-level scheme realizing an incoherent pump of the |1> <-> |2> transition.

    ``|1> <-> |3>`` is driven, ``|3>`` decays fast into ``|2>`` and ``|2>``
    decays back into ``|1>``.
    """
    space = SpaceDescriptor((3,))
    k = np.eye(3)
    ket = lambda i, j: np.outer(k[i], k[j])  # noqa: E731
    H = Delta * ket(2, 2) + Omega * (ket(0, 2) + ket(2, 0))
    ch = [_chan(ket(1, 2), ket(1, 2), Gamma_fast, "fast"), _chan(ket(0, 1), ket(0, 1), gamma, "gamma")]
    return SystemModel(space, Operator(space, H), ch, {"sigma12": Operator(space, ket(0, 1))},
                       meta={"kind": "pump_three_level"})


def displace_away_cavity_drive(Omega_a: float, Delta_a: float, kappa: float, g: float):
    """Coherent displacement that removes a direct cavity drive.

    Returns ``alpha`` and the effective emitter drive ``Omega_eff = g alpha``,
    which enters as ``Omega_eff X^dag + conj(Omega_eff) X`` with ``X`` the
    total lowering operator. The cavity term ``Omega_a (a + a^dag)`` is
    removed by ``alpha = -Omega_a / (Delta_a - i kappa/2)``.
    """
    alpha = -Omega_a / (Delta_a - 0.5j * kappa)
    return complex(alpha), complex(g * alpha)


def add_cavity_drive(model: SystemModel, Omega_a: float) -> SystemModel:
    """Add ``Omega_a (a + a^dag)`` to a model carrying a cavity label ``a``."""
    a = model.labels["a"]
    return model.with_terms(hamiltonian=Omega_a * (a + a.dag))


def add_emitter_drive(model: SystemModel, Omega_eff: complex) -> SystemModel:
    """Add ``Omega_eff X^dag + h.c.`` with ``X`` the sum of the emitter lowering operators."""
    X = None
    for name, op in model.labels.items():
        if name.startswith("sigma") and name[5:].isdigit():
            X = op if X is None else X + op
    return model.with_terms(hamiltonian=Omega_eff * X.dag + np.conj(Omega_eff) * X)


def dephasing_channels(model: SystemModel, gamma_phi: float = 0.0, Gamma_phi: float = 0.0,
                       n_emitters: int = 2) -> SystemModel:
    """Local and collective pure dephasing with ``sigma_z = 2 s^dag s - 1``."""
    eye = identity(model.space)
    zs = [2 * (model.labels[f"sigma{i + 1}"].dag @ model.labels[f"sigma{i + 1}"]) - eye for i in range(n_emitters)]
    ch = []
    if gamma_phi > 0:
        ch += [_chan(z, z, gamma_phi, f"dephasing_{i + 1}") for i, z in enumerate(zs)]
    if Gamma_phi > 0:
        Z = zs[0]
        for z in zs[1:]:
            Z = Z + z
        ch.append(_chan(Z, Z, Gamma_phi, "collective_dephasing"))
    return model.with_terms(channels=ch)
