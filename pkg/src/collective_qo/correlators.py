"""Two-time correlators, emission spectra, sensors, cascaded coupling,
temporal-mode capture and ring-down observables."""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import curve_fit

from .errors import NumericalError, ValidationError
from .hilbert import Operator, SpaceDescriptor, StateMatrix, embed, expectation, make_ladder, partial_trace
from .liouville import Superoperator, assemble, spectral_decomposition, steady_state
from .dynamics import propagate, propagate_timedep
from .models import Channel, SystemModel

# ---------------------------------------------------------------------------
# types


@dataclass(frozen=True, eq=False)
class SpectrumCurve:
    """Normalized emission spectrum.

    ``inelastic_density`` integrates (together with ``elastic_weight``) to
    one. The filter replaces ``omega -> omega + i Gamma``, i.e. a Lorentzian
    of half width ``filter_linewidth``.
    """

    omega_grid: np.ndarray
    inelastic_density: np.ndarray
    elastic_weight: float
    filter_linewidth: float
    mean_count: float = 1.0

    def elastic_profile(self) -> np.ndarray:
        G = self.filter_linewidth
        if G <= 0:
            return np.zeros_like(self.omega_grid)
        return self.elastic_weight * (G / np.pi) / (self.omega_grid**2 + G**2)

    @property
    def total(self) -> np.ndarray:
        return self.inelastic_density + self.elastic_profile()

    @property
    def counts(self) -> np.ndarray:
        """Unnormalized filtered spectrum ``<c^dag c> * total``."""
        return self.mean_count * self.total

    def integrated_weight(self) -> float:
        return float(np.trapezoid(self.inelastic_density, self.omega_grid) + self.elastic_weight)


@dataclass(frozen=True)
class SensorSpec:
    """Frequency-resolving sensor.

    ``eta`` is None for a vanishingly coupled sensor and the cascade
    efficiency otherwise.
    """

    Delta_xi: float
    Gamma_xi: float
    eta: float | None = None

    def __post_init__(self):
        if not self.Gamma_xi > 0:
            raise ValidationError("sensor linewidth must be positive")
        if self.eta is not None and not 0 <= self.eta <= 1:
            raise ValidationError("cascade efficiency must lie in [0, 1]")


@dataclass(frozen=True)
class FilterSpec:
    """Normalized boxcar temporal mode ``f(t) = exp(i(Delta t + phi))/sqrt(T)`` on [t0, t0+T]."""

    T: float
    t0: float
    Delta: float = 0.0
    phi: float = 0.0
    shape: str = "boxcar"

    def __post_init__(self):
        if not self.T > 0:
            raise ValidationError("filter duration must be positive")
        if self.shape != "boxcar":
            raise ValidationError(f"unsupported filter shape {self.shape!r}")

    @property
    def t1(self) -> float:
        return self.t0 + self.T


@dataclass(frozen=True, eq=False)
class CorrelationGrid:
    axes: tuple
    values: dict

    def __post_init__(self):
        for name, v in self.values.items():
            arr = np.asarray(v, dtype=float)
            if name in ("g2", "E_N") and np.any(arr[np.isfinite(arr)] < -1e-12):
                raise ValidationError(f"{name} must be nonnegative")


def _m(op):
    return op.matrix if isinstance(op, Operator) else np.asarray(op, dtype=complex)


# ---------------------------------------------------------------------------
# quantum regression


def two_time(L: Superoperator, rho, A, B, C=None, tau_grid=(0.0, 1.0)) -> np.ndarray:
    """``<A(0) B(tau) C(0)> = Tr[B exp(L tau)(C rho A)]``."""
    r = rho.matrix if isinstance(rho, StateMatrix) else np.asarray(rho)
    Am, Bm = _m(A), _m(B)
    X = r @ Am if C is None else _m(C) @ r @ Am
    tau = np.asarray(tau_grid, dtype=float)
    if tau.size == 1:
        tau = np.array([0.0, float(tau)]) if float(tau) > 0 else np.array([0.0, 1.0])
    ev = propagate(L, X, tau)
    return ev.expect(Bm)


# ---------------------------------------------------------------------------
# spectra


def _default_gamma(model: SystemModel) -> float:
    p = model.meta.get("params")
    return float(getattr(p, "gamma", 1.0)) if p is not None else 1.0


def emission_spectrum(model: SystemModel, emit_op, omega_grid, Gamma_filter: float | None = None,
                      L: Superoperator | None = None) -> SpectrumCurve:
    """Normalized inelastic spectrum plus elastic weight of ``emit_op``.

    ``S(w) = -Re Tr[c (L + i(w + i Gamma))^{-1} rho_ss (c^dag - <c^dag>)] / (pi n_c)``
    evaluated through the Liouvillian spectral decomposition.
    """
    if Gamma_filter is None:
        Gamma_filter = 0.1 * _default_gamma(model)
    L = assemble(model, sparse=False) if L is None else L
    rho = steady_state(L)
    c = _resolve(model, emit_op)
    cd = c.conj().T
    mean_c = expectation(rho, c)
    n_c = expectation(rho, cd @ c).real
    if n_c <= 0:
        raise NumericalError("emitter is not excited: spectrum undefined")
    X = rho.matrix @ (cd - np.conj(mean_c) * np.eye(L.dim))
    dec = spectral_decomposition(L, cond_limit=np.inf)
    cw = dec.coefficients(X)
    ow = np.einsum("ij,mji->m", c, dec.right)
    w = cw * ow
    w[0] = 0.0  # stationary mode carries no inelastic weight
    om = np.asarray(omega_grid, dtype=float)
    z = dec.eigenvalues[None, :] + 1j * om[:, None] - Gamma_filter
    S = np.real(np.sum(-w[None, :] / z, axis=1)) / (np.pi * n_c)
    return SpectrumCurve(om, S, float(abs(mean_c) ** 2 / n_c), float(Gamma_filter), float(n_c))


def spectrum_components(model: SystemModel, emit_op):
    """Per-eigenvalue Lorentzian and dispersive weights of the inelastic spectrum.

    Returns arrays (positions, half widths, lorentzian weights, dispersive
    weights) such that
    ``S(w) = sum_k [a_k g_k + b_k (w - w_k)] / (pi ((w - w_k)^2 + g_k^2))``.
    """
    L = assemble(model, sparse=False)
    rho = steady_state(L)
    c = _resolve(model, emit_op)
    cd = c.conj().T
    mean_c = expectation(rho, c)
    n_c = expectation(rho, cd @ c).real
    X = rho.matrix @ (cd - np.conj(mean_c) * np.eye(L.dim))
    dec = spectral_decomposition(L, cond_limit=np.inf)
    w = dec.coefficients(X) * np.einsum("ij,mji->m", c, dec.right) / n_c
    lam = dec.eigenvalues[1:]
    w = w[1:]
    # -w/(lam + i w) with lam = -g - i w0  ->  -w / (-g + i (w - w0))
    pos, hw = -lam.imag, -lam.real
    return pos, hw, w.real, -w.imag


def lorentzian_mixture(omega, *params):
    """Sum of Lorentzian-plus-dispersive peaks; params grouped (center, hwhm, a, b)."""
    out = np.zeros_like(omega, dtype=float)
    for k in range(0, len(params), 4):
        w0, g, a, b = params[k:k + 4]
        out += (a * g + b * (omega - w0)) / (np.pi * ((omega - w0) ** 2 + g**2))
    return out


def fit_peaks(omega, S, guesses: Sequence[tuple]):
    """Least-squares fit of Lorentzian-plus-dispersive peaks.

    ``guesses`` holds (center, hwhm, weight) per peak. Returns an array of
    (center, hwhm, weight, dispersive) rows.
    """
    p0 = []
    for w0, g, a in guesses:
        p0 += [w0, g, a, 0.0]
    popt, _ = curve_fit(lorentzian_mixture, omega, S, p0=p0, maxfev=20000)
    return popt.reshape(-1, 4)


def count_peaks(omega, S, rel_height: float = 1e-4, prominence: float = 1e-3) -> int:
    """Number of resolved local maxima above a fraction of the global maximum."""
    from scipy.signal import find_peaks

    S = np.asarray(S)
    idx, _ = find_peaks(S, height=rel_height * S.max(), prominence=prominence * S.max())
    return int(len(idx))


# ---------------------------------------------------------------------------
# sensors and cascades


def _extend(model: SystemModel, n_levels: Sequence[int]):
    """Embed ``model`` into a space with extra bosonic sites appended."""
    space = SpaceDescriptor(model.space.subsystem_dims + tuple(n_levels))
    extra = int(np.prod(n_levels))
    lift = lambda M: np.kron(M, np.eye(extra))  # noqa: E731
    H = Operator(space, lift(model.hamiltonian.matrix))
    ch = [Channel(lift(c.A), lift(c.B), c.rate, c.amplitude, c.label) for c in model.channels]
    labels = {k: Operator(space, lift(v.matrix)) for k, v in model.labels.items()}
    drives = tuple((Operator(space, lift(O.matrix)), f) for O, f in model.drives)
    modes = [embed(make_ladder("boson", n - 1), model.space.n_sites + i, space) for i, n in enumerate(n_levels)]
    return space, H, ch, labels, drives, modes


def _resolve(model: SystemModel, emit_op) -> np.ndarray:
    if isinstance(emit_op, str):
        if emit_op == "sigma_total":
            ops = [v.matrix for k, v in model.labels.items() if k.startswith("sigma") and k[5:].isdigit()]
            return np.sum(ops, axis=0)
        return model.op(emit_op)
    return _m(emit_op)


def add_sensors(model: SystemModel, emit_op, sensors: Sequence[SensorSpec], g_xi=None,
                n_levels: int = 2) -> SystemModel:
    """Attach weakly coupled sensors ``g (xi c^dag + xi^dag c)`` with decay ``Gamma_xi``.

    ``g_xi`` is a scalar, a per-sensor sequence, or None for ``1e-3 Gamma_xi``.
    """
    c_small = _resolve(model, emit_op)
    if g_xi is None:
        gs = [1e-3 * sn.Gamma_xi for sn in sensors]
    elif np.ndim(g_xi) == 0:
        gs = [float(g_xi)] * len(sensors)
    else:
        gs = list(g_xi)
    space, H, ch, labels, drives, modes = _extend(model, [n_levels] * len(sensors))
    c = np.kron(c_small, np.eye(n_levels ** len(sensors)))
    Hm = H.matrix.copy()
    for k, (sn, xi, g) in enumerate(zip(sensors, modes, gs)):
        x = xi.matrix
        Hm += sn.Delta_xi * x.conj().T @ x + g * (x @ c.conj().T + x.conj().T @ c)
        ch.append(Channel(x, x, sn.Gamma_xi, None, f"xi_{k + 1}"))
        labels[f"xi{k + 1}"] = xi
    return SystemModel(space, Operator(space, Hm), ch, labels, drives,
                       meta=dict(model.meta, sensor_couplings=tuple(gs)))


@dataclass(frozen=True)
class SensorResult:
    """Zero-delay frequency-resolved observables from sensor moments."""

    populations: tuple
    S: tuple
    g2: float | None
    g2_auto: tuple
    moments: dict
    coupling_check: float


def _sensor_moments(model_s: SystemModel, n_sensors: int):
    rho = steady_state(assemble(model_s))
    xs = [model_s.op(f"xi{k + 1}") for k in range(n_sensors)]
    E = lambda M: expectation(rho, M)  # noqa: E731
    mom = {}
    for k, x in enumerate(xs, 1):
        xd = x.conj().T
        mom[f"n{k}"] = E(xd @ x).real
        mom[f"a{k}"] = E(x)
        mom[f"n{k}{k}"] = E(xd @ xd @ x @ x).real
    if n_sensors == 2:
        x1, x2 = xs
        mom["n12"] = E(x1.conj().T @ x2.conj().T @ x2 @ x1).real
        mom["a1a2"] = E(x1 @ x2)
        mom["x1d2_x2d2"] = E(x1.conj().T @ x1.conj().T @ x2 @ x2)
        mom["x2d2_x1d2"] = E(x2.conj().T @ x2.conj().T @ x1 @ x1)
    return mom


def sensor_correlations(model: SystemModel, emit_op, sensors: Sequence[SensorSpec], order: int = 2,
                        g_xi: float | None = None, check_halving: bool = True) -> SensorResult:
    """Frequency-resolved intensities and zero-delay g2 from vanishingly coupled sensors.

    The spectrum at the sensor frequency is ``Gamma_xi <xi^dag xi> / (2 pi g^2 n_c)``,
    the source spectrum filtered by a Lorentzian of half width ``Gamma_xi/2``.
    ``coupling_check`` is the largest relative change of the normalized
    outputs when the coupling is halved.
    """
    if not 1 <= len(sensors) <= 2 or order not in (1, 2):
        raise ValidationError("one or two sensors and order 1 or 2 are supported")
    n_levels = 2 if order == 1 else 3
    c = _resolve(model, emit_op)
    rho0 = steady_state(assemble(model))
    n_c = expectation(rho0, c.conj().T @ c).real

    def run(scale):
        gs = [(1e-3 * s.Gamma_xi if g_xi is None else g_xi) * scale for s in sensors]
        ms = add_sensors(model, c, sensors, g_xi=gs, n_levels=n_levels)
        mom = _sensor_moments(ms, len(sensors))
        S = tuple(s.Gamma_xi * mom[f"n{k + 1}"] / (2 * np.pi * g**2 * n_c) for k, (s, g) in enumerate(zip(sensors, gs)))
        g2_auto = tuple(mom[f"n{k}{k}"] / mom[f"n{k}"] ** 2 if mom[f"n{k}"] > 0 else np.nan
                        for k in range(1, len(sensors) + 1)) if order == 2 else ()
        g2 = None
        if order == 2 and len(sensors) == 2:
            g2 = mom["n12"] / (mom["n1"] * mom["n2"])
        elif order == 2:
            g2 = g2_auto[0]
        return S, g2, g2_auto, mom

    S, g2, g2_auto, mom = run(1.0)
    check = 0.0
    if check_halving:
        S_h, g2_h, _, _ = run(0.5)
        vals = list(zip(S, S_h)) + ([(g2, g2_h)] if g2 is not None else [])
        check = max(abs(a - b) / max(abs(a), 1e-300) for a, b in vals)
        if check > 0.01:
            warnings.warn(f"sensor outputs change by {check:.2%} when halving the coupling", RuntimeWarning,
                          stacklevel=2)
    pops = tuple(mom[f"n{k + 1}"] for k in range(len(sensors)))
    return SensorResult(pops, S, g2, g2_auto, mom, float(check))


def cascaded_attach(source: SystemModel, sensor: SensorSpec, eta: float | None = None, emit_op="sigma",
                    source_rate: float | None = None, n_levels: int = 2) -> SystemModel:
    """Feed the output of ``source`` one-way into a sensor mode.

    Adds ``-sqrt(eta gamma Gamma)([xi^dag, c rho] + [rho c^dag, xi])`` plus the
    sensor decay and detuning. The one-way term is written as a pair of
    cross channels plus the Hamiltonian ``(i s/2)(c^dag xi - xi^dag c)``,
    which leaves the source's reduced dynamics untouched.
    """
    eta = sensor.eta if eta is None else eta
    if eta is None:
        raise ValidationError("cascaded coupling needs an efficiency eta")
    gamma = _default_gamma(source) if source_rate is None else source_rate
    c_small = _resolve(source, emit_op)
    space, H, ch, labels, drives, modes = _extend(source, [n_levels])
    c = np.kron(c_small, np.eye(n_levels))
    xi = modes[0].matrix
    s = np.sqrt(eta * gamma * sensor.Gamma_xi)
    Hm = H.matrix + sensor.Delta_xi * xi.conj().T @ xi + 0.5j * s * (c.conj().T @ xi - xi.conj().T @ c)
    ch.append(Channel(xi, xi, sensor.Gamma_xi, None, "xi"))
    if s > 0:
        ch += [Channel(c, xi, s, None, "cascade"), Channel(xi, c, s, None, "cascade_conj")]
    labels["xi"] = modes[0]
    return SystemModel(space, Operator(space, Hm), ch, labels, drives, meta=dict(source.meta))


def cascaded_two_sensors(source: SystemModel, sensors: Sequence[SensorSpec], emit_op="sigma",
                         source_rate: float | None = None, n_levels: int = 2, split: bool = True) -> SystemModel:
    """Two Lorentzian sensors fed by one source, each with coupling ``sqrt(gamma Gamma_k/2)``.

    Sensor ``k`` contributes ``Delta_k xi_k^dag xi_k`` and decay ``Gamma_k``;
    the output is split evenly between the two sensors.
    """
    gamma = _default_gamma(source) if source_rate is None else source_rate
    c_small = _resolve(source, emit_op)
    space, H, ch, labels, drives, modes = _extend(source, [n_levels] * len(sensors))
    c = np.kron(c_small, np.eye(n_levels ** len(sensors)))
    Hm = H.matrix.copy()
    frac = 1 / len(sensors) if split else 1.0
    for k, (sen, mode) in enumerate(zip(sensors, modes), 1):
        xi = mode.matrix
        s = np.sqrt(frac * gamma * sen.Gamma_xi)
        Hm += sen.Delta_xi * xi.conj().T @ xi + 0.5j * s * (c.conj().T @ xi - xi.conj().T @ c)
        ch += [Channel(xi, xi, sen.Gamma_xi, None, f"xi_{k}"), Channel(c, xi, s, None, f"cascade_{k}"),
               Channel(xi, c, s, None, f"cascade_{k}_conj")]
        labels[f"xi{k}"] = mode
    return SystemModel(space, Operator(space, Hm), ch, labels, drives, check_positivity=split,
                       meta=dict(source.meta))


# ---------------------------------------------------------------------------
# temporal-mode capture

EPS_CAPTURE = 1e-4


def boxcar_coupling(f: FilterSpec, eps: float = EPS_CAPTURE) -> Callable[[float], complex]:
    """``g(t) = -exp(i(Delta t + phi))/sqrt(t - t0)`` on (t0 + eps T, t0 + T], zero elsewhere."""
    start = f.t0 + eps * f.T

    def g(t):
        if t < start or t > f.t1:
            return 0.0
        return -np.exp(1j * (f.Delta * t + f.phi)) / np.sqrt(t - f.t0)

    return g


def filter_overlap(f1: FilterSpec, f2: FilterSpec) -> complex:
    """``int f1^* f2 dt`` for two boxcar modes."""
    a, b = max(f1.t0, f2.t0), min(f1.t1, f2.t1)
    if b <= a:
        return 0.0
    dw = f2.Delta - f1.Delta
    phase = np.exp(1j * (f2.phi - f1.phi)) / np.sqrt(f1.T * f2.T)
    if abs(dw) < 1e-14:
        return complex(phase * (b - a))
    return complex(phase * (np.exp(1j * dw * b) - np.exp(1j * dw * a)) / (1j * dw))


@dataclass(frozen=True, eq=False)
class CaptureResult:
    state: StateMatrix           # joint two-mode state
    overlap: complex
    orthogonal: bool
    top_population: float
    n_trunc: int
    source_final: StateMatrix


def two_mode_capture(source: SystemModel, filters: Sequence[FilterSpec], splitting: str = "digital",
                     emit_op="sigma", source_rate: float | None = None, rho0=None, n_levels: int = 3,
                     eps: float = EPS_CAPTURE, rtol: float = 1e-8, atol: float = 1e-10,
                     escalate: bool = True, max_levels: int = 5) -> CaptureResult:
    """Capture the source output in two boxcar temporal modes.

    The source starts at ``t = 0`` in ``rho0`` (ground state by default),
    evolves freely until the first window opens, then drives both modes
    through ``-s {g_k^* [a_k^dag, c rho] + g_k [rho c^dag, a_k]}`` with
    ``s = sqrt(gamma)`` (digital) or ``sqrt(gamma/2)`` (physical split), and
    mode decay ``|g_k|^2/2 D[a_k]``.
    """
    if len(filters) != 2:
        raise ValidationError("two filters are required")
    if splitting not in ("digital", "physical"):
        raise ValidationError("splitting must be 'digital' or 'physical'")
    if any(f.t0 < 0 for f in filters):
        raise ValidationError("filter windows may not start before the source (t = 0)")
    gamma = _default_gamma(source) if source_rate is None else source_rate
    s = np.sqrt(gamma) if splitting == "digital" else np.sqrt(gamma / 2)
    c_small = _resolve(source, emit_op)
    d_src = source.dim
    if rho0 is None:
        r0 = np.zeros((d_src, d_src), dtype=complex)
        r0[0, 0] = 1
    else:
        r0 = rho0.matrix if isinstance(rho0, StateMatrix) else np.asarray(rho0, dtype=complex)
    t_on = min(f.t0 for f in filters)
    if t_on > 0:
        if source.time_dependent:
            r0 = propagate_timedep(source, r0, [0.0, t_on]).states[-1]
        else:
            r0 = propagate(assemble(source, sparse=False), r0, [0.0, t_on]).states[-1]
    t_end = max(f.t1 for f in filters)
    ov = filter_overlap(*filters)

    while True:
        space, H, ch, labels, drives, modes = _extend(source, [n_levels, n_levels])
        c = np.kron(c_small, np.eye(n_levels**2))
        drives = list(drives)
        for k, (f, mode) in enumerate(zip(filters, modes), 1):
            a = mode.matrix
            g = boxcar_coupling(f, eps)
            ch.append(Channel(a, a, 1.0, (lambda t, g=g: abs(g(t)) ** 2), f"mode_{k}"))
            ch.append(Channel(c, a, s, (lambda t, g=g: np.conj(g(t))), f"cascade_{k}"))
            ch.append(Channel(a, c, s, g, f"cascade_{k}_conj"))
            drives.append((Operator(space, c.conj().T @ a), (lambda t, g=g: 0.5j * s * g(t))))
            labels[f"a{k}"] = mode
        model = SystemModel(space, H, ch, labels, drives, check_positivity=False, meta=dict(source.meta))
        rho_start = np.kron(r0, np.kron(_vac(n_levels), _vac(n_levels)))
        breaks = sorted({f.t0 + eps * f.T for f in filters} | {f.t1 for f in filters})
        ev = propagate_timedep(model, rho_start, [t_on, t_end], breakpoints=breaks, rtol=rtol, atol=atol)
        rho_end = ev.states[-1]
        joint = partial_trace(rho_end, [space.n_sites - 2, space.n_sites - 1], space=space)
        m = joint.matrix.reshape(n_levels, n_levels, n_levels, n_levels)
        p1 = np.einsum("ijkj->ik", m).diagonal().real
        p2 = np.einsum("ijil->jl", m).diagonal().real
        top = float(max(p1[-1], p2[-1]))
        if top <= 1e-6 or not escalate or n_levels >= max_levels:
            break
        n_levels += 1
    jm = 0.5 * (joint.matrix + joint.matrix.conj().T)
    jm = jm / np.trace(jm).real
    src = partial_trace(rho_end, list(range(source.space.n_sites)), space=space)
    return CaptureResult(
        state=StateMatrix(SpaceDescriptor((n_levels, n_levels)), jm, check=False),
        overlap=ov,
        orthogonal=bool(abs(ov) <= 1e-3),
        top_population=top,
        n_trunc=n_levels - 1,
        source_final=src,
    )


def _vac(n):
    v = np.zeros((n, n), dtype=complex)
    v[0, 0] = 1
    return v


# ---------------------------------------------------------------------------
# ring-down


@dataclass(frozen=True, eq=False)
class RingdownResult:
    n_T: float
    g_T2: float
    times: np.ndarray
    intensity: np.ndarray
    divergent: bool


def ringdown(model_off: SystemModel, rho0, cavity: str = "a", kappa: float | None = None,
             times=None, tol: float = 1e-12) -> RingdownResult:
    """Photon number and integrated g2 emitted after the drive is switched off.

    ``n_T = kappa int <a^dag a> dt`` and
    ``g_T2 = (kappa/n_T)^2 int int <:T[a^dag(t) a^dag(t') a(t') a(t)]:> dt dt'``,
    both from the eigen-expansion of the undriven Liouvillian with
    initial state ``rho0`` (the driven steady state).
    """
    if kappa is None:
        kappa = next(c.rate for c in model_off.channels if c.label == "kappa")
    L = assemble(model_off, sparse=False)
    dec = spectral_decomposition(L, cond_limit=np.inf)
    a = model_off.op(cavity)
    n_op = a.conj().T @ a
    r0 = rho0.matrix if isinstance(rho0, StateMatrix) else np.asarray(rho0)
    lam = dec.eigenvalues
    c = dec.coefficients(r0)
    nR = np.einsum("ij,mji->m", n_op, dec.right)
    zero = np.abs(lam) < 1e-10 * max(1.0, np.max(np.abs(lam)))
    divergent = bool(np.any(np.abs(c[zero] * nR[zero]) > tol))
    nz = ~zero
    n_T = float(np.real(-kappa * np.sum(c[nz] * nR[nz] / lam[nz])))
    # d_{mu nu} = Tr[L_nu^L (a R_mu a^dag)]
    aRa = np.einsum("ij,mjk,lk->mil", a, dec.right, a.conj())
    d = np.einsum("nij,mji->mn", dec.left, aRa)
    contrib = (c[:, None] * d * nR[None, :])
    mask = nz[:, None] & nz[None, :]
    contrib = np.where(mask, contrib / np.where(mask, np.outer(lam, lam), 1.0), 0.0)
    contrib[np.abs(contrib) < tol * max(1.0, np.max(np.abs(contrib)))] = 0.0
    G2 = 2 * kappa**2 * float(np.real(np.sum(contrib)))
    g2 = G2 / n_T**2 if n_T > 0 else np.nan
    if times is None:
        rate = np.min(np.abs(lam[nz].real)) if nz.any() else 1.0
        times = np.linspace(0, 8 / rate, 400)
    times = np.asarray(times, dtype=float)
    inten = np.real(np.exp(np.outer(times, lam)) @ (c * nR))
    return RingdownResult(n_T, float(g2), times, inten, divergent)
