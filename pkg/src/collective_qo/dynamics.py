"""Time evolution: Liouvillian propagation, time-dependent integration,
quantum trajectories and conditional no-jump evolution."""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg as sla
from scipy.integrate import solve_ivp

from .errors import IntegrationError, ValidationError
from .hilbert import SpaceDescriptor, StateMatrix
from .liouville import Superoperator, spectral_decomposition
from .models import SystemModel

RTOL, ATOL = 1e-9, 1e-12
SPECTRAL_COND = 1e8


@dataclass(frozen=True)
class TimeGrid:
    samples: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=float).ravel()
        if s.size < 2 or np.any(np.diff(s) <= 0):
            raise ValidationError("time grid needs at least two strictly increasing samples")
        object.__setattr__(self, "samples", s)

    @classmethod
    def linspace(cls, start: float, end: float, n: int) -> "TimeGrid":
        return cls(np.linspace(start, end, n))

    @property
    def start(self) -> float:
        return float(self.samples[0])

    @property
    def end(self) -> float:
        return float(self.samples[-1])


def _grid(grid) -> np.ndarray:
    return grid.samples if isinstance(grid, TimeGrid) else TimeGrid(grid).samples


@dataclass(frozen=True, eq=False)
class Evolution:
    """Density matrices sampled on a time grid."""

    times: np.ndarray
    states: np.ndarray  # (n_t, d, d)
    space: SpaceDescriptor

    def __len__(self):
        return len(self.times)

    def __getitem__(self, i) -> StateMatrix:
        return StateMatrix(self.space, self.states[i], check=False)

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    def expect(self, op) -> np.ndarray:
        m = op.matrix if hasattr(op, "matrix") else np.asarray(op)
        return np.einsum("ij,tji->t", m, self.states)

    def population(self, i: int) -> np.ndarray:
        return self.states[:, i, i].real


def _rho(rho0):
    return rho0.matrix if isinstance(rho0, StateMatrix) else np.asarray(rho0, dtype=complex)


def propagate(L: Superoperator, rho0, grid, method: str = "auto") -> Evolution:
    """Evolve ``rho0`` under a time-independent Liouvillian.

    ``method`` is ``"spectral"``, ``"ode"`` or ``"auto"`` (spectral when the
    eigenbasis condition number is below 1e8).
    """
    t = _grid(grid)
    r0 = _rho(rho0)
    d = L.dim
    space = L.space or SpaceDescriptor((d,))
    if method in ("auto", "spectral") and not (method == "auto" and L.is_sparse):
        dec = spectral_decomposition(L, cond_limit=np.inf)
        if method == "spectral" or dec.condition < SPECTRAL_COND:
            c = dec.coefficients(r0)
            amp = c[None, :] * np.exp(np.outer(t - t[0], dec.eigenvalues))
            states = np.einsum("tm,mij->tij", amp, dec.right)
            return Evolution(t, states, space)
    M = L.matrix
    sol = solve_ivp(lambda _, y: M @ y, (t[0], t[-1]), r0.ravel().astype(complex), t_eval=t,
                    method="DOP853", rtol=RTOL, atol=ATOL)
    if not sol.success:
        raise IntegrationError(f"propagation failed: {sol.message}")
    states = sol.y.T.reshape(-1, d, d)
    return Evolution(t, states, space)


def _td_rhs(model: SystemModel):
    d = model.dim
    H0 = model.hamiltonian.matrix
    drives = [(O.matrix, O.matrix.conj().T, f) for O, f in model.drives]
    static, timed = [], []
    for c in model.channels:
        entry = (c.A, c.B.conj().T, c.B.conj().T @ c.A)
        (static if c.amplitude is None else timed).append((entry, c))

    # static part collapsed into a single superoperator-free evaluation
    def rhs(t, y):
        rho = y.reshape(d, d)
        H = H0
        if drives:
            H = H0.copy()
            for O, Od, f in drives:
                v = complex(f(t))
                if v != 0:
                    H = H + v * O + np.conj(v) * Od
        out = -1j * (H @ rho - rho @ H)
        for (A, Bd, BdA), c in static:
            out += (c.rate / 2) * (2 * A @ rho @ Bd - BdA @ rho - rho @ BdA)
        for (A, Bd, BdA), c in timed:
            k = c.coefficient(t)
            if k != 0:
                out += (k / 2) * (2 * A @ rho @ Bd - BdA @ rho - rho @ BdA)
        return out.ravel()

    return rhs


def propagate_timedep(model: SystemModel, rho0, grid, breakpoints: Sequence[float] = (),
                      method: str = "DOP853", rtol: float = RTOL, atol: float = ATOL,
                      max_step: float = np.inf) -> Evolution:
    """Adaptive ODE integration of a model with time-dependent terms.

    Integration restarts at every breakpoint (switching times of the
    amplitude functions) so steps never straddle a discontinuity.
    """
    t = _grid(grid)
    d = model.dim
    rhs = _td_rhs(model)
    cuts = sorted({float(b) for b in breakpoints if t[0] < b < t[-1]})
    edges = [t[0]] + cuts + [t[-1]]
    y = _rho(rho0).ravel().astype(complex)
    out = np.empty((len(t), d, d), dtype=complex)
    out[0] = y.reshape(d, d)
    for a, b in zip(edges[:-1], edges[1:]):
        mask = (t > a) & (t <= b)
        sol = solve_ivp(rhs, (a, b), y, t_eval=t[mask] if mask.any() else None, method=method,
                        rtol=rtol, atol=atol, max_step=max_step)
        if not sol.success:
            raise IntegrationError(f"time-dependent integration failed on [{a}, {b}]: {sol.message}")
        if mask.any():
            out[mask] = sol.y.T.reshape(-1, d, d)
        y = sol.y[:, -1]
    return Evolution(t, out, model.space)


# ---------------------------------------------------------------------------
# quantum trajectories

@dataclass(frozen=True, eq=False)
class TrajectoryRecord:
    jump_events: list
    sampled_states: np.ndarray
    seed: tuple

    @property
    def first_jump(self) -> float:
        return self.jump_events[0][0] if self.jump_events else np.inf


def trajectory_rng(seed: int, index: int) -> np.random.Generator:
    """Independent stream for trajectory ``index``; depends only on (seed, index)."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy=int(seed), spawn_key=(int(index),))))


def mcwf(model: SystemModel, psi0, grid, n_traj: int, seed: int = 0, dp_max: float = 0.01,
         block: int = 512):
    """Monte Carlo wave-function unravelling.

    At each step the jump probabilities ``dp_mu = dt rate_mu <L_mu^dag L_mu>``
    are compared with one uniform number per channel; if several channels
    fire, the one with the largest ``dp_mu - r_mu`` is applied. Otherwise the
    state evolves with the non-Hermitian Hamiltonian and is renormalized.
    The step is chosen so that every ``dp_mu`` stays below ``dp_max`` (< 0.1).

    Returns
    -------
    (Evolution, list of TrajectoryRecord)
    """
    if model.time_dependent:
        raise ValidationError("mcwf supports time-independent models only")
    if not 0 < dp_max < 0.1:
        raise ValidationError("dp_max must lie in (0, 0.1)")
    t = _grid(grid)
    d = model.dim
    jumps = model.jump_operators()
    rates = np.array([r for r, _ in jumps])
    Ls = np.array([L for _, L in jumps]) if jumps else np.zeros((0, d, d))
    LdL = np.einsum("kji,kjl->kil", Ls.conj(), Ls)
    Heff = model.hamiltonian.matrix - 0.5j * np.einsum("k,kij->ij", rates, LdL)
    bound = float(np.max(rates * np.array([np.linalg.norm(M, 2) for M in LdL]))) if jumps else 0.0
    dt_max = dp_max / bound if bound > 0 else np.inf

    psi = np.tile(np.asarray(psi0, dtype=complex).ravel() / np.linalg.norm(psi0), (n_traj, 1))
    rngs = [trajectory_rng(seed, i) for i in range(n_traj)]
    samples = np.empty((n_traj, len(t), d), dtype=complex)
    samples[:, 0] = psi
    events = [[] for _ in range(n_traj)]
    nch = len(jumps)
    buf, pos = None, block

    def draws():
        nonlocal buf, pos
        if pos >= block:
            buf = np.stack([g.random((block, max(nch, 1))) for g in rngs], axis=1)
            pos = 0
        pos += 1
        return buf[pos - 1]

    U_cache = {}
    for k in range(1, len(t)):
        span = t[k] - t[k - 1]
        n_sub = max(1, int(np.ceil(span / dt_max)))
        dt = span / n_sub
        key = round(dt, 15)
        if key not in U_cache:
            U_cache[key] = sla.expm(-1j * Heff * dt)
        U = U_cache[key]
        for s in range(n_sub):
            now = t[k - 1] + (s + 1) * dt
            r = draws()
            if nch:
                e = np.einsum("ni,kij,nj->nk", psi.conj(), LdL, psi).real
                dp = dt * rates[None, :] * e
                if np.any(dp > 0.1):
                    raise IntegrationError("jump probability per step exceeded 0.1")
                fire = r < dp
                jumped = fire.any(axis=1)
            else:
                jumped = np.zeros(n_traj, dtype=bool)
            stay = ~jumped
            psi[stay] = psi[stay] @ U.T
            if jumped.any():
                score = np.where(fire, dp - r, -np.inf)
                ch = np.argmax(score, axis=1)
                for n in np.nonzero(jumped)[0]:
                    psi[n] = Ls[ch[n]] @ psi[n]
                    events[n].append((float(now), int(ch[n])))
            psi /= np.linalg.norm(psi, axis=1, keepdims=True)
        samples[:, k] = psi
    rho = np.einsum("nti,ntj->tij", samples, samples.conj()) / n_traj
    records = [TrajectoryRecord(events[n], samples[n], (int(seed), n)) for n in range(n_traj)]
    return Evolution(t, rho, model.space), records


def no_jump_conditional(model: SystemModel, rho0, grid):
    """Evolution conditioned on no quantum jumps.

    Propagates ``d rho = -i[H, rho] - (1/2) sum rate {B^dag A, rho}`` exactly
    through ``U = exp(-i H_eff t)``.

    Returns
    -------
    (Evolution of normalized states, survival probability array)
    """
    t = _grid(grid)
    d = model.dim
    K = np.zeros((d, d), dtype=complex)
    for c in model.channels:
        K += c.coefficient() * (c.B.conj().T @ c.A)
    Heff = model.hamiltonian.matrix - 0.5j * K
    r0 = _rho(rho0)
    states = np.empty((len(t), d, d), dtype=complex)
    surv = np.empty(len(t))
    for i, ti in enumerate(t):
        U = sla.expm(-1j * Heff * (ti - t[0]))
        r = U @ r0 @ U.conj().T
        p = np.trace(r).real
        if p < 1e-14:
            warnings.warn(f"no-jump probability fell below 1e-14 at t = {ti:.3e}; truncating",
                          RuntimeWarning, stacklevel=2)
            surv[i:] = max(p, 0.0)
            states[i:] = states[i - 1] if i else r0
            break
        surv[i] = p
        states[i] = 0.5 * (r + r.conj().T) / p
    return Evolution(t, states, model.space), surv
