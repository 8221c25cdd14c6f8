"""Entanglement measures, target fidelities, heralding and optical witnesses."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import HeraldImpossibleError, ValidationError
from .hilbert import SpaceDescriptor, StateMatrix, partial_trace

_SY2 = np.kron(np.array([[0, -1j], [1j, 0]]), np.array([[0, -1j], [1j, 0]]))


@dataclass(frozen=True)
class EntanglementReport:
    concurrence: float | None = None
    negativity: float | None = None
    log_negativity: float | None = None
    fidelity: float | None = None
    heralded_fidelity: float | None = None

    def __post_init__(self):
        for name in ("concurrence", "fidelity", "heralded_fidelity"):
            v = getattr(self, name)
            if v is not None and not -1e-9 <= v <= 1 + 1e-9:
                raise ValidationError(f"{name} = {v} outside [0, 1]")
        for name in ("negativity", "log_negativity"):
            v = getattr(self, name)
            if v is not None and v < -1e-12:
                raise ValidationError(f"{name} = {v} is negative")


def _mat(rho):
    return rho.matrix if isinstance(rho, StateMatrix) else np.asarray(rho, dtype=complex)


def concurrence(rho) -> float:
    """Two-qubit concurrence from the spin-flipped spectrum."""
    r = _mat(rho)
    if r.shape != (4, 4):
        raise ValidationError(f"concurrence needs a two-qubit state, got shape {r.shape}")
    R = r @ _SY2 @ r.conj() @ _SY2
    lam = np.sort(np.linalg.eigvals(R).real)[::-1]
    lam[lam < 1e-12] = 0.0
    s = np.sqrt(lam)
    return float(max(0.0, s[0] - s[1] - s[2] - s[3]))


def partial_transpose(rho, dims: Sequence[int], n_first: int = 1) -> np.ndarray:
    """Transpose the first ``n_first`` sites of a state on ``dims``."""
    r = _mat(rho)
    dA = int(np.prod(dims[:n_first]))
    dB = int(np.prod(dims[n_first:]))
    t = r.reshape(dA, dB, dA, dB).transpose(2, 1, 0, 3)
    return t.reshape(dA * dB, dA * dB)


def log_negativity(rho, partition: int | Sequence[int] = 1, dims: Sequence[int] | None = None):
    """Negativity and log-negativity ``E_N = log2(1 + 2N)``.

    ``partition`` is the number of leading sites forming the first block.
    """
    if dims is None:
        if not isinstance(rho, StateMatrix):
            raise ValidationError("pass dims for a bare matrix")
        dims = rho.space.subsystem_dims
    n_first = partition if np.ndim(partition) == 0 else len(partition)
    if not 1 <= n_first < len(dims):
        raise ValidationError("partition must leave both blocks nonempty")
    pt = partial_transpose(rho, dims, n_first)
    ev = np.linalg.eigvalsh(0.5 * (pt + pt.conj().T))
    N = float(np.sum(np.abs(ev[ev < 0])))
    return N, float(np.log2(1 + 2 * N))


def fidelity_and_herald(rho, target, herald=None, keep: Sequence[int] | None = None):
    """Overlap with a pure target, optionally after heralding on ``herald``.

    ``keep`` selects the sites the target lives on (the rest are traced out).
    The heralded state is ``h rho h^dag / Tr[h rho h^dag]``.
    """
    if not isinstance(rho, StateMatrix):
        raise ValidationError("fidelity_and_herald needs a StateMatrix")
    psi = np.asarray(target, dtype=complex).ravel()
    psi = psi / np.linalg.norm(psi)

    def overlap(state_matrix):
        st = StateMatrix(rho.space, state_matrix, check=False)
        red = partial_trace(st, keep).matrix if keep is not None else state_matrix
        if red.shape[0] != psi.size:
            raise ValidationError("target dimension does not match the (reduced) state")
        return float(np.real(psi.conj() @ red @ psi))

    F = overlap(rho.matrix)
    FH = None
    if herald is not None:
        h = herald.matrix if hasattr(herald, "matrix") else np.asarray(herald)
        m = h @ rho.matrix @ h.conj().T
        p = np.trace(m).real
        if p < 1e-14:
            raise HeraldImpossibleError(f"heralding probability {p:.2e} is zero")
        FH = overlap(m / p)
    return F, FH


@dataclass(frozen=True)
class WitnessResult:
    R_csi: float | None
    B_bell: float | None

    @property
    def csi_violated(self) -> bool:
        return self.R_csi is not None and self.R_csi > 1

    @property
    def bell_violated(self) -> bool:
        return self.B_bell is not None and self.B_bell > 2


def witnesses(moments: Mapping[str, complex]) -> WitnessResult:
    """Cauchy-Schwarz ratio and Bell parameter from normally ordered moments.

    Expected keys: ``n1``, ``n2`` (intensities), ``n11 = <a1^dag2 a1^2>``,
    ``n22``, ``n12 = <a1^dag a2^dag a2 a1>``, ``x1d2_x2d2 = <a1^dag2 a2^2>``
    and ``x2d2_x1d2 = <a2^dag2 a1^2>``.
    """
    n1, n2 = float(np.real(moments["n1"])), float(np.real(moments["n2"]))
    n11, n22, n12 = (float(np.real(moments[k])) for k in ("n11", "n22", "n12"))
    R = None
    if n1 > 0 and n2 > 0 and n11 > 0 and n22 > 0:
        g11, g22, g12 = n11 / n1**2, n22 / n2**2, n12 / (n1 * n2)
        R = g12**2 / (g11 * g22)
    B = None
    den = n11 + n22 + 4 * n12
    if den > 0 and "x1d2_x2d2" in moments:
        num = n11 + n22 - 4 * n12 - moments["x1d2_x2d2"] - moments["x2d2_x1d2"]
        B = float(np.sqrt(2) * abs(num / den))
    return WitnessResult(R, B)


def coherent_moments(alpha1: complex, alpha2: complex) -> dict:
    """Normally ordered moments of a product of coherent states."""
    a, b = complex(alpha1), complex(alpha2)
    return {
        "n1": abs(a) ** 2, "n2": abs(b) ** 2, "n11": abs(a) ** 4, "n22": abs(b) ** 4,
        "n12": abs(a) ** 2 * abs(b) ** 2,
        "x1d2_x2d2": np.conj(a) ** 2 * b**2, "x2d2_x1d2": np.conj(b) ** 2 * a**2,
    }


def moments_from_state(rho, dims: Sequence[int]) -> dict:
    """Normally ordered two-mode moments of a joint state on ``dims``."""
    from .hilbert import embed, make_ladder

    space = SpaceDescriptor(tuple(dims))
    a1 = embed(make_ladder("boson", dims[0] - 1), 0, space).matrix
    a2 = embed(make_ladder("boson", dims[1] - 1), 1, space).matrix
    r = _mat(rho)
    E = lambda M: np.trace(M @ r)  # noqa: E731
    d1, d2 = a1.conj().T, a2.conj().T
    return {
        "n1": E(d1 @ a1).real, "n2": E(d2 @ a2).real,
        "n11": E(d1 @ d1 @ a1 @ a1).real, "n22": E(d2 @ d2 @ a2 @ a2).real,
        "n12": E(d1 @ d2 @ a2 @ a1).real,
        "x1d2_x2d2": E(d1 @ d1 @ a2 @ a2), "x2d2_x1d2": E(d2 @ d2 @ a1 @ a1),
        "a1": E(a1), "a2": E(a2), "a1a2": E(a1 @ a2),
    }
