"""Classical, Poissonian, spectrum-summed and joint frequency-resolved Fisher information."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import NumericalError, ValidationError
from .hilbert import StateMatrix, partial_trace

P_FLOOR = 1e-14


@dataclass(frozen=True)
class FisherResult:
    """Fisher information of a photon-counting measurement.

    ``F`` sums over outcomes with ``p > P_FLOOR``; ``F_raw`` keeps every
    outcome with ``p > 0`` and ``dropped_mass`` is the probability that was
    excluded from ``F``. ``F0`` is the zero-count term.
    """

    theta: str
    F: float
    F0: float
    F_P: float | None = None
    F_joint: float | None = None
    F_marginals: tuple | None = None
    F_raw: float | None = None
    dropped_mass: float = 0.0

    def __post_init__(self):
        for name in ("F", "F0", "F_P", "F_joint", "F_raw"):
            v = getattr(self, name)
            if v is not None and v < -1e-12:
                raise ValidationError(f"{name} = {v} is negative")


def fisher_from_distribution(p, dp, floor: float = P_FLOOR):
    """Return ``(F, F_raw, dropped_mass)`` for a distribution and its derivative."""
    p = np.real(np.asarray(p, dtype=complex)).ravel()
    dp = np.real(np.asarray(dp, dtype=complex)).ravel()
    if p.shape != dp.shape:
        raise ValidationError("p and dp must have the same shape")
    if not np.any(p > 0):
        raise NumericalError("all-zero counting distribution")
    keep = p > floor
    F = float(np.sum(dp[keep] ** 2 / p[keep]))
    pos = p > 0
    F_raw = float(np.sum(dp[pos] ** 2 / p[pos]))
    return F, F_raw, float(np.sum(np.clip(p[~keep], 0, None)))


def _counting_distribution(rho, drho, sites):
    r = rho.matrix if isinstance(rho, StateMatrix) else np.asarray(rho, dtype=complex)
    d = drho.matrix if isinstance(drho, StateMatrix) else np.asarray(drho, dtype=complex)
    if sites is None:
        return np.diag(r).real, np.diag(d).real, None
    space = rho.space
    sites = [s % space.n_sites for s in sites]
    r_red = partial_trace(StateMatrix(space, r, check=False), sites).matrix
    d_red = partial_trace(StateMatrix(space, d, check=False), sites).matrix
    dims = [space.subsystem_dims[s] for s in sorted(s % space.n_sites for s in sites)]
    return np.diag(r_red).real, np.diag(d_red).real, dims


def counting_fisher(rho, drho, sites: Sequence[int] | None = None, theta: str = "theta") -> FisherResult:
    """Fisher information of number-resolved counting on ``sites``.

    The outcome distribution is the diagonal of the (reduced) state in the
    occupation basis. With a single counted mode the Poissonian estimate
    ``(sum n dp)^2 / sum n p`` is computed from the same distribution.

    Parameters
    ----------
    rho, drho : StateMatrix or ndarray
        State and its parameter derivative (see
        :func:`collective_qo.liouville.steady_state_derivative`).
    sites : sequence of int, optional
        Counted modes. ``None`` uses the full diagonal.
    """
    p, dp, dims = _counting_distribution(rho, drho, sites)
    F, F_raw, dropped = fisher_from_distribution(p, dp)
    F0 = float(dp[0] ** 2 / p[0]) if p[0] > P_FLOOR else 0.0
    F_P = None
    if dims is not None and len(dims) == 1:
        n = np.arange(dims[0])
        nbar = float(n @ p)
        if nbar > 0:
            F_P = float((n @ dp) ** 2 / nbar)
    return FisherResult(theta, F, F0, F_P=F_P, F_raw=F_raw, dropped_mass=dropped)


def _step(theta: float, h: float | None) -> float:
    return 1e-6 * max(abs(theta), 1.0) if h is None else h


def poissonian_fisher(nbar: Callable[[float], float], theta: float, h: float | None = None) -> float:
    """``(d nbar/d theta)^2 / nbar`` with a central-difference derivative."""
    n0 = float(nbar(theta))
    if n0 <= 0:
        raise ValidationError(f"mean count must be positive, got {n0}")
    h = _step(theta, h)
    dn = (nbar(theta + h) - nbar(theta - h)) / (2 * h)
    return float(dn ** 2 / n0)


def spectrum_fisher_sum(S: Callable[[np.ndarray, float], np.ndarray], omega_grid, theta: float,
                        h: float | None = None) -> float:
    """Sum of independent Poissonian Fisher informations over frequency bins.

    ``S(omega_grid, theta)`` returns the mean count per bin.
    """
    omega = np.asarray(omega_grid, dtype=float)
    h = _step(theta, h)
    s0 = np.asarray(S(omega, theta), dtype=float)
    if np.any(s0 <= 0):
        raise ValidationError("spectrum must be positive on the grid")
    ds = (np.asarray(S(omega, theta + h)) - np.asarray(S(omega, theta - h))) / (2 * h)
    return float(np.sum(ds ** 2 / s0))


def joint_fisher_from_distribution(p12, dp12, theta: str = "theta", slack: float = 1e-9) -> FisherResult:
    """Joint and marginal Fisher information of a two-mode counting distribution.

    Marginals are the row and column sums. Raises if the joint value falls
    below the mean of the marginals, which would contradict data processing.
    """
    p12 = np.real(np.asarray(p12, dtype=complex))
    dp12 = np.real(np.asarray(dp12, dtype=complex))
    if p12.ndim != 2 or p12.shape != dp12.shape:
        raise ValidationError("joint distribution must be a 2-D array matching its derivative")
    Fj, Fj_raw, dropped = fisher_from_distribution(p12, dp12)
    F1 = fisher_from_distribution(p12.sum(1), dp12.sum(1))[0]
    F2 = fisher_from_distribution(p12.sum(0), dp12.sum(0))[0]
    if Fj < 0.5 * (F1 + F2) - slack * max(1.0, Fj):
        raise NumericalError(f"joint Fisher information {Fj} below marginal mean {(F1 + F2) / 2}")
    F0 = float(dp12[0, 0] ** 2 / p12[0, 0]) if p12[0, 0] > P_FLOOR else 0.0
    return FisherResult(theta, Fj, F0, F_joint=Fj, F_marginals=(F1, F2), F_raw=Fj_raw, dropped_mass=dropped)


def joint_frequency_fisher(rho, drho, sites: Sequence[int] = (-2, -1), theta: str = "theta") -> FisherResult:
    """Joint Fisher information of counting two sensor modes of a cascaded model."""
    space = rho.space
    sites = [s % space.n_sites for s in sites]
    if len(sites) != 2:
        raise ValidationError("joint counting needs exactly two modes")
    p, dp, dims = _counting_distribution(rho, drho, sites)
    return joint_fisher_from_distribution(p.reshape(dims), dp.reshape(dims), theta)
