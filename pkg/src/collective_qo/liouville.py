"""Vectorized Liouvillians, steady states and spectral analysis.

Vectorization is row-major: ``vec(A rho B) = (A kron B^T) vec(rho)``, so
``vec(X) = X.ravel()`` and ``Tr[A B] = vec(A^T) . vec(B)``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import DegenerateSteadyStateError, NumericalError, ValidationError
from .hilbert import SpaceDescriptor, StateMatrix
from .models import SystemModel

ZERO_TOL = 1e-13  # relative to ||L||; metastable gaps reach ~1e-12
METASTABLE_RATIO = 10.0
SPARSE_DIM = 48          # Hilbert dimension above which assembly defaults to sparse
EIG_CHECK_DIM = 40       # full eigenvalue uniqueness check up to this Hilbert dimension


@dataclass(frozen=True, eq=False)
class Superoperator:
    """Liouvillian acting on row-major vectorized density matrices."""

    dim: int
    matrix: object  # ndarray or scipy sparse matrix
    space: SpaceDescriptor | None = None

    @property
    def is_sparse(self) -> bool:
        return sp.issparse(self.matrix)

    def dense(self) -> np.ndarray:
        return self.matrix.toarray() if self.is_sparse else np.asarray(self.matrix)

    def apply(self, rho) -> np.ndarray:
        r = rho.matrix if isinstance(rho, StateMatrix) else np.asarray(rho)
        return (self.matrix @ r.ravel()).reshape(self.dim, self.dim)

    @property
    def norm(self) -> float:
        if self.is_sparse:
            return float(abs(self.matrix).sum(axis=1).max())
        return float(np.max(np.sum(np.abs(self.matrix), axis=1)))

    def __add__(self, other: "Superoperator") -> "Superoperator":
        if self.is_sparse or other.is_sparse:
            M = sp.csr_matrix(self.matrix) + sp.csr_matrix(other.matrix)
        else:
            M = self.matrix + other.matrix
        return Superoperator(self.dim, M, self.space)


@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    """Eigenvalues sorted by descending real part with biorthonormal eigenmatrices.

    ``Tr[left[m] @ right[n]] = delta_mn``; ``right[0]`` is the steady state
    and ``left[0]`` the identity.
    """

    eigenvalues: np.ndarray
    right: np.ndarray  # (d^2, d, d)
    left: np.ndarray   # (d^2, d, d)
    condition: float
    dim: int

    def coefficients(self, rho0) -> np.ndarray:
        r = rho0.matrix if isinstance(rho0, StateMatrix) else np.asarray(rho0)
        # Tr[L_mu rho] = sum_ij L_ij rho_ji
        return np.einsum("mij,ji->m", self.left, r)

    def evolve(self, rho0, t: float) -> np.ndarray:
        c = self.coefficients(rho0) * np.exp(self.eigenvalues * t)
        return np.einsum("m,mij->ij", c, self.right)


@dataclass(frozen=True)
class MetastabilityReport:
    gap: float
    cluster_index: int
    tau_2: float
    tau_next: float
    ratio: float
    metastable: bool


def _kron_terms(H, channels, sparse: bool):
    d = H.shape[0]
    if sparse:
        kron, eye = sp.kron, sp.identity(d, dtype=complex, format="csr")
        mk = lambda M: sp.csr_matrix(M)  # noqa: E731
    else:
        kron, eye = np.kron, np.eye(d, dtype=complex)
        mk = lambda M: M  # noqa: E731
    Hm = mk(H)
    L = -1j * (kron(Hm, eye) - kron(eye, Hm.T))
    for A, B, rate in channels:
        if rate == 0:
            continue
        BdA = B.conj().T @ A
        L = L + (rate / 2) * (2 * kron(mk(A), mk(B.conj())) - kron(mk(BdA), eye) - kron(eye, mk(BdA.T)))
    return sp.csr_matrix(L) if sparse else L


def assemble(model: SystemModel, sparse: bool | None = None, t: float | None = None) -> Superoperator:
    """Liouvillian of a time-independent model (or a time-dependent one frozen at ``t``)."""
    if model.time_dependent and t is None:
        raise ValidationError("time-dependent model: use dynamics.propagate_timedep or pass t")
    if sparse is None:
        sparse = model.dim > SPARSE_DIM
    H = model.hamiltonian_at(t)
    chans = [(c.A, c.B, c.coefficient(t)) for c in model.channels]
    return Superoperator(model.dim, _kron_terms(H, chans, sparse), model.space)


def _trace_row(d: int) -> np.ndarray:
    return np.eye(d).ravel()


def _effective(M, d, sparse):
    """Replace row 0 by the trace functional."""
    if sparse:
        M = sp.lil_matrix(M)
        M[0, :] = sp.csr_matrix(_trace_row(d))
        return sp.csc_matrix(M)
    M = np.array(M, dtype=complex, copy=True)
    M[0, :] = _trace_row(d)
    return M


def _check_unique(L: Superoperator):
    d = L.dim
    tol = ZERO_TOL * max(L.norm, 1e-300)
    if d <= EIG_CHECK_DIM:
        w = sla.eigvals(L.dense())
        if np.sum(np.abs(w.real) < tol) > 1:
            raise DegenerateSteadyStateError(
                f"{int(np.sum(np.abs(w.real) < tol))} eigenvalues with |Re| < {tol:.2e}: steady state is not unique"
            )
        return
    # large spaces: the pivots of the trace-constrained system reveal a
    # second null direction without a full eigen-solve
    if not L.is_sparse:
        lu, piv = sla.lu_factor(_effective(L.matrix, d, False), check_finite=False)
        if np.min(np.abs(np.diag(lu))) < tol:
            raise DegenerateSteadyStateError("trace-constrained Liouvillian is singular: steady state is not unique")


def steady_state(L: Superoperator, check: bool = True) -> StateMatrix:
    """Unique steady state from the trace-constrained linear system."""
    d = L.dim
    if check:
        _check_unique(L)
    b = np.zeros(d * d, dtype=complex)
    b[0] = 1
    A = _effective(L.matrix, d, L.is_sparse)
    with warnings.catch_warnings():
        warnings.simplefilter("error", sla.LinAlgWarning)
        try:
            x = spla.spsolve(A, b) if L.is_sparse else sla.solve(A, b)
        except (sla.LinAlgError, sla.LinAlgWarning, RuntimeError) as exc:
            raise DegenerateSteadyStateError(f"steady-state system is singular: {exc}") from exc
    if not np.all(np.isfinite(x)):
        raise DegenerateSteadyStateError("steady-state solve produced non-finite entries")
    rho = x.reshape(d, d)
    rho = 0.5 * (rho + rho.conj().T)
    space = L.space or SpaceDescriptor((d,))
    return StateMatrix.from_matrix(space, rho)


def steady_state_escalating(build: Callable[[int], SystemModel], n_trunc: int = 5, cavity_site: int = -1,
                            max_trunc: int = 12, tol: float = 1e-6):
    """Steady state with Fock-truncation escalation.

    Rebuilds with ``n_trunc + 2`` while the top Fock level of the bosonic
    site holds more than ``tol`` population.

    Returns
    -------
    (StateMatrix, SystemModel, int)
    """
    from .hilbert import partial_trace

    n = int(n_trunc)
    while True:
        model = build(n)
        rho = steady_state(assemble(model))
        site = cavity_site % model.space.n_sites
        top = partial_trace(rho, [site]).matrix[-1, -1].real
        if top <= tol:
            return rho, model, n
        if n >= max_trunc:
            raise NumericalError(f"Fock truncation not converged at n_trunc={n} (top population {top:.2e})")
        n = min(n + 2, max_trunc)


def steady_state_derivative(L_builder: Callable[[float], Superoperator], theta: float, h: float | None = None) -> np.ndarray:
    """Parameter derivative of the steady state.

    Uses ``d rho = -L_eff^{-1} (dL_eff) rho_ss`` with ``dL`` from a central
    difference of the assembled Liouvillian and the trace row held fixed.
    """
    if h is None:
        h = 1e-6 * max(abs(theta), 1.0)
    L0 = L_builder(theta)
    d = L0.dim
    rho = steady_state(L0)
    Lp, Lm = L_builder(theta + h), L_builder(theta - h)
    dL = (Lp.matrix - Lm.matrix) / (2 * h)
    rhs = dL @ rho.matrix.ravel()
    rhs = np.asarray(rhs).ravel()
    rhs[0] = 0.0  # trace row has no parameter dependence
    A = _effective(L0.matrix, d, L0.is_sparse)
    x = spla.spsolve(A, -rhs) if L0.is_sparse else sla.solve(A, -rhs)
    D = x.reshape(d, d)
    return 0.5 * (D + D.conj().T)


def spectral_decomposition(L: Superoperator, cond_limit: float = 1e12) -> SpectralDecomposition:
    """Full eigensystem with left eigenmatrices from the inverse eigenvector matrix."""
    d = L.dim
    M = L.dense()
    w, V = sla.eig(M)
    order = np.lexsort((-w.imag, -w.real))
    w, V = w[order], V[:, order]
    cond = float(np.linalg.cond(V))
    Vinv = sla.inv(V)
    if cond > cond_limit:
        resid = np.max(np.abs(M @ V - V * w))
        warnings.warn(f"ill-conditioned Liouvillian eigenbasis (cond {cond:.2e}, residual {resid:.2e})",
                      RuntimeWarning, stacklevel=2)
    right = V.T.reshape(-1, d, d)
    left = np.transpose(Vinv.reshape(-1, d, d), (0, 2, 1))
    # fix the zero mode: right eigenmatrix of unit trace, left one the identity
    tr = np.trace(right[0])
    if abs(tr) > 1e-12:
        right[0] = right[0] / tr
        left[0] = left[0] * tr
    return SpectralDecomposition(w, right, left, cond, d)


def metastability(decomp: SpectralDecomposition, rho0, threshold: float = METASTABLE_RATIO):
    """Locate the slow eigenvalue cluster and the metastable state.

    The cluster index ``m`` maximizes ``Re L_{m+1} / Re L_m`` (both real parts
    negative, 1-based) over ``2 <= m <= min(8, d^2 - 1)``; without a ratio
    above ``threshold`` the report has ``m = 1``.
    """
    lam = decomp.eigenvalues.real
    n = len(lam)
    best_m, best_r = 1, 0.0
    for m in range(2, min(8, n - 1) + 1):
        a, b = lam[m - 1], lam[m]
        if a >= 0:
            continue
        r = b / a
        if r > best_r:
            best_m, best_r = m, r
    gap = abs(lam[1]) if n > 1 else 0.0
    tau2 = 1 / gap if gap > 0 else np.inf
    metastable = best_r > threshold
    m = best_m if metastable else 1
    tau_next = 1 / abs(lam[m]) if n > m and lam[m] != 0 else tau2
    c = decomp.coefficients(rho0)
    rho_mm = decomp.right[0].copy()
    for mu in range(1, m):
        rho_mm = rho_mm + c[mu] * decomp.right[mu]
    rho_mm = 0.5 * (rho_mm + rho_mm.conj().T)
    rho_mm = rho_mm / np.trace(rho_mm).real
    space = rho0.space if isinstance(rho0, StateMatrix) else SpaceDescriptor((decomp.dim,))
    report = MetastabilityReport(gap=gap, cluster_index=m, tau_2=tau2, tau_next=tau_next,
                                 ratio=float(best_r), metastable=bool(metastable))
    return report, StateMatrix(space, rho_mm, check=False)


def liouvillian_gap(L: Superoperator) -> float:
    """|Re Lambda_2| from the full spectrum."""
    w = sla.eigvals(L.dense())
    re = np.sort(w.real)[::-1]
    return float(-re[1])
