"""Tensor-product spaces, operators and density matrices.

Subsystems are ordered emitters first, then the cavity, then sensors.
All storage is dense complex.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import reduce
from typing import Iterable, Sequence

import numpy as np

from .errors import ValidationError

HERMITIAN_TOL = 1e-10
TRACE_TOL = 1e-9
POSITIVITY_FLOOR = -1e-8


@dataclass(frozen=True)
class SpaceDescriptor:
    """Ordered list of subsystem dimensions."""

    subsystem_dims: tuple[int, ...]

    def __post_init__(self):
        dims = tuple(int(d) for d in self.subsystem_dims)
        if not dims or any(d < 1 for d in dims):
            raise ValidationError(f"subsystem dimensions must be positive, got {dims}")
        object.__setattr__(self, "subsystem_dims", dims)

    @property
    def dim(self) -> int:
        return int(np.prod(self.subsystem_dims))

    @property
    def n_sites(self) -> int:
        return len(self.subsystem_dims)

    def __add__(self, other: "SpaceDescriptor") -> "SpaceDescriptor":
        # concatenation of factors, used when attaching sensors
        return SpaceDescriptor(self.subsystem_dims + other.subsystem_dims)


def _as_space(space) -> SpaceDescriptor:
    if isinstance(space, SpaceDescriptor):
        return space
    return SpaceDescriptor(tuple(space))


@dataclass(frozen=True, eq=False)
class Operator:
    """Dense operator acting on a composite space."""

    space: SpaceDescriptor
    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        d = self.space.dim
        if m.shape != (d, d):
            raise ValidationError(f"operator shape {m.shape} does not match space dimension {d}")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def dag(self) -> "Operator":
        return Operator(self.space, self.matrix.conj().T)

    def _other(self, other):
        if isinstance(other, Operator):
            if other.space != self.space:
                raise ValidationError("operators live on different spaces")
            return other.matrix
        return None

    def __matmul__(self, other):
        m = self._other(other)
        if m is None:
            return NotImplemented
        return Operator(self.space, self.matrix @ m)

    def __add__(self, other):
        m = self._other(other)
        if m is None:
            return NotImplemented
        return Operator(self.space, self.matrix + m)

    def __sub__(self, other):
        m = self._other(other)
        if m is None:
            return NotImplemented
        return Operator(self.space, self.matrix - m)

    def __neg__(self):
        return Operator(self.space, -self.matrix)

    def __mul__(self, c):
        if isinstance(c, Operator):
            return NotImplemented
        return Operator(self.space, complex(c) * self.matrix)

    __rmul__ = __mul__

    def __truediv__(self, c):
        return Operator(self.space, self.matrix / complex(c))

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        return bool(np.allclose(self.matrix, self.matrix.conj().T, atol=tol, rtol=0))


@dataclass(frozen=True, eq=False)
class StateMatrix:
    """Density matrix with validated trace, Hermiticity and positivity.

    Parameters
    ----------
    space : SpaceDescriptor
    matrix : ndarray
        Square complex matrix.
    check : bool
        Validate the invariants on construction.
    """

    space: SpaceDescriptor
    matrix: np.ndarray
    check: bool = field(default=True, repr=False)

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        d = self.space.dim
        if m.shape != (d, d):
            raise ValidationError(f"state shape {m.shape} does not match space dimension {d}")
        if self.check:
            herm_err = np.max(np.abs(m - m.conj().T))
            if herm_err > HERMITIAN_TOL:
                raise ValidationError(f"density matrix not Hermitian (error {herm_err:.2e})")
            tr = np.trace(m).real
            if abs(tr - 1) > TRACE_TOL:
                raise ValidationError(f"density matrix trace {tr!r} differs from 1")
            lmin = np.linalg.eigvalsh(0.5 * (m + m.conj().T))[0]
            if lmin < POSITIVITY_FLOOR:
                raise ValidationError(f"density matrix has negative eigenvalue {lmin:.2e}")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @classmethod
    def from_matrix(cls, space, matrix, hermitize: bool = True, normalize: bool = True) -> "StateMatrix":
        """Clean up round-off (Hermitian part, unit trace) then validate."""
        m = np.asarray(matrix, dtype=complex)
        if hermitize:
            m = 0.5 * (m + m.conj().T)
        if normalize:
            m = m / np.trace(m).real
        return cls(_as_space(space), m)

    @classmethod
    def pure(cls, space, psi) -> "StateMatrix":
        psi = np.asarray(psi, dtype=complex).ravel()
        psi = psi / np.linalg.norm(psi)
        return cls(_as_space(space), np.outer(psi, psi.conj()))

    @property
    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.matrix)[0])


def make_ladder(kind: str, n_trunc: int | None = None) -> Operator:
    """Single-site lowering operator.

    Parameters
    ----------
    kind : {"qubit", "boson"}
        ``qubit`` gives ``|g><e|`` with index 0 the ground state;
        ``boson`` gives the annihilation operator truncated at ``n_trunc``.
    n_trunc : int
        Highest Fock number kept (bosons only).
    """
    if kind in ("qubit", "qubit-lowering"):
        return Operator(SpaceDescriptor((2,)), np.array([[0, 1], [0, 0]], dtype=complex))
    if kind in ("boson", "boson-annihilation"):
        if n_trunc is None or int(n_trunc) < 1:
            raise ValidationError(f"bosonic truncation must be >= 1, got {n_trunc}")
        n = int(n_trunc)
        return Operator(SpaceDescriptor((n + 1,)), np.diag(np.sqrt(np.arange(1, n + 1)), 1))
    raise ValidationError(f"unknown ladder kind {kind!r}")


def embed(op, site: int, space) -> Operator:
    """Kronecker-embed a single-site operator at ``site`` of ``space``."""
    space = _as_space(space)
    m = op.matrix if isinstance(op, Operator) else np.asarray(op, dtype=complex)
    if not 0 <= site < space.n_sites:
        raise ValidationError(f"site {site} outside space with {space.n_sites} sites")
    if m.shape != (space.subsystem_dims[site],) * 2:
        raise ValidationError(
            f"operator of shape {m.shape} cannot sit on a site of dimension {space.subsystem_dims[site]}"
        )
    factors = [np.eye(d) for d in space.subsystem_dims]
    factors[site] = m
    return Operator(space, reduce(np.kron, factors))


def identity(space) -> Operator:
    space = _as_space(space)
    return Operator(space, np.eye(space.dim))


def expectation(state, op) -> complex:
    """Tr[op state]."""
    if isinstance(state, StateMatrix) and isinstance(op, Operator) and state.space != op.space:
        raise ValidationError("state and operator live on different spaces")
    rho = state.matrix if isinstance(state, StateMatrix) else np.asarray(state)
    m = op.matrix if isinstance(op, Operator) else np.asarray(op)
    if rho.shape != m.shape:
        raise ValidationError(f"shape mismatch {rho.shape} vs {m.shape}")
    # Tr[AB] without forming the product
    return complex(np.einsum("ij,ji->", m, rho))


def partial_trace(state, keep: Iterable[int], space=None) -> StateMatrix:
    """Reduced density matrix on the sites in ``keep``."""
    if isinstance(state, StateMatrix):
        space, rho = state.space, state.matrix
    else:
        space, rho = _as_space(space), np.asarray(state, dtype=complex)
    keep = sorted(set(int(k) for k in keep))
    n = space.n_sites
    if not keep or keep[0] < 0 or keep[-1] >= n:
        raise ValidationError(f"invalid keep set {keep} for {n} sites")
    dims = space.subsystem_dims
    t = rho.reshape(dims + dims)
    traced = [i for i in range(n) if i not in keep]
    # trace pairs from the highest index down so axis numbers stay valid
    cur = n
    for i in sorted(traced, reverse=True):
        t = np.trace(t, axis1=i, axis2=i + cur)
        cur -= 1
    sub = SpaceDescriptor(tuple(dims[k] for k in keep))
    return StateMatrix(sub, t.reshape(sub.dim, sub.dim), check=False)


def basis_state(space, indices: Sequence[int]) -> np.ndarray:
    """Product basis ket with the given per-site occupation indices."""
    space = _as_space(space)
    kets = []
    for d, i in zip(space.subsystem_dims, indices):
        v = np.zeros(d, dtype=complex)
        v[i] = 1
        kets.append(v)
    return reduce(np.kron, kets)
