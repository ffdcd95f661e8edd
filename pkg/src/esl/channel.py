"""Stinespring channel model: isometries, POVMs, states, and channel matrices."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .linalg import as_matrix, dagger, is_psd, partial_trace

ISOMETRY_TOL = 1e-12
POVM_TOL = 1e-9
STATE_TRACE_TOL = 1e-12
STOCHASTIC_TOL = 1e-12
# negative probabilities in (-CLAMP_TOL, 0) are rounding noise
CLAMP_TOL = 1e-12


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Isometry:
    """``V : C^{d_A} -> C^{d_B} (x) C^{d_E}`` stored as a ``(d_B*d_E, d_A)`` matrix."""

    matrix: np.ndarray
    d_b: int
    d_e: int

    def __post_init__(self):
        v = as_matrix(self.matrix)
        if v.shape[0] != self.d_b * self.d_e:
            raise ValueError(
                f"isometry has {v.shape[0]} rows, expected d_B*d_E = {self.d_b * self.d_e}"
            )
        err = np.max(np.abs(dagger(v) @ v - np.eye(v.shape[1])), initial=0.0)
        if err > ISOMETRY_TOL:
            raise ValueError(f"V^dag V deviates from identity by {err:.3e}")
        object.__setattr__(self, "matrix", _frozen(v))

    @property
    def d_a(self) -> int:
        return self.matrix.shape[1]

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.d_a, self.d_b, self.d_e

    @classmethod
    def identity(cls, d: int) -> "Isometry":
        return cls(np.eye(d), d, 1)


@dataclass(frozen=True, eq=False)
class Povm:
    effects: tuple

    def __post_init__(self):
        effects = tuple(_frozen(as_matrix(e)) for e in self.effects)
        if not effects:
            raise ValueError("POVM needs at least one effect")
        d = effects[0].shape[0]
        for k, e in enumerate(effects):
            if e.shape != (d, d):
                raise ValueError(f"effect {k} has shape {e.shape}, expected {(d, d)}")
            if not is_psd(e, POVM_TOL, POVM_TOL):
                raise ValueError(f"effect {k} is not positive semidefinite")
        err = np.max(np.abs(sum(effects) - np.eye(d)))
        if err > POVM_TOL:
            raise ValueError(f"effects sum to identity only within {err:.3e}")
        object.__setattr__(self, "effects", effects)

    @property
    def dim(self) -> int:
        return self.effects[0].shape[0]

    def __len__(self) -> int:
        return len(self.effects)

    def stack(self) -> np.ndarray:
        return np.stack(self.effects)

    @classmethod
    def computational(cls, d: int) -> "Povm":
        return cls(tuple(np.diag(np.eye(d)[k]) for k in range(d)))

    @classmethod
    def trivial(cls, d: int) -> "Povm":
        return cls((np.eye(d),))


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    matrix: np.ndarray

    def __post_init__(self):
        rho = as_matrix(self.matrix)
        if rho.shape[0] != rho.shape[1]:
            raise ValueError(f"density matrix must be square, got {rho.shape}")
        if not is_psd(rho):
            raise ValueError("density matrix is not positive semidefinite")
        tr = np.trace(rho)
        if abs(tr - 1) > STATE_TRACE_TOL:
            raise ValueError(f"density matrix has trace {tr}, expected 1")
        object.__setattr__(self, "matrix", _frozen(rho))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def pure(cls, vec) -> "DensityMatrix":
        v = np.asarray(vec, dtype=complex).ravel()
        return cls(np.outer(v, v.conj()))

    @classmethod
    def basis(cls, index: int, d: int) -> "DensityMatrix":
        return cls(np.diag(np.eye(d)[index]).astype(complex))


def _state_matrix(rho) -> np.ndarray:
    return rho.matrix if isinstance(rho, DensityMatrix) else as_matrix(rho)


def joint_state(v: Isometry, rho) -> np.ndarray:
    """V rho V^dag on the receiver (x) environment space."""
    r = _state_matrix(rho)
    if r.shape != (v.d_a, v.d_a):
        raise ValueError(f"state of shape {r.shape} does not match input dim {v.d_a}")
    return v.matrix @ r @ dagger(v.matrix)


def channel_apply(v: Isometry, rho) -> DensityMatrix:
    """Receiver output ``Tr_E(V rho V^dag)``."""
    return DensityMatrix(partial_trace(joint_state(v, rho), (v.d_b, v.d_e), keep="B"))


def complementary_apply(v: Isometry, rho) -> DensityMatrix:
    """Environment output ``Tr_B(V rho V^dag)``."""
    return DensityMatrix(partial_trace(joint_state(v, rho), (v.d_b, v.d_e), keep="E"))


def isometry_from_subspace_basis(basis: Sequence, d_b: int, d_e: int,
                                 rotation=None, tol: float = 1e-10) -> Isometry:
    """Isometry whose columns are ``basis`` (optionally mixed by a unitary).

    With ``rotation=U`` the result is ``V U``; its range is the span of
    ``basis`` whatever ``U`` is.
    """
    cols = np.column_stack([np.asarray(b, dtype=complex).ravel() for b in basis])
    if cols.shape[0] != d_b * d_e:
        raise ValueError(f"basis vectors have dim {cols.shape[0]}, expected {d_b * d_e}")
    gram_err = np.max(np.abs(dagger(cols) @ cols - np.eye(cols.shape[1])))
    if gram_err > tol:
        raise ValueError(f"basis is not orthonormal (Gram error {gram_err:.3e})")
    if rotation is not None:
        u = as_matrix(rotation)
        if u.shape != (cols.shape[1], cols.shape[1]):
            raise ValueError(f"rotation of shape {u.shape} does not match {cols.shape[1]} basis vectors")
        if np.max(np.abs(dagger(u) @ u - np.eye(u.shape[0]))) > tol:
            raise ValueError("rotation is not unitary")
        cols = cols @ u
    return Isometry(cols, d_b, d_e)


def range_projector(v: Isometry) -> np.ndarray:
    return v.matrix @ dagger(v.matrix)


def clean_probabilities(p: np.ndarray, tol: float = CLAMP_TOL) -> np.ndarray:
    """Drop imaginary rounding, clamp tiny negatives, reject real ones."""
    p = np.real(np.asarray(p)).astype(float)
    if np.any(p < -tol):
        raise ValueError(f"negative probability {p.min():.3e}")
    return np.where(p < 0, 0.0, p)


def check_channel_matrix(m, tol: float = STOCHASTIC_TOL) -> np.ndarray:
    """Validate a row-stochastic matrix and return it as a float array."""
    a = np.asarray(m, dtype=float)
    if a.ndim != 2:
        raise ValueError(f"channel matrix must be 2-d, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("channel matrix has non-finite entries")
    if np.any(a < -tol) or np.any(a > 1 + tol):
        raise ValueError("channel matrix entries must lie in [0, 1]")
    dev = np.max(np.abs(a.sum(axis=1) - 1), initial=0.0)
    if dev > tol:
        raise ValueError(f"rows sum to 1 only within {dev:.3e}")
    return a


def is_row_stochastic(m, tol: float = STOCHASTIC_TOL) -> bool:
    try:
        check_channel_matrix(m, tol)
    except ValueError:
        return False
    return True


def unassisted_channel_matrix(v: Isometry, encodings: Sequence, bob_povm: Povm) -> np.ndarray:
    """``P[i, j] = Tr[M_j N(rho_i)]`` with no access to the environment."""
    if bob_povm.dim != v.d_b:
        raise ValueError(f"POVM dim {bob_povm.dim} does not match receiver dim {v.d_b}")
    outputs = np.stack([channel_apply(v, rho).matrix for rho in encodings])
    # Tr[M rho] = sum_ab M_ab rho_ba
    p = np.einsum("jab,iba->ij", bob_povm.stack(), outputs)
    return check_channel_matrix(clean_probabilities(p))
