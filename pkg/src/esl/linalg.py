"""Small dense complex linear algebra.

Everything here works on plain ``numpy`` arrays.  Composite systems use the
receiver-major convention: the joint basis vector ``|b>|e>`` sits at flat
index ``b * d_E + e``.
"""

from __future__ import annotations

from functools import reduce

import numpy as np

HERMITIAN_TOL = 1e-9
EIGEN_TOL = 1e-9


def as_matrix(m) -> np.ndarray:
    """Coerce to a 2-d complex array with finite entries."""
    a = np.asarray(m, dtype=complex)
    if a.ndim != 2:
        raise ValueError(f"expected a 2-d matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    return a


def dagger(m) -> np.ndarray:
    return np.conj(np.asarray(m)).T


def kron(a, b, *more) -> np.ndarray:
    """Kronecker product of two or more matrices (left to right)."""
    return reduce(np.kron, (a, b) + more)


def ket(index: int, dim: int) -> np.ndarray:
    v = np.zeros(dim, dtype=complex)
    v[index] = 1.0
    return v


def projector(vec) -> np.ndarray:
    v = np.asarray(vec, dtype=complex)
    return np.outer(v, v.conj())


def max_entangled(d: int) -> np.ndarray:
    """|phi+_d> = sum_k |kk> / sqrt(d) in dimension d*d."""
    v = np.zeros(d * d, dtype=complex)
    v[np.arange(d) * (d + 1)] = 1.0 / np.sqrt(d)
    return v


def normalize_state(vec, tol: float = 1e-12) -> np.ndarray:
    """Check that ``vec`` is a unit vector and return it as a complex array."""
    v = np.asarray(vec, dtype=complex).ravel()
    nrm = np.linalg.norm(v)
    if abs(nrm - 1.0) > tol:
        raise ValueError(f"state vector has norm {nrm!r}, expected 1")
    return v


def partial_trace(m, dims: tuple[int, int], keep: str = "B") -> np.ndarray:
    """Reduce an operator on ``C^{d_B} (x) C^{d_E}`` to one factor.

    ``keep`` is ``"B"`` (trace out the environment) or ``"E"`` (trace out
    the receiver).
    """
    d_b, d_e = dims
    a = np.asarray(m)
    if a.shape != (d_b * d_e, d_b * d_e):
        raise ValueError(
            f"operator of shape {a.shape} does not match dims {dims}"
        )
    t = a.reshape(d_b, d_e, d_b, d_e)
    if keep == "B":
        return np.einsum("iaja->ij", t)
    if keep == "E":
        return np.einsum("aiaj->ij", t)
    raise ValueError(f"keep must be 'B' or 'E', got {keep!r}")


def is_hermitian(m, tol: float = HERMITIAN_TOL) -> bool:
    a = np.asarray(m)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    return bool(np.max(np.abs(a - dagger(a)), initial=0.0) <= tol)


def is_psd(m, tol: float = EIGEN_TOL, herm_tol: float = HERMITIAN_TOL) -> bool:
    """True iff ``m`` is Hermitian within ``herm_tol`` with eigenvalues >= -tol."""
    a = np.asarray(m)
    if not is_hermitian(a, herm_tol):
        return False
    if a.size == 0:
        return True
    evals = np.linalg.eigvalsh((a + dagger(a)) / 2)
    return bool(evals[0] >= -tol)


def haar_random_unitary(d: int, seed=None) -> np.ndarray:
    """Haar-distributed ``d x d`` unitary.

    QR of a complex Ginibre matrix, with the phases of R's diagonal pushed
    into Q so the result is Haar rather than QR-biased.  ``seed`` may be an
    int or a ``numpy.random.Generator``.
    """
    if d < 1:
        raise ValueError("dimension must be at least 1")
    rng = np.random.default_rng(seed)
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    diag = np.diag(r)
    return q * (diag / np.abs(diag))


def random_density_matrix(d: int, rng, rank: int | None = None) -> np.ndarray:
    """Random state from a Ginibre matrix (Hilbert-Schmidt measure for full rank)."""
    k = d if rank is None else rank
    g = rng.standard_normal((d, k)) + 1j * rng.standard_normal((d, k))
    rho = g @ dagger(g)
    return rho / np.trace(rho).real


def random_povm(d: int, n_outcomes: int, rng) -> list[np.ndarray]:
    """Random ``n_outcomes``-effect POVM: Gram matrices rescaled by S^{-1/2}."""
    grams = []
    for _ in range(n_outcomes):
        g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        grams.append(dagger(g) @ g)
    total = sum(grams)
    evals, evecs = np.linalg.eigh(total)
    inv_sqrt = (evecs / np.sqrt(evals)) @ dagger(evecs)
    return [inv_sqrt @ g @ inv_sqrt for g in grams]
