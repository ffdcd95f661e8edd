"""The concrete subspaces and target channel matrices.

Index conventions (0-based in memory):

* ``canonical_basis_7()[k]`` is psi_{k+1} of the seven-vector basis, so
  entry 5 is ``(|00> - |11>)/sqrt(2)`` and entry 6 the |22>-weighted vector.
* ``canonical_basis_general(d)`` keeps the native 0-based numbering: the
  first ``d - 1`` vectors are entangled, the rest are ``|i>|j>`` products
  placed by :func:`product_index`.
* Output label ``y_j`` of ``matrix_m7`` is column ``j - 1``.
"""

from __future__ import annotations

import numpy as np

from .linalg import ket, kron, max_entangled


def _basis_ket(i: int, j: int, d: int) -> np.ndarray:
    return kron(ket(i, d), ket(j, d))


def canonical_basis_7() -> list[np.ndarray]:
    """Seven orthonormal vectors in C^3 (x) C^3 avoiding |phi+_3> and |01>."""
    k = lambda i, j: _basis_ket(i, j, 3)  # noqa: E731
    return [
        k(0, 2),
        k(1, 0),
        k(1, 2),
        k(2, 0),
        k(2, 1),
        (k(0, 0) - k(1, 1)) / np.sqrt(2),
        (k(0, 0) + k(1, 1)) / np.sqrt(6) - np.sqrt(2 / 3) * k(2, 2),
    ]


def product_index(i: int, j: int, d: int) -> int:
    """Position of ``|i>|j>`` (``i != j``) in the general basis."""
    if i == j:
        raise ValueError("product_index needs i != j")
    if not (0 <= i < d and 0 <= j < d):
        raise ValueError(f"indices ({i}, {j}) out of range for d={d}")
    if i > j:
        return i * (d - 1) + j + (d - 1)
    return i * (d - 1) + (j - 1) + (d - 1)


def product_pair(k: int, d: int) -> tuple[int, int]:
    """Inverse of :func:`product_index`."""
    if not (d - 1 <= k <= d * d - 2):
        raise ValueError(f"index {k} is not a product index for d={d}")
    i, rem = divmod(k - (d - 1), d - 1)
    j = rem if rem < i else rem + 1
    return i, j


def _entangled_vector(k: int, d: int) -> np.ndarray:
    # |phi+_{k+1}> lives on the first k+1 diagonal kets of C^d (x) C^d
    phi = np.zeros(d * d, dtype=complex)
    for m in range(k + 1):
        phi += _basis_ket(m, m, d)
    phi /= np.sqrt(k + 1)
    return phi / np.sqrt(k + 2) - np.sqrt((k + 1) / (k + 2)) * _basis_ket(k + 1, k + 1, d)


def canonical_basis_general(d: int) -> list[np.ndarray]:
    """``d^2 - 1`` orthonormal vectors spanning the complement of |phi+_d>."""
    if d < 3:
        raise ValueError("the general family needs d >= 3")
    basis: list[np.ndarray] = [_entangled_vector(k, d) for k in range(d - 1)]
    for k in range(d - 1, d * d - 1):
        basis.append(_basis_ket(*product_pair(k, d), d))
    return basis


def phi_plus(d: int) -> np.ndarray:
    return max_entangled(d)


def matrix_m7(p: float) -> np.ndarray:
    """The 7x7 target: identity on y_1..y_5 plus a 2x2 block mixing y_6, y_7."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    m = np.zeros((7, 7))
    m[:5, :5] = np.eye(5)
    m[5, 5], m[5, 6] = p, 1.0 - p
    m[6, 5], m[6, 6] = p / 3, 1.0 - p / 3
    return m


def sigma_block(d: int) -> np.ndarray:
    """Lower-triangular ``(d-1) x (d-1)`` block of the general target."""
    n = d - 1
    m = np.zeros((n, n))
    for i in range(1, n + 1):
        m[i - 1, 0] = 2 / (i * (i + 1))
        for j in range(2, i):
            m[i - 1, j - 1] = 1 / (i * (i + 1))
        if i > 1:
            m[i - 1, i - 1] = i / (i + 1)
    return m


def matrix_general(d: int) -> np.ndarray:
    """``(d^2-1) x (d^2-1)`` target: the triangular block (+) I_{d(d-1)}."""
    if d < 3:
        raise ValueError("the general family needs d >= 3")
    n = d - 1
    k = d * d - 1
    m = np.zeros((k, k))
    m[:n, :n] = sigma_block(d)
    m[n:, n:] = np.eye(k - n)
    return m
