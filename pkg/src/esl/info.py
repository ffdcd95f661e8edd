"""Figures of merit for channel matrices: information, capacity, trace fidelity."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import check_channel_matrix

NO_UNLOCK = "no-unlock"
UNLOCK = "unlock"
OPTIMAL_UNLOCK = "optimal-unlock"

QUANTUM_FIDELITY_NOTE = (
    "any square channel matrix of a d-level system has PSD rank <= d; its "
    "column-max monotone is at least its trace and at most the PSD rank, so Tr <= d"
)

PR_BOUND_CHAIN = (
    ("P_PR(N7) subset P_SR(N7 + 1 cbit)",
     "shared unbiased bit plays the sender's box output; the sender transmits f(x) and "
     "the receiver sets b = lambda xor f(x) g(j) (checked numerically by simulate_pr_via_sr_cbit)"),
    ("P_SR(N7 + 1 cbit) subset P_SR(Q3 + Q2)",
     "unassisted N7 matrices are realizable by a qutrit; a cbit by a qubit identity channel"),
    ("P_SR(Q3 + Q2) subset P_SR(Q5)", "no-hypersignaling principle (cited, not re-derived)"),
    ("F_c^PR(N7) <= F_c^SR(Q5) <= 5",
     "trace bound for 5-level systems; shared randomness cannot raise the maximal trace"),
)


class CapacityNotConverged(RuntimeError):
    def __init__(self, gap: float, iterations: int):
        super().__init__(f"Blahut-Arimoto stopped after {iterations} iterations with gap {gap:.3e}")
        self.gap = gap
        self.iterations = iterations


def _entropy(p: np.ndarray) -> float:
    p = p[p > 0]
    return float(-np.sum(p * np.log2(p)))


def _distribution(p, n: int) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.shape != (n,) or np.any(p < 0) or abs(p.sum() - 1) > 1e-12:
        raise ValueError(f"input distribution must be a probability vector of length {n}")
    return p


def mutual_information(m, input_dist) -> float:
    """I(X:Y) in bits for inputs drawn from ``input_dist``."""
    w = check_channel_matrix(m)
    p = _distribution(input_dist, w.shape[0])
    h_y_given_x = sum(pi * _entropy(row) for pi, row in zip(p, w))
    return _entropy(p @ w) - h_y_given_x


def _divergences(w: np.ndarray, q: np.ndarray) -> np.ndarray:
    """D(W(.|x) || q) in bits for every row; 0 log 0 = 0."""
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(w > 0, w * np.log2(np.where(w > 0, w, 1.0) / np.where(q > 0, q, 1.0)), 0.0)
    return terms.sum(axis=1)


def capacity(m, tol: float = 1e-10, max_iter: int = 100_000, support=None) -> tuple[float, np.ndarray]:
    """Blahut-Arimoto capacity in bits and the input distribution achieving it.

    ``support`` restricts the inputs that may be used (boolean mask or
    index list).  Iteration stops when the gap between the mutual
    information lower bound and the ``max_x D(W_x || q)`` upper bound falls
    below ``tol``; the returned value is the lower bound.
    """
    w = check_channel_matrix(m)
    n = w.shape[0]
    mask = np.ones(n, dtype=bool)
    if support is not None:
        sel = np.asarray(support)
        if sel.dtype == bool:
            if sel.shape != (n,):
                raise ValueError(f"support mask must have length {n}")
            mask = sel.copy()
        else:
            mask = np.zeros(n, dtype=bool)
            mask[sel.astype(int)] = True
    if not mask.any():
        raise ValueError("support must contain at least one input")
    ws = w[mask]
    p = np.full(len(ws), 1.0 / len(ws))
    for it in range(1, max_iter + 1):
        q = p @ ws
        d = _divergences(ws, q)
        lower = float(p @ d)
        upper = float(d.max())
        if upper - lower < tol:
            break
        p = p * np.exp2(d - upper)
        p /= p.sum()
    else:
        raise CapacityNotConverged(upper - lower, max_iter)
    full = np.zeros(n)
    full[mask] = p
    return lower, full


def trace_fidelity(m) -> float:
    """Trace of a square channel matrix: expected number of correctly decoded symbols."""
    a = np.asarray(m, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"trace fidelity needs a square matrix, got shape {a.shape}")
    return float(np.trace(a))


def quantum_fidelity_bound(d: int) -> float:
    """Largest trace any square channel matrix of a ``d``-level system reaches."""
    if d < 1:
        raise ValueError("dimension must be at least 1")
    return float(d)


def pr_fidelity_bound_n7() -> tuple[float, tuple]:
    """Trace bound for the 7->3 channels assisted by one PR box, with its derivation."""
    return 5.0, PR_BOUND_CHAIN


@dataclass(frozen=True)
class UnlockVerdict:
    certified_rank: int
    unassisted_dim: int
    input_dim: int
    status: str


def assess_unlock(cert, d_a: int, d_prime: int) -> UnlockVerdict:
    """Classify a certified channel matrix against the unassisted dimension ``d_prime``.

    The certificate's lower bound is the rank authority: ``unlock`` needs it
    to beat ``d_prime``, ``optimal-unlock`` additionally to reach ``d_a``.
    """
    rank = int(cert.lower_bound)
    if rank <= d_prime:
        status = NO_UNLOCK
    elif rank >= d_a:
        status = OPTIMAL_UNLOCK
    else:
        status = UNLOCK
    return UnlockVerdict(rank, d_prime, d_a, status)
