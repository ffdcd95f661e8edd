"""PSD-rank lower bounds, factorizations, and certificates.

A PSD factorization of size ``r`` of a nonnegative ``n x m`` matrix ``M``
is a pair of families of ``r x r`` PSD matrices with
``M[i, j] = Tr(R_i C_j)``.  Lower bounds come from a combinatorial engine
(monotone / direct sums / zero blocks / triangular blocks), upper bounds
from explicit witnesses.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .channel import DensityMatrix, Isometry, Povm, channel_apply, check_channel_matrix
from .linalg import is_psd

ZERO_TOL = 1e-12
CEIL_SLACK = 1e-9
PERMUTATION_LIMIT = 10
FACTOR_PSD_TOL = 1e-9
WITNESS_TOL = 1e-10
SOLVER_SUCCESS = 1e-6
SOLVER_FAILURE = 1e-3


class NonPsdFactorError(ValueError):
    """A factorization contains a factor that is not positive semidefinite."""


@dataclass(frozen=True, eq=False)
class PsdFactorization:
    """Families ``row_factors[i]`` and ``col_factors[j]`` of ``size x size`` matrices.

    Positivity is checked by :func:`validate_factorization`, not here, so
    that broken candidates can still be constructed and reported.
    """

    row_factors: np.ndarray
    col_factors: np.ndarray

    def __post_init__(self):
        r = np.array(self.row_factors, dtype=complex)
        c = np.array(self.col_factors, dtype=complex)
        if r.ndim != 3 or c.ndim != 3 or r.shape[1:] != c.shape[1:] or r.shape[1] != r.shape[2]:
            raise ValueError(f"incompatible factor stacks {r.shape} and {c.shape}")
        r.setflags(write=False)
        c.setflags(write=False)
        object.__setattr__(self, "row_factors", r)
        object.__setattr__(self, "col_factors", c)

    @property
    def size(self) -> int:
        return self.row_factors.shape[1]

    def product(self) -> np.ndarray:
        """Matrix of pairings ``Tr(R_i C_j)``."""
        return np.einsum("iab,jba->ij", self.row_factors, self.col_factors).real

    def non_psd_factors(self, tol: float = FACTOR_PSD_TOL) -> list[str]:
        bad = [f"R{i}" for i, f in enumerate(self.row_factors) if not is_psd(f, tol, tol)]
        bad += [f"C{j}" for j, f in enumerate(self.col_factors) if not is_psd(f, tol, tol)]
        return bad

    def to_dict(self) -> dict:
        pair = lambda a: [[[z.real, z.imag] for z in row] for row in a]  # noqa: E731
        return {
            "size": self.size,
            "row_factors": [pair(f) for f in self.row_factors],
            "col_factors": [pair(f) for f in self.col_factors],
        }


# -- lower bounds ------------------------------------------------------------

def max_monotone(m) -> float:
    """Sum over outputs of the largest probability any input assigns to it.

    For a row-stochastic matrix realized by states ``rho_i`` and effects
    ``E_j`` in dimension ``r``: ``max_i Tr(rho_i E_j) <= Tr(E_j)`` and the
    effects' traces add up to ``r``.
    """
    a = check_channel_matrix(m)
    return float(np.sum(np.max(a, axis=0))) if a.size else 0.0


def _nonneg(m) -> np.ndarray:
    a = np.asarray(m, dtype=float)
    if a.ndim != 2:
        raise ValueError(f"expected a 2-d matrix, got shape {a.shape}")
    if np.any(a < -ZERO_TOL):
        raise ValueError("matrix has negative entries")
    return np.where(a < ZERO_TOL, 0.0, a)


def _scaled_monotone(a: np.ndarray) -> float:
    # row scaling preserves PSD rank, so normalize rows before the monotone
    return float(np.sum(np.max(a / a.sum(axis=1, keepdims=True), axis=0)))


def _components(a: np.ndarray) -> list[tuple[list[int], list[int]]]:
    """Connected components of the bipartite row/column nonzero pattern."""
    n, m = a.shape
    seen_r, seen_c = set(), set()
    comps = []
    for start in range(n):
        if start in seen_r:
            continue
        rows, cols, stack = {start}, set(), [("r", start)]
        seen_r.add(start)
        while stack:
            kind, idx = stack.pop()
            if kind == "r":
                for j in np.nonzero(a[idx])[0]:
                    if j not in seen_c:
                        seen_c.add(j)
                        cols.add(int(j))
                        stack.append(("c", int(j)))
            else:
                for i in np.nonzero(a[:, idx])[0]:
                    if i not in seen_r:
                        seen_r.add(i)
                        rows.add(int(i))
                        stack.append(("r", int(i)))
        comps.append((sorted(rows), sorted(cols)))
    return comps


def _triangular(a: np.ndarray) -> bool:
    n, m = a.shape
    if n != m or np.any(np.diag(a) <= ZERO_TOL):
        return False
    return not np.any(np.triu(a, 1)) or not np.any(np.tril(a, -1))


class _BoundEngine:
    def __init__(self, a: np.ndarray):
        self.a = a
        self.memo: dict = {}

    def bound(self, rows: Sequence[int], cols: Sequence[int]) -> tuple[int, dict]:
        sub = self.a[np.ix_(rows, cols)]
        keep_r = [r for r, row in zip(rows, sub) if row.any()]
        keep_c = [c for c, col in zip(cols, sub.T) if col.any()]
        key = (tuple(keep_r), tuple(keep_c))
        if key not in self.memo:
            self.memo[key] = self._compute(keep_r, keep_c)
        return self.memo[key]

    def _compute(self, rows: list[int], cols: list[int]) -> tuple[int, dict]:
        if not rows:
            return 0, {"method": "zero", "bound": 0}
        a = self.a[np.ix_(rows, cols)]
        cap = min(len(rows), len(cols))
        mono = _scaled_monotone(a)
        best = (min(cap, math.ceil(mono - CEIL_SLACK)),
                {"method": "monotone", "monotone": mono})

        def consider(value, trace):
            # structural derivations win ties with the plain monotone
            nonlocal best
            if value > best[0] or (value == best[0] and best[1]["method"] == "monotone"):
                best = (value, trace)

        comps = _components(a)
        if len(comps) > 1:
            parts = [self.bound([rows[i] for i in rs], [cols[j] for j in cs]) for rs, cs in comps]
            consider(sum(p[0] for p in parts),
                     {"method": "direct_sum", "parts": [p[1] for p in parts]})
            return self._finish(best, rows, cols)

        if _triangular(a):
            consider(len(rows), {"method": "triangular", "order": len(rows)})
        if best[0] >= cap:
            return self._finish(best, rows, cols)

        for split_rows, split_cols in self._zero_blocks(a):
            if best[0] >= cap:
                break
            s_rows = [rows[i] for i in split_rows]
            t_cols = [cols[j] for j in split_cols]
            rest_rows = [r for r in rows if r not in s_rows]
            rest_cols = [c for c in cols if c not in t_cols]
            top = self.bound(s_rows, rest_cols)
            bottom = self.bound(rest_rows, t_cols)
            consider(top[0] + bottom[0],
                     {"method": "block_triangular", "zero_block": {"rows": s_rows, "cols": t_cols},
                      "parts": [top[1], bottom[1]]})
        return self._finish(best, rows, cols)

    @staticmethod
    def _finish(best, rows, cols):
        value, trace = best
        return value, {**trace, "bound": value, "rows": list(rows), "cols": list(cols)}

    def _zero_blocks(self, a: np.ndarray):
        """Yield (row subset, column subset) pairs with ``a[S, T] == 0``.

        T is taken maximal for each S.  Small matrices get the full subset
        search (any row/column permutation); larger ones only contiguous
        blocks in the natural order.
        """
        n, m = a.shape
        nz = a > 0
        if min(n, m) <= PERMUTATION_LIMIT:
            by_rows = n <= m
            mat = nz if by_rows else nz.T
            size = mat.shape[0]
            for k in range(1, size):
                for subset in itertools.combinations(range(size), k):
                    zero_other = np.nonzero(~mat[list(subset)].any(axis=0))[0]
                    if len(zero_other) == 0:
                        continue
                    if by_rows:
                        yield list(subset), list(zero_other)
                    else:
                        yield list(zero_other), list(subset)
            return
        for r1 in range(1, n):
            # upper-right zero block [[A, 0], [B, D]]
            top = nz[:r1]
            c1 = m
            while c1 > 0 and not top[:, c1 - 1].any():
                c1 -= 1
            if c1 < m:
                yield list(range(r1)), list(range(c1, m))
            # lower-left zero block [[A, B], [0, D]]
            bottom = nz[r1:]
            c2 = 0
            while c2 < m and not bottom[:, c2].any():
                c2 += 1
            if c2 > 0:
                yield list(range(r1, n)), list(range(c2))


def _one_sided_bound(a: np.ndarray) -> tuple[int, dict]:
    return _BoundEngine(a).bound(list(range(a.shape[0])), list(range(a.shape[1])))


def lower_bound(m) -> tuple[int, dict]:
    """Certified integer lower bound on the PSD rank with its derivation tree.

    The bound is evaluated on ``m`` and on its transpose (same PSD rank)
    and the larger one is kept.
    """
    a = _nonneg(m)
    if not a.any():
        return 0, {"method": "zero", "bound": 0, "orientation": "direct"}
    direct = _one_sided_bound(a)
    transposed = _one_sided_bound(a.T)
    if transposed[0] > direct[0]:
        return transposed[0], {**transposed[1], "orientation": "transpose"}
    return direct[0], {**direct[1], "orientation": "direct"}


# -- witnesses ---------------------------------------------------------------

def _matrix_of(x) -> np.ndarray:
    return x.matrix if isinstance(x, DensityMatrix) else np.asarray(x, dtype=complex)


def _effects_of(povm) -> np.ndarray:
    if isinstance(povm, Povm):
        return povm.stack()
    return np.stack([np.asarray(e, dtype=complex) for e in povm])


def factorization_from_strategy(encodings: Sequence, povm, kernel) -> PsdFactorization:
    """``R_i = rho_i`` and ``C_j = sum_k q(j|k) E_k``.

    ``kernel[k, j]`` is the probability of reporting label ``j`` after
    effect ``k`` clicks.
    """
    rhos = np.stack([_matrix_of(e) for e in encodings])
    effects = _effects_of(povm)
    q = np.asarray(kernel, dtype=float)
    if rhos.shape[1:] != effects.shape[1:]:
        raise ValueError(f"state dim {rhos.shape[1]} does not match POVM dim {effects.shape[1]}")
    if q.ndim != 2 or q.shape[0] != len(effects):
        raise ValueError(f"kernel must have one row per effect, got shape {q.shape}")
    return PsdFactorization(rhos, np.einsum("kj,kab->jab", q, effects))


def factorization_from_channel(v: Isometry, encodings: Sequence, povm: Povm) -> PsdFactorization:
    """Receiver-dimension factorization of an unassisted channel matrix."""
    outs = [channel_apply(v, e).matrix for e in encodings]
    return factorization_from_strategy(outs, povm, np.eye(len(povm)))


def classical_witness(m) -> PsdFactorization:
    """Diagonal factorization from a local-randomness strategy.

    Each distinct row becomes one computational basis state; the receiver
    measures in that basis and samples the output from the row.  The
    column-wise version is used when it is smaller.
    """
    a = _nonneg(m)

    def build(mat):
        distinct, labels = np.unique(mat, axis=0, return_inverse=True)
        labels = np.asarray(labels).ravel()
        r = len(distinct)
        encodings = [np.diag(np.eye(r)[k]) for k in labels]
        povm = [np.diag(np.eye(r)[k]) for k in range(r)]
        return factorization_from_strategy(encodings, povm, distinct)

    rows_first = build(a)
    cols_first = build(a.T)
    if cols_first.size < rows_first.size:
        return PsdFactorization(cols_first.col_factors, cols_first.row_factors)
    return rows_first


def validate_factorization(m, f: PsdFactorization, tol: float = FACTOR_PSD_TOL) -> float:
    """Largest entrywise deviation ``|Tr(R_i C_j) - M_ij|``.

    Raises :class:`NonPsdFactorError` if any factor is not PSD.
    """
    a = np.asarray(m, dtype=float)
    if (len(f.row_factors), len(f.col_factors)) != a.shape:
        raise ValueError(f"factorization shape {(len(f.row_factors), len(f.col_factors))} "
                         f"does not match matrix {a.shape}")
    bad = f.non_psd_factors(tol)
    if bad:
        raise NonPsdFactorError(f"factors not PSD: {', '.join(bad)}")
    return float(np.max(np.abs(f.product() - a), initial=0.0))


# -- numerical search ----------------------------------------------------------

def _gram(x: np.ndarray) -> np.ndarray:
    return np.einsum("nki,nkj->nij", x.conj(), x)


def _lm_restart(a: np.ndarray, r: int, rng, max_iters: int, target: float) -> tuple[float, np.ndarray, np.ndarray]:
    """Levenberg-Marquardt on ``R_i = A_i^dag A_i``, ``C_j = B_j^dag B_j``."""
    n, m = a.shape
    scale = 1.0 / np.sqrt(2 * r)
    x = (rng.standard_normal((n + m, r, r)) + 1j * rng.standard_normal((n + m, r, r))) * scale
    norm = np.linalg.norm(a)
    n_par = (n + m) * r * r
    ii, jj = np.meshgrid(np.arange(n), np.arange(m), indexing="ij")

    def residual(x):
        rf, cf = _gram(x[:n]), _gram(x[n:])
        return np.einsum("iab,jba->ij", rf, cf).real - a, rf, cf

    err, rf, cf = residual(x)
    cost = float(np.sum(err ** 2))
    damping = 1e-3
    history = [cost]
    for _ in range(max_iters):
        if math.sqrt(cost) / norm <= target:
            break
        # d Tr(A C A^dag) / dA = 2 A C (as a complex gradient over Re/Im parts)
        jac = np.zeros((n, m, n + m, r * r), dtype=complex)
        jac[ii, jj, ii] = 2 * np.einsum("iab,jbc->ijac", x[:n], cf).reshape(n, m, r * r)
        jac[ii, jj, n + jj] = 2 * np.einsum("jab,ibc->ijac", x[n:], rf).reshape(n, m, r * r)
        jac = jac.reshape(n * m, n_par)
        jr = np.concatenate([jac.real, jac.imag], axis=1)
        gram = jr @ jr.T
        e = err.ravel()
        accepted = False
        while damping < 1e10:
            y = np.linalg.solve(gram + damping * np.eye(n * m), e)
            step = -(jr.T @ y)
            cand = x + (step[:n_par] + 1j * step[n_par:]).reshape(n + m, r, r)
            err2, rf2, cf2 = residual(cand)
            cost2 = float(np.sum(err2 ** 2))
            if cost2 < cost:
                x, err, rf, cf, cost = cand, err2, rf2, cf2, cost2
                damping = max(damping / 3, 1e-12)
                accepted = True
                break
            damping *= 4
        if not accepted:
            break
        history.append(cost)
        # stalled: less than 0.1% progress over 50 accepted steps
        if len(history) > 50 and history[-1] > 0.999 * history[-51]:
            break
    return math.sqrt(cost) / norm, rf, cf


def solve_factorization(m, r: int, seed: int = 0, restarts: int = 10, max_iters: int = 500,
                        parallel: bool = False, stop_tol: float | None = None,
                        target: float = 1e-10) -> tuple[PsdFactorization, float]:
    """Numerical search for a size-``r`` factorization.

    Returns the best factorization over ``restarts`` seeded restarts with
    its relative Frobenius residual ``||Tr(R_i C_j) - M||_F / ||M||_F``.
    Ties go to the lowest restart index.  With ``stop_tol`` set (sequential
    mode only) the search ends at the first restart reaching it.
    """
    if r < 1:
        raise ValueError("factorization size must be at least 1")
    a = _nonneg(m)
    seeds = np.random.SeedSequence(seed).spawn(restarts)
    run = lambda s: _lm_restart(a, r, np.random.default_rng(s), max_iters, target)  # noqa: E731
    results = []
    if parallel:
        with ThreadPoolExecutor() as pool:
            results = list(pool.map(run, seeds))
    else:
        for s in seeds:
            results.append(run(s))
            if stop_tol is not None and results[-1][0] <= stop_tol:
                break
    best = min(range(len(results)), key=lambda k: (results[k][0], k))
    res, rf, cf = results[best]
    return PsdFactorization(rf, cf), res


# -- certificates ----------------------------------------------------------------

@dataclass
class RankCertificate:
    lower_bound: int
    lower_method: dict
    upper_bound: int
    witness: PsdFactorization | None
    witness_residual: float
    witness_source: str
    notes: list = field(default_factory=list)

    @property
    def verdict(self) -> str:
        return "equal" if self.lower_bound == self.upper_bound else "gap"

    def to_dict(self, include_witness: bool = False) -> dict:
        d = {
            "lower_bound": self.lower_bound,
            "lower_method": self.lower_method,
            "upper_bound": self.upper_bound,
            "witness_source": self.witness_source,
            "witness_residual": self.witness_residual,
            "witness_tolerance": WITNESS_TOL,
            "verdict": self.verdict,
            "notes": list(self.notes),
        }
        if include_witness and self.witness is not None:
            d["witness"] = self.witness.to_dict()
        return d


def _hint_factorization(hint) -> PsdFactorization:
    if isinstance(hint, PsdFactorization):
        return hint
    encodings, povm, kernel = hint
    return factorization_from_strategy(encodings, povm, kernel)


def certify(m, witness_hints: Sequence | None = None, seed: int = 0, restarts: int = 10,
            max_iters: int = 500, local_witness: bool = True) -> RankCertificate:
    """Combine the lower-bound engine with the best validated witness.

    ``witness_hints`` are factorizations or ``(encodings, povm, kernel)``
    strategies.  The diagonal local-randomness witness is tried unless
    ``local_witness`` is false; the numerical solver is then run at sizes
    from the lower bound upward while it could still improve the upper bound.
    """
    a = _nonneg(m)
    lower, trace = lower_bound(a)
    notes = ["max-monotone uses column maxima (row maxima overestimate, e.g. [[0,1],[0,1]])"]

    candidates = [("hint", _hint_factorization(h)) for h in (witness_hints or ())]
    if local_witness:
        candidates.append(("local_randomness", classical_witness(a)))
    best = None
    for source, f in candidates:
        try:
            res = validate_factorization(a, f)
        except (NonPsdFactorError, ValueError) as exc:
            notes.append(f"{source} witness rejected: {exc}")
            continue
        if res > WITNESS_TOL:
            notes.append(f"{source} witness rejected: residual {res:.3e}")
            continue
        if best is None or f.size < best[1].size:
            best = (source, f, res)

    upper = best[1].size if best else min(a.shape) + 1
    for r in range(max(lower, 1), upper):
        f, rel = solve_factorization(a, r, seed=seed, restarts=restarts, max_iters=max_iters,
                                     stop_tol=SOLVER_SUCCESS)
        if rel <= SOLVER_SUCCESS:
            res = validate_factorization(a, f)
            notes.append(f"solver found size {r} (relative residual {rel:.3e})")
            best = ("solver", f, res)
            break
        notes.append(f"solver failed at size {r} (best relative residual {rel:.3e})")

    if best is None:
        return RankCertificate(lower, trace, min(a.shape), None, float("nan"), "none", notes)
    source, f, res = best
    return RankCertificate(lower, trace, f.size, f, res, source, notes)

