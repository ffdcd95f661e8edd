"""Encode / transmit / decode strategies and the channel matrices they produce.

Receiver outcomes are indexed by ``l`` and environment outcomes by ``k``
throughout; decode kernels are dense tables ``q[l, k, y]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .channel import (
    DensityMatrix,
    Isometry,
    Povm,
    check_channel_matrix,
    clean_probabilities,
    isometry_from_subspace_basis,
)
from .constructions import canonical_basis_7, canonical_basis_general, product_index
from .linalg import dagger, haar_random_unitary, random_density_matrix, random_povm

KERNEL_TOL = 1e-12

MINIMAL = "minimal"
ENV_TO_BOB = "env_to_bob"
BOB_TO_ENV = "bob_to_env"
VARIANTS = (MINIMAL, ENV_TO_BOB, BOB_TO_ENV)


@dataclass(frozen=True, eq=False)
class DecodeKernel:
    """Conditional distributions ``q(y | l, k)`` stored as ``table[l, k, y]``."""

    table: np.ndarray

    def __post_init__(self):
        t = np.array(self.table, dtype=float)
        if t.ndim != 3:
            raise ValueError(f"kernel table must be 3-d (l, k, y), got shape {t.shape}")
        if np.any(t < 0):
            raise ValueError("kernel has negative probabilities")
        dev = np.max(np.abs(t.sum(axis=2) - 1), initial=0.0)
        if dev > KERNEL_TOL:
            raise ValueError(f"kernel rows sum to 1 only within {dev:.3e}")
        t.setflags(write=False)
        object.__setattr__(self, "table", t)

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.table.shape

    @classmethod
    def from_rule(cls, n_bob: int, n_env: int, n_out: int, rule) -> "DecodeKernel":
        """Build from ``rule(l, k)`` returning a label or a ``{label: prob}`` dict."""
        t = np.zeros((n_bob, n_env, n_out))
        for l in range(n_bob):
            for k in range(n_env):
                out = rule(l, k)
                if isinstance(out, dict):
                    for y, pr in out.items():
                        t[l, k, y] += pr
                else:
                    t[l, k, out] = 1.0
        return cls(t)


def _as_states(encodings) -> tuple[DensityMatrix, ...]:
    return tuple(e if isinstance(e, DensityMatrix) else DensityMatrix(e) for e in encodings)


@dataclass(frozen=True, eq=False)
class MinimalStrategy:
    """Local measurements on both sides, merged by a classical kernel."""

    encodings: tuple
    bob_povm: Povm
    env_povm: Povm
    kernel: DecodeKernel

    def __post_init__(self):
        object.__setattr__(self, "encodings", _as_states(self.encodings))
        l, k, _ = self.kernel.shape
        if (l, k) != (len(self.bob_povm), len(self.env_povm)):
            raise ValueError(
                f"kernel covers {(l, k)} outcome pairs, POVMs have "
                f"{(len(self.bob_povm), len(self.env_povm))}"
            )

    def as_assisted(self) -> "AssistedStrategy":
        return AssistedStrategy(MINIMAL, self.encodings, bob_povm=self.bob_povm,
                                env_povm=self.env_povm, kernel=self.kernel)


@dataclass(frozen=True, eq=False)
class AssistedStrategy:
    """One of the three assistance variants.

    ``minimal``: ``bob_povm``, ``env_povm`` and ``kernel``.
    ``env_to_bob``: ``env_povm`` {L_k} and ``bob_family[k]`` = {L_{j|k}}_j.
    ``bob_to_env``: ``bob_povm`` {L_l}, ``env_family[l]`` = {L_{k|l}}_k and ``kernel``.
    """

    variant: str
    encodings: tuple
    bob_povm: Povm | None = None
    env_povm: Povm | None = None
    bob_family: tuple | None = None
    env_family: tuple | None = None
    kernel: DecodeKernel | None = None

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        object.__setattr__(self, "encodings", _as_states(self.encodings))
        need = {
            MINIMAL: ("bob_povm", "env_povm", "kernel"),
            ENV_TO_BOB: ("env_povm", "bob_family"),
            BOB_TO_ENV: ("bob_povm", "env_family", "kernel"),
        }[self.variant]
        for name in need:
            if getattr(self, name) is None:
                raise ValueError(f"{self.variant} strategy needs {name}")
        if self.variant == ENV_TO_BOB:
            fam = tuple(self.bob_family)
            if len(fam) != len(self.env_povm):
                raise ValueError("need one receiver POVM per environment outcome")
            if len({len(p) for p in fam}) != 1 or len({p.dim for p in fam}) != 1:
                raise ValueError("receiver POVM family must share dimension and outcome count")
            object.__setattr__(self, "bob_family", fam)
        if self.variant == BOB_TO_ENV:
            fam = tuple(self.env_family)
            if len(fam) != len(self.bob_povm):
                raise ValueError("need one environment POVM per receiver outcome")
            if len({len(p) for p in fam}) != 1 or len({p.dim for p in fam}) != 1:
                raise ValueError("environment POVM family must share dimension and outcome count")
            object.__setattr__(self, "env_family", fam)
            if self.kernel.shape[:2] != (len(self.bob_povm), len(fam[0])):
                raise ValueError("kernel does not cover every (l, k) outcome pair")
        if self.variant == MINIMAL:
            if self.kernel.shape[:2] != (len(self.bob_povm), len(self.env_povm)):
                raise ValueError("kernel does not cover every (l, k) outcome pair")


def _joint_states(v: Isometry, encodings) -> np.ndarray:
    """Stack of V rho V^dag reshaped to ``[i, b, e, b', e']``."""
    rhos = np.stack([e.matrix for e in encodings])
    if rhos.shape[1] != v.d_a:
        raise ValueError(f"encodings have dim {rhos.shape[1]}, isometry input dim is {v.d_a}")
    vm = v.matrix
    sig = np.einsum("pa,iab,qb->ipq", vm, rhos, vm.conj())
    return sig.reshape(len(encodings), v.d_b, v.d_e, v.d_b, v.d_e)


def _check_dim(povm: Povm, d: int, who: str):
    if povm.dim != d:
        raise ValueError(f"{who} POVM has dim {povm.dim}, expected {d}")


def outcome_distribution(v: Isometry, encodings, bob_povm: Povm, env_povm: Povm) -> np.ndarray:
    """``p[i, l, k] = Tr[(L_l (x) L_k) V rho_i V^dag]``."""
    _check_dim(bob_povm, v.d_b, "receiver")
    _check_dim(env_povm, v.d_e, "environment")
    sig = _joint_states(v, encodings)
    p = np.einsum("lab,kcd,ibdac->ilk", bob_povm.stack(), env_povm.stack(), sig)
    return clean_probabilities(p)


def simulate_assisted(v: Isometry, s) -> np.ndarray:
    """Channel matrix of an assisted (or minimal) strategy through ``v``."""
    if isinstance(s, MinimalStrategy):
        s = s.as_assisted()
    if s.variant == MINIMAL:
        joint = outcome_distribution(v, s.encodings, s.bob_povm, s.env_povm)
        p = np.einsum("ilk,lky->iy", joint, s.kernel.table)
    elif s.variant == ENV_TO_BOB:
        _check_dim(s.env_povm, v.d_e, "environment")
        _check_dim(s.bob_family[0], v.d_b, "receiver")
        sig = _joint_states(v, s.encodings)
        fam = np.stack([pv.stack() for pv in s.bob_family])  # [k, j, a, b]
        p = clean_probabilities(np.einsum("kjab,kcd,ibdac->ij", fam, s.env_povm.stack(), sig))
    else:
        _check_dim(s.bob_povm, v.d_b, "receiver")
        _check_dim(s.env_family[0], v.d_e, "environment")
        sig = _joint_states(v, s.encodings)
        fam = np.stack([pv.stack() for pv in s.env_family])  # [l, k, c, d]
        joint = clean_probabilities(np.einsum("lab,lkcd,ibdac->ilk", s.bob_povm.stack(), fam, sig))
        p = np.einsum("ilk,lky->iy", joint, s.kernel.table)
    return check_channel_matrix(p)


# -- the seven-dimensional family -------------------------------------------

# (receiver outcome, environment outcome) -> 0-based label for the product vectors
_N7_PRODUCT_LABELS = {(0, 2): 0, (1, 0): 1, (1, 2): 2, (2, 0): 3, (2, 1): 4}


def n7_kernel(p: float) -> DecodeKernel:
    def rule(l, k):
        if (l, k) in _N7_PRODUCT_LABELS:
            return _N7_PRODUCT_LABELS[(l, k)]
        if l == k and l in (0, 1):
            return {5: p, 6: 1.0 - p}
        # (2, 2), plus the unreachable (0, 1) cell
        return 6

    return DecodeKernel.from_rule(3, 3, 7, rule)


def _rotated_encodings(rotation, n: int) -> list[DensityMatrix]:
    # V' = V U maps U^dag e_i onto the i-th basis vector
    if rotation is None:
        return [DensityMatrix.basis(i, n) for i in range(n)]
    udag = dagger(np.asarray(rotation, dtype=complex))
    return [DensityMatrix.pure(udag[:, i]) for i in range(n)]


def strategy_n7(p: float, rotation=None) -> tuple[Isometry, MinimalStrategy]:
    """Isometry into C^3 (x) C^3 and the minimal strategy reproducing ``matrix_m7(p)``."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    v = isometry_from_subspace_basis(canonical_basis_7(), 3, 3, rotation)
    strat = MinimalStrategy(
        encodings=_rotated_encodings(rotation, 7),
        bob_povm=Povm.computational(3),
        env_povm=Povm.computational(3),
        kernel=n7_kernel(p),
    )
    return v, strat


def general_kernel(d: int) -> DecodeKernel:
    def rule(b, e):
        if b != e:
            return product_index(b, e, d)
        return 0 if b < 2 else b - 1

    return DecodeKernel.from_rule(d, d, d * d - 1, rule)


def strategy_general(d: int, rotation=None) -> tuple[Isometry, MinimalStrategy]:
    """Isometry into C^d (x) C^d and the minimal strategy reproducing ``matrix_general(d)``."""
    if d < 3:
        raise ValueError("the general family needs d >= 3")
    k = d * d - 1
    v = isometry_from_subspace_basis(canonical_basis_general(d), d, d, rotation)
    strat = MinimalStrategy(
        encodings=_rotated_encodings(rotation, k),
        bob_povm=Povm.computational(d),
        env_povm=Povm.computational(d),
        kernel=general_kernel(d),
    )
    return v, strat


def minimal_as_env_to_bob(s: MinimalStrategy) -> AssistedStrategy:
    """Rewrite a minimal strategy as one-way environment-to-receiver assistance.

    Given environment outcome ``k`` the receiver measures
    ``L_{j|k} = sum_l q(j|l,k) L_l``, which does not depend on ``k`` through
    the measurement itself, only through classical relabeling.
    """
    q = s.kernel.table
    bob = s.bob_povm.stack()
    fam = []
    for k in range(q.shape[1]):
        effects = np.einsum("ly,lab->yab", q[:, k, :], bob)
        fam.append(Povm(tuple(effects)))
    return AssistedStrategy(ENV_TO_BOB, s.encodings, env_povm=s.env_povm, bob_family=tuple(fam))


# -- PR-box assisted strategies ----------------------------------------------

@dataclass(frozen=True, eq=False)
class PrStrategy:
    """Single-use PR-box strategy.

    ``f[x]`` is the sender's box input, ``prep[x, a]`` the state sent after
    seeing box output ``a``; the receiver measures ``bob_povm``, feeds
    ``g[j]`` into the box and outputs label ``dec[j, b]``.
    """

    f: np.ndarray
    prep: np.ndarray
    isometry: Isometry
    bob_povm: Povm
    g: np.ndarray
    dec: np.ndarray
    n_outputs: int = field(default=-1)

    def __post_init__(self):
        f = np.asarray(self.f, dtype=int)
        g = np.asarray(self.g, dtype=int)
        prep = np.asarray(self.prep, dtype=complex)
        dec = np.asarray(self.dec, dtype=int)
        n, m = len(f), len(self.bob_povm)
        if prep.shape != (n, 2, self.isometry.d_a, self.isometry.d_a):
            raise ValueError(f"prep must have shape {(n, 2, self.isometry.d_a, self.isometry.d_a)}")
        if g.shape != (m,) or dec.shape != (m, 2):
            raise ValueError("g and dec must cover every receiver outcome")
        if not (set(np.unique(f)) <= {0, 1} and set(np.unique(g)) <= {0, 1}):
            raise ValueError("box inputs must be bits")
        _check_dim(self.bob_povm, self.isometry.d_b, "receiver")
        n_out = n if self.n_outputs < 0 else self.n_outputs
        if dec.min() < 0 or dec.max() >= n_out:
            raise ValueError("decoder emits labels outside the output alphabet")
        for arr in (f, g, prep, dec):
            arr.setflags(write=False)
        object.__setattr__(self, "f", f)
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "prep", prep)
        object.__setattr__(self, "dec", dec)
        object.__setattr__(self, "n_outputs", n_out)

    def receiver_statistics(self) -> np.ndarray:
        """``r[x, a, j] = Tr[M_j N(prep(x, a))]``."""
        v = self.isometry
        sig = np.einsum("pa,xsab,qb->xspq", v.matrix, self.prep, v.matrix.conj())
        sig = sig.reshape(*sig.shape[:2], v.d_b, v.d_e, v.d_b, v.d_e)
        out = np.einsum("xsaebe->xsab", sig)
        return clean_probabilities(np.einsum("jab,xsba->xsj", self.bob_povm.stack(), out))


def simulate_pr(s: PrStrategy) -> np.ndarray:
    """Channel matrix when the parties share one PR box (a xor b = f(x) g(j))."""
    r = s.receiver_statistics()
    n, m = len(s.f), len(s.g)
    p = np.zeros((n, s.n_outputs))
    for x in range(n):
        for a in (0, 1):
            # PR box outputs are uniform; b is fixed by a and the product of inputs
            b = a ^ (s.f[x] * s.g)
            np.add.at(p[x], s.dec[np.arange(m), b], 0.5 * r[x, a])
    return check_channel_matrix(p)


def simulate_pr_via_sr_cbit(s: PrStrategy) -> np.ndarray:
    """Same statistics from one shared unbiased bit plus one transmitted bit.

    The shared bit ``lam`` replaces the sender's box output; the sender also
    transmits ``c = f(x)`` and the receiver sets ``b = lam xor c g(j)``.
    """
    r = s.receiver_statistics()
    n = len(s.f)
    p = np.zeros((n, s.n_outputs))
    for x in range(n):
        c = int(s.f[x])  # the transmitted classical bit
        for lam in (0, 1):
            for j in range(len(s.g)):
                b = lam ^ (c & int(s.g[j]))
                p[x, s.dec[j, b]] += 0.5 * r[x, lam, j]
    return check_channel_matrix(p)


def random_pr_strategy(rng, n_inputs: int, n_outcomes: int, isometry: Isometry | None = None,
                       d_a: int = 7, d_b: int = 3, d_e: int = 3,
                       n_outputs: int | None = None) -> PrStrategy:
    """Random PR strategy; without ``isometry`` a Haar-random one is drawn."""
    if isometry is None:
        u = haar_random_unitary(d_b * d_e, rng)
        isometry = Isometry(u[:, :d_a], d_b, d_e)
    v = isometry
    d_a, d_b = v.d_a, v.d_b
    n_out = n_inputs if n_outputs is None else n_outputs
    prep = np.stack([
        np.stack([random_density_matrix(d_a, rng, rank=int(rng.integers(1, d_a + 1)))
                  for _ in range(2)])
        for _ in range(n_inputs)
    ])
    return PrStrategy(
        f=rng.integers(0, 2, n_inputs),
        prep=prep,
        isometry=v,
        bob_povm=Povm(tuple(random_povm(d_b, n_outcomes, rng))),
        g=rng.integers(0, 2, n_outcomes),
        dec=rng.integers(0, n_out, (n_outcomes, 2)),
        n_outputs=n_out,
    )


def sr_embedding(v: Isometry, encodings: Sequence, bob_povm: Povm, relabel) -> PrStrategy:
    """PR strategy that ignores the box: prep independent of ``a``, dec independent of ``b``."""
    rhos = np.stack([e.matrix if isinstance(e, DensityMatrix) else np.asarray(e) for e in encodings])
    relabel = np.asarray(relabel, dtype=int)
    return PrStrategy(
        f=np.zeros(len(rhos), dtype=int),
        prep=np.stack([rhos, rhos], axis=1),
        isometry=v,
        bob_povm=bob_povm,
        g=np.zeros(len(bob_povm), dtype=int),
        dec=np.stack([relabel, relabel], axis=1),
        n_outputs=int(relabel.max()) + 1 if len(relabel) else 0,
    )


# -- shared randomness ----------------------------------------------------------

def mix(matrices: Sequence, weights) -> np.ndarray:
    """Convex combination of equally shaped channel matrices."""
    mats = [np.asarray(m, dtype=float) for m in matrices]
    if not mats:
        raise ValueError("need at least one matrix")
    if len({m.shape for m in mats}) != 1:
        raise ValueError("matrices must share one shape")
    w = np.asarray(weights, dtype=float)
    if w.shape != (len(mats),) or np.any(w < 0) or abs(w.sum() - 1) > 1e-12:
        raise ValueError("weights must be a probability vector matching the matrices")
    return check_channel_matrix(np.tensordot(w, np.stack(mats), axes=1))
