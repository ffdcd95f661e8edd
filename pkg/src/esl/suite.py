"""Desk-scale reproduction checks, shared by the CLI and the test-suite."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .channel import DensityMatrix, Isometry, Povm, is_row_stochastic, unassisted_channel_matrix
from .constructions import (
    canonical_basis_7,
    canonical_basis_general,
    matrix_general,
    matrix_m7,
    phi_plus,
)
from .io import read_matrix
from .info import (
    capacity,
    pr_fidelity_bound_n7,
    quantum_fidelity_bound,
    trace_fidelity,
)
from .linalg import haar_random_unitary, ket, kron, random_density_matrix, random_povm
from .protocols import (
    random_pr_strategy,
    simulate_assisted,
    simulate_pr,
    simulate_pr_via_sr_cbit,
    strategy_general,
    strategy_n7,
)
from .psdrank import (
    PsdFactorization,
    certify,
    factorization_from_channel,
    lower_bound,
    max_monotone,
    solve_factorization,
    validate_factorization,
)

P_GRID = tuple(np.round(np.linspace(0.0, 1.0, 21), 12))
CERT_PS = (0.1, 0.25, 0.5, 0.75, 1.0)
GENERAL_DS = (3, 4, 5)

CITED_STEPS = (
    "SEP/LOCC indistinguishability of the 7-dim and (d^2-1)-dim subspaces: cited, not computed",
    "no-hypersignaling inclusion P_SR(Q3+Q2) in P_SR(Q5): cited, not computed",
)


@dataclass
class Check:
    name: str
    passed: bool
    value: float | int | str | None
    tolerance: float | None
    detail: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"name": self.name, "passed": bool(self.passed), "value": self.value,
                "tolerance": self.tolerance, "detail": self.detail}

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: value={self.value} tol={self.tolerance}"


def _rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.default_rng([seed, stream])


def check_protocol_reproduction(seed: int = 0, p_grid=P_GRID, n_rotations: int = 5) -> Check:
    rotations = [None] + [haar_random_unitary(7, seed + k) for k in range(1, n_rotations + 1)]
    worst = 0.0
    for u in rotations:
        for p in p_grid:
            v, s = strategy_n7(float(p), u)
            worst = max(worst, float(np.max(np.abs(simulate_assisted(v, s) - matrix_m7(float(p))))))
    return Check("protocol_reproduction_n7", worst <= 1e-12, worst, 1e-12,
                 {"p_points": len(p_grid), "rotation_seeds": [seed + k for k in range(1, n_rotations + 1)]})


def check_fidelity(p_grid=P_GRID) -> Check:
    dev_max = abs(trace_fidelity(matrix_m7(1.0)) - 20 / 3)
    dev_grid = max(abs(trace_fidelity(matrix_m7(float(p))) - (6 + 2 * float(p) / 3)) for p in p_grid)
    bound = quantum_fidelity_bound(6)
    above = all(trace_fidelity(matrix_m7(float(p))) > bound for p in p_grid if p > 0)
    worst = max(dev_max, dev_grid)
    return Check("fidelity_m7", worst <= 1e-12 and above and bound == 6, worst, 1e-12,
                 {"trace_p1": trace_fidelity(matrix_m7(1.0)), "qudit6_bound": bound,
                  "exceeds_bound_for_all_p_gt_0": above})


def check_m7_certification() -> Check:
    ok = True
    rows = {}
    for p in CERT_PS:
        c = certify(matrix_m7(p))
        good = c.lower_bound == c.upper_bound == 7 and c.witness_residual <= 1e-10
        ok &= good
        rows[str(p)] = {"lower": c.lower_bound, "upper": c.upper_bound, "residual": c.witness_residual}
    c0 = certify(matrix_m7(0.0))
    good0 = c0.lower_bound == 6 and c0.upper_bound == 6 and c0.witness_residual <= 1e-10
    rows["0.0"] = {"lower": c0.lower_bound, "upper": c0.upper_bound, "residual": c0.witness_residual}
    worst = max(r["residual"] for r in rows.values())
    return Check("rank_certification_m7", bool(ok and good0), worst, 1e-10, rows)


def check_general(ds=GENERAL_DS) -> Check:
    ok = True
    rows = {}
    worst = 0.0
    for d in ds:
        v, s = strategy_general(d)
        dev = float(np.max(np.abs(simulate_assisted(v, s) - matrix_general(d))))
        c = certify(matrix_general(d))
        k = d * d - 1
        good = dev <= 1e-12 and c.lower_bound == c.upper_bound == k
        ok &= good
        worst = max(worst, dev)
        rows[str(d)] = {"deviation": dev, "lower": c.lower_bound, "upper": c.upper_bound}
    return Check("general_d_reproduction_and_rank", bool(ok), worst, 1e-12, rows)


def check_bases(ds=(3, 4, 5, 6)) -> Check:
    worst = 0.0
    for d in ds:
        b = np.column_stack(canonical_basis_general(d))
        worst = max(worst, np.max(np.abs(b.conj().T @ b - np.eye(b.shape[1]))),
                    np.max(np.abs(b.conj().T @ phi_plus(d))))
    b7 = np.column_stack(canonical_basis_7())
    worst = max(worst, np.max(np.abs(b7.conj().T @ b7 - np.eye(7))),
                np.max(np.abs(b7.conj().T @ phi_plus(3))),
                np.max(np.abs(b7.conj().T @ kron(ket(0, 3), ket(1, 3)))))
    return Check("basis_validity", worst <= 1e-12, float(worst), 1e-12, {"d": list(ds)})


def check_monotone_guard() -> Check:
    m = np.array([[0.0, 1.0], [0.0, 1.0]])
    mono = max_monotone(m)
    bound, _ = lower_bound(m)
    f_rows = np.ones((2, 1, 1))
    f_cols = np.array([[[0.0]], [[1.0]]])
    res = validate_factorization(m, PsdFactorization(f_rows, f_cols))
    ok = mono == 1.0 and bound == 1 and res <= 1e-12
    return Check("monotone_soundness_guard", ok, res, 1e-12, {"monotone": mono, "lower_bound": bound})


def z_channel_capacity(s: float) -> float:
    """Closed-form capacity of the Z channel with crossover ``s`` (input 1 -> 0)."""
    if s == 0:
        return 1.0
    return float(np.log2(1 + (1 - s) * s ** (s / (1 - s))))


def check_capacity() -> Check:
    worst_id = max(abs(capacity(np.eye(n))[0] - np.log2(n)) for n in range(1, 9))
    c_m7, _ = capacity(matrix_m7(1.0))
    oracle = float(np.log2(5 + 2 ** z_channel_capacity(1 / 3)))
    dev_m7 = abs(c_m7 - oracle)
    masked, _ = capacity(matrix_m7(1.0), support=list(range(6)))
    dev_mask = abs(masked - np.log2(6))
    ok = worst_id <= 1e-9 and dev_m7 <= 1e-6 and dev_mask <= 1e-9
    return Check("capacity", ok, dev_m7, 1e-6,
                 {"identity_max_dev": worst_id, "m7_capacity": c_m7, "m7_oracle": oracle,
                  "masked_capacity": masked, "masked_dev": dev_mask})


def _n7_family_isometry(rng) -> Isometry:
    v, _ = strategy_n7(0.0, haar_random_unitary(7, rng))
    return v


def check_pr_consistency(seed: int = 0, samples: int = 10_000) -> Check:
    rng = _rng(seed, 8)
    worst, max_trace = 0.0, 0.0
    for _ in range(samples):
        n = int(rng.integers(2, 9))
        s = random_pr_strategy(rng, n, int(rng.integers(2, 7)), isometry=_n7_family_isometry(rng))
        a, b = simulate_pr(s), simulate_pr_via_sr_cbit(s)
        worst = max(worst, float(np.max(np.abs(a - b))))
        max_trace = max(max_trace, trace_fidelity(a))
    bound, chain = pr_fidelity_bound_n7()
    sep = trace_fidelity(matrix_m7(1.0)) - bound
    ok = worst <= 1e-12 and max_trace <= 5 + 1e-9 and bound == 5 and abs(sep - 5 / 3) <= 1e-12
    return Check("pr_box_consistency", ok, worst, 1e-12,
                 {"samples": samples, "max_trace": max_trace, "trace_tolerance": 5 + 1e-9,
                  "pr_bound": bound, "separation": sep, "chain": [c[0] for c in chain]})


def random_unassisted(rng, d_b: int = 3):
    """Random square unassisted strategy through a random isometry with receiver dim ``d_b``."""
    d_e = int(rng.integers(1, 4))
    d_a = int(rng.integers(1, d_b * d_e + 1))
    u = haar_random_unitary(d_b * d_e, rng)
    v = Isometry(u[:, :d_a], d_b, d_e)
    n = int(rng.integers(2, 8))
    enc = [DensityMatrix(random_density_matrix(d_a, rng, rank=int(rng.integers(1, d_a + 1))))
           for _ in range(n)]
    povm = Povm(tuple(random_povm(d_b, n, rng)))
    return v, enc, povm


def check_prop1(seed: int = 0, samples: int = 1000) -> Check:
    rng = _rng(seed, 9)
    worst, max_trace = 0.0, 0.0
    for _ in range(samples):
        v, enc, povm = random_unassisted(rng)
        p = unassisted_channel_matrix(v, enc, povm)
        f = factorization_from_channel(v, enc, povm)
        worst = max(worst, validate_factorization(p, f))
        max_trace = max(max_trace, trace_fidelity(p))
    ok = worst <= 1e-10 and max_trace <= quantum_fidelity_bound(3) + 1e-9
    return Check("unassisted_receiver_dim_factorization", ok, worst, 1e-10,
                 {"samples": samples, "max_trace": max_trace, "trace_tolerance": 3 + 1e-9})


def check_solver(seed: int = 0, restarts: int = 50, parallel: bool = False) -> Check:
    m = matrix_m7(1.0)
    _, res7 = solve_factorization(m, 7, seed=seed, restarts=restarts, parallel=parallel)
    _, res6 = solve_factorization(m, 6, seed=seed, restarts=restarts, parallel=parallel)
    ok = res7 <= 1e-6 and res6 > 1e-3
    return Check("solver_behavior", ok, res7, 1e-6,
                 {"restarts": restarts, "residual_r7": res7, "residual_r6": res6,
                  "r6_failure_threshold": 1e-3})


def check_m7_file(path) -> Check:
    m = read_matrix(path)
    stochastic = is_row_stochastic(m)
    detail = {"path": str(path), "row_stochastic": stochastic}
    dev = float("nan")
    if m.shape == (7, 7):
        dev = float(np.max(np.abs(m - matrix_m7(float(np.clip(m[5, 5], 0, 1))))))
        detail["closed_form_deviation"] = dev
    ok = stochastic and dev <= 1e-12
    return Check("m7_input_file", ok, dev, 1e-12, detail)


def run_paper_suite(seed: int = 0, restarts: int = 50, pr_samples: int = 10_000,
                    prop1_samples: int = 1000, parallel: bool = False, m7_file=None) -> dict:
    checks = [
        check_protocol_reproduction(seed),
        check_fidelity(),
        check_m7_certification(),
        check_general(),
        check_bases(),
        check_monotone_guard(),
        check_capacity(),
        check_pr_consistency(seed, pr_samples),
        check_prop1(seed, prop1_samples),
        check_solver(seed, restarts, parallel),
    ]
    if m7_file is not None:
        checks.append(check_m7_file(m7_file))
    return {
        "experiment": "paper-suite",
        "tool_version": __version__,
        "seed": seed,
        "parameters": {"restarts": restarts, "pr_samples": pr_samples,
                       "prop1_samples": prop1_samples,
                       "m7_file": None if m7_file is None else str(m7_file)},
        "checks": [c.to_dict() for c in checks],
        "cited_steps": list(CITED_STEPS),
        "passed": all(c.passed for c in checks),
    }
