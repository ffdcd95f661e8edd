import numpy as np
import pytest
from hypothesis import given, strategies as st

from esl.channel import DensityMatrix, Isometry, Povm, unassisted_channel_matrix
from esl.constructions import matrix_general, matrix_m7
from esl.info import trace_fidelity
from esl.linalg import haar_random_unitary, kron, random_density_matrix, random_povm
from esl.protocols import (
    BOB_TO_ENV,
    ENV_TO_BOB,
    AssistedStrategy,
    DecodeKernel,
    MinimalStrategy,
    PrStrategy,
    minimal_as_env_to_bob,
    outcome_distribution,
    mix,
    random_pr_strategy,
    simulate_assisted,
    simulate_pr,
    simulate_pr_via_sr_cbit,
    sr_embedding,
    strategy_general,
    strategy_n7,
)


def _random_isometry(rng, d_a, d_b, d_e):
    u = haar_random_unitary(d_b * d_e, rng)
    return Isometry(u[:, :d_a], d_b, d_e)


def _random_kernel(rng, n_l, n_k, n_y):
    t = rng.random((n_l, n_k, n_y))
    return DecodeKernel(t / t.sum(axis=2, keepdims=True))


def _random_minimal(rng):
    d_b, d_e = int(rng.integers(1, 4)), int(rng.integers(1, 4))
    d_a = int(rng.integers(1, d_b * d_e + 1))
    v = _random_isometry(rng, d_a, d_b, d_e)
    n_l, n_k, n_y = (int(rng.integers(1, 5)) for _ in range(3))
    s = MinimalStrategy(
        encodings=[random_density_matrix(d_a, rng) for _ in range(int(rng.integers(1, 6)))],
        bob_povm=Povm(tuple(random_povm(d_b, n_l, rng))),
        env_povm=Povm(tuple(random_povm(d_e, n_k, rng))),
        kernel=_random_kernel(rng, n_l, n_k, n_y),
    )
    return v, s


def _minimal_oracle(v, s):
    # explicit (L_l (x) L_k) on the full joint state, one entry at a time
    q = s.kernel.table
    out = np.zeros((len(s.encodings), q.shape[2]))
    for i, rho in enumerate(s.encodings):
        sigma = v.matrix @ rho.matrix @ v.matrix.conj().T
        for l, bl in enumerate(s.bob_povm.effects):
            for k, ek in enumerate(s.env_povm.effects):
                out[i] += np.trace(kron(bl, ek) @ sigma).real * q[l, k]
    return out


@given(st.integers(0, 2**31 - 1))
def test_minimal_matches_explicit_oracle(seed):
    v, s = _random_minimal(np.random.default_rng(seed))
    p = simulate_assisted(v, s)
    assert np.max(np.abs(p - _minimal_oracle(v, s))) <= 1e-12
    assert np.max(np.abs(p.sum(axis=1) - 1)) <= 1e-12


@given(st.integers(0, 2**31 - 1))
def test_minimal_included_in_env_to_bob(seed):
    v, s = _random_minimal(np.random.default_rng(seed))
    a = simulate_assisted(v, s)
    b = simulate_assisted(v, minimal_as_env_to_bob(s))
    assert np.max(np.abs(a - b)) <= 1e-12


def test_n7_strategy_p075():
    v, s = strategy_n7(0.75)
    assert np.max(np.abs(simulate_assisted(v, s) - matrix_m7(0.75))) <= 1e-12


def test_trivial_environment_is_unassisted(rng):
    v = _random_isometry(rng, 4, 3, 2)
    enc = [random_density_matrix(4, rng) for _ in range(5)]
    bob = Povm(tuple(random_povm(3, 3, rng)))
    kernel = DecodeKernel.from_rule(3, 1, 3, lambda l, k: l)
    s = MinimalStrategy(enc, bob, Povm.trivial(2), kernel)
    assert np.max(np.abs(simulate_assisted(v, s) - unassisted_channel_matrix(v, enc, bob))) <= 1e-12


def test_env_to_bob_ignoring_k_collapses(rng):
    v = _random_isometry(rng, 5, 3, 3)
    enc = [random_density_matrix(5, rng) for _ in range(4)]
    bob = Povm(tuple(random_povm(3, 4, rng)))
    env = Povm(tuple(random_povm(3, 2, rng)))
    one_way = AssistedStrategy(ENV_TO_BOB, enc, env_povm=env, bob_family=(bob, bob))
    minimal = MinimalStrategy(enc, bob, env, DecodeKernel.from_rule(4, 2, 4, lambda l, k: l))
    a = simulate_assisted(v, one_way)
    assert np.max(np.abs(a - simulate_assisted(v, minimal))) <= 1e-12
    assert np.max(np.abs(a - unassisted_channel_matrix(v, enc, bob))) <= 1e-12


def test_env_to_bob_against_oracle(rng):
    v = _random_isometry(rng, 4, 2, 3)
    enc = [random_density_matrix(4, rng) for _ in range(3)]
    env = Povm(tuple(random_povm(3, 3, rng)))
    fam = tuple(Povm(tuple(random_povm(2, 2, rng))) for _ in range(3))
    s = AssistedStrategy(ENV_TO_BOB, enc, env_povm=env, bob_family=fam)
    oracle = np.zeros((3, 2))
    for i, rho in enumerate(s.encodings):
        sigma = v.matrix @ rho.matrix @ v.matrix.conj().T
        for k, ek in enumerate(env.effects):
            for j, bj in enumerate(fam[k].effects):
                oracle[i, j] += np.trace(kron(bj, ek) @ sigma).real
    assert np.max(np.abs(simulate_assisted(v, s) - oracle)) <= 1e-12


def test_bob_to_env_against_oracle(rng):
    v = _random_isometry(rng, 4, 2, 3)
    enc = [random_density_matrix(4, rng) for _ in range(3)]
    bob = Povm(tuple(random_povm(2, 2, rng)))
    fam = tuple(Povm(tuple(random_povm(3, 3, rng))) for _ in range(2))
    kernel = _random_kernel(rng, 2, 3, 4)
    s = AssistedStrategy(BOB_TO_ENV, enc, bob_povm=bob, env_family=fam, kernel=kernel)
    oracle = np.zeros((3, 4))
    for i, rho in enumerate(s.encodings):
        sigma = v.matrix @ rho.matrix @ v.matrix.conj().T
        for l, bl in enumerate(bob.effects):
            for k, ek in enumerate(fam[l].effects):
                oracle[i] += np.trace(kron(bl, ek) @ sigma).real * kernel.table[l, k]
    assert np.max(np.abs(simulate_assisted(v, s) - oracle)) <= 1e-12


def test_assisted_validation_errors(rng):
    enc = [np.eye(2) / 2]
    with pytest.raises(ValueError):
        AssistedStrategy("sideways", enc)
    with pytest.raises(ValueError):
        AssistedStrategy(ENV_TO_BOB, enc, env_povm=Povm.computational(2))
    with pytest.raises(ValueError):
        AssistedStrategy(ENV_TO_BOB, enc, env_povm=Povm.computational(2),
                         bob_family=(Povm.computational(2),))
    with pytest.raises(ValueError):
        # kernel gap: covers 2x2 outcome pairs, POVMs give 3x2
        MinimalStrategy(enc, Povm.computational(3), Povm.computational(2),
                        DecodeKernel(np.ones((2, 2, 1))))


def test_decode_kernel_validation():
    with pytest.raises(ValueError):
        DecodeKernel(np.full((1, 1, 2), 0.4))
    with pytest.raises(ValueError):
        DecodeKernel(np.array([[[1.5, -0.5]]]))


def test_simulation_dimension_mismatch():
    v, s = strategy_n7(0.5)
    v_bad = Isometry.identity(7)
    with pytest.raises(ValueError):
        simulate_assisted(v_bad, s)


def test_n7_rows_x6_x7():
    for p in (0.0, 0.3, 1.0):
        v, s = strategy_n7(p)
        m = simulate_assisted(v, s)
        assert abs(m[5, 5] - p) <= 1e-12 and abs(m[5, 6] - (1 - p)) <= 1e-12
        assert abs(m[6, 5] - p / 3) <= 1e-12 and abs(m[6, 6] - (1 - p / 3)) <= 1e-12


def test_n7_rotation_invariant():
    u = haar_random_unitary(7, 7)
    for p in (0.2, 0.9):
        a = simulate_assisted(*strategy_n7(p))
        b = simulate_assisted(*strategy_n7(p, u))
        assert np.max(np.abs(a - b)) <= 1e-12


def test_n7_rejects_bad_p():
    with pytest.raises(ValueError):
        strategy_n7(1.5)


def test_n7_unreachable_cell_has_zero_weight():
    v, s = strategy_n7(0.5, haar_random_unitary(7, 2))
    joint = outcome_distribution(v, s.encodings, s.bob_povm, s.env_povm)
    assert np.max(joint[:, 0, 1]) <= 1e-12


@pytest.mark.parametrize("d", [3, 4, 5])
def test_general_strategy_matches(d):
    v, s = strategy_general(d)
    assert np.max(np.abs(simulate_assisted(v, s) - matrix_general(d))) <= 1e-12


def test_general_strategy_entangled_rows():
    d = 5
    m = simulate_assisted(*strategy_general(d))
    for k in range(d - 1):
        assert abs(m[k, 0] - 2 / ((k + 1) * (k + 2))) <= 1e-12
    for k in range(1, d - 1):
        assert abs(m[k, k] - (k + 1) / (k + 2)) <= 1e-12


def test_general_strategy_rotated():
    d = 4
    u = haar_random_unitary(d * d - 1, 3)
    assert np.max(np.abs(simulate_assisted(*strategy_general(d, u)) - matrix_general(d))) <= 1e-12


def _pr_oracle(s):
    # enumerate the box: a uniform, b = a xor f(x) g(j)
    v = s.isometry
    n, m = len(s.f), len(s.g)
    p = np.zeros((n, s.n_outputs))
    for x in range(n):
        for a in (0, 1):
            out = DensityMatrix(s.prep[x, a])
            stats = unassisted_channel_matrix(v, [out], s.bob_povm)[0]
            for j in range(m):
                b = a ^ (int(s.f[x]) & int(s.g[j]))
                p[x, s.dec[j, b]] += 0.5 * stats[j]
    return p


@given(st.integers(0, 2**31 - 1))
def test_pr_against_enumeration(seed):
    rng = np.random.default_rng(seed)
    s = random_pr_strategy(rng, int(rng.integers(2, 6)), int(rng.integers(2, 5)))
    assert np.max(np.abs(simulate_pr(s) - _pr_oracle(s))) <= 1e-12


def test_pr_equals_sr_cbit_on_100_strategies():
    rng = np.random.default_rng(100)
    worst = 0.0
    for _ in range(100):
        s = random_pr_strategy(rng, int(rng.integers(2, 8)), int(rng.integers(2, 6)))
        worst = max(worst, float(np.max(np.abs(simulate_pr(s) - simulate_pr_via_sr_cbit(s)))))
    assert worst <= 1e-12


def test_pr_with_f_zero_is_shared_randomness(rng):
    s = random_pr_strategy(rng, 4, 3)
    s = PrStrategy(np.zeros(4, dtype=int), s.prep, s.isometry, s.bob_povm, s.g, s.dec, s.n_outputs)
    expected = np.zeros((4, s.n_outputs))
    for a in (0, 1):
        stats = unassisted_channel_matrix(s.isometry, [DensityMatrix(r) for r in s.prep[:, a]],
                                          s.bob_povm)
        relabel = np.zeros((3, s.n_outputs))
        relabel[np.arange(3), s.dec[:, a]] = 1
        expected += 0.5 * stats @ relabel
    assert np.max(np.abs(simulate_pr(s) - expected)) <= 1e-12
    assert np.max(np.abs(simulate_pr_via_sr_cbit(s) - expected)) <= 1e-12


def test_pr_prep_ignoring_box_output(rng):
    s = random_pr_strategy(rng, 4, 3)
    prep = np.stack([s.prep[:, 0], s.prep[:, 0]], axis=1)
    s = PrStrategy(s.f, prep, s.isometry, s.bob_povm, s.g, s.dec, s.n_outputs)
    stats = unassisted_channel_matrix(s.isometry, [DensityMatrix(r) for r in prep[:, 0]], s.bob_povm)
    relabel = np.zeros((3, s.n_outputs))
    for j in range(3):
        for b in (0, 1):
            relabel[j, s.dec[j, b]] += 0.5
    assert np.max(np.abs(simulate_pr(s) - stats @ relabel)) <= 1e-12


def test_sr_embedding_reproduces_unassisted(rng):
    v = _random_isometry(rng, 5, 3, 3)
    enc = [random_density_matrix(5, rng) for _ in range(4)]
    bob = Povm(tuple(random_povm(3, 4, rng)))
    s = sr_embedding(v, enc, bob, [0, 1, 2, 3])
    target = unassisted_channel_matrix(v, enc, bob)
    assert np.max(np.abs(simulate_pr(s) - target)) <= 1e-12
    assert abs(trace_fidelity(simulate_pr(s)) - trace_fidelity(target)) <= 1e-12


def test_pr_strategy_validation(rng):
    s = random_pr_strategy(rng, 3, 2)
    with pytest.raises(ValueError):
        PrStrategy(np.array([0, 2, 1]), s.prep, s.isometry, s.bob_povm, s.g, s.dec, s.n_outputs)
    with pytest.raises(ValueError):
        PrStrategy(s.f, s.prep[:2], s.isometry, s.bob_povm, s.g, s.dec, s.n_outputs)
    with pytest.raises(ValueError):
        PrStrategy(s.f, s.prep, s.isometry, s.bob_povm, s.g, s.dec + 10, s.n_outputs)


def test_mix_examples():
    m = matrix_m7(0.4)
    assert np.array_equal(mix([m], [1.0]), m)
    swap = np.eye(2)[::-1]
    assert np.array_equal(mix([np.eye(2), swap], [0.5, 0.5]), np.full((2, 2), 0.5))


def test_mix_errors():
    with pytest.raises(ValueError):
        mix([np.eye(2), np.eye(3)], [0.5, 0.5])
    with pytest.raises(ValueError):
        mix([np.eye(2), np.eye(2)], [0.7, 0.7])
    with pytest.raises(ValueError):
        mix([], [])


@given(st.integers(0, 2**31 - 1), st.integers(1, 5))
def test_mix_trace_is_linear(seed, count):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 7))
    mats = [rng.random((n, n)) for _ in range(count)]
    mats = [m / m.sum(axis=1, keepdims=True) for m in mats]
    w = rng.random(count)
    w /= w.sum()
    w[-1] = 1 - w[:-1].sum()
    mixed = mix(mats, w)
    assert abs(trace_fidelity(mixed) - sum(wk * trace_fidelity(m) for wk, m in zip(w, mats))) <= 1e-12
    assert np.max(np.abs(mixed.sum(axis=1) - 1)) <= 1e-12


def _greedy_decoder_trace(s):
    # coordinate ascent on dec[j, b] for the largest trace
    dec, n = s.dec.copy(), s.n_outputs
    best = trace_fidelity(simulate_pr(s))
    improved = True
    while improved:
        improved = False
        for j in range(dec.shape[0]):
            for b in (0, 1):
                for y in range(n):
                    trial = dec.copy()
                    trial[j, b] = y
                    t = trace_fidelity(simulate_pr(
                        PrStrategy(s.f, s.prep, s.isometry, s.bob_povm, s.g, trial, n)))
                    if t > best + 1e-12:
                        best, dec, improved = t, trial, True
    return best


def test_pr_trace_bound_with_optimised_decoders():
    rng = np.random.default_rng(31)
    worst = 0.0
    for _ in range(25):
        u = haar_random_unitary(7, rng)
        v, _ = strategy_n7(0.0, u)
        basis = u.conj().T
        prep = np.zeros((7, 2, 7, 7), dtype=complex)
        for x in range(7):
            for a in (0, 1):
                k = x if rng.random() < 0.7 else int(rng.integers(0, 7))
                prep[x, a] = np.outer(basis[:, k], basis[:, k].conj())
        s = PrStrategy(rng.integers(0, 2, 7), prep, v, Povm.computational(3),
                       rng.integers(0, 2, 3), rng.integers(0, 7, (3, 2)), 7)
        worst = max(worst, _greedy_decoder_trace(s))
    assert 2.5 < worst <= 5 + 1e-9
