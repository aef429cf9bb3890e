import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import fidelity_oracle, single_qubit_z_kernel
from qkr.feature_map import FeatureMapSpec, build_circuit
from qkr.qkernel import (
    KernelMatrix,
    KernelMode,
    cross_matrix,
    gram_matrix,
    kernel_entry_exact,
    kernel_entry_sampled,
    psd_project,
)
from qkr.statevector import apply_circuit, new_zero_state, probability_all_zero

ZZ2 = FeatureMapSpec("ZZ", "full", 2, 5)


def test_self_kernel_is_one():
    x = np.array([0.3, 2.0, 1.1, 0.0, 3.1])
    assert abs(kernel_entry_exact(ZZ2, x, x) - 1) < 1e-12


def test_single_qubit_z_kernel_value():
    spec = FeatureMapSpec("Z", "none", 1, 1)
    for x, y in [(0.0, math.pi), (0.0, math.pi / 4), (1.0, 2.5)]:
        assert abs(kernel_entry_exact(spec, [x], [y]) - single_qubit_z_kernel(x, y)) < 1e-12
    assert abs(kernel_entry_exact(spec, [0.0], [math.pi / 4]) - 0.5) < 1e-12


def test_zz_full_two_level_matches_matrix_oracle():
    rng = np.random.default_rng(42)
    for _ in range(3):
        x, y = rng.uniform(0, math.pi, (2, 5))
        ref = fidelity_oracle(x, y, entanglement="full", reps=2)
        assert abs(kernel_entry_exact(ZZ2, x, y) - ref) < 1e-10


def test_sampled_identical_inputs_give_one():
    x = [0.1, 0.2, 0.3, 0.4, 0.5]
    for shots in (1, 7, 1000):
        assert kernel_entry_sampled(ZZ2, x, x, shots, seed=3) == 1.0


def test_sampled_single_shot_is_binary():
    rng = np.random.default_rng(1)
    vals = {kernel_entry_sampled(ZZ2, *rng.uniform(0, 1, (2, 5)), shots=1, seed=s) for s in range(20)}
    assert vals <= {0.0, 1.0}


def test_sampled_within_binomial_bound():
    rng = np.random.default_rng(9)
    shots = 10 ** 5
    spec = FeatureMapSpec("ZZ", "full", 2, 5)
    for k in range(10):
        x, y = rng.uniform(0, 0.4, (2, 5))
        p = kernel_entry_exact(spec, x, y)
        est = kernel_entry_sampled(spec, x, y, shots, seed=k)
        assert abs(est - p) <= 4 * math.sqrt(p * (1 - p) / shots) + 1e-12


def test_sampled_rejects_zero_shots():
    with pytest.raises(ValueError):
        kernel_entry_sampled(ZZ2, np.zeros(5), np.zeros(5), 0, 0)
    with pytest.raises(ValueError):
        KernelMode(shots=0)


def test_compute_uncompute_returns_to_zero():
    x = np.array([2.1, 0.3, 1.7, 2.9, 0.6])
    prog = build_circuit(ZZ2, x) + build_circuit(ZZ2, x).inverse()
    s = apply_circuit(new_zero_state(5), prog.gates)
    assert abs(probability_all_zero(s) - 1) < 1e-12


def test_gram_identical_rows():
    K = gram_matrix(ZZ2, [[0.5] * 5, [0.5] * 5])
    np.testing.assert_allclose(K.values, np.ones((2, 2)), rtol=0, atol=1e-12)


def test_gram_32_rows_unit_diagonal():
    X = np.random.default_rng(0).uniform(0, math.pi, (32, 5))
    K = gram_matrix(ZZ2, X, ids=[f"R{i}" for i in range(32)])
    assert K.shape == (32, 32)
    assert np.all(np.diag(K.values) == 1.0)
    assert K.row_ids == K.col_ids == [f"R{i}" for i in range(32)]


def test_gram_entries_match_pairwise():
    X = np.random.default_rng(2).uniform(0, math.pi, (6, 5))
    K = gram_matrix(ZZ2, X).values
    for i in range(6):
        for j in range(6):
            if i != j:
                assert abs(K[i, j] - kernel_entry_exact(ZZ2, X[i], X[j])) < 1e-12


def test_cross_matrix_entries():
    rng = np.random.default_rng(4)
    A, B = rng.uniform(0, math.pi, (3, 5)), rng.uniform(0, math.pi, (4, 5))
    K = cross_matrix(ZZ2, A, B)
    assert K.shape == (3, 4)
    for i in range(3):
        for j in range(4):
            assert abs(K.values[i, j] - kernel_entry_exact(ZZ2, A[i], B[j])) < 1e-12


def test_cross_matrix_equal_sets_matches_gram():
    X = np.random.default_rng(5).uniform(0, math.pi, (5, 5))
    np.testing.assert_allclose(cross_matrix(ZZ2, X, X).values, gram_matrix(ZZ2, X).values, atol=1e-12)


def test_cross_matrix_row_equal_to_train_row():
    X = np.random.default_rng(6).uniform(0, math.pi, (4, 5))
    row = cross_matrix(ZZ2, X[2:3], X).values[0]
    assert abs(row[2] - 1) < 1e-12


def test_width_mismatch_rejected():
    with pytest.raises(ValueError):
        gram_matrix(ZZ2, np.zeros((3, 4)))
    with pytest.raises(ValueError):
        cross_matrix(ZZ2, np.zeros((3, 5)), np.zeros((3, 4)))


def test_sampled_gram_structure_and_determinism():
    X = np.random.default_rng(8).uniform(0, 0.5, (6, 5))
    mode = KernelMode(shots=500, seed=11)
    K1, K2 = gram_matrix(ZZ2, X, mode), gram_matrix(ZZ2, X, mode)
    assert np.array_equal(K1.values, K2.values)
    assert np.array_equal(K1.values, K1.values.T)
    assert np.all(np.diag(K1.values) == 1.0)
    assert np.all(np.round(K1.values * 500) == K1.values * 500)


def test_sampled_error_halves_when_shots_quadruple():
    X = np.random.default_rng(12).uniform(0, 0.6, (24, 5))
    exact = gram_matrix(ZZ2, X).values
    iu = np.triu_indices(24, 1)

    def mad(shots):
        devs = [np.abs(gram_matrix(ZZ2, X, KernelMode(shots, s)).values - exact)[iu].mean() for s in range(4)]
        return float(np.mean(devs))

    ratio = mad(4000) / mad(1000)
    assert 0.35 < ratio < 0.65


def test_psd_project_identity():
    K = psd_project(KernelMatrix(np.eye(3)))
    np.testing.assert_allclose(K.values, np.eye(3), atol=1e-15)


def test_psd_project_two_by_two():
    K = psd_project(KernelMatrix(np.array([[1.0, 1.2], [1.2, 1.0]])))
    np.testing.assert_allclose(K.values, np.full((2, 2), 1.1), atol=1e-12)


def test_psd_project_keeps_exact_gram():
    K = gram_matrix(ZZ2, np.random.default_rng(3).uniform(0, math.pi, (10, 5)))
    np.testing.assert_allclose(psd_project(K).values, K.values, atol=1e-10)


def test_psd_project_rejects_non_square():
    with pytest.raises(ValueError):
        psd_project(KernelMatrix(np.zeros((2, 3))))


def test_kernel_csv_roundtrip(tmp_path):
    X = np.random.default_rng(1).uniform(0, 1, (3, 5))
    K = gram_matrix(ZZ2, X, ids=["a", "b", "c"])
    K.to_csv(tmp_path / "k.csv")
    header = (tmp_path / "k.csv").read_text().splitlines()[0]
    assert header == "record_id,a,b,c"
    back = KernelMatrix.from_csv(tmp_path / "k.csv")
    assert back.row_ids == ["a", "b", "c"]
    assert np.array_equal(back.values, K.values)


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 40), st.integers(0, 2 ** 32 - 1),
       st.sampled_from([("Z", "none"), ("ZZ", "linear"), ("ZZ", "full")]), st.integers(1, 2))
def test_gram_symmetric_bounded_psd(m, seed, fam_ent, reps):
    spec = FeatureMapSpec(*fam_ent, reps, 5)
    X = np.random.default_rng(seed).uniform(0, math.pi, (m, 5))
    K = gram_matrix(spec, X).values
    assert np.max(np.abs(K - K.T)) <= 1e-12
    assert np.all(np.abs(np.diag(K) - 1) <= 1e-12)
    assert K.min() >= 0 and K.max() <= 1
    assert np.linalg.eigvalsh(K)[0] >= -1e-9
