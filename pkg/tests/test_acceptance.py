"""Acceptance suite: every exit criterion at its stated tolerance.

Each test prints one pass/fail line (visible with ``pytest -v`` plus ``-s`` or
``-rA``) and enforces the criterion's runtime budget.
"""

import json
import subprocess
import sys
import time

import numpy as np
import pytest

from capred import (
    OptimizerSettings,
    blahut_arimoto,
    brute_force_capacity,
    definite_set,
    gram_form,
    identity_map,
    make_classical_stochastic,
    optimize_capacity,
    pinching_entropy_suite,
    random_cp_map,
    reduce_capacity,
    restriction_equality,
    extract_partition,
    tensor_product,
    tensor_with_identity,
)
from conftest import (
    binary_entropy,
    diag_pinching,
    full_depolarize,
    mixed_fixture,
    random_doubly_stochastic,
)

LOG2 = np.log(2)


class _Budget:
    def __init__(self, name, seconds):
        self.name = name
        self.seconds = seconds

    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc, tb):
        self.elapsed = time.perf_counter() - self.start
        if exc_type is None:
            print(f"acceptance {self.name}: PASS ({self.elapsed:.1f}s / {self.seconds}s)")
            assert self.elapsed < self.seconds, (
                f"{self.name} exceeded its runtime budget: {self.elapsed:.1f}s")
        else:
            print(f"acceptance {self.name}: FAIL ({self.elapsed:.1f}s)")
        return False


def test_c1_diagonal_pinching_exact_and_optimizer():
    with _Budget("c1 diagonal pinching exactness", 60):
        for d in (2, 3, 4):
            pinch = diag_pinching(d)
            tree = reduce_capacity(pinch, OptimizerSettings(restarts=2, max_iter=100, seed=1))
            assert abs(tree.combined_value - np.log(d)) <= 1e-9
            opt = optimize_capacity(pinch, OptimizerSettings(restarts=16, max_iter=250, seed=42))
            assert opt.value >= np.log(d) - 2e-3
            assert opt.value <= np.log(d) + 1e-9


def test_c2_reduction_vs_brute_force():
    with _Budget("c2 mixed fixture vs brute force", 120):
        fx = mixed_fixture()
        tree = reduce_capacity(fx, OptimizerSettings(restarts=4, max_iter=200, seed=2))
        assert abs(tree.combined_value - LOG2) <= 1e-9
        brute = brute_force_capacity(fx, seed=5, samples=100_000)
        assert brute.iterations >= 100_000
        assert LOG2 - 2e-3 <= brute.value <= LOG2 + 1e-9


def test_c3_abelian_oracle_agreement():
    with _Budget("c3 abelian oracle agreement", 60):
        settings = OptimizerSettings(restarts=4, max_iter=500, seed=3)
        for seed in range(10):
            t = random_doubly_stochastic(3, seed)
            ascent = optimize_capacity(make_classical_stochastic(t), settings)
            oracle = blahut_arimoto(t)
            assert abs(ascent.value - oracle.value) <= 1e-3
        bsc_value = blahut_arimoto([[0.9, 0.1], [0.1, 0.9]]).value
        assert abs(bsc_value - (LOG2 - binary_entropy(0.1))) <= 1e-6


def test_c4_pinched_entropy_properties():
    with _Budget("c4 pinched entropy suite", 30):
        for blocks in ([2], [3], [2, 2]):
            out = pinching_entropy_suite(blocks, 1000, seed=4)
            assert out["minSlack"] >= -1e-9
            assert out["maxEqualityResidual"] <= 1e-9


def test_c5_restriction_equality():
    with _Budget("c5 restriction equality", 120):
        settings = OptimizerSettings(restarts=8, max_iter=300, seed=5)
        for phi in (identity_map([2]), mixed_fixture()):
            partition = extract_partition(definite_set(phi), 5)
            report = restriction_equality(phi, partition, settings)
            assert abs(report.gap) <= 2e-3


def test_c6_tensor_with_identity():
    with _Budget("c6 tensor with identity", 300):
        settings = OptimizerSettings(restarts=4, max_iter=200, seed=6)
        report = tensor_with_identity(full_depolarize(2), [2], settings)
        assert abs(report.tensor.combined_value - LOG2) <= 1e-9
        assert report.tensor.assembled_chi >= LOG2 - 5e-3
        report2 = tensor_with_identity(diag_pinching(2), [1, 1], settings)
        assert abs(report2.tensor.combined_value - np.log(4)) <= 5e-3


def test_c7_definite_set_correctness():
    with _Budget("c7 definite set correctness", 60):
        for seed in range(50):
            shape = [2, 1] if seed % 2 else [3]
            phi = random_cp_map(shape, seed)
            assert float(np.linalg.eigvalsh(gram_form(phi)).min()) >= -1e-9
        assert definite_set(identity_map([2])).dimension == 4
        assert definite_set(full_depolarize(2)).dimension == 1
        for d in (2, 3, 4):
            assert definite_set(diag_pinching(d)).dimension == d


def test_c8_partition_seed_invariance():
    with _Budget("c8 partition seed invariance", 180):
        settings = OptimizerSettings(restarts=4, max_iter=150, seed=8)
        for phi in (mixed_fixture(), tensor_product(identity_map([2]), diag_pinching(2))):
            values = [
                reduce_capacity(phi, settings, extraction_seed=seed).combined_value
                for seed in range(5)
            ]
            assert max(values) - min(values) <= 4e-3


def test_c9_cli_reproducibility(tmp_path):
    with _Budget("c9 cli reproducibility", 60):
        jobs = [
            ["reduce", "depolcorner:[3];rank=2", "--seed", "7", "--restarts", "2",
             "--max-iter", "80"],
            ["capacity", "dstoch:[[0.9,0.1],[0.1,0.9]]", "--seed", "7"],
            ["verify-lemma1", "--shape", "[2]", "--samples", "100", "--seed", "7"],
        ]
        for job in jobs:
            outputs = []
            for _ in range(2):
                proc = subprocess.run([sys.executable, "-m", "capred", *job],
                                      capture_output=True, check=True)
                outputs.append(proc.stdout)
            assert outputs[0] == outputs[1], f"job {job} is not byte-identical"
            json.loads(outputs[0])  # valid JSON
