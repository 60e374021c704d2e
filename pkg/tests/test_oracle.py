import numpy as np
import pytest

from conftest import chisquare_pvalue
from memwalk import oracle
from memwalk.model import InitialSpec, initial_step, step, validate_params
from memwalk.oracle import enumerate_paths, exact_marginals


class TestEnumeratePaths:
    def test_single_step_uniform(self):
        params = validate_params(1, False, 0.5, 0.5)
        dist = enumerate_paths(params, InitialSpec.uniform(), 1)
        assert np.allclose(dist.probs, [0.5, 0.5])

    def test_two_step_hand_values(self):
        params = validate_params(1, False, 0.75, 1.0)
        dist = enumerate_paths(params, InitialSpec.uniform(), 2)
        law = dict(dist.sequences())
        assert law[(0, 0)] == pytest.approx(0.375, abs=1e-15)
        assert law[(0, 1)] == pytest.approx(0.125, abs=1e-15)
        assert law[(1, 0)] == pytest.approx(0.125, abs=1e-15)
        assert law[(1, 1)] == pytest.approx(0.375, abs=1e-15)

    def test_total_mass_sweep(self):
        rng = np.random.default_rng(42)
        for _ in range(15):
            d = int(rng.integers(1, 3))
            lazy = bool(rng.integers(2))
            params = validate_params(d, lazy, rng.uniform(), rng.uniform())
            n = int(rng.integers(1, 5))
            dist = enumerate_paths(params, InitialSpec.uniform(), n)
            assert len(dist.probs) == params.K**n
            assert abs(dist.probs.sum() - 1.0) < 1e-12

    def test_zero_probability_paths_retained(self):
        params = validate_params(1, False, 0.5, 0.5)
        dist = enumerate_paths(params, InitialSpec.fixed(0), 2)
        assert len(dist.probs) == 4
        assert dist.probs[2] == 0.0 and dist.probs[3] == 0.0

    def test_size_guard(self):
        params = validate_params(3, False, 0.5, 0.5)
        with pytest.raises(ValueError):
            enumerate_paths(params, InitialSpec.uniform(), 10)


class TestExactMarginals:
    def test_symmetric_memory_mean_zero(self):
        params = validate_params(2, False, 0.7, 1.0)
        marg = exact_marginals(params, InitialSpec.uniform(), 4)
        assert np.allclose(marg.mean_position, 0.0, atol=1e-14)

    def test_axis_counts_split_evenly(self):
        for d, n in [(1, 4), (2, 4)]:
            params = validate_params(d, False, 0.8, 1.0)
            marg = exact_marginals(params, InitialSpec.uniform(), n)
            assert np.allclose(marg.mean_axis_counts, n / d, atol=1e-12)

    def test_iid_binomial_mean(self):
        # first step drawn from the bias law itself, so all 3 steps are
        # i.i.d. and E(S_3) = 3 (2p - 1)
        params = validate_params(1, False, 0.7, 0.0)
        marg = exact_marginals(params, InitialSpec.custom([0.7, 0.3]), 3)
        assert marg.mean_position[0] == pytest.approx(1.2, abs=1e-14)

    def test_fixed_start_first_moment(self):
        params = validate_params(1, False, 0.9, 1.0)
        marg = exact_marginals(params, InitialSpec.fixed(0), 1)
        assert np.allclose(marg.mean_position, [1.0])
        assert np.allclose(marg.position_cov, [[0.0]])


class TestSamplerAgainstOracle:
    def test_three_step_paths_chi_square(self):
        params = validate_params(1, False, 0.75, 1.0)
        init = InitialSpec.uniform()
        dist = enumerate_paths(params, init, 3)
        rng = np.random.default_rng(777)
        freq = np.zeros(len(dist.probs), dtype=int)
        for _ in range(20_000):
            state = initial_step(params, init, rng)
            pid = int(np.argmax(state.counts))
            for _ in range(2):
                prev = state.counts.copy()
                state = step(params, state, rng)
                pid = pid * params.K + int(np.argmax(state.counts - prev))
            freq[pid] += 1
        assert chisquare_pvalue(freq, dist.probs) > 1e-3


class TestCountLaws:
    def test_walk_count_law_masses(self):
        params = validate_params(1, True, 0.4, 0.6)
        law = oracle.walk_count_law(params, InitialSpec.uniform(), 3)
        assert abs(sum(law.values()) - 1.0) < 1e-12
        assert all(sum(key) == 3 for key in law)

    def test_urn_count_law_masses(self):
        params = validate_params(1, False, 0.9, 1.0)
        law = oracle.urn_count_law(params, InitialSpec.uniform(), 4)
        assert abs(sum(law.values()) - 1.0) < 1e-12
        assert all(sum(key) == 4 for key in law)

    def test_total_variation_of_identical_laws(self):
        law = {(1, 0): 0.5, (0, 1): 0.5}
        assert oracle.total_variation(law, dict(law)) == 0.0
        assert oracle.total_variation(law, {(1, 0): 1.0}) == pytest.approx(0.5)
