import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from stablerules.errors import EmptySelection, InvalidValue, TooFewStableColumns
from stablerules.synthesis import (LINEAR, NONLINEAR, BiasSpec, EnvSpec, bias_sample, beta_stable,
                                   gen_covariates, gen_labels, make_environment, selection_probability,
                                   write_environment_csv)


class TestCovariates:
    def test_linear_neighbour_correlation(self):
        S, _ = gen_covariates(EnvSpec(LINEAR, n=5000, p_total=10, seed=3))
        for i in range(S.shape[1]):
            r = np.corrcoef(S[:, i], S[:, (i + 1) % S.shape[1]])[0, 1]
            assert r == pytest.approx(0.8 * 0.2 / (0.8 ** 2 + 0.2 ** 2), abs=0.05)

    def test_shapes(self):
        S, V = gen_covariates(EnvSpec(NONLINEAR, n=100, p_total=5, p_s=2, p_v=3))
        assert S.shape == (100, 2) and V.shape == (100, 3)

    @given(st.integers(0, 2**31), st.sampled_from([LINEAR, NONLINEAR]))
    def test_deterministic(self, seed, kind):
        a = gen_covariates(EnvSpec(kind, n=50, p_total=5, seed=seed))
        b = gen_covariates(EnvSpec(kind, n=50, p_total=5, seed=seed))
        np.testing.assert_array_equal(a[0], b[0])
        np.testing.assert_array_equal(a[1], b[1])

    def test_nonlinear_confounding(self):
        spec = EnvSpec(NONLINEAR, n=5000, p_total=10, seed=1)
        S, _ = gen_covariates(spec)
        Z = np.random.default_rng(1).standard_normal((5000, spec.p_s))
        r = np.corrcoef(S[:, 0], np.exp(Z[:, 1]))[0, 1]
        assert r > 0.2

    def test_split_default(self):
        spec = EnvSpec(n=10, p_total=10)
        assert (spec.p_s, spec.p_v) == (4, 6)

    def test_bad_split(self):
        with pytest.raises(InvalidValue):
            EnvSpec(p_total=5, p_s=3, p_v=3)


class TestLabels:
    def test_beta_pattern(self):
        np.testing.assert_allclose(beta_stable(5), [1 / 3, -2 / 3, 1, -1 / 3, 2 / 3])
        np.testing.assert_allclose(beta_stable(8)[6:], [1 / 3, -2 / 3])

    def test_plug_in(self):
        S = np.ones((1, 5))
        y = gen_labels(S, np.random.default_rng(0).normal(size=(1, 3)), 0.0)
        assert y[0] == pytest.approx(beta_stable(5).sum() + 1.0, abs=1e-12)

    def test_v_permutation(self, rng):
        S, V = rng.normal(size=(20, 3)), rng.normal(size=(20, 4))
        np.testing.assert_array_equal(gen_labels(S, V, 0.3, 5), gen_labels(S, V[:, ::-1], 0.3, 5))

    def test_too_few_stable(self):
        with pytest.raises(TooFewStableColumns):
            gen_labels(np.ones((3, 1)), np.ones((3, 2)), 0.0)

    def test_linear_v_uncorrelated(self):
        env = make_environment(EnvSpec(LINEAR, n=10000, p_total=10, seed=2))
        for j in range(env.V.shape[1]):
            assert abs(np.corrcoef(env.V[:, j], env.Y)[0, 1]) < 0.05


class TestBias:
    def test_zero_distance_kept(self):
        S = np.zeros((1, 2))
        pr = selection_probability(S, np.zeros((1, 1)), BiasSpec(r=3.0))
        assert pr[0] == 1.0

    def test_unit_distance(self):
        pr = selection_probability(np.zeros((1, 2)), np.ones((1, 1)), BiasSpec(r=3.0))
        assert pr[0] == pytest.approx(3.0 ** -5)
        assert pr[0] == pytest.approx(0.00412, abs=1e-5)

    def test_rate_bounds(self):
        with pytest.raises(InvalidValue):
            BiasSpec(r=1.0)
        with pytest.raises(InvalidValue):
            BiasSpec(r=-3.5)

    def test_sign_of_injected_correlation(self):
        spec = EnvSpec(LINEAR, n=2000, p_total=10, seed=4)
        pos = make_environment(spec, BiasSpec(r=2.0))
        neg = make_environment(spec, BiasSpec(r=-2.0))
        nb = BiasSpec(r=2.0).n_biased(10, spec.p_v)

        def mean_corr(env):
            return np.mean([np.corrcoef(env.V[:, j], env.Y)[0, 1] for j in range(nb)])

        assert mean_corr(pos) > mean_corr(neg)

    def test_strong_bias_injects_correlation(self):
        env = make_environment(EnvSpec(LINEAR, n=2000, p_total=10, seed=5), BiasSpec(r=3.0))
        nb = BiasSpec(r=3.0).n_biased(10, env.spec.p_v)
        assert np.mean([abs(np.corrcoef(env.V[:, j], env.Y)[0, 1]) for j in range(nb)]) > 0.1

    def test_bias_sample_deterministic(self, rng):
        S, V = rng.normal(size=(500, 4)), rng.normal(size=(500, 6))
        a = bias_sample(S, V, None, BiasSpec(r=1.5), 9)
        b = bias_sample(S, V, None, BiasSpec(r=1.5), 9)
        np.testing.assert_array_equal(a, b)

    def test_empty_selection(self):
        S = np.zeros((3, 2))
        V = np.full((3, 1), 100.0)
        with pytest.raises(EmptySelection):
            bias_sample(S, V, None, BiasSpec(r=3.0), 0)


class TestExport:
    def test_csv_and_sidecar(self, tmp_path):
        env = make_environment(EnvSpec(n=5, p_total=5, seed=1))
        side = write_environment_csv(env, tmp_path / "env.csv")
        lines = (tmp_path / "env.csv").read_text().splitlines()
        assert lines[0] == "S_0,S_1,V_0,V_1,V_2,Y"
        assert len(lines) == 6
        meta = json.loads(open(side).read())
        assert meta["env"]["seed"] == 1 and meta["bias"] is None
