import math

import numpy as np
import pytest
from scipy.integrate import quad

from totokit import numkit as nk
from totokit import smm
from totokit.numkit import Rng, Tensor

# closed form at K=1, mu=0, tau=1, nu=3, x=0: Gamma(2)=1, Gamma(1.5)=sqrt(pi)/2
LOGPDF_T3_AT_0 = math.log(1.0 / (0.886226925452758 * math.sqrt(3.0 * math.pi)))


def random_params(rng: np.random.Generator, k: int) -> smm.MixtureParams:
    logits = rng.normal(size=k)
    pi = np.exp(logits) / np.exp(logits).sum()
    return smm.MixtureParams(
        pi=pi,
        mu=rng.uniform(-3.0, 3.0, size=k),
        tau=rng.uniform(0.05, 2.0, size=k),
        nu=rng.uniform(2.5, 20.0, size=k),
    )


class TestComputeParams:
    def test_zero_head_values(self):
        head = smm.init_head(Rng(0), 4, 3, scale=0.0)
        params = smm.compute_params(Tensor(np.zeros((2, 4))), head)
        assert np.allclose(params.nu.data, 2.0 + math.log(2.0), atol=1e-12)
        assert np.allclose(params.tau.data, math.log(2.0), atol=1e-12)
        assert np.allclose(params.pi.data, 1.0 / 3.0, atol=1e-12)
        assert np.allclose(params.mu.data, 0.0)

    def test_tau_floor_never_zero(self):
        head = smm.init_head(Rng(0), 2, 1, scale=0.0)
        head["b_tau"] = Tensor(np.array([-5000.0]))
        params = smm.compute_params(Tensor(np.ones((1, 2))), head)
        assert params.tau.data.min() >= smm.EPS

    def test_pi_shift_invariance(self):
        head = smm.init_head(Rng(3), 3, 4)
        h = Tensor(np.random.default_rng(0).normal(size=(5, 3)))
        base = smm.compute_params(h, head).pi.data
        shifted_head = dict(head)
        shifted_head["b_pi"] = Tensor(head["b_pi"].data + 100.0)
        shifted = smm.compute_params(h, shifted_head).pi.data
        assert np.max(np.abs(base - shifted)) < 1e-12

    def test_invariants_hold_for_random_features(self):
        head = smm.init_head(Rng(5), 6, 4)
        h = Tensor(np.random.default_rng(1).normal(size=(7, 6)) * 10.0)
        params = smm.compute_params(h, head)
        params.validate()


class TestLogProb:
    def test_closed_form(self):
        params = smm.MixtureParams(pi=[1.0], mu=[0.0], tau=[1.0], nu=[3.0])
        value = smm.log_prob(params, 0.0)
        assert abs(value - LOGPDF_T3_AT_0) < 1e-12
        assert abs(value - (-1.0009)) < 1e-3

    def test_symmetry_about_mu(self):
        params = smm.MixtureParams(pi=[1.0], mu=[1.7], tau=[0.8], nu=[4.2])
        for a in (0.3, 1.0, 5.5):
            assert abs(smm.log_prob(params, 1.7 + a) - smm.log_prob(params, 1.7 - a)) < 1e-12

    def test_quadrature_normalization_random(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            params = random_params(rng, int(rng.integers(1, 4)))
            integral, _ = quad(lambda x: math.exp(smm.log_prob(params, x)),
                               -50.0, 50.0, limit=200)
            assert 0.999 <= integral <= 1.001

    def test_invalid_params_rejected(self):
        bad = smm.MixtureParams(pi=[0.7, 0.7], mu=[0.0, 0.0], tau=[1.0, 1.0],
                                nu=[3.0, 3.0])
        with pytest.raises(ValueError):
            smm.mixture_log_prob(bad, 0.0)

    def test_logsumexp_stability_extreme_residual(self):
        params = smm.MixtureParams(pi=[1.0], mu=[0.0], tau=[smm.EPS], nu=[2.1])
        assert math.isfinite(smm.log_prob(params, 1e8))


class TestMoments:
    def test_mean_linearity(self):
        params = smm.MixtureParams(pi=[0.5, 0.5], mu=[-1.0, 3.0], tau=[1.0, 1.0],
                                   nu=[3.0, 3.0])
        assert abs(float(smm.mixture_mean(params).data) - 1.0) < 1e-12

    def test_single_component_variance(self):
        params = smm.MixtureParams(pi=[1.0], mu=[0.0], tau=[1.0], nu=[4.0])
        assert abs(float(smm.mixture_variance(params).data) - 2.0) < 1e-12

    def test_monte_carlo_mean(self):
        rng = np.random.default_rng(3)
        params = random_params(rng, 3)
        draws = smm.sample(params, Rng(11), 1_000_000)
        analytic_mean = float(smm.mixture_mean(params).data)
        sd = math.sqrt(float(smm.mixture_variance(params).data))
        assert abs(draws.mean() - analytic_mean) < 4.0 * sd / 1000.0


class TestSample:
    def test_degenerate_scale_pins_samples(self):
        params = smm.MixtureParams(pi=[1.0, 0.0], mu=[2.5, -50.0],
                                   tau=[smm.EPS, 1.0], nu=[5.0, 5.0])
        draws = smm.sample(params, Rng(4), 10_000)
        assert np.max(np.abs(draws - 2.5)) < 1e-3

    def test_fixed_seed_reproducible(self):
        params = smm.MixtureParams(pi=[0.4, 0.6], mu=[0.0, 4.0], tau=[1.0, 0.3],
                                   nu=[3.0, 9.0])
        assert np.array_equal(smm.sample(params, Rng(8), 1000),
                              smm.sample(params, Rng(8), 1000))

    def test_ks_against_quadrature_cdf(self):
        rng = np.random.default_rng(5)
        params = random_params(rng, 2)
        n = 100_000
        draws = np.sort(smm.sample(params, Rng(9), n))
        # CDF by quadrature of the density over segments between probe points
        probes = draws[:: n // 200]
        cdf_vals = []
        acc, _ = quad(lambda x: math.exp(smm.log_prob(params, x)), -200.0,
                      float(probes[0]), limit=200)
        cdf_vals.append(acc)
        for left, right in zip(probes[:-1], probes[1:]):
            seg, _ = quad(lambda x: math.exp(smm.log_prob(params, x)),
                          float(left), float(right), limit=200)
            acc += seg
            cdf_vals.append(acc)
        empirical = np.searchsorted(draws, probes, side="right") / n
        sup = np.max(np.abs(np.asarray(cdf_vals) - empirical))
        assert sup < 0.01

    def test_bad_n_rejected(self):
        params = smm.MixtureParams(pi=[1.0], mu=[0.0], tau=[1.0], nu=[3.0])
        with pytest.raises(ValueError):
            smm.sample(params, Rng(0), 0)


class TestRobustLoss:
    def test_quadratic_case(self):
        assert abs(float(smm.robust_loss(2.0, 0.0, 2.0, 1.0).data) - 2.0) < 1e-12

    def test_zero_residual_all_alphas(self):
        for alpha in (2.0, 1.0, 0.0, -2.0, float("-inf")):
            assert float(smm.robust_loss(3.3, 3.3, alpha, 0.7).data) == 0.0

    def test_cauchy_closed_form(self):
        value = float(smm.robust_loss(math.sqrt(2.0), 0.0, 0.0, 1.0).data)
        assert abs(value - math.log(2.0)) < 1e-12

    def test_alpha_validation(self):
        with pytest.raises(ValueError):
            smm.robust_loss(1.0, 0.0, 2.5, 1.0)
        with pytest.raises(ValueError):
            smm.robust_loss(1.0, 0.0, 0.0, 0.0)

    def test_limit_consistency_near_two(self):
        # the general case converges to r^2/2 like (r^2/2)(1-a/2)ln(r^2/(2-a)):
        # at alpha=2-1e-6 the gap over |r|<=10 is ~4.4e-4 (at alpha=1.999 it
        # is ~0.26, far beyond any tight tolerance; see the acceptance notes)
        r = np.linspace(-10.0, 10.0, 1001)
        general = smm.robust_loss(Tensor(r), Tensor(np.zeros_like(r)), 2.0 - 1e-6, 1.0).data
        quadratic = smm.robust_loss(Tensor(r), Tensor(np.zeros_like(r)), 2.0, 1.0).data
        assert np.max(np.abs(general - quadratic)) < 1e-3

    def test_limit_consistency_near_zero(self):
        r = np.linspace(-10.0, 10.0, 1001)
        general = smm.robust_loss(Tensor(r), Tensor(np.zeros_like(r)), 1e-6, 1.0).data
        cauchy = smm.robust_loss(Tensor(r), Tensor(np.zeros_like(r)), 0.0, 1.0).data
        assert np.max(np.abs(general - cauchy)) < 1e-4

    @pytest.mark.parametrize("alpha", [2.0, 1.5, 1.0, 0.0, -1.0, -4.0, float("-inf")])
    def test_monotone_in_absolute_residual(self, alpha):
        r = np.linspace(0.0, 25.0, 500)
        vals = smm.robust_loss(Tensor(r), Tensor(np.zeros_like(r)), alpha, 0.8).data
        assert np.all(np.diff(vals) >= -1e-12)

    @pytest.mark.parametrize("alpha", [2.0, 0.0, -1.3, float("-inf")])
    def test_gradients(self, alpha):
        def f(t):
            return nk.tsum(smm.robust_loss(Tensor([0.7, -2.0, 4.0]), t, alpha, 0.5))

        x = Tensor(np.array([0.1, 0.2, 0.3]))
        assert nk.finite_difference_check(f, x, eps=1e-6) < 1e-6


class TestCompositeLoss:
    def _setup(self):
        rng = np.random.default_rng(6)
        head = smm.init_head(Rng(7), 4, 3)
        h = Tensor(rng.normal(size=(5, 4)))
        params = smm.compute_params(h, head)
        targets = rng.normal(size=5)
        return params, targets

    def test_lambda_one_is_mean_nll(self):
        params, targets = self._setup()
        cfg = smm.LossConfig(lambda_nll=1.0)
        loss = float(smm.composite_loss(params, targets, np.ones(5), cfg).data)
        nll = -smm.mixture_log_prob(params, targets).data
        assert abs(loss - nll.mean()) < 1e-12

    def test_lambda_zero_is_mean_robust(self):
        params, targets = self._setup()
        cfg = smm.LossConfig(lambda_nll=0.0, alpha=0.0, delta=0.101)
        loss = float(smm.composite_loss(params, targets, np.ones(5), cfg).data)
        rob = smm.robust_loss(Tensor(targets), smm.mixture_mean(params),
                              cfg.alpha, cfg.delta).data
        assert abs(loss - rob.mean()) < 1e-12

    def test_hand_blend_three_timesteps(self):
        # independent spreadsheet-style evaluation of the default blend
        params = smm.MixtureParams(pi=[[1.0], [1.0], [1.0]],
                                   mu=[[0.5], [1.0], [-0.2]],
                                   tau=[[0.3], [1.2], [0.9]],
                                   nu=[[3.0], [5.0], [8.0]])
        targets = np.array([0.4, 1.5, 0.0])
        cfg = smm.LossConfig(lambda_nll=0.5755, alpha=0.0, delta=0.1010)
        expected = 0.0
        for i in range(3):
            mu = params.mu.data[i, 0]
            tau = params.tau.data[i, 0]
            nu = params.nu.data[i, 0]
            z = (targets[i] - mu) ** 2 / (nu * tau)
            log_t = (math.lgamma((nu + 1) / 2) - math.lgamma(nu / 2)
                     - 0.5 * math.log(nu * math.pi * tau)
                     - (nu + 1) / 2 * math.log1p(z))
            r = (targets[i] - mu) / 0.1010
            robust = math.log(0.5 * r * r + 1.0)
            expected += 0.5755 * (-log_t) + (1.0 - 0.5755) * robust
        expected /= 3.0
        loss = float(smm.composite_loss(params, targets, np.ones(3), cfg).data)
        assert abs(loss - expected) < 1e-9

    def test_masking_excludes_positions(self):
        params, targets = self._setup()
        cfg = smm.LossConfig()
        weights = np.array([1.0, 0.0, 1.0, 0.0, 1.0])
        masked = float(smm.composite_loss(params, targets, weights, cfg).data)
        crazy = targets.copy()
        crazy[1] = 1e6
        masked2 = float(smm.composite_loss(params, crazy, weights, cfg).data)
        assert abs(masked - masked2) < 1e-9

    def test_all_masked_rejected(self):
        params, targets = self._setup()
        with pytest.raises(ValueError, match="masked"):
            smm.composite_loss(params, targets, np.zeros(5), smm.LossConfig())

    def test_gradients_through_all_heads(self):
        head = smm.init_head(Rng(13), 4, 2)
        h = np.random.default_rng(8).normal(size=(6, 4))
        targets = np.random.default_rng(9).normal(size=6)
        cfg = smm.LossConfig()
        for name in ("w_pi", "w_mu", "w_tau", "w_nu", "b_pi", "b_mu", "b_tau", "b_nu"):
            def f(t, _n=name):
                trial = dict(head)
                trial[_n] = t
                params = smm.compute_params(Tensor(h), trial)
                return smm.composite_loss(params, targets, np.ones(6), cfg)

            err = nk.finite_difference_check(f, head[name], eps=1e-5)
            assert err < 1e-4, name


class TestLossConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            smm.LossConfig(lambda_nll=1.5)
        with pytest.raises(ValueError):
            smm.LossConfig(alpha=3.0)
        with pytest.raises(ValueError):
            smm.LossConfig(delta=-1.0)

    def test_negative_infinity_alpha_accepted(self):
        cfg = smm.LossConfig(alpha=float("-inf"))
        assert math.isinf(cfg.alpha)
