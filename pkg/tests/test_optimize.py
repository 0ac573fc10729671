import math
import warnings

import numpy as np
import pytest

from ocran.core import SubsetPair
from ocran.discrete import AuxChannels, DiscreteScenario, build_joint, cmi, identity_aux
from ocran.gaussian import GaussianScenario, QuantizerSetGaussian, rate_constraint_gaussian
from ocran.optimize import (
    OptimizerConfig,
    ScalarField,
    finite_diff_check,
    mc_mutual_information,
    optimize_discrete_aux,
    optimize_gaussian_quantizers,
    sum_rate_field,
)
from ocran.verify import random_gaussian_scenario, random_quantizers
from ocran.sumrate import jd_sum_rate


def scalar_scenario(snr=1.0, fronthaul=1.0):
    return GaussianScenario(
        num_users=1,
        num_relays=1,
        fronthaul=(fronthaul,),
        time_share=(1.0,),
        H=(([[1.0]],),),
        Sigma=([[1.0]],),
        Kin=([[snr]],),
        power=(snr,),
    )


def golden_rate(snr, cap):
    return math.log2(1.0 + snr * (2.0**cap - 1.0) / (2.0**cap + snr))


class TestConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            OptimizerConfig(objective="nope")
        with pytest.raises(ValueError):
            OptimizerConfig(objective="weighted")
        with pytest.raises(ValueError):
            OptimizerConfig(restarts=0)


class TestGaussianOptimizer:
    def test_zero_fronthaul_collapses_to_zero(self):
        sc = scalar_scenario(fronthaul=0.0)
        res = optimize_gaussian_quantizers(sc, OptimizerConfig(restarts=2, seed=1))
        assert res.objective == 0.0
        assert np.allclose(res.quantizers.B[0], 0.0)

    def test_golden_scalar(self):
        sc = scalar_scenario(snr=1.0, fronthaul=1.0)
        res = optimize_gaussian_quantizers(sc, OptimizerConfig(restarts=2, seed=5))
        assert res.objective == pytest.approx(golden_rate(1.0, 1.0), abs=1e-4)
        res.quantizers.validate(sc)

    @pytest.mark.parametrize("method", ["grid", "coordinate_ascent", "projected_gradient"])
    def test_methods_agree_on_golden_case(self, method):
        sc = scalar_scenario(snr=4.0, fronthaul=0.5)
        cfg = OptimizerConfig(method=method, restarts=2, max_iters=200, seed=2)
        res = optimize_gaussian_quantizers(sc, cfg)
        assert res.objective == pytest.approx(golden_rate(4.0, 0.5), abs=1e-4)

    def test_non_convergence_is_flagged_not_raised(self):
        rng = np.random.default_rng(44)
        sc = random_gaussian_scenario(rng, 2, 2)
        res = optimize_gaussian_quantizers(
            sc, OptimizerConfig(restarts=1, max_iters=1, seed=1)
        )
        assert not res.converged
        res.quantizers.validate(sc)

    def test_trace_is_monotone(self):
        rng = np.random.default_rng(3)
        sc = random_gaussian_scenario(rng, 2, 2)
        res = optimize_gaussian_quantizers(sc, OptimizerConfig(restarts=3, seed=3))
        assert all(b >= a - 1e-12 for a, b in zip(res.trace, res.trace[1:]))

    def test_feasibility_after_projection(self):
        rng = np.random.default_rng(4)
        for _ in range(5):
            sc = random_gaussian_scenario(rng, 2, 2)
            res = optimize_gaussian_quantizers(
                sc, OptimizerConfig(restarts=2, max_iters=15, seed=4)
            )
            res.quantizers.validate(sc)

    def test_seed_determinism(self):
        rng = np.random.default_rng(5)
        sc = random_gaussian_scenario(rng, 1, 2)
        cfg = OptimizerConfig(restarts=3, max_iters=20, seed=11)
        a = optimize_gaussian_quantizers(sc, cfg)
        b = optimize_gaussian_quantizers(sc, cfg)
        assert a.trace == b.trace
        for ba, bb in zip(a.quantizers.B, b.quantizers.B):
            np.testing.assert_array_equal(ba, bb)

    def test_threads_do_not_change_result(self):
        rng = np.random.default_rng(6)
        sc = random_gaussian_scenario(rng, 1, 2)
        one = optimize_gaussian_quantizers(
            sc, OptimizerConfig(restarts=3, max_iters=15, seed=7, threads=1)
        )
        many = optimize_gaussian_quantizers(
            sc, OptimizerConfig(restarts=3, max_iters=15, seed=7, threads=3)
        )
        assert one.objective == many.objective
        assert one.trace == many.trace

    def test_weighted_objective_runs(self):
        sc = GaussianScenario(
            num_users=2,
            num_relays=1,
            fronthaul=(1.0,),
            time_share=(1.0,),
            H=(([[1.0]], [[1.0]]),),
            Sigma=([[1.0]],),
            Kin=([[1.0]], [[1.0]]),
            power=(1.0, 1.0),
        )
        cfg = OptimizerConfig(
            objective="weighted", weights=(1.0, 1.0), restarts=2, max_iters=30, seed=8
        )
        res = optimize_gaussian_quantizers(sc, cfg)
        assert res.objective > 0.1
        res.quantizers.validate(sc)

    def test_identity_noise_optimum_commutes_with_signal(self):
        # on a diagonalizable instance the optimal normalized quantizer is
        # expected to share eigenvectors with H Kin H^H; treated as a logged
        # observation rather than a hard requirement
        rng = np.random.default_rng(9)
        h = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        kin = np.eye(2)
        sc = GaussianScenario(
            num_users=1,
            num_relays=1,
            fronthaul=(2.0,),
            time_share=(1.0,),
            H=((h,),),
            Sigma=(np.eye(2),),
            Kin=(kin,),
            power=(2.0,),
        )
        res = optimize_gaussian_quantizers(
            sc, OptimizerConfig(restarts=4, max_iters=300, step_tol=1e-10, seed=10)
        )
        signal = h @ kin @ h.conj().T
        b = res.quantizers.B[0]
        residual = np.max(np.abs(signal @ b - b @ signal))
        if residual > 1e-6:
            warnings.warn(f"commutation residual {residual:.2e} above 1e-6 (observation)")
        res.quantizers.validate(sc)
        assert res.objective > 0.0


class TestDiscreteOptimizer:
    def _bsc_scenario(self, fronthaul, eps=0.1):
        ch = np.array([[1 - eps, eps], [eps, 1 - eps]])
        return DiscreteScenario(
            num_users=1,
            num_relays=1,
            fronthaul=(fronthaul,),
            time_share=(1.0,),
            px=(np.array([[0.5, 0.5]]),),
            channel=ch,
        )

    def test_big_fronthaul_reaches_channel_information(self):
        sc = self._bsc_scenario(10.0)
        j = build_joint(sc, identity_aux(sc))
        target = cmi(j, {"X1"}, {"Y1"}, {"Q"})
        res = optimize_discrete_aux(sc, (2,), OptimizerConfig(restarts=2, seed=1))
        assert res.objective == pytest.approx(target, abs=1e-3)

    def test_zero_fronthaul(self):
        sc = self._bsc_scenario(0.0)
        res = optimize_discrete_aux(
            sc, (2,), OptimizerConfig(restarts=2, max_iters=10, seed=2)
        )
        assert res.objective == 0.0

    def test_beats_handcrafted_candidate(self):
        sc = self._bsc_scenario(0.6)
        noisy_copy = np.array([[[0.9, 0.1], [0.1, 0.9]]])
        candidate = jd_sum_rate(sc, AuxChannels(tables=(noisy_copy,)))
        res = optimize_discrete_aux(sc, (2,), OptimizerConfig(restarts=3, seed=3))
        assert res.objective >= candidate - 1e-9

    def test_data_processing_ceiling(self):
        rng = np.random.default_rng(4)
        from ocran.verify import random_correlated_scenario

        for _ in range(5):
            sc = random_correlated_scenario(rng, 1, 2)
            res = optimize_discrete_aux(
                sc, (2, 2), OptimizerConfig(restarts=2, max_iters=8, seed=5)
            )
            j = build_joint(sc, identity_aux(sc))
            ceiling = cmi(j, {"X1"}, {"Y1", "Y2"}, {"Q"})
            assert res.objective <= ceiling + 1e-9


class TestFiniteDiffCheck:
    def test_quadratic_is_exact(self):
        a = np.array([[2.0, 0.3], [0.3, 1.0]])

        def value(x):
            return float(-0.5 * x @ a @ x + x.sum())

        def gradient(x):
            return -(a @ x) + 1.0

        chk = finite_diff_check(ScalarField(value=value, gradient=gradient), np.array([0.4, -0.2]))
        assert not chk.inconclusive
        assert chk.max_rel_error <= 1e-8

    def test_fronthaul_mi_closed_form(self):
        field = ScalarField(
            value=lambda x: float(-np.log2(1.0 - x[0])),
            gradient=lambda x: np.array([1.0 / ((1.0 - x[0]) * math.log(2.0))]),
        )
        chk = finite_diff_check(field, np.array([0.5]))
        assert chk.max_rel_error <= 1e-5

    def test_sum_rate_field_away_from_tie(self):
        sc = scalar_scenario(snr=1.0, fronthaul=1.0)
        chk = finite_diff_check(sum_rate_field(sc), np.array([0.1]))
        assert not chk.inconclusive
        assert chk.max_rel_error <= 1e-5

    def test_near_tie_is_inconclusive(self):
        sc = scalar_scenario(snr=1.0, fronthaul=1.0)
        b_star = (2.0 - 1.0) / (2.0 + 1.0)  # equalizer of the two branches
        chk = finite_diff_check(sum_rate_field(sc), np.array([b_star]))
        assert chk.inconclusive
        assert math.isnan(chk.max_rel_error)


class TestMonteCarlo:
    def test_scalar_closed_form(self):
        sc = scalar_scenario(snr=1.0, fronthaul=1.0)
        q = QuantizerSetGaussian(B=([[0.5]],))
        pair = SubsetPair(users=(1,), relays=())
        est = mc_mutual_information(sc, q, pair, samples=200_000, seed=0)
        analytic = math.log2(1.5)
        assert abs(est.estimate - analytic) <= 3.0 * est.std_error
        assert est.std_error < 0.01

    def test_mimo_cross_module(self):
        rng = np.random.default_rng(1)
        sc = random_gaussian_scenario(rng, 2, 2)
        q = random_quantizers(rng, sc)
        pair = SubsetPair(users=(1, 2), relays=(1,))
        analytic = rate_constraint_gaussian(sc, q, pair) - (
            sc.fronthaul[0]
            - __import__("ocran.gaussian", fromlist=["fronthaul_mi"]).fronthaul_mi(
                sc.Sigma[0], q.B[0]
            )
        )
        est = mc_mutual_information(sc, q, pair, samples=400_000, seed=2)
        assert abs(est.estimate - analytic) <= 3.0 * est.std_error

    def test_std_error_scaling(self):
        sc = scalar_scenario()
        q = QuantizerSetGaussian(B=([[0.5]],))
        pair = SubsetPair(users=(1,), relays=())
        small = mc_mutual_information(sc, q, pair, samples=2_000, seed=3)
        large = mc_mutual_information(sc, q, pair, samples=200_000, seed=3)
        ratio = small.std_error / large.std_error
        assert 10.0 / 2.0 <= ratio <= 10.0 * 2.0

    def test_vanishing_quantizer_estimates_to_zero(self):
        sc = scalar_scenario()
        q = QuantizerSetGaussian(B=([[1e-9]],))
        pair = SubsetPair(users=(1,), relays=())
        est = mc_mutual_information(sc, q, pair, samples=50_000, seed=6)
        assert abs(est.estimate) <= max(3.0 * est.std_error, 1e-6)

    def test_empty_complement_is_zero(self):
        sc = scalar_scenario()
        q = QuantizerSetGaussian(B=([[0.5]],))
        est = mc_mutual_information(
            sc, q, SubsetPair(users=(1,), relays=(1,)), samples=100, seed=4
        )
        assert est.estimate == 0.0 and est.std_error == 0.0

    def test_boundary_quantizer_rejected(self):
        sc = scalar_scenario()
        q = QuantizerSetGaussian(B=([[1.0]],))
        with pytest.raises(ValueError, match="boundary"):
            mc_mutual_information(sc, q, SubsetPair(users=(1,), relays=()), 100, 0)

    def test_seed_determinism(self):
        sc = scalar_scenario()
        q = QuantizerSetGaussian(B=([[0.4]],))
        pair = SubsetPair(users=(1,), relays=())
        a = mc_mutual_information(sc, q, pair, samples=10_000, seed=9)
        b = mc_mutual_information(sc, q, pair, samples=10_000, seed=9)
        assert a == b
