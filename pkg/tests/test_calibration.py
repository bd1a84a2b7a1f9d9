import math

import numpy as np
import pytest

from svcal.calibration import (
    _BOXES,
    CalibrationTarget,
    FixSet,
    OptimizerConfig,
    TargetPoint,
    TenorRules,
    calibrate,
    calibrate_penalized,
    calibrate_tenor,
    calibrate_varswap,
    objective,
)
from svcal.errors import DomainError
from svcal.fx_quotes import Conventions, TenorQuote
from svcal.models import HestonParams, MarketSlice, expected_mean_variance
from svcal.pricing import model_smile

PARAM_NAMES = ("v0", "theta", "kappa", "sigma", "rho")


def make_target(p, tenors=(0.25, 1.0, 3.0), z_grid=(-1.2, -0.5, 0.0, 0.5, 1.2),
                vol_bumps=None, space="vol", weight=1.0):
    """Synthetic target from a known parameter set (noise optional)."""
    from svcal.pricing import OptionSpec, bs_price

    points, slices = [], {}
    i = 0
    for T in tenors:
        sl = MarketSlice(1.0, 1.0, T)
        slices[T] = sl
        vol_atm = math.sqrt(p.v0)
        ks = [math.exp(z * vol_atm * math.sqrt(T)) for z in z_grid]
        for k, v in model_smile(p, sl, ks):
            dv = vol_bumps[i] if vol_bumps is not None else 0.0
            value = v + dv
            if space == "price":
                kind = "call" if k >= sl.forward else "put"
                value = bs_price(sl, OptionSpec(k, T, kind), value)
            points.append(TargetPoint(T, k, value, weight))
            i += 1
    return CalibrationTarget(tuple(points), space, slices)


def box_distance(a, b):
    return math.sqrt(
        sum(((getattr(a, n) - getattr(b, n)) / (_BOXES[n][1] - _BOXES[n][0])) ** 2 for n in PARAM_NAMES)
    )


TRUTH = HestonParams(0.04, 0.05, 1.5, 0.6, -0.55)


class TestBoxTransforms:
    def test_bijective_round_trip(self, rng):
        from svcal.calibration import _box_arrays, _from_box, _to_box

        lo, hi = _box_arrays(PARAM_NAMES)
        for _ in range(200):
            x = rng.normal(0.0, 4.0, size=len(PARAM_NAMES))
            p = _to_box(x, lo, hi)
            assert np.all(p > lo) and np.all(p < hi)
            np.testing.assert_allclose(_from_box(p, lo, hi), x, rtol=1e-9, atol=1e-9)

    def test_intermediate_params_always_admissible(self, rng):
        from svcal.calibration import _Problem, MODELS, DEFAULT_QUAD

        target = make_target(TRUTH, tenors=(1.0,))
        prob = _Problem(target, MODELS["heston"], {}, {}, DEFAULT_QUAD)
        for _ in range(100):
            x = rng.normal(0.0, 10.0, size=5)
            prob.build_params(x)  # raises DomainError if any bound is violated


class TestObjective:
    def test_zero_at_generating_params(self):
        target = make_target(TRUTH)
        # map the exact generating parameters through the box transform
        from svcal.calibration import _Problem, MODELS, DEFAULT_QUAD
        prob = _Problem(target, MODELS["heston"], {}, {}, DEFAULT_QUAD)
        x = prob.x_from_params(TRUTH.as_dict())
        res = objective(target, "heston", x)
        assert np.max(np.abs(res)) < 1e-10

    def test_weights_scale_residuals(self):
        t1 = make_target(TRUTH, tenors=(1.0,), weight=1.0)
        t2 = make_target(TRUTH, tenors=(1.0,), weight=2.0)
        x = np.zeros(5)
        r1 = objective(t1, "heston", x)
        r2 = objective(t2, "heston", x)
        np.testing.assert_allclose(r2, 2.0 * r1, rtol=1e-12)

    def test_vol_and_price_residuals_linked_by_vega(self):
        # 1bp vol perturbation: price residual ~= vega * vol residual within 1%
        p_hi = HestonParams(TRUTH.v0 * 1.001, TRUTH.theta, TRUTH.kappa, TRUTH.sigma, TRUTH.rho)
        tv = make_target(TRUTH, tenors=(1.0,), z_grid=(-0.5, 0.0, 0.5))
        tp = make_target(TRUTH, tenors=(1.0,), z_grid=(-0.5, 0.0, 0.5), space="price")
        from svcal.calibration import _Problem, MODELS, DEFAULT_QUAD
        prob_v = _Problem(tv, MODELS["heston"], {}, {}, DEFAULT_QUAD)
        x_hi = prob_v.x_from_params(p_hi.as_dict())
        rv = objective(tv, "heston", x_hi)
        rp = objective(tp, "heston", x_hi)
        sl = tv.slices[1.0]
        from svcal.pricing import bs_price, OptionSpec
        for i, pt in enumerate(tv.points):
            kind = "call" if pt.strike >= sl.forward else "put"
            opt = OptionSpec(pt.strike, 1.0, kind)
            h = 1e-4
            vega = (bs_price(sl, opt, pt.value + h) - bs_price(sl, opt, pt.value - h)) / (2 * h)
            assert rp[i] == pytest.approx(vega * rv[i], rel=0.01)

    def test_failed_pricing_marks_residuals(self):
        target = make_target(TRUTH, tenors=(1.0,))
        from svcal.pricing import QuadratureConfig
        res = objective(target, "heston", np.zeros(5),
                        quad=QuadratureConfig(tolerance=1e-16, max_evals=30))
        assert np.all(res == 1e6)

    def test_wrong_vector_length(self):
        target = make_target(TRUTH, tenors=(1.0,))
        with pytest.raises(DomainError):
            objective(target, "heston", np.zeros(3))


class TestCalibrate:
    def test_synthetic_round_trip(self, rng):
        for _ in range(2):
            truth = HestonParams(
                v0=float(rng.uniform(0.01, 0.09)),
                theta=float(rng.uniform(0.01, 0.09)),
                kappa=float(rng.uniform(0.5, 4.0)),
                sigma=float(rng.uniform(0.2, 0.9)),
                rho=float(rng.uniform(-0.8, -0.1)),
            )
            target = make_target(truth)
            init = HestonParams(truth.v0 * 1.6, truth.theta * 0.6, truth.kappa * 1.8,
                                truth.sigma * 0.5, min(truth.rho + 0.3, 0.9))
            res = calibrate(target, "heston", init=init)
            assert res.converged
            for n in PARAM_NAMES:
                assert getattr(res.params, n) == pytest.approx(getattr(truth, n), abs=1e-4)

    def test_fixed_kappa_recovery(self):
        truth = HestonParams(0.04, 0.05, 2.0, 0.6, -0.55)
        target = make_target(truth)
        res = calibrate(target, "heston", fix=FixSet(fixed={"kappa": 2.0}))
        assert res.params.kappa == 2.0
        for n in ("v0", "theta", "sigma", "rho"):
            assert getattr(res.params, n) == pytest.approx(getattr(truth, n), abs=1e-4)

    def test_v0_from_atm_vol_pins_exactly(self):
        target = make_target(TRUTH)
        res = calibrate(target, "heston", fix=FixSet(fixed={"kappa": 2.0}, v0_from_atm_vol=0.2))
        assert res.params.v0 == 0.2**2

    def test_single_point_single_free_param(self):
        target = make_target(TRUTH, tenors=(1.0,), z_grid=(0.0,))
        fix = FixSet(fixed={"theta": TRUTH.theta, "kappa": TRUTH.kappa,
                            "sigma": TRUTH.sigma, "rho": TRUTH.rho})
        res = calibrate(target, "heston", fix=fix)
        assert res.rmse < 1e-10
        assert res.params.v0 == pytest.approx(TRUTH.v0, abs=1e-8)

    def test_more_free_params_than_points_rejected(self):
        target = make_target(TRUTH, tenors=(1.0,), z_grid=(0.0, 0.5))
        with pytest.raises(DomainError):
            calibrate(target, "heston")

    def test_deterministic(self):
        target = make_target(TRUTH)
        a = calibrate(target, "heston")
        b = calibrate(target, "heston")
        assert a.params == b.params
        assert a.residuals == b.residuals

    def test_weight_rescaling_leaves_argmin(self):
        t1 = make_target(TRUTH, tenors=(1.0,), z_grid=(-1.0, -0.4, 0.0, 0.4, 1.0), weight=1.0)
        t2 = make_target(TRUTH, tenors=(1.0,), z_grid=(-1.0, -0.4, 0.0, 0.4, 1.0), weight=3.0)
        a = calibrate(t1, "heston")
        b = calibrate(t2, "heston")
        for n in PARAM_NAMES:
            assert getattr(a.params, n) == pytest.approx(getattr(b.params, n), abs=1e-8)

    def test_objective_not_increased_from_init(self):
        bumps = 0.002 * np.sin(np.arange(15))
        target = make_target(TRUTH, vol_bumps=bumps)
        init = HestonParams(0.03, 0.03, 1.0, 0.4, -0.3)
        res = calibrate(target, "heston", init=init)
        from svcal.calibration import _Problem, MODELS, DEFAULT_QUAD
        prob = _Problem(target, MODELS["heston"], {}, {}, DEFAULT_QUAD)
        sse_init = float(np.sum(prob.residuals(prob.x_from_params(init.as_dict())) ** 2))
        assert res.sse <= sse_init + 1e-15

    def test_unknown_model_kind(self):
        target = make_target(TRUTH, tenors=(1.0,))
        with pytest.raises(DomainError):
            calibrate(target, "sabr")


class TestCalibratePenalized:
    def _day2(self, rng, scale=0.05, noise=1e-4):
        pert = HestonParams(
            TRUTH.v0 * (1 + scale * rng.standard_normal()),
            TRUTH.theta * (1 + scale * rng.standard_normal()),
            TRUTH.kappa * (1 + scale * rng.standard_normal()),
            TRUTH.sigma * (1 + scale * rng.standard_normal()),
            float(np.clip(TRUTH.rho + 0.6 * scale * rng.standard_normal(), -0.99, 0.99)),
        )
        clean = make_target(pert, tenors=(0.5, 2.0), z_grid=(-1.0, 0.0, 1.0))
        bumps = noise * rng.standard_normal(len(clean.points))
        return make_target(pert, tenors=(0.5, 2.0), z_grid=(-1.0, 0.0, 1.0), vol_bumps=bumps)

    def test_prev_at_optimum_degenerates_to_unpenalized(self):
        day1 = make_target(TRUTH, tenors=(0.5, 2.0), z_grid=(-1.0, 0.0, 1.0))
        prev = calibrate(day1, "heston").params
        res = calibrate_penalized(day1, prev, "heston")
        assert res.penalty_weight == 0.0
        for n in PARAM_NAMES:
            assert getattr(res.params, n) == pytest.approx(getattr(prev, n), abs=1e-6)

    def test_doubling_rule_and_proximity(self, rng):
        day1 = make_target(TRUTH, tenors=(0.5, 2.0), z_grid=(-1.0, 0.0, 1.0))
        prev = calibrate(day1, "heston").params
        day2 = self._day2(rng)
        unpen = calibrate(day2, "heston", init=prev)
        pen = calibrate_penalized(day2, prev, "heston")
        assert pen.penalty_weight > 0
        total = pen.sse + pen.penalty_weight * box_distance(pen.params, prev) ** 2
        assert 1.9 * unpen.sse <= total <= 2.1 * unpen.sse
        assert box_distance(pen.params, prev) < box_distance(unpen.params, prev)

    def test_pure_vol_noise_day(self, rng):
        # plain iid noise day: either the band is reached or the doubling
        # target is provably unreachable and the degenerate flag says so
        day1 = make_target(TRUTH, tenors=(0.5, 2.0), z_grid=(-1.0, 0.0, 1.0))
        prev = calibrate(day1, "heston").params
        bumps = 1e-3 * rng.standard_normal(6)
        day2 = make_target(TRUTH, tenors=(0.5, 2.0), z_grid=(-1.0, 0.0, 1.0), vol_bumps=bumps)
        pen = calibrate_penalized(day2, prev, "heston")
        if "penalty_degenerate" in pen.flags:
            assert pen.penalty_weight == 0.0
        else:
            unpen = calibrate(day2, "heston", init=prev)
            total = pen.sse + pen.penalty_weight * box_distance(pen.params, prev) ** 2
            assert 1.85 * unpen.sse <= total <= 2.15 * unpen.sse


EURUSD_3M = TenorQuote("3M", 1.5 / 6.02, 0.1270, 0.0028, -0.0055)


class TestCalibrateTenor:
    def test_eurusd_3m_reference_fit(self):
        sl = MarketSlice(1.0, 1.0, EURUSD_3M.expiry)
        res = calibrate_tenor(EURUSD_3M, sl)
        p = res.params
        assert res.converged
        assert p.kappa == pytest.approx(6.02, abs=1e-6)
        assert p.theta == p.v0
        assert p.v0 == pytest.approx(0.018, abs=0.003)
        assert p.rho == pytest.approx(-0.13, abs=0.05)
        assert p.sigma == pytest.approx(0.49, abs=0.05)
        assert res.feller == pytest.approx(0.90, abs=0.1)
        # reprices the three resolved quotes essentially exactly
        assert res.rmse < 1e-8

    def test_flat_quote_symmetric_smile(self):
        q = TenorQuote("1Y", 1.0, 0.11, 0.0, 0.0)
        sl = MarketSlice(1.0, 1.0, 1.0)
        res = calibrate_tenor(q, sl)
        assert abs(res.params.rho) < 0.02
        assert res.params.v0 == pytest.approx(0.11**2, rel=0.02)
        assert max(abs(r) for r in res.residuals) < 1e-4  # within 0.01 vol pts

    def test_alternative_kappa_rule_constant(self):
        sl = MarketSlice(1.0, 1.0, EURUSD_3M.expiry)
        res = calibrate_tenor(EURUSD_3M, sl, TenorRules(kappa_rule_constant=2.75))
        assert res.params.kappa == pytest.approx(2.75 / EURUSD_3M.expiry, rel=1e-12)
        assert res.rmse < 1e-6  # still reprices the three quotes

    def test_theta_from_atm_variance_rule(self):
        sl = MarketSlice(1.0, 1.0, EURUSD_3M.expiry)
        res = calibrate_tenor(EURUSD_3M, sl, TenorRules(theta_rule="atm_variance"))
        assert res.params.theta == pytest.approx(0.1270**2, rel=1e-12)
        assert res.rmse < 1e-6


class TestCalibrateVarswap:
    def test_flat_curve_kappa_unidentified(self):
        fit = calibrate_varswap([(0.5, 0.04), (1.0, 0.04), (2.0, 0.04)])
        assert fit.theta == fit.v0 == pytest.approx(0.04)
        assert not fit.kappa_identified
        assert fit.kappa == 2.0
        assert fit.converged

    def test_synthetic_recovery(self):
        truth = HestonParams(0.04, 0.09, 1.0, 0.0, 0.0)
        curve = [(T, expected_mean_variance(truth, T)) for T in (0.5, 1.0, 2.0, 5.0)]
        fit = calibrate_varswap(curve)
        assert fit.v0 == pytest.approx(0.04, abs=1e-6)
        assert fit.theta == pytest.approx(0.09, abs=1e-6)
        assert fit.kappa == pytest.approx(1.0, abs=1e-6)

    def test_non_representable_hump_flags_large_rmse(self):
        fit = calibrate_varswap([(0.5, 0.04), (1.0, 0.09), (2.0, 0.05)])
        assert fit.converged
        assert fit.rmse > 1e-3  # curve shape cannot be matched

    def test_arity_and_mode_validation(self):
        with pytest.raises(DomainError, match="at least three"):
            calibrate_varswap([(0.5, 0.04), (1.0, 0.05)])
        with pytest.raises(DomainError):
            calibrate_varswap([(0.5, 0.04), (1.0, 0.05), (2.0, 0.06)], mode="both")
        with pytest.raises(DomainError):
            calibrate_varswap([(0.5, 0.04), (0.5, 0.05), (2.0, 0.06)])

    def test_fix_and_init_adapters(self):
        truth = HestonParams(0.04, 0.09, 1.0, 0.0, 0.0)
        curve = [(T, expected_mean_variance(truth, T)) for T in (0.5, 1.0, 2.0, 5.0)]
        fit = calibrate_varswap(curve, mode="fix")
        fs = fit.as_fixset()
        assert set(fs.fixed) == {"kappa", "theta", "v0"}
        init = calibrate_varswap(curve, mode="initial-guess").as_init()
        assert init.v0 == pytest.approx(0.04, abs=1e-6)
        assert init.sigma == 0.5
