import json
import math

import numpy as np
import pytest

from abforecast.calibrate import (
    DEFAULT_BOUNDS,
    FitConfig,
    FitError,
    FittedParams,
    curve_objective,
    curve_targets,
    differential_evolution,
    fit_curve,
    fit_mml,
)
from abforecast.dataio import ActivityPanel, FirstTriggerSeries, SufficientStats, stats_from_panel
from abforecast.forecast import expected_unseen
from abforecast.marglik import log_marginal
from abforecast.posterior import HyperParams, posterior_from_counts
from abforecast.simulate import replicate_seeds, simulate_nb

NB_TRUTH = HyperParams(0.5, 30.0, 2.0, 5.0)


class TestDifferentialEvolution:
    def test_sphere(self):
        res = differential_evolution(lambda x: float(np.sum(x ** 2)), [(-5, 5)] * 4, seed=3)
        assert res.fun < 1e-4
        assert res.generations <= 300

    def test_abs(self):
        res = differential_evolution(lambda x: abs(x[0] - 2.0), [(0, 5)], seed=0)
        assert abs(res.x[0] - 2.0) < 1e-3

    def test_deterministic(self):
        def rosen(x):
            return float((1 - x[0]) ** 2 + 100 * (x[1] - x[0] ** 2) ** 2)

        a = differential_evolution(rosen, [(-2, 2), (-1, 3)], seed=9, max_gens=50)
        b = differential_evolution(rosen, [(-2, 2), (-1, 3)], seed=9, max_gens=50)
        assert a.x.tobytes() == b.x.tobytes()
        assert a.fun == b.fun and a.evaluations == b.evaluations

    def test_evaluation_order_irrelevant(self):
        # a map that evaluates in reverse order must give the same result
        def reversed_map(f, xs):
            return list(reversed([f(x) for x in reversed(list(xs))]))

        f = lambda x: float(np.sum((x - 0.3) ** 2))  # noqa: E731
        a = differential_evolution(f, [(-1, 1)] * 3, seed=4, max_gens=40)
        b = differential_evolution(f, [(-1, 1)] * 3, seed=4, max_gens=40, map_fn=reversed_map)
        assert a.x.tobytes() == b.x.tobytes()

    def test_mostly_nonfinite_start(self):
        with pytest.raises(FitError):
            differential_evolution(lambda x: math.nan if x[0] > -0.5 else x[0], [(-1, 1)], seed=0)

    def test_some_nonfinite_tolerated(self):
        res = differential_evolution(lambda x: math.inf if x[0] > 0.8 else (x[0] - 0.5) ** 2,
                                     [(-1, 1)], seed=0)
        assert abs(res.x[0] - 0.5) < 1e-3

    def test_bad_bounds(self):
        with pytest.raises(ValueError):
            differential_evolution(lambda x: 0.0, [(1, 1)])


class TestFitConfig:
    def test_defaults(self):
        cfg = FitConfig()
        assert cfg.bounds == DEFAULT_BOUNDS
        assert (cfg.de_population, cfg.de_max_gens, cfg.de_tol) == (32, 300, 1e-8)

    @pytest.mark.parametrize("bounds", [{"alpha": (0.0, 0.5)}, {"c": (-1, 2)}, {"q": (1, 2)},
                                        {"beta": (3, 2)}])
    def test_invalid_bounds(self, bounds):
        with pytest.raises(ValueError):
            FitConfig(bounds=bounds)

    def test_method(self):
        with pytest.raises(ValueError):
            FitConfig(method="other")


def small_nb_stats(seed=0, D0=30):
    return stats_from_panel(simulate_nb(NB_TRUTH, D0, seed=seed), "NB")


class TestFitMML:
    def test_beats_random_points(self):
        st = small_nb_stats()
        fitted = fit_mml(st, FitConfig(seed=1))
        rng = np.random.default_rng(2)
        b = DEFAULT_BOUNDS
        for _ in range(100):
            h = HyperParams(
                rng.uniform(*b["alpha"]),
                math.exp(rng.uniform(*np.log(b["c"]))),
                math.exp(rng.uniform(*np.log(b["beta"]))),
                math.exp(rng.uniform(*np.log(b["r"]))),
            )
            assert fitted.objective_value >= log_marginal(st, h).log_value
        assert fitted.objective_value == pytest.approx(log_marginal(st, fitted.hyper).log_value)

    def test_empty_data(self):
        with pytest.raises(FitError):
            fit_mml(SufficientStats.from_histogram("BE", 4, {}))

    def test_be_keeps_r_fixed(self):
        st = SufficientStats.from_histogram("BE", 5, {1: 30, 2: 10, 4: 3})
        fitted = fit_mml(st, FitConfig(seed=0, de_max_gens=60))
        assert fitted.hyper.r == 1.0
        lo, hi = DEFAULT_BOUNDS["alpha"]
        assert lo <= fitted.hyper.alpha <= hi

    def test_permutation_invariant(self):
        panel = simulate_nb(NB_TRUTH, 10, seed=5)
        perm = np.random.default_rng(0).permutation(panel.N)
        shuffled = ActivityPanel(panel.D0, tuple(panel.user_ids[i] for i in perm),
                                 panel.counts[perm])
        cfg = FitConfig(seed=3, de_max_gens=40)
        a = fit_mml(stats_from_panel(panel, "NB"), cfg)
        b = fit_mml(stats_from_panel(shuffled, "NB"), cfg)
        assert a.to_json() == b.to_json()

    def test_profile_locally_convex_at_truth(self):
        st = stats_from_panel(simulate_nb(NB_TRUTH, 365, seed=11), "NB")

        def nll(**kw):
            return -log_marginal(st, HyperParams(**{**NB_TRUTH.as_dict(), **kw})).log_value

        t = NB_TRUTH
        steps = {"alpha": [0.01, 0.02], "c": [0.1, 0.2], "beta": [0.1, 0.2], "r": [0.05, 0.1]}
        for name, hs in steps.items():
            for h in hs:
                centre = getattr(t, name)
                if name == "alpha":
                    lo, hi = centre - h, centre + h
                else:  # relative steps for scale parameters
                    lo, hi = centre * math.exp(-h), centre * math.exp(h)
                second = nll(**{name: lo}) - 2 * nll() + nll(**{name: hi})
                assert second > 0, name

    def test_recovers_alpha(self):
        hits = 0
        for seq in replicate_seeds(2024, 20):
            st = stats_from_panel(simulate_nb(NB_TRUTH, 100, seed=seq), "NB")
            fitted = fit_mml(st, FitConfig(seed=int(seq.generate_state(1)[0])))
            hits += abs(fitted.hyper.alpha - 0.5) <= 0.15
        assert hits >= 16


def exact_series(hyper, D0, n1, model="TG"):
    """First-trigger series whose cumulative path is the rounded expected curve."""
    post = posterior_from_counts(model, hyper, 1, n1)
    cum = np.rint(expected_unseen(post, np.arange(0, D0))).astype(int)
    return FirstTriggerSeries(D0, np.concatenate([[n1], np.diff(cum)]))


class TestFitCurve:
    def test_residual_count(self):
        series = FirstTriggerSeries(3, [5, 2, 1])
        n_d0, target = curve_targets(series, 1)
        assert n_d0 == 5
        assert target.tolist() == [2, 3]

    def test_self_consistency(self):
        truth = HyperParams(0.5, 100.0, 1.0)
        series = exact_series(truth, 30, 40)
        fitted = fit_curve(series, "TG", FitConfig(method="CURVE", seed=0))
        at_truth = curve_objective(series, "TG", truth)
        assert fitted.objective_value <= at_truth + 1e-6
        assert fitted.objective_value == pytest.approx(
            curve_objective(series, "TG", fitted.hyper), abs=1e-9)

    def test_zero_follow_up(self):
        series = FirstTriggerSeries(6, [50, 0, 0, 0, 0, 0])
        fitted = fit_curve(series, "BE", FitConfig(method="CURVE", seed=0))
        post = posterior_from_counts("BE", fitted.hyper, 1, 50)
        assert expected_unseen(post, 5) < 0.5

    def test_nb_fits_r(self):
        truth = HyperParams(0.4, 50.0, 1.0, 3.0)
        series = exact_series(truth, 20, 60, model="NB")
        fitted = fit_curve(series, "NB", FitConfig(method="CURVE", seed=2))
        assert fitted.model == "NB"
        assert fitted.objective_value <= curve_objective(series, "NB", truth) + 1e-6

    def test_errors(self):
        with pytest.raises(FitError):
            fit_curve(FirstTriggerSeries(4, [0, 0, 0, 0]), "TG")
        with pytest.raises(FitError):
            fit_curve(FirstTriggerSeries(2, [3, 1]), "TG")


class TestFittedParams:
    def test_json(self):
        fp = FittedParams("NB", NB_TRUTH, -12.5, "MML", 100, True, seed=4)
        doc = json.loads(fp.to_json())
        assert set(doc) == {"model", "alpha", "c", "beta", "r", "objective", "method", "seed"}
        back = FittedParams.from_json(fp.to_json())
        assert back.hyper == NB_TRUTH
        assert back.seed == 4

    def test_fit_is_deterministic(self):
        st = small_nb_stats(seed=3, D0=10)
        cfg = FitConfig(seed=8, de_max_gens=50)
        assert fit_mml(st, cfg).to_json() == fit_mml(st, cfg).to_json()
