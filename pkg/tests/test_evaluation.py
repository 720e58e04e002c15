import unittest

import numpy as np

from completeness import core, evaluation
from completeness.core import SQUARED_ERROR, Dataset
from completeness.evaluation import (
    CvResult,
    DegenerateBenchmarkError,
    FoldError,
    PlanError,
    SubsampleTooSmallError,
    completeness,
    cross_validate,
    make_folds,
    percent,
)
from completeness.fitting import FitConfig
from completeness.lookup import spec_for


def keyed_dataset(n=60, keys=4, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.integers(0, keys, size=n).astype(float)
    y = x + rng.normal(0, 1, size=n)
    return Dataset(
        features=x.reshape(-1, 1),
        outcomes=y,
        problem_kind="custom",
        outcome_kind="real",
        feature_kinds=(core.REAL,),
    )


def result(mean, se=0.0, name="m"):
    return CvResult(name, (mean, mean), mean, se)


class TestFolds(unittest.TestCase):
    def test_sizes_differ_by_at_most_one(self):
        plan = make_folds(23, K=5, seed=1)
        self.assertEqual(sum(plan.fold_sizes), 23)
        self.assertLessEqual(max(plan.fold_sizes) - min(plan.fold_sizes), 1)

    def test_every_index_tested_once(self):
        plan = make_folds(17, K=4, seed=3)
        tested = np.concatenate([plan.test_indices(f) for f in range(plan.K)])
        self.assertEqual(sorted(tested.tolist()), list(range(17)))
        for fold in range(plan.K):
            self.assertEqual(
                len(plan.test_indices(fold)) + len(plan.train_indices(fold)), 17
            )

    def test_seeded(self):
        a = make_folds(50, K=10, seed=9)
        b = make_folds(50, K=10, seed=9)
        np.testing.assert_array_equal(a.assignment, b.assignment)

    def test_instances_spread(self):
        instances = ["g1"] * 10 + ["g2"] * 10
        plan = make_folds(20, K=5, seed=2, instances=instances)
        for fold in range(5):
            members = [instances[i] for i in plan.test_indices(fold)]
            self.assertEqual(members.count("g1"), 2)
            self.assertEqual(members.count("g2"), 2)

    def test_bad_plans(self):
        self.assertRaises(PlanError, make_folds, 5, 10)
        self.assertRaises(PlanError, make_folds, 5, 1)
        self.assertRaises(PlanError, make_folds, 20, 10, -1)
        self.assertRaises(PlanError, make_folds, 20, 10, 2 ** 64)


class TestStdError(unittest.TestCase):
    def test_equal_folds(self):
        self.assertEqual(evaluation.std_error([0.3] * 10), 0.0)

    def test_population_variance(self):
        self.assertAlmostEqual(evaluation.std_error([1, 2, 3, 4]), np.sqrt(1.25 / 4))

    def test_observation_weighting(self):
        cv = CvResult.from_fold_errors(
            "m", [1.0, 4.0], fold_sizes=[3, 1], weighting=evaluation.OBSERVATION
        )
        self.assertEqual(cv.mean_error, 1.75)
        self.assertRaises(
            ValueError, CvResult.from_fold_errors, "m", [1.0, 2.0], weighting="median"
        )


class TestCompleteness(unittest.TestCase):
    published = [
        ((103.81, 99.67, 65.58), 11),
        ((103.81, 67.38, 65.58), 95),
        ((0.66, 0.49, 0.41), 68),
        ((0.66, 0.28, 0.27), 97),
        ((0.25, 0.2494, 0.2441), 10),
        ((0.25, 0.2492, 0.2441), 14),
        ((0.5, 0.45, 0.23), 19),
        ((0.5, 0.475, 0.23), 9),
        ((104.17, 86.68, 55.45), 36),
    ]

    def test_published_percentages(self):
        for (naive, model, lookup), expected in self.published:
            self.assertEqual(percent(completeness(naive, model, lookup)), expected)

    def test_rounded_inputs(self):
        # inputs rounded to two decimals land one or two points off the
        # percentages computed from unrounded errors
        self.assertEqual(percent(completeness(104.17, 57.14, 55.45)), 97)
        self.assertEqual(percent(completeness(0.66, 0.44, 0.34)), 69)

    def test_accepts_cv_results(self):
        self.assertAlmostEqual(
            completeness(result(1.0), result(0.5), result(0.0)), 0.5
        )

    def test_degenerate(self):
        self.assertRaises(DegenerateBenchmarkError, completeness, 0.5, 0.4, 0.5)
        self.assertRaises(DegenerateBenchmarkError, completeness, 0.4, 0.4, 0.5)

    def test_unclamped(self):
        value = completeness(1.0, 1.5, 0.5)
        self.assertEqual(value, -1.0)
        self.assertEqual(evaluation.completeness_flags(value), ["worse_than_naive"])
        self.assertEqual(
            evaluation.completeness_flags(completeness(1.0, 0.4, 0.5)),
            ["better_than_lookup"],
        )

    def test_percent_rounds_halves_away_from_zero(self):
        self.assertEqual(percent(0.125), 13)
        self.assertEqual(percent(-0.125), -13)
        self.assertEqual(percent(0.0), 0)

    def test_decompose(self):
        parts = evaluation.decompose(result(65.58, se=3.0))
        self.assertEqual(parts.sampling_error, 9.0)
        self.assertAlmostEqual(parts.irreducible_estimate, 56.58)
        self.assertEqual(parts.expected_error, 65.58)

    def test_build_report(self):
        report = evaluation.build_report(
            result(1.0, name="naive"),
            [result(0.5, name="good"), result(1.2, name="bad")],
            result(0.0, name="lookup"),
        )
        self.assertAlmostEqual(report.completeness["good"], 0.5)
        self.assertEqual(report.flags, {"bad": ["worse_than_naive"]})
        self.assertIn("decomposition", report.to_dict())


class TestCrossValidate(unittest.TestCase):
    def test_constant_rule(self):
        data = Dataset(
            features=np.arange(20, dtype=float).reshape(-1, 1),
            outcomes=[0, 1] * 10,
            problem_kind="custom",
            outcome_kind="real",
            feature_kinds=(core.REAL,),
        )
        cv = cross_validate(core.constant_rule(0.5), data, SQUARED_ERROR, make_folds(20, 4))
        self.assertEqual(cv.per_fold_errors, (0.25,) * 4)
        self.assertEqual(cv.mean_error, 0.25)
        self.assertEqual(cv.std_error, 0.0)

    def test_weightings_agree_on_equal_folds(self):
        data = Dataset(
            features=np.zeros((20, 1)),
            outcomes=np.arange(20, dtype=float),
            problem_kind="custom",
            outcome_kind="real",
            feature_kinds=(core.REAL,),
        )
        plan = make_folds(20, 4, seed=1)
        rule = core.constant_rule(0.0)
        plain = cross_validate(rule, data, SQUARED_ERROR, plan)
        weighted = cross_validate(
            rule, data, SQUARED_ERROR, plan, weighting=evaluation.OBSERVATION
        )
        self.assertAlmostEqual(plain.mean_error, weighted.mean_error, places=10)
        self.assertAlmostEqual(
            plain.mean_error, float(np.mean(np.arange(20.0) ** 2)), places=10
        )

    def test_plan_mismatch(self):
        data = keyed_dataset(n=30)
        self.assertRaises(
            PlanError,
            cross_validate,
            core.constant_rule(0.0),
            data,
            SQUARED_ERROR,
            make_folds(20, 4),
        )

    def test_lookup_threads_do_not_matter(self):
        data = keyed_dataset()
        spec = spec_for(data, SQUARED_ERROR, core.constant_rule(0.0))
        plan = make_folds(len(data), 10, seed=4)
        one = cross_validate(spec, data, SQUARED_ERROR, plan, threads=1)
        many = cross_validate(spec, data, SQUARED_ERROR, plan, threads=4)
        self.assertEqual(one.per_fold_errors, many.per_fold_errors)
        self.assertEqual(one.diagnostics["test_rows"], len(data))

    def test_model_parameters_per_fold(self):
        data = keyed_dataset()
        model = core.ModelClass(
            "shift",
            (core.Parameter("c", -5.0, 5.0),),
            lambda p: core.PredictionRule("shift", lambda x: x[:, 0] + p["c"]),
        )
        cv = cross_validate(
            model, data, SQUARED_ERROR, make_folds(len(data), 5), FitConfig(refine=False)
        )
        self.assertEqual(len(cv.fitted_parameters), 5)
        for params in cv.fitted_parameters:
            self.assertLessEqual(abs(params["c"]), 1.0)

    def test_failed_training_names_fold(self):
        def broken(params):
            raise ValueError("no rule")

        model = core.ModelClass("broken", (core.Parameter("c", 0.0, 1.0),), broken)
        data = keyed_dataset(n=20)
        with self.assertRaises(FoldError) as ctx:
            cross_validate(model, data, SQUARED_ERROR, make_folds(20, 4), threads=1)
        self.assertEqual(ctx.exception.fold, 0)

    def test_failed_prediction_names_fold(self):
        def explode(x):
            raise ValueError("cannot score")

        rule = core.PredictionRule("explodes", explode)
        data = keyed_dataset(n=20)
        with self.assertRaises(FoldError) as ctx:
            cross_validate(rule, data, SQUARED_ERROR, make_folds(20, 4), threads=1)
        self.assertEqual(ctx.exception.fold, 0)
        self.assertIsInstance(ctx.exception.__cause__, ValueError)
        self.assertIn("cannot score", str(ctx.exception))



class TestSubsample(unittest.TestCase):
    def test_full_fraction_matches_cross_validation(self):
        data = keyed_dataset(n=50)
        spec = spec_for(data, SQUARED_ERROR, core.constant_rule(0.0))
        points = evaluation.subsample_curve(
            spec, data, SQUARED_ERROR, [1.0], iterations=1, seed=7, K=5
        )
        cv = cross_validate(spec, data, SQUARED_ERROR, make_folds(50, 5, 7))
        self.assertEqual(points[0].size, 50)
        self.assertEqual(points[0].mean_error, cv.mean_error)

    def test_curve_shape(self):
        data = keyed_dataset(n=100)
        spec = spec_for(data, SQUARED_ERROR, core.constant_rule(0.0))
        points = evaluation.subsample_curve(
            spec, data, SQUARED_ERROR, [0.2, 0.5], iterations=3, seed=1
        )
        self.assertEqual([p.size for p in points], [20, 50])
        self.assertTrue(all(p.iterations == 3 for p in points))

    def test_too_small(self):
        data = keyed_dataset(n=100)
        spec = spec_for(data, SQUARED_ERROR, core.constant_rule(0.0))
        self.assertRaises(
            SubsampleTooSmallError,
            evaluation.subsample_curve,
            spec,
            data,
            SQUARED_ERROR,
            [0.05],
            2,
        )

    def test_fraction_checks(self):
        data = keyed_dataset(n=100)
        rule = core.constant_rule(0.0)
        self.assertRaises(
            ValueError, evaluation.subsample_curve, rule, data, SQUARED_ERROR, [0.5, 0.2], 1
        )
        self.assertRaises(
            ValueError, evaluation.subsample_curve, rule, data, SQUARED_ERROR, [1.5], 1
        )
