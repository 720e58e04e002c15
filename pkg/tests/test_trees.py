import unittest

import mock
import numpy as np

from completeness import core, synth, trees
from completeness.core import MISCLASSIFICATION, SQUARED_ERROR, Dataset
from completeness.evaluation import cross_validate, make_folds
from completeness.lookup import spec_for
from completeness.models.sequences import RvParams
from completeness.synth import SeqGenSpec
from completeness.trees import BaggedTrees, FeatureEncoder, TreeConfig


def constant_tree(value):
    return mock.Mock(predict=lambda design: np.full(design.shape[0], float(value)))


def ensemble(outputs, n_classes=0):
    encoder = FeatureEncoder((core.REAL,), (0,))
    return BaggedTrees([constant_tree(v) for v in outputs], encoder, n_classes, TreeConfig())


def real_data(x, y):
    return Dataset(
        features=np.asarray(x, dtype=float).reshape(-1, 1),
        outcomes=y,
        problem_kind="custom",
        outcome_kind="real",
        feature_kinds=(core.REAL,),
    )


class TestEnsemble(unittest.TestCase):
    def test_regression_mean(self):
        self.assertEqual(trees.predict_ensemble(ensemble([2, 4]), [0.0]), 3.0)

    def test_plurality_vote(self):
        votes = ensemble([0, 0, 2], n_classes=3)
        self.assertEqual(trees.predict_ensemble(votes, [0.0]), 0)
        np.testing.assert_array_equal(votes.predict_rows([[0.0]]), [[1, 0, 0]])
        self.assertFalse(votes.ties([[0.0]])[0])

    def test_vote_ties_to_lowest_label(self):
        votes = ensemble([2, 1], n_classes=3)
        self.assertEqual(trees.predict_ensemble(votes, [0.0]), 1)
        self.assertTrue(votes.ties([[0.0]])[0])

    def test_encoder_expands_large_vocabularies(self):
        encoder = FeatureEncoder((core.CATEGORICAL, core.REAL), (3, 0))
        np.testing.assert_array_equal(encoder([[2, 0.5]]), [[0, 0, 1, 0.5]])

    def test_config_checks(self):
        self.assertRaises(ValueError, TreeConfig, n_trees=0)
        self.assertRaises(ValueError, TreeConfig, min_leaf=0)
        self.assertRaises(ValueError, TreeConfig, max_depth=0)
        self.assertNotIn("threads", TreeConfig(threads=4).as_dict())


class TestTrainBagged(unittest.TestCase):
    def test_single_feature_vector(self):
        data = real_data([1.0] * 6, [1.0, 2.0, 3.0, 4.0, 5.0, 6.0])
        fitted = trees.train_bagged(data, SQUARED_ERROR, TreeConfig(n_trees=1, bootstrap=False))
        self.assertAlmostEqual(trees.predict_ensemble(fitted, [1.0]), 3.5)

    def test_deterministic_function_fits_exactly(self):
        x = np.arange(12.0)
        data = real_data(x, (x % 3) * 2.0)
        fitted = trees.train_bagged(data, SQUARED_ERROR, TreeConfig(n_trees=1, min_leaf=1, bootstrap=False))
        self.assertEqual(core.evaluate_loss(fitted.as_rule(), data, SQUARED_ERROR), 0.0)

    def test_predictions_within_tree_outputs(self):
        rng = np.random.default_rng(3)
        data = real_data(rng.normal(size=80), rng.normal(size=80))
        fitted = trees.train_bagged(data, SQUARED_ERROR, TreeConfig(n_trees=15))
        x = np.linspace(-2, 2, 9).reshape(-1, 1)
        outputs = fitted.tree_outputs(x)
        predicted = fitted.predict_rows(x)
        self.assertTrue(np.all(predicted >= outputs.min(axis=1) - 1e-12))
        self.assertTrue(np.all(predicted <= outputs.max(axis=1) + 1e-12))

    def test_threads_do_not_change_the_ensemble(self):
        rng = np.random.default_rng(5)
        data = real_data(rng.normal(size=60), rng.normal(size=60))
        x = np.linspace(-1, 1, 5).reshape(-1, 1)
        one = trees.train_bagged(data, SQUARED_ERROR, TreeConfig(n_trees=8, threads=1))
        four = trees.train_bagged(data, SQUARED_ERROR, TreeConfig(n_trees=8, threads=4))
        np.testing.assert_array_equal(one.predict_rows(x), four.predict_rows(x))

    def test_classifier(self):
        data = Dataset(
            features=np.array([[0.0]] * 10 + [[1.0]] * 10),
            outcomes=[0] * 10 + [2] * 10,
            problem_kind="games",
            outcome_kind="action",
            feature_kinds=(core.REAL,),
            outcome_labels=core.ACTION_LABELS,
        )
        fitted = trees.train_bagged(data, MISCLASSIFICATION, TreeConfig(n_trees=5, min_leaf=1))
        self.assertEqual(fitted.n_classes, 3)
        self.assertEqual(trees.predict_ensemble(fitted, [1.0]), 2)
        self.assertEqual(core.evaluate_loss(fitted.as_rule(), data, MISCLASSIFICATION), 0.0)

    def test_no_better_than_lookup(self):
        spec = SeqGenSpec(synth.RABIN_VAYANOS, rv=RvParams(0.2, 0.5), n_strings=20000, seed=4)
        data = synth.gen_sequences(spec)
        plan = make_folds(len(data), 10, seed=4)
        table = cross_validate(
            spec_for(data, SQUARED_ERROR, core.naive_rule("sequences", SQUARED_ERROR)),
            data,
            SQUARED_ERROR,
            plan,
        )
        bagged = cross_validate(TreeConfig(n_trees=25), data, SQUARED_ERROR, plan)
        pooled = np.hypot(bagged.std_error, table.std_error)
        self.assertGreaterEqual(bagged.mean_error, table.mean_error - 2 * pooled)
