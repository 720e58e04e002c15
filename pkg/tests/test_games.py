import unittest

import numpy as np

from completeness.core import MISCLASSIFICATION, Dataset, evaluate_loss
from completeness.fitting import FitConfig, fit_for_loss
from completeness.models import games
from completeness.models.games import CHAIN, Game, PchmParams

ROW = [[40, 10, 70], [20, 80, 0], [30, 100, 60]]
COL = [[40, 20, 30], [10, 80, 100], [70, 0, 60]]


def example_game():
    return Game(ROW, COL)


class TestLevelK(unittest.TestCase):
    def test_example_chain(self):
        profile = games.level_k_actions(example_game(), 6)
        self.assertIsNone(profile.level_actions[0])
        self.assertEqual(profile.level_actions[1], 2)
        self.assertEqual(profile.level_actions[2:], [0] * 5)
        self.assertFalse(profile.tied)
        self.assertEqual(profile.labels()[:3], ["uniform", "a3", "a1"])

    def test_column_chain(self):
        profile = games.column_level_k_actions(example_game(), 3)
        self.assertEqual(profile.level_actions[1:], [2, 0, 0])

    def test_ties_go_to_lowest_index(self):
        flat = Game(np.zeros((3, 3)), np.zeros((3, 3)))
        profile = games.level_k_actions(flat, 2)
        self.assertEqual(profile.level_actions[1:], [0, 0])
        self.assertTrue(profile.tied)

    def test_k_max_checked(self):
        self.assertRaises(ValueError, games.level_k_actions, example_game(), 0)

    def test_game_row_round_trip(self):
        g = Game.from_row(example_game().as_row())
        np.testing.assert_array_equal(g.row_payoffs, ROW)
        np.testing.assert_array_equal(g.col_payoffs, COL)
        self.assertRaises(ValueError, Game.from_row, [1.0] * 17)

    def test_affine_invariance(self):
        rng = np.random.default_rng(11)
        for _ in range(50):
            row = rng.integers(0, 101, size=(3, 3))
            col = rng.integers(0, 101, size=(3, 3))
            before = games.level_k_actions(Game(row, col), 6)
            for a, b in ((2, 0), (3, -50), (7, 13)):
                after = games.level_k_actions(Game(a * row + b, a * col + b), 6)
                self.assertEqual(after.level_actions, before.level_actions)
                self.assertEqual(after.ties, before.ties)



class TestPchm(unittest.TestCase):
    def test_poisson_weights(self):
        weights = games.poisson_weights(1.5, 6)
        self.assertEqual(weights.shape, (7,))
        self.assertAlmostEqual(weights.sum(), 1.0)

    def test_example_mode(self):
        action, tie = games.pchm_predict(example_game(), PchmParams(1.0))
        self.assertEqual(action, 2)
        self.assertFalse(tie)

    def test_hierarchy_by_hand(self):
        # tau = 1: levels 0 and 1 weigh equally, so level 2 faces the column
        # mixture (1/6, 1/6, 2/3) and keeps playing a3
        weights, strategies = games.level_strategies(example_game(), 1.0, k_max=2)
        np.testing.assert_allclose(weights, [0.4, 0.4, 0.2])
        np.testing.assert_array_equal(strategies[1], [0, 0, 1])
        np.testing.assert_array_equal(strategies[2], [0, 0, 1])
        dist = games.pchm_distribution(example_game(), PchmParams(1.0), k_max=2)
        np.testing.assert_allclose(dist, [0.4 / 3, 0.4 / 3, 0.4 / 3 + 0.6])

    def test_distribution_sums_to_one(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            g = Game.from_row(rng.integers(0, 100, size=18))
            for opponents in (games.HIERARCHY, CHAIN):
                dist = games.pchm_distribution(g, PchmParams(2.0), opponents=opponents)
                self.assertAlmostEqual(dist.sum(), 1.0)

    def test_chain_convention(self):
        action, _ = games.pchm_predict(example_game(), PchmParams(3.0), opponents=CHAIN)
        self.assertEqual(action, 0)

    def test_unknown_convention(self):
        self.assertRaises(
            ValueError, games.pchm_distribution, example_game(), PchmParams(1.0), 6, "mixed"
        )
        self.assertRaises(ValueError, PchmParams, 0.0)

    def test_rules(self):
        x = example_game().as_row().reshape(1, -1)
        np.testing.assert_array_equal(games.level1_rule().predict(x), [[0, 0, 1]])
        np.testing.assert_array_equal(games.pchm_rule(1.0).predict(x), [[0, 0, 1]])
        self.assertFalse(games.pchm_rule(1.0).ties(x)[0])

    def test_fit_on_modal_play(self):
        x = np.tile(example_game().as_row(), (3, 1))
        data = Dataset(
            features=x,
            outcomes=[2, 2, 0],
            problem_kind="games",
            outcome_kind="action",
            feature_kinds=("real",) * 18,
            outcome_labels=("a1", "a2", "a3"),
        )
        result = fit_for_loss(
            games.pchm_model(), data, MISCLASSIFICATION, FitConfig(grid_points_per_dim=5)
        )
        self.assertAlmostEqual(result.train_loss, 1 / 3)
        rule = games.pchm_model().build(result.parameters)
        self.assertAlmostEqual(evaluate_loss(rule, data, MISCLASSIFICATION), 1 / 3)


class TestGameFilters(unittest.TestCase):
    def test_example_in_dataset_b(self):
        g = example_game()
        self.assertEqual(games.welfare_max_profile(g), (1, 1))
        self.assertEqual(games.level_k_support(g), ([0, 2], [0, 2]))
        self.assertEqual(games.welfare_gap(g), 40.0)
        self.assertEqual(games.welfare_gap_ratio(g), 0.5)
        self.assertEqual(games.welfare_gap_ratio(g, normalizer="max_row"), 0.4)
        self.assertTrue(games.in_dataset_b(g))
        self.assertFalse(games.in_dataset_b(g, min_ratio=0.6))

    def test_example_in_dataset_a(self):
        self.assertTrue(games.in_dataset_a(example_game()))
        self.assertEqual(games.filter_dataset_A([example_game()])[0].max_row_payoff, 100.0)

    def test_dominated_actions(self):
        payoffs = np.array([[1, 1, 1], [2, 2, 2], [0, 0, 0]])
        self.assertEqual(games.strictly_dominated_actions(payoffs), [0, 2])
        dominated = Game(payoffs, np.ones((3, 3)))
        self.assertFalse(games.in_dataset_a(dominated))

    def test_level1_margin(self):
        g = example_game()
        self.assertAlmostEqual(games.level1_margin_ratio(g), 70 / 3 / 100)
        self.assertFalse(games.in_level1_gap_set(g))
        self.assertTrue(games.in_level1_gap_set(g, min_ratio=0.2))

    def test_filters_match_brute_force(self):
        rng = np.random.default_rng(5)
        outcomes = set()
        for _ in range(200):
            row = rng.integers(0, 101, size=(3, 3))
            col = rng.integers(0, 101, size=(3, 3))
            g = Game(row, col)
            a = brute_force_dataset_a(row, col)
            self.assertEqual(games.in_dataset_a(g), a)
            self.assertEqual(games.in_dataset_b(g), brute_force_dataset_b(row, col))
            outcomes.add(a)
        self.assertEqual(outcomes, {True, False})


def first_argmax(values):
    values = list(values)
    return values.index(max(values))


def brute_force_dataset_a(row, col):
    for i in range(3):
        for j in range(3):
            if i == j:
                continue
            if all(row[j, c] > row[i, c] for c in range(3)):
                return False
            if all(col[r, j] > col[r, i] for r in range(3)):
                return False
    return True


def brute_force_dataset_b(row, col, k_max=6, min_ratio=0.2):
    r = first_argmax(row.sum(axis=1))
    c = first_argmax(col.sum(axis=0))
    rows, cols = {r}, {c}
    for _ in range(2, k_max + 1):
        r, c = first_argmax(row[:, c]), first_argmax(col[r, :])
        rows.add(r)
        cols.add(c)
    welfare = row + col
    best = max(welfare[i, j] for i in range(3) for j in range(3))
    i, j = [(i, j) for i in range(3) for j in range(3) if welfare[i, j] == best][0]
    if i in rows and j in cols:
        return False
    gap = best - max(welfare[m, n] for m in rows for n in cols)
    scale = row[i, j]
    if scale <= 0:
        return gap > 0
    return gap / scale >= min_ratio
