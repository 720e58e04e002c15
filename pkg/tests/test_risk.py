import itertools
import unittest

import numpy as np

from completeness import core, synth
from completeness.core import SQUARED_ERROR, Dataset
from completeness.fitting import FitConfig, fit
from completeness.models import ModelOptions, STRICT, model_class, risk
from completeness.models.risk import CptParams, EuParams, Lottery


def lottery_rows():
    prizes = [(10.0, 0.0), (50.0, 0.0), (100.0, 5.0), (150.0, 20.0)]
    probabilities = [0.05, 0.25, 0.5, 0.75, 0.95]
    rows = []
    for (high, low), p in itertools.product(prizes, probabilities):
        rows.append((high, low, p))
        rows.append((-high, -low, p))
    return np.array(rows)


def risk_data(x, y):
    return Dataset(
        features=x,
        outcomes=y,
        problem_kind="risk",
        outcome_kind="real",
        feature_kinds=(core.REAL,) * 3,
    )


class TestRiskRules(unittest.TestCase):
    def test_expected_value(self):
        self.assertEqual(risk.predict_ev(Lottery(100.0, 0.0, 0.25)), 25.0)

    def test_bad_probability(self):
        self.assertRaises(risk.LotteryError, Lottery, 1.0, 0.0, 1.5)

    def test_linear_cpt_is_expected_value(self):
        theta = CptParams(1.0, 1.0, 1.0, 1.0)
        for lot in [Lottery(100.0, 10.0, 0.1), Lottery(-40.0, 0.0, 0.7)]:
            self.assertAlmostEqual(
                risk.predict_cpt(lot, theta), risk.predict_ev(lot), places=10
            )

    def test_eu_formula(self):
        lot = Lottery(100.0, 0.0, 0.5)
        self.assertAlmostEqual(risk.predict_eu(lot, EuParams(0.5)), 5.0)

    def test_strict_eu_rejects_losses(self):
        lot = Lottery(-10.0, 0.0, 0.5)
        self.assertRaises(risk.LotteryError, risk.predict_eu, lot, EuParams(0.5), False)
        self.assertAlmostEqual(risk.predict_eu(lot, EuParams(1.0)), -5.0)

    def test_weight_endpoints(self):
        np.testing.assert_array_equal(risk.weight([0.0, 1.0], 0.7, 0.6), [0.0, 1.0])
        self.assertAlmostEqual(float(risk.weight([0.5], 1.0, 1.0)[0]), 0.5)

    def test_value_on_losses(self):
        np.testing.assert_allclose(risk.value([4.0, -4.0], 0.5, 0.5), [2.0, -2.0])

    def test_bad_parameters(self):
        self.assertRaises(ValueError, EuParams, 0.0)
        self.assertRaises(ValueError, CptParams, 1.0, 1.0, -1.0, 1.0)

    def test_model_registry(self):
        model = model_class("risk", "eu", SQUARED_ERROR, ModelOptions(eu_losses=STRICT))
        self.assertEqual(model.notes, ("losses: strict",))
        bounded = model_class(
            "risk",
            "cpt",
            SQUARED_ERROR,
            ModelOptions(bounds={"cpt": {"gamma": (0.1, 2.0)}}),
        )
        self.assertEqual(bounded.parameters[3].upper, 2.0)
        self.assertRaises(ValueError, model_class, "risk", "pchm", SQUARED_ERROR)


class TestCptRecovery(unittest.TestCase):
    def test_noiseless_parameters_recovered(self):
        truths = [
            (0.8, 0.9, 0.7, 0.6),
            (0.5, 0.7, 1.2, 0.9),
            (0.95, 0.6, 0.9, 0.75),
            (1.0, 1.0, 0.7, 0.6),
            (0.7, 0.85, 1.5, 0.5),
        ]
        for seed, truth in enumerate(truths):
            x = np.vstack([lot.as_row() for lot in synth.default_lotteries(seed=seed)])
            y = risk.prospect_value(x, *truth)
            result = fit(risk.cpt_model(), risk_data(x, y), SQUARED_ERROR, FitConfig())
            fitted = [result.parameters[n] for n in ("alpha", "beta", "delta", "gamma")]
            np.testing.assert_allclose(fitted, truth, atol=0.02, err_msg="seed %d" % seed)

    def test_eu_recovered(self):
        x = lottery_rows()
        y = risk.expected_utility(x, 0.7)
        result = fit(risk.eu_model(), risk_data(x, y), SQUARED_ERROR)
        self.assertAlmostEqual(result.parameters["alpha"], 0.7, places=3)
