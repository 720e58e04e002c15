import os
import shutil
import tempfile
import unittest

import numpy as np
import pandas as pd

from completeness import datafiles
from completeness.core import ProblemKind
from completeness.datafiles import SchemaError
from completeness.models.games import GAME_FEATURES

RISK_CSV = """lottery_id,z1,z2,p,ce,subject_id
L01,100,0,0.5,40.5,s1
L02,-50,0,0.25,-15,s1
L01,100,0,0.5,35,s2
"""


def games_frame(actions):
    payoffs = [str(v) for v in range(18)]
    rows = [["G1"] + payoffs + [a, "s%d" % i] for i, a in enumerate(actions)]
    return pd.DataFrame(rows, columns=["game_id"] + list(GAME_FEATURES) + ["action", "subject_id"])


class TestReadCsv(unittest.TestCase):
    def setUp(self):
        self.directory = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.directory)

    def write(self, name, text):
        path = os.path.join(self.directory, name)
        with open(path, "w", encoding="utf-8") as f:
            f.write(text)
        return path

    def test_risk(self):
        data = datafiles.load_dataset(self.write("ce.csv", RISK_CSV), "risk")
        self.assertEqual(data.problem_kind, ProblemKind.RISK)
        np.testing.assert_array_equal(data.features[1], [-50.0, 0.0, 0.25])
        self.assertEqual(list(data.outcomes), [40.5, -15.0, 35.0])
        self.assertEqual(list(data.instance_ids), ["L01", "L02", "L01"])

    def test_bad_number_names_row_and_column(self):
        text = RISK_CSV.replace("-15,s1", "abc,s1")
        with self.assertRaises(SchemaError) as ctx:
            datafiles.load_dataset(self.write("ce.csv", text), "risk")
        self.assertEqual((ctx.exception.row, ctx.exception.column), (2, "ce"))

    def test_missing_column_is_a_header_error(self):
        text = RISK_CSV.replace("lottery_id,z1,z2,p,ce,subject_id", "lottery_id,z1,z2,prob,ce,subject_id")
        with self.assertRaises(SchemaError) as ctx:
            datafiles.load_dataset(self.write("ce.csv", text), "risk")
        self.assertEqual((ctx.exception.row, ctx.exception.column), (0, "p"))

    def test_probability_range(self):
        text = RISK_CSV.replace("0.25", "1.25")
        with self.assertRaises(SchemaError) as ctx:
            datafiles.load_dataset(self.write("ce.csv", text), "risk")
        self.assertEqual(ctx.exception.column, "p")

    def test_sequences(self):
        path = self.write("flips.csv", "subject_id,round,flips\na,1,HTHHTTHT\na,2,hhhhtttt\n")
        data = datafiles.load_dataset(path, "sequences")
        np.testing.assert_array_equal(data.features[0], [1, 0, 1, 1, 0, 0, 1])
        self.assertEqual(list(data.outcomes), [0.0, 0.0])
        self.assertEqual(list(data.rounds), [1, 2])

    def test_sequences_need_one_length(self):
        path = self.write("flips.csv", "subject_id,round,flips\na,1,HTHHTTHT\na,2,HTH\n")
        with self.assertRaises(SchemaError) as ctx:
            datafiles.load_dataset(path, "sequences")
        self.assertEqual((ctx.exception.row, ctx.exception.column), (2, "flips"))

    def test_sequences_need_integer_rounds(self):
        path = self.write("flips.csv", "subject_id,round,flips\na,1.5,HTHHTTHT\n")
        self.assertRaises(SchemaError, datafiles.load_dataset, path, "sequences")

    def test_missing_identifier(self):
        text = RISK_CSV.replace("35,s2", "35,")
        with self.assertRaises(SchemaError) as ctx:
            datafiles.load_dataset(self.write("ce.csv", text), "risk")
        self.assertEqual((ctx.exception.row, ctx.exception.column), (3, "subject_id"))

    def test_empty_file(self):
        path = self.write("ce.csv", "lottery_id,z1,z2,p,ce,subject_id\n")
        self.assertRaises(SchemaError, datafiles.load_dataset, path, "risk")


class TestFrames(unittest.TestCase):
    def test_games_actions(self):
        data = datafiles.dataset_from_frame(games_frame(["1", "3"]), "games")
        self.assertEqual(list(data.outcomes), [0.0, 2.0])
        self.assertEqual(data.arity, 18)
        with self.assertRaises(SchemaError) as ctx:
            datafiles.dataset_from_frame(games_frame(["1", "4"]), "games")
        self.assertEqual((ctx.exception.row, ctx.exception.column), (2, "action"))

    def test_frame_round_trip(self):
        frame = games_frame(["2", "1"])
        data = datafiles.dataset_from_frame(frame, "games")
        back = datafiles.dataset_from_frame(datafiles.frame_from_dataset(data), "games")
        np.testing.assert_array_equal(back.features, data.features)
        np.testing.assert_array_equal(back.outcomes, data.outcomes)
        self.assertEqual(list(back.subject_ids), ["s0", "s1"])

    def test_custom_domain_has_no_schema(self):
        self.assertRaises(ValueError, datafiles.dataset_from_frame, games_frame(["1"]), "custom")

    def test_save_dataset(self):
        directory = tempfile.mkdtemp()
        try:
            path = os.path.join(directory, "flips.csv")
            frame = pd.DataFrame({"subject_id": ["a"], "round": ["3"], "flips": ["HHTT"]})
            data = datafiles.dataset_from_frame(frame, "sequences")
            datafiles.save_dataset(data, path)
            with open(path, encoding="utf-8") as f:
                self.assertEqual(f.read().splitlines(), ["subject_id,round,flips", "a,3,HHTT"])
        finally:
            shutil.rmtree(directory)
