import io
import os
import shutil
import tempfile
import unittest

import mock

from completeness import cli
from completeness.recorder import FileRecorder


class TestCli(unittest.TestCase):
    def setUp(self):
        self.directory = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.directory)

    def path(self, *parts):
        return os.path.join(self.directory, *parts)

    def main(self, *argv):
        with mock.patch("sys.stdout"):
            return cli.main(list(argv))

    def synth_sequences(self, strings=400):
        code = self.main(
            "synth",
            "--domain", "sequences",
            "--generator", "rabin_vayanos",
            "--strings", str(strings),
            "--out", self.directory,
        )
        self.assertEqual(code, cli.EXIT_OK)
        return self.path("sequences.csv")

    def evaluate(self, data, out, threads):
        return self.main(
            "evaluate",
            "--domain", "sequences",
            "--data", data,
            "--models", "rv",
            "--folds", "5",
            "--out", out,
            "--threads", str(threads),
        )

    def test_synth_then_evaluate(self):
        data = self.synth_sequences()
        self.assertTrue(os.path.exists(data))
        self.assertEqual(self.evaluate(data, self.path("run"), 1), cli.EXIT_OK)
        report = FileRecorder(self.path("run")).read_report()
        self.assertEqual(report["command"], "evaluate")
        self.assertNotIn("threads", report["config"])
        self.assertTrue(os.path.exists(self.path("run", "report.txt")))

    def test_report_bytes_ignore_threads(self):
        data = self.synth_sequences()
        self.assertEqual(self.evaluate(data, self.path("one"), 1), cli.EXIT_OK)
        self.assertEqual(self.evaluate(data, self.path("three"), 3), cli.EXIT_OK)
        with open(self.path("one", "report.json"), "rb") as a, open(
            self.path("three", "report.json"), "rb"
        ) as b:
            self.assertEqual(a.read(), b.read())

    def test_unknown_config_key(self):
        config = self.path("run.cfg")
        with open(config, "w", encoding="utf-8") as f:
            f.write("domain = sequences\nfoldz = 3\n")
        data = self.synth_sequences()
        self.assertEqual(
            self.main("evaluate", "--config", config, "--data", data), cli.EXIT_CONFIG
        )

    def test_missing_data_is_a_config_error(self):
        self.assertEqual(self.main("evaluate", "--domain", "risk"), cli.EXIT_CONFIG)

    def test_bad_csv(self):
        data = self.path("ce.csv")
        with open(data, "w", encoding="utf-8") as f:
            f.write("lottery_id,z1,z2,p,ce,subject_id\nL01,100,0,0.5,abc,s1\n")
        self.assertEqual(
            self.main("evaluate", "--domain", "risk", "--data", data, "--out", self.directory),
            cli.EXIT_SCHEMA,
        )

    def test_degenerate_benchmark(self):
        # every report is the expected value, so naive and lookup both score zero
        data = self.path("ce.csv")
        rows = ["lottery_id,z1,z2,p,ce,subject_id"]
        for subject in ("s1", "s2", "s3"):
            rows.append("L01,100,0,0.5,50,%s" % subject)
            rows.append("L02,-40,0,0.25,-10,%s" % subject)
        with open(data, "w", encoding="utf-8") as f:
            f.write("\n".join(rows) + "\n")
        code = self.main(
            "evaluate",
            "--domain", "risk",
            "--data", data,
            "--models", "eu",
            "--folds", "3",
            "--out", self.path("run"),
        )
        self.assertEqual(code, cli.EXIT_DEGENERATE)

    def test_completeness_from_errors(self):
        with mock.patch("sys.stdout", new_callable=io.StringIO) as out:
            code = cli.main(
                ["completeness", "--naive", "104.17", "--model", "57.14", "--lookup", "55.45",
                 "--lookup-se", "3"]
            )
        self.assertEqual(code, cli.EXIT_OK)
        self.assertIn("97%", out.getvalue())
        self.assertIn("9.0000", out.getvalue())

    def test_completeness_needs_a_gap(self):
        code = self.main("completeness", "--naive", "1", "--model", "1", "--lookup", "1")
        self.assertEqual(code, cli.EXIT_DEGENERATE)

    def test_filter_subjects(self):
        data = self.synth_sequences()
        code = self.main(
            "filter_subjects", "--data", data, "--method", "first_k", "--k", "3",
            "--out", self.path("clean"),
        )
        self.assertEqual(code, cli.EXIT_OK)
        report = FileRecorder(self.path("clean")).read_report()
        self.assertEqual(report["results"]["rows_after"], 8 * 3)

    def test_feature_set_extremes(self):
        data = self.synth_sequences(strings=20000)
        code = self.main(
            "features",
            "--domain", "sequences",
            "--data", data,
            "--projections", "constant,full",
            "--out", self.path("features"),
        )
        self.assertEqual(code, cli.EXIT_OK)
        scores = FileRecorder(self.path("features")).read_report()["results"]["completeness"]
        self.assertAlmostEqual(scores["full"], 1.0, places=12)
        self.assertLess(abs(scores["constant"]), 0.05)
