import json
import logging
import unittest
from unittest.mock import patch

import sys
import os
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from click.testing import CliRunner

from core import ContractViolation
from main import EXIT_INPUT, EXIT_INTERNAL, EXIT_MISMATCH, EXIT_OK, cli
from oracle_gen import oracle_layers

TINY_ANALYZE = "k=4;w=8,16;trials=2;queries=3;search_seeds=1;eta_trials=500"
TINY_BENCH = "n=16,32;k=2;kinds=chain,antichain;modes=hst,brute;seeds=1"


class CliTestCase(unittest.TestCase):

    def setUp(self):
        self.runner = CliRunner()

    def tearDown(self):
        # обработчики пишут в потоки CliRunner, которые закрываются после invoke
        logging.getLogger().handlers.clear()


def label_rows(stdout):
    """Строки index,rank без заголовков и итоговой строки"""
    return [line for line in stdout.splitlines() if line and not line.startswith("#") and line != "index,rank"]


class TestSolve(CliTestCase):
    """Команда solve: метки слоёв и коды выхода"""

    def test_chain_file(self):
        with self.runner.isolated_filesystem():
            with open("points.txt", "w") as f:
                f.write("0.9,0.9\n0.5,0.5\n0.1,0.1\n")
            result = self.runner.invoke(cli, ["solve", "--input", "points.txt", "--mode", "list-hst"])
        self.assertEqual(result.exit_code, EXIT_OK, result.output)
        self.assertEqual(label_rows(result.stdout), ["0,1", "1,2", "2,3"])

    def test_empty_file(self):
        with self.runner.isolated_filesystem():
            open("empty.txt", "w").close()
            result = self.runner.invoke(cli, ["solve", "--input", "empty.txt"])
        self.assertEqual(result.exit_code, EXIT_OK, result.output)
        self.assertEqual(label_rows(result.stdout), [])
        summary_line = [line for line in result.stdout.splitlines() if line.startswith("# summary ")][0]
        summary = json.loads(summary_line[len("# summary "):])
        self.assertEqual((summary["n"], summary["h"]), (0, 0))

    def test_nan_is_input_error(self):
        with self.runner.isolated_filesystem():
            with open("bad.txt", "w") as f:
                f.write("0.1,0.2\nnan,0.3\n")
            result = self.runner.invoke(cli, ["solve", "--input", "bad.txt"])
        self.assertEqual(result.exit_code, EXIT_INPUT)
        self.assertIn("line 2", result.stderr)

    def test_undecodable_or_empty_rows_are_input_errors(self):
        for data in (b"0.5,0.5\n0.1,\xff\n", b",\n,\n"):
            with self.runner.isolated_filesystem():
                with open("bad.txt", "wb") as f:
                    f.write(data)
                result = self.runner.invoke(cli, ["solve", "--input", "bad.txt"])
            self.assertEqual(result.exit_code, EXIT_INPUT, data)

    def test_json_lines(self):
        result = self.runner.invoke(cli, ["solve", "--gen", "random,25,3", "--format", "json-lines", "--mode", "hst"])
        self.assertEqual(result.exit_code, EXIT_OK, result.output)
        records = [json.loads(line) for line in result.stdout.splitlines()]
        self.assertEqual(len(records), 26)
        summary = records[-1]["summary"]
        self.assertEqual(summary["n"], 25)
        self.assertEqual(summary["mode"], "hst")
        self.assertIn("coordinate_comparisons", summary)

    def test_requires_one_source(self):
        result = self.runner.invoke(cli, ["solve"])
        self.assertEqual(result.exit_code, 2)

    def test_bad_generator(self):
        result = self.runner.invoke(cli, ["solve", "--gen", "antichain,10,1"])
        self.assertEqual(result.exit_code, EXIT_INPUT)

    def test_same_seed_same_labels(self):
        args = ["solve", "--gen", "random,60,4", "--seed", "17", "--mode", "hst"]
        first = self.runner.invoke(cli, args)
        second = self.runner.invoke(cli, args)
        self.assertEqual(label_rows(first.stdout), label_rows(second.stdout))

    def test_internal_error(self):
        with patch("experiments.run_mode", side_effect=ContractViolation("broken")):
            result = self.runner.invoke(cli, ["solve", "--gen", "random,5,2"])
        self.assertEqual(result.exit_code, EXIT_INTERNAL)

    def test_out_file(self):
        with self.runner.isolated_filesystem():
            result = self.runner.invoke(cli, ["solve", "--gen", "chain,4,2", "--out", "labels.csv"])
            with open("labels.csv") as f:
                content = f.read()
        self.assertEqual(result.exit_code, EXIT_OK, result.output)
        self.assertEqual(label_rows(content), ["0,4", "1,3", "2,2", "3,1"])


class TestValidate(CliTestCase):
    """Команда validate: сравнение с оракулом"""

    def test_generated_instances(self):
        for mode in ("hst", "list-hst", "brute"):
            for gen in ("random,200,3", "grid,150,4,side=3", "antichain,100,5"):
                result = self.runner.invoke(cli, ["validate", "--gen", gen, "--mode", mode, "--check"])
                self.assertEqual(result.exit_code, EXIT_OK, f"{gen} {mode}: {result.output}")
                self.assertTrue(result.stdout.startswith("OK"))

    def test_duplicates(self):
        result = self.runner.invoke(cli, ["validate", "--gen", "duplicates,120,2,multiplicity=4"])
        self.assertEqual(result.exit_code, EXIT_OK, result.output)

    def test_corrupted_engine(self):
        def corrupted(points, mode, seed, check_invariants=False):
            assignment = oracle_layers(points)
            assignment.ranks[3] += 1
            return assignment

        with patch("experiments.run_mode", side_effect=corrupted):
            result = self.runner.invoke(cli, ["validate", "--gen", "random,30,2"])
        self.assertEqual(result.exit_code, EXIT_MISMATCH)
        self.assertIn("MISMATCH index=3", result.stdout)


class TestReports(CliTestCase):
    """Команды analyze, bench и generate"""

    def test_analyze_small_grid(self):
        result = self.runner.invoke(cli, ["-q", "analyze", "--grid", TINY_ANALYZE])
        self.assertEqual(result.exit_code, EXIT_OK, result.output)
        self.assertTrue(result.stdout.startswith("section,"))
        self.assertIn("INCONCLUSIVE", result.stdout)

    def test_analyze_bad_grid(self):
        result = self.runner.invoke(cli, ["analyze", "--grid", "k=four"])
        self.assertEqual(result.exit_code, EXIT_INPUT)

    def test_analyze_config_and_grid_precedence(self):
        with self.runner.isolated_filesystem():
            with open("config.yaml", "w") as f:
                f.write("analyze:\n  k: [4]\n  w: [8]\n  trials: 2\n  queries: 3\n  search_seeds: 1\n  eta_trials: 300\n")
            result = self.runner.invoke(cli, ["analyze", "--config", "config.yaml", "--grid", "w=16",
                                              "--section", "d0", "--format", "json-lines"])
        self.assertEqual(result.exit_code, EXIT_OK, result.output)
        rows = [json.loads(line) for line in result.stdout.splitlines()]
        d0 = [row for row in rows if row.get("section") == "d0"]
        self.assertEqual([(row["k"], row["w_max"]) for row in d0], [(4, 16)])

    def test_bench_out_file(self):
        with self.runner.isolated_filesystem():
            result = self.runner.invoke(cli, ["bench", "--grid", TINY_BENCH, "--out", "bench.csv", "--workers", "2"])
            with open("bench.csv") as f:
                content = f.read()
        self.assertEqual(result.exit_code, EXIT_OK, result.output)
        self.assertTrue(content.startswith("section,"))
        self.assertIn("brute_exact", content)

    def test_bench_records_file(self):
        with self.runner.isolated_filesystem():
            result = self.runner.invoke(cli, ["bench", "--grid", TINY_BENCH, "--records", "records.jsonl"])
            with open("records.jsonl") as f:
                records = [json.loads(line) for line in f]
        self.assertEqual(result.exit_code, EXIT_OK, result.output)
        self.assertEqual(len(records), 2 * 2 * 2)
        self.assertEqual({r["mode"] for r in records}, {"hst", "brute"})
        self.assertTrue(all({"spec", "seed", "metrics", "derived", "wall_time"} <= set(r) for r in records))

    def test_analyze_bounds_section(self):
        result = self.runner.invoke(cli, ["analyze", "--grid", TINY_ANALYZE, "--section", "bounds", "--format", "json-lines"])
        self.assertEqual(result.exit_code, EXIT_OK, result.output)
        rows = [json.loads(line) for line in result.stdout.splitlines()]
        self.assertIn("closed_form k=4", {row.get("band") for row in rows})

    def test_generate_round_trip(self):
        """Файл из generate даёт те же метки, что и --gen с тем же seed"""
        with self.runner.isolated_filesystem():
            generated = self.runner.invoke(cli, ["generate", "--gen", "random,40,3", "--seed", "5", "--out", "p.txt"])
            from_file = self.runner.invoke(cli, ["solve", "--input", "p.txt", "--seed", "5"])
        from_gen = self.runner.invoke(cli, ["solve", "--gen", "random,40,3", "--seed", "5"])
        self.assertEqual(generated.exit_code, EXIT_OK, generated.output)
        self.assertEqual(label_rows(from_file.stdout), label_rows(from_gen.stdout))
        self.assertEqual(len(label_rows(from_gen.stdout)), 40)

    def test_generate_bad_kind(self):
        result = self.runner.invoke(cli, ["generate", "--gen", "spiral,10,2"])
        self.assertEqual(result.exit_code, EXIT_INPUT)


if __name__ == "__main__":
    unittest.main()
