import math
import unittest

import sys
import os
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import analysis
import experiments
from experiments import GridError
from layer_engine import Mode
from oracle_gen import GeneratorKind, GeneratorSpec, generate, oracle_layers


class TestParseGrid(unittest.TestCase):
    """Строка сетки поверх значений по умолчанию"""

    def test_overrides_defaults(self):
        grid = experiments.parse_grid("k=4;w=16,32", experiments.DEFAULT_ANALYZE_GRID)
        self.assertEqual(grid["k"], [4])
        self.assertEqual(grid["w"], [16, 32])
        self.assertEqual(grid["trials"], experiments.DEFAULT_ANALYZE_GRID["trials"])

    def test_empty_string_keeps_defaults(self):
        self.assertEqual(experiments.parse_grid("", experiments.DEFAULT_BENCH_GRID), experiments.DEFAULT_BENCH_GRID)

    def test_string_keys(self):
        grid = experiments.parse_grid("kinds=chain,random;modes=hst", experiments.DEFAULT_BENCH_GRID)
        self.assertEqual(grid["kinds"], ["chain", "random"])
        self.assertEqual(grid["modes"], ["hst"])

    def test_defaults_not_mutated(self):
        experiments.parse_grid("k=2", experiments.DEFAULT_ANALYZE_GRID)
        self.assertEqual(experiments.DEFAULT_ANALYZE_GRID["k"], [4, 8])

    def test_errors(self):
        for text in ("k", "z=1", "k=", "k=abc", "w=0"):
            with self.assertRaises(GridError, msg=text):
                experiments.parse_grid(text, experiments.DEFAULT_ANALYZE_GRID)

    def test_config_section(self):
        grid = experiments.grid_from_config({"k": 4, "w": [8, 16]}, experiments.DEFAULT_ANALYZE_GRID)
        self.assertEqual(grid["k"], [4])
        self.assertEqual(grid["w"], [8, 16])
        with self.assertRaises(GridError):
            experiments.grid_from_config({"bogus": 1}, experiments.DEFAULT_ANALYZE_GRID)
        self.assertEqual(experiments.grid_from_config(None, experiments.DEFAULT_BENCH_GRID),
                         experiments.DEFAULT_BENCH_GRID)


class TestParseGenerator(unittest.TestCase):

    def test_basic(self):
        spec = experiments.parse_generator("random,10,3", seed=5)
        self.assertEqual((spec.kind, spec.n, spec.k, spec.seed), (GeneratorKind.RANDOM_ORDER, 10, 3, 5))

    def test_params(self):
        spec = experiments.parse_generator("duplicates,12,2,multiplicity=4", seed=1)
        self.assertEqual(spec.params, {"multiplicity": "4"})
        self.assertEqual(len({p.coords for p in generate(spec)}), 3)

    def test_errors(self):
        for text in ("random,10", "nope,10,2", "random,x,2", "random,10,0", "random,10,2,flag"):
            with self.assertRaises(GridError, msg=text):
                experiments.parse_generator(text, seed=1)

    def test_antichain_k1_is_input_error(self):
        spec = experiments.parse_generator("antichain,5,1", seed=1)
        with self.assertRaises(GridError):
            experiments.generate_checked(spec)


class TestRunMode(unittest.TestCase):
    """Единая точка запуска режимов"""

    def test_all_modes_agree(self):
        points = generate(GeneratorSpec(GeneratorKind.RANDOM_ORDER, n=150, k=3, seed=4))
        expected = oracle_layers(points).ranks
        for mode in Mode:
            self.assertEqual(experiments.run_mode(points, mode, seed=1).ranks, expected, mode.value)

    def test_first_mismatch(self):
        points = generate(GeneratorSpec(GeneratorKind.RANDOM_ORDER, n=20, k=2, seed=4))
        a = oracle_layers(points)
        b = oracle_layers(points)
        self.assertIsNone(experiments.first_mismatch(a, b))
        b.ranks[7] += 1
        self.assertEqual(experiments.first_mismatch(a, b), (7, a.ranks[7], a.ranks[7] + 1))


class TestAnalyzeReport(unittest.TestCase):
    """Отчёт analyze на маленькой сетке"""

    def test_small_sample_inconclusive(self):
        grid = experiments.parse_grid("k=4;w=8,16;trials=1;queries=5;search_seeds=1;eta_trials=20",
                                      experiments.DEFAULT_ANALYZE_GRID)
        report = experiments.run_analyze(grid, seed=1)
        stochastic = [b for b in report.bands if b.name.split()[0] in ("eta", "depth_profile", "search_slope", "search_series")]
        self.assertTrue(stochastic)
        self.assertTrue(all(b.status == experiments.INCONCLUSIVE for b in stochastic))
        sections = {row["section"] for row in report.rows}
        self.assertEqual(sections, {"eta", "depth", "d0", "search", "list_search", "bounds", "root_balance"})
        root = [b for b in report.bands if b.name.startswith("root_balance")]
        self.assertEqual([b.status for b in root], [experiments.INCONCLUSIVE])
        self.assertEqual({r.name for r in report.records}, {"eta", "depth", "search", "root_balance"})

    def test_eta_row_shows_formula_and_exact(self):
        grid = experiments.parse_grid("k=4;trials=100;eta_trials=100000", experiments.DEFAULT_ANALYZE_GRID)
        report = experiments.run_analyze(grid, seed=3, sections=("eta",))
        row = report.rows[0]
        self.assertEqual(row["eta1_formula"], 0.7)
        self.assertEqual(row["eta1_exact"], 0.625)
        self.assertEqual(report.bands[0].status, experiments.PASS)

    def test_sample_rule_uses_section_sample_size(self):
        """Малое trials гистограмм не делает INCONCLUSIVE полосы eta и поиска"""
        grid = experiments.parse_grid("k=4;w=16,64;trials=1;queries=20;search_seeds=2;eta_trials=100000",
                                      experiments.DEFAULT_ANALYZE_GRID)
        report = experiments.run_analyze(grid, seed=3, sections=("eta", "search"))
        status = {b.name.split()[0]: b.status for b in report.bands}
        self.assertEqual(status["eta"], experiments.PASS)
        self.assertNotEqual(status["search_slope"], experiments.INCONCLUSIVE)
        self.assertNotEqual(status["search_series"], experiments.INCONCLUSIVE)

    def test_bounds_section(self):
        """Замкнутая форма, хвостовые оценки и равновероятность корня"""
        grid = experiments.parse_grid("k=2,4,8;w=16,64;trials=400", experiments.DEFAULT_ANALYZE_GRID)
        report = experiments.run_analyze(grid, seed=4, sections=("bounds",))
        status = {b.name: b.status for b in report.bands}
        for k in (2, 4, 8):
            self.assertEqual(status[f"closed_form k={k}"], experiments.PASS)
            self.assertEqual(status[f"tail_bound k={k}"], experiments.PASS)
            self.assertNotEqual(status[f"root_balance k={k}"], experiments.INCONCLUSIVE)
        self.assertEqual(status["split_bound k=4"], experiments.PASS)
        self.assertNotIn("split_bound k=2", status)
        rows = [r for r in report.rows if r["section"] == "bounds"]
        self.assertEqual([(r["k"], r["w"]) for r in rows], [(k, w) for k in (2, 4, 8) for w in (16, 64)])
        self.assertTrue(all(r["tail_exact"] <= r["tail_bound"] for r in rows))
        balance = [r for r in report.records if r.name == "root_balance"]
        self.assertEqual([sum(r.metrics["counts"]) for r in balance], [400, 400, 400])

    def test_deterministic_bands_pass(self):
        grid = experiments.parse_grid("k=4,8;w=64,256;trials=40;queries=20;search_seeds=2",
                                      experiments.DEFAULT_ANALYZE_GRID)
        report = experiments.run_analyze(grid, seed=2, sections=("d0", "search"))
        by_prefix = {}
        for band in report.bands:
            by_prefix.setdefault(band.name.split()[0], []).append(band.status)
        self.assertEqual(set(by_prefix["d0_bound"]), {experiments.PASS})
        self.assertEqual(set(by_prefix["list_fanout"]), {experiments.PASS})

    def test_workers_do_not_change_report(self):
        grid = experiments.parse_grid("k=4,8;w=16,32;trials=5;queries=5;search_seeds=1;eta_trials=1000",
                                      experiments.DEFAULT_ANALYZE_GRID)
        serial = experiments.run_analyze(grid, seed=9, workers=1)
        threaded = experiments.run_analyze(grid, seed=9, workers=3)
        self.assertEqual(serial.rows, threaded.rows)
        self.assertEqual([b.as_dict() for b in serial.bands], [b.as_dict() for b in threaded.bands])


class TestBenchReport(unittest.TestCase):
    """Отчёт bench: медианы по seed-ам и полосы"""

    def setUp(self):
        grid = experiments.parse_grid("n=32,64,128;k=2,4;kinds=chain,antichain;modes=brute,hst,list-hst;seeds=2",
                                      experiments.DEFAULT_BENCH_GRID)
        self.report = experiments.run_bench(grid, seed=1)

    def test_brute_exact(self):
        for row in self.report.rows:
            if row["section"] == "bench" and row["mode"] == "brute":
                n = row["n"]
                self.assertEqual(row["orthant_evaluations"], n * (n - 1) // 2)
        brute = [b for b in self.report.bands if b.name.startswith("brute_exact")]
        self.assertTrue(brute)
        self.assertTrue(all(b.status == experiments.PASS for b in brute))

    def test_worst_case_band(self):
        worst = [b for b in self.report.bands if b.name.startswith("worst_case")]
        self.assertEqual(len(worst), 8)
        self.assertTrue(all(b.status == experiments.PASS for b in worst))

    def test_chain_height(self):
        for row in self.report.rows:
            if row["section"] == "bench" and row["kind"] == "chain":
                self.assertEqual(row["height"], row["n"])
            if row["section"] == "bench" and row["kind"] == "antichain":
                self.assertEqual(row["height"], 1)

    def test_rows_sorted_and_fitted(self):
        keys = [(r["kind"], r["k"], r["mode"], r["n"]) for r in self.report.rows if r["section"] == "bench"]
        self.assertEqual(keys, sorted(keys))
        fits = [r for r in self.report.rows if r["section"] == "fit"]
        self.assertEqual(len(fits), 2 * 2 * 3)

    def test_records_are_bench_cells(self):
        self.assertEqual(len(self.report.records), 3 * 2 * 2 * 3 * 2)
        first = self.report.records[0].as_dict()
        self.assertEqual(first["name"], "bench")
        self.assertIn("coordinate_comparisons", first["metrics"])

    def test_arbitrary_bound_normalization(self):
        """Нормировка k^2 n^(3/2 + log_k(k-1)/2) log n: рост n^1.75 проходит, n^2.4 -- нет"""
        k = 4
        ns = [256, 512, 1024, 2048, 4096]

        def bands_for(power):
            report = experiments.Report()
            series = [(n, {"comparisons": 1e-3 * n ** power * math.log(n)}) for n in ns]
            experiments._bench_bands(report, "antichain", k, "list-hst", series, slope=power)
            return {b.name.split()[0]: b for b in report.bands}

        within = bands_for(1.75)["arbitrary_bound"]
        self.assertEqual(within.status, experiments.PASS, within.detail)
        self.assertIn(f"n^{analysis.runtime_exponents(k)['arbitrary']:.3f}", within.detail)
        self.assertEqual(bands_for(2.4)["arbitrary_bound"].status, experiments.FAIL)

    def test_unknown_kind(self):
        with self.assertRaises(GridError):
            experiments.parse_grid("kinds=spiral", experiments.DEFAULT_BENCH_GRID)
        with self.assertRaises(GridError):
            experiments.grid_from_config({"modes": ["hst", "treap"]}, experiments.DEFAULT_BENCH_GRID)


if __name__ == "__main__":
    unittest.main()
