import logging
import math
import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import analysis
from core import STREAM_GENERATOR, ContractViolation, MaxLayersError, Point, derive_seed
from layer_engine import LayerAssignment, Mode, max_partition
from log_progress import print_progress
from oracle_gen import GeneratorKind, GeneratorSpec, generate, oracle_layers

PASS = "PASS"
FAIL = "FAIL"
INCONCLUSIVE = "INCONCLUSIVE"

# меньше стольких испытаний статистические полосы не оцениваются
MIN_SAMPLES = 30
Z_BAND = 3.0
ETA_TOLERANCE = 0.01
SLOPE_SLACK = 0.1
SERIES_RATIO_MAX = 1.5
DEPTH_BAND_MAX_D = 10
NORMALIZED_SLACK = 0.15
WORST_CASE_C = 1.0
CHAIN_SLOPE_MAX = 1.3
CLOSED_FORM_MAX_W = 256
ROOT_BALANCE_POINTS = 8
ROOT_BALANCE_ALPHA = 0.01

ANALYZE_SECTIONS = ("eta", "depth", "d0", "search", "bounds")

DEFAULT_ANALYZE_GRID = {
    "k": [4, 8],
    "w": [64, 256, 1024],
    "trials": [1000],
    "queries": [100],
    "search_seeds": [20],
    "eta_trials": [100000],
}

DEFAULT_BENCH_GRID = {
    "n": [256, 512, 1024, 2048],
    "k": [4, 8],
    "kinds": ["antichain", "chain", "random"],
    "modes": ["list-hst", "hst", "brute"],
    "seeds": [3],
}

_STRING_KEYS = {"kinds", "modes"}


class GridError(MaxLayersError, ValueError):
    """Некорректная сетка параметров или спецификация генератора"""


@dataclass
class Band:
    """Проверка одной полосы приёмки"""
    name: str
    status: str
    detail: str = ""

    def as_dict(self) -> Dict:
        return {"band": self.name, "status": self.status, "detail": self.detail}


@dataclass
class Report:
    rows: List[Dict] = field(default_factory=list)
    bands: List[Band] = field(default_factory=list)
    records: List[analysis.ExperimentRecord] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(b.status != FAIL for b in self.bands)


def parse_grid(text: Optional[str], defaults: Dict[str, List]) -> Dict[str, List]:
    """Разбор строки сетки вида "k=4,8;w=64,256;trials=100" поверх значений по умолчанию"""
    grid = {key: list(values) for key, values in defaults.items()}
    if not text:
        return grid
    for part in text.split(";"):
        part = part.strip()
        if not part:
            continue
        if "=" not in part:
            raise GridError(f"grid entry {part!r} must look like key=v1,v2")
        key, raw = (s.strip() for s in part.split("=", 1))
        if key not in defaults:
            raise GridError(f"unknown grid key {key!r}; expected one of {', '.join(sorted(defaults))}")
        values = [v.strip() for v in raw.split(",") if v.strip()]
        if not values:
            raise GridError(f"grid key {key!r} has no values")
        grid[key] = [_choice(key, v) for v in values] if key in _STRING_KEYS else [_positive_int(key, v) for v in values]
    return grid


def grid_from_config(section: Optional[Dict], defaults: Dict[str, List]) -> Dict[str, List]:
    """Секция YAML-конфига -> сетка (скаляры превращаются в списки из одного элемента)"""
    grid = {key: list(values) for key, values in defaults.items()}
    for key, value in (section or {}).items():
        if key not in defaults:
            raise GridError(f"unknown config key {key!r}; expected one of {', '.join(sorted(defaults))}")
        values = value if isinstance(value, list) else [value]
        grid[key] = [_choice(key, str(v)) for v in values] if key in _STRING_KEYS else [_positive_int(key, v) for v in values]
    return grid


def _choice(key: str, value: str) -> str:
    enum = GeneratorKind if key == "kinds" else Mode
    try:
        return enum(value.lower()).value
    except ValueError:
        raise GridError(f"grid key {key!r}: unknown value {value!r}; expected one of {', '.join(e.value for e in enum)}")


def _positive_int(key: str, value) -> int:
    try:
        number = int(value)
    except (TypeError, ValueError):
        raise GridError(f"grid key {key!r}: {value!r} is not an integer")
    if number < 1:
        raise GridError(f"grid key {key!r}: {number} must be >= 1")
    return number


def parse_generator(text: str, seed: int) -> GeneratorSpec:
    """Разбор --gen KIND,n,k[,key=value...]"""
    parts = [p.strip() for p in text.split(",")]
    if len(parts) < 3:
        raise GridError(f"--gen expects KIND,n,k[,params], got {text!r}")
    kind_name, n_text, k_text = parts[:3]
    try:
        kind = GeneratorKind(kind_name.lower())
    except ValueError:
        kinds = ", ".join(kind.value for kind in GeneratorKind)
        raise GridError(f"unknown generator kind {kind_name!r}; expected one of {kinds}")
    params = {}
    for extra in parts[3:]:
        if "=" not in extra:
            raise GridError(f"generator parameter {extra!r} must look like key=value")
        key, value = extra.split("=", 1)
        params[key.strip()] = value.strip()
    try:
        n, k = int(n_text), int(k_text)
        return GeneratorSpec(kind, n=n, k=k, seed=seed, params=params)
    except (ValueError, ContractViolation) as e:
        raise GridError(f"invalid generator spec {text!r}: {e}")


def generate_checked(spec: GeneratorSpec) -> List[Point]:
    try:
        return generate(spec)
    except ContractViolation as e:
        raise GridError(f"invalid generator spec {spec.describe()}: {e}")


def run_mode(points: Sequence[Point], mode: Mode, seed: int, check_invariants: bool = False) -> LayerAssignment:
    """Единая точка запуска для solve/validate/bench"""
    mode = Mode(mode)
    if mode == Mode.BRUTE:
        return oracle_layers(points)
    return max_partition(points, mode=mode, seed=seed, check_invariants=check_invariants)


def first_mismatch(expected: LayerAssignment, actual: LayerAssignment) -> Optional[Tuple[int, int, int]]:
    for i, (a, b) in enumerate(zip(expected.ranks, actual.ranks)):
        if a != b:
            return i, a, b
    if len(expected.ranks) != len(actual.ranks):
        i = min(len(expected.ranks), len(actual.ranks))
        return i, expected.ranks[i] if i < len(expected.ranks) else 0, actual.ranks[i] if i < len(actual.ranks) else 0
    return None


def _map_cells(fn: Callable, cells: List, workers: int, label: str) -> List:
    """Ячейки выполняются независимо; результаты возвращаются в порядке ячеек"""
    if workers <= 1:
        return [fn(cell) for cell in print_progress(cells, total_tasks=len(cells), label=label)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(print_progress(pool.map(fn, cells), total_tasks=len(cells), label=label))


def _stat_status(samples: int, ok: bool) -> str:
    if samples < MIN_SAMPLES:
        return INCONCLUSIVE
    return PASS if ok else FAIL


def _analyze_eta(grid: Dict, seed: int, report: Report, workers: int):
    eta_trials = grid["eta_trials"][0]
    ks = sorted(grid["k"])

    def cell(k):
        return analysis.estimate_eta(k, eta_trials, seed=derive_seed(seed, k))

    for k, est in zip(ks, _map_cells(cell, ks, workers, "eta")):
        report.rows.append({
            "section": "eta", "k": k, "trials": eta_trials,
            "eta1_formula": round(analysis.eta1(k), 6), "eta1_exact": round(analysis.eta1_exact(k), 6),
            "eta1_estimate": round(est.eta1, 6), "eta1_stderr": round(est.eta1_stderr, 6),
            "eta2_formula": round(analysis.eta2(k), 6), "eta2_exact": round(analysis.eta2_exact(k), 6),
            "eta2_estimate": round(est.eta2, 6), "eta2_stderr": round(est.eta2_stderr, 6),
        })
        report.records.append(analysis.ExperimentRecord(
            "eta", {"k": k, "trials": eta_trials}, "monte-carlo", derive_seed(seed, k),
            metrics={"eta1": est.eta1, "eta2": est.eta2, "incomparable_pairs": est.incomparable_pairs}))
        exact_ok = (abs(est.eta1 - analysis.eta1_exact(k)) <= ETA_TOLERANCE
                    and abs(est.eta2 - analysis.eta2_exact(k)) <= ETA_TOLERANCE)
        report.bands.append(Band(f"eta k={k}", _stat_status(min(eta_trials, est.incomparable_pairs), exact_ok),
                                 f"eta1 {est.eta1:.4f} vs {analysis.eta1_exact(k):.4f}, "
                                 f"eta2 {est.eta2:.4f} vs {analysis.eta2_exact(k):.4f}"))


def _analyze_depth(grid: Dict, seed: int, report: Report, workers: int):
    trials = grid["trials"][0]
    cells = [(k, w) for k in sorted(grid["k"]) for w in sorted(grid["w"])]

    def cell(kw):
        k, w = kw
        return analysis.measure_depth_histogram(k, w, trials, seed=derive_seed(seed, k, w))

    for (k, w), hist in zip(cells, _map_cells(cell, cells, workers, "depth")):
        z = hist.z_scores(DEPTH_BAND_MAX_D)
        for d, score in enumerate(z):
            report.rows.append({
                "section": "depth", "k": k, "w": w, "d": d, "trials": trials,
                "mean": round(hist.mean[d], 6), "stderr": round(hist.stderr[d], 6),
                "model": round(hist.model[d], 6), "z": round(score, 3),
            })
        report.records.append(analysis.ExperimentRecord(
            "depth", {"k": k, "w": w, "trials": trials}, "monte-carlo", derive_seed(seed, k, w),
            metrics={"mean": hist.mean, "stderr": hist.stderr}, derived={"z": z}))
        worst = max((abs(s) for s in z), default=0.0)
        report.bands.append(Band(f"depth_profile k={k} w={w}", _stat_status(trials, worst <= Z_BAND),
                                 f"max |z| = {worst:.2f} over d <= {DEPTH_BAND_MAX_D}"))
        mass = analysis.depth_profile(w, k).mass
        report.bands.append(Band(f"depth_mass k={k} w={w}", PASS if math.isclose(mass, w, rel_tol=1e-9) else FAIL,
                                 f"sum a(w,d) = {mass:.9f}"))


def _analyze_d0(grid: Dict, report: Report):
    w_max = max(grid["w"])
    for k in sorted(grid["k"]):
        if k < 2:
            continue
        worst_gap = -math.inf
        worst_w = 1
        for w, mode_depth in analysis.d0_scan(w_max, k):
            gap = mode_depth - analysis.d0_bound(w, k)
            if gap > worst_gap:
                worst_gap, worst_w = gap, w
        report.rows.append({"section": "d0", "k": k, "w_max": w_max, "worst_w": worst_w,
                            "worst_gap": round(worst_gap, 6)})
        report.bands.append(Band(f"d0_bound k={k}", PASS if worst_gap <= 0 else FAIL,
                                 f"max(argmax_d a(w,d) - log_k w - 2) = {worst_gap:.3f} at w={worst_w}"))


def _analyze_search(grid: Dict, seed: int, report: Report, workers: int):
    queries = grid["queries"][0]
    search_seeds = grid["search_seeds"][0]
    ws = sorted(grid["w"])
    ks = [k for k in sorted(grid["k"]) if k >= 2]

    def cell(k):
        return analysis.measure_unsuccessful_search(k, ws, queries, search_seeds, seed=derive_seed(seed, k))

    for k, costs in zip(ks, _map_cells(cell, ks, workers, "search")):
        for cost in costs:
            report.rows.append({
                "section": "search", "k": k, "w": cost.w, "queries": cost.queries,
                "mean": round(cost.mean_visits, 6), "stderr": round(cost.stderr, 6),
                "series": round(cost.series, 6), "ratio": round(cost.mean_visits / cost.series, 6),
            })
        report.records.append(analysis.ExperimentRecord(
            "search", {"k": k, "ws": ws, "queries": queries, "seeds": search_seeds}, "hst", derive_seed(seed, k),
            metrics={"mean_visits": [c.mean_visits for c in costs], "stderr": [c.stderr for c in costs]},
            derived={"series": [c.series for c in costs]}))
        slope = analysis.fit_loglog_slope([c.w for c in costs], [c.mean_visits for c in costs])
        limit = analysis.u_bound_exponent(k) + SLOPE_SLACK
        samples = search_seeds * queries
        report.bands.append(Band(f"search_slope k={k}", _stat_status(samples, len(costs) < 2 or slope <= limit),
                                 f"slope {slope:.3f} vs {limit:.3f}"))
        worst = max(c.mean_visits / c.series for c in costs)
        report.bands.append(Band(f"search_series k={k}", _stat_status(samples, worst <= SERIES_RATIO_MAX),
                                 f"max mean/series = {worst:.3f}"))
        largest = max(ws)
        list_cost = analysis.measure_list_hst_search(k, largest, queries, seed=derive_seed(seed, k, largest))
        report.rows.append({
            "section": "list_search", "k": k, "w": largest, "queries": list_cost.queries,
            "mean": round(list_cost.mean_visits, 6), "series": round(list_cost.series, 6),
            "max_fanout": list_cost.max_fanout,
        })
        report.bands.append(Band(f"list_fanout k={k}", PASS if list_cost.max_fanout <= k - 1 else FAIL,
                                 f"max children entered = {list_cost.max_fanout}"))


def _analyze_bounds(grid: Dict, seed: int, report: Report):
    trials = grid["trials"][0]
    ks = [k for k in sorted(grid["k"]) if k >= 2]
    ws = sorted({min(w, CLOSED_FORM_MAX_W) for w in grid["w"]})
    for k in ks:
        closed_ok = tail_ok = split_ok = True
        for w in ws:
            profile = analysis.depth_profile(w, k)
            worst_rel = 0.0
            for d in range(min(DEPTH_BAND_MAX_D, w - 1) + 1):
                closed = analysis.depth_profile_closed_form(w, d, k)
                reference = profile.values[d]
                if not math.isclose(closed, reference, rel_tol=1e-9, abs_tol=1e-12):
                    closed_ok = False
                worst_rel = max(worst_rel, abs(closed - reference) / max(abs(reference), 1e-12))
            series = analysis.u_series(profile)
            exact, tail = analysis.lemma4_tail(profile.values, analysis.eta1(k), profile.argmax())
            tail_ok = tail_ok and exact <= tail * (1 + 1e-12)
            row = {"section": "bounds", "k": k, "w": w, "closed_form_max_rel_error": worst_rel,
                   "u_series": round(series, 6), "tail_exact": round(exact, 6), "tail_bound": round(tail, 6)}
            if k >= 4:
                split = analysis.u_split_bound(profile)
                split_ok = split_ok and split >= series - 1e-9
                row["u_split_bound"] = round(split, 6)
            report.rows.append(row)
        report.bands.append(Band(f"closed_form k={k}", PASS if closed_ok else FAIL,
                                 f"closed form vs recurrence for w in {ws}, d <= {DEPTH_BAND_MAX_D}"))
        report.bands.append(Band(f"tail_bound k={k}", PASS if tail_ok else FAIL,
                                 "sum b_i m^i <= head + b_(r+1) m^(r+1)/(1-m) at r = mode"))
        if k >= 4:
            report.bands.append(Band(f"split_bound k={k}", PASS if split_ok else FAIL,
                                     "u_split_bound >= u_series"))

        n = min(ROOT_BALANCE_POINTS, min(grid["w"]))
        if n < 2:
            continue
        balance_seed = derive_seed(seed, k, n)
        points = analysis.antichain_layer(n, k, balance_seed)
        counts, statistic, pvalue = analysis.estimate_root_balance(points, trials, seed=balance_seed)
        report.rows.append({"section": "root_balance", "k": k, "points": n, "trials": trials,
                            "chi2": round(statistic, 6), "pvalue": round(pvalue, 6)})
        report.records.append(analysis.ExperimentRecord(
            "root_balance", {"k": k, "points": n, "trials": trials}, "bulk-build", balance_seed,
            metrics={"counts": counts}, derived={"chi2": statistic, "pvalue": pvalue}))
        report.bands.append(Band(f"root_balance k={k}", _stat_status(trials, pvalue > ROOT_BALANCE_ALPHA),
                                 f"chi2 = {statistic:.3f}, p = {pvalue:.4f} over {n} points"))


def run_analyze(grid: Dict, seed: int, workers: int = 1, sections: Sequence[str] = ANALYZE_SECTIONS) -> Report:
    """Проверка формул против измерений на сетке параметров"""
    report = Report()
    if "eta" in sections:
        _analyze_eta(grid, seed, report, workers)
    if "depth" in sections:
        _analyze_depth(grid, seed, report, workers)
    if "d0" in sections:
        _analyze_d0(grid, report)
    if "search" in sections:
        _analyze_search(grid, seed, report, workers)
    if "bounds" in sections:
        _analyze_bounds(grid, seed, report)
    return report


@dataclass(frozen=True)
class BenchCell:
    kind: str
    k: int
    n: int
    mode: str
    seed_index: int


def _bench_cell(seed: int) -> Callable[[BenchCell], analysis.ExperimentRecord]:
    def run(cell: BenchCell) -> analysis.ExperimentRecord:
        spec = GeneratorSpec(GeneratorKind(cell.kind), n=cell.n, k=cell.k,
                             seed=derive_seed(seed, STREAM_GENERATOR, cell.seed_index))
        points = generate_checked(spec)
        engine_seed = derive_seed(seed, cell.seed_index)
        assignment, elapsed = analysis.timed(run_mode, points, Mode(cell.mode), seed=engine_seed)
        return record("bench", spec.as_dict(), cell.mode, engine_seed, assignment, elapsed)
    return run


def _cell_values(rec: analysis.ExperimentRecord) -> Dict:
    return {
        "comparisons": rec.metrics["coordinate_comparisons"],
        "orthant_evaluations": rec.metrics["orthant_evaluations"],
        "height": rec.derived["height"],
        "width": rec.derived["width"],
        "seconds": rec.wall_time,
    }


def run_bench(grid: Dict, seed: int, workers: int = 1) -> Report:
    """Время и число сравнений по ячейкам (kind, k, n, mode); медианы по seed-ам и наклоны log-log"""
    report = Report()
    kinds = [GeneratorKind(kind).value for kind in grid["kinds"]]
    modes = [Mode(mode).value for mode in grid["modes"]]
    cells = [BenchCell(kind, k, n, mode, s)
             for kind in sorted(kinds) for k in sorted(grid["k"]) for mode in sorted(modes)
             for n in sorted(grid["n"]) for s in range(grid["seeds"][0])
             if not (kind == GeneratorKind.ANTICHAIN.value and k < 2)]
    records = _map_cells(_bench_cell(seed), cells, workers, "bench")
    report.records.extend(records)
    results = {cell: _cell_values(rec) for cell, rec in zip(cells, records)}

    groups: Dict[Tuple[str, int, str], List[Tuple[int, Dict]]] = {}
    for n_cell in sorted({(c.kind, c.k, c.mode, c.n) for c in cells}):
        kind, k, mode, n = n_cell
        runs = [results[c] for c in cells if (c.kind, c.k, c.mode, c.n) == n_cell]
        median = {key: statistics.median(r[key] for r in runs) for key in runs[0]}
        report.rows.append({
            "section": "bench", "kind": kind, "k": k, "mode": mode, "n": n, "seeds": len(runs),
            "comparisons": median["comparisons"], "orthant_evaluations": median["orthant_evaluations"],
            "height": median["height"], "width": median["width"], "seconds": round(median["seconds"], 6),
        })
        groups.setdefault((kind, k, mode), []).append((n, median))

    for (kind, k, mode), series in sorted(groups.items()):
        ns = [n for n, _ in series]
        comparisons = [max(m["comparisons"], 1) for _, m in series]
        slope = analysis.fit_loglog_slope(ns, comparisons)
        report.rows.append({"section": "fit", "kind": kind, "k": k, "mode": mode, "slope": round(slope, 6)})
        _bench_bands(report, kind, k, mode, series, slope)
    return report


def _bench_bands(report: Report, kind: str, k: int, mode: str, series: List[Tuple[int, Dict]], slope: float):
    label = f"{kind} k={k} {mode}"
    if mode == Mode.BRUTE.value:
        exact = all(m["orthant_evaluations"] == n * (n - 1) // 2 for n, m in series)
        report.bands.append(Band(f"brute_exact {label}", PASS if exact else FAIL, "orthant evaluations = n(n-1)/2"))
        return
    worst = max(m["comparisons"] / (k * n * n) for n, m in series)
    report.bands.append(Band(f"worst_case {label}", PASS if worst <= WORST_CASE_C else FAIL,
                             f"max comparisons/(k n^2) = {worst:.4f} (C = {WORST_CASE_C})"))
    if kind == GeneratorKind.CHAIN.value and len(series) >= 2:
        report.bands.append(Band(f"chain_slope {label}", PASS if slope <= CHAIN_SLOPE_MAX else FAIL,
                                 f"slope {slope:.3f} vs {CHAIN_SLOPE_MAX}"))
    if kind == GeneratorKind.ANTICHAIN.value and mode == Mode.LIST_HST.value and k >= 2 and len(series) >= 2:
        exponent = analysis.runtime_exponents(k)["arbitrary"]
        normalized = [m["comparisons"] / (k * k * n ** exponent * math.log(n)) for n, m in series]
        ok = all(b <= a * (1 + NORMALIZED_SLACK) for a, b in zip(normalized, normalized[1:]))
        report.bands.append(Band(f"arbitrary_bound {label}", PASS if ok else FAIL,
                                 f"comparisons/(k^2 n^{exponent:.3f} log n): " + ", ".join(f"{v:.3g}" for v in normalized)))


def record(name: str, spec: Dict, mode: str, seed: int, assignment: LayerAssignment, wall_time: float) -> analysis.ExperimentRecord:
    return analysis.ExperimentRecord(
        name=name, spec=spec, mode=mode, seed=seed,
        metrics=assignment.metrics.as_dict(),
        derived={"height": assignment.height, "width": assignment.width_observed},
        wall_time=wall_time,
    )


def log_bands(report: Report):
    for band in report.bands:
        log_fn = (logging.info if band.status == PASS
                  else logging.warning if band.status == INCONCLUSIVE
                  else logging.error)
        log_fn(f"{band.status:<12} {band.name}: {band.detail}")
