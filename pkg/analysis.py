import logging
import math
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from core import STREAM_TRIALS, ContractViolation, Point, derive_np_rng, derive_rng
from hst import QueryMetrics, hst_above
from list_hst import ListHst, buffer_capacity, bulk_build, list_hst_above, list_hst_insert
from log_progress import print_progress
from oracle_gen import GeneratorKind, GeneratorSpec, generate


@dataclass
class DepthProfile:
    """Ожидаемое число узлов HST на каждой глубине после w вставок"""
    k: int
    w: int
    values: List[float]

    @property
    def mass(self) -> float:
        return float(sum(self.values))

    def argmax(self) -> int:
        return max(range(len(self.values)), key=lambda d: self.values[d]) if self.values else 0

    def is_unimodal(self, rel_tol: float = 1e-12) -> bool:
        values = self.values
        peak = self.argmax()
        for d in range(peak):
            if values[d] > values[d + 1] * (1 + rel_tol):
                return False
        for d in range(peak, len(values) - 1):
            if values[d + 1] > values[d] * (1 + rel_tol):
                return False
        return True


@dataclass
class ExperimentRecord:
    """Запись эксперимента: воспроизводима по (spec, mode, seed)"""
    name: str
    spec: Dict
    mode: str
    seed: int
    metrics: Dict = field(default_factory=dict)
    derived: Dict = field(default_factory=dict)
    wall_time: float = 0.0

    def as_dict(self) -> Dict:
        return {
            "name": self.name,
            "spec": self.spec,
            "mode": self.mode,
            "seed": self.seed,
            "metrics": self.metrics,
            "derived": self.derived,
            "wall_time": round(self.wall_time, 6),
        }


def depth_profile(w: int, k: int, exact: bool = False) -> DepthProfile:
    """a(w, d) по рекуррентности
    a(w,d) = a(w-1,d-1)/k^(d-1) + (1 - 1/k^d) a(w-1,d),  a(w,0) = 1 при w >= 1.

    exact=True считает в рациональных числах (для малых w), иначе numpy, O(w^2).
    """
    if w < 0 or k < 1:
        raise ContractViolation(f"invalid depth profile arguments w={w}, k={k}")
    if w == 0:
        return DepthProfile(k, w, [])
    if exact:
        inv = [Fraction(1, k ** d) for d in range(w)]
        a = [Fraction(0)] * w
        for _ in range(w):
            a = [Fraction(1)] + [a[d - 1] * inv[d - 1] + (1 - inv[d]) * a[d] for d in range(1, w)]
        return DepthProfile(k, w, a)

    inv = np.power(float(k), -np.arange(w, dtype=np.float64))
    a = np.zeros(w)
    for _ in range(w):
        nxt = np.empty(w)
        nxt[0] = 1.0
        nxt[1:] = a[:-1] * inv[:-1] + (1.0 - inv[1:]) * a[1:]
        a = nxt
    return DepthProfile(k, w, a.tolist())


def d0_scan(w_max: int, k: int) -> List[Tuple[int, int]]:
    """Мода a(w, ·) для всех w = 1..w_max за один проход рекуррентности"""
    if w_max < 1 or k < 1:
        raise ContractViolation(f"invalid scan arguments w_max={w_max}, k={k}")
    inv = np.power(float(k), -np.arange(w_max, dtype=np.float64))
    a = np.zeros(w_max)
    modes = []
    for w in range(1, w_max + 1):
        nxt = np.empty(w_max)
        nxt[0] = 1.0
        nxt[1:] = a[:-1] * inv[:-1] + (1.0 - inv[1:]) * a[1:]
        a = nxt
        modes.append((w, int(a.argmax())))
    return modes


def depth_profile_closed_form(w: int, d: int, k: int) -> float:
    """Замкнутая форма a(w, d).

    Знакопеременная сумма теряет точность в float, поэтому считается в рациональных числах.
    """
    if w <= d:
        return 0.0
    if d == 0:
        return 1.0
    total = Fraction(0)
    for i in range(1, d + 1):
        denom = Fraction(1)
        for j in range(1, d + 1):
            if j != i:
                denom *= 1 - Fraction(k) ** (j - i)
        total += (1 - Fraction(1, k ** i)) ** (w - 1) / denom
    return float(k ** d * (1 - total))


def eta1(k: int) -> float:
    """Вероятность p[j] > q[j] для пары в порядке убывания μ (формула статьи)"""
    return 1.0 - 0.5 * (k - 1) / (k + 1)


def eta2(k: int) -> float:
    """То же для несравнимых пар (формула статьи)"""
    return 1.0 - 1.0 / k - 0.5 * (k - 2) / (k + 2)


def eta1_exact(k: int) -> float:
    """Точное значение для равномерных точек.

    Формула статьи считает q[j] равномерной на [0, μ(q)], хотя с вероятностью
    1/k q[j] = μ(q); с учётом этого получается 1/k + (1 - 1/k)/2.
    """
    return (k + 1) / (2 * k)


def eta2_exact(k: int) -> float:
    """Точное значение для несравнимых пар: исключаем события p ≻ q (вероятность 2^(1-k) при μ(p) > μ(q))"""
    dominated = 2.0 ** (1 - k)
    if dominated >= 1.0:
        return float("nan")
    return (eta1_exact(k) - dominated) / (1.0 - dominated)


@dataclass
class EtaEstimate:
    k: int
    trials: int
    eta1: float
    eta1_stderr: float
    eta2: float
    eta2_stderr: float
    incomparable_pairs: int


def _bernoulli(hits: np.ndarray) -> Tuple[float, float]:
    if hits.size == 0:
        return float("nan"), float("nan")
    p = float(hits.mean())
    return p, math.sqrt(p * (1.0 - p) / hits.size)


def estimate_eta(k: int, trials: int, seed: int, ordered: bool = True, j: int = 0) -> EtaEstimate:
    """Монте-Карло оценки η1 (все пары) и η2 (несравнимые пары) по координате j.

    ordered=False -- пары без упорядочивания по μ (ожидается 1/2).
    """
    if trials < 1:
        raise ContractViolation(f"trials must be >= 1, got {trials}")
    rng = derive_np_rng(seed, STREAM_TRIALS)
    p = rng.random((trials, k))
    q = rng.random((trials, k))
    if ordered:
        mu_p, mu_q = p.max(axis=1), q.max(axis=1)
        differs = p != q
        first_diff = differs.argmax(axis=1)
        rows = np.arange(trials)
        q_lex_greater = differs.any(axis=1) & (q[rows, first_diff] > p[rows, first_diff])
        swap = (mu_q > mu_p) | ((mu_q == mu_p) & q_lex_greater)
        p, q = np.where(swap[:, None], q, p), np.where(swap[:, None], p, q)

    hits = p[:, j] > q[:, j]
    p_dom = np.all(p >= q, axis=1) & np.any(p > q, axis=1)
    q_dom = np.all(q >= p, axis=1) & np.any(q > p, axis=1)
    incomparable = ~(p_dom | q_dom)
    e1, s1 = _bernoulli(hits)
    e2, s2 = _bernoulli(hits[incomparable])
    return EtaEstimate(k, trials, e1, s1, e2, s2, int(incomparable.sum()))


def u_bound_exponent(k: int) -> float:
    """Показатель w в оценке неуспешного поиска; log в 1/log k берётся по основанию 2"""
    if k < 2:
        raise ContractViolation(f"exponent requires k >= 2, got {k}")
    return 1.0 - 1.0 / math.log2(k) + math.log(1.0 + 2.0 / (k + 1)) / math.log(k)


def d0_bound(w: int, k: int) -> float:
    if w < 1 or k < 2:
        raise ContractViolation(f"d0 bound requires w >= 1 and k >= 2, got w={w}, k={k}")
    return math.log(w) / math.log(k) + 2.0


def list_search_exponent(k: int) -> float:
    """Показатель w для поиска в List-HST: log_k(k-1)/2"""
    if k < 2:
        raise ContractViolation(f"exponent requires k >= 2, got {k}")
    return math.log(k - 1) / math.log(k) / 2.0


def runtime_exponents(k: int) -> Dict[str, float]:
    """Показатели n в ожидаемом времени: случайный порядок и произвольный вход"""
    return {
        "random_order": 1.0 + u_bound_exponent(k),
        "arbitrary": 1.5 + list_search_exponent(k),
    }


def u_series(profile: DepthProfile, eta: Optional[float] = None) -> float:
    """Σ_d η^d a(w,d); по умолчанию η = η1(k) из статьи"""
    if eta is None:
        eta = eta1(profile.k)
    total = 0.0
    weight = 1.0
    for value in profile.values:
        total += weight * value
        weight *= eta
        if weight == 0.0:
            break
    return total


def lemma4_tail(b: Sequence[float], m: float, r: int) -> Tuple[float, float]:
    """(Σ b_i m^i, Σ_{i<=r} b_i m^i + b_{r+1} m^(r+1)/(1-m)) для невозрастающего с r хвоста"""
    if not 0.0 <= m < 1.0:
        raise ContractViolation(f"m must be in [0, 1), got {m}")
    if r < 0:
        raise ContractViolation(f"r must be >= 0, got {r}")
    for i in range(r, len(b) - 1):
        if b[i] < b[i + 1]:
            raise ContractViolation(f"sequence increases at index {i}: {b[i]} < {b[i + 1]}")
    exact = sum(bi * m ** i for i, bi in enumerate(b))
    head = sum(bi * m ** i for i, bi in enumerate(b[:r + 1]))
    tail = b[r + 1] * m ** (r + 1) / (1.0 - m) if r + 1 < len(b) else 0.0
    return exact, head + tail


def split_tail_bound(b: Sequence[float], r: int, k: int) -> float:
    """Σ_{i<=r} b_i m^i + (7/3) b_{r+1} m^r при m = η1(k), k >= 4"""
    if k < 4:
        raise ContractViolation(f"the 7/3 tail constant requires k >= 4, got {k}")
    m = eta1(k)
    head = sum(bi * m ** i for i, bi in enumerate(b[:r + 1]))
    tail = 7.0 / 3.0 * b[r + 1] * m ** r if r + 1 < len(b) else 0.0
    return head + tail


def u_split_bound(profile: DepthProfile) -> float:
    """Оценка u(w) с разбиением по моде d0 профиля (верна при k >= 4)"""
    d0 = profile.argmax()
    return split_tail_bound(profile.values, d0, profile.k)


def fit_loglog_slope(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Наклон прямой МНК в координатах log-log"""
    if len(xs) < 2:
        return float("nan")
    slope, _ = np.polyfit(np.log(np.asarray(xs, dtype=float)), np.log(np.asarray(ys, dtype=float)), 1)
    return float(slope)


def antichain_layer(w: int, k: int, seed: int) -> List[Point]:
    """Слой из w попарно несравнимых точек (гиперплоскость Σ = const)"""
    return generate(GeneratorSpec(GeneratorKind.ANTICHAIN, n=w, k=k, seed=seed))


@dataclass
class DepthHistogram:
    k: int
    w: int
    seeds: int
    mean: List[float]
    stderr: List[float]
    model: List[float]

    def z_scores(self, max_depth: Optional[int] = None) -> List[float]:
        depth = len(self.mean) if max_depth is None else min(max_depth + 1, len(self.mean))
        scores = []
        for d in range(depth):
            model = self.model[d] if d < len(self.model) else 0.0
            diff = self.mean[d] - model
            if self.stderr[d] > 0:
                scores.append(diff / self.stderr[d])
            else:
                scores.append(0.0 if abs(diff) < 1e-9 else math.inf)
        return scores


def measure_depth_histogram(k: int, w: int, seeds: int, seed: int) -> DepthHistogram:
    """Средние числа узлов по глубинам у HST из w несравнимых точек в случайном порядке"""
    counts = np.zeros((seeds, w))
    for trial in print_progress(range(seeds), total_tasks=seeds, label=f"depth histogram k={k} w={w}"):
        points = antichain_layer(w, k, seed=int(derive_rng(seed, STREAM_TRIALS, trial).getrandbits(63)))
        tree = bulk_build(points, k, derive_rng(seed, STREAM_TRIALS, trial, 1))
        depth_counts = tree.depth_counts()
        counts[trial, :len(depth_counts)] = depth_counts
    mean = counts.mean(axis=0)
    stderr = counts.std(axis=0, ddof=1) / math.sqrt(seeds) if seeds > 1 else np.zeros(w)
    model = depth_profile(w, k).values
    return DepthHistogram(k, w, seeds, mean.tolist(), stderr.tolist(), model)


def _queries(layer: np.ndarray, count: int, rng: np.random.Generator, max_rounds: int = 1000) -> np.ndarray:
    """Равномерные точки [0,1]^k, не доминируемые ни одной точкой слоя (отбраковка)"""
    k = layer.shape[1]
    accepted: List[np.ndarray] = []
    for _ in range(max_rounds):
        if len(accepted) >= count:
            break
        candidate = rng.random(k)
        dominated = np.any(np.all(layer >= candidate, axis=1) & np.any(layer > candidate, axis=1))
        if not dominated:
            accepted.append(candidate)
    if len(accepted) < count:
        logging.warning(f"Only {len(accepted)}/{count} non-dominated queries found")
    return np.asarray(accepted).reshape(-1, k)


@dataclass
class SearchCost:
    k: int
    w: int
    queries: int
    mean_visits: float
    stderr: float
    series: float
    max_fanout: int = 0


def measure_unsuccessful_search(k: int, ws: Sequence[int], queries: int, seeds: int, seed: int) -> List[SearchCost]:
    """Эмпирическое u(w): число узлов, посещённых Above при отсутствии доминирующей точки"""
    results = []
    for w in ws:
        visits: List[int] = []
        for trial in range(seeds):
            layer_seed = int(derive_rng(seed, STREAM_TRIALS, w, trial).getrandbits(63))
            points = antichain_layer(w, k, layer_seed)
            tree = bulk_build(points, k, derive_rng(seed, STREAM_TRIALS, w, trial, 1))
            layer = np.array([p.coords for p in points])
            for query in _queries(layer, queries, derive_np_rng(seed, STREAM_TRIALS, w, trial, 2)):
                metrics = QueryMetrics()
                if hst_above(tree, Point(tuple(float(c) for c in query)), metrics):
                    raise ContractViolation(f"query {query} reported as dominated")
                visits.append(metrics.nodes_visited)
        arr = np.asarray(visits, dtype=float)
        stderr = float(arr.std(ddof=1) / math.sqrt(arr.size)) if arr.size > 1 else 0.0
        series = u_series(depth_profile(w, k))
        results.append(SearchCost(k, w, int(arr.size), float(arr.mean()) if arr.size else float("nan"),
                                  stderr, series))
        logging.debug(f"u(w) k={k} w={w}: mean visits {results[-1].mean_visits:.2f}, series {series:.2f}")
    return results


def measure_list_hst_search(k: int, n: int, queries: int, seed: int) -> SearchCost:
    """Неуспешный поиск в List-HST, заполненном антицепью из n точек в случайном порядке.

    series -- оценка с вероятностью спуска (k-1)/k: число HST × Σ ((k-1)/k)^d a(m,d) + размер буфера.
    """
    points = antichain_layer(n, k, seed)
    rng = derive_rng(seed, STREAM_TRIALS)
    order = list(points)
    rng.shuffle(order)
    layer = ListHst(k, buffer_capacity(n), rng=derive_rng(seed, STREAM_TRIALS, 1))
    for p in order:
        list_hst_insert(layer, p)
    coords = np.array([p.coords for p in points])
    metrics = QueryMetrics()
    visits = []
    for query in _queries(coords, queries, derive_np_rng(seed, STREAM_TRIALS, 2)):
        before = metrics.nodes_visited
        if list_hst_above(layer, Point(tuple(float(c) for c in query)), metrics):
            raise ContractViolation(f"query {query} reported as dominated")
        visits.append(metrics.nodes_visited - before)
    arr = np.asarray(visits, dtype=float)
    tree_size = layer.capacity + 1
    per_tree = u_series(depth_profile(tree_size, k), eta=(k - 1) / k) if k > 1 else float(tree_size)
    series = len(layer.trees) * per_tree
    stderr = float(arr.std(ddof=1) / math.sqrt(arr.size)) if arr.size > 1 else 0.0
    return SearchCost(k, n, int(arr.size), float(arr.mean()) if arr.size else float("nan"), stderr, series,
                      metrics.max_fanout)


def estimate_root_balance(points: Sequence[Point], seeds: int, seed: int) -> Tuple[List[int], float, float]:
    """Частоты выбора каждой точки корнем при bulk_build; (частоты, χ², p-value)"""
    if not points:
        raise ContractViolation("root balance needs at least one point")
    k = len(points[0].coords)
    position = {p.coords: i for i, p in enumerate(points)}
    counts = [0] * len(points)
    for trial in range(seeds):
        tree = bulk_build(points, k, derive_rng(seed, STREAM_TRIALS, trial))
        counts[position[tree.root.point.coords]] += 1
    result = stats.chisquare(counts)
    return counts, float(result.statistic), float(result.pvalue)


def timed(fn, *args, **kwargs):
    """(результат, секунды)"""
    started = time.perf_counter()
    result = fn(*args, **kwargs)
    return result, time.perf_counter() - started
