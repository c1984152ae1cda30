import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Union

from core import DEFAULT_SEED, STREAM_ENGINE, ContractViolation, Point, derive_rng, linear_extension
from hst import HalfSpaceTree, QueryMetrics, hst_above, hst_insert
from list_hst import ListHst, buffer_capacity, list_hst_above, list_hst_insert


class Mode(str, Enum):
    HST = "hst"
    LIST_HST = "list-hst"
    BRUTE = "brute"


LayerContainer = Union[HalfSpaceTree, ListHst]


@dataclass
class LayerAssignment:
    """Ответ MaxLayers(P): ranks[i] -- ранг слоя (с 1) для i-й входной точки"""
    ranks: List[int]
    height: int
    width_observed: int
    layer_sizes: List[int] = field(default_factory=list)
    metrics: QueryMetrics = field(default_factory=QueryMetrics)

    def layers(self) -> List[List[int]]:
        """Позиции точек, сгруппированные по слоям"""
        grouped: List[List[int]] = [[] for _ in range(self.height)]
        for i, rank in enumerate(self.ranks):
            grouped[rank - 1].append(i)
        return grouped


def assignment_from_ranks(ranks: List[int], metrics: Optional[QueryMetrics] = None) -> LayerAssignment:
    height = max(ranks, default=0)
    sizes = [0] * height
    for rank in ranks:
        sizes[rank - 1] += 1
    return LayerAssignment(ranks=ranks, height=height, width_observed=max(sizes, default=0),
                           layer_sizes=sizes, metrics=metrics or QueryMetrics())


class LayerStore:
    """Упорядоченная последовательность слоёв; новый слой добавляется только в конец"""

    def __init__(self, k: int, mode: Mode = Mode.LIST_HST, n_total: int = 0,
                 seed: int = DEFAULT_SEED, check_invariants: bool = False):
        if mode not in (Mode.HST, Mode.LIST_HST):
            raise ContractViolation(f"layer store supports hst and list-hst modes, got {mode}")
        self.k = k
        self.mode = mode
        self.seed = seed
        self.capacity = buffer_capacity(n_total)
        self.check_invariants = check_invariants
        self.layers: List[LayerContainer] = []

    def __len__(self):
        return len(self.layers)

    def _make_layer(self) -> LayerContainer:
        rng = derive_rng(self.seed, STREAM_ENGINE, len(self.layers))
        if self.mode == Mode.HST:
            return HalfSpaceTree(self.k, rng=rng, check_invariants=self.check_invariants)
        return ListHst(self.k, self.capacity, rng=rng, check_invariants=self.check_invariants)

    def above(self, i: int, p: Point, metrics: QueryMetrics) -> bool:
        """Above для слоя с номером i (0-based)"""
        metrics.above_calls += 1
        layer = self.layers[i]
        if self.mode == Mode.HST:
            return hst_above(layer, p, metrics)
        return list_hst_above(layer, p, metrics)

    def insert(self, i: int, p: Point, metrics: QueryMetrics):
        layer = self.layers[i]
        if self.mode == Mode.HST:
            hst_insert(layer, p, metrics)
        else:
            list_hst_insert(layer, p, metrics)

    def append_layer(self, p: Point, metrics: QueryMetrics) -> int:
        self.layers.append(self._make_layer())
        self.insert(len(self.layers) - 1, p, metrics)
        logging.debug(f"Layer {len(self.layers)} created by point {p.index}")
        return len(self.layers)


def layer_search(store: LayerStore, p: Point, metrics: Optional[QueryMetrics] = None) -> Optional[int]:
    """Бинарный поиск первого слоя (с 1), который не выше p; None -- все слои выше p"""
    if metrics is None:
        metrics = QueryMetrics()
    lo, hi = 0, len(store.layers)
    while lo < hi:
        mid = (lo + hi) // 2
        if store.above(mid, p, metrics):
            lo = mid + 1
        else:
            hi = mid
    if lo == len(store.layers):
        return None
    return lo + 1


def deduplicate(points: Sequence[Point]) -> Dict[int, int]:
    """Позиция точки -> позиция её представителя (первая из равных векторов)"""
    order = sorted(range(len(points)), key=lambda i: (points[i].coords, i))
    representative: Dict[int, int] = {}
    prev = None
    for i in order:
        if prev is not None and points[prev].coords == points[i].coords:
            representative[i] = representative[prev]
        else:
            representative[i] = i
        prev = i
    return representative


def max_partition(points: Sequence[Point], mode: Mode = Mode.LIST_HST, seed: int = DEFAULT_SEED,
                  check_invariants: bool = False) -> LayerAssignment:
    """Разбиение точек на максимальные слои (MaxPartition)"""
    mode = Mode(mode)
    metrics = QueryMetrics()
    if not points:
        return assignment_from_ranks([], metrics)

    k = len(points[0].coords)
    representative = deduplicate(points)
    unique = sorted({r for r in representative.values()})
    unique_points = [points[i] for i in unique]
    store = LayerStore(k, mode, n_total=len(points), seed=seed, check_invariants=check_invariants)

    rank_of: Dict[int, int] = {}
    for pos in linear_extension(unique_points):
        p = unique_points[pos]
        found = layer_search(store, p, metrics)
        if found is None:
            rank = store.append_layer(p, metrics)
        else:
            store.insert(found - 1, p, metrics)
            rank = found
        if unique[pos] in rank_of:
            raise ContractViolation(f"point {p.index} was placed twice")
        rank_of[unique[pos]] = rank

    ranks = [rank_of[representative[i]] for i in range(len(points))]
    logging.debug(f"MaxPartition ({mode.value}): n={len(points)}, unique={len(unique)}, h={len(store)}")
    return assignment_from_ranks(ranks, metrics)
