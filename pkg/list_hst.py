import math
import random
from typing import List, Optional, Sequence

from core import ContractViolation, Point, dominates
from hst import HalfSpaceTree, QueryMetrics, hst_above, hst_insert


def buffer_capacity(n: int) -> int:
    """Порог буфера R: max(1, ceil(sqrt(n))), n -- размер всего набора"""
    return 1 if n <= 1 else math.isqrt(n - 1) + 1


def bulk_build(points: Sequence[Point], k: int, rng: random.Random,
               check_invariants: bool = False, metrics: Optional[QueryMetrics] = None) -> HalfSpaceTree:
    """Построение HST из случайной перестановки точек: первая -- корень, остальные вставляются по очереди"""
    order = list(points)
    rng.shuffle(order)
    tree = HalfSpaceTree(k, rng=random.Random(rng.getrandbits(64)), check_invariants=check_invariants)
    for p in order:
        hst_insert(tree, p, metrics)
    return tree


class ListHst:
    """Слой как список HST плюс буфер R ещё не собранных точек"""

    def __init__(self, k: int, capacity: int, rng: Optional[random.Random] = None,
                 check_invariants: bool = False):
        if capacity < 1:
            raise ContractViolation(f"buffer capacity must be >= 1, got {capacity}")
        self.k = k
        self.capacity = capacity
        self.rng = rng if rng is not None else random.Random(0)
        self.check_invariants = check_invariants
        self.trees: List[HalfSpaceTree] = []
        self.buffer: List[Point] = []
        self.size = 0

    def __len__(self):
        return self.size

    def points(self) -> List[Point]:
        stored = [p for tree in self.trees for p in tree.points()]
        return stored + list(self.buffer)

    def dump(self) -> List[str]:
        """Дамп всех деревьев (префикс -- номер дерева) и буфера"""
        lines = []
        for i, tree in enumerate(self.trees):
            lines.extend(tree.dump(prefix=f"{i}: "))
        for p in self.buffer:
            lines.append("R: " + " ".join(repr(c) for c in p.coords))
        return lines


def list_hst_insert(layer: ListHst, p: Point, metrics: Optional[QueryMetrics] = None) -> None:
    if len(p.coords) != layer.k:
        raise ContractViolation(f"dimension mismatch: layer has k={layer.k}, point {p.index} has k={len(p.coords)}")
    if layer.check_invariants:
        for q in layer.points():
            if dominates(q, p) or dominates(p, q):
                raise ContractViolation(
                    f"point {p.index} {p.coords} is comparable with stored point {q.index} {q.coords}")
    layer.size += 1
    if len(layer.buffer) < layer.capacity:
        layer.buffer.append(p)
        return
    batch = layer.buffer + [p]
    layer.trees.append(bulk_build(batch, layer.k, layer.rng, metrics=metrics))
    layer.buffer = []


def list_hst_above(layer: ListHst, p: Point, metrics: Optional[QueryMetrics] = None) -> bool:
    """Сначала поиск в каждом HST списка, затем линейный проход по буферу"""
    if metrics is None:
        metrics = QueryMetrics()
    if len(p.coords) != layer.k:
        raise ContractViolation(f"dimension mismatch: layer has k={layer.k}, point {p.index} has k={len(p.coords)}")
    for tree in layer.trees:
        if hst_above(tree, p, metrics):
            return True
    for q in layer.buffer:
        metrics.count_orthant(layer.k)
        if dominates(q, p):
            return True
    return False
