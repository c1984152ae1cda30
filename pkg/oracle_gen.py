import itertools
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence

import numpy as np

from core import DEFAULT_SEED, STREAM_GENERATOR, ContractViolation, Point, derive_np_rng, dominates, linear_extension
from hst import QueryMetrics
from layer_engine import LayerAssignment, assignment_from_ranks
from points_io import read_points

GRID_LATTICE_LIMIT = 1 << 20


class GeneratorKind(str, Enum):
    RANDOM_ORDER = "random"
    CHAIN = "chain"
    ANTICHAIN = "antichain"
    DUPLICATES = "duplicates"
    GRID = "grid"
    FILE = "file"


@dataclass(frozen=True)
class GeneratorSpec:
    """Описание генерируемого набора; seed входит во все выходные записи"""
    kind: GeneratorKind
    n: int = 0
    k: int = 2
    seed: int = DEFAULT_SEED
    params: Dict = field(default_factory=dict, hash=False)

    def __post_init__(self):
        object.__setattr__(self, "kind", GeneratorKind(self.kind))
        if self.n < 0 or self.k < 1:
            raise ContractViolation(f"invalid generator shape n={self.n}, k={self.k}")

    def describe(self) -> str:
        extra = "".join(f",{key}={value}" for key, value in sorted(self.params.items()))
        return f"{self.kind.value},{self.n},{self.k}{extra}"

    def as_dict(self) -> Dict:
        return {"kind": self.kind.value, "n": self.n, "k": self.k, "seed": self.seed, **self.params}


def _to_points(rows) -> List[Point]:
    return [Point(tuple(float(c) for c in row), i) for i, row in enumerate(rows)]


def grid_lattice(side: int, k: int) -> List[Point]:
    """Все точки решётки {0, 1/(side-1), ..., 1}^k"""
    if side < 2:
        raise ContractViolation(f"grid side must be >= 2, got {side}")
    step = [i / (side - 1) for i in range(side)]
    return _to_points(itertools.product(step, repeat=k))


def _antichain(n: int, k: int, rng: np.random.Generator) -> List[Point]:
    # целые векторы с одинаковой суммой попарно несравнимы; деление на общий масштаб сохраняет порядок
    if k == 1:
        raise ContractViolation("ANTICHAIN requires k >= 2")
    i = np.arange(1, n + 1, dtype=np.int64)
    extra = [rng.permutation(n).astype(np.int64) for _ in range(k - 2)]
    total = n + (k - 2) * max(n - 1, 0)
    second = total - i - sum(extra, np.zeros(n, dtype=np.int64))
    columns = [i, second] + extra
    scale = float(total) if total > 0 else 1.0
    return _to_points(zip(*[col / scale for col in columns]))


def generate(spec: GeneratorSpec) -> List[Point]:
    """Генерация набора точек по спецификации.

    GRID по умолчанию перечисляет всю решётку side^k в перемешанном порядке
    (n > 0 оставляет первые n различных узлов); mode=sample выбирает n узлов с повторами.
    """
    rng = derive_np_rng(spec.seed, STREAM_GENERATOR)
    n, k = spec.n, spec.k
    kind = spec.kind
    if kind == GeneratorKind.RANDOM_ORDER:
        return _to_points(rng.random((n, k)))
    if kind == GeneratorKind.CHAIN:
        return _to_points([(i / n,) * k for i in range(1, n + 1)])
    if kind == GeneratorKind.ANTICHAIN:
        return _antichain(n, k, rng)
    if kind == GeneratorKind.DUPLICATES:
        multiplicity = int(spec.params.get("multiplicity", 3))
        if multiplicity < 1:
            raise ContractViolation(f"multiplicity must be >= 1, got {multiplicity}")
        base = rng.random((-(-n // multiplicity), k))
        rows = np.repeat(base, multiplicity, axis=0)[:n]
        return _to_points(rows[rng.permutation(n)])
    if kind == GeneratorKind.GRID:
        side = int(spec.params.get("side", 3))
        if side < 2:
            raise ContractViolation(f"grid side must be >= 2, got {side}")
        grid_mode = spec.params.get("mode", "exhaustive")
        if grid_mode == "sample":
            return _to_points(rng.integers(0, side, size=(n, k)) / (side - 1))
        if grid_mode != "exhaustive":
            raise ContractViolation(f"grid mode must be exhaustive or sample, got {grid_mode!r}")
        if side ** k > GRID_LATTICE_LIMIT:
            raise ContractViolation(f"lattice {side}^{k} exceeds {GRID_LATTICE_LIMIT} points; use mode=sample")
        lattice = grid_lattice(side, k)
        order = rng.permutation(len(lattice))
        if 0 < n < len(lattice):
            order = order[:n]
        return _to_points(lattice[i].coords for i in order)
    if kind == GeneratorKind.FILE:
        path = spec.params.get("path")
        if not path:
            raise ContractViolation("FILE generator requires params.path")
        points, _ = read_points(path)
        return points
    raise ContractViolation(f"unknown generator kind {kind}")


def oracle_layers(points: Sequence[Point], metrics: Optional[QueryMetrics] = None) -> LayerAssignment:
    """Точные ранги динамикой по линейному расширению: rank(p) = 1 + max rank доминирующих.

    Выполняет ровно n(n-1)/2 проверок доминирования.
    """
    if metrics is None:
        metrics = QueryMetrics()
    order = linear_extension(points)
    k = len(points[0].coords) if points else 0
    ranks = [0] * len(points)
    for t, i in enumerate(order):
        p = points[i]
        best = 0
        for s in range(t):
            j = order[s]
            metrics.count_orthant(k)
            if dominates(points[j], p) and ranks[j] > best:
                best = ranks[j]
        ranks[i] = best + 1
    return assignment_from_ranks(ranks, metrics)


def peeling_layers(points: Sequence[Point]) -> LayerAssignment:
    """Независимый оракул: последовательное снятие недоминируемых множеств по счётчикам доминирования"""
    n = len(points)
    dominated_by = [0] * n
    dominated: List[List[int]] = [[] for _ in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            if dominates(points[i], points[j]):
                dominated[i].append(j)
                dominated_by[j] += 1
            elif dominates(points[j], points[i]):
                dominated[j].append(i)
                dominated_by[i] += 1

    ranks = [0] * n
    front = [i for i in range(n) if dominated_by[i] == 0]
    rank = 1
    while front:
        next_front = []
        for i in front:
            ranks[i] = rank
            for j in dominated[i]:
                dominated_by[j] -= 1
                if dominated_by[j] == 0:
                    next_front.append(j)
        front = next_front
        rank += 1
    return assignment_from_ranks(ranks)
