import logging
import random
from dataclasses import dataclass, field
from typing import Iterator, List, Optional, Tuple

from core import ContractViolation, Point, dominates


@dataclass
class QueryMetrics:
    """Счётчики стоимости запросов и вставок"""
    nodes_visited: int = 0
    orthant_evaluations: int = 0
    coordinate_comparisons: int = 0
    above_calls: int = 0
    # максимальное число непустых слотов, в которые спустился поиск из одного узла
    max_fanout: int = 0

    def count_orthant(self, k: int):
        self.orthant_evaluations += 1
        self.coordinate_comparisons += k

    def merge(self, other: "QueryMetrics") -> "QueryMetrics":
        self.nodes_visited += other.nodes_visited
        self.orthant_evaluations += other.orthant_evaluations
        self.coordinate_comparisons += other.coordinate_comparisons
        self.above_calls += other.above_calls
        self.max_fanout = max(self.max_fanout, other.max_fanout)
        return self

    def as_dict(self) -> dict:
        return {
            "nodes_visited": self.nodes_visited,
            "orthant_evaluations": self.orthant_evaluations,
            "coordinate_comparisons": self.coordinate_comparisons,
            "above_calls": self.above_calls,
            "max_fanout": self.max_fanout,
        }


@dataclass
class HstNode:
    point: Point
    children: List[Optional["HstNode"]] = field(default_factory=list)


class HalfSpaceTree:
    """k-арное дерево полупространств над точками одного слоя.

    Узел q в слоте j узла p удовлетворяет q[j] <= p[j]. Все точки дерева
    попарно несравнимы; это гарантирует вызывающий код (проверяется
    линейным проходом при check_invariants=True).
    """

    def __init__(self, k: int, rng: Optional[random.Random] = None, check_invariants: bool = False):
        if k < 1:
            raise ContractViolation(f"k must be >= 1, got {k}")
        self.k = k
        self.rng = rng if rng is not None else random.Random(0)
        self.check_invariants = check_invariants
        self.root: Optional[HstNode] = None
        self.size = 0
        self.height = -1

    def __len__(self):
        return self.size

    def _new_node(self, p: Point) -> HstNode:
        return HstNode(p, [None] * self.k)

    def walk(self) -> Iterator[Tuple[int, Tuple[int, ...], HstNode]]:
        """Обход в глубину: (глубина, путь из номеров слотов 0-based, узел)"""
        if self.root is None:
            return
        stack = [(0, (), self.root)]
        while stack:
            depth, path, node = stack.pop()
            yield depth, path, node
            for j in range(self.k - 1, -1, -1):
                child = node.children[j]
                if child is not None:
                    stack.append((depth + 1, path + (j,), child))

    def points(self) -> List[Point]:
        return [node.point for _, _, node in self.walk()]

    def depth_counts(self) -> List[int]:
        """Число узлов на каждой глубине"""
        counts = [0] * (self.height + 1)
        for depth, _, _ in self.walk():
            counts[depth] += 1
        return counts

    def structure_violations(self) -> List[Tuple[Point, Point, int]]:
        """Рёбра (родитель, ребёнок, слот), где ребёнок в слоте j лежит выше родителя по j"""
        bad = []
        for _, _, node in self.walk():
            for j, child in enumerate(node.children):
                if child is not None and child.point.coords[j] > node.point.coords[j]:
                    bad.append((node.point, child.point, j))
        return bad

    def dump(self, prefix: str = "") -> List[str]:
        """Отладочный дамп: одна строка на узел, "depth, slot-path, coordinates" (слоты 1-based)"""
        lines = []
        for depth, path, node in self.walk():
            slot_path = ".".join(str(j + 1) for j in path) or "-"
            coords = " ".join(repr(c) for c in node.point.coords)
            lines.append(f"{prefix}{depth}, {slot_path}, {coords}")
        return lines


def hst_above(tree: HalfSpaceTree, p: Point, metrics: Optional[QueryMetrics] = None) -> bool:
    """Есть ли в дереве точка, строго доминирующая p"""
    if metrics is None:
        metrics = QueryMetrics()
    k = tree.k
    if len(p.coords) != k:
        raise ContractViolation(f"dimension mismatch: tree has k={k}, point {p.index} has k={len(p.coords)}")
    if tree.root is None:
        return False
    pc = p.coords
    stack = [tree.root]
    while stack:
        node = stack.pop()
        metrics.nodes_visited += 1
        metrics.orthant_evaluations += 1
        metrics.coordinate_comparisons += k
        rc = node.point.coords
        # слот j -- кандидат, если бит j ортанта O(r, p) равен 0, т.е. p[j] <= r[j]
        slots = [j for j in range(k) if pc[j] <= rc[j]]
        if len(slots) == k and rc != pc:
            return True
        entered = 0
        for j in reversed(slots):
            child = node.children[j]
            if child is not None:
                stack.append(child)
                entered += 1
        if entered > metrics.max_fanout:
            metrics.max_fanout = entered
    return False


def hst_insert(tree: HalfSpaceTree, p: Point, metrics: Optional[QueryMetrics] = None) -> int:
    """Вставка точки слоя; слот на каждом уровне выбирается равновероятно из S_r.

    Возвращает глубину нового узла.
    """
    k = tree.k
    if len(p.coords) != k:
        raise ContractViolation(f"dimension mismatch: tree has k={k}, point {p.index} has k={len(p.coords)}")
    if tree.check_invariants:
        for q in tree.points():
            if dominates(q, p) or dominates(p, q):
                raise ContractViolation(
                    f"point {p.index} {p.coords} is comparable with stored point {q.index} {q.coords}")

    tree.size += 1
    if tree.root is None:
        tree.root = tree._new_node(p)
        tree.height = max(tree.height, 0)
        return 0

    pc = p.coords
    node = tree.root
    depth = 0
    while True:
        if metrics is not None:
            metrics.nodes_visited += 1
            metrics.count_orthant(k)
        rc = node.point.coords
        slots = [j for j in range(k) if pc[j] <= rc[j]]
        if not slots:
            tree.size -= 1
            raise ContractViolation(f"point {p.index} {pc} dominates stored point {node.point.index} {rc}")
        j = slots[0] if len(slots) == 1 else tree.rng.choice(slots)
        depth += 1
        child = node.children[j]
        if child is None:
            node.children[j] = tree._new_node(p)
            if depth > tree.height:
                tree.height = depth
                logging.debug(f"HST height grew to {depth} (size {tree.size})")
            return depth
        node = child
