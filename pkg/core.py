import math
import random
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

DEFAULT_SEED = 20240611


class MaxLayersError(Exception):
    """Базовое исключение библиотеки"""


class ContractViolation(MaxLayersError):
    """Нарушение предусловия операции (размерность, сравнимые точки в одном слое и т.п.)"""


class IngestionError(MaxLayersError, ValueError):
    """Ошибка разбора входных данных с указанием номера строки"""

    def __init__(self, line_no: int, reason: str):
        self.line_no = line_no
        self.reason = reason
        super().__init__(f"line {line_no}: {reason}")


@dataclass(frozen=True)
class Point:
    """Точка в E^k: координаты и исходная позиция во входных данных"""
    coords: Tuple[float, ...]
    index: int = 0

    @property
    def k(self) -> int:
        return len(self.coords)

    @classmethod
    def of(cls, coords: Sequence[float], index: int = 0) -> "Point":
        """Создание точки с проверкой конечности координат"""
        values = tuple(float(c) for c in coords)
        if not values:
            raise ContractViolation("point must have at least one coordinate")
        for c in values:
            if not math.isfinite(c):
                raise ContractViolation(f"point {index} has non-finite coordinate {c}")
        return cls(values, index)


@dataclass(frozen=True)
class OrthantLabel:
    """k-битная метка ортанта: бит j = 1, если p[j] < q[j]"""
    bits: Tuple[int, ...]

    @property
    def is_zero(self) -> bool:
        return not any(self.bits)

    @property
    def is_full(self) -> bool:
        return all(self.bits)

    def zero_slots(self) -> List[int]:
        """Номера слотов (0-based), для которых бит равен 0"""
        return [j for j, bit in enumerate(self.bits) if not bit]

    def __str__(self) -> str:
        return "".join(str(b) for b in self.bits)


@dataclass(frozen=True)
class DatasetMeta:
    """Описание набора данных: размер, размерность и источник"""
    n: int
    k: int
    source: str = ""
    seed: Optional[int] = None

    def __post_init__(self):
        if self.n < 0 or self.k < 1:
            raise ContractViolation(f"invalid dataset shape n={self.n}, k={self.k}")


def _check_dims(p: Point, q: Point):
    if len(p.coords) != len(q.coords):
        raise ContractViolation(
            f"dimension mismatch: point {p.index} has k={len(p.coords)}, point {q.index} has k={len(q.coords)}")


def dominates(p: Point, q: Point) -> bool:
    """Строгое доминирование: p[j] >= q[j] для всех j и p != q"""
    _check_dims(p, q)
    strict = False
    for a, b in zip(p.coords, q.coords):
        if a < b:
            return False
        if a > b:
            strict = True
    return strict


def orthant(p: Point, q: Point) -> OrthantLabel:
    """Ортант, в котором лежит q относительно p как начала координат"""
    _check_dims(p, q)
    return OrthantLabel(tuple(1 if a < b else 0 for a, b in zip(p.coords, q.coords)))


def mu(p: Point) -> float:
    return max(p.coords)


def extension_key(p: Point) -> tuple:
    """Ключ сортировки линейного расширения: убывание μ, затем убывание
    лексикографического порядка, затем возрастание индекса"""
    return (-max(p.coords), tuple(-c for c in p.coords), p.index)


def linear_extension(points: Sequence[Point]) -> List[int]:
    """Позиции точек в порядке, согласованном с доминированием (доминирующие раньше)"""
    if points:
        k = len(points[0].coords)
        for p in points:
            if len(p.coords) != k:
                raise ContractViolation(f"point {p.index} has k={len(p.coords)}, expected {k}")
    return sorted(range(len(points)), key=lambda i: extension_key(points[i]))


def derive_seed(seed: int, *key: int) -> int:
    """Детерминированный под-поток: (seed, key...) -> 64-битное зерно"""
    seq = np.random.SeedSequence(entropy=seed, spawn_key=tuple(key))
    return int(seq.generate_state(1, dtype=np.uint64)[0])


# Имена под-потоков для --seed
STREAM_ENGINE = 1
STREAM_GENERATOR = 2
STREAM_TRIALS = 3


def derive_rng(seed: int, *key: int) -> random.Random:
    """Python-генератор (Mersenne Twister) для выбора слотов и перестановок"""
    return random.Random(derive_seed(seed, *key))


def derive_np_rng(seed: int, *key: int) -> np.random.Generator:
    """numpy-генератор (PCG64) для выборок Монте-Карло"""
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=tuple(key)))

