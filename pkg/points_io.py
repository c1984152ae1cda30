import csv
import json
import math
import re
from typing import IO, Dict, Iterable, List, Optional, Sequence, Tuple

from core import DatasetMeta, IngestionError, Point

LABELS_HEADER = "# maxlayers-labels v1"
POINTS_HEADER = "# maxlayers-points v1"

_SEPARATOR = re.compile(r"[,\s]+")


def parse_points(lines: Iterable[str], source: str = "") -> Tuple[List[Point], DatasetMeta]:
    """Разбор точек: одна точка на строку, координаты через запятую или пробел.

    Пустые строки и строки, начинающиеся с '#', пропускаются. Размерность
    определяется по первой строке с данными и проверяется для остальных.
    """
    points: List[Point] = []
    k: Optional[int] = None
    for line_no, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        cells = [c for c in _SEPARATOR.split(line) if c]
        if not cells:
            raise IngestionError(line_no, f"no coordinates in {line!r}")
        try:
            values = [float(c) for c in cells]
        except ValueError:
            raise IngestionError(line_no, f"cannot parse number in {line!r}")
        for c in values:
            if not math.isfinite(c):
                raise IngestionError(line_no, f"non-finite value {c}")
        if k is None:
            k = len(values)
        elif len(values) != k:
            raise IngestionError(line_no, f"expected {k} coordinates, got {len(values)}")
        points.append(Point(tuple(values), len(points)))
    return points, DatasetMeta(n=len(points), k=k or 1, source=source)


def _decoded_lines(file) -> Iterable[str]:
    for line_no, raw in enumerate(file, start=1):
        try:
            yield raw.decode("utf-8-sig" if line_no == 1 else "utf-8")
        except UnicodeDecodeError as e:
            raise IngestionError(line_no, f"invalid UTF-8 at byte {e.start}")


def read_points(path: str) -> Tuple[List[Point], DatasetMeta]:
    with open(path, "rb") as file:
        return parse_points(_decoded_lines(file), source=path)


def write_points(stream: IO[str], points: Sequence[Point], header: Optional[Dict] = None):
    """Запись точек во входном формате с заголовком-комментарием"""
    stream.write(POINTS_HEADER + "\n")
    if header:
        stream.write("# " + json.dumps(header, sort_keys=True) + "\n")
    for p in points:
        stream.write(",".join(repr(c) for c in p.coords) + "\n")


def write_labels(stream: IO[str], ranks: Sequence[int], summary: Dict, output_format: str = "csv"):
    """Метки слоёв: CSV index,rank (+ итог в комментарии) или JSON-lines"""
    if output_format == "csv":
        stream.write(LABELS_HEADER + "\n")
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(["index", "rank"])
        writer.writerows(enumerate(ranks))
        stream.write("# summary " + json.dumps(summary, sort_keys=True) + "\n")
    elif output_format == "json-lines":
        for index, rank in enumerate(ranks):
            stream.write(json.dumps({"index": index, "rank": rank}) + "\n")
        stream.write(json.dumps({"summary": summary}, sort_keys=True) + "\n")
    else:
        raise ValueError(f"unknown output format {output_format!r}")


def write_rows(stream: IO[str], rows: Sequence[Dict], output_format: str = "csv"):
    """Табличный отчёт: одна строка на ячейку сетки"""
    if output_format == "json-lines":
        for row in rows:
            stream.write(json.dumps(row, sort_keys=True) + "\n")
        return
    columns: List[str] = []
    for row in rows:
        for key in row:
            if key not in columns:
                columns.append(key)
    writer = csv.DictWriter(stream, fieldnames=columns, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
