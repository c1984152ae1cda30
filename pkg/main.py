import logging
import os
import sys
import time
from contextlib import contextmanager
from typing import Dict, List, Optional, Tuple

import click
import yaml

import experiments
from core import DEFAULT_SEED, STREAM_GENERATOR, ContractViolation, IngestionError, Point, derive_seed
from experiments import GridError
from layer_engine import Mode
from log_progress import setup_logging
from oracle_gen import oracle_layers
from points_io import read_points, write_labels, write_points, write_rows

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_INPUT = 2
EXIT_MISMATCH = 3

DEFAULT_CONFIG = "config.yaml"
FORMATS = ["csv", "json-lines"]
MODES = [mode.value for mode in Mode]


def load_config(config_path: str) -> Dict:
    """Загрузка конфигурации из YAML файла"""
    with open(config_path, 'r') as file:
        return yaml.safe_load(file) or {}


def resolve_grid(config_path: Optional[str], section: str, grid_text: Optional[str], defaults: Dict) -> Dict:
    """Сетка параметров: --grid поверх секции YAML поверх значений по умолчанию"""
    config: Dict = {}
    if config_path:
        config = load_config(config_path)
    elif os.path.exists(DEFAULT_CONFIG):
        config = load_config(DEFAULT_CONFIG)
    base = experiments.grid_from_config(config.get(section), defaults)
    return experiments.parse_grid(grid_text, base)


def load_input(input_path: Optional[str], gen: Optional[str], seed: int) -> Tuple[List[Point], Dict]:
    """Единый путь загрузки точек для solve и validate"""
    if (input_path is None) == (gen is None):
        raise click.UsageError("Specify exactly one of --input / --gen")
    if input_path is not None:
        points, meta = read_points(input_path)
        return points, {"source": input_path, "n": meta.n, "k": meta.k}
    spec = experiments.parse_generator(gen, derive_seed(seed, STREAM_GENERATOR))
    points = experiments.generate_checked(spec)
    return points, {"source": spec.describe(), "n": len(points), "k": spec.k, "generator_seed": spec.seed}


@contextmanager
def open_output(out: Optional[str]):
    if out is None:
        yield sys.stdout
        return
    with open(out, 'w', encoding='utf-8', newline='') as file:
        yield file


def run_guarded(action) -> int:
    """Выполнение команды с отображением исключений в коды выхода"""
    try:
        return action()
    except (IngestionError, GridError) as e:
        logging.error(f"Input error: {e}")
        return EXIT_INPUT
    except click.UsageError:
        raise
    except ContractViolation:
        logging.exception("Internal contract violation")
        return EXIT_INTERNAL
    except Exception:
        logging.exception("Unexpected error")
        return EXIT_INTERNAL


def input_options(fn):
    fn = click.option('--check', is_flag=True, help='Проверять инварианты слоёв линейным сканированием')(fn)
    fn = click.option('--seed', type=click.IntRange(min=0), default=DEFAULT_SEED, show_default=True, help='Начальное значение для всех случайных потоков')(fn)
    fn = click.option('--mode', '-m', type=click.Choice(MODES), default=Mode.LIST_HST.value, show_default=True, help='Структура слоя')(fn)
    fn = click.option('--gen', '-g', type=str, help='Генератор KIND,n,k[,key=value]')(fn)
    fn = click.option('--input', '-i', 'input_path', type=click.Path(exists=True, dir_okay=False), help='Файл с точками')(fn)
    return fn


def grid_options(fn):
    fn = click.option('--records', type=click.Path(dir_okay=False, writable=True), help='Файл для записей экспериментов (JSON lines)')(fn)
    fn = click.option('--workers', '-w', type=click.IntRange(min=1), default=1, show_default=True, help='Число рабочих потоков для ячеек сетки')(fn)
    fn = click.option('--seed', type=click.IntRange(min=0), default=DEFAULT_SEED, show_default=True, help='Начальное значение для всех случайных потоков')(fn)
    fn = click.option('--grid', type=str, help='Сетка вида "k=4,8;w=64,256;trials=100"')(fn)
    fn = click.option('--config', '-c', type=click.Path(exists=True, dir_okay=False), help='Путь к файлу конфигурации')(fn)
    fn = click.option('--format', 'output_format', type=click.Choice(FORMATS), default='csv', show_default=True, help='Формат отчёта')(fn)
    fn = click.option('--out', '-o', type=click.Path(dir_okay=False, writable=True), help='Файл отчёта (по умолчанию stdout)')(fn)
    return fn


@click.group()
@click.option('--verbose', '-v', is_flag=True, help='Отладочный вывод')
@click.option('--quiet', '-q', is_flag=True, help='Только предупреждения и ошибки')
def cli(verbose: bool, quiet: bool):
    """Максимальные слои (итерированные фронты Парето) точек в k измерениях"""
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    setup_logging(level)


@cli.command()
@input_options
@click.option('--out', '-o', type=click.Path(dir_okay=False, writable=True), help='Файл с метками (по умолчанию stdout)')
@click.option('--format', 'output_format', type=click.Choice(FORMATS), default='csv', show_default=True, help='Формат вывода')
def solve(input_path: Optional[str], gen: Optional[str], mode: str, seed: int, check: bool,
          out: Optional[str], output_format: str):
    """Разметка каждой точки рангом её максимального слоя"""

    def action():
        points, source = load_input(input_path, gen, seed)
        started = time.perf_counter()
        assignment = experiments.run_mode(points, Mode(mode), seed, check_invariants=check)
        elapsed = time.perf_counter() - started
        summary = {
            **source,
            "mode": mode,
            "seed": seed,
            "h": assignment.height,
            "max_layer_size": assignment.width_observed,
            **assignment.metrics.as_dict(),
            "wall_time": round(elapsed, 6),
        }
        with open_output(out) as stream:
            write_labels(stream, assignment.ranks, summary, output_format)
        logging.info(f"Solved n={source['n']}, k={source['k']} ({mode}): h={assignment.height}, "
                     f"w={assignment.width_observed}, comparisons={assignment.metrics.coordinate_comparisons}, "
                     f"{elapsed:.3f}s")
        return EXIT_OK

    sys.exit(run_guarded(action))


@cli.command()
@input_options
def validate(input_path: Optional[str], gen: Optional[str], mode: str, seed: int, check: bool):
    """Сравнение выбранного режима с переборным оракулом"""

    def action():
        points, source = load_input(input_path, gen, seed)
        expected = oracle_layers(points)
        actual = experiments.run_mode(points, Mode(mode), seed, check_invariants=check)
        diff = experiments.first_mismatch(expected, actual)
        if diff is not None:
            index, oracle_rank, mode_rank = diff
            click.echo(f"MISMATCH index={index} oracle={oracle_rank} {mode}={mode_rank}")
            logging.error(f"Validation failed for {source['source']}: point {index} has rank {mode_rank}, "
                          f"oracle says {oracle_rank}")
            return EXIT_MISMATCH
        click.echo(f"OK n={source['n']} k={source['k']} h={expected.height} mode={mode}")
        logging.info(f"Validation passed for {source['source']} ({mode})")
        return EXIT_OK

    sys.exit(run_guarded(action))


def _emit_report(report: experiments.Report, out: Optional[str], output_format: str, records: Optional[str]):
    with open_output(out) as stream:
        write_rows(stream, report.rows + [band.as_dict() for band in report.bands], output_format)
    if records:
        with open_output(records) as stream:
            write_rows(stream, [record.as_dict() for record in report.records], "json-lines")
        logging.info(f"Wrote {len(report.records)} experiment records to {records}")
    experiments.log_bands(report)
    counts = {status: sum(1 for b in report.bands if b.status == status)
              for status in (experiments.PASS, experiments.FAIL, experiments.INCONCLUSIVE)}
    logging.info(f"Bands: {counts[experiments.PASS]} PASS, {counts[experiments.FAIL]} FAIL, "
                 f"{counts[experiments.INCONCLUSIVE]} INCONCLUSIVE")


@cli.command()
@grid_options
@click.option('--section', '-s', 'sections', multiple=True, type=click.Choice(experiments.ANALYZE_SECTIONS), help='Запускать только указанные разделы')
def analyze(out: Optional[str], records: Optional[str], output_format: str, config: Optional[str], grid: Optional[str],
            seed: int, workers: int, sections: Tuple[str, ...]):
    """Проверка вероятностных оценок против измерений"""

    def action():
        parsed = resolve_grid(config, 'analyze', grid, experiments.DEFAULT_ANALYZE_GRID)
        logging.info(f"Analyze grid: {parsed}")
        report = experiments.run_analyze(parsed, seed, workers=workers,
                                         sections=sections or experiments.ANALYZE_SECTIONS)
        _emit_report(report, out, output_format, records)
        return EXIT_OK

    sys.exit(run_guarded(action))


@cli.command()
@grid_options
def bench(out: Optional[str], records: Optional[str], output_format: str, config: Optional[str], grid: Optional[str],
          seed: int, workers: int):
    """Время и число сравнений по сетке (n, k, генератор, режим)"""

    def action():
        parsed = resolve_grid(config, 'bench', grid, experiments.DEFAULT_BENCH_GRID)
        logging.info(f"Bench grid: {parsed}")
        report = experiments.run_bench(parsed, seed, workers=workers)
        _emit_report(report, out, output_format, records)
        return EXIT_OK

    sys.exit(run_guarded(action))


@cli.command()
@click.option('--gen', '-g', required=True, type=str, help='Генератор KIND,n,k[,key=value]')
@click.option('--seed', type=click.IntRange(min=0), default=DEFAULT_SEED, show_default=True, help='Начальное значение для всех случайных потоков')
@click.option('--out', '-o', type=click.Path(dir_okay=False, writable=True), help='Файл с точками (по умолчанию stdout)')
def generate(gen: str, seed: int, out: Optional[str]):
    """Запись сгенерированного набора во входном формате"""

    def action():
        spec = experiments.parse_generator(gen, derive_seed(seed, STREAM_GENERATOR))
        points = experiments.generate_checked(spec)
        with open_output(out) as stream:
            write_points(stream, points, {**spec.as_dict(), "cli_seed": seed})
        logging.info(f"Generated {len(points)} points ({spec.describe()})")
        return EXIT_OK

    sys.exit(run_guarded(action))


if __name__ == "__main__":
    cli()
