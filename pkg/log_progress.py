import logging
import time

UPDATE_INTERVAL = 15


def print_progress(tasks, total_tasks=0, update_interval=UPDATE_INTERVAL, label=""):
    completed_tasks = 0
    start_time = time.perf_counter()
    last_update_time = start_time
    if not total_tasks and hasattr(tasks, "__len__"):
        total_tasks = len(tasks)

    for task in tasks:
        yield task
        completed_tasks += 1
        current_time = time.perf_counter()
        if current_time - last_update_time >= update_interval:
            calculate_progress(completed_tasks, current_time, start_time, total_tasks, label)
            last_update_time = current_time


def calculate_progress(completed_tasks, current_time, start_time, total_tasks, label=""):
    progress_percentage = (completed_tasks / total_tasks) * 100 if total_tasks else 100.0
    elapsed_time = current_time - start_time
    avg_time_per_task = elapsed_time / completed_tasks if completed_tasks > 0 else 0
    remaining_tasks = total_tasks - completed_tasks
    estimated_remaining_time = avg_time_per_task * remaining_tasks
    prefix = f"[{label}] " if label else ""
    logging.info(
        f"{prefix}Progress: {completed_tasks}/{total_tasks} tasks completed "
        f"({progress_percentage:.2f}%). "
        f"Estimated remaining time: {estimated_remaining_time:.2f} seconds."
    )


class ColorFormatter(logging.Formatter):
    COLORS = {
        'DEBUG': '\033[96m',  # Cyan
        'INFO': '\033[92m',  # Green
        'WARNING': '\033[93m',  # Yellow
        'ERROR': '\033[91m',  # Red
        'CRITICAL': '\033[95m',  # Magenta
    }
    RESET = '\033[0m'

    def format(self, record):
        log_color = self.COLORS.get(record.levelname, self.RESET)
        message = super().format(record)
        return f"{log_color}{message}{self.RESET}"


def setup_logging(level=logging.INFO):
    """Настройка корневого логгера: цветной вывод в stderr, stdout остаётся под отчёты"""
    logger = logging.getLogger("")
    for handler in list(logger.handlers):
        if isinstance(handler.formatter, ColorFormatter):
            logger.removeHandler(handler)

    handler = logging.StreamHandler()
    handler.setFormatter(ColorFormatter())

    logger.setLevel(level)
    logger.addHandler(handler)
