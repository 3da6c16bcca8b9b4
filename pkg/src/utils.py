"""
Вспомогательные утилиты для проекта.

Этот модуль содержит настройку логирования, форматирование чисел для отчётов
и поиск поставляемых с пакетом моделей и семейств деформаций.
"""
import logging
from pathlib import Path
from typing import Dict, Union

import mpmath

from src.config import settings

DATA_DIR = Path(__file__).parent / "data"


def setup_logging(verbose: bool = False) -> None:
    """
    Настраивает базовую конфигурацию логирования.

    Логи будут одновременно выводиться в файл (согласно `settings.LOG_FILE`)
    и в стандартный поток ошибок, так что stdout остаётся только для отчётов.

    Args:
        verbose: Включить уровень DEBUG.
    """
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(asctime)s [%(levelname)s] %(name)s: %(message)s",
        handlers=[logging.FileHandler(settings.LOG_FILE), logging.StreamHandler()],
    )


def format_number(value: float, digits: int = settings.SIGNIFICANT_DIGITS) -> str:
    """
    Печатает число с фиксированным количеством значащих цифр.

    Args:
        value: Вещественное число.
        digits: Количество значащих цифр.

    Returns:
        Строка вида "1.23456789012e-5" или "0.0".
    """
    return mpmath.nstr(mpmath.mpf(float(value)), digits, strip_zeros=True)


def round_number(value: float, digits: int = settings.SIGNIFICANT_DIGITS) -> float:
    """Округляет число до `digits` значащих цифр (для детерминированного JSON)."""
    return float(format_number(value, digits))


def shipped_files(kind: str) -> Dict[str, Path]:
    """
    Возвращает поставляемые файлы моделей или семейств.

    Args:
        kind: "models" или "families".

    Returns:
        Словарь имя -> путь, отсортированный по имени.
    """
    folder = DATA_DIR / kind
    return {p.stem: p for p in sorted(folder.glob("*.json"))}


def resolve_input(name_or_path: Union[str, Path], kind: str) -> Path:
    """
    Превращает имя поставляемого файла или путь в путь к файлу.

    Если путь существует, он возвращается как есть; иначе ищется файл
    с таким именем среди поставляемых. Несуществующий путь возвращается
    без изменений, чтобы ошибку сообщил загрузчик.
    """
    path = Path(name_or_path)
    if path.exists():
        return path
    shipped = shipped_files(kind)
    key = path.stem if path.suffix == ".json" else str(name_or_path)
    return shipped.get(key, path)
