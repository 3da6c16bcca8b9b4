"""
Вывод отчётов: JSON, выровненные таблицы и CSV.

Все числа проходят через `round_number`, комплексные значения пишутся
как {"re": ..., "im": ...}, ключи сортируются, поэтому одинаковые входные
данные дают побайтово одинаковый JSON.
"""
import csv
import io
import json
from dataclasses import dataclass, field
from typing import Any, Dict, List, Sequence

import numpy as np

from src.config import settings
from src.utils import format_number, round_number


def to_jsonable(value: Any, digits: int = settings.SIGNIFICANT_DIGITS) -> Any:
    """Рекурсивно приводит значение к типам JSON с округлением чисел."""
    if isinstance(value, dict):
        return {_key(k): to_jsonable(v, digits) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v, digits) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist(), digits)
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (complex, np.complexfloating)):
        return {"re": round_number(value.real, digits), "im": round_number(value.imag, digits)}
    if isinstance(value, (float, np.floating)):
        return round_number(float(value), digits)
    return value


def _key(key: Any) -> str:
    if isinstance(key, tuple):
        return ",".join(str(k) for k in key)
    return str(key)


def dumps(data: Any) -> str:
    return json.dumps(to_jsonable(data), sort_keys=True, indent=2, ensure_ascii=False)


def format_cell(value: Any) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "да" if value else "нет"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (complex, np.complexfloating)):
        if value.imag == 0:
            return format_number(value.real)
        return f"{format_number(value.real)}{'+' if value.imag >= 0 else '-'}{format_number(abs(value.imag))}j"
    if isinstance(value, (float, np.floating)):
        return format_number(float(value))
    if isinstance(value, (list, tuple)):
        return "(" + ", ".join(format_cell(v) for v in value) + ")"
    return str(value)


def format_table(headers: Sequence[str], rows: Sequence[Sequence[Any]]) -> str:
    """Таблица с выравниванием столбцов по ширине."""
    cells = [[format_cell(v) for v in row] for row in rows]
    widths = [len(h) for h in headers]
    for row in cells:
        for i, cell in enumerate(row):
            widths[i] = max(widths[i], len(cell))
    lines = ["  ".join(h.ljust(w) for h, w in zip(headers, widths))]
    lines.append("  ".join("-" * w for w in widths))
    lines.extend("  ".join(c.ljust(w) for c, w in zip(row, widths)) for row in cells)
    return "\n".join(lines)


def format_csv(headers: Sequence[str], rows: Sequence[Sequence[Any]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(headers)
    for row in rows:
        writer.writerow([format_cell(v) for v in row])
    return buffer.getvalue()


@dataclass
class Report:
    """
    Отчёт одной команды: заголовки таблицы, строки и произвольные метаданные.

    Строки сортируются перед выводом, так что порядок выполнения задач
    пулом потоков на результат не влияет.
    """

    title: str
    headers: List[str]
    rows: List[List[Any]] = field(default_factory=list)
    meta: Dict[str, Any] = field(default_factory=dict)

    def add(self, *row: Any) -> None:
        self.rows.append(list(row))

    def sorted_rows(self) -> List[List[Any]]:
        return sorted(self.rows, key=lambda row: [_sort_key(v) for v in row])

    def render(self, output: str) -> str:
        rows = self.sorted_rows()
        if output == "json":
            records = [dict(zip(self.headers, row)) for row in rows]
            return dumps({"title": self.title, "meta": self.meta, "rows": records})
        if output == "csv":
            return format_csv(self.headers, rows)
        header = f"# {self.title}"
        if self.meta:
            header += "\n" + "\n".join(f"# {k}: {format_cell(v)}" for k, v in sorted(self.meta.items()))
        return header + "\n" + format_table(self.headers, rows)


def _sort_key(value: Any) -> Any:
    if isinstance(value, (complex, np.complexfloating)):
        return (1, abs(value), value.real, value.imag, "")
    if isinstance(value, (bool, np.bool_)):
        return (0, int(value), 0.0, 0.0, "")
    if isinstance(value, (int, float, np.integer, np.floating)):
        return (1, float(value), float(value), 0.0, "")
    if isinstance(value, (list, tuple)):
        return (2, tuple(_sort_key(v) for v in value))
    return (3, 0.0, 0.0, 0.0, str(value))
