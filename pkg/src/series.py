"""
Усечённые степенные ряды по параметрам деформации t = (t_1, ..., t_m).

Коэффициенты -- массивы numpy любой фиксированной формы (векторы форм,
массивы коэффициентов Бельтрами). Усечение ведётся по полной степени.
"""
import itertools
import logging
from dataclasses import dataclass
from typing import Callable, Dict, Iterator, Optional, Sequence, Tuple, Union

import numpy as np

from src.errors import ArityMismatch

logger = logging.getLogger(__name__)

Exponent = Tuple[int, ...]
Point = Union[complex, Sequence[complex]]


@dataclass(frozen=True, eq=False)
class FormSeries:
    """
    Ряд Σ_e c_e t^e с |e| <= order.

    Отсутствующие мультииндексы означают нулевые коэффициенты.
    """

    m: int
    order: int
    terms: Dict[Exponent, np.ndarray]

    def __post_init__(self) -> None:
        clean: Dict[Exponent, np.ndarray] = {}
        for exponent, coeff in self.terms.items():
            exponent = tuple(int(e) for e in exponent)
            if len(exponent) != self.m:
                raise ArityMismatch(f"мультииндекс {exponent} не соответствует m={self.m}")
            if sum(exponent) > self.order:
                continue
            clean[exponent] = np.array(coeff, dtype=complex)
        object.__setattr__(self, "terms", dict(sorted(clean.items(), key=lambda kv: (sum(kv[0]), kv[0]))))

    @classmethod
    def constant(cls, value: np.ndarray, m: int, order: int) -> "FormSeries":
        return cls(m, order, {(0,) * m: value})

    @classmethod
    def zero(cls, shape: Tuple[int, ...], m: int, order: int) -> "FormSeries":
        return cls(m, order, {(0,) * m: np.zeros(shape, dtype=complex)})

    @property
    def shape(self) -> Tuple[int, ...]:
        return next(iter(self.terms.values())).shape if self.terms else ()

    def coefficient(self, exponent: Exponent) -> np.ndarray:
        if exponent in self.terms:
            return self.terms[exponent]
        return np.zeros(self.shape, dtype=complex)

    def homogeneous(self, k: int) -> Iterator[Tuple[Exponent, np.ndarray]]:
        """Слагаемые полной степени k."""
        return ((e, c) for e, c in self.terms.items() if sum(e) == k)

    def exponents(self) -> Iterator[Exponent]:
        return all_exponents(self.m, self.order)

    def max_abs_coefficient(self) -> float:
        return max((float(np.max(np.abs(c))) for c in self.terms.values() if c.size), default=0.0)


def all_exponents(m: int, order: int) -> Iterator[Exponent]:
    """Все мультииндексы полной степени <= order по возрастанию степени."""
    for k in range(order + 1):
        for combo in itertools.combinations_with_replacement(range(m), k):
            exponent = [0] * m
            for i in combo:
                exponent[i] += 1
            yield tuple(exponent)


def exponent_sub(e: Exponent, f: Exponent) -> Optional[Exponent]:
    """e - f, если f <= e покомпонентно, иначе None."""
    diff = tuple(a - b for a, b in zip(e, f))
    return diff if min(diff, default=0) >= 0 else None


def _check_arity(*series: FormSeries) -> None:
    arities = {s.m for s in series}
    if len(arities) > 1:
        raise ArityMismatch(f"ряды с разным числом параметров: {sorted(arities)}")


def series_add(a: FormSeries, b: FormSeries) -> FormSeries:
    _check_arity(a, b)
    terms = dict(a.terms)
    for exponent, coeff in b.terms.items():
        terms[exponent] = terms[exponent] + coeff if exponent in terms else coeff
    return FormSeries(a.m, min(a.order, b.order), terms)


def series_scale(a: FormSeries, b: Union[complex, FormSeries]) -> FormSeries:
    """Умножение на число или на скалярный ряд."""
    if isinstance(b, FormSeries):
        return series_apply(lambda x, y: x * y, b, a)
    return FormSeries(a.m, a.order, {e: b * c for e, c in a.terms.items()})


def _as_unary(operator: Union[np.ndarray, Callable[[np.ndarray], np.ndarray]]) -> Callable[[np.ndarray], np.ndarray]:
    if isinstance(operator, np.ndarray):
        return lambda x: operator @ x
    if hasattr(operator, "matrix"):
        matrix = operator.matrix
        return lambda x: matrix @ x
    return operator


def series_apply(
    operator: Union[np.ndarray, Callable],
    a: FormSeries,
    b: Optional[FormSeries] = None,
) -> FormSeries:
    """
    Поднимает линейное или билинейное отображение на ряды.

    Коэффициент степени k результата равен Σ_{i+j=k} L(a_i, b_j);
    степени выше порядка усечения отбрасываются.

    Args:
        operator: Матрица, оператор с атрибутом `matrix` или функция
            одного (двух) аргументов.
        a: Первый ряд.
        b: Второй ряд для билинейного отображения.

    Returns:
        Ряд-образ.
    """
    if b is None:
        unary = _as_unary(operator)
        return FormSeries(a.m, a.order, {e: unary(c) for e, c in a.terms.items()})

    _check_arity(a, b)
    order = min(a.order, b.order)
    terms: Dict[Exponent, np.ndarray] = {}
    for ea, ca in a.terms.items():
        for eb, cb in b.terms.items():
            exponent = tuple(x + y for x, y in zip(ea, eb))
            if sum(exponent) > order:
                continue
            value = operator(ca, cb)
            terms[exponent] = terms[exponent] + value if exponent in terms else value
    return FormSeries(a.m, order, terms)


def point_tuple(t: Point, m: int) -> Tuple[complex, ...]:
    values = (complex(t),) if np.isscalar(t) else tuple(complex(x) for x in t)
    if len(values) != m:
        raise ArityMismatch(f"точка {values} не соответствует m={m}")
    return values


def series_eval(a: FormSeries, t: Point) -> np.ndarray:
    """Значение ряда в точке t (по однородным степеням, от старшей к младшей)."""
    point = point_tuple(t, a.m)
    result = np.zeros(a.shape, dtype=complex)
    for k in range(a.order, -1, -1):
        for exponent, coeff in a.homogeneous(k):
            result = result + np.prod([x**e for x, e in zip(point, exponent)]) * coeff
    return result


def series_partial(a: FormSeries, direction: int) -> FormSeries:
    """Формальная производная ∂/∂t_i (направление нумеруется с 0)."""
    if not 0 <= direction < a.m:
        raise ArityMismatch(f"направление {direction} вне диапазона 0..{a.m - 1}")
    terms: Dict[Exponent, np.ndarray] = {}
    for exponent, coeff in a.terms.items():
        power = exponent[direction]
        if power == 0:
            continue
        lowered = exponent[:direction] + (power - 1,) + exponent[direction + 1 :]
        terms[lowered] = power * coeff
    if not terms:
        terms[(0,) * a.m] = np.zeros(a.shape, dtype=complex)
    return FormSeries(a.m, max(a.order - 1, 0), terms)
