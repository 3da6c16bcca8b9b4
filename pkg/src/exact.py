"""
Точный бэкенд: ранги над гауссовыми рациональными числами.

Служит оракулом для плавающего бэкенда: аксиомы операторов, размерности
де Рама, Дольбо и Ботта-Черна, размерности ядра □_BC и деформированных
групп Ботта-Черна в рациональных точках t.
"""
import logging
from typing import Dict, Iterable, Tuple

import numpy as np
import sympy
from sympy import QQ_I
from sympy.polys.matrices import DomainMatrix

from src.exterior import Dok, LieModel, is_zero

logger = logging.getLogger(__name__)


def dok_compose(a: Dok, b: Dok) -> Dok:
    """Таблица композиции a∘b."""
    rows_of: Dict[int, Dict[int, sympy.Expr]] = {}
    for (row, col), value in a.items():
        rows_of.setdefault(col, {})[row] = value
    out: Dok = {}
    for (mid, col), value in b.items():
        for row, first in rows_of.get(mid, {}).items():
            out[(row, col)] = out.get((row, col), 0) + first * value
    return {key: sympy.expand(value) for key, value in out.items() if not is_zero(value)}


def dok_combine(*parts: Tuple[object, Dok]) -> Dok:
    """Линейная комбинация Σ c_i · T_i."""
    out: Dok = {}
    for coeff, table in parts:
        for key, value in table.items():
            out[key] = out.get(key, 0) + coeff * value
    return {key: sympy.expand(value) for key, value in out.items() if not is_zero(value)}


def dok_adjoint(table: Dok) -> Dok:
    return {(col, row): sympy.conjugate(value) for (row, col), value in table.items()}


def dok_block(table: Dok, rows: Iterable[int], cols: Iterable[int]) -> DomainMatrix:
    """Подматрица таблицы как `DomainMatrix` над QQ_I."""
    row_pos = {r: i for i, r in enumerate(rows)}
    col_pos = {c: j for j, c in enumerate(cols)}
    data = [[QQ_I.zero] * len(col_pos) for _ in range(len(row_pos))]
    for (row, col), value in table.items():
        if row in row_pos and col in col_pos:
            data[row_pos[row]][col_pos[col]] = QQ_I.from_sympy(sympy.expand(value))
    return DomainMatrix(data, (len(row_pos), len(col_pos)), QQ_I)


def exact_rank(matrix: DomainMatrix) -> int:
    rows, cols = matrix.shape
    if rows == 0 or cols == 0:
        return 0
    return int(matrix.rank())


def _rank(table: Dok, rows: np.ndarray, cols: np.ndarray) -> int:
    return exact_rank(dok_block(table, rows.tolist(), cols.tolist()))


def operator_axioms(model: LieModel) -> Dict[str, bool]:
    """
    Точная проверка d² = ∂² = ∂̄² = ∂∂̄ + ∂̄∂ = 0.

    Для моделей с (0,2)-частью в dω только d² обязан обращаться в ноль.
    """
    d, de, db = model.d_exact, model.del_exact, model.delbar_exact
    checks = {"d^2": not dok_compose(d, d)}
    if model.complex_integrable:
        checks["del^2"] = not dok_compose(de, de)
        checks["delbar^2"] = not dok_compose(db, db)
        checks["del delbar + delbar del"] = not dok_combine((1, dok_compose(de, db)), (1, dok_compose(db, de)))
    return checks


def exact_cohomology_dims(model: LieModel, theory: str) -> Dict[Tuple[int, ...], int]:
    """
    Размерности когомологий точными рангами.

    Args:
        model: Модель Ли.
        theory: "derham", "dolbeault" или "bc".

    Returns:
        Словарь (k,) или (p, q) -> размерность.
    """
    alg = model.algebra
    result: Dict[Tuple[int, ...], int] = {}
    if theory == "derham":
        for k in range(2 * alg.n + 1):
            idx = alg.degree(k)
            result[(k,)] = len(idx) - _rank(model.d_exact, alg.degree(k + 1), idx) - _rank(
                model.d_exact, idx, alg.degree(k - 1)
            )
        return result

    ddbar = dok_compose(model.del_exact, model.delbar_exact)
    for p, q in alg.bidegree_pairs():
        idx = alg.block(p, q)
        if theory == "dolbeault":
            db = model.delbar_exact
            result[(p, q)] = len(idx) - _rank(db, alg.block(p, q + 1), idx) - _rank(db, idx, alg.block(p, q - 1))
        elif theory == "bc":
            closed = len(idx) - _rank(model.d_exact, alg.degree(p + q + 1), idx)
            result[(p, q)] = closed - _rank(ddbar, idx, alg.block(p - 1, q - 1))
        else:
            raise ValueError(f"неизвестная теория '{theory}'")
    logger.debug(f"Точные размерности {theory} для {model.name}: {result}")
    return result


def exact_bc_harmonic_dims(model: LieModel) -> Dict[Tuple[int, int], int]:
    """dim ker∂ ∩ ker∂̄ ∩ ker(∂∂̄)* по блокам -- точная размерность ker □_BC."""
    alg = model.algebra
    ddbar_star = dok_adjoint(dok_compose(model.del_exact, model.delbar_exact))
    stacked = dok_combine((1, model.del_exact), (1, model.delbar_exact), (1, ddbar_star))
    # образы трёх операторов лежат в разных бистепенях, так что ядро суммы
    # совпадает с пересечением ядер
    everything = np.arange(alg.size)
    return {
        (p, q): len(alg.block(p, q)) - _rank(stacked, everything, alg.block(p, q))
        for p, q in alg.bidegree_pairs()
    }


def exact_contraction(model: LieModel, phi: Dict[Tuple[int, int], sympy.Expr]) -> Dok:
    """Таблица i_φ для точной матрицы Бельтрами φ[α, β] (индексы с 0)."""
    alg = model.algebra
    parts = [(value, alg.contraction_doks[key]) for key, value in phi.items() if not is_zero(value)]
    return dok_combine(*parts)


def exact_deformed_bc_dims(
    model: LieModel, phi: Dict[Tuple[int, int], sympy.Expr]
) -> Dict[Tuple[int, int], int]:
    """
    dim ker d_φ - rank ∂∂̄_φ по блокам в точной арифметике.

    d_φ = ∂ + ∂̄ - (i_φ∂ - ∂i_φ), ∂̄_φ = ∂̄ - (i_φ∂ - ∂i_φ).
    """
    alg = model.algebra
    de, db = model.del_exact, model.delbar_exact
    contraction = exact_contraction(model, phi)
    lie = dok_combine((1, dok_compose(contraction, de)), (-1, dok_compose(de, contraction)))
    delbar_phi = dok_combine((1, db), (-1, lie))
    d_phi = dok_combine((1, de), (1, delbar_phi))
    ddbar_phi = dok_compose(de, delbar_phi)
    everything = np.arange(alg.size)
    return {
        (p, q): len(alg.block(p, q))
        - _rank(d_phi, everything, alg.block(p, q))
        - _rank(ddbar_phi, alg.block(p, q), alg.block(p - 1, q - 1))
        for p, q in alg.bidegree_pairs()
    }

