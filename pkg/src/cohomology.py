"""
Группы когомологий и их деформации.

Размерности считаются рангами операторов, представители классов -- ядрами
лапласианов из `MetricContext`. Координаты класса замкнутой формы получаются
скалярными произведениями с каноническим гармоническим базисом: эта
ретракция обращается в ноль на точных формах.
"""
import itertools
import logging
import threading
import weakref
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.config import settings
from src.deformation import Beltrami, bigrading_from_matrix, deformed_operators, require_integrable
from src.errors import FiltrationDegenerate
from src.linalg import (
    containment_residual,
    intersection,
    max_principal_angle,
    null_space,
    numerical_rank,
    orth,
    threshold,
)
from src.metric import MetricContext, bc_laplacian
from src.series import Point

logger = logging.getLogger(__name__)

Key = Tuple[int, ...]


@dataclass(frozen=True, eq=False)
class CohomologySpace:
    """Группа когомологий одного блока с гармоническим базисом."""

    theory: str
    key: Key
    dimension: int
    basis: np.ndarray  # size x dimension, столбцы -- гармонические представители
    quotient_dimension: int  # dim ker / im, посчитанная рангами

    def coordinates(self, vectors: np.ndarray) -> np.ndarray:
        """Координаты классов замкнутых форм (столбцов `vectors`) в гармоническом базисе."""
        return self.basis.conj().T @ vectors


@dataclass(frozen=True, eq=False)
class SubspaceChart:
    """
    Точка грассманиана: подпространство, заданное столбцами `spanning`.

    Канонические формы: приведённая ступенчатая по столбцам матрица
    (не зависит от выбора порождающих) и вектор Плюккера единичной нормы
    с первой ненулевой координатой, вещественной и положительной.
    """

    spanning: np.ndarray
    rtol: float = settings.TOLERANCE

    @property
    def ambient(self) -> int:
        return int(self.spanning.shape[0])

    @property
    def dim(self) -> int:
        return int(self.spanning.shape[1])

    @cached_property
    def basis(self) -> np.ndarray:
        return orth(self.spanning, self.rtol)

    def is_full_rank(self) -> bool:
        return self.basis.shape[1] == self.dim

    @cached_property
    def echelon(self) -> Tuple[np.ndarray, List[int]]:
        """Приведённая ступенчатая форма по столбцам и номера опорных строк."""
        a = self.basis.T.copy()
        rows, cols = a.shape
        tol = threshold(a.ravel(), self.rtol) if a.size else 0.0
        pivots: List[int] = []
        r = 0
        for col in range(cols):
            if r == rows:
                break
            best = r + int(np.argmax(np.abs(a[r:, col])))
            if abs(a[best, col]) <= tol:
                continue
            a[[r, best]] = a[[best, r]]
            a[r] = a[r] / a[r, col]
            for other in range(rows):
                if other != r:
                    a[other] = a[other] - a[other, col] * a[r]
            pivots.append(col)
            r += 1
        return a[:r].T, pivots

    @cached_property
    def pluecker(self) -> np.ndarray:
        """Нормированные координаты Плюккера (все миноры порядка dim, строки лексикографически)."""
        basis = self.basis
        r = basis.shape[1]
        if r == 0:
            return np.ones(1, dtype=complex)
        combos = list(itertools.combinations(range(self.ambient), r))
        minors = np.linalg.det(np.stack([basis[list(c)] for c in combos]))
        norm = np.linalg.norm(minors)
        minors = minors / norm
        lead = np.flatnonzero(np.abs(minors) > self.rtol)[0]
        return minors * (abs(minors[lead]) / minors[lead])

    def affine(self, pivots: Optional[Sequence[int]] = None) -> np.ndarray:
        """
        Аффинная карта S (S[pivots])⁻¹ вокруг набора опорных строк.

        В отличие от нормированного вектора Плюккера голоморфно зависит от
        порождающих столбцов.
        """
        pivots = list(self.echelon[1] if pivots is None else pivots)
        return self.spanning @ np.linalg.inv(self.spanning[pivots])

    def angle_to(self, other: "SubspaceChart") -> float:
        return max_principal_angle(self.basis, other.basis)

    def contained_in(self, other: "SubspaceChart") -> float:
        """Невязка вложения self ⊆ other."""
        return containment_residual(self.spanning, other.spanning, self.rtol)


def _quotient_dims(metric: MetricContext, theory: str) -> Dict[Key, int]:
    alg = metric.algebra
    rank = metric.rank
    out: Dict[Key, int] = {}
    if theory == "derham":
        d = metric.d.matrix
        for k in range(2 * alg.n + 1):
            idx = alg.degree(k)
            out[(k,)] = len(idx) - rank(d[np.ix_(alg.degree(k + 1), idx)]) - rank(d[np.ix_(idx, alg.degree(k - 1))])
        return out
    for p, q in alg.bidegree_pairs():
        idx = alg.block(p, q)
        if theory == "delbar":
            out[(p, q)] = len(idx) - rank(metric.delbar.block(p, q)) - rank(metric.delbar.block(p, q - 1))
        else:
            closed = len(idx) - rank(metric.d.matrix[:, idx])
            out[(p, q)] = closed - rank(metric.ddbar.block(p - 1, q - 1))
    return out


def cohomology(metric: MetricContext, theory: str, degrees: Optional[Sequence[int]] = None) -> List[CohomologySpace]:
    """
    Таблица когомологий: derham (по k), dolbeault или bc (по (p, q)).

    Args:
        metric: Гармоническая теория модели.
        theory: "derham", "dolbeault" или "bc".
        degrees: Полные степени, которые нужно оставить (по умолчанию все).

    Returns:
        Список `CohomologySpace` в порядке (k) или (p, q).
    """
    internal = {"derham": "derham", "dolbeault": "delbar", "bc": "bc"}
    if theory not in internal:
        raise ValueError(f"неизвестная теория '{theory}', ожидалось derham|dolbeault|bc")
    name = internal[theory]
    quotient = _quotient_dims(metric, name)
    spaces = []
    for key, dim in quotient.items():
        if degrees is not None and sum(key) not in degrees:
            continue
        if name == "derham":
            basis = metric.harmonic_basis(name, k=key[0])
        else:
            basis = metric.harmonic_basis(name, key[0], key[1])
        if basis.shape[1] != dim:
            logger.warning(
                f"{theory}{key}: размерность гармонического пространства {basis.shape[1]} "
                f"не совпадает с размерностью фактора {dim}"
            )
        spaces.append(CohomologySpace(theory, key, basis.shape[1], basis, dim))
    return spaces


def dimension_table(metric: MetricContext, theory: str) -> Dict[Key, int]:
    return {space.key: space.dimension for space in cohomology(metric, theory)}


def derham_coordinates(metric: MetricContext, k: int, vectors: np.ndarray) -> np.ndarray:
    """Координаты в H^k(X, C) (базис -- d-гармонические формы)."""
    return metric.harmonic_basis("derham", k=k).conj().T @ vectors


@dataclass(frozen=True)
class DdbarReport:
    holds: bool
    failing: List[Tuple[int, int]]
    details: Dict[Tuple[int, int], Tuple[int, int]] = field(default_factory=dict)  # (dim пересечения, rank ∂∂̄)


_ddbar_reports: "weakref.WeakKeyDictionary[MetricContext, DdbarReport]" = weakref.WeakKeyDictionary()
_ddbar_lock = threading.Lock()


def ddbar_check(metric: MetricContext) -> DdbarReport:
    """
    Проверка ∂∂̄-леммы: ker∂ ∩ ker∂̄ ∩ (Im∂ + Im∂̄) = Im∂∂̄ в каждой бистепени.

    Так как Im∂∂̄ всегда содержится в левой части, достаточно сравнить размерности.
    Отчёт запоминается, пока жив сам метрический контекст.
    """
    with _ddbar_lock:
        report = _ddbar_reports.get(metric)
        if report is None:
            report = _ddbar_reports[metric] = _ddbar_report(metric)
    return report


def _ddbar_report(metric: MetricContext) -> DdbarReport:
    alg = metric.algebra
    failing: List[Tuple[int, int]] = []
    details: Dict[Tuple[int, int], Tuple[int, int]] = {}
    for p, q in alg.bidegree_pairs():
        closed = null_space(np.vstack([metric.del_.block(p, q), metric.delbar.block(p, q)]), metric.rtol)
        exact = np.hstack([metric.del_.block(p - 1, q), metric.delbar.block(p, q - 1)])
        common = intersection(closed, exact, metric.rtol).shape[1] if exact.shape[1] else 0
        ddbar_rank = metric.rank(metric.ddbar.block(p - 1, q - 1))
        details[(p, q)] = (common, ddbar_rank)
        if common != ddbar_rank:
            failing.append((p, q))
    report = DdbarReport(not failing, failing, details)
    if failing:
        logger.info(f"Модель {metric.model.name}: ∂∂̄-лемма нарушена в бистепенях {failing}")
    return report


def _warn_without_ddbar(metric: MetricContext, what: str) -> None:
    if not ddbar_check(metric).holds:
        logger.warning(f"{what}: модель {metric.model.name} не удовлетворяет ∂∂̄-лемме, результат информативен")


def filtration_columns(metric: MetricContext, p: int, k: int) -> np.ndarray:
    """BC-гармонические формы бистепеней (r, k-r), r >= p, в порядке убывания r."""
    n = metric.algebra.n
    columns = [
        metric.harmonic_basis("bc", r, k - r) for r in range(min(k, n), max(p, k - n, 0) - 1, -1)
    ]
    return np.hstack(columns) if columns else np.zeros((metric.algebra.size, 0), dtype=complex)


def hodge_filtration(metric: MetricContext, p: int, k: int) -> SubspaceChart:
    """
    F^pH^k = образ ⊕_{r>=p} H^{r,k-r}_BC в H^k(X, C).

    Raises:
        FiltrationDegenerate: Столбцы линейно зависимы (признак нарушения ∂∂̄-леммы).
    """
    _warn_without_ddbar(metric, f"F^{p}H^{k}")
    chart = SubspaceChart(derham_coordinates(metric, k, filtration_columns(metric, p, k)), metric.rtol)
    if not chart.is_full_rank():
        raise FiltrationDegenerate(
            f"F^{p}H^{k}: ранг {chart.basis.shape[1]} меньше числа порождающих {chart.dim}"
        )
    return chart


# --- Деформированные группы ---


def _deformed(metric: MetricContext, phi: Beltrami, t: Point):
    return deformed_operators(metric.model, require_integrable(metric.model, phi, t, metric.rtol))


def deformed_bc_dims(metric: MetricContext, phi: Beltrami, t: Point) -> Dict[Tuple[int, int], int]:
    """
    dim H^{p,q}_{BCφ(t)} = dim(ker d_φ ∩ A^{p,q}) - rank(∂∂̄_φ: A^{p-1,q-1} -> A^{p,q}).

    Raises:
        NotIntegrableAt: φ(t) не интегрируема.
    """
    ops = _deformed(metric, phi, t)
    alg = metric.algebra
    out = {}
    for p, q in alg.bidegree_pairs():
        idx = alg.block(p, q)
        kernel = len(idx) - metric.rank(ops.d[:, idx])
        out[(p, q)] = kernel - metric.rank(ops.ddbar[np.ix_(idx, alg.block(p - 1, q - 1))])
    return out


@dataclass(frozen=True)
class VU:
    v: int
    u: int


def _v(metric: MetricContext, ops, p: int, q: int) -> int:
    idx = metric.algebra.block(p, q)
    if len(idx) == 0:
        return 0
    stacked = np.vstack([ops.d[:, idx], metric.ddbar_star.matrix[:, idx]])
    return metric.harmonic_dim("bc", p, q) - (len(idx) - metric.rank(stacked))


def _u(metric: MetricContext, ops, p: int, q: int) -> int:
    alg = metric.algebra
    idx = alg.block(p, q)
    if len(idx) == 0:
        return 0
    harmonic = metric.harmonic_basis("bc", p, q)[idx]
    coexact = metric.ddbar_star.matrix[np.ix_(idx, alg.block(p + 1, q + 1))]
    span = orth(np.hstack([harmonic, coexact]), metric.rtol)
    nullity = span.shape[1] - metric.rank(ops.ddbar[:, idx] @ span)
    return metric.harmonic_dim("bc", p, q) - nullity


def vu_diagnostics(metric: MetricContext, phi: Beltrami, t: Point, p: int, q: int) -> VU:
    """
    Диагностики скачка размерности в бистепени (p, q).

    v = dim H_BC - dim(ker d_φ ∩ ker(∂∂̄)* ∩ A^{p,q}),
    u = dim H_BC - dim(ker ∂∂̄_φ ∩ (𝓗_BC + Im(∂∂̄)*) ∩ A^{p,q}).
    """
    ops = _deformed(metric, phi, t)
    return VU(_v(metric, ops, p, q), _u(metric, ops, p, q))


@dataclass(frozen=True)
class DimensionIdentity:
    p: int
    q: int
    h_bc: int
    h_deformed: int
    v: int
    u_shifted: int  # u^{p-1,q-1}

    @property
    def holds(self) -> bool:
        return self.h_bc == self.h_deformed + self.v + self.u_shifted


def dimension_identity(metric: MetricContext, phi: Beltrami, t: Point) -> List[DimensionIdentity]:
    """dim H^{p,q}_BC = dim H^{p,q}_{BCφ(t)} + v^{p,q} + u^{p-1,q-1} по всем (p, q)."""
    ops = _deformed(metric, phi, t)
    deformed = deformed_bc_dims(metric, phi, t)
    rows = []
    for p, q in metric.algebra.bidegree_pairs():
        rows.append(
            DimensionIdentity(
                p,
                q,
                metric.harmonic_dim("bc", p, q),
                deformed[(p, q)],
                _v(metric, ops, p, q),
                _u(metric, ops, p - 1, q - 1),
            )
        )
    return rows


def exact_part_dimension(metric: MetricContext, phi: Beltrami, t: Point, p: int, q: int) -> int:
    """dim ker(∂∂̄)* ∩ Im ∂∂̄_φ ∩ A^{p,q}."""
    ops = _deformed(metric, phi, t)
    alg = metric.algebra
    idx = alg.block(p, q)
    if len(idx) == 0:
        return 0
    coclosed = null_space(metric.ddbar_star.matrix[:, idx], metric.rtol)
    image = ops.ddbar[np.ix_(idx, alg.block(p - 1, q - 1))]
    if image.shape[1] == 0:
        return 0
    return intersection(coclosed, image, metric.rtol).shape[1]


def deformed_dolbeault_dims(metric: MetricContext, phi: Beltrami, t: Point) -> Dict[Tuple[int, int], int]:
    """dim ker ∂̄_φ / Im ∂̄_φ по блокам."""
    ops = _deformed(metric, phi, t)
    alg = metric.algebra
    out = {}
    for p, q in alg.bidegree_pairs():
        idx = alg.block(p, q)
        kernel = len(idx) - metric.rank(ops.delbar[:, idx])
        out[(p, q)] = kernel - metric.rank(ops.delbar[np.ix_(idx, alg.block(p, q - 1))])
    return out


def deformed_derham_dims(metric: MetricContext, phi: Beltrami, t: Point) -> Dict[int, int]:
    """dim ker d_φ / Im d_φ по степеням (совпадает с b_k)."""
    ops = _deformed(metric, phi, t)
    alg = metric.algebra
    out = {}
    for k in range(2 * alg.n + 1):
        idx = alg.degree(k)
        out[k] = len(idx) - metric.rank(ops.d[:, idx]) - metric.rank(ops.d[np.ix_(idx, alg.degree(k - 1))])
    return out


@dataclass(frozen=True)
class XtDims:
    bc: Dict[Tuple[int, int], int]
    dolbeault: Dict[Tuple[int, int], int]
    bc_harmonic: Dict[Tuple[int, int], int]


def xt_cohomology_dims(metric: MetricContext, phi: Beltrami, t: Point) -> XtDims:
    """
    Когомологии Ботта-Черна и Дольбо многообразия X_t через деформированную биградуировку.

    Мономы η^I∧η̄^J считаются ортонормированными; `bc_harmonic` -- размерности
    ядер □_BC для ∂_t, ∂̄_t.
    """
    matrix = require_integrable(metric.model, phi, t, metric.rtol)
    grading = bigrading_from_matrix(metric.model, matrix)
    alg = metric.algebra
    rank = metric.rank
    laplacian = bc_laplacian(grading.del_, grading.delbar)
    bc, dolbeault, harmonic = {}, {}, {}
    for p, q in alg.bidegree_pairs():
        idx = alg.block(p, q)
        closed = len(idx) - rank(grading.d[:, idx])
        bc[(p, q)] = closed - rank(grading.ddbar[np.ix_(idx, alg.block(p - 1, q - 1))])
        kernel = len(idx) - rank(grading.delbar[:, idx])
        dolbeault[(p, q)] = kernel - rank(grading.delbar[np.ix_(idx, alg.block(p, q - 1))])
        harmonic[(p, q)] = len(idx) - rank(laplacian[np.ix_(idx, idx)])
    return XtDims(bc, dolbeault, harmonic)


def frolicher_defects(metric: MetricContext) -> Dict[int, int]:
    """Σ_{p+q=k} h^{p,q}_∂̄ - b_k (неотрицательно)."""
    dolbeault = dimension_table(metric, "dolbeault")
    derham = dimension_table(metric, "derham")
    return {
        k: sum(dim for (p, q), dim in dolbeault.items() if p + q == k) - derham[(k,)]
        for k in range(2 * metric.algebra.n + 1)
    }


def filtration_nesting(metric: MetricContext, k: int) -> float:
    """max_p невязка вложения F^{p+1}H^k ⊆ F^pH^k."""
    worst = 0.0
    for p in range(k):
        inner_chart = SubspaceChart(derham_coordinates(metric, k, filtration_columns(metric, p + 1, k)), metric.rtol)
        outer_chart = SubspaceChart(derham_coordinates(metric, k, filtration_columns(metric, p, k)), metric.rtol)
        worst = max(worst, inner_chart.contained_in(outer_chart))
    return worst


def full_filtration_gap(metric: MetricContext, k: int) -> int:
    """b_k - dim F^0H^k (ноль для ∂∂̄-моделей)."""
    columns = derham_coordinates(metric, k, filtration_columns(metric, 0, k))
    return metric.harmonic_dim("derham", k=k) - numerical_rank(columns, metric.rtol)

