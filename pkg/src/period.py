"""
Отображение периодов t -> F^pH^k(X_t) и его свойства.

Точка отображения строится из канонических деформаций BC-гармонического
базиса ⊕_{r>=p} 𝓗^{r,k-r}_BC: столбцы -- координаты e^{i_φ(t)}σ^l(t) в
H^k(X, C). Независимый оракул `fph_direct` считает ту же фильтрацию заново
по деформированной биградуировке.
"""
import logging
import threading
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.canonical import CanonicalDeformation, canonical_deformation
from src.cohomology import (
    SubspaceChart,
    ddbar_check,
    derham_coordinates,
    filtration_columns,
)
from src.config import settings
from src.deformation import (
    Beltrami,
    contraction_matrix,
    deformed_bigrading,
    exp_contract,
    exp_matrix,
    ks_class,
    require_integrable,
)
from src.errors import DdbarRequired, NotClosed, NotHarmonic, NotInFiltration, RankDrop
from src.exterior import Form
from src.linalg import lstsq, null_space, numerical_rank, orth
from src.metric import MetricContext, bc_laplacian
from src.series import Point, point_tuple, series_eval, series_partial

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class PeriodPoint:
    p: int
    k: int
    t: Tuple[complex, ...]
    chart: SubspaceChart
    labels: List[str]
    closure: float  # max ‖d e^{i_φ}σ^l(t)‖


@dataclass(frozen=True)
class IotaValue:
    """Две компоненты ι(φ)x в координатах H^{r-1,k-r+1}_BC и H^{r,k-r}_BC."""

    first: np.ndarray
    second: np.ndarray
    bidegree: Tuple[int, int]


class PeriodMap:
    """
    Отображение периодов семейства φ над моделью.

    Канонические деформации гармонических форм строятся лениво и кэшируются
    по бистепени под блокировкой, так что одну карту можно обходить из
    нескольких потоков; `warm` строит кэш заранее.
    """

    def __init__(self, metric: MetricContext, phi: Beltrami, order: Optional[int] = None) -> None:
        self.metric = metric
        self.model = metric.model
        self.algebra = metric.algebra
        self.phi = phi
        self.order = phi.order if order is None else order
        self._deformations: Dict[Tuple[int, int], List[CanonicalDeformation]] = {}
        self._lock = threading.RLock()
        if not ddbar_check(metric).holds:
            logger.warning(f"Модель {self.model.name} не удовлетворяет ∂∂̄-лемме: теоремы о периодах не гарантированы")

    # --- генераторы ---

    def deformations(self, r: int, s: int) -> List[CanonicalDeformation]:
        with self._lock:
            if (r, s) not in self._deformations:
                basis = self.metric.harmonic_basis("bc", r, s)
                self._deformations[(r, s)] = [
                    canonical_deformation(self.metric, Form(self.algebra, basis[:, j]), self.phi, self.order)
                    for j in range(basis.shape[1])
                ]
            return self._deformations[(r, s)]

    def bidegrees(self, p: int, k: int) -> List[Tuple[int, int]]:
        n = self.algebra.n
        return [(r, k - r) for r in range(min(k, n), max(p, k - n, 0) - 1, -1)]

    def generators(self, p: int, k: int) -> List[CanonicalDeformation]:
        return [cd for r, s in self.bidegrees(p, k) for cd in self.deformations(r, s)]

    def labels(self, p: int, k: int) -> List[str]:
        return [f"σ({r},{s})#{j}" for r, s in self.bidegrees(p, k) for j in range(len(self.deformations(r, s)))]

    def warm(self, p: int, k: int) -> None:
        self.generators(p, k)

    # --- точка ---

    def _values(self, p: int, k: int, t: Point) -> np.ndarray:
        exp = exp_matrix(self.algebra, self.phi.at(t))
        columns = [exp @ cd.at(t) for cd in self.generators(p, k)]
        return np.column_stack(columns) if columns else np.zeros((self.algebra.size, 0), dtype=complex)

    def point(self, p: int, k: int, t: Point) -> PeriodPoint:
        """
        Φ^{p,k}(t).

        Raises:
            FrameDegenerate, NotIntegrableAt: φ(t) недопустима.
            RankDrop: Столбцы линейно зависимы.
        """
        require_integrable(self.model, self.phi, t, self.metric.rtol)
        values = self._values(p, k, t)
        chart = SubspaceChart(derham_coordinates(self.metric, k, values), self.metric.rtol)
        if not chart.is_full_rank():
            raise RankDrop(f"Φ^{p},{k}({t}): ранг {chart.basis.shape[1]} < {chart.dim}")
        closure = float(np.max(np.linalg.norm(self.metric.d.matrix @ values, axis=0))) if values.size else 0.0
        return PeriodPoint(p, k, point_tuple(t, self.phi.m), chart, self.labels(p, k), closure)

    # --- оракул ---

    def fph_direct(self, p: int, k: int, t: Point) -> SubspaceChart:
        """
        F^pH^k(X_t) заново: BC-гармонические формы ∂_t, ∂̄_t в бистепенях (r, k-r)_t, r >= p.

        Raises:
            FrameDegenerate, NotIntegrableAt: φ(t) недопустима.
        """
        grading = deformed_bigrading(self.model, self.phi, t, self.metric.rtol)
        laplacian = bc_laplacian(grading.del_, grading.delbar)
        columns = []
        for r, s in self.bidegrees(p, k):
            idx = self.algebra.block(r, s)
            kernel = null_space(laplacian[np.ix_(idx, idx)], self.metric.rtol)
            local = np.zeros((self.algebra.size, kernel.shape[1]), dtype=complex)
            local[idx] = kernel
            columns.append(grading.from_frame(local))
        values = np.hstack(columns) if columns else np.zeros((self.algebra.size, 0), dtype=complex)
        coords = derham_coordinates(self.metric, k, values)
        return SubspaceChart(orth(coords, self.metric.rtol), self.metric.rtol)

    # --- производные ---

    def derivative_vectors(self, p: int, k: int, direction: int) -> np.ndarray:
        """∂/∂t_i (e^{i_φ(t)}σ^l(t)) при t = 0 по производной ряда."""
        zero = (0.0,) * self.phi.m
        columns = []
        for cd in self.generators(p, k):
            series = exp_contract(self.phi, cd.series)
            columns.append(series_eval(series_partial(series, direction), zero))
        return np.column_stack(columns) if columns else np.zeros((self.algebra.size, 0), dtype=complex)

    def transversality_residual(self, p: int, k: int, direction: int) -> float:
        """Норма компонент производных классов, ортогональных F^{p-1}H^k."""
        coords = derham_coordinates(self.metric, k, self.derivative_vectors(p, k, direction))
        if coords.size == 0:
            return 0.0
        target = derham_coordinates(self.metric, k, filtration_columns(self.metric, max(p - 1, 0), k))
        basis = orth(target, self.metric.rtol)
        rest = coords - basis @ (basis.conj().T @ coords)
        return float(np.max(np.linalg.norm(rest, axis=0)))

    def holomorphy_residual(self, p: int, k: int, t0: Point, step: float = settings.HOLOMORPHY_STEP) -> float:
        """
        Дефект Коши-Римана аффинных координат Φ^{p,k} в t0 по всем направлениям.

        Опорные строки фиксируются по точке t0.
        """
        base = np.array(point_tuple(t0, self.phi.m))
        start = self.point(p, k, base).chart
        if start.dim == 0:
            return 0.0
        pivots = start.echelon[1]
        worst = 0.0
        for i in range(self.phi.m):
            shift = np.zeros(self.phi.m, dtype=complex)
            shift[i] = step

            def chart(delta: np.ndarray) -> np.ndarray:
                return self.point(p, k, base + delta).chart.affine(pivots)

            dx = (chart(shift) - chart(-shift)) / (2 * step)
            dy = (chart(1j * shift) - chart(-1j * shift)) / (2 * step)
            worst = max(worst, float(np.linalg.norm(dx - dy / 1j)))
        return worst

    def tangent_crosscheck(self, p: int, k: int, direction: int, step: float = settings.DERIVATIVE_STEP) -> float:
        """Относительное расхождение производной ряда и центральной разности в t = 0."""
        series = derham_coordinates(self.metric, k, self.derivative_vectors(p, k, direction))
        shift = np.zeros(self.phi.m, dtype=complex)
        shift[direction] = step
        plus = derham_coordinates(self.metric, k, self._values(p, k, shift))
        minus = derham_coordinates(self.metric, k, self._values(p, k, -shift))
        difference = (plus - minus) / (2 * step)
        return float(np.linalg.norm(difference - series) / max(np.linalg.norm(series), 1.0))

    # --- диаграмма Кодаиры-Спенсера ---

    def hodge_decomposition_matrix(self, k: int) -> np.ndarray:
        """Координаты в H^k всех BC-гармонических форм степени k (столбцы по убыванию r)."""
        return derham_coordinates(self.metric, k, filtration_columns(self.metric, 0, k))

    def diagram_residual(self, p: int, k: int, direction: int) -> float:
        """
        Сравнение dΦ(∂/∂t_i) с ι(𝓗_∂̄ κ(∂/∂t_i)) на генераторах F^pH^k.

        Производная класса раскладывается по H^{r,k-r}_BC; компоненты в (r-1, k-r+1)
        и (r, k-r) сравниваются с ι, остальные должны быть нулевыми.
        """
        harmonic = ks_class(self.model, self.phi, direction, self.metric.rtol).beltrami_matrix()
        decomposition = self.hodge_decomposition_matrix(k)
        n = self.algebra.n
        sizes = [(r, k - r, self.metric.harmonic_dim("bc", r, k - r)) for r in range(min(k, n), max(0, k - n) - 1, -1)]
        worst = 0.0
        derivatives = self.derivative_vectors(p, k, direction)
        for column, cd in enumerate(self.generators(p, k)):
            coords = derham_coordinates(self.metric, k, derivatives[:, column])
            solution, _ = lstsq(decomposition, coords, self.metric.rtol)
            iota = iota_map(self.metric, harmonic, cd.sigma0)
            r, s = cd.bidegree if cd.bidegree is not None else (k, 0)
            offset = 0
            for a, b, h in sizes:
                piece = solution[offset : offset + h]
                offset += h
                if (a, b) == (r - 1, s + 1):
                    expected = iota.first
                elif (a, b) == (r, s):
                    expected = iota.second
                else:
                    expected = np.zeros(h, dtype=complex)
                worst = max(worst, float(np.linalg.norm(piece - expected)) if h else 0.0)
        return worst

    def exponential_isomorphism(self, k: int, t: Point) -> Tuple[np.ndarray, int]:
        """
        Матрица [σ0] -> [e^{i_φ(t)}σ(t)] на H^k(X, C) в координатах H^k.

        Returns:
            (матрица b_k x b_k, её ранг).
        """
        require_integrable(self.model, self.phi, t, self.metric.rtol)
        before = self.hodge_decomposition_matrix(k)
        after = derham_coordinates(self.metric, k, self._values(0, k, t))
        solution, _ = lstsq(before.T, after.T, self.metric.rtol)
        matrix = solution.T
        return matrix, numerical_rank(matrix, self.metric.rtol)


def period_point(metric: MetricContext, p: int, k: int, phi: Beltrami, t: Point) -> PeriodPoint:
    return PeriodMap(metric, phi).point(p, k, t)


def fph_direct(metric: MetricContext, p: int, k: int, phi: Beltrami, t: Point) -> SubspaceChart:
    return PeriodMap(metric, phi).fph_direct(p, k, t)


def transversality_residual(metric: MetricContext, p: int, k: int, phi: Beltrami, direction: int = 0) -> float:
    return PeriodMap(metric, phi).transversality_residual(p, k, direction)


def holomorphy_residual(metric: MetricContext, p: int, k: int, phi: Beltrami, t0: Point) -> float:
    return PeriodMap(metric, phi).holomorphy_residual(p, k, t0)


def diagram_residual(metric: MetricContext, p: int, k: int, phi: Beltrami, direction: int = 0) -> float:
    return PeriodMap(metric, phi).diagram_residual(p, k, direction)


def iota_map(metric: MetricContext, phi1: np.ndarray, x: Form) -> IotaValue:
    """
    ι(φ1)x = (i_φx - ∂̄u) - 𝓗_BC ∂u,  u = (∂∂̄)* G_BC ∂ i_φ x.

    Args:
        metric: Гармоническая теория.
        phi1: Матрица ∂̄-гармонической T^{1,0}-значной (0,1)-формы.
        x: BC-гармоническая форма чистой бистепени (r, k-r).

    Raises:
        NotHarmonic: x не гармонична или не чистой бистепени.
    """
    bidegrees = x.bidegrees(settings.HARMONIC_TOLERANCE * max(1.0, x.norm()))
    if len(bidegrees) != 1:
        raise NotHarmonic(f"x должна быть чистой бистепени, получено {sorted(bidegrees)}")
    residual = float(np.linalg.norm(x.coeffs - metric.harmonic["bc"] @ x.coeffs))
    if residual > settings.HARMONIC_TOLERANCE * max(1.0, x.norm()):
        raise NotHarmonic(f"x не лежит в ker □_BC: невязка {residual:.3e}")
    r, s = bidegrees.pop()
    contracted = contraction_matrix(metric.algebra, phi1) @ x.coeffs
    u = metric.ddbar_star.matrix @ metric.green["bc"] @ metric.del_.matrix @ contracted
    first = contracted - metric.delbar.matrix @ u
    second = -metric.harmonic["bc"] @ metric.del_.matrix @ u
    n = metric.algebra.n
    first_basis = (
        metric.harmonic_basis("bc", r - 1, s + 1) if r >= 1 and s < n else np.zeros((metric.algebra.size, 0))
    )
    second_basis = metric.harmonic_basis("bc", r, s)
    return IotaValue(first_basis.conj().T @ first, second_basis.conj().T @ second, (r, s))


@dataclass(frozen=True, eq=False)
class Splitting:
    """σ = dx + Σ_r β^{r,k-r}."""

    x: Form
    betas: Dict[Tuple[int, int], Form]
    y: Form  # ∂∂̄y = ∂x^{p-1,k-p}
    residual: float
    ddbar_residual: float = 0.0
    notes: List[str] = field(default_factory=list)


def ppbar_decompose(metric: MetricContext, sigma: Form, p: int) -> Splitting:
    """
    Разложение замкнутой σ ∈ F^pA^k в d-точную часть и замкнутые формы чистого типа.

    Гармонические части берутся из BC-гармонических пространств (r >= p),
    точная часть -- псевдообращением d, а вклад ∂x^{p-1,k-p} погашается
    решением ∂∂̄y = ∂x^{p-1,k-p}.

    Raises:
        DdbarRequired: Модель не удовлетворяет ∂∂̄-лемме.
        NotClosed: dσ ≠ 0.
        NotInFiltration: σ имеет компоненты с голоморфной степенью < p.
    """
    if not ddbar_check(metric).holds:
        raise DdbarRequired(f"модель {metric.model.name} не удовлетворяет ∂∂̄-лемме")
    alg = metric.algebra
    scale = max(1.0, sigma.norm())
    k = sigma.degree(settings.HARMONIC_TOLERANCE * scale)
    if k is None:
        if sigma.norm() == 0:
            zero = alg.zero()
            return Splitting(zero, {}, zero, 0.0)
        raise NotInFiltration("σ не однородна по полной степени")
    closure = float(np.linalg.norm(metric.d.matrix @ sigma.coeffs))
    if closure > 1e-10 * scale:
        raise NotClosed(f"dσ ≠ 0: невязка {closure:.3e}")
    low = [(a, b) for a, b in sigma.bidegrees(settings.HARMONIC_TOLERANCE * scale) if a < p]
    if low:
        raise NotInFiltration(f"σ имеет компоненты {sorted(low)} вне F^{p}")

    columns = filtration_columns(metric, p, k)
    coords = derham_coordinates(metric, k, sigma.coeffs)
    weights, _ = lstsq(derham_coordinates(metric, k, columns), coords, metric.rtol)
    harmonic = columns @ weights
    betas: Dict[Tuple[int, int], Form] = {}
    for r in range(min(k, alg.n), max(p, k - alg.n, 0) - 1, -1):
        part = Form(alg, harmonic).component(r, k - r)
        betas[(r, k - r)] = part

    rest = sigma.coeffs - harmonic
    x0 = np.linalg.pinv(metric.d.matrix, rcond=metric.rtol) @ rest
    keep = alg.bidegrees[:, 0] >= p
    x_high = np.where(keep, x0, 0)
    y = np.zeros(alg.size, dtype=complex)
    ddbar_residual = 0.0
    if p >= 1:
        obstruction = metric.del_.matrix @ Form(alg, x0).component(p - 1, k - p).coeffs
        y = np.linalg.pinv(metric.ddbar.matrix, rcond=metric.rtol) @ obstruction
        ddbar_residual = float(np.linalg.norm(metric.ddbar.matrix @ y - obstruction))
    x = x_high + metric.delbar.matrix @ y if p >= 1 else x0
    total = metric.d.matrix @ x + sum((b.coeffs for b in betas.values()), np.zeros(alg.size, dtype=complex))
    residual = float(np.linalg.norm(sigma.coeffs - total))
    return Splitting(Form(alg, x), betas, Form(alg, y), residual, ddbar_residual)


def exponential_isomorphism(metric: MetricContext, k: int, phi: Beltrami, t: Point) -> Tuple[np.ndarray, int]:
    return PeriodMap(metric, phi).exponential_isomorphism(k, t)


def grid_points(values: Sequence[complex], m: int) -> List[Tuple[complex, ...]]:
    """Сетка по осям: каждое значение в каждом направлении (без повторов нуля)."""
    points: List[Tuple[complex, ...]] = []
    for i in range(m):
        for value in values:
            point = tuple(value if j == i else 0j for j in range(m))
            if point not in points:
                points.append(point)
    return sorted(points, key=lambda z: tuple((abs(c), c.real, c.imag) for c in z))
