"""
Каноническая деформация Ботта-Черна.

Для BC-гармонической формы σ0 ряд σ(t) определяется рекурсией
σ_e = -K Σ_{f<=e, |f|>=1} i_{φ_f} σ_{e-f},  K = G_BC(∂̄*∂∂* + ∂̄*)∂,
то есть является неподвижной точкой σ = σ0 - K i_φ σ.
"""
import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.config import settings
from src.deformation import Beltrami, contraction_matrix, deformed_operators, require_integrable
from src.errors import NotHarmonic
from src.exterior import Form
from src.linalg import numerical_rank, orth
from src.metric import MetricContext
from src.series import Exponent, FormSeries, Point, all_exponents, exponent_sub, series_add, series_apply, series_eval

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class CanonicalDeformation:
    sigma0: Form
    bidegree: Optional[Tuple[int, int]]
    series: FormSeries
    phi: Beltrami

    @property
    def order(self) -> int:
        return self.series.order

    def at(self, t: Point) -> np.ndarray:
        return series_eval(self.series, t)

    def correction_norms(self) -> Dict[int, float]:
        """‖σ_k‖ по полной степени k (норма однородной части)."""
        norms: Dict[int, float] = {}
        for k in range(self.order + 1):
            parts = [c for _, c in self.series.homogeneous(k)]
            norms[k] = float(np.sqrt(sum(np.linalg.norm(c) ** 2 for c in parts))) if parts else 0.0
        return norms


def recursion_kernel(metric: MetricContext) -> np.ndarray:
    """K = G_BC(∂̄*∂∂* + ∂̄*)∂."""
    return metric.recursion_operator @ metric.del_.matrix


def _harmonic_bidegree(metric: MetricContext, sigma0: Form) -> Optional[Tuple[int, int]]:
    scale = max(1.0, sigma0.norm())
    bidegrees = sigma0.bidegrees(settings.HARMONIC_TOLERANCE * scale)
    if len(bidegrees) > 1:
        raise NotHarmonic(f"σ0 не имеет чистой бистепени: {sorted(bidegrees)}")
    residual = float(np.linalg.norm(sigma0.coeffs - metric.harmonic["bc"] @ sigma0.coeffs))
    if residual > settings.HARMONIC_TOLERANCE * scale:
        raise NotHarmonic(f"σ0 не лежит в ker □_BC: невязка {residual:.3e}")
    return bidegrees.pop() if bidegrees else None


def canonical_deformation(
    metric: MetricContext, sigma0: Form, phi: Beltrami, order: Optional[int] = None
) -> CanonicalDeformation:
    """
    Строит каноническую деформацию σ(t) до порядка `order`.

    Args:
        metric: Гармоническая теория модели.
        sigma0: BC-гармоническая форма чистой бистепени.
        phi: Семейство Бельтрами.
        order: Порядок усечения (по умолчанию порядок семейства).

    Raises:
        NotHarmonic: σ0 не гармонична.
    """
    bidegree = _harmonic_bidegree(metric, sigma0)
    order = phi.order if order is None else order
    kernel = recursion_kernel(metric)
    alg = metric.algebra
    phi_terms = {e: c for e, c in phi.series.terms.items() if sum(e) >= 1}
    contractions = {e: contraction_matrix(alg, c) for e, c in phi_terms.items()}

    sigma: Dict[Exponent, np.ndarray] = {(0,) * phi.m: sigma0.coeffs}
    for exponent in all_exponents(phi.m, order):
        if sum(exponent) == 0:
            continue
        total = np.zeros(alg.size, dtype=complex)
        for f, c in contractions.items():
            rest = exponent_sub(exponent, f)
            if rest is not None and rest in sigma:
                total = total + c @ sigma[rest]
        term = -kernel @ total
        if np.any(term != 0):
            sigma[exponent] = term
    cd = CanonicalDeformation(sigma0, bidegree, FormSeries(phi.m, order, sigma), phi)
    logger.debug(f"Каноническая деформация {bidegree}: нормы поправок {cd.correction_norms()}")
    return cd


def fixed_point_residual(metric: MetricContext, cd: CanonicalDeformation) -> float:
    """Максимальная норма коэффициента ряда σ - σ0 + K i_φ σ."""
    alg = metric.algebra
    kernel = recursion_kernel(metric)
    contracted = series_apply(lambda f, v: contraction_matrix(alg, f) @ v, cd.phi.series, cd.series)
    corrected = series_add(cd.series, series_apply(kernel, contracted))
    zero = (0,) * cd.phi.m
    worst = 0.0
    for exponent in corrected.exponents():
        coeff = corrected.coefficient(exponent)
        if exponent == zero:
            coeff = coeff - cd.sigma0.coeffs
        if coeff.size:
            worst = max(worst, float(np.linalg.norm(coeff)))
    return worst


def closedness_residual(metric: MetricContext, cd: CanonicalDeformation, t: Point, tol: float = settings.TOLERANCE) -> float:
    """
    ‖d_φ(t) σ(t)‖ в точке t.

    Raises:
        NotIntegrableAt: φ(t) не интегрируема.
    """
    matrix = require_integrable(metric.model, cd.phi, t, tol)
    operators = deformed_operators(metric.model, matrix)
    return float(np.linalg.norm(operators.d @ cd.at(t)))


@dataclass(frozen=True)
class FtildeReport:
    matrix: np.ndarray  # столбцы -- σ^l(t)
    rank: int
    codomain_residuals: List[float]  # ‖(∂∂̄)* σ^l(t)‖
    closedness: List[float]  # ‖d_φ σ^l(t)‖


def _deformations(
    metric: MetricContext, basis: np.ndarray, phi: Beltrami, order: Optional[int]
) -> List[CanonicalDeformation]:
    return [canonical_deformation(metric, Form(metric.algebra, basis[:, j]), phi, order) for j in range(basis.shape[1])]


def ftilde_eval(
    metric: MetricContext,
    basis: np.ndarray,
    phi: Beltrami,
    t: Point,
    order: Optional[int] = None,
    tol: float = settings.TOLERANCE,
) -> FtildeReport:
    """
    Значения f̃_t на гармонических формах (столбцах `basis`).

    Returns:
        Матрица σ^l(t), её ранг и невязки кообласти.
    """
    matrix = require_integrable(metric.model, phi, t, tol)
    operators = deformed_operators(metric.model, matrix)
    columns = [cd.at(t) for cd in _deformations(metric, basis, phi, order)]
    values = np.column_stack(columns) if columns else np.zeros((metric.algebra.size, 0), dtype=complex)
    return FtildeReport(
        values,
        numerical_rank(values, metric.rtol),
        [float(np.linalg.norm(metric.ddbar_star.matrix @ v)) for v in columns],
        [float(np.linalg.norm(operators.d @ v)) for v in columns],
    )


def vt_membership(
    metric: MetricContext,
    basis: np.ndarray,
    phi: Beltrami,
    t: Point,
    order: Optional[int] = None,
    threshold: float = settings.MEMBERSHIP_THRESHOLD,
) -> List[bool]:
    """
    Принадлежность σ0 (столбцов `basis`) пространству V_t.

    σ0 ∈ V_t, если ‖d_φ σ(t)‖ < threshold · max(1, ‖σ0‖).
    """
    result = []
    for cd in _deformations(metric, basis, phi, order):
        residual = closedness_residual(metric, cd, t)
        result.append(residual < threshold * max(1.0, cd.sigma0.norm()))
    return result


def non_exactness(metric: MetricContext, cd: CanonicalDeformation, t: Point, tol: float = settings.TOLERANCE) -> float:
    """Норма части σ(t), ортогональной Im ∂∂̄_φ(t) в блоке бистепени σ0."""
    value = cd.at(t)
    if cd.bidegree is None:
        return float(np.linalg.norm(value))
    p, q = cd.bidegree
    alg = metric.algebra
    matrix = require_integrable(metric.model, cd.phi, t, tol)
    ddbar_phi = deformed_operators(metric.model, matrix).ddbar
    image = orth(ddbar_phi[:, alg.block(p - 1, q - 1)], metric.rtol)
    rest = value - image @ (image.conj().T @ value)
    return float(np.linalg.norm(rest))


def first_order_term(metric: MetricContext, sigma0: Form, phi: Beltrami, direction: int) -> np.ndarray:
    """σ_1 = -K i_{φ_1} σ0 для направления t_i."""
    return -recursion_kernel(metric) @ contraction_matrix(metric.algebra, phi.first_order(direction)) @ sigma0.coeffs


def harmonic_forms(metric: MetricContext, p: int, q: int) -> List[Form]:
    basis = metric.harmonic_basis("bc", p, q)
    return [Form(metric.algebra, basis[:, j]) for j in range(basis.shape[1])]


def bidegrees_with_harmonics(metric: MetricContext) -> Sequence[Tuple[int, int]]:
    return [(p, q) for p, q in metric.algebra.bidegree_pairs() if metric.harmonic_dim("bc", p, q) > 0]
