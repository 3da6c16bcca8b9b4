"""
Дифференциалы Бельтрами и деформированные операторы.

φ(t) = φ^α_β̄(t) ω̄^β ⊗ e_α хранится как ряд по t с коэффициентами --
матрицами n x n (строка α, столбец β). Все вычисления на X_t ведутся на том
же пространстве инвариантных форм: структура X_t задаётся деформированным
корепером η^α = ω^α + i_φ ω^α и его сопряжённым.
"""
import logging
from dataclasses import dataclass
from functools import cached_property
from math import factorial
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg
import sympy
from pydantic import BaseModel, Field, ValidationError, model_validator

from src.config import settings
from src.errors import FrameDegenerate, MalformedSpec, NotClosed, NotIntegrableAt
from src.exterior import ExteriorAlgebra, Form, LieModel, exact_number, exterior_algebra, read_json
from src.linalg import column_norm, containment_residual, spectral_split
from src.series import FormSeries, Point, series_add, series_apply, series_eval

logger = logging.getLogger(__name__)


# --- Схема файла семейства ---


class FamilyTermSpec(BaseModel):
    exponent: List[int]
    alpha: int = Field(ge=1)
    beta: int = Field(ge=1)
    re: float = 0.0
    im: float = 0.0


class FamilySpec(BaseModel):
    name: str
    m: int = Field(ge=1)
    N: int = Field(ge=1)
    model: Optional[str] = None  # имя модели, для которой задано семейство
    terms: List[FamilyTermSpec] = []

    @model_validator(mode="after")
    def _exponents(self) -> "FamilySpec":
        for term in self.terms:
            if len(term.exponent) != self.m or min(term.exponent) < 0:
                raise ValueError(f"мультииндекс {term.exponent} не соответствует m={self.m}")
            if sum(term.exponent) == 0:
                raise ValueError("φ(0) должно быть 0: слагаемые степени 0 запрещены")
            if sum(term.exponent) > self.N:
                raise ValueError(f"степень {sum(term.exponent)} слагаемого превышает N={self.N}")
        return self


@dataclass(frozen=True, eq=False)
class Beltrami:
    """Семейство φ(t) в виде усечённого ряда с матричными коэффициентами."""

    name: str
    n: int
    series: FormSeries
    spec: Optional[FamilySpec] = None

    @property
    def m(self) -> int:
        return self.series.m

    @property
    def order(self) -> int:
        return self.series.order

    @classmethod
    def zero(cls, n: int, m: int = 1, order: int = settings.TRUNCATION_ORDER) -> "Beltrami":
        return cls("zero", n, FormSeries.zero((n, n), m, order))

    @classmethod
    def linear(cls, name: str, directions: Sequence[np.ndarray], order: int = settings.TRUNCATION_ORDER) -> "Beltrami":
        """φ(t) = Σ_i t_i Φ_i."""
        m = len(directions)
        n = directions[0].shape[0]
        terms = {tuple(int(i == j) for j in range(m)): np.asarray(d, dtype=complex) for i, d in enumerate(directions)}
        terms[(0,) * m] = np.zeros((n, n), dtype=complex)
        return cls(name, n, FormSeries(m, order, terms))

    def at(self, t: Point) -> np.ndarray:
        """Матрица Φ(t)."""
        return series_eval(self.series, t)

    def first_order(self, direction: int) -> np.ndarray:
        """Коэффициент при t_i в φ (направление с 0)."""
        exponent = tuple(int(j == direction) for j in range(self.m))
        return self.series.coefficient(exponent)

    def exact_at(self, t: Sequence[sympy.Expr]) -> Dict[Tuple[int, int], sympy.Expr]:
        """
        Точная матрица Φ(t) для рациональной точки (только для семейств из файла).

        Raises:
            MalformedSpec: Семейство задано не файлом.
        """
        if self.spec is None:
            raise MalformedSpec(f"семейство {self.name} не имеет точного описания")
        out: Dict[Tuple[int, int], sympy.Expr] = {}
        for term in self.spec.terms:
            monomial = sympy.Mul(*[x**e for x, e in zip(t, term.exponent)])
            key = (term.alpha - 1, term.beta - 1)
            out[key] = sympy.expand(out.get(key, 0) + exact_number(term.re, term.im) * monomial)
        return out


def load_family(source: Union[FamilySpec, dict, str, Path], model: LieModel) -> Beltrami:
    """
    Загружает семейство деформаций и привязывает его к модели.

    Raises:
        ModelFileError: Файл не читается или не является JSON.
        MalformedSpec: Нарушена схема или индексы α, β вне 1..n.
    """
    if isinstance(source, (str, Path)):
        source = read_json(Path(source))
    if isinstance(source, FamilySpec):
        spec = source
    else:
        try:
            spec = FamilySpec.model_validate(source)
        except ValidationError as e:
            raise MalformedSpec(f"некорректное описание семейства: {e}") from e

    n = model.n
    terms: Dict[Tuple[int, ...], np.ndarray] = {(0,) * spec.m: np.zeros((n, n), dtype=complex)}
    for term in spec.terms:
        if term.alpha > n or term.beta > n:
            raise MalformedSpec(f"семейство {spec.name}: индекс ({term.alpha}, {term.beta}) вне 1..{n}")
        key = tuple(term.exponent)
        coeff = terms.setdefault(key, np.zeros((n, n), dtype=complex))
        coeff[term.alpha - 1, term.beta - 1] += complex(term.re, term.im)
    if spec.model is not None and spec.model != model.name:
        logger.warning(f"Семейство {spec.name} задано для модели {spec.model}, а используется с {model.name}")
    logger.info(f"Загружено семейство {spec.name}: m={spec.m}, N={spec.N}, {len(spec.terms)} слагаемых.")
    return Beltrami(spec.name, n, FormSeries(spec.m, spec.N, terms), spec)


# --- Свёртка и экспонента ---


def contraction_matrix(algebra: ExteriorAlgebra, phi: np.ndarray) -> np.ndarray:
    """Матрица i_φ: чётное дифференцирование ω^α -> Σ_β φ[α, β] ω̄^β."""
    return np.tensordot(phi, algebra.contraction_basis, axes=2)


def exp_matrix(algebra: ExteriorAlgebra, phi: np.ndarray, sign: int = 1) -> np.ndarray:
    """e^{±i_φ} = Σ_{k<=n} (±i_φ)^k / k! (i_φ понижает голоморфную степень)."""
    c = sign * contraction_matrix(algebra, phi)
    out = np.eye(algebra.size, dtype=complex)
    power = np.eye(algebra.size, dtype=complex)
    for k in range(1, algebra.n + 1):
        power = power @ c
        out = out + power / factorial(k)
    return out


def _contract_series(algebra: ExteriorAlgebra, phi: Beltrami, a: FormSeries) -> FormSeries:
    return series_apply(lambda f, v: contraction_matrix(algebra, f) @ v, phi.series, a)


def _as_series(a: Union[Form, FormSeries], phi: Beltrami) -> FormSeries:
    if isinstance(a, FormSeries):
        return a
    return FormSeries.constant(a.coeffs, phi.m, phi.order)


def contract(
    phi: Union[Beltrami, np.ndarray], a: Union[Form, FormSeries], t: Optional[Point] = None
) -> Union[Form, FormSeries]:
    """
    Свёртка i_φ.

    Args:
        phi: Матрица Φ или семейство.
        a: Форма или ряд форм.
        t: Точка; если задана вместе с семейством, φ вычисляется в ней.

    Returns:
        Форма, если φ -- матрица (или задана точка t) и a -- форма;
        иначе ряд i_{φ(t)} a(t).
    """
    if isinstance(a, Form) and (isinstance(phi, np.ndarray) or t is not None):
        matrix = phi if isinstance(phi, np.ndarray) else phi.at(t)
        return Form(a.algebra, contraction_matrix(a.algebra, matrix) @ a.coeffs)
    algebra = a.algebra if isinstance(a, Form) else exterior_algebra(phi.n)
    return _contract_series(algebra, phi, _as_series(a, phi))


def exp_contract(
    phi: Union[Beltrami, np.ndarray], a: Union[Form, FormSeries], t: Optional[Point] = None, sign: int = 1
) -> Union[Form, FormSeries]:
    """
    Экспонента e^{i_φ} (или e^{-i_φ} при sign=-1).

    Для рядов считается Σ_k i_φ^k a / k! с усечением по степени t.
    """
    if isinstance(a, Form) and (isinstance(phi, np.ndarray) or t is not None):
        matrix = phi if isinstance(phi, np.ndarray) else phi.at(t)
        return Form(a.algebra, exp_matrix(a.algebra, matrix, sign) @ a.coeffs)
    algebra = a.algebra if isinstance(a, Form) else exterior_algebra(phi.n)
    term = _as_series(a, phi)
    result = term
    for k in range(1, algebra.n + 1):
        term = series_apply(lambda v, k=k: sign * v / k, _contract_series(algebra, phi, term))
        result = series_add(result, term)
    return result


# --- Интегрируемость ---


def frame_singular_value(phi: np.ndarray) -> float:
    """Минимальное сингулярное число матрицы корепера (η, η̄) в базисе (ω, ω̄)."""
    n = phi.shape[0]
    frame = np.block([[np.eye(n), phi], [phi.conj(), np.eye(n)]])
    return float(scipy.linalg.svdvals(frame).min())


def deformed_coframe(algebra: ExteriorAlgebra, phi: np.ndarray) -> List[np.ndarray]:
    """Векторы η^α = ω^α + Σ_β φ[α, β] ω̄^β."""
    out = []
    for alpha in range(algebra.n):
        eta = algebra.generator(alpha + 1).coeffs.copy()
        for beta in range(algebra.n):
            eta = eta + phi[alpha, beta] * algebra.generator(beta + 1, conjugate=True).coeffs
        out.append(eta)
    return out


def check_frame(phi: np.ndarray, t: Point, tol: float = settings.TOLERANCE) -> None:
    smallest = frame_singular_value(phi)
    if smallest < tol:
        raise FrameDegenerate(_point(t), smallest)


def _point(t: Point) -> Tuple[complex, ...]:
    return (complex(t),) if np.isscalar(t) else tuple(complex(x) for x in t)


def integrability_residual_matrix(model: LieModel, phi: np.ndarray) -> float:
    """max_α ‖dη^α ∧ η¹ ∧ ... ∧ ηⁿ‖ для матрицы Φ."""
    alg = model.algebra
    etas = deformed_coframe(alg, phi)
    top = alg.monomial().coeffs
    for eta in etas:
        top = alg.wedge_vectors(top, eta)
    return max(float(np.linalg.norm(alg.wedge_vectors(model.d.matrix @ eta, top))) for eta in etas)


def integrability_residual(model: LieModel, phi: Beltrami, t: Point, tol: float = settings.TOLERANCE) -> float:
    """
    Невязка интегрируемости φ(t) по критерию идеала.

    Raises:
        FrameDegenerate: Деформированный корепер вырожден.
    """
    matrix = phi.at(t)
    check_frame(matrix, t, tol)
    return integrability_residual_matrix(model, matrix)


def require_integrable(model: LieModel, phi: Beltrami, t: Point, tol: float = settings.TOLERANCE) -> np.ndarray:
    """
    Возвращает Φ(t), если φ интегрируема в t.

    Raises:
        FrameDegenerate: Корепер вырожден.
        NotIntegrableAt: Невязка выше `tol`.
    """
    residual = integrability_residual(model, phi, t, tol)
    if residual > tol:
        raise NotIntegrableAt(_point(t), residual)
    return phi.at(t)


# --- Деформированные операторы ---


@dataclass(frozen=True, eq=False)
class DeformedOperators:
    """Матрицы i_φ, 𝓛^{1,0}_φ = i_φ∂ - ∂i_φ, ∂̄_φ, d_φ и ∂∂̄_φ для фиксированной Φ."""

    model: LieModel
    phi: np.ndarray
    contraction: np.ndarray
    lie: np.ndarray
    delbar: np.ndarray
    d: np.ndarray
    ddbar: np.ndarray

    def d_squared(self) -> float:
        return float(np.max(np.abs(self.d @ self.d))) if self.d.size else 0.0

    def conjugation_residual(self) -> float:
        """Максимум по мономам ‖e^{-i_φ} d e^{i_φ} a - (∂ + ∂̄ - 𝓛^{1,0}_φ) a‖."""
        alg = self.model.algebra
        conjugated = exp_matrix(alg, self.phi, -1) @ self.model.d.matrix @ exp_matrix(alg, self.phi)
        return column_norm(conjugated - self.d)


def deformed_operators(model: LieModel, phi: np.ndarray) -> DeformedOperators:
    contraction = contraction_matrix(model.algebra, phi)
    de, db = model.del_.matrix, model.delbar.matrix
    lie = contraction @ de - de @ contraction
    delbar_phi = db - lie
    return DeformedOperators(model, phi, contraction, lie, delbar_phi, de + delbar_phi, de @ delbar_phi)


def deformed_delbar(model: LieModel, phi: Beltrami, t: Point, a: Form) -> Form:
    """∂̄_φ(t) a = ∂̄a - 𝓛^{1,0}_φ a."""
    return Form(model.algebra, deformed_operators(model, phi.at(t)).delbar @ a.coeffs)


def deformed_d(model: LieModel, phi: Beltrami, t: Point, a: Form) -> Form:
    """d_φ(t) a = ∂a + ∂̄_φ a."""
    return Form(model.algebra, deformed_operators(model, phi.at(t)).d @ a.coeffs)


# --- Деформированная биградуировка ---


@dataclass(frozen=True, eq=False)
class DeformedBigrading:
    """
    Биградуировка X_t на пространстве инвариантных форм.

    Столбцы `frame` -- мономы η^I∧η̄^J в координатах ω, в том же порядке,
    что и базис алгебры. Операторы ∂_t, ∂̄_t записаны в координатах η.
    """

    model: LieModel
    phi: np.ndarray
    frame: np.ndarray
    frame_inverse: np.ndarray
    d: np.ndarray
    del_: np.ndarray
    delbar: np.ndarray

    def filtration_span(self, p: int, k: int) -> np.ndarray:
        """Базис F^pA^k_t в координатах ω."""
        return self.frame[:, self.model.algebra.filtration(p, k)]

    def projector(self, p: int, q: int) -> np.ndarray:
        """Проектор на A^{p,q}_t вдоль остальных блоков (в координатах ω)."""
        idx = self.model.algebra.block(p, q)
        return self.frame[:, idx] @ self.frame_inverse[idx, :]

    def grading_defect(self) -> float:
        """Норма частей d в координатах η, не являющихся ∂_t или ∂̄_t."""
        rest = self.d - self.del_ - self.delbar
        return float(np.max(np.abs(rest))) if rest.size else 0.0

    def from_frame(self, vectors: np.ndarray) -> np.ndarray:
        return self.frame @ vectors

    @cached_property
    def ddbar(self) -> np.ndarray:
        return self.del_ @ self.delbar


def _substitution_matrix(algebra: ExteriorAlgebra, phi: np.ndarray) -> np.ndarray:
    etas = deformed_coframe(algebra, phi)
    images = etas + [algebra.conjugate_vector(eta) for eta in etas]
    right = [algebra.right_multiplication(image) for image in images]
    frame = np.zeros((algebra.size, algebra.size), dtype=complex)
    unit = algebra.monomial().coeffs
    for col, mask in enumerate(algebra.masks):
        vec = unit
        for g in algebra.generators(mask):
            vec = right[g] @ vec
        frame[:, col] = vec
    return frame


def deformed_bigrading(model: LieModel, phi: Beltrami, t: Point, tol: float = settings.TOLERANCE) -> DeformedBigrading:
    """
    Строит биградуировку X_t.

    Raises:
        FrameDegenerate: Корепер вырожден.
        NotIntegrableAt: φ(t) не интегрируема.
    """
    matrix = require_integrable(model, phi, t, tol)
    return bigrading_from_matrix(model, matrix)


def bigrading_from_matrix(model: LieModel, phi: np.ndarray) -> DeformedBigrading:
    alg = model.algebra
    frame = _substitution_matrix(alg, phi)
    inverse = scipy.linalg.inv(frame)
    d_eta = inverse @ model.d.matrix @ frame
    bideg = alg.bidegrees
    delta = bideg[:, None, :] - bideg[None, :, :]
    del_mask = (delta[:, :, 0] == 1) & (delta[:, :, 1] == 0)
    delbar_mask = (delta[:, :, 0] == 0) & (delta[:, :, 1] == 1)
    return DeformedBigrading(model, phi, frame, inverse, d_eta, d_eta * del_mask, d_eta * delbar_mask)


def filtration_preservation_residual(model: LieModel, phi: np.ndarray, rtol: float = settings.TOLERANCE) -> float:
    """max_{p<=k} вклад e^{i_φ}F^pA^k вне F^pA^k_t."""
    alg = model.algebra
    grading = bigrading_from_matrix(model, phi)
    exp = exp_matrix(alg, phi)
    worst = 0.0
    for k in range(2 * alg.n + 1):
        for p in range(0, k + 1):
            idx = alg.filtration(p, k)
            if len(idx) == 0:
                continue
            worst = max(worst, containment_residual(exp[:, idx], grading.filtration_span(p, k), rtol))
    return worst


# --- Векторнозначные формы ---


@dataclass(frozen=True, eq=False)
class VectorValuedForm:
    """Σ_α a_α ⊗ e_α; строка α массива `components` -- коэффициенты a_α."""

    algebra: ExteriorAlgebra
    components: np.ndarray

    @classmethod
    def from_beltrami(cls, algebra: ExteriorAlgebra, phi: np.ndarray) -> "VectorValuedForm":
        rows = [
            sum(phi[alpha, beta] * algebra.generator(beta + 1, conjugate=True).coeffs for beta in range(algebra.n))
            for alpha in range(algebra.n)
        ]
        return cls(algebra, np.array(rows, dtype=complex).reshape(algebra.n, algebra.size))

    def component(self, alpha: int) -> Form:
        """Компонента при e_α (α с 1)."""
        return Form(self.algebra, self.components[alpha - 1])

    def flatten(self) -> np.ndarray:
        return self.components.reshape(-1)

    def beltrami_matrix(self) -> np.ndarray:
        """Матрица Φ[α, β] для чисто (0,1)-значной формы."""
        n = self.algebra.n
        cols = [self.algebra.index[1 << (n + beta)] for beta in range(n)]
        return self.components[:, cols]

    def norm(self) -> float:
        return float(np.linalg.norm(self.components))


def vector_delbar_matrix(model: LieModel) -> np.ndarray:
    """
    ∂̄ на T^{1,0}-значных формах в координатах (α, моном).

    ∂̄(a⊗e_k) = ∂̄a⊗e_k + (-1)^{deg a} Σ_{α,j} m^α_{kj} a∧ω̄^j ⊗ e_α, где
    m^α_{kj} -- коэффициент при ω^k∧ω̄^j в dω^α.
    """
    alg, n, size = model.algebra, model.n, model.algebra.size
    mixed = model.mixed_coefficients
    parity = np.where(alg.total_degrees % 2 == 1, -1.0, 1.0)
    right = [alg.right_multiplication(alg.generator(j + 1, conjugate=True).coeffs) for j in range(n)]
    out = np.zeros((n * size, n * size), dtype=complex)
    for k in range(n):
        out[k * size : (k + 1) * size, k * size : (k + 1) * size] += model.delbar.matrix
        for alpha in range(n):
            for j in range(n):
                if mixed[alpha, k, j] != 0:
                    out[alpha * size : (alpha + 1) * size, k * size : (k + 1) * size] += (
                        mixed[alpha, k, j] * right[j] * parity[None, :]
                    )
    return out


def ks_class(model: LieModel, phi: Beltrami, direction: int = 0, tol: float = settings.TOLERANCE) -> VectorValuedForm:
    """
    ∂̄-гармонический представитель класса Кодаиры-Спенсера κ(∂/∂t_i).

    Raises:
        NotClosed: ∂̄φ_1 ≠ 0.
    """
    alg, n, size = model.algebra, model.n, model.algebra.size
    first = VectorValuedForm.from_beltrami(alg, phi.first_order(direction))
    operator = vector_delbar_matrix(model)
    closure = float(np.linalg.norm(operator @ first.flatten()))
    if closure > tol * max(1.0, first.norm()):
        raise NotClosed(f"∂̄φ_1 ≠ 0 в направлении {direction + 1}: невязка {closure:.3e}")

    def block(p: int, q: int) -> np.ndarray:
        return np.concatenate([alpha * size + alg.block(p, q) for alpha in range(n)])

    here, above, below = block(0, 1), block(0, 2), block(0, 0)
    forward = operator[np.ix_(above, here)]
    backward = operator[np.ix_(here, below)]
    laplacian = forward.conj().T @ forward + backward @ backward.conj().T
    projector = spectral_split(laplacian, tol).projector
    out = np.zeros(n * size, dtype=complex)
    out[here] = projector @ first.flatten()[here]
    return VectorValuedForm(alg, out.reshape(n, size))


def vector_delbar_squared(model: LieModel) -> float:
    operator = vector_delbar_matrix(model)
    square = operator @ operator
    return float(np.max(np.abs(square))) if square.size else 0.0

