"""
Биградуированная внешняя алгебра инвариантных форм модели Ли.

Мономы ω^I ∧ ω̄^J хранятся битовыми масками по 2n образующим: бит α-1
отвечает ω^α, бит n+α-1 -- ω̄^α. Порядок базиса фиксирован ключом
(k, -p, I, J): мономы сгруппированы по полной степени k, внутри степени по
p по убыванию, так что F^pA^k -- начальный отрезок блока степени k. Внутри
каждого блока A^{p,q} порядок чисто лексикографический по (I, J), поэтому
блочные матрицы операторов совпадают с построенными в лексикографическом
порядке; меняется только взаимное расположение блоков.

Структурные константы хранятся точно (гауссовы рациональные числа sympy):
из них же строятся и точные таблицы, и матрицы с плавающей точкой.
"""
import json
import logging
from dataclasses import dataclass
from functools import cached_property, lru_cache
from pathlib import Path
from typing import Dict, List, Literal, Optional, Set, Tuple, Union

import numpy as np
import sympy
from pydantic import BaseModel, Field, ValidationError, model_validator

from src.config import settings
from src.errors import MalformedSpec, ModelFileError, NotIntegrable

logger = logging.getLogger(__name__)

Scalar = Union[complex, sympy.Expr]
# Разреженная таблица оператора: (строка, столбец) -> коэффициент
Dok = Dict[Tuple[int, int], Scalar]
# Образ образующей: маска монома -> коэффициент
FormTerms = Dict[int, Scalar]


def exact_number(re: float, im: float = 0.0) -> sympy.Expr:
    """Гауссово рациональное число из десятичной записи JSON."""
    return sympy.Rational(repr(float(re))) + sympy.I * sympy.Rational(repr(float(im)))


def is_zero(value: Scalar) -> bool:
    if isinstance(value, sympy.Basic):
        return value == 0 or sympy.expand_complex(value) == 0
    return value == 0


# --- Схема файла модели ---


class TermSpec(BaseModel):
    re: float = 0.0
    im: float = 0.0
    kind: Literal["hol", "mix", "anti"]
    i: int = Field(ge=1)
    j: int = Field(ge=1)

    @model_validator(mode="after")
    def _ordered(self) -> "TermSpec":
        if self.kind in ("hol", "anti") and not self.i < self.j:
            raise ValueError(f"для kind={self.kind} нужно i < j, получено i={self.i}, j={self.j}")
        return self

    def exact(self) -> sympy.Expr:
        return exact_number(self.re, self.im)


class ModelSpec(BaseModel):
    name: str
    n: int = Field(ge=1)
    d_omega: List[List[TermSpec]] = []

    @model_validator(mode="after")
    def _shape(self) -> "ModelSpec":
        if not self.d_omega:
            # абелев случай: d ≡ 0
            self.d_omega = [[] for _ in range(self.n)]
        if len(self.d_omega) != self.n:
            raise ValueError(f"d_omega содержит {len(self.d_omega)} списков, ожидалось n={self.n}")
        for alpha, terms in enumerate(self.d_omega, start=1):
            for term in terms:
                if term.i > self.n or term.j > self.n:
                    raise ValueError(f"dω^{alpha}: индекс вне диапазона 1..{self.n}: {term}")
        return self


# --- Алгебра ---


class ExteriorAlgebra:
    """
    Внешняя алгебра над образующими ω^1..ω^n, ω̄^1..ω̄^n.

    Хранит порядок базиса, индексы блоков A^{p,q} и A^k и таблицы знаков
    для внешнего произведения.
    """

    def __init__(self, n: int) -> None:
        self.n = n
        self.size = 4**n
        self.hol_mask = (1 << n) - 1
        self.masks: List[int] = sorted(range(1 << (2 * n)), key=self._order_key)
        self.index: Dict[int, int] = {mask: i for i, mask in enumerate(self.masks)}
        self.bidegrees = np.array([self.bidegree_of(mask) for mask in self.masks], dtype=int)
        self.total_degrees = self.bidegrees.sum(axis=1)
        self._blocks = {
            (p, q): np.flatnonzero((self.bidegrees[:, 0] == p) & (self.bidegrees[:, 1] == q))
            for p in range(n + 1)
            for q in range(n + 1)
        }

    # --- мономы ---

    def split(self, mask: int) -> Tuple[Tuple[int, ...], Tuple[int, ...]]:
        """Мультииндексы (I, J) монома, нумерация с 1."""
        hol = tuple(a + 1 for a in range(self.n) if mask >> a & 1)
        anti = tuple(a + 1 for a in range(self.n) if mask >> (self.n + a) & 1)
        return hol, anti

    def bidegree_of(self, mask: int) -> Tuple[int, int]:
        return bin(mask & self.hol_mask).count("1"), bin(mask >> self.n).count("1")

    def _order_key(self, mask: int) -> Tuple[int, int, Tuple[int, ...], Tuple[int, ...]]:
        hol, anti = self.split(mask)
        return len(hol) + len(anti), -len(hol), hol, anti

    def label(self, mask: int) -> str:
        hol, anti = self.split(mask)
        parts = [f"ω{a}" for a in hol] + [f"ω̄{a}" for a in anti]
        return "∧".join(parts) if parts else "1"

    @staticmethod
    def generators(mask: int) -> List[int]:
        return [g for g in range(mask.bit_length()) if mask >> g & 1]

    @staticmethod
    def wedge_masks(a: int, b: int) -> Tuple[int, int]:
        """
        Внешнее произведение двух мономов.

        Returns:
            (знак, маска); знак 0, если мономы имеют общую образующую.
        """
        if a & b:
            return 0, 0
        swaps = sum(bin(a >> (g + 1)).count("1") for g in ExteriorAlgebra.generators(b))
        return (-1 if swaps % 2 else 1), a | b

    def conjugate_mask(self, mask: int) -> Tuple[int, int]:
        """Сопряжение монома: ω^I∧ω̄^J -> (-1)^{|I||J|} ω^J∧ω̄^I."""
        hol, anti = mask & self.hol_mask, mask >> self.n
        p, q = bin(hol).count("1"), bin(anti).count("1")
        return (-1 if (p * q) % 2 else 1), anti | (hol << self.n)

    # --- блоки ---

    def block(self, p: int, q: int) -> np.ndarray:
        """Индексы базиса A^{p,q}; пустой массив вне диапазона."""
        return self._blocks.get((p, q), np.zeros(0, dtype=int))

    def degree(self, k: int) -> np.ndarray:
        return np.flatnonzero(self.total_degrees == k)

    def filtration(self, p: int, k: int) -> np.ndarray:
        """Индексы F^pA^k = ⊕_{λ>=p} A^{λ,k-λ}."""
        return np.flatnonzero((self.total_degrees == k) & (self.bidegrees[:, 0] >= p))

    def bidegree_pairs(self) -> List[Tuple[int, int]]:
        return sorted(self._blocks)

    # --- формы ---

    def zero(self) -> "Form":
        return Form(self, np.zeros(self.size, dtype=complex))

    def monomial(self, hol: Tuple[int, ...] = (), anti: Tuple[int, ...] = (), coeff: complex = 1.0) -> "Form":
        """
        Моном coeff·ω^{i1}∧…∧ω̄^{j1}∧… с учётом знака упорядочивания.

        Индексы нумеруются с 1 и могут идти в любом порядке.
        """
        mask, sign = 0, 1
        for g in [a - 1 for a in hol] + [self.n + b - 1 for b in anti]:
            s, mask = self.wedge_masks(mask, 1 << g)
            sign *= s
        vec = np.zeros(self.size, dtype=complex)
        if sign:
            vec[self.index[mask]] = sign * coeff
        return Form(self, vec)

    def generator(self, alpha: int, conjugate: bool = False) -> "Form":
        return self.monomial(anti=(alpha,)) if conjugate else self.monomial(hol=(alpha,))

    def basis_form(self, position: int) -> "Form":
        vec = np.zeros(self.size, dtype=complex)
        vec[position] = 1.0
        return Form(self, vec)

    # --- таблицы произведения ---

    @cached_property
    def _wedge_table(self) -> Tuple[np.ndarray, np.ndarray]:
        sign = np.zeros((self.size, self.size), dtype=np.int8)
        target = np.zeros((self.size, self.size), dtype=np.int64)
        for i, a in enumerate(self.masks):
            for j, b in enumerate(self.masks):
                s, mask = self.wedge_masks(a, b)
                if s:
                    sign[i, j] = s
                    target[i, j] = self.index[mask]
        return sign, target

    def wedge_vectors(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        sign, target = self._wedge_table
        products = np.outer(a, b) * sign
        out = np.zeros(self.size, dtype=complex)
        np.add.at(out, target.ravel(), products.ravel())
        return out

    def left_multiplication(self, a: np.ndarray) -> np.ndarray:
        """Матрица отображения b -> a∧b."""
        sign, target = self._wedge_table
        out = np.zeros((self.size, self.size), dtype=complex)
        cols = np.broadcast_to(np.arange(self.size), (self.size, self.size))
        np.add.at(out, (target.ravel(), cols.ravel()), (a[:, None] * sign).ravel())
        return out

    def right_multiplication(self, b: np.ndarray) -> np.ndarray:
        """Матрица отображения a -> a∧b."""
        sign, target = self._wedge_table
        out = np.zeros((self.size, self.size), dtype=complex)
        rows = np.broadcast_to(np.arange(self.size)[:, None], (self.size, self.size))
        np.add.at(out, (target.ravel(), rows.ravel()), (b[None, :] * sign).ravel())
        return out

    @cached_property
    def _conjugation(self) -> Tuple[np.ndarray, np.ndarray]:
        perm = np.zeros(self.size, dtype=np.int64)
        signs = np.zeros(self.size)
        for i, mask in enumerate(self.masks):
            s, image = self.conjugate_mask(mask)
            perm[i] = self.index[image]
            signs[i] = s
        return perm, signs

    def conjugate_vector(self, a: np.ndarray) -> np.ndarray:
        perm, signs = self._conjugation
        out = np.zeros(self.size, dtype=complex)
        out[perm] = signs * np.conj(a)
        return out

    def derivation_dok(self, images: Dict[int, FormTerms], odd: bool) -> Dok:
        """
        Таблица дифференцирования, заданного на образующих.

        Для нечётного дифференцирования (d) слагаемое на s-й позиции получает
        знак (-1)^s; для чётного (свёртка i_φ) знаков нет.

        Args:
            images: Образующая -> её образ (маска -> коэффициент).
            odd: Нечётное ли дифференцирование.
        """
        table: Dok = {}
        for col, mask in enumerate(self.masks):
            gens = self.generators(mask)
            for s, g in enumerate(gens):
                if g not in images:
                    continue
                left = sum(1 << h for h in gens[:s])
                right = sum(1 << h for h in gens[s + 1 :])
                sign_s = -1 if odd and s % 2 else 1
                for image, coeff in images[g].items():
                    s1, m1 = self.wedge_masks(left, image)
                    if not s1:
                        continue
                    s2, m2 = self.wedge_masks(m1, right)
                    if not s2:
                        continue
                    key = (self.index[m2], col)
                    table[key] = table.get(key, 0) + coeff * (s1 * s2 * sign_s)
        return {key: value for key, value in table.items() if not is_zero(value)}

    @cached_property
    def contraction_basis(self) -> np.ndarray:
        """
        Матрицы E[α, β] чётного дифференцирования ω^α -> ω̄^β.

        Свёртка с φ = φ^α_β̄ ω̄^β⊗e_α равна Σ φ[α, β] E[α, β].
        """
        out = np.zeros((self.n, self.n, self.size, self.size))
        for (alpha, beta), table in self.contraction_doks.items():
            for (row, col), value in table.items():
                out[alpha, beta, row, col] = float(value)
        return out

    @cached_property
    def contraction_doks(self) -> Dict[Tuple[int, int], Dok]:
        return {
            (alpha, beta): self.derivation_dok({alpha: {1 << (self.n + beta): 1}}, odd=False)
            for alpha in range(self.n)
            for beta in range(self.n)
        }


@lru_cache(maxsize=None)
def exterior_algebra(n: int) -> ExteriorAlgebra:
    """Общий экземпляр алгебры для данного n (таблицы строятся один раз)."""
    return ExteriorAlgebra(n)


def dok_to_dense(table: Dok, size: int) -> np.ndarray:
    out = np.zeros((size, size), dtype=complex)
    for (row, col), value in table.items():
        out[row, col] = complex(value)
    return out


def split_dok(algebra: ExteriorAlgebra, table: Dok, shift: Tuple[int, int]) -> Dok:
    """Часть таблицы, сдвигающая бистепень ровно на `shift`."""
    bideg = algebra.bidegrees
    return {
        (row, col): value
        for (row, col), value in table.items()
        if tuple(bideg[row] - bideg[col]) == shift
    }


# --- Формы и операторы ---


@dataclass(frozen=True, eq=False)
class Form:
    """Элемент внешней алгебры: вектор коэффициентов в мономиальном базисе."""

    algebra: ExteriorAlgebra
    coeffs: np.ndarray

    def __post_init__(self) -> None:
        vec = np.asarray(self.coeffs, dtype=complex)
        if vec.shape != (self.algebra.size,):
            raise ValueError(f"ожидался вектор длины {self.algebra.size}, получено {vec.shape}")
        object.__setattr__(self, "coeffs", vec)

    def bidegrees(self, tol: float = 0.0) -> Set[Tuple[int, int]]:
        present = np.abs(self.coeffs) > tol
        return {tuple(int(x) for x in self.algebra.bidegrees[i]) for i in np.flatnonzero(present)}

    def degree(self, tol: float = 0.0) -> Optional[int]:
        """Полная степень однородной формы; None для нулевой или смешанной."""
        degrees = {p + q for p, q in self.bidegrees(tol)}
        return degrees.pop() if len(degrees) == 1 else None

    def component(self, p: int, q: int) -> "Form":
        vec = np.zeros_like(self.coeffs)
        idx = self.algebra.block(p, q)
        vec[idx] = self.coeffs[idx]
        return Form(self.algebra, vec)

    def norm(self) -> float:
        return float(np.linalg.norm(self.coeffs))

    def __add__(self, other: "Form") -> "Form":
        return Form(self.algebra, self.coeffs + other.coeffs)

    def __sub__(self, other: "Form") -> "Form":
        return Form(self.algebra, self.coeffs - other.coeffs)

    def __neg__(self) -> "Form":
        return Form(self.algebra, -self.coeffs)

    def __mul__(self, scalar: complex) -> "Form":
        return Form(self.algebra, scalar * self.coeffs)

    __rmul__ = __mul__

    def __repr__(self) -> str:
        terms = [
            f"({c.real:+.6g}{c.imag:+.6g}j)·{self.algebra.label(self.algebra.masks[i])}"
            for i, c in enumerate(self.coeffs)
            if c != 0
        ]
        return " + ".join(terms) if terms else "0"


@dataclass(frozen=True, eq=False)
class OperatorMatrix:
    """
    Оператор на всей алгебре с объявленным сдвигом степени.

    `shift` -- сдвиг бистепени для чистых операторов (∂: (1,0), ∂̄: (0,1));
    None означает, что объявлен только сдвиг полной степени `degree` (d).
    """

    name: str
    algebra: ExteriorAlgebra
    matrix: np.ndarray
    degree: int
    shift: Optional[Tuple[int, int]] = None

    def target(self, p: int, q: int) -> np.ndarray:
        if self.shift is None:
            return self.algebra.degree(p + q + self.degree)
        return self.algebra.block(p + self.shift[0], q + self.shift[1])

    def block(self, p: int, q: int) -> np.ndarray:
        """Матрица блока A^{p,q} -> целевой блок."""
        return self.matrix[np.ix_(self.target(p, q), self.algebra.block(p, q))]

    def apply(self, a: Form) -> Form:
        return Form(self.algebra, self.matrix @ a.coeffs)

    def adjoint(self) -> "OperatorMatrix":
        shift = None if self.shift is None else (-self.shift[0], -self.shift[1])
        return OperatorMatrix(f"{self.name}*", self.algebra, self.matrix.conj().T, -self.degree, shift)

    def __matmul__(self, other: "OperatorMatrix") -> "OperatorMatrix":
        shift = None
        if self.shift is not None and other.shift is not None:
            shift = (self.shift[0] + other.shift[0], self.shift[1] + other.shift[1])
        return OperatorMatrix(
            f"{self.name}{other.name}", self.algebra, self.matrix @ other.matrix, self.degree + other.degree, shift
        )

    def check_block_structure(self) -> float:
        """Максимальный модуль элементов вне объявленного сдвига (должен быть 0)."""
        bideg = self.algebra.bidegrees
        delta = bideg[:, None, :] - bideg[None, :, :]
        if self.shift is None:
            allowed = delta.sum(axis=2) == self.degree
        else:
            allowed = (delta[:, :, 0] == self.shift[0]) & (delta[:, :, 1] == self.shift[1])
        outside = np.abs(self.matrix[~allowed])
        return float(outside.max()) if outside.size else 0.0


@dataclass(frozen=True, eq=False)
class LieModel:
    """
    Модель Ли: инвариантный корепер с заданными структурными уравнениями.

    Все матрицы дифференциалов строятся один раз при загрузке.
    """

    spec: ModelSpec
    algebra: ExteriorAlgebra
    images: Dict[int, FormTerms]
    d_exact: Dok
    d: OperatorMatrix
    del_: OperatorMatrix
    delbar: OperatorMatrix
    complex_integrable: bool

    @property
    def name(self) -> str:
        return self.spec.name

    @property
    def n(self) -> int:
        return self.spec.n

    @cached_property
    def del_exact(self) -> Dok:
        return split_dok(self.algebra, self.d_exact, (1, 0))

    @cached_property
    def delbar_exact(self) -> Dok:
        return split_dok(self.algebra, self.d_exact, (0, 1))

    @cached_property
    def mixed_coefficients(self) -> np.ndarray:
        """B[α, k, j] -- коэффициент при ω^k∧ω̄^j в dω^α (индексы с 0)."""
        n = self.n
        out = np.zeros((n, n, n), dtype=complex)
        for alpha in range(n):
            for mask, value in self.images[alpha].items():
                if self.algebra.bidegree_of(mask) != (1, 1):
                    continue
                (k,), (j,) = self.algebra.split(mask)
                out[alpha, k - 1, j - 1] += complex(value)
        return out

    def operator(self, which: str) -> OperatorMatrix:
        operators = {"d": self.d, "del": self.del_, "delbar": self.delbar}
        if which not in operators:
            raise ValueError(f"неизвестный дифференциал '{which}', ожидалось d|del|delbar")
        return operators[which]

    def differential(self, which: str, a: Form) -> Form:
        """Применяет d, ∂ (del) или ∂̄ (delbar) к форме."""
        return self.operator(which).apply(a)


def wedge(a: Form, b: Form) -> Form:
    """Внешнее произведение a∧b."""
    return Form(a.algebra, a.algebra.wedge_vectors(a.coeffs, b.coeffs))


def conjugate(a: Form) -> Form:
    """Комплексное сопряжение: меняет (p,q) на (q,p) и сопрягает коэффициенты."""
    return Form(a.algebra, a.algebra.conjugate_vector(a.coeffs))


# --- Загрузка ---


def read_json(path: Path) -> dict:
    """Читает JSON, превращая ошибки чтения и синтаксиса в `ModelFileError`."""
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ModelFileError(str(path), f"не удалось прочитать файл: {e.strerror or e}") from e
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise ModelFileError(str(path), e.msg, e.lineno, e.colno) from e


def _generator_images(spec: ModelSpec, algebra: ExteriorAlgebra, scale: sympy.Expr) -> Dict[int, FormTerms]:
    n = spec.n
    images: Dict[int, FormTerms] = {}
    for alpha, terms in enumerate(spec.d_omega):
        hol: FormTerms = {}
        for term in terms:
            if term.kind == "hol":
                mask = (1 << (term.i - 1)) | (1 << (term.j - 1))
            elif term.kind == "mix":
                mask = (1 << (term.i - 1)) | (1 << (n + term.j - 1))
            else:
                mask = (1 << (n + term.i - 1)) | (1 << (n + term.j - 1))
            hol[mask] = sympy.expand(hol.get(mask, 0) + term.exact() / scale)
        images[alpha] = {m: c for m, c in hol.items() if not is_zero(c)}
        conj: FormTerms = {}
        for mask, coeff in images[alpha].items():
            sign, image = algebra.conjugate_mask(mask)
            conj[image] = sympy.expand(sign * sympy.conjugate(coeff))
        images[n + alpha] = conj
    return images


def _check_d_squared(algebra: ExteriorAlgebra, table: Dok) -> None:
    columns: Dict[int, Dict[int, Scalar]] = {}
    for (row, col), value in table.items():
        columns.setdefault(col, {})[row] = value
    for col in range(algebra.size):
        result: Dict[int, Scalar] = {}
        for mid, first in columns.get(col, {}).items():
            for row, second in columns.get(mid, {}).items():
                result[row] = result.get(row, 0) + first * second
        survivors = {row: sympy.expand(v) for row, v in result.items() if not is_zero(v)}
        if survivors:
            text = " + ".join(f"({v})·{algebra.label(algebra.masks[r])}" for r, v in sorted(survivors.items()))
            raise NotIntegrable(algebra.label(algebra.masks[col]), text)


def load_model(source: Union[ModelSpec, dict, str, Path], coframe_scale: float = settings.COFRAME_SCALE) -> LieModel:
    """
    Загружает модель Ли и предвычисляет матрицы d, ∂, ∂̄.

    Args:
        source: Путь к JSON-файлу, словарь со схемой модели или `ModelSpec`.
        coframe_scale: Масштаб s ортонормированного корепера sω
            (1 -- сам корепер ω ортонормирован).

    Returns:
        Готовая `LieModel`.

    Raises:
        ModelFileError: Файл не читается или не является JSON.
        MalformedSpec: Нарушена схема (индексы, виды слагаемых).
        NotIntegrable: d² ≠ 0 на некотором мономе.
    """
    if isinstance(source, (str, Path)):
        source = read_json(Path(source))
    if isinstance(source, ModelSpec):
        spec = source
    else:
        try:
            spec = ModelSpec.model_validate(source)
        except ValidationError as e:
            raise MalformedSpec(f"некорректное описание модели: {e}") from e

    algebra = exterior_algebra(spec.n)
    scale = sympy.Rational(repr(float(coframe_scale)))
    images = _generator_images(spec, algebra, scale)
    d_exact = algebra.derivation_dok(images, odd=True)
    _check_d_squared(algebra, d_exact)

    anti_terms = any(
        algebra.bidegree_of(mask) == (0, 2) for alpha in range(spec.n) for mask in images[alpha]
    )
    if anti_terms:
        logger.warning(
            f"Модель {spec.name}: dω^α имеет (0,2)-часть, почти комплексная структура "
            f"не интегрируема и d ≠ ∂ + ∂̄."
        )

    d_matrix = dok_to_dense(d_exact, algebra.size)
    d = OperatorMatrix("d", algebra, d_matrix, 1)
    del_ = OperatorMatrix("∂", algebra, dok_to_dense(split_dok(algebra, d_exact, (1, 0)), algebra.size), 1, (1, 0))
    delbar = OperatorMatrix("∂̄", algebra, dok_to_dense(split_dok(algebra, d_exact, (0, 1)), algebra.size), 1, (0, 1))
    logger.info(f"Загружена модель {spec.name}: n={spec.n}, {len(d_exact)} ненулевых элементов d.")
    return LieModel(spec, algebra, images, d_exact, d, del_, delbar, not anti_terms)
