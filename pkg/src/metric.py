"""
Эрмитова метрика на инвариантных формах и гармоническая теория.

Корепер ω объявлен ортонормированным, поэтому мономы ортонормированы и
сопряжённые операторы -- эрмитово сопряжённые матрицы. Лапласианы
□_BC, □_∂̄, □_d, гармонические проекторы и операторы Грина строятся один раз
при создании контекста и дальше только читаются.
"""
import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Dict, List, Optional, Tuple

import numpy as np

from src.config import settings
from src.errors import DegreeMismatch
from src.exterior import Form, LieModel, OperatorMatrix
from src.linalg import (
    SpectralSplit,
    canonical_basis,
    max_principal_angle,
    null_space,
    numerical_rank,
    orth,
    spectral_split,
)

logger = logging.getLogger(__name__)

THEORIES = ("bc", "delbar", "derham")


@dataclass(frozen=True)
class IllConditioned:
    """Запись об опасно малом ненулевом собственном числе лапласиана."""

    theory: str
    block: Tuple[int, ...]
    smallest: float


@dataclass(frozen=True)
class BcDecomposition:
    """Размерности и ортогональность слагаемых A^{p,q} = ker□_BC ⊕ Im∂∂̄ ⊕ (Im∂* + Im∂̄*)."""

    block_dim: int
    harmonic: int
    exact: int
    coexact: int
    orthogonality: float

    @property
    def balanced(self) -> bool:
        return self.block_dim == self.harmonic + self.exact + self.coexact


def inner(a: Form, b: Form) -> complex:
    """
    Эрмитово скалярное произведение, линейное по первому аргументу.

    Raises:
        DegreeMismatch: Формы разных полных степеней.
    """
    da, db = a.degree(), b.degree()
    if da is not None and db is not None and da != db:
        raise DegreeMismatch(f"скалярное произведение форм степеней {da} и {db}")
    return complex(np.vdot(b.coeffs, a.coeffs))


def adjoint(operator: OperatorMatrix) -> OperatorMatrix:
    return operator.adjoint()


def bc_laplacian(del_: np.ndarray, delbar: np.ndarray) -> np.ndarray:
    """
    □_BC = (∂∂̄)(∂∂̄)* + (∂∂̄)*(∂∂̄) + (∂̄*∂)(∂̄*∂)* + (∂̄*∂)*(∂̄*∂) + ∂̄*∂̄ + ∂*∂.

    Сопряжения -- эрмитовы, т.е. базис считается ортонормированным.
    """
    del_star, delbar_star = del_.conj().T, delbar.conj().T
    a = del_ @ delbar
    b = delbar_star @ del_
    ah, bh = a.conj().T, b.conj().T
    return a @ ah + ah @ a + b @ bh + bh @ b + delbar_star @ delbar + del_star @ del_


class MetricContext:
    """
    Гармоническая теория модели при фиксированной метрике.

    Args:
        model: Модель Ли.
        rtol: Относительный порог ранга и ядра.
        floor: Порог отчёта о плохой обусловленности.
    """

    def __init__(
        self, model: LieModel, rtol: float = settings.TOLERANCE, floor: float = settings.SPECTRAL_FLOOR
    ) -> None:
        self.model = model
        self.algebra = model.algebra
        self.rtol = rtol
        self.floor = floor

        self.d, self.del_, self.delbar = model.d, model.del_, model.delbar
        self.ddbar = self.del_ @ self.delbar
        self.d_star = adjoint(self.d)
        self.del_star = adjoint(self.del_)
        self.delbar_star = adjoint(self.delbar)
        self.ddbar_star = adjoint(self.ddbar)

        self.laplacians: Dict[str, OperatorMatrix] = {
            "bc": OperatorMatrix("□_BC", self.algebra, bc_laplacian(self.del_.matrix, self.delbar.matrix), 0, (0, 0)),
            "delbar": OperatorMatrix(
                "□_∂̄",
                self.algebra,
                self.delbar.matrix @ self.delbar_star.matrix + self.delbar_star.matrix @ self.delbar.matrix,
                0,
                (0, 0),
            ),
            "derham": OperatorMatrix(
                "□_d", self.algebra, self.d.matrix @ self.d_star.matrix + self.d_star.matrix @ self.d.matrix, 0
            ),
        }

        self.ill_conditioned: List[IllConditioned] = []
        self._splits: Dict[Tuple[str, Tuple[int, ...]], SpectralSplit] = {}
        for theory in ("bc", "delbar"):
            for p, q in self.algebra.bidegree_pairs():
                self._register(theory, (p, q), self.laplacians[theory].block(p, q))
        for k in range(2 * self.algebra.n + 1):
            idx = self.algebra.degree(k)
            self._register("derham", (k,), self.laplacians["derham"].matrix[np.ix_(idx, idx)])

        self.harmonic: Dict[str, np.ndarray] = {t: self._assemble(t, "projector") for t in THEORIES}
        self.green: Dict[str, np.ndarray] = {t: self._assemble(t, "pseudo_inverse") for t in THEORIES}
        logger.debug(f"Метрический контекст {model.name}: {len(self._splits)} блоков лапласианов.")

    def _register(self, theory: str, key: Tuple[int, ...], block: np.ndarray) -> None:
        split = spectral_split(block, self.rtol)
        self._splits[(theory, key)] = split
        if split.smallest_nonzero < self.floor:
            record = IllConditioned(theory, key, split.smallest_nonzero)
            self.ill_conditioned.append(record)
            logger.warning(
                f"Лапласиан {theory} на блоке {key}: минимальное ненулевое собственное число "
                f"{split.smallest_nonzero:.3e} ниже порога {self.floor:.1e}"
            )

    def _indices(self, theory: str, key: Tuple[int, ...]) -> np.ndarray:
        return self.algebra.degree(key[0]) if theory == "derham" else self.algebra.block(*key)

    def _assemble(self, theory: str, attribute: str) -> np.ndarray:
        out = np.zeros((self.algebra.size, self.algebra.size), dtype=complex)
        for (name, key), split in self._splits.items():
            if name != theory:
                continue
            idx = self._indices(theory, key)
            out[np.ix_(idx, idx)] = getattr(split, attribute)
        return out

    def _key(self, theory: str, p: Optional[int], q: Optional[int], k: Optional[int]) -> Tuple[int, ...]:
        if theory not in THEORIES:
            raise ValueError(f"неизвестная теория '{theory}', ожидалось одно из {THEORIES}")
        if theory == "derham":
            if k is None:
                raise ValueError("для теории derham нужна степень k")
            return (k,)
        if p is None or q is None:
            raise ValueError(f"для теории {theory} нужна бистепень (p, q)")
        return (p, q)

    # --- операции ---

    def laplacian_bc(self, p: int, q: int) -> np.ndarray:
        """Блок □_BC на A^{p,q}."""
        return self.laplacians["bc"].block(p, q)

    def green_bc(self, p: int, q: int) -> Tuple[np.ndarray, np.ndarray]:
        """
        Оператор Грина и гармонический проектор Ботта-Черна на блоке (p, q).

        Returns:
            (G_BC, H_BC) с I = H_BC + □_BC G_BC и G_BC H_BC = 0.
        """
        split = self._splits[("bc", (p, q))]
        return split.pseudo_inverse, split.projector

    def harmonic_projection(
        self, theory: str, p: Optional[int] = None, q: Optional[int] = None, k: Optional[int] = None
    ) -> np.ndarray:
        """Ортогональный проектор на ядро лапласиана теории на блоке."""
        return self._splits[(theory, self._key(theory, p, q, k))].projector

    def harmonic_dim(self, theory: str, p: Optional[int] = None, q: Optional[int] = None, k: Optional[int] = None) -> int:
        return int(self._splits[(theory, self._key(theory, p, q, k))].kernel.shape[1])

    def harmonic_basis(
        self, theory: str, p: Optional[int] = None, q: Optional[int] = None, k: Optional[int] = None
    ) -> np.ndarray:
        """
        Канонический ортонормированный базис гармонических форм.

        Для bc/delbar при заданной только степени k объединяет блоки
        (k, 0), (k-1, 1), ... в порядке базиса алгебры.

        Returns:
            Матрица size x h; столбцы -- векторы коэффициентов форм.
        """
        if theory != "derham" and p is None and k is not None:
            columns = [
                self.harmonic_basis(theory, r, k - r)
                for r in range(min(k, self.algebra.n), max(0, k - self.algebra.n) - 1, -1)
            ]
            return np.hstack(columns) if columns else np.zeros((self.algebra.size, 0), dtype=complex)
        key = self._key(theory, p, q, k)
        idx = self._indices(theory, key)
        local = canonical_basis(self._splits[(theory, key)].projector, self.rtol)
        out = np.zeros((self.algebra.size, local.shape[1]), dtype=complex)
        out[idx] = local
        return out

    @cached_property
    def recursion_operator(self) -> np.ndarray:
        """G_BC(∂̄*∂∂* + ∂̄*) на всей алгебре."""
        inner_part = self.delbar_star.matrix @ self.del_.matrix @ self.del_star.matrix + self.delbar_star.matrix
        return self.green["bc"] @ inner_part

    # --- диагностика ---

    def bc_decomposition(self, p: int, q: int) -> BcDecomposition:
        """Проверка ортогонального разложения блока A^{p,q}."""
        alg = self.algebra
        idx = alg.block(p, q)
        harmonic = self._splits[("bc", (p, q))].kernel
        exact = orth(self.ddbar.matrix[np.ix_(idx, alg.block(p - 1, q - 1))], self.rtol)
        coexact = orth(
            np.hstack(
                [
                    self.del_star.matrix[np.ix_(idx, alg.block(p + 1, q))],
                    self.delbar_star.matrix[np.ix_(idx, alg.block(p, q + 1))],
                ]
            ),
            self.rtol,
        )
        parts = [harmonic, exact, coexact]
        orthogonality = 0.0
        for i in range(3):
            for j in range(i + 1, 3):
                if parts[i].shape[1] and parts[j].shape[1]:
                    orthogonality = max(orthogonality, float(np.max(np.abs(parts[i].conj().T @ parts[j]))))
        return BcDecomposition(len(idx), harmonic.shape[1], exact.shape[1], coexact.shape[1], orthogonality)

    def kernel_identity_residual(self, p: int, q: int) -> float:
        """Главный угол между ker□_BC и ker∂ ∩ ker∂̄ ∩ ker(∂∂̄)* на блоке."""
        stacked = np.vstack([self.del_.block(p, q), self.delbar.block(p, q), self.ddbar_star.block(p, q)])
        kernel = null_space(stacked, self.rtol)
        return max_principal_angle(self._splits[("bc", (p, q))].kernel, kernel)

    def adjointness_residual(self, rng: np.random.Generator, samples: int = 5) -> float:
        """max |⟨La, b⟩ - ⟨a, L*b⟩| по кэшированным парам на случайных векторах."""
        size = self.algebra.size
        worst = 0.0
        pairs = [
            (self.del_, self.del_star),
            (self.delbar, self.delbar_star),
            (self.ddbar, self.ddbar_star),
            (self.d, self.d_star),
        ]
        for _ in range(samples):
            a = rng.standard_normal(size) + 1j * rng.standard_normal(size)
            b = rng.standard_normal(size) + 1j * rng.standard_normal(size)
            for op, star in pairs:
                worst = max(worst, abs(np.vdot(b, op.matrix @ a) - np.vdot(star.matrix @ b, a)))
        return float(worst)

    def rank(self, matrix: np.ndarray) -> int:
        return numerical_rank(matrix, self.rtol)
