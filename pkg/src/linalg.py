"""
Численная линейная алгебра: ранги, ядра, ортогональные базисы, проекторы,
псевдообращение эрмитовых операторов и главные углы между подпространствами.

Порог ранга везде один: сингулярные числа ниже `rtol * max(s_max, 1)`
считаются нулевыми.
"""
from dataclasses import dataclass
from typing import Tuple

import numpy as np
import scipy.linalg

from src.config import settings


def threshold(values: np.ndarray, rtol: float) -> float:
    """Абсолютный порог для набора сингулярных (или собственных) чисел."""
    top = float(np.max(np.abs(values))) if values.size else 0.0
    return rtol * max(top, 1.0)


def numerical_rank(a: np.ndarray, rtol: float = settings.TOLERANCE) -> int:
    if a.size == 0:
        return 0
    s = scipy.linalg.svdvals(a)
    return int((s > threshold(s, rtol)).sum())


def null_space(a: np.ndarray, rtol: float = settings.TOLERANCE) -> np.ndarray:
    """
    Ортонормированный базис ядра матрицы (столбцы).

    Args:
        a: Матрица m x n.
        rtol: Относительный порог ранга.

    Returns:
        Матрица n x k, столбцы которой -- базис ядра.
    """
    rows, cols = a.shape
    if cols == 0:
        return np.zeros((0, 0), dtype=complex)
    if rows == 0:
        return np.eye(cols, dtype=complex)
    _, s, vh = scipy.linalg.svd(a)
    rank = int((s > threshold(s, rtol)).sum())
    return vh[rank:].conj().T


def orth(a: np.ndarray, rtol: float = settings.TOLERANCE) -> np.ndarray:
    """Ортонормированный базис образа (столбцов) матрицы."""
    rows, cols = a.shape
    if cols == 0 or rows == 0:
        return np.zeros((rows, 0), dtype=complex)
    u, s, _ = scipy.linalg.svd(a, full_matrices=False)
    rank = int((s > threshold(s, rtol)).sum())
    return u[:, :rank]


def nullity(a: np.ndarray, rtol: float = settings.TOLERANCE) -> int:
    return a.shape[1] - numerical_rank(a, rtol)


@dataclass(frozen=True)
class SpectralSplit:
    """Разложение эрмитова неотрицательного оператора на ядро и ненулевой спектр."""

    kernel: np.ndarray  # ортонормированный базис ядра
    eigenvalues: np.ndarray  # ненулевые собственные числа
    eigenvectors: np.ndarray  # соответствующие собственные векторы

    @property
    def projector(self) -> np.ndarray:
        return self.kernel @ self.kernel.conj().T

    @property
    def pseudo_inverse(self) -> np.ndarray:
        v = self.eigenvectors
        return (v / self.eigenvalues) @ v.conj().T

    @property
    def smallest_nonzero(self) -> float:
        return float(self.eigenvalues.min()) if self.eigenvalues.size else np.inf


def spectral_split(operator: np.ndarray, rtol: float = settings.TOLERANCE) -> SpectralSplit:
    """
    Разделяет спектр эрмитова неотрицательного оператора.

    Псевдообратный оператор строится через собственное разложение, а не
    решением систем: тот же спектральный порог используется для отчёта
    об обусловленности.
    """
    size = operator.shape[0]
    if size == 0:
        empty = np.zeros((0, 0), dtype=complex)
        return SpectralSplit(empty, np.zeros(0), empty)
    hermitian = (operator + operator.conj().T) / 2
    values, vectors = scipy.linalg.eigh(hermitian)
    cut = threshold(values, rtol)
    zero = np.abs(values) <= cut
    return SpectralSplit(vectors[:, zero], values[~zero], vectors[:, ~zero])


def canonical_basis(projector: np.ndarray, rtol: float = settings.TOLERANCE) -> np.ndarray:
    """
    Канонический ортонормированный базис образа ортогонального проектора.

    Грама-Шмидт по столбцам P e_0, P e_1, ... в порядке базиса: результат
    зависит только от подпространства, и i-я координата каждого нового вектора
    вещественна и положительна. Для тождественного проектора получается
    стандартный базис.
    """
    size = projector.shape[0]
    target = int(round(np.real(np.trace(projector)))) if size else 0
    basis = np.zeros((size, 0), dtype=complex)
    for i in range(size):
        if basis.shape[1] == target:
            break
        v = projector[:, i].astype(complex)
        for _ in range(2):  # повторная ортогонализация
            v = v - basis @ (basis.conj().T @ v)
        norm = np.linalg.norm(v)
        if norm > np.sqrt(rtol):
            basis = np.column_stack([basis, v / norm])
    return basis


def intersection(u: np.ndarray, w: np.ndarray, rtol: float = settings.TOLERANCE) -> np.ndarray:
    """Ортонормированный базис пересечения span(u) ∩ span(w)."""
    qu, qw = orth(u, rtol), orth(w, rtol)
    if qu.shape[1] == 0 or qw.shape[1] == 0:
        return np.zeros((u.shape[0], 0), dtype=complex)
    coeffs = null_space(np.hstack([qu, -qw]), rtol)
    return orth(qu @ coeffs[: qu.shape[1]], rtol)


def containment_residual(inner: np.ndarray, outer: np.ndarray, rtol: float = settings.TOLERANCE) -> float:
    """
    Норма части span(inner), не лежащей в span(outer).

    Ноль означает вложение span(inner) ⊆ span(outer).
    """
    qi = orth(inner, rtol)
    if qi.shape[1] == 0:
        return 0.0
    qo = orth(outer, rtol)
    rest = qi - qo @ (qo.conj().T @ qi)
    return float(np.linalg.norm(rest, 2))


def max_principal_angle(a: np.ndarray, b: np.ndarray) -> float:
    """Наибольший главный угол между подпространствами одинаковой размерности."""
    if a.shape[1] != b.shape[1]:
        return float(np.pi / 2)
    if a.shape[1] == 0:
        return 0.0
    return float(np.max(scipy.linalg.subspace_angles(a, b)))


def block(matrix: np.ndarray, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    return matrix[np.ix_(rows, cols)]


def column_norm(matrix: np.ndarray) -> float:
    """Максимальная норма столбца -- невязка оператора на базисных формах."""
    if matrix.size == 0:
        return 0.0
    return float(np.max(np.linalg.norm(matrix, axis=0)))


def lstsq(a: np.ndarray, b: np.ndarray, rtol: float = settings.TOLERANCE) -> Tuple[np.ndarray, float]:
    """Решение наименьших квадратов и норма невязки."""
    if a.shape[1] == 0:
        return np.zeros((0,) + b.shape[1:], dtype=complex), float(np.linalg.norm(b))
    x, *_ = scipy.linalg.lstsq(a, b, cond=rtol)
    return x, float(np.linalg.norm(a @ x - b))
