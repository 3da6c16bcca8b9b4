"""
Иерархия исключений проекта.

Все ошибки вычислений наследуются от `HodgeDeformError`, чтобы CLI мог
отличить ошибки входных данных (код выхода 2) от непредвиденных сбоев.
"""
from typing import Optional, Sequence


class HodgeDeformError(Exception):
    pass


class ConfigError(HodgeDeformError):
    pass


class MalformedSpec(HodgeDeformError):
    """Описание модели или семейства не проходит проверку схемы."""


class ModelFileError(HodgeDeformError):
    """Файл не читается или не является корректным JSON."""

    def __init__(
        self, path: str, message: str, line: Optional[int] = None, column: Optional[int] = None
    ):
        self.path = path
        self.line = line
        self.column = column
        where = f"{path}:{line}:{column}" if line is not None else path
        super().__init__(f"{where}: {message}")


class NotIntegrable(HodgeDeformError):
    """d² ≠ 0 хотя бы на одном мономе (нарушено тождество Якоби)."""

    def __init__(self, monomial: str, survivor: str):
        self.monomial = monomial
        self.survivor = survivor
        super().__init__(f"d² ≠ 0 на мономе {monomial}: d²({monomial}) = {survivor}")


class ArityMismatch(HodgeDeformError):
    pass


class DegreeMismatch(HodgeDeformError):
    pass


class NotIntegrableAt(HodgeDeformError):
    def __init__(self, t: Sequence[complex], residual: float):
        self.t = tuple(t)
        self.residual = residual
        super().__init__(f"φ не интегрируема в t={self.t}: невязка {residual:.3e}")


class FrameDegenerate(HodgeDeformError):
    def __init__(self, t: Sequence[complex], smallest: float):
        self.t = tuple(t)
        self.smallest = smallest
        super().__init__(
            f"деформированный корепер вырожден в t={self.t} "
            f"(минимальное сингулярное число {smallest:.3e})"
        )


class NotClosed(HodgeDeformError):
    pass


class NotHarmonic(HodgeDeformError):
    pass


class FiltrationDegenerate(HodgeDeformError):
    pass


class RankDrop(HodgeDeformError):
    pass


class DdbarRequired(HodgeDeformError):
    pass


class NotInFiltration(HodgeDeformError):
    pass
