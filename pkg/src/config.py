from pathlib import Path
from typing import List, Literal

from pydantic import BaseModel, field_validator, model_validator
from pydantic_settings import BaseSettings

from src.errors import ConfigError


class Settings(BaseSettings):
    # Linear algebra
    TOLERANCE: float = 1e-9  # относительный порог ранга, снизу ограничен 1
    SPECTRAL_FLOOR: float = 1e-6  # ниже -- отчёт IllConditioned
    HARMONIC_TOLERANCE: float = 1e-10

    # Power series
    TRUNCATION_ORDER: int = 6
    SAMPLE_RADIUS: float = 0.1  # "до сужения полидиска" -- радиус выборки
    GRID: str = "0,0.01,-0.01,0.05,-0.05,0.1,-0.1"

    # Checks
    MEMBERSHIP_THRESHOLD: float = 1e-8
    HOLOMORPHY_STEP: float = 1e-4
    DERIVATIVE_STEP: float = 1e-5
    COFRAME_SCALE: float = 1.0  # масштаб ортонормального корепера (эксперименты с метрикой)

    # Run
    BACKEND: str = "float"  # или exact
    OUTPUT_FORMAT: str = "table"
    SEED: int = 42
    NUM_WORKERS: int = 4
    SIGNIFICANT_DIGITS: int = 12

    # Paths
    LOG_FILE: Path = Path("hodge_deform.log")

    model_config = {
        "env_file": ".env"
    }


settings = Settings()


def parse_grid(text: str) -> List[complex]:
    """
    Разбирает список точек сетки вида "0,0.01,-0.05,0.02+0.01j".

    Args:
        text: Точки через запятую в синтаксисе `complex()`.

    Returns:
        Список комплексных точек в порядке появления.
    """
    points: List[complex] = []
    for chunk in text.split(","):
        chunk = chunk.strip().replace(" ", "")
        if not chunk:
            continue
        try:
            points.append(complex(chunk))
        except ValueError as e:
            raise ConfigError(f"Некорректная точка сетки '{chunk}': {e}") from e
    return points


class RunConfig(BaseModel):
    """Параметры одного запуска CLI: значения из `settings`, перекрытые флагами."""

    tolerance: float = settings.TOLERANCE
    order: int = settings.TRUNCATION_ORDER
    grid: List[complex] = parse_grid(settings.GRID)
    radius: float = settings.SAMPLE_RADIUS
    backend: Literal["float", "exact"] = "float"
    output: Literal["table", "json", "csv"] = "table"
    seed: int = settings.SEED
    workers: int = settings.NUM_WORKERS
    allow_non_ddbar: bool = False

    @field_validator("tolerance")
    @classmethod
    def _positive_tolerance(cls, value: float) -> float:
        if value <= 0:
            raise ValueError("tolerance должен быть > 0")
        return value

    @field_validator("order")
    @classmethod
    def _positive_order(cls, value: int) -> int:
        if value < 1:
            raise ValueError("порядок усечения N должен быть >= 1")
        return value

    @model_validator(mode="after")
    def _grid_inside_radius(self) -> "RunConfig":
        outside = [t for t in self.grid if abs(t) > self.radius + 1e-15]
        if outside:
            raise ValueError(f"точки сетки вне радиуса {self.radius}: {outside}")
        return self

    @classmethod
    def build(cls, **overrides: object) -> "RunConfig":
        """Собирает конфигурацию, отбрасывая неуказанные (None) флаги."""
        values = {key: value for key, value in overrides.items() if value is not None}
        if isinstance(values.get("grid"), str):
            values["grid"] = parse_grid(str(values["grid"]))
        try:
            return cls(**values)
        except ValueError as e:
            raise ConfigError(str(e)) from e
