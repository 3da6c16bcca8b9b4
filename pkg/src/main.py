"""
Главный модуль Hodge Deform.

Этот модуль использует Typer для создания интерфейса командной строки (CLI):
когомологии модели, проверка ∂∂̄-леммы, канонические деформации,
отображение периодов и наборы проверок.
"""
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from typing import Annotated, Iterator, List, Optional, Tuple

import numpy as np
import typer
from tqdm import tqdm

from .canonical import (
    bidegrees_with_harmonics,
    canonical_deformation,
    closedness_residual,
    fixed_point_residual,
    harmonic_forms,
    non_exactness,
)
from .cohomology import ddbar_check, deformed_bc_dims, dimension_table
from .config import RunConfig, settings
from .deformation import Beltrami, load_family
from .errors import ConfigError, HodgeDeformError, MalformedSpec, ModelFileError, NotIntegrable
from .exact import exact_cohomology_dims, exact_deformed_bc_dims
from .exterior import LieModel, exact_number, load_model
from .metric import MetricContext
from .period import PeriodMap, grid_points
from .report import Report
from .utils import resolve_input, setup_logging, shipped_files
from .verify import CHECKS, HEADERS, CheckContext, run_checks

app = typer.Typer(
    name="hodge-deform",
    help="Деформации структуры Ходжа на инвариантных моделях компактных комплексных многообразий.",
    no_args_is_help=True,
)

THEORIES = ("bc", "dolbeault", "derham")

# --- Общие параметры ---
ModelArg = Annotated[str, typer.Argument(help="Путь к JSON-модели или имя поставляемой модели.")]
FamilyArg = Annotated[str, typer.Argument(help="Путь к JSON-семейству или имя поставляемого семейства.")]
TolOption = Annotated[Optional[float], typer.Option("--tol", help="Относительный порог ранга.")]
OrderOption = Annotated[Optional[int], typer.Option("--order", help="Порядок усечения рядов N.")]
GridOption = Annotated[Optional[str], typer.Option("--grid", help="Точки сетки через запятую, например '0,0.05,0.1j'.")]
BackendOption = Annotated[Optional[str], typer.Option("--backend", help="float или exact.")]
OutOption = Annotated[Optional[str], typer.Option("--out", help="Формат вывода: table, json или csv.")]
SeedOption = Annotated[Optional[int], typer.Option("--seed", help="Зерно случайных проверок.")]
AllowOption = Annotated[
    bool, typer.Option("--allow-non-ddbar", help="Не считать ошибкой проверки без ∂∂̄-леммы.")
]
WorkersOption = Annotated[Optional[int], typer.Option("--workers", help="Число потоков.")]


@contextmanager
def _input_errors() -> Iterator[None]:
    """Ошибки входных данных -> код выхода 2 и одна строка в stderr."""
    try:
        yield
    except (ModelFileError, MalformedSpec, NotIntegrable, ConfigError) as e:
        typer.echo(f"Ошибка: {e}", err=True)
        raise typer.Exit(2)


def _config(**overrides: object) -> RunConfig:
    return RunConfig.build(
        backend=overrides.pop("backend", None) or settings.BACKEND,
        output=overrides.pop("output", None) or settings.OUTPUT_FORMAT,
        **overrides,
    )


def _load(model_name: str) -> LieModel:
    return load_model(resolve_input(model_name, "models"))


def _load_family(family_name: str, model: LieModel) -> Beltrami:
    return load_family(resolve_input(family_name, "families"), model)


def _points(config: RunConfig, m: int) -> List[Tuple[complex, ...]]:
    return grid_points(config.grid, m)


def _emit(report: Report, config: RunConfig) -> None:
    typer.echo(report.render(config.output))


def _parse_pair(text: str) -> Tuple[int, int]:
    try:
        p, q = (int(x) for x in text.split(","))
    except ValueError as e:
        raise ConfigError(f"ожидалась бистепень вида 'p,q', получено '{text}'") from e
    return p, q


@app.command("shipped")
def shipped() -> None:
    """Показывает поставляемые модели и семейства."""
    for kind in ("models", "families"):
        typer.echo(f"{kind}: {', '.join(shipped_files(kind)) or '-'}")


@app.command("cohomology")
def cohomology_command(
    model_name: ModelArg,
    theory: Annotated[str, typer.Option("--theory", help="bc, dolbeault, derham или all.")] = "all",
    family: Annotated[
        Optional[str], typer.Option("--family", help="Семейство: добавить H_{BCφ(t)} в точках сетки.")
    ] = None,
    tol: TolOption = None,
    grid: GridOption = None,
    backend: BackendOption = None,
    out: OutOption = None,
) -> None:
    """Таблица размерностей когомологий модели (и деформированных групп Ботта-Черна)."""
    with _input_errors():
        config = _config(tolerance=tol, grid=grid, backend=backend, output=out)
        if theory != "all" and theory not in THEORIES:
            raise ConfigError(f"неизвестная теория '{theory}', ожидалось {', '.join(THEORIES)} или all")
        model = _load(model_name)
        phi = _load_family(family, model) if family else None

    metric = MetricContext(model, config.tolerance)
    report = Report(f"Когомологии {model.name}", ["theory", "degree", "dim"], meta={"backend": config.backend})
    for name in THEORIES if theory == "all" else (theory,):
        table = exact_cohomology_dims(model, name) if config.backend == "exact" else dimension_table(metric, name)
        for key, dim in table.items():
            report.add(name, key, dim)

    if phi is not None:
        for t in _points(config, phi.m):
            label = "bc-deformed t=" + ",".join(f"{z:g}" for z in t)
            try:
                if config.backend == "exact":
                    dims = exact_deformed_bc_dims(model, phi.exact_at([exact_number(z.real, z.imag) for z in t]))
                else:
                    dims = deformed_bc_dims(metric, phi, t)
            except HodgeDeformError as e:
                typer.echo(f"{label}: {e}", err=True)
                continue
            for key, dim in dims.items():
                report.add(label, key, dim)
    _emit(report, config)


@app.command("ddbar-check")
def ddbar_check_command(model_name: ModelArg, tol: TolOption = None, out: OutOption = None) -> None:
    """Проверяет ∂∂̄-лемму по бистепеням."""
    with _input_errors():
        config = _config(tolerance=tol, output=out)
        model = _load(model_name)
    result = ddbar_check(MetricContext(model, config.tolerance))
    report = Report(
        f"∂∂̄-лемма для {model.name}",
        ["bidegree", "closed_exact", "rank_ddbar", "holds"],
        meta={"holds": result.holds},
    )
    for key, (common, rank) in result.details.items():
        report.add(key, common, rank, common == rank)
    _emit(report, config)


@app.command("deform")
def deform_command(
    model_name: ModelArg,
    family: FamilyArg,
    bidegree: Annotated[Optional[str], typer.Option("--bidegree", help="Бистепень σ0 вида 'p,q' (по умолчанию все).")] = None,
    tol: TolOption = None,
    order: OrderOption = None,
    grid: GridOption = None,
    out: OutOption = None,
) -> None:
    """Канонические деформации Ботта-Черна гармонического базиса и их невязки на сетке."""
    with _input_errors():
        config = _config(tolerance=tol, order=order, grid=grid, output=out)
        model = _load(model_name)
        phi = _load_family(family, model)
        pairs = [_parse_pair(bidegree)] if bidegree else None

    metric = MetricContext(model, config.tolerance)
    report = Report(
        f"Канонические деформации {model.name} / {phi.name}",
        ["t", "sigma0", "fixed_point", "closedness", "non_exactness", "in_V_t"],
        meta={"order": config.order},
    )
    for p, q in pairs or bidegrees_with_harmonics(metric):
        for j, sigma0 in enumerate(harmonic_forms(metric, p, q)):
            cd = canonical_deformation(metric, sigma0, phi, config.order)
            label = f"σ({p},{q})#{j}"
            report.meta[f"{label} ‖σ_k‖"] = list(cd.correction_norms().values())
            fixed = fixed_point_residual(metric, cd)
            for t in _points(config, phi.m):
                try:
                    closed = closedness_residual(metric, cd, t, config.tolerance)
                    exactness = non_exactness(metric, cd, t, config.tolerance)
                except HodgeDeformError as e:
                    report.add(t, label, fixed, None, None, str(e))
                    continue
                member = closed < settings.MEMBERSHIP_THRESHOLD * max(1.0, sigma0.norm())
                report.add(t, label, fixed, closed, exactness, member)
    _emit(report, config)


@app.command("period")
def period_command(
    model_name: ModelArg,
    family: FamilyArg,
    p: Annotated[int, typer.Option("--p", help="Ступень фильтрации p.")] = 1,
    k: Annotated[int, typer.Option("--k", help="Степень когомологий k.")] = 1,
    tol: TolOption = None,
    order: OrderOption = None,
    grid: GridOption = None,
    radius: Annotated[Optional[float], typer.Option("--radius", help="Радиус допустимых точек сетки.")] = None,
    out: OutOption = None,
    workers: WorkersOption = None,
) -> None:
    """Точки отображения периодов Φ^{p,k}(t): аффинные координаты и вектор Плюккера."""
    with _input_errors():
        config = _config(tolerance=tol, order=order, grid=grid, radius=radius, output=out, workers=workers)
        model = _load(model_name)
        phi = _load_family(family, model)
        if not 0 <= p <= k <= 2 * model.n:
            raise ConfigError(f"ожидалось 0 <= p <= k <= {2 * model.n}, получено p={p}, k={k}")

    metric = MetricContext(model, config.tolerance)
    period_map = PeriodMap(metric, phi, config.order)
    period_map.warm(p, k)
    points = _points(config, phi.m)

    def evaluate(t: Tuple[complex, ...]) -> List[object]:
        try:
            point = period_map.point(p, k, t)
        except HodgeDeformError as e:
            return [t, p, k, None, None, None, None, f"{type(e).__name__}: {e}"]
        chart = point.chart
        affine = chart.affine().T.reshape(-1) if chart.dim else np.zeros(0)
        return [t, p, k, chart.dim, list(affine), list(chart.pluecker), point.closure, ""]

    report = Report(
        f"Φ^{p},{k} для {model.name} / {phi.name}",
        ["t", "p", "k", "dim", "affine", "pluecker", "closure", "note"],
        meta={"order": config.order},
    )
    with ThreadPoolExecutor(max_workers=max(1, config.workers)) as pool:
        for row in tqdm(pool.map(evaluate, points), total=len(points), desc="Сетка", disable=len(points) < 2):
            report.add(*row)
    _emit(report, config)


@app.command("verify")
def verify_command(
    model_name: ModelArg,
    family: Annotated[Optional[str], typer.Argument(help="Семейство деформаций (необязательно).")] = None,
    check: Annotated[
        Optional[List[str]], typer.Option("--check", help=f"Проверка (можно повторять): {', '.join(CHECKS)}.")
    ] = None,
    run_all: Annotated[bool, typer.Option("--all", help="Все проверки.")] = False,
    tol: TolOption = None,
    order: OrderOption = None,
    grid: GridOption = None,
    backend: BackendOption = None,
    out: OutOption = None,
    seed: SeedOption = None,
    allow_non_ddbar: AllowOption = False,
    workers: WorkersOption = None,
) -> None:
    """Запускает проверки; код выхода 1, если хотя бы одна не пройдена."""
    with _input_errors():
        config = _config(
            tolerance=tol,
            order=order,
            grid=grid,
            backend=backend,
            output=out,
            seed=seed,
            workers=workers,
            allow_non_ddbar=allow_non_ddbar,
        )
        names = list(CHECKS) if run_all or not check else list(dict.fromkeys(check))
        unknown = [name for name in names if name not in CHECKS]
        if unknown:
            raise ConfigError(f"неизвестные проверки {unknown}, доступны: {', '.join(CHECKS)}")
        model = _load(model_name)
        phi = _load_family(family, model) if family else None

    metric = MetricContext(model, config.tolerance)
    ctx = CheckContext(metric, phi, config, _points(config, phi.m) if phi else [])
    results = run_checks(ctx, names, config.workers)
    report = Report(
        f"Проверки {model.name}" + (f" / {phi.name}" if phi else ""),
        HEADERS,
        meta={"seed": config.seed, "allow_non_ddbar": config.allow_non_ddbar, "ddbar": ctx.ddbar},
    )
    for result in results:
        report.add(*result.row())
    _emit(report, config)
    if not all(result.passed for result in results):
        raise typer.Exit(1)


@app.callback()
def callback(
    verbose: Annotated[bool, typer.Option("--verbose", "-v", help="Подробный журнал (DEBUG).")] = False,
) -> None:
    """
    Главная функция обратного вызова для настройки приложения.
    Инициализирует логирование перед выполнением любой команды.
    """
    setup_logging(verbose)


if __name__ == "__main__":
    app()
