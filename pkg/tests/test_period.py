"""Тесты для отображения периодов и разложения замкнутых форм."""
import numpy as np
import pytest

from src.cohomology import ddbar_check, hodge_filtration
from src.errors import DdbarRequired, NotHarmonic, NotInFiltration
from src.exterior import load_model, wedge
from src.metric import MetricContext
from src.period import (
    PeriodMap,
    diagram_residual,
    exponential_isomorphism,
    fph_direct,
    grid_points,
    holomorphy_residual,
    iota_map,
    period_point,
    ppbar_decompose,
    transversality_residual,
)
from src.utils import shipped_files
from src.verify import random_filtered_closed_form

MODELS = shipped_files("models")


def _degrees(n):
    return [(p, k) for k in range(2 * n + 1) for p in range(min(k, n) + 1)]


def test_torus_curve_chart(torus1_metric, torus1_family):
    point = period_point(torus1_metric, 1, 1, torus1_family, 0.05)
    assert point.chart.dim == 1
    assert point.t == (0.05 + 0j,)
    assert point.labels == ["σ(1,0)#0"]
    assert point.closure == 0
    assert np.allclose(point.chart.affine(), [[1.0], [0.05]])


@pytest.mark.parametrize("t", [0.05, -0.02, 0.03 + 0.01j])
def test_torus_curve_pluecker(t, torus1_metric, torus1_family):
    """F^1H^1(t) натянуто на ω¹ + tω̄¹: карта (1, t), Плюккер (1, t)/‖(1, t)‖."""
    chart = period_point(torus1_metric, 1, 1, torus1_family, t).chart
    assert np.abs(chart.affine() - np.array([[1.0], [t]])).max() < 1e-10
    expected = np.array([1.0, t]) / np.sqrt(1 + abs(t) ** 2)
    assert np.abs(chart.pluecker - expected).max() < 1e-10
    assert chart.pluecker[0].real > 0 and abs(chart.pluecker[0].imag) < 1e-12


@pytest.mark.parametrize("t", [(0.0, 0.0), (0.05, -0.03), (0.02j, 0.01)])
def test_period_agrees_with_direct_filtration(t, torus2_metric, torus2_family):
    pm = PeriodMap(torus2_metric, torus2_family)
    for p, k in _degrees(2):
        point = pm.point(p, k, t)
        assert point.chart.angle_to(pm.fph_direct(p, k, t)) < 1e-6


def test_base_point_and_nesting(torus2_metric, torus2_family):
    """Φ(0) совпадает с F^pH^k, а Φ^{p+1,k}(t) ⊆ Φ^{p,k}(t)."""
    pm = PeriodMap(torus2_metric, torus2_family)
    t = (0.05, -0.03)
    for p, k in _degrees(2):
        base = pm.point(p, k, (0.0, 0.0)).chart
        assert base.angle_to(hodge_filtration(torus2_metric, p, k)) < 1e-10
        if p + 1 <= min(k, 2):
            assert pm.point(p + 1, k, t).chart.contained_in(pm.point(p, k, t).chart) < 1e-8


def test_module_level_oracle(torus1_metric, torus1_family):
    chart = fph_direct(torus1_metric, 1, 1, torus1_family, 0.05)
    assert chart.angle_to(period_point(torus1_metric, 1, 1, torus1_family, 0.05).chart) < 1e-10


def test_transversality(torus2_metric, torus2_family):
    for p, k in _degrees(2):
        for direction in range(2):
            assert transversality_residual(torus2_metric, p, k, torus2_family, direction) < 1e-9


def test_tangent_crosscheck(torus2_metric, torus2_family):
    pm = PeriodMap(torus2_metric, torus2_family)
    assert pm.tangent_crosscheck(1, 2, 0) < 1e-4
    assert pm.tangent_crosscheck(2, 2, 1) < 1e-4


def test_holomorphy(torus1_metric, torus1_family, torus2_metric, torus2_family):
    assert holomorphy_residual(torus1_metric, 1, 1, torus1_family, 0.03 + 0.01j) < 1e-6
    pm = PeriodMap(torus2_metric, torus2_family)
    assert pm.holomorphy_residual(1, 2, (0.02, -0.01)) < 1e-6


def test_diagram_on_torus(torus1_metric, torus1_family, torus2_metric, torus2_family):
    assert diagram_residual(torus1_metric, 1, 1, torus1_family) < 1e-8
    pm = PeriodMap(torus2_metric, torus2_family)
    for p, k in _degrees(2):
        if p >= 1:
            for direction in range(2):
                assert pm.diagram_residual(p, k, direction) < 1e-8


def test_iota_map(torus1_metric):
    alg = torus1_metric.algebra
    value = iota_map(torus1_metric, np.eye(1), alg.generator(1))
    assert value.bidegree == (1, 0)
    assert np.allclose(value.first, [1])
    assert np.allclose(value.second, [0])
    with pytest.raises(NotHarmonic):
        iota_map(torus1_metric, np.eye(1), alg.generator(1) + alg.generator(1, conjugate=True))


def test_exponential_isomorphism(torus2_metric, torus2_family):
    for k in range(5):
        matrix, rank = exponential_isomorphism(torus2_metric, k, torus2_family, (0.05, 0.02))
        assert rank == torus2_metric.harmonic_dim("derham", k=k)
        assert matrix.shape == (rank, rank)


def test_ppbar_decompose_random_forms(torus2_metric, rng):
    for p, k in _degrees(2):
        if k == 0:
            continue
        sigma = random_filtered_closed_form(torus2_metric, p, k, rng)
        split = ppbar_decompose(torus2_metric, sigma, p)
        assert split.residual < 1e-9 * max(1.0, sigma.norm())
        assert all(r >= p and r + s == k for r, s in split.betas)


def test_ppbar_decompose_errors(torus2_metric, iwasawa_metric):
    alg = torus2_metric.algebra
    with pytest.raises(NotInFiltration):
        ppbar_decompose(torus2_metric, alg.generator(1, conjugate=True), 1)
    zero = ppbar_decompose(torus2_metric, alg.zero(), 1)
    assert zero.residual == 0
    with pytest.raises(DdbarRequired):
        ppbar_decompose(iwasawa_metric, iwasawa_metric.algebra.generator(1), 1)


def test_grid_points():
    points = grid_points([0, 0.01, -0.01], 2)
    assert len(points) == 5
    assert points[0] == (0, 0)
    assert (0.01, 0j) in points
    assert (0j, -0.01) in points


@pytest.mark.parametrize("name", list(MODELS))
def test_ppbar_decompose_on_every_model(name, rng):
    metric = MetricContext(load_model(MODELS[name]))
    n = metric.algebra.n
    if not ddbar_check(metric).holds:
        with pytest.raises(DdbarRequired):
            ppbar_decompose(metric, random_filtered_closed_form(metric, 1, 2, rng), 1)
        return
    for p, k in _degrees(n):
        if k == 0:
            continue
        sigma = random_filtered_closed_form(metric, p, k, rng)
        split = ppbar_decompose(metric, sigma, p)
        assert split.residual < 1e-9 * max(1.0, sigma.norm())


def test_iota_map_on_iwasawa(iwasawa_metric):
    """ι(ω̄¹⊗e₂): ω¹ -> 0, ω² -> (ω̄¹, 0), ω²∧ω³∧ω̄² -> (0, 0)."""
    alg = iwasawa_metric.algebra
    phi1 = np.zeros((3, 3))
    phi1[1, 0] = 1.0

    value = iota_map(iwasawa_metric, phi1, alg.generator(1))
    assert value.bidegree == (1, 0)
    assert np.abs(value.first).max(initial=0.0) < 1e-10
    assert np.abs(value.second).max(initial=0.0) < 1e-10

    value = iota_map(iwasawa_metric, phi1, alg.generator(2))
    first_basis = iwasawa_metric.harmonic_basis("bc", 0, 1)
    assert np.abs(first_basis @ value.first - alg.generator(1, conjugate=True).coeffs).max() < 1e-10
    assert np.abs(value.second).max(initial=0.0) < 1e-10

    # i_φx ненулевая, но целиком ∂̄-точна: u = -ω³∧ω̄³
    x = wedge(wedge(alg.generator(2), alg.generator(3)), alg.generator(2, conjugate=True))
    value = iota_map(iwasawa_metric, phi1, x)
    assert value.bidegree == (2, 1)
    assert value.first.shape == (iwasawa_metric.harmonic_dim("bc", 1, 2),)
    assert np.abs(value.first).max(initial=0.0) < 1e-10
    assert np.abs(value.second).max(initial=0.0) < 1e-10
