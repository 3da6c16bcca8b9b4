"""Тесты набора проверок (src.verify)."""
from concurrent.futures import ThreadPoolExecutor
from unittest.mock import patch

import pytest

from src.config import RunConfig
from src.period import PeriodMap, grid_points
from src.verify import CHECKS, NEEDS_DDBAR, CheckContext, run_check, run_checks


def _context(metric, phi, grid="0,0.03,-0.02j", **overrides):
    config = RunConfig.build(grid=grid, order=4, **overrides)
    return CheckContext(metric, phi, config, grid_points(config.grid, phi.m))


def test_all_checks_pass_on_torus(torus2_metric, torus2_family):
    """На абелевой модели с ∂∂̄-леммой проходят все проверки."""
    ctx = _context(torus2_metric, torus2_family, grid="0,0.03")
    results = run_checks(ctx, list(CHECKS), workers=2)
    assert {r.check for r in results} == set(CHECKS)
    failed = [(r.check, r.case, r.residual) for r in results if not r.passed]
    assert failed == []
    assert not any(r.informational for r in results)


def test_dimension_identity_on_iwasawa(iwasawa_metric, iwasawa_family):
    ctx = _context(iwasawa_metric, iwasawa_family)
    results = run_check(ctx, "dimension-identity")
    assert len(results) == 3
    assert all(r.passed for r in results)


@pytest.mark.parametrize("allow", [False, True])
def test_gated_checks_are_informational(kt_metric, kt_family, allow):
    ctx = _context(kt_metric, kt_family, grid="0.02", allow_non_ddbar=allow)
    assert not ctx.ddbar
    results = run_check(ctx, "filtration")
    assert "filtration" in NEEDS_DDBAR
    assert results
    assert all(r.informational and r.status == "info" for r in results)
    assert all(r.passed is allow for r in results)


def test_results_are_sorted_by_check_order(torus1_metric, torus1_family):
    ctx = _context(torus1_metric, torus1_family, grid="0.05")
    results = run_checks(ctx, ["frolicher", "axioms", "kernel-identity"], workers=3)
    order = list(CHECKS)
    indices = [order.index(r.check) for r in results]
    assert indices == sorted(indices)


def test_unknown_check(torus1_metric, torus1_family):
    ctx = _context(torus1_metric, torus1_family)
    with pytest.raises(ValueError):
        run_check(ctx, "nonsense")
    with pytest.raises(ValueError):
        run_checks(ctx, ["axioms", "nonsense"])


def test_xt_symmetry_passes_on_non_ddbar_models(iwasawa_metric, iwasawa_family, kt_metric, kt_family):
    for metric, phi in ((iwasawa_metric, iwasawa_family), (kt_metric, kt_family)):
        results = run_check(_context(metric, phi, grid="0,0.01,0.05"), "xt-symmetry")
        assert results
        assert all(r.passed and not r.informational for r in results)


def test_ddbar_stability_requires_injectivity(torus2_metric, torus2_family):
    ctx = _context(torus2_metric, torus2_family, grid="0,0.03")
    assert all(r.passed for r in run_check(ctx, "ddbar-stability"))
    with patch("src.verify.non_exactness", return_value=0.0):
        assert not any(r.passed for r in run_check(ctx, "ddbar-stability"))


def test_ddbar_stability_is_strict_at_origin(torus2_metric, torus2_family):
    ctx = _context(torus2_metric, torus2_family, grid="0,0.03")
    with patch("src.verify.non_exactness", side_effect=lambda metric, cd, t: 0.999 * cd.sigma0.norm()):
        results = run_check(ctx, "ddbar-stability")
    verdicts = {r.case: r.passed for r in results}
    assert verdicts.pop("t=(0, 0)") is False
    assert verdicts and all(verdicts.values())


def test_shared_caches_are_built_once_without_ddbar(kt_metric, kt_family):
    ctx = _context(kt_metric, kt_family, grid="0.02")
    run_checks(ctx, ["canonical", "dimension-identity"], workers=2)
    pm = ctx.period_map
    assert pm is ctx.period_map
    with ThreadPoolExecutor(max_workers=4) as pool:
        built = list(pool.map(lambda _: pm.deformations(1, 0), range(8)))
    assert all(group is built[0] for group in built)


def test_period_map_cache_is_shared_between_threads(iwasawa_metric, iwasawa_family):
    pm = PeriodMap(iwasawa_metric, iwasawa_family, order=2)
    with ThreadPoolExecutor(max_workers=4) as pool:
        built = list(pool.map(lambda _: pm.deformations(2, 1), range(8)))
    assert len(built[0]) == iwasawa_metric.harmonic_dim("bc", 2, 1)
    assert all(group is built[0] for group in built)
