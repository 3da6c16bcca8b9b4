"""Тесты для модуля metric: лапласианы, операторы Грина и разложение Ботта-Черна."""
import numpy as np
import pytest

from src.errors import DegreeMismatch
from src.metric import MetricContext, adjoint, inner


def test_torus1_bc_numbers(torus1_metric):
    for p, q in torus1_metric.algebra.bidegree_pairs():
        assert torus1_metric.harmonic_dim("bc", p, q) == 1


def test_iwasawa_bc_numbers(iwasawa_metric):
    assert iwasawa_metric.harmonic_dim("bc", 1, 0) == 2
    assert iwasawa_metric.harmonic_dim("bc", 1, 1) == 4
    assert iwasawa_metric.harmonic_dim("bc", 2, 0) == 3


@pytest.mark.parametrize("fixture", ["iwasawa_metric", "kt_metric", "torus2_metric"])
def test_orthogonal_decomposition(fixture, request):
    metric: MetricContext = request.getfixturevalue(fixture)
    for p, q in metric.algebra.bidegree_pairs():
        report = metric.bc_decomposition(p, q)
        assert report.balanced, (p, q, report)
        assert report.orthogonality < 1e-9


@pytest.mark.parametrize("fixture", ["iwasawa_metric", "kt_metric"])
def test_kernel_identity(fixture, request):
    metric: MetricContext = request.getfixturevalue(fixture)
    for p, q in metric.algebra.bidegree_pairs():
        assert metric.kernel_identity_residual(p, q) < 1e-8


def test_green_operator_identities(iwasawa_metric):
    for p, q in [(1, 1), (2, 1), (1, 2)]:
        green, harmonic = iwasawa_metric.green_bc(p, q)
        laplacian = iwasawa_metric.laplacian_bc(p, q)
        identity = np.eye(laplacian.shape[0])
        assert np.allclose(harmonic + laplacian @ green, identity, atol=1e-10)
        assert np.allclose(green @ harmonic, 0, atol=1e-10)


def test_harmonic_basis_is_orthonormal_and_harmonic(iwasawa_metric):
    basis = iwasawa_metric.harmonic_basis("bc", 1, 1)
    assert basis.shape[1] == 4
    assert np.allclose(basis.conj().T @ basis, np.eye(4), atol=1e-10)
    assert np.allclose(iwasawa_metric.laplacians["bc"].matrix @ basis, 0, atol=1e-10)


def test_degree_only_basis_concatenates_blocks(iwasawa_metric):
    total = iwasawa_metric.harmonic_basis("bc", k=1)
    assert total.shape[1] == iwasawa_metric.harmonic_dim("bc", 1, 0) + iwasawa_metric.harmonic_dim("bc", 0, 1)


def test_adjointness(kt_metric, rng):
    assert kt_metric.adjointness_residual(rng) < 1e-12


def test_shipped_models_are_well_conditioned(iwasawa_metric, kt_metric):
    assert iwasawa_metric.ill_conditioned == []
    assert kt_metric.ill_conditioned == []


def test_large_floor_is_reported(iwasawa):
    noisy = MetricContext(iwasawa, floor=10.0)
    assert noisy.ill_conditioned
    assert all(record.smallest < 10.0 for record in noisy.ill_conditioned)


def test_inner_product(torus1_metric):
    alg = torus1_metric.algebra
    w = alg.generator(1)
    assert inner(w * 2j, w) == 2j
    with pytest.raises(DegreeMismatch):
        inner(w, alg.monomial((1,), (1,)))


def test_unknown_theory(torus1_metric):
    with pytest.raises(ValueError):
        torus1_metric.harmonic_dim("aeppli", 0, 0)


def test_harmonic_projection(torus2_metric, iwasawa_metric):
    for p, q in torus2_metric.algebra.bidegree_pairs():
        projector = torus2_metric.harmonic_projection("bc", p, q)
        assert np.allclose(projector, np.eye(projector.shape[0]))
    for theory, key in [("bc", (1, 1)), ("delbar", (1, 0)), ("delbar", (0, 1))]:
        projector = iwasawa_metric.harmonic_projection(theory, *key)
        assert np.abs(projector @ projector - projector).max() < 1e-12
        assert np.allclose(projector, projector.conj().T)
        assert round(np.trace(projector).real) == iwasawa_metric.harmonic_dim(theory, *key)
    # ∂̄ω̄³ = -ω̄¹∧ω̄², поэтому ω̄³ не ∂̄-замкнута
    assert iwasawa_metric.harmonic_dim("delbar", 1, 0) == 3
    assert iwasawa_metric.harmonic_dim("delbar", 0, 1) == 2
    derham = iwasawa_metric.harmonic_projection("derham", k=1)
    assert round(np.trace(derham).real) == 4


def test_bc_laplacian_is_positive(kt_metric):
    for p, q in kt_metric.algebra.bidegree_pairs():
        block = kt_metric.laplacian_bc(p, q)
        assert np.allclose(block, block.conj().T)
        assert np.linalg.eigvalsh(block).min() > -1e-12


def test_adjoint_matrix(iwasawa_metric):
    delbar = iwasawa_metric.model.delbar
    assert np.allclose(adjoint(delbar).matrix, delbar.matrix.conj().T)
