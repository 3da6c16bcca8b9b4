"""Тесты для модуля deformation."""
import numpy as np
import pytest

from src.deformation import (
    Beltrami,
    contract,
    deformed_bigrading,
    deformed_d,
    deformed_delbar,
    deformed_operators,
    exp_contract,
    filtration_preservation_residual,
    frame_singular_value,
    integrability_residual,
    ks_class,
    load_family,
    require_integrable,
    vector_delbar_squared,
)
from src.errors import FrameDegenerate, MalformedSpec, NotClosed, NotIntegrableAt
from src.series import FormSeries


def _unit(n, alpha, beta):
    matrix = np.zeros((n, n), dtype=complex)
    matrix[alpha - 1, beta - 1] = 1.0
    return matrix


def test_family_from_file(iwasawa_family):
    assert iwasawa_family.m == 1
    assert iwasawa_family.order == 6
    assert np.allclose(iwasawa_family.at(0.05), 0.05 * _unit(3, 2, 1))
    assert np.allclose(iwasawa_family.first_order(0), _unit(3, 2, 1))


def test_two_parameter_family(torus2_family):
    t = (0.02, 0.03)
    expected = np.array([[0.02, 0.015j], [0.5 * 0.02 * 0.03, 0.03]])
    assert np.allclose(torus2_family.at(t), expected)


@pytest.mark.parametrize(
    "terms",
    [
        [{"exponent": [1], "alpha": 4, "beta": 1, "re": 1.0}],
        [{"exponent": [0], "alpha": 1, "beta": 1, "re": 1.0}],
        [{"exponent": [1, 0], "alpha": 1, "beta": 1, "re": 1.0}],
        [{"exponent": [9], "alpha": 1, "beta": 1, "re": 1.0}],
    ],
)
def test_malformed_family(terms, iwasawa):
    with pytest.raises(MalformedSpec):
        load_family({"name": "bad", "m": 1, "N": 6, "terms": terms}, iwasawa)


def test_contraction_and_exponential(torus1, torus1_family):
    alg = torus1.algebra
    w, wbar = alg.generator(1), alg.generator(1, conjugate=True)
    assert np.allclose(contract(np.eye(1), w).coeffs, wbar.coeffs)
    assert contract(np.eye(1), alg.monomial((1,), (1,))).norm() == 0
    assert np.allclose(exp_contract(torus1_family, w, t=0.1).coeffs, (w + 0.1 * wbar).coeffs)
    back = exp_contract(torus1_family, exp_contract(torus1_family, w, t=0.1), t=0.1, sign=-1)
    assert np.allclose(back.coeffs, w.coeffs)

    series = contract(torus1_family, w)
    assert isinstance(series, FormSeries)
    assert np.allclose(series.coefficient((1,)), wbar.coeffs)
    assert np.allclose(series.coefficient((0,)), 0)


@pytest.mark.parametrize("t", [0.0, 0.01, -0.05 + 0.02j, 0.1])
def test_shipped_families_are_integrable(t, iwasawa, iwasawa_family, kodaira_thurston, kt_family):
    assert integrability_residual(iwasawa, iwasawa_family, t) < 1e-12
    assert integrability_residual(kodaira_thurston, kt_family, t) < 1e-12


def test_non_integrable_direction_on_iwasawa(iwasawa):
    phi = Beltrami.linear("ω̄3⊗e3", [_unit(3, 3, 3)])
    assert integrability_residual(iwasawa, phi, 0.0) == 0
    with pytest.raises(NotIntegrableAt) as info:
        require_integrable(iwasawa, phi, 0.05)
    assert info.value.residual > 1e-3


def test_degenerate_frame(torus1, torus1_family):
    assert frame_singular_value(np.zeros((2, 2))) == pytest.approx(1.0)
    with pytest.raises(FrameDegenerate):
        integrability_residual(torus1, torus1_family, 1.0)


@pytest.mark.parametrize("t", [0.01, 0.05, -0.1j])
def test_conjugated_differential(t, iwasawa, iwasawa_family):
    ops = deformed_operators(iwasawa, require_integrable(iwasawa, iwasawa_family, t))
    assert ops.conjugation_residual() < 1e-9
    assert ops.d_squared() < 1e-9


def test_abelian_model_has_trivial_lie_derivative(torus2, torus2_family):
    ops = deformed_operators(torus2, torus2_family.at((0.05, -0.02)))
    assert not np.any(ops.lie)
    assert not np.any(ops.d)


def test_deformed_bigrading(iwasawa, iwasawa_family):
    grading = deformed_bigrading(iwasawa, iwasawa_family, 0.05)
    assert grading.grading_defect() < 1e-10
    assert np.allclose(grading.frame @ grading.frame_inverse, np.eye(iwasawa.algebra.size))
    alg = iwasawa.algebra
    projectors = sum(grading.projector(p, q) for p, q in alg.bidegree_pairs())
    assert np.allclose(projectors, np.eye(alg.size))
    assert filtration_preservation_residual(iwasawa, grading.phi) < 1e-9


def test_vector_delbar_squares_to_zero(iwasawa, kodaira_thurston):
    assert vector_delbar_squared(iwasawa) < 1e-12
    assert vector_delbar_squared(kodaira_thurston) < 1e-12


def test_ks_class_of_harmonic_direction(iwasawa, iwasawa_family):
    kappa = ks_class(iwasawa, iwasawa_family)
    assert np.allclose(kappa.beltrami_matrix(), _unit(3, 2, 1))


def test_ks_class_on_kodaira_thurston(kodaira_thurston, kt_family):
    kappa = ks_class(kodaira_thurston, kt_family)
    assert np.allclose(kappa.beltrami_matrix(), _unit(2, 2, 2))


def test_ks_class_requires_closed_direction(kodaira_thurston):
    phi = Beltrami.linear("ω̄2⊗e1", [_unit(2, 1, 2)])
    with pytest.raises(NotClosed):
        ks_class(kodaira_thurston, phi)


def test_deformed_delbar_at_origin(iwasawa, iwasawa_family):
    alg = iwasawa.algebra
    a = alg.generator(3, conjugate=True)
    assert np.allclose(deformed_delbar(iwasawa, iwasawa_family, 0.0, a).coeffs, iwasawa.delbar.matrix @ a.coeffs)
    assert np.allclose(deformed_d(iwasawa, iwasawa_family, 0.0, a).coeffs, iwasawa.d.matrix @ a.coeffs)
