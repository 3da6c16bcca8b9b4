"""Тесты для модуля exterior: алгебра, дифференциалы и загрузка моделей."""
import json
from pathlib import Path

import numpy as np
import pytest

from src.errors import MalformedSpec, ModelFileError, NotIntegrable
from src.exterior import Form, ModelSpec, conjugate, exterior_algebra, load_model, wedge
from src.utils import shipped_files

MODELS = shipped_files("models")


def _model(d_omega, n=3, name="test"):
    return {"name": name, "n": n, "d_omega": d_omega}


def _term(kind, i, j, re=1.0, im=0.0):
    return {"re": re, "im": im, "kind": kind, "i": i, "j": j}


def test_basis_order_and_block_sizes():
    alg = exterior_algebra(3)
    assert alg.size == 64
    # степень по возрастанию, внутри степени голоморфная часть по убыванию
    assert [tuple(b) for b in alg.bidegrees[:7]] == [(0, 0), (1, 0), (1, 0), (1, 0), (0, 1), (0, 1), (0, 1)]
    for p, q in alg.bidegree_pairs():
        assert len(alg.block(p, q)) == [1, 3, 3, 1][p] * [1, 3, 3, 1][q]
    assert len(alg.block(4, 0)) == 0


def test_monomials_are_lexicographic_within_each_block():
    alg = exterior_algebra(3)
    for p, q in alg.bidegree_pairs():
        keys = [alg.split(alg.masks[i]) for i in alg.block(p, q)]
        assert keys == sorted(keys)
        assert list(alg.block(p, q)) == list(range(alg.block(p, q)[0], alg.block(p, q)[0] + len(keys)))
    assert [alg.split(alg.masks[i]) for i in alg.block(1, 1)][:3] == [((1,), (1,)), ((1,), (2,)), ((1,), (3,))]
    assert list(alg.filtration(2, 3)) == list(range(alg.degree(3)[0], alg.degree(3)[0] + 10))


def test_wedge_examples():
    alg = exterior_algebra(2)
    w1, w2 = alg.generator(1), alg.generator(2)
    assert wedge(w1, w1).norm() == 0
    assert np.allclose(wedge(w1, alg.generator(2, conjugate=True)).coeffs, alg.monomial((1,), (2,)).coeffs)
    product = wedge(w1 + w2, w1 - w2)
    assert np.allclose(product.coeffs, alg.monomial((1, 2), coeff=-2).coeffs)


def test_wedge_graded_commutative(rng):
    alg = exterior_algebra(2)
    for _ in range(20):
        a = np.zeros(alg.size, dtype=complex)
        b = np.zeros(alg.size, dtype=complex)
        ia, ib = alg.degree(1), alg.degree(2)
        a[ia] = rng.standard_normal(len(ia))
        b[ib] = rng.standard_normal(len(ib))
        assert np.allclose(alg.wedge_vectors(a, b), alg.wedge_vectors(b, a))
        assert np.allclose(alg.wedge_vectors(a, a), 0)


def test_multiplication_matrices(rng):
    alg = exterior_algebra(2)
    a = rng.standard_normal(alg.size) + 1j * rng.standard_normal(alg.size)
    b = rng.standard_normal(alg.size) + 1j * rng.standard_normal(alg.size)
    product = alg.wedge_vectors(a, b)
    assert np.allclose(alg.left_multiplication(a) @ b, product)
    assert np.allclose(alg.right_multiplication(b) @ a, product)


def test_conjugate_examples(rng):
    alg = exterior_algebra(2)
    assert np.allclose(conjugate(alg.generator(1)).coeffs, alg.generator(1, conjugate=True).coeffs)
    form = alg.monomial((1,), (2,), coeff=1j)
    expected = alg.monomial((2,), (1,), coeff=1j)  # -i ω̄¹∧ω² = i ω²∧ω̄¹
    assert np.allclose(conjugate(form).coeffs, expected.coeffs)
    random = Form(alg, rng.standard_normal(alg.size) + 1j * rng.standard_normal(alg.size))
    assert np.allclose(conjugate(conjugate(random)).coeffs, random.coeffs)


def test_torus_is_abelian(torus1):
    assert not np.any(torus1.d.matrix)
    assert torus1.differential("d", torus1.algebra.generator(1)).norm() == 0


def test_iwasawa_differentials(iwasawa):
    alg = iwasawa.algebra
    w3 = alg.generator(3)
    expected = alg.monomial((1, 2), coeff=-1)
    assert np.allclose(iwasawa.differential("d", w3).coeffs, expected.coeffs)
    assert np.allclose(iwasawa.differential("del", w3).coeffs, expected.coeffs)
    assert iwasawa.differential("delbar", w3).norm() == 0


def test_kodaira_thurston_mixed_term_goes_to_delbar(kodaira_thurston):
    alg = kodaira_thurston.algebra
    w2 = alg.generator(2)
    assert kodaira_thurston.differential("del", w2).norm() == 0
    assert np.allclose(kodaira_thurston.differential("delbar", w2).coeffs, alg.monomial((1,), (1,)).coeffs)


@pytest.mark.parametrize("name", sorted(MODELS))
def test_operator_axioms_float(name):
    model = load_model(MODELS[name])
    d, de, db = model.d.matrix, model.del_.matrix, model.delbar.matrix
    for square in (d @ d, de @ de, db @ db, de @ db + db @ de):
        assert np.abs(square).max() < 1e-12
    assert model.del_.check_block_structure() == 0
    assert model.delbar.check_block_structure() == 0
    assert np.allclose(d, de + db)


def test_leibniz_rule(iwasawa, rng):
    alg = iwasawa.algebra
    d = iwasawa.d.matrix
    for _ in range(50):
        a = np.zeros(alg.size, dtype=complex)
        b = np.zeros(alg.size, dtype=complex)
        ia, ib = alg.block(1, 0), alg.block(1, 1)
        a[ia] = rng.standard_normal(len(ia)) + 1j * rng.standard_normal(len(ia))
        b[ib] = rng.standard_normal(len(ib)) + 1j * rng.standard_normal(len(ib))
        left = d @ alg.wedge_vectors(a, b)
        right = alg.wedge_vectors(d @ a, b) - alg.wedge_vectors(a, d @ b)
        assert np.linalg.norm(left - right) < 1e-12


def test_conjugation_commutes_with_d(iwasawa):
    alg = iwasawa.algebra
    for position in range(alg.size):
        a = alg.basis_form(position)
        left = iwasawa.differential("d", conjugate(a))
        right = conjugate(iwasawa.differential("d", a))
        assert (left - right).norm() < 1e-12


def test_non_integrable_structure_equations_rejected():
    # d²ω² = ω¹∧ω̄¹∧ω̄² ≠ 0
    spec = _model([[], [_term("mix", 1, 3)], [_term("hol", 1, 2, re=-1.0)]])
    with pytest.raises(NotIntegrable) as info:
        load_model(spec)
    assert info.value.monomial == "ω2"


def test_iwasawa_variant_with_jacobi_identity_is_accepted():
    spec = _model([[], [_term("hol", 1, 3)], [_term("hol", 1, 2, re=-1.0)]])
    model = load_model(spec)
    assert np.abs(model.d.matrix @ model.d.matrix).max() == 0


@pytest.mark.parametrize(
    "d_omega",
    [
        [[], [], [_term("hol", 2, 1)]],
        [[], [], [_term("hol", 1, 4)]],
        [[], [], [{"re": 1.0, "kind": "other", "i": 1, "j": 2}]],
        [[], []],
    ],
)
def test_malformed_specs(d_omega):
    with pytest.raises(MalformedSpec):
        load_model(_model(d_omega))


def test_anti_terms_flag_non_integrable_complex_structure():
    model = load_model(_model([[], [], [_term("anti", 1, 2)]]))
    assert not model.complex_integrable
    assert not np.allclose(model.d.matrix, model.del_.matrix + model.delbar.matrix)


def test_missing_file(tmp_path: Path):
    with pytest.raises(ModelFileError):
        load_model(tmp_path / "missing.json")


def test_broken_json_reports_position(tmp_path: Path):
    path = tmp_path / "broken.json"
    path.write_text('{\n  "name": "x",\n  "n": ,\n}', encoding="utf-8")
    with pytest.raises(ModelFileError) as info:
        load_model(path)
    assert info.value.line == 3


def test_model_round_trip_from_file(tmp_path: Path):
    path = tmp_path / "iw.json"
    path.write_text(json.dumps(_model([[], [], [_term("hol", 1, 2, re=-1.0)]], name="iw")), encoding="utf-8")
    model = load_model(path)
    assert model.name == "iw"
    assert isinstance(model.spec, ModelSpec)
    assert len(model.d_exact) > 0


def test_coframe_scale_rescales_structure_constants():
    spec = _model([[], [], [_term("hol", 1, 2, re=-1.0)]])
    scaled = load_model(spec, coframe_scale=2.0)
    plain = load_model(spec)
    assert np.allclose(scaled.d.matrix, plain.d.matrix / 2)
