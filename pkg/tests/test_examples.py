import numpy as np
import pytest

from conftest import CYCLE2, TWO_STATE, K
from ergokit.errors import SpecViolation
from ergokit.examples import (
    FatCantorSpec,
    TwoPointMapSpec,
    build_block_kernel,
    build_fat_cantor_kernel,
    build_two_point_map_kernel,
    cantor_mass,
    example_from_json,
    fat_cantor_cells,
    regularity_failure,
    two_point_constant,
)
from ergokit.invariant import lemma1_density, stationary_on_class, uniqueness_certificate
from ergokit.kernel import ProbMeasure, StateFunction, StateSet
from ergokit.simulate import doeblin_rate_check
from ergokit.structure import class_decomposition, indecomposability_certificate


def half_spec(eps):
    return FatCantorSpec(10, (1, 2, 3, 4, 5), eps, 0, 9)


def test_fat_cantor_mass_of_c():
    P, pi = build_fat_cantor_kernel(half_spec(0.2))
    # p = eps * lambda_C + (1 - eps) * 0 with lambda_C = 1/2
    assert pi.mass(half_spec(0.2).C) == pytest.approx(0.1, abs=1e-15)
    solved = stationary_on_class(P, class_decomposition(P).closed_classes[0])
    assert np.abs(solved.weights - pi.weights).max() <= 1e-10


def test_fat_cantor_pure_noise():
    _, pi = build_fat_cantor_kernel(half_spec(1.0))
    np.testing.assert_allclose(pi.weights, np.full(10, 0.1), atol=1e-15)


def test_cantor_mass_general_case_is_a_fixed_point():
    for a0 in (False, True):
        for a1 in (False, True):
            p = cantor_mass(0.3, 0.4, a0, a1)
            assert p == pytest.approx(0.3 * 0.4 + 0.7 * (p * a0 + (1 - p) * a1))


def test_regularity_failure_surrogate(rng):
    spec = FatCantorSpec.default(0.2)
    P, pi = build_fat_cantor_kernel(spec)
    for _ in range(20):
        f = StateFunction(rng.normal(size=spec.grid_n))
        res = regularity_failure(P, spec, pi, f)
        assert res.holds
        assert res.mass_on_c == pytest.approx(pi.mass(spec.C))
        a = (1 - spec.eps) * f.values[spec.atom0] + spec.eps * f.values.mean()
        assert res.value_on_c == pytest.approx(a, abs=1e-12)


def test_fat_cantor_default_cells():
    cells = fat_cantor_cells(256)
    assert 0 in cells and 255 in cells
    assert 0.45 < len(cells) / 256 < 0.6
    spec = FatCantorSpec.default(0.5)
    assert spec.atom0 not in spec.C_cells and spec.atom1 not in spec.C_cells


def test_fat_cantor_spec_violations():
    with pytest.raises(SpecViolation):
        FatCantorSpec(10, (0, 1), 0.2, 0, 9)
    with pytest.raises(SpecViolation):
        FatCantorSpec(10, (), 0.2, 0, 9)
    with pytest.raises(SpecViolation):
        FatCantorSpec(10, (1,), 0.0, 0, 9)
    with pytest.raises(SpecViolation):
        FatCantorSpec(4, (1, 2), 0.5, 0, 0)


@pytest.mark.parametrize("eps", [0.1, 0.2, 0.5])
def test_fat_cantor_doeblin(eps):
    spec = FatCantorSpec.default(eps)
    P, pi = build_fat_cantor_kernel(spec)
    assert doeblin_rate_check(P, eps, ProbMeasure.uniform(spec.grid_n), 100).passed


def test_two_point_map_examples():
    spec = TwoPointMapSpec(10, 3, 0, 1, 0.3)
    P, pi = build_two_point_map_kernel(spec)
    assert pi.mass(spec.atoms) == 0.0
    cert = uniqueness_certificate(P)
    assert cert.unique and cert.measure.mass(spec.atoms) <= 1e-14
    f = StateFunction.indicator(spec.n, [spec.beta_cell])
    assert two_point_constant(spec, f) == pytest.approx(0.7 + 0.3 / 10)
    pf = P.matrix @ f.values
    np.testing.assert_allclose(pf[pi.weights > 0], 0.7 + 0.03, atol=1e-12)
    # the null atoms see alpha instead, so Pf is not constant everywhere
    assert pf[spec.grid_n] != pytest.approx(0.73)


def test_two_point_map_pure_noise():
    spec = TwoPointMapSpec(10, 2, 3, 4, 1.0)
    _, pi = build_two_point_map_kernel(spec)
    np.testing.assert_allclose(pi.weights, spec.nu(), atol=1e-15)


def test_two_point_spec_violations():
    with pytest.raises(SpecViolation):
        TwoPointMapSpec(10, 0, 0, 1, 0.3)
    with pytest.raises(SpecViolation):
        TwoPointMapSpec(10, 2, 1, 1, 0.3)
    with pytest.raises(SpecViolation):
        TwoPointMapSpec(10, 2, 0, 10, 0.3)


def test_block_kernels():
    a, b = K(CYCLE2), K(TWO_STATE)
    plain = build_block_kernel([a, b])
    cert = indecomposability_certificate(plain)
    assert not cert.indecomposable
    mu, nu = (stationary_on_class(plain, C) for C in cert.witness)
    lemma1_density(plain, mu, nu).verify(plain)

    bridged = build_block_kernel([a, b], bridge=(0, 1, 0.25))
    assert bridged.matrix[0].tolist() == [0, 0.75, 0.125, 0.125]
    u = uniqueness_certificate(bridged)
    assert u.unique and u.measure.mass(StateSet.of(4, [2, 3])) == pytest.approx(1)

    assert np.array_equal(build_block_kernel([b]).matrix, b.matrix)
    with pytest.raises(SpecViolation):
        build_block_kernel([a, b], bridge=(0, 1, 1.0))


def test_example_documents():
    P, pi, spec = example_from_json({"example": "fat_cantor", "eps": 0.2, "grid_n": 64})
    assert P.n == 64 and pi.mass(spec.C) == pytest.approx(0.2 * spec.lambda_c)
    P, pi, _ = example_from_json({"example": "two_point_map", "eps": 0.3})
    assert P.n == 13
    P, pi, _ = example_from_json({"example": "blocks", "blocks": [CYCLE2, [[1.0]]]})
    assert pi is None and P.n == 3
    with pytest.raises(SpecViolation):
        example_from_json({"example": "nope"})
    with pytest.raises(SpecViolation):
        example_from_json({"example": "fat_cantor"})
