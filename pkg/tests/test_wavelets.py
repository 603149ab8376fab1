import math

import numpy as np
import pytest

from rws.lattice import BasisIndex
from rws.seqspace import CoefficientField
from rws.wavelets import (
    MAX_ORDER,
    cascade,
    check_orthonormality,
    check_vanishing_moments,
    eval_basis,
    inner_product,
    scaling_filter,
    synthesize,
)

SQ3 = math.sqrt(3)
D2_CLOSED_FORM = np.array([1 + SQ3, 3 + SQ3, 3 - SQ3, 1 - SQ3]) / (4 * math.sqrt(2))
D3_TABLE = np.array([
    0.3326705529500825, 0.8068915093110924, 0.4598775021184914,
    -0.1350110200102546, -0.0854412738820267, 0.0352262918857095,
])


@pytest.fixture(scope="module")
def haar():
    return cascade(scaling_filter(1), 4)


@pytest.fixture(scope="module")
def d2():
    return cascade(scaling_filter(2), 10)


def test_haar_filter():
    np.testing.assert_allclose(scaling_filter(1).h, [2**-0.5, 2**-0.5], rtol=0, atol=1e-15)


def test_d2_matches_closed_form():
    np.testing.assert_allclose(scaling_filter(2).h, D2_CLOSED_FORM, rtol=0, atol=1e-15)


def test_d3_matches_table():
    np.testing.assert_allclose(scaling_filter(3).h, D3_TABLE, rtol=0, atol=1e-13)


@pytest.mark.parametrize("order", range(1, MAX_ORDER + 1))
def test_filter_invariants(order):
    f = scaling_filter(order)
    h = f.h
    assert h.size == 2 * order
    assert abs(h.sum() - math.sqrt(2)) < 1e-12
    for n in range(order):
        target = 1.0 if n == 0 else 0.0
        assert abs(np.dot(h[: h.size - 2 * n], h[2 * n :]) - target) < 1e-10
    k = np.arange(h.size)
    np.testing.assert_array_equal(f.g, (-1.0) ** k * h[::-1])


@pytest.mark.parametrize("bad", [0, MAX_ORDER + 1, 2.5])
def test_filter_rejects_bad_order(bad):
    with pytest.raises(ValueError):
        scaling_filter(bad)


def test_haar_tables(haar):
    x = haar.grid
    inside = x < 1
    np.testing.assert_array_equal(haar.phi[inside], 1.0)
    np.testing.assert_array_equal(haar.psi[x < 0.5], 1.0)
    np.testing.assert_array_equal(haar.psi[(x >= 0.5) & inside], -1.0)
    assert haar.phi[~inside].sum() == 0


def test_cascade_depth_guard():
    with pytest.raises(ValueError):
        cascade(scaling_filter(2), 3)


@pytest.mark.parametrize("order", [2, 3, 4, 10])
def test_scaling_integral(order):
    system = cascade(scaling_filter(order), 10)
    assert abs(math.fsum(system.phi) * system.step - 1) < 1e-4


def test_refinement_consistency(d2):
    # phi(x) = sqrt2 sum h_k phi(2x - k) on the depth-9 subgrid, using the depth-10 table
    h = d2.filters.h
    n = np.arange(0, d2.phi.size, 2)
    x = n * d2.step
    rhs = sum(math.sqrt(2) * hk * d2.eval_1d(0, 2 * x - k) for k, hk in enumerate(h))
    np.testing.assert_allclose(d2.phi[n], rhs, rtol=0, atol=1e-8)


def test_vanishing_moments(haar, d2):
    assert check_vanishing_moments(haar, 0) < 1e-12
    assert check_vanishing_moments(d2, 1) < 1e-4
    assert check_vanishing_moments(cascade(scaling_filter(4), 10), 3) < 1e-4
    with pytest.raises(ValueError):
        check_vanishing_moments(d2, 2)


def test_eval_basis_examples(haar):
    assert eval_basis(haar, BasisIndex(0, 0, (0,)), [0.25]) == 1.0
    assert eval_basis(haar, BasisIndex(1, 1, (0,)), [0.25]) == 1.0
    h2 = haar.with_dimension(2)
    assert eval_basis(h2, BasisIndex(2, 1, (0, 0)), [0.2, 0.2]) == 2.0


def test_eval_basis_vectorized(d2):
    idx = BasisIndex(2, 1, (1,))
    pts = np.linspace(-1, 3, 17).reshape(-1, 1)
    many = eval_basis(d2, idx, pts)
    one = [eval_basis(d2, idx, p) for p in pts]
    np.testing.assert_array_equal(many, one)


def test_orthonormality_examples(haar, d2):
    i = BasisIndex(1, 1, (0,))
    assert check_orthonormality(haar, [(i, i)]) < 1e-12
    assert check_orthonormality(haar, [(i, BasisIndex(1, 1, (1,)))]) < 1e-12
    assert abs(inner_product(d2, BasisIndex(1, 1, (0,)), BasisIndex(2, 1, (0,)))) < 1e-3


@pytest.mark.parametrize("j", range(5))
def test_l2_normalization(d2, j):
    idx = BasisIndex(j, 0 if j == 0 else 1, (1,))
    assert abs(inner_product(d2, idx, idx) - 1) < 1e-2


def test_l2_normalization_2d():
    system = cascade(scaling_filter(2), 7, d=2)
    for idx in (BasisIndex(0, 0, (0, 1)), BasisIndex(1, 3, (0, 0)), BasisIndex(2, 2, (1, -1))):
        assert abs(inner_product(system, idx, idx) - 1) < 1e-2


def test_synthesize_examples(haar):
    grid = np.array([[0.25], [0.75], [1.5]])
    one = CoefficientField.from_coefficients(1, {BasisIndex(0, 0, (0,)): 1.0})
    np.testing.assert_array_equal(synthesize(haar, one, grid), [1.0, 1.0, 0.0])
    two = CoefficientField.from_coefficients(1, {BasisIndex(0, 0, (0,)): 1.0, BasisIndex(1, 1, (0,)): 2.0})
    assert synthesize(haar, two, [[0.25]])[0] == 3.0
    empty = CoefficientField(1, {}, {})
    np.testing.assert_array_equal(synthesize(haar, empty, grid), 0.0)


def test_synthesize_single_term_is_basis_function(d2):
    idx = BasisIndex(3, 1, (-2,))
    field = CoefficientField.from_coefficients(1, {idx: 1.0})
    x = np.linspace(-2, 3, 101).reshape(-1, 1)
    np.testing.assert_allclose(synthesize(d2, field, x), eval_basis(d2, idx, x), rtol=0, atol=1e-15)


def test_synthesize_linear_and_worker_independent(d2):
    rng = np.random.default_rng(3)
    coeffs = {BasisIndex(j, 0 if j == 0 else 1, (m,)): float(rng.standard_normal())
              for j in range(4) for m in range(-3, 4)}
    field = CoefficientField.from_coefficients(1, coeffs)
    x = np.linspace(-4, 4, 257).reshape(-1, 1)
    base = synthesize(d2, field, x)
    np.testing.assert_allclose(synthesize(d2, field.scaled(-2.5), x), -2.5 * base, rtol=1e-12, atol=1e-15)
    np.testing.assert_array_equal(synthesize(d2, field, x, workers=8), base)


def test_haar_cross_level_exact(haar):
    coarse = BasisIndex(1, 1, (0,))
    for fine in (BasisIndex(3, 1, (1,)), BasisIndex(4, 1, (3,)), BasisIndex(2, 1, (1,))):
        assert abs(inner_product(haar, coarse, fine)) < 1e-14
