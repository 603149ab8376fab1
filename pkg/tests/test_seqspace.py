import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rws.lattice import BasisIndex
from rws.priors import PriorSpec, sample_field
from rws.seqspace import CoefficientField, SpaceSpec, level_norm, lp_norm, seq_norm, weight_shift, weight_w_sigma

INF = math.inf


def field_of(d, coeffs):
    return CoefficientField.from_coefficients(d, {BasisIndex(*k): v for k, v in coeffs.items()})


@st.composite
def small_fields(draw):
    values = draw(st.lists(st.floats(-100, 100, allow_nan=False), min_size=1, max_size=12))
    coeffs = {}
    for i, v in enumerate(values):
        j = i % 4
        coeffs[(j, 0 if j == 0 else 1, (i // 4 - 1,))] = v
    return field_of(1, coeffs)


exponents = st.sampled_from([0.5, 1.0, 1.5, 2.0, 3.0, INF])


def test_space_spec_validation():
    with pytest.raises(ValueError):
        SpaceSpec(1, 0, 0, 2)
    with pytest.raises(ValueError):
        SpaceSpec(0, 0, 2, 2)
    assert SpaceSpec(2, 1, INF, 1).level_exponent == 2.0
    assert SpaceSpec(1, 0, 2, 2).level_exponent == 0.0


@pytest.mark.parametrize("x,sigma,expected", [((0.0,), -3, 1.0), ((1.0, 0.0), 2, 2.0), ((2.0,), -2, 0.2)])
def test_weight_examples(x, sigma, expected):
    np.testing.assert_allclose(weight_w_sigma(x, sigma), expected, rtol=1e-15)


def test_level_norm_examples():
    f = field_of(1, {(0, 0, (0,)): 2.0})
    for p in (0.5, 1, 2, INF):
        assert level_norm(f, 0, 0, SpaceSpec(1, 0, p, 2)) == 2.0
    g = field_of(1, {(1, 1, (0,)): 3.0, (1, 1, (1,)): 4.0})
    np.testing.assert_allclose(level_norm(g, 1, 1, SpaceSpec(1, 0, 2, 2)), 5.0, rtol=1e-15)
    h = field_of(1, {(0, 0, (m,)): 1.0 for m in (-1, 0, 1)})
    assert level_norm(h, 0, 0, SpaceSpec(1, 0, INF, 2, sigma=-2)) == 1.0
    assert level_norm(h, 3, 1, SpaceSpec(1, 0, 2, 2)) == 0.0
    with pytest.raises(ValueError):
        level_norm(h, 0, 1, SpaceSpec(1, 0, 2, 2))


def test_weight_uses_shifted_scale():
    # j = 2 evaluates w at 2^-(j-1) m = m/2
    f = field_of(1, {(2, 1, (2,)): 1.0})
    np.testing.assert_allclose(level_norm(f, 2, 1, SpaceSpec(1, 0, 2, 2, sigma=2)), 2.0, rtol=1e-15)
    g = field_of(1, {(0, 0, (2,)): 1.0})
    np.testing.assert_allclose(level_norm(g, 0, 0, SpaceSpec(1, 0, 2, 2, sigma=2)), 5.0, rtol=1e-15)


def test_seq_norm_examples():
    single = field_of(1, {(0, 0, (0,)): 2.0})
    for s, p, q in [(0, 2, 2), (3, 0.5, INF), (-1, INF, 1)]:
        assert seq_norm(single, SpaceSpec(1, s, p, q)).total == 2.0
    one = field_of(1, {(1, 1, (0,)): 1.0})
    np.testing.assert_allclose(seq_norm(one, SpaceSpec(1, 1, 2, 2)).total, 2.0, rtol=1e-15)
    two = field_of(1, {(0, 0, (0,)): 3.0, (1, 1, (0,)): 4.0})
    np.testing.assert_allclose(seq_norm(two, SpaceSpec(1, 0.5, 2, 2)).total, math.sqrt(41), rtol=1e-15)


def test_lp_norm_edge_cases():
    assert lp_norm(np.array([]), 2) == 0.0
    assert lp_norm(np.array([3.0, -4.0]), INF) == 4.0
    np.testing.assert_allclose(lp_norm(np.array([1e-200, 1e-200]), 2), math.sqrt(2) * 1e-200, rtol=1e-15)
    np.testing.assert_allclose(lp_norm(np.array([1e200, 1e200]), 2), math.sqrt(2) * 1e200, rtol=1e-15)


@settings(max_examples=60, deadline=None)
@given(field=small_fields(), p=exponents, q=exponents, s=st.floats(-2, 2))
def test_decomposition_identity(field, p, q, s):
    rep = seq_norm(field, SpaceSpec(1, s, p, q))
    if math.isinf(q):
        assert rep.total == max(rep.eta1, rep.eta2)
    else:
        np.testing.assert_allclose(rep.total**q, rep.eta1**q + rep.eta2**q, rtol=1e-12)


@settings(max_examples=60, deadline=None)
@given(field=small_fields(), p=exponents, q=exponents, c=st.floats(-50, 50))
def test_homogeneity(field, p, q, c):
    spec = SpaceSpec(1, 0.3, p, q)
    np.testing.assert_allclose(seq_norm(field.scaled(c), spec).total, abs(c) * seq_norm(field, spec).total,
                               rtol=1e-12, atol=1e-300)


@settings(max_examples=60, deadline=None)
@given(field=small_fields(), p=exponents, s1=st.floats(-2, 2), s2=st.floats(-2, 2))
def test_monotone_in_s(field, p, s1, s2):
    lo, hi = sorted((s1, s2))
    assert seq_norm(field, SpaceSpec(1, lo, p, 2)).total <= seq_norm(field, SpaceSpec(1, hi, p, 2)).total * (1 + 1e-12)


@settings(max_examples=60, deadline=None)
@given(field=small_fields(), p=exponents, q1=exponents, q2=exponents)
def test_lq_nesting(field, p, q1, q2):
    lo, hi = sorted((q1, q2))
    assert seq_norm(field, SpaceSpec(1, 0, p, hi)).total <= seq_norm(field, SpaceSpec(1, 0, p, lo)).total * (1 + 1e-12)


def test_partial_norms_nested():
    f = sample_field(PriorSpec.besov(0, -1.5, -1.5), 6, seed=2)
    rep = seq_norm(f, SpaceSpec(1, 0, 2, 2))
    partials = [rep.partial(J) for J in range(7)]
    assert all(a <= b for a, b in zip(partials, partials[1:]))
    assert partials[-1] == rep.total
    np.testing.assert_allclose(seq_norm(f.truncate(3), SpaceSpec(1, 0, 2, 2)).total, partials[3], rtol=1e-15)
    np.testing.assert_allclose(sum(rep.level_powers().values()), rep.total**2, rtol=1e-12)


def test_weight_shift_examples():
    prior = PriorSpec.besov(-1, -1, -1, 0)
    shifted = weight_shift(prior, -0.5)
    assert (shifted.alpha, shifted.beta, shifted.gamma, shifted.theta) == (-1, -1.5, -1.5, 0)
    assert weight_shift(prior, 0) == prior
    assert weight_shift(weight_shift(prior, 0.75), -0.75) == prior


def test_weighted_unweighted_consistency():
    prior = PriorSpec.besov(-1, -1.5, -1.5)
    sigma = 0.5
    for J in range(4, 9):
        for seed in range(3):
            weighted = seq_norm(sample_field(prior, J, seed), SpaceSpec(1, 0, 2, 2, sigma=sigma)).total
            plain = seq_norm(sample_field(weight_shift(prior, sigma), J, seed), SpaceSpec(1, 0, 2, 2)).total
            assert 1 / 8 <= weighted / plain <= 8


def test_field_validation():
    with pytest.raises(ValueError):
        CoefficientField(1, {0: np.zeros((1, 2))}, {0: 1})
    with pytest.raises(ValueError):
        CoefficientField(1, {0: np.array([[np.inf]])}, {0: 0})
    f = field_of(1, {(0, 0, (1,)): 2.0, (2, 1, (-3,)): 1.5})
    assert dict(f.items()) == {BasisIndex(0, 0, (1,)): 2.0, BasisIndex(2, 1, (-3,)): 1.5}
    assert f.get(BasisIndex(0, 0, (5,))) == 0.0
    assert f.j_max == 2
