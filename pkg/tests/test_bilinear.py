from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from radonlike.bilinear import (
    BilinearMap,
    adjoint,
    complex_multiplication,
    contract_left,
    contract_right,
    contract_right_batch,
    eval_q,
    inflation_jacobian,
    is_symmetric,
    perturb_u,
    product_type,
    symmetrize,
)
from radonlike.errors import DimensionError, DomainError, SchemaError

coeff_tensors = st.integers(1, 4).flatmap(
    lambda n: arrays(float, (n, n, n), elements=st.floats(-5, 5, allow_subnormal=False))
)


def vec(n):
    return arrays(float, n, elements=st.floats(-3, 3, allow_subnormal=False))


@given(coeff_tensors.flatmap(lambda c: st.tuples(st.just(c), vec(c.shape[1]), vec(c.shape[1]), vec(c.shape[0]))))
def test_contractions_agree_with_evaluation(args):
    c, x, y, lam = args
    Q = BilinearMap(c)
    q = eval_q(Q, x, y)
    assert np.allclose(contract_right(Q, y) @ x, q, atol=1e-9)
    assert np.isclose(x @ contract_left(Q, lam) @ y, lam @ q, atol=1e-8)
    assert np.allclose(eval_q(adjoint(Q), y, x), q, atol=1e-9)
    batch = contract_right_batch(Q.as_float(), np.stack([y, 2 * y]))
    assert np.allclose(batch[0], contract_right(Q, y)) and np.allclose(batch[1], 2 * contract_right(Q, y))


@given(coeff_tensors)
def test_symmetrize_is_symmetric_projection(c):
    S = symmetrize(BilinearMap(c))
    assert is_symmetric(S)
    assert symmetrize(S) == S


def test_exact_mode_is_preserved():
    Q = complex_multiplication()
    assert Q.exact
    out = eval_q(Q, [Fraction(1, 2), 1], [1, Fraction(1, 3)])
    assert list(out) == [Fraction(1, 2) - Fraction(1, 3), Fraction(1, 6) + 1]
    assert eval_q(Q, [0.5, 1.0], [1.0, 0.5]).dtype == float


def test_product_type_contraction():
    N = contract_right(product_type(3), [1, 2, 3])
    assert np.array_equal(N.astype(int), np.diag([1, 2, 3]))


def test_perturbation_adds_diagonal():
    Q = perturb_u(product_type(2), [Fraction(1, 2), -1])
    assert Q.coeffs[0, 0, 0] == Fraction(3, 2) and Q.coeffs[1, 1, 1] == 0
    with pytest.raises(DomainError):
        perturb_u(BilinearMap(np.zeros((1, 2, 2))), [0, 0])


def test_json_round_trip_keeps_rationals():
    doc = {"n_in": 2, "n_out": 1, "coeffs": [[["1/3", 2], [0, -1]]]}
    Q = BilinearMap.from_json(doc)
    assert Q.exact and Q.coeffs[0, 0, 0] == Fraction(1, 3)
    assert BilinearMap.from_json(Q.to_json()) == Q
    assert not BilinearMap.from_json({"n_in": 1, "n_out": 1, "coeffs": [[[0.5]]]}).exact


@pytest.mark.parametrize(
    "doc",
    [
        {"n_in": 2, "n_out": 1},
        {"n_in": 2, "n_out": 1, "coeffs": [[[1, 2], [3]]]},
        {"n_in": 3, "n_out": 1, "coeffs": [[[1, 2], [3, 4]]]},
        {"n_in": 1, "n_out": 1, "coeffs": [[[True]]]},
        {"n_in": 1, "n_out": 1, "coeffs": [[["x/2"]]]},
        {"n_in": 0, "n_out": 1, "coeffs": [[[1]]]},
    ],
)
def test_malformed_tensors_are_schema_errors(doc):
    with pytest.raises(SchemaError):
        BilinearMap.from_json(doc)


def test_dimension_mismatch():
    with pytest.raises(DimensionError):
        contract_right(product_type(2), [1, 2, 3])
    with pytest.raises(DimensionError):
        BilinearMap(np.zeros((2, 2, 3)))


def _full_inflation_det(Phi, x, xp, ts, h=1e-6):
    """|det| of the full inflation Jacobian by central differences."""
    n, m, k = Phi.n_in, Phi.n_out, len(ts)

    def F(z):
        x_, xp_ = z[:n], z[n : n + m]
        out = []
        for i in range(k):
            t = z[n + m + i * n : n + m + (i + 1) * n]
            out.append(np.concatenate([x_ + t, xp_ + eval_q(Phi, x_, t)]))
        return np.concatenate(out)

    z0 = np.concatenate([x, xp, *ts])
    J = np.empty((z0.size, z0.size))
    for j in range(z0.size):
        e = np.zeros(z0.size)
        e[j] = h
        J[:, j] = (F(z0 + e) - F(z0 - e)) / (2 * h)
    return abs(np.linalg.det(J))


@pytest.mark.parametrize("seed", range(5))
def test_inflation_jacobian_matches_finite_differences(seed):
    g = np.random.default_rng(seed)
    Phi = BilinearMap(g.uniform(-1, 1, (1, 2, 2)))
    x, ts = g.uniform(-1, 1, 2), [g.uniform(-1, 1, 2) for _ in range(3)]
    expected = _full_inflation_det(Phi, x, g.uniform(-1, 1, 1), ts)
    assert np.isclose(inflation_jacobian(Phi, x, ts), expected, rtol=1e-6, atol=1e-9)


def test_inflation_jacobian_exact_and_shape_checks():
    Phi = BilinearMap(np.array([[[1, 0], [0, 1]]], dtype=object))
    value = inflation_jacobian(Phi, [0, 0], [[1, 0], [0, 1], [0, 0]])
    assert isinstance(value, Fraction)
    with pytest.raises(DimensionError):
        inflation_jacobian(Phi, [0, 0], [[1, 0], [0, 1]])
