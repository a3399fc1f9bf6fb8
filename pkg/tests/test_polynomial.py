import numpy as np
import sympy as sp
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from radonlike.bilinear import BilinearMap, contract_right, perturb_u, product_type
from radonlike.polynomial import SparsePoly, det_of_contraction


@given(st.integers(1, 3).flatmap(lambda n: arrays(float, (n, n, n), elements=st.floats(-3, 3))),
       st.integers(0, 2**32 - 1))
def test_contraction_determinant_polynomial(c, seed):
    n = c.shape[1]
    p = det_of_contraction(c)
    t = np.random.default_rng(seed).uniform(-1, 1, (5, n))
    expected = [np.linalg.det(contract_right(BilinearMap(c), ti)) for ti in t]
    assert np.allclose(p(t), expected, atol=1e-8)


@given(arrays(float, (2, 2, 2), elements=st.floats(-3, 3)), st.integers(0, 2**32 - 1))
def test_perturbed_polynomial(c, seed):
    p = det_of_contraction(c, perturb=True)
    g = np.random.default_rng(seed)
    for _ in range(5):
        t, u = g.uniform(-1, 1, 2), g.uniform(-1, 1, 2)
        expected = np.linalg.det(contract_right(perturb_u(BilinearMap(c), u), t))
        assert np.isclose(p(np.concatenate([t, u]))[0], expected, atol=1e-8)


def test_symbolic_expansion():
    t = sp.symbols("t0:2")
    c = np.array([[[1, 2], [0, -1]], [[3, 0], [1, 1]]], dtype=float)
    N = sp.Matrix(2, 2, lambda i, j: sum(int(c[i, j, k]) * t[k] for k in range(2)))
    expected = sp.Poly(sp.expand(N.det()), *t).as_dict()
    assert det_of_contraction(c).to_dict() == {e: float(v) for e, v in expected.items()}


@given(st.integers(0, 2**32 - 1))
def test_log_space_matches_direct(seed):
    g = np.random.default_rng(seed)
    p = SparsePoly.from_dict({(1, 1): 2.0, (2, 0): -1.0, (0, 0): 0.5}, 2)
    z = g.uniform(-1, 1, (50, 2))
    sign, lp = p.log_abs(np.sign(z), np.log(np.abs(z)))
    direct = p(z)
    assert np.allclose(sign * np.exp(lp), direct, rtol=1e-10, atol=1e-14)


def test_log_space_survives_underflow():
    p = SparsePoly.from_dict({(1, 1): 1.0, (0, 2): 3.0}, 2)
    logs = np.array([[-1e6, -2e6], [-np.inf, -5.0]])
    sign, lp = p.log_abs(np.ones_like(logs), logs)
    assert np.isclose(lp[0], -3e6) and np.isclose(lp[1], np.log(3.0) - 10.0)
    zero = SparsePoly.from_dict({(1, 0): 1.0}, 2)
    assert np.isneginf(zero.log_abs(np.ones((1, 2)), np.array([[-np.inf, 0.0]]))[1][0])


def test_product_type_polynomial():
    # N(t) = diag(t): det = t0 t1 t2
    assert det_of_contraction(product_type(3).as_float()).to_dict() == {(1, 1, 1): 1.0}
