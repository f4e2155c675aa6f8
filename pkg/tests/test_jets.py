import numpy as np
import pytest
import sympy as sp

from deformam.jets import Jet, multi_indices

X, Y, Z = sp.symbols("x y z", real=True)


def test_multi_indices_count():
    assert len(multi_indices(3, 3)) == 20
    assert multi_indices(2, 1) == ((0, 0), (1, 0), (0, 1))


@pytest.mark.parametrize("alpha", [(0, 0, 0), (1, 0, 0), (0, 1, 1), (1, 1, 1), (0, 0, 3), (2, 0, 1)])
def test_derivatives_match_sympy(alpha):
    pt = (0.3, 0.7, -0.4)
    expr = sp.exp((X + 2 * Y) * Z) * (X**2 + Y**2 + Z**2) ** sp.Rational(3, 4) * sp.log(X + sp.I * Y) / (1 + X * Z)
    x, y, z = (Jet.variable(np.array([pt[n]]), n, 3, 3) for n in range(3))
    jet = ((x + 2 * y) * z).exp() * (x * x + y * y + z * z) ** 0.75 * (x + y * 1j).log() / (1 + x * z)
    want = complex(sp.diff(expr, X, alpha[0], Y, alpha[1], Z, alpha[2]).subs({X: pt[0], Y: pt[1], Z: pt[2]}).evalf())
    assert jet.derivative(alpha)[0] == pytest.approx(want, rel=1e-12, abs=1e-12)


def test_vectorized_and_order_check():
    vals = np.linspace(0.5, 2.0, 5)
    x = Jet.variable(vals, 0, 1, 2)
    sq = x.sqrt()
    np.testing.assert_allclose(sq.derivative((1,)), 0.5 / np.sqrt(vals))
    np.testing.assert_allclose(sq.derivative((2,)), -0.25 * vals**-1.5)
    with pytest.raises(ValueError):
        sq.derivative((3,))


def test_real_imag_split():
    x = Jet.variable(np.array([0.4]), 0, 1, 2)
    w = (x * 1j).exp()
    assert w.real().derivative((1,))[0] == pytest.approx(-np.sin(0.4))
    assert w.imag().derivative((2,))[0] == pytest.approx(-np.sin(0.4))
