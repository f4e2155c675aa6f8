import json
import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from deformam.angmom import DeformationSpec, build_angular, build_ell2, ladder_spec, standard_angular
from deformam.opcalc import OperatorExpr, P
from deformam.spectral import (
    BasisOverflowError,
    LegendreBasis,
    QuadratureError,
    SeparableState,
    SingularPointError,
    alpha_apply,
    apply_operator_numeric,
    apply_operator_quaternion,
    assoc_legendre,
    assoc_legendre_all,
    beta_apply,
    ell2_separable,
    ell2_separable_values,
    eval_state,
    perturbed_f,
    solution_csv,
    solution_json,
    solve_perturbation,
)

LADDER = ladder_spec(DeformationSpec.diagonal().subs({"eps3": 0}))
RNG = np.random.default_rng(7)
POINTS = np.column_stack([RNG.uniform(0.5, 2.0, 8), RNG.uniform(0.3, 2.8, 8), RNG.uniform(0.0, 6.2, 8)])


# --- Legendre functions -------------------------------------------------------


def test_assoc_legendre_closed_forms():
    assert assoc_legendre(1, 0, 0.3) == pytest.approx(0.3)
    assert assoc_legendre(2, 0, 0.5) == pytest.approx(-0.125)
    assert assoc_legendre(1, 1, 0.0) == pytest.approx(-1.0)
    with pytest.raises(ValueError):
        assoc_legendre(1, 2, 0.1)


@pytest.mark.parametrize("l, m", [(0, 0), (3, 1), (4, -2), (6, 6), (7, -3)])
def test_assoc_legendre_matches_sympy(l, m):
    us = np.linspace(-0.95, 0.95, 7)
    want = [float(sp.assoc_legendre(l, m, sp.Float(v))) for v in us]
    np.testing.assert_allclose(assoc_legendre(l, m, us), want, rtol=1e-12, atol=1e-12)


def test_gram_is_diagonal():
    for m in range(0, 6):
        b = LegendreBasis(m, 12)
        g = b.gram()
        off = g - np.diag(np.diag(g))
        assert np.abs(off).max() <= 1e-12 * np.abs(np.diag(g)).max()
        np.testing.assert_allclose(np.diag(g), b.norms, rtol=1e-12)


def test_basis_rejects_small_degree():
    with pytest.raises(ValueError):
        LegendreBasis(3, 2)


# --- alpha and beta -----------------------------------------------------------


def test_alpha_examples():
    b = LegendreBasis(1, 4)
    assert np.array_equal(alpha_apply(b.unit(2), 1), 6 * b.unit(2))
    assert np.array_equal(alpha_apply(np.array([1.0]), 0), np.array([0.0]))


@given(st.lists(st.floats(-3, 3), min_size=5, max_size=5), st.lists(st.floats(-3, 3), min_size=5, max_size=5), st.floats(-2, 2))
def test_alpha_linear(f, g, c):
    f, g = np.array(f), np.array(g)
    np.testing.assert_allclose(alpha_apply(f + c * g, 2), alpha_apply(f, 2) + c * alpha_apply(g, 2), atol=1e-9)


def test_beta_examples():
    np.testing.assert_allclose(beta_apply([1.0], 0, 0), [0, 0, 0], atol=1e-15)
    got = beta_apply([0.0, 1.0], 0, 0)
    # exact oracle: 5 sin cos d/dtheta P1 = -5u + 5u^3
    want = [float(c) for c in oracles.legendre_expansion(-5 * oracles.u + 5 * oracles.u**3, 0, 3)]
    np.testing.assert_allclose(got, want, atol=1e-14)
    np.testing.assert_allclose(got, [0, -2, 0, 2], atol=1e-14)


def test_beta_overflow_reports_required_degree():
    with pytest.raises(BasisOverflowError) as info:
        beta_apply([0.0, 1.0], 0, 0, max_degree=2)
    assert info.value.required == 3


@settings(max_examples=25)
@given(
    st.lists(st.floats(-2, 2), min_size=4, max_size=4),
    st.lists(st.floats(-2, 2), min_size=4, max_size=4),
    st.floats(-1, 1),
    st.integers(0, 2),
)
def test_beta_linear(f, g, c, m):
    f, g = np.array(f), np.array(g)
    deg = abs(m) + 5
    lhs = beta_apply(f + c * g, 0.5, m, deg)
    rhs = beta_apply(f, 0.5, m, deg) + c * beta_apply(g, 0.5, m, deg)
    np.testing.assert_allclose(lhs, rhs, atol=1e-9)


# --- l^2 bracket on separable states ------------------------------------------


def test_ell2_undeformed_limit():
    for l, m in [(1, 0), (3, 2), (4, -1)]:
        st_ = SeparableState.legendre(l, m, k=0.5)
        got = ell2_separable(st_, hbar=2.0)
        want = np.zeros_like(got)
        want[l - abs(m)] = 4.0 * l * (l + 1)
        np.testing.assert_allclose(got.real, want, atol=1e-10)


def test_ell2_linear_in_f():
    a = SeparableState(0, 0, 1e-3, (1.0, 0.0, 2.0))
    b = SeparableState(0, 0, 1e-3, (0.0, 1.0, -1.0))
    ab = SeparableState(0, 0, 1e-3, (1.0, 1.0, 1.0))
    np.testing.assert_allclose(ell2_separable(ab), ell2_separable(a) + ell2_separable(b), atol=1e-12)


def test_ell2_overflow():
    with pytest.raises(BasisOverflowError):
        ell2_separable(SeparableState.legendre(2, 0, eps=0.1), max_degree=3)


def test_ell2_first_order_forms_against_cartesian_engine():
    l2 = build_ell2(LADDER)
    eps = 1e-3
    st_ = SeparableState.legendre(1, 0, eps=eps)
    exact = apply_operator_numeric(l2, st_, POINTS, {"eps": eps})
    for form in ("printed", "first_order"):
        approx = ell2_separable_values(st_, POINTS, form)
        assert np.abs(approx - exact).max() / np.abs(exact).max() < 1e-5 * 1e3  # O(eps) gap tolerated here
    first = ell2_separable_values(st_, POINTS, "first_order")
    assert np.abs(first - exact).max() / np.abs(exact).max() < 1e-5


# --- perturbation solver ------------------------------------------------------


def test_perturbation_trivial():
    sol = solve_perturbation(0, 0, 0)
    assert sol.kappa == 0
    assert all(c == 0 for c in sol.C.values())
    assert 0 not in sol.C


def test_perturbation_lambda1_against_exact_oracle():
    sol = solve_perturbation(1, 0, 0)
    kappa, C = oracles.perturbation(1, 0, 0, sol.max_degree)
    assert (kappa, C[3]) == (sp.Rational(-2, 5), sp.Rational(-1, 25))
    assert sol.kappa == pytest.approx(-0.4, abs=1e-10)
    assert sol.C[3] == pytest.approx(-0.04, abs=1e-10)
    for lp, c in C.items():
        assert sol.C[lp] == pytest.approx(float(c), abs=1e-10)
    assert 1 not in sol.C
    assert sol.residual_norm <= 1e-8


def test_perturbation_lambda2_m1_golden():
    sol = solve_perturbation(2, 1, 0, max_degree=8)
    kappa, C = oracles.perturbation(2, 1, 0, 8)
    assert kappa == sp.Rational(43, 7)
    assert (C[4], C[6], C[8]) == (sp.Rational(-33, 196), sp.Rational(-13, 252), sp.Rational(-17, 792))
    assert sol.kappa == pytest.approx(float(kappa), abs=1e-10)
    for lp, c in C.items():
        assert sol.C[lp] == pytest.approx(float(c), abs=1e-10)
    assert sol.residual_norm <= 1e-8


def test_perturbation_nonzero_k_matches_oracle():
    sol = solve_perturbation(3, 0, 2.0)
    kappa, C = oracles.perturbation(3, 0, 2, sol.max_degree)
    assert sol.kappa == pytest.approx(float(kappa), abs=1e-10)
    for lp, c in C.items():
        assert sol.C[lp] == pytest.approx(float(c), abs=1e-10)


def test_perturbation_preconditions():
    with pytest.raises(ValueError):
        solve_perturbation(1, 2, 0)
    with pytest.raises(ValueError):
        solve_perturbation(2, 0, 0, max_degree=4)


def test_perturbation_quadrature_too_coarse():
    with pytest.raises(QuadratureError):
        solve_perturbation(4, 0, 0, max_degree=8, nodes=4)


def test_residual_small_once_basis_large_enough():
    for lam, m in [(2, 0), (3, 1), (4, 2)]:
        assert solve_perturbation(lam, m, 0.5, lam + 3, 2 * (lam + 3)).residual_norm <= 1e-8


def test_export_formats():
    sol = solve_perturbation(1, 0, 0)
    lines = solution_csv(sol).splitlines()
    assert lines[0] == "lambda_prime,C"
    assert [int(l.split(",")[0]) for l in lines[1:]] == sorted(sol.C)
    data = json.loads(solution_json(sol))
    assert data["kappa"] == sol.kappa and data["basis"]["max_degree"] == sol.max_degree
    f = perturbed_f(sol, 0.1)
    assert f[1] == 1.0 and f[3] == pytest.approx(-0.004)


# --- states -------------------------------------------------------------------


def test_eval_state_examples():
    one = SeparableState.legendre(0, 0)
    np.testing.assert_allclose(eval_state(one, POINTS), 1.0)
    st_ = SeparableState.legendre(2, 1)
    shifted = POINTS + np.array([0, 0, 2 * math.pi])
    np.testing.assert_allclose(eval_state(st_, POINTS), eval_state(st_, shifted), rtol=1e-12)
    eps = 0.05
    de = SeparableState.legendre(1, 1, eps=eps)
    a = eval_state(de, [(1.0, 1.0, 0.0)])
    b = eval_state(de, [(1.0, 1.0, 2 * math.pi)])
    assert abs(b[0]) / abs(a[0]) == pytest.approx(math.exp(2 * math.pi * eps))
    assert de.phase_jump() == pytest.approx(math.exp(2 * math.pi * eps) - 1)


def test_pole_rejected_for_nonzero_m():
    with pytest.raises(SingularPointError):
        eval_state(SeparableState.legendre(1, 1), [(1.0, 0.0, 0.0)])
    eval_state(SeparableState.legendre(1, 0), [(1.0, 0.0, 0.0)])
    with pytest.raises(SingularPointError):
        apply_operator_numeric(P("Dx"), SeparableState.legendre(1, 0), [(1.0, 0.0, 0.0)])


def test_identity_operator_returns_state():
    st_ = SeparableState(1.5, 2, 0.1, (1.0, -0.5), envelope=1.2)
    np.testing.assert_allclose(apply_operator_numeric(OperatorExpr.identity(), st_, POINTS), eval_state(st_, POINTS))


def test_l3_eigenvalue_pointwise():
    l3 = build_angular(LADDER)[2]
    for m, eps in [(1, 0.01), (2, 0.3), (-1, 0.1)]:
        st_ = SeparableState.legendre(3, m, k=0.5, eps=eps)
        ratio = apply_operator_numeric(l3, st_, POINTS) / eval_state(st_, POINTS)
        np.testing.assert_allclose(ratio, m * (1 + eps**2), atol=1e-12)


def test_standard_l2_eigenvalue():
    l2 = build_ell2(DeformationSpec.zero())
    for l, m in [(1, 0), (3, -2), (4, 4)]:
        st_ = SeparableState.legendre(l, m, k=1.0)
        np.testing.assert_allclose(apply_operator_numeric(l2, st_, POINTS, {"hbar": 1.0}), l * (l + 1) * eval_state(st_, POINTS), rtol=1e-10)


def test_numeric_application_matches_sympy():
    eps, sigma = 0.2, 1.3
    psi = oracles.cartesian_state(2, 1, 1, sp.Rational(1, 5), sp.Rational(13, 10))
    op = P("(2 + i)*x*Dy*Dz - 3*z*z*Dx + i*eps")
    terms = [((2 + sp.I), (1, 0, 0), (0, 1, 1)), (-3, (0, 0, 2), (1, 0, 0)), (sp.I * sp.Rational(1, 5), (0, 0, 0), (0, 0, 0))]
    want_expr = oracles.apply_cartesian(terms, psi)
    st_ = SeparableState.legendre(2, 1, k=1, eps=eps, envelope=sigma)
    pts = POINTS[:3]
    got = apply_operator_numeric(op, st_, pts)
    r, th, ph = pts.T
    xyz = np.column_stack([r * np.sin(th) * np.cos(ph), r * np.sin(th) * np.sin(ph), r * np.cos(th)])
    for n, (x, y, z) in enumerate(xyz):
        want = complex(want_expr.subs({oracles.X: x, oracles.Y: y, oracles.Z: z}).evalf())
        # sympy's atan2 branch is (-pi, pi]; the state uses phi in [0, 2pi)
        if ph[n] > math.pi:
            want *= complex(sp.exp(2 * math.pi * 1 * (1j + eps)).evalf())
        assert got[n] == pytest.approx(want, rel=1e-10)


def test_quaternion_application_and_complex_guard():
    st_ = SeparableState.legendre(1, 1, envelope=1.0)
    a, b = apply_operator_quaternion(P("j"), st_, POINTS)
    np.testing.assert_allclose(a, 0)
    np.testing.assert_allclose(b, np.conj(eval_state(st_, POINTS)))
    with pytest.raises(ValueError):
        apply_operator_numeric(P("(1|j)"), st_, POINTS)
    np.testing.assert_allclose(
        apply_operator_numeric(P("(1|i)"), st_, POINTS), 1j * eval_state(st_, POINTS)
    )
