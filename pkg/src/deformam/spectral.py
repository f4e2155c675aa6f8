"""Associated Legendre machinery and the first-order perturbation solver.

Functions of the polar angle are represented by coefficient vectors over
``P_l^m(cos theta)`` for ``l = |m| .. max_degree`` (Condon-Shortley phase).
Inner products are ``int_{-1}^{1} f g du`` with ``u = cos theta``, evaluated by
Gauss-Legendre quadrature.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .jets import Jet
from .opcalc import OperatorExpr

DEFAULT_TOL = 1e-8


class BasisOverflowError(ValueError):
    def __init__(self, required: int, available: int):
        super().__init__(f"result needs degree {required} but the basis stops at {available}; raise max_degree")
        self.required = required
        self.available = available


class QuadratureError(RuntimeError):
    pass


class SingularPointError(ValueError):
    pass


# ---------------------------------------------------------------------------
# associated Legendre functions


def _legendre_table(lmax: int, m: int, u, s):
    """``[P_|m|^m, ..., P_lmax^m]`` by upward recurrence in the degree.

    ``u`` and ``s = sqrt(1 - u^2)`` may be arrays or jets.  ``m >= 0`` here.
    """
    pmm = s ** m if isinstance(s, Jet) else np.power(s, m)
    pmm = pmm * ((-1) ** m * _double_factorial(2 * m - 1))
    out = [pmm]
    if lmax == m:
        return out
    out.append(u * pmm * (2 * m + 1))
    for l in range(m + 2, lmax + 1):
        out.append((u * out[-1] * (2 * l - 1) - out[-2] * (l + m - 1)) * (1.0 / (l - m)))
    return out


def _double_factorial(n: int) -> int:
    return math.prod(range(n, 0, -2)) if n > 0 else 1


def _negative_m_factor(l: int, m: int) -> float:
    # P_l^{-m} = (-1)^m (l-m)!/(l+m)! P_l^m
    return (-1) ** m * math.factorial(l - m) / math.factorial(l + m)


def assoc_legendre(l: int, m: int, u):
    """``P_l^m(u)`` with the Condon-Shortley phase."""
    if l < abs(m):
        raise ValueError(f"degree {l} below order |m| = {abs(m)}")
    u = np.asarray(u, dtype=float)
    am = abs(m)
    val = _legendre_table(l, am, u, np.sqrt(np.clip(1 - u * u, 0, None)))[-1]
    if m < 0:
        val = val * _negative_m_factor(l, am)
    return val


def assoc_legendre_all(lmax: int, m: int, u) -> np.ndarray:
    """Rows ``P_l^m(u)`` for ``l = |m| .. lmax``."""
    am = abs(m)
    if lmax < am:
        raise ValueError(f"degree {lmax} below order |m| = {am}")
    u = np.asarray(u, dtype=float)
    rows = _legendre_table(lmax, am, u, np.sqrt(np.clip(1 - u * u, 0, None)))
    if m < 0:
        rows = [r * _negative_m_factor(am + n, am) for n, r in enumerate(rows)]
    return np.array(rows)


def assoc_legendre_du_times(lmax: int, m: int, u) -> np.ndarray:
    """Rows ``(1 - u^2) dP_l^m/du`` from ``(l+m) P_{l-1}^m - l u P_l^m``."""
    am = abs(m)
    p = assoc_legendre_all(lmax, m, u)
    out = np.empty_like(p)
    for n in range(p.shape[0]):
        l = am + n
        prev = p[n - 1] if n > 0 else 0.0
        out[n] = (l + m) * prev - l * u * p[n]
    return out


def legendre_norm(l: int, m: int) -> float:
    """``int P_l^m(u)^2 du``."""
    am = abs(m)
    val = 2.0 / (2 * l + 1) * math.factorial(l + am) / math.factorial(l - am)
    if m < 0:
        val *= _negative_m_factor(l, am) ** 2
    return val


# ---------------------------------------------------------------------------
# basis


@dataclass(frozen=True)
class LegendreBasis:
    """``P_l^m`` for ``l = |m| .. max_degree`` with a Gauss-Legendre rule in ``u``."""

    m: int
    max_degree: int
    nodes: int | None = None

    def __post_init__(self):
        if self.max_degree < abs(self.m):
            raise ValueError("max_degree must be at least |m|")
        if self.nodes is None:
            object.__setattr__(self, "nodes", 2 * self.max_degree + 8)

    @property
    def degrees(self) -> np.ndarray:
        return np.arange(abs(self.m), self.max_degree + 1)

    @property
    def size(self) -> int:
        return self.max_degree - abs(self.m) + 1

    @cached_property
    def rule(self) -> tuple[np.ndarray, np.ndarray]:
        return np.polynomial.legendre.leggauss(self.nodes)

    @property
    def u(self) -> np.ndarray:
        return self.rule[0]

    @property
    def weights(self) -> np.ndarray:
        return self.rule[1]

    @cached_property
    def values(self) -> np.ndarray:
        return assoc_legendre_all(self.max_degree, self.m, self.u)

    @cached_property
    def norms(self) -> np.ndarray:
        return np.array([legendre_norm(int(l), self.m) for l in self.degrees])

    def gram(self) -> np.ndarray:
        v = self.values
        return (v * self.weights) @ v.T

    def project(self, samples: np.ndarray) -> np.ndarray:
        """Coefficients of the orthogonal projection of sampled values onto the basis."""
        return (self.values * self.weights) @ samples / self.norms

    def synthesize(self, coeffs: np.ndarray) -> np.ndarray:
        return np.asarray(coeffs) @ self.values

    def index(self, degree: int) -> int:
        if not abs(self.m) <= degree <= self.max_degree:
            raise ValueError(f"degree {degree} outside basis [{abs(self.m)}, {self.max_degree}]")
        return degree - abs(self.m)

    def unit(self, degree: int) -> np.ndarray:
        out = np.zeros(self.size)
        out[self.index(degree)] = 1.0
        return out

    def extended(self, max_degree: int) -> "LegendreBasis":
        return LegendreBasis(self.m, max_degree, max(self.nodes, 2 * max_degree + 8))


def _degree_of(f: np.ndarray, m: int) -> int:
    nz = np.flatnonzero(np.abs(f) > 0)
    return abs(m) + (int(nz[-1]) if nz.size else 0)


# ---------------------------------------------------------------------------
# angular operators


def alpha_apply(f, m: int) -> np.ndarray:
    """``-f'' - cot f' + m^2 f / sin^2``: diagonal, eigenvalue ``l(l+1)``."""
    f = np.asarray(f)
    l = np.arange(abs(m), abs(m) + f.shape[-1])
    return f * (l * (l + 1))


def _beta_samples(f_vals, du_vals, u, k: float, m: int) -> np.ndarray:
    """Pointwise ``beta f``.

    beta = (2k+5) sin cos d/dtheta + k (1 - 3 cos^2) + m (2 cot^2 - 1) - 2 m^2
    with ``sin cos d/dtheta f = -u (1-u^2) df/du``.
    """
    one_mu2 = 1 - u * u
    out = -(2 * k + 5) * u * du_vals + (k * (1 - 3 * u * u) - m - 2 * m * m) * f_vals
    if m:
        out = out + 2 * m * (u * u / one_mu2) * f_vals
    return out


def _samples(f, basis: LegendreBasis, u=None):
    u = basis.u if u is None else u
    lmax = abs(basis.m) + len(f) - 1
    vals = assoc_legendre_all(lmax, basis.m, u)
    dvals = assoc_legendre_du_times(lmax, basis.m, u)
    return np.asarray(f) @ vals, np.asarray(f) @ dvals


def beta_apply(f, k: float, m: int, max_degree: int | None = None, nodes: int | None = None) -> np.ndarray:
    """Coefficients of ``beta f`` projected on ``P_l^m``, ``l <= max_degree``.

    For ``m = 0`` the image of degree ``d`` lies within degree ``d + 2`` and a
    smaller ``max_degree`` that would drop content raises
    ``BasisOverflowError``.  For ``m != 0`` the ``cot^2`` piece has an infinite
    expansion and the result is its orthogonal projection.
    """
    f = np.asarray(f, dtype=float)
    d = _degree_of(f, m)
    required = d + 2
    if max_degree is None:
        max_degree = max(required, abs(m) + len(f) - 1)
    if m == 0 and max_degree < required:
        out = beta_apply(f, k, m, required, nodes)
        if np.any(np.abs(out[max_degree - abs(m) + 1 :]) > 1e-13 * max(1.0, np.abs(out).max())):
            raise BasisOverflowError(required, max_degree)
        return out[: max_degree - abs(m) + 1]
    basis = LegendreBasis(m, max_degree, nodes or 2 * max_degree + 8)
    fv, dv = _samples(f, basis)
    return basis.project(_beta_samples(fv, dv, basis.u, k, m))


def beta_matrix(basis: LegendreBasis, k: float) -> np.ndarray:
    """``B[i, j] = <P_i, beta P_j> / <P_i, P_i>`` over the basis."""
    m = basis.m
    vals = basis.values
    dvals = assoc_legendre_du_times(basis.max_degree, m, basis.u)
    cols = _beta_samples(vals, dvals, basis.u, k, m)
    return (vals * basis.weights) @ cols.T / basis.norms[:, None]


def sin2_matrix(basis: LegendreBasis) -> np.ndarray:
    vals = basis.values
    return (vals * basis.weights * (1 - basis.u**2)) @ vals.T / basis.norms[:, None]


# ---------------------------------------------------------------------------
# states


@dataclass(frozen=True)
class SeparableState:
    """``r^k exp(m (i + eps) phi) f(theta)``, optionally times ``exp(-r^2 / (2 sigma^2))``.

    ``coeffs[n]`` multiplies ``P_{|m|+n}^m``.
    """

    k: float
    m: int
    eps: float
    coeffs: tuple[float, ...]
    envelope: float | None = None
    label: str = ""

    @classmethod
    def legendre(cls, l: int, m: int, k: float = 0.0, eps: float = 0.0, envelope=None) -> "SeparableState":
        if l < abs(m):
            raise ValueError(f"degree {l} below order |m| = {abs(m)}")
        coeffs = [0.0] * (l - abs(m) + 1)
        coeffs[-1] = 1.0
        return cls(k, m, eps, tuple(coeffs), envelope, f"P{l}^{m},k={k},eps={eps}")

    def with_(self, **changes) -> "SeparableState":
        data = dict(k=self.k, m=self.m, eps=self.eps, coeffs=self.coeffs, envelope=self.envelope, label=self.label)
        data.update(changes)
        return SeparableState(**data)

    @property
    def max_degree(self) -> int:
        return abs(self.m) + len(self.coeffs) - 1

    @property
    def state_id(self) -> str:
        if self.label:
            base = self.label
        else:
            base = f"k={self.k},m={self.m},eps={self.eps},f={list(self.coeffs)}"
        return base if self.envelope is None else f"{base},sigma={self.envelope}"

    def phase_jump(self) -> float:
        """``|psi(phi=2pi)| / |psi(phi=0)| - 1``: the phase is not single valued for eps != 0."""
        return math.exp(2 * math.pi * self.m * self.eps) - 1


def _check_points(points) -> np.ndarray:
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[-1] != 3:
        raise ValueError("points must be (r, theta, phi) triples")
    return pts


def eval_state(state: SeparableState, points) -> np.ndarray:
    """Complex values of the state at spherical points ``(r, theta, phi)``."""
    pts = _check_points(points)
    r, th, ph = pts.T
    if np.any(r <= 0):
        raise SingularPointError("r must be positive")
    if state.m and np.any((np.sin(th) == 0)):
        raise SingularPointError("theta at a pole with m != 0")
    f = np.asarray(state.coeffs) @ assoc_legendre_all(state.max_degree, state.m, np.cos(th))
    out = r**state.k * np.exp(state.m * (1j + state.eps) * ph) * f
    if state.envelope is not None:
        out = out * np.exp(-(r**2) / (2 * state.envelope**2))
    return out


def to_cartesian(points) -> np.ndarray:
    r, th, ph = _check_points(points).T
    return np.stack([r * np.sin(th) * np.cos(ph), r * np.sin(th) * np.sin(ph), r * np.cos(th)], axis=-1)


def state_jet(state: SeparableState, points, order: int) -> Jet:
    """Taylor jet of the state in Cartesian coordinates around each point."""
    pts = _check_points(points)
    r0, th0, ph0 = pts.T
    if np.any(r0 <= 0):
        raise SingularPointError("r must be positive")
    if np.any(np.sin(th0) <= 0) or np.any(np.sin(th0) ** 2 < 1e-14):
        raise SingularPointError("points on the z axis are coordinate singularities")
    xyz = to_cartesian(pts)
    x, y, z = (Jet.variable(xyz[:, n], n, 3, order) for n in range(3))
    r2 = x * x + y * y + z * z
    rinv = r2 ** -0.5
    u = z * rinv
    rho2 = x * x + y * y
    s = (rho2 * rinv * rinv) ** 0.5
    w = x + y * 1j
    lw = w.log()
    phi = lw.imag()
    phi.coef[0] = ph0
    rows = _legendre_table(state.max_degree, abs(state.m), u, s)
    if state.m < 0:
        rows = [row * _negative_m_factor(abs(state.m) + n, abs(state.m)) for n, row in enumerate(rows)]
    f = rows[0] * state.coeffs[0]
    for c, row in zip(state.coeffs[1:], rows[1:]):
        if c:
            f = f + row * c
    out = (phi * (state.m * (1j + state.eps))).exp() * f
    if state.k:
        out = out * r2 ** (state.k / 2)
    if state.envelope is not None:
        out = out * (r2 * (-0.5 / state.envelope**2)).exp()
    return out


# --- numeric quaternions as pairs (a, b) meaning a + b j, a, b complex ---------

_UNIT_PAIRS = ((1.0, 0.0), (1j, 0.0), (0.0, 1.0), (0.0, 1j))


def qpair_mul(p, q):
    a, b = p
    c, d = q
    return (a * c - b * np.conj(d), a * d + b * np.conj(c))


def qpair_from_components(w, x, y, z):
    return (w + 1j * x, y + 1j * z)


def qpair_to_components(p) -> np.ndarray:
    a, b = p
    return np.stack([np.real(a), np.imag(a), np.real(b), np.imag(b)], axis=-1)


def apply_operator_quaternion(expr: OperatorExpr, state: SeparableState, points, assignment=None):
    """``expr(psi)`` at the points as a quaternion pair ``(a, b)`` = ``a + b j``."""
    assignment = dict(assignment or {})
    assignment.setdefault("hbar", 1.0)
    assignment.setdefault("eps", state.eps)
    pts = _check_points(points)
    jet = state_jet(state, pts, max(expr.max_order(), 0))
    xyz = to_cartesian(pts)
    n = len(pts)
    a = np.zeros(n, dtype=complex)
    b = np.zeros(n, dtype=complex)
    for (mono, deriv, runit), q in sorted(expr.items()):
        coeff = qpair_from_components(*q.evaluate(assignment))
        base = jet.derivative(deriv) * np.prod([xyz[:, i] ** mono[i] for i in range(3)], axis=0)
        val = qpair_mul(coeff, (base, np.zeros(n, dtype=complex)))
        if runit:
            val = qpair_mul(val, _UNIT_PAIRS[runit])
        a += val[0]
        b += val[1]
    return a, b


def apply_operator_numeric(expr: OperatorExpr, state: SeparableState, points, assignment=None) -> np.ndarray:
    """Complex values of ``expr(psi)``; derivatives are exact (Taylor jets).

    ``assignment`` maps symbols to numbers; ``hbar`` defaults to 1 and ``eps``
    to ``state.eps``.  Raises ``ValueError`` if the result leaves the complex
    plane (use ``apply_operator_quaternion`` then).
    """
    a, b = apply_operator_quaternion(expr, state, points, assignment)
    scale = max(1.0, float(np.abs(a).max(initial=0.0)))
    if np.any(np.abs(b) > 1e-12 * scale):
        raise ValueError("operator maps the state out of the complex numbers")
    return a


# ---------------------------------------------------------------------------
# l^2 on separable states


ELL2_FORMS = ("printed", "first_order")


def _angular_samples(state: SeparableState, u):
    lmax = state.max_degree
    c = np.asarray(state.coeffs)
    vals = assoc_legendre_all(lmax, state.m, u)
    dvals = assoc_legendre_du_times(lmax, state.m, u)
    l = np.arange(abs(state.m), lmax + 1)
    return c @ vals, c @ dvals, (c * l * (l + 1)) @ vals


def ell2_bracket_samples(state: SeparableState, u, form: str = "printed", hbar: float = 1.0) -> np.ndarray:
    """Pointwise ``hbar^2 [...] f`` at ``u = cos theta``.

    printed:      (1 + 2 eps sin^2) alpha + eps beta
    first_order:  (1 + 2 i eps sin^2) alpha + i eps beta1,
                  beta1 = (2k - 1) sin cos d/dtheta + k (3 cos^2 - 1) - 2 m^2 / sin^2
    """
    if form not in ELL2_FORMS:
        raise ValueError(f"unknown form {form!r}")
    u = np.asarray(u, dtype=float)
    fv, dv, av = _angular_samples(state, u)
    sin2 = 1 - u * u
    k, m, eps = state.k, state.m, state.eps
    if form == "printed":
        return hbar**2 * ((1 + 2 * eps * sin2) * av + eps * _beta_samples(fv, dv, u, k, m))
    beta1 = -(2 * k - 1) * u * dv + (k * (3 * u * u - 1) - 2 * m * m / sin2) * fv
    return hbar**2 * ((1 + 2j * eps * sin2) * av + 1j * eps * beta1)


def ell2_separable(state: SeparableState, max_degree: int | None = None, form: str = "printed", hbar: float = 1.0):
    """Coefficient vector of the bracketed ``l^2`` action on ``f``.

    Multiplications by ``sin^2`` and ``cot^2`` are projected on the basis by
    quadrature, so for ``m != 0`` the result is a truncated projection.
    """
    d = state.max_degree + 2
    max_degree = d if max_degree is None else max_degree
    if state.m == 0 and max_degree < d:
        full = ell2_separable(state, d, form, hbar)
        if np.any(np.abs(full[max_degree + 1 :]) > 1e-13 * max(1.0, np.abs(full).max())):
            raise BasisOverflowError(d, max_degree)
        return full[: max_degree + 1]
    basis = LegendreBasis(state.m, max_degree)
    return basis.project(ell2_bracket_samples(state, basis.u, form, hbar))


def ell2_separable_values(state: SeparableState, points, form: str = "printed", hbar: float = 1.0) -> np.ndarray:
    """``hbar^2 r^k e^{m(i+eps)phi} [...] f`` (envelope included) at spherical points."""
    pts = _check_points(points)
    r, th, ph = pts.T
    base = r**state.k * np.exp(state.m * (1j + state.eps) * ph)
    if state.envelope is not None:
        base = base * np.exp(-(r**2) / (2 * state.envelope**2))
    return base * ell2_bracket_samples(state, np.cos(th), form, hbar)


# ---------------------------------------------------------------------------
# perturbation solver


@dataclass(frozen=True)
class PerturbationSolution:
    """First-order correction ``Q = sum_l' C[l'] P_l'^m`` and eigenvalue shift ``kappa``."""

    degree: int
    m: int
    k: float
    kappa: float
    C: dict[int, float]
    residual_norm: float
    max_degree: int
    nodes: int
    check_nodes: int
    notes: tuple[str, ...] = field(default=())

    def metadata(self) -> dict:
        return {
            "lambda": self.degree,
            "m": self.m,
            "k": self.k,
            "max_degree": self.max_degree,
            "nodes": self.nodes,
            "check_nodes": self.check_nodes,
            "basis": "associated Legendre P_l^m(cos theta), Condon-Shortley phase, unnormalized",
        }


def _rhs_operator_column(basis: LegendreBasis, degree: int, k: float) -> np.ndarray:
    """``<P_i, (2 l(l+1) sin^2 + beta) P_degree> / <P_i, P_i>`` for all basis rows."""
    j = basis.index(degree)
    ll = degree * (degree + 1)
    return 2 * ll * sin2_matrix(basis)[:, j] + beta_matrix(basis, k)[:, j]


def solve_perturbation(
    degree: int,
    m: int,
    k: float = 0.0,
    max_degree: int | None = None,
    nodes: int | None = None,
    tol: float = DEFAULT_TOL,
) -> PerturbationSolution:
    """Solve ``[alpha - l(l+1)] Q = [kappa - 2 l(l+1) sin^2 - beta] P_l^m`` to first order.

    ``kappa`` comes from the row ``l' = l``; the other rows give
    ``C[l'] = <P_l', rhs> / ((l'(l'+1) - l(l+1)) <P_l', P_l'>)``.  The
    residual is the projected defect evaluated with an independent, denser
    quadrature.
    """
    if degree < abs(m):
        raise ValueError(f"lambda = {degree} is below |m| = {abs(m)}")
    if max_degree is None:
        max_degree = degree + 4
    if max_degree < degree + 3:
        raise ValueError(f"max_degree must be at least lambda + 3 = {degree + 3}")
    nodes = nodes or 2 * max_degree + 8
    basis = LegendreBasis(m, max_degree, nodes)
    col = _rhs_operator_column(basis, degree, k)
    # both operator pieces preserve parity in u, so odd steps must vanish
    odd = (basis.degrees - degree) % 2 == 1
    if m == 0:
        # and without the cot^2 piece they couple only |l' - l| <= 2
        odd = odd | (np.abs(basis.degrees - degree) > 2)
    scale = max(1.0, float(np.abs(col).max()))
    leak = float(np.abs(col[odd]).max(initial=0.0))
    if leak > 1e-12 * scale:
        raise QuadratureError(f"forbidden coupling {leak:.3e}; the basis convention is inconsistent")
    col = np.where(odd, 0.0, col)
    j = basis.index(degree)
    kappa = float(col[j])
    ll = degree * (degree + 1)
    C = {}
    q = np.zeros(basis.size)
    for i, lp in enumerate(basis.degrees):
        lp = int(lp)
        if lp == degree:
            continue
        c = -col[i] / (lp * (lp + 1) - ll)
        C[lp] = float(c) + 0.0
        q[i] = c

    check_nodes = 2 * nodes + 16
    dense = LegendreBasis(m, max_degree, check_nodes)
    dcol = _rhs_operator_column(dense, degree, k)
    rhs = kappa * dense.unit(degree) - dcol
    lhs = (alpha_apply(q, m) - ll * q)
    defect = (lhs - rhs) * np.sqrt(dense.norms)
    residual = float(np.linalg.norm(defect))
    if residual > tol:
        raise QuadratureError(
            f"projected residual {residual:.3e} exceeds {tol:.1e}; raise max_degree or nodes"
        )
    notes = ()
    if m:
        notes = ("m != 0: the cot^2 term has an infinite Legendre tail; C is truncated at max_degree",)
    return PerturbationSolution(degree, m, k, kappa, C, residual, max_degree, nodes, check_nodes, notes)


def perturbed_f(solution: PerturbationSolution, eps: float) -> np.ndarray:
    """Coefficients of ``P_l^m + eps Q`` over ``l' = |m| .. max_degree``."""
    basis = LegendreBasis(solution.m, solution.max_degree)
    out = basis.unit(solution.degree)
    for lp, c in solution.C.items():
        out[basis.index(lp)] += eps * c
    return out


# ---------------------------------------------------------------------------
# export


def solution_csv(solution: PerturbationSolution) -> str:
    """Rows ``lambda_prime,C`` in increasing degree."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["lambda_prime", "C"])
    for lp in sorted(solution.C):
        w.writerow([lp, repr(solution.C[lp])])
    return buf.getvalue()


def solution_dict(solution: PerturbationSolution) -> dict:
    return {
        "kappa": solution.kappa,
        "residual_norm": solution.residual_norm,
        "C": {str(lp): solution.C[lp] for lp in sorted(solution.C)},
        "basis": solution.metadata(),
        "notes": list(solution.notes),
    }


def solution_json(solution: PerturbationSolution) -> str:
    return json.dumps(solution_dict(solution), indent=2, sort_keys=True) + "\n"
