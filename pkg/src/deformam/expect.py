"""Real inner product and expectation values over spherical quadrature grids.

Quaternion values are complex pairs ``(a, b)`` meaning ``a + b j``; plain
complex arrays are accepted wherever a pair is.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

from .opcalc import OperatorExpr, commutator, compose, pretty
from .spectral import SeparableState, apply_operator_quaternion, qpair_mul

PHASE_NOTE = (
    "phi integrated over [0, 2pi) without periodicity; for m*eps != 0 the state jumps by "
    "a factor exp(2 pi m eps) across phi = 0"
)
ENVELOPE_NOTE = "Gaussian radial envelope exp(-r^2 / (2 sigma^2)) attached; values normalized by <psi, psi>"


class NonNormalizableError(ValueError):
    pass


def _pair(v):
    if isinstance(v, tuple):
        a, b = v
        return np.asarray(a, dtype=complex), np.asarray(b, dtype=complex)
    a = np.asarray(v, dtype=complex)
    return a, np.zeros_like(a)


def _qconj(p):
    a, b = p
    return np.conj(a), -b


def bracket_density(psi, phi) -> np.ndarray:
    """All four components ``(w, x, y, z)`` of ``(psi^+ phi + psi phi^+) / 2``.

    Only the scalar part is guaranteed real-valued; for genuinely quaternionic
    inputs the vector part need not vanish (``psi = i, phi = j`` gives ``-k``).
    """
    p, q = _pair(psi), _pair(phi)
    s1 = qpair_mul(_qconj(p), q)
    s2 = qpair_mul(p, _qconj(q))
    a = 0.5 * (s1[0] + s2[0])
    b = 0.5 * (s1[1] + s2[1])
    return np.stack([a.real, a.imag, b.real, b.imag], axis=-1)


def bracket(psi, phi) -> np.ndarray:
    """Scalar part of ``(psi^+ phi + psi phi^+) / 2``, the real inner-product density.

    Equals the Euclidean dot product of the four components, and
    ``Re(conj(psi) phi)`` for complex values.
    """
    p, q = _pair(psi), _pair(phi)
    return (np.conj(p[0]) * q[0]).real + (np.conj(p[1]) * q[1]).real


# ---------------------------------------------------------------------------
# grid


@dataclass(frozen=True)
class SphericalGrid:
    """Tensor Gauss-Legendre rule in ``r`` on ``[0, r_max]``, the polar angle and ``phi``.

    ``r_max`` is ``cutoff * sigma`` for the state's envelope; the squared
    envelope has decayed below ``exp(-cutoff^2)`` there.  The polar rule is
    Gauss-Legendre in ``theta`` with weight ``sin theta`` (``theta_rule="theta"``)
    or in ``u = cos theta`` (``"u"``).  The ``u`` rule is exact for polynomial
    integrands, but a deformed phase ``exp(m eps phi)`` is not smooth on the z
    axis and its derivatives leave ``(1 - u^2)^(-1/2)`` endpoint singularities
    that the ``theta`` rule integrates spectrally.
    """

    n_r: int = 40
    n_theta: int = 32
    n_phi: int = 32
    cutoff: float = 8.5
    theta_rule: str = "theta"

    def __post_init__(self):
        if self.theta_rule not in ("theta", "u"):
            raise ValueError("theta_rule must be 'theta' or 'u'")

    def coarsened(self) -> "SphericalGrid":
        shrink = lambda n: max(4, n * 3 // 4)
        return SphericalGrid(shrink(self.n_r), shrink(self.n_theta), shrink(self.n_phi), self.cutoff, self.theta_rule)

    @cached_property
    def _rules(self):
        return tuple(np.polynomial.legendre.leggauss(n) for n in (self.n_r, self.n_theta, self.n_phi))

    def points(self, sigma: float) -> tuple[np.ndarray, np.ndarray]:
        """``(points, weights)`` with points as ``(r, theta, phi)`` rows."""
        (xr, wr), (xu, wu), (xp, wp) = self._rules
        rmax = self.cutoff * sigma
        r = 0.5 * rmax * (xr + 1)
        wr = 0.5 * rmax * wr * r**2
        if self.theta_rule == "u":
            theta = np.arccos(xu)
        else:
            theta = 0.5 * np.pi * (xu + 1)
            wu = 0.5 * np.pi * wu * np.sin(theta)
        phi = np.pi * (xp + 1)
        wp = np.pi * wp
        R, T, F = np.meshgrid(r, theta, phi, indexing="ij")
        W = wr[:, None, None] * wu[None, :, None] * wp[None, None, :]
        pts = np.column_stack([R.ravel(), T.ravel(), F.ravel()])
        return pts, W.ravel()

    def describe(self) -> dict:
        return {
            "n_r": self.n_r,
            "n_theta": self.n_theta,
            "n_phi": self.n_phi,
            "r_max_over_sigma": self.cutoff,
            "theta_rule": self.theta_rule,
        }


# ---------------------------------------------------------------------------
# expectation


@dataclass(frozen=True)
class ExpectationResult:
    value: float
    operator_id: str
    state_id: str
    epsilon: float
    error_estimate: float
    norm: float
    metadata: dict = field(default_factory=dict)
    notes: tuple[str, ...] = ()

    def row(self) -> dict:
        return {
            "operator_id": self.operator_id,
            "state_id": self.state_id,
            "epsilon": self.epsilon,
            "value": self.value,
            "error_estimate": self.error_estimate,
        }


Action = Callable[[SeparableState, np.ndarray], object]


def _as_action(op, assignment) -> Action:
    if isinstance(op, OperatorExpr):
        return lambda st, pts: apply_operator_quaternion(op, st, pts, assignment)
    return op


def _operator_id(op) -> str:
    if isinstance(op, OperatorExpr):
        return pretty(op)
    return getattr(op, "__name__", repr(op))


def _integrals(op_action, vec_action, state, grid, sigma):
    pts, w = grid.points(sigma)
    vec = vec_action(state, pts)
    out = op_action(state, pts)
    num = float(np.sum(w * bracket(vec, out)))
    den = float(np.sum(w * bracket(vec, vec)))
    return num, den


def expectation(
    op,
    state: SeparableState,
    grid: SphericalGrid | None = None,
    assignment: dict | None = None,
    prepare: OperatorExpr | None = None,
    operator_id: str | None = None,
) -> ExpectationResult:
    """``<Phi, op Phi> / <Phi, Phi>`` with ``Phi = prepare(psi)`` (default ``psi``).

    ``op`` is an ``OperatorExpr`` or a callable ``(state, points) -> values``.
    With ``prepare`` the operator must be an ``OperatorExpr``; ``op(Phi)`` is
    then evaluated as the composed operator acting on ``psi``.
    """
    if state.envelope is None:
        raise NonNormalizableError(
            "r^k states are not square integrable on R^3; attach a radial envelope (sigma) first"
        )
    grid = grid or SphericalGrid(n_theta=max(32, state.max_degree + 24))
    assignment = dict(assignment or {})
    assignment.setdefault("hbar", 1.0)
    assignment.setdefault("eps", state.eps)
    if prepare is not None:
        if not isinstance(op, OperatorExpr):
            raise TypeError("prepare needs an OperatorExpr operator")
        op_action = _as_action(compose(op, prepare), assignment)
        vec_action = _as_action(prepare, assignment)
    else:
        op_action = _as_action(op, assignment)
        vec_action = lambda st, pts: apply_operator_quaternion(OperatorExpr.identity(), st, pts)

    num, den = _integrals(op_action, vec_action, state, grid, state.envelope)
    if not den > 0:
        raise NonNormalizableError("prepared vector has zero norm")
    value = num / den
    cnum, cden = _integrals(op_action, vec_action, state, grid.coarsened(), state.envelope)
    err = abs(cnum / cden - value) if cden > 0 else float("inf")

    notes = [ENVELOPE_NOTE]
    if state.m and state.eps:
        notes.append(PHASE_NOTE + f" (|jump| = {abs(state.phase_jump()):.6g})")
    meta = {"grid": grid.describe(), "sigma": state.envelope, "assignment": dict(sorted(assignment.items()))}
    if prepare is not None:
        meta["prepared_by"] = pretty(prepare)
    return ExpectationResult(
        value=value,
        operator_id=operator_id or _operator_id(op),
        state_id=state.state_id,
        epsilon=float(state.eps),
        error_estimate=err,
        norm=den,
        metadata=meta,
        notes=tuple(notes),
    )


# ---------------------------------------------------------------------------
# scans


@dataclass(frozen=True)
class ScalingReport:
    operator_id: str
    epsilons: tuple[float, ...]
    values: tuple[float, ...]
    error_estimates: tuple[float, ...]
    exponent: float | None
    target: tuple[float, float] = (1.8, 2.2)
    flags: tuple[str, ...] = ()

    @property
    def within_target(self) -> bool:
        return self.exponent is not None and self.target[0] <= self.exponent <= self.target[1]

    def rows(self, state_id: str = "") -> list[dict]:
        return [
            {"operator_id": self.operator_id, "state_id": state_id, "epsilon": e, "value": v, "error_estimate": d}
            for e, v, d in zip(self.epsilons, self.values, self.error_estimates)
        ]


def fit_exponent(epsilons: Sequence[float], values: Sequence[float]) -> float | None:
    """Slope of ``log|value|`` against ``log eps`` (``None`` if fewer than two nonzero points)."""
    pairs = [(e, abs(v)) for e, v in zip(epsilons, values) if e > 0 and v != 0]
    if len(pairs) < 2:
        return None
    x = np.log([p[0] for p in pairs])
    y = np.log([p[1] for p in pairs])
    return float(np.polyfit(x, y, 1)[0])


def commutator_expectation_scan(
    a: OperatorExpr,
    b: OperatorExpr,
    state: SeparableState,
    epsilons: Sequence[float],
    grid: SphericalGrid | None = None,
    hbar: float = 1.0,
    rel_tol: float = 1e-6,
) -> ScalingReport:
    """``<[a, b]>`` on ``state`` for each eps; ``a`` and ``b`` may contain the symbol ``eps``.

    The state's own eps follows the scan.  Points whose quadrature error
    estimate exceeds ``rel_tol`` times the value are flagged.
    """
    eps_list = [float(e) for e in epsilons]
    positive = [e for e in eps_list if e > 0]
    if any(x <= y for x, y in zip(positive, positive[1:])):
        raise ValueError("eps values must be decreasing")
    comm = commutator(a, b)
    op_id = f"[{pretty(a)}, {pretty(b)}]"
    values, errs, flags = [], [], []
    for e in eps_list:
        st = state.with_(eps=e)
        res = expectation(comm, st, grid, {"hbar": hbar, "eps": e}, operator_id=op_id)
        values.append(res.value)
        errs.append(res.error_estimate)
        if res.error_estimate > rel_tol * max(abs(res.value), 1e-300) and res.value != 0:
            flags.append(f"eps={e}: quadrature error {res.error_estimate:.3e} vs value {res.value:.3e}")
    return ScalingReport(
        operator_id=op_id,
        epsilons=tuple(eps_list),
        values=tuple(values),
        error_estimates=tuple(errs),
        exponent=fit_exponent(eps_list, values),
        flags=tuple(flags),
    )


def rows_json(rows: Sequence[dict]) -> str:
    return json.dumps(list(rows), indent=2, sort_keys=True) + "\n"
