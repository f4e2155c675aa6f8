"""Deformed angular-momentum operators and the registry of algebra identities.

Positions are ``z = r + i s`` (complex flavor) or ``q = z + w j`` (quaternionic
flavors), momenta are ``-i hbar grad`` (complex / left) or ``-hbar grad(.) i``
(right), and angular momenta are the cross products of the two.  Every
identity is checked by building both sides independently with the operator
engine and comparing canonical forms.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

from .opcalc import (
    OperatorExpr,
    ParseError,
    anticommutator,
    apply_to_function,
    commutator,
    compose,
    parse_expr,
    pretty,
    sum_exprs,
)
from .qalg import Q_I, Q_J, QuatScalar, SymScalar, sym

FLAVORS = ("complex", "quat_left", "quat_right")
CYCLIC = ((0, 1, 2), (1, 2, 0), (2, 0, 1))
DEFORMATION_SYMBOLS = ("eps", "eps1", "eps2", "eps3", "dx", "dy", "dz")

HBAR = OperatorExpr.scalar(sym("hbar"))
I_OP = OperatorExpr.scalar(Q_I)
J_OP = OperatorExpr.scalar(Q_J)
X = tuple(OperatorExpr.coordinate(n) for n in range(3))
D = tuple(OperatorExpr.derivative(n) for n in range(3))


class SpecError(ValueError):
    """Invalid or incompatible deformation spec."""


class UnknownIdentityError(KeyError):
    pass


def levi(a: int, b: int, c: int) -> int:
    return (a - b) * (b - c) * (c - a) // 2


def _s(*items) -> OperatorExpr:
    """Scalar operator from a product of symbols / quaternion constants."""
    q = QuatScalar(1)
    for it in items:
        q = q * (QuatScalar(sym(it)) if isinstance(it, str) else QuatScalar.coerce(it))
    return OperatorExpr.scalar(q)


# ---------------------------------------------------------------------------
# specs


def _parse_triple(text: str | Sequence[str]) -> tuple[OperatorExpr, ...]:
    parts = [p.strip() for p in text.split(",")] if isinstance(text, str) else list(text)
    if len(parts) != 3:
        raise SpecError(f"expected three comma-separated components, got {len(parts)}")
    return tuple(parse_expr(p) for p in parts)


@dataclass(frozen=True)
class DeformationSpec:
    """Deformation data: real ``s`` and complex ``w`` polynomial vector fields."""

    flavor: str = "complex"
    s: tuple[OperatorExpr, OperatorExpr, OperatorExpr] = field(
        default_factory=lambda: (OperatorExpr(),) * 3
    )
    w: tuple[OperatorExpr, OperatorExpr, OperatorExpr] = field(
        default_factory=lambda: (OperatorExpr(),) * 3
    )

    def __post_init__(self):
        if self.flavor not in FLAVORS:
            raise SpecError(f"unknown flavor {self.flavor!r}; expected one of {FLAVORS}")
        if len(self.s) != 3 or len(self.w) != 3:
            raise SpecError("s and w need three components")
        for n, comp in enumerate(self.s):
            if not comp.is_multiplication():
                raise SpecError(f"s[{n}] is not a polynomial function: {pretty(comp)}")
            if not all(q.is_real() for _, q in comp.items()):
                raise SpecError(f"s[{n}] must be real: {pretty(comp)}")
        for n, comp in enumerate(self.w):
            if not comp.is_multiplication():
                raise SpecError(f"w[{n}] is not a polynomial function: {pretty(comp)}")
            if not all(q.is_complex() for _, q in comp.items()):
                raise SpecError(f"w[{n}] must be complex: {pretty(comp)}")

    @classmethod
    def from_strings(cls, flavor: str = "complex", s="0,0,0", w="0,0,0") -> "DeformationSpec":
        try:
            return cls(flavor, _parse_triple(s), _parse_triple(w))
        except ParseError as exc:
            raise SpecError(f"cannot parse deformation: {exc}") from exc

    @classmethod
    def diagonal(cls, flavor: str = "complex", w="0,0,0") -> "DeformationSpec":
        return cls.from_strings(flavor, "eps1*x, eps2*y, eps3*z", w)

    @classmethod
    def zero(cls, flavor: str = "complex") -> "DeformationSpec":
        return cls(flavor)

    def with_(self, **changes) -> "DeformationSpec":
        data = {"flavor": self.flavor, "s": self.s, "w": self.w}
        data.update(changes)
        return DeformationSpec(**data)

    def subs(self, mapping) -> "DeformationSpec":
        return self.with_(
            s=tuple(c.subs(mapping) for c in self.s),
            w=tuple(c.subs(mapping) for c in self.w),
        )

    def undeformed(self) -> "DeformationSpec":
        return self.subs({name: 0 for name in DEFORMATION_SYMBOLS})

    def describe(self) -> dict:
        return {
            "flavor": self.flavor,
            "s": [pretty(c) for c in self.s],
            "w": [pretty(c) for c in self.w],
        }


def diagonal_coefficients(spec: DeformationSpec) -> tuple[SymScalar, SymScalar, SymScalar] | None:
    """``(c1, c2, c3)`` if ``s = (c1 x, c2 y, c3 z)``, else ``None``."""
    out = []
    for n, comp in enumerate(spec.s):
        mono = tuple(1 if m == n else 0 for m in range(3))
        c = SymScalar()
        for (m, _, _), q in comp.items():
            if m != mono:
                return None
            c = q.w
        out.append(c)
    return tuple(out)


def ladder_spec(spec: DeformationSpec, allow_eps3: bool = False) -> DeformationSpec:
    """Specialize a diagonal spec to ``eps1 = eps2 = eps``.

    Raises ``SpecError`` unless ``s = (e x, e y, e3 z)``; ``e3`` must vanish
    unless ``allow_eps3``.
    """
    out = spec.subs({"eps1": sym("eps"), "eps2": sym("eps")})
    coeffs = diagonal_coefficients(out)
    if coeffs is None:
        raise SpecError("ladder operators need a diagonal s = (e x, e y, e3 z)")
    if coeffs[0] != coeffs[1]:
        raise SpecError("ladder operators need equal x and y deformations")
    if coeffs[2] and not allow_eps3:
        raise SpecError("ladder operators need a vanishing z deformation")
    return out


# ---------------------------------------------------------------------------
# builders


def build_position(spec: DeformationSpec) -> tuple[OperatorExpr, ...]:
    """``z_a = x_a + i s_a``; quaternionic flavors add ``w_a j``."""
    out = []
    for n in range(3):
        z = X[n] + compose(I_OP, spec.s[n])
        if spec.flavor != "complex":
            z = z + compose(spec.w[n], J_OP)
        out.append(z)
    return tuple(out)


def build_momentum(flavor: str = "complex") -> tuple[OperatorExpr, ...]:
    if flavor not in FLAVORS:
        raise SpecError(f"unknown flavor {flavor!r}")
    if flavor == "quat_right":
        right_i = OperatorExpr.right_unit(1)
        return tuple(compose(right_i, compose(_s(-1, "hbar"), D[n])) for n in range(3))
    return tuple(compose(_s(-1, Q_I, "hbar"), D[n]) for n in range(3))


def cross(u: Sequence[OperatorExpr], v: Sequence[OperatorExpr]) -> tuple[OperatorExpr, ...]:
    """Operator cross product, ``(u x v)_a = eps_abc u_b v_c``."""
    return tuple(compose(u[b], v[c]) - compose(u[c], v[b]) for a, b, c in CYCLIC)


def build_angular(spec: DeformationSpec) -> tuple[OperatorExpr, ...]:
    return cross(build_position(spec), build_momentum(spec.flavor))


def standard_angular() -> tuple[OperatorExpr, ...]:
    return build_angular(DeformationSpec.zero())


def build_ladder(spec: DeformationSpec, allow_eps3: bool = False) -> tuple[OperatorExpr, OperatorExpr]:
    """``(l_+, l_-) = l_1 +/- i l_2`` for a spec with ``eps1 = eps2``."""
    if spec.flavor != "complex":
        raise SpecError("ladder operators are defined for the complex flavor")
    spec = ladder_spec(spec, allow_eps3)
    l1, l2, _ = build_angular(spec)
    il2 = compose(I_OP, l2)
    return l1 + il2, l1 - il2


def lambda_ladder() -> tuple[OperatorExpr, OperatorExpr]:
    """``(x +/- i y) d/dz``, the correction ladders in ``l_+- = l_+- -/+ i hbar eps lambda_+-``."""
    xy_p = X[0] + compose(I_OP, X[1])
    xy_m = X[0] - compose(I_OP, X[1])
    return compose(xy_p, D[2]), compose(xy_m, D[2])


def square_sum(ops: Sequence[OperatorExpr]) -> OperatorExpr:
    return sum_exprs(compose(o, o) for o in ops)


def build_ell2(spec: DeformationSpec) -> OperatorExpr:
    return square_sum(build_angular(spec))


def _dot_apply(ell, funcs) -> OperatorExpr:
    """``sum_k ell_k(f_k)`` as a multiplication operator."""
    return sum_exprs(apply_to_function(ell[k], funcs[k]) for k in range(3))


def deformation_index_form(spec: DeformationSpec, ell=None) -> dict[tuple[int, int], OperatorExpr]:
    """``h_ab = [(ell_a eps_bmn - ell_b eps_amn) s_m] p_n`` with ``ell`` acting on ``s`` as functions."""
    ell = ell if ell is not None else build_angular(spec.with_(flavor="complex"))
    p = build_momentum("complex")
    acted = {(a, m): apply_to_function(ell[a], spec.s[m]) for a in range(3) for m in range(3)}
    out = {}
    for a in range(3):
        for b in range(3):
            total = OperatorExpr()
            for m in range(3):
                for n in range(3):
                    coef = levi(b, m, n) * 1
                    if coef:
                        total = total + compose(acted[a, m], p[n]).scale(coef)
                    coef = levi(a, m, n)
                    if coef:
                        total = total - compose(acted[b, m], p[n]).scale(coef)
            out[a, b] = total
    return out


def deformation_cross_form(spec: DeformationSpec, ell=None) -> dict[tuple[int, int], OperatorExpr]:
    """``h_ab = eps_abc [ (ell s_c) . p - (ell . s) p_c ]``."""
    ell = ell if ell is not None else build_angular(spec.with_(flavor="complex"))
    p = build_momentum("complex")
    ell_dot_s = _dot_apply(ell, spec.s)
    out = {}
    for a in range(3):
        for b in range(3):
            total = OperatorExpr()
            for c in range(3):
                e = levi(a, b, c)
                if not e:
                    continue
                grad_part = sum_exprs(compose(apply_to_function(ell[k], spec.s[c]), p[k]) for k in range(3))
                total = total + (grad_part - compose(ell_dot_s, p[c])).scale(e)
            out[a, b] = total
    return out


def deformation_definitional(spec: DeformationSpec) -> dict[tuple[int, int], OperatorExpr]:
    """Deformation factor read off from the commutator itself.

    complex:  h_ab = -i ([l_a, l_b] - i hbar eps_abc l_c)
    left:     h_ab = [l_a, l_b] - hbar eps_abc l_c o i
    right:    h_ab = [l_a, l_b] - hbar eps_abc (l_c | i)
    """
    ell = build_angular(spec)
    out = {}
    for a in range(3):
        for b in range(3):
            comm = commutator(ell[a], ell[b])
            std = OperatorExpr()
            for c in range(3):
                e = levi(a, b, c)
                if e:
                    std = std + _standard_term(spec.flavor, ell[c]).scale(e)
            if spec.flavor == "complex":
                out[a, b] = compose(_s(-1, Q_I), comm - std)
            else:
                out[a, b] = comm - std
    return out


def _standard_term(flavor: str, ell_c: OperatorExpr) -> OperatorExpr:
    if flavor == "complex":
        return compose(_s(Q_I, "hbar"), ell_c)
    if flavor == "quat_left":
        return compose(HBAR, compose(ell_c, I_OP))
    return compose(HBAR, compose(OperatorExpr.right_unit(1), ell_c))


def build_deformation_closed_form(spec: DeformationSpec, reading: str | None = None):
    """Closed-form deformation factors for the deformation's flavor, keyed by ``(a, b)``."""
    if spec.flavor == "complex":
        return deformation_index_form(spec)
    if spec.flavor == "quat_left":
        return left_h_closed_form(spec, reading or "function/left")
    return right_h_closed_form(spec, reading or "function")


# --- quaternionic closed forms -------------------------------------------------

LEFT_H_READINGS = ("function/left", "function/right-unit", "operator/left")
RIGHT_H_READINGS = ("function", "operator")


def _quat_parts(spec: DeformationSpec):
    q = build_position(spec)
    v = tuple(qq - X[n] for n, qq in enumerate(q))  # (q - conj q)/2: s, w are pure imaginary parts
    return q, v


def _derivative_of(f: OperatorExpr, n: int) -> OperatorExpr:
    return apply_to_function(D[n], f)


def _double_levi(fn) -> dict[tuple[int, int], OperatorExpr]:
    out = {}
    for a in range(3):
        for b in range(3):
            total = OperatorExpr()
            for m in range(3):
                for n in range(3):
                    e1 = levi(a, m, n)
                    if not e1:
                        continue
                    for k in range(3):
                        for l in range(3):
                            e2 = levi(b, k, l)
                            if e2:
                                total = total + fn(m, n, k, l).scale(e1 * e2)
            out[a, b] = compose(_s("hbar", "hbar"), total)
    return out


def left_h_closed_form(spec: DeformationSpec, reading: str = "function/left"):
    """Printed left deformation factor under one of ``LEFT_H_READINGS``.

    hbar^2 eps_amn eps_bkl [ q_m d_n (i v_k i) d_l - q_k d_l (i v_m i) d_n
                             + (q_m i q_k - q_k i q_m) i d_n d_l ],   v = (q - conj q)/2
    """
    if reading not in LEFT_H_READINGS:
        raise ValueError(f"unknown reading {reading!r}")
    q, v = _quat_parts(spec)
    rt = OperatorExpr.right_unit(1)

    def sandwich(f):
        # i f i, either both on the left or the trailing i acting on Psi from the right
        if reading == "function/right-unit":
            return compose(I_OP, f)
        return compose(compose(I_OP, f), I_OP)

    def outer(op):
        return compose(rt, op) if reading == "function/right-unit" else op

    def piece(qa, n, f, l):
        if reading == "operator/left":
            return compose(compose(compose(qa, D[n]), sandwich(f)), D[l])
        return outer(compose(compose(qa, _derivative_of(sandwich(f), n)), D[l]))

    def fn(m, n, k, l):
        third = compose(compose(q[m], I_OP), q[k]) - compose(compose(q[k], I_OP), q[m])
        if reading == "function/right-unit":
            third = compose(rt, compose(third, compose(D[n], D[l])))
        else:
            third = compose(compose(third, I_OP), compose(D[n], D[l]))
        return piece(q[m], n, v[k], l) - piece(q[k], l, v[m], n) + third

    return _double_levi(fn)


def right_h_closed_form(spec: DeformationSpec, reading: str = "function"):
    """Printed right deformation factor under one of ``RIGHT_H_READINGS``.

    hbar^2 eps_amn eps_bkl [ q_k d_l v_m d_n - q_m d_n v_k d_l + (q_m q_k - q_k q_m) d_n d_l ]
    """
    if reading not in RIGHT_H_READINGS:
        raise ValueError(f"unknown reading {reading!r}")
    q, v = _quat_parts(spec)

    def piece(qa, n, f, l):
        if reading == "operator":
            return compose(compose(compose(qa, D[n]), f), D[l])
        return compose(compose(qa, _derivative_of(f, n)), D[l])

    def fn(m, n, k, l):
        third = compose(q[m], q[k]) - compose(q[k], q[m])
        return piece(q[k], l, v[m], n) - piece(q[m], n, v[k], l) + compose(third, compose(D[n], D[l]))

    return _double_levi(fn)


def left_h_derived(spec: DeformationSpec):
    """Left deformation factor obtained by expanding the commutator by hand."""
    q, v = _quat_parts(spec)

    def fn(m, n, k, l):
        t1 = compose(compose(compose(compose(q[m], I_OP), _derivative_of(v[k], n)), I_OP), D[l])
        t2 = compose(compose(compose(compose(q[k], I_OP), _derivative_of(v[m], l)), I_OP), D[n])
        third = compose(compose(q[m], I_OP), q[k]) - compose(compose(q[k], I_OP), q[m])
        return t1 - t2 + compose(compose(third, I_OP), compose(D[n], D[l]))

    return _double_levi(fn)


def right_h_derived(spec: DeformationSpec):
    """Right deformation factor obtained by expanding the commutator by hand."""
    q, v = _quat_parts(spec)

    def fn(m, n, k, l):
        t1 = compose(compose(q[m], _derivative_of(v[k], n)), D[l])
        t2 = compose(compose(q[k], _derivative_of(v[m], l)), D[n])
        third = compose(q[m], q[k]) - compose(q[k], q[m])
        return -(t1 - t2 + compose(third, compose(D[n], D[l])))

    return _double_levi(fn)


# ---------------------------------------------------------------------------
# reports


@dataclass(frozen=True)
class IdentityCheck:
    label: str
    lhs: OperatorExpr
    rhs: OperatorExpr

    @property
    def residual(self) -> OperatorExpr:
        return self.lhs - self.rhs

    @property
    def exact(self) -> bool:
        return self.lhs == self.rhs

    def to_dict(self, include_sides: bool = False) -> dict:
        out = {"label": self.label, "exact": self.exact, "residual": pretty(self.residual)}
        if include_sides:
            out["lhs"] = pretty(self.lhs)
            out["rhs"] = pretty(self.rhs)
        return out


@dataclass(frozen=True)
class Reading:
    """One interpretation of a printed formula, with its checks."""

    name: str
    checks: tuple[IdentityCheck, ...]

    @property
    def exact(self) -> bool:
        return all(c.exact for c in self.checks)


@dataclass(frozen=True)
class IdentityReport:
    """Outcome of one identity verification.

    ``status`` is ``exact_match`` iff every check has zero residual and, when
    alternative readings are present, at least one reading matches.
    ``corrections`` hold re-derived forms; they never affect ``status``.
    """

    identity_id: str
    citation: str
    must_pass: bool
    checks: tuple[IdentityCheck, ...] = ()
    readings: tuple[Reading, ...] = ()
    corrections: tuple[Reading, ...] = ()
    notes: tuple[str, ...] = ()

    @property
    def status(self) -> str:
        ok = all(c.exact for c in self.checks)
        if self.readings:
            ok = ok and any(r.exact for r in self.readings)
        return "exact_match" if ok else "mismatch"

    @property
    def matched_readings(self) -> list[str]:
        return [r.name for r in self.readings if r.exact]

    def all_checks(self):
        yield from self.checks
        for r in self.readings:
            yield from r.checks

    @property
    def lhs(self) -> dict[str, OperatorExpr]:
        return {c.label: c.lhs for c in self.all_checks()}

    @property
    def rhs(self) -> dict[str, OperatorExpr]:
        return {c.label: c.rhs for c in self.all_checks()}

    @property
    def residual(self) -> dict[str, OperatorExpr]:
        return {c.label: c.residual for c in self.all_checks()}

    def to_dict(self, include_sides: bool = False) -> dict:
        def rd(r: Reading):
            return {"name": r.name, "exact": r.exact, "checks": [c.to_dict(include_sides) for c in r.checks]}

        return {
            "identity_id": self.identity_id,
            "citation": self.citation,
            "must_pass": self.must_pass,
            "status": self.status,
            "checks": [c.to_dict(include_sides) for c in self.checks],
            "readings": [rd(r) for r in self.readings],
            "matched_readings": self.matched_readings,
            "corrections": [rd(r) for r in self.corrections],
            "notes": list(self.notes),
        }


# ---------------------------------------------------------------------------
# identity builders

#: quadratic deformation used alongside the given s where generality matters
QUADRATIC_S = ("eps1*x*x", "eps2*x*y", "eps3*y*z")
#: linear w used by quaternionic identities when the deformation carries none
DEFAULT_W = ("dx*x", "dy*y", "dz*z")

_AXES = "123"


def _quadratic(spec: DeformationSpec) -> DeformationSpec:
    return spec.with_(flavor="complex", s=_parse_triple(QUADRATIC_S))


def _complex(spec: DeformationSpec) -> DeformationSpec:
    return spec.with_(flavor="complex")


def _general_specs(spec):
    return [("given s", _complex(spec)), ("quadratic s", _quadratic(spec))]


def _id_deformed_general(spec):
    checks, read_i, read_1 = [], [], []
    for tag, sp in _general_specs(spec):
        ell = build_angular(sp)
        h = deformation_index_form(sp, ell)
        for a, b, c in CYCLIC:
            lhs = commutator(ell[a], ell[b])
            std = compose(_s(Q_I, "hbar"), ell[c])
            lab = f"[l{_AXES[a]}, l{_AXES[b]}] ({tag})"
            read_i.append(IdentityCheck(lab, lhs, std + compose(I_OP, h[a, b])))
            read_1.append(IdentityCheck(lab, lhs, std + h[a, b]))
            checks.append(IdentityCheck(f"antisymmetry {lab}", lhs + commutator(ell[b], ell[a]), OperatorExpr()))
    return dict(
        checks=checks,
        readings=[
            Reading("i hbar eps_abc l_c + i h_ab", tuple(read_i)),
            Reading("i hbar eps_abc l_c + h_ab", tuple(read_1)),
        ],
    )


def _id_h_two_forms(spec):
    checks = []
    for tag, sp in _general_specs(spec):
        ell = build_angular(sp)
        idx = deformation_index_form(sp, ell)
        crs = deformation_cross_form(sp, ell)
        for a, b, _ in CYCLIC:
            checks.append(IdentityCheck(f"h{_AXES[a]}{_AXES[b]} index vs cross ({tag})", idx[a, b], crs[a, b]))
    return dict(checks=checks)


def _require_diagonal(spec):
    coeffs = diagonal_coefficients(spec)
    if coeffs is None:
        raise SpecError("identity needs a diagonal s = (e1 x, e2 y, e3 z)")
    return coeffs


def _id_diag_algebra(spec):
    sp = _complex(spec)
    eps = _require_diagonal(sp)
    ell = build_angular(sp)
    lstd = standard_angular()
    p = build_momentum("complex")
    checks = []
    for a, b, c in CYCLIC:
        factor = QuatScalar(-eps[c], 1) * QuatScalar(sym("hbar"))
        checks.append(
            IdentityCheck(
                f"[l{_AXES[a]}, l{_AXES[b]}] = hbar (i - eps{_AXES[c]}) l{_AXES[c]}",
                commutator(ell[a], ell[b]),
                compose(OperatorExpr.scalar(factor), ell[c]),
            )
        )
    checks.append(IdentityCheck("l . s = 0", _dot_apply(ell, sp.s), OperatorExpr()))
    readings_def, readings_std = [], []
    for c in range(3):
        scale = OperatorExpr.scalar(QuatScalar(0, eps[c]) * QuatScalar(sym("hbar")))
        lhs = sum_exprs(compose(apply_to_function(ell[k], sp.s[c]), p[k]) for k in range(3))
        readings_def.append(IdentityCheck(f"(l s{_AXES[c]}) . p = i hbar eps{_AXES[c]} l{_AXES[c]}", lhs, compose(scale, ell[c])))
        lhs0 = sum_exprs(compose(apply_to_function(lstd[k], sp.s[c]), p[k]) for k in range(3))
        readings_std.append(
            IdentityCheck(f"(l0 s{_AXES[c]}) . p = i hbar eps{_AXES[c]} l0{_AXES[c]}", lhs0, compose(scale, lstd[c]))
        )
    return dict(
        checks=checks + readings_def + readings_std,
        notes=[
            "l acting on s as deformed operator gives the deformed l_c; "
            "with r in place of z (undeformed l0) it gives the undeformed l0_c; both are checked"
        ],
    )


def _id_ell2_nonCasimir(spec):
    sp = _complex(spec)
    eps = _require_diagonal(sp)
    ell = build_angular(sp)
    l2 = square_sum(ell)
    cyc, summed = [], []
    for a, b, c in CYCLIC:
        lhs = commutator(l2, ell[a])
        factor = OperatorExpr.scalar(QuatScalar((eps[c] - eps[b]) * sym("hbar")))
        rhs = compose(factor, anticommutator(ell[b], ell[c]))
        lab = f"[l^2, l{_AXES[a]}]"
        cyc.append(IdentityCheck(lab, lhs, rhs))
        total = OperatorExpr()
        for bb in range(3):
            for cc in range(3):
                e = levi(a, bb, cc)
                if e:
                    f = OperatorExpr.scalar(QuatScalar((eps[cc] - eps[bb]) * sym("hbar") * e))
                    total = total + compose(f, anticommutator(ell[bb], ell[cc]))
        summed.append(IdentityCheck(lab, lhs, total))
    return dict(
        readings=[
            Reading("cyclic (a,b,c), no sum over b, c", tuple(cyc)),
            Reading("summed over b, c", tuple(summed)),
        ]
    )


def _id_ell2_general(spec):
    checks = []
    for tag, sp in _general_specs(spec):
        ell = build_angular(sp)
        h = deformation_index_form(sp, ell)
        l2 = square_sum(ell)
        for a, b, c in CYCLIC:
            rhs = compose(I_OP, anticommutator(ell[b], h[b, a]) + anticommutator(ell[c], h[c, a]))
            checks.append(IdentityCheck(f"[l^2, l{_AXES[a]}] ({tag})", commutator(l2, ell[a]), rhs))
    return dict(checks=checks)


def _ladder_pieces(spec, allow_eps3):
    sp = ladder_spec(_complex(spec), allow_eps3)
    ell = build_angular(sp)
    il2 = compose(I_OP, ell[1])
    return sp, ell, (ell[0] + il2, ell[0] - il2), square_sum(ell)


def _one_plus_i(name) -> QuatScalar:
    return QuatScalar(1, sym(name))


def _id_ladder_l3(spec):
    checks = []
    for tag, allow in (("eps3=0", False), ("eps3 symbolic", True)):
        base = spec if not allow else spec.subs({"eps3": sym("eps3")})
        if allow:
            coeffs = diagonal_coefficients(_complex(base))
            if coeffs is not None and not coeffs[2]:
                base = base.with_(s=(base.s[0], base.s[1], parse_expr("eps3*z")))
        else:
            base = base.subs({"eps3": 0})
        _, ell, (lp, lm), l2 = _ladder_pieces(base, allow)
        shift = OperatorExpr.scalar(_one_plus_i("eps") * QuatScalar(sym("hbar")))
        checks.append(IdentityCheck(f"[l3, l+] = +hbar(1+i eps) l+ ({tag})", commutator(ell[2], lp), compose(shift, lp)))
        checks.append(IdentityCheck(f"[l3, l-] = -hbar(1+i eps) l- ({tag})", commutator(ell[2], lm), -compose(shift, lm)))
        checks.append(IdentityCheck(f"[l^2, l3] = 0 ({tag})", commutator(l2, ell[2]), OperatorExpr()))
        if not allow:
            l3 = ell[2]
            checks.append(
                IdentityCheck(
                    "l^2 = l+ l- + l3^2 - hbar l3 (eps3=0)",
                    l2,
                    compose(lp, lm) + compose(l3, l3) - compose(HBAR, l3),
                )
            )
            l0p, l0m = build_ladder(DeformationSpec.zero())
            lam_p, lam_m = lambda_ladder()
            ihe = _s(Q_I, "hbar", "eps")
            checks.append(IdentityCheck("l+ = l0+ - i hbar eps lambda+", lp, l0p - compose(ihe, lam_p)))
            checks.append(IdentityCheck("l- = l0- + i hbar eps lambda-", lm, l0m + compose(ihe, lam_m)))
    return dict(checks=checks)


def _id_ladder_ell2(spec):
    base = spec.subs({"eps3": sym("eps3")})
    coeffs = diagonal_coefficients(_complex(base))
    if coeffs is not None and not coeffs[2]:
        base = base.with_(s=(base.s[0], base.s[1], parse_expr("eps3*z")))
    sp, ell, (lp, lm), l2 = _ladder_pieces(base, True)
    e3 = diagonal_coefficients(sp)[2]
    l3 = ell[2]
    pref = OperatorExpr.scalar(QuatScalar(0, (sym("eps") - e3) * sym("hbar")))
    factor = OperatorExpr.scalar(QuatScalar(1, e3) * QuatScalar(sym("hbar")))
    checks, fixed = [], []
    for sign, lad, name in ((1, lp, "+"), (-1, lm, "-")):
        lhs = commutator(l2, lad)
        ac = anticommutator(lad, l3)
        checks.append(IdentityCheck(f"[l^2, l{name}] = i hbar (eps - eps3) {{l{name}, l3}}", lhs, compose(pref, ac)))
        fixed.append(
            IdentityCheck(f"[l^2, l{name}] = {name}i hbar (eps - eps3) {{l{name}, l3}}", lhs, compose(pref, ac).scale(sign))
        )
    checks.append(IdentityCheck("l+ l- = l^2 - l3^2 + hbar(1+i eps3) l3", compose(lp, lm), l2 - compose(l3, l3) + compose(factor, l3)))
    checks.append(IdentityCheck("l- l+ = l^2 - l3^2 - hbar(1+i eps3) l3", compose(lm, lp), l2 - compose(l3, l3) - compose(factor, l3)))
    return dict(checks=checks, corrections=[Reading("sign-resolved: [l^2, l+-] = +-i hbar (eps - eps3) {l+-, l3}", tuple(fixed))])


def _id_ladder_shift(spec):
    _, ell, (lp, lm), _ = _ladder_pieces(spec.subs({"eps3": 0}), False)
    l3 = ell[2]
    shift = OperatorExpr.scalar(_one_plus_i("eps") * QuatScalar(sym("hbar")))
    return dict(
        checks=[
            IdentityCheck("l3 l+ = l+ (l3 + hbar(1+i eps))", compose(l3, lp), compose(lp, l3 + shift)),
            IdentityCheck("l3 l- = l- (l3 - hbar(1+i eps))", compose(l3, lm), compose(lm, l3 - shift)),
        ]
    )


def _quat_spec(spec, flavor):
    w = spec.w
    notes = []
    if all(c.is_zero() for c in w):
        w = _parse_triple(DEFAULT_W)
        notes.append("spec carries w = 0; using w = (" + ", ".join(DEFAULT_W) + ")")
    return spec.with_(flavor=flavor, w=w), notes


def _reduction_checks(spec, flavor):
    """With w = 0 the quaternionic commutators equal the complex ones."""
    sp0 = spec.with_(flavor=flavor, w=(OperatorExpr(),) * 3)
    ellq = build_angular(sp0)
    ellc = build_angular(_complex(spec))
    out = []
    for a, b, _ in CYCLIC:
        out.append(
            IdentityCheck(
                f"w=0: [l{_AXES[a]}, l{_AXES[b]}] equals complex commutator",
                commutator(ellq[a], ellq[b]),
                commutator(ellc[a], ellc[b]),
            )
        )
    if flavor == "quat_left":
        for n in range(3):
            out.append(IdentityCheck(f"w=0: left l{_AXES[n]} equals complex l{_AXES[n]}", ellq[n], ellc[n]))
    return out


def _id_left_algebra(spec):
    sp, notes = _quat_spec(spec, "quat_left")
    ell = build_angular(sp)
    hd = left_h_derived(sp)
    rt = OperatorExpr.right_unit(1)
    comp, right = [], []
    for a, b, c in CYCLIC:
        lhs = commutator(ell[a], ell[b])
        lab = f"[lL{_AXES[a]}, lL{_AXES[b]}]"
        comp.append(IdentityCheck(lab, lhs, compose(HBAR, compose(ell[c], I_OP)) + hd[a, b]))
        right.append(IdentityCheck(lab, lhs, compose(HBAR, compose(rt, ell[c])) + hd[a, b]))
    return dict(
        checks=_reduction_checks(spec, "quat_left"),
        readings=[
            Reading("hbar eps_abc lL_c o i + h_derived", tuple(comp)),
            Reading("hbar eps_abc (lL_c | i) + h_derived", tuple(right)),
        ],
        notes=notes,
    )


def _id_right_algebra(spec):
    sp, notes = _quat_spec(spec, "quat_right")
    ell = build_angular(sp)
    hd = right_h_derived(sp)
    rt = OperatorExpr.right_unit(1)
    checks = _reduction_checks(spec, "quat_right")
    for a, b, c in CYCLIC:
        checks.append(
            IdentityCheck(
                f"[lR{_AXES[a]}, lR{_AXES[b]}] = hbar (lR{_AXES[c]} | i) + h_derived",
                commutator(ell[a], ell[b]),
                compose(HBAR, compose(rt, ell[c])) + hd[a, b],
            )
        )
    return dict(checks=checks, notes=notes)


def _h_printed_readings(spec, flavor):
    sp, notes = _quat_spec(spec, flavor)
    hdef = deformation_definitional(sp)
    names = LEFT_H_READINGS if flavor == "quat_left" else RIGHT_H_READINGS
    build = left_h_closed_form if flavor == "quat_left" else right_h_closed_form
    readings = []
    for name in names:
        h = build(sp, name)
        readings.append(
            Reading(name, tuple(IdentityCheck(f"h{_AXES[a]}{_AXES[b]}", h[a, b], hdef[a, b]) for a, b, _ in CYCLIC))
        )
    derived = left_h_derived(sp) if flavor == "quat_left" else right_h_derived(sp)
    corr = Reading(
        "derived by direct expansion",
        tuple(IdentityCheck(f"h{_AXES[a]}{_AXES[b]}", derived[a, b], hdef[a, b]) for a, b, _ in CYCLIC),
    )
    return dict(readings=readings, corrections=[corr], notes=notes)


def _id_left_h(spec):
    return _h_printed_readings(spec, "quat_left")


def _id_right_h(spec):
    return _h_printed_readings(spec, "quat_right")


def _id_left_ell2(spec):
    sp, notes = _quat_spec(spec, "quat_left")
    ell = build_angular(sp)
    h = deformation_definitional(sp)
    l2 = square_sum(ell)

    def twist(op):
        return compose(I_OP, op) - compose(op, I_OP)

    printed, fixed = [], []
    for a, b, c in CYCLIC:
        lhs = commutator(l2, ell[a])
        hpart = anticommutator(ell[b], h[b, a]) + anticommutator(ell[c], h[c, a])
        first = compose(ell[b], twist(ell[c]))
        second = compose(ell[c], twist(ell[b]))
        lab = f"[lL^2, lL{_AXES[a]}]"
        printed.append(IdentityCheck(lab, lhs, compose(HBAR, first + second) + hpart))
        fixed.append(IdentityCheck(lab, lhs, compose(HBAR, first - second) + hpart))
    return dict(
        checks=printed,
        corrections=[Reading("second bracket with opposite sign", tuple(fixed))],
        notes=notes + ["h is the definitional deformation factor"],
    )


def _id_right_ell2(spec):
    sp, notes = _quat_spec(spec, "quat_right")
    ell = build_angular(sp)
    h = deformation_definitional(sp)
    l2 = square_sum(ell)
    checks = []
    for a, b, c in CYCLIC:
        rhs = anticommutator(ell[b], h[b, a]) + anticommutator(ell[c], h[c, a])
        checks.append(IdentityCheck(f"[lR^2, lR{_AXES[a]}]", commutator(l2, ell[a]), rhs))
    return dict(checks=checks, notes=notes + ["l^2 read as lR^2; h is the definitional deformation factor"])


@dataclass(frozen=True)
class IdentityDef:
    identity_id: str
    citation: str
    must_pass: bool
    build: Callable


REGISTRY: dict[str, IdentityDef] = {
    d.identity_id: d
    for d in (
        IdentityDef("deformed_general", "[l_a, l_b] = eps_abc i hbar l_c + i h_ab, h_ab = [(l_a eps_bmn - l_b eps_amn) s_m] p_n", True, _id_deformed_general),
        IdentityDef("h_two_forms", "h_ab = eps_abc [(l s_c).p - (l.s) p_c]  (cross-product form)", True, _id_h_two_forms),
        IdentityDef("diag_algebra", "s = (eps1 x, eps2 y, eps3 z): [l_a, l_b] = eps_abc hbar (i - eps_c) l_c; l.s = 0", True, _id_diag_algebra),
        IdentityDef("ell2_nonCasimir", "[l^2, l_a] = hbar (eps_c - eps_b) eps_abc (l_b l_c + l_c l_b)", True, _id_ell2_nonCasimir),
        IdentityDef("ell2_general", "[l_a^2 + l_b^2 + l_c^2, l_a] = i (l_b h_ba + h_ba l_b + l_c h_ca + h_ca l_c)", True, _id_ell2_general),
        IdentityDef("ladder_l3", "[l3, l+-] = +-hbar (1 + i eps) l+-, [l^2, l3] = 0", True, _id_ladder_l3),
        IdentityDef("ladder_ell2", "[l^2, l+-] = i hbar (eps - eps3) {l+-, l3}; l+- l-+ = l^2 - l3^2 +- hbar (1 + i eps3) l3", True, _id_ladder_ell2),
        IdentityDef("ladder_shift", "l3 l+- = [l3, l+-] + l+- l3", True, _id_ladder_shift),
        IdentityDef("left_algebra", "[lL_a, lL_b] = hbar eps_abc lL_c i + hL_ab", True, _id_left_algebra),
        IdentityDef("left_h", "hL_ab = hbar^2 eps_amn eps_bkl [q_m d_n i(q_k - conj q_k)i/2 d_l - q_k d_l i(q_m - conj q_m)i/2 d_n + (q_m i q_k - q_k i q_m) i d_n d_l]", False, _id_left_h),
        IdentityDef("left_ell2", "[lL^2, lL_a] = hbar eps_abc [lL_b (i lL_c - lL_c i) + lL_c (i lL_b - lL_b i)] + {lL_b, hL_ba} + {lL_c, hL_ca}", False, _id_left_ell2),
        IdentityDef("right_algebra", "[lR_a, lR_b] = hbar eps_abc (lR_c | i) + hR_ab", True, _id_right_algebra),
        IdentityDef("right_h", "hR_ab = hbar^2 eps_amn eps_bkl [q_k d_l (q_m - conj q_m)/2 d_n - q_m d_n (q_k - conj q_k)/2 d_l + (q_m q_k - q_k q_m) d_n d_l]", False, _id_right_h),
        IdentityDef("right_ell2", "[l^2, lR_a] = lR_b hR_ba + hR_ba lR_b + lR_c hR_ca + hR_ca lR_c", False, _id_right_ell2),
    )
}

IDENTITY_IDS = tuple(REGISTRY)


def run_identity(identity_id: str, spec: DeformationSpec | None = None) -> IdentityReport:
    """Verify one registered identity for ``spec`` (default: diagonal s)."""
    try:
        d = REGISTRY[identity_id]
    except KeyError:
        raise UnknownIdentityError(identity_id) from None
    spec = spec if spec is not None else DeformationSpec.diagonal()
    parts = d.build(spec)
    return IdentityReport(
        identity_id=d.identity_id,
        citation=d.citation,
        must_pass=d.must_pass,
        checks=tuple(parts.get("checks", ())),
        readings=tuple(parts.get("readings", ())),
        corrections=tuple(parts.get("corrections", ())),
        notes=tuple(parts.get("notes", ())),
    )


def _run_one(args):
    return run_identity(*args)


def run_suite(
    spec: DeformationSpec | None = None,
    ids: Sequence[str] | None = None,
    workers: int | None = None,
) -> list[IdentityReport]:
    """Run identities (all by default), optionally in worker processes.

    Results are ordered by registry order regardless of completion order.
    """
    spec = spec if spec is not None else DeformationSpec.diagonal()
    ids = list(ids) if ids is not None else list(IDENTITY_IDS)
    for i in ids:
        if i not in REGISTRY:
            raise UnknownIdentityError(i)
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(_run_one, [(i, spec) for i in ids]))
    else:
        reports = [run_identity(i, spec) for i in ids]
    order = {i: n for n, i in enumerate(IDENTITY_IDS)}
    return sorted(reports, key=lambda r: order[r.identity_id])
