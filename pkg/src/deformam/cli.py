"""Command-line front end.

    deformam verify-algebra [--flavor F] [--s "a,b,c"] [--w "a,b,c"] [--eps1 1/10 ...]
    deformam perturb --lambda 1 --m 0 --k 0 [--lmax 6] [--nodes 32]
    deformam expect [--checks gauge,l3,shift,scan] [--eps 0.01] [--eps-scan 1e-2,5e-3,2.5e-3]
    deformam parse "Dx*x"

Exit status: 0 success, 1 verification failure, 2 usage or config error.
A ``--config`` file holds ``key = value`` lines (``#`` comments) using the
long flag names with dashes or underscores; its values override flags.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import asdict, dataclass, fields
from fractions import Fraction
from pathlib import Path
from typing import Sequence

from .angmom import (
    FLAVORS,
    QUADRATIC_S,
    DeformationSpec,
    SpecError,
    UnknownIdentityError,
    build_angular,
    build_ell2,
    build_ladder,
    build_position,
    ladder_spec,
    run_suite,
)
from .expect import SphericalGrid, commutator_expectation_scan, expectation
from .opcalc import ParseError, parse_expr, pretty
from .qalg import UnknownSymbolError
from .spectral import QuadratureError, SeparableState, solution_csv, solution_dict, solve_perturbation

COMMANDS = ("verify-algebra", "perturb", "expect", "parse")
FORMATS = ("json", "md", "csv")
EXPECT_CHECKS = ("gauge", "l3", "shift", "scan")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    command: str = "verify-algebra"
    flavor: str = "complex"
    s: str = "eps1*x, eps2*y, eps3*z"
    w: str = "0, 0, 0"
    eps: str | None = None
    eps1: str | None = None
    eps2: str | None = None
    eps3: str | None = None
    ids: str | None = None
    workers: int = 0
    lambda_: int | None = None
    m: int | None = None
    k: float = 0.0
    lmax: int | None = None
    nodes: int | None = None
    sigma: float = 1.0
    eps_scan: str = "1e-2, 5e-3, 2.5e-3"
    checks: str = ",".join(EXPECT_CHECKS)
    expr: str | None = None
    out: str | None = None
    format: str = "json"

    @classmethod
    def keys(cls) -> tuple[str, ...]:
        return tuple(_external(f.name) for f in fields(cls))

    def as_items(self) -> dict:
        return {_external(k): v for k, v in asdict(self).items()}


#: per-command defaults for fields left as None
COMMAND_DEFAULTS = {
    "perturb": {"lambda_": 1, "m": 0},
    "expect": {"lambda_": 2, "m": 1},
}


def _external(name: str) -> str:
    return "lambda" if name == "lambda_" else name


def _internal(key: str) -> str:
    key = key.strip().replace("-", "_")
    return "lambda_" if key == "lambda" else key


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _convert(name: str, raw: str):
    t = str(_FIELD_TYPES[name])
    if raw.lower() in ("none", "") and "None" in t:
        return None
    try:
        if t.startswith("int"):
            return int(raw)
        if t.startswith("float"):
            return float(raw)
    except ValueError:
        raise ConfigError(f"bad value for {_external(name)!r}: {raw!r}") from None
    return raw


def parse_config_text(text: str) -> dict:
    """Flat ``key = value`` lines into a dict of ``RunConfig`` fields."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"line {lineno}: expected key = value")
        name = _internal(key)
        if name not in _FIELD_TYPES:
            raise ConfigError(f"line {lineno}: unknown key {key.strip()!r}")
        out[name] = _convert(name, value.strip())
    return out


def dump_config(cfg: RunConfig) -> str:
    lines = []
    for key, value in cfg.as_items().items():
        lines.append(f"{key} = {'none' if value is None else value}")
    return "\n".join(lines) + "\n"


def load_config(path: str | Path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config_text(text)


# ---------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="deformam", description="Deformed angular momentum toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", metavar="PATH")
        sp.add_argument("--out", metavar="PATH")
        sp.add_argument("--format", choices=FORMATS)

    def deformation(sp):
        sp.add_argument("--flavor", choices=FLAVORS)
        sp.add_argument("--s", metavar="S1,S2,S3")
        sp.add_argument("--w", metavar="W1,W2,W3")
        for name in ("eps", "eps1", "eps2", "eps3"):
            sp.add_argument(f"--{name}", metavar="VALUE")

    def state(sp):
        sp.add_argument("--lambda", dest="lambda_", type=int)
        sp.add_argument("--m", type=int)
        sp.add_argument("--k", type=float)

    va = sub.add_parser("verify-algebra", help="run the identity suite")
    common(va)
    deformation(va)
    va.add_argument("--ids", metavar="ID,ID")
    va.add_argument("--workers", type=int)

    pe = sub.add_parser("perturb", help="first-order perturbation solve")
    common(pe)
    state(pe)
    pe.add_argument("--lmax", type=int)
    pe.add_argument("--nodes", type=int)

    ex = sub.add_parser("expect", help="expectation-value checks")
    common(ex)
    deformation(ex)
    state(ex)
    ex.add_argument("--nodes", type=int)
    ex.add_argument("--sigma", type=float)
    ex.add_argument("--eps-scan", dest="eps_scan")
    ex.add_argument("--checks")

    pa = sub.add_parser("parse", help="canonicalize an operator expression")
    common(pa)
    pa.add_argument("expr", nargs="?")
    return p


def resolve_config(args: argparse.Namespace) -> RunConfig:
    values = {k: v for k, v in vars(args).items() if k in _FIELD_TYPES and v is not None}
    if getattr(args, "config", None):
        from_file = load_config(args.config)
        if "command" in from_file and from_file["command"] != args.command:
            raise ConfigError(f"config is for {from_file['command']!r}, not {args.command!r}")
        values.update(from_file)
    for key, value in COMMAND_DEFAULTS.get(args.command, {}).items():
        if values.get(key) is None:
            values[key] = value
    cfg = RunConfig(**values)
    if cfg.format not in FORMATS:
        raise ConfigError(f"format must be one of {FORMATS}")
    if cfg.flavor not in FLAVORS:
        raise ConfigError(f"flavor must be one of {FLAVORS}")
    return cfg


# ---------------------------------------------------------------------------
# helpers


def _exact_number(text: str) -> Fraction:
    try:
        return Fraction(text.strip())
    except (ValueError, ZeroDivisionError):
        raise ConfigError(f"not an exact number: {text!r}") from None


def _float(text: str) -> float:
    try:
        return float(Fraction(text.strip()))
    except (ValueError, ZeroDivisionError):
        raise ConfigError(f"not a number: {text!r}") from None


def _eps_assignment(cfg: RunConfig, convert) -> dict:
    out = {}
    for name in ("eps", "eps1", "eps2", "eps3"):
        value = getattr(cfg, name)
        if value is not None:
            out[name] = convert(value)
    return out


def _spec(cfg: RunConfig) -> DeformationSpec:
    return DeformationSpec.from_strings(cfg.flavor, cfg.s, cfg.w)


def _csv_text(header: Sequence[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _json(data) -> str:
    return json.dumps(data, indent=2, sort_keys=True) + "\n"


def _emit(cfg: RunConfig, text: str) -> None:
    if cfg.out:
        Path(cfg.out).write_text(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# commands


def cmd_verify_algebra(cfg: RunConfig) -> int:
    spec = _spec(cfg)
    assignment = _eps_assignment(cfg, _exact_number)
    if assignment:
        spec = spec.subs(assignment)
    ids = [i.strip() for i in cfg.ids.split(",")] if cfg.ids else None
    reports = run_suite(spec, ids, cfg.workers or None)
    ok = all(r.status == "exact_match" for r in reports if r.must_pass)

    if cfg.format == "json":
        text = _json(
            {
                "spec": spec.describe(),
                "ok": ok,
                "identities": [r.to_dict() for r in reports],
            }
        )
    elif cfg.format == "csv":
        rows = [(r.identity_id, r.must_pass, r.status, ";".join(r.matched_readings), r.citation) for r in reports]
        text = _csv_text(("identity_id", "must_pass", "status", "matched_readings", "citation"), rows)
    else:
        text = _verify_markdown(spec, reports, ok)
    _emit(cfg, text)
    return 0 if ok else 1


def _verify_markdown(spec: DeformationSpec, reports, ok: bool) -> str:
    d = spec.describe()
    lines = [
        "# Identity verification",
        "",
        f"- flavor: `{d['flavor']}`",
        f"- s: `{', '.join(d['s'])}`",
        f"- w: `{', '.join(d['w'])}`",
        f"- must-pass result: {'PASS' if ok else 'FAIL'}",
        "",
        "| identity | must pass | status | matched readings | formula |",
        "|---|---|---|---|---|",
    ]
    for r in reports:
        readings = ", ".join(r.matched_readings) or "-"
        lines.append(f"| {r.identity_id} | {'yes' if r.must_pass else 'report'} | {r.status} | {readings} | `{r.citation}` |")
    for r in reports:
        bad = [c for c in r.all_checks() if not c.exact]
        if not bad and not r.notes and not r.corrections:
            continue
        lines += ["", f"## {r.identity_id}", ""]
        for note in r.notes:
            lines.append(f"- {note}")
        for c in bad:
            lines.append(f"- nonzero residual `{c.label}`: `{pretty(c.residual)}`")
        for corr in r.corrections:
            lines.append(f"- corrected form `{corr.name}`: {'exact' if corr.exact else 'mismatch'}")
    return "\n".join(lines) + "\n"


def cmd_perturb(cfg: RunConfig) -> int:
    try:
        sol = solve_perturbation(cfg.lambda_, cfg.m, cfg.k, cfg.lmax, cfg.nodes)
    except QuadratureError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if cfg.format == "csv":
        text = solution_csv(sol)
    elif cfg.format == "json":
        text = _json(solution_dict(sol))
    else:
        lines = [
            "# Perturbation solution",
            "",
            f"- lambda = {sol.degree}, m = {sol.m}, k = {sol.k}",
            f"- kappa = {sol.kappa!r}",
            f"- residual_norm = {sol.residual_norm!r}",
            "",
            "| lambda_prime | C |",
            "|---|---|",
        ]
        lines += [f"| {lp} | {sol.C[lp]!r} |" for lp in sorted(sol.C)]
        lines += [f"- {n}" for n in sol.notes]
        text = "\n".join(lines) + "\n"
    _emit(cfg, text)
    return 0


def _eps_list(text: str) -> list[float]:
    return [_float(t) for t in text.split(",") if t.strip()]


def _expect_checks(cfg: RunConfig) -> list[dict]:
    checks = [c.strip() for c in cfg.checks.split(",") if c.strip()]
    for c in checks:
        if c not in EXPECT_CHECKS:
            raise ConfigError(f"unknown check {c!r}; expected some of {EXPECT_CHECKS}")
    eps = _float(cfg.eps) if cfg.eps is not None else 0.01
    hbar = 1.0
    grid = SphericalGrid(n_theta=cfg.nodes) if cfg.nodes else None
    degree = max(cfg.lambda_, abs(cfg.m))
    lad = ladder_spec(DeformationSpec.diagonal().subs({"eps3": 0}))
    results = []

    if "gauge" in checks:
        assignment = {"eps1": eps, "eps2": eps, "eps3": eps}
        assignment.update(_eps_assignment(cfg, _float))
        assignment.setdefault("eps", eps)
        state = SeparableState(cfg.k, cfg.m, eps, (1.0, 0.5), cfg.sigma, "gauge test state")
        zero = build_position(DeformationSpec.zero())
        worst = 0.0
        rows = []
        for label, s in (("s", cfg.s), ("quadratic", ", ".join(QUADRATIC_S))):
            pos = build_position(DeformationSpec.from_strings("complex", s))
            for a in range(3):
                vz = expectation(pos[a], state, grid, assignment).value
                vr = expectation(zero[a], state, grid, assignment).value
                worst = max(worst, abs(vz - vr))
                rows.append({"s": label, "axis": a + 1, "z": vz, "r": vr})
        results.append({"check": "gauge", "passed": worst <= 1e-12, "max_deviation": worst, "rows": rows})

    if "l3" in checks or "shift" in checks:
        state = SeparableState.legendre(degree, cfg.m, cfg.k, eps, cfg.sigma)
        l3 = build_angular(lad)[2]
        base = expectation(l3, state, grid, {"hbar": hbar, "eps": eps})
        target = hbar * cfg.m * (1 + eps**2)
        if "l3" in checks:
            results.append(
                {
                    "check": "l3",
                    "passed": abs(base.value - target) <= 1e-10,
                    "value": base.value,
                    "expected": target,
                    "row": base.row(),
                }
            )
        if "shift" in checks:
            lp, lm = build_ladder(lad)
            for name, op, sign in (("l+", lp, 1), ("l-", lm, -1)):
                try:
                    r = expectation(l3, state, grid, {"hbar": hbar, "eps": eps}, prepare=op)
                except ValueError as exc:
                    results.append({"check": f"shift {name}", "passed": False, "error": str(exc)})
                    continue
                shift = r.value - base.value
                results.append(
                    {
                        "check": f"shift {name}",
                        "passed": abs(shift - sign * hbar) <= 1e-10,
                        "shift": shift,
                        "engine_prediction": sign * hbar,
                        "deviation_from_hbar_1_plus_eps2": shift - sign * hbar * (1 + eps**2),
                        "row": r.row(),
                    }
                )

    if "scan" in checks:
        eps_values = _eps_list(cfg.eps_scan)
        state = SeparableState(cfg.k, cfg.m, eps_values[0], (1.0, 0.5), cfg.sigma, f"P{abs(cfg.m)}^{cfg.m}+P{abs(cfg.m)+1}^{cfg.m}/2")
        l2 = build_ell2(lad)
        lp, _ = build_ladder(lad)
        rep = commutator_expectation_scan(l2, lp, state, eps_values, grid, hbar)
        all_zero = all(e == 0 for e in eps_values)
        if all_zero:
            passed = all(v == 0 for v in rep.values)
        else:
            passed = rep.within_target and all(v == 0 for e, v in zip(eps_values, rep.values) if e == 0)
        results.append(
            {
                "check": "scan",
                "passed": passed,
                "exponent": rep.exponent,
                "target": list(rep.target),
                "flags": list(rep.flags),
                "rows": [
                    {"epsilon": e, "value": v, "error_estimate": d}
                    for e, v, d in zip(rep.epsilons, rep.values, rep.error_estimates)
                ],
            }
        )
        commuting = commutator_expectation_scan(l2, build_angular(lad)[2], state, eps_values, grid, hbar)
        results.append(
            {
                "check": "scan [l^2, l3]",
                "passed": all(v == 0 for v in commuting.values),
                "values": list(commuting.values),
            }
        )
    return results


def cmd_expect(cfg: RunConfig) -> int:
    results = _expect_checks(cfg)
    ok = all(r["passed"] for r in results)
    if cfg.format == "json":
        text = _json({"ok": ok, "checks": results})
    elif cfg.format == "csv":
        text = _csv_text(("check", "passed", "summary"), [(r["check"], r["passed"], _summary(r)) for r in results])
    else:
        lines = ["# Expectation checks", ""]
        lines += [f"- {'PASS' if r['passed'] else 'FAIL'} {r['check']}: {_summary(r)}" for r in results]
        text = "\n".join(lines) + "\n"
    _emit(cfg, text)
    return 0 if ok else 1


def _summary(r: dict) -> str:
    for key in ("max_deviation", "value", "shift", "exponent", "values", "error"):
        if key in r:
            return f"{key}={r[key]!r}"
    return ""


def cmd_parse(cfg: RunConfig) -> int:
    if cfg.expr is None:
        raise ConfigError("parse needs an expression")
    expr = parse_expr(cfg.expr)
    if cfg.format == "json":
        text = _json({"input": cfg.expr, "canonical": pretty(expr), "terms": len(expr)})
    else:
        text = pretty(expr) + "\n"
    _emit(cfg, text)
    return 0


HANDLERS = {
    "verify-algebra": cmd_verify_algebra,
    "perturb": cmd_perturb,
    "expect": cmd_expect,
    "parse": cmd_parse,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    try:
        cfg = resolve_config(args)
        cfg.command = args.command
        return HANDLERS[args.command](cfg)
    except (ConfigError, SpecError, ParseError, UnknownIdentityError, UnknownSymbolError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        # precondition violations (lambda < |m|, bad lmax, ...)
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
