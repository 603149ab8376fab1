"""Properties A, A', A'' and B, B' as exact predicates.

Every inequality is stored as a slack ``lhs - rhs`` that must be ``< 0``
(strict) or ``<= 0``.  When all inputs are ints or Fractions the slacks are
exact rationals; otherwise floats are compared with an equality band of
1e-12 and near-boundary slacks are flagged.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Rational

from .priors import PriorSpec
from .seqspace import SpaceSpec

EQ_BAND = 1e-12


@dataclass(frozen=True)
class Inequality:
    name: str
    slack: float | Fraction
    strict: bool

    def satisfied(self, exact: bool) -> bool:
        if exact:
            return self.slack < 0 if self.strict else self.slack <= 0
        return self.slack < -EQ_BAND if self.strict else self.slack <= EQ_BAND

    def near_boundary(self, exact: bool) -> bool:
        return not exact and abs(self.slack) <= EQ_BAND


@dataclass
class PropertyVerdict:
    prop: str
    holds: bool
    branch: str
    inequalities: list[Inequality] = field(default_factory=list)
    exact: bool = False

    @property
    def margins(self) -> dict[str, float | Fraction]:
        return {ineq.name: ineq.slack for ineq in self.inequalities}

    @property
    def flagged(self) -> list[str]:
        return [i.name for i in self.inequalities if i.near_boundary(self.exact)]

    def render(self) -> str:
        lines = [f"property {self.prop}: {'holds' if self.holds else 'fails'}",
                 f"  branch: {self.branch}",
                 f"  arithmetic: {'exact' if self.exact else 'float'}"]
        for ineq in self.inequalities:
            rel = "<" if ineq.strict else "<="
            ok = "ok" if ineq.satisfied(self.exact) else "VIOLATED"
            flag = " (within 1e-12 of boundary)" if ineq.near_boundary(self.exact) else ""
            lines.append(f"  {ineq.name} {rel} 0: slack={_fmt(ineq.slack)} {ok}{flag}")
        return "\n".join(lines)


def _fmt(x) -> str:
    if isinstance(x, Fraction):
        return str(x) if x.denominator != 1 else str(x.numerator)
    return repr(float(x))


def _is_exact(*values) -> bool:
    return all(isinstance(v, Rational) or (isinstance(v, float) and math.isinf(v)) for v in values)


def _num(x, exact: bool):
    if exact and not (isinstance(x, float) and math.isinf(x)):
        return Fraction(x)
    return x if isinstance(x, float) and math.isinf(x) else float(x)


class _Ctx:
    """Arithmetic context: Fractions when every input is rational."""

    def __init__(self, *values):
        self.exact = _is_exact(*values)

    def __call__(self, x):
        return _num(x, self.exact)

    def collect(self, items: list[tuple[str, object, bool]]) -> list[Inequality]:
        return [Inequality(name, slack, strict) for name, slack, strict in items]

    def all_ok(self, ineqs: list[Inequality]) -> bool:
        return all(i.satisfied(self.exact) for i in ineqs)


def _smoothness(ctx: _Ctx, spec: SpaceSpec, prior: PriorSpec):
    return ctx(spec.s) + ctx(spec.d) / 2 + ctx(prior.alpha)


def property_a(spec: SpaceSpec, prior: PriorSpec) -> PropertyVerdict:
    if prior.sparse:
        raise ValueError("Property A concerns the Besov prior; use property_a_prime / property_a_dprime")
    ctx = _Ctx(spec.s, spec.p, spec.q, spec.d, prior.alpha, prior.beta, prior.gamma, prior.theta)
    d, p, q = ctx(spec.d), ctx(spec.p), ctx(spec.q)
    gamma, beta, theta = ctx(prior.gamma), ctx(prior.beta), ctx(prior.theta)
    if math.isinf(p):
        decay = [("gamma", gamma, False), ("beta", beta, False)]
    else:
        decay = [("gamma + d/p", gamma + d / p, True), ("beta + d/p", beta + d / p, True)]
    smooth = _smoothness(ctx, spec, prior)
    theta_ineq = ("theta", theta, False) if math.isinf(q) else ("theta + 1/q", theta + 1 / q, True)
    strict = ctx.collect(decay + [("s + d/2 + alpha", smooth, True)])
    if ctx.all_ok(strict):
        return PropertyVerdict("A", True, "A-strict", strict, ctx.exact)
    on_boundary = smooth == 0 if ctx.exact else abs(smooth) <= EQ_BAND
    boundary = ctx.collect(decay + [theta_ineq])
    boundary.insert(len(decay), Inequality("s + d/2 + alpha (= 0)", smooth, False))
    if on_boundary and ctx.all_ok(boundary):
        return PropertyVerdict("A", True, "A-boundary", boundary, ctx.exact)
    return PropertyVerdict("A", False, "none", strict + ctx.collect([theta_ineq]), ctx.exact)


def property_a_prime(spec: SpaceSpec, prior: PriorSpec) -> PropertyVerdict:
    if not prior.sparse:
        raise ValueError("Property A' concerns the Bernoulli-Besov prior")
    ctx = _Ctx(spec.s, spec.p, spec.q, spec.d, prior.alpha, prior.beta, prior.gamma, prior.mu, prior.nu)
    d, p, q = ctx(spec.d), ctx(spec.p), ctx(spec.q)
    gamma, beta, mu, nu = ctx(prior.gamma), ctx(prior.beta), ctx(prior.mu), ctx(prior.nu)
    smooth = _smoothness(ctx, spec, prior)
    if not math.isinf(p):
        case = "(a)" if not math.isinf(q) else "(b)"
        items = [
            ("gamma + (d+nu)/p", gamma + (d + nu) / p, True),
            ("beta + (d+nu)/p", beta + (d + nu) / p, True),
            ("s + d/2 + alpha + mu/p", smooth + mu / p, case == "(a)"),
        ]
    else:
        case = "(c)" if not math.isinf(q) else "(d)"
        items = [("gamma", gamma, False), ("beta", beta, False),
                 ("s + d/2 + alpha", smooth, case == "(c)")]
    ineqs = ctx.collect(items)
    holds = ctx.all_ok(ineqs)
    return PropertyVerdict("A'", holds, f"A'-{case}" if holds else "none", ineqs, ctx.exact)


def property_a_dprime(spec: SpaceSpec, prior: PriorSpec, r: float) -> PropertyVerdict:
    if not prior.sparse:
        raise ValueError("Property A'' concerns the Bernoulli-Besov prior")
    if not r > 0:
        raise ValueError("moment order r must be positive")
    ctx = _Ctx(spec.s, spec.p, spec.d, prior.alpha, prior.beta, prior.gamma, prior.mu, prior.nu, r)
    d, p = ctx(spec.d), ctx(spec.p)
    gamma, beta, mu, nu = ctx(prior.gamma), ctx(prior.beta), ctx(prior.mu), ctx(prior.nu)
    smooth = _smoothness(ctx, spec, prior)
    if not math.isinf(p):
        top = max(ctx(r), p)
        case = "(a)"
        items = [
            ("gamma + d/p + nu/max(r,p)", gamma + d / p + nu / top, True),
            ("beta + d/p + nu/max(r,p)", beta + d / p + nu / top, True),
            ("s + d/2 + alpha + mu/max(r,p)", smooth + mu / top, True),
        ]
    else:
        case = "(b)"
        items = [("gamma", gamma, False), ("beta", beta, False), ("s + d/2 + alpha", smooth, False)]
    ineqs = ctx.collect(items)
    holds = ctx.all_ok(ineqs)
    return PropertyVerdict("A''", holds, f"A''-{case}" if holds else "none", ineqs, ctx.exact)


def property_b(spec: SpaceSpec, k: int) -> PropertyVerdict:
    if k < 1:
        raise ValueError("k must be >= 1")
    ctx = _Ctx(spec.s, spec.p, spec.d, k)
    d, p, s, kk = ctx(spec.d), ctx(spec.p), ctx(spec.s), ctx(k)
    if p < 1:
        case, need = "(a)", max(s, d * (1 / p - 1) - s)
        name = "max(s, d(1/p-1) - s) - k"
    else:
        case, need, name = "(b)", abs(s), "|s| - k"
    ineqs = ctx.collect([(name, need - kk, True)])
    holds = ctx.all_ok(ineqs)
    return PropertyVerdict("B", holds, f"B-{case}" if holds else "none", ineqs, ctx.exact)


def property_b_prime(d: int, p: float, alpha: float, k: int) -> PropertyVerdict:
    if k < 1:
        raise ValueError("k must be >= 1")
    ctx = _Ctx(p, d, alpha, k)
    dd, pp, a, kk = ctx(d), ctx(p), ctx(alpha), ctx(k)
    if pp < 1:
        case, need, name = "(a)", dd * (1 / pp - 1) + dd / 2 + a, "d(1/p-1) + d/2 + alpha - k"
    else:
        case, need, name = "(b)", dd / 2 + a, "d/2 + alpha - k"
    ineqs = ctx.collect([(name, need - kk, True)])
    holds = ctx.all_ok(ineqs)
    return PropertyVerdict("B'", holds, f"B'-{case}" if holds else "none", ineqs, ctx.exact)


def min_k(spec: SpaceSpec, alpha: float) -> int:
    """Smallest integer k >= 1 for which Properties B and B' both hold."""
    k = 1
    while not (property_b(spec, k).holds and property_b_prime(spec.d, spec.p, alpha, k).holds):
        k += 1
    return k


def regularity_verdicts(spec: SpaceSpec, prior: PriorSpec, r: float | None = None) -> list[PropertyVerdict]:
    """Every verdict relevant to a (space, prior) pair, in a fixed order."""
    if prior.sparse:
        out = [property_a_prime(spec, prior)]
        out.append(property_a_dprime(spec, prior, r if r is not None else (spec.p if not math.isinf(spec.p) else 1.0)))
    else:
        out = [property_a(spec, prior)]
    out.append(property_b(spec, prior.k))
    out.append(property_b_prime(spec.d, spec.p, prior.alpha, prior.k))
    return out
