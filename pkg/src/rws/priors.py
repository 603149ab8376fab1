"""Besov and Bernoulli-Besov sequence priors.

Coefficients are

    a_{j,t,m} = 2^(j alpha) (j+1)^theta (1 + |m|_inf / 2^j)^(beta + (gamma - beta)[j = 0]) xi_{j,t,m}

(times a Bernoulli gate lambda_{j,t,m} with P(lambda = 1) = 2^(j mu) (1 + |m|_inf / 2^j)^nu
and no theta factor for the sparse family).  Every xi and lambda is a pure
function of (seed, stream, j, t, m) through a splitmix64 hash chain, so any
truncation, any evaluation order and any parallel split see the same draws.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import ndtr, ndtri

from .lattice import BasisIndex, cube_size, n_types, sup_norm_grid, types_at
from .seqspace import CoefficientField

STREAM_XI = 1
STREAM_LAMBDA = 2
STREAM_SIGN = 3

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MUL1 = np.uint64(0xBF58476D1CE4E5B9)
_MUL2 = np.uint64(0x94D049BB133111EB)

DEFAULT_MAX_COEFFICIENTS = 50_000_000


class ResourceError(MemoryError):
    def __init__(self, level: int, requested: int, budget: int):
        super().__init__(f"level {level} needs {requested} coefficients (budget {budget})")
        self.level = level


def _mix(z: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        z = z + _GOLDEN
        z = (z ^ (z >> np.uint64(30))) * _MUL1
        z = (z ^ (z >> np.uint64(27))) * _MUL2
        return z ^ (z >> np.uint64(31))


def _u64(v) -> np.ndarray:
    return np.asarray(v, dtype=np.int64).astype(np.uint64)


def keyed_uniform(seed: int, stream: int, j: int, t: int, shifts: np.ndarray) -> np.ndarray:
    """Uniforms in (0, 1), one per row of ``shifts`` (shape (n, d))."""
    shifts = np.asarray(shifts, dtype=np.int64).reshape(len(shifts), -1)
    head = _mix(np.array([seed & 0xFFFFFFFFFFFFFFFF], dtype=np.uint64))
    for word in (stream, j, t):
        head = _mix(head ^ _u64(word))
    h = np.broadcast_to(head, (shifts.shape[0],)).copy()
    for k in range(shifts.shape[1]):
        h = _mix(h ^ _u64(shifts[:, k]))
    return ((h >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53


@dataclass(frozen=True)
class TemplateDistribution:
    """Law of the i.i.d. factors xi.

    kinds: ``gaussian``, ``uniform`` (on (-1, 1)), ``rademacher``,
    ``pareto`` (symmetrized, |X| = scale * U^(-1/a), experimental),
    ``truncated_gaussian`` (standard normal conditioned on |X| <= R) and
    ``constant`` (X = value; a test hook, value 0 breaks P(X != 0) > 0).
    """

    kind: str = "gaussian"
    a: float | None = None
    scale: float = 1.0
    R: float | None = None
    value: float | None = None

    def __post_init__(self):
        if self.kind not in _SAMPLERS:
            raise ValueError(f"unknown template kind {self.kind!r}")
        if self.kind == "pareto" and not (self.a and self.a > 0):
            raise ValueError("pareto template needs tail index a > 0")
        if self.kind == "truncated_gaussian" and not (self.R and self.R > 0):
            raise ValueError("truncated_gaussian template needs R > 0")
        if self.kind == "constant" and self.value is None:
            raise ValueError("constant template needs a value")

    def transform(self, u: np.ndarray, u_sign: np.ndarray) -> np.ndarray:
        return _SAMPLERS[self.kind](self, u, u_sign)

    @property
    def mean(self) -> float:
        if self.kind == "constant":
            return float(self.value)
        if self.kind == "pareto" and self.a <= 1:
            return math.nan
        return 0.0

    @property
    def variance(self) -> float:
        k = self.kind
        if k == "gaussian":
            return 1.0
        if k == "uniform":
            return 1.0 / 3.0
        if k == "rademacher":
            return 1.0
        if k == "constant":
            return 0.0
        if k == "pareto":
            return self.scale**2 * self.a / (self.a - 2) if self.a > 2 else math.inf
        R = self.R
        # E[X^2 | |X| <= R] for standard normal
        mass = 2 * ndtr(R) - 1
        return 1.0 - 2 * R * math.exp(-R * R / 2) / math.sqrt(2 * math.pi) / mass

    @property
    def bounded(self) -> bool:
        return self.kind in ("uniform", "rademacher", "truncated_gaussian", "constant")

    @property
    def bound(self) -> float:
        return {
            "uniform": 1.0,
            "rademacher": 1.0,
            "truncated_gaussian": self.R,
            "constant": abs(self.value or 0.0),
        }.get(self.kind, math.inf)

    def describe(self) -> str:
        extra = {"pareto": f":a={self.a}:scale={self.scale}", "truncated_gaussian": f":R={self.R}",
                 "constant": f":value={self.value}"}.get(self.kind, "")
        return self.kind + extra

    @classmethod
    def parse(cls, text: str) -> "TemplateDistribution":
        kind, *opts = text.split(":")
        kw = {}
        for opt in opts:
            key, val = opt.split("=")
            kw[key] = float(val)
        return cls(kind, **kw)


def _gaussian(tpl, u, us):
    return ndtri(u)


def _uniform(tpl, u, us):
    return 2.0 * u - 1.0


def _rademacher(tpl, u, us):
    return np.where(u < 0.5, -1.0, 1.0)


def _pareto(tpl, u, us):
    return np.where(us < 0.5, -1.0, 1.0) * tpl.scale * u ** (-1.0 / tpl.a)


def _truncated(tpl, u, us):
    lo = ndtr(-tpl.R)
    return ndtri(lo + u * (1.0 - 2.0 * lo))


def _constant(tpl, u, us):
    return np.full_like(u, float(tpl.value))


_SAMPLERS: dict[str, Callable] = {
    "gaussian": _gaussian,
    "uniform": _uniform,
    "rademacher": _rademacher,
    "pareto": _pareto,
    "truncated_gaussian": _truncated,
    "constant": _constant,
}

BESOV = "besov"
BERNOULLI = "bernoulli_besov"


@dataclass(frozen=True)
class PriorSpec:
    family: str
    alpha: float
    beta: float
    gamma: float
    theta: float = 0.0
    mu: float = 0.0
    nu: float = 0.0
    k: int = 1
    template: TemplateDistribution = field(default_factory=TemplateDistribution)
    d: int = 1

    def __post_init__(self):
        if self.family not in (BESOV, BERNOULLI):
            raise ValueError(f"unknown prior family {self.family!r}")
        if self.family == BERNOULLI:
            if self.mu > 0 or self.nu > 0:
                raise ValueError("Bernoulli-Besov prior needs mu <= 0 and nu <= 0")
            if self.theta != 0:
                raise ValueError("theta is not a Bernoulli-Besov parameter")
        if self.d < 1:
            raise ValueError("d must be >= 1")

    @classmethod
    def besov(cls, alpha, beta, gamma, theta=0.0, *, k=1, template=None, d=1) -> "PriorSpec":
        return cls(BESOV, alpha, beta, gamma, theta, 0.0, 0.0, k, template or TemplateDistribution(), d)

    @classmethod
    def bernoulli(cls, alpha, beta, gamma, mu, nu, *, k=1, template=None, d=1) -> "PriorSpec":
        return cls(BERNOULLI, alpha, beta, gamma, 0.0, mu, nu, k, template or TemplateDistribution(), d)

    @property
    def sparse(self) -> bool:
        return self.family == BERNOULLI

    def manifest(self) -> dict[str, str]:
        out = {
            "family": self.family,
            "d": str(self.d),
            "alpha": repr(float(self.alpha)),
            "beta": repr(float(self.beta)),
            "gamma": repr(float(self.gamma)),
            "k": str(self.k),
            "template": self.template.describe(),
        }
        if self.sparse:
            out.update(mu=repr(float(self.mu)), nu=repr(float(self.nu)))
        else:
            out["theta"] = repr(float(self.theta))
        return out


def bernoulli_prob(mu: float, nu: float, j: int, m) -> float:
    """2^(j mu) (1 + |m|_inf / 2^j)^nu."""
    if mu > 0 or nu > 0:
        raise ValueError("mu and nu must be <= 0")
    norm = max(abs(int(v)) for v in np.atleast_1d(m))
    return 2.0 ** (j * mu) * (1.0 + norm / 2.0**j) ** nu


def deterministic_factor(prior: PriorSpec, j: int, sup_norm) -> np.ndarray | float:
    """Everything in a_{j,t,m} except xi (and lambda)."""
    expo = prior.gamma if j == 0 else prior.beta
    out = 2.0 ** (j * prior.alpha) * (1.0 + np.asarray(sup_norm, dtype=float) / 2.0**j) ** expo
    if not prior.sparse and prior.theta != 0:
        out = out * float(j + 1) ** prior.theta
    return out


def _draw(prior: PriorSpec, seed: int, j: int, t: int, shifts: np.ndarray):
    tpl = prior.template
    u = keyed_uniform(seed, STREAM_XI, j, t, shifts)
    u_sign = keyed_uniform(seed, STREAM_SIGN, j, t, shifts) if tpl.kind == "pareto" else u
    xi = tpl.transform(u, u_sign)
    lam = None
    if prior.sparse:
        norms = np.abs(shifts).max(axis=1)
        rho = 2.0 ** (j * prior.mu) * (1.0 + norms / 2.0**j) ** prior.nu
        lam = (keyed_uniform(seed, STREAM_LAMBDA, j, t, shifts) < rho).astype(float)
    return xi, lam


def deterministic_coeff(prior: PriorSpec, idx: BasisIndex, seed: int) -> float:
    """a_{j,t,m} for one index; equal to the entry of any field sampled with ``seed``."""
    shifts = np.array([idx.m], dtype=np.int64)
    xi, lam = _draw(prior, seed, idx.j, idx.t, shifts)
    value = deterministic_factor(prior, idx.j, max(abs(v) for v in idx.m)) * xi[0]
    if lam is not None:
        value = value * lam[0]
    return float(value)


def default_cap(j: int) -> int:
    return max(2 ** (j + 2), 32)


def window_cap(radius: float, order: int) -> Callable[[int], int]:
    """Shift bound covering every basis function that touches [-radius, radius]."""

    def cap(j: int) -> int:
        scale = 1.0 if j == 0 else 2.0 ** (j - 1)
        return int(math.ceil(scale * radius)) + 2 * order

    return cap


def _cube_shifts(cap: int, d: int) -> np.ndarray:
    axis = np.arange(-cap, cap + 1, dtype=np.int64)
    if d == 1:
        return axis.reshape(-1, 1)
    mesh = np.meshgrid(*([axis] * d), indexing="ij")
    return np.stack([g.reshape(-1) for g in mesh], axis=1)


def sample_level(prior: PriorSpec, j: int, cap: int, seed: int):
    """(values, xi, lam) arrays for one scale, shaped like CoefficientField levels."""
    d = prior.d
    shape = (2 * cap + 1,) * d
    shifts = _cube_shifts(cap, d)
    factor = deterministic_factor(prior, j, sup_norm_grid(cap, d))
    vals, xis, lams = [], [], []
    for t in types_at(j, d):
        xi, lam = _draw(prior, seed, j, t, shifts)
        xi = xi.reshape(shape)
        xis.append(xi)
        value = factor * xi
        if lam is not None:
            lam = lam.reshape(shape)
            lams.append(lam)
            value = value * lam
        vals.append(value)
    return np.array(vals), np.array(xis), (np.array(lams) if prior.sparse else None)


def sample_field(
    prior: PriorSpec,
    j_max: int,
    seed: int,
    cap: Callable[[int], int] = default_cap,
    cap_name: str = "default",
    max_coefficients: int = DEFAULT_MAX_COEFFICIENTS,
) -> CoefficientField:
    if j_max < 0:
        raise ValueError("j_max must be >= 0")
    caps = {j: int(cap(j)) for j in range(j_max + 1)}
    total = 0
    for j, c in caps.items():
        if c < 0:
            raise ValueError(f"cap({j}) must be >= 0")
        total += n_types(j, prior.d) * cube_size(c, prior.d)
        if total > max_coefficients:
            raise ResourceError(j, total, max_coefficients)
    levels, xi, lam = {}, {}, {}
    for j, c in caps.items():
        levels[j], xi[j], lv = sample_level(prior, j, c, seed)
        if lv is not None:
            lam[j] = lv
    manifest = dict(prior.manifest())
    manifest.update(seed=str(seed), J_max=str(j_max), cap=cap_name)
    return CoefficientField(prior.d, levels, caps, manifest, xi, lam if prior.sparse else None)


@dataclass(frozen=True)
class MomentCondition:
    """A template hypothesis.

    kinds: ``moment`` (E|X|^(p(1+eps)) < inf), ``moment_max``
    (E|X|^((1+eps) max(r, p)) < inf), ``exp`` (E exp(C|X|^max(r, p)) < inf
    for some C > 0), ``log`` (E|X|^p log2+|X| < inf) and ``bounded``
    (|X| <= R a.s.).  ``eps=None`` means "for some eps > 0".
    """

    kind: str
    p: float = 2.0
    r: float = 0.0
    eps: float | None = None


def template_moment_ok(template: TemplateDistribution, condition: MomentCondition) -> bool:
    kind = condition.kind
    if kind == "bounded":
        return template.bounded
    if kind == "exp":
        if template.bounded:
            return True
        if template.kind in ("gaussian",):
            return max(condition.r, condition.p) <= 2
        return False
    if kind == "log":
        return template.kind != "pareto" or condition.p < template.a
    if kind in ("moment", "moment_max"):
        base = condition.p if kind == "moment" else max(condition.r, condition.p)
        if template.kind != "pareto":
            return True
        if condition.eps is None:
            return base < template.a
        return base * (1 + condition.eps) < template.a
    raise ValueError(f"unknown moment condition {kind!r}")
