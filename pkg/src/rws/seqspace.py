"""(Weighted) Besov sequence norms on truncated coefficient fields.

    ||a|| = || ( 2^(j(s + d/2 - d/p)) || ( w(2^-(j - [j != 0]) m) |a_{j,t,m}| )_m ||_p )_{j,t} ||_q

with the polynomial weight w_sigma(x) = (1 + |x|_2^2)^(sigma/2).  Only finite
truncations are handled; p and q may lie in (0, 1).
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Any, Iterator, Mapping

import numpy as np

from .lattice import BasisIndex, n_types, types_at


@dataclass(frozen=True)
class SpaceSpec:
    d: int
    s: float
    p: float
    q: float
    sigma: float = 0.0

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("dimension d must be >= 1")
        if not self.p > 0 or not self.q > 0:
            raise ValueError("p and q must be positive (use math.inf for infinity)")

    @property
    def level_exponent(self) -> float:
        """s + d/2 - d/p (the d/p term vanishes for p = inf)."""
        dp = 0.0 if math.isinf(self.p) else self.d / self.p
        return self.s + self.d / 2 - dp


@dataclass
class CoefficientField:
    """Dense per-level storage of a truncated coefficient sequence.

    ``levels[j]`` has shape ``(n_types(j), 2 cap_j + 1, ..., 2 cap_j + 1)``
    with d spatial axes; shift m sits at array position m + cap_j.  Sampled
    fields also keep the raw template draws (``xi``) and Bernoulli gates
    (``lam``) for the Xi statistics.
    """

    d: int
    levels: dict[int, np.ndarray]
    caps: dict[int, int]
    manifest: Mapping[str, Any] | str = "explicit"
    xi: dict[int, np.ndarray] | None = None
    lam: dict[int, np.ndarray] | None = None

    def __post_init__(self):
        for j, block in self.levels.items():
            side = 2 * self.caps[j] + 1
            want = (n_types(j, self.d),) + (side,) * self.d
            if block.shape != want:
                raise ValueError(f"level {j}: shape {block.shape}, expected {want}")
            if not np.all(np.isfinite(block)):
                raise ValueError(f"level {j} holds non-finite coefficients")

    @property
    def j_max(self) -> int:
        return max(self.levels) if self.levels else -1

    def types(self, j: int) -> range:
        return types_at(j, self.d)

    def _slot(self, idx: BasisIndex) -> tuple[int, ...] | None:
        if idx.d != self.d or idx.j not in self.levels:
            return None
        cap = self.caps[idx.j]
        if max(abs(v) for v in idx.m) > cap:
            return None
        ti = 0 if idx.j == 0 else idx.t - 1
        return (ti,) + tuple(v + cap for v in idx.m)

    def get(self, idx: BasisIndex) -> float:
        slot = self._slot(idx)
        return 0.0 if slot is None else float(self.levels[idx.j][slot])

    def raw_xi(self, idx: BasisIndex) -> float:
        slot = self._slot(idx)
        if self.xi is None or slot is None:
            raise KeyError(idx)
        return float(self.xi[idx.j][slot])

    def items(self) -> Iterator[tuple[BasisIndex, float]]:
        for j in sorted(self.levels):
            cap = self.caps[j]
            block = self.levels[j]
            for ti, t in enumerate(self.types(j)):
                for pos in zip(*np.nonzero(block[ti])):
                    m = tuple(int(v) - cap for v in pos)
                    yield BasisIndex(j, t, m), float(block[ti][pos])

    def __len__(self) -> int:
        return sum(b.size for b in self.levels.values())

    def truncate(self, j_max: int) -> "CoefficientField":
        keep = [j for j in self.levels if j <= j_max]
        pick = lambda src: None if src is None else {j: src[j] for j in keep}
        return CoefficientField(
            self.d,
            {j: self.levels[j] for j in keep},
            {j: self.caps[j] for j in keep},
            self.manifest,
            pick(self.xi),
            pick(self.lam),
        )

    def scaled(self, c: float) -> "CoefficientField":
        return dataclasses.replace(self, levels={j: c * b for j, b in self.levels.items()})

    @classmethod
    def from_coefficients(cls, d: int, coeffs: Mapping[BasisIndex, float]) -> "CoefficientField":
        """Explicit field; each level's cap is the smallest one covering its shifts."""
        caps: dict[int, int] = {}
        for idx, value in coeffs.items():
            if idx.d != d:
                raise ValueError(f"index {idx} does not live in dimension {d}")
            if not math.isfinite(value):
                raise ValueError(f"non-finite coefficient at {idx}")
            caps[idx.j] = max(caps.get(idx.j, 0), max(abs(v) for v in idx.m))
        levels = {
            j: np.zeros((n_types(j, d),) + (2 * cap + 1,) * d) for j, cap in caps.items()
        }
        for idx, value in coeffs.items():
            cap = caps[idx.j]
            ti = 0 if idx.j == 0 else idx.t - 1
            levels[idx.j][(ti,) + tuple(v + cap for v in idx.m)] = value
        return cls(d, dict(sorted(levels.items())), dict(sorted(caps.items())))


def weight_w_sigma(x, sigma: float) -> float:
    """(1 + |x|_2^2)^(sigma/2)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    return float((1.0 + np.dot(x, x)) ** (sigma / 2))


def _weight_grid(j: int, cap: int, d: int, sigma: float) -> np.ndarray | None:
    if sigma == 0:
        return None
    axis = np.arange(-cap, cap + 1, dtype=float) * 2.0 ** -(j - (j != 0))
    sq = axis**2
    total = sq
    for _ in range(d - 1):
        total = np.add.outer(total, sq)
    return (1.0 + total) ** (sigma / 2)


def lp_norm(values: np.ndarray, p: float) -> float:
    """l_p (quasi-)norm with max-rescaling and exactly rounded accumulation."""
    v = np.abs(np.asarray(values, dtype=float)).reshape(-1)
    if v.size == 0:
        return 0.0
    top = float(v.max())
    if top == 0.0 or math.isinf(p):
        return top
    if not math.isfinite(top):
        return math.inf
    return top * math.fsum((v / top) ** p) ** (1.0 / p)


def level_norm(field: CoefficientField, j: int, t: int, spec: SpaceSpec) -> float:
    """l_p over stored shifts of w_sigma(2^-(j - [j != 0]) m) |a_{j,t,m}|."""
    if j not in field.levels:
        return 0.0
    if t not in field.types(j):
        raise ValueError(f"type {t} not allowed at scale {j}")
    ti = 0 if j == 0 else t - 1
    block = np.abs(field.levels[j][ti])
    w = _weight_grid(j, field.caps[j], field.d, spec.sigma)
    if w is not None:
        block = block * w
    return lp_norm(block, spec.p)


@dataclass
class NormReport:
    total: float
    eta1: float
    eta2: float
    per_level: dict[tuple[int, int], float]
    q: float
    truncation: tuple[int, dict[int, int]] = field(default=(0, {}))

    def partial(self, j_max: int) -> float:
        """The norm restricted to levels j <= j_max."""
        return lp_norm(
            np.array([v for (j, _), v in self.per_level.items() if j <= j_max]), self.q
        )

    def level_powers(self) -> dict[int, float]:
        """sum over t of (scaled level norm)^q, per scale (q < inf)."""
        out: dict[int, float] = {}
        for (j, _), v in self.per_level.items():
            out[j] = out.get(j, 0.0) + v**self.q
        return out


def seq_norm(field: CoefficientField, spec: SpaceSpec) -> NormReport:
    if spec.d != field.d:
        raise ValueError("space and field dimensions differ")
    expo = spec.level_exponent
    per_level: dict[tuple[int, int], float] = {}
    for j in sorted(field.levels):
        factor = 2.0 ** (j * expo)
        for t in field.types(j):
            per_level[(j, t)] = factor * level_norm(field, j, t, spec)
    eta1 = per_level.get((0, 0), 0.0)
    eta2 = lp_norm(np.array([v for (j, _), v in per_level.items() if j >= 1]), spec.q)
    total = lp_norm(np.array(list(per_level.values())), spec.q)
    return NormReport(total, eta1, eta2, per_level, spec.q, (field.j_max, dict(field.caps)))


def weight_shift(prior, sigma: float):
    """Move a weight w_sigma into the prior: beta -> beta + sigma, gamma -> gamma + sigma."""
    return dataclasses.replace(prior, beta=prior.beta + sigma, gamma=prior.gamma + sigma)
