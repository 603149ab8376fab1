"""Index-set bookkeeping over Z^d.

Basis indices, lattice cube and shell counts, the shell-ordered shift
enumeration and the lattice weight sums sum_m (1 + |m|_inf / a)^e.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import mpmath
import numpy as np

# Counts are handed to numpy as int64.
COUNT_MAX = 2**63 - 1


def _checked(value: int) -> int:
    if value > COUNT_MAX:
        raise OverflowError(f"lattice count {value} exceeds int64 range")
    return value


def n_types(j: int, d: int) -> int:
    """Number of type vectors at scale j: 1 at j = 0, 2^d - 1 otherwise."""
    return 1 if j == 0 else 2**d - 1


def types_at(j: int, d: int) -> range:
    """Type codes allowed at scale j (bit k set means direction k is M)."""
    return range(0, 1) if j == 0 else range(1, 2**d)


@dataclass(frozen=True, order=True)
class BasisIndex:
    """One wavelet index (j, t, m); ``t`` encodes {F, M}^d with bit 1 = M."""

    j: int
    t: int
    m: tuple[int, ...]

    def __post_init__(self):
        if self.j < 0:
            raise ValueError(f"scale must be nonnegative, got {self.j}")
        d = len(self.m)
        if d < 1:
            raise ValueError("shift must have at least one component")
        if self.j == 0 and self.t != 0:
            raise ValueError("scale 0 only carries the all-F type")
        if self.j >= 1 and not 1 <= self.t < 2**d:
            raise ValueError(f"type {self.t} not in T_{self.j} for d={d}")
        object.__setattr__(self, "m", tuple(int(v) for v in self.m))

    @property
    def d(self) -> int:
        return len(self.m)

    def type_letters(self) -> str:
        return "".join("M" if (self.t >> k) & 1 else "F" for k in range(self.d))


def points_up_to(j: int, d: int) -> int:
    """#{m in Z^d : |m|_inf <= 2^j} = (2^(j+1) + 1)^d."""
    if j < 0 or d < 1:
        raise ValueError("need j >= 0 and d >= 1")
    return _checked((2 ** (j + 1) + 1) ** d)


def shell_count(j: int, d: int) -> int:
    """#{m in Z^d : 2^j < |m|_inf <= 2^(j+1)}."""
    return _checked(points_up_to(j + 1, d) - points_up_to(j, d))


def cube_size(cap: int, d: int) -> int:
    """#{m : |m|_inf <= cap}."""
    if cap < 0:
        raise ValueError("cap must be nonnegative")
    return _checked((2 * cap + 1) ** d)


@dataclass(frozen=True)
class ShellTable:
    d: int
    M: tuple[int, ...]
    N: tuple[int, ...]

    @classmethod
    def build(cls, d: int, j_max: int) -> "ShellTable":
        M = tuple(points_up_to(j, d) for j in range(j_max + 2))
        N = tuple(M[j + 1] - M[j] for j in range(j_max + 1))
        return cls(d=d, M=M[: j_max + 1], N=N)


def enumerate_shifts(d: int, cap: int) -> np.ndarray:
    """All m with |m|_inf <= cap, sorted by sup-norm then lexicographically.

    Returns an int64 array of shape (n, d); row 0 is the origin.
    """
    if cap < 0:
        raise ValueError("cap must be nonnegative")
    cube_size(cap, d)
    axis = range(-cap, cap + 1)
    pts = sorted(itertools.product(axis, repeat=d), key=lambda m: (max(map(abs, m)), m))
    return np.array(pts, dtype=np.int64).reshape(-1, d)


def sup_norm_grid(cap: int, d: int) -> np.ndarray:
    """|m|_inf on the dense cube [-cap, cap]^d (array of shape (2cap+1,)*d)."""
    axis = np.abs(np.arange(-cap, cap + 1, dtype=np.int64))
    if d == 1:
        return axis
    grids = np.meshgrid(*([axis] * d), indexing="ij")
    return np.maximum.reduce(grids)


@lru_cache(maxsize=None)
def _shell_polynomial(d: int) -> tuple[int, ...]:
    # coefficients c_k of (2l+1)^d - (2l-1)^d = sum_k c_k l^k
    coeffs = [0] * d
    for k in range(d + 1):
        term = math.comb(d, k) * 2**k * (1 - (-1) ** (d - k))
        if term:
            coeffs[k] = term
    return tuple(coeffs)


def weight_sum(d: int, a: float, e: float, cutoff: int = 256) -> float:
    """sum over m in Z^d of (1 + |m|_inf / a)^e.

    Shells up to ``cutoff`` are summed exactly; the remaining tail is the
    closed form through Hurwitz zeta values after rewriting the shell size
    as a polynomial in (l + a).  Returns ``math.inf`` when e >= -d.
    """
    if not (math.isfinite(a) and math.isfinite(e)):
        raise ValueError("weight_sum needs finite a and e")
    if a < 1 or d < 1:
        raise ValueError("need a >= 1 and d >= 1")
    if e >= -d:
        return math.inf
    with mpmath.workdps(40):
        a_mp = mpmath.mpf(a)
        e_mp = mpmath.mpf(e)
        poly = _shell_polynomial(d)
        head = mpmath.mpf(1)
        for ell in range(1, cutoff + 1):
            size = sum(c * ell**k for k, c in enumerate(poly))
            head += size * (1 + ell / a_mp) ** e_mp
        # l^k = ((l + a) - a)^k, and (1 + l/a)^e = a^-e (l + a)^e
        tail = mpmath.mpf(0)
        for k, c in enumerate(poly):
            if not c:
                continue
            for i in range(k + 1):
                coef = c * math.comb(k, i) * (-a_mp) ** (k - i)
                tail += coef * mpmath.zeta(-(i + e_mp), cutoff + 1 + a_mp)
        tail *= a_mp ** (-e_mp)
        return float(head + tail)
