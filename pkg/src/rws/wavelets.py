"""Daubechies wavelet systems on R^d.

Filters come from spectral factorization at high working precision, the
scaling function and wavelet are tabulated on dyadic grids by the cascade
(refinement) recursion, and tensor products give the basis

    Psi_{0,F,m}(x) = prod_k psi_F(x_k - m_k)
    Psi_{j,t,m}(x) = 2^((j-1)d/2) prod_k psi_{t_k}(2^(j-1) x_k - m_k),  j >= 1.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import TYPE_CHECKING, Iterable, Sequence

import mpmath
import numpy as np

from .lattice import BasisIndex

if TYPE_CHECKING:
    from .seqspace import CoefficientField

MAX_ORDER = 12


class CascadeError(ArithmeticError):
    """The integer-grid refinement matrix has no clean eigenvalue 1."""


@dataclass(frozen=True)
class FilterPair:
    order: int
    h: np.ndarray
    g: np.ndarray

    @property
    def support(self) -> int:
        return 2 * self.order - 1


@lru_cache(maxsize=None)
def _daubechies_h(order: int) -> tuple[float, ...]:
    if order == 1:
        return (1 / math.sqrt(2), 1 / math.sqrt(2))
    with mpmath.workdps(60):
        # |m0|^2 = cos^2N(w/2) P(sin^2(w/2)),  P(y) = sum_k C(N-1+k, k) y^k
        p_coeffs = [mpmath.binomial(order - 1 + k, k) for k in range(order)]
        y_roots = mpmath.polyroots(p_coeffs[::-1], maxsteps=500, extraprec=200)
        z_roots = []
        for y in y_roots:
            # y = (2 - z - 1/z) / 4  <=>  z^2 - (2 - 4y) z + 1 = 0
            b = 2 - 4 * y
            disc = mpmath.sqrt(b * b - 4)
            z1, z2 = (b + disc) / 2, (b - disc) / 2
            z_roots.append(z1 if abs(z1) < 1 else z2)
        poly = [mpmath.mpc(1)]
        for root in [mpmath.mpf(-1)] * order + z_roots:
            nxt = [mpmath.mpc(0)] * (len(poly) + 1)
            for i, c in enumerate(poly):
                nxt[i] += c
                nxt[i + 1] -= c * root
            poly = nxt
        coeffs = [mpmath.re(c) for c in poly]
        total = mpmath.fsum(coeffs)
        scale = mpmath.sqrt(2) / total
        h = [c * scale for c in coeffs]
        if h[0] < 0 or abs(h[0]) < abs(h[-1]):
            h = h[::-1]
        return tuple(float(c) for c in h)


def scaling_filter(order: int) -> FilterPair:
    """Minimal-phase Daubechies filter with ``order`` vanishing moments."""
    if not isinstance(order, (int, np.integer)) or not 1 <= order <= MAX_ORDER:
        raise ValueError(f"Daubechies order must be in 1..{MAX_ORDER}, got {order!r}")
    h = np.array(_daubechies_h(int(order)))
    k = np.arange(h.size)
    g = (-1.0) ** k * h[::-1]
    h.flags.writeable = False
    g.flags.writeable = False
    return FilterPair(order=int(order), h=h, g=g)


def _integer_values(filters: FilterPair) -> np.ndarray:
    """psi_F at the integers 0..2N-1."""
    n = filters.order
    length = 2 * n
    values = np.zeros(length)
    if n == 1:
        values[0] = 1.0
        return values
    h = filters.h
    interior = np.arange(1, length - 1)
    A = np.zeros((interior.size, interior.size))
    for r, i in enumerate(interior):
        for c, k in enumerate(interior):
            idx = 2 * i - k
            if 0 <= idx < length:
                A[r, c] = math.sqrt(2) * h[idx]
    eigvals, eigvecs = np.linalg.eig(A)
    best = int(np.argmin(np.abs(eigvals - 1)))
    if abs(eigvals[best] - 1) > 1e-8:
        raise CascadeError(f"no eigenvalue 1 in refinement matrix (closest {eigvals[best]})")
    vec = np.real(eigvecs[:, best])
    vec = vec / vec.sum()
    values[1 : length - 1] = vec
    return values


@dataclass(frozen=True)
class WaveletSystem:
    """psi_F (``phi``) and psi_M (``psi``) tabulated at i / 2^depth on [0, 2N-1]."""

    filters: FilterPair
    depth: int
    phi: np.ndarray
    psi: np.ndarray
    d: int = 1
    k_reg: float | None = None

    @property
    def order(self) -> int:
        return self.filters.order

    @property
    def step(self) -> float:
        return 2.0**-self.depth

    @property
    def grid(self) -> np.ndarray:
        return np.arange(self.phi.size) * self.step

    def with_dimension(self, d: int) -> "WaveletSystem":
        return WaveletSystem(self.filters, self.depth, self.phi, self.psi, d, self.k_reg)

    def table(self, kind: int) -> np.ndarray:
        return self.psi if kind else self.phi

    def eval_1d(self, kind: int, u: np.ndarray) -> np.ndarray:
        """psi_F (kind 0) or psi_M (kind 1) between table nodes; zero off support.

        Continuous orders interpolate linearly.  Haar functions are constant on
        every table cell, so order 1 takes the left node, which is exact.
        """
        u = np.asarray(u, dtype=float)
        pos = u * 2.0**self.depth
        tab = self.table(kind)
        last = tab.size - 1
        inside = (pos >= 0) & (pos < last)
        out = np.zeros_like(pos)
        p = pos[inside]
        i0 = np.floor(p).astype(np.int64)
        frac = p - i0
        if self.order == 1:
            out[inside] = tab[i0]
        else:
            out[inside] = tab[i0] * (1 - frac) + tab[i0 + 1] * frac
        return out


def cascade(filters: FilterPair, depth: int, d: int = 1, k_reg: float | None = None) -> WaveletSystem:
    if depth < 4:
        raise ValueError("cascade depth must be at least 4")
    n = filters.order
    h, g = filters.h, filters.g
    sqrt2 = math.sqrt(2)
    phi = _integer_values(filters)  # level 0: spacing 1, indices 0..2N-1
    for level in range(1, depth + 1):
        prev = phi
        half = 2 ** (level - 1)
        size = (2 * n - 1) * 2**level + 1
        nxt = np.zeros(size)
        idx = np.arange(size)
        for k in range(2 * n):
            src = idx - k * half
            ok = (src >= 0) & (src < prev.size)
            nxt[ok] += sqrt2 * h[k] * prev[src[ok]]
        phi = nxt
        if level == depth:
            psi = np.zeros(size)
            for k in range(2 * n):
                src = idx - k * half
                ok = (src >= 0) & (src < prev.size)
                psi[ok] += sqrt2 * g[k] * prev[src[ok]]
    if n == 1:
        # half-open support [0, 1): drop the right endpoint
        phi[-1] = 0.0
        psi[-1] = 0.0
    phi.flags.writeable = False
    psi.flags.writeable = False
    return WaveletSystem(filters, depth, phi, psi, d, k_reg)


def _kind_bits(t: int, d: int) -> list[int]:
    return [(t >> k) & 1 for k in range(d)]


def eval_basis(system: WaveletSystem, idx: BasisIndex, x) -> np.ndarray | float:
    """Psi_{j,t,m} at one point (shape (d,)) or many points (shape (n, d))."""
    pts = np.asarray(x, dtype=float)
    scalar = pts.ndim <= 1
    pts = pts.reshape(-1, idx.d)
    scale = 1.0 if idx.j == 0 else 2.0 ** (idx.j - 1)
    amp = 1.0 if idx.j == 0 else 2.0 ** ((idx.j - 1) * idx.d / 2)
    out = np.full(pts.shape[0], amp)
    for k, kind in enumerate(_kind_bits(idx.t, idx.d)):
        out *= system.eval_1d(kind, scale * pts[:, k] - idx.m[k])
    return float(out[0]) if scalar else out


def synthesize(system: WaveletSystem, field: "CoefficientField", grid, workers: int = 1) -> np.ndarray:
    """sum_{(j,t,m) stored} a_{j,t,m} Psi_{j,t,m}(x) at every grid point.

    Each point is an exactly rounded sum (math.fsum) of its contributions,
    so the result does not depend on summation order or on ``workers``.
    """
    d = field.d
    pts = np.asarray(grid, dtype=float).reshape(-1, d)
    if workers > 1 and pts.shape[0] > 1:
        from concurrent.futures import ThreadPoolExecutor

        chunks = np.array_split(pts, workers)
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda c: _synthesize_chunk(system, field, c), chunks))
        return np.concatenate(parts)
    return _synthesize_chunk(system, field, pts)


def _synthesize_chunk(system: WaveletSystem, field: "CoefficientField", pts: np.ndarray) -> np.ndarray:
    d = field.d
    support = system.filters.support
    terms: list[np.ndarray] = []
    for j, block in field.levels.items():
        cap = field.caps[j]
        scale = 1.0 if j == 0 else 2.0 ** (j - 1)
        amp = 1.0 if j == 0 else 2.0 ** ((j - 1) * d / 2)
        u = scale * pts
        base = np.floor(u).astype(np.int64)
        for offsets in itertools.product(range(support), repeat=d):
            m = base - np.array(offsets, dtype=np.int64)
            inside = np.all(np.abs(m) <= cap, axis=1)
            if not inside.any():
                continue
            flat = np.ravel_multi_index(tuple((m[inside] + cap).T), (2 * cap + 1,) * d)
            local = u[inside] - m[inside]
            for ti, t in enumerate(field.types(j)):
                coef = block[ti].reshape(-1)[flat]
                if not coef.any():
                    continue
                val = np.full(coef.shape, amp) * coef
                for k, kind in enumerate(_kind_bits(t, d)):
                    val *= system.eval_1d(kind, local[:, k])
                full = np.zeros(pts.shape[0])
                full[inside] = val
                terms.append(full)
    if not terms:
        return np.zeros(pts.shape[0])
    stacked = np.array(terms)
    return np.array([math.fsum(col) for col in stacked.T])


def check_vanishing_moments(system: WaveletSystem, up_to: int) -> float:
    """max over l <= up_to of |Riemann sum of x^l psi_M(x)| on the cascade grid."""
    if up_to >= system.order:
        raise ValueError(f"moment order {up_to} not guaranteed for Daubechies-{system.order}")
    x = system.grid
    return max(abs(math.fsum(x**ell * system.psi) * system.step) for ell in range(up_to + 1))


def _common_grid(system: WaveletSystem, indices: Sequence[BasisIndex]) -> tuple[np.ndarray, float]:
    top = max(max(i.j for i in indices) - 1, 0)
    step = system.step / 2**top
    lo = np.full(indices[0].d, np.inf)
    hi = np.full(indices[0].d, -np.inf)
    for i in indices:
        scale = 1.0 if i.j == 0 else 2.0 ** (i.j - 1)
        m = np.array(i.m, dtype=float)
        lo = np.minimum(lo, m / scale)
        hi = np.maximum(hi, (m + system.filters.support) / scale)
    axes = [np.arange(np.floor(l / step), np.ceil(u / step) + 1) * step for l, u in zip(lo, hi)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.reshape(-1) for g in mesh], axis=1), step


def inner_product(system: WaveletSystem, a: BasisIndex, b: BasisIndex) -> float:
    """Dyadic-grid quadrature of <Psi_a, Psi_b>."""
    pts, step = _common_grid(system, [a, b])
    va = eval_basis(system, a, pts)
    vb = eval_basis(system, b, pts)
    return math.fsum(va * vb) * step**a.d


def check_orthonormality(system: WaveletSystem, pairs: Iterable[tuple[BasisIndex, BasisIndex]]) -> float:
    """max |<Psi_a, Psi_b> - delta_ab| over the given pairs."""
    worst = 0.0
    for a, b in pairs:
        target = 1.0 if a == b else 0.0
        worst = max(worst, abs(inner_product(system, a, b) - target))
    return worst
