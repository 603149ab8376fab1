"""Xi statistics, Monte Carlo regularity experiments and auxiliary probability-inequality checks.

All Monte Carlo work is split into trials keyed by (seed, trial index);
trials may run on a thread pool, and results are always reduced in trial
order with exactly rounded sums, so every output is independent of the
worker count.
"""
from __future__ import annotations

import math
import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .conditions import property_a, property_a_prime
from .lattice import ShellTable, points_up_to, shell_count, sup_norm_grid
from .priors import PriorSpec, default_cap, sample_field
from .seqspace import CoefficientField, SpaceSpec, lp_norm, seq_norm

CONVERGENT = "Convergent"
DIVERGENT = "Divergent"
INCONCLUSIVE = "Inconclusive"

SLOPE_CONVERGENT = 0.02
SLOPE_DIVERGENT = 0.10
# partial sums of j^kappa diverge iff kappa >= -1
LOG_DIAGNOSTIC_KAPPA = -1.0
HEAVY_TAIL_RATIO = 0.5
# Hill estimate on the top n/20 order statistics; a finite mean needs tail index > 1
HILL_FRACTION = 20
HILL_Z = 2.0
HILL_MIN_K = 10


def trial_seed(seed: int, trial: int) -> int:
    return int(np.random.SeedSequence([seed, trial]).generate_state(1, dtype=np.uint64)[0])


def _map_trials(fn: Callable[[int], object], trials: int, workers: int = 1) -> list:
    if workers <= 1:
        return [fn(i) for i in range(trials)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, range(trials)))


def _ls_slope(x: Sequence[float], y: Sequence[float]) -> float:
    xs = np.asarray(x, dtype=float)
    ys = np.asarray(y, dtype=float)
    xc = xs - xs.mean()
    return math.fsum(xc * (ys - ys.mean())) / math.fsum(xc * xc)


def _mean_se(values: Sequence[float]) -> tuple[float, float]:
    v = np.asarray(values, dtype=float)
    n = v.size
    mean = math.fsum(v) / n
    if n < 2 or not math.isfinite(mean):
        return mean, (0.0 if n < 2 else math.inf)
    top = float(np.abs(v).max())
    if top == 0:
        return mean, 0.0
    # rescale so squared deviations cannot overflow
    var = math.fsum(((v - mean) / top) ** 2) / (n - 1)
    return mean, top * math.sqrt(var / n)


# ---------------------------------------------------------------- Xi statistics


@dataclass
class XiStatistic:
    per_type: dict[int, float]
    overall: float
    per_level: dict[tuple[int, int], float]
    truncation: tuple[int, dict[int, int]]

    def up_to(self, j_max: int) -> float:
        """Xi restricted to stored scales j <= j_max."""
        vals = [v for (j, _), v in self.per_level.items() if j <= j_max]
        return max(vals) if vals else 0.0


def _level_xi(values: np.ndarray, radii: np.ndarray, cap: int, j: int, d: int) -> float | None:
    """(1/M_j) sum_{cube} x + sup_{l >= j} (1/N_l) sum_{shell l} x over one stored level."""
    if 2**j > cap:
        return None
    by_radius = np.bincount(radii.reshape(-1), weights=values.reshape(-1), minlength=cap + 1)
    cube = math.fsum(by_radius[: 2**j + 1]) / points_up_to(j, d)
    shells = []
    ell = j
    while 2 ** (ell + 1) <= cap:
        shells.append(math.fsum(by_radius[2**ell + 1 : 2 ** (ell + 1) + 1]) / shell_count(ell, d))
        ell += 1
    return cube + (max(shells) if shells else 0.0)


def _xi_from_weights(field: CoefficientField, weighted: dict[int, np.ndarray]) -> XiStatistic:
    per_level: dict[tuple[int, int], float] = {}
    for j in sorted(weighted):
        cap = field.caps[j]
        radii = sup_norm_grid(cap, field.d)
        for ti, t in enumerate(field.types(j)):
            val = _level_xi(weighted[j][ti], radii, cap, j, field.d)
            if val is not None:
                per_level[(j, t)] = val
    per_type: dict[int, float] = {}
    for (j, t), v in per_level.items():
        per_type[t] = max(per_type.get(t, 0.0), v)
    overall = max(per_type.values()) if per_type else 0.0
    return XiStatistic(per_type, overall, per_level, (field.j_max, dict(field.caps)))


def _raw_xi(field: CoefficientField) -> dict[int, np.ndarray]:
    # explicit fields carry no separate draws: their values are the xi
    return field.xi if field.xi is not None else field.levels


def xi_statistic(field: CoefficientField, p: float, shells: ShellTable | None = None) -> XiStatistic:
    """Xi = max_t sup_j ( cube average of |xi|^p + sup_{l>=j} shell average ).

    Sups run over stored levels whose cube {|m| <= 2^j} and shells
    {2^l < |m| <= 2^(l+1)} are completely stored, so the value is a lower
    bound for the untruncated statistic.
    """
    if math.isinf(p) or not p > 0:
        raise ValueError("Xi is defined for 0 < p < inf")
    if shells is not None and shells.d != field.d:
        raise ValueError("shell table dimension differs from field")
    raw = _raw_xi(field)
    return _xi_from_weights(field, {j: np.abs(x) ** p for j, x in raw.items()})


def _rho_grid(j: int, cap: int, d: int, mu: float, nu: float) -> np.ndarray:
    return 2.0 ** (j * mu) * (1.0 + sup_norm_grid(cap, d) / 2.0**j) ** nu


def xi_tilde_statistic(
    field: CoefficientField,
    p: float,
    r: float,
    delta: float,
    mu: float,
    nu: float,
    beta: float | None = None,
    shells: ShellTable | None = None,
) -> XiStatistic:
    """Xi with summands rho_{j,m}^((p / max(r,p)) (delta - 1)) lambda |xi|^p."""
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    if math.isinf(p) or not p > 0 or not r > 0:
        raise ValueError("need 0 < p < inf and r > 0")
    top = max(r, p)
    beta = _field_beta(field) if beta is None else beta
    if beta is not None and not beta * p + field.d + nu * p * (1 - delta) / top < 0:
        raise ValueError("precondition beta p + d + nu p (1 - delta) / max(r,p) < 0 fails")
    raw = _raw_xi(field)
    lam = field.lam
    weighted = {}
    for j, x in raw.items():
        w = _rho_grid(j, field.caps[j], field.d, mu, nu) ** (p / top * (delta - 1))
        gate = lam[j] if lam is not None else 1.0
        weighted[j] = w * gate * np.abs(x) ** p
    return _xi_from_weights(field, weighted)


def default_delta(spec: SpaceSpec, prior: PriorSpec, r: float) -> float:
    """Midpoint of the admissible delta interval implied by strict Property A''."""
    top = max(r, spec.p)
    smooth = spec.s + spec.d / 2 + prior.alpha
    bounds = [1.0]
    # each strict inequality x + c (1 - delta) < 0 with c <= 0 holds for delta < 1 + x / c
    for x, c in (
        (prior.beta * spec.p + spec.d, prior.nu * spec.p / top),
        (prior.gamma * spec.p + spec.d, prior.nu * spec.p / top),
        (smooth, prior.mu / top),
    ):
        if x >= 0:
            if c >= 0:
                raise ValueError("strict Property A'' fails: no admissible delta")
            bounds.append(1 + x / c)
    upper = min(bounds)
    if upper <= 0:
        raise ValueError("no admissible delta in (0, 1)")
    return upper / 2


def _field_beta(field: CoefficientField) -> float | None:
    if isinstance(field.manifest, dict) and "beta" in field.manifest:
        return float(field.manifest["beta"])
    return None


@dataclass
class MasterBound:
    ratio: float
    per_level: dict[tuple[int, int], float]
    xi: float

    def spread(self, j_max: int | None = None) -> float:
        vals = [v for (j, _), v in self.per_level.items() if j_max is None or j <= j_max]
        return max(vals) / min(vals)


def master_bound_ratio(
    field: CoefficientField,
    spec: SpaceSpec,
    beta: float | None = None,
    shells: ShellTable | None = None,
) -> MasterBound:
    """Z_{j,t} / (2^(jd/p) Xi^(1/p)) with Z_{j,t} = || (1 + |m|/2^j)^beta |xi| ||_p."""
    p, d = spec.p, field.d
    if math.isinf(p):
        raise ValueError("master bound needs p < inf")
    beta = _field_beta(field) if beta is None else beta
    if beta is None:
        raise ValueError("beta unknown: pass it explicitly for explicit fields")
    if not beta < -d / p:
        raise ValueError(f"precondition beta < -d/p fails: beta={beta}, -d/p={-d / p}")
    xi = xi_statistic(field, p, shells)
    if xi.overall == 0:
        raise ValueError("Xi vanishes on this truncation")
    raw = _raw_xi(field)
    per_level = {}
    for j in sorted(raw):
        cap = field.caps[j]
        w = (1.0 + sup_norm_grid(cap, d) / 2.0**j) ** beta
        for ti, t in enumerate(field.types(j)):
            z = lp_norm(w * np.abs(raw[j][ti]), p)
            per_level[(j, t)] = z / (2.0 ** (j * d / p) * xi.overall ** (1 / p))
    return MasterBound(max(per_level.values()), per_level, xi.overall)


# ---------------------------------------------------------------- phase experiments


@dataclass
class PhaseVerdict:
    classification: str
    slope: float
    per_trial: list[float]
    diagnostic: str
    j_list: list[int]
    norms: list[list[float]]
    log_kappa: float | None = None
    prior: PriorSpec | None = None
    spec: SpaceSpec | None = None
    property_holds: bool | None = None  # A (dense) or A' (sparse) for the classified prior

    def rows(self):
        for i, (slope, norms) in enumerate(zip(self.per_trial, self.norms)):
            yield [i, slope, *norms]


def classify_slope(slope: float) -> str:
    if slope < SLOPE_CONVERGENT:
        return CONVERGENT
    if slope > SLOPE_DIVERGENT:
        return DIVERGENT
    return INCONCLUSIVE


def _trial_slope(j_tail: Sequence[int], norms: Sequence[float]) -> float:
    if any(not math.isfinite(v) for v in norms):
        return math.inf
    if any(v <= 0 for v in norms):
        return 0.0 if all(v == 0 for v in norms) else math.inf
    return _ls_slope(j_tail, [math.log2(v) for v in norms])


def phase_classify(
    prior: PriorSpec,
    spec: SpaceSpec,
    j_list: Sequence[int],
    trials: int = 50,
    seed: int = 0,
    cap: Callable[[int], int] = default_cap,
    workers: int = 1,
) -> PhaseVerdict:
    """Empirical convergent/divergent call from the growth of truncated norms.

    Per trial the least-squares slope of log2(partial norm) against J over
    the last four J values is computed; the median slope is thresholded.
    Inside the inconclusive band (and for q < inf) the trial-median level
    contributions sum_t (level norm)^q are regressed against log(j + 1) over
    the same window; an exponent kappa >= -1 means the q-th power of the
    norm keeps growing (at least logarithmically) and the run is called
    divergent.
    """
    j_list = sorted(int(j) for j in j_list)
    if len(j_list) < 4:
        raise ValueError("need at least 4 truncation levels")
    if trials < 20:
        raise ValueError("need at least 20 trials")
    top = j_list[-1]
    tail = j_list[-4:]

    def run(i: int):
        fld = sample_field(prior, top, trial_seed(seed, i), cap)
        rep = seq_norm(fld, spec)
        norms = [rep.partial(J) for J in j_list]
        powers = rep.level_powers() if not math.isinf(spec.q) else {}
        return norms, _trial_slope(tail, norms[-4:]), powers

    results = _map_trials(run, trials, workers)
    slopes = [r[1] for r in results]
    median = statistics.median(slopes)
    label = classify_slope(median)
    diagnostic = "slope"
    kappa = None
    if label == INCONCLUSIVE and not math.isinf(spec.q):
        js = list(range(tail[0], tail[-1] + 1))
        med = [statistics.median(r[2].get(j, 0.0) for r in results) for j in js]
        if all(v > 0 for v in med):
            kappa = _ls_slope([math.log(j + 1) for j in js], [math.log(v) for v in med])
            label = DIVERGENT if kappa >= LOG_DIAGNOSTIC_KAPPA else CONVERGENT
            diagnostic = "log"
    holds = (property_a_prime if prior.sparse else property_a)(spec, prior).holds
    return PhaseVerdict(label, median, slopes, diagnostic, j_list, [r[0] for r in results],
                        kappa, prior, spec, holds)


# ---------------------------------------------------------------- moments and MGF


def sample_norms(
    prior: PriorSpec,
    spec: SpaceSpec,
    trials: int,
    j_max: int,
    seed: int,
    cap: Callable[[int], int] = default_cap,
    workers: int = 1,
) -> np.ndarray:
    def run(i: int) -> float:
        return seq_norm(sample_field(prior, j_max, trial_seed(seed, i), cap), spec).total

    return np.array(_map_trials(run, trials, workers))


def max_to_sum(values: Sequence[float]) -> float:
    v = np.abs(np.asarray(values, dtype=float))
    total = math.fsum(v)
    return float(v.max() / total) if total > 0 else 0.0


def hill_tail_index(values: Sequence[float], k: int | None = None) -> float:
    """Hill estimator of the tail index from the k largest positive values."""
    x = np.sort(np.abs(np.asarray(values, dtype=float)))[::-1]
    x = x[x > 0]
    if k is None:
        k = max(x.size // HILL_FRACTION, 2)
    if x.size <= k:
        return math.inf
    spacings = np.log(x[:k]) - math.log(x[k])
    h = math.fsum(spacings) / k
    return 1.0 / h if h > 0 else math.inf


@dataclass(frozen=True)
class HeavyTailCheck:
    """Non-stabilization diagnostics for a sample whose mean is being estimated.

    ``flagged`` when one trial carries more than half the total, or when the
    Hill tail index does not clear 1 by ``HILL_Z`` standard errors (so a
    finite mean cannot be established from the sample).  The Hill part needs
    at least ``HILL_MIN_K`` order statistics, i.e. 200 trials.
    """

    max_to_sum: float
    hill_index: float
    k: int

    @property
    def flagged(self) -> bool:
        if self.max_to_sum > HEAVY_TAIL_RATIO:
            return True
        if self.k < HILL_MIN_K:
            return False
        return self.hill_index * (1 - HILL_Z / math.sqrt(self.k)) < 1

    @classmethod
    def of(cls, values: Sequence[float]) -> "HeavyTailCheck":
        v = np.asarray(values, dtype=float)
        k = max(v.size // HILL_FRACTION, 2)
        return cls(max_to_sum(v), hill_tail_index(v, k), k)


@dataclass
class MomentEstimate:
    mean: float
    se: float
    values: np.ndarray
    tail: HeavyTailCheck

    @property
    def max_to_sum(self) -> float:
        return self.tail.max_to_sum

    @property
    def heavy_tailed(self) -> bool:
        """The running mean has not stabilized (see HeavyTailCheck)."""
        return self.tail.flagged


def estimate_moment(
    prior: PriorSpec,
    spec: SpaceSpec,
    r: float,
    trials: int,
    j_max: int,
    seed: int = 0,
    cap: Callable[[int], int] = default_cap,
    workers: int = 1,
) -> MomentEstimate:
    if trials < 30:
        raise ValueError("need at least 30 trials")
    vals = sample_norms(prior, spec, trials, j_max, seed, cap, workers) ** r
    mean, se = _mean_se(vals)
    return MomentEstimate(mean, se, vals, HeavyTailCheck.of(vals))


def closed_form_second_moment(prior: PriorSpec, spec: SpaceSpec, j_max: int,
                              cap: Callable[[int], int] = default_cap) -> float:
    """E||a||^2 for p = q = 2, sigma = 0: sum of squared deterministic factors times E xi^2."""
    from .priors import deterministic_factor

    if spec.p != 2 or spec.q != 2 or spec.sigma != 0:
        raise ValueError("closed form needs p = q = 2 and no weight")
    tpl = prior.template
    second = tpl.variance + tpl.mean**2
    terms = []
    for j in range(j_max + 1):
        c = cap(j)
        f = deterministic_factor(prior, j, sup_norm_grid(c, prior.d)) * 2.0 ** (j * spec.level_exponent)
        gate = 1.0
        if prior.sparse:
            gate = 2.0 ** (j * prior.mu) * (1.0 + sup_norm_grid(c, prior.d) / 2.0**j) ** prior.nu
        n_t = 1 if j == 0 else 2**prior.d - 1
        terms.append(n_t * math.fsum(np.reshape(f**2 * gate, -1)))
    return math.fsum(terms) * second


@dataclass
class MgfEstimate:
    c: float
    estimate: float | None
    se: float | None
    overflow_fraction: float

    @property
    def overflow(self) -> bool:
        return self.overflow_fraction > 0


_EXP_LIMIT = math.log(np.finfo(float).max)


def _mgf_from_norms(norms: np.ndarray, c: float, r: float) -> MgfEstimate:
    expo = c * norms**r
    over = expo > _EXP_LIMIT
    frac = float(over.mean())
    if frac > 0:
        return MgfEstimate(c, None, None, frac)
    mean, se = _mean_se(np.exp(expo))
    return MgfEstimate(c, mean, se, 0.0)


def estimate_mgf(
    prior: PriorSpec,
    spec: SpaceSpec,
    c: float,
    r: float,
    trials: int,
    j_max: int,
    seed: int = 0,
    cap: Callable[[int], int] = default_cap,
    workers: int = 1,
) -> MgfEstimate:
    """Sample mean of exp(c ||a||^r); overflowing trials make the estimate ``None``."""
    if not c > 0:
        raise ValueError("c must be positive")
    norms = sample_norms(prior, spec, trials, j_max, seed, cap, workers)
    return _mgf_from_norms(norms, c, r)


def scan_mgf(
    prior: PriorSpec,
    spec: SpaceSpec,
    r: float,
    trials: int,
    j_max: int,
    seed: int = 0,
    c_start: float = 1.0,
    factor: float = 0.5,
    steps: int = 12,
    rel_se: float = 0.05,
    cap: Callable[[int], int] = default_cap,
    workers: int = 1,
) -> list[MgfEstimate]:
    """Walk c down a geometric grid until the estimate is finite with small relative SE."""
    norms = sample_norms(prior, spec, trials, j_max, seed, cap, workers)
    out = []
    c = c_start
    for _ in range(steps):
        est = _mgf_from_norms(norms, c, r)
        out.append(est)
        if est.estimate is not None and est.se <= rel_se * est.estimate:
            break
        c *= factor
    return out


# ---------------------------------------------------------------- auxiliary inequalities


def verify_binomial_bound(n: int, rho: float, sigma: float) -> float:
    """E[X^sigma] / max(n rho, (n rho)^sigma) for X ~ Bin(n, rho), summed exactly over the pmf."""
    if not 1 <= n <= 64:
        raise ValueError("exact summation supports 1 <= n <= 64")
    if not 0 < rho < 1 or not sigma > 0:
        raise ValueError("need rho in (0, 1) and sigma > 0")
    moment = math.fsum(
        math.comb(n, k) * rho**k * (1 - rho) ** (n - k) * k**sigma for k in range(1, n + 1)
    )
    mean = n * rho
    return moment / max(mean, mean**sigma)


def verify_paley_zygmund(values: Sequence, probs: Sequence, sigma) -> Fraction | float:
    """P(X > sigma E X) - (1 - sigma)^2 (E X)^2 / E X^2 on a finite support.

    Rational inputs give an exact Fraction.
    """
    if len(values) != len(probs) or not values:
        raise ValueError("values and probs must be nonempty and aligned")
    exact = all(isinstance(v, (int, Fraction)) for v in (*values, *probs, sigma))
    conv = Fraction if exact else float
    xs = [conv(v) for v in values]
    ps = [conv(p) for p in probs]
    sig = conv(sigma)
    if any(x < 0 for x in xs) or any(p < 0 for p in ps):
        raise ValueError("distribution must be nonnegative")
    if not 0 <= sig <= 1:
        raise ValueError("sigma must lie in [0, 1]")
    total = sum(ps)
    if total <= 0:
        raise ValueError("probabilities sum to zero")
    ps = [p / total for p in ps]
    m1 = sum(x * p for x, p in zip(xs, ps))
    m2 = sum(x * x * p for x, p in zip(xs, ps))
    if m2 == 0:
        raise ValueError("degenerate zero distribution")
    tail = sum(p for x, p in zip(xs, ps) if x > sig * m1)
    return tail - (1 - sig) ** 2 * m1 * m1 / m2


def verify_sup_gaussian(n: int, trials: int, seed: int = 0, workers: int = 1) -> float:
    """Fraction of trials in which max_i |X_i| >= sqrt(log n) for n i.i.d. N(0,1)."""
    if n < 3:
        raise ValueError("n must be >= 3")
    level = math.sqrt(math.log(n))

    def run(i: int) -> bool:
        x = np.random.default_rng([seed, i]).standard_normal(n)
        return bool(np.abs(x).max() >= level)

    hits = _map_trials(run, trials, workers)
    return sum(hits) / trials


def sup_gaussian_exact(n: int) -> float:
    """P(max |X_i| >= sqrt(log n)) in closed form."""
    from scipy.special import ndtr

    inside = 2 * ndtr(math.sqrt(math.log(n))) - 1
    return 1.0 - inside**n


@dataclass
class XiMomentResult:
    j_list: list[int]
    means: list[float]
    ses: list[float]
    values: np.ndarray  # (trials, len(j_list)) of Xi^sigma
    tail: HeavyTailCheck
    hypothesis_ok: bool

    @property
    def trend(self) -> float:
        return self.means[-1] - self.means[-2]

    @property
    def stable(self) -> bool:
        """No trend beyond 3 SE between the last two truncations and no heavy-tail flag."""
        band = 3 * math.hypot(self.ses[-1], self.ses[-2])
        return abs(self.trend) <= band and not self.tail.flagged


def verify_xi_moment_stability(
    prior: PriorSpec,
    p: float,
    sigma: float,
    j_list: Sequence[int],
    trials: int,
    seed: int = 0,
    variant: str = "xi",
    r: float | None = None,
    delta: float = 0.5,
    cap: Callable[[int], int] = default_cap,
    workers: int = 1,
) -> XiMomentResult:
    """Sample means of Xi^sigma (or the sparse variant) over nested truncations."""
    from .priors import MomentCondition, template_moment_ok

    j_list = sorted(int(j) for j in j_list)
    r_eff = p if r is None else r

    def run(i: int) -> list[float]:
        fld = sample_field(prior, j_list[-1], trial_seed(seed, i), cap)
        if variant == "xi":
            stat = xi_statistic(fld, p)
        elif variant == "xi_tilde":
            stat = xi_tilde_statistic(fld, p, r_eff, delta, prior.mu, prior.nu, beta=None)
        else:
            raise ValueError(f"unknown variant {variant!r}")
        return [stat.up_to(J) ** sigma for J in j_list]

    vals = np.array(_map_trials(run, trials, workers))
    stats = [_mean_se(vals[:, k]) for k in range(len(j_list))]
    cond = MomentCondition("moment_max" if variant == "xi_tilde" else "moment", p=p * sigma, r=r_eff * sigma)
    return XiMomentResult(
        j_list,
        [m for m, _ in stats],
        [s for _, s in stats],
        vals,
        HeavyTailCheck.of(vals[:, -1]),
        template_moment_ok(prior.template, cond),
    )
