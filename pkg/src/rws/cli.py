"""``rws`` command-line front end.

Every command writes its artifacts into ``--out`` (default: the directory
named by ``RWS_OUTPUT_DIR``, else the working directory).  Each artifact
starts with a '#' manifest that is enough to re-run the command; the worker
count is deliberately left out of it because results never depend on it.
"""
from __future__ import annotations

import argparse
import math
import os
import sys
from dataclasses import dataclass, fields
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import numpy as np

from . import analysis
from .conditions import PropertyVerdict, regularity_verdicts
from .csvio import emit_csv
from .lattice import BasisIndex
from .priors import BERNOULLI, BESOV, PriorSpec, TemplateDistribution, default_cap, sample_field, window_cap
from .seqspace import CoefficientField, SpaceSpec, seq_norm
from .wavelets import cascade, scaling_filter, synthesize

COMMANDS = ("sample", "norm", "check", "phase", "moments", "mgf", "verify")
LEMMAS = ("binomial", "paley-zygmund", "sup-gaussian", "xi-moments")
OUTPUT_ENV = "RWS_OUTPUT_DIR"

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_IO = 3


@dataclass(frozen=True)
class Preset:
    family: str
    alpha: float
    beta: float
    gamma: float
    theta: float = 0.0
    mu: float = 0.0
    nu: float = 0.0
    y_range: tuple[float, float] = (-1.5, 1.5)


def _besov(gb: float, alpha: float, y_range) -> Preset:
    return Preset(BESOV, alpha, gb, gb, y_range=y_range)


def _bernoulli(nu: float, mu: float, y_range) -> Preset:
    return Preset(BERNOULLI, -0.5, -0.5, -0.5, mu=mu, nu=nu, y_range=y_range)


PRESETS: dict[str, Preset] = {
    "besov00": _besov(-1, -1, (-1.2, 1.4)),
    "besov01": _besov(-2, -1, (-1.2, 1.4)),
    "besov02": _besov(-4, -1, (-1.2, 1.4)),
    "besov10": _besov(-1, -1, (-1.5, 1.5)),
    "besov11": _besov(-1, -2, (-1.5, 1.5)),
    "besov12": _besov(-1, -4, (-1.5, 1.5)),
    "bernoulli00": _bernoulli(-1, 0, (-4, 6)),
    "bernoulli01": _bernoulli(-2, 0, (-4, 6)),
    "bernoulli02": _bernoulli(-4, 0, (-4, 6)),
    "bernoulli10": _bernoulli(0, -1, (-3, 2)),
    "bernoulli11": _bernoulli(0, -2, (-3, 2)),
    "bernoulli12": _bernoulli(0, -4, (-3, 2)),
}
# sample presets: Daubechies-10, truncation at j = 10, window [-25, 25]
PRESET_WAVELET = dict(order=10, J_max=10, x_min=-25.0, x_max=25.0, cap="window", template="gaussian")


@dataclass
class RunConfig:
    command: str = "sample"
    family: str = BESOV
    alpha: float = -1.0
    beta: float = -1.0
    gamma: float = -1.0
    theta: float = 0.0
    mu: float = 0.0
    nu: float = 0.0
    template: str = "gaussian"
    k: int = 0
    d: int = 1
    s: float = 0.0
    p: float = 2.0
    q: float = 2.0
    sigma: float = 0.0
    r: float = 2.0
    c: float = 0.0
    J_min: int = 4
    J_max: int = 8
    cap: str = "default"
    trials: int = 50
    seed: int = 0
    out: str = ""
    order: int = 4
    depth: int = 10
    x_min: float = -25.0
    x_max: float = 25.0
    resolution: int = 2001
    preset: str = ""
    lemma: str = "all"
    coeff: tuple[str, ...] = ()
    workers: int = 1

    NOT_IN_MANIFEST = ("workers", "out")

    def __post_init__(self):
        for f in fields(self):
            if f.type in ("int", "float"):
                setattr(self, f.name, _convert(f.type, getattr(self, f.name)))

    def to_manifest(self) -> dict[str, str]:
        out = {}
        for f in fields(self):
            if f.name in self.NOT_IN_MANIFEST:
                continue
            value = getattr(self, f.name)
            if isinstance(value, tuple):
                value = ";".join(value)
            elif isinstance(value, float):
                value = repr(value)
            out[f"config.{f.name}"] = str(value)
        return out

    @classmethod
    def from_manifest(cls, manifest: dict[str, str], **overrides) -> "RunConfig":
        kw = {}
        for f in fields(cls):
            key = f"config.{f.name}"
            if key not in manifest:
                continue
            kw[f.name] = _convert(f.type, manifest[key])
        kw.update(overrides)
        return cls(**kw)

    def prior(self) -> PriorSpec:
        tpl = TemplateDistribution.parse(self.template)
        k = self.k or self.order
        if self.family == BESOV:
            return PriorSpec.besov(self.alpha, self.beta, self.gamma, self.theta, k=k, template=tpl, d=self.d)
        if self.family == BERNOULLI:
            return PriorSpec.bernoulli(self.alpha, self.beta, self.gamma, self.mu, self.nu, k=k,
                                       template=tpl, d=self.d)
        raise ValueError(f"unknown prior family {self.family!r}")

    def space(self) -> SpaceSpec:
        return SpaceSpec(self.d, self.s, self.p, self.q, self.sigma)

    def cap_policy(self):
        if self.cap == "default":
            return default_cap
        if self.cap == "window":
            return window_cap(max(abs(self.x_min), abs(self.x_max)), self.order)
        raise ValueError(f"unknown cap policy {self.cap!r} (default or window)")

    def output_dir(self) -> Path:
        return Path(self.out or os.environ.get(OUTPUT_ENV) or ".")


def _convert(annotation: str, text):
    if annotation == "int":
        if isinstance(text, float) and not text.is_integer():
            raise ValueError(f"expected an integer, got {text!r}")
        return int(text)
    if annotation == "float":
        return float(text)
    if annotation.startswith("tuple"):
        return tuple(v for v in text.split(";") if v)
    return text


# ---------------------------------------------------------------- argument parsing


def _number(text: str) -> float:
    """Floats plus 'inf' and exact fractions such as '-1/2'."""
    if "/" in text:
        return float(Fraction(text))
    return float(text)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rws", description="Random wavelet series priors and Besov regularity.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        for f in fields(RunConfig):
            if f.name == "command":
                continue
            flag = "--" + f.name.replace("_", "-") if f.name not in ("J_min", "J_max") else "--" + f.name
            if f.name == "coeff":
                sp.add_argument(flag, action="append", default=None,
                                help="explicit coefficient 'j,t,m1[,m2...]=value' (repeatable)")
                continue
            conv = {"int": int, "float": _number}.get(f.type, str)
            kw = {"type": conv, "default": None}
            if f.name == "preset":
                kw["choices"] = sorted(PRESETS)
            elif f.name == "family":
                kw["choices"] = (BESOV, BERNOULLI)
            elif f.name == "lemma":
                kw["choices"] = ("all",) + LEMMAS
            elif f.name == "cap":
                kw["choices"] = ("default", "window")
            sp.add_argument(flag, dest=f.name, **kw)
    return parser


def config_from_args(argv: Sequence[str] | None = None) -> RunConfig:
    ns = build_parser().parse_args(argv)
    given = {k: v for k, v in vars(ns).items() if v is not None}
    base: dict = {}
    if given.get("preset"):
        pre = PRESETS[given["preset"]]
        base.update(PRESET_WAVELET)
        base.update({f.name: getattr(pre, f.name) for f in fields(Preset) if f.name != "y_range"})
    base.update(given)
    if "coeff" in base:
        base["coeff"] = tuple(base["coeff"])
    return RunConfig(**base)


def parse_coeff(text: str, d: int) -> tuple[BasisIndex, float]:
    lhs, sep, rhs = text.partition("=")
    if not sep:
        raise ValueError(f"coefficient {text!r} must look like 'j,t,m=value'")
    parts = [int(v) for v in lhs.split(",")]
    if len(parts) != 2 + d:
        raise ValueError(f"coefficient {text!r} needs j, t and {d} shift entries")
    return BasisIndex(parts[0], parts[1], tuple(parts[2:])), _number(rhs)


# ---------------------------------------------------------------- commands


def _verdict_manifest(verdicts: list[PropertyVerdict]) -> dict[str, str]:
    out = {}
    for v in verdicts:
        key = "verdict." + v.prop.replace("'", "p")
        out[key] = f"{'holds' if v.holds else 'fails'} ({v.branch})"
        for ineq in v.inequalities:
            out[f"{key}.{ineq.name}"] = str(ineq.slack)
    return out


def _echo_verdicts(cfg: RunConfig, prior: PriorSpec, space: SpaceSpec, log) -> list[PropertyVerdict]:
    verdicts = regularity_verdicts(space, prior, cfg.r)
    for v in verdicts:
        print(v.render(), file=log)
        if v.prop in ("B", "B'") and not v.holds:
            print(f"warning: property {v.prop} fails for wavelet order k={prior.k}; "
                  "the function-space reading of the sequence norm is not covered", file=log)
    return verdicts


def _write(cfg: RunConfig, name: str, rows, manifest: dict[str, str]) -> Path:
    path = cfg.output_dir() / name
    path.parent.mkdir(parents=True, exist_ok=True)
    emit_csv(path, rows, manifest)
    return path


def _sample(cfg, prior, space, header, log):
    system = cascade(scaling_filter(cfg.order), cfg.depth, d=cfg.d)
    field = sample_field(prior, cfg.J_max, cfg.seed, cfg.cap_policy(), cfg.cap)
    axis = np.linspace(cfg.x_min, cfg.x_max, cfg.resolution)
    mesh = np.meshgrid(*([axis] * cfg.d), indexing="ij")
    pts = np.stack([g.reshape(-1) for g in mesh], axis=1)
    values = synthesize(system, field, pts, workers=cfg.workers)
    name = (cfg.preset or "sample") + ".csv"
    rows = (list(p) + [v] for p, v in zip(pts.tolist(), values.tolist()))
    return [_write(cfg, name, rows, header)]


def _norm(cfg, prior, space, header, log):
    if cfg.coeff:
        coeffs = dict(parse_coeff(c, cfg.d) for c in cfg.coeff)
        field = CoefficientField.from_coefficients(cfg.d, coeffs)
    else:
        field = sample_field(prior, cfg.J_max, cfg.seed, cfg.cap_policy(), cfg.cap)
    rep = seq_norm(field, space)
    print(f"{rep.total:.17g}")
    header.update({"result.total": repr(rep.total), "result.eta1": repr(rep.eta1),
                   "result.eta2": repr(rep.eta2)})
    rows = ([j, t, v] for (j, t), v in rep.per_level.items())
    return [_write(cfg, "norm.csv", rows, header)]


def _check(cfg, prior, space, header, log):
    verdicts = regularity_verdicts(space, prior, cfg.r)
    for v in verdicts:
        print(v.render())
    rows = []
    for pi, v in enumerate(verdicts):
        for ii, ineq in enumerate(v.inequalities):
            rows.append([pi, ii, float(ineq.slack), int(ineq.satisfied(v.exact))])
    return [_write(cfg, "check.csv", rows, header)]


def _phase(cfg, prior, space, header, log):
    j_list = list(range(cfg.J_min, cfg.J_max + 1))
    v = analysis.phase_classify(prior, space, j_list, cfg.trials, cfg.seed, cfg.cap_policy(), cfg.workers)
    print(f"{v.classification} (median slope {v.slope:.6g}, diagnostic {v.diagnostic})")
    header.update({"result.classification": v.classification, "result.median_slope": repr(v.slope),
                   "result.diagnostic": v.diagnostic, "result.log_kappa": repr(v.log_kappa),
                   "columns": "trial,slope," + ",".join(f"norm_J{j}" for j in j_list)})
    return [_write(cfg, "phase.csv", v.rows(), header)]


def _moments(cfg, prior, space, header, log):
    est = analysis.estimate_moment(prior, space, cfg.r, cfg.trials, cfg.J_max, cfg.seed, cfg.cap_policy(),
                                   cfg.workers)
    print(f"mean {est.mean:.17g} se {est.se:.17g} heavy_tailed {est.heavy_tailed}")
    header.update({"result.mean": repr(est.mean), "result.se": repr(est.se),
                   "result.max_to_sum": repr(est.tail.max_to_sum), "result.hill_index": repr(est.tail.hill_index),
                   "result.heavy_tailed": str(est.heavy_tailed), "columns": "trial,norm_pow_r"})
    return [_write(cfg, "moments.csv", enumerate(est.values.tolist()), header)]


def _mgf(cfg, prior, space, header, log):
    if cfg.c > 0:
        ests = [analysis.estimate_mgf(prior, space, cfg.c, cfg.r, cfg.trials, cfg.J_max, cfg.seed,
                                      cfg.cap_policy(), cfg.workers)]
    else:
        ests = analysis.scan_mgf(prior, space, cfg.r, cfg.trials, cfg.J_max, cfg.seed,
                                 cap=cfg.cap_policy(), workers=cfg.workers)
    for e in ests:
        shown = "Overflow" if e.overflow else f"{e.estimate:.17g} (se {e.se:.3g})"
        print(f"c={e.c:.6g}: {shown}")
    header["columns"] = "c,estimate,se,overflow_fraction"
    rows = ([e.c, math.nan if e.overflow else e.estimate, math.nan if e.overflow else e.se,
             e.overflow_fraction] for e in ests)
    return [_write(cfg, "mgf.csv", rows, header)]


def _verify(cfg, prior, space, header, log):
    lemmas = LEMMAS if cfg.lemma == "all" else (cfg.lemma,)
    written = []
    for lemma in lemmas:
        head = dict(header)
        if lemma == "binomial":
            rows = [[n, rho, sig, analysis.verify_binomial_bound(n, rho, sig)]
                    for n in (2, 8, 32, 64) for rho in (0.01, 0.1, 0.5, 0.9) for sig in (0.5, 1.5, 2, 3)]
            head["columns"] = "n,rho,sigma,ratio"
        elif lemma == "paley-zygmund":
            rng = np.random.default_rng([cfg.seed, 4])
            rows = []
            for i in range(cfg.trials):
                dist = random_exact_distribution(rng)
                rows.append([i, float(analysis.verify_paley_zygmund(*dist))])
            head["columns"] = "case,slack"
        elif lemma == "sup-gaussian":
            ns = [2**e for e in range(2, 17, 2)]
            rows = [[n, analysis.verify_sup_gaussian(n, cfg.trials, cfg.seed, cfg.workers),
                     analysis.sup_gaussian_exact(n)] for n in ns]
            head["columns"] = "n,fraction,exact_probability"
        else:
            j_list = list(range(cfg.J_min, cfg.J_max + 1))
            res = analysis.verify_xi_moment_stability(prior, space.p, 1.0, j_list, cfg.trials, cfg.seed,
                                                      cap=cfg.cap_policy(), workers=cfg.workers)
            head.update({"result.stable": str(res.stable), "result.hypothesis_ok": str(res.hypothesis_ok),
                         "result.means": ";".join(repr(m) for m in res.means),
                         "columns": "trial," + ",".join(f"xi_J{j}" for j in j_list)})
            rows = ([i, *row] for i, row in enumerate(res.values.tolist()))
            print(f"xi moments stable: {res.stable} (template hypothesis {res.hypothesis_ok})")
        written.append(_write(cfg, f"verify_{lemma}.csv", rows, head))
    return written


def random_exact_distribution(rng: np.random.Generator):
    """A random finite nonnegative distribution with rational atoms, weights and sigma."""
    size = int(rng.integers(1, 7))
    values = [Fraction(int(v), int(rng.integers(1, 10))) for v in rng.integers(0, 20, size)]
    if all(v == 0 for v in values):
        values[0] = Fraction(1)
    weights = [Fraction(int(w)) for w in rng.integers(1, 10, size)]
    sigma = Fraction(int(rng.integers(0, 11)), 10)
    return values, weights, sigma


HANDLERS = {"sample": _sample, "norm": _norm, "check": _check, "phase": _phase,
            "moments": _moments, "mgf": _mgf, "verify": _verify}


def run(cfg: RunConfig, log=None) -> int:
    """Execute one command; returns the process exit status."""
    log = log or sys.stderr
    try:
        if cfg.command not in HANDLERS:
            raise ValueError(f"unknown command {cfg.command!r}")
        prior = cfg.prior()
        space = cfg.space()
        header = {"command": cfg.command}
        header.update(cfg.to_manifest())
        header.update({f"prior.{k}": v for k, v in prior.manifest().items()})
        if cfg.command != "check":
            verdicts = _echo_verdicts(cfg, prior, space, log)
        else:
            verdicts = regularity_verdicts(space, prior, cfg.r)
        header.update(_verdict_manifest(verdicts))
        paths = HANDLERS[cfg.command](cfg, prior, space, header, log)
    except OSError as exc:
        print(f"error: {exc}", file=log)
        return EXIT_IO
    except (ValueError, MemoryError) as exc:
        print(f"error: {exc}", file=log)
        return EXIT_INVALID
    for path in paths:
        print(f"wrote {path}", file=log)
    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    return run(config_from_args(argv))


if __name__ == "__main__":
    sys.exit(main())
