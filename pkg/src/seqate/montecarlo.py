"""Replication engine for coverage and interval-length studies.

Seeding
-------
All streams derive from a 64-bit master seed through the splitmix64
finaliser ``mix64``::

    replication_seed(s, r) = mix64(s + (r + 1) * 0x9E3779B97F4A7C15 mod 2**64)
    population_seed(s)     = mix64(s)                       # slot r = -1
    redraw_seed(s, r)      = mix64(replication_seed(s, r) ^ 0xD1B54A32D192ED03)

``mix64`` is a bijection and the golden-ratio increment is odd, so
replication seeds are distinct for distinct ``r < 2**64``.  Each seed feeds
``numpy.random.PCG64``; replication ``r`` draws its ``n`` assignment uniforms
from its own generator.

Replications are processed in fixed-size chunks whose boundaries do not
depend on the worker count, and results are concatenated in replication
order, so the output is identical for any number of workers.
"""
from __future__ import annotations

import csv
import io
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import _kernels, analytics
from .designs import EfronDesign, WeiDesign, make_design
from .estimators import aipw_arrays, ipw_arrays, running_means_arrays
from .population import (
    PotentialOutcomes,
    make_additive_population,
    make_logadditive_population,
    make_nonadditive_population,
    read_population,
    true_ate,
)
from .variance import (
    StrongEstimated,
    StrongKnown,
    WeakEstimated,
    WeakKnown,
    variance_arrays,
    z_for_level,
)

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
REDRAW_TAG = 0xD1B54A32D192ED03
CHUNK_SIZE = 250

# rounded so the grid prints as the decimals it denotes
PAPER_LEVELS = tuple(round(float(x), 12) for x in np.linspace(0.75, 0.99, 20))
PRESETS = {
    "desk": {"n": 2000, "reps": 5000},
    "paper": {"n": 5000, "reps": 20000},
}
DGPS = ("nonadditive", "additive", "logadditive", "file")
ESTIMATORS = ("ipw", "aipw")


class ConfigError(ValueError):
    """Invalid scenario configuration; ``field`` names the offending key."""

    def __init__(self, field_name, message):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


class ReplicationError(RuntimeError):
    def __init__(self, index, cause):
        super().__init__(f"replication {index} failed: {cause}")
        self.index = index


def mix64(x: int) -> int:
    """splitmix64 output function."""
    z = x & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive_replication_seed(master_seed: int, r: int) -> int:
    if r < 0:
        raise ValueError("replication index must be nonnegative")
    return mix64((master_seed & MASK64) + ((r + 1) * GOLDEN & MASK64))


def population_seed(master_seed: int) -> int:
    return mix64(master_seed & MASK64)


def redraw_seed(master_seed: int, r: int) -> int:
    return mix64(derive_replication_seed(master_seed, r) ^ REDRAW_TAG)


@dataclass(frozen=True)
class ScenarioConfig:
    design: str = "wei"
    eta: float = 0.7
    delta: float = 0.01
    p: float = 0.5
    dgp: str = "nonadditive"
    tau: float = 10.0
    c: float = 2.0
    population_file: str | None = None
    n: int = 2000
    reps: int = 5000
    levels: tuple = PAPER_LEVELS
    estimators: tuple = ESTIMATORS
    stability: str | None = None
    limits: str = "known"
    population_mode: str = "fixed"
    master_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "levels", tuple(float(x) for x in self.levels))
        object.__setattr__(self, "estimators", tuple(self.estimators))
        self.validate()

    def validate(self):
        if self.design not in ("wei", "efron", "bernoulli"):
            raise ConfigError("design", f"unknown design {self.design!r}")
        if self.design == "efron" and not 0.5 <= self.eta < 1.0:
            raise ConfigError("eta", f"must lie in [1/2, 1), got {self.eta!r}")
        if self.design == "wei" and not 0.0 < self.delta <= 0.5:
            raise ConfigError("delta", f"must lie in (0, 1/2], got {self.delta!r}")
        if self.design == "bernoulli" and not 0.0 < self.p < 1.0:
            raise ConfigError("p", f"must lie in (0, 1), got {self.p!r}")
        if self.dgp not in DGPS:
            raise ConfigError("dgp", f"unknown data-generating process {self.dgp!r}")
        if self.dgp == "file" and not self.population_file:
            raise ConfigError("population_file", "required when dgp is 'file'")
        if self.dgp == "file" and self.population_mode == "redraw":
            raise ConfigError("population_mode", "a file population cannot be redrawn")
        if self.dgp != "file" and (int(self.n) != self.n or self.n < 2):
            raise ConfigError("n", f"must be an integer >= 2, got {self.n!r}")
        if int(self.reps) != self.reps or self.reps < 1:
            raise ConfigError("reps", f"must be a positive integer, got {self.reps!r}")
        lv = self.levels
        if not lv:
            raise ConfigError("levels", "at least one level is required")
        if any(not 0.0 < x < 1.0 for x in lv):
            raise ConfigError("levels", "every level must lie in (0, 1)")
        if any(b <= a for a, b in zip(lv, lv[1:])):
            raise ConfigError("levels", "levels must be strictly increasing")
        if not self.estimators or any(e not in ESTIMATORS for e in self.estimators):
            raise ConfigError("estimators", f"must be a nonempty subset of {ESTIMATORS}")
        if self.stability not in (None, "strong", "weak"):
            raise ConfigError("stability", f"must be 'strong' or 'weak', got {self.stability!r}")
        if self.limits not in ("known", "estimated"):
            raise ConfigError("limits", f"must be 'known' or 'estimated', got {self.limits!r}")
        if self.population_mode not in ("fixed", "redraw"):
            raise ConfigError("population_mode",
                              f"must be 'fixed' or 'redraw', got {self.population_mode!r}")

    def build_design(self):
        return make_design(self.design, eta=self.eta, delta=self.delta, p=self.p)

    def effective_stability(self) -> str:
        if self.stability is not None:
            return self.stability
        return "weak" if isinstance(self.build_design(), EfronDesign) else "strong"

    def regime(self):
        design = self.build_design()
        if isinstance(design, WeiDesign):
            pstar, p1, p2, pt = 0.5, 0.5, 0.5, 0.5
        elif isinstance(design, EfronDesign):
            lim = analytics.efron_limits(design.eta)
            pstar, p1, p2, pt = 0.5, lim.p1star, lim.p2star, lim.ptilde
        else:
            pstar = p1 = p2 = pt = design.p
        strong = self.effective_stability() == "strong"
        if self.limits == "estimated":
            return StrongEstimated() if strong else WeakEstimated()
        return StrongKnown(pstar) if strong else WeakKnown(p1, p2, pt)

    def echo(self) -> dict:
        doc = asdict(self)
        doc["levels"] = list(self.levels)
        doc["estimators"] = list(self.estimators)
        doc["stability"] = self.effective_stability()
        return doc


def make_population(config: ScenarioConfig, seed) -> PotentialOutcomes:
    if config.dgp == "nonadditive":
        return make_nonadditive_population(config.n, seed)
    if config.dgp == "additive":
        return make_additive_population(config.n, config.tau, seed)
    if config.dgp == "logadditive":
        return make_logadditive_population(config.n, config.c, seed)
    return read_population(config.population_file)


def scenario_population(config: ScenarioConfig) -> PotentialOutcomes:
    """The fixed population of a scenario, drawn from the population stream."""
    return make_population(config, population_seed(config.master_seed))


@dataclass
class ReplicationResults:
    """Per-replication points, variance estimates and targets, in index order."""

    config: ScenarioConfig
    tau: np.ndarray
    points: dict
    vhats: dict

    @property
    def n(self) -> int:
        return self.config.n


def _run_chunk(config: ScenarioConfig, start: int, stop: int, fixed_pop):
    kind, param, delta = config.build_design().kernel_spec()
    regime = config.regime()
    reps = stop - start
    n = fixed_pop.n if fixed_pop is not None else config.n
    u = np.empty((reps, n))
    for j, r in enumerate(range(start, stop)):
        u[j] = np.random.Generator(np.random.PCG64(derive_replication_seed(config.master_seed, r))).random(n)
    p, k = _kernels.assign_batch(kind, param, delta, u)
    kf = k.astype(np.float64)
    if fixed_pop is not None:
        y = np.where(k == 1, fixed_pop.y1, fixed_pop.y0)
        tau = np.full(reps, true_ate(fixed_pop))
    else:
        y = np.empty((reps, n))
        tau = np.empty(reps)
        for j, r in enumerate(range(start, stop)):
            pop = make_population(config, redraw_seed(config.master_seed, r))
            y[j] = np.where(k[j] == 1, pop.y1, pop.y0)
            tau[j] = true_ate(pop)
    points, vhats = {}, {}
    means = running_means_arrays(p, kf, y) if "aipw" in config.estimators else None
    for est in config.estimators:
        if est == "ipw":
            points[est] = ipw_arrays(p, kf, y)
            vhats[est] = variance_arrays(p, kf, y, "ipw", regime)
        else:
            points[est] = aipw_arrays(p, kf, y, means)
            vhats[est] = variance_arrays(p, kf, y, "aipw", regime, means)
    for est in config.estimators:
        bad = ~(np.isfinite(points[est]) & np.isfinite(vhats[est]))
        if bad.any():
            raise ReplicationError(start + int(np.argmax(bad)), f"non-finite {est} result")
    return tau, points, vhats


def _chunk_task(args):
    return _run_chunk(*args)


def default_workers() -> int:
    return max(1, int(os.environ.get("SEQATE_WORKERS", "1")))


def simulate(config: ScenarioConfig, workers: int | None = None,
             chunk_size: int = CHUNK_SIZE) -> ReplicationResults:
    workers = default_workers() if workers is None else int(workers)
    if workers < 1:
        raise ConfigError("workers", "must be at least 1")
    fixed_pop = scenario_population(config) if config.population_mode == "fixed" else None
    if fixed_pop is not None and config.dgp == "file":
        config = replace(config, n=fixed_pop.n)
    bounds = [(s, min(s + chunk_size, config.reps)) for s in range(0, config.reps, chunk_size)]
    tasks = [(config, s, e, fixed_pop) for s, e in bounds]
    if workers == 1 or len(tasks) == 1:
        parts = [_chunk_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_chunk_task, tasks))
    tau = np.concatenate([t for t, _, _ in parts])
    points = {e: np.concatenate([pt[e] for _, pt, _ in parts]) for e in config.estimators}
    vhats = {e: np.concatenate([vh[e] for _, _, vh in parts]) for e in config.estimators}
    return ReplicationResults(config, tau, points, vhats)


@dataclass
class CoverageCurve:
    """Coverage and mean interval length per nominal level and estimator."""

    levels: tuple
    estimators: tuple
    reps: int
    tau: float
    coverage: dict
    mean_length: dict
    point_mean: dict
    point_sd: dict
    config: dict = field(default_factory=dict)

    def mc_se(self, estimator) -> np.ndarray:
        c = self.coverage[estimator]
        return np.sqrt(c * (1.0 - c) / self.reps)

    def rows(self):
        for est in self.estimators:
            se = self.mc_se(est)
            for j, level in enumerate(self.levels):
                yield (level, est, float(self.coverage[est][j]), float(se[j]),
                       float(self.mean_length[est][j]))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["level", "estimator", "coverage", "mc_se", "mean_length"])
        for level, est, cov, se, length in self.rows():
            w.writerow([repr(level), est, repr(cov), repr(se), repr(length)])
        return buf.getvalue()

    def summary(self) -> dict:
        return {
            "config": self.config,
            "tau_bar": self.tau,
            "reps": self.reps,
            "estimators": {
                est: {
                    "point_mean": self.point_mean[est],
                    "point_sd": self.point_sd[est],
                    "levels": [
                        {"level": lv, "coverage": cov, "mc_se": se, "mean_length": ln}
                        for lv, e, cov, se, ln in self.rows() if e == est
                    ],
                }
                for est in self.estimators
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.summary(), indent=2)


def coverage_curve(results: ReplicationResults) -> CoverageCurve:
    cfg = results.config
    n = cfg.n
    zs = np.array([z_for_level(lv) for lv in cfg.levels])
    coverage, mean_length, pmean, psd = {}, {}, {}, {}
    for est in cfg.estimators:
        pts = results.points[est]
        half = zs[:, None] * np.sqrt(results.vhats[est] / n)[None, :]
        hit = np.abs(pts - results.tau)[None, :] <= half
        coverage[est] = hit.mean(axis=1)
        mean_length[est] = (2.0 * half).mean(axis=1)
        pmean[est] = float(np.mean(pts))
        psd[est] = float(np.std(pts, ddof=1)) if pts.size > 1 else 0.0
    return CoverageCurve(
        levels=cfg.levels,
        estimators=cfg.estimators,
        reps=cfg.reps,
        tau=float(np.mean(results.tau)),
        coverage=coverage,
        mean_length=mean_length,
        point_mean=pmean,
        point_sd=psd,
        config=cfg.echo(),
    )


def run_scenario(config: ScenarioConfig, workers: int | None = None) -> CoverageCurve:
    return coverage_curve(simulate(config, workers))


def paper_scenarios(preset: str = "desk", master_seed: int = 0, eta: float = 0.7,
                    delta: float = 0.01, levels=PAPER_LEVELS):
    """The six (design, dgp) scenarios of the coverage study at a preset scale."""
    if preset not in PRESETS:
        raise ConfigError("preset", f"unknown preset {preset!r}")
    scale = PRESETS[preset]
    out = []
    for design in ("wei", "efron"):
        for dgp in ("nonadditive", "additive", "logadditive"):
            out.append(ScenarioConfig(design=design, dgp=dgp, eta=eta, delta=delta,
                                      levels=levels, master_seed=master_seed, **scale))
    return out

