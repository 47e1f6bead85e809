"""Command-line interface.

Subcommands: ``run``, ``analytics``, ``enumerate``, ``replicate-paper``.
Exit codes: 0 success, 2 usage or configuration error, 3 runtime error.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import analytics
from .designs import DesignError, make_design
from .montecarlo import (
    PRESETS,
    ConfigError,
    ScenarioConfig,
    coverage_curve,
    default_workers,
    paper_scenarios,
    simulate,
)
from .population import PopulationError, PopulationMoments, population_moments, read_population, true_ate
from .verification import enumerate_expectation

log = logging.getLogger("seqate")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_RUNTIME = 3

# flag name -> ScenarioConfig field
CONFIG_KEYS = {
    "design": "design", "eta": "eta", "delta": "delta", "p": "p", "dgp": "dgp", "tau": "tau",
    "c": "c", "pop": "population_file", "population_file": "population_file", "n": "n",
    "reps": "reps", "levels": "levels", "estimator": "estimators", "estimators": "estimators",
    "stability": "stability", "limits": "limits", "population_mode": "population_mode",
    "seed": "master_seed", "master_seed": "master_seed",
}
INT_FIELDS = {"n", "reps", "master_seed"}
FLOAT_FIELDS = {"eta", "delta", "p", "tau", "c"}


class UsageError(Exception):
    def __init__(self, field_name, message):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


def parse_levels(text) -> tuple:
    """``start:stop:count`` (inclusive endpoints) or a comma-separated list."""
    if isinstance(text, (list, tuple)):
        return tuple(float(x) for x in text)
    text = str(text).strip()
    try:
        if ":" in text:
            start, stop, count = text.split(":")
            count = int(count)
            if count < 1:
                raise ValueError("count must be positive")
            return tuple(round(float(x), 12) for x in np.linspace(float(start), float(stop), count))
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError as exc:
        raise UsageError("levels", f"cannot parse {text!r} ({exc})") from None


def parse_estimators(value) -> tuple:
    if isinstance(value, (list, tuple)):
        return tuple(value)
    value = str(value).strip().lower()
    if value == "both":
        return ("ipw", "aipw")
    return tuple(v.strip() for v in value.split(",") if v.strip())


def read_config_file(path) -> dict:
    """JSON document or flat ``key = value`` lines ('#' starts a comment)."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError("config", f"cannot read {path}: {exc.strerror}") from None
    stripped = text.lstrip()
    if stripped.startswith("{"):
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise UsageError("config", f"{path}: malformed JSON ({exc.msg})") from None
        if not isinstance(doc, dict):
            raise UsageError("config", f"{path}: expected a JSON object")
        return doc
    doc = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError("config", f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        doc[key] = value
    return doc


def _coerce_int(field_name, value):
    try:
        f = float(value)
        if f != int(f):
            raise ValueError
        return int(f)
    except (TypeError, ValueError):
        raise UsageError(field_name, f"invalid value {value!r}") from None


def _coerce(field_name, value):
    if field_name in INT_FIELDS:
        return _coerce_int(field_name, value)
    try:
        if field_name in FLOAT_FIELDS:
            return float(value)
    except (TypeError, ValueError):
        raise UsageError(field_name, f"invalid value {value!r}") from None
    if field_name == "levels":
        return parse_levels(value)
    if field_name == "estimators":
        return parse_estimators(value)
    return value


def build_config(file_values: dict, flag_values: dict) -> ScenarioConfig:
    """Merge config-file values with flags; flags win."""
    merged = {}
    for source in (file_values, flag_values):
        for key, value in source.items():
            if value is None:
                continue
            norm = key.replace("-", "_").replace(".", "_")
            # accept 'wei.delta'/'efron.eta'/'bernoulli.p' style keys
            for prefix in ("wei_", "efron_", "bernoulli_"):
                if norm.startswith(prefix) and norm[len(prefix):] in CONFIG_KEYS:
                    norm = norm[len(prefix):]
            if norm not in CONFIG_KEYS:
                raise UsageError(key, "unknown configuration key")
            field_name = CONFIG_KEYS[norm]
            merged[field_name] = _coerce(field_name, value)
    if merged.get("population_file") and "dgp" not in merged:
        merged["dgp"] = "file"
    try:
        return ScenarioConfig(**merged)
    except ConfigError as exc:
        raise UsageError(exc.field, str(exc).split(": ", 1)[1]) from None


def _ensure_out(path) -> Path:
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise UsageError("out", f"cannot create {out}: {exc.strerror}") from None
    if not os.access(out, os.W_OK):
        raise UsageError("out", f"directory {out} is not writable")
    return out


def _load_population(path, field_name="pop"):
    try:
        return read_population(path)
    except OSError as exc:
        raise UsageError(field_name, f"cannot read {path}: {exc.strerror}") from None
    except PopulationError as exc:
        raise UsageError(field_name, f"{path}: {exc}") from None


def _write(path: Path, text: str) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(text)


def _add_scenario_flags(p):
    p.add_argument("--config", help="scenario config file (JSON or key = value lines)")
    p.add_argument("--design", choices=["wei", "efron", "bernoulli"])
    p.add_argument("--eta", type=float, help="Efron bias (0.5 maps to a fair coin)")
    p.add_argument("--delta", type=float, help="Wei clipping bound")
    p.add_argument("--p", type=float, help="Bernoulli probability")
    p.add_argument("--dgp", choices=["nonadditive", "additive", "logadditive", "file"])
    p.add_argument("--pop", help="population file (y0,y1) for --dgp file")
    p.add_argument("--tau", type=float)
    p.add_argument("--c", type=float)
    p.add_argument("--n", type=int)
    p.add_argument("--reps", type=int)
    p.add_argument("--levels", help="start:stop:count or comma list")
    p.add_argument("--estimator", choices=["ipw", "aipw", "both"])
    p.add_argument("--stability", choices=["strong", "weak"])
    p.add_argument("--limits", choices=["known", "estimated"])
    p.add_argument("--population-mode", choices=["fixed", "redraw"])
    p.add_argument("--seed", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="seqate", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one Monte Carlo scenario")
    _add_scenario_flags(run)
    run.add_argument("--workers", type=int)
    run.add_argument("--out", help="output directory (default: out)")

    an = sub.add_parser("analytics", help="closed-form design quantities")
    an.add_argument("--efron-eta", type=float)
    an.add_argument("--tail-tol", type=float, default=1e-12)
    an.add_argument("--pop", help="population file; prints its moments and limit variances")
    for name in ("m0-sq", "m1-sq", "m01", "sigma0-sq", "sigma1-sq", "gamma"):
        an.add_argument(f"--{name}", type=float)
    an.add_argument("--out", help="directory for the stationary pmf table")

    en = sub.add_parser("enumerate", help="exact expectation over all assignment paths")
    en.add_argument("--pop", required=True)
    en.add_argument("--design", choices=["wei", "efron", "bernoulli"], default="bernoulli")
    en.add_argument("--eta", type=float)
    en.add_argument("--delta", type=float)
    en.add_argument("--p", type=float)
    en.add_argument("--estimator", choices=["ipw", "aipw"], default="ipw")

    rp = sub.add_parser("replicate-paper", help="the six coverage scenarios and figure tables")
    rp.add_argument("--preset", choices=sorted(PRESETS), default="desk")
    rp.add_argument("--seed", type=int, default=0)
    rp.add_argument("--eta", type=float, default=0.7)
    rp.add_argument("--delta", type=float, default=0.01)
    rp.add_argument("--levels", default="0.75:0.99:20")
    rp.add_argument("--workers", type=int)
    rp.add_argument("--out", default="out", help="output directory")
    return parser


def cmd_run(args) -> int:
    file_values = read_config_file(args.config) if args.config else {}
    # shell-level keys that are not part of the scenario itself
    file_workers = file_values.pop("workers", None)
    file_out = file_values.pop("out", None)
    flags = {k: getattr(args, k) for k in (
        "design", "eta", "delta", "p", "dgp", "pop", "tau", "c", "n", "reps", "levels",
        "estimator", "stability", "limits", "population_mode", "seed")}
    config = build_config(file_values, flags)
    if config.dgp == "file":
        _load_population(config.population_file)
    if args.workers is not None:
        workers = args.workers
    elif file_workers is not None:
        workers = _coerce_int("workers", file_workers)
    else:
        workers = default_workers()
    if workers < 1:
        raise UsageError("workers", "must be at least 1")
    out = _ensure_out(args.out or file_out or "out")
    t0 = time.perf_counter()
    results = simulate(config, workers=workers)
    curve = coverage_curve(results)
    runtime = time.perf_counter() - t0
    _write(out / "coverage.csv", curve.to_csv())
    _write(out / "summary.json", curve.to_json() + "\n")
    _write(out / "timing.json", json.dumps({"runtime_seconds": runtime, "workers": workers}) + "\n")
    for level, est, cov, se, length in curve.rows():
        if level in (config.levels[0], config.levels[-1]) or abs(level - 0.95) < 1e-9:
            print(f"{est:5s} level={level:.4f} coverage={cov:.4f} (se {se:.4f}) length={length:.5f}")
    print(f"tau_bar={curve.tau!r}  wrote {out}/coverage.csv, summary.json ({runtime:.1f}s)")
    return EXIT_OK


def _moments_from_args(args):
    vals = [getattr(args, n) for n in ("m0_sq", "m1_sq", "m01", "sigma0_sq", "sigma1_sq", "gamma")]
    if args.pop:
        return population_moments(_load_population(args.pop))
    if all(v is None for v in vals):
        return None
    m0, m1, m01, s0, s1, g = (0.0 if v is None else v for v in vals)
    return PopulationMoments(m0, m1, m01, float("nan"), float("nan"), s0, s1, g)


def cmd_analytics(args) -> int:
    moments = _moments_from_args(args)
    eta = args.efron_eta
    if eta is None and moments is None:
        raise UsageError("efron-eta", "give --efron-eta and/or moments (--pop or --m0-sq ...)")
    if eta is not None:
        if eta == 0.5:
            print("eta=0.5: fair-coin Bernoulli(1/2) design; p1star = p2star = ptilde = 0.5")
        else:
            try:
                lim = analytics.efron_limits(eta)
                pmf = analytics.stationary_pmf(eta, args.tail_tol)
            except ValueError as exc:
                raise UsageError("efron-eta", str(exc)) from None
            e_inv_p, e_inv_1mp, e_p = analytics.expected_inverse_probs(pmf)
            print(f"eta={eta!r}")
            print(f"p1star={lim.p1star:.6f}  p2star={lim.p2star:.6f}  ptilde={lim.ptilde:.6f}")
            print(f"pi0={pmf.pi0:.6f}  n_max={pmf.n_max}  tail_mass={pmf.tail_mass:.3e}")
            print(f"E[1/p]={e_inv_p:.6f}  E[1/(1-p)]={e_inv_1mp:.6f}  E[p]={e_p:.6f}")
            print(f"variance_factor={analytics.efron_variance_factor(eta):.6f}")
            shown = min(pmf.n_max, 5)
            print("pi(|d|): " + "  ".join(f"{d}:{pmf.pi[d]:.6f}" for d in range(shown + 1)))
            if args.out:
                out = _ensure_out(args.out)
                analytics.write_pmf(pmf, out / f"stationary_pmf_eta{eta}.csv")
    if moments is not None:
        for cross in ("oracle", "cauchy-schwarz"):
            v_ipw, v_aipw = analytics.wei_variances(moments, cross)
            print(f"wei[{cross}]: V_ipw={v_ipw:.6f}  V_aipw={v_aipw:.6f}")
            if eta is not None and eta != 0.5:
                v_ipw, v_aipw = analytics.efron_variances(moments, eta, cross)
                print(f"efron[{cross}]: V_ipw={v_ipw:.6f}  V_aipw={v_aipw:.6f}")
    return EXIT_OK


def cmd_enumerate(args) -> int:
    pop = _load_population(args.pop)
    design = make_design(args.design, eta=args.eta, delta=args.delta, p=args.p)
    value = enumerate_expectation(pop, design, args.estimator)
    tau = true_ate(pop)
    print(f"expectation={value!r}")
    print(f"tau_bar={tau!r}")
    print(f"abs_diff={abs(value - tau)!r}")
    return EXIT_OK


def _figure_tables(curves):
    """Coverage and length tables keyed by figure file name."""
    tables = {}
    for design, cov_name, len_name in (("wei", "fig1_wei_coverage.csv", "fig2_wei_length.csv"),
                                       ("efron", "fig3_efron_coverage.csv", "fig4_efron_length.csv")):
        cov_lines = ["dgp,estimator,level,coverage,mc_se"]
        len_lines = ["dgp,estimator,level,mean_length"]
        for (d, dgp), curve in curves.items():
            if d != design:
                continue
            for level, est, cov, se, length in curve.rows():
                cov_lines.append(f"{dgp},{est},{level!r},{cov!r},{se!r}")
                len_lines.append(f"{dgp},{est},{level!r},{length!r}")
        tables[cov_name] = "\n".join(cov_lines) + "\n"
        tables[len_name] = "\n".join(len_lines) + "\n"
    return tables


def cmd_replicate(args) -> int:
    levels = parse_levels(args.levels)
    workers = args.workers if args.workers is not None else default_workers()
    out = _ensure_out(args.out)
    try:
        scenarios = paper_scenarios(args.preset, args.seed, eta=args.eta, delta=args.delta,
                                    levels=levels)
    except ConfigError as exc:
        raise UsageError(exc.field, str(exc).split(": ", 1)[1]) from None
    curves = {}
    timing = {}
    for cfg in scenarios:
        t0 = time.perf_counter()
        curve = coverage_curve(simulate(cfg, workers=workers))
        timing[f"{cfg.design}_{cfg.dgp}"] = time.perf_counter() - t0
        curves[(cfg.design, cfg.dgp)] = curve
        stem = f"{cfg.design}_{cfg.dgp}"
        _write(out / f"{stem}_coverage.csv", curve.to_csv())
        _write(out / f"{stem}_summary.json", curve.to_json() + "\n")
        at95 = {e: curve.coverage[e][int(np.argmin(np.abs(np.array(levels) - 0.95)))]
                for e in cfg.estimators}
        print(f"{stem:20s} coverage@0.95 " + "  ".join(f"{e}={v:.4f}" for e, v in at95.items())
              + f"  ({timing[stem]:.1f}s)")
    for name, text in _figure_tables(curves).items():
        _write(out / name, text)
    _write(out / "timing.json", json.dumps({"runtime_seconds": timing, "workers": workers,
                                            "preset": args.preset}) + "\n")
    print(f"wrote figure tables to {out}")
    return EXIT_OK


COMMANDS = {
    "run": cmd_run,
    "analytics": cmd_analytics,
    "enumerate": cmd_enumerate,
    "replicate-paper": cmd_replicate,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"seqate: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (PopulationError, DesignError, ConfigError) as exc:
        print(f"seqate: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001 - top-level diagnostic
        log.debug("runtime failure", exc_info=True)
        print(f"seqate: runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
