"""Command-line surface for fitting, sampling, simulation, and plot data.

Subcommands:

* ``fit``: estimate parameters for a dataset by one or all methods, with
  goodness-of-fit statistics and optional bootstrap p-values.
* ``sample``: draw synthetic data from a given parameter vector.
* ``simulate``: run a Monte Carlo estimator comparison from a config file.
* ``return-level``: point return level with delta-method SE and optional
  profile-likelihood interval (deviance trace included as plot data).
* ``plotdata``: density grid, QQ pairs, and histogram counts as CSV.

Every command is deterministic given its inputs, flags, and seed; output
files embed the seed and a digest of the effective configuration.  Exit
codes: 0 success, 2 input or configuration error, 3 when no requested
method produced a converged fit.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from .distribution import K4Params, pdf, quantile, sample
from .errors import DegenerateDataError
from .fitting import (
    OptimizerConfig,
    StartStrategy,
    UNPENALIZED,
    covariance_matrix,
    profile_likelihood_ci,
    return_level,
    standard_errors,
)
from .gof import bootstrap_pvalues, gof_report
from .penalties import combo_from_name, enumerate_combos
from .simulation import SimConfig, campaign, campaign_csv, campaign_table, resolve_method

__all__ = ["main"]

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NO_FIT = 3

_COMBO_NAMES = tuple(combo.name for combo in enumerate_combos())
_ALL_METHODS = ("MLE", "LME") + _COMBO_NAMES

_START_STRATEGIES = {
    "lme": StartStrategy.LME_START,
    "moment": StartStrategy.MOMENT_START,
    "grid": StartStrategy.GRID_START,
}


class _CliError(Exception):
    def __init__(self, code: int, message: str) -> None:
        super().__init__(message)
        self.code = code


def _digest(payload: object) -> str:
    text = json.dumps(payload, sort_keys=True)
    return hashlib.sha256(text.encode()).hexdigest()[:12]


def read_dataset(path: str, min_values: int) -> np.ndarray:
    """Parse a one-column CSV of reals; header auto-detected, '#' lines skipped."""
    try:
        text = Path(path).read_text(encoding="utf-8-sig")
    except OSError as err:
        raise _CliError(EXIT_INPUT, f"cannot read {path}: {err}") from err
    values: list[float] = []
    bad: list[tuple[int, str]] = []
    first_data_row = True
    for lineno, row in enumerate(csv.reader(io.StringIO(text)), start=1):
        cells = [c.strip() for c in row]
        if not cells or all(c == "" for c in cells):
            continue
        if cells[0].startswith("#"):
            continue
        if len([c for c in cells if c != ""]) > 1:
            bad.append((lineno, ",".join(cells)))
            continue
        try:
            values.append(float(cells[0]))
            first_data_row = False
        except ValueError:
            if first_data_row:
                first_data_row = False  # header row
            else:
                bad.append((lineno, cells[0]))
    if bad:
        detail = "; ".join(f"line {n}: {v!r}" for n, v in bad)
        raise _CliError(EXIT_INPUT, f"{path}: non-numeric rows: {detail}")
    if len(values) < min_values:
        raise _CliError(
            EXIT_INPUT, f"{path}: need at least {min_values} values, got {len(values)}"
        )
    return np.array(values)


def _expand_methods(name: str) -> list[str]:
    lowered = name.lower()
    if lowered == "all":
        return list(_ALL_METHODS)
    if lowered == "mle":
        return ["MLE"]
    if lowered == "lme":
        return ["LME"]
    if name in _COMBO_NAMES:
        return [name]
    listing = "\n  ".join(_COMBO_NAMES)
    raise _CliError(
        EXIT_INPUT,
        f"unknown method {name!r}; choose mle, lme, all, or one of:\n  {listing}",
    )


def _method_combo(name: str):
    return None if name in ("MLE", "LME") else combo_from_name(name)


def _method_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


def _fit_one(name: str, x: np.ndarray, bootstrap: int | None, seed: int, index: int):
    fitter = resolve_method(name)
    try:
        result = fitter(x)
    except (ValueError, DegenerateDataError) as err:
        return {"method": name, "converged": False, "error": str(err)}
    if result is None or not result.converged:
        return {"method": name, "converged": False, "error": "did not converge"}
    combo = _method_combo(name)
    se = standard_errors(result, x, combo)
    report = gof_report(x, result.params)
    entry = {
        "method": name,
        "converged": True,
        "error": None,
        "params": {
            "mu": result.params.mu,
            "sigma": result.params.sigma,
            "k": result.params.k,
            "h": result.params.h,
        },
        "se": None
        if se is None
        else {"mu": float(se[0]), "sigma": float(se[1]), "k": float(se[2]), "h": float(se[3])},
        "nll": result.nll,
        "penalized_nll": result.penalized_nll,
        "gof": {
            "mpae": report.mpae,
            "ad": report.ad,
            "ks": report.ks,
            "ad_pvalue": None,
            "ks_pvalue": None,
            "bootstrap_reps": 0,
        },
    }
    if bootstrap is not None:
        try:
            pv = bootstrap_pvalues(x, fitter, reps=bootstrap, seed=_method_seed(seed, index))
            entry["gof"].update(
                ad_pvalue=pv.ad_pvalue,
                ks_pvalue=pv.ks_pvalue,
                bootstrap_reps=bootstrap,
                bootstrap_failures=pv.failures,
                bootstrap_reliable=pv.reliable,
            )
        except ValueError as err:
            entry["gof"]["bootstrap_error"] = str(err)
    return entry


def _fit_csv(payload: dict) -> str:
    fields = [
        "method", "converged", "mu", "sigma", "k", "h",
        "se_mu", "se_sigma", "se_k", "se_h", "nll", "penalized_nll",
        "mpae", "ad", "ks", "ad_pvalue", "ks_pvalue", "error",
    ]
    out = io.StringIO()
    out.write(f"# seed={payload['seed']} config={payload['config_digest']}\n")
    writer = csv.DictWriter(out, fieldnames=fields, lineterminator="\n")
    writer.writeheader()
    for entry in payload["results"]:
        row = {"method": entry["method"], "converged": entry["converged"],
               "error": entry.get("error") or ""}
        if entry["converged"]:
            row.update({k: repr(v) for k, v in entry["params"].items()})
            if entry["se"] is not None:
                row.update({f"se_{k}": repr(v) for k, v in entry["se"].items()})
            row["nll"] = repr(entry["nll"])
            row["penalized_nll"] = repr(entry["penalized_nll"])
            gof = entry["gof"]
            for key in ("mpae", "ad", "ks"):
                row[key] = repr(gof[key])
            for key in ("ad_pvalue", "ks_pvalue"):
                if gof[key] is not None:
                    row[key] = repr(gof[key])
        writer.writerow(row)
    return out.getvalue()


def _fit_text(payload: dict) -> str:
    lines = [f"# seed={payload['seed']} config={payload['config_digest']}"]
    name_w = max(len(e["method"]) for e in payload["results"])
    header = (
        "method".ljust(name_w)
        + "  conv"
        + "".join(c.rjust(12) for c in ("mu", "sigma", "k", "h", "nll"))
        + "".join(c.rjust(10) for c in ("mpae", "ad", "ks"))
    )
    lines.append(header)
    for e in payload["results"]:
        row = e["method"].ljust(name_w)
        if not e["converged"]:
            lines.append(row + "  no    [" + (e.get("error") or "failed") + "]")
            continue
        p, gof = e["params"], e["gof"]
        row += "  yes "
        row += "".join(
            f"{v:.5g}".rjust(12) for v in (p["mu"], p["sigma"], p["k"], p["h"], e["nll"])
        )
        row += "".join(f"{gof[c]:.4f}".rjust(10) for c in ("mpae", "ad", "ks"))
        if gof["ad_pvalue"] is not None:
            row += f"  p(ad)={gof['ad_pvalue']:.4f} p(ks)={gof['ks_pvalue']:.4f}"
        lines.append(row)
    return "\n".join(lines) + "\n"


def cmd_fit(args: argparse.Namespace) -> int:
    x = read_dataset(args.dataset, 5)
    methods = _expand_methods(args.method)
    results = [
        _fit_one(name, x, args.bootstrap, args.seed, index)
        for index, name in enumerate(methods)
    ]
    payload = {
        "command": "fit",
        "seed": args.seed,
        "config_digest": _digest(
            {"methods": methods, "seed": args.seed, "bootstrap": args.bootstrap}
        ),
        "dataset": {"path": args.dataset, "n": int(x.size)},
        "results": results,
    }
    if args.json:
        print(json.dumps(payload, indent=2))
    elif args.csv:
        sys.stdout.write(_fit_csv(payload))
    else:
        sys.stdout.write(_fit_text(payload))
    if not any(e["converged"] for e in results):
        return EXIT_NO_FIT
    return EXIT_OK


def cmd_sample(args: argparse.Namespace) -> int:
    try:
        params = K4Params(args.mu, args.sigma, args.k, args.h)
    except ValueError as err:
        raise _CliError(EXIT_INPUT, str(err)) from err
    values = sample(params, args.n, np.random.default_rng(args.seed))
    digest = _digest(
        {"params": [args.mu, args.sigma, args.k, args.h], "n": args.n, "seed": args.seed}
    )
    lines = [f"# seed={args.seed} config={digest}"]
    lines += [f"{v:.17g}" for v in values]
    text = "\n".join(lines) + "\n"
    if args.output is None:
        sys.stdout.write(text)
    else:
        try:
            Path(args.output).write_text(text, encoding="utf-8")
        except OSError as err:
            raise _CliError(EXIT_INPUT, f"cannot write {args.output}: {err}") from err
    return EXIT_OK


_CONFIG_KEYS = {
    "mu": float, "sigma": float, "k": float, "h": float,
    "n": int, "reps": int, "seed": int,
    "quantile_levels": str, "methods": str,
    "rel_tolerance": float, "max_iterations": int, "restarts": int,
    "start_strategy": str,
}


def _parse_config(path: str) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8-sig")
    except OSError as err:
        raise _CliError(EXIT_INPUT, f"cannot read {path}: {err}") from err
    raw: dict[str, object] = {}
    problems: list[str] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            problems.append(f"line {lineno}: expected key=value, got {stripped!r}")
            continue
        key, _, value = stripped.partition("=")
        key, value = key.strip(), value.strip()
        if key not in _CONFIG_KEYS:
            problems.append(f"line {lineno}: unknown key {key!r}")
            continue
        if key in raw:
            problems.append(f"line {lineno}: duplicate key {key!r}")
            continue
        try:
            raw[key] = _CONFIG_KEYS[key](value)
        except ValueError:
            problems.append(f"line {lineno}: bad value for {key}: {value!r}")
    if problems:
        raise _CliError(EXIT_INPUT, f"{path}: " + "; ".join(problems))
    return raw


def _build_sim_config(raw: dict) -> SimConfig:
    true_params = K4Params(
        float(raw.get("mu", 0.0)),
        float(raw.get("sigma", 1.0)),
        float(raw.get("k", -0.2)),
        float(raw.get("h", -0.2)),
    )
    optimizer_kwargs = {}
    if "rel_tolerance" in raw:
        optimizer_kwargs["rel_tolerance"] = raw["rel_tolerance"]
    if "max_iterations" in raw:
        optimizer_kwargs["max_iterations"] = raw["max_iterations"]
    if "restarts" in raw:
        optimizer_kwargs["restarts"] = raw["restarts"]
    if "start_strategy" in raw:
        name = str(raw["start_strategy"]).lower()
        if name not in _START_STRATEGIES:
            raise _CliError(
                EXIT_INPUT,
                f"start_strategy must be one of {sorted(_START_STRATEGIES)}",
            )
        optimizer_kwargs["start_strategy"] = _START_STRATEGIES[name]
    kwargs: dict[str, object] = {
        "true_params": true_params,
        "optimizer": OptimizerConfig(**optimizer_kwargs),
    }
    for key in ("n", "reps", "seed"):
        if key in raw:
            kwargs[key] = raw[key]
    if "quantile_levels" in raw:
        try:
            kwargs["quantile_levels"] = tuple(
                float(v) for v in str(raw["quantile_levels"]).split(",") if v.strip()
            )
        except ValueError as err:
            raise _CliError(EXIT_INPUT, f"bad quantile_levels: {err}") from err
    if "methods" in raw:
        names: list[str] = []
        for part in str(raw["methods"]).split(","):
            part = part.strip()
            if part:
                names.extend(_expand_methods(part))
        kwargs["methods"] = tuple(dict.fromkeys(names))
    try:
        return SimConfig(**kwargs)
    except ValueError as err:
        raise _CliError(EXIT_INPUT, str(err)) from err


def cmd_simulate(args: argparse.Namespace) -> int:
    cfg = _build_sim_config(_parse_config(args.config))
    out_dir = Path(args.output)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as err:
        raise _CliError(EXIT_INPUT, f"cannot create {args.output}: {err}") from err
    reports = campaign([cfg])
    report = reports[0]
    if isinstance(report, Exception):
        raise _CliError(EXIT_NO_FIT, f"simulation failed: {report}")
    stamp = f"# seed={cfg.seed} config={cfg.digest()}\n"
    (out_dir / "results.csv").write_text(stamp + campaign_csv(reports), encoding="utf-8")
    (out_dir / "tables.txt").write_text(stamp + campaign_table(reports), encoding="utf-8")
    manifest = {
        "command": "simulate",
        "seed": cfg.seed,
        "derived_seed": report.config.seed,
        "config_digest": cfg.digest(),
        "n": cfg.n,
        "reps": cfg.reps,
        "methods": list(cfg.methods),
        "converged": dict(report.converged),
        "failures": dict(report.failures),
    }
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    print(f"wrote results.csv, tables.txt, manifest.json to {out_dir}")
    return EXIT_OK


def _delta_method_se(result, x, combo, T) -> float | None:
    cov = covariance_matrix(result, x, combo)
    if cov is None:
        return None
    p = result.params
    theta = np.array([p.mu, p.sigma, p.k, p.h])
    steps = np.maximum(1e-6, 1e-6 * np.abs(theta))
    grad = np.empty(4)
    for j in range(4):
        plus, minus = theta.copy(), theta.copy()
        plus[j] += steps[j]
        minus[j] -= steps[j]
        try:
            up = return_level(K4Params(*plus), T)
            down = return_level(K4Params(*minus), T)
        except ValueError:
            return None
        grad[j] = (up - down) / (2.0 * steps[j])
    variance = float(grad @ cov @ grad)
    if not math.isfinite(variance) or variance < 0:
        return None
    return math.sqrt(variance)


def cmd_return_level(args: argparse.Namespace) -> int:
    if args.period <= 1:
        raise _CliError(EXIT_INPUT, "return period -T must exceed 1")
    x = read_dataset(args.dataset, 5)
    methods = _expand_methods(args.method)
    if len(methods) != 1:
        raise _CliError(EXIT_INPUT, "return-level needs a single method, not 'all'")
    name = methods[0]
    fitter = resolve_method(name)
    try:
        result = fitter(x)
    except (ValueError, DegenerateDataError) as err:
        raise _CliError(EXIT_NO_FIT, f"{name} failed: {err}") from err
    if result is None or not result.converged:
        raise _CliError(EXIT_NO_FIT, f"{name} did not converge")
    combo = _method_combo(name)
    point = return_level(result.params, args.period)
    se = _delta_method_se(result, x, combo, args.period)

    payload: dict[str, object] = {
        "command": "return-level",
        "seed": args.seed,
        "config_digest": _digest(
            {"method": name, "T": args.period, "ci": args.profile_ci, "seed": args.seed}
        ),
        "dataset": {"path": args.dataset, "n": int(x.size)},
        "method": name,
        "T": args.period,
        "return_level": point,
        "se": se,
    }
    if args.bootstrap is not None:
        levels = []
        failures = 0
        for j in range(args.bootstrap):
            rng = np.random.default_rng([args.seed, j])
            boot = sample(result.params, x.size, rng)
            try:
                refit = fitter(boot)
            except (ValueError, DegenerateDataError):
                refit = None
            if refit is None or not refit.converged:
                failures += 1
                continue
            levels.append(return_level(refit.params, args.period))
        payload["bootstrap_se"] = float(np.std(levels, ddof=1)) if len(levels) > 1 else None
        payload["bootstrap_failures"] = failures
    if args.profile_ci is not None:
        ci = profile_likelihood_ci(
            x,
            args.period,
            args.profile_ci,
            combo if combo is not None else UNPENALIZED,
        )
        payload["ci"] = {
            "level": ci.level,
            "lower": ci.lower,
            "upper": ci.upper,
            "lower_open": ci.lower_open,
            "upper_open": ci.upper_open,
            "grid": [float(v) for v in ci.grid],
            "deviance": [float(v) for v in ci.deviance],
        }
    if args.json:
        print(json.dumps(payload, indent=2))
    else:
        lines = [
            f"# seed={payload['seed']} config={payload['config_digest']}",
            f"method {name}  T={args.period:g}  n={x.size}",
            f"return level: {point:.6g}",
            f"delta-method se: {'n/a' if se is None else format(se, '.6g')}",
        ]
        if "bootstrap_se" in payload:
            bse = payload["bootstrap_se"]
            lines.append(
                f"bootstrap se: {'n/a' if bse is None else format(bse, '.6g')}"
                f" (failures {payload['bootstrap_failures']})"
            )
        if "ci" in payload:
            ci_info = payload["ci"]
            mark_lo = " (open)" if ci_info["lower_open"] else ""
            mark_hi = " (open)" if ci_info["upper_open"] else ""
            lines.append(
                f"profile {ci_info['level']:g} CI: "
                f"[{ci_info['lower']:.6g}{mark_lo}, {ci_info['upper']:.6g}{mark_hi}]"
            )
            lines.append("deviance trace (x_T, deviance):")
            for g, d in zip(ci_info["grid"], ci_info["deviance"]):
                lines.append(f"  {g:.10g}  {d:.10g}")
        print("\n".join(lines))
    return EXIT_OK


def cmd_plotdata(args: argparse.Namespace) -> int:
    x = read_dataset(args.dataset, 5)
    methods = _expand_methods(args.method)
    if len(methods) != 1:
        raise _CliError(EXIT_INPUT, "plotdata needs a single method, not 'all'")
    name = methods[0]
    try:
        result = resolve_method(name)(x)
    except (ValueError, DegenerateDataError) as err:
        raise _CliError(EXIT_NO_FIT, f"{name} failed: {err}") from err
    if result is None or not result.converged:
        raise _CliError(EXIT_NO_FIT, f"{name} did not converge")
    params = result.params
    out_dir = Path(args.output)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as err:
        raise _CliError(EXIT_INPUT, f"cannot create {args.output}: {err}") from err
    digest = _digest({"method": name, "seed": args.seed, "n": int(x.size)})
    stamp = f"# seed={args.seed} config={digest}\n"

    lo, hi = quantile(params, 0.001), quantile(params, 0.999)
    grid = np.linspace(lo, hi, 512)
    density = pdf(params, grid)
    lines = [f"{float(g)!r},{float(d)!r}" for g, d in zip(grid, density)]
    (out_dir / "density.csv").write_text(
        stamp + "x,pdf\n" + "\n".join(lines) + "\n", encoding="utf-8"
    )

    ordered = np.sort(x)
    positions = (np.arange(1, x.size + 1) - 0.35) / x.size
    fitted = quantile(params, positions)
    qq_lines = [f"{float(e)!r},{float(f)!r}" for e, f in zip(ordered, fitted)]
    (out_dir / "qq.csv").write_text(
        stamp + "empirical,fitted\n" + "\n".join(qq_lines) + "\n", encoding="utf-8"
    )

    bins = int(np.ceil(np.log2(x.size))) + 1
    counts, edges = np.histogram(x, bins=bins)
    hist_lines = [
        f"{float(edges[i])!r},{float(edges[i + 1])!r},{int(counts[i])}"
        for i in range(bins)
    ]
    (out_dir / "histogram.csv").write_text(
        stamp + "bin_left,bin_right,count\n" + "\n".join(hist_lines) + "\n",
        encoding="utf-8",
    )
    print(f"wrote density.csv, qq.csv, histogram.csv to {out_dir}")
    return EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kappafit",
        description="Fit and study the four-parameter kappa distribution.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    fit = sub.add_parser("fit", help="fit a dataset by one or all methods")
    fit.add_argument("dataset")
    fit.add_argument("--method", default="all")
    fit.add_argument("--seed", type=int, default=0)
    fit.add_argument("--bootstrap", type=int, nargs="?", const=999, default=None,
                     metavar="B", help="bootstrap p-values with B replicates (default 999)")
    fmt = fit.add_mutually_exclusive_group()
    fmt.add_argument("--json", action="store_true")
    fmt.add_argument("--csv", action="store_true")
    fit.set_defaults(func=cmd_fit)

    smp = sub.add_parser("sample", help="draw synthetic data")
    smp.add_argument("--mu", type=float, default=0.0)
    smp.add_argument("--sigma", type=float, default=1.0)
    smp.add_argument("--k", type=float, default=0.0)
    smp.add_argument("--h", type=float, default=0.0)
    smp.add_argument("-n", type=int, required=True)
    smp.add_argument("--seed", type=int, default=0)
    smp.add_argument("-o", "--output", default=None)
    smp.set_defaults(func=cmd_sample)

    sim = sub.add_parser("simulate", help="run a Monte Carlo estimator comparison")
    sim.add_argument("config")
    sim.add_argument("-o", "--output", required=True, help="output directory")
    sim.set_defaults(func=cmd_simulate)

    rl = sub.add_parser("return-level", help="return level with uncertainty")
    rl.add_argument("dataset")
    rl.add_argument("-T", "--period", type=float, required=True)
    rl.add_argument("--method", default="mle")
    rl.add_argument("--profile-ci", type=float, default=None, metavar="LEVEL")
    rl.add_argument("--bootstrap", type=int, nargs="?", const=999, default=None,
                    metavar="B", help="bootstrap SE with B refits (default 999)")
    rl.add_argument("--seed", type=int, default=0)
    rl.add_argument("--json", action="store_true")
    rl.set_defaults(func=cmd_return_level)

    pd = sub.add_parser("plotdata", help="density, QQ, and histogram CSVs")
    pd.add_argument("dataset")
    pd.add_argument("--method", default="mle")
    pd.add_argument("--seed", type=int, default=0)
    pd.add_argument("-o", "--output", required=True, help="output directory")
    pd.set_defaults(func=cmd_plotdata)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _CliError as err:
        print(f"kappafit: {err}", file=sys.stderr)
        return err.code


if __name__ == "__main__":
    sys.exit(main())
