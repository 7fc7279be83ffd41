"""Reproducible experiment runner.

One JSON config document describes a run; command-line flags only override
config fields.  Exit codes are a stable contract: 0 pass, 1 certification
failure, 2 config error, 3 no applicable bound.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from .bounds import exact_tv_vs_normal
from .certify import (
    BoundReport,
    InapplicableBoundError,
    applicable_route,
    certify_cell,
    reports_to_csv,
    reports_to_json,
    resolve_theta,
    version_string,
)
from .core import summarize
from .empirical import DEFAULT_DELTA, streaming_pair_square_covariance
from .frames import simplex_geometry, standard_frame
from .samplers import DistributionSpec, Kind, sample
from .subspaces import (
    ank_to_csv,
    estimate_Ank,
    reflection_pair_diagnostics,
    rotation_pair_diagnostics,
)

EXIT_OK = 0
EXIT_CERTIFICATION_FAILED = 1
EXIT_CONFIG_ERROR = 2
EXIT_INAPPLICABLE = 3


class ConfigError(ValueError):
    pass


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    return cfg


def _require(cfg: dict, key: str):
    if key not in cfg:
        raise ConfigError(f"config is missing required field {key!r}")
    return cfg[key]


def _spec_from_config(d: dict) -> DistributionSpec:
    try:
        return DistributionSpec.from_dict(d)
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"invalid distribution: {exc}") from exc


def _positive_int(cfg: dict, key: str) -> int:
    value = _require(cfg, key)
    if not isinstance(value, int) or value < 1:
        raise ConfigError(f"{key!r} must be a positive integer, got {value!r}")
    return value


def _out_dir(cfg: dict) -> Path:
    out = Path(cfg.get("out", "."))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _workers() -> int:
    try:
        return max(1, int(os.environ.get("CLTBOUNDS_THREADS", "1")))
    except ValueError:
        return 1


def _cmd_sample(cfg: dict) -> int:
    spec = _spec_from_config(_require(cfg, "distribution"))
    n_samples = _positive_int(cfg, "N")
    seed = int(cfg.get("seed", 0))
    out = _out_dir(cfg)
    batch = sample(spec, n_samples, seed)
    stem = f"{spec.kind.value}_n{spec.n}_N{n_samples}_seed{seed}"
    batch.save(out / f"{stem}.bin")
    summary = summarize(batch)
    payload = {
        "version": version_string(),
        "config": cfg,
        "spec": batch.spec.to_dict(),
        "summary": summary.to_dict(),
    }
    with open(out / f"{stem}.json", "w") as fh:
        json.dump(payload, fh, indent=2)
    print(f"wrote {stem}.bin and {stem}.json to {out}")
    for key, value in summary.to_dict().items():
        print(f"  {key}: {value}")
    return EXIT_OK


def _expand_distributions(cfg: dict) -> list[DistributionSpec]:
    entries = _require(cfg, "distributions")
    if not isinstance(entries, list) or not entries:
        raise ConfigError("'distributions' must be a non-empty list")
    specs = []
    for entry in entries:
        ns = entry.get("n")
        n_values = ns if isinstance(ns, list) else [ns]
        if not n_values or any(not isinstance(v, int) for v in n_values):
            raise ConfigError(f"invalid n in distribution entry {entry!r}")
        for n in n_values:
            specs.append(_spec_from_config({**entry, "n": n}))
    return specs


def _certify_one_spec(args):
    spec, thetas, n_samples, cell_seed, delta, constants = args
    batch = sample(spec, n_samples, cell_seed)
    route = applicable_route(spec)
    needs_moments = route == "unconditional" and not (
        spec.kind is Kind.LP_BALL and spec.p is not None and math.isinf(spec.p)
    )
    summary = summarize(batch) if needs_moments else None
    return [
        certify_cell(
            spec, t, N=n_samples, seed=cell_seed, delta=delta,
            constants=constants, batch=batch, summary=summary,
        )
        for t in thetas
    ]


def _cmd_certify(cfg: dict) -> int:
    specs = _expand_distributions(cfg)
    thetas = cfg.get("theta", ["diagonal"])
    if not isinstance(thetas, list) or not thetas:
        raise ConfigError("'theta' must be a non-empty list")
    n_samples = _positive_int(cfg, "N")
    seed = int(cfg.get("seed", 0))
    delta = float(cfg.get("delta", DEFAULT_DELTA))
    constants = cfg.get("constants", {})
    out = _out_dir(cfg)

    for spec in specs:  # fail fast, before any sampling
        applicable_route(spec)

    jobs = [
        (spec, thetas, n_samples, seed + 1_000_003 * pos, delta, constants)
        for pos, spec in enumerate(specs)
    ]
    workers = _workers()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            per_spec = list(pool.map(_certify_one_spec, jobs))
    else:
        per_spec = [_certify_one_spec(job) for job in jobs]
    reports: list[BoundReport] = [r for group in per_spec for r in group]

    reports_to_json(reports, out / "certify.json", config=cfg)
    reports_to_csv(reports, out / "certify.csv")
    for r in reports:
        state = "PASS" if r.passed else "FAIL"
        extra = " (vacuous)" if r.vacuous else ""
        print(
            f"{state}{extra} {r.spec.kind.value}"
            f"{'' if r.spec.p is None else f'(p={r.spec.p})'} n={r.n} theta={r.theta_label}: "
            f"empirical={r.empirical.point_estimate:.5f} bound={r.bound.value:.5f} "
            f"[{r.bound_name}]"
        )
    n_failed = sum(not r.passed for r in reports)
    print(f"{len(reports) - n_failed}/{len(reports)} cells passed; wrote {out / 'certify.json'}")
    return EXIT_OK if n_failed == 0 else EXIT_CERTIFICATION_FAILED


def _cmd_scan_ank(cfg: dict) -> int:
    n_list = _require(cfg, "n_list")
    if not isinstance(n_list, list) or not n_list:
        raise ConfigError("'n_list' must be a non-empty list")
    template = _require(cfg, "distribution")
    k = _positive_int(cfg, "k")
    eps = float(_require(cfg, "eps"))
    n_subspaces = _positive_int(cfg, "n_subspaces")
    n_samples = _positive_int(cfg, "N")
    n_dirs = cfg.get("n_dirs")
    seed = int(cfg.get("seed", 0))
    out = _out_dir(cfg)
    results = []
    for n in n_list:
        spec = _spec_from_config({**template, "n": n})
        est = estimate_Ank(
            spec, k=k, eps=eps, n_subspaces=n_subspaces, N=n_samples,
            seed=seed, n_dirs=n_dirs,
        )
        results.append(est)
        print(
            f"n={n} k={k} eps={eps}: fraction={est.fraction:.3f} "
            f"(max sampled sup={est.sup_distances.max():.4f}) [{est.label}]"
        )
    ank_to_csv(results, out / "ank_scan.csv")
    print(f"wrote {out / 'ank_scan.csv'}")
    return EXIT_OK


def _cmd_diagnose(cfg: dict) -> int:
    experiment = cfg.get("experiment", "reflection")
    seed = int(cfg.get("seed", 0))
    out = _out_dir(cfg)
    if experiment == "reflection":
        spec = _spec_from_config(_require(cfg, "distribution"))
        n_samples = _positive_int(cfg, "N")
        batch = sample(spec, n_samples, seed)
        frame_name = cfg.get("frame", "standard")
        if frame_name == "standard":
            frame = standard_frame(spec.n)
        elif frame_name == "simplex-edges":
            frame = simplex_geometry(spec.n).edge_frame
        else:
            raise ConfigError(f"unknown frame {frame_name!r}")
        rows = []
        for theta_spec in cfg.get("theta", ["e1"]):
            theta, label = resolve_theta(theta_spec, spec.n)
            diag = reflection_pair_diagnostics(batch, frame, theta, seed=seed + 1)
            rows.append(
                {
                    "theta": label,
                    "slope": diag.slope,
                    "expected_slope": 2.0 / spec.n,
                    "slope_over_expected": diag.slope * spec.n / 2.0,
                    "slope_se": diag.slope_se,
                    "intercept": diag.intercept,
                    "var_conditional": diag.var_conditional,
                    "third_abs": diag.third_abs,
                    "sup_abs": diag.sup_abs,
                }
            )
            print(
                f"theta={label}: slope={diag.slope:.6f} expected={2.0 / spec.n:.6f} "
                f"ratio={diag.slope * spec.n / 2.0:.4f} (se {diag.slope_se * spec.n / 2.0:.4f})"
            )
        path = out / "reflection_diagnostics.csv"
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
            writer.writeheader()
            writer.writerows(rows)
    elif experiment == "rotation":
        spec = _spec_from_config(_require(cfg, "distribution"))
        n_samples = _positive_int(cfg, "N")
        batch = sample(spec, n_samples, seed)
        eps_list = cfg.get("eps_list", [0.2, 0.1, 0.05])
        diags = rotation_pair_diagnostics(batch, eps_list, seed=seed + 1)
        path = out / "rotation_diagnostics.csv"
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["eps", "r1", "r1_se", "r2", "r2_se", "r3", "r3_se"])
            for d in diags:
                writer.writerow([d.eps, d.r1, d.r1_se, d.r2, d.r2_se, d.r3, d.r3_se])
                print(
                    f"eps={d.eps}: r1={d.r1:.4f}(se {d.r1_se:.4f}) "
                    f"r2={d.r2:.4f}(se {d.r2_se:.4f}) r3={d.r3:.5f}"
                )
    elif experiment == "square-correlation":
        n_list = _require(cfg, "n_list")
        if not isinstance(n_list, list) or not n_list:
            raise ConfigError("'n_list' must be a non-empty list")
        template = cfg.get("distribution", {"kind": "linf_exponential"})
        n_samples = _positive_int(cfg, "N")
        path = out / "square_correlation.csv"
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["n", "cov_x1sq_x2sq", "se", "N", "seed"])
            for n in n_list:
                spec = _spec_from_config({**template, "n": n})
                cov, se = streaming_pair_square_covariance(spec, n_samples, seed)
                writer.writerow([n, cov, se, n_samples, seed])
                print(f"n={n}: Cov(X1^2, X2^2) = {cov:.6f} (se {se:.2g})")
    else:
        raise ConfigError(f"unknown experiment {experiment!r}")
    print(f"wrote {path}")
    return EXIT_OK


def _cmd_report(cfg: dict) -> int:
    path = _require(cfg, "input")
    try:
        with open(path) as fh:
            payload = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read report: {exc}") from exc
    print(f"report from {payload.get('version', 'unknown version')}")
    for r in payload.get("reports", []):
        spec = r["spec"]
        state = "PASS" if r["passed"] else "FAIL"
        extra = " (vacuous)" if r.get("vacuous") else ""
        print(
            f"{state}{extra} {spec['kind']} n={r['n']} theta={r['theta']}: "
            f"empirical={r['empirical']['point_estimate']:.5f} "
            f"bound={r['bound']['value']:.5f} [{r['bound_name']}]"
        )
    print("all passed" if payload.get("all_passed") else "FAILURES PRESENT")
    return EXIT_OK


def _cmd_tv_exact(cfg: dict) -> int:
    """Convenience: quadrature-exact TV table for the closed-form marginals."""
    kind = cfg.get("kind", "sphere_shell")
    n_list = _require(cfg, "n_list")
    out = _out_dir(cfg)
    path = out / "tv_exact.csv"
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["kind", "n", "tv_exact", "bound_8_over_n_minus_1"])
        for n in n_list:
            tv = exact_tv_vs_normal(kind, n)
            writer.writerow([kind, n, tv, 8.0 / (n - 1)])
            print(f"{kind} n={n}: TV={tv:.6g} (8/(n-1)={8.0 / (n - 1):.6g})")
    print(f"wrote {path}")
    return EXIT_OK


_COMMANDS = {
    "sample": _cmd_sample,
    "certify": _cmd_certify,
    "scan-ank": _cmd_scan_ank,
    "diagnose": _cmd_diagnose,
    "report": _cmd_report,
    "tv-exact": _cmd_tv_exact,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="cltbounds",
        description="Samplers, bounds, and empirical certification for "
        "normal approximation of high-dimensional projections.",
    )
    parser.add_argument("command", choices=sorted(_COMMANDS))
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--seed", type=int, help="override config seed")
    parser.add_argument("--out", help="override output directory")
    parser.add_argument("--input", help="override report input path")
    parser.add_argument("--version", action="version", version=version_string())
    args = parser.parse_args(argv)

    try:
        cfg = _load_config(args.config)
        if args.seed is not None:
            cfg["seed"] = args.seed
        if args.out is not None:
            cfg["out"] = args.out
        if args.input is not None:
            cfg["input"] = args.input
        cfg_command = cfg.get("command")
        if cfg_command is not None and cfg_command != args.command:
            raise ConfigError(
                f"config is for command {cfg_command!r} but {args.command!r} was requested"
            )
        return _COMMANDS[args.command](cfg)
    except (ConfigError, ValueError) as exc:
        if isinstance(exc, InapplicableBoundError):
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_INAPPLICABLE
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR


if __name__ == "__main__":
    sys.exit(main())
