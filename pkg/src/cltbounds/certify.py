"""The certification predicate: pair each distribution with its applicable
theoretical bound, measure the empirical distance, and record a verdict.

Kolmogorov routes pass when (point estimate - DKW slack) <= bound; total
variation routes compare the histogram estimate against bound + a fixed
estimator allowance.  Bounds whose leading constants the source analysis
leaves non-explicit never gate a verdict; they are attached informationally.
"""

from __future__ import annotations

import csv
import json
import math
import subprocess
from dataclasses import dataclass

import numpy as np

from . import __version__
from .bounds import (
    BoundValue,
    TOTAL_VARIATION,
    VARIANT_STD_DEV,
    bound_lp,
    bound_simplex,
    bound_sncp_bounded,
    bound_sph_symm,
    bound_unconditional,
    bound_unconditional_bounded,
)
from .core import MomentSummary, summarize
from .empirical import (
    DEFAULT_DELTA,
    DistanceEstimate,
    kolmogorov_vs_normal,
    project,
    tv_vs_normal_histogram,
)
from .frames import simplex_geometry
from .samplers import (
    DistributionSpec,
    Kind,
    SPHERICAL_KINDS,
    SampleBatch,
    sample,
)

__all__ = [
    "BoundReport",
    "InapplicableBoundError",
    "TV_ESTIMATOR_ALLOWANCE",
    "applicable_route",
    "certify_cell",
    "certify_grid",
    "reports_to_csv",
    "reports_to_json",
    "resolve_theta",
    "version_string",
]

TV_ESTIMATOR_ALLOWANCE = 0.02

ROUTE_UNCONDITIONAL = "unconditional"
ROUTE_SIMPLEX = "simplex"
ROUTE_SPHERICAL = "spherical"

# exact moments of a coordinate uniform on [-sqrt(3), sqrt(3)]
CUBE_FOURTH = 9.0 / 5.0
CUBE_THIRD_ABS = 3.0 * math.sqrt(3.0) / 4.0
CUBE_SUP = math.sqrt(3.0)


class InapplicableBoundError(ValueError):
    """No theoretical bound with explicit constants applies to this spec."""


def applicable_route(spec: DistributionSpec) -> str:
    if spec.kind is Kind.SIMPLEX:
        return ROUTE_SIMPLEX
    if spec.kind in SPHERICAL_KINDS:
        return ROUTE_SPHERICAL
    if spec.kind in (Kind.LP_BALL, Kind.LP_CONE, Kind.LINF_EXPONENTIAL):
        return ROUTE_UNCONDITIONAL
    raise InapplicableBoundError(
        f"no explicit-constant bound applies to kind {spec.kind.value!r} "
        "(surface-measure batches are weighted; their bounds carry "
        "non-explicit constants and are reported informationally only)"
    )


def resolve_theta(theta_spec, n: int) -> tuple[np.ndarray, str]:
    """Turn a config theta description into a unit vector plus a label.

    Accepted: "e1", "diagonal", "random(<seed>)", or an explicit vector
    (normalized if needed).
    """
    if isinstance(theta_spec, str):
        name = theta_spec.strip()
        if name == "e1":
            theta = np.zeros(n)
            theta[0] = 1.0
            return theta, "e1"
        if name == "diagonal":
            return np.full(n, n**-0.5), "diagonal"
        if name.startswith("random(") and name.endswith(")"):
            seed = int(name[len("random(") : -1])
            rng = np.random.default_rng(seed)
            theta = rng.standard_normal(n)
            theta /= np.linalg.norm(theta)
            return theta, name
        raise ValueError(f"unknown theta specification {theta_spec!r}")
    theta = np.asarray(theta_spec, dtype=float)
    if theta.shape != (n,):
        raise ValueError(f"explicit theta must have length {n}, got shape {theta.shape}")
    nrm = float(np.linalg.norm(theta))
    if nrm <= 0.0:
        raise ValueError("explicit theta must be nonzero")
    return theta / nrm, "explicit"


@dataclass(frozen=True)
class BoundReport:
    """One certification cell: a (distribution, theta, n) triple."""

    spec: DistributionSpec
    theta_label: str
    n: int
    N: int
    seed: int
    delta: float
    bound_name: str
    bound: BoundValue
    empirical: DistanceEstimate
    passed: bool
    vacuous: bool
    margin: float  # bound - adjusted empirical; nonnegative iff passed
    informational: tuple = ()
    notes: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "spec": self.spec.to_dict(),
            "theta": self.theta_label,
            "n": self.n,
            "N": self.N,
            "seed": self.seed,
            "delta": self.delta,
            "bound_name": self.bound_name,
            "bound": self.bound.to_dict(),
            "empirical": self.empirical.to_dict(),
            "passed": self.passed,
            "vacuous": self.vacuous,
            "margin": self.margin,
            "informational": [
                {"name": name, **bv.to_dict()} for name, bv in self.informational
            ],
            "notes": list(self.notes),
        }


def _exact_norm_sq_std(spec: DistributionSpec) -> float | None:
    """Closed-form sqrt(Var ||X||^2) for the spherically symmetric kinds."""
    n = spec.n
    if spec.kind is Kind.SPHERE_SHELL:
        return 0.0
    if spec.kind is Kind.BALL_UNIFORM:
        return math.sqrt(4.0 * n / (n + 4))
    if spec.kind is Kind.SPHERICAL_EXPONENTIAL:
        return math.sqrt(n * (4.0 * n + 6.0) / (n + 1))
    return None


def _moment_inputs(
    spec: DistributionSpec, summary: MomentSummary | None
) -> tuple[float, float, float, str]:
    """(max fourth, max square covariance, max third abs, provenance)."""
    if spec.kind is Kind.LP_BALL and spec.p is not None and math.isinf(spec.p):
        return CUBE_FOURTH, 0.0, CUBE_THIRD_ABS, "exact"
    if summary is None:
        raise ValueError("Monte Carlo moments required but no summary supplied")
    return summary.max_fourth, summary.max_sq_cov, summary.max_third_abs, "monte-carlo"


def _coordinate_sup(spec: DistributionSpec) -> float | None:
    """Almost-sure bound on |X_i|, when the support is bounded."""
    if spec.kind in (Kind.LP_BALL, Kind.LP_CONE, Kind.LP_SURFACE):
        return spec.scale  # |x_i| <= ||x||_p <= scale on the scaled body
    return None


def certify_cell(
    spec: DistributionSpec,
    theta_spec,
    N: int,
    seed: int,
    delta: float = DEFAULT_DELTA,
    constants: dict | None = None,
    batch: SampleBatch | None = None,
    summary: MomentSummary | None = None,
) -> BoundReport:
    """Evaluate the certification predicate for one (spec, theta) cell.

    A pre-sampled batch (and its moment summary) may be passed in so a grid
    over many thetas reuses the same samples.
    """
    route = applicable_route(spec)
    constants = constants or {}
    if batch is None:
        batch = sample(spec, N, seed)
    spec = batch.spec
    n = batch.n
    theta, theta_label = resolve_theta(theta_spec, n)
    notes: list[str] = []
    informational: list[tuple[str, BoundValue]] = []

    if route == ROUTE_SPHERICAL:
        exact_std = _exact_norm_sq_std(spec)
        if exact_std is not None:
            statistic, prov = exact_std, "exact"
        else:
            if summary is None:
                summary = summarize(batch)
            statistic, prov = math.sqrt(summary.norm_sq_var), "monte-carlo"
        bound = bound_sph_symm(n, VARIANT_STD_DEV, statistic)
        bound_name = f"spherical-std-dev[{prov}]"
        paper_a = 8.0 if spec.kind is Kind.SPHERE_SHELL else 16.0
        informational.append(
            (
                "spherical-fixed-constant",
                BoundValue(value=paper_a / (n - 1), kind=TOTAL_VARIATION,
                           constants_used={"a": paper_a}),
            )
        )
        if spec.kind is Kind.SPHERICAL_EXPONENTIAL and n > 25:
            informational.append(
                (
                    "poincare-spectral-gap",
                    BoundValue(
                        value=10.0 * math.sqrt(13.0) / math.sqrt(n),
                        kind=TOTAL_VARIATION,
                        constants_used={"lambda1_lower": 1.0 / 13.0},
                    ),
                )
            )
        empirical = tv_vs_normal_histogram(project(batch, theta))
        adjusted = empirical.point_estimate - TV_ESTIMATOR_ALLOWANCE
        vacuous = bound.value >= 2.0
        notes.append(f"tv-allowance={TV_ESTIMATOR_ALLOWANCE}")
    else:
        if route == ROUTE_SIMPLEX:
            geometry = simplex_geometry(n)
            bound = bound_simplex(theta, geometry, c1=constants.get("c1"))
            bound_name = "simplex-assembled" if constants.get("c1") is None else "simplex-configured"
        else:
            if spec.kind is not Kind.LP_BALL or not math.isinf(spec.p or 0):
                if summary is None:
                    summary = summarize(batch)
            fourth, sq_cov, third_abs, prov = _moment_inputs(spec, summary)
            bound = bound_unconditional(theta, fourth, sq_cov, third_abs)
            bound_name = f"unconditional[{prov}]"
            a = _coordinate_sup(spec)
            if a is not None:
                informational.append(
                    ("unconditional-bounded", bound_unconditional_bounded(theta, fourth, sq_cov, a))
                )
                if a >= 1.0:
                    informational.append(("sncp-bounded", bound_sncp_bounded(theta, a)))
            if spec.p is not None:
                informational.append(
                    (
                        "lp-two-branch",
                        bound_lp(
                            theta,
                            n,
                            spec.p,
                            c1=constants.get("c1", 1.0),
                            d1p=constants.get("d1p", 1.0),
                        ),
                    )
                )
        empirical = kolmogorov_vs_normal(project(batch, theta), delta=delta)
        adjusted = empirical.point_estimate - empirical.dkw_slack
        vacuous = bound.value >= 1.0
        if vacuous:
            notes.append("vacuous bound, trivially passes")

    passed = adjusted <= bound.value
    return BoundReport(
        spec=spec,
        theta_label=theta_label,
        n=n,
        N=batch.N,
        seed=seed,
        delta=delta,
        bound_name=bound_name,
        bound=bound,
        empirical=empirical,
        passed=bool(passed),
        vacuous=bool(vacuous),
        margin=float(bound.value - adjusted),
        informational=tuple(informational),
        notes=tuple(notes),
    )


def certify_grid(
    specs,
    theta_specs,
    N: int,
    seed: int,
    delta: float = DEFAULT_DELTA,
    constants: dict | None = None,
) -> list[BoundReport]:
    """Certify every (spec, theta) cell, sampling each spec once.

    Cell seeds derive deterministically from the master seed and the spec's
    position, so the grid is reproducible regardless of evaluation order.
    """
    reports = []
    for pos, spec in enumerate(specs):
        cell_seed = seed + 1_000_003 * pos
        batch = sample(spec, N, cell_seed)
        needs_moments = applicable_route(spec) == ROUTE_UNCONDITIONAL and not (
            spec.kind is Kind.LP_BALL and spec.p is not None and math.isinf(spec.p)
        )
        summary = summarize(batch) if needs_moments else None
        for theta_spec in theta_specs:
            reports.append(
                certify_cell(
                    spec,
                    theta_spec,
                    N=N,
                    seed=cell_seed,
                    delta=delta,
                    constants=constants,
                    batch=batch,
                    summary=summary,
                )
            )
    return reports


def version_string() -> str:
    """git-describe when available, else the package version."""
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty"],
            capture_output=True,
            text=True,
            timeout=5,
        )
        if out.returncode == 0 and out.stdout.strip():
            return f"cltbounds {__version__} ({out.stdout.strip()})"
    except (OSError, subprocess.SubprocessError):
        pass
    return f"cltbounds {__version__}"


def reports_to_json(reports, path, config: dict | None = None) -> None:
    payload = {
        "version": version_string(),
        "config": config or {},
        "reports": [r.to_dict() for r in reports],
        "all_passed": all(r.passed for r in reports),
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2)


def reports_to_csv(reports, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            [
                "kind", "p", "n", "theta", "N", "seed", "delta", "bound_name",
                "bound_kind", "bound", "empirical", "slack", "margin",
                "passed", "vacuous", "flags",
            ]
        )
        for r in reports:
            writer.writerow(
                [
                    r.spec.kind.value,
                    r.spec.p if r.spec.p is not None else "",
                    r.n,
                    r.theta_label,
                    r.N,
                    r.seed,
                    r.delta,
                    r.bound_name,
                    r.bound.kind,
                    f"{r.bound.value:.6g}",
                    f"{r.empirical.point_estimate:.6g}",
                    f"{r.empirical.dkw_slack:.6g}" if r.empirical.dkw_slack is not None else "",
                    f"{r.margin:.6g}",
                    int(r.passed),
                    int(r.vacuous),
                    ";".join(r.bound.flags),
                ]
            )
