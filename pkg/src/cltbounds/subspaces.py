"""Haar-random orthogonal matrices and subspaces, randomized subspace
experiments, and exchangeable-pair diagnostics for the reflection and
infinitesimal-rotation constructions behind the bounds."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .bounds import (
    BoundValue,
    DensePairMoments,
    KOLMOGOROV,
    SimplexPairMoments,
)
from .core import as_unit_vector
from .empirical import _ks_statistic, _ks_statistic_both_signs
from .frames import TightFrame, frame_coeffs
from .samplers import SPHERICAL_KINDS, SampleBatch, sample

__all__ = [
    "AnkEstimate",
    "OrthogonalMatrix",
    "PairDiagnostics",
    "RotationDiagnostics",
    "Subspace",
    "ank_to_csv",
    "estimate_Ank",
    "haar_orthogonal",
    "haar_orthogonal_sample",
    "random_subspace",
    "reflection_pair_diagnostics",
    "rotation_pair_diagnostics",
    "stein_rr_assemble",
]

_BLOCK = 1 << 16

STEIN_THIRD_COEFF = (2.0 * math.pi) ** -0.25
STEIN_BOUNDED_SQRT_COEFF = 12.0
STEIN_BOUNDED_SUP_COEFF = 43.0


@dataclass(frozen=True)
class OrthogonalMatrix:
    """A Haar-distributed orthogonal matrix and the seed that made it."""

    entries: np.ndarray
    seed: int

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    def orthogonality_residual(self) -> float:
        q = self.entries
        return float(np.linalg.norm(q.T @ q - np.eye(self.n), ord="fro"))


def _sign_fixed_qr(g: np.ndarray) -> np.ndarray:
    """QR with the R-diagonal forced positive (unbiased Haar; plain QR is not).

    Accepts a stack (..., n, n) and fixes signs column by column.
    """
    q, r = np.linalg.qr(g)
    d = np.sign(np.diagonal(r, axis1=-2, axis2=-1))
    d[d == 0.0] = 1.0
    return q * d[..., None, :]


def haar_orthogonal(n: int, seed: int) -> OrthogonalMatrix:
    """One Haar-distributed n x n orthogonal matrix."""
    if n < 2:
        raise ValueError(f"dimension must be at least 2, got {n}")
    rng = np.random.default_rng(seed)
    q = _sign_fixed_qr(rng.standard_normal((n, n)))
    return OrthogonalMatrix(entries=q, seed=seed)


def haar_orthogonal_sample(n: int, count: int, seed: int) -> np.ndarray:
    """A (count, n, n) stack of independent Haar orthogonal matrices."""
    rng = np.random.default_rng(seed)
    return _sign_fixed_qr(rng.standard_normal((count, n, n)))


@dataclass(frozen=True)
class Subspace:
    """k orthonormal basis vectors (rows) of a subspace of R^n."""

    basis: np.ndarray  # (k, n)

    @property
    def n(self) -> int:
        return self.basis.shape[1]

    @property
    def k(self) -> int:
        return self.basis.shape[0]

    def gram_residual(self) -> float:
        b = self.basis
        return float(np.linalg.norm(b @ b.T - np.eye(self.k), ord="fro"))


def random_subspace(n: int, k: int, seed: int) -> Subspace:
    """A subspace drawn from the rotation-invariant law on k-planes."""
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={n}")
    return Subspace(basis=haar_orthogonal(n, seed).entries[:k])


def uniform_directions(subspace: Subspace, count: int, rng: np.random.Generator) -> np.ndarray:
    """Unit vectors uniform on the sphere of the subspace, as rows in R^n."""
    coeffs = rng.standard_normal((count, subspace.k))
    coeffs /= np.linalg.norm(coeffs, axis=1, keepdims=True)
    return coeffs @ subspace.basis


@dataclass(frozen=True)
class AnkEstimate:
    """Fraction of random subspaces whose worst sampled direction stays
    within eps of normal in Kolmogorov distance.

    The per-subspace sup over the unit sphere is approximated by a max over
    sampled directions, so ``sup_distances`` are lower approximations of the
    true sups and ``fraction`` is, if anything, optimistic.
    """

    fraction: float
    sup_distances: np.ndarray
    n: int
    k: int
    eps: float
    n_subspaces: int
    n_dirs: int
    N: int
    seed: int
    label: str = "direction-sampled lower approximation of the sup"


def estimate_Ank(
    spec,
    k: int,
    eps: float,
    n_subspaces: int,
    N: int,
    seed: int,
    n_dirs: int | None = None,
    batch: SampleBatch | None = None,
) -> AnkEstimate:
    """Randomized-subspace experiment for the projection law of spec.

    One shared batch of N samples is projected onto ``n_dirs`` uniform
    directions (default 50 k) in each of ``n_subspaces`` random subspaces;
    a subspace counts as good when the max Kolmogorov distance over its
    sampled directions is at most eps.  For k = 1 the unit sphere of the
    subspace has exactly two elements, so direction sampling is replaced by
    exact enumeration of both signs (from a single sorted pass).
    """
    if eps <= 0.0:
        raise ValueError(f"eps must be positive, got {eps}")
    if n_subspaces < 1:
        raise ValueError("need at least one subspace")
    if n_dirs is None:
        n_dirs = 50 * k
    if batch is None:
        batch = sample(spec, N, seed)
    n = batch.n
    sups = np.empty(n_subspaces)
    for s in range(n_subspaces):
        sub_seed = (seed + 0x9E37) * 0x10001 + s  # distinct per subspace, deterministic
        subspace = random_subspace(n, k, sub_seed)
        if k == 1:
            sups[s] = max(_ks_statistic_both_signs(batch.data @ subspace.basis[0]))
            continue
        rng = np.random.default_rng(sub_seed ^ 0xD1CE)
        dirs = uniform_directions(subspace, n_dirs, rng)
        worst = 0.0
        for lo in range(0, n_dirs, 16):
            proj = batch.data @ dirs[lo : lo + 16].T
            for col in range(proj.shape[1]):
                worst = max(worst, _ks_statistic(proj[:, col]))
        sups[s] = worst
    return AnkEstimate(
        fraction=float(np.mean(sups <= eps)),
        sup_distances=sups,
        n=n,
        k=k,
        eps=eps,
        n_subspaces=n_subspaces,
        n_dirs=n_dirs,
        N=batch.N,
        seed=seed,
    )


def ank_to_csv(estimates, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["n", "k", "eps", "fraction", "n_subspaces", "n_dirs", "N", "seed"])
        for est in estimates:
            writer.writerow(
                [est.n, est.k, est.eps, est.fraction, est.n_subspaces, est.n_dirs, est.N, est.seed]
            )


@dataclass(frozen=True)
class PairDiagnostics:
    """Estimated ingredients of the exchangeable-pair bound for one batch.

    ``slope`` regresses W - W' on W (the linearity condition predicts
    lam = 2/n exactly); ``var_conditional`` is the equal-count-binned
    estimate of Var E[(W-W')^2 | W]; the ``*_exact`` fields are the
    condition-on-X upper proxy and the exact third moment, filled in when
    exact coefficient moments were supplied.
    """

    lam: float
    slope: float
    intercept: float
    slope_se: float
    var_conditional: float
    third_abs: float
    sup_abs: float
    var_conditional_exact: float | None = None
    third_abs_exact: float | None = None


def _binned_conditional_variance(w: np.ndarray, dsq: np.ndarray) -> float:
    order = np.argsort(w)
    n_bins = math.ceil(len(w) ** (1.0 / 3.0))
    total = len(w)
    means, weights = [], []
    for idx in np.array_split(order, n_bins):
        means.append(float(dsq[idx].mean()))
        weights.append(len(idx) / total)
    means = np.asarray(means)
    weights = np.asarray(weights)
    overall = float(weights @ means)
    return float(weights @ (means - overall) ** 2)


def _reflection_symmetry_check(batch: SampleBatch, frame: TightFrame, theta: np.ndarray) -> None:
    """Cheap empirical check that reflecting in a frame hyperplane leaves the
    projected law unchanged (necessary for the exchangeable pair to be valid)."""
    take = min(batch.N, 100_000)
    data = batch.data[:take]
    w = data @ theta
    coeffs = frame_coeffs(frame, theta)
    u = frame.vectors[int(np.argmax(np.abs(coeffs)))]
    w_ref = w - 2.0 * (data @ u) * float(u @ theta)
    scale = max(float(np.abs(w).mean()), 1e-12)
    se = w.std() / math.sqrt(take)
    if abs(float(w_ref.mean() - w.mean())) > 8.0 * se + 1e-9 * scale:
        raise ValueError(
            "batch does not look reflection-symmetric for this frame "
            "(projected mean shifts under reflection)"
        )


def reflection_pair_diagnostics(
    batch: SampleBatch,
    frame: TightFrame,
    theta,
    seed: int,
    pair_moments=None,
    coeff_third_moments=None,
    check_symmetry: bool = True,
) -> PairDiagnostics:
    """Diagnostics for the random-reflection exchangeable pair.

    For each sample an index I is drawn uniformly over the frame and
    W' = W - 2 X_(I) theta_(I) is formed.  ``pair_moments`` (dense table or
    SimplexPairMoments) and ``coeff_third_moments`` (scalar max or length-m
    array of E|X_(i)|^3) unlock the exact conditional-variance proxy and the
    exact third moment alongside the sampled estimates.
    """
    if frame.n != batch.n:
        raise ValueError(f"dimension mismatch: frame n={frame.n}, batch n={batch.n}")
    theta = as_unit_vector(theta, batch.n)
    if check_symmetry:
        _reflection_symmetry_check(batch, frame, theta)
    n_total, n, m = batch.N, batch.n, frame.m
    theta_coeffs = frame_coeffs(frame, theta)

    rng = np.random.default_rng(seed)
    w = np.empty(n_total)
    diff = np.empty(n_total)
    for lo in range(0, n_total, _BLOCK):
        blk = batch.data[lo : lo + _BLOCK]
        idx = rng.integers(0, m, len(blk))
        sel = frame.vectors[idx]
        coeff = np.einsum("ij,ij->i", blk, sel)
        w[lo : lo + len(blk)] = blk @ theta
        diff[lo : lo + len(blk)] = 2.0 * coeff * theta_coeffs[idx]

    w_mean, d_mean = float(w.mean()), float(diff.mean())
    w_var = float(w.var())
    slope = float(np.mean((diff - d_mean) * (w - w_mean))) / w_var
    intercept = d_mean - slope * w_mean
    resid = diff - slope * w - intercept
    slope_se = float(resid.std()) / (math.sqrt(n_total) * math.sqrt(w_var))

    dsq = diff * diff
    var_conditional = _binned_conditional_variance(w, dsq)
    third_abs = float(np.mean(np.abs(diff) ** 3))
    sup_abs = float(np.abs(diff).max())

    var_exact = None
    if pair_moments is not None:
        pm = (
            pair_moments
            if isinstance(pair_moments, (DensePairMoments, SimplexPairMoments))
            else DensePairMoments(pair_moments)
        )
        s = pm.quadratic_form(theta_coeffs**2)
        var_exact = (16.0 / m**2) * s - (4.0 / n) ** 2

    third_exact = None
    if coeff_third_moments is not None:
        abs3 = np.abs(theta_coeffs) ** 3
        if np.ndim(coeff_third_moments) == 0:
            third_exact = (8.0 / m) * float(coeff_third_moments) * float(abs3.sum())
        else:
            moments = np.asarray(coeff_third_moments, dtype=float)
            if moments.shape != (m,):
                raise ValueError(f"expected {m} third moments, got shape {moments.shape}")
            third_exact = (8.0 / m) * float(abs3 @ moments)

    return PairDiagnostics(
        lam=2.0 / n,
        slope=slope,
        intercept=intercept,
        slope_se=slope_se,
        var_conditional=var_conditional,
        third_abs=third_abs,
        sup_abs=sup_abs,
        var_conditional_exact=var_exact,
        third_abs_exact=third_exact,
    )


@dataclass(frozen=True)
class RotationDiagnostics:
    """Small-angle rotation-pair ratios at one angle parameter eps.

    r1 -> 1 (linearity), r2 -> 1 (conditional second moment), r3 bounded
    (third moment scales like eps^3)."""

    eps: float
    r1: float
    r1_se: float
    r2: float
    r2_se: float
    r3: float
    r3_se: float


def rotation_pair_diagnostics(
    batch: SampleBatch, eps_list, seed: int, assume_spherical: bool = False
) -> list[RotationDiagnostics]:
    """Diagnostics for the random two-plane rotation pair.

    For each eps, every sample gets a fresh Haar two-frame (q1, q2) and
    W_eps = <R X, e_1> for the rotation by angle arcsin(eps) in that plane;
    only the first components and the two frame projections of X enter, so
    the two-frame is drawn directly by Gram-Schmidt on two Gaussian vectors
    (which matches the sign-fixed QR convention).
    """
    spec = batch.spec
    if not assume_spherical and (spec is None or spec.kind not in SPHERICAL_KINDS):
        raise ValueError(
            "rotation diagnostics need a spherically symmetric batch "
            "(pass assume_spherical=True to override)"
        )
    eps_list = list(eps_list)
    for eps in eps_list:
        if not (0.0 < eps < 0.5):
            raise ValueError(f"eps must lie in (0, 1/2), got {eps}")

    n_total = batch.N
    w = batch.data[:, 0]
    x2_sq_mean = float(np.mean(batch.data[:, 1] ** 2))
    w_mean, w_var = float(w.mean()), float(w.var())

    out = []
    for pos, eps in enumerate(eps_list):
        shrink = 1.0 - math.sqrt(1.0 - eps * eps)
        sums = np.zeros(6)  # D, DW, D^2, |D|^3, D^4, |D|^6
        rng = np.random.default_rng(block_seed_rotation(seed, pos))
        for lo in range(0, n_total, _BLOCK):
            blk = batch.data[lo : lo + _BLOCK]
            cnt = len(blk)
            g1 = rng.standard_normal((cnt, batch.n))
            g2 = rng.standard_normal((cnt, batch.n))
            q1 = g1 / np.linalg.norm(g1, axis=1, keepdims=True)
            g2 -= np.einsum("ij,ij->i", q1, g2)[:, None] * q1
            q2 = g2 / np.linalg.norm(g2, axis=1, keepdims=True)
            s1 = np.einsum("ij,ij->i", q1, blk)
            s2 = np.einsum("ij,ij->i", q2, blk)
            rotational = q1[:, 0] * s2 - q2[:, 0] * s1
            radial = q1[:, 0] * s1 + q2[:, 0] * s2
            d = -eps * rotational + shrink * radial
            a = np.abs(d)
            sums += [
                d.sum(),
                (d * blk[:, 0]).sum(),
                (d * d).sum(),
                (a**3).sum(),
                (d**4).sum(),
                (a**6).sum(),
            ]
        d_mean, dw_mean, dsq_mean, a3_mean, d4_mean, a6_mean = sums / n_total
        slope = (dw_mean - d_mean * w_mean) / w_var
        resid_var = max((dsq_mean - d_mean**2) - slope**2 * w_var, 0.0)
        slope_se = math.sqrt(resid_var / (n_total * w_var))
        unit = eps * eps / batch.n
        r1, r1_se = slope / unit, slope_se / unit
        r2_denom = 2.0 * unit * x2_sq_mean
        r2 = dsq_mean / r2_denom
        r2_se = math.sqrt(max(d4_mean - dsq_mean**2, 0.0) / n_total) / r2_denom
        r3 = a3_mean / eps**3
        r3_se = math.sqrt(max(a6_mean - a3_mean**2, 0.0) / n_total) / eps**3
        out.append(
            RotationDiagnostics(
                eps=eps, r1=r1, r1_se=r1_se, r2=r2, r2_se=r2_se, r3=r3, r3_se=r3_se
            )
        )
    return out


def block_seed_rotation(seed: int, eps_position: int) -> int:
    """Distinct deterministic substream per angle in the rotation scan."""
    return (seed ^ 0xA5A5_5A5A) + 7919 * eps_position


def stein_rr_assemble(
    diag: PairDiagnostics, bounded: bool = False, prefer_exact: bool = True
) -> BoundValue:
    """Assemble the exchangeable-pair Kolmogorov bound from diagnostics.

    general: (1/lam) sqrt(Var E[(W-W')^2|W]) + (2 pi)^(-1/4) sqrt(E|W-W'|^3 / lam)
    bounded: (12/lam) sqrt(Var E[(W-W')^2|W]) + (43/lam) sup|W-W'|^3

    With prefer_exact, the condition-on-X variance proxy and exact third
    moment are used when the diagnostics carry them; fed exact moments this
    reproduces the closed-form frame bound.
    """
    lam = diag.lam
    if lam <= 0.0:
        raise ValueError(f"lambda must be positive, got {lam}")
    var = diag.var_conditional
    if prefer_exact and diag.var_conditional_exact is not None:
        var = diag.var_conditional_exact
    var = max(var, 0.0)
    if bounded:
        value = (STEIN_BOUNDED_SQRT_COEFF / lam) * math.sqrt(var) + (
            STEIN_BOUNDED_SUP_COEFF / lam
        ) * diag.sup_abs**3
        return BoundValue(value=value, kind=KOLMOGOROV, constants_used={"variant": "bounded"})
    third = diag.third_abs
    if prefer_exact and diag.third_abs_exact is not None:
        third = diag.third_abs_exact
    value = (1.0 / lam) * math.sqrt(var) + STEIN_THIRD_COEFF * math.sqrt(third / lam)
    return BoundValue(value=value, kind=KOLMOGOROV, constants_used={"variant": "general"})
