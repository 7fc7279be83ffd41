"""Seeded samplers for every distribution under study, each scaled to (or
Monte Carlo calibrated toward) isotropic position.

Sampling is a pure function of (spec, N, seed).  Rows are generated in
fixed blocks of ``BLOCK_ROWS``; block b draws from an independent substream
seeded with ``seed XOR mix64(b)``, so splitting blocks across workers in
contiguous ranges reproduces the serial output bit for bit.  Within a block
every sampler draws its variates in a fixed documented order.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, replace
from enum import Enum
from typing import Callable, Iterator

import numpy as np

from .core import lp_norms
from .frames import simplex_geometry

__all__ = [
    "BLOCK_ROWS",
    "DistributionSpec",
    "Kind",
    "SPHERICAL_KINDS",
    "UNCONDITIONAL_KINDS",
    "CalibrationError",
    "SampleBatch",
    "block_seed",
    "calibrate_isotropic",
    "iter_sample_blocks",
    "sample",
    "sample_ball_uniform",
    "sample_generalized_gaussian",
    "sample_linf_exponential",
    "sample_lp_ball",
    "sample_lp_cone",
    "sample_lp_surface",
    "sample_simplex",
    "sample_sphere_shell",
    "sample_spherical_exponential",
]

BLOCK_ROWS = 1 << 16

DEFAULT_CALIBRATION_N = 250_000
DEFAULT_CALIBRATION_SEED = 0x5CA1E


class CalibrationError(RuntimeError):
    """Raised when isotropic calibration produces a degenerate estimate."""


class Kind(str, Enum):
    SPHERE_SHELL = "sphere_shell"
    BALL_UNIFORM = "ball_uniform"
    LP_BALL = "lp_ball"
    LP_CONE = "lp_cone"
    LP_SURFACE = "lp_surface"
    SIMPLEX = "simplex"
    SPHERICAL_EXPONENTIAL = "spherical_exponential"
    LINF_EXPONENTIAL = "linf_exponential"


_LP_KINDS = {Kind.LP_BALL, Kind.LP_CONE, Kind.LP_SURFACE}

# invariant under sign flips of individual coordinates
UNCONDITIONAL_KINDS = {Kind.LP_BALL, Kind.LP_CONE, Kind.LP_SURFACE, Kind.LINF_EXPONENTIAL}
# invariant under every rotation
SPHERICAL_KINDS = {Kind.SPHERE_SHELL, Kind.BALL_UNIFORM, Kind.SPHERICAL_EXPONENTIAL}


def _exact_scale(kind: Kind, n: int, p: float | None) -> float | None:
    """Isotropic scale known in closed form, or None when calibration is needed."""
    if kind is Kind.SPHERE_SHELL:
        return math.sqrt(n)
    if kind is Kind.BALL_UNIFORM:
        return math.sqrt(n + 2)
    if kind in (Kind.SIMPLEX, Kind.SPHERICAL_EXPONENTIAL, Kind.LINF_EXPONENTIAL):
        return 1.0  # isotropic by construction
    if kind is Kind.LP_BALL and p is not None and math.isinf(p):
        return math.sqrt(3.0)  # cube with coordinates uniform on [-sqrt(3), sqrt(3)]
    return None


@dataclass(frozen=True)
class DistributionSpec:
    """Which isotropic symmetric law to sample.

    ``scale`` multiplies the unit-parameterized body; None means "not yet
    calibrated" (exactly known scales are filled in automatically).
    """

    kind: Kind
    n: int
    p: float | None = None
    scale: float | None = None

    def __post_init__(self):
        if self.n < 2:
            raise ValueError(f"dimension must be at least 2, got {self.n}")
        if self.kind in _LP_KINDS:
            if self.p is None:
                raise ValueError(f"{self.kind.value} requires the exponent p")
            if math.isnan(self.p) or self.p < 1.0:
                raise ValueError(f"p must satisfy p >= 1 or p = inf, got {self.p}")
        elif self.p is not None:
            raise ValueError(f"{self.kind.value} does not take an exponent p")
        if self.scale is None:
            object.__setattr__(self, "scale", _exact_scale(self.kind, self.n, self.p))
        elif self.scale <= 0.0:
            raise ValueError(f"scale must be positive, got {self.scale}")

    @property
    def calibrated(self) -> bool:
        return self.scale is not None

    def to_dict(self) -> dict:
        out = {"kind": self.kind.value, "n": self.n}
        if self.p is not None:
            out["p"] = self.p if math.isfinite(self.p) else "inf"
        if self.scale is not None:
            out["scale"] = self.scale
        return out

    @staticmethod
    def from_dict(d: dict) -> "DistributionSpec":
        p = d.get("p")
        if isinstance(p, str):
            p = math.inf if p in ("inf", "Infinity") else float(p)
        return DistributionSpec(kind=Kind(d["kind"]), n=int(d["n"]), p=p, scale=d.get("scale"))


@dataclass(frozen=True)
class SampleBatch:
    """An (N, n) block of samples plus the seed that reproduces it.

    ``weights`` (normalized to sum 1) are attached by the surface-measure
    sampler; every downstream estimator accepts them.
    """

    data: np.ndarray
    seed: int
    spec: DistributionSpec | None = None
    weights: np.ndarray | None = None

    @property
    def N(self) -> int:
        return self.data.shape[0]

    @property
    def n(self) -> int:
        return self.data.shape[1]

    def save(self, path) -> None:
        """32-byte header (magic, n, N, seed) + row-major little-endian f64."""
        with open(path, "wb") as fh:
            fh.write(_MAGIC)
            fh.write(struct.pack("<QQQ", self.n, self.N, self.seed & 0xFFFFFFFFFFFFFFFF))
            fh.write(np.ascontiguousarray(self.data, dtype="<f8").tobytes())

    @staticmethod
    def load(path) -> "SampleBatch":
        with open(path, "rb") as fh:
            magic = fh.read(8)
            if magic != _MAGIC:
                raise ValueError(f"not a sample-batch file (magic {magic!r})")
            n, count, seed = struct.unpack("<QQQ", fh.read(24))
            data = np.frombuffer(fh.read(8 * n * count), dtype="<f8").reshape(count, n)
        return SampleBatch(data=np.array(data, dtype=float), seed=seed)

    def to_csv(self, path) -> None:
        cols = self.data if self.weights is None else np.column_stack([self.data, self.weights])
        np.savetxt(path, cols, delimiter=",")


_MAGIC = b"ISOSAMP1"


def _mix64(z: int) -> int:
    """splitmix64 finalizer; the block-index hash of the substream scheme."""
    z = (z + 0x9E3779B97F4A7C15) & 0xFFFFFFFFFFFFFFFF
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & 0xFFFFFFFFFFFFFFFF
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & 0xFFFFFFFFFFFFFFFF
    return z ^ (z >> 31)


def block_seed(seed: int, block_index: int) -> int:
    """Substream seed of block k: master seed XOR mix64(k)."""
    return (int(seed) & 0xFFFFFFFFFFFFFFFF) ^ _mix64(int(block_index))


def _unit_directions(rng, count: int, n: int) -> np.ndarray:
    g = rng.standard_normal((count, n))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    return g


def _generalized_gaussian_block(rng, p: float, shape) -> np.ndarray:
    """i.i.d. draws with density proportional to exp(-|t|^p).

    sign * G^(1/p) with G ~ Gamma(1/p, 1); draw order: gamma then signs.
    """
    g = rng.standard_gamma(1.0 / p, size=shape)
    signs = rng.integers(0, 2, size=shape) * 2.0 - 1.0
    return signs * g ** (1.0 / p)


def _cube_boundary_block(rng, count: int, n: int, radius) -> np.ndarray:
    """Cone (= surface) measure on the boundary of the cube [-radius, radius]^n.

    Draw order: interior uniforms, facet index, facet sign.
    """
    x = rng.uniform(-1.0, 1.0, (count, n))
    face = rng.integers(0, n, count)
    sign = rng.integers(0, 2, count) * 2.0 - 1.0
    x[np.arange(count), face] = sign
    return x * np.reshape(radius, (-1, 1)) if np.ndim(radius) else x * radius


def _filler(spec: DistributionSpec) -> Callable[[np.random.Generator, int], np.ndarray]:
    """Per-kind block generator; scale must already be resolved."""
    n, p, scale = spec.n, spec.p, spec.scale
    kind = spec.kind

    if kind is Kind.SPHERE_SHELL:

        def fill(rng, count):
            return scale * _unit_directions(rng, count, n)

    elif kind is Kind.BALL_UNIFORM:

        def fill(rng, count):
            dirs = _unit_directions(rng, count, n)
            radii = rng.random(count) ** (1.0 / n)
            return scale * dirs * radii[:, None]

    elif kind is Kind.LP_BALL:
        if math.isinf(p):

            def fill(rng, count):
                return rng.uniform(-scale, scale, (count, n))

        else:

            def fill(rng, count):
                g = _generalized_gaussian_block(rng, p, (count, n))
                y = rng.standard_exponential(count)
                denom = (np.sum(np.abs(g) ** p, axis=1) + y) ** (1.0 / p)
                return scale * g / denom[:, None]

    elif kind in (Kind.LP_CONE, Kind.LP_SURFACE):
        if math.isinf(p):

            def fill(rng, count):
                return scale * _cube_boundary_block(rng, count, n, 1.0)

        else:

            def fill(rng, count):
                g = _generalized_gaussian_block(rng, p, (count, n))
                return scale * g / lp_norms(g, p)[:, None]

    elif kind is Kind.SIMPLEX:
        vertices = simplex_geometry(n).vertices
        y_scale = math.sqrt((n + 1) * (n + 2))
        back = math.sqrt(n / (n + 1))

        def fill(rng, count):
            e = rng.standard_exponential((count, n + 1))
            y = (y_scale * e) / e.sum(axis=1, keepdims=True)
            return back * (y @ vertices)

    elif kind is Kind.SPHERICAL_EXPONENTIAL:
        b_n = math.sqrt(n + 1)

        def fill(rng, count):
            dirs = _unit_directions(rng, count, n)
            radii = rng.standard_gamma(float(n), count) / b_n
            return scale * dirs * radii[:, None]

    elif kind is Kind.LINF_EXPONENTIAL:
        b_n = math.sqrt((n + 1) * (n + 2) / 3.0)

        def fill(rng, count):
            radii = rng.standard_gamma(float(n), count) / b_n
            return scale * _cube_boundary_block(rng, count, n, radii)

    else:  # pragma: no cover
        raise ValueError(f"unknown kind {kind!r}")

    return fill


def _resolved(spec: DistributionSpec) -> DistributionSpec:
    if spec.calibrated:
        return spec
    return calibrate_isotropic(spec)


def iter_sample_blocks(spec: DistributionSpec, N: int, seed: int) -> Iterator[np.ndarray]:
    """Yield the sample rows block by block (the memory-bounded path)."""
    if N < 1:
        raise ValueError(f"sample count must be positive, got {N}")
    spec = _resolved(spec)
    fill = _filler(spec)
    for block, lo in enumerate(range(0, N, BLOCK_ROWS)):
        count = min(BLOCK_ROWS, N - lo)
        rng = np.random.default_rng(block_seed(seed, block))
        yield fill(rng, count)


def _surface_weights(spec: DistributionSpec, data: np.ndarray) -> np.ndarray:
    """Self-normalized importance weights retargeting cone draws to surface
    measure: proportional to (sum_i |x_i/scale|^(2(p-1)))^(1/2).

    For p in {1, inf} the two boundary measures coincide facet by facet and
    the weights are uniform.
    """
    p = spec.p
    if p == 1.0 or math.isinf(p):
        w = np.full(data.shape[0], 1.0)
    else:
        z = np.abs(data) / spec.scale
        w = np.sqrt(np.sum(z ** (2.0 * (p - 1.0)), axis=1))
    return w / w.sum()


def sample(spec: DistributionSpec, N: int, seed: int) -> SampleBatch:
    """Materialize N samples of the law described by spec."""
    spec = _resolved(spec)
    out = np.empty((N, spec.n), dtype=float)
    lo = 0
    for block in iter_sample_blocks(spec, N, seed):
        out[lo : lo + len(block)] = block
        lo += len(block)
    weights = _surface_weights(spec, out) if spec.kind is Kind.LP_SURFACE else None
    return SampleBatch(data=out, seed=seed, spec=spec, weights=weights)


_calibration_cache: dict[tuple, float] = {}


def calibrate_isotropic(
    spec: DistributionSpec,
    n_cal: int = DEFAULT_CALIBRATION_N,
    seed: int = DEFAULT_CALIBRATION_SEED,
) -> DistributionSpec:
    """Rescale spec so the mean per-coordinate second moment is 1.

    Kinds with exactly known scales are returned unchanged.  Results are
    cached by (kind, p, n, n_cal, seed); surface measure is scaled so that
    the underlying cone measure is isotropic (and is itself left alone).
    """
    if spec.kind is Kind.LP_SURFACE:
        cone = calibrate_isotropic(
            DistributionSpec(kind=Kind.LP_CONE, n=spec.n, p=spec.p, scale=spec.scale),
            n_cal=n_cal,
            seed=seed,
        )
        return replace(spec, scale=cone.scale)
    if _exact_scale(spec.kind, spec.n, spec.p) is not None:
        return spec if spec.calibrated else replace(spec, scale=_exact_scale(spec.kind, spec.n, spec.p))

    key = (spec.kind, spec.p, spec.n, n_cal, seed)
    if key not in _calibration_cache:
        base = spec if spec.calibrated else replace(spec, scale=1.0)
        total = 0.0
        for block in iter_sample_blocks(base, n_cal, seed):
            total += float((block * block).sum())
        mean_second = total / (n_cal * spec.n)
        if not (mean_second > 0.0) or not math.isfinite(mean_second):
            raise CalibrationError(f"degenerate second-moment estimate {mean_second!r}")
        _calibration_cache[key] = base.scale / math.sqrt(mean_second)
    return replace(spec, scale=_calibration_cache[key])


def sample_sphere_shell(n: int, N: int, seed: int) -> SampleBatch:
    """Uniform on the sphere of radius sqrt(n); every row norm is exact."""
    return sample(DistributionSpec(kind=Kind.SPHERE_SHELL, n=n), N, seed)


def sample_ball_uniform(n: int, N: int, seed: int) -> SampleBatch:
    """Uniform in the ball of radius sqrt(n+2)."""
    return sample(DistributionSpec(kind=Kind.BALL_UNIFORM, n=n), N, seed)


def sample_generalized_gaussian(p: float, N: int, seed: int) -> np.ndarray:
    """i.i.d. scalars with density proportional to exp(-|t|^p), 1 <= p < inf."""
    if math.isinf(p):
        raise ValueError("p = inf is unsupported here; draw uniforms directly")
    if math.isnan(p) or p < 1.0:
        raise ValueError(f"p must satisfy 1 <= p < inf, got {p}")
    if N < 1:
        raise ValueError(f"sample count must be positive, got {N}")
    out = np.empty(N, dtype=float)
    for block, lo in enumerate(range(0, N, BLOCK_ROWS)):
        count = min(BLOCK_ROWS, N - lo)
        rng = np.random.default_rng(block_seed(seed, block))
        out[lo : lo + count] = _generalized_gaussian_block(rng, p, count)
    return out


def sample_lp_cone(p: float, n: int, N: int, seed: int, scale: float | None = None) -> SampleBatch:
    """Cone measure on the lp sphere, Monte Carlo scaled to isotropic."""
    return sample(DistributionSpec(kind=Kind.LP_CONE, n=n, p=p, scale=scale), N, seed)


def sample_lp_ball(p: float, n: int, N: int, seed: int, scale: float | None = None) -> SampleBatch:
    """Uniform on the lp ball, Monte Carlo scaled to isotropic (cube is exact)."""
    return sample(DistributionSpec(kind=Kind.LP_BALL, n=n, p=p, scale=scale), N, seed)


def sample_lp_surface(p: float, n: int, N: int, seed: int, scale: float | None = None) -> SampleBatch:
    """Surface measure on the lp sphere via self-normalized weights on cone draws.

    The scale makes the underlying cone measure isotropic; weighted averages
    target surface measure.
    """
    return sample(DistributionSpec(kind=Kind.LP_SURFACE, n=n, p=p, scale=scale), N, seed)


def sample_simplex(n: int, N: int, seed: int) -> SampleBatch:
    """Uniform in the isotropic regular simplex (exactly isotropic)."""
    return sample(DistributionSpec(kind=Kind.SIMPLEX, n=n), N, seed)


def sample_spherical_exponential(n: int, N: int, seed: int) -> SampleBatch:
    """Isotropic spherically symmetric law with density ~ exp(-sqrt(n+1) ||x||_2)."""
    return sample(DistributionSpec(kind=Kind.SPHERICAL_EXPONENTIAL, n=n), N, seed)


def sample_linf_exponential(n: int, N: int, seed: int) -> SampleBatch:
    """Isotropic coordinatewise-symmetric law with density ~ exp(-b_n ||x||_inf).

    b_n = sqrt((n+1)(n+2)/3) makes every coordinate have unit variance.
    """
    return sample(DistributionSpec(kind=Kind.LINF_EXPONENTIAL, n=n), N, seed)


def simplex_embedded_coordinates(batch: SampleBatch) -> np.ndarray:
    """Recover the (N, n+1) scaled-coordinate-simplex representation Y from a
    simplex batch: Y_i = sqrt(n/(n+1)) <X, v_i> + sqrt((n+2)/(n+1))."""
    if batch.spec is None or batch.spec.kind is not Kind.SIMPLEX:
        raise ValueError("expected a simplex batch")
    n = batch.n
    vertices = simplex_geometry(n).vertices
    return math.sqrt(n / (n + 1)) * (batch.data @ vertices.T) + math.sqrt((n + 2) / (n + 1))
