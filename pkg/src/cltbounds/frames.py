"""Normalized tight frames, regular-simplex vertex/edge geometry,
frame-coefficient computation, and hyperplane reflections."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import as_vector

__all__ = [
    "SimplexGeometry",
    "TightFrame",
    "check_tight",
    "custom_frame",
    "frame_coeffs",
    "frame_from_csv",
    "frame_to_csv",
    "reflect",
    "simplex_geometry",
    "standard_frame",
]

# residual above which a user-supplied frame is rejected outright
CUSTOM_RESIDUAL_TOL = 1e-8

LABEL_STANDARD = "standard"
LABEL_SIMPLEX_EDGES = "simplex-edges"
LABEL_CUSTOM = "custom"


@dataclass(frozen=True)
class TightFrame:
    """m unit vectors in R^n with sum_i u_i (x) u_i = (m/n) I."""

    vectors: np.ndarray  # (m, n), rows unit norm
    label: str = LABEL_CUSTOM

    @property
    def m(self) -> int:
        return self.vectors.shape[0]

    @property
    def n(self) -> int:
        return self.vectors.shape[1]

    @property
    def tight_constant(self) -> float:
        return self.m / self.n


def standard_frame(n: int) -> TightFrame:
    """The standard basis of R^n as a tight frame (m = n, constant 1)."""
    if n < 2:
        raise ValueError(f"dimension must be at least 2, got {n}")
    return TightFrame(vectors=np.eye(n), label=LABEL_STANDARD)


def check_tight(frame: TightFrame) -> float:
    """Frobenius norm of sum_i u_i (x) u_i - (m/n) I."""
    U = frame.vectors
    m, n = U.shape
    return float(np.linalg.norm(U.T @ U - (m / n) * np.eye(n), ord="fro"))


def custom_frame(vectors, label: str = LABEL_CUSTOM) -> TightFrame:
    """Validate and wrap user-supplied frame vectors.

    Rejects frames whose rows are not unit vectors or whose tightness
    residual exceeds CUSTOM_RESIDUAL_TOL: the projection bounds are only
    valid for genuine tight frames.
    """
    U = np.asarray(vectors, dtype=float)
    if U.ndim != 2 or U.shape[1] < 2:
        raise ValueError(f"expected an (m, n) array with n >= 2, got shape {U.shape}")
    if not np.all(np.isfinite(U)):
        raise ValueError("frame entries must be finite")
    norms = np.linalg.norm(U, axis=1)
    if np.abs(norms - 1.0).max() > CUSTOM_RESIDUAL_TOL:
        raise ValueError("frame vectors must be unit vectors")
    frame = TightFrame(vectors=U, label=label)
    resid = check_tight(frame)
    if resid > CUSTOM_RESIDUAL_TOL:
        raise ValueError(f"not a tight frame: residual {resid:.3g} > {CUSTOM_RESIDUAL_TOL:g}")
    return frame


def frame_coeffs(frame: TightFrame, x: np.ndarray) -> np.ndarray:
    """Coefficients <x, u_i>; accepts a single vector (n,) or a batch (N, n)."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != frame.n:
        raise ValueError(f"dimension mismatch: frame has n={frame.n}, x has {x.shape[-1]}")
    return x @ frame.vectors.T


def reflect(x: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Reflect x (vector or batch of row vectors) in the hyperplane u^perp."""
    u = as_vector(u)
    nrm = math.sqrt(float(u @ u))
    if abs(nrm - 1.0) > 1e-9:
        raise ValueError(f"reflection axis must be a unit vector, got norm {nrm!r}")
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != u.size:
        raise ValueError("dimension mismatch between x and u")
    coeff = x @ u
    return x - 2.0 * np.multiply.outer(coeff, u)


def _helmert_complement(n: int) -> np.ndarray:
    """(n, n+1) matrix with orthonormal rows spanning the hyperplane 1^perp.

    Row k is (1, ..., 1, -k, 0, ..., 0)/sqrt(k(k+1)); the k leading ones sum
    to exactly k in floating point, so each row is exactly orthogonal to 1.
    """
    B = np.zeros((n, n + 1))
    for k in range(1, n + 1):
        B[k - 1, :k] = 1.0
        B[k - 1, k] = -float(k)
        B[k - 1] /= math.sqrt(k * (k + 1))
    return B


@dataclass(frozen=True)
class SimplexGeometry:
    """Vertices of a centered regular simplex and its edge-difference frame.

    ``vertices`` are n+1 unit vectors with sum v_i = 0 and <v_i, v_j> = -1/n;
    ``edge_frame`` holds the m = n(n+1) ordered-pair vectors
    sqrt(n/(2(n+1))) (v_i - v_j), which again form a tight frame, with
    ``edge_pairs[k]`` recording the (i, j) behind frame position k.
    """

    n: int
    vertices: np.ndarray = field(repr=False)  # (n+1, n)
    edge_pairs: np.ndarray = field(repr=False)  # (m, 2) ordered, i != j
    edge_frame: TightFrame = field(repr=False)

    @property
    def m(self) -> int:
        return self.n * (self.n + 1)

    def pair_position(self, i: int, j: int) -> int:
        """Frame position of the ordered pair (i, j), 0-based vertex indices."""
        n = self.n
        if i == j or not (0 <= i <= n and 0 <= j <= n):
            raise ValueError(f"need distinct vertex indices in 0..{n}, got ({i}, {j})")
        return i * n + (j if j < i else j - 1)


def simplex_geometry(n: int) -> SimplexGeometry:
    """Construct the regular-simplex vertex and edge frames in R^n."""
    if n < 2:
        raise ValueError(f"dimension must be at least 2, got {n}")
    B = _helmert_complement(n)
    vertices = math.sqrt((n + 1) / n) * B.T  # row i = image of e_i, centered + normalized
    idx = np.arange(n + 1)
    pairs = np.array([(i, j) for i in idx for j in idx if i != j], dtype=np.intp)
    edges = math.sqrt(n / (2.0 * (n + 1))) * (vertices[pairs[:, 0]] - vertices[pairs[:, 1]])
    frame = TightFrame(vectors=edges, label=LABEL_SIMPLEX_EDGES)
    return SimplexGeometry(n=n, vertices=vertices, edge_pairs=pairs, edge_frame=frame)


def frame_to_csv(frame: TightFrame, path) -> None:
    """One frame vector per row, plain CSV, for cross-checking elsewhere."""
    np.savetxt(path, frame.vectors, delimiter=",")


def frame_from_csv(path, label: str = LABEL_CUSTOM) -> TightFrame:
    vectors = np.loadtxt(path, delimiter=",", ndmin=2)
    return custom_frame(vectors, label=label)
