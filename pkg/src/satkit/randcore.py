"""Seeded Gaussian/Haar sampling and the deterministic linear algebra layer.

Every sampling routine is a pure function of a SeedStream, so trials can be
replayed bit-exactly and parallelized by partitioning stream indices.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatchError, InvalidArgumentError, PreconditionError

ORTHO_TOL = 1e-10

_MASK64 = (1 << 64) - 1


def _splitmix64(x: int) -> int:
    # standard splitmix64 finalizer; used to derive substream indices
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


@dataclass(frozen=True)
class SeedStream:
    """Addressable random stream: (master_seed, stream_index) -> one generator.

    Identical pairs reproduce identical draws bit-exactly on one platform.
    Substreams are derived by hashing the parent index with an offset, so
    disjoint offsets give disjoint streams.
    """

    master_seed: int
    stream_index: int = 0

    def __post_init__(self):
        if self.stream_index < 0:
            raise InvalidArgumentError("stream_index must be non-negative")

    def rng(self) -> np.random.Generator:
        seq = np.random.SeedSequence(self.master_seed & _MASK64,
                                     spawn_key=(self.stream_index,))
        return np.random.default_rng(seq)

    def substream(self, offset: int) -> "SeedStream":
        mixed = _splitmix64((self.stream_index << 1) ^ _splitmix64(offset + 1))
        return SeedStream(self.master_seed, mixed & ((1 << 63) - 1))


@dataclass(frozen=True)
class LinearMap:
    """Dense real matrix with explicit dimensions."""

    rows: int
    cols: int
    entries: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.rows <= 0 or self.cols <= 0:
            raise InvalidArgumentError("LinearMap dimensions must be positive")
        a = np.asarray(self.entries, dtype=float)
        if a.shape != (self.rows, self.cols):
            raise DimensionMismatchError(
                f"entries shape {a.shape} != ({self.rows}, {self.cols})")
        if not np.all(np.isfinite(a)):
            raise InvalidArgumentError("entries must be finite")
        object.__setattr__(self, "entries", a)

    @classmethod
    def from_array(cls, a: np.ndarray) -> "LinearMap":
        a = np.atleast_2d(np.asarray(a, dtype=float))
        return cls(a.shape[0], a.shape[1], a)

    @property
    def mat(self) -> np.ndarray:
        return self.entries

    def __matmul__(self, other):
        if isinstance(other, LinearMap):
            return LinearMap.from_array(self.entries @ other.entries)
        return self.entries @ other


@dataclass(frozen=True)
class Subspace:
    """Subspace of R^n given by an orthonormal frame (columns)."""

    ambient_dim: int
    frame: np.ndarray = field(repr=False)

    def __post_init__(self):
        f = np.asarray(self.frame, dtype=float)
        if f.ndim != 2 or f.shape[0] != self.ambient_dim:
            raise DimensionMismatchError("frame must be ambient_dim x d")
        if f.shape[1] > self.ambient_dim:
            raise InvalidArgumentError("frame has more columns than ambient_dim")
        resid = np.max(np.abs(f.T @ f - np.eye(f.shape[1])))
        if resid > ORTHO_TOL:
            raise PreconditionError(f"frame not orthonormal, residual {resid:.3e}")
        object.__setattr__(self, "frame", f)

    @property
    def dim(self) -> int:
        return self.frame.shape[1]

    @classmethod
    def from_span(cls, vectors: np.ndarray, rank_tol: float = 1e-9) -> "Subspace":
        """Orthonormal frame spanning the given column vectors (rank detected)."""
        v = np.atleast_2d(np.asarray(vectors, dtype=float))
        u, s, _ = np.linalg.svd(v, full_matrices=False)
        if s.size == 0 or s[0] == 0.0:
            raise InvalidArgumentError("cannot span a subspace from zero vectors")
        keep = s > rank_tol * s[0]
        return cls(v.shape[0], u[:, keep])

    @classmethod
    def coordinate(cls, ambient_dim: int, indices) -> "Subspace":
        f = np.zeros((ambient_dim, len(indices)))
        for col, i in enumerate(indices):
            f[i, col] = 1.0
        return cls(ambient_dim, f)


@dataclass(frozen=True)
class RotationStats:
    """Normalized rotation invariants; alpha = tr(Id - u)/n after sign fixing."""

    alpha: float
    hs_dist_to_identity: float
    trace: float
    sign_flipped: bool


def sample_gaussian(rows: int, cols: int, variance: float, seed: SeedStream) -> LinearMap:
    """i.i.d. N(0, variance) matrix, deterministic per seed."""
    if rows <= 0 or cols <= 0:
        raise InvalidArgumentError("dimensions must be positive")
    if variance <= 0:
        raise InvalidArgumentError("variance must be positive")
    a = seed.rng().standard_normal((rows, cols)) * np.sqrt(variance)
    return LinearMap(rows, cols, a)


def haar_rotation(n: int, seed: SeedStream) -> LinearMap:
    """Haar-distributed element of O(n) via QR with sign-fixed diagonal.

    Both determinant signs occur; no SO(n) restriction.
    """
    if n <= 0:
        raise InvalidArgumentError("n must be positive")
    g = seed.rng().standard_normal((n, n))
    q, r = np.linalg.qr(g)
    d = np.sign(np.diag(r))
    d[d == 0] = 1.0
    return LinearMap(n, n, q * d)


def haar_subspace(n: int, m: int, seed: SeedStream) -> Subspace:
    """Haar-random m-dimensional subspace of R^n (range of a random frame)."""
    if not (1 <= m <= n):
        raise InvalidArgumentError("need 1 <= m <= n")
    g = seed.rng().standard_normal((n, m))
    q, r = np.linalg.qr(g)
    d = np.sign(np.diag(r))
    d[d == 0] = 1.0
    return Subspace(n, q * d)


def rotation_stats(u: LinearMap, ortho_tol: float = 1e-8) -> RotationStats:
    """alpha, Hilbert-Schmidt distance to Id, and trace of u (or -u if tr u < 0).

    The sign normalization keeps alpha in [0, 1]; hs^2 = 2*(n - trace) holds
    exactly for orthogonal input.
    """
    a = u.entries
    if u.rows != u.cols:
        raise PreconditionError("rotation_stats needs a square matrix")
    n = u.rows
    resid = np.max(np.abs(a.T @ a - np.eye(n)))
    if resid > ortho_tol:
        raise PreconditionError(f"input not orthogonal, residual {resid:.3e}")
    tr = float(np.trace(a))
    flipped = tr < 0
    if flipped:
        tr = -tr
    alpha = (n - tr) / n
    alpha = min(max(alpha, 0.0), 1.0)
    hs = float(np.sqrt(max(2.0 * (n - tr), 0.0)))
    return RotationStats(alpha=alpha, hs_dist_to_identity=hs, trace=tr,
                         sign_flipped=flipped)


def normalized_rotation(u: LinearMap) -> LinearMap:
    """u or -u, whichever has non-negative trace (the body sum is unchanged)."""
    return u if float(np.trace(u.entries)) >= 0 else LinearMap(u.rows, u.cols, -u.entries)


def singular_values(a: LinearMap) -> np.ndarray:
    """Singular values in descending order."""
    return np.linalg.svd(a.entries, compute_uv=False)


def project(s: Subspace, x: np.ndarray) -> np.ndarray:
    """Orthogonal projection of x onto the subspace."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != s.ambient_dim and x.shape[0] != s.ambient_dim:
        raise DimensionMismatchError(
            f"vector dim does not match ambient dim {s.ambient_dim}")
    return s.frame @ (s.frame.T @ x)


def subspace_sum(s1: Subspace, s2: Subspace, rank_tol: float = 1e-9) -> Subspace:
    """Orthonormal frame spanning span(S1 + S2); dimension reflects rank."""
    if s1.ambient_dim != s2.ambient_dim:
        raise DimensionMismatchError("ambient dimensions differ")
    return Subspace.from_span(np.hstack([s1.frame, s2.frame]), rank_tol=rank_tol)
