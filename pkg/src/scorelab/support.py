"""Discrete supports, codebooks, and rate packings.

A support is a product of identical blocks: either the hypercube {-1,+1}^d
(d one-dimensional blocks) or d/2 planar blocks of M equally spaced points
on a radius-R circle, with M = ceil(pi*R/gamma) tied to the base noise so
neighbouring points sit ~2*gamma apart.  A codebook is a list of n support
points stored as per-block indices (duplicates retained); its rate is
ln(n)/d.  Rate packings are greedy ladders of codebook sizes whose rates
are pairwise separated by more than a target width.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ParameterError

KINDS = ("hypercube", "product-circle")


@dataclass(frozen=True)
class SupportSpec:
    """Geometry of one support; M is the number of points per block (2 for the hypercube)."""

    kind: str
    d: int
    R: float
    gamma: float
    M: int

    @property
    def block_dim(self) -> int:
        return 1 if self.kind == "hypercube" else 2

    @property
    def block_count(self) -> int:
        return self.d // self.block_dim

    @property
    def log_size(self) -> float:
        """ln of the number of support points, block_count * ln(M)."""
        return self.block_count * math.log(self.M)

    def content_hash(self) -> str:
        blob = json.dumps(
            {"kind": self.kind, "d": self.d, "R": self.R, "gamma": self.gamma, "M": self.M},
            sort_keys=True,
        )
        return hashlib.sha256(blob.encode()).hexdigest()[:12]


@lru_cache(maxsize=None)
def _atoms_cached(spec: SupportSpec) -> np.ndarray:
    if spec.kind == "hypercube":
        out = np.array([[-1.0], [1.0]])
    else:
        k = np.arange(spec.M)
        angles = 2.0 * np.pi * k / spec.M
        out = spec.R * np.stack([np.cos(angles), np.sin(angles)], axis=1)
    out.setflags(write=False)
    return out


def atoms(spec: SupportSpec) -> np.ndarray:
    """(M, block_dim) read-only array of per-block point coordinates."""
    return _atoms_cached(spec)


def build_support(kind: str, d: int, R: float, gamma: float) -> SupportSpec:
    if kind not in KINDS:
        raise ParameterError(f"unknown support kind {kind!r}")
    if d <= 0 or d % 2 != 0:
        raise ParameterError(f"even dimension required, got d={d}")
    if not (gamma > 0.0):
        raise ParameterError(f"gamma must be positive, got {gamma}")
    if kind == "hypercube":
        if R != 1.0:
            raise ParameterError("hypercube support fixes R=1")
        return SupportSpec(kind, d, 1.0, gamma, 2)
    if not (R > 0.0):
        raise ParameterError(f"R must be positive, got {R}")
    if gamma > R / 2.0:
        raise ParameterError(f"product-circle requires gamma <= R/2, got gamma={gamma}, R={R}")
    M = math.ceil(math.pi * R / gamma)
    return SupportSpec(kind, d, R, gamma, M)


@dataclass(frozen=True, eq=False)
class Codebook:
    """n support points as an (n, block_count) index array; duplicates retained."""

    spec: SupportSpec
    indices: np.ndarray
    seed: int | None = None

    def __post_init__(self) -> None:
        idx = np.asarray(self.indices, dtype=np.int64)
        if idx.ndim != 2 or idx.shape[0] < 1 or idx.shape[1] != self.spec.block_count:
            raise ParameterError(
                f"indices must be (n>=1, {self.spec.block_count}), got shape {idx.shape}"
            )
        if idx.min() < 0 or idx.max() >= self.spec.M:
            raise ParameterError(f"indices must lie in [0, {self.spec.M})")
        idx.setflags(write=False)
        object.__setattr__(self, "indices", idx)

    @property
    def n(self) -> int:
        return int(self.indices.shape[0])

    @property
    def rate(self) -> float:
        return math.log(self.n) / self.spec.d

    def points(self) -> np.ndarray:
        """Decoded coordinates, shape (n, d)."""
        return decode(self.spec, self.indices)

    def content_hash(self) -> str:
        h = hashlib.sha256(self.spec.content_hash().encode())
        h.update(self.indices.tobytes())
        return h.hexdigest()[:12]


def decode(spec: SupportSpec, indices: np.ndarray) -> np.ndarray:
    """Map (..., block_count) index arrays to (..., d) coordinates."""
    idx = np.asarray(indices, dtype=np.int64)
    pts = atoms(spec)[idx]  # (..., block_count, block_dim)
    return pts.reshape(*idx.shape[:-1], spec.d)


def sample_codebook(spec: SupportSpec, n: int, seed: int) -> Codebook:
    """n i.i.d. uniform support points; same (spec, n, seed) -> identical indices."""
    if n < 1:
        raise ParameterError(f"codebook size must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, spec.M, size=(n, spec.block_count), dtype=np.int64)
    return Codebook(spec, idx, seed=seed)


def codebook_to_json(codebook: Codebook) -> str:
    spec = codebook.spec
    payload = {
        "kind": spec.kind,
        "d": spec.d,
        "R": spec.R,
        "gamma": spec.gamma,
        "M": spec.M,
        "n": codebook.n,
        "seed": codebook.seed,
        "indices": codebook.indices.tolist(),
    }
    return json.dumps(payload)


def codebook_from_json(text: str) -> Codebook:
    payload = json.loads(text)
    spec = SupportSpec(
        kind=payload["kind"],
        d=payload["d"],
        R=payload["R"],
        gamma=payload["gamma"],
        M=payload["M"],
    )
    book = Codebook(spec, np.asarray(payload["indices"], dtype=np.int64), seed=payload["seed"])
    if book.n != payload["n"]:
        raise ParameterError(f"codebook JSON claims n={payload['n']} but has {book.n} rows")
    return book


@dataclass(frozen=True)
class RatePacking:
    """Greedy ladder of codebook sizes with pairwise rate gaps > w."""

    d: int
    w: float
    n_min: int
    n_max: int
    sizes: tuple[int, ...]

    @property
    def rates(self) -> tuple[float, ...]:
        return tuple(math.log(n) / self.d for n in self.sizes)

    @property
    def guaranteed_ladder_length(self) -> float:
        """Guaranteed ladder length ln(n_max/(2*n_min)) / (ln2 + 2*d*w)."""
        return math.log(self.n_max / (2.0 * self.n_min)) / (math.log(2.0) + 2.0 * self.d * self.w)


def pack_rates(d: int, n_min: int, n_max: int, w: float) -> RatePacking:
    """Grow sizes by the factor exp(2*d*w) (ceil) from n_min until n_max is passed."""
    if d <= 0 or d % 2 != 0:
        raise ParameterError(f"even dimension required, got d={d}")
    if not (1 <= n_min <= n_max):
        raise ParameterError(f"need 1 <= n_min <= n_max, got {n_min}, {n_max}")
    if not (w > 0.0):
        raise ParameterError(f"separation w must be positive, got {w}")
    log_growth = 2.0 * d * w
    sizes = [n_min]
    while True:
        # log-space guard: huge growth factors jump straight past n_max
        if math.log(sizes[-1]) + log_growth > math.log(n_max) + 1e-12:
            break
        nxt = math.ceil(math.exp(log_growth) * sizes[-1])
        if nxt > n_max:
            break
        sizes.append(nxt)
    return RatePacking(d=d, w=w, n_min=n_min, n_max=n_max, sizes=tuple(sizes))


def enumerate_support(spec: SupportSpec, limit: int = 1 << 20) -> np.ndarray:
    """All support points as an (M^block_count, d) array; refuses huge supports."""
    total = spec.M**spec.block_count
    if total > limit:
        raise ParameterError(f"support has {total} points, above the enumeration limit {limit}")
    grids = np.meshgrid(*[np.arange(spec.M)] * spec.block_count, indexing="ij")
    idx = np.stack([g.ravel() for g in grids], axis=1)
    return decode(spec, idx)
