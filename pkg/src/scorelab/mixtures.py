"""Exact smoothed-mixture evaluation: densities, scores, likelihood ratios.

Everything here is closed-form linear algebra in log space (no Monte Carlo):
a smoothed point cloud nu_{S,tau} = uniform(S) * N(0, tau^2 I) has

    log density(x) = LSE_i( -|x - y_i|^2 / (2 tau^2) ) - ln n - (d/2) ln(2 pi tau^2)
    score(x)       = (posterior_mean(x) - x) / tau^2

with posterior_mean the softmax-weighted average of the centers.  The
uniform-over-support ("null") law factorizes over blocks, so its evaluation
costs O(d*M) instead of O(M^(d/2)).  The per-point log-likelihood ratio

    ell_tau(y, x) = ln N(x; y, tau^2 I) - ln null_density(x)

also factorizes; ell_max scans it over a codebook.  Batched variants carry a
leading sample axis and chunk internally to bound memory.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp, softmax

from .errors import ParameterError
from .support import Codebook, SupportSpec, atoms

_CHUNK_FLOATS = 1 << 23  # soft cap on intermediate matrix size per chunk


def _check_tau(tau: float) -> float:
    if not (tau > 0.0) or not math.isfinite(tau):
        raise ParameterError(f"noise level must be positive and finite, got {tau}")
    return float(tau)


def _check_points(xs: np.ndarray, d: int) -> np.ndarray:
    xs = np.asarray(xs, dtype=np.float64)
    if xs.shape[-1] != d:
        raise ParameterError(f"points must have last dimension {d}, got shape {xs.shape}")
    if not np.all(np.isfinite(xs)):
        raise ParameterError("points must be finite")
    return xs


def gaussian_log_norm(tau: float, dim: int) -> float:
    """ln of the N(0, tau^2 I_dim) normalizer, -(dim/2) ln(2 pi tau^2)."""
    return -0.5 * dim * math.log(2.0 * math.pi * tau * tau)


@dataclass(frozen=True, eq=False)
class ScoreEval:
    """One density/score/posterior-mean evaluation; score = (pm - x)/tau^2 exactly."""

    log_density: float
    score: np.ndarray
    posterior_mean: np.ndarray


def mixture_eval_batch(centers: np.ndarray, tau: float, xs: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Uniform Gaussian mixture over arbitrary `centers` (n, d) at rows of `xs` (N, d).

    Returns (log_density (N,), score (N, d), posterior_mean (N, d)).
    """
    tau = _check_tau(tau)
    centers = np.asarray(centers, dtype=np.float64)
    n, d = centers.shape
    xs = _check_points(np.atleast_2d(xs), d)
    N = xs.shape[0]
    log_dens = np.empty(N)
    pmean = np.empty((N, d))
    sq_c = np.einsum("id,id->i", centers, centers)
    step = max(1, _CHUNK_FLOATS // max(n, 1))
    for lo in range(0, N, step):
        x = xs[lo : lo + step]
        sq_x = np.einsum("nd,nd->n", x, x)
        sqd = sq_x[:, None] + sq_c[None, :] - 2.0 * (x @ centers.T)
        logw = -sqd / (2.0 * tau * tau)
        log_dens[lo : lo + step] = logsumexp(logw, axis=1)
        pmean[lo : lo + step] = softmax(logw, axis=1) @ centers
    log_dens += gaussian_log_norm(tau, d) - math.log(n)
    score = (pmean - xs) / (tau * tau)
    return log_dens, score, pmean


def mixture_eval(centers: np.ndarray, tau: float, x: np.ndarray) -> ScoreEval:
    ld, sc, pm = mixture_eval_batch(centers, tau, np.atleast_2d(x))
    return ScoreEval(float(ld[0]), sc[0], pm[0])


def planted_eval_batch(codebook: Codebook, tau: float, xs: np.ndarray):
    return mixture_eval_batch(codebook.points(), tau, xs)


def planted_eval(codebook: Codebook, tau: float, x: np.ndarray) -> ScoreEval:
    return mixture_eval(codebook.points(), tau, x)


def _block_log_weights(spec: SupportSpec, tau: float, xs: np.ndarray) -> np.ndarray:
    """(N, B, M) array of -|x_j - a_k|^2 / (2 tau^2) for each block j, atom k."""
    a = atoms(spec)  # (M, b)
    xb = xs.reshape(xs.shape[0], spec.block_count, spec.block_dim)
    sq_x = np.einsum("njb,njb->nj", xb, xb)
    sq_a = np.einsum("kb,kb->k", a, a)
    cross = np.einsum("njb,kb->njk", xb, a)
    return -(sq_x[:, :, None] + sq_a[None, None, :] - 2.0 * cross) / (2.0 * tau * tau)


def _null_block_logz(spec: SupportSpec, tau: float, xs: np.ndarray) -> np.ndarray:
    """(N, B) per-block LSE of the null log weights."""
    return logsumexp(_block_log_weights(spec, tau, xs), axis=2)


def null_eval_batch(spec: SupportSpec, tau: float, xs: np.ndarray):
    """Blockwise null evaluation at rows of `xs`; O(d*M) per point."""
    tau = _check_tau(tau)
    xs = _check_points(np.atleast_2d(xs), spec.d)
    N = xs.shape[0]
    a = atoms(spec)
    log_dens = np.empty(N)
    pmean = np.empty((N, spec.d))
    per_point = spec.block_count * spec.M
    step = max(1, _CHUNK_FLOATS // max(per_point, 1))
    norm = gaussian_log_norm(tau, spec.d) - spec.block_count * math.log(spec.M)
    for lo in range(0, N, step):
        logw = _block_log_weights(spec, tau, xs[lo : lo + step])
        log_dens[lo : lo + step] = logsumexp(logw, axis=2).sum(axis=1) + norm
        block_means = np.einsum("njk,kb->njb", softmax(logw, axis=2), a)
        pmean[lo : lo + step] = block_means.reshape(-1, spec.d)
    score = (pmean - xs) / (tau * tau)
    return log_dens, score, pmean


def null_eval(spec: SupportSpec, tau: float, x: np.ndarray) -> ScoreEval:
    ld, sc, pm = null_eval_batch(spec, tau, np.atleast_2d(x))
    return ScoreEval(float(ld[0]), sc[0], pm[0])


def log_likelihood_ratio_batch(
    spec: SupportSpec, y_indices: np.ndarray, tau: float, xs: np.ndarray
) -> np.ndarray:
    """ell_tau(y_i, x_i) row by row; y_indices is (N, block_count) or (block_count,)."""
    tau = _check_tau(tau)
    xs = _check_points(np.atleast_2d(xs), spec.d)
    y_idx = np.asarray(y_indices, dtype=np.int64)
    if y_idx.ndim == 1:
        y_idx = np.broadcast_to(y_idx, (xs.shape[0], spec.block_count))
    out = np.empty(xs.shape[0])
    per_point = spec.block_count * spec.M
    step = max(1, _CHUNK_FLOATS // max(per_point, 1))
    for lo in range(0, xs.shape[0], step):
        logw = _block_log_weights(spec, tau, xs[lo : lo + step])
        picked = np.take_along_axis(logw, y_idx[lo : lo + step, :, None], axis=2)[:, :, 0]
        out[lo : lo + step] = (picked - logsumexp(logw, axis=2)).sum(axis=1)
    return out + spec.block_count * math.log(spec.M)


def log_likelihood_ratio(spec: SupportSpec, y_indices: np.ndarray, tau: float, x: np.ndarray) -> float:
    return float(log_likelihood_ratio_batch(spec, y_indices, tau, np.atleast_2d(x))[0])


def ell_max_batch(codebook: Codebook, tau: float, xs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Max of ell_tau(y, x) over codebook rows y, plus the argmax row index.

    Uses the identity ell(y, x) = -|x-y|^2/(2 tau^2) - sum_j(LSE_j - ln M),
    so only squared distances to the n codebook points are scanned.
    """
    tau = _check_tau(tau)
    spec = codebook.spec
    xs = _check_points(np.atleast_2d(xs), spec.d)
    centers = codebook.points()
    N = xs.shape[0]
    vals = np.empty(N)
    arg = np.empty(N, dtype=np.int64)
    sq_c = np.einsum("id,id->i", centers, centers)
    step = max(1, _CHUNK_FLOATS // max(codebook.n + spec.block_count * spec.M, 1))
    null_part = spec.block_count * math.log(spec.M)
    for lo in range(0, N, step):
        x = xs[lo : lo + step]
        sq_x = np.einsum("nd,nd->n", x, x)
        sqd = sq_x[:, None] + sq_c[None, :] - 2.0 * (x @ centers.T)
        best = np.argmin(sqd, axis=1)  # nearest codebook point maximizes ell
        logz = _null_block_logz(spec, tau, x).sum(axis=1)
        vals[lo : lo + step] = -np.take_along_axis(sqd, best[:, None], 1)[:, 0] / (2 * tau * tau) - logz + null_part
        arg[lo : lo + step] = best
    return vals, arg


def ell_max(codebook: Codebook, tau: float, x: np.ndarray) -> tuple[float, int]:
    vals, arg = ell_max_batch(codebook, tau, np.atleast_2d(x))
    return float(vals[0]), int(arg[0])


def score_difference_ratio(codebook: Codebook, tau: float, xs: np.ndarray) -> float:
    """max over probe rows of |s_S - s_U| * tau^2 / (2 R sqrt(d)); always <= 1."""
    spec = codebook.spec
    _, s_planted, _ = planted_eval_batch(codebook, tau, xs)
    _, s_null, _ = null_eval_batch(spec, tau, xs)
    diff = np.linalg.norm(s_planted - s_null, axis=1)
    bound = 2.0 * spec.R * math.sqrt(spec.d) / (tau * tau)
    return float(diff.max() / bound)


def sample_block_ell(spec: SupportSpec, tau: float, size: int, rng: np.random.Generator) -> np.ndarray:
    """i.i.d. draws of one block's contribution to ell_tau(Y, Y+Z), Y ~ uniform.

    Standard normals are drawn first and scaled by tau, so a fixed generator
    state yields draws coupled across noise levels (common random numbers).
    """
    tau = _check_tau(tau)
    a = atoms(spec)
    out = np.empty(size)
    step = max(1, _CHUNK_FLOATS // max(spec.M, 1))
    lnM = math.log(spec.M)
    for lo in range(0, size, step):
        m = min(step, size - lo)
        k0 = rng.integers(0, spec.M, size=m)
        z = tau * rng.standard_normal((m, spec.block_dim))
        x = a[k0] + z
        sqd = (
            np.einsum("nb,nb->n", x, x)[:, None]
            + np.einsum("kb,kb->k", a, a)[None, :]
            - 2.0 * (x @ a.T)
        )
        logw = -sqd / (2.0 * tau * tau)
        out[lo : lo + m] = -np.einsum("nb,nb->n", z, z) / (2.0 * tau * tau) - logsumexp(logw, axis=1) + lnM
    return out


def sample_null_pair_ell(spec: SupportSpec, tau: float, size: int, rng: np.random.Generator) -> np.ndarray:
    """i.i.d. draws of ell_tau(Y, Y+Z) with Y ~ uniform(support), Z ~ N(0, tau^2 I).

    Blocks are i.i.d., so each draw is a sum of block_count independent block
    contributions.
    """
    blocks = sample_block_ell(spec, tau, size * spec.block_count, rng)
    return blocks.reshape(size, spec.block_count).sum(axis=1)
