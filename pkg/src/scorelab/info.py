"""Monte Carlo information metrics with reported standard errors.

Per-dimension information rate I_tau = E[ell_tau(Y, Y+Z)]/d, KL divergences
between smoothed planted and null laws, the Fisher-information gap
J_tau(S) = E_{X ~ nu_{S,tau}} |s_S(X) - s_U(X)|^2, and the audits built on
them: the de Bruijn derivative identity dKL/dt = -J/2 in t = tau^2, a
one-shot KL upper bound, sub-exponential concentration diagnostics for ell,
and the small-noise information floor I_gamma >= ln(M)/10.

Estimators draw standard normals and scale by the noise level, so matched
seeds give common-random-number coupling across noise levels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .mixtures import (
    null_eval_batch,
    planted_eval_batch,
    sample_block_ell,
    sample_null_pair_ell,
)
from .seeds import derive_seed
from .support import Codebook, SupportSpec, sample_codebook

_CHUNK = 1 << 15


@dataclass(frozen=True)
class InfoEstimate:
    quantity: str
    value: float
    std_err: float
    samples: int


def _posterior_chunks(codebook: Codebook, tau: float, samples: int, seed: int):
    """Chunked draws X = y_I + tau*Z from nu_{S,tau}; fixed seed fixes (I, Z)."""
    rng = np.random.default_rng(seed)
    pts = codebook.points()
    for lo in range(0, samples, _CHUNK):
        m = min(_CHUNK, samples - lo)
        idx = rng.integers(0, codebook.n, size=m)
        z = rng.standard_normal((m, codebook.spec.d))
        yield pts[idx] + tau * z


def estimate_I(spec: SupportSpec, tau: float, samples: int, seed: int) -> InfoEstimate:
    """Per-dimension information rate (1/d) E[ell_tau(Y, Y+Z)]."""
    if samples < 2:
        raise ParameterError("need at least 2 samples")
    vals = sample_null_pair_ell(spec, tau, samples, np.random.default_rng(seed))
    return InfoEstimate(
        quantity="I",
        value=float(vals.mean() / spec.d),
        std_err=float(vals.std(ddof=1) / math.sqrt(samples) / spec.d),
        samples=samples,
    )


def estimate_KL(codebook: Codebook, tau: float, samples: int, seed: int) -> InfoEstimate:
    """KL(nu_{S,tau} || nu_{U,tau}) by Monte Carlo over X ~ nu_{S,tau}."""
    if samples < 2:
        raise ParameterError("need at least 2 samples")
    spec = codebook.spec
    vals = np.empty(samples)
    lo = 0
    for xs in _posterior_chunks(codebook, tau, samples, seed):
        ld_p = planted_eval_batch(codebook, tau, xs)[0]
        ld_n = null_eval_batch(spec, tau, xs)[0]
        vals[lo : lo + xs.shape[0]] = ld_p - ld_n
        lo += xs.shape[0]
    return InfoEstimate(
        quantity="KL",
        value=float(vals.mean()),
        std_err=float(vals.std(ddof=1) / math.sqrt(samples)),
        samples=samples,
    )


def estimate_fisher_gap(codebook: Codebook, tau: float, samples: int, seed: int) -> InfoEstimate:
    """J_tau(S) = E_{X ~ nu_{S,tau}} |s_S(X) - s_U(X)|^2."""
    if samples < 2:
        raise ParameterError("need at least 2 samples")
    spec = codebook.spec
    vals = np.empty(samples)
    lo = 0
    for xs in _posterior_chunks(codebook, tau, samples, seed):
        s_p = planted_eval_batch(codebook, tau, xs)[1]
        s_n = null_eval_batch(spec, tau, xs)[1]
        vals[lo : lo + xs.shape[0]] = np.einsum("nd,nd->n", s_p - s_n, s_p - s_n)
        lo += xs.shape[0]
    return InfoEstimate(
        quantity="J",
        value=float(vals.mean()),
        std_err=float(vals.std(ddof=1) / math.sqrt(samples)),
        samples=samples,
    )


@dataclass(frozen=True)
class DeBruijnRecord:
    t: float
    dt: float
    kl_derivative: float
    half_fisher_gap: float
    abs_gap: float
    rel_gap: float


def debruijn_check(
    codebook: Codebook, tau: float, dt_rel: float, samples: int, seed: int
) -> DeBruijnRecord:
    """Central-difference check of d/dt KL(nu_{S,sqrt(t)} || nu_{U,sqrt(t)}) = -J/2.

    The three estimates share a seed, so the finite difference runs on common
    random numbers and most MC noise cancels in the derivative.
    """
    if not (0.0 < dt_rel < 0.5):
        raise ParameterError(f"dt_rel must be in (0, 0.5), got {dt_rel}")
    t = tau * tau
    dt = dt_rel * t
    kl_hi = estimate_KL(codebook, math.sqrt(t + dt), samples, seed)
    kl_lo = estimate_KL(codebook, math.sqrt(t - dt), samples, seed)
    deriv = (kl_hi.value - kl_lo.value) / (2.0 * dt)
    j = estimate_fisher_gap(codebook, tau, samples, seed)
    half = j.value / 2.0
    abs_gap = abs(deriv + half)  # identity: derivative = -J/2
    rel = abs_gap / half if half > 0 else math.inf
    return DeBruijnRecord(t=t, dt=dt, kl_derivative=deriv, half_fisher_gap=half, abs_gap=abs_gap, rel_gap=rel)


@dataclass(frozen=True)
class OneShotKLRecord:
    n: int
    tau: float
    a: float
    kl_mean: float
    kl_std_err: float
    bound: float
    bound_std_err: float
    tail_probability: float
    holds: bool


def one_shot_kl_audit(
    spec: SupportSpec, n: int, tau: float, a: float, trials: int, samples: int, seed: int
) -> OneShotKLRecord:
    """Check E_S[KL] <= e^-a + ln(1+|support|) * P[ell >= ln n - a] over fresh codebooks."""
    if trials < 2:
        raise ParameterError("need at least 2 trials")
    kls = np.array(
        [
            estimate_KL(
                sample_codebook(spec, n, derive_seed(seed, "book", t)),
                tau,
                samples,
                derive_seed(seed, "kl", t),
            ).value
            for t in range(trials)
        ]
    )
    lhs = float(kls.mean())
    lhs_se = float(kls.std(ddof=1) / math.sqrt(trials))
    ell = sample_null_pair_ell(spec, tau, samples, np.random.default_rng(derive_seed(seed, "tail")))
    tail = float(np.mean(ell >= math.log(n) - a))
    tail_se = math.sqrt(max(tail * (1 - tail), 1.0 / samples) / samples)
    log_v1 = float(np.logaddexp(0.0, spec.log_size))  # ln(1 + |support|)
    rhs = math.exp(-a) + log_v1 * tail
    rhs_se = log_v1 * tail_se
    holds = lhs <= rhs + 3.0 * math.hypot(lhs_se, rhs_se)
    return OneShotKLRecord(
        n=n, tau=tau, a=a, kl_mean=lhs, kl_std_err=lhs_se,
        bound=rhs, bound_std_err=rhs_se, tail_probability=tail, holds=holds,
    )


@dataclass(frozen=True)
class ConcentrationRecord:
    psi1_norm: float
    tail_slope: float
    tail_intercept: float
    tail_r_squared: float
    tail_points: tuple[tuple[float, float], ...]  # (t, survival) pairs


def _orlicz_psi1(values: np.ndarray, tol: float = 1e-3) -> float:
    """Smallest K with mean(exp(|v|/K)) <= 2, by bisection; 0 for all-zero input."""
    mags = np.abs(values)
    top = float(mags.max())
    if top == 0.0:
        return 0.0

    def cond(k: float) -> float:
        with np.errstate(over="ignore"):
            return float(np.mean(np.exp(mags / k)))

    hi = 2.0 * top  # mean(exp(<=1/2)) <= e^0.5 < 2 always holds here
    lo = hi
    while cond(lo) <= 2.0:
        hi = lo
        lo /= 2.0
        if lo < 1e-300:
            return 0.0
    while hi / lo > 1.0 + tol:
        mid = math.sqrt(lo * hi)
        if cond(mid) <= 2.0:
            hi = mid
        else:
            lo = mid
    return hi


def concentration_audit(spec: SupportSpec, tau: float, samples: int, seed: int) -> ConcentrationRecord:
    """Sub-exponential diagnostics for ell_tau.

    psi1_norm: empirical Orlicz psi_1 norm of one centered block contribution.
    tail fit: OLS of ln(survival) against t^2 for the centered sum's upper
    tail at fixed survival levels; a Gaussian-regime tail makes the slope
    negative.
    """
    rng = np.random.default_rng(derive_seed(seed, "block"))
    blocks = sample_block_ell(spec, tau, samples, rng)
    psi1 = _orlicz_psi1(blocks - blocks.mean())
    ell = sample_null_pair_ell(
        spec, tau, samples, np.random.default_rng(derive_seed(seed, "sum"))
    )
    centered = ell - ell.mean()
    levels = np.array([0.1, 0.05, 0.02, 0.01, 0.005, 0.002])
    ts = np.quantile(centered, 1.0 - levels)
    # OLS of ln(level) on t^2
    x = ts**2
    y = np.log(levels)
    xm, ym = x.mean(), y.mean()
    slope = float(np.sum((x - xm) * (y - ym)) / np.sum((x - xm) ** 2))
    intercept = float(ym - slope * xm)
    resid = y - (slope * x + intercept)
    r2 = float(1.0 - np.sum(resid**2) / np.sum((y - ym) ** 2))
    return ConcentrationRecord(
        psi1_norm=psi1,
        tail_slope=slope,
        tail_intercept=intercept,
        tail_r_squared=r2,
        tail_points=tuple(zip(ts.tolist(), levels.tolist())),
    )


@dataclass(frozen=True)
class SmallNoiseRecord:
    i_hat: float
    std_err: float
    threshold: float
    holds: bool


def small_noise_I_check(spec: SupportSpec, samples: int, seed: int) -> SmallNoiseRecord:
    """At base noise, the information rate clears the ln(M)/10 floor."""
    if spec.kind != "product-circle" or spec.M < 7:
        raise ParameterError("small-noise floor applies to product-circle supports with M >= 7")
    est = estimate_I(spec, spec.gamma, samples, seed)
    threshold = math.log(spec.M) / 10.0
    return SmallNoiseRecord(
        i_hat=est.value,
        std_err=est.std_err,
        threshold=threshold,
        holds=est.value >= threshold - 3.0 * est.std_err,
    )
