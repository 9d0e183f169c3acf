"""Masked adversarial score oracle, accuracy profiles, and rate windows.

The adversary answers score queries for a planted codebook S at total noise
tau while staying inside a declared accuracy envelope (an L^p moment or a
sub-exponential psi_1 tail).  Its decision tree per (S, tau):

  * if the Fisher gap J_tau(S) = E|s_S - s_U|^2 is at most theta(tau), the
    oracle is "null-locked" and always answers the uniform-support score;
  * otherwise it blends, answering s_U + m * (s_S - s_U) with the mask
    m = clamp(ell_max - ln(Lambda) + 1, 0, 1) built from the lower
    zeta(tau)-quantile Lambda_tau of the likelihood ratio exp(ell_tau).

Quantiles come from a Monte Carlo order statistic when the sample floor
ceil(100/zeta) is affordable, and otherwise from a deterministic
convolution of the exact per-block distribution of ell (blocks are i.i.d.,
so the law of ell is a block_count-fold convolution).

A rate window [kappa_minus, kappa_plus] brackets, per tau, the codebook
rates ln(n)/d at which answers may carry planted information: below it the
mask fires with probability at most delta; above it the gate null-locks
with high probability over fresh codebooks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.fft import next_fast_len
from scipy.special import logsumexp, ndtr, ndtri

from .errors import ParameterError
from .info import estimate_fisher_gap, estimate_I
from .mixtures import ell_max_batch, null_eval_batch, planted_eval_batch, sample_null_pair_ell
from .seeds import derive_seed
from .support import Codebook, SupportSpec, atoms

DEFAULT_WINDOW_CONSTANT = 2.0
_MC_QUANTILE_FLOOR = 100  # order statistics required below the target quantile


@dataclass(frozen=True)
class OracleProfile:
    """Accuracy envelope: regime 'lp' (moment, order p >= 2) or 'psi1' (tail)."""

    regime: str
    eps_err: float
    rho: float = 0.2
    q_budget: int = 8
    p: float = 2.0

    def __post_init__(self) -> None:
        if self.regime not in ("lp", "psi1"):
            raise ParameterError(f"unknown oracle regime {self.regime!r}")
        if not (0.0 < self.eps_err <= 1.0):
            raise ParameterError(f"eps_err must lie in (0, 1], got {self.eps_err}")
        if not (0.0 < self.rho < 0.25):
            raise ParameterError(f"rho must lie in (0, 1/4), got {self.rho}")
        if self.q_budget < 1:
            raise ParameterError(f"q_budget must be >= 1, got {self.q_budget}")
        if self.regime == "lp" and self.p < 2.0:
            raise ParameterError(f"Lp profiles need p >= 2, got {self.p}")

    @property
    def delta(self) -> float:
        """Per-query failure allowance rho^2 / (80 * q_budget)."""
        return self.rho * self.rho / (80.0 * self.q_budget)

    def tau_star(self, spec: SupportSpec) -> float:
        """psi_1 cutoff 4 R sqrt(d) / eps beyond which the oracle answers null."""
        if self.regime != "psi1":
            return math.inf
        return 4.0 * spec.R * math.sqrt(spec.d) / self.eps_err

    def zeta(self, tau: float, spec: SupportSpec) -> float:
        scale = 4.0 * spec.R * math.sqrt(spec.d)
        if self.regime == "lp":
            return min(0.5, (self.eps_err * tau / scale) ** self.p)
        return min(0.25, 2.0 * math.exp(-0.5 * scale / (tau * self.eps_err)))

    def log_theta(self, tau: float, spec: SupportSpec) -> float:
        if self.regime == "lp":
            base = self.p * (math.log(self.eps_err) - math.log(tau))
            if self.p <= 2.0:
                return base
            return base + (self.p - 2.0) * (2.0 * math.log(tau) - math.log(4.0 * spec.R * math.sqrt(spec.d)))
        return (
            math.log(spec.R * spec.R * spec.d / 4.0)
            - 4.0 * math.log(tau)
            - 2.0 * spec.R * math.sqrt(spec.d) / (tau * self.eps_err)
        )

    def theta(self, tau: float, spec: SupportSpec) -> float:
        """Fisher-gap gate level; null-lock when J_tau(S) <= theta."""
        return math.exp(self.log_theta(tau, spec))


@dataclass(frozen=True)
class ThresholdEstimate:
    """Lower zeta-quantile of exp(ell); log_lambda stores its log."""

    log_lambda: float
    zeta: float
    samples: int
    std_err: float
    method: str = "mc"

    def __post_init__(self) -> None:
        if self.method == "mc" and self.samples < math.ceil(_MC_QUANTILE_FLOOR / self.zeta):
            raise ParameterError(
                f"insufficient samples: the zeta={self.zeta} quantile needs "
                f">= {math.ceil(_MC_QUANTILE_FLOOR / self.zeta)} draws, got {self.samples}"
            )


def _check_zeta(zeta: float) -> float:
    if not (0.0 < zeta <= 0.5):
        raise ParameterError(f"zeta must lie in (0, 1/2], got {zeta}")
    return float(zeta)


def estimate_threshold(
    spec: SupportSpec, tau: float, zeta: float, samples: int, seed: int
) -> ThresholdEstimate:
    """Monte Carlo order statistic for ln Lambda_tau(zeta).

    Lower-quantile convention: the order statistic at rank ceil(zeta*samples).
    The draw count is independent of zeta, so estimates at different zeta from
    the same seed share one sample pool and are monotone in zeta.
    """
    zeta = _check_zeta(zeta)
    floor = math.ceil(_MC_QUANTILE_FLOOR / zeta)
    if samples < floor:
        raise ParameterError(f"insufficient samples: need >= {floor} for zeta={zeta}, got {samples}")
    vals = np.sort(sample_null_pair_ell(spec, tau, samples, np.random.default_rng(seed)))
    rank = math.ceil(zeta * samples)  # 1-based
    # bracket the rank by +-sqrt(N zeta (1-zeta)) order statistics for a
    # binomial (bootstrap-free) std err on the quantile
    k = max(1, math.ceil(math.sqrt(samples * zeta * (1.0 - zeta))))
    lo = vals[max(rank - 1 - k, 0)]
    hi = vals[min(rank - 1 + k, samples - 1)]
    return ThresholdEstimate(
        log_lambda=float(vals[rank - 1]),
        zeta=zeta,
        samples=samples,
        std_err=float((hi - lo) / 2.0),
        method="mc",
    )


def _hypercube_block_pmf(tau: float, grid_size: int, trunc: float) -> tuple[float, float, np.ndarray]:
    """Exact binned law of one coordinate's ell contribution on the hypercube.

    block ell = ln2 - softplus(-2x/tau^2) with x ~ N(1, tau^2) (y=+1 wlog by
    symmetry), a monotone map, so bin masses are exact normal CDF increments.
    Returns (v0, h, pmf) for the uniform value grid v0 + h*arange(grid_size).
    """
    ln2 = math.log(2.0)
    x_lo = 1.0 + tau * ndtri(trunc)
    v_lo = ln2 - np.logaddexp(0.0, -2.0 * x_lo / (tau * tau))
    grid = np.linspace(v_lo, ln2, grid_size)
    h = float(grid[1] - grid[0])
    edges = np.concatenate([[-np.inf], grid[:-1] + h / 2.0, [np.inf]])
    with np.errstate(over="ignore", divide="ignore"):
        # invert v = ln2 - ln(1 + e^(-2x/tau^2)) on interior edges; at tiny
        # tau the value range collapses to the ln2 atom and inner hits 0
        inner = np.expm1(ln2 - edges[1:-1])
        x_edges = -(tau * tau / 2.0) * np.log(inner)
    cdf = np.concatenate([[0.0], ndtr((x_edges - 1.0) / tau), [1.0]])
    pmf = np.diff(cdf)
    return float(grid[0]), h, pmf


def _circle_block_pmf(
    spec: SupportSpec, tau: float, grid_size: int, quad_points: int
) -> tuple[float, float, np.ndarray]:
    """Binned law of one planar block's ell contribution, by 2-D quadrature.

    Rotation symmetry fixes the planted atom to a_0; midpoint quadrature over
    z in [-8.5 tau, 8.5 tau]^2 carries N(0, tau^2 I) weights into value bins.
    """
    a = atoms(spec)
    half = 8.5 * tau
    centers = (np.arange(quad_points) + 0.5) / quad_points * 2 * half - half
    w1 = np.exp(-0.5 * (centers / tau) ** 2)
    lnM = math.log(spec.M)
    sq_a = np.einsum("kb,kb->k", a, a)
    vals = np.empty((quad_points, quad_points))
    for i, z1 in enumerate(centers):
        z = np.stack([np.full(quad_points, z1), centers], axis=1)
        x = a[0] + z
        sqd = np.einsum("nb,nb->n", x, x)[:, None] + sq_a[None, :] - 2.0 * (x @ a.T)
        logw = -sqd / (2.0 * tau * tau)
        lse = np.logaddexp.reduce(logw, axis=1)
        vals[i] = -np.einsum("nb,nb->n", z, z) / (2.0 * tau * tau) - lse + lnM
    weights = np.outer(w1, w1).ravel()
    weights /= weights.sum()
    flat = vals.ravel()
    v0, v1 = float(flat.min()), float(flat.max())
    if v1 == v0:  # degenerate M=1 block: ell is identically 0
        return v0, 1.0, np.array([1.0])
    h = (v1 - v0) / (grid_size - 1)
    bins = np.clip(np.rint((flat - v0) / h).astype(np.int64), 0, grid_size - 1)
    pmf = np.bincount(bins, weights=weights, minlength=grid_size)
    return v0, float(h), pmf


def _fft_power(pmf: np.ndarray, B: int) -> np.ndarray:
    """B-fold self-convolution of a pmf on a uniform grid, negatives clipped."""
    n_out = B * (pmf.size - 1) + 1
    n_fft = next_fast_len(n_out)
    spectrum = np.fft.rfft(pmf, n_fft) ** B
    return np.clip(np.fft.irfft(spectrum, n_fft)[:n_out], 0.0, None)


def _tilted_log_cdf(vals: np.ndarray, pmf: np.ndarray, B: int, lam: float) -> tuple[np.ndarray, np.ndarray]:
    """Exact log CDF of the B-fold sum via an exp(-lam*v) tilt.

    P[S <= u] = M(lam)^B * sum_{s <= u} q_B(s) e^(lam*s) with q_B the B-fold
    convolution of the normalized tilted law.  FFT noise is relative to the
    tilted bulk, which the tilt places at the quantile region of interest, so
    deep tails come out at full relative precision.  Returns (sum grid,
    running log CDF); entries below the tilted bulk's noise floor are -inf.
    """
    with np.errstate(divide="ignore"):
        logits = np.log(pmf) - lam * vals
    log_m = float(logsumexp(logits))
    tilted = np.exp(logits - log_m)
    conv = _fft_power(tilted, B)
    conv[conv < conv.max() * 1e-9] = 0.0  # stay well above FFT round-off
    h = vals[1] - vals[0]
    s_grid = B * vals[0] + h * np.arange(conv.size)
    with np.errstate(divide="ignore"):
        log_terms = np.log(conv) + lam * s_grid
    return s_grid, np.logaddexp.accumulate(B * log_m + log_terms)


def _sum_quantile(v0: float, h: float, pmf: np.ndarray, B: int, zeta: float) -> float:
    """Lower zeta-quantile of the B-fold i.i.d. sum of a gridded block law."""
    vals = v0 + h * np.arange(pmf.size)
    if zeta >= 1e-7:
        # plain convolution: the target CDF level is far above FFT round-off
        conv = _fft_power(pmf, B)
        cdf = np.cumsum(conv / conv.sum())
        idx = int(np.searchsorted(cdf, zeta, side="left"))
        return B * v0 + idx * h
    # deep tail: tilt so the target level sits in the tilted bulk, where the
    # change-of-measure CDF is exact, then read off the crossing
    log_zeta = math.log(zeta)
    with np.errstate(divide="ignore"):
        log_pmf = np.log(pmf)

    def cramer_gap(lam: float) -> float:
        # ~ log P[S <= B * tilted mean] - log zeta, decreasing in lam
        logits = log_pmf - lam * vals
        lse = float(logsumexp(logits))
        mean = float(np.exp(logits - lse) @ vals)
        return B * (lse + lam * mean) - log_zeta

    lam_lo, lam_hi = 0.0, 1.0
    for _ in range(80):
        if cramer_gap(lam_hi) < 0.0:
            break
        lam_lo, lam_hi = lam_hi, 2.0 * lam_hi
    for _ in range(50):
        mid = 0.5 * (lam_lo + lam_hi)
        if cramer_gap(mid) > 0.0:
            lam_lo = mid
        else:
            lam_hi = mid

    def crossing(lam: float) -> tuple[float, float | None]:
        s_grid, log_cdf = _tilted_log_cdf(vals, pmf, B, lam)
        finite = np.isfinite(log_cdf)
        idx = int(np.searchsorted(log_cdf, log_zeta, side="left"))
        if idx < log_cdf.size and finite[idx] and (idx == 0 or finite[idx - 1]):
            return float(log_cdf[finite.argmax()]), float(s_grid[idx])
        return float(log_cdf[finite.argmax()]) if finite.any() else math.inf, None

    lam = 0.5 * (lam_lo + lam_hi)
    floor, found = crossing(lam)
    if found is not None:
        return found
    # warm start missed the window: bracket on the window floor and bisect
    lam_lo, lam_hi = (lam, None) if floor > log_zeta else (None, lam)
    for _ in range(60):
        if lam_lo is None:
            lam = lam_hi / 2.0
        elif lam_hi is None:
            lam = lam_lo * 2.0
        else:
            lam = 0.5 * (lam_lo + lam_hi)
        floor, found = crossing(lam)
        if found is not None:
            return found
        if floor > log_zeta:
            lam_lo = lam
        else:
            lam_hi = lam
    raise ParameterError(f"tilted convolution failed to bracket the {zeta} quantile")


def threshold_by_convolution(
    spec: SupportSpec, tau: float, zeta: float, grid_size: int = 32768, quad_points: int = 2048
) -> ThresholdEstimate:
    """Deterministic ln Lambda_tau(zeta) via block-law convolution.

    ell is a sum of block_count i.i.d. block contributions, so its law is the
    block law's convolution power, evaluated by FFT on a shared value grid
    (exponentially tilted for quantile levels beyond plain-FFT precision).
    Used when the Monte Carlo sample floor for zeta is out of budget; the
    reported std_err is the value-rounding scale of the grid.
    """
    zeta = _check_zeta(zeta)
    B = spec.block_count
    if spec.kind == "hypercube":
        trunc = max(min(zeta * 1e-3 / B, 1e-12), 1e-250)
        v0, h, pmf = _hypercube_block_pmf(tau, grid_size, trunc)
    else:
        v0, h, pmf = _circle_block_pmf(spec, tau, grid_size, quad_points)
    if pmf.size == 1:
        return ThresholdEstimate(v0 * B, zeta, 0, 0.0, method="convolution")
    return ThresholdEstimate(
        log_lambda=_sum_quantile(v0, h, pmf, B, zeta),
        zeta=zeta,
        samples=0,
        std_err=h * math.sqrt(B),
        method="convolution",
    )


class ThresholdCache:
    """Per-(tau, zeta) threshold store shared across sessions on one spec.

    Seeds derive from the tau/zeta bit patterns, so estimates are independent
    of query order, and thresholds never depend on any codebook.
    """

    def __init__(self, spec: SupportSpec, seed: int, mc_budget: int = 200_000):
        self.spec = spec
        self.seed = seed
        self.mc_budget = mc_budget
        self._store: dict[tuple[float, float], ThresholdEstimate] = {}

    def get(self, tau: float, zeta: float) -> ThresholdEstimate:
        key = (float(tau), float(zeta))
        if key not in self._store:
            need = math.ceil(_MC_QUANTILE_FLOOR / zeta)
            if need <= self.mc_budget:
                samples = max(need, min(self.mc_budget, 10 * need))
                est = estimate_threshold(
                    self.spec, tau, zeta, samples, derive_seed(self.seed, "thr", float(tau), float(zeta))
                )
            else:
                est = threshold_by_convolution(self.spec, tau, zeta)
            self._store[key] = est
        return self._store[key]


def mask_value(ell_max_value: float, log_lambda: float) -> float:
    """Piecewise-linear gate ramp clamp(ell_max - ln Lambda + 1, 0, 1)."""
    return float(min(1.0, max(0.0, ell_max_value - log_lambda + 1.0)))


@dataclass(frozen=True)
class GateRecord:
    j_estimate: float
    j_std_err: float
    samples: int
    theta: float
    null_locked: bool


def gate_fisher(
    codebook: Codebook, tau: float, profile: OracleProfile, samples: int, seed: int
) -> GateRecord:
    """Null-lock decision: Monte Carlo J_tau(S) compared against theta(tau)."""
    if samples < 1000:
        raise ParameterError("gate estimates need >= 1000 samples")
    est = estimate_fisher_gap(codebook, tau, samples, seed)
    theta = profile.theta(tau, codebook.spec)
    return GateRecord(
        j_estimate=est.value,
        j_std_err=est.std_err,
        samples=samples,
        theta=theta,
        null_locked=est.value <= theta,
    )


class OracleSession:
    """One adversary instance: fixed (codebook-or-null, profile, seed).

    Per-tau thresholds and gate decisions are cached with seeds derived from
    the tau bit pattern, so identical sessions answer identically at
    identical queries regardless of query order.  `codebook=None` is the
    null instance, which always answers the uniform-support score.
    """

    def __init__(
        self,
        spec: SupportSpec,
        codebook: Codebook | None,
        profile: OracleProfile,
        seed: int,
        threshold_cache: ThresholdCache | None = None,
        gate_samples: int = 2000,
        threshold_budget: int = 200_000,
    ):
        if codebook is not None and codebook.spec != spec:
            raise ParameterError("codebook was sampled from a different support spec")
        self.spec = spec
        self.codebook = codebook
        self.profile = profile
        self.seed = seed
        self.gate_samples = gate_samples
        self.thresholds = threshold_cache or ThresholdCache(
            spec, derive_seed(seed, "thresholds"), threshold_budget
        )
        self._gates: dict[float, GateRecord] = {}

    def _check_tau(self, tau: float) -> float:
        if tau < self.spec.gamma * (1.0 - 1e-12):
            raise ParameterError(
                f"total noise below base level: tau={tau} < gamma={self.spec.gamma}"
            )
        return float(tau)

    def threshold(self, tau: float) -> ThresholdEstimate:
        tau = self._check_tau(tau)
        return self.thresholds.get(tau, self.profile.zeta(tau, self.spec))

    def gate(self, tau: float) -> GateRecord:
        tau = self._check_tau(tau)
        if self.codebook is None:
            raise ParameterError("null sessions have no gate")
        if tau not in self._gates:
            self._gates[tau] = gate_fisher(
                self.codebook,
                tau,
                self.profile,
                max(self.gate_samples, 1000),
                derive_seed(self.seed, "gate", float(tau)),
            )
        return self._gates[tau]

    def answer_batch(self, tau: float, xs: np.ndarray) -> np.ndarray:
        tau = self._check_tau(tau)
        xs = np.atleast_2d(np.asarray(xs, dtype=np.float64))
        null_scores = null_eval_batch(self.spec, tau, xs)[1]
        if self.codebook is None:
            return null_scores
        if self.profile.regime == "psi1" and tau >= self.profile.tau_star(self.spec):
            return null_scores
        lam = self.threshold(tau)
        vals, _ = ell_max_batch(self.codebook, tau, xs)
        m = np.clip(vals - lam.log_lambda + 1.0, 0.0, 1.0)
        if not np.any(m > 0.0):
            return null_scores  # gate irrelevant: the blend is null everywhere
        if self.gate(tau).null_locked:
            return null_scores
        planted = planted_eval_batch(self.codebook, tau, xs)[1]
        out = null_scores + m[:, None] * (planted - null_scores)
        out[m == 0.0] = null_scores[m == 0.0]
        out[m == 1.0] = planted[m == 1.0]  # bit-for-bit planted at full mask
        return out

    def answer(self, tau: float, x: np.ndarray) -> np.ndarray:
        return self.answer_batch(tau, np.atleast_2d(x))[0]


def oracle_answer(
    codebook: Codebook | None,
    spec: SupportSpec,
    tau: float,
    x: np.ndarray,
    profile: OracleProfile,
    session: OracleSession | None = None,
    seed: int = 0,
) -> np.ndarray:
    """One-shot functional form of OracleSession.answer."""
    if session is None:
        session = OracleSession(spec, codebook, profile, seed)
    return session.answer(tau, x)


@dataclass(frozen=True)
class LpAuditRecord:
    tau: float
    p: float
    samples: int
    moment_estimate: float
    moment_std_err: float
    moment_bound: float
    gate: GateRecord | None


@dataclass(frozen=True)
class Psi1AuditRecord:
    tau: float
    samples: int
    rows: tuple[tuple[float, float, float, float], ...]  # (z, survival, std_err, bound)
    gate: GateRecord | None


def accuracy_audit(
    codebook: Codebook,
    profile: OracleProfile,
    tau: float,
    samples: int,
    seed: int,
    session: OracleSession | None = None,
    z_grid: np.ndarray | None = None,
):
    """Empirical check of the oracle's accuracy envelope under X ~ nu_{S,tau}.

    Lp: Monte Carlo E|s_hat - s_S|^p against (eps/tau)^p.  psi1: survival of
    |s_hat - s_S| on a z grid against min(1, 2 exp(-z tau / eps)).
    """
    from .info import _posterior_chunks  # local import to keep module layering flat

    spec = codebook.spec
    if session is None:
        session = OracleSession(spec, codebook, profile, derive_seed(seed, "session"))
    errs = np.empty(samples)
    lo = 0
    for xs in _posterior_chunks(codebook, tau, samples, derive_seed(seed, "draws")):
        s_hat = session.answer_batch(tau, xs)
        s_true = planted_eval_batch(codebook, tau, xs)[1]
        errs[lo : lo + xs.shape[0]] = np.linalg.norm(s_hat - s_true, axis=1)
        lo += xs.shape[0]
    gate = session.gate(tau)
    if profile.regime == "lp":
        powered = errs**profile.p
        return LpAuditRecord(
            tau=tau,
            p=profile.p,
            samples=samples,
            moment_estimate=float(powered.mean()),
            moment_std_err=float(powered.std(ddof=1) / math.sqrt(samples)),
            moment_bound=(profile.eps_err / tau) ** profile.p,
            gate=gate,
        )
    hard = 2.0 * spec.R * math.sqrt(spec.d) / (tau * tau)
    if z_grid is None:
        z_grid = np.concatenate([np.geomspace(hard / 100.0, hard, 12), [1.01 * hard]])
    lam = tau / profile.eps_err
    rows = []
    for z in z_grid:
        surv = float(np.mean(errs >= z))
        se = math.sqrt(max(surv * (1 - surv), 1.0 / samples) / samples)
        rows.append((float(z), surv, se, min(1.0, 2.0 * math.exp(-lam * z))))
    return Psi1AuditRecord(tau=tau, samples=samples, rows=tuple(rows), gate=gate)


@dataclass(frozen=True)
class RateWindow:
    """Per-tau bracket of informative codebook rates ln(n)/d."""

    tau: float
    tau_tilde: float
    kappa_minus: float
    kappa_plus: float
    i_hat: float
    i_std_err: float
    log_lambda: float
    threshold_method: str
    h_value: float
    e_med: float
    e_big: float
    delta: float
    constant: float

    @property
    def width(self) -> float:
        return max(0.0, self.kappa_plus - self.kappa_minus)

    @property
    def empty(self) -> bool:
        return self.kappa_minus > self.kappa_plus


def compute_window(
    spec: SupportSpec,
    profile: OracleProfile,
    tau: float,
    mc_budget: int,
    seed: int,
    constant: float = DEFAULT_WINDOW_CONSTANT,
    threshold_cache: ThresholdCache | None = None,
) -> RateWindow:
    """Rate window at tau: kappa_minus from the quantile, kappa_plus from I.

    kappa_minus = (ln Lambda + ln delta - 1)/d; kappa_plus = I_(tau_tilde) +
    min(E_med, E_big)/d with E_med = C sqrt(dH) + CH, E_big the far-noise
    variant scaled by R/tau_tilde, and H(tau) the budget-and-theta log factor.
    """
    if tau < spec.gamma * (1.0 - 1e-12):
        raise ParameterError(f"total noise below base level: tau={tau} < gamma={spec.gamma}")
    if mc_budget < 1000:
        raise ParameterError("window estimation needs an MC budget of >= 1000")
    d = spec.d
    zeta = profile.zeta(tau, spec)
    cache = threshold_cache or ThresholdCache(spec, derive_seed(seed, "threshold"), mc_budget // 2)
    lam = cache.get(tau, zeta)
    delta = profile.delta
    kappa_minus = (lam.log_lambda + math.log(delta) - 1.0) / d
    alpha = 1.0 - spec.gamma**2 / (spec.R**2 * d**2)
    tau_tilde = math.sqrt(alpha) * tau
    i_est = estimate_I(spec, tau_tilde, max(mc_budget // 2, 1000), derive_seed(seed, "imean"))
    log_v1 = float(np.logaddexp(0.0, spec.log_size))
    h_arg = (
        math.log(log_v1)
        - math.log(delta)
        + math.log(constant)
        + 2.0 * math.log(spec.R)
        + 2.0 * math.log(d)
        - 2.0 * math.log(spec.gamma)
        - 2.0 * math.log(tau)
        - profile.log_theta(tau, spec)
    )
    h_value = max(1.0, h_arg)
    e_med = constant * math.sqrt(d * h_value) + constant * h_value
    e_big = constant * (spec.R / tau_tilde) * math.sqrt(d * h_value) + constant * h_value
    kappa_plus = i_est.value + min(e_med, e_big) / d
    return RateWindow(
        tau=tau,
        tau_tilde=tau_tilde,
        kappa_minus=kappa_minus,
        kappa_plus=kappa_plus,
        i_hat=i_est.value,
        i_std_err=i_est.std_err,
        log_lambda=lam.log_lambda,
        threshold_method=lam.method,
        h_value=h_value,
        e_med=e_med,
        e_big=e_big,
        delta=delta,
        constant=constant,
    )
