"""Shell-occupancy proxy for the informative smoothing window.

Everything here lives on the hypercube, viewed from the reference vertex of
all ones.  A random codebook is summarized by its shell occupancies N_k (the
number of codebook points at Hamming distance k), Poissonized so that huge
dimensions stay tractable; conditioning on the occupancy profile and
integrating out the placement within each shell turns the pointwise
signal into a closed-form proxy.  Sweeping that proxy over a log-noise grid,
taking medians across occupancy draws, and measuring the peak's full width at
half maximum yields the 1/sqrt(d) window-narrowing picture.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import gammaln, logsumexp

from .errors import GridError, ParameterError
from .seeds import derive_seed

_LN2 = math.log(2.0)
_POISSON_CUTOFF = 50.0  # exact draws below, Gaussian approximation above
_DETERMINISTIC_CUTOFF = 1e8  # mean replaces the draw entirely
GRID_POINTS = 641
GRID_HALF_WIDTH = 0.5  # in ln tau, centered on the matching scale
DEFAULT_TRIALS = 33


def binary_entropy(q: float) -> float:
    if not (0.0 < q < 1.0):
        raise ParameterError(f"entropy argument must lie in (0, 1), got {q}")
    return -q * math.log(q) - (1.0 - q) * math.log(1.0 - q)


def solve_q_rho(rho: float) -> float:
    """Lower-branch solution of h(q) = ln2 - rho, by bisection on (0, 1/2)."""
    if not (0.0 < rho < _LN2):
        raise ParameterError(f"rho must lie in (0, ln 2), got {rho}")
    target = _LN2 - rho
    lo, hi = 1e-12, 0.5
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        gap = binary_entropy(mid) - target
        if abs(gap) <= 1e-12:
            return mid
        if gap < 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def q_tau(tau: float) -> float:
    """Shell fraction u/(1+u) where the smoothing weight concentrates."""
    if tau <= 0.0:
        raise ParameterError(f"tau must be positive, got {tau}")
    u = math.exp(-2.0 / (tau * tau))
    return u / (1.0 + u)


def matching_scale(rho: float) -> float:
    """Noise level tau* at which q_tau equals the critical fraction q_rho."""
    q = solve_q_rho(rho)
    u_star = q / (1.0 - q)
    return math.sqrt(-2.0 / math.log(u_star))


@lru_cache(maxsize=64)
def _log_binom(d: int) -> np.ndarray:
    """ln C(d, k) for k = 0..d via log-gamma; cached read-only table."""
    k = np.arange(d + 1)
    out = gammaln(d + 1) - gammaln(k + 1) - gammaln(d - k + 1)
    out.flags.writeable = False
    return out


def shell_log_mu(d: int, rho: float) -> np.ndarray:
    """ln mu_k = ln C(d,k) + rho*d - d*ln2, the Poisson means by shell."""
    if d < 2 or d % 2:
        raise ParameterError(f"even dimension required, got {d}")
    if not (0.0 < rho < _LN2):
        raise ParameterError(f"rho must lie in (0, ln 2), got {rho}")
    return _log_binom(d) + rho * d - d * _LN2


def _regimes(log_mu: np.ndarray) -> tuple[str, ...]:
    tags = np.where(
        log_mu < math.log(_POISSON_CUTOFF),
        "exact-poisson",
        np.where(log_mu < math.log(_DETERMINISTIC_CUTOFF), "gaussian", "deterministic"),
    )
    return tuple(tags.tolist())


@dataclass(frozen=True, eq=False)
class ShellOccupancy:
    """Counts-by-shell summary of a codebook seen from the reference vertex.

    Counts are kept in log space: the deterministic regime stores mu_k for
    shells whose mean dwarfs its fluctuations, and those means overflow
    float64 long before the dimensions of interest.  -inf marks empty shells.
    """

    d: int
    rho: float
    log_mu: np.ndarray
    log_counts: np.ndarray
    regimes: tuple[str, ...]
    resamples: int = 0

    def __post_init__(self) -> None:
        for name in ("log_mu", "log_counts"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            if arr.shape != (self.d + 1,):
                raise ParameterError(f"{name} must have shape ({self.d + 1},), got {arr.shape}")
            arr = arr.copy()
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        if len(self.regimes) != self.d + 1:
            raise ParameterError("one regime tag per shell required")

    def counts(self) -> np.ndarray:
        """Plain counts; overflows to inf for deterministic shells at huge d."""
        with np.errstate(over="ignore"):
            return np.exp(self.log_counts)

    @property
    def log_total(self) -> float:
        return float(logsumexp(self.log_counts))

    @property
    def occupied(self) -> np.ndarray:
        return np.isfinite(self.log_counts)


def occupancy_from_counts(d: int, rho: float, counts: np.ndarray) -> ShellOccupancy:
    """Wrap explicit shell counts (synthetic profiles, small-d cross-checks)."""
    counts = np.asarray(counts, dtype=np.float64)
    log_mu = shell_log_mu(d, rho)
    if counts.shape != (d + 1,) or np.any(counts < 0):
        raise ParameterError(f"counts must be {d + 1} nonnegative reals")
    with np.errstate(divide="ignore"):
        log_counts = np.log(counts)
    return ShellOccupancy(d, rho, log_mu, log_counts, _regimes(log_mu))


def sample_occupancies(d: int, rho: float, seed: int) -> ShellOccupancy:
    """Poissonized occupancy draw with per-shell regimes set by mu_k.

    mu_k < 50: exact Poisson; 50 <= mu_k < 1e8: rounded-and-clamped Gaussian;
    mu_k >= 1e8: the mean itself.  The all-shells-empty event (possible only
    when every shell is stochastic) is re-drawn and counted.
    """
    log_mu = shell_log_mu(d, rho)
    regimes = _regimes(log_mu)
    tags = np.asarray(regimes)
    poisson = tags == "exact-poisson"
    gauss = tags == "gaussian"
    deterministic = tags == "deterministic"
    rng = np.random.default_rng(seed)
    resamples = 0
    for _ in range(10_000):
        log_counts = np.full(d + 1, -math.inf)
        log_counts[deterministic] = log_mu[deterministic]
        n_poisson = rng.poisson(np.exp(log_mu[poisson]))
        mu_mid = np.exp(log_mu[gauss])
        n_gauss = np.maximum(
            0.0, np.round(mu_mid + np.sqrt(mu_mid) * rng.standard_normal(mu_mid.size))
        )
        with np.errstate(divide="ignore"):
            log_counts[poisson] = np.log(n_poisson)
            log_counts[gauss] = np.log(n_gauss)
        if np.any(np.isfinite(log_counts)):
            return ShellOccupancy(d, rho, log_mu, log_counts, regimes, resamples)
        resamples += 1
    raise ParameterError("occupancy sampling kept returning the empty profile")


def proxy_signal(occ: ShellOccupancy, tau: float) -> float:
    """Conditional proxy for the pointwise signal at the reference vertex.

    With u = exp(-2/tau^2), shell weights N_k u^k define the partition sum Z,
    the density ratio R_tau = (2^d/|S|) Z/(1+u)^d, and the coordinate-averaged
    posterior mean alpha_bar; the proxy is tau^-4 R_tau [(alpha_bar - m0)^2 +
    sum_k N_k u^2k / Z^2 * v_k * f_k] with the null mean m0 = tanh(1/tau^2),
    v_k the within-shell coordinate variance, and f_k the finite-population
    factor clamped to [0, 1].  All shell sums run in log space.
    """
    if tau <= 0.0:
        raise ParameterError(f"tau must be positive, got {tau}")
    live = occ.occupied
    if not live.any():
        raise ParameterError("occupancy has no points")
    d = occ.d
    k = np.arange(d + 1, dtype=np.float64)
    ln_u = -2.0 / (tau * tau)
    log_w = occ.log_counts[live] + k[live] * ln_u  # ln N_k u^k
    log_z = float(logsumexp(log_w))
    log_r = d * _LN2 - occ.log_total + log_z - d * float(np.logaddexp(0.0, ln_u))

    coef = 1.0 - 2.0 * k[live] / d
    with np.errstate(divide="ignore"):
        log_mag = log_w + np.log(np.abs(coef))
    pos = float(logsumexp(log_mag[coef > 0]) if np.any(coef > 0) else -math.inf)
    neg = float(logsumexp(log_mag[coef < 0]) if np.any(coef < 0) else -math.inf)
    alpha_bar = math.exp(pos - log_z) - math.exp(neg - log_z)
    m0 = math.tanh(1.0 / (tau * tau))  # (1-u)/(1+u)
    bias = (alpha_bar - m0) ** 2

    inner = live & (np.arange(d + 1) >= 1) & (np.arange(d + 1) <= d - 1)
    ln_c = _log_binom(d)[inner]
    lc = occ.log_counts[inner]
    # f_k = (C-N)/(C-1); sparse Poisson shells can exceed C, hence the clamp
    f = np.clip(-np.expm1(lc - ln_c), 0.0, 1.0) / (-np.expm1(-ln_c))
    f = np.clip(f, 0.0, 1.0)
    v = 4.0 * k[inner] * (d - k[inner]) / (d * d)
    with np.errstate(over="ignore"):
        variance = float(np.sum(np.exp(lc + 2.0 * k[inner] * ln_u - 2.0 * log_z) * v * f))

    g_cond = bias + variance
    if g_cond == 0.0:
        return 0.0
    with np.errstate(over="ignore"):
        return float(np.exp(log_r + math.log(g_cond) - 4.0 * math.log(tau)))


@dataclass(frozen=True, eq=False)
class ProxyCurve:
    """Median proxy signal over a uniform ln-tau grid around tau*."""

    d: int
    rho: float
    log_tau_grid: np.ndarray
    median_signal: np.ndarray
    trials: int
    tau_star: float
    q_rho: float
    resample_events: int = 0

    def __post_init__(self) -> None:
        for name in ("log_tau_grid", "median_signal"):
            arr = np.asarray(getattr(self, name), dtype=np.float64).copy()
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        if self.log_tau_grid.shape != self.median_signal.shape:
            raise ParameterError("grid and signal lengths differ")


def run_sweep(d: int, rho: float, trials: int, seed: int, points: int = GRID_POINTS) -> ProxyCurve:
    """Median of the proxy over `trials` occupancy draws on the ln-tau grid.

    One occupancy per trial is shared across the whole grid, so each trial
    contributes a smooth curve; the median is taken pointwise.  Odd trial
    counts keep it an order statistic.
    """
    if trials < 1 or trials % 2 == 0:
        raise ParameterError(f"trial count must be odd and >= 1, got {trials}")
    if points < 2:
        raise ParameterError(f"grid needs >= 2 points, got {points}")
    tau_star = matching_scale(rho)
    center = math.log(tau_star)
    grid = np.linspace(center - GRID_HALF_WIDTH, center + GRID_HALF_WIDTH, points)
    taus = np.exp(grid)
    signals = np.empty((trials, points))
    resample_events = 0
    for t in range(trials):
        occ = sample_occupancies(d, rho, derive_seed(seed, "occupancy", t))
        resample_events += occ.resamples
        signals[t] = [proxy_signal(occ, tau) for tau in taus]
    return ProxyCurve(
        d=d,
        rho=rho,
        log_tau_grid=grid,
        median_signal=np.median(signals, axis=0),
        trials=trials,
        tau_star=tau_star,
        q_rho=solve_q_rho(rho),
        resample_events=resample_events,
    )


def half_max_width(log_tau_grid: np.ndarray, values: np.ndarray) -> float:
    """FWHM in ln tau: crossings nearest the peak, linearly interpolated."""
    g = np.asarray(log_tau_grid, dtype=np.float64)
    y = np.asarray(values, dtype=np.float64)
    if g.shape != y.shape or g.ndim != 1 or g.size < 2:
        raise ParameterError("grid and values must be equal-length 1-d arrays")
    top = float(y.max())
    if top <= 0.0:
        raise ParameterError("curve needs a strictly positive max")
    half = top / 2.0
    peak = int(np.argmax(y))
    left = right = None
    for j in range(peak, 0, -1):  # last up-crossing before the peak
        if y[j] >= half > y[j - 1]:
            frac = (half - y[j - 1]) / (y[j] - y[j - 1])
            left = g[j - 1] + frac * (g[j] - g[j - 1])
            break
    for j in range(peak, y.size - 1):  # first down-crossing after the peak
        if y[j] >= half > y[j + 1]:
            frac = (y[j] - half) / (y[j] - y[j + 1])
            right = g[j] + frac * (g[j + 1] - g[j])
            break
    if left is None or right is None:
        raise GridError("window exceeds grid")
    return float(right - left)


def fwhm(curve: ProxyCurve) -> float:
    return half_max_width(curve.log_tau_grid, curve.median_signal)


@dataclass(frozen=True)
class ScalingFit:
    slope: float
    intercept: float
    r_squared: float


def fit_scaling(pairs) -> ScalingFit:
    """OLS of window width against d^(-1/2)."""
    arr = np.asarray(pairs, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 2 or arr.shape[0] < 3:
        raise ParameterError("need >= 3 (d, fwhm) pairs")
    x = 1.0 / np.sqrt(arr[:, 0])
    y = arr[:, 1]
    xm, ym = x.mean(), y.mean()
    slope = float(np.sum((x - xm) * (y - ym)) / np.sum((x - xm) ** 2))
    intercept = float(ym - slope * xm)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - ym) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else float(1.0 - np.sum(resid**2) / ss_tot)
    return ScalingFit(slope=slope, intercept=intercept, r_squared=r2)
