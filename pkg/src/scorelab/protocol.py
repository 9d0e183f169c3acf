"""Query protocol over the smoothed oracles, plus coupling and separation.

A session answers (sigma, x) queries at total noise tau = sqrt(gamma^2 +
sigma^2) and records every exchange in an append-only transcript.  Reference
samplers drive sessions with internal randomness derived from (seed, step),
never from the answers, so a null run and a planted run with the same seed
stay in lockstep until the first differing answer -- the coupling time T.
The separation check measures the base-noise acceptance set A(S) = {x :
ell_max(x) >= ln Lambda_gamma}: its mass under the planted smoothing law and
its overlap when probed with codebooks drawn fresh from a rate packing.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError
from .info import _posterior_chunks
from .mixtures import ell_max, ell_max_batch
from .oracle import OracleProfile, OracleSession, ThresholdCache
from .seeds import derive_seed
from .support import Codebook, RatePacking, SupportSpec, pack_rates, sample_codebook

_TAU_ATOL = 1e-12


@dataclass(frozen=True)
class TranscriptEntry:
    sigma: float
    tau: float
    x: np.ndarray
    answer: np.ndarray

    def __post_init__(self) -> None:
        for name in ("x", "answer"):
            arr = np.asarray(getattr(self, name), dtype=np.float64).copy()
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)


class Transcript:
    """Append-only query log for one session."""

    def __init__(self, spec: SupportSpec, instance: str, seed: int):
        self.spec = spec
        self.instance = instance
        self.seed = seed
        self._entries: list[TranscriptEntry] = []

    def append(self, sigma: float, tau: float, x: np.ndarray, answer: np.ndarray) -> None:
        if abs(tau - math.hypot(self.spec.gamma, sigma)) > _TAU_ATOL:
            raise ParameterError(f"tau {tau} is not the total noise at sigma {sigma}")
        entry = TranscriptEntry(float(sigma), float(tau), x, answer)
        if entry.x.shape != (self.spec.d,) or entry.answer.shape != (self.spec.d,):
            raise ParameterError(f"transcript vectors must have length {self.spec.d}")
        self._entries.append(entry)

    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self):
        return iter(self._entries)

    def __getitem__(self, i: int) -> TranscriptEntry:
        return self._entries[i]

    def entries(self) -> tuple[TranscriptEntry, ...]:
        return tuple(self._entries)


def transcript_to_json(transcript: Transcript) -> str:
    payload = {
        "instance": transcript.instance,
        "seed": transcript.seed,
        "d": transcript.spec.d,
        "spec_hash": transcript.spec.content_hash(),
        "entries": [
            {
                "sigma": e.sigma,
                "tau": e.tau,
                "x": e.x.tolist(),
                "answer": e.answer.tolist(),
            }
            for e in transcript
        ],
    }
    return json.dumps(payload, indent=2)


def replay_queries(text: str) -> list[tuple[float, np.ndarray]]:
    """Extract the (sigma, x) query sequence from a dumped transcript."""
    payload = json.loads(text)
    return [(float(e["sigma"]), np.asarray(e["x"], dtype=np.float64)) for e in payload["entries"]]


class QuerySession:
    """Oracle session plus transcript: the protocol-facing query surface."""

    def __init__(
        self,
        spec: SupportSpec,
        codebook: Codebook | None,
        profile: OracleProfile,
        seed: int,
        threshold_cache: ThresholdCache | None = None,
        gate_samples: int = 2000,
    ):
        self.spec = spec
        self.codebook = codebook
        self.oracle = OracleSession(
            spec, codebook, profile, seed, threshold_cache=threshold_cache, gate_samples=gate_samples
        )
        tag = "null" if codebook is None else f"planted:{codebook.content_hash()}"
        self.transcript = Transcript(spec, tag, seed)

    def query(self, sigma: float, x: np.ndarray) -> np.ndarray:
        if sigma <= 0.0:
            raise ParameterError(f"sigma must be positive, got {sigma}")
        tau = math.hypot(self.spec.gamma, sigma)
        answer = self.oracle.answer(tau, np.asarray(x, dtype=np.float64))
        self.transcript.append(sigma, tau, x, answer)
        return answer


def open_session(
    instance: SupportSpec | Codebook,
    profile: OracleProfile,
    seed: int,
    threshold_cache: ThresholdCache | None = None,
    gate_samples: int = 2000,
) -> QuerySession:
    """Open a null session on a support spec or a planted one on a codebook."""
    if isinstance(instance, SupportSpec):
        return QuerySession(instance, None, profile, seed, threshold_cache, gate_samples)
    if isinstance(instance, Codebook):
        return QuerySession(instance.spec, instance, profile, seed, threshold_cache, gate_samples)
    raise ParameterError(f"instance must be a support spec or a codebook, got {type(instance)!r}")


@dataclass(frozen=True)
class SamplerConfig:
    """Annealed Euler drivers; the schedule is the per-step sigma sequence."""

    kind: str
    schedule: np.ndarray
    step_scale: float = 0.25

    def __post_init__(self) -> None:
        if self.kind not in ("reverse-sde-euler", "prob-flow-euler"):
            raise ParameterError(f"unknown sampler kind {self.kind!r}")
        sched = np.asarray(self.schedule, dtype=np.float64).copy()
        if sched.ndim != 1 or sched.size < 1:
            raise ParameterError("schedule must be a nonempty 1-d sigma sequence")
        if np.any(sched <= 0.0) or np.any(np.diff(sched) >= 0.0):
            raise ParameterError("schedule must be strictly decreasing and positive")
        if self.step_scale <= 0.0:
            raise ParameterError(f"step_scale must be positive, got {self.step_scale}")
        sched.flags.writeable = False
        object.__setattr__(self, "schedule", sched)

    @property
    def steps(self) -> int:
        return int(self.schedule.size)


def geometric_schedule(
    spec: SupportSpec, steps: int, sigma_max: float | None = None, sigma_min: float | None = None
) -> np.ndarray:
    """Default query ladder from the data scale down to a tenth of base noise."""
    if steps < 1:
        raise ParameterError(f"steps must be >= 1, got {steps}")
    hi = 2.0 * spec.R * math.sqrt(spec.d) if sigma_max is None else float(sigma_max)
    lo = spec.gamma / 10.0 if sigma_min is None else float(sigma_min)
    if not (0.0 < lo < hi):
        raise ParameterError(f"need 0 < sigma_min < sigma_max, got [{lo}, {hi}]")
    if steps == 1:
        return np.array([hi])
    return np.geomspace(hi, lo, steps)


def run_sampler(
    config: SamplerConfig, session: QuerySession, seed: int
) -> tuple[np.ndarray, Transcript]:
    """Drive the session along the schedule; exactly one query per step.

    x steps by h tau^2 s_hat, the reverse-SDE variant adds sqrt(2h) tau z with
    z drawn from (seed, step) -- independent of the answers, so equal seeds
    couple runs exactly.
    """
    spec = session.spec
    gamma = spec.gamma
    h = config.step_scale
    sigma_max = float(config.schedule[0])
    init_rng = np.random.default_rng(derive_seed(seed, "init"))
    x = math.hypot(gamma, sigma_max) * init_rng.standard_normal(spec.d)
    for i, sigma in enumerate(config.schedule):
        tau = math.hypot(gamma, float(sigma))
        s_hat = session.query(float(sigma), x)
        x = x + h * tau * tau * s_hat
        if config.kind == "reverse-sde-euler":
            z = np.random.default_rng(derive_seed(seed, "step", i)).standard_normal(spec.d)
            x = x + math.sqrt(2.0 * h) * tau * z
    return x, session.transcript


@dataclass(frozen=True)
class CouplingRecord:
    seed: int
    rate: float
    steps: int
    t: float  # 1-based index of the first differing answer; inf if none
    outputs_equal: bool
    a_set_hit_null: bool
    a_set_hit_planted: bool
    log_lambda_base: float
    null_transcript: Transcript = field(repr=False)
    planted_transcript: Transcript = field(repr=False)

    @property
    def diverged(self) -> bool:
        return math.isfinite(self.t)


def coupled_run(
    codebook: Codebook,
    profile: OracleProfile,
    config: SamplerConfig,
    seed: int,
    threshold_cache: ThresholdCache | None = None,
    gate_samples: int = 2000,
) -> CouplingRecord:
    """Same internal randomness, null vs planted oracle; report divergence.

    Answer comparison is exact float equality: below the mask the planted
    session returns the bit-identical null score, so T needs no tolerance.
    A(S) membership of both outputs is evaluated at base noise against the
    planted codebook's threshold.
    """
    spec = codebook.spec
    cache = threshold_cache or ThresholdCache(spec, derive_seed(seed, "coupling-thresholds"))
    null_session = QuerySession(
        spec, None, profile, derive_seed(seed, "null"), cache, gate_samples
    )
    planted_session = QuerySession(
        spec, codebook, profile, derive_seed(seed, "planted"), cache, gate_samples
    )
    omega = derive_seed(seed, "omega")
    x_null, t_null = run_sampler(config, null_session, omega)
    x_planted, t_planted = run_sampler(config, planted_session, omega)

    t = math.inf
    for i, (a, b) in enumerate(zip(t_null, t_planted)):
        if not np.array_equal(a.answer, b.answer):
            t = float(i + 1)
            break

    # coupling soundness: entries strictly before T coincide, queries at T too
    last = len(t_null) if math.isinf(t) else int(t)
    for i in range(last):
        a, b = t_null[i], t_planted[i]
        assert a.sigma == b.sigma and np.array_equal(a.x, b.x)
        if i < last - 1 or math.isinf(t):
            assert np.array_equal(a.answer, b.answer)

    gamma = spec.gamma
    log_lambda = cache.get(gamma, profile.zeta(gamma, spec)).log_lambda
    hit_null = bool(ell_max(codebook, gamma, x_null)[0] >= log_lambda)
    hit_planted = bool(ell_max(codebook, gamma, x_planted)[0] >= log_lambda)
    return CouplingRecord(
        seed=seed,
        rate=codebook.rate,
        steps=config.steps,
        t=t,
        outputs_equal=bool(np.array_equal(x_null, x_planted)),
        a_set_hit_null=hit_null,
        a_set_hit_planted=hit_planted,
        log_lambda_base=log_lambda,
        null_transcript=t_null,
        planted_transcript=t_planted,
    )


@dataclass(frozen=True)
class SeparationRecord:
    mass_coverage: float
    mass_std_err: float
    coverage_floor: float  # 1 - zeta at base noise
    coverage_holds: bool
    overlap: float
    overlap_std_err: float
    markov_bound: float  # n_max / Lambda
    overlap_holds: bool
    log_lambda: float
    zeta: float
    n_max: int
    samples: int
    books: int


def separation_check(
    codebook: Codebook,
    profile: OracleProfile,
    samples: int,
    seed: int,
    packing: RatePacking | None = None,
    probe: np.ndarray | None = None,
    books: int = 2000,
    threshold_budget: int = 200_000,
) -> SeparationRecord:
    """Mass coverage of A(S) under nu_{S,gamma} and its fresh-codebook overlap.

    Coverage: ell_max(X) >= ln Lambda happens with probability >= 1 - zeta
    because the planted center's own log-ratio already clears its lower
    quantile.  Overlap: a fixed probe lands in A(S') for a fresh codebook S'
    (size drawn uniformly from the packing) with probability <= n_max/Lambda
    by a union bound and Markov.
    """
    if samples < 10_000:
        raise ParameterError(f"separation checks need >= 10000 samples, got {samples}")
    spec = codebook.spec
    gamma = spec.gamma
    zeta = profile.zeta(gamma, spec)
    cache = ThresholdCache(spec, derive_seed(seed, "thresholds"), threshold_budget)
    log_lambda = cache.get(gamma, zeta).log_lambda

    hits = 0
    for xs in _posterior_chunks(codebook, gamma, samples, derive_seed(seed, "mass")):
        hits += int(np.sum(ell_max_batch(codebook, gamma, xs)[0] >= log_lambda))
    coverage = hits / samples
    cov_se = math.sqrt(max(coverage * (1.0 - coverage), 1.0 / samples) / samples)

    if packing is None:
        packing = pack_rates(spec.d, 1, max(codebook.n, 8), 1.0 / (2.0 * spec.d))
    if probe is None:
        probe = np.zeros(spec.d)
    probe = np.asarray(probe, dtype=np.float64)
    rng = np.random.default_rng(derive_seed(seed, "sizes"))
    overlap_hits = 0
    for j in range(books):
        n_j = int(packing.sizes[rng.integers(0, len(packing.sizes))])
        fresh = sample_codebook(spec, n_j, derive_seed(seed, "book", j))
        overlap_hits += int(ell_max(fresh, gamma, probe)[0] >= log_lambda)
    overlap = overlap_hits / books
    over_se = math.sqrt(max(overlap * (1.0 - overlap), 1.0 / books) / books)
    markov = min(1.0, packing.n_max * math.exp(-log_lambda))

    return SeparationRecord(
        mass_coverage=coverage,
        mass_std_err=cov_se,
        coverage_floor=1.0 - zeta,
        coverage_holds=coverage >= 1.0 - zeta - 3.0 * cov_se,
        overlap=overlap,
        overlap_std_err=over_se,
        markov_bound=markov,
        overlap_holds=overlap <= markov + 3.0 * over_se,
        log_lambda=log_lambda,
        zeta=zeta,
        n_max=packing.n_max,
        samples=samples,
        books=books,
    )
