"""Experiment dispatch: run a config, write CSV artifacts + manifest.

Per-task seeds come from derive_seed(config.seed, "task", name, index), so
adding a task never perturbs the draws of existing ones.  Files are written
to temp paths and renamed into place; on failure every path this run created
is removed.  The manifest holds the config hash and a sha256 per artifact,
making each output reproducible bit-for-bit from (config, seed).
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from pathlib import Path

import numpy as np

from .errors import GridError, ParameterError
from .info import concentration_audit, debruijn_check, estimate_I, estimate_fisher_gap
from .oracle import OracleProfile, OracleSession, ThresholdCache, accuracy_audit, compute_window
from .protocol import SamplerConfig, coupled_run, geometric_schedule, separation_check
from .schemas import ExperimentConfig, rows_to_csv
from .seeds import derive_seed
from .shells import fit_scaling, fwhm, run_sweep, solve_q_rho
from .support import SupportSpec, build_support, pack_rates, sample_codebook


def _task_seed(config: ExperimentConfig, name: str, index: int = 0) -> int:
    return derive_seed(config.seed, "task", name, index)


def _spec(config: ExperimentConfig) -> SupportSpec:
    return build_support(config.kind, config.d, config.R, config.gamma)


def _profile(config: ExperimentConfig) -> OracleProfile:
    return OracleProfile(config.regime, config.eps_err, config.rho, config.q_budget, config.p)


def _tau_grid(config: ExperimentConfig) -> np.ndarray:
    return np.geomspace(config.tau_min, config.tau_max, config.tau_points)


def _curve_rows(curve) -> list[dict]:
    return [
        {
            "d": curve.d,
            "rho": curve.rho,
            "trials": curve.trials,
            "tau_star": curve.tau_star,
            "ln_tau": float(lt),
            "median_signal": float(ms),
        }
        for lt, ms in zip(curve.log_tau_grid, curve.median_signal)
    ]


def _run_sweep(config: ExperimentConfig) -> tuple[dict[str, str], dict]:
    curve = run_sweep(config.d, config.rho, config.trials, _task_seed(config, "sweep"), config.points)
    values = {"q_rho": curve.q_rho, "tau_star": curve.tau_star, "resample_events": curve.resample_events}
    return {"sweep.csv": rows_to_csv("curves", _curve_rows(curve))}, values


def _run_fig1(config: ExperimentConfig) -> tuple[dict[str, str], dict]:
    curve_rows: list[dict] = []
    pairs = []
    scaling_rows: list[dict] = []
    for i, d in enumerate(config.d_list):
        curve = run_sweep(d, config.rho, config.trials, _task_seed(config, "sweep", i), config.points)
        curve_rows.extend(_curve_rows(curve))
        try:
            width = fwhm(curve)
        except GridError as exc:
            raise GridError(f"{exc} (d={d})") from None
        pairs.append((d, width))
        scaling_rows.append(
            {"row_type": "point", "d": d, "inv_sqrt_d": 1.0 / math.sqrt(d), "fwhm": width}
        )
    fit = fit_scaling(pairs)
    scaling_rows.append(
        {"row_type": "fit", "slope": fit.slope, "intercept": fit.intercept, "r_squared": fit.r_squared}
    )
    values = {
        "q_rho": solve_q_rho(config.rho),
        "slope": fit.slope,
        "intercept": fit.intercept,
        "r_squared": fit.r_squared,
    }
    files = {
        "curves.csv": rows_to_csv("curves", curve_rows),
        "scaling.csv": rows_to_csv("scaling", scaling_rows),
    }
    return files, values


def _run_windows(config: ExperimentConfig) -> tuple[dict[str, str], dict]:
    spec = _spec(config)
    profile = _profile(config)
    cache = ThresholdCache(spec, _task_seed(config, "thresholds"), config.samples)
    rows = []
    for ci, c in enumerate(config.c_constants):
        for ti, tau in enumerate(_tau_grid(config)):
            w = compute_window(
                spec, profile, float(tau), config.samples,
                _task_seed(config, "window", ci * config.tau_points + ti),
                constant=float(c), threshold_cache=cache,
            )
            rows.append(
                {
                    "kind": config.kind, "d": config.d, "gamma": config.gamma,
                    "regime": config.regime, "p": config.p, "eps_err": config.eps_err,
                    "c_constant": float(c), "tau": w.tau, "tau_tilde": w.tau_tilde,
                    "kappa_minus": w.kappa_minus, "kappa_plus": w.kappa_plus,
                    "width": w.width, "is_empty": w.empty, "i_hat": w.i_hat,
                    "i_std_err": w.i_std_err, "log_lambda": w.log_lambda,
                    "threshold_method": w.threshold_method, "h_value": w.h_value,
                    "e_med": w.e_med, "e_big": w.e_big, "delta": w.delta,
                }
            )
    return {"windows.csv": rows_to_csv("windows", rows)}, {}


def _run_audit(config: ExperimentConfig) -> tuple[dict[str, str], dict]:
    spec = _spec(config)
    profile = _profile(config)
    book = sample_codebook(spec, config.n, _task_seed(config, "book"))
    session = OracleSession(spec, book, profile, _task_seed(config, "session"))
    rows = []
    for ti, tau in enumerate(_tau_grid(config)):
        rec = accuracy_audit(
            book, profile, float(tau), config.samples, _task_seed(config, "audit", ti), session=session
        )
        locked = "" if rec.gate is None else ("true" if rec.gate.null_locked else "false")
        base = {"regime": config.regime, "tau": float(tau), "p": config.p,
                "eps_err": config.eps_err, "gate_locked": locked}
        if config.regime == "lp":
            rows.append(
                base | {
                    "observed": rec.moment_estimate, "bound": rec.moment_bound,
                    "std_err": rec.moment_std_err,
                    "holds": rec.moment_estimate <= rec.moment_bound + 3.0 * rec.moment_std_err,
                }
            )
        else:
            for z, surv, se, bound in rec.rows:
                rows.append(
                    base | {
                        "z": z, "observed": surv, "bound": bound, "std_err": se,
                        "holds": surv <= bound + 3.0 * se,
                    }
                )
    return {"audit.csv": rows_to_csv("audit", rows)}, {}


def _run_coupling(config: ExperimentConfig) -> tuple[dict[str, str], dict]:
    spec = _spec(config)
    profile = _profile(config)
    w = config.packing_w if config.packing_w is not None else 1.0 / (2.0 * config.d)
    packing = pack_rates(config.d, config.n_min, config.n_max, w)
    schedule = geometric_schedule(spec, config.q_budget, config.sigma_max, config.sigma_min)
    sampler = SamplerConfig(config.sampler, schedule, config.step_scale)
    cache = ThresholdCache(spec, _task_seed(config, "thresholds"), config.samples)
    rng = np.random.default_rng(_task_seed(config, "sizes"))
    rows = []
    diverged = 0
    for r in range(config.runs):
        n = int(packing.sizes[rng.integers(0, len(packing.sizes))])
        book = sample_codebook(spec, n, _task_seed(config, "book", r))
        run_seed = _task_seed(config, "run", r)
        rec = coupled_run(book, profile, sampler, run_seed, threshold_cache=cache)
        diverged += rec.diverged
        rows.append(
            {
                "seed": run_seed, "rate": rec.rate, "q": rec.steps, "t_or_inf": rec.t,
                "outputs_equal": rec.outputs_equal, "a_set_hit_null": rec.a_set_hit_null,
                "a_set_hit_planted": rec.a_set_hit_planted,
            }
        )
    values = {"diverged": diverged, "runs": config.runs, "q_delta_budget": config.q_budget * profile.delta}
    return {"coupling.csv": rows_to_csv("coupling", rows)}, values


def _run_separation(config: ExperimentConfig) -> tuple[dict[str, str], dict]:
    spec = _spec(config)
    profile = _profile(config)
    book = sample_codebook(spec, config.n, _task_seed(config, "book"))
    w = config.packing_w if config.packing_w is not None else 1.0 / (2.0 * config.d)
    packing = pack_rates(config.d, config.n_min, config.n_max, w)
    rec = separation_check(
        book, profile, config.samples, _task_seed(config, "separation"),
        packing=packing, books=config.books,
    )
    row = {
        "kind": config.kind, "d": config.d, "gamma": config.gamma, "n": config.n,
        "samples": rec.samples, "books": rec.books,
        "mass_coverage": rec.mass_coverage, "mass_std_err": rec.mass_std_err,
        "coverage_floor": rec.coverage_floor, "coverage_holds": rec.coverage_holds,
        "overlap": rec.overlap, "overlap_std_err": rec.overlap_std_err,
        "markov_bound": rec.markov_bound, "overlap_holds": rec.overlap_holds,
        "log_lambda": rec.log_lambda, "zeta": rec.zeta, "n_max": rec.n_max,
    }
    values = {"coverage_holds": rec.coverage_holds, "overlap_holds": rec.overlap_holds}
    return {"separation.csv": rows_to_csv("separation", [row])}, values


def _run_infochecks(config: ExperimentConfig) -> tuple[dict[str, str], dict]:
    spec = _spec(config)
    spec_hash = spec.content_hash()
    book = sample_codebook(spec, config.n, _task_seed(config, "book"))
    book_hash = book.content_hash()
    rows = []
    for i, tau in enumerate(_tau_grid(config)):
        tau = float(tau)
        info = estimate_I(spec, tau, config.samples, _task_seed(config, "info", i))
        rows.append(
            {"spec_hash": spec_hash, "tau": tau, "quantity": "info_rate",
             "value": info.value, "std_err": info.std_err, "samples": info.samples,
             "seed": _task_seed(config, "info", i)}
        )
        gap = estimate_fisher_gap(book, tau, config.samples, _task_seed(config, "fisher", i))
        rows.append(
            {"spec_hash": spec_hash, "codebook_hash": book_hash, "tau": tau,
             "quantity": "fisher_gap", "value": gap.value, "std_err": gap.std_err,
             "samples": gap.samples, "seed": _task_seed(config, "fisher", i)}
        )
        conc = concentration_audit(spec, tau, config.samples, _task_seed(config, "conc", i))
        rows.append(
            {"spec_hash": spec_hash, "tau": tau, "quantity": "psi1_norm",
             "value": conc.psi1_norm, "samples": config.samples,
             "seed": _task_seed(config, "conc", i)}
        )
        db = debruijn_check(book, tau, 0.1, config.samples, _task_seed(config, "db", i))
        rows.append(
            {"spec_hash": spec_hash, "codebook_hash": book_hash, "tau": tau,
             "quantity": "debruijn_rel_gap", "value": db.rel_gap,
             "samples": config.samples, "seed": _task_seed(config, "db", i)}
        )
    return {"infochecks.csv": rows_to_csv("infochecks", rows)}, {}


_RUNNERS = {
    "sweep": _run_sweep,
    "fig1": _run_fig1,
    "windows": _run_windows,
    "audit": _run_audit,
    "coupling": _run_coupling,
    "separation": _run_separation,
    "infochecks": _run_infochecks,
}


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def run_experiment(config: ExperimentConfig) -> dict:
    """Dispatch, persist artifacts atomically, and return the manifest."""
    out_dir = Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    files, values = _RUNNERS[config.experiment](config)

    config_text = json.dumps(json.loads(config.model_dump_json()), indent=2, sort_keys=True) + "\n"
    payloads: dict[str, bytes] = {name: text.encode("utf-8") for name, text in files.items()}
    payloads["config.json"] = config_text.encode("utf-8")
    manifest = {
        "experiment": config.experiment,
        "seed": config.seed,
        "output_dir": str(out_dir),
        "config_sha256": _sha256(payloads["config.json"]),
        "files": {name: _sha256(blob) for name, blob in sorted(payloads.items())},
        "values": values,
    }
    payloads["manifest.json"] = (json.dumps(manifest, indent=2, sort_keys=True) + "\n").encode("utf-8")

    # two-phase: stage everything, then rename into place; clean up on failure
    staged: list[tuple[Path, Path]] = []
    renamed: list[Path] = []
    try:
        for name, blob in payloads.items():
            tmp = out_dir / f".tmp-{name}"
            tmp.write_bytes(blob)
            staged.append((tmp, out_dir / name))
        for tmp, final in staged:
            os.replace(tmp, final)
            renamed.append(final)
    except BaseException:
        for tmp, _ in staged:
            tmp.unlink(missing_ok=True)
        for path in renamed:
            path.unlink(missing_ok=True)
        raise
    return manifest
