"""Mixture evaluation against independent oracles.

Oracles used here: closed forms for single centers and per-coordinate
hypercube blocks, brute-force mixtures over fully enumerated supports,
and central finite differences for gradients.
"""

import math

import numpy as np
import pytest

from scorelab.errors import ParameterError
from scorelab.mixtures import (
    ell_max,
    ell_max_batch,
    gaussian_log_norm,
    log_likelihood_ratio,
    log_likelihood_ratio_batch,
    mixture_eval,
    mixture_eval_batch,
    null_eval,
    null_eval_batch,
    planted_eval,
    planted_eval_batch,
    sample_block_ell,
    sample_null_pair_ell,
    score_difference_ratio,
)
from scorelab.support import Codebook, SupportSpec, build_support, enumerate_support, sample_codebook


def fd_gradient(f, x, step):
    """Central-difference gradient of scalar f at x."""
    g = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = step
        g[i] = (f(x + e) - f(x - e)) / (2 * step)
    return g


def test_single_center_closed_form():
    ev = mixture_eval(np.zeros((1, 2)), tau=1.0, x=np.array([2.0, 0.0]))
    assert ev.log_density == pytest.approx(-3.8378770664093453, abs=1e-12)  # -2 - ln(2*pi)
    np.testing.assert_allclose(ev.score, [-2.0, 0.0], atol=1e-12)
    np.testing.assert_allclose(ev.posterior_mean, [0.0, 0.0], atol=1e-12)


def test_symmetric_pair_score_vanishes_at_origin():
    spec = build_support("hypercube", d=2, R=1.0, gamma=0.1)
    book = Codebook(spec, np.array([[0, 0], [1, 1]]))  # (-1,-1) and (+1,+1)
    ev = planted_eval(book, tau=1.0, x=np.zeros(2))
    np.testing.assert_allclose(ev.score, 0.0, atol=1e-14)


def test_tweedie_identity_is_exact():
    spec = build_support("product-circle", d=6, R=1.0, gamma=0.3)
    book = sample_codebook(spec, n=5, seed=2)
    x = np.random.default_rng(0).normal(size=6)
    tau = 0.8
    for ev in (planted_eval(book, tau, x), null_eval(spec, tau, x)):
        assert np.array_equal(ev.score, (ev.posterior_mean - x) / (tau * tau))


def test_planted_gradient_matches_finite_differences():
    spec = build_support("product-circle", d=4, R=1.0, gamma=0.35)
    book = sample_codebook(spec, n=8, seed=5)
    rng = np.random.default_rng(42)
    for _ in range(10):
        x = rng.normal(scale=1.5, size=4)
        step = 1e-4 * max(1.0, np.max(np.abs(x)))
        grad = fd_gradient(lambda z: planted_eval(book, 0.7, z).log_density, x, step)
        score = planted_eval(book, 0.7, x).score
        assert np.linalg.norm(grad - score) / np.linalg.norm(score) < 1e-5


def test_null_gradient_matches_finite_differences():
    spec = build_support("hypercube", d=4, R=1.0, gamma=0.1)
    rng = np.random.default_rng(43)
    for _ in range(10):
        x = rng.normal(scale=1.2, size=4)
        step = 1e-4 * max(1.0, np.max(np.abs(x)))
        grad = fd_gradient(lambda z: null_eval(spec, 0.9, z).log_density, x, step)
        score = null_eval(spec, 0.9, x).score
        assert np.linalg.norm(grad - score) / np.linalg.norm(score) < 1e-5


@pytest.mark.parametrize(
    "spec",
    [
        build_support("hypercube", d=6, R=1.0, gamma=0.1),
        SupportSpec("product-circle", d=4, R=1.0, gamma=0.5, M=4),
    ],
)
def test_null_blockwise_equals_enumerated_mixture(spec):
    pts = enumerate_support(spec)
    rng = np.random.default_rng(7)
    for tau in (0.4, 1.0, 2.5):
        xs = rng.normal(scale=1.3, size=(6, spec.d))
        ld_b, sc_b, pm_b = null_eval_batch(spec, tau, xs)
        ld_e, sc_e, pm_e = mixture_eval_batch(pts, tau, xs)
        np.testing.assert_allclose(ld_b, ld_e, rtol=1e-10)
        np.testing.assert_allclose(sc_b, sc_e, rtol=1e-10, atol=1e-12)
        np.testing.assert_allclose(pm_b, pm_e, rtol=1e-10, atol=1e-12)


def test_hypercube_score_is_tanh():
    spec = build_support("hypercube", d=2, R=1.0, gamma=0.1)
    ev = null_eval(spec, tau=1.0, x=np.array([1.0, 0.3]))
    assert ev.score[0] == pytest.approx(-0.23840584404423515, abs=1e-12)  # tanh(1) - 1
    # general per-coordinate form (tanh(x/tau^2) - x)/tau^2
    tau = 0.6
    x = np.array([0.4, -1.7])
    ev = null_eval(spec, tau, x)
    np.testing.assert_allclose(ev.score, (np.tanh(x / tau**2) - x) / tau**2, rtol=1e-10)


def test_llr_closed_form_hypercube():
    spec = build_support("hypercube", d=2, R=1.0, gamma=0.1)
    val = log_likelihood_ratio(spec, np.array([1, 1]), tau=1.0, x=np.array([1.0, 1.0]))
    assert val == pytest.approx(1.1324383390339454, abs=1e-12)  # -2*ln((1+e^-2)/2)


def test_llr_degenerate_single_point_support():
    spec = SupportSpec("product-circle", d=4, R=1.0, gamma=0.5, M=1)
    rng = np.random.default_rng(1)
    xs = rng.normal(size=(20, 4))
    vals = log_likelihood_ratio_batch(spec, np.zeros((20, 2), dtype=int), 0.9, xs)
    np.testing.assert_allclose(vals, 0.0, atol=1e-12)


def test_llr_unit_mean_over_uniform_support():
    spec = SupportSpec("product-circle", d=4, R=1.0, gamma=0.5, M=4)
    all_idx = np.stack(np.meshgrid(np.arange(4), np.arange(4), indexing="ij"), -1).reshape(-1, 2)
    rng = np.random.default_rng(9)
    for tau in (0.5, 1.1):
        x = rng.normal(size=4)
        vals = log_likelihood_ratio_batch(spec, all_idx, tau, np.tile(x, (16, 1)))
        assert np.mean(np.exp(vals)) == pytest.approx(1.0, rel=1e-10)


def test_llr_sum_of_gaussian_minus_null():
    spec = build_support("product-circle", d=6, R=1.0, gamma=0.3)
    book = sample_codebook(spec, n=3, seed=8)
    x = np.random.default_rng(12).normal(size=6)
    tau = 0.8
    y = book.points()[1]
    direct = (
        -np.sum((x - y) ** 2) / (2 * tau**2)
        + gaussian_log_norm(tau, 6)
        - null_eval(spec, tau, x).log_density
    )
    assert log_likelihood_ratio(spec, book.indices[1], tau, x) == pytest.approx(direct, rel=1e-10)


def test_ell_max_matches_rowwise_scan():
    spec = build_support("product-circle", d=4, R=1.0, gamma=0.4)
    book = sample_codebook(spec, n=12, seed=3)
    rng = np.random.default_rng(4)
    for _ in range(20):
        x = rng.normal(scale=1.2, size=4)
        tau = float(rng.uniform(0.3, 2.0))
        rows = np.array(
            [log_likelihood_ratio(spec, book.indices[i], tau, x) for i in range(book.n)]
        )
        val, arg = ell_max(book, tau, x)
        assert val == pytest.approx(rows.max(), rel=1e-12)
        assert rows[arg] == pytest.approx(rows.max(), rel=1e-12)


def test_ell_max_unchanged_by_duplicates():
    spec = build_support("hypercube", d=4, R=1.0, gamma=0.1)
    book = sample_codebook(spec, n=6, seed=10)
    doubled = Codebook(spec, np.vstack([book.indices, book.indices]))
    x = np.array([0.2, -1.0, 0.5, 1.4])
    assert ell_max(book, 0.7, x)[0] == ell_max(doubled, 0.7, x)[0]


def test_score_difference_ratio_zero_for_full_enumeration():
    spec = SupportSpec("product-circle", d=4, R=1.0, gamma=0.5, M=4)
    all_idx = np.stack(np.meshgrid(np.arange(4), np.arange(4), indexing="ij"), -1).reshape(-1, 2)
    book = Codebook(spec, all_idx)
    probes = np.random.default_rng(6).normal(size=(50, 4))
    assert score_difference_ratio(book, 0.8, probes) < 1e-10


def test_score_difference_ratio_bounded_and_tight():
    rng = np.random.default_rng(14)
    for _ in range(30):
        spec = build_support("product-circle", d=6, R=1.0, gamma=0.3)
        book = sample_codebook(spec, n=int(rng.integers(1, 9)), seed=int(rng.integers(1 << 30)))
        probes = rng.normal(scale=2.0, size=(40, 6))
        assert score_difference_ratio(book, float(rng.uniform(0.2, 2.0)), probes) <= 1.0 + 1e-12
    # near-saturation: one far corner vs a probe at the opposite corner, small tau
    spec = build_support("hypercube", d=4, R=1.0, gamma=0.1)
    book = Codebook(spec, np.ones((1, 4), dtype=int))  # all +1
    probe = -3.0 * np.ones((1, 4))
    assert score_difference_ratio(book, 0.25, probe) > 0.9


def test_posterior_mean_stays_in_hull():
    rng = np.random.default_rng(21)
    spec = build_support("product-circle", d=8, R=1.3, gamma=0.4)
    book = sample_codebook(spec, n=7, seed=0)
    bound = spec.R * math.sqrt(spec.d) + 1e-9
    for _ in range(100):
        x = rng.normal(scale=3.0, size=8)
        tau = float(rng.uniform(0.1, 3.0))
        assert np.linalg.norm(planted_eval(book, tau, x).posterior_mean) <= bound
        assert np.linalg.norm(null_eval(spec, tau, x).posterior_mean) <= bound


def test_score_lipschitz_probe():
    rng = np.random.default_rng(22)
    spec = build_support("product-circle", d=6, R=1.0, gamma=0.25)
    book = sample_codebook(spec, n=4, seed=1)
    for _ in range(100):
        tau = float(rng.uniform(0.3, 1.5))
        lip = 1 / tau**2 + spec.R**2 * spec.d / tau**4
        x = rng.normal(scale=1.5, size=6)
        y = x + rng.normal(scale=0.05, size=6)
        for ev in (planted_eval_batch(book, tau, np.stack([x, y]))[1],
                   null_eval_batch(spec, tau, np.stack([x, y]))[1]):
            assert np.linalg.norm(ev[0] - ev[1]) <= lip * np.linalg.norm(x - y) * (1 + 1e-9)


def test_batch_matches_single():
    # BLAS kernels may round differently per batch shape, so compare tightly
    # rather than bitwise; bitwise determinism for identical calls is below.
    spec = build_support("product-circle", d=4, R=1.0, gamma=0.4)
    book = sample_codebook(spec, n=5, seed=17)
    xs = np.random.default_rng(18).normal(size=(7, 4))
    ld, sc, pm = planted_eval_batch(book, 0.9, xs)
    for i in range(7):
        ev = planted_eval(book, 0.9, xs[i])
        assert ld[i] == pytest.approx(ev.log_density, rel=1e-13)
        np.testing.assert_allclose(sc[i], ev.score, rtol=1e-12, atol=1e-13)
    vals, args = ell_max_batch(book, 0.9, xs)
    for i in range(7):
        v, a = ell_max(book, 0.9, xs[i])
        assert vals[i] == pytest.approx(v, rel=1e-12) and args[i] == a


def test_identical_calls_are_bitwise_identical():
    spec = build_support("product-circle", d=4, R=1.0, gamma=0.4)
    book = sample_codebook(spec, n=5, seed=17)
    x = np.random.default_rng(19).normal(size=4)
    a = planted_eval(book, 0.9, x)
    b = planted_eval(book, 0.9, x)
    assert a.log_density == b.log_density and np.array_equal(a.score, b.score)
    c = null_eval(spec, 0.9, x)
    d = null_eval(spec, 0.9, x)
    assert c.log_density == d.log_density and np.array_equal(c.score, d.score)


def test_invalid_inputs_rejected():
    spec = build_support("hypercube", d=4, R=1.0, gamma=0.1)
    with pytest.raises(ParameterError):
        null_eval(spec, 0.0, np.zeros(4))
    with pytest.raises(ParameterError):
        null_eval(spec, -1.0, np.zeros(4))
    with pytest.raises(ParameterError):
        null_eval(spec, 1.0, np.zeros(3))
    with pytest.raises(ParameterError):
        null_eval(spec, 1.0, np.array([np.nan, 0, 0, 0]))


def test_unit_exponential_means():
    # Two change-of-measure identities: for fixed x and independent Y ~ U,
    # E[exp(ell(Y, x))] = 1; under the correlated pair law (Y, Y+Z),
    # E[exp(-ell)] = 1.  Moderate tau keeps both light-tailed enough for CLT.
    spec = build_support("product-circle", d=4, R=1.0, gamma=0.4)
    rng = np.random.default_rng(33)
    x = np.array([0.9, 0.1, -0.2, 0.8])
    idx = rng.integers(0, spec.M, size=(200_000, 2))
    w = np.exp(log_likelihood_ratio_batch(spec, idx, 1.5, np.tile(x, (idx.shape[0], 1))))
    assert abs(w.mean() - 1.0) < 4 * w.std() / math.sqrt(w.size)
    v = np.exp(-sample_null_pair_ell(spec, 1.5, 200_000, rng))
    assert abs(v.mean() - 1.0) < 4 * v.std() / math.sqrt(v.size)


def test_block_ell_sampler_matches_quadrature_mean():
    # Oracle: E[block ell] for the hypercube is a 1-D Gaussian integral of
    # ln2 - ln(1 + exp(-2x/tau^2)) with x ~ N(1, tau^2); Gauss-Hermite nodes.
    spec = build_support("hypercube", d=4, R=1.0, gamma=0.1)
    tau = 0.9
    nodes, weights = np.polynomial.hermite_e.hermegauss(201)
    x = 1.0 + tau * nodes
    exact = np.sum(weights * (math.log(2) - np.log1p(np.exp(-2 * x / tau**2)))) / math.sqrt(
        2 * math.pi
    )
    rng = np.random.default_rng(34)
    draws = sample_block_ell(spec, tau, 400_000, rng)
    assert abs(draws.mean() - exact) < 4 * draws.std() / math.sqrt(draws.size)


def test_null_pair_ell_deterministic_and_coupled_across_tau():
    spec = build_support("hypercube", d=4, R=1.0, gamma=0.1)
    a = sample_null_pair_ell(spec, 0.8, 1000, np.random.default_rng(5))
    b = sample_null_pair_ell(spec, 0.8, 1000, np.random.default_rng(5))
    np.testing.assert_array_equal(a, b)
    # same generator state => same underlying uniforms/normals at another tau
    c = sample_null_pair_ell(spec, 1.2, 1000, np.random.default_rng(5))
    assert not np.array_equal(a, c)
    assert np.corrcoef(a, c)[0, 1] > 0.5
