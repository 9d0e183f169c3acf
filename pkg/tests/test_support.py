"""Supports, codebooks, packings: geometry and serialization contracts."""

import json
import math

import numpy as np
import pytest

from scorelab.errors import ParameterError
from scorelab.support import (
    Codebook,
    SupportSpec,
    atoms,
    build_support,
    codebook_from_json,
    codebook_to_json,
    decode,
    enumerate_support,
    pack_rates,
    sample_codebook,
)


def test_product_circle_block_count_and_m():
    spec = build_support("product-circle", d=4, R=1.0, gamma=0.4)
    assert spec.M == math.ceil(math.pi * 1.0 / 0.4) == 8
    assert spec.block_count == 2
    assert spec.block_dim == 2


def test_hypercube_blocks_are_signs():
    spec = build_support("hypercube", d=6, R=1.0, gamma=0.1)
    assert spec.block_count == 6
    assert sorted(atoms(spec).ravel().tolist()) == [-1.0, 1.0]


def test_odd_dimension_rejected():
    with pytest.raises(ParameterError, match="even dimension required"):
        build_support("hypercube", d=5, R=1.0, gamma=0.1)
    with pytest.raises(ParameterError, match="even dimension required"):
        build_support("product-circle", d=7, R=1.0, gamma=0.1)


def test_domain_errors():
    with pytest.raises(ParameterError):
        build_support("simplex", d=4, R=1.0, gamma=0.1)
    with pytest.raises(ParameterError):
        build_support("product-circle", d=4, R=1.0, gamma=0.6)  # gamma > R/2
    with pytest.raises(ParameterError):
        build_support("product-circle", d=4, R=1.0, gamma=0.0)
    with pytest.raises(ParameterError):
        build_support("hypercube", d=4, R=2.0, gamma=0.1)  # R fixed at 1


def test_atoms_lie_on_circle():
    spec = build_support("product-circle", d=8, R=2.0, gamma=0.5)
    a = atoms(spec)
    assert a.shape == (spec.M, 2)
    np.testing.assert_allclose(np.linalg.norm(a, axis=1), 2.0, rtol=1e-12)
    # equally spaced: consecutive gaps all match the chord length
    gaps = np.linalg.norm(a - np.roll(a, -1, axis=0), axis=1)
    np.testing.assert_allclose(gaps, gaps[0], rtol=1e-9)


def test_sample_codebook_deterministic_and_in_range():
    spec = build_support("product-circle", d=6, R=1.0, gamma=0.3)
    a = sample_codebook(spec, n=17, seed=99)
    b = sample_codebook(spec, n=17, seed=99)
    assert np.array_equal(a.indices, b.indices)
    assert a.indices.shape == (17, 3)
    assert a.indices.min() >= 0 and a.indices.max() < spec.M
    c = sample_codebook(spec, n=17, seed=100)
    assert not np.array_equal(a.indices, c.indices)


def test_codebook_rate():
    spec = build_support("hypercube", d=8, R=1.0, gamma=0.1)
    book = sample_codebook(spec, n=4, seed=0)
    assert book.rate == pytest.approx(math.log(4) / 8)


def test_codebook_sampling_is_uniform():
    spec = build_support("hypercube", d=2, R=1.0, gamma=0.1)
    book = sample_codebook(spec, n=100_000, seed=7)
    combos = book.indices[:, 0] * 2 + book.indices[:, 1]
    freqs = np.bincount(combos, minlength=4) / book.n
    assert np.all(np.abs(freqs - 0.25) < 0.01)


def test_decode_coordinates_bounded():
    rng = np.random.default_rng(3)
    for _ in range(200):
        kind = rng.choice(["hypercube", "product-circle"])
        d = 2 * int(rng.integers(1, 6))
        R = 1.0 if kind == "hypercube" else float(rng.uniform(0.5, 3.0))
        gamma = float(rng.uniform(0.05, R / 2))
        spec = build_support(kind, d=d, R=R, gamma=gamma)
        if kind == "product-circle":
            assert spec.M >= 7  # gamma <= R/2 forces at least ceil(2*pi) atoms
        book = sample_codebook(spec, n=int(rng.integers(1, 30)), seed=int(rng.integers(1 << 30)))
        pts = book.points()
        assert pts.shape == (book.n, d)
        assert np.max(np.abs(pts)) <= R + 1e-12
        if kind == "product-circle":
            blocks = pts.reshape(book.n, -1, 2)
            np.testing.assert_allclose(np.linalg.norm(blocks, axis=2), R, rtol=1e-12)


def test_codebook_duplicates_retained():
    spec = build_support("hypercube", d=2, R=1.0, gamma=0.1)
    idx = np.array([[0, 1], [0, 1], [1, 0]])
    book = Codebook(spec, idx)
    assert book.n == 3


def test_codebook_index_validation():
    spec = build_support("hypercube", d=4, R=1.0, gamma=0.1)
    with pytest.raises(ParameterError):
        Codebook(spec, np.array([[0, 1, 2, 0]]))  # 2 out of range for M=2
    with pytest.raises(ParameterError):
        Codebook(spec, np.empty((0, 4), dtype=np.int64))  # n >= 1


def test_codebook_json_round_trip():
    spec = build_support("product-circle", d=6, R=1.5, gamma=0.25)
    book = sample_codebook(spec, n=9, seed=1234)
    text = codebook_to_json(book)
    payload = json.loads(text)
    assert set(payload) == {"kind", "d", "R", "gamma", "M", "n", "seed", "indices"}
    back = codebook_from_json(text)
    assert back.spec == book.spec
    assert back.seed == book.seed
    assert np.array_equal(back.indices, book.indices)


def test_pack_rates_doubling_ladder():
    # exp(2 * 10 * ln2/20) = 2, so sizes double from 1 to 16
    w = math.log(2) / 20
    pack = pack_rates(d=10, n_min=1, n_max=16, w=w)
    assert pack.sizes == (1, 2, 4, 8, 16)
    np.testing.assert_allclose(pack.rates, [math.log(n) / 10 for n in (1, 2, 4, 8, 16)])
    assert len(pack.sizes) >= pack.guaranteed_ladder_length == pytest.approx(1.5)


def test_pack_rates_huge_growth_single_point():
    pack = pack_rates(d=4, n_min=8, n_max=10, w=1.0)
    assert pack.sizes == (8,)


def test_pack_rates_properties_fuzz():
    rng = np.random.default_rng(11)
    for _ in range(300):
        d = 2 * int(rng.integers(1, 40))
        n_min = int(rng.integers(1, 50))
        n_max = n_min + int(rng.integers(0, 10_000))
        w = float(rng.uniform(0.001, 0.5))
        pack = pack_rates(d, n_min, n_max, w)
        sizes = np.array(pack.sizes)
        assert sizes[0] == n_min and sizes[-1] <= n_max
        rates = np.array(pack.rates)
        assert np.all(np.diff(rates) > w)  # pairwise separation strictly above w
        if pack.guaranteed_ladder_length > 0:
            assert len(sizes) >= pack.guaranteed_ladder_length


def test_enumerate_support_counts():
    spec = SupportSpec("product-circle", d=4, R=1.0, gamma=0.5, M=4)
    pts = enumerate_support(spec)
    assert pts.shape == (16, 4)
    assert len({tuple(np.round(p, 9)) for p in pts}) == 16
    with pytest.raises(ParameterError):
        enumerate_support(build_support("hypercube", d=50, R=1.0, gamma=0.1))


def test_decode_matches_atom_table():
    spec = build_support("product-circle", d=4, R=1.0, gamma=0.4)
    pt = decode(spec, np.array([1, 3]))
    expected = np.concatenate([atoms(spec)[1], atoms(spec)[3]])
    np.testing.assert_array_equal(pt, expected)
