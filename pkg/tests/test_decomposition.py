import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from boltzfast.decomposition import (beta_matrix, beta_oracle_2d, decompose, load_decomposition, reconstruct_beta,
                                     refine, save_decomposition)
from boltzfast.errors import DumpFormatError, IndexOutOfRange, QuadratureNoConvergence, SymmetricFlagInvalid
from boltzfast.grid import S_MAX, make_config
from boltzfast.kernels import hardsphere3d, maxwell2d, phi3_closed, vhs

# C = 1/2 in 2D gives a = b = 1, i.e. Btilde == 1
UNIT_2D = maxwell2d(C=0.5)


@pytest.fixture(scope="module")
def cfg8():
    return make_config(2, 8, S_MAX)


@pytest.fixture(scope="module")
def dec8(cfg8):
    return decompose(cfg8, UNIT_2D, 64)


def _random_pairs(rng, N, d, count):
    return [(tuple(rng.integers(-N, N + 1, d)), tuple(rng.integers(-N, N + 1, d))) for _ in range(count)]


def test_beta_at_origin(cfg8):
    expected = math.pi * (2 * cfg8.R) ** 2
    for M in (1, 3, 8):
        dec = decompose(cfg8, UNIT_2D, M)
        assert reconstruct_beta(dec, (0, 0), (0, 0)) == pytest.approx(expected, rel=1e-15)
    assert beta_oracle_2d(cfg8, UNIT_2D, (0, 0), (0, 0)) == pytest.approx(expected, rel=1e-14)


def test_term_count_and_weights(cfg8):
    dec = decompose(cfg8, UNIT_2D, 12)
    assert dec.P == 12 and np.all(dec.weights == math.pi / 12)
    dec3 = decompose(make_config(3, 2, 1.0), hardsphere3d(), 5)
    assert dec3.P == 25 and np.allclose(dec3.weights, math.pi**2 / 25)


def test_matches_adaptive_oracle(cfg8, dec8, rng):
    pairs = _random_pairs(rng, 8, 2, 150) + [((8, 8), (-8, 8)), ((1, 0), (0, 1)), ((8, -3), (2, 7))]
    err = max(abs(reconstruct_beta(dec8, l, m) - beta_oracle_2d(cfg8, UNIT_2D, l, m)) for l, m in pairs)
    assert err < 1e-10


def test_unit_pair_against_fine_rectangular_rule(cfg8):
    fine = decompose(cfg8, UNIT_2D, 256)
    oracle = beta_oracle_2d(cfg8, UNIT_2D, (1, 0), (0, 1))
    assert abs(reconstruct_beta(fine, (1, 0), (0, 1)) - oracle) < 1e-10


def test_rectangular_rule_converges_spectrally(cfg8, rng):
    pairs = _random_pairs(rng, 8, 2, 120) + [((8, 8), (8, -8)), ((8, 0), (0, 8))]
    dec16, dec32 = decompose(cfg8, UNIT_2D, 16), decompose(cfg8, UNIT_2D, 32)
    ref = [beta_oracle_2d(cfg8, UNIT_2D, l, m) for l, m in pairs]
    e16 = max(abs(reconstruct_beta(dec16, l, m) - r) for (l, m), r in zip(pairs, ref))
    e32 = max(abs(reconstruct_beta(dec32, l, m) - r) for (l, m), r in zip(pairs, ref))
    assert e32 / e16 < 1e-2


def test_vhs_factors_against_oracle(cfg8, rng):
    kernel = vhs(0.5, 2)
    dec = decompose(cfg8, kernel, 64)
    pairs = _random_pairs(rng, 8, 2, 40)
    err = max(abs(reconstruct_beta(dec, l, m) - beta_oracle_2d(cfg8, kernel, l, m)) for l, m in pairs)
    assert err < 1e-10


def test_diagonal_is_beta_on_the_diagonal(dec8):
    N = 8
    for m in [(0, 0), (3, -2), (8, 8), (-5, 1)]:
        assert reconstruct_beta(dec8, m, m) == dec8.diag[m[0] + N, m[1] + N]


def test_diagonal_is_even_and_real(cfg8):
    for kernel in (UNIT_2D, vhs(0.5, 2)):
        dec = decompose(cfg8, kernel, 9)
        assert dec.diag.dtype == np.float64
        assert np.array_equal(dec.diag, np.flip(dec.diag))
    dec3 = decompose(make_config(3, 3, 1.0), hardsphere3d(), 4)
    assert np.array_equal(dec3.diag, np.flip(dec3.diag))


def test_alpha_arrays_are_even(cfg8):
    dec = decompose(cfg8, vhs(0.5, 2), 7)
    assert np.array_equal(dec.alpha, np.flip(dec.alpha, axis=(1, 2)))
    assert np.array_equal(dec.alpha_prime, np.flip(dec.alpha_prime, axis=(1, 2)))


def test_direction_set_is_even(cfg8):
    # e and -e give identical terms, so the half-circle rule already covers the full circle
    dec = decompose(cfg8, UNIT_2D, 8)
    assert np.allclose(dec.directions[0], [1.0, 0.0])
    assert np.allclose(dec.directions[4], [0.0, 1.0])


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=30)
def test_kernel_mode_vanishes_on_antipodal_pairs(seed):
    dec = _dec6()
    gen = np.random.default_rng(seed)
    l = tuple(int(c) for c in gen.integers(-6, 7, 2))
    minus = tuple(-c for c in l)
    assert reconstruct_beta(dec, l, minus) - reconstruct_beta(dec, minus, minus) == 0.0


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=30)
def test_sign_flip_symmetry(seed):
    dec = _dec6()
    gen = np.random.default_rng(seed)
    l, m = (tuple(int(c) for c in gen.integers(-6, 7, 2)) for _ in range(2))
    assert reconstruct_beta(dec, l, m) == reconstruct_beta(dec, tuple(-c for c in l), tuple(-c for c in m))


_DEC6 = {}


def _dec6():
    if not _DEC6:
        _DEC6["dec"] = decompose(make_config(2, 6, S_MAX), vhs(0.5, 2), 16)
    return _DEC6["dec"]


def test_oracle_symmetric_when_factors_agree(cfg8):
    for l, m in [((1, 0), (0, 1)), ((3, -2), (5, 7)), ((8, 1), (-2, 4))]:
        a = beta_oracle_2d(cfg8, UNIT_2D, l, m)
        b = beta_oracle_2d(cfg8, UNIT_2D, m, l)
        assert abs(a - b) < 1e-11


def test_oracle_gives_up_when_tolerance_is_out_of_reach(cfg8):
    with pytest.raises(QuadratureNoConvergence):
        beta_oracle_2d(cfg8, UNIT_2D, (8, 7), (7, -8), tol=1e-30)


def test_beta_matrix_matches_pointwise(cfg8):
    cfg = make_config(2, 3, S_MAX)
    dec = decompose(cfg, UNIT_2D, 6)
    B = beta_matrix(dec)
    n = cfg.n
    for l, m in [((0, 0), (1, 2)), ((-3, 3), (2, -1))]:
        il, im = (l[0] + 3) * n + l[1] + 3, (m[0] + 3) * n + m[1] + 3
        assert B[il, im] == reconstruct_beta(dec, l, m)


def test_out_of_range_mode(dec8):
    with pytest.raises(IndexOutOfRange):
        reconstruct_beta(dec8, (9, 0), (0, 0))
    with pytest.raises(IndexOutOfRange):
        reconstruct_beta(dec8, (0, 0, 0), (0, 0))


# -- symmetric half interval ------------------------------------------------------

def test_half_interval_needs_equal_factors(cfg8):
    with pytest.raises(SymmetricFlagInvalid):
        decompose(cfg8, vhs(0.5, 2), 8, symmetric_half=True)


def test_half_interval_preserves_the_symmetrised_beta(cfg8, rng):
    # M half-interval directions sit on the nodes of the 2M full-interval rule
    full = decompose(cfg8, maxwell2d(), 32)
    half = decompose(cfg8, maxwell2d(), 16, symmetric_half=True)
    assert half.kernel.a_equals_b
    scale = math.pi * (2 * cfg8.R) ** 2
    for l, m in _random_pairs(rng, 8, 2, 30):
        sym_full = reconstruct_beta(full, l, m) + reconstruct_beta(full, m, l)
        sym_half = reconstruct_beta(half, l, m) + reconstruct_beta(half, m, l)
        assert abs(sym_full - sym_half) < 1e-13 * scale


# -- refinement -------------------------------------------------------------------

def test_refinement_reuses_and_matches_fresh_build(cfg8):
    coarse = decompose(cfg8, vhs(0.5, 2), 8)
    fine = refine(coarse)
    fresh = decompose(cfg8, vhs(0.5, 2), 16)
    assert fine.M == 16
    assert np.array_equal(fine.alpha[::2], coarse.alpha)
    assert np.array_equal(fine.alpha, fresh.alpha)
    assert np.array_equal(fine.alpha_prime, fresh.alpha_prime)
    assert np.array_equal(fine.directions, fresh.directions)


def test_refinement_in_three_dimensions():
    cfg = make_config(3, 2, 1.0)
    coarse = decompose(cfg, hardsphere3d(), 3, jacobian=True)
    fine, fresh = refine(coarse), decompose(cfg, hardsphere3d(), 6, jacobian=True)
    assert np.array_equal(fine.alpha, fresh.alpha)
    assert np.array_equal(fine.weights, fresh.weights)
    assert np.array_equal(fine.diag, fresh.diag)


# -- three dimensions -------------------------------------------------------------

def test_3d_terms_at_zero_and_along_the_direction():
    cfg = make_config(3, 3, 1.0)
    dec = decompose(cfg, hardsphere3d(C=0.25), 4)
    R = cfg.R
    assert np.all(dec.alpha[:, 3, 3, 3] == phi3_closed(R, 0.0))
    # the pole direction (theta = 0) is the k_3 axis
    assert np.allclose(dec.directions[0], [0.0, 0.0, 1.0])
    assert dec.alpha_prime[0, 3, 3, 5] == pytest.approx(math.pi * phi3_closed(R, 0.0), rel=1e-14)


def test_3d_rule_is_converged_at_m32(rng):
    cfg = make_config(3, 4, S_MAX)
    d32, d64 = decompose(cfg, hardsphere3d(), 32), decompose(cfg, hardsphere3d(), 64)
    pairs = _random_pairs(rng, 4, 3, 200) + [((4, 4, 4), (-4, 4, 4)), ((0, 0, 4), (4, 0, 0))]
    err = max(abs(reconstruct_beta(d32, l, m) - reconstruct_beta(d64, l, m)) for l, m in pairs)
    assert err < 1e-8


# -- dumps ------------------------------------------------------------------------

def test_dump_round_trip(tmp_path):
    cfg = make_config(3, 2, 1.1)
    dec = decompose(cfg, vhs(0.5, 3), 3, jacobian=True)
    path = tmp_path / "dec.csbd"
    save_decomposition(path, dec)
    back = load_decomposition(path)
    assert back.config == cfg and back.M == 3 and back.jacobian and not back.symmetric_half
    for name in ("weights", "directions", "alpha", "alpha_prime", "diag"):
        assert np.array_equal(getattr(back, name), getattr(dec, name))


def test_corrupted_dump_fails_the_checksum(tmp_path):
    path = tmp_path / "dec.csbd"
    save_decomposition(path, decompose(make_config(2, 3, 1.0), maxwell2d(), 4))
    raw = bytearray(path.read_bytes())
    raw[200] ^= 0x01
    path.write_bytes(bytes(raw))
    with pytest.raises(DumpFormatError, match="checksum"):
        load_decomposition(path)
    path.write_bytes(b"CSBF1" + bytes(100))
    with pytest.raises(DumpFormatError):
        load_decomposition(path)
