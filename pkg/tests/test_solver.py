import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from boltzfast.decomposition import decompose
from boltzfast.errors import BlowUp, NonPositiveTemperature
from boltzfast.grid import S_MAX, FourierField, make_config, to_fourier, velocity_grid
from boltzfast.kernels import hardsphere3d, maxwell2d
from boltzfast.reference import bkw_box, bkw_config, bkw_field
from boltzfast.solver import (IntegratorConfig, MomentSet, entropy, integrate, maxwellian_values, moment_weights,
                              moments, moments_to_maxwellian, step, suggest_dt)

from .helpers import hermitian_coeffs

# -- moments ----------------------------------------------------------------------


def test_weights_are_the_exact_integrals():
    from scipy import integrate as sint
    w0, w1, w2 = moment_weights(3)
    for i, k in enumerate(range(-3, 4)):
        re1 = sint.quad(lambda v: v * math.cos(k * v), -math.pi, math.pi)[0]
        im1 = sint.quad(lambda v: v * math.sin(k * v), -math.pi, math.pi)[0]
        re2 = sint.quad(lambda v: v * v * math.cos(k * v), -math.pi, math.pi)[0]
        assert abs(w1[i] - (re1 + 1j * im1)) < 1e-12
        assert abs(w2[i] - re2) < 1e-12
        assert w0[i] == (2 * math.pi if k == 0 else 0)


@pytest.mark.parametrize("d", [2, 3])
def test_moments_of_the_constant_mode(d):
    cfg = make_config(d, 4, 1.0)
    c = np.zeros(cfg.shape, dtype=complex)
    c[(4,) * d] = 0.3
    ms = moments(FourierField(c, cfg))
    assert ms.mass == pytest.approx((2 * math.pi) ** d * 0.3, rel=1e-15)
    assert ms.momentum == (0.0,) * d
    assert ms.energy == pytest.approx(0.3 * d * (2 * math.pi) ** (d - 1) * 2 * math.pi**3 / 3, rel=1e-14)


def test_small_gaussian_moments():
    cfg = make_config(2, 32, 1.0)
    sigma = 0.4
    ms = moments(to_fourier(maxwellian_values(1.0, 0.0, sigma**2, cfg), cfg))
    assert abs(ms.mass - 1.0) < 1e-8
    assert max(abs(p) for p in ms.momentum) < 1e-8
    assert abs(ms.energy - 2 * sigma**2) < 1e-8


def test_shifted_gaussian_momentum():
    cfg = make_config(2, 32, 1.0)
    ms = moments(to_fourier(maxwellian_values(1.0, (0.3, -0.2), 0.1, cfg), cfg))
    assert ms.momentum[0] == pytest.approx(0.3, abs=1e-8)
    assert ms.momentum[1] == pytest.approx(-0.2, abs=1e-8)
    assert ms.temperature == pytest.approx(0.1, abs=1e-8)


def test_unit_maxwellian_round_trip():
    # ``scale = 4`` keeps the unit Maxwellian resolved at N = 32 (see the decision notes)
    cfg = make_config(2, 32, S_MAX, scale=4.0)
    f = moments_to_maxwellian(MomentSet(1.0, (0.0, 0.0), 2.0, 0.0), cfg)
    ms = moments(f)
    assert abs(ms.mass - 1.0) < 1e-8
    assert max(abs(p) for p in ms.momentum) < 1e-8
    assert abs(ms.energy - 2.0) < 1e-8
    # log(2 pi e) is the entropy of the 2D unit Maxwellian
    assert ms.entropy == pytest.approx(1.0 + math.log(2 * math.pi), abs=1e-8)


def test_maxwellian_is_even_and_linear_in_density():
    cfg = make_config(2, 16, S_MAX, scale=4.0)
    f1 = moments_to_maxwellian(MomentSet(1.0, (0.0, 0.0), 2.0, 0.0), cfg)
    f2 = moments_to_maxwellian(MomentSet(2.0, (0.0, 0.0), 4.0, 0.0), cfg)
    assert np.max(np.abs(f1.coeffs - np.flip(f1.coeffs))) < 1e-17
    assert np.max(np.abs(f2.coeffs - 2 * f1.coeffs)) <= 1e-15 * np.max(np.abs(f1.coeffs))


@given(st.integers(0, 2**32 - 1), st.sampled_from([2, 3]))
def test_even_fields_carry_no_momentum(seed, d):
    N = 6 if d == 2 else 3
    c = np.random.default_rng(seed).standard_normal((2 * N + 1,) * d)
    c = 0.5 * (c + np.flip(c))
    ms = moments(FourierField(c.astype(complex), make_config(d, N, 1.0)))
    assert ms.momentum == (0.0,) * d


@given(st.integers(0, 2**32 - 1))
def test_moments_are_linear(seed):
    cfg = make_config(2, 5, 1.0)
    gen = np.random.default_rng(seed)
    a = FourierField(hermitian_coeffs(gen, 5, 2), cfg)
    b = FourierField(hermitian_coeffs(gen, 5, 2), cfg)
    ma, mb, mab = moments(a), moments(b), moments(a + b)
    assert mab.mass == pytest.approx(ma.mass + mb.mass, abs=1e-12)
    assert mab.energy == pytest.approx(ma.energy + mb.energy, abs=1e-11)
    for j in range(2):
        assert mab.momentum[j] == pytest.approx(ma.momentum[j] + mb.momentum[j], abs=1e-11)


def test_entropy_clips_negative_values():
    cfg = make_config(2, 2, 1.0)
    vals = np.full(cfg.shape, -1.0)
    eps = 1e-14
    assert entropy(vals, cfg) == pytest.approx(-cfg.cell_volume * vals.size * eps * math.log(eps), rel=1e-12)


@pytest.mark.parametrize("T", [0.0, -1.0])
def test_non_positive_temperature(T):
    cfg = make_config(2, 4, 1.0)
    with pytest.raises(NonPositiveTemperature):
        maxwellian_values(1.0, 0.0, T, cfg)


# -- stepping ---------------------------------------------------------------------

@pytest.fixture(scope="module")
def bkw16():
    cfg = bkw_config(16)
    return cfg, decompose(cfg, maxwell2d(), 8)


@pytest.mark.parametrize("scheme", ["rk2", "rk4"])
def test_constant_and_zero_fields_are_fixed_points(bkw16, scheme):
    cfg, dec = bkw16
    c = np.zeros(cfg.shape, dtype=complex)
    c[16, 16] = 0.01
    f = FourierField(c, cfg)
    out = step(f, dec, 0.1, scheme)
    assert np.max(np.abs(out.coeffs - c)) < 1e-17
    zero = FourierField.zeros(cfg)
    assert np.all(step(zero, dec, 0.1, scheme).coeffs == 0)


def test_step_keeps_hermitian_symmetry(bkw16):
    cfg, dec = bkw16
    out = step(bkw_field(0.0, cfg), dec, 0.05)
    assert out.hermitian_defect() == 0.0


def test_rk4_is_fourth_order():
    cfg = bkw_config(32)
    dec = decompose(cfg, maxwell2d(), 8)
    f0 = bkw_field(0.0, cfg)

    def run(dt):
        return integrate(f0, dec, IntegratorConfig("rk4", dt, 2.0)).coeffs

    sols = [run(dt) for dt in (0.2, 0.1, 0.05)]
    e1 = np.max(np.abs(sols[0] - sols[1]))
    e2 = np.max(np.abs(sols[1] - sols[2]))
    assert 16 * 0.8 <= e1 / e2 <= 16 * 1.2


def test_rk2_is_second_order():
    cfg = bkw_config(16)
    dec = decompose(cfg, maxwell2d(), 8)
    f0 = bkw_field(0.0, cfg)
    sols = [integrate(f0, dec, IntegratorConfig("rk2", dt, 2.0)).coeffs for dt in (0.2, 0.1, 0.05)]
    ratio = np.max(np.abs(sols[0] - sols[1])) / np.max(np.abs(sols[1] - sols[2]))
    assert 4 * 0.8 <= ratio <= 4 * 1.2


def test_blow_up_is_detected(bkw16):
    cfg, dec = bkw16
    with pytest.raises(BlowUp):
        step(bkw_field(0.0, cfg), dec, 100.0)


def test_blow_up_measured_against_the_initial_norm(bkw16):
    cfg, dec = bkw16
    f = bkw_field(0.0, cfg)
    with pytest.raises(BlowUp):
        step(f, dec, 1e-3, reference_norm=1e-9 * float(np.max(np.abs(f.coeffs))))


def test_integrator_config_validation():
    with pytest.raises(ValueError):
        IntegratorConfig("euler", 0.1, 1.0)
    with pytest.raises(ValueError):
        IntegratorConfig("rk4", 0.0, 1.0)
    with pytest.raises(ValueError):
        IntegratorConfig("rk4", 0.1, -1.0)
    with pytest.raises(ValueError):
        IntegratorConfig("rk4", 0.1, 1.0, stride=0)


def test_zero_end_time_emits_only_the_initial_record(bkw16):
    cfg, dec = bkw16
    f0 = bkw_field(0.0, cfg)
    records = []
    out = integrate(f0, dec, IntegratorConfig("rk4", 0.01, 0.0), records.append)
    assert len(records) == 1 and records[0].t == 0.0 and records[0].step == 0
    assert np.array_equal(out.coeffs, f0.coeffs)


def test_records_follow_the_stride_and_land_on_the_end(bkw16):
    cfg, dec = bkw16
    records = []
    integrate(bkw_field(0.0, cfg), dec, IntegratorConfig("rk4", 0.03, 0.1, stride=2), records.append,
              reference=lambda t: bkw_box(t, cfg))
    assert [r.step for r in records] == [0, 2, 4]
    assert records[-1].t == 0.1
    assert all(r.l1_error is not None for r in records)
    assert records[0].l1_error < 1e-12


def test_suggested_step_scales_with_the_loss_rate(bkw16):
    cfg, dec = bkw16
    f = bkw_field(0.0, cfg)
    dt = suggest_dt(f, dec)
    assert 0 < dt <= 0.01
    assert suggest_dt(FourierField(100 * f.coeffs, cfg), dec) < dt


# -- conservation along BKW runs --------------------------------------------------

def _bkw_run(N, M, t_end=1.0, dt=0.01):
    cfg = bkw_config(N)
    dec = decompose(cfg, maxwell2d(), M)
    records = []
    integrate(bkw_field(0.0, cfg), dec, IntegratorConfig("rk4", dt, t_end), records.append)
    return records


@pytest.fixture(scope="module")
def runs():
    return {key: _bkw_run(*key) for key in [(32, 4), (32, 8), (32, 16), (48, 8)]}


def _energy_drift(records):
    return max(abs(r.moments.energy - records[0].moments.energy) for r in records) / records[0].moments.energy


def test_mass_is_conserved(runs):
    for records in runs.values():
        m0 = records[0].moments.mass
        assert max(abs(r.moments.mass - m0) for r in records) / m0 <= 1e-12


def test_momentum_of_even_data_stays_zero(runs):
    for records in runs.values():
        assert max(abs(p) for r in records for p in r.moments.momentum) <= 1e-12


def test_energy_drift_is_spectrally_small_in_n(runs):
    coarse, fine = _energy_drift(runs[(32, 8)]), _energy_drift(runs[(48, 8)])
    assert fine <= 1e-2 * coarse


def test_energy_drift_does_not_depend_on_m(runs):
    d4, d16 = _energy_drift(runs[(32, 4)]), _energy_drift(runs[(32, 16)])
    assert 0.5 <= d4 / d16 <= 2.0


def test_entropy_does_not_decrease(runs):
    for records in runs.values():
        h = np.array([r.moments.entropy for r in records])
        assert np.all(np.diff(h) >= -1e-8)
        assert h[-1] > h[0]


def test_three_dimensional_step_conserves_mass():
    cfg = make_config(3, 6, S_MAX, scale=4.0)
    dec = decompose(cfg, hardsphere3d(), 4)
    grids = np.meshgrid(*velocity_grid(cfg), indexing="ij")
    r2 = sum((4.0 * g) ** 2 for g in grids)
    vals = 64.0 * np.exp(-r2 / 2) * (1 + 0.3 * np.cos(4.0 * grids[0])) / (2 * math.pi) ** 1.5
    f = to_fourier(vals, cfg)
    out = step(f, dec, 0.01)
    m0 = moments(f).mass
    assert abs(moments(out).mass - m0) <= 1e-13 * m0
