"""Quadrature constants, kernel tables, convolution, and caching."""

import numpy as np
import pytest
from scipy.special import ive

import kclattice as kc
from kclattice import Field, LatticeBox
from kclattice.kernel import _IVE_ASYMPTOTIC_SWITCH, _ive_safe

# trapezoid ladder for the normalizing constant at alpha = 1; the refined
# value is the Richardson limit of the (96, 192) pair and is what every
# kernel table is built with
K1_TRAP_64 = 2.387602142987562
K1_TRAP_128 = 2.387602236618988
K1_REFINED = 2.3876022428596

# heat-kernel table entries at alpha = 1 (refined normalization)
R1_ORIGIN = 1.08718047897907
R1_AXIS = 0.137073067294331
R1_DIAGONAL = 5.59761722957831e-02


def test_laplace_symbol_values():
    assert kc.laplace_symbol(0.0, 0.0, 0.0) == 0.0
    assert kc.laplace_symbol(np.pi, np.pi, np.pi) == pytest.approx(12.0, rel=1e-15)
    assert kc.laplace_symbol(np.pi / 2, 0.0, 0.0) == pytest.approx(2.0, rel=1e-14)


def test_fractional_degree_trapezoid_ladder():
    assert kc.fractional_degree(1.0, 64) == pytest.approx(K1_TRAP_64, rel=1e-14)
    assert kc.fractional_degree(1.0, 128) == pytest.approx(K1_TRAP_128, rel=1e-14)
    assert kc.fractional_degree_refined(1.0) == pytest.approx(K1_REFINED, rel=1e-12)


def test_fractional_degree_exact_points():
    # alpha = 2 makes the integrand a trig polynomial, so the product
    # trapezoid rule is exact: the mean of 6 - 2 sum cos is 6
    assert kc.fractional_degree(2.0, 64) == pytest.approx(6.0, abs=1e-13)
    assert kc.fractional_degree_refined(2.0) == pytest.approx(6.0, abs=1e-13)
    # raw rule at small alpha is short by exactly the origin grid point
    # (the symbol power vanishes there), which the refined pair cancels,
    # leaving the genuine O(alpha) deviation of the constant from 1
    assert kc.fractional_degree(1.0e-12, 64) - 1.0 == pytest.approx(-(1.0 / 64**3), rel=1e-6)
    assert abs(kc.fractional_degree_refined(1.0e-12) - 1.0) < 1e-11


def test_fractional_degree_rejects_bad_alpha():
    for alpha in (0.0, -1.0, 3.0, 3.5):
        with pytest.raises(ValueError):
            kc.fractional_degree(alpha)


def test_heat_kernel_frozen_values():
    zs = [(0, 0, 0), (1, 0, 0), (1, 1, 0)]
    vals = kc.green_values(1.0, zs)
    assert vals[0] == pytest.approx(R1_ORIGIN, rel=1e-12)
    assert vals[1] == pytest.approx(R1_AXIS, rel=1e-12)
    assert vals[2] == pytest.approx(R1_DIAGONAL, rel=1e-12)
    assert kc.green_value(1.0, (0, 1, 1)) == pytest.approx(R1_DIAGONAL, rel=1e-12)


def test_heat_kernel_monotone_along_axis():
    zs = [(j, 0, 0) for j in range(6)]
    vals = kc.green_values(1.5, zs)
    assert np.all(vals > 0.0)
    assert np.all(np.diff(vals) < 0.0)


def test_torus_route_agrees_with_heat_kernel():
    zs = [(0, 0, 0), (1, 0, 0), (2, 1, 0), (2, 2, 2)]
    for alpha in (0.5, 1.0, 2.5):
        heat = kc.green_values(alpha, zs, method=kc.HEAT_KERNEL)
        torus = kc.green_values(alpha, zs, method=kc.TORUS_QUADRATURE)
        assert np.max(np.abs(torus / heat - 1.0)) < 1e-6


def test_torus_route_reports_unreachable_tolerance():
    with pytest.raises(kc.QuadratureError):
        kc.green_values(1.0, [(0, 0, 0)], method=kc.TORUS_QUADRATURE, tolerance=1e-14)


def test_ive_safe_matches_scipy_below_and_above_switch():
    orders = np.array([0, 3, 17])
    below = np.full(3, 0.9 * _IVE_ASYMPTOTIC_SWITCH)
    above = np.full(3, 4.0 * _IVE_ASYMPTOTIC_SWITCH)
    assert np.allclose(_ive_safe(orders, below), ive(orders, below), rtol=1e-14)
    assert np.allclose(_ive_safe(orders, above), ive(orders, above), rtol=1e-12)
    # scipy's ive goes NaN far out; the series branch must not
    far = _ive_safe(np.array([0, 5]), np.full(2, 1.0e12))
    assert np.all(np.isfinite(far)) and np.all(far > 0.0)


def test_build_kernel_positive_and_symmetric(kernel_m8):
    table = kernel_m8.table
    assert np.all(table > 0.0)
    assert kernel_m8.alpha == 1.0
    assert kernel_m8.k_alpha == pytest.approx(K1_REFINED, rel=1e-12)
    # octahedral symmetry is exact by construction
    for axes in [(1, 0, 2), (2, 1, 0), (0, 2, 1)]:
        assert np.array_equal(table, np.transpose(table, axes))
    for ax in range(3):
        assert np.array_equal(table, np.flip(table, axis=ax))
    assert kernel_m8.value((0, 0, 0)) == pytest.approx(R1_ORIGIN, rel=1e-12)
    assert kernel_m8.value((-1, 0, 0)) == kernel_m8.value((0, 0, 1))


def test_kernel_value_rejects_out_of_table(kernel_m8):
    with pytest.raises(ValueError):
        kernel_m8.value((9, 0, 0))


def test_octant_triples_orbit_count():
    kern = kc.build_kernel(1.0, 2)
    triples = kern.octant_triples()
    assert triples.shape == (10, 3)
    assert np.all(triples[:, 0] <= triples[:, 1])
    assert np.all(triples[:, 1] <= triples[:, 2])
    # orbits of the 48-element cubic group tile the full cube
    counted = set()
    for t in map(tuple, triples):
        for perm in [(0, 1, 2), (0, 2, 1), (1, 0, 2), (1, 2, 0), (2, 0, 1), (2, 1, 0)]:
            for sx in (1, -1):
                for sy in (1, -1):
                    for sz in (1, -1):
                        counted.add((sx * t[perm[0]], sy * t[perm[1]], sz * t[perm[2]]))
    assert len(counted) == 5**3


def test_decay_exponent_near_alpha_minus_three(kernel_m16):
    slope = kc.fit_decay_exponent(kernel_m16)
    assert slope == pytest.approx(-2.0, abs=0.15)
    with pytest.raises(ValueError):
        kc.fit_decay_exponent(kernel_m16, lo=10, hi=40)


def test_kernel_save_load_round_trip(tmp_path, kernel_m8):
    path = tmp_path / "k.tab"
    kernel_m8.save(path)
    again = kc.GreenKernel.load(path)
    assert again.alpha == kernel_m8.alpha
    assert again.k_alpha == kernel_m8.k_alpha
    assert again.table_radius == kernel_m8.table_radius
    assert np.array_equal(again.table, kernel_m8.table)
    assert again.meta["method"] == kc.HEAT_KERNEL


def test_kernel_load_rejects_garbage(tmp_path):
    path = tmp_path / "bad.tab"
    path.write_bytes(b"XXXXXXXX" + b"\x00" * 32)
    with pytest.raises(ValueError):
        kc.GreenKernel.load(path)


def test_kernel_cache_round_trip(tmp_path):
    import os

    first = kc.build_kernel(1.0, 3, cache_dir=tmp_path)
    assert not first.meta["cached"]
    assert os.path.exists(first.meta["cache_path"])
    second = kc.build_kernel(1.0, 3, cache_dir=tmp_path)
    assert second.meta["cached"]
    assert np.array_equal(second.table, first.table)
    # a different alpha must miss the cache
    other = kc.build_kernel(1.5, 3, cache_dir=tmp_path)
    assert not other.meta["cached"]
    assert other.meta["cache_path"] != first.meta["cache_path"]


def test_cache_key_distinguishes_parameters():
    base = kc.cache_key(1.0, 8, kc.HEAT_KERNEL, 96)
    assert base != kc.cache_key(1.5, 8, kc.HEAT_KERNEL, 96)
    assert base != kc.cache_key(1.0, 9, kc.HEAT_KERNEL, 96)
    assert base != kc.cache_key(1.0, 8, kc.TORUS_QUADRATURE, 96)
    assert base == kc.cache_key(1.0, 8, kc.HEAT_KERNEL, 96)


def test_convolve_fft_matches_direct(kernel_m8, rng):
    for mode in (kc.DIRICHLET, kc.PERIODIC):
        box = LatticeBox(4, mode)
        w = Field(box, rng.standard_normal((9, 9, 9)))
        fft = kc.convolve(kernel_m8, w, method="fft")
        direct = kc.convolve(kernel_m8, w, method="direct")
        scale = np.max(np.abs(direct.values))
        assert np.max(np.abs(fft.values - direct.values)) < 1e-12 * scale


def test_convolve_delta_reproduces_table(kernel_m8):
    box = LatticeBox(4)
    d = Field.delta(box, (0, 0, 0), 1.0)
    out = kc.convolve(kernel_m8, d)
    assert out.values[4, 4, 4] == pytest.approx(R1_ORIGIN, rel=1e-12)
    assert out.values[5, 4, 4] == pytest.approx(R1_AXIS, rel=1e-12)
    assert out.values[8, 4, 4] == pytest.approx(kernel_m8.value((4, 0, 0)), rel=1e-12)


def test_convolve_is_linear_and_symmetric(kernel_m8, rng):
    box = LatticeBox(3)
    u = Field(box, rng.standard_normal((7, 7, 7)))
    v = Field(box, rng.standard_normal((7, 7, 7)))
    combo = kc.convolve(kernel_m8, Field(box, 2.0 * u.values - 3.0 * v.values))
    parts = 2.0 * kc.convolve(kernel_m8, u).values - 3.0 * kc.convolve(kernel_m8, v).values
    assert np.allclose(combo.values, parts, rtol=1e-12, atol=1e-12)
    # self-adjointness of the convolution operator
    lhs = float(np.sum(v.values * kc.convolve(kernel_m8, u).values))
    rhs = float(np.sum(u.values * kc.convolve(kernel_m8, v).values))
    assert lhs == pytest.approx(rhs, rel=1e-12)


def test_convolve_coverage_requirements(kernel_m8):
    # dirichlet needs displacements up to 2n, periodic only up to n
    with pytest.raises(ValueError):
        kc.convolve(kernel_m8, Field.zeros(LatticeBox(5)))
    kc.convolve(kernel_m8, Field.zeros(LatticeBox(5, kc.PERIODIC)))
    kc.convolve(kernel_m8, Field.zeros(LatticeBox(4)))
    with pytest.raises(ValueError):
        kc.convolve(kernel_m8, Field.zeros(LatticeBox(3)), method="nope")


def test_mismatched_alpha_is_rejected(kernel_m8, reference_spec):
    wrong = kc.build_kernel(1.5, 2 * reference_spec.box.radius)
    u = kc.Field.delta(reference_spec.box, (0, 0, 0), 1.0)
    with pytest.raises(ValueError):
        kc.energy(reference_spec, wrong, u)


def test_set_fft_workers_validation():
    with pytest.raises(ValueError):
        kc.set_fft_workers(0)
    kc.set_fft_workers(2)
    kc.set_fft_workers(1)
