"""Bessel ratios, retarded kernels, sphere quadrature, S/T calculus.

The kernel formulas are spot-checked against an independent re-derivation
evaluated in 40-digit mpmath arithmetic (guarding against transcription
errors in the four-term second-derivative sum), and the cancellation /
moment identities against the sphere quadrature.
"""

import mpmath as mp
import numpy as np
import pytest

from vkglab.bessel_kernels import (
    XI_SWITCH,
    BesselRatioTable,
    KernelQuery,
    _series_coefficients,
    bessel_ratio,
    kernel_a_second,
    kernel_a_second_pieces,
    kernel_a_spatial,
    kernel_a_time,
    one_plus_omega_dot_vhat,
    sphere_average,
    sphere_quadrature_nodes,
    st_decomposition_residual,
)
from vkglab.errors import ConfigurationError

mp.mp.dps = 40

# J1(1) from the ascending power series (25 terms, mpmath), frozen:
J1_AT_1 = 0.4400505857449335


def _series_oracle(k, xi, terms=25):
    """Independent ascending-series evaluation in exact arithmetic."""
    acc = mp.mpf(0)
    for m in range(terms):
        acc += ((-1) ** m * (mp.mpf(xi) / 2) ** (2 * m + k)
                / (mp.factorial(m) * mp.factorial(m + k)))
    return acc


def test_series_oracle_pins_frozen_value():
    assert float(_series_oracle(1, 1.0)) == pytest.approx(J1_AT_1, abs=1e-16)


def test_bessel_ratio_at_origin():
    assert bessel_ratio(0, 0.0) == 1.0
    assert bessel_ratio(1, 0.0) == 0.5
    assert bessel_ratio(2, 0.0) == 0.125
    assert bessel_ratio(3, 0.0) == pytest.approx(1.0 / 48.0, abs=1e-18)


def test_bessel_ratio_against_series_oracle():
    for k in range(4):
        for xi in (0.3, 1.0, 2.7, 5.0):
            expected = float(_series_oracle(k, xi) / mp.mpf(xi) ** k)
            assert bessel_ratio(k, xi) == pytest.approx(expected, abs=1e-14)
    assert bessel_ratio(1, 1.0) == pytest.approx(J1_AT_1, abs=1e-15)


def test_bessel_ratio_continuity_at_switch():
    # both branches evaluated at the switch point itself
    for k in range(4):
        u = (XI_SWITCH / 2.0) ** 2
        coeffs = _series_coefficients(k, 30)
        series = coeffs[-1]
        for c in coeffs[-2::-1]:
            series = series * u + c
        fast = bessel_ratio(k, XI_SWITCH)  # dispatches to the library branch
        assert abs(series - fast) <= 1e-12


def test_bessel_ratio_table_validation():
    table = BesselRatioTable(order=2)
    assert table.xi_switch == XI_SWITCH
    with pytest.raises(ValueError):
        BesselRatioTable(order=5)
    with pytest.raises(ValueError):
        BesselRatioTable(order=1, xi_switch=-1.0)


def test_bessel_ratio_domain_errors():
    with pytest.raises(ValueError):
        bessel_ratio(1, -0.1)
    with pytest.raises(ValueError):
        bessel_ratio(4, 1.0)


def test_j1_ratio_bounded_by_half():
    xi = np.concatenate([[0.0], np.logspace(-6, 3, 400)])
    vals = bessel_ratio(1, xi)
    assert vals.max() <= 0.5 + 1e-12


# ---------------------------------------------------------------------------
# kernels
# ---------------------------------------------------------------------------

def _mp_kernels(omega, v):
    """Re-derived kernel formulas in 40-digit arithmetic (expanded forms)."""
    om = [mp.mpf(c) for c in omega]
    vv = [mp.mpf(c) for c in v]
    g2 = 1 + sum(c * c for c in vv)
    vh = [c / mp.sqrt(g2) for c in vv]
    mu = sum(o * h for o, h in zip(om, vh))
    d = 1 + mu
    w2 = sum(h * h for h in vh)
    out = {}
    for k in range(3):
        out[("a", k)] = -vh[k] / d - om[k] / (g2 * d ** 2)
    out[("a", "t")] = (w2 + mu) / d ** 2
    for k in range(3):
        for l in range(3):
            dkl = 1 if k == l else 0
            out[("a2", k, l)] = (
                -3 * (om[l] * vh[k] + om[k] * vh[l]) / (g2 * d ** 3)
                - 3 * om[k] * om[l] / (g2 ** 2 * d ** 4)
                - 2 * vh[k] * vh[l] / d ** 2
                + dkl / (g2 * d ** 2))
    for k in range(3):
        out[("a2", "t", k)] = (2 * vh[k] * (mu + w2) / d ** 3
                               + 3 * om[k] * (mu + w2) / (g2 * d ** 4)
                               - vh[k] / (g2 * d ** 3))
    out[("a2", "t", "t")] = (3 * w2 ** 2 - mu ** 2 * w2 - w2 + 3 * mu ** 2
                             + 4 * mu * w2) / d ** 4
    return out


def _random_queries(n, radius, seed):
    rng = np.random.default_rng(seed)
    for _ in range(n):
        omega = rng.normal(size=3)
        omega /= np.linalg.norm(omega)
        v = rng.normal(size=3)
        v *= radius * rng.random() ** (1 / 3) / np.linalg.norm(v)
        yield omega, v


def test_kernel_query_validates_omega():
    with pytest.raises(ValueError):
        KernelQuery(np.array([1.0, 1.0, 0.0]), np.zeros(3))
    with pytest.raises(ValueError):
        KernelQuery(np.array([1.0, 0.0, 0.0]), np.zeros(2))


def test_first_kernels_at_zero_momentum():
    omega = np.array([0.6, 0.0, 0.8])
    q = KernelQuery(omega, np.zeros(3))
    for k in (1, 2, 3):
        assert kernel_a_spatial(k, q) == pytest.approx(-omega[k - 1], abs=1e-15)
    assert kernel_a_time(q) == 0.0


def test_spatial_kernel_orthogonal_case():
    # omega.vhat = 0 and vhat_k = 0: only the -omega_k/(1+|v|^2) term survives
    omega = np.array([1.0, 0.0, 0.0])
    v = np.array([0.0, 2.0, 0.0])
    q = KernelQuery(omega, v)
    assert kernel_a_spatial(1, q) == pytest.approx(-1.0 / 5.0, rel=1e-14)


def test_time_kernel_parallel_case():
    for r in (0.5, 3.0, 10.0):
        v = np.array([0.0, 0.0, r])
        w = r / np.sqrt(1 + r * r)
        q = KernelQuery(np.array([0.0, 0.0, 1.0]), v)
        assert kernel_a_time(q) == pytest.approx(w / (1 + w), rel=1e-14)


def test_second_kernel_at_zero_momentum():
    omega = np.array([0.48, -0.6, 0.64])
    omega /= np.linalg.norm(omega)
    q = KernelQuery(omega, np.zeros(3))
    for k in (1, 2, 3):
        for l in (1, 2, 3):
            dkl = 1.0 if k == l else 0.0
            expected = dkl - 3.0 * omega[k - 1] * omega[l - 1]
            assert kernel_a_second(k, l, q) == pytest.approx(expected, abs=1e-14)
    assert kernel_a_second("t", "t", q) == 0.0


def test_kernels_match_extended_precision_oracle():
    for omega, v in _random_queries(20, 8.0, seed=42):
        q = KernelQuery(omega, v)
        ref = _mp_kernels(omega, v)
        for k in (1, 2, 3):
            assert kernel_a_spatial(k, q) == pytest.approx(
                float(ref[("a", k - 1)]), rel=1e-13, abs=1e-13)
        assert kernel_a_time(q) == pytest.approx(
            float(ref[("a", "t")]), rel=1e-13, abs=1e-13)
        for k in (1, 2, 3):
            for l in (1, 2, 3):
                assert kernel_a_second(k, l, q) == pytest.approx(
                    float(ref[("a2", k - 1, l - 1)]), rel=1e-13, abs=1e-12)
            assert kernel_a_second("t", k, q) == pytest.approx(
                float(ref[("a2", "t", k - 1)]), rel=1e-13, abs=1e-12)
        assert kernel_a_second("t", "t", q) == pytest.approx(
            float(ref[("a2", "t", "t")]), rel=1e-13, abs=1e-12)


def test_mixed_kernel_axis_symmetry():
    for omega, v in _random_queries(5, 5.0, seed=3):
        q = KernelQuery(omega, v)
        for k in (1, 2, 3):
            assert kernel_a_second("t", k, q) == kernel_a_second(k, "t", q)


def test_denominator_bound():
    # 1/(1 + omega.vhat) <= 2 (1 + |v|^2) pointwise
    for omega, v in _random_queries(500, 50.0, seed=7):
        d = float(one_plus_omega_dot_vhat(omega, v))
        assert 1.0 / d <= 2.0 * (1.0 + v @ v) * (1 + 1e-12)


def test_second_kernel_bound_shape():
    # |a^{kl}| (1 + omega.vhat)^3 stays uniformly bounded for |v| <= 10;
    # the constant asserted here is empirical headroom, not a derived value
    worst = 0.0
    for omega, v in _random_queries(300, 10.0, seed=11):
        q = KernelQuery(omega, v)
        d = float(one_plus_omega_dot_vhat(omega, v))
        for k in (1, 2, 3):
            for l in (1, 2, 3):
                worst = max(worst, abs(kernel_a_second(k, l, q)) * d ** 3)
    assert worst < 100.0


# ---------------------------------------------------------------------------
# sphere quadrature
# ---------------------------------------------------------------------------

def test_sphere_average_constant_kernel():
    val = sphere_average(lambda om: np.ones(om.shape[0]), np.array([2.0, -1.0, 0.5]))
    assert val == pytest.approx(4.0 * np.pi, rel=1e-13)


def test_sphere_average_zero_momentum_moment_identity():
    # integral of (delta_kl - 3 omega_k omega_l) over the sphere vanishes
    v = np.zeros(3)
    for k, l in ((1, 1), (1, 2), (3, 3)):
        val = sphere_average(
            lambda om: kernel_a_second(k, l, KernelQuery(om, v)), v)
        assert abs(val) < 1e-12


def test_sphere_average_cancellation_sampled():
    rng = np.random.default_rng(5)
    for _ in range(5):
        v = rng.normal(size=3)
        v *= 10.0 * rng.random() ** (1 / 3) / np.linalg.norm(v)
        for k, l in ((1, 1), (1, 3), ("t", 2), ("t", "t")):
            val = sphere_average(
                lambda om: kernel_a_second(k, l, KernelQuery(om, v)), v)
            assert abs(val) < 1e-8


def test_moment_identities_of_kernel_pieces():
    rng = np.random.default_rng(9)
    for _ in range(3):
        v = rng.normal(size=3)
        v *= 4.0 * rng.random() ** (1 / 3) / np.linalg.norm(v)
        omega, w = sphere_quadrature_nodes(v)
        q = KernelQuery(omega, v)
        for k in (1, 2, 3):
            for l in (1, 2, 3):
                dkl = 1.0 if k == l else 0.0
                a1, a2, a3, a4 = kernel_a_second_pieces(k, l, q)
                vk, vl = v[k - 1], v[l - 1]
                for piece, target in (
                        (a1, 24 * np.pi * vk * vl),
                        (a2, -16 * np.pi * vk * vl - 4 * np.pi * dkl),
                        (a3, -8 * np.pi * vk * vl),
                        (a4, 4 * np.pi * dkl)):
                    assert w @ piece == pytest.approx(target, abs=1e-8, rel=1e-8)


def test_sphere_quadrature_order_convergence():
    # at the acceptance order, one more doubling moves the result < 1e-10
    v = np.array([1.0, -2.0, 0.7])
    for k, l in ((1, 2), ("t", "t")):
        kern = lambda om: kernel_a_second(k, l, KernelQuery(om, v))
        assert abs(sphere_average(kern, v, order=40)
                   - sphere_average(kern, v, order=20)) < 1e-10


def test_sphere_average_minimum_order():
    with pytest.raises(ConfigurationError):
        sphere_average(lambda om: np.ones(om.shape[0]), np.zeros(3), order=1)


# ---------------------------------------------------------------------------
# S/T derivative calculus
# ---------------------------------------------------------------------------

OMEGA = np.array([0.2, -0.4, 0.8944271909999159])
OMEGA_N = OMEGA / np.linalg.norm(OMEGA)
VSAMPLE = np.array([0.7, 0.1, -1.3])
POINT = (0.8, np.array([0.2, -0.1, 0.5]))


def test_st_residual_linear_in_t():
    g = lambda t, x: 2.5 * t
    assert st_decomposition_residual(g, VSAMPLE, OMEGA_N, POINT, 1e-3) < 1e-11


def test_st_residual_linear_in_x():
    g = lambda t, x: 4.0 * x[1] - x[2]
    assert st_decomposition_residual(g, VSAMPLE, OMEGA_N, POINT, 1e-3) < 1e-11


def test_st_residual_second_order_convergence():
    g = lambda t, x: np.sin(t) * np.exp(-x @ x)
    r_h = st_decomposition_residual(g, VSAMPLE, OMEGA_N, POINT, 2e-2)
    r_h2 = st_decomposition_residual(g, VSAMPLE, OMEGA_N, POINT, 1e-2)
    assert 3.5 <= r_h / r_h2 <= 4.5
