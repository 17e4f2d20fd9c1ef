import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mmwave_mimo import ConfigError
from mmwave_mimo.analysis import (
    FORMULAS,
    GramSummary,
    SINR_SENTINEL,
    evaluate,
    fd_hybrid_gap,
    fd_rate_large_m,
    formula_ids,
    formula_parameters,
    gram_summary,
    hybrid_rate_large_m,
    hybrid_zf_imperfect_large_m,
    intracell_interference_large_m,
    kfactor_weight,
    los_interference,
    multicell_nmse,
    perturbed_inverse_approx,
    rate_hybrid_upper,
    rate_multicell_approx,
    rate_pac_mrt_approx,
    rate_slos_mrt_approx,
    rate_zf_imperfect_csi,
    sinr_quantized_mrt,
    slos_mse,
    trace_inverse_los_gram,
)
from mmwave_mimo.array_geometry import steering_matrix
from mmwave_mimo.presets import neighbor_downlink_gain


def _orthogonal_angles(m, n, spacing=2):
    # cosines on multiples of 2/M give mutually orthogonal steering vectors
    cos = -1 + (np.arange(n) * spacing + 1) * 2 / m
    return np.arccos(cos)


def _random_pd(rng, n=8):
    b = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return b @ b.conj().T + n * np.eye(n)


def _random_hermitian(rng, n=8):
    d = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    d = (d + d.conj().T) / 2
    return d / np.linalg.norm(d, 2)


# ---------------------------------------------------------------- registry values


def test_slos_mse_reference():
    assert slos_mse(10) == pytest.approx(2 * (1 - math.sqrt(10 / 11)))
    assert slos_mse(10) == pytest.approx(0.0931, abs=1e-4)
    assert slos_mse(math.inf) == 0.0


def test_slos_mrt_large_system_reference():
    assert evaluate("slos_mrt_large_system", load=0.1, k_factor=10).value == pytest.approx(math.log2(81))


def test_hybrid_imperfect_large_array_reference():
    rate = hybrid_zf_imperfect_large_m(100, 8, 8, 2, 0.005)
    assert rate == pytest.approx(13.594, abs=1e-3)
    assert 2**rate - 1 == pytest.approx(1.23e4, rel=0.01)


def test_hybrid_and_digital_large_array_references():
    assert hybrid_rate_large_m(100, 16, 4, 2, 100) == pytest.approx(14.70, abs=0.01)
    assert fd_rate_large_m(100, 16, 4, 100) == pytest.approx(math.log2(1 + 40000))
    assert fd_hybrid_gap(2) == pytest.approx(math.log2(2 / 3))


def test_multicell_nmse_reference():
    assert multicell_nmse(128, 10, 0.01) == pytest.approx(7.8125e-6)
    assert multicell_nmse(128, 10, 0.0, pilot_snr=10.0) == pytest.approx(1 / 12800)


def test_evaluate_echoes_inputs_and_is_pure():
    a = evaluate("impaired_rate", bs_elements=100, user_elements=8, n_users=8, k_factor=2, snr=100, loss_coeff=0.5)
    b = evaluate("impaired_rate", bs_elements=100, user_elements=8, n_users=8, k_factor=2, snr=100, loss_coeff=0.5)
    assert a == b
    assert a.inputs_echo["loss_coeff"] == 0.5


def test_evaluate_rejects_bad_requests():
    with pytest.raises(ConfigError):
        evaluate("no_such_formula")
    with pytest.raises(ConfigError):
        evaluate("slos_mse", k_factor=1, extra=2)
    with pytest.raises(ConfigError):
        evaluate("fd_rate_large_m", bs_elements=100)
    with pytest.raises(ConfigError):
        formula_parameters("no_such_formula")


def test_registry_is_sorted_and_introspectable():
    assert formula_ids() == sorted(FORMULAS)
    assert formula_parameters("fd_hybrid_gap") == ["k_factor"]


# ---------------------------------------------------------------- digital single cell


def test_orthogonal_slos_has_no_los_interference():
    m, n, k = 128, 8, 10.0
    h = steering_matrix(m, _orthogonal_angles(m, n))
    assert np.allclose(los_interference(h), 0.0, atol=1e-12)
    assert np.allclose(rate_slos_mrt_approx(h, k), math.log2(1 + m * k / n))


def test_los_interference_scale_with_spread_users():
    # equispaced angles are not cosine-aligned, so sidelobes leak; the
    # large-system value N^2/(4 M^2) gives the order of magnitude
    m, n = 200, 20
    h = steering_matrix(m, np.linspace(0, np.pi, n + 2)[1:-1])
    part1 = los_interference(h).mean()
    assert n**2 / (4 * m**2) / 3 < part1 < 3 * n**2 / (4 * m**2)


def test_pac_mrt_below_slos_mrt_for_same_geometry():
    m, n = 100, 10
    h = steering_matrix(m, _orthogonal_angles(m, n))
    assert np.all(rate_slos_mrt_approx(h, 10.0) > rate_pac_mrt_approx(h, 10.0, 0.02))


def test_zf_error_free_csi_hits_sentinel():
    g = gram_summary(steering_matrix(64, _orthogonal_angles(64, 4)))
    r = rate_zf_imperfect_csi(g, 0.0, "slps", bs_elements=64)
    assert np.allclose(r, math.log2(1 + SINR_SENTINEL))
    r_noisy = rate_zf_imperfect_csi(g, 0.0, "slps", bs_elements=64, snr=100.0)
    # beta^2 = 1/tr(K^-1) = 16, so the SINR is 1600
    assert np.allclose(r_noisy, math.log2(1 + 1600))


def test_slps_and_pac_zf_differ_by_intercell_term_only():
    m, n, d = 100, 20, 0.02
    g = gram_summary(steering_matrix(m, _orthogonal_angles(m, n)))
    slps = rate_zf_imperfect_csi(g, d, "slps", bs_elements=m)
    pac = rate_zf_imperfect_csi(g, d, "pac", bs_elements=m)
    bracket = 1 / (2**slps - 1)
    assert np.allclose(pac, np.log2(1 + 1 / (bracket + d / m)))
    # the extra d/M term costs about 0.08 bits at this load
    assert np.allclose(slps - pac, 0.0760, atol=5e-4)


def test_hybrid_zf_variant_matches_large_array_form():
    m, p, n, k, d = 100, 8, 8, 2.0, 0.005
    gram = np.eye(n) * m * p * kfactor_weight(k)
    inv = np.linalg.inv(gram)
    g = GramSummary(gram=gram, inv_diag=np.real(np.diag(inv)), trace_inv=float(np.real(np.trace(inv))))
    r = rate_zf_imperfect_csi(g, d, "hybrid")
    assert np.allclose(r, hybrid_zf_imperfect_large_m(m, p, n, k, d))


def test_zf_variant_validation():
    g = gram_summary(np.eye(3))
    with pytest.raises(ConfigError):
        rate_zf_imperfect_csi(g, 0.1, "slps")
    with pytest.raises(ConfigError):
        rate_zf_imperfect_csi(g, 0.1, "mmse", bs_elements=3)


@given(
    st.floats(0.0, 1.2),
    st.floats(2.0, 200.0, exclude_min=True),
    st.floats(0.01, 0.3),
    st.floats(0.0, 0.1),
)
def test_quantized_slos_beats_pac(a, k, load, mse):
    # the ordering is claimed for K-factors above 2; it can flip below that
    assert sinr_quantized_mrt("slos", a, k, load) > sinr_quantized_mrt("pac", a, k, load, mse)


def test_unquantized_mrt_reduces_to_large_system_forms():
    slos = sinr_quantized_mrt("slos", 0.0, 10.0, 0.1)
    assert slos == pytest.approx(80.0)
    pac = evaluate("pac_mrt_large_system", load=0.1, k_factor=10.0, mse=0.02).value
    assert pac == pytest.approx(math.log2(1 + sinr_quantized_mrt("pac", 0.0, 10.0, 0.1, 0.02)))


def test_trace_inverse_los_gram():
    assert trace_inverse_los_gram(_orthogonal_angles(128, 8), 128) == pytest.approx(8 / 128)
    assert trace_inverse_los_gram([1.1], 200) == pytest.approx(1 / 200)
    cos = np.linspace(-1, 1, 51)[:-1] + 0.01
    assert trace_inverse_los_gram(np.arccos(cos), 200) == pytest.approx(0.25, rel=0.10)
    with pytest.raises(ConfigError):
        trace_inverse_los_gram([1.0, 1.0], 64)


# ---------------------------------------------------------------- hybrid single cell


def test_orthonormal_bound_equals_large_array_form():
    m, p, n, k, snr = 100, 16, 4, 2.0, 100.0
    f = steering_matrix(m, _orthogonal_angles(m, n)).conj() / np.sqrt(m)
    assert rate_hybrid_upper(f, k, m, n, p, snr) == pytest.approx(hybrid_rate_large_m(m, p, n, k, snr), abs=1e-9)


def test_infinite_kfactor_reaches_fully_digital_bound():
    assert hybrid_rate_large_m(100, 16, 4, math.inf, 100) == pytest.approx(fd_rate_large_m(100, 16, 4, 100))
    assert hybrid_rate_large_m(100, 16, 4, 1e9, 100) == pytest.approx(fd_rate_large_m(100, 16, 4, 100), abs=1e-6)
    assert fd_hybrid_gap(math.inf) == 0.0


@given(st.floats(0.01, 1e4))
def test_fd_hybrid_gap_is_nonpositive(k):
    assert fd_hybrid_gap(k) <= 0.0


# ---------------------------------------------------------------- multi cell


def test_limit_chain_without_neighbours():
    m, p, n, k, snr = 200, 10, 10, 4.0, 1e3
    multi = rate_multicell_approx(m, p, n, k, 0.0, 0.0, snr, normalization="exact")
    single = hybrid_rate_large_m(m, p, n, k, snr)
    f = steering_matrix(m, _orthogonal_angles(m, n)).conj() / np.sqrt(m)
    bound = rate_hybrid_upper(f, k, m, n, p, snr)
    assert multi == pytest.approx(single, abs=1e-9)
    assert single == pytest.approx(bound, abs=1e-9)


def test_approx_normalization_is_close_for_large_arrays():
    exact = rate_multicell_approx(200, 10, 10, 4.0, 0.0, 0.0, 1e3, normalization="exact")
    approx = rate_multicell_approx(200, 10, 10, 4.0, 0.0, 0.0, 1e3)
    assert abs(exact - approx) < 1e-2
    with pytest.raises(ConfigError):
        rate_multicell_approx(200, 10, 10, 4.0, 0.0, 0.0, 1e3, normalization="other")


@pytest.mark.parametrize("sum_rho2", [0.01, 0.2])
def test_multicell_rate_scaling_law(sum_rho2):
    zeta = neighbor_downlink_gain()
    for e in range(7, 13):
        ratio = rate_multicell_approx(2**e, 10, 10, 4.0, sum_rho2, zeta, 1e10) / e
        assert 0.9 <= ratio <= 1.1


@given(st.integers(6, 11), st.floats(0.5, 50.0), st.floats(0.0, 0.5), st.floats(0.0, 2.0))
def test_multicell_rate_monotone_in_array_and_kfactor(e, k, rho, zeta):
    base = rate_multicell_approx(2**e, 8, 8, k, rho, zeta, 100.0)
    assert rate_multicell_approx(2 ** (e + 1), 8, 8, k, rho, zeta, 100.0) >= base
    assert rate_multicell_approx(2**e, 8, 8, 1.5 * k, rho, zeta, 100.0) >= base


def test_intracell_term_matches_rate_bracket():
    m, p, n, k, rho = 128, 10, 10, 4.0, 0.2
    term = intracell_interference_large_m(m, p, n, k, rho)
    rate = rate_multicell_approx(m, p, n, k, rho, 0.0, None)
    bias = (math.sqrt(1 + rho / (m * p)) - 1) ** 2
    assert rate == pytest.approx(math.log2(1 + 1 / (bias + term)))


# ---------------------------------------------------------------- matrix perturbation


def test_perturbed_inverse_zero_perturbation_is_exact(rng):
    k = _random_pd(rng)
    for order in ("full", "first"):
        assert np.allclose(perturbed_inverse_approx(k, np.zeros_like(k), order), np.linalg.inv(k))


def test_full_form_is_exact(rng):
    k = _random_pd(rng)
    d = 0.5 * _random_hermitian(rng)
    assert np.allclose(perturbed_inverse_approx(k, d, "full"), np.linalg.inv(k + d), atol=1e-12)


def test_first_order_error_at_one_percent(rng):
    k = _random_pd(rng)
    d = 0.01 * np.linalg.norm(k, 2) * _random_hermitian(rng)
    exact = np.linalg.inv(k + d)
    rel = np.linalg.norm(perturbed_inverse_approx(k, d, "first") - exact, 2) / np.linalg.norm(exact, 2)
    assert 1e-6 < rel < 1e-3


def test_halving_perturbation_quarters_error(rng):
    k = _random_pd(rng)
    d = 0.05 * _random_hermitian(rng)
    e1 = np.linalg.norm(perturbed_inverse_approx(k, d, "first") - np.linalg.inv(k + d), 2)
    e2 = np.linalg.norm(perturbed_inverse_approx(k, d / 2, "first") - np.linalg.inv(k + d / 2), 2)
    assert e1 / e2 == pytest.approx(4.0, rel=0.1)


def test_large_perturbation_rejected(rng):
    k = _random_pd(rng)
    d = 10 * np.linalg.norm(k, 2) * _random_hermitian(rng)
    with pytest.raises(ConfigError):
        perturbed_inverse_approx(k, d)
    with pytest.raises(ConfigError):
        perturbed_inverse_approx(k, 0 * d, "second")


def test_zero_kfactor_gives_zero_strongest_path_rate():
    h = steering_matrix(64, _orthogonal_angles(64, 4))
    assert np.all(rate_slos_mrt_approx(h, 0.0, 100.0) == 0.0)
    assert sinr_quantized_mrt("slos", 0.3, 0.0, 0.1) == 0.0
    assert evaluate("slos_mrt_large_system", load=0.1, k_factor=0.0, snr=100.0).value == 0.0
    # the noise term keeps its (K+1)/K factor
    expected = math.log2(1 + 1 / (0.0025 + 0.01 + 0.1 / 100 * 1.1))
    assert evaluate("slos_mrt_large_system", load=0.1, k_factor=10.0, snr=100.0).value == pytest.approx(expected)
