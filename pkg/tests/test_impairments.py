import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mmwave_mimo import ConfigError
from mmwave_mimo.analysis import impairment_gap
from mmwave_mimo.aoa_estimation import BeamformerSet
from mmwave_mimo.array_geometry import steering_matrix
from mmwave_mimo.impairments import (
    ImpairmentModel,
    apply_beamforming_errors,
    apply_phase_errors,
    half_power_offset,
    max_quantization_error,
    power_loss_coefficient,
    predicted_rate_with_impairments,
    quantization_keeps_half_power,
    quantize_phases,
    quantize_weights,
    sinc,
    three_db_phase_error,
)


def _beams(m=32, p=8, bs_angles=(0.9, 1.6, 2.3), ue_angles=(1.0, 1.2, 2.0)):
    return BeamformerSet(
        bs_matrix=steering_matrix(m, bs_angles).conj() / np.sqrt(m),
        user_vectors=steering_matrix(p, ue_angles) / np.sqrt(p),
        estimated_bs_angles=np.array(bs_angles),
        estimated_user_angles=np.array(ue_angles),
    )


def test_two_bit_quantization_reference():
    out = quantize_phases([82, 345, 248, 151, 53], 2)
    assert np.array_equal(out, [90, 0, 270, 180, 90])


@pytest.mark.parametrize("bits", [1, 2, 3, 5])
def test_levels_are_fixed_points(bits):
    levels = np.arange(2**bits) * 360.0 / 2**bits
    assert np.allclose(quantize_phases(levels, bits), levels)


@given(st.lists(st.floats(-720, 720, allow_nan=False), min_size=1, max_size=30), st.integers(1, 8))
def test_quantization_error_is_bounded(phases, bits):
    q = quantize_phases(phases, bits)
    err = np.angle(np.exp(1j * np.radians(np.asarray(phases) - q)))
    assert np.all(np.abs(err) <= max_quantization_error(bits) + 1e-9)
    assert np.all((q >= 0) & (q < 360))


def test_eight_bit_error_below_0703_degrees():
    phases = np.linspace(0, 360, 100001)
    err = np.abs(np.angle(np.exp(1j * np.radians(phases - quantize_phases(phases, 8)))))
    assert np.degrees(err.max()) <= 0.703


def test_quantize_weights_keeps_modulus():
    w = np.array([2 * np.exp(1j * 0.3), 0.5 * np.exp(-1j * 2.0)])
    q = quantize_weights(w, 3)
    assert np.allclose(np.abs(q), np.abs(w))


def test_zero_phase_errors_are_identity(rng):
    beams = _beams()
    out = apply_phase_errors(beams, ImpairmentModel(), rng)
    assert np.array_equal(out.bs_matrix, beams.bs_matrix)
    assert np.array_equal(out.user_vectors, beams.user_vectors)


def test_phase_error_mean_matches_sinc(rng):
    a = 0.5
    beams = BeamformerSet(np.ones((100000, 1)), np.ones((1, 1)), np.zeros(1), np.zeros(1))
    out = apply_phase_errors(beams, ImpairmentModel(max_phase_err_bs_rad=a), rng)
    assert np.real(out.bs_matrix.mean()) == pytest.approx(sinc(a), rel=0.01)
    assert np.allclose(np.abs(out.bs_matrix), 1.0)


def test_three_db_phase_error():
    a = three_db_phase_error()
    assert a == pytest.approx(1.39156, abs=1e-4)
    assert sinc(a) ** 2 == pytest.approx(0.5, abs=1e-12)
    assert quantization_keeps_half_power(a, 64)
    assert not quantization_keeps_half_power(a + 1e-3, 64)


def test_pointing_loss_at_half_power_point():
    for m in (50, 100, 400):
        assert power_loss_coefficient(m, half_power_offset(m), "fixed") == pytest.approx(0.5, rel=0.05)
    assert power_loss_coefficient(100, 0.0) == 1.0


def test_gaussian_pointing_loss_is_between_zero_and_one():
    xi = power_loss_coefficient(100, half_power_offset(100), "gaussian")
    assert 0.5 < xi < 1.0


def test_effective_loss_combines_factors():
    model = ImpairmentModel(
        max_phase_err_user_rad=0.2,
        max_phase_err_bs_rad=0.3,
        pointing_err_bs=half_power_offset(100),
        bs_elements=100,
        user_elements=8,
    )
    expected = sinc(0.2) ** 2 * sinc(0.3) ** 2 * model.power_loss_coeff
    assert model.effective_loss_coeff == pytest.approx(expected, abs=1e-12)


def test_impairment_gap_values():
    assert impairment_gap(0.5) == pytest.approx(1.0)
    assert impairment_gap(1.0) == 0.0
    _, gap = predicted_rate_with_impairments(100, 8, 8, 2.0, 100.0, 0.25)
    assert gap == pytest.approx(2.0)


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(quant_bits=0),
        dict(max_phase_err_bs_rad=-0.1),
        dict(pointing_err_user=-1e-3),
        dict(pointing_law="uniform"),
    ],
)
def test_model_validation(kwargs):
    with pytest.raises(ConfigError):
        ImpairmentModel(**kwargs)


def test_loss_coefficient_must_be_positive():
    with pytest.raises(ConfigError):
        predicted_rate_with_impairments(100, 8, 8, 2.0, 100.0, 0.0)


@given(st.floats(0.2, 2.9), st.floats(1e-4, 0.05), st.integers(0, 2**32 - 1))
def test_pointing_error_repoints_bs_beam(angle, eps, seed):
    m = 48
    u = np.cos(angle)
    beams = BeamformerSet(
        steering_matrix(m, [angle]).conj() / np.sqrt(m), np.ones((1, 1)), np.array([angle]), np.array([0.0])
    )
    out = apply_beamforming_errors(beams, ImpairmentModel(pointing_err_bs=eps), np.random.default_rng(seed))
    # the fixed law shifts the beam by +eps or -eps in the cosine domain
    n = np.arange(m)
    shifted = [np.exp(1j * np.pi * n * (u + s)) / np.sqrt(m) for s in (eps, -eps)]
    assert any(np.allclose(out.bs_matrix[:, 0], t, atol=1e-9) for t in shifted)
    assert np.allclose(np.abs(out.bs_matrix), 1 / np.sqrt(m))
