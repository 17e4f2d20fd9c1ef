"""Named scenarios for the reference studies.

Trial counts are desk scale; raise ``trials`` for smoother curves.
"""

from __future__ import annotations

import math
from typing import Callable

from .channel_model import downlink_gain_from_geometry
from .experiments import ScenarioConfig

__all__ = ["PRESETS", "NEIGHBOR_CELLS", "neighbor_downlink_gain"]

NEIGHBOR_CELLS = 6
# cell-edge geometry of the multi-cell study: desired user 50 m from its
# own site, 150 m from each neighbour site
_USER_TO_OWN_SITE_M = 50.0
_USER_TO_NEIGHBOR_SITE_M = 150.0


def neighbor_downlink_gain(alpha: float = 1.9) -> float:
    """Summed neighbour-to-desired gain ratio over the six surrounding sites."""
    return NEIGHBOR_CELLS * downlink_gain_from_geometry(_USER_TO_OWN_SITE_M, _USER_TO_NEIGHBOR_SITE_M, alpha)


def _snr_axis(lo, hi, step):
    return tuple(float(v) for v in range(lo, hi + 1, step))


def tone_aoa_accuracy() -> ScenarioConfig:
    return ScenarioConfig(
        name="tone_aoa_accuracy",
        simulation="tone_aoa",
        m=200,
        n_users=1,
        k_factor=10.0,
        num_steps=360,
        num_combined=15,
        sweep_axis="snr_db",
        axis_values=_snr_axis(-20, 20, 5),
        trials=500,
    )


def precoder_comparison() -> ScenarioConfig:
    return ScenarioConfig(
        name="precoder_comparison",
        simulation="digital_precoders",
        m=100,
        n_users=20,
        k_factor=15.0,
        mse=0.02,
        tone_snr_db=10.0,
        num_steps=360,
        sweep_axis="snr_db",
        axis_values=_snr_axis(-10, 40, 10),
        trials=1000,
    )


def large_system_load() -> ScenarioConfig:
    return ScenarioConfig(
        name="large_system_load",
        simulation="digital_precoders",
        m=200,
        n_users=20,
        k_factor=15.0,
        mse=0.02,
        snr_db=40.0,
        tone_snr_db=10.0,
        num_steps=360,
        sweep_axis="load",
        axis_values=(0.05, 0.1, 0.15, 0.2, 0.25, 0.3),
        trials=300,
    )


def precoder_kfactor() -> ScenarioConfig:
    return ScenarioConfig(
        name="precoder_kfactor",
        simulation="digital_precoders",
        m=100,
        n_users=10,
        mse=0.02,
        snr_db=20.0,
        tone_snr_db=10.0,
        num_steps=360,
        sweep_axis="k_factor",
        axis_values=(1.0, 2.0, 5.0, 10.0, 20.0, 50.0),
        trials=300,
    )


def phase_quantization_snr() -> ScenarioConfig:
    return ScenarioConfig(
        name="phase_quantization_snr",
        simulation="digital_precoders",
        m=100,
        n_users=10,
        k_factor=50.0,
        mse=0.02,
        quant_bits=2,
        precoders=("slos_mrt", "pac_mrt"),
        tone_snr_db=10.0,
        num_steps=360,
        sweep_axis="snr_db",
        axis_values=_snr_axis(-10, 40, 10),
        trials=500,
    )


def phase_quantization_antennas() -> ScenarioConfig:
    return ScenarioConfig(
        name="phase_quantization_antennas",
        simulation="digital_precoders",
        m=100,
        n_users=10,
        load=0.1,
        k_factor=50.0,
        mse=0.02,
        quant_bits=2,
        snr_db=30.0,
        precoders=("slos_mrt", "pac_mrt"),
        tone_snr_db=10.0,
        num_steps=360,
        sweep_axis="m",
        axis_values=(100, 200, 300, 400),
        trials=300,
    )


def hybrid_nmse() -> ScenarioConfig:
    return ScenarioConfig(
        name="hybrid_nmse",
        simulation="equivalent_channel_nmse",
        n_users=10,
        k_factor=2.0,
        pilot_snr_db=10.0,
        tone_snr_db=10.0,
        sweep_axis="array",
        axis_values=("50x4", "100x8", "200x16"),
        trials=300,
    )


def hybrid_vs_digital_snr() -> ScenarioConfig:
    return ScenarioConfig(
        name="hybrid_vs_digital_snr",
        simulation="hybrid_rate",
        m=100,
        n_users=10,
        p=16,
        k_factor=2.0,
        tone_snr_db=10.0,
        include_fd=True,
        sweep_axis="snr_db",
        axis_values=_snr_axis(-10, 40, 10),
        trials=300,
    )


def hybrid_vs_digital_kfactor() -> ScenarioConfig:
    return ScenarioConfig(
        name="hybrid_vs_digital_kfactor",
        simulation="hybrid_rate",
        m=100,
        n_users=4,
        p=16,
        snr_db=20.0,
        tone_snr_db=10.0,
        include_fd=True,
        sweep_axis="k_factor",
        axis_values=(0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0),
        trials=300,
    )


def _impairment_base(**kw) -> ScenarioConfig:
    base = dict(
        simulation="hybrid_rate",
        m=100,
        n_users=8,
        p=8,
        k_factor=2.0,
        mse=0.005,
        tone_snr_db=10.0,
        phase_err_user_deg=3.0,
        phase_err_bs_deg=3.0,
        pointing_err_bs_hpbw=0.5,
        pointing_law="fixed",
        snr_db=20.0,
        trials=300,
    )
    base.update(kw)
    return ScenarioConfig(**base)


def impairment_rate_snr() -> ScenarioConfig:
    return _impairment_base(name="impairment_rate_snr", sweep_axis="snr_db", axis_values=_snr_axis(-10, 30, 10))


def impairment_rate_bs_antennas() -> ScenarioConfig:
    return _impairment_base(
        name="impairment_rate_bs_antennas", snr_db=30.0, sweep_axis="m", axis_values=(50, 100, 200, 400)
    )


def impairment_rate_user_antennas() -> ScenarioConfig:
    return _impairment_base(
        name="impairment_rate_user_antennas", snr_db=30.0, sweep_axis="p", axis_values=(2, 4, 8, 16)
    )


def _multicell_base(**kw) -> ScenarioConfig:
    base = dict(
        simulation="hybrid_rate",
        m=200,
        n_users=10,
        p=10,
        k_factor=4.0,
        cross_k_up=2.0,
        cross_k_down=2.0,
        l_cells=NEIGHBOR_CELLS,
        sum_rho2=0.01,
        sum_zeta2=neighbor_downlink_gain(),
        beam_source="perfect",
        pilot_snr_db=20.0,
        tx_power_dbm=46.0,
        trials=100,
    )
    base.update(kw)
    return ScenarioConfig(**base)


def multicell_nmse() -> ScenarioConfig:
    return _multicell_base(
        name="multicell_nmse",
        simulation="equivalent_channel_nmse",
        k_factor=5.0,
        pilot_snr_db=math.inf,
        sum_zeta2=0.0,
        sweep_axis="m",
        axis_values=(64, 128, 256, 512),
        trials=200,
    )


def multicell_nmse_los_ratio() -> ScenarioConfig:
    return _multicell_base(
        name="multicell_nmse_los_ratio",
        simulation="equivalent_channel_nmse",
        m=128,
        k_factor=5.0,
        pilot_snr_db=math.inf,
        sum_zeta2=0.0,
        sweep_axis="cross_k_up",
        axis_values=(0.5, 1.0, 2.0, 5.0, 10.0, 20.0),
        trials=200,
    )


def multicell_rate_power() -> ScenarioConfig:
    return _multicell_base(
        name="multicell_rate_power",
        sweep_axis="tx_power_dbm",
        axis_values=(16.0, 21.0, 26.0, 31.0, 36.0, 41.0, 46.0),
    )


def multicell_rate_antennas() -> ScenarioConfig:
    return _multicell_base(
        name="multicell_rate_antennas",
        sum_rho2=0.2,
        sweep_axis="m",
        axis_values=(64, 128, 256, 512),
    )


PRESETS: dict[str, Callable[[], ScenarioConfig]] = {
    f.__name__: f
    for f in (
        tone_aoa_accuracy,
        precoder_comparison,
        large_system_load,
        precoder_kfactor,
        phase_quantization_snr,
        phase_quantization_antennas,
        hybrid_nmse,
        hybrid_vs_digital_snr,
        hybrid_vs_digital_kfactor,
        impairment_rate_snr,
        impairment_rate_bs_antennas,
        impairment_rate_user_antennas,
        multicell_nmse,
        multicell_nmse_los_ratio,
        multicell_rate_power,
        multicell_rate_antennas,
    )
}
