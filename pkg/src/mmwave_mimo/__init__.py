"""Monte-Carlo simulator and closed-form analysis for mmWave multi-user massive MIMO.

Submodules
----------
array_geometry
    ULA steering vectors, array gain, beamwidth and user separation.
channel_model
    Rician channels, user placement, cross-cell channels, path loss.
aoa_estimation
    Tone-based angle search (fully digital and hybrid beam selection).
pilot_estimation
    LS channel estimation and hybrid equivalent-channel estimation.
precoding
    MRT/ZF precoders and downlink SINR accounting.
impairments
    Phase quantization, phase errors and beam pointing errors.
analysis
    Closed-form rate, SINR and NMSE approximations.
experiments
    Scenario configuration, seeded sweeps and CSV output.
"""

from ._validation import ConfigError, IllConditionedError

__version__ = "0.1.0"

__all__ = ["ConfigError", "IllConditionedError", "__version__"]
