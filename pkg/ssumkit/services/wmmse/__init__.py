from .baselines import (
    WMMSEResult,
    deterministic_wmmse,
    mean_wmmse,
    one_sample_wmmse,
    sg_beamforming,
)
from .channels import (
    build_channel_model,
    cell_powers,
    mean_channels,
    random_precoders,
    sample_channels,
)
from .evaluation import (
    RateEstimate,
    ergodic_sum_rate,
    evaluation_channels,
    score_precoders,
)
from .formulas import (
    big_g1,
    g1,
    mmse_receiver,
    mse_matrix,
    rate,
    sum_rate,
    surrogate_p_update,
)
from .stochastic import (
    WMMSESurrogateModel,
    accumulate,
    aggregate_value,
    stochastic_wmmse,
    v_update,
)

__all__ = [
    # Formulas
    "big_g1",
    "g1",
    "mmse_receiver",
    "mse_matrix",
    "rate",
    "sum_rate",
    "surrogate_p_update",
    # Channels
    "build_channel_model",
    "cell_powers",
    "mean_channels",
    "random_precoders",
    "sample_channels",
    # Stochastic WMMSE
    "WMMSESurrogateModel",
    "accumulate",
    "aggregate_value",
    "stochastic_wmmse",
    "v_update",
    # Baselines
    "WMMSEResult",
    "deterministic_wmmse",
    "mean_wmmse",
    "one_sample_wmmse",
    "sg_beamforming",
    # Evaluation
    "RateEstimate",
    "ergodic_sum_rate",
    "evaluation_channels",
    "score_precoders",
]
