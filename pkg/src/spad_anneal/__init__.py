"""Event-driven simulator for photon-clocked Ising and Potts machines.

The package splits into model definition (`model`, `mapping`), the
energy-to-rate transfer layer (`ratefn`, `pulsesim`), the event-driven
sampler (`ctmc`), exact oracles (`reference`), and estimators (`stats`).
"""

from .model import (
    IsingModel,
    PottsModel,
    IsingState,
    PottsState,
    ising_energy,
    potts_energy,
    ising_conditional_energies,
    potts_conditional_energies,
    ising_state_index,
    ising_state_from_index,
    potts_state_index,
    potts_state_from_index,
    random_model,
    save_model,
    load_model,
    model_to_dict,
    model_from_dict,
)
from .mapping import (
    PAIR_SPINS,
    pair_label,
    pair_spins,
    ising_to_potts,
    ising_state_to_potts,
    potts_state_to_ising,
    index_permutation,
)
from .ratefn import (
    RateFunction,
    rate,
    calibrate,
    with_temperature,
    ratefn_to_dict,
    ratefn_from_dict,
)
from .ctmc import (
    clock_count,
    Network,
    ising_network,
    potts_network,
    LatchSpec,
    latch_invalid_fraction,
    SimConfig,
    sample_mode_from_string,
    config_to_dict,
    config_from_dict,
    EventRecord,
    EventStream,
    SampleStream,
    RunResult,
    step,
    run,
    SweepResult,
    ising_transfer_sweep,
    AnnealResult,
    anneal,
)
from .reference import (
    Distribution,
    all_energies,
    exact_boltzmann,
    conditional_distribution,
    gibbs_run,
    distribution_to_dict,
    distribution_from_dict,
    save_distribution,
    load_distribution,
    write_distribution_csv,
)
from .stats import (
    EmpiricalDistribution,
    kl_divergence,
    kl_convergence,
    statistical_floor,
    TanhFit,
    fit_tanh,
    RateFit,
    fit_rate,
    poisson_relative_error,
    energy_trace,
)
from .pulsesim import (
    PulseConfig,
    Trace,
    generate_trace,
    lowpass,
    count_crossings,
    TransferCurve,
    transfer_function,
    IntervalStats,
    interval_statistics,
    as_rate_table,
)

__version__ = "0.1.0"

__all__ = [
    "IsingModel", "PottsModel", "IsingState", "PottsState",
    "ising_energy", "potts_energy",
    "ising_conditional_energies", "potts_conditional_energies",
    "ising_state_index", "ising_state_from_index",
    "potts_state_index", "potts_state_from_index",
    "random_model", "save_model", "load_model",
    "model_to_dict", "model_from_dict",
    "PAIR_SPINS", "pair_label", "pair_spins",
    "ising_to_potts", "ising_state_to_potts", "potts_state_to_ising",
    "index_permutation",
    "RateFunction", "rate", "calibrate", "with_temperature",
    "ratefn_to_dict", "ratefn_from_dict",
    "clock_count", "Network", "ising_network", "potts_network",
    "LatchSpec", "latch_invalid_fraction",
    "SimConfig", "sample_mode_from_string",
    "config_to_dict", "config_from_dict",
    "EventRecord", "EventStream", "SampleStream", "RunResult",
    "step", "run",
    "SweepResult", "ising_transfer_sweep",
    "AnnealResult", "anneal",
    "Distribution", "all_energies", "exact_boltzmann",
    "conditional_distribution", "gibbs_run",
    "distribution_to_dict", "distribution_from_dict",
    "save_distribution", "load_distribution", "write_distribution_csv",
    "EmpiricalDistribution", "kl_divergence", "kl_convergence",
    "statistical_floor", "TanhFit", "fit_tanh", "RateFit", "fit_rate",
    "poisson_relative_error", "energy_trace",
    "PulseConfig", "Trace", "generate_trace", "lowpass",
    "count_crossings", "TransferCurve", "transfer_function",
    "IntervalStats", "interval_statistics", "as_rate_table",
    "__version__",
]
