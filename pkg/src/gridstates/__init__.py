"""Measurement-free grid-state preparation with oscillator-qubit gates."""

from .hilbert import (
    BosonOperator,
    DimensionMismatchError,
    FockSpace,
    HybridState,
    LeakageWarning,
    QubitOperator,
    annihilation,
    coherent_state,
    creation,
    default_dim,
    displacement,
    embed,
    expectation,
    hybrid_pure,
    identity,
    momentum,
    number,
    partial_trace_qubit,
    position,
    rotation,
    squeeze,
    squeezed_vacuum,
)
from .peaks import (
    REFERENCE_U,
    ModelViolationError,
    PeakDistribution,
    coefficients,
    db_to_delta,
    delta_p_from_coeffs,
    delta_to_db,
    input_r_for_db,
    optimal_distribution,
    optimize_u,
    perror_from_coeffs,
    stabilizer_overlap,
)
from .protocol import (
    GateSchedule,
    GateSpec,
    LatticeSpec,
    LogicalCircuit,
    apply_gate,
    build_logical_circuit,
    build_schedule,
    gate_unitary,
    prepare_logical,
    preparation_strengths,
    run,
    run_circuit,
    strengths,
)
from .fom import (
    ApproxGkpParams,
    EffectiveSqueezing,
    ZakGrid,
    approx_gkp_state,
    approx_params,
    default_zak_grid,
    displace_state,
    displacement_expectation,
    effective_squeezing,
    fidelity,
    hermite_functions,
    logical_pauli_max,
    logical_superposition_target,
    position_density,
    shift_error,
    wigner,
    zak_grid,
)
from .noise import (
    LindbladChannel,
    NoiseModel,
    evolve,
    noisy_gate,
    noisy_run,
    noisy_run_circuit,
    preset,
    single_channel_model,
)
from .experiments import (
    ExperimentConfig,
    ResultTable,
    run_experiment,
)

__version__ = "0.1.0"
