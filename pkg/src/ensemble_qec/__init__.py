"""Error identification and correction for qubits stored in atomic ensembles."""

from .core import (
    LEAK,
    R,
    R0,
    R1,
    S,
    HybridBasisState,
    Level,
    Occupation,
    PureState,
    RegisterConfig,
    SectorKey,
    dumps_state,
    fidelity_to_logical,
    inner_product,
    loads_state,
    new_logical_state,
    qubit_level,
    register_state,
    reservoir_state,
)
from .dynamics import (
    CompositeSequence,
    Drive,
    Transition,
    apply_drive,
    apply_sequence,
    build_coupling_matrix,
    cnot_gate,
    cz_gate,
    encode_one_atom,
    single_qubit_gate,
)
from .protocol import (
    DisturbanceCoeffs,
    TrajectoryOutcome,
    apply_atom_loss,
    apply_disturbance,
    detection_cycle_tree,
    encode_logical_pair,
    full_correction_tree,
    ionize_level,
    measure_rydberg_content,
    reconstruct_codeword,
    run_detection_cycle,
    run_full_correction,
)
from .pulses import DesignObjective, PulseParams, design_discriminator, su2_response, verify_discriminator

__version__ = "0.1.0"
