//! Resource estimator for the semiclassical quantum Fourier transform on a
//! dissipatively stabilized cat-qubit platform.
//!
//! The crate models per-gate power, duration and phase-flip probability,
//! builds the physical and repetition-code circuits, integrates energy over
//! a deterministic timeline, composes per-qubit phase-flip channels into
//! fidelities, optimizes the operating point under a last-qubit fidelity
//! floor, and compares the result against classical FFT baselines including
//! the Lambert-W crossover closed form.

pub mod circuit;
pub mod classical;
pub mod energy;
pub mod fidelity;
pub mod gate;
pub mod mc;
pub mod optimize;
pub mod params;
pub mod pipeline;

pub use circuit::{
    build_logical_qft, build_physical_qft, physical_qubit_count, schedule, CircuitPlan,
    LogicalLayout, QubitProgram, Timeline,
};
pub use classical::{
    classical_energy, classical_time, compare, crossover_closed_form, fft_flops, lambert_w,
    CompareMode, CrossoverResult, LambertBranch,
};
pub use energy::{account, billed, CostReport};
pub use fidelity::{compose_channel, logical_suppression, qubit_fidelity, total_fidelity,
    ChannelReport};
pub use gate::{
    epsilon_z_for_target_pz, g_cnot_for_target_pz, gate_cost, readout_fidelity,
    readout_optimal_time, stabilization_power, GateCost, GateKind,
};
pub use mc::{enumerate_logical, sample_channel, sample_segmented, McConfig};
pub use optimize::{fit, optimize, scaling_curve, FitModel, OptimizationResult, ScalingFit,
    SearchSpace};
pub use params::{
    derived_kappa2, epsilon_d, load_config, parse_config, CodeConfig, Config, EnergyLevel,
    MacroFactors, OperatingPoint, PhysicalConstants,
};
