//! Integration of the timeline against gate powers: total energy, runtime
//! and per-category breakdowns at the microscopic, macroscopic and billed
//! levels.

use rayon::prelude::*;
use thiserror::Error;

use crate::circuit::{Category, Timeline};
use crate::gate::{self, GateError, GateKind};
use crate::params::{
    BilledScenario, EnergyLevel, MacroFactors, OperatingPoint, PhysicalConstants,
};

#[derive(Debug, Error, PartialEq)]
pub enum EnergyError {
    #[error("billed accounting requires a BilledScenario; use `billed()`")]
    MissingScenario,
    #[error(transparent)]
    Gate(#[from] GateError),
}

/// Aggregated cost of a run.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct CostReport {
    pub level: EnergyLevel,
    /// J, already multiplied by `repetitions_multiplier`.
    pub total_energy: f64,
    /// s, wall-clock duration of one repetition.
    pub total_time: f64,
    pub physical_qubits: usize,
    pub breakdown: Vec<(Category, f64)>,
    pub repetitions_multiplier: u64,
}

impl CostReport {
    pub fn category(&self, category: Category) -> f64 {
        self.breakdown
            .iter()
            .find(|(c, _)| *c == category)
            .map_or(0.0, |(_, e)| *e)
    }

    /// CSV column order used by every emitter.
    pub const CSV_HEADER: &'static str = "level,total_energy_j,total_time_s,physical_qubits,\
        stabilization_idle_j,prep_j,rotations_j,cnots_j,measurement_j,qec_rounds_j,repetitions";

    pub fn csv_row(&self) -> String {
        let cats: Vec<String> = Category::ALL
            .iter()
            .map(|&c| format!("{:e}", self.category(c)))
            .collect();
        format!(
            "{},{:e},{:e},{},{},{}",
            self.level,
            self.total_energy,
            self.total_time,
            self.physical_qubits,
            cats.join(","),
            self.repetitions_multiplier
        )
    }
}

/// Pairwise tree sum: deterministic reduction independent of chunking.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        2 => values[0] + values[1],
        n => {
            let mid = n / 2;
            pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
        }
    }
}

fn interval_power(
    kind: GateKind,
    pc: &PhysicalConstants,
    mf: &MacroFactors,
    op: &OperatingPoint,
    level: EnergyLevel,
) -> Result<f64, GateError> {
    Ok(gate::gate_cost_at(kind, pc, mf, op, level)?.power)
}

/// Integrate the timeline at a drive-accounting level.
///
/// Each interval contributes power x duration under its category; idle
/// intervals hold stabilization power. `Billed` is rejected here because it
/// is a facility-level model, not a per-interval one.
pub fn account(
    timeline: &Timeline,
    pc: &PhysicalConstants,
    mf: &MacroFactors,
    op: &OperatingPoint,
    level: EnergyLevel,
    repetitions_multiplier: u64,
) -> Result<CostReport, EnergyError> {
    if level == EnergyLevel::Billed {
        return Err(EnergyError::MissingScenario);
    }
    let per_qubit: Vec<[f64; 6]> = timeline
        .qubits
        .par_iter()
        .map(|q| {
            let mut cats = [0.0f64; 6];
            let energies: Vec<(usize, f64)> = q
                .intervals
                .iter()
                .map(|iv| {
                    let power = interval_power(iv.kind, pc, mf, op, level)
                        .expect("plan gates are valid for costing");
                    let slot = Category::ALL
                        .iter()
                        .position(|&c| c == iv.category)
                        .expect("known category");
                    (slot, power * (iv.end - iv.start))
                })
                .collect();
            for slot in 0..6 {
                let vals: Vec<f64> = energies
                    .iter()
                    .filter(|(s, _)| *s == slot)
                    .map(|(_, e)| *e)
                    .collect();
                cats[slot] = pairwise_sum(&vals);
            }
            cats
        })
        .collect();

    let reps = repetitions_multiplier.max(1) as f64;
    let mut breakdown = Vec::with_capacity(6);
    for (slot, &category) in Category::ALL.iter().enumerate() {
        let vals: Vec<f64> = per_qubit.iter().map(|c| c[slot]).collect();
        breakdown.push((category, reps * pairwise_sum(&vals)));
    }
    let total_energy = pairwise_sum(&breakdown.iter().map(|(_, e)| *e).collect::<Vec<_>>());
    Ok(CostReport {
        level,
        total_energy,
        total_time: timeline.total_duration,
        physical_qubits: timeline.qubits.len(),
        breakdown,
        repetitions_multiplier: repetitions_multiplier.max(1),
    })
}

/// Facility-level billed energy: wall-plug power per qubit x qubit count x
/// wall-clock time. The facility draw runs continuously, so no per-gate
/// integration applies.
pub fn billed(
    timeline: &Timeline,
    physical_qubits: usize,
    scenario: &BilledScenario,
    repetitions_multiplier: u64,
) -> CostReport {
    let reps = repetitions_multiplier.max(1) as f64;
    let total_energy =
        reps * scenario.power_per_qubit * physical_qubits as f64 * timeline.total_duration;
    CostReport {
        level: EnergyLevel::Billed,
        total_energy,
        total_time: timeline.total_duration,
        physical_qubits,
        breakdown: vec![(Category::StabilizationIdle, total_energy)],
        repetitions_multiplier: repetitions_multiplier.max(1),
    }
}
