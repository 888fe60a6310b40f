//! Per-qubit gate programs for the semiclassical QFT at the physical and
//! repetition-code-protected levels, and the deterministic timeline used for
//! energy accounting.
//!
//! The semiclassical QFT replaces controlled rotations with rotations
//! conditioned on earlier measurement outcomes, so qubits interact only
//! through classical triggers. Worst-case accounting assumes every
//! conditional rotation fires.

use std::f64::consts::PI;

use thiserror::Error;

use crate::gate::{self, CnotRole, GateKind};
use crate::params::{CodeConfig, OperatingPoint, PhysicalConstants};

#[derive(Debug, Error, PartialEq)]
pub enum CircuitError {
    #[error("circuit needs at least one qubit")]
    EmptyCircuit,
    #[error("code distance must be odd, got {0}")]
    EvenDistance(u32),
    #[error("logical build requires code.enabled")]
    CodeDisabled,
    #[error(transparent)]
    Gate(#[from] gate::GateError),
}

/// Cost-breakdown category an interval is booked under.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, serde::Serialize)]
pub enum Category {
    StabilizationIdle,
    Prep,
    Rotations,
    Cnots,
    Measurement,
    QecRounds,
}

impl Category {
    pub const ALL: [Category; 6] = [
        Category::StabilizationIdle,
        Category::Prep,
        Category::Rotations,
        Category::Cnots,
        Category::Measurement,
        Category::QecRounds,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Category::StabilizationIdle => "stabilization_idle",
            Category::Prep => "prep",
            Category::Rotations => "rotations",
            Category::Cnots => "cnots",
            Category::Measurement => "measurement",
            Category::QecRounds => "qec_rounds",
        }
    }
}

/// What a physical row does in the layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum QubitRole {
    Data,
    QecAncilla,
    RzAncilla,
}

/// Ordered gate sequence of one (logical or physical) qubit as seen by the
/// phase-flip channel. `segment_marks` are the split points after which the
/// state is corrected (QEC round or final majority vote boundary).
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct QubitProgram {
    pub qubit_index: usize,
    pub gates: Vec<GateKind>,
    pub segment_marks: Vec<usize>,
}

/// Physical-qubit layout of a repetition-code circuit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct LogicalLayout {
    pub n_logical: usize,
    pub d_c: u32,
    pub n_b: u32,
    /// Data plus interleaved QEC ancillas: 2 d_c - 1.
    pub physical_qubits_per_logical: usize,
    /// Persistent rotation-ancilla pool per logical qubit.
    pub ancilla_pool_for_rz: usize,
}

/// Total physical qubits hosted by the layout, counting the rotation-ancilla
/// pool as persistent hardware.
pub fn physical_qubit_count(layout: &LogicalLayout) -> usize {
    layout.n_logical * (layout.physical_qubits_per_logical + layout.ancilla_pool_for_rz)
}

/// One gate scheduled inside a step.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct PlannedGate {
    pub row: usize,
    pub kind: GateKind,
    pub category: Category,
}

/// A set of gates that start simultaneously (one transversal layer). Steps
/// of one sequence run back to back.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct Step {
    pub gates: Vec<PlannedGate>,
    /// Rows held stabilized for the step duration without acting (ancillas
    /// holding entanglement mid-protocol).
    pub holds: Vec<usize>,
}

/// The work one unit performs in response to an earlier unit's measurement:
/// its conditional rotation (expanded) plus any QEC round that falls due.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct EraBlock {
    /// Index of the unit whose readout conditions this block.
    pub trigger: usize,
    pub steps: Vec<Step>,
}

/// Phased step sequences of one logical (or physical) qubit.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct UnitPlan {
    /// State preparation, executed from t = 0 in lockstep across units.
    pub prep_steps: Vec<Step>,
    /// One block per earlier unit, in trigger order.
    pub eras: Vec<EraBlock>,
    /// The five-step X-basis measurement closing the unit.
    pub meas_steps: Vec<Step>,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct RowInfo {
    pub role: QubitRole,
    pub unit: usize,
}

/// Fully expanded physical construction of a circuit: rows, per-unit phased
/// step sequences, and the per-unit channel programs.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct CircuitPlan {
    pub rows: Vec<RowInfo>,
    pub units: Vec<UnitPlan>,
    pub channel_programs: Vec<QubitProgram>,
    pub layout: Option<LogicalLayout>,
}

impl CircuitPlan {
    pub fn n_units(&self) -> usize {
        self.units.len()
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }
}

/// Gates of the five-step X-basis measurement protocol, in order.
pub fn measurement_protocol() -> [GateKind; 5] {
    [
        GateKind::ZRot(PI / 2.0),
        GateKind::MeasDeflate,
        GateKind::MeasInflate,
        GateKind::MeasDisplace,
        GateKind::MeasLongitudinalReadout,
    ]
}

/// Conditional-rotation angles received by qubit `j`, in firing order
/// (trigger qubit 0 first): pi/2^(j-i) for i = 0..j.
fn rotation_angles(j: usize) -> impl Iterator<Item = f64> {
    (0..j).map(move |i| PI / 2f64.powi((j - i) as i32))
}

fn channel_program(qubit_index: usize, code: Option<&CodeConfig>) -> QubitProgram {
    let j = qubit_index;
    let logical = code.is_some_and(|c| c.d_c > 1);
    // per-replica footprint of one logical rotation: the entangling and
    // disentangling transversal CNOTs bracket the rotation, so each data
    // qubit sees two control-side windows per conditional gate
    let per_rotation = if logical { 3 } else { 1 };
    let mut gates = Vec::with_capacity(1 + per_rotation * j + 5);
    gates.push(GateKind::PrepPlus);
    for theta in rotation_angles(j) {
        if logical {
            gates.push(GateKind::Cnot(CnotRole::Control));
            gates.push(GateKind::ZRot(theta));
            gates.push(GateKind::Cnot(CnotRole::Control));
        } else {
            gates.push(GateKind::ZRot(theta));
        }
    }
    gates.extend(measurement_protocol());

    let mut segment_marks = Vec::new();
    if logical {
        let code = code.expect("logical implies code");
        // boundary after the prepared-and-corrected state
        segment_marks.push(1);
        for k in 1..=j {
            if k as u32 % code.n_b == 0 {
                segment_marks.push(1 + per_rotation * k);
            }
        }
    }
    QubitProgram {
        qubit_index,
        gates,
        segment_marks,
    }
}

/// Programs of the physical (uncorrected) semiclassical QFT on `n` qubits.
///
/// Qubit j carries a preparation, j conditional rotations and the five-step
/// measurement protocol; all conditional rotations are counted (worst-case
/// all-ones outcomes).
pub fn build_physical_qft(n: usize) -> Result<Vec<QubitProgram>, CircuitError> {
    if n == 0 {
        return Err(CircuitError::EmptyCircuit);
    }
    Ok((0..n).map(|j| channel_program(j, None)).collect())
}

/// Per-logical-qubit programs of the repetition-code QFT, plus the layout.
///
/// The returned programs are the channel view (segment marks at QEC-round
/// boundaries); the physical expansion used for energy accounting comes from
/// [`plan_logical`].
pub fn build_logical_qft(
    n: usize,
    code: &CodeConfig,
) -> Result<(Vec<QubitProgram>, LogicalLayout), CircuitError> {
    if n == 0 {
        return Err(CircuitError::EmptyCircuit);
    }
    if !code.enabled {
        return Err(CircuitError::CodeDisabled);
    }
    if code.d_c % 2 == 0 {
        return Err(CircuitError::EvenDistance(code.d_c));
    }
    let programs = (0..n).map(|j| channel_program(j, Some(code))).collect();
    let layout = LogicalLayout {
        n_logical: n,
        d_c: code.d_c,
        n_b: code.n_b,
        physical_qubits_per_logical: 2 * code.d_c as usize - 1,
        ancilla_pool_for_rz: code.d_c as usize,
    };
    Ok((programs, layout))
}

fn single_gate_step(row: usize, kind: GateKind, category: Category) -> Step {
    Step {
        gates: vec![PlannedGate {
            row,
            kind,
            category,
        }],
        holds: Vec::new(),
    }
}

/// Physical plan of the uncorrected QFT: one row per qubit, one gate per step.
pub fn plan_physical(n: usize) -> Result<CircuitPlan, CircuitError> {
    let programs = build_physical_qft(n)?;
    let rows = (0..n)
        .map(|unit| RowInfo {
            role: QubitRole::Data,
            unit,
        })
        .collect();
    let mut units = Vec::with_capacity(n);
    for j in 0..n {
        let eras = rotation_angles(j)
            .enumerate()
            .map(|(i, theta)| EraBlock {
                trigger: i,
                steps: vec![single_gate_step(j, GateKind::ZRot(theta), Category::Rotations)],
            })
            .collect();
        units.push(UnitPlan {
            prep_steps: vec![single_gate_step(j, GateKind::PrepPlus, Category::Prep)],
            eras,
            meas_steps: measurement_protocol()
                .into_iter()
                .map(|kind| single_gate_step(j, kind, Category::Measurement))
                .collect(),
        });
    }
    Ok(CircuitPlan {
        rows,
        units,
        channel_programs: programs,
        layout: None,
    })
}

struct UnitRows {
    data: Vec<usize>,
    anc: Vec<usize>,
    rz: Vec<usize>,
}

fn qec_round_steps(rows: &UnitRows, steps: &mut Vec<Step>) {
    let d = rows.data.len();
    if d <= 1 {
        return; // distance-1 rounds have no ancillas and no work
    }
    let cat = Category::QecRounds;
    for _cycle in 0..d {
        steps.push(Step {
            gates: rows
                .anc
                .iter()
                .map(|&row| PlannedGate {
                    row,
                    kind: GateKind::PrepPlus,
                    category: cat,
                })
                .collect(),
            holds: Vec::new(),
        });
        // parity-check CNOTs in two layers: each ancilla couples to its left
        // then right data neighbor
        for layer in 0..2 {
            let mut gates = Vec::with_capacity(2 * (d - 1));
            for (a, &anc_row) in rows.anc.iter().enumerate() {
                let data_row = rows.data[a + layer];
                gates.push(PlannedGate {
                    row: data_row,
                    kind: GateKind::Cnot(CnotRole::Control),
                    category: cat,
                });
                gates.push(PlannedGate {
                    row: anc_row,
                    kind: GateKind::Cnot(CnotRole::Target),
                    category: cat,
                });
            }
            steps.push(Step {
                gates,
                holds: Vec::new(),
            });
        }
        for kind in measurement_protocol() {
            steps.push(Step {
                gates: rows
                    .anc
                    .iter()
                    .map(|&row| PlannedGate {
                        row,
                        kind,
                        category: cat,
                    })
                    .collect(),
                holds: Vec::new(),
            });
        }
    }
}

fn rotation_block_steps(rows: &UnitRows, theta: f64, steps: &mut Vec<Step>) {
    let d = rows.data.len();
    if d == 1 {
        // distance-1 degeneracy: rotate the data qubit directly
        steps.push(single_gate_step(
            rows.data[0],
            GateKind::ZRot(theta),
            Category::Rotations,
        ));
        return;
    }
    // ancilla-assisted logical rotation: entangle the pool, rotate one
    // ancilla, disentangle
    steps.push(Step {
        gates: rows
            .rz
            .iter()
            .map(|&row| PlannedGate {
                row,
                kind: GateKind::PrepPlus,
                category: Category::Prep,
            })
            .collect(),
        holds: Vec::new(),
    });
    let transversal = |rows: &UnitRows| -> Vec<PlannedGate> {
        rows.data
            .iter()
            .zip(&rows.rz)
            .flat_map(|(&data_row, &rz_row)| {
                [
                    PlannedGate {
                        row: data_row,
                        kind: GateKind::Cnot(CnotRole::Control),
                        category: Category::Cnots,
                    },
                    PlannedGate {
                        row: rz_row,
                        kind: GateKind::Cnot(CnotRole::Target),
                        category: Category::Cnots,
                    },
                ]
            })
            .collect()
    };
    steps.push(Step {
        gates: transversal(rows),
        holds: Vec::new(),
    });
    steps.push(Step {
        gates: vec![PlannedGate {
            row: rows.rz[0],
            kind: GateKind::ZRot(theta),
            category: Category::Rotations,
        }],
        // the other pool ancillas stay entangled and stabilized meanwhile
        holds: rows.rz[1..].to_vec(),
    });
    steps.push(Step {
        gates: transversal(rows),
        holds: Vec::new(),
    });
}

/// Physical plan of the repetition-code QFT.
pub fn plan_logical(n: usize, code: &CodeConfig) -> Result<CircuitPlan, CircuitError> {
    let (programs, layout) = build_logical_qft(n, code)?;
    let d = code.d_c as usize;
    let per_unit = 3 * d - 1;
    let mut rows = Vec::with_capacity(n * per_unit);
    for unit in 0..n {
        rows.extend((0..d).map(|_| RowInfo {
            role: QubitRole::Data,
            unit,
        }));
        rows.extend((0..d - 1).map(|_| RowInfo {
            role: QubitRole::QecAncilla,
            unit,
        }));
        rows.extend((0..d).map(|_| RowInfo {
            role: QubitRole::RzAncilla,
            unit,
        }));
    }

    let mut units = Vec::with_capacity(n);
    for j in 0..n {
        let base = j * per_unit;
        let unit_rows = UnitRows {
            data: (base..base + d).collect(),
            anc: (base + d..base + 2 * d - 1).collect(),
            rz: (base + 2 * d - 1..base + 3 * d - 1).collect(),
        };

        // logical |+> preparation: transversal prep then d_c rounds of
        // stabilizer measurement
        let mut prep_steps = vec![Step {
            gates: unit_rows
                .data
                .iter()
                .map(|&row| PlannedGate {
                    row,
                    kind: GateKind::PrepPlus,
                    category: Category::Prep,
                })
                .collect(),
            holds: Vec::new(),
        }];
        for _ in 0..d {
            qec_round_steps(&unit_rows, &mut prep_steps);
        }

        // conditional rotations, one per earlier qubit, each followed by a
        // QEC round once n_b logical gates have elapsed
        let mut eras = Vec::with_capacity(j);
        for (fired, theta) in rotation_angles(j).enumerate() {
            let mut steps = Vec::new();
            rotation_block_steps(&unit_rows, theta, &mut steps);
            if (fired + 1) as u32 % code.n_b == 0 {
                qec_round_steps(&unit_rows, &mut steps);
            }
            eras.push(EraBlock {
                trigger: fired,
                steps,
            });
        }

        // logical X measurement: the five-step protocol on every data qubit,
        // majority vote is classical
        let meas_steps = measurement_protocol()
            .into_iter()
            .map(|kind| Step {
                gates: unit_rows
                    .data
                    .iter()
                    .map(|&row| PlannedGate {
                        row,
                        kind,
                        category: Category::Measurement,
                    })
                    .collect(),
                holds: Vec::new(),
            })
            .collect();
        units.push(UnitPlan {
            prep_steps,
            eras,
            meas_steps,
        });
    }

    Ok(CircuitPlan {
        rows,
        units,
        channel_programs: programs,
        layout: Some(layout),
    })
}

/// One placed interval of the timeline.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Interval {
    pub start: f64,
    pub end: f64,
    pub kind: GateKind,
    pub category: Category,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct QubitTimeline {
    pub qubit_index: usize,
    pub role: QubitRole,
    pub unit: usize,
    pub intervals: Vec<Interval>,
}

impl QubitTimeline {
    /// First gate start to last interval end.
    pub fn active_span(&self) -> Option<(f64, f64)> {
        match (self.intervals.first(), self.intervals.last()) {
            (Some(first), Some(last)) => Some((first.start, last.end)),
            _ => None,
        }
    }
}

/// Deterministic schedule of a plan: per-qubit intervals including explicit
/// stabilized idles, plus the wall-clock duration.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct Timeline {
    pub qubits: Vec<QubitTimeline>,
    pub total_duration: f64,
}

impl Timeline {
    /// Number of qubits whose active span covers time `t`.
    pub fn active_qubits(&self, t: f64) -> usize {
        self.qubits
            .iter()
            .filter(|q| {
                q.active_span()
                    .is_some_and(|(start, end)| start <= t && t < end)
            })
            .count()
    }
}

/// How steps are sequenced across units.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize)]
pub enum ScheduleMode {
    /// One transversal step at a time, circuit order: after each measurement
    /// the conditioned rotations run unit by unit. Preparation is lockstep
    /// at t = 0. This is the canonical timeline.
    #[default]
    Serial,
    /// Conditional rotations fire on all targets as soon as the triggering
    /// readout completes; disjoint units proceed concurrently (sensitivity
    /// analysis).
    Concurrent,
}

impl ScheduleMode {
    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "serial" => Some(ScheduleMode::Serial),
            "concurrent" | "parallel" => Some(ScheduleMode::Concurrent),
            _ => None,
        }
    }
}

fn gate_duration(
    kind: GateKind,
    pc: &PhysicalConstants,
    op: &OperatingPoint,
    readout_time: f64,
) -> Result<f64, gate::GateError> {
    let kappa2 = crate::params::derived_kappa2(pc, op);
    Ok(match kind {
        GateKind::PrepPlus | GateKind::MeasInflate => 1.0 / kappa2,
        GateKind::ZRot(theta) => {
            if !(theta > 0.0 && theta <= 2.0 * PI) {
                return Err(gate::GateError::InvalidAngle(theta));
            }
            gate::zrot_duration(op, theta)
        }
        GateKind::Cnot(_) => {
            let g = op.g_cnot.ok_or(gate::GateError::MissingGCnot)?;
            gate::cnot_duration(op, g)
        }
        GateKind::MeasDeflate => pc.a3 / kappa2,
        GateKind::MeasDisplace => 0.0,
        GateKind::MeasLongitudinalReadout => readout_time,
        GateKind::Idle(tau) => {
            if !(tau >= 0.0) {
                return Err(gate::GateError::NegativeIdle(tau));
            }
            tau
        }
    })
}

struct Placer<'a> {
    pc: &'a PhysicalConstants,
    op: &'a OperatingPoint,
    readout_time: f64,
    intervals: Vec<Vec<Interval>>,
}

impl Placer<'_> {
    /// Place every gate of the step at `start`; returns the step end.
    fn place(&mut self, step: &Step, start: f64) -> Result<f64, CircuitError> {
        let mut step_end = start;
        for gate in &step.gates {
            let duration = gate_duration(gate.kind, self.pc, self.op, self.readout_time)?;
            let end = start + duration;
            self.intervals[gate.row].push(Interval {
                start,
                end,
                kind: gate.kind,
                category: gate.category,
            });
            step_end = step_end.max(end);
        }
        for &row in &step.holds {
            self.intervals[row].push(Interval {
                start,
                end: step_end,
                kind: GateKind::Idle(step_end - start),
                category: Category::StabilizationIdle,
            });
        }
        Ok(step_end)
    }

    fn place_all(&mut self, steps: &[Step], mut cursor: f64) -> Result<f64, CircuitError> {
        for step in steps {
            cursor = self.place(step, cursor)?;
        }
        Ok(cursor)
    }
}

/// Lay the plan out in time.
///
/// Preparation runs in lockstep from t = 0 for every unit. In serial mode
/// the remaining steps execute one at a time in circuit order (measurement
/// of unit i, then the conditioned blocks on later units); in concurrent
/// mode each unit advances on its own cursor, waiting only for its trigger's
/// readout. Data rows idle at stabilization power inside their active span;
/// ancilla rows consume energy only while active. A qubit has no intervals
/// after its final readout.
pub fn schedule(
    plan: &CircuitPlan,
    pc: &PhysicalConstants,
    op: &OperatingPoint,
    mode: ScheduleMode,
) -> Result<Timeline, CircuitError> {
    let mut placer = Placer {
        pc,
        op,
        readout_time: gate::readout_optimal_time(pc),
        intervals: vec![Vec::new(); plan.n_rows()],
    };
    let n = plan.n_units();
    let mut readout_end = vec![0.0f64; n];

    match mode {
        ScheduleMode::Serial => {
            let mut prep_end = 0.0f64;
            for unit in &plan.units {
                prep_end = prep_end.max(placer.place_all(&unit.prep_steps, 0.0)?);
            }
            let mut cursor = prep_end;
            for i in 0..n {
                cursor = placer.place_all(&plan.units[i].meas_steps, cursor)?;
                readout_end[i] = cursor;
                for unit in plan.units.iter().skip(i + 1) {
                    let block = &unit.eras[i];
                    debug_assert_eq!(block.trigger, i);
                    cursor = placer.place_all(&block.steps, cursor)?;
                }
            }
        }
        ScheduleMode::Concurrent => {
            for (i, unit) in plan.units.iter().enumerate() {
                let mut cursor = placer.place_all(&unit.prep_steps, 0.0)?;
                for block in &unit.eras {
                    debug_assert!(block.trigger < i);
                    cursor = placer.place_all(&block.steps, cursor.max(readout_end[block.trigger]))?;
                }
                readout_end[i] = placer.place_all(&unit.meas_steps, cursor)?;
            }
        }
    }

    let total_duration = readout_end.iter().copied().fold(0.0, f64::max);
    let mut intervals = placer.intervals;
    let qubits = plan
        .rows
        .iter()
        .enumerate()
        .map(|(row, info)| {
            let mut list = std::mem::take(&mut intervals[row]);
            if info.role == QubitRole::Data {
                list = fill_idle(list);
            }
            QubitTimeline {
                qubit_index: row,
                role: info.role,
                unit: info.unit,
                intervals: list,
            }
        })
        .collect();

    Ok(Timeline {
        qubits,
        total_duration,
    })
}

/// Convenience wrapper: schedule physical-QFT programs directly.
pub fn schedule_programs(
    programs: &[QubitProgram],
    pc: &PhysicalConstants,
    op: &OperatingPoint,
    mode: ScheduleMode,
) -> Result<Timeline, CircuitError> {
    let plan = plan_physical(programs.len())?;
    schedule(&plan, pc, op, mode)
}

fn fill_idle(mut intervals: Vec<Interval>) -> Vec<Interval> {
    intervals.sort_by(|a, b| a.start.total_cmp(&b.start));
    let mut filled = Vec::with_capacity(intervals.len() * 2);
    let mut cursor: Option<f64> = None;
    for interval in intervals {
        if let Some(prev_end) = cursor {
            if interval.start > prev_end {
                filled.push(Interval {
                    start: prev_end,
                    end: interval.start,
                    kind: GateKind::Idle(interval.start - prev_end),
                    category: Category::StabilizationIdle,
                });
            }
        }
        cursor = Some(cursor.map_or(interval.end, |c: f64| c.max(interval.end)));
        filled.push(interval);
    }
    filled
}

/// Build the right plan for a configuration (physical when the code is
/// disabled).
pub fn plan_circuit(n: usize, code: &CodeConfig) -> Result<CircuitPlan, CircuitError> {
    if code.enabled {
        plan_logical(n, code)
    } else {
        plan_physical(n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::table_iv_config;
    use approx::assert_relative_eq;

    fn code(d_c: u32, n_b: u32) -> CodeConfig {
        CodeConfig {
            d_c,
            n_b,
            enabled: true,
        }
    }

    #[test]
    fn single_qubit_program_is_prep_plus_measurement() {
        let programs = build_physical_qft(1).unwrap();
        assert_eq!(programs.len(), 1);
        let expected: Vec<GateKind> = std::iter::once(GateKind::PrepPlus)
            .chain(measurement_protocol())
            .collect();
        assert_eq!(programs[0].gates, expected);
        assert!(programs[0].segment_marks.is_empty());
    }

    #[test]
    fn three_qubit_last_program_has_quarter_and_half_turns() {
        let programs = build_physical_qft(3).unwrap();
        let rotations: Vec<f64> = programs[2]
            .gates
            .iter()
            .take(3)
            .filter_map(|g| match g {
                GateKind::ZRot(t) => Some(*t),
                _ => None,
            })
            .collect();
        assert_eq!(rotations.len(), 2);
        assert_relative_eq!(rotations[0], PI / 4.0);
        assert_relative_eq!(rotations[1], PI / 2.0);
    }

    #[test]
    fn last_qubit_gate_count_for_ten_qubits() {
        let programs = build_physical_qft(10).unwrap();
        assert_eq!(programs[9].gates.len(), 1 + 9 + 5);
    }

    #[test]
    fn gate_count_law_holds_up_to_64() {
        for n in 1..=64 {
            let programs = build_physical_qft(n).unwrap();
            let total: usize = programs.iter().map(|p| p.gates.len()).sum();
            assert_eq!(total, n + n * (n - 1) / 2 + 5 * n, "n={n}");
        }
    }

    #[test]
    fn every_program_ends_with_the_measurement_protocol() {
        for n in [1, 2, 7] {
            for program in build_physical_qft(n).unwrap() {
                let tail = &program.gates[program.gates.len() - 5..];
                assert_eq!(tail, measurement_protocol());
            }
        }
        let (programs, _) = build_logical_qft(4, &code(5, 2)).unwrap();
        for program in programs {
            let tail = &program.gates[program.gates.len() - 5..];
            assert_eq!(tail, measurement_protocol());
        }
    }

    #[test]
    fn zero_qubits_is_an_error() {
        assert_eq!(build_physical_qft(0), Err(CircuitError::EmptyCircuit));
        assert!(build_logical_qft(0, &code(3, 1)).is_err());
    }

    #[test]
    fn even_distance_is_an_error() {
        assert_eq!(
            build_logical_qft(2, &code(4, 1)).unwrap_err(),
            CircuitError::EvenDistance(4)
        );
    }

    #[test]
    fn distance_one_logical_build_degenerates_to_physical() {
        let physical = build_physical_qft(5).unwrap();
        let (logical, _) = build_logical_qft(5, &code(1, u32::MAX)).unwrap();
        assert_eq!(physical, logical);
        // and the plan carries no ancilla work
        let plan = plan_logical(5, &code(1, u32::MAX)).unwrap();
        let physical_plan = plan_physical(5).unwrap();
        let flatten = |unit: &UnitPlan| -> Vec<GateKind> {
            unit.prep_steps
                .iter()
                .chain(unit.eras.iter().flat_map(|e| e.steps.iter()))
                .chain(unit.meas_steps.iter())
                .flat_map(|s| s.gates.iter().map(|g| g.kind))
                .collect()
        };
        for (a, b) in plan.units.iter().zip(&physical_plan.units) {
            assert_eq!(flatten(a), flatten(b));
        }
    }

    #[test]
    fn segment_marks_follow_round_insertion() {
        // one rotation on logical qubit 1 at n_b=1: boundary after prep and
        // after the rotation
        let (programs, _) = build_logical_qft(2, &code(3, 1)).unwrap();
        assert_eq!(programs[1].segment_marks, vec![1, 2]);
        // seven rotations at n_b=3: rounds after rotations 3 and 6
        let program = channel_program(7, Some(&code(3, 3)));
        assert_eq!(program.segment_marks, vec![1, 4, 7]);
        for w in program.segment_marks.windows(2) {
            assert!(w[0] < w[1], "marks strictly increasing");
        }
    }

    #[test]
    fn qec_round_matches_distance_five_structure() {
        // one round at d=5: 5 cycles x 4 ancillas x (prep + 2 CNOTs + 5-step
        // measurement)
        let unit_rows = UnitRows {
            data: (0..5).collect(),
            anc: (5..9).collect(),
            rz: (9..14).collect(),
        };
        let mut steps = Vec::new();
        qec_round_steps(&unit_rows, &mut steps);
        assert_eq!(steps.len(), 5 * 8);
        let mut anc_preps = 0;
        let mut anc_cnot_targets = 0;
        let mut anc_readouts = 0;
        for step in &steps {
            for gate in &step.gates {
                match gate.kind {
                    GateKind::PrepPlus if unit_rows.anc.contains(&gate.row) => anc_preps += 1,
                    GateKind::Cnot(CnotRole::Target) => anc_cnot_targets += 1,
                    GateKind::MeasLongitudinalReadout => anc_readouts += 1,
                    _ => {}
                }
            }
        }
        assert_eq!(anc_preps, 5 * 4);
        assert_eq!(anc_cnot_targets, 5 * 4 * 2);
        assert_eq!(anc_readouts, 5 * 4);
    }

    #[test]
    fn physical_qubit_counts() {
        let layout = LogicalLayout {
            n_logical: 1,
            d_c: 5,
            n_b: 1,
            physical_qubits_per_logical: 9,
            ancilla_pool_for_rz: 5,
        };
        assert_eq!(physical_qubit_count(&layout), 14);
        let (_, layout4) = build_logical_qft(4, &code(5, 1)).unwrap();
        assert_eq!(layout4.physical_qubits_per_logical, 9);
        assert_eq!(physical_qubit_count(&layout4), 4 * 14);
        let (_, layout1) = build_logical_qft(3, &code(1, 1)).unwrap();
        assert_eq!(physical_qubit_count(&layout1), 3 * 2);
    }

    #[test]
    fn single_qubit_schedule_has_no_idle() {
        let cfg = table_iv_config();
        let plan = plan_physical(1).unwrap();
        let timeline = schedule(&plan, &cfg.constants, &cfg.operating_point, ScheduleMode::Concurrent)
            .unwrap();
        let q = &timeline.qubits[0];
        assert!(q
            .intervals
            .iter()
            .all(|iv| iv.category != Category::StabilizationIdle));
        let sum: f64 = q.intervals.iter().map(|iv| iv.end - iv.start).sum();
        assert_relative_eq!(sum, timeline.total_duration, max_relative = 1e-12);
    }

    #[test]
    fn two_qubit_schedule_matches_hand_computed_duration() {
        let cfg = table_iv_config();
        let pc = &cfg.constants;
        let op = &cfg.operating_point;
        let plan = plan_physical(2).unwrap();
        let timeline = schedule(&plan, pc, op, ScheduleMode::Concurrent).unwrap();
        let kappa2 = crate::params::derived_kappa2(pc, op);
        let t_meas = gate::zrot_duration(op, PI / 2.0)
            + pc.a3 / kappa2
            + 1.0 / kappa2
            + gate::readout_optimal_time(pc);
        let t_q0 = 1.0 / kappa2 + t_meas;
        let expected = t_q0 + gate::zrot_duration(op, PI / 2.0) + t_meas;
        assert_relative_eq!(timeline.total_duration, expected, max_relative = 1e-12);
        // qubit 1 idles between its prep and the triggered rotation
        let idles: Vec<_> = timeline.qubits[1]
            .intervals
            .iter()
            .filter(|iv| iv.category == Category::StabilizationIdle)
            .collect();
        assert_eq!(idles.len(), 1);
        assert_relative_eq!(idles[0].end - idles[0].start, t_meas, max_relative = 1e-12);
    }

    #[test]
    fn no_interval_follows_a_data_readout() {
        let cfg = table_iv_config();
        let mut op = cfg.operating_point.clone();
        op.g_cnot = Some(2.0 * PI * 1e6);
        let plan = plan_logical(3, &code(3, 1)).unwrap();
        let timeline = schedule(&plan, &cfg.constants, &op, ScheduleMode::Concurrent).unwrap();
        for q in &timeline.qubits {
            if q.role != QubitRole::Data {
                continue;
            }
            let last = q.intervals.last().unwrap();
            assert_eq!(last.kind, GateKind::MeasLongitudinalReadout);
        }
    }

    #[test]
    fn timeline_conservation_busy_plus_idle_equals_span() {
        let cfg = table_iv_config();
        let mut op = cfg.operating_point.clone();
        op.g_cnot = Some(2.0 * PI * 1e6);
        let plan = plan_logical(2, &code(5, 2)).unwrap();
        let timeline = schedule(&plan, &cfg.constants, &op, ScheduleMode::Concurrent).unwrap();
        for q in &timeline.qubits {
            if q.role != QubitRole::Data {
                continue;
            }
            let (start, end) = q.active_span().unwrap();
            let covered: f64 = q.intervals.iter().map(|iv| iv.end - iv.start).sum();
            assert_relative_eq!(covered, end - start, max_relative = 1e-9);
            for w in q.intervals.windows(2) {
                assert!(w[1].start >= w[0].end - 1e-18, "non-overlapping ordered");
            }
        }
    }

    #[test]
    fn serial_mode_is_never_shorter() {
        let cfg = table_iv_config();
        let mut op = cfg.operating_point.clone();
        op.g_cnot = Some(2.0 * PI * 1e6);
        for (n, code_cfg) in [(3, code(1, 1)), (2, code(3, 1))] {
            let plan = plan_logical(n, &code_cfg).unwrap();
            let concurrent =
                schedule(&plan, &cfg.constants, &op, ScheduleMode::Concurrent).unwrap();
            let serial = schedule(&plan, &cfg.constants, &op, ScheduleMode::Serial).unwrap();
            assert!(serial.total_duration >= concurrent.total_duration - 1e-18);
        }
    }

    #[test]
    fn active_qubit_count_drops_after_measurement() {
        let cfg = table_iv_config();
        let plan = plan_physical(3).unwrap();
        let timeline = schedule(&plan, &cfg.constants, &cfg.operating_point, ScheduleMode::Concurrent)
            .unwrap();
        let early = timeline.total_duration * 0.05;
        let late = timeline.total_duration * 0.95;
        assert_eq!(timeline.active_qubits(early), 3);
        assert!(timeline.active_qubits(late) <= 2);
    }
}
