//! End-to-end evaluation of one design point: circuit construction, timing,
//! energy and fidelity.
//!
//! Two routes produce the same numbers. The reference route materializes the
//! plan, schedules it and integrates the timeline interval by interval. The
//! fast route aggregates the identical era structure in closed form and is
//! what the optimizer sweeps; the two are pinned against each other in
//! tests.

use std::f64::consts::PI;

use thiserror::Error;

use crate::circuit::{self, Category, CircuitError, ScheduleMode, Timeline};
use crate::energy::{self, CostReport, EnergyError};
use crate::fidelity::{self, ChannelReport, FidelityError};
use crate::gate::{self, GateError};
use crate::params::{
    CodeConfig, Config, EnergyLevel, GCnotMode, MacroFactors, OperatingPoint, PhysicalConstants,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error(transparent)]
    Gate(#[from] GateError),
    #[error(transparent)]
    Fidelity(#[from] FidelityError),
    #[error(transparent)]
    Energy(#[from] EnergyError),
}

/// Channel-model switches (both default off to match the gate-only channel).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ChannelFlags {
    pub idle_error: bool,
    pub include_readout_fidelity: bool,
}

impl ChannelFlags {
    pub fn from_config(cfg: &Config) -> Self {
        ChannelFlags {
            idle_error: cfg.idle_error,
            include_readout_fidelity: cfg.include_readout_fidelity,
        }
    }
}

/// Pick the CNOT coupling for a point: the configured value in `Fixed` mode,
/// otherwise the inversion at an error target equal to the Z(pi/2) error at
/// the same point (falling back to the reachable minimum when the target is
/// below it).
pub fn resolve_g_cnot(
    pc: &PhysicalConstants,
    op: &OperatingPoint,
    mode: GCnotMode,
    level: EnergyLevel,
) -> Result<f64, GateError> {
    match mode {
        GCnotMode::Fixed => op.g_cnot.ok_or(GateError::MissingGCnot),
        GCnotMode::Derived => {
            let target = gate::zrot_pz(pc, op, PI / 2.0).clamp(0.0, 0.5);
            let level = match level {
                EnergyLevel::Billed => EnergyLevel::Macroscopic,
                other => other,
            };
            match gate::g_cnot_for_target_pz(target, pc, op, level) {
                Ok(g) => Ok(g),
                Err(GateError::InfeasibleTarget { .. }) => {
                    Ok(gate::cnot_control_pz_minimum(pc, op, level)?.1)
                }
                Err(e) => Err(e),
            }
        }
    }
}

/// Precomputed durations, per-level powers and channel error rates of one
/// operating point (with the CNOT coupling already resolved).
#[derive(Debug, Clone)]
pub struct PointCosts {
    pub t_prep: f64,
    pub t_cnot: f64,
    pub t_zhalf: f64,
    pub t_def: f64,
    pub t_inf: f64,
    pub t_readout: f64,
    /// duration of a Z rotation per radian of angle
    pub rot_per_rad: f64,
    /// five-step measurement protocol duration
    pub d_meas: f64,
    /// one parity-check cycle
    pub d_cycle: f64,
    /// [micro, macro]
    pub p_pump: [f64; 2],
    pub p_stab: [f64; 2],
    pub p_z: [f64; 2],
    pub p_c: [f64; 2],
    pub p_l: [f64; 2],
    /// phase flip per radian of rotation angle
    pub pz_per_rad: f64,
    pub pz_zhalf: f64,
    pub pz_def: f64,
    pub pz_inf: f64,
    /// free-decay phase flip per second of stabilized idle
    pub pz_idle_per_s: f64,
    pub readout_fidelity_at_optimum: f64,
    pub g_cnot: f64,
}

impl PointCosts {
    pub fn new(
        pc: &PhysicalConstants,
        mf: &MacroFactors,
        op: &OperatingPoint,
    ) -> Result<Self, GateError> {
        Self::with_readout_time(pc, mf, op, gate::readout_optimal_time(pc))
    }

    /// Like [`PointCosts::new`] with the readout optimum precomputed; the
    /// optimum depends only on the constants, so sweeps hoist it.
    pub fn with_readout_time(
        pc: &PhysicalConstants,
        mf: &MacroFactors,
        op: &OperatingPoint,
        t_readout: f64,
    ) -> Result<Self, GateError> {
        let g = op.g_cnot.ok_or(GateError::MissingGCnot)?;
        let kappa2 = crate::params::derived_kappa2(pc, op);
        let eps_d = crate::params::epsilon_d(pc, op);
        let drive = pc.d_const * eps_d * eps_d;
        let pump = pc.p_const * (pc.kappa_b / 4.0) * kappa2;
        let zp = pc.z_const * op.epsilon_z * op.epsilon_z;
        let cp = pc.c_const * g * g;
        let lp = pc.l_const * pc.g_l * pc.g_l;
        let t_zhalf = gate::zrot_duration(op, PI / 2.0);
        let t_prep = 1.0 / kappa2;
        let t_cnot = gate::cnot_duration(op, g);
        let t_def = pc.a3 / kappa2;
        let t_inf = 1.0 / kappa2;
        let d_meas = t_zhalf + t_def + t_inf + t_readout;
        Ok(PointCosts {
            t_prep,
            t_cnot,
            t_zhalf,
            t_def,
            t_inf,
            t_readout,
            rot_per_rad: 1.0 / (4.0 * op.alpha.abs() * op.epsilon_z),
            d_meas,
            d_cycle: t_prep + 2.0 * t_cnot + d_meas,
            p_pump: [pump, mf.m_p * pump],
            p_stab: [pump + drive, mf.m_p * pump + mf.m_d * drive],
            p_z: [zp, mf.m_z * zp],
            p_c: [cp, mf.m_c * cp],
            p_l: [lp, mf.m_l * lp],
            pz_per_rad: gate::zrot_pz(pc, op, 1.0),
            pz_zhalf: gate::zrot_pz(pc, op, PI / 2.0).clamp(0.0, 0.5),
            pz_def: gate::deflate_pz(pc, op).clamp(0.0, 0.5),
            pz_inf: gate::inflate_pz(pc, op).clamp(0.0, 0.5),
            pz_idle_per_s: gate::idle_pz(pc, op, 1.0),
            readout_fidelity_at_optimum: gate::readout_fidelity(t_readout, pc),
            g_cnot: g,
        })
    }

    fn pz_rot(&self, theta: f64) -> f64 {
        (self.pz_per_rad * theta).clamp(0.0, 0.5)
    }
}

/// Era-walk timing of the whole circuit: per-unit readout-completion times
/// and aggregate busy times, mirroring the scheduled timeline.
#[derive(Debug, Clone)]
pub struct UnitTiming {
    /// readout completion per unit
    pub readout_end: Vec<f64>,
    /// total Z-rotation time per unit (sum over its conditional rotations)
    pub rot_time: Vec<f64>,
    /// QEC rounds executed per unit (prep rounds included)
    pub rounds: Vec<u64>,
}

fn effective_distance(code: &CodeConfig) -> usize {
    if code.enabled {
        code.d_c as usize
    } else {
        1
    }
}

/// Walk the era structure: all units prepare at t=0 in lockstep; in serial
/// mode the steps then execute one at a time in circuit order, in concurrent
/// mode conditional rotations wait only for their trigger's readout. Rounds
/// follow every n_b logical gates, measurement closes each unit.
pub fn unit_timing(
    n: usize,
    code: &CodeConfig,
    costs: &PointCosts,
    mode: ScheduleMode,
) -> UnitTiming {
    let d = effective_distance(code);
    let d_round = if d > 1 {
        d as f64 * costs.d_cycle
    } else {
        0.0
    };
    let block_overhead = if d > 1 {
        costs.t_prep + 2.0 * costs.t_cnot
    } else {
        0.0
    };
    let prep_phase = costs.t_prep + d as f64 * d_round;
    let base_rounds = if d > 1 { d as u64 } else { 0 };

    let mut readout_end = vec![0.0f64; n];
    let mut rot_time = vec![0.0f64; n];
    let mut rounds = vec![base_rounds; n];

    match mode {
        ScheduleMode::Serial => {
            let mut cursor = prep_phase;
            for i in 0..n {
                cursor += costs.d_meas;
                readout_end[i] = cursor;
                for j in i + 1..n {
                    let theta = PI / 2f64.powi((j - i) as i32);
                    let t_rot = theta * costs.rot_per_rad;
                    rot_time[j] += t_rot;
                    cursor += block_overhead + t_rot;
                    if d > 1 && (i + 1) as u32 % code.n_b == 0 {
                        cursor += d_round;
                        rounds[j] += 1;
                    }
                }
            }
        }
        ScheduleMode::Concurrent => {
            for j in 0..n {
                let mut cursor = prep_phase;
                for i in 0..j {
                    let theta = PI / 2f64.powi((j - i) as i32);
                    let t_rot = theta * costs.rot_per_rad;
                    rot_time[j] += t_rot;
                    let start = cursor.max(readout_end[i]);
                    cursor = start + block_overhead + t_rot;
                    if d > 1 && (i + 1) as u32 % code.n_b == 0 {
                        cursor += d_round;
                        rounds[j] += 1;
                    }
                }
                readout_end[j] = cursor + costs.d_meas;
            }
        }
    }
    UnitTiming {
        readout_end,
        rot_time,
        rounds,
    }
}

/// Energy breakdown of one level, fast route.
fn energy_breakdown(
    n: usize,
    code: &CodeConfig,
    costs: &PointCosts,
    timing: &UnitTiming,
    level_idx: usize,
) -> [f64; 6] {
    let d = effective_distance(code) as f64;
    let ancillas = d - 1.0;
    let p_stab = costs.p_stab[level_idx];
    let p_pump = costs.p_pump[level_idx];
    let p_z = costs.p_z[level_idx];
    let p_c = costs.p_c[level_idx];
    let p_l = costs.p_l[level_idx];

    let e_meas_per_row = costs.t_zhalf * (p_stab + p_z)
        + costs.t_def * p_pump
        + costs.t_inf * p_stab
        + costs.t_readout * p_l;
    // one parity-check round: d cycles of ancilla work plus the data-side
    // CNOT controls
    let e_round = d
        * (ancillas
            * (costs.t_prep * p_stab
                + 2.0 * costs.t_cnot * (p_stab + p_c)
                + e_meas_per_row)
            + 2.0 * ancillas * costs.t_cnot * p_stab);
    let busy_round_data = 2.0 * d * ancillas * costs.t_cnot;

    let mut cats = [0.0f64; 6];
    let idle_slot = 0;
    debug_assert_eq!(Category::ALL[idle_slot], Category::StabilizationIdle);
    for j in 0..n {
        let blocks = j as f64;
        let rounds = timing.rounds[j] as f64;
        let rot_time = timing.rot_time[j];
        let lifetime = timing.readout_end[j];

        // prep: initial transversal prep plus the rotation-pool preps
        let mut e_prep = d * costs.t_prep * p_stab;
        let mut busy_data = d * costs.t_prep + rounds * busy_round_data + d * costs.d_meas;
        let mut e_cnots = 0.0;
        let mut e_idle = 0.0;
        if d > 1.0 {
            e_prep += blocks * d * costs.t_prep * p_stab;
            e_cnots += blocks * 2.0 * d * costs.t_cnot * (2.0 * p_stab + p_c);
            busy_data += blocks * 2.0 * d * costs.t_cnot;
            // pool ancillas held stabilized while one of them rotates
            e_idle += ancillas * rot_time * p_stab;
        } else {
            busy_data += rot_time;
        }
        let e_rot = rot_time * (p_stab + p_z);
        let e_meas = d * e_meas_per_row;
        e_idle += (d * lifetime - busy_data) * p_stab;

        cats[0] += e_idle;
        cats[1] += e_prep;
        cats[2] += e_rot;
        cats[3] += e_cnots;
        cats[4] += e_meas;
        cats[5] += rounds * e_round;
    }
    cats
}

/// Per-gate channel probabilities of one unit, in program order. Logical
/// rotations carry their per-replica protocol footprint: control-side CNOT
/// windows around the rotation itself.
fn channel_pz(j: usize, code: &CodeConfig, costs: &PointCosts, out: &mut Vec<f64>) {
    let logical = code.enabled && code.d_c > 1;
    out.clear();
    out.push(0.0); // prep
    for i in 0..j {
        let theta = PI / 2f64.powi((j - i) as i32);
        if logical {
            out.push(costs.pz_cnot_control);
            out.push(costs.pz_rot(theta));
            out.push(costs.pz_cnot_control);
        } else {
            out.push(costs.pz_rot(theta));
        }
    }
    out.push(costs.pz_zhalf);
    out.push(costs.pz_def);
    out.push(costs.pz_inf);
    out.push(0.0); // displacement
    out.push(0.0); // readout (handled by include_readout_fidelity)
}

fn segment_boundaries(j: usize, code: &CodeConfig, gates: usize, out: &mut Vec<usize>) {
    out.clear();
    out.push(0);
    if code.enabled && code.d_c > 1 {
        out.push(1);
        for k in 1..=j {
            if k as u32 % code.n_b == 0 {
                out.push(1 + 3 * k);
            }
        }
    }
    if *out.last().unwrap() != gates {
        out.push(gates);
    }
}

/// Average fidelity of unit `j`'s channel, fast route.
fn unit_fidelity(
    j: usize,
    code: &CodeConfig,
    costs: &PointCosts,
    flags: ChannelFlags,
    idle_seconds: f64,
    pz_buf: &mut Vec<f64>,
    boundary_buf: &mut Vec<usize>,
) -> Result<f64, FidelityError> {
    channel_pz(j, costs, pz_buf);
    if flags.idle_error {
        pz_buf.push((costs.pz_idle_per_s * idle_seconds).clamp(0.0, 0.5));
    }
    segment_boundaries(j, code, pz_buf.len(), boundary_buf);
    let suppress = code.enabled && code.d_c > 1;
    let mut lambda = 1.0f64;
    for window in boundary_buf.windows(2) {
        let (_, p_raw) = fidelity::compose_channel(&pz_buf[window[0]..window[1]])?;
        let p_corrected = if suppress {
            fidelity::logical_suppression(p_raw, code.d_c)?
        } else {
            p_raw
        };
        lambda *= 1.0 - 2.0 * p_corrected;
    }
    let p_total = (1.0 - lambda) / 2.0;
    let mut f = 1.0 - 2.0 / 3.0 * p_total;
    if flags.include_readout_fidelity {
        f *= costs.readout_fidelity_at_optimum;
    }
    Ok(f)
}

fn idle_per_data_row(
    j: usize,
    code: &CodeConfig,
    costs: &PointCosts,
    timing: &UnitTiming,
) -> f64 {
    let d = effective_distance(code) as f64;
    let rounds = timing.rounds[j] as f64;
    let blocks = j as f64;
    let mut busy = d * costs.t_prep
        + rounds * 2.0 * d * (d - 1.0) * costs.t_cnot
        + d * costs.d_meas;
    if d > 1.0 {
        busy += blocks * 2.0 * d * costs.t_cnot;
    } else {
        busy += timing.rot_time[j];
    }
    (d * timing.readout_end[j] - busy) / d
}

/// Fidelity of the last (worst) qubit, fast route.
pub fn last_fidelity_fast(
    n: usize,
    code: &CodeConfig,
    costs: &PointCosts,
    flags: ChannelFlags,
    mode: ScheduleMode,
) -> Result<f64, FidelityError> {
    let j = n - 1;
    let idle = if flags.idle_error {
        let timing = unit_timing(n, code, costs, mode);
        idle_per_data_row(j, code, costs, &timing)
    } else {
        0.0
    };
    let mut pz_buf = Vec::with_capacity(j + 8);
    let mut boundary_buf = Vec::with_capacity(j + 2);
    unit_fidelity(j, code, costs, flags, idle, &mut pz_buf, &mut boundary_buf)
}

/// Total energy (J) and wall-clock time (s) at one level, fast route.
pub fn energy_time_fast(
    n: usize,
    code: &CodeConfig,
    costs: &PointCosts,
    level: EnergyLevel,
    mode: ScheduleMode,
) -> Result<(f64, f64), EnergyError> {
    let level_idx = match level {
        EnergyLevel::Microscopic => 0,
        EnergyLevel::Macroscopic => 1,
        EnergyLevel::Billed => return Err(EnergyError::MissingScenario),
    };
    let timing = unit_timing(n, code, costs, mode);
    let cats = energy_breakdown(n, code, costs, &timing, level_idx);
    Ok((cats.iter().sum(), timing.readout_end[n - 1]))
}

/// Everything the reports need at one point, fast route.
#[derive(Debug, Clone)]
pub struct FastReport {
    pub energy_micro: f64,
    pub energy_macro: f64,
    pub breakdown_micro: [f64; 6],
    pub breakdown_macro: [f64; 6],
    pub total_time: f64,
    pub per_qubit_fidelity: Vec<f64>,
    pub last_fidelity: f64,
    pub total_fidelity: f64,
    pub physical_qubits: usize,
}

pub fn evaluate_fast(
    n: usize,
    code: &CodeConfig,
    costs: &PointCosts,
    flags: ChannelFlags,
    mode: ScheduleMode,
) -> Result<FastReport, PipelineError> {
    if n == 0 {
        return Err(PipelineError::Circuit(CircuitError::EmptyCircuit));
    }
    let timing = unit_timing(n, code, costs, mode);
    let breakdown_micro = energy_breakdown(n, code, costs, &timing, 0);
    let breakdown_macro = energy_breakdown(n, code, costs, &timing, 1);
    let mut pz_buf = Vec::new();
    let mut boundary_buf = Vec::new();
    let mut per_qubit_fidelity = Vec::with_capacity(n);
    for j in 0..n {
        let idle = if flags.idle_error {
            idle_per_data_row(j, code, costs, &timing)
        } else {
            0.0
        };
        per_qubit_fidelity.push(unit_fidelity(
            j,
            code,
            costs,
            flags,
            idle,
            &mut pz_buf,
            &mut boundary_buf,
        )?);
    }
    let total_fidelity = per_qubit_fidelity.iter().product();
    let last_fidelity = *per_qubit_fidelity.last().unwrap();
    let d = effective_distance(code);
    let physical_qubits = if code.enabled { n * (3 * d - 1) } else { n };
    Ok(FastReport {
        energy_micro: breakdown_micro.iter().sum(),
        energy_macro: breakdown_macro.iter().sum(),
        breakdown_micro,
        breakdown_macro,
        total_time: timing.readout_end[n - 1],
        per_qubit_fidelity,
        last_fidelity,
        total_fidelity,
        physical_qubits,
    })
}

/// Reference-route result: the materialized timeline, integrated costs and
/// per-qubit channel reports.
#[derive(Debug, Clone)]
pub struct ReferenceReport {
    pub timeline: Timeline,
    pub cost_micro: CostReport,
    pub cost_macro: CostReport,
    pub channel_reports: Vec<ChannelReport>,
    pub per_qubit_fidelity: Vec<f64>,
    pub last_fidelity: f64,
    pub total_fidelity: f64,
}

/// Build, schedule and integrate the full circuit, and compose the channels
/// from the per-gate costs.
pub fn evaluate_reference(
    n: usize,
    code: &CodeConfig,
    pc: &PhysicalConstants,
    mf: &MacroFactors,
    op: &OperatingPoint,
    flags: ChannelFlags,
    mode: ScheduleMode,
) -> Result<ReferenceReport, PipelineError> {
    let plan = circuit::plan_circuit(n, code)?;
    let timeline = circuit::schedule(&plan, pc, op, mode)?;
    let cost_micro = energy::account(&timeline, pc, mf, op, EnergyLevel::Microscopic, 1)?;
    let cost_macro = energy::account(&timeline, pc, mf, op, EnergyLevel::Macroscopic, 1)?;

    let costs = PointCosts::new(pc, mf, op)?;
    let mut channel_reports = Vec::with_capacity(n);
    let mut per_qubit_fidelity = Vec::with_capacity(n);
    for program in &plan.channel_programs {
        let mut pz = Vec::with_capacity(program.gates.len() + 1);
        for &kind in &program.gates {
            pz.push(gate::gate_cost_at(kind, pc, mf, op, EnergyLevel::Microscopic)?.pz);
        }
        let mut program = program.clone();
        if flags.idle_error {
            let unit = program.qubit_index;
            let idle: f64 = timeline
                .qubits
                .iter()
                .filter(|q| q.unit == unit && q.role == circuit::QubitRole::Data)
                .flat_map(|q| q.intervals.iter())
                .filter(|iv| iv.category == Category::StabilizationIdle)
                .map(|iv| iv.end - iv.start)
                .sum::<f64>()
                / effective_distance(code) as f64;
            pz.push(gate::idle_pz(pc, op, idle).clamp(0.0, 0.5));
            program.gates.push(gate::GateKind::Idle(idle));
        }
        let report = fidelity::qubit_fidelity(&program, code, &pz)?;
        let mut f = report.avg_fidelity;
        if flags.include_readout_fidelity {
            f *= costs.readout_fidelity_at_optimum;
        }
        per_qubit_fidelity.push(f);
        channel_reports.push(report);
    }
    let total_fidelity = per_qubit_fidelity.iter().product();
    let last_fidelity = *per_qubit_fidelity.last().unwrap();
    Ok(ReferenceReport {
        timeline,
        cost_micro,
        cost_macro,
        channel_reports,
        per_qubit_fidelity,
        last_fidelity,
        total_fidelity,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::table_iv_config;
    use approx::assert_relative_eq;
    use std::f64::consts::TAU;

    fn resolved_op(ratio: f64, eps_mhz: f64, level: EnergyLevel) -> (Config, OperatingPoint) {
        let cfg = table_iv_config();
        let mut op = cfg.operating_point.clone();
        op.kappa2_ratio = ratio;
        op.epsilon_z = TAU * eps_mhz * 1e6;
        op.level = level;
        let g = resolve_g_cnot(&cfg.constants, &op, GCnotMode::Derived, level).unwrap();
        op.g_cnot = Some(g);
        (cfg, op)
    }

    fn check_point(n: usize, code: CodeConfig, ratio: f64, eps_mhz: f64) {
        let (cfg, op) = resolved_op(ratio, eps_mhz, EnergyLevel::Macroscopic);
        let costs = PointCosts::new(&cfg.constants, &cfg.macro_factors, &op).unwrap();
        let flags = ChannelFlags::default();
        for mode in [ScheduleMode::Serial, ScheduleMode::Concurrent] {
            let fast = evaluate_fast(n, &code, &costs, flags, mode).unwrap();
            let reference = evaluate_reference(
                n,
                &code,
                &cfg.constants,
                &cfg.macro_factors,
                &op,
                flags,
                mode,
            )
            .unwrap();
            assert_relative_eq!(
                fast.energy_micro,
                reference.cost_micro.total_energy,
                max_relative = 1e-9
            );
            assert_relative_eq!(
                fast.energy_macro,
                reference.cost_macro.total_energy,
                max_relative = 1e-9
            );
            assert_relative_eq!(
                fast.total_time,
                reference.timeline.total_duration,
                max_relative = 1e-9
            );
            for (slot, category) in Category::ALL.iter().enumerate() {
                let expect = reference.cost_macro.category(*category);
                let got = fast.breakdown_macro[slot];
                if expect == 0.0 {
                    assert!(got.abs() < 1e-30, "{category:?}: {got}");
                } else {
                    assert_relative_eq!(got, expect, max_relative = 1e-9);
                }
            }
            assert_relative_eq!(
                fast.last_fidelity,
                reference.last_fidelity,
                max_relative = 1e-12
            );
            assert_relative_eq!(
                fast.total_fidelity,
                reference.total_fidelity,
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn fast_route_matches_reference_physical() {
        check_point(1, CodeConfig::physical(), 1000.0, 1.0);
        check_point(4, CodeConfig::physical(), 300.0, 4.0);
        check_point(9, CodeConfig::physical(), 5000.0, 0.5);
    }

    #[test]
    fn fast_route_matches_reference_logical() {
        let code = |d_c, n_b| CodeConfig {
            d_c,
            n_b,
            enabled: true,
        };
        check_point(2, code(3, 1), 1000.0, 1.0);
        check_point(5, code(5, 2), 700.0, 2.5);
        check_point(3, code(7, 3), 2000.0, 10.0);
        check_point(6, code(1, 1), 400.0, 1.0);
    }

    #[test]
    fn fast_route_matches_reference_with_flags() {
        let (cfg, op) = resolved_op(1500.0, 2.0, EnergyLevel::Macroscopic);
        let costs = PointCosts::new(&cfg.constants, &cfg.macro_factors, &op).unwrap();
        let code = CodeConfig {
            d_c: 3,
            n_b: 2,
            enabled: true,
        };
        for flags in [
            ChannelFlags {
                idle_error: true,
                include_readout_fidelity: false,
            },
            ChannelFlags {
                idle_error: false,
                include_readout_fidelity: true,
            },
            ChannelFlags {
                idle_error: true,
                include_readout_fidelity: true,
            },
        ] {
            let fast = evaluate_fast(4, &code, &costs, flags, ScheduleMode::Serial).unwrap();
            let reference = evaluate_reference(
                4,
                &code,
                &cfg.constants,
                &cfg.macro_factors,
                &op,
                flags,
                ScheduleMode::Serial,
            )
            .unwrap();
            assert_relative_eq!(
                fast.last_fidelity,
                reference.last_fidelity,
                max_relative = 1e-9
            );
            assert_relative_eq!(
                fast.total_fidelity,
                reference.total_fidelity,
                max_relative = 1e-9
            );
        }
    }

    #[test]
    fn derived_coupling_tracks_rotation_error() {
        let cfg = table_iv_config();
        let mut op = cfg.operating_point.clone();
        op.kappa2_ratio = 1000.0;
        let g = resolve_g_cnot(
            &cfg.constants,
            &op,
            GCnotMode::Derived,
            EnergyLevel::Macroscopic,
        )
        .unwrap();
        let target = gate::zrot_pz(&cfg.constants, &op, PI / 2.0);
        assert_relative_eq!(
            gate::cnot_control_pz(&cfg.constants, &op, g),
            target,
            max_relative = 1e-9
        );
    }

    #[test]
    fn derived_coupling_falls_back_to_minimum_when_target_unreachable() {
        let cfg = table_iv_config();
        let mut op = cfg.operating_point.clone();
        // at the ratio floor with the drive at its error optimum, the best
        // rotation error sits below the CNOT floor
        op.epsilon_z = TAU * 1.54e6;
        op.kappa2_ratio = 100.0;
        let target = gate::zrot_pz(&cfg.constants, &op, PI / 2.0);
        let (floor, g_min) = gate::cnot_control_pz_minimum(
            &cfg.constants,
            &op,
            EnergyLevel::Macroscopic,
        )
        .unwrap();
        assert!(target < floor, "setup must make the target unreachable");
        let g = resolve_g_cnot(
            &cfg.constants,
            &op,
            GCnotMode::Derived,
            EnergyLevel::Macroscopic,
        )
        .unwrap();
        assert_relative_eq!(g, g_min, max_relative = 1e-12);
    }

    #[test]
    fn last_qubit_is_the_fidelity_minimum() {
        let (cfg, op) = resolved_op(1000.0, 1.0, EnergyLevel::Macroscopic);
        let costs = PointCosts::new(&cfg.constants, &cfg.macro_factors, &op).unwrap();
        for code in [
            CodeConfig::physical(),
            CodeConfig {
                d_c: 5,
                n_b: 1,
                enabled: true,
            },
        ] {
            let report =
                evaluate_fast(8, &code, &costs, ChannelFlags::default(), ScheduleMode::Serial)
                    .unwrap();
            let min = report
                .per_qubit_fidelity
                .iter()
                .copied()
                .fold(f64::INFINITY, f64::min);
            assert_eq!(report.last_fidelity, min);
        }
    }

    #[test]
    fn total_fidelity_is_non_increasing_in_qubit_count() {
        let (cfg, op) = resolved_op(1000.0, 1.0, EnergyLevel::Macroscopic);
        let costs = PointCosts::new(&cfg.constants, &cfg.macro_factors, &op).unwrap();
        let mut last = 1.0;
        for n in 1..=12 {
            let report =
                evaluate_fast(
                    n,
                    &CodeConfig::physical(),
                    &costs,
                    ChannelFlags::default(),
                    ScheduleMode::Serial,
                )
                .unwrap();
            assert!(report.total_fidelity <= last + 1e-15, "n={n}");
            last = report.total_fidelity;
        }
    }

    #[test]
    fn macro_energy_dominates_micro_on_random_points() {
        let cfg = table_iv_config();
        for (ratio, eps, d_c, n_b) in [
            (100.0, 0.5, 1u32, 1u32),
            (640.0, 3.5, 3, 2),
            (5000.0, 12.0, 7, 1),
            (50000.0, 40.5, 5, 3),
        ] {
            let (_, op) = resolved_op(ratio, eps, EnergyLevel::Macroscopic);
            let costs = PointCosts::new(&cfg.constants, &cfg.macro_factors, &op).unwrap();
            let code = if d_c == 1 {
                CodeConfig::physical()
            } else {
                CodeConfig {
                    d_c,
                    n_b,
                    enabled: true,
                }
            };
            let report =
                evaluate_fast(6, &code, &costs, ChannelFlags::default(), ScheduleMode::Serial)
                    .unwrap();
            assert!(report.energy_macro >= report.energy_micro);
        }
    }
}
