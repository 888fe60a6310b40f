//! Power, duration, energy and phase-flip probability of every primitive
//! gate, at the microscopic (drive-level) and macroscopic (Carnot cryogenic)
//! accounting levels, plus the readout-fidelity optimum and the inverse
//! drive-amplitude formulas.

use std::f64::consts::PI;

use statrs::function::erf::erf;
use thiserror::Error;

use crate::params::{EnergyLevel, MacroFactors, OperatingPoint, PhysicalConstants};

#[derive(Debug, Error, PartialEq)]
pub enum GateError {
    #[error("rotation angle must be in (0, 2pi], got {0}")]
    InvalidAngle(f64),
    #[error("idle duration must be non-negative, got {0}")]
    NegativeIdle(f64),
    #[error("CNOT requested but no g_cnot is set on the operating point")]
    MissingGCnot,
    #[error("per-gate costs are only defined at the microscopic or macroscopic level")]
    BilledLevel,
    #[error(
        "target phase-flip probability {target:.3e} is below the feasibility bound \
         {bound:.3e} at this kappa2"
    )]
    InfeasibleTarget { target: f64, bound: f64 },
}

/// Which side of the CNOT a qubit plays.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum CnotRole {
    Control,
    Target,
}

/// Primitive operations with a cost model.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub enum GateKind {
    /// Preparation of the |+> cat state (stabilization pulse for 1/kappa2).
    PrepPlus,
    /// Z rotation by the given angle (radians).
    ZRot(f64),
    Cnot(CnotRole),
    /// Measurement step 1 of 5 is ZRot(pi/2); steps 2-5 follow.
    MeasDeflate,
    MeasInflate,
    MeasDisplace,
    MeasLongitudinalReadout,
    /// Stabilized wait of the given duration (seconds).
    Idle(f64),
}

/// Cost of one gate on one qubit.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct GateCost {
    /// W.
    pub power: f64,
    /// s.
    pub duration: f64,
    /// J, always power * duration.
    pub energy: f64,
    /// Phase-flip probability contributed by this gate, clamped to [0, 0.5].
    pub pz: f64,
    /// True when the raw formula exceeded 0.5 and was clamped.
    pub pz_saturated: bool,
}

impl GateCost {
    fn new(power: f64, duration: f64, pz_raw: f64) -> Self {
        let pz = pz_raw.clamp(0.0, 0.5);
        GateCost {
            power,
            duration,
            energy: power * duration,
            pz,
            pz_saturated: pz_raw > 0.5,
        }
    }
}

fn macro_level(level: EnergyLevel) -> Result<bool, GateError> {
    match level {
        EnergyLevel::Microscopic => Ok(false),
        EnergyLevel::Macroscopic => Ok(true),
        EnergyLevel::Billed => Err(GateError::BilledLevel),
    }
}

/// Power of the two-photon pump line.
pub fn pump_power(
    pc: &PhysicalConstants,
    mf: &MacroFactors,
    op: &OperatingPoint,
    level: EnergyLevel,
) -> Result<f64, GateError> {
    let m = if macro_level(level)? { mf.m_p } else { 1.0 };
    Ok(m * pc.p_const * (pc.kappa_b / 4.0) * crate::params::derived_kappa2(pc, op))
}

/// Power of the buffer drive at amplitude epsilon_d.
pub fn buffer_drive_power(
    pc: &PhysicalConstants,
    mf: &MacroFactors,
    op: &OperatingPoint,
    level: EnergyLevel,
) -> Result<f64, GateError> {
    let m = if macro_level(level)? { mf.m_d } else { 1.0 };
    let eps_d = crate::params::epsilon_d(pc, op);
    Ok(m * pc.d_const * eps_d * eps_d)
}

/// Total stabilization power (pump + buffer drive). Idling qubits hold this.
pub fn stabilization_power(
    pc: &PhysicalConstants,
    mf: &MacroFactors,
    op: &OperatingPoint,
    level: EnergyLevel,
) -> Result<f64, GateError> {
    Ok(pump_power(pc, mf, op, level)? + buffer_drive_power(pc, mf, op, level)?)
}

fn z_drive_power(
    pc: &PhysicalConstants,
    mf: &MacroFactors,
    op: &OperatingPoint,
    level: EnergyLevel,
) -> Result<f64, GateError> {
    let m = if macro_level(level)? { mf.m_z } else { 1.0 };
    Ok(m * pc.z_const * op.epsilon_z * op.epsilon_z)
}

fn cnot_drive_power(
    pc: &PhysicalConstants,
    mf: &MacroFactors,
    g_cnot: f64,
    level: EnergyLevel,
) -> Result<f64, GateError> {
    let m = if macro_level(level)? { mf.m_c } else { 1.0 };
    Ok(m * pc.c_const * g_cnot * g_cnot)
}

fn readout_power(
    pc: &PhysicalConstants,
    mf: &MacroFactors,
    level: EnergyLevel,
) -> Result<f64, GateError> {
    let m = if macro_level(level)? { mf.m_l } else { 1.0 };
    Ok(m * pc.l_const * pc.g_l * pc.g_l)
}

/// Phase-flip probability of a Z(theta) rotation in the composed channel.
pub fn zrot_pz(pc: &PhysicalConstants, op: &OperatingPoint, theta: f64) -> f64 {
    let kappa2 = crate::params::derived_kappa2(pc, op);
    let alpha2 = op.alpha * op.alpha;
    let t = zrot_duration(op, theta);
    PI * pc.kappa1 * alpha2 * t * (1.0 + 2.0 * pc.nth_m)
        + op.epsilon_z * op.epsilon_z / (kappa2 * alpha2) * t * (1.0 + 2.0 * pc.nth_b)
}

/// Phase-flip probability on the CNOT target qubit.
pub fn cnot_target_pz(pc: &PhysicalConstants, op: &OperatingPoint, g_cnot: f64) -> f64 {
    op.alpha * op.alpha * pc.kappa1 * cnot_duration(op, g_cnot)
}

/// Phase-flip probability on the CNOT control qubit.
pub fn cnot_control_pz(pc: &PhysicalConstants, op: &OperatingPoint, g_cnot: f64) -> f64 {
    let kappa2 = crate::params::derived_kappa2(pc, op);
    PI / 4.0
        * (pc.kappa1 * op.alpha / g_cnot * (1.0 + 2.0 * pc.nth_m)
            + g_cnot / (kappa2 * op.alpha) * (1.0 + 2.0 * pc.nth_b))
}

/// Phase-flip probability of the deflate step.
pub fn deflate_pz(pc: &PhysicalConstants, op: &OperatingPoint) -> f64 {
    let kappa2 = crate::params::derived_kappa2(pc, op);
    pc.a1 * pc.kappa1 / kappa2 + pc.a2 * pc.nth_m
}

/// Phase-flip probability of the inflate step.
pub fn inflate_pz(pc: &PhysicalConstants, op: &OperatingPoint) -> f64 {
    let kappa2 = crate::params::derived_kappa2(pc, op);
    op.alpha * op.alpha * pc.kappa1 * (1.0 / kappa2) * (1.0 + 2.0 * pc.nth_m)
}

/// Free-decay phase-flip rate for a stabilized idle of duration tau. Used
/// only when the optional `idle_error` switch is on.
pub fn idle_pz(pc: &PhysicalConstants, op: &OperatingPoint, tau: f64) -> f64 {
    op.alpha * op.alpha * pc.kappa1 * tau * (1.0 + 2.0 * pc.nth_m)
}

pub fn zrot_duration(op: &OperatingPoint, theta: f64) -> f64 {
    theta / (4.0 * op.alpha.abs() * op.epsilon_z)
}

pub fn cnot_duration(op: &OperatingPoint, g_cnot: f64) -> f64 {
    PI / (4.0 * op.alpha.abs() * g_cnot)
}

/// Cost of one primitive gate at the level set on the operating point.
pub fn gate_cost(
    kind: GateKind,
    pc: &PhysicalConstants,
    mf: &MacroFactors,
    op: &OperatingPoint,
) -> Result<GateCost, GateError> {
    gate_cost_at(kind, pc, mf, op, op.level)
}

/// Cost of one primitive gate at an explicit level.
pub fn gate_cost_at(
    kind: GateKind,
    pc: &PhysicalConstants,
    mf: &MacroFactors,
    op: &OperatingPoint,
    level: EnergyLevel,
) -> Result<GateCost, GateError> {
    let kappa2 = crate::params::derived_kappa2(pc, op);
    let stab = stabilization_power(pc, mf, op, level)?;
    Ok(match kind {
        GateKind::PrepPlus => GateCost::new(stab, 1.0 / kappa2, 0.0),
        GateKind::ZRot(theta) => {
            if !(theta > 0.0 && theta <= 2.0 * PI) {
                return Err(GateError::InvalidAngle(theta));
            }
            let power = stab + z_drive_power(pc, mf, op, level)?;
            GateCost::new(power, zrot_duration(op, theta), zrot_pz(pc, op, theta))
        }
        GateKind::Cnot(role) => {
            let g = op.g_cnot.ok_or(GateError::MissingGCnot)?;
            let duration = cnot_duration(op, g);
            match role {
                CnotRole::Target => GateCost::new(
                    cnot_drive_power(pc, mf, g, level)? + stab,
                    duration,
                    cnot_target_pz(pc, op, g),
                ),
                CnotRole::Control => {
                    GateCost::new(stab, duration, cnot_control_pz(pc, op, g))
                }
            }
        }
        GateKind::MeasDeflate => GateCost::new(
            pump_power(pc, mf, op, level)?,
            pc.a3 / kappa2,
            deflate_pz(pc, op),
        ),
        GateKind::MeasInflate => GateCost::new(stab, 1.0 / kappa2, inflate_pz(pc, op)),
        GateKind::MeasDisplace => GateCost::new(0.0, 0.0, 0.0),
        GateKind::MeasLongitudinalReadout => GateCost::new(
            readout_power(pc, mf, level)?,
            readout_optimal_time(pc),
            0.0,
        ),
        GateKind::Idle(tau) => {
            if !(tau >= 0.0) {
                return Err(GateError::NegativeIdle(tau));
            }
            GateCost::new(stab, tau, 0.0)
        }
    })
}

/// Fidelity of the longitudinal readout after integrating for time `t`.
pub fn readout_fidelity(t: f64, pc: &PhysicalConstants) -> f64 {
    let snr_half =
        (4.0 * pc.eta * pc.g_l * pc.g_l / pc.kappa_b * (t + 3.0 / pc.kappa_b)).sqrt();
    ((-pc.kappa1 * t).exp() * erf(snr_half)).clamp(0.0, 1.0)
}

/// Integration time maximizing [`readout_fidelity`] on [0, 100/kappa1].
///
/// Coarse scan followed by golden-section refinement of the bracketing
/// interval, to a relative width well below 1e-9.
pub fn readout_optimal_time(pc: &PhysicalConstants) -> f64 {
    const SCAN: usize = 4096;
    let hi = 100.0 / pc.kappa1;
    let step = hi / SCAN as f64;
    let mut best_i = 0;
    let mut best_f = f64::NEG_INFINITY;
    for i in 0..=SCAN {
        let f = readout_fidelity(i as f64 * step, pc);
        if f > best_f {
            best_f = f;
            best_i = i;
        }
    }
    let mut a = step * best_i.saturating_sub(1) as f64;
    let mut b = step * (best_i + 1).min(SCAN) as f64;
    // invariant phi-section: keeps a bracket around the scan maximum
    let inv_phi = 0.618_033_988_749_894_9_f64;
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let mut f1 = readout_fidelity(x1, pc);
    let mut f2 = readout_fidelity(x2, pc);
    for _ in 0..96 {
        if f1 >= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = readout_fidelity(x1, pc);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = readout_fidelity(x2, pc);
        }
    }
    let mid = 0.5 * (a + b);
    // the scan endpoints can beat the interior when the optimum sits on the
    // domain boundary
    if readout_fidelity(mid, pc) >= best_f {
        mid
    } else {
        step * best_i as f64
    }
}

/// Forward Z(theta) phase-flip model matching the closed-form inversion:
/// no pi prefactor; thermal factors only at the macroscopic level.
pub fn zrot_pz_closed_form(
    pc: &PhysicalConstants,
    op: &OperatingPoint,
    theta: f64,
    epsilon_z: f64,
    level: EnergyLevel,
) -> Result<f64, GateError> {
    let thermal = macro_level(level)?;
    let (fm, fb) = if thermal {
        (1.0 + 2.0 * pc.nth_m, 1.0 + 2.0 * pc.nth_b)
    } else {
        (1.0, 1.0)
    };
    let kappa2 = crate::params::derived_kappa2(pc, op);
    let alpha2 = op.alpha * op.alpha;
    let t = theta / (4.0 * op.alpha.abs() * epsilon_z);
    Ok(pc.kappa1 * alpha2 * t * fm + epsilon_z * epsilon_z / (kappa2 * alpha2) * t * fb)
}

/// Forward CNOT control phase-flip model matching the closed-form inversion:
/// thermal factors only at the macroscopic level (the macroscopic form equals
/// [`cnot_control_pz`]).
pub fn cnot_control_pz_closed_form(
    pc: &PhysicalConstants,
    op: &OperatingPoint,
    g_cnot: f64,
    level: EnergyLevel,
) -> Result<f64, GateError> {
    let thermal = macro_level(level)?;
    let (fm, fb) = if thermal {
        (1.0 + 2.0 * pc.nth_m, 1.0 + 2.0 * pc.nth_b)
    } else {
        (1.0, 1.0)
    };
    let kappa2 = crate::params::derived_kappa2(pc, op);
    Ok(PI / 4.0
        * (pc.kappa1 * op.alpha / g_cnot * fm + g_cnot / (kappa2 * op.alpha) * fb))
}

/// Z-drive amplitude that yields a target Z(theta) phase-flip probability.
///
/// Closed form; picks the weaker-drive root. Errors when the target is below
/// the minimum reachable at this kappa2 (negative discriminant).
pub fn epsilon_z_for_target_pz(
    pz_target: f64,
    theta: f64,
    pc: &PhysicalConstants,
    op: &OperatingPoint,
    level: EnergyLevel,
) -> Result<f64, GateError> {
    let thermal = macro_level(level)?;
    let (fm, fb) = if thermal {
        (1.0 + 2.0 * pc.nth_m, 1.0 + 2.0 * pc.nth_b)
    } else {
        (1.0, 1.0)
    };
    let kappa2 = crate::params::derived_kappa2(pc, op);
    let alpha = op.alpha.abs();
    let alpha2 = alpha * alpha;
    let x = theta * theta * pc.kappa1 / (4.0 * alpha2 * pz_target * pz_target * kappa2) * fm * fb;
    if x > 1.0 {
        let bound = theta / (2.0 * alpha) * (pc.kappa1 * fm * fb / kappa2).sqrt();
        return Err(GateError::InfeasibleTarget {
            target: pz_target,
            bound,
        });
    }
    Ok(2.0 * kappa2 * pz_target * alpha2 * alpha / (fb * theta) * (1.0 - (1.0 - x).sqrt()))
}

/// CNOT coupling that yields a target control-qubit phase-flip probability.
pub fn g_cnot_for_target_pz(
    pz_target: f64,
    pc: &PhysicalConstants,
    op: &OperatingPoint,
    level: EnergyLevel,
) -> Result<f64, GateError> {
    let thermal = macro_level(level)?;
    let (fm, fb) = if thermal {
        (1.0 + 2.0 * pc.nth_m, 1.0 + 2.0 * pc.nth_b)
    } else {
        (1.0, 1.0)
    };
    let kappa2 = crate::params::derived_kappa2(pc, op);
    let alpha = op.alpha.abs();
    let x = PI * PI * pc.kappa1 / (4.0 * pz_target * pz_target * kappa2) * fm * fb;
    if x > 1.0 {
        let bound = PI / 2.0 * (pc.kappa1 * fm * fb / kappa2).sqrt();
        return Err(GateError::InfeasibleTarget {
            target: pz_target,
            bound,
        });
    }
    Ok(2.0 * kappa2 * pz_target * alpha / (PI * fb) * (1.0 - (1.0 - x).sqrt()))
}

/// Smallest control-qubit phase-flip probability reachable by tuning g_cnot,
/// and the coupling that attains it.
pub fn cnot_control_pz_minimum(
    pc: &PhysicalConstants,
    op: &OperatingPoint,
    level: EnergyLevel,
) -> Result<(f64, f64), GateError> {
    let thermal = macro_level(level)?;
    let (fm, fb) = if thermal {
        (1.0 + 2.0 * pc.nth_m, 1.0 + 2.0 * pc.nth_b)
    } else {
        (1.0, 1.0)
    };
    let kappa2 = crate::params::derived_kappa2(pc, op);
    let g_opt = op.alpha.abs() * (pc.kappa1 * kappa2 * fm / fb).sqrt();
    let pz_min = PI / 2.0 * (pc.kappa1 * fm * fb / kappa2).sqrt();
    Ok((pz_min, g_opt))
}
