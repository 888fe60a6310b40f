//! Phase-flip channel composition, repetition-code suppression and average
//! fidelities.
//!
//! Bias-preserving gates leave only Z errors, so a qubit's channel is the
//! composition of independent phase-flip channels: lambda = prod(1 - 2 p_i),
//! p_total = (1 - lambda)/2, average fidelity 1 - (2/3) p_total.

use thiserror::Error;

use crate::circuit::QubitProgram;
use crate::params::CodeConfig;

#[derive(Debug, Error, PartialEq)]
pub enum FidelityError {
    #[error("phase-flip probability {0} outside [0, 0.5]")]
    ProbabilityOutOfRange(f64),
    #[error("code distance must be odd, got {0}")]
    EvenDistance(u32),
    #[error("segment probability {0} outside [0, 1]")]
    SegmentOutOfRange(f64),
    #[error("program has {gates} gates but a segment mark at {mark}")]
    BadSegmentMark { gates: usize, mark: usize },
}

/// One corrected block of a qubit's channel.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct SegmentReport {
    /// Gate index range [start, end) of the segment.
    pub range: (usize, usize),
    /// Composed raw phase-flip probability of the segment.
    pub p_raw: f64,
    /// After repetition-code suppression.
    pub p_corrected: f64,
}

/// Composed phase-flip channel of one qubit.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ChannelReport {
    pub per_gate_pz: Vec<f64>,
    /// prod(1 - 2 P_i) over the corrected segments.
    pub lambda: f64,
    /// Net phase-flip probability (1 - lambda)/2.
    pub p_total: f64,
    /// 1 - (2/3) p_total, in [2/3, 1].
    pub avg_fidelity: f64,
    pub segments: Vec<SegmentReport>,
    /// Set when a product underflowed below 1e-300 and was clamped to zero.
    pub underflow: bool,
}

/// Compose independent phase-flip probabilities into (lambda, p_total).
pub fn compose_channel(pz_list: &[f64]) -> Result<(f64, f64), FidelityError> {
    let mut lambda = 1.0f64;
    for &p in pz_list {
        if !(0.0..=0.5).contains(&p) {
            return Err(FidelityError::ProbabilityOutOfRange(p));
        }
        lambda *= 1.0 - 2.0 * p;
    }
    if lambda.abs() < 1e-300 {
        lambda = 0.0;
    }
    Ok((lambda, (1.0 - lambda) / 2.0))
}

/// Probability that more than (d-1)/2 of d independent flips occur: the
/// binomial tail left uncorrected by a distance-d repetition code.
pub fn logical_suppression(p: f64, d_c: u32) -> Result<f64, FidelityError> {
    if d_c % 2 == 0 || d_c == 0 {
        return Err(FidelityError::EvenDistance(d_c));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(FidelityError::SegmentOutOfRange(p));
    }
    let d = d_c as u64;
    let t = (d - 1) / 2;
    let q = 1.0 - p;
    // sum_{k=t+1}^{d} C(d,k) p^k q^(d-k), accumulated with an exact running
    // binomial coefficient (exact in f64 for d <= 25)
    let mut coeff = 1.0f64;
    let mut total = 0.0f64;
    for k in 0..=d {
        if k > 0 {
            coeff = coeff * (d - k + 1) as f64 / k as f64;
        }
        if k > t {
            total += coeff * p.powi(k as i32) * q.powi((d - k) as i32);
        }
    }
    Ok(total.clamp(0.0, 1.0))
}

/// Channel of one qubit: per-segment composition, optional repetition-code
/// suppression, and the composed result.
///
/// Physical mode (code disabled or distance 1) is a single uncorrected
/// segment. In logical mode each segment is composed, suppressed, and the
/// corrected segments are composed across the program; the final partial
/// segment (trailing rotations plus the measurement steps) is suppressed
/// like a full one by the closing majority vote.
pub fn qubit_fidelity(
    program: &QubitProgram,
    code: &CodeConfig,
    per_gate_pz: &[f64],
) -> Result<ChannelReport, FidelityError> {
    let n = per_gate_pz.len();
    for &mark in &program.segment_marks {
        if mark == 0 || mark > n {
            return Err(FidelityError::BadSegmentMark {
                gates: n,
                mark,
            });
        }
    }

    let suppress = code.enabled && code.d_c > 1;
    let mut boundaries: Vec<usize> = Vec::with_capacity(program.segment_marks.len() + 2);
    boundaries.push(0);
    if suppress {
        boundaries.extend(program.segment_marks.iter().copied());
    }
    if boundaries.last() != Some(&n) {
        boundaries.push(n);
    }

    let mut segments = Vec::with_capacity(boundaries.len() - 1);
    let mut lambda = 1.0f64;
    for window in boundaries.windows(2) {
        let (start, end) = (window[0], window[1]);
        let (_, p_raw) = compose_channel(&per_gate_pz[start..end])?;
        let p_corrected = if suppress {
            logical_suppression(p_raw, code.d_c)?
        } else {
            p_raw
        };
        segments.push(SegmentReport {
            range: (start, end),
            p_raw,
            p_corrected,
        });
        lambda *= 1.0 - 2.0 * p_corrected;
    }
    let mut underflow = false;
    if lambda != 0.0 && lambda.abs() < 1e-300 {
        lambda = 0.0;
        underflow = true;
    }
    let p_total = (1.0 - lambda) / 2.0;
    Ok(ChannelReport {
        per_gate_pz: per_gate_pz.to_vec(),
        lambda,
        p_total,
        avg_fidelity: 1.0 - 2.0 / 3.0 * p_total,
        segments,
        underflow,
    })
}

/// Product of per-qubit average fidelities: the independence of the
/// semiclassical QFT makes the state fidelity multiplicative.
pub fn total_fidelity(reports: &[ChannelReport]) -> f64 {
    reports.iter().map(|r| r.avg_fidelity).product()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn plain_program(gates: usize, marks: Vec<usize>) -> QubitProgram {
        QubitProgram {
            qubit_index: 0,
            gates: vec![crate::gate::GateKind::PrepPlus; gates],
            segment_marks: marks,
        }
    }

    #[test]
    fn single_gate_composes_to_itself() {
        let (lambda, p) = compose_channel(&[0.17]).unwrap();
        assert_relative_eq!(lambda, 1.0 - 0.34, max_relative = 1e-15);
        assert_relative_eq!(p, 0.17, max_relative = 1e-15);
    }

    #[test]
    fn two_tenths_compose_to_hand_product() {
        let (lambda, p) = compose_channel(&[0.1, 0.1]).unwrap();
        assert_relative_eq!(lambda, 0.64, max_relative = 1e-15);
        assert_relative_eq!(p, 0.18, max_relative = 1e-15);
    }

    #[test]
    fn out_of_range_probability_is_rejected() {
        assert!(compose_channel(&[0.6]).is_err());
        assert!(compose_channel(&[-0.01]).is_err());
    }

    #[test]
    fn composition_is_order_invariant_and_associative() {
        let a = [0.01, 0.2, 0.07];
        let b = [0.33, 0.0004];
        let joined: Vec<f64> = a.iter().chain(b.iter()).copied().collect();
        let (l_joined, _) = compose_channel(&joined).unwrap();
        let (l_a, p_a) = compose_channel(&a).unwrap();
        let (l_b, p_b) = compose_channel(&b).unwrap();
        let (l_two, _) = compose_channel(&[p_a, p_b]).unwrap();
        assert_relative_eq!(l_joined, l_a * l_b, max_relative = 1e-14);
        assert_relative_eq!(l_two, l_a * l_b, max_relative = 1e-14);
        let mut reversed = joined.clone();
        reversed.reverse();
        let (l_rev, _) = compose_channel(&reversed).unwrap();
        assert_relative_eq!(l_rev, l_joined, max_relative = 1e-14);
    }

    #[test]
    fn suppression_matches_hand_enumeration_at_three() {
        // 3 (0.01)(0.9) + 0.001
        let got = logical_suppression(0.1, 3).unwrap();
        assert_relative_eq!(got, 0.028, max_relative = 1e-12);
    }

    #[test]
    fn distance_one_is_identity_and_half_is_fixed_point() {
        for p in [0.0, 0.123, 0.5] {
            assert_relative_eq!(logical_suppression(p, 1).unwrap(), p, max_relative = 1e-15);
        }
        for d in [3, 5, 9, 15] {
            assert_relative_eq!(
                logical_suppression(0.5, d).unwrap(),
                0.5,
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn suppression_improves_below_half() {
        for d in [3, 5, 7, 11] {
            for p in [0.01, 0.1, 0.3, 0.49] {
                let s = logical_suppression(p, d).unwrap();
                assert!(s < p, "d={d} p={p} gave {s}");
            }
        }
    }

    #[test]
    fn even_distance_is_rejected() {
        assert_eq!(
            logical_suppression(0.1, 4).unwrap_err(),
            FidelityError::EvenDistance(4)
        );
    }

    #[test]
    fn zero_error_channel_is_perfect() {
        let program = plain_program(4, vec![]);
        let report = qubit_fidelity(&program, &CodeConfig::physical(), &[0.0; 4]).unwrap();
        assert_eq!(report.avg_fidelity, 1.0);
        assert_eq!(report.p_total, 0.0);
    }

    #[test]
    fn single_segment_distance_one_equals_compose() {
        let pz = [0.1, 0.02, 0.3];
        let program = plain_program(3, vec![]);
        let code = CodeConfig {
            d_c: 1,
            n_b: 1,
            enabled: true,
        };
        let report = qubit_fidelity(&program, &code, &pz).unwrap();
        let (lambda, p) = compose_channel(&pz).unwrap();
        assert_eq!(report.lambda, lambda);
        assert_eq!(report.p_total, p);
    }

    #[test]
    fn two_suppressed_segments_match_hand_value() {
        let pz = [0.1, 0.1];
        let program = plain_program(2, vec![1]);
        let code = CodeConfig {
            d_c: 3,
            n_b: 1,
            enabled: true,
        };
        let report = qubit_fidelity(&program, &code, &pz).unwrap();
        assert_eq!(report.segments.len(), 2);
        for segment in &report.segments {
            assert_relative_eq!(segment.p_corrected, 0.028, max_relative = 1e-12);
        }
        assert_relative_eq!(report.p_total, 0.054432, max_relative = 1e-9);
        assert_relative_eq!(report.avg_fidelity, 0.963712, max_relative = 1e-9);
    }

    #[test]
    fn total_fidelity_is_the_product() {
        let mk = |f: f64| ChannelReport {
            per_gate_pz: vec![],
            lambda: 1.0 - 2.0 * (1.0 - f) * 1.5,
            p_total: (1.0 - f) * 1.5,
            avg_fidelity: f,
            segments: vec![],
            underflow: false,
        };
        assert_eq!(total_fidelity(&[mk(1.0), mk(1.0)]), 1.0);
        assert_relative_eq!(
            total_fidelity(&[mk(0.9), mk(0.9)]),
            0.81,
            max_relative = 1e-15
        );
    }
}
