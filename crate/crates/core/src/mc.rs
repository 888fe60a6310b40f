//! Independent verification engines: Monte-Carlo sampling of phase-flip
//! channels and exhaustive enumeration of repetition-code error patterns.
//!
//! Sampling uses one counter-addressed ChaCha stream per sample, so results
//! are bit-identical for a given seed regardless of thread count or
//! evaluation order.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum McError {
    #[error("need at least one sample")]
    NoSamples,
    #[error("exhaustive enumeration is limited to d <= 20, got {0}")]
    DistanceTooLarge(u32),
    #[error("distance must be odd, got {0}")]
    EvenDistance(u32),
    #[error("probability {0} outside [0, 1]")]
    BadProbability(f64),
}

/// Sampling configuration.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct McConfig {
    pub samples: u64,
    pub seed: u64,
    /// Width of the pass band in standard errors (3 is the usual gate).
    pub confidence_sigma: f64,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig {
            samples: 1_000_000,
            seed: 0x5eed_cafe,
            confidence_sigma: 3.0,
        }
    }
}

/// Estimate, standard error.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Estimate {
    pub p_hat: f64,
    pub stderr: f64,
}

fn stream_rng(seed: u64, sample: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(sample);
    rng
}

fn binomial_estimate(flips: u64, samples: u64) -> Estimate {
    let p_hat = flips as f64 / samples as f64;
    Estimate {
        p_hat,
        stderr: (p_hat * (1.0 - p_hat) / samples as f64).sqrt(),
    }
}

/// Sample the net flip probability of a gate sequence: fraction of runs with
/// an odd number of independent per-gate flips.
pub fn sample_channel(pz_list: &[f64], cfg: &McConfig) -> Result<Estimate, McError> {
    if cfg.samples == 0 {
        return Err(McError::NoSamples);
    }
    for &p in pz_list {
        if !(0.0..=1.0).contains(&p) {
            return Err(McError::BadProbability(p));
        }
    }
    let flips: u64 = (0..cfg.samples)
        .into_par_iter()
        .map(|sample| {
            let mut rng = stream_rng(cfg.seed, sample);
            let mut parity = false;
            for &p in pz_list {
                if rng.gen::<f64>() < p {
                    parity = !parity;
                }
            }
            parity as u64
        })
        .sum();
    Ok(binomial_estimate(flips, cfg.samples))
}

/// Exact logical flip probability by summing all 2^d error patterns where
/// the majority vote fails (more than (d-1)/2 flips).
pub fn enumerate_logical(p: f64, d: u32) -> Result<f64, McError> {
    if d % 2 == 0 || d == 0 {
        return Err(McError::EvenDistance(d));
    }
    if d > 20 {
        return Err(McError::DistanceTooLarge(d));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(McError::BadProbability(p));
    }
    let t = (d - 1) / 2;
    let q = 1.0 - p;
    let mut total = 0.0f64;
    for pattern in 0u32..(1u32 << d) {
        let k = pattern.count_ones();
        if k > t {
            total += p.powi(k as i32) * q.powi((d - k) as i32);
        }
    }
    Ok(total)
}

/// Sample the segmented logical channel: each segment runs on `d`
/// independent replicas, a majority vote corrects after every segment, and
/// the uncorrected logical flips accumulate.
pub fn sample_segmented(
    segments: &[Vec<f64>],
    d: u32,
    cfg: &McConfig,
) -> Result<Estimate, McError> {
    if cfg.samples == 0 {
        return Err(McError::NoSamples);
    }
    if d % 2 == 0 || d == 0 {
        return Err(McError::EvenDistance(d));
    }
    for segment in segments {
        for &p in segment {
            if !(0.0..=1.0).contains(&p) {
                return Err(McError::BadProbability(p));
            }
        }
    }
    let majority = d / 2 + 1;
    let flips: u64 = (0..cfg.samples)
        .into_par_iter()
        .map(|sample| {
            let mut rng = stream_rng(cfg.seed, sample);
            let mut logical = false;
            for segment in segments {
                let mut votes = 0u32;
                for _replica in 0..d {
                    let mut parity = false;
                    for &p in segment {
                        if rng.gen::<f64>() < p {
                            parity = !parity;
                        }
                    }
                    votes += parity as u32;
                }
                if votes >= majority {
                    logical = !logical;
                }
            }
            logical as u64
        })
        .sum();
    Ok(binomial_estimate(flips, cfg.samples))
}

/// One analytic-vs-sampled comparison of the verification suite.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct VerifyCheck {
    pub name: String,
    pub analytic: f64,
    pub sampled: f64,
    pub stderr: f64,
    pub pass: bool,
}

impl VerifyCheck {
    fn gate(name: String, analytic: f64, estimate: Estimate, sigma: f64) -> Self {
        // a half-sample slack keeps exact-zero and discretization cases honest
        let tolerance = sigma * estimate.stderr + 1e-9;
        VerifyCheck {
            name,
            analytic,
            sampled: estimate.p_hat,
            stderr: estimate.stderr,
            pass: (estimate.p_hat - analytic).abs() <= tolerance,
        }
    }
}

/// Run the built-in verification suite: channel composition, binomial
/// suppression and the segmented logical channel, each against its
/// independent oracle.
pub fn verify_suite(cfg: &McConfig) -> Result<Vec<VerifyCheck>, McError> {
    let mut checks = Vec::new();

    let channel_cases: [&[f64]; 4] = [
        &[0.0],
        &[0.1, 0.1],
        &[0.02, 0.3, 0.11, 0.007],
        &[0.5, 0.25],
    ];
    for (idx, pz_list) in channel_cases.iter().enumerate() {
        let (_, analytic) = crate::fidelity::compose_channel(pz_list)
            .expect("suite probabilities are valid");
        let estimate = sample_channel(pz_list, cfg)?;
        checks.push(VerifyCheck::gate(
            format!("compose_channel/{idx}"),
            analytic,
            estimate,
            cfg.confidence_sigma,
        ));
    }

    for (d, p) in [(1u32, 0.2f64), (3, 0.1), (5, 0.3), (7, 0.05)] {
        let analytic = crate::fidelity::logical_suppression(p, d)
            .expect("suite distances are odd");
        let exact = enumerate_logical(p, d)?;
        checks.push(VerifyCheck {
            name: format!("logical_suppression/d{d}"),
            analytic,
            sampled: exact,
            stderr: 0.0,
            pass: (analytic - exact).abs() <= 1e-12 * analytic.max(1e-30),
        });
    }

    let segment_cases: [(&[f64], &[f64], u32); 2] =
        [(&[0.1], &[0.1], 3), (&[0.05, 0.02], &[0.2], 5)];
    for (idx, (seg_a, seg_b, d)) in segment_cases.iter().enumerate() {
        let p_a = crate::fidelity::compose_channel(seg_a).unwrap().1;
        let p_b = crate::fidelity::compose_channel(seg_b).unwrap().1;
        let corrected_a = crate::fidelity::logical_suppression(p_a, *d).unwrap();
        let corrected_b = crate::fidelity::logical_suppression(p_b, *d).unwrap();
        let (_, analytic) =
            crate::fidelity::compose_channel(&[corrected_a, corrected_b]).unwrap();
        let estimate = sample_segmented(&[seg_a.to_vec(), seg_b.to_vec()], *d, cfg)?;
        checks.push(VerifyCheck::gate(
            format!("sample_segmented/{idx}"),
            analytic,
            estimate,
            cfg.confidence_sigma,
        ));
    }

    Ok(checks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn quick(samples: u64) -> McConfig {
        McConfig {
            samples,
            seed: 42,
            confidence_sigma: 3.0,
        }
    }

    #[test]
    fn zero_probability_never_flips() {
        let est = sample_channel(&[0.0], &quick(10_000)).unwrap();
        assert_eq!(est.p_hat, 0.0);
    }

    #[test]
    fn two_tenths_match_analytic_within_three_sigma() {
        let est = sample_channel(&[0.1, 0.1], &quick(1_000_000)).unwrap();
        assert!(
            (est.p_hat - 0.18).abs() <= 3.0 * est.stderr,
            "p_hat={} stderr={}",
            est.p_hat,
            est.stderr
        );
    }

    #[test]
    fn same_seed_reproduces_bit_identical_estimates() {
        let a = sample_channel(&[0.3, 0.12, 0.05], &quick(50_000)).unwrap();
        let b = sample_channel(&[0.3, 0.12, 0.05], &quick(50_000)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn enumeration_matches_hand_value_at_three() {
        assert_relative_eq!(
            enumerate_logical(0.1, 3).unwrap(),
            0.028,
            max_relative = 1e-12
        );
        assert_eq!(enumerate_logical(0.0, 5).unwrap(), 0.0);
    }

    #[test]
    fn enumeration_matches_binomial_formula_exactly() {
        for d in [1u32, 3, 5, 7, 9, 11, 13, 15] {
            for p in [0.01, 0.1, 0.25, 0.4] {
                let exhaustive = enumerate_logical(p, d).unwrap();
                let formula = crate::fidelity::logical_suppression(p, d).unwrap();
                assert_relative_eq!(exhaustive, formula, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn enumeration_rejects_large_or_even_distances() {
        assert_eq!(enumerate_logical(0.1, 21).unwrap_err(), McError::DistanceTooLarge(21));
        assert_eq!(enumerate_logical(0.1, 2).unwrap_err(), McError::EvenDistance(2));
    }

    #[test]
    fn segmented_distance_one_single_segment_reduces_to_channel() {
        let cfg = quick(200_000);
        let seg = vec![vec![0.07, 0.2]];
        let est = sample_segmented(&seg, 1, &cfg).unwrap();
        let direct = sample_channel(&[0.07, 0.2], &cfg).unwrap();
        let analytic = crate::fidelity::compose_channel(&[0.07, 0.2]).unwrap().1;
        assert!((est.p_hat - analytic).abs() <= 3.0 * est.stderr);
        assert!((direct.p_hat - analytic).abs() <= 3.0 * direct.stderr);
    }

    #[test]
    fn segmented_matches_hand_composed_value() {
        let est = sample_segmented(&[vec![0.1], vec![0.1]], 3, &quick(1_000_000)).unwrap();
        assert!(
            (est.p_hat - 0.054432).abs() <= 3.0 * est.stderr,
            "p_hat={}",
            est.p_hat
        );
    }

    #[test]
    fn segmented_zero_error_never_flips() {
        let est = sample_segmented(&[vec![0.0, 0.0], vec![0.0]], 5, &quick(10_000)).unwrap();
        assert_eq!(est.p_hat, 0.0);
    }

    #[test]
    fn verify_suite_passes_at_default_budget() {
        let checks = verify_suite(&quick(400_000)).unwrap();
        for check in &checks {
            assert!(
                check.pass,
                "{}: analytic={} sampled={} stderr={}",
                check.name, check.analytic, check.sampled, check.stderr
            );
        }
    }
}
