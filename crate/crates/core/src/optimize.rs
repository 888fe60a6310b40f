//! Energy minimization over (epsilon_z, kappa2/kappa1, d_c, N_b) under a
//! last-qubit fidelity floor, scaling curves over qubit count, and the
//! least-squares fits used to characterize them.

use std::f64::consts::TAU;

use rayon::prelude::*;
use thiserror::Error;

use crate::params::{
    CodeConfig, EnergyLevel, GCnotMode, MacroFactors, OperatingPoint, PhysicalConstants,
};
use crate::pipeline::{self, ChannelFlags, PointCosts};

#[derive(Debug, Error)]
pub enum OptimizeError {
    #[error("search space has an empty axis")]
    EmptySpace,
    #[error("fidelity threshold must lie in (2/3, 1), got {0}")]
    BadThreshold(f64),
    #[error("code distance {0} in the search set must be odd")]
    EvenDistance(u32),
    #[error("qubit counts must be non-empty and ascending")]
    BadRange,
    #[error("billed optimization needs a per-qubit power")]
    MissingBilledPower,
    #[error(transparent)]
    Pipeline(#[from] pipeline::PipelineError),
    #[error(transparent)]
    Gate(#[from] crate::gate::GateError),
    #[error("fit needs at least {needed} points, got {got}")]
    NotEnoughPoints { needed: usize, got: usize },
    #[error("fit data is degenerate (constant ordinate)")]
    DegenerateData,
    #[error("power-law fit requires positive abscissae")]
    NonPositiveAbscissa,
    #[error("fit did not converge within the iteration budget")]
    NonConvergence,
}

/// Grid searched by the optimizer.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchSpace {
    /// Z-drive amplitudes, rad/s.
    pub epsilon_z_grid: Vec<f64>,
    pub kappa2_ratio_grid: Vec<f64>,
    pub d_c_set: Vec<u32>,
    pub n_b_set: Vec<u32>,
}

impl SearchSpace {
    /// The published sweep ranges: epsilon_z/2pi in [0.5, 40.5] MHz (linear),
    /// kappa2/kappa1 in [100, 50000] (log), d_c odd in [5, 25], N_b in [1, 3],
    /// at the given points per continuous axis.
    pub fn full(resolution: usize) -> Self {
        SearchSpace {
            epsilon_z_grid: linspace(0.5e6 * TAU, 40.5e6 * TAU, resolution),
            kappa2_ratio_grid: logspace(100.0, 50_000.0, resolution),
            d_c_set: (5..=25).step_by(2).collect(),
            n_b_set: vec![1, 2, 3],
        }
    }

    /// Default resolution of 81 points per continuous axis.
    pub fn default_full() -> Self {
        Self::full(81)
    }

    /// Same continuous grid with the code parameters pinned.
    pub fn restricted(d_c: u32, n_b: u32, resolution: usize) -> Self {
        SearchSpace {
            d_c_set: vec![d_c],
            n_b_set: vec![n_b],
            ..Self::full(resolution)
        }
    }

    fn validate(&self) -> Result<(), OptimizeError> {
        if self.epsilon_z_grid.is_empty()
            || self.kappa2_ratio_grid.is_empty()
            || self.d_c_set.is_empty()
            || self.n_b_set.is_empty()
        {
            return Err(OptimizeError::EmptySpace);
        }
        if let Some(&d) = self.d_c_set.iter().find(|&&d| d % 2 == 0) {
            return Err(OptimizeError::EvenDistance(d));
        }
        Ok(())
    }
}

pub fn linspace(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points <= 1 {
        return vec![lo];
    }
    (0..points)
        .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
        .collect()
}

pub fn logspace(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points <= 1 {
        return vec![lo];
    }
    let (l, h) = (lo.ln(), hi.ln());
    (0..points)
        .map(|i| (l + (h - l) * i as f64 / (points - 1) as f64).exp())
        .collect()
}

/// Everything an optimization run needs besides the grid.
#[derive(Debug, Clone, Copy)]
pub struct OptimizeContext<'a> {
    pub pc: &'a PhysicalConstants,
    pub mf: &'a MacroFactors,
    pub base_op: &'a OperatingPoint,
    pub g_cnot_mode: GCnotMode,
    pub flags: ChannelFlags,
    pub schedule: crate::circuit::ScheduleMode,
    /// Per-qubit wall-plug power, required only at the billed level.
    pub billed_power: Option<f64>,
}

/// The winning grid point.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct PointParams {
    pub epsilon_z: f64,
    pub kappa2_ratio: f64,
    pub d_c: u32,
    pub n_b: u32,
    pub g_cnot: f64,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct OptimizationResult {
    pub best_point: PointParams,
    pub energy: f64,
    pub total_time: f64,
    pub last_qubit_fidelity: f64,
    pub total_fidelity: f64,
    pub feasible: bool,
    pub evaluations: u64,
}

#[derive(Clone, Copy)]
struct Candidate {
    energy: f64,
    d_c: u32,
    ratio: f64,
    eps: f64,
    n_b: u32,
    g: f64,
    time: f64,
    last_fid: f64,
}

impl Candidate {
    /// Total order: minimum energy, ties broken toward lower d_c, ratio,
    /// epsilon_z, then N_b, so parallel reduction order cannot matter.
    fn better_than(&self, other: &Candidate) -> bool {
        (self.energy, self.d_c, self.ratio, self.eps, self.n_b)
            .partial_cmp(&(other.energy, other.d_c, other.ratio, other.eps, other.n_b))
            .map(|o| o.is_lt())
            .unwrap_or(false)
    }
}

struct GridOutcome {
    best_feasible: Option<Candidate>,
    best_fidelity: Option<Candidate>,
    evaluations: u64,
}

impl GridOutcome {
    fn empty() -> Self {
        GridOutcome {
            best_feasible: None,
            best_fidelity: None,
            evaluations: 0,
        }
    }

    fn merge(mut self, other: GridOutcome) -> Self {
        self.evaluations += other.evaluations;
        self.best_feasible = pick(self.best_feasible, other.best_feasible, |a, b| {
            a.better_than(b)
        });
        self.best_fidelity = pick(self.best_fidelity, other.best_fidelity, |a, b| {
            // highest fidelity, same deterministic tie-break on the knobs
            (b.last_fid, a.d_c, a.ratio, a.eps, a.n_b)
                .partial_cmp(&(a.last_fid, b.d_c, b.ratio, b.eps, b.n_b))
                .map(|o| o.is_lt())
                .unwrap_or(false)
        });
        self
    }
}

fn pick<F: Fn(&Candidate, &Candidate) -> bool>(
    a: Option<Candidate>,
    b: Option<Candidate>,
    prefer_a: F,
) -> Option<Candidate> {
    match (a, b) {
        (Some(x), Some(y)) => Some(if prefer_a(&x, &y) { x } else { y }),
        (x, None) => x,
        (None, y) => y,
    }
}

fn objective_energy(
    report_energy: f64,
    time: f64,
    d_c: u32,
    n: usize,
    level: EnergyLevel,
    ctx: &OptimizeContext,
) -> Result<f64, OptimizeError> {
    match level {
        EnergyLevel::Billed => {
            let power = ctx.billed_power.ok_or(OptimizeError::MissingBilledPower)?;
            let qubits = n * (3 * d_c as usize - 1);
            Ok(power * qubits as f64 * time)
        }
        _ => Ok(report_energy),
    }
}

/// Exhaustive grid minimization of total energy subject to a last-qubit
/// fidelity floor. Infeasible spaces return `feasible = false` together with
/// the maximum-fidelity point for diagnostics.
pub fn optimize(
    n: usize,
    threshold: f64,
    space: &SearchSpace,
    level: EnergyLevel,
    ctx: &OptimizeContext,
) -> Result<OptimizationResult, OptimizeError> {
    space.validate()?;
    if !(threshold > 2.0 / 3.0 && threshold < 1.0) {
        return Err(OptimizeError::BadThreshold(threshold));
    }
    if n == 0 {
        return Err(OptimizeError::BadRange);
    }
    if level == EnergyLevel::Billed && ctx.billed_power.is_none() {
        return Err(OptimizeError::MissingBilledPower);
    }
    let gate_level = match level {
        EnergyLevel::Billed => EnergyLevel::Macroscopic,
        other => other,
    };
    let t_readout = crate::gate::readout_optimal_time(ctx.pc);

    let pairs: Vec<(f64, f64)> = space
        .kappa2_ratio_grid
        .iter()
        .flat_map(|&ratio| space.epsilon_z_grid.iter().map(move |&eps| (ratio, eps)))
        .collect();

    let outcome = pairs
        .par_iter()
        .map(|&(ratio, eps)| {
            let mut op = ctx.base_op.clone();
            op.kappa2_ratio = ratio;
            op.epsilon_z = eps;
            op.level = gate_level;
            let g = match pipeline::resolve_g_cnot(ctx.pc, &op, ctx.g_cnot_mode, gate_level) {
                Ok(g) => g,
                Err(_) => return GridOutcome::empty(),
            };
            op.g_cnot = Some(g);
            let costs = match PointCosts::with_readout_time(ctx.pc, ctx.mf, &op, t_readout) {
                Ok(c) => c,
                Err(_) => return GridOutcome::empty(),
            };
            let mut local = GridOutcome::empty();
            for &d_c in &space.d_c_set {
                for &n_b in &space.n_b_set {
                    let code = CodeConfig {
                        d_c,
                        n_b,
                        enabled: true,
                    };
                    local.evaluations += 1;
                    let Ok(last_fid) =
                        pipeline::last_fidelity_fast(n, &code, &costs, ctx.flags, ctx.schedule)
                    else {
                        continue;
                    };
                    let Ok((energy, time)) =
                        pipeline::energy_time_fast(n, &code, &costs, gate_level, ctx.schedule)
                    else {
                        continue;
                    };
                    let Ok(objective) = objective_energy(energy, time, d_c, n, level, ctx)
                    else {
                        continue;
                    };
                    let candidate = Candidate {
                        energy: objective,
                        d_c,
                        ratio,
                        eps,
                        n_b,
                        g,
                        time,
                        last_fid,
                    };
                    if last_fid >= threshold {
                        local.best_feasible =
                            pick(local.best_feasible, Some(candidate), |a, b| {
                                a.better_than(b)
                            });
                    }
                    local.best_fidelity =
                        pick(local.best_fidelity, Some(candidate), |a, b| {
                            (b.last_fid, a.d_c, a.ratio, a.eps, a.n_b)
                                .partial_cmp(&(a.last_fid, b.d_c, b.ratio, b.eps, b.n_b))
                                .map(|o| o.is_lt())
                                .unwrap_or(false)
                        });
                }
            }
            local
        })
        .reduce(GridOutcome::empty, GridOutcome::merge);

    let (winner, feasible) = match (outcome.best_feasible, outcome.best_fidelity) {
        (Some(c), _) => (c, true),
        (None, Some(c)) => (c, false),
        (None, None) => return Err(OptimizeError::EmptySpace),
    };

    // independent recomputation of the winner through the full channel
    let mut op = ctx.base_op.clone();
    op.kappa2_ratio = winner.ratio;
    op.epsilon_z = winner.eps;
    op.g_cnot = Some(winner.g);
    op.level = gate_level;
    let costs = PointCosts::with_readout_time(ctx.pc, ctx.mf, &op, t_readout)?;
    let code = CodeConfig {
        d_c: winner.d_c,
        n_b: winner.n_b,
        enabled: true,
    };
    let full = pipeline::evaluate_fast(n, &code, &costs, ctx.flags, ctx.schedule)?;
    debug_assert!(
        !feasible || full.last_fidelity >= threshold,
        "feasibility must survive recomputation"
    );

    Ok(OptimizationResult {
        best_point: PointParams {
            epsilon_z: winner.eps,
            kappa2_ratio: winner.ratio,
            d_c: winner.d_c,
            n_b: winner.n_b,
            g_cnot: winner.g,
        },
        energy: winner.energy,
        total_time: winner.time,
        last_qubit_fidelity: full.last_fidelity,
        total_fidelity: full.total_fidelity,
        feasible,
        evaluations: outcome.evaluations,
    })
}

/// Independent per-size optimizations over a qubit-count range.
pub fn scaling_curve(
    n_range: &[usize],
    threshold: f64,
    space: &SearchSpace,
    level: EnergyLevel,
    ctx: &OptimizeContext,
) -> Result<Vec<(usize, OptimizationResult)>, OptimizeError> {
    if n_range.is_empty() || n_range.windows(2).any(|w| w[0] >= w[1]) {
        return Err(OptimizeError::BadRange);
    }
    n_range
        .iter()
        .map(|&n| optimize(n, threshold, space, level, ctx).map(|r| (n, r)))
        .collect()
}

/// Fit model families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum FitModel {
    /// a x^b + c
    PowerLaw,
    /// a e^(-b x) + c
    ExpDecay,
    /// a x + b
    Linear,
    /// a e^(-b x^c) + d
    StretchedExp,
}

impl FitModel {
    pub fn param_count(self) -> usize {
        match self {
            FitModel::Linear => 2,
            FitModel::PowerLaw | FitModel::ExpDecay => 3,
            FitModel::StretchedExp => 4,
        }
    }

    fn eval(self, params: &[f64], x: f64) -> f64 {
        match self {
            FitModel::PowerLaw => params[0] * x.powf(params[1]) + params[2],
            FitModel::ExpDecay => params[0] * (-params[1] * x).exp() + params[2],
            FitModel::Linear => params[0] * x + params[1],
            FitModel::StretchedExp => {
                params[0] * (-params[1] * x.powf(params[2])).exp() + params[3]
            }
        }
    }

    fn jacobian_row(self, params: &[f64], x: f64, row: &mut [f64]) {
        match self {
            FitModel::PowerLaw => {
                let xb = x.powf(params[1]);
                row[0] = xb;
                row[1] = params[0] * xb * x.ln();
                row[2] = 1.0;
            }
            FitModel::ExpDecay => {
                let e = (-params[1] * x).exp();
                row[0] = e;
                row[1] = -params[0] * x * e;
                row[2] = 1.0;
            }
            FitModel::Linear => {
                row[0] = x;
                row[1] = 1.0;
            }
            FitModel::StretchedExp => {
                let xc = x.powf(params[2]);
                let e = (-params[1] * xc).exp();
                row[0] = e;
                row[1] = -params[0] * xc * e;
                row[2] = -params[0] * params[1] * xc * x.ln().max(-745.0) * e;
                row[3] = 1.0;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ScalingFit {
    pub model: FitModel,
    pub params: Vec<f64>,
    /// Euclidean norm of the residual vector.
    pub residual_norm: f64,
}

fn sse(model: FitModel, params: &[f64], data: &[(f64, f64)]) -> f64 {
    data.iter()
        .map(|&(x, y)| {
            let r = model.eval(params, x) - y;
            r * r
        })
        .sum()
}

/// Solve the small symmetric system A delta = b in place (n <= 4).
fn solve_small(n: usize, a: &mut [[f64; 4]; 4], b: &mut [f64; 4]) -> Option<[f64; 4]> {
    for col in 0..n {
        let mut pivot = col;
        for row in col + 1..n {
            if a[row][col].abs() > a[pivot][col].abs() {
                pivot = row;
            }
        }
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = [0.0f64; 4];
    for col in (0..n).rev() {
        let mut sum = b[col];
        for k in col + 1..n {
            sum -= a[col][k] * x[k];
        }
        x[col] = sum / a[col][col];
    }
    Some(x)
}

/// Given fixed nonlinear parameters, solve the linear amplitude/offset pair
/// (a, c) of y = a phi(x) + c by least squares.
fn linear_pair(data: &[(f64, f64)], phi: impl Fn(f64) -> f64) -> Option<(f64, f64)> {
    let n = data.len() as f64;
    let (mut sp, mut spp, mut sy, mut spy) = (0.0, 0.0, 0.0, 0.0);
    for &(x, y) in data {
        let p = phi(x);
        if !p.is_finite() {
            return None;
        }
        sp += p;
        spp += p * p;
        sy += y;
        spy += p * y;
    }
    let det = n * spp - sp * sp;
    if det.abs() < 1e-300 {
        return None;
    }
    let a = (n * spy - sp * sy) / det;
    let c = (spp * sy - sp * spy) / det;
    Some((a, c))
}

fn gauss_newton(
    model: FitModel,
    mut params: Vec<f64>,
    data: &[(f64, f64)],
) -> (Vec<f64>, f64, bool) {
    let p = model.param_count();
    let mut lambda = 1e-6f64;
    let mut current_sse = sse(model, &params, data);
    let scale: f64 = 1.0 + data.iter().map(|&(_, y)| y * y).sum::<f64>();
    let mut converged = false;
    for _ in 0..200 {
        // gradient = J^T r, normal matrix = J^T J
        let mut jtj = [[0.0f64; 4]; 4];
        let mut jtr = [0.0f64; 4];
        let mut row = [0.0f64; 4];
        for &(x, y) in data {
            let r = model.eval(&params, x) - y;
            model.jacobian_row(&params, x, &mut row[..p]);
            for i in 0..p {
                jtr[i] += row[i] * r;
                for j in 0..p {
                    jtj[i][j] += row[i] * row[j];
                }
            }
        }
        let grad_norm = jtr[..p].iter().map(|g| g * g).sum::<f64>().sqrt();
        if grad_norm <= 1e-10 * scale.sqrt() {
            converged = true;
            break;
        }
        // damped step, re-damping until the residual does not increase
        let mut stepped = false;
        for _ in 0..40 {
            let mut a = jtj;
            for (i, row) in a.iter_mut().enumerate().take(p) {
                row[i] += lambda * (1.0 + jtj[i][i]);
            }
            let mut b = [0.0f64; 4];
            for i in 0..p {
                b[i] = -jtr[i];
            }
            if let Some(delta) = solve_small(p, &mut a, &mut b) {
                let trial: Vec<f64> =
                    params.iter().zip(&delta[..p]).map(|(v, d)| v + d).collect();
                let trial_sse = sse(model, &trial, data);
                if trial_sse.is_finite() && trial_sse <= current_sse {
                    let improvement = current_sse - trial_sse;
                    params = trial;
                    current_sse = trial_sse;
                    lambda = (lambda / 3.0).max(1e-14);
                    stepped = true;
                    if improvement <= 1e-16 * scale {
                        converged = true;
                    }
                    break;
                }
            }
            lambda *= 10.0;
            if lambda > 1e12 {
                break;
            }
        }
        if converged {
            break;
        }
        if !stepped {
            // stationary under damping: accept if the gradient is small
            converged = grad_norm <= 1e-6 * scale.sqrt();
            break;
        }
    }
    (params, current_sse, converged)
}

/// Least-squares fit by multi-start separable search plus damped
/// Gauss-Newton refinement; returns the best start.
pub fn fit(model: FitModel, data: &[(f64, f64)]) -> Result<ScalingFit, OptimizeError> {
    let needed = model.param_count() + 1;
    if data.len() < needed {
        return Err(OptimizeError::NotEnoughPoints {
            needed,
            got: data.len(),
        });
    }
    let y0 = data[0].1;
    if data.iter().all(|&(_, y)| y == y0) {
        return Err(OptimizeError::DegenerateData);
    }
    if model == FitModel::PowerLaw && data.iter().any(|&(x, _)| x <= 0.0) {
        return Err(OptimizeError::NonPositiveAbscissa);
    }

    if model == FitModel::Linear {
        let (a, b) =
            linear_pair(data, |x| x).ok_or(OptimizeError::DegenerateData)?;
        let params = vec![a, b];
        let residual_norm = sse(model, &params, data).sqrt();
        return Ok(ScalingFit {
            model,
            params,
            residual_norm,
        });
    }

    let mut starts: Vec<Vec<f64>> = Vec::new();
    match model {
        FitModel::PowerLaw => {
            for b in logspace(0.05, 12.0, 60) {
                if let Some((a, c)) = linear_pair(data, |x| x.powf(b)) {
                    starts.push(vec![a, b, c]);
                }
            }
        }
        FitModel::ExpDecay => {
            let x_max = data.iter().map(|&(x, _)| x).fold(f64::MIN, f64::max);
            for b in logspace(1e-3, 10.0 / x_max.max(1e-12), 60) {
                if let Some((a, c)) = linear_pair(data, |x| (-b * x).exp()) {
                    starts.push(vec![a, b, c]);
                }
            }
        }
        FitModel::StretchedExp => {
            let x_max = data.iter().map(|&(x, _)| x).fold(f64::MIN, f64::max);
            for c in [0.5, 0.8, 1.0, 1.2, 1.5, 2.0] {
                for b in logspace(1e-3, 10.0 / x_max.powf(c).max(1e-12), 24) {
                    if let Some((a, d)) = linear_pair(data, |x| (-b * x.powf(c)).exp()) {
                        starts.push(vec![a, b, c, d]);
                    }
                }
            }
        }
        FitModel::Linear => unreachable!(),
    }
    if starts.is_empty() {
        return Err(OptimizeError::DegenerateData);
    }

    let refined: Vec<(Vec<f64>, f64, bool)> = starts
        .into_par_iter()
        .map(|start| gauss_newton(model, start, data))
        .collect();
    let best = refined
        .into_iter()
        .filter(|(_, sse_value, _)| sse_value.is_finite())
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .ok_or(OptimizeError::NonConvergence)?;
    if !best.2 {
        return Err(OptimizeError::NonConvergence);
    }
    Ok(ScalingFit {
        model,
        params: best.0,
        residual_norm: best.1.sqrt(),
    })
}
