//! Scratch probe for calibrating acceptance expectations. Not shipped
//! behavior; run with `cargo run --release -p catwatt-core --example probe`.

use std::f64::consts::TAU;
use std::time::Instant;

use catwatt_core::optimize::{self, FitModel, OptimizeContext, SearchSpace};
use catwatt_core::params::{self, CodeConfig, EnergyLevel, GCnotMode};
use catwatt_core::pipeline::{self, ChannelFlags, PointCosts};

fn main() {
    let cfg = params::parse_config(params::SAMPLE_CONFIG).unwrap();
    let pc = &cfg.constants;
    let mf = &cfg.macro_factors;

    // --- Fig. 4 style fidelity decay ---
    let mut op = cfg.operating_point.clone();
    op.kappa2_ratio = 1000.0;
    op.epsilon_z = TAU * 1e6;
    op.g_cnot = Some(TAU * 1e6);
    let costs = PointCosts::new(pc, mf, &op).unwrap();
    let mode = catwatt_core::circuit::ScheduleMode::Serial;
    let mut data = Vec::new();
    for n in 2..=30 {
        let report = pipeline::evaluate_fast(
            n,
            &CodeConfig::physical(),
            &costs,
            ChannelFlags::default(),
            mode,
        )
        .unwrap();
        data.push((n as f64, report.total_fidelity));
    }
    let fit = optimize::fit(FitModel::ExpDecay, &data).unwrap();
    println!(
        "fig4 expdecay: a={:.4} b={:.4} c={:.4} resid={:.2e}",
        fit.params[0], fit.params[1], fit.params[2], fit.residual_norm
    );

    let ctx = OptimizeContext {
        pc,
        mf,
        base_op: &cfg.operating_point,
        g_cnot_mode: GCnotMode::Derived,
        flags: ChannelFlags::default(),
        schedule: mode,
        billed_power: None,
    };

    let n_range: Vec<usize> = (2..=50).collect();

    // --- restricted space (d_c = 5, n_b = 1) ---
    let restricted = SearchSpace::restricted(5, 1, 81);
    for level in [EnergyLevel::Macroscopic, EnergyLevel::Microscopic] {
        let t0 = Instant::now();
        let curve = optimize::scaling_curve(&n_range, 0.900, &restricted, level, &ctx).unwrap();
        let feasible: Vec<(f64, f64)> = curve
            .iter()
            .filter(|(_, r)| r.feasible)
            .map(|(n, r)| (*n as f64, r.energy))
            .collect();
        let infeasible = curve.iter().filter(|(_, r)| !r.feasible).count();
        let fit = optimize::fit(FitModel::PowerLaw, &feasible).unwrap();
        println!(
            "restricted {level}: b={:.3} a={:.3e} c={:.3e} infeasible={} t={:?}",
            fit.params[1],
            fit.params[0],
            fit.params[2],
            infeasible,
            t0.elapsed()
        );
    }

    // --- full space ---
    let full = SearchSpace::default_full();
    let mut macro_curve = Vec::new();
    for level in [EnergyLevel::Macroscopic, EnergyLevel::Microscopic] {
        let t0 = Instant::now();
        let curve = optimize::scaling_curve(&n_range, 0.900, &full, level, &ctx).unwrap();
        let feasible: Vec<(f64, f64)> = curve
            .iter()
            .filter(|(_, r)| r.feasible)
            .map(|(n, r)| (*n as f64, r.energy))
            .collect();
        let fit = optimize::fit(FitModel::PowerLaw, &feasible).unwrap();
        println!(
            "full {level}: b={:.3} a={:.3e} c={:.3e} t={:?}",
            fit.params[1],
            fit.params[0],
            fit.params[2],
            t0.elapsed()
        );
        for (n, r) in curve.iter().filter(|(n, _)| [10, 20, 30, 40, 50].contains(n)) {
            println!(
                "  n={n}: E={:.3e} t={:.3e} dc={} nb={} ratio={:.0} eps={:.2}MHz F={:.4}",
                r.energy,
                r.total_time,
                r.best_point.d_c,
                r.best_point.n_b,
                r.best_point.kappa2_ratio,
                r.best_point.epsilon_z / TAU / 1e6,
                r.last_qubit_fidelity
            );
        }
        if level == EnergyLevel::Macroscopic {
            macro_curve = curve;
        }
    }

    // --- crossovers ---
    let kairos = cfg.machine("kairos").unwrap();
    let el_capitan = cfg.machine("el_capitan").unwrap();
    let energy_macro: Vec<(u32, f64)> = macro_curve
        .iter()
        .map(|(n, r)| (*n as u32, r.energy))
        .collect();
    let table =
        catwatt_core::classical::compare(&energy_macro, kairos, catwatt_core::CompareMode::Energy)
            .unwrap();
    println!("macro energy vs kairos: first advantage at {:?}", table.first_advantage_n);

    let time_curve: Vec<(u32, f64)> = macro_curve
        .iter()
        .map(|(n, r)| (*n as u32, r.total_time))
        .collect();
    for machine in [kairos, el_capitan] {
        let table = catwatt_core::classical::compare(
            &time_curve,
            machine,
            catwatt_core::CompareMode::Time,
        )
        .unwrap();
        println!(
            "time vs {}: first advantage at {:?}",
            machine.name, table.first_advantage_n
        );
    }

    // table V style ratios at the n = 30 macro optimum
    if let Some((_, r)) = macro_curve.iter().find(|(n, _)| *n == 30) {
        let mut op = cfg.operating_point.clone();
        op.kappa2_ratio = r.best_point.kappa2_ratio;
        op.epsilon_z = r.best_point.epsilon_z;
        op.g_cnot = Some(r.best_point.g_cnot);
        op.level = EnergyLevel::Macroscopic;
        let zc = catwatt_core::gate::gate_cost(
            catwatt_core::GateKind::ZRot(std::f64::consts::PI / 2.0),
            pc,
            mf,
            &op,
        )
        .unwrap();
        let cc = catwatt_core::gate::gate_cost(
            catwatt_core::GateKind::Cnot(catwatt_core::gate::CnotRole::Target),
            pc,
            mf,
            &op,
        )
        .unwrap();
        let e_flop = kairos.energy_per_flop;
        let t_flop = 1.0 / kairos.rmax;
        println!(
            "tableV ratios: Ez/Ef={:.1e} (5e3) Ec/Ef={:.1e} (3e4) Tz/Tf={:.1e} (1e7) Tc/Tf={:.1e} (8e7)",
            zc.energy / e_flop,
            cc.energy / e_flop,
            zc.duration / t_flop,
            cc.duration / t_flop
        );
    }
}
