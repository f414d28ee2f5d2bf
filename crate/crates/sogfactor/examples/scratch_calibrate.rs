// Scratch calibration probe: grid over feedback/memory gains on direct
// models of a few sizes; prints convergence fraction and median tts.
use std::sync::Arc;

use num_traits::ToPrimitive;
use sogfactor::ilp::presolve;
use sogfactor::model_direct::{compile_direct, DirectOptions};
use sogfactor::numtheory::generate_benchmark_biprime;
use sogfactor::sog::{run_ensemble, DesignParams};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let bits: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(12);
    let runs: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(24);
    let budget: f64 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(100.0);

    let bp = generate_benchmark_biprime(bits, 1).unwrap();
    println!("n = {} = {} * {} ({} bits)", bp.n, bp.p, bp.q, bits);
    let (model, layout) = compile_direct(
        &bp.n,
        bits / 2,
        bits / 2,
        &DirectOptions::default(),
    )
    .unwrap();
    println!(
        "model: {} vars, {} constraints, {} s vars, {} r vars, {} groups",
        model.num_vars(),
        model.num_constraints(),
        layout.block.s_count(),
        layout.block.r_count(),
        layout.block.group_count
    );
    let (reduced, fixed) = presolve(&model).expect_reduced();
    println!(
        "presolved: {} constraints, {} fixed vars",
        reduced.num_constraints(),
        fixed.len()
    );
    let model = Arc::new(reduced);

    for gamma in [0.5, 1.0, 2.0, 4.0] {
        for alpha in [1.0, 4.0, 16.0] {
            for beta in [0.1, 1.0] {
                let mut p = DesignParams::default();
                p.default_family.feedback_gain = gamma;
                p.default_family.memory_growth = alpha;
                p.default_family.memory_decay = beta;
                p.global.time_budget_us = budget;
                let e = run_ensemble(&model, &p, runs, 7, None).unwrap();
                let mut tts = e.tts_samples();
                tts.sort_by(f64::total_cmp);
                let median = tts.get(tts.len() / 2).copied().unwrap_or(f64::NAN);
                let mean_unsat: f64 = e
                    .outcomes
                    .iter()
                    .map(|o| o.min_unsat.to_f64().unwrap())
                    .sum::<f64>()
                    / runs as f64;
                println!(
                    "gamma={gamma:<4} alpha={alpha:<4} beta={beta:<4} -> conv {:>5.2} median_tts {median:>8.2} us  min_unsat avg {mean_unsat:.1}",
                    e.convergence_fraction
                );
            }
        }
    }
}
