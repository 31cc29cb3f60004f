//! Scratch tuning sweep for learner hyperparameters (dev aid).

use psr_core::learners::{
    explorative_e2d, mle_hellinger_check, mops, omle, rf_e2d, ClassContext, E2dConfig, MopsConfig,
    OmleConfig, OptimisticCover, RfE2dConfig,
};
use psr_core::{fixtures, Caps};

fn main() {
    let caps = Caps::default();
    let class = fixtures::noisy_class(&caps).unwrap();
    let ctx = ClassContext::new(class, caps).unwrap();
    let cover = OptimisticCover::exact(&ctx.class, &ctx.caps).unwrap();
    println!("pool size = {}", ctx.pool.len());
    for (i, l) in ctx.pool_labels.iter().enumerate() {
        println!(
            "  pool[{i}] {l}: V_truth = {:.4}, subopt_truth = {:.4}",
            ctx.truth_value_pool[i],
            ctx.v_star - ctx.truth_value_pool[i]
        );
    }
    println!("opt values: {:?}", ctx.opt_values);
    println!("truth value of opt: {:?}", ctx.truth_value_of_opt);

    // OMLE: K=200, beta = 2 ln(8*100), 30 seeds.
    let beta = 2.0 * (800.0_f64).ln();
    let mut in_set = 0;
    let mut slack_ok = 0;
    let mut subopts = Vec::new();
    for seed in 0..30 {
        let run = omle(&ctx, &OmleConfig { iterations: 200, beta, seed }).unwrap();
        in_set += run.truth_always_in_set as usize;
        let slacks = mle_hellinger_check(&ctx, &run, beta).unwrap();
        slack_ok += slacks.iter().all(|&s| s <= 0.0) as usize;
        subopts.push(run.final_subopt);
    }
    let mean: f64 = subopts.iter().sum::<f64>() / subopts.len() as f64;
    println!("OMLE K=200 beta={beta:.2}: in_set {in_set}/30, slack_ok {slack_ok}/30, mean subopt {mean:.4}");

    // OMLE convergence trend at K=500.
    let mut s500 = Vec::new();
    let mut s125 = Vec::new();
    for seed in 0..20 {
        let run = omle(&ctx, &OmleConfig { iterations: 500, beta, seed }).unwrap();
        s500.push(run.final_subopt);
        s125.push(run.log.subopt_at(125).unwrap());
    }
    println!(
        "OMLE K=500: mean {:.4}, at K/4 {:.4}",
        s500.iter().sum::<f64>() / 20.0,
        s125.iter().sum::<f64>() / 20.0
    );

    // E2D gamma sweep.
    for gamma in [5.0, 10.0, 20.0, 50.0] {
        let mut fin = Vec::new();
        let mut quarter = Vec::new();
        for seed in 0..8 {
            let run = explorative_e2d(&ctx, &cover, &E2dConfig::new(400, gamma, seed)).unwrap();
            fin.push(run.final_subopt);
            quarter.push(run.log.subopt_at(100).unwrap());
        }
        println!(
            "E2D gamma={gamma}: mean final {:.4}, at T/4 {:.4}",
            fin.iter().sum::<f64>() / fin.len() as f64,
            quarter.iter().sum::<f64>() / quarter.len() as f64
        );
    }

    // MOPS gamma sweep.
    for gamma in [5.0, 10.0, 20.0, 50.0] {
        let mut fin = Vec::new();
        let mut quarter = Vec::new();
        let mut mass = 0;
        for seed in 0..8 {
            let run = mops(&ctx, &cover, &MopsConfig::new(400, gamma, seed)).unwrap();
            fin.push(run.final_subopt);
            quarter.push(run.log.subopt_at(100).unwrap());
            if run.final_posterior[ctx.class.truth] >= 0.9 {
                mass += 1;
            }
        }
        println!(
            "MOPS gamma={gamma}: mean final {:.4}, at T/4 {:.4}, mass>=0.9 {mass}/8",
            fin.iter().sum::<f64>() / fin.len() as f64,
            quarter.iter().sum::<f64>() / quarter.len() as f64
        );
    }

    // RF-E2D gamma sweep.
    for gamma in [5.0, 10.0, 20.0, 50.0] {
        let mut errs = Vec::new();
        let mut ok = 0;
        for seed in 0..8 {
            let run = rf_e2d(&ctx, &cover, &RfE2dConfig::new(400, gamma, seed)).unwrap();
            errs.push(run.estimation_error);
            if run.estimation_error <= 0.1 {
                ok += 1;
            }
        }
        println!(
            "RF-E2D gamma={gamma}: mean err {:.4}, ok {ok}/8",
            errs.iter().sum::<f64>() / errs.len() as f64
        );
    }
}
