//! Model-based optimistic posterior sampling: the posterior weights each
//! member by its optimism bonus `t V_theta(pi_theta) / gamma` plus the
//! tempered log-likelihood of the executed episodes; exploration draws a
//! member and a pivot step, then plays the composed exploration policy.

use rand::Rng;
use serde::Serialize;

use super::log::{trajectory_text, IterRecord, RunLog};
use super::{entropy, ClassContext, OptimisticCover, LOG_FLOOR};
use crate::model::Policy;
use crate::rng::{rng_for, sample_weighted};
use crate::Result;

const ALG_TAG: u64 = 0x014C_E003;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct MopsConfig {
    pub episodes: usize,
    pub gamma: f64,
    /// Tempered learning rate (1/6 unless overridden).
    pub eta: f64,
    pub seed: u64,
}

impl MopsConfig {
    pub fn new(episodes: usize, gamma: f64, seed: u64) -> Self {
        MopsConfig {
            episodes,
            gamma,
            eta: 1.0 / 6.0,
            seed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MopsRun {
    pub log: RunLog,
    /// Mean posterior over class members (defines the output mixture).
    pub mean_posterior: Vec<f64>,
    pub output: Policy,
    pub final_subopt: f64,
    pub final_posterior: Vec<f64>,
}

pub fn mops(ctx: &ClassContext, cover: &OptimisticCover, cfg: &MopsConfig) -> Result<MopsRun> {
    let n_cover = cover.member_indices.len();
    let horizon = ctx.class.members[0].horizon;
    let truth_model = ctx.class.truth_model();

    let mut cum_ll = vec![0.0_f64; n_cover];
    let mut excluded = vec![false; n_cover];
    let mut mean_mu = vec![0.0_f64; ctx.n_models()];
    let mut cum_inst = 0.0;

    let mut log = RunLog::new(
        "mops",
        cfg.seed,
        format!("T={} gamma={} eta={}", cfg.episodes, cfg.gamma, cfg.eta),
    );

    for t in 1..=cfg.episodes {
        // mu^t(theta) ∝ exp((t-1)/gamma * V_theta(pi_theta) + eta * cum_ll).
        let bonus_scale = (t - 1) as f64 / cfg.gamma;
        let log_w: Vec<f64> = (0..n_cover)
            .map(|j| {
                let theta = cover.member_indices[j];
                bonus_scale * ctx.opt_values[theta] + cum_ll[j]
            })
            .collect();
        let mu = posterior(&log_w, &excluded);
        let mut mu_class = vec![0.0; ctx.n_models()];
        for (j, &theta) in cover.member_indices.iter().enumerate() {
            mu_class[theta] += mu[j];
        }

        let mut rng = rng_for(cfg.seed, &[ALG_TAG, t as u64, 0]);
        let j = sample_weighted(&mut rng, &mu);
        let theta_t = cover.member_indices[j];
        let h_t = rng.random_range(0..horizon);
        let pexp = ctx.exploration_policy(theta_t, h_t)?;
        let mut rng_ep = rng_for(cfg.seed, &[ALG_TAG, t as u64, 1]);
        let tau = truth_model.sample_trajectory(&pexp, &mut rng_ep);

        let idx = ctx.indexer.encode(&tau);
        for k in 0..n_cover {
            let p = cover.tables[k][idx];
            if p > 0.0 {
                cum_ll[k] += cfg.eta * p.ln().max(LOG_FLOOR);
            } else {
                excluded[k] = true;
            }
        }
        assert!(!excluded.iter().all(|&e| e), "truth-dominating member excluded");

        for (m, &w) in mean_mu.iter_mut().zip(&mu_class) {
            *m += w;
        }
        // p_out(mu) plays pi_theta with probability mu(theta).
        let inst = ctx.v_star
            - mu_class
                .iter()
                .zip(&ctx.truth_value_of_opt)
                .map(|(w, v)| w * v)
                .sum::<f64>();
        cum_inst += inst;
        log.records.push(IterRecord {
            iter: t,
            model_idx: Some(theta_t),
            policy: format!("exp[h={h_t}](opt[{theta_t}])"),
            trajectories: vec![trajectory_text(&tau)],
            set_size: mu.iter().filter(|&&w| w > 1e-12).count(),
            posterior_entropy: entropy(&mu),
            inst_subopt: inst,
            cum_subopt: cum_inst / t as f64,
        });
    }

    let scale = 1.0 / cfg.episodes as f64;
    mean_mu.iter_mut().for_each(|w| *w *= scale);
    let total: f64 = mean_mu.iter().sum();
    let mut parts: Vec<(f64, Policy)> = mean_mu
        .iter()
        .enumerate()
        .filter(|(_, &w)| w > 0.0)
        .map(|(theta, &w)| (w / total, ctx.opt_policies[theta].clone()))
        .collect();
    let s: f64 = parts.iter().map(|(w, _)| *w).sum();
    if let Some(last) = parts.last_mut() {
        last.0 += 1.0 - s;
    }
    let output = Policy::mixture(parts)?;
    let final_subopt = log.final_subopt();

    let bonus_scale = cfg.episodes as f64 / cfg.gamma;
    let log_w: Vec<f64> = (0..n_cover)
        .map(|j| bonus_scale * ctx.opt_values[cover.member_indices[j]] + cum_ll[j])
        .collect();
    let final_posterior = posterior(&log_w, &excluded);
    Ok(MopsRun {
        log,
        mean_posterior: mean_mu,
        output,
        final_subopt,
        final_posterior,
    })
}

fn posterior(log_w: &[f64], excluded: &[bool]) -> Vec<f64> {
    let max = log_w
        .iter()
        .zip(excluded)
        .filter(|(_, &e)| !e)
        .map(|(&v, _)| v)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut w: Vec<f64> = log_w
        .iter()
        .zip(excluded)
        .map(|(&v, &e)| if e { 0.0 } else { (v - max).exp() })
        .collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    w
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::psr::{CoreTestSet, ModelClass};
    use crate::Caps;

    #[test]
    fn singleton_class_outputs_truth_policy() {
        let caps = Caps::default();
        let core = CoreTestSet::windowed(2, 2, 2, 1, &caps).unwrap();
        let class = ModelClass::new(vec![fixtures::fix_noisy()], 0, core).unwrap();
        let ctx = ClassContext::new(class, caps).unwrap();
        let cover = OptimisticCover::exact(&ctx.class, &ctx.caps).unwrap();
        let run = mops(&ctx, &cover, &MopsConfig::new(4, 10.0, 5)).unwrap();
        assert!(run.final_subopt.abs() < 1e-12);
    }

    #[test]
    fn frozen_prior_when_eta_zero_and_gamma_infinite() {
        let caps = Caps::default();
        let class = fixtures::noisy_class(&caps).unwrap();
        let ctx = ClassContext::new(class, caps).unwrap();
        let cover = OptimisticCover::exact(&ctx.class, &ctx.caps).unwrap();
        let mut cfg = MopsConfig::new(6, f64::INFINITY, 9);
        cfg.eta = 0.0;
        let run = mops(&ctx, &cover, &cfg).unwrap();
        for r in &run.log.records {
            assert_eq!(r.set_size, 8);
            assert!((r.posterior_entropy - (8.0_f64).ln()).abs() < 1e-9);
        }
    }

    #[test]
    fn posterior_sums_to_one_every_step() {
        let caps = Caps::default();
        let class = fixtures::noisy_class(&caps).unwrap();
        let ctx = ClassContext::new(class, caps).unwrap();
        let cover = OptimisticCover::exact(&ctx.class, &ctx.caps).unwrap();
        let run = mops(&ctx, &cover, &MopsConfig::new(30, 20.0, 21)).unwrap();
        // Mean posterior is an average of normalized posteriors.
        let total: f64 = run.mean_posterior.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        let b = mops(&ctx, &cover, &MopsConfig::new(30, 20.0, 21)).unwrap();
        assert_eq!(run.log, b.log);
    }
}
