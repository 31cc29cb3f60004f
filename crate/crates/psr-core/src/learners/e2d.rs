//! Explorative estimation-to-decisions over a finite class: per episode,
//! solve the regret-vs-information saddle at the current posterior, execute a
//! draw from the exploration distribution, and run the tempered-aggregation
//! update on the optimistic likelihoods.

use serde::Serialize;

use super::log::{trajectory_text, IterRecord, RunLog};
use super::saddle::{solve_min_simplex_pair, BestResponse, SaddleConfig, SaddleOutcome};
use super::{entropy, ClassContext, OptimisticCover, LOG_FLOOR};
use crate::model::Policy;
use crate::rng::{rng_for, sample_weighted};
use crate::Result;

const ALG_TAG: u64 = 0x014C_E002;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct E2dConfig {
    pub episodes: usize,
    pub gamma: f64,
    /// Tempered-aggregation learning rate (1/3 unless overridden).
    pub eta: f64,
    pub seed: u64,
    pub saddle: SaddleConfig,
}

impl E2dConfig {
    pub fn new(episodes: usize, gamma: f64, seed: u64) -> Self {
        E2dConfig {
            episodes,
            gamma,
            eta: 1.0 / 3.0,
            seed,
            saddle: SaddleConfig::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct E2dRun {
    pub log: RunLog,
    /// Mean of the per-episode output distributions over the policy pool.
    pub output_weights: Vec<f64>,
    pub output: Policy,
    pub final_subopt: f64,
    /// Posterior over cover members at the end of the run.
    pub final_posterior: Vec<f64>,
}

/// Solves the explorative-DEC saddle at posterior `mu`:
/// `min_{p_exp, p_out} max_theta E_{p_out}[V_theta(pi_theta) - V_theta(pi)]
///  - gamma E_{p_exp} E_{theta_bar ~ mu}[D_H^2]`.
/// Expected quantities come from the precomputed exact tables.
pub fn edec_saddle(
    ctx: &ClassContext,
    mu: &[f64],
    gamma: f64,
    cfg: &SaddleConfig,
    warm: Option<(Vec<f64>, Vec<f64>)>,
) -> SaddleOutcome {
    let n = ctx.n_models();
    let pool = ctx.pool.len();
    // info[theta][i] = E_{theta_bar ~ mu} D_H^2(P^i_theta, P^i_theta_bar).
    let info: Vec<Vec<f64>> = (0..n)
        .map(|t| {
            (0..pool)
                .map(|i| (0..n).map(|u| mu[u] * ctx.hell[t][u][i]).sum())
                .collect()
        })
        .collect();
    let oracle = |p_out: &[f64], p_exp: &[f64]| {
        let mut best = f64::NEG_INFINITY;
        let mut best_t = 0;
        for t in 0..n {
            let a: f64 = p_out.iter().zip(&ctx.subopt[t]).map(|(p, c)| p * c).sum();
            let b: f64 = p_exp.iter().zip(&info[t]).map(|(p, c)| p * c).sum();
            let v = a - gamma * b;
            if v > best {
                best = v;
                best_t = t;
            }
        }
        BestResponse {
            value: best,
            grad1: ctx.subopt[best_t].clone(),
            grad2: info[best_t].iter().map(|c| -gamma * c).collect(),
            offset: 0.0,
        }
    };
    solve_min_simplex_pair(pool, pool, oracle, cfg, warm)
}

pub fn explorative_e2d(ctx: &ClassContext, cover: &OptimisticCover, cfg: &E2dConfig) -> Result<E2dRun> {
    let n_cover = cover.member_indices.len();
    let pool = ctx.pool.len();
    let truth_model = ctx.class.truth_model();

    // Posterior over cover members, kept as cumulative log-weights.
    let mut log_w = vec![0.0_f64; n_cover];
    let mut excluded = vec![false; n_cover];
    let mut out_weights = vec![0.0_f64; pool];
    let mut warm: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut cum_inst = 0.0;

    let mut log = RunLog::new(
        "e2d",
        cfg.seed,
        format!("T={} gamma={} eta={}", cfg.episodes, cfg.gamma, cfg.eta),
    );

    for t in 1..=cfg.episodes {
        let mu = normalized_posterior(&log_w, &excluded);
        // The saddle sees the posterior pushed onto class indices.
        let mut mu_class = vec![0.0; ctx.n_models()];
        for (j, &theta) in cover.member_indices.iter().enumerate() {
            mu_class[theta] += mu[j];
        }
        let saddle = edec_saddle(ctx, &mu_class, cfg.gamma, &cfg.saddle, warm.take());
        warm = Some((saddle.p1.clone(), saddle.p2.clone()));
        let (p_out, p_exp) = (&saddle.p1, &saddle.p2);

        let mut rng = rng_for(cfg.seed, &[ALG_TAG, t as u64, 0]);
        let pi_idx = sample_weighted(&mut rng, p_exp);
        let mut rng_ep = rng_for(cfg.seed, &[ALG_TAG, t as u64, 1]);
        let tau = truth_model.sample_trajectory(&ctx.pool[pi_idx], &mut rng_ep);

        // Tempered aggregation on the optimistic likelihoods.
        let idx = ctx.indexer.encode(&tau);
        for j in 0..n_cover {
            let p = cover.tables[j][idx];
            if p > 0.0 {
                log_w[j] += cfg.eta * p.ln().max(LOG_FLOOR);
            } else {
                excluded[j] = true;
            }
        }
        assert!(
            !excluded.iter().all(|&e| e),
            "every cover member excluded; the truth must dominate some member"
        );

        for (w, p) in out_weights.iter_mut().zip(p_out) {
            *w += p;
        }
        let inst = ctx.v_star
            - p_out
                .iter()
                .zip(&ctx.truth_value_pool)
                .map(|(p, v)| p * v)
                .sum::<f64>();
        cum_inst += inst;
        let mu_next = normalized_posterior(&log_w, &excluded);
        log.records.push(IterRecord {
            iter: t,
            model_idx: None,
            policy: format!("p_exp -> {}", ctx.pool_labels[pi_idx]),
            trajectories: vec![trajectory_text(&tau)],
            set_size: mu_next.iter().filter(|&&w| w > 1e-12).count(),
            posterior_entropy: entropy(&mu_next),
            inst_subopt: inst,
            cum_subopt: cum_inst / t as f64,
        });
    }

    let scale = 1.0 / cfg.episodes as f64;
    out_weights.iter_mut().for_each(|w| *w *= scale);
    let output = Policy::mixture(normalize_weights(&out_weights, &ctx.pool))?;
    let final_subopt = log.final_subopt();
    let final_posterior = normalized_posterior(&log_w, &excluded);
    Ok(E2dRun {
        log,
        output_weights: out_weights,
        output,
        final_subopt,
        final_posterior,
    })
}

fn normalized_posterior(log_w: &[f64], excluded: &[bool]) -> Vec<f64> {
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

fn normalize_weights(weights: &[f64], pool: &[Policy]) -> Vec<(f64, Policy)> {
    let total: f64 = weights.iter().sum();
    let mut parts: Vec<(f64, Policy)> = weights
        .iter()
        .zip(pool)
        .filter(|(&w, _)| w > 0.0)
        .map(|(&w, p)| (w / total, p.clone()))
        .collect();
    // Exact renormalization against rounding.
    let s: f64 = parts.iter().map(|(w, _)| *w).sum();
    if let Some(last) = parts.last_mut() {
        last.0 += 1.0 - s;
    }
    parts
}
