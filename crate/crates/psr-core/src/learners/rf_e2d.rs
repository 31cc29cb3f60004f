//! All-policy model-estimation E2D (reward-free): the saddle trades the
//! worst-case policy-maximal TV distance against Hellinger information, with
//! the inner `sup_pi TV` evaluated exactly by the Pi-norm dynamic program on
//! the do-probability difference tables.

use serde::Serialize;

use super::log::{trajectory_text, IterRecord, RunLog};
use super::saddle::{solve_min_simplex_pair, BestResponse, SaddleConfig};
use super::{entropy, ClassContext, OptimisticCover, LOG_FLOOR};
use crate::rng::{rng_for, sample_weighted};
use crate::stability::{argmax_policy_factor, pi_norm, pi_norm_argmax};
use crate::Result;

const ALG_TAG: u64 = 0x014C_E004;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct RfE2dConfig {
    pub episodes: usize,
    pub gamma: f64,
    /// Tempered learning rate (1/2 unless overridden).
    pub eta: f64,
    pub seed: u64,
    pub saddle: SaddleConfig,
}

impl RfE2dConfig {
    pub fn new(episodes: usize, gamma: f64, seed: u64) -> Self {
        RfE2dConfig {
            episodes,
            gamma,
            eta: 0.5,
            seed,
            saddle: SaddleConfig::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RfE2dRun {
    pub log: RunLog,
    /// Estimated model index.
    pub theta_hat: usize,
    /// `sup_pi D_TV(P^pi_theta_hat, P^pi_truth)`, computed exactly.
    pub estimation_error: f64,
    /// Mean output distribution over class members.
    pub mean_mu_out: Vec<f64>,
}

/// Exact `sup_pi D_TV(P^pi_a, P^pi_b)` between two class members via the
/// Pi-norm dynamic program on `|P_a - P_b|`.
pub fn sup_tv_distance(ctx: &ClassContext, a: usize, b: usize) -> f64 {
    let diff: Vec<f64> = ctx.full_do[a]
        .iter()
        .zip(&ctx.full_do[b])
        .map(|(x, y)| x - y)
        .collect();
    let m = &ctx.class.members[0];
    0.5 * pi_norm(&diff, m.n_obs, m.n_actions, m.horizon)
}

/// `sup_pi E_{theta_bar ~ mu_out} D_TV(P^pi_theta, P^pi_theta_bar)` for one
/// `theta`, plus the per-member TV gradient at the maximizing policy.
fn sup_mixture_tv(ctx: &ClassContext, theta: usize, mu_out: &[f64]) -> (f64, Vec<f64>) {
    let m = &ctx.class.members[0];
    let n = ctx.n_models();
    let count = ctx.indexer.count();
    let mut w = vec![0.0; count];
    for u in 0..n {
        if mu_out[u] == 0.0 {
            continue;
        }
        for i in 0..count {
            w[i] += mu_out[u] * (ctx.full_do[theta][i] - ctx.full_do[u][i]).abs();
        }
    }
    let (value, choices) = pi_norm_argmax(&w, m.n_obs, m.n_actions, m.horizon);
    // Gradient over theta_bar: TV under the maximizing deterministic policy.
    let mut grad = vec![0.0; n];
    for i in 0..count {
        let tau = ctx.indexer.decode(i);
        let f = argmax_policy_factor(&choices, m.n_obs, m.n_actions, &tau);
        if f > 0.0 {
            for (g, table) in grad.iter_mut().zip(&ctx.full_do) {
                *g += 0.5 * f * (ctx.full_do[theta][i] - table[i]).abs();
            }
        }
    }
    (0.5 * value, grad)
}

pub fn rf_e2d(ctx: &ClassContext, cover: &OptimisticCover, cfg: &RfE2dConfig) -> Result<RfE2dRun> {
    let n = ctx.n_models();
    let n_cover = cover.member_indices.len();
    let pool = ctx.pool.len();
    let truth_model = ctx.class.truth_model();

    let mut log_w = vec![0.0_f64; n_cover];
    let mut excluded = vec![false; n_cover];
    let mut mean_mu_out = vec![0.0_f64; n];
    let mut warm: Option<(Vec<f64>, Vec<f64>)> = None;

    let mut log = RunLog::new(
        "rf-e2d",
        cfg.seed,
        format!("T={} gamma={} eta={}", cfg.episodes, cfg.gamma, cfg.eta),
    );
    let mut cum_err = 0.0;

    for t in 1..=cfg.episodes {
        let mu = posterior(&log_w, &excluded);
        let mut mu_class = vec![0.0; n];
        for (j, &theta) in cover.member_indices.iter().enumerate() {
            mu_class[theta] += mu[j];
        }
        // info[theta][i] = E_{theta_hat ~ mu^t} D_H^2 over the pool.
        let info: Vec<Vec<f64>> = (0..n)
            .map(|th| {
                (0..pool)
                    .map(|i| (0..n).map(|u| mu_class[u] * ctx.hell[th][u][i]).sum())
                    .collect()
            })
            .collect();
        let oracle = |mu_out: &[f64], p_exp: &[f64]| {
            let mut best = f64::NEG_INFINITY;
            let mut best_grad1 = vec![0.0; n];
            let mut best_grad2 = vec![0.0; pool];
            for th in 0..n {
                let (tv, grad_tv) = sup_mixture_tv(ctx, th, mu_out);
                let b: f64 = p_exp.iter().zip(&info[th]).map(|(p, c)| p * c).sum();
                let v = tv - cfg.gamma * b;
                if v > best {
                    best = v;
                    best_grad1 = grad_tv;
                    best_grad2 = info[th].iter().map(|c| -cfg.gamma * c).collect();
                }
            }
            BestResponse {
                value: best,
                grad1: best_grad1,
                grad2: best_grad2,
                offset: 0.0,
            }
        };
        let saddle = solve_min_simplex_pair(n, pool, oracle, &cfg.saddle, warm.take());
        warm = Some((saddle.p1.clone(), saddle.p2.clone()));
        let (mu_out, p_exp) = (&saddle.p1, &saddle.p2);

        let mut rng = rng_for(cfg.seed, &[ALG_TAG, t as u64, 0]);
        let pi_idx = sample_weighted(&mut rng, p_exp);
        let mut rng_ep = rng_for(cfg.seed, &[ALG_TAG, t as u64, 1]);
        let tau = truth_model.sample_trajectory(&ctx.pool[pi_idx], &mut rng_ep);

        let idx = ctx.indexer.encode(&tau);
        for j in 0..n_cover {
            let p = cover.tables[j][idx];
            if p > 0.0 {
                log_w[j] += cfg.eta * p.ln().max(LOG_FLOOR);
            } else {
                excluded[j] = true;
            }
        }
        assert!(!excluded.iter().all(|&e| e), "truth-dominating member excluded");

        for (m, w) in mean_mu_out.iter_mut().zip(mu_out) {
            *m += w;
        }
        // Instantaneous estimation error of the running projection.
        let scale = 1.0 / t as f64;
        let running: Vec<f64> = mean_mu_out.iter().map(|w| w * scale).collect();
        let theta_now = project_to_member(ctx, &running);
        let err_now = sup_tv_distance(ctx, theta_now, ctx.class.truth);
        cum_err += err_now;
        let mu_next = posterior(&log_w, &excluded);
        log.records.push(IterRecord {
            iter: t,
            model_idx: Some(theta_now),
            policy: format!("p_exp -> {}", ctx.pool_labels[pi_idx]),
            trajectories: vec![trajectory_text(&tau)],
            set_size: mu_next.iter().filter(|&&w| w > 1e-12).count(),
            posterior_entropy: entropy(&mu_next),
            inst_subopt: err_now,
            cum_subopt: cum_err / t as f64,
        });
    }

    let scale = 1.0 / cfg.episodes as f64;
    mean_mu_out.iter_mut().for_each(|w| *w *= scale);
    let theta_hat = project_to_member(ctx, &mean_mu_out);
    let estimation_error = sup_tv_distance(ctx, theta_hat, ctx.class.truth);
    Ok(RfE2dRun {
        log,
        theta_hat,
        estimation_error,
        mean_mu_out,
    })
}

/// `argmin_theta sup_pi E_{theta_bar ~ mu} D_TV(P^pi_theta, P^pi_theta_bar)`,
/// smallest index on ties.
fn project_to_member(ctx: &ClassContext, mu: &[f64]) -> usize {
    let mut best = 0;
    let mut best_v = f64::INFINITY;
    for th in 0..ctx.n_models() {
        let (v, _) = sup_mixture_tv(ctx, th, mu);
        if v < best_v {
            best_v = v;
            best = th;
        }
    }
    best
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
    fn singleton_class_estimates_exactly() {
        let caps = Caps::default();
        let core = CoreTestSet::windowed(2, 2, 2, 1, &caps).unwrap();
        let class = ModelClass::new(vec![fixtures::fix_noisy()], 0, core).unwrap();
        let ctx = ClassContext::new(class, caps).unwrap();
        let cover = OptimisticCover::exact(&ctx.class, &ctx.caps).unwrap();
        let run = rf_e2d(&ctx, &cover, &RfE2dConfig::new(3, 10.0, 7)).unwrap();
        assert_eq!(run.theta_hat, 0);
        assert_eq!(run.estimation_error, 0.0);
    }

    #[test]
    fn sup_tv_matches_exhaustive_policy_enumeration() {
        let caps = Caps::default();
        let class = fixtures::noisy_class(&caps).unwrap();
        let ctx = ClassContext::new(class, caps).unwrap();
        // Enumerate all deterministic policies at H=2, O=A=2 (2^10 tables).
        for (a, b) in [(0usize, 1usize), (0, 5), (2, 7)] {
            let exact = sup_tv_distance(&ctx, a, b);
            let mut best = 0.0_f64;
            for bits in 0u32..(1 << 10) {
                let mut t = crate::model::DetTable::new(2, 2, 2);
                let mut k = 0;
                for o in 0..2 {
                    t.set(&[], o, ((bits >> k) & 1) as usize);
                    k += 1;
                }
                for o in 0..2 {
                    for aa in 0..2 {
                        for o2 in 0..2 {
                            t.set(&[(o, aa)], o2, ((bits >> k) & 1) as usize);
                            k += 1;
                        }
                    }
                }
                let pi = crate::model::Policy::Deterministic(t);
                let da = crate::model::trajectory_distribution(&ctx.class.members[a], &pi, 2, &ctx.caps).unwrap();
                let db = crate::model::trajectory_distribution(&ctx.class.members[b], &pi, 2, &ctx.caps).unwrap();
                best = best.max(crate::model::tv_distance(&da, &db).unwrap());
            }
            assert!((exact - best).abs() < 1e-12, "pair ({a},{b}): dp {exact} vs {best}");
        }
    }

    #[test]
    fn replays_identically() {
        let caps = Caps::default();
        let class = fixtures::noisy_class(&caps).unwrap();
        let ctx = ClassContext::new(class, caps).unwrap();
        let cover = OptimisticCover::exact(&ctx.class, &ctx.caps).unwrap();
        let cfg = RfE2dConfig::new(6, 20.0, 23);
        let a = rf_e2d(&ctx, &cover, &cfg).unwrap();
        let b = rf_e2d(&ctx, &cover, &cfg).unwrap();
        assert_eq!(a.log, b.log);
        assert_eq!(a.theta_hat, b.theta_hat);
    }
}
