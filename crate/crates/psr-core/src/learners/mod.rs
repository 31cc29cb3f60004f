//! Learning algorithms over finite model classes: OMLE, Explorative E2D,
//! MOPS, and All-Policy Model-Estimation E2D.
//!
//! All inner quantities (values, likelihoods, Hellinger distances, TV
//! distances) are exact table computations; randomness enters only through
//! the executed episodes, drawn from the ground-truth member with seeds
//! derived per `(algorithm, iteration, purpose)`.

mod e2d;
mod log;
mod mops;
mod omle;
mod rf_e2d;
mod saddle;

pub use e2d::{edec_saddle, explorative_e2d, E2dConfig, E2dRun};
pub use log::{IterRecord, RunLog};
pub use mops::{mops, MopsConfig, MopsRun};
pub use omle::{mle_hellinger_check, omle, OmleConfig, OmleRun};
pub use rf_e2d::{rf_e2d, sup_tv_distance, RfE2dConfig, RfE2dRun};
pub use saddle::{solve_min_simplex_pair, BestResponse, SaddleConfig, SaddleOutcome};

use crate::exec;
use crate::index::{Step, TrajIndexer};
use crate::model::{
    compose_exploration, exploration_mixture, hellinger_sq, optimal_policy, trajectory_distribution,
    value, Policy, PomdpModel, TrajectoryDist,
};
use crate::psr::ModelClass;
use crate::stability::pi_norm;
use crate::{Caps, Error, Result};

/// Floor applied to log-likelihoods of zero-probability trajectories; models
/// hitting the floor are flagged and treated as excluded.
pub const LOG_FLOOR: f64 = -690.77552789821368; // ln(1e-300)

/// Exact log-likelihood split of one trajectory: the model part `log P(tau)`
/// and the policy part `log pi(tau)` (common across models, so it cancels in
/// confidence-set and posterior comparisons).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogLik {
    pub log_p: f64,
    pub log_pi: f64,
    /// The model assigns probability 0 to the trajectory (floored).
    pub flagged: bool,
}

/// Log-likelihood of a trajectory under `(model, policy)`.
pub fn log_likelihood(model: &PomdpModel, policy: &Policy, tau: &[Step]) -> LogLik {
    let p = model.do_prob(tau);
    let f = policy.factor(tau, model.n_actions);
    LogLik {
        log_p: if p > 0.0 { p.ln() } else { LOG_FLOOR },
        log_pi: if f > 0.0 { f.ln() } else { LOG_FLOOR },
        flagged: p <= 0.0,
    }
}

/// An optimistic cover `(P~, Theta_0)` of a model class: dominating
/// likelihood tables over full trajectories with `l1` slack `radius^2`.
/// For finite classes the exact cover (`Theta_0 = Theta`, `P~ = P`,
/// `radius = 0`) is always valid; externally constructed covers plug in the
/// same way.
#[derive(Debug, Clone)]
pub struct OptimisticCover {
    /// Class indices of the cover members.
    pub member_indices: Vec<usize>,
    /// Cover radius `rho`.
    pub radius: f64,
    /// Per cover member, the optimistic do-probability table over all
    /// `(O*A)^H` trajectories.
    pub tables: Vec<Vec<f64>>,
    /// For each class member, the index (into `member_indices`) of a cover
    /// element dominating it pointwise.
    pub dominating: Vec<usize>,
}

impl OptimisticCover {
    /// The exact cover of a finite class.
    pub fn exact(class: &ModelClass, caps: &Caps) -> Result<Self> {
        let h = class.members[0].horizon;
        let tables = class
            .members
            .iter()
            .map(|m| Ok(trajectory_distribution(m, &Policy::Uniform, h, caps)?.p_do))
            .collect::<Result<Vec<_>>>()?;
        Ok(OptimisticCover {
            member_indices: (0..class.len()).collect(),
            radius: 0.0,
            tables,
            dominating: (0..class.len()).collect(),
        })
    }

    /// Checks the cover conditions: pointwise dominance for every class
    /// member and `max_pi || P~ - P ||_1 <= radius^2` per cover member (the
    /// policy-weighted l1 maximum is the Pi-norm of the table difference).
    pub fn validate(&self, class: &ModelClass, caps: &Caps) -> Result<()> {
        let model0 = &class.members[0];
        let (h, o, a) = (model0.horizon, model0.n_obs, model0.n_actions);
        for (theta, &cover_idx) in self.dominating.iter().enumerate() {
            let exact = trajectory_distribution(&class.members[theta], &Policy::Uniform, h, caps)?.p_do;
            let table = &self.tables[cover_idx];
            for (i, (&p, &pt)) in exact.iter().zip(table.iter()).enumerate() {
                if pt < p - 1e-12 {
                    return Err(Error::InvalidModel(format!(
                        "cover member {cover_idx} does not dominate model {theta} at trajectory {i}"
                    )));
                }
            }
        }
        for (j, &theta0) in self.member_indices.iter().enumerate() {
            let exact = trajectory_distribution(&class.members[theta0], &Policy::Uniform, h, caps)?.p_do;
            let diff: Vec<f64> = exact.iter().zip(&self.tables[j]).map(|(p, pt)| pt - p).collect();
            let l1 = pi_norm(&diff, o, a, h);
            if l1 > self.radius * self.radius + 1e-12 {
                return Err(Error::InvalidModel(format!(
                    "cover member {j} exceeds the l1 radius: {l1} > {}",
                    self.radius * self.radius
                )));
            }
        }
        Ok(())
    }
}

/// Precomputed exact quantities for running learners over a finite class:
/// optimal policies and values, the proof-motivated saddle policy pool, and
/// the pairwise Hellinger information matrix over that pool.
#[derive(Debug, Clone)]
pub struct ClassContext {
    pub class: ModelClass,
    pub caps: Caps,
    /// Optimal policy of each member.
    pub opt_policies: Vec<Policy>,
    /// `V_theta(pi_theta)` per member.
    pub opt_values: Vec<f64>,
    /// `V_star = V_{theta*}(pi_{theta*})`.
    pub v_star: f64,
    /// `V_{theta*}(pi_theta)` per member.
    pub truth_value_of_opt: Vec<f64>,
    /// Saddle policy pool: distinct optimal policies, their per-step
    /// exploration composites, and their exploration mixtures.
    pub pool: Vec<Policy>,
    pub pool_labels: Vec<String>,
    /// For each member, the pool index of its optimal policy.
    pub opt_in_pool: Vec<usize>,
    /// `subopt[theta][i] = V_theta(pi_theta) - V_theta(pool_i)`.
    pub subopt: Vec<Vec<f64>>,
    /// `hell[theta][theta_bar][i] = D_H^2(P^pool_i_theta, P^pool_i_theta_bar)`.
    pub hell: Vec<Vec<Vec<f64>>>,
    /// `V_{theta*}(pool_i)`.
    pub truth_value_pool: Vec<f64>,
    /// Exact do-probability tables over full trajectories, per member.
    pub full_do: Vec<Vec<f64>>,
    /// Full-length trajectory indexer.
    pub indexer: TrajIndexer,
}

impl ClassContext {
    pub fn new(class: ModelClass, caps: Caps) -> Result<Self> {
        let horizon = class.members[0].horizon;
        let n = class.len();
        let indexer = TrajIndexer::checked(
            class.members[0].n_obs,
            class.members[0].n_actions,
            horizon,
            &caps,
            "class context",
        )?;

        let planned = exec::par_map(class.members.clone(), |m| optimal_policy(&m, &caps));
        let mut opt_policies = Vec::with_capacity(n);
        let mut opt_values = Vec::with_capacity(n);
        for p in planned {
            let (pi, v) = p?;
            opt_policies.push(pi);
            opt_values.push(v);
        }
        let truth = class.truth_model().clone();
        let truth_value_of_opt = opt_policies
            .iter()
            .map(|p| value(&truth, p, &caps))
            .collect::<Result<Vec<_>>>()?;
        let v_star = opt_values[class.truth];

        // Distinct optimal policies, preserving first-appearance order.
        let mut base: Vec<(Policy, String)> = Vec::new();
        let mut opt_base: Vec<usize> = Vec::with_capacity(n);
        for (i, p) in opt_policies.iter().enumerate() {
            match base.iter().position(|(q, _)| q == p) {
                Some(k) => opt_base.push(k),
                None => {
                    base.push((p.clone(), format!("opt[{i}]")));
                    opt_base.push(base.len() - 1);
                }
            }
        }
        let mut pool = Vec::new();
        let mut pool_labels = Vec::new();
        let mut base_pool_idx = Vec::with_capacity(base.len());
        for (p, label) in &base {
            base_pool_idx.push(pool.len());
            pool.push(p.clone());
            pool_labels.push(label.clone());
            for h in 0..horizon {
                pool.push(compose_exploration(p, h, &class.core)?);
                pool_labels.push(format!("exp[h={h}]({label})"));
            }
            pool.push(exploration_mixture(p, horizon, &class.core)?);
            pool_labels.push(format!("expmix({label})"));
        }
        let opt_in_pool: Vec<usize> = opt_base.iter().map(|&k| base_pool_idx[k]).collect();

        // Exact per-(model, pool policy) trajectory distributions.
        let jobs: Vec<(usize, usize)> = (0..n)
            .flat_map(|t| (0..pool.len()).map(move |i| (t, i)))
            .collect();
        let dists: Vec<Result<TrajectoryDist>> = exec::par_map(jobs.clone(), |(t, i)| {
            trajectory_distribution(&class.members[t], &pool[i], horizon, &caps)
        });
        let mut by_model: Vec<Vec<TrajectoryDist>> = vec![Vec::new(); n];
        for ((t, _i), d) in jobs.into_iter().zip(dists) {
            by_model[t].push(d?);
        }

        let mut subopt = vec![vec![0.0; pool.len()]; n];
        for t in 0..n {
            for i in 0..pool.len() {
                let d = &by_model[t][i];
                let mut v = 0.0;
                for idx in 0..indexer.count() {
                    let p = d.prob(idx);
                    if p > 0.0 {
                        v += p * class.members[t].trajectory_reward(&indexer.decode(idx));
                    }
                }
                subopt[t][i] = opt_values[t] - v;
            }
        }
        let truth_value_pool: Vec<f64> = (0..pool.len())
            .map(|i| opt_values[class.truth] - subopt[class.truth][i])
            .collect();

        let hell: Vec<Vec<Vec<f64>>> = (0..n)
            .map(|t| {
                (0..n)
                    .map(|u| {
                        (0..pool.len())
                            .map(|i| hellinger_sq(&by_model[t][i], &by_model[u][i]).expect("same index set"))
                            .collect()
                    })
                    .collect()
            })
            .collect();

        let full_do = class
            .members
            .iter()
            .map(|m| Ok(trajectory_distribution(m, &Policy::Uniform, horizon, &caps)?.p_do))
            .collect::<Result<Vec<_>>>()?;

        Ok(ClassContext {
            class,
            caps,
            opt_policies,
            opt_values,
            v_star,
            truth_value_of_opt,
            pool,
            pool_labels,
            opt_in_pool,
            subopt,
            hell,
            truth_value_pool,
            full_do,
            indexer,
        })
    }

    pub fn n_models(&self) -> usize {
        self.class.len()
    }

    /// `log P_theta(tau)` with flooring, for every member at once.
    pub fn log_do_probs(&self, tau: &[Step]) -> Vec<LogLik> {
        let idx = self.indexer.encode(tau);
        self.full_do
            .iter()
            .map(|t| {
                let p = t[idx];
                LogLik {
                    log_p: if p > 0.0 { p.ln() } else { LOG_FLOOR },
                    log_pi: 0.0,
                    flagged: p <= 0.0,
                }
            })
            .collect()
    }

    /// The exploration policy `pi_{h,exp}` of member `theta`'s optimal policy.
    pub fn exploration_policy(&self, theta: usize, h: usize) -> Result<Policy> {
        compose_exploration(&self.opt_policies[theta], h, &self.class.core)
    }

    /// Suboptimality (under the truth) of a mixture over pool policies.
    pub fn pool_mixture_subopt(&self, weights: &[f64]) -> f64 {
        let v: f64 = weights
            .iter()
            .zip(&self.truth_value_pool)
            .map(|(w, v)| w * v)
            .sum();
        self.v_star - v
    }
}

/// Shannon entropy of a distribution (natural log).
pub fn entropy(p: &[f64]) -> f64 {
    -p.iter().filter(|&&v| v > 0.0).map(|&v| v * v.ln()).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn exact_cover_validates() {
        let caps = Caps::default();
        let class = fixtures::noisy_class(&caps).unwrap();
        let cover = OptimisticCover::exact(&class, &caps).unwrap();
        cover.validate(&class, &caps).unwrap();
        assert_eq!(cover.radius, 0.0);
    }

    #[test]
    fn context_has_consistent_values() {
        let caps = Caps::default();
        let class = fixtures::noisy_class(&caps).unwrap();
        let ctx = ClassContext::new(class, caps).unwrap();
        assert_eq!(ctx.n_models(), 8);
        // Truth's own optimal policy has zero suboptimality under the truth.
        let i = ctx.opt_in_pool[ctx.class.truth];
        assert!(ctx.subopt[ctx.class.truth][i].abs() < 1e-12);
        assert!((ctx.v_star - 0.5).abs() < 1e-12, "v_star = {}", ctx.v_star);
        // Hellinger matrix is symmetric in the model pair with zero diagonal.
        for t in 0..8 {
            for u in 0..8 {
                for i in 0..ctx.pool.len() {
                    assert!((ctx.hell[t][u][i] - ctx.hell[u][t][i]).abs() < 1e-12);
                    if t == u {
                        assert_eq!(ctx.hell[t][u][i], 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn log_likelihood_policy_factor_is_common() {
        let m1 = fixtures::fix_noisy();
        let m2 = fixtures::fix_id();
        let tau = vec![(0, 1), (1, 0)];
        let l1 = log_likelihood(&m1, &Policy::Uniform, &tau);
        let l2 = log_likelihood(&m2, &Policy::Uniform, &tau);
        assert_eq!(l1.log_pi, l2.log_pi);
        assert!((l1.log_pi - (0.25f64).ln()).abs() < 1e-12);
        assert!(!l1.flagged);
    }

    #[test]
    fn truth_mean_loglik_beats_alternatives() {
        // Monte-Carlo KL positivity: the true model's average log-likelihood
        // over sampled trajectories exceeds every other member's.
        let caps = Caps::default();
        let class = fixtures::noisy_class(&caps).unwrap();
        let ctx = ClassContext::new(class, caps).unwrap();
        let truth = ctx.class.truth_model().clone();
        let mut rng = crate::rng::rng_for(71, &[0]);
        let mut sums = vec![0.0; ctx.n_models()];
        let n = 10_000;
        for _ in 0..n {
            let tau = truth.sample_trajectory(&Policy::Uniform, &mut rng);
            for (s, l) in sums.iter_mut().zip(ctx.log_do_probs(&tau)) {
                *s += l.log_p;
            }
        }
        let truth_mean = sums[ctx.class.truth] / n as f64;
        for (i, s) in sums.iter().enumerate() {
            if i != ctx.class.truth {
                assert!(
                    truth_mean > s / n as f64,
                    "member {i} out-scored the truth"
                );
            }
        }
    }
}
