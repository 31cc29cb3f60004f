//! Exact policy evaluation and backward-DP planning over observable histories.

use nalgebra::DVector;

use super::{trajectory_distribution, DetTable, Policy, PomdpModel};
use crate::index::TrajIndexer;
use crate::{Caps, Result};

/// Exact value `V(pi) = sum_tau P^pi(tau) * sum_h r_h(o_h, a_h)`.
pub fn value(model: &PomdpModel, policy: &Policy, caps: &Caps) -> Result<f64> {
    let d = trajectory_distribution(model, policy, model.horizon, caps)?;
    let mut v = 0.0;
    for idx in 0..d.indexer.count() {
        let p = d.prob(idx);
        if p > 0.0 {
            v += p * model.trajectory_reward(&d.indexer.decode(idx));
        }
    }
    Ok(v)
}

/// Exact optimal deterministic policy and its value, by backward dynamic
/// programming over observable histories:
/// `V*(tau_{h-1}, o_h) = max_a [ r_h(o_h, a) + sum_{o'} P(o'|tau_h) V*(tau_h, o') ]`.
///
/// Ties in the argmax break toward the smallest action index; unreachable
/// histories get action 0. The table covers every `(history, obs)` node, so
/// the result is a total deterministic policy.
pub fn optimal_policy(model: &PomdpModel, caps: &Caps) -> Result<(Policy, f64)> {
    TrajIndexer::checked(model.n_obs, model.n_actions, model.horizon, caps, "optimal_policy")?;
    let mut table = DetTable::new(model.n_obs, model.n_actions, model.horizon);
    let v = plan(model, 0, &mut Vec::new(), &model.init.clone(), &mut table);
    Ok((Policy::Deterministic(table), v))
}

/// Returns the optimal expected remaining reward mass (unnormalized by the
/// probability of the history) from step `h` with latent weights `alpha(s) =
/// P(tau_{h-1}, s_h = s)`.
fn plan(
    model: &PomdpModel,
    h: usize,
    hist: &mut Vec<(usize, usize)>,
    alpha: &DVector<f64>,
    table: &mut DetTable,
) -> f64 {
    if h == model.horizon {
        return 0.0;
    }
    let mut total = 0.0;
    for o in 0..model.n_obs {
        let mut w = alpha.clone();
        for s in 0..model.n_states {
            w[s] *= model.emit[h][(o, s)];
        }
        let p_o = w.sum();
        let mut best = f64::NEG_INFINITY;
        let mut best_a = 0;
        for a in 0..model.n_actions {
            let mut val = p_o * model.reward[h][(o, a)];
            if h + 1 < model.horizon {
                let next = &model.trans[h][a] * &w;
                hist.push((o, a));
                val += plan(model, h + 1, hist, &next, table);
                hist.pop();
            }
            if val > best {
                best = val;
                best_a = a;
            }
        }
        table.set(hist, o, best_a);
        total += best;
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::rng::rng_for;

    #[test]
    fn zero_reward_model_has_zero_value() {
        let mut m = fixtures::fix_noisy();
        for r in m.reward.iter_mut() {
            r.fill(0.0);
        }
        let caps = Caps::default();
        let (_, v) = optimal_policy(&m, &caps).unwrap();
        assert_eq!(v, 0.0);
        assert_eq!(value(&m, &Policy::Uniform, &caps).unwrap(), 0.0);
    }

    #[test]
    fn dp_value_matches_value_of_greedy_table() {
        let caps = Caps::default();
        for m in [fixtures::fix_id(), fixtures::fix_noisy()] {
            let (pi, v) = optimal_policy(&m, &caps).unwrap();
            let v2 = value(&m, &pi, &caps).unwrap();
            assert!((v - v2).abs() < 1e-12, "{v} vs {v2}");
        }
    }

    #[test]
    fn fix_id_optimum_matches_exhaustive_policy_search() {
        // At H=2 with O=A=2 there are 2 * 2^(2*2*2)... but only the reachable
        // decision points matter; enumerate all deterministic tables anyway.
        let m = fixtures::fix_id();
        let caps = Caps::default();
        let (_, v_dp) = optimal_policy(&m, &caps).unwrap();
        let mut best = f64::NEG_INFINITY;
        // Decision points: (obs at step 0) -> a, and (step-0 pair, obs) -> a.
        for bits in 0u32..(1 << (2 + 8)) {
            let mut t = DetTable::new(2, 2, 2);
            let mut k = 0;
            for o in 0..2 {
                t.set(&[], o, ((bits >> k) & 1) as usize);
                k += 1;
            }
            for o in 0..2 {
                for a in 0..2 {
                    for o2 in 0..2 {
                        t.set(&[(o, a)], o2, ((bits >> k) & 1) as usize);
                        k += 1;
                    }
                }
            }
            let v = value(&m, &Policy::Deterministic(t), &caps).unwrap();
            best = best.max(v);
        }
        assert!((v_dp - best).abs() < 1e-12, "dp {v_dp} vs exhaustive {best}");
    }

    #[test]
    fn dp_dominates_random_policies_on_fix_noisy() {
        let m = fixtures::fix_noisy();
        let caps = Caps::default();
        let (_, v_star) = optimal_policy(&m, &caps).unwrap();
        let mut rng = rng_for(17, &[0]);
        for _ in 0..100 {
            let pi = fixtures::random_stochastic_policy(&m, &mut rng);
            let v = value(&m, &pi, &caps).unwrap();
            assert!(v <= v_star + 1e-12, "random policy beat DP: {v} > {v_star}");
        }
    }

    #[test]
    fn value_matches_monte_carlo_on_fix_noisy() {
        let m = fixtures::fix_noisy();
        let caps = Caps::default();
        let v = value(&m, &Policy::Uniform, &caps).unwrap();
        let mut rng = rng_for(23, &[1]);
        let n = 100_000;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for _ in 0..n {
            let tau = m.sample_trajectory(&Policy::Uniform, &mut rng);
            let r = m.trajectory_reward(&tau);
            sum += r;
            sumsq += r * r;
        }
        let mean = sum / n as f64;
        let stderr = ((sumsq / n as f64 - mean * mean) / n as f64).sqrt();
        assert!(
            (v - mean).abs() <= 3.0 * stderr,
            "exact {v} vs MC {mean} +- {stderr}"
        );
    }

    #[test]
    fn sampling_is_deterministic_given_seed() {
        let m = fixtures::fix_noisy();
        let t1 = m.sample_trajectory(&Policy::Uniform, &mut rng_for(5, &[9]));
        let t2 = m.sample_trajectory(&Policy::Uniform, &mut rng_for(5, &[9]));
        assert_eq!(t1, t2);
    }

    #[test]
    fn sampling_frequencies_match_exact_distribution() {
        let m = fixtures::fix_noisy();
        let caps = Caps::default();
        let d = trajectory_distribution(&m, &Policy::Uniform, 2, &caps).unwrap();
        let mut rng = rng_for(29, &[2]);
        let n = 100_000usize;
        let mut counts = vec![0usize; d.indexer.count()];
        for _ in 0..n {
            let tau = m.sample_trajectory(&Policy::Uniform, &mut rng);
            counts[d.indexer.encode(&tau)] += 1;
        }
        for idx in 0..counts.len() {
            let p = d.prob(idx);
            let freq = counts[idx] as f64 / n as f64;
            let sigma = (p * (1.0 - p) / n as f64).sqrt().max(1e-9);
            assert!(
                (freq - p).abs() <= 3.0 * sigma + 1e-9,
                "idx {idx}: p {p} freq {freq}"
            );
        }
    }
}
