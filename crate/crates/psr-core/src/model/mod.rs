//! Tabular POMDPs and the exact operations on them.
//!
//! Steps are 0-based internally: step `h` here is step `h+1` in the usual
//! 1-based indexing of an `H`-step episode. `emit[h]` and `reward[h]` exist
//! for `h in 0..H`, `trans[h]` for `h in 0..H-1`. All matrices are
//! column-stochastic: `trans[h][a][(s', s)] = T_h(s' | s, a)` and
//! `emit[h][(o, s)] = O_h(o | s)`.

mod dist;
mod planning;
mod policy;

pub use dist::{hellinger_sq, trajectory_distribution, tv_distance, TrajectoryDist};
pub use planning::{optimal_policy, value};
pub use policy::{compose_exploration, exploration_mixture, Composed, DetTable, Policy, PolicyDraw, StochTable};

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::index::{Act, Obs, State, Step};
use crate::{Error, Result};

/// Tolerance for stochasticity checks at load time.
pub const STOCHASTIC_TOL: f64 = 1e-12;

/// A tabular POMDP `(H, S, O, A, T, O, r, mu1)` with known deterministic
/// rewards `r_h(o, a) in [0, 1]` and cumulative reward at most 1 on every
/// reachable trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PomdpModel {
    pub horizon: usize,
    pub n_states: usize,
    pub n_obs: usize,
    pub n_actions: usize,
    /// `trans[h][a]` is the column-stochastic `S x S` matrix `T_h(.|., a)`.
    pub trans: Vec<Vec<DMatrix<f64>>>,
    /// `emit[h]` is the column-stochastic `O x S` matrix `O_h`.
    pub emit: Vec<DMatrix<f64>>,
    /// Initial latent distribution `mu_1`.
    pub init: DVector<f64>,
    /// `reward[h]` is the `O x A` matrix of per-step rewards.
    pub reward: Vec<DMatrix<f64>>,
}

impl PomdpModel {
    /// Builds and validates a model. See [`PomdpModel::validate`].
    pub fn new(
        horizon: usize,
        n_states: usize,
        n_obs: usize,
        n_actions: usize,
        trans: Vec<Vec<DMatrix<f64>>>,
        emit: Vec<DMatrix<f64>>,
        init: DVector<f64>,
        reward: Vec<DMatrix<f64>>,
    ) -> Result<Self> {
        let m = PomdpModel {
            horizon,
            n_states,
            n_obs,
            n_actions,
            trans,
            emit,
            init,
            reward,
        };
        m.validate()?;
        Ok(m)
    }

    /// Checks shapes, stochasticity within `1e-12`, reward ranges, and that
    /// the maximum cumulative reward over reachable trajectories is at most 1
    /// (by exact maximization over latent-support sets).
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 || self.n_states == 0 || self.n_obs == 0 || self.n_actions == 0 {
            return Err(Error::InvalidModel("all cardinalities must be >= 1".into()));
        }
        if self.trans.len() + 1 != self.horizon
            || self.emit.len() != self.horizon
            || self.reward.len() != self.horizon
        {
            return Err(Error::InvalidModel(format!(
                "expected {} emission/reward and {} transition steps",
                self.horizon,
                self.horizon - 1
            )));
        }
        let check_stochastic = |m: &DMatrix<f64>, rows: usize, what: &str| -> Result<()> {
            if m.nrows() != rows || m.ncols() != self.n_states {
                return Err(Error::InvalidModel(format!("{what}: wrong shape")));
            }
            for c in 0..m.ncols() {
                let col = m.column(c);
                if col.iter().any(|&v| v < 0.0) {
                    return Err(Error::InvalidModel(format!("{what}: negative entry in column {c}")));
                }
                if (col.sum() - 1.0).abs() > STOCHASTIC_TOL {
                    return Err(Error::InvalidModel(format!(
                        "{what}: column {c} sums to {:.15}",
                        col.sum()
                    )));
                }
            }
            Ok(())
        };
        for (h, e) in self.emit.iter().enumerate() {
            check_stochastic(e, self.n_obs, &format!("emit[{h}]"))?;
        }
        for (h, per_a) in self.trans.iter().enumerate() {
            if per_a.len() != self.n_actions {
                return Err(Error::InvalidModel(format!("trans[{h}]: wrong action count")));
            }
            for (a, t) in per_a.iter().enumerate() {
                check_stochastic(t, self.n_states, &format!("trans[{h}][{a}]"))?;
            }
        }
        if self.init.len() != self.n_states
            || self.init.iter().any(|&v| v < 0.0)
            || (self.init.sum() - 1.0).abs() > STOCHASTIC_TOL
        {
            return Err(Error::InvalidModel("init is not a probability vector".into()));
        }
        for (h, r) in self.reward.iter().enumerate() {
            if r.nrows() != self.n_obs || r.ncols() != self.n_actions {
                return Err(Error::InvalidModel(format!("reward[{h}]: wrong shape")));
            }
            if r.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
                return Err(Error::InvalidModel(format!("reward[{h}]: entry outside [0, 1]")));
            }
        }
        let max_total = self.max_cumulative_reward();
        if max_total > 1.0 + 1e-9 {
            return Err(Error::InvalidModel(format!(
                "maximum cumulative reward {max_total:.12} exceeds 1"
            )));
        }
        Ok(())
    }

    /// Exact maximum of the cumulative reward over trajectories reachable
    /// under some action sequence, by DP over latent support sets.
    pub fn max_cumulative_reward(&self) -> f64 {
        let init_mask: u64 = self
            .init
            .iter()
            .enumerate()
            .filter(|(_, &v)| v > 0.0)
            .fold(0, |m, (s, _)| m | (1 << s));
        let mut memo: HashMap<(usize, u64), f64> = HashMap::new();
        self.max_reward_from(0, init_mask, &mut memo)
    }

    fn max_reward_from(&self, h: usize, mask: u64, memo: &mut HashMap<(usize, u64), f64>) -> f64 {
        if h == self.horizon || mask == 0 {
            return 0.0;
        }
        if let Some(&v) = memo.get(&(h, mask)) {
            return v;
        }
        let mut best = 0.0_f64;
        for o in 0..self.n_obs {
            let obs_mask: u64 = (0..self.n_states)
                .filter(|&s| mask & (1 << s) != 0 && self.emit[h][(o, s)] > 0.0)
                .fold(0, |m, s| m | (1 << s));
            if obs_mask == 0 {
                continue;
            }
            for a in 0..self.n_actions {
                let next_mask: u64 = if h + 1 < self.horizon {
                    let mut nm = 0u64;
                    for s in 0..self.n_states {
                        if obs_mask & (1 << s) != 0 {
                            for s2 in 0..self.n_states {
                                if self.trans[h][a][(s2, s)] > 0.0 {
                                    nm |= 1 << s2;
                                }
                            }
                        }
                    }
                    nm
                } else {
                    0
                };
                let v = self.reward[h][(o, a)] + self.max_reward_from(h + 1, next_mask, memo);
                best = best.max(v);
            }
        }
        memo.insert((h, mask), best);
        best
    }

    /// Unnormalized forward weights: returns `(P(tau), w)` where
    /// `w(s) = P(tau, s_{L+1} = s)` for a history of length `L < H`.
    /// For `L == H` the weight vector is empty and only `P(tau)` is valid.
    pub fn forward(&self, hist: &[Step]) -> (f64, DVector<f64>) {
        let mut alpha = self.init.clone();
        let mut prob = 1.0;
        for (i, &(o, a)) in hist.iter().enumerate() {
            let mut w = alpha.clone();
            for s in 0..self.n_states {
                w[s] *= self.emit[i][(o, s)];
            }
            prob = w.sum();
            if i + 1 < self.horizon {
                alpha = &self.trans[i][a] * &w;
            } else {
                // Episode ends after step H; actions at the last step do not
                // influence any further observation.
                let _ = a;
                return (prob, DVector::zeros(0));
            }
        }
        if hist.is_empty() {
            (1.0, alpha)
        } else {
            (prob, alpha)
        }
    }

    /// `P(tau)`, the do-probability of an observable history.
    pub fn do_prob(&self, hist: &[Step]) -> f64 {
        self.forward(hist).0
    }

    /// Probability that a test succeeds when rolled out from unnormalized
    /// latent weights `w` at 0-based step `h0`: applies the emission of each
    /// test observation and the transition of each test action, returning the
    /// total remaining mass.
    pub fn test_success_from(&self, h0: usize, weights: &DVector<f64>, obs: &[Obs], acts: &[Act]) -> f64 {
        debug_assert_eq!(obs.len(), acts.len() + 1);
        debug_assert!(h0 + obs.len() <= self.horizon);
        let mut w = weights.clone();
        for (i, &o) in obs.iter().enumerate() {
            let h = h0 + i;
            for s in 0..self.n_states {
                w[s] *= self.emit[h][(o, s)];
            }
            if i < acts.len() {
                w = &self.trans[h][acts[i]] * &w;
            }
        }
        w.sum()
    }

    /// Draws one episode: `(trajectory, latent path)`. Deterministic given the
    /// generator state; the policy draw must be resolved by the caller so that
    /// mixture and exploration-sequence choices are part of the episode record.
    pub fn sample_with_draw<R: Rng>(&self, draw: &PolicyDraw<'_>, rng: &mut R) -> (Vec<Step>, Vec<State>) {
        let mut hist: Vec<Step> = Vec::with_capacity(self.horizon);
        let mut states: Vec<State> = Vec::with_capacity(self.horizon);
        let mut s = crate::rng::sample_weighted(rng, self.init.as_slice());
        for h in 0..self.horizon {
            states.push(s);
            let obs_weights: Vec<f64> = (0..self.n_obs).map(|o| self.emit[h][(o, s)]).collect();
            let o = crate::rng::sample_weighted(rng, &obs_weights);
            let a = draw.act(&hist, o, rng);
            hist.push((o, a));
            if h + 1 < self.horizon {
                let col: Vec<f64> = (0..self.n_states).map(|s2| self.trans[h][a][(s2, s)]).collect();
                s = crate::rng::sample_weighted(rng, &col);
            }
        }
        (hist, states)
    }

    /// Draws one trajectory under `policy`.
    pub fn sample_trajectory<R: Rng>(&self, policy: &Policy, rng: &mut R) -> Vec<Step> {
        let draw = policy.draw(self.n_actions, rng);
        self.sample_with_draw(&draw, rng).0
    }

    /// Cumulative reward of a trajectory.
    pub fn trajectory_reward(&self, hist: &[Step]) -> f64 {
        hist.iter()
            .enumerate()
            .map(|(h, &(o, a))| self.reward[h][(o, a)])
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn fixtures_validate() {
        fixtures::fix_id().validate().unwrap();
        fixtures::fix_noisy().validate().unwrap();
    }

    #[test]
    fn reward_cap_rejects_overflowing_model() {
        let mut m = fixtures::fix_id();
        // Reward 1 at every step sums to 2 > 1 on the all-ones observation path.
        for r in m.reward.iter_mut() {
            r.fill(1.0);
        }
        assert!(matches!(m.validate(), Err(Error::InvalidModel(_))));
    }

    #[test]
    fn forward_matches_hand_computation() {
        let m = fixtures::fix_noisy();
        // P(o_1 = 0) = 0.8 under mu1 = (1, 0) and emission 0.8/0.2.
        assert!((m.do_prob(&[(0, 0)]) - 0.8).abs() < 1e-12);
        // After (o=0, a=1) [flip], the latent weight should sit on state 1
        // with mass 0.8 emission-weighted.
        let (p, w) = m.forward(&[(0, 1)]);
        assert!((p - 0.8).abs() < 1e-12);
        assert!((w[1] - 0.8).abs() < 1e-12);
        assert!(w[0].abs() < 1e-12);
    }

    #[test]
    fn max_cumulative_reward_of_fix_id() {
        // Best play: flip at step 1 to reach state 1, observe o=1, total 1/2.
        // The first observation is always 0, so the step-1 reward is 0.
        let m = fixtures::fix_id();
        assert!((m.max_cumulative_reward() - 0.5).abs() < 1e-12);
    }
}
