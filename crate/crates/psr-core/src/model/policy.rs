//! History-dependent policies: tables, mixtures, and exploration composites.
//!
//! A policy is identified with its trajectory factor
//! `pi(tau_h) = prod_i pi(a_i | tau_{i-1}, o_i)`. Mixtures draw one component
//! per episode, so their factor is the weighted sum of component factors (not
//! a per-step product). All exact computations consume [`Policy::factor`];
//! sampling goes through [`Policy::draw`], which resolves the per-episode
//! choices (mixture component, exploration action sequence) up front.

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::index::{Act, Obs, Step, TrajIndexer};
use crate::psr::CoreTestSet;
use crate::{Error, Result};

/// Deterministic history-indexed action table.
///
/// Histories are encoded with [`TrajIndexer`] over `(n_obs, n_act)`; entries
/// missing from the table act as action 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetTable {
    pub n_obs: usize,
    pub n_act: usize,
    /// `choices[h]` maps `(encoded tau_{h-1}, o_h)` to the action at step `h`.
    pub choices: Vec<HashMap<(usize, Obs), Act>>,
}

impl DetTable {
    pub fn new(n_obs: usize, n_act: usize, horizon: usize) -> Self {
        DetTable {
            n_obs,
            n_act,
            choices: vec![HashMap::new(); horizon],
        }
    }

    pub fn encode_hist(&self, hist: &[Step]) -> usize {
        TrajIndexer::new(self.n_obs, self.n_act, hist.len()).encode(hist)
    }

    pub fn action(&self, hist: &[Step], obs: Obs) -> Act {
        let h = hist.len();
        if h >= self.choices.len() {
            return 0;
        }
        *self.choices[h].get(&(self.encode_hist(hist), obs)).unwrap_or(&0)
    }

    pub fn set(&mut self, hist: &[Step], obs: Obs, action: Act) {
        let code = self.encode_hist(hist);
        let h = hist.len();
        self.choices[h].insert((code, obs), action);
    }
}

/// Stochastic history-indexed action table; missing entries act uniformly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StochTable {
    pub n_obs: usize,
    pub n_act: usize,
    pub dists: Vec<HashMap<(usize, Obs), Vec<f64>>>,
}

impl StochTable {
    pub fn new(n_obs: usize, n_act: usize, horizon: usize) -> Self {
        StochTable {
            n_obs,
            n_act,
            dists: vec![HashMap::new(); horizon],
        }
    }

    pub fn set(&mut self, hist: &[Step], obs: Obs, dist: Vec<f64>) -> Result<()> {
        if dist.len() != self.n_act
            || dist.iter().any(|&p| p < 0.0)
            || (dist.iter().sum::<f64>() - 1.0).abs() > 1e-12
        {
            return Err(Error::InvalidPolicy("action distribution must sum to 1".into()));
        }
        let code = TrajIndexer::new(self.n_obs, self.n_act, hist.len()).encode(hist);
        self.dists[hist.len()].insert((code, obs), dist);
        Ok(())
    }

    fn prob(&self, hist: &[Step], obs: Obs, action: Act) -> f64 {
        let h = hist.len();
        if h >= self.dists.len() {
            return 1.0 / self.n_act as f64;
        }
        let code = TrajIndexer::new(self.n_obs, self.n_act, h).encode(hist);
        match self.dists[h].get(&(code, obs)) {
            Some(d) => d[action],
            None => 1.0 / self.n_act as f64,
        }
    }
}

/// Exploration composite `pi ∘_h Unif(A) ∘_{h+1} Unif(seqs)`, pivot in
/// 1-based step terms: the base policy is followed for steps `1..h-1`, step
/// `h` (when `h >= 1`) takes a uniform action, steps `h+1..` execute an
/// action sequence drawn uniformly from `seqs`, and all later steps take
/// uniform actions. `pivot = 0` replaces the whole episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Composed {
    pub base: Policy,
    pub pivot: usize,
    pub seqs: Vec<Vec<Act>>,
}

/// A history-dependent decision rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Policy {
    /// Uniform over actions at every step.
    Uniform,
    Deterministic(DetTable),
    Stochastic(StochTable),
    /// Episode-level mixture: one component is drawn per episode.
    Mixture(Vec<(f64, Policy)>),
    Composed(Box<Composed>),
}

impl Policy {
    /// Builds a mixture after checking the weights form a probability vector.
    pub fn mixture(components: Vec<(f64, Policy)>) -> Result<Policy> {
        let total: f64 = components.iter().map(|(w, _)| *w).sum();
        if components.is_empty() || components.iter().any(|(w, _)| *w < 0.0) || (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidPolicy("mixture weights must form a probability vector".into()));
        }
        Ok(Policy::Mixture(components))
    }

    /// The trajectory factor `pi(tau)` of an observable history prefix.
    pub fn factor(&self, hist: &[Step], n_act: usize) -> f64 {
        match self {
            Policy::Uniform => (1.0 / n_act as f64).powi(hist.len() as i32),
            Policy::Deterministic(t) => {
                for i in 0..hist.len() {
                    let (o, a) = hist[i];
                    if t.action(&hist[..i], o) != a {
                        return 0.0;
                    }
                }
                1.0
            }
            Policy::Stochastic(t) => {
                let mut f = 1.0;
                for i in 0..hist.len() {
                    let (o, a) = hist[i];
                    f *= t.prob(&hist[..i], o, a);
                    if f == 0.0 {
                        return 0.0;
                    }
                }
                f
            }
            Policy::Mixture(parts) => parts.iter().map(|(w, p)| w * p.factor(hist, n_act)).sum(),
            Policy::Composed(c) => c.factor(hist, n_act),
        }
    }

    /// Resolves the per-episode random choices, returning an executable draw.
    pub fn draw<'a, R: Rng>(&'a self, n_act: usize, rng: &mut R) -> PolicyDraw<'a> {
        match self {
            Policy::Uniform => PolicyDraw::Uniform { n_act },
            Policy::Deterministic(t) => PolicyDraw::Deterministic(t),
            Policy::Stochastic(t) => PolicyDraw::Stochastic(t),
            Policy::Mixture(parts) => {
                let weights: Vec<f64> = parts.iter().map(|(w, _)| *w).collect();
                let k = crate::rng::sample_weighted(rng, &weights);
                PolicyDraw::Resolved(Box::new(parts[k].1.draw(n_act, rng)))
            }
            Policy::Composed(c) => {
                let k = rng.random_range(0..c.seqs.len());
                PolicyDraw::Composed {
                    base: Box::new(c.base.draw(n_act, rng)),
                    pivot: c.pivot,
                    seq: &c.seqs[k],
                    n_act,
                }
            }
        }
    }
}

impl Composed {
    fn factor(&self, hist: &[Step], n_act: usize) -> f64 {
        let len = hist.len();
        let base_end = self.pivot.saturating_sub(1);
        let inv_a = 1.0 / n_act as f64;
        let mut f = self.base.factor(&hist[..len.min(base_end)], n_act);
        if self.pivot >= 1 && len > base_end {
            f *= inv_a;
        }
        if len > self.pivot {
            let tail: Vec<Act> = hist[self.pivot..].iter().map(|&(_, a)| a).collect();
            let mut mass = 0.0;
            for seq in &self.seqs {
                let overlap = seq.len().min(tail.len());
                if seq[..overlap] == tail[..overlap] {
                    mass += inv_a.powi((tail.len() - overlap) as i32);
                }
            }
            f *= mass / self.seqs.len() as f64;
        }
        f
    }
}

/// An executable per-episode resolution of a policy.
#[derive(Debug)]
pub enum PolicyDraw<'a> {
    Uniform {
        n_act: usize,
    },
    Deterministic(&'a DetTable),
    Stochastic(&'a StochTable),
    Resolved(Box<PolicyDraw<'a>>),
    Composed {
        base: Box<PolicyDraw<'a>>,
        pivot: usize,
        seq: &'a [Act],
        n_act: usize,
    },
}

impl PolicyDraw<'_> {
    /// The action taken after observing `obs` with history `hist`.
    pub fn act<R: Rng>(&self, hist: &[Step], obs: Obs, rng: &mut R) -> Act {
        match self {
            PolicyDraw::Uniform { n_act } => rng.random_range(0..*n_act),
            PolicyDraw::Deterministic(t) => t.action(hist, obs),
            PolicyDraw::Stochastic(t) => {
                let h = hist.len();
                let code = TrajIndexer::new(t.n_obs, t.n_act, h).encode(hist);
                let uniform = vec![1.0 / t.n_act as f64; t.n_act];
                let dist = t
                    .dists
                    .get(h)
                    .and_then(|m| m.get(&(code, obs)))
                    .cloned()
                    .unwrap_or(uniform);
                crate::rng::sample_weighted(rng, &dist)
            }
            PolicyDraw::Resolved(inner) => inner.act(hist, obs, rng),
            PolicyDraw::Composed {
                base,
                pivot,
                seq,
                n_act,
            } => {
                let i = hist.len();
                let base_end = pivot.saturating_sub(1);
                if i < base_end {
                    base.act(hist, obs, rng)
                } else if *pivot >= 1 && i == base_end {
                    rng.random_range(0..*n_act)
                } else if i >= *pivot && i < pivot + seq.len() {
                    seq[i - *pivot]
                } else {
                    rng.random_range(0..*n_act)
                }
            }
        }
    }
}

/// `pi ∘_h Unif(A) ∘_{h+1} Unif(U_{A,h+1})`: the exploration policy used by
/// the learning loops, with `h` ranging over `0..H`. Steps after the drawn
/// core action sequence take uniform actions.
pub fn compose_exploration(policy: &Policy, h: usize, core: &CoreTestSet) -> Result<Policy> {
    let seqs = core.action_seqs(h + 1);
    if seqs.is_empty() {
        return Err(Error::EmptyActionSet(h + 1));
    }
    Ok(Policy::Composed(Box::new(Composed {
        base: policy.clone(),
        pivot: h,
        seqs: seqs.to_vec(),
    })))
}

/// The uniform mixture `(1/H) sum_h pi_{h,exp}` over all pivots.
pub fn exploration_mixture(policy: &Policy, horizon: usize, core: &CoreTestSet) -> Result<Policy> {
    let w = 1.0 / horizon as f64;
    let comps = (0..horizon)
        .map(|h| Ok((w, compose_exploration(policy, h, core)?)))
        .collect::<Result<Vec<_>>>()?;
    Policy::mixture(comps)
}
