//! Casting a latent MDP (a mixture of MDPs) into a tabular POMDP.
//!
//! The mixture index `m` is drawn once per episode and never observed. The
//! POMDP latent state is `(m, s, r)` with `r` the previous binary reward, the
//! observation is `(s, r)`, and the horizon grows by one step so the final
//! MDP reward is still observed. POMDP rewards read the reward bit out of the
//! observation, scaled by `1/H_mdp` so episodes total at most 1.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::model::PomdpModel;
use crate::{Error, Result};

/// One component MDP with binary stochastic rewards.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MdpComponent {
    pub horizon: usize,
    pub n_states: usize,
    pub n_actions: usize,
    /// `trans[h][a]` column-stochastic `S x S`, for `h in 0..H-1`.
    /// The final decision step needs no transition.
    pub trans: Vec<Vec<DMatrix<f64>>>,
    /// `reward_prob[h][(s, a)] = P(r_h = 1 | s, a)`, for `h in 0..H`.
    pub reward_prob: Vec<DMatrix<f64>>,
    pub init: DVector<f64>,
}

/// Index of the POMDP latent state `(m, s, r)`.
fn latent(m: usize, s: usize, r: usize, n_s: usize) -> usize {
    (m * n_s + s) * 2 + r
}

/// Index of the POMDP observation `(s, r)`.
fn obs(s: usize, r: usize) -> usize {
    s * 2 + r
}

/// Exact casting of the mixture into a POMDP with horizon `H_mdp + 1`.
pub fn latent_mdp_to_pomdp(mdps: &[MdpComponent], mixing: &DVector<f64>) -> Result<PomdpModel> {
    if mdps.is_empty() || mixing.len() != mdps.len() {
        return Err(Error::DimensionMismatch("mixing vector must match the component count".into()));
    }
    let n = mdps.len();
    let (h_mdp, n_s, n_a) = (mdps[0].horizon, mdps[0].n_states, mdps[0].n_actions);
    if mdps
        .iter()
        .any(|m| m.horizon != h_mdp || m.n_states != n_s || m.n_actions != n_a)
    {
        return Err(Error::DimensionMismatch("components must share (S, A, H)".into()));
    }
    if (mixing.sum() - 1.0).abs() > 1e-12 || mixing.iter().any(|&w| w < 0.0) {
        return Err(Error::DimensionMismatch("mixing must be a probability vector".into()));
    }

    let horizon = h_mdp + 1;
    let bar_s = 2 * n * n_s;
    let n_obs = 2 * n_s;

    let mut init = DVector::zeros(bar_s);
    for m in 0..n {
        for s in 0..n_s {
            init[latent(m, s, 0, n_s)] = mixing[m] * mdps[m].init[s];
        }
    }

    // Observation (s, r) is a deterministic function of the latent state.
    let mut emit_one = DMatrix::zeros(n_obs, bar_s);
    for m in 0..n {
        for s in 0..n_s {
            for r in 0..2 {
                emit_one[(obs(s, r), latent(m, s, r, n_s))] = 1.0;
            }
        }
    }
    let emit = vec![emit_one; horizon];

    let mut trans = Vec::with_capacity(horizon - 1);
    for h in 0..horizon - 1 {
        let mut per_a = Vec::with_capacity(n_a);
        for a in 0..n_a {
            let mut t = DMatrix::zeros(bar_s, bar_s);
            for m in 0..n {
                for s in 0..n_s {
                    let p1 = mdps[m].reward_prob[h][(s, a)];
                    for r_prev in 0..2 {
                        let from = latent(m, s, r_prev, n_s);
                        for s2 in 0..n_s {
                            // The last decision step keeps the state in place;
                            // only the reward bit is propagated.
                            let pt = if h + 1 < h_mdp {
                                mdps[m].trans[h][a][(s2, s)]
                            } else if s2 == s {
                                1.0
                            } else {
                                0.0
                            };
                            if pt == 0.0 {
                                continue;
                            }
                            t[(latent(m, s2, 1, n_s), from)] += pt * p1;
                            t[(latent(m, s2, 0, n_s), from)] += pt * (1.0 - p1);
                        }
                    }
                }
            }
            per_a.push(t);
        }
        trans.push(per_a);
    }

    // Reward reads the observed reward bit; the first step has none.
    let mut reward = Vec::with_capacity(horizon);
    for h in 0..horizon {
        let mut r = DMatrix::zeros(n_obs, n_a);
        if h >= 1 {
            for s in 0..n_s {
                for a in 0..n_a {
                    r[(obs(s, 1), a)] = 1.0 / h_mdp as f64;
                }
            }
        }
        reward.push(r);
    }

    PomdpModel::new(horizon, bar_s, n_obs, n_a, trans, emit, init, reward)
}

/// Exact optimal expected cumulative reward-probability of one component MDP,
/// by backward DP over `(h, s)`.
pub fn mdp_optimal_value(mdp: &MdpComponent) -> f64 {
    let mut v = vec![0.0; mdp.n_states];
    for h in (0..mdp.horizon).rev() {
        let mut nv = vec![0.0; mdp.n_states];
        for s in 0..mdp.n_states {
            let mut best = f64::NEG_INFINITY;
            for a in 0..mdp.n_actions {
                let mut val = mdp.reward_prob[h][(s, a)];
                if h + 1 < mdp.horizon {
                    for s2 in 0..mdp.n_states {
                        val += mdp.trans[h][a][(s2, s)] * v[s2];
                    }
                }
                best = best.max(val);
            }
            nv[s] = best;
        }
        v = nv;
    }
    (0..mdp.n_states).map(|s| mdp.init[s] * v[s]).sum()
}

/// The test-outcome matrix `L_h(s)`: rows are length-`l` sequences
/// `(a, r, s')^l` in lexicographic order, columns are mixture components,
/// entries `P_m(sequence | s_h = s)` under forced actions.
pub fn test_outcome_matrix(mdps: &[MdpComponent], h: usize, s: usize, l: usize) -> DMatrix<f64> {
    let n = mdps.len();
    let n_s = mdps[0].n_states;
    let n_a = mdps[0].n_actions;
    let step = n_a * 2 * n_s;
    let rows = step.pow(l as u32);
    let mut out = DMatrix::zeros(rows, n);
    for m in 0..n {
        for row in 0..rows {
            let mut digits = Vec::with_capacity(l);
            let mut rem = row;
            for _ in 0..l {
                digits.push(rem % step);
                rem /= step;
            }
            digits.reverse();
            let mut p = 1.0;
            let mut cur = s;
            for (i, d) in digits.iter().enumerate() {
                let a = d / (2 * n_s);
                let r = (d / n_s) % 2;
                let s2 = d % n_s;
                let hh = h + i;
                let p1 = mdps[m].reward_prob[hh][(cur, a)];
                p *= if r == 1 { p1 } else { 1.0 - p1 };
                let pt = if hh + 1 < mdps[m].horizon {
                    mdps[m].trans[hh][a][(s2, cur)]
                } else if s2 == cur {
                    1.0
                } else {
                    0.0
                };
                p *= pt;
                cur = s2;
                if p == 0.0 {
                    break;
                }
            }
            out[(row, m)] = p;
        }
    }
    out
}
