//! Named desk-scale instances and the random model zoo.
//!
//! All generators are deterministic in the supplied generator state, so
//! fixtures regenerate bit-for-bit from a seed.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Gamma};

use crate::model::{Policy, PomdpModel, StochTable};
use crate::psr::{latent_mdp_to_pomdp, Decoder, MdpComponent, ModelClass, CoreTestSet, Test};
use crate::rng::rng_for;
use crate::{Caps, Error, Result};

fn reward_on_obs_one(horizon: usize, n_obs: usize, n_act: usize) -> Vec<DMatrix<f64>> {
    (0..horizon)
        .map(|_| {
            DMatrix::from_fn(n_obs, n_act, |o, _| if o == 1 { 1.0 / horizon as f64 } else { 0.0 })
        })
        .collect()
}

fn stay_flip_transitions() -> Vec<DMatrix<f64>> {
    let stay = DMatrix::identity(2, 2);
    let flip = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
    vec![stay, flip]
}

/// `H=2, S=O=A=2`: identity emissions, stay/flip transitions, start in state
/// 0, reward `1/H` on observing symbol 1.
pub fn fix_id() -> PomdpModel {
    PomdpModel::new(
        2,
        2,
        2,
        2,
        vec![stay_flip_transitions()],
        vec![DMatrix::identity(2, 2), DMatrix::identity(2, 2)],
        DVector::from_vec(vec![1.0, 0.0]),
        reward_on_obs_one(2, 2, 2),
    )
    .expect("fixture is valid")
}

/// FIX-ID with the symmetric noisy emission `[[0.8, 0.2], [0.2, 0.8]]`
/// (singular values 1.0 and 0.6).
pub fn fix_noisy() -> PomdpModel {
    let emit = DMatrix::from_row_slice(2, 2, &[0.8, 0.2, 0.2, 0.8]);
    PomdpModel::new(
        2,
        2,
        2,
        2,
        vec![stay_flip_transitions()],
        vec![emit.clone(), emit],
        DVector::from_vec(vec![1.0, 0.0]),
        reward_on_obs_one(2, 2, 2),
    )
    .expect("fixture is valid")
}

/// A 2-step-decodable `H=3` instance: the next latent state equals the action
/// taken, emissions after the first step are noisy, so only the previous
/// action (inside the window) identifies the state.
pub fn fix_dec2() -> PomdpModel {
    let act_sets_state: Vec<DMatrix<f64>> = (0..2)
        .map(|a| DMatrix::from_fn(2, 2, |s2, _| if s2 == a { 1.0 } else { 0.0 }))
        .collect();
    let noisy = DMatrix::from_row_slice(2, 2, &[0.7, 0.3, 0.3, 0.7]);
    PomdpModel::new(
        3,
        2,
        2,
        2,
        vec![act_sets_state.clone(), act_sets_state],
        vec![DMatrix::identity(2, 2), noisy.clone(), noisy],
        DVector::from_vec(vec![1.0, 0.0]),
        reward_on_obs_one(3, 2, 2),
    )
    .expect("fixture is valid")
}

/// The verified window decoder of [`fix_dec2`]: the first state is known,
/// later states equal the previous action in the window.
pub fn fix_dec2_decoder() -> Decoder {
    let mut dec = Decoder::new(2, 3);
    for o in 0..2 {
        dec.phi[0].insert(Test::new(vec![o], vec![]), o); // step 1: identity emission
    }
    for h in 1..3 {
        for o_prev in 0..2 {
            for a_prev in 0..2 {
                for o in 0..2 {
                    dec.phi[h].insert(Test::new(vec![o_prev, o], vec![a_prev]), a_prev);
                }
            }
        }
    }
    dec
}

/// Window decoder for models whose emissions reveal the state exactly
/// (observation = state), for any window length `m`.
pub fn identity_decoder(model: &PomdpModel, m: usize) -> Decoder {
    let mut dec = Decoder::new(m, model.horizon);
    for h in 1..=model.horizon {
        let w = m.min(h);
        for t in crate::psr::enumerate_tests(model.n_obs, model.n_actions, w) {
            let state = *t.obs.last().unwrap();
            if state < model.n_states {
                dec.phi[h - 1].insert(t, state);
            }
        }
    }
    dec
}

/// One mixture component for the latent-MDP fixture: stay/flip transitions
/// shared by both components, reward probability `0.8 * agree + 0.1` where
/// component 0 pays for matching the state and component 1 for mismatching.
pub fn lmdp_component(which: usize) -> MdpComponent {
    let reward = DMatrix::from_fn(2, 2, |s, a| {
        let agree = (s == a) == (which == 0);
        if agree {
            0.9
        } else {
            0.1
        }
    });
    MdpComponent {
        horizon: 2,
        n_states: 2,
        n_actions: 2,
        trans: vec![stay_flip_transitions()],
        reward_prob: vec![reward.clone(), reward],
        init: DVector::from_vec(vec![1.0, 0.0]),
    }
}

/// The two-component mixture behind FIX-LMDP.
pub fn lmdp_mixture() -> (Vec<MdpComponent>, DVector<f64>) {
    (
        vec![lmdp_component(0), lmdp_component(1)],
        DVector::from_vec(vec![0.5, 0.5]),
    )
}

/// FIX-LMDP: the two-component latent MDP cast to a POMDP (`H=3`, 8 latent
/// states, 4 observations).
pub fn fix_lmdp() -> PomdpModel {
    let (mdps, mixing) = lmdp_mixture();
    latent_mdp_to_pomdp(&mdps, &mixing).expect("fixture is valid")
}

/// Degenerate single-state model (PSR rank 1).
pub fn single_state_model() -> PomdpModel {
    PomdpModel::new(
        2,
        1,
        2,
        2,
        vec![vec![DMatrix::identity(1, 1), DMatrix::identity(1, 1)]],
        vec![
            DMatrix::from_column_slice(2, 1, &[0.7, 0.3]),
            DMatrix::from_column_slice(2, 1, &[0.7, 0.3]),
        ],
        DVector::from_element(1, 1.0),
        reward_on_obs_one(2, 2, 2),
    )
    .expect("fixture is valid")
}

/// Two latent states emitting identically: the 1-step emission matrix is
/// rank deficient, so the revealing construction must fail.
pub fn non_revealing_model() -> PomdpModel {
    let emit = DMatrix::from_element(2, 2, 0.5);
    PomdpModel::new(
        2,
        2,
        2,
        2,
        vec![stay_flip_transitions()],
        vec![emit.clone(), emit],
        DVector::from_vec(vec![1.0, 0.0]),
        reward_on_obs_one(2, 2, 2),
    )
    .expect("fixture is valid")
}

/// Column-stochastic matrix with Dirichlet(1) columns.
pub fn random_stochastic_matrix<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<f64> {
    let gamma = Gamma::new(1.0, 1.0).expect("valid shape");
    let mut m = DMatrix::from_fn(rows, cols, |_, _| gamma.sample(rng));
    for c in 0..cols {
        let s = m.column(c).sum();
        m.column_mut(c).scale_mut(1.0 / s);
    }
    m
}

/// Fully random tabular model; rewards are rescaled so the maximum cumulative
/// reward is exactly 1 (or left at zero when every reward is zero).
pub fn random_tabular_model<R: Rng>(
    horizon: usize,
    n_states: usize,
    n_obs: usize,
    n_act: usize,
    rng: &mut R,
) -> Result<PomdpModel> {
    let trans = (0..horizon.saturating_sub(1))
        .map(|_| (0..n_act).map(|_| random_stochastic_matrix(n_states, n_states, rng)).collect())
        .collect();
    let emit = (0..horizon).map(|_| random_stochastic_matrix(n_obs, n_states, rng)).collect();
    let init_m = random_stochastic_matrix(n_states, 1, rng);
    let reward = (0..horizon)
        .map(|_| DMatrix::from_fn(n_obs, n_act, |_, _| rng.random::<f64>()))
        .collect();
    let mut model = PomdpModel {
        horizon,
        n_states,
        n_obs,
        n_actions: n_act,
        trans,
        emit,
        init: init_m.column(0).into_owned(),
        reward,
    };
    let max_total = model.max_cumulative_reward();
    if max_total > 0.0 {
        for r in model.reward.iter_mut() {
            r.scale_mut(1.0 / max_total);
        }
    }
    model.validate()?;
    Ok(model)
}

/// Random model whose 1-step emission matrices all have `sigma_min` at least
/// `sigma_floor` (retries up to 200 draws).
pub fn random_revealing_model<R: Rng>(
    horizon: usize,
    n_states: usize,
    n_obs: usize,
    n_act: usize,
    sigma_floor: f64,
    rng: &mut R,
) -> Result<PomdpModel> {
    for _ in 0..200 {
        let model = random_tabular_model(horizon, n_states, n_obs, n_act, rng)?;
        let ok = model.emit.iter().all(|e| crate::la::sigma_min(e) >= sigma_floor);
        if ok {
            return Ok(model);
        }
    }
    Err(Error::InvalidModel(format!(
        "no emission draw reached sigma_min >= {sigma_floor} after 200 tries"
    )))
}

/// Random `m`-step decodable model with its verified decoder.
///
/// `m = 1`: emissions are supported on disjoint observation blocks per state.
/// `m = 2`: the next state equals the action taken (`S = A`), the initial
/// state is fixed, and emissions after step 1 are arbitrary.
pub fn random_decodable_model<R: Rng>(
    horizon: usize,
    n_obs: usize,
    n_act: usize,
    m: usize,
    rng: &mut R,
) -> Result<(PomdpModel, Decoder)> {
    match m {
        1 => {
            let n_states = 2.min(n_obs);
            let group = |o: usize| o % n_states;
            let emit: Vec<DMatrix<f64>> = (0..horizon)
                .map(|_| {
                    DMatrix::from_fn(n_obs, n_states, |o, s| if group(o) == s { 1.0 } else { 0.0 })
                })
                .map(|mask| {
                    let raw = random_stochastic_matrix(n_obs, n_states, rng);
                    let mut e = raw.component_mul(&mask);
                    for c in 0..e.ncols() {
                        let s = e.column(c).sum();
                        e.column_mut(c).scale_mut(1.0 / s);
                    }
                    e
                })
                .collect();
            let trans = (0..horizon - 1)
                .map(|_| (0..n_act).map(|_| random_stochastic_matrix(n_states, n_states, rng)).collect())
                .collect();
            let mut reward: Vec<DMatrix<f64>> = (0..horizon)
                .map(|_| DMatrix::from_fn(n_obs, n_act, |_, _| rng.random::<f64>()))
                .collect();
            let mut model = PomdpModel {
                horizon,
                n_states,
                n_obs,
                n_actions: n_act,
                trans,
                emit,
                init: random_stochastic_matrix(n_states, 1, rng).column(0).into_owned(),
                reward: reward.clone(),
            };
            let max_total = model.max_cumulative_reward();
            if max_total > 0.0 {
                for r in reward.iter_mut() {
                    r.scale_mut(1.0 / max_total);
                }
            }
            model.reward = reward;
            model.validate()?;
            let mut dec = Decoder::new(1, horizon);
            for h in 0..horizon {
                for o in 0..n_obs {
                    dec.phi[h].insert(Test::new(vec![o], vec![]), group(o));
                }
            }
            dec.verify(&model)?;
            Ok((model, dec))
        }
        2 => {
            let n_states = n_act;
            let trans: Vec<Vec<DMatrix<f64>>> = (0..horizon - 1)
                .map(|_| {
                    (0..n_act)
                        .map(|a| DMatrix::from_fn(n_states, n_states, |s2, _| if s2 == a { 1.0 } else { 0.0 }))
                        .collect()
                })
                .collect();
            let emit: Vec<DMatrix<f64>> = (0..horizon)
                .map(|_| random_stochastic_matrix(n_obs, n_states, rng))
                .collect();
            let mut reward: Vec<DMatrix<f64>> = (0..horizon)
                .map(|_| DMatrix::from_fn(n_obs, n_act, |_, _| rng.random::<f64>()))
                .collect();
            let mut init = DVector::zeros(n_states);
            init[0] = 1.0;
            let mut model = PomdpModel {
                horizon,
                n_states,
                n_obs,
                n_actions: n_act,
                trans,
                emit,
                init,
                reward: reward.clone(),
            };
            let max_total = model.max_cumulative_reward();
            if max_total > 0.0 {
                for r in reward.iter_mut() {
                    r.scale_mut(1.0 / max_total);
                }
            }
            model.reward = reward;
            model.validate()?;
            let mut dec = Decoder::new(2, horizon);
            for o in 0..n_obs {
                dec.phi[0].insert(Test::new(vec![o], vec![]), 0);
            }
            for h in 1..horizon {
                for o_prev in 0..n_obs {
                    for a_prev in 0..n_act {
                        for o in 0..n_obs {
                            dec.phi[h].insert(Test::new(vec![o_prev, o], vec![a_prev]), a_prev);
                        }
                    }
                }
            }
            dec.verify(&model)?;
            Ok((model, dec))
        }
        other => Err(Error::DimensionMismatch(format!(
            "random decodable generator supports m in {{1, 2}}, got {other}"
        ))),
    }
}

/// Fully random stochastic table policy over every history node.
pub fn random_stochastic_policy<R: Rng>(model: &PomdpModel, rng: &mut R) -> Policy {
    let mut table = StochTable::new(model.n_obs, model.n_actions, model.horizon);
    let gamma = Gamma::new(1.0, 1.0).expect("valid shape");
    for h in 0..model.horizon {
        let ix = crate::index::TrajIndexer::new(model.n_obs, model.n_actions, h);
        for idx in 0..ix.count() {
            let hist = ix.decode(idx);
            for o in 0..model.n_obs {
                let mut d: Vec<f64> = (0..model.n_actions).map(|_| gamma.sample(rng)).collect();
                let s: f64 = d.iter().sum();
                d.iter_mut().for_each(|v| *v /= s);
                // Renormalize exactly against accumulated rounding.
                let s2: f64 = d.iter().sum();
                let last = d.len() - 1;
                d[last] += 1.0 - s2;
                table.set(&hist, o, d).expect("valid distribution");
            }
        }
    }
    Policy::Stochastic(table)
}

/// One member of the FIX-NOISY learning class. Both emission entries are
/// passed explicitly so member 0 equals [`fix_noisy`] bit-for-bit.
fn noisy_variant(p_hit: f64, p_miss: f64, swapped: bool, start_hi: bool) -> PomdpModel {
    let emit = DMatrix::from_row_slice(2, 2, &[p_hit, p_miss, p_miss, p_hit]);
    let mut trans = stay_flip_transitions();
    if swapped {
        trans.swap(0, 1);
    }
    let init = if start_hi {
        DVector::from_vec(vec![0.0, 1.0])
    } else {
        DVector::from_vec(vec![1.0, 0.0])
    };
    PomdpModel::new(
        2,
        2,
        2,
        2,
        vec![trans],
        vec![emit.clone(), emit],
        init,
        reward_on_obs_one(2, 2, 2),
    )
    .expect("variant is valid")
}

/// The 8-model class around FIX-NOISY: emission accuracy in {0.8, 0.6},
/// stay/flip action semantics possibly swapped, and both starting states.
/// Member 0 is FIX-NOISY itself and is the ground truth.
pub fn noisy_class(caps: &Caps) -> Result<ModelClass> {
    let mut members = Vec::with_capacity(8);
    for (p_hit, p_miss) in [(0.8, 0.2), (0.6, 0.4)] {
        for swapped in [false, true] {
            for start_hi in [false, true] {
                members.push(noisy_variant(p_hit, p_miss, swapped, start_hi));
            }
        }
    }
    let core = CoreTestSet::windowed(2, 2, 2, 1, caps)?;
    ModelClass::new(members, 0, core)
}

/// Named fixtures reachable from the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FixtureName {
    FixId,
    FixNoisy,
    FixDec2,
    FixLmdp,
    RandomRevealing,
    RandomDecodable,
}

impl std::str::FromStr for FixtureName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().replace('_', "-").as_str() {
            "FIX-ID" => Ok(FixtureName::FixId),
            "FIX-NOISY" => Ok(FixtureName::FixNoisy),
            "FIX-DEC2" => Ok(FixtureName::FixDec2),
            "FIX-LMDP" => Ok(FixtureName::FixLmdp),
            "RANDOM-REVEALING" => Ok(FixtureName::RandomRevealing),
            "RANDOM-DECODABLE" => Ok(FixtureName::RandomDecodable),
            other => Err(Error::InvalidModel(format!("unknown fixture {other}"))),
        }
    }
}

/// Instantiates a named fixture; random generators honor `seed`.
pub fn generate_fixture(name: FixtureName, seed: u64, sigma_floor: f64) -> Result<PomdpModel> {
    match name {
        FixtureName::FixId => Ok(fix_id()),
        FixtureName::FixNoisy => Ok(fix_noisy()),
        FixtureName::FixDec2 => Ok(fix_dec2()),
        FixtureName::FixLmdp => Ok(fix_lmdp()),
        FixtureName::RandomRevealing => {
            let mut rng = rng_for(seed, &[0xF1]);
            random_revealing_model(2, 2, 2, 2, sigma_floor, &mut rng)
        }
        FixtureName::RandomDecodable => {
            let mut rng = rng_for(seed, &[0xF2]);
            random_decodable_model(3, 2, 2, 2, &mut rng).map(|(m, _)| m)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dec2_decoder_verifies() {
        fix_dec2_decoder().verify(&fix_dec2()).unwrap();
    }

    #[test]
    fn fix_lmdp_shapes() {
        let m = fix_lmdp();
        assert_eq!(m.horizon, 3);
        assert_eq!(m.n_states, 8);
        assert_eq!(m.n_obs, 4);
        assert_eq!(m.n_actions, 2);
    }

    #[test]
    fn noisy_class_has_distinct_members() {
        let class = noisy_class(&Caps::default()).unwrap();
        assert_eq!(class.len(), 8);
        assert_eq!(class.truth, 0);
        assert_eq!(class.members[0], fix_noisy());
        for i in 0..8 {
            for j in i + 1..8 {
                assert_ne!(class.members[i], class.members[j]);
            }
        }
    }

    #[test]
    fn random_generators_are_seed_reproducible() {
        let a = generate_fixture(FixtureName::RandomRevealing, 42, 0.3).unwrap();
        let b = generate_fixture(FixtureName::RandomRevealing, 42, 0.3).unwrap();
        assert_eq!(a, b);
        let c = generate_fixture(FixtureName::RandomRevealing, 43, 0.3).unwrap();
        assert_ne!(a, c);
        let (d1, dec) = {
            let mut rng = rng_for(7, &[1]);
            random_decodable_model(3, 2, 2, 2, &mut rng).unwrap()
        };
        dec.verify(&d1).unwrap();
    }
}
