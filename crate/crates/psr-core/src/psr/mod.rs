//! Core test sets, predictive states, PSR rank, and model classes.
//!
//! Tests, core test sets, and predictive states follow the usual PSR setup:
//! a test at step `h` is a sequence of future observations and interleaved
//! forced actions, the predictive state `q(tau_{h-1})` collects the success
//! probabilities of the step-`h` core tests conditioned on the history, and
//! the step-`H+1` test set holds the single dummy observation that ends an
//! episode (its predictive state is 1 on reachable histories, 0 otherwise).

mod brep;
mod constructors;
mod latent_mdp;

pub use brep::{validate_brep, BRep, BRepValidation, Provenance};
pub use constructors::{
    brep_decodable, brep_future_sufficient, brep_regular_psr, brep_revealing, emission_action_matrix,
    CoreMatrixMode, Decoder, LeftInverseMode, NaturalMode, RegularPsrReport,
};
pub use latent_mdp::{latent_mdp_to_pomdp, mdp_optimal_value, test_outcome_matrix, MdpComponent};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::index::{Act, Obs, Step, TrajIndexer};
use crate::model::PomdpModel;
use crate::{Caps, Error, Result};

/// A test: future observations `obs` with forced actions `acts` between them
/// (`obs.len() == acts.len() + 1`). The dummy test (both empty) stands for
/// the end-of-episode observation and always succeeds.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Test {
    pub obs: Vec<Obs>,
    pub acts: Vec<Act>,
}

impl Test {
    pub fn new(obs: Vec<Obs>, acts: Vec<Act>) -> Self {
        debug_assert!(obs.is_empty() || obs.len() == acts.len() + 1);
        Test { obs, acts }
    }

    pub fn dummy() -> Self {
        Test {
            obs: Vec::new(),
            acts: Vec::new(),
        }
    }

    pub fn is_dummy(&self) -> bool {
        self.obs.is_empty()
    }

    /// Number of observations in the test.
    pub fn len(&self) -> usize {
        self.obs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.obs.is_empty()
    }

    /// Whether `self` is a (non-strict) prefix of `other`.
    pub fn is_prefix_of(&self, other: &Test) -> bool {
        self.len() <= other.len()
            && self.obs[..] == other.obs[..self.len()]
            && self.acts[..] == other.acts[..self.acts.len().min(other.acts.len())]
            && self.acts.len() <= other.acts.len()
    }

    /// Whether the test begins with the step `(o, a)`; tests with a single
    /// observation carry no action, so only the observation is constrained.
    pub fn starts_with(&self, o: Obs, a: Act) -> bool {
        !self.is_dummy() && self.obs[0] == o && (self.acts.is_empty() || self.acts[0] == a)
    }

    /// The test obtained by dropping the leading `(o, a)` step, if consistent.
    pub fn tail(&self) -> Test {
        if self.len() <= 1 {
            Test::dummy()
        } else {
            Test {
                obs: self.obs[1..].to_vec(),
                acts: self.acts[1..].to_vec(),
            }
        }
    }
}

/// Enumerates all tests with `w` observations over `(n_obs, n_act)`, in
/// lexicographic order of the observation sequence, then the action sequence.
pub fn enumerate_tests(n_obs: usize, n_act: usize, w: usize) -> Vec<Test> {
    assert!(w >= 1);
    let n_o = n_obs.pow(w as u32);
    let n_a = n_act.pow((w - 1) as u32);
    let mut out = Vec::with_capacity(n_o * n_a);
    for oi in 0..n_o {
        let mut obs = vec![0; w];
        let mut rem = oi;
        for slot in obs.iter_mut().rev() {
            *slot = rem % n_obs;
            rem /= n_obs;
        }
        for ai in 0..n_a {
            let mut acts = vec![0; w - 1];
            let mut rem = ai;
            for slot in acts.iter_mut().rev() {
                *slot = rem % n_act;
                rem /= n_act;
            }
            out.push(Test::new(obs.clone(), acts));
        }
    }
    out
}

/// Core test sets for every step `1..=H+1`, with the derived action-sequence
/// projections and prefix-free subsets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoreTestSet {
    pub horizon: usize,
    pub n_obs: usize,
    pub n_act: usize,
    /// `tests[h]` for 1-based `h` in `1..=H+1`; index 0 is unused.
    tests: Vec<Vec<Test>>,
    /// Deduplicated action sequences of `tests[h]`, in first-appearance order.
    action_seqs: Vec<Vec<Vec<Act>>>,
    /// For each test, the index of its action sequence in `action_seqs[h]`.
    act_seq_of: Vec<Vec<usize>>,
    /// Indices of the prefix-free subset of `tests[h]`.
    prefix_free: Vec<Vec<usize>>,
}

impl CoreTestSet {
    /// Builds a core test set from explicit per-step test lists (1-based;
    /// `tests_by_step[0]` is ignored, `tests_by_step[H+1]` may be omitted and
    /// defaults to the dummy test).
    pub fn from_tests(
        horizon: usize,
        n_obs: usize,
        n_act: usize,
        mut tests_by_step: Vec<Vec<Test>>,
    ) -> Result<Self> {
        if tests_by_step.len() == horizon + 1 {
            tests_by_step.push(vec![Test::dummy()]);
        }
        if tests_by_step.len() != horizon + 2 {
            return Err(Error::DimensionMismatch(format!(
                "expected test lists for steps 1..={}",
                horizon + 1
            )));
        }
        for (h, list) in tests_by_step.iter().enumerate().skip(1) {
            if list.is_empty() {
                return Err(Error::EmptyActionSet(h));
            }
            for t in list {
                if h <= horizon {
                    if t.is_dummy() || t.obs.len() != t.acts.len() + 1 {
                        return Err(Error::DimensionMismatch(format!("malformed test at step {h}")));
                    }
                    if h + t.len() - 1 > horizon {
                        return Err(Error::DimensionMismatch(format!(
                            "test at step {h} extends past the horizon"
                        )));
                    }
                    if t.obs.iter().any(|&o| o >= n_obs) || t.acts.iter().any(|&a| a >= n_act) {
                        return Err(Error::DimensionMismatch(format!("symbol out of range at step {h}")));
                    }
                }
            }
        }
        let mut action_seqs = vec![Vec::new(); horizon + 2];
        let mut act_seq_of = vec![Vec::new(); horizon + 2];
        let mut prefix_free = vec![Vec::new(); horizon + 2];
        for h in 1..=horizon + 1 {
            let list = &tests_by_step[h];
            for t in list {
                let pos = match action_seqs[h].iter().position(|s| s == &t.acts) {
                    Some(p) => p,
                    None => {
                        action_seqs[h].push(t.acts.clone());
                        action_seqs[h].len() - 1
                    }
                };
                act_seq_of[h].push(pos);
            }
            for (i, t) in list.iter().enumerate() {
                let extended = list
                    .iter()
                    .enumerate()
                    .any(|(j, u)| j != i && t.is_prefix_of(u) && t.len() < u.len());
                if !extended {
                    prefix_free[h].push(i);
                }
            }
        }
        Ok(CoreTestSet {
            horizon,
            n_obs,
            n_act,
            tests: tests_by_step,
            action_seqs,
            act_seq_of,
            prefix_free,
        })
    }

    /// The windowed core test sets `U_h = (O x A)^{min(m-1, H-h)} x O`.
    pub fn windowed(horizon: usize, n_obs: usize, n_act: usize, m: usize, caps: &Caps) -> Result<Self> {
        if m == 0 || m > horizon {
            return Err(Error::DimensionMismatch(format!(
                "window m={m} must satisfy 1 <= m <= H={horizon}"
            )));
        }
        let mut tests = vec![Vec::new()];
        for h in 1..=horizon {
            let w = (m - 1).min(horizon - h) + 1;
            let count = n_obs.pow(w as u32) * n_act.pow((w - 1) as u32);
            if count > caps.max_trajectories {
                return Err(Error::Capacity {
                    required: count,
                    cap: caps.max_trajectories,
                    context: format!("core tests at step {h}"),
                });
            }
            tests.push(enumerate_tests(n_obs, n_act, w));
        }
        CoreTestSet::from_tests(horizon, n_obs, n_act, tests)
    }

    pub fn tests(&self, h: usize) -> &[Test] {
        &self.tests[h]
    }

    pub fn size(&self, h: usize) -> usize {
        self.tests[h].len()
    }

    pub fn action_seqs(&self, h: usize) -> &[Vec<Act>] {
        &self.action_seqs[h]
    }

    /// Index of each test's action sequence within `action_seqs(h)`.
    pub fn act_seq_index(&self, h: usize) -> &[usize] {
        &self.act_seq_of[h]
    }

    /// Indices of the prefix-free subset of `tests(h)`.
    pub fn prefix_free(&self, h: usize) -> &[usize] {
        &self.prefix_free[h]
    }

    /// `U_A = max_h |U_{A,h}|` over the in-horizon steps.
    pub fn u_a(&self) -> usize {
        (1..=self.horizon).map(|h| self.action_seqs[h].len()).max().unwrap_or(1)
    }
}

/// Predictive state `q(tau_{h-1})` at step `h = |tau| + 1`: the vector of
/// core-test success probabilities conditioned on the history; zero on
/// unreachable histories.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictiveState {
    pub step: usize,
    pub q: DVector<f64>,
}

/// Exact predictive state of `tau` under `model`.
pub fn predictive_state(model: &PomdpModel, core: &CoreTestSet, tau: &[Step]) -> PredictiveState {
    let h = tau.len() + 1;
    let (p, w) = model.forward(tau);
    if h == model.horizon + 1 {
        return PredictiveState {
            step: h,
            q: DVector::from_element(1, if p > 0.0 { 1.0 } else { 0.0 }),
        };
    }
    let tests = core.tests(h);
    let mut q = DVector::zeros(tests.len());
    if p > 0.0 {
        let belief = w / p;
        for (i, t) in tests.iter().enumerate() {
            q[i] = model.test_success_from(h - 1, &belief, &t.obs, &t.acts);
        }
    }
    PredictiveState { step: h, q }
}

/// Unnormalized predictive state `P(tau) * q(tau)= [P(tau, t)]_t`, the
/// quantity the B-representation products produce directly.
pub fn joint_state(model: &PomdpModel, core: &CoreTestSet, tau: &[Step]) -> DVector<f64> {
    let h = tau.len() + 1;
    let (p, w) = model.forward(tau);
    if h == model.horizon + 1 {
        return DVector::from_element(1, p);
    }
    let tests = core.tests(h);
    let mut q = DVector::zeros(tests.len());
    if p > 0.0 {
        for (i, t) in tests.iter().enumerate() {
            q[i] = model.test_success_from(h - 1, &w, &t.obs, &t.acts);
        }
    }
    q
}

/// The matrix `D_h = [q(tau_h)]_{tau_h}` of predictive states at step `h+1`
/// over all length-`h` histories (columns in trajectory index order).
pub fn d_matrix(model: &PomdpModel, core: &CoreTestSet, h: usize, caps: &Caps) -> Result<DMatrix<f64>> {
    let ix = TrajIndexer::checked(model.n_obs, model.n_actions, h, caps, "d_matrix")?;
    let rows = if h == model.horizon { 1 } else { core.size(h + 1) };
    let mut d = DMatrix::zeros(rows, ix.count());
    for col in 0..ix.count() {
        let tau = ix.decode(col);
        let ps = predictive_state(model, core, &tau);
        d.set_column(col, &ps.q);
    }
    Ok(d)
}

/// PSR rank: the maximum numerical rank of `D_h` over `h in 1..=H`.
pub fn psr_rank(model: &PomdpModel, core: &CoreTestSet, caps: &Caps) -> Result<usize> {
    let mut rank = 0;
    for h in 1..=model.horizon {
        let d = d_matrix(model, core, h, caps)?;
        rank = rank.max(crate::la::numerical_rank(&d));
    }
    Ok(rank)
}

/// A finite class of POMDP models sharing `(H, O, A)` and one core test set.
#[derive(Debug, Clone)]
pub struct ModelClass {
    pub members: Vec<PomdpModel>,
    pub truth: usize,
    pub core: CoreTestSet,
}

impl ModelClass {
    pub fn new(members: Vec<PomdpModel>, truth: usize, core: CoreTestSet) -> Result<Self> {
        if members.is_empty() || truth >= members.len() {
            return Err(Error::DimensionMismatch("empty class or truth index out of range".into()));
        }
        let (h, o, a) = (members[0].horizon, members[0].n_obs, members[0].n_actions);
        if members
            .iter()
            .any(|m| m.horizon != h || m.n_obs != o || m.n_actions != a)
        {
            return Err(Error::DimensionMismatch("class members must share (H, O, A)".into()));
        }
        if core.horizon != h || core.n_obs != o || core.n_act != a {
            return Err(Error::DimensionMismatch("core test set does not match the class".into()));
        }
        Ok(ModelClass { members, truth, core })
    }

    pub fn truth_model(&self) -> &PomdpModel {
        &self.members[self.truth]
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn windowed_sets_have_the_stated_sizes() {
        let caps = Caps::default();
        // m=1: single observations, empty action sequences, U_A = 1.
        let c1 = CoreTestSet::windowed(2, 2, 2, 1, &caps).unwrap();
        assert_eq!(c1.size(1), 2);
        assert_eq!(c1.size(2), 2);
        assert_eq!(c1.u_a(), 1);
        assert_eq!(c1.action_seqs(1), &[Vec::<usize>::new()]);
        // m=2, O=A=2: |U_h| = (2*2)*2 = 8 away from the horizon...
        let c2 = CoreTestSet::windowed(3, 2, 2, 2, &caps).unwrap();
        assert_eq!(c2.size(1), 8);
        assert_eq!(c2.size(2), 8);
        // ...and the window truncates at the horizon: |U_H| = O.
        assert_eq!(c2.size(3), 2);
        assert_eq!(c2.u_a(), 2);
        // Same-length tests are never prefixes of each other.
        assert_eq!(c2.prefix_free(1).len(), 8);
        assert_eq!(c2.size(4), 1);
        assert!(c2.tests(4)[0].is_dummy());
    }

    #[test]
    fn predictive_state_of_empty_history_is_o1_mu1() {
        let caps = Caps::default();
        let m = fixtures::fix_id();
        let core = CoreTestSet::windowed(2, 2, 2, 1, &caps).unwrap();
        let q0 = predictive_state(&m, &core, &[]);
        // q0 = O_1 mu_1 = (1, 0) for identity emission and mu_1 = e_0.
        assert!((q0.q[0] - 1.0).abs() < 1e-12);
        assert!(q0.q[1].abs() < 1e-12);
    }

    #[test]
    fn unreachable_history_gives_zero_vector() {
        let caps = Caps::default();
        let m = fixtures::fix_id();
        let core = CoreTestSet::windowed(2, 2, 2, 1, &caps).unwrap();
        // o_1 = 1 has probability zero under FIX-ID.
        let ps = predictive_state(&m, &core, &[(1, 0)]);
        assert!(ps.q.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn predictive_entries_are_probabilities_with_subnormalized_groups() {
        let caps = Caps::default();
        let m = fixtures::fix_noisy();
        let core = CoreTestSet::windowed(2, 2, 2, 2, &caps).unwrap();
        for hist in [vec![], vec![(0usize, 1usize)], vec![(1, 0)]] {
            let h = hist.len() + 1;
            let ps = predictive_state(&m, &core, &hist);
            assert!(ps.q.iter().all(|&v| (0.0..=1.0 + 1e-12).contains(&v)));
            // Per action sequence the success probabilities sum to <= 1.
            for (gi, _) in core.action_seqs(h).iter().enumerate() {
                let total: f64 = core
                    .act_seq_index(h)
                    .iter()
                    .enumerate()
                    .filter(|(_, &g)| g == gi)
                    .map(|(i, _)| ps.q[i])
                    .sum();
                assert!(total <= 1.0 + 1e-10);
            }
        }
    }

    #[test]
    fn psr_rank_of_fixtures() {
        let caps = Caps::default();
        let m = fixtures::fix_id();
        let core = CoreTestSet::windowed(2, 2, 2, 1, &caps).unwrap();
        assert_eq!(psr_rank(&m, &core, &caps).unwrap(), 2);

        // Rank never exceeds the latent-state count.
        let noisy = fixtures::fix_noisy();
        let r = psr_rank(&noisy, &core, &caps).unwrap();
        assert!(r <= noisy.n_states);

        // S = 1 collapses every predictive state onto one ray.
        let single = fixtures::single_state_model();
        let core1 = CoreTestSet::windowed(single.horizon, single.n_obs, single.n_actions, 1, &caps).unwrap();
        assert_eq!(psr_rank(&single, &core1, &caps).unwrap(), 1);
    }
}
