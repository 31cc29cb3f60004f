//! Norms over future-trajectory and core-test spaces, and B-stability
//! certification.
//!
//! The policy-weighted norm of a vector indexed by futures is computed by
//! exact backward dynamic programming: observation levels sum, action levels
//! maximize, leaves carry absolute values. The maximum over history-dependent
//! policies of a nonnegative linear functional is attained at a deterministic
//! policy, so the DP is exact, not approximate.

mod certify;
mod errors;

pub use certify::{
    certify_stability, check_weak_stability, sample_weak_pairs, weak_stability_ratio,
    well_conditioned_check, StabilityReport, WeakStabilityReport,
};
pub use errors::{
    b_error_at, b_error_initial, expected_b_errors, expected_sq_b_errors, hellinger_domination_check,
};

use nalgebra::DVector;

use crate::index::{Act, Obs};
use crate::psr::{CoreTestSet, Test};

/// `||b||_Pi = max_pi sum_tau pi(tau) |b(tau)|` for a vector indexed by the
/// `(n_obs * n_act)^len` futures in trajectory order. `len = 0` treats `b`
/// as a single scalar.
pub fn pi_norm(b: &[f64], n_obs: usize, n_act: usize, len: usize) -> f64 {
    let radix = n_obs * n_act;
    assert_eq!(b.len(), radix.pow(len as u32), "index set mismatch");
    let mut vals: Vec<f64> = b.iter().map(|v| v.abs()).collect();
    for _ in 0..len {
        let mut next = Vec::with_capacity(vals.len() / radix);
        for chunk in vals.chunks(radix) {
            let mut total = 0.0;
            for o in 0..n_obs {
                let mut best = f64::NEG_INFINITY;
                for a in 0..n_act {
                    best = best.max(chunk[o * n_act + a]);
                }
                total += best;
            }
            next.push(total);
        }
        vals = next;
    }
    vals[0]
}

/// As [`pi_norm`], also returning a maximizing deterministic policy as a map
/// from encoded `(future-prefix, obs)` nodes to actions. Prefixes are encoded
/// with the same mixed radix as the value vector.
pub fn pi_norm_argmax(b: &[f64], n_obs: usize, n_act: usize, len: usize) -> (f64, Vec<Vec<Act>>) {
    let radix = n_obs * n_act;
    assert_eq!(b.len(), radix.pow(len as u32));
    let mut vals: Vec<f64> = b.iter().map(|v| v.abs()).collect();
    // choices[l][prefix * n_obs + o] = argmax action at depth l (0-based).
    let mut choices: Vec<Vec<Act>> = Vec::with_capacity(len);
    for _ in 0..len {
        let mut next = Vec::with_capacity(vals.len() / radix);
        let mut level = Vec::with_capacity(vals.len() / n_act);
        for chunk in vals.chunks(radix) {
            let mut total = 0.0;
            for o in 0..n_obs {
                let mut best = f64::NEG_INFINITY;
                let mut best_a = 0;
                for a in 0..n_act {
                    let v = chunk[o * n_act + a];
                    if v > best {
                        best = v;
                        best_a = a;
                    }
                }
                level.push(best_a);
                total += best;
            }
            next.push(total);
        }
        vals = next;
        choices.push(level);
    }
    choices.reverse();
    (vals[0], choices)
}

/// The policy factor `pi(tau)` of the deterministic policy returned by
/// [`pi_norm_argmax`] on a future `tau` (encoded pairs).
pub fn argmax_policy_factor(choices: &[Vec<Act>], n_obs: usize, n_act: usize, tau: &[(Obs, Act)]) -> f64 {
    let radix = n_obs * n_act;
    let mut prefix = 0usize;
    for (l, &(o, a)) in tau.iter().enumerate() {
        if choices[l][prefix * n_obs + o] != a {
            return 0.0;
        }
        prefix = prefix * radix + o * n_act + a;
    }
    1.0
}

/// Norm over a test collection: `max_{T'} max_pi sum_{t in T'} pi(t) |v(t)|`,
/// the maximum over prefix-free subsets `T'` and policies. On a prefix-free
/// collection the subset maximization is vacuous and this is the plain
/// policy-weighted test norm.
pub fn pi_test_norm(tests: &[(&Test, f64)]) -> f64 {
    let idx: Vec<usize> = (0..tests.len()).collect();
    trie_value(tests, &idx, 0)
}

/// Recursive trie evaluation: at `depth`, every candidate test agrees on its
/// first `depth` observations and `depth` actions (by construction of the
/// recursion); group by the next observation, then choose the best action or
/// stop at a completed test.
fn trie_value(tests: &[(&Test, f64)], candidates: &[usize], depth: usize) -> f64 {
    let mut by_obs: std::collections::BTreeMap<Obs, Vec<usize>> = std::collections::BTreeMap::new();
    for &i in candidates {
        let t = tests[i].0;
        if t.len() > depth {
            by_obs.entry(t.obs[depth]).or_default().push(i);
        }
    }
    let mut total = 0.0;
    for (_, group) in by_obs {
        // A completed test at this node (observation depth + 1).
        let complete: f64 = group
            .iter()
            .filter(|&&i| tests[i].0.len() == depth + 1)
            .map(|&i| tests[i].1.abs())
            .fold(0.0, f64::max);
        // Or continue with the best action among longer tests.
        let mut by_act: std::collections::BTreeMap<Act, Vec<usize>> = std::collections::BTreeMap::new();
        for &i in &group {
            let t = tests[i].0;
            if t.len() > depth + 1 {
                by_act.entry(t.acts[depth]).or_default().push(i);
            }
        }
        let deeper = by_act
            .values()
            .map(|g| trie_value(tests, g, depth + 1))
            .fold(0.0, f64::max);
        total += complete.max(deeper);
    }
    total
}

/// The three components of the fused norm at step `h`: the `(1,2)` group
/// norm, the prefix-free policy-weighted test norm, and their maximum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusedNorm {
    pub one_two: f64,
    pub pi_prime: f64,
    pub fused: f64,
}

/// Fused norm of a vector over the step-`h` core tests.
pub fn fused_norm(q: &DVector<f64>, core: &CoreTestSet, h: usize) -> FusedNorm {
    let tests = core.tests(h);
    assert_eq!(q.len(), tests.len(), "vector does not match U_h");
    let groups = core.act_seq_index(h);
    let mut per_group = vec![0.0; core.action_seqs(h).len()];
    for (i, &g) in groups.iter().enumerate() {
        per_group[g] += q[i].abs();
    }
    let one_two = per_group.iter().map(|v| v * v).sum::<f64>().sqrt();

    let entries: Vec<(&Test, f64)> = core
        .prefix_free(h)
        .iter()
        .map(|&i| (&tests[i], q[i]))
        .collect();
    let pi_prime = pi_test_norm(&entries);
    FusedNorm {
        one_two,
        pi_prime,
        fused: one_two.max(pi_prime),
    }
}

/// Policy-weighted norm over the whole step-`h` core test set (the general
/// test-set norm used by weak stability).
pub fn pi_norm_on_tests(q: &DVector<f64>, core: &CoreTestSet, h: usize) -> f64 {
    let tests = core.tests(h);
    assert_eq!(q.len(), tests.len());
    let entries: Vec<(&Test, f64)> = tests.iter().zip(q.iter()).map(|(t, &v)| (t, v)).collect();
    pi_test_norm(&entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::psr::CoreTestSet;
    use crate::rng::rng_for;
    use crate::Caps;
    use rand::Rng;

    #[test]
    fn zero_vector_has_zero_norm() {
        let b = vec![0.0; 16];
        assert_eq!(pi_norm(&b, 2, 2, 2), 0.0);
    }

    #[test]
    fn scalar_case_is_absolute_value() {
        assert_eq!(pi_norm(&[-3.5], 2, 2, 0), 3.5);
    }

    #[test]
    fn seminorm_properties_on_random_vectors() {
        let mut rng = rng_for(3, &[1]);
        for _ in 0..50 {
            let x: Vec<f64> = (0..16).map(|_| rng.random::<f64>() - 0.5).collect();
            let y: Vec<f64> = (0..16).map(|_| rng.random::<f64>() - 0.5).collect();
            let nx = pi_norm(&x, 2, 2, 2);
            let ny = pi_norm(&y, 2, 2, 2);
            let sum: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a + b).collect();
            assert!(pi_norm(&sum, 2, 2, 2) <= nx + ny + 1e-10);
            let scaled: Vec<f64> = x.iter().map(|v| -2.5 * v).collect();
            assert!((pi_norm(&scaled, 2, 2, 2) - 2.5 * nx).abs() < 1e-10);
        }
    }

    #[test]
    fn argmax_policy_reproduces_the_norm() {
        let mut rng = rng_for(4, &[2]);
        for _ in 0..20 {
            let b: Vec<f64> = (0..16).map(|_| rng.random::<f64>() - 0.5).collect();
            let (v, choices) = pi_norm_argmax(&b, 2, 2, 2);
            assert!((v - pi_norm(&b, 2, 2, 2)).abs() < 1e-12);
            // Sum |b| over trajectories consistent with the argmax policy.
            let ix = crate::index::TrajIndexer::new(2, 2, 2);
            let mut total = 0.0;
            for idx in 0..ix.count() {
                let tau = ix.decode(idx);
                total += argmax_policy_factor(&choices, 2, 2, &tau) * b[idx].abs();
            }
            assert!((total - v).abs() < 1e-12);
        }
    }

    #[test]
    fn fused_norm_collapses_to_l1_for_single_action_group() {
        let caps = Caps::default();
        let core = CoreTestSet::windowed(2, 2, 2, 1, &caps).unwrap();
        let q = nalgebra::DVector::from_vec(vec![0.25, -0.5]);
        let f = fused_norm(&q, &core, 1);
        assert!((f.one_two - 0.75).abs() < 1e-15);
        assert!((f.fused - 0.75).abs() < 1e-15);
        // Single-observation tests carry no action factor, so the test norm
        // is the plain l1 norm as well.
        assert!((f.pi_prime - 0.75).abs() < 1e-15);
    }

    #[test]
    fn fused_norm_sandwich_against_l1() {
        let caps = Caps::default();
        let core = CoreTestSet::windowed(3, 2, 2, 2, &caps).unwrap();
        let u_a = core.u_a() as f64;
        let mut rng = rng_for(9, &[3]);
        for h in 1..=3usize {
            for _ in 0..40 {
                let q = nalgebra::DVector::from_fn(core.size(h), |_, _| rng.random::<f64>() - 0.5);
                let l1: f64 = q.iter().map(|v| v.abs()).sum();
                let f = fused_norm(&q, &core, h);
                assert!(f.fused <= l1 + 1e-10);
                assert!(l1 <= u_a.sqrt() * f.fused + 1e-10);
            }
        }
    }

    #[test]
    fn unit_test_indicator_has_unit_group_norm() {
        let caps = Caps::default();
        let core = CoreTestSet::windowed(3, 2, 2, 2, &caps).unwrap();
        let mut q = nalgebra::DVector::zeros(core.size(1));
        q[3] = 1.0;
        let f = fused_norm(&q, &core, 1);
        assert!((f.one_two - 1.0).abs() < 1e-15);
        assert!((f.pi_prime - 1.0).abs() < 1e-15);
    }
}
