//! Exact trajectory distributions and distances between them.

use nalgebra::DVector;

use super::{Policy, PomdpModel};
use crate::index::TrajIndexer;
use crate::{Caps, Error, Result};

/// Dense table of `P^pi(tau) = P(tau) * pi(tau)` over all trajectories of a
/// fixed length, with the do-probability and policy factor kept separately.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryDist {
    pub h_max: usize,
    pub indexer: TrajIndexer,
    /// `P(tau)`: observation probabilities under forced actions.
    pub p_do: Vec<f64>,
    /// `pi(tau)`: product (or mixture) of action probabilities.
    pub pi_fac: Vec<f64>,
}

impl TrajectoryDist {
    #[inline]
    pub fn prob(&self, idx: usize) -> f64 {
        self.p_do[idx] * self.pi_fac[idx]
    }

    pub fn probs(&self) -> Vec<f64> {
        self.p_do.iter().zip(&self.pi_fac).map(|(p, f)| p * f).collect()
    }

    pub fn total(&self) -> f64 {
        self.p_do.iter().zip(&self.pi_fac).map(|(p, f)| p * f).sum()
    }

    fn same_shape(&self, other: &Self) -> Result<()> {
        if self.indexer != other.indexer || self.h_max != other.h_max {
            return Err(Error::DimensionMismatch(
                "trajectory distributions cover different index sets".into(),
            ));
        }
        Ok(())
    }
}

/// Exact `P^pi` over all `(O*A)^h_max` trajectories, by forward recursion
/// over shared history prefixes.
pub fn trajectory_distribution(
    model: &PomdpModel,
    policy: &Policy,
    h_max: usize,
    caps: &Caps,
) -> Result<TrajectoryDist> {
    assert!(h_max <= model.horizon, "h_max exceeds the horizon");
    let indexer = TrajIndexer::checked(
        model.n_obs,
        model.n_actions,
        h_max,
        caps,
        "trajectory_distribution",
    )?;
    let n = indexer.count();
    let mut p_do = vec![0.0; n];

    // Depth-first over the history tree, carrying unnormalized latent weights.
    // Leaves are visited in lexicographic order, matching the indexer.
    let mut stack: Vec<(usize, usize, DVector<f64>)> = vec![(0, 0, model.init.clone())];
    while let Some((depth, prefix, alpha)) = stack.pop() {
        if depth == h_max {
            p_do[prefix] = alpha.sum();
            continue;
        }
        // Push in reverse so the smallest (o, a) pops first.
        for o in (0..model.n_obs).rev() {
            let mut w = alpha.clone();
            for s in 0..model.n_states {
                w[s] *= model.emit[depth][(o, s)];
            }
            for a in (0..model.n_actions).rev() {
                let next = prefix * indexer.radix() + o * model.n_actions + a;
                if depth + 1 == h_max {
                    // No need to apply the transition to score the leaf.
                    stack.push((depth + 1, next, w.clone()));
                } else {
                    stack.push((depth + 1, next, &model.trans[depth][a] * &w));
                }
            }
        }
    }

    let mut pi_fac = vec![0.0; n];
    fill_policy_factors(policy, &indexer, model.n_actions, &mut pi_fac);
    Ok(TrajectoryDist {
        h_max,
        indexer,
        p_do,
        pi_fac,
    })
}

fn fill_policy_factors(policy: &Policy, indexer: &TrajIndexer, n_act: usize, out: &mut [f64]) {
    // Mixtures are expanded by linearity so that nested mixtures do not
    // multiply the per-trajectory work.
    if let Policy::Mixture(parts) = policy {
        let mut buf = vec![0.0; out.len()];
        for (w, p) in parts {
            buf.iter_mut().for_each(|v| *v = 0.0);
            fill_policy_factors(p, indexer, n_act, &mut buf);
            for (o, b) in out.iter_mut().zip(&buf) {
                *o += w * b;
            }
        }
        return;
    }
    for (idx, slot) in out.iter_mut().enumerate() {
        let hist = indexer.decode(idx);
        *slot = policy.factor(&hist, n_act);
    }
}

/// Total variation distance `0.5 * sum |p - q|`.
pub fn tv_distance(d1: &TrajectoryDist, d2: &TrajectoryDist) -> Result<f64> {
    d1.same_shape(d2)?;
    let mut s = 0.0;
    for i in 0..d1.p_do.len() {
        s += (d1.prob(i) - d2.prob(i)).abs();
    }
    Ok(0.5 * s)
}

/// Squared Hellinger distance `sum (sqrt p - sqrt q)^2`, in `[0, 2]`.
pub fn hellinger_sq(d1: &TrajectoryDist, d2: &TrajectoryDist) -> Result<f64> {
    d1.same_shape(d2)?;
    let mut s = 0.0;
    for i in 0..d1.p_do.len() {
        let a = d1.prob(i).max(0.0).sqrt();
        let b = d2.prob(i).max(0.0).sqrt();
        s += (a - b) * (a - b);
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn uniform_distribution_normalizes() {
        let m = fixtures::fix_id();
        let d = trajectory_distribution(&m, &Policy::Uniform, 2, &Caps::default()).unwrap();
        assert!((d.total() - 1.0).abs() < 1e-10);
        assert!(d.probs().iter().all(|&p| p >= 0.0));
    }

    #[test]
    fn deterministic_policy_factor_is_indicator() {
        let m = fixtures::fix_noisy();
        let mut table = super::super::DetTable::new(2, 2, 2);
        for o in 0..2 {
            table.set(&[], o, 1);
            for a in 0..2 {
                for o2 in 0..2 {
                    table.set(&[(o, a)], o2, 0);
                }
            }
        }
        let d = trajectory_distribution(&m, &Policy::Deterministic(table), 2, &Caps::default()).unwrap();
        for i in 0..d.pi_fac.len() {
            assert!(d.pi_fac[i] == 0.0 || d.pi_fac[i] == 1.0);
        }
        assert!((d.total() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn matches_latent_path_enumeration_on_fix_noisy() {
        // Independent oracle: brute-force sum over latent state paths
        //   sum_{s1,s2} mu1(s1) O(o1|s1) pi(a1) T(s2|s1,a1) O(o2|s2) pi(a2).
        let m = fixtures::fix_noisy();
        let d = trajectory_distribution(&m, &Policy::Uniform, 2, &Caps::default()).unwrap();
        for idx in 0..d.indexer.count() {
            let t = d.indexer.decode(idx);
            let ((o1, a1), (o2, _a2)) = (t[0], t[1]);
            let mut p = 0.0;
            for s1 in 0..2 {
                for s2 in 0..2 {
                    p += m.init[s1]
                        * m.emit[0][(o1, s1)]
                        * 0.5
                        * m.trans[0][a1][(s2, s1)]
                        * m.emit[1][(o2, s2)]
                        * 0.5;
                }
            }
            assert!((d.prob(idx) - p).abs() < 1e-12, "trajectory {t:?}");
        }
    }

    #[test]
    fn capacity_cap_is_enforced() {
        let m = fixtures::fix_id();
        let caps = Caps::with_max_trajectories(3);
        assert!(matches!(
            trajectory_distribution(&m, &Policy::Uniform, 2, &caps),
            Err(Error::Capacity { .. })
        ));
    }

    #[test]
    fn disjoint_point_masses_have_extreme_distances() {
        let m = fixtures::fix_id();
        let d = trajectory_distribution(&m, &Policy::Uniform, 2, &Caps::default()).unwrap();
        let mut d1 = d.clone();
        let mut d2 = d.clone();
        for i in 0..d.p_do.len() {
            d1.p_do[i] = if i == 0 { 1.0 } else { 0.0 };
            d1.pi_fac[i] = 1.0;
            d2.p_do[i] = if i == 5 { 1.0 } else { 0.0 };
            d2.pi_fac[i] = 1.0;
        }
        assert!((tv_distance(&d1, &d2).unwrap() - 1.0).abs() < 1e-15);
        assert!((hellinger_sq(&d1, &d2).unwrap() - 2.0).abs() < 1e-15);
        assert_eq!(tv_distance(&d1, &d1).unwrap(), 0.0);
        assert_eq!(hellinger_sq(&d2, &d2).unwrap(), 0.0);
    }
}
