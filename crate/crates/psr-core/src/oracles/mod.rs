//! Numerical verifiers for the decorrelation machinery: the generalized
//! l2-Eluder inequality, the elliptical potential lemma, the decoupling
//! bound, and the approximate barycentric spanner. These are falsification
//! harnesses: each check returns the two sides (and signed slack) so suites
//! can hunt for counterexamples on random and structured instances.

mod spanner;

pub use spanner::{barycentric_spanner, Spanner};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::la;
use crate::learners::{ClassContext, OmleRun};
use crate::model::trajectory_distribution;
use crate::psr::{predictive_state, BRep};
use crate::{Error, Result};

/// Instance of the generalized l2-Eluder setting: vectors `x_{k,i}`,
/// distributions `q_k` over the inner index, and rule-indexed vector bundles
/// `y_{k,j,r}` defining `f_k(x) = max_r sum_j |<x, y_{k,j,r}>|`.
#[derive(Debug, Clone)]
pub struct EluderInstance {
    pub dim: usize,
    /// `xs[k][i]`.
    pub xs: Vec<Vec<DVector<f64>>>,
    /// `qs[k]`: probability over the inner index set.
    pub qs: Vec<Vec<f64>>,
    /// `ys[k][r][j]`.
    pub ys: Vec<Vec<Vec<DVector<f64>>>>,
}

impl EluderInstance {
    pub fn rounds(&self) -> usize {
        self.xs.len()
    }

    /// `f_k(x) = max_r sum_j |<x, y_{k,j,r}>|`.
    pub fn f(&self, k: usize, x: &DVector<f64>) -> f64 {
        self.ys[k]
            .iter()
            .map(|bundle| bundle.iter().map(|y| x.dot(y).abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn expected_f(&self, k: usize, t: usize) -> f64 {
        self.xs[t]
            .iter()
            .zip(&self.qs[t])
            .map(|(x, &q)| q * self.f(k, x))
            .sum()
    }

    pub fn expected_f_sq(&self, k: usize, t: usize) -> f64 {
        self.xs[t]
            .iter()
            .zip(&self.qs[t])
            .map(|(x, &q)| {
                let v = self.f(k, x);
                q * v * v
            })
            .sum()
    }

    /// The preconditions `beta_k = sum_{t<k} E_{i~q_t}[f_k(x_{t,i})^2]`,
    /// computed from the instance itself.
    pub fn betas(&self) -> Vec<f64> {
        (0..self.rounds())
            .map(|k| (0..k).map(|t| self.expected_f_sq(k, t)).sum())
            .collect()
    }

    /// `R_x^2 = max_k E_{i~q_k} ||x||^2` and `R_y = max_{k,r} sum_j ||y||_2`.
    pub fn radii(&self) -> (f64, f64) {
        let rx2 = (0..self.rounds())
            .map(|k| {
                self.xs[k]
                    .iter()
                    .zip(&self.qs[k])
                    .map(|(x, &q)| q * x.norm_squared())
                    .sum::<f64>()
            })
            .fold(0.0, f64::max);
        let ry = self
            .ys
            .iter()
            .flat_map(|per_r| per_r.iter())
            .map(|bundle| bundle.iter().map(|y| y.norm()).sum::<f64>())
            .fold(0.0, f64::max);
        (rx2, ry)
    }

    /// Spot-checks that each `f_k` is a convex, nonnegative, absolutely
    /// homogeneous function (true by construction; guards against malformed
    /// instances).
    pub fn check_shape<R: Rng>(&self, rng: &mut R) -> Result<()> {
        for k in 0..self.rounds() {
            for _ in 0..8 {
                let x = DVector::from_fn(self.dim, |_, _| {
                    let g: f64 = StandardNormal.sample(rng);
                    g
                });
                let y = DVector::from_fn(self.dim, |_, _| {
                    let g: f64 = StandardNormal.sample(rng);
                    g
                });
                let fx = self.f(k, &x);
                let fy = self.f(k, &y);
                if fx < 0.0 {
                    return Err(Error::InvalidModel("f is negative".into()));
                }
                let mid = self.f(k, &((&x + &y) * 0.5));
                if mid > 0.5 * (fx + fy) + 1e-9 {
                    return Err(Error::InvalidModel("f is not convex".into()));
                }
                if (self.f(k, &(&x * -2.0)) - 2.0 * fx).abs() > 1e-9 * (1.0 + fx) {
                    return Err(Error::InvalidModel("f is not absolutely homogeneous".into()));
                }
            }
        }
        Ok(())
    }
}

/// Result of a two-sided inequality check.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CheckOutcome {
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs - lhs`; nonnegative when the inequality holds.
    pub slack: f64,
}

/// Verifies the generalized l2-Eluder inequality at every round prefix,
/// returning the worst (minimum-slack) outcome:
/// `sum_{t<=k} M ∧ E[f_t(x_{t,i})]
///  <= sqrt(2 d (M^2 k + sum beta_t) log(1 + k R_x^2 R_y^2 / (d M^2)))`.
pub fn eluder_l2_check(inst: &EluderInstance, m_cap: f64) -> CheckOutcome {
    let d = inst.dim as f64;
    let betas = inst.betas();
    let (rx2, ry) = inst.radii();
    let mut worst = CheckOutcome {
        lhs: 0.0,
        rhs: 0.0,
        slack: f64::INFINITY,
    };
    let mut lhs = 0.0;
    let mut beta_sum = 0.0;
    for k in 1..=inst.rounds() {
        lhs += m_cap.min(inst.expected_f(k - 1, k - 1));
        beta_sum += betas[k - 1];
        let kf = k as f64;
        let rhs = (2.0
            * d
            * (m_cap * m_cap * kf + beta_sum)
            * (1.0 + kf * rx2 * ry * ry / (d * m_cap * m_cap)).ln())
        .sqrt();
        if rhs - lhs < worst.slack {
            worst = CheckOutcome {
                lhs,
                rhs,
                slack: rhs - lhs,
            };
        }
    }
    worst
}

/// Verifies the generalized elliptical potential inequality:
/// `sum_k min{1, tr(V_k^{-1} Phi_k)} <= 2 d log(1 + sum tr(Phi_k)/(d lambda0))`
/// with `V_k = lambda0 I + sum_{t<k} Phi_t`.
pub fn elliptical_potential_check(phis: &[DMatrix<f64>], lambda0: f64) -> Result<CheckOutcome> {
    let d = phis.first().map(|p| p.nrows()).unwrap_or(0);
    for p in phis {
        if p.nrows() != d || p.ncols() != d {
            return Err(Error::DimensionMismatch("Phi matrices must share shape".into()));
        }
        let sym = (p + p.transpose()) * 0.5;
        if (p - &sym).abs().max() > 1e-9 {
            return Err(Error::NotPsd(f64::NAN));
        }
        let eig = sym.symmetric_eigen();
        let min_eig = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        if min_eig < -1e-9 {
            return Err(Error::NotPsd(min_eig));
        }
    }
    let mut v = DMatrix::<f64>::identity(d, d) * lambda0;
    let mut lhs = 0.0;
    let mut tr_sum = 0.0;
    for p in phis {
        let vinv = v.clone().try_inverse().expect("V is positive definite");
        lhs += (&vinv * p).trace().min(1.0);
        tr_sum += p.trace();
        v += p;
    }
    let rhs = 2.0 * d as f64 * (1.0 + tr_sum / (d as f64 * lambda0)).ln();
    Ok(CheckOutcome {
        lhs,
        rhs,
        slack: rhs - lhs,
    })
}

/// Instance of the decoupling inequality: a shared vector family, a
/// distribution `mu` over functions, and per-function index distributions.
#[derive(Debug, Clone)]
pub struct DecouplingInstance {
    pub dim: usize,
    pub xs: Vec<DVector<f64>>,
    pub mu: Vec<f64>,
    /// `qs[theta]`: distribution over the vector index set.
    pub qs: Vec<Vec<f64>>,
    /// `ys[theta][r][j]`.
    pub ys: Vec<Vec<Vec<DVector<f64>>>>,
}

impl DecouplingInstance {
    fn f(&self, theta: usize, x: &DVector<f64>) -> f64 {
        self.ys[theta]
            .iter()
            .map(|bundle| bundle.iter().map(|y| x.dot(y).abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

/// Verifies the decoupling inequality
/// `E_{theta~mu} E_{i~q_theta}[f_theta(x_i)]
///  <= sqrt(d_X E_{theta,theta'~mu} E_{i~q_theta'}[f_theta(x_i)^2])`
/// with `d_X` the numerical span dimension of the vector family.
pub fn decoupling_check(inst: &DecouplingInstance) -> CheckOutcome {
    let n_theta = inst.mu.len();
    let lhs: f64 = (0..n_theta)
        .map(|th| {
            inst.mu[th]
                * inst
                    .xs
                    .iter()
                    .zip(&inst.qs[th])
                    .map(|(x, &q)| q * inst.f(th, x))
                    .sum::<f64>()
        })
        .sum();
    let mut cross = 0.0;
    for th in 0..n_theta {
        for tp in 0..n_theta {
            let inner: f64 = inst
                .xs
                .iter()
                .zip(&inst.qs[tp])
                .map(|(x, &q)| {
                    let v = inst.f(th, x);
                    q * v * v
                })
                .sum();
            cross += inst.mu[th] * inst.mu[tp] * inner;
        }
    }
    let span = if inst.xs.is_empty() {
        0
    } else {
        let m = DMatrix::from_columns(&inst.xs.iter().map(|v| v.clone()).collect::<Vec<_>>());
        la::numerical_rank(&m)
    };
    let rhs = (span as f64 * cross).sqrt();
    CheckOutcome {
        lhs,
        rhs,
        slack: rhs - lhs,
    }
}

/// Builds the Eluder instance realized by an OMLE run at the final step:
/// `x_i` are the truth's predictive states at the step-`H` histories, `q_t`
/// their visit distribution under the iteration-`t` greedy policy, and the
/// bundles collect the last-step operator rows of the chosen model minus the
/// truth, maximized over deterministic one-step rules. This is exactly the
/// error functional the learning analysis feeds to the decorrelation
/// argument, so the abstract inequality must hold on it.
pub fn eluder_instance_from_omle(
    ctx: &ClassContext,
    breps: &[BRep],
    run: &OmleRun,
) -> Result<EluderInstance> {
    let model = ctx.class.truth_model();
    let h = model.horizon; // step whose operators drive the errors
    let core = &breps[0].core;
    let n_obs = model.n_obs;
    let n_act = model.n_actions;
    let dim = core.size(h);
    let truth = &breps[ctx.class.truth];

    let ix = crate::index::TrajIndexer::checked(n_obs, n_act, h - 1, &ctx.caps, "omle eluder instance")?;
    let xs_once: Vec<DVector<f64>> = (0..ix.count())
        .map(|i| predictive_state(model, core, &ix.decode(i)).q)
        .collect();

    let rounds = run.chosen.len();
    let mut xs = Vec::with_capacity(rounds);
    let mut qs = Vec::with_capacity(rounds);
    let mut ys = Vec::with_capacity(rounds);
    let n_rules = n_act.pow(n_obs as u32);
    for &theta_k in &run.chosen {
        xs.push(xs_once.clone());
        let dist = trajectory_distribution(model, &ctx.opt_policies[theta_k], h - 1, &ctx.caps)?;
        qs.push((0..ix.count()).map(|i| dist.prob(i)).collect());
        let diff = &breps[theta_k];
        let per_rule: Vec<Vec<DVector<f64>>> = (0..n_rules)
            .map(|rule| {
                (0..n_obs)
                    .map(|o| {
                        let a = (rule / n_act.pow(o as u32)) % n_act;
                        (diff.op(h, o, a) - truth.op(h, o, a)).row(0).transpose() * 0.5
                    })
                    .collect()
            })
            .collect();
        ys.push(per_rule);
    }
    Ok(EluderInstance { dim, xs, qs, ys })
}

/// Random instance of the Eluder setting (shared across the randomized
/// falsification suites).
pub fn random_eluder_instance<R: Rng>(
    dim: usize,
    rounds: usize,
    inner: usize,
    rules: usize,
    bundle: usize,
    rng: &mut R,
) -> EluderInstance {
    let normal = StandardNormal;
    let draw = |rng: &mut R| DVector::from_fn(dim, |_, _| {
        let g: f64 = normal.sample(rng);
        g
    });
    let xs: Vec<Vec<DVector<f64>>> = (0..rounds)
        .map(|_| (0..inner).map(|_| draw(rng)).collect())
        .collect();
    let qs: Vec<Vec<f64>> = (0..rounds)
        .map(|_| {
            let mut q: Vec<f64> = (0..inner).map(|_| rng.random::<f64>() + 1e-3).collect();
            let s: f64 = q.iter().sum();
            q.iter_mut().for_each(|v| *v /= s);
            q
        })
        .collect();
    let ys: Vec<Vec<Vec<DVector<f64>>>> = (0..rounds)
        .map(|_| {
            (0..rules)
                .map(|_| (0..bundle).map(|_| draw(rng) * 0.5).collect())
                .collect()
        })
        .collect();
    EluderInstance { dim, xs, qs, ys }
}

/// Random PSD sequence `G^T G` for the elliptical potential suite.
pub fn random_psd_sequence<R: Rng>(dim: usize, count: usize, rng: &mut R) -> Vec<DMatrix<f64>> {
    (0..count)
        .map(|_| {
            let g = DMatrix::from_fn(dim, dim, |_, _| {
                let v: f64 = StandardNormal.sample(rng);
                v
            });
            let m = g.transpose() * g;
            (&m + m.transpose()) * 0.5
        })
        .collect()
}

/// Random decoupling instance over a possibly low-dimensional vector family.
pub fn random_decoupling_instance<R: Rng>(
    dim: usize,
    n_vectors: usize,
    n_theta: usize,
    rules: usize,
    bundle: usize,
    rng: &mut R,
) -> DecouplingInstance {
    let normal = StandardNormal;
    let draw = |rng: &mut R| DVector::from_fn(dim, |_, _| {
        let g: f64 = normal.sample(rng);
        g
    });
    // Half the time, restrict the x family to a lower-dimensional span.
    let span_dim = 1 + rng.random_range(0..dim);
    let basis: Vec<DVector<f64>> = (0..span_dim).map(|_| draw(rng)).collect();
    let xs: Vec<DVector<f64>> = (0..n_vectors)
        .map(|_| {
            let mut v = DVector::zeros(dim);
            for b in &basis {
                let c: f64 = StandardNormal.sample(rng);
                v += b * c;
            }
            v
        })
        .collect();
    let mu = {
        let mut w: Vec<f64> = (0..n_theta).map(|_| rng.random::<f64>() + 1e-3).collect();
        let s: f64 = w.iter().sum();
        w.iter_mut().for_each(|v| *v /= s);
        w
    };
    let qs: Vec<Vec<f64>> = (0..n_theta)
        .map(|_| {
            let mut q: Vec<f64> = (0..n_vectors).map(|_| rng.random::<f64>() + 1e-3).collect();
            let s: f64 = q.iter().sum();
            q.iter_mut().for_each(|v| *v /= s);
            q
        })
        .collect();
    let ys: Vec<Vec<Vec<DVector<f64>>>> = (0..n_theta)
        .map(|_| {
            (0..rules)
                .map(|_| (0..bundle).map(|_| draw(rng) * 0.5).collect())
                .collect()
        })
        .collect();
    DecouplingInstance { dim, xs, mu, qs, ys }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_for;

    #[test]
    fn zero_bundles_give_zero_lhs() {
        let mut inst = random_eluder_instance(3, 5, 2, 2, 2, &mut rng_for(1, &[1]));
        for per_r in inst.ys.iter_mut() {
            for bundle in per_r.iter_mut() {
                for y in bundle.iter_mut() {
                    y.fill(0.0);
                }
            }
        }
        let out = eluder_l2_check(&inst, 1.0);
        assert!(out.lhs <= 1e-15);
        assert!(out.slack >= 0.0);
    }

    #[test]
    fn single_round_rank_one_instance_holds() {
        let mut rng = rng_for(2, &[2]);
        for _ in 0..20 {
            let inst = random_eluder_instance(4, 1, 1, 1, 1, &mut rng);
            let out = eluder_l2_check(&inst, 1.0);
            assert!(out.slack >= -1e-9, "{out:?}");
        }
    }

    #[test]
    fn instance_shape_check_passes_on_random_instances() {
        let mut rng = rng_for(3, &[3]);
        let inst = random_eluder_instance(4, 6, 3, 2, 3, &mut rng);
        inst.check_shape(&mut rng).unwrap();
    }

    #[test]
    fn elliptical_identity_matches_harmonic_sum() {
        // Phi_k = I in d = 1: lhs = sum_k min(1, 1/k), rhs = 2 log(1 + K).
        for cap in [1usize, 5, 25, 100] {
            let phis: Vec<DMatrix<f64>> = (0..cap).map(|_| DMatrix::identity(1, 1)).collect();
            let out = elliptical_potential_check(&phis, 1.0).unwrap();
            let expected: f64 = (1..=cap).map(|k| (1.0 / k as f64).min(1.0)).sum();
            assert!((out.lhs - expected).abs() < 1e-10);
            assert!((out.rhs - 2.0 * (1.0 + cap as f64).ln()).abs() < 1e-12);
            assert!(out.slack >= 0.0, "K={cap}: {out:?}");
        }
    }

    #[test]
    fn elliptical_rejects_non_psd() {
        let mut m = DMatrix::identity(2, 2);
        m[(0, 0)] = -1.0;
        assert!(matches!(
            elliptical_potential_check(&[m], 1.0),
            Err(Error::NotPsd(_))
        ));
    }

    #[test]
    fn decoupling_point_mass_reduces_to_cauchy_schwarz() {
        let mut rng = rng_for(4, &[4]);
        for _ in 0..20 {
            let mut inst = random_decoupling_instance(4, 6, 3, 2, 2, &mut rng);
            inst.mu = vec![1.0, 0.0, 0.0];
            let out = decoupling_check(&inst);
            assert!(out.slack >= -1e-9, "{out:?}");
        }
    }

    #[test]
    fn decoupling_zero_functions() {
        let mut inst = random_decoupling_instance(3, 4, 2, 1, 1, &mut rng_for(5, &[5]));
        for per_theta in inst.ys.iter_mut() {
            for bundle in per_theta.iter_mut() {
                for y in bundle.iter_mut() {
                    y.fill(0.0);
                }
            }
        }
        let out = decoupling_check(&inst);
        assert!(out.lhs.abs() <= 1e-15 && out.rhs.abs() <= 1e-15);
    }
}
